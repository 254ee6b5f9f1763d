//! Growth estimates: path integrals of **L**, the derivative bound along rays, the
//! radial-derivative condition, growth-ratio traces, the Lagrange problem and the
//! Gamma-ratio bound.

use num_complex::Complex64 as C64;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::criteria::{skeleton_max, AngleSpec};
use crate::error::{Error, Result};
use crate::exec;
use crate::expr::Expr;
use crate::jet::jet_from_expr;
use crate::lfield::LField;
use crate::multiindex::{ln_factorial, MultiIndex};
use crate::quad::{simpson, DEFAULT_TOL};
use crate::report::{fmt_g17, to_csv, CriterionReport, Verdict, Witness};
use crate::sampling;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthCurve {
    pub radii: Vec<Vec<f64>>,
    /// `|R_t|` per entry.
    pub norms: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub ratio: Vec<f64>,
}

impl GrowthCurve {
    fn new(radii: Vec<Vec<f64>>, lhs: Vec<f64>, rhs: Vec<f64>) -> GrowthCurve {
        let norms = radii.iter().map(|r| euclid(r)).collect();
        let ratio = lhs.iter().zip(&rhs).map(|(a, b)| a / b).collect();
        GrowthCurve { radii, norms, lhs, rhs, ratio }
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    /// Max of the ratio over the last quarter of the sequence.
    pub fn limsup_proxy(&self) -> f64 {
        let k = self.len();
        let start = k - (k / 4).max(1);
        self.ratio[start..].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_ratio(&self) -> f64 {
        *self.ratio.last().unwrap_or(&f64::NAN)
    }

    /// Columns `|R|, lhs, rhs, ratio`.
    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = (0..self.len())
            .map(|i| vec![self.norms[i], self.lhs[i], self.rhs[i], self.ratio[i]])
            .collect();
        to_csv(&["|R|", "lhs", "rhs", "ratio"], &rows)
    }
}

fn euclid(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn r_star(r: &[f64]) -> f64 {
    r.iter().cloned().fold(0.0, f64::max)
}

fn polar(r: &[f64], theta: &[f64]) -> Vec<C64> {
    r.iter().zip(theta).map(|(a, t)| C64::from_polar(*a, *t)).collect()
}

fn integrate(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    simpson(g, a, b, DEFAULT_TOL)
}

/// `Σ_j ∫₀^{r_j} l_j(R(j,σ,t) e^{iΘ}) dt`, where `R(j,σ,t)` has `t` in slot `j`,
/// `r⁰_k` where `σ(k) < σ(j)` and `r_k` elsewhere.
pub fn growth_integral(l: &LField, r: &[f64], theta: &[f64], r0: &[f64], sigma: &[usize]) -> Result<f64> {
    let n = l.dim();
    if r.len() != n || theta.len() != n || r0.len() != n || sigma.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: r.len() });
    }
    let mut total = 0.0;
    for j in 0..n {
        let g = |t: f64| {
            let radii: Vec<f64> = (0..n)
                .map(|k| {
                    if k == j {
                        t
                    } else if sigma[k] < sigma[j] {
                        r0[k]
                    } else {
                        r[k]
                    }
                })
                .collect();
            l.component(j, &polar(&radii, theta))
        };
        total += integrate(&g, 0.0, r[j])?;
    }
    Ok(total)
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralMin {
    pub value: f64,
    pub theta: Vec<f64>,
    pub sigma: Vec<usize>,
    pub evaluations: usize,
}

/// Minimum of [`growth_integral`] over a Θ-grid and all `σ ∈ Sₙ` (`n <= 4`).
pub fn growth_integral_min(l: &LField, r: &[f64], r0: &[f64], thetas: &[Vec<f64>]) -> Result<IntegralMin> {
    let n = l.dim();
    if n > 4 {
        return Err(Error::Config("permutation enumeration is limited to n <= 4".into()));
    }
    if thetas.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let perms = permutations(n);
    let jobs: Vec<(usize, usize)> =
        (0..thetas.len()).flat_map(|a| (0..perms.len()).map(move |b| (a, b))).collect();
    let vals = exec::map(&jobs, |&(a, b)| growth_integral(l, r, &thetas[a], r0, &perms[b]));
    let mut best: Option<(f64, usize)> = None;
    for (i, v) in vals.into_iter().enumerate() {
        let v = v?;
        if best.map_or(true, |b| v < b.0) {
            best = Some((v, i));
        }
    }
    let (value, i) = best.unwrap();
    Ok(IntegralMin {
        value,
        theta: thetas[jobs[i].0].clone(),
        sigma: perms[jobs[i].1].clone(),
        evaluations: jobs.len(),
    })
}

/// `∫₀^{r*} Σ_j (r_j/r*) l_j(τR/r* e^{iΘ}) dτ`.
pub fn ray_integral(l: &LField, r: &[f64], theta: &[f64]) -> Result<f64> {
    let rs = r_star(r);
    if rs == 0.0 {
        return Ok(0.0);
    }
    let g = |tau: f64| {
        let z = polar(&r.iter().map(|x| x * tau / rs).collect::<Vec<_>>(), theta);
        l.eval(&z).iter().zip(r).map(|(v, rj)| rj / rs * v).sum::<f64>()
    };
    integrate(&g, 0.0, rs)
}

/// Θ-grid used for maxima over angles; a single point when **L** is radial.
pub fn angle_grid(l: &LField, per_dim: Option<usize>) -> Vec<Vec<f64>> {
    if l.is_radial() {
        vec![vec![0.0; l.dim()]]
    } else {
        sampling::theta_grid(l.dim(), per_dim.unwrap_or_else(|| sampling::theta_per_dim(l.dim())))
    }
}

/// `max_Θ` of [`ray_integral`] over the grid.
pub fn ray_integral_max(l: &LField, r: &[f64], thetas: &[Vec<f64>]) -> Result<f64> {
    let vals = exec::map(thetas, |t| ray_integral(l, r, t));
    let mut best = f64::NEG_INFINITY;
    for v in vals {
        best = best.max(v?);
    }
    Ok(best)
}

/// The lower envelope `-Σ (r_j β / |R|) ln(1 - |R|)`.
pub fn lemma4_envelope(beta: f64, r: &[f64]) -> f64 {
    let nr = euclid(r);
    -r.iter().map(|rj| rj * beta / nr).sum::<f64>() * (1.0 - nr).ln()
}

/// Ray integrals along `R_t` against the envelope; errors if **L** violates the cone
/// condition on the sampled rays.
pub fn lemma4_divergence(l: &LField, radii_sequence: &[Vec<f64>]) -> Result<GrowthCurve> {
    if radii_sequence.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let thetas = angle_grid(l, None);
    for r in radii_sequence {
        let rs = r_star(r);
        for t in &thetas {
            for k in 1..=16 {
                let tau = rs * k as f64 / 16.0;
                let z = polar(&r.iter().map(|x| x * tau / rs).collect::<Vec<_>>(), t);
                let floor = l.beta() / (1.0 - sampling::euclid_norm(&z));
                if l.eval(&z).iter().any(|&v| v < floor * (1.0 - 1e-12)) {
                    return Err(Error::Inadmissible(format!(
                        "cone condition fails at |z| = {}",
                        fmt_g17(sampling::euclid_norm(&z))
                    )));
                }
            }
        }
    }
    let lhs = radii_sequence.iter().map(|r| ray_integral_max(l, r, &thetas)).collect::<Result<Vec<_>>>()?;
    let rhs = radii_sequence.iter().map(|r| lemma4_envelope(l.beta(), r)).collect();
    Ok(GrowthCurve::new(radii_sequence.to_vec(), lhs, rhs))
}

fn u_prime(l: &LField, j: usize, r: &[f64], theta: &[f64], t: f64) -> f64 {
    let rs = r_star(r);
    let h = 1e-6 * rs;
    let u = |s: f64| l.component(j, &polar(&r.iter().map(|x| x * s / rs).collect::<Vec<_>>(), theta));
    if t - h < 0.0 {
        (u(t + h) - u(t)) / h
    } else if t + h > rs {
        (u(t) - u(t - h)) / h
    } else {
        (u(t + h) - u(t - h)) / (2.0 * h)
    }
}

/// `ln max_{‖S‖<=N} |F^{(S)}(R e^{iΘ})| / (S! L^S)` against the integral bound built from
/// `Σ_j α_j l_j + N max_j α_j l_j + N max_j (-u'_j)⁺ / l_j`.
pub fn thm15_derivative_bound(f: &Expr, l: &LField, r: &[f64], theta: &[f64], big_n: u32) -> Result<CriterionReport> {
    let n = l.dim();
    let ln_head = |z: &[C64]| -> Result<f64> {
        let jet = jet_from_expr(f, z, big_n as usize)?;
        let lz = l.eval(z);
        let sh = jet.shape();
        Ok(sh.upto(big_n as usize)
            .iter()
            .map(|&p| jet.coeffs()[p as usize].norm() / sh.indices()[p as usize].pow_real(&lz))
            .fold(0.0, f64::max)
            .ln())
    };
    let z = polar(r, theta);
    let lhs = ln_head(&z)?;
    let base = ln_head(&vec![C64::new(0.0, 0.0); n])?;
    let rs = r_star(r);
    let nn = big_n as f64;
    let g = |tau: f64| {
        let w = polar(&r.iter().map(|x| x * tau / rs).collect::<Vec<_>>(), theta);
        let lw = l.eval(&w);
        let mut sum = 0.0;
        let mut top = 0.0f64;
        let mut neg = 0.0f64;
        for j in 0..n {
            let a = r[j] / rs * lw[j];
            sum += a;
            top = top.max(a);
            if big_n > 0 {
                neg = neg.max((-u_prime(l, j, r, theta, tau)).max(0.0) / lw[j]);
            }
        }
        sum + nn * top + nn * neg
    };
    let integral = integrate(&g, 0.0, rs)?;
    let rhs = base + integral;
    let mut rep = CriterionReport::new("thm15_derivative_bound");
    rep.set("lhs", lhs);
    rep.set("rhs", rhs);
    rep.set("base", base);
    rep.set("integral", integral);
    rep.set("N", nn);
    rep.samples_used = 1;
    rep.worst_margin = rhs - lhs;
    rep.verdict = if lhs <= rhs + 1e-9 { Verdict::Pass } else { Verdict::Fail };
    if !rep.passed() {
        rep.witness = Some(Witness::at(&z).value(lhs - rhs));
    }
    Ok(rep)
}

/// Sampled `C` from the radial-derivative condition and the uniform-vanishing proxy:
/// shell sups over the last quarter non-increasing and the final one below `1e-3`.
pub fn check_w_condition(
    l: &LField,
    radii_grid: &[Vec<f64>],
    t_points: usize,
    thetas: &[Vec<f64>],
) -> Result<CriterionReport> {
    if radii_grid.is_empty() || thetas.is_empty() || t_points < 2 {
        return Err(Error::EmptyGrid);
    }
    let n = l.dim();
    let per = exec::map(radii_grid, |r| {
        let rs = r_star(r);
        let mut best = (0.0f64, Vec::new());
        for th in thetas {
            for k in 0..t_points {
                let t = rs * k as f64 / (t_points - 1) as f64;
                let z = polar(&r.iter().map(|x| x * t / rs).collect::<Vec<_>>(), th);
                let lz = l.eval(&z);
                for j in 0..n {
                    if r[j] == 0.0 {
                        continue;
                    }
                    let d = (-u_prime(l, j, r, th, t)).max(0.0);
                    let q = d / (r[j] / rs * lz[j] * lz[j]);
                    if q > best.0 {
                        best = (q, z.clone());
                    }
                }
            }
        }
        best
    });
    let mut order: Vec<usize> = (0..radii_grid.len()).collect();
    order.sort_by(|&a, &b| euclid(&radii_grid[a]).total_cmp(&euclid(&radii_grid[b])));
    let shells: Vec<f64> = order.iter().map(|&i| per[i].0).collect();
    let (ci, c) = per.iter().enumerate().fold((0, 0.0f64), |acc, (i, p)| if p.0 > acc.1 { (i, p.0) } else { acc });
    let k = shells.len();
    let tail = &shells[k - (k / 4).max(1)..];
    let non_increasing = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15);
    let vanishing = non_increasing && *tail.last().unwrap() <= 1e-3;
    let mut rep = CriterionReport::new("w_condition");
    rep.samples_used = radii_grid.len() * thetas.len() * t_points;
    rep.set("C", c);
    rep.set("C_finite", if c.is_finite() { 1.0 } else { 0.0 });
    rep.set("W_member", if vanishing { 1.0 } else { 0.0 });
    rep.set("final_shell_sup", *shells.last().unwrap());
    rep.worst_margin = if c.is_finite() { 1.0 } else { -1.0 };
    rep.verdict = if c.is_finite() { Verdict::Pass } else { Verdict::Fail };
    if c > 0.0 {
        rep.witness = Some(Witness::at(&per[ci].1).value(c));
    }
    Ok(rep)
}

/// Growth-ratio trace `ln M(F, R_t) / max_Θ ∫ Σ α_j l_j` with the last-quarter max as the
/// limsup estimate, compared against `cap` when given.
pub fn growth_ratio_limsup(
    f: &Expr,
    l: &LField,
    radii_sequence: &[Vec<f64>],
    theta_per_dim: Option<usize>,
    cap: Option<f64>,
) -> Result<(GrowthCurve, CriterionReport)> {
    if radii_sequence.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let n = l.dim();
    let thetas = angle_grid(l, theta_per_dim);
    let origin = vec![C64::new(0.0, 0.0); n];
    let mut lhs = Vec::with_capacity(radii_sequence.len());
    let mut rhs = Vec::with_capacity(radii_sequence.len());
    for r in radii_sequence {
        lhs.push(skeleton_max(f, &origin, r, AngleSpec::for_dim(n))?.value.ln());
        rhs.push(ray_integral_max(l, r, &thetas)?);
    }
    let curve = GrowthCurve::new(radii_sequence.to_vec(), lhs, rhs);
    let est = curve.limsup_proxy();
    let mut rep = CriterionReport::new("growth_ratio");
    rep.samples_used = curve.len();
    rep.set("limsup_proxy", est);
    rep.set("final_ratio", curve.final_ratio());
    match cap {
        Some(c) => {
            rep.set("cap", c);
            rep.worst_margin = c - est;
            rep.verdict = if est <= c + 1e-12 { Verdict::Pass } else { Verdict::Fail };
        }
        None => {
            rep.worst_margin = if est.is_finite() { 0.0 } else { -1.0 };
            rep.verdict = if est.is_finite() { Verdict::Pass } else { Verdict::Fail };
        }
    }
    if !rep.passed() {
        let i = curve.len() - 1;
        rep.witness = Some(Witness { value: Some(curve.ratio[i]), note: Some(format!("|R| = {}", curve.norms[i])), ..Default::default() });
    }
    rep.note("limsup estimated by the max over the last quarter of the sequence");
    Ok((curve, rep))
}

/// `R_t = t_k (1,…,1)/√n` for `count` values of `|R|` evenly spaced in `[lo, hi]`.
pub fn diagonal_sequence(n: usize, lo: f64, hi: f64, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let t = if count == 1 { hi } else { lo + (hi - lo) * k as f64 / (count - 1) as f64 };
            vec![t / (n as f64).sqrt(); n]
        })
        .collect()
}

/// Caps `(C+1)N + 1` and `N + 1`.
pub fn thm15_caps(c: f64, big_n: u32) -> (f64, f64) {
    let nn = big_n as f64;
    ((c + 1.0) * nn + 1.0, nn + 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LagrangeSolution {
    pub x: Vec<f64>,
    pub h: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// `H(x) = ∏ x_j^{1/(2x_j)}`.
pub fn lagrange_h(x: &[f64]) -> f64 {
    x.iter().map(|v| v.ln() / (2.0 * v)).sum::<f64>().exp()
}

fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(1e-300)).collect()
}

/// Maximizes `H` subject to `Σ 1/x_j = 1` from a start point `y = 1/x` on the simplex,
/// by projected gradient ascent on `ln H = -½ Σ y_j ln y_j`.
pub fn lagrange_h_max_from(y0: &[f64]) -> LagrangeSolution {
    let n = y0.len();
    if n == 1 {
        return LagrangeSolution { x: vec![1.0], h: 1.0, kkt_residual: 0.0, iterations: 0 };
    }
    let obj = |y: &[f64]| -0.5 * y.iter().map(|v| v * v.ln()).sum::<f64>();
    let grad = |y: &[f64]| y.iter().map(|v| -0.5 * (v.ln() + 1.0)).collect::<Vec<f64>>();
    let residual = |g: &[f64]| {
        let mean = g.iter().sum::<f64>() / n as f64;
        g.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max)
    };
    let mut y = project_simplex(y0);
    let mut step = 1.0 / n as f64;
    let mut it = 0;
    while it < 100_000 {
        let g = grad(&y);
        if residual(&g) < 1e-13 {
            break;
        }
        let f0 = obj(&y);
        loop {
            let cand = project_simplex(&y.iter().zip(&g).map(|(a, b)| a + step * b).collect::<Vec<_>>());
            if obj(&cand) >= f0 || step < 1e-18 {
                y = cand;
                break;
            }
            step *= 0.5;
        }
        step = (step * 1.5).min(1.0);
        it += 1;
    }
    let x: Vec<f64> = y.iter().map(|v| 1.0 / v).collect();
    LagrangeSolution { h: lagrange_h(&x), kkt_residual: residual(&grad(&y)), x, iterations: it }
}

/// [`lagrange_h_max_from`] started at the uniform point.
pub fn lagrange_h_max(n: usize) -> LagrangeSolution {
    lagrange_h_max_from(&vec![1.0 / n as f64; n])
}

/// `ln[(n+‖S‖-1)! ∏Γ(s_j/2+1) / ((K+S)! Γ(n+‖S‖/2) r^{‖S‖})]`.
pub fn ln_gamma_ratio_bound(s: &MultiIndex, k: &MultiIndex, n: usize, r: f64) -> f64 {
    let ns = s.norm();
    let num = ln_factorial(n as u32 + ns - 1) + s.0.iter().map(|&x| ln_gamma(x as f64 / 2.0 + 1.0)).sum::<f64>();
    let den = k.add(s).ln_factorial() + ln_gamma(n as f64 + ns as f64 / 2.0) + ns as f64 * r.ln();
    num - den
}

pub fn gamma_ratio_bound(s: &MultiIndex, k: &MultiIndex, n: usize, r: f64) -> f64 {
    ln_gamma_ratio_bound(s, k, n, r).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaSweep {
    /// `‖S‖` along the diagonal.
    pub norms: Vec<u32>,
    pub ln_values: Vec<f64>,
    /// Least `‖S‖` beyond which every sampled value is `<= 1`; `None` if the last fails.
    pub n2: Option<u32>,
}

/// Diagonal sweep `S = (m,…,m)`, `K = 0`, up to `‖S‖ <= max_norm`.
pub fn gamma_diagonal_sweep(n: usize, r: f64, max_norm: u32) -> GammaSweep {
    let k = MultiIndex::zero(n);
    let mut norms = Vec::new();
    let mut vals = Vec::new();
    let mut m = 0u32;
    while m * n as u32 <= max_norm {
        let s = MultiIndex(vec![m; n]);
        norms.push(s.norm());
        vals.push(ln_gamma_ratio_bound(&s, &k, n, r));
        m += 1;
    }
    let last_bad = vals.iter().rposition(|&v| v > 1e-12);
    let n2 = match last_bad {
        None => Some(0),
        Some(i) if i + 1 < norms.len() => Some(norms[i + 1]),
        Some(_) => None,
    };
    GammaSweep { norms, ln_values: vals, n2 }
}
