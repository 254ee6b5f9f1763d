//! Skeleton and ball maximum modulus, and the theorem-level inequality checks.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::expr::Expr;
use crate::index::{global_index_estimate, local_index_with, GUARD};
use crate::jet::{jet_from_expr, Jet, DEFAULT_ORDER};
use crate::lfield::{estimate_lambda, estimate_lambda_ball, LField, LocalGrid, DEFAULT_THRESHOLD};
use crate::multiindex::{upto, MultiIndex};
use crate::report::{point_repr, point_string, CriterionReport, Verdict, Witness};
use crate::sampling::{self, euclid_norm, polydisc_reach, DEFAULT_SEED};

const REL_TOL: f64 = 1e-12;

/// Anything whose modulus can be evaluated at a point.
pub trait Modulus: Sync {
    fn modulus(&self, z: &[C64]) -> f64;

    /// Entire functions may be sampled on skeletons that leave the ball.
    fn entire(&self) -> bool {
        false
    }
}

impl Modulus for Expr {
    fn modulus(&self, z: &[C64]) -> f64 {
        self.eval(z).norm()
    }

    fn entire(&self) -> bool {
        !self.has_recip()
    }
}

impl Modulus for Jet {
    fn modulus(&self, z: &[C64]) -> f64 {
        self.eval(z).norm()
    }
}

impl<F: Fn(&[C64]) -> f64 + Sync> Modulus for F {
    fn modulus(&self, z: &[C64]) -> f64 {
        self(z)
    }
}

/// Angular sampling of a skeleton with doubling refinement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AngleSpec {
    pub initial: usize,
    pub max_doublings: usize,
    pub tol: f64,
    /// Cap on the total number of evaluated points.
    pub budget: usize,
}

impl AngleSpec {
    pub fn for_dim(n: usize) -> AngleSpec {
        AngleSpec {
            initial: sampling::default_angles(n),
            max_doublings: 4,
            tol: 1e-6,
            budget: 1 << 21,
        }
    }

    pub fn fixed(m: usize) -> AngleSpec {
        AngleSpec {
            initial: m,
            max_doublings: 0,
            tol: 0.0,
            budget: usize::MAX,
        }
    }

    /// Cheaper default for per-anchor checks.
    pub fn local(n: usize) -> AngleSpec {
        AngleSpec {
            max_doublings: 1,
            ..AngleSpec::for_dim(n)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkeletonMax {
    /// Sampled maximum, a lower bound for the true maximum.
    pub value: f64,
    pub argmax: Vec<[f64; 2]>,
    pub angles: usize,
    /// `(angles per dimension, sampled max)` per refinement level.
    pub trace: Vec<(usize, f64)>,
}

fn grid_max<F: Modulus + ?Sized>(f: &F, pts: &[Vec<C64>]) -> (f64, usize) {
    let vals = exec::map(pts, |z| f.modulus(z));
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in vals.into_iter().enumerate() {
        if v > best.0 || v.is_nan() {
            best = (v, i);
        }
    }
    best
}

/// `M(R, z⁰, F) = max |F|` over the skeleton `𝕋ⁿ(z⁰, R)`.
pub fn skeleton_max<F: Modulus + ?Sized>(
    f: &F,
    z0: &[C64],
    radii: &[f64],
    spec: AngleSpec,
) -> Result<SkeletonMax> {
    if !f.entire() && polydisc_reach(z0, radii) >= 1.0 {
        return Err(Error::PolydiscEscapesBall {
            anchor: point_string(z0),
        });
    }
    let n = z0.len();
    let mut m = spec.initial.max(1);
    let mut trace = Vec::new();
    let mut used = 0usize;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for level in 0..=spec.max_doublings {
        let count = m.pow(n as u32);
        if level > 0 && used + count > spec.budget {
            break;
        }
        let pts = sampling::torus_grid(z0, radii, m);
        let (v, i) = grid_max(f, &pts);
        used += count;
        trace.push((m, v));
        let prev = best.0;
        if v > best.0 || v.is_nan() {
            best = (v, pts[i].clone());
        }
        if level > 0 && (best.0 - prev).abs() <= spec.tol * best.0.abs() {
            break;
        }
        m *= 2;
    }
    Ok(SkeletonMax {
        value: best.0,
        argmax: point_repr(&best.1),
        angles: trace.last().unwrap().0,
        trace,
    })
}

/// Max of `|F|` over the circle of radius `rho` in `z_j` alone, other coordinates frozen.
pub fn circle_max<F: Modulus + ?Sized>(
    f: &F,
    z0: &[C64],
    j: usize,
    rho: f64,
    spec: AngleSpec,
) -> Result<SkeletonMax> {
    let mut center = z0.to_vec();
    let mut radii = vec![0.0; z0.len()];
    radii[j] = rho;
    if !f.entire() && polydisc_reach(z0, &radii) >= 1.0 {
        return Err(Error::PolydiscEscapesBall {
            anchor: point_string(z0),
        });
    }
    let mut m = spec.initial.max(1);
    let mut trace = Vec::new();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for level in 0..=spec.max_doublings {
        let pts: Vec<Vec<C64>> = (0..m)
            .map(|a| {
                center[j] =
                    z0[j] + C64::from_polar(rho, std::f64::consts::TAU * a as f64 / m as f64);
                center.clone()
            })
            .collect();
        let (v, i) = grid_max(f, &pts);
        trace.push((m, v));
        let prev = best.0;
        if v > best.0 {
            best = (v, pts[i].clone());
        }
        if level > 0 && (best.0 - prev).abs() <= spec.tol * best.0.abs() {
            break;
        }
        m *= 2;
    }
    Ok(SkeletonMax {
        value: best.0,
        argmax: point_repr(&best.1),
        angles: trace.last().unwrap().0,
        trace,
    })
}

/// Shared sampling options for the per-anchor checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckOpts {
    pub threshold: f64,
    pub order: usize,
    pub grid: LocalGrid,
    pub angles: AngleSpec,
    pub mc_samples: usize,
    pub seed: u64,
}

impl CheckOpts {
    pub fn for_dim(n: usize) -> CheckOpts {
        CheckOpts {
            threshold: DEFAULT_THRESHOLD,
            order: DEFAULT_ORDER,
            grid: LocalGrid::for_dim(n),
            angles: AngleSpec::local(n),
            mc_samples: 4096,
            seed: DEFAULT_SEED,
        }
    }
}

/// `|b_K| / L^K(z)` for `‖K‖ <= d`, in [`upto`] order.
fn normalized_at(f: &Expr, l: &LField, z: &[C64], d: u32) -> Result<Vec<f64>> {
    let jet = jet_from_expr(f, z, d as usize)?;
    let lz = l.eval(z);
    Ok(jet.iter().map(|(k, b)| b.norm() / k.pow_real(&lz)).collect())
}

/// `|F^{(K)}(z)|` for `‖K‖ <= d`, in [`upto`] order.
fn derivatives_at(f: &Expr, z: &[C64], d: u32) -> Result<Vec<f64>> {
    let jet = jet_from_expr(f, z, d as usize)?;
    Ok(jet.iter().map(|(k, b)| b.norm() * k.factorial()).collect())
}

fn polydisc_inside(f: &Expr, z0: &[C64], radii: &[f64]) -> Result<()> {
    if !f.entire() && polydisc_reach(z0, radii) >= 1.0 {
        return Err(Error::PolydiscEscapesBall {
            anchor: point_string(z0),
        });
    }
    Ok(())
}

fn argmax(v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &x) in v.iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

fn ln_ratio(num: f64, den: f64) -> Option<f64> {
    if num == 0.0 && den == 0.0 {
        None
    } else {
        Some(num.ln() - den.ln())
    }
}

fn sum_norm(r: &[f64]) -> f64 {
    r.iter().sum()
}

/// `ln p₀` with `p₀ = (2∏λ₁^{-N}λ₂^N)^q`, `q = ⌊2(N+1)·scale·∏λ₁^{-N}λ₂^{N+1}⌋ + 1`.
pub fn synthesized_ln_p0(big_n: u32, scale: f64, lambda1: &[f64], lambda2: &[f64]) -> (f64, f64) {
    let nn = big_n as f64;
    let ln_base: f64 = lambda1
        .iter()
        .zip(lambda2)
        .map(|(a, b)| -nn * a.ln() + nn * b.ln())
        .sum();
    let ln_q_arg: f64 = lambda1
        .iter()
        .zip(lambda2)
        .map(|(a, b)| -nn * a.ln() + (nn + 1.0) * b.ln())
        .sum();
    let q = (2.0 * (nn + 1.0) * scale * ln_q_arg.exp()).floor() + 1.0;
    (q, q * (2f64.ln() + ln_base))
}

struct AnchorOutcome {
    ln_ratio: Option<f64>,
    k0: MultiIndex,
    at: Vec<C64>,
    points: usize,
}

fn sampled_index(f: &Expr, l: &LField, anchors: &[Vec<C64>], order: usize) -> Result<Option<u32>> {
    Ok(global_index_estimate(f, l, anchors, order)?.sup)
}

fn finish(
    rep: &mut CriterionReport,
    outcomes: Vec<AnchorOutcome>,
    anchors: &[Vec<C64>],
    ln_bound: Option<f64>,
    threshold: f64,
    key: &str,
) {
    let mut worst: Option<(f64, usize)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        rep.samples_used += o.points;
        match o.ln_ratio {
            None => rep.samples_skipped += 1,
            Some(v) => {
                if worst.map_or(true, |w| v > w.0) {
                    worst = Some((v, i));
                }
            }
        }
    }
    let ln_cap = ln_bound.unwrap_or(threshold.ln());
    match worst {
        None => {
            rep.set(key, 0.0);
            rep.worst_margin = ln_cap;
            rep.verdict = Verdict::Indeterminate;
            rep.note("every anchor was 0/0");
        }
        Some((v, i)) => {
            rep.set(key, v.exp());
            rep.set(&format!("ln_{key}"), v);
            rep.worst_margin = ln_cap - v;
            rep.verdict = if v <= ln_cap + REL_TOL {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            let o = &outcomes[i];
            rep.witness = Some(Witness {
                point: Some(point_repr(&anchors[i])),
                index: Some(o.k0.clone()),
                value: Some(v.exp()),
                note: Some(format!("extremal point {}", point_string(&o.at))),
            });
        }
    }
    rep.apply_skip_rule();
}

/// Polydisc maximum of the normalized derivatives against the anchor value, with user or
/// synthesized `(n₀, p₀)`.
pub fn check_thm1(
    f: &Expr,
    l: &LField,
    r: &[f64],
    anchors: &[Vec<C64>],
    n0: Option<u32>,
    p0: Option<f64>,
    opts: &CheckOpts,
) -> Result<CriterionReport> {
    if anchors.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut rep = CriterionReport::new("thm1");
    let n0 = match n0 {
        Some(v) => v,
        None => match sampled_index(f, l, anchors, opts.order)? {
            Some(v) => v,
            None => return Ok(indeterminate(rep, "sampled index exceeds jet validity")),
        },
    };
    let ln_p0 = match p0 {
        Some(p) => Some(p.ln()),
        None => match estimate_lambda(l, r, anchors, opts.grid) {
            Ok(lam) => {
                let (q, lp) = synthesized_ln_p0(n0, sum_norm(r), &lam.lambda1, &lam.lambda2);
                rep.set("q", q);
                Some(lp)
            }
            Err(e) => {
                rep.note(format!(
                    "p0 not synthesized ({e}); compared against the threshold"
                ));
                None
            }
        },
    };
    for z0 in anchors {
        polydisc_inside(f, z0, &l.scaled_radii(r, z0))?;
    }
    let ks = upto(l.dim(), n0);
    let outcomes = exec::map(anchors, |z0| -> Result<AnchorOutcome> {
        let at0 = normalized_at(f, l, z0, n0)?;
        let (k0, rhs) = argmax(&at0);
        let pts = sampling::polydisc_grid(
            z0,
            &l.scaled_radii(r, z0),
            opts.grid.levels,
            opts.grid.angles,
        );
        let mut lhs = (f64::NEG_INFINITY, z0.clone());
        for z in &pts {
            let v = normalized_at(f, l, z, n0)?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            if v > lhs.0 {
                lhs = (v, z.clone());
            }
        }
        Ok(AnchorOutcome {
            ln_ratio: ln_ratio(lhs.0, rhs),
            k0: ks[k0].clone(),
            at: lhs.1,
            points: pts.len(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    rep.set("n0", n0 as f64);
    if let Some(lp) = ln_p0 {
        rep.set("ln_p0", lp);
        rep.set("p0", lp.exp());
    }
    finish(
        &mut rep,
        outcomes,
        anchors,
        ln_p0,
        opts.threshold,
        "p0_sampled",
    );
    Ok(rep)
}

fn indeterminate(mut rep: CriterionReport, why: &str) -> CriterionReport {
    rep.verdict = Verdict::Indeterminate;
    rep.worst_margin = f64::NAN;
    rep.note(why);
    rep
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Thm2Mode {
    /// Some `‖K⁰‖ <= n₀`.
    Necessary,
    /// Axis `K⁰_j` for every `j`.
    Sufficient,
}

fn min_ratio(cands: impl Iterator<Item = usize>, sk: &[f64], at: &[f64]) -> (Option<f64>, usize) {
    let mut best: (Option<f64>, usize) = (None, 0);
    let mut vacuous = None;
    for i in cands {
        match ln_ratio(sk[i], at[i]) {
            None => {
                vacuous.get_or_insert(i);
            }
            Some(v) => {
                if best.0.map_or(true, |b| v < b) {
                    best = (Some(v), i);
                }
            }
        }
    }
    match (best, vacuous) {
        (_, Some(i)) => (Some(f64::NEG_INFINITY), i),
        (b, None) => b,
    }
}

/// Skeleton-to-anchor ratios of `|F^{(K)}|`.
pub fn check_thm2(
    f: &Expr,
    l: &LField,
    r: &[f64],
    anchors: &[Vec<C64>],
    mode: Thm2Mode,
    n0: Option<u32>,
    p: Option<f64>,
    opts: &CheckOpts,
) -> Result<CriterionReport> {
    if anchors.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let n = l.dim();
    let mut rep = CriterionReport::new(match mode {
        Thm2Mode::Necessary => "thm2_necessary",
        Thm2Mode::Sufficient => "thm2_sufficient",
    });
    let n0 = match n0 {
        Some(v) => v,
        None => match sampled_index(f, l, anchors, opts.order)? {
            Some(v) => v,
            None => return Ok(indeterminate(rep, "sampled index exceeds jet validity")),
        },
    };
    let ln_p = match p {
        Some(p) => Some(p.ln()),
        None => {
            if let Ok(lam) = estimate_lambda(l, r, anchors, opts.grid) {
                let (_, lp0) = synthesized_ln_p0(n0, sum_norm(r), &lam.lambda1, &lam.lambda2);
                let lp = lp0 + n0 as f64 * lam.lambda2.iter().map(|x| x.ln()).sum::<f64>();
                rep.set("ln_p_reference", lp);
            }
            None
        }
    };
    let ks = upto(n, n0);
    let outcomes = exec::map(anchors, |z0| -> Result<AnchorOutcome> {
        let radii = l.scaled_radii(r, z0);
        polydisc_inside(f, z0, &radii)?;
        let at = derivatives_at(f, z0, n0)?;
        let pts = sampling::torus_grid(z0, &radii, opts.angles.initial);
        let mut sk = vec![0.0f64; ks.len()];
        for z in &pts {
            for (s, v) in sk.iter_mut().zip(derivatives_at(f, z, n0)?) {
                *s = s.max(v);
            }
        }
        let (v, i) = match mode {
            Thm2Mode::Necessary => min_ratio(0..ks.len(), &sk, &at),
            Thm2Mode::Sufficient => {
                let mut worst: (Option<f64>, usize) = (Some(f64::NEG_INFINITY), 0);
                for j in 0..n {
                    let axis = (0..ks.len()).filter(|&i| ks[i].norm() == ks[i].0[j]);
                    let (v, i) = min_ratio(axis, &sk, &at);
                    match (v, worst.0) {
                        (None, _) => worst = (None, i),
                        (Some(v), Some(w)) if v > w => worst = (Some(v), i),
                        _ => {}
                    }
                }
                worst
            }
        };
        Ok(AnchorOutcome {
            ln_ratio: v.map(|x| x.max(0.0)),
            k0: ks[i].clone(),
            at: z0.clone(),
            points: pts.len(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    rep.set("n0", n0 as f64);
    if let Some(lp) = ln_p {
        rep.set("p", lp.exp());
    }
    finish(
        &mut rep,
        outcomes,
        anchors,
        ln_p,
        opts.threshold,
        "p_sampled",
    );
    Ok(rep)
}

/// `p₁* = sup M(R″/L(z⁰), z⁰, F) / M(R′/L(z⁰), z⁰, F)` and the index bounds it implies.
pub fn check_thm5(
    f: &Expr,
    l: &LField,
    r1: &[f64],
    r2: &[f64],
    anchors: &[Vec<C64>],
    opts: &CheckOpts,
) -> Result<CriterionReport> {
    if anchors.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut per = Vec::with_capacity(anchors.len());
    for z0 in anchors {
        let inner = skeleton_max(f, z0, &l.scaled_radii(r1, z0), opts.angles)?;
        let outer = skeleton_max(f, z0, &l.scaled_radii(r2, z0), opts.angles)?;
        if inner.value == 0.0 {
            return Err(Error::ZeroDenominator {
                anchor: point_string(z0),
            });
        }
        let pts = inner
            .trace
            .iter()
            .chain(&outer.trace)
            .map(|t| t.0.pow(z0.len() as u32))
            .sum();
        per.push(AnchorOutcome {
            ln_ratio: Some(outer.value.ln() - inner.value.ln()),
            k0: MultiIndex::zero(l.dim()),
            at: z0.clone(),
            points: pts,
        });
    }
    let mut rep = CriterionReport::new("thm5");
    finish(&mut rep, per, anchors, None, opts.threshold, "p1");
    if let Some(ln_p1) = rep.get("ln_p1") {
        let min_r2 = r2.iter().cloned().fold(f64::INFINITY, f64::min);
        if r1.iter().all(|&x| x < 1.0) && min_r2 > 1.0 {
            let s: f64 = r1.iter().map(|x| (1.0 - x).ln()).sum();
            rep.set("index_bound", (ln_p1 - s) / min_r2.ln());
            rep.set("index_bound_alt", ln_p1 / min_r2 - s / min_r2);
        } else {
            rep.note("index bounds need r'_j < 1 < min r''_j");
        }
    }
    Ok(rep)
}

/// Ratio of circle maxima of `|F|` in `z_j` at radii `r₂/l_j(z⁰)` and `r₁/l_j(z⁰)`.
pub fn check_directional(
    f: &Expr,
    l: &LField,
    j: usize,
    r1: f64,
    r2: f64,
    anchors: &[Vec<C64>],
    opts: &CheckOpts,
) -> Result<CriterionReport> {
    if anchors.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let spec = AngleSpec {
        initial: 256,
        max_doublings: 4,
        tol: 1e-9,
        budget: usize::MAX,
    };
    let mut per = Vec::with_capacity(anchors.len());
    for z0 in anchors {
        let lj = l.component(j, z0);
        let a = circle_max(f, z0, j, r1 / lj, spec)?;
        let b = circle_max(f, z0, j, r2 / lj, spec)?;
        if a.value == 0.0 {
            return Err(Error::ZeroDenominator {
                anchor: point_string(z0),
            });
        }
        per.push(AnchorOutcome {
            ln_ratio: Some(b.value.ln() - a.value.ln()),
            k0: MultiIndex::axis(l.dim(), j, 1),
            at: z0.clone(),
            points: a.trace.iter().chain(&b.trace).map(|t| t.0).sum(),
        });
    }
    let mut rep = CriterionReport::new("directional");
    rep.set("j", (j + 1) as f64);
    finish(&mut rep, per, anchors, None, opts.threshold, "p_j");
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HaymanForm {
    /// `|F^{(J)}| / L^J`, no factorials.
    Plain,
    /// `|F^{(J)}| / (J! L^J)`.
    Factorial,
}

/// `S = 2β(2β²+1)√n / (2β²-1)`.
pub fn s_constant(beta: f64, n: usize) -> f64 {
    2.0 * beta * (2.0 * beta * beta + 1.0) * (n as f64).sqrt() / (2.0 * beta * beta - 1.0)
}

/// `c* = sup max_{‖J‖=p+1} (…) / max_{‖K‖<=p} (…)`, compared against `c` or the threshold.
pub fn check_hayman(
    f: &Expr,
    l: &LField,
    p: u32,
    anchors: &[Vec<C64>],
    form: HaymanForm,
    c: Option<f64>,
    opts: &CheckOpts,
) -> Result<CriterionReport> {
    if anchors.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let ks = upto(l.dim(), p + 1);
    let outcomes = exec::map(anchors, |z| -> Result<AnchorOutcome> {
        let mut v = normalized_at(f, l, z, p + 1)?;
        if form == HaymanForm::Plain {
            for (x, k) in v.iter_mut().zip(&ks) {
                *x *= k.factorial();
            }
        }
        let (mut num, mut den) = ((f64::NEG_INFINITY, 0), (f64::NEG_INFINITY, 0));
        for (i, (&x, k)) in v.iter().zip(&ks).enumerate() {
            let slot = if k.norm() == p + 1 {
                &mut num
            } else {
                &mut den
            };
            if x > slot.0 {
                *slot = (x, i);
            }
        }
        Ok(AnchorOutcome {
            ln_ratio: ln_ratio(num.0, den.0),
            k0: ks[num.1].clone(),
            at: z.clone(),
            points: 1,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut rep = CriterionReport::new(match form {
        HaymanForm::Plain => "hayman",
        HaymanForm::Factorial => "hayman_factorial",
    });
    rep.set("p", p as f64);
    rep.set("S", s_constant(l.beta(), l.dim()));
    if let Some(c) = c {
        rep.set("c", c);
    }
    finish(
        &mut rep,
        outcomes,
        anchors,
        c.map(f64::ln),
        opts.threshold,
        "c_sampled",
    );
    Ok(rep)
}

/// Reference constant `∏(1-θ_j)/θ_j`.
pub fn tail_constant(theta: &[f64]) -> f64 {
    theta.iter().map(|t| (1.0 - t) / t).product()
}

/// `Σ_{‖J‖ > cap} θ^J`.
fn geometric_tail(theta: &[f64], cap: u32) -> f64 {
    let all: f64 = theta.iter().map(|t| 1.0 / (1.0 - t)).product();
    let head: f64 = upto(theta.len(), cap)
        .iter()
        .map(|k| k.pow_real(theta))
        .sum();
    (all - head).max(0.0)
}

/// Certified constant for a given `N` when the index under `θL` is `Ñ`:
/// `1 / (θ_min^{-Ñ} Σ_{‖J‖>N} θ^J)`.
pub fn certified_tail_constant(theta: &[f64], big_n: u32, n_theta: u32) -> f64 {
    let tmin = theta.iter().cloned().fold(1.0, f64::min);
    1.0 / (tmin.powi(-(n_theta as i32)) * geometric_tail(theta, big_n))
}

struct TailSample {
    lhs: f64,
    rhs: f64,
    slack: f64,
    n_theta: u32,
}

/// `Σ_{‖K‖<=N} |F^{(K)}|/(K!L^K) >= c · Σ_{‖K‖>N} |F^{(K)}|/(K!L^K)`, the infinite tail
/// beyond `tail_cap` bounded by `H_θ Σ θ^J` with `H_θ` from the index `Ñ` under `θL`.
///
/// Without `c` the default is `∏(1-θ_j)/θ_j` when `N >= Ñ` on the samples, and
/// [`certified_tail_constant`] otherwise.
pub fn check_tail(
    f: &Expr,
    l: &LField,
    big_n: u32,
    c: Option<f64>,
    theta: &[f64],
    tail_cap: u32,
    anchors: &[Vec<C64>],
    opts: &CheckOpts,
) -> Result<CriterionReport> {
    if anchors.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if tail_cap <= big_n {
        return Err(Error::TailBoundUnavailable(format!(
            "tail cap {tail_cap} must exceed N = {big_n}"
        )));
    }
    if theta.len() != l.dim() || theta.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::TailBoundUnavailable(
            "theta must lie in (0, 1) per component".into(),
        ));
    }
    let order = (tail_cap as usize + GUARD).max(opts.order);
    let geo = geometric_tail(theta, tail_cap);
    let samples = exec::map(anchors, |z| -> Result<TailSample> {
        let jet = jet_from_expr(f, z, order)?;
        let lz = l.eval(z);
        let tl: Vec<f64> = lz.iter().zip(theta).map(|(a, b)| a * b).collect();
        let rep = local_index_with(&jet, &tl);
        let nt = rep.local_index.ok_or_else(|| {
            Error::TailBoundUnavailable(format!(
                "index under theta*L not certified at {}",
                point_string(z)
            ))
        })?;
        if nt > tail_cap || rep.d_valid < tail_cap as usize {
            return Err(Error::TailBoundUnavailable(format!(
                "truncation too short at {}: index {nt}, valid degree {}",
                point_string(z),
                rep.d_valid
            )));
        }
        let sh = jet.shape();
        let (mut lhs, mut rhs, mut h) = (0.0, 0.0, 0.0f64);
        for &p in sh.upto(tail_cap as usize) {
            let p = p as usize;
            let k = &sh.indices()[p];
            let b = jet.coeffs()[p].norm();
            let v = b / k.pow_real(&lz);
            if k.norm() <= big_n {
                lhs += v;
            } else {
                rhs += v;
            }
            if k.norm() <= nt {
                h = h.max(b / k.pow_real(&tl));
            }
        }
        Ok(TailSample {
            lhs,
            rhs,
            slack: h * geo,
            n_theta: nt,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let n_theta = samples.iter().map(|s| s.n_theta).max().unwrap_or(0);
    let reference = tail_constant(theta);
    let certified = certified_tail_constant(theta, big_n, n_theta);
    let c = c.unwrap_or(if big_n >= n_theta {
        reference
    } else {
        certified
    });
    let outcomes = samples
        .iter()
        .zip(anchors)
        .map(|(s, z)| AnchorOutcome {
            ln_ratio: ln_ratio(c * (s.rhs + s.slack), s.lhs),
            k0: MultiIndex::zero(l.dim()),
            at: z.clone(),
            points: 1,
        })
        .collect();
    let mut rep = CriterionReport::new("tail");
    rep.set("N", big_n as f64);
    rep.set("N_theta", n_theta as f64);
    rep.set("c", c);
    rep.set("c_reference", reference);
    rep.set("c_stated", 1.0 / reference);
    rep.set("c_certified", certified);
    rep.set("tail_cap", tail_cap as f64);
    rep.set(
        "tail_slack_max",
        samples.iter().map(|s| s.slack).fold(0.0, f64::max),
    );
    finish(
        &mut rep,
        outcomes,
        anchors,
        Some(0.0),
        opts.threshold,
        "rhs_over_lhs",
    );
    Ok(rep)
}

/// Sandwich `θ₁ L̃ <= L <= θ₂ L̃` on the anchors, then the Hayman constants for both fields.
pub fn check_thm3_equiv(
    f: &Expr,
    l: &LField,
    ltilde: &LField,
    theta1: &[f64],
    theta2: &[f64],
    p: u32,
    anchors: &[Vec<C64>],
    opts: &CheckOpts,
) -> Result<CriterionReport> {
    for z in anchors {
        let a = l.eval(z);
        let b = ltilde.eval(z);
        for j in 0..l.dim() {
            let lo = theta1[j] * b[j] * (1.0 - REL_TOL);
            let hi = theta2[j] * b[j] * (1.0 + REL_TOL);
            if a[j] < lo || a[j] > hi {
                return Err(Error::SandwichViolated {
                    point: point_string(z),
                    component: j + 1,
                });
            }
        }
    }
    let h1 = check_hayman(f, l, p, anchors, HaymanForm::Plain, None, opts)?;
    let h2 = check_hayman(f, ltilde, p, anchors, HaymanForm::Plain, None, opts)?;
    let mut rep = CriterionReport::new("thm3_equivalence");
    rep.samples_used = h1.samples_used + h2.samples_used;
    rep.samples_skipped = h1.samples_skipped + h2.samples_skipped;
    rep.set("c_sampled_L", h1.get("c_sampled").unwrap_or(f64::NAN));
    rep.set("c_sampled_Ltilde", h2.get("c_sampled").unwrap_or(f64::NAN));
    rep.verdict = if h1.verdict == h2.verdict {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    rep.worst_margin = if rep.verdict == Verdict::Pass {
        0.0
    } else {
        -1.0
    };
    if rep.verdict == Verdict::Fail {
        rep.witness = h1.witness.clone().or(h2.witness.clone());
    }
    rep.note(format!("L: {:?}, Ltilde: {:?}", h1.verdict, h2.verdict));
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BallMode {
    /// Normalized derivatives over `B[z⁰, r/𝓛(z⁰)]`.
    Necessary,
    /// Normalized derivatives over `B[z⁰, r/ℓ(z⁰)]`.
    Sufficient,
    /// `|F^{(K⁰)}|` over `B[z⁰, r/𝓛(z⁰)]`.
    ModMax,
    /// Axis `K⁰_j` over `B[z⁰, r/ℓ(z⁰)]`.
    ModMaxAxis,
}

impl BallMode {
    fn uses_big_l(self) -> bool {
        matches!(self, BallMode::Necessary | BallMode::ModMax)
    }

    fn name(self) -> &'static str {
        match self {
            BallMode::Necessary => "ball_necessary",
            BallMode::Sufficient => "ball_sufficient",
            BallMode::ModMax => "ball_modmax",
            BallMode::ModMaxAxis => "ball_modmax_axis",
        }
    }
}

/// Ball analogs of the polydisc checks with Monte Carlo samples of the closed ball.
pub fn check_ball_variant(
    f: &Expr,
    l: &LField,
    r: f64,
    anchors: &[Vec<C64>],
    mode: BallMode,
    n0: Option<u32>,
    bound: Option<f64>,
    opts: &CheckOpts,
) -> Result<CriterionReport> {
    if anchors.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let n = l.dim();
    let mut rep = CriterionReport::new(mode.name());
    let radius = |z: &[C64]| {
        if mode.uses_big_l() {
            r / l.big_l(z)
        } else {
            r / l.ell(z)
        }
    };
    for z0 in anchors {
        if !f.entire() && euclid_norm(z0) + radius(z0) >= 1.0 {
            return Err(Error::BallEscapesDomain {
                anchor: point_string(z0),
            });
        }
    }
    let n0 = match n0 {
        Some(v) => v,
        None => match sampled_index(f, l, anchors, opts.order)? {
            Some(v) => v,
            None => return Ok(indeterminate(rep, "sampled index exceeds jet validity")),
        },
    };
    if bound.is_none() && matches!(mode, BallMode::Necessary | BallMode::Sufficient) {
        if let Ok(lam) = estimate_lambda_ball(l, r, anchors, opts.mc_samples.min(512), opts.seed) {
            let scale = if mode == BallMode::Necessary {
                r * (n as f64).sqrt()
            } else {
                let c = anchors
                    .iter()
                    .map(|z| l.big_l(z) / l.ell(z))
                    .fold(1.0, f64::max);
                rep.set("C", c);
                c * r
            };
            let (q, lp) = synthesized_ln_p0(n0, scale, &lam.lambda1, &lam.lambda2);
            rep.set("q", q);
            rep.set("ln_p0_reference", lp);
        }
    }
    let ks = upto(n, n0);
    let outcomes = exec::map_range(anchors.len(), |i| -> Result<AnchorOutcome> {
        let z0 = &anchors[i];
        let rad = radius(z0);
        let s = opts.seed.wrapping_add(i as u64);
        let mut pts = sampling::mc_ball(z0, rad, opts.mc_samples, s, false);
        pts.extend(sampling::mc_ball(
            z0,
            rad,
            opts.mc_samples,
            s ^ 0x5A5A_5A5A,
            true,
        ));
        match mode {
            BallMode::Necessary | BallMode::Sufficient => {
                let at0 = normalized_at(f, l, z0, n0)?;
                let (k0, rhs) = argmax(&at0);
                let mut lhs = (
                    at0.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    z0.clone(),
                );
                for z in &pts {
                    let v = normalized_at(f, l, z, n0)?
                        .into_iter()
                        .fold(f64::NEG_INFINITY, f64::max);
                    if v > lhs.0 {
                        lhs = (v, z.clone());
                    }
                }
                Ok(AnchorOutcome {
                    ln_ratio: ln_ratio(lhs.0, rhs),
                    k0: ks[k0].clone(),
                    at: lhs.1,
                    points: pts.len(),
                })
            }
            BallMode::ModMax | BallMode::ModMaxAxis => {
                let at = derivatives_at(f, z0, n0)?;
                let mut mx = at.clone();
                for z in &pts {
                    for (s, v) in mx.iter_mut().zip(derivatives_at(f, z, n0)?) {
                        *s = s.max(v);
                    }
                }
                let (v, i) = if mode == BallMode::ModMax {
                    min_ratio(0..ks.len(), &mx, &at)
                } else {
                    let mut worst: (Option<f64>, usize) = (Some(f64::NEG_INFINITY), 0);
                    for j in 0..n {
                        let axis = (0..ks.len()).filter(|&i| ks[i].norm() == ks[i].0[j]);
                        let (v, i) = min_ratio(axis, &mx, &at);
                        match (v, worst.0) {
                            (None, _) => worst = (None, i),
                            (Some(v), Some(w)) if v > w => worst = (Some(v), i),
                            _ => {}
                        }
                    }
                    worst
                };
                Ok(AnchorOutcome {
                    ln_ratio: v.map(|x| x.max(0.0)),
                    k0: ks[i].clone(),
                    at: z0.clone(),
                    points: pts.len(),
                })
            }
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    rep.set("n0", n0 as f64);
    rep.set("r", r);
    finish(
        &mut rep,
        outcomes,
        anchors,
        bound.map(f64::ln),
        opts.threshold,
        "p_sampled",
    );
    Ok(rep)
}
