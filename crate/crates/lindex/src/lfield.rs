//! The weight field **L** = (l₁,…,lₙ) and its admissibility classes.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::expr::{Expr, RealExpr};
use crate::jet::jet_from_expr;
use crate::multiindex::MultiIndex;
use crate::parse::parse_real;
use crate::report::{point_repr, point_string, CriterionReport, Verdict, Witness};
use crate::sampling::{self, euclid_norm, polydisc_reach, BOUNDARY_GAP};

pub const DEFAULT_THRESHOLD: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub struct LField {
    n: usize,
    beta: f64,
    comps: Vec<RealExpr>,
}

impl LField {
    pub fn new(beta: f64, comps: Vec<RealExpr>) -> Result<LField> {
        let n = comps.len();
        if n == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if !(beta > (n as f64).sqrt()) {
            return Err(Error::BetaTooSmall { beta, n });
        }
        if let Some(c) = comps.iter().find(|c| c.min_dim() > n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.min_dim(),
            });
        }
        Ok(LField { n, beta, comps })
    }

    pub fn from_texts(beta: f64, texts: &[&str]) -> Result<LField> {
        let n = texts.len();
        let comps = texts
            .iter()
            .map(|t| parse_real(t, n))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        LField::new(beta, comps)
    }

    /// `l_j ≡ c` for every `j`.
    pub fn constant(n: usize, beta: f64, c: f64) -> Result<LField> {
        LField::new(beta, vec![RealExpr::Const(c); n])
    }

    /// `l_j = factor · β / (1 - |z|)` for every `j`.
    pub fn cone_multiple(n: usize, beta: f64, factor: f64) -> Result<LField> {
        let l = RealExpr::recip(RealExpr::sub(RealExpr::Const(1.0), RealExpr::Norm))
            .scale(factor * beta);
        LField::new(beta, vec![l; n])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn components(&self) -> &[RealExpr] {
        &self.comps
    }

    pub fn component(&self, j: usize, z: &[C64]) -> f64 {
        self.comps[j].eval(z)
    }

    pub fn eval(&self, z: &[C64]) -> Vec<f64> {
        self.comps.iter().map(|c| c.eval(z)).collect()
    }

    /// `ℓ(z) = min_j l_j(z)`.
    pub fn ell(&self, z: &[C64]) -> f64 {
        self.eval(z).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// `𝓛(z) = max_j l_j(z)`.
    pub fn big_l(&self, z: &[C64]) -> f64 {
        self.eval(z).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, s: f64) -> LField {
        self.scaled_vec(&vec![s; self.n])
    }

    /// `(θ₁ l₁, …, θₙ lₙ)` with the same β.
    pub fn scaled_vec(&self, theta: &[f64]) -> LField {
        let comps = self
            .comps
            .iter()
            .zip(theta)
            .map(|(c, &t)| c.clone().scale(t))
            .collect();
        LField {
            n: self.n,
            beta: self.beta,
            comps,
        }
    }

    pub fn with_beta(&self, beta: f64) -> Result<LField> {
        LField::new(beta, self.comps.clone())
    }

    /// True when every component depends on `z` only through the moduli `|z_j|`.
    pub fn is_radial(&self) -> bool {
        self.comps.iter().all(|c| c.is_radial())
    }

    /// Radii `R / L(z)`.
    pub fn scaled_radii(&self, r: &[f64], z: &[C64]) -> Vec<f64> {
        r.iter().zip(self.eval(z)).map(|(ri, l)| ri / l).collect()
    }
}

fn interior(points: &[Vec<C64>]) -> Vec<&Vec<C64>> {
    points
        .iter()
        .filter(|z| euclid_norm(z) <= 1.0 - BOUNDARY_GAP)
        .collect()
}

/// Cone condition `l_j(z) > β/(1-|z|)` on the samples, plus the radial monotonicity
/// of `|z_j| l_j` along rays through the samples.
pub fn check_cone_condition(l: &LField, points: &[Vec<C64>]) -> Result<CriterionReport> {
    let pts = interior(points);
    if pts.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let per: Vec<(f64, usize, bool)> = exec::map(&pts, |z| {
        let s = 1.0 - euclid_norm(z);
        let mut best = (f64::INFINITY, 0usize);
        for (j, v) in l.eval(z).into_iter().enumerate() {
            let ratio = v * s / l.beta;
            if ratio < best.0 || ratio.is_nan() {
                best = (ratio, j);
            }
        }
        (best.0, best.1, ray_monotone(l, z))
    });
    let mut rep = CriterionReport::new("cone_condition");
    let mut worst = (f64::INFINITY, 0usize, 0usize);
    let mut flagged = 0usize;
    for (i, &(ratio, j, mono)) in per.iter().enumerate() {
        if !(ratio >= worst.0) {
            worst = (ratio, j, i);
        }
        if !mono {
            flagged += 1;
        }
    }
    rep.samples_used = pts.len();
    rep.set("beta", l.beta);
    rep.set("min_ratio", worst.0);
    rep.set("lemma2_flagged_rays", flagged as f64);
    rep.worst_margin = worst.0 - 1.0;
    rep.verdict = if worst.0 > 1.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    rep.witness = Some(
        Witness::at(pts[worst.2])
            .index(MultiIndex::axis(l.n, worst.1, 1))
            .value(worst.0)
            .note(format!("component {}", worst.1 + 1)),
    );
    Ok(rep)
}

fn ray_monotone(l: &LField, z: &[C64]) -> bool {
    let r = euclid_norm(z);
    if r == 0.0 {
        return true;
    }
    let steps = 32;
    let mut prev = vec![f64::NEG_INFINITY; l.n];
    for k in 1..=steps {
        let t = (1.0 - BOUNDARY_GAP) * k as f64 / steps as f64;
        let w: Vec<C64> = z.iter().map(|c| c * (t / r)).collect();
        for (j, v) in l.eval(&w).into_iter().enumerate() {
            let x = w[j].norm() * v;
            if x < prev[j] * (1.0 - 1e-12) {
                return false;
            }
            prev[j] = x;
        }
    }
    true
}

/// Resolution of the per-anchor polydisc grids.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalGrid {
    pub levels: usize,
    pub angles: usize,
}

impl LocalGrid {
    pub fn for_dim(n: usize) -> LocalGrid {
        LocalGrid {
            levels: 2,
            angles: sampling::local_angles(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaBounds {
    pub r: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub anchors_used: usize,
    pub points_used: usize,
    pub witness_lambda1: Vec<Vec<[f64; 2]>>,
    pub witness_lambda2: Vec<Vec<[f64; 2]>>,
    /// Sampled bounds are inner estimates: `λ₁` from above, `λ₂` from below.
    pub inner_estimate: bool,
}

impl LambdaBounds {
    /// `sup_{z,w} l_j(z)/l_j(w)` over the same sample pairs, the single-condition form.
    pub fn pair_sup(&self) -> Vec<f64> {
        self.lambda1
            .iter()
            .zip(&self.lambda2)
            .map(|(a, b)| b.max(1.0 / a))
            .collect()
    }
}

fn reduce_lambda(
    r: Vec<f64>,
    n: usize,
    per: Vec<(Vec<(f64, Vec<C64>)>, Vec<(f64, Vec<C64>)>, usize)>,
) -> LambdaBounds {
    let mut lo = vec![(f64::INFINITY, Vec::new()); n];
    let mut hi = vec![(f64::NEG_INFINITY, Vec::new()); n];
    let mut points = 0;
    let anchors = per.len();
    for (mins, maxs, cnt) in per {
        points += cnt;
        for j in 0..n {
            if mins[j].0 < lo[j].0 {
                lo[j] = mins[j].clone();
            }
            if maxs[j].0 > hi[j].0 {
                hi[j] = maxs[j].clone();
            }
        }
    }
    LambdaBounds {
        r,
        lambda1: lo.iter().map(|x| x.0).collect(),
        lambda2: hi.iter().map(|x| x.0).collect(),
        anchors_used: anchors,
        points_used: points,
        witness_lambda1: lo.iter().map(|x| point_repr(&x.1)).collect(),
        witness_lambda2: hi.iter().map(|x| point_repr(&x.1)).collect(),
        inner_estimate: true,
    }
}

type Extremes = (Vec<(f64, Vec<C64>)>, Vec<(f64, Vec<C64>)>, usize);

fn ratio_extremes(l: &LField, z0: &[C64], pts: &[Vec<C64>]) -> Extremes {
    let l0 = l.eval(z0);
    let mut mins = vec![(1.0, z0.to_vec()); l.n];
    let mut maxs = vec![(1.0, z0.to_vec()); l.n];
    for z in pts {
        for (j, v) in l.eval(z).into_iter().enumerate() {
            let q = v / l0[j];
            if q < mins[j].0 {
                mins[j] = (q, z0.to_vec());
            }
            if q > maxs[j].0 {
                maxs[j] = (q, z0.to_vec());
            }
        }
    }
    (mins, maxs, pts.len())
}

/// Sampled `λ₁(R)`, `λ₂(R)` over polydiscs `𝔻ⁿ[z⁰, R/L(z⁰)]`.
pub fn estimate_lambda(
    l: &LField,
    r: &[f64],
    anchors: &[Vec<C64>],
    grid: LocalGrid,
) -> Result<LambdaBounds> {
    if anchors.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for z0 in anchors {
        if polydisc_reach(z0, &l.scaled_radii(r, z0)) >= 1.0 {
            return Err(Error::PolydiscEscapesBall {
                anchor: point_string(z0),
            });
        }
    }
    let per = exec::map(anchors, |z0| {
        let pts = sampling::polydisc_grid(z0, &l.scaled_radii(r, z0), grid.levels, grid.angles);
        ratio_extremes(l, z0, &pts)
    });
    Ok(reduce_lambda(r.to_vec(), l.n, per))
}

/// Sampled `λ₁(r)`, `λ₂(r)` over balls `𝔹ⁿ[z⁰, r/ℓ(z⁰)]`.
pub fn estimate_lambda_ball(
    l: &LField,
    r: f64,
    anchors: &[Vec<C64>],
    mc_samples: usize,
    seed: u64,
) -> Result<LambdaBounds> {
    if anchors.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for z0 in anchors {
        if euclid_norm(z0) + r / l.ell(z0) >= 1.0 {
            return Err(Error::BallEscapesDomain {
                anchor: point_string(z0),
            });
        }
    }
    let per = exec::map_range(anchors.len(), |i| {
        let z0 = &anchors[i];
        let rad = r / l.ell(z0);
        let s = seed.wrapping_add(i as u64);
        let mut pts = sampling::mc_ball(z0, rad, mc_samples, s, false);
        pts.extend(sampling::mc_ball(
            z0,
            rad,
            mc_samples,
            s ^ 0x5A5A_5A5A,
            true,
        ));
        ratio_extremes(l, z0, &pts)
    });
    Ok(reduce_lambda(vec![r; l.n], l.n, per))
}

/// Membership in Q: bounded `λ₂` and positive `λ₁` for every radius vector, with the
/// single-condition pair form evaluated on the same samples.
pub fn check_q_membership(
    l: &LField,
    r_grid: &[Vec<f64>],
    anchors: &[Vec<C64>],
    grid: LocalGrid,
    threshold: f64,
) -> Result<CriterionReport> {
    let mut rep = CriterionReport::new("q_membership");
    let mut member4 = true;
    let mut member8 = true;
    let mut worst = 0.0f64;
    let mut witness = None;
    for (k, r) in r_grid.iter().enumerate() {
        let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if rn > l.beta * (1.0 + 1e-12) {
            rep.note(format!("radius vector {k} has |R| = {rn} > beta; skipped"));
            continue;
        }
        let b = estimate_lambda(l, r, anchors, grid)?;
        debug_assert!(b.lambda1.iter().all(|&x| x <= 1.0) && b.lambda2.iter().all(|&x| x >= 1.0));
        rep.samples_used += b.points_used;
        for j in 0..l.n {
            rep.set(&format!("R{k}.lambda1_{}", j + 1), b.lambda1[j]);
            rep.set(&format!("R{k}.lambda2_{}", j + 1), b.lambda2[j]);
            let ok4 = b.lambda1[j] > 1.0 / threshold && b.lambda2[j] < threshold;
            let sup8 = b.pair_sup()[j];
            let ok8 = sup8 < threshold;
            member4 &= ok4;
            member8 &= ok8;
            if sup8 > worst {
                worst = sup8;
                let p = if b.lambda2[j] >= 1.0 / b.lambda1[j] {
                    &b.witness_lambda2[j]
                } else {
                    &b.witness_lambda1[j]
                };
                witness = Some(Witness {
                    point: Some(p.clone()),
                    index: Some(MultiIndex::axis(l.n, j, 1)),
                    value: Some(sup8),
                    note: Some(format!("radius vector {k}, component {}", j + 1)),
                });
            }
        }
    }
    rep.set("pair_sup", worst);
    rep.set("threshold", threshold);
    rep.set("forms_agree", if member4 == member8 { 1.0 } else { 0.0 });
    rep.worst_margin = (threshold.ln() - worst.ln()) / threshold.ln();
    rep.witness = witness;
    rep.verdict = if member4 && member8 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    if member4 != member8 {
        rep.note("lambda form and pair form disagree");
    }
    rep.note("lambda bounds are inner estimates from sampling");
    Ok(rep)
}

/// Membership in K: `l_j(Re^{iΘ₂}) / l_j(Re^{iΘ₁})` bounded over sampled `R`, `Θ`.
pub fn check_k_membership(
    l: &LField,
    radial_grid: &[Vec<f64>],
    angles_per_dim: usize,
    threshold: f64,
) -> Result<CriterionReport> {
    if radial_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let thetas = if l.is_radial() {
        vec![vec![0.0; l.n]]
    } else {
        sampling::theta_grid(l.n, angles_per_dim)
    };
    let per = exec::map(radial_grid, |r| {
        let mut best = (1.0f64, 0usize, Vec::new());
        let mut lo = vec![(f64::INFINITY, Vec::new()); l.n];
        let mut hi = vec![(f64::NEG_INFINITY, Vec::new()); l.n];
        for t in &thetas {
            let z: Vec<C64> = r
                .iter()
                .zip(t)
                .map(|(ri, ti)| C64::from_polar(*ri, *ti))
                .collect();
            for (j, v) in l.eval(&z).into_iter().enumerate() {
                if v < lo[j].0 {
                    lo[j] = (v, z.clone());
                }
                if v > hi[j].0 {
                    hi[j] = (v, z.clone());
                }
            }
        }
        for j in 0..l.n {
            let q = hi[j].0 / lo[j].0;
            if q > best.0 {
                best = (q, j, hi[j].1.clone());
            }
        }
        best
    });
    let mut rep = CriterionReport::new("k_membership");
    let mut c = 1.0f64;
    let mut wit = None;
    for (q, j, z) in per {
        if q > c {
            c = q;
            wit = Some(Witness::at(&z).index(MultiIndex::axis(l.n, j, 1)).value(q));
        }
    }
    rep.samples_used = radial_grid.len() * thetas.len();
    if l.is_radial() {
        rep.note("components depend on |z_1|..|z_n| only; angular ratio is 1");
    }
    rep.set("c", c);
    rep.set("threshold", threshold);
    rep.worst_margin = (threshold.ln() - c.ln()) / threshold.ln();
    rep.verdict = if c < threshold {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    rep.witness = wit;
    Ok(rep)
}

/// `L* = (c + |l₁|, …, c + |lₙ|)` for complex-valued components.
pub fn l_star(raw: &[Expr], c: f64, beta: f64) -> Result<LField> {
    let comps = raw
        .iter()
        .map(|e| RealExpr::add(RealExpr::Const(c), RealExpr::Modulus(e.clone())))
        .collect();
    LField::new(beta, comps)
}

/// `P = sup |∂l_j/∂z_m| / (c + |l_j|)` with the induced bracket on `λ(L*)`.
pub fn check_theorem13(
    raw: &[Expr],
    c: f64,
    beta: f64,
    r: &[f64],
    anchors: &[Vec<C64>],
    grid: LocalGrid,
    threshold: f64,
) -> Result<CriterionReport> {
    let n = raw.len();
    let lstar = l_star(raw, c, beta)?;
    let anchors: Vec<Vec<C64>> = anchors
        .iter()
        .filter(|z0| polydisc_reach(z0, &lstar.scaled_radii(r, z0)) < 1.0 - BOUNDARY_GAP)
        .cloned()
        .collect();
    if anchors.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let per = exec::map(&anchors, |z0| -> Result<(f64, Vec<C64>, usize)> {
        let mut pts =
            sampling::polydisc_grid(z0, &lstar.scaled_radii(r, z0), grid.levels, grid.angles);
        pts.insert(0, z0.clone());
        let mut best = (0.0f64, z0.clone());
        for z in &pts {
            for e in raw {
                let jet = jet_from_expr(e, z, 1)?;
                let val = jet.coeffs()[0].norm();
                for m in 0..n {
                    let d = jet.coeff(&MultiIndex::axis(n, m, 1)).unwrap().norm();
                    if !d.is_finite() {
                        return Err(Error::NonFiniteDerivative {
                            point: point_string(z),
                        });
                    }
                    let q = d / (c + val);
                    if q > best.0 {
                        best = (q, z.clone());
                    }
                }
            }
        }
        Ok((best.0, best.1, pts.len()))
    });
    let mut p = 0.0f64;
    let mut p_at = anchors[0].clone();
    let mut used = 0;
    for item in per {
        let (q, z, cnt) = item?;
        used += cnt;
        if q > p {
            p = q;
            p_at = z;
        }
    }
    let sum_r: f64 = r.iter().sum();
    let hi = ((p / c) * sum_r).exp();
    let lo = (-(p / c) * sum_r).exp();
    let b = estimate_lambda(&lstar, r, &anchors, grid)?;
    let tol = 1e-12;
    let contained = b.lambda2.iter().all(|&x| x <= hi * (1.0 + tol))
        && b.lambda1.iter().all(|&x| x >= lo * (1.0 - tol));
    let mut rep = CriterionReport::new("theorem13");
    rep.samples_used = used;
    rep.set("P", p);
    rep.set("c", c);
    rep.set("bracket_lambda2", hi);
    rep.set("bracket_lambda1", lo);
    for j in 0..n {
        rep.set(&format!("lambda1_{}", j + 1), b.lambda1[j]);
        rep.set(&format!("lambda2_{}", j + 1), b.lambda2[j]);
    }
    rep.set(
        "bracket_contains_estimate",
        if contained { 1.0 } else { 0.0 },
    );
    let lam_hi = b.lambda2.iter().cloned().fold(1.0, f64::max);
    rep.worst_margin = if hi > 1.0 { (hi - lam_hi) / hi } else { 0.0 };
    rep.witness = Some(Witness::at(&p_at).value(p).note("point attaining P"));
    rep.verdict = if p < threshold && contained {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(rep)
}
