//! Linear systems `G_{p_j e_j} F^{(p_j e_j)} + Σ_{‖S‖<=p_j-1} G_S F^{(S)} = H_j`,
//! coefficient-domination constants and the resulting index and growth bounds.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::criteria::{check_hayman, CheckOpts, HaymanForm};
use crate::error::{Error, Result};
use crate::exec;
use crate::expr::Expr;
use crate::growth::{growth_ratio_limsup, GrowthCurve};
use crate::jet::{jet_from_expr, Jet};
use crate::lfield::LField;
use crate::multiindex::{factorial, shell, upto, MultiIndex};
use crate::report::{point_string, CriterionReport, Verdict};

pub const RESIDUAL_TOL: f64 = 1e-8;
pub const DEFAULT_EXCLUSION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct Equation {
    pub order: u32,
    pub lead: Expr,
    pub lower: Vec<(MultiIndex, Expr)>,
    pub rhs: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeSystem {
    n: usize,
    equations: Vec<Equation>,
}

impl PdeSystem {
    pub fn new(n: usize, equations: Vec<Equation>) -> Result<PdeSystem> {
        if equations.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: equations.len() });
        }
        for (j, eq) in equations.iter().enumerate() {
            if eq.order == 0 {
                return Err(Error::Config(format!("equation {}: order must be at least 1", j + 1)));
            }
            let mut seen = Vec::new();
            for (s, _) in &eq.lower {
                if s.dim() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: s.dim() });
                }
                if s.norm() >= eq.order {
                    return Err(Error::Config(format!(
                        "equation {}: lower index {:?} has order >= {}",
                        j + 1,
                        s.0,
                        eq.order
                    )));
                }
                if seen.contains(&s) {
                    return Err(Error::Config(format!("equation {}: duplicate index {:?}", j + 1, s.0)));
                }
                seen.push(s);
            }
        }
        Ok(PdeSystem { n, equations })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn orders(&self) -> Vec<u32> {
        self.equations.iter().map(|e| e.order).collect()
    }

    pub fn total_order(&self) -> u32 {
        self.orders().iter().sum()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.equations.iter().all(|e| e.rhs.is_none())
    }

    /// `‖I‖` for equation `j`: `1 + Σ_{k≠j} p_k`, or `Σ_{k≠j} p_k` for the homogeneous shell.
    pub fn shell_norm(&self, j: usize, homogeneous: bool) -> u32 {
        let rest = self.total_order() - self.equations[j].order;
        if homogeneous {
            rest
        } else {
            rest + 1
        }
    }

    fn lead_index(&self, j: usize) -> MultiIndex {
        MultiIndex::axis(self.n, j, self.equations[j].order)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeVariant {
    Thm22,
    Thm23,
    Thm24,
    /// `Thm24` with the `(p_j e_j - S_j)!` numerator taken as printed in the `D` term.
    Thm24Literal,
    Thm25,
    Cor5,
}

impl PdeVariant {
    pub fn homogeneous(self) -> bool {
        matches!(self, PdeVariant::Thm23 | PdeVariant::Thm25)
    }

    pub fn factorial_form(self) -> bool {
        matches!(self, PdeVariant::Thm24 | PdeVariant::Thm24Literal | PdeVariant::Thm25)
    }

    /// Order `p` in the Hayman inequality implied by the variant.
    pub fn hayman_order(self, sys: &PdeSystem) -> u32 {
        if self.homogeneous() {
            sys.total_order() - 1
        } else {
            sys.total_order()
        }
    }

    /// Cap on the growth ratio: `c`, or `c(p+1)` for the factorial form.
    pub fn growth_cap(self, sys: &PdeSystem, c: f64) -> f64 {
        if self.factorial_form() {
            c * (self.hayman_order(sys) + 1) as f64
        } else {
            c
        }
    }

    pub fn parse(s: &str) -> Result<PdeVariant> {
        Ok(match s {
            "thm22" => PdeVariant::Thm22,
            "thm23" => PdeVariant::Thm23,
            "thm24" => PdeVariant::Thm24,
            "thm24_literal" => PdeVariant::Thm24Literal,
            "thm25" => PdeVariant::Thm25,
            "cor5" => PdeVariant::Cor5,
            other => return Err(Error::Config(format!("unknown variant '{other}'"))),
        })
    }

    /// Default for a system: homogeneous systems use the shifted shell.
    pub fn default_for(sys: &PdeSystem) -> PdeVariant {
        match (sys.dim(), sys.is_homogeneous()) {
            (1, _) => PdeVariant::Cor5,
            (_, true) => PdeVariant::Thm23,
            (_, false) => PdeVariant::Thm22,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoeffBounds {
    /// `(j, S, M) -> B_{S_j,M}`.
    pub b: BTreeMap<(usize, MultiIndex, MultiIndex), f64>,
    /// `(j, M) -> B_{p_j e_j, M}`.
    pub b_lead: BTreeMap<(usize, MultiIndex), f64>,
    /// `(j, I) -> D_{I,j}`, present only for equations with a right side.
    pub d: BTreeMap<(usize, MultiIndex), f64>,
    /// Largest `‖M‖` covered per equation.
    pub max_norm: Vec<u32>,
    pub samples: usize,
}

fn key_string(m: &MultiIndex) -> String {
    let parts: Vec<String> = m.0.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(","))
}

impl CoeffBounds {
    /// Flat string-keyed view for reports.
    pub fn to_constants(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for ((j, s, m), v) in &self.b {
            out.insert(format!("B[{}][S={}][M={}]", j + 1, key_string(s), key_string(m)), *v);
        }
        for ((j, m), v) in &self.b_lead {
            out.insert(format!("B_lead[{}][M={}]", j + 1, key_string(m)), *v);
        }
        for ((j, i), v) in &self.d {
            out.insert(format!("D[{}][I={}]", j + 1, key_string(i)), *v);
        }
        out
    }

    fn get_b(&self, j: usize, s: &MultiIndex, m: &MultiIndex) -> Result<f64> {
        self.b.get(&(j, s.clone(), m.clone())).copied().ok_or_else(|| {
            Error::MissingBound(format!("B for equation {}, S = {:?}, M = {:?}", j + 1, s.0, m.0))
        })
    }

    fn get_lead(&self, j: usize, m: &MultiIndex) -> Result<f64> {
        self.b_lead
            .get(&(j, m.clone()))
            .copied()
            .ok_or_else(|| Error::MissingBound(format!("B_lead for equation {}, M = {:?}", j + 1, m.0)))
    }

    fn get_d(&self, sys: &PdeSystem, j: usize, i: &MultiIndex) -> Result<f64> {
        if sys.equations[j].rhs.is_none() {
            return Ok(0.0);
        }
        self.d
            .get(&(j, i.clone()))
            .copied()
            .ok_or_else(|| Error::MissingBound(format!("D for equation {}, I = {:?}", j + 1, i.0)))
    }
}

/// `∏ l_k^{e_k}` for a signed exponent vector.
fn pow_signed(lz: &[f64], e: &[i64]) -> f64 {
    lz.iter().zip(e).map(|(l, &k)| l.powi(k as i32)).product()
}

fn derivative(jet: &Jet, m: &MultiIndex) -> f64 {
    jet.coeff(m).map_or(0.0, |c| c.norm() * m.factorial())
}

struct PointBounds {
    b: Vec<Vec<Vec<f64>>>,
    lead: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
}

/// Sampled suprema of the domination ratios over `region`. `M` ranges over
/// `‖M‖ <= 1 + Σ_{k≠j} p_k`, which covers both shells.
pub fn estimate_coeff_bounds(sys: &PdeSystem, l: &LField, region: &[Vec<C64>]) -> Result<CoeffBounds> {
    if region.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if l.dim() != sys.n {
        return Err(Error::DimensionMismatch { expected: sys.n, got: l.dim() });
    }
    let n = sys.n;
    let max_norm: Vec<u32> = (0..n).map(|j| sys.shell_norm(j, false)).collect();
    let ms: Vec<Vec<MultiIndex>> = max_norm.iter().map(|&d| upto(n, d)).collect();
    let is: Vec<Vec<MultiIndex>> = max_norm.iter().map(|&d| shell(n, d)).collect();
    let per = exec::map(region, |z| -> Result<PointBounds> {
        let lz = l.eval(z);
        let mut out = PointBounds { b: Vec::new(), lead: Vec::new(), d: Vec::new() };
        for (j, eq) in sys.equations.iter().enumerate() {
            let order = max_norm[j] as usize;
            let lead = jet_from_expr(&eq.lead, z, order)?;
            let g = lead.coeffs()[0].norm();
            if g == 0.0 || !g.is_finite() {
                return Err(Error::LeadVanishes { equation: j + 1, point: point_string(z) });
            }
            out.lead.push(ms[j].iter().map(|m| derivative(&lead, m) / (m.pow_real(&lz) * g)).collect());
            let pe = sys.lead_index(j);
            let mut rows = Vec::new();
            for (s, expr) in &eq.lower {
                let jet = jet_from_expr(expr, z, order)?;
                rows.push(
                    ms[j]
                        .iter()
                        .map(|m| {
                            let e: Vec<i64> =
                                (0..n).map(|k| pe.0[k] as i64 - s.0[k] as i64 + m.0[k] as i64).collect();
                            derivative(&jet, m) / (pow_signed(&lz, &e) * g)
                        })
                        .collect(),
                );
            }
            out.b.push(rows);
            let d = match &eq.rhs {
                Some(h) => {
                    let jet = jet_from_expr(h, z, order)?;
                    let hz = jet.coeffs()[0].norm();
                    is[j]
                        .iter()
                        .map(|i| {
                            let num = derivative(&jet, i);
                            if num == 0.0 {
                                0.0
                            } else {
                                num / (i.pow_real(&lz) * hz)
                            }
                        })
                        .collect()
                }
                None => Vec::new(),
            };
            out.d.push(d);
        }
        Ok(out)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut bounds = CoeffBounds { max_norm: max_norm.clone(), samples: region.len(), ..Default::default() };
    for (j, eq) in sys.equations.iter().enumerate() {
        for (mi, m) in ms[j].iter().enumerate() {
            let v = per.iter().map(|p| p.lead[j][mi]).fold(0.0, f64::max);
            bounds.b_lead.insert((j, m.clone()), v);
            for (si, (s, _)) in eq.lower.iter().enumerate() {
                let v = per.iter().map(|p| p.b[j][si][mi]).fold(0.0, f64::max);
                bounds.b.insert((j, s.clone(), m.clone()), v);
            }
        }
        if eq.rhs.is_some() {
            for (ii, i) in is[j].iter().enumerate() {
                let v = per.iter().map(|p| p.d[j][ii]).fold(0.0, f64::max);
                bounds.d.insert((j, i.clone()), v);
            }
        }
    }
    Ok(bounds)
}

fn lower_indices(sys: &PdeSystem, j: usize) -> Vec<MultiIndex> {
    sys.equations[j].lower.iter().map(|(s, _)| s.clone()).collect()
}

fn c_plain(sys: &PdeSystem, bounds: &CoeffBounds, homogeneous: bool) -> Result<f64> {
    let mut c = 0.0f64;
    for j in 0..sys.n {
        let lower = lower_indices(sys, j);
        let sum_b0 = lower
            .iter()
            .map(|s| bounds.get_b(j, s, &MultiIndex::zero(sys.n)))
            .sum::<Result<f64>>()?;
        for i in shell(sys.n, sys.shell_norm(j, homogeneous)) {
            let mut term = if homogeneous { 0.0 } else { bounds.get_d(sys, j, &i)? * (1.0 + sum_b0) };
            for m in i.lower_set() {
                let cm = i.multinomial(&m);
                if !m.is_zero() {
                    term += cm * bounds.get_lead(j, &m)?;
                }
                for s in &lower {
                    term += cm * bounds.get_b(j, s, &m)?;
                }
            }
            c = c.max(term);
        }
    }
    Ok(c)
}

/// `B` for the factorial-form variants; the lead ratio at `M = 0` is identically one and is
/// left out.
fn b_max(sys: &PdeSystem, bounds: &CoeffBounds, homogeneous: bool) -> Result<f64> {
    let mut b = 0.0f64;
    for j in 0..sys.n {
        let lower = lower_indices(sys, j);
        for m in upto(sys.n, sys.shell_norm(j, homogeneous)) {
            if !m.is_zero() {
                b = b.max(bounds.get_lead(j, &m)?);
            }
            for s in &lower {
                b = b.max(bounds.get_b(j, s, &m)?);
            }
        }
    }
    Ok(b)
}

fn c_factorial(sys: &PdeSystem, bounds: &CoeffBounds, homogeneous: bool, literal: bool) -> Result<f64> {
    let b = b_max(sys, bounds, homogeneous)?;
    let mut c = 0.0f64;
    for j in 0..sys.n {
        let lower = lower_indices(sys, j);
        let pe = sys.lead_index(j);
        let pj = sys.equations[j].order;
        for i in shell(sys.n, sys.shell_norm(j, homogeneous)) {
            let top = pe.add(&i).factorial();
            let mut term = 0.0;
            if !homogeneous {
                let d = bounds.get_d(sys, j, &i)?;
                if d > 0.0 {
                    let inner: f64 = lower
                        .iter()
                        .map(|s| {
                            if literal {
                                pe.checked_sub(s).map_or(0.0, |x| x.factorial())
                            } else {
                                s.factorial()
                            }
                        })
                        .sum();
                    term += d * (factorial(pj) / top + b * inner / top);
                }
            }
            for m in i.lower_set() {
                let cm = i.multinomial(&m);
                let rest = i.checked_sub(&m).unwrap();
                if !m.is_zero() {
                    term += b * cm * pe.add(&rest).factorial() / top;
                }
                for s in &lower {
                    term += b * cm * s.add(&rest).factorial() / top;
                }
            }
            c = c.max(term);
        }
    }
    Ok(c)
}

fn c_cor5(sys: &PdeSystem, bounds: &CoeffBounds) -> Result<f64> {
    if sys.n != 1 {
        return Err(Error::Config("the one-variable constant needs n = 1".into()));
    }
    let m0 = MultiIndex(vec![0]);
    let m1 = MultiIndex(vec![1]);
    let lower = lower_indices(sys, 0);
    let d = bounds.get_d(sys, 0, &m1)?;
    let b0 = lower.iter().map(|s| bounds.get_b(0, s, &m0)).sum::<Result<f64>>()?;
    let b1 = lower.iter().map(|s| bounds.get_b(0, s, &m1)).sum::<Result<f64>>()?;
    Ok(d * (1.0 + b0) + bounds.get_lead(0, &m1)? + b0 + b1)
}

/// Closed-form constant of the selected variant.
pub fn compute_c(sys: &PdeSystem, bounds: &CoeffBounds, variant: PdeVariant) -> Result<f64> {
    match variant {
        PdeVariant::Thm22 => c_plain(sys, bounds, false),
        PdeVariant::Thm23 => c_plain(sys, bounds, true),
        PdeVariant::Thm24 => c_factorial(sys, bounds, false, false),
        PdeVariant::Thm24Literal => c_factorial(sys, bounds, false, true),
        PdeVariant::Thm25 => c_factorial(sys, bounds, true, false),
        PdeVariant::Cor5 => c_cor5(sys, bounds),
    }
}

/// Max over equations of `|lhs - H_j| / max |term|` at `z`.
pub fn residual_at(f: &Expr, sys: &PdeSystem, z: &[C64]) -> Result<(usize, f64)> {
    let order = sys.orders().into_iter().max().unwrap_or(0) as usize;
    let jet = jet_from_expr(f, z, order)?;
    let deriv = |k: &MultiIndex| jet.coeff(k).unwrap_or_default() * k.factorial();
    let mut worst = (0usize, 0.0f64);
    for (j, eq) in sys.equations.iter().enumerate() {
        let mut terms = vec![eq.lead.eval(z) * deriv(&sys.lead_index(j))];
        for (s, g) in &eq.lower {
            terms.push(g.eval(z) * deriv(s));
        }
        let h = eq.rhs.as_ref().map_or(C64::new(0.0, 0.0), |h| h.eval(z));
        let scale = terms.iter().map(|t| t.norm()).fold(h.norm(), f64::max);
        let diff = (terms.iter().sum::<C64>() - h).norm();
        let r = if diff == 0.0 { 0.0 } else { diff / scale };
        if !r.is_finite() {
            return Err(Error::ResidualFailure { equation: j + 1, point: point_string(z), residual: r });
        }
        if r > worst.1 {
            worst = (j, r);
        }
    }
    Ok(worst)
}

/// Residual of every equation at every point, relative to the largest term.
pub fn check_residual(f: &Expr, sys: &PdeSystem, region: &[Vec<C64>]) -> Result<CriterionReport> {
    if region.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let vals = exec::map(region, |z| residual_at(f, sys, z)).into_iter().collect::<Result<Vec<_>>>()?;
    let (at, &(eq, worst)) = vals
        .iter()
        .enumerate()
        .fold((0, &(0, 0.0)), |acc, (i, v)| if v.1 > acc.1 .1 { (i, v) } else { acc });
    let mut rep = CriterionReport::new("residual");
    rep.samples_used = region.len();
    rep.set("max_residual", worst);
    rep.set("tolerance", RESIDUAL_TOL);
    rep.worst_margin = RESIDUAL_TOL - worst;
    if worst >= RESIDUAL_TOL {
        return Err(Error::ResidualFailure { equation: eq + 1, point: point_string(&region[at]), residual: worst });
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionReport {
    pub variant: PdeVariant,
    pub c: f64,
    pub p: u32,
    pub growth_cap: f64,
    pub coefficient_bounds: BTreeMap<String, f64>,
    pub residual: CriterionReport,
    pub hayman: CriterionReport,
    pub growth: CriterionReport,
    #[serde(skip)]
    pub curve: GrowthCurve,
}

impl SolutionReport {
    pub fn verdict(&self) -> Verdict {
        self.residual.verdict.combine(self.hayman.verdict).combine(self.growth.verdict)
    }
}

/// Residual, Hayman inequality with the computed `c`, and the capped growth ratio.
#[allow(clippy::too_many_arguments)]
pub fn verify_solution(
    f: &Expr,
    sys: &PdeSystem,
    l: &LField,
    region: &[Vec<C64>],
    variant: PdeVariant,
    radii_sequence: &[Vec<f64>],
    opts: &CheckOpts,
) -> Result<SolutionReport> {
    let residual = check_residual(f, sys, region)?;
    let bounds = estimate_coeff_bounds(sys, l, region)?;
    let c = compute_c(sys, &bounds, variant)?;
    let p = variant.hayman_order(sys);
    let form = if variant.factorial_form() { HaymanForm::Factorial } else { HaymanForm::Plain };
    let mut opts = opts.clone();
    opts.order = opts.order.max(p as usize + 1);
    let vanishing = region.iter().all(|z| f.eval(z).norm() == 0.0);
    let hayman = if vanishing {
        let mut rep = CriterionReport::new("hayman");
        rep.set("c", c);
        rep.samples_used = region.len();
        rep.worst_margin = 0.0;
        rep.note("F vanishes on the sample set");
        rep
    } else {
        let mut rep = check_hayman(f, l, p, region, form, Some(c), &opts)?;
        rep.note("constants B and D are sampled suprema over the region");
        rep
    };
    let cap = variant.growth_cap(sys, c);
    let (curve, mut growth) = growth_ratio_limsup(f, l, radii_sequence, None, Some(cap))?;
    if variant.homogeneous() {
        growth.note("cap evaluated as |R| -> 1-");
    }
    Ok(SolutionReport {
        variant,
        c,
        p,
        growth_cap: cap,
        coefficient_bounds: bounds.to_constants(),
        residual,
        hayman,
        growth,
        curve,
    })
}
