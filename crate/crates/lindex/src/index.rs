//! Local and sampled global L-index, maximal term and central index, and the
//! dominating-polynomial procedure.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::expr::Expr;
use crate::jet::{jet_from_expr, Jet};
use crate::lfield::LField;
use crate::multiindex::{binomial, factorial, MultiIndex};
use crate::report::{point_repr, CriterionReport, Verdict, Witness};
use crate::sampling;

pub const GUARD: usize = 4;
pub const TIE_RTOL: f64 = 1e-12;
const LOG_DOMAIN_NORM: u32 = 30;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexReport {
    pub anchor: Vec<[f64; 2]>,
    /// `None` when the index is not certified within the truncation ("exceeds-validity").
    pub local_index: Option<u32>,
    pub argmax_k: MultiIndex,
    pub margin: f64,
    pub d_valid: usize,
    pub is_zero: bool,
    /// `‖ν(1/L(z⁰))‖`, an upper bound for the local index.
    pub nu_norm: u32,
    /// `ln max_{‖K‖=k} |b_K| / L^K` per shell.
    pub ln_shell_max: Vec<f64>,
}

impl IndexReport {
    pub fn status(&self) -> &'static str {
        if self.local_index.is_some() {
            "ok"
        } else {
            "exceeds-validity"
        }
    }
}

/// `ln(|b_K| / L^K)` for every table entry with `‖K‖ <= upto`.
fn ln_normalized(jet: &Jet, lz: &[f64], upto: usize) -> Vec<(usize, f64)> {
    let ln_l: Vec<f64> = lz.iter().map(|x| x.ln()).collect();
    let sh = jet.shape();
    sh.upto(upto)
        .iter()
        .map(|&p| {
            let p = p as usize;
            let k = &sh.indices()[p];
            let b = jet.coeffs()[p].norm();
            let v = if b == 0.0 {
                f64::NEG_INFINITY
            } else if k.norm() > LOG_DOMAIN_NORM {
                b.ln() - k.ln_pow_real(&ln_l)
            } else {
                (b / k.pow_real(lz)).ln()
            };
            (p, v)
        })
        .collect()
}

/// Least `n₀` for which every `|b_J|/L^J(z⁰)` with `‖J‖ <= D_valid` is dominated by the
/// maximum over `‖K‖ <= n₀`.
pub fn local_index(jet: &Jet, l: &LField) -> IndexReport {
    let lz = l.eval(jet.anchor());
    local_index_with(jet, &lz)
}

/// [`local_index`] with the values `L(z⁰)` supplied directly.
pub fn local_index_with(jet: &Jet, lz: &[f64]) -> IndexReport {
    let d_valid = jet.validity().min(jet.order()).saturating_sub(GUARD);
    let vals = ln_normalized(jet, lz, d_valid);
    let sh = jet.shape();
    let mut shell = vec![(f64::NEG_INFINITY, 0usize); d_valid + 1];
    for &(p, v) in &vals {
        let d = sh.degree(p) as usize;
        let cur = &mut shell[d];
        if v > cur.0
            || (v == cur.0 && v > f64::NEG_INFINITY && sh.indices()[p] > sh.indices()[cur.1])
        {
            *cur = (v, p);
        }
    }
    let global = shell.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let ln_shell_max: Vec<f64> = shell.iter().map(|s| s.0).collect();
    let nu_norm = {
        let mut best = 0u32;
        for &(p, v) in &vals {
            if global > f64::NEG_INFINITY && v >= global + (1.0 - TIE_RTOL).ln() {
                best = best.max(sh.degree(p));
            }
        }
        best
    };
    if global == f64::NEG_INFINITY {
        return IndexReport {
            anchor: point_repr(jet.anchor()),
            local_index: Some(0),
            argmax_k: MultiIndex::zero(jet.dim()),
            margin: 1.0,
            d_valid,
            is_zero: true,
            nu_norm: 0,
            ln_shell_max,
        };
    }
    let thresh = global + (1.0 - TIE_RTOL).ln();
    let n0 = shell.iter().position(|s| s.0 >= thresh).unwrap();
    let argmax = sh.indices()[shell[n0].1].clone();
    let rest = shell[n0 + 1..]
        .iter()
        .map(|s| s.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = (1.0 - (rest - global).exp()).max(0.0);
    let certified = d_valid >= 2 && n0 <= d_valid - 2;
    IndexReport {
        anchor: point_repr(jet.anchor()),
        local_index: if certified { Some(n0 as u32) } else { None },
        argmax_k: argmax,
        margin,
        d_valid,
        is_zero: false,
        nu_norm,
        ln_shell_max,
    }
}

/// Local index of `F` at `anchor`, building the jet there.
pub fn local_index_at(f: &Expr, l: &LField, anchor: &[C64], order: usize) -> Result<IndexReport> {
    let jet = jet_from_expr(f, anchor, order)?;
    Ok(local_index(&jet, l))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GlobalIndex {
    /// Sampled sup of the local index; `None` if any anchor exceeds validity.
    pub sup: Option<u32>,
    pub witness: Vec<[f64; 2]>,
    pub reports: Vec<IndexReport>,
}

/// Sup of the local index over sampled anchors.
pub fn global_index_estimate(
    f: &Expr,
    l: &LField,
    anchors: &[Vec<C64>],
    order: usize,
) -> Result<GlobalIndex> {
    if anchors.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let reports = exec::map(anchors, |z| local_index_at(f, l, z, order))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut sup = Some(0u32);
    let mut witness = reports[0].anchor.clone();
    let mut best = -1i64;
    for r in &reports {
        match r.local_index {
            None => {
                if sup.is_some() {
                    witness = r.anchor.clone();
                }
                sup = None;
            }
            Some(k) => {
                if sup.is_some() && k as i64 > best {
                    best = k as i64;
                    sup = Some(k);
                    witness = r.anchor.clone();
                }
            }
        }
    }
    Ok(GlobalIndex {
        sup,
        witness,
        reports,
    })
}

/// Whether every normalized coefficient is dominated by those with `‖K‖ <= n₀` at the jet's anchor.
pub fn holds_at(jet: &Jet, l: &LField, n0: u32) -> (bool, f64) {
    let lz = l.eval(jet.anchor());
    let d_valid = jet.validity().min(jet.order()).saturating_sub(GUARD);
    let sh = jet.shape();
    let vals = ln_normalized(jet, &lz, d_valid);
    let head = vals
        .iter()
        .filter(|(p, _)| sh.degree(*p) <= n0)
        .map(|x| x.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let tail = vals
        .iter()
        .filter(|(p, _)| sh.degree(*p) > n0)
        .map(|x| x.1)
        .fold(f64::NEG_INFINITY, f64::max);
    if tail == f64::NEG_INFINITY {
        return (true, 1.0);
    }
    let ok = tail <= head + (1.0 + TIE_RTOL).ln();
    (ok, 1.0 - (tail - head).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaximalTerm {
    pub mu: f64,
    pub nu: MultiIndex,
    pub r: Vec<f64>,
}

/// `μ = max |b_K| R^K` and `ν` by the largest-norm tie rule, then lexicographically largest.
pub fn maximal_term(jet: &Jet, r: &[f64]) -> MaximalTerm {
    let ln_r: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let vals: Vec<(usize, f64)> = jet
        .iter()
        .enumerate()
        .map(|(p, (k, b))| {
            let v = if b.norm() == 0.0 {
                f64::NEG_INFINITY
            } else {
                b.norm().ln() + k.ln_pow_real(&ln_r)
            };
            (p, v)
        })
        .collect();
    let best = vals.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let sh = jet.shape();
    if best == f64::NEG_INFINITY {
        return MaximalTerm {
            mu: 0.0,
            nu: MultiIndex::zero(jet.dim()),
            r: r.to_vec(),
        };
    }
    let thresh = best + (1.0 - TIE_RTOL).ln();
    let mut nu: Option<&MultiIndex> = None;
    for &(p, v) in &vals {
        if v >= thresh {
            let k = &sh.indices()[p];
            nu = match nu {
                None => Some(k),
                Some(cur) if (k.norm(), k) > (cur.norm(), cur) => Some(k),
                keep => keep,
            };
        }
    }
    MaximalTerm {
        mu: best.exp(),
        nu: nu.unwrap().clone(),
        r: r.to_vec(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominationCertificate {
    pub k0: u32,
    pub r: f64,
    /// Step at which the stopping rule fired, counting from `m = 1`.
    pub m0: usize,
    /// Step at which the rule fires when `m = 0` is admitted.
    pub m0_verbatim: usize,
    pub c: f64,
    pub eta: f64,
    /// Hayman order `p = N`.
    pub p: u32,
    pub n_cap: u32,
    pub lhs: f64,
    pub rhs: f64,
    /// `Σ_{‖J‖≠k0} |b_J| (r/L)^J` over the table plus the certified truncation tail.
    pub coeff_sum: f64,
    pub s_sequence: Vec<u32>,
    pub ratio_sequence: Vec<f64>,
    pub skeleton_radii: Vec<f64>,
}

/// The procedure constant `c = 2{(N+n+1)!(n+1)! + (N+1) C(n+N-1, N)}`.
pub fn procedure_constant(n_cap: u32, n: usize) -> f64 {
    let nn = n as u32;
    2.0 * (factorial(n_cap + nn + 1) * factorial(nn + 1)
        + (n_cap as f64 + 1.0) * binomial(nn + n_cap - 1, n_cap))
}

struct Step {
    s: usize,
    ratio: f64,
}

fn procedure_step(a: &[f64], r: f64, bound: usize) -> Step {
    let vals: Vec<f64> = (0..=bound.min(a.len() - 1))
        .map(|k| a[k] * r.powi(k as i32))
        .collect();
    let mu = vals.iter().cloned().fold(0.0, f64::max);
    let s = vals.iter().position(|&v| v == mu).unwrap_or(0);
    let mu_star = vals
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != s)
        .map(|x| *x.1)
        .fold(0.0, f64::max);
    Step {
        s,
        ratio: if mu > 0.0 { mu_star / mu } else { 0.0 },
    }
}

/// Runs the dominating-polynomial procedure at the jet's anchor and certifies the result.
///
/// `n_cap` is the index bound `N` (defaults to the local index at the anchor).
pub fn dominating_polynomial(
    jet: &Jet,
    l: &LField,
    d: f64,
    n_cap: Option<u32>,
    skeleton_samples: usize,
) -> Result<DominationCertificate> {
    let n = jet.dim();
    let rep = local_index(jet, l);
    let n0 = rep
        .local_index
        .ok_or_else(|| Error::NoDominatingStep { m: 0 })? as usize;
    let big_n = n_cap.unwrap_or(n0 as u32).max(n0 as u32);
    let c = procedure_constant(big_n, n);
    let lz = l.eval(jet.anchor());
    let dv = rep.d_valid;
    let sh = jet.shape();
    let mut a = vec![0.0f64; dv + 1];
    for (p, (k, b)) in jet.iter().enumerate() {
        let deg = sh.degree(p) as usize;
        if deg <= dv {
            let v = b.norm() / k.pow_real(&lz);
            if v > a[deg] {
                a[deg] = v;
            }
        }
    }
    let r_m = |m: usize| d / ((d + 1.0) * c.powi(m as i32));
    let limit = 2 * big_n as usize + 1;
    let mut s_seq = Vec::new();
    let mut ratios = Vec::new();
    let mut bound = n0;
    let mut m0_verbatim = None;
    let mut m0 = None;
    for m in 0..=limit + 1 {
        let st = procedure_step(&a, r_m(m), bound);
        s_seq.push(st.s as u32);
        ratios.push(st.ratio);
        if st.ratio <= 1.0 / c {
            if m0_verbatim.is_none() {
                m0_verbatim = Some(m);
            }
            if m >= 1 {
                m0 = Some(m);
                break;
            }
        }
        bound = st.s;
    }
    let m0 = match m0 {
        Some(m) if m <= limit.max(1) => m,
        _ => return Err(Error::NoDominatingStep { m: limit }),
    };
    let k0 = s_seq[m0];
    let r = r_m(m0);
    let radii: Vec<f64> = lz.iter().map(|x| r / x).collect();
    let rhs = 0.5 * a[k0 as usize] * r.powi(k0 as i32);
    let mut coeff_sum = 0.0;
    for (deg, &ak) in a.iter().enumerate() {
        if deg != k0 as usize {
            coeff_sum += ak * binomial((n + deg - 1) as u32, deg as u32) * r.powi(deg as i32);
        }
    }
    let a_head = a[..=n0].iter().cloned().fold(0.0, f64::max);
    let mut tail = 0.0;
    for deg in dv + 1..dv + 400 {
        let t = a_head * binomial((n + deg - 1) as u32, deg as u32) * r.powi(deg as i32);
        tail += t;
        if t < 1e-300 || t < 1e-18 * tail {
            break;
        }
    }
    coeff_sum += tail;
    let skel = verify_dominance(jet, k0, &radii, skeleton_samples);
    Ok(DominationCertificate {
        k0,
        r,
        m0,
        m0_verbatim: m0_verbatim.unwrap_or(m0),
        c,
        eta: d / ((d + 1.0) * c.powi(2 * (big_n as i32 + 1))),
        p: big_n,
        n_cap: big_n,
        lhs: skel.get("lhs").unwrap_or(f64::NAN) + tail,
        rhs,
        coeff_sum,
        s_sequence: s_seq,
        ratio_sequence: ratios,
        skeleton_radii: radii,
    })
}

/// Checks `|Σ_{‖J‖≠k0} b_J (z-z⁰)^J| <= ½ max_{‖J‖=k0} |b_J| R^J` at Halton skeleton points.
pub fn verify_dominance(jet: &Jet, k0: u32, radii: &[f64], samples: usize) -> CriterionReport {
    let mut rep = CriterionReport::new("dominance");
    let sh = jet.shape();
    let rhs = 0.5
        * sh.shell(k0 as usize)
            .iter()
            .map(|&p| jet.coeffs()[p as usize].norm() * sh.indices()[p as usize].pow_real(radii))
            .fold(0.0, f64::max);
    let stripped: Vec<C64> = jet
        .coeffs()
        .iter()
        .enumerate()
        .map(|(p, &b)| {
            if sh.degree(p) == k0 {
                C64::new(0.0, 0.0)
            } else {
                b
            }
        })
        .collect();
    let rest = Jet::from_coeffs(jet.anchor(), jet.order(), stripped).expect("same shape");
    let pts = sampling::torus_halton(jet.anchor(), radii, samples);
    let vals = exec::map(&pts, |z| rest.eval(z).norm());
    let mut lhs = 0.0f64;
    let mut at = 0usize;
    for (i, &v) in vals.iter().enumerate() {
        if v > lhs {
            lhs = v;
            at = i;
        }
    }
    rep.samples_used = pts.len();
    rep.set("lhs", lhs);
    rep.set("rhs", rhs);
    rep.set("k0", k0 as f64);
    rep.worst_margin = if rhs > 0.0 {
        (rhs - lhs) / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        -1.0
    };
    rep.verdict = if lhs <= rhs {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    if !pts.is_empty() {
        rep.witness = Some(Witness::at(&pts[at]).value(lhs));
    }
    rep
}
