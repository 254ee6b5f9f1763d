//! Truncated multivariate complex Taylor series.
//!
//! A [`Jet`] stores `b_K = F^{(K)}(z⁰)/K!` for every `‖K‖ <= D` in a dense table
//! ordered lexicographically by `K`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::expr::Expr;
use crate::multiindex::{binomial, upto, MultiIndex};

pub const DEFAULT_ORDER: usize = 16;
pub const ORDER_CAP: usize = 64;
pub const RECENTER_TOL: f64 = 1e-10;

const DENSE_LOOKUP_LIMIT: u64 = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("reciprocal of a series with zero constant term")]
    DivisionByZeroConstantTerm,
    #[error("order {requested} exceeds the cap {cap}")]
    OrderOverflow { requested: usize, cap: usize },
    #[error("multi-index of norm {norm} exceeds jet order {order}")]
    OrderExceeded { norm: usize, order: usize },
    #[error("recentering leaves no certified coefficient")]
    ValidityCollapse,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite coefficient")]
    NonFinite,
}

enum Lookup {
    Dense(Vec<u32>),
    Sparse(HashMap<u64, u32>),
}

/// Index bookkeeping shared by every jet of the same `(n, D)`.
pub struct Shape {
    n: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    degree: Vec<u32>,
    keys: Vec<u64>,
    radix_pow: Vec<u64>,
    lookup: Lookup,
    by_degree: Vec<u32>,
    shell_start: Vec<usize>,
}

impl Shape {
    fn new(n: usize, order: usize) -> Shape {
        let indices = upto(n, order as u32);
        let radix = order as u64 + 1;
        let radix_pow: Vec<u64> = (0..n).map(|i| radix.pow(i as u32)).collect();
        let keys: Vec<u64> = indices
            .iter()
            .map(|k| {
                k.0.iter()
                    .zip(&radix_pow)
                    .map(|(&a, &p)| a as u64 * p)
                    .sum()
            })
            .collect();
        let degree: Vec<u32> = indices.iter().map(|k| k.norm()).collect();
        let total = radix.checked_pow(n as u32).unwrap_or(u64::MAX);
        let lookup = if total <= DENSE_LOOKUP_LIMIT {
            let mut table = vec![u32::MAX; total as usize];
            for (i, &key) in keys.iter().enumerate() {
                table[key as usize] = i as u32;
            }
            Lookup::Dense(table)
        } else {
            Lookup::Sparse(
                keys.iter()
                    .enumerate()
                    .map(|(i, &k)| (k, i as u32))
                    .collect(),
            )
        };
        let mut by_degree: Vec<u32> = (0..indices.len() as u32).collect();
        by_degree.sort_by_key(|&i| degree[i as usize]);
        let mut shell_start = vec![0usize; order + 2];
        for &d in &degree {
            shell_start[d as usize + 1] += 1;
        }
        for d in 1..shell_start.len() {
            shell_start[d] += shell_start[d - 1];
        }
        Shape {
            n,
            order,
            indices,
            degree,
            keys,
            radix_pow,
            lookup,
            by_degree,
            shell_start,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn degree(&self, pos: usize) -> u32 {
        self.degree[pos]
    }

    /// Positions of the indices of norm exactly `d`.
    pub fn shell(&self, d: usize) -> &[u32] {
        if d > self.order {
            return &[];
        }
        &self.by_degree[self.shell_start[d]..self.shell_start[d + 1]]
    }

    /// Positions of the indices of norm at most `d`.
    pub fn upto(&self, d: usize) -> &[u32] {
        &self.by_degree[..self.shell_start[d.min(self.order) + 1]]
    }

    #[inline]
    fn pos_of_key(&self, key: u64) -> usize {
        match &self.lookup {
            Lookup::Dense(t) => t[key as usize] as usize,
            Lookup::Sparse(m) => m[&key] as usize,
        }
    }

    pub fn position(&self, k: &MultiIndex) -> Option<usize> {
        if k.dim() != self.n || k.norm() as usize > self.order {
            return None;
        }
        let key: u64 =
            k.0.iter()
                .zip(&self.radix_pow)
                .map(|(&a, &p)| a as u64 * p)
                .sum();
        Some(self.pos_of_key(key))
    }
}

/// Shared shape for `(n, order)`.
pub fn shape(n: usize, order: usize) -> Arc<Shape> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Shape>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("shape cache poisoned");
    guard
        .entry((n, order))
        .or_insert_with(|| Arc::new(Shape::new(n, order)))
        .clone()
}

#[derive(Clone)]
pub struct Jet {
    anchor: Vec<C64>,
    shape: Arc<Shape>,
    coeffs: Vec<C64>,
    valid: usize,
    rho: f64,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("anchor", &self.anchor)
            .field("order", &self.shape.order)
            .field("valid", &self.valid)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

impl Jet {
    pub fn zero(anchor: &[C64], order: usize) -> Jet {
        let shape = shape(anchor.len(), order);
        let coeffs = vec![ZERO; shape.len()];
        Jet {
            anchor: anchor.to_vec(),
            shape,
            coeffs,
            valid: order,
            rho: f64::INFINITY,
        }
    }

    pub fn constant(anchor: &[C64], order: usize, c: C64) -> Jet {
        let mut j = Jet::zero(anchor, order);
        j.coeffs[0] = c;
        j
    }

    pub fn variable(anchor: &[C64], order: usize, var: usize) -> Jet {
        Jet::affine(anchor, order, ZERO, ONE, var)
    }

    /// Jet of `a + b z_var`.
    pub fn affine(anchor: &[C64], order: usize, a: C64, b: C64, var: usize) -> Jet {
        let mut j = Jet::constant(anchor, order, a + b * anchor[var]);
        if order >= 1 {
            let pos = j
                .shape
                .position(&MultiIndex::axis(anchor.len(), var, 1))
                .unwrap();
            j.coeffs[pos] = b;
        }
        j
    }

    /// Builds a jet from raw coefficients in the canonical order.
    pub fn from_coeffs(anchor: &[C64], order: usize, coeffs: Vec<C64>) -> Result<Jet, JetError> {
        let shape = shape(anchor.len(), order);
        if coeffs.len() != shape.len() {
            return Err(JetError::DimensionMismatch {
                expected: shape.len(),
                got: coeffs.len(),
            });
        }
        Ok(Jet {
            anchor: anchor.to_vec(),
            shape,
            coeffs,
            valid: order,
            rho: f64::INFINITY,
        })
    }

    pub fn anchor(&self) -> &[C64] {
        &self.anchor
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn order(&self) -> usize {
        self.shape.order
    }

    /// Order up to which the coefficients are certified (equal to `order` for fresh jets).
    pub fn validity(&self) -> usize {
        self.valid
    }

    /// Distance to the nearest known singularity, used for recentering bounds.
    pub fn singular_radius(&self) -> f64 {
        self.rho
    }

    pub fn with_singular_radius(mut self, rho: f64) -> Jet {
        self.rho = rho;
        self
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: &MultiIndex) -> Option<C64> {
        self.shape.position(k).map(|p| self.coeffs[p])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, C64)> + '_ {
        self.shape.indices.iter().zip(self.coeffs.iter().copied())
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `F^{(K)}(z⁰) = K! b_K`.
    pub fn derivative_at(&self, k: &MultiIndex) -> Result<C64, JetError> {
        if k.dim() != self.dim() {
            return Err(JetError::DimensionMismatch {
                expected: self.dim(),
                got: k.dim(),
            });
        }
        let norm = k.norm() as usize;
        if norm > self.order() {
            return Err(JetError::OrderExceeded {
                norm,
                order: self.order(),
            });
        }
        let b = self.coeff(k).unwrap();
        if norm > 170 {
            let (r, th) = b.to_polar();
            return Ok(C64::from_polar((r.ln() + k.ln_factorial()).exp(), th));
        }
        Ok(b * k.factorial())
    }

    /// Partial sum `sum_{‖K‖<=D} b_K (z - z⁰)^K` in lexicographic order.
    pub fn eval(&self, z: &[C64]) -> C64 {
        let n = self.dim();
        let d = self.order();
        let mut pows = vec![vec![ONE; d + 1]; n];
        for i in 0..n {
            let h = z[i] - self.anchor[i];
            for k in 1..=d {
                pows[i][k] = pows[i][k - 1] * h;
            }
        }
        let mut acc = ZERO;
        for (k, b) in self.iter() {
            if b == ZERO {
                continue;
            }
            let mut t = b;
            for (i, &ki) in k.0.iter().enumerate() {
                if ki > 0 {
                    t *= pows[i][ki as usize];
                }
            }
            acc += t;
        }
        acc
    }

    /// `max_{‖K‖=d} |b_K|`.
    pub fn shell_max_abs(&self, d: usize) -> f64 {
        self.shape
            .shell(d)
            .iter()
            .map(|&p| self.coeffs[p as usize].norm())
            .fold(0.0, f64::max)
    }

    fn same_frame(&self, other: &Jet) {
        debug_assert_eq!(self.anchor, other.anchor);
        debug_assert_eq!(self.order(), other.order());
    }

    fn derived(&self, coeffs: Vec<C64>, other: Option<&Jet>) -> Jet {
        let (valid, rho) = match other {
            Some(o) => (self.valid.min(o.valid), self.rho.min(o.rho)),
            None => (self.valid, self.rho),
        };
        Jet {
            anchor: self.anchor.clone(),
            shape: self.shape.clone(),
            coeffs,
            valid,
            rho,
        }
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.same_frame(other);
        let c = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        self.derived(c, Some(other))
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.same_frame(other);
        let c = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        self.derived(c, Some(other))
    }

    pub fn neg(&self) -> Jet {
        self.derived(self.coeffs.iter().map(|a| -a).collect(), None)
    }

    pub fn scale(&self, s: C64) -> Jet {
        self.derived(self.coeffs.iter().map(|a| a * s).collect(), None)
    }

    /// Truncated convolution.
    pub fn mul(&self, other: &Jet) -> Jet {
        self.same_frame(other);
        let sh = &*self.shape;
        let mut out = vec![ZERO; sh.len()];
        for ia in 0..sh.len() {
            let x = self.coeffs[ia];
            if x == ZERO {
                continue;
            }
            let ka = sh.keys[ia];
            for &ib in sh.upto(sh.order - sh.degree[ia] as usize) {
                let y = other.coeffs[ib as usize];
                if y == ZERO {
                    continue;
                }
                out[sh.pos_of_key(ka + sh.keys[ib as usize])] += x * y;
            }
        }
        self.derived(out, Some(other))
    }

    /// `self^m` by repeated multiplication.
    pub fn powi(&self, m: u32) -> Jet {
        if m == 0 {
            return self.derived(Jet::constant(&self.anchor, self.order(), ONE).coeffs, None);
        }
        let mut acc = self.clone();
        for _ in 1..m {
            acc = acc.mul(self);
        }
        acc
    }

    /// `1/self` via `h_K = -(1/f_0) sum_{0<A<=K} f_A h_{K-A}`.
    pub fn recip(&self) -> Result<Jet, JetError> {
        let f0 = self.coeffs[0];
        if f0 == ZERO {
            return Err(JetError::DivisionByZeroConstantTerm);
        }
        let sh = &*self.shape;
        let mut h = vec![ZERO; sh.len()];
        h[0] = 1.0 / f0;
        for d in 1..=sh.order {
            for db in 0..d {
                for &ib in sh.shell(db) {
                    let hb = h[ib as usize];
                    if hb == ZERO {
                        continue;
                    }
                    let kb = sh.keys[ib as usize];
                    for &ia in sh.shell(d - db) {
                        let fa = self.coeffs[ia as usize];
                        if fa != ZERO {
                            h[sh.pos_of_key(kb + sh.keys[ia as usize])] += fa * hb;
                        }
                    }
                }
            }
            for &ic in sh.shell(d) {
                h[ic as usize] = -h[ic as usize] / f0;
            }
        }
        let out = self.derived(h, None);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(JetError::NonFinite)
        }
    }

    /// `exp(self)` via the Euler-operator recurrence `‖K‖ g_K = sum_A ‖A‖ f_A g_{K-A}`.
    pub fn exp(&self) -> Result<Jet, JetError> {
        let sh = &*self.shape;
        let euler: Vec<C64> = self
            .coeffs
            .iter()
            .zip(&sh.degree)
            .map(|(f, &d)| f * d as f64)
            .collect();
        let mut g = vec![ZERO; sh.len()];
        g[0] = self.coeffs[0].exp();
        for d in 1..=sh.order {
            for db in 0..d {
                for &ib in sh.shell(db) {
                    let gb = g[ib as usize];
                    if gb == ZERO {
                        continue;
                    }
                    let kb = sh.keys[ib as usize];
                    for &ia in sh.shell(d - db) {
                        let ea = euler[ia as usize];
                        if ea != ZERO {
                            g[sh.pos_of_key(kb + sh.keys[ia as usize])] += ea * gb;
                        }
                    }
                }
            }
            let inv = 1.0 / d as f64;
            for &ic in sh.shell(d) {
                g[ic as usize] *= inv;
            }
        }
        let out = self.derived(g, None);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(JetError::NonFinite)
        }
    }

    /// `∂/∂z_j`, one order lower.
    pub fn partial(&self, j: usize) -> Jet {
        let sh = &*self.shape;
        let lower = shape(self.dim(), sh.order.saturating_sub(1));
        let mut c = vec![ZERO; lower.len()];
        for (p, k) in lower.indices.iter().enumerate() {
            let mut up = k.clone();
            up.0[j] += 1;
            if let Some(q) = sh.position(&up) {
                c[p] = self.coeffs[q] * up.0[j] as f64;
            }
        }
        Jet {
            anchor: self.anchor.clone(),
            shape: lower,
            coeffs: c,
            valid: self.valid.saturating_sub(1),
            rho: self.rho,
        }
    }

    /// Same series truncated to a lower order.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let lower = shape(self.dim(), order);
        let c = lower
            .indices
            .iter()
            .map(|k| self.coeff(k).unwrap())
            .collect();
        Jet {
            anchor: self.anchor.clone(),
            shape: lower,
            coeffs: c,
            valid: self.valid.min(order),
            rho: self.rho,
        }
    }

    /// Taylor shift of the truncated polynomial to `new_anchor`.
    ///
    /// The validity order of the result is the largest `j` such that the modelled
    /// contribution of the omitted terms to every coefficient of norm `<= j` stays
    /// below [`RECENTER_TOL`].
    pub fn recenter(&self, new_anchor: &[C64]) -> Result<Jet, JetError> {
        if new_anchor.len() != self.dim() {
            return Err(JetError::DimensionMismatch {
                expected: self.dim(),
                got: new_anchor.len(),
            });
        }
        let sh = &*self.shape;
        let n = self.dim();
        let h: Vec<C64> = new_anchor
            .iter()
            .zip(&self.anchor)
            .map(|(a, b)| a - b)
            .collect();
        let mut c = self.coeffs.clone();
        for (i, &hi) in h.iter().enumerate() {
            if hi == ZERO {
                continue;
            }
            let step = sh.radix_pow[i];
            let mut line = Vec::with_capacity(sh.order + 1);
            let mut shifted = Vec::with_capacity(sh.order + 1);
            for start in 0..sh.len() {
                if sh.indices[start].0[i] != 0 {
                    continue;
                }
                let len = sh.order - sh.degree[start] as usize + 1;
                let key0 = sh.keys[start];
                line.clear();
                for t in 0..len {
                    line.push(c[sh.pos_of_key(key0 + t as u64 * step)]);
                }
                shifted.clear();
                for jj in 0..len {
                    let mut acc = ZERO;
                    let mut hp = ONE;
                    for k in jj..len {
                        acc += line[k] * binomial(k as u32, jj as u32) * hp;
                        hp *= hi;
                    }
                    shifted.push(acc);
                }
                for (t, v) in shifted.iter().enumerate() {
                    c[sh.pos_of_key(key0 + t as u64 * step)] = *v;
                }
            }
        }
        let s = h.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        let valid = if s == 0.0 {
            self.valid
        } else {
            self.recenter_validity(s, n)?
        };
        Ok(Jet {
            anchor: new_anchor.to_vec(),
            shape: self.shape.clone(),
            coeffs: c,
            valid: valid.min(self.valid),
            rho: (self.rho - s).max(0.0),
        })
    }

    fn decay_radius(&self) -> f64 {
        let d = self.order();
        if d < 2 {
            return f64::INFINITY;
        }
        let top = self.shell_max_abs(d);
        if top == 0.0 {
            return f64::INFINITY;
        }
        let half = d / 2;
        let mid = self.shell_max_abs(half);
        if mid == 0.0 {
            return f64::INFINITY;
        }
        (mid / top).powf(1.0 / (d - half) as f64)
    }

    fn recenter_validity(&self, s: f64, n: usize) -> Result<usize, JetError> {
        let d = self.order();
        let m_top = self.shell_max_abs(d).max(if d > 0 {
            self.shell_max_abs(d - 1)
        } else {
            0.0
        });
        if m_top == 0.0 {
            return Ok(d);
        }
        let rho = self.rho.min(self.decay_radius());
        if !rho.is_finite() {
            return Ok(d);
        }
        let tau = s / rho;
        if tau >= 1.0 {
            return Err(JetError::ValidityCollapse);
        }
        let mut valid: Option<usize> = None;
        for j in 0..=d {
            let mut sum = 0.0;
            let mut m = d + 1;
            loop {
                let term =
                    binomial((m + n - 1) as u32, (j + n - 1) as u32) * tau.powi((m - j) as i32);
                sum += term;
                if term < 1e-18 * sum.max(1e-300) || m > d + 4000 {
                    break;
                }
                m += 1;
            }
            let err = m_top * rho.powi(d as i32 - j as i32) * sum;
            if err <= RECENTER_TOL && err.is_finite() {
                valid = Some(j);
            } else {
                break;
            }
        }
        valid.ok_or(JetError::ValidityCollapse)
    }
}

/// Jet of an expression at `anchor`, truncated at total degree `order`.
pub fn jet_from_expr(expr: &Expr, anchor: &[C64], order: usize) -> Result<Jet, JetError> {
    jet_from_expr_capped(expr, anchor, order, ORDER_CAP)
}

pub fn jet_from_expr_capped(
    expr: &Expr,
    anchor: &[C64],
    order: usize,
    cap: usize,
) -> Result<Jet, JetError> {
    if order > cap {
        return Err(JetError::OrderOverflow {
            requested: order,
            cap,
        });
    }
    if expr.min_dim() > anchor.len() {
        return Err(JetError::DimensionMismatch {
            expected: expr.min_dim(),
            got: anchor.len(),
        });
    }
    let jet = build(expr, anchor, order)?;
    let rho = if expr.has_recip() {
        expr.singular_radius(anchor)
    } else {
        f64::INFINITY
    };
    Ok(jet.with_singular_radius(rho))
}

fn build(expr: &Expr, anchor: &[C64], order: usize) -> Result<Jet, JetError> {
    Ok(match expr {
        Expr::Const(c) => Jet::constant(anchor, order, *c),
        Expr::Var(j) => Jet::variable(anchor, order, *j),
        Expr::Affine { a, b, var } => Jet::affine(anchor, order, *a, *b, *var),
        Expr::Add(x, y) => build(x, anchor, order)?.add(&build(y, anchor, order)?),
        Expr::Mul(x, y) => build(x, anchor, order)?.mul(&build(y, anchor, order)?),
        Expr::Neg(x) => build(x, anchor, order)?.neg(),
        Expr::IPow(x, m) => build(x, anchor, order)?.powi(*m),
        Expr::Recip(x) => build(x, anchor, order)?.recip()?,
        Expr::Exp(x) => build(x, anchor, order)?.exp()?,
    })
}
