#![allow(dead_code)]

use std::collections::HashMap;
use std::rc::Rc;

use lindex::jet::jet_from_expr;
use lindex::multiindex::MultiIndex;
use lindex::parse::parse_complex;
use lindex::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Symbolic tree used as the reference: derivatives by the textbook rules, values by
/// direct evaluation.
#[derive(Debug)]
pub enum Sym {
    Const(C64),
    Var(usize),
    Add(Rc<Sym>, Rc<Sym>),
    Mul(Rc<Sym>, Rc<Sym>),
    Neg(Rc<Sym>),
    Pow(Rc<Sym>, u32),
    Recip(Rc<Sym>),
    Exp(Rc<Sym>),
}

pub type S = Rc<Sym>;

pub fn is_zero(a: &S) -> bool {
    matches!(**a, Sym::Const(v) if v == C64::new(0.0, 0.0))
}

pub fn konst(v: f64) -> S {
    Rc::new(Sym::Const(c(v, 0.0)))
}

pub fn add(a: S, b: S) -> S {
    if is_zero(&a) {
        return b;
    }
    if is_zero(&b) {
        return a;
    }
    Rc::new(Sym::Add(a, b))
}

pub fn mul(a: S, b: S) -> S {
    if is_zero(&a) || is_zero(&b) {
        return konst(0.0);
    }
    if matches!(*a, Sym::Const(v) if v == C64::new(1.0, 0.0)) {
        return b;
    }
    if matches!(*b, Sym::Const(v) if v == C64::new(1.0, 0.0)) {
        return a;
    }
    Rc::new(Sym::Mul(a, b))
}

pub fn neg(a: S) -> S {
    if is_zero(&a) {
        return a;
    }
    Rc::new(Sym::Neg(a))
}

pub struct Oracle {
    dcache: HashMap<(*const Sym, usize), S>,
    vcache: HashMap<*const Sym, C64>,
    acache: HashMap<*const Sym, f64>,
    keep: Vec<S>,
}

impl Oracle {
    pub fn new() -> Oracle {
        Oracle {
            dcache: HashMap::new(),
            vcache: HashMap::new(),
            acache: HashMap::new(),
            keep: Vec::new(),
        }
    }

    pub fn d(&mut self, a: &S, j: usize) -> S {
        let key = (Rc::as_ptr(a), j);
        if let Some(v) = self.dcache.get(&key) {
            return v.clone();
        }
        let out = match &**a {
            Sym::Const(_) => konst(0.0),
            Sym::Var(k) => konst(if *k == j { 1.0 } else { 0.0 }),
            Sym::Add(x, y) => {
                let (dx, dy) = (self.d(x, j), self.d(y, j));
                add(dx, dy)
            }
            Sym::Mul(x, y) => {
                let (dx, dy) = (self.d(x, j), self.d(y, j));
                add(mul(dx, y.clone()), mul(x.clone(), dy))
            }
            Sym::Neg(x) => neg(self.d(x, j)),
            Sym::Pow(x, m) => {
                let dx = self.d(x, j);
                let inner = if *m == 2 { x.clone() } else { Rc::new(Sym::Pow(x.clone(), m - 1)) };
                mul(konst(*m as f64), mul(inner, dx))
            }
            Sym::Recip(x) => {
                let dx = self.d(x, j);
                neg(mul(dx, Rc::new(Sym::Pow(a.clone(), 2))))
            }
            Sym::Exp(x) => {
                let dx = self.d(x, j);
                mul(dx, a.clone())
            }
        };
        self.keep.push(a.clone());
        self.dcache.insert(key, out.clone());
        out
    }

    pub fn eval(&mut self, a: &S, z: &[C64]) -> C64 {
        let key = Rc::as_ptr(a);
        if let Some(v) = self.vcache.get(&key) {
            return *v;
        }
        let v = match &**a {
            Sym::Const(v) => *v,
            Sym::Var(k) => z[*k],
            Sym::Add(x, y) => self.eval(x, z) + self.eval(y, z),
            Sym::Mul(x, y) => self.eval(x, z) * self.eval(y, z),
            Sym::Neg(x) => -self.eval(x, z),
            Sym::Pow(x, m) => self.eval(x, z).powu(*m),
            Sym::Recip(x) => 1.0 / self.eval(x, z),
            Sym::Exp(x) => self.eval(x, z).exp(),
        };
        self.keep.push(a.clone());
        self.vcache.insert(key, v);
        v
    }

    /// Evaluation with every sum replaced by a sum of moduli: the scale of the rounding
    /// error in [`Oracle::eval`].
    pub fn magnitude(&mut self, a: &S, z: &[C64]) -> f64 {
        let key = Rc::as_ptr(a);
        if let Some(v) = self.acache.get(&key) {
            return *v;
        }
        let v = match &**a {
            Sym::Const(v) => v.norm(),
            Sym::Var(k) => z[*k].norm(),
            Sym::Add(x, y) => self.magnitude(x, z) + self.magnitude(y, z),
            Sym::Mul(x, y) => self.magnitude(x, z) * self.magnitude(y, z),
            Sym::Neg(x) => self.magnitude(x, z),
            Sym::Pow(x, m) => self.magnitude(x, z).powi(*m as i32),
            Sym::Recip(x) => 1.0 / self.eval(x, z).norm(),
            Sym::Exp(x) => self.eval(x, z).exp().norm(),
        };
        self.keep.push(a.clone());
        self.acache.insert(key, v);
        v
    }

    /// `(∂^J F(z) / J!, magnitude / J!)` for every `‖J‖ <= order`.
    pub fn coefficients(&mut self, f: &S, z: &[C64], order: u32) -> Vec<(MultiIndex, C64, f64)> {
        let n = z.len();
        let mut trees: HashMap<Vec<u32>, S> = HashMap::new();
        trees.insert(vec![0; n], f.clone());
        let mut out = Vec::new();
        let mut frontier = vec![vec![0u32; n]];
        for _deg in 0..=order {
            let mut next = Vec::new();
            for k in &frontier {
                let t = trees[k].clone();
                let fact: f64 = k.iter().map(|&m| (1..=m).map(f64::from).product::<f64>()).product();
                out.push((MultiIndex(k.clone()), self.eval(&t, z) / fact, self.magnitude(&t, z) / fact));
                // extend only along the last nonzero coordinate and beyond, so each index is built once
                let start = k.iter().rposition(|&m| m > 0).unwrap_or(0);
                for j in start..n {
                    let mut kk = k.clone();
                    kk[j] += 1;
                    let dt = self.d(&t, j);
                    trees.insert(kk.clone(), dt);
                    next.push(kk);
                }
            }
            frontier = next;
        }
        out
    }
}

/// A random expression as grammar text plus the matching reference tree.
pub fn random_expr(rng: &mut ChaCha8Rng, n: usize, depth: u32) -> (String, S) {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..3) {
            0 => {
                let j = rng.gen_range(0..n);
                (format!("z{}", j + 1), Rc::new(Sym::Var(j)))
            }
            1 => {
                let v = (rng.gen_range(-20..=20) as f64) / 8.0;
                (format!("({v})"), konst(v))
            }
            _ => {
                let j = rng.gen_range(0..n);
                let v = (rng.gen_range(-8..=8) as f64) / 4.0;
                (format!("({v}+z{})", j + 1), add(konst(v), Rc::new(Sym::Var(j))))
            }
        };
    }
    match rng.gen_range(0..7) {
        0 => {
            let (ta, a) = random_expr(rng, n, depth - 1);
            let (tb, b) = random_expr(rng, n, depth - 1);
            (format!("({ta}+{tb})"), add(a, b))
        }
        1 => {
            let (ta, a) = random_expr(rng, n, depth - 1);
            let (tb, b) = random_expr(rng, n, depth - 1);
            (format!("({ta}-{tb})"), add(a, neg(b)))
        }
        2 | 3 => {
            let (ta, a) = random_expr(rng, n, depth - 1);
            let (tb, b) = random_expr(rng, n, depth - 1);
            (format!("({ta}*{tb})"), mul(a, b))
        }
        4 => {
            let (ta, a) = random_expr(rng, n, depth - 1);
            let m = rng.gen_range(2..=3);
            (format!("({ta})^{m}"), Rc::new(Sym::Pow(a, m)))
        }
        5 => {
            let (ta, a) = random_expr(rng, n, depth - 1);
            (format!("exp({ta})"), Rc::new(Sym::Exp(a)))
        }
        _ => {
            let (ta, a) = random_expr(rng, n, depth - 1);
            (format!("1/({ta})"), Rc::new(Sym::Recip(a)))
        }
    }
}

pub fn random_anchor(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| c(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)))
        .collect()
}

/// Smallest modulus of any reciprocal argument at `z`; the Taylor data near a pole is
/// too large to compare meaningfully.
pub fn min_recip_arg(o: &mut Oracle, s: &S, z: &[C64]) -> f64 {
    match &**s {
        Sym::Const(_) | Sym::Var(_) => f64::INFINITY,
        Sym::Add(a, b) | Sym::Mul(a, b) => min_recip_arg(o, a, z).min(min_recip_arg(o, b, z)),
        Sym::Neg(a) | Sym::Pow(a, _) | Sym::Exp(a) => min_recip_arg(o, a, z),
        Sym::Recip(a) => o.eval(a, z).norm().min(min_recip_arg(o, a, z)),
    }
}


pub struct Sweep {
    pub comparisons: usize,
    pub expressions: usize,
    pub worst: f64,
    pub worst_case: String,
}

/// Compares `jet_from_expr` against the oracle on random depth-3 expressions until at
/// least `target` coefficients have been checked.
pub fn oracle_sweep(seed: u64, target: usize) -> Sweep {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Sweep { comparisons: 0, expressions: 0, worst: 0.0, worst_case: String::new() };
    while out.comparisons < target {
        let n = rng.gen_range(1..=3);
        let order: u32 = match n {
            1 => 10,
            2 => 6,
            _ => 4,
        };
        let (text, sym) = random_expr(&mut rng, n, 3);
        let z = random_anchor(&mut rng, n);
        let mut oracle = Oracle::new();
        if min_recip_arg(&mut oracle, &sym, &z) < 0.5 {
            continue;
        }
        let f0 = oracle.eval(&sym, &z);
        if !f0.is_finite() || f0.norm() > 1e6 {
            continue;
        }
        let reference = oracle.coefficients(&sym, &z, order);
        let expr = parse_complex(&text, n).unwrap_or_else(|e| panic!("{text}: {e}"));
        let jet = jet_from_expr(&expr, &z, order as usize).unwrap();
        assert_eq!(jet.shape().len(), reference.len());
        for (k, want, mag) in &reference {
            let got = jet.coeff(k).unwrap();
            // below this the reference value is rounding noise of either computation
            let floor = 1e13 * f64::EPSILON * *mag;
            let err = (got - want).norm() / want.norm().max(floor).max(f64::MIN_POSITIVE);
            if err > out.worst {
                out.worst = err;
                out.worst_case = format!("{text} at {z:?}, K = {k:?}: {got} vs {want}");
            }
            out.comparisons += 1;
        }
        out.expressions += 1;
    }
    out
}
