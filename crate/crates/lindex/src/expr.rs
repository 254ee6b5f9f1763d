//! Expression trees: complex-analytic `Expr` for functions `F` and coefficients,
//! real-valued `RealExpr` for the components of **L**.

use num_complex::Complex64 as C64;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(C64),
    Var(usize),
    /// `a + b * z_var`
    Affine {
        a: C64,
        b: C64,
        var: usize,
    },
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    IPow(Box<Expr>, u32),
    Recip(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn real(c: f64) -> Expr {
        Expr::Const(C64::new(c, 0.0))
    }

    pub fn var(j: usize) -> Expr {
        Expr::Var(j)
    }

    pub fn affine(a: f64, b: f64, var: usize) -> Expr {
        Expr::Affine {
            a: C64::new(a, 0.0),
            b: C64::new(b, 0.0),
            var,
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(Expr::Neg(Box::new(b))))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn powi(a: Expr, m: u32) -> Expr {
        Expr::IPow(Box::new(a), m)
    }

    pub fn recip(a: Expr) -> Expr {
        Expr::Recip(Box::new(a))
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::Exp(Box::new(a))
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(j) => z[*j],
            Expr::Affine { a, b, var } => a + b * z[*var],
            Expr::Add(x, y) => x.eval(z) + y.eval(z),
            Expr::Mul(x, y) => x.eval(z) * y.eval(z),
            Expr::Neg(x) => -x.eval(z),
            Expr::IPow(x, m) => x.eval(z).powu(*m),
            Expr::Recip(x) => 1.0 / x.eval(z),
            Expr::Exp(x) => x.eval(z).exp(),
        }
    }

    /// Smallest dimension in which every variable index is valid.
    pub fn min_dim(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(j) | Expr::Affine { var: j, .. } => j + 1,
            Expr::Add(x, y) | Expr::Mul(x, y) => x.min_dim().max(y.min_dim()),
            Expr::Neg(x) | Expr::IPow(x, _) | Expr::Recip(x) | Expr::Exp(x) => x.min_dim(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Affine { .. } => 1,
            Expr::Add(x, y) | Expr::Mul(x, y) => 1 + x.depth().max(y.depth()),
            Expr::Neg(x) | Expr::IPow(x, _) | Expr::Recip(x) | Expr::Exp(x) => 1 + x.depth(),
        }
    }

    pub fn has_recip(&self) -> bool {
        match self {
            Expr::Recip(_) => true,
            Expr::Const(_) | Expr::Var(_) | Expr::Affine { .. } => false,
            Expr::Add(x, y) | Expr::Mul(x, y) => x.has_recip() || y.has_recip(),
            Expr::Neg(x) | Expr::IPow(x, _) | Expr::Exp(x) => x.has_recip(),
        }
    }

    /// `(a, b, var)` when the expression is `a + b z_var` (or a constant, with `var = None`).
    pub fn as_affine(&self) -> Option<(C64, C64, Option<usize>)> {
        let zero = C64::new(0.0, 0.0);
        match self {
            Expr::Const(c) => Some((*c, zero, None)),
            Expr::Var(j) => Some((zero, C64::new(1.0, 0.0), Some(*j))),
            Expr::Affine { a, b, var } => Some((*a, *b, Some(*var))),
            Expr::Neg(x) => x.as_affine().map(|(a, b, v)| (-a, -b, v)),
            Expr::Add(x, y) => {
                let (a1, b1, v1) = x.as_affine()?;
                let (a2, b2, v2) = y.as_affine()?;
                match (v1, v2) {
                    (Some(i), Some(j)) if i != j => None,
                    _ => Some((a1 + a2, b1 + b2, v1.or(v2))),
                }
            }
            Expr::Mul(x, y) => {
                let (a1, b1, v1) = x.as_affine()?;
                let (a2, b2, v2) = y.as_affine()?;
                match (v1, v2) {
                    (None, _) => Some((a1 * a2, a1 * b2, v2)),
                    (_, None) => Some((a1 * a2, b1 * a2, v1)),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    /// Folds affine sub-trees into `Affine` / `Const` nodes.
    pub fn fold_affine(self) -> Expr {
        if let Some((a, b, v)) = self.as_affine() {
            return match v {
                Some(var) if b != C64::new(0.0, 0.0) => Expr::Affine { a, b, var },
                _ => Expr::Const(a),
            };
        }
        match self {
            Expr::Add(x, y) => Expr::add(x.fold_affine(), y.fold_affine()),
            Expr::Mul(x, y) => Expr::mul(x.fold_affine(), y.fold_affine()),
            Expr::Neg(x) => Expr::neg(x.fold_affine()),
            Expr::IPow(x, m) => Expr::powi(x.fold_affine(), m),
            Expr::Recip(x) => Expr::recip(x.fold_affine()),
            Expr::Exp(x) => Expr::exp(x.fold_affine()),
            other => other,
        }
    }

    /// Distance from `anchor` to the nearest zero of a `recip` denominator.
    ///
    /// Exact for denominators that factor into one-variable affine pieces; otherwise a
    /// first-order estimate `|g| / ‖∇g‖₁`. Infinite for expressions without `recip`.
    pub fn singular_radius(&self, anchor: &[C64]) -> f64 {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Affine { .. } => f64::INFINITY,
            Expr::Add(x, y) | Expr::Mul(x, y) => {
                x.singular_radius(anchor).min(y.singular_radius(anchor))
            }
            Expr::Neg(x) | Expr::IPow(x, _) | Expr::Exp(x) => x.singular_radius(anchor),
            Expr::Recip(x) => {
                let mut factors = Vec::new();
                collect_factors(x, &mut factors);
                let mut rho = x.singular_radius(anchor);
                for f in factors {
                    rho = rho.min(factor_zero_distance(f, anchor));
                }
                rho
            }
        }
    }
}

fn collect_factors<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match e {
        Expr::Mul(x, y) => {
            collect_factors(x, out);
            collect_factors(y, out);
        }
        Expr::IPow(x, m) if *m > 0 => collect_factors(x, out),
        Expr::Neg(x) => collect_factors(x, out),
        other => out.push(other),
    }
}

fn factor_zero_distance(f: &Expr, anchor: &[C64]) -> f64 {
    if let Some((a, b, v)) = f.as_affine() {
        return match v {
            Some(j) if b.norm() > 0.0 => (anchor[j] + a / b).norm(),
            _ => f64::INFINITY,
        };
    }
    if matches!(f, Expr::Exp(_)) {
        return f64::INFINITY;
    }
    let n = anchor.len().max(f.min_dim());
    let mut z: Vec<C64> = anchor.to_vec();
    z.resize(n, C64::new(0.0, 0.0));
    let g = f.eval(&z);
    let mut grad = 0.0;
    let h = 1e-6;
    for j in 0..n {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[j] += h;
        zm[j] -= h;
        grad += ((f.eval(&zp) - f.eval(&zm)) / (2.0 * h)).norm();
    }
    if grad == 0.0 {
        f64::INFINITY
    } else {
        g.norm() / grad
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

/// Real-valued expression over `|z_j|` and `|z|`.
#[derive(Clone, Debug, PartialEq)]
pub enum RealExpr {
    Const(f64),
    AbsVar(usize),
    Norm,
    Add(Box<RealExpr>, Box<RealExpr>),
    Mul(Box<RealExpr>, Box<RealExpr>),
    Neg(Box<RealExpr>),
    IPow(Box<RealExpr>, u32),
    Recip(Box<RealExpr>),
    Exp(Box<RealExpr>),
    /// `|e(z)|` for a complex expression; not reachable from the text grammar.
    Modulus(Expr),
}

impl RealExpr {
    pub fn add(a: RealExpr, b: RealExpr) -> RealExpr {
        RealExpr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: RealExpr, b: RealExpr) -> RealExpr {
        RealExpr::Add(Box::new(a), Box::new(RealExpr::Neg(Box::new(b))))
    }

    pub fn mul(a: RealExpr, b: RealExpr) -> RealExpr {
        RealExpr::Mul(Box::new(a), Box::new(b))
    }

    pub fn powi(a: RealExpr, m: u32) -> RealExpr {
        RealExpr::IPow(Box::new(a), m)
    }

    pub fn recip(a: RealExpr) -> RealExpr {
        RealExpr::Recip(Box::new(a))
    }

    pub fn exp(a: RealExpr) -> RealExpr {
        RealExpr::Exp(Box::new(a))
    }

    pub fn scale(self, s: f64) -> RealExpr {
        RealExpr::mul(RealExpr::Const(s), self)
    }

    pub fn eval(&self, z: &[C64]) -> f64 {
        match self {
            RealExpr::Const(c) => *c,
            RealExpr::AbsVar(j) => z[*j].norm(),
            RealExpr::Norm => z.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt(),
            RealExpr::Add(x, y) => x.eval(z) + y.eval(z),
            RealExpr::Mul(x, y) => x.eval(z) * y.eval(z),
            RealExpr::Neg(x) => -x.eval(z),
            RealExpr::IPow(x, m) => x.eval(z).powi(*m as i32),
            RealExpr::Recip(x) => 1.0 / x.eval(z),
            RealExpr::Exp(x) => x.eval(z).exp(),
            RealExpr::Modulus(e) => e.eval(z).norm(),
        }
    }

    pub fn min_dim(&self) -> usize {
        match self {
            RealExpr::Const(_) | RealExpr::Norm => 0,
            RealExpr::AbsVar(j) => j + 1,
            RealExpr::Add(x, y) | RealExpr::Mul(x, y) => x.min_dim().max(y.min_dim()),
            RealExpr::Neg(x) | RealExpr::IPow(x, _) | RealExpr::Recip(x) | RealExpr::Exp(x) => {
                x.min_dim()
            }
            RealExpr::Modulus(e) => e.min_dim(),
        }
    }

    /// True when the value depends on `z` only through `|z_1|, ..., |z_n|`.
    pub fn is_radial(&self) -> bool {
        match self {
            RealExpr::Const(_) | RealExpr::AbsVar(_) | RealExpr::Norm => true,
            RealExpr::Add(x, y) | RealExpr::Mul(x, y) => x.is_radial() && y.is_radial(),
            RealExpr::Neg(x) | RealExpr::IPow(x, _) | RealExpr::Recip(x) | RealExpr::Exp(x) => {
                x.is_radial()
            }
            RealExpr::Modulus(_) => false,
        }
    }
}
