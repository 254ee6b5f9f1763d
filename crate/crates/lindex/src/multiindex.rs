//! Multi-indices `K = (k_1, ..., k_n)` with norm, factorial and multinomial helpers.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

const FACT_TABLE_LEN: usize = 171;

fn fact_table() -> &'static [f64; FACT_TABLE_LEN] {
    static TABLE: std::sync::OnceLock<[f64; FACT_TABLE_LEN]> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [1.0f64; FACT_TABLE_LEN];
        for k in 1..FACT_TABLE_LEN {
            t[k] = t[k - 1] * k as f64;
        }
        t
    })
}

/// `k!` as a float; overflows to infinity past 170.
pub fn factorial(k: u32) -> f64 {
    fact_table()
        .get(k as usize)
        .copied()
        .unwrap_or(f64::INFINITY)
}

/// `ln k!`.
pub fn ln_factorial(k: u32) -> f64 {
    if (k as usize) < FACT_TABLE_LEN {
        fact_table()[k as usize].ln()
    } else {
        statrs::function::gamma::ln_gamma(k as f64 + 1.0)
    }
}

/// Binomial coefficient as a float.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// `k * e_j`.
    pub fn axis(n: usize, j: usize, k: u32) -> Self {
        let mut v = vec![0; n];
        v[j] = k;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `‖K‖ = k_1 + ... + k_n`.
    pub fn norm(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }

    /// `K! = k_1! ... k_n!` as a float.
    pub fn factorial(&self) -> f64 {
        if self.norm() as usize >= FACT_TABLE_LEN {
            return self.ln_factorial().exp();
        }
        self.0.iter().map(|&k| factorial(k)).product()
    }

    pub fn ln_factorial(&self) -> f64 {
        self.0.iter().map(|&k| ln_factorial(k)).sum()
    }

    /// Exact `K!` for norms up to 170.
    pub fn factorial_exact(&self) -> Option<BigUint> {
        if self.norm() as usize >= FACT_TABLE_LEN {
            return None;
        }
        let mut acc = BigUint::from(1u32);
        for &k in &self.0 {
            for i in 2..=k {
                acc *= i;
            }
        }
        Some(acc)
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise difference; `None` unless `other <= self`.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !other.le(self) {
            return None;
        }
        Some(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// `C_I^M = prod i_k! / (m_k! (i_k - m_k)!)`; zero unless `M <= I`.
    pub fn multinomial(&self, m: &MultiIndex) -> f64 {
        if !m.le(self) {
            return 0.0;
        }
        self.0
            .iter()
            .zip(&m.0)
            .map(|(&i, &mk)| binomial(i, mk))
            .product()
    }

    /// All `M` with `0 <= M <= self`, lexicographic.
    pub fn lower_set(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex(Vec::with_capacity(self.dim()))];
        for &k in &self.0 {
            let mut next = Vec::with_capacity(out.len() * (k as usize + 1));
            for prefix in &out {
                for v in 0..=k {
                    let mut p = prefix.clone();
                    p.0.push(v);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    }

    /// `prod x_j^{k_j}`.
    pub fn pow_real(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&k, &v)| v.powi(k as i32))
            .product()
    }

    /// `sum k_j ln x_j`.
    pub fn ln_pow_real(&self, ln_x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(ln_x)
            .map(|(&k, &v)| if k == 0 { 0.0 } else { k as f64 * v })
            .sum()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

/// All `K` with `‖K‖ = d`, lexicographic.
pub fn shell(n: usize, d: u32) -> Vec<MultiIndex> {
    upto(n, d).into_iter().filter(|k| k.norm() == d).collect()
}

/// All `K` with `‖K‖ <= d`, lexicographic.
pub fn upto(n: usize, d: u32) -> Vec<MultiIndex> {
    fn rec(n: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() == n {
            out.push(MultiIndex(prefix.clone()));
            return;
        }
        for v in 0..=left {
            prefix.push(v);
            rec(n, left - v, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, d, &mut Vec::with_capacity(n), &mut out);
    out
}
