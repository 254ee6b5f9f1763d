//! Deterministic point sets: Halton points in the ball, seeded Monte Carlo balls
//! and spheres, torus grids and polydisc grids.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

pub const DEFAULT_SEED: u64 = 0x5EED;
pub const BOUNDARY_GAP: f64 = 1e-6;

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

pub fn radical_inverse(base: u32, mut i: u64) -> f64 {
    let b = base as u64;
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

pub fn euclid_norm(z: &[C64]) -> f64 {
    z.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest `|z|` over the closed polydisc with the given center and radii.
pub fn polydisc_reach(center: &[C64], radii: &[f64]) -> f64 {
    center
        .iter()
        .zip(radii)
        .map(|(c, r)| (c.norm() + r).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// `count` Halton points in the ball `|z| <= radius` of ℂⁿ (Halton index from 1).
pub fn halton_ball(n: usize, count: usize, radius: f64) -> Vec<Vec<C64>> {
    let normal = std_normal();
    (1..=count as u64)
        .map(|i| {
            let g: Vec<f64> = (0..2 * n)
                .map(|d| normal.inverse_cdf(radical_inverse(PRIMES[d], i)))
                .collect();
            let u = radical_inverse(PRIMES[2 * n], i);
            let s = (g.iter().map(|x| x * x).sum::<f64>()).sqrt();
            let rho = radius * u.powf(1.0 / (2 * n) as f64);
            (0..n)
                .map(|j| C64::new(g[2 * j], g[2 * j + 1]) * (rho / s))
                .collect()
        })
        .collect()
}

/// Halton points in the ball of radius `radius` that avoid the open polydisc `𝔻ⁿ(0, exclude)`.
pub fn halton_ball_excluding(
    n: usize,
    count: usize,
    radius: f64,
    exclude: &[f64],
) -> Vec<Vec<C64>> {
    let mut out = Vec::with_capacity(count);
    let mut batch = count.max(16);
    while out.len() < count {
        out.clear();
        for z in halton_ball(n, batch, radius) {
            if z.iter().zip(exclude).any(|(w, &r)| w.norm() >= r) {
                out.push(z);
                if out.len() == count {
                    break;
                }
            }
        }
        batch *= 2;
    }
    out
}

/// Uniform points in the closed ball `B[center, radius]` (`surface = false`) or on its
/// sphere (`surface = true`).
pub fn mc_ball(
    center: &[C64],
    radius: f64,
    count: usize,
    seed: u64,
    surface: bool,
) -> Vec<Vec<C64>> {
    let n = center.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let g: Vec<f64> = (0..2 * n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let s = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            let rho = if surface {
                radius
            } else {
                radius * rng.gen::<f64>().powf(1.0 / (2 * n) as f64)
            };
            (0..n)
                .map(|j| center[j] + C64::new(g[2 * j], g[2 * j + 1]) * (rho / s))
                .collect()
        })
        .collect()
}

/// Angular points per dimension for skeleton grids.
pub fn default_angles(n: usize) -> usize {
    match n {
        0..=2 => 64,
        3 => 16,
        _ => 8,
    }
}

/// Θ-grid points per dimension: 32 per dimension, at most 4096 in total.
pub fn theta_per_dim(n: usize) -> usize {
    let mut m = 32usize;
    while m > 1 && m.pow(n as u32) > 4096 {
        m -= 1;
    }
    m
}

/// All `Θ ∈ {2πk/m}ⁿ`, lexicographic.
pub fn theta_grid(n: usize, m: usize) -> Vec<Vec<f64>> {
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut t = vec![0.0; n];
            for j in (0..n).rev() {
                t[j] = TAU * (idx % m) as f64 / m as f64;
                idx /= m;
            }
            t
        })
        .collect()
}

/// Product grid on the skeleton `𝕋ⁿ(center, radii)` with `m` angles per dimension.
pub fn torus_grid(center: &[C64], radii: &[f64], m: usize) -> Vec<Vec<C64>> {
    theta_grid(center.len(), m)
        .into_iter()
        .map(|t| {
            center
                .iter()
                .zip(radii)
                .zip(&t)
                .map(|((c, r), th)| c + C64::from_polar(*r, *th))
                .collect()
        })
        .collect()
}

/// `count` Halton points on the skeleton.
pub fn torus_halton(center: &[C64], radii: &[f64], count: usize) -> Vec<Vec<C64>> {
    let n = center.len();
    (1..=count as u64)
        .map(|i| {
            (0..n)
                .map(|j| center[j] + C64::from_polar(radii[j], TAU * radical_inverse(PRIMES[j], i)))
                .collect()
        })
        .collect()
}

/// Product grid on the closed polydisc: per coordinate the center plus `levels` circles
/// of radii `k r_j / levels` with `angles` points each.
pub fn polydisc_grid(center: &[C64], radii: &[f64], levels: usize, angles: usize) -> Vec<Vec<C64>> {
    let per: Vec<Vec<C64>> = center
        .iter()
        .zip(radii)
        .map(|(c, r)| {
            let mut v = vec![*c];
            for k in 1..=levels {
                let rho = r * k as f64 / levels as f64;
                for a in 0..angles {
                    v.push(c + C64::from_polar(rho, TAU * a as f64 / angles as f64));
                }
            }
            v
        })
        .collect();
    let mut out: Vec<Vec<C64>> = vec![Vec::new()];
    for coord in &per {
        let mut next = Vec::with_capacity(out.len() * coord.len());
        for prefix in &out {
            for w in coord {
                let mut p = prefix.clone();
                p.push(*w);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Default angular resolution of local polydisc grids.
pub fn local_angles(n: usize) -> usize {
    match n {
        0..=2 => 16,
        3 => 8,
        _ => 4,
    }
}

/// Points on the real segment `[0, r]` of the first coordinate axis, used as radial anchors.
pub fn radial_anchors(n: usize, count: usize, rmax: f64) -> Vec<Vec<C64>> {
    (0..count)
        .map(|k| {
            let mut z = vec![C64::new(0.0, 0.0); n];
            z[0] = C64::new(rmax * k as f64 / (count.max(2) - 1) as f64, 0.0);
            z
        })
        .collect()
}
