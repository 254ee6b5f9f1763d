//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const MAX_PANELS: usize = 1 << 20;
const MAX_DEPTH: u32 = 40;
const MIN_DEPTH: u32 = 4;

struct State<'a> {
    f: &'a dyn Fn(f64) -> f64,
    panels: usize,
}

fn eval(st: &mut State, x: f64) -> Result<f64> {
    let v = (st.f)(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::IntegrandSingularity { t: x })
    }
}

#[allow(clippy::too_many_arguments)]
fn step(
    st: &mut State,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = eval(st, lm)?;
    let frm = eval(st, rm)?;
    let h = b - a;
    let left = h / 12.0 * (fa + 4.0 * flm + fm);
    let right = h / 12.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    st.panels += 1;
    if depth == 0
        || st.panels >= MAX_PANELS
        || (depth <= MAX_DEPTH - MIN_DEPTH && delta.abs() <= 15.0 * tol)
    {
        return Ok(left + right + delta / 15.0);
    }
    Ok(step(st, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + step(st, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut st = State { f, panels: 0 };
    let fa = eval(&mut st, a)?;
    let fb = eval(&mut st, b)?;
    let m = 0.5 * (a + b);
    let fm = eval(&mut st, m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(&mut st, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}
