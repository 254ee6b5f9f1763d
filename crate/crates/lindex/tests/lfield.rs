use lindex::error::Error;
use lindex::expr::{Expr, RealExpr};
use lindex::lfield::*;
use lindex::parse::parse_complex;
use lindex::report::Verdict;
use lindex::sampling::{euclid_norm, halton_ball, radial_anchors};
use lindex::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn real_anchors(ts: &[f64]) -> Vec<Vec<C64>> {
    ts.iter().map(|&t| vec![c(t, 0.0)]).collect()
}

#[test]
fn construction_validates_beta_and_dimension() {
    assert!(matches!(LField::from_texts(1.0, &["1", "1"]), Err(Error::BetaTooSmall { .. })));
    assert!(matches!(LField::from_texts(1.5, &["|z3|"]), Err(Error::Parse(_))));
    let l = LField::from_texts(1.5, &["|z2|+1", "2*|z1|+1"]).unwrap();
    let z = [c(0.3, 0.4), c(0.0, -0.2)];
    assert_eq!(l.eval(&z), vec![1.2, 2.0]);
    assert_eq!(l.ell(&z), 1.2);
    assert_eq!(l.big_l(&z), 2.0);
    assert!(l.is_radial());
    let twisted = RealExpr::add(RealExpr::Modulus(Expr::exp(Expr::var(0))), RealExpr::Const(1.0));
    assert!(!LField::new(1.5, vec![twisted]).unwrap().is_radial());
}

#[test]
fn cone_condition_examples() {
    let pts = halton_ball(2, 200, 0.99);
    let good = LField::from_texts(2.0, &["4/(1-|z|)", "4/(1-|z|)"]).unwrap();
    let rep = check_cone_condition(&good, &pts).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
    assert!((rep.get("min_ratio").unwrap() - 2.0).abs() < 1e-12);

    let flat = LField::constant(2, 2.0, 1.0).unwrap();
    let rep = check_cone_condition(&flat, &pts).unwrap();
    assert_eq!(rep.verdict, Verdict::Fail);
    assert!(rep.witness.is_some());
    assert!(rep.get("min_ratio").unwrap() <= 0.5);

    assert!(matches!(check_cone_condition(&good, &[]), Err(Error::EmptyGrid)));
}

#[test]
fn cone_condition_for_pole_product_weight_matches_dense_oracle() {
    let beta = 1.05 * 2f64.sqrt();
    let texts = ["1/((1-|z1|)^2*(1-|z|))", "1/((1-|z|)*(1-|z2|)^2)"];
    let l = LField::from_texts(beta, &texts).unwrap();
    let pts = halton_ball(2, 200, 0.999);
    let rep = check_cone_condition(&l, &pts).unwrap();
    let oracle = pts
        .iter()
        .map(|z| {
            let (a1, a2, s) = (z[0].norm(), z[1].norm(), euclid_norm(z));
            let l1 = 1.0 / ((1.0 - a1).powi(2) * (1.0 - s));
            let l2 = 1.0 / ((1.0 - s) * (1.0 - a2).powi(2));
            l1.min(l2) * (1.0 - s) / beta
        })
        .fold(f64::INFINITY, f64::min);
    assert!((rep.get("min_ratio").unwrap() - oracle).abs() < 1e-12 * oracle);
    // near the origin the ratio is about 1/beta < 1
    assert!(oracle < 1.0);
    assert_eq!(rep.verdict, Verdict::Fail);
}

#[test]
fn lambda_of_constant_weight_is_one() {
    let l = LField::constant(2, 1.5, 3.0).unwrap();
    let b = estimate_lambda(&l, &[1.0, 0.5], &halton_ball(2, 16, 0.5), LocalGrid::for_dim(2)).unwrap();
    assert_eq!(b.lambda1, vec![1.0, 1.0]);
    assert_eq!(b.lambda2, vec![1.0, 1.0]);
    assert!(b.inner_estimate);
    let rep = check_q_membership(&l, &[vec![1.0, 1.0]], &halton_ball(2, 16, 0.5), LocalGrid::for_dim(2), DEFAULT_THRESHOLD).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
}

/// Brute-force `λ` over a dense polar grid of each disc.
fn dense_lambda(l: &dyn Fn(f64) -> f64, beta_r: f64, anchors: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &t in anchors {
        let z0 = c(t, 0.0);
        let rho = beta_r / l(t);
        for i in 0..=100 {
            for k in 0..100 {
                let w = z0 + C64::from_polar(rho * i as f64 / 100.0, std::f64::consts::TAU * k as f64 / 100.0);
                let q = l(w.norm()) / l(t);
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
    }
    (lo, hi)
}

#[test]
fn lambda_matches_dense_oracle_in_the_disc() {
    let l = LField::from_texts(2.0, &["2/((1-|z|)^2)"]).unwrap();
    let ts = [0.0, 0.2, 0.5, 0.8, 0.95];
    let b = estimate_lambda(&l, &[1.0], &real_anchors(&ts), LocalGrid::for_dim(1)).unwrap();
    let (lo, hi) = dense_lambda(&|s| 2.0 / (1.0 - s).powi(2), 1.0, &ts);
    assert!((b.lambda1[0] / lo - 1.0).abs() < 0.02, "{} vs {lo}", b.lambda1[0]);
    assert!((b.lambda2[0] / hi - 1.0).abs() < 0.02, "{} vs {hi}", b.lambda2[0]);
    assert!(b.lambda1[0] <= 1.0 && b.lambda2[0] >= 1.0);

    let ball = estimate_lambda_ball(&l, 1.0, &real_anchors(&ts), 4000, 7).unwrap();
    assert!((ball.lambda1[0] / b.lambda1[0] - 1.0).abs() < 0.02);
    assert!((ball.lambda2[0] / b.lambda2[0] - 1.0).abs() < 0.02);
}

#[test]
fn q_membership_cone_weight_against_closed_form() {
    let beta = 2.0;
    let l = LField::from_texts(beta, &["2/(1-|z|)"]).unwrap();
    let anchors = radial_anchors(1, 12, 0.9);
    for r in [0.5, 1.0, 1.5] {
        let b = estimate_lambda(&l, &[r], &anchors, LocalGrid::for_dim(1)).unwrap();
        // disc radius r(1-|z0|)/beta around |z0|: extremes at the radial ends
        let want_hi = 1.0 / (1.0 - r / beta);
        let want_lo = 1.0 / (1.0 + r / beta);
        assert!((b.lambda2[0] / want_hi - 1.0).abs() < 0.02, "R={r}: {}", b.lambda2[0]);
        assert!((b.lambda1[0] / want_lo - 1.0).abs() < 0.02, "R={r}: {}", b.lambda1[0]);
    }
    let grid: Vec<Vec<f64>> = vec![vec![0.5], vec![1.0], vec![1.5]];
    let rep = check_q_membership(&l, &grid, &anchors, LocalGrid::for_dim(1), DEFAULT_THRESHOLD).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
    assert_eq!(rep.get("forms_agree"), Some(1.0));
    // R = beta makes every disc touch the boundary circle
    assert!(matches!(
        estimate_lambda(&l, &[2.0], &anchors, LocalGrid::for_dim(1)),
        Err(Error::PolydiscEscapesBall { .. })
    ));
}

#[test]
fn super_fast_weight_stays_in_q() {
    // l = exp(1/(1-|z|)): the disc radius R/l(t) shrinks faster than l grows
    let l = LField::from_texts(2.0, &["exp(1/(1-|z|))"]).unwrap();
    let anchors = radial_anchors(1, 40, 0.999);
    let b = estimate_lambda(&l, &[1.0], &anchors, LocalGrid::for_dim(1)).unwrap();
    let g = |s: f64| 1.0 / (1.0 - s);
    let oracle = anchors
        .iter()
        .map(|z| {
            let t = z[0].re;
            let rho = (-g(t)).exp();
            (g(t + rho) - g(t)).exp()
        })
        .fold(0.0f64, f64::max);
    assert!((b.lambda2[0] / oracle - 1.0).abs() < 0.02, "{} vs {oracle}", b.lambda2[0]);
    // sup over t of the closed form is about 2.1508, attained near t = 0.4076
    assert!(oracle > 2.1 && oracle <= 2.1508, "{oracle}");
    let rep = check_q_membership(&l, &[vec![1.0]], &anchors, LocalGrid::for_dim(1), DEFAULT_THRESHOLD).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
    assert_eq!(rep.get("forms_agree"), Some(1.0));
    // a threshold below the sampled sup flags it
    let rep = check_q_membership(&l, &[vec![1.0]], &anchors, LocalGrid::for_dim(1), 2.0).unwrap();
    assert_eq!(rep.verdict, Verdict::Fail);
    assert!(rep.witness.is_some());
}

#[test]
fn lambda_monotone_in_radius() {
    let l = LField::from_texts(1.5, &["2/(1-|z|)+|z1|", "2/(1-|z|)"]).unwrap();
    let anchors = halton_ball(2, 10, 0.8);
    let small = estimate_lambda(&l, &[0.3, 0.3], &anchors, LocalGrid::for_dim(2)).unwrap();
    let big = estimate_lambda(&l, &[0.6, 0.6], &anchors, LocalGrid::for_dim(2)).unwrap();
    for j in 0..2 {
        assert!(big.lambda1[j] <= small.lambda1[j] + 1e-12);
        assert!(big.lambda2[j] >= small.lambda2[j] - 1e-12);
    }
}

#[test]
fn k_membership_examples() {
    let seq: Vec<Vec<f64>> = (1..=9).map(|i| vec![i as f64 / 10.0]).collect();
    let radial = LField::from_texts(2.0, &["3/(1-|z|)"]).unwrap();
    let rep = check_k_membership(&radial, &seq, 16, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(rep.get("c"), Some(1.0));
    assert_eq!(rep.verdict, Verdict::Pass);
    let flat = LField::constant(1, 2.0, 4.0).unwrap();
    assert_eq!(check_k_membership(&flat, &seq, 16, DEFAULT_THRESHOLD).unwrap().get("c"), Some(1.0));

    // (|e^z| + 1)/(1 - |z|): angular ratio (e^r + 1)/(e^{-r} + 1) = e^r at radius r
    let comp = RealExpr::mul(
        RealExpr::add(RealExpr::Modulus(Expr::exp(Expr::var(0))), RealExpr::Const(1.0)),
        RealExpr::recip(RealExpr::sub(RealExpr::Const(1.0), RealExpr::Norm)),
    );
    let l = LField::new(2.0, vec![comp]).unwrap();
    let mut prev = 1.0;
    for r in [0.3, 0.6, 0.9] {
        let c_r = check_k_membership(&l, &[vec![r]], 64, DEFAULT_THRESHOLD).unwrap().get("c").unwrap();
        assert!(c_r > prev && c_r <= r.exp() * (1.0 + 1e-12), "{r}: {c_r}");
        assert!(c_r >= r.exp() * 0.99);
        prev = c_r;
    }
    assert!(matches!(check_k_membership(&l, &[], 8, DEFAULT_THRESHOLD), Err(Error::EmptyGrid)));
}

#[test]
fn check_theorem13_examples() {
    let anchors = radial_anchors(1, 10, 0.6);
    let grid = LocalGrid::for_dim(1);
    let k = vec![parse_complex("3", 1).unwrap()];
    let rep = check_theorem13(&k, 1.0, 2.0, &[1.0], &anchors, grid, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(rep.get("P"), Some(0.0));
    assert_eq!(rep.get("bracket_lambda1"), Some(1.0));
    assert_eq!(rep.get("bracket_lambda2"), Some(1.0));
    assert_eq!(rep.verdict, Verdict::Pass);

    let e = vec![parse_complex("exp(z1)", 1).unwrap()];
    let rep = check_theorem13(&e, 1.0, 2.0, &[1.0], &anchors, grid, DEFAULT_THRESHOLD).unwrap();
    let p = rep.get("P").unwrap();
    // |l'|/(1+|l|) = e^x/(1+e^x) on the sampled set
    assert!(p > 0.4 && p <= 1.0);
    assert_eq!(rep.verdict, Verdict::Pass);

    let pole = vec![parse_complex("1/(1-z1)", 1).unwrap()];
    let rep = check_theorem13(&pole, 1.0, 2.0, &[1.0], &anchors, grid, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");
    let lstar = l_star(&pole, 1.0, 2.0).unwrap();
    let b = estimate_lambda(&lstar, &[1.0], &anchors, grid).unwrap();
    assert!(b.lambda2[0] <= rep.get("bracket_lambda2").unwrap());
    assert!(b.lambda1[0] >= rep.get("bracket_lambda1").unwrap());
}
