use lindex::expr::{Expr, RealExpr};
use lindex::parse::*;
use lindex::C64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn pole_product_tree() {
    let e = parse_complex("exp(1/((1-z1)*(1-z2)))", 2).unwrap();
    let want = Expr::exp(Expr::recip(Expr::mul(Expr::affine(1.0, -1.0, 0), Expr::affine(1.0, -1.0, 1))));
    assert_eq!(e, want);
    let z = [c(0.2, 0.1), c(-0.3, 0.4)];
    let direct = (1.0 / ((1.0 - z[0]) * (1.0 - z[1]))).exp();
    assert!((e.eval(&z) - direct).norm() < 1e-15 * direct.norm());
}

#[test]
fn constants_and_real_grammar() {
    assert_eq!(parse_complex("3", 2).unwrap(), Expr::real(3.0));
    let r = parse_real("(|z2|+1)", 2).unwrap();
    assert_eq!(r, RealExpr::add(RealExpr::AbsVar(1), RealExpr::Const(1.0)));
    assert_eq!(r.eval(&[c(9.0, 0.0), c(0.6, -0.8)]), 2.0);
    let n = parse_real("2/(1-|z|)", 2).unwrap();
    assert!((n.eval(&[c(0.3, 0.0), c(0.0, 0.4)]) - 4.0).abs() < 1e-15);
    assert!(matches!(parse_expression("z1*z2", 2).unwrap(), Parsed::Complex(_)));
    assert!(matches!(parse_expression("|z1|+z2", 2), Err(ParseError::Domain { .. })));
    assert!(matches!(parse_expression("|z1|+|z|", 2).unwrap(), Parsed::Real(_)));
}

#[test]
fn precedence_and_powers() {
    let z = [c(0.5, 0.25), c(-0.2, 0.1)];
    let cases: [(&str, fn(&[C64]) -> C64); 5] = [
        ("1+2*z1^2", |z| 1.0 + 2.0 * z[0] * z[0]),
        ("-z1^2", |z| -(z[0] * z[0])),
        ("(z1-z2)^3*z2", |z| (z[0] - z[1]).powu(3) * z[1]),
        ("1-z1-z2", |z| 1.0 - z[0] - z[1]),
        ("3/(2-z1)", |z| 3.0 / (2.0 - z[0])),
    ];
    for (text, f) in cases {
        let v = parse_complex(text, 2).unwrap().eval(&z);
        assert!((v - f(&z)).norm() < 1e-15, "{text}");
    }
    // the power binds to the atom, so a quotient in front is squared as a whole
    let q = parse_real("2/(1-|z|)^2", 1).unwrap().eval(&[c(0.5, 0.0)]);
    assert!((q - 16.0).abs() < 1e-12);
    let q = parse_real("2/((1-|z|)^2)", 1).unwrap().eval(&[c(0.5, 0.0)]);
    assert!((q - 8.0).abs() < 1e-12);
}

#[test]
fn error_spans() {
    let e = parse_complex("exp(z1*", 2).unwrap_err();
    assert!(matches!(e, ParseError::Syntax { .. }));
    assert_eq!((e.span().line, e.span().col), (1, 8));
    assert_eq!(e.to_string(), "syntax error at 1:8: unexpected end of input");

    let e = parse_complex("z1 +\n  z3", 2).unwrap_err();
    assert!(matches!(e, ParseError::Arity { index: 3, n: 2, .. }));
    assert_eq!((e.span().line, e.span().col), (2, 3));

    let e = parse_complex("z1 + |z2|", 2).unwrap_err();
    assert!(matches!(e, ParseError::Domain { .. }));
    assert_eq!(e.span().col, 6);

    assert!(parse_complex("z0", 2).is_err());
    assert!(parse_complex("2 ^ 2.5", 1).is_err());
    assert!(parse_complex("cos(z1)", 1).is_err());
    assert!(parse_complex("", 1).is_err());
    assert!(parse_complex("(z1", 1).is_err());
    assert!(parse_complex("z1)", 1).is_err());
}

fn leaf() -> impl Strategy<Value = (String, f64)> {
    prop_oneof![
        (0u32..9).prop_map(|k| (k.to_string(), k as f64)),
        Just(("|z1|".to_string(), 0.3)),
        Just(("|z|".to_string(), 0.5)),
    ]
}

fn tree() -> impl Strategy<Value = (String, f64)> {
    leaf().prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| (format!("({}+{})", a.0, b.0), a.1 + b.1)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| (format!("({}-{})", a.0, b.0), a.1 - b.1)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| (format!("{}*{}", a.0, b.0), a.1 * b.1)),
            inner.clone().prop_map(|a| (format!("({})^2", a.0), a.1 * a.1)),
            inner.prop_map(|a| (format!("exp({})", a.0), a.1.exp())),
        ]
    })
}

proptest! {
    #[test]
    fn real_grammar_evaluates_like_arithmetic((text, want) in tree()) {
        // |z1| = 0.3 and |z| = 0.5 at this point
        let z = [c(0.0, 0.3), c(0.4, 0.0)];
        let got = parse_real(&text, 2).unwrap().eval(&z);
        prop_assume!(want.is_finite());
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{} -> {} vs {}", text, got, want);
    }
}
