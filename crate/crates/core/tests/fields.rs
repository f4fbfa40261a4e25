use nsl::fields::{EvalError, ParseError};
use nsl::*;
use proptest::prelude::*;

/// Expressions in `x1, x2, p1, p2` that are smooth everywhere.
fn safe_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0usize..2).prop_map(|i| format!("x{}", i + 1)),
        (0usize..2).prop_map(|i| format!("p{}", i + 1)),
        (-3.0f64..3.0).prop_map(|c| format!("({c:.3})")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(sin({a}))")),
            inner.clone().prop_map(|a| format!("sqrt(1 + exp({a})^2)")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) / (2 + sin({b}))")),
            inner.prop_map(|a| format!("({a})^2")),
        ]
    })
}

fn point() -> impl Strategy<Value = PhasePoint> {
    (prop::array::uniform2(-1.0f64..1.0), prop::array::uniform2(-1.0f64..1.0))
        .prop_map(|(x, p)| PhasePoint::new(x.to_vec(), p.to_vec()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn jets_agree_with_finite_differences(src in safe_expr(), q in point()) {
        let e = parse_expression(&src, 2).unwrap();
        let jet = evaluate_jet(&e, &q, 3).unwrap();
        prop_assert_eq!(jet.value(), evaluate_jet(&e, &q, 0).unwrap().value());
        let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()));
        for a in 0..4 {
            let fd = finite_difference_probe(&e, &q, &[a], 1e-5).unwrap();
            prop_assert!(close(jet.derivative(&[a]), fd, 1e-6), "{} d{}: {} vs {}", src, a, jet.derivative(&[a]), fd);
            for b in a..4 {
                let fd = finite_difference_probe(&e, &q, &[a, b], 1e-4).unwrap();
                prop_assert!(close(jet.derivative(&[a, b]), fd, 1e-4), "{} d{}{}", src, a, b);
            }
        }
        let fd = finite_difference_probe(&e, &q, &[0, 2, 3], 2e-3).unwrap();
        prop_assert!(close(jet.derivative(&[0, 2, 3]), fd, 1e-3), "{} third", src);
    }

    #[test]
    fn derivative_order_is_irrelevant(src in safe_expr(), q in point()) {
        let jet = evaluate_jet(&parse_expression(&src, 2).unwrap(), &q, 3).unwrap();
        prop_assert_eq!(jet.derivative(&[1, 3]), jet.derivative(&[3, 1]));
        prop_assert_eq!(jet.derivative(&[0, 1, 2]), jet.derivative(&[2, 0, 1]));
    }
}

fn value(src: &str, x: &[f64], p: &[f64]) -> f64 {
    let q = PhasePoint::new(x.to_vec(), p.to_vec());
    evaluate_jet(&parse_expression(src, x.len()).unwrap(), &q, 0).unwrap().value()
}

#[test]
fn operator_precedence() {
    assert_eq!(value("-x1^2", &[3.0], &[0.0]), -9.0);
    assert_eq!(value("2^3^2", &[0.0], &[0.0]), 512.0);
    assert_eq!(value("8/4/2", &[0.0], &[0.0]), 1.0);
    assert_eq!(value("1 + 2*3^2", &[0.0], &[0.0]), 19.0);
    assert_eq!(value("(1 + 2)*3", &[0.0], &[0.0]), 9.0);
    assert_eq!(value("x1 - -p1", &[1.0], &[2.0]), 3.0);
    assert_eq!(value("1e-1 * 20", &[0.0], &[0.0]), 2.0);
}

#[test]
fn parse_failures() {
    assert!(matches!(parse_expression("", 2), Err(ParseError::Empty)));
    assert!(matches!(parse_expression("x3", 2), Err(ParseError::IndexOutOfRange { .. })));
    assert!(matches!(parse_expression("q1 + 1", 2), Err(ParseError::UnknownIdentifier { .. })));
    assert!(matches!(parse_expression("(x1", 2), Err(ParseError::Syntax { .. })));
    assert!(matches!(parse_expression("x1 +", 2), Err(ParseError::Syntax { .. })));
}

#[test]
fn domain_errors_are_reported() {
    let q = PhasePoint::new(vec![-1.0, 0.0], vec![0.0, 0.0]);
    for src in ["sqrt(x1)", "log(x1)", "1/p1"] {
        let r = evaluate_jet(&parse_expression(src, 2).unwrap(), &q, 1);
        assert!(matches!(r, Err(EvalError::Domain { .. })), "{src}");
    }
}

#[test]
fn norm_has_known_jet() {
    let e = parse_expression("sqrt(p1^2 + p2^2)", 2).unwrap();
    let jet = evaluate_jet(&e, &PhasePoint::new(vec![0.0, 0.0], vec![3.0, 4.0]), 2).unwrap();
    assert!((jet.value() - 5.0).abs() < 1e-15);
    assert!((jet.derivative(&[2]) - 0.6).abs() < 1e-15);
    assert!((jet.derivative(&[2, 2]) - 16.0 / 125.0).abs() < 1e-15);
    assert!((jet.derivative(&[2, 3]) + 12.0 / 125.0).abs() < 1e-15);
}
