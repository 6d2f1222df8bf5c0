use proptest::prelude::*;
use quasisphere::expr::HExpression;

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        (0u32..1000).prop_map(|n| n.to_string()),
        (0.0f64..100.0).prop_map(|x| format!("{x}")),
        Just("theta".to_string()),
        Just("phi".to_string()),
    ]
}

fn source() -> impl Strategy<Value = String> {
    leaf().prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(vec!["+", "-", "*", "/", "^"]), inner.clone())
                .prop_map(|(a, op, b)| format!("{a} {op} {b}")),
            inner.clone().prop_map(|a| format!("-{a}")),
            inner.clone().prop_map(|a| format!("({a})")),
            (prop::sample::select(vec!["sin", "cos", "exp", "sqrt"]), inner).prop_map(|(f, a)| format!("{f}({a})")),
        ]
    })
}

proptest! {
    #[test]
    fn canonical_text_round_trips(src in source()) {
        let e = HExpression::parse(&src).unwrap();
        let text = e.to_string();
        let back = HExpression::parse(&text).unwrap();
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(back.to_string(), text);
        for (t, p) in [(0.3, 1.1), (2.0, 5.0)] {
            let (a, b) = (e.eval(t, p), back.eval(t, p));
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn garbage_never_panics(src in "[a-z0-9+*/^(). -]{0,24}") {
        let _ = HExpression::parse(&src);
    }
}
