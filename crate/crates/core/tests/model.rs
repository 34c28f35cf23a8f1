use fundcost::model::*;
use fundcost::Error;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn scale_examples() {
    let s = DiffusionSpec::brownian(-0.5, 1.0).unwrap();
    assert_eq!(scale_function(&s, 0.0).unwrap(), 0.0);
    assert!(rel(scale_function(&s, 1.0).unwrap(), std::f64::consts::E - 1.0) < 1e-10);
    let z = DiffusionSpec::brownian(0.0, 1.0).unwrap();
    assert!(rel(scale_function(&z, 3.0).unwrap(), 3.0) < 1e-12);
}

#[test]
fn speed_examples() {
    let s = DiffusionSpec::brownian(-0.5, 1.0).unwrap();
    assert_eq!(speed_function(&s, 0.0).unwrap(), 0.0);
    let expected = 2.0 * (1.0 - (-1.0f64).exp());
    assert!(rel(speed_function(&s, 1.0).unwrap(), expected) < 1e-10);
    let z = DiffusionSpec::brownian(0.0, 1.0).unwrap();
    assert!(rel(speed_function(&z, 2.0).unwrap(), 4.0) < 1e-12);
}

#[test]
fn expression_spec_uses_nested_quadrature() {
    // same coefficients as brownian(-0.5, 1) but not recognisably constant
    let s = DiffusionSpec::from_exprs("-0.5 + 0*x", "1 + 0*x").unwrap();
    assert!(s.constant_params().is_none());
    assert!(rel(scale_function(&s, 1.0).unwrap(), std::f64::consts::E - 1.0) < 1e-8);
    // affine drift: q(x) = ∫ exp(0.4 z + 0.3 z²) dz, checked against Simpson
    let a = DiffusionSpec::affine(-0.2, -0.3, 1.0).unwrap();
    let n = 20_000;
    let h = 1.5 / n as f64;
    let g = |z: f64| (0.4 * z + 0.3 * z * z).exp();
    let simpson: f64 = (0..n)
        .map(|i| {
            let z = i as f64 * h;
            h / 6.0 * (g(z) + 4.0 * g(z + h / 2.0) + g(z + h))
        })
        .sum();
    assert!(rel(scale_function(&a, 1.5).unwrap(), simpson) < 1e-10);
}

#[test]
fn below_reference_point_is_rejected() {
    let s = DiffusionSpec::brownian(-0.5, 1.0).unwrap();
    assert!(scale_function(&s, -1.0).is_err());
}

#[test]
fn classify_brownian_sign_rule() {
    let c = |mu| classify_fund(&DiffusionSpec::brownian(mu, 1.0).unwrap()).class;
    assert_eq!(c(-0.5), FundClass::NonAutonomous);
    assert_eq!(c(0.5), FundClass::RuinUncertain);
    assert_eq!(c(0.0), FundClass::RuinCertainInfiniteMean);
}

#[test]
fn classify_affine_and_expr() {
    let a = DiffusionSpec::affine(-0.2, -0.3, 1.0).unwrap();
    assert_eq!(classify_fund(&a).class, FundClass::NonAutonomous);
    let e = DiffusionSpec::from_exprs("-0.5 - 0*x", "1 + 0.1*exp(-x)").unwrap();
    assert_eq!(classify_fund(&e).class, FundClass::NonAutonomous);
}

#[test]
fn diagnostics_record_schedule() {
    let c = classify_fund(&DiffusionSpec::brownian(-0.5, 1.0).unwrap());
    assert_eq!(c.scale.verdict, LimitVerdict::Divergent);
    assert_eq!(c.scale.truncation_points[0], 1.0);
    let speed = c.speed.unwrap();
    assert_eq!(speed.verdict, LimitVerdict::Convergent);
    assert!(rel(*speed.values.last().unwrap(), 2.0) < 1e-5);
}

#[test]
fn presets_parse() {
    let s = DiffusionSpec::from_preset("brownian(mu=-0.5, sigma=1)").unwrap();
    assert_eq!(s.constant_params(), Some((-0.5, 1.0)));
    let s = DiffusionSpec::from_preset("affine(-0.2, -0.3, 1)").unwrap();
    assert_eq!(s.drift(1.0), -0.5);
    match DiffusionSpec::from_preset("brownian(mu=-0.5)") {
        Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "sigma"),
        other => panic!("{other:?}"),
    }
    assert!(DiffusionSpec::from_preset("levy(1)").is_err());
    assert!(DiffusionSpec::from_preset("brownian(-0.5, 0)").is_err());
}

#[test]
fn singular_origin_is_shifted() {
    let s = DiffusionSpec::from_exprs("-1", "x").unwrap();
    assert!(s.reference_point() > 0.0);
    assert!(s.reference_point() <= 1e-3);
}

#[test]
fn fund_params_validation() {
    assert!(FundParams::new(1.0, 1.0, 0.05).is_ok());
    assert!(FundParams::new(0.0, 1.0, 0.05).is_err());
    assert!(FundParams::new(1.0, -1.0, 0.05).is_err());
    assert!(FundParams::new(1.0, 1.0, 0.0).is_err());
}
