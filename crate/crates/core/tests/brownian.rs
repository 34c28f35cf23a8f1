use fundcost::brownian::*;
use fundcost::Error;
use fundcost::model::FundParams;

fn base() -> BrownianParams {
    BrownianParams::new(-0.5, 1.0).unwrap()
}

fn fund(a: f64, theta: f64) -> FundParams {
    FundParams::new(a, theta, 0.05).unwrap()
}

#[test]
fn params_validation() {
    assert!(BrownianParams::new(0.0, 1.0).is_err());
    assert!(BrownianParams::new(0.1, 1.0).is_err());
    assert!(BrownianParams::new(-0.1, 0.0).is_err());
}

#[test]
fn k_lambda_examples() {
    let p = base();
    assert_eq!(k_lambda(&p, 0.0).unwrap(), 0.0);
    // -0.5 + sqrt(0.35)
    assert!((k_lambda(&p, 0.05).unwrap() - 0.091_607_978_309_961_6).abs() < 1e-15);
    let q = BrownianParams::new(-1.0, 2.0).unwrap();
    let want = (-1.0 + 5f64.sqrt()) / 4.0;
    assert!((k_lambda(&q, 0.5).unwrap() - want).abs() < 1e-15);
    assert!(matches!(k_lambda(&p, -0.01), Err(Error::DomainError { .. })));
}

#[test]
fn k_lambda_extended_examples() {
    let p = base();
    let k = decay_rate(&p, 1.0, 0.05).unwrap();
    let kr = k_lambda(&p, 0.05).unwrap();
    assert!((k_lambda_extended(&p, -k).unwrap() + kr).abs() < 1e-12);
    assert!((k_lambda_extended(&p, -0.125).unwrap() + 0.5).abs() < 1e-15);
    assert!(matches!(
        k_lambda_extended(&p, -0.2),
        Err(Error::DomainError { .. })
    ));
}

#[test]
fn transform_examples() {
    let p = base();
    assert_eq!(fpt_laplace(&p, 1.0, 0.0).unwrap(), 1.0);
    let one = fpt_laplace(&p, 1.0, 0.05).unwrap();
    assert!((one - 0.912_462_8).abs() < 1e-7);
    let two = fpt_laplace(&p, 2.0, 0.05).unwrap();
    assert!((two - one * one).abs() < 1e-15);
    assert!((two - 0.832_588_4).abs() < 1e-7);
}

#[test]
fn cdf_endpoints_and_monotone() {
    let p = base();
    assert_eq!(fpt_cdf(&p, 1.0, 0.0), 0.0);
    assert_eq!(fpt_cdf(&p, 1.0, f64::INFINITY), 1.0);
    assert!((fpt_cdf(&p, 1.0, 1e4) - 1.0).abs() < 1e-12);
    let mut prev = 0.0;
    for i in 1..400 {
        let v = fpt_cdf(&p, 1.0, i as f64 * 0.05);
        assert!(v >= prev);
        prev = v;
    }
}

#[test]
fn cdf_large_start_stays_finite() {
    let p = BrownianParams::new(-3.0, 0.2).unwrap();
    // exp(-2 mu a / sigma^2) = exp(7500) would overflow if formed directly
    for s in [1e-3, 1.0, 100.0, 166.0, 170.0, 1e4] {
        let v = fpt_cdf(&p, 500.0, s);
        assert!(v.is_finite() && (0.0..=1.0).contains(&v), "{s}: {v}");
    }
    assert!(fpt_cdf(&p, 500.0, 1e4) > 0.999);
}

#[test]
fn perpetual_cost_examples() {
    let p = base();
    let v1 = perpetual_cost(&p, &fund(1.0, 1.0));
    assert!((v1 - 10.4237).abs() < 5e-5, "{v1}");
    let v2 = perpetual_cost(&p, &fund(2.0, 1.0));
    // 0.8325884 / (1 - 0.9124628), evaluated independently
    assert!((v2 - 9.511_25).abs() < 5e-5, "{v2}");
    assert!(v2 < v1);
    assert!(perpetual_cost(&p, &fund(2000.0, 1.0)) < 1e-70);
}

#[test]
fn perpetual_limit_examples() {
    let p = base();
    let lim = perpetual_cost_limit(&p, 1.0, 0.05).unwrap();
    assert!((lim - 9.96052).abs() < 5e-6, "{lim}");
    let near = perpetual_cost(&p, &fund(1.0, 1e-6));
    assert!((near - lim).abs() / lim < 1e-4);
    assert!(perpetual_cost_limit(&p, 5000.0, 0.05).unwrap() < 1e-100);
}

#[test]
fn decay_rate_examples() {
    let p = base();
    let k = decay_rate(&p, 1.0, 0.05).unwrap();
    assert!((k - 0.041_608_0).abs() < 5e-8, "{k}");
    for th in [0.5, 1.0, 2.0] {
        assert_eq!(decay_rate(&p, th, 0.05).unwrap(), k);
    }
    let residual =
        fpt_laplace(&p, 1.0, 0.05).unwrap() * fpt_laplace(&p, 1.0, -k).unwrap() - 1.0;
    assert!(residual.abs() < 1e-12);
    let weak = BrownianParams::new(-0.1, 1.0).unwrap();
    assert!(matches!(
        decay_rate(&weak, 1.0, 0.05),
        Err(Error::ConditionViolated(_))
    ));
}

#[test]
fn coefficient_examples() {
    let p = base();
    let c = asymptotic_coefficient(&p, &fund(1.0, 1.0)).unwrap();
    assert!((c - 9.81523).abs() < 5e-5, "{c}");
    for (a, th) in [(1.0, 0.5), (5.0, 2.0), (1.0, 2.0), (5.0, 0.5)] {
        assert_eq!(asymptotic_coefficient(&p, &fund(a, th)).unwrap(), c);
    }
    let weak = BrownianParams::new(-0.1, 1.0).unwrap();
    assert!(asymptotic_coefficient(&weak, &fund(1.0, 1.0)).is_err());
}

#[test]
fn finite_cost_examples() {
    let p = base();
    let f = fund(1.0, 1.0);
    let v = perpetual_cost(&p, &f);
    let far = finite_cost_approx(&p, &f, 1e6).unwrap();
    assert!((far.value - v).abs() < 1e-12);
    let zero = finite_cost_approx(&p, &f, 0.0).unwrap();
    assert!((zero.value - 0.6085).abs() < 5e-4, "{}", zero.value);
    assert!(!zero.in_asymptotic_regime);
    let fifty = finite_cost_approx(&p, &f, 50.0).unwrap();
    assert!((fifty.value - 9.198).abs() < 5e-4, "{}", fifty.value);
    assert!(fifty.in_asymptotic_regime);
    assert!(finite_cost_approx(&p, &f, 10.0).unwrap().value < fifty.value);
}
