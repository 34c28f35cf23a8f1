use fundcost::alm::*;
use fundcost::Error;

fn example() -> AlmParams {
    AlmParams::new(1.0, 1.0, 0.02, -0.5, 1.0, 1.0, 0.07).unwrap()
}

#[test]
fn validation() {
    let e = AlmParams::new(1.0, 1.0, 0.07, -0.5, 1.0, 1.0, 0.07).unwrap_err();
    assert!(matches!(e, Error::InvalidParameter { name: "r", .. }));
    assert!(AlmParams::new(1.0, 1.0, 0.02, 0.5, 1.0, 1.0, 0.07).is_err());
    assert!(AlmParams::new(0.0, 1.0, 0.02, -0.5, 1.0, 1.0, 0.07).is_err());
}

#[test]
fn reduction_map() {
    let (p, a) = log_funding_ratio(&example());
    assert_eq!((p.mu, p.sigma, a), (-0.5, 1.0, 1.0));
}

#[test]
fn injection_examples() {
    let alm = example();
    let e1 = std::f64::consts::E - 1.0;
    assert!((injection_amount(&alm, 1.0).unwrap() - e1).abs() < 1e-15);
    assert!((injection_amount(&alm, 2.0).unwrap() - 2.0 * e1).abs() < 1e-15);
    let tiny = AlmParams { theta: 1e-12, ..alm };
    assert!(injection_amount(&tiny, 5.0).unwrap() < 1e-10);
    // the top-up restores the log ratio to theta
    for l in [0.3, 1.0, 7.5] {
        let add = injection_amount(&alm, l).unwrap();
        assert!((((l + add) / l).ln() - alm.theta).abs() < 1e-14);
    }
}

#[test]
fn perpetual_examples() {
    let alm = example();
    let v = perpetual_cost_alm(&alm);
    assert!((v - 17.910_876).abs() < 1e-5, "{v}");
    let lim = perpetual_cost_alm_limit(&alm).unwrap();
    assert!((lim - 9.960_516_556).abs() < 1e-8);
    let small = AlmParams { theta: 1e-6, ..alm };
    assert!((perpetual_cost_alm(&small) - lim).abs() / lim < 1e-5);
    let far = AlmParams { a: 2000.0, ..alm };
    assert!(perpetual_cost_alm(&far) < 1e-70);
}

#[test]
fn linear_in_liability_scale() {
    let alm = example();
    let doubled = AlmParams { b: 2.0, ..alm };
    assert_eq!(perpetual_cost_alm(&doubled), 2.0 * perpetual_cost_alm(&alm));
}

#[test]
fn finite_examples() {
    let alm = example();
    let far = finite_cost_alm(&alm, 1e6).unwrap();
    assert!((far.value - perpetual_cost_alm(&alm)).abs() < 1e-10);
    let fifty = finite_cost_alm(&alm, 50.0).unwrap();
    // (e - 1) * 9.19798257
    assert!((fifty.value - 15.804_73).abs() < 1e-4, "{}", fifty.value);
    let weak = AlmParams { mu: -0.05, ..alm };
    assert!(matches!(
        finite_cost_alm(&weak, 50.0),
        Err(Error::ConditionViolated(_))
    ));
}
