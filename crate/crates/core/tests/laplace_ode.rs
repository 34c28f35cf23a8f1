use fundcost::laplace_ode::*;
use fundcost::Error;
use fundcost::model::{DiffusionSpec, FundParams};
use fundcost::brownian::{self, BrownianParams};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn base() -> DiffusionSpec {
    DiffusionSpec::brownian(-0.5, 1.0).unwrap()
}

#[test]
fn transform_matches_closed_form() {
    let cfg = SolverConfig::default();
    let u1 = transform_at(&base(), 1.0, 0.05, &cfg).unwrap();
    assert!(rel(u1, 0.912_462_784_643_085_4) < 1e-6, "{u1}");
    let u2 = transform_at(&base(), 2.0, 0.05, &cfg).unwrap();
    assert!(rel(u2, 0.832_588_336_867_660_6) < 1e-6, "{u2}");
}

#[test]
fn solution_shape() {
    let cfg = SolverConfig::default();
    let sol = solve_transform(&base(), 0.05, &cfg).unwrap();
    assert_eq!(sol.values[0], 1.0);
    assert!(sol.values.windows(2).all(|w| w[1] <= w[0]));
    assert!(sol.values.iter().all(|v| *v >= 0.0 && *v <= 1.0));
    assert!(sol.discrete_residual(&base()) < 1e-10);
    assert!(sol.est_error <= cfg.rel_tol);
}

#[test]
fn origin_and_small_lambda() {
    let cfg = SolverConfig::default();
    assert_eq!(transform_at(&base(), 0.0, 0.3, &cfg).unwrap(), 1.0);
    let u = transform_at(&base(), 1.0, 1e-9, &cfg).unwrap();
    assert!((u - 1.0).abs() < 1e-8);
}

#[test]
fn beyond_domain_is_no_decay() {
    let cfg = SolverConfig::default();
    let e = solve_transform(&base(), -0.2, &cfg).unwrap_err();
    assert!(matches!(e, Error::NoDecay { .. }), "{e:?}");
}

#[test]
fn negative_lambda_inside_domain() {
    let p = BrownianParams::new(-0.5, 1.0).unwrap();
    let cfg = SolverConfig::default();
    let u = transform_at(&base(), 1.0, -0.04, &cfg).unwrap();
    let exact = brownian::fpt_laplace(&p, 1.0, -0.04).unwrap();
    assert!(rel(u, exact) < 1e-6, "{u} vs {exact}");
}

#[test]
fn derivative_matches_analytic() {
    let cfg = SolverConfig::default();
    let d0 = transform_dlambda(&base(), 1.0, 0.0, &cfg).unwrap();
    assert!((d0.value + 2.0).abs() < 1e-6, "{d0:?}");
    let d = transform_dlambda(&base(), 1.0, 0.05, &cfg).unwrap();
    let exact = -(-0.091_607_978_309_961_6f64).exp() / 0.35f64.sqrt();
    assert!(rel(d.value, exact) < 1e-6, "{d:?}");
    let half = SolverConfig {
        lambda_step: cfg.lambda_step / 2.0,
        ..cfg
    };
    let d_half = transform_dlambda(&base(), 1.0, 0.05, &half).unwrap();
    assert!((d_half.value - d.value).abs() < d.est_error.max(1e-9));
}

#[test]
fn ruin_time_linear_in_start() {
    let cfg = SolverConfig::default();
    assert!((expected_ruin_time(&base(), 1.0, &cfg).unwrap() - 2.0).abs() < 1e-6);
    assert!((expected_ruin_time(&base(), 3.0, &cfg).unwrap() - 6.0).abs() < 1e-5);
}

#[test]
fn perpetual_cost_and_limit() {
    let cfg = SolverConfig::default();
    let f = FundParams::new(1.0, 1.0, 0.05).unwrap();
    let v = perpetual_cost_general(&base(), &f, &cfg).unwrap();
    assert!(rel(v, 10.423_712_713_760_77) < 1e-5, "{v}");
    let lim = perpetual_cost_general_limit(&base(), 1.0, 0.05, &cfg).unwrap();
    assert!(rel(lim, 9.960_516_556_273_165) < 1e-5, "{lim}");
    let tiny = FundParams::new(1.0, 1e-5, 0.05).unwrap();
    let near = perpetual_cost_general(&base(), &tiny, &cfg).unwrap();
    assert!(rel(near, lim) < 1e-3);
}

#[test]
fn decay_root_and_coefficient() {
    let cfg = SolverConfig::default();
    let root = solve_decay_rate(&base(), 1.0, 0.05, &cfg).unwrap();
    assert!((root.k - 0.041_607_978_309_961_6).abs() < 1e-6, "{root:?}");
    assert!(root.residual.abs() < 1e-10);
    let f = FundParams::new(1.0, 1.0, 0.05).unwrap();
    let c = asymptotic_coefficient_general(&base(), &f, &cfg).unwrap();
    assert!(rel(c, 9.815_233_478_725_952) < 1e-4, "{c}");
}

#[test]
fn no_root_for_weak_drift() {
    let cfg = SolverConfig::default();
    let weak = DiffusionSpec::brownian(-0.1, 1.0).unwrap();
    let e = solve_decay_rate(&weak, 1.0, 0.05, &cfg).unwrap_err();
    assert!(matches!(e, Error::NoRoot(_)), "{e:?}");
}

#[test]
fn config_validation() {
    let bad = SolverConfig {
        max_refinements: 1,
        ..SolverConfig::default()
    };
    assert!(bad.validate().is_err());
    assert!(solve_transform(&base(), 0.05, &bad).is_err());
}
