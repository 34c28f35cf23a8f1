use fundcost::renewal::*;
use fundcost::Error;
use fundcost::brownian::BrownianParams;
use fundcost::model::FundParams;

fn laws() -> (FirstPassageLaw, FirstPassageLaw, FundParams) {
    let p = BrownianParams::new(-0.5, 1.0).unwrap();
    let f = FundParams::new(1.0, 1.0, 0.05).unwrap();
    (
        FirstPassageLaw::brownian(&p, f.a, f.r).unwrap(),
        FirstPassageLaw::brownian(&p, f.theta, f.r).unwrap(),
        f,
    )
}

#[test]
fn law_validation() {
    assert!(FirstPassageLaw::new(|_| 0.0, |_| 0.0, 1.0, 0.0).is_err());
    assert!(FirstPassageLaw::new(|_| 0.0, |_| 0.0, 0.5, 0.0).is_ok());
}

#[test]
fn first_epoch_is_initial_law() {
    let (first, step, _) = laws();
    let grid = TimeGrid::new(20.0, 0.05).unwrap();
    let g = convolve_passage_laws(&first, &step, 1, &grid).unwrap();
    for (i, t) in grid.times().iter().enumerate() {
        assert_eq!(g.curves[0][i], first.cdf(*t));
    }
}

#[test]
fn epochs_ordered_and_second_mean() {
    let (first, step, _) = laws();
    let grid = TimeGrid::new(120.0, 0.02).unwrap();
    let g = convolve_passage_laws(&first, &step, 4, &grid).unwrap();
    for t in [1.0, 3.0, 8.0, 20.0] {
        let vals: Vec<f64> = (1..=4).map(|n| g.value(n, t)).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{vals:?}");
    }
    // E[T_2] = ∫ (1 - G_2) dt = 2 + 2
    let g2 = &g.curves[1];
    let mean: f64 = grid.step
        * (g2.iter().map(|v| 1.0 - v).sum::<f64>() - 0.5 * (2.0 - g2[g2.len() - 1]));
    assert!((mean - 4.0).abs() < 1e-3, "{mean}");
}

#[test]
fn generating_function_identities() {
    let (first, step, _) = laws();
    let grid = TimeGrid::new(12.0, 0.02).unwrap();
    let g = convolve_passage_laws(&first, &step, 40, &grid).unwrap();
    assert_eq!(generating_function(&g, 5.0, 1.0).unwrap(), 1.0);
    let p0 = generating_function(&g, 2.0, 0.0).unwrap();
    assert!((p0 - (1.0 - first.cdf(2.0))).abs() < 1e-12);
    let mid = generating_function(&g, 10.0, 0.9).unwrap();
    assert!(mid > 0.0 && mid < 1.0);
    let short = convolve_passage_laws(&first, &step, 2, &grid).unwrap();
    assert!(matches!(
        generating_function(&short, 10.0, 0.9),
        Err(Error::SeriesTruncation(_))
    ));
}

#[test]
fn series_zero_and_truncation() {
    let (first, step, f) = laws();
    assert_eq!(series_cost(&first, &step, &f, 0.0, 400).unwrap().value, 0.0);
    assert!(matches!(
        series_cost(&first, &step, &f, 10.0, 5),
        Err(Error::SeriesTruncation(_))
    ));
    let n = required_terms(&first, &step, &f, SERIES_TOL);
    assert!(series_tail_bound(&first, &step, &f, n) < SERIES_TOL);
    assert!(series_tail_bound(&first, &step, &f, n - 1) >= SERIES_TOL);
}

#[test]
fn renewal_starts_at_zero_and_rises() {
    let (first, step, f) = laws();
    let grid = TimeGrid::new(60.0, 0.02).unwrap();
    let c = solve_renewal_equation(&first, &step, &f, &grid).unwrap();
    assert_eq!(c.w[0], 0.0);
    assert!(c.w.windows(2).all(|w| w[1] >= w[0]));
    assert!(c.w.iter().all(|w| *w <= 10.423_712_713_760_77));
    assert_eq!(c.method, Method::Renewal);
}

#[test]
fn series_matches_renewal() {
    let (first, step, f) = laws();
    let n = required_terms(&first, &step, &f, SERIES_TOL);
    let grid = TimeGrid::new(50.0, 0.02).unwrap();
    let s = series_curve(&first, &step, &f, &grid, n).unwrap();
    let r = solve_renewal_equation(&first, &step, &f, &grid).unwrap();
    for t in [5.0, 20.0, 50.0] {
        let (a, ea) = s.at(t);
        let (b, eb) = r.at(t);
        assert!((a - b).abs() <= ea + eb + 1e-9, "t={t}: {a} vs {b}");
    }
}

#[test]
fn csv_layout() {
    let c = CostCurve {
        t: vec![0.0, 0.5],
        w: vec![0.0, 0.25],
        err: vec![0.0, 1e-9],
        method: Method::Renewal,
    };
    assert_eq!(c.to_csv(), "t,w,err,method\n0,0,0,renewal\n0.5,0.25,0.000000001,renewal\n");
}

#[test]
fn inconsistent_law_is_rejected() {
    let (first, _, f) = laws();
    let bogus = FirstPassageLaw::new(|s| 1.0 - (-s).exp(), |s| 2.0 * (-s).exp(), 0.9, 0.0).unwrap();
    let grid = TimeGrid::new(10.0, 0.01).unwrap();
    assert!(matches!(
        solve_renewal_equation(&first, &bogus, &f, &grid),
        Err(Error::GridTooCoarse(_))
    ));
}
