use super::*;
use crate::masolve::{ScaleFn, Weight};

#[test]
fn analytic_u0_slopes() {
    let hs: Vec<f64> = (0..6).map(|k| 0.1 * 0.5f64.powi(k)).collect();
    for alpha in [0.25, 0.5, 0.75] {
        let (t, n) = analytic_localization(alpha, &hs);
        assert!(t.pass && n.pass, "{t:?} {n:?}");
        assert!((n.predicted - 1.0 / (2.0 - alpha)).abs() < 1e-15);
    }
    let (_, n) = analytic_localization(0.25, &hs);
    assert!((n.predicted - 0.5714285714285714).abs() < 1e-15);
}

#[test]
fn liouville_residual_bounds() {
    let r = liouville_residual(0.5, 1.0 / 256.0, (0.25, 1.0)).unwrap();
    assert!(r.residual <= 0.02, "{}", r.residual);
    assert!(r.trace_converges);
    let coarse = liouville_residual(0.5, 1.0 / 128.0, (0.25, 1.0)).unwrap();
    assert!(coarse.residual >= 2.0 * r.residual);
    let zero = liouville_residual(0.0, 1.0 / 256.0, (0.25, 1.0)).unwrap();
    assert!(zero.residual <= 0.02);
    assert!(matches!(liouville_residual(1.2, 0.01, (0.25, 1.0)), Err(Error::IllPosed { .. })));
}

#[test]
fn expansion_of_exact_liouville_solution() {
    let alpha = 0.5;
    let d = DomainSpec::graph(2, GraphProfile::flat(), 0.5, 0.5, 0.25).unwrap();
    let p = ProblemSpec::new(d.clone(), alpha, Weight::Height, ScaleFn::Constant(1.0), BoundaryData::Liouville { alpha })
        .unwrap();
    let disc = default_disc(&d, 1.0 / 256.0, 1).unwrap();
    let u = GridFunction::from_fn(&disc, |x| u0_value(alpha, x));
    let r = tangential_expansion_experiment(&u, &p, &Heights::Auto, &SectionOptions::extrapolated(alpha)).unwrap();
    assert!((r.a_hat / r.predicted - 1.0).abs() < 1e-9, "{r:?}");
    assert!(r.slope.abs() < 1e-9);
    assert!(r.eta.len() >= 3 && r.eta.iter().all(|e| e.1 < 1e-6), "{:?}", r.eta);
    assert!(r.pass());
    assert!((r.predicted - 4.0 / 3.0).abs() < 1e-15);
}

#[test]
fn localization_on_sampled_u0() {
    let alpha = 0.5;
    let d = DomainSpec::graph(2, GraphProfile::flat(), 0.5, 0.25, 0.125).unwrap();
    let disc = default_disc(&d, 1.0 / 512.0, 1).unwrap();
    let u = GridFunction::from_fn(&disc, |x| u0_value(alpha, x));
    let phi = BoundaryData::Liouville { alpha };
    let r = localization_experiment(&u, &phi, &[0.0, 0.0], &Heights::Auto, alpha, &SectionOptions::extrapolated(alpha))
        .unwrap();
    assert!(r.rows.len() >= 4);
    assert!(r.pass(), "{:?} {:?}", r.tangential, r.normal);
    assert!(r.b_bounds_hold);
    assert!(r.sandwich_spread <= 2.0);
}
