use std::sync::Arc;

use proptest::prelude::*;

use fluxlab::commutator::{taylor_defect_check, ScalingFit};
use fluxlab::domain::{Domain, Grid};
use fluxlab::field::{Field, lp_norm};
use fluxlab::mollify::{mollify, MollifierKernel};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn taylor_ratio_is_bounded(a in 1e-3f64..1e3, t in -0.999f64..50.0, gamma in 1.01f64..4.0) {
        let r = taylor_defect_check(&[a], &[a * t], gamma).unwrap();
        prop_assert_eq!(r.violations, 0);
        prop_assert!(r.max_ratio <= 4.0 * gamma * gamma, "{}", r.max_ratio);
    }

    #[test]
    fn power_laws_are_recovered(c in 0.1f64..10.0, s in -2.0f64..3.0) {
        let eps: [f64; 4] = [0.25, 0.125, 0.0625, 0.03125];
        let values: Vec<f64> = eps.iter().map(|e| c * e.powf(s)).collect();
        let fit = ScalingFit::fit(&eps, &values).unwrap();
        prop_assert!((fit.exponent.unwrap() - s).abs() < 1e-9);
    }

    #[test]
    fn mollification_keeps_the_mean_and_does_not_grow_sup(
        coeffs in prop::collection::vec(-1.0f64..1.0, 6),
        eps in 0.07f64..0.3,
    ) {
        let g = Grid::square(Arc::new(Domain::unit_torus(2).unwrap()), 32).unwrap();
        let f = Field::from_fn(g.clone(), |x| {
            coeffs.iter().enumerate().map(|(k, c)| {
                let k = k as f64 + 1.0;
                c * (std::f64::consts::TAU * (k * x[0] + (k - 2.0) * x[1])).sin()
            }).sum::<f64>() + 0.5
        }).unwrap();
        let m = mollify(&f, &MollifierKernel::bump(eps).unwrap()).unwrap();
        let mean = |f: &Field| f.data().iter().sum::<f64>() / f.data().len() as f64;
        prop_assert!((mean(&m) - mean(&f)).abs() < 1e-12);
        let (sm, sf) = (lp_norm(&m, f64::INFINITY, None).unwrap(), lp_norm(&f, f64::INFINITY, None).unwrap());
        prop_assert!(sm <= sf + 1e-12);
    }
}
