use std::sync::Arc;

use fluxlab::besov::{seminorm, ShiftSet};
use fluxlab::commutator::ScalingFit;
use fluxlab::domain::{Domain, Grid};
use fluxlab::roughfield::{lacunary_scalar, RoughSpec};

fn increment_exponent(alpha: f64, seed: u64) -> f64 {
    let g = Grid::square(Arc::new(Domain::unit_torus(1).unwrap()), 4096).unwrap();
    let f = lacunary_scalar(&g, &RoughSpec::new(alpha, 10, seed, 1.0).unwrap()).unwrap();
    let deltas: Vec<f64> = (3..9).map(|j| 0.5f64.powi(j)).collect();
    let sups: Vec<f64> = deltas
        .iter()
        .map(|&d| {
            let s = ShiftSet::full_commensurate(&g, d).unwrap();
            let r = seminorm(&f, 1.0, f64::INFINITY, &s, None).unwrap();
            r.per_shift.iter().map(|row| row.diff_norm).fold(0.0, f64::max)
        })
        .collect();
    ScalingFit::fit(&deltas, &sups).unwrap().exponent.unwrap()
}

#[test]
fn sup_increment_exponent_tracks_alpha() {
    for seed in 0..3 {
        let low = increment_exponent(1.0 / 3.0, seed);
        assert!((low - 1.0 / 3.0).abs() <= 0.1, "seed {seed}: {low}");
        let high = increment_exponent(2.0 / 3.0, seed);
        assert!(high > low + 0.15 && high <= 2.0 / 3.0 + 0.1, "seed {seed}: {high}");
    }
}
