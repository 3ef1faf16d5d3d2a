use std::sync::Arc;

use fluxlab::domain::{Domain, Grid};
use fluxlab::field::{Field, TimeSeriesField};
use fluxlab::hypothesis::{check_bounded_incompressible, check_torus_incompressible, Frames, Probes, Verdict};
use fluxlab::roughfield::{lacunary_velocity, RoughSpec};

fn two_frames(f: Field) -> TimeSeriesField {
    TimeSeriesField::new(vec![0.0, 0.5], vec![f.clone(), f]).unwrap()
}

#[test]
fn critical_velocity_is_inconclusive() {
    let g = Grid::square(Arc::new(Domain::unit_torus(2).unwrap()), 256).unwrap();
    let u = lacunary_velocity(&g, &RoughSpec::new(1.0 / 3.0, 6, 4, 1.0).unwrap()).unwrap();
    let rho = two_frames(Field::constant(g.clone(), 1, 1.0).unwrap());
    let p = two_frames(Field::constant(g.clone(), 1, 0.0).unwrap());
    let u = two_frames(u);
    let probes = Probes::dyadic(0.25, 4, 0.1, 2);
    let r = check_torus_incompressible(Frames { rho: &rho, u: &u, pressure: Some(&p) }, &probes).unwrap();
    let c = r.condition("u_seminorm_vanishing").unwrap();
    assert_eq!(c.verdict, Verdict::Inconclusive, "{}", r.table());
    assert!(c.slope.unwrap().abs() < 0.1);
}

#[test]
fn constant_crossflow_violates_layer_conditions() {
    let g = Grid::square(Arc::new(Domain::unit_disk()), 128).unwrap();
    let rho = two_frames(Field::constant(g.clone(), 1, 1.0).unwrap());
    let p = two_frames(Field::constant(g.clone(), 1, 1.0).unwrap());
    let u = two_frames(Field::vector_from_fn(g.clone(), 2, |_| vec![1.0, 0.5]).unwrap());
    let probes = Probes::dyadic(0.1, 2, 0.2, 4);
    let r = check_bounded_incompressible(Frames { rho: &rho, u: &u, pressure: Some(&p) }, &probes).unwrap();
    for name in ["layer_u_normal_product", "layer_pressure_normal_product"] {
        assert_eq!(r.condition(name).unwrap().verdict, Verdict::Violated, "{}", r.table());
    }
    assert!(r.condition("u_seminorm_vanishing").unwrap().verdict == Verdict::Satisfied);
}
