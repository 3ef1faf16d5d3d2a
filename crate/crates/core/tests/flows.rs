use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use fluxlab::commutator::Bound;
use fluxlab::domain::{Domain, Grid};
use fluxlab::euler::{budget_scaling, compressible_budget, run_compressible, run_incompressible, taylor_green, SolverConfig};
use fluxlab::field::{lp_norm, Field};
use fluxlab::mollify::{KernelProfile, MollifierKernel};
use fluxlab::Error;

fn torus(n: usize) -> Grid {
    Grid::square(Arc::new(Domain::unit_torus(2).unwrap()), n).unwrap()
}

fn unit(g: &Grid) -> Field {
    Field::constant(g.clone(), 1, 1.0).unwrap().into_positive().unwrap()
}

#[test]
fn taylor_green_is_steady() {
    let g = torus(128);
    let u0 = taylor_green(&g).unwrap();
    let traj = run_incompressible(&unit(&g), &u0, &SolverConfig::default()).unwrap();
    let u1 = traj.u.frames().last().unwrap();
    assert_eq!(*traj.u.times().last().unwrap(), 1.0);
    let diff = lp_norm(&u1.sub(&u0).unwrap(), 2.0, None).unwrap();
    assert!(diff <= 1e-6, "{diff}");
}

#[test]
fn smooth_budget_defects_scale_quadratically() {
    let g = torus(128);
    let config = SolverConfig {
        t_final: 0.1,
        ..SolverConfig::default()
    };
    let traj = run_incompressible(&unit(&g), &taylor_green(&g).unwrap(), &config).unwrap();
    let eps = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
    let s = budget_scaling(&traj, KernelProfile::Bump, &eps, None).unwrap();
    for fit in [&s.a2, &s.b1, &s.c].map(|f| f.as_ref().unwrap()) {
        assert!(fit.summary(2.0, 0.2, Bound::AtLeast).pass, "{fit:?}");
    }
    assert!(s.b1.as_ref().unwrap().exponent.is_some());
    let dir = tempfile::tempdir().unwrap();
    s.budgets[0].write_csv(&dir.path().join("b.csv")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert!(text.starts_with("t,E,A2,B1,C\n"));
    assert_eq!(text.lines().count(), 1 + traj.rho.len());
}

#[test]
fn acoustic_mode_frequency() {
    let g = torus(32);
    let gamma: f64 = 1.4;
    let rho = Field::from_fn(g.clone(), |x| 1.0 + 1e-3 * (TAU * x[1]).cos())
        .unwrap()
        .into_positive()
        .unwrap();
    let config = SolverConfig {
        n: 32,
        t_final: 1.0 / gamma.sqrt(),
        gamma: Some(gamma),
        sample_every: 1,
        ..SolverConfig::default()
    };
    let traj = run_compressible(&rho, &Field::constant(g.clone(), 2, 0.0).unwrap(), &config).unwrap();
    let signal: Vec<f64> = traj
        .rho
        .frames()
        .iter()
        .map(|f| f.data().iter().enumerate().map(|(i, r)| (r - 1.0) * (TAU * g.point(i)[1]).cos()).sum())
        .collect();
    let f = fluxlab::euler::crossing_frequency(traj.rho.times(), &signal).unwrap();
    assert!((f - gamma.sqrt()).abs() <= 0.01 * gamma.sqrt(), "{f}");
}

#[test]
fn compressible_pulse_conserves_mass_and_budget_is_finite() {
    let g = torus(64);
    let rho = Field::from_fn(g.clone(), |x| {
        let (a, b) = ((PI * (x[0] - 0.5)).sin(), (PI * (x[1] - 0.5)).sin());
        1.0 + 0.1 * (-(a * a + b * b) / 0.05).exp()
    })
    .unwrap()
    .into_positive()
    .unwrap();
    let config = SolverConfig {
        n: 64,
        t_final: 0.1,
        gamma: Some(2.0),
        ..SolverConfig::default()
    };
    let traj = run_compressible(&rho, &Field::constant(g.clone(), 2, 0.0).unwrap(), &config).unwrap();
    assert!(traj.diagnostics.truncated.is_none());
    assert!(traj.diagnostics.max_mass_drift <= 1e-10);
    let b = compressible_budget(&traj, 2.0, &MollifierKernel::bump(1.0 / 16.0).unwrap()).unwrap();
    let g2 = b.defect_g2.as_ref().unwrap();
    assert!(g2.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(b.energy.iter().all(|e| *e > 0.0));
    assert!(g2[0] == 0.0 && g2[1..].iter().any(|v| *v > 0.0));
}

#[test]
fn steep_pulse_trips_the_shock_monitor() {
    let g = torus(64);
    let rho = Field::from_fn(g.clone(), |x| {
        let (a, b) = ((PI * (x[0] - 0.5)).sin(), (PI * (x[1] - 0.5)).sin());
        1.0 + 2.0 * (-(a * a + b * b) / 0.005).exp()
    })
    .unwrap()
    .into_positive()
    .unwrap();
    let config = SolverConfig {
        n: 64,
        t_final: 1.0,
        gamma: Some(1.4),
        sample_every: 5,
        ..SolverConfig::default()
    };
    let traj = run_compressible(&rho, &Field::constant(g.clone(), 2, 0.0).unwrap(), &config).unwrap();
    let why = traj.diagnostics.truncated.as_deref().expect("monitor should trip");
    assert!(why.contains("smooth"), "{why}");
    assert!(traj.diagnostics.final_time < 1.0);
}

#[test]
fn solvers_reject_bounded_domains_and_bad_configs() {
    let g = Grid::square(Arc::new(Domain::unit_disk()), 32).unwrap();
    let rho = unit(&g);
    let u = Field::constant(g.clone(), 2, 0.0).unwrap();
    let c = SolverConfig { n: 32, ..SolverConfig::default() };
    assert!(matches!(run_incompressible(&rho, &u, &c), Err(Error::DomainKind(_))));
    let t = torus(32);
    let bad = SolverConfig { n: 32, pressure_tol: 1e-6, ..SolverConfig::default() };
    assert!(run_incompressible(&unit(&t), &taylor_green(&t).unwrap(), &bad).is_err());
    let c = SolverConfig { n: 32, ..SolverConfig::default() };
    assert!(run_compressible(&unit(&t), &taylor_green(&t).unwrap(), &c).is_err());
}
