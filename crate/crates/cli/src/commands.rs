use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::sync::Arc;

use serde_json::json;

use fluxlab::besov::{seminorm, ShiftSet};
use fluxlab::commutator::{
    dyadic_epsilons, grad_scaling, power_commutator_scaling, product_commutator, taylor_defect_check, taylor_ratios,
    Bound, ScalingFit,
};
use fluxlab::domain::{coarea_check, interior_mask, layer_integral, normal_values, Domain, Grid, LayerSpec};
use fluxlab::euler::{budget_scaling, run_compressible, run_incompressible, taylor_green, SolverConfig, Trajectory};
use fluxlab::field::{lp_norm, read_field, write_csv, write_field, Field, TimeSeriesField};
use fluxlab::hypothesis::{
    alpha_for_gamma, check_bounded_incompressible, check_compressible, check_torus_incompressible, Frames, Probes,
    TheoremId, Verdict,
};
use fluxlab::mollify::KernelProfile;
use fluxlab::roughfield::{bounded_density, lacunary_scalar, lacunary_velocity, white_noise, RoughSpec};
use fluxlab::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::summary::Output;
use crate::CliError;

pub struct Command {
    pub name: &'static str,
    pub defaults: &'static [(&'static str, &'static str)],
    pub run: fn(&Config, &Path, bool) -> Result<Output, CliError>,
}

const FLOW_KEYS: &[(&str, &str)] = &[
    ("n", "64"),
    ("t_final", "0.5"),
    ("dt", "auto"),
    ("dealias", "true"),
    ("nu", "0"),
    ("gamma", "1.4"),
    ("pressure_tol", "1e-10"),
    ("cfl", "0.5"),
    ("sample_every", "10"),
    ("density", "constant"),
    ("density_amplitude", "0.3"),
    ("velocity", "taylor_green"),
    ("velocity_amplitude", "1"),
    ("alpha", "1/3"),
    ("octaves", "4"),
];

macro_rules! keys {
    ($($k:literal => $v:literal),* $(,)?) => {
        &[("seed", "0"), ("threads", "0"), $(($k, $v)),*]
    };
}

pub const COMMANDS: &[Command] = &[
    Command {
        name: "gen",
        defaults: keys! {
            "domain" => "torus2", "n" => "128", "field" => "lacunary_scalar", "alpha" => "1/3",
            "octaves" => "5", "amplitude" => "1", "lo" => "0.5", "hi" => "2", "csv" => "false",
        },
        run: gen,
    },
    Command {
        name: "seminorm",
        defaults: keys! {
            "domain" => "torus2", "n" => "64", "source" => "lacunary", "input" => "", "value" => "1",
            "alpha" => "1/3", "octaves" => "4", "amplitude" => "1", "beta" => "1/3", "p" => "3",
            "delta" => "0.25", "shifts" => "dyadic", "levels" => "4", "directions" => "8",
        },
        run: seminorm_cmd,
    },
    Command {
        name: "grad-scaling",
        defaults: keys! {
            "domain" => "torus1", "n" => "2048", "source" => "lacunary", "alpha" => "1/3", "octaves" => "9",
            "amplitude" => "1", "p" => "inf", "eps_from" => "3", "eps_to" => "7", "kernel" => "bump",
            "theory" => "auto", "tolerance" => "0.15",
        },
        run: grad_scaling_cmd,
    },
    Command {
        name: "commutator",
        defaults: keys! {
            "domain" => "torus1", "n" => "2048", "beta1" => "2/3", "beta2" => "1/3", "p1" => "inf",
            "p2" => "3", "p" => "3/2", "octaves" => "9", "eps_from" => "3", "eps_to" => "7",
            "kernel" => "bump", "tolerance" => "0.15",
        },
        run: commutator_cmd,
    },
    Command {
        name: "power-commutator",
        defaults: keys! {
            "domain" => "torus1", "n" => "2048", "gamma" => "1.4", "alpha" => "auto", "density" => "lacunary",
            "value" => "1.3", "lo" => "0.5", "hi" => "2", "octaves" => "9", "eps_from" => "3", "eps_to" => "7",
            "kernel" => "bump", "theory" => "2/3", "tolerance" => "0.15",
        },
        run: power_commutator_cmd,
    },
    Command {
        name: "taylor-defect",
        defaults: keys! { "gamma" => "1.5", "samples" => "1000000", "a_lo" => "0.5", "a_hi" => "2" },
        run: taylor_cmd,
    },
    Command {
        name: "euler-run",
        defaults: keys! {
            "system" => "incompressible", "energy_tol" => "1e-6", "write_frames" => "false",
        },
        run: euler_run_cmd,
    },
    Command {
        name: "budget",
        defaults: keys! {
            "system" => "incompressible", "eps_from" => "3", "eps_to" => "5", "kernel" => "bump",
        },
        run: budget_cmd,
    },
    Command {
        name: "check-hypotheses",
        defaults: keys! {
            "theorem" => "torus_incompressible", "boundary_velocity" => "tangential",
            "delta0" => "0.25", "probe_count" => "3", "layer0" => "0.2", "layer_count" => "4",
        },
        run: hypotheses_cmd,
    },
    Command {
        name: "coarea-selftest",
        defaults: keys! {
            "domain" => "disk", "n" => "256", "r1" => "0.05", "r2" => "0.3", "tol" => "0.02",
            "area_tol" => "0.01", "layers" => "0.05,0.1,0.2",
        },
        run: coarea_cmd,
    },
];

pub fn find(name: &str) -> Option<&'static Command> {
    COMMANDS.iter().find(|c| c.name == name)
}

/// Full default list of a command, including the flow keys where used.
pub fn defaults(cmd: &Command) -> Vec<(&'static str, &'static str)> {
    let mut d = cmd.defaults.to_vec();
    if matches!(cmd.name, "euler-run" | "budget" | "check-hypotheses") {
        d.extend_from_slice(FLOW_KEYS);
    }
    if cmd.name == "check-hypotheses" {
        for (k, v) in d.iter_mut() {
            if *k == "n" {
                *v = "128";
            }
        }
    }
    d
}

fn grid(cfg: &Config, domain_key: &str) -> Result<Grid, CliError> {
    let domain = Domain::from_id(cfg.str(domain_key), &[])?;
    Ok(Grid::square(Arc::new(domain), cfg.usize("n")?)?)
}

fn rough(cfg: &Config, alpha: f64, seed: u64) -> Result<RoughSpec, CliError> {
    let amplitude = if cfg.entries().contains_key("amplitude") { cfg.f64("amplitude")? } else { 1.0 };
    Ok(RoughSpec::new(alpha, cfg.usize("octaves")? as u32, seed, amplitude)?)
}

fn epsilons(cfg: &Config) -> Result<Vec<f64>, CliError> {
    let (a, b) = (cfg.i32("eps_from")?, cfg.i32("eps_to")?);
    if b <= a {
        return Err(CliError::Usage("key 'eps_to': must exceed eps_from".into()));
    }
    Ok(dyadic_epsilons(1.0, a, b))
}

fn kernel(cfg: &Config) -> Result<KernelProfile, CliError> {
    Ok(KernelProfile::parse(cfg.str("kernel"))?)
}

fn fit_result(fit: &ScalingFit, theory: f64, tol: f64, bound: Bound) -> serde_json::Value {
    json!({ "fit": fit, "summary": fit.summary(theory, tol, bound) })
}

fn extrema(f: &Field) -> (f64, f64) {
    f.data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

fn gen(cfg: &Config, out: &Path, _quiet: bool) -> Result<Output, CliError> {
    let g = grid(cfg, "domain")?;
    let seed = cfg.u64("seed")?;
    let alpha = cfg.f64("alpha")?;
    let kind = cfg.choice("field", &["lacunary_scalar", "lacunary_velocity", "white_noise", "bounded_density"])?;
    let field = match kind {
        "lacunary_scalar" => lacunary_scalar(&g, &rough(cfg, alpha, seed)?)?,
        "lacunary_velocity" => lacunary_velocity(&g, &rough(cfg, alpha, seed)?)?,
        "white_noise" => white_noise(&g, seed, cfg.f64("amplitude")?)?,
        _ => bounded_density(&lacunary_scalar(&g, &rough(cfg, alpha, seed)?)?, cfg.f64("lo")?, cfg.f64("hi")?)?,
    };
    write_field(&field, &out.join("field"), None)?;
    let (min, max) = extrema(&field);
    let mut output = Output::new(
        None,
        json!({
            "field": kind,
            "shape": g.shape(),
            "components": field.components(),
            "min": min,
            "max": max,
            "l2": lp_norm(&field, 2.0, None)?,
        }),
    )?
    .artifact("field.bin")
    .artifact("field.json");
    if cfg.bool("csv")? {
        write_csv(&field, &out.join("field.csv"))?;
        output = output.artifact("field.csv");
    }
    Ok(output)
}

fn seminorm_cmd(cfg: &Config, out: &Path, _quiet: bool) -> Result<Output, CliError> {
    let mut inputs = Vec::new();
    let field = match cfg.choice("source", &["constant", "lacunary", "white_noise", "file"])? {
        "file" => {
            let base = Path::new(cfg.str("input"));
            if cfg.str("input").is_empty() {
                return Err(CliError::Usage("key 'input': source=file needs a field path".into()));
            }
            for ext in ["bin", "json"] {
                let p = base.with_extension(ext);
                let bytes = std::fs::read(&p)
                    .map_err(|e| CliError::Usage(format!("key 'input': cannot read {}: {e}", p.display())))?;
                inputs.push((p.display().to_string(), bytes));
            }
            read_field(base)?.0
        }
        "constant" => Field::constant(grid(cfg, "domain")?, 1, cfg.f64("value")?)?,
        "white_noise" => white_noise(&grid(cfg, "domain")?, cfg.u64("seed")?, cfg.f64("amplitude")?)?,
        _ => lacunary_scalar(&grid(cfg, "domain")?, &rough(cfg, cfg.f64("alpha")?, cfg.u64("seed")?)?)?,
    };
    let g = field.grid().clone();
    let delta = cfg.f64("delta")?;
    let shifts = match cfg.choice("shifts", &["dyadic", "full"])? {
        "full" => ShiftSet::full_commensurate(&g, delta)?,
        _ => ShiftSet::dyadic(&g, delta, cfg.usize("levels")?, cfg.usize("directions")?)?,
    };
    let region = if g.is_periodic() { None } else { Some(interior_mask(&g, 2.0 * delta)?) };
    let report = seminorm(&field, cfg.f64("beta")?, cfg.f64("p")?, &shifts, region.as_ref())?;
    report.write_csv(&out.join("shifts.csv"))?;
    let mut output = Output::new(
        None,
        json!({
            "value": report.value,
            "argmax_shift": report.argmax_shift,
            "beta": report.beta,
            "p": cfg.str("p"),
            "delta": report.delta,
            "lower_bound": report.lower_bound,
            "lipschitz_probe": report.lipschitz_probe,
            "shift_count": shifts.len(),
        }),
    )?
    .artifact("shifts.csv");
    output.inputs = inputs;
    Ok(output)
}

fn grad_scaling_cmd(cfg: &Config, out: &Path, _quiet: bool) -> Result<Output, CliError> {
    let g = grid(cfg, "domain")?;
    let source = cfg.choice("source", &["lacunary", "white_noise"])?;
    let alpha = cfg.f64("alpha")?;
    let field = match source {
        "white_noise" => white_noise(&g, cfg.u64("seed")?, cfg.f64("amplitude")?)?,
        _ => lacunary_scalar(&g, &rough(cfg, alpha, cfg.u64("seed")?)?)?,
    };
    let fit = grad_scaling(&field, cfg.f64("p")?, &epsilons(cfg)?, kernel(cfg)?)?;
    fit.write_csv(&out.join("fit.csv"))?;
    let (theory, bound) = match (cfg.opt_f64("theory")?, source) {
        (Some(t), "white_noise") => (t, Bound::AtMost),
        (Some(t), _) => (t, Bound::AtLeast),
        (None, "white_noise") => (-1.0, Bound::AtMost),
        (None, _) => (alpha - 1.0, Bound::AtLeast),
    };
    let res = fit_result(&fit, theory, cfg.f64("tolerance")?, bound);
    let pass = res["summary"]["pass"].as_bool();
    Ok(Output::new(pass, res)?.artifact("fit.csv"))
}

fn commutator_cmd(cfg: &Config, out: &Path, _quiet: bool) -> Result<Output, CliError> {
    let g = grid(cfg, "domain")?;
    let seed = cfg.u64("seed")?;
    let (b1, b2) = (cfg.f64("beta1")?, cfg.f64("beta2")?);
    let g1 = lacunary_scalar(&g, &RoughSpec::new(b1, cfg.usize("octaves")? as u32, seed, 1.0)?)?;
    let g2 = lacunary_scalar(&g, &RoughSpec::new(b2, cfg.usize("octaves")? as u32, seed.wrapping_add(1), 1.0)?)?;
    let fit = product_commutator(
        &g1,
        &g2,
        cfg.f64("p")?,
        cfg.f64("p1")?,
        cfg.f64("p2")?,
        &epsilons(cfg)?,
        kernel(cfg)?,
    )?;
    fit.write_csv(&out.join("fit.csv"))?;
    let res = fit_result(&fit, b1 + b2, cfg.f64("tolerance")?, Bound::AtLeast);
    let pass = res["summary"]["pass"].as_bool();
    Ok(Output::new(pass, res)?.artifact("fit.csv"))
}

fn power_commutator_cmd(cfg: &Config, out: &Path, _quiet: bool) -> Result<Output, CliError> {
    let g = grid(cfg, "domain")?;
    let gamma = cfg.f64("gamma")?;
    if !(gamma > 1.0) {
        return Err(CliError::Usage(format!("key 'gamma': must exceed 1, got {gamma}")));
    }
    let alpha = cfg.opt_f64("alpha")?.unwrap_or_else(|| alpha_for_gamma(gamma));
    let rho = match cfg.choice("density", &["lacunary", "constant"])? {
        "constant" => Field::constant(g.clone(), 1, cfg.f64("value")?)?.into_positive()?,
        _ => bounded_density(
            &lacunary_scalar(&g, &rough(cfg, alpha, cfg.u64("seed")?)?)?,
            cfg.f64("lo")?,
            cfg.f64("hi")?,
        )?,
    };
    let fit = power_commutator_scaling(&rho, gamma, &epsilons(cfg)?, kernel(cfg)?)?;
    fit.write_csv(&out.join("fit.csv"))?;
    let mut res = fit_result(&fit, cfg.f64("theory")?, cfg.f64("tolerance")?, Bound::AtLeast);
    res["alpha"] = json!(alpha);
    let pass = res["summary"]["pass"].as_bool();
    Ok(Output::new(pass, res)?.artifact("fit.csv"))
}

fn taylor_cmd(cfg: &Config, _out: &Path, _quiet: bool) -> Result<Output, CliError> {
    let gamma = cfg.f64("gamma")?;
    let (lo, hi) = (cfg.f64("a_lo")?, cfg.f64("a_hi")?);
    if !(lo > 0.0 && hi >= lo) {
        return Err(CliError::Usage("keys 'a_lo', 'a_hi': need 0 < a_lo <= a_hi".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.u64("seed")?);
    let n = cfg.usize("samples")?;
    let a: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    let b: Vec<f64> = a.iter().map(|&a| a * rng.gen_range(-0.9..2.0)).collect();
    let report = taylor_defect_check(&a, &b, gamma)?;
    let mut pass = report.violations == 0 && report.max_ratio.is_finite();
    let mut res = json!({ "report": report });
    if gamma == 2.0 {
        let exact = taylor_ratios(&a, &b, gamma)
            .iter()
            .zip(&b)
            .all(|(r, b)| *b == 0.0 || *r == 0.5);
        res["ratio_exactly_half"] = json!(exact);
        pass &= exact;
    }
    Output::new(Some(pass), res)
}

fn solver_config(cfg: &Config, compressible: bool) -> Result<SolverConfig, CliError> {
    let c = SolverConfig {
        n: cfg.usize("n")?,
        dt: cfg.opt_f64("dt")?,
        t_final: cfg.f64("t_final")?,
        dealias: cfg.bool("dealias")?,
        nu: cfg.f64("nu")?,
        gamma: if compressible { Some(cfg.f64("gamma")?) } else { None },
        pressure_tol: cfg.f64("pressure_tol")?,
        sample_every: cfg.usize("sample_every")?,
        cfl: cfg.f64("cfl")?,
    };
    c.validate()?;
    Ok(c)
}

fn initial_state(cfg: &Config, g: &Grid) -> Result<(Field, Field), CliError> {
    let a = cfg.f64("density_amplitude")?;
    let rho = match cfg.choice("density", &["constant", "stratified", "pulse", "acoustic"])? {
        "stratified" => Field::from_fn(g.clone(), |x| 1.0 + a * (TAU * x[1]).cos())?,
        "pulse" => Field::from_fn(g.clone(), |x| {
            let (s, t) = ((PI * (x[0] - 0.5)).sin(), (PI * (x[1] - 0.5)).sin());
            1.0 + a * (-(s * s + t * t) / 0.01).exp()
        })?,
        "acoustic" => Field::from_fn(g.clone(), |x| 1.0 + a * (TAU * x[0]).cos())?,
        _ => Field::constant(g.clone(), 1, 1.0)?,
    };
    let v = cfg.f64("velocity_amplitude")?;
    let u = match cfg.choice("velocity", &["taylor_green", "shear", "rest", "lacunary"])? {
        "taylor_green" => taylor_green(g)?.scale(v)?,
        "shear" => Field::vector_from_fn(g.clone(), 2, |x| vec![v * (TAU * x[1]).sin(), 0.0])?,
        "lacunary" => lacunary_velocity(g, &rough(cfg, cfg.f64("alpha")?, cfg.u64("seed")?)?)?.scale(v)?,
        _ => Field::constant(g.clone(), 2, 0.0)?,
    };
    Ok((rho.into_positive()?, u))
}

fn flow(cfg: &Config, compressible: bool) -> Result<Trajectory, CliError> {
    let config = solver_config(cfg, compressible)?;
    let g = Grid::square(Arc::new(Domain::unit_torus(2)?), config.n)?;
    let (rho, u) = initial_state(cfg, &g)?;
    Ok(if compressible {
        run_compressible(&rho, &u, &config)?
    } else {
        run_incompressible(&rho, &u, &config)?
    })
}

fn is_compressible(cfg: &Config) -> Result<bool, CliError> {
    Ok(cfg.choice("system", &["incompressible", "compressible"])? == "compressible")
}

fn euler_run_cmd(cfg: &Config, out: &Path, _quiet: bool) -> Result<Output, CliError> {
    let compressible = is_compressible(cfg)?;
    let traj = flow(cfg, compressible)?;
    let d = &traj.diagnostics;
    let mut csv = String::from("t,E,mass\n");
    for i in 0..d.step_times.len() {
        csv.push_str(&format!("{:e},{:e},{:e}\n", d.step_times[i], d.step_energy[i], d.step_mass[i]));
    }
    std::fs::write(out.join("energy.csv"), csv)?;
    let mut output_files = vec!["energy.csv".to_string()];
    if cfg.bool("write_frames")? {
        std::fs::create_dir_all(out.join("frames"))?;
        for (k, t) in traj.rho.times().iter().enumerate() {
            for (name, series) in [("rho", &traj.rho), ("u", &traj.u)] {
                let base = format!("frames/{name}_{k:04}");
                write_field(&series.frames()[k], &out.join(&base), Some(*t))?;
                output_files.push(format!("{base}.bin"));
                output_files.push(format!("{base}.json"));
            }
        }
    }
    let tol = cfg.f64("energy_tol")?;
    let pass = d.max_relative_energy_drift <= tol
        && d.max_mass_drift <= 1e-10
        && (compressible || d.max_divergence <= 1e-7)
        && d.truncated.is_none();
    let result = json!({
        "system": cfg.str("system"),
        "steps": d.steps,
        "final_time": d.final_time,
        "frames": traj.rho.len(),
        "initial_energy": d.step_energy.first(),
        "final_energy": d.step_energy.last(),
        "max_relative_energy_drift": d.max_relative_energy_drift,
        "energy_conserved_until": d.energy_conserved_until(tol),
        "max_mass_drift": d.max_mass_drift,
        "max_divergence": d.max_divergence,
        "density_undershoot": d.density_undershoot,
        "density_overshoot": d.density_overshoot,
        "nu": d.nu,
        "truncated": d.truncated,
    });
    let mut o = Output::new(Some(pass), result)?;
    o.artifacts = output_files;
    Ok(o)
}

fn budget_cmd(cfg: &Config, out: &Path, _quiet: bool) -> Result<Output, CliError> {
    let compressible = is_compressible(cfg)?;
    let traj = flow(cfg, compressible)?;
    let eps = epsilons(cfg)?;
    let gamma = compressible.then(|| cfg.f64("gamma")).transpose()?;
    let scaling = match budget_scaling(&traj, kernel(cfg)?, &eps, gamma) {
        Err(e @ Error::Cancellation { .. }) => {
            return Output::new(Some(false), json!({ "error": e.to_string() }));
        }
        other => other?,
    };
    let mut output = Output::new(None, json!({}))?;
    for (k, b) in scaling.budgets.iter().enumerate() {
        let name = format!("budget_eps{k}.csv");
        b.write_csv(&out.join(&name))?;
        output = output.artifact(name);
    }
    let residual = scaling
        .budgets
        .iter()
        .filter_map(|b| b.cancellation_residual())
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    let integrated = |pick: fn(&fluxlab::euler::EnergyBudget) -> Option<&Vec<f64>>| -> Vec<Option<f64>> {
        scaling.budgets.iter().map(|b| pick(b).map(|s| b.integrated(s))).collect()
    };
    output.result = json!({
        "system": cfg.str("system"),
        "epsilons": eps,
        "frames": traj.rho.len(),
        "nu": traj.diagnostics.nu,
        "cancellation_residual": residual,
        "integrated": {
            "A2": integrated(|b| b.defect_a2.as_ref()),
            "B1": integrated(|b| b.defect_b1.as_ref()),
            "C": integrated(|b| b.defect_c.as_ref()),
            "G2": integrated(|b| b.defect_g2.as_ref()),
        },
        "fits": { "A2": scaling.a2, "B1": scaling.b1, "C": scaling.c, "G2": scaling.g2 },
    });
    output.pass = residual.map(|r| r <= 1e-8);
    Ok(output)
}

fn two_frames(f: Field, t: f64) -> Result<TimeSeriesField, CliError> {
    Ok(TimeSeriesField::new(vec![0.0, t], vec![f.clone(), f])?)
}

/// Synthetic steady frames on a bounded domain: unit tangential flow, plus a
/// normal part `d^(1/3)` (`layer`) or a uniform crossflow (`crossflow`).
fn bounded_frames(cfg: &Config) -> Result<(TimeSeriesField, TimeSeriesField, TimeSeriesField), CliError> {
    let g = Grid::square(Arc::new(Domain::unit_disk()), cfg.usize("n")?)?;
    let t = cfg.f64("t_final")?;
    let kind = cfg.choice("boundary_velocity", &["tangential", "layer", "crossflow"])?;
    let normals = normal_values(&g)?;
    let phi = g.phi_values();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, n) in normals.iter().enumerate() {
        let (x, y) = match kind {
            "crossflow" => (1.0, 0.5),
            "layer" => {
                let s = (-phi[i]).max(0.0).cbrt();
                (-n[1] + s * n[0], n[0] + s * n[1])
            }
            _ => (-n[1], n[0]),
        };
        a.push(x);
        b.push(y);
    }
    let u = Field::new(g.clone(), 2, [a, b].concat())?;
    let amp = cfg.f64("density_amplitude")?;
    let rho = Field::from_fn(g.clone(), |x| 1.0 + amp * 0.5 * (x[0] * x[0] + x[1] * x[1]))?;
    let p = Field::from_fn(g.clone(), |x| x[0] * x[1])?;
    Ok((two_frames(rho, t)?, two_frames(u, t)?, two_frames(p, t)?))
}

fn hypotheses_cmd(cfg: &Config, out: &Path, quiet: bool) -> Result<Output, CliError> {
    let theorem = TheoremId::parse(cfg.str("theorem")).map_err(|_| {
        CliError::Usage(format!(
            "key 'theorem': expected one of {}",
            TheoremId::ALL.map(|t| t.as_str()).join("|")
        ))
    })?;
    let probes = Probes::dyadic(
        cfg.f64("delta0")?,
        cfg.usize("probe_count")?,
        cfg.f64("layer0")?,
        cfg.usize("layer_count")?,
    );
    let gamma = cfg.f64("gamma")?;
    let report = if theorem.is_bounded() {
        let (rho, u, p) = bounded_frames(cfg)?;
        let frames = Frames { rho: &rho, u: &u, pressure: Some(&p) };
        if theorem.is_compressible() {
            check_compressible(frames, gamma, &probes, true)?
        } else {
            check_bounded_incompressible(frames, &probes)?
        }
    } else {
        let traj = flow(cfg, theorem.is_compressible())?;
        if theorem.is_compressible() {
            check_compressible(Frames::from(&traj), gamma, &probes, false)?
        } else {
            check_torus_incompressible(Frames::from(&traj), &probes)?
        }
    };
    if !quiet {
        print!("{}", report.table());
    }
    std::fs::write(out.join("hypotheses.json"), report.to_json()? + "\n")?;
    let pass = report.conditions.iter().all(|c| c.verdict != Verdict::Violated);
    Ok(Output::new(Some(pass), &report)?.artifact("hypotheses.json"))
}

/// Area of `{phi < -r}` for the built-in bounded domains.
fn inner_area(domain: &Domain, r: f64) -> Result<f64, CliError> {
    match domain.id() {
        "disk" => Ok(PI * (1.0 - r).powi(2)),
        "rounded_square" => {
            let (s, f) = (1.0 - r, 0.4 - r);
            Ok(4.0 * s * s - (4.0 - PI) * f * f)
        }
        other => Err(CliError::Usage(format!("key 'domain': no closed-form area for '{other}'"))),
    }
}

fn coarea_cmd(cfg: &Config, _out: &Path, _quiet: bool) -> Result<Output, CliError> {
    let g = grid(cfg, "domain")?;
    if g.is_periodic() {
        return Err(CliError::Usage("key 'domain': the coarea self-test needs a bounded domain".into()));
    }
    let (r1, r2, tol) = (cfg.f64("r1")?, cfg.f64("r2")?, cfg.f64("tol")?);
    let integrands: [(&str, fn(&[f64]) -> f64); 3] = [
        ("one", |_| 1.0),
        ("radius_squared", |x| x[0] * x[0] + x[1] * x[1]),
        ("exp_x_cos_3y", |x| x[0].exp() * (3.0 * x[1]).cos()),
    ];
    let mut pass = true;
    let mut rows = Vec::new();
    for (name, f) in integrands {
        let (area, shells) = coarea_check(&Field::from_fn(g.clone(), f)?, r1, r2, None)?;
        let rel = (area - shells).abs() / area.abs().max(f64::MIN_POSITIVE);
        pass &= rel <= tol;
        rows.push(json!({ "integrand": name, "area_quadrature": area, "shell_quadrature": shells, "relative_gap": rel }));
    }
    let one = Field::constant(g.clone(), 1, 1.0)?;
    let area_tol = cfg.f64("area_tol")?;
    let mut layers = Vec::new();
    for eps in cfg.list_f64("layers")? {
        let measure = layer_integral(&one, LayerSpec::new(g.domain(), eps)?, 1.0)?.measure;
        let exact = inner_area(g.domain(), 0.0)? - inner_area(g.domain(), eps)?;
        let rel = (measure - exact).abs() / exact;
        pass &= rel <= area_tol;
        layers.push(json!({ "epsilon": eps, "measure": measure, "exact": exact, "relative_gap": rel }));
    }
    Output::new(Some(pass), json!({ "coarea": rows, "layer_area": layers }))
}
