mod commands;
mod config;
mod summary;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Run(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(format!("i/o: {e}"))
    }
}

impl From<fluxlab::Error> for CliError {
    fn from(e: fluxlab::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "fluxlab", version, about = "Energy-flux experiments for rough Euler flows")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Generate a rough test field.
    Gen(Common),
    /// Besov-type seminorm of a field over a lattice shift family.
    Seminorm(Common),
    /// Scaling of the mollified gradient norm.
    GradScaling(Common),
    /// Scaling of the mollified product commutator.
    Commutator(Common),
    /// Scaling of the mollified power commutator.
    PowerCommutator(Common),
    /// Randomized check of the two-sided Taylor bound.
    TaylorDefect(Common),
    /// Run a periodic Euler solver and report conservation diagnostics.
    EulerRun(Common),
    /// Mollified energy budget of a solver run across scales.
    Budget(Common),
    /// Evaluate the hypotheses of an energy-conservation criterion.
    CheckHypotheses(Common),
    /// Coarea and layer-area quadrature self-test on a bounded domain.
    CoareaSelftest(Common),
}

#[derive(Args)]
struct Common {
    /// `key = value` file applied before the overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    quiet: bool,
    /// Further `--key value` overrides.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

impl Common {
    /// Pull common flags that trail the `--key value` overrides back out.
    fn hoist(&mut self) -> Result<(), CliError> {
        let mut rest = Vec::new();
        let mut it = std::mem::take(&mut self.overrides).into_iter();
        while let Some(arg) = it.next() {
            let (flag, inline) = match arg.split_once('=') {
                Some((f, v)) => (f.to_string(), Some(v.to_string())),
                None => (arg.clone(), None),
            };
            if flag == "--quiet" && inline.is_none() {
                self.quiet = true;
                continue;
            }
            if !matches!(flag.as_str(), "--out" | "--config" | "--seed" | "--threads") {
                rest.push(arg);
                continue;
            }
            let value = inline
                .or_else(|| it.next())
                .ok_or_else(|| CliError::Usage(format!("'{flag}' has no value")))?;
            let bad = |_| CliError::Usage(format!("'{flag}': expected an integer, got '{value}'"));
            match flag.as_str() {
                "--out" => self.out = value.into(),
                "--config" => self.config = Some(value.into()),
                "--seed" => self.seed = Some(value.parse().map_err(bad)?),
                _ => self.threads = Some(value.parse().map_err(bad)?),
            }
        }
        self.overrides = rest;
        Ok(())
    }
}

impl Sub {
    fn split(self) -> (&'static str, Common) {
        match self {
            Sub::Gen(c) => ("gen", c),
            Sub::Seminorm(c) => ("seminorm", c),
            Sub::GradScaling(c) => ("grad-scaling", c),
            Sub::Commutator(c) => ("commutator", c),
            Sub::PowerCommutator(c) => ("power-commutator", c),
            Sub::TaylorDefect(c) => ("taylor-defect", c),
            Sub::EulerRun(c) => ("euler-run", c),
            Sub::Budget(c) => ("budget", c),
            Sub::CheckHypotheses(c) => ("check-hypotheses", c),
            Sub::CoareaSelftest(c) => ("coarea-selftest", c),
        }
    }
}

fn writable(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", dir.display())))?;
    let probe = dir.join(".write-test");
    std::fs::write(&probe, b"")
        .and_then(|_| std::fs::remove_file(&probe))
        .map_err(|e| CliError::Usage(format!("output directory {} is not writable: {e}", dir.display())))
}

fn run(sub: Sub) -> Result<Option<bool>, CliError> {
    let (name, mut common) = sub.split();
    common.hoist()?;
    let cmd = commands::find(name).expect("every subcommand is registered");
    let mut cfg = Config::new(cmd.name, &commands::defaults(cmd));
    if let Some(path) = &common.config {
        cfg.merge_file(path)?;
    }
    if let Some(seed) = common.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(t) = common.threads {
        cfg.set("threads", &t.to_string())?;
    }
    cfg.merge_overrides(&common.overrides)?;
    let threads = cfg.usize("threads")?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    writable(&common.out)?;
    let output = (cmd.run)(&cfg, &common.out, common.quiet)?;
    summary::write(&common.out, cmd.name, &cfg, &output)?;
    if !common.quiet {
        let verdict = match output.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "done",
        };
        println!("{name}: {verdict} ({})", common.out.join("summary.json").display());
    }
    Ok(output.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(Some(false)) => ExitCode::from(2),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fluxlab: {e}");
            ExitCode::from(1)
        }
    }
}
