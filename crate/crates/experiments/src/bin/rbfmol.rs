use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rbfmol_experiments::config::{preset, Grid, Mode, ScenarioConfig, SCENARIOS};
use rbfmol_experiments::run::{run_scenario, sample_clouds, write_points};
use rbfmol_experiments::{emit_plots, run_table, ExpError, ExpResult, Outcome};

#[derive(Parser)]
#[command(
    version,
    about = "Surface diffusion experiments with RBF least-squares method of lines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the centers and collocation points only.
    Points(Opts),
    /// Spectra of the ODE matrices.
    Spectrum(Opts),
    /// Time integration with error curves.
    Solve(Opts),
    /// Run a grid scenario and write its table.
    Table(Opts),
    /// Re-render SVG figures from existing outputs.
    Plot(Opts),
    /// Run a scenario, or every registered scenario, in its preset mode.
    All(Opts),
}

#[derive(Args, Clone, Debug, Default)]
struct Opts {
    /// Built-in scenario name.
    #[arg(long)]
    scenario: Option<String>,
    /// TOML configuration; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    nz: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    spectrum_only: bool,
    #[arg(long)]
    fixed_dt: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
}

impl Opts {
    fn base(&self) -> ExpResult<ScenarioConfig> {
        match (&self.config, &self.scenario) {
            (Some(path), _) => ScenarioConfig::load(path),
            (None, Some(name)) => preset(name),
            (None, None) => Err(ExpError::Config(format!(
                "pass --scenario ({}) or --config",
                SCENARIOS.join(", ")
            ))),
        }
    }

    fn apply(&self, mut cfg: ScenarioConfig) -> ExpResult<ScenarioConfig> {
        if let (Some(_), Some(name)) = (&self.config, &self.scenario) {
            cfg.scenario = name.clone();
        }
        if let Some(m) = self.m {
            cfg.m = m;
        }
        if let Some(n) = self.nz {
            cfg.n_z = n;
        }
        if let Some(n) = self.nx {
            cfg.n_x = Some(n);
        }
        if let Some(r) = self.ratio {
            cfg.ratio = Some(r);
            if self.nx.is_none() {
                cfg.n_x = None;
            }
        }
        if let Some(grid) = cfg.grid.as_mut() {
            override_grid(grid, self);
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(v) = self.rtol {
            cfg.rtol = v;
        }
        if let Some(v) = self.atol {
            cfg.atol = v;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if self.fixed_dt.is_some() {
            cfg.fixed_dt = self.fixed_dt;
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if self.spectrum_only {
            cfg.mode = Mode::SpectrumOnly;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&self) -> ExpResult<ScenarioConfig> {
        self.apply(self.base()?)
    }
}

fn override_grid(grid: &mut Grid, o: &Opts) {
    if let Some(m) = o.m {
        grid.m = vec![m];
    }
    if let Some(n) = o.nz {
        grid.n_z = vec![n];
    }
    match (o.nx, o.ratio) {
        (Some(n), _) => grid.n_x = vec![n],
        (None, Some(r)) => grid.n_x = grid.n_z.iter().map(|&n| (r * n as f64).round() as usize).collect(),
        (None, None) => {}
    }
}

fn run(cfg: &ScenarioConfig) -> ExpResult<Outcome> {
    if cfg.grid.is_some() {
        let t = run_table(cfg)?;
        let failed = t.cells.iter().filter(|c| c.failed()).count();
        println!(
            "{}: {} cells, {failed} failed, {:.1} s -> {}",
            cfg.scenario,
            t.cells.len(),
            t.wall_time_s,
            cfg.run_dir().join("table.csv").display()
        );
        return Ok(t.outcome());
    }
    let r = run_scenario(cfg)?;
    println!(
        "{}: kappa {:.2e}, final error {:.2e}, steps {}, {:.1} s -> {}",
        cfg.scenario,
        r.kappa,
        r.final_error,
        r.accepted_steps().map_or("-".into(), |s| s.to_string()),
        r.wall_time_s,
        cfg.run_dir().display()
    );
    for f in &r.failures {
        eprintln!("  failure: {f}");
    }
    Ok(if r.succeeded() {
        Outcome::Success
    } else {
        Outcome::Partial
    })
}

fn with_mode(o: &Opts, mode: Mode) -> ExpResult<ScenarioConfig> {
    let mut cfg = o.resolve()?;
    if !o.spectrum_only {
        cfg.mode = mode;
    }
    Ok(cfg)
}

fn execute(cmd: Command) -> ExpResult<Outcome> {
    match cmd {
        Command::Points(o) => {
            let cfg = o.resolve()?;
            let dir = cfg.run_dir();
            let written = write_points(&cfg, &sample_clouds(&cfg)?, &dir)?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(Outcome::Success)
        }
        Command::Spectrum(o) => run(&with_mode(&o, Mode::SpectrumOnly)?),
        Command::Solve(o) => run(&with_mode(&o, Mode::Solve)?),
        Command::Table(o) => {
            let cfg = o.resolve()?;
            if cfg.grid.is_none() {
                return Err(ExpError::Config(format!("scenario `{}` has no grid", cfg.scenario)));
            }
            run(&cfg)
        }
        Command::Plot(o) => {
            let cfg = o.resolve()?;
            let root = cfg.run_dir();
            let cells = root.join("cells");
            let mut dirs: Vec<PathBuf> = match std::fs::read_dir(&cells) {
                Ok(entries) => entries.filter_map(|e| e.ok().map(|e| e.path())).collect(),
                Err(_) => vec![root.clone()],
            };
            dirs.sort();
            for p in emit_plots(&dirs, &root)? {
                println!("{}", p.display());
            }
            Ok(Outcome::Success)
        }
        Command::All(o) => {
            let names: Vec<String> = match (&o.scenario, &o.config) {
                (None, None) => SCENARIOS.iter().map(|s| s.to_string()).collect(),
                _ => vec![String::new()],
            };
            let mut outcome = Outcome::Success;
            for name in names {
                let mut opts = o.clone();
                if !name.is_empty() {
                    opts.scenario = Some(name);
                }
                outcome = outcome.merge(run(&opts.resolve()?)?);
            }
            Ok(outcome)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(outcome) => ExitCode::from(outcome.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
