use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bathsync::doublewell::{default_spectrum, model_from_spectrum};
use bathsync::scenarios::{
    ladder_coupling, run_scenario, sweep, well_reference_coupling, write_dipoles_csv, write_rates_csv,
    write_spectrum_csv, write_sweep_csv, CouplingLadder, Scenario, ScenarioConfig,
};
use bathsync::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bathsync", version, about = "Flavor system in a thermal bath: double-well presets and sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bound-state doublets of the default double well.
    Spectrum(TableArgs),
    /// Infinite-well dipole elements between single-well levels.
    Dipoles(TableArgs),
    /// Thermal rate matrix of the default well.
    Rates(RatesArgs),
    /// Run one scenario and write its trajectories and summary.json.
    Run(RunArgs),
    /// Run a grid of scenarios and write one summary row per run.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct TableArgs {
    /// Output CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RatesArgs {
    #[arg(long = "coupling-log10", default_value_t = 0.0, allow_negative_numbers = true)]
    coupling_log10: f64,
    #[arg(long, default_value_t = 5.0)]
    temperature: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScenarioFlags {
    /// Scenario JSON; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// One value or a comma-separated list.
    #[arg(long = "coupling-log10", value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    coupling_log10: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// ModelSpec JSON for the custom scenario.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include every density-matrix entry in trajectory CSVs.
    #[arg(long)]
    full: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    flags: ScenarioFlags,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    flags: ScenarioFlags,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn read_json(path: &Path) -> Result<serde_json::Value, Error> {
    let text = fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("{} is not valid JSON: {e}", path.display())))
}

fn parse_config(value: serde_json::Value) -> Result<ScenarioConfig, Error> {
    serde_json::from_value(value).map_err(|e| config_error(format!("bad scenario config: {e}")))
}

impl ScenarioFlags {
    fn apply(&self, mut cfg: ScenarioConfig) -> Result<ScenarioConfig, Error> {
        if let Some(s) = &self.scenario {
            cfg.scenario = s.parse()?;
        }
        match self.coupling_log10.as_slice() {
            [] => {}
            [x] => cfg.coupling_log10 = Some(CouplingLadder::Single(*x)),
            xs => cfg.coupling_log10 = Some(CouplingLadder::List(xs.to_vec())),
        }
        if let Some(b) = self.b {
            cfg.b = b;
        }
        if let Some(t) = self.temperature {
            cfg.temperature = t;
        }
        if let Some(t) = self.t_end {
            cfg.t_end = Some(t);
        }
        if let Some(n) = self.samples {
            cfg.samples = n;
        }
        if let Some(m) = &self.model {
            cfg.model_path = Some(m.clone());
        }
        if let Some(o) = &self.out {
            cfg.output_path = o.clone();
        }
        cfg.full |= self.full;
        Ok(cfg)
    }

    fn template(&self) -> Result<ScenarioConfig, Error> {
        let s = self.scenario.as_deref().ok_or_else(|| config_error("--scenario or --config is required"))?;
        Ok(ScenarioConfig::new(s.parse()?))
    }

    fn single(&self) -> Result<ScenarioConfig, Error> {
        let base = match &self.config {
            Some(path) => parse_config(read_json(path)?)?,
            None => self.template()?,
        };
        self.apply(base)
    }

    /// A JSON array is taken as the grid; a single config with several ladder
    /// values expands into one config per value.
    fn grid(&self) -> Result<Vec<ScenarioConfig>, Error> {
        let configs = match &self.config {
            Some(path) => match read_json(path)? {
                serde_json::Value::Array(items) => {
                    items.into_iter().map(|v| parse_config(v).and_then(|c| self.apply(c))).collect::<Result<_, _>>()?
                }
                other => vec![self.apply(parse_config(other)?)?],
            },
            None => vec![self.apply(self.template()?)?],
        };
        let mut grid = Vec::new();
        for cfg in configs {
            match (&cfg.coupling_log10, cfg.scenario) {
                (Some(CouplingLadder::List(xs)), sc) if sc != Scenario::Custom => {
                    grid.extend(xs.iter().map(|&x| ScenarioConfig {
                        coupling_log10: Some(CouplingLadder::Single(x)),
                        ..cfg.clone()
                    }));
                }
                _ => grid.push(cfg),
            }
        }
        Ok(grid)
    }
}

fn with_output(out: &Option<PathBuf>, f: impl FnOnce(&mut dyn Write) -> Result<(), Error>) -> Result<(), Error> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(fs::File::create(path)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Spectrum(a) => with_output(&a.out, |w| write_spectrum_csv(&mut &mut *w, default_spectrum())),
        Command::Dipoles(a) => with_output(&a.out, |w| write_dipoles_csv(&mut &mut *w, &default_spectrum().dipoles)),
        Command::Rates(a) => {
            let q = ladder_coupling(well_reference_coupling(a.temperature)?, a.coupling_log10);
            let spec = model_from_spectrum(default_spectrum(), q, a.temperature, 0.0)?;
            with_output(&a.out, |w| write_rates_csv(&mut &mut *w, &spec.gamma, &spec.levels))
        }
        Command::Run(a) => {
            let cfg = a.flags.single()?;
            let summary = run_scenario(&cfg)?;
            for r in &summary.runs {
                eprintln!("{}: final P_left {:.6}, entropy rate {:.3e}", r.label, r.final_p_left, r.entropy_rate);
            }
            println!("{}", cfg.output_path.join("summary.json").display());
            Ok(())
        }
        Command::Sweep(a) => {
            let grid = a.flags.grid()?;
            let rows = sweep(&grid, a.workers)?;
            let dir = a.flags.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            fs::create_dir_all(&dir)?;
            let path = dir.join("sweep.csv");
            let mut w = BufWriter::new(fs::File::create(&path)?);
            write_sweep_csv(&mut w, &rows)?;
            w.flush()?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            if failed > 0 {
                eprintln!("{failed} of {} rows failed; see the error column", rows.len());
            }
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
