mod model_spec;
mod summary;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use charflow::dynamics::{integrate_characteristic, Parametrization};
use charflow::scenario::{
    emit_report, parse_config, run_scenario, selftest, OutputFormat, QuadratureConfig, ReportDocument,
    ScenarioConfig, Task,
};
use charflow::{CharflowError, Point};

const EXIT_CONFIG: u8 = 2;
const EXIT_TASK: u8 = 3;
const EXIT_CHECKS: u8 = 4;

#[derive(Parser)]
#[command(name = "charflow", version, about = "Characteristic flows of Hamiltonian structures on 3-manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Clone)]
struct Global {
    /// RNG seed for sampling and Monte Carlo.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Integrator tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory (a file for `flow`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output formats, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Vec<Format>,
    /// Zero all wall-clock timings in the written report.
    #[arg(long, global = true)]
    normalize_timings: bool,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Plotdata,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
            Format::Plotdata => OutputFormat::Plotdata,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    Characteristic,
    Hamiltonian,
}

impl From<Param> for Parametrization {
    fn from(p: Param) -> Self {
        match p {
            Param::Characteristic => Parametrization::CharacteristicField,
            Param::Hamiltonian => Parametrization::HamiltonianField,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Self-linking number of ω.
    Lk {
        /// Model, e.g. t3_contact, sphere, ellipsoid(1,1.618), magnetic_torus(0.05), hyperbolic_utb(1.0).
        model: String,
        /// Tensor-grid resolution per axis.
        #[arg(long, conflicts_with = "samples")]
        resolution: Option<usize>,
        /// Monte Carlo sample count.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Integrates one characteristic and writes the trajectory as CSV.
    Flow {
        model: String,
        /// Start point, comma separated chart coordinates.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        start: Vec<f64>,
        #[arg(long, default_value_t = 10.0)]
        time: f64,
        #[arg(long, value_enum, default_value = "characteristic")]
        param: Param,
    },
    /// Closed characteristics and their actions.
    Orbits {
        model: String,
        #[arg(long)]
        max_period: Option<f64>,
        #[arg(long, value_enum)]
        param: Option<Param>,
    },
    /// Empirical unique-ergodicity diagnostic.
    Ergodicity {
        model: String,
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<f64>,
        /// Number of seed points.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Searches for a contact primitive by linear programming.
    Certify {
        model: String,
        #[arg(long)]
        basis_cap: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Runs a scenario file.
    Scenario { file: PathBuf },
    /// Invariant suite over the model catalog.
    Selftest {
        /// Include the parabolic hyperbolic model.
        #[arg(long)]
        extended: bool,
    },
}

enum Failure {
    Config(String),
    Other(String),
}

impl From<CharflowError> for Failure {
    fn from(e: CharflowError) -> Self {
        match e {
            CharflowError::Config(m) | CharflowError::InvalidArgument(m) => Failure::Config(m),
            e @ CharflowError::NonPositiveEpsilon(_) => Failure::Config(e.to_string()),
            e => Failure::Other(e.to_string()),
        }
    }
}

fn init_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("CHARFLOW_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Failure::Config(format!("CHARFLOW_THREADS: expected a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(Failure::Config("CHARFLOW_THREADS: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Other(e.to_string()))?;
    }
    Ok(())
}

fn model_config(g: &Global, model: &str, tasks: &[Task]) -> Result<ScenarioConfig, Failure> {
    let model = model_spec::parse_model(model).map_err(Failure::Config)?;
    let mut cfg = ScenarioConfig::new(model, tasks.to_vec());
    apply_global(g, &mut cfg);
    Ok(cfg)
}

fn apply_global(g: &Global, cfg: &mut ScenarioConfig) {
    if let Some(s) = g.seed {
        cfg.seeds.rng = s;
    }
    if let Some(t) = g.tol {
        cfg.integrator.tol = t;
    }
    if let Some(o) = &g.out {
        cfg.output.path = o.display().to_string();
    }
    if !g.format.is_empty() {
        cfg.output.formats = g.format.iter().map(|f| (*f).into()).collect();
    }
}

fn finish(g: &Global, cfg: &ScenarioConfig, write_files: bool) -> Result<ExitCode, Failure> {
    cfg.validate().map_err(Failure::Config)?;
    let report = run_scenario(cfg)?;
    let report = if g.normalize_timings { report.normalized() } else { report };
    summary::print_report(&report);
    if write_files {
        let files = emit_report(&report, std::path::Path::new(&cfg.output.path), &cfg.output.formats)?;
        for f in files {
            eprintln!("wrote {}", f.display());
        }
    }
    Ok(exit_for(&report))
}

fn exit_for(report: &ReportDocument) -> ExitCode {
    if report.any_task_failed() {
        ExitCode::from(EXIT_TASK)
    } else if !report.checks_passed() {
        ExitCode::from(EXIT_CHECKS)
    } else {
        ExitCode::SUCCESS
    }
}

fn flow(g: &Global, model: &str, start: &[f64], time: f64, param: Param) -> Result<ExitCode, Failure> {
    let cfg = model_config(g, model, &[])?;
    let m = cfg.model.build()?;
    let dim = m.coord_dim();
    let p0 = if start.is_empty() {
        m.sample_points(1, cfg.seeds.rng)[0]
    } else if start.len() == dim {
        let mut p = Point::zeros();
        p.iter_mut().zip(start).for_each(|(x, s)| *x = *s);
        p
    } else {
        return Err(Failure::Config(format!("--start: expected {dim} coordinates, got {}", start.len())));
    };
    if !(time > 0.0 && time.is_finite()) {
        return Err(Failure::Config(format!("--time: must be positive, got {time}")));
    }
    let traj = integrate_characteristic(&m, &p0, time, cfg.integrator.tol, param.into())?;
    let mut out: Box<dyn Write> = match &g.out {
        Some(path) => Box::new(std::fs::File::create(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let coords: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    let io = |e: std::io::Error| Failure::Other(e.to_string());
    writeln!(out, "t,{},drift", coords.join(",")).map_err(io)?;
    for s in &traj.samples {
        let p: Vec<String> = s.point[..dim].iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{:e},{},{:e}", s.t, p.join(","), s.drift).map_err(io)?;
    }
    eprintln!(
        "{} steps ({} rejected), max drift {:.2e}",
        traj.stats.accepted, traj.stats.rejected, traj.stats.max_drift
    );
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    init_threads()?;
    let g = &cli.global;
    let write_files = g.out.is_some();
    match cli.command {
        Command::Lk {
            model,
            resolution,
            samples,
        } => {
            let mut cfg = model_config(g, &model, &[Task::Lk])?;
            if let Some(resolution) = resolution {
                cfg.quadrature = Some(QuadratureConfig::Grid { resolution });
            }
            if let Some(samples) = samples {
                cfg.quadrature = Some(QuadratureConfig::MonteCarlo { samples });
            }
            finish(g, &cfg, write_files)
        }
        Command::Flow {
            model,
            start,
            time,
            param,
        } => flow(g, &model, &start, time, param),
        Command::Orbits {
            model,
            max_period,
            param,
        } => {
            let mut cfg = model_config(g, &model, &[Task::Orbits])?;
            if max_period.is_some() {
                cfg.orbits.max_period = max_period;
            }
            if let Some(p) = param {
                cfg.orbits.parametrization = Some(p.into());
            }
            finish(g, &cfg, write_files)
        }
        Command::Ergodicity { model, horizons, seeds } => {
            let mut cfg = model_config(g, &model, &[Task::Ergodicity])?;
            if !horizons.is_empty() {
                cfg.ergodicity.horizons = horizons;
            }
            if let Some(n) = seeds {
                cfg.seeds.count = n;
            }
            finish(g, &cfg, write_files)
        }
        Command::Certify {
            model,
            basis_cap,
            samples,
        } => {
            let mut cfg = model_config(g, &model, &[Task::Certify])?;
            if let Some(c) = basis_cap {
                cfg.certify.basis_cap = c;
            }
            if let Some(n) = samples {
                cfg.certify.samples = n;
            }
            finish(g, &cfg, write_files)
        }
        Command::Scenario { file } => {
            let text = std::fs::read_to_string(&file)
                .map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
            let mut cfg = parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
            apply_global(g, &mut cfg);
            finish(g, &cfg, true)
        }
        Command::Selftest { extended } => {
            let report = selftest(extended, g.seed.unwrap_or(0))?;
            summary::print_selftest(&report);
            if let Some(dir) = &g.out {
                std::fs::create_dir_all(dir).map_err(|e| Failure::Other(format!("{}: {e}", dir.display())))?;
                let path = dir.join("selftest.json");
                let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Other(e.to_string()))?;
                std::fs::write(&path, json + "\n").map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
                eprintln!("wrote {}", path.display());
            }
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECKS)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_TASK)
        }
    }
}
