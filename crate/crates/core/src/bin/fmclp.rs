use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fmclp::experiments::{self, GridConfig, LoadOptions};
use fmclp::fairness::{AlphaParam, FairnessSpec, OwaFamily};
use fmclp::metrics::{self, Baselines};
use fmclp::model::{self, ExportFormat, ModelOptions};
use fmclp::par;
use fmclp::solver::{self, CoverageSolution, SolveMode, SolveOptions, Space};
use fmclp::FmclpError;

const EXIT_USAGE: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "fmclp", version, about = "Fair maximal covering location toolkit")]
struct Cli {
    /// Report warnings and errors on stderr as JSON lines.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance (uniform points, weights in (0,1)).
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one instance and print the solution as JSON.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "auto")]
        mode: SolveMode,
        /// Wall-clock limit in seconds.
        #[arg(long, default_value_t = solver::DEFAULT_TIME_LIMIT)]
        time_limit: f64,
        /// Accepted relative optimality gap.
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the mixed-integer model and export it.
    ExportModel {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Continuous formulation: coordinates with big-M rows, or cluster cuts.
        #[arg(long, value_enum, default_value_t = ContForm::Bigm)]
        cont_form: ContForm,
        /// Tangent lines approximating the logarithm when alpha = 1.
        #[arg(long, default_value_t = model::DEFAULT_PWL_BREAKPOINTS)]
        pwl_breakpoints: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PoF, PoE and Gini of a solution.
    Metrics {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Solution JSON written by `solve`.
        #[arg(long)]
        solution: PathBuf,
        /// Baselines JSON; solved on the spot when absent.
        #[arg(long)]
        against: Option<PathBuf>,
        /// Coverage radius, needed to solve baselines.
        #[arg(long = "R")]
        r: Option<f64>,
        #[arg(long, default_value = "disc")]
        space: Space,
        /// Write the baselines used to this path.
        #[arg(long)]
        save_baselines: Option<PathBuf>,
        #[arg(long, default_value_t = solver::DEFAULT_TIME_LIMIT)]
        time_limit: f64,
    },
    /// Run an experiment grid from a TOML config.
    Grid {
        #[arg(long)]
        config: PathBuf,
        /// Result CSV; metadata goes to `<out>.meta.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Gap buckets and metric averages from a result CSV.
    Summarize {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance CSV (`x,y,w`).
    #[arg(long)]
    instance: PathBuf,
    /// Min-max rescale coordinates to the unit square.
    #[arg(long)]
    normalize: bool,
    /// Keep only the first N demand points.
    #[arg(long)]
    truncate: Option<usize>,
}

#[derive(Args)]
struct ProblemArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value = "disc")]
    space: Space,
    /// OWA family letter: W, C, K, D, G or H.
    #[arg(long, default_value = "W")]
    family: String,
    /// Inequality aversion as a rational, e.g. 0, 1/2, 2.
    #[arg(long, default_value = "0")]
    alpha: AlphaParam,
    #[arg(long)]
    p: usize,
    #[arg(long = "R")]
    r: f64,
    /// k of the K family.
    #[arg(long)]
    k: Option<usize>,
    /// Mixing weight of the D family.
    #[arg(long)]
    beta_mix: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Lp,
}

#[derive(Clone, Copy, ValueEnum)]
enum ContForm {
    Bigm,
    Cuts,
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
        }
    }
}

impl From<FmclpError> for Failure {
    fn from(e: FmclpError) -> Self {
        let (code, kind) = match &e {
            FmclpError::DimensionMismatch { .. } => (EXIT_USAGE, "dimension_mismatch"),
            FmclpError::InvalidPoint(_) => (EXIT_USAGE, "invalid_point"),
            FmclpError::InvalidInstance(_) => (EXIT_USAGE, "invalid_instance"),
            FmclpError::Unsupported(_) => (EXIT_USAGE, "unsupported"),
            FmclpError::InvalidWeights(_) => (EXIT_USAGE, "invalid_weights"),
            FmclpError::InvalidParameter(_) => (EXIT_USAGE, "invalid_parameter"),
            FmclpError::LengthMismatch { .. } => (EXIT_USAGE, "length_mismatch"),
            FmclpError::TooManyFacilities { .. } => (EXIT_USAGE, "too_many_facilities"),
            FmclpError::Parse { .. } => (EXIT_USAGE, "parse"),
            FmclpError::Io(_) => (EXIT_USAGE, "io"),
            FmclpError::CapExceeded { .. } => (EXIT_SOLVER, "cap_exceeded"),
            FmclpError::InconsistentBaseline(_) => (EXIT_SOLVER, "inconsistent_baseline"),
            FmclpError::Model(_) => (EXIT_SOLVER, "model"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        FmclpError::from(e).into()
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

struct Reporter {
    json: bool,
}

impl Reporter {
    fn warn(&self, message: &str) {
        if self.json {
            eprintln!("{}", json!({"level": "warning", "message": message}));
        } else {
            eprintln!("warning: {message}");
        }
    }

    fn fail(&self, f: &Failure) {
        if self.json {
            eprintln!(
                "{}",
                json!({"level": "error", "kind": f.kind, "exit_code": f.code, "message": f.message})
            );
        } else {
            eprintln!("error: {}", f.message);
        }
    }
}

fn main() -> ExitCode {
    let wants_json = std::env::args().any(|a| a == "--json");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if wants_json {
                let msg = e.to_string();
                let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
                eprintln!(
                    "{}",
                    json!({"level": "error", "kind": "usage", "exit_code": EXIT_USAGE, "message": first})
                );
            } else {
                let _ = e.print();
            }
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let rep = Reporter { json: cli.json };
    match run(cli.command, &rep) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            rep.fail(&f);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command, rep: &Reporter) -> CliResult<()> {
    match cmd {
        Command::Gen { n, d, seed, out } => {
            let file = experiments::gen_instance(n, d, seed)?;
            emit(out.as_deref(), &experiments::instance_to_csv(&file))
        }
        Command::Solve {
            problem,
            mode,
            time_limit,
            tol,
            out,
        } => {
            let (inst, spec) = problem.resolve(rep)?;
            let opts = SolveOptions {
                time_limit,
                tol,
                mode,
                ..Default::default()
            };
            let sol = solver::solve(&inst, &spec, problem.r, problem.space, &opts)?;
            emit(out.as_deref(), &to_json(&sol)?)
        }
        Command::ExportModel {
            problem,
            format,
            cont_form,
            pwl_breakpoints,
            out,
        } => {
            let (inst, spec) = problem.resolve(rep)?;
            let mopts = ModelOptions { pwl_breakpoints };
            let p = problem.p;
            let m = match (problem.space, cont_form) {
                (Space::Discrete, _) => model::build_discrete(&inst, &spec, p, problem.r, &mopts)?,
                (Space::Continuous, ContForm::Bigm) => model::build_continuous(&inst, &spec, p, problem.r, &mopts)?,
                (Space::Continuous, ContForm::Cuts) => {
                    model::build_continuous_cut_model(&inst, &spec, p, problem.r, None, &mopts)?
                }
            };
            let format = match format {
                Format::Json => ExportFormat::Json,
                Format::Lp => ExportFormat::LpText,
            };
            let bytes = m.export(format)?;
            emit(out.as_deref(), &String::from_utf8(bytes).expect("utf-8 export"))
        }
        Command::Metrics {
            instance,
            solution,
            against,
            r,
            space,
            save_baselines,
            time_limit,
        } => {
            let inst = instance.load()?;
            let sol: CoverageSolution = read_json(&solution)?;
            let baselines = match against {
                Some(path) => read_json(&path)?,
                None => {
                    let r = r.ok_or_else(|| Failure::usage("--R is required when --against is absent"))?;
                    let opts = SolveOptions {
                        time_limit,
                        ..Default::default()
                    };
                    Baselines::solve(&inst, sol.coverage.len(), r, space, &opts)?
                }
            };
            if let Some(path) = save_baselines {
                fs::write(path, to_json(&baselines)?)?;
            }
            let report = metrics::report(&sol, &inst, &baselines)?;
            emit(None, &to_json(&report)?)
        }
        Command::Grid { config, out } => {
            let text = fs::read_to_string(&config)?;
            let mut cfg = GridConfig::from_toml(&text)?;
            if let Some(path) = cfg.instance.as_mut() {
                if path.is_relative() {
                    *path = config.parent().unwrap_or(Path::new(".")).join(&*path);
                }
            }
            let base = experiments::grid_instance(&cfg)?;
            let threads = experiments::grid_threads(&cfg);
            let (rows, meta) = par::with_threads(threads, || experiments::run_grid(&cfg, &base.instance))?;
            for row in rows.iter().filter(|r| !r.error.is_empty()) {
                rep.warn(&format!(
                    "cell n={} p={} R={} {} {} alpha={} failed: {}",
                    row.n, row.p, row.r, row.space, row.family, row.alpha, row.error
                ));
            }
            experiments::write_results(&rows, fs::File::create(&out)?)?;
            fs::write(meta_path(&out), to_json(&meta)?)?;
            Ok(())
        }
        Command::Summarize { results, out_dir } => {
            let rows = experiments::read_results(fs::File::open(&results)?)?;
            let summary = experiments::summarize(&rows);
            fs::create_dir_all(&out_dir)?;
            let written = experiments::write_summary(&summary, &out_dir)?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

impl InstanceArgs {
    fn load(&self) -> CliResult<fmclp::Instance> {
        let opts = LoadOptions {
            normalize: self.normalize,
            truncate: self.truncate,
            ..Default::default()
        };
        Ok(experiments::load_instance(&self.instance, &opts)?.instance)
    }
}

impl ProblemArgs {
    fn resolve(&self, rep: &Reporter) -> CliResult<(fmclp::Instance, FairnessSpec)> {
        let inst = self.instance.load()?;
        let family = OwaFamily::from_letter(&self.family, self.k, self.beta_mix)?;
        let mut alpha = self.alpha;
        if matches!(family, OwaFamily::Minimum) && !alpha.is_zero() {
            rep.warn(&format!(
                "alpha = {alpha} ignored for family C; the maximin optimum does not depend on alpha, solving with alpha = 0"
            ));
            alpha = AlphaParam::ZERO;
        }
        let spec = FairnessSpec::from_family(&family, self.p, alpha)?;
        Ok((inst, spec))
    }
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn to_json<T: serde::Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map_err(|e| FmclpError::Model(e.to_string()).into())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        FmclpError::Parse {
            line: e.line() as u64,
            column: e.column(),
            message: format!("{}: {e}", path.display()),
        }
        .into()
    })
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}
