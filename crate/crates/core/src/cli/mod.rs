//! Command-line pipeline: `generate → analyze → extract → perturb → train →
//! predict → evaluate`, plus `bench`.
//!
//! Every command writes its artifacts and a `manifest.json` into
//! `--out-dir`. Options can also come from a flat `key = value` file passed
//! with `--config`; flags on the command line win over the file.

mod commands;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::dataset::{PerturbMode, PerturbTarget};
use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "PGPLAN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "pgplan", version, about = "Power-grid IR-drop analysis and neural width planning")]
pub struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,
    /// Flat `key = value` file with default options for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// How the run summary is printed on stdout. Artifacts are unaffected.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a synthetic mesh with golden widths.
    Generate(GenerateArgs),
    /// Solve a netlist; write its solution and IR map.
    Analyze(AnalyzeArgs),
    /// Turn a solved netlist into an `x,y,i_d,w` dataset.
    Extract(ExtractArgs),
    /// Perturb a netlist, re-solve it and optionally extract a test set.
    Perturb(PerturbArgs),
    /// Train a width model on a dataset.
    Train(TrainArgs),
    /// Predict widths and IR drop for a floorplan.
    Predict(PredictArgs),
    /// Compare a model against a labelled dataset.
    Evaluate(EvaluateArgs),
    /// Time the conventional and learned paths on one grid.
    Bench(BenchArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Analyze(_) => "analyze",
            Command::Extract(_) => "extract",
            Command::Perturb(_) => "perturb",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Evaluate(_) => "evaluate",
            Command::Bench(_) => "bench",
        }
    }
}

const SUBCOMMANDS: [&str; 8] = ["generate", "analyze", "extract", "perturb", "train", "predict", "evaluate", "bench"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PadLayout {
    Corner,
    Ring,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = 30)]
    pub rows: usize,
    #[arg(long, default_value_t = 30)]
    pub cols: usize,
    /// Line pitch in layout units.
    #[arg(long, default_value_t = 100)]
    pub pitch: i64,
    /// Sheet resistance, ohms per square.
    #[arg(long, default_value_t = 0.05)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub base_width: f64,
    #[arg(long, default_value_t = 1e6)]
    pub core_width: f64,
    /// Per-line IR-drop budget, volts.
    #[arg(long, default_value_t = 0.05)]
    pub ir_budget: f64,
    #[arg(long, value_enum, default_value_t = PadLayout::Corner)]
    pub pads: PadLayout,
    /// Number of random blocks.
    #[arg(long, default_value_t = 8)]
    pub blocks: usize,
    /// Mean block current, amperes.
    #[arg(long, default_value_t = 0.05)]
    pub block_current: f64,
    #[arg(long, default_value_t = 1.8)]
    pub vdd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Also write `reliability.csv` checked against this current-density limit.
    #[arg(long)]
    pub j_max: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub netlist: PathBuf,
    /// Relative residual target.
    #[arg(long, default_value_t = crate::solver::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Raster cells per side.
    #[arg(long, default_value_t = 32)]
    pub resolution: usize,
    /// Average drops per raster cell instead of taking the worst.
    #[arg(long)]
    pub mean: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LabelArgs {
    /// Golden widths per resistor (`resistor,line,width` CSV from `generate`).
    #[arg(long)]
    pub widths: Option<PathBuf>,
    /// Derive golden widths as `ρ·l/R` with this sheet resistance instead.
    #[arg(long, conflicts_with = "widths")]
    pub rho: Option<f64>,
    /// Block geometry; adds each line's allocated current to `i_d`.
    #[arg(long)]
    pub floorplan: Option<PathBuf>,
    /// Skip branches whose nodes carry no coordinates.
    #[arg(long)]
    pub skip_uncoordinated: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExtractArgs {
    #[arg(long)]
    pub netlist: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    #[command(flatten)]
    pub labels: LabelArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PerturbArgs {
    #[arg(long)]
    pub netlist: PathBuf,
    /// Bound of the relative change, `0 ≤ γ ≤ 1`.
    #[arg(long, default_value_t = 0.10)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "switching_current")]
    pub targets: Vec<PerturbTarget>,
    #[arg(long, value_enum, default_value_t = ModeArg::Resolve)]
    pub mode: ModeArg,
    /// Solution of the unperturbed netlist; required with `--mode in-place`.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    #[command(flatten)]
    pub labels: LabelArgs,
    #[arg(long, default_value_t = crate::solver::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Resolve,
    InPlace,
}

impl From<ModeArg> for PerturbMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Resolve => PerturbMode::Resolve,
            ModeArg::InPlace => PerturbMode::InPlace,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Validation set; otherwise a share of `--dataset` is held out.
    #[arg(long)]
    pub val_dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Weight of the electromigration penalty.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Current-density limit, amperes per width unit.
    #[arg(long)]
    pub j_max: f64,
    #[arg(long, default_value_t = 10)]
    pub hidden_layers: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden_width: usize,
    /// Seeds weight initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Epochs without improvement before stopping; 0 disables early stopping.
    #[arg(long, default_value_t = 15)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub floorplan: PathBuf,
    /// Netlist whose loads set the block currents; also enables the node
    /// drop estimate and IR map.
    #[arg(long)]
    pub netlist: Option<PathBuf>,
    #[arg(long)]
    pub j_max: f64,
    /// Overrides the floorplan's sheet resistance.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub ir_budget: Option<f64>,
    #[arg(long)]
    pub core_width: Option<f64>,
    /// Smallest admissible predicted width.
    #[arg(long)]
    pub w_min: Option<f64>,
    #[arg(long, default_value_t = 32)]
    pub resolution: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labelled `x,y,i_d,w` dataset.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Conventional solution for the worst-case comparison.
    #[arg(long, requires = "netlist")]
    pub solution: Option<PathBuf>,
    #[arg(long)]
    pub netlist: Option<PathBuf>,
    /// `prediction.json` from `predict` for the worst-case comparison.
    #[arg(long)]
    pub prediction: Option<PathBuf>,
    /// `timing.json` from `bench` to embed in the report.
    #[arg(long)]
    pub timing: Option<PathBuf>,
    #[arg(long, default_value_t = crate::metrics::DEFAULT_BINS)]
    pub bins: usize,
    /// Record the process's peak memory in the report.
    #[arg(long)]
    pub report_memory: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Model to time; an untrained default network scaled to the grid
    /// otherwise (inference cost does not depend on the weights).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub j_max: f64,
    /// Timed repetitions of the learned path; the fastest counts.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Reads a flat `key = value` file into `--key=value` arguments. Blank
/// lines and lines starting with `#` are skipped; `true`/`false` toggle
/// switches.
pub fn config_args(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key.is_empty() {
            return Err(Error::Usage(format!("config line {}: empty key", i + 1)));
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            v => out.push(format!("--{key}={v}")),
        }
    }
    Ok(out)
}

/// Inserts config-file options right after the subcommand, leaving out any
/// option the command line already sets.
fn merge_config(argv: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
    let extra = config_args(&text)?;
    let Some(at) = argv.iter().skip(1).position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let at = at + 2;
    let key = |a: &str| a.split('=').next().unwrap_or_default().to_string();
    let given: Vec<String> = argv[1..].iter().filter(|a| a.starts_with("--")).map(|a| key(a)).collect();
    let mut out = argv[..at].to_vec();
    out.extend(extra.into_iter().filter(|a| !given.contains(&key(a))));
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}

/// Output directory bookkeeping shared by all commands.
pub(crate) struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Creates `name` in the output directory and hands a buffered writer to `f`.
    fn write<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let path = self.dir.join(name);
        let file = std::fs::File::create(&path).map_err(|e| Error::file(&path, e))?;
        let mut out = std::io::BufWriter::new(file);
        f(&mut out)?;
        out.flush().map_err(|e| Error::file(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |out| {
            serde_json::to_writer_pretty(&mut *out, value)?;
            writeln!(out)?;
            Ok(())
        })
    }
}

fn manifest<T: Serialize>(
    out: &mut Outputs,
    command: &str,
    argv: &[String],
    params: &T,
    inputs: &[&Path],
) -> Result<()> {
    let mut outputs = out.written.clone();
    outputs.sort();
    let doc = json!({
        "tool": "pgplan",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "argv": argv,
        "parameters": params,
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "outputs": outputs,
    });
    out.json("manifest.json", &doc)
}

fn print_summary(format: Format, command: &str, summary: &Map<String, Value>) {
    match format {
        Format::Json => {
            let mut doc = Map::new();
            doc.insert("command".into(), command.into());
            doc.extend(summary.clone());
            println!("{}", Value::Object(doc));
        }
        Format::Text => {
            for (k, v) in summary {
                match v {
                    Value::String(s) => println!("{k}: {s}"),
                    v => println!("{k}: {v}"),
                }
            }
        }
    }
}

fn execute(cli: &Cli, argv: &[String]) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        // a pool may already exist when embedded; keep it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let summary = match &cli.command {
        Command::Generate(a) => commands::generate(a, argv)?,
        Command::Analyze(a) => commands::analyze(a, argv)?,
        Command::Extract(a) => commands::extract(a, argv)?,
        Command::Perturb(a) => commands::perturb(a, argv)?,
        Command::Train(a) => commands::train(a, argv)?,
        Command::Predict(a) => commands::predict(a, argv)?,
        Command::Evaluate(a) => commands::evaluate(a, argv)?,
        Command::Bench(a) => commands::bench(a, argv)?,
    };
    print_summary(cli.format, cli.command.name(), &summary);
    Ok(())
}

/// Runs one command and returns the process exit code: 0 on success, 1 on
/// a failed run, 2 on a usage error.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = args.into_iter().map(Into::into).collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("ERROR {}: {e}", e.code());
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .try_init();
    match execute(&cli, &argv[1..]) {
        Ok(()) => 0,
        Err(e) => {
            let detail = e.to_string().replace('\n', " ");
            eprintln!("ERROR {}: {detail}", e.code());
            if matches!(e, Error::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}
