//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain or numerical failure, 2 usage or I/O
//! failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::bench::{count_costs, scaling_table};
use crate::chandrasekhar::FactorChoice;
use crate::error::Error;
use crate::filtering::{filter_series, step_deviation, Engine, FilterOptions, FilterOutput, Init};
use crate::kalman::{dple_lift_residual, dple_propagation_residual, solve_dple};
use crate::linalg::{self, Vector};
use crate::model::{parse_model_doc, par_to_state_space, validate, ModelDoc, PeriodicModel, Start};
use crate::random::random_par_model;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pchandra", version, about = "Periodic Kalman and Chandrasekhar filtering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file and list every violation.
    Validate { model: PathBuf },
    /// Simulate outputs (and optionally states) from a model.
    Simulate(SimulateArgs),
    /// Filter a data file and report innovations and the log-likelihood.
    Filter(FilterArgs),
    /// Solve the periodic Lyapunov equation for the stationary covariances.
    Dple(DpleArgs),
    /// Count covariance-recursion flops per engine.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StartArg {
    Zero,
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchFormat {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompareArg {
    Kalman,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub model: PathBuf,
    #[arg(short, long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = StartArg::Stationary)]
    pub start: StartArg,
    /// Append the state columns x1..xr.
    #[arg(long)]
    pub states: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    pub model: PathBuf,
    /// CSV with columns y1..ym; other columns are ignored.
    pub data: PathBuf,
    #[arg(long, default_value = "kalman")]
    pub engine: Engine,
    #[arg(long, value_enum, default_value_t = StartArg::Zero)]
    pub init: StartArg,
    #[arg(long, default_value = "auto")]
    pub factor: FactorChoice,
    /// Add the diagonal of Σ_t.
    #[arg(long)]
    pub sigma_trace: bool,
    /// Append the running maximum deviation from the given engine.
    #[arg(long, value_enum)]
    pub compare: Option<CompareArg>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DpleArgs {
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Model file; alternatively use --par.
    #[arg(conflicts_with = "par")]
    pub model: Option<PathBuf>,
    /// Random stable periodic autoregression: period, order, seed.
    #[arg(long, num_args = 3, value_names = ["S", "P", "SEED"])]
    pub par: Option<Vec<u64>>,
    #[arg(long, default_value_t = 100)]
    pub periods: usize,
    #[arg(long, value_delimiter = ',', default_value = "kalman,chand31,chand32,chand-minv")]
    pub engines: Vec<Engine>,
    /// State dimensions for a scaling sweep over random PAR(S, r) models.
    #[arg(long, value_delimiter = ',', conflicts_with = "model")]
    pub r_sweep: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value_t = BenchFormat::Text)]
    pub format: BenchFormat,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Domain(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Domain(_) => EXIT_DOMAIN,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Domain(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let root = e.root();
        let msg = if std::ptr::eq(root, &e) {
            format!("{}: {e}", e.name())
        } else {
            format!("{} ({}): {e}", e.name(), root.name())
        };
        Failure::Domain(msg)
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Validate { model } => cmd_validate(&model, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Filter(a) => cmd_filter(&a, out),
        Command::Dple(a) => cmd_dple(&a, out, err),
        Command::Bench(a) => cmd_bench(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

fn read_text(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn parse_doc(path: &Path) -> std::result::Result<ModelDoc, Failure> {
    parse_model_doc(&read_text(path)?)
        .map_err(|e| Failure::Usage(format!("cannot parse {}: {e}", path.display())))
}

/// Load and validate a model file; PAR documents are converted.
fn load_model(path: &Path) -> std::result::Result<PeriodicModel, Failure> {
    match parse_doc(path)? {
        ModelDoc::Par(par) => Ok(par_to_state_space(&par)?),
        ModelDoc::StateSpace(model) => {
            let violations = validate(&model);
            if violations.is_empty() {
                Ok(model)
            } else {
                let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                Err(Failure::Domain(format!("InvalidModel:\n{}", lines.join("\n"))))
            }
        }
    }
}

fn emit(output: &Option<PathBuf>, out: &mut dyn Write, text: &str) -> CmdResult {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Usage(format!("cannot write output: {e}"))),
    }
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn push_row(buf: &mut String, fields: impl IntoIterator<Item = String>) {
    let row: Vec<String> = fields.into_iter().collect();
    buf.push_str(&row.join(","));
    buf.push('\n');
}

fn cmd_validate(path: &Path, out: &mut dyn Write) -> CmdResult {
    let lines: Vec<String> = match parse_doc(path)? {
        ModelDoc::Par(par) => match par.validate() {
            Ok(()) => vec![],
            Err(e) => vec![e.to_string()],
        },
        ModelDoc::StateSpace(model) => validate(&model).iter().map(|v| v.to_string()).collect(),
    };
    if lines.is_empty() {
        return Ok(());
    }
    let mut text = lines.join("\n");
    text.push('\n');
    emit(&None, out, &text)?;
    Err(Failure::Domain(format!("{} violation(s)", lines.len())))
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let model = load_model(&a.model)?;
    let start = match a.start {
        StartArg::Zero => Start::ZeroState,
        StartArg::Stationary => Start::Stationary,
    };
    let sim = crate::model::simulate(&model, a.n, a.seed, start)?;
    let mut text = String::new();
    let mut header = vec!["t".to_string()];
    header.extend((1..=model.output_dim).map(|i| format!("y{i}")));
    if a.states {
        header.extend((1..=model.state_dim).map(|i| format!("x{i}")));
    }
    push_row(&mut text, header);
    for (i, y) in sim.outputs.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(y.iter().map(|v| num(*v)));
        if a.states {
            row.extend(sim.states[i].iter().map(|v| num(*v)));
        }
        push_row(&mut text, row);
    }
    emit(&a.output, out, &text)
}

/// Read the `y1..ym` columns of a CSV data file.
pub fn read_data(path: &Path, m: usize) -> std::result::Result<Vec<Vector>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let headers = reader.headers().map_err(|e| format!("{}: {e}", path.display()))?.clone();
    let cols = (1..=m)
        .map(|i| {
            let name = format!("y{i}");
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| format!("{}: missing column {name}", path.display()))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut data = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        let values = cols
            .iter()
            .map(|&c| {
                let field = rec.get(c).unwrap_or("");
                field.parse::<f64>().map_err(|_| {
                    format!("{}: record {}: `{field}` is not a number", path.display(), line + 1)
                })
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        data.push(Vector::from_vec(values));
    }
    Ok(data)
}

fn filter_csv(model: &PeriodicModel, res: &FilterOutput, dev: Option<&[f64]>) -> String {
    let (m, r) = (model.output_dim, model.state_dim);
    let mut text = String::new();
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|i| format!("e{i}")));
    header.extend((1..=m).map(|i| format!("omega{i}")));
    header.push("loglik".into());
    if res.sigma_trace.is_some() {
        header.extend((1..=r).map(|i| format!("sigma{i}")));
    }
    if dev.is_some() {
        header.push("dev_kalman".into());
    }
    push_row(&mut text, header);
    let terms = crate::filtering::loglik_terms(res);
    let mut running = 0.0;
    let mut worst = 0.0f64;
    for t in 0..res.n {
        running += terms[t];
        let mut row = vec![(t + 1).to_string()];
        row.extend(res.innovations[t].iter().map(|v| num(*v)));
        row.extend(res.omega[t].diagonal().iter().map(|v| num(*v)));
        row.push(num(running));
        if let Some(trace) = &res.sigma_trace {
            row.extend(trace[t].diagonal().iter().map(|v| num(*v)));
        }
        if let Some(dev) = dev {
            worst = worst.max(dev[t]);
            row.push(num(worst));
        }
        push_row(&mut text, row);
    }
    text
}

fn cmd_filter(a: &FilterArgs, out: &mut dyn Write) -> CmdResult {
    let model = load_model(&a.model)?;
    let y = read_data(&a.data, model.output_dim).map_err(Failure::Usage)?;
    let init = match a.init {
        StartArg::Zero => Init::ZeroState,
        StartArg::Stationary => Init::Stationary,
    };
    let opts = FilterOptions {
        sigma_trace: a.sigma_trace,
        factor: a.factor,
    };
    let res = filter_series(&model, &y, a.engine, &init, &opts)?;
    let dev = match a.compare {
        Some(CompareArg::Kalman) => {
            let reference = filter_series(&model, &y, Engine::Kalman, &init, &opts)?;
            Some(step_deviation(&res, &reference))
        }
        None => None,
    };
    let text = match a.format {
        Format::Csv => filter_csv(&model, &res, dev.as_deref()),
        Format::Json => {
            let mut value = serde_json::to_value(&res).expect("filter output serializes");
            if let Some(dev) = &dev {
                value["max_dev_kalman"] = json!(dev.iter().copied().fold(0.0, f64::max));
            }
            let mut s = serde_json::to_string_pretty(&value).expect("json");
            s.push('\n');
            s
        }
    };
    emit(&a.output, out, &text)
}

fn cmd_dple(a: &DpleArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let model = load_model(&a.model)?;
    let w = solve_dple(&model)?;
    let lift = dple_lift_residual(&model, &w[0]);
    let prop = dple_propagation_residual(&model, &w);
    let text = match a.format {
        Format::Json => {
            let mats: Vec<_> = w.iter().map(linalg::to_rows).collect();
            let mut s = serde_json::to_string_pretty(&json!({
                "W": mats,
                "lift_residual": lift,
                "propagation_residual": prop,
            }))
            .expect("json");
            s.push('\n');
            s
        }
        Format::Csv => {
            let _ = writeln!(err, "lift_residual={lift} propagation_residual={prop}");
            let mut text = String::new();
            let mut header = vec!["season".to_string(), "row".to_string()];
            header.extend((1..=model.state_dim).map(|j| format!("c{j}")));
            push_row(&mut text, header);
            for (s, ws) in w.iter().enumerate() {
                for i in 0..ws.nrows() {
                    let mut row = vec![(s + 1).to_string(), (i + 1).to_string()];
                    row.extend(ws.row(i).iter().map(|v| num(*v)));
                    push_row(&mut text, row);
                }
            }
            text
        }
    };
    emit(&a.output, out, &text)
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> CmdResult {
    let par = match &a.par {
        Some(v) => {
            let (s, p) = (v[0] as usize, v[1] as usize);
            if s == 0 || p == 0 {
                return Err(Failure::Usage("--par needs positive S and p".into()));
            }
            Some((s, p, v[2]))
        }
        None => None,
    };
    let mut text = String::new();
    if let Some(rs) = &a.r_sweep {
        let (s, _, seed) = par.unwrap_or((2, 0, 0));
        if rs.contains(&0) {
            return Err(Failure::Usage("--r-sweep values must be positive".into()));
        }
        let family = |r: usize| Ok(random_par_model(&mut ChaCha8Rng::seed_from_u64(seed), s, r));
        let table = scaling_table(family, rs, a.periods, &a.engines)?;
        text = match a.format {
            BenchFormat::Text => table.to_text(),
            BenchFormat::Csv => table.to_csv(),
        };
        return emit(&a.output, out, &text);
    }
    let model = match (&a.model, par) {
        (Some(path), _) => load_model(path)?,
        (None, Some((s, p, seed))) => random_par_model(&mut ChaCha8Rng::seed_from_u64(seed), s, p),
        (None, None) => return Err(Failure::Usage("bench needs a model file, --par or --r-sweep".into())),
    };
    let report = count_costs(&model, a.periods, &a.engines)?;
    text.push_str(&match a.format {
        BenchFormat::Text => report.to_text(),
        BenchFormat::Csv => report.to_csv(),
    });
    emit(&a.output, out, &text)
}
