//! Command implementations behind the `dss` binary.
//!
//! Every command writes machine-readable output (to `--out` or standard
//! output) and reports diagnostics on standard error. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | parse, I/O or usage error |
//! | 2 | irregular pencil or singular evaluation |
//! | 3 | virtual or out-of-range mode requested |
//! | 4 | defective mode |
//! | 5 | index higher than two |
//! | 6 | `verify` found a mismatch |

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dss_core::io::{fmt_f64 as f, model_to_json, read_model, ss_to_json, write_model};
use dss_core::network::{self, Network};
use dss_core::{modal, tolerance, to_ss, Complex64, DssModel, Error};
use serde_json::Value;

#[derive(Debug, Parser)]
#[command(name = "dss", version, about = "Descriptor state-space models of electrical networks")]
pub struct Cli {
    /// Relative rank tolerance: singular values at or below FLOAT times the
    /// largest count as zero. Default `max(rows, cols) * machine epsilon`.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub tol: Option<f64>,
    /// Suppress informational messages on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file; standard output when omitted.
    #[arg(short, long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the whole-system model of a netlist.
    Build {
        netlist: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Finite and virtual modes of a model.
    Modes {
        model: PathBuf,
        /// Add a column with the imaginary part in Hz.
        #[arg(long)]
        hz: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Participation factors: ranked for one mode, or a table of all modes.
    Participation {
        model: PathBuf,
        #[arg(long)]
        mode_index: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Frequency response on a log-spaced grid of angular frequencies.
    Freqresp {
        model: PathBuf,
        /// Lowest angular frequency in rad/s.
        #[arg(long)]
        from: f64,
        /// Highest angular frequency in rad/s.
        #[arg(long)]
        to: f64,
        #[arg(long)]
        points: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Convert a model to explicit state space.
    Convert {
        model: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Compare a composed model against direct nodal arithmetic.
    Verify {
        netlist: PathBuf,
        /// Check this model file instead of rebuilding it from the netlist.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Finite modes while one netlist value is varied.
    Sweep {
        netlist: PathBuf,
        /// Dotted path to a value, e.g. `branches.b1.L`. Array entries are
        /// addressed by `id` or position.
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[command(flatten)]
        output: Output,
    },
}

/// Frequencies used by `verify`, in rad/s.
pub const VERIFY_FROM: f64 = 1e-1;
pub const VERIFY_TO: f64 = 1e3;
pub const VERIFY_POINTS: usize = 20;
pub const VERIFY_LIMIT: f64 = 1e-9;

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Usage(String),
    Mismatch(f64),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Mismatch(_) => 6,
            Failure::Core(e) => match e {
                Error::IrregularPencil | Error::SingularAtS { .. } | Error::SingularE | Error::ConvergenceFailure => 2,
                Error::VirtualModeRequested(_) => 3,
                Error::DefectiveMode(_) => 4,
                Error::HigherIndex => 5,
                _ => 1,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Usage(msg) => write!(f, "{msg}"),
            Failure::Mismatch(err) => write!(f, "model does not match the netlist: max relative error {err:e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

struct Ctx {
    quiet: bool,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    if let Some(tol) = cli.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Failure::Usage(format!("--tol must lie strictly between 0 and 1, got {tol}")));
        }
        if !tolerance::set_rank_factor(tol) && tolerance::rank_factor() != Some(tol) {
            return Err(Failure::Usage("rank tolerance was already set".into()));
        }
    }
    let ctx = Ctx { quiet: cli.quiet };
    match cli.command {
        Command::Build { netlist, output } => {
            let model = network::build_whole_system(&network::read_netlist(&netlist)?)?;
            match &output.out {
                Some(path) => {
                    write_model(path, &model)?;
                    ctx.note(format!("wrote {} ({} states)", path.display(), model.n()));
                    Ok(())
                }
                None => emit(&None, &(model_to_json(&model) + "\n")),
            }
        }
        Command::Modes { model, hz, output } => {
            let model = read_model(&model)?;
            let modes = modal::generalized_eig(&model)?;
            emit(&output.out, &modes.to_csv(hz))
        }
        Command::Participation { model, mode_index, output } => {
            let model = read_model(&model)?;
            let modes = modal::modes(&model)?;
            let report = modal::participation(&model, &modes)?;
            let text = match mode_index {
                Some(i) => report.mode_csv(i)?,
                None => {
                    if !report.skipped.is_empty() {
                        ctx.note(format!("defective or repeated modes left out: {:?}", report.skipped));
                    }
                    report.to_csv()
                }
            };
            emit(&output.out, &text)
        }
        Command::Freqresp { model, from, to, points, output } => {
            let model = read_model(&model)?;
            emit(&output.out, &freqresp_csv(&model, from, to, points, &ctx)?)
        }
        Command::Convert { model, output } => {
            let ss = to_ss(&read_model(&model)?)?;
            emit(&output.out, &(ss_to_json(&ss) + "\n"))
        }
        Command::Verify { netlist, model } => {
            let net = network::read_netlist(&netlist)?;
            let composed = match model {
                Some(path) => read_model(path)?,
                None => network::build_whole_system(&net)?,
            };
            let err = verify(&net, &composed)?;
            println!("max relative error: {err:e}");
            if err < VERIFY_LIMIT {
                Ok(())
            } else {
                Err(Failure::Mismatch(err))
            }
        }
        Command::Sweep { netlist, param, from, to, steps, output } => {
            emit(&output.out, &sweep_csv(&netlist, &param, from, to, steps)?)
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `points` log-spaced values from `from` to `to`, both included.
pub fn logspace(from: f64, to: f64, points: usize) -> Vec<f64> {
    let (a, b) = (from.log10(), to.log10());
    (0..points)
        .map(|k| {
            if k + 1 == points {
                to
            } else {
                10f64.powf(a + (b - a) * k as f64 / (points - 1) as f64)
            }
        })
        .collect()
}

/// CSV with `omega_rad_s` followed by magnitude and phase (rad) of every
/// output/input pair. Singular samples are skipped.
pub fn freqresp_csv(model: &DssModel, from: f64, to: f64, points: usize, notes: &impl Quiet) -> CliResult<String> {
    if !(from > 0.0 && to > from && to.is_finite()) {
        return Err(Failure::Usage(format!("need 0 < from < to, got from={from} to={to}")));
    }
    if points < 2 {
        return Err(Failure::Usage(format!("need at least 2 points, got {points}")));
    }
    let mut out = String::from("omega_rad_s");
    for y in model.output_labels() {
        for u in model.input_labels() {
            write!(out, ",mag:{y}/{u},phase_rad:{y}/{u}").unwrap();
        }
    }
    out.push('\n');
    let mut written = 0;
    let mut last_err = None;
    for w in logspace(from, to, points) {
        let tf = match model.eval_tf(Complex64::new(0.0, w)) {
            Ok(tf) => tf,
            Err(e @ Error::SingularAtS { .. }) => {
                notes.note(format!("skipped omega={w}: {e}"));
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        write!(out, "{}", f(w)).unwrap();
        for i in 0..model.p() {
            for j in 0..model.m() {
                let g = tf[(i, j)];
                write!(out, ",{},{}", f(g.norm()), f(g.arg())).unwrap();
            }
        }
        out.push('\n');
        written += 1;
    }
    match (written, last_err) {
        (0, Some(e)) => Err(e.into()),
        _ => Ok(out),
    }
}

/// Sink for informational messages.
pub trait Quiet {
    fn note(&self, msg: String);
}

impl Quiet for Ctx {
    fn note(&self, msg: String) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

/// Ignores all messages.
pub struct Silent;

impl Quiet for Silent {
    fn note(&self, _msg: String) {}
}

/// Largest relative deviation, over the verification grid, between the
/// model's transfer matrix and the whole-system impedance obtained by direct
/// complex nodal arithmetic. Each sample is measured as
/// `max|Z_model - Z_direct| / max|Z_direct|`.
pub fn verify(net: &Network, model: &DssModel) -> CliResult<f64> {
    let n = net.nodes.len();
    if model.m() != n || model.p() != n {
        return Ok(f64::INFINITY);
    }
    let mut worst: f64 = 0.0;
    for w in logspace(VERIFY_FROM, VERIFY_TO, VERIFY_POINTS) {
        let s = Complex64::new(0.0, w);
        let direct = network::direct_whole_system(net, s)?;
        let composed = match model.eval_tf(s) {
            Ok(z) => z,
            Err(Error::SingularAtS { .. }) => return Ok(f64::INFINITY),
            Err(e) => return Err(e.into()),
        };
        let scale = direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let diff = (composed - &direct).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let rel = if scale > 0.0 { diff / scale } else { diff };
        worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
    }
    Ok(worst)
}

/// Sets the value at a dotted path inside a netlist document.
pub fn set_param(doc: &mut Value, path: &str, value: f64) -> CliResult<()> {
    let unresolved = || Failure::Usage(format!("parameter path `{path}` does not resolve to a number"));
    let mut cur = doc;
    for seg in path.split('.') {
        cur = match cur {
            Value::Object(map) => map.get_mut(seg).ok_or_else(unresolved)?,
            Value::Array(items) => {
                let pos = items
                    .iter()
                    .position(|it| it.get("id").and_then(Value::as_str) == Some(seg))
                    .or_else(|| seg.parse::<usize>().ok().filter(|&i| i < items.len()))
                    .ok_or_else(unresolved)?;
                &mut items[pos]
            }
            _ => return Err(unresolved()),
        };
    }
    if !cur.is_number() {
        return Err(unresolved());
    }
    *cur = serde_json::Number::from_f64(value)
        .map(Value::Number)
        .ok_or_else(|| Failure::Usage(format!("cannot store {value} in a netlist")))?;
    Ok(())
}

/// `step,param_value,mode_index,re_rad_s,im_rad_s`, one row per finite mode
/// per step; values are linearly spaced from `from` to `to`.
pub fn sweep_csv(netlist: &Path, param: &str, from: f64, to: f64, steps: usize) -> CliResult<String> {
    if steps < 2 {
        return Err(Failure::Usage(format!("a sweep needs at least 2 steps, got {steps}")));
    }
    if from == to || !from.is_finite() || !to.is_finite() {
        return Err(Failure::Usage(format!("sweep bounds must be finite and distinct, got {from} and {to}")));
    }
    let text = dss_core::io::read_text(netlist)?;
    let doc: Value = serde_json::from_str(&text).map_err(Error::from)?;
    let base = netlist.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut out = String::from("step,param_value,mode_index,re_rad_s,im_rad_s\n");
    for k in 0..steps {
        let value = if k + 1 == steps {
            to
        } else {
            from + (to - from) * k as f64 / (steps - 1) as f64
        };
        let mut doc = doc.clone();
        set_param(&mut doc, param, value)?;
        let net = network::parse_netlist_value(doc, &base)?;
        let modes = modal::generalized_eig(&network::build_whole_system(&net)?)?;
        for (i, m) in modes.finite() {
            let l = m.eigenvalue();
            writeln!(out, "{k},{},{i},{},{}", f(value), f(l.re), f(l.im)).unwrap();
        }
    }
    Ok(out)
}
