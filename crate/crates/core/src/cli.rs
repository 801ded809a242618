//! Command-line front end. Each subcommand maps onto one library operation
//! and echoes its full configuration into the output, so a result file
//! says how it was produced.
//!
//! Exit status: 0 on success, 1 when the experiment's verdict is negative,
//! 2 on bad input.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::chrono::{
    exp_trunc_schedule, flow_numeric, picard_error, picard_fit, seminorm, FlowConfig, PicardFitConfig, SeminormSpec,
    DEFAULT_GRID, DEFAULT_STEP,
};
use crate::error::Error;
use crate::perturb::{
    contact_flow_identity, main_theorem_experiment, perturb_scaling_experiment, perturbation_map,
    random_rational_controls, MapConfig, ScalingConfig,
};
use crate::polyalg::{kth_contact, to_f64_vec, Rational};
use crate::reach::{
    calibrate_growth_constant, growth_rate_test, order_scan, sample_reachable, variation_check, CalibrationConfig,
    CoverageConfig, GrowthConfig, MagnitudeConfig, OrderScanConfig, SamplerConfig, SamplerMode, ScanScale,
    SteerConfig, VariationConfig,
};
use crate::seeding::derive_seed;
use crate::stats::norm;
use crate::sysparse::{parse_poly, parse_schedule, parse_system, parse_vector, serialize_system};
use crate::system::{ControlSystem, Schedule};

#[derive(Parser)]
#[command(
    name = "chronoreach",
    version,
    about = "Chronological flow expansions, contact checks and reachable-set experiments"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Serialize)]
struct Global {
    /// Seed for every random draw; required by stochastic commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Emit one JSON document instead of text/CSV.
    #[arg(long, global = true)]
    #[serde(skip)]
    json: bool,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    #[serde(skip)]
    jobs: Option<usize>,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a system file and print its canonical form.
    Parse(ParseArgs),
    /// Integrate a schedule numerically (RK4).
    Flow(FlowArgs),
    /// Print the truncated flow expansion in symbolic durations s1..sp.
    Chrono(ChronoArgs),
    /// Check kth contact of two systems at the basepoint.
    Contact(ContactArgs),
    /// Compare the truncated expansions of two systems exactly.
    ContactFlow(ContactFlowArgs),
    /// Distance between the truncated expansion and the numerical flow.
    PicardError(PicardErrorArgs),
    /// Picard errors over orders and horizons, with fitted slopes and bound.
    PicardFit(PicardFitArgs),
    /// Grid estimate of a C^omega seminorm of one field.
    Seminorm(SeminormArgs),
    /// Sample endpoints of random piecewise-constant schedules.
    Reach(ReachArgs),
    /// Growth-rate test: coverage of balls of radius C t^N.
    Growth(GrowthArgs),
    /// Check a control variation of order k along a direction.
    Variation(VariationArgs),
    /// Smallest order k with a passing control variation.
    OrderScan(OrderScanArgs),
    /// Steer under X, replay the schedule under Y.
    PerturbMap(PerturbMapArgs),
    /// Scaling of the replay distance with t.
    PerturbScaling(PerturbScalingArgs),
    /// Growth of Y at C/2 given contact with X and growth of X at C.
    MainTheorem(MainTheoremArgs),
}

#[derive(Args, Serialize)]
struct ParseArgs {
    file: PathBuf,
}

#[derive(Args, Serialize)]
struct FlowArgs {
    file: PathBuf,
    /// Schedule literal, e.g. "(1,0):0.1;(0,1):0.2".
    #[arg(long)]
    schedule: String,
    /// Basepoint (defaults to the file's x0, else the origin).
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    /// Print the state at every step.
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Serialize)]
struct ChronoArgs {
    file: PathBuf,
    #[arg(long)]
    order: u32,
    /// Control sequence, e.g. "(1,0);(0,1)".
    #[arg(long)]
    controls: String,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
}

#[derive(Args, Serialize)]
struct ContactArgs {
    x_file: PathBuf,
    y_file: PathBuf,
    #[arg(long)]
    order: u32,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
}

#[derive(Args, Serialize)]
struct ContactFlowArgs {
    x_file: PathBuf,
    y_file: PathBuf,
    #[arg(long)]
    order: u32,
    /// Number of segments when controls are drawn at random.
    #[arg(long, default_value_t = 2)]
    segments: usize,
    /// Explicit control sequence; drawn from the seed when absent.
    #[arg(long)]
    controls: Option<String>,
    /// Random controls are multiples of 1/denominator.
    #[arg(long, default_value_t = 8)]
    denominator: u32,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
}

#[derive(Args, Serialize)]
struct PicardErrorArgs {
    file: PathBuf,
    #[arg(long)]
    schedule: String,
    #[arg(long)]
    order: u32,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
}

#[derive(Args, Serialize)]
struct PicardFitArgs {
    file: PathBuf,
    /// Control sequence; durations are t split evenly.
    #[arg(long)]
    controls: String,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    orders: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.025")]
    times: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
}

#[derive(Args, Serialize)]
struct SeminormArgs {
    file: PathBuf,
    /// Field index i of X_i.
    #[arg(long, default_value_t = 0)]
    field: usize,
    /// Function the derivatives act on.
    #[arg(long, default_value = "x1")]
    poly: String,
    /// Half-width of the cube around the origin.
    #[arg(long, default_value = "1")]
    radius: String,
    /// Number of halving weights 1, 1/2, 1/4, ...
    #[arg(long, default_value_t = 4)]
    weights: usize,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    BangBang,
    Uniform,
}

#[derive(Args, Serialize)]
struct ReachArgs {
    file: PathBuf,
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 4)]
    segments: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::BangBang)]
    mode: ModeArg,
    /// Fixed fraction of t used by every schedule.
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
}

#[derive(Args, Serialize)]
struct GrowthArgs {
    file: PathBuf,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    order: u32,
    /// Growth constant; calibrated by brute force when absent.
    #[arg(long = "C")]
    #[serde(rename = "C")]
    constant: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125")]
    times: Vec<f64>,
    #[arg(long, default_value_t = 64)]
    directions: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0.95)]
    min_coverage: f64,
    #[arg(long, default_value_t = 4000)]
    count: usize,
    #[arg(long, default_value_t = 4)]
    segments: usize,
    /// Use the sample alone, without steering to missed directions.
    #[arg(long)]
    no_steer: bool,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
}

#[derive(Args, Serialize)]
struct VariationArgs {
    file: PathBuf,
    /// Direction (normalized before use).
    #[arg(long, allow_hyphen_values = true)]
    direction: String,
    #[arg(long)]
    k: u32,
    #[arg(long)]
    c: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125")]
    times: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 4)]
    segments: usize,
    /// Balance the steering residual across coordinates.
    #[arg(long)]
    weighted: bool,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
}

#[derive(Args, Serialize)]
struct OrderScanArgs {
    file: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    direction: String,
    #[arg(long, default_value_t = 10)]
    k_max: u32,
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.4,0.2")]
    times: Vec<f64>,
    /// Same scale c for every order.
    #[arg(long, conflicts_with = "magnitude")]
    c: Option<f64>,
    /// Target distance at t_ref for every order; calibrated when neither
    /// this nor --c is given.
    #[arg(long)]
    magnitude: Option<f64>,
    /// Reference horizon (default: the largest time).
    #[arg(long)]
    t_ref: Option<f64>,
    #[arg(long, default_value_t = 6)]
    segments: usize,
    /// Steer with the plain Euclidean residual only.
    #[arg(long)]
    unweighted: bool,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = 4e-3)]
    step: f64,
}

#[derive(Args, Serialize)]
struct PerturbMapArgs {
    x_file: PathBuf,
    y_file: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    target: String,
    #[arg(long)]
    t: f64,
    /// Warn when the target is farther than this from x0.
    #[arg(long)]
    radius: Option<f64>,
    /// Flag a steering miss larger than this.
    #[arg(long)]
    max_residual: Option<f64>,
    #[arg(long, default_value_t = 4)]
    segments: usize,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
}

#[derive(Args, Serialize)]
struct PerturbScalingArgs {
    x_file: PathBuf,
    y_file: PathBuf,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    order: u32,
    #[arg(long = "C")]
    #[serde(rename = "C")]
    constant: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1,0.05")]
    times: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    targets: usize,
    /// Restrict targets to these coordinates (1-based).
    #[arg(long, value_delimiter = ',')]
    axes: Vec<usize>,
    /// Verdict threshold on the fitted exponent.
    #[arg(long)]
    min_slope: Option<f64>,
    #[arg(long, default_value_t = 4)]
    segments: usize,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
}

#[derive(Args, Serialize)]
struct MainTheoremArgs {
    x_file: PathBuf,
    y_file: PathBuf,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    order: u32,
    /// Constant at which X passes; calibrated on X when absent.
    #[arg(long = "C")]
    #[serde(rename = "C")]
    constant: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125")]
    times: Vec<f64>,
    #[arg(long, default_value_t = 64)]
    directions: usize,
    #[arg(long, default_value_t = 0.95)]
    min_coverage: f64,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// What a subcommand produced.
struct Report {
    /// Extra `#` lines after the config echo.
    notes: Vec<String>,
    body: String,
    json: Value,
    passed: bool,
}

impl Report {
    fn new(body: String, json: Value) -> Self {
        Report {
            notes: Vec::new(),
            body,
            json,
            passed: true,
        }
    }

    fn verdict(mut self, passed: bool) -> Self {
        self.passed = passed;
        self
    }

    fn note(mut self, line: impl Into<String>) -> Self {
        self.notes.push(line.into());
        self
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let name = command_name(&cli.command);
    let result = match cli.global.jobs {
        Some(j) => match rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure::Usage(format!("cannot start {j} worker threads: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok((config, report)) => {
            let text = render(name, &cli.global, config, &report);
            let written = match &cli.global.out {
                Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(msg) = written {
                let _ = writeln!(err, "error: {msg}");
                return 2;
            }
            if report.passed {
                0
            } else {
                1
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}\n\n{}", usage(name));
            2
        }
        Err(Failure::Lib(e)) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Invariant(_) => 1,
                _ => {
                    let _ = writeln!(err, "\n{}", usage(name));
                    2
                }
            }
        }
    }
}

fn usage(name: &str) -> String {
    let mut cmd = Cli::command();
    let sub = cmd.find_subcommand_mut(name).map(|c| c.render_usage().to_string());
    sub.unwrap_or_else(|| Cli::command().render_usage().to_string())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Parse(_) => "parse",
        Command::Flow(_) => "flow",
        Command::Chrono(_) => "chrono",
        Command::Contact(_) => "contact",
        Command::ContactFlow(_) => "contact-flow",
        Command::PicardError(_) => "picard-error",
        Command::PicardFit(_) => "picard-fit",
        Command::Seminorm(_) => "seminorm",
        Command::Reach(_) => "reach",
        Command::Growth(_) => "growth",
        Command::Variation(_) => "variation",
        Command::OrderScan(_) => "order-scan",
        Command::PerturbMap(_) => "perturb-map",
        Command::PerturbScaling(_) => "perturb-scaling",
        Command::MainTheorem(_) => "main-theorem",
    }
}

fn render(name: &str, global: &Global, config: Value, report: &Report) -> String {
    if global.json {
        let doc = json!({
            "command": name,
            "config": config,
            "notes": report.notes,
            "passed": report.passed,
            "report": report.json,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("reports serialize");
        s.push('\n');
        return s;
    }
    let mut s = format!("# chronoreach {name}\n");
    if let Value::Object(map) = config {
        for (k, v) in map {
            if !v.is_null() {
                let _ = writeln!(s, "# {k} = {v}");
            }
        }
    }
    for n in &report.notes {
        let _ = writeln!(s, "# {n}");
    }
    s.push_str(&report.body);
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn config_of<A: Serialize>(global: &Global, args: &A) -> Value {
    let mut v = serde_json::to_value(args).expect("arguments serialize");
    if let (Value::Object(map), Some(seed)) = (&mut v, global.seed) {
        map.insert("seed".into(), json!(seed));
    }
    v
}

fn dispatch(cli: &Cli) -> Outcome<(Value, Report)> {
    let g = &cli.global;
    macro_rules! go {
        ($a:expr, $f:expr) => {{
            let report = $f(g, $a)?;
            Ok((config_of(g, $a), report))
        }};
    }
    match &cli.command {
        Command::Parse(a) => go!(a, cmd_parse),
        Command::Flow(a) => go!(a, cmd_flow),
        Command::Chrono(a) => go!(a, cmd_chrono),
        Command::Contact(a) => go!(a, cmd_contact),
        Command::ContactFlow(a) => go!(a, cmd_contact_flow),
        Command::PicardError(a) => go!(a, cmd_picard_error),
        Command::PicardFit(a) => go!(a, cmd_picard_fit),
        Command::Seminorm(a) => go!(a, cmd_seminorm),
        Command::Reach(a) => go!(a, cmd_reach),
        Command::Growth(a) => go!(a, cmd_growth),
        Command::Variation(a) => go!(a, cmd_variation),
        Command::OrderScan(a) => go!(a, cmd_order_scan),
        Command::PerturbMap(a) => go!(a, cmd_perturb_map),
        Command::PerturbScaling(a) => go!(a, cmd_perturb_scaling),
        Command::MainTheorem(a) => go!(a, cmd_main_theorem),
    }
}

fn load(path: &Path) -> Outcome<ControlSystem> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_system(&text).map_err(|e| Failure::Lib(Error::Input(format!("{}: {e}", path.display()))))
}

fn load_pair(x: &Path, y: &Path) -> Outcome<(ControlSystem, ControlSystem)> {
    let (x, y) = (load(x)?, load(y)?);
    x.check_same_shape(&y)?;
    Ok((x, y))
}

fn seed_for(g: &Global, command: &str) -> Outcome<u64> {
    g.seed
        .ok_or_else(|| Failure::Usage(format!("{command} is stochastic and needs --seed")))
}

fn basepoint(sys: &ControlSystem, x0: &Option<String>) -> Outcome<Vec<Rational>> {
    match x0 {
        None => Ok(sys.basepoint_or_origin()),
        Some(text) => {
            let v = parse_vector(text)?;
            if v.len() != sys.dim() {
                return Err(Error::dim("x0", sys.dim(), v.len()).into());
            }
            Ok(v)
        }
    }
}

fn real_vector(text: &str, dim: usize, what: &str) -> Outcome<Vec<f64>> {
    let v = to_f64_vec(&parse_vector(text)?);
    if v.len() != dim {
        return Err(Error::dim(what, dim, v.len()).into());
    }
    Ok(v)
}

fn unit_vector(text: &str, dim: usize) -> Outcome<Vec<f64>> {
    let v = real_vector(text, dim, "direction")?;
    let n = norm(&v);
    if !(n > 0.0) {
        return Err(Error::input("direction must be non-zero").into());
    }
    Ok(v.into_iter().map(|c| c / n).collect())
}

/// Control sequence without durations: "(1,0);(0,1)".
fn parse_controls(text: &str, m: usize) -> Outcome<Vec<Vec<Rational>>> {
    let with_durations = text
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| format!("{s}:0"))
        .collect::<Vec<_>>()
        .join(";");
    Ok(parse_schedule(&with_durations, m)?.controls)
}

fn schedule_arg(text: &str, m: usize) -> Outcome<(Schedule, Vec<Vec<Rational>>, Vec<Rational>)> {
    let lit = parse_schedule(text, m)?;
    let sched = Schedule::from_exact(&lit.controls, &lit.durations)?;
    Ok((sched, lit.controls, lit.durations))
}

fn flow_cfg(step: f64) -> Outcome<FlowConfig> {
    if !(step > 0.0) {
        return Err(Error::input("step must be positive").into());
    }
    Ok(FlowConfig::with_step(step))
}

fn vector_text(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|c| c.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn cmd_parse(_: &Global, a: &ParseArgs) -> Outcome<Report> {
    let sys = load(&a.file)?;
    let canonical = serialize_system(&sys);
    let json = json!({ "name": sys.name(), "dim": sys.dim(), "controls": sys.m(), "canonical": canonical });
    Ok(Report::new(canonical, json))
}

fn cmd_flow(_: &Global, a: &FlowArgs) -> Outcome<Report> {
    let sys = load(&a.file)?;
    let x0 = to_f64_vec(&basepoint(&sys, &a.x0)?);
    let (sched, _, _) = schedule_arg(&a.schedule, sys.m())?;
    let outcome = flow_numeric(&sys, &sched, &x0, &flow_cfg(a.step)?)?;
    let coords: Vec<String> = (1..=sys.dim()).map(|i| format!("x_{i}")).collect();
    let mut body;
    if a.trace {
        body = format!("segment,time,{}\n", coords.join(","));
        for p in &outcome.trace {
            let vals: Vec<String> = p.state.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(body, "{},{},{}", p.segment + 1, p.time, vals.join(","));
        }
    } else {
        body = format!("{}\n", coords.join(","));
        let vals: Vec<String> = outcome.endpoint.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(body, "{}", vals.join(","));
    }
    let json = if a.trace { json!(outcome) } else { json!({ "endpoint": outcome.endpoint }) };
    Ok(Report::new(body, json))
}

fn cmd_chrono(_: &Global, a: &ChronoArgs) -> Outcome<Report> {
    let sys = load(&a.file)?;
    let x0 = basepoint(&sys, &a.x0)?;
    let controls = parse_controls(&a.controls, sys.m())?;
    let fp = exp_trunc_schedule(&sys, &controls, a.order, &x0)?;
    let coords: Vec<String> = fp.coordinates().iter().map(|p| p.display_with("s").to_string()).collect();
    let mut body = String::new();
    for (i, c) in coords.iter().enumerate() {
        let _ = writeln!(body, "x{} = {c}", i + 1);
    }
    Ok(Report::new(body, json!({ "order": a.order, "segments": controls.len(), "coordinates": coords })))
}

fn cmd_contact(_: &Global, a: &ContactArgs) -> Outcome<Report> {
    let (x, y) = load_pair(&a.x_file, &a.y_file)?;
    let x0 = basepoint(&x, &a.x0)?;
    let r = kth_contact(&x, &y, &x0, a.order)?;
    let body = match &r.witness {
        None => format!("CONTACT order {}\n", a.order),
        Some(w) => format!(
            "NO-CONTACT order {}: D^{:?} of component {} of X{} is {} vs {}\n",
            a.order,
            w.index,
            w.component + 1,
            w.field,
            w.x_value,
            w.y_value
        ),
    };
    Ok(Report::new(body, json!(r)).verdict(r.holds))
}

fn cmd_contact_flow(g: &Global, a: &ContactFlowArgs) -> Outcome<Report> {
    let (x, y) = load_pair(&a.x_file, &a.y_file)?;
    let x0 = basepoint(&x, &a.x0)?;
    let controls = match &a.controls {
        Some(text) => parse_controls(text, x.m())?,
        None => random_rational_controls(x.m(), a.segments, a.denominator, seed_for(g, "contact-flow")?),
    };
    let r = contact_flow_identity(&x, &y, &x0, a.order, &controls)?;
    let shown: Vec<String> = controls
        .iter()
        .map(|u| format!("({})", u.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")))
        .collect();
    let body = match &r.difference {
        None => "EXACT-EQUAL\n".to_string(),
        Some(d) => format!(
            "DIFFERENT: coordinate {} at s^{:?}: {} vs {}\n",
            d.coordinate + 1,
            d.monomial,
            d.left,
            d.right
        ),
    };
    let mut json = json!(r);
    json["controls"] = json!(shown);
    Ok(Report::new(body, json)
        .note(format!("controls used = {}", shown.join(";")))
        .note(format!("contact of order {} = {}", a.order, r.contact.holds))
        .verdict(r.equal))
}

fn cmd_picard_error(_: &Global, a: &PicardErrorArgs) -> Outcome<Report> {
    let sys = load(&a.file)?;
    let x0 = basepoint(&sys, &a.x0)?;
    let (_, controls, durations) = schedule_arg(&a.schedule, sys.m())?;
    let durations = to_f64_vec(&durations);
    let e = picard_error(&sys, &controls, &durations, &x0, a.order, &flow_cfg(a.step)?)?;
    Ok(Report::new(format!("error = {e:e}\n"), json!({ "error": e })))
}

fn cmd_picard_fit(_: &Global, a: &PicardFitArgs) -> Outcome<Report> {
    let sys = load(&a.file)?;
    let x0 = basepoint(&sys, &a.x0)?;
    let controls = parse_controls(&a.controls, sys.m())?;
    let r = picard_fit(&sys, &controls, &x0, &a.orders, &a.times, &flow_cfg(a.step)?, &PicardFitConfig::default())?;
    Ok(Report::new(r.to_csv(), json!(r)))
}

fn cmd_seminorm(_: &Global, a: &SeminormArgs) -> Outcome<Report> {
    let sys = load(&a.file)?;
    if a.field > sys.m() {
        return Err(Error::input(format!("field X{} does not exist; the system has X0..X{}", a.field, sys.m())).into());
    }
    let f = parse_poly(&a.poly, sys.dim())?;
    let radius = match parse_vector(&a.radius)?.as_slice() {
        [r] => r.clone(),
        _ => return Err(Error::input("radius must be a single constant").into()),
    };
    let spec = SeminormSpec::new(
        vec![(-radius.clone(), radius); sys.dim()],
        SeminormSpec::halving_weights(a.weights),
        a.grid,
    )?;
    let v = seminorm(sys.field(a.field), &f, &spec)?;
    Ok(Report::new(format!("seminorm = {:e}\n", v.value), json!(v)))
}

fn cmd_reach(g: &Global, a: &ReachArgs) -> Outcome<Report> {
    let seed = seed_for(g, "reach")?;
    let sys = load(&a.file)?;
    let x0 = to_f64_vec(&basepoint(&sys, &a.x0)?);
    let cfg = SamplerConfig {
        count: a.count,
        segments: a.segments,
        mode: match a.mode {
            ModeArg::BangBang => SamplerMode::BangBang,
            ModeArg::Uniform => SamplerMode::Uniform,
        },
        scale: a.scale,
    };
    let s = sample_reachable(&sys, &x0, a.t, &cfg, seed, &flow_cfg(a.step)?)?;
    Ok(Report::new(s.to_csv(), json!(s)).note(format!("discarded = {}", s.discarded)))
}

fn growth_config(directions: usize, delta: f64, min_coverage: f64, count: usize, segments: usize, steer: bool, flow: FlowConfig) -> GrowthConfig {
    GrowthConfig {
        sampler: SamplerConfig {
            count,
            segments,
            ..SamplerConfig::default()
        },
        coverage: CoverageConfig {
            directions,
            delta,
            ..CoverageConfig::default()
        },
        steer: steer.then(|| SteerConfig {
            flow,
            ..SteerConfig::default()
        }),
        min_coverage,
        flow,
        ..GrowthConfig::default()
    }
}

fn calibrated(sys: &ControlSystem, x0: &[f64], order: u32, given: Option<f64>, seed: u64, flow: &FlowConfig) -> Outcome<(f64, Option<String>)> {
    match given {
        Some(c) => Ok((c, None)),
        None => {
            let cal = calibrate_growth_constant(sys, x0, order, &CalibrationConfig::default(), derive_seed(seed, 1), flow)?;
            if !(cal.constant > 0.0) {
                return Err(Error::Precondition(format!(
                    "calibration found no growth at order {order} (minimal ratio {})",
                    cal.min_ratio
                ))
                .into());
            }
            let note = format!("calibrated C = {} from {} samples at t = {}", cal.constant, cal.samples, cal.t);
            Ok((cal.constant, Some(note)))
        }
    }
}

fn cmd_growth(g: &Global, a: &GrowthArgs) -> Outcome<Report> {
    let seed = seed_for(g, "growth")?;
    let sys = load(&a.file)?;
    let x0 = to_f64_vec(&basepoint(&sys, &a.x0)?);
    let flow = flow_cfg(a.step)?;
    let (c, note) = calibrated(&sys, &x0, a.order, a.constant, seed, &flow)?;
    let cfg = growth_config(a.directions, a.delta, a.min_coverage, a.count, a.segments, !a.no_steer, flow);
    let r = growth_rate_test(&sys, &x0, a.order, c, &a.times, &cfg, seed)?;
    let mut rep = Report::new(r.to_csv(), json!(r)).verdict(r.passed);
    if let Some(n) = note {
        rep = rep.note(n);
    }
    Ok(rep.note(format!("verdict = {}", r.verdict)))
}

fn steer_cfg(segments: usize, weighted: bool, flow: FlowConfig) -> SteerConfig {
    SteerConfig {
        segments,
        weighted,
        flow,
        ..SteerConfig::default()
    }
}

fn cmd_variation(g: &Global, a: &VariationArgs) -> Outcome<Report> {
    let seed = seed_for(g, "variation")?;
    let sys = load(&a.file)?;
    let x0 = to_f64_vec(&basepoint(&sys, &a.x0)?);
    let v = unit_vector(&a.direction, sys.dim())?;
    let cfg = VariationConfig {
        rho: a.rho,
        steer: steer_cfg(a.segments, a.weighted, flow_cfg(a.step)?),
        ..VariationConfig::default()
    };
    let r = variation_check(&sys, &x0, &v, a.k, a.c, &a.times, &cfg, seed)?;
    Ok(Report::new(r.to_csv(), json!(r)).verdict(r.passed).note(format!("verdict = {}", r.note)))
}

fn cmd_order_scan(g: &Global, a: &OrderScanArgs) -> Outcome<Report> {
    let seed = seed_for(g, "order-scan")?;
    let sys = load(&a.file)?;
    let x0 = to_f64_vec(&basepoint(&sys, &a.x0)?);
    let v = unit_vector(&a.direction, sys.dim())?;
    let flow = flow_cfg(a.step)?;
    let steer = steer_cfg(a.segments, !a.unweighted, flow);
    let t_ref = a.t_ref.unwrap_or_else(|| a.times.iter().copied().fold(0.0, f64::max));
    let scale = match (a.c, a.magnitude) {
        (Some(c), _) => ScanScale::Fixed(c),
        (None, Some(magnitude)) => ScanScale::Anchored { magnitude, t_ref },
        (None, None) => ScanScale::Calibrated {
            t_ref,
            config: MagnitudeConfig {
                segments: a.segments,
                steer,
                flow,
                ..MagnitudeConfig::default()
            },
        },
    };
    let cfg = OrderScanConfig {
        k_max: a.k_max,
        times: a.times.clone(),
        scale,
        variation: VariationConfig {
            steer,
            stop_on_failure: true,
            ..VariationConfig::default()
        },
    };
    let r = order_scan(&sys, &x0, &v, &cfg, seed)?;
    let mut body = String::from("k,scale,passed\n");
    for att in &r.attempts {
        let _ = writeln!(body, "{},{:e},{}", att.order, att.scale, att.passed);
    }
    let found = r.found.map_or("none".to_string(), |k| k.to_string());
    let mut rep = Report::new(body, json!(r)).verdict(r.found.is_some());
    if let Some(cal) = &r.calibration {
        rep = rep.note(format!("calibrated magnitude = {:e} at t_ref = {}", cal.magnitude, cal.t_ref));
    }
    Ok(rep.note(format!("found = {found}")).note(format!("note = {}", r.note)))
}

fn cmd_perturb_map(g: &Global, a: &PerturbMapArgs) -> Outcome<Report> {
    let seed = seed_for(g, "perturb-map")?;
    let (x, y) = load_pair(&a.x_file, &a.y_file)?;
    let x0 = to_f64_vec(&basepoint(&x, &a.x0)?);
    let target = real_vector(&a.target, x.dim(), "target")?;
    let cfg = MapConfig {
        steer: steer_cfg(a.segments, false, flow_cfg(a.step)?),
        max_steer_residual: a.max_residual,
        ball_radius: a.radius,
    };
    let r = perturbation_map(&x, &y, &x0, &target, a.t, &cfg, seed)?;
    let mut body = String::new();
    let _ = writeln!(body, "x = {}", vector_text(&r.x));
    let _ = writeln!(body, "y = {}", vector_text(&r.y));
    let _ = writeln!(body, "steer_residual = {:e}", r.steer_residual);
    let _ = writeln!(body, "replay_dist = {:e}", r.replay_distance);
    let _ = writeln!(body, "schedule = {}", r.schedule);
    let mut rep = Report::new(body, json!(r)).verdict(!r.flagged);
    for w in &r.warnings {
        rep = rep.note(format!("warning = {w}"));
    }
    Ok(rep)
}

fn cmd_perturb_scaling(g: &Global, a: &PerturbScalingArgs) -> Outcome<Report> {
    let seed = seed_for(g, "perturb-scaling")?;
    let (x, y) = load_pair(&a.x_file, &a.y_file)?;
    let x0 = basepoint(&x, &a.x0)?;
    if a.axes.iter().any(|&i| i == 0) {
        return Err(Error::input("axes are 1-based").into());
    }
    let cfg = ScalingConfig {
        targets: a.targets,
        target_axes: a.axes.iter().map(|i| i - 1).collect(),
        map: MapConfig {
            steer: steer_cfg(a.segments, false, flow_cfg(a.step)?),
            ..MapConfig::default()
        },
        ..ScalingConfig::default()
    };
    let r = perturb_scaling_experiment(&x, &y, &x0, a.order, a.constant, &a.times, &cfg, seed)?;
    let mut rep = Report::new(r.to_csv(), json!(r));
    for p in &r.points {
        rep = rep.note(format!(
            "t = {}: max = {:e}, median = {:e}",
            p.t, p.max_distance, p.median_distance
        ));
    }
    rep = match r.fit {
        Some(f) => rep.note(format!("slope = {} (residual {:e}, {} points)", f.slope, f.residual, r.fit_points)),
        None => rep.note("slope = degenerate (too few points above the noise floor)"),
    };
    rep = rep
        .note(format!("alpha = {:e}", r.alpha))
        .note(format!("t_min = {}", r.t_min_cut));
    let passed = match a.min_slope {
        Some(m) => r.slope().map_or(false, |s| s >= m),
        None => true,
    };
    Ok(rep.verdict(passed))
}

fn cmd_main_theorem(g: &Global, a: &MainTheoremArgs) -> Outcome<Report> {
    let seed = seed_for(g, "main-theorem")?;
    let (x, y) = load_pair(&a.x_file, &a.y_file)?;
    let x0 = basepoint(&x, &a.x0)?;
    let flow = flow_cfg(a.step)?;
    let (c, note) = calibrated(&x, &to_f64_vec(&x0), a.order, a.constant, seed, &flow)?;
    let cfg = growth_config(a.directions, 0.05, a.min_coverage, 4000, 4, true, flow);
    let r = main_theorem_experiment(&x, &y, &x0, a.order, c, &a.times, &cfg, seed)?;
    let mut rep = Report::new(r.y_report.to_csv(), json!(r)).verdict(r.passed());
    if let Some(n) = note {
        rep = rep.note(n);
    }
    let xcov: Vec<String> = r.x_report.points.iter().map(|p| p.coverage.to_string()).collect();
    Ok(rep
        .note(format!("X passes at C = {} (coverage {})", c, xcov.join(", ")))
        .note(format!("Y tested at C/2 = {}", r.y_report.constant))
        .note(format!("verdict = {}", r.y_report.verdict)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(name: &str) -> String {
        format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"))
    }

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["chronoreach"];
        argv.extend_from_slice(args);
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn parse_echoes_canonical_form() {
        let (code, out, _) = run_str(&["parse", &corpus("brockett.ctrl")]);
        assert_eq!(code, 0);
        assert!(out.contains("X1 = [1, 0, -x2]"));
        let body: String = out.lines().filter(|l| !l.starts_with("# ")).collect::<Vec<_>>().join("\n");
        assert!(parse_system(&body).is_ok());
    }

    #[test]
    fn contact_flow_exact_equal() {
        let (code, out, _) = run_str(&[
            "contact-flow",
            &corpus("brockett.ctrl"),
            &corpus("brockett_cubic.ctrl"),
            "--order",
            "2",
            "--segments",
            "2",
            "--seed",
            "7",
        ]);
        assert_eq!(code, 0);
        assert!(out.contains("EXACT-EQUAL"));
    }

    #[test]
    fn stochastic_commands_need_a_seed() {
        let (code, _, err) = run_str(&["reach", &corpus("brockett.ctrl"), "--t", "0.1"]);
        assert_eq!(code, 2);
        assert!(err.contains("--seed"));
        assert!(err.contains("Usage"));
    }

    #[test]
    fn bad_input_exits_two() {
        assert_eq!(run_str(&["parse", "/nonexistent.ctrl"]).0, 2);
        assert_eq!(run_str(&["parse", "--bogus"]).0, 2);
        assert_eq!(run_str(&["frobnicate"]).0, 2);
    }

    #[test]
    fn failed_contact_exits_one() {
        let (code, out, _) = run_str(&[
            "contact",
            &corpus("brockett.ctrl"),
            &corpus("brockett_cubic.ctrl"),
            "--order",
            "3",
        ]);
        assert_eq!(code, 1);
        assert!(out.contains("NO-CONTACT"));
    }

    #[test]
    fn json_embeds_config() {
        let (code, out, _) = run_str(&[
            "flow",
            &corpus("brockett.ctrl"),
            "--schedule",
            "(1,0):0.1;(0,1):0.1",
            "--json",
        ]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["command"], "flow");
        assert_eq!(v["config"]["step"], json!(DEFAULT_STEP));
        let end = v["report"]["endpoint"].as_array().unwrap();
        assert!((end[2].as_f64().unwrap() - 0.01).abs() < 1e-9);
    }

    #[test]
    fn reach_is_reproducible() {
        let args = ["reach", &corpus("brockett.ctrl"), "--t", "0.2", "--count", "20", "--seed", "3"];
        let a = run_str(&args);
        let b = run_str(&args);
        assert_eq!(a.0, 0);
        assert_eq!(a.1, b.1);
        assert!(a.1.contains("idx,x_1,x_2,x_3,schedule"));
    }
}
