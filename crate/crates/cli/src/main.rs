//! `ricci-lab` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ricci_lab::catalog::ParamValue;
use ricci_lab::config::{Command, RunConfig};
use ricci_lab::report::SCHEMA_VERSION;
use ricci_lab::run::run;
use ricci_lab::Error;
use serde_json::{json, Value};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PARAM: u8 = 3;

const CSV_HELP: &str = "Trajectory CSV (--traj) columns: t,node,A,B,phi_1..phi_n \
for the reduced metric A dx1^2 + B e^{2 x1} sum dx_i^2 and the map components.";

const EXIT_HELP: &str = "Exit codes: 0 pass, 1 verification failure, 2 usage error \
or unknown catalog name, 3 parameter error. RICCI_LAB_THREADS caps worker threads.";

#[derive(Parser, Debug)]
#[command(name = "ricci-lab", version, about = "Verify modified Ricci solitons and integrate the modified Ricci-harmonic flow", after_help = EXIT_HELP)]
struct Cli {
    /// TOML or JSON run config; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Record wall-clock time in the report (breaks byte-identical output).
    #[arg(long, global = true)]
    timing: bool,
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Number of sample points.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// RNG seed for point sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pointwise tolerance with analytic oracles.
    #[arg(long, global = true)]
    tol_pointwise: Option<f64>,
    /// Pointwise tolerance when finite differences are involved.
    #[arg(long, global = true)]
    tol_fd: Option<f64>,
    /// Relative tolerance of integral identities.
    #[arg(long, global = true)]
    tol_integral: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the identity suite for a catalog entry.
    #[command(allow_negative_numbers = true)]
    Verify(VerifyArgs),
    /// Integral identities, Bochner formula and eigenvalue checks on the unit sphere.
    Identities(IdentitiesArgs),
    /// Self-similar oracle, flow residuals, reduced integrator and gauge correspondence.
    #[command(allow_negative_numbers = true, after_help = CSV_HELP)]
    Flow(FlowArgs),
    /// Merge JSON reports and print a summary; exit status reflects the merged verdict.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Catalog entry.
    name: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    /// Comma-separated vector.
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    v: Option<String>,
    #[arg(long)]
    w: Option<String>,
    /// Extra parameter `key=value` (value scalar or comma-separated vector).
    #[arg(long = "param")]
    params: Vec<String>,
}

#[derive(Args, Debug)]
struct IdentitiesArgs {
    /// Sphere dimension.
    #[arg(long)]
    m: Option<usize>,
    /// Gauss–Legendre points per polar variable.
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Args, Debug)]
struct FlowArgs {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Puncture of the target, comma-separated.
    #[arg(long)]
    a: Option<String>,
    /// Map amplitudes, comma-separated.
    #[arg(long)]
    b: Option<String>,
    /// End time of the integrator.
    #[arg(long = "T")]
    t_end: Option<f64>,
    /// Grid nodes.
    #[arg(long = "N")]
    nodes: Option<usize>,
    /// Grid half-width.
    #[arg(long = "L")]
    half_width: Option<f64>,
    /// Fixed time step (default: stability bound).
    #[arg(long)]
    dt: Option<f64>,
    /// Safety factor of the stability bound.
    #[arg(long)]
    sigma: Option<f64>,
    /// End time of the gauge-fixed comparison.
    #[arg(long = "deturck-T")]
    deturck_t: Option<f64>,
    /// Time of the pointwise flow residual check.
    #[arg(long)]
    residual_t: Option<f64>,
    /// Record the closed forms as printed next to the oracle values.
    #[arg(long)]
    printed_forms: bool,
    /// Skip the reduced integrator.
    #[arg(long)]
    no_integrate: bool,
    /// Skip the gauge-fixed comparison.
    #[arg(long)]
    no_deturck: bool,
    /// Keep every k-th integrator state in the trajectory.
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Trajectory CSV output.
    #[arg(long)]
    traj: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// JSON reports written by the other subcommands.
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

fn parse_vector(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::param(format!("cannot parse `{x}` as a number")))
        })
        .collect()
}

fn parse_param(s: &str) -> Result<(String, ParamValue), Error> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--param expects key=value, got `{s}`")))?;
    let vals = parse_vector(v)?;
    let value = if vals.len() == 1 && !v.contains(',') {
        ParamValue::Scalar(vals[0])
    } else {
        ParamValue::Vector(vals)
    };
    Ok((k.trim().to_string(), value))
}

fn apply_common(c: &mut RunConfig, a: &CommonArgs) {
    if let Some(v) = a.samples {
        c.samples = v;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = a.tol_pointwise {
        c.tolerances.pointwise = v;
    }
    if let Some(v) = a.tol_fd {
        c.tolerances.pointwise_fd = v;
    }
    if let Some(v) = a.tol_integral {
        c.tolerances.integral = v;
    }
}

fn apply_verify(c: &mut RunConfig, a: &VerifyArgs) -> Result<(), Error> {
    c.command = Some(Command::Verify);
    if let Some(n) = &a.name {
        c.geometry = Some(n.clone());
    }
    let scalars = [
        ("m", a.m.map(|v| v as f64)),
        ("n", a.n.map(|v| v as f64)),
        ("kappa", a.kappa),
        ("tau", a.tau),
        ("lambda", a.lambda),
        ("theta", a.theta),
        ("c1", a.c1),
        ("c2", a.c2),
        ("r", a.r),
    ];
    for (k, v) in scalars {
        if let Some(v) = v {
            c.params.insert(k.into(), ParamValue::Scalar(v));
        }
    }
    for (k, v) in [("a", &a.a), ("b", &a.b), ("v", &a.v), ("w", &a.w)] {
        if let Some(v) = v {
            c.params.insert(k.into(), ParamValue::Vector(parse_vector(v)?));
        }
    }
    for p in &a.params {
        let (k, v) = parse_param(p)?;
        c.params.insert(k, v);
    }
    Ok(())
}

fn apply_flow(c: &mut RunConfig, a: &FlowArgs) -> Result<(), Error> {
    c.command = Some(Command::Flow);
    if let Some(v) = a.m {
        c.m = v;
    }
    if let Some(v) = a.lambda {
        c.flow.lambda = Some(v);
    }
    if let Some(v) = &a.a {
        c.flow.a = Some(parse_vector(v)?);
    }
    if let Some(v) = &a.b {
        c.flow.b = Some(parse_vector(v)?);
    }
    if let Some(v) = a.t_end {
        c.grid.t_end = v;
    }
    if let Some(v) = a.nodes {
        c.grid.nodes = v;
    }
    if let Some(v) = a.half_width {
        c.grid.half_width = v;
    }
    if a.dt.is_some() {
        c.grid.dt = a.dt;
    }
    if let Some(v) = a.sigma {
        c.grid.sigma = v;
    }
    if let Some(v) = a.deturck_t {
        c.flow.deturck_t = v;
    }
    if let Some(v) = a.residual_t {
        c.flow.residual_t = v;
    }
    if let Some(v) = a.snapshot_every {
        c.grid.snapshot_every = v;
    }
    if a.printed_forms {
        c.flow.printed_forms = true;
    }
    if a.no_integrate {
        c.flow.integrate = false;
    }
    if a.no_deturck {
        c.flow.deturck = false;
    }
    if a.traj.is_some() {
        c.traj = a.traj.clone();
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnknownName { .. } | Error::Config(_) => EXIT_USAGE,
        Error::Parameter(_)
        | Error::Window(_)
        | Error::Unsupported(_)
        | Error::DimensionMismatch(_)
        | Error::MissingField(_)
        | Error::OutsideDomain { .. } => EXIT_PARAM,
        Error::SingularMetric { .. } | Error::InvariantBreach { .. } | Error::NonFinite(_) => EXIT_FAIL,
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(e))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn summary_line(r: &Value) -> String {
    let verdict = if r["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" };
    format!(
        "{verdict} {:<40} {:<34} max={} tol={}",
        r["label"].as_str().unwrap_or("?"),
        r["check"].as_str().unwrap_or("?"),
        r["max"],
        r["tolerance"]
    )
}

fn cmd_report(files: &[PathBuf], out: Option<&Path>) -> Result<bool, Error> {
    let mut records = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(f).map_err(|e| Error::Config(format!("{}: {e}", f.display())))?;
        let v: Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", f.display())))?;
        if v["schema"].as_u64() != Some(SCHEMA_VERSION as u64) {
            return Err(Error::Config(format!(
                "{}: expected report schema {SCHEMA_VERSION}",
                f.display()
            )));
        }
        let recs = v["records"]
            .as_array()
            .ok_or_else(|| Error::Config(format!("{}: no records array", f.display())))?;
        records.extend(recs.iter().cloned());
    }
    for r in &records {
        eprintln!("{}", summary_line(r));
    }
    let pass = records.iter().all(|r| r["pass"].as_bool() == Some(true));
    let merged = json!({
        "schema": SCHEMA_VERSION,
        "tool": "ricci-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "config": { "sources": files },
        "records": records,
        "pass": pass,
    });
    write_output(out, &serde_json::to_string_pretty(&merged).expect("value serializes"))?;
    Ok(pass)
}

fn set_threads() -> Result<(), Error> {
    if let Ok(s) = std::env::var("RICCI_LAB_THREADS") {
        let n: usize = s
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("RICCI_LAB_THREADS must be a positive integer, got `{s}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = set_threads() {
        return fail(&e);
    }
    if let Cmd::Report(r) = &cli.command {
        return match cmd_report(&r.files, cli.out.as_deref()) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(EXIT_FAIL),
            Err(e) => fail(&e),
        };
    }
    let mut config = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        },
        None => RunConfig::default(),
    };
    apply_common(&mut config, &cli.common);
    let applied = match &cli.command {
        Cmd::Verify(a) => apply_verify(&mut config, a),
        Cmd::Identities(a) => {
            config.command = Some(Command::Identities);
            if let Some(m) = a.m {
                config.m = m;
            }
            if let Some(o) = a.order {
                config.quadrature_order = o;
            }
            Ok(())
        }
        Cmd::Flow(a) => apply_flow(&mut config, a),
        Cmd::Report(_) => unreachable!("handled above"),
    };
    if let Err(e) = applied {
        return fail(&e);
    }
    if cli.out.is_some() {
        config.out = cli.out.clone();
    }

    let start = Instant::now();
    let output = match run(&config) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let mut envelope = output.envelope(&config);
    if cli.timing {
        envelope.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    }
    for r in envelope.records.iter().filter(|r| !r.pass) {
        eprintln!("FAIL {} {}: max {} > tol {}", r.label, r.check, r.max, r.tolerance);
    }
    if let (Some(path), Some(tr)) = (&config.traj, &output.trajectory) {
        if let Err(e) = std::fs::write(path, tr.to_csv()) {
            return fail(&Error::Config(format!("{}: {e}", path.display())));
        }
    }
    if let Err(e) = write_output(config.out.as_deref(), &envelope.to_json()) {
        return fail(&e);
    }
    if envelope.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}
