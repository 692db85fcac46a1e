//! `bwkde`: construct bias-reducing kernels, inspect moments and run rate experiments.
//!
//! Exit status: 0 on success, 2 for usage, input and config errors, 3 for numerical failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bwkde::experiments::{
    self, bias_csv, remark3_csv, variation_csv, ExperimentConfig, ExperimentKind, HGrid, KernelConfig, KernelMode,
    MonteCarloConfig, Remark3Config,
};
use bwkde::rate::fit_rate_guarded;
use bwkde::{catalog, Error, Kernel, KernelPair, PairDocument, Profile};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

/// Writes to stdout; a closed pipe (e.g. `| head`) ends the process quietly.
fn write_stdout(args: std::fmt::Arguments) {
    use std::io::Write;
    if let Err(e) = std::io::stdout().lock().write_fmt(args) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: writing to stdout: {e}");
        std::process::exit(2);
    }
}

macro_rules! emit {
    ($($t:tt)*) => { write_stdout(format_args!($($t)*)) };
}

macro_rules! outln {
    () => { write_stdout(format_args!("\n")) };
    ($($t:tt)*) => { write_stdout(format_args!("{}\n", format_args!($($t)*))) };
}

#[derive(Parser)]
#[command(name = "bwkde", version, about = "Bandwidth-dependent bias-reducing kernels and L1 rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the signed moments of a catalog kernel or of one half of a stored pair.
    Moments(MomentsArgs),
    /// Build the canonical kernel pair (K0, Ks) for a base kernel and order.
    Construct(ConstructArgs),
    /// L1 bias over a geometric bandwidth grid.
    BiasCurve(BiasArgs),
    /// Monte Carlo L1 variation against the sample size.
    VariationCurve(VariationArgs),
    /// Compare the variation of the K_n estimator with the K0 variation plus its correction term.
    Remark3(Remark3Args),
    /// Fit the log-log slope of two CSV columns.
    Rate(RateArgs),
    /// List the available densities and kernels.
    Catalog(JsonFlag),
    /// Run the experiments of a TOML config and write CSV tables plus summary.json.
    Run(RunArgs),
}

#[derive(Args)]
struct JsonFlag {
    /// Print machine-readable JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Part {
    K0,
    Ks,
}

#[derive(Args)]
struct MomentsArgs {
    /// Catalog kernel name.
    #[arg(long, conflicts_with = "pair", required_unless_present = "pair")]
    kernel: Option<String>,
    /// Pair document written by `construct`.
    #[arg(long)]
    pair: Option<PathBuf>,
    /// Which kernel of the pair to inspect.
    #[arg(long, value_enum, default_value = "k0", requires = "pair")]
    part: Part,
    /// Highest moment order.
    #[arg(long, default_value_t = 6)]
    max_j: usize,
    #[command(flatten)]
    out: JsonFlag,
}

#[derive(Args)]
struct ConstructArgs {
    /// Base kernel name.
    #[arg(long)]
    base: String,
    /// Order s.
    #[arg(long)]
    s: usize,
    /// Also record the family exponent a of K0 + h^a Ks.
    #[arg(long)]
    a: Option<f64>,
    /// Write the pair document here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    json: JsonFlag,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    FixedOrderS,
    BandwidthDependent,
    K0Only,
}

impl From<Mode> for KernelMode {
    fn from(m: Mode) -> KernelMode {
        match m {
            Mode::FixedOrderS => KernelMode::FixedOrder,
            Mode::BandwidthDependent => KernelMode::BandwidthDependent,
            Mode::K0Only => KernelMode::K0Only,
        }
    }
}

#[derive(Args)]
struct Setup {
    /// Density name.
    #[arg(long, default_value = "gaussian")]
    density: String,
    /// Base kernel name.
    #[arg(long, default_value = "gaussian")]
    base: String,
    #[arg(long, default_value_t = 2)]
    s: usize,
    /// Exponent a of the weight h^a.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, value_enum, default_value = "bandwidth-dependent")]
    mode: Mode,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl Setup {
    fn config(&self, name: &str) -> ExperimentConfig {
        let kernel = KernelConfig {
            base: self.base.clone(),
            s: self.s,
            a_exponent: self.a,
            mode: self.mode.into(),
            fixed_alpha: None,
        };
        ExperimentConfig::new(name, &self.density, kernel, self.seed)
    }
}

#[derive(Args)]
struct BiasArgs {
    #[command(flatten)]
    setup: Setup,
    #[arg(long, default_value_t = 0.5)]
    h_start: f64,
    #[arg(long, default_value_t = 0.5)]
    h_ratio: f64,
    #[arg(long, default_value_t = 6)]
    h_count: usize,
    /// Write the CSV table here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    json: JsonFlag,
}

#[derive(Args)]
struct McArgs {
    /// Sample sizes, strictly increasing.
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000")]
    n: Vec<usize>,
    /// Monte Carlo replications per cell.
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct VariationArgs {
    #[command(flatten)]
    setup: Setup,
    #[command(flatten)]
    mc: McArgs,
    /// Fixed bandwidth.
    #[arg(long, default_value_t = 0.3)]
    h: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    json: JsonFlag,
}

#[derive(Args)]
struct Remark3Args {
    #[command(flatten)]
    setup: Setup,
    #[command(flatten)]
    mc: McArgs,
    /// Bandwidths.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.3,0.15")]
    h: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    json: JsonFlag,
}

#[derive(Args)]
struct RateArgs {
    /// CSV file with a header row.
    #[arg(long = "in")]
    input: PathBuf,
    /// Grid column (default: first column).
    #[arg(long)]
    x: Option<String>,
    /// Error column (default: second column).
    #[arg(long)]
    y: Option<String>,
    /// Column of error estimates; rows where it exceeds 10% of y are left out.
    #[arg(long)]
    err: Option<String>,
    #[command(flatten)]
    json: JsonFlag,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[command(flatten)]
    json: JsonFlag,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn dispatch(command: Command) -> bwkde::Result<()> {
    match command {
        Command::Moments(a) => moments(a),
        Command::Construct(a) => construct(a),
        Command::BiasCurve(a) => bias(a),
        Command::VariationCurve(a) => variation(a),
        Command::Remark3(a) => remark3(a),
        Command::Rate(a) => rate(a),
        Command::Catalog(a) => list_catalog(a.json),
        Command::Run(a) => run(a),
    }
}

fn print_json(v: &Value) {
    outln!("{}", serde_json::to_string_pretty(v).expect("JSON values always serialise"));
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("library types serialise to JSON")
}

fn read_pair(path: &Path) -> bwkde::Result<KernelPair> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let doc: PairDocument =
        serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    KernelPair::from_document(&doc)
}

fn moments(a: MomentsArgs) -> bwkde::Result<()> {
    let (label, kernel) = match (&a.kernel, &a.pair) {
        (Some(name), _) => (name.clone(), Kernel::by_name(name)?),
        (None, Some(path)) => {
            let pair = read_pair(path)?;
            match a.part {
                Part::K0 => ("K0".to_string(), pair.k0),
                Part::Ks => (format!("K{}", pair.s), pair.ks),
            }
        }
        (None, None) => return Err(Error::Input("pass --kernel or --pair".into())),
    };
    let profile = kernel.detect_order(a.max_j.max(1), bwkde::kernel::ORDER_TOL)?;
    let values: Vec<f64> = profile.signed.iter().take(a.max_j + 1).copied().collect();
    if a.out.json {
        print_json(&json!({ "kernel": label, "moments": values, "status": to_value(&profile.status) }));
    } else {
        outln!("j,alpha_j");
        for (j, v) in values.iter().enumerate() {
            outln!("{j},{v}");
        }
    }
    Ok(())
}

fn construct(a: ConstructArgs) -> bwkde::Result<()> {
    let pair = KernelPair::construct(&Kernel::by_name(&a.base)?, a.s)?;
    let doc = match a.a {
        Some(exp) => pair.family(exp)?.to_document(),
        None => pair.to_document(),
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
    match &a.out {
        Some(path) => {
            std::fs::write(path, text + "\n")?;
            let report = json!({
                "written": path.display().to_string(),
                "max_residual": doc.verification.max_residual,
                "condition_estimate": doc.condition_estimate,
            });
            if a.json.json {
                print_json(&report);
            } else {
                outln!(
                    "wrote {} (max moment residual {:e}, condition estimate {:e})",
                    path.display(),
                    doc.verification.max_residual,
                    doc.condition_estimate
                );
            }
        }
        None => outln!("{text}"),
    }
    Ok(())
}

fn write_or_print(out: &Option<PathBuf>, csv: &str) -> bwkde::Result<()> {
    match out {
        Some(path) => std::fs::write(path, csv)?,
        None => emit!("{csv}"),
    }
    Ok(())
}

fn slope_json(rate: &bwkde::Result<bwkde::RateReport>) -> Value {
    match rate {
        Ok(r) => to_value(r),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn bias(a: BiasArgs) -> bwkde::Result<()> {
    let mut cfg = a.setup.config("bias-curve");
    cfg.h_grid = HGrid { start: a.h_start, ratio: a.h_ratio, count: a.h_count };
    cfg.experiments = vec![ExperimentKind::BiasCurve];
    cfg.validate()?;
    let curve = experiments::bias_curve(&cfg.density_model()?, &cfg.schedule()?, &cfg.h_grid.values(), &cfg.quadrature);
    let rate = curve.rate();
    if a.json.json {
        if let Some(path) = &a.out {
            std::fs::write(path, bias_csv(&curve))?;
        }
        print_json(&json!({ "rows": to_value(&curve.rows), "rate": slope_json(&rate), "annotations": to_value(&curve.annotations) }));
    } else {
        write_or_print(&a.out, &bias_csv(&curve))?;
        if let Ok(r) = &rate {
            eprintln!("slope {} (r² {})", r.slope, r.r_squared);
        }
    }
    Ok(())
}

fn mc_config(setup: &Setup, mc: &McArgs, name: &str) -> ExperimentConfig {
    let mut cfg = setup.config(name);
    cfg.monte_carlo = Some(MonteCarloConfig { n_grid: mc.n.clone(), replications: mc.reps, h: None, h_coupling: None });
    cfg
}

fn variation(a: VariationArgs) -> bwkde::Result<()> {
    let mut cfg = mc_config(&a.setup, &a.mc, "variation-curve");
    if let Some(m) = cfg.monte_carlo.as_mut() {
        m.h = Some(a.h);
    }
    cfg.experiments = vec![ExperimentKind::VariationCurve];
    cfg.validate()?;
    let curve = experiments::variation_curve(&cfg, a.mc.threads)?;
    let rate = curve.rate();
    if a.json.json {
        if let Some(path) = &a.out {
            std::fs::write(path, variation_csv(&curve))?;
        }
        print_json(&json!({ "rows": to_value(&curve.rows), "rate": slope_json(&rate), "annotations": to_value(&curve.annotations) }));
    } else {
        write_or_print(&a.out, &variation_csv(&curve))?;
        if let Ok(r) = &rate {
            eprintln!("slope {} (r² {})", r.slope, r.r_squared);
        }
    }
    Ok(())
}

fn remark3(a: Remark3Args) -> bwkde::Result<()> {
    let mut cfg = mc_config(&a.setup, &a.mc, "remark3");
    cfg.remark3 = Some(Remark3Config { h_values: a.h.clone() });
    cfg.experiments = vec![ExperimentKind::Remark3];
    cfg.validate()?;
    let report = experiments::remark3_check(&cfg, a.mc.threads)?;
    if a.json.json {
        if let Some(path) = &a.out {
            std::fs::write(path, remark3_csv(&report))?;
        }
        print_json(&to_value(&report));
    } else {
        write_or_print(&a.out, &remark3_csv(&report))?;
        eprintln!("{} of {} cells violate the bound beyond 2 standard errors", report.violations, report.rows.len());
    }
    Ok(())
}

fn column(header: &[&str], name: &Option<String>, default: usize) -> bwkde::Result<usize> {
    match name {
        None if default < header.len() => Ok(default),
        None => Err(Error::Input(format!("CSV needs at least {} columns", default + 1))),
        Some(n) => header
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| Error::Input(format!("no column '{n}'; available: {}", header.join(", ")))),
    }
}

fn rate(a: RateArgs) -> bwkde::Result<()> {
    let text = std::fs::read_to_string(&a.input).map_err(|e| Error::Input(format!("{}: {e}", a.input.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Input("empty CSV".into()))?.split(',').map(str::trim).collect();
    let xi = column(&header, &a.x, 0)?;
    let yi = column(&header, &a.y, 1)?;
    let ei = match &a.err {
        Some(_) => Some(column(&header, &a.err, 0)?),
        None => None,
    };
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> bwkde::Result<f64> {
            cells
                .get(i)
                .and_then(|c| c.parse::<f64>().ok())
                .ok_or_else(|| Error::Input(format!("row {}: column {} is not a number", k + 2, header[i])))
        };
        let err = match ei {
            Some(i) => get(i)?,
            None => 0.0,
        };
        rows.push((get(xi)?, get(yi)?, err));
    }
    let report = fit_rate_guarded(&rows, experiments::RATE_GUARD)?;
    if a.json.json {
        print_json(&to_value(&report));
    } else {
        outln!("slope {}", report.slope);
        outln!("intercept {}", report.intercept);
        outln!("r_squared {}", report.r_squared);
        if !report.excluded.is_empty() {
            outln!("excluded {:?}", report.excluded);
        }
    }
    Ok(())
}

fn list_catalog(as_json: bool) -> bwkde::Result<()> {
    let densities: Vec<Value> = catalog()
        .iter()
        .map(|d| json!({ "name": d.name(), "s_max": d.s_max(), "support": d.support() }))
        .collect();
    let kernels: Vec<Value> = Profile::NAMES
        .iter()
        .map(|n| {
            let k = Kernel::by_name(n).expect("catalog names resolve");
            json!({ "name": n, "support_radius": k.support_radius() })
        })
        .collect();
    if as_json {
        print_json(&json!({ "densities": densities, "kernels": kernels }));
    } else {
        outln!("densities:");
        for d in catalog() {
            let support = d.support().map(|n| format!("[-{n}, {n}]")).unwrap_or_else(|| "real line".into());
            outln!("  {:<10} s_max {}  support {support}", d.name(), d.s_max());
        }
        outln!("kernels:");
        for n in Profile::NAMES {
            let k = Kernel::by_name(n).expect("catalog names resolve");
            let support = k.support_radius().map(|m| format!("[-{m}, {m}]")).unwrap_or_else(|| "real line".into());
            outln!("  {n:<13} support {support}");
        }
    }
    Ok(())
}

fn run(a: RunArgs) -> bwkde::Result<()> {
    let cfg = ExperimentConfig::from_file(&a.config)?;
    let out = experiments::run(&cfg, a.out.as_deref(), a.threads)?;
    if a.json.json {
        print_json(&to_value(&out.summary));
    } else {
        let dir = a.out.clone().or(cfg.output.map(PathBuf::from)).unwrap_or_default();
        outln!("wrote results to {}", dir.display());
        if let Some(b) = &out.summary.bias_curve {
            if let Some(r) = &b.slope.rate {
                outln!("bias slope {}", r.slope);
            }
        }
        if let Some(v) = &out.summary.variation_curve {
            if let Some(r) = &v.rate {
                outln!("variation slope {}", r.slope);
            }
        }
        if let Some(r) = &out.summary.remark3 {
            outln!("variation bound violations {}", r.violations.count);
        }
        if let Some(m) = &out.summary.modulus_bound {
            outln!("modulus bound violations {}", m.violations.count);
        }
        outln!("expectations {}", if out.summary.pass { "met" } else { "NOT met" });
    }
    Ok(())
}
