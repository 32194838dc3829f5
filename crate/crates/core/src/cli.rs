//! `relaylab` command line: closed-form tables, outage sweeps, slope fits and
//! the transceiver identity battery.
//!
//! Exit status: 0 success, 1 runtime or tolerance failure, 2 usage or validation error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::Error;
use crate::numerics::{sample_complex_gaussian, CMatrix, SeedSpec};
use crate::simulator::{self, CurvePoint, OutageCurve, OutageMode, SlopeFit, SweepSpec, SystemTemplate};
use crate::theory;
use crate::transceiver;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable that overrides the master seed of `simulate`.
pub const SEED_ENV: &str = "RELAYLAB_SEED";
pub const CURVE_FILE: &str = "curve.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const PLOT_FILE: &str = "plot.gp";
pub const CSV_HEADER: [&str; 6] = ["snr_db", "p_out", "trials", "outages", "ci_low", "ci_high"];

#[derive(Debug, Parser)]
#[command(name = "relaylab", version, about = "MMSE relay transceiver design and outage/diversity experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print closed-form diversity for fixed rates or multiplexing gains.
    Theory(TheoryArgs),
    /// Run a Monte Carlo outage sweep from a config file.
    Simulate(SimulateArgs),
    /// Fit the diversity slope of a previously written curve.
    Slope(SlopeArgs),
    /// Check the transceiver identities on seeded channel draws.
    DesignCheck(DesignCheckArgs),
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("points").required(true).multiple(true).args(["rates", "mux"])))]
pub struct TheoryArgs {
    #[arg(long)]
    pub ns: usize,
    #[arg(long)]
    pub nr: usize,
    #[arg(long)]
    pub nd: usize,
    /// Fixed rates in bpcu, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    /// Multiplexing gains, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub mux: Option<Vec<f64>>,
    /// Also write the table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML sweep description.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub mode: Option<OutageMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub snr_db: Option<Vec<f64>>,
    /// Stop each point after this many outages (trials become the cap).
    #[arg(long)]
    pub adaptive_target: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write a gnuplot script next to the curve.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct SlopeArgs {
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long, default_value_t = simulator::DEFAULT_MIN_COUNT)]
    pub min_count: u64,
    /// Antenna config and rate; read from the sibling manifest when omitted.
    #[arg(long, requires_all = ["nr", "nd", "rate"])]
    pub ns: Option<usize>,
    #[arg(long)]
    pub nr: Option<usize>,
    #[arg(long)]
    pub nd: Option<usize>,
    #[arg(long)]
    pub rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DesignCheckArgs {
    /// Comma separated `NSxNRxND` shapes.
    #[arg(long, value_delimiter = ',', default_value = "1x1x1,2x2x2,2x3x2,3x2x4,2x2x1,4x2x3")]
    pub shapes: Vec<String>,
    #[arg(long, default_value_t = 100)]
    pub draws: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub snr_db: f64,
    /// Relative tolerance for the matrix identities.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Perturb the relay matrix fed to the direct route; the battery must then fail.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

impl std::str::FromStr for SystemTemplateShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
        if parts.len() != 3 {
            return Err(format!("shape `{s}` is not NSxNRxND"));
        }
        let mut dims = [0usize; 3];
        for (d, p) in dims.iter_mut().zip(&parts) {
            *d = p.parse().map_err(|_| format!("shape `{s}` has a non-integer dimension"))?;
            if *d == 0 {
                return Err(format!("shape `{s}` has a zero dimension"));
            }
        }
        Ok(SystemTemplateShape(dims[0], dims[1], dims[2]))
    }
}

/// Antenna triple parsed from `NSxNRxND`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemTemplateShape(pub usize, pub usize, pub usize);

impl std::fmt::Display for SystemTemplateShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.0, self.1, self.2)
    }
}

/// Process environment seen by the commands.
#[derive(Debug, Clone, Default)]
pub struct Env {
    pub seed_override: Option<String>,
}

impl Env {
    pub fn from_process() -> Self {
        Self {
            seed_override: std::env::var(SEED_ENV).ok(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub seed: u64,
    pub workers: usize,
    pub output_paths: Vec<String>,
    pub spec_echo: SweepSpec,
}

/// Entry point used by the binary.
pub fn main_with_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &Env::from_process(), &mut stdout.lock(), &mut stderr.lock())
}

pub fn run<I, T>(args: I, env: &Env, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{}", e.render());
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        EXIT_USAGE
                    } else {
                        EXIT_OK
                    }
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Theory(a) => cmd_theory(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, env, out),
        Command::Slope(a) => cmd_slope(&a, out),
        Command::DesignCheck(a) => cmd_design_check(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(CmdError { code, message }) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

/// Failure of a subcommand: the exit status and a one-line message for stderr.
#[derive(Debug)]
pub struct CmdError {
    pub code: i32,
    pub message: String,
}

fn usage(message: impl Into<String>) -> CmdError {
    CmdError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn failure(message: impl Into<String>) -> CmdError {
    CmdError {
        code: EXIT_FAILURE,
        message: message.into(),
    }
}

pub type CmdResult = Result<i32, CmdError>;

fn io_failure(path: &Path, e: std::io::Error) -> CmdError {
    failure(format!("{}: {e}", path.display()))
}

/// `%.10g`-style rendering: 10 significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 10;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes `bytes` to a temp file in the same directory, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

// ---- theory ---------------------------------------------------------------

pub fn cmd_theory(args: &TheoryArgs, out: &mut dyn Write) -> CmdResult {
    if args.ns == 0 || args.nr == 0 || args.nd == 0 {
        return Err(usage("antenna counts must be positive"));
    }
    let (ns, nr, nd) = (args.ns, args.nr, args.nd);
    let m = ns.min(nr);
    let mut csv = String::new();
    let _ = writeln!(out, "# {ns}x{nr}x{nd}  M={m}");
    if let Some(rates) = &args.rates {
        if let Some(r) = rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(usage(format!("rate {r} must be nonnegative")));
        }
        let _ = writeln!(out, "{:>10} {:>6} {:>6}  regime", "rate_bpcu", "m_bar", "d");
        csv.push_str("rate_bpcu,m_bar,d_drt,regime\n");
        for &r in rates {
            let mb = theory::m_bar(ns, m, r);
            let d = theory::drt(ns, nr, nd, r);
            let regime = theory::classify_regime(ns, r);
            let _ = writeln!(out, "{:>10} {:>6} {:>6}  {regime}", fmt_sig(r), mb, d);
            csv.push_str(&format!("{},{mb},{d},{regime}\n", fmt_sig(r)));
        }
    }
    if let Some(gains) = &args.mux {
        if let Some(r) = gains.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(usage(format!("multiplexing gain {r} must be nonnegative")));
        }
        let _ = writeln!(out, "{:>10} {:>6}", "r", "d");
        csv.push_str("r_mult,d_dmt\n");
        for &r in gains {
            let d = theory::dmt(ns, nr, nd, r);
            let _ = writeln!(out, "{:>10} {:>6}", fmt_sig(r), fmt_sig(d));
            csv.push_str(&format!("{},{}\n", fmt_sig(r), fmt_sig(d)));
        }
    }
    if let Some(path) = &args.out {
        write_atomic(path, csv.as_bytes()).map_err(|e| io_failure(path, e))?;
    }
    Ok(EXIT_OK)
}

// ---- simulate -------------------------------------------------------------

/// Reads a sweep config; a run manifest is accepted too, in which case its
/// `spec_echo` is replayed.
pub fn load_spec(path: &Path) -> Result<SweepSpec, CmdError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    match toml::from_str::<SweepSpec>(&text) {
        Ok(spec) => Ok(spec),
        Err(e) => match toml::from_str::<RunManifest>(&text) {
            Ok(manifest) => Ok(manifest.spec_echo),
            Err(_) => Err(usage(format!("malformed config {}: {e}", path.display()))),
        },
    }
}

fn apply_overrides(mut spec: SweepSpec, args: &SimulateArgs, env: &Env) -> Result<SweepSpec, CmdError> {
    if let Some(raw) = &env.seed_override {
        spec.master_seed = raw
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV}=`{raw}` is not an unsigned 64-bit integer")))?;
    }
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if let Some(t) = args.trials {
        spec.trials_per_point = t;
    }
    if let Some(m) = args.mode {
        spec.outage_mode = m;
    }
    if let Some(r) = args.rate {
        spec.config.rate_bpcu = r;
    }
    if let Some(grid) = &args.snr_db {
        spec.snr_grid_db = grid.clone();
    }
    if let Some(target) = args.adaptive_target {
        spec.adaptive = Some(simulator::AdaptiveStop { target_outages: target });
    }
    Ok(spec)
}

pub fn curve_to_csv(curve: &OutageCurve) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for p in &curve.points {
        w.write_record([
            fmt_sig(p.snr_db),
            fmt_sig(p.p_out),
            p.trials.to_string(),
            p.outages.to_string(),
            fmt_sig(p.ci_low),
            fmt_sig(p.ci_high),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    snr_db: f64,
    p_out: f64,
    trials: u64,
    outages: u64,
    ci_low: f64,
    ci_high: f64,
}

pub fn read_curve_points(path: &Path) -> Result<Vec<CurvePoint>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(format!("{}: unexpected header {:?}", path.display(), headers));
    }
    r.deserialize::<CsvRow>()
        .map(|row| {
            row.map(|x| CurvePoint {
                snr_db: x.snr_db,
                p_out: x.p_out,
                trials: x.trials,
                outages: x.outages,
                ci_low: x.ci_low,
                ci_high: x.ci_high,
            })
            .map_err(|e| format!("{}: {e}", path.display()))
        })
        .collect()
}

fn gnuplot_script(spec: &SweepSpec) -> String {
    let c = &spec.config;
    format!(
        "# {}x{}x{} R={} bpcu, {} mode\n\
         set datafile separator ','\n\
         set logscale y\n\
         set xlabel 'SNR (dB)'\n\
         set ylabel 'outage probability'\n\
         set grid\n\
         plot '{CURVE_FILE}' every ::1 using 1:2:5:6 with yerrorlines title 'R={}'\n",
        c.n_s,
        c.n_r,
        c.n_d,
        fmt_sig(c.rate_bpcu),
        spec.outage_mode,
        fmt_sig(c.rate_bpcu),
    )
}

pub fn cmd_simulate(args: &SimulateArgs, env: &Env, out: &mut dyn Write) -> CmdResult {
    let spec = apply_overrides(load_spec(&args.config)?, args, env)?;
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let workers = args.threads.unwrap_or_else(rayon::current_num_threads).max(1);

    let started_at = chrono::Utc::now().to_rfc3339();
    let curve = simulator::run_sweep_with_threads(&spec, workers).map_err(|e| match e {
        Error::InvalidConfig(m) => usage(m),
        other => failure(other.to_string()),
    })?;
    let finished_at = chrono::Utc::now().to_rfc3339();

    let curve_path = args.out_dir.join(CURVE_FILE);
    write_atomic(&curve_path, &curve_to_csv(&curve)).map_err(|e| io_failure(&curve_path, e))?;
    let mut outputs = vec![curve_path.display().to_string()];
    if args.plot {
        let plot_path = args.out_dir.join(PLOT_FILE);
        write_atomic(&plot_path, gnuplot_script(&spec).as_bytes()).map_err(|e| io_failure(&plot_path, e))?;
        outputs.push(plot_path.display().to_string());
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at,
        seed: spec.master_seed,
        workers,
        output_paths: outputs,
        spec_echo: spec.clone(),
    };
    let manifest_path = args.out_dir.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| failure(e.to_string()))?;
    write_atomic(&manifest_path, text.as_bytes()).map_err(|e| io_failure(&manifest_path, e))?;

    let c = &spec.config;
    let _ = writeln!(
        out,
        "# {}x{}x{}  R={} bpcu  mode={}  seed={}  d_theory={}",
        c.n_s,
        c.n_r,
        c.n_d,
        fmt_sig(c.rate_bpcu),
        spec.outage_mode,
        spec.master_seed,
        c.d_theory()
    );
    let _ = writeln!(out, "{:>8} {:>14} {:>12} {:>10} {:>14} {:>14}", "snr_db", "p_out", "trials", "outages", "ci_low", "ci_high");
    for p in &curve.points {
        let _ = writeln!(
            out,
            "{:>8} {:>14} {:>12} {:>10} {:>14} {:>14}",
            fmt_sig(p.snr_db),
            fmt_sig(p.p_out),
            p.trials,
            p.outages,
            fmt_sig(p.ci_low),
            fmt_sig(p.ci_high)
        );
    }
    let _ = writeln!(out, "wrote {} and {}", curve_path.display(), manifest_path.display());
    Ok(EXIT_OK)
}

// ---- slope ----------------------------------------------------------------

fn slope_template(args: &SlopeArgs) -> Result<SystemTemplate, CmdError> {
    if let (Some(n_s), Some(n_r), Some(n_d), Some(rate)) = (args.ns, args.nr, args.nd, args.rate) {
        return Ok(SystemTemplate {
            n_s,
            n_r,
            n_d,
            rate_bpcu: rate,
            p_r: None,
        });
    }
    let dir = args.curve.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|_| usage(format!("no antenna config: pass --ns/--nr/--nd/--rate or keep {MANIFEST_FILE} next to the curve")))?;
    let manifest: RunManifest = toml::from_str(&text).map_err(|e| usage(format!("malformed manifest {}: {e}", path.display())))?;
    Ok(manifest.spec_echo.config)
}

pub fn cmd_slope(args: &SlopeArgs, out: &mut dyn Write) -> CmdResult {
    let points = read_curve_points(&args.curve).map_err(usage)?;
    let curve = OutageCurve {
        points,
        mode: OutageMode::Bound,
        config_echo: slope_template(args)?,
    };
    let fit: SlopeFit = match simulator::fit_slope(&curve, args.min_count) {
        Ok(f) => f,
        Err(e @ Error::FitInfeasible { .. }) => return Err(failure(e.to_string())),
        Err(e) => return Err(failure(e.to_string())),
    };
    let window: Vec<String> = fit.window.iter().map(|x| fmt_sig(*x)).collect();
    let _ = writeln!(out, "d_hat     {:.4}", fit.d_hat);
    let _ = writeln!(out, "d_theory  {}", fit.d_theory);
    let _ = writeln!(out, "window    [{}] dB", window.join(", "));
    let _ = writeln!(out, "residual  {}", fmt_sig(fit.residual));
    Ok(EXIT_OK)
}

// ---- design-check ---------------------------------------------------------

/// Worst value of one check and the draw that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Worst {
    pub value: f64,
    pub shape: Option<SystemTemplateShape>,
    /// Draw index within the shape; the RNG stream is `trial_stream(shape_index, draw)`.
    pub draw: u64,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: 0.0,
            shape: None,
            draw: 0,
        }
    }

    fn update(&mut self, value: f64, shape: SystemTemplateShape, draw: u64) {
        if value > self.value || value.is_nan() || self.shape.is_none() {
            *self = Self {
                value: if value.is_nan() { f64::INFINITY } else { value },
                shape: Some(shape),
                draw,
            };
        }
    }
}

/// Aggregated residuals of the identity battery.
#[derive(Debug, Clone)]
pub struct DesignReport {
    pub draws: u64,
    /// Direct vs two-term error covariance, for the designed and for random precoders.
    pub decomposition: Worst,
    /// `L (rho HH^H + I) L^H` vs `rho I - (H^H H + rho^-1 I)^-1`.
    pub signal_covariance: Worst,
    /// Joint MMSE receiver vs second-hop Wiener form.
    pub receiver: Worst,
    /// Relative relay power mismatch against the budget.
    pub relay_power: Worst,
    /// `Tr(B_I R_y B_I^H) / (rho M)` with unit mode gains; must stay below 1.
    pub unit_gain_power: Worst,
    /// Largest trailing `phi` where the second hop has fewer than `M` modes.
    pub zero_modes: Worst,
    pub failures: Vec<String>,
}

const POWER_TOL: f64 = 1e-6;

fn check_draw(
    shape: SystemTemplateShape,
    rho: f64,
    seed: SeedSpec,
    inject_fault: bool,
    report: &mut DesignReport,
) -> crate::Result<()> {
    let SystemTemplateShape(n_s, n_r, n_d) = shape;
    let cfg = SystemConfig::new(n_s, n_r, n_d, rho, 1.0)?;
    let chan = crate::channel::sample_realization(&cfg, seed);
    let design = transceiver::build_design(&cfg, &chan)?;
    let draw = seed.stream_index & ((1 << simulator::TRIAL_BITS) - 1);

    let mut q_direct = design.q.clone();
    if inject_fault {
        let delta = sample_complex_gaussian(n_r, n_s, seed.subkey(99)).scale(1e-3 * (1.0 + design.b.max_abs()));
        q_direct = &(&design.b + &delta) * &design.l;
    }
    let direct = transceiver::error_cov_direct(&cfg, &chan, &q_direct)?;
    let decomposed = transceiver::error_cov_decomposed(&cfg, &chan, &design)?;
    let mut gap = direct.r_e.relative_gap(&decomposed.r_e);

    // arbitrary precoder B = B1 U~^H with a diagonally loaded random B1
    let m = cfg.m_dim();
    let b1 = sample_complex_gaussian(n_r, m, seed.subkey(7)).add_identity(1.0);
    let b = &b1 * &design.u_y_tilde.adjoint();
    let q = &b * &design.l;
    let direct_b = transceiver::error_cov_direct(&cfg, &chan, &q)?;
    let decomposed_b = transceiver::error_cov_decomposed_for(&chan.h, &chan.g, rho, &b, &design.u_y_tilde, &design.lambda_y)?;
    gap = gap.max(direct_b.r_e.relative_gap(&decomposed_b.r_e));
    report.decomposition.update(gap, shape, draw);

    let closed = transceiver::signal_covariance_closed_form(&chan.h, rho)?;
    report.signal_covariance.update(design.r_y.relative_gap(&closed), shape, draw);

    let alt = transceiver::second_hop_receiver(&chan.g, &design.b, &design.r_y)?;
    report.receiver.update(design.w.relative_gap(&alt), shape, draw);

    let power = transceiver::relay_power(&chan.h, &q_direct, rho);
    let mismatch = if design.phi.iter().any(|&p| p > 0.0) {
        (power - cfg.p_r).abs() / cfg.p_r
    } else {
        ((power - cfg.p_r) / cfg.p_r).max(0.0)
    };
    report.relay_power.update(mismatch, shape, draw);

    let b_unit = transceiver::precoder(&design.v_g_tilde, &vec![1.0; m], &design.u_y_tilde);
    let unit_power = (&(&b_unit * &design.r_y) * &b_unit.adjoint()).trace().re;
    report.unit_gain_power.update(unit_power / (rho * m as f64), shape, draw);

    let rank_g = n_r.min(n_d);
    let trailing = design.phi.iter().skip(rank_g).fold(0.0f64, |a, &p| a.max(p));
    report.zero_modes.update(trailing, shape, draw);
    Ok(())
}

/// Scalar anchor: `h = g = 1`, `rho = 1`, `p_r = 1` must give `R_e = 0.75`.
pub fn scalar_anchor() -> crate::Result<f64> {
    let cfg = SystemConfig::new(1, 1, 1, 1.0, 0.0)?.with_relay_power(1.0)?;
    let one = CMatrix::from_real(1, 1, &[1.0])?;
    let chan = ChannelRealization::new(&cfg, one.clone(), one)?;
    let design = transceiver::build_design(&cfg, &chan)?;
    let dec = transceiver::error_cov_decomposed(&cfg, &chan, &design)?;
    let dir = transceiver::error_cov_direct(&cfg, &chan, &design.q)?;
    Ok((dec.r_e[(0, 0)].re - 0.75).abs().max((dir.r_e[(0, 0)].re - 0.75).abs()))
}

/// Runs the identity battery over `draws` seeded channels per shape.
pub fn design_battery(
    shapes: &[SystemTemplateShape],
    draws: u64,
    master_seed: u64,
    snr_db: f64,
    tol: f64,
    inject_fault: bool,
) -> DesignReport {
    let rho = crate::channel::db_to_linear(snr_db);
    let mut report = DesignReport {
        draws,
        decomposition: Worst::new(),
        signal_covariance: Worst::new(),
        receiver: Worst::new(),
        relay_power: Worst::new(),
        unit_gain_power: Worst::new(),
        zero_modes: Worst::new(),
        failures: Vec::new(),
    };
    for (si, &shape) in shapes.iter().enumerate() {
        for t in 0..draws {
            let stream = simulator::trial_stream(si, t);
            if let Err(e) = check_draw(shape, rho, SeedSpec::new(master_seed, stream), inject_fault, &mut report) {
                report.failures.push(format!("{shape} draw {t}: {e}"));
            }
        }
    }
    let checks = [
        ("decomposition", report.decomposition, tol),
        ("signal covariance", report.signal_covariance, tol),
        ("receiver forms", report.receiver, tol),
        ("relay power", report.relay_power, POWER_TOL),
    ];
    for (name, worst, limit) in checks {
        if !(worst.value <= limit) {
            report.failures.push(format!(
                "{name}: residual {:.3e} > {limit:.1e} at {} draw {}",
                worst.value,
                worst.shape.map(|s| s.to_string()).unwrap_or_default(),
                worst.draw
            ));
        }
    }
    if !(report.unit_gain_power.value < 1.0) && report.unit_gain_power.shape.is_some() {
        report.failures.push(format!(
            "unit-gain precoder exceeds rho*M: ratio {:.6} at draw {}",
            report.unit_gain_power.value, report.unit_gain_power.draw
        ));
    }
    if report.zero_modes.value != 0.0 {
        report.failures.push(format!("inactive second-hop mode carries phi = {:.3e}", report.zero_modes.value));
    }
    report
}

pub fn cmd_design_check(args: &DesignCheckArgs, out: &mut dyn Write) -> CmdResult {
    let shapes: Vec<SystemTemplateShape> = args
        .shapes
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, String>>()
        .map_err(usage)?;
    if shapes.is_empty() || args.draws == 0 {
        return Err(usage("need at least one shape and one draw"));
    }
    let report = design_battery(&shapes, args.draws, args.seed, args.snr_db, args.tol, args.inject_fault);
    let mut failures = report.failures.clone();

    let names: Vec<String> = shapes.iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "# shapes {}  draws {}  snr {} dB  seed {}", names.join(","), args.draws, fmt_sig(args.snr_db), args.seed);
    let row = |out: &mut dyn Write, name: &str, w: &Worst| {
        let _ = writeln!(
            out,
            "{name:<20} {:>12.3e}  (worst {} draw {})",
            w.value,
            w.shape.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
            w.draw
        );
    };
    row(out, "decomposition", &report.decomposition);
    row(out, "signal_covariance", &report.signal_covariance);
    row(out, "receiver_forms", &report.receiver);
    row(out, "relay_power", &report.relay_power);
    row(out, "unit_gain_power", &report.unit_gain_power);
    row(out, "zero_modes", &report.zero_modes);

    if shapes.contains(&SystemTemplateShape(1, 1, 1)) {
        match scalar_anchor() {
            Ok(gap) => {
                let _ = writeln!(out, "{:<20} {:>12.3e}  (R_e = 0.75 at h = g = 1)", "scalar_anchor", gap);
                if gap > 1e-12 {
                    failures.push(format!("scalar anchor off by {gap:.3e}"));
                }
            }
            Err(e) => failures.push(format!("scalar anchor: {e}")),
        }
    }

    if failures.is_empty() {
        let _ = writeln!(out, "all checks passed");
        Ok(EXIT_OK)
    } else {
        Err(failure(failures.join("; ")))
    }
}
