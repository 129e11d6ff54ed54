//! Command-line front end. Inputs use the units quoted for the hardware
//! (mm, MHz, GHz) and are converted to SI angular units before any
//! computation. Precedence: flags, then the `--config` file, then the
//! built-in fluxonium defaults.

use std::f64::consts::PI;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use num_complex::Complex64;

use crate::dispersion::{
    decompose_window, group_velocity_analytic, group_velocity_numeric, window_width_analytic,
    window_width_numeric,
};
use crate::error::Error;
use crate::output::{plot_script, Format, PlotSpec, Table};
use crate::params::{AtomParams, DeviceConfig, RateConvention};
use crate::scattering::{wavelength, ArrayGeometry, ScatteringModel};
use crate::spectra::{beer_scan, sweep_transmission, DetuningGrid};
use crate::storage::{
    efficiency_sweep, evaluate_storage, solve_rabi, solve_separation, solve_sigma, PulseGrid,
    StorageOptions, StorageResult,
};

/// Atom counts: comma-separated values or inclusive ranges `a:b[:step]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NList(pub Vec<usize>);

impl FromStr for NList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let nums: Vec<usize> = part
                .split(':')
                .map(|x| {
                    x.trim()
                        .parse::<usize>()
                        .map_err(|e| format!("bad count '{x}': {e}"))
                })
                .collect::<Result<_, _>>()?;
            match nums[..] {
                [n] => out.push(n),
                [a, b] if a <= b => out.extend(a..=b),
                [a, b, step] if a <= b && step > 0 => out.extend((a..=b).step_by(step)),
                _ => return Err(format!("bad range '{part}'")),
            }
        }
        if out.is_empty() {
            return Err("empty atom-count list".into());
        }
        Ok(NList(out))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "saa-memory",
    version,
    about = "Transfer-matrix simulator for EIT, slow light and pulse storage in an array of artificial atoms"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
#[command(next_help_heading = "Device and output")]
pub struct CommonArgs {
    /// Flat `key = value` file with values for any flag of the command
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Metastable decay gamma_sg, MHz (scaled by the rate convention)
    #[arg(long, global = true, value_name = "MHZ", default_value_t = 0.167)]
    pub gamma_sg_mhz: f64,
    /// gamma_eg in units of gamma_sg (dimensionless)
    #[arg(long, global = true, value_name = "RATIO", default_value_t = 173.0)]
    pub gamma_eg_ratio: f64,
    /// gamma_es in units of gamma_sg (dimensionless)
    #[arg(long, global = true, value_name = "RATIO", default_value_t = 40.0)]
    pub gamma_es_ratio: f64,
    /// Probe transition frequency omega_eg / 2pi, GHz
    #[arg(long, global = true, value_name = "GHZ", default_value_t = 10.4)]
    pub omega_eg_ghz: f64,
    /// Control transition frequency omega_es / 2pi, GHz
    #[arg(long, global = true, value_name = "GHZ", default_value_t = 6.99)]
    pub omega_es_ghz: f64,
    /// Phase velocity of the transmission line, m/s
    #[arg(long, global = true, value_name = "M_PER_S", default_value_t = 1.2e8)]
    pub line_speed: f64,
    /// Quoted MHz rates mean x*1e6 rad/s (angular) or 2pi*x*1e6 rad/s (ordinary)
    #[arg(
        long,
        global = true,
        value_name = "angular|ordinary",
        default_value = "angular"
    )]
    pub rate_convention: RateConvention,
    /// Output file; standard output when absent
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output format
    #[arg(long, global = true, value_name = "csv|json", default_value = "csv")]
    pub format: Format,
    /// Also write `<out>.py`, a matplotlib script plotting the CSV (needs --out)
    #[arg(long, global = true)]
    pub emit_plot: bool,
}

impl CommonArgs {
    pub fn device(&self) -> DeviceConfig {
        DeviceConfig {
            gamma_sg_mhz: self.gamma_sg_mhz,
            gamma_eg_ratio: self.gamma_eg_ratio,
            gamma_es_ratio: self.gamma_es_ratio,
            omega_eg_ghz: self.omega_eg_ghz,
            omega_es_ghz: self.omega_es_ghz,
            line_speed: self.line_speed,
            rate_convention: self.rate_convention,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Transmission spectrum T(delta) of an n-atom array
    #[command(args_override_self = true)]
    Spectrum(SpectrumArgs),
    /// Optical depth alpha(n) on resonance with the control off, with a linear fit
    #[command(args_override_self = true)]
    Depth(DepthArgs),
    /// Group velocity from the phase of the transmitted amplitude and from the independent-atom formula
    #[command(args_override_self = true)]
    Dispersion(DispersionArgs),
    /// Transparency window width versus atom count
    #[command(args_override_self = true)]
    Width(WidthArgs),
    /// Two-branch decomposition of M11 and the resulting window width
    #[command(args_override_self = true)]
    Decompose(DecomposeArgs),
    /// Storage efficiency for one array, solving unspecified operating parameters
    #[command(args_override_self = true)]
    Store(StoreArgs),
    /// Storage efficiency over a list of atom counts
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Depth(_) => "depth",
            Command::Dispersion(_) => "dispersion",
            Command::Width(_) => "width",
            Command::Decompose(_) => "decompose",
            Command::Store(_) => "store",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SpectrumArgs {
    /// Number of atoms (count)
    #[arg(long, value_name = "COUNT", default_value_t = 100)]
    pub n: usize,
    /// Inter-atom spacing, mm
    #[arg(long, value_name = "MM", default_value_t = 1.0)]
    pub l_mm: f64,
    /// Control Rabi frequency |Omega|, MHz (scaled by the rate convention)
    #[arg(long, value_name = "MHZ", default_value_t = 309.0)]
    pub rabi_mhz: f64,
    /// Detuning half-span delta / 2pi, MHz
    #[arg(long, value_name = "MHZ", default_value_t = 500.0)]
    pub span_mhz: f64,
    /// Number of detuning samples (count)
    #[arg(long, value_name = "COUNT", default_value_t = 4096)]
    pub points: usize,
    /// Use the independent-atom transmission (1-r)^n instead of the full transfer matrix
    #[arg(long)]
    pub scattering_free: bool,
}

#[derive(Args, Debug, Clone)]
pub struct DepthArgs {
    /// Inter-atom spacing, mm
    #[arg(long, value_name = "MM", default_value_t = 2.90)]
    pub l_mm: f64,
    /// Largest atom count in the scan (count)
    #[arg(long, value_name = "COUNT", default_value_t = 40)]
    pub n_max: usize,
}

#[derive(Args, Debug, Clone)]
pub struct DispersionArgs {
    /// Inter-atom spacing, mm
    #[arg(long, value_name = "MM", default_value_t = 1.50)]
    pub l_mm: f64,
    /// Control Rabi frequency |Omega|, MHz (scaled by the rate convention)
    #[arg(long, value_name = "MHZ", default_value_t = 218.0)]
    pub rabi_mhz: f64,
    /// Atom counts: list or ranges a:b[:step] (count)
    #[arg(long, value_name = "LIST", default_value = "10,20,50,100")]
    pub n: NList,
}

#[derive(Args, Debug, Clone)]
pub struct WidthArgs {
    /// Inter-atom spacing, mm
    #[arg(long, value_name = "MM", default_value_t = 1.50)]
    pub l_mm: f64,
    /// Control Rabi frequency |Omega|, MHz (scaled by the rate convention)
    #[arg(long, value_name = "MHZ", default_value_t = 218.0)]
    pub rabi_mhz: f64,
    /// Atom counts, at least 2: list or ranges a:b[:step] (count)
    #[arg(long, value_name = "LIST", default_value = "10:150")]
    pub n: NList,
}

#[derive(Args, Debug, Clone)]
pub struct DecomposeArgs {
    /// Inter-atom spacing, mm
    #[arg(long, value_name = "MM", default_value_t = 1.50)]
    pub l_mm: f64,
    /// Control Rabi frequency |Omega|, MHz (scaled by the rate convention)
    #[arg(long, value_name = "MHZ", default_value_t = 218.0)]
    pub rabi_mhz: f64,
    /// Atom counts at which to evaluate the width: list or ranges a:b[:step] (count)
    #[arg(long, value_name = "LIST", default_value = "2:200")]
    pub n: NList,
}

#[derive(Args, Debug, Clone)]
pub struct StorageArgs {
    /// Independent-atom resonant transmission the control must reach (fraction)
    #[arg(long, value_name = "FRACTION", default_value_t = 0.99)]
    pub target_transmission: f64,
    /// Group velocity as a fraction of the line speed (dimensionless)
    #[arg(long, value_name = "FRACTION", default_value_t = 0.01)]
    pub vg_fraction: f64,
    /// Pulse energy fraction clipped by the medium (fraction)
    #[arg(long, value_name = "FRACTION", default_value_t = 0.02)]
    pub clip: f64,
    /// Pulse grid half-span in units of sigma (dimensionless)
    #[arg(long, value_name = "SIGMAS", default_value_t = 10.0)]
    pub span_sigma: f64,
    /// Pulse grid samples (count, power of two)
    #[arg(long, value_name = "COUNT", default_value_t = 1 << 14)]
    pub points: usize,
    /// Zero-padding factor before the time transform (count, power of two)
    #[arg(long, value_name = "FACTOR", default_value_t = 8)]
    pub oversample: usize,
    /// Storage time before retrieval, us
    #[arg(long, value_name = "US", default_value_t = 0.0)]
    pub hold_us: f64,
    /// Multiplier kappa in the decay exp(-t_hold gamma_sg kappa) (dimensionless, 0 disables)
    #[arg(long, value_name = "KAPPA", default_value_t = 0.0)]
    pub decay_kappa: f64,
}

impl StorageArgs {
    pub fn options(&self) -> Result<StorageOptions, CliError> {
        let grid = PulseGrid {
            span: self.span_sigma,
            points: self.points,
            oversample: self.oversample,
        };
        grid.validate()?;
        for (name, v) in [
            ("target-transmission", self.target_transmission),
            ("vg-fraction", self.vg_fraction),
            ("clip", self.clip),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(CliError::Config(format!(
                    "--{name} = {v} must lie in (0, 1)"
                )));
            }
        }
        if !(self.hold_us >= 0.0 && self.decay_kappa >= 0.0) {
            return Err(CliError::Config(
                "--hold-us and --decay-kappa must be non-negative".into(),
            ));
        }
        Ok(StorageOptions {
            target_transmission: self.target_transmission,
            vg_fraction: self.vg_fraction,
            target_pass: 1.0 - self.clip,
            grid,
            hold_time: self.hold_us * 1e-6,
            decay_kappa: self.decay_kappa,
        })
    }

    fn describe(&self, table: &mut Table) {
        table
            .meta("target_transmission", self.target_transmission)
            .meta("vg_fraction", self.vg_fraction)
            .meta("clip", self.clip)
            .meta("span_sigma", self.span_sigma)
            .meta("points", self.points)
            .meta("oversample", self.oversample)
            .meta("hold_us", self.hold_us)
            .meta("decay_kappa", self.decay_kappa);
    }
}

#[derive(Args, Debug, Clone)]
pub struct StoreArgs {
    /// Number of atoms (count)
    #[arg(long, value_name = "COUNT", default_value_t = 100)]
    pub n: usize,
    /// Inter-atom spacing, mm; solved from the group-velocity target when absent
    #[arg(long, value_name = "MM")]
    pub l_mm: Option<f64>,
    /// Control Rabi frequency |Omega|, MHz; solved from the transmission target when absent
    #[arg(long, value_name = "MHZ")]
    pub rabi_mhz: Option<f64>,
    /// Pulse spectral width sigma, MHz (rate convention); solved from the clipping target when absent
    #[arg(long, value_name = "MHZ")]
    pub sigma_mhz: Option<f64>,
    #[command(flatten)]
    pub storage: StorageArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Atom counts: list or ranges a:b[:step] (count)
    #[arg(long, value_name = "LIST", default_value = "5,10,20,50,100,200,300")]
    pub n: NList,
    #[command(flatten)]
    pub storage: StorageArgs,
}

/// Failure of a CLI run, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Clap(clap::Error),
    Config(String),
    Numeric(Error),
    Io(String),
    Partial(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) => e.exit_code(),
            CliError::Config(_) => 2,
            CliError::Numeric(e) => match e {
                Error::InvalidParameter(_) | Error::ZeroLength(_) | Error::NonPowerOfTwo(_) => 2,
                _ => 1,
            },
            CliError::Io(_) | CliError::Partial(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Clap(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Numeric(e) => write!(f, "{e}"),
            CliError::Io(m) => f.write_str(m),
            CliError::Partial(k) => write!(f, "{k} sweep point(s) failed"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numeric(e)
    }
}

impl From<clap::Error> for CliError {
    fn from(e: clap::Error) -> Self {
        CliError::Clap(e)
    }
}

/// Runs the program on `args` (including the program name) and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let raw: Vec<OsString> = args.into_iter().map(Into::into).collect();
    match parse(&raw).and_then(|cli| execute(&cli)) {
        Ok(()) => 0,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses the arguments, folding in the `--config` file underneath the
/// explicit flags.
pub fn parse(raw: &[OsString]) -> Result<Cli, CliError> {
    let mut raw = raw.to_vec();
    if raw.is_empty() {
        raw.push("saa-memory".into());
    }
    let first = Cli::from_arg_matches(&Cli::command().try_get_matches_from(&raw)?)?;
    let Some(path) = first.common.config.clone() else {
        return Ok(first);
    };
    let sub = first.command.name();
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let injected = config_arguments(&text, sub)?;
    let pos = raw
        .iter()
        .skip(1)
        .position(|a| a == sub)
        .map(|p| p + 1)
        .ok_or_else(|| CliError::Config("cannot locate the subcommand".into()))?;
    // later occurrences win, so the file goes before every explicit flag
    let mut argv = vec![raw[0].clone(), OsString::from(sub)];
    argv.extend(injected);
    argv.extend(raw[1..pos].iter().cloned());
    argv.extend(raw[pos + 1..].iter().cloned());
    Ok(Cli::from_arg_matches(
        &Cli::command().try_get_matches_from(argv)?,
    )?)
}

/// Turns `key = value` lines into flags of subcommand `sub`. Keys are flag
/// names without the dashes; `_` and `-` are interchangeable.
pub fn config_arguments(text: &str, sub: &str) -> Result<Vec<OsString>, CliError> {
    let mut cmd = Cli::command();
    cmd.build();
    let sub_cmd = cmd
        .find_subcommand(sub)
        .ok_or_else(|| CliError::Config(format!("unknown command '{sub}'")))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let arg = sub_cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .filter(|_| !matches!(key.as_str(), "config" | "help" | "version"))
            .ok_or_else(|| {
                CliError::Config(format!("line {}: unknown key '{key}' for '{sub}'", i + 1))
            })?;
        if arg.get_action().takes_values() {
            out.push(format!("--{key}").into());
            out.push(value.into());
        } else {
            match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => out.push(format!("--{key}").into()),
                "false" | "no" | "0" => {}
                _ => {
                    return Err(CliError::Config(format!(
                        "line {}: '{key}' expects true or false, got '{value}'",
                        i + 1
                    )))
                }
            }
        }
    }
    Ok(out)
}

fn complex(z: Complex64) -> String {
    format!("{:e}{:+e}i", z.re, z.im)
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("--{name} = {v} must be positive")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<f64, CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!(
            "--{name} = {v} must be non-negative"
        )))
    }
}

struct Context {
    common: CommonArgs,
    device: DeviceConfig,
    atom: AtomParams,
}

impl Context {
    fn table(&self, command: &str, columns: &[&str]) -> Table {
        let d = &self.device;
        let mut t = Table::new(columns);
        t.meta("program", concat!("saa-memory ", env!("CARGO_PKG_VERSION")))
            .meta("command", command)
            .meta("rate_convention", d.rate_convention)
            .meta("gamma_sg_mhz", d.gamma_sg_mhz)
            .meta("gamma_eg_ratio", d.gamma_eg_ratio)
            .meta("gamma_es_ratio", d.gamma_es_ratio)
            .meta("omega_eg_ghz", d.omega_eg_ghz)
            .meta("omega_es_ghz", d.omega_es_ghz)
            .meta("line_speed_m_s", d.line_speed);
        t
    }

    fn rate(&self, mhz: f64) -> f64 {
        self.device.rate(mhz)
    }

    fn geometry(&self, n: usize, l_mm: f64) -> Result<ArrayGeometry, CliError> {
        Ok(ArrayGeometry::new(
            n,
            non_negative("l-mm", l_mm)? * 1e-3,
            self.device.line_speed,
        )?)
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let common = cli.common.clone();
    if common.emit_plot && common.out.is_none() {
        return Err(CliError::Config("--emit-plot needs --out".into()));
    }
    if common.emit_plot && common.format == Format::Json {
        return Err(CliError::Config(
            "--emit-plot plots CSV output; use --format csv".into(),
        ));
    }
    let device = common.device();
    device.validate()?;
    let ctx = Context {
        atom: device.atom()?,
        device,
        common,
    };
    let (table, plot, failures) = match &cli.command {
        Command::Spectrum(a) => spectrum(&ctx, a)?,
        Command::Depth(a) => depth(&ctx, a)?,
        Command::Dispersion(a) => dispersion(&ctx, a)?,
        Command::Width(a) => width(&ctx, a)?,
        Command::Decompose(a) => decompose(&ctx, a)?,
        Command::Store(a) => store(&ctx, a)?,
        Command::Sweep(a) => sweep(&ctx, a)?,
    };
    emit(&table, &ctx.common, &plot)?;
    if failures > 0 {
        return Err(CliError::Partial(failures));
    }
    Ok(())
}

fn emit(table: &Table, common: &CommonArgs, plot: &PlotSpec) -> Result<(), CliError> {
    let text = table.render(common.format);
    let Some(path) = &common.out else {
        print!("{text}");
        return Ok(());
    };
    write_file(path, &text)?;
    for (k, v) in &table.summary {
        println!("{k} = {v}");
    }
    if common.emit_plot {
        let mut script = path.clone().into_os_string();
        script.push(".py");
        write_file(
            Path::new(&script),
            &plot_script(&path.display().to_string(), plot),
        )?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

type Outcome = (Table, PlotSpec, usize);

fn plot(title: &str, x: &str, ys: &[&str], x_label: &str, y_label: &str) -> PlotSpec {
    PlotSpec {
        title: title.into(),
        x: x.into(),
        ys: ys.iter().map(|s| s.to_string()).collect(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        log_y: false,
        x_scale: 1.0,
    }
}

fn spectrum(ctx: &Context, a: &SpectrumArgs) -> Result<Outcome, CliError> {
    let geom = ctx.geometry(a.n, a.l_mm)?;
    let rabi = ctx.rate(non_negative("rabi-mhz", a.rabi_mhz)?);
    let grid = DetuningGrid::new(2.0 * PI * positive("span-mhz", a.span_mhz)? * 1e6, a.points)?;
    let model = if a.scattering_free {
        ScatteringModel::ScatteringFree
    } else {
        ScatteringModel::Full
    };
    let resp = sweep_transmission(&ctx.atom, &grid, rabi, &geom, model)?;
    let mut t = ctx.table(
        "spectrum",
        &["delta_rad_s", "re_amp", "im_amp", "transmission"],
    );
    t.meta("n", a.n)
        .meta("l_mm", a.l_mm)
        .meta("rabi_mhz", a.rabi_mhz)
        .meta("span_mhz", a.span_mhz)
        .meta("points", a.points)
        .meta(
            "model",
            if a.scattering_free {
                "scattering-free"
            } else {
                "full"
            },
        )
        .meta("units", "delta in rad/s; amplitude 1/M11 dimensionless");
    let trans = resp.transmission();
    t.summary("T0", trans[resp.zero_index()])
        .summary("peak_at_zero", resp.peak_at_zero());
    if rabi > 0.0 {
        let asym = resp.asymmetry(rabi / 2.0)?;
        t.summary("asymmetry_ratio", asym.ratio);
    }
    for row in resp.rows() {
        t.push(row);
    }
    let mut p = plot(
        "Transmission",
        "delta_rad_s",
        &["transmission"],
        "detuning / 2pi (MHz)",
        "T",
    );
    p.x_scale = 1.0 / (2.0 * PI * 1e6);
    Ok((t, p, 0))
}

fn depth(ctx: &Context, a: &DepthArgs) -> Result<Outcome, CliError> {
    let spacing = positive("l-mm", a.l_mm)? * 1e-3;
    let scan = beer_scan(&ctx.atom, spacing, ctx.device.line_speed, a.n_max)?;
    let lambda = wavelength(ctx.atom.omega_eg(), ctx.device.line_speed);
    let mut t = ctx.table("depth", &["n", "alpha"]);
    t.meta("l_mm", a.l_mm)
        .meta("n_max", a.n_max)
        .meta("units", "alpha = -ln T dimensionless; Omega = 0, delta = 0");
    t.summary("slope", scan.fit.slope)
        .summary("intercept", scan.fit.intercept)
        .summary("r_squared", scan.fit.r_squared)
        .summary("wavelength_m", lambda)
        .summary("l_over_wavelength", spacing / lambda);
    for (n, alpha) in &scan.records {
        t.push(vec![*n as f64, *alpha]);
    }
    Ok((t, plot("Optical depth", "n", &["alpha"], "n", "alpha"), 0))
}

fn dispersion(ctx: &Context, a: &DispersionArgs) -> Result<Outcome, CliError> {
    let rabi = ctx.rate(positive("rabi-mhz", a.rabi_mhz)?);
    let mut t = ctx.table("dispersion", &["n", "vg_numeric", "vg_analytic"]);
    t.meta("l_mm", a.l_mm)
        .meta("rabi_mhz", a.rabi_mhz)
        .meta("units", "group velocities in m/s");
    let mut worst: f64 = 0.0;
    for &n in &a.n.0 {
        let geom = ctx.geometry(n, a.l_mm)?;
        let num = group_velocity_numeric(&ctx.atom, rabi, &geom)?.group_velocity;
        let ana = group_velocity_analytic(&ctx.atom, rabi, &geom)?.group_velocity;
        worst = worst.max((num / ana - 1.0).abs());
        t.push(vec![n as f64, num, ana]);
    }
    t.summary("max_relative_deviation", worst);
    Ok((
        t,
        plot(
            "Group velocity",
            "n",
            &["vg_numeric", "vg_analytic"],
            "n",
            "v_g (m/s)",
        ),
        0,
    ))
}

fn width(ctx: &Context, a: &WidthArgs) -> Result<Outcome, CliError> {
    if let Some(&n) = a.n.0.iter().find(|&&n| n < 2) {
        return Err(Error::ZeroLength(n).into());
    }
    let rabi = ctx.rate(positive("rabi-mhz", a.rabi_mhz)?);
    let decomposition = decompose_window(&ctx.atom, rabi, &ctx.geometry(2, a.l_mm)?)?;
    let mut t = ctx.table(
        "width",
        &["n", "w_numeric", "w_analytic", "w_decomposition"],
    );
    t.meta("l_mm", a.l_mm)
        .meta("rabi_mhz", a.rabi_mhz)
        .meta("units", "window widths in rad/s");
    for &n in &a.n.0 {
        let geom = ctx.geometry(n, a.l_mm)?;
        t.push(vec![
            n as f64,
            window_width_numeric(&ctx.atom, rabi, &geom)?.width,
            window_width_analytic(&ctx.atom, rabi, n)?.width,
            decomposition.width(n)?,
        ]);
    }
    Ok((
        t,
        plot(
            "Window width",
            "n",
            &["w_numeric", "w_analytic", "w_decomposition"],
            "n",
            "w (rad/s)",
        ),
        0,
    ))
}

fn decompose(ctx: &Context, a: &DecomposeArgs) -> Result<Outcome, CliError> {
    let rabi = ctx.rate(positive("rabi-mhz", a.rabi_mhz)?);
    let d = decompose_window(&ctx.atom, rabi, &ctx.geometry(2, a.l_mm)?)?;
    let c = &d.coeffs;
    let m = d.modulation();
    let mut t = ctx.table("decompose", &["n", "w_decomposition", "w_modulation"]);
    t.meta("l_mm", a.l_mm)
        .meta("rabi_mhz", a.rabi_mhz)
        .meta("units", "widths in rad/s; modulation coefficients in s^2");
    let defects = c.square_defects();
    t.summary("F1", complex(c.f[0]))
        .summary("F2", complex(c.f[1]))
        .summary("G1", complex(c.g[0]))
        .summary("G2", complex(c.g[1]))
        .summary("F1F2_defect", c.product_defect())
        .summary("aG_defect_1", defects[0])
        .summary("aG_defect_2", defects[1])
        .summary("linear", m.linear)
        .summary("offset", m.offset)
        .summary("amplitude", m.amplitude)
        .summary("phase", m.phase)
        .summary("damping", m.damping)
        .summary("frequency", m.frequency);
    for &n in &a.n.0 {
        t.push(vec![n as f64, d.width(n)?, m.width(n)]);
    }
    Ok((
        t,
        plot(
            "Window decomposition",
            "n",
            &["w_decomposition", "w_modulation"],
            "n",
            "w (rad/s)",
        ),
        0,
    ))
}

const STORAGE_COLUMNS: [&str; 8] = [
    "n",
    "eta",
    "l_m",
    "rabi_rad_s",
    "sigma_rad_s",
    "T0",
    "vg_m_s",
    "transit_s",
];

fn storage_row(r: &StorageResult) -> Vec<f64> {
    vec![
        r.n as f64,
        r.eta,
        r.spacing,
        r.rabi,
        r.sigma,
        r.t0,
        r.group_velocity,
        r.transit_time,
    ]
}

const STORAGE_UNITS: &str =
    "l in m; rabi and sigma in rad/s; vg in m/s; transit in s; T0 = full transfer-matrix transmission at delta = 0";

fn store(ctx: &Context, a: &StoreArgs) -> Result<Outcome, CliError> {
    let options = a.storage.options()?;
    let atom = &ctx.atom;
    let c = ctx.device.line_speed;
    let rabi = match a.rabi_mhz {
        Some(x) => ctx.rate(positive("rabi-mhz", x)?),
        None => solve_rabi(atom, a.n, options.target_transmission)?,
    };
    let geom = match a.l_mm {
        Some(x) => ctx.geometry(a.n, x)?,
        None => ArrayGeometry::new(
            a.n,
            solve_separation(atom, a.n, rabi, options.vg_fraction, c)?,
            c,
        )?,
    };
    let sigma = match a.sigma_mhz {
        Some(x) => ctx.rate(positive("sigma-mhz", x)?),
        None => solve_sigma(atom, rabi, &geom, options.target_pass, options.grid)?,
    };
    let r = evaluate_storage(atom, &geom, rabi, sigma, &options)?;
    let mut t = ctx.table("store", &STORAGE_COLUMNS);
    a.storage.describe(&mut t);
    t.meta("units", STORAGE_UNITS);
    t.summary("eta", r.eta)
        .summary("T0_scattering_free", r.t0_scattering_free)
        .summary("clipped_fraction", r.clipped_fraction);
    t.push(storage_row(&r));
    t.details = Some(serde_json::to_value(r).expect("result serialises"));
    Ok((t, plot("Storage efficiency", "n", &["eta"], "n", "eta"), 0))
}

fn sweep(ctx: &Context, a: &SweepArgs) -> Result<Outcome, CliError> {
    let options = a.storage.options()?;
    let entries = efficiency_sweep(&ctx.atom, &a.n.0, ctx.device.line_speed, &options);
    let mut t = ctx.table("sweep", &STORAGE_COLUMNS);
    a.storage.describe(&mut t);
    t.meta("units", STORAGE_UNITS);
    let mut details = Vec::new();
    let mut failures = 0;
    for entry in &entries {
        match &entry.result {
            Ok(r) => {
                t.summary(&format!("eta_{}", r.n), r.eta);
                t.push(storage_row(r));
                details.push(serde_json::to_value(r).expect("result serialises"));
            }
            Err(e) => {
                eprintln!("error: n = {}: {e}", entry.n);
                failures += 1;
            }
        }
    }
    t.details = Some(serde_json::Value::Array(details));
    Ok((
        t,
        plot("Storage efficiency", "n", &["eta"], "n", "eta"),
        failures,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<OsString> {
        s.split_whitespace().map(OsString::from).collect()
    }

    #[test]
    fn n_lists_and_ranges() {
        assert_eq!("5,100,300".parse::<NList>().unwrap().0, vec![5, 100, 300]);
        assert_eq!("2:4,10".parse::<NList>().unwrap().0, vec![2, 3, 4, 10]);
        assert_eq!("10:20:5".parse::<NList>().unwrap().0, vec![10, 15, 20]);
        assert!("5:2".parse::<NList>().is_err());
        assert!("".parse::<NList>().is_err());
    }

    #[test]
    fn defaults_are_the_fluxonium_set() {
        let cli = parse(&argv("saa-memory spectrum")).unwrap();
        assert_eq!(cli.common.device(), DeviceConfig::default());
    }

    #[test]
    fn config_keys_become_flags() {
        let args = config_arguments(
            "# comment\ngamma_sg_mhz = 0.2\nl-mm = 0.3\nscattering-free = true\n",
            "spectrum",
        )
        .unwrap();
        let text: Vec<String> = args
            .iter()
            .map(|a| a.to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            text,
            [
                "--gamma-sg-mhz",
                "0.2",
                "--l-mm",
                "0.3",
                "--scattering-free"
            ]
        );
    }

    #[test]
    fn unknown_config_key_rejected() {
        let e = config_arguments("n-max = 3\n", "spectrum").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(config_arguments("config = x\n", "spectrum").is_err());
        assert!(config_arguments("no equals sign\n", "spectrum").is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = std::env::temp_dir().join(format!("saa-cli-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        fs::write(&path, "l_mm = 0.3\nn = 7\ngamma-sg-mhz = 0.2\n").unwrap();
        let cfg = path.display().to_string();
        let cli = parse(&argv(&format!(
            "saa-memory --gamma-sg-mhz 0.3 spectrum --config {cfg} --n 12"
        )))
        .unwrap();
        let Command::Spectrum(a) = &cli.command else {
            panic!()
        };
        assert_eq!(a.n, 12);
        assert_eq!(a.l_mm, 0.3);
        assert_eq!(cli.common.gamma_sg_mhz, 0.3);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn width_rejects_single_atom() {
        let cli = parse(&argv("saa-memory width --n 1")).unwrap();
        let e = execute(&cli).unwrap_err();
        assert!(matches!(e, CliError::Numeric(Error::ZeroLength(1))));
    }

    #[test]
    fn plot_needs_out_file() {
        let cli = parse(&argv("saa-memory depth --emit-plot")).unwrap();
        assert_eq!(execute(&cli).unwrap_err().exit_code(), 2);
    }
}
