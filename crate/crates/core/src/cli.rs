//! Batch front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bloch;
use crate::config::{Config, TableSection};
use crate::error::{Error, Result};
use crate::model::{Handedness, Peaks, SpectrumPoint, SpectrumResult};
use crate::spectra::{self, Calibration, Engine, ForwardModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Worker cap; 0 or unset means one thread per core.
pub const THREADS_ENV: &str = "CHIRAL_SPECTRA_THREADS";

pub const CSV_HEADER: &str = "delta,T,I,I_norm";

#[derive(Debug, Parser)]
#[command(
    name = "chiral-spectra",
    version,
    about = "Chirality-resolved probe spectra of cyclic three-level molecules"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the configured engine.
    #[arg(long, global = true, value_parser = parse_engine)]
    engine: Option<Engine>,
    /// Override the optical depth.
    #[arg(long, global = true, allow_hyphen_values = true)]
    zeta: Option<f64>,
    /// Suppress the summary on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Steady-state density matrix of one enantiomer.
    Steady {
        #[arg(long, value_parser = parse_hand)]
        hand: Option<Handedness>,
    },
    /// Transmission spectrum as CSV.
    Spectrum,
    /// Characteristic peaks as JSON.
    Peaks {
        /// Read a spectrum CSV instead of computing one.
        #[arg(long)]
        spectrum: Option<PathBuf>,
    },
    /// Recover δp from a measured δp′.
    Invert {
        #[arg(long, allow_hyphen_values = true)]
        dp_prime: f64,
    },
    /// δp → δp′ table as CSV.
    Table,
    /// Velocity-averaged spectrum as CSV.
    DopplerSpectrum,
}

fn parse_engine(s: &str) -> std::result::Result<Engine, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_hand(s: &str) -> std::result::Result<Handedness, String> {
    match s {
        "left" | "+" => Ok(Handedness::Left),
        "right" | "-" => Ok(Handedness::Right),
        other => Err(format!(
            "unknown handedness {other:?}, expected left or right"
        )),
    }
}

/// Run the CLI and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let pool = match thread_pool() {
        Ok(pool) => pool,
        Err(e) => return report(&e),
    };
    match pool.install(|| execute(&cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> i32 {
    eprintln!("error: {e}");
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            Error::InvalidParameter(format!(
                "{THREADS_ENV} must be a non-negative integer, got {v:?}"
            ))
        })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))
}

fn load(common: &Common) -> Result<Config> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("--config is required".into()))?;
    let mut config = Config::load(path)?;
    if let Some(engine) = common.engine {
        config.engine = engine;
    }
    if let Some(zeta) = common.zeta {
        config.medium.zeta = zeta;
    }
    Ok(config)
}

fn execute(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    let config = load(common)?;
    let (output, summary) = match &cli.command {
        Command::Steady { hand } => steady(&config, hand.or(config.handedness))?,
        Command::Spectrum => {
            let result = spectra::sweep(
                &config.medium()?,
                &config.molecule()?,
                &config.drive()?,
                &config.grid()?,
                &config.solver()?,
            )?;
            (spectrum_csv(&result.points), peaks_summary(&result))
        }
        Command::Peaks { spectrum } => {
            let peaks = match spectrum {
                Some(path) => {
                    let points = read_spectrum_csv(path)?;
                    spectra::extract_peaks(&points, config.drive.omega32)?
                }
                None => config.solver()?.peaks(
                    &config.medium()?,
                    &config.molecule()?,
                    &config.drive()?,
                )?,
            };
            let summary = format!("dp' = {}", format_g(peaks.dp_prime));
            (to_json(&peaks)?, summary)
        }
        Command::Invert { dp_prime } => invert(&config, *dp_prime)?,
        Command::Table => {
            let mut table = config.table.clone().unwrap_or_default();
            if let Some(zeta) = common.zeta {
                table.zeta = vec![zeta];
            }
            table_csv(&config, &table)?
        }
        Command::DopplerSpectrum => {
            let result = spectra::doppler_sweep(
                &config.medium()?,
                &config.molecule()?,
                &config.drive()?,
                &config.grid()?,
                &config.doppler()?,
            )?;
            (spectrum_csv(&result.points), peaks_summary(&result))
        }
    };
    emit(common.out.as_deref(), &output)?;
    if !common.quiet {
        eprintln!("{summary}");
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    let written = match out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    written.map_err(|e| Error::InvalidParameter(format!("cannot write output: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidParameter(format!("cannot encode JSON: {e}")))?;
    text.push('\n');
    Ok(text)
}

#[derive(Serialize)]
struct SteadyOutput {
    handedness: Handedness,
    delta: f64,
    theta: f64,
    re: [[f64; 3]; 3],
    im: [[f64; 3]; 3],
}

fn steady(config: &Config, hand: Option<Handedness>) -> Result<(String, String)> {
    let hand = hand.unwrap_or(Handedness::Left);
    let drive = config.drive()?;
    let sigma = bloch::steady_state(&config.molecule()?, &drive, hand)?;
    let mut re = [[0.0; 3]; 3];
    let mut im = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let z = sigma.get(i + 1, j + 1);
            re[i][j] = z.re;
            im[i][j] = z.im;
        }
    }
    let summary = format!("Im sigma21 = {}", format_g(sigma.get(2, 1).im));
    let out = SteadyOutput {
        handedness: hand,
        delta: drive.delta,
        theta: drive.theta(),
        re,
        im,
    };
    Ok((to_json(&out)?, summary))
}

#[derive(Serialize)]
struct InvertOutput {
    dp_prime: f64,
    dp: f64,
    zeta: f64,
    omega32: f64,
}

fn invert(config: &Config, dp_prime: f64) -> Result<(String, String)> {
    let model = ForwardModel::new(
        config.medium()?,
        config.molecule()?,
        config.drive()?,
        config.solver()?,
    )?;
    let samples = config.calibration_points();
    if samples < 2 {
        return Err(Error::InvalidParameter(
            "calibration_points must be at least 2".into(),
        ));
    }
    let calibration = Calibration::new(model, &spectra::linspace(-1.0, 1.0, samples))?;
    let dp = spectra::invert_ee(dp_prime, &calibration)?;
    let out = InvertOutput {
        dp_prime,
        dp,
        zeta: model.medium.zeta,
        omega32: model.drive.omega32_abs,
    };
    Ok((to_json(&out)?, format!("dp = {}", format_g(dp))))
}

fn table_csv(config: &Config, table: &TableSection) -> Result<(String, String)> {
    let cells = spectra::calibration_table(
        &table.zeta,
        &table.omega32,
        &table.dp,
        &config.table_setup()?,
    )?;
    let mut csv = String::from("zeta,omega32,dp,dp_prime\n");
    for c in &cells {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            format_g(c.zeta),
            format_g(c.omega32_abs),
            format_g(c.dp),
            format_g(c.dp_prime)
        );
    }
    Ok((csv, format!("{} cells", cells.len())))
}

fn peaks_summary(result: &SpectrumResult) -> String {
    match &result.peaks {
        Some(p) => format!(
            "h+ = {}, h- = {}, dp' = {}",
            format_g(p.h_plus),
            format_g(p.h_minus),
            format_g(p.dp_prime)
        ),
        None => "no absorption peaks".to_string(),
    }
}

/// Render spectrum points as CSV.
pub fn spectrum_csv(points: &[SpectrumPoint]) -> String {
    let mut csv = String::with_capacity(64 * (points.len() + 1));
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for p in points {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            format_g(p.delta),
            format_g(p.transmission),
            format_g(p.absorption),
            format_g(p.normalized)
        );
    }
    csv
}

/// Parse CSV written by [`spectrum_csv`].
pub fn parse_spectrum_csv(text: &str) -> Result<Vec<SpectrumPoint>> {
    let bad =
        |line: usize, msg: &str| Error::InvalidParameter(format!("spectrum line {line}: {msg}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == CSV_HEADER => {}
        _ => return Err(bad(1, "expected header delta,T,I,I_norm")),
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad(i + 1, "unparsable number"))?;
        let [delta, transmission, absorption, normalized] = fields[..] else {
            return Err(bad(i + 1, "expected four columns"));
        };
        points.push(SpectrumPoint {
            delta,
            transmission,
            absorption,
            normalized,
        });
    }
    if points.windows(2).any(|w| w[1].delta < w[0].delta) {
        return Err(Error::InvalidParameter(
            "spectrum detunings must be sorted".into(),
        ));
    }
    Ok(points)
}

fn read_spectrum_csv(path: &Path) -> Result<Vec<SpectrumPoint>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
    parse_spectrum_csv(&text)
}

/// Peaks of a spectrum CSV.
pub fn peaks_from_csv(text: &str, omega32_abs: f64) -> Result<Peaks> {
    spectra::extract_peaks(&parse_spectrum_csv(text)?, omega32_abs)
}

/// Twelve significant digits, C `%.12g` style.
pub fn format_g(x: f64) -> String {
    const SIG: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..SIG).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG - 1 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
