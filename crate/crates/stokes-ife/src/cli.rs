//! Command-line driver: parse run parameters (flags and optional config
//! file), execute a single solve, a convergence study, or the property-check
//! suites, and emit results as publication-style tables, CSV, JSON, or a
//! self-contained loglog plot script.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Parser;

use crate::analysis::{compute_errors, run_study, solve_problem, ExactStokes, StudyRow};
use crate::assembly::SchemeParams;
use crate::verify;
use crate::{Error, Result};

/// Fixed seed for `verify` mode so repeated runs check identical cases.
pub const VERIFY_SEED: u64 = 42;

/// What the binary should do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// One discretization and solve at a single resolution.
    Solve,
    /// A sequence of resolutions with error norms and convergence rates.
    Study,
    /// The randomized property-check suites; no PDE solve parameters needed.
    Verify,
}

/// Output serialization for solve/study reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Json,
    Plot,
}

/// Fully validated run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    /// Mesh resolutions; exactly one entry in solve mode.
    pub ns: Vec<usize>,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub delta: f64,
    pub eta: f64,
    pub r0: f64,
    pub format: Format,
    /// Output file; stdout when absent.
    pub out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "solve" => Ok(Mode::Solve),
        "study" => Ok(Mode::Study),
        "verify" => Ok(Mode::Verify),
        other => Err(usage(format!("unknown mode '{other}' (expected solve, study, or verify)"))),
    }
}

fn parse_format(s: &str) -> Result<Format> {
    match s {
        "table" => Ok(Format::Table),
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        "plot" => Ok(Format::Plot),
        other => {
            Err(usage(format!("unknown format '{other}' (expected table, csv, json, or plot)")))
        }
    }
}

fn parse_n_list(s: &str) -> Result<Vec<usize>> {
    let mut ns = Vec::new();
    for tok in s.split(',') {
        let n: usize = tok
            .trim()
            .parse()
            .map_err(|_| usage(format!("invalid resolution '{tok}' in --n")))?;
        if n < 2 || n % 2 != 0 {
            return Err(usage(format!("resolution N={n} must be even and at least 2")));
        }
        ns.push(n);
    }
    if ns.is_empty() {
        return Err(usage("--n needs at least one resolution"));
    }
    Ok(ns)
}

#[derive(Parser, Debug)]
#[command(
    name = "stokes-ife",
    version,
    about = "Immersed CR-P0 finite element solver for the two-phase Stokes \
             interface problem on unfitted triangular meshes",
    disable_help_subcommand = true
)]
struct Cli {
    /// Run mode: solve | study | verify [default: study]
    #[arg(long)]
    mode: Option<String>,
    /// Mesh resolution; comma-separated list for a study. Each N even, >= 2
    /// [default: 8,16,32,64]
    #[arg(long)]
    n: Option<String>,
    /// Viscosity on the plus side of the interface (outside the reference
    /// circle) [default: 5]
    #[arg(long = "mu-plus")]
    mu_plus: Option<f64>,
    /// Viscosity on the minus side (inside the circle) [default: 1]
    #[arg(long = "mu-minus")]
    mu_minus: Option<f64>,
    /// Symmetrization sign of the consistency terms; -1 or +1 [default: -1]
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Extra penalty weight on interface edges, >= 0 [default: 0]
    #[arg(long)]
    eta: Option<f64>,
    /// Radius of the circular interface centered at the origin [default: 0.5]
    #[arg(long)]
    r0: Option<f64>,
    /// Output format: table | csv | json | plot [default: table]
    #[arg(long)]
    format: Option<String>,
    /// Write output to this path instead of stdout
    #[arg(long)]
    out: Option<String>,
    /// Config file with key=value lines (same keys as the flags; flags win)
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Unvalidated option soup gathered from the command line and config file.
#[derive(Debug, Default, Clone)]
struct RawOptions {
    mode: Option<String>,
    n: Option<String>,
    mu_plus: Option<f64>,
    mu_minus: Option<f64>,
    delta: Option<f64>,
    eta: Option<f64>,
    r0: Option<f64>,
    format: Option<String>,
    out: Option<String>,
}

fn parse_config_file(path: &PathBuf) -> Result<RawOptions> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let mut raw = RawOptions::default();
    let parse_f64 = |key: &str, v: &str| -> Result<f64> {
        v.parse::<f64>()
            .map_err(|_| usage(format!("config key '{key}': invalid number '{v}'")))
    };
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            usage(format!("{}:{}: expected key=value", path.display(), lineno + 1))
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "mode" => raw.mode = Some(value.to_string()),
            "n" => raw.n = Some(value.to_string()),
            "mu-plus" => raw.mu_plus = Some(parse_f64(&key, value)?),
            "mu-minus" => raw.mu_minus = Some(parse_f64(&key, value)?),
            "delta" => raw.delta = Some(parse_f64(&key, value)?),
            "eta" => raw.eta = Some(parse_f64(&key, value)?),
            "r0" => raw.r0 = Some(parse_f64(&key, value)?),
            "format" => raw.format = Some(value.to_string()),
            "out" => raw.out = Some(value.to_string()),
            other => {
                return Err(usage(format!(
                    "{}:{}: unknown config key '{other}'",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(raw)
}

fn validated(flags: RawOptions, file: RawOptions) -> Result<RunConfig> {
    let mode = match flags.mode.or(file.mode) {
        Some(s) => parse_mode(&s)?,
        None => Mode::Study,
    };
    let ns = match flags.n.or(file.n) {
        Some(s) => parse_n_list(&s)?,
        None => match mode {
            Mode::Solve => vec![8],
            _ => vec![8, 16, 32, 64],
        },
    };
    if mode == Mode::Solve && ns.len() != 1 {
        return Err(usage("solve mode takes a single resolution; pass one value to --n"));
    }
    let mu_plus = flags.mu_plus.or(file.mu_plus).unwrap_or(5.0);
    let mu_minus = flags.mu_minus.or(file.mu_minus).unwrap_or(1.0);
    for (name, mu) in [("--mu-plus", mu_plus), ("--mu-minus", mu_minus)] {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(usage(format!("{name} must be a positive finite number, got {mu}")));
        }
    }
    let delta = flags.delta.or(file.delta).unwrap_or(-1.0);
    if delta != -1.0 && delta != 1.0 {
        return Err(usage(format!("--delta must be -1 or +1, got {delta}")));
    }
    let eta = flags.eta.or(file.eta).unwrap_or(0.0);
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(usage(format!("--eta must be a nonnegative finite number, got {eta}")));
    }
    let r0 = flags.r0.or(file.r0).unwrap_or(0.5);
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(usage(format!("--r0 must be a positive finite number, got {r0}")));
    }
    let format = match flags.format.or(file.format) {
        Some(s) => parse_format(&s)?,
        None => Format::Table,
    };
    let out = flags.out.or(file.out).map(PathBuf::from);
    Ok(RunConfig { mode, ns, mu_plus, mu_minus, delta, eta, r0, format, out })
}

/// Parses argv into a validated [`RunConfig`]. Returns `Ok(None)` when the
/// invocation only asked for help or the version string (already printed).
pub fn parse_args<I, T>(argv: I) -> Result<Option<RunConfig>>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e)
            if e.kind() == clap::error::ErrorKind::DisplayHelp
                || e.kind() == clap::error::ErrorKind::DisplayVersion =>
        {
            use std::io::Write as _;
            let _ = std::io::stdout().write_all(e.to_string().as_bytes());
            return Ok(None);
        }
        Err(e) => return Err(usage(e.to_string())),
    };
    let file = match &cli.config {
        Some(path) => parse_config_file(path)?,
        None => RawOptions::default(),
    };
    let flags = RawOptions {
        mode: cli.mode,
        n: cli.n,
        mu_plus: cli.mu_plus,
        mu_minus: cli.mu_minus,
        delta: cli.delta,
        eta: cli.eta,
        r0: cli.r0,
        format: cli.format,
        out: cli.out,
    };
    validated(flags, file).map(Some)
}

/// Extra diagnostics attached to a single-solve report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveInfo {
    pub residual: f64,
    pub multiplier: f64,
    pub n_velocity_dofs: usize,
    pub n_pressure_dofs: usize,
    pub n_interface_elements: usize,
}

/// Everything a solve or study run reports.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceReport {
    pub mode: String,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub delta: f64,
    pub eta: f64,
    pub r0: f64,
    pub rows: Vec<StudyRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveInfo>,
}

/// 3-significant-digit scientific notation with a two-digit exponent,
/// e.g. 1.001E-02.
pub fn sci3(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.000E+00".to_string();
    }
    let mut e = x.abs().log10().floor() as i32;
    let mut m = x.abs() / 10f64.powi(e);
    // rounding to three decimals can push the mantissa up to 10.000
    if format!("{m:.3}").starts_with("10") {
        m /= 10.0;
        e += 1;
    }
    let sign = if x < 0.0 { "-" } else { "" };
    let esign = if e < 0 { '-' } else { '+' };
    format!("{sign}{m:.3}E{esign}{:02}", e.abs())
}

fn rate_cell(r: Option<f64>) -> String {
    match r {
        Some(v) => format!("{v:.2}"),
        None => "--".to_string(),
    }
}

fn table_text(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "% mu+ = {}  mu- = {}  delta = {}  eta = {}  r0 = {}",
        report.mu_plus, report.mu_minus, report.delta, report.eta, report.r0
    );
    let _ = writeln!(out, "% N & eu_l2 & rate & eu_h1 & rate & ep_l2 & rate \\\\");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{} & {} & {} & {} & {} & {} & {} \\\\",
            r.n,
            sci3(r.eu_l2),
            rate_cell(r.eu_l2_rate),
            sci3(r.eu_h1),
            rate_cell(r.eu_h1_rate),
            sci3(r.ep_l2),
            rate_cell(r.ep_l2_rate),
        );
    }
    if let Some(info) = &report.solve {
        let _ = writeln!(out, "residual = {}", sci3(info.residual));
        let _ = writeln!(out, "multiplier = {:.6e}", info.multiplier);
        let _ = writeln!(out, "velocity dofs = {}", info.n_velocity_dofs);
        let _ = writeln!(out, "pressure dofs = {}", info.n_pressure_dofs);
        let _ = writeln!(out, "interface elements = {}", info.n_interface_elements);
    }
    out
}

fn csv_text(report: &ConvergenceReport) -> String {
    let mut out = String::from("N,eu_l2,eu_l2_rate,eu_h1,eu_h1_rate,ep_l2,ep_l2_rate\n");
    for r in &report.rows {
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            r.eu_l2,
            cell(r.eu_l2_rate),
            r.eu_h1,
            cell(r.eu_h1_rate),
            r.ep_l2,
            cell(r.ep_l2_rate),
        );
    }
    out
}

fn json_text(report: &ConvergenceReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidParams(format!("serialization failed: {e}")))
}

fn plot_text(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# loglog convergence plot (gnuplot script)");
    let _ = writeln!(
        out,
        "# mu+ = {}  mu- = {}  delta = {}  eta = {}  r0 = {}",
        report.mu_plus, report.mu_minus, report.delta, report.eta, report.r0
    );
    let _ = writeln!(out, "# uncomment for file output:");
    let _ = writeln!(out, "# set terminal pngcairo size 900,600; set output 'convergence.png'");
    let _ = writeln!(out, "set logscale xy");
    let _ = writeln!(out, "set xlabel 'N'");
    let _ = writeln!(out, "set ylabel 'error'");
    let _ = writeln!(out, "set key bottom left");
    let _ = writeln!(out, "$data << EOD");
    let _ = writeln!(out, "# N eu_l2 eu_h1 ep_l2");
    for r in &report.rows {
        let _ = writeln!(out, "{} {} {} {}", r.n, r.eu_l2, r.eu_h1, r.ep_l2);
    }
    let _ = writeln!(out, "EOD");
    let _ = writeln!(
        out,
        "plot $data using 1:2 with linespoints pt 7 title 'velocity L2', \\\n     \
         $data using 1:3 with linespoints pt 5 title 'velocity H1', \\\n     \
         $data using 1:4 with linespoints pt 9 title 'pressure L2'"
    );
    out
}

/// Serializes a report in the requested format.
pub fn emit(report: &ConvergenceReport, format: Format) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::InvalidParams("report has no rows to emit".into()));
    }
    match format {
        Format::Table => Ok(table_text(report)),
        Format::Csv => Ok(csv_text(report)),
        Format::Json => json_text(report),
        Format::Plot => Ok(plot_text(report)),
    }
}

fn render_verify(reports: &[verify::SuiteReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&r.render());
        out.push('\n');
    }
    let suites_failed = reports.iter().filter(|r| !r.passed()).count();
    let checks: usize = reports.iter().map(|r| r.checks.len()).sum();
    let checks_failed: usize =
        reports.iter().flat_map(|r| r.checks.iter()).filter(|c| c.failures > 0).count();
    let _ = writeln!(
        out,
        "suites: {} passed, {} failed",
        reports.len() - suites_failed,
        suites_failed
    );
    let _ = writeln!(out, "checks: {} passed, {} failed", checks - checks_failed, checks_failed);
    out
}

/// Runs the configured mode and returns the emitted text.
pub fn execute(cfg: &RunConfig) -> Result<String> {
    match cfg.mode {
        Mode::Verify => {
            let reports = verify::run_all(VERIFY_SEED)?;
            Ok(render_verify(&reports))
        }
        Mode::Study => {
            let params = SchemeParams::new(cfg.mu_plus, cfg.mu_minus, cfg.delta, cfg.eta)?;
            let rows = run_study(&cfg.ns, params, cfg.r0)?;
            let report = ConvergenceReport {
                mode: "study".into(),
                mu_plus: cfg.mu_plus,
                mu_minus: cfg.mu_minus,
                delta: cfg.delta,
                eta: cfg.eta,
                r0: cfg.r0,
                rows,
                solve: None,
            };
            emit(&report, cfg.format)
        }
        Mode::Solve => {
            let params = SchemeParams::new(cfg.mu_plus, cfg.mu_minus, cfg.delta, cfg.eta)?;
            let n = cfg.ns[0];
            let (disc, sol) = solve_problem(n, params, cfg.r0)?;
            let exact = ExactStokes::new(cfg.r0, cfg.mu_plus, cfg.mu_minus)?;
            let errs = compute_errors(&disc, &sol.velocity, &sol.pressure, &exact)?;
            let row = StudyRow {
                n,
                eu_l2: errs.eu_l2,
                eu_l2_rate: None,
                eu_h1: errs.eu_h1,
                eu_h1_rate: None,
                ep_l2: errs.ep_l2,
                ep_l2_rate: None,
            };
            let info = SolveInfo {
                residual: sol.residual,
                multiplier: sol.multiplier,
                n_velocity_dofs: sol.velocity.len(),
                n_pressure_dofs: sol.pressure.len(),
                n_interface_elements: disc.classification.interface_elements.len(),
            };
            let report = ConvergenceReport {
                mode: "solve".into(),
                mu_plus: cfg.mu_plus,
                mu_minus: cfg.mu_minus,
                delta: cfg.delta,
                eta: cfg.eta,
                r0: cfg.r0,
                rows: vec![row],
                solve: Some(info),
            };
            emit(&report, cfg.format)
        }
    }
}

/// Full binary entry point: parse argv, run, and write the result to stdout
/// or the configured output path.
pub fn main_entry<I, T>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let Some(cfg) = parse_args(argv)? else {
        return Ok(());
    };
    let text = execute(&cfg)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, text).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        }),
        None => {
            use std::io::Write as _;
            match std::io::stdout().write_all(text.as_bytes()) {
                // a closed pipe (e.g. piping into `head`) is not an error
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => other.map_err(Error::Io),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Option<RunConfig>> {
        let mut argv = vec!["stokes-ife"];
        argv.extend_from_slice(args);
        parse_args(argv)
    }

    #[test]
    fn defaults_match_documentation() {
        let cfg = parse(&[]).unwrap().unwrap();
        assert!(matches!(cfg.mode, Mode::Study));
        assert_eq!(cfg.ns, vec![8, 16, 32, 64]);
        assert_eq!(cfg.mu_plus, 5.0);
        assert_eq!(cfg.mu_minus, 1.0);
        assert_eq!(cfg.delta, -1.0);
        assert_eq!(cfg.eta, 0.0);
        assert_eq!(cfg.r0, 0.5);
        assert!(matches!(cfg.format, Format::Table));
        assert!(cfg.out.is_none());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(parse(&["--delta", "2"]).is_err());
        assert!(parse(&["--delta", "1"]).is_ok());
        assert!(parse(&["--delta", "-1"]).is_ok());
        assert!(parse(&["--mu-plus", "0"]).is_err());
        assert!(parse(&["--mu-minus", "-3"]).is_err());
        assert!(parse(&["--eta", "-0.5"]).is_err());
        assert!(parse(&["--n", "7"]).is_err());
        assert!(parse(&["--n", "0"]).is_err());
        assert!(parse(&["--n", "8,9"]).is_err());
        assert!(parse(&["--n", ""]).is_err());
        assert!(parse(&["--mode", "dance"]).is_err());
        assert!(parse(&["--format", "xml"]).is_err());
        assert!(parse(&["--frobnicate"]).is_err());
        assert!(parse(&["--mode", "solve", "--n", "8,16"]).is_err());
        let codes: Vec<i32> = [
            parse(&["--delta", "2"]),
            parse(&["--frobnicate"]),
        ]
        .into_iter()
        .map(|r| r.unwrap_err().exit_code())
        .collect();
        assert_eq!(codes, vec![1, 1]);
    }

    #[test]
    fn table_one_parameters_parse() {
        let cfg = parse(&["--mode", "study", "--n", "8,16,32,64", "--mu-plus", "5",
                          "--mu-minus", "1"])
            .unwrap()
            .unwrap();
        assert!(matches!(cfg.mode, Mode::Study));
        assert_eq!(cfg.ns, vec![8, 16, 32, 64]);
        assert_eq!((cfg.mu_plus, cfg.mu_minus), (5.0, 1.0));
    }

    #[test]
    fn config_file_fills_gaps_and_flags_win() {
        let dir = std::env::temp_dir();
        let path = dir.join("stokes_ife_cli_test.cfg");
        std::fs::write(
            &path,
            "# comment line\nmode = solve\nn = 16\nmu_plus = 7\nmu-minus = 2\nformat=json\n",
        )
        .unwrap();
        let cfg = parse(&["--config", path.to_str().unwrap(), "--mu-plus", "9"])
            .unwrap()
            .unwrap();
        assert!(matches!(cfg.mode, Mode::Solve));
        assert_eq!(cfg.ns, vec![16]);
        assert_eq!(cfg.mu_plus, 9.0); // flag overrides file
        assert_eq!(cfg.mu_minus, 2.0);
        assert!(matches!(cfg.format, Format::Json));
        std::fs::write(&path, "nonsense = 1\n").unwrap();
        assert!(parse(&["--config", path.to_str().unwrap()]).is_err());
        std::fs::write(&path, "just a line\n").unwrap();
        assert!(parse(&["--config", path.to_str().unwrap()]).is_err());
        let _ = std::fs::remove_file(&path);
        assert!(parse(&["--config", "/nonexistent/helpfully.cfg"]).is_err());
    }

    #[test]
    fn scientific_formatting_matches_table_style() {
        assert_eq!(sci3(1.001e-2), "1.001E-02");
        assert_eq!(sci3(2.020e-1), "2.020E-01");
        assert_eq!(sci3(2.476e-1), "2.476E-01");
        assert_eq!(sci3(9.9996e-3), "1.000E-02");
        assert_eq!(sci3(-4.216e-5), "-4.216E-05");
        assert_eq!(sci3(1.0), "1.000E+00");
        assert_eq!(sci3(12.5), "1.250E+01");
        assert_eq!(sci3(0.0), "0.000E+00");
    }

    fn sample_report() -> ConvergenceReport {
        ConvergenceReport {
            mode: "study".into(),
            mu_plus: 5.0,
            mu_minus: 1.0,
            delta: -1.0,
            eta: 0.0,
            r0: 0.5,
            rows: vec![
                StudyRow {
                    n: 8,
                    eu_l2: 1.001e-2,
                    eu_l2_rate: None,
                    eu_h1: 2.020e-1,
                    eu_h1_rate: None,
                    ep_l2: 2.476e-1,
                    ep_l2_rate: None,
                },
                StudyRow {
                    n: 16,
                    eu_l2: 2.688e-3,
                    eu_l2_rate: Some(1.8967),
                    eu_h1: 1.065e-1,
                    eu_h1_rate: Some(0.9235),
                    ep_l2: 1.297e-1,
                    ep_l2_rate: Some(0.9329),
                },
            ],
            solve: None,
        }
    }

    #[test]
    fn table_rows_follow_publication_layout() {
        let text = emit(&sample_report(), Format::Table).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with('%'));
        assert_eq!(
            lines[2],
            "8 & 1.001E-02 & -- & 2.020E-01 & -- & 2.476E-01 & -- \\\\"
        );
        assert_eq!(
            lines[3],
            "16 & 2.688E-03 & 1.90 & 1.065E-01 & 0.92 & 1.297E-01 & 0.93 \\\\"
        );
    }

    #[test]
    fn csv_round_trips() {
        let report = sample_report();
        let text = emit(&report, Format::Csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "N,eu_l2,eu_l2_rate,eu_h1,eu_h1_rate,ep_l2,ep_l2_rate"
        );
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0].parse::<usize>().unwrap(), 8);
        assert_eq!(first[1].parse::<f64>().unwrap(), report.rows[0].eu_l2);
        assert_eq!(first[2], ""); // empty rate cell on the first row
        let second: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(
            second[2].parse::<f64>().unwrap(),
            report.rows[1].eu_l2_rate.unwrap()
        );
    }

    #[test]
    fn json_mirrors_report_fields() {
        let text = emit(&sample_report(), Format::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["mode"], "study");
        assert_eq!(v["mu_plus"], 5.0);
        assert_eq!(v["rows"][0]["n"], 8);
        assert_eq!(v["rows"][0]["eu_l2_rate"], serde_json::Value::Null);
        assert!((v["rows"][1]["eu_l2_rate"].as_f64().unwrap() - 1.8967).abs() < 1e-12);
    }

    #[test]
    fn plot_script_is_selfcontained_loglog() {
        let text = emit(&sample_report(), Format::Plot).unwrap();
        assert!(text.contains("set logscale xy"));
        assert!(text.contains("$data << EOD"));
        assert!(text.contains("\n8 0.01001 0.202 0.2476\n"));
        assert!(text.contains("linespoints"));
    }

    #[test]
    fn empty_report_is_rejected() {
        let mut report = sample_report();
        report.rows.clear();
        assert!(emit(&report, Format::Table).is_err());
    }

    #[test]
    fn solve_mode_reports_diagnostics() {
        let cfg = parse(&["--mode", "solve", "--n", "8", "--format", "json"])
            .unwrap()
            .unwrap();
        let text = execute(&cfg).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["mode"], "solve");
        assert!(v["solve"]["residual"].as_f64().unwrap() <= 1e-9);
        assert!(v["solve"]["n_velocity_dofs"].as_u64().unwrap() > 0);
        let table = execute(&RunConfig { format: Format::Table, ..cfg }).unwrap();
        assert!(table.contains("residual = "));
        assert!(table.contains("interface elements = "));
    }
}
