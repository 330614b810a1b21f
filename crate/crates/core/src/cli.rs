//! Command-line front end: loads a JSON model config, dispatches to the
//! library and writes CSV or JSON.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for malformed
//! configs, bad arguments and unknown commands.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::bracketing::{self, LowerBound, DEFAULT_CRITICAL_TOL};
use crate::grid2d::{assemble_h2d, lowest_eigenvalues, transition_scan, EigenOptions, Grid2D, ScanPolicy};
use crate::model::{ChannelSpec, ModelConfig};
use crate::oned::{self, resolved_ground_state, ComparisonSpec, ResolutionPolicy};
use crate::weyl::{weyl_certificate, CERTIFICATE_TOL};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

const THREADS_ENV: &str = "SMILANSKY_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "smilansky-lab", version, about = "Spectral analysis of the regularized Smilansky model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Model configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Main tolerance of the command.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    /// Print a one-line summary to standard error.
    #[arg(long, global = true)]
    pub summary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coupling at which the comparison threshold crosses zero.
    Critical {
        #[arg(long, default_value_t = 0)]
        channel: usize,
    },
    /// Coupling that puts the comparison threshold at a target energy.
    Tune {
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        target: f64,
        #[arg(long, default_value_t = 0)]
        channel: usize,
    },
    /// Threshold inf σ(L) of one channel's comparison operator.
    Eig1d {
        #[arg(long, default_value_t = 0)]
        channel: usize,
    },
    /// Lowest eigenvalues of the truncated 2D Hamiltonian.
    Eig2d {
        /// Half-height Y of the box.
        #[arg(long)]
        y: f64,
        #[arg(long, default_value_t = 0.125)]
        h_y: f64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Also write the matrix in coordinate format.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// λ₀(Y) along a ladder of box heights, with the transition verdict.
    Scan {
        #[arg(long, value_delimiter = ',', default_value = "8,16,24,32")]
        ladder: Vec<f64>,
        #[arg(long, default_value_t = 0.125)]
        h_y: f64,
    },
    /// Quasi-mode certificate for a decreasing ε ladder.
    Weyl {
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.02")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        channel: usize,
    },
    /// Per-channel thresholds and the sign verdict.
    Classify,
    /// Strip bounds and the global lower bound.
    Bound {
        /// Strips listed in the output.
        #[arg(long, default_value_t = 64)]
        strips: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Critical { .. } => "critical",
            Command::Tune { .. } => "tune",
            Command::Eig1d { .. } => "eig1d",
            Command::Eig2d { .. } => "eig2d",
            Command::Scan { .. } => "scan",
            Command::Weyl { .. } => "weyl",
            Command::Classify => "classify",
            Command::Bound { .. } => "bound",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::Eig2d { .. } | Command::Scan { .. } | Command::Weyl { .. } => Format::Csv,
            _ => Format::Json,
        }
    }

    fn default_tol(&self) -> f64 {
        match self {
            Command::Eig2d { .. } | Command::Scan { .. } => EigenOptions::default().tol,
            Command::Weyl { .. } => CERTIFICATE_TOL,
            Command::Classify | Command::Bound { .. } => DEFAULT_CRITICAL_TOL,
            _ => 1e-6,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Compute(_) => EXIT_COMPUTATION,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Compute(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        let e: Error = e.into();
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Compute(e.to_string())
        }
    }
}

/// A finished artifact: the table or document plus a summary line.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub csv: Table,
    pub json: Value,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: String,
    pub rows: Vec<String>,
}

impl Table {
    fn from_csv(text: &str) -> Self {
        let mut lines = text.lines();
        Self {
            header: lines.next().unwrap_or_default().to_string(),
            rows: lines.map(str::to_string).collect(),
        }
    }
}

/// Reproducibility data attached to every artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub command: &'static str,
    pub config_sha256: String,
    pub tolerances: Vec<(&'static str, f64)>,
    pub seed: u64,
}

impl Meta {
    fn csv_lines(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# smilansky-lab {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "# command: {}", self.command);
        let _ = writeln!(s, "# config_sha256: {}", self.config_sha256);
        let tols: Vec<String> = self.tolerances.iter().map(|(k, v)| format!("{k}={v:e}")).collect();
        let _ = writeln!(s, "# tolerances: {}", tols.join(" "));
        let _ = writeln!(s, "# seed: {:#x}", self.seed);
        s
    }

    fn json(&self) -> Value {
        let tolerances: Map<String, Value> = self
            .tolerances
            .iter()
            .map(|(k, v)| (k.to_string(), json!(v)))
            .collect();
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config_sha256": self.config_sha256,
            "tolerances": tolerances,
            "seed": format!("{:#x}", self.seed),
        })
    }
}

/// Renders an artifact in the requested format with its header.
pub fn render(artifact: &Artifact, meta: &Meta, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = meta.csv_lines();
            s.push_str(&artifact.csv.header);
            s.push('\n');
            for r in &artifact.csv.rows {
                s.push_str(r);
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let mut doc = match &artifact.json {
                Value::Object(m) => m.clone(),
                other => {
                    let mut m = Map::new();
                    m.insert("result".into(), other.clone());
                    m
                }
            };
            doc.insert("meta".into(), meta.json());
            let mut s = Value::Object(doc).to_string();
            s.push('\n');
            s
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn load_config(path: Option<&Path>) -> Result<(ModelConfig, String), CliError> {
    let path = path.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let config = ModelConfig::from_json_str(text)?;
    Ok((config, sha256_hex(&bytes)))
}

fn pick_channel(config: &ModelConfig, index: usize) -> Result<&ChannelSpec, CliError> {
    config.channels().get(index).ok_or_else(|| {
        CliError::Config(format!(
            "channel {index} requested but the config has {} channel(s)",
            config.channels().len()
        ))
    })
}

fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn check_y_spacing(y: f64, h_y: f64) -> Result<(), CliError> {
    let steps = 2.0 * y / h_y;
    if (steps - steps.round()).abs() > 1e-9 * steps {
        return Err(CliError::Config(format!("2Y = {} is not a multiple of --h-y {h_y}", 2.0 * y)));
    }
    Ok(())
}

fn fmt_list(vs: &[f64]) -> String {
    vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Validates the request and runs the command, returning the artifact and
/// its reproducibility data.
pub fn execute(cli: &Cli) -> Result<(Artifact, Meta), CliError> {
    let command = &cli.command;
    if cli.common.tol.is_some() && matches!(command, Command::Weyl { .. } | Command::Bound { .. }) {
        return Err(CliError::Config(format!("--tol is not used by {}", command.name())));
    }
    let tol = cli.common.tol.unwrap_or_else(|| command.default_tol());
    check_positive("--tol", tol)?;
    let (config, config_sha256) = load_config(cli.common.config.as_deref())?;
    let seed = EigenOptions::default().seed;
    let mut tolerances = vec![(
        match command {
            Command::Weyl { .. } => "certificate_tol",
            Command::Bound { .. } => "critical_tol",
            _ => "tol",
        },
        tol,
    )];
    let policy = ResolutionPolicy::default();
    let artifact = match command {
        Command::Critical { channel } => {
            let ch = pick_channel(&config, *channel)?;
            let lambda = oned::critical_coupling(config.omega(), &ch.profile, tol)?;
            tolerances.push(("refinement_tol", policy.refinement_tol));
            Artifact {
                csv: Table {
                    header: "lambda_crit".into(),
                    rows: vec![format!("{lambda:.15e}")],
                },
                json: json!({ "lambda_crit": lambda }),
                summary: format!("lambda_crit = {lambda:.10}"),
            }
        }
        Command::Tune { target, channel } => {
            let ch = pick_channel(&config, *channel)?;
            let omega2 = config.omega() * config.omega();
            if !(target.is_finite() && *target <= omega2) {
                return Err(CliError::Config(format!(
                    "--target must be finite and at most omega^2 = {omega2}, got {target}"
                )));
            }
            let lambda = oned::tune_lambda_to_threshold(config.omega(), &ch.profile, *target, tol)?;
            tolerances.push(("refinement_tol", policy.refinement_tol));
            Artifact {
                csv: Table {
                    header: "target,lambda".into(),
                    rows: vec![format!("{target},{lambda:.15e}")],
                },
                json: json!({ "target": target, "lambda": lambda }),
                summary: format!("lambda = {lambda:.10} for threshold {target}"),
            }
        }
        Command::Eig1d { channel } => {
            let ch = pick_channel(&config, *channel)?;
            let spec = bracketing::channel_comparison(&config, ch)?;
            let e = oned::threshold(&spec, &policy)?;
            tolerances.push(("refinement_tol", policy.refinement_tol));
            Artifact {
                csv: Table {
                    header: "channel,lambda,threshold".into(),
                    rows: vec![format!("{channel},{},{e:.15e}", ch.lambda)],
                },
                json: json!({ "channel": channel, "lambda": ch.lambda, "threshold": e }),
                summary: format!("inf sigma(L) = {e:.10}"),
            }
        }
        Command::Eig2d { y, h_y, count, matrix } => {
            check_positive("--y", *y)?;
            check_positive("--h-y", *h_y)?;
            check_y_spacing(*y, *h_y)?;
            if *count == 0 || *count > 20 {
                return Err(CliError::Config(format!("--count must be in 1..=20, got {count}")));
            }
            let scan = ScanPolicy {
                h_y: *h_y,
                eigen: EigenOptions {
                    tol,
                    ..EigenOptions::default()
                },
                ..ScanPolicy::default()
            };
            let mesh = scan.x_mesh(&config, *y)?;
            let grid = Grid2D::new(mesh, *y, *h_y)?;
            let h = assemble_h2d(&config, &grid)?;
            if let Some(path) = matrix {
                let file = fs::File::create(path).map_err(|e| CliError::Compute(format!("{}: {e}", path.display())))?;
                h.matrix()
                    .write_coordinate(io::BufWriter::new(file))
                    .map_err(|e| CliError::Compute(format!("{}: {e}", path.display())))?;
            }
            let eig = lowest_eigenvalues(&h, *count, &scan.eigen)?;
            let rows = eig
                .iter()
                .enumerate()
                .map(|(i, (v, r))| format!("{i},{v:.12e},{r:.3e}"))
                .collect();
            let values: Vec<Value> = eig.iter().map(|(v, r)| json!({ "eigenvalue": v, "residual": r })).collect();
            Artifact {
                csv: Table {
                    header: "index,eigenvalue,residual".into(),
                    rows,
                },
                json: json!({ "y": y, "h_y": h_y, "n_x": grid.n_x(), "n_y": grid.n_y(), "eigenvalues": values }),
                summary: format!("lambda0 = {:.10} on {} unknowns", eig[0].0, h.dim()),
            }
        }
        Command::Scan { ladder, h_y } => {
            check_positive("--h-y", *h_y)?;
            if ladder.len() < 3 || ladder.windows(2).any(|w| !(w[1] > w[0])) || ladder[0] <= 0.0 {
                return Err(CliError::Config(format!(
                    "--ladder must be positive, strictly increasing and have >= 3 entries, got {}",
                    fmt_list(ladder)
                )));
            }
            for &y in ladder {
                check_y_spacing(y, *h_y)?;
            }
            let scan = ScanPolicy {
                h_y: *h_y,
                eigen: EigenOptions {
                    tol,
                    ..EigenOptions::default()
                },
                ..ScanPolicy::default()
            };
            tolerances.push(("stability_tol", scan.stability_tol));
            tolerances.push(("min_r2", scan.min_r2));
            let report = transition_scan(&config, ladder, &scan)?;
            let rows: Vec<Value> = report
                .rows
                .iter()
                .map(|r| json!({ "Y": r.y, "lambda0": r.lambda0, "residual": r.residual }))
                .collect();
            Artifact {
                csv: Table::from_csv(&report.to_csv()),
                json: json!({
                    "rows": rows,
                    "c_fit": report.c_fit,
                    "intercept": report.intercept,
                    "r_squared": report.r_squared,
                    "drift": report.drift,
                    "verdict": report.verdict.as_str(),
                    "n_x": report.n_x,
                }),
                summary: format!(
                    "{} (drift {:.3e}, c_fit {:.4})",
                    report.verdict.as_str(),
                    report.drift,
                    report.c_fit
                ),
            }
        }
        Command::Weyl { mu, eps, channel } => {
            if !mu.is_finite() {
                return Err(CliError::Config(format!("--mu must be finite, got {mu}")));
            }
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) || eps.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(CliError::Config(format!(
                    "--eps must lie in (0, 1) and be strictly decreasing, got {}",
                    fmt_list(eps)
                )));
            }
            let ch = pick_channel(&config, *channel)?;
            let spec = ComparisonSpec::full_line(config.omega(), ch.lambda, ch.profile.clone())?;
            let gs = resolved_ground_state(&spec, &policy)?;
            let cert = weyl_certificate(&config, &gs, *mu, eps)?;
            let passed = cert.passed();
            Artifact {
                csv: Table::from_csv(&cert.to_csv()),
                json: cert.to_json(),
                summary: format!(
                    "certificate {} for mu = {mu} at energy {:.10}",
                    if passed { "passed" } else { "failed" },
                    cert.energy
                ),
            }
        }
        Command::Classify => {
            let report = bracketing::report(&config, tol)?;
            let c = &report.classification;
            let rows = c
                .per_channel
                .iter()
                .map(|p| {
                    format!(
                        "{},{},{},{:.15e},{:.15e},{}",
                        p.index,
                        p.lambda,
                        p.center,
                        p.threshold,
                        c.t_v,
                        c.verdict.as_str()
                    )
                })
                .collect();
            let summary = format!("{} (t_V = {:.10})", c.verdict.as_str(), c.t_v);
            Artifact {
                csv: Table {
                    header: "index,lambda,center,threshold,t_V,verdict".into(),
                    rows,
                },
                json: serde_json::to_value(&report).expect("report serializes"),
                summary,
            }
        }
        Command::Bound { strips } => {
            if *strips == 0 {
                return Err(CliError::Config("--strips must be >= 1".into()));
            }
            let bound = bracketing::global_lower_bound(&config)?;
            let (table, listed) = match bound {
                LowerBound::Bounded { .. } => {
                    let list = bracketing::strip_bounds(&config, 1..=*strips)?;
                    let rows = list
                        .iter()
                        .map(|s| {
                            format!(
                                "{},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}",
                                s.n, s.y_lo, s.y_hi, s.separated, s.correction, s.net
                            )
                        })
                        .collect();
                    (rows, serde_json::to_value(&list).expect("strips serialize"))
                }
                LowerBound::UnboundedBelow { .. } => (Vec::new(), json!([])),
            };
            let summary = match bound {
                LowerBound::Bounded { value, attained_at, .. } => {
                    format!("inf sigma(H) >= {value:.10} (strip {attained_at})")
                }
                LowerBound::UnboundedBelow { t_v } => format!("unbounded below (t_V = {t_v:.10})"),
            };
            Artifact {
                csv: Table {
                    header: "n,y_lo,y_hi,separated,correction,net".into(),
                    rows: table,
                },
                json: json!({
                    "global_lower_bound": bracketing::LowerBoundJson::from(bound),
                    "detail": bound,
                    "strips": listed,
                }),
                summary,
            }
        }
    };
    Ok((
        artifact,
        Meta {
            command: command.name(),
            config_sha256,
            tolerances,
            seed,
        },
    ))
}

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.common.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Compute(format!("{}: {e}", path.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Compute(format!("stdout: {e}")))
        }
    }
}

/// Runs a parsed request and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let work = || -> Result<(), CliError> {
        let (artifact, meta) = execute(cli)?;
        let format = cli.common.format.unwrap_or_else(|| cli.command.default_format());
        emit(cli, &render(&artifact, &meta, format))?;
        if cli.common.summary {
            eprintln!("{}: {}", meta.command, artifact.summary);
        }
        Ok(())
    };
    let result = match cli.common.threads {
        Some(0) => Err(CliError::Config("--threads must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(e) => Err(CliError::Compute(format!("thread pool: {e}"))),
        },
        None => work(),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("smilansky-lab: {e}");
            e.exit_code()
        }
    }
}

/// Entry point of the binary.
pub fn main() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            }
        }
    }
}
