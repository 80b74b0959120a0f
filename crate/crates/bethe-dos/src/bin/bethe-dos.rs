//! Batch front-end: emits coefficient tables, transform values, density
//! sweeps, Monte Carlo comparison reports, and the invariant check matrix.

// `!(x > 0.0)` is the NaN-rejecting form of the parameter guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use bethe_dos::config::{LawSpec, McResultRecord, RunConfig, TableFile, WindowSpec};
use bethe_dos::expansion::{
    remainder_budget_with_norm, transform, Expansion, ExpansionParams,
};
use bethe_dos::oracle::{mc_average, MCConfig};
use bethe_dos::treewalk::{spectrum_window, CoefficientTable};
use bethe_dos::verify::run_all_checks;
use bethe_dos::{Error, Result};

#[derive(Parser)]
#[command(
    name = "bethe-dos",
    version,
    about = "Strong-disorder expansion of the Anderson-model density of states on the regular tree"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the closed-walk coefficient table up to a maximal order (JSON).
    Coeffs {
        /// Largest walk order to enumerate.
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[command(flatten)]
        io: IoFlags,
    },
    /// Evaluate the single-site transforms s_1..s_k at one complex point.
    Transforms {
        /// Largest transform index k.
        #[arg(long, default_value_t = 6)]
        k_max: u32,
        /// Evaluation point as "re,im".
        #[arg(long, allow_hyphen_values = true)]
        zeta: String,
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        io: IoFlags,
    },
    /// Sweep the density-of-states expansion over a grid inside I (CSV).
    Dos {
        #[command(flatten)]
        common: CommonFlags,
        /// Use the spectral adjacency norm 2*sqrt(q) instead of q+1 in the
        /// remainder budget; tighter but unproven, so rows are marked
        /// non-rigorous.
        #[arg(long)]
        sharp_norm: bool,
        #[command(flatten)]
        io: IoFlags,
    },
    /// Compare the Monte Carlo oracle against the truncated expansion (JSON).
    McCompare {
        #[command(flatten)]
        common: CommonFlags,
        /// Imaginary part of the evaluation points zeta = xi + i*height.
        #[arg(long, default_value_t = 0.4)]
        height: f64,
        /// Number of evaluation points strictly inside I.
        #[arg(long, default_value_t = 10)]
        points: usize,
        /// Flag estimates whose standard error exceeds this ceiling.
        #[arg(long)]
        stderr_ceiling: Option<f64>,
        #[command(flatten)]
        io: IoFlags,
    },
    /// Run every cross-module invariant check; exit 0 iff all pass.
    Verify,
}

#[derive(Parser)]
struct CommonFlags {
    /// JSON run-configuration file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tree branching number (vertex degree is q+1).
    #[arg(long)]
    q: Option<u64>,
    /// Disorder strength.
    #[arg(long)]
    lambda: Option<f64>,
    /// Truncation order N.
    #[arg(long)]
    order: Option<usize>,
    /// Single-site law kind; only "uniform" is flag-constructible.
    #[arg(long)]
    law: Option<String>,
    /// Half-width of the uniform law.
    #[arg(long)]
    a: Option<f64>,
    /// JSON file holding a full law spec (overrides --law/--a).
    #[arg(long)]
    law_file: Option<PathBuf>,
    /// Window interval as "lo,hi".
    #[arg(long = "I", allow_hyphen_values = true)]
    i: Option<String>,
    /// Contour depth delta0.
    #[arg(long)]
    delta0: Option<f64>,
    /// Working depth delta (< delta0).
    #[arg(long)]
    delta: Option<f64>,
    /// Number of grid points strictly inside I.
    #[arg(long)]
    grid: Option<usize>,
    /// Monte Carlo truncation depth.
    #[arg(long)]
    depth: Option<u32>,
    /// Monte Carlo sample count.
    #[arg(long)]
    samples: Option<u64>,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Parser)]
struct IoFlags {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format where the command supports both.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!("{what} must be \"x,y\", got {text:?}")));
    }
    let x = parts[0]
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("bad {what} component {:?}: {e}", parts[0])))?;
    let y = parts[1]
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("bad {what} component {:?}: {e}", parts[1])))?;
    Ok((x, y))
}

impl CommonFlags {
    fn to_run_config(&self) -> Result<RunConfig> {
        let law = if let Some(path) = &self.law_file {
            let text = std::fs::read_to_string(path)?;
            Some(serde_json::from_str(&text)?)
        } else if self.law.is_some() || self.a.is_some() {
            match self.law.as_deref() {
                Some("uniform") | None => Some(LawSpec::Uniform {
                    a: self.a.unwrap_or(1.0),
                }),
                Some(other) => {
                    return Err(Error::Config(format!(
                        "law {other:?} is not flag-constructible; use --law-file"
                    )))
                }
            }
        } else {
            None
        };
        let window = if self.i.is_some() || self.delta0.is_some() || self.delta.is_some() {
            let (lo, hi) = match &self.i {
                Some(text) => parse_pair(text, "--I")?,
                None => (-0.5, 0.5),
            };
            Some(WindowSpec {
                i: [lo, hi],
                delta0: self.delta0.unwrap_or(0.3),
                delta: self.delta.unwrap_or(0.15),
            })
        } else {
            None
        };
        Ok(RunConfig {
            q: self.q,
            lambda: self.lambda,
            order: self.order,
            law,
            window,
            grid: self.grid,
            depth: self.depth,
            samples: self.samples,
            seed: self.seed,
        })
    }

    fn resolve(&self) -> Result<bethe_dos::config::ResolvedConfig> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        base.overlay(self.to_run_config()?).resolve()
    }
}

fn emit(io: &IoFlags, content: &str) -> Result<()> {
    match &io.out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

/// Full-precision scientific notation: lossless for downstream plotting.
fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_coeffs(n_max: usize, io: &IoFlags) -> Result<()> {
    if matches!(io.format, Some(Format::Csv)) {
        return Err(Error::Config(
            "coefficient tables are emitted as JSON only".into(),
        ));
    }
    let table = CoefficientTable::build(n_max)?;
    let file = TableFile::from_table(&table)?;
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    emit(io, &json)
}

#[derive(Serialize)]
struct TransformValue {
    k: u32,
    value: [f64; 2],
}

fn cmd_transforms(k_max: u32, zeta: &str, common: &CommonFlags, io: &IoFlags) -> Result<()> {
    if k_max == 0 {
        return Err(Error::TransformIndex);
    }
    let cfg = common.resolve()?;
    cfg.law.validate(&cfg.window)?;
    let (re, im) = parse_pair(zeta, "--zeta")?;
    let z = Complex64::new(re, im);
    let mut values = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        let s = transform(&cfg.law, &cfg.window, k, z)?;
        values.push(TransformValue {
            k,
            value: [s.re, s.im],
        });
    }
    match io.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("k,re,im\n");
            for v in &values {
                out.push_str(&format!("{},{},{}\n", v.k, sci(v.value[0]), sci(v.value[1])));
            }
            emit(io, &out)
        }
        Format::Json => {
            let mut json = serde_json::to_string_pretty(&values)?;
            json.push('\n');
            emit(io, &json)
        }
    }
}

/// Grid of `count` points strictly inside the open interval `(lo, hi)`.
fn interior_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Config("grid needs at least one point".into()));
    }
    Ok((1..=count)
        .map(|j| lo + (hi - lo) * j as f64 / (count as f64 + 1.0))
        .collect())
}

#[derive(Serialize)]
struct DosRow {
    xi: f64,
    #[serde(rename = "E")]
    energy: f64,
    value: f64,
    remainder_bound: f64,
    rigorous: bool,
    coefficients: Vec<f64>,
}

fn cmd_dos(common: &CommonFlags, sharp_norm: bool, io: &IoFlags) -> Result<()> {
    let cfg = common.resolve()?;
    let (lo, hi) = cfg.window.i();
    // Sanity: the rescaled window lambda*I must land inside the spectrum.
    let (s_lo, s_hi) = spectrum_window(cfg.q, cfg.lambda, cfg.law.support());
    if cfg.lambda * lo < s_lo || cfg.lambda * hi > s_hi {
        return Err(Error::Config(format!(
            "lambda*I = [{}, {}] is not inside the spectrum [{s_lo}, {s_hi}]",
            cfg.lambda * lo,
            cfg.lambda * hi
        )));
    }
    let expansion = Expansion::new(ExpansionParams {
        q: cfg.q,
        lambda: cfg.lambda,
        order: cfg.order,
        window: cfg.window,
        law: cfg.law.clone(),
    })?;
    let sharp_budget = sharp_norm.then(|| {
        remainder_budget_with_norm(&cfg.window, cfg.q, &cfg.law, cfg.order, true)
    });
    let even_orders: Vec<usize> = (0..=cfg.order).filter(|n| n % 2 == 0).collect();
    let mut rows = Vec::with_capacity(cfg.grid);
    for xi in interior_grid(lo, hi, cfg.grid)? {
        let dos = expansion.dos_density(xi)?;
        let coefficients: Result<Vec<f64>> = even_orders
            .iter()
            .map(|&n| expansion.dos_coefficient(n, xi))
            .collect();
        let (remainder_bound, rigorous) = match &sharp_budget {
            Some(budget) => (
                budget.c_n_delta * cfg.lambda.powi(-(cfg.order as i32) - 2)
                    / std::f64::consts::PI,
                false,
            ),
            None => (dos.remainder_bound, dos.rigorous),
        };
        rows.push(DosRow {
            xi,
            energy: cfg.lambda * xi,
            value: dos.value,
            remainder_bound,
            rigorous,
            coefficients: coefficients?,
        });
    }
    match io.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("xi,E,value,remainder_bound,rigorous");
            for &n in &even_orders {
                out.push_str(&format!(",a{n}"));
            }
            out.push('\n');
            for row in &rows {
                out.push_str(&format!(
                    "{},{},{},{},{}",
                    sci(row.xi),
                    sci(row.energy),
                    sci(row.value),
                    sci(row.remainder_bound),
                    row.rigorous
                ));
                for c in &row.coefficients {
                    out.push(',');
                    out.push_str(&sci(*c));
                }
                out.push('\n');
            }
            emit(io, &out)
        }
        Format::Json => {
            let mut json = serde_json::to_string_pretty(&rows)?;
            json.push('\n');
            emit(io, &json)
        }
    }
}

#[derive(Serialize)]
struct McComparePoint {
    zeta: [f64; 2],
    mc: McResultRecord,
    expansion: [f64; 2],
    abs_difference: f64,
    tolerance: f64,
    remainder_bound: f64,
    rigorous: bool,
    pass: bool,
}

#[derive(Serialize)]
struct McCompareReport {
    points: Vec<McComparePoint>,
    passed: usize,
    total: usize,
    all_pass: bool,
}

fn cmd_mc_compare(
    common: &CommonFlags,
    height: f64,
    points: usize,
    stderr_ceiling: Option<f64>,
    io: &IoFlags,
) -> Result<()> {
    if !(height > 0.0) {
        return Err(Error::McConfig(format!(
            "evaluation points need Im zeta > 0, got height {height}"
        )));
    }
    let cfg = common.resolve()?;
    let expansion = Expansion::new(ExpansionParams {
        q: cfg.q,
        lambda: cfg.lambda,
        order: cfg.order,
        window: cfg.window,
        law: cfg.law.clone(),
    })?;
    let (lo, hi) = cfg.window.i();
    let mut report = McCompareReport {
        points: Vec::with_capacity(points),
        passed: 0,
        total: points,
        all_pass: false,
    };
    for (j, xi) in interior_grid(lo, hi, points)?.into_iter().enumerate() {
        let zeta = Complex64::new(xi, height);
        let partial = expansion.m_partial(zeta)?;
        let mc_cfg = MCConfig {
            q: cfg.q,
            lambda: cfg.lambda,
            // The expansion works at the rescaled point zeta = z / lambda.
            z: cfg.lambda * zeta,
            depth: cfg.depth,
            samples: cfg.samples,
            seed: cfg.seed.wrapping_add(j as u64),
            law: cfg.law.clone(),
            stderr_ceiling,
        };
        let estimate = mc_average(&mc_cfg)?;
        let diff = (estimate.mean - partial.value).norm();
        let tolerance = 3.0 * estimate.stderr + partial.remainder_bound;
        let pass = diff <= tolerance;
        if pass {
            report.passed += 1;
        }
        report.points.push(McComparePoint {
            zeta: [zeta.re, zeta.im],
            mc: McResultRecord::from_estimate(&estimate, cfg.depth, mc_cfg.seed),
            expansion: [partial.value.re, partial.value.im],
            abs_difference: diff,
            tolerance,
            remainder_bound: partial.remainder_bound,
            rigorous: partial.rigorous,
            pass,
        });
    }
    report.all_pass = report.passed == report.total;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    emit(io, &json)?;
    if report.all_pass {
        Ok(())
    } else {
        Err(Error::McConfig(format!(
            "{} of {} comparison points outside 3 sigma + truncation bound",
            report.total - report.passed,
            report.total
        )))
    }
}

fn cmd_verify() -> ExitCode {
    let results = run_all_checks();
    let mut all_pass = true;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag}  {:<42} {}", r.name, r.detail);
        all_pass &= r.passed;
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} checks passed", results.len());
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Coeffs { n_max, io } => cmd_coeffs(*n_max, io),
        Command::Transforms {
            k_max,
            zeta,
            common,
            io,
        } => cmd_transforms(*k_max, zeta, common, io),
        Command::Dos {
            common,
            sharp_norm,
            io,
        } => cmd_dos(common, *sharp_norm, io),
        Command::McCompare {
            common,
            height,
            points,
            stderr_ceiling,
            io,
        } => cmd_mc_compare(common, *height, *points, *stderr_ceiling, io),
        Command::Verify => return cmd_verify(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
