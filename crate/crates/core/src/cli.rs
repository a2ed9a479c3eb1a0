//! Command-line frontend.
//!
//! Every subcommand writes `<name>.csv` and `<name>.json` into the output
//! directory (`--out`, else `$GENKANT_OUT_DIR`, else the working directory)
//! and prints the JSON summary to stdout. CSV files open with `# ` comment
//! lines holding the resolved configuration; JSON files carry it under
//! `"config"`.
//!
//! Exit codes: 0 success, 1 domain error or failed verification, 2 accuracy
//! error, 64 usage error.

use crate::analysis::{
    affine_limit_probe, bernstein_spectrum, convergence_probe, dual_convergence_probe,
    gap02_survey, kernel_stochasticity_check, rate_estimate,
};
use crate::discsim::{self, DiscState};
use crate::grid::GridSpec;
use crate::measures::gamma_weights;
use crate::observable::{Observable, Polynomial};
use crate::operators::{cesaro_on_grid, GridDynamics, OperatorKind, OperatorSpec};
use crate::seqcore::KantorovichWeights;
use crate::verify::{self, VerifyConfig};
use crate::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub const OUT_DIR_ENV: &str = "GENKANT_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_ACCURACY: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "genkant",
    version,
    about = "Iterates of Kantorovich-type Markov operators"
)]
struct Cli {
    /// Output directory [default: $GENKANT_OUT_DIR, else .]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sup errors of T^m f on the standard grid, with a verdict.
    Iterate(IterateArgs),
    /// Cesàro means (f + Tf + … + T^{m−1}f)/m on the standard grid.
    Cesaro(CesaroArgs),
    /// TV distance to Lebesgue measure along dual iterates of δ_x.
    Dual(DualArgs),
    /// ‖T̂′²δ_x − T̂′δ_x‖_TV and the wedge mass at points near 1.
    Gap02(Gap02Args),
    /// Run the acceptance criteria.
    Verify(VerifyArgs),
    /// Dump α, β, γ and the pivot for one (i, x).
    Weights(WeightsArgs),
    /// Row and column sums of the kernel.
    KernelCheck(KernelArgs),
    /// Simulate the chain on the unit disc.
    DiscSim(DiscArgs),
    /// Convergence rate of Bernstein iterates against the node matrix.
    BernsteinRate(BernsteinArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Op {
    Projection,
    Bernstein,
    Mkz,
    Kantorovich,
}

#[derive(Debug, Args, Serialize)]
struct OperatorArgs {
    #[arg(long, value_enum, default_value = "kantorovich")]
    op: Op,
    /// Operator parameter (the degree k for Bernstein).
    #[arg(long, visible_alias = "k", default_value_t = 1)]
    i: u32,
    /// Polynomial observable in t, e.g. "3*t^2-4*t".
    #[arg(long)]
    f: String,
    /// Series and quadrature tolerance of each step.
    #[arg(long, default_value_t = verify::GRID_EPS)]
    eps: f64,
    #[arg(long, default_value_t = 256)]
    grid_steps: usize,
    #[arg(long, default_value_t = 20)]
    grid_depth: u32,
    #[arg(long, default_value_t = 64)]
    grid_cells: u64,
}

impl OperatorArgs {
    fn spec(&self) -> Result<OperatorSpec> {
        let kind = match self.op {
            Op::Projection => OperatorKind::Projection,
            Op::Bernstein => OperatorKind::Bernstein { k: self.i },
            Op::Mkz => OperatorKind::Mkz { i: self.i },
            Op::Kantorovich => OperatorKind::Kantorovich { i: self.i },
        };
        OperatorSpec::new(kind, self.eps)
    }

    fn grid(&self, spec: &OperatorSpec) -> Result<Vec<f64>> {
        spec.standard_grid(&GridSpec {
            uniform_steps: self.grid_steps,
            geometric_depth: self.grid_depth,
            partition_cells: self.grid_cells,
        })
    }
}

#[derive(Debug, Args, Serialize)]
struct IterateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    operator: OperatorArgs,
    /// Largest number of iterations.
    #[arg(long = "m", default_value_t = 2000)]
    m_max: usize,
    /// Sup error that counts as converged.
    #[arg(long, default_value_t = 1e-2)]
    tol: f64,
}

#[derive(Debug, Args, Serialize)]
struct CesaroArgs {
    #[command(flatten)]
    #[serde(flatten)]
    operator: OperatorArgs,
    /// Number of terms averaged.
    #[arg(long, default_value_t = 100)]
    m: usize,
}

#[derive(Debug, Args, Serialize)]
struct DualArgs {
    #[arg(long, default_value_t = 1)]
    i: u32,
    /// Starting points, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 0.9, 0.99])]
    x: Vec<f64>,
    #[arg(long = "m", default_value_t = 500)]
    m_max: usize,
    /// Mass allowed to leak into the tail per step.
    #[arg(long, default_value_t = 2e-6)]
    eps: f64,
    /// Stop once the certified distance is below this level.
    #[arg(long)]
    stop_below: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct Gap02Args {
    #[arg(long, default_value_t = 1)]
    i: u32,
    #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.99, 0.999, 0.9999])]
    x: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    /// Operator parameters, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5])]
    i: Vec<u32>,
    /// Reduced sizes for a fast smoke run.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = VerifyConfig::default().seed)]
    seed: u64,
    /// Run only these criteria, comma separated.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
}

#[derive(Debug, Args, Serialize)]
struct WeightsArgs {
    #[arg(long, default_value_t = 1)]
    i: u32,
    #[arg(long)]
    x: f64,
    /// Bound on the β tail left out.
    #[arg(long, default_value_t = 1e-12)]
    eps: f64,
}

#[derive(Debug, Args, Serialize)]
struct KernelArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5])]
    i: Vec<u32>,
    /// Number of columns checked.
    #[arg(long = "j", default_value_t = 200)]
    len: usize,
    /// Number of rows checked.
    #[arg(long, default_value_t = 200)]
    quad_points: usize,
}

#[derive(Debug, Args, Serialize)]
struct DiscArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    re: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    im: f64,
    /// Number of steps.
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, default_value_t = VerifyConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long, default_value_t = 100)]
    batches: usize,
    /// Write every this many running averages of |z|².
    #[arg(long, default_value_t = 1000)]
    every: usize,
}

#[derive(Debug, Args, Serialize)]
struct BernsteinArgs {
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value = "t^2")]
    f: String,
    #[arg(long = "m", default_value_t = 400)]
    m_max: usize,
    /// Errors below this end the run.
    #[arg(long, default_value_t = 1e-12)]
    floor: f64,
}

struct Output {
    stem: &'static str,
    csv: String,
    summary: serde_json::Value,
    passed: bool,
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_DOMAIN,
        Err(e) => {
            eprintln!("genkant: {e}");
            match e {
                Error::Accuracy { .. } => EXIT_ACCURACY,
                _ => EXIT_DOMAIN,
            }
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn execute(cli: &Cli) -> Result<bool> {
    let (command, config) = match &cli.command {
        Command::Iterate(a) => ("iterate", serde_json::to_value(a)),
        Command::Cesaro(a) => ("cesaro", serde_json::to_value(a)),
        Command::Dual(a) => ("dual", serde_json::to_value(a)),
        Command::Gap02(a) => ("gap02", serde_json::to_value(a)),
        Command::Verify(a) => ("verify", serde_json::to_value(a)),
        Command::Weights(a) => ("weights", serde_json::to_value(a)),
        Command::KernelCheck(a) => ("kernel-check", serde_json::to_value(a)),
        Command::DiscSim(a) => ("disc-sim", serde_json::to_value(a)),
        Command::BernsteinRate(a) => ("bernstein-rate", serde_json::to_value(a)),
    };
    let config = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": config.map_err(|e| Error::Parse(e.to_string()))?,
    });
    let header = format!("genkant {command}\nconfig {config}");

    let out = match &cli.command {
        Command::Iterate(a) => iterate(a, &header)?,
        Command::Cesaro(a) => cesaro(a, &header)?,
        Command::Dual(a) => dual(a, &header)?,
        Command::Gap02(a) => gap(a, &header)?,
        Command::Verify(a) => run_verify(a, &header)?,
        Command::Weights(a) => weights(a, &header)?,
        Command::KernelCheck(a) => kernel(a, &header)?,
        Command::DiscSim(a) => disc(a, &header)?,
        Command::BernsteinRate(a) => bernstein(a, &header)?,
    };

    let mut summary = serde_json::json!({ "config": config });
    if let (Some(map), serde_json::Value::Object(extra)) = (summary.as_object_mut(), out.summary) {
        map.extend(extra);
    }
    let dir = out_dir(cli);
    write_outputs(&dir, out.stem, &out.csv, &summary)?;
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Parse(e.to_string()))?;
    // a closed pipe on stdout is not an error; the files are written
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(out.passed)
}

fn write_outputs(dir: &Path, stem: &str, csv: &str, summary: &serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{stem}.csv")), csv)?;
    let mut json =
        serde_json::to_string_pretty(summary).map_err(|e| Error::Parse(e.to_string()))?;
    json.push('\n');
    std::fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(())
}

fn comment(header: &str) -> String {
    header.lines().map(|l| format!("# {l}\n")).collect()
}

fn iterate(a: &IterateArgs, header: &str) -> Result<Output> {
    let f = Polynomial::parse(&a.operator.f)?;
    let spec = a.operator.spec()?;
    let dynamics = GridDynamics::new(spec, a.operator.grid(&spec)?)?;
    let report = match spec.kind {
        OperatorKind::Kantorovich { .. } => {
            convergence_probe(&dynamics, &f, &a.operator.f, None, a.m_max, a.tol)?
        }
        _ => affine_limit_probe(&dynamics, &f, &a.operator.f, a.m_max, a.tol)?,
    };
    Ok(Output {
        stem: "iterate",
        csv: report.to_csv(header),
        summary: report.summary_json(),
        passed: true,
    })
}

fn cesaro(a: &CesaroArgs, header: &str) -> Result<Output> {
    let f = Polynomial::parse(&a.operator.f)?;
    let spec = a.operator.spec()?;
    let grid = a.operator.grid(&spec)?;
    let g = cesaro_on_grid(&spec, &f, a.m, &grid)?;
    let mut csv = comment(header);
    csv.push_str("x,cesaro,f\n");
    for (x, v) in g.grid().iter().zip(g.values()) {
        let _ = writeln!(csv, "{x:e},{v:e},{:e}", f.eval(*x));
    }
    let integral = f.integral01();
    Ok(Output {
        stem: "cesaro",
        csv,
        summary: serde_json::json!({
            "m": a.m,
            "integral": integral,
            "sup_distance_to_integral": g.sup_distance_to_constant(integral),
        }),
        passed: true,
    })
}

fn dual(a: &DualArgs, header: &str) -> Result<Output> {
    let mut csv = comment(header);
    csv.push_str("x,m,tv,lower_interval,upper_interval,cells\n");
    let mut runs = Vec::new();
    for &x in &a.x {
        let p = dual_convergence_probe(a.i, x, a.m_max, a.eps, a.stop_below)?;
        for line in p.to_csv("").lines().skip(1) {
            let _ = writeln!(csv, "{x},{line}");
        }
        let last = p.distances.last().expect("probes record the start");
        runs.push(serde_json::json!({
            "x": x,
            "steps": p.distances.len() - 1,
            "final_tv": last.value,
            "final_upper": last.upper(),
            "first_below_1e-3": p.first_below(1e-3),
            "monotone": p.is_monotone(),
        }));
    }
    Ok(Output {
        stem: "dual",
        csv,
        summary: serde_json::json!({ "i": a.i, "runs": runs }),
        passed: true,
    })
}

fn gap(a: &Gap02Args, header: &str) -> Result<Output> {
    let s = gap02_survey(a.i, &a.x, a.eps)?;
    let mut csv = comment(header);
    csv.push_str("x,gap,gap_slack,wedge,wedge_slack\n");
    for p in &s.points {
        let _ = writeln!(
            csv,
            "{},{:e},{:e},{:e},{:e}",
            p.x, p.gap, p.gap_slack, p.wedge, p.wedge_slack
        );
    }
    Ok(Output {
        stem: "gap02",
        csv,
        summary: serde_json::json!({
            "i": s.i,
            "max_gap": s.max_gap,
            "min_wedge": s.min_wedge,
            "below_two": s.passes(),
        }),
        passed: true,
    })
}

fn run_verify(a: &VerifyArgs, header: &str) -> Result<Output> {
    if a.i.is_empty() || a.i.contains(&0) {
        return Err(Error::Domain("--i needs positive values".into()));
    }
    if let Some(bad) = a.only.iter().find(|c| !(1..=verify::CRITERIA).contains(*c)) {
        return Err(Error::Domain(format!("no criterion {bad}")));
    }
    let cfg = VerifyConfig {
        i_values: a.i.clone(),
        quick: a.quick,
        seed: a.seed,
    };
    let ids: Vec<u8> = if a.only.is_empty() {
        (1..=verify::CRITERIA).collect()
    } else {
        a.only.clone()
    };
    let mut results = Vec::new();
    for id in ids {
        let r = verify::run_criterion(id, &cfg)?;
        eprintln!("{}", r.line());
        results.push(r);
    }
    let passed = results.iter().all(|r| r.passed);
    Ok(Output {
        stem: "verify",
        csv: verify::report_csv(header, &results),
        summary: verify::report_json(&results),
        passed,
    })
}

fn weights(a: &WeightsArgs, header: &str) -> Result<Output> {
    let w = KantorovichWeights::new(a.i, a.x, a.eps)?;
    let gamma = gamma_weights(a.i, a.x, w.len(), a.eps)?;
    let mut csv = comment(header);
    csv.push_str("j,alpha,beta,gamma\n");
    for (j, ((a, b), g)) in w.alphas.iter().zip(&w.betas).zip(&gamma).enumerate() {
        let _ = writeln!(csv, "{j},{a:e},{b:e},{g:e}");
    }
    Ok(Output {
        stem: "weights",
        csv,
        summary: serde_json::json!({
            "i": w.i,
            "x": w.x,
            "terms": w.len(),
            "pivot": w.pivot,
            "alpha_peak": w.alpha_peak,
            "beta_peak": w.beta_peak,
            "tail_bound": w.tail_bound,
        }),
        passed: true,
    })
}

fn kernel(a: &KernelArgs, header: &str) -> Result<Output> {
    let mut csv = comment(header);
    csv.push_str("i,row_error,column_error\n");
    let mut worst = 0.0f64;
    for &i in &a.i {
        let (row, col) = kernel_stochasticity_check(i, a.len, a.quad_points)?;
        worst = worst.max(row).max(col);
        let _ = writeln!(csv, "{i},{row:e},{col:e}");
    }
    Ok(Output {
        stem: "kernel-check",
        csv,
        summary: serde_json::json!({ "max_error": worst }),
        passed: true,
    })
}

fn disc(a: &DiscArgs, header: &str) -> Result<Output> {
    if a.every == 0 {
        return Err(Error::Domain("--every must be positive".into()));
    }
    let z0 = DiscState::new(a.re, a.im)?;
    let f = |z: DiscState| z.norm_sqr();
    let avgs = discsim::disc_cesaro_stream(f, z0, a.n, a.seed, a.stream)?;
    let est = discsim::ergodic_average(f, z0, a.n, a.seed, a.stream, a.batches)?;
    let mut csv = comment(header);
    csv.push_str("step,avg\n");
    for (k, v) in avgs.iter().enumerate() {
        if k % a.every == 0 || k == a.n {
            let _ = writeln!(csv, "{k},{v:e}");
        }
    }
    Ok(Output {
        stem: "disc-sim",
        csv,
        summary: serde_json::json!({
            "observable": "|z|^2",
            "mean": est.mean,
            "std_error": est.std_error,
            "batches": est.batches,
            "boundary_start": z0.is_boundary(),
        }),
        passed: true,
    })
}

fn bernstein(a: &BernsteinArgs, header: &str) -> Result<Output> {
    let f = Polynomial::parse(&a.f)?;
    let spec = OperatorSpec::new(OperatorKind::Bernstein { k: a.k }, verify::GRID_EPS)?;
    let dynamics = GridDynamics::new(spec, spec.standard_grid(&GridSpec::default())?)?;
    let report = affine_limit_probe(&dynamics, &f, &a.f, a.m_max, a.floor)?;
    // rate from the steps before the error reaches rounding level
    let errs: Vec<f64> = report
        .sup_errors
        .iter()
        .skip(1)
        .copied()
        .take_while(|e| *e >= a.floor)
        .collect();
    let rate = rate_estimate(&errs)?;
    let spectrum = bernstein_spectrum(a.k)?;
    let third = spectrum.get(2).copied();
    Ok(Output {
        stem: "bernstein-rate",
        csv: report.to_csv(header),
        summary: serde_json::json!({
            "k": a.k,
            "rate": rate,
            "spectrum": spectrum,
            "third_eigenvalue": third,
            "relative_difference": rate.zip(third).map(|(q, l)| (q - l).abs() / l),
        }),
        passed: true,
    })
}
