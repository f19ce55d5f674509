use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hard_disks::io::{render_svg, write_csv, OutputFormat, PointsDocument, StatsSidecar};
use hard_disks::validation::{
    estimate_density, iteration_scaling_experiment, oracle_equivalence_test, runtime_scaling_experiment,
    ExperimentReport, NamedTest, OracleConfig, SamplerUnderTest, ScalingConfig,
};
use hard_disks::{prs_sample, BoundsReport, Error, ModelParams, RandomStream, DEFAULT_MAX_ITERATIONS};

const EXIT_USAGE: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_VALIDATION: u8 = 4;
const EXIT_IO: u8 = 5;

const SVG_CANVAS_PX: u32 = 1000;
const FAMILY_ALPHA: f64 = 1e-3;

#[derive(Parser)]
#[command(
    name = "hard-disks",
    version,
    about = "Exact sampling of hard spheres by partial rejection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one configuration and write it as CSV, JSON or SVG.
    Sample {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Generated and printed to stderr when omitted.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
        max_iterations: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Points go here and statistics to `<output>.stats.json`. Without it,
        /// points go to stdout and statistics to stderr.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the analytic constants for a dimension as JSON.
    Bounds {
        #[arg(long)]
        dim: usize,
        /// Defaults to the best proven fugacity threshold for `dim`.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Iteration-count or wall-time scaling over a list of radii.
    Bench {
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = BenchMode::Iterations)]
        mode: BenchMode,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
        max_iterations: usize,
        /// Report JSON destination; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Statistical comparison against classical rejection sampling.
    Validate {
        #[arg(long, value_enum, default_value_t = Profile::Quick)]
        profile: Profile,
        #[arg(long)]
        seed: Option<u64>,
        /// Verdict JSON destination; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Svg => OutputFormat::Svg,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchMode {
    Iterations,
    Runtime,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Profile {
    Quick,
    Full,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(path: &Path, e: io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::IterationCapExceeded { .. } | Error::AttemptCapExceeded { .. } => EXIT_CAP,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn seed_or_fresh(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn emit(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::io(p, e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::io(Path::new("<stdout>"), e))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".stats.json");
    PathBuf::from(name)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    lambda: f64,
    radius: f64,
    dim: usize,
    seed: Option<u64>,
    max_iterations: usize,
    format: Format,
    output: Option<&Path>,
) -> CmdResult {
    let params = ModelParams::new(dim, radius, lambda)?;
    if matches!(format, Format::Svg) && dim != 2 {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "svg output needs --dim 2".into(),
        });
    }
    let seed = seed_or_fresh(seed);
    let out = match prs_sample(&params, &mut RandomStream::new(seed), max_iterations) {
        Ok(out) => out,
        Err(Error::IterationCapExceeded { stats }) => {
            return Err(Failure {
                code: EXIT_CAP,
                message: format!(
                    "iteration cap {max_iterations} reached with {} bad pairs left (seed {seed})",
                    stats.bad_pair_trace.last().copied().unwrap_or(0)
                ),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let body = match OutputFormat::from(format) {
        OutputFormat::Csv => write_csv(&out.points),
        OutputFormat::Json => to_json(&PointsDocument::new(&out.points, &params)),
        OutputFormat::Svg => render_svg(&out.points, radius, SVG_CANVAS_PX)?,
    };
    let density = estimate_density(&out.points, &params)?;
    let sidecar = to_json(&StatsSidecar::new(seed, &params, &out.stats, density));
    emit(output, &body)?;
    match output {
        Some(p) => {
            let side = sidecar_path(p);
            fs::write(&side, sidecar).map_err(|e| Failure::io(&side, e))
        }
        None => {
            eprint!("{sidecar}");
            Ok(())
        }
    }
}

fn cmd_bounds(dim: usize, lambda: Option<f64>) -> CmdResult {
    let lambda = match lambda {
        Some(l) => l,
        None => hard_disks::bounds::lambda_bar(dim, dim == 2)?,
    };
    let report = BoundsReport::new(dim, lambda)?;
    if !report.within_crude_regime {
        eprintln!(
            "warning: lambda {lambda} exceeds the crude threshold {:.6}; the convergence guarantee relies on {}",
            report.lambda_bar_crude,
            match report.lambda_bar_improved {
                Some(bar) if lambda <= bar => "the improved estimate",
                _ => "nothing proven",
            }
        );
    }
    emit(None, &to_json(&report))
}

fn print_table(report: &ExperimentReport) {
    eprintln!(
        "{:>12} {:>6} {:>6} {:>10} {:>8} {:>12} {:>10}",
        "radius", "reps", "caps", "mean T", "±95%", "median ms", "density"
    );
    for c in &report.cells {
        eprintln!(
            "{:>12.6} {:>6} {:>6} {:>10.3} {:>8.3} {:>12.3} {:>10.4}",
            c.radius,
            c.reps,
            c.cap_failures,
            c.mean_iterations,
            c.iterations_ci95,
            c.median_wall_time_s * 1e3,
            c.mean_density
        );
    }
    if !report.successive_differences.is_empty() {
        eprintln!(
            "successive differences of mean T: {:.3?}",
            report.successive_differences
        );
    }
    if !report.time_ratios.is_empty() {
        eprintln!("median time ratios: {:.3?}", report.time_ratios);
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    lambda: f64,
    radii: Vec<f64>,
    reps: usize,
    seed: Option<u64>,
    mode: BenchMode,
    dim: usize,
    max_iterations: usize,
    output: Option<&Path>,
) -> CmdResult {
    let seed = seed_or_fresh(seed);
    let config = ScalingConfig {
        dim,
        max_iterations,
        ..ScalingConfig::new(lambda, radii, reps, seed)
    };
    let report = match mode {
        BenchMode::Iterations => iteration_scaling_experiment(&config)?,
        BenchMode::Runtime => runtime_scaling_experiment(&config)?,
    };
    print_table(&report);
    emit(output, &to_json(&report))?;
    if report.cap_failures > 0 {
        return Err(Failure {
            code: EXIT_CAP,
            message: format!("{} replicates hit the iteration cap", report.cap_failures),
        });
    }
    Ok(())
}

struct Cell {
    label: &'static str,
    dim: usize,
    radius: f64,
    lambda: f64,
    samples: usize,
    sampler: SamplerUnderTest,
}

#[derive(Serialize)]
struct CellVerdict {
    label: &'static str,
    dim: usize,
    radius: f64,
    lambda: f64,
    samples: usize,
    sampler: SamplerUnderTest,
    tests: Vec<NamedTest>,
    passed: bool,
}

#[derive(Serialize)]
struct ValidationVerdict {
    profile: Profile,
    seed: u64,
    family_alpha: f64,
    per_test_threshold: f64,
    cells: Vec<CellVerdict>,
    passed: bool,
}

fn battery(profile: Profile) -> Vec<Cell> {
    let quick = Cell {
        label: "planar",
        dim: 2,
        radius: 0.25,
        lambda: 0.3,
        samples: 10_000,
        sampler: SamplerUnderTest::Prs,
    };
    match profile {
        Profile::Quick => vec![quick],
        Profile::Full => vec![
            quick,
            Cell {
                label: "line",
                dim: 1,
                radius: 0.2,
                lambda: 0.2,
                samples: 10_000,
                sampler: SamplerUnderTest::Prs,
            },
            Cell {
                label: "space",
                dim: 3,
                radius: 0.25,
                lambda: 0.1,
                samples: 10_000,
                sampler: SamplerUnderTest::Prs,
            },
            Cell {
                label: "skip-resample control (expected to be rejected)",
                dim: 2,
                radius: 0.25,
                lambda: 0.3,
                samples: 10_000,
                sampler: SamplerUnderTest::SkipResample,
            },
        ],
    }
}

fn tests_in(cell: &Cell) -> usize {
    // The control is judged on the count test alone.
    match cell.sampler {
        SamplerUnderTest::Prs => 2,
        SamplerUnderTest::SkipResample => 1,
    }
}

fn cmd_validate(profile: Profile, seed: Option<u64>, output: Option<&Path>) -> CmdResult {
    let seed = seed_or_fresh(seed);
    let cells = battery(profile);
    let threshold = FAMILY_ALPHA / cells.iter().map(tests_in).sum::<usize>() as f64;
    let mut verdicts = Vec::new();
    for (k, cell) in cells.iter().enumerate() {
        let params = ModelParams::new(cell.dim, cell.radius, cell.lambda)?;
        let config = OracleConfig {
            threshold,
            sampler: cell.sampler,
            ..OracleConfig::default()
        };
        // Disjoint seed ranges per cell: each cell consumes 2·samples seeds.
        let base = seed.wrapping_add(4 * cell.samples as u64 * k as u64);
        let report = oracle_equivalence_test(&params, cell.samples, base, &config)?;
        let passed = report.passed();
        eprintln!(
            "{} {}: {}",
            if passed { "pass" } else { "FAIL" },
            cell.label,
            report
                .tests
                .iter()
                .map(|t| format!("{} p={:.3e}", t.name, t.p_value))
                .collect::<Vec<_>>()
                .join(", ")
        );
        verdicts.push(CellVerdict {
            label: cell.label,
            dim: cell.dim,
            radius: cell.radius,
            lambda: cell.lambda,
            samples: cell.samples,
            sampler: cell.sampler,
            tests: report.tests,
            passed,
        });
    }
    let passed = verdicts.iter().all(|v| v.passed);
    let verdict = ValidationVerdict {
        profile,
        seed,
        family_alpha: FAMILY_ALPHA,
        per_test_threshold: threshold,
        cells: verdicts,
        passed,
    };
    emit(output, &to_json(&verdict))?;
    if passed {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VALIDATION,
            message: "validation battery failed".into(),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample {
            lambda,
            radius,
            dim,
            seed,
            max_iterations,
            format,
            output,
        } => cmd_sample(lambda, radius, dim, seed, max_iterations, format, output.as_deref()),
        Command::Bounds { dim, lambda } => cmd_bounds(dim, lambda),
        Command::Bench {
            lambda,
            radii,
            reps,
            seed,
            mode,
            dim,
            max_iterations,
            output,
        } => cmd_bench(lambda, radii, reps, seed, mode, dim, max_iterations, output.as_deref()),
        Command::Validate { profile, seed, output } => cmd_validate(profile, seed, output.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
