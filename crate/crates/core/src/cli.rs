//! Command-line front end.
//!
//! All data moves through files; stdout only carries short summaries.
//! Exit codes: 0 success, 1 invalid input, 2 numeric failure
//! (disconnected graph, non-convergence).

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::diagnostics::{ct_limit_gap, decompose, peakiness};
use crate::error::{Error, Result};
use crate::experiments::{
    equivalence_study, low_label_experiment, scaling_study, synth_blobs, synth_two_moons, DatasetSpec,
    EquivalenceParams, ExperimentReport, LowLabelParams, ScalingParams, SyntheticDataset,
};
use crate::graph::{build_knn_graph, load_graph, load_labels, save_graph};
use crate::methods::{MaskMode, MethodSpec, SolutionJson, SslSolution};
use crate::solvers::{PinvNormalization, SolverConfig};

#[derive(Debug, Parser)]
#[command(name = "graphssl", version, about = "Graph semi-supervised learning in kernel form")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset (CSV: class,x0,x1,...)
    Gen(GenArgs),
    /// Build a Gaussian kNN graph from a dataset file
    Graph(GraphArgs),
    /// Run a learning method on a graph and labels, writing solution JSON
    Run(RunArgs),
    /// Print the kernel decomposition (K, alpha, c) of a solution
    Decompose(DecomposeArgs),
    /// Commute time, kernel entry and peakiness diagnostics
    Diagnose(DiagnoseArgs),
    /// Run one of the studies and write <study>_<seed>.csv/.json
    Study(StudyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Laplace,
    Regularize,
    Poisson,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MaskArg {
    LabeledOnly,
    Full,
}

impl From<MaskArg> for MaskMode {
    fn from(m: MaskArg) -> Self {
        match m {
            MaskArg::LabeledOnly => MaskMode::LabeledOnly,
            MaskArg::Full => MaskMode::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormArg {
    MeanZero,
    DegreeMeanZero,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Relative residual tolerance
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    /// Iteration cap (default 10 n)
    #[arg(long)]
    max_iter: Option<usize>,
    /// Representative returned by pseudoinverse solves
    #[arg(long, value_enum, default_value = "mean-zero")]
    pinv_normalization: NormArg,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            rel_tol: self.rel_tol,
            max_iter: self.max_iter,
            pinv_normalization: match self.pinv_normalization {
                NormArg::MeanZero => PinvNormalization::MeanZero,
                NormArg::DegreeMeanZero => PinvNormalization::DegreeMeanZero,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
#[group(id = "kind", required = true, multiple = false)]
struct DatasetKind {
    /// Two interleaved half circles
    #[arg(long)]
    two_moons: bool,
    /// Gaussian blobs around --centers
    #[arg(long)]
    blobs: bool,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    kind: DatasetKind,
    /// Number of points
    #[arg(long)]
    n: usize,
    /// Two-moons noise standard deviation
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Blob centers, e.g. "0,0;3,3"
    #[arg(long)]
    centers: Option<String>,
    /// Blob standard deviation
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Dataset file written by `gen`
    #[arg(long)]
    points: PathBuf,
    /// Neighbors per point
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Gaussian width (default: mean k-th neighbor distance)
    #[arg(long)]
    sigma: Option<f64>,
    /// Output graph file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Data-term weight for `regularize`
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Where the regularization loss applies
    #[arg(long, value_enum, default_value = "labeled-only")]
    mask_mode: MaskArg,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output solution JSON
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Solution JSON written by `run`
    #[arg(long)]
    solution: PathBuf,
    /// Optional JSON copy of the report
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[arg(long)]
    graph: PathBuf,
    /// First node of the commute-time pair
    #[arg(long, requires = "j")]
    i: Option<usize>,
    /// Second node of the commute-time pair
    #[arg(long, requires = "i")]
    j: Option<usize>,
    /// Labels file, for peakiness
    #[arg(long, requires = "solution")]
    labels: Option<PathBuf>,
    /// Solution JSON, for peakiness
    #[arg(long, requires = "labels")]
    solution: Option<PathBuf>,
    /// Peakiness band as a fraction of the score range
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// CSV file for the commute-time row (n,i,j,ct,ct_limit,relative_gap,k_ij)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[command(subcommand)]
    study: Study,
}

#[derive(Debug, Subcommand)]
enum Study {
    /// Commute-time and kernel-entry degeneracy on growing two-moons graphs
    Scaling(ScalingArgs),
    /// Method comparison with few labels per class
    Lowlabel(LowLabelArgs),
    /// Poisson scores versus the shifted pseudoinverse on random graphs
    Equivalence(EquivalenceArgs),
}

#[derive(Debug, Args)]
struct CommonStudyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trials: Option<usize>,
    /// Directory for the CSV and JSON outputs
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct ScalingArgs {
    /// Comma-separated, strictly increasing sizes
    #[arg(long, value_delimiter = ',', default_values_t = [200usize, 400, 800, 1600])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[command(flatten)]
    common: CommonStudyArgs,
}

#[derive(Debug, Args)]
struct LowLabelArgs {
    #[arg(long, default_value_t = 1600)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    labels_per_class: usize,
    /// Comma-separated methods
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Laplace, MethodArg::Regularize, MethodArg::Poisson])]
    methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value = "labeled-only")]
    mask_mode: MaskArg,
    /// Peakiness band as a fraction of the score range
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[command(flatten)]
    common: CommonStudyArgs,
}

#[derive(Debug, Args)]
struct EquivalenceArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    edge_prob: f64,
    #[arg(long, default_value_t = 0.1)]
    label_fraction: f64,
    #[command(flatten)]
    common: CommonStudyArgs,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    let msg = e.to_string();
                    eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
                    1
                }
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                2
            } else {
                1
            }
        }
    }
}

fn method_spec(method: MethodArg, lambda: f64, mask: MaskArg) -> MethodSpec {
    match method {
        MethodArg::Laplace => MethodSpec::Laplace,
        MethodArg::Regularize => MethodSpec::Regularize {
            lambda,
            mask: mask.into(),
        },
        MethodArg::Poisson => MethodSpec::Poisson,
    }
}

fn parse_centers(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(|c| {
            c.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::invalid(format!("bad center coordinate `{x}`: {e}")))
                })
                .collect()
        })
        .collect()
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("--{name} must be positive, got {v}")))
    }
}

fn read_solution(path: &PathBuf) -> Result<SslSolution> {
    let json: SolutionJson = serde_json::from_str(&fs::read_to_string(path)?)?;
    SslSolution::from_json(json)
}

fn write_report(report: &ExperimentReport, dir: &PathBuf) -> Result<()> {
    let (csv, json) = report.write(dir)?;
    println!("{}: {} rows -> {}, {}", report.experiment, report.rows.len(), csv.display(), json.display());
    for cell in report.summary() {
        let metrics: Vec<String> = cell
            .metrics
            .iter()
            .filter(|(k, _)| k.as_str() != "runtime_ms")
            .map(|(k, s)| format!("{k}={:.4}", s.mean))
            .collect();
        println!("  n={} {}: {}", cell.n, cell.method, metrics.join(" "));
    }
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => {
            let data = if a.kind.two_moons {
                synth_two_moons(a.n, a.noise, a.seed)?
            } else {
                let centers = a
                    .centers
                    .as_deref()
                    .ok_or_else(|| Error::invalid("--blobs requires --centers"))
                    .and_then(parse_centers)?;
                synth_blobs(a.n, &centers, a.sigma, a.seed)?
            };
            data.save(&a.out)?;
            println!("wrote {} points to {}", data.points.len(), a.out.display());
        }
        Command::Graph(a) => {
            if let Some(s) = a.sigma {
                positive("sigma", s)?;
            }
            let (points, _) = SyntheticDataset::load_points(&a.points)?;
            let g = build_knn_graph(&points, a.k, a.sigma)?;
            save_graph(&g, &a.out)?;
            println!(
                "wrote graph with {} nodes, {} edges, {} component(s) to {}",
                g.n(),
                g.edge_count(),
                g.component_count(),
                a.out.display()
            );
        }
        Command::Run(a) => {
            let cfg = a.solver.config()?;
            if matches!(a.method, MethodArg::Regularize) {
                positive("lambda", a.lambda)?;
            }
            let g = load_graph(&a.graph)?;
            let labels = load_labels(&a.labels, g.n())?;
            let sol = method_spec(a.method, a.lambda, a.mask_mode).run(&g, &labels, &cfg)?;
            fs::write(&a.out, serde_json::to_string_pretty(&sol.to_json())?)?;
            println!(
                "{}: {} iterations, residual {:.3e}, offset {}, wrote {}",
                sol.method.name(),
                sol.report.iterations,
                sol.report.final_residual,
                sol.offset,
                a.out.display()
            );
        }
        Command::Decompose(a) => {
            let g = load_graph(&a.graph)?;
            let labels = load_labels(&a.labels, g.n())?;
            let sol = read_solution(&a.solution)?;
            let d = decompose(&sol, &g, &labels)?;
            println!("{:<12} {:<16} {:>8} {:>14} {:>14} {:>12}", "method", "kernel", "|alpha|", "sum(alpha)", "offset", "recon_err");
            println!(
                "{:<12} {:<16} {:>8} {:>14.6e} {:>14.6e} {:>12.3e}",
                d.method.name(),
                d.kernel_label(),
                d.alpha.len(),
                d.alpha_sum,
                d.offset,
                d.reconstruction_error
            );
            if let Some(out) = &a.out {
                fs::write(out, serde_json::to_string_pretty(&d)?)?;
            }
        }
        Command::Diagnose(a) => {
            let cfg = a.solver.config()?;
            let g = load_graph(&a.graph)?;
            println!(
                "n={} edges={} volume={} components={}",
                g.n(),
                g.edge_count(),
                g.volume(),
                g.component_count()
            );
            if let (Some(i), Some(j)) = (a.i, a.j) {
                let m = ct_limit_gap(&g, i, j, &cfg)?;
                println!(
                    "ct({i},{j})={} ct_limit={} relative_gap={} k_ij={}",
                    m.ct, m.ct_limit, m.relative_gap, m.k_ij
                );
                if let Some(out) = &a.out {
                    let mut w = csv::Writer::from_path(out)?;
                    w.serialize(m)?;
                    w.flush()?;
                }
            }
            if let (Some(lp), Some(sp)) = (&a.labels, &a.solution) {
                let labels = load_labels(lp, g.n())?;
                let sol = read_solution(sp)?;
                if sol.u.len() != g.n() {
                    return Err(Error::DimensionMismatch {
                        expected: g.n(),
                        actual: sol.u.len(),
                    });
                }
                println!("peakiness(eps={})={}", a.epsilon, peakiness(&sol.u, &labels, a.epsilon)?);
            }
        }
        Command::Study(s) => match s.study {
            Study::Scaling(a) => {
                let cfg = a.common.solver.config()?;
                if let Some(s) = a.sigma {
                    positive("sigma", s)?;
                }
                let defaults = ScalingParams::default();
                let params = ScalingParams {
                    sizes: a.sizes,
                    k: a.k,
                    sigma: a.sigma,
                    noise: a.noise,
                    probes: defaults.probes,
                    trials: a.common.trials.unwrap_or(defaults.trials),
                    seed: a.common.seed,
                };
                write_report(&scaling_study(&params, &cfg)?, &a.common.out_dir)?;
            }
            Study::Lowlabel(a) => {
                let cfg = a.common.solver.config()?;
                positive("lambda", a.lambda)?;
                if let Some(s) = a.sigma {
                    positive("sigma", s)?;
                }
                let params = LowLabelParams {
                    dataset: DatasetSpec::TwoMoons { n: a.n, noise: a.noise },
                    labels_per_class: a.labels_per_class,
                    methods: a.methods.iter().map(|&m| method_spec(m, a.lambda, a.mask_mode)).collect(),
                    trials: a.common.trials.unwrap_or(20),
                    k: a.k,
                    sigma: a.sigma,
                    epsilon_fraction: a.epsilon,
                    seed: a.common.seed,
                };
                write_report(&low_label_experiment(&params, &cfg)?, &a.common.out_dir)?;
            }
            Study::Equivalence(a) => {
                let cfg = a.common.solver.config()?;
                let params = EquivalenceParams {
                    n: a.n,
                    edge_prob: a.edge_prob,
                    label_fraction: a.label_fraction,
                    trials: a.common.trials.unwrap_or(50),
                    seed: a.common.seed,
                };
                write_report(&equivalence_study(&params, &cfg)?, &a.common.out_dir)?;
            }
        },
    }
    Ok(())
}
