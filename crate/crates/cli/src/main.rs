use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cocluster::bench::bench;
use cocluster::io;
use cocluster::model::{gaussian_knn_weights_slices, KernelScale};
use cocluster::synth::{checkerboard, Checkerboard};
use cocluster::tensor::{tensor_clusters, TensorProblem};
use cocluster::{
    extract_clusters, solve, tensor_solve, Algorithm, Alpha, DenseTensor, Error, Norm, ProblemInstance, SolverParams,
    StepPolicy, WeightGraph,
};

#[derive(Parser)]
#[command(name = "cocluster", version, about = "Convex bi-clustering and tensor co-clustering solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write the trace, assignments and solution.
    Run(RunArgs),
    /// Run several algorithms on the same instance and report timings.
    Bench(BenchArgs),
    /// Generate checkerboard data with ground-truth labels.
    Synth(SynthArgs),
    /// Compute a fusion weight graph and write it as "i,j,w" lines.
    Weights(WeightsArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scheme {
    KnnGaussian,
    Uniform,
    File,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Matrix CSV, or a tensor file with --tensor.
    #[arg(long)]
    input: PathBuf,
    /// Read the input as a "tensor J n1 .. nJ" file.
    #[arg(long)]
    tensor: bool,
}

#[derive(Args, Clone)]
struct WeightArgs {
    #[arg(long, value_enum, default_value = "knn-gaussian")]
    weights: Scheme,
    /// Neighbours per slice (clamped to the slice count minus one).
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Kernel scale: "auto" or a non-negative number.
    #[arg(long, default_value = "auto")]
    phi: String,
    /// Weight files for --weights file, one per mode in mode order.
    #[arg(long = "weights-path")]
    weights_path: Vec<PathBuf>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value = "2")]
    q: Norm,
    /// Augmented-Lagrangian parameter; for davis-yin this fixes the step.
    #[arg(long)]
    rho: Option<f64>,
    /// Generalized ADMM constant: "auto" or a positive number.
    #[arg(long, default_value = "auto")]
    alpha: String,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long)]
    accelerate: bool,
    /// COBRA sub-problem solver.
    #[arg(long, default_value = "gadmm")]
    subsolver: Algorithm,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "gadmm")]
    algorithm: Algorithm,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    weights: WeightArgs,
    /// Recorded in the summary; the run itself draws no random numbers.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edges whose copy-variable norm is at most this are fused.
    #[arg(long = "cluster-tol", default_value_t = 0.0)]
    cluster_tol: f64,
    #[arg(long = "trace-out")]
    trace_out: Option<PathBuf>,
    #[arg(long = "assign-out")]
    assign_out: Option<PathBuf>,
    #[arg(long = "solution-out")]
    solution_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated algorithm list.
    #[arg(long, value_delimiter = ',', default_value = "admm,gadmm,davis-yin,cobra")]
    algorithms: Vec<Algorithm>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    weights: WeightArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "report-out")]
    report_out: Option<PathBuf>,
    /// Directory receiving one "<algorithm>.trace.csv" per run.
    #[arg(long = "trace-dir")]
    trace_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Comma-separated sizes, one per mode.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    /// Comma-separated block counts, one per mode.
    #[arg(long, value_delimiter = ',', required = true)]
    blocks: Vec<usize>,
    #[arg(long = "noise-sd", default_value_t = 1.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Data file; matrix CSV for two modes unless --tensor is given.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    tensor: bool,
    /// Ground-truth labels as "mode,index,cluster".
    #[arg(long = "labels-out")]
    labels_out: Option<PathBuf>,
}

#[derive(Args)]
struct WeightsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0)]
    mode: usize,
    #[arg(long, value_enum, default_value = "knn-gaussian")]
    weights: Scheme,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value = "auto")]
    phi: String,
    #[arg(long)]
    out: PathBuf,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Input(anyhow::Error),
    Solver(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn solver_failure(e: Error) -> Failure {
    match e {
        Error::Diverged { .. } | Error::Subproblem { .. } | Error::Numerical { .. } => Failure::Solver(e.into()),
        other => Failure::Input(other.into()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Bench(a) => run_bench(a),
        Command::Synth(a) => synth(a).map(|_| true).map_err(Failure::Input),
        Command::Weights(a) => weights(a).map(|_| true).map_err(Failure::Input),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn parse_phi(s: &str) -> anyhow::Result<KernelScale<f64>> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(KernelScale::Auto);
    }
    let v: f64 = s.parse().with_context(|| format!("--phi {s:?} is neither auto nor a number"))?;
    if !(v >= 0.0) || !v.is_finite() {
        bail!("--phi must be finite and >= 0");
    }
    Ok(KernelScale::Fixed(v))
}

fn params(a: &SolverArgs, alg: Algorithm) -> anyhow::Result<SolverParams<f64>> {
    let mut p = SolverParams {
        tol: a.tol,
        max_iter: a.max_iter,
        accelerate: a.accelerate,
        cobra_subsolver: a.subsolver,
        ..SolverParams::default()
    };
    if let Some(r) = a.rho {
        p.rho = r;
        if alg == Algorithm::DavisYin {
            p.dy_step = StepPolicy::Fixed(r);
        }
    }
    if !a.alpha.eq_ignore_ascii_case("auto") {
        let v: f64 = a.alpha.parse().with_context(|| format!("--alpha {:?} is neither auto nor a number", a.alpha))?;
        p.alpha = Alpha::Fixed(v);
    }
    p.validate()?;
    Ok(p)
}

fn load_data(input: &InputArgs) -> anyhow::Result<DenseTensor<f64>> {
    if input.tensor {
        Ok(io::load_tensor(&input.input)?)
    } else {
        Ok(DenseTensor::from_matrix(&io::load_matrix_csv(&input.input)?))
    }
}

fn mode_graph(data: &DenseTensor<f64>, mode: usize, scheme: Scheme, k: usize, phi: &str) -> anyhow::Result<WeightGraph<f64>> {
    let n = data.dims()[mode];
    match scheme {
        Scheme::Uniform => Ok(WeightGraph::complete(n, 1.0)),
        Scheme::KnnGaussian => {
            if n < 2 {
                return Ok(WeightGraph::empty(n));
            }
            let k_eff = k.min(n - 1);
            if k_eff != k {
                log::info!("mode {mode}: using k = {k_eff} for {n} slices");
            }
            Ok(gaussian_knn_weights_slices(data.values(), data.dims(), mode, k_eff, parse_phi(phi)?)?)
        }
        Scheme::File => bail!("--weights file needs one --weights-path per mode"),
    }
}

fn build_graphs(data: &DenseTensor<f64>, w: &WeightArgs) -> anyhow::Result<Vec<WeightGraph<f64>>> {
    if w.weights == Scheme::File {
        if w.weights_path.len() != data.order() {
            bail!(
                "--weights file needs {} --weights-path values (one per mode), got {}",
                data.order(),
                w.weights_path.len()
            );
        }
        return w
            .weights_path
            .iter()
            .zip(data.dims())
            .map(|(p, &n)| io::load_weight_graph(p, n).map_err(Into::into))
            .collect();
    }
    (0..data.order()).map(|m| mode_graph(data, m, w.weights, w.k, &w.phi)).collect()
}

fn write(path: &Path, contents: String) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(a: RunArgs) -> Result<bool, Failure> {
    let data = load_data(&a.input)?;
    let graphs = build_graphs(&data, &a.weights)?;
    let p = params(&a.solver, a.algorithm)?;
    let lambda = a.solver.lambda;
    let q = a.solver.q;

    let (converged, iters, trace, labels, solution, objective) = if data.order() == 2 && !a.input.tensor {
        let x = data.to_matrix().map_err(anyhow::Error::from)?;
        let [rg, cg]: [WeightGraph<f64>; 2] = graphs.try_into().expect("two modes");
        let inst = ProblemInstance::new(x, rg, cg, lambda, q).map_err(solver_failure)?;
        let (state, trace) = solve(&inst, a.algorithm, &p).map_err(solver_failure)?;
        let clusters = extract_clusters(&state.v, inst.operators(), q, a.cluster_tol);
        let objective = cocluster::objective_value(&inst, &state.u).map_err(solver_failure)?;
        (state.converged, state.iter, trace, clusters, io::format_matrix_csv(&state.u), objective)
    } else {
        let inst = TensorProblem::new(data, graphs, lambda, q).map_err(solver_failure)?;
        let (state, trace) = tensor_solve(&inst, a.algorithm, &p).map_err(solver_failure)?;
        let clusters = tensor_clusters(&inst, &state, a.cluster_tol);
        let objective = inst.objective(&state.u).map_err(solver_failure)?;
        (state.converged, state.iter, trace, clusters, io::format_tensor(&state.u), objective)
    };

    if let Some(path) = &a.trace_out {
        write(path, io::format_trace(&trace))?;
    }
    if let Some(path) = &a.assign_out {
        write(path, io::format_assignments(&labels))?;
    }
    if let Some(path) = &a.solution_out {
        write(path, solution)?;
    }
    println!("algorithm: {}", a.algorithm);
    println!("seed: {}", a.seed);
    println!("final objective: {objective}");
    println!("iterations: {iters}");
    println!("converged: {converged}");
    let counts: Vec<String> = labels.n_clusters.iter().map(|c| c.to_string()).collect();
    println!("clusters per mode: {}", counts.join(","));
    Ok(converged)
}

fn run_bench(a: BenchArgs) -> Result<bool, Failure> {
    let x = io::load_matrix_csv(&a.input).map_err(anyhow::Error::from)?;
    let data = DenseTensor::from_matrix(&x);
    let graphs = build_graphs(&data, &a.weights)?;
    let [rg, cg]: [WeightGraph<f64>; 2] = graphs.try_into().expect("two modes");
    let inst = ProblemInstance::new(x, rg, cg, a.solver.lambda, a.solver.q).map_err(solver_failure)?;
    let mut p = params(&a.solver, Algorithm::Gadmm)?;
    if let Some(r) = a.solver.rho {
        p.dy_step = StepPolicy::Fixed(r);
    }
    let report = bench(&inst, &a.algorithms, &p);
    println!("seed: {}", a.seed);
    println!("data sha256: {}", report.checksum);
    let csv = report.to_csv();
    print!("{csv}");
    if let Some(path) = &a.report_out {
        write(path, csv)?;
    }
    if let Some(dir) = &a.trace_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for e in &report.entries {
            write(&dir.join(format!("{}.trace.csv", e.algorithm)), io::format_trace(&e.trace))?;
        }
    }
    Ok(report.entries.iter().all(|e| e.converged))
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let s = checkerboard(&Checkerboard { dims: a.dims, blocks: a.blocks, noise_sd: a.noise_sd, seed: a.seed })?;
    if s.data.order() == 2 && !a.tensor {
        write(&a.out, io::format_matrix_csv(&s.matrix()?))?;
    } else {
        write(&a.out, io::format_tensor(&s.data))?;
    }
    if let Some(path) = &a.labels_out {
        let n_clusters = s.labels.iter().map(|l| l.iter().max().map_or(0, |m| m + 1)).collect();
        let truth = cocluster::ClusterAssignment { labels: s.labels.clone(), n_clusters };
        write(path, io::format_assignments(&truth))?;
    }
    Ok(())
}

fn weights(a: WeightsArgs) -> anyhow::Result<()> {
    let data = load_data(&a.input)?;
    if a.mode >= data.order() {
        bail!("--mode {} out of range for an order-{} input", a.mode, data.order());
    }
    if a.weights == Scheme::File {
        bail!("--weights file is only meaningful for run and bench");
    }
    let g = mode_graph(&data, a.mode, a.weights, a.k, &a.phi)?;
    write(&a.out, io::format_weight_graph(&g))
}
