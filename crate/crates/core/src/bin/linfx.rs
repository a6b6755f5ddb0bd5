use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use linfx::generators::{gen_diagonal, gen_operator_space, gen_prop1_instance, gen_random_subspace};
use linfx::oracle::lemma1_ratio_grid;
use linfx::pipeline::{
    run_pipeline, sweep, verify_result, working_frame, PipelineError, RunConfig, RunResult, Stage, SweepSpec,
};
use linfx::{Error, Instance};

#[derive(Parser)]
#[command(name = "linfx", version, about = "Find almost-isometric copies of l_inf^m inside subspaces of l_inf^N")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance as JSON.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Put a basis instance in John position and emit its 2-summing frame.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        gamma_cut: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline on an instance and write the result JSON.
    Run(RunArgs),
    /// Recompute every quantity in a result file from its instance.
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        result: PathBuf,
        /// Also solve the exact LP for the lower constant (m <= 8).
        #[arg(long)]
        exact: bool,
    },
    /// Emit the binomial-moment ratio grid as CSV.
    LemmaCheck {
        #[arg(long, value_delimiter = ',', default_values_t = [10usize, 50, 100, 200])]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.1, 0.5, 1.0])]
        delta: Vec<f64>,
        /// Moment orders; defaults to 1..=30.
        #[arg(long, value_delimiter = ',')]
        q: Vec<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run generated Prop-1 instances over a parameter grid and write CSV.
    Sweep(SweepArgs),
}

#[derive(Subcommand)]
enum GenKind {
    /// Random nonnegative frame meeting the Prop-1 hypotheses.
    Prop1 {
        #[arg(long)]
        n: usize,
        #[arg(long = "N")]
        big_n: usize,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 0.02)]
        density: f64,
        #[arg(long, env = "LINFX_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Orthonormalized Gaussian basis of an n-dimensional subspace.
    Subspace {
        #[arg(long)]
        n: usize,
        #[arg(long = "N")]
        big_n: usize,
        #[arg(long, env = "LINFX_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// `value` on the diagonal, zero elsewhere.
    Diagonal {
        #[arg(long)]
        n: usize,
        /// Defaults to n.
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        value: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Image of l x l operators under the net embedding, as a basis instance.
    Operator {
        #[arg(long)]
        l: usize,
        #[arg(long, env = "LINFX_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON file with any of the run settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    gamma_cut: Option<f64>,
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long, env = "LINFX_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<u32>,
    /// Skip the whole-set check and draw selectors from the first attempt.
    #[arg(long)]
    no_full_set_first: bool,
    /// Do not attach the exact lower constant.
    #[arg(long)]
    no_exact: bool,
    /// Include per-stage wall-clock times.
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long = "N", value_delimiter = ',', required = true)]
    big_n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    eta: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 0.02)]
    density: f64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn fail(stage: Stage, error: Error) -> PipelineError {
    PipelineError::new(stage, error)
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| fail(Stage::Io, Error::InvalidInput(format!("{}: {e}", path.display()))))
}

fn read_instance(path: &Path) -> Result<Instance, PipelineError> {
    Instance::from_json(&read(path)?).map_err(|e| fail(Stage::Parse, e))
}

fn read_config(path: Option<&Path>) -> Result<RunConfig, PipelineError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => serde_json::from_str(&read(p)?)
            .map_err(|e| fail(Stage::Parse, Error::InvalidInput(format!("config {}: {e}", p.display())))),
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), PipelineError> {
    let io_err = |e: std::io::Error| fail(Stage::Io, Error::InvalidInput(format!("write failed: {e}")));
    match out {
        Some(p) => fs::write(p, text).map_err(io_err),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io_err),
    }
}

fn with_newline(mut s: String) -> String {
    s.push('\n');
    s
}

fn gen(kind: GenKind) -> Result<(), PipelineError> {
    let g = |e| fail(Stage::Generate, e);
    let (instance, out) = match kind {
        GenKind::Prop1 { n, big_n, gamma, density, seed, out } => {
            (Instance::from_frame(&gen_prop1_instance(n, big_n, gamma, density, seed).map_err(g)?), out)
        }
        GenKind::Subspace { n, big_n, seed, out } => {
            let mut inst = Instance::from_basis(&gen_random_subspace(n, big_n, seed).map_err(g)?);
            inst.sigma_prime = None;
            (inst, out)
        }
        GenKind::Diagonal { n, big_n, value, out } => {
            (Instance::from_frame(&gen_diagonal(n, big_n.unwrap_or(n), value).map_err(g)?), out)
        }
        GenKind::Operator { l, seed, out } => {
            let emb = gen_operator_space(l, seed).map_err(g)?;
            let mut inst = Instance::from_basis(&emb.to_basis().map_err(g)?);
            inst.sigma_prime = None;
            (inst, out)
        }
    };
    write_out(out.as_deref(), &with_newline(instance.to_json()))
}

fn run(args: RunArgs) -> Result<(), PipelineError> {
    let instance = read_instance(&args.input)?;
    let mut config = read_config(args.config.as_deref())?;
    if let Some(v) = args.eta {
        config.eta = v;
    }
    if let Some(v) = args.gamma_cut {
        config.gamma_cut = v;
    }
    if let Some(v) = args.c {
        config.c = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.budget {
        config.budget = v;
    }
    config.full_set_first &= !args.no_full_set_first;
    config.exact &= !args.no_exact;
    config.timings |= args.timings;
    let result = run_pipeline(&instance, &config)?;
    write_out(args.out.as_deref(), &with_newline(result.to_json()))
}

/// `Ok(false)` when some check failed.
fn verify(input: &Path, result: &Path, exact: bool) -> Result<bool, PipelineError> {
    let instance = read_instance(input)?;
    let result = RunResult::from_json(&read(result)?).map_err(|e| fail(Stage::Parse, e))?;
    let report = verify_result(&instance, &result, exact)?;
    write_out(None, &with_newline(serde_json::to_string_pretty(&report).expect("report serializes")))?;
    Ok(report.passed)
}

fn lemma_check(n: Vec<usize>, delta: Vec<f64>, q: Vec<u32>, out: Option<PathBuf>) -> Result<(), PipelineError> {
    let q = if q.is_empty() { (1..=30).collect() } else { q };
    let grid = lemma1_ratio_grid(&n, &delta, &q).map_err(|e| fail(Stage::Oracle, e))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for cell in &grid.cells {
        w.serialize(cell).map_err(|e| fail(Stage::Io, Error::InvalidInput(e.to_string())))?;
    }
    let bytes = w.into_inner().map_err(|e| fail(Stage::Io, Error::InvalidInput(e.to_string())))?;
    write_out(out.as_deref(), &String::from_utf8(bytes).expect("csv is utf-8"))?;
    let m = grid.max;
    eprintln!("max ratio {} at n = {}, delta = {}, q = {}", m.ratio, m.n, m.delta, m.q);
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<(), PipelineError> {
    let config = read_config(args.config.as_deref())?;
    let spec = SweepSpec {
        n_list: args.n,
        big_n_list: args.big_n,
        eta_list: args.eta,
        seeds: args.seeds,
        gamma: args.gamma,
        density: args.density,
        config,
    };
    let rows = sweep(&spec).map_err(|e| fail(Stage::Parse, e))?;
    let mut buf = Vec::new();
    linfx::pipeline::write_sweep_csv(&rows, &mut buf).map_err(|e| fail(Stage::Io, Error::InvalidInput(e.to_string())))?;
    write_out(args.out.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))
}

fn preprocess_cmd(input: &Path, gamma_cut: f64, out: Option<PathBuf>) -> Result<(), PipelineError> {
    let instance = read_instance(input)?;
    if instance.kind != linfx::InstanceKind::Basis {
        return Err(fail(Stage::Parse, Error::InvalidInput("preprocess expects a basis instance".into())));
    }
    let mut plain = instance;
    plain.sigma_prime = None;
    let work = working_frame(&plain, gamma_cut)?;
    write_out(out.as_deref(), &with_newline(Instance::from_basis(&work.basis).to_json()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Gen { kind } => gen(kind),
        Command::Preprocess { input, gamma_cut, out } => preprocess_cmd(&input, gamma_cut, out),
        Command::Run(args) => run(args),
        Command::Verify { input, result, exact } => match verify(&input, &result, exact) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
        Command::LemmaCheck { n, delta, q, out } => lemma_check(n, delta, q, out),
        Command::Sweep(args) => run_sweep(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
