//! End-to-end runs, result files, re-verification and parameter sweeps.

use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembler::{assemble_basis, certified_lower, equivalence_report, upper_constant};
use crate::error::Error;
use crate::extractor::{block_masses, extract};
use crate::generators::gen_prop1_instance;
use crate::model::{Block, ExtractParams, FrameMatrix, Instance, InstanceKind, SignedBasisMatrix};
use crate::oracle::{exact_equivalence, ExactEquivalence, MAX_EXACT_M};
use crate::preprocess::{preprocess, PreprocessOptions};
use crate::sparsifier::{sparsify, SparsifyOptions};

/// Pipeline stage named in error reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Parse,
    Validate,
    Generate,
    Preprocess,
    Sparsify,
    Extract,
    Assemble,
    Oracle,
    Verify,
    Io,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::Validate => "validate",
            Stage::Generate => "generate",
            Stage::Preprocess => "preprocess",
            Stage::Sparsify => "sparsify",
            Stage::Extract => "extract",
            Stage::Assemble => "assemble",
            Stage::Oracle => "oracle",
            Stage::Verify => "verify",
            Stage::Io => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineError {
    pub stage: Stage,
    pub error: Error,
}

impl PipelineError {
    pub fn new(stage: Stage, error: Error) -> Self {
        Self { stage, error }
    }

    pub fn exit_code(&self) -> i32 {
        self.error.exit_code()
    }

    /// `{"stage", "kind", "reason", "witness"}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "stage": self.stage.as_str(),
            "kind": self.error.kind(),
            "reason": self.error.to_string(),
            "witness": self.error.witness(),
        })
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage.as_str(), self.error)
    }
}

impl std::error::Error for PipelineError {}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub eta: f64,
    /// Row norm cut used when a basis has to be preprocessed.
    pub gamma_cut: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub seed: u64,
    pub budget: u32,
    pub full_set_first: bool,
    /// Attach the LP lower constant when `m <= 8`.
    pub exact: bool,
    /// Include per-stage wall-clock times in the result.
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            gamma_cut: 0.3,
            c: ExtractParams::DEFAULT_C,
            seed: 0,
            budget: ExtractParams::DEFAULT_BUDGET,
            full_set_first: true,
            exact: true,
            timings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockOut {
    /// Greedy column label.
    pub j: usize,
    /// Rows of the working frame.
    pub rows: Vec<usize>,
    /// Greedy weight.
    pub s: f64,
    /// Peak column of the block's absolute mass.
    pub peak: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attempts {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsify: Option<u32>,
    pub select: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub preprocess: f64,
    pub sparsify: f64,
    pub extract: f64,
    pub assemble: f64,
    pub oracle: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub kind: InstanceKind,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub m: usize,
    pub scale: f64,
    pub blocks: Vec<BlockOut>,
    #[serde(rename = "U")]
    pub upper: f64,
    #[serde(rename = "L_cert")]
    pub lower_cert: f64,
    #[serde(rename = "L_exact", default, skip_serializing_if = "Option::is_none")]
    pub lower_exact: Option<f64>,
    pub distance: f64,
    #[serde(rename = "K_measured")]
    pub k_measured: f64,
    pub ratio: f64,
    pub ratio_bound: f64,
    pub eta: f64,
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub seed: u64,
    pub budget: u32,
    pub full_set_first: bool,
    pub attempts: Attempts,
    #[serde(rename = "timings_ms", default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl RunResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("result JSON: {e}")))
    }
}

/// The signed rows that block indices refer to, and their row bound.
#[derive(Debug, Clone)]
pub struct WorkingFrame {
    pub basis: SignedBasisMatrix,
    pub gamma: f64,
    pub preprocessed: bool,
}

/// Prop-1 frames are used as they are; a basis with `sigma_prime` is
/// already a 2-summing frame; any other basis is preprocessed at
/// `gamma_cut`.
pub fn working_frame(instance: &Instance, gamma_cut: f64) -> Result<WorkingFrame, PipelineError> {
    match instance.kind {
        InstanceKind::Prop1 => {
            let frame = instance.to_frame().at(Stage::Parse)?;
            let basis = SignedBasisMatrix::new(frame.n_rows(), frame.n_cols(), frame.entries().to_vec())
                .and_then(|b| b.with_sigma_prime((0..frame.n_rows()).collect(), frame.gamma()))
                .at(Stage::Parse)?;
            Ok(WorkingFrame { basis, gamma: frame.gamma(), preprocessed: false })
        }
        InstanceKind::Basis => {
            let basis = instance.to_basis().at(Stage::Parse)?;
            if instance.sigma_prime.is_some() {
                let gamma = basis.threshold();
                return Ok(WorkingFrame { basis, gamma, preprocessed: false });
            }
            let opts = PreprocessOptions { gamma_cut, ..Default::default() };
            let pre = preprocess(&basis, opts).at(Stage::Preprocess)?;
            Ok(WorkingFrame { basis: pre.frame, gamma: gamma_cut, preprocessed: true })
        }
    }
}

fn validated(mut frame: FrameMatrix, stage: Stage) -> Result<FrameMatrix, PipelineError> {
    let report = frame.validate().at(stage)?;
    if let Some(fail) = report.first_failure() {
        return Err(PipelineError::new(
            stage,
            Error::ValidationFailed(format!(
                "{:?} fails at index {}: value {} vs bound {}",
                fail.hypothesis, fail.witness, fail.value, fail.bound
            )),
        ));
    }
    Ok(frame)
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

pub fn run_pipeline(instance: &Instance, config: &RunConfig) -> Result<RunResult, PipelineError> {
    let start = Instant::now();
    let mut timings = Timings::default();

    let t = Instant::now();
    let work = working_frame(instance, config.gamma_cut)?;
    timings.preprocess = ms(t);

    // `rows[k]` is the working-frame row behind row `k` of `frame`.
    let t = Instant::now();
    let (rows, sparsify_attempts) = match instance.kind {
        InstanceKind::Prop1 => ((0..work.basis.n_rows()).collect::<Vec<_>>(), None),
        InstanceKind::Basis => {
            let opts = SparsifyOptions { seed: config.seed, budget: config.budget, full_set_first: config.full_set_first };
            let out = sparsify(&work.basis, opts).at(Stage::Sparsify)?;
            (out.rows, Some(out.attempts))
        }
    };
    let frame = validated(work.basis.abs_frame(&rows, work.gamma).at(Stage::Validate)?, Stage::Validate)?;
    let signed = work.basis.restrict(&rows).at(Stage::Validate)?;
    timings.sparsify = ms(t);

    let t = Instant::now();
    let params = ExtractParams::new(config.eta, work.gamma, frame.n_cols())
        .and_then(|p| p.with_c(config.c))
        .and_then(|p| p.with_budget(config.budget))
        .map(|p| p.with_seed(config.seed).with_full_set_first(config.full_set_first))
        .at(Stage::Extract)?;
    let extraction = extract(&frame, &params).at(Stage::Extract)?;
    timings.extract = ms(t);

    let t = Instant::now();
    let blocks = extraction.selection.selected();
    let assembled = assemble_basis(&signed, blocks).at(Stage::Assemble)?;
    let mut report =
        equivalence_report(&assembled.vectors, &assembled.peaks, assembled.scale, config.eta).at(Stage::Assemble)?;
    timings.assemble = ms(t);

    let t = Instant::now();
    if config.exact && report.m <= MAX_EXACT_M {
        report.lower_exact = Some(exact_equivalence(&assembled.vectors).at(Stage::Oracle)?.lower);
    }
    timings.oracle = ms(t);
    timings.total = ms(start);

    Ok(RunResult {
        kind: instance.kind,
        n: instance.n,
        big_n: instance.big_n,
        m: report.m,
        scale: report.scale,
        blocks: blocks
            .iter()
            .zip(&assembled.peaks)
            .map(|(b, &peak)| BlockOut { j: b.column, rows: b.rows.iter().map(|&k| rows[k]).collect(), s: b.weight, peak })
            .collect(),
        upper: report.upper,
        lower_cert: report.lower_cert,
        lower_exact: report.lower_exact,
        distance: report.distance,
        k_measured: report.k_measured,
        ratio: extraction.ratio,
        ratio_bound: extraction.ratio_bound,
        eta: config.eta,
        gamma: work.gamma,
        c: config.c,
        seed: config.seed,
        budget: config.budget,
        full_set_first: config.full_set_first,
        attempts: Attempts { sparsify: sparsify_attempts, select: extraction.sigma.attempts },
        timings: config.timings.then_some(timings),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<VerifyCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactEquivalence>,
}

const VERIFY_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= VERIFY_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Recomputes every reported quantity of `result` from `instance`.
pub fn verify_result(instance: &Instance, result: &RunResult, exact: bool) -> Result<VerifyReport, PipelineError> {
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| checks.push(VerifyCheck { name: name.into(), passed, detail });

    // The working frame is deterministic given `gamma`.
    let work = working_frame(instance, result.gamma)?;
    let n_rows = work.basis.n_rows();

    let mut seen = BTreeSet::new();
    let mut disjoint = true;
    for row in result.blocks.iter().flat_map(|b| &b.rows) {
        if *row >= n_rows || !seen.insert(*row) {
            disjoint = false;
        }
    }
    push("blocks_disjoint", disjoint, format!("{} rows over {} blocks", seen.len(), result.blocks.len()));
    push("m", result.m == result.blocks.len() && result.m > 0, format!("m = {}, blocks = {}", result.m, result.blocks.len()));
    if !disjoint || result.blocks.is_empty() {
        return Ok(VerifyReport { passed: false, checks, exact: None });
    }

    let blocks: Vec<Block> =
        result.blocks.iter().map(|b| Block { column: b.j, rows: b.rows.clone(), weight: b.s }).collect();
    let assembled = assemble_basis(&work.basis, &blocks).at(Stage::Verify)?;
    let reported_peaks: Vec<usize> = result.blocks.iter().map(|b| b.peak).collect();
    push("peaks", assembled.peaks == reported_peaks, format!("{:?}", assembled.peaks));
    push("scale", close(assembled.scale, result.scale), format!("{} vs {}", assembled.scale, result.scale));

    let upper = upper_constant(&assembled.vectors);
    let (lower, _) = certified_lower(&assembled.vectors, &assembled.peaks);
    push("U", close(upper, result.upper), format!("{upper} vs {}", result.upper));
    push("L_cert", close(lower, result.lower_cert), format!("{lower} vs {}", result.lower_cert));
    push("L_cert_positive", lower > 0.0, format!("{lower}"));
    let distance = result.upper / result.lower_cert;
    push("distance", (distance - result.distance).abs() <= 1e-12 * distance, format!("U / L_cert = {distance}"));
    let k = (result.upper - 1.0) / result.eta;
    push("K_measured", (k - result.k_measured).abs() <= 1e-12 * k.abs().max(1.0), format!("(U - 1) / eta = {k}"));

    let all: Vec<usize> = (0..n_rows).collect();
    let abs = work.basis.abs_frame(&all, work.gamma).at(Stage::Verify)?;
    let (top, min_sup) = block_masses(&abs, &blocks);
    let ratio = top / min_sup;
    push("ratio", close(ratio, result.ratio), format!("{ratio} vs {}", result.ratio));
    let bound = 1.0 + result.eta + 3.0 * result.c * result.eta / result.gamma;
    push("ratio_bound", ratio <= bound + VERIFY_TOL, format!("{ratio} <= {bound}"));

    let mut exact_out = None;
    if exact {
        let e = exact_equivalence(&assembled.vectors).at(Stage::Oracle)?;
        push("U_exact", close(e.upper, upper), format!("{} vs {upper}", e.upper));
        push(
            "L_order",
            lower <= e.lower + VERIFY_TOL && e.lower <= 1.0 + VERIFY_TOL && 1.0 <= upper + VERIFY_TOL,
            format!("L_cert {lower} <= L_exact {} <= 1 <= U {upper}", e.lower),
        );
        if let Some(reported) = result.lower_exact {
            push("L_exact", close(reported, e.lower), format!("{} vs {reported}", e.lower));
        }
        exact_out = Some(e);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { passed, checks, exact: exact_out })
}

/// Parameters shared by all sweep cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub n_list: Vec<usize>,
    pub big_n_list: Vec<usize>,
    pub eta_list: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Row bound of the generated instances.
    pub gamma: f64,
    /// Entry density of the generated instances.
    pub density: f64,
    pub config: RunConfig,
}

/// One CSV row. Columns are fixed in this order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub eta: f64,
    pub seed: u64,
    pub m: Option<usize>,
    #[serde(rename = "U")]
    pub upper: Option<f64>,
    #[serde(rename = "L_cert")]
    pub lower_cert: Option<f64>,
    pub distance: Option<f64>,
    #[serde(rename = "K_measured")]
    pub k_measured: Option<f64>,
    pub attempts: Option<u32>,
    pub wall_ms: f64,
    /// `ok`, or the failing error kind.
    pub status: String,
}

pub const SWEEP_HEADER: &str = "n,N,eta,seed,m,U,L_cert,distance,K_measured,attempts,wall_ms,status";

fn sweep_cell(spec: &SweepSpec, n: usize, big_n: usize, eta: f64, seed: u64) -> SweepRow {
    let start = Instant::now();
    let config = RunConfig { eta, seed, exact: false, timings: false, ..spec.config.clone() };
    let outcome = if eta >= spec.gamma {
        Err(Error::Precondition(format!("eta = {eta} >= gamma = {}", spec.gamma)))
    } else {
        gen_prop1_instance(n, big_n, spec.gamma, spec.density, seed)
            .and_then(|f| run_pipeline(&Instance::from_frame(&f), &config).map_err(|e| e.error))
    };
    let mut row = SweepRow {
        n,
        big_n,
        eta,
        seed,
        m: None,
        upper: None,
        lower_cert: None,
        distance: None,
        k_measured: None,
        attempts: None,
        wall_ms: 0.0,
        status: String::new(),
    };
    match outcome {
        Ok(r) => {
            row.m = Some(r.m);
            row.upper = Some(r.upper);
            row.lower_cert = Some(r.lower_cert);
            row.distance = Some(r.distance);
            row.k_measured = Some(r.k_measured);
            row.attempts = Some(r.attempts.select);
            row.status = "ok".into();
        }
        Err(e) => row.status = e.kind().into(),
    }
    row.wall_ms = ms(start);
    row
}

/// Runs every `(n, N, eta, seed)` cell in parallel; rows come back in
/// nested list order. Failing cells are recorded, never fatal.
pub fn sweep(spec: &SweepSpec) -> crate::Result<Vec<SweepRow>> {
    if spec.n_list.is_empty() || spec.big_n_list.is_empty() || spec.eta_list.is_empty() || spec.seeds.is_empty() {
        return Err(Error::InvalidInput("sweep lists must be nonempty".into()));
    }
    let mut cells = Vec::new();
    for &n in &spec.n_list {
        for &big_n in &spec.big_n_list {
            for &eta in &spec.eta_list {
                for &seed in &spec.seeds {
                    cells.push((n, big_n, eta, seed));
                }
            }
        }
    }
    Ok(cells.par_iter().map(|&(n, big_n, eta, seed)| sweep_cell(spec, n, big_n, eta, seed)).collect())
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(SWEEP_HEADER.split(','))?;
    }
    w.flush()
}
