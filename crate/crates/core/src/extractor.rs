//! Disjoint row blocks with nearly equal ℓ∞ mass.
//!
//! Entries at most `epsilon` form the small part `b`; larger entries define
//! per-column row sets `A_j`. A random row subset `sigma` is accepted once
//! the small part is uniformly light on it and no `A_j` meets it too often.
//! Greedy then repeatedly takes the column with the largest surviving
//! large-part mass, turns the surviving rows of that column into a block,
//! and removes them. The longest run of block weights within a factor
//! `1 + eta` of each other is the output.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, RejectionTally, Result};
use crate::model::{log_dim, Block, BlockSelection, ExtractParams, FrameMatrix, TOL};
use crate::rng::{self, Stream};

/// Small/large split of a frame at `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitFrame {
    /// `b_i(j) = a_i(j)` if `a_i(j) <= epsilon`, else 0; row-major.
    pub small: Vec<f64>,
    /// `A_j = {i : a_i(j) > epsilon}`, ascending row indices.
    pub large: Vec<Vec<usize>>,
    pub epsilon: f64,
    n_cols: usize,
}

impl SplitFrame {
    #[inline]
    pub fn small_at(&self, i: usize, j: usize) -> f64 {
        self.small[i * self.n_cols + j]
    }

    pub fn max_large_count(&self) -> usize {
        self.large.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Entries equal to `epsilon` go to the small part only.
pub fn split_small_large(frame: &FrameMatrix, epsilon: f64) -> Result<SplitFrame> {
    frame.require_validated()?;
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!("epsilon = {epsilon} must be positive")));
    }
    let n_cols = frame.n_cols();
    let mut small = vec![0.0; frame.entries().len()];
    let mut large = vec![Vec::new(); n_cols];
    for (i, row) in frame.rows().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > epsilon {
                large[j].push(i);
            } else {
                small[i * n_cols + j] = v;
            }
        }
    }
    Ok(SplitFrame { small, large, epsilon, n_cols })
}

/// Exact evaluation of the three selection conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionCheck {
    /// `max_j Σ_{i∈σ} b_i(j)` against `3 C eta`.
    pub small_sum: f64,
    pub small_bound: f64,
    /// `max_j |σ ∩ A_j|` against `3 C log N`.
    pub large_count: usize,
    pub large_bound: f64,
    /// `|σ|` against `eta n / √(log N)`.
    pub size: usize,
    pub size_floor: f64,
}

impl SelectionCheck {
    pub fn small_ok(&self) -> bool {
        self.small_sum <= self.small_bound + TOL
    }

    pub fn large_ok(&self) -> bool {
        self.large_count as f64 <= self.large_bound
    }

    /// Also demands a nonempty set.
    pub fn size_ok(&self) -> bool {
        self.size > 0 && self.size as f64 >= self.size_floor
    }

    pub fn passed(&self) -> bool {
        self.small_ok() && self.large_ok() && self.size_ok()
    }
}

pub fn check_selection(frame: &FrameMatrix, split: &SplitFrame, params: &ExtractParams, sigma: &[usize]) -> SelectionCheck {
    let n_cols = frame.n_cols();
    let log_n = log_dim(n_cols);
    let mut small = vec![0.0; n_cols];
    for &i in sigma {
        let row = &split.small[i * n_cols..(i + 1) * n_cols];
        small.iter_mut().zip(row).for_each(|(s, v)| *s += v);
    }
    let mut member = vec![false; frame.n_rows()];
    sigma.iter().for_each(|&i| member[i] = true);
    let large_count = split.large.iter().map(|a| a.iter().filter(|&&i| member[i]).count()).max().unwrap_or(0);
    SelectionCheck {
        small_sum: small.into_iter().fold(0.0, f64::max),
        small_bound: 3.0 * params.c * params.eta,
        large_count,
        large_bound: 3.0 * params.c * log_n,
        size: sigma.len(),
        size_floor: params.eta * frame.n_rows() as f64 / log_n.sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub rows: Vec<usize>,
    pub attempts: u32,
    pub check: SelectionCheck,
}

/// Draws `sigma` with Bernoulli(`delta`) selectors until all three
/// conditions hold, up to `params.budget` attempts.
pub fn select_delta_subset(frame: &FrameMatrix, split: &SplitFrame, params: &ExtractParams) -> Result<Selection> {
    frame.require_validated()?;
    if params.budget == 0 {
        return Err(Error::Precondition("selection budget must be at least 1".into()));
    }
    let mut rng = rng::stream(params.seed, Stream::Select);
    let mut tally = RejectionTally::default();
    let mut attempts = 0u32;
    let note = |check: &SelectionCheck, tally: &mut RejectionTally| {
        tally.small_sum += u32::from(!check.small_ok());
        tally.large_count += u32::from(!check.large_ok());
        tally.cardinality += u32::from(!check.size_ok());
    };
    if params.full_set_first {
        attempts += 1;
        let all: Vec<usize> = (0..frame.n_rows()).collect();
        let check = check_selection(frame, split, params, &all);
        if check.passed() {
            return Ok(Selection { rows: all, attempts, check });
        }
        note(&check, &mut tally);
    }
    while attempts < params.budget {
        attempts += 1;
        let rows: Vec<usize> = (0..frame.n_rows()).filter(|_| rng.gen::<f64>() < params.delta).collect();
        let check = check_selection(frame, split, params, &rows);
        if check.passed() {
            return Ok(Selection { rows, attempts, check });
        }
        note(&check, &mut tally);
    }
    Err(Error::SelectionFailure { attempts, tally })
}

/// Greedy block loop over the rows `sigma`.
///
/// Each step picks `j_r = argmax_j Σ_{i ∈ S ∩ A_j} a_i(j)` (smallest `j` on
/// ties) over the surviving rows `S`, records the block `S ∩ A_{j_r}`, and
/// removes it from `S`. Stops when `S` is empty or the best weight drops
/// below `gamma`. The returned selection has an empty interval.
pub fn greedy_blocks(frame: &FrameMatrix, split: &SplitFrame, sigma: &[usize], gamma: f64) -> BlockSelection {
    let n_cols = frame.n_cols();
    let mut alive = vec![false; frame.n_rows()];
    sigma.iter().for_each(|&i| alive[i] = true);
    let mut remaining = sigma.len();
    let column_mass = |j: usize, alive: &[bool]| -> f64 {
        split.large[j].iter().filter(|&&i| alive[i]).map(|&i| frame.get(i, j)).sum()
    };
    let mut mass: Vec<f64> = (0..n_cols).map(|j| column_mass(j, &alive)).collect();
    // Columns touched by each row's large entries, for incremental updates.
    let mut touches: Vec<Vec<usize>> = vec![Vec::new(); frame.n_rows()];
    for (j, rows) in split.large.iter().enumerate() {
        for &i in rows {
            if alive[i] {
                touches[i].push(j);
            }
        }
    }

    let mut blocks = Vec::new();
    while remaining > 0 {
        let (column, weight) = mass.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        if weight < gamma {
            break;
        }
        let rows: Vec<usize> = split.large[column].iter().copied().filter(|&i| alive[i]).collect();
        let mut dirty: Vec<usize> = Vec::new();
        for &i in &rows {
            alive[i] = false;
            dirty.extend_from_slice(&touches[i]);
        }
        remaining -= rows.len();
        dirty.sort_unstable();
        dirty.dedup();
        for j in dirty {
            mass[j] = column_mass(j, &alive);
        }
        blocks.push(Block { column, rows, weight });
    }
    let survivors = sigma.iter().copied().filter(|&i| alive[i]).collect();
    BlockSelection { blocks, interval: 0..0, survivors }
}

/// Buckets block `r` by `floor(log(s_r / gamma) / log(1 + eta))` and returns
/// the largest bucket (the earliest one on ties). Weights are nonincreasing,
/// so buckets are contiguous.
pub fn pick_interval(weights: &[f64], eta: f64, gamma: f64) -> Range<usize> {
    if weights.is_empty() {
        return 0..0;
    }
    let step = (1.0 + eta).ln();
    let bucket = |s: f64| ((s / gamma).ln() / step).floor() as i64;
    let mut best = 0..1;
    let mut start = 0;
    for r in 1..=weights.len() {
        if r == weights.len() || bucket(weights[r]) != bucket(weights[start]) {
            if r - start > best.len() {
                best = start..r;
            }
            start = r;
        }
    }
    best
}

/// Full extraction result with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub selection: BlockSelection,
    /// The accepted row subset and its checks.
    pub sigma: Selection,
    /// `‖Σ_{r∈R} Σ_{i∈σ_r} a_i‖∞ / min_{r∈R} ‖Σ_{i∈σ_r} a_i‖∞`.
    pub ratio: f64,
    /// `1 + eta + 3 C eta / gamma`.
    pub ratio_bound: f64,
}

/// `(‖Σ_r w_r‖∞, min_r ‖w_r‖∞)` with `w_r = Σ_{i∈σ_r} a_i`.
pub fn block_masses(frame: &FrameMatrix, blocks: &[Block]) -> (f64, f64) {
    let n_cols = frame.n_cols();
    let mut total = vec![0.0; n_cols];
    let mut min_sup = f64::INFINITY;
    for block in blocks {
        let mut w = vec![0.0; n_cols];
        for &i in &block.rows {
            w.iter_mut().zip(frame.row(i)).for_each(|(s, v)| *s += v);
        }
        min_sup = min_sup.min(w.iter().copied().fold(0.0, f64::max));
        total.iter_mut().zip(&w).for_each(|(t, v)| *t += v);
    }
    (total.into_iter().fold(0.0, f64::max), min_sup)
}

pub fn extract(frame: &FrameMatrix, params: &ExtractParams) -> Result<Extraction> {
    frame.require_validated()?;
    if !(params.eta > 0.0 && params.eta < params.gamma) {
        return Err(Error::Precondition(format!("need 0 < eta < gamma, got eta = {}, gamma = {}", params.eta, params.gamma)));
    }
    if params.gamma > frame.gamma() + TOL {
        return Err(Error::Precondition(format!(
            "extraction gamma {} exceeds the frame's validated gamma {}",
            params.gamma,
            frame.gamma()
        )));
    }
    let split = split_small_large(frame, params.epsilon)?;
    let sigma = select_delta_subset(frame, &split, params)?;
    let mut selection = greedy_blocks(frame, &split, &sigma.rows, params.gamma);
    if selection.blocks.is_empty() {
        return Err(Error::ExtractionEmpty);
    }
    selection.interval = pick_interval(&selection.weights(), params.eta, params.gamma);
    let (top, min_sup) = block_masses(frame, selection.selected());
    let ratio = top / min_sup;
    let ratio_bound = params.ratio_bound();
    if ratio > ratio_bound + TOL {
        return Err(Error::Invariant(format!("block ratio {ratio} exceeds {ratio_bound}")));
    }
    Ok(Extraction { selection, sigma, ratio, ratio_bound })
}
