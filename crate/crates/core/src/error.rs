use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Counts of which acceptance condition rejected a resampled row subset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RejectionTally {
    /// Small-part column sum exceeded `3 C eta`.
    pub small_sum: u32,
    /// Some `|sigma ∩ A_j|` exceeded `3 C log N`.
    pub large_count: u32,
    /// `|sigma|` fell below the cardinality target.
    pub cardinality: u32,
}

impl RejectionTally {
    pub fn most_frequent(&self) -> &'static str {
        let mut best = ("small_sum", self.small_sum);
        for cand in [("large_count", self.large_count), ("cardinality", self.cardinality)] {
            if cand.1 > best.1 {
                best = cand;
            }
        }
        best.0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("frame has not passed validation")]
    Unvalidated,

    #[error("validation failed: {0}")]
    ValidationFailed(String),

    #[error("instance generation failed after {attempts} attempts: {reason}")]
    GenerationFailure { attempts: u32, reason: String },

    #[error("functionals span a {rank}-dimensional space, expected {dim}")]
    DegenerateBody { rank: usize, dim: usize },

    #[error("ellipsoid solver stopped after {iterations} iterations with residual {residual:e}")]
    Convergence { iterations: usize, residual: f64 },

    #[error("only {kept} of {n} rows reach the norm cut {cut}; need at least n/4")]
    PreprocessFailure { kept: usize, n: usize, cut: f64 },

    #[error(
        "sparsifier exhausted {attempts} attempts (worst column {column} with sum {sum:.6}, \
         cardinality shortfalls {short})"
    )]
    SparsifyFailure { attempts: u32, column: usize, sum: f64, short: u32 },

    #[error("row selection exhausted {attempts} attempts; most frequent rejection: {}", .tally.most_frequent())]
    SelectionFailure { attempts: u32, tally: RejectionTally },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("greedy extraction produced no block with weight >= gamma")]
    ExtractionEmpty,

    #[error("blocks {first} and {second} peak at the same column {column}")]
    AssemblyFailure { first: usize, second: usize, column: usize },

    #[error("no certificate: lower constant {lower:.6} at block {block} is not positive")]
    NoCertificate { lower: f64, block: usize },

    #[error("exact oracle limited to m <= 8, got m = {0}")]
    SizeRefusal(usize),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Degenerate(_) => "degenerate",
            Error::InvalidInput(_) => "invalid_input",
            Error::Unvalidated => "unvalidated",
            Error::ValidationFailed(_) => "validation",
            Error::GenerationFailure { .. } => "generation",
            Error::DegenerateBody { .. } => "degenerate_body",
            Error::Convergence { .. } => "convergence",
            Error::PreprocessFailure { .. } => "preprocess",
            Error::SparsifyFailure { .. } => "sparsify",
            Error::SelectionFailure { .. } => "selection",
            Error::Precondition(_) => "precondition",
            Error::ExtractionEmpty => "extraction_empty",
            Error::AssemblyFailure { .. } => "assembly",
            Error::NoCertificate { .. } => "no_certificate",
            Error::SizeRefusal(_) => "size_refusal",
            Error::Invariant(_) => "invariant",
        }
    }

    /// Process exit code: 1 for bad input or failed validation, 2 for
    /// exhausted budgets and solver failures, 3 when no certificate could be
    /// produced, 4 for broken internal invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_)
            | Error::InvalidInput(_)
            | Error::Unvalidated
            | Error::ValidationFailed(_)
            | Error::DegenerateBody { .. }
            | Error::Precondition(_)
            | Error::SizeRefusal(_) => 1,
            Error::GenerationFailure { .. }
            | Error::Convergence { .. }
            | Error::PreprocessFailure { .. }
            | Error::SparsifyFailure { .. }
            | Error::SelectionFailure { .. } => 2,
            Error::ExtractionEmpty | Error::AssemblyFailure { .. } | Error::NoCertificate { .. } => 3,
            Error::Invariant(_) => 4,
        }
    }

    /// Structured details of the failure, `null` when there are none beyond
    /// the message.
    pub fn witness(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            Error::GenerationFailure { attempts, .. } => json!({ "attempts": attempts }),
            Error::DegenerateBody { rank, dim } => json!({ "rank": rank, "dim": dim }),
            Error::Convergence { iterations, residual } => json!({ "iterations": iterations, "residual": residual }),
            Error::PreprocessFailure { kept, n, cut } => json!({ "kept": kept, "n": n, "cut": cut }),
            Error::SparsifyFailure { attempts, column, sum, short } => {
                json!({ "attempts": attempts, "column": column, "sum": sum, "short": short })
            }
            Error::SelectionFailure { attempts, tally } => json!({ "attempts": attempts, "tally": tally }),
            Error::AssemblyFailure { first, second, column } => json!({ "first": first, "second": second, "column": column }),
            Error::NoCertificate { lower, block } => json!({ "lower": lower, "block": block }),
            Error::SizeRefusal(m) => json!({ "m": m }),
            _ => serde_json::Value::Null,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_failure_class() {
        assert_eq!(Error::InvalidInput("x".into()).exit_code(), 1);
        assert_eq!(Error::Precondition("x".into()).exit_code(), 1);
        assert_eq!(Error::SparsifyFailure { attempts: 1, column: 0, sum: 1.0, short: 0 }.exit_code(), 2);
        assert_eq!(Error::SelectionFailure { attempts: 1, tally: RejectionTally::default() }.exit_code(), 2);
        assert_eq!(Error::NoCertificate { lower: 0.0, block: 0 }.exit_code(), 3);
    }

    #[test]
    fn tally_reports_the_largest_count() {
        let t = RejectionTally { small_sum: 1, large_count: 5, cardinality: 5 };
        assert_eq!(t.most_frequent(), "large_count");
        assert_eq!(RejectionTally::default().most_frequent(), "small_sum");
    }

    #[test]
    fn witness_carries_fields() {
        let w = Error::SparsifyFailure { attempts: 3, column: 7, sum: 2.5, short: 1 }.witness();
        assert_eq!(w["column"], 7);
        assert_eq!(Error::ExtractionEmpty.witness(), serde_json::Value::Null);
    }
}
