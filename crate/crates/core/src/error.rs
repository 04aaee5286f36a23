use thiserror::Error;

/// Errors raised anywhere in the post-processing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural mismatch: {0}")]
    Structure(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("empty cell: {0}")]
    EmptyCell(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("probability out of range in column `{column}` row {row}: {value}")]
    ProbabilityRange { column: String, row: usize, value: f64 },

    /// No multiplier satisfies the constraint on the tuning data.
    #[error("not feasible: {0}")]
    NotFeasible(Infeasibility),

    #[error("size cap exceeded: {0}")]
    TooLarge(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(String),
}

/// Diagnostic attached to [`Error::NotFeasible`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Infeasibility {
    /// Constraint labels, aligned with the vectors below.
    pub constraints: Vec<String>,
    pub deltas: Vec<f64>,
    /// Smallest achievable value of each constraint (per-constraint minimum violation
    /// report for grid searches).
    pub min_achievable: Vec<f64>,
}

impl std::fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, name) in self.constraints.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(
                f,
                "{name}: delta={} min achievable={:.6}",
                self.deltas[i], self.min_achievable[i]
            )?;
        }
        Ok(())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
