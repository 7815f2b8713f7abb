use thiserror::Error;

use crate::game::Violation;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: {side} index {index} out of range (count {count})")]
    IndexOutOfRange {
        line: usize,
        side: &'static str,
        index: usize,
        count: usize,
    },

    #[error("invalid game: {}", join_violations(.0))]
    InvalidGame(Vec<Violation>),

    #[error("invalid choice: {0}")]
    InvalidChoice(String),

    #[error("cannot advance past a final stage")]
    AdvancePastFinal,

    #[error("symmetry search exceeded its budget of {0} nodes")]
    SearchBudgetExceeded(u64),

    #[error("renaming group has more than {0} elements")]
    GroupTooLarge(usize),

    #[error("state space exceeded {0} states")]
    StateExplosion(usize),

    #[error("wall-clock budget of {0} seconds exhausted")]
    TimeBudgetExceeded(u64),

    #[error("no class-weight entry for state {0}")]
    MissingStageEntry(String),

    #[error("opponent choice {0} has no coordinating partner")]
    NoCoordinatingChoice(String),

    #[error("inner minimization failed: {0}")]
    InnerSolveFailure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Budget errors map to exit code 2 in the command-line tool.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::SearchBudgetExceeded(_)
                | Error::GroupTooLarge(_)
                | Error::StateExplosion(_)
                | Error::TimeBudgetExceeded(_)
        )
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
