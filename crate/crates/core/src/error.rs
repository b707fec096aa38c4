use alloc::string::String;

use crate::dataset::{ItemId, UserId};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u32 },
    #[error("duplicate interaction for user {user} and item {item}")]
    DuplicateInteraction { user: UserId, item: ItemId },
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("feature index {index} out of range for dimensionality {dim}")]
    Dimension { index: usize, dim: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid URI {0:?}")]
    InvalidUri(String),
    #[error("no relevant items for this user")]
    NoRelevantItems,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
