use alloc::string::String;

use crate::record::{AccountType, Address, InteractionKind};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid address `{0}`")]
    InvalidAddress(String),
    #[error("unknown interaction kind `{0}`")]
    UnknownKind(String),
    #[error("account {0} is declared EOA but receives a contract call")]
    TypeConflict(Address),
    #[error("account {0} has no type entry")]
    UnknownAccount(Address),
    #[error("{src:?} --{kind:?}--> {dst:?} is not a valid meta-interaction")]
    InvalidCombination {
        src: AccountType,
        kind: InteractionKind,
        dst: AccountType,
    },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("empty batch")]
    EmptyBatch,
    #[error("graph has no edges to train on")]
    NoEdges,
    #[error("hidden dimension {dim} is not divisible by {heads} attention heads")]
    HeadDivisibility { dim: usize, heads: usize },
    #[error("class {class} has {found} labeled accounts, need at least {required}")]
    InsufficientLabels {
        class: u8,
        found: usize,
        required: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}
