use core::fmt;

use crate::error::{Error, Result};
use crate::record::{AccountType, InteractionKind};

/// The six fine-grained interaction patterns
/// `⟨initiator type, edge kind, recipient type⟩` that can occur on Ethereum.
///
/// The number is the rank within the initiator's three patterns: `1` is the
/// contract call, `2` a transfer into a CA, `3` a transfer into an EOA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MetaInteraction {
    /// CA calls CA.
    R1Ca,
    /// CA transfers to CA.
    R2Ca,
    /// CA transfers to EOA.
    R3Ca,
    /// EOA calls CA.
    R1Eoa,
    /// EOA transfers to CA.
    R2Eoa,
    /// EOA transfers to EOA.
    R3Eoa,
}

/// Length of the one-hot meta-interaction encoding.
pub const META_DIM: usize = 6;

impl MetaInteraction {
    /// One-hot order: `r1_ca, r2_ca, r3_ca, r1_eoa, r2_eoa, r3_eoa`.
    pub const ALL: [MetaInteraction; 6] = [
        MetaInteraction::R1Ca,
        MetaInteraction::R2Ca,
        MetaInteraction::R3Ca,
        MetaInteraction::R1Eoa,
        MetaInteraction::R2Eoa,
        MetaInteraction::R3Eoa,
    ];

    pub fn of(src: AccountType, kind: InteractionKind, dst: AccountType) -> Result<Self> {
        use AccountType::{Ca, Eoa};
        use InteractionKind::{Call, Trans};
        Ok(match (src, kind, dst) {
            (Ca, Call, Ca) => MetaInteraction::R1Ca,
            (Eoa, Call, Ca) => MetaInteraction::R1Eoa,
            (Ca, Trans, Ca) => MetaInteraction::R2Ca,
            (Eoa, Trans, Ca) => MetaInteraction::R2Eoa,
            (Ca, Trans, Eoa) => MetaInteraction::R3Ca,
            (Eoa, Trans, Eoa) => MetaInteraction::R3Eoa,
            (_, Call, Eoa) => return Err(Error::InvalidCombination { src, kind, dst }),
        })
    }

    /// The three patterns an account of type `ty` can initiate, ranks 1, 2, 3.
    pub fn initiable_by(ty: AccountType) -> [MetaInteraction; 3] {
        match ty {
            AccountType::Ca => [
                MetaInteraction::R1Ca,
                MetaInteraction::R2Ca,
                MetaInteraction::R3Ca,
            ],
            AccountType::Eoa => [
                MetaInteraction::R1Eoa,
                MetaInteraction::R2Eoa,
                MetaInteraction::R3Eoa,
            ],
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// 1, 2 or 3.
    pub fn rank(self) -> usize {
        self.index() % 3 + 1
    }

    pub fn initiator(self) -> AccountType {
        if self.index() < 3 {
            AccountType::Ca
        } else {
            AccountType::Eoa
        }
    }

    pub fn kind(self) -> InteractionKind {
        if self.rank() == 1 {
            InteractionKind::Call
        } else {
            InteractionKind::Trans
        }
    }

    pub fn recipient(self) -> AccountType {
        if self.rank() == 3 {
            AccountType::Eoa
        } else {
            AccountType::Ca
        }
    }

    pub fn one_hot(self) -> [f64; META_DIM] {
        let mut v = [0.0; META_DIM];
        v[self.index()] = 1.0;
        v
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetaInteraction::R1Ca => "r1_ca",
            MetaInteraction::R2Ca => "r2_ca",
            MetaInteraction::R3Ca => "r3_ca",
            MetaInteraction::R1Eoa => "r1_eoa",
            MetaInteraction::R2Eoa => "r2_eoa",
            MetaInteraction::R3Eoa => "r3_eoa",
        }
    }
}

impl fmt::Display for MetaInteraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
