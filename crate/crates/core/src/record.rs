//! Raw interaction records, account types and labels.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// A 20-byte Ethereum address. Ordering is byte-lexicographic, which matches
/// the ordering of the lowercase hex form.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address([u8; 20]);

impl Address {
    pub const fn from_bytes(bytes: [u8; 20]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    /// Deterministic address for generated data: the big-endian index in the
    /// low 8 bytes, behind a fixed prefix.
    pub fn synthetic(index: u64) -> Self {
        let mut bytes = [0u8; 20];
        bytes[0] = 0x5e;
        bytes[12..].copy_from_slice(&index.to_be_bytes());
        Self(bytes)
    }

    /// Inverse of [`Address::synthetic`].
    pub fn synthetic_index(&self) -> Option<u64> {
        let prefix_ok = self.0[0] == 0x5e && self.0[1..12].iter().all(|&b| b == 0);
        prefix_ok.then(|| u64::from_be_bytes(self.0[12..].try_into().expect("8 bytes")))
    }
}

fn hex_val(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'a'..=b'f' => Some(c - b'a' + 10),
        b'A'..=b'F' => Some(c - b'A' + 10),
        _ => None,
    }
}

impl FromStr for Address {
    type Err = Error;

    /// Accepts `0x` followed by 40 hex digits in any case. EIP-55 checksum
    /// casing is not verified.
    fn from_str(s: &str) -> Result<Self> {
        let invalid = || Error::InvalidAddress(s.to_string());
        let hex = s
            .strip_prefix("0x")
            .or_else(|| s.strip_prefix("0X"))
            .ok_or_else(invalid)?;
        let raw = hex.as_bytes();
        if raw.len() != 40 {
            return Err(invalid());
        }
        let mut bytes = [0u8; 20];
        for (i, pair) in raw.chunks(2).enumerate() {
            let hi = hex_val(pair[0]).ok_or_else(invalid)?;
            let lo = hex_val(pair[1]).ok_or_else(invalid)?;
            bytes[i] = (hi << 4) | lo;
        }
        Ok(Self(bytes))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("0x")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Address {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Address {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = alloc::string::String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum AccountType {
    Eoa,
    Ca,
}

impl AccountType {
    pub const ALL: [AccountType; 2] = [AccountType::Eoa, AccountType::Ca];

    pub fn as_str(self) -> &'static str {
        match self {
            AccountType::Eoa => "eoa",
            AccountType::Ca => "ca",
        }
    }

    /// Dense index: EOA = 0, CA = 1.
    pub fn index(self) -> usize {
        match self {
            AccountType::Eoa => 0,
            AccountType::Ca => 1,
        }
    }
}

impl FromStr for AccountType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eoa" => Ok(AccountType::Eoa),
            "ca" => Ok(AccountType::Ca),
            other => Err(Error::Config(alloc::format!("unknown account type `{other}`"))),
        }
    }
}

impl fmt::Display for AccountType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum InteractionKind {
    Trans,
    Call,
}

impl InteractionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InteractionKind::Trans => "trans",
            InteractionKind::Call => "call",
        }
    }
}

impl FromStr for InteractionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trans" => Ok(InteractionKind::Trans),
            "call" => Ok(InteractionKind::Call),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for InteractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One directed interaction. `value` is in wei.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InteractionRecord {
    pub initiator: Address,
    pub recipient: Address,
    pub value: u128,
    pub kind: InteractionKind,
    pub timestamp: u64,
}

/// Fraud label of an account.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Label {
    Normal = 0,
    Fraud = 1,
}

impl Label {
    pub fn from_class(class: usize) -> Self {
        if class == 1 {
            Label::Fraud
        } else {
            Label::Normal
        }
    }

    pub fn class(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FraudKind {
    Ponzi,
    Phish,
}

impl FraudKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FraudKind::Ponzi => "ponzi",
            FraudKind::Phish => "phish",
        }
    }
}

impl FromStr for FraudKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ponzi" => Ok(FraudKind::Ponzi),
            "phish" => Ok(FraudKind::Phish),
            other => Err(Error::Config(alloc::format!("unknown fraud kind `{other}`"))),
        }
    }
}

pub type AccountTypeTable = BTreeMap<Address, AccountType>;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelTable {
    pub fraud_kind: FraudKind,
    pub labels: BTreeMap<Address, Label>,
}

impl LabelTable {
    pub fn new(fraud_kind: FraudKind) -> Self {
        Self {
            fraud_kind,
            labels: BTreeMap::new(),
        }
    }
}

/// Resolves the type of every address in `records`.
///
/// Without a declaration, any recipient of a `call` is a CA and everything
/// else is an EOA. A declared table wins for the addresses it lists and is
/// cross-checked: a declared EOA receiving a call is a [`Error::TypeConflict`].
/// Addresses that appear in records but not in the declaration are inferred.
pub fn resolve_types(
    records: &[InteractionRecord],
    declared: Option<&AccountTypeTable>,
) -> Result<AccountTypeTable> {
    let mut table = AccountTypeTable::new();
    for r in records {
        table.entry(r.initiator).or_insert(AccountType::Eoa);
        let slot = table.entry(r.recipient).or_insert(AccountType::Eoa);
        if r.kind == InteractionKind::Call {
            *slot = AccountType::Ca;
        }
    }
    let Some(declared) = declared else {
        return Ok(table);
    };
    for r in records {
        if r.kind == InteractionKind::Call
            && declared.get(&r.recipient) == Some(&AccountType::Eoa)
        {
            return Err(Error::TypeConflict(r.recipient));
        }
    }
    for (addr, ty) in declared {
        table.insert(*addr, *ty);
    }
    Ok(table)
}
