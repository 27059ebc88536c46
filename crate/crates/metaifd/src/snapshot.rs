//! Versioned dataset snapshots.
//!
//! A snapshot file is one header line followed by the body:
//!
//! ```text
//! metaifd-snapshot v1 sha256:<64 hex digits>
//! {"records":[...],"account_types":{...},"labels":{...}}
//! ```
//!
//! The body is compact JSON with object keys in a fixed order and map
//! entries sorted by address, so equal snapshots serialize to equal bytes.
//! The digest covers the body bytes exactly, without the trailing newline.
//! Values are decimal strings since wei amounts overflow 64-bit integers.

use std::collections::BTreeMap;
use std::path::Path;

use metaifd_core::record::{AccountTypeTable, FraudKind, Label, LabelTable};
use metaifd_core::{AccountType, Address, InteractionKind, InteractionRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::output::write_atomic;

pub const MAGIC: &str = "metaifd-snapshot";
pub const SNAPSHOT_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSnapshot {
    pub version: String,
    pub records: Vec<InteractionRecord>,
    pub account_types: AccountTypeTable,
    pub labels: Option<LabelTable>,
    /// Hex SHA-256 of the canonical body.
    pub checksum: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Body {
    records: Vec<(Address, Address, String, InteractionKind, u64)>,
    account_types: BTreeMap<Address, AccountType>,
    labels: Option<LabelBody>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelBody {
    fraud_kind: FraudKind,
    labels: BTreeMap<Address, u8>,
}

fn body_of(
    records: &[InteractionRecord],
    account_types: &AccountTypeTable,
    labels: Option<&LabelTable>,
) -> Body {
    Body {
        records: records
            .iter()
            .map(|r| (r.initiator, r.recipient, r.value.to_string(), r.kind, r.timestamp))
            .collect(),
        account_types: account_types.clone(),
        labels: labels.map(|l| LabelBody {
            fraud_kind: l.fraud_kind,
            labels: l.labels.iter().map(|(a, lab)| (*a, lab.class() as u8)).collect(),
        }),
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl DatasetSnapshot {
    pub fn new(
        records: Vec<InteractionRecord>,
        account_types: AccountTypeTable,
        labels: Option<LabelTable>,
    ) -> Self {
        let mut snap = Self {
            version: SNAPSHOT_VERSION.to_string(),
            records,
            account_types,
            labels,
            checksum: String::new(),
        };
        snap.checksum = digest(&snap.body_bytes());
        snap
    }

    fn body_bytes(&self) -> Vec<u8> {
        let body = body_of(&self.records, &self.account_types, self.labels.as_ref());
        serde_json::to_vec(&body).expect("snapshot body serializes")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let body = self.body_bytes();
        let mut out = format!("{MAGIC} {} sha256:{}\n", self.version, digest(&body)).into_bytes();
        out.extend_from_slice(&body);
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let split = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| malformed("missing header line"))?;
        let header = std::str::from_utf8(&bytes[..split]).map_err(|_| malformed("header is not UTF-8"))?;
        let mut body = &bytes[split + 1..];
        if body.last() == Some(&b'\n') {
            body = &body[..body.len() - 1];
        }
        let parts: Vec<&str> = header.split(' ').collect();
        let [magic, version, sum] = parts[..] else {
            return Err(malformed("header must have three fields"));
        };
        if magic != MAGIC {
            return Err(malformed("not a snapshot file"));
        }
        if version != SNAPSHOT_VERSION {
            return Err(Error::VersionUnsupported(version.to_string()));
        }
        let expected = sum.strip_prefix("sha256:").ok_or_else(|| malformed("unknown digest"))?;
        let found = digest(body);
        if found != expected {
            return Err(Error::ChecksumMismatch {
                expected: expected.to_string(),
                found,
            });
        }
        let body: Body = serde_json::from_slice(body)?;
        let records = body
            .records
            .into_iter()
            .map(|(initiator, recipient, value, kind, timestamp)| {
                let value = value.parse().map_err(|_| malformed("bad record value"))?;
                Ok(InteractionRecord {
                    initiator,
                    recipient,
                    value,
                    kind,
                    timestamp,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = body.labels.map(|l| LabelTable {
            fraud_kind: l.fraud_kind,
            labels: l
                .labels
                .into_iter()
                .map(|(a, c)| (a, Label::from_class(c as usize)))
                .collect(),
        });
        Ok(Self {
            version: version.to_string(),
            records,
            account_types: body.account_types,
            labels,
            checksum: found,
        })
    }
}

fn malformed(reason: &str) -> Error {
    Error::MalformedRow {
        line: 1,
        reason: reason.to_string(),
    }
}

/// Writes the snapshot and returns its checksum.
pub fn save_snapshot(snapshot: &DatasetSnapshot, path: &Path) -> Result<String> {
    let bytes = snapshot.to_bytes();
    write_atomic(path, &bytes)?;
    Ok(snapshot.checksum.clone())
}

pub fn load_snapshot(path: &Path) -> Result<DatasetSnapshot> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    DatasetSnapshot::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_accounts() -> DatasetSnapshot {
        let a = Address::synthetic(1);
        let b = Address::synthetic(2);
        let records = vec![InteractionRecord {
            initiator: a,
            recipient: b,
            value: u128::MAX,
            kind: InteractionKind::Call,
            timestamp: 9,
        }];
        let types = [(a, AccountType::Eoa), (b, AccountType::Ca)].into_iter().collect();
        let mut labels = LabelTable::new(FraudKind::Ponzi);
        labels.labels.insert(b, Label::Fraud);
        DatasetSnapshot::new(records, types, Some(labels))
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.snapshot");
        let snap = two_accounts();
        let sum = save_snapshot(&snap, &path).unwrap();
        assert_eq!(sum.len(), 64);
        assert_eq!(load_snapshot(&path).unwrap(), snap);
    }

    #[test]
    fn flipped_byte_is_detected() {
        let mut bytes = two_accounts().to_bytes();
        let at = bytes.len() - 10;
        bytes[at] ^= 0x01;
        assert!(matches!(
            DatasetSnapshot::from_bytes(&bytes).unwrap_err(),
            Error::ChecksumMismatch { .. }
        ));
    }

    #[test]
    fn unknown_version_rejected() {
        let bytes = two_accounts().to_bytes();
        let text = String::from_utf8(bytes).unwrap().replacen(" v1 ", " v9 ", 1);
        assert!(matches!(
            DatasetSnapshot::from_bytes(text.as_bytes()).unwrap_err(),
            Error::VersionUnsupported(v) if v == "v9"
        ));
    }

    #[test]
    fn empty_snapshot_is_valid() {
        let snap = DatasetSnapshot::new(Vec::new(), AccountTypeTable::new(), None);
        let back = DatasetSnapshot::from_bytes(&snap.to_bytes()).unwrap();
        assert_eq!(back, snap);
        let g = metaifd_core::Heig::build(&back.records, Some(&back.account_types), None).unwrap();
        assert_eq!(g.num_accounts(), 0);
    }
}
