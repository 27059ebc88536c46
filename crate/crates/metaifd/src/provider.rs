//! Sources of interaction records around an address.

use std::collections::BTreeSet;
use std::path::Path;

use metaifd_core::{Address, InteractionRecord};

use crate::error::Result;
use crate::ingest::{parse_records, RecordFormat};

pub trait TransactionProvider {
    /// Records within `depth` hops of `address`: depth 1 is every record
    /// the address takes part in, depth 2 adds the records of its
    /// counterparties, and so on. Depth 0 yields nothing.
    fn fetch(&self, address: &Address, depth: usize) -> Result<Vec<InteractionRecord>>;
}

/// Serves records from a local file loaded up front.
#[derive(Debug, Clone, Default)]
pub struct FileProvider {
    records: Vec<InteractionRecord>,
}

impl FileProvider {
    pub fn open(path: &Path, format: RecordFormat) -> Result<Self> {
        Ok(Self::from_records(parse_records(path, format)?))
    }

    pub fn from_records(records: Vec<InteractionRecord>) -> Self {
        Self { records }
    }
}

impl TransactionProvider for FileProvider {
    /// Results keep file order.
    fn fetch(&self, address: &Address, depth: usize) -> Result<Vec<InteractionRecord>> {
        let mut reached = BTreeSet::from([*address]);
        let mut frontier = reached.clone();
        let mut taken = vec![false; self.records.len()];
        for _ in 0..depth {
            let mut next = BTreeSet::new();
            for (i, r) in self.records.iter().enumerate() {
                if taken[i] {
                    continue;
                }
                if frontier.contains(&r.initiator) || frontier.contains(&r.recipient) {
                    taken[i] = true;
                    for a in [r.initiator, r.recipient] {
                        if reached.insert(a) {
                            next.insert(a);
                        }
                    }
                }
            }
            frontier = next;
        }
        Ok(self
            .records
            .iter()
            .zip(&taken)
            .filter(|(_, &t)| t)
            .map(|(r, _)| *r)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use metaifd_core::InteractionKind;

    fn rec(a: u64, b: u64) -> InteractionRecord {
        InteractionRecord {
            initiator: Address::synthetic(a),
            recipient: Address::synthetic(b),
            value: 1,
            kind: InteractionKind::Trans,
            timestamp: a * 10 + b,
        }
    }

    #[test]
    fn hops_expand_along_a_path() {
        let p = FileProvider::from_records(vec![rec(2, 3), rec(0, 1), rec(1, 2), rec(5, 6)]);
        let a = Address::synthetic(0);
        assert!(p.fetch(&a, 0).unwrap().is_empty());
        assert_eq!(p.fetch(&a, 1).unwrap(), vec![rec(0, 1)]);
        assert_eq!(p.fetch(&a, 2).unwrap(), vec![rec(0, 1), rec(1, 2)]);
        assert_eq!(p.fetch(&a, 9).unwrap(), vec![rec(2, 3), rec(0, 1), rec(1, 2)]);
    }
}
