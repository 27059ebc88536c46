use std::collections::BTreeMap;
use std::fs;

use metaifd::ingest::{parse_records, read_records_csv, read_records_jsonl, write_records, RecordFormat};
use metaifd::provider::{FileProvider, TransactionProvider};
use metaifd::snapshot::{load_snapshot, save_snapshot, DatasetSnapshot};
use metaifd::Error;
use metaifd_core::record::{resolve_types, AccountTypeTable, FraudKind, Label, LabelTable};
use metaifd_core::{AccountType, Address, InteractionKind, InteractionRecord};
use proptest::prelude::*;

const FIXTURE: &str = "\
initiator,recipient,value,kind,timestamp
0x1111111111111111111111111111111111111111,0x2222222222222222222222222222222222222222,5,trans,1600000000
0x2222222222222222222222222222222222222222,0x3333333333333333333333333333333333333333,0,call,1600000100
0x1111111111111111111111111111111111111111,0x1111111111111111111111111111111111111111,12000000000000000000,trans,1600000200
";

fn addr(c: char) -> Address {
    format!("0x{}", c.to_string().repeat(40)).parse().unwrap()
}

#[test]
fn three_row_fixture_in_file_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    fs::write(&path, FIXTURE).unwrap();
    let r = parse_records(&path, RecordFormat::Csv).unwrap();
    let expected = [
        (addr('1'), addr('2'), 5u128, InteractionKind::Trans, 1_600_000_000u64),
        (addr('2'), addr('3'), 0, InteractionKind::Call, 1_600_000_100),
        (addr('1'), addr('1'), 12_000_000_000_000_000_000, InteractionKind::Trans, 1_600_000_200),
    ];
    assert_eq!(r.len(), 3);
    for (rec, (i, j, v, k, t)) in r.iter().zip(expected) {
        assert_eq!((rec.initiator, rec.recipient, rec.value, rec.kind, rec.timestamp), (i, j, v, k, t));
    }

    let mut jsonl = Vec::new();
    write_records(&mut jsonl, &r, RecordFormat::Jsonl).unwrap();
    let jpath = dir.path().join("r.jsonl");
    fs::write(&jpath, &jsonl).unwrap();
    assert_eq!(parse_records(&jpath, RecordFormat::from_path(&jpath)).unwrap(), r);
}

#[test]
fn invalid_rows_are_rejected_not_dropped() {
    let bad = FIXTURE.replace(",0,call,", ",0,swap,");
    assert!(matches!(
        read_records_csv(bad.as_bytes()).unwrap_err(),
        Error::UnknownKind { line: 3, .. }
    ));
    let missing = FIXTURE.replace("1600000100", "");
    assert!(matches!(
        read_records_csv(missing.as_bytes()).unwrap_err(),
        Error::MalformedRow { line: 3, .. }
    ));
}

#[test]
fn five_record_type_inference() {
    // A -trans-> B, B -call-> C, C -trans-> D, D -call-> E, E -call-> C
    let rec = |a, b, kind| InteractionRecord {
        initiator: addr(a),
        recipient: addr(b),
        value: 1,
        kind,
        timestamp: 0,
    };
    let records = [
        rec('a', 'b', InteractionKind::Trans),
        rec('b', 'c', InteractionKind::Call),
        rec('c', 'd', InteractionKind::Trans),
        rec('d', 'e', InteractionKind::Call),
        rec('e', 'c', InteractionKind::Call),
    ];
    let table = resolve_types(&records, None).unwrap();
    let expected: AccountTypeTable = [
        (addr('a'), AccountType::Eoa),
        (addr('b'), AccountType::Eoa),
        (addr('c'), AccountType::Ca),
        (addr('d'), AccountType::Eoa),
        (addr('e'), AccountType::Ca),
    ]
    .into_iter()
    .collect();
    assert_eq!(table, expected);

    let declared: AccountTypeTable = [(addr('e'), AccountType::Eoa)].into_iter().collect();
    assert_eq!(
        resolve_types(&records, Some(&declared)).unwrap_err(),
        metaifd_core::Error::TypeConflict(addr('e'))
    );
}

#[test]
fn provider_reads_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    fs::write(&path, FIXTURE).unwrap();
    let p = FileProvider::open(&path, RecordFormat::Csv).unwrap();
    assert_eq!(p.fetch(&addr('3'), 1).unwrap().len(), 1);
    assert_eq!(p.fetch(&addr('3'), 2).unwrap().len(), 2);
    assert_eq!(p.fetch(&addr('3'), 3).unwrap().len(), 3);
}

fn arb_record() -> impl Strategy<Value = InteractionRecord> {
    (0u64..8, 0u64..8, any::<u128>(), any::<bool>(), any::<u64>()).prop_map(|(a, b, value, call, timestamp)| {
        InteractionRecord {
            initiator: Address::synthetic(a),
            recipient: Address::synthetic(b),
            value,
            kind: if call { InteractionKind::Call } else { InteractionKind::Trans },
            timestamp,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csv_and_jsonl_round_trip(records in prop::collection::vec(arb_record(), 0..30)) {
        for format in [RecordFormat::Csv, RecordFormat::Jsonl] {
            let mut buf = Vec::new();
            write_records(&mut buf, &records, format).unwrap();
            let back = match format {
                RecordFormat::Csv => read_records_csv(buf.as_slice()).unwrap(),
                RecordFormat::Jsonl => read_records_jsonl(buf.as_slice()).unwrap(),
            };
            prop_assert_eq!(&back, &records);
        }
    }

    #[test]
    fn type_resolution_is_idempotent(records in prop::collection::vec(arb_record(), 0..30)) {
        let inner = resolve_types(&records, None).unwrap();
        prop_assert_eq!(resolve_types(&records, Some(&inner)).unwrap(), inner);
    }

    #[test]
    fn snapshot_round_trip_is_identity(
        records in prop::collection::vec(arb_record(), 0..30),
        labeled in prop::collection::btree_map(0u64..8, any::<bool>(), 0..8),
        phish in any::<bool>(),
    ) {
        let types = resolve_types(&records, None).unwrap();
        let mut labels = LabelTable::new(if phish { FraudKind::Phish } else { FraudKind::Ponzi });
        labels.labels = labeled
            .into_iter()
            .map(|(i, f)| (Address::synthetic(i), if f { Label::Fraud } else { Label::Normal }))
            .collect::<BTreeMap<_, _>>();
        let snap = DatasetSnapshot::new(records, types, Some(labels));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s");
        let sum = save_snapshot(&snap, &path).unwrap();
        let back = load_snapshot(&path).unwrap();
        prop_assert_eq!(&back.checksum, &sum);
        prop_assert_eq!(&back, &snap);
        prop_assert_eq!(back.to_bytes(), fs::read(&path).unwrap());
    }
}
