//! Record, account-type and label files.
//!
//! Records: CSV with the header `initiator,recipient,value,kind,timestamp`,
//! or JSON Lines with the same keys. `value` may be a JSON number or a
//! decimal string (wei amounts overflow `u64`). Account types: CSV
//! `address,type` with `eoa`/`ca`. Labels: CSV `address,label` with
//! `0` (normal) / `1` (fraud).

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use metaifd_core::record::{AccountTypeTable, FraudKind, Label, LabelTable};
use metaifd_core::{AccountType, Address, InteractionKind, InteractionRecord};
use serde_json::Value;

use crate::error::{Error, Result};

pub const RECORD_COLUMNS: [&str; 5] = ["initiator", "recipient", "value", "kind", "timestamp"];
pub const ACCOUNT_COLUMNS: [&str; 2] = ["address", "type"];
pub const LABEL_COLUMNS: [&str; 2] = ["address", "label"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    #[default]
    Csv,
    Jsonl,
}

impl RecordFormat {
    /// Guesses from the file extension; anything but `.jsonl`/`.ndjson` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson") => RecordFormat::Jsonl,
            _ => RecordFormat::Csv,
        }
    }
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(RecordFormat::Csv),
            "jsonl" => Ok(RecordFormat::Jsonl),
            other => Err(Error::Config(format!("unknown record format `{other}`"))),
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn parse_records(path: &Path, format: RecordFormat) -> Result<Vec<InteractionRecord>> {
    let file = open(path)?;
    match format {
        RecordFormat::Csv => read_records_csv(file),
        RecordFormat::Jsonl => read_records_jsonl(BufReader::new(file)),
    }
}

fn parse_address(line: usize, raw: &str) -> Result<Address> {
    raw.trim().parse().map_err(|_| Error::InvalidAddress {
        line,
        address: raw.to_string(),
    })
}

fn parse_value(line: usize, raw: &str) -> Result<u128> {
    let raw = raw.trim();
    if let Some(rest) = raw.strip_prefix('-') {
        if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::NegativeValue {
                line,
                value: raw.to_string(),
            });
        }
    }
    raw.parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("value `{raw}` is not a non-negative integer"),
    })
}

fn parse_kind(line: usize, raw: &str) -> Result<InteractionKind> {
    raw.trim().parse().map_err(|_| Error::UnknownKind {
        line,
        kind: raw.to_string(),
    })
}

fn parse_timestamp(line: usize, raw: &str) -> Result<u64> {
    let raw = raw.trim();
    raw.parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("timestamp `{raw}` is not a non-negative integer"),
    })
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn csv_line(err: &csv::Error) -> usize {
    err.position().map_or(0, |p| p.line() as usize)
}

fn check_header<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(|e| Error::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

/// Rows of a headed CSV file with their 1-based line numbers.
fn csv_rows<R: Read>(reader: R, expected: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut reader = csv_reader(reader);
    check_header(&mut reader, expected)?;
    reader
        .records()
        .map(|row| {
            let row = row.map_err(|e| Error::MalformedRow {
                line: csv_line(&e),
                reason: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            Ok((line, row))
        })
        .collect()
}

pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<InteractionRecord>> {
    csv_rows(reader, &RECORD_COLUMNS)?
        .into_iter()
        .map(|(line, row)| {
            Ok(InteractionRecord {
                initiator: parse_address(line, &row[0])?,
                recipient: parse_address(line, &row[1])?,
                value: parse_value(line, &row[2])?,
                kind: parse_kind(line, &row[3])?,
                timestamp: parse_timestamp(line, &row[4])?,
            })
        })
        .collect()
}

fn json_field<'a>(line: usize, obj: &'a serde_json::Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::MalformedRow {
        line,
        reason: format!("missing key `{key}`"),
    })
}

fn json_text(line: usize, value: &Value, key: &str) -> Result<String> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(Error::MalformedRow {
            line,
            reason: format!("`{key}` must be a string or number"),
        }),
    }
}

fn record_from_json(line: usize, text: &str) -> Result<InteractionRecord> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::MalformedRow {
        line,
        reason: e.to_string(),
    })?;
    let Value::Object(obj) = value else {
        return Err(Error::MalformedRow {
            line,
            reason: "expected a JSON object".into(),
        });
    };
    if let Some(extra) = obj.keys().find(|k| !RECORD_COLUMNS.contains(&k.as_str())) {
        return Err(Error::MalformedRow {
            line,
            reason: format!("unexpected key `{extra}`"),
        });
    }
    let text = |key: &str| json_text(line, json_field(line, &obj, key)?, key);
    Ok(InteractionRecord {
        initiator: parse_address(line, &text("initiator")?)?,
        recipient: parse_address(line, &text("recipient")?)?,
        value: parse_value(line, &text("value")?)?,
        kind: parse_kind(line, &text("kind")?)?,
        timestamp: parse_timestamp(line, &text("timestamp")?)?,
    })
}

/// Blank lines are skipped; line numbers count them.
pub fn read_records_jsonl<R: BufRead>(reader: R) -> Result<Vec<InteractionRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::MalformedRow {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(record_from_json(i + 1, &line)?);
    }
    Ok(out)
}

pub fn parse_account_types(path: &Path) -> Result<AccountTypeTable> {
    read_account_types(open(path)?)
}

pub fn read_account_types<R: Read>(reader: R) -> Result<AccountTypeTable> {
    let mut table = AccountTypeTable::new();
    for (line, row) in csv_rows(reader, &ACCOUNT_COLUMNS)? {
        let address = parse_address(line, &row[0])?;
        let ty: AccountType = row[1].parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("unknown account type `{}`", &row[1]),
        })?;
        if table.insert(address, ty).is_some_and(|old| old != ty) {
            return Err(Error::MalformedRow {
                line,
                reason: format!("conflicting types for {address}"),
            });
        }
    }
    Ok(table)
}

pub fn parse_labels(path: &Path, fraud_kind: FraudKind) -> Result<LabelTable> {
    read_labels(open(path)?, fraud_kind)
}

pub fn read_labels<R: Read>(reader: R, fraud_kind: FraudKind) -> Result<LabelTable> {
    let mut table = LabelTable::new(fraud_kind);
    for (line, row) in csv_rows(reader, &LABEL_COLUMNS)? {
        let address = parse_address(line, &row[0])?;
        let label = match &row[1] {
            "0" => Label::Normal,
            "1" => Label::Fraud,
            other => {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("label `{other}` is not 0 or 1"),
                })
            }
        };
        if table.labels.insert(address, label).is_some_and(|old| old != label) {
            return Err(Error::MalformedRow {
                line,
                reason: format!("conflicting labels for {address}"),
            });
        }
    }
    Ok(table)
}

fn csv_err(e: csv::Error) -> Error {
    Error::MalformedRow {
        line: 0,
        reason: e.to_string(),
    }
}

pub fn write_records<W: Write>(writer: W, records: &[InteractionRecord], format: RecordFormat) -> Result<()> {
    match format {
        RecordFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(RECORD_COLUMNS).map_err(csv_err)?;
            for r in records {
                w.write_record([
                    r.initiator.to_string(),
                    r.recipient.to_string(),
                    r.value.to_string(),
                    r.kind.to_string(),
                    r.timestamp.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::io("<records>", e))
        }
        RecordFormat::Jsonl => {
            let mut w = writer;
            for r in records {
                let row = serde_json::json!({
                    "initiator": r.initiator.to_string(),
                    "recipient": r.recipient.to_string(),
                    "value": r.value.to_string(),
                    "kind": r.kind.as_str(),
                    "timestamp": r.timestamp,
                });
                writeln!(w, "{row}").map_err(|e| Error::io("<records>", e))?;
            }
            Ok(())
        }
    }
}

pub fn write_account_types<W: Write>(writer: W, table: &AccountTypeTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ACCOUNT_COLUMNS).map_err(csv_err)?;
    for (addr, ty) in table {
        w.write_record([addr.to_string(), ty.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<accounts>", e))
}

pub fn write_labels<W: Write>(writer: W, table: &LabelTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LABEL_COLUMNS).map_err(csv_err)?;
    for (addr, label) in &table.labels {
        w.write_record([addr.to_string(), label.class().to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<labels>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: &str = "0x00000000000000000000000000000000000000aa";
    const B: &str = "0x00000000000000000000000000000000000000bb";

    fn csv(body: &str) -> Result<Vec<InteractionRecord>> {
        read_records_csv(format!("initiator,recipient,value,kind,timestamp\n{body}").as_bytes())
    }

    #[test]
    fn single_row() {
        let r = csv(&format!("{A},{B},5,trans,1600000000\n")).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].value, 5);
        assert_eq!(r[0].kind, InteractionKind::Trans);
        assert_eq!(r[0].initiator.to_string(), A);
        assert_eq!(r[0].timestamp, 1_600_000_000);
    }

    #[test]
    fn row_errors() {
        let e = csv(&format!("{A},{B},5,swap,1\n")).unwrap_err();
        assert!(matches!(e, Error::UnknownKind { line: 2, ref kind } if kind == "swap"));
        let e = csv(&format!("{A},{B},-5,trans,1\n")).unwrap_err();
        assert!(matches!(e, Error::NegativeValue { line: 2, .. }));
        let e = csv(&format!("{A},0x12,5,trans,1\n")).unwrap_err();
        assert!(matches!(e, Error::InvalidAddress { line: 2, .. }));
        let e = csv(&format!("{A},{B},5,trans\n")).unwrap_err();
        assert!(matches!(e, Error::MalformedRow { line: 2, .. }));
        let e = csv(&format!("{A},{B},1.5,trans,1\n")).unwrap_err();
        assert!(matches!(e, Error::MalformedRow { line: 2, .. }));
        let e = read_records_csv("a,b,c,d,e\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::MalformedRow { line: 1, .. }));
    }

    #[test]
    fn mixed_case_addresses_are_normalized() {
        let upper = "0x00000000000000000000000000000000000000AA";
        let r = csv(&format!("{upper},{B},0,call,0\n")).unwrap();
        assert_eq!(r[0].initiator.to_string(), A);
    }

    #[test]
    fn large_values_survive() {
        let big = u128::MAX.to_string();
        let r = csv(&format!("{A},{B},{big},trans,0\n")).unwrap();
        assert_eq!(r[0].value, u128::MAX);
    }

    #[test]
    fn jsonl_rows() {
        let text = format!(
            "{{\"initiator\":\"{A}\",\"recipient\":\"{B}\",\"value\":7,\"kind\":\"call\",\"timestamp\":3}}\n\n\
             {{\"initiator\":\"{B}\",\"recipient\":\"{A}\",\"value\":\"8\",\"kind\":\"trans\",\"timestamp\":4}}\n"
        );
        let r = read_records_jsonl(text.as_bytes()).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!((r[0].value, r[1].value), (7, 8));
        let bad = format!("{{\"initiator\":\"{A}\",\"recipient\":\"{B}\",\"value\":-1,\"kind\":\"call\",\"timestamp\":3}}\n");
        assert!(matches!(
            read_records_jsonl(bad.as_bytes()).unwrap_err(),
            Error::NegativeValue { line: 1, .. }
        ));
        let extra = format!("{{\"initiator\":\"{A}\",\"recipient\":\"{B}\",\"value\":1,\"kind\":\"call\",\"timestamp\":3,\"gas\":1}}\n");
        assert!(matches!(
            read_records_jsonl(extra.as_bytes()).unwrap_err(),
            Error::MalformedRow { line: 1, .. }
        ));
    }

    #[test]
    fn account_and_label_files() {
        let types = read_account_types(format!("address,type\n{A},eoa\n{B},ca\n").as_bytes()).unwrap();
        assert_eq!(types.len(), 2);
        let conflict = read_account_types(format!("address,type\n{A},eoa\n{A},ca\n").as_bytes());
        assert!(matches!(conflict.unwrap_err(), Error::MalformedRow { line: 3, .. }));
        let labels = read_labels(format!("address,label\n{A},1\n").as_bytes(), FraudKind::Phish).unwrap();
        assert_eq!(labels.labels.values().next(), Some(&Label::Fraud));
        assert!(read_labels(format!("address,label\n{A},2\n").as_bytes(), FraudKind::Phish).is_err());
    }
}
