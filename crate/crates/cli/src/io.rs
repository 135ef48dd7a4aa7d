//! CSV and JSON files written and read by the subcommands.

use std::fs::File;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toom_core::estimators::StructureFunctionAccumulator;
use toom_core::protocol::SampleRecord;

use crate::error::{CliError, CliResult};

fn writer(path: &Path) -> CliResult<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Reader::from_reader(f))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::parse(path, format!("{other:?}")),
        }
    } else {
        CliError::parse(path, e)
    }
}

/// Write a header row and then one row per record.
pub fn write_table<R: AsRef<[String]>>(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = R>,
) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r.as_ref()).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_samples(path: &Path, samples: &[SampleRecord]) -> CliResult<()> {
    write_table(
        path,
        &["time", "lane", "M"],
        samples.iter().map(|s| {
            [
                s.time.to_string(),
                s.lane.to_string(),
                s.magnetization.to_string(),
            ]
        }),
    )
}

pub fn read_samples(path: &Path) -> CliResult<Vec<SampleRecord>> {
    let mut r = reader(path)?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["time", "lane", "M"] {
        return Err(CliError::parse(path, "expected header time,lane,M"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let parse_err = |_| CliError::parse(path, format!("bad row {:?}", rec));
        out.push(SampleRecord {
            time: field(0).parse().map_err(parse_err)?,
            lane: field(1).parse().map_err(parse_err)?,
            magnetization: field(2).parse().map_err(parse_err)?,
        });
    }
    if out.is_empty() {
        return Err(CliError::parse(path, "no samples"));
    }
    Ok(out)
}

pub fn write_structure(path: &Path, acc: &StructureFunctionAccumulator) -> CliResult<()> {
    let rows = acc
        .batch_tables()
        .into_iter()
        .enumerate()
        .flat_map(|(b, (s, c))| {
            s.iter()
                .zip(c)
                .enumerate()
                .map(move |(lag, (s, c))| {
                    [b.to_string(), lag.to_string(), s.to_string(), c.to_string()]
                })
                .collect::<Vec<_>>()
        });
    write_table(path, &["batch", "lag", "sum_sq", "count"], rows)
}

pub fn read_structure(path: &Path) -> CliResult<StructureFunctionAccumulator> {
    let mut r = reader(path)?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["batch", "lag", "sum_sq", "count"] {
        return Err(CliError::parse(
            path,
            "expected header batch,lag,sum_sq,count",
        ));
    }
    let mut tables: Vec<(Vec<u64>, Vec<u64>)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let nums: Vec<u64> = rec
            .iter()
            .map(|f| f.parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::parse(path, format!("bad row {:?}", rec)))?;
        let [batch, lag, s, c] = nums[..] else {
            return Err(CliError::parse(path, format!("bad row {:?}", rec)));
        };
        let batch = batch as usize;
        if batch == tables.len() {
            tables.push((Vec::new(), Vec::new()));
        }
        match tables.get_mut(batch) {
            Some(t) if t.0.len() as u64 == lag => {
                t.0.push(s);
                t.1.push(c);
            }
            _ => {
                return Err(CliError::parse(
                    path,
                    "rows must be ordered by batch and lag",
                ))
            }
        }
    }
    let max_lag = tables
        .first()
        .map(|t| t.0.len().saturating_sub(1))
        .ok_or_else(|| CliError::parse(path, "empty structure table"))?;
    StructureFunctionAccumulator::from_batch_tables(max_lag, tables)
        .map_err(|e| CliError::parse(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::parse(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Write to a sibling temporary file and rename it into place.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string(value).map_err(|e| CliError::parse(path, e))?;
    std::fs::write(&tmp, text).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("structure.csv");
        let mut acc = StructureFunctionAccumulator::new(4);
        for k in 0..3i64 {
            acc.push_series_block(&[0, k, 2 * k, k, 5]).unwrap();
            acc.end_batch();
        }
        write_structure(&path, &acc).unwrap();
        assert_eq!(read_structure(&path).unwrap(), acc);
    }

    #[test]
    fn samples_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        let s = vec![
            SampleRecord {
                time: 0,
                lane: 3,
                magnetization: -4,
            },
            SampleRecord {
                time: 10,
                lane: 65,
                magnetization: 12,
            },
        ];
        write_samples(&path, &s).unwrap();
        assert_eq!(read_samples(&path).unwrap(), s);
        assert!(std::fs::read_to_string(&path)
            .unwrap()
            .starts_with("time,lane,M\n"));
    }

    #[test]
    fn empty_and_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        std::fs::write(&path, "time,lane,M\n").unwrap();
        assert!(matches!(read_samples(&path), Err(CliError::Parse { .. })));
        std::fs::write(&path, "time,lane,M\n1,x,2\n").unwrap();
        assert!(matches!(read_samples(&path), Err(CliError::Parse { .. })));
        let missing = dir.path().join("nope.csv");
        assert_eq!(read_samples(&missing).unwrap_err().exit_code(), 3);
    }
}
