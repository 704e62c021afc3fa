//! Azure Functions 2019 style per-day CSV files.
//!
//! Header: `HashOwner,HashApp,HashFunction,Trigger,1,2,...,1440`. The first
//! minute label of the first file fixes the dataset origin, which lets a
//! window written from the middle of a trace load back at the same clock.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{FunctionMeta, TraceDataset, TriggerType, MINUTES_PER_DAY};
use crate::error::{Error, Result};

const KEY_COLUMNS: [&str; 4] = ["HashOwner", "HashApp", "HashFunction", "Trigger"];

struct RawRow {
    owner: String,
    app: String,
    function: String,
    trigger: TriggerType,
    counts: Vec<u32>,
}

struct DayFile {
    first_label: Option<u64>,
    minutes: usize,
    rows: Vec<RawRow>,
}

fn parse_error(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => parse_error(path, line, format!("{kind:?}")),
    }
}

fn parse_day_file(path: &Path) -> Result<DayFile> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < KEY_COLUMNS.len() {
        return Err(parse_error(
            path,
            1,
            "header is missing owner/app/function/trigger columns",
        ));
    }
    for (i, expected) in KEY_COLUMNS.iter().enumerate() {
        if !header[i].trim().eq_ignore_ascii_case(expected) {
            return Err(parse_error(
                path,
                1,
                format!(
                    "column {} is `{}`, expected `{expected}`",
                    i + 1,
                    &header[i]
                ),
            ));
        }
    }
    let mut first_label = None;
    for (offset, label) in header.iter().skip(KEY_COLUMNS.len()).enumerate() {
        let minute: u64 = label.trim().parse().map_err(|_| {
            parse_error(
                path,
                1,
                format!("minute column `{label}` is not an integer"),
            )
        })?;
        let first = *first_label.get_or_insert(minute);
        if minute != first + offset as u64 {
            return Err(parse_error(
                path,
                1,
                format!("minute column `{label}` is out of sequence"),
            ));
        }
    }
    if first_label == Some(0) {
        return Err(parse_error(path, 1, "minute columns are numbered from 1"));
    }
    let minutes = header.len() - KEY_COLUMNS.len();

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let counts = record
            .iter()
            .skip(KEY_COLUMNS.len())
            .map(|cell| {
                cell.trim().parse::<u32>().map_err(|_| {
                    parse_error(path, line, format!("invalid invocation count `{cell}`"))
                })
            })
            .collect::<Result<Vec<u32>>>()?;
        let function = record[2].trim().to_string();
        if function.is_empty() {
            return Err(parse_error(path, line, "empty function hash"));
        }
        rows.push(RawRow {
            owner: record[0].trim().to_string(),
            app: record[1].trim().to_string(),
            function,
            trigger: TriggerType::from_label(&record[3]),
            counts,
        });
    }
    Ok(DayFile {
        first_label,
        minutes,
        rows,
    })
}

struct Accumulated {
    owner: String,
    app: String,
    trigger_rows: [usize; TriggerType::ALL.len()],
    counts: Vec<u32>,
}

/// Load and merge consecutive day files into one dataset.
///
/// Functions absent from a day contribute zero counts for it. Rows repeating a
/// function within the window are summed slot by slot, and a function seen
/// with several triggers keeps the trigger with the most rows (ties go to the
/// earlier trigger in [`TriggerType::ALL`]).
pub fn load_azure_csv<P: AsRef<Path> + Sync>(paths: &[P]) -> Result<TraceDataset> {
    let days = paths
        .par_iter()
        .map(|p| parse_day_file(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let Some(first) = days.first() else {
        return Ok(TraceDataset::empty(0, 0));
    };
    let per_file = first.minutes;
    for (day, path) in days.iter().zip(paths) {
        if day.minutes != per_file {
            return Err(Error::InconsistentLength {
                path: path.as_ref().to_path_buf(),
                found: day.minutes,
                expected: per_file,
            });
        }
    }
    let origin = first.first_label.map(|l| l - 1).unwrap_or(0);
    let window = per_file * days.len();

    let mut acc: HashMap<String, Accumulated> = HashMap::new();
    for (d, day) in days.into_iter().enumerate() {
        let base = d * per_file;
        for row in day.rows {
            let entry = acc.entry(row.function).or_insert_with(|| Accumulated {
                owner: row.owner,
                app: row.app,
                trigger_rows: [0; TriggerType::ALL.len()],
                counts: vec![0; window],
            });
            entry.trigger_rows[row.trigger as usize] += 1;
            for (slot, c) in entry.counts[base..base + per_file]
                .iter_mut()
                .zip(&row.counts)
            {
                *slot = slot.saturating_add(*c);
            }
        }
    }

    let entries = acc.into_iter().map(|(function_id, a)| {
        let mut best = 0;
        for (i, &n) in a.trigger_rows.iter().enumerate() {
            if n > a.trigger_rows[best] {
                best = i;
            }
        }
        let meta = FunctionMeta {
            owner_id: a.owner,
            app_id: a.app,
            function_id,
            trigger: TriggerType::ALL[best],
        };
        (meta, a.counts)
    });
    TraceDataset::new(window, origin, entries)
}

fn write_rows(
    path: &Path,
    ds: &TraceDataset,
    first_label: u64,
    range: std::ops::Range<usize>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header: Vec<String> = KEY_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..range.len() as u64).map(|i| (first_label + i).to_string()));
    writer
        .write_record(&header)
        .map_err(|e| csv_error(path, e))?;
    let mut record = Vec::with_capacity(header.len());
    for (meta, series) in ds.iter() {
        record.clear();
        record.push(meta.owner_id.clone());
        record.push(meta.app_id.clone());
        record.push(meta.function_id.clone());
        record.push(meta.trigger.to_string());
        record.extend(series.counts[range.clone()].iter().map(|c| c.to_string()));
        writer
            .write_record(&record)
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Write the whole window as one CSV whose minute labels carry the dataset origin.
pub fn write_trace_csv(ds: &TraceDataset, path: impl AsRef<Path>) -> Result<()> {
    write_rows(path.as_ref(), ds, ds.origin_minute() + 1, 0..ds.window())
}

/// Write one Azure-style file per day (`...d01.csv`, `...d02.csv`, ...), each
/// labelled `1..1440`. Requires a whole-day window starting at minute 0.
pub fn write_trace_days(ds: &TraceDataset, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    if !ds.window().is_multiple_of(MINUTES_PER_DAY) || ds.origin_minute() != 0 {
        return Err(Error::InvalidDataset(format!(
            "per-day export needs whole days from minute 0 (window {}, origin {})",
            ds.window(),
            ds.origin_minute()
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    (0..ds.days())
        .map(|d| {
            let path = dir.join(format!(
                "invocations_per_function_md.anon.d{:02}.csv",
                d + 1
            ));
            let start = d * MINUTES_PER_DAY;
            write_rows(&path, ds, 1, start..start + MINUTES_PER_DAY)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn header(minutes: usize) -> String {
        let mut h = KEY_COLUMNS.join(",");
        for m in 1..=minutes {
            h.push_str(&format!(",{m}"));
        }
        h
    }

    fn write_file(dir: &Path, name: &str, lines: &[String]) -> PathBuf {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        path
    }

    #[test]
    fn duplicate_rows_are_summed_per_slot() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "d1.csv",
            &[
                header(4),
                "o,a,f,http,1,0,2,0".into(),
                "o,a,f,http,0,0,3,1".into(),
                "o,a,f,http,5,0,0,0".into(),
            ],
        );
        let ds = load_azure_csv(&[p]).unwrap();
        // Hand-summed column by column: (1+0+5, 0, 2+3+0, 0+1+0).
        assert_eq!(ds.get("f").unwrap().counts, vec![6, 0, 5, 1]);
    }

    #[test]
    fn multi_trigger_collapses_to_most_rows_then_enum_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "d1.csv",
            &[
                header(2),
                "o,a,f,queue,1,0".into(),
                "o,a,f,timer,0,1".into(),
                "o,a,f,queue,1,1".into(),
                "o,a,g,queue,1,0".into(),
                "o,a,g,timer,1,0".into(),
            ],
        );
        let ds = load_azure_csv(&[p]).unwrap();
        assert_eq!(ds.meta("f").unwrap().trigger, TriggerType::Queue);
        assert_eq!(ds.meta("g").unwrap().trigger, TriggerType::Timer);
        assert_eq!(ds.get("f").unwrap().counts, vec![2, 2]);
    }

    #[test]
    fn missing_day_is_zero_filled() {
        let dir = tempfile::tempdir().unwrap();
        let d1 = write_file(
            dir.path(),
            "d1.csv",
            &[header(3), "o,a,f,http,1,2,3".into()],
        );
        let d2 = write_file(
            dir.path(),
            "d2.csv",
            &[header(3), "o,a,g,http,0,0,1".into()],
        );
        let ds = load_azure_csv(&[d1, d2]).unwrap();
        assert_eq!(ds.window(), 6);
        assert_eq!(ds.get("f").unwrap().counts, vec![1, 2, 3, 0, 0, 0]);
        assert_eq!(ds.get("g").unwrap().counts, vec![0, 0, 0, 0, 0, 1]);
    }

    #[test]
    fn malformed_row_names_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "bad.csv",
            &[header(2), "o,a,f,http,1,0".into(), "o,a,g,http,1,x".into()],
        );
        let err = load_azure_csv(&[p]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.csv"), "{msg}");
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{msg}");
    }

    #[test]
    fn inconsistent_day_lengths_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let d1 = write_file(
            dir.path(),
            "d1.csv",
            &[header(3), "o,a,f,http,1,2,3".into()],
        );
        let d2 = write_file(dir.path(), "d2.csv", &[header(2), "o,a,f,http,1,2".into()]);
        assert!(matches!(
            load_azure_csv(&[d1, d2]),
            Err(Error::InconsistentLength { .. })
        ));
    }

    #[test]
    fn empty_dataset_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        let ds = TraceDataset::empty(3, 0);
        write_trace_csv(&ds, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(load_azure_csv(&[&path]).unwrap(), ds);
    }

    #[test]
    fn origin_survives_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let meta = FunctionMeta {
            owner_id: "o".into(),
            app_id: "a".into(),
            function_id: "f".into(),
            trigger: TriggerType::Event,
        };
        let ds = TraceDataset::new(3, 17280, vec![(meta, vec![0, 4, 1])]).unwrap();
        write_trace_csv(&ds, &path).unwrap();
        assert_eq!(load_azure_csv(&[&path]).unwrap(), ds);
    }
}
