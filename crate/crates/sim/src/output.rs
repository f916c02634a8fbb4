//! Result files. Every file is written to a temporary sibling first and
//! renamed into place.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use diffsync_core::simnet::SimResult;
use diffsync_core::workload::{EditTrace, TraceEdit};
use serde::{Deserialize, Serialize};

use crate::config::ConfigError;

/// Overrides the `./out` output root.
pub const OUT_ENV: &str = "DIFFSYNC_OUT";

pub fn out_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

/// `explicit` if given, else `<root>/<name>`.
pub fn out_dir(explicit: Option<&Path>, name: &str) -> PathBuf {
    explicit.map_or_else(|| out_root().join(name), Path::to_path_buf)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn result_json(result: &SimResult) -> String {
    let mut s = serde_json::to_string_pretty(result).expect("result serialises");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
struct EventRow<'a> {
    time_s: f64,
    device: &'a str,
    event: &'a str,
    bytes: u64,
    radio_state: &'a str,
    energy_cum: f64,
}

pub fn events_csv(result: &SimResult) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in &result.events {
        w.serialize(EventRow {
            time_s: e.time.as_secs_f64(),
            device: &e.device,
            event: &e.event,
            bytes: e.bytes,
            radio_state: e.radio_state.map_or("", |s| s.as_str()),
            energy_cum: e.energy_cum,
        })
        .expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

/// Writes `result.json` and `events.csv` into `dir`.
pub fn write_result(dir: &Path, result: &SimResult) -> std::io::Result<()> {
    write_atomic(&dir.join("result.json"), result_json(result).as_bytes())?;
    write_atomic(&dir.join("events.csv"), &events_csv(result))
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(std::io::Error::other)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// First line of a trace file.
#[derive(Debug, Serialize, Deserialize)]
struct TraceHeader {
    initial: diffsync_core::diff::Content,
    sessions: Vec<diffsync_core::workload::SessionWindow>,
}

/// JSON Lines: a header with the initial item and sessions, then one edit per line.
pub fn trace_jsonl(trace: &EditTrace) -> String {
    let header = TraceHeader {
        initial: trace.initial.clone(),
        sessions: trace.sessions.clone(),
    };
    let mut s = serde_json::to_string(&header).expect("trace header serialises");
    s.push('\n');
    for e in &trace.edits {
        s.push_str(&serde_json::to_string(e).expect("edit serialises"));
        s.push('\n');
    }
    s
}

pub fn read_trace_jsonl(path: &Path) -> Result<EditTrace, ConfigError> {
    let read_err = |source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(read_err)?;
    let origin = path.display().to_string();
    let mut lines = BufReader::new(file).lines().enumerate();
    let parse_err = |n: usize, source| ConfigError::Parse {
        origin: format!("{origin}:{}", n + 1),
        source,
    };
    let (n, first) = lines
        .next()
        .ok_or_else(|| ConfigError::Invalid(format!("{origin}: empty trace file")))?;
    let header: TraceHeader = serde_json::from_str(&first.map_err(read_err)?).map_err(|e| parse_err(n, e))?;
    let mut edits = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(read_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let edit: TraceEdit = serde_json::from_str(&line).map_err(|e| parse_err(n, e))?;
        edits.push(edit);
    }
    let trace = EditTrace {
        initial: header.initial,
        sessions: header.sessions,
        edits,
    };
    trace
        .validate()
        .map_err(|e| ConfigError::Invalid(format!("{origin}: {e}")))?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use diffsync_core::workload::{generate_trace, WorkloadParams};

    #[test]
    fn trace_jsonl_round_trips() {
        let trace = generate_trace(&WorkloadParams::default(), 2, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        write_atomic(&path, trace_jsonl(&trace).as_bytes()).unwrap();
        assert_eq!(read_trace_jsonl(&path).unwrap(), trace);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
