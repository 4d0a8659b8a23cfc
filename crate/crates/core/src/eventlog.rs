//! JSON Lines serialization of [`EventLog`].
//!
//! Line 1 holds the header object
//! `{"version", "params", "mode", "angles", "seed", "n_trials"}`; every
//! following line is one event `{"trial", "det", "t_ns", "win"}` with `det`
//! one of `S1 S2 AS1 AS2` and `win` one of `W R`. Floats are written in
//! shortest round-trip form, so parsing a written log reproduces it exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trialsim::{DetectionEvent, EventLog, LogHeader, LOG_FORMAT_VERSION};

pub fn write_jsonl<W: Write>(log: &EventLog, mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, &log.header).map_err(|e| Error::Io(e.to_string()))?;
    w.write_all(b"\n")?;
    for e in &log.events {
        serde_json::to_writer(&mut w, e).map_err(|e| Error::Io(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_jsonl_bytes(log: &EventLog) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 * (log.events.len() + 8));
    write_jsonl(log, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub fn save(log: &EventLog, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_jsonl(log, BufWriter::new(f))
}

fn parse_err(line: usize, reason: impl ToString) -> Error {
    Error::Parse {
        line,
        reason: reason.to_string(),
    }
}

/// Parses a log and checks its structural invariants. Line numbers in
/// errors are 1-based.
pub fn read_jsonl<R: BufRead>(r: R) -> Result<EventLog> {
    let mut lines = r.lines();
    let header_line = match lines.next() {
        Some(l) => l?,
        None => return Err(parse_err(1, "empty file, expected a header line")),
    };
    let header: LogHeader = serde_json::from_str(&header_line).map_err(|e| parse_err(1, e))?;
    if header.version != LOG_FORMAT_VERSION {
        return Err(parse_err(
            1,
            format!("unsupported format version {}", header.version),
        ));
    }
    header.params.validate().map_err(|e| parse_err(1, e))?;

    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let ev: DetectionEvent = serde_json::from_str(&line).map_err(|e| parse_err(lineno, e))?;
        if let Some(prev) = events.last() {
            if ev.canonical_cmp(prev) != std::cmp::Ordering::Greater {
                return Err(parse_err(lineno, "event out of canonical order"));
            }
        }
        if ev.trial_id >= header.n_trials {
            return Err(parse_err(
                lineno,
                format!("trial {} >= n_trials {}", ev.trial_id, header.n_trials),
            ));
        }
        events.push(ev);
    }
    let log = EventLog { header, events };
    log.check_invariants().map_err(|e| parse_err(0, e))?;
    Ok(log)
}

pub fn load(path: &Path) -> Result<EventLog> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_jsonl(BufReader::new(f))
}
