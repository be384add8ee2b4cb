//! Session logs: newline-delimited wire records with non-decreasing
//! timestamps.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::wire::{decode_str, encode, WireMessage};

pub struct LogWriter<W: Write> {
    out: W,
    last_ts: u64,
    records: usize,
}

impl<W: Write> LogWriter<W> {
    pub fn new(out: W) -> Self {
        LogWriter {
            out,
            last_ts: 0,
            records: 0,
        }
    }

    pub fn append(&mut self, msg: &WireMessage) -> Result<()> {
        if msg.ts_ms < self.last_ts {
            return Err(Error::Encode(format!(
                "log timestamp {} precedes {}",
                msg.ts_ms, self.last_ts
            )));
        }
        self.out.write_all(encode(msg)?.as_bytes())?;
        self.last_ts = msg.ts_ms;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Reads and validates a whole log.
pub fn read_log<R: BufRead>(reader: R) -> Result<Vec<WireMessage>> {
    let mut out: Vec<WireMessage> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let msg =
            decode_str(&line).map_err(|e| Error::Decode(format!("log line {}: {e}", i + 1)))?;
        if let Some(prev) = out.last() {
            if msg.ts_ms < prev.ts_ms {
                return Err(Error::Decode(format!(
                    "log line {}: timestamp goes backwards",
                    i + 1
                )));
            }
        }
        out.push(msg);
    }
    Ok(out)
}

pub fn read_log_file(path: &std::path::Path) -> Result<Vec<WireMessage>> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_log(std::io::BufReader::new(f))
}
