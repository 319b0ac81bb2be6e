use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{RoomEvent, StatusError};

/// Append-only JSON-lines event log. Every append is flushed to disk before
/// returning, and timestamps must strictly increase.
#[derive(Debug)]
pub struct EventStore {
    path: PathBuf,
    file: File,
    events: Vec<RoomEvent>,
}

impl EventStore {
    /// Opens or creates the log and loads every stored event. A torn final
    /// line (no trailing newline, left by a crash mid-write) is cut off.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StatusError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        let complete = match text.rfind('\n') {
            Some(i) => i + 1,
            None => 0,
        };
        if complete < text.len() {
            log::warn!("{}: dropping torn final line", path.display());
            file.set_len(complete as u64)?;
            file.seek(SeekFrom::End(0))?;
        }
        let mut events: Vec<RoomEvent> = Vec::new();
        for (i, line) in text[..complete].lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: RoomEvent = serde_json::from_str(line).map_err(|source| StatusError::Corrupt { line: i + 1, source })?;
            if let Some(last) = events.last() {
                if e.ts_ms <= last.ts_ms {
                    return Err(StatusError::UnsortedEvents { index: events.len() });
                }
            }
            events.push(e);
        }
        Ok(Self { path, file, events })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Validates, writes and syncs one event.
    pub fn append(&mut self, event: RoomEvent) -> Result<(), StatusError> {
        event.validate()?;
        if let Some(last) = self.last_ts() {
            if event.ts_ms <= last {
                return Err(StatusError::OutOfOrder {
                    last,
                    found: event.ts_ms,
                });
            }
        }
        let mut line = serde_json::to_vec(&event).expect("events always serialize");
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        self.events.push(event);
        Ok(())
    }

    pub fn events(&self) -> &[RoomEvent] {
        &self.events
    }

    pub fn last_ts(&self) -> Option<i64> {
        self.events.last().map(|e| e.ts_ms)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}
