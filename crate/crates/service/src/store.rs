//! Append-only session logs.
//!
//! Each session lives in `<data_dir>/sessions/<id>/events.jsonl`. The first
//! line is a snapshot of the freshly created session; every mutation appends
//! one event line, and every [`SNAPSHOT_EVERY`] events a new snapshot line is
//! written so restores only replay the tail.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::ApiError;
use crate::session::{Event, SessionState, Snapshot};

pub const SNAPSHOT_EVERY: usize = 100;
const LOG_FILE: &str = "events.jsonl";
pub const INDEX_FILE: &str = "index.bin";

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Snapshot { snapshot: Snapshot },
    Event { revision: u64, event: Event },
}

#[derive(Debug)]
pub struct SessionLog {
    dir: PathBuf,
    file: File,
    since_snapshot: usize,
}

fn write_record(file: &mut File, r: &Record) -> io::Result<()> {
    let mut line = serde_json::to_string(r).map_err(io::Error::other)?;
    line.push('\n');
    file.write_all(line.as_bytes())?;
    file.sync_data()
}

pub fn sessions_dir(data_dir: &Path) -> PathBuf {
    data_dir.join("sessions")
}

impl SessionLog {
    pub fn create(data_dir: &Path, state: &SessionState) -> io::Result<SessionLog> {
        let dir = sessions_dir(data_dir).join(&state.id);
        fs::create_dir_all(&dir)?;
        let mut file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(dir.join(LOG_FILE))?;
        write_record(
            &mut file,
            &Record::Snapshot {
                snapshot: state.snapshot(),
            },
        )?;
        Ok(SessionLog {
            dir,
            file,
            since_snapshot: 0,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Records `event`; `after` is the state it produced.
    pub fn append(&mut self, event: &Event, after: &SessionState) -> io::Result<()> {
        write_record(
            &mut self.file,
            &Record::Event {
                revision: after.revision,
                event: event.clone(),
            },
        )?;
        self.since_snapshot += 1;
        if self.since_snapshot >= SNAPSHOT_EVERY {
            write_record(
                &mut self.file,
                &Record::Snapshot {
                    snapshot: after.snapshot(),
                },
            )?;
            self.since_snapshot = 0;
        }
        Ok(())
    }

    /// Rebuilds a session from its directory: the last snapshot plus every
    /// event after it. A torn final line (from a crash mid-write) is dropped.
    pub fn open(dir: &Path) -> Result<(SessionState, SessionLog), ApiError> {
        let path = dir.join(LOG_FILE);
        let reader = BufReader::new(File::open(&path)?);
        let lines: Vec<String> = reader.lines().collect::<io::Result<_>>()?;
        let mut records = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Record>(line) {
                Ok(r) => records.push(r),
                Err(e) if i + 1 == lines.len() => {
                    warn!(path = %path.display(), error = %e, "dropping torn final log line");
                }
                Err(e) => {
                    return Err(ApiError::internal(format!(
                        "{}: line {}: {e}",
                        path.display(),
                        i + 1
                    )))
                }
            }
        }
        let start = records
            .iter()
            .rposition(|r| matches!(r, Record::Snapshot { .. }))
            .ok_or_else(|| ApiError::internal(format!("{}: no snapshot", path.display())))?;
        let mut tail = records.into_iter().skip(start);
        let Some(Record::Snapshot { snapshot }) = tail.next() else {
            unreachable!("position points at a snapshot")
        };
        let mut state = SessionState::restore(snapshot)?;
        let mut since_snapshot = 0;
        for r in tail {
            let Record::Event { revision, event } = r else {
                unreachable!("later snapshots were skipped")
            };
            state.apply(&event)?;
            if state.revision != revision {
                return Err(ApiError::internal(format!(
                    "{}: replay reached revision {} but the log says {revision}",
                    path.display(),
                    state.revision
                )));
            }
            since_snapshot += 1;
        }
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok((
            state,
            SessionLog {
                dir: dir.to_path_buf(),
                file,
                since_snapshot,
            },
        ))
    }
}
