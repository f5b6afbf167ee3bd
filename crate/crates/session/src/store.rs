//! Append-only JSONL session logs. The log is the source of truth: a
//! session is rebuilt by replaying its answers through a fresh learner.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Registry;
use crate::error::ServiceError;
use crate::session::{Session, SessionParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogRecord {
    Created {
        #[serde(flatten)]
        params: SessionParams,
        question: usize,
    },
    Answered {
        step: usize,
        question: usize,
        y: u8,
        next_question: Option<usize>,
    },
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

impl SessionStore {
    pub fn open(data_dir: &Path) -> Result<Self, ServiceError> {
        let dir = data_dir.join("sessions");
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    /// Ids of every session with a log on disk, sorted.
    pub fn ids(&self) -> Result<Vec<String>, ServiceError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                if let Some(stem) = path.file_stem() {
                    ids.push(stem.to_string_lossy().into_owned());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Appends one record and syncs it to disk. `create` must be set for
    /// the first record and only then.
    pub fn append(&self, id: &str, record: &LogRecord, create: bool) -> Result<(), ServiceError> {
        let path = self.path(id);
        let mut file = if create {
            OpenOptions::new().write(true).create_new(true).open(&path)?
        } else {
            OpenOptions::new()
                .append(true)
                .open(&path)
                .map_err(|e| ServiceError::Integrity(format!("log of session {id} is unavailable: {e}")))?
        };
        let mut line = serde_json::to_vec(record).map_err(|e| ServiceError::Integrity(e.to_string()))?;
        line.push(b'\n');
        file.write_all(&line)?;
        file.sync_data()?;
        Ok(())
    }

    pub fn read(&self, id: &str) -> Result<Vec<LogRecord>, ServiceError> {
        let file = File::open(self.path(id))
            .map_err(|e| ServiceError::Integrity(format!("log of session {id} is unavailable: {e}")))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line)
                .map_err(|e| ServiceError::Integrity(format!("session {id}, line {}: {e}", i + 1)))?;
            out.push(rec);
        }
        Ok(out)
    }

    /// Rebuilds a session from its log, checking every recorded question
    /// against the one the replayed learner asks.
    pub fn replay(&self, id: &str, registry: &Registry) -> Result<Session, ServiceError> {
        let records = self.read(id)?;
        let mut iter = records.into_iter();
        let Some(LogRecord::Created { params, question }) = iter.next() else {
            return Err(ServiceError::Integrity(format!("log of session {id} does not start with its creation")));
        };
        if params.id != id {
            return Err(ServiceError::Integrity(format!("log of session {id} names session {}", params.id)));
        }
        let dataset = registry.get(&params.dataset)?;
        let mut session = Session::from_params(params, dataset)?;
        if session.question() != Some(question) {
            return Err(ServiceError::Integrity(format!("session {id}: first question differs on replay")));
        }
        for rec in iter {
            let LogRecord::Answered {
                step,
                question,
                y,
                next_question,
            } = rec
            else {
                return Err(ServiceError::Integrity(format!("session {id}: repeated creation record")));
            };
            if step != session.answered() + 1 || session.question() != Some(question) {
                return Err(ServiceError::Integrity(format!("session {id}: step {step} does not match replay")));
            }
            let next = session.answer(y)?;
            if next != next_question {
                return Err(ServiceError::Integrity(format!("session {id}: question after step {step} differs")));
            }
        }
        Ok(session)
    }

    /// Number of answers recorded in the log.
    pub fn answered(&self, id: &str) -> Result<usize, ServiceError> {
        Ok(self
            .read(id)?
            .iter()
            .filter(|r| matches!(r, LogRecord::Answered { .. }))
            .count())
    }
}
