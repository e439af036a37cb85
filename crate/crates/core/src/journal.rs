//! Append-only JSON-lines record of client-made changes, replayed at
//! startup so created attributes, joins and predictors survive restarts.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::value::Value;

// Events are written or replayed one at a time, so variant size is moot.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "camelCase")]
pub enum Event {
    #[serde(rename_all = "camelCase")]
    AttributeCreated {
        uri: String,
        relation: String,
        definition: Value,
        description: Option<String>,
    },
    AttributeDeleted {
        uri: String,
    },
    JoinCreated {
        uri: String,
        description: Option<String>,
    },
    JoinDeleted {
        uri: String,
    },
    #[serde(rename_all = "camelCase")]
    PredictorCreated {
        uri: String,
        learner_kind: String,
        description: String,
        accepts: Value,
        emits: Value,
        update_schema: Option<Value>,
        provenance: Value,
        model: Value,
    },
    PredictorUpdated {
        uri: String,
        provenance: Value,
        model: Value,
    },
    PredictorDeleted {
        uri: String,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum JournalError {
    #[error("journal {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("journal {path}, line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    /// Opens (creating if needed) the journal and returns the events it
    /// already holds. A torn final line is skipped.
    pub fn open(path: &Path) -> Result<(Journal, Vec<Event>), JournalError> {
        let io = |source| JournalError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let mut events = Vec::new();
        if path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(path).map_err(io)?)
                .lines()
                .collect::<Result<_, _>>()
                .map_err(io)?;
            let last = lines.len();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Event>(line) {
                    Ok(e) => events.push(e),
                    Err(e) if i + 1 == last => {
                        tracing::warn!(path = %path.display(), error = %e, "ignoring torn journal tail");
                    }
                    Err(e) => {
                        return Err(JournalError::Corrupt {
                            path: path.to_path_buf(),
                            line: i + 1,
                            message: e.to_string(),
                        })
                    }
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        Ok((
            Journal {
                path: path.to_path_buf(),
                file,
            },
            events,
        ))
    }

    pub fn append(&mut self, event: &Event) -> Result<(), JournalError> {
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|source| JournalError::Io {
                path: self.path.clone(),
                source,
            })
    }
}
