//! In-process run store. Every write is appended to a JSONL journal before it
//! becomes visible to readers.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use diligence_core::engine::NodeStatus;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunId(pub String);

impl RunId {
    pub fn generate() -> Self {
        Self(format!("run-{}", uuid::Uuid::new_v4().simple()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RunId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RunState {
    Queued,
    Running,
    Succeeded,
    Failed,
}

impl RunState {
    fn rank(self) -> u8 {
        match self {
            RunState::Queued => 0,
            RunState::Running => 1,
            RunState::Succeeded | RunState::Failed => 2,
        }
    }

    pub fn is_terminal(self) -> bool {
        self.rank() == 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: RunId,
    pub company_id: String,
    pub requested_by: String,
    pub state: RunState,
    pub node_statuses: BTreeMap<String, NodeStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_path: Option<PathBuf>,
    /// The report exists but the delivery sink did not accept it.
    #[serde(default)]
    pub undelivered: bool,
}

impl RunRecord {
    pub fn queued(run_id: RunId, company_id: &str, requested_by: &str) -> Self {
        Self {
            run_id,
            company_id: company_id.to_string(),
            requested_by: requested_by.to_string(),
            state: RunState::Queued,
            node_statuses: BTreeMap::new(),
            report_path: None,
            undelivered: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("run {0} already exists")]
    Duplicate(RunId),
    #[error("run {0} not found")]
    NotFound(RunId),
    #[error("run {run}: illegal transition {from:?} -> {to:?}")]
    Transition {
        run: RunId,
        from: RunState,
        to: RunState,
    },
    #[error("run {0}: report_path must be set exactly when the run succeeded")]
    ReportPath(RunId),
    #[error("journal {0}: {1}")]
    Journal(PathBuf, std::io::Error),
}

#[derive(Serialize)]
struct JournalEntry<'a> {
    seq: u64,
    record: &'a RunRecord,
}

struct Journal {
    file: Option<(PathBuf, File)>,
    seq: u64,
}

pub struct RunStore {
    records: RwLock<BTreeMap<RunId, RunRecord>>,
    journal: Mutex<Journal>,
}

impl RunStore {
    /// A store without a journal file.
    pub fn in_memory() -> Self {
        Self {
            records: RwLock::new(BTreeMap::new()),
            journal: Mutex::new(Journal { file: None, seq: 0 }),
        }
    }

    /// A store appending to `path`; existing journal contents are kept.
    pub fn with_journal(path: &Path) -> Result<Self, StoreError> {
        let fail = |e| StoreError::Journal(path.to_path_buf(), e);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(fail)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(fail)?;
        Ok(Self {
            records: RwLock::new(BTreeMap::new()),
            journal: Mutex::new(Journal {
                file: Some((path.to_path_buf(), file)),
                seq: 0,
            }),
        })
    }

    pub fn insert(&self, record: RunRecord) -> Result<(), StoreError> {
        let mut journal = self.journal.lock().expect("journal lock");
        if self.get(&record.run_id).is_some() {
            return Err(StoreError::Duplicate(record.run_id));
        }
        Self::append(&mut journal, &record)?;
        self.records
            .write()
            .expect("store lock")
            .insert(record.run_id.clone(), record);
        Ok(())
    }

    /// Applies `change` to a copy of the record, checks the lifecycle rules,
    /// journals the result and only then publishes it.
    pub fn update(
        &self,
        run_id: &RunId,
        change: impl FnOnce(&mut RunRecord),
    ) -> Result<RunRecord, StoreError> {
        let mut journal = self.journal.lock().expect("journal lock");
        let current = self
            .get(run_id)
            .ok_or_else(|| StoreError::NotFound(run_id.clone()))?;
        let mut next = current.clone();
        change(&mut next);
        next.run_id = current.run_id.clone();
        let legal = next.state.rank() > current.state.rank()
            || (next.state == current.state && !current.state.is_terminal());
        if !legal {
            return Err(StoreError::Transition {
                run: run_id.clone(),
                from: current.state,
                to: next.state,
            });
        }
        if next.report_path.is_some() != (next.state == RunState::Succeeded) {
            return Err(StoreError::ReportPath(run_id.clone()));
        }
        if next == current {
            return Ok(next);
        }
        Self::append(&mut journal, &next)?;
        self.records
            .write()
            .expect("store lock")
            .insert(run_id.clone(), next.clone());
        Ok(next)
    }

    pub fn get(&self, run_id: &RunId) -> Option<RunRecord> {
        self.records
            .read()
            .expect("store lock")
            .get(run_id)
            .cloned()
    }

    pub fn list(&self) -> Vec<RunRecord> {
        self.records
            .read()
            .expect("store lock")
            .values()
            .cloned()
            .collect()
    }

    fn append(journal: &mut Journal, record: &RunRecord) -> Result<(), StoreError> {
        journal.seq += 1;
        let seq = journal.seq;
        if let Some((path, file)) = journal.file.as_mut() {
            let line =
                serde_json::to_string(&JournalEntry { seq, record }).expect("record serializes");
            writeln!(file, "{line}").map_err(|e| StoreError::Journal(path.clone(), e))?;
        }
        Ok(())
    }
}
