use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Extract,
    Embed,
    Model,
    Regress,
}

impl JobKind {
    fn prefix(self) -> &'static str {
        match self {
            JobKind::Extract => "extract",
            JobKind::Embed => "embed",
            JobKind::Model => "model",
            JobKind::Regress => "regress",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub config_hash: String,
    /// Id of the produced artifact once done.
    pub artifact: Option<String>,
    pub error: Option<String>,
}

impl JobRecord {
    pub fn new(kind: JobKind, config_hash: &str) -> Self {
        Self {
            job_id: format!("{}-{}", kind.prefix(), &config_hash[..config_hash.len().min(16)]),
            kind,
            status: JobStatus::Queued,
            config_hash: config_hash.to_string(),
            artifact: None,
            error: None,
        }
    }
}

pub(crate) struct Jobs {
    table: Mutex<HashMap<String, JobRecord>>,
    permits: Arc<Semaphore>,
}

impl Jobs {
    pub fn new(workers: usize) -> Self {
        Self {
            table: Mutex::new(HashMap::new()),
            permits: Arc::new(Semaphore::new(workers)),
        }
    }

    pub fn get(&self, id: &str) -> Option<JobRecord> {
        self.table.lock().expect("job table").get(id).cloned()
    }

    /// Records a job whose artifact already exists.
    pub fn done(&self, mut record: JobRecord, artifact: String) -> JobRecord {
        record.status = JobStatus::Done;
        record.artifact = Some(artifact);
        record.error = None;
        self.table.lock().expect("job table").insert(record.job_id.clone(), record.clone());
        record
    }

    /// Queues `work` unless a job with the same id is queued, running or
    /// done, in which case that job is returned instead. Failed jobs are
    /// retried on resubmission.
    pub fn submit<F>(self: &Arc<Self>, record: JobRecord, work: F) -> JobRecord
    where
        F: FnOnce() -> Result<String, String> + Send + 'static,
    {
        {
            let mut table = self.table.lock().expect("job table");
            if let Some(existing) = table.get(&record.job_id) {
                if existing.status != JobStatus::Failed {
                    return existing.clone();
                }
            }
            table.insert(record.job_id.clone(), record.clone());
        }
        let jobs = Arc::clone(self);
        let id = record.job_id.clone();
        tokio::spawn(async move {
            let _permit = jobs.permits.clone().acquire_owned().await.expect("semaphore never closed");
            jobs.update(&id, |r| r.status = JobStatus::Running);
            let outcome = tokio::task::spawn_blocking(work)
                .await
                .unwrap_or_else(|e| Err(format!("job panicked: {e}")));
            jobs.update(&id, |r| match outcome {
                Ok(artifact) => {
                    r.status = JobStatus::Done;
                    r.artifact = Some(artifact);
                }
                Err(error) => {
                    tracing::warn!(job = %r.job_id, %error, "job failed");
                    r.status = JobStatus::Failed;
                    r.error = Some(error);
                }
            });
        });
        record
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut JobRecord)) {
        if let Some(r) = self.table.lock().expect("job table").get_mut(id) {
            f(r);
        }
    }
}
