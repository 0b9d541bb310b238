//! Report delivery sinks. Delivery is best-effort: a failed sink never fails
//! the run that produced the report.

use std::path::{Path, PathBuf};
use std::process::Stdio;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::io::AsyncWriteExt;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryRequest {
    pub run_id: String,
    pub recipient: String,
    pub report_path: PathBuf,
    pub subject: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryReceipt {
    pub sink: String,
    /// Where the copy landed: a file path or a mail transport id.
    pub location: String,
}

#[derive(Debug, thiserror::Error)]
pub enum DeliveryError {
    #[error("report file {0} does not exist")]
    MissingReport(PathBuf),
    #[error("recipient {0:?} is not usable as a mailbox")]
    BadRecipient(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("sink failed: {0}")]
    Sink(String),
}

#[async_trait]
pub trait ReportSink: Send + Sync {
    fn name(&self) -> &str;
    async fn deliver(&self, request: &DeliveryRequest) -> Result<DeliveryReceipt, DeliveryError>;
}

fn check_report(path: &Path) -> Result<(), DeliveryError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(DeliveryError::MissingReport(path.to_path_buf()))
    }
}

/// Copies reports to `<root>/delivered/<recipient>/<run_id>.html`.
#[derive(Debug, Clone)]
pub struct FileDropSink {
    root: PathBuf,
}

impl FileDropSink {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn target(&self, recipient: &str, run_id: &str) -> Result<PathBuf, DeliveryError> {
        let safe = |s: &str| !s.is_empty() && !s.contains(['/', '\\']) && s != "." && s != "..";
        if !safe(recipient) {
            return Err(DeliveryError::BadRecipient(recipient.to_string()));
        }
        if !safe(run_id) {
            return Err(DeliveryError::Sink(format!(
                "run id {run_id:?} is not a file name"
            )));
        }
        Ok(self
            .root
            .join("delivered")
            .join(recipient)
            .join(format!("{run_id}.html")))
    }
}

#[async_trait]
impl ReportSink for FileDropSink {
    fn name(&self) -> &str {
        "file-drop"
    }

    async fn deliver(&self, request: &DeliveryRequest) -> Result<DeliveryReceipt, DeliveryError> {
        check_report(&request.report_path)?;
        let target = self.target(&request.recipient, &request.run_id)?;
        if let Some(parent) = target.parent() {
            tokio::fs::create_dir_all(parent).await?;
        }
        tokio::fs::copy(&request.report_path, &target).await?;
        Ok(DeliveryReceipt {
            sink: self.name().to_string(),
            location: target.display().to_string(),
        })
    }
}

/// Hands the report to a local `sendmail`-compatible program as an HTML mail.
#[derive(Debug, Clone)]
pub struct SendmailSink {
    program: String,
    from: String,
}

impl SendmailSink {
    pub fn new(program: impl Into<String>, from: impl Into<String>) -> Self {
        Self {
            program: program.into(),
            from: from.into(),
        }
    }

    fn message(&self, request: &DeliveryRequest, html: &str) -> String {
        format!(
            "From: {}\r\nTo: {}\r\nSubject: {}\r\nMIME-Version: 1.0\r\nContent-Type: text/html; charset=utf-8\r\n\r\n{}",
            self.from, request.recipient, request.subject, html
        )
    }
}

#[async_trait]
impl ReportSink for SendmailSink {
    fn name(&self) -> &str {
        "sendmail"
    }

    async fn deliver(&self, request: &DeliveryRequest) -> Result<DeliveryReceipt, DeliveryError> {
        check_report(&request.report_path)?;
        if !crate::intake::is_valid_email(&request.recipient)
            || request.recipient.contains(['\r', '\n'])
        {
            return Err(DeliveryError::BadRecipient(request.recipient.clone()));
        }
        let html = tokio::fs::read_to_string(&request.report_path).await?;
        let mut child = tokio::process::Command::new(&self.program)
            .arg("-t")
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        stdin
            .write_all(self.message(request, &html).as_bytes())
            .await?;
        drop(stdin);
        let out = child.wait_with_output().await?;
        if !out.status.success() {
            return Err(DeliveryError::Sink(format!(
                "{} exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(DeliveryReceipt {
            sink: self.name().to_string(),
            location: format!("{} -> {}", self.program, request.recipient),
        })
    }
}
