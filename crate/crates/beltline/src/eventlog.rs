//! JSON Lines event log: one inspected object per line, closed by a
//! `run_end` trailer that lets a replay reproduce the run summary exactly.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::mpsc;
use std::thread;

use beltline_core::metrics::{summarize, LogRecord, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("log write failed: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Serialises one record as a newline-terminated line.
pub fn to_line(record: &LogRecord) -> String {
    let mut line = serde_json::to_string(record).expect("log records always serialise");
    line.push('\n');
    line
}

/// Append-only sink. Each record goes out in a single write followed by a
/// flush, so a crash leaves at most one torn final line. Records whose
/// write failed are kept in memory for [`EventLog::retry`].
pub struct EventLog<W: Write> {
    sink: W,
    retained: Vec<LogRecord>,
    written: u64,
}

impl EventLog<File> {
    /// Opens `path` for appending, creating it if needed.
    pub fn append_to(path: &Path) -> io::Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self::new(f))
    }

    /// Creates or truncates `path`.
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(Self::new(File::create(path)?))
    }
}

impl<W: Write> EventLog<W> {
    pub fn new(sink: W) -> Self {
        Self {
            sink,
            retained: Vec::new(),
            written: 0,
        }
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), LogError> {
        if !self.retained.is_empty() {
            // Keep line order: nothing new goes out before the backlog.
            self.retained.push(record.clone());
            return self.retry();
        }
        match self.write_one(record) {
            Ok(()) => Ok(()),
            Err(e) => {
                self.retained.push(record.clone());
                Err(e.into())
            }
        }
    }

    fn write_one(&mut self, record: &LogRecord) -> io::Result<()> {
        self.sink.write_all(to_line(record).as_bytes())?;
        self.sink.flush()?;
        self.written += 1;
        Ok(())
    }

    /// Tries to write the records kept from earlier failures.
    pub fn retry(&mut self) -> Result<(), LogError> {
        while let Some(r) = self.retained.first().cloned() {
            self.write_one(&r)?;
            self.retained.remove(0);
        }
        Ok(())
    }

    pub fn retained(&self) -> &[LogRecord] {
        &self.retained
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

/// Parses a whole log. Blank lines are ignored.
pub fn parse_log(reader: impl BufRead) -> Result<Vec<LogRecord>, LogError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| LogError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, LogError> {
    parse_log(BufReader::new(File::open(path)?))
}

/// Recomputes the summary of the last run in a saved log.
pub fn replay(path: &Path) -> Result<RunSummary, LogError> {
    Ok(summarize(&read_log(path)?))
}

/// Log writer on its own thread, so the simulation loop never waits on
/// disk I/O. Sending never blocks.
pub struct BackgroundLog {
    tx: Option<mpsc::Sender<LogRecord>>,
    worker: Option<thread::JoinHandle<Vec<LogRecord>>>,
}

impl BackgroundLog {
    pub fn spawn<W: Write + Send + 'static>(mut log: EventLog<W>) -> Self {
        let (tx, rx) = mpsc::channel::<LogRecord>();
        let worker = thread::Builder::new()
            .name("event-log".into())
            .spawn(move || {
                for rec in rx {
                    if let Err(e) = log.append(&rec) {
                        tracing::warn!("event log: {e}; {} record(s) held in memory", log.retained().len());
                    }
                }
                let _ = log.retry();
                log.retained().to_vec()
            })
            .expect("spawn log thread");
        Self {
            tx: Some(tx),
            worker: Some(worker),
        }
    }

    pub fn send(&self, record: LogRecord) {
        if let Some(tx) = &self.tx {
            let _ = tx.send(record);
        }
    }

    /// Flushes and stops the writer; returns records that could not be
    /// written.
    pub fn close(mut self) -> Vec<LogRecord> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> Vec<LogRecord> {
        self.tx.take();
        self.worker
            .take()
            .and_then(|w| w.join().ok())
            .unwrap_or_default()
    }
}

impl Drop for BackgroundLog {
    fn drop(&mut self) {
        self.shutdown();
    }
}
