//! JSON Lines trace files.
//!
//! The first line is the header `{"format":"synthuser-trace","version":1}`;
//! every further line is one [`ActionEvent`]. Each append is flushed before
//! it returns, so a crash loses at most the line being written and any prefix
//! of complete lines still loads.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use synthuser_core::trace::{
    IntegrityError, SequenceError, SequenceGuard, TraceAssembler, TRACE_FORMAT, TRACE_VERSION,
};
use synthuser_core::tracker::EventSink;
use synthuser_core::{ActionEvent, Trace};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
}

impl TraceHeader {
    pub fn current() -> Self {
        Self {
            format: TRACE_FORMAT.to_string(),
            version: TRACE_VERSION,
        }
    }
}

#[derive(Debug, Error)]
pub enum AppendError {
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error("trace write failed: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("reading trace: {0}")]
    Io(#[from] io::Error),
    #[error("trace file is empty: missing header line")]
    MissingHeader,
    #[error("line 1: bad header: {0}")]
    BadHeader(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Integrity(#[from] IntegrityError),
}

/// Append-only writer that enforces per-session seq order.
#[derive(Debug)]
pub struct TraceWriter<W: Write> {
    out: W,
    guard: SequenceGuard,
}

impl<W: Write> TraceWriter<W> {
    /// Starts a new trace stream by writing the header line.
    pub fn new(mut out: W) -> io::Result<Self> {
        serde_json::to_writer(&mut out, &TraceHeader::current())?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(Self {
            out,
            guard: SequenceGuard::new(),
        })
    }

    /// Continues a stream whose header and events were already written.
    pub fn resume(out: W, guard: SequenceGuard) -> Self {
        Self { out, guard }
    }

    /// Seq the next event of `session` must carry.
    pub fn next_seq(&self, session: &str) -> u64 {
        self.guard.expected(session)
    }

    pub fn append(&mut self, event: &ActionEvent) -> Result<(), AppendError> {
        self.guard.check(event)?;
        let mut line = serde_json::to_vec(event).map_err(io::Error::from)?;
        line.push(b'\n');
        self.out.write_all(&line)?;
        self.out.flush()?;
        self.guard.commit(event);
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl TraceWriter<File> {
    /// Opens `path` for appending, writing the header if the file is new or
    /// empty and otherwise picking up the seq counters of what it holds.
    pub fn open_append(path: &Path) -> Result<Self, LoadError> {
        let existing = path.metadata().map(|m| m.len() > 0).unwrap_or(false);
        if !existing {
            let file = File::create(path)?;
            return Ok(Self::new(file)?);
        }
        let traces = load_trace_file(path)?;
        let mut guard = SequenceGuard::new();
        for e in traces.iter().filter_map(|t| t.events.last()) {
            guard.commit(e);
        }
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self::resume(file, guard))
    }
}

type BoxedWriter = TraceWriter<Box<dyn Write + Send>>;

/// A trace writer shared by many tracked sessions; appends are serialized.
#[derive(Clone)]
pub struct SharedTraceLog {
    inner: Arc<Mutex<BoxedWriter>>,
}

impl SharedTraceLog {
    pub fn new<W: Write + Send + 'static>(writer: TraceWriter<W>) -> Self {
        let TraceWriter { out, guard } = writer;
        Self {
            inner: Arc::new(Mutex::new(TraceWriter::resume(Box::new(out), guard))),
        }
    }

    pub fn open(path: &Path) -> Result<Self, LoadError> {
        Ok(Self::new(TraceWriter::open_append(path)?))
    }

    /// Writes an event after stamping it with the session's next seq.
    pub fn append_next(&self, mut event: ActionEvent) -> Result<ActionEvent, AppendError> {
        let mut w = self.lock();
        event.seq = w.next_seq(&event.session);
        w.append(&event)?;
        Ok(event)
    }

    pub fn next_seq(&self, session: &str) -> u64 {
        self.lock().next_seq(session)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, BoxedWriter> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl EventSink for SharedTraceLog {
    type Error = AppendError;

    fn append(&mut self, event: &ActionEvent) -> Result<(), AppendError> {
        self.lock().append(event)
    }
}

/// Parses a trace stream and groups it into per-session traces.
pub fn load_traces<R: BufRead>(reader: R) -> Result<Vec<Trace>, LoadError> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            None => return Err(LoadError::MissingHeader),
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
        }
    };
    let header: TraceHeader = serde_json::from_str(&header).map_err(|e| LoadError::BadHeader(e.to_string()))?;
    if header.format != TRACE_FORMAT {
        return Err(LoadError::BadHeader(format!("unknown format `{}`", header.format)));
    }
    if header.version != TRACE_VERSION {
        return Err(LoadError::BadHeader(format!("unsupported version {}", header.version)));
    }
    let mut assembler = TraceAssembler::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: ActionEvent = serde_json::from_str(&line).map_err(|e| LoadError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        assembler.push(i + 1, event);
    }
    Ok(assembler.finish()?)
}

pub fn load_trace_file(path: &Path) -> Result<Vec<Trace>, LoadError> {
    load_traces(BufReader::new(File::open(path)?))
}

/// Writes whole traces to a fresh stream.
pub fn write_traces<W: Write>(out: W, traces: &[Trace]) -> Result<W, AppendError> {
    let mut w = TraceWriter::new(out)?;
    for e in traces.iter().flat_map(|t| &t.events) {
        w.append(e)?;
    }
    Ok(w.into_inner())
}
