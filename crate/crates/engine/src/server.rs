//! Live pose ingestion over TCP.
//!
//! Wire protocol: the client streams pose JSONL records (the [`crate::pose`]
//! format); the server feeds them to a fresh session and writes every
//! resulting [`SessionEvent`] back as one JSONL line, flushed immediately.
//! One exercise session per connection; concurrent connections run
//! independent sessions. A malformed inbound line produces one
//! `{"error":"..."}` line and the session continues (strict mode closes the
//! connection instead). When the level completes, the client disconnects,
//! or the idle timeout expires, the session directory is written under
//! `sessions_dir` and the connection closes.
//!
//! The event stream over the wire is identical to an offline replay of the
//! same samples; nothing wall-clock-dependent is emitted.

use crate::calibration::CalibrationProfile;
use crate::level::LevelSpec;
use crate::pose::PoseSample;
use crate::session::Session;
use crate::store::{save_session, SessionParams, SessionRecord, StoreError};
use serde::Serialize;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct StreamConfig {
    /// Bind address, e.g. `127.0.0.1:7878` (port 0 picks a free port).
    pub bind: String,
    pub profile: CalibrationProfile,
    pub level: LevelSpec,
    pub params: SessionParams,
    /// Close idle connections after this long, finishing the session as
    /// incomplete.
    pub idle_timeout_s: f64,
    /// Where completed/aborted session directories are written.
    pub sessions_dir: PathBuf,
    /// Close the connection on the first malformed line instead of
    /// continuing.
    pub strict: bool,
}

impl StreamConfig {
    pub fn new(bind: impl Into<String>, profile: CalibrationProfile, level: LevelSpec) -> Self {
        StreamConfig {
            bind: bind.into(),
            profile,
            level,
            params: SessionParams::default(),
            idle_timeout_s: 30.0,
            sessions_dir: PathBuf::from("sessions"),
            strict: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] crate::session::ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
}

/// A bound, validated server. `run` blocks; use [`StreamServer::spawn`] to
/// drive it from a background thread with a shutdown handle.
pub struct StreamServer {
    listener: TcpListener,
    local_addr: SocketAddr,
    shared: Arc<Shared>,
}

struct Shared {
    config: StreamConfig,
    shutdown: AtomicBool,
    session_counter: AtomicU64,
}

/// Stops a spawned server and joins its accept loop.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    join: Option<std::thread::JoinHandle<Result<(), ServeError>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) -> Result<(), ServeError> {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        // unblock accept()
        let _ = TcpStream::connect(self.addr);
        match self.join.take() {
            Some(join) => join.join().expect("server thread panicked"),
            None => Ok(()),
        }
    }
}

impl StreamServer {
    /// Binds and validates the configuration; the session setup must be
    /// constructible before any connection is accepted.
    pub fn bind(config: StreamConfig) -> Result<StreamServer, ServeError> {
        // fail now, not on first connection
        Session::new(
            config.profile.clone(),
            config.level.clone(),
            config.params.engine,
            config.params.guard.clone(),
        )?;
        let listener = TcpListener::bind(&config.bind).map_err(|source| ServeError::Bind {
            addr: config.bind.clone(),
            source,
        })?;
        let local_addr = listener.local_addr()?;
        Ok(StreamServer {
            listener,
            local_addr,
            shared: Arc::new(Shared {
                config,
                shutdown: AtomicBool::new(false),
                session_counter: AtomicU64::new(0),
            }),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Accept loop; returns after [`ServerHandle::shutdown`].
    pub fn run(self) -> Result<(), ServeError> {
        let mut workers = Vec::new();
        for incoming in self.listener.incoming() {
            if self.shared.shutdown.load(Ordering::SeqCst) {
                break;
            }
            match incoming {
                Ok(stream) => {
                    let shared = Arc::clone(&self.shared);
                    workers.push(std::thread::spawn(move || {
                        let _ = handle_connection(stream, &shared);
                    }));
                }
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            }
        }
        for worker in workers {
            let _ = worker.join();
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> ServerHandle {
        let addr = self.local_addr;
        let shared = Arc::clone(&self.shared);
        let join = std::thread::spawn(move || self.run());
        ServerHandle {
            addr,
            shared,
            join: Some(join),
        }
    }
}

fn next_session_id(shared: &Shared) -> String {
    let n = shared.session_counter.fetch_add(1, Ordering::SeqCst) + 1;
    format!("session-{}-{n:04}", chrono::Utc::now().timestamp_millis())
}

fn handle_connection(stream: TcpStream, shared: &Shared) -> Result<(), ServeError> {
    let config = &shared.config;
    if config.idle_timeout_s > 0.0 {
        stream.set_read_timeout(Some(Duration::from_secs_f64(config.idle_timeout_s)))?;
    }
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);

    let mut session = Session::new(
        config.profile.clone(),
        config.level.clone(),
        config.params.engine,
        config.params.guard.clone(),
    )?;

    let mut line = String::new();
    loop {
        line.clear();
        match reader.read_line(&mut line) {
            Ok(0) => break, // client closed
            Ok(_) => {
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    continue;
                }
                let outcome = PoseSample::parse(trimmed)
                    .map_err(|e| e.to_string())
                    .and_then(|sample| session.ingest(&sample).map_err(|e| e.to_string()));
                match outcome {
                    Ok(events) => {
                        for event in &events {
                            // flush per event: feedback must be immediate
                            if writeln!(writer, "{}", event.to_jsonl()).is_err()
                                || writer.flush().is_err()
                            {
                                break;
                            }
                        }
                        if session.is_completed() {
                            break;
                        }
                    }
                    Err(message) => {
                        let _ = writeln!(
                            writer,
                            "{}",
                            serde_json::to_string(&ErrorLine { error: &message })
                                .expect("error line serializes")
                        );
                        let _ = writer.flush();
                        if config.strict {
                            break;
                        }
                    }
                }
            }
            Err(e)
                if e.kind() == ErrorKind::WouldBlock || e.kind() == ErrorKind::TimedOut =>
            {
                break; // idle: finish as incomplete
            }
            Err(_) => break, // connection dropped
        }
    }

    let events = session.events().to_vec();
    let summary = session.finish();
    let record = SessionRecord::new(
        config.profile.clone(),
        config.level.clone(),
        config.params.clone(),
        events,
        summary,
    );
    let dir = config.sessions_dir.join(next_session_id(shared));
    save_session(&dir, &record)?;
    Ok(())
}
