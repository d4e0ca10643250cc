//! Client side of protocol v1.
//!
//! One reader thread owns the child's output and routes responses to the
//! waiting requests by id. Writes are serialised behind a mutex, so requests
//! can be submitted from several threads. At most `max_in_flight` requests
//! are outstanding; further submissions block until a response, timeout or
//! session failure frees a slot.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{GeneratorRequest, GeneratorResponse, LatentPayload, Message, RequestKind, INLINE_LIMIT_BYTES, PROTOCOL_VERSION};
use super::BridgeError;
use crate::latent::LatentSpec;
use crate::optim::{Objective, ObjectiveError};

pub const TIMEOUT_ENV: &str = "LS_GENERATOR_TIMEOUT_MS";
pub const DEFAULT_HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_REQUEST_TIMEOUT: Duration = Duration::from_secs(300);
pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;
pub const SHUTDOWN_GRACE: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOptions {
    pub handshake_timeout: Duration,
    pub request_timeout: Duration,
    pub max_in_flight: usize,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            handshake_timeout: DEFAULT_HANDSHAKE_TIMEOUT,
            request_timeout: DEFAULT_REQUEST_TIMEOUT,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

impl SessionOptions {
    /// Defaults, with both timeouts replaced by `LS_GENERATOR_TIMEOUT_MS` when set.
    pub fn from_env() -> Result<Self, BridgeError> {
        let mut opts = SessionOptions::default();
        if let Ok(raw) = std::env::var(TIMEOUT_ENV) {
            let ms: u64 = raw
                .trim()
                .parse()
                .map_err(|_| BridgeError::InvalidConfig(format!("{TIMEOUT_ENV} must be an integer, got {raw:?}")))?;
            opts.handshake_timeout = Duration::from_millis(ms);
            opts.request_timeout = Duration::from_millis(ms);
        }
        Ok(opts)
    }
}

type Reply = Result<GeneratorResponse, BridgeError>;

/// Id 0 is the handshake and holds no slot.
struct Shared {
    pending: HashMap<u64, Sender<Reply>>,
    failure: Option<BridgeError>,
    slots: Arc<Slots>,
}

impl Shared {
    fn take(&mut self, id: u64) -> Option<Sender<Reply>> {
        let tx = self.pending.remove(&id)?;
        if id != 0 {
            self.slots.release();
        }
        Some(tx)
    }

    fn fail(&mut self, err: BridgeError) {
        if self.failure.is_none() {
            self.failure = Some(err.clone());
        }
        for (id, tx) in self.pending.drain() {
            if id != 0 {
                self.slots.release();
            }
            let _ = tx.send(Err(err.clone()));
        }
    }
}

struct Slots {
    used: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl Slots {
    fn acquire(&self) {
        let mut used = self.used.lock().expect("slot lock");
        while *used >= self.limit {
            used = self.freed.wait(used).expect("slot lock");
        }
        *used += 1;
    }

    fn release(&self) {
        *self.used.lock().expect("slot lock") -= 1;
        self.freed.notify_one();
    }
}

pub struct Session {
    writer: Mutex<Option<Box<dyn Write + Send>>>,
    shared: Arc<Mutex<Shared>>,
    slots: Arc<Slots>,
    next_id: AtomicU64,
    spec: LatentSpec,
    options: SessionOptions,
    child: Option<Child>,
    spill_dir: Option<tempfile::TempDir>,
}

/// Completion handle for one submitted request.
pub struct Ticket {
    id: u64,
    rx: Receiver<Reply>,
    shared: Arc<Mutex<Shared>>,
    timeout: Duration,
    spill: Option<std::path::PathBuf>,
}

impl Ticket {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn wait(self) -> Result<GeneratorResponse, BridgeError> {
        match self.rx.recv_timeout(self.timeout) {
            Ok(reply) => reply,
            Err(RecvTimeoutError::Timeout) => {
                self.shared.lock().expect("session lock").take(self.id);
                Err(BridgeError::Timeout { id: self.id })
            }
            Err(RecvTimeoutError::Disconnected) => Err(BridgeError::Closed),
        }
    }
}

impl Drop for Ticket {
    fn drop(&mut self) {
        if let Some(path) = self.spill.take() {
            let _ = std::fs::remove_file(path);
        }
    }
}

impl Session {
    /// Start `command` (split with shell quoting rules, but not run through a shell).
    pub fn spawn(command: &str, spec: LatentSpec, options: SessionOptions) -> Result<Session, BridgeError> {
        let argv = shlex::split(command).ok_or_else(|| BridgeError::Spawn(format!("cannot parse command {command:?}")))?;
        let (program, args) = argv.split_first().ok_or_else(|| BridgeError::Spawn("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BridgeError::Spawn(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut session = Session::start(stdout, stdin, spec, options);
        session.child = Some(child);
        session.handshake()?;
        Ok(session)
    }

    /// Run the protocol over arbitrary streams, e.g. an in-process generator.
    pub fn connect<R, W>(reader: R, writer: W, spec: LatentSpec, options: SessionOptions) -> Result<Session, BridgeError>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let session = Session::start(reader, writer, spec, options);
        session.handshake()?;
        Ok(session)
    }

    fn start<R, W>(reader: R, writer: W, spec: LatentSpec, options: SessionOptions) -> Session
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let slots = Arc::new(Slots { used: Mutex::new(0), freed: Condvar::new(), limit: options.max_in_flight.max(1) });
        let shared = Arc::new(Mutex::new(Shared { pending: HashMap::new(), failure: None, slots: slots.clone() }));
        let session = Session {
            writer: Mutex::new(Some(Box::new(writer))),
            shared: shared.clone(),
            slots,
            next_id: AtomicU64::new(1),
            spec,
            options,
            child: None,
            spill_dir: tempfile::Builder::new().prefix("ls-latents-").tempdir().ok(),
        };
        thread::spawn(move || read_loop(BufReader::new(reader), shared));
        session
    }

    fn handshake(&self) -> Result<(), BridgeError> {
        // The hello reply is routed like a response with id 0.
        let (tx, rx) = mpsc::channel();
        self.shared.lock().expect("session lock").pending.insert(0, tx);
        self.send(&Message::Hello { protocol_version: PROTOCOL_VERSION, spec: Some(self.spec.clone()) })?;
        match rx.recv_timeout(self.options.handshake_timeout) {
            Ok(Ok(_)) => Ok(()),
            Ok(Err(e)) => Err(e),
            Err(_) => Err(BridgeError::HandshakeTimeout(self.options.handshake_timeout)),
        }
    }

    fn send(&self, msg: &Message) -> Result<(), BridgeError> {
        let mut guard = self.writer.lock().expect("writer lock");
        let w = guard.as_mut().ok_or(BridgeError::Closed)?;
        w.write_all(msg.to_line().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| BridgeError::Io(e.to_string()))
    }

    pub fn spec(&self) -> &LatentSpec {
        &self.spec
    }

    /// Queue a request; blocks while `max_in_flight` requests are outstanding.
    pub fn submit(&self, kind: RequestKind, latent: &[f64], meta: BTreeMap<String, String>) -> Result<Ticket, BridgeError> {
        if latent.len() != self.spec.total_dim() {
            return Err(BridgeError::Protocol(format!(
                "latent has {} coordinates, spec has {}",
                latent.len(),
                self.spec.total_dim()
            )));
        }
        self.slots.acquire();
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let (tx, rx) = mpsc::channel();
        let mut ticket = Ticket {
            id,
            rx,
            shared: self.shared.clone(),
            timeout: self.options.request_timeout,
            spill: None,
        };
        let payload = if 8 * latent.len() > INLINE_LIMIT_BYTES {
            let spilled = self.spill_path(id).and_then(|path| {
                let p = LatentPayload::file(latent, &path)?;
                ticket.spill = Some(path);
                Ok(p)
            });
            match spilled {
                Ok(p) => p,
                Err(e) => {
                    self.slots.release();
                    return Err(e);
                }
            }
        } else {
            LatentPayload::inline(latent)
        };
        {
            let mut shared = self.shared.lock().expect("session lock");
            if let Some(err) = &shared.failure {
                self.slots.release();
                return Err(err.clone());
            }
            shared.pending.insert(id, tx);
        }
        if let Err(e) = self.send(&Message::Request(GeneratorRequest { id, kind, latent: payload, meta })) {
            self.shared.lock().expect("session lock").take(id);
            return Err(e);
        }
        Ok(ticket)
    }

    fn spill_path(&self, id: u64) -> Result<std::path::PathBuf, BridgeError> {
        let dir = self
            .spill_dir
            .as_ref()
            .ok_or_else(|| BridgeError::Io("could not create a directory for large latents".into()))?;
        Ok(dir.path().join(format!("latent-{id}.f64")))
    }

    /// Submit and wait. Error responses become [`BridgeError::Generator`].
    pub fn request(&self, kind: RequestKind, latent: &[f64]) -> Result<GeneratorResponse, BridgeError> {
        let resp = self.submit(kind, latent, BTreeMap::new())?.wait()?;
        match resp.error {
            Some(e) => Err(BridgeError::Generator(e)),
            None => Ok(resp),
        }
    }

    pub fn score(&self, latent: &[f64]) -> Result<f64, BridgeError> {
        let resp = self.request(RequestKind::GenerateAndScore, latent)?;
        resp.score.ok_or_else(|| BridgeError::Protocol(format!("response {} has no score", resp.id)))
    }

    /// First fatal session error, if any.
    pub fn failure(&self) -> Option<BridgeError> {
        self.shared.lock().expect("session lock").failure.clone()
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.send(&Message::Shutdown);
        // Closing stdin lets well-behaved children exit on EOF too.
        self.writer.lock().expect("writer lock").take();
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + SHUTDOWN_GRACE;
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => break,
                    Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                    _ => {
                        let _ = child.kill();
                        let _ = child.wait();
                        break;
                    }
                }
            }
        }
    }
}

fn read_loop<R: BufRead>(mut reader: R, shared: Arc<Mutex<Shared>>) {
    let mut line = String::new();
    loop {
        line.clear();
        match reader.read_line(&mut line) {
            Ok(0) => {
                shared.lock().expect("session lock").fail(BridgeError::Closed);
                return;
            }
            Ok(_) if line.trim().is_empty() => continue,
            Ok(_) => {}
            Err(e) => {
                shared.lock().expect("session lock").fail(BridgeError::Io(e.to_string()));
                return;
            }
        }
        let outcome = Message::parse(&line).and_then(|msg| route(msg, &shared));
        if let Err(e) = outcome {
            shared.lock().expect("session lock").fail(e);
            return;
        }
    }
}

fn route(msg: Message, shared: &Mutex<Shared>) -> Result<(), BridgeError> {
    let mut shared = shared.lock().expect("session lock");
    match msg {
        Message::Hello { protocol_version, .. } => {
            let tx = shared.take(0).ok_or_else(|| BridgeError::Protocol("unexpected hello".into()))?;
            if protocol_version != PROTOCOL_VERSION {
                let err = BridgeError::VersionMismatch(protocol_version);
                let _ = tx.send(Err(err.clone()));
                return Err(err);
            }
            let _ = tx.send(Ok(GeneratorResponse { id: 0, object_handle: None, score: None, error: None }));
            Ok(())
        }
        Message::Response(resp) => {
            resp.validate()?;
            let tx = shared
                .take(resp.id)
                .ok_or_else(|| BridgeError::Protocol(format!("response for unknown id {}", resp.id)))?;
            let _ = tx.send(Ok(resp));
            Ok(())
        }
        Message::Error { id: Some(id), message } if id != 0 => {
            let tx = shared
                .take(id)
                .ok_or_else(|| BridgeError::Protocol(format!("error for unknown id {id}")))?;
            let _ = tx.send(Ok(GeneratorResponse { id, object_handle: None, score: None, error: Some(message) }));
            Ok(())
        }
        Message::Error { message, .. } => Err(BridgeError::Generator(message)),
        Message::Request(_) | Message::Shutdown => Err(BridgeError::Protocol("generator sent a client message".into())),
    }
}

/// Objective on latents backed by a session (`generate_and_score`).
pub struct ExternalObjective {
    session: Session,
}

impl ExternalObjective {
    pub fn new(session: Session) -> Self {
        ExternalObjective { session }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }
}

impl Objective for ExternalObjective {
    fn evaluate(&mut self, point: &[f64]) -> Result<f64, ObjectiveError> {
        self.session.score(point).map_err(|e| ObjectiveError(e.to_string()))
    }
}
