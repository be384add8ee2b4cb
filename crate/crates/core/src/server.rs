//! Live session server.
//!
//! Sensor and replay feeds send datagrams; the UI holds a stream
//! connection carrying the same records one per line, and may also send
//! inputs over it. Each transport has its own receiving thread, a single
//! session task owns all session state, and a writer thread appends the
//! log. They talk only through channels.
//!
//! Incoming records are restamped with the server clock (ms since start).
//! Heartbeats are logged, so they also advance the coach while no other
//! input arrives.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::affect::AffectFrame;
use crate::coach::Phase;
use crate::error::{Error, Result};
use crate::scoring::SessionMetrics;
use crate::session::SessionCore;
use crate::wire::log::LogWriter;
use crate::wire::{decode, encode, AppConfig, Payload, SessionCtrl, WireMessage};

const POLL: Duration = Duration::from_millis(20);
const CLIENT_WRITE_TIMEOUT: Duration = Duration::from_millis(100);
pub const DEFAULT_LOG_PATH: &str = "session.ndjson";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    Udp(SocketAddr),
    Tcp(u64),
}

enum Inbound {
    Msg(WireMessage, Origin),
    Connected(u64, TcpStream),
    Gone(u64),
}

#[derive(Debug, Clone)]
pub struct ServerOutcome {
    pub aborted: bool,
    pub final_phase: Phase,
    pub metrics: Vec<SessionMetrics>,
    pub records: usize,
    /// Decoded inputs the session refused.
    pub rejected: usize,
    pub log_path: PathBuf,
}

pub struct Server {
    cfg: AppConfig,
    udp: UdpSocket,
    tcp: TcpListener,
    log_path: PathBuf,
}

fn bind_err(what: &str, addr: &str, e: std::io::Error) -> Error {
    Error::Io(format!("cannot bind {what} {addr}: {e}"))
}

impl Server {
    /// Validates the config, loads the stress model and binds both ports.
    pub fn bind(cfg: AppConfig) -> Result<Self> {
        cfg.validate()?;
        cfg.load_model()?;
        let n = &cfg.network;
        let udp_addr = format!("{}:{}", n.bind, n.udp_port);
        let tcp_addr = format!("{}:{}", n.bind, n.tcp_port);
        let udp = UdpSocket::bind(&udp_addr).map_err(|e| bind_err("udp", &udp_addr, e))?;
        let tcp = TcpListener::bind(&tcp_addr).map_err(|e| bind_err("tcp", &tcp_addr, e))?;
        let log_path = cfg
            .log_path
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_LOG_PATH));
        Ok(Server {
            cfg,
            udp,
            tcp,
            log_path,
        })
    }

    pub fn udp_addr(&self) -> SocketAddr {
        self.udp.local_addr().expect("bound socket has an address")
    }

    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp
            .local_addr()
            .expect("bound listener has an address")
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    /// Serves until the session is aborted or done.
    pub fn run(self) -> Result<ServerOutcome> {
        let file = std::fs::File::create(&self.log_path)
            .map_err(|e| Error::Io(format!("{}: {e}", self.log_path.display())))?;
        let stop = Arc::new(AtomicBool::new(false));
        let (tx, rx) = mpsc::channel();
        let udp_reply = self.udp.try_clone()?;
        let threads = vec![
            spawn_udp(self.udp, tx.clone(), stop.clone())?,
            spawn_acceptor(self.tcp, tx, stop.clone())?,
        ];
        let (log_tx, log_rx) = mpsc::channel::<WireMessage>();
        let writer = thread::spawn(move || write_log(file, log_rx));

        let log_path = self.log_path;
        let result = SessionTask::new(&self.cfg, udp_reply, log_tx).and_then(|t| t.run(rx));
        stop.store(true, Ordering::SeqCst);
        for t in threads {
            let _ = t.join();
        }
        let records = writer
            .join()
            .map_err(|_| Error::Io("log writer panicked".into()))??;
        let mut out = result?;
        out.records = records;
        out.log_path = log_path;
        Ok(out)
    }
}

fn spawn_udp(
    sock: UdpSocket,
    tx: Sender<Inbound>,
    stop: Arc<AtomicBool>,
) -> Result<JoinHandle<()>> {
    sock.set_read_timeout(Some(POLL))?;
    Ok(thread::spawn(move || {
        // larger than any valid record so oversize datagrams are seen whole
        let mut buf = vec![0u8; 65_536];
        while !stop.load(Ordering::SeqCst) {
            match sock.recv_from(&mut buf) {
                Ok((n, from)) => match decode(&buf[..n]) {
                    Ok(msg) => {
                        if tx.send(Inbound::Msg(msg, Origin::Udp(from))).is_err() {
                            return;
                        }
                    }
                    Err(e) => log::warn!("datagram from {from} dropped: {e}"),
                },
                Err(e)
                    if matches!(
                        e.kind(),
                        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                    ) => {}
                Err(e) => log::warn!("udp receive failed: {e}"),
            }
        }
    }))
}

fn spawn_acceptor(
    listener: TcpListener,
    tx: Sender<Inbound>,
    stop: Arc<AtomicBool>,
) -> Result<JoinHandle<()>> {
    listener.set_nonblocking(true)?;
    Ok(thread::spawn(move || {
        let mut next_id = 0u64;
        while !stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    next_id += 1;
                    let id = next_id;
                    log::info!("ui client {id} connected from {peer}");
                    let reader = match stream
                        .set_nonblocking(false)
                        .and_then(|_| stream.try_clone())
                    {
                        Ok(r) => r,
                        Err(e) => {
                            log::warn!("client {id}: {e}");
                            continue;
                        }
                    };
                    if tx.send(Inbound::Connected(id, stream)).is_err() {
                        return;
                    }
                    let tx = tx.clone();
                    thread::spawn(move || read_client(id, reader, tx));
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    }))
}

/// Reads lines until the peer or the session task closes the stream.
fn read_client(id: u64, stream: TcpStream, tx: Sender<Inbound>) {
    let mut reader = BufReader::new(stream);
    let mut line = Vec::new();
    loop {
        line.clear();
        match reader.read_until(b'\n', &mut line) {
            Ok(0) | Err(_) => break,
            Ok(_) => match decode(&line) {
                Ok(msg) => {
                    if tx.send(Inbound::Msg(msg, Origin::Tcp(id))).is_err() {
                        return;
                    }
                }
                Err(e) => log::warn!("client {id} line dropped: {e}"),
            },
        }
    }
    let _ = tx.send(Inbound::Gone(id));
}

fn write_log(file: std::fs::File, rx: Receiver<WireMessage>) -> Result<usize> {
    let mut w = LogWriter::new(BufWriter::new(file));
    for msg in rx {
        match w.append(&msg) {
            Ok(()) => {}
            Err(e @ Error::Io(_)) => return Err(e),
            Err(e) => log::warn!("{} record not logged: {e}", msg.type_name()),
        }
    }
    w.flush()?;
    Ok(w.records())
}

/// Outward record types; HANDLE and FRAME are inputs and stay in the log.
fn is_outward(msg: &WireMessage) -> bool {
    !matches!(msg.payload, Payload::Handle(_) | Payload::Frame(_))
}

struct SessionTask {
    core: SessionCore,
    start: Instant,
    heartbeat: Duration,
    udp: UdpSocket,
    log: Sender<WireMessage>,
    clients: BTreeMap<u64, TcpStream>,
    /// Outward records except FORCE, resent to a client on connect so a
    /// reopened UI can rebuild its view.
    history: Vec<String>,
    rejected: usize,
}

impl SessionTask {
    fn new(cfg: &AppConfig, udp: UdpSocket, log: Sender<WireMessage>) -> Result<Self> {
        let mut core = SessionCore::new(cfg.setup(), cfg.thresholds, cfg.gaze)?;
        core.ctrl(0, SessionCtrl::Config(Box::new(cfg.setup())))?;
        let mut t = SessionTask {
            core,
            start: Instant::now(),
            heartbeat: Duration::from_millis(cfg.network.heartbeat_ms),
            udp,
            log,
            clients: BTreeMap::new(),
            history: Vec::new(),
            rejected: 0,
        };
        t.publish(None)?;
        Ok(t)
    }

    fn now_ms(&self) -> u64 {
        (self.start.elapsed().as_millis() as u64).max(self.core.now_ms())
    }

    fn run(mut self, rx: Receiver<Inbound>) -> Result<ServerOutcome> {
        let mut next_beat = self.heartbeat;
        while !self.core.aborted() && self.core.phase() != Phase::Done {
            let wait = next_beat.saturating_sub(self.start.elapsed());
            match rx.recv_timeout(wait) {
                Ok(Inbound::Msg(msg, origin)) => self.ingest(msg, origin)?,
                Ok(Inbound::Connected(id, stream)) => self.connect(id, stream),
                Ok(Inbound::Gone(id)) => {
                    self.clients.remove(&id);
                    log::info!("ui client {id} disconnected");
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Io("receivers stopped".into()))
                }
            }
            if self.start.elapsed() >= next_beat {
                let ts = self.now_ms();
                self.core.heartbeat(ts)?;
                self.publish(None)?;
                next_beat += self.heartbeat;
            }
        }
        for s in self.clients.values() {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
        Ok(ServerOutcome {
            aborted: self.core.aborted(),
            final_phase: self.core.phase(),
            metrics: self.core.completed().to_vec(),
            records: 0,
            rejected: self.rejected,
            log_path: PathBuf::new(),
        })
    }

    fn connect(&mut self, id: u64, mut stream: TcpStream) {
        let _ = stream.set_write_timeout(Some(CLIENT_WRITE_TIMEOUT));
        let _ = stream.set_nodelay(true);
        let backlog: String = self.history.concat();
        if stream.write_all(backlog.as_bytes()).is_ok() {
            self.clients.insert(id, stream);
        }
    }

    fn ingest(&mut self, msg: WireMessage, origin: Origin) -> Result<()> {
        let ts = self.now_ms();
        let res = match msg.payload {
            Payload::Hello { role } => {
                log::info!("hello from {role} ({origin:?})");
                let reply = encode(&WireMessage::new(
                    ts,
                    Payload::Hello {
                        role: "server".into(),
                    },
                ))?;
                self.send(origin, &reply);
                Ok(())
            }
            Payload::Frame(f) => self.core.frame(AffectFrame { t_ms: ts, ..f }),
            Payload::Handle(h) => self.core.handle(ts, h).map(|_| ()),
            Payload::Event(e) => self
                .core
                .event(crate::affect::AffectEvent { onset_ms: ts, ..e }),
            Payload::SessionCtrl(c) => self.core.ctrl(ts, c),
            other => Err(Error::Protocol(format!(
                "{} records are produced by the server, not accepted by it",
                WireMessage::new(ts, other).type_name()
            ))),
        };
        match res {
            Ok(()) => {}
            Err(
                e @ (Error::Protocol(_)
                | Error::Input(_)
                | Error::Spec(_)
                | Error::InsufficientData(_)),
            ) => {
                self.rejected += 1;
                log::warn!("input refused: {e}");
            }
            Err(e) => return Err(e),
        }
        self.publish(Some(origin))
    }

    fn send(&mut self, origin: Origin, line: &str) {
        match origin {
            Origin::Udp(addr) => {
                if let Err(e) = self.udp.send_to(line.as_bytes(), addr) {
                    log::warn!("reply to {addr} failed: {e}");
                }
            }
            Origin::Tcp(id) => {
                if let Some(s) = self.clients.get_mut(&id) {
                    if s.write_all(line.as_bytes()).is_err() {
                        self.clients.remove(&id);
                    }
                }
            }
        }
    }

    /// Logs the pending records and fans the outward ones out. A FORCE
    /// also goes back to a datagram sender that supplied the HANDLE.
    fn publish(&mut self, origin: Option<Origin>) -> Result<()> {
        for msg in self.core.drain() {
            if is_outward(&msg) {
                match encode(&msg) {
                    Ok(line) => {
                        let force = matches!(msg.payload, Payload::Force(_));
                        if let (true, Some(o @ Origin::Udp(_))) = (force, origin) {
                            self.send(o, &line);
                        }
                        if !force {
                            self.history.push(line.clone());
                        }
                        self.clients
                            .retain(|_, s| s.write_all(line.as_bytes()).is_ok());
                    }
                    Err(e) => log::warn!("{} not sent: {e}", msg.type_name()),
                }
            }
            self.log
                .send(msg)
                .map_err(|_| Error::Io("log writer stopped".into()))?;
        }
        Ok(())
    }
}
