//! WebSocket server for the operator bridge.
//!
//! One thread accepts connections and one thread serves each client. Client
//! frames are parsed on the client thread; valid commands go to a shared queue
//! that the simulation drains at step boundaries. Outgoing frames wait in a
//! bounded per-client buffer that drops its oldest frame when full, so a slow
//! client never stalls the simulation.

use std::collections::{BTreeMap, VecDeque};
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use tungstenite::{Message, WebSocket};

use crate::protocol::{parse_command, Command, ServerMessage};

/// Frames buffered per client before the oldest is dropped.
pub const OUTBOX_CAPACITY: usize = 64;

/// Minimum wall time between two pushed snapshots.
pub const SNAPSHOT_INTERVAL: Duration = Duration::from_millis(100);

const POLL_INTERVAL: Duration = Duration::from_millis(10);

pub type ClientId = u64;

#[derive(Debug, Default)]
struct Outbox {
    frames: VecDeque<String>,
    dropped: u64,
}

impl Outbox {
    fn push(&mut self, frame: String) {
        if self.frames.len() == OUTBOX_CAPACITY {
            self.frames.pop_front();
            self.dropped += 1;
        }
        self.frames.push_back(frame);
    }
}

#[derive(Debug, Default)]
struct Shared {
    inbox: Mutex<VecDeque<(ClientId, Command)>>,
    clients: Mutex<BTreeMap<ClientId, Outbox>>,
    next_client: AtomicU64,
    stop: AtomicBool,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl Shared {
    fn enqueue(&self, client: ClientId, frame: String) {
        if let Some(out) = lock(&self.clients).get_mut(&client) {
            out.push(frame);
        }
    }
}

#[derive(Debug)]
pub struct Bridge {
    addr: SocketAddr,
    shared: Arc<Shared>,
    accept: Option<JoinHandle<()>>,
    last_push: Option<Instant>,
}

impl Bridge {
    /// Binds and starts accepting; port 0 picks a free port.
    pub fn bind(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared::default());
        let accept = {
            let shared = Arc::clone(&shared);
            std::thread::Builder::new()
                .name("bridge-accept".into())
                .spawn(move || accept_loop(listener, shared))?
        };
        log::info!("operator bridge listening on ws://{addr}");
        Ok(Self {
            addr,
            shared,
            accept: Some(accept),
            last_push: None,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn client_count(&self) -> usize {
        lock(&self.shared.clients).len()
    }

    /// Takes every command received since the last call, in arrival order.
    pub fn drain(&self) -> Vec<(ClientId, Command)> {
        lock(&self.shared.inbox).drain(..).collect()
    }

    pub fn send(&self, client: ClientId, msg: &ServerMessage) {
        self.shared.enqueue(client, msg.to_json());
    }

    pub fn broadcast(&self, msg: &ServerMessage) {
        let frame = msg.to_json();
        for out in lock(&self.shared.clients).values_mut() {
            out.push(frame.clone());
        }
    }

    /// Broadcasts `msg` unless one was pushed less than [`SNAPSHOT_INTERVAL`] ago.
    /// Returns whether it was sent.
    pub fn push_throttled(&mut self, msg: &ServerMessage) -> bool {
        let now = Instant::now();
        if self.last_push.is_some_and(|t| now.duration_since(t) < SNAPSHOT_INTERVAL) {
            return false;
        }
        self.last_push = Some(now);
        self.broadcast(msg);
        true
    }

    /// Frames dropped so far for `client` because its buffer was full.
    pub fn dropped(&self, client: ClientId) -> u64 {
        lock(&self.shared.clients).get(&client).map(|o| o.dropped).unwrap_or(0)
    }
}

impl Drop for Bridge {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    let mut workers = Vec::new();
    while !shared.stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = shared.next_client.fetch_add(1, Ordering::SeqCst);
                let shared = Arc::clone(&shared);
                let spawned = std::thread::Builder::new()
                    .name(format!("bridge-client-{id}"))
                    .spawn(move || {
                        if let Err(e) = serve_client(stream, id, &shared) {
                            log::debug!("client {id} at {peer} closed: {e}");
                        }
                        lock(&shared.clients).remove(&id);
                    });
                match spawned {
                    Ok(h) => workers.push(h),
                    Err(e) => log::warn!("cannot serve {peer}: {e}"),
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(POLL_INTERVAL),
            Err(e) => {
                log::warn!("accept failed: {e}");
                std::thread::sleep(POLL_INTERVAL);
            }
        }
    }
    for h in workers {
        let _ = h.join();
    }
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut))
}

fn serve_client(stream: TcpStream, id: ClientId, shared: &Shared) -> Result<(), tungstenite::Error> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.get_ref().set_read_timeout(Some(POLL_INTERVAL))?;
    lock(&shared.clients).insert(id, Outbox::default());

    loop {
        if shared.stop.load(Ordering::SeqCst) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        match ws.read() {
            Ok(Message::Text(text)) => match parse_command(text.as_str()) {
                Ok(cmd) => lock(&shared.inbox).push_back((id, cmd)),
                Err(reason) => shared.enqueue(id, ServerMessage::Error { reason }.to_json()),
            },
            Ok(Message::Binary(_)) => shared.enqueue(
                id,
                ServerMessage::Error {
                    reason: "frames must be UTF-8 text".into(),
                }
                .to_json(),
            ),
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e),
        }
        let pending: Vec<String> = lock(&shared.clients)
            .get_mut(&id)
            .map(|o| o.frames.drain(..).collect())
            .unwrap_or_default();
        for frame in pending {
            ws.write(Message::text(frame))?;
        }
        match ws.flush() {
            Ok(()) => {}
            Err(e) if is_timeout(&e) => {}
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_buffers_drop_the_oldest_frame() {
        let mut out = Outbox::default();
        for i in 0..OUTBOX_CAPACITY + 3 {
            out.push(i.to_string());
        }
        assert_eq!(out.frames.len(), OUTBOX_CAPACITY);
        assert_eq!(out.dropped, 3);
        assert_eq!(out.frames.front().map(String::as_str), Some("3"));
    }
}
