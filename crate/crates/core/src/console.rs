//! Websocket server for operator consoles.
//!
//! Each client gets a thread that decodes incoming protocol messages onto a
//! shared queue and writes out the broadcast stream. Malformed input is
//! answered on the same connection only.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{Receiver, Sender};
use serde_json::json;
use tungstenite::{Message, WebSocket};

use crate::orchestrator::protocol::{decode_client, encode, ClientMessage, ServerMessage, PROTOCOL_VERSION};

const POLL: Duration = Duration::from_millis(5);

/// Fan-out of encoded server messages to every connected client.
#[derive(Clone, Default)]
pub struct ConsoleHub {
    clients: Arc<Mutex<Vec<Sender<Arc<str>>>>>,
}

impl ConsoleHub {
    pub fn broadcast(&self, text: &str) {
        let msg: Arc<str> = Arc::from(text);
        self.clients
            .lock()
            .unwrap()
            .retain(|tx| tx.send(Arc::clone(&msg)).is_ok());
    }

    pub fn client_count(&self) -> usize {
        self.clients.lock().unwrap().len()
    }

    fn subscribe(&self) -> Receiver<Arc<str>> {
        let (tx, rx) = crossbeam_channel::unbounded();
        self.clients.lock().unwrap().push(tx);
        rx
    }
}

pub struct ConsoleServer {
    addr: SocketAddr,
    hub: ConsoleHub,
    inbound: Receiver<ClientMessage>,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl ConsoleServer {
    pub fn bind(addr: &str) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let hub = ConsoleHub::default();
        let (tx, inbound) = crossbeam_channel::unbounded();
        let stop = Arc::new(AtomicBool::new(false));
        let accept = {
            let hub = hub.clone();
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || accept_loop(listener, hub, tx, stop))
        };
        log::info!("console listening on ws://{addr}");
        Ok(Self {
            addr,
            hub,
            inbound,
            stop,
            accept: Some(accept),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn hub(&self) -> ConsoleHub {
        self.hub.clone()
    }

    /// Decoded client messages from all connections, in arrival order.
    pub fn inbound(&self) -> Receiver<ClientMessage> {
        self.inbound.clone()
    }
}

impl Drop for ConsoleServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn accept_loop(listener: TcpListener, hub: ConsoleHub, inbound: Sender<ClientMessage>, stop: Arc<AtomicBool>) {
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let hub = hub.clone();
        let inbound = inbound.clone();
        let stop = Arc::clone(&stop);
        std::thread::spawn(move || {
            if let Err(e) = serve_client(stream, &hub, &inbound, &stop) {
                log::debug!("console client closed: {e}");
            }
        });
    }
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut))
}

#[allow(clippy::result_large_err)]
fn serve_client(
    stream: TcpStream,
    hub: &ConsoleHub,
    inbound: &Sender<ClientMessage>,
    stop: &AtomicBool,
) -> Result<(), tungstenite::Error> {
    let peer = stream.peer_addr().ok();
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(f) => f,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.get_mut().set_read_timeout(Some(POLL))?;
    let outbound = hub.subscribe();
    log::info!("console client connected: {peer:?}");
    ws.send(Message::text(encode(&ServerMessage::event(
        "hello",
        json!({ "protocol": PROTOCOL_VERSION }),
    ))))?;
    while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => match decode_client(&text) {
                Ok(msg) => {
                    if inbound.send(msg).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let reply =
                        ServerMessage::event("protocol_error", json!({ "code": e.code(), "message": e.to_string() }));
                    ws.send(Message::text(encode(&reply)))?;
                }
            },
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(e) => return Err(e),
        }
        let mut wrote = false;
        for msg in outbound.try_iter() {
            ws.write(Message::text(msg.to_string()))?;
            wrote = true;
        }
        if wrote {
            ws.flush()?;
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    Ok(())
}
