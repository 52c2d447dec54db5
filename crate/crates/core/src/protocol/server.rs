use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::{Session, SessionPolicy, StreamLink};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    /// Serve exactly one session on this process's standard streams.
    Stdio,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
}

/// Called once per accepted connection, on that connection's own thread.
pub type SessionHandler = dyn Fn(Session) + Send + Sync;

pub struct ServerHandle {
    local_addr: Option<SocketAddr>,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> Option<SocketAddr> {
        self.local_addr
    }

    /// Stops accepting new connections. Sessions already running finish on
    /// their own threads.
    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(addr) = self.local_addr {
            let _ = TcpStream::connect(addr);
        }
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    /// Blocks until the accept loop ends.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.accept.is_some() {
            self.stop_accepting();
        }
    }
}

fn new_session_id() -> String {
    uuid::Uuid::new_v4().to_string()
}

/// Accepts agent connections and hands each one to `handler` as a fresh
/// [`Session`] with its own id. In stdio mode the single session runs on
/// the calling thread before this returns.
pub fn serve(
    endpoint: &Endpoint,
    policy: SessionPolicy,
    handler: Arc<SessionHandler>,
) -> Result<ServerHandle, ServeError> {
    match endpoint {
        Endpoint::Stdio => {
            let link = StreamLink::new(std::io::stdin(), std::io::stdout());
            handler(Session::new(new_session_id(), Box::new(link), policy));
            Ok(ServerHandle {
                local_addr: None,
                stop: Arc::new(AtomicBool::new(true)),
                accept: None,
            })
        }
        Endpoint::Tcp(addr) => {
            let listener = TcpListener::bind(addr).map_err(|source| ServeError::Bind {
                addr: addr.clone(),
                source,
            })?;
            let local = listener.local_addr().ok();
            let stop = Arc::new(AtomicBool::new(false));
            let flag = stop.clone();
            let accept = thread::spawn(move || {
                for conn in listener.incoming() {
                    if flag.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = conn else { continue };
                    let handler = handler.clone();
                    thread::spawn(move || {
                        let peer = stream.peer_addr().ok();
                        match StreamLink::tcp(stream) {
                            Ok(link) => {
                                let session = Session::new(new_session_id(), Box::new(link), policy);
                                log::info!("session {} from {:?}", session.id(), peer);
                                handler(session);
                            }
                            Err(e) => log::warn!("dropping connection: {e}"),
                        }
                    });
                }
            });
            Ok(ServerHandle {
                local_addr: local,
                stop,
                accept: Some(accept),
            })
        }
    }
}
