use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::{decode_line, encode_line, Envelope, Message, MAX_LINE_BYTES};
use crate::agents::Agent;
use crate::arena::{ArenaSpec, EpisodeState};
use crate::harness::PromptPayload;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinkError {
    #[error("agent did not answer in time")]
    Timeout,
    #[error("agent closed the connection")]
    Closed,
    #[error("framing error: {0}")]
    Framing(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Privileged view of the current turn, only handed to in-process agents.
#[derive(Clone)]
pub struct TurnContext {
    pub state: EpisodeState,
    pub spec: Arc<ArenaSpec>,
    pub prompt: Arc<PromptPayload>,
    pub turn: u32,
    /// Ground distance of one `Go` unit.
    pub step_length: f64,
}

/// A bidirectional, strictly sequential message channel to one agent.
pub trait AgentLink: Send {
    fn send(&mut self, env: &Envelope) -> Result<(), LinkError>;
    fn recv(&mut self, timeout: Duration) -> Result<Envelope, LinkError>;

    /// Whether the link wants a [`TurnContext`] before each observation.
    fn wants_context(&self) -> bool {
        false
    }

    fn set_context(&mut self, _ctx: TurnContext) {}
}

/// Runs an [`Agent`] on the caller's thread. A `None` reply from the agent
/// is reported as a timeout without waiting.
pub struct InProcessLink<A> {
    agent: A,
    session_id: String,
    pending: Option<super::ObservationMsg>,
    ctx: Option<TurnContext>,
    fresh: bool,
    seq: u64,
}

impl<A: Agent> InProcessLink<A> {
    pub fn new(agent: A) -> Self {
        Self {
            agent,
            session_id: String::new(),
            pending: None,
            ctx: None,
            fresh: true,
            seq: 0,
        }
    }

    pub fn agent(&self) -> &A {
        &self.agent
    }

    pub fn into_agent(self) -> A {
        self.agent
    }
}

impl<A: Agent> AgentLink for InProcessLink<A> {
    fn send(&mut self, env: &Envelope) -> Result<(), LinkError> {
        self.session_id = env.session_id.clone();
        match &env.body {
            Message::Observation(obs) => {
                if self.fresh {
                    self.agent.begin_episode(&obs.task_id);
                    self.fresh = false;
                }
                self.pending = Some(obs.clone());
            }
            Message::ParseFeedback { error, .. } => self.agent.on_feedback(error),
            Message::EpisodeEnd { .. } | Message::Abort { .. } => self.fresh = true,
            Message::SessionHello { .. } | Message::Action { .. } => {}
        }
        Ok(())
    }

    fn recv(&mut self, _timeout: Duration) -> Result<Envelope, LinkError> {
        let obs = self
            .pending
            .take()
            .ok_or_else(|| LinkError::Framing("no observation outstanding".into()))?;
        let reply = self.agent.respond(&obs, self.ctx.as_ref());
        match reply {
            Some(text) => {
                self.seq += 1;
                Ok(Envelope {
                    session_id: self.session_id.clone(),
                    seq: self.seq,
                    body: Message::Action {
                        raw_script_text: text,
                    },
                })
            }
            None => Err(LinkError::Timeout),
        }
    }

    fn wants_context(&self) -> bool {
        true
    }

    fn set_context(&mut self, ctx: TurnContext) {
        self.ctx = Some(ctx);
    }
}

type Line = Result<String, LinkError>;

fn spawn_line_reader<R: Read + Send + 'static>(reader: R, tx: Sender<Line>) {
    thread::spawn(move || {
        let mut reader = BufReader::new(reader);
        loop {
            let mut buf = Vec::new();
            let mut limited = (&mut reader).take(MAX_LINE_BYTES as u64 + 1);
            match limited.read_until(b'\n', &mut buf) {
                Ok(0) => break,
                Ok(_) => {
                    if buf.len() > MAX_LINE_BYTES {
                        let _ = tx.send(Err(LinkError::Framing("line too long".into())));
                        break;
                    }
                    let msg = String::from_utf8(buf)
                        .map_err(|_| LinkError::Framing("line is not UTF-8".into()));
                    if tx.send(msg).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(LinkError::Io(e.to_string())));
                    break;
                }
            }
        }
    });
}

fn recv_line(rx: &Receiver<Line>, timeout: Duration) -> Result<Envelope, LinkError> {
    loop {
        let line = match rx.recv_timeout(timeout) {
            Ok(line) => line?,
            Err(RecvTimeoutError::Timeout) => return Err(LinkError::Timeout),
            Err(RecvTimeoutError::Disconnected) => return Err(LinkError::Closed),
        };
        if line.trim().is_empty() {
            continue;
        }
        return decode_line(&line).map_err(|e| LinkError::Framing(e.0));
    }
}

/// Newline-delimited records over any byte stream (socket, pipes, stdio).
/// Reads happen on a helper thread so that `recv` can time out.
pub struct StreamLink {
    writer: Box<dyn Write + Send>,
    rx: Receiver<Line>,
}

impl StreamLink {
    pub fn new<R, W>(reader: R, writer: W) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        spawn_line_reader(reader, tx);
        Self {
            writer: Box::new(writer),
            rx,
        }
    }

    /// The connection is shut down when the link is dropped, so the peer
    /// sees end of stream even though the reader thread holds a clone.
    pub fn tcp(stream: std::net::TcpStream) -> std::io::Result<Self> {
        let reader = stream.try_clone()?;
        Ok(Self::new(reader, ClosingStream(stream)))
    }

    /// Sends a record that is not part of the normal exchange, ignoring
    /// write failures. Used for `abort` on a connection that is going away.
    pub fn send_best_effort(&mut self, env: &Envelope) {
        let _ = self.send(env);
    }
}

struct ClosingStream(std::net::TcpStream);

impl Write for ClosingStream {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.write(buf)
    }
    fn flush(&mut self) -> std::io::Result<()> {
        self.0.flush()
    }
}

impl Drop for ClosingStream {
    fn drop(&mut self) {
        let _ = self.0.shutdown(std::net::Shutdown::Both);
    }
}

impl AgentLink for StreamLink {
    fn send(&mut self, env: &Envelope) -> Result<(), LinkError> {
        self.writer
            .write_all(encode_line(env).as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::BrokenPipe => LinkError::Closed,
                _ => LinkError::Io(e.to_string()),
            })
    }

    fn recv(&mut self, timeout: Duration) -> Result<Envelope, LinkError> {
        recv_line(&self.rx, timeout)
    }
}

/// An agent running as a child process that speaks the protocol on its
/// standard streams.
pub struct ChildProcessLink {
    child: Child,
    link: StreamLink,
}

impl ChildProcessLink {
    pub fn spawn(program: &str, args: &[String]) -> std::io::Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self {
            child,
            link: StreamLink::new(stdout, stdin),
        })
    }
}

impl Drop for ChildProcessLink {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl AgentLink for ChildProcessLink {
    fn send(&mut self, env: &Envelope) -> Result<(), LinkError> {
        self.link.send(env)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Envelope, LinkError> {
        self.link.recv(timeout)
    }
}

/// Link backed by in-memory line channels. The other end is held by a
/// transport adapter such as a websocket bridge.
pub struct ChannelLink {
    out: Sender<String>,
    rx: Receiver<Line>,
}

/// The transport-facing end of a [`ChannelLink`].
pub struct ChannelPeer {
    /// Lines written by the harness, newline included.
    pub outgoing: Receiver<String>,
    pub incoming: ChannelInbox,
}

/// Sends agent lines into a [`ChannelLink`]. Dropping it closes the link.
#[derive(Clone)]
pub struct ChannelInbox(Sender<Line>);

impl ChannelInbox {
    /// Delivers one line from the agent. Returns false once the harness
    /// side has gone away.
    pub fn deliver(&self, line: String) -> bool {
        self.0.send(Ok(line)).is_ok()
    }
}

impl ChannelPeer {
    pub fn deliver(&self, line: String) -> bool {
        self.incoming.deliver(line)
    }
}

impl ChannelLink {
    pub fn pair() -> (ChannelLink, ChannelPeer) {
        let (out_tx, out_rx) = mpsc::channel();
        let (in_tx, in_rx) = mpsc::channel();
        (
            ChannelLink {
                out: out_tx,
                rx: in_rx,
            },
            ChannelPeer {
                outgoing: out_rx,
                incoming: ChannelInbox(in_tx),
            },
        )
    }
}

impl AgentLink for ChannelLink {
    fn send(&mut self, env: &Envelope) -> Result<(), LinkError> {
        self.out.send(encode_line(env)).map_err(|_| LinkError::Closed)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Envelope, LinkError> {
        recv_line(&self.rx, timeout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn action(seq: u64, text: &str) -> Envelope {
        Envelope {
            session_id: "s".into(),
            seq,
            body: Message::Action {
                raw_script_text: text.into(),
            },
        }
    }

    #[test]
    fn stream_link_reads_records_and_reports_eof() {
        let input = format!("{}\n{}", encode_line(&action(1, "Go(1);")).trim_end(), "{bad");
        let mut link = StreamLink::new(Cursor::new(input.into_bytes()), std::io::sink());
        let t = Duration::from_secs(1);
        assert_eq!(link.recv(t).unwrap(), action(1, "Go(1);"));
        assert!(matches!(link.recv(t), Err(LinkError::Framing(_))));
        assert_eq!(link.recv(t), Err(LinkError::Closed));
    }

    #[test]
    fn channel_link_times_out() {
        let (mut link, peer) = ChannelLink::pair();
        assert_eq!(link.recv(Duration::from_millis(10)), Err(LinkError::Timeout));
        link.send(&action(0, "x")).unwrap();
        assert!(peer.outgoing.recv().unwrap().ends_with('\n'));
        assert!(peer.deliver(encode_line(&action(1, "Go(2);"))));
        assert_eq!(link.recv(Duration::from_secs(1)).unwrap(), action(1, "Go(2);"));
        drop(peer);
        assert_eq!(link.recv(Duration::from_secs(1)), Err(LinkError::Closed));
    }
}
