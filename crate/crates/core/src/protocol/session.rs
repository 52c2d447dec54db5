use super::{
    AgentLink, Envelope, LinkError, Message, ObservationMsg, SessionPolicy, TranscriptWriter,
    TurnContext,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("trial discarded after {failures} consecutive agent failures")]
    TrialDiscarded { failures: u32 },
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("transcript storage failed: {0}")]
    Storage(String),
}

/// Harness side of one agent connection. Owns the link, numbers outgoing
/// records, enforces the one-action-per-observation rule and counts
/// consecutive agent failures.
pub struct Session {
    id: String,
    link: Box<dyn AgentLink>,
    policy: SessionPolicy,
    seq: u64,
    last_inbound: Option<u64>,
    failures: u32,
    transcript: Option<TranscriptWriter>,
    storage_error: Option<String>,
}

impl Session {
    pub fn new(id: impl Into<String>, link: Box<dyn AgentLink>, policy: SessionPolicy) -> Self {
        Self {
            id: id.into(),
            link,
            policy,
            seq: 0,
            last_inbound: None,
            failures: 0,
            transcript: None,
            storage_error: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn policy(&self) -> &SessionPolicy {
        &self.policy
    }

    pub fn failures(&self) -> u32 {
        self.failures
    }

    pub fn wants_context(&self) -> bool {
        self.link.wants_context()
    }

    pub fn set_context(&mut self, ctx: TurnContext) {
        self.link.set_context(ctx);
    }

    pub fn set_transcript(&mut self, writer: Option<TranscriptWriter>) {
        self.transcript = writer;
    }

    pub fn take_transcript(&mut self) -> Result<Option<TranscriptWriter>, SessionError> {
        if let Some(e) = self.storage_error.take() {
            return Err(SessionError::Storage(e));
        }
        Ok(self.transcript.take())
    }

    fn log(&mut self, f: impl FnOnce(&mut TranscriptWriter) -> std::io::Result<()>) {
        if let Some(t) = self.transcript.as_mut() {
            if let Err(e) = f(t) {
                self.storage_error.get_or_insert(e.to_string());
            }
        }
    }

    pub fn send(&mut self, body: Message) -> Result<(), SessionError> {
        self.seq += 1;
        let env = Envelope {
            session_id: self.id.clone(),
            seq: self.seq,
            body,
        };
        self.log(|t| t.sent(&env));
        self.link.send(&env)?;
        Ok(())
    }

    pub fn hello(&mut self, suite_id: &str, config: serde_json::Value) -> Result<(), SessionError> {
        self.send(Message::SessionHello {
            protocol: super::WIRE_VERSION.into(),
            suite_id: suite_id.into(),
            config,
        })
    }

    pub fn abort(&mut self, reason: &str) {
        let _ = self.send(Message::Abort {
            reason: reason.into(),
        });
    }

    /// Counts one agent failure. Errors once the policy limit is reached.
    pub fn record_failure(&mut self) -> Result<(), SessionError> {
        self.failures += 1;
        if self.failures >= self.policy.max_agent_failures {
            Err(SessionError::TrialDiscarded {
                failures: self.failures,
            })
        } else {
            Ok(())
        }
    }

    pub fn reset_failures(&mut self) {
        self.failures = 0;
    }

    /// Sends one observation and waits for the matching action. A timeout
    /// counts as a failure and the identical observation is sent again.
    pub fn exchange_turn(&mut self, obs: &ObservationMsg) -> Result<String, SessionError> {
        loop {
            self.send(Message::Observation(obs.clone()))?;
            match self.link.recv(self.policy.response_timeout()) {
                Ok(env) => return self.accept_action(env),
                Err(LinkError::Timeout) => {
                    let secs = self.policy.response_timeout_secs;
                    self.log(|t| t.timeout(secs));
                    log::warn!("session {}: agent timed out", self.id);
                    self.record_failure()?;
                }
                Err(LinkError::Framing(msg)) => {
                    self.abort("framing");
                    return Err(LinkError::Framing(msg).into());
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn accept_action(&mut self, env: Envelope) -> Result<String, SessionError> {
        self.log(|t| t.received(&env));
        let in_order = self.last_inbound.map_or(true, |last| env.seq > last);
        if env.session_id != self.id || !in_order {
            self.abort("framing");
            return Err(LinkError::Framing("session id or sequence mismatch".into()).into());
        }
        self.last_inbound = Some(env.seq);
        match env.body {
            Message::Action { raw_script_text } => Ok(raw_script_text),
            Message::Abort { reason } => Err(LinkError::Io(format!("agent aborted: {reason}")).into()),
            other => {
                self.abort("framing");
                Err(LinkError::Framing(format!("expected action, got {}", other.kind())).into())
            }
        }
    }
}
