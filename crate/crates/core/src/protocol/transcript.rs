//! Append-only session logs.
//!
//! A transcript is newline-delimited JSON: one `header` line, then one line
//! per record sent or received (plus `timeout` markers), then a `footer`
//! carrying the episode's trace hash. A file holding only the header is a
//! session that never played; anything else without a footer is truncated.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Envelope, Message};

pub const TRANSCRIPT_VERSION: &str = "arenabench-transcript/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub format: String,
    pub session_id: String,
    pub agent_id: String,
    pub task_id: String,
    pub trial_index: u32,
    /// Zero for the first launch, incremented on every relaunch.
    pub attempt: u32,
    pub seed: u64,
    pub mode: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptFooter {
    pub trace_hash: String,
    pub termination: String,
    pub passed: bool,
    pub final_reward: f64,
    pub steps_used: u32,
    pub scripts_used: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptEntry {
    Header(TranscriptHeader),
    Message { dir: Direction, message: Envelope },
    Timeout { after_secs: f64 },
    Footer(TranscriptFooter),
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("transcript is truncated: {0}")]
    Truncated(String),
    #[error("transcript line {line} is malformed: {message}")]
    Malformed { line: usize, message: String },
    #[error("unsupported transcript format `{0}`")]
    Version(String),
    #[error("cannot read transcript: {0}")]
    Io(#[from] std::io::Error),
}

pub struct TranscriptWriter {
    out: Box<dyn Write + Send>,
    path: Option<PathBuf>,
    include_images: bool,
}

impl TranscriptWriter {
    pub fn create(
        path: &Path,
        header: &TranscriptHeader,
        include_images: bool,
    ) -> std::io::Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = File::create(path)?;
        let mut w = Self {
            out: Box::new(BufWriter::new(file)),
            path: Some(path.to_path_buf()),
            include_images,
        };
        w.write(&TranscriptEntry::Header(header.clone()))?;
        w.out.flush()?;
        Ok(w)
    }

    /// Writer into any sink; used for in-memory transcripts and tests.
    pub fn to_writer(
        out: Box<dyn Write + Send>,
        header: &TranscriptHeader,
        include_images: bool,
    ) -> std::io::Result<Self> {
        let mut w = Self {
            out,
            path: None,
            include_images,
        };
        w.write(&TranscriptEntry::Header(header.clone()))?;
        Ok(w)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn write(&mut self, entry: &TranscriptEntry) -> std::io::Result<()> {
        let line = serde_json::to_string(entry).map_err(std::io::Error::other)?;
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")
    }

    fn message(&mut self, dir: Direction, env: &Envelope) -> std::io::Result<()> {
        let mut env = env.clone();
        if !self.include_images {
            if let Message::Observation(obs) = &mut env.body {
                obs.image_b64.clear();
                for c in &mut obs.context_images {
                    c.image_b64.clear();
                }
            }
        }
        self.write(&TranscriptEntry::Message { dir, message: env })
    }

    pub fn sent(&mut self, env: &Envelope) -> std::io::Result<()> {
        self.message(Direction::Sent, env)
    }

    pub fn received(&mut self, env: &Envelope) -> std::io::Result<()> {
        self.message(Direction::Received, env)
    }

    pub fn timeout(&mut self, after_secs: f64) -> std::io::Result<()> {
        self.write(&TranscriptEntry::Timeout { after_secs })
    }

    pub fn finish(mut self, footer: &TranscriptFooter) -> std::io::Result<()> {
        self.write(&TranscriptEntry::Footer(footer.clone()))?;
        self.out.flush()
    }

    /// Flushes without a footer, leaving a header-only or truncated file.
    pub fn abandon(mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub entries: Vec<TranscriptEntry>,
    pub footer: Option<TranscriptFooter>,
}

impl Transcript {
    /// The agent's side of the conversation in order: `Some(text)` for each
    /// action, `None` for each timeout.
    pub fn agent_replies(&self) -> Vec<Option<String>> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                TranscriptEntry::Message {
                    dir: Direction::Received,
                    message:
                        Envelope {
                            body: Message::Action { raw_script_text },
                            ..
                        },
                } => Some(Some(raw_script_text.clone())),
                TranscriptEntry::Timeout { .. } => Some(None),
                _ => None,
            })
            .collect()
    }

    pub fn messages(&self) -> impl Iterator<Item = (Direction, &Envelope)> {
        self.entries.iter().filter_map(|e| match e {
            TranscriptEntry::Message { dir, message } => Some((*dir, message)),
            _ => None,
        })
    }

    pub fn load(path: &Path) -> Result<Transcript, ReplayError> {
        read_transcript(&std::fs::read_to_string(path)?)
    }
}

pub fn read_transcript(text: &str) -> Result<Transcript, ReplayError> {
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(ReplayError::Truncated("last line is incomplete".into()));
    }
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        None => return Err(ReplayError::Truncated("missing header".into())),
        Some((i, line)) => match parse_entry(i, line)? {
            TranscriptEntry::Header(h) => h,
            _ => {
                return Err(ReplayError::Malformed {
                    line: i + 1,
                    message: "first line must be the header".into(),
                })
            }
        },
    };
    if header.format != TRANSCRIPT_VERSION {
        return Err(ReplayError::Version(header.format));
    }
    let mut entries = Vec::new();
    let mut footer = None;
    for (i, line) in lines {
        if footer.is_some() {
            return Err(ReplayError::Malformed {
                line: i + 1,
                message: "content after footer".into(),
            });
        }
        match parse_entry(i, line)? {
            TranscriptEntry::Footer(f) => footer = Some(f),
            TranscriptEntry::Header(_) => {
                return Err(ReplayError::Malformed {
                    line: i + 1,
                    message: "second header".into(),
                })
            }
            e => entries.push(e),
        }
    }
    if footer.is_none() && !entries.is_empty() {
        return Err(ReplayError::Truncated("missing footer".into()));
    }
    Ok(Transcript {
        header,
        entries,
        footer,
    })
}

fn parse_entry(i: usize, line: &str) -> Result<TranscriptEntry, ReplayError> {
    serde_json::from_str(line).map_err(|e| ReplayError::Malformed {
        line: i + 1,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::{Arc, Mutex};

    #[derive(Clone, Default)]
    struct Shared(Arc<Mutex<Vec<u8>>>);

    impl Write for Shared {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    fn header() -> TranscriptHeader {
        TranscriptHeader {
            format: TRANSCRIPT_VERSION.into(),
            session_id: "s".into(),
            agent_id: "a".into(),
            task_id: "t".into(),
            trial_index: 0,
            attempt: 0,
            seed: 1,
            mode: "base".into(),
        }
    }

    #[test]
    fn header_only_is_an_empty_session() {
        let buf = Shared::default();
        TranscriptWriter::to_writer(Box::new(buf.clone()), &header(), false)
            .unwrap()
            .abandon()
            .unwrap();
        let text = String::from_utf8(buf.0.lock().unwrap().clone()).unwrap();
        assert_eq!(text.lines().count(), 1);
        let t = read_transcript(&text).unwrap();
        assert!(t.entries.is_empty() && t.footer.is_none());
    }

    #[test]
    fn truncation_is_detected() {
        let buf = Shared::default();
        let mut w = TranscriptWriter::to_writer(Box::new(buf.clone()), &header(), false).unwrap();
        w.received(&Envelope {
            session_id: "s".into(),
            seq: 1,
            body: Message::Action {
                raw_script_text: "Go(1);".into(),
            },
        })
        .unwrap();
        w.timeout(1.0).unwrap();
        w.finish(&TranscriptFooter {
            trace_hash: "00".into(),
            termination: "goal_reached".into(),
            passed: true,
            final_reward: 0.5,
            steps_used: 3,
            scripts_used: 1,
        })
        .unwrap();
        let text = String::from_utf8(buf.0.lock().unwrap().clone()).unwrap();
        let t = read_transcript(&text).unwrap();
        assert_eq!(t.agent_replies(), vec![Some("Go(1);".to_string()), None]);

        let lines: Vec<&str> = text.lines().collect();
        let no_footer = format!("{}\n{}\n", lines[0], lines[1]);
        assert!(matches!(read_transcript(&no_footer), Err(ReplayError::Truncated(_))));
        let cut = &text[..text.len() - 10];
        assert!(matches!(read_transcript(cut), Err(ReplayError::Truncated(_))));
        assert!(matches!(read_transcript(""), Err(ReplayError::Truncated(_))));
    }
}
