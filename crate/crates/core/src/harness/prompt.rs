use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pack::TaskPack;
use super::HarnessError;
use crate::arena::{Arena, PhysicsConfig};
use crate::dsl::{compile, parse, MotionConfig};
use crate::render::{encode_png, render, CameraModel};

pub const BASE_PROMPT: &str = include_str!("../../resources/base_prompt.txt");
pub const TUTORIAL_RESPONSES: &str = include_str!("../../resources/tutorial_responses.txt");

/// Sent after an unparseable reply. Changing the text bumps the version.
pub const CORRECTIVE_PROMPT_VERSION: u32 = 1;
pub const CORRECTIVE_PROMPT: &str = "Your last response could not be parsed: {error}. \
Reply only with commands of the form <COMMAND>(<ARG>); using Think, Go or Turn, \
for example Think('I can see a green ball ahead');Go(10);";

pub const HEALTH_LINE_PREFIX: &str = "Your remaining health is: ";

/// How many views of the start position the first turn carries.
pub const INITIAL_IMAGES: u32 = 3;

pub fn health_line(health: f64) -> String {
    format!("{HEALTH_LINE_PREFIX}{health:.1}")
}

pub fn corrective_prompt(error: &str) -> String {
    CORRECTIVE_PROMPT.replace("{error}", error)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "part", rename_all = "snake_case")]
pub enum PromptPart {
    Text {
        text: String,
    },
    Image {
        label: String,
        sha256: String,
        #[serde(skip)]
        png: Option<Arc<Vec<u8>>>,
    },
}

impl PromptPart {
    pub fn text(s: impl Into<String>) -> Self {
        PromptPart::Text { text: s.into() }
    }

    pub fn image(label: impl Into<String>, png: Arc<Vec<u8>>) -> Self {
        PromptPart::Image {
            label: label.into(),
            sha256: hex::encode(Sha256::digest(png.as_slice())),
            png: Some(png),
        }
    }
}

/// What one request to a multimodal model contains, in order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptPayload {
    pub parts: Vec<PromptPart>,
}

impl PromptPayload {
    /// The payload as text, with each image replaced by a marker line.
    pub fn text(&self) -> String {
        let lines: Vec<String> = self
            .parts
            .iter()
            .map(|p| match p {
                PromptPart::Text { text } => text.clone(),
                PromptPart::Image { label, sha256, .. } => format!("<image {label} sha256={sha256}>"),
            })
            .collect();
        lines.join("\n")
    }

    pub fn image_count(&self) -> usize {
        self.parts
            .iter()
            .filter(|p| matches!(p, PromptPart::Image { .. }))
            .count()
    }

    pub fn images(&self) -> impl Iterator<Item = &PromptPart> {
        self.parts.iter().filter(|p| matches!(p, PromptPart::Image { .. }))
    }

    /// Rough size in model tokens: four characters per token plus a flat
    /// cost per image.
    pub fn token_estimate(&self) -> usize {
        const PER_IMAGE: usize = 765;
        self.parts
            .iter()
            .map(|p| match p {
                PromptPart::Text { text } => text.len().div_ceil(4),
                PromptPart::Image { .. } => PER_IMAGE,
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    #[default]
    Base,
    Icl,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::Base => "base",
            PromptMode::Icl => "icl",
        }
    }
}

impl std::str::FromStr for PromptMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "base" => Ok(PromptMode::Base),
            "icl" => Ok(PromptMode::Icl),
            other => Err(format!("unknown prompt mode `{other}`; expected base or icl")),
        }
    }
}

/// One step of the worked example: an image and the reply that followed it,
/// if any.
#[derive(Clone, Debug, PartialEq)]
pub struct IclExample {
    pub image: PromptPart,
    pub response: Option<String>,
}

#[derive(Clone, Debug)]
pub struct PromptTemplate {
    pub mode: PromptMode,
    pub base_text: String,
    pub icl_transcript: Vec<IclExample>,
}

impl PromptTemplate {
    pub fn base() -> Self {
        Self {
            mode: PromptMode::Base,
            base_text: BASE_PROMPT.trim_end().to_string(),
            icl_transcript: Vec::new(),
        }
    }

    /// Builds the template, rendering the worked example with `camera` when
    /// the mode needs it.
    pub fn new(mode: PromptMode, camera: &CameraModel) -> Result<Self, HarnessError> {
        let mut t = Self::base();
        t.mode = mode;
        if mode == PromptMode::Icl {
            t.icl_transcript = tutorial_examples(camera)?;
        }
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.base_text.trim().is_empty() {
            return Err(HarnessError::ResourceMissing("base prompt".into()));
        }
        match self.mode {
            PromptMode::Base if !self.icl_transcript.is_empty() => Err(HarnessError::Config(
                "base mode carries no worked example".into(),
            )),
            PromptMode::Icl if self.icl_transcript.is_empty() => {
                Err(HarnessError::ResourceMissing("tutorial transcript".into()))
            }
            _ => Ok(()),
        }
    }

    fn preamble(&self) -> Vec<PromptPart> {
        let mut parts = vec![PromptPart::text(self.base_text.clone())];
        if self.mode == PromptMode::Icl {
            parts.push(PromptPart::text(
                "Here is an example of a player exploring a practice arena.",
            ));
            for ex in &self.icl_transcript {
                parts.push(ex.image.clone());
                parts.push(PromptPart::text(match &ex.response {
                    Some(r) => r.clone(),
                    None => "Initial image: no response".to_string(),
                }));
            }
            parts.push(PromptPart::text("The example is over. A new level begins now."));
        }
        parts
    }
}

pub fn tutorial_response_list() -> Vec<String> {
    TUTORIAL_RESPONSES
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Plays the bundled replies on the tutorial arena and pairs each reply
/// with the view that preceded it. The first turn shows the start view
/// [`INITIAL_IMAGES`] times, the extra copies carrying no reply.
fn tutorial_examples(camera: &CameraModel) -> Result<Vec<IclExample>, HarnessError> {
    let spec = TaskPack::tutorial()?;
    let arena = Arena::new(spec.clone(), PhysicsConfig::default());
    let mut state = arena.initial_state(0);
    let motion = MotionConfig::default();
    let mut out = Vec::new();
    for (i, reply) in tutorial_response_list().into_iter().enumerate() {
        let png = Arc::new(encode_png(&render(&state, &spec, camera))?);
        if i == 0 {
            for k in 1..INITIAL_IMAGES {
                out.push(IclExample {
                    image: PromptPart::image(format!("example-0.{k}"), png.clone()),
                    response: None,
                });
            }
        }
        out.push(IclExample {
            image: PromptPart::image(format!("example-{i}"), png),
            response: Some(reply.clone()),
        });
        let script = parse(&reply)
            .map_err(|e| HarnessError::ResourceMissing(format!("tutorial reply {i}: {e}")))?;
        for frame in compile(&script, &motion).frames {
            if !state.is_running() {
                break;
            }
            state = arena.step(&state, frame)?.0;
        }
    }
    Ok(out)
}

/// Prompts and replies of one episode. Cleared between tasks.
#[derive(Clone, Debug, Default)]
pub struct ConversationHistory {
    pub turns: Vec<(PromptPayload, String)>,
}

impl ConversationHistory {
    pub fn clear(&mut self) {
        self.turns.clear();
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn push(&mut self, prompt: PromptPayload, reply: String) {
        self.turns.push((prompt, reply));
    }

    pub fn token_estimate(&self) -> usize {
        self.turns
            .iter()
            .map(|(p, r)| p.token_estimate() + r.len().div_ceil(4))
            .sum()
    }
}

/// The parts this turn adds on top of the history: the preamble on the
/// first turn, then the current view(s) and the health line.
pub fn turn_parts(
    template: &PromptTemplate,
    turn: usize,
    png: Arc<Vec<u8>>,
    health: f64,
) -> Vec<PromptPart> {
    let mut parts = Vec::new();
    if turn == 0 {
        parts.extend(template.preamble());
        for k in 1..=INITIAL_IMAGES {
            parts.push(PromptPart::image(format!("observation-0.{k}"), png.clone()));
        }
    } else {
        parts.push(PromptPart::image(format!("observation-{turn}"), png));
    }
    parts.push(PromptPart::text(health_line(health)));
    parts
}

/// Full request for the next turn: every earlier prompt and reply in order,
/// followed by this turn's parts.
pub fn build_prompt(history: &ConversationHistory, current: &[PromptPart]) -> PromptPayload {
    let mut parts = Vec::new();
    for (prompt, reply) in &history.turns {
        let new = prompt_suffix(prompt, &parts);
        parts.extend(new);
        parts.push(PromptPart::text(reply.clone()));
    }
    parts.extend(current.iter().cloned());
    PromptPayload { parts }
}

/// Each stored prompt already holds everything before it; only the tail
/// beyond the running prefix is new.
fn prompt_suffix(prompt: &PromptPayload, prefix: &[PromptPart]) -> Vec<PromptPart> {
    if prompt.parts.len() >= prefix.len() && prompt.parts[..prefix.len()] == *prefix {
        prompt.parts[prefix.len()..].to_vec()
    } else {
        prompt.parts.clone()
    }
}
