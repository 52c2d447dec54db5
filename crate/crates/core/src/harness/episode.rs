use std::sync::Arc;

use base64::Engine as _;
use sha2::{Digest, Sha256};

use super::prompt::{
    build_prompt, corrective_prompt, turn_parts, ConversationHistory, PromptPart, PromptTemplate,
    INITIAL_IMAGES,
};
use super::HarnessError;
use crate::arena::{check_pass, Arena, ArenaSpec, EpisodeState, PhysicsConfig, TraceDigest, TraceHasher};
use crate::dsl::{compile, parse, MotionConfig};
use crate::protocol::{
    ContextImage, Message, ObservationMsg, Session, SessionError, TranscriptFooter, TurnContext,
};
use crate::render::{encode_png, render, CameraModel};
use crate::stats::{Population, TrialRecord};

#[derive(Clone, Debug)]
pub struct EpisodeConfig {
    pub camera: CameraModel,
    pub physics: PhysicsConfig,
    pub seed: u64,
    pub trial_index: u32,
    pub agent_id: String,
    pub population: Population,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            camera: CameraModel::default(),
            physics: PhysicsConfig::default(),
            seed: 0,
            trial_index: 0,
            agent_id: "agent".into(),
            population: Population::Llm,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub record: TrialRecord,
    pub trace_hash: TraceDigest,
    pub final_state: EpisodeState,
    pub history: ConversationHistory,
}

fn b64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

fn context_images(parts: &[PromptPart]) -> Vec<ContextImage> {
    parts
        .iter()
        .filter_map(|p| match p {
            PromptPart::Image {
                label,
                sha256,
                png: Some(png),
            } if label.starts_with("example") => Some(ContextImage {
                label: label.clone(),
                image_sha256: sha256.clone(),
                image_b64: b64(png),
            }),
            _ => None,
        })
        .collect()
}

/// Tells the agent the trial is void before handing the error up.
fn discard(session: &mut Session, err: SessionError) -> HarnessError {
    if matches!(err, SessionError::TrialDiscarded { .. }) {
        session.abort("discarded");
    }
    err.into()
}

/// Plays one episode: render, ask the agent for a script, parse it, run its
/// frames to completion, repeat until the episode ends or the script budget
/// is spent. The agent sees nothing while a script is running.
pub fn run_episode(
    spec: &ArenaSpec,
    session: &mut Session,
    template: &PromptTemplate,
    cfg: &EpisodeConfig,
) -> Result<EpisodeResult, HarnessError> {
    let arena = Arena::new(spec.clone(), cfg.physics);
    let motion = MotionConfig {
        step_length: cfg.physics.step_length,
    };
    let shared_spec = Arc::new(spec.clone());
    let max_scripts = session.policy().max_scripts_per_episode;
    let mut state = arena.initial_state(cfg.seed);
    let mut hasher = TraceHasher::new();
    hasher.absorb_initial(&state);
    let mut history = ConversationHistory::default();
    let mut scripts_used = 0u32;

    while state.is_running() {
        if scripts_used >= max_scripts {
            state = arena.exhaust_budget(&state);
            break;
        }
        let turn = history.len();
        let image = render(&state, spec, &cfg.camera);
        let png = Arc::new(encode_png(&image)?);
        let parts = turn_parts(template, turn, png.clone(), state.health);
        let payload = build_prompt(&history, &parts);
        let prompt_text = payload.text();
        let mut obs = ObservationMsg {
            task_id: spec.id.clone(),
            image_b64: b64(&png),
            image_sha256: hex::encode(Sha256::digest(png.as_slice())),
            width: image.width,
            height: image.height,
            image_count: if turn == 0 { INITIAL_IMAGES } else { 1 },
            blackout: image.blackout,
            health: state.health,
            cumulative_reward: state.cumulative_reward,
            step: state.step,
            scripts_remaining: max_scripts - scripts_used,
            text_prompt: prompt_text.clone(),
            context_images: if turn == 0 { context_images(&parts) } else { Vec::new() },
        };
        if session.wants_context() {
            session.set_context(TurnContext {
                state: state.clone(),
                spec: shared_spec.clone(),
                prompt: Arc::new(payload.clone()),
                turn: turn as u32,
                step_length: cfg.physics.step_length,
            });
        }

        let mut retry = 0u32;
        let (script, reply) = loop {
            let reply = match session.exchange_turn(&obs) {
                Ok(r) => r,
                Err(e) => return Err(discard(session, e)),
            };
            match parse(&reply) {
                Ok(script) => {
                    session.reset_failures();
                    break (script, reply);
                }
                Err(e) => {
                    log::info!("session {}: unparseable reply: {e}", session.id());
                    if let Err(err) = session.record_failure() {
                        return Err(discard(session, err));
                    }
                    retry += 1;
                    session.send(Message::ParseFeedback {
                        error: e.to_string(),
                        retry_index: retry,
                    })?;
                    obs.text_prompt = format!("{prompt_text}\n{}", corrective_prompt(&e.to_string()));
                    obs.context_images.clear();
                }
            }
        };
        history.push(payload, reply);
        scripts_used += 1;

        for frame in compile(&script, &motion).frames {
            if !state.is_running() {
                break;
            }
            let (next, outcome) = arena.step(&state, frame)?;
            hasher.absorb(&next, &outcome);
            state = next;
        }
    }

    hasher.absorb_final(&state);
    let digest = hasher.finish();
    let passed = check_pass(&state, spec);
    let reason = state.terminated.as_str();
    session.send(Message::EpisodeEnd {
        passed,
        final_reward: state.cumulative_reward,
        reason: reason.into(),
    })?;

    let mut record = TrialRecord::new(&cfg.agent_id, cfg.population, &spec.id, passed);
    record.trial_index = Some(cfg.trial_index);
    record.final_reward = Some(state.cumulative_reward);
    record.scripts_used = Some(scripts_used);
    record.steps_used = Some(state.step);
    record.termination = Some(reason.into());
    record.relaunches = Some(0);
    record.trace_hash = Some(digest.0.clone());
    if let Some(writer) = session.take_transcript()? {
        record.transcript_ref = writer.path().map(|p| p.display().to_string());
        writer
            .finish(&TranscriptFooter {
                trace_hash: digest.0.clone(),
                termination: reason.into(),
                passed,
                final_reward: state.cumulative_reward,
                steps_used: state.step,
                scripts_used,
            })
            .map_err(|e| SessionError::Storage(e.to_string()))?;
    }
    Ok(EpisodeResult {
        record,
        trace_hash: digest,
        final_state: state,
        history,
    })
}
