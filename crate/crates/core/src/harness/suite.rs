use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::episode::{run_episode, EpisodeConfig};
use super::pack::TaskPack;
use super::prompt::{PromptMode, PromptTemplate};
use super::HarnessError;
use crate::agents::AgentBehavior;
use crate::arena::PhysicsConfig;
use crate::protocol::{
    ChildProcessLink, InProcessLink, Session, SessionError, SessionPolicy, StreamLink,
    TranscriptHeader, TranscriptWriter, TRANSCRIPT_VERSION,
};
use crate::render::CameraModel;
use crate::stats::{Population, TrialRecord};

/// Levels used by the in-context-learning experiment.
pub const ICL_LEVELS: [u8; 3] = [1, 2, 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub suite_id: String,
    /// Task ids to run; empty means every task in the pack.
    pub tasks: Vec<String>,
    /// Restricts the task list to these levels when non-empty.
    pub levels: Vec<u8>,
    pub trials_per_task: u32,
    pub seed: u64,
    pub policy: SessionPolicy,
    pub camera: CameraModel,
    pub mode: PromptMode,
    /// Episodes run at the same time. Records keep schedule order.
    pub concurrency: usize,
    /// Relaunches allowed per trial before it is recorded as discarded.
    pub max_relaunches: u32,
    /// Directory of `.arena` files replacing the bundled pack.
    pub task_dir: Option<PathBuf>,
    /// Keep observation images in transcripts.
    pub transcript_images: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            suite_id: "default".into(),
            tasks: Vec::new(),
            levels: Vec::new(),
            trials_per_task: 3,
            seed: 0,
            policy: SessionPolicy::default(),
            camera: CameraModel::default(),
            mode: PromptMode::Base,
            concurrency: 1,
            max_relaunches: 3,
            task_dir: None,
            transcript_images: false,
        }
    }
}

impl SuiteConfig {
    /// First three levels with the worked example in the prompt.
    pub fn icl() -> Self {
        Self {
            suite_id: "icl".into(),
            levels: ICL_LEVELS.to_vec(),
            mode: PromptMode::Icl,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn pack(&self) -> Result<TaskPack, HarnessError> {
        match &self.task_dir {
            Some(dir) => TaskPack::load_dir(dir),
            None => TaskPack::bundled(),
        }
    }

    /// Checks the configuration against a pack and returns the task ids to
    /// run, in schedule order.
    pub fn resolve_tasks(&self, pack: &TaskPack) -> Result<Vec<String>, HarnessError> {
        if self.trials_per_task == 0 {
            return Err(HarnessError::Config("trials_per_task must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(HarnessError::Config("concurrency must be at least 1".into()));
        }
        self.policy.validate().map_err(HarnessError::Config)?;
        self.camera
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let mut ids: Vec<String> = if self.tasks.is_empty() {
            pack.ids().map(str::to_string).collect()
        } else {
            for t in &self.tasks {
                if pack.get(t).is_none() {
                    return Err(HarnessError::Config(format!("task `{t}` is not in the pack")));
                }
            }
            self.tasks.clone()
        };
        if !self.levels.is_empty() {
            ids.retain(|id| {
                pack.get(id)
                    .and_then(|s| s.level())
                    .is_some_and(|l| self.levels.contains(&l))
            });
        }
        if ids.is_empty() {
            return Err(HarnessError::Config("the suite selects no tasks".into()));
        }
        Ok(ids)
    }
}

/// Seed of one trial, derived from the suite seed so that trials are
/// independent of scheduling order.
pub fn trial_seed(suite_seed: u64, task_id: &str, trial_index: u32) -> u64 {
    let digest = Sha256::digest(format!("{suite_seed}|{task_id}|{trial_index}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialKey {
    pub task_id: String,
    pub trial_index: u32,
    pub seed: u64,
}

/// Source of agent sessions for a suite.
pub trait SessionFactory: Sync {
    fn agent_id(&self) -> String;

    fn population(&self) -> Population {
        Population::Llm
    }

    /// A session for one launch of a trial. `attempt` counts relaunches.
    fn open(&self, key: &TrialKey, attempt: u32, policy: SessionPolicy) -> Result<Session, HarnessError>;

    /// Returns a session after its trial, finished or discarded.
    fn close(&self, _session: Session) {}
}

fn session_id(key: &TrialKey, attempt: u32) -> String {
    format!("{}-t{}-a{}", key.task_id, key.trial_index, attempt)
}

/// One of the built-in agents, run in the harness process.
pub struct BuiltinFactory {
    pub behavior: AgentBehavior,
}

impl SessionFactory for BuiltinFactory {
    fn agent_id(&self) -> String {
        self.behavior.label().into()
    }

    fn population(&self) -> Population {
        Population::Baseline
    }

    fn open(&self, key: &TrialKey, attempt: u32, policy: SessionPolicy) -> Result<Session, HarnessError> {
        let agent = self
            .behavior
            .with_seed(key.seed)
            .build()
            .map_err(|e| HarnessError::Agent(e.to_string()))?;
        Ok(Session::new(session_id(key, attempt), Box::new(InProcessLink::new(agent)), policy))
    }
}

/// An agent program started afresh for every launch, speaking the wire
/// protocol on its stdin and stdout.
pub struct ProcessFactory {
    pub agent_id: String,
    pub program: String,
    pub args: Vec<String>,
}

impl SessionFactory for ProcessFactory {
    fn agent_id(&self) -> String {
        self.agent_id.clone()
    }

    fn open(&self, key: &TrialKey, attempt: u32, policy: SessionPolicy) -> Result<Session, HarnessError> {
        let link = ChildProcessLink::spawn(&self.program, &self.args)
            .map_err(|e| HarnessError::Agent(format!("cannot start {}: {e}", self.program)))?;
        Ok(Session::new(session_id(key, attempt), Box::new(link), policy))
    }
}

/// An agent listening on a TCP address; one connection per launch.
pub struct TcpFactory {
    pub agent_id: String,
    pub addr: String,
}

impl SessionFactory for TcpFactory {
    fn agent_id(&self) -> String {
        self.agent_id.clone()
    }

    fn open(&self, key: &TrialKey, attempt: u32, policy: SessionPolicy) -> Result<Session, HarnessError> {
        let stream = TcpStream::connect(&self.addr)
            .and_then(StreamLink::tcp)
            .map_err(|e| HarnessError::Agent(format!("cannot connect to {}: {e}", self.addr)))?;
        Ok(Session::new(session_id(key, attempt), Box::new(stream), policy))
    }
}

/// Runs every trial over one already-connected session, as when an agent
/// dials in to the harness. Needs `concurrency = 1`.
pub struct ConnectedFactory {
    pub agent_id: String,
    pub population: Population,
    slot: Mutex<Option<Session>>,
}

impl ConnectedFactory {
    pub fn new(agent_id: impl Into<String>, session: Session) -> Self {
        Self {
            agent_id: agent_id.into(),
            population: Population::Llm,
            slot: Mutex::new(Some(session)),
        }
    }

    pub fn with_population(mut self, population: Population) -> Self {
        self.population = population;
        self
    }

    pub fn into_session(self) -> Option<Session> {
        self.slot.into_inner().ok().flatten()
    }
}

impl SessionFactory for ConnectedFactory {
    fn agent_id(&self) -> String {
        self.agent_id.clone()
    }

    fn population(&self) -> Population {
        self.population
    }

    fn open(&self, _key: &TrialKey, _attempt: u32, _policy: SessionPolicy) -> Result<Session, HarnessError> {
        let mut s = self
            .slot
            .lock()
            .unwrap()
            .take()
            .ok_or_else(|| HarnessError::Config("connected agent is already in a trial".into()))?;
        s.reset_failures();
        Ok(s)
    }

    fn close(&self, session: Session) {
        *self.slot.lock().unwrap() = Some(session);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaunchEvent {
    pub task_id: String,
    pub trial_index: u32,
    /// Launch that was discarded, from zero.
    pub attempt: u32,
    pub failures: u32,
}

#[derive(Clone, Debug, Default)]
pub struct SuiteOutcome {
    pub records: Vec<TrialRecord>,
    pub relaunches: Vec<RelaunchEvent>,
}

/// Schedule of a suite: every task in order, each repeated
/// `trials_per_task` times.
pub fn schedule(config: &SuiteConfig, pack: &TaskPack) -> Result<Vec<TrialKey>, HarnessError> {
    let tasks = config.resolve_tasks(pack)?;
    Ok(tasks
        .iter()
        .flat_map(|t| {
            (0..config.trials_per_task).map(move |i| TrialKey {
                task_id: t.clone(),
                trial_index: i,
                seed: trial_seed(config.seed, t, i),
            })
        })
        .collect())
}

/// Runs a suite. Transcripts go under `out/transcripts` when `out` is set.
/// Each episode starts from an empty conversation.
pub fn run_suite(
    config: &SuiteConfig,
    factory: &dyn SessionFactory,
    out: Option<&Path>,
) -> Result<SuiteOutcome, HarnessError> {
    let pack = config.pack()?;
    let keys = schedule(config, &pack)?;
    let template = PromptTemplate::new(config.mode, &config.camera)?;
    template.validate()?;

    let slots: Vec<Mutex<Option<Result<(TrialRecord, Vec<RelaunchEvent>), HarnessError>>>> =
        keys.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.concurrency.min(keys.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(key) = keys.get(i) else { break };
                let result = run_trial(config, &pack, &template, factory, key, out);
                let failed = result.is_err();
                *slots[i].lock().unwrap() = Some(result);
                if failed {
                    next.store(keys.len(), Ordering::SeqCst);
                }
            });
        }
    });

    let mut outcome = SuiteOutcome::default();
    for slot in slots {
        match slot.into_inner().unwrap() {
            Some(Ok((record, events))) => {
                outcome.records.push(record);
                outcome.relaunches.extend(events);
            }
            Some(Err(e)) => return Err(e),
            None => {}
        }
    }
    if let Some(dir) = out {
        write_relaunch_log(dir, &outcome.relaunches)?;
    }
    Ok(outcome)
}

fn run_trial(
    config: &SuiteConfig,
    pack: &TaskPack,
    template: &PromptTemplate,
    factory: &dyn SessionFactory,
    key: &TrialKey,
    out: Option<&Path>,
) -> Result<(TrialRecord, Vec<RelaunchEvent>), HarnessError> {
    let spec = pack
        .get(&key.task_id)
        .ok_or_else(|| HarnessError::Config(format!("task `{}` is not in the pack", key.task_id)))?;
    let episode = EpisodeConfig {
        camera: config.camera,
        physics: PhysicsConfig::default(),
        seed: key.seed,
        trial_index: key.trial_index,
        agent_id: factory.agent_id(),
        population: factory.population(),
    };
    let mut events = Vec::new();
    for attempt in 0..=config.max_relaunches {
        let mut session = factory.open(key, attempt, config.policy)?;
        if let Some(dir) = out {
            let header = TranscriptHeader {
                format: TRANSCRIPT_VERSION.into(),
                session_id: session.id().to_string(),
                agent_id: episode.agent_id.clone(),
                task_id: key.task_id.clone(),
                trial_index: key.trial_index,
                attempt,
                seed: key.seed,
                mode: config.mode.as_str().into(),
            };
            let path = transcript_path(dir, key, attempt);
            let writer = TranscriptWriter::create(&path, &header, config.transcript_images)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
            session.set_transcript(Some(writer));
        }
        let config_json = serde_json::json!({
            "task_id": key.task_id,
            "trial_index": key.trial_index,
            "mode": config.mode.as_str(),
            "max_scripts_per_episode": config.policy.max_scripts_per_episode,
            "width": config.camera.width,
            "height": config.camera.height,
        });
        let result = session
            .hello(&config.suite_id, config_json)
            .map_err(HarnessError::from)
            .and_then(|_| run_episode(spec, &mut session, template, &episode));
        match result {
            Ok(r) => {
                factory.close(session);
                let mut record = r.record;
                record.relaunches = Some(attempt);
                return Ok((record, events));
            }
            Err(HarnessError::Session(SessionError::TrialDiscarded { failures })) => {
                if let Ok(Some(w)) = session.take_transcript() {
                    let _ = w.abandon();
                }
                factory.close(session);
                log::warn!(
                    "trial {} #{} discarded after {failures} consecutive agent failures (launch {attempt}); relaunching",
                    key.task_id,
                    key.trial_index
                );
                events.push(RelaunchEvent {
                    task_id: key.task_id.clone(),
                    trial_index: key.trial_index,
                    attempt,
                    failures,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let mut record = TrialRecord::new(&episode.agent_id, episode.population, &key.task_id, false);
    record.trial_index = Some(key.trial_index);
    record.termination = Some("discarded".into());
    record.relaunches = Some(config.max_relaunches);
    record.scripts_used = Some(0);
    Ok((record, events))
}

pub fn transcript_path(dir: &Path, key: &TrialKey, attempt: u32) -> PathBuf {
    dir.join("transcripts")
        .join(format!("{}_t{}_a{}.ndjson", key.task_id, key.trial_index, attempt))
}

fn write_relaunch_log(dir: &Path, events: &[RelaunchEvent]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(e.to_string()))?;
    let mut text = String::new();
    for e in events {
        text.push_str(&serde_json::to_string(e).map_err(|e| HarnessError::Io(e.to_string()))?);
        text.push('\n');
    }
    std::fs::write(dir.join("relaunches.ndjson"), text).map_err(|e| HarnessError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_and_icl_schedules() {
        let pack = TaskPack::bundled().unwrap();
        let default = schedule(&SuiteConfig::default(), &pack).unwrap();
        assert_eq!(default.len(), 120);
        let icl = schedule(&SuiteConfig::icl(), &pack).unwrap();
        assert_eq!(icl.len(), 36);
        let one = SuiteConfig {
            trials_per_task: 1,
            ..SuiteConfig::default()
        };
        assert_eq!(schedule(&one, &pack).unwrap().len(), 40);
    }

    #[test]
    fn config_errors() {
        let pack = TaskPack::bundled().unwrap();
        let zero = SuiteConfig {
            trials_per_task: 0,
            ..SuiteConfig::default()
        };
        assert!(matches!(zero.resolve_tasks(&pack), Err(HarnessError::Config(_))));
        let missing = SuiteConfig {
            tasks: vec!["l99_nothing".into()],
            ..SuiteConfig::default()
        };
        assert!(matches!(missing.resolve_tasks(&pack), Err(HarnessError::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let text = "suite_id = \"x\"\nlevels = [1, 2]\ntrials_per_task = 2\nseed = 9\nmode = \"icl\"\n\n[camera]\nwidth = 64\nheight = 64\n\n[policy]\nmax_scripts_per_episode = 10\n";
        let c = SuiteConfig::from_toml(text).unwrap();
        assert_eq!(c.camera.width, 64);
        assert_eq!(c.camera.horizontal_fov, 60.0);
        assert_eq!(c.policy.max_agent_failures, 3);
        assert_eq!(c.mode, PromptMode::Icl);
        let back = SuiteConfig::from_toml(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(SuiteConfig::from_toml("trails = 3\n").is_err());
    }

    #[test]
    fn trial_seeds_differ() {
        assert_ne!(trial_seed(0, "l01_task1", 0), trial_seed(0, "l01_task1", 1));
        assert_ne!(trial_seed(0, "l01_task1", 0), trial_seed(1, "l01_task1", 0));
        assert_eq!(trial_seed(5, "a", 2), trial_seed(5, "a", 2));
    }
}
