use std::io::{BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use arenabench::agents::{run_agent_loop, AgentBehavior};
use arenabench::arena::{load_arena, to_text, Arena, ArenaSpec, PhysicsConfig};
use arenabench::dsl::{compile, parse, MotionConfig};
use arenabench::harness::{
    import_aai_yaml, run_suite, BuiltinFactory, ConnectedFactory, ProcessFactory, PromptMode,
    SessionFactory, SuiteConfig, SuiteOutcome, TaskPack, TcpFactory, TUTORIAL_ID,
};
use arenabench::protocol::{serve as serve_sessions, Endpoint, Session};
use arenabench::render::{encode_png, render as render_view, render_topdown, CameraModel};
use arenabench::stats::{
    aggregate, emit_report, export_csv, ingest_external_csv, load_records, Population,
    ReportFormat, TrialRecord,
};

use crate::{bridge, AgentArgs, ImportArgs, RenderArgs, ReportArgs, RunArgs, ServeArgs, SuiteArgs};

pub fn dsl_check(file: &str, inline: Option<&str>) -> Result<i32> {
    let text = match inline {
        Some(t) => t.to_string(),
        None if file == "-" => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            s
        }
        None => std::fs::read_to_string(file).with_context(|| format!("reading {file}"))?,
    };
    match parse(&text) {
        Ok(script) => {
            let motion = MotionConfig::default();
            println!("{script}");
            println!("{}", compile(&script, &motion).summary(&motion));
            Ok(0)
        }
        Err(e) => {
            eprintln!("{e}");
            Ok(1)
        }
    }
}

fn load_task(task: &str) -> Result<ArenaSpec> {
    let path = Path::new(task);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return load_arena(&text).with_context(|| format!("loading {task}"));
    }
    if task == TUTORIAL_ID {
        return Ok(TaskPack::tutorial()?);
    }
    TaskPack::bundled()?
        .get(task)
        .cloned()
        .ok_or_else(|| anyhow!("no task `{task}` in the bundled pack and no such file"))
}

pub fn render(a: RenderArgs) -> Result<i32> {
    let spec = load_task(&a.task)?;
    let physics = PhysicsConfig::default();
    let arena = Arena::new(spec.clone(), physics);
    let mut state = arena.initial_state(0);
    if let Some(text) = &a.script {
        let script = parse(text).map_err(|e| anyhow!("{e}"))?;
        let motion = MotionConfig {
            step_length: physics.step_length,
        };
        for frame in compile(&script, &motion).frames {
            if !state.is_running() {
                break;
            }
            state = arena.step(&state, frame)?.0;
        }
    }
    let image = if a.topdown {
        render_topdown(&state, &spec)
    } else {
        let camera = CameraModel::with_resolution(a.width, a.height);
        camera.validate()?;
        render_view(&state, &spec, &camera)
    };
    std::fs::write(&a.out, encode_png(&image)?).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "{} {}x{} step {} reward {:.4} health {:.1}",
        a.out.display(),
        image.width,
        image.height,
        state.step,
        state.cumulative_reward,
        state.health
    );
    Ok(0)
}

fn suite_config(a: &SuiteArgs) -> Result<SuiteConfig> {
    let mode = match &a.mode {
        Some(m) => Some(m.parse::<PromptMode>().map_err(|e| anyhow!("{e}"))?),
        None => None,
    };
    let mut cfg = match (&a.suite, mode) {
        (Some(p), _) => SuiteConfig::load(p)?,
        (None, Some(PromptMode::Icl)) => SuiteConfig::icl(),
        (None, _) => SuiteConfig::default(),
    };
    if let Some(m) = mode {
        cfg.mode = m;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.trials {
        cfg.trials_per_task = t;
    }
    if !a.levels.is_empty() {
        cfg.levels = a.levels.clone();
    }
    if !a.tasks.is_empty() {
        cfg.tasks = a.tasks.clone();
    }
    if let Some(w) = a.width {
        cfg.camera.width = w;
    }
    if let Some(h) = a.height {
        cfg.camera.height = h;
    }
    if a.transcript_images {
        cfg.transcript_images = true;
    }
    Ok(cfg)
}

fn out_dir(a: &SuiteArgs) -> PathBuf {
    a.out.clone().unwrap_or_else(|| PathBuf::from("results"))
}

/// Writes records and both report forms; returns the table.
pub(crate) fn write_results(dir: &Path, records: &[TrialRecord]) -> Result<String> {
    std::fs::create_dir_all(dir)?;
    export_csv(records, std::fs::File::create(dir.join("records.csv"))?)?;
    if records.is_empty() {
        return Ok(String::new());
    }
    let summaries = aggregate(records)?;
    let table = emit_report(&summaries, ReportFormat::Table);
    std::fs::write(dir.join("report.txt"), &table)?;
    std::fs::write(dir.join("report.csv"), emit_report(&summaries, ReportFormat::Data))?;
    Ok(table)
}

fn factory_for(spec: &str, agent_id: Option<String>) -> Result<Box<dyn SessionFactory>> {
    if let Some(cmd) = spec.strip_prefix("exec:") {
        let mut words = cmd.split_whitespace().map(String::from);
        let program = words.next().ok_or_else(|| anyhow!("exec: needs a command"))?;
        return Ok(Box::new(ProcessFactory {
            agent_id: agent_id.unwrap_or_else(|| program.clone()),
            program,
            args: words.collect(),
        }));
    }
    if let Some(addr) = spec.strip_prefix("tcp:") {
        return Ok(Box::new(TcpFactory {
            agent_id: agent_id.unwrap_or_else(|| addr.to_string()),
            addr: addr.to_string(),
        }));
    }
    Ok(Box::new(BuiltinFactory {
        behavior: AgentBehavior::parse(spec)?,
    }))
}

fn summarise_outcome(outcome: &SuiteOutcome) -> String {
    let passed = outcome.records.iter().filter(|r| r.passed).count();
    format!(
        "{} trials, {} passed, {} relaunches",
        outcome.records.len(),
        passed,
        outcome.relaunches.len()
    )
}

pub fn run(a: RunArgs) -> Result<i32> {
    let mut cfg = suite_config(&a.suite)?;
    if let Some(c) = a.concurrency {
        cfg.concurrency = c;
    }
    let out = out_dir(&a.suite);
    let factory = factory_for(&a.agent, a.agent_id)?;
    let started = std::time::Instant::now();
    let outcome = run_suite(&cfg, factory.as_ref(), Some(&out))?;
    let table = write_results(&out, &outcome.records)?;
    print!("{table}");
    println!(
        "{} in {:.2}s, results in {}",
        summarise_outcome(&outcome),
        started.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(0)
}

/// Runs the whole suite over one connected session and stores its results
/// under `out/<session id>`.
pub(crate) fn run_connected(
    cfg: &SuiteConfig,
    out: &Path,
    agent_id: String,
    population: Population,
    session: Session,
) -> Result<SuiteOutcome> {
    let dir = out.join(session.id());
    let mut cfg = cfg.clone();
    cfg.concurrency = 1;
    let factory = ConnectedFactory::new(agent_id, session).with_population(population);
    let outcome = run_suite(&cfg, &factory, Some(&dir))?;
    write_results(&dir, &outcome.records)?;
    Ok(outcome)
}

pub fn serve(a: ServeArgs) -> Result<i32> {
    let cfg = suite_config(&a.suite)?;
    let out = out_dir(&a.suite);
    if a.human {
        let addr = a.http.clone().expect("clap enforces --http");
        bridge::serve_human(cfg, out, &addr, a.assets.clone(), a.agent_id.clone())?;
        return Ok(0);
    }
    let endpoint = match (&a.bind, a.stdio) {
        (Some(addr), false) => Endpoint::Tcp(addr.clone()),
        (None, true) => Endpoint::Stdio,
        _ => bail!("give exactly one of --bind, --stdio or --human --http"),
    };
    let policy = cfg.policy;
    let fixed_id = a.agent_id.clone();
    let handler_cfg = cfg.clone();
    let handler_out = out.clone();
    let handler = Arc::new(move |session: Session| {
        let id = session.id().to_string();
        let agent_id = fixed_id.clone().unwrap_or_else(|| format!("remote-{id}"));
        match run_connected(&handler_cfg, &handler_out, agent_id, Population::Llm, session) {
            Ok(o) => log::info!("session {id}: {}", summarise_outcome(&o)),
            Err(e) => log::error!("session {id}: {e:#}"),
        }
    });
    let handle = serve_sessions(&endpoint, policy, handler)?;
    if let Some(addr) = handle.local_addr() {
        println!("listening on {addr}");
        std::io::stdout().flush()?;
    }
    handle.wait();
    Ok(0)
}

fn load_input(path: &Path) -> Result<Vec<TrialRecord>> {
    let nested = path.join("records.csv");
    let target = if path.is_dir() && !nested.is_file() {
        path.to_path_buf()
    } else if path.is_dir() {
        nested
    } else {
        path.to_path_buf()
    };
    load_records(&target).with_context(|| format!("reading {}", path.display()))
}

pub fn report(a: ReportArgs) -> Result<i32> {
    let format: ReportFormat = a.format.parse().map_err(|e| anyhow!("{e}"))?;
    let mut records = Vec::new();
    for p in &a.inputs {
        records.extend(load_input(p)?);
    }
    for p in &a.baseline {
        let f = std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
        records.extend(ingest_external_csv(f).with_context(|| format!("reading {}", p.display()))?);
    }
    let text = emit_report(&aggregate(&records)?, format);
    match &a.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

pub fn agent(a: AgentArgs) -> Result<i32> {
    let behavior = AgentBehavior::parse(&a.agent)?;
    if matches!(behavior, AgentBehavior::GreedyOracle { .. }) {
        bail!("the oracle reads the world state and only runs inside the harness");
    }
    let mut agent = behavior.with_seed(a.seed).build()?;
    match &a.connect {
        Some(addr) => {
            let stream = TcpStream::connect(addr).with_context(|| format!("connecting to {addr}"))?;
            let reader = BufReader::new(stream.try_clone()?);
            run_agent_loop(agent.as_mut(), reader, stream)?;
        }
        None => {
            let stdin = std::io::stdin();
            run_agent_loop(agent.as_mut(), stdin.lock(), std::io::stdout())?;
        }
    }
    Ok(0)
}

pub fn import(a: ImportArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    let mut spec = match import_aai_yaml(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", a.file.display());
            return Ok(1);
        }
    };
    spec.id = a.id.unwrap_or_else(|| {
        a.file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "imported".into())
    });
    let out = to_text(&spec);
    match &a.out {
        Some(p) => std::fs::write(p, out)?,
        None => print!("{out}"),
    }
    Ok(0)
}

pub fn validate(files: &[PathBuf]) -> Result<i32> {
    let mut code = 0;
    for f in files {
        let result = std::fs::read_to_string(f)
            .map_err(|e| e.to_string())
            .and_then(|t| load_arena(&t).map_err(|e| e.to_string()))
            .and_then(|s| s.validate().map(|_| s).map_err(|e| e.to_string()));
        match result {
            Ok(s) => println!("{}: ok ({}, {} objects)", f.display(), s.id, s.objects.len()),
            Err(e) => {
                println!("{}: {e}", f.display());
                code = 1;
            }
        }
    }
    Ok(code)
}
