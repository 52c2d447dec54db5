use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use arenabench::protocol::{decode_line, encode_line, Envelope, Message};

const BIN: &str = env!("CARGO_BIN_EXE_arenabench");

struct Server {
    child: Child,
    addr: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Starts `arenabench` with `args` and waits for its "listening on" line.
fn start(args: &[&str]) -> Server {
    let mut child = Command::new(BIN)
        .args(args)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
        .trim_start_matches("http://")
        .to_string();
    Server { child, addr }
}

fn http_get(addr: &str, path: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    let status = resp[9..12].parse().unwrap();
    let body = resp.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}

fn action(session_id: &str, seq: u64, text: &str) -> String {
    encode_line(&Envelope {
        session_id: session_id.into(),
        seq,
        body: Message::Action {
            raw_script_text: text.into(),
        },
    })
}

fn session_dir(out: &Path) -> std::path::PathBuf {
    let dirs: Vec<_> = std::fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

const SMALL: [&str; 8] = [
    "--tasks", "l01_task1", "--trials", "1", "--width", "32", "--height", "32",
];

#[test]
fn http_serves_assets_with_placeholder_fallback() {
    let assets = tempfile::tempdir().unwrap();
    std::fs::write(assets.path().join("app.js"), "console.log('client');").unwrap();
    let out = tempfile::tempdir().unwrap();
    let server = start(&[
        "serve",
        "--human",
        "--http",
        "127.0.0.1:0",
        "--assets",
        assets.path().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    let (status, body) = http_get(&server.addr, "/app.js");
    assert_eq!(status, 200);
    assert_eq!(body, "console.log('client');");
    let (status, body) = http_get(&server.addr, "/");
    assert_eq!(status, 200);
    assert!(body.contains("<h1>arenabench</h1>"));
}

#[test]
fn websocket_bridge_runs_a_trial_as_a_child_participant() {
    let out = tempfile::tempdir().unwrap();
    let mut args = vec!["serve", "--human", "--http", "127.0.0.1:0", "--out"];
    args.push(out.path().to_str().unwrap());
    args.extend(SMALL);
    let server = start(&args);
    let (mut ws, _) = tungstenite::connect(format!("ws://{}/ws", server.addr)).unwrap();
    let mut seq = 0;
    let mut kinds = Vec::new();
    let mut ended = None;
    loop {
        let msg = match ws.read() {
            Ok(m) => m,
            Err(_) => break,
        };
        let text = match msg {
            tungstenite::Message::Text(t) => t.to_string(),
            tungstenite::Message::Close(_) => break,
            _ => continue,
        };
        assert!(!text.contains('\n'));
        let env = decode_line(&text).unwrap();
        kinds.push(env.body.kind());
        match env.body {
            Message::Observation(obs) => {
                assert_eq!((obs.width, obs.height), (32, 32));
                seq += 1;
                let line = action(&env.session_id, seq, "Go(10);");
                ws.send(tungstenite::Message::Text(line.trim_end().into())).unwrap();
            }
            Message::EpisodeEnd { passed, reason, .. } => ended = Some((passed, reason)),
            _ => {}
        }
    }
    assert_eq!(kinds.first(), Some(&"session_hello"));
    assert!(ended.is_some(), "{kinds:?}");
    let records = std::fs::read_to_string(session_dir(out.path()).join("records.csv")).unwrap();
    let row = records.lines().nth(1).unwrap();
    assert!(row.contains(",child,l01_task1,"), "{row}");
    assert!(row.starts_with("human-"));
}

#[test]
fn agent_process_plays_against_tcp_server() {
    let out = tempfile::tempdir().unwrap();
    let mut args = vec!["serve", "--bind", "127.0.0.1:0", "--out"];
    args.push(out.path().to_str().unwrap());
    args.extend(SMALL);
    let server = start(&args);
    let status = Command::new(BIN)
        .args(["agent", "random", "--seed", "3", "--connect", &server.addr])
        .status()
        .unwrap();
    assert!(status.success());
    let dir = session_dir(out.path());
    let records = std::fs::read_to_string(dir.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 2);
    assert!(dir.join("transcripts/l01_task1_t0_a0.ndjson").is_file());
}

#[test]
fn stdio_server_writes_only_protocol_records() {
    let out = tempfile::tempdir().unwrap();
    let mut child = Command::new(BIN)
        .args(["serve", "--stdio", "--out", out.path().to_str().unwrap()])
        .args(SMALL)
        .env("RUST_LOG", "info")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let reader = BufReader::new(child.stdout.take().unwrap());
    let mut seq = 0;
    let mut saw_end = false;
    for line in reader.lines() {
        let env = decode_line(&line.unwrap()).expect("stdout carries only records");
        match env.body {
            Message::Observation(_) => {
                seq += 1;
                stdin.write_all(action(&env.session_id, seq, "Go(10);").as_bytes()).unwrap();
                stdin.flush().unwrap();
            }
            Message::EpisodeEnd { .. } => {
                saw_end = true;
                drop(stdin);
                break;
            }
            _ => {}
        }
    }
    assert!(saw_end);
    assert!(child.wait().unwrap().success());
    assert!(session_dir(out.path()).join("records.csv").is_file());
}

#[test]
fn run_with_external_agent_process() {
    let out = tempfile::tempdir().unwrap();
    let agent = format!("exec:{BIN} agent random");
    let status = Command::new(BIN)
        .args(["run", "--agent", &agent, "--agent-id", "rnd", "--out"])
        .arg(out.path())
        .args(SMALL)
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    let records = std::fs::read_to_string(out.path().join("records.csv")).unwrap();
    assert!(records.lines().nth(1).unwrap().starts_with("rnd,llm,l01_task1,"));
    assert!(out.path().join("report.txt").is_file());
    assert!(out.path().join("report.csv").is_file());
}

#[test]
fn results_dir_comes_from_environment() {
    let out = tempfile::tempdir().unwrap();
    let status = Command::new(BIN)
        .args(["run", "--agent", "oracle"])
        .args(SMALL)
        .env("ARENABENCH_RESULTS_DIR", out.path())
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.path().join("records.csv").is_file());
}

#[test]
fn dsl_check_reports_canonical_form_and_errors() {
    let ok = Command::new(BIN)
        .args(["dsl", "check", "--text", "Go( 3 ) ; Turn(-40);"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.starts_with("Go(3);Turn(-40);\n"), "{text}");
    assert!(text.contains("rotation -36 deg"));
    let bad = Command::new(BIN).args(["dsl", "check", "--text", "Jump(3);"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(!bad.stderr.is_empty());
}

#[test]
fn render_import_validate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("f.png");
    let st = Command::new(BIN)
        .args(["render", "--task", "l01_task1", "--width", "48", "--height", "24", "--out"])
        .arg(&png)
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert!(st.success());
    assert_eq!(&std::fs::read(&png).unwrap()[1..4], b"PNG");

    let yaml = dir.path().join("food.yml");
    std::fs::write(
        &yaml,
        "!ArenaConfig\narenas:\n  0: !Arena\n    t: 300\n    items:\n    - !Item\n      name: Agent\n      positions:\n      - !Vector3 {x: 20, y: 0, z: 5}\n    - !Item\n      name: GoodGoal\n      positions:\n      - !Vector3 {x: 20, y: 0, z: 30}\n",
    )
    .unwrap();
    let arena = dir.path().join("food.arena");
    let st = Command::new(BIN).arg("import").arg(&yaml).arg("--out").arg(&arena).status().unwrap();
    assert!(st.success());
    let v = Command::new(BIN).arg("validate").arg(&arena).output().unwrap();
    assert!(v.status.success());
    assert!(String::from_utf8(v.stdout).unwrap().contains("ok (food, 1 objects)"));

    let broken = dir.path().join("broken.arena");
    std::fs::write(&broken, "nonsense").unwrap();
    let v = Command::new(BIN).arg("validate").arg(&broken).output().unwrap();
    assert_eq!(v.status.code(), Some(1));

    let runs = dir.path().join("runs");
    Command::new(BIN)
        .args(["run", "--agent", "oracle", "--trials", "2", "--levels", "1", "--width", "32", "--height", "32", "--out"])
        .arg(&runs)
        .stdout(Stdio::null())
        .status()
        .unwrap();
    let kids = dir.path().join("kids.csv");
    std::fs::write(
        &kids,
        "participant_id,population,task_id,passed\nc1,child,l01_task1,true\nc1,child,l01_task2,false\nc2,child,l01_task1,true\nc2,child,l01_task2,true\n",
    )
    .unwrap();
    let r = Command::new(BIN)
        .args(["report", "--format", "data", "--in"])
        .arg(&runs)
        .arg("--baseline")
        .arg(&kids)
        .output()
        .unwrap();
    assert!(r.status.success());
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("1,baseline,oracle,8,")), "{text}");
    assert!(text.lines().any(|l| l.starts_with("1,child,,4,3,0.750000,2,0.750000")), "{text}");
}

#[test]
fn websocket_closes_when_client_leaves_early() {
    let out = tempfile::tempdir().unwrap();
    let mut args = vec!["serve", "--human", "--http", "127.0.0.1:0", "--out"];
    args.push(out.path().to_str().unwrap());
    args.extend(SMALL);
    let server = start(&args);
    let (mut ws, _) = tungstenite::connect(format!("ws://{}/ws", server.addr)).unwrap();
    let first = ws.read().unwrap();
    assert!(first.is_text());
    ws.close(None).unwrap();
    std::thread::sleep(Duration::from_millis(200));
    let (status, _) = http_get(&server.addr, "/");
    assert_eq!(status, 200);
}
