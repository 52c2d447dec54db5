//! Browser play: static client assets over HTTP and a websocket at `/ws`
//! that carries the same NDJSON records as the TCP endpoint, one record per
//! text frame.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use arenabench::harness::SuiteConfig;
use arenabench::protocol::{ChannelLink, Session};
use arenabench::stats::Population;
use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::sync::mpsc;
use tower_http::services::ServeDir;

const PLACEHOLDER_INDEX: &str = include_str!("../assets/index.html");

struct BridgeState {
    config: SuiteConfig,
    out: PathBuf,
    agent_id: Option<String>,
}

pub fn serve_human(
    config: SuiteConfig,
    out: PathBuf,
    addr: &str,
    assets: Option<PathBuf>,
    agent_id: Option<String>,
) -> Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        let local: SocketAddr = listener.local_addr()?;
        println!("listening on http://{local}");
        {
            use std::io::Write;
            std::io::stdout().flush()?;
        }
        let app = router(
            Arc::new(BridgeState {
                config,
                out,
                agent_id,
            }),
            assets,
        );
        axum::serve(listener, app).await?;
        Ok(())
    })
}

fn router(state: Arc<BridgeState>, assets: Option<PathBuf>) -> Router {
    let app = Router::new().route("/ws", get(upgrade)).with_state(state);
    match assets {
        Some(dir) => app.fallback_service(ServeDir::new(dir).fallback(get(placeholder))),
        None => app.fallback(placeholder),
    }
}

async fn placeholder() -> Html<&'static str> {
    Html(PLACEHOLDER_INDEX)
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<Arc<BridgeState>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| play(socket, state))
}

async fn play(socket: WebSocket, state: Arc<BridgeState>) {
    let (link, peer) = ChannelLink::pair();
    let id = uuid::Uuid::new_v4().to_string();
    let session = Session::new(id.clone(), Box::new(link), state.config.policy);
    let agent_id = state
        .agent_id
        .clone()
        .unwrap_or_else(|| format!("human-{}", &id[..8]));
    log::info!("browser session {id} as {agent_id}");

    let suite_state = state.clone();
    let suite = tokio::task::spawn_blocking(move || {
        crate::commands::run_connected(
            &suite_state.config,
            &suite_state.out,
            agent_id,
            Population::Child,
            session,
        )
    });

    let (to_ws, mut from_harness) = mpsc::unbounded_channel::<String>();
    let outgoing = peer.outgoing;
    let inbox = peer.incoming;
    std::thread::spawn(move || {
        while let Ok(line) = outgoing.recv() {
            if to_ws.send(line).is_err() {
                break;
            }
        }
    });

    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(line) = from_harness.recv().await {
            let text = line.trim_end_matches('\n').to_string();
            if sink.send(WsMessage::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.send(WsMessage::Close(None)).await;
    });
    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            WsMessage::Text(t) => {
                if !inbox.deliver(t.to_string()) {
                    break;
                }
            }
            WsMessage::Close(_) => break,
            _ => {}
        }
    }
    drop(inbox);
    let _ = writer.await;
    match suite.await {
        Ok(Ok(o)) => log::info!("browser session {id}: {} trials", o.records.len()),
        Ok(Err(e)) => log::error!("browser session {id}: {e:#}"),
        Err(e) => log::error!("browser session {id}: {e}"),
    }
}
