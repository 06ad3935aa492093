//! Starts the WebSocket server on a free port, connects as a client and
//! prints a few snapshots before pausing the run.

use apfwf::server::{start, ServeConfig};
use apfwf::sim::{generate_instance, Layout};
use futures::{SinkExt, StreamExt};
use tokio_tungstenite::tungstenite::Message;

#[tokio::main]
async fn main() -> apfwf::Result<()> {
    let cfg = ServeConfig { addr: ([127, 0, 0, 1], 0).into(), speed: 5.0, ..ServeConfig::default() };
    let server = start(generate_instance(&Layout::Swap, 6, 0)?, cfg).await?;
    println!("listening on ws://{}/ws", server.addr);

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/ws", server.addr)).await.expect("server is up");
    let mut snapshots = 0;
    while let Some(Ok(Message::Text(text))) = ws.next().await {
        let msg: serde_json::Value = serde_json::from_str(&text)?;
        match msg["type"].as_str() {
            Some("world") => println!("world with {} obstacles", msg["world"]["obstacles"].as_array().map_or(0, Vec::len)),
            Some("snapshot") => {
                let r0 = &msg["robots"][0];
                println!("t={:<3} robot 0 at ({:+.2}, {:+.2}) mode {}", msg["t"], r0["x"].as_f64().unwrap(), r0["y"].as_f64().unwrap(), r0["mode"]);
                snapshots += 1;
                if snapshots == 10 {
                    ws.send(Message::Text(r#"{"type":"control","action":"pause"}"#.into())).await.ok();
                }
            }
            _ => {
                println!("{text}");
                break;
            }
        }
    }
    server.abort();
    Ok(())
}

