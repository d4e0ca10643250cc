//! Generator side of protocol v1, used by the built-in echo and cone
//! generators, in process or behind the CLI.

use std::io::{BufRead, BufReader, Write};
use std::thread;

use super::protocol::{GeneratorResponse, Message, RequestKind, PROTOCOL_VERSION};
use super::session::{Session, SessionOptions};
use super::BridgeError;
use crate::latent::LatentSpec;

pub trait Generator {
    /// Returns `(object_handle, score)` or an error message for the client.
    fn handle(&mut self, id: u64, kind: RequestKind, latent: &[f64]) -> Result<(Option<String>, Option<f64>), String>;
}

/// Echoes the first latent coordinate back as the score.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoGenerator;

impl Generator for EchoGenerator {
    fn handle(&mut self, id: u64, kind: RequestKind, latent: &[f64]) -> Result<(Option<String>, Option<f64>), String> {
        let first = *latent.first().ok_or("empty latent")?;
        let handle = format!("echo:{id}");
        Ok(match kind {
            RequestKind::Generate => (Some(handle), None),
            RequestKind::Score => (None, Some(first)),
            RequestKind::GenerateAndScore => (Some(handle), Some(first)),
        })
    }
}

fn write_msg<W: Write>(out: &mut W, msg: &Message) -> std::io::Result<()> {
    out.write_all(msg.to_line().as_bytes())?;
    out.flush()
}

/// Answer requests until `shutdown` or end of input. Malformed lines get an
/// `error` message instead of being dropped.
pub fn serve<R: BufRead, W: Write, G: Generator>(mut input: R, mut output: W, generator: &mut G) -> std::io::Result<()> {
    let mut dim: Option<usize> = None;
    let mut line = String::new();
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Ok(());
        }
        if line.trim().is_empty() {
            continue;
        }
        let reply = match Message::parse(&line) {
            Ok(Message::Hello { protocol_version, spec }) => {
                if protocol_version != PROTOCOL_VERSION {
                    Message::Error { id: None, message: format!("unsupported protocol version {protocol_version}") }
                } else {
                    dim = spec.map(|s| s.total_dim());
                    Message::Hello { protocol_version: PROTOCOL_VERSION, spec: None }
                }
            }
            Ok(Message::Request(req)) => {
                let outcome = req
                    .latent
                    .decode()
                    .map_err(|e| e.to_string())
                    .and_then(|z| match dim {
                        Some(d) if d != z.len() => Err(format!("latent has {} coordinates, spec has {d}", z.len())),
                        _ => Ok(z),
                    })
                    .and_then(|z| generator.handle(req.id, req.kind, &z));
                Message::Response(match outcome {
                    Ok((object_handle, score)) => GeneratorResponse { id: req.id, object_handle, score, error: None },
                    Err(e) => GeneratorResponse { id: req.id, object_handle: None, score: None, error: Some(e) },
                })
            }
            Ok(Message::Shutdown) => return Ok(()),
            Ok(other) => Message::Error { id: None, message: format!("unexpected message {other:?}") },
            Err(e) => Message::Error { id: None, message: e.to_string() },
        };
        write_msg(&mut output, &reply)?;
    }
}

/// Session talking to `generator` on a background thread over in-memory pipes.
pub fn in_process_session<G: Generator + Send + 'static>(
    mut generator: G,
    spec: LatentSpec,
    options: SessionOptions,
) -> Result<Session, BridgeError> {
    let (client_rx, server_tx) = std::io::pipe().map_err(|e| BridgeError::Io(e.to_string()))?;
    let (server_rx, client_tx) = std::io::pipe().map_err(|e| BridgeError::Io(e.to_string()))?;
    thread::spawn(move || {
        let _ = serve(BufReader::new(server_rx), server_tx, &mut generator);
    });
    Session::connect(client_rx, client_tx, spec, options)
}

pub fn echo_session(spec: LatentSpec, options: SessionOptions) -> Result<Session, BridgeError> {
    in_process_session(EchoGenerator, spec, options)
}
