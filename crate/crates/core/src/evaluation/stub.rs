//! Reference server for the external evaluator protocol, answering with
//! synthetic accuracies. Fault injection options exist for testing clients.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use rand::seq::SliceRandom;
use serde_json::json;

use crate::rng::stream;
use crate::space::Genome;

use super::{EvalRequest, SyntheticConfig, SyntheticLandscape};

#[derive(Debug, Clone, Default)]
pub struct StubOptions {
    pub synthetic: SyntheticConfig,
    /// Answer every request with this accuracy instead of the landscape.
    pub constant: Option<f64>,
    /// Hold answers until input has been idle for `idle`, then emit them in
    /// a shuffled order.
    pub shuffle: bool,
    pub shuffle_seed: u64,
    /// Ignore the first request carrying each of these ids.
    pub drop_once: Vec<u64>,
    /// Never answer these ids.
    pub drop_always: Vec<u64>,
    /// If this file does not exist, create it and exit with status 1 on the
    /// first request instead of answering.
    pub crash_marker: Option<PathBuf>,
}

const IDLE: Duration = Duration::from_millis(50);

fn answer(line: &str, opts: &StubOptions, landscape: &SyntheticLandscape, dropped: &mut HashSet<u64>) -> Option<String> {
    let req: EvalRequest = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(line).ok().and_then(|v| v.get("id")?.as_u64());
            return Some(json!({"id": id, "error": format!("bad request: {e}")}).to_string());
        }
    };
    if opts.drop_always.contains(&req.id) || (opts.drop_once.contains(&req.id) && dropped.insert(req.id)) {
        return None;
    }
    let genome = match Genome::decode_text(&req.genome) {
        Ok(g) => g,
        Err(e) => return Some(json!({"id": req.id, "error": e.to_string()}).to_string()),
    };
    let accuracy = opts.constant.unwrap_or_else(|| landscape.accuracy(&genome));
    Some(json!({"id": req.id, "accuracy": accuracy, "extras": {}}).to_string())
}

/// Serves requests from `input` until it closes.
pub fn serve<R, W>(input: R, mut output: W, opts: &StubOptions) -> std::io::Result<()>
where
    R: Read + Send + 'static,
    W: Write,
{
    let landscape = SyntheticLandscape::new(opts.synthetic.clone());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(input).lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });

    let mut rng = stream(opts.shuffle_seed, "stub-shuffle", 0);
    let mut held: Vec<String> = Vec::new();
    let mut dropped = HashSet::new();
    let mut flush = |held: &mut Vec<String>, out: &mut W| -> std::io::Result<()> {
        held.shuffle(&mut rng);
        for line in held.drain(..) {
            writeln!(out, "{line}")?;
        }
        out.flush()
    };

    loop {
        let next = if held.is_empty() {
            rx.recv().map_err(|_| RecvTimeoutError::Disconnected)
        } else {
            rx.recv_timeout(IDLE)
        };
        match next {
            Ok(line) => {
                if line.trim().is_empty() {
                    continue;
                }
                if let Some(marker) = &opts.crash_marker {
                    if !marker.exists() {
                        std::fs::write(marker, b"crashed\n")?;
                        std::process::exit(1);
                    }
                }
                let Some(reply) = answer(&line, opts, &landscape, &mut dropped) else { continue };
                if opts.shuffle {
                    held.push(reply);
                } else {
                    writeln!(output, "{reply}")?;
                    output.flush()?;
                }
            }
            Err(RecvTimeoutError::Timeout) => flush(&mut held, &mut output)?,
            Err(RecvTimeoutError::Disconnected) => return flush(&mut held, &mut output),
        }
    }
}

extern "C" fn exit_cleanly(_signal: libc::c_int) {
    // only async-signal-safe calls are allowed here
    unsafe { libc::_exit(0) }
}

/// Makes SIGTERM end the process with status 0.
pub fn exit_on_sigterm() {
    let handler: extern "C" fn(libc::c_int) = exit_cleanly;
    unsafe {
        libc::signal(libc::SIGTERM, handler as libc::sighandler_t);
    }
}
