//! Reference implementation of the external emulator protocol.
//!
//! Fits a Gaussian to the training responses and answers predict requests
//! with draws from it. Flags inject failures for exercising the harness.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};

use duqbench::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Op {
    Fit,
    Predict,
}

#[derive(Parser)]
#[command(name = "duqbench-echo-emulator", about = "Minimal external emulator speaking line-delimited JSON")]
struct Args {
    /// Reply `{"ok": false}` to this operation.
    #[arg(long)]
    fail_at: Option<Op>,
    /// Exit with status 3 on receiving this operation.
    #[arg(long)]
    crash_at: Option<Op>,
    /// Sleep before answering this operation.
    #[arg(long)]
    sleep_at: Option<Op>,
    #[arg(long, default_value_t = 5.0)]
    sleep_secs: f64,
}

fn stage(op: Op) -> &'static str {
    match op {
        Op::Fit => "fit",
        Op::Predict => "pred",
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut models: Vec<(f64, f64)> = Vec::new();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Value>(&line) {
            Ok(req) => match handle(&args, &req, &mut models) {
                Some(r) => r,
                None => {
                    eprintln!("echo emulator: crashing as requested");
                    return ExitCode::from(3);
                }
            },
            Err(e) => json!({"ok": false, "stage": "fit", "msg": format!("bad request: {e}")}),
        };
        if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}

/// `None` means the process should crash.
fn handle(args: &Args, req: &Value, models: &mut Vec<(f64, f64)>) -> Option<Value> {
    let op = match req.get("op").and_then(Value::as_str) {
        Some("fit") => Op::Fit,
        Some("predict") => Op::Predict,
        other => return Some(json!({"ok": false, "stage": "fit", "msg": format!("unknown op {other:?}")})),
    };
    if args.crash_at == Some(op) {
        return None;
    }
    if args.sleep_at == Some(op) {
        thread::sleep(Duration::from_secs_f64(args.sleep_secs));
    }
    if args.fail_at == Some(op) {
        return Some(json!({"ok": false, "stage": stage(op), "msg": "failure injected by --fail-at"}));
    }
    Some(match op {
        Op::Fit => {
            let y: Vec<f64> = req
                .get("y")
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(Value::as_f64).collect())
                .unwrap_or_default();
            if y.is_empty() {
                return Some(json!({"ok": false, "stage": "fit", "msg": "no responses"}));
            }
            let n = y.len() as f64;
            let mean = y.iter().sum::<f64>() / n;
            let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            models.push((mean, sd));
            json!({"ok": true, "model_id": models.len() - 1})
        }
        Op::Predict => {
            let id = req.get("model_id").and_then(Value::as_u64).map(|i| i as usize);
            let Some(&(mean, sd)) = id.and_then(|i| models.get(i)) else {
                return Some(json!({"ok": false, "stage": "pred", "msg": "unknown model_id"}));
            };
            let n = req.get("X").and_then(Value::as_array).map_or(0, Vec::len);
            let m = req.get("M").and_then(Value::as_u64).unwrap_or(0) as usize;
            let mut rng = SplitMix64::new(req.get("seed").and_then(Value::as_u64).unwrap_or(0));
            let draws: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| mean + sd * rng.normal()).collect())
                .collect();
            json!({"ok": true, "draws": draws})
        }
    })
}
