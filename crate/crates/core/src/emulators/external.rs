//! Bridge to emulators running in a child process.
//!
//! The child reads one JSON object per line on stdin and answers with one
//! JSON object per line on stdout:
//!
//! ```text
//! {"op":"fit","X":[[..],..],"y":[..],"seed":N}          -> {"ok":true,"model_id":ID}
//! {"op":"predict","model_id":ID,"X":[[..]],"M":M,"seed":N} -> {"ok":true,"draws":[[..],..]}   (M rows)
//! any failure                                             -> {"ok":false,"stage":"fit"|"pred","msg":".."}
//! ```
//!
//! Hyperparameters other than `timeout` are forwarded in the fit request
//! under `"hyperparameters"`. One child serves a fitted model for its whole
//! lifetime and is killed when the model is dropped or a call times out.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use nalgebra::DMatrix;
use serde_json::{json, Value};

use super::{Emulator, EmulatorError, EmulatorSpec, Predictor, Stage};
use crate::error::{Error, Result};

const STDERR_KEEP: usize = 4096;

#[derive(Debug, Clone)]
pub struct External {
    pub command: Vec<String>,
    pub timeout: Option<Duration>,
    pub hyperparameters: BTreeMap<String, f64>,
}

impl External {
    pub fn from_spec(spec: &EmulatorSpec) -> Result<Self> {
        if spec.command.is_empty() {
            return Err(Error::Config("external emulator needs a `command`".into()));
        }
        let mut hyperparameters = spec.hyperparameters.clone();
        let timeout = match hyperparameters.remove("timeout") {
            None => None,
            Some(t) if t > 0.0 && t.is_finite() => Some(Duration::from_secs_f64(t)),
            Some(t) => return Err(Error::Config(format!("external: timeout must be > 0 seconds, got {t}"))),
        };
        Ok(Self {
            command: spec.command.clone(),
            timeout,
            hyperparameters,
        })
    }
}

fn fail(stage: Stage, msg: impl Into<String>) -> EmulatorError {
    EmulatorError {
        stage,
        msg: msg.into(),
        timed_out: false,
    }
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
    timeout: Option<Duration>,
}

impl Session {
    fn spawn(command: &[String], timeout: Option<Duration>) -> Result<Self, EmulatorError> {
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(Stage::Fit, format!("cannot start `{}`: {e}", command[0])))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut err_pipe = child.stderr.take().expect("piped stderr");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            let mut buf = [0u8; 1024];
            while let Ok(k) = err_pipe.read(&mut buf) {
                if k == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap_or_else(|e| e.into_inner());
                s.push_str(&String::from_utf8_lossy(&buf[..k]));
                if s.len() > 2 * STDERR_KEEP {
                    let mut cut = s.len() - STDERR_KEEP;
                    while !s.is_char_boundary(cut) {
                        cut += 1;
                    }
                    s.drain(..cut);
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines,
            stderr,
            timeout,
        })
    }

    fn diagnostics(&mut self) -> String {
        // give the stderr reader a moment to drain after the child exits
        thread::sleep(Duration::from_millis(20));
        let status = match self.child.try_wait() {
            Ok(Some(s)) => format!("; child exited with {s}"),
            _ => String::new(),
        };
        let err = self.stderr.lock().unwrap_or_else(|e| e.into_inner());
        let tail = err.trim();
        if tail.is_empty() {
            status
        } else {
            format!("{status}; stderr: {tail}")
        }
    }

    fn call(&mut self, request: &Value, stage: Stage) -> Result<Value, EmulatorError> {
        let mut line = request.to_string();
        line.push('\n');
        if let Err(e) = self.stdin.write_all(line.as_bytes()).and_then(|_| self.stdin.flush()) {
            let d = self.diagnostics();
            return Err(fail(stage, format!("cannot write request: {e}{d}")));
        }
        let received = match self.timeout {
            Some(t) => self.lines.recv_timeout(t),
            None => self.lines.recv().map_err(|_| RecvTimeoutError::Disconnected),
        };
        let reply = match received {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => {
                let d = self.diagnostics();
                return Err(fail(stage, format!("cannot read reply: {e}{d}")));
            }
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                let _ = self.child.wait();
                return Err(EmulatorError::timeout(stage, self.timeout.unwrap_or_default().as_secs_f64()));
            }
            Err(RecvTimeoutError::Disconnected) => {
                let _ = self.child.wait();
                let d = self.diagnostics();
                return Err(fail(stage, format!("child closed its output{d}")));
            }
        };
        let value: Value = serde_json::from_str(&reply)
            .map_err(|e| fail(stage, format!("protocol violation: reply is not JSON ({e}): {reply}")))?;
        match value.get("ok").and_then(Value::as_bool) {
            Some(true) => Ok(value),
            Some(false) => {
                let msg = value.get("msg").and_then(Value::as_str).unwrap_or("no message");
                Err(fail(stage, format!("emulator reported: {msg}")))
            }
            None => Err(fail(stage, format!("protocol violation: reply lacks boolean `ok`: {reply}"))),
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}

struct ExternalModel {
    session: Mutex<Session>,
    model_id: Value,
}

impl Emulator for External {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>, EmulatorError> {
        let mut session = Session::spawn(&self.command, self.timeout)?;
        let mut request = json!({"op": "fit", "X": rows(x), "y": y, "seed": seed});
        if !self.hyperparameters.is_empty() {
            request["hyperparameters"] = json!(self.hyperparameters);
        }
        let reply = session.call(&request, Stage::Fit)?;
        let model_id = reply
            .get("model_id")
            .cloned()
            .ok_or_else(|| fail(Stage::Fit, "protocol violation: fit reply lacks `model_id`"))?;
        Ok(Box::new(ExternalModel {
            session: Mutex::new(session),
            model_id,
        }))
    }
}

impl Predictor for ExternalModel {
    fn predict(&self, x: &DMatrix<f64>, m: usize, seed: u64) -> Result<DMatrix<f64>, EmulatorError> {
        let request = json!({"op": "predict", "model_id": self.model_id, "X": rows(x), "M": m, "seed": seed});
        let reply = self
            .session
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .call(&request, Stage::Pred)?;
        let draws: Vec<Vec<f64>> = reply
            .get("draws")
            .cloned()
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| fail(Stage::Pred, format!("protocol violation: bad `draws`: {e}")))?
            .ok_or_else(|| fail(Stage::Pred, "protocol violation: predict reply lacks `draws`"))?;
        if draws.len() != m || draws.iter().any(|r| r.len() != x.nrows()) {
            return Err(fail(
                Stage::Pred,
                format!("protocol violation: expected {m} rows of {} draws", x.nrows()),
            ));
        }
        Ok(DMatrix::from_fn(m, x.nrows(), |j, i| draws[j][i]))
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::emulators::fit;

    fn sh(script: &str) -> EmulatorSpec {
        EmulatorSpec::external(["sh", "-c", script])
    }

    #[test]
    fn missing_command_is_a_config_error() {
        assert!(External::from_spec(&EmulatorSpec::new("external")).is_err());
        assert!(External::from_spec(&sh("true").with_hyper("timeout", -1.0)).is_err());
    }

    #[test]
    fn scripted_round_trip() {
        let script = r#"read a; echo '{"ok":true,"model_id":"m"}'; read b; echo '{"ok":true,"draws":[[1,2],[3,4]]}'"#;
        let ext = External::from_spec(&sh(script)).unwrap();
        let x = DMatrix::from_element(3, 1, 0.5);
        let model = fit(&ext, "external", &x, &[1.0, 2.0, 3.0], 1).unwrap();
        let ens = model.predict(&DMatrix::from_element(2, 1, 0.1), 2, 2).unwrap();
        assert_eq!(ens.draws(), &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn nonzero_exit_during_fit() {
        let ext = External::from_spec(&sh("read a; echo boom >&2; exit 3")).unwrap();
        let x = DMatrix::from_element(2, 1, 0.5);
        let err = fit(&ext, "external", &x, &[1.0, 2.0], 1).unwrap_err();
        assert_eq!(err.stage, Stage::Fit);
        assert!(!err.timed_out);
        assert!(err.msg.contains("boom"), "{}", err.msg);
    }

    #[test]
    fn reported_error_and_bad_json() {
        let x = DMatrix::from_element(2, 1, 0.5);
        let ext = External::from_spec(&sh(r#"read a; echo '{"ok":false,"stage":"fit","msg":"nope"}'"#)).unwrap();
        let err = fit(&ext, "external", &x, &[1.0, 2.0], 1).unwrap_err();
        assert!(err.msg.contains("nope"));
        let ext = External::from_spec(&sh("read a; echo not-json")).unwrap();
        assert!(fit(&ext, "external", &x, &[1.0, 2.0], 1).unwrap_err().msg.contains("protocol"));
    }

    #[test]
    fn timeout_kills_the_child() {
        let ext = External::from_spec(&sh("read a; sleep 30").with_hyper("timeout", 0.3)).unwrap();
        let x = DMatrix::from_element(2, 1, 0.5);
        let start = std::time::Instant::now();
        let err = fit(&ext, "external", &x, &[1.0, 2.0], 1).unwrap_err();
        assert!(err.timed_out);
        assert_eq!(err.stage, Stage::Fit);
        assert!(start.elapsed() < Duration::from_secs(10));
    }

    #[test]
    fn wrong_draw_shape_is_a_pred_failure() {
        let script = r#"read a; echo '{"ok":true,"model_id":1}'; read b; echo '{"ok":true,"draws":[[1]]}'"#;
        let ext = External::from_spec(&sh(script)).unwrap();
        let model = fit(&ext, "external", &DMatrix::from_element(2, 1, 0.5), &[1.0, 2.0], 1).unwrap();
        let err = model.predict(&DMatrix::from_element(2, 1, 0.1), 2, 2).unwrap_err();
        assert_eq!(err.stage, Stage::Pred);
    }
}
