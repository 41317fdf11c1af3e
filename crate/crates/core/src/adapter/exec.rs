use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use super::{check_capabilities, response_logits, Adapter, AdapterError, AdapterHandshake, Message};
use crate::adapter::encode_mask_hex;
use crate::model::{MaskVector, RewardVector, VqaTuple};

type Pending = Arc<Mutex<HashMap<String, Sender<Message>>>>;

/// Counting semaphore bounding in-flight requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Adapter running as a child process, speaking newline-delimited JSON
/// over its standard streams. Responses are matched by `request_id`, so
/// several requests may be in flight up to the declared concurrency.
pub struct ExecAdapter {
    child: Mutex<Child>,
    stdin: Mutex<Option<ChildStdin>>,
    pending: Pending,
    caps: AdapterHandshake,
    slots: Slots,
    next_id: AtomicU64,
    timeout: Duration,
}

impl ExecAdapter {
    /// Spawns `sh -c command` and performs the hello exchange.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, AdapterError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AdapterError::Transport(format!("spawning {command:?}: {e}")))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let pending: Pending = Arc::default();
        let (control_tx, control_rx) = mpsc::channel();
        spawn_reader(stdout, Arc::clone(&pending), control_tx);

        let caps = match handshake(&mut stdin, &control_rx, timeout) {
            Ok(c) => c,
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(e);
            }
        };
        Ok(Self {
            child: Mutex::new(child),
            stdin: Mutex::new(Some(stdin)),
            pending,
            slots: Slots {
                free: Mutex::new(caps.max_concurrency),
                cv: Condvar::new(),
            },
            caps,
            next_id: AtomicU64::new(0),
            timeout,
        })
    }

    fn send(&self, msg: &Message) -> Result<(), AdapterError> {
        let mut guard = self.stdin.lock().unwrap();
        let stdin = guard
            .as_mut()
            .ok_or_else(|| AdapterError::Transport("adapter stdin closed".into()))?;
        writeln!(stdin, "{}", msg.to_line())
            .and_then(|_| stdin.flush())
            .map_err(|e| AdapterError::Transport(format!("writing to adapter: {e}")))
    }
}

fn handshake(
    stdin: &mut ChildStdin,
    control: &Receiver<Message>,
    timeout: Duration,
) -> Result<AdapterHandshake, AdapterError> {
    writeln!(stdin, "{}", Message::hello().to_line())
        .and_then(|_| stdin.flush())
        .map_err(|e| AdapterError::Transport(format!("writing hello: {e}")))?;
    match control.recv_timeout(timeout) {
        Ok(msg) => check_capabilities(msg),
        Err(RecvTimeoutError::Timeout) => Err(AdapterError::Timeout(timeout)),
        Err(RecvTimeoutError::Disconnected) => {
            Err(AdapterError::Transport("adapter exited before the handshake".into()))
        }
    }
}

fn spawn_reader(stdout: std::process::ChildStdout, pending: Pending, control: Sender<Message>) {
    std::thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            let msg = match Message::from_line(&line) {
                Ok(m) => m,
                Err(e) => {
                    log_bad_line(&line, &e);
                    continue;
                }
            };
            let waiter = msg
                .request_id()
                .filter(|id| !id.is_empty())
                .and_then(|id| pending.lock().unwrap().remove(id));
            match waiter {
                Some(tx) => {
                    let _ = tx.send(msg);
                }
                None => {
                    let _ = control.send(msg);
                }
            }
        }
        // Dropping the senders wakes every waiter with a disconnect.
        pending.lock().unwrap().clear();
    });
}

fn log_bad_line(line: &str, err: &serde_json::Error) {
    eprintln!("mmshap: ignoring malformed adapter line ({err}): {line}");
}

impl Adapter for ExecAdapter {
    fn handshake(&self) -> Result<AdapterHandshake, AdapterError> {
        Ok(self.caps)
    }

    fn evaluate(&self, tuple: &VqaTuple, mask: &MaskVector) -> Result<RewardVector, AdapterError> {
        let _slot = self.slots.acquire();
        let request_id = format!("{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let (tx, rx) = mpsc::channel();
        self.pending.lock().unwrap().insert(request_id.clone(), tx);
        let msg = Message::Evaluate {
            request_id: request_id.clone(),
            tuple_id: tuple.tuple_id.clone(),
            mask_hex: encode_mask_hex(mask),
        };
        if let Err(e) = self.send(&msg) {
            self.pending.lock().unwrap().remove(&request_id);
            return Err(e);
        }
        match rx.recv_timeout(self.timeout) {
            Ok(resp) => response_logits(resp, tuple.n_choices()),
            Err(RecvTimeoutError::Timeout) => {
                self.pending.lock().unwrap().remove(&request_id);
                Err(AdapterError::Timeout(self.timeout))
            }
            Err(RecvTimeoutError::Disconnected) => {
                Err(AdapterError::Transport("adapter process exited".into()))
            }
        }
    }
}

impl Drop for ExecAdapter {
    fn drop(&mut self) {
        // Closing stdin is the end-of-stream signal.
        self.stdin.lock().unwrap().take();
        let mut child = self.child.lock().unwrap();
        for _ in 0..50 {
            if let Ok(Some(_)) = child.try_wait() {
                return;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        let _ = child.kill();
        let _ = child.wait();
    }
}
