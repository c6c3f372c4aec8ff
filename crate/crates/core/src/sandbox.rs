//! Runs untrusted guest programs in a child process with a hard wall-clock
//! limit, a scrubbed environment, a private scratch directory and capped
//! output capture. The whole process group is killed at the deadline and
//! whenever a run is abandoned.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::{mpsc, Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub const GUEST_CMD_ENV: &str = "TAMPFORGE_GUEST_CMD";
pub const DEFAULT_GUEST_CMD: &str = "python3";
pub const DEFAULT_MAX_STDOUT: usize = 8 * 1024 * 1024;
pub const DEFAULT_MAX_STDERR: usize = 1024 * 1024;
pub const DEFAULT_MAX_MEMORY: u64 = 2 * 1024 * 1024 * 1024;
/// How long to wait for output pipes to close after the child is gone.
const DRAIN_GRACE: Duration = Duration::from_secs(1);
const POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ExitStatus {
    Exited { code: i32 },
    /// Killed by the harness at the deadline.
    Killed,
    Signaled { signal: i32 },
}

/// Outcome of one guest run. Output is decoded lossily as UTF-8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxResult {
    pub stdout: String,
    pub stderr: String,
    /// Bytes the program wrote to stdout, including any beyond the cap.
    pub stdout_bytes: u64,
    pub stdout_truncated: bool,
    pub exit_status: ExitStatus,
    /// Seconds from spawn to exit (or kill).
    pub elapsed: f64,
    pub timed_out: bool,
}

impl SandboxResult {
    /// A stand-in for answers that never went through the sandbox.
    pub fn not_executed(stdout: impl Into<String>) -> Self {
        let stdout = stdout.into();
        SandboxResult {
            stdout_bytes: stdout.len() as u64,
            stdout,
            stderr: String::new(),
            stdout_truncated: false,
            exit_status: ExitStatus::Exited { code: 0 },
            elapsed: 0.0,
            timed_out: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandboxLimits {
    pub max_stdout_bytes: usize,
    pub max_stderr_bytes: usize,
    /// Address-space cap applied with `setrlimit`.
    pub max_memory_bytes: Option<u64>,
}

impl Default for SandboxLimits {
    fn default() -> Self {
        SandboxLimits {
            max_stdout_bytes: DEFAULT_MAX_STDOUT,
            max_stderr_bytes: DEFAULT_MAX_STDERR,
            max_memory_bytes: Some(DEFAULT_MAX_MEMORY),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandboxConfig {
    /// Interpreter command and leading arguments; the program path is appended.
    pub guest_cmd: Vec<String>,
    /// File extension of the guest program.
    pub extension: String,
    pub limits: SandboxLimits,
    /// Parent directory for per-run scratch directories.
    pub scratch_root: Option<PathBuf>,
    pub max_parallel: usize,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            guest_cmd: vec![DEFAULT_GUEST_CMD.to_string()],
            extension: "py".to_string(),
            limits: SandboxLimits::default(),
            scratch_root: None,
            max_parallel: thread::available_parallelism().map_or(4, |n| n.get()),
        }
    }
}

impl SandboxConfig {
    /// Defaults, with the interpreter taken from `TAMPFORGE_GUEST_CMD` when set.
    pub fn from_env() -> Self {
        let mut c = SandboxConfig::default();
        if let Ok(cmd) = std::env::var(GUEST_CMD_ENV) {
            let parts: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if !parts.is_empty() {
                c.guest_cmd = parts;
            }
        }
        c
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("guest interpreter `{0}` not found")]
    InterpreterNotFound(String),
    #[error("timeout must be positive")]
    BadTimeout,
    #[error("sandbox I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Counting semaphore bounding concurrent children.
#[derive(Debug)]
struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.cv.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Kills the child's process group when dropped.
struct GroupGuard(i32);

impl Drop for GroupGuard {
    fn drop(&mut self) {
        kill_group(self.0);
    }
}

fn kill_group(pgid: i32) {
    if pgid > 0 {
        // SAFETY: kill(2) with a negative pid signals the process group; it
        // touches no memory and failure (group already gone) is harmless.
        unsafe {
            libc::kill(-pgid, libc::SIGKILL);
        }
    }
}

/// Reads a pipe to EOF, keeping at most `cap` bytes and counting the rest.
fn drain<R: Read + Send + 'static>(mut r: R, cap: usize) -> mpsc::Receiver<(Vec<u8>, u64)> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut total = 0u64;
        let mut buf = [0u8; 64 * 1024];
        loop {
            match r.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    total += n as u64;
                    let room = cap.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        let _ = tx.send((kept, total));
    });
    rx
}

#[derive(Debug, Clone)]
pub struct Sandbox {
    config: SandboxConfig,
    slots: Arc<Semaphore>,
}

impl Sandbox {
    pub fn new(config: SandboxConfig) -> Self {
        let n = config.max_parallel.max(1);
        Sandbox {
            config,
            slots: Arc::new(Semaphore {
                free: Mutex::new(n),
                cv: Condvar::new(),
            }),
        }
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.config
    }

    pub fn execute(&self, program: &str, timeout: f64) -> Result<SandboxResult, SandboxError> {
        self.execute_with_files(program, &[], timeout)
    }

    /// Runs `program` with extra files written next to it in the scratch
    /// directory (the working directory of the run).
    pub fn execute_with_files(
        &self,
        program: &str,
        files: &[(&str, &str)],
        timeout: f64,
    ) -> Result<SandboxResult, SandboxError> {
        if !(timeout > 0.0 && timeout.is_finite()) {
            return Err(SandboxError::BadTimeout);
        }
        let _permit = self.slots.acquire();
        let scratch = match &self.config.scratch_root {
            Some(root) => {
                std::fs::create_dir_all(root)?;
                tempfile::Builder::new().prefix("run-").tempdir_in(root)?
            }
            None => tempfile::Builder::new().prefix("tampforge-run-").tempdir()?,
        };
        let main = scratch.path().join(format!("main.{}", self.config.extension));
        std::fs::write(&main, program)?;
        for (name, content) in files {
            std::fs::write(scratch.path().join(name), content)?;
        }

        let (exe, lead) = self
            .config
            .guest_cmd
            .split_first()
            .ok_or_else(|| SandboxError::InterpreterNotFound(String::new()))?;
        let mut cmd = Command::new(exe);
        cmd.args(lead)
            .arg(&main)
            .current_dir(scratch.path())
            .env_clear()
            .env("PATH", std::env::var("PATH").unwrap_or_else(|_| "/usr/local/bin:/usr/bin:/bin".into()))
            .env("HOME", scratch.path())
            .env("TMPDIR", scratch.path())
            .env("LANG", "C.UTF-8")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env("PYTHONHASHSEED", "0")
            // unroutable proxies discourage network use
            .env("http_proxy", "http://127.0.0.1:9")
            .env("https_proxy", "http://127.0.0.1:9")
            .env("all_proxy", "http://127.0.0.1:9")
            .env("no_proxy", "")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        set_process_limits(&mut cmd, self.config.limits.max_memory_bytes);

        let start = Instant::now();
        let mut child = match cmd.spawn() {
            Ok(c) => c,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(SandboxError::InterpreterNotFound(exe.clone()))
            }
            Err(e) => return Err(e.into()),
        };
        let guard = GroupGuard(child.id() as i32);
        let out_rx = drain(child.stdout.take().expect("piped"), self.config.limits.max_stdout_bytes);
        let err_rx = drain(child.stderr.take().expect("piped"), self.config.limits.max_stderr_bytes);

        let deadline = start + Duration::from_secs_f64(timeout);
        let (status, timed_out, elapsed) = loop {
            if let Some(st) = child.try_wait()? {
                break (Some(st), false, start.elapsed());
            }
            let now = Instant::now();
            if now >= deadline {
                kill_group(guard.0);
                let elapsed = start.elapsed();
                let _ = child.wait();
                break (None, true, elapsed);
            }
            thread::sleep(POLL.min(deadline - now));
        };
        // stray grandchildren would otherwise keep the pipes open
        drop(guard);

        let collect = |rx: mpsc::Receiver<(Vec<u8>, u64)>| rx.recv_timeout(DRAIN_GRACE).unwrap_or_default();
        let (stdout, stdout_bytes) = collect(out_rx);
        let (stderr, _) = collect(err_rx);
        let exit_status = match status {
            None => ExitStatus::Killed,
            Some(st) => exit_status_of(st),
        };
        Ok(SandboxResult {
            stdout_truncated: stdout_bytes > stdout.len() as u64,
            stdout: String::from_utf8_lossy(&stdout).into_owned(),
            stderr: String::from_utf8_lossy(&stderr).into_owned(),
            stdout_bytes,
            exit_status,
            elapsed: elapsed.as_secs_f64(),
            timed_out,
        })
    }
}

#[cfg(unix)]
fn exit_status_of(st: std::process::ExitStatus) -> ExitStatus {
    use std::os::unix::process::ExitStatusExt;
    match (st.code(), st.signal()) {
        (Some(code), _) => ExitStatus::Exited { code },
        (None, Some(signal)) => ExitStatus::Signaled { signal },
        (None, None) => ExitStatus::Exited { code: -1 },
    }
}

#[cfg(unix)]
fn set_process_limits(cmd: &mut Command, max_memory: Option<u64>) {
    use std::os::unix::process::CommandExt;
    cmd.process_group(0);
    // SAFETY: the closure runs in the forked child before exec and only
    // calls async-signal-safe setrlimit(2).
    unsafe {
        cmd.pre_exec(move || {
            let core = libc::rlimit {
                rlim_cur: 0,
                rlim_max: 0,
            };
            libc::setrlimit(libc::RLIMIT_CORE, &core);
            if let Some(bytes) = max_memory {
                let lim = libc::rlimit {
                    rlim_cur: bytes as libc::rlim_t,
                    rlim_max: bytes as libc::rlim_t,
                };
                libc::setrlimit(libc::RLIMIT_AS, &lim);
            }
            Ok(())
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh() -> Sandbox {
        Sandbox::new(SandboxConfig {
            guest_cmd: vec!["sh".into()],
            extension: "sh".into(),
            ..SandboxConfig::default()
        })
    }

    #[test]
    fn happy_path() {
        let r = sh().execute("echo hello\n", 10.0).unwrap();
        assert_eq!(r.stdout, "hello\n");
        assert_eq!(r.exit_status, ExitStatus::Exited { code: 0 });
        assert!(!r.timed_out);
    }

    #[test]
    fn timeout_kills_the_group() {
        let start = Instant::now();
        let r = sh().execute("sleep 30 &\nsleep 30\n", 0.3).unwrap();
        assert!(r.timed_out);
        assert_eq!(r.exit_status, ExitStatus::Killed);
        assert!(r.elapsed >= 0.3);
        assert!(start.elapsed() < Duration::from_secs(3));
    }

    #[test]
    fn stdout_cap() {
        let sb = Sandbox::new(SandboxConfig {
            guest_cmd: vec!["sh".into()],
            extension: "sh".into(),
            limits: SandboxLimits {
                max_stdout_bytes: 1000,
                ..SandboxLimits::default()
            },
            ..SandboxConfig::default()
        });
        let r = sb.execute("head -c 100000 /dev/zero\necho done >&2\n", 10.0).unwrap();
        assert_eq!(r.stdout.len(), 1000);
        assert_eq!(r.stdout_bytes, 100_000);
        assert!(r.stdout_truncated);
        assert_eq!(r.stderr, "done\n");
    }

    #[test]
    fn environment_is_scrubbed_and_files_visible() {
        std::env::set_var("TAMPFORGE_SECRET_FOR_TEST", "x");
        let r = sh()
            .execute_with_files("echo \"[$TAMPFORGE_SECRET_FOR_TEST]\"\ncat extra.txt\n", &[("extra.txt", "data")], 10.0)
            .unwrap();
        assert_eq!(r.stdout, "[]\ndata");
    }

    #[test]
    fn missing_interpreter() {
        let sb = Sandbox::new(SandboxConfig {
            guest_cmd: vec!["definitely-not-an-interpreter-xyz".into()],
            ..SandboxConfig::default()
        });
        assert!(matches!(sb.execute("", 1.0), Err(SandboxError::InterpreterNotFound(_))));
    }

    #[test]
    fn nonzero_exit_is_reported() {
        let r = sh().execute("exit 3\n", 5.0).unwrap();
        assert_eq!(r.exit_status, ExitStatus::Exited { code: 3 });
    }
}
