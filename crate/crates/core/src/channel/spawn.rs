//! Process creation for external commands.

use std::ffi::OsStr;
use std::fs::{File, OpenOptions};
use std::io::{self, Read};
use std::os::fd::{FromRawFd, OwnedFd, RawFd};
use std::os::unix::ffi::OsStrExt;
use std::os::unix::fs::PermissionsExt;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};

use super::attrs::{ChannelAttributes, ShellMode};

/// Search path used when `PATH` is not set.
pub const DEFAULT_PATH: &str = ":/bin:/usr/bin";

pub(crate) struct Spawned {
    pub child_pid: i32,
    pub group_id: i32,
    pub to_child: File,
    pub from_child: File,
    /// Present when the spawned process is our own child and can be waited on.
    pub child: Option<Child>,
}

fn is_executable(path: &Path) -> bool {
    path.metadata()
        .map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
        .unwrap_or(false)
}

/// Resolves an executable the way a shell would: names containing a slash
/// are taken as-is, anything else is looked up in `path_var` (colon
/// separated, empty entry = current directory), falling back to
/// [`DEFAULT_PATH`] when `path_var` is `None`.
pub fn resolve_executable(name: &str, path_var: Option<&OsStr>) -> Option<PathBuf> {
    if name.is_empty() {
        return None;
    }
    if name.contains('/') {
        return Some(PathBuf::from(name));
    }
    let search = path_var.unwrap_or(OsStr::new(DEFAULT_PATH));
    search
        .as_bytes()
        .split(|&b| b == b':')
        .map(|dir| {
            if dir.is_empty() {
                PathBuf::from(".").join(name)
            } else {
                Path::new(OsStr::from_bytes(dir)).join(name)
            }
        })
        .find(|candidate| is_executable(candidate))
}

/// Builds the argv for `command` under `shell`.
pub(crate) fn build_argv(command: &str, shell: &ShellMode) -> io::Result<Vec<String>> {
    match shell {
        ShellMode::Shell(prefix) => {
            let mut argv: Vec<String> = prefix
                .split(' ')
                .filter(|w| !w.is_empty())
                .map(str::to_string)
                .collect();
            if argv.is_empty() {
                return Err(io::Error::new(io::ErrorKind::InvalidInput, "empty shell prefix"));
            }
            argv.push(command.to_string());
            Ok(argv)
        }
        ShellMode::NoShell => {
            let mut words = command.split_whitespace().map(str::to_string);
            let name = words
                .next()
                .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "empty command"))?;
            let path_var = std::env::var_os("PATH");
            let resolved = resolve_executable(&name, path_var.as_deref()).ok_or_else(|| {
                io::Error::new(io::ErrorKind::NotFound, format!("{name}: executable not found"))
            })?;
            let mut argv = vec![resolved.to_string_lossy().into_owned()];
            argv.extend(words);
            Ok(argv)
        }
    }
}

pub(crate) fn pipe_cloexec() -> io::Result<(OwnedFd, OwnedFd)> {
    let mut fds = [0 as RawFd; 2];
    // SAFETY: fds is a valid two-element array.
    if unsafe { libc::pipe2(fds.as_mut_ptr(), libc::O_CLOEXEC) } != 0 {
        return Err(io::Error::last_os_error());
    }
    // SAFETY: pipe2 returned two fresh descriptors we now own.
    Ok(unsafe { (OwnedFd::from_raw_fd(fds[0]), OwnedFd::from_raw_fd(fds[1])) })
}

/// Writes `pid` in ASCII decimal plus a newline using only a stack buffer.
/// Runs between fork and exec, so it must not allocate.
fn write_pid_raw(fd: RawFd, pid: libc::pid_t) {
    let mut buf = [0u8; 16];
    let mut n = pid as u32;
    let mut i = buf.len() - 1;
    buf[i] = b'\n';
    loop {
        i -= 1;
        buf[i] = b'0' + (n % 10) as u8;
        n /= 10;
        if n == 0 {
            break;
        }
    }
    let out = &buf[i..];
    // SAFETY: `out` is a valid byte slice; a short or failed write is
    // detected by the reader.
    unsafe {
        libc::write(fd, out.as_ptr().cast(), out.len());
    }
}

pub(crate) fn spawn(command: &str, attrs: &ChannelAttributes) -> io::Result<Spawned> {
    let argv = build_argv(command, &attrs.shell)?;
    let stderr = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&attrs.stderr_target)?;

    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::from(stderr));

    if attrs.daemon {
        spawn_daemon(cmd)
    } else {
        if attrs.shell == ShellMode::NoShell {
            cmd.process_group(0);
        }
        let mut child = cmd.spawn()?;
        let pid = child.id() as i32;
        let group_id = if attrs.shell == ShellMode::NoShell {
            pid
        } else {
            // SAFETY: getpgrp has no preconditions.
            unsafe { libc::getpgrp() }
        };
        let to_child = File::from(OwnedFd::from(child.stdin.take().expect("piped stdin")));
        let from_child = File::from(OwnedFd::from(child.stdout.take().expect("piped stdout")));
        Ok(Spawned {
            child_pid: pid,
            group_id,
            to_child,
            from_child,
            child: Some(child),
        })
    }
}

/// Two-stage spawn: the intermediate child forks, reports the grandchild's
/// pid over a pipe and exits; the grandchild starts a new session (so it
/// leads its own process group, has no controlling terminal, and is
/// reparented to init once the intermediate is reaped) and execs.
fn spawn_daemon(mut cmd: Command) -> io::Result<Spawned> {
    let (pid_r, pid_w) = pipe_cloexec()?;
    let pid_w_raw = std::os::fd::AsRawFd::as_raw_fd(&pid_w);
    // SAFETY: the closure only calls async-signal-safe functions (fork,
    // setsid, write, _exit) and does not allocate.
    unsafe {
        cmd.pre_exec(move || {
            match libc::fork() {
                -1 => Err(io::Error::last_os_error()),
                0 => {
                    if libc::setsid() < 0 {
                        return Err(io::Error::last_os_error());
                    }
                    Ok(())
                }
                grandchild => {
                    write_pid_raw(pid_w_raw, grandchild);
                    libc::_exit(0);
                }
            }
        });
    }
    let spawned = cmd.spawn();
    drop(pid_w);
    let mut intermediate = spawned?;
    let to_child = File::from(OwnedFd::from(intermediate.stdin.take().expect("piped stdin")));
    let from_child = File::from(OwnedFd::from(intermediate.stdout.take().expect("piped stdout")));
    intermediate.wait()?;

    let mut report = String::new();
    File::from(pid_r).read_to_string(&mut report)?;
    let grandchild: i32 = report.trim().parse().map_err(|_| {
        io::Error::other(format!("daemon spawn reported no pid ({report:?})"))
    })?;
    Ok(Spawned {
        child_pid: grandchild,
        group_id: grandchild,
        to_child,
        from_child,
        child: None,
    })
}
