//! Pre-opened channels: the descriptor-pair handshake used to embed an
//! interpreter in a host application.
//!
//! The host creates two pipes per channel and starts the child with
//! `-pipe r1,w1,r2,w2,...`, where `rK` is the read end the child listens on
//! and `wK` the write end it answers on. For each pair, left to right, the
//! child writes `<own pid>\n` and expects `<child pid>,<parent pid>\n` back.
//! Anything else, or silence past the timeout, aborts startup.

use std::ffi::OsStr;
use std::fs::File;
use std::io::{self, Write};
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd, RawFd};
use std::os::unix::process::CommandExt;
use std::process::{Child, Command, ExitStatus};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::channel::{
    pipe_cloexec, read_frame, ChannelId, ChannelRegistry, FrameError, LineReader,
};

/// Used when the caller does not pick a handshake timeout.
pub const DEFAULT_HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(30);

/// Longest handshake reply line accepted, newline excluded.
pub const MAX_REPLY_LINE: usize = 128;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("bad -pipe argument {arg:?}: {reason}")]
    Parse { arg: String, reason: String },
    #[error("descriptor {0} is not open")]
    BadDescriptor(RawFd),
    #[error("no handshake reply within {0:?}")]
    HandshakeTimeout(Duration),
    #[error("handshake rejected: {0}")]
    HandshakeRejected(String),
    #[error("child announced pid {announced}, expected {expected}")]
    PidMismatch { expected: i32, announced: i32 },
    #[error("peer closed the channel during the handshake")]
    Closed,
    #[error("cannot start embedded child: {0}")]
    SpawnFailure(#[source] io::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Descriptor pairs named by a `-pipe` option, in processing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreopenedSpec {
    pub pairs: Vec<(RawFd, RawFd)>,
}

impl PreopenedSpec {
    /// Renders the descriptor list back into `-pipe` argument form.
    pub fn to_arg(&self) -> String {
        self.pairs
            .iter()
            .map(|(r, w)| format!("{r},{w}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandshakeResult {
    pub channel: ChannelId,
    pub child_pid: i32,
    pub parent_pid: i32,
}

pub fn parse_pipe_option(arg: &str) -> Result<PreopenedSpec, EmbedError> {
    let fail = |reason: &str| EmbedError::Parse {
        arg: arg.to_string(),
        reason: reason.to_string(),
    };
    let mut fds = Vec::new();
    for token in arg.split(',') {
        if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
            return Err(fail(&format!("{token:?} is not a descriptor number")));
        }
        let fd: RawFd = token.parse().map_err(|_| fail("descriptor out of range"))?;
        if fd < 3 {
            return Err(fail(&format!("descriptor {fd} is a standard stream")));
        }
        if fds.contains(&fd) {
            return Err(fail(&format!("descriptor {fd} listed twice")));
        }
        fds.push(fd);
    }
    if fds.len() % 2 != 0 {
        return Err(fail("odd number of descriptors"));
    }
    Ok(PreopenedSpec {
        pairs: fds.chunks(2).map(|p| (p[0], p[1])).collect(),
    })
}

fn parse_reply(line: &[u8]) -> Option<(i32, i32)> {
    let body = std::str::from_utf8(line.strip_suffix(b"\n")?).ok()?;
    let (a, b) = body.split_once(',')?;
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|c| c.is_ascii_digit());
    if !digits(a) || !digits(b) {
        return None;
    }
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// Takes ownership of an inherited descriptor and marks it close-on-exec so
/// it does not leak into commands started later.
fn adopt_fd(fd: RawFd) -> Result<File, EmbedError> {
    // SAFETY: F_GETFD only inspects the descriptor table.
    if unsafe { libc::fcntl(fd, libc::F_GETFD) } < 0 {
        return Err(EmbedError::BadDescriptor(fd));
    }
    // SAFETY: the descriptor is open and, per the -pipe contract, handed to
    // this process exclusively.
    let file = unsafe { File::from_raw_fd(fd) };
    // SAFETY: as above.
    unsafe { libc::fcntl(fd, libc::F_SETFD, libc::FD_CLOEXEC) };
    Ok(file)
}

fn read_handshake_line(
    reader: &mut LineReader,
    deadline: Instant,
    timeout: Duration,
) -> Result<Vec<u8>, EmbedError> {
    match reader.read_line_capped(MAX_REPLY_LINE, Some(deadline)) {
        Ok(Some(line)) => Ok(line),
        Ok(None) => Err(EmbedError::Closed),
        Err(e) if e.kind() == io::ErrorKind::TimedOut => Err(EmbedError::HandshakeTimeout(timeout)),
        Err(e) if e.kind() == io::ErrorKind::InvalidData => Err(EmbedError::HandshakeRejected(
            format!("reply longer than {MAX_REPLY_LINE} bytes"),
        )),
        Err(e) => Err(e.into()),
    }
}

/// Child side: performs the handshake on every pair, left to right, and
/// registers each accepted pair as a pre-opened channel. Any failure aborts
/// the whole activation.
pub fn activate_preopened(
    registry: &mut ChannelRegistry,
    spec: &PreopenedSpec,
    timeout: Duration,
) -> Result<Vec<HandshakeResult>, EmbedError> {
    let own_pid = std::process::id() as i32;
    let mut accepted = Vec::new();
    let mut pending = Vec::new();
    for &(r, w) in &spec.pairs {
        pending.push((adopt_fd(r)?, adopt_fd(w)?));
    }
    for (from_parent, mut to_parent) in pending {
        to_parent.write_all(format!("{own_pid}\n").as_bytes())?;
        to_parent.flush()?;
        let mut reader = LineReader::new(from_parent);
        let line = read_handshake_line(&mut reader, Instant::now() + timeout, timeout)?;
        let (child_pid, parent_pid) = parse_reply(&line).ok_or_else(|| {
            EmbedError::HandshakeRejected(format!(
                "expected \"<pid>,<pid>\\n\", got {:?}",
                String::from_utf8_lossy(&line)
            ))
        })?;
        if child_pid != own_pid {
            return Err(EmbedError::HandshakeRejected(format!(
                "reply names pid {child_pid}, this process is {own_pid}"
            )));
        }
        accepted.push((reader, to_parent, child_pid, parent_pid));
    }
    Ok(accepted
        .into_iter()
        .map(|(reader, to_parent, child_pid, parent_pid)| {
            let channel = registry.register_preopened_reader(reader, to_parent);
            log::debug!("pre-opened channel {channel} (parent pid {parent_pid})");
            HandshakeResult {
                channel,
                child_pid,
                parent_pid,
            }
        })
        .collect())
}

/// Interpreter variables describing activated channels: `PIPE1_`..`PIPEn_`
/// hold the descriptors and `PIPES_` their count.
pub fn preopened_variables(results: &[HandshakeResult]) -> Vec<(String, String)> {
    let mut vars: Vec<(String, String)> = results
        .iter()
        .enumerate()
        .map(|(i, r)| (format!("PIPE{}_", i + 1), r.channel.to_string()))
        .collect();
    vars.push(("PIPES_".to_string(), results.len().to_string()));
    vars
}

/// Parent-side end of one pre-opened channel.
#[derive(Debug)]
pub struct EmbeddedChannel {
    to_child: File,
    from_child: LineReader,
    prompt: Vec<u8>,
}

impl EmbeddedChannel {
    pub fn send(&mut self, payload: &[u8]) -> io::Result<()> {
        self.to_child.write_all(payload)?;
        self.to_child.flush()
    }

    pub fn set_prompt(&mut self, prompt: &[u8]) {
        self.prompt = prompt.to_vec();
    }

    /// Reads the child's reply up to the next prompt line.
    pub fn read_until_prompt(&mut self, timeout: Option<Duration>) -> Result<Vec<u8>, FrameError> {
        let deadline = timeout.map(|t| Instant::now() + t);
        read_frame(&mut self.from_child, &self.prompt, None, deadline)
    }

    /// Closes the write side so the child sees end of input.
    pub fn close(self) -> LineReader {
        self.from_child
    }
}

/// A child started with pre-opened channels whose handshakes succeeded.
#[derive(Debug)]
pub struct EmbeddedChild {
    child: Child,
    channels: Vec<EmbeddedChannel>,
}

impl EmbeddedChild {
    pub fn pid(&self) -> i32 {
        self.child.id() as i32
    }

    pub fn channels(&mut self) -> &mut [EmbeddedChannel] {
        &mut self.channels
    }

    pub fn channel(&mut self, index: usize) -> &mut EmbeddedChannel {
        &mut self.channels[index]
    }

    /// Closes every channel and waits for the child to exit.
    pub fn wait(mut self) -> io::Result<ExitStatus> {
        self.channels.clear();
        self.child.wait()
    }

    pub fn kill(mut self) -> io::Result<ExitStatus> {
        self.channels.clear();
        let _ = self.child.kill();
        self.child.wait()
    }
}

/// Parent side: starts `argv` with `n_channels` pre-opened channels (the
/// `-pipe` option is appended) and answers each pid announcement.
pub fn spawn_embedded<S: AsRef<OsStr>>(
    argv: &[S],
    n_channels: usize,
    timeout: Duration,
) -> Result<EmbeddedChild, EmbedError> {
    let (program, args) = argv.split_first().ok_or_else(|| {
        EmbedError::SpawnFailure(io::Error::new(io::ErrorKind::InvalidInput, "empty argv"))
    })?;
    if n_channels == 0 {
        return Err(EmbedError::SpawnFailure(io::Error::new(
            io::ErrorKind::InvalidInput,
            "at least one channel is required",
        )));
    }

    // (parent write end, child read end, child write end, parent read end)
    let mut ends: Vec<(OwnedFd, OwnedFd, OwnedFd, OwnedFd)> = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        let (down_r, down_w) = pipe_cloexec()?;
        let (up_r, up_w) = pipe_cloexec()?;
        ends.push((down_w, down_r, up_w, up_r));
    }
    let spec = PreopenedSpec {
        pairs: ends
            .iter()
            .map(|(_, child_r, child_w, _)| (child_r.as_raw_fd(), child_w.as_raw_fd()))
            .collect(),
    };
    let inherit: Vec<RawFd> = spec.pairs.iter().flat_map(|&(r, w)| [r, w]).collect();

    let mut cmd = Command::new(program);
    cmd.args(args).arg("-pipe").arg(spec.to_arg());
    // Parent copies stay close-on-exec; only the forked child clears the
    // flag, so concurrently spawned processes never inherit these pipes.
    // SAFETY: fcntl is async-signal-safe and `inherit` is not mutated.
    unsafe {
        cmd.pre_exec(move || {
            for &fd in &inherit {
                let flags = libc::fcntl(fd, libc::F_GETFD);
                if flags < 0 || libc::fcntl(fd, libc::F_SETFD, flags & !libc::FD_CLOEXEC) < 0 {
                    return Err(io::Error::last_os_error());
                }
            }
            Ok(())
        });
    }
    let mut child = cmd.spawn().map_err(EmbedError::SpawnFailure)?;
    let child_pid = child.id() as i32;
    let own_pid = std::process::id() as i32;

    let mut channels = Vec::with_capacity(n_channels);
    for (to_child, child_r, child_w, from_child) in ends {
        drop(child_r);
        drop(child_w);
        channels.push(EmbeddedChannel {
            to_child: File::from(to_child),
            from_child: LineReader::new(File::from(from_child)),
            prompt: Vec::new(),
        });
    }

    let deadline = Instant::now() + timeout;
    for channel in &mut channels {
        let outcome = read_handshake_line(&mut channel.from_child, deadline, timeout).and_then(|line| {
            let announced = std::str::from_utf8(&line)
                .ok()
                .and_then(|s| s.strip_suffix('\n'))
                .and_then(|s| s.parse::<i32>().ok())
                .ok_or_else(|| {
                    EmbedError::HandshakeRejected(format!(
                        "bad pid announcement {:?}",
                        String::from_utf8_lossy(&line)
                    ))
                })?;
            if announced != child_pid {
                return Err(EmbedError::PidMismatch {
                    expected: child_pid,
                    announced,
                });
            }
            channel.send(format!("{child_pid},{own_pid}\n").as_bytes())?;
            Ok(())
        });
        if let Err(e) = outcome {
            let _ = child.kill();
            let _ = child.wait();
            return Err(e);
        }
    }
    Ok(EmbeddedChild { child, channels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_in_order() {
        let spec = parse_pipe_option("5,8,9,12").unwrap();
        assert_eq!(spec.pairs, vec![(5, 8), (9, 12)]);
        assert_eq!(spec.to_arg(), "5,8,9,12");
        assert_eq!(parse_pipe_option("5,8").unwrap().pairs, vec![(5, 8)]);
    }

    #[test]
    fn rejects_bad_options() {
        for bad in ["5,8,9", "", "5,,8", "5,x", "5, 8", "5,5", "1,8", "-5,8", "5,8,"] {
            assert!(
                matches!(parse_pipe_option(bad), Err(EmbedError::Parse { .. })),
                "{bad:?} accepted"
            );
        }
    }

    #[test]
    fn reply_grammar() {
        assert_eq!(parse_reply(b"12345,777\n"), Some((12345, 777)));
        assert_eq!(parse_reply(b"12345,777"), None);
        assert_eq!(parse_reply(b"12345\n"), None);
        assert_eq!(parse_reply(b"12345, 777\n"), None);
        assert_eq!(parse_reply(b"12345,777,1\n"), None);
        assert_eq!(parse_reply(b"a,b\n"), None);
    }

    #[test]
    fn variables() {
        let results = vec![
            HandshakeResult { channel: 1, child_pid: 10, parent_pid: 9 },
            HandshakeResult { channel: 2, child_pid: 10, parent_pid: 9 },
        ];
        assert_eq!(
            preopened_variables(&results),
            vec![
                ("PIPE1_".to_string(), "1".to_string()),
                ("PIPE2_".to_string(), "2".to_string()),
                ("PIPES_".to_string(), "2".to_string()),
            ]
        );
    }

    /// Acts as the parent for an in-process activation: the "parent" end
    /// is driven from a helper thread.
    fn in_process(reply: impl FnOnce(i32) -> Vec<u8> + Send + 'static, timeout: Duration)
        -> (Result<Vec<HandshakeResult>, EmbedError>, ChannelRegistry)
    {
        let (down_r, down_w) = pipe_cloexec().unwrap();
        let (up_r, up_w) = pipe_cloexec().unwrap();
        let spec = PreopenedSpec { pairs: vec![(down_r.as_raw_fd(), up_w.as_raw_fd())] };
        // ownership moves to activate_preopened
        std::mem::forget(down_r);
        std::mem::forget(up_w);
        let parent = std::thread::spawn(move || {
            let mut from_child = LineReader::new(File::from(up_r));
            let line = from_child.read_line(None).unwrap().unwrap();
            let pid: i32 = std::str::from_utf8(&line).unwrap().trim_end().parse().unwrap();
            let mut to_child = File::from(down_w);
            let bytes = reply(pid);
            if !bytes.is_empty() {
                to_child.write_all(&bytes).unwrap();
            }
            // keep the pipe open until the child side has given up
            std::thread::sleep(Duration::from_millis(300));
            (to_child, from_child)
        });
        let mut reg = ChannelRegistry::new();
        let res = activate_preopened(&mut reg, &spec, timeout);
        let _ = parent.join();
        (res, reg)
    }

    #[test]
    fn accepts_correct_reply() {
        let (res, reg) = in_process(|pid| format!("{pid},777\n").into_bytes(), DEFAULT_HANDSHAKE_TIMEOUT);
        let results = res.unwrap();
        assert_eq!(results.len(), 1);
        assert_eq!(results[0].child_pid, std::process::id() as i32);
        assert_eq!(results[0].parent_pid, 777);
        let ch = reg.channel(results[0].channel).unwrap();
        assert!(ch.is_preopened());
        assert_eq!(ch.attrs(), &crate::channel::ChannelAttributes::preopened());
    }

    #[test]
    fn rejects_wrong_pid() {
        let (res, reg) = in_process(|_| b"99999,777\n".to_vec(), DEFAULT_HANDSHAKE_TIMEOUT);
        assert!(matches!(res, Err(EmbedError::HandshakeRejected(_))));
        assert!(reg.running_ids().is_empty());
    }

    #[test]
    fn rejects_oversized_reply() {
        let (res, _) = in_process(|_| vec![b'1'; 4096], DEFAULT_HANDSHAKE_TIMEOUT);
        assert!(matches!(res, Err(EmbedError::HandshakeRejected(_))));
    }

    #[test]
    fn times_out_on_silence() {
        let (res, _) = in_process(|_| Vec::new(), Duration::from_millis(100));
        assert!(matches!(res, Err(EmbedError::HandshakeTimeout(_))));
    }

    #[test]
    fn unopened_descriptor() {
        let spec = PreopenedSpec { pairs: vec![(900, 901)] };
        let mut reg = ChannelRegistry::new();
        assert!(matches!(
            activate_preopened(&mut reg, &spec, DEFAULT_HANDSHAKE_TIMEOUT),
            Err(EmbedError::BadDescriptor(900))
        ));
    }

    #[test]
    fn silent_child_times_out() {
        let started = Instant::now();
        let res = spawn_embedded(&["sh", "-c", "sleep 5", "sh"], 1, Duration::from_millis(200));
        assert!(matches!(res, Err(EmbedError::HandshakeTimeout(_))));
        assert!(started.elapsed() < Duration::from_secs(4));
    }

    #[test]
    fn lying_child_is_rejected() {
        // argv after the script: $1 = "-pipe", $2 = "r,w"; announce pid 1
        let res = spawn_embedded(
            &["sh", "-c", "w=$(echo \"$2\" | cut -d, -f2); echo 1 >&$w; sleep 5", "sh"],
            1,
            DEFAULT_HANDSHAKE_TIMEOUT,
        );
        assert!(matches!(res, Err(EmbedError::PidMismatch { announced: 1, .. })), "{res:?}");
    }
}
