//! Full-duplex, prompt-framed channels to external commands.
//!
//! A [`ChannelRegistry`] owns every channel opened during a run. The channel
//! started last becomes the *current* one, and [`send`](ChannelRegistry::send)
//! and [`read_until_prompt`](ChannelRegistry::read_until_prompt) always talk
//! to the current channel. A reply is framed by a prompt: a whole line equal
//! to the channel's prompt string (an empty line by default).
//!
//! Each channel carries a snapshot of the [`ChannelAttributes`] that were
//! the registry default when it was opened; changing the defaults later does
//! not affect it.

mod attrs;
mod reader;
mod spawn;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Write};
use std::process::Child;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use attrs::{AttrParseError, ChannelAttributes, ShellMode, MAX_SIGNAL};
pub use reader::{is_prompt_line, read_frame, FrameError, LineReader};
pub use spawn::{resolve_executable, DEFAULT_PATH};

pub(crate) use spawn::pipe_cloexec;

/// Descriptor of a channel within one registry. Starts at 1, never reused.
pub type ChannelId = u32;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("cannot start {command:?}: {source}")]
    SpawnFailure {
        command: String,
        #[source]
        source: io::Error,
    },
    #[error("no current external command")]
    NoCurrentChannel,
    #[error("external command {0} closed its input")]
    BrokenChannel(ChannelId),
    #[error("external command {id} ended its output before the prompt")]
    EndOfStreamBeforePrompt { id: ChannelId, partial: Vec<u8> },
    #[error("timed out waiting for the prompt of external command {0}")]
    Timeout(ChannelId),
    #[error("{0} is not the descriptor of a running external command")]
    UnknownDescriptor(ChannelId),
    #[error("bad attribute list: {0}")]
    Attr(#[from] AttrParseError),
    #[error("i/o error on external command {id}: {source}")]
    Io {
        id: ChannelId,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelState {
    Running,
    Terminated,
}

/// One external command and its duplex streams.
#[derive(Debug)]
pub struct ExternalChannel {
    id: ChannelId,
    command: String,
    child_pid: Option<i32>,
    group_id: Option<i32>,
    to_child: Option<File>,
    from_child: Option<LineReader>,
    prompt: Vec<u8>,
    attrs: ChannelAttributes,
    state: ChannelState,
    preopened: bool,
    child: Option<Child>,
}

impl ExternalChannel {
    pub fn id(&self) -> ChannelId {
        self.id
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Pid of the process the command runs in (the grandchild for daemonized
    /// channels). `None` for pre-opened channels.
    pub fn child_pid(&self) -> Option<i32> {
        self.child_pid
    }

    /// Process group targeted by group kills.
    pub fn group_id(&self) -> Option<i32> {
        self.group_id
    }

    pub fn prompt(&self) -> &[u8] {
        &self.prompt
    }

    pub fn attrs(&self) -> &ChannelAttributes {
        &self.attrs
    }

    pub fn state(&self) -> ChannelState {
        self.state
    }

    pub fn is_running(&self) -> bool {
        self.state == ChannelState::Running
    }

    pub fn is_preopened(&self) -> bool {
        self.preopened
    }

    fn write_all(&mut self, payload: &[u8]) -> io::Result<()> {
        let w = self
            .to_child
            .as_mut()
            .ok_or_else(|| io::Error::from(io::ErrorKind::BrokenPipe))?;
        w.write_all(payload)?;
        w.flush()
    }

    /// Closes both streams, delivers the kill signal per the attributes and
    /// reaps the direct child if there is one.
    fn terminate(&mut self) {
        if self.state == ChannelState::Terminated {
            return;
        }
        self.to_child = None;
        self.from_child = None;
        let sig = self.attrs.kill_signal;
        if sig != 0 {
            let target = if self.attrs.killall {
                self.group_id.map(|g| -g)
            } else {
                self.child_pid
            };
            // never let a bogus id turn into kill(0) or kill(-1)
            if let Some(pid) = target.filter(|p| p.abs() > 1) {
                // SAFETY: plain syscall; an ESRCH result just means the
                // process is already gone.
                if unsafe { libc::kill(pid, sig) } != 0 {
                    let err = io::Error::last_os_error();
                    if err.raw_os_error() != Some(libc::ESRCH) {
                        log::warn!("kill({pid}, {sig}) for channel {}: {err}", self.id);
                    }
                }
            }
        }
        if let Some(mut child) = self.child.take() {
            if let Err(e) = child.wait() {
                log::warn!("waiting for channel {}: {e}", self.id);
            }
        }
        self.state = ChannelState::Terminated;
    }
}

/// Numbered table of external channels with a current-channel cursor.
///
/// Dropping the registry terminates every running channel.
#[derive(Debug)]
pub struct ChannelRegistry {
    channels: BTreeMap<ChannelId, ExternalChannel>,
    current: Option<ChannelId>,
    default_attrs: ChannelAttributes,
    default_prompt: Vec<u8>,
    next_id: ChannelId,
    read_timeout: Option<Duration>,
}

impl Default for ChannelRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl ChannelRegistry {
    pub fn new() -> Self {
        ChannelRegistry {
            channels: BTreeMap::new(),
            current: None,
            default_attrs: ChannelAttributes::default(),
            default_prompt: Vec::new(),
            next_id: 1,
            read_timeout: None,
        }
    }

    pub fn current(&self) -> Option<ChannelId> {
        self.current
    }

    pub fn channel(&self, id: ChannelId) -> Option<&ExternalChannel> {
        self.channels.get(&id)
    }

    pub fn channels(&self) -> impl Iterator<Item = &ExternalChannel> {
        self.channels.values()
    }

    pub fn running_ids(&self) -> Vec<ChannelId> {
        self.channels
            .values()
            .filter(|c| c.is_running())
            .map(|c| c.id)
            .collect()
    }

    pub fn default_attrs(&self) -> &ChannelAttributes {
        &self.default_attrs
    }

    /// Replaces the attributes used for channels opened from now on.
    pub fn replace_default_attrs(&mut self, attrs: ChannelAttributes) {
        self.default_attrs = attrs;
    }

    pub fn default_prompt(&self) -> &[u8] {
        &self.default_prompt
    }

    /// Deadline applied to each [`read_until_prompt`](Self::read_until_prompt);
    /// `None` (the default) blocks indefinitely.
    pub fn set_read_timeout(&mut self, timeout: Option<Duration>) {
        self.read_timeout = timeout;
    }

    pub fn read_timeout(&self) -> Option<Duration> {
        self.read_timeout
    }

    fn insert(&mut self, mut channel: ExternalChannel) -> ChannelId {
        let id = self.next_id;
        self.next_id += 1;
        channel.id = id;
        self.channels.insert(id, channel);
        self.current = Some(id);
        id
    }

    /// Starts `command` under the current default attributes and makes it
    /// the current channel.
    pub fn open_channel(&mut self, command: &str) -> Result<ChannelId, ChannelError> {
        let spawn_failure = |source| ChannelError::SpawnFailure {
            command: command.to_string(),
            source,
        };
        if command.trim().is_empty() {
            return Err(spawn_failure(io::Error::new(
                io::ErrorKind::InvalidInput,
                "empty command",
            )));
        }
        let attrs = self.default_attrs.clone();
        let spawned = spawn::spawn(command, &attrs).map_err(spawn_failure)?;
        log::debug!(
            "opened {command:?} pid={} pgid={}",
            spawned.child_pid,
            spawned.group_id
        );
        Ok(self.insert(ExternalChannel {
            id: 0,
            command: command.to_string(),
            child_pid: Some(spawned.child_pid),
            group_id: Some(spawned.group_id),
            to_child: Some(spawned.to_child),
            from_child: Some(LineReader::new(spawned.from_child)),
            prompt: self.default_prompt.clone(),
            attrs,
            state: ChannelState::Running,
            preopened: false,
            child: spawned.child,
        }))
    }

    /// Registers an already connected descriptor pair as a pre-opened
    /// channel with the fixed pre-opened attribute set.
    pub fn register_preopened(&mut self, from_parent: File, to_parent: File) -> ChannelId {
        self.register_preopened_reader(LineReader::new(from_parent), to_parent)
    }

    pub(crate) fn register_preopened_reader(
        &mut self,
        from_parent: LineReader,
        to_parent: File,
    ) -> ChannelId {
        self.insert(ExternalChannel {
            id: 0,
            command: String::new(),
            child_pid: None,
            group_id: None,
            to_child: Some(to_parent),
            from_child: Some(from_parent),
            prompt: self.default_prompt.clone(),
            attrs: ChannelAttributes::preopened(),
            state: ChannelState::Running,
            preopened: true,
            child: None,
        })
    }

    fn current_channel(&mut self) -> Result<&mut ExternalChannel, ChannelError> {
        let id = self.current.ok_or(ChannelError::NoCurrentChannel)?;
        match self.channels.get_mut(&id) {
            Some(c) if c.is_running() => Ok(c),
            _ => Err(ChannelError::NoCurrentChannel),
        }
    }

    /// Writes exactly `payload` to the current channel and flushes it. No
    /// newline is appended.
    pub fn send(&mut self, payload: &[u8]) -> Result<(), ChannelError> {
        let channel = self.current_channel()?;
        let id = channel.id;
        match channel.write_all(payload) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {
                channel.terminate();
                self.current = None;
                Err(ChannelError::BrokenChannel(id))
            }
            Err(source) => Err(ChannelError::Io { id, source }),
        }
    }

    /// Reads the current channel's output up to its next prompt line and
    /// returns the text before it; see [`read_frame`].
    pub fn read_until_prompt(&mut self, maxlength: Option<usize>) -> Result<Vec<u8>, ChannelError> {
        let deadline = self.read_timeout.map(|t| Instant::now() + t);
        let channel = self.current_channel()?;
        let id = channel.id;
        let reader = channel
            .from_child
            .as_mut()
            .ok_or(ChannelError::NoCurrentChannel)?;
        read_frame(reader, &channel.prompt, maxlength, deadline).map_err(|e| match e {
            FrameError::EndOfStream(partial) => ChannelError::EndOfStreamBeforePrompt { id, partial },
            FrameError::TimedOut => ChannelError::Timeout(id),
            FrameError::Io(source) => ChannelError::Io { id, source },
        })
    }

    /// Sets the prompt of the current channel (if any) and of every channel
    /// opened afterwards. An empty prompt means an empty line.
    pub fn set_prompt(&mut self, prompt: &[u8]) {
        self.default_prompt = prompt.to_vec();
        if let Ok(channel) = self.current_channel() {
            channel.prompt = prompt.to_vec();
        }
    }

    pub fn set_current(&mut self, id: ChannelId) -> Result<(), ChannelError> {
        match self.channels.get(&id) {
            Some(c) if c.is_running() => {
                self.current = Some(id);
                Ok(())
            }
            _ => Err(ChannelError::UnknownDescriptor(id)),
        }
    }

    /// Terminates one channel. `None` means the current channel, `Some(0)`
    /// means every running channel.
    pub fn remove_channel(&mut self, id: Option<ChannelId>) -> Result<(), ChannelError> {
        match id {
            Some(0) => {
                self.shutdown_all();
                Ok(())
            }
            Some(n) => {
                let channel = self
                    .channels
                    .get_mut(&n)
                    .filter(|c| c.is_running())
                    .ok_or(ChannelError::UnknownDescriptor(n))?;
                channel.terminate();
                if self.current == Some(n) {
                    self.current = None;
                }
                Ok(())
            }
            None => {
                let n = self.current.ok_or(ChannelError::NoCurrentChannel)?;
                self.remove_channel(Some(n))
            }
        }
    }

    /// Merges an `attr=value,...` list into the defaults for new channels.
    pub fn set_default_attrs(&mut self, spec: &str) -> Result<(), ChannelError> {
        self.default_attrs.merge_spec(spec)?;
        Ok(())
    }

    /// Terminates every running channel. Already terminated channels are
    /// left alone.
    pub fn shutdown_all(&mut self) {
        for channel in self.channels.values_mut() {
            channel.terminate();
        }
        self.current = None;
    }
}

impl Drop for ChannelRegistry {
    fn drop(&mut self) {
        self.shutdown_all();
    }
}
