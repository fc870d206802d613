//! Buffered line reading over a raw pipe, with an optional deadline, and
//! prompt-delimited framing on top of it.

use std::fs::File;
use std::io::{self, Read};
use std::os::fd::AsRawFd;
use std::time::Instant;

/// Outcome of a framed read that did not produce a reply.
#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    /// The stream ended before a prompt line; carries what was read.
    #[error("end of stream before prompt after {} bytes", .0.len())]
    EndOfStream(Vec<u8>),
    #[error("timed out waiting for prompt")]
    TimedOut,
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for FrameError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::TimedOut {
            FrameError::TimedOut
        } else {
            FrameError::Io(e)
        }
    }
}

/// Line reader that owns the read end of a pipe.
///
/// Unlike `BufReader`, it can wait with a deadline (via `poll(2)`) and caps
/// line length when asked to.
#[derive(Debug)]
pub struct LineReader {
    file: File,
    buf: Vec<u8>,
    eof: bool,
}

const CHUNK: usize = 8192;

impl LineReader {
    pub fn new(file: File) -> Self {
        LineReader {
            file,
            buf: Vec::new(),
            eof: false,
        }
    }

    pub fn get_ref(&self) -> &File {
        &self.file
    }

    fn wait_readable(&self, deadline: Option<Instant>) -> io::Result<()> {
        let Some(deadline) = deadline else {
            return Ok(());
        };
        loop {
            let now = Instant::now();
            if now >= deadline {
                return Err(io::Error::new(io::ErrorKind::TimedOut, "read deadline passed"));
            }
            let remaining = deadline - now;
            let ms = remaining.as_millis().clamp(1, i32::MAX as u128) as libc::c_int;
            let mut pfd = libc::pollfd {
                fd: self.file.as_raw_fd(),
                events: libc::POLLIN,
                revents: 0,
            };
            // SAFETY: pfd is a valid pollfd for the duration of the call.
            let rc = unsafe { libc::poll(&mut pfd, 1, ms) };
            if rc < 0 {
                let err = io::Error::last_os_error();
                if err.kind() == io::ErrorKind::Interrupted {
                    continue;
                }
                return Err(err);
            }
            if rc > 0 {
                // POLLHUP/POLLERR also make the next read return promptly.
                return Ok(());
            }
        }
    }

    fn fill(&mut self, deadline: Option<Instant>) -> io::Result<usize> {
        if self.eof {
            return Ok(0);
        }
        self.wait_readable(deadline)?;
        let mut chunk = [0u8; CHUNK];
        loop {
            match self.file.read(&mut chunk) {
                Ok(0) => {
                    self.eof = true;
                    return Ok(0);
                }
                Ok(n) => {
                    self.buf.extend_from_slice(&chunk[..n]);
                    return Ok(n);
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            }
        }
    }

    /// Reads one line including its `\n`. At end of stream a final partial
    /// line is returned without newline; `None` means nothing was left.
    pub fn read_line(&mut self, deadline: Option<Instant>) -> io::Result<Option<Vec<u8>>> {
        self.read_line_capped(usize::MAX, deadline)
    }

    /// Like [`read_line`](Self::read_line) but fails with `InvalidData` once
    /// more than `cap` bytes arrive without a newline.
    pub fn read_line_capped(
        &mut self,
        cap: usize,
        deadline: Option<Instant>,
    ) -> io::Result<Option<Vec<u8>>> {
        let mut scanned = 0;
        loop {
            if let Some(pos) = self.buf[scanned..].iter().position(|&b| b == b'\n') {
                let end = scanned + pos + 1;
                if end - 1 > cap {
                    return Err(io::Error::new(io::ErrorKind::InvalidData, "line too long"));
                }
                return Ok(Some(self.buf.drain(..end).collect()));
            }
            scanned = self.buf.len();
            if scanned > cap {
                return Err(io::Error::new(io::ErrorKind::InvalidData, "line too long"));
            }
            if self.fill(deadline)? == 0 {
                if self.buf.is_empty() {
                    return Ok(None);
                }
                return Ok(Some(std::mem::take(&mut self.buf)));
            }
        }
    }
}

/// True when `line` (as returned by [`LineReader::read_line`]) is exactly
/// the prompt: one trailing `\n` and then one trailing `\r` are stripped
/// before a byte-exact comparison. A final partial line never counts.
pub fn is_prompt_line(line: &[u8], prompt: &[u8]) -> bool {
    let Some(body) = line.strip_suffix(b"\n") else {
        return false;
    };
    let body = body.strip_suffix(b"\r").unwrap_or(body);
    body == prompt
}

/// Reads lines up to and including the next prompt line and returns the
/// text before it with its final newline removed. With `maxlength`, only
/// that many leading bytes are kept; the rest is still consumed.
pub fn read_frame(
    reader: &mut LineReader,
    prompt: &[u8],
    maxlength: Option<usize>,
    deadline: Option<Instant>,
) -> Result<Vec<u8>, FrameError> {
    let mut text = Vec::new();
    loop {
        match reader.read_line(deadline)? {
            None => return Err(FrameError::EndOfStream(text)),
            Some(line) => {
                if is_prompt_line(&line, prompt) {
                    break;
                }
                if !line.ends_with(b"\n") {
                    text.extend_from_slice(&line);
                    return Err(FrameError::EndOfStream(text));
                }
                text.extend_from_slice(&line);
            }
        }
    }
    if text.last() == Some(&b'\n') {
        text.pop();
    }
    if let Some(max) = maxlength {
        text.truncate(max);
    }
    Ok(text)
}
