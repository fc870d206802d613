//! Spawn-time policy for external commands and the `attr=value` grammar
//! used to change it.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Highest signal number accepted by the `kill` attribute.
pub const MAX_SIGNAL: i32 = 64;

/// How the command text of a channel is turned into an argv.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShellMode {
    /// Run `<prefix words...> <command>`; the prefix is split on single spaces.
    Shell(String),
    /// Exec the command directly, searching `PATH` when the name has no slash.
    NoShell,
}

impl Default for ShellMode {
    fn default() -> Self {
        ShellMode::Shell("/bin/sh -c".to_string())
    }
}

impl fmt::Display for ShellMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShellMode::Shell(prefix) => f.write_str(prefix),
            ShellMode::NoShell => f.write_str("noshell"),
        }
    }
}

/// Attributes applied when a channel is opened. A running channel keeps the
/// snapshot it was started with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelAttributes {
    /// Signal sent on removal; 0 sends nothing.
    pub kill_signal: i32,
    /// Signal the whole process group instead of the initial process only.
    pub killall: bool,
    /// Detach into a new session and process group, reparented to init.
    pub daemon: bool,
    pub shell: ShellMode,
    /// File the child's standard error is appended to.
    pub stderr_target: PathBuf,
}

impl Default for ChannelAttributes {
    fn default() -> Self {
        ChannelAttributes {
            kill_signal: 9,
            killall: true,
            daemon: true,
            shell: ShellMode::default(),
            stderr_target: PathBuf::from("/dev/null"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttrParseError {
    #[error("empty attribute list")]
    Empty,
    #[error("expected attr=value, got {0:?}")]
    MissingValue(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("bad value {value:?} for attribute {attr}")]
    BadValue { attr: &'static str, value: String },
    #[error("kill signal {0} outside 0..={MAX_SIGNAL}")]
    SignalOutOfRange(i64),
}

fn parse_bool(attr: &'static str, value: &str) -> Result<bool, AttrParseError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(AttrParseError::BadValue {
            attr,
            value: value.to_string(),
        }),
    }
}

impl ChannelAttributes {
    /// Fixed attribute set of channels inherited from a parent process.
    pub fn preopened() -> Self {
        ChannelAttributes {
            kill_signal: 0,
            killall: false,
            daemon: false,
            shell: ShellMode::NoShell,
            stderr_target: PathBuf::from("/dev/tty"),
        }
    }

    /// Applies a comma separated `attr=value` list. Attributes not named keep
    /// their value. The update is all-or-nothing: on error `self` is
    /// unchanged.
    pub fn merge_spec(&mut self, spec: &str) -> Result<(), AttrParseError> {
        let spec = spec.trim();
        if spec.is_empty() {
            return Err(AttrParseError::Empty);
        }
        let mut next = self.clone();
        for item in spec.split(',') {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| AttrParseError::MissingValue(item.to_string()))?;
            match name.trim() {
                "kill" => {
                    let n: i64 = value.trim().parse().map_err(|_| AttrParseError::BadValue {
                        attr: "kill",
                        value: value.to_string(),
                    })?;
                    if !(0..=MAX_SIGNAL as i64).contains(&n) {
                        return Err(AttrParseError::SignalOutOfRange(n));
                    }
                    next.kill_signal = n as i32;
                }
                "killall" => next.killall = parse_bool("killall", value.trim())?,
                "daemon" => next.daemon = parse_bool("daemon", value.trim())?,
                "shell" => {
                    let value = value.trim();
                    if value.is_empty() {
                        return Err(AttrParseError::BadValue {
                            attr: "shell",
                            value: value.to_string(),
                        });
                    }
                    next.shell = if value == "noshell" {
                        ShellMode::NoShell
                    } else {
                        ShellMode::Shell(value.to_string())
                    };
                }
                "stderr" => {
                    let value = value.trim();
                    if value.is_empty() {
                        return Err(AttrParseError::BadValue {
                            attr: "stderr",
                            value: value.to_string(),
                        });
                    }
                    next.stderr_target = PathBuf::from(value);
                }
                other => return Err(AttrParseError::UnknownAttribute(other.to_string())),
            }
        }
        *self = next;
        Ok(())
    }
}

impl fmt::Display for ChannelAttributes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "kill={},killall={},daemon={},stderr={},shell={}",
            self.kill_signal,
            self.killall,
            self.daemon,
            self.stderr_target.display(),
            self.shell
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults() {
        let a = ChannelAttributes::default();
        assert_eq!(a.kill_signal, 9);
        assert!(a.killall);
        assert!(a.daemon);
        assert_eq!(a.shell, ShellMode::Shell("/bin/sh -c".into()));
        assert_eq!(a.stderr_target, PathBuf::from("/dev/null"));
    }

    #[test]
    fn noshell_example_leaves_other_fields() {
        let mut a = ChannelAttributes::default();
        a.merge_spec("shell=noshell,kill=9,killall=false").unwrap();
        assert_eq!(a.shell, ShellMode::NoShell);
        assert_eq!(a.kill_signal, 9);
        assert!(!a.killall);
        assert!(a.daemon);
        assert_eq!(a.stderr_target, PathBuf::from("/dev/null"));
    }

    #[test]
    fn footgun_config_parses() {
        let mut a = ChannelAttributes::default();
        a.merge_spec("daemon=false,kill=9,killall=true").unwrap();
        assert!(!a.daemon);
        assert!(a.killall);
    }

    #[test]
    fn rejects_bad_input() {
        let mut a = ChannelAttributes::default();
        assert!(matches!(
            a.merge_spec("kill=banana"),
            Err(AttrParseError::BadValue { attr: "kill", .. })
        ));
        assert_eq!(a.merge_spec("kill=65"), Err(AttrParseError::SignalOutOfRange(65)));
        assert_eq!(a.merge_spec("kill=-1"), Err(AttrParseError::SignalOutOfRange(-1)));
        assert!(matches!(a.merge_spec("daemon=yes"), Err(AttrParseError::BadValue { .. })));
        assert!(matches!(a.merge_spec("colour=red"), Err(AttrParseError::UnknownAttribute(_))));
        assert!(matches!(a.merge_spec("kill"), Err(AttrParseError::MissingValue(_))));
        assert_eq!(a.merge_spec(""), Err(AttrParseError::Empty));
        // a failing item later in the list must not apply the earlier ones
        assert!(a.merge_spec("kill=3,daemon=maybe").is_err());
        assert_eq!(a, ChannelAttributes::default());
    }

    #[test]
    fn preopened_display() {
        assert_eq!(
            ChannelAttributes::preopened().to_string(),
            "kill=0,killall=false,daemon=false,stderr=/dev/tty,shell=noshell"
        );
    }

    fn arb_attrs() -> impl Strategy<Value = ChannelAttributes> {
        (
            0..=64i32,
            any::<bool>(),
            any::<bool>(),
            prop_oneof![Just(ShellMode::NoShell), "/bin/[a-z]{1,5}( -c)?".prop_map(ShellMode::Shell)],
            "/tmp/[a-z]{1,8}",
        )
            .prop_map(|(kill_signal, killall, daemon, shell, stderr)| ChannelAttributes {
                kill_signal,
                killall,
                daemon,
                shell,
                stderr_target: PathBuf::from(stderr),
            })
    }

    proptest! {
        #[test]
        fn merge_only_touches_named(before in arb_attrs(), donor in arb_attrs(), mask in 1u8..32) {
            let mut items = Vec::new();
            if mask & 1 != 0 { items.push(format!("kill={}", donor.kill_signal)); }
            if mask & 2 != 0 { items.push(format!("killall={}", donor.killall)); }
            if mask & 4 != 0 { items.push(format!("daemon={}", donor.daemon)); }
            if mask & 8 != 0 { items.push(format!("shell={}", donor.shell)); }
            if mask & 16 != 0 { items.push(format!("stderr={}", donor.stderr_target.display())); }
            let mut after = before.clone();
            after.merge_spec(&items.join(",")).unwrap();
            let pick = |bit: u8| mask & bit != 0;
            prop_assert_eq!(after.kill_signal, if pick(1) { donor.kill_signal } else { before.kill_signal });
            prop_assert_eq!(after.killall, if pick(2) { donor.killall } else { before.killall });
            prop_assert_eq!(after.daemon, if pick(4) { donor.daemon } else { before.daemon });
            prop_assert_eq!(&after.shell, if pick(8) { &donor.shell } else { &before.shell });
            prop_assert_eq!(&after.stderr_target, if pick(16) { &donor.stderr_target } else { &before.stderr_target });
        }
    }
}
