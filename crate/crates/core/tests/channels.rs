//! Process-level behaviour of channels: sessions, groups, stderr, byte
//! accounting and reaping.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use extlink_core::channel::ChannelError;
use extlink_core::ChannelRegistry;

fn registry(attrs: &str) -> ChannelRegistry {
    let mut reg = ChannelRegistry::new();
    reg.set_default_attrs(attrs).unwrap();
    reg.set_read_timeout(Some(Duration::from_secs(5)));
    reg
}

fn reply(reg: &mut ChannelRegistry) -> String {
    String::from_utf8(reg.read_until_prompt(None).unwrap()).unwrap()
}

fn stat_field(pid: i32, index: usize) -> Option<String> {
    let stat = fs::read_to_string(format!("/proc/{pid}/stat")).ok()?;
    // fields after the parenthesised command name, counting from `state` = 3
    let rest = stat.rsplit(')').next()?;
    rest.split_whitespace().nth(index - 3).map(str::to_string)
}

fn alive(pid: i32) -> bool {
    stat_field(pid, 3).is_some_and(|s| s != "Z" && s != "X")
}

fn wait_for(limit: Duration, mut f: impl FnMut() -> bool) -> bool {
    let end = Instant::now() + limit;
    while Instant::now() < end {
        if f() {
            return true;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    f()
}

fn own_sid() -> i32 {
    unsafe { libc::getsid(0) }
}

const SHOW_IDS: &str = "cut -d' ' -f5,6 /proc/$$/stat; echo; exec cat";

#[test]
fn daemon_gets_new_session_and_group() {
    let mut reg = registry("daemon=true");
    let id = reg.open_channel(SHOW_IDS).unwrap();
    let ids = reply(&mut reg);
    let (pgrp, sid) = ids.split_once(' ').unwrap();
    let ch = reg.channel(id).unwrap();
    let pid = ch.child_pid().unwrap();
    assert_eq!(sid.parse::<i32>().unwrap(), pid);
    assert_eq!(pgrp.parse::<i32>().unwrap(), pid);
    assert_eq!(ch.group_id(), Some(pid));
    assert_ne!(sid.parse::<i32>().unwrap(), own_sid());
    // reparented away from us
    assert_ne!(stat_field(pid, 4).unwrap().parse::<u32>().unwrap(), std::process::id());
    // no controlling terminal
    assert_eq!(stat_field(pid, 7).as_deref(), Some("0"));
    reg.shutdown_all();
    assert!(wait_for(Duration::from_secs(2), || !alive(pid)));
}

#[test]
fn non_daemon_shares_our_session() {
    let mut reg = registry("daemon=false,killall=false");
    let id = reg.open_channel(SHOW_IDS).unwrap();
    let ids = reply(&mut reg);
    let (pgrp, sid) = ids.split_once(' ').unwrap();
    assert_eq!(sid.parse::<i32>().unwrap(), own_sid());
    // shell mode keeps the caller's group
    assert_eq!(pgrp.parse::<i32>().unwrap(), unsafe { libc::getpgrp() });
    let pid = reg.channel(id).unwrap().child_pid().unwrap();
    assert_eq!(stat_field(pid, 4).unwrap().parse::<u32>().unwrap(), std::process::id());
    reg.shutdown_all();
}

#[test]
fn non_daemon_noshell_gets_own_group() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("ids.sh");
    fs::write(&script, SHOW_IDS).unwrap();
    let mut reg = registry("daemon=false,killall=true,kill=9,shell=noshell");
    let id = reg.open_channel(&format!("sh {}", script.display())).unwrap();
    let ids = reply(&mut reg);
    let (pgrp, sid) = ids.split_once(' ').unwrap();
    let pid = reg.channel(id).unwrap().child_pid().unwrap();
    assert_eq!(pgrp.parse::<i32>().unwrap(), pid);
    assert_eq!(sid.parse::<i32>().unwrap(), own_sid());
    // group kill hits the child's group, not ours
    reg.remove_channel(Some(id)).unwrap();
    assert!(!alive(pid));
}

#[test]
fn queued_replies_are_read_one_at_a_time() {
    let mut reg = registry("daemon=false,killall=false");
    reg.open_channel("cat").unwrap();
    reg.send(b"first\nline\n\nsecond\n\n").unwrap();
    assert_eq!(reply(&mut reg), "first\nline");
    assert_eq!(reply(&mut reg), "second");
    reg.send(b"(a+b)^3\nREADY\n").unwrap();
    reg.set_prompt(b"READY");
    assert_eq!(reply(&mut reg), "(a+b)^3");
}

#[test]
fn crlf_prompt_lines_are_recognised() {
    let mut reg = registry("daemon=false,killall=false");
    reg.set_prompt(b"OK");
    reg.open_channel("printf 'a\\r\\nOK\\r\\n'; exec cat").unwrap();
    assert_eq!(reply(&mut reg), "a\r");
}

#[test]
fn send_writes_exactly_the_payload() {
    let dir = tempfile::tempdir().unwrap();
    let count = dir.path().join("count");
    let mut reg = registry("kill=0,daemon=true");
    let payload = b"(a+b)^2\n\n\x00\xffno newline";
    reg.open_channel(&format!("wc -c > {}", count.display())).unwrap();
    reg.send(payload).unwrap();
    reg.send(b"").unwrap();
    // kill=0: closing the pipe is all wc gets
    reg.remove_channel(None).unwrap();
    let counted = || fs::read_to_string(&count).ok().filter(|s| s.ends_with('\n'));
    assert!(wait_for(Duration::from_secs(2), || counted().is_some()));
    assert_eq!(counted().unwrap().trim(), payload.len().to_string());
}

#[test]
fn stderr_goes_to_target_appending() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("err.log");
    fs::write(&log, "old\n").unwrap();
    let mut reg = registry(&format!("daemon=false,killall=false,stderr={}", log.display()));
    for _ in 0..2 {
        reg.open_channel("echo oops >&2; echo; exec cat").unwrap();
        assert_eq!(reply(&mut reg), "");
        reg.remove_channel(None).unwrap();
    }
    assert_eq!(fs::read_to_string(&log).unwrap(), "old\noops\noops\n");
}

#[test]
fn end_of_stream_is_distinct_from_empty_reply() {
    let mut reg = registry("daemon=false,killall=false");
    reg.open_channel("echo").unwrap();
    assert_eq!(reply(&mut reg), "");
    reg.open_channel("printf 'partial\\nno prompt'").unwrap();
    match reg.read_until_prompt(None) {
        Err(ChannelError::EndOfStreamBeforePrompt { partial, .. }) => assert_eq!(partial, b"partial\nno prompt"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn shutdown_reaps_direct_children() {
    let mut reg = registry("daemon=false,killall=false");
    let pids: Vec<i32> = (0..2)
        .map(|_| {
            let id = reg.open_channel("cat").unwrap();
            reg.channel(id).unwrap().child_pid().unwrap()
        })
        .collect();
    reg.shutdown_all();
    assert!(reg.running_ids().is_empty());
    for pid in pids {
        let r = unsafe { libc::waitpid(pid, std::ptr::null_mut(), libc::WNOHANG) };
        assert_eq!(r, -1, "pid {pid} was left for us to reap");
        assert!(!Path::new(&format!("/proc/{pid}")).exists());
    }
    // nothing left to signal the second time
    reg.shutdown_all();
}

#[test]
fn remove_all_with_three_channels() {
    let mut reg = registry("daemon=true");
    let pids: Vec<i32> = (0..3)
        .map(|_| {
            let id = reg.open_channel("cat").unwrap();
            reg.channel(id).unwrap().child_pid().unwrap()
        })
        .collect();
    assert_eq!(reg.running_ids(), [1, 2, 3]);
    reg.remove_channel(Some(0)).unwrap();
    assert!(reg.running_ids().is_empty());
    assert_eq!(reg.current(), None);
    assert!(wait_for(Duration::from_secs(2), || pids.iter().all(|&p| !alive(p))));
    assert!(matches!(reg.remove_channel(None), Err(ChannelError::NoCurrentChannel)));
    assert!(matches!(reg.set_current(2), Err(ChannelError::UnknownDescriptor(2))));
    // ids are not reused
    assert_eq!(reg.open_channel("cat").unwrap(), 4);
}

#[test]
fn noshell_uses_default_path_without_path_variable() {
    // PATH is process-global, so check resolution directly
    let found = extlink_core::channel::resolve_executable("cat", None).unwrap();
    assert_eq!(found, Path::new("/bin/cat"));
    let mut reg = registry("shell=noshell,daemon=false,killall=false");
    assert!(matches!(
        reg.open_channel("no-such-binary-xyz"),
        Err(ChannelError::SpawnFailure { .. })
    ));
    reg.open_channel("cat -u").unwrap();
    reg.send(b"x\n\n").unwrap();
    assert_eq!(reply(&mut reg), "x");
}
