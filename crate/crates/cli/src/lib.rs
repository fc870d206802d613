//! Shared bits of the command-line tools.

/// Logs to standard error; `RUST_LOG` overrides the `warn` default.
pub fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
}

/// Accepts the traditional single-dash `-pipe` spelling by rewriting it to
/// `--pipe` before argument parsing.
pub fn normalize_pipe_flag<I: IntoIterator<Item = std::ffi::OsString>>(args: I) -> Vec<std::ffi::OsString> {
    args.into_iter()
        .map(|a| if a == "-pipe" { "--pipe".into() } else { a })
        .collect()
}
