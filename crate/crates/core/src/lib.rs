//! Prompt-framed duplex channels to external programs.
//!
//! * [`channel`]: spawn, address, talk to and terminate external commands.
//! * [`embed`]: the pre-opened channel handshake, child and parent side.
//! * [`script`]: a small line-oriented command language driving channels.
//! * [`gateway`]: line-buffered syntax filters and the `dd(#)` masking store.
//! * [`cas`]: exact univariate rational-function arithmetic and the mock
//!   CAS server loop.
//! * [`bench`]: the system/pipe/external interaction-mode benchmark.

pub mod bench;
pub mod cas;
pub mod channel;
pub mod embed;
pub mod gateway;
pub mod script;

pub use channel::{
    AttrParseError, ChannelAttributes, ChannelError, ChannelId, ChannelRegistry, ChannelState,
    ExternalChannel, ShellMode,
};
