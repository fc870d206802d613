//! Line-buffered syntax filters for CAS gateways and the `acc()`/`dd(#)`
//! masking gateway.

mod filter;
mod mask;

pub use filter::{
    compose, run_filter, Filter, FilterParseError, FilterSpec, LineFilter, Pipeline,
    DEFAULT_MARKER, DEFAULT_PROMPT,
};
pub use mask::{Gateway, GatewayError, MaskingStore, Simplifier};
