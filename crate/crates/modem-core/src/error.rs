use thiserror::Error;

/// Unified error type for the whole modem stack.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or configuration value. The message names the
    /// offending parameter and constraint.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// A requested rate cannot be met by any subcarrier selection.
    #[error("requested rate {requested_bps:.1} bit/s infeasible; maximum achievable {max_bps:.1} bit/s")]
    Infeasible { requested_bps: f64, max_bps: f64 },

    /// Frame-level integrity check failed; carries the raw decoded bytes for
    /// diagnostics.
    #[error("integrity check failed on {} byte frame", .bytes.len())]
    Integrity { bytes: Vec<u8> },

    /// ARQ gave up on a packet after exhausting retries.
    #[error("delivery failed after {attempts} attempts ({delivered_packets} packets delivered)")]
    Delivery {
        attempts: u32,
        delivered_packets: u64,
    },

    /// Malformed configuration file.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }
}
