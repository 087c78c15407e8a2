use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps these onto process exit codes, so variants are grouped by
/// failure class rather than by module.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A config field failed validation. `field` is the dotted path into the
    /// config file, e.g. `map.cell_size`.
    #[error("config error at `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// Config file could not be parsed at all.
    #[error("config parse error: {0}")]
    Parse(String),

    /// An operation was called outside its documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector/matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Training produced a non-finite loss or weight.
    #[error("training diverged: {0}")]
    Divergence(String),

    /// A checkpoint file was malformed or inconsistent with the config.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// The joint action space of a run would exceed the configured cap.
    #[error("action space of {size} joint actions exceeds the cap of {cap}; \
             shrink the fleet, the power levels, or the surface resolution")]
    ActionSpaceCap { size: u128, cap: u64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CoreError {
    pub fn invalid_config(field: &str, reason: impl Into<String>) -> Self {
        CoreError::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
