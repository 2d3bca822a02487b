use thiserror::Error;

/// Errors surfaced to gateway clients. Each maps to one HTTP status and is
/// sent as `{"error": {"kind": ..., "message": ...}}`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("mission `{0}` not found")]
    MissionNotFound(String),
    #[error("session `{0}` not found")]
    SessionNotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("session is busy")]
    Busy,
    #[error("call budget exhausted ({used}/{limit})")]
    BudgetExceeded { used: u32, limit: u32 },
    #[error("session has finished")]
    SessionFinished,
    #[error("wrong mode: {0}")]
    WrongMode(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl GatewayError {
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::MissionNotFound(_) => "MissionNotFound",
            GatewayError::SessionNotFound(_) => "SessionNotFound",
            GatewayError::Conflict(_) => "Conflict",
            GatewayError::Busy => "Busy",
            GatewayError::BudgetExceeded { .. } => "BudgetExceeded",
            GatewayError::SessionFinished => "SessionFinished",
            GatewayError::WrongMode(_) => "WrongMode",
            GatewayError::InvalidRequest(_) => "InvalidRequest",
        }
    }

    pub fn status_code(&self) -> u16 {
        match self {
            GatewayError::MissionNotFound(_) | GatewayError::SessionNotFound(_) => 404,
            GatewayError::Conflict(_)
            | GatewayError::Busy
            | GatewayError::SessionFinished
            | GatewayError::WrongMode(_) => 409,
            GatewayError::BudgetExceeded { .. } => 429,
            GatewayError::InvalidRequest(_) => 400,
        }
    }
}
