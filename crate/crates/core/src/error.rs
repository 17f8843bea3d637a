use thiserror::Error;

use crate::market::Tick;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("price {price} outside grid [{min}, {max}]")]
    OffGrid { price: Tick, min: Tick, max: Tick },

    #[error("invalid order: {0}")]
    InvalidOrder(String),

    #[error("phase {phase} exceeded {limit} ticks with stranded orders: {entries}")]
    StrandedOrders {
        phase: u64,
        limit: u64,
        entries: String,
    },

    #[error("invariant `{clause}` violated{}: {detail}", location(.phase, .order_id))]
    Invariant {
        clause: &'static str,
        phase: Option<u64>,
        order_id: Option<u64>,
        detail: String,
    },

    #[error("malformed run artifact {path}: {detail}")]
    Artifact { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

fn location(phase: &Option<u64>, order_id: &Option<u64>) -> String {
    match (phase, order_id) {
        (Some(p), Some(o)) => format!(" in phase {p} (order {o})"),
        (Some(p), None) => format!(" in phase {p}"),
        (None, Some(o)) => format!(" (order {o})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn invariant(clause: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            clause,
            phase: None,
            order_id: None,
            detail: detail.into(),
        }
    }
}
