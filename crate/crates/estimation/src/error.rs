use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The slot/advertiser design splits into pieces whose relative
    /// effects cannot be identified.
    #[error("design is disconnected into {} components: {}", components.len(), describe(components))]
    Disconnected { components: Vec<Component> },
    #[error("slot effects of slots {upper} and {lower} are equal; ICC is undefined")]
    FlatSlotEffects { upper: usize, lower: usize },
    #[error(transparent)]
    Core(#[from] ibpa_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Slots and advertisers linked by shared observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub slots: Vec<u32>,
    pub advertisers: Vec<String>,
}

fn describe(components: &[Component]) -> String {
    components
        .iter()
        .map(|c| format!("{{slots {:?}, advertisers {:?}}}", c.slots, c.advertisers))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, EstimationError>;

pub(crate) fn invalid(msg: impl Into<String>) -> EstimationError {
    EstimationError::InvalidInput(msg.into())
}
