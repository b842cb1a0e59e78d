use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("distance {distance} m is below the reference distance {reference} m")]
    BelowReferenceDistance { distance: f64, reference: f64 },
    #[error("cannot split {users} users into {groups} groups of {per_group}")]
    GroupMismatch { users: usize, groups: usize, per_group: usize },
    #[error("receiver {receiver} cannot decode message {message}: SIC only decodes weaker-user messages")]
    DecodeOrder { receiver: usize, message: usize },
    #[error("infeasible: {0}")]
    Infeasible(String),
}
