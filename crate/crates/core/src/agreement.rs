//! Volunteer agreement score.
//!
//! The score is the normalized majority margin `|accepts - rejects| / (accepts + rejects)`.
//! It is 1 for a unanimous decision in either direction and 0 for an even split.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("agreement is undefined for zero votes")]
pub struct ZeroVotes;

pub fn compute_agreement(accepts: u32, rejects: u32) -> Result<f64, ZeroVotes> {
    let total = u64::from(accepts) + u64::from(rejects);
    if total == 0 {
        return Err(ZeroVotes);
    }
    let margin = u64::from(accepts.abs_diff(rejects));
    Ok(margin as f64 / total as f64)
}
