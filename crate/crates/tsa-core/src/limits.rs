use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

/// Hard size caps for the exponential-time routines.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Caps {
    /// n + m for the fully adaptive DP.
    pub fa_agents: usize,
    /// Initiating side size for the one-sided adaptive DP.
    pub oa_side: usize,
    /// max(n, m) for the one-sided static optimum.
    pub os_side: usize,
    /// n * m for the fully static brute force.
    pub fs_edges: usize,
    /// Initiating side size for exact one-sided static evaluation.
    pub static_eval_side: usize,
    /// n + m for exact evaluation of an arbitrary adaptive policy.
    pub adaptive_eval_agents: usize,
    /// max(n, m) for the subset-enumerated relaxation.
    pub relaxation_side: usize,
    /// Edges in an exactly solved high-value subproblem.
    pub highvalue_edges: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            fa_agents: 8,
            oa_side: 8,
            os_side: 4,
            fs_edges: 20,
            static_eval_side: 18,
            adaptive_eval_agents: 8,
            relaxation_side: 6,
            highvalue_edges: 20,
        }
    }
}

/// Cooperative time limit checked between DP states and simplex pivots.
#[derive(Clone, Copy, Debug, Default)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn none() -> Self {
        Deadline(None)
    }

    pub fn after(d: Duration) -> Self {
        Deadline(Some(Instant::now() + d))
    }

    pub fn check(&self) -> Result<()> {
        match self.0 {
            Some(t) if Instant::now() >= t => Err(Error::TimeLimit),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Limits {
    pub caps: Caps,
    pub deadline: Deadline,
}

impl Limits {
    pub fn with_caps(caps: Caps) -> Self {
        Limits {
            caps,
            deadline: Deadline::none(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expired_deadline_errors() {
        let d = Deadline::after(Duration::from_secs(0));
        assert!(matches!(d.check(), Err(Error::TimeLimit)));
        assert!(Deadline::none().check().is_ok());
    }
}
