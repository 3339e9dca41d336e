//! Trajectory storage between updates.

use crate::error::Error;
use crate::Result;

/// One recorded step: observation, both actions (the continuous one in
/// pre-squash space so log-probabilities can be recomputed), both behavior
/// log-probabilities, both rewards, and the per-agent target-critic values.
/// For the shared-critic algorithms the two value slots coincide.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub alloc: Vec<Option<usize>>,
    pub resol_z: Vec<f64>,
    pub logp_alloc: f64,
    pub logp_resol: f64,
    pub reward_alloc: f64,
    pub reward_resol: f64,
    pub value_alloc: f64,
    pub value_resol: f64,
}

/// Fixed-capacity trajectory segment. Advantages are only computed over a
/// full segment closed with the bootstrap values of the state after it; the
/// buffer is cleared after every update.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    transitions: Vec<Transition>,
    capacity: usize,
    bootstrap: Option<(f64, f64)>,
}

impl RolloutBuffer {
    pub fn new(capacity: usize) -> Self {
        RolloutBuffer {
            transitions: Vec::with_capacity(capacity),
            capacity,
            bootstrap: None,
        }
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if self.transitions.len() >= self.capacity {
            return Err(Error::Action(format!(
                "rollout buffer already holds its {} steps",
                self.capacity
            )));
        }
        self.transitions.push(t);
        Ok(())
    }

    /// Closes the segment with `V(s_{T+1})` per agent stream.
    pub fn set_bootstrap(&mut self, value_alloc: f64, value_resol: f64) {
        self.bootstrap = Some((value_alloc, value_resol));
    }

    pub fn is_full(&self) -> bool {
        self.transitions.len() == self.capacity
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.transitions.clear();
        self.bootstrap = None;
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn rewards_alloc(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward_alloc).collect()
    }

    pub fn rewards_resol(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward_resol).collect()
    }

    /// Per-step target-critic values for one stream, with the bootstrap
    /// appended (length T + 1). Errors if the segment was never closed.
    pub fn values_with_bootstrap(&self, resol_stream: bool) -> Result<Vec<f64>> {
        let (ba, br) = self.bootstrap.ok_or_else(|| {
            Error::Action("rollout segment missing its bootstrap value".into())
        })?;
        let mut values: Vec<f64> = self
            .transitions
            .iter()
            .map(|t| if resol_stream { t.value_resol } else { t.value_alloc })
            .collect();
        values.push(if resol_stream { br } else { ba });
        Ok(values)
    }

    /// Mean per-step rewards of the stored segment.
    pub fn mean_rewards(&self) -> (f64, f64) {
        if self.transitions.is_empty() {
            return (0.0, 0.0);
        }
        let n = self.transitions.len() as f64;
        (
            self.transitions.iter().map(|t| t.reward_alloc).sum::<f64>() / n,
            self.transitions.iter().map(|t| t.reward_resol).sum::<f64>() / n,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transition(r: f64) -> Transition {
        Transition {
            obs: vec![r],
            alloc: vec![None],
            resol_z: vec![0.0],
            logp_alloc: -1.0,
            logp_resol: -1.0,
            reward_alloc: r,
            reward_resol: 2.0 * r,
            value_alloc: 0.5,
            value_resol: 0.25,
        }
    }

    #[test]
    fn capacity_is_enforced() {
        let mut buf = RolloutBuffer::new(2);
        buf.push(transition(1.0)).unwrap();
        assert!(!buf.is_full());
        buf.push(transition(2.0)).unwrap();
        assert!(buf.is_full());
        assert!(buf.push(transition(3.0)).is_err());
        buf.clear();
        assert!(buf.is_empty());
        buf.push(transition(4.0)).unwrap();
    }

    #[test]
    fn bootstrap_closes_both_streams() {
        let mut buf = RolloutBuffer::new(2);
        buf.push(transition(1.0)).unwrap();
        buf.push(transition(2.0)).unwrap();
        assert!(buf.values_with_bootstrap(false).is_err());
        buf.set_bootstrap(0.9, -0.9);
        assert_eq!(buf.values_with_bootstrap(false).unwrap(), vec![0.5, 0.5, 0.9]);
        assert_eq!(buf.values_with_bootstrap(true).unwrap(), vec![0.25, 0.25, -0.9]);
        assert_eq!(buf.rewards_alloc(), vec![1.0, 2.0]);
        assert_eq!(buf.rewards_resol(), vec![2.0, 4.0]);
        assert_eq!(buf.mean_rewards(), (1.5, 3.0));
    }
}
