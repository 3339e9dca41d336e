use crate::error::Error;
use crate::Result;

/// Truncated TD(lambda) advantages over one trajectory segment.
///
/// `values` must hold one entry per step plus the bootstrap value of the
/// state after the segment, all estimated with the frozen target critic.
/// With residuals `delta_t = r_t + gamma * V(s_{t+1}) - V(s_t)` the
/// advantage is `A_t = sum_k (gamma * lambda)^k delta_{t+k}`, truncated at
/// the segment end.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    if values.len() != rewards.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: rewards.len() + 1,
            got: values.len(),
        });
    }
    let mut advantages = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + gamma * values[t + 1] - values[t];
        acc = delta + gamma * lambda * acc;
        advantages[t] = acc;
    }
    Ok(advantages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Literal double sum, kept independent of the recursive implementation.
    fn brute_force(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
        let t_bar = rewards.len();
        let delta: Vec<f64> = (0..t_bar)
            .map(|t| rewards[t] + gamma * values[t + 1] - values[t])
            .collect();
        (0..t_bar)
            .map(|t| {
                let mut acc = 0.0;
                for k in 0..(t_bar - t) {
                    acc += (gamma * lambda).powi(k as i32) * delta[t + k];
                }
                acc
            })
            .collect()
    }

    #[test]
    fn lambda_zero_is_one_step_td() {
        let rewards = [0.5, -1.0, 2.0];
        let values = [0.1, 0.2, 0.3, 0.4];
        let adv = gae(&rewards, &values, 0.9, 0.0).unwrap();
        for t in 0..3 {
            let delta = rewards[t] + 0.9 * values[t + 1] - values[t];
            assert!((adv[t] - delta).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_summed_example() {
        let adv = gae(&[1.0, 1.0], &[0.0, 0.0, 0.0], 1.0, 1.0).unwrap();
        assert_eq!(adv, vec![2.0, 1.0]);
    }

    #[test]
    fn matches_brute_force_double_sum() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let rewards: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
            let values: Vec<f64> = (0..11).map(|_| rng.random_range(-5.0..5.0)).collect();
            let gamma = rng.random_range(0.0..1.0);
            let lambda = rng.random_range(0.0..1.0);
            let fast = gae(&rewards, &values, gamma, lambda).unwrap();
            let slow = brute_force(&rewards, &values, gamma, lambda);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            gae(&[1.0, 2.0], &[0.0, 0.0], 0.9, 0.9),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }
}
