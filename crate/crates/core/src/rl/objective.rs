//! Scalar pieces of the update rules, kept free of any network code so they
//! can be checked against hand arithmetic.

/// Probability ratio between the current and the behavior policy.
pub fn ppo_ratio(logp_new: f64, logp_old: f64) -> f64 {
    (logp_new - logp_old).exp()
}

/// Per-sample clipped surrogate objective (to be maximized).
///
/// The default form is `min(rho * A, clip(rho, 1-eps, 1+eps) * A)`. With
/// `literal_min_over_ratios` the minimum is taken over the ratios before
/// multiplying by the advantage, which drops the pessimistic bound whenever
/// the advantage is negative; it is kept selectable for comparison.
pub fn ppo_actor_objective(
    logp_new: f64,
    logp_old: f64,
    advantage: f64,
    epsilon: f64,
    literal_min_over_ratios: bool,
) -> f64 {
    let rho = ppo_ratio(logp_new, logp_old);
    let clipped = rho.clamp(1.0 - epsilon, 1.0 + epsilon);
    if literal_min_over_ratios {
        rho.min(clipped) * advantage
    } else {
        (rho * advantage).min(clipped * advantage)
    }
}

/// Derivative of [`ppo_actor_objective`] with respect to `logp_new`.
///
/// The clipped branch is flat in the parameters, so the gradient is
/// `rho * A` when the unclipped branch is active and zero otherwise.
pub fn ppo_actor_objective_dlogp(
    logp_new: f64,
    logp_old: f64,
    advantage: f64,
    epsilon: f64,
    literal_min_over_ratios: bool,
) -> f64 {
    let rho = ppo_ratio(logp_new, logp_old);
    let clipped = rho.clamp(1.0 - epsilon, 1.0 + epsilon);
    let unclipped_active = if literal_min_over_ratios {
        rho <= clipped
    } else {
        rho * advantage <= clipped * advantage
    };
    if unclipped_active {
        rho * advantage
    } else {
        0.0
    }
}

/// Squared regression error of the critic against the frozen target
/// `advantage_sum + gamma * V_target(s_{t+1})`; gradients flow only through
/// `value`.
pub fn critic_loss(value: f64, advantage_sum: f64, next_target_value: f64, gamma: f64) -> f64 {
    let target = advantage_sum + gamma * next_target_value;
    let err = value - target;
    err * err
}
