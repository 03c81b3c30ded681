//! Per-jet and aggregated rewards.

/// Local reward of one pseudo-environment:
/// `r = (Cd_b - Cd) - alpha |Cl|` with interval-averaged coefficients.
pub fn local_reward(cd_baseline: f64, cd_mean: f64, cl_mean: f64, alpha: f64) -> f64 {
    drag_term(cd_baseline, cd_mean) + lift_term(cl_mean, alpha)
}

/// Drag part of [`local_reward`].
pub fn drag_term(cd_baseline: f64, cd_mean: f64) -> f64 {
    cd_baseline - cd_mean
}

/// Lift part of [`local_reward`] (non-positive).
pub fn lift_term(cl_mean: f64, alpha: f64) -> f64 {
    -alpha * cl_mean.abs()
}

/// Blends each local reward with the mean over all jets of the simulation:
/// `R_i = beta r_i + (1 - beta) mean(r)`.
pub fn aggregate_reward(local: &[f64], beta: f64) -> Vec<f64> {
    assert!(!local.is_empty(), "at least one jet is required");
    let mean = local.iter().sum::<f64>() / local.len() as f64;
    local
        .iter()
        .map(|&r| beta * r + (1.0 - beta) * mean)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_rewards_are_fixed_points() {
        for beta in [0.0, 0.3, 0.8, 1.0] {
            for r in aggregate_reward(&[0.7; 5], beta) {
                assert!((r - 0.7).abs() < 1e-12);
            }
        }
    }
}
