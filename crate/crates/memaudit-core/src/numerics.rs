//! Log-space reductions, quantiles, the Adam optimizer, and the
//! finite-difference gradient oracle used to verify analytic gradients.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::math::F64Ext;

/// `log sum_j exp(v_j)` with max-shift stabilization.
///
/// `-inf` entries are allowed and contribute nothing; an all `-inf` input
/// returns `-inf`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(CoreError::EmptyInput("log_sum_exp"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(CoreError::NanInput("log_sum_exp"));
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// `log mean_j exp(v_j)` = `log_sum_exp(v) - log(count)`.
pub fn log_mean_exp(values: &[f64]) -> Result<f64> {
    Ok(log_sum_exp(values)? - (values.len() as f64).ln())
}

/// Quantile by linear interpolation between order statistics at rank
/// `q * (n - 1)`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(CoreError::EmptyInput("quantile"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(CoreError::InvalidArgument(format!(
            "quantile level {q} outside [0, 1]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("NaN in quantile input"));
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = rank - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (divides by n - 1); 0 for fewer than 2 values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Moment-based sample skewness; 0 when the variance vanishes.
pub fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let m = mean(values);
    let m2: f64 = values.iter().map(|v| (v - m).powi2()).sum::<f64>() / n;
    let m3: f64 = values.iter().map(|v| (v - m).powi2() * (v - m)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Pearson correlation; 0 when either side is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(CoreError::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.is_empty() {
        return Err(CoreError::EmptyInput("pearson"));
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Adam hyperparameters. Defaults are the usual
/// `beta1 = 0.9, beta2 = 0.999, eps = 1e-8`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_step_size(step_size: f64) -> AdamConfig {
        AdamConfig {
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment accumulators for Adam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    config: AdamConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(dim: usize, config: AdamConfig) -> OptimizerState {
        OptimizerState {
            config,
            first: alloc::vec![0.0; dim],
            second: alloc::vec![0.0; dim],
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Change the step size mid-run (for learning-rate schedules). Moment
    /// accumulators are untouched.
    pub fn set_step_size(&mut self, step_size: f64) {
        self.config.step_size = step_size;
    }
}

/// One bias-corrected Adam descent step, in place.
///
/// Minimization convention: callers maximizing an objective pass the
/// negated ascent gradient.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(CoreError::DimensionMismatch {
            expected: state.first.len(),
            got: grads.len(),
        });
    }
    state.step += 1;
    let t = state.step as f64;
    let c = state.config;
    let bc1 = 1.0 - c.beta1.powf(t);
    let bc2 = 1.0 - c.beta2.powf(t);
    for j in 0..params.len() {
        state.first[j] = c.beta1 * state.first[j] + (1.0 - c.beta1) * grads[j];
        state.second[j] = c.beta2 * state.second[j] + (1.0 - c.beta2) * grads[j] * grads[j];
        let m_hat = state.first[j] / bc1;
        let v_hat = state.second[j] / bc2;
        params[j] -= c.step_size * m_hat / (v_hat.sqrt() + c.eps);
    }
    Ok(())
}

/// Central-difference gradient `(f(x + h e_j) - f(x - h e_j)) / 2h`.
pub fn finite_diff_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if h <= 0.0 {
        return Err(CoreError::InvalidArgument("step h must be positive".into()));
    }
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let up = f(&probe);
        probe[j] = x[j] - h;
        let down = f(&probe);
        probe[j] = x[j];
        if !up.is_finite() || !down.is_finite() {
            return Err(CoreError::InvalidArgument(format!(
                "non-finite objective at coordinate {j}"
            )));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const LN_2: f64 = core::f64::consts::LN_2;

    #[test]
    fn lse_pair_of_equal_values() {
        let c = -3.25;
        assert!((log_sum_exp(&[c, c]).unwrap() - (c + LN_2)).abs() < 1e-14);
    }

    #[test]
    fn lse_zero_and_ln3() {
        let got = log_sum_exp(&[0.0, 3.0f64.ln()]).unwrap();
        assert!((got - 4.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn lse_deep_underflow_regime() {
        let got = log_sum_exp(&[-1000.0, -1000.0]).unwrap();
        assert!((got - (-1000.0 + LN_2)).abs() < 1e-12);
        assert!(got.is_finite());
    }

    #[test]
    fn lse_neg_infinity_handling() {
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap(),
            f64::NEG_INFINITY
        );
        let got = log_sum_exp(&[f64::NEG_INFINITY, 1.0]).unwrap();
        assert!((got - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lse_errors() {
        assert!(matches!(log_sum_exp(&[]), Err(CoreError::EmptyInput(_))));
        assert!(matches!(
            log_sum_exp(&[1.0, f64::NAN]),
            Err(CoreError::NanInput(_))
        ));
    }

    #[test]
    fn lme_constant_identity() {
        let c = 1.75;
        assert!((log_mean_exp(&[c, c, c]).unwrap() - c).abs() < 1e-14);
    }

    #[test]
    fn lme_mean_of_one_and_three() {
        let got = log_mean_exp(&[0.0, 3.0f64.ln()]).unwrap();
        assert!((got - LN_2).abs() < 1e-14);
    }

    #[test]
    fn lme_magnitude_minus_1e4() {
        let got = log_mean_exp(&[-1e4, -1e4]).unwrap();
        assert!((got - (-1e4)).abs() < 1e-10);
    }

    #[test]
    fn lse_shift_invariance() {
        let v = [0.3, -2.0, 5.5, 1.1];
        let base = log_sum_exp(&v).unwrap();
        for c in [-700.0, -1.0, 0.5, 300.0] {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let got = log_sum_exp(&shifted).unwrap();
            assert!(((got - base - c) / base.abs().max(1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn lme_bounded_by_max() {
        let v = [0.1, 0.9, -3.0];
        let got = log_mean_exp(&v).unwrap();
        assert!(got < 0.9);
        assert!((log_mean_exp(&[2.0, 2.0]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn quantile_cases() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0], 0.5).unwrap(), 2.0);
        assert_eq!(quantile(&[1.0, 3.0], 0.5).unwrap(), 2.0);
        assert_eq!(quantile(&[4.0, -1.0, 9.0, 2.0], 1.0).unwrap(), 9.0);
        assert_eq!(quantile(&[4.0, -1.0, 9.0, 2.0], 0.0).unwrap(), -1.0);
        assert!(quantile(&[1.0], 1.5).is_err());
        assert!(quantile(&[], 0.5).is_err());
    }

    #[test]
    fn adam_zero_grad_is_noop() {
        let mut params = vec![1.0, -2.0];
        let mut state = OptimizerState::new(2, AdamConfig::with_step_size(0.1));
        adam_step(&mut params, &[0.0, 0.0], &mut state).unwrap();
        assert_eq!(params, vec![1.0, -2.0]);
    }

    #[test]
    fn adam_first_step_magnitude() {
        // Hand evaluation at t = 1: m_hat = g, v_hat = g^2, so the update is
        // eta * g / (|g| + eps * sqrt(bias corrections)) ~ eta * sign(g).
        let eta = 0.05;
        let g = -3.0;
        let mut params = vec![0.0];
        let mut state = OptimizerState::new(1, AdamConfig::with_step_size(eta));
        adam_step(&mut params, &[g], &mut state).unwrap();
        let expected = eta * g.abs() / (g.abs() + 1e-8);
        assert!((params[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn adam_two_steps_replay() {
        // Two identical steps on a recorded state replay to the same result
        // as one continuous inspection of the state transitions.
        let cfg = AdamConfig::with_step_size(0.01);
        let mut p1 = vec![0.5, -0.5];
        let mut s1 = OptimizerState::new(2, cfg);
        let g = [1.0, -2.0];
        adam_step(&mut p1, &g, &mut s1).unwrap();
        let snapshot_params = p1.clone();
        let snapshot_state = s1.clone();
        adam_step(&mut p1, &g, &mut s1).unwrap();

        let mut p2 = snapshot_params;
        let mut s2 = snapshot_state;
        adam_step(&mut p2, &g, &mut s2).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(s1, s2);
        assert_eq!(s1.step(), 2);
    }

    #[test]
    fn adam_dimension_mismatch() {
        let mut params = vec![0.0];
        let mut state = OptimizerState::new(1, AdamConfig::with_step_size(0.1));
        assert!(adam_step(&mut params, &[1.0, 2.0], &mut state).is_err());
    }

    #[test]
    fn finite_diff_quadratic() {
        let g = finite_diff_gradient(|x| x.iter().map(|v| v * v).sum(), &[1.0, 2.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6);
        assert!((g[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_constant() {
        let g = finite_diff_gradient(|_| 7.0, &[1.0, 2.0, 3.0], 1e-5).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn finite_diff_bilinear() {
        let g = finite_diff_gradient(|x| x[0] * x[1], &[3.0, 5.0], 1e-5).unwrap();
        assert!((g[0] - 5.0).abs() < 1e-6);
        assert!((g[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_nonfinite_objective() {
        let res = finite_diff_gradient(|x| x[0].ln(), &[0.0], 1e-5);
        assert!(res.is_err());
    }
}
