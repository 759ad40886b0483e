//! Spike Response Model reference neuron, kept as a baseline for the ADR
//! model. Not trainable.
//!
//! The membrane voltage is `V(t) = sum_i w_i K(t - d_i)` with the
//! double-exponential kernel `K(s) = exp(-s / tau1) - exp(-s / tau2)` for
//! `s > 0` and `0` otherwise. The output spike is the first grid time at which
//! `V` reaches the threshold.

use serde::{Deserialize, Serialize};

use crate::coding::DelayVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrmParams {
    /// Decay constant.
    pub tau1: f64,
    /// Rise constant; must be smaller than `tau1`.
    pub tau2: f64,
    pub v_th: f64,
    /// Grid step of the crossing search.
    pub dt: f64,
    /// Last simulated time.
    pub horizon: f64,
}

impl SrmParams {
    /// Demo defaults for a coding with unit interval `tau` and window `window`:
    /// `tau1 = 4 tau`, `tau2 = tau`, `dt = tau / 10`, horizon twice the window,
    /// unit threshold. These constants are illustrative, not calibrated.
    pub fn demo(tau: f64, window: f64) -> Self {
        SrmParams {
            tau1: 4.0 * tau,
            tau2: tau,
            v_th: 1.0,
            dt: tau / 10.0,
            horizon: 2.0 * window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau2 > 0.0 && self.tau1 > self.tau2 && self.tau1.is_finite()) {
            return Err(Error::config(format!(
                "need tau1 > tau2 > 0, got tau1 = {} and tau2 = {}",
                self.tau1, self.tau2
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!(
                "horizon must be non-negative, got {}",
                self.horizon
            )));
        }
        if !self.v_th.is_finite() {
            return Err(Error::config("threshold must be finite"));
        }
        Ok(())
    }

    /// Time after the input spike at which the kernel peaks.
    pub fn kernel_peak(&self) -> f64 {
        self.tau1 * self.tau2 / (self.tau1 - self.tau2) * (self.tau1 / self.tau2).ln()
    }

    fn steps(&self) -> usize {
        (self.horizon / self.dt + 1e-9).floor() as usize
    }
}

/// Post-synaptic potential at time `t` of a spike emitted at `d`.
pub fn psp_kernel(t: f64, d: f64, p: &SrmParams) -> f64 {
    let s = t - d;
    if s <= 0.0 {
        0.0
    } else {
        (-s / p.tau1).exp() - (-s / p.tau2).exp()
    }
}

/// Membrane voltage at `t`. Silent inputs contribute nothing.
pub fn voltage(t: f64, spikes: &DelayVector, weights: &[f64], p: &SrmParams) -> f64 {
    spikes
        .delays
        .iter()
        .zip(&spikes.fired)
        .zip(weights)
        .filter(|((_, &fired), _)| fired)
        .map(|((&d, _), &w)| w * psp_kernel(t, d, p))
        .sum()
}

fn check(spikes: &DelayVector, weights: &[f64], p: &SrmParams) -> Result<()> {
    p.validate()?;
    if spikes.len() != weights.len() {
        return Err(Error::shape(format!(
            "{} input spikes but {} efficacies",
            spikes.len(),
            weights.len()
        )));
    }
    Ok(())
}

/// First grid time `k * dt` with `V >= v_th` and `V > 0`, or `None` when the
/// horizon passes without a crossing.
pub fn threshold_crossing(spikes: &DelayVector, weights: &[f64], p: &SrmParams) -> Result<Option<f64>> {
    check(spikes, weights, p)?;
    Ok((0..=p.steps()).map(|k| k as f64 * p.dt).find(|&t| {
        let v = voltage(t, spikes, weights, p);
        v >= p.v_th && v > 0.0
    }))
}

/// `(t, V(t))` on the simulation grid.
pub fn voltage_trace(spikes: &DelayVector, weights: &[f64], p: &SrmParams) -> Result<Vec<(f64, f64)>> {
    check(spikes, weights, p)?;
    Ok((0..=p.steps())
        .map(|k| {
            let t = k as f64 * p.dt;
            (t, voltage(t, spikes, weights, p))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> SrmParams {
        SrmParams {
            tau1: 4.0,
            tau2: 1.0,
            v_th: 0.3,
            dt: 0.1,
            horizon: 32.0,
        }
    }

    #[test]
    fn kernel_vanishes_at_both_ends() {
        let p = params();
        assert_eq!(psp_kernel(2.0, 2.0, &p), 0.0);
        assert_eq!(psp_kernel(1.0, 2.0, &p), 0.0);
        assert!(psp_kernel(1e4, 0.0, &p).abs() < 1e-300);
    }

    #[test]
    fn kernel_peak_matches_dense_scan() {
        let p = params();
        let (mut best_t, mut best_v) = (0.0, f64::MIN);
        for k in 0..200_000 {
            let t = k as f64 * 1e-4;
            let v = psp_kernel(t, 0.0, &p);
            if v > best_v {
                (best_t, best_v) = (t, v);
            }
        }
        assert!((best_t - p.kernel_peak()).abs() < 2e-4);
    }

    #[test]
    fn zero_threshold_fires_one_step_after_first_spike() {
        let mut p = params();
        p.v_th = 0.0;
        let s = DelayVector::from_delays(vec![5.0, 2.0]);
        let t = threshold_crossing(&s, &[1.0, 1.0], &p).unwrap().unwrap();
        assert!((t - 2.1).abs() < 1e-9);
    }

    #[test]
    fn unreachable_threshold_never_fires() {
        let mut p = params();
        p.v_th = 10.0;
        let s = DelayVector::from_delays(vec![2.0]);
        assert_eq!(threshold_crossing(&s, &[1.0], &p).unwrap(), None);
    }

    #[test]
    fn single_input_crossing_matches_fine_grid() {
        let p = params();
        let s = DelayVector::from_delays(vec![2.0]);
        let t = threshold_crossing(&s, &[1.0], &p).unwrap().unwrap();
        // oracle: scan at dt / 10 directly on the kernel
        let fine = (0..)
            .map(|k| k as f64 * p.dt / 10.0)
            .find(|&t| psp_kernel(t, 2.0, &p) >= p.v_th)
            .unwrap();
        assert!((t - fine).abs() <= p.dt, "{t} vs {fine}");
    }

    #[test]
    fn silent_inputs_do_not_contribute() {
        let p = params();
        let mut s = DelayVector::from_delays(vec![2.0, 3.0]);
        s.fired[1] = false;
        assert_eq!(voltage(6.0, &s, &[1.0, 5.0], &p), psp_kernel(6.0, 2.0, &p));
    }

    #[test]
    fn invalid_params_and_shapes() {
        let mut p = params();
        p.tau2 = 4.0;
        let s = DelayVector::from_delays(vec![2.0]);
        assert!(threshold_crossing(&s, &[1.0], &p).is_err());
        assert!(threshold_crossing(&s, &[1.0, 2.0], &params()).is_err());
    }

    proptest! {
        #[test]
        fn crossing_is_causal(delays in proptest::collection::vec(0.0f64..16.0, 1..6), w in 0.1f64..3.0) {
            let p = params();
            let s = DelayVector::from_delays(delays.clone());
            let weights = vec![w; delays.len()];
            if let Some(t) = threshold_crossing(&s, &weights, &p).unwrap() {
                let first = delays.iter().cloned().fold(f64::INFINITY, f64::min);
                prop_assert!(t > first);
            }
        }

        #[test]
        fn heavier_weight_never_delays_crossing(
            delays in proptest::collection::vec(0.0f64..16.0, 1..6),
            weights in proptest::collection::vec(0.0f64..2.0, 6),
            which in 0usize..6,
            bump in 0.0f64..2.0,
        ) {
            let p = params();
            let s = DelayVector::from_delays(delays.clone());
            let w = &weights[..delays.len()];
            let mut heavier = w.to_vec();
            heavier[which % delays.len()] += bump;
            let before = threshold_crossing(&s, w, &p).unwrap();
            let after = threshold_crossing(&s, &heavier, &p).unwrap();
            match (before, after) {
                (Some(b), Some(a)) => prop_assert!(a <= b),
                (Some(_), None) => prop_assert!(false, "crossing lost"),
                _ => {}
            }
        }

        #[test]
        fn halving_dt_moves_crossing_by_at_most_dt(d in 0.0f64..8.0, w in 0.5f64..3.0) {
            let p = params();
            let mut fine = p.clone();
            fine.dt /= 2.0;
            let s = DelayVector::from_delays(vec![d]);
            let a = threshold_crossing(&s, &[w], &p).unwrap();
            let b = threshold_crossing(&s, &[w], &fine).unwrap();
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!((a - b).abs() <= p.dt + 1e-9);
            }
        }
    }
}
