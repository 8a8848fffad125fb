//! Linear-β noise schedule and the closed-form forward noising step.

use serde::{Deserialize, Serialize};

use super::DiffusionError;

pub const DEFAULT_T: usize = 200;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

/// β_t linear from β_1 to β_T, α_t = 1 − β_t, ᾱ_t = ∏ α_s, σ_t = √β_t.
/// Index 0 holds t = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn linear(t_steps: usize, beta_start: f64, beta_end: f64) -> Self {
        assert!(t_steps >= 1);
        assert!(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0);
        let betas: Vec<f64> = (0..t_steps)
            .map(|i| {
                if t_steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (t_steps - 1) as f64
                }
            })
            .collect();
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(t_steps);
        let mut prod = 1.0;
        for &a in &alphas {
            prod *= a;
            alpha_bars.push(prod);
        }
        NoiseSchedule { betas, alphas, alpha_bars }
    }

    pub fn t_steps(&self) -> usize {
        self.betas.len()
    }

    fn check_t(&self, t: usize) -> Result<(), DiffusionError> {
        if t >= 1 && t <= self.t_steps() {
            Ok(())
        } else {
            Err(DiffusionError::BadTimestep { t, t_steps: self.t_steps() })
        }
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.betas[t - 1].sqrt()
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        NoiseSchedule::linear(DEFAULT_T, DEFAULT_BETA_START, DEFAULT_BETA_END)
    }
}

/// x_t = √ᾱ_t · x₀ + √(1−ᾱ_t) · ε
pub fn forward_noise(
    schedule: &NoiseSchedule,
    x0: &[f64; 9],
    t: usize,
    eps: &[f64; 9],
) -> Result<[f64; 9], DiffusionError> {
    schedule.check_t(t)?;
    let ab = schedule.alpha_bar(t);
    let (c0, c1) = (ab.sqrt(), (1.0 - ab).sqrt());
    let mut out = [0.0; 9];
    for i in 0..9 {
        out[i] = c0 * x0[i] + c1 * eps[i];
    }
    Ok(out)
}
