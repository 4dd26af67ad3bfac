//! Search parameters shared by the full-space oracle and the reduced engine.

use crate::error::{Error, Result};
use crate::index::MAX_QUBITS;

/// Parameters of one search problem: register size q, single-qubit decay
/// rate Γ, and the marked solution w.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchParams {
    q: usize,
    gamma: f64,
    w: u64,
}

impl SearchParams {
    pub fn new(q: usize, gamma: f64, w: u64) -> Result<Self> {
        if q == 0 || q > MAX_QUBITS {
            return Err(Error::QubitCountOutOfRange {
                q,
                min: 1,
                max: MAX_QUBITS,
            });
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "decay rate must be finite and nonnegative, got {gamma}"
            )));
        }
        if q < 64 && w >= (1u64 << q) {
            return Err(Error::InvalidParameter(format!(
                "marked state {w} outside register of {q} qubits"
            )));
        }
        Ok(Self { q, gamma, w })
    }

    /// Convenience constructor with the solution at w = 0 (the shift symmetry
    /// makes this the canonical choice).
    pub fn marked_zero(q: usize, gamma: f64) -> Result<Self> {
        Self::new(q, gamma, 0)
    }

    /// Construct from the scaled decay rate 2^{q/2} Γ.
    pub fn from_scaled_gamma(q: usize, scaled: f64, w: u64) -> Result<Self> {
        Self::new(q, gamma_from_scaled(q, scaled), w)
    }

    pub fn qubits(&self) -> usize {
        self.q
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn marked(&self) -> u64 {
        self.w
    }

    /// Hilbert-space dimension N = 2^q.
    pub fn dimension(&self) -> usize {
        1usize << self.q
    }

    /// Decay rate scaled by the search oscillation frequency: 2^{q/2} Γ.
    pub fn scaled_gamma(&self) -> f64 {
        scaled_gamma(self.q, self.gamma)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.q, gamma, self.w)
    }
}

/// 2^{q/2} Γ, the decay rate in units of the search oscillation frequency.
pub fn scaled_gamma(q: usize, gamma: f64) -> f64 {
    2f64.powf(q as f64 / 2.0) * gamma
}

/// Absolute Γ from the scaled value 2^{q/2} Γ.
pub fn gamma_from_scaled(q: usize, scaled: f64) -> f64 {
    scaled * 2f64.powf(-(q as f64) / 2.0)
}

/// Fixed integrator step: resolves both the search oscillation (period
/// π 2^{q/2}) and the decay timescale 1/Γ.
pub fn default_time_step(q: usize, gamma: f64) -> f64 {
    let osc = std::f64::consts::PI * 2f64.powf(q as f64 / 2.0) / 200.0;
    let decay = if gamma > 0.0 { 0.05 / gamma } else { f64::INFINITY };
    0.1f64.min(decay).min(osc)
}
