//! Observables of the steady state and the repetition/majority-vote calculus.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::index::{binomial_f64, classes, multiplicity, PairCounts};
use crate::reduced::ReducedState;

/// Representative scaled decay rate of the weak-decay regime.
pub const WEAK_DECAY_SCALED_GAMMA: f64 = 0.005;

/// Upper edge of the weak-decay regime, 2^{q/2} Γ ≲ 0.3.
pub const WEAK_REGIME_MAX_SCALED_GAMMA: f64 = 0.3;

/// Register sizes whose bit error rates are averaged for the weak-decay ξ;
/// smaller registers are excluded because their distribution peaks at d = 0.
pub const WEAK_DECAY_XI_Q_SET: [usize; 5] = [12, 18, 24, 30, 36];

/// Steady-state population of the solution, ρ_00 = σ_{q,0,0,0}.
pub fn population_of_solution(state: &ReducedState) -> Result<f64> {
    let v = state.diagonal(0);
    if v.im.abs() > 1e-10 {
        return Err(Error::InvariantViolation {
            check: "solution population imaginary part",
            magnitude: v.im.abs(),
            tolerance: 1e-10,
            context: None,
        });
    }
    Ok(v.re)
}

/// Population per Hamming distance: p(d) = C(q, d) σ_{q−d,0,0,d}.
#[derive(Clone, Debug)]
pub struct HammingDistribution {
    pub p: Vec<f64>,
    pub mean_d: f64,
    pub bit_error_rate: f64,
}

pub fn hamming_distribution(state: &ReducedState) -> Result<HammingDistribution> {
    let q = state.qubits();
    let mut p = Vec::with_capacity(q + 1);
    for d in 0..=q {
        let v = state.diagonal(d);
        let w = binomial_f64(q, d) * v.re;
        if w < -1e-12 {
            return Err(Error::InvariantViolation {
                check: "distance population",
                magnitude: -w,
                tolerance: 1e-12,
                context: Some(format!("d = {d}")),
            });
        }
        p.push(w);
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvariantViolation {
            check: "distance distribution normalization",
            magnitude: (total - 1.0).abs(),
            tolerance: 1e-8,
            context: None,
        });
    }
    let mean_d: f64 = p.iter().enumerate().map(|(d, w)| d as f64 * w).sum();
    Ok(HammingDistribution {
        p,
        mean_d,
        bit_error_rate: mean_d / q as f64,
    })
}

/// Amplification factor 2^q ρ_00: the enhancement of the solution population
/// over the fully randomized value.
pub fn amplification(state: &ReducedState) -> Result<f64> {
    Ok(2f64.powi(state.qubits() as i32) * population_of_solution(state)?)
}

/// Populations of the |0⟩ and |s⟩ rays after projecting onto their span.
#[derive(Clone, Copy, Debug)]
pub struct TwoLevelPopulations {
    pub pop_w: f64,
    pub pop_s: f64,
}

/// Project onto span{|0⟩, |s⟩} and return the ray populations.
///
/// The pair is orthonormalized by Gram-Schmidt starting from |0⟩ (overlap
/// ⟨0|s⟩ = 2^{−q/2}), the 2×2 projected matrix is formed from the overlaps
/// ⟨0|ρ|0⟩, ⟨0|ρ|s⟩, ⟨s|ρ|0⟩, ⟨s|ρ|s⟩, and its diagonal is re-expressed as
/// the populations of the two rays.
pub fn two_level_projection(state: &ReducedState) -> Result<TwoLevelPopulations> {
    let q = state.qubits();
    // ⟨0|ρ|0⟩
    let a = state.diagonal(0).re;
    // ⟨s|ρ|s⟩ = 2^{−q} Σ_xy ρ_xy, class multiplicities supplying the count
    let mut s_total = Complex64::default();
    for p in classes(q) {
        s_total += multiplicity(&p) * state.get(&p);
    }
    let t = (s_total * 2f64.powi(-(q as i32))).re;
    // ⟨0|ρ|s⟩ = 2^{−q/2} Σ_y ρ_{0y}: the pair (0, y) sits in class (q−d, d, 0, 0)
    let amp = 2f64.powf(-(q as f64) / 2.0);
    let mut g = Complex64::default();
    let mut g_rev = Complex64::default();
    for d in 0..=q {
        let w = binomial_f64(q, d);
        g += w * state.get(&PairCounts::new(q - d, d, 0, 0));
        g_rev += w * state.get(&PairCounts::new(q - d, 0, d, 0));
    }
    g *= amp;
    g_rev *= amp;

    // Gram-Schmidt: u1 = |0⟩, u2 = (|s⟩ − c|0⟩)/n with c = 2^{−q/2}
    let c = amp;
    let n = (1.0 - c * c).sqrt();
    let p11 = Complex64::new(a, 0.0);
    let p12 = (g - c * p11) / n;
    let p21 = (g_rev - c * p11) / n;
    let p22 = (Complex64::new(t, 0.0) - c * g - c * g_rev + c * c * p11) / (n * n);
    // |s⟩ = c u1 + n u2, so its ray population is the quadratic form
    let pop_s = (c * c * p11 + c * n * (p12 + p21) + n * n * p22).re;
    let pop_w = p11.re;
    Ok(TwoLevelPopulations { pop_w, pop_s })
}

/// Readout repetition mode: the closed-form bound or the exact binomial sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VoteMode {
    Bound,
    Exact,
}

fn check_vote_args(xi: f64, r: usize) -> Result<()> {
    if !(0.0..0.5).contains(&xi) {
        return Err(Error::InvalidParameter(format!(
            "bit error rate must lie in [0, 0.5), got {xi}"
        )));
    }
    if r == 0 || r % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "repetition count must be odd and positive, got {r}"
        )));
    }
    Ok(())
}

/// Closed-form upper bound for the residual bit error after an R-fold
/// majority vote:
///
///   ξ_R < (1/(1−2ξ)) (2 √(ξ−ξ²))^{R+1} / √(2πR)
pub fn majority_bound(xi: f64, r: usize) -> Result<f64> {
    check_vote_args(xi, r)?;
    if xi == 0.0 {
        return Ok(0.0);
    }
    let base = 2.0 * (xi - xi * xi).sqrt();
    // powf underflows gracefully for large R; go through logs anyway to keep
    // the two code paths consistent
    let log_val = (r as f64 + 1.0) * base.ln() - (1.0 - 2.0 * xi).ln()
        - 0.5 * (2.0 * std::f64::consts::PI * r as f64).ln();
    Ok(log_val.exp())
}

/// Exact majority-vote error: the binomial tail
/// Σ_{n=(R+1)/2}^{R} C(R,n) ξ^n (1−ξ)^{R−n}.
pub fn majority_exact(xi: f64, r: usize) -> Result<f64> {
    check_vote_args(xi, r)?;
    if xi == 0.0 {
        return Ok(0.0);
    }
    let half = r / 2 + 1; // (R+1)/2 for odd R
    if r <= 60 {
        let mut total = 0.0f64;
        for n in half..=r {
            total +=
                binomial_f64(r, n) * xi.powi(n as i32) * (1.0 - xi).powi((r - n) as i32);
        }
        Ok(total)
    } else {
        // log-domain sum avoids ξ^n underflow for long repetition runs
        let ln_fact = ln_factorials(r);
        let (ln_xi, ln_1mxi) = (xi.ln(), (1.0 - xi).ln());
        let mut terms: Vec<f64> = Vec::with_capacity(r - half + 1);
        for n in half..=r {
            let ln_c = ln_fact[r] - ln_fact[n] - ln_fact[r - n];
            terms.push(ln_c + n as f64 * ln_xi + (r - n) as f64 * ln_1mxi);
        }
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        Ok((max + sum.ln()).exp())
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// Smallest odd R with q ξ_R < ε, where ξ_R comes from [`majority_bound`] or
/// [`majority_exact`].
pub fn required_repetitions(q: usize, xi: f64, epsilon: f64, mode: VoteMode) -> Result<usize> {
    if !(0.0..1.0).contains(&epsilon) || epsilon == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "target failure probability must lie in (0, 1), got {epsilon}"
        )));
    }
    check_vote_args(xi, 1)?;
    let mut r = 1usize;
    loop {
        let xi_r = match mode {
            VoteMode::Bound => majority_bound(xi, r)?,
            VoteMode::Exact => majority_exact(xi, r)?,
        };
        if (q as f64) * xi_r < epsilon {
            return Ok(r);
        }
        r += 2;
        if r > 100_001 {
            return Err(Error::InvalidParameter(format!(
                "no odd R <= 100001 reaches q ξ_R < {epsilon} at ξ = {xi}"
            )));
        }
    }
}

/// Ordinary least-squares fit of ρ_00 against 1/q.
#[derive(Clone, Copy, Debug)]
pub struct InverseQFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Register size where the fitted line extrapolates to zero population.
    pub q_zero_crossing: f64,
}

pub fn inverse_q_fit(points: &[(usize, f64)]) -> Result<InverseQFit> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 points for the 1/q fit, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(q, _)| 1.0 / q as f64).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    if sxx < 1e-300 {
        return Err(Error::InvalidParameter(
            "degenerate fit: all abscissae coincide".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    let q_zero_crossing = if intercept == 0.0 {
        f64::INFINITY
    } else {
        -slope / intercept
    };
    Ok(InverseQFit {
        slope,
        intercept,
        r_squared,
        q_zero_crossing,
    })
}

/// Plain least-squares fit of y against x (used for the log-amplification
/// scaling check).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter("mismatched or short fit data".into()));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    if sxx < 1e-300 {
        return Err(Error::InvalidParameter("degenerate fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((slope, intercept, r2))
}
