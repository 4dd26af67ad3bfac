//! Cross-validation suite: runs the oracle-equivalence and symmetry property
//! checks on randomized inputs and reports machine-readable pass/fail results.

use num_complex::Complex64;
use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::full::{
    density_defects, evolve_full_observed, expand_class_vector, master_rhs_full,
    project_full_to_reduced, random_pure_density, shift_conjugate, uniform_superposition_density,
};
use crate::index::{classes, rank, state_space_size};
use crate::params::{default_time_step, SearchParams};
use crate::reduced::{sigma_dot, sigma_dot_mutated, ReducedState};

/// Default RNG seed for the randomized checks; echoed in every report.
pub const DEFAULT_VERIFY_SEED: u64 = 0x5EED_CAFE;

/// One verification check with its measured metric.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyCheck {
    pub name: String,
    pub q: usize,
    pub metric: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Outcome of the whole verification run.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub q_max: usize,
    pub samples_per_q: usize,
    pub checks: Vec<VerifyCheck>,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &VerifyCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Random bit-swap-symmetric Hermitian matrix with unit weighted trace, in
/// the reduced representation. Not necessarily positive.
pub fn random_symmetric_state(q: usize, rng: &mut impl RngExt) -> Result<ReducedState> {
    let m = state_space_size(q);
    let mut sigma = vec![Complex64::default(); m];
    for (k, p) in classes(q).enumerate() {
        let ks = rank(&p.swap_xy());
        if ks == k {
            sigma[k] = Complex64::new(rng.random::<f64>() * 2.0 - 1.0, 0.0);
        } else if ks > k {
            let z = Complex64::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            );
            sigma[k] = z;
            sigma[ks] = z.conj();
        }
    }
    let state = ReducedState::from_vec(q, sigma)?;
    let mut trace = state.weighted_trace().re;
    let mut sigma = state.as_slice().to_vec();
    if trace.abs() < 1e-3 {
        sigma[0] += Complex64::new(1.0, 0.0);
        trace += 1.0;
    }
    for v in &mut sigma {
        *v /= trace;
    }
    ReducedState::from_vec(q, sigma)
}

fn check(name: impl Into<String>, q: usize, metric: f64, threshold: f64) -> VerifyCheck {
    VerifyCheck {
        name: name.into(),
        q,
        metric,
        threshold,
        passed: metric.is_finite() && metric < threshold,
    }
}

/// Run the verification suite up to `q_max` qubits (capped at 8 by the dense
/// oracle). `samples_per_q` controls the randomized-input count per size.
pub fn run_verification(q_max: usize, seed: u64, samples_per_q: usize) -> Result<VerifyReport> {
    if q_max < 2 || q_max > 8 {
        return Err(Error::InvalidParameter(format!(
            "verification needs 2 <= q_max <= 8, got {q_max}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    // 1. oracle equivalence: projected full RHS vs reduced RHS
    for q in 2..=q_max {
        let params = SearchParams::new(q, 0.17, 0)?;
        let mut worst = 0.0f64;
        for _ in 0..samples_per_q {
            let s = random_symmetric_state(q, &mut rng)?;
            let rho = expand_class_vector(q, s.as_slice())?;
            let (projected, _) = project_full_to_reduced(&master_rhs_full(&rho, &params)?, 0)?;
            let reduced = sigma_dot(&s, &params);
            let dev = projected
                .as_slice()
                .iter()
                .zip(&reduced)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            worst = worst.max(dev);
        }
        checks.push(check("oracle_equivalence", q, worst, 1e-10));
    }

    // 2. shift equivariance: S_w maps the w-problem onto the 0-problem
    for q in 2..=q_max.min(5) {
        let mut worst = 0.0f64;
        for _ in 0..samples_per_q {
            let w = rng.random_range(0..(1u64 << q));
            let rho = crate::full::random_hermitian_density(q, &mut rng)?;
            let pw = SearchParams::new(q, 0.31, w)?;
            let p0 = SearchParams::new(q, 0.31, 0)?;
            let lhs = master_rhs_full(&shift_conjugate(&rho, w), &p0)?;
            let rhs = shift_conjugate(&master_rhs_full(&rho, &pw)?, w);
            let dev = lhs
                .iter()
                .zip(rhs.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            worst = worst.max(dev);
        }
        checks.push(check("shift_equivariance", q, worst, 1e-12));
    }

    // 3. symmetry-residual decay: a random pure state develops bit-swap
    //    symmetry on the relaxation timescale
    {
        let q = q_max.min(4);
        let gamma = 0.25;
        let params = SearchParams::new(q, gamma, 0)?;
        let rho0 = random_pure_density(q, &mut rng)?;
        let dt = default_time_step(q, gamma);
        let t_relax = 40.0 / gamma;
        let final_state = evolve_full_observed(&rho0, &params, t_relax, dt, |_, _| {})?;
        let (_, residual) = project_full_to_reduced(&final_state, 0)?;
        checks.push(check("symmetry_residual_decay", q, residual, 1e-6));

        // trace/Hermiticity preservation along the symmetric trajectory
        let mut worst = 0.0f64;
        let uniform = uniform_superposition_density(q);
        evolve_full_observed(&uniform, &params, 30.0, dt, |_, rho| {
            let (h, t) = density_defects(rho);
            worst = worst.max(h).max(t);
        })?;
        checks.push(check("trajectory_invariants", q, worst, 1e-10));

        // long-time evolution from |s⟩ keeps the symmetry to rounding
        let evolved = evolve_full_observed(&uniform, &params, 30.0, dt, |_, _| {})?;
        let (_, sym_res) = project_full_to_reduced(&evolved, 0)?;
        checks.push(check("symmetric_start_stays_symmetric", q, sym_res, 1e-9));
    }

    // 4. negative control: a flipped sign in the projector term must be
    //    caught by the equivalence check
    {
        let q = 2.max(q_max.min(4));
        let params = SearchParams::new(q, 0.17, 0)?;
        let s = random_symmetric_state(q, &mut rng)?;
        let rho = expand_class_vector(q, s.as_slice())?;
        let (projected, _) = project_full_to_reduced(&master_rhs_full(&rho, &params)?, 0)?;
        let mutated = sigma_dot_mutated(&s, &params);
        let dev = projected
            .as_slice()
            .iter()
            .zip(&mutated)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        // the check passes when the mutation is DETECTED, i.e. deviation large
        checks.push(VerifyCheck {
            name: "mutation_detected".into(),
            q,
            metric: dev,
            threshold: 1e-10,
            passed: dev > 1e-6,
        });
    }

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        seed,
        q_max,
        samples_per_q,
        checks,
        all_passed,
    })
}
