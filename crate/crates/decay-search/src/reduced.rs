//! Symmetry-reduced representation of the master equation.
//!
//! With the solution shifted to w = 0 the problem is invariant under qubit
//! permutations, so ρ_xy depends only on the bit pair counts of (x, y):
//! ρ_xy = σ_{n00,n01,n10,n11}. The time evolution of σ is
//!
//!   σ̇ = 2^{−q} i (R − C)
//!      + i (δ_{0, n01+n11} − δ_{0, n10+n11}) σ
//!      + (Γ/4) [ n00 (σ_{−00,+11} − σ)
//!              + n11 (σ_{+00,−11} − σ)
//!              + n01 (2 σ_{−01,+11} + 2 σ_{+00,−01} − σ_{−01,+10} − 3 σ)
//!              + n10 (2 σ_{−10,+11} + 2 σ_{+00,−10} − σ_{+01,−10} − 3 σ) ]
//!
//! where ±ab shifts the count n_ab by one and R, C are binomial-weighted row
//! and column sums that depend only on d_x0 = n10 + n11 and d_y0 = n01 + n11.
//! The count prefactors vanish exactly when a shift would drive a count
//! negative, which makes the boundary handling explicit.
//!
//! Matrix-free evaluation ([`sigma_dot`]) is the single transcription of the
//! equation; the assembled sparse Liouvillian is validated against it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::index::{
    binomial_f64, binomial_u64, classes, rank, state_space_size, PairCounts, MAX_QUBITS,
};
use crate::params::SearchParams;
use crate::solve::{solve_least_squares, solve_square, SolveReport, Trip};

/// Default cap on structural nonzeros of the assembled Liouvillian
/// (q = 36 needs about 5.4 million).
pub const DEFAULT_NONZERO_CAP: usize = 50_000_000;

/// Tolerances of the reduced-state invariants.
pub const TRACE_TOL: f64 = 1e-10;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const DIAGONAL_NEGATIVITY_TOL: f64 = 1e-12;

/// Symmetry-reduced density matrix: one complex entry per pair-count class,
/// in rank order.
#[derive(Clone, Debug)]
pub struct ReducedState {
    q: usize,
    sigma: Vec<Complex64>,
}

/// Flat rank of the diagonal class (q−d, 0, 0, d).
pub fn diagonal_rank(q: usize, d: usize) -> usize {
    rank(&PairCounts::new(q - d, 0, 0, d))
}

impl ReducedState {
    /// The uniform superposition |s⟩⟨s|: every matrix element equals 2^{−q}.
    pub fn uniform(q: usize) -> Result<Self> {
        check_q(q)?;
        let v = Complex64::new(2f64.powi(-(q as i32)), 0.0);
        Ok(Self {
            q,
            sigma: vec![v; state_space_size(q)],
        })
    }

    /// Wrap a raw class vector; only the length is checked, so this can hold
    /// non-state vectors such as projected right-hand sides.
    pub fn from_vec(q: usize, sigma: Vec<Complex64>) -> Result<Self> {
        check_q(q)?;
        if sigma.len() != state_space_size(q) {
            return Err(Error::InvalidParameter(format!(
                "expected {} classes for q = {q}, got {}",
                state_space_size(q),
                sigma.len()
            )));
        }
        Ok(Self { q, sigma })
    }

    pub fn qubits(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.sigma
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.sigma
    }

    /// Entry of one pair-count class.
    pub fn get(&self, p: &PairCounts) -> Complex64 {
        self.sigma[rank(p)]
    }

    /// Diagonal entry σ_{q−d,0,0,d} = ρ_xx for any x at Hamming distance d.
    pub fn diagonal(&self, d: usize) -> Complex64 {
        self.sigma[diagonal_rank(self.q, d)]
    }

    /// Tr ρ = Σ_d C(q, d) σ_{q−d,0,0,d}.
    pub fn weighted_trace(&self) -> Complex64 {
        (0..=self.q)
            .map(|d| binomial_f64(self.q, d) * self.diagonal(d))
            .sum()
    }

    /// Largest violation of the Hermiticity pairing
    /// σ(n00,n01,n10,n11) = conj σ(n00,n10,n01,n11).
    pub fn hermiticity_defect(&self) -> f64 {
        classes(self.q)
            .map(|p| (self.get(&p) - self.get(&p.swap_xy()).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Check the trace, Hermiticity and diagonal-positivity invariants.
    pub fn validate(&self) -> Result<()> {
        let trace_defect = (self.weighted_trace() - 1.0).norm();
        if trace_defect > TRACE_TOL {
            return Err(Error::InvariantViolation {
                check: "weighted trace",
                magnitude: trace_defect,
                tolerance: TRACE_TOL,
                context: None,
            });
        }
        let herm = self.hermiticity_defect();
        if herm > HERMITICITY_TOL {
            return Err(Error::InvariantViolation {
                check: "hermiticity pairing",
                magnitude: herm,
                tolerance: HERMITICITY_TOL,
                context: None,
            });
        }
        for d in 0..=self.q {
            let v = self.diagonal(d);
            if v.re < -DIAGONAL_NEGATIVITY_TOL {
                return Err(Error::InvariantViolation {
                    check: "diagonal positivity",
                    magnitude: -v.re,
                    tolerance: DIAGONAL_NEGATIVITY_TOL,
                    context: Some(format!("Hamming distance {d}")),
                });
            }
        }
        Ok(())
    }
}

fn check_q(q: usize) -> Result<()> {
    if q == 0 || q > MAX_QUBITS {
        return Err(Error::QubitCountOutOfRange {
            q,
            min: 1,
            max: MAX_QUBITS,
        });
    }
    Ok(())
}

/// Weighted trace of a raw σ̇ vector (must vanish for the generator).
pub fn weighted_trace_of(q: usize, values: &[Complex64]) -> Complex64 {
    (0..=q)
        .map(|d| binomial_f64(q, d) * values[diagonal_rank(q, d)])
        .sum()
}

/// Negative-control switch for the verification suite: when set, the sign of
/// the i(δ − δ)σ projector term is flipped, which the oracle-equivalence
/// check must catch.
#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum DeltaTermMutation {
    None,
    FlippedSign,
}

/// Row and column sums per Hamming distance: R depends on the class only
/// through d_x0, C only through d_y0.
fn row_col_sums(q: usize, sigma: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut row = vec![Complex64::default(); q + 1];
    let mut col = vec![Complex64::default(); q + 1];
    for d in 0..=q {
        let mut r = Complex64::default();
        let mut c = Complex64::default();
        for i00 in 0..=(q - d) {
            let w_outer = binomial_f64(q - d, i00);
            for i11 in 0..=d {
                let w = w_outer * binomial_f64(d, i11);
                r += w * sigma[rank(&PairCounts::new(i00, q - d - i00, d - i11, i11))];
                c += w * sigma[rank(&PairCounts::new(i00, d - i11, q - d - i00, i11))];
            }
        }
        row[d] = r;
        col[d] = c;
    }
    (row, col)
}

fn sigma_dot_impl(
    q: usize,
    gamma: f64,
    sigma: &[Complex64],
    out: &mut [Complex64],
    mutation: DeltaTermMutation,
) {
    let (row, col) = row_col_sums(q, sigma);
    let inv_n = 2f64.powi(-(q as i32));
    let i = Complex64::new(0.0, 1.0);
    let g4 = gamma / 4.0;
    let at = |n00: usize, n01: usize, n10: usize, n11: usize| -> Complex64 {
        let p = PairCounts::new(n00, n01, n10, n11);
        debug_assert_eq!(p.qubits(), q, "count shift left the class manifold");
        sigma[rank(&p)]
    };
    for (k, p) in classes(q).enumerate() {
        let PairCounts { n00, n01, n10, n11 } = p;
        let d = p.distances();
        let s = sigma[k];
        let mut v = i * (inv_n * (row[d.d_x0] - col[d.d_y0]));
        let delta = (if d.d_y0 == 0 { 1.0 } else { 0.0 }) - (if d.d_x0 == 0 { 1.0 } else { 0.0 });
        let delta = match mutation {
            DeltaTermMutation::None => delta,
            DeltaTermMutation::FlippedSign => -delta,
        };
        v += i * delta * s;
        if gamma > 0.0 {
            let mut decay = Complex64::default();
            if n00 > 0 {
                decay += n00 as f64 * (at(n00 - 1, n01, n10, n11 + 1) - s);
            }
            if n11 > 0 {
                decay += n11 as f64 * (at(n00 + 1, n01, n10, n11 - 1) - s);
            }
            if n01 > 0 {
                decay += n01 as f64
                    * (2.0 * at(n00, n01 - 1, n10, n11 + 1) + 2.0 * at(n00 + 1, n01 - 1, n10, n11)
                        - at(n00, n01 - 1, n10 + 1, n11)
                        - 3.0 * s);
            }
            if n10 > 0 {
                decay += n10 as f64
                    * (2.0 * at(n00, n01, n10 - 1, n11 + 1) + 2.0 * at(n00 + 1, n01, n10 - 1, n11)
                        - at(n00, n01 + 1, n10 - 1, n11)
                        - 3.0 * s);
            }
            v += g4 * decay;
        }
        out[k] = v;
    }
}

/// Evaluate σ̇ for the given state and parameters (matrix-free).
pub fn sigma_dot(state: &ReducedState, params: &SearchParams) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); state.len()];
    sigma_dot_impl(
        state.qubits(),
        params.gamma(),
        state.as_slice(),
        &mut out,
        DeltaTermMutation::None,
    );
    out
}

pub(crate) fn sigma_dot_mutated(state: &ReducedState, params: &SearchParams) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); state.len()];
    sigma_dot_impl(
        state.qubits(),
        params.gamma(),
        state.as_slice(),
        &mut out,
        DeltaTermMutation::FlippedSign,
    );
    out
}

/// Assembled sparse form of the generator: L σ = σ̇.
pub struct Liouvillian {
    q: usize,
    triplets: Vec<Trip>,
    mat: faer::sparse::SparseColMat<usize, Complex64>,
}

impl Liouvillian {
    pub fn assemble(params: &SearchParams) -> Result<Self> {
        Self::assemble_with_cap(params, DEFAULT_NONZERO_CAP)
    }

    pub fn assemble_with_cap(params: &SearchParams, cap: usize) -> Result<Self> {
        let q = params.qubits();
        let m = state_space_size(q);
        // structural estimate before any allocation
        let mut estimated = 0usize;
        for p in classes(q) {
            let d = p.distances();
            estimated += (q - d.d_x0 + 1) * (d.d_x0 + 1);
            estimated += (q - d.d_y0 + 1) * (d.d_y0 + 1);
            estimated += 9;
        }
        if estimated > cap {
            return Err(Error::MemoryGuard {
                nonzeros: estimated,
                cap,
            });
        }
        let triplets = assemble_triplets(q, params.gamma());
        let mat = faer::sparse::SparseColMat::try_new_from_triplets(m, m, &triplets).map_err(
            |e| Error::SolverFailure {
                reason: format!("Liouvillian assembly failed: {e:?}"),
                condition: f64::NAN,
            },
        )?;
        Ok(Self { q, triplets, mat })
    }

    pub fn qubits(&self) -> usize {
        self.q
    }

    pub fn num_rows(&self) -> usize {
        state_space_size(self.q)
    }

    /// Apply L to a class vector.
    pub fn apply(&self, sigma: &[Complex64]) -> Vec<Complex64> {
        let x = faer::Mat::<Complex64>::from_fn(sigma.len(), 1, |i, _| sigma[i]);
        let y = self.mat.as_ref() * x.as_ref();
        (0..sigma.len()).map(|i| y[(i, 0)]).collect()
    }

    /// Dense copy (small q only; used for rank diagnostics).
    pub fn to_dense(&self) -> faer::Mat<Complex64> {
        let m = self.num_rows();
        let mut dense = faer::Mat::<Complex64>::zeros(m, m);
        for t in &self.triplets {
            dense[(t.row, t.col)] += t.val;
        }
        dense
    }

    fn raw_triplets(&self) -> &[Trip] {
        &self.triplets
    }
}

/// Triplets of the generator; each row transcribes one class equation, in
/// ascending rank order with a fixed in-row term order.
fn assemble_triplets(q: usize, gamma: f64) -> Vec<Trip> {
    use faer::sparse::Triplet;
    let inv_n = 2f64.powi(-(q as i32));
    let i = Complex64::new(0.0, 1.0);
    let g4 = gamma / 4.0;
    let mut trips: Vec<Trip> = Vec::new();
    let col = |n00: usize, n01: usize, n10: usize, n11: usize| -> usize {
        rank(&PairCounts::new(n00, n01, n10, n11))
    };
    for (k, p) in classes(q).enumerate() {
        let PairCounts { n00, n01, n10, n11 } = p;
        let d = p.distances();
        let (dx, dy) = (d.d_x0, d.d_y0);
        for i00 in 0..=(q - dx) {
            let w_outer = binomial_f64(q - dx, i00);
            for i11 in 0..=dx {
                let w = w_outer * binomial_f64(dx, i11) * inv_n;
                trips.push(Triplet::new(k, col(i00, q - dx - i00, dx - i11, i11), i * w));
            }
        }
        for i00 in 0..=(q - dy) {
            let w_outer = binomial_f64(q - dy, i00);
            for i11 in 0..=dy {
                let w = w_outer * binomial_f64(dy, i11) * inv_n;
                trips.push(Triplet::new(k, col(i00, dy - i11, q - dy - i00, i11), -i * w));
            }
        }
        let delta = (if dy == 0 { 1.0 } else { 0.0 }) - (if dx == 0 { 1.0 } else { 0.0 });
        if delta != 0.0 {
            trips.push(Triplet::new(k, k, i * delta));
        }
        if gamma > 0.0 {
            let re = |v: f64| Complex64::new(v, 0.0);
            let mut diag = 0.0f64;
            if n00 > 0 {
                trips.push(Triplet::new(k, col(n00 - 1, n01, n10, n11 + 1), re(g4 * n00 as f64)));
                diag -= n00 as f64;
            }
            if n11 > 0 {
                trips.push(Triplet::new(k, col(n00 + 1, n01, n10, n11 - 1), re(g4 * n11 as f64)));
                diag -= n11 as f64;
            }
            if n01 > 0 {
                let f = n01 as f64;
                trips.push(Triplet::new(k, col(n00, n01 - 1, n10, n11 + 1), re(2.0 * g4 * f)));
                trips.push(Triplet::new(k, col(n00 + 1, n01 - 1, n10, n11), re(2.0 * g4 * f)));
                trips.push(Triplet::new(k, col(n00, n01 - 1, n10 + 1, n11), re(-g4 * f)));
                diag -= 3.0 * f;
            }
            if n10 > 0 {
                let f = n10 as f64;
                trips.push(Triplet::new(k, col(n00, n01, n10 - 1, n11 + 1), re(2.0 * g4 * f)));
                trips.push(Triplet::new(k, col(n00 + 1, n01, n10 - 1, n11), re(2.0 * g4 * f)));
                trips.push(Triplet::new(k, col(n00, n01 + 1, n10 - 1, n11), re(-g4 * f)));
                diag -= 3.0 * f;
            }
            if diag != 0.0 {
                trips.push(Triplet::new(k, k, re(g4 * diag)));
            }
        }
    }
    trips
}

/// Result of a steady-state solve.
pub struct SteadySolution {
    pub state: ReducedState,
    /// 1-norm condition estimate of the (equilibrated) modified system.
    pub condition_estimate: f64,
    /// |σ̇| at the class whose equation was replaced by the trace condition,
    /// evaluated matrix-free after the solve.
    pub replaced_row_residual: f64,
    pub used_least_squares: bool,
}

/// Solve σ̇ = 0 with the equation of the class (q,0,0,0) replaced by the unit
/// trace condition Σ_d C(q,d) σ_{q−d,0,0,d} = 1.
pub fn steady_state(params: &SearchParams) -> Result<SteadySolution> {
    steady_state_with_cap(params, DEFAULT_NONZERO_CAP)
}

pub fn steady_state_with_cap(params: &SearchParams, cap: usize) -> Result<SteadySolution> {
    if params.gamma() <= 0.0 {
        return Err(Error::InvalidParameter(
            "steady state requires Γ > 0 (it is not unique otherwise)".into(),
        ));
    }
    let q = params.qubits();
    let m = state_space_size(q);
    let liouvillian = Liouvillian::assemble_with_cap(params, cap)?;
    // the class (q,0,0,0) ranks 0, so the trace condition replaces row 0
    let replaced_row = diagonal_rank(q, 0);
    debug_assert_eq!(replaced_row, 0);
    let mut modified: Vec<Trip> = liouvillian
        .raw_triplets()
        .iter()
        .filter(|t| t.row != replaced_row)
        .copied()
        .collect();
    for d in 0..=q {
        modified.push(faer::sparse::Triplet::new(
            replaced_row,
            diagonal_rank(q, d),
            Complex64::new(binomial_u64(q, d) as f64, 0.0),
        ));
    }
    let mut b = vec![Complex64::default(); m];
    b[replaced_row] = Complex64::new(1.0, 0.0);

    let direct = solve_square(m, &modified, &b);
    let report = match direct {
        Ok(rep) => {
            if replaced_residual(q, params, &rep) <= 1e-8 {
                rep
            } else {
                fallback_least_squares(q, &liouvillian, rep.condition_estimate)?
            }
        }
        Err(Error::SolverFailure { condition, .. }) => {
            fallback_least_squares(q, &liouvillian, condition)?
        }
        Err(e) => return Err(e),
    };

    let residual = replaced_residual(q, params, &report);
    if residual > 1e-8 {
        return Err(Error::SolverFailure {
            reason: format!("replaced-equation residual {residual:.3e} exceeds 1e-8"),
            condition: report.condition_estimate,
        });
    }
    let state = ReducedState::from_vec(q, report.x)?;
    state.validate()?;
    Ok(SteadySolution {
        state,
        condition_estimate: report.condition_estimate,
        replaced_row_residual: residual,
        used_least_squares: report.used_least_squares,
    })
}

fn replaced_residual(q: usize, params: &SearchParams, report: &SolveReport) -> f64 {
    let mut dot = vec![Complex64::default(); report.x.len()];
    sigma_dot_impl(
        q,
        params.gamma(),
        &report.x,
        &mut dot,
        DeltaTermMutation::None,
    );
    dot[diagonal_rank(q, 0)].norm()
}

/// Least-squares rescue: keep every generator equation and append the trace
/// row, then minimize the residual of the stacked system.
fn fallback_least_squares(
    q: usize,
    liouvillian: &Liouvillian,
    condition: f64,
) -> Result<SolveReport> {
    let m = state_space_size(q);
    let mut trips: Vec<Trip> = liouvillian.raw_triplets().to_vec();
    for d in 0..=q {
        trips.push(faer::sparse::Triplet::new(
            m,
            diagonal_rank(q, d),
            Complex64::new(binomial_u64(q, d) as f64, 0.0),
        ));
    }
    let mut b = vec![Complex64::default(); m + 1];
    b[m] = Complex64::new(1.0, 0.0);
    let mut rep = solve_least_squares(m + 1, m, &trips, &b)?;
    if rep.condition_estimate.is_nan() {
        rep.condition_estimate = condition;
    }
    Ok(rep)
}

/// Reduced trajectory: σ(t) samples at every integrator step.
pub struct ReducedTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ReducedState>,
}

impl ReducedTrajectory {
    /// ρ_00(t) along the trajectory.
    pub fn solution_population(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.diagonal(0).re).collect()
    }
}

/// RK4 integration of σ̇, calling `observer` after every step (and at t = 0).
/// Aborts if the trace or Hermiticity pairing drifts beyond 1e−8.
pub fn evolve_reduced_observed(
    sigma0: &ReducedState,
    params: &SearchParams,
    t_max: f64,
    dt: f64,
    mut observer: impl FnMut(f64, &ReducedState),
) -> Result<ReducedState> {
    if sigma0.qubits() != params.qubits() {
        return Err(Error::InvalidParameter(
            "state and parameters disagree on q".into(),
        ));
    }
    if !(dt > 0.0) || !t_max.is_finite() || t_max < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "evolve needs dt > 0 and t_max >= 0, got dt = {dt}, t_max = {t_max}"
        )));
    }
    let q = params.qubits();
    let gamma = params.gamma();
    let m = sigma0.len();
    let steps = (t_max / dt).round() as usize;
    let mut state = sigma0.clone();
    observer(0.0, &state);
    let mut k1 = vec![Complex64::default(); m];
    let mut k2 = vec![Complex64::default(); m];
    let mut k3 = vec![Complex64::default(); m];
    let mut k4 = vec![Complex64::default(); m];
    let mut tmp = vec![Complex64::default(); m];
    for step in 0..steps {
        let s = state.as_slice();
        sigma_dot_impl(q, gamma, s, &mut k1, DeltaTermMutation::None);
        for j in 0..m {
            tmp[j] = s[j] + (dt / 2.0) * k1[j];
        }
        sigma_dot_impl(q, gamma, &tmp, &mut k2, DeltaTermMutation::None);
        for j in 0..m {
            tmp[j] = s[j] + (dt / 2.0) * k2[j];
        }
        sigma_dot_impl(q, gamma, &tmp, &mut k3, DeltaTermMutation::None);
        for j in 0..m {
            tmp[j] = s[j] + dt * k3[j];
        }
        sigma_dot_impl(q, gamma, &tmp, &mut k4, DeltaTermMutation::None);
        {
            let s = state.as_mut_slice();
            for j in 0..m {
                s[j] += (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        let t = (step + 1) as f64 * dt;
        let trace_defect = (state.weighted_trace() - 1.0).norm();
        let herm = state.hermiticity_defect();
        if trace_defect > 1e-8 || herm > 1e-8 {
            return Err(Error::InvariantViolation {
                check: if trace_defect > herm {
                    "weighted trace"
                } else {
                    "hermiticity pairing"
                },
                magnitude: trace_defect.max(herm),
                tolerance: 1e-8,
                context: Some(format!("reduced integration at t = {t:.3}")),
            });
        }
        observer(t, &state);
    }
    Ok(state)
}

/// Integrate and keep every step (memory O(steps · M)).
pub fn evolve_reduced(
    sigma0: &ReducedState,
    params: &SearchParams,
    t_max: f64,
    dt: f64,
) -> Result<ReducedTrajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    evolve_reduced_observed(sigma0, params, t_max, dt, |t, s| {
        times.push(t);
        states.push(s.clone());
    })?;
    Ok(ReducedTrajectory { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::full::{
        evolve_full_observed, expand_class_vector, master_rhs_full, project_full_to_reduced,
        uniform_superposition_density,
    };
    use crate::params::default_time_step;
    use crate::verify::random_symmetric_state;
    use approx::assert_relative_eq;
    use rand::RngExt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn uniform_state_basics() {
        let s = ReducedState::uniform(2).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.as_slice().iter().all(|v| (v - c(0.25, 0.0)).norm() == 0.0));
        assert!((s.weighted_trace() - 1.0).norm() < 1e-15);
        s.validate().unwrap();
    }

    #[test]
    fn single_qubit_projector_term() {
        // σ of |s⟩⟨s| at q = 1: σ̇ = (0, −i/2, +i/2, 0) in rank order
        let params = SearchParams::new(1, 0.91, 0).unwrap();
        let s = ReducedState::uniform(1).unwrap();
        let dot = sigma_dot(&s, &params);
        assert!((dot[0]).norm() < 1e-15);
        assert!((dot[rank(&PairCounts::new(0, 1, 0, 0))] - c(0.0, -0.5)).norm() < 1e-15);
        assert!((dot[rank(&PairCounts::new(0, 0, 1, 0))] - c(0.0, 0.5)).norm() < 1e-15);
        assert!((dot[rank(&PairCounts::new(0, 0, 0, 1))]).norm() < 1e-15);
    }

    #[test]
    fn uniform_state_is_dark_for_the_decay() {
        // all decay terms vanish on |s⟩⟨s|, so σ̇ is Γ-independent
        for q in [1usize, 3, 7] {
            let s = ReducedState::uniform(q).unwrap();
            let a = sigma_dot(&s, &SearchParams::new(q, 0.0, 0).unwrap());
            let b = sigma_dot(&s, &SearchParams::new(q, 4.7, 0).unwrap());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn generator_conserves_weighted_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for q in [2usize, 3, 5, 10, 36] {
            let s = random_symmetric_state(q, &mut rng).unwrap();
            let dot = sigma_dot(&s, &SearchParams::new(q, 0.63, 0).unwrap());
            let tr = weighted_trace_of(q, &dot);
            assert!(tr.norm() < 1e-12, "q = {q}: trace of σ̇ is {:.2e}", tr.norm());
        }
    }

    #[test]
    fn sigma_dot_preserves_hermiticity_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for q in [2usize, 4, 8] {
            let s = random_symmetric_state(q, &mut rng).unwrap();
            let dot = sigma_dot(&s, &SearchParams::new(q, 0.37, 0).unwrap());
            let dot_state = ReducedState::from_vec(q, dot).unwrap();
            assert!(dot_state.hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn reduced_rhs_matches_projected_full_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for q in 2..=5usize {
            let params = SearchParams::new(q, 0.17, 0).unwrap();
            for _ in 0..10 {
                let s = random_symmetric_state(q, &mut rng).unwrap();
                let rho = expand_class_vector(q, s.as_slice()).unwrap();
                let full_dot = master_rhs_full(&rho, &params).unwrap();
                let (projected, residual) = project_full_to_reduced(&full_dot, 0).unwrap();
                assert!(residual < 1e-12, "projection residual {residual:.2e}");
                let reduced_dot = sigma_dot(&s, &params);
                let dev = projected
                    .as_slice()
                    .iter()
                    .zip(&reduced_dot)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0f64, f64::max);
                assert!(dev < 1e-12, "q = {q}: oracle deviation {dev:.2e}");
            }
        }
    }

    #[test]
    fn assembled_liouvillian_reproduces_sigma_dot() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for q in [4usize, 8, 16] {
            let params = SearchParams::new(q, 0.29, 0).unwrap();
            let liouvillian = Liouvillian::assemble(&params).unwrap();
            assert_eq!(liouvillian.num_rows(), state_space_size(q));
            for _ in 0..50 {
                // arbitrary complex vectors: L is linear, no symmetry needed
                let v: Vec<Complex64> = (0..state_space_size(q))
                    .map(|_| {
                        c(
                            rng.random::<f64>() * 2.0 - 1.0,
                            rng.random::<f64>() * 2.0 - 1.0,
                        )
                    })
                    .collect();
                let via_matrix = liouvillian.apply(&v);
                let mut direct = vec![Complex64::default(); v.len()];
                sigma_dot_impl(q, 0.29, &v, &mut direct, DeltaTermMutation::None);
                let dev = via_matrix
                    .iter()
                    .zip(&direct)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0f64, f64::max);
                assert!(dev < 1e-13, "q = {q}: assembled vs matrix-free {dev:.2e}");
            }
        }
    }

    #[test]
    fn liouvillian_rank_deficiency_is_exactly_one() {
        for q in [3usize, 6] {
            let params = SearchParams::new(q, 0.41, 0).unwrap();
            let liouvillian = Liouvillian::assemble(&params).unwrap();
            let dense = liouvillian.to_dense();
            let svd = dense.svd().unwrap();
            let m = state_space_size(q);
            let s0 = svd.S()[0].re;
            let small = (0..m).filter(|&i| svd.S()[i].re < 1e-8 * s0).count();
            assert_eq!(small, 1, "q = {q}: kernel dimension");
        }
    }

    #[test]
    fn q36_has_9139_rows() {
        let params = SearchParams::from_scaled_gamma(36, 0.005, 0).unwrap();
        let liouvillian = Liouvillian::assemble(&params).unwrap();
        assert_eq!(liouvillian.num_rows(), 9139);
    }

    #[test]
    fn memory_guard_triggers() {
        let params = SearchParams::new(20, 0.1, 0).unwrap();
        match Liouvillian::assemble_with_cap(&params, 1000) {
            Err(Error::MemoryGuard { nonzeros, cap }) => {
                assert!(nonzeros > cap);
            }
            other => panic!("expected memory guard, got {other:?}", other = other.err()),
        }
    }

    #[test]
    fn steady_state_strong_decay_approaches_uniform() {
        let params = SearchParams::from_scaled_gamma(4, 1000.0, 0).unwrap();
        let sol = steady_state(&params).unwrap();
        let expect = 2f64.powi(-4);
        for v in sol.state.as_slice() {
            assert!((v - c(expect, 0.0)).norm() < 1e-3);
        }
        assert!((sol.state.weighted_trace() - 1.0).norm() < 1e-12);
        assert!(sol.replaced_row_residual < 1e-8);
    }

    #[test]
    fn steady_state_rejects_zero_gamma() {
        let params = SearchParams::new(5, 0.0, 0).unwrap();
        assert!(steady_state(&params).is_err());
    }

    #[test]
    fn steady_state_matches_full_space_long_time_limit() {
        let q = 4;
        let gamma = 0.2;
        let params = SearchParams::new(q, gamma, 0).unwrap();
        let sol = steady_state(&params).unwrap();
        let rho0 = uniform_superposition_density(q);
        let dt = default_time_step(q, gamma);
        let evolved =
            evolve_full_observed(&rho0, &params, 200.0, dt, |_, _| {}).unwrap();
        let (projected, _) = project_full_to_reduced(&evolved, 0).unwrap();
        let dev = projected
            .as_slice()
            .iter()
            .zip(sol.state.as_slice())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(dev < 1e-6, "steady vs long-time full evolution: {dev:.2e}");
    }

    #[test]
    fn steady_state_agrees_with_long_time_reduced_evolution() {
        for (q, scaled) in [(6usize, 1.0), (16, 3.0)] {
            let params = SearchParams::from_scaled_gamma(q, scaled, 0).unwrap();
            let sol = steady_state(&params).unwrap();
            let dt = default_time_step(q, params.gamma());
            let t_max = 40.0 / params.gamma();
            let s0 = ReducedState::uniform(q).unwrap();
            let evolved = evolve_reduced_observed(&s0, &params, t_max, dt, |_, _| {}).unwrap();
            let dev = evolved
                .as_slice()
                .iter()
                .zip(sol.state.as_slice())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            assert!(dev < 1e-6, "q = {q}: direct vs evolved {dev:.2e}");
        }
    }

    #[test]
    fn least_squares_fallback_agrees_with_direct_solve() {
        let q = 4;
        let params = SearchParams::new(q, 0.3, 0).unwrap();
        let direct = steady_state(&params).unwrap();
        let liouvillian = Liouvillian::assemble(&params).unwrap();
        let fb = fallback_least_squares(q, &liouvillian, f64::NAN).unwrap();
        let dev = direct
            .state
            .as_slice()
            .iter()
            .zip(&fb.x)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(dev < 1e-9, "fallback deviates from direct solve: {dev:.2e}");
    }

    #[test]
    fn reduced_oscillation_matches_search_period() {
        // Γ = 0, q = 6: ρ_00 swings between ~0 and ~1 with period π·2^{q/2}
        let q = 6;
        let params = SearchParams::new(q, 0.0, 0).unwrap();
        let s0 = ReducedState::uniform(q).unwrap();
        let dt = default_time_step(q, 0.0);
        let traj = evolve_reduced(&s0, &params, 30.0, dt).unwrap();
        let pop = traj.solution_population();
        let peak = pop.iter().cloned().fold(0.0f64, f64::max);
        let trough = pop.iter().cloned().fold(1.0f64, f64::min);
        assert!(peak >= 1.0 - 2f64.powi(-6));
        assert!(trough < 0.02);
        let peak_t = traj.times[pop
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0];
        assert_relative_eq!(peak_t, std::f64::consts::PI * 4.0, max_relative = 0.02);
    }

    #[test]
    fn reduced_step_halving_is_converged() {
        let q = 5;
        let params = SearchParams::new(q, 0.1, 0).unwrap();
        let s0 = ReducedState::uniform(q).unwrap();
        let dt = default_time_step(q, 0.1);
        let a = evolve_reduced_observed(&s0, &params, 12.0, dt, |_, _| {}).unwrap();
        let b = evolve_reduced_observed(&s0, &params, 12.0, dt / 2.0, |_, _| {}).unwrap();
        let dev = (a.diagonal(0).re - b.diagonal(0).re).abs();
        assert!(dev < 1e-8, "dt halving moved ρ_00 by {dev:.2e}");
    }

    #[test]
    fn runaway_step_aborts_with_invariant_violation() {
        let q = 4;
        let params = SearchParams::new(q, 5.0, 0).unwrap();
        let s0 = ReducedState::uniform(q).unwrap();
        // dt far beyond the stability limit of RK4 for Γ = 5
        let err = evolve_reduced_observed(&s0, &params, 100.0, 2.5, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::InvariantViolation { .. }));
    }

    #[test]
    fn validate_catches_broken_states() {
        let q = 3;
        let mut s = ReducedState::uniform(q).unwrap();
        s.as_mut_slice()[diagonal_rank(q, 1)] += c(0.1, 0.0);
        assert!(matches!(
            s.validate(),
            Err(Error::InvariantViolation { check: "weighted trace", .. })
        ));
        let mut s = ReducedState::uniform(q).unwrap();
        s.as_mut_slice()[rank(&PairCounts::new(1, 1, 0, 1))] += c(0.0, 1e-3);
        assert!(matches!(
            s.validate(),
            Err(Error::InvariantViolation { check: "hermiticity pairing", .. })
        ));
    }
}
