//! Brute-force reference implementation in the full 2^q-dimensional Hilbert
//! space.
//!
//! The master equation is
//!
//!   ρ̇ = i[ρ, H_w] + (Γ/2) Σ_i (2 c_i ρ c_i† − c_i†c_i ρ − ρ c_i†c_i)
//!
//! with the search Hamiltonian H_w = |w⟩⟨w| + |s⟩⟨s| and collapse operators
//! c_i = I ⊗ … ⊗ H d⁻ H ⊗ … ⊗ I (d⁻ = |0⟩⟨1| at qubit i), which drive each
//! qubit toward H|0⟩ and the register toward the uniform superposition |s⟩.
//!
//! Everything here is a dense-matrix transcription meant to serve as the
//! oracle for the symmetry-reduced engine; only the Runge-Kutta right-hand
//! side uses the rank-2 / two-entry structure of the operators, and that fast
//! path is tested element-for-element against the dense one.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::index::{rank, state_space_size, PairCounts};
use crate::params::SearchParams;
use crate::reduced::ReducedState;

/// Resource cap for dense operators and time evolution.
pub const FULL_ORACLE_MAX_QUBITS: usize = 8;

/// Resource cap for the dense Liouvillian null-space solve (4^q scaling).
pub const FULL_NULLSPACE_MAX_QUBITS: usize = 4;

/// Full-space density matrix (2^q × 2^q, Hermitian, unit trace).
pub type FullState = Array2<Complex64>;

fn check_oracle_cap(q: usize) -> Result<()> {
    if q == 0 || q > FULL_ORACLE_MAX_QUBITS {
        return Err(Error::OracleCapExceeded {
            q,
            cap: FULL_ORACLE_MAX_QUBITS,
        });
    }
    Ok(())
}

/// |s⟩⟨s|, the density matrix of the uniform superposition.
pub fn uniform_superposition_density(q: usize) -> FullState {
    let n = 1usize << q;
    Array2::from_elem((n, n), Complex64::new((n as f64).recip(), 0.0))
}

/// |x⟩⟨x| computational basis projector.
pub fn basis_density(q: usize, x: u64) -> FullState {
    let n = 1usize << q;
    let mut rho = Array2::zeros((n, n));
    rho[(x as usize, x as usize)] = Complex64::new(1.0, 0.0);
    rho
}

/// Search Hamiltonian H_w = |w⟩⟨w| + |s⟩⟨s| as a dense matrix:
/// entries δ_{x,w} δ_{y,w} + 2^{−q}.
pub fn build_hamiltonian(params: &SearchParams) -> Result<FullState> {
    check_oracle_cap(params.qubits())?;
    let n = params.dimension();
    let mut h = Array2::from_elem((n, n), Complex64::new((n as f64).recip(), 0.0));
    let w = params.marked() as usize;
    h[(w, w)] += Complex64::new(1.0, 0.0);
    Ok(h)
}

/// The q collapse operators c_i = I ⊗ … ⊗ H d⁻ H ⊗ … ⊗ I.
///
/// In the computational basis the single-site factor is
/// H d⁻ H = ½ [[1, −1], [1, −1]], so (c_i)_{x,y} = ½ (−1)^{y_i} whenever x
/// and y agree on every bit other than i.
pub fn build_collapse_ops(q: usize) -> Result<Vec<FullState>> {
    check_oracle_cap(q)?;
    let n = 1usize << q;
    let mut ops = Vec::with_capacity(q);
    for i in 0..q {
        let bit = 1usize << i;
        let mut c = Array2::zeros((n, n));
        for x in 0..n {
            let x0 = x & !bit;
            let x1 = x | bit;
            c[(x, x0)] += Complex64::new(0.5, 0.0);
            c[(x, x1)] -= Complex64::new(0.5, 0.0);
        }
        ops.push(c);
    }
    Ok(ops)
}

fn dagger(m: &FullState) -> FullState {
    m.t().mapv(|z| z.conj())
}

/// Dense transcription of the master-equation right-hand side.
///
/// This is the reference path: plain matrix products of the operators from
/// [`build_hamiltonian`] and [`build_collapse_ops`].
pub fn master_rhs_full(rho: &FullState, params: &SearchParams) -> Result<FullState> {
    check_oracle_cap(params.qubits())?;
    let h = build_hamiltonian(params)?;
    let i = Complex64::new(0.0, 1.0);
    let mut out = (rho.dot(&h) - h.dot(rho)).mapv(|z| i * z);
    let gamma = params.gamma();
    if gamma > 0.0 {
        let half_gamma = Complex64::new(gamma / 2.0, 0.0);
        for c in build_collapse_ops(params.qubits())? {
            let cd = dagger(&c);
            let cdc = cd.dot(&c);
            let term = c.dot(rho).dot(&cd).mapv(|z| 2.0 * z) - cdc.dot(rho) - rho.dot(&cdc);
            out = out + term.mapv(|z| half_gamma * z);
        }
    }
    Ok(out)
}

/// Structure-exploiting right-hand side used by the integrators: H_w is
/// rank 2 and each c_i couples only index pairs differing in bit i, so one
/// evaluation costs O(q 4^q) instead of O(q 8^q). Verified against
/// [`master_rhs_full`] in the test suite.
fn master_rhs_fast(
    rho: &FullState,
    params: &SearchParams,
    include_hamiltonian: bool,
    out: &mut FullState,
) {
    let q = params.qubits();
    let n = 1usize << q;
    let gamma = params.gamma();
    out.fill(Complex64::new(0.0, 0.0));

    if include_hamiltonian {
        // i(ρ H − H ρ) with H = |w⟩⟨w| + |s⟩⟨s|:
        //   i (ρ_{x,w} δ_{y,w} + 2^{−q} R_x − δ_{x,w} ρ_{w,y} − 2^{−q} C_y)
        let w = params.marked() as usize;
        let inv_n = (n as f64).recip();
        let mut row_sums = vec![Complex64::default(); n];
        let mut col_sums = vec![Complex64::default(); n];
        for x in 0..n {
            for y in 0..n {
                let v = rho[(x, y)];
                row_sums[x] += v;
                col_sums[y] += v;
            }
        }
        let i = Complex64::new(0.0, 1.0);
        for x in 0..n {
            for y in 0..n {
                let mut v = inv_n * (row_sums[x] - col_sums[y]);
                if y == w {
                    v += rho[(x, w)];
                }
                if x == w {
                    v -= rho[(w, y)];
                }
                out[(x, y)] = i * v;
            }
        }
    }

    if gamma > 0.0 {
        let g = gamma / 2.0;
        let mut a = Array2::<Complex64>::zeros((n, n));
        for i in 0..q {
            let bit = 1usize << i;
            // a = (ρ with bit i of the row index 0) − (… 1); both c_i ρ and
            // c_i†c_i ρ are built from this difference.
            for x in 0..n {
                let (x0, x1) = (x & !bit, x | bit);
                for y in 0..n {
                    a[(x, y)] = rho[(x0, y)] - rho[(x1, y)];
                }
            }
            for x in 0..n {
                let sx = if x & bit == 0 { 1.0 } else { -1.0 };
                for y in 0..n {
                    let (y0, y1) = (y & !bit, y | bit);
                    let sy = if y & bit == 0 { 1.0 } else { -1.0 };
                    let c_rho_cd = 0.25 * (a[(x, y0)] - a[(x, y1)]);
                    let cdc_rho = 0.5 * sx * a[(x, y)];
                    let rho_cdc = 0.5 * sy * (rho[(x, y0)] - rho[(x, y1)]);
                    out[(x, y)] += g * (2.0 * c_rho_cd - cdc_rho - rho_cdc);
                }
            }
        }
    }
}

/// Hermiticity defect max |ρ − ρ†| and trace defect |tr ρ − 1|.
pub fn density_defects(rho: &FullState) -> (f64, f64) {
    let n = rho.nrows();
    let mut herm = 0.0f64;
    let mut trace = Complex64::default();
    for x in 0..n {
        trace += rho[(x, x)];
        for y in x..n {
            herm = herm.max((rho[(x, y)] - rho[(y, x)].conj()).norm());
        }
    }
    (herm, (trace - 1.0).norm())
}

/// Check Hermiticity and unit trace to the given tolerance.
pub fn validate_density(rho: &FullState, tol: f64) -> Result<()> {
    let (herm, trace) = density_defects(rho);
    if herm > tol {
        return Err(Error::InvariantViolation {
            check: "hermiticity",
            magnitude: herm,
            tolerance: tol,
            context: None,
        });
    }
    if trace > tol {
        return Err(Error::InvariantViolation {
            check: "trace",
            magnitude: trace,
            tolerance: tol,
            context: None,
        });
    }
    Ok(())
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &FullState) -> Vec<f64> {
    let n = m.nrows();
    let fm = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| m[(i, j)]);
    fm.self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("eigenvalue computation failed")
}

/// Smallest eigenvalue of ρ; the positivity check for small registers.
pub fn min_eigenvalue(rho: &FullState) -> f64 {
    hermitian_eigenvalues(rho)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// One trajectory of the dense integrator.
pub struct FullTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<FullState>,
}

impl FullTrajectory {
    /// Population ⟨x|ρ(t)|x⟩ along the trajectory.
    pub fn population(&self, x: u64) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| s[(x as usize, x as usize)].re)
            .collect()
    }
}

/// Integrate the master equation with fixed-step RK4, invoking `observer`
/// after every step (and once at t = 0). Aborts when trace or Hermiticity
/// drift beyond 1e−9.
pub fn evolve_full_observed(
    rho0: &FullState,
    params: &SearchParams,
    t_max: f64,
    dt: f64,
    mut observer: impl FnMut(f64, &FullState),
) -> Result<FullState> {
    check_oracle_cap(params.qubits())?;
    if !(dt > 0.0) || !t_max.is_finite() || t_max < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "evolve needs dt > 0 and t_max >= 0, got dt = {dt}, t_max = {t_max}"
        )));
    }
    let steps = (t_max / dt).round() as usize;
    let mut rho = rho0.clone();
    observer(0.0, &rho);
    let n = rho.nrows();
    let mut k1 = Array2::zeros((n, n));
    let mut k2 = Array2::zeros((n, n));
    let mut k3 = Array2::zeros((n, n));
    let mut k4 = Array2::zeros((n, n));
    let mut tmp = Array2::zeros((n, n));
    let half = dt / 2.0;
    for step in 0..steps {
        master_rhs_fast(&rho, params, true, &mut k1);
        tmp.assign(&rho);
        tmp.scaled_add(Complex64::new(half, 0.0), &k1);
        master_rhs_fast(&tmp, params, true, &mut k2);
        tmp.assign(&rho);
        tmp.scaled_add(Complex64::new(half, 0.0), &k2);
        master_rhs_fast(&tmp, params, true, &mut k3);
        tmp.assign(&rho);
        tmp.scaled_add(Complex64::new(dt, 0.0), &k3);
        master_rhs_fast(&tmp, params, true, &mut k4);
        let w = dt / 6.0;
        for ((o, &a), (&b, (&c, &d))) in rho
            .iter_mut()
            .zip(k1.iter())
            .zip(k2.iter().zip(k3.iter().zip(k4.iter())))
        {
            *o += w * (a + 2.0 * b + 2.0 * c + d);
        }
        let t = (step + 1) as f64 * dt;
        let (herm, trace) = density_defects(&rho);
        if herm > 1e-9 || trace > 1e-9 {
            return Err(Error::InvariantViolation {
                check: if herm > trace { "hermiticity" } else { "trace" },
                magnitude: herm.max(trace),
                tolerance: 1e-9,
                context: Some(format!("full-space integration at t = {t:.3}")),
            });
        }
        observer(t, &rho);
    }
    Ok(rho)
}

/// Integrate and keep every step. Memory is O(steps · 4^q); use
/// [`evolve_full_observed`] when only observables are needed.
pub fn evolve_full(
    rho0: &FullState,
    params: &SearchParams,
    t_max: f64,
    dt: f64,
) -> Result<FullTrajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    evolve_full_observed(rho0, params, t_max, dt, |t, rho| {
        times.push(t);
        states.push(rho.clone());
    })?;
    Ok(FullTrajectory { times, states })
}

/// One iteration of the discrete search with interleaved decay: apply
/// G_w = (2|s⟩⟨s| − I)(I − 2|w⟩⟨w|) as ρ → G ρ G†, then evolve under the
/// dissipator alone for a time `tau`.
pub fn grover_iterate_with_decay(
    rho: &FullState,
    params: &SearchParams,
    tau: f64,
) -> Result<FullState> {
    check_oracle_cap(params.qubits())?;
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "decay interval must be nonnegative, got {tau}"
        )));
    }
    let n = params.dimension();
    let two_over_n = Complex64::new(2.0 / n as f64, 0.0);
    let w = params.marked() as usize;
    // G = (2|s⟩⟨s| − I)(I − 2|w⟩⟨w|): start from 2|s⟩⟨s| − I, then flip the
    // sign of column w.
    let mut g = Array2::from_elem((n, n), two_over_n);
    for x in 0..n {
        g[(x, x)] -= Complex64::new(1.0, 0.0);
    }
    for x in 0..n {
        g[(x, w)] = -g[(x, w)];
    }
    let mut out = g.dot(rho).dot(&dagger(&g));

    if tau > 0.0 && params.gamma() > 0.0 {
        // dissipator-only relaxation: H = 0 in the master equation
        let dt_pref = 0.1f64.min(0.05 / params.gamma());
        let steps = (tau / dt_pref).ceil().max(1.0) as usize;
        let dt = tau / steps as f64;
        let mut k1 = Array2::zeros((n, n));
        let mut k2 = Array2::zeros((n, n));
        let mut k3 = Array2::zeros((n, n));
        let mut k4 = Array2::zeros((n, n));
        let mut tmp = Array2::zeros((n, n));
        for _ in 0..steps {
            master_rhs_fast(&out, params, false, &mut k1);
            tmp.assign(&out);
            tmp.scaled_add(Complex64::new(dt / 2.0, 0.0), &k1);
            master_rhs_fast(&tmp, params, false, &mut k2);
            tmp.assign(&out);
            tmp.scaled_add(Complex64::new(dt / 2.0, 0.0), &k2);
            master_rhs_fast(&tmp, params, false, &mut k3);
            tmp.assign(&out);
            tmp.scaled_add(Complex64::new(dt, 0.0), &k3);
            master_rhs_fast(&tmp, params, false, &mut k4);
            let wgt = dt / 6.0;
            for ((o, &a), (&b, (&c, &d))) in out
                .iter_mut()
                .zip(k1.iter())
                .zip(k2.iter().zip(k3.iter().zip(k4.iter())))
            {
                *o += wgt * (a + 2.0 * b + 2.0 * c + d);
            }
        }
    }
    Ok(out)
}

/// Conjugate by the bitwise-XOR shift S_w: (S_w m S_w†)_{x,y} = m_{x⊕w, y⊕w}.
/// S_w maps the problem with solution w onto the one with solution 0.
pub fn shift_conjugate(m: &FullState, w: u64) -> FullState {
    let n = m.nrows();
    let w = w as usize;
    Array2::from_shape_fn((n, n), |(x, y)| m[(x ^ w, y ^ w)])
}

/// Shift-relabel ρ by S_w, average each pair-count class, and report the
/// largest within-class deviation from the class mean (the bit-swap-symmetry
/// residual).
pub fn project_full_to_reduced(rho: &FullState, w: u64) -> Result<(ReducedState, f64)> {
    let n = rho.nrows();
    let q = n.trailing_zeros() as usize;
    check_oracle_cap(q)?;
    let m = state_space_size(q);
    let mut sums = vec![Complex64::default(); m];
    let mut counts = vec![0usize; m];
    let w = w as usize;
    let class_of = class_table(q);
    for x in 0..n {
        for y in 0..n {
            let k = class_of[(x ^ w) * n + (y ^ w)];
            sums[k] += rho[(x, y)];
            counts[k] += 1;
        }
    }
    let means: Vec<Complex64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let mut residual = 0.0f64;
    for x in 0..n {
        for y in 0..n {
            let k = class_of[(x ^ w) * n + (y ^ w)];
            residual = residual.max((rho[(x, y)] - means[k]).norm());
        }
    }
    Ok((ReducedState::from_vec(q, means)?, residual))
}

/// Flat lookup table (x · N + y) → class rank.
fn class_table(q: usize) -> Vec<usize> {
    let n = 1usize << q;
    let mut table = vec![0usize; n * n];
    for x in 0..n {
        for y in 0..n {
            let p = PairCounts::from_bits(x as u64, y as u64, q).expect("q within cap");
            table[x * n + y] = rank(&p);
        }
    }
    table
}

/// Expand a reduced state back to the full 2^q × 2^q matrix (solution at 0).
pub fn expand_reduced_to_full(sigma: &ReducedState) -> Result<FullState> {
    let q = sigma.qubits();
    check_oracle_cap(q)?;
    let n = 1usize << q;
    let class_of = class_table(q);
    Ok(Array2::from_shape_fn((n, n), |(x, y)| {
        sigma.as_slice()[class_of[x * n + y]]
    }))
}

/// Steady state by direct null-space extraction of the dense Liouvillian
/// superoperator (4^q × 4^q; capped at q ≤ 4). Independent of both the
/// time integrators and the reduced solver.
pub fn steady_state_full_nullspace(params: &SearchParams) -> Result<FullState> {
    let q = params.qubits();
    if q > FULL_NULLSPACE_MAX_QUBITS {
        return Err(Error::OracleCapExceeded {
            q,
            cap: FULL_NULLSPACE_MAX_QUBITS,
        });
    }
    if params.gamma() <= 0.0 {
        return Err(Error::InvalidParameter(
            "steady state is not unique at Γ = 0".into(),
        ));
    }
    let n = params.dimension();
    let dim = n * n;
    // columns: vectorized RHS of each basis matrix E_{xy}
    let mut sup = faer::Mat::<faer::c64>::zeros(dim, dim);
    let mut basis = Array2::<Complex64>::zeros((n, n));
    for col in 0..dim {
        let (x, y) = (col / n, col % n);
        basis[(x, y)] = Complex64::new(1.0, 0.0);
        let rhs = master_rhs_full(&basis, params)?;
        basis[(x, y)] = Complex64::new(0.0, 0.0);
        for row in 0..dim {
            sup[(row, col)] = rhs[(row / n, row % n)];
        }
    }
    let svd = sup.svd().expect("svd failed");
    // right singular vector of the smallest singular value spans the kernel
    let v = svd.V();
    let mut rho = Array2::<Complex64>::zeros((n, n));
    for row in 0..dim {
        rho[(row / n, row % n)] = v[(row, dim - 1)];
    }
    // scale to unit trace; the kernel vector of a Lindblad generator has
    // nonzero trace
    let trace: Complex64 = (0..n).map(|x| rho[(x, x)]).sum();
    if trace.norm() < 1e-12 {
        return Err(Error::SolverFailure {
            reason: "null-space vector has vanishing trace".into(),
            condition: f64::NAN,
        });
    }
    let rho = rho.mapv(|z| z / trace);
    // clean the residual anti-Hermitian part left by the SVD scaling
    let rho_dag = dagger(&rho);
    Ok((&rho + &rho_dag).mapv(|z| 0.5 * z))
}

/// Random pure state ρ = |ψ⟩⟨ψ| with Haar-like direction (for symmetry
/// tests; generically lacks bit-swap symmetry).
pub fn random_pure_density(q: usize, rng: &mut impl rand::RngExt) -> Result<FullState> {
    check_oracle_cap(q)?;
    let n = 1usize << q;
    let mut psi: Vec<Complex64> = (0..n)
        .map(|_| {
            Complex64::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            )
        })
        .collect();
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut psi {
        *z /= norm;
    }
    Ok(Array2::from_shape_fn((n, n), |(x, y)| {
        psi[x] * psi[y].conj()
    }))
}

/// Random Hermitian unit-trace matrix (not necessarily positive).
pub fn random_hermitian_density(q: usize, rng: &mut impl rand::RngExt) -> Result<FullState> {
    check_oracle_cap(q)?;
    let n = 1usize << q;
    let mut rho = Array2::<Complex64>::zeros((n, n));
    for x in 0..n {
        rho[(x, x)] = Complex64::new(rng.random::<f64>(), 0.0);
        for y in (x + 1)..n {
            let z = Complex64::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            );
            rho[(x, y)] = z;
            rho[(y, x)] = z.conj();
        }
    }
    let trace: f64 = (0..n).map(|x| rho[(x, x)].re).sum();
    Ok(rho.mapv(|z| z / trace))
}

/// Expand a symmetry-reduced vector to the full matrix without assuming the
/// state invariants (used for oracle-equivalence tests on arbitrary
/// symmetric matrices).
pub fn expand_class_vector(q: usize, values: &[Complex64]) -> Result<FullState> {
    check_oracle_cap(q)?;
    assert_eq!(values.len(), state_space_size(q));
    let n = 1usize << q;
    let class_of = class_table(q);
    Ok(Array2::from_shape_fn((n, n), |(x, y)| {
        values[class_of[x * n + y]]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_time_step;
    use approx::assert_relative_eq;
    use rand::RngExt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hamiltonian_spectrum_small_q() {
        // q = 2: eigenvalues {0, 0, 1 − 1/√N, 1 + 1/√N} with N = 4
        for w in 0..4u64 {
            let h = build_hamiltonian(&SearchParams::new(2, 0.0, w).unwrap()).unwrap();
            let mut ev = hermitian_eigenvalues(&h);
            ev.sort_by(f64::total_cmp);
            let expect = [0.0, 0.0, 0.5, 1.5];
            for (a, b) in ev.iter().zip(expect) {
                assert_relative_eq!(*a, b, epsilon = 1e-12);
            }
        }
        // q = 1, w = 0: 1 ± 1/√2
        let h = build_hamiltonian(&SearchParams::new(1, 0.0, 0).unwrap()).unwrap();
        let ev = hermitian_eigenvalues(&h);
        let r = 0.5f64.sqrt();
        assert_relative_eq!(ev[0], 1.0 - r, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 1.0 + r, epsilon = 1e-12);
    }

    #[test]
    fn top_eigenvectors_span_s_plus_minus_w() {
        let q = 4;
        let params = SearchParams::new(q, 0.0, 5).unwrap();
        let h = build_hamiltonian(&params).unwrap();
        let n = 1 << q;
        let amp = (n as f64).powf(-0.5);
        for sign in [1.0, -1.0] {
            // v = |s⟩ ± |w⟩ is an (unnormalized) eigenvector with value 1 ± 2^{-q/2}
            let mut v = vec![c(amp, 0.0); n];
            v[5] += c(sign, 0.0);
            let lambda = 1.0 + sign * amp;
            for x in 0..n {
                let hv: Complex64 = (0..n).map(|y| h[(x, y)] * v[y]).sum();
                assert_relative_eq!(hv.re, lambda * v[x].re, epsilon = 1e-12);
                assert_relative_eq!(hv.im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn collapse_ops_basics() {
        let q = 3;
        let ops = build_collapse_ops(q).unwrap();
        assert_eq!(ops.len(), q);
        let n = 1 << q;
        let s = vec![c((n as f64).powf(-0.5), 0.0); n];
        for op in &ops {
            // annihilates |s⟩
            for x in 0..n {
                let v: Complex64 = (0..n).map(|y| op[(x, y)] * s[y]).sum();
                assert!(v.norm() < 1e-14);
            }
            // tr(c_i†c_i): the single-site factor H d⁻ H contributes unit
            // trace, the q−1 identity factors contribute 2 each
            let tr: f64 = (0..n)
                .map(|x| (0..n).map(|y| op[(y, x)].norm_sqr()).sum::<f64>())
                .sum();
            assert_relative_eq!(tr, 2f64.powi(q as i32 - 1), epsilon = 1e-12);
            // nilpotent: c² = 0
            let sq = op.dot(op);
            assert!(sq.iter().all(|z| z.norm() < 1e-14));
        }
    }

    #[test]
    fn single_qubit_collapse_matrix() {
        let ops = build_collapse_ops(1).unwrap();
        let expect = [[0.5, -0.5], [0.5, -0.5]];
        for x in 0..2 {
            for y in 0..2 {
                assert_relative_eq!(ops[0][(x, y)].re, expect[x][y], epsilon = 1e-15);
                assert_eq!(ops[0][(x, y)].im, 0.0);
            }
        }
    }

    #[test]
    fn rhs_of_uniform_state_single_qubit() {
        // ρ = |s⟩⟨s|, q = 1, w = 0: the dissipator vanishes and
        // i[ρ, H_0] = [[0, −i/2], [i/2, 0]]
        let params = SearchParams::new(1, 0.37, 0).unwrap();
        let rho = uniform_superposition_density(1);
        let dot = master_rhs_full(&rho, &params).unwrap();
        assert!((dot[(0, 0)]).norm() < 1e-14);
        assert!((dot[(1, 1)]).norm() < 1e-14);
        assert!((dot[(0, 1)] - c(0.0, -0.5)).norm() < 1e-14);
        assert!((dot[(1, 0)] - c(0.0, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for q in 1..=5 {
            let params = SearchParams::new(q, 0.21, 1 << (q - 1)).unwrap();
            let rho = random_hermitian_density(q, &mut rng).unwrap();
            let dot = master_rhs_full(&rho, &params).unwrap();
            let tr: Complex64 = (0..1 << q).map(|x| dot[(x, x)]).sum();
            assert!(tr.norm() < 1e-12);
            let herm = dagger(&dot);
            assert!(dot
                .iter()
                .zip(herm.iter())
                .all(|(a, b)| (a - b).norm() < 1e-12));
        }
    }

    #[test]
    fn rhs_vanishes_on_eigenprojectors_without_decay() {
        let q = 3;
        let params = SearchParams::new(q, 0.0, 2).unwrap();
        let n = 1 << q;
        let amp = (n as f64).powf(-0.5);
        // eigenprojector of H onto |s⟩ + |w⟩ (normalized)
        let mut v = vec![c(amp, 0.0); n];
        v[2] += c(1.0, 0.0);
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let rho = Array2::from_shape_fn((n, n), |(x, y)| v[x] * v[y].conj() / (norm * norm));
        let dot = master_rhs_full(&rho, &params).unwrap();
        assert!(dot.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn fast_rhs_matches_dense_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for q in 1..=5 {
            let params = SearchParams::new(q, 0.43, (1 << q) - 1).unwrap();
            let rho = random_hermitian_density(q, &mut rng).unwrap();
            let dense = master_rhs_full(&rho, &params).unwrap();
            let mut fast = Array2::zeros(dense.raw_dim());
            master_rhs_fast(&rho, &params, true, &mut fast);
            let dev = dense
                .iter()
                .zip(fast.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            assert!(dev < 1e-13, "q = {q}: fast RHS deviates {dev:.2e}");
        }
    }

    #[test]
    fn shift_conjugation_maps_to_solution_zero() {
        for q in 1..=5 {
            for w in [0u64, 1, (1 << q) - 1] {
                let pw = SearchParams::new(q, 0.0, w).unwrap();
                let p0 = SearchParams::new(q, 0.0, 0).unwrap();
                let hw = build_hamiltonian(&pw).unwrap();
                let h0 = build_hamiltonian(&p0).unwrap();
                let conj = shift_conjugate(&hw, w);
                assert!(conj
                    .iter()
                    .zip(h0.iter())
                    .all(|(a, b)| (a - b).norm() == 0.0));
            }
        }
        // w = 0 is the identity map
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_hermitian_density(3, &mut rng).unwrap();
        let same = shift_conjugate(&m, 0);
        assert!(m.iter().zip(same.iter()).all(|(a, b)| a == b));
    }

    #[test]
    fn master_equation_is_shift_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for q in 2..=5 {
            let w = rng.random_range(0..(1u64 << q));
            let rho = random_hermitian_density(q, &mut rng).unwrap();
            let pw = SearchParams::new(q, 0.31, w).unwrap();
            let p0 = SearchParams::new(q, 0.31, 0).unwrap();
            let lhs = master_rhs_full(&shift_conjugate(&rho, w), &p0).unwrap();
            let rhs = shift_conjugate(&master_rhs_full(&rho, &pw).unwrap(), w);
            let dev = lhs
                .iter()
                .zip(rhs.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            assert!(dev < 1e-12, "q = {q}, w = {w}: equivariance defect {dev:.2e}");
        }
    }

    #[test]
    fn qubit_permutations_commute_with_rhs_at_w_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for q in 2..=5usize {
            let params = SearchParams::new(q, 0.27, 0).unwrap();
            let rho = random_hermitian_density(q, &mut rng).unwrap();
            let mut perm: Vec<usize> = (0..q).collect();
            for i in (1..q).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            let apply = |v: usize| -> usize {
                let mut out = 0usize;
                for (i, &pi) in perm.iter().enumerate() {
                    out |= ((v >> i) & 1) << pi;
                }
                out
            };
            let n = 1 << q;
            let permute =
                |m: &FullState| Array2::from_shape_fn((n, n), |(x, y)| m[(apply(x), apply(y))]);
            let lhs = master_rhs_full(&permute(&rho), &params).unwrap();
            let rhs = permute(&master_rhs_full(&rho, &params).unwrap());
            let dev = lhs
                .iter()
                .zip(rhs.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            assert!(dev < 1e-12);
        }
    }

    #[test]
    fn projection_of_uniform_state() {
        let q = 4;
        let rho = uniform_superposition_density(q);
        let (sigma, residual) = project_full_to_reduced(&rho, 0).unwrap();
        assert_eq!(residual, 0.0);
        for v in sigma.as_slice() {
            assert!((v - c(2f64.powi(-(q as i32)), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn step_halving_changes_endpoint_below_tolerance() {
        // canonical operating point: q = 6, Γ = 0.03, default dt = 0.1
        let q = 6;
        let params = SearchParams::new(q, 0.03, 0).unwrap();
        let rho0 = uniform_superposition_density(q);
        let dt = default_time_step(q, 0.03);
        assert_eq!(dt, 0.1);
        let a = evolve_full(&rho0, &params, 40.0, dt).unwrap();
        let b = evolve_full(&rho0, &params, 40.0, dt / 2.0).unwrap();
        let fa = a.states.last().unwrap()[(0, 0)].re;
        let fb = b.states.last().unwrap()[(0, 0)].re;
        assert!(
            (fa - fb).abs() < 1e-8,
            "step halving moved the endpoint by {:.2e}",
            (fa - fb).abs()
        );
    }

    #[test]
    fn undamped_search_oscillates_with_known_period() {
        // q = 6, Γ = 0: ρ_ww oscillates with period π 2^{q/2} and peaks at 1
        let q = 6;
        let params = SearchParams::new(q, 0.0, 0).unwrap();
        let rho0 = uniform_superposition_density(q);
        let dt = default_time_step(q, 0.0);
        let mut best = (0.0f64, 0.0f64);
        let t_max = 30.0;
        evolve_full_observed(&rho0, &params, t_max, dt, |t, rho| {
            let p = rho[(0, 0)].re;
            if p > best.1 {
                best = (t, p);
            }
        })
        .unwrap();
        let period = std::f64::consts::PI * 8.0;
        assert!(best.1 >= 1.0 - 2f64.powi(-6), "peak {:.4} too low", best.1);
        assert_relative_eq!(best.0, period / 2.0, max_relative = 0.02);
    }

    #[test]
    fn decay_only_relaxation_reaches_uniform_superposition() {
        // With the Hamiltonian off, every initial state relaxes to |s⟩⟨s|.
        // The slowest Lindblad mode decays at Γ/2, so convergence below 1e-8
        // needs Γ t ≈ 40.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for q in 1..=4 {
            let gamma = 0.5;
            let params = SearchParams::new(q, gamma, 0).unwrap();
            let mut rho = random_pure_density(q, &mut rng).unwrap();
            let dt = 0.1f64.min(0.05 / gamma);
            let steps = (40.0 / gamma / dt).ceil() as usize;
            let n = 1 << q;
            let mut k = [
                Array2::zeros((n, n)),
                Array2::zeros((n, n)),
                Array2::zeros((n, n)),
                Array2::zeros((n, n)),
            ];
            let mut tmp = Array2::zeros((n, n));
            for _ in 0..steps {
                master_rhs_fast(&rho, &params, false, &mut k[0]);
                tmp.assign(&rho);
                tmp.scaled_add(c(dt / 2.0, 0.0), &k[0]);
                master_rhs_fast(&tmp, &params, false, &mut k[1]);
                tmp.assign(&rho);
                tmp.scaled_add(c(dt / 2.0, 0.0), &k[1]);
                master_rhs_fast(&tmp, &params, false, &mut k[2]);
                tmp.assign(&rho);
                tmp.scaled_add(c(dt, 0.0), &k[2]);
                master_rhs_fast(&tmp, &params, false, &mut k[3]);
                let wgt = dt / 6.0;
                for i in 0..n {
                    for j in 0..n {
                        rho[(i, j)] += wgt
                            * (k[0][(i, j)]
                                + 2.0 * k[1][(i, j)]
                                + 2.0 * k[2][(i, j)]
                                + k[3][(i, j)]);
                    }
                }
            }
            let target = uniform_superposition_density(q);
            let dev = rho
                .iter()
                .zip(target.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            assert!(dev < 1e-8, "q = {q}: distance to |s⟩⟨s| is {dev:.2e}");
        }
    }

    #[test]
    fn grover_iterations_match_rotation_formula() {
        // Γ = 0, q = 4, three iterations: ρ_ww = sin²(7 arcsin(2^{-q/2}))
        let q = 4;
        let params = SearchParams::new(q, 0.0, 0).unwrap();
        let mut rho = uniform_superposition_density(q);
        for _ in 0..3 {
            rho = grover_iterate_with_decay(&rho, &params, 2.0).unwrap();
        }
        let theta = (0.25f64).asin();
        let expect = (7.0 * theta).sin().powi(2);
        assert_relative_eq!(rho[(0, 0)].re, expect, epsilon = 1e-10);
        assert_relative_eq!(expect, 0.96132, epsilon = 5e-6);
    }

    #[test]
    fn zero_decay_interval_is_pure_unitary_iteration() {
        let q = 3;
        let params = SearchParams::new(q, 0.8, 0).unwrap();
        let unitary_only = SearchParams::new(q, 0.0, 0).unwrap();
        let rho0 = uniform_superposition_density(q);
        let a = grover_iterate_with_decay(&rho0, &params, 0.0).unwrap();
        let b = grover_iterate_with_decay(&rho0, &unitary_only, 5.0).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() < 1e-14));
    }

    #[test]
    fn nullspace_steady_state_matches_long_time_evolution() {
        let q = 3;
        let params = SearchParams::new(q, 0.4, 0).unwrap();
        let direct = steady_state_full_nullspace(&params).unwrap();
        validate_density(&direct, 1e-9).unwrap();
        let rho0 = uniform_superposition_density(q);
        let dt = default_time_step(q, 0.4);
        let evolved = evolve_full_observed(&rho0, &params, 120.0, dt, |_, _| {}).unwrap();
        let dev = direct
            .iter()
            .zip(evolved.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(dev < 1e-7, "null-space vs evolved deviation {dev:.2e}");
        assert!(min_eigenvalue(&direct) > -1e-10);
    }

    #[test]
    fn oracle_caps_are_enforced() {
        assert!(build_hamiltonian(&SearchParams::new(9, 0.1, 0).unwrap()).is_err());
        assert!(build_collapse_ops(9).is_err());
        assert!(steady_state_full_nullspace(&SearchParams::new(5, 0.1, 0).unwrap()).is_err());
    }
}
