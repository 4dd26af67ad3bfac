//! Sparse complex linear-system machinery for the steady-state solve.
//!
//! Wraps faer's sparse LU behind row equilibration, iterative refinement and
//! a Hager-style 1-norm condition estimate, with a sparse-QR least-squares
//! fallback for systems the direct factorization cannot handle.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) type Trip = Triplet<usize, usize, Complex64>;

#[derive(Debug)]
pub(crate) struct SolveReport {
    pub x: Vec<Complex64>,
    pub condition_estimate: f64,
    pub used_least_squares: bool,
}

fn to_mat(b: &[Complex64]) -> Mat<Complex64> {
    Mat::from_fn(b.len(), 1, |i, _| b[i])
}

fn sparse_matvec(a: &SparseColMat<usize, Complex64>, x: &Mat<Complex64>) -> Mat<Complex64> {
    a.as_ref() * x.as_ref()
}

/// Upper estimate of the matrix 1-norm from raw triplets (duplicates make it
/// an overestimate, which is fine for conditioning diagnostics).
fn one_norm_from_triplets(cols: usize, triplets: &[Trip]) -> f64 {
    let mut col_sums = vec![0.0f64; cols];
    for t in triplets {
        col_sums[t.col] += t.val.norm();
    }
    col_sums.into_iter().fold(0.0, f64::max)
}

/// Hager's power method for ||A^{-1}||_1 using the factorization; conjugate
/// solves go through A^{-H} v = conj(A^{-T} conj(v)).
fn inverse_one_norm_estimate(
    lu: &faer::sparse::linalg::solvers::Lu<usize, Complex64>,
    m: usize,
) -> f64 {
    let mut x = Mat::<Complex64>::from_fn(m, 1, |_, _| Complex64::new(1.0 / m as f64, 0.0));
    let mut best = 0.0f64;
    for _ in 0..4 {
        let y = lu.solve(&x);
        let norm1: f64 = (0..m).map(|i| y[(i, 0)].norm()).sum();
        best = best.max(norm1);
        // xi = sign(y)
        let xi = Mat::<Complex64>::from_fn(m, 1, |i, _| {
            let v = y[(i, 0)];
            if v.norm() == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                v / v.norm()
            }
        });
        let xi_conj = Mat::<Complex64>::from_fn(m, 1, |i, _| xi[(i, 0)].conj());
        let zt = lu.solve_transpose(&xi_conj);
        let z = Mat::<Complex64>::from_fn(m, 1, |i, _| zt[(i, 0)].conj());
        let (mut j_best, mut z_max) = (0usize, 0.0f64);
        let mut z_dot_x = Complex64::default();
        for i in 0..m {
            let zn = z[(i, 0)].norm();
            if zn > z_max {
                z_max = zn;
                j_best = i;
            }
            z_dot_x += z[(i, 0)].conj() * x[(i, 0)];
        }
        if z_max <= z_dot_x.re {
            break;
        }
        x = Mat::<Complex64>::from_fn(m, 1, |i, _| {
            Complex64::new(if i == j_best { 1.0 } else { 0.0 }, 0.0)
        });
    }
    best
}

/// Solve the square system given by `triplets` (duplicates sum) against `b`.
///
/// Rows are equilibrated to unit 1-norm before factorization; the solution
/// is polished with two steps of iterative refinement. Returns the solution,
/// a 1-norm condition estimate of the equilibrated matrix, and whether the
/// least-squares path was taken (never, here).
pub(crate) fn solve_square(
    m: usize,
    triplets: &[Trip],
    b: &[Complex64],
) -> Result<SolveReport> {
    // row scales from the unequilibrated triplets
    let mut row_sums = vec![0.0f64; m];
    for t in triplets {
        row_sums[t.row] += t.val.norm();
    }
    if let Some(r) = row_sums.iter().position(|&s| s == 0.0 || !s.is_finite()) {
        return Err(Error::SolverFailure {
            reason: format!("structurally singular: row {r} is empty"),
            condition: f64::INFINITY,
        });
    }
    let scaled: Vec<Trip> = triplets
        .iter()
        .map(|t| Triplet::new(t.row, t.col, t.val / row_sums[t.row]))
        .collect();
    let a = SparseColMat::<usize, Complex64>::try_new_from_triplets(m, m, &scaled)
        .map_err(|e| Error::SolverFailure {
            reason: format!("matrix assembly failed: {e:?}"),
            condition: f64::NAN,
        })?;
    let b_scaled = Mat::<Complex64>::from_fn(m, 1, |i, _| b[i] / row_sums[i]);

    let lu = a.sp_lu().map_err(|e| Error::SolverFailure {
        reason: format!("sparse LU factorization failed: {e:?}"),
        condition: f64::NAN,
    })?;
    let mut x = lu.solve(&b_scaled);
    // iterative refinement: two passes recover residual-level accuracy even
    // for badly scaled trace rows
    for _ in 0..2 {
        let r = &b_scaled - sparse_matvec(&a, &x);
        let dx = lu.solve(&r);
        x += dx;
    }
    let sol: Vec<Complex64> = (0..m).map(|i| x[(i, 0)]).collect();
    if sol.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SolverFailure {
            reason: "non-finite solution from LU".into(),
            condition: f64::INFINITY,
        });
    }
    let condition_estimate =
        one_norm_from_triplets(m, &scaled) * inverse_one_norm_estimate(&lu, m);
    Ok(SolveReport {
        x: sol,
        condition_estimate,
        used_least_squares: false,
    })
}

/// Minimum-residual solve of an overdetermined system via sparse QR.
pub(crate) fn solve_least_squares(
    rows: usize,
    cols: usize,
    triplets: &[Trip],
    b: &[Complex64],
) -> Result<SolveReport> {
    let a = SparseColMat::<usize, Complex64>::try_new_from_triplets(rows, cols, triplets)
        .map_err(|e| Error::SolverFailure {
            reason: format!("matrix assembly failed: {e:?}"),
            condition: f64::NAN,
        })?;
    let qr = a.sp_qr().map_err(|e| Error::SolverFailure {
        reason: format!("sparse QR factorization failed: {e:?}"),
        condition: f64::NAN,
    })?;
    let x = qr.solve(&to_mat(b));
    let sol: Vec<Complex64> = (0..cols).map(|i| x[(i, 0)]).collect();
    if sol.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SolverFailure {
            reason: "non-finite solution from QR least squares".into(),
            condition: f64::INFINITY,
        });
    }
    Ok(SolveReport {
        x: sol,
        condition_estimate: f64::NAN,
        used_least_squares: true,
    })
}
