//! Simulator and analysis toolkit for single-item quantum search with
//! spontaneously decaying qubits.
//!
//! Each qubit decays toward H|0⟩, so the register as a whole relaxes toward
//! the uniform superposition |s⟩ while the search Hamiltonian
//! H_w = |w⟩⟨w| + |s⟩⟨s| keeps rotating amplitude into the marked state.
//! Instead of stopping a coherent oscillation at exactly the right moment,
//! the damped system settles into a steady state with a strongly enhanced
//! solution population, which repeated readout then amplifies to an
//! error-free answer.
//!
//! Two engines cover the two regimes:
//!
//! - [`full`] — dense 2^q × 2^q reference implementation (q ≤ 8): exact
//!   Hamiltonian/collapse operators, RK4 integration, the discrete
//!   search-iteration variant, and projection onto the reduced
//!   representation.
//! - [`reduced`] — the bit-swap-symmetric representation
//!   ρ_xy = σ_{n00,n01,n10,n11} with only (q+1)(q+2)(q+3)/6 classes, good for
//!   q ≤ 36 on a desktop: matrix-free σ̇, sparse Liouvillian assembly, and a
//!   direct steady-state solve with the unit-trace condition.
//!
//! [`analysis`] derives the observables (solution population, amplification
//! factor, Hamming-distance distribution, two-level projection, majority-vote
//! repetition counts) and [`sweep`] drives parameter scans with CSV/JSON
//! output. [`verify`] cross-checks the two engines against each other on
//! randomized inputs.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```text
//! cargo run --release --example damped_oscillation     # ρ_ww(t), full vs reduced
//! cargo run --release --example gamma_sweep            # steady ρ_00 vs scaled Γ
//! cargo run --release --example amplification_scaling  # 2^q ρ_00 and the 1/q fit
//! cargo run --release --example hamming_distribution   # p(d) and the bit error rate
//! cargo run --release --example majority_vote          # repetition calculus
//! cargo run --release --example oracle_crosscheck      # reduced vs full RHS
//! cargo run --release --example grover_iterations      # discrete iterations + decay
//! ```
//!
//! The `decay-search` binary exposes the same runs as subcommands
//! (`steady`, `sweep-gamma`, `sweep-q`, `evolve`, `distribution`,
//! `repetitions`, `verify`); see the README.
//!
//! # Quick start
//!
//! ```
//! use decay_search::params::SearchParams;
//! use decay_search::reduced::steady_state;
//! use decay_search::analysis::{amplification, population_of_solution};
//!
//! // q = 6 qubits at scaled decay rate 2^{q/2} Γ = 0.24 (Γ = 0.03)
//! let params = SearchParams::from_scaled_gamma(6, 0.24, 0).unwrap();
//! let solution = steady_state(&params).unwrap();
//! let rho00 = population_of_solution(&solution.state).unwrap();
//! assert!(rho00 > 10.0 * 2f64.powi(-6)); // far above the randomized value
//! assert!(amplification(&solution.state).unwrap() > 10.0);
//! ```

pub mod analysis;
pub mod error;
pub mod full;
pub mod index;
pub mod params;
pub mod reduced;
mod solve;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use params::SearchParams;
