//! Parameter sweeps and table emission.
//!
//! Every figure-style result is emitted as a machine-readable table (CSV with
//! a single header row, or a JSON array of objects) so any external plotter
//! can reproduce it. Numeric fields are printed with 17 significant digits
//! and parse back bit-exactly; sweeps run in a worker pool but rows are
//! written in configuration order, so identical configurations give
//! byte-identical output (wall-clock columns aside).

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    amplification, hamming_distribution, majority_bound, majority_exact, population_of_solution,
    required_repetitions, two_level_projection, VoteMode,
};
use crate::error::{Error, Result};
use crate::full::{evolve_full_observed, grover_iterate_with_decay, uniform_superposition_density};
use crate::index::binomial_f64;
use crate::params::{default_time_step, gamma_from_scaled, SearchParams};
use crate::reduced::{evolve_reduced_observed, steady_state, ReducedState};

/// Default scaled-Γ grid of the regime sweep: log-spaced, 26 points per curve.
pub const DEFAULT_GRID_FROM: f64 = 1e-3;
pub const DEFAULT_GRID_TO: f64 = 1e2;
pub const DEFAULT_GRID_POINTS: usize = 26;

/// A decay rate given either directly or as 2^{q/2} Γ.
#[derive(Clone, Copy, Debug)]
pub enum GammaInput {
    Absolute(f64),
    Scaled(f64),
}

impl GammaInput {
    pub fn absolute(&self, q: usize) -> f64 {
        match *self {
            GammaInput::Absolute(g) => g,
            GammaInput::Scaled(s) => gamma_from_scaled(q, s),
        }
    }
}

/// One steady-state result: every observable the analysis layer derives,
/// plus solver diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResultRow {
    pub q: usize,
    pub gamma: f64,
    pub scaled_gamma: f64,
    pub rho00: f64,
    pub amplification: f64,
    pub mean_d: f64,
    pub bit_error_rate: f64,
    pub pop_w_projected: f64,
    pub pop_s_projected: f64,
    pub condition_estimate: f64,
    pub wall_time_seconds: f64,
}

/// Per-row failure of a sweep; the run continues.
#[derive(Clone, Debug, Serialize)]
pub struct SweepFailure {
    pub q: usize,
    pub scaled_gamma: f64,
    pub message: String,
}

/// Sweep output: rows in configuration order plus any per-point failures.
#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<SweepFailure>,
}

impl SweepOutcome {
    pub fn all_succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Solve one steady state and collect all observables.
pub fn steady_row(q: usize, gamma: GammaInput) -> Result<ResultRow> {
    let start = Instant::now();
    let params = SearchParams::new(q, gamma.absolute(q), 0)?;
    let solution = steady_state(&params)?;
    let state = &solution.state;
    let dist = hamming_distribution(state)?;
    let pops = two_level_projection(state)?;
    Ok(ResultRow {
        q,
        gamma: params.gamma(),
        scaled_gamma: params.scaled_gamma(),
        rho00: population_of_solution(state)?,
        amplification: amplification(state)?,
        mean_d: dist.mean_d,
        bit_error_rate: dist.bit_error_rate,
        pop_w_projected: pops.pop_w,
        pop_s_projected: pops.pop_s,
        condition_estimate: solution.condition_estimate,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Log-spaced grid over [from, to], inclusive of both ends.
pub fn log_grid(from: f64, to: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::InvalidConfig("grid needs points >= 1".into()));
    }
    if !(from > 0.0) || !(to > 0.0) || from >= to {
        return Err(Error::InvalidConfig(format!(
            "log grid needs 0 < from < to, got [{from}, {to}]"
        )));
    }
    if points == 1 {
        return Ok(vec![from]);
    }
    let (lf, lt) = (from.ln(), to.ln());
    Ok((0..points)
        .map(|i| (lf + (lt - lf) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

fn run_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    Ok(pool.install(work))
}

fn collect_outcome(results: Vec<(usize, f64, Result<ResultRow>)>) -> SweepOutcome {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (q, scaled, res) in results {
        match res {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(SweepFailure {
                q,
                scaled_gamma: scaled,
                message: e.to_string(),
            }),
        }
    }
    SweepOutcome { rows, failures }
}

/// Steady-state curves ρ_00(Γ) for several register sizes over a scaled-Γ
/// grid. Points run in a worker pool; rows come back in grid order.
pub fn sweep_gamma(q_list: &[usize], grid_scaled: &[f64], jobs: Option<usize>) -> Result<SweepOutcome> {
    use rayon::prelude::*;
    let points: Vec<(usize, f64)> = q_list
        .iter()
        .flat_map(|&q| grid_scaled.iter().map(move |&s| (q, s)))
        .collect();
    let results = run_pool(jobs, || {
        points
            .par_iter()
            .map(|&(q, s)| (q, s, steady_row(q, GammaInput::Scaled(s))))
            .collect::<Vec<_>>()
    })?;
    Ok(collect_outcome(results))
}

/// Weak-decay scaling sweep: one steady state per register size at fixed
/// scaled Γ.
pub fn sweep_q(q_list: &[usize], scaled: f64, jobs: Option<usize>) -> Result<SweepOutcome> {
    use rayon::prelude::*;
    let results = run_pool(jobs, || {
        q_list
            .par_iter()
            .map(|&q| (q, scaled, steady_row(q, GammaInput::Scaled(scaled))))
            .collect::<Vec<_>>()
    })?;
    Ok(collect_outcome(results))
}

/// One Hamming-distance bin of a steady-state distribution.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DistributionRow {
    pub q: usize,
    pub gamma: f64,
    pub scaled_gamma: f64,
    pub d: usize,
    pub multiplicity: f64,
    pub sigma_diagonal: f64,
    pub p_d: f64,
}

/// Steady-state population distribution over the Hamming distance, one row
/// per (q, d).
pub fn distribution_rows(q_list: &[usize], gamma: GammaInput) -> Result<Vec<DistributionRow>> {
    let mut rows = Vec::new();
    for &q in q_list {
        let params = SearchParams::new(q, gamma.absolute(q), 0)?;
        let solution = steady_state(&params)?;
        let dist = hamming_distribution(&solution.state)?;
        for d in 0..=q {
            rows.push(DistributionRow {
                q,
                gamma: params.gamma(),
                scaled_gamma: params.scaled_gamma(),
                d,
                multiplicity: binomial_f64(q, d),
                sigma_diagonal: solution.state.diagonal(d).re,
                p_d: dist.p[d],
            });
        }
    }
    Ok(rows)
}

/// Engine selection for time-evolution tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvolveEngine {
    Full,
    Reduced,
    Both,
    /// Discrete search iterations alternating with decay intervals.
    Iterate,
}

/// One sample of a time-evolution table.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EvolveRow {
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_ww: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_ww_full: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_ww_reduced: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation: Option<f64>,
}

/// Time-evolution table plus the cross-engine deviation when both ran.
#[derive(Debug)]
pub struct EvolveTable {
    pub engine: EvolveEngine,
    pub rows: Vec<EvolveRow>,
    pub max_deviation: Option<f64>,
}

/// Evolve ρ_ww(t) from |s⟩⟨s| with the chosen engine. `tau` is the decay
/// interval of the iterate engine (ignored elsewhere).
pub fn evolve_table(
    q: usize,
    gamma: GammaInput,
    t_max: f64,
    dt: Option<f64>,
    engine: EvolveEngine,
    tau: f64,
) -> Result<EvolveTable> {
    let params = SearchParams::new(q, gamma.absolute(q), 0)?;
    let dt = dt.unwrap_or_else(|| default_time_step(q, params.gamma()));
    let mut rows = Vec::new();
    match engine {
        EvolveEngine::Full => {
            let rho0 = uniform_superposition_density(q);
            evolve_full_observed(&rho0, &params, t_max, dt, |t, rho| {
                rows.push(EvolveRow {
                    t,
                    iteration: None,
                    rho_ww: Some(rho[(0, 0)].re),
                    rho_ww_full: None,
                    rho_ww_reduced: None,
                    deviation: None,
                });
            })?;
            Ok(EvolveTable {
                engine,
                rows,
                max_deviation: None,
            })
        }
        EvolveEngine::Reduced => {
            let s0 = ReducedState::uniform(q)?;
            evolve_reduced_observed(&s0, &params, t_max, dt, |t, s| {
                rows.push(EvolveRow {
                    t,
                    iteration: None,
                    rho_ww: Some(s.diagonal(0).re),
                    rho_ww_full: None,
                    rho_ww_reduced: None,
                    deviation: None,
                });
            })?;
            Ok(EvolveTable {
                engine,
                rows,
                max_deviation: None,
            })
        }
        EvolveEngine::Both => {
            let mut full = Vec::new();
            let rho0 = uniform_superposition_density(q);
            evolve_full_observed(&rho0, &params, t_max, dt, |t, rho| {
                full.push((t, rho[(0, 0)].re));
            })?;
            let mut reduced = Vec::new();
            let s0 = ReducedState::uniform(q)?;
            evolve_reduced_observed(&s0, &params, t_max, dt, |_, s| {
                reduced.push(s.diagonal(0).re);
            })?;
            let mut max_dev = 0.0f64;
            for ((t, f), r) in full.into_iter().zip(reduced) {
                let dev = (f - r).abs();
                max_dev = max_dev.max(dev);
                rows.push(EvolveRow {
                    t,
                    iteration: None,
                    rho_ww: None,
                    rho_ww_full: Some(f),
                    rho_ww_reduced: Some(r),
                    deviation: Some(dev),
                });
            }
            Ok(EvolveTable {
                engine,
                rows,
                max_deviation: Some(max_dev),
            })
        }
        EvolveEngine::Iterate => {
            if !(tau > 0.0) {
                return Err(Error::InvalidParameter(
                    "iterate engine needs a positive decay interval τ".into(),
                ));
            }
            let iterations = (t_max / tau).round().max(1.0) as usize;
            let mut rho = uniform_superposition_density(q);
            rows.push(EvolveRow {
                t: 0.0,
                iteration: Some(0),
                rho_ww: Some(rho[(0, 0)].re),
                rho_ww_full: None,
                rho_ww_reduced: None,
                deviation: None,
            });
            for k in 1..=iterations {
                rho = grover_iterate_with_decay(&rho, &params, tau)?;
                rows.push(EvolveRow {
                    t: k as f64 * tau,
                    iteration: Some(k),
                    rho_ww: Some(rho[(0, 0)].re),
                    rho_ww_full: None,
                    rho_ww_reduced: None,
                    deviation: None,
                });
            }
            Ok(EvolveTable {
                engine,
                rows,
                max_deviation: None,
            })
        }
    }
}

/// Audit table of the repetition calculus: (R, ξ_R, q ξ_R) up to the minimal
/// repetition count.
#[derive(Debug, Serialize)]
pub struct RepetitionsReport {
    pub q: usize,
    pub xi: f64,
    pub epsilon: f64,
    pub mode: String,
    pub minimal_r: usize,
    pub rows: Vec<RepetitionRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RepetitionRow {
    pub r: usize,
    pub xi_r: f64,
    pub q_xi_r: f64,
}

pub fn repetitions_report(
    q: usize,
    xi: f64,
    epsilon: f64,
    mode: VoteMode,
) -> Result<RepetitionsReport> {
    let minimal_r = required_repetitions(q, xi, epsilon, mode)?;
    let mut rows = Vec::new();
    let mut r = 1usize;
    while r <= minimal_r {
        let xi_r = match mode {
            VoteMode::Bound => majority_bound(xi, r)?,
            VoteMode::Exact => majority_exact(xi, r)?,
        };
        rows.push(RepetitionRow {
            r,
            xi_r,
            q_xi_r: q as f64 * xi_r,
        });
        r += 2;
    }
    Ok(RepetitionsReport {
        q,
        xi,
        epsilon,
        mode: match mode {
            VoteMode::Bound => "bound".into(),
            VoteMode::Exact => "exact".into(),
        },
        minimal_r,
        rows,
    })
}

/// 17-significant-digit scientific notation; parses back bit-exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rows that know how to render themselves as CSV.
pub trait CsvRow {
    fn header() -> &'static str;
    fn fields(&self) -> Vec<String>;
}

impl CsvRow for ResultRow {
    fn header() -> &'static str {
        "q,gamma,scaled_gamma,rho00,amplification,mean_d,bit_error_rate,\
         pop_w_projected,pop_s_projected,condition_estimate,wall_time_seconds"
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.q.to_string(),
            fmt_f64(self.gamma),
            fmt_f64(self.scaled_gamma),
            fmt_f64(self.rho00),
            fmt_f64(self.amplification),
            fmt_f64(self.mean_d),
            fmt_f64(self.bit_error_rate),
            fmt_f64(self.pop_w_projected),
            fmt_f64(self.pop_s_projected),
            fmt_f64(self.condition_estimate),
            fmt_f64(self.wall_time_seconds),
        ]
    }
}

impl CsvRow for DistributionRow {
    fn header() -> &'static str {
        "q,gamma,scaled_gamma,d,multiplicity,sigma_diagonal,p_d"
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.q.to_string(),
            fmt_f64(self.gamma),
            fmt_f64(self.scaled_gamma),
            self.d.to_string(),
            fmt_f64(self.multiplicity),
            fmt_f64(self.sigma_diagonal),
            fmt_f64(self.p_d),
        ]
    }
}

impl CsvRow for RepetitionRow {
    fn header() -> &'static str {
        "r,xi_r,q_xi_r"
    }

    fn fields(&self) -> Vec<String> {
        vec![self.r.to_string(), fmt_f64(self.xi_r), fmt_f64(self.q_xi_r)]
    }
}

/// Evolve rows carry engine-dependent columns, so they render through a
/// dedicated writer rather than [`CsvRow`].
pub fn write_evolve_csv<W: Write>(mut w: W, table: &EvolveTable) -> Result<()> {
    match table.engine {
        EvolveEngine::Full | EvolveEngine::Reduced => {
            writeln!(w, "t,rho_ww")?;
            for row in &table.rows {
                writeln!(w, "{},{}", fmt_f64(row.t), fmt_f64(row.rho_ww.unwrap()))?;
            }
        }
        EvolveEngine::Both => {
            writeln!(w, "t,rho_ww_full,rho_ww_reduced,deviation")?;
            for row in &table.rows {
                writeln!(
                    w,
                    "{},{},{},{}",
                    fmt_f64(row.t),
                    fmt_f64(row.rho_ww_full.unwrap()),
                    fmt_f64(row.rho_ww_reduced.unwrap()),
                    fmt_f64(row.deviation.unwrap()),
                )?;
            }
        }
        EvolveEngine::Iterate => {
            writeln!(w, "iteration,t,rho_ww")?;
            for row in &table.rows {
                writeln!(
                    w,
                    "{},{},{}",
                    row.iteration.unwrap(),
                    fmt_f64(row.t),
                    fmt_f64(row.rho_ww.unwrap()),
                )?;
            }
        }
    }
    Ok(())
}

/// Emit rows as CSV with a single header line.
pub fn write_csv<R: CsvRow, W: Write>(mut w: W, rows: &[R]) -> Result<()> {
    writeln!(w, "{}", R::header())?;
    for row in rows {
        writeln!(w, "{}", row.fields().join(","))?;
    }
    Ok(())
}

/// Emit rows as a JSON array of objects.
pub fn write_json<T: Serialize, W: Write>(w: W, rows: &T) -> Result<()> {
    serde_json::to_writer_pretty(w, rows).map_err(|e| Error::Parse(e.to_string()))
}

/// Parse a ResultRow CSV emitted by [`write_csv`]; numeric fields round-trip
/// bit-exactly.
pub fn parse_result_rows_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty table".into()))?;
    if header != ResultRow::header() {
        return Err(Error::Parse(format!("unexpected header: {header}")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 11 {
            return Err(Error::Parse(format!(
                "line {}: expected 11 fields, got {}",
                lineno + 2,
                parts.len()
            )));
        }
        let f = |i: usize| -> Result<f64> {
            parts[i]
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
        };
        rows.push(ResultRow {
            q: parts[0]
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?,
            gamma: f(1)?,
            scaled_gamma: f(2)?,
            rho00: f(3)?,
            amplification: f(4)?,
            mean_d: f(5)?,
            bit_error_rate: f(6)?,
            pop_w_projected: f(7)?,
            pop_s_projected: f(8)?,
            condition_estimate: f(9)?,
            wall_time_seconds: f(10)?,
        });
    }
    Ok(rows)
}

/// Flat key-value configuration file: one `key = value` per line, `#` for
/// comments. Command-line flags take precedence over file values.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| Error::InvalidConfig(format!("{key}: {e}")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|e| Error::InvalidConfig(format!("{key}: {e}")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|e| Error::InvalidConfig(format!("{key}: {e}")))
            })
            .transpose()
    }

    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|e| Error::InvalidConfig(format!("{key}: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()
    }
}

/// Average bit error rate over the weak-decay register set (small q excluded
/// because their d = 0 peak biases ξ downward).
pub fn average_weak_decay_xi(rows: &[ResultRow]) -> Option<f64> {
    let xs: Vec<f64> = rows
        .iter()
        .filter(|r| crate::analysis::WEAK_DECAY_XI_Q_SET.contains(&r.q))
        .map(|r| r.bit_error_rate)
        .collect();
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}
