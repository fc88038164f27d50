//! Parallel Monte Carlo over conditional trajectories.
//!
//! Two averaging orders are tracked side by side: the mean of per-trajectory
//! metrics, `E[C(rho_c)]`, and the metrics of the averaged state,
//! `C(E[rho_c])`. They answer different questions (what a single monitored
//! run delivers per shot vs. what the unconditional state relaxes to) and
//! both are emitted with names that disambiguate.
//!
//! Trajectory `k` always consumes random stream `k`. Partial sums are
//! accumulated over fixed chunks of [`TRAJ_CHUNK`] consecutive streams and
//! merged in chunk order, so ensemble statistics are bit-identical for a
//! fixed seed at any worker count.

use std::ops::Range;

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{Generator, ModelRates};
use crate::qstate::{hermitian_eigenvalues, ComplexMatrix, DensityMatrix, Ket, QstateError};
use crate::sde::{
    clip_to_psd, run_trajectory_observed, IntegratorConfig, SdeError, TrajectoryPlan,
    TrajectoryRecord,
};

/// Streams per accumulation chunk. Chunks are the unit of work handed to the
/// thread pool; sums inside a chunk run in stream order and chunks merge in
/// index order, which pins the floating-point reduction order.
pub const TRAJ_CHUNK: usize = 32;

#[derive(Debug, Error)]
pub enum EnsembleError {
    /// More than 1% of the requested trajectories aborted.
    #[error("{failed}/{total} trajectories aborted; first failure on stream {stream}: {source}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        stream: u64,
        #[source]
        source: SdeError,
    },
    /// A metric of the averaged state could not be evaluated.
    #[error("mean-state metric failed at t = {t:.6}: {source}")]
    Metric {
        t: f64,
        #[source]
        source: QstateError,
    },
}

/// Ensemble statistics on the shared sample grid.
#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// `E[C(rho_c)](t)`: mean of per-trajectory concurrence.
    pub mean_concurrence: Vec<f64>,
    pub std_concurrence: Vec<f64>,
    /// Mean of per-trajectory fidelity to the plan's target.
    pub mean_fidelity: Vec<f64>,
    pub std_fidelity: Vec<f64>,
    /// Ensemble-averaged conditional state at each sample.
    pub mean_states: Vec<DensityMatrix>,
    /// `C(E[rho_c])(t)`: concurrence of the averaged state.
    pub concurrence_of_mean_state: Vec<f64>,
    pub fidelity_of_mean_state: Vec<f64>,
    pub purity_of_mean_state: Vec<f64>,
    /// Requested trajectory count (successes are `n_trajectories -
    /// failure_count`).
    pub n_trajectories: usize,
    /// First-death instants of the trajectories that registered one, in
    /// stream order.
    pub sudden_death_times: Vec<f64>,
    /// How many of those deaths arrived as an abrupt single-stride drop.
    pub abrupt_death_count: usize,
    pub failure_count: usize,
}

impl EnsembleStats {
    /// Number of trajectories that completed and entered the statistics.
    pub fn n_ok(&self) -> usize {
        self.n_trajectories - self.failure_count
    }
}

// Commutative partial sums for one chunk of streams.
struct Accum {
    n_ok: usize,
    times: Option<Vec<f64>>,
    sum_c: Vec<f64>,
    sum_c2: Vec<f64>,
    sum_f: Vec<f64>,
    sum_f2: Vec<f64>,
    sum_state: Vec<ComplexMatrix>,
    death_times: Vec<f64>,
    abrupt: usize,
    failures: Vec<(u64, SdeError)>,
}

impl Accum {
    fn new(n_samples: usize) -> Self {
        Accum {
            n_ok: 0,
            times: None,
            sum_c: vec![0.0; n_samples],
            sum_c2: vec![0.0; n_samples],
            sum_f: vec![0.0; n_samples],
            sum_f2: vec![0.0; n_samples],
            sum_state: vec![ComplexMatrix::zeros(4); n_samples],
            death_times: Vec::new(),
            abrupt: 0,
            failures: Vec::new(),
        }
    }

    fn add_record(&mut self, rec: &TrajectoryRecord, states: &[ComplexMatrix]) {
        assert_eq!(rec.times.len(), self.sum_c.len(), "sample grid mismatch");
        if self.times.is_none() {
            self.times = Some(rec.times.clone());
        }
        self.n_ok += 1;
        for i in 0..states.len() {
            let c = rec.concurrence[i];
            let f = rec.fidelity[i];
            self.sum_c[i] += c;
            self.sum_c2[i] += c * c;
            self.sum_f[i] += f;
            self.sum_f2[i] += f * f;
            self.sum_state[i] += states[i];
        }
        if let Some(t) = rec.sudden_death_time {
            self.death_times.push(t);
            if rec.abrupt_death {
                self.abrupt += 1;
            }
        }
    }

    fn merge(&mut self, other: Accum) {
        if self.times.is_none() {
            self.times = other.times;
        }
        self.n_ok += other.n_ok;
        for i in 0..self.sum_c.len() {
            self.sum_c[i] += other.sum_c[i];
            self.sum_c2[i] += other.sum_c2[i];
            self.sum_f[i] += other.sum_f[i];
            self.sum_f2[i] += other.sum_f2[i];
            self.sum_state[i] += other.sum_state[i];
        }
        self.death_times.extend(other.death_times);
        self.abrupt += other.abrupt;
        self.failures.extend(other.failures);
    }
}

fn expected_samples(cfg: &IntegratorConfig) -> usize {
    let n = cfg.n_steps();
    let stride = cfg.record_stride.max(1);
    1 + n / stride + usize::from(n % stride != 0)
}

fn run_chunk(plan: &TrajectoryPlan, seed: u64, streams: Range<u64>, n_samples: usize) -> Accum {
    let mut acc = Accum::new(n_samples);
    let mut scratch: Vec<ComplexMatrix> = Vec::with_capacity(n_samples);
    for stream in streams {
        scratch.clear();
        let result = run_trajectory_observed(plan, seed, stream, |idx, _t, state| {
            debug_assert_eq!(idx, scratch.len());
            scratch.push(*state.matrix());
        });
        match result {
            Ok(rec) => acc.add_record(&rec, &scratch),
            Err(e) => acc.failures.push((stream, e)),
        }
    }
    acc
}

/// Run `n_traj` trajectories on streams `0..n_traj` and reduce them to
/// [`EnsembleStats`]. Fails if more than 1% of the trajectories abort;
/// otherwise aborted trajectories are excluded from the statistics and
/// counted in `failure_count`.
pub fn run_ensemble(
    plan: &TrajectoryPlan,
    n_traj: usize,
    seed: u64,
) -> Result<EnsembleStats, EnsembleError> {
    assert!(n_traj >= 1, "n_traj must be at least 1");
    let n_samples = expected_samples(&plan.integrator);
    let n_chunks = n_traj.div_ceil(TRAJ_CHUNK);

    let partials: Vec<Accum> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = (c * TRAJ_CHUNK) as u64;
            let hi = ((c + 1) * TRAJ_CHUNK).min(n_traj) as u64;
            run_chunk(plan, seed, lo..hi, n_samples)
        })
        .collect();

    let mut total = Accum::new(n_samples);
    for p in partials {
        total.merge(p);
    }
    finalize(total, n_traj, &plan.target)
}

fn finalize(acc: Accum, n_traj: usize, target: &Ket) -> Result<EnsembleStats, EnsembleError> {
    let failed = acc.failures.len();
    if failed as f64 > 0.01 * n_traj as f64 {
        let (stream, source) = acc.failures.into_iter().next().expect("failed > 0");
        return Err(EnsembleError::TooManyFailures {
            failed,
            total: n_traj,
            stream,
            source,
        });
    }
    // failures capped at 1% of n_traj >= 1, so at least one succeeded
    let n_ok = acc.n_ok;
    let inv = 1.0 / n_ok as f64;
    let times = acc.times.expect("at least one successful trajectory");
    let n_samples = times.len();

    let mut stats = EnsembleStats {
        times,
        mean_concurrence: Vec::with_capacity(n_samples),
        std_concurrence: Vec::with_capacity(n_samples),
        mean_fidelity: Vec::with_capacity(n_samples),
        std_fidelity: Vec::with_capacity(n_samples),
        mean_states: Vec::with_capacity(n_samples),
        concurrence_of_mean_state: Vec::with_capacity(n_samples),
        fidelity_of_mean_state: Vec::with_capacity(n_samples),
        purity_of_mean_state: Vec::with_capacity(n_samples),
        n_trajectories: n_traj,
        sudden_death_times: acc.death_times,
        abrupt_death_count: acc.abrupt,
        failure_count: failed,
    };

    for i in 0..n_samples {
        let mc = acc.sum_c[i] * inv;
        let mf = acc.sum_f[i] * inv;
        let vc = (acc.sum_c2[i] * inv - mc * mc).max(0.0);
        let vf = (acc.sum_f2[i] * inv - mf * mf).max(0.0);
        let mean_state = DensityMatrix::from_matrix_unchecked(acc.sum_state[i].scale(inv));
        let t = stats.times[i];
        let cms = mean_state
            .concurrence()
            .map_err(|source| EnsembleError::Metric { t, source })?;
        // concurrence is convex, so averaging states can only lose it
        debug_assert!(
            cms <= mc + 3.0 * (vc.sqrt() * inv.sqrt()) + 1e-6,
            "C(mean state) = {cms} exceeds mean C = {mc} at t = {t}"
        );
        stats.mean_concurrence.push(mc);
        stats.std_concurrence.push(vc.sqrt());
        stats.mean_fidelity.push(mf);
        stats.std_fidelity.push(vf.sqrt());
        stats.concurrence_of_mean_state.push(cms);
        stats.fidelity_of_mean_state.push(mean_state.fidelity_to(target));
        stats.purity_of_mean_state.push(mean_state.purity());
        stats.mean_states.push(mean_state);
    }
    Ok(stats)
}

/// First-death bookkeeping over a set of trajectory records.
#[derive(Clone, Debug)]
pub struct SuddenDeathSummary {
    pub n_records: usize,
    /// First-death instants, one per record that registered a death, in
    /// input order.
    pub death_times: Vec<f64>,
    /// Fraction of records with a registered death.
    pub dead_fraction: f64,
    /// How many deaths were abrupt single-stride drops.
    pub abrupt_count: usize,
}

pub fn sudden_death_stats(records: &[TrajectoryRecord]) -> SuddenDeathSummary {
    let mut death_times = Vec::new();
    let mut abrupt = 0;
    for r in records {
        if let Some(t) = r.sudden_death_time {
            death_times.push(t);
            if r.abrupt_death {
                abrupt += 1;
            }
        }
    }
    let n = records.len();
    let dead_fraction = if n == 0 {
        0.0
    } else {
        death_times.len() as f64 / n as f64
    };
    SuddenDeathSummary {
        n_records: n,
        death_times,
        dead_fraction,
        abrupt_count: abrupt,
    }
}

impl SuddenDeathSummary {
    /// Death-time counts in `n_bins` equal-width bins over `[0, t_end]`;
    /// times past `t_end` land in the last bin.
    pub fn histogram(&self, n_bins: usize, t_end: f64) -> Vec<usize> {
        assert!(n_bins >= 1 && t_end > 0.0);
        let mut bins = vec![0usize; n_bins];
        for &t in &self.death_times {
            let idx = ((t / t_end * n_bins as f64) as usize).min(n_bins - 1);
            bins[idx] += 1;
        }
        bins
    }
}

/// Deterministic state series from [`lindblad_solve`].
#[derive(Clone, Debug)]
pub struct LindbladSolution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl LindbladSolution {
    /// Largest entrywise distance to a series of mean states on the same
    /// sample grid.
    pub fn max_norm_distance(&self, states: &[DensityMatrix]) -> f64 {
        assert_eq!(self.states.len(), states.len(), "sample grid mismatch");
        self.states
            .iter()
            .zip(states)
            .map(|(a, b)| a.matrix().max_abs_diff(b.matrix()))
            .fold(0.0, f64::max)
    }
}

/// Unconditional (ensemble-averaged) solve: the same Euler stepper with the
/// noise increment identically zero, so no measurement backaction and no
/// feedback enter. Serves as the martingale oracle and for analytic decay
/// checks.
pub fn lindblad_solve(
    rates: &ModelRates,
    cfg: &IntegratorConfig,
    rho0: &DensityMatrix,
) -> Result<LindbladSolution, SdeError> {
    let gen = Generator::new(rates);
    let dt = cfg.dt;
    let n_steps = cfg.n_steps();
    let stride = cfg.record_stride.max(1);
    let n_samples = expected_samples(cfg);

    let mut sol = LindbladSolution {
        times: Vec::with_capacity(n_samples),
        states: Vec::with_capacity(n_samples),
    };
    let mut rho = *rho0.matrix();
    sol.times.push(0.0);
    sol.states.push(DensityMatrix::from_matrix_unchecked(rho));

    for k in 1..=n_steps {
        let t = k as f64 * dt;
        let drift = gen.qte_drift(&rho);
        for i in 0..4 {
            for j in 0..4 {
                let v = rho.at(i, j) + drift.at(i, j) * dt;
                rho.set(i, j, v);
            }
        }
        if cfg.hermitize {
            rho = rho.hermitized();
        }
        if !rho.is_finite() {
            return Err(SdeError::NonFinite { t });
        }
        if cfg.renormalize {
            let tr = rho.trace().re;
            if !(0.1..=10.0).contains(&tr) {
                return Err(SdeError::NonFinite { t });
            }
            rho = rho.scale(1.0 / tr);
        }
        let min_eig =
            hermitian_eigenvalues(&rho).map_err(|source| SdeError::Metric { t, source })?[0];
        if min_eig < -cfg.positivity_tol {
            return Err(SdeError::PositivityLost { t, min_eig });
        }
        if min_eig < 0.0 {
            rho = clip_to_psd(&rho, t)?;
        }
        if k % stride == 0 || k == n_steps {
            sol.times.push(t);
            sol.states.push(DensityMatrix::from_matrix_unchecked(rho));
        }
    }
    Ok(sol)
}
