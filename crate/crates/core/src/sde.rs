//! Stochastic integration of single conditional trajectories.
//!
//! Each step of the Euler-Maruyama loop, in order:
//!
//! 1. evaluate `<Jz>` on the current state;
//! 2. draw the Wiener increment `dW`;
//! 3. form the homodyne record increment `dI = sqrt(Gamma_m) <Jz> dt + dW`;
//! 4. update the current filter (when the strategy uses it);
//! 5. assemble drift and diffusion, including the strategy's feedback terms;
//! 6. update `rho`, re-Hermitize, renormalize, and enforce positivity;
//! 7. record metrics on the sample grid.
//!
//! Positivity handling: eigenvalues in `[-tol, 0)` are clipped to zero and
//! the state renormalized; anything below `-tol` aborts the trajectory with
//! [`SdeError::PositivityLost`]. The tolerance must sit above the scheme's
//! own discretization error: an Euler step off a pure (boundary) state dips
//! negative by `O(dt * chi^2)` in the noise draw, measured at up to ~7e-3
//! per 60k steps for `dt = 1e-3`. The default `tol = 0.05` clips that
//! inherent error while still aborting on genuine integrator blowups.

use crate::feedback::{signed_pow, FeedbackConfig, FilterConfig, FilterState, Strategy};
use crate::model::{jz_expectation, markovian_fb_terms, Generator, ModelRates};
use crate::qstate::{
    commutator, hermitian_eigensystem, hermitian_eigenvalues, ComplexMatrix, DensityMatrix, Ket,
    QstateError, C64,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// A trajectory is armed for death detection once its recorded concurrence
/// has reached this level.
pub const DEATH_ARM_THRESHOLD: f64 = 0.5;

/// A death event counts as sudden when the previous recorded concurrence was
/// still above this level, i.e. the entanglement hit zero in one sample
/// interval rather than tailing off.
pub const SUDDEN_DROP_THRESHOLD: f64 = 0.2;

/// Concurrence at or below this floor counts as zero for death detection.
///
/// A trajectory that collapses onto `|00>` keeps an exactly zero `|11>`
/// block, so its Wootters concurrence reduces to `2 |rho_12|`, a purely
/// multiplicative quantity that decays through 1e-30 and beyond without ever
/// landing on floating-point zero. The floor sits below the concurrence
/// computation's own subtractive accuracy (~1e-7) and some thirty orders of
/// magnitude above where collapsed trajectories settle, so it separates the
/// two regimes unambiguously.
pub const CONCURRENCE_DEATH_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SdeError {
    #[error("state lost positivity at t = {t:.6} (min eigenvalue {min_eig:.3e})")]
    PositivityLost { t: f64, min_eig: f64 },
    #[error("state became non-finite or trace collapsed at t = {t:.6}")]
    NonFinite { t: f64 },
    #[error("metric evaluation failed at t = {t:.6}: {source}")]
    Metric {
        t: f64,
        #[source]
        source: QstateError,
    },
}

/// Time stepping and state-hygiene options.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Metrics are recorded every `record_stride` steps (plus the initial
    /// and final states).
    pub record_stride: usize,
    /// Positivity clip range; see the module docs for how the default is
    /// sized against the Euler error floor.
    pub positivity_tol: f64,
    /// Rescale to unit trace after every step.
    pub renormalize: bool,
    /// Replace `rho` by `(rho + rho†)/2` after every step.
    pub hermitize: bool,
    /// Apply the control computed on the previous step instead of the
    /// current one (one-step feedback delay). Only meaningful for the
    /// estimate- and filter-based strategies.
    pub delay_feedback: bool,
    /// Keep the full per-step homodyne record `dI` in the trajectory
    /// output. Off by default: it is n_steps doubles per trajectory.
    pub record_current: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            t_end: 30.0,
            record_stride: 10,
            positivity_tol: 0.05,
            renormalize: true,
            hermitize: true,
            delay_feedback: false,
            record_current: false,
        }
    }
}

impl IntegratorConfig {
    /// Number of Euler steps, `round(t_end / dt)`.
    pub fn n_steps(&self) -> usize {
        assert!(self.dt > 0.0 && self.t_end > 0.0);
        ((self.t_end / self.dt).round() as usize).max(1)
    }
}

/// Everything needed to run one trajectory.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryPlan {
    pub rates: ModelRates,
    pub feedback: FeedbackConfig,
    pub filter: FilterConfig,
    pub integrator: IntegratorConfig,
    pub initial: DensityMatrix,
    /// Pure state against which fidelity is reported.
    pub target: Ket,
}

/// Per-trajectory output: metric time series plus death bookkeeping.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub concurrence: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub purity: Vec<f64>,
    /// Raw per-step `dI` record, kept only when
    /// [`IntegratorConfig::record_current`] is set.
    pub current_record: Option<Vec<f64>>,
    /// Time of the first recorded sample with dead concurrence (at or below
    /// [`CONCURRENCE_DEATH_FLOOR`]) after the trajectory was armed (see
    /// [`DEATH_ARM_THRESHOLD`]).
    pub sudden_death_time: Option<f64>,
    /// Whether that death was abrupt (see [`SUDDEN_DROP_THRESHOLD`]).
    pub abrupt_death: bool,
    /// Most negative pre-repair eigenvalue seen across all steps; measures
    /// how hard the positivity clip had to work.
    pub min_eig_seen: f64,
    pub final_state: DensityMatrix,
}

/// Deterministic per-trajectory random stream: one ChaCha8 instance per
/// `(seed, stream)` pair. Trajectory `k` of a run uses stream `k`, so any
/// work scheduling yields identical records.
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { rng }
    }

    /// One standard normal draw.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

/// Wiener increment over one step: `sqrt(dt) * N(0, 1)`.
#[inline]
pub fn wiener_increment(rng: &mut RngStream, dt: f64) -> f64 {
    rng.standard_normal() * dt.sqrt()
}

/// Homodyne record increment `dI = sqrt(Gamma_m) <Jz> dt + dW`.
#[inline]
pub fn homodyne_increment(jz_mean: f64, gamma_m: f64, dt: f64, dw: f64) -> f64 {
    gamma_m.sqrt() * jz_mean * dt + dw
}

// Clamp eigenvalues in [-tol, 0) to zero and renormalize. The caller has
// already established min_eig >= -tol.
pub(crate) fn clip_to_psd(m: &ComplexMatrix, t: f64) -> Result<ComplexMatrix, SdeError> {
    let es = hermitian_eigensystem(m).map_err(|source| SdeError::Metric { t, source })?;
    let mut out = ComplexMatrix::zeros(4);
    let mut tr = 0.0;
    for k in 0..4 {
        let lam = es.values[k].max(0.0);
        if lam == 0.0 {
            continue;
        }
        tr += lam;
        let v = &es.vectors[k];
        for i in 0..4 {
            for j in 0..4 {
                out.add_at(i, j, v.amp(i) * v.amp(j).conj() * lam);
            }
        }
    }
    if tr <= 0.0 || !tr.is_finite() {
        return Err(SdeError::NonFinite { t });
    }
    Ok(out.scale(1.0 / tr))
}

/// Run one trajectory, discarding the per-sample states.
pub fn run_trajectory(
    plan: &TrajectoryPlan,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord, SdeError> {
    run_trajectory_observed(plan, seed, stream, |_, _, _| {})
}

/// Run one trajectory, calling `on_sample(sample_index, t, rho)` at every
/// recorded point (including t = 0 and the final step). The observer lets an
/// ensemble accumulate mean states without the trajectory storing them.
pub fn run_trajectory_observed(
    plan: &TrajectoryPlan,
    seed: u64,
    stream: u64,
    mut on_sample: impl FnMut(usize, f64, &DensityMatrix),
) -> Result<TrajectoryRecord, SdeError> {
    let cfg = &plan.integrator;
    let gen = Generator::new(&plan.rates);
    let gamma_m = plan.rates.gamma_m();
    let dt = cfg.dt;
    let n_steps = cfg.n_steps();
    let stride = cfg.record_stride.max(1);

    let mut rng = RngStream::new(seed, stream);
    let mut filter = match plan.feedback.strategy {
        Strategy::FilteredCurrent => Some(FilterState::new(&plan.filter, gamma_m, dt)),
        _ => None,
    };
    // unit-strength feedback operator, built once
    let f_hat = match plan.feedback.strategy {
        Strategy::None => None,
        _ => Some(plan.feedback.operator_matrix()),
    };
    let f_markov = f_hat.map(|f| f.scale(plan.feedback.u));

    let n_samples = n_steps / stride + 2;
    let mut rec = TrajectoryRecord {
        times: Vec::with_capacity(n_samples),
        concurrence: Vec::with_capacity(n_samples),
        fidelity: Vec::with_capacity(n_samples),
        purity: Vec::with_capacity(n_samples),
        current_record: cfg.record_current.then(|| Vec::with_capacity(n_steps)),
        sudden_death_time: None,
        abrupt_death: false,
        min_eig_seen: 0.0,
        final_state: plan.initial,
    };

    let mut rho = *plan.initial.matrix();
    let mut prev_control = 0.0;

    let record = |rho: &ComplexMatrix,
                      t: f64,
                      rec: &mut TrajectoryRecord,
                      on_sample: &mut dyn FnMut(usize, f64, &DensityMatrix)|
     -> Result<(), SdeError> {
        let state = DensityMatrix::from_matrix_unchecked(*rho);
        let c = state
            .concurrence()
            .map_err(|source| SdeError::Metric { t, source })?;
        let idx = rec.times.len();
        if rec.sudden_death_time.is_none() {
            let armed = rec.concurrence.iter().any(|&x| x >= DEATH_ARM_THRESHOLD);
            if armed && c <= CONCURRENCE_DEATH_FLOOR {
                rec.sudden_death_time = Some(t);
                rec.abrupt_death = rec
                    .concurrence
                    .last()
                    .is_some_and(|&prev| prev > SUDDEN_DROP_THRESHOLD);
            }
        }
        rec.times.push(t);
        rec.concurrence.push(c);
        rec.fidelity.push(state.fidelity_to(&plan.target));
        rec.purity.push(state.purity());
        on_sample(idx, t, &state);
        Ok(())
    };

    record(&rho, 0.0, &mut rec, &mut on_sample)?;

    for k in 1..=n_steps {
        let t = k as f64 * dt;
        let jz = jz_expectation(&rho);
        let dw = wiener_increment(&mut rng, dt);
        let di = homodyne_increment(jz, gamma_m, dt, dw);
        if let Some(cr) = rec.current_record.as_mut() {
            cr.push(di);
        }

        let mut drift = gen.qte_drift(&rho);
        let mut diffusion = gen.qte_diffusion(&rho);
        match plan.feedback.strategy {
            Strategy::None => {}
            Strategy::MarkovianDirect => {
                let f = f_markov.as_ref().expect("operator built for strategy");
                let (d_extra, s_extra) = markovian_fb_terms(f, &rho, gamma_m);
                drift += d_extra;
                diffusion += s_extra;
            }
            Strategy::StateEstimate | Strategy::FilteredCurrent => {
                let raw = match plan.feedback.strategy {
                    Strategy::StateEstimate => plan.feedback.u * jz,
                    _ => {
                        let r = filter.as_mut().expect("filter built for strategy").push(di);
                        plan.feedback.u * signed_pow(r, plan.filter.power_p)
                    }
                };
                let control = if cfg.delay_feedback {
                    let c = prev_control;
                    prev_control = raw;
                    c
                } else {
                    raw
                };
                if control != 0.0 {
                    let f = f_hat.as_ref().expect("operator built for strategy");
                    drift += C64::new(0.0, -control) * commutator(f, &rho);
                }
            }
        }

        for i in 0..4 {
            for j in 0..4 {
                let v = rho.at(i, j) + drift.at(i, j) * dt + diffusion.at(i, j) * dw;
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

        let min_eig = hermitian_eigenvalues(&rho)
            .map_err(|source| SdeError::Metric { t, source })?[0];
        rec.min_eig_seen = rec.min_eig_seen.min(min_eig);
        if min_eig < -cfg.positivity_tol {
            return Err(SdeError::PositivityLost { t, min_eig });
        }
        if min_eig < 0.0 {
            rho = clip_to_psd(&rho, t)?;
        }

        if k % stride == 0 || k == n_steps {
            record(&rho, t, &mut rec, &mut on_sample)?;
        }
    }

    rec.final_state = DensityMatrix::from_matrix_unchecked(rho);
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::{FeedbackOp, FilterMode};
    use crate::model::PurcellSign;
    use crate::qstate::{bell_state, Bell, Ket};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    fn quiet_rates() -> ModelRates {
        ModelRates {
            eta: 1.0,
            gamma_p: 8.0,
            chi_alpha_sq: 0.0,
            purcell_sign: PurcellSign::Minus,
            gamma_1: 0.0,
            gamma_2: 0.0,
            gamma_phi_1: 0.0,
            gamma_phi_2: 0.0,
        }
    }

    fn base_plan(rates: ModelRates, strategy: Strategy, u: f64) -> TrajectoryPlan {
        TrajectoryPlan {
            rates,
            feedback: FeedbackConfig {
                strategy,
                u,
                op: FeedbackOp::Jx,
                weight_c1: 1.0,
                weight_c2: 1.0,
            },
            filter: FilterConfig {
                gamma_ft: 0.006,
                window_t: 0.1,
                power_p: 1.0,
                mode: FilterMode::Exact,
            },
            integrator: IntegratorConfig {
                t_end: 1.0,
                ..IntegratorConfig::default()
            },
            initial: DensityMatrix::pure(&bell_state(Bell::PhiPlus)),
            target: bell_state(Bell::PhiPlus),
        }
    }

    #[test]
    fn homodyne_increment_combines_signal_and_noise() {
        let di = homodyne_increment(2.0, 2.0, 1e-3, 0.005);
        assert_close(di, 2.0f64.sqrt() * 2.0 * 1e-3 + 0.005, 1e-18);
    }

    #[test]
    fn wiener_increments_have_the_right_moments() {
        let mut rng = RngStream::new(1, 0);
        let dt = 1e-3;
        let n = 20_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let dw = wiener_increment(&mut rng, dt);
            sum += dw;
            sum2 += dw * dw;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64;
        // 5 sigma bands
        assert!(mean.abs() < 5.0 * (dt / n as f64).sqrt());
        assert!((var - dt).abs() < 5.0 * dt * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn rng_streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..8)
            .scan(RngStream::new(7, 3), |r, _| Some(r.standard_normal()))
            .collect();
        let b: Vec<f64> = (0..8)
            .scan(RngStream::new(7, 3), |r, _| Some(r.standard_normal()))
            .collect();
        let c: Vec<f64> = (0..8)
            .scan(RngStream::new(7, 4), |r, _| Some(r.standard_normal()))
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    // The dark state must be a bit-exact fixed point of the full stochastic
    // loop (not just of the generator) for the passive and estimate-based
    // strategies. The squared 1/sqrt(2) amplitudes of the initial projector
    // sit one ulp above 0.5; the first renormalize lands on the exact-0.5
    // matrix and the state must then freeze there bitwise.
    #[test]
    fn dark_state_is_bit_exact_under_none_and_estimate_feedback() {
        let mut fixed = ComplexMatrix::zeros(4);
        for i in [1, 2] {
            for j in [1, 2] {
                fixed.set(i, j, C64::new(0.5, 0.0));
            }
        }
        for (strategy, u) in [(Strategy::None, 0.0), (Strategy::StateEstimate, 1.0)] {
            let plan = base_plan(quiet_rates(), strategy, u);
            let rec = run_trajectory(&plan, 42, 0).unwrap();
            assert_eq!(
                rec.final_state.matrix().max_abs_diff(&fixed),
                0.0,
                "strategy {strategy:?} drifted off the dark state"
            );
            assert!(rec.min_eig_seen >= -1e-15);
            assert!(rec.fidelity.iter().all(|&f| f == 1.0));
            assert!(rec.concurrence.iter().all(|&c| (c - 1.0).abs() < 1e-7));
        }
    }

    #[test]
    fn trajectories_are_deterministic_per_seed_and_stream() {
        let mut plan = base_plan(quiet_rates(), Strategy::None, 0.0);
        plan.initial = DensityMatrix::pure(&Ket::plus_plus());
        plan.integrator.t_end = 0.2;
        let a = run_trajectory(&plan, 9, 5).unwrap();
        let b = run_trajectory(&plan, 9, 5).unwrap();
        assert_eq!(a.concurrence, b.concurrence);
        assert_eq!(a.fidelity, b.fidelity);
        assert_eq!(
            a.final_state.matrix().max_abs_diff(b.final_state.matrix()),
            0.0
        );
        let c = run_trajectory(&plan, 9, 6).unwrap();
        assert!(a.final_state.matrix().max_abs_diff(c.final_state.matrix()) > 0.0);
    }

    // Unit-efficiency homodyne measurement keeps pure states pure. Euler
    // turns that into a mean-zero purity random walk of step O(dt), so the
    // band here is loose but shrinks with dt (probed: worst ~0.95 at
    // dt = 1e-3, ~0.98 at dt = 1e-4, over t <= 1 and 10 noise streams).
    #[test]
    fn measurement_preserves_purity_of_pure_states() {
        let mut plan = base_plan(ModelRates::bare(1.0), Strategy::None, 0.0);
        plan.initial = DensityMatrix::pure(&Ket::plus_plus());
        plan.integrator.t_end = 1.0;
        for stream in 0..10 {
            let rec = run_trajectory(&plan, 3, stream).unwrap();
            for (&t, &p) in rec.times.iter().zip(rec.purity.iter()) {
                assert!(
                    p > 0.9 && p <= 1.0 + 1e-9,
                    "purity {p} out of band at t = {t} (stream {stream})"
                );
            }
        }
    }

    // <Jz> is a martingale under pure measurement: no drift in its ensemble
    // mean. Checked crudely with a few dozen short trajectories.
    #[test]
    fn jz_mean_has_no_systematic_drift_under_measurement() {
        let mut plan = base_plan(ModelRates::bare(1.0), Strategy::None, 0.0);
        plan.initial = DensityMatrix::pure(&Ket::plus_plus());
        plan.integrator.t_end = 0.5;
        let n = 64;
        let mut sum = 0.0;
        for s in 0..n {
            let rec = run_trajectory(&plan, 21, s).unwrap();
            sum += crate::model::jz_expectation(rec.final_state.matrix());
        }
        let mean = sum / n as f64;
        // initial <Jz> = 0; fluctuations ~ sqrt(Gamma_m t / n)
        assert!(mean.abs() < 0.5, "systematic <Jz> drift: {mean}");
    }

    #[test]
    fn overshoot_below_tolerance_aborts_with_positivity_error() {
        let rates = ModelRates {
            gamma_1: 1.0,
            ..ModelRates::bare(1.0)
        };
        let mut plan = base_plan(rates, Strategy::None, 0.0);
        plan.initial = DensityMatrix::pure(&Ket::basis(3));
        plan.integrator.dt = 3.0;
        plan.integrator.t_end = 3.0;
        match run_trajectory(&plan, 1, 0) {
            Err(SdeError::PositivityLost { min_eig, .. }) => assert!(min_eig < -1.0),
            other => panic!("expected positivity loss, got {other:?}"),
        }
    }

    #[test]
    fn overshoot_within_tolerance_is_clipped_to_psd() {
        let rates = ModelRates {
            gamma_1: 1.0,
            ..ModelRates::bare(1.0)
        };
        let mut plan = base_plan(rates, Strategy::None, 0.0);
        plan.initial = DensityMatrix::pure(&Ket::basis(3));
        plan.integrator.dt = 3.0;
        plan.integrator.t_end = 3.0;
        plan.integrator.positivity_tol = 10.0; // treat the overshoot as clippable
        let rec = run_trajectory(&plan, 1, 0).unwrap();
        let min = rec.final_state.min_eigenvalue().unwrap();
        assert!(min >= -1e-12, "clip left eigenvalue {min}");
        assert_close(rec.final_state.matrix().trace().re, 1.0, 1e-12);
    }

    #[test]
    fn sample_grid_includes_endpoints_and_stride_multiples() {
        let mut plan = base_plan(quiet_rates(), Strategy::None, 0.0);
        plan.integrator.dt = 1e-3;
        plan.integrator.t_end = 0.01;
        plan.integrator.record_stride = 3;
        let rec = run_trajectory(&plan, 1, 0).unwrap();
        let want = [0.0, 0.003, 0.006, 0.009, 0.01];
        assert_eq!(rec.times.len(), want.len());
        for (got, want) in rec.times.iter().zip(want.iter()) {
            assert_close(*got, *want, 1e-12);
        }
    }

    #[test]
    fn observer_sees_every_sample_in_order() {
        let mut plan = base_plan(quiet_rates(), Strategy::None, 0.0);
        plan.integrator.t_end = 0.05;
        plan.integrator.record_stride = 10;
        let mut seen = Vec::new();
        let rec = run_trajectory_observed(&plan, 1, 0, |idx, t, state| {
            seen.push((idx, t));
            assert_close(state.matrix().trace().re, 1.0, 1e-9);
        })
        .unwrap();
        assert_eq!(seen.len(), rec.times.len());
        for (k, (idx, t)) in seen.iter().enumerate() {
            assert_eq!(*idx, k);
            assert_close(*t, rec.times[k], 1e-15);
        }
    }

    // On the dark state <Jz> = 0, so the kept record is pure Wiener noise.
    #[test]
    fn current_record_is_pure_noise_on_the_dark_state() {
        let mut plan = base_plan(quiet_rates(), Strategy::None, 0.0);
        plan.integrator.t_end = 2.0;
        plan.integrator.record_current = true;
        let rec = run_trajectory(&plan, 8, 2).unwrap();
        let record = rec.current_record.as_ref().unwrap();
        assert_eq!(record.len(), plan.integrator.n_steps());
        let n = record.len() as f64;
        let mean: f64 = record.iter().sum::<f64>() / n;
        let var: f64 = record.iter().map(|x| x * x).sum::<f64>() / n;
        let dt = plan.integrator.dt;
        assert!(mean.abs() < 5.0 * (dt / n).sqrt());
        assert!((var - dt).abs() < 5.0 * dt * (2.0 / n).sqrt());
    }

    // Feedback delay: with a one-step delay the first applied control is
    // zero, so a state-estimate trajectory from a <Jz> != 0 state diverges
    // from the undelayed one only after the first step.
    #[test]
    fn delayed_feedback_shifts_the_control_by_one_step() {
        let mut plan = base_plan(quiet_rates(), Strategy::StateEstimate, 1.0);
        plan.initial = DensityMatrix::pure(&Ket::basis(0)); // <Jz> = 2
        plan.integrator.t_end = 0.002;
        plan.integrator.dt = 1e-3;
        plan.integrator.record_stride = 1;
        let undelayed = run_trajectory(&plan, 5, 0).unwrap();
        plan.integrator.delay_feedback = true;
        let delayed = run_trajectory(&plan, 5, 0).unwrap();
        // same noise, different control schedule
        assert!(
            undelayed
                .final_state
                .matrix()
                .max_abs_diff(delayed.final_state.matrix())
                > 0.0
        );
    }
}
