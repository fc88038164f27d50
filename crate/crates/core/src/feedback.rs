//! Feedback strategies and the measurement-current filter.
//!
//! Four strategies are supported:
//!
//! * [`Strategy::None`]: free conditional evolution, the control baseline.
//! * [`Strategy::MarkovianDirect`]: the raw current multiplies the feedback
//!   Hamiltonian; handled by the closed-form extra terms in
//!   [`crate::model::markovian_fb_terms`].
//! * [`Strategy::StateEstimate`]: the control is `u * <Jz>_c` computed from
//!   the integrated estimate of the state itself.
//! * [`Strategy::FilteredCurrent`]: the control is `u * sgn(R) |R|^P` with
//!   `R` the normalized output of the exponential filter below.
//!
//! The filter is a causal exponentially weighted moving window over the raw
//! homodyne increments,
//!
//! ```text
//! R(t) = (1/N) * integral over (t-T, t] of exp(-gamma_ft (t - tau)) dI(tau)
//! N    = 2 sqrt(Gamma_m) (1 - exp(-gamma_ft T)) / gamma_ft
//! ```
//!
//! normalized so that a record pinned at `<Jz> = 2` filters to `R ~ 1`. The
//! `gamma_ft -> 0` limit `N = 2 sqrt(Gamma_m) T` is taken smoothly.

use crate::qstate::{collective_op, Collective, ComplexMatrix};

/// Feedback strategy selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    None,
    MarkovianDirect,
    StateEstimate,
    FilteredCurrent,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::MarkovianDirect => "markovian_direct",
            Strategy::StateEstimate => "state_estimate",
            Strategy::FilteredCurrent => "filtered_current",
        }
    }
}

/// Shape of the feedback Hamiltonian, applied with overall strength `u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeedbackOp {
    /// `sigma_1x + sigma_2x`, the symmetric drive that couples the target
    /// `|Phi+>` to `|Psi+>`.
    Jx,
    /// `sigma_1x - sigma_2x`.
    JxBar,
    /// `c1 sigma_1x + c2 sigma_2x` with weights from the config.
    WeightedX,
}

/// Unit-strength feedback operator matrix. The weights are only read for
/// [`FeedbackOp::WeightedX`].
pub fn feedback_operator(op: FeedbackOp, c1: f64, c2: f64) -> ComplexMatrix {
    match op {
        FeedbackOp::Jx => collective_op(Collective::Jx),
        FeedbackOp::JxBar => collective_op(Collective::JxBar),
        FeedbackOp::WeightedX => collective_op(Collective::WeightedX { c1, c2 }),
    }
}

/// Full feedback configuration carried by a simulation plan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeedbackConfig {
    pub strategy: Strategy,
    /// Feedback strength. For `MarkovianDirect` this multiplies the raw
    /// current (units `sqrt(Gamma_d)`); for the estimate- and filter-based
    /// strategies it multiplies a dimensionless control (units `Gamma_d`).
    pub u: f64,
    pub op: FeedbackOp,
    pub weight_c1: f64,
    pub weight_c2: f64,
}

impl FeedbackConfig {
    /// No feedback at all.
    pub fn off() -> Self {
        FeedbackConfig {
            strategy: Strategy::None,
            u: 0.0,
            op: FeedbackOp::Jx,
            weight_c1: 1.0,
            weight_c2: 1.0,
        }
    }

    pub fn operator_matrix(&self) -> ComplexMatrix {
        feedback_operator(self.op, self.weight_c1, self.weight_c2)
    }
}

/// `sgn(r) |r|^p`, the odd power law applied to the filtered current.
pub fn signed_pow(r: f64, p: f64) -> f64 {
    assert!(p > 0.0, "power must be positive");
    if p == 1.0 {
        r
    } else if p == 2.0 {
        r * r.abs()
    } else if p == 3.0 {
        r * r * r
    } else {
        r.signum() * r.abs().powf(p)
    }
}

/// How the filter evaluates its window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterMode {
    /// Weighted dot product over the stored window each step. O(window)
    /// per push, no drift; the default.
    Exact,
    /// Running sum updated as
    /// `S <- q S + dI_new - q^n dI_dropped`. O(1) per push; agrees with
    /// `Exact` to roundoff.
    Recursive,
}

/// Filter parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterConfig {
    /// Exponential forgetting rate `gamma_ft >= 0`.
    pub gamma_ft: f64,
    /// Window length `T > 0` in time units.
    pub window_t: f64,
    /// Exponent `P >= 1` of the control power law.
    pub power_p: f64,
    pub mode: FilterMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            gamma_ft: 0.0,
            window_t: 1.0,
            power_p: 1.0,
            mode: FilterMode::Exact,
        }
    }
}

/// Running state of the current filter.
///
/// The window starts zero-filled, which is the same as taking `dI = 0` for
/// times before the record begins; the filter output warms up over the first
/// `window_len` pushes.
#[derive(Clone, Debug)]
pub struct FilterState {
    buf: Vec<f64>,
    /// Ring index of the newest increment.
    head: usize,
    /// `w[k] = q^k`, newest first; only populated in exact mode.
    weights: Vec<f64>,
    q: f64,
    q_pow_n: f64,
    inv_norm: f64,
    sum: f64,
    mode: FilterMode,
}

impl FilterState {
    /// Build a filter for step size `dt` and measurement strength
    /// `gamma_m`. The window holds `ceil(T / dt)` increments.
    pub fn new(cfg: &FilterConfig, gamma_m: f64, dt: f64) -> Self {
        assert!(cfg.window_t > 0.0, "window length must be positive");
        assert!(cfg.gamma_ft >= 0.0, "forgetting rate must be nonnegative");
        assert!(dt > 0.0 && gamma_m > 0.0);
        let n = (cfg.window_t / dt).ceil() as usize;
        assert!(n >= 1);
        let q = (-cfg.gamma_ft * dt).exp();
        let norm = if cfg.gamma_ft == 0.0 {
            2.0 * gamma_m.sqrt() * cfg.window_t
        } else {
            2.0 * gamma_m.sqrt() * (-(-cfg.gamma_ft * cfg.window_t).exp_m1()) / cfg.gamma_ft
        };
        let weights = match cfg.mode {
            FilterMode::Exact => {
                let mut w = Vec::with_capacity(n);
                let mut acc = 1.0;
                for _ in 0..n {
                    w.push(acc);
                    acc *= q;
                }
                w
            }
            FilterMode::Recursive => Vec::new(),
        };
        FilterState {
            buf: vec![0.0; n],
            head: n - 1,
            weights,
            q,
            q_pow_n: q.powi(n as i32),
            inv_norm: 1.0 / norm,
            sum: 0.0,
            mode: cfg.mode,
        }
    }

    /// Number of increments the window holds.
    pub fn window_len(&self) -> usize {
        self.buf.len()
    }

    /// Forget the record seen so far.
    pub fn reset(&mut self) {
        self.buf.fill(0.0);
        self.head = self.buf.len() - 1;
        self.sum = 0.0;
    }

    /// Ingest one raw increment `dI` and return the filter output `R`.
    pub fn push(&mut self, di: f64) -> f64 {
        let n = self.buf.len();
        // slot after the newest holds the oldest; it drops out of the window
        self.head = if self.head + 1 == n { 0 } else { self.head + 1 };
        let dropped = self.buf[self.head];
        self.buf[self.head] = di;
        let weighted = match self.mode {
            FilterMode::Exact => {
                // newest-first traversal of the ring in two contiguous runs
                let (up_to_head, after_head) = self.buf.split_at(self.head + 1);
                let mut acc = 0.0;
                for (v, w) in up_to_head
                    .iter()
                    .rev()
                    .chain(after_head.iter().rev())
                    .zip(self.weights.iter())
                {
                    acc += v * w;
                }
                acc
            }
            FilterMode::Recursive => {
                self.sum = self.q * self.sum + di - self.q_pow_n * dropped;
                self.sum
            }
        };
        weighted * self.inv_norm
    }
}
