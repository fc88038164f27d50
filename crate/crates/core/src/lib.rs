//! Stochastic quantum trajectories for a pair of dispersively coupled qubits
//! under continuous homodyne monitoring of the collective observable `J_z`,
//! with optional measurement-based feedback that creates and stabilizes
//! two-qubit entanglement.
//!
//! Modules, bottom to top:
//!
//! * [`qstate`] - self-contained 4x4 complex linear algebra, two-qubit
//!   operators, and entanglement metrics (concurrence, fidelity, purity).
//! * [`model`] - dispersive-model rates and the drift/diffusion
//!   superoperators of the conditioned master equation.
//! * [`feedback`] - feedback strategies, the control operator, and the
//!   causal exponential filter applied to the homodyne record.
//! * [`sde`] - Euler-Maruyama integration of single trajectories with
//!   seeded, replayable noise streams.
//! * [`ensemble`] - deterministic parallel Monte Carlo over trajectories
//!   plus the unconditioned (ensemble-average) reference solution.
//! * [`cli`] - scenario configuration, presets, and CSV emission.
//!
//! Units: all rates are quoted in units of the measurement-induced dephasing
//! rate `Gamma_d`, all times in `1/Gamma_d`.

pub mod cli;
pub mod ensemble;
pub mod feedback;
pub mod model;
pub mod qstate;
pub mod sde;
