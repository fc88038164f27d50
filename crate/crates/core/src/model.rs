//! Dispersive-readout model of two driven qubits in a common cavity, after
//! adiabatic elimination of the cavity mode.
//!
//! Working units: every rate in `ModelRates` is quoted in units of the
//! measurement-induced dephasing rate `Gamma_d`, and times are in `1/Gamma_d`.
//! The measurement strength is then `Gamma_m = 2 * eta` with `eta` the
//! detection efficiency. Users starting from circuit parameters get the
//! conversion from [`derive_rates`].
//!
//! The conditional master equation for a homodyne record splits into a
//! deterministic drift and a record-driven diffusion:
//!
//! ```text
//! drho = drift(rho) dt + diffusion(rho) dW
//! drift     = -i chi|a|^2 [Jz, rho] + sum_j gamma_j D[sigma_j-] rho
//!             + sum_j (gamma_phi_j / 2) D[sigma_jz] rho
//!             + gamma_p D[sigma_1- -+ sigma_2-] rho + (1/2) D[Jz] rho
//! diffusion = (sqrt(Gamma_m)/2) H[Jz] rho
//! ```
//!
//! with `D` the usual dissipator and `H` the measurement (unraveling)
//! superoperator. [`Generator`] evaluates both entrywise, exploiting that
//! every channel except the correlated decay is diagonal or a fixed block
//! copy; this keeps the stabilized state `|Phi+>` an exact fixed point in
//! floating point when the single-qubit noise is off.

use crate::qstate::{
    anticommutator, collective_op, commutator, Collective, ComplexMatrix, C64, C_I, C_ZERO,
};

/// Circuit-level parameters: qubit-cavity coupling `g`, detuning `delta`,
/// measurement drive `epsilon`, cavity decay `kappa`, detector efficiency
/// `eta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams {
    pub g: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub eta: f64,
}

/// Rates implied by a set of circuit parameters, in absolute units.
#[derive(Clone, Copy, Debug)]
pub struct DerivedRates {
    /// Dispersive shift `g^2 / delta`.
    pub chi: f64,
    /// Small parameter `g / delta`.
    pub lambda: f64,
    /// Steady cavity amplitude `-2 i epsilon / kappa`.
    pub alpha: C64,
    /// `|alpha|^2`.
    pub alpha_sq: f64,
    /// Measurement-induced dephasing `8 |alpha|^2 chi^2 / kappa`.
    pub gamma_d: f64,
    /// Purcell-type correlated decay `kappa lambda^2`.
    pub gamma_p: f64,
    /// Measurement strength `2 eta gamma_d`.
    pub gamma_m: f64,
    /// Coherent `Jz` rotation rate `chi |alpha|^2`.
    pub chi_alpha_sq: f64,
}

/// Derive the model rates from circuit parameters.
pub fn derive_rates(p: &PhysicalParams) -> DerivedRates {
    assert!(p.delta != 0.0, "detuning must be nonzero");
    assert!(p.kappa > 0.0, "cavity decay must be positive");
    let chi = p.g * p.g / p.delta;
    let lambda = p.g / p.delta;
    let alpha = C64::new(0.0, -2.0 * p.epsilon / p.kappa);
    let alpha_sq = alpha.norm_sqr();
    let gamma_d = 8.0 * alpha_sq * chi * chi / p.kappa;
    DerivedRates {
        chi,
        lambda,
        alpha,
        alpha_sq,
        gamma_d,
        gamma_p: p.kappa * lambda * lambda,
        gamma_m: 2.0 * p.eta * gamma_d,
        chi_alpha_sq: chi * alpha_sq,
    }
}

impl DerivedRates {
    /// Express the correlated-decay and rotation rates in `Gamma_d` units,
    /// producing a `ModelRates` with the single-qubit noise left at zero.
    pub fn dephasing_units(&self, eta: f64, purcell_sign: PurcellSign) -> ModelRates {
        assert!(self.gamma_d > 0.0, "gamma_d must be positive to normalize");
        ModelRates {
            eta,
            gamma_p: self.gamma_p / self.gamma_d,
            chi_alpha_sq: self.chi_alpha_sq / self.gamma_d,
            purcell_sign,
            gamma_1: 0.0,
            gamma_2: 0.0,
            gamma_phi_1: 0.0,
            gamma_phi_2: 0.0,
        }
    }
}

/// Relative sign between the two lowering operators in the correlated decay
/// channel. `Minus` (`sigma_1- - sigma_2-`) leaves `|Phi+>` dark; `Plus`
/// leaves `|Phi->` dark instead.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PurcellSign {
    Plus,
    Minus,
}

impl PurcellSign {
    #[inline]
    pub fn as_f64(self) -> f64 {
        match self {
            PurcellSign::Plus => 1.0,
            PurcellSign::Minus => -1.0,
        }
    }

    /// The decay operator `sigma_1- + sign * sigma_2-`.
    pub fn operator(self) -> ComplexMatrix {
        match self {
            PurcellSign::Plus => collective_op(Collective::LoweringSum),
            PurcellSign::Minus => collective_op(Collective::LoweringDiff),
        }
    }
}

/// Model rates in `Gamma_d` units (`Gamma_d = 1`, `Gamma_m = 2 eta`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelRates {
    /// Homodyne detection efficiency, in `(0, 1]`.
    pub eta: f64,
    /// Correlated decay rate.
    pub gamma_p: f64,
    /// Coherent `Jz` rotation rate.
    pub chi_alpha_sq: f64,
    pub purcell_sign: PurcellSign,
    /// Relaxation rate of qubit 1.
    pub gamma_1: f64,
    /// Relaxation rate of qubit 2.
    pub gamma_2: f64,
    /// Pure dephasing rate of qubit 1.
    pub gamma_phi_1: f64,
    /// Pure dephasing rate of qubit 2.
    pub gamma_phi_2: f64,
}

impl ModelRates {
    /// Rates with every optional channel switched off.
    pub fn bare(eta: f64) -> Self {
        ModelRates {
            eta,
            gamma_p: 0.0,
            chi_alpha_sq: 0.0,
            purcell_sign: PurcellSign::Minus,
            gamma_1: 0.0,
            gamma_2: 0.0,
            gamma_phi_1: 0.0,
            gamma_phi_2: 0.0,
        }
    }

    /// Measurement strength `Gamma_m = 2 eta`.
    #[inline]
    pub fn gamma_m(&self) -> f64 {
        2.0 * self.eta
    }
}

/// Lindblad dissipator `D[A] rho = A rho A† - (A†A rho + rho A†A)/2`.
pub fn dissipator(a: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let ad = a.adjoint();
    let ada = ad * *a;
    *a * *rho * ad - anticommutator(&ada, rho).scale(0.5)
}

/// Measurement superoperator
/// `H[A] rho = A rho + rho A† - Tr[(A + A†) rho] rho`.
pub fn unravel(a: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let sandwich = *a * *rho + *rho * a.adjoint();
    let mean = sandwich.trace();
    sandwich - mean * *rho
}

/// `<Jz> = Tr[Jz rho] = 2 (rho_00 - rho_33)` for a unit-trace state.
#[inline]
pub fn jz_expectation(rho: &ComplexMatrix) -> f64 {
    2.0 * (rho.at(0, 0).re - rho.at(3, 3).re)
}

// Jz diagonal in basis order {|00>, |01>, |10>, |11>}.
const JZ_DIAG: [f64; 4] = [2.0, 0.0, 0.0, -2.0];

/// Precomputed entrywise evaluator for the conditional master equation.
///
/// All diagonal channels (coherent rotation, measurement dephasing, qubit
/// dephasing, and the anticommutator halves of the decay channels) collapse
/// into one complex coefficient per matrix entry; the decay gains are block
/// copies; only the exchange part of the correlated decay needs row/column
/// passes. One drift evaluation costs a few hundred flops and no allocation.
#[derive(Clone, Copy, Debug)]
pub struct Generator {
    rates: ModelRates,
    coeff: [[C64; 4]; 4],
    /// gamma_1 + gamma_p, coefficient of the qubit-1 gain block.
    gain_1: f64,
    /// gamma_2 + gamma_p, coefficient of the qubit-2 gain block.
    gain_2: f64,
    /// sign * gamma_p, coefficient of the cross gain blocks.
    gain_x: f64,
    /// sign * gamma_p / 2, prefactor of the exchange loss.
    exch: f64,
    /// sqrt(Gamma_m) / 2.
    sqrt_gm_half: f64,
}

impl Generator {
    pub fn new(rates: &ModelRates) -> Self {
        assert!(rates.eta > 0.0 && rates.eta <= 1.0, "eta must be in (0, 1]");
        assert!(
            rates.gamma_p >= 0.0
                && rates.gamma_1 >= 0.0
                && rates.gamma_2 >= 0.0
                && rates.gamma_phi_1 >= 0.0
                && rates.gamma_phi_2 >= 0.0,
            "rates must be nonnegative"
        );
        let sgn = rates.purcell_sign.as_f64();
        // sigma_z diagonals and excitation numbers per basis state
        let z1: [f64; 4] = [1.0, 1.0, -1.0, -1.0];
        let z2: [f64; 4] = [1.0, -1.0, 1.0, -1.0];
        let n1: [f64; 4] = [0.0, 0.0, 1.0, 1.0];
        let n2: [f64; 4] = [0.0, 1.0, 0.0, 1.0];
        let mut coeff = [[C_ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let dm = JZ_DIAG[i] - JZ_DIAG[j];
                let mut re = -0.25 * dm * dm; // (Gamma_d/2) D[Jz], Gamma_d = 1
                re -= 0.25 * rates.gamma_phi_1 * (z1[i] - z1[j]).powi(2);
                re -= 0.25 * rates.gamma_phi_2 * (z2[i] - z2[j]).powi(2);
                re -= 0.5 * rates.gamma_1 * (n1[i] + n1[j]);
                re -= 0.5 * rates.gamma_2 * (n2[i] + n2[j]);
                re -= 0.5 * rates.gamma_p * (n1[i] + n2[i] + n1[j] + n2[j]);
                let im = -rates.chi_alpha_sq * dm;
                coeff[i][j] = C64::new(re, im);
            }
        }
        Generator {
            rates: *rates,
            coeff,
            gain_1: rates.gamma_1 + rates.gamma_p,
            gain_2: rates.gamma_2 + rates.gamma_p,
            gain_x: sgn * rates.gamma_p,
            exch: 0.5 * sgn * rates.gamma_p,
            sqrt_gm_half: 0.5 * rates.gamma_m().sqrt(),
        }
    }

    #[inline]
    pub fn rates(&self) -> &ModelRates {
        &self.rates
    }

    /// Deterministic part of the conditional master equation.
    pub fn qte_drift(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(rho.dim(), 4);
        let mut out = ComplexMatrix::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                out.set(i, j, self.coeff[i][j] * rho.at(i, j));
            }
        }
        // relaxation gains: qubit 1 maps the {2,3} block onto {0,1},
        // qubit 2 maps {1,3} onto {0,2}, the correlated channel adds both
        // plus the signed cross blocks.
        for i in 0..2 {
            for j in 0..2 {
                out.add_at(i, j, rho.at(i + 2, j + 2) * self.gain_1);
            }
        }
        for &i in &[0usize, 2] {
            for &j in &[0usize, 2] {
                out.add_at(i, j, rho.at(i + 1, j + 1) * self.gain_2);
            }
        }
        if self.gain_x != 0.0 {
            for i in 0..2 {
                for &j in &[0usize, 2] {
                    out.add_at(i, j, rho.at(i + 2, j + 1) * self.gain_x);
                    out.add_at(j, i, rho.at(j + 1, i + 2) * self.gain_x);
                }
            }
        }
        // exchange part of the correlated decay:
        // -(sign gamma_p / 2)(E rho + rho E), E = |01><10| + |10><01|
        if self.exch != 0.0 {
            for k in 0..4 {
                out.add_at(1, k, rho.at(2, k) * -self.exch);
                out.add_at(2, k, rho.at(1, k) * -self.exch);
                out.add_at(k, 1, rho.at(k, 2) * -self.exch);
                out.add_at(k, 2, rho.at(k, 1) * -self.exch);
            }
        }
        out
    }

    /// Record-driven part, `(sqrt(Gamma_m)/2) H[Jz] rho`.
    pub fn qte_diffusion(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(rho.dim(), 4);
        let mean2 = 2.0 * jz_expectation(rho);
        let mut out = ComplexMatrix::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                let f = self.sqrt_gm_half * (JZ_DIAG[i] + JZ_DIAG[j] - mean2);
                out.set(i, j, rho.at(i, j) * f);
            }
        }
        out
    }
}

/// Extra drift and diffusion from feeding the homodyne current back through
/// the Hamiltonian `F * I(t)`:
///
/// ```text
/// drift_extra     = -i (sqrt(Gamma_m)/2) [F, Jz rho + rho Jz]
///                   - (1/2) [F, [F, rho]]
/// diffusion_extra = -i [F, rho]
/// ```
pub fn markovian_fb_terms(
    f_op: &ComplexMatrix,
    rho: &ComplexMatrix,
    gamma_m: f64,
) -> (ComplexMatrix, ComplexMatrix) {
    assert!(gamma_m > 0.0, "Gamma_m must be positive");
    let jz = collective_op(Collective::Jz);
    let k_rho = -C_I * commutator(f_op, rho);
    let anti = anticommutator(&jz, rho);
    let drift =
        (-C_I * C64::new(0.5 * gamma_m.sqrt(), 0.0)) * commutator(f_op, &anti)
            + C64::new(0.0, -0.5) * commutator(f_op, &k_rho);
    (drift, k_rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::testutil::random_rho;
    use crate::qstate::{bell_state, Bell, DensityMatrix, Ket, Pauli, Qubit};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    // Reference row: g=1, delta=20, epsilon=1, kappa=4, eta=1.
    #[test]
    fn derived_rates_reference_row() {
        let p = PhysicalParams {
            g: 1.0,
            delta: 20.0,
            epsilon: 1.0,
            kappa: 4.0,
            eta: 1.0,
        };
        let d = derive_rates(&p);
        assert_close(d.chi, 0.05, 1e-15);
        assert_close(d.lambda, 0.05, 1e-15);
        assert_close(d.alpha.re, 0.0, 1e-15);
        assert_close(d.alpha.im, -0.5, 1e-15);
        assert_close(d.alpha_sq, 0.25, 1e-15);
        assert_close(d.gamma_d, 1.25e-3, 1e-18);
        assert_close(d.gamma_p, 0.01, 1e-17);
        assert_close(d.gamma_m, 2.5e-3, 1e-18);
        assert_close(d.chi_alpha_sq, 0.0125, 1e-17);

        let m = d.dephasing_units(p.eta, PurcellSign::Minus);
        assert_close(m.gamma_p, 8.0, 1e-12);
        assert_close(m.chi_alpha_sq, 10.0, 1e-12);
        assert_close(m.gamma_m(), 2.0, 1e-15);
    }

    #[test]
    fn dissipator_relaxes_excited_state() {
        let s1m = crate::qstate::qubit_op(Pauli::Minus, Qubit::One);
        let excited = Ket::basis(2).outer(); // |10><10|
        let d = dissipator(&s1m, &excited);
        // gains |00><00|, loses |10><10|
        let want = Ket::basis(0).outer() - excited;
        assert!(d.max_abs_diff(&want) < 1e-15);
        assert!(d.trace().norm() < 1e-15);
    }

    #[test]
    fn unravel_of_jz_on_reference_states() {
        let jz = collective_op(Collective::Jz);
        // H[Jz](I/4) = Jz/2
        let got = unravel(&jz, &ComplexMatrix::identity(4).scale(0.25));
        assert!(got.max_abs_diff(&jz.scale(0.5)) < 1e-15);

        // H[Jz] |Psi+><Psi+| = 2|00><00| - 2|11><11|
        let psi = bell_state(Bell::PsiPlus).outer();
        let got = unravel(&jz, &psi);
        let want = Ket::basis(0).outer().scale(2.0) - Ket::basis(3).outer().scale(2.0);
        assert!(got.max_abs_diff(&want) < 1e-14);

        // H is trace-free on unit-trace states
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let rho = random_rho(&mut rng);
            assert!(unravel(&jz, rho.matrix()).trace().norm() < 1e-13);
        }
    }

    fn random_rates(rng: &mut impl Rng) -> ModelRates {
        ModelRates {
            eta: rng.random_range(0.1..1.0),
            gamma_p: rng.random_range(0.0..10.0),
            chi_alpha_sq: rng.random_range(-5.0..5.0),
            purcell_sign: if rng.random_bool(0.5) {
                PurcellSign::Minus
            } else {
                PurcellSign::Plus
            },
            gamma_1: rng.random_range(0.0..2.0),
            gamma_2: rng.random_range(0.0..2.0),
            gamma_phi_1: rng.random_range(0.0..2.0),
            gamma_phi_2: rng.random_range(0.0..2.0),
        }
    }

    // The entrywise drift must agree with the superoperator sum it encodes.
    #[test]
    fn generator_drift_matches_explicit_superoperators() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let rates = random_rates(&mut rng);
            let gen = Generator::new(&rates);
            let rho = random_rho(&mut rng);
            let m = rho.matrix();

            let jz = collective_op(Collective::Jz);
            let s1m = crate::qstate::qubit_op(Pauli::Minus, Qubit::One);
            let s2m = crate::qstate::qubit_op(Pauli::Minus, Qubit::Two);
            let z1 = crate::qstate::qubit_op(Pauli::Z, Qubit::One);
            let z2 = crate::qstate::qubit_op(Pauli::Z, Qubit::Two);
            let sd = rates.purcell_sign.operator();

            let mut want = C64::new(0.0, -rates.chi_alpha_sq) * commutator(&jz, m);
            want += dissipator(&jz, m).scale(0.5);
            want += dissipator(&s1m, m).scale(rates.gamma_1);
            want += dissipator(&s2m, m).scale(rates.gamma_2);
            want += dissipator(&z1, m).scale(0.5 * rates.gamma_phi_1);
            want += dissipator(&z2, m).scale(0.5 * rates.gamma_phi_2);
            want += dissipator(&sd, m).scale(rates.gamma_p);

            let got = gen.qte_drift(m);
            assert!(
                got.max_abs_diff(&want) < 1e-13,
                "drift mismatch {:.3e}",
                got.max_abs_diff(&want)
            );
            assert!(got.trace().norm() < 1e-13, "drift must be traceless");
        }
    }

    #[test]
    fn generator_diffusion_matches_unravel() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let rates = random_rates(&mut rng);
            let gen = Generator::new(&rates);
            let rho = random_rho(&mut rng);
            let jz = collective_op(Collective::Jz);
            let want = unravel(&jz, rho.matrix()).scale(0.5 * rates.gamma_m().sqrt());
            let got = gen.qte_diffusion(rho.matrix());
            assert!(got.max_abs_diff(&want) < 1e-13);
            assert!(got.trace().norm() < 1e-13);
        }
    }

    // With single-qubit noise off, |Phi+> is a fixed point of the full
    // conditional dynamics, exactly in floating point.
    #[test]
    fn phi_plus_is_an_exact_fixed_point_without_qubit_noise() {
        let rates = ModelRates {
            eta: 1.0,
            gamma_p: 8.0,
            chi_alpha_sq: 10.0,
            purcell_sign: PurcellSign::Minus,
            ..ModelRates::bare(1.0)
        };
        let gen = Generator::new(&rates);
        let rho = DensityMatrix::pure(&bell_state(Bell::PhiPlus));
        assert_eq!(gen.qte_drift(rho.matrix()).max_abs(), 0.0);
        assert_eq!(gen.qte_diffusion(rho.matrix()).max_abs(), 0.0);

        // flipping the decay sign makes |Phi-> dark instead
        let rates = ModelRates {
            purcell_sign: PurcellSign::Plus,
            ..rates
        };
        let gen = Generator::new(&rates);
        assert!(gen.qte_drift(rho.matrix()).max_abs() > 1.0);
        let rho_m = DensityMatrix::pure(&bell_state(Bell::PhiMinus));
        assert_eq!(gen.qte_drift(rho_m.matrix()).max_abs(), 0.0);
    }

    // Frozen coefficient: the |00><11| coherence decays at 4 Gamma_d under
    // the measurement channel alone.
    #[test]
    fn extreme_coherence_decays_at_rate_four() {
        let gen = Generator::new(&ModelRates::bare(1.0));
        let psi = bell_state(Bell::PsiPlus).outer();
        let drift = gen.qte_drift(&psi);
        assert_close(drift.at(0, 3).re, -4.0 * 0.5, 1e-15);
        assert_close(drift.at(0, 3).im, 0.0, 1e-15);
        // populations untouched by pure dephasing
        assert_close(drift.at(0, 0).norm(), 0.0, 1e-15);
        assert_close(drift.at(3, 3).norm(), 0.0, 1e-15);
    }

    #[test]
    fn coherent_rotation_enters_with_minus_i_commutator() {
        let rates = ModelRates {
            chi_alpha_sq: 10.0,
            ..ModelRates::bare(1.0)
        };
        let gen = Generator::new(&rates);
        let psi = bell_state(Bell::PsiPlus).outer();
        let drift = gen.qte_drift(&psi);
        // -i chi' (m0 - m3) rho_03 = -i * 10 * 4 * 0.5 on top of the
        // measurement decay -2
        assert_close(drift.at(0, 3).im, -20.0, 1e-12);
        assert_close(drift.at(0, 3).re, -2.0, 1e-12);
    }

    #[test]
    fn diffusion_of_maximally_mixed_state_is_scaled_jz() {
        let gen = Generator::new(&ModelRates::bare(1.0)); // Gamma_m = 2
        let got = gen.qte_diffusion(&ComplexMatrix::identity(4).scale(0.25));
        // (sqrt(2)/2) * Jz/2
        let want = collective_op(Collective::Jz).scale(0.5 * 2.0f64.sqrt() * 0.5);
        assert!(got.max_abs_diff(&want) < 1e-15);
    }

    // Frozen matrix: F = u Jx on |Phi+> gives
    //   drift_extra = -4 u^2 (P_phi+ - P_psi+), diffusion_extra = -i u [Jx, P].
    #[test]
    fn feedback_terms_on_the_target_state() {
        let u = 0.1;
        let f_op = collective_op(Collective::Jx).scale(u);
        let phi = bell_state(Bell::PhiPlus);
        let psi = bell_state(Bell::PsiPlus);
        let rho = phi.outer();
        let (drift, diff) = markovian_fb_terms(&f_op, &rho, 2.0);

        let want_drift = (phi.outer() - psi.outer()).scale(-4.0 * u * u);
        assert!(drift.max_abs_diff(&want_drift) < 1e-14);

        // [Jx, P_phi] = 2(|Psi+><Phi+| - |Phi+><Psi+|)
        let mut cross = ComplexMatrix::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                cross.set(
                    i,
                    j,
                    (psi.amp(i) * phi.amp(j).conj() - phi.amp(i) * psi.amp(j).conj()) * 2.0 * u,
                );
            }
        }
        let want_diff = -C_I * cross;
        assert!(diff.max_abs_diff(&want_diff) < 1e-14);

        assert!(drift.trace().norm() < 1e-14);
        assert!(diff.trace().norm() < 1e-14);
    }

    // Cross-check the closed forms against the raw superoperator algebra.
    #[test]
    fn feedback_terms_match_direct_algebra_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..25 {
            let u: f64 = rng.random_range(-2.0..2.0);
            let gamma_m: f64 = rng.random_range(0.1..4.0);
            let f_op = collective_op(Collective::Jx).scale(u);
            let rho = random_rho(&mut rng);
            let m = rho.matrix();
            let (drift, diff) = markovian_fb_terms(&f_op, m, gamma_m);

            let jz = collective_op(Collective::Jz);
            let k = |x: &ComplexMatrix| -C_I * commutator(&f_op, x);
            let anti = jz * *m + *m * jz;
            let want_drift = C64::new(0.5 * gamma_m.sqrt(), 0.0) * k(&anti)
                + C64::new(0.5, 0.0) * k(&k(m));
            assert!(drift.max_abs_diff(&want_drift) < 1e-12);
            assert!(diff.max_abs_diff(&k(m)) < 1e-14);
        }
    }
}
