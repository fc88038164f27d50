//! Two-qubit state algebra: small dense complex matrices, Pauli and
//! collective operators, Bell states, a Jacobi eigensolver for 4x4 Hermitian
//! matrices, and the entanglement metrics built on top of it.
//!
//! Conventions used throughout the crate:
//!
//! * Basis order is `{|00>, |01>, |10>, |11>}` with qubit 1 the left factor,
//!   so index = 2*b1 + b2.
//! * `|0>` is the qubit ground state and carries sigma_z eigenvalue +1, so
//!   `sigma_minus = |0><1|` relaxes `|1> -> |0>` and `J_z|00> = +2|00>`.
//! * Bell-state labels: `|Psi+-> = (|00> +- |11>)/sqrt(2)` and
//!   `|Phi+-> = (|01> +- |10>)/sqrt(2)`. Note that this assignment is the
//!   *opposite* of the most common textbook one. The stabilization target in
//!   this crate is `PhiPlus = (|01> + |10>)/sqrt(2)`: the single-excitation
//!   triplet state, dark under both the `J_z` measurement and the correlated
//!   decay channel `sigma1- - sigma2-`.

use num_complex::Complex;
use thiserror::Error;

pub type C64 = Complex<f64>;

/// `0 + 0i`.
pub const C_ZERO: C64 = Complex::new(0.0, 0.0);
/// `1 + 0i`.
pub const C_ONE: C64 = Complex::new(1.0, 0.0);
/// `0 + 1i`.
pub const C_I: C64 = Complex::new(0.0, 1.0);

const MAX_JACOBI_SWEEPS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum QstateError {
    #[error("matrix is not Hermitian (max |a_ij - conj(a_ji)| = {deviation:.3e})")]
    NonHermitian { deviation: f64 },
    #[error("Jacobi eigensolver failed to converge in {MAX_JACOBI_SWEEPS} sweeps")]
    NoConvergence,
    #[error("matrix has eigenvalue {value:.3e}, below the PSD tolerance")]
    NegativeEigenvalue { value: f64 },
    #[error("density matrix invalid: {reason}")]
    InvalidDensity { reason: String },
    #[error("ket has zero norm; cannot normalize")]
    ZeroNorm,
}

/// Dense complex matrix of dimension 2 or 4, row-major, inline storage.
///
/// The fixed `[C64; 16]` backing keeps the type `Copy` and allocation-free,
/// which matters in the integration loop; a `dim`x`dim` prefix of the array
/// is in use (stride = `dim`).
#[derive(Clone, Copy, Debug)]
pub struct ComplexMatrix {
    dim: usize,
    e: [C64; 16],
}

impl ComplexMatrix {
    /// Zero matrix of dimension `dim` (2 or 4).
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 4, "supported dimensions are 2 and 4");
        ComplexMatrix { dim, e: [C_ZERO; 16] }
    }

    /// Identity matrix of dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, C_ONE);
        }
        m
    }

    /// Build from a row-major slice of `dim*dim` entries.
    pub fn from_entries(dim: usize, entries: &[C64]) -> Self {
        assert_eq!(entries.len(), dim * dim, "entry count must be dim^2");
        let mut m = Self::zeros(dim);
        m.e[..dim * dim].copy_from_slice(entries);
        m
    }

    /// Diagonal matrix from real values.
    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, C64::new(v, 0.0));
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.e[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.e[i * self.dim + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: C64) {
        self.e[i * self.dim + j] += v;
    }

    /// Row-major entries currently in use.
    #[inline]
    pub fn entries(&self) -> &[C64] {
        &self.e[..self.dim * self.dim]
    }

    #[inline]
    pub fn entries_mut(&mut self) -> &mut [C64] {
        let n = self.dim * self.dim;
        &mut self.e[..n]
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, self.at(j, i).conj());
            }
        }
        m
    }

    /// Entrywise complex conjugate (no transpose).
    pub fn conj(&self) -> Self {
        let mut m = *self;
        for v in m.entries_mut() {
            *v = v.conj();
        }
        m
    }

    /// `(M + M†)/2`.
    pub fn hermitized(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, (self.at(i, j) + self.at(j, i).conj()) * 0.5);
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        let mut t = C_ZERO;
        for i in 0..self.dim {
            t += self.at(i, i);
        }
        t
    }

    /// Scale by a real factor.
    pub fn scale(&self, f: f64) -> Self {
        let mut m = *self;
        for v in m.entries_mut() {
            *v *= f;
        }
        m
    }

    /// Max-norm: largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.entries().iter().fold(0.0, |acc, v| acc.max(v.norm()))
    }

    /// Largest deviation from Hermiticity, `max |a_ij - conj(a_ji)|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                dev = dev.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        dev
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Largest entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut d: f64 = 0.0;
        for (a, b) in self.entries().iter().zip(other.entries()) {
            d = d.max((a - b).norm());
        }
        d
    }
}

impl std::ops::Add for ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(mut self, rhs: ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.e.iter_mut().zip(rhs.e.iter()) {
            *a += b;
        }
        self
    }
}

impl std::ops::Sub for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(mut self, rhs: ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.e.iter_mut().zip(rhs.e.iter()) {
            *a -= b;
        }
        self
    }
}

impl std::ops::AddAssign for ComplexMatrix {
    fn add_assign(&mut self, rhs: ComplexMatrix) {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.e.iter_mut().zip(rhs.e.iter()) {
            *a += b;
        }
    }
}

impl std::ops::Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(mut self) -> ComplexMatrix {
        for v in self.e.iter_mut() {
            *v = -*v;
        }
        self
    }
}

impl std::ops::Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    #[inline]
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        let d = self.dim;
        let mut out = ComplexMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = C_ZERO;
                for k in 0..d {
                    acc += self.e[i * d + k] * rhs.e[k * d + j];
                }
                out.e[i * d + j] = acc;
            }
        }
        out
    }
}

impl std::ops::Mul<ComplexMatrix> for C64 {
    type Output = ComplexMatrix;
    fn mul(self, mut rhs: ComplexMatrix) -> ComplexMatrix {
        for v in rhs.e.iter_mut() {
            *v *= self;
        }
        rhs
    }
}

/// `[A, B] = AB - BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    *a * *b - *b * *a
}

/// `{A, B} = AB + BA`.
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    *a * *b + *b * *a
}

/// Kronecker product of two 2x2 matrices; the left factor is qubit 1.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    assert_eq!(a.dim(), 2, "kron expects 2x2 factors");
    assert_eq!(b.dim(), 2, "kron expects 2x2 factors");
    let mut m = ComplexMatrix::zeros(4);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m.set(2 * i + k, 2 * j + l, a.at(i, j) * b.at(k, l));
                }
            }
        }
    }
    m
}

/// Normalized two-qubit pure state, four complex amplitudes in basis order
/// `{|00>, |01>, |10>, |11>}`.
#[derive(Clone, Copy, Debug)]
pub struct Ket {
    a: [C64; 4],
}

impl Ket {
    /// Normalize the given amplitudes; errors when the norm is zero.
    pub fn new(amps: [C64; 4]) -> Result<Self, QstateError> {
        let n2: f64 = amps.iter().map(|v| v.norm_sqr()).sum();
        if n2 <= 0.0 || !n2.is_finite() {
            return Err(QstateError::ZeroNorm);
        }
        let inv = 1.0 / n2.sqrt();
        Ok(Ket { a: amps.map(|v| v * inv) })
    }

    /// Computational basis state `|idx>`, `idx = 2*b1 + b2`.
    pub fn basis(idx: usize) -> Self {
        assert!(idx < 4);
        let mut a = [C_ZERO; 4];
        a[idx] = C_ONE;
        Ket { a }
    }

    /// The product state `|+>|+>` with all four amplitudes `1/2`.
    pub fn plus_plus() -> Self {
        let h = C64::new(0.5, 0.0);
        Ket { a: [h; 4] }
    }

    #[inline]
    pub fn amp(&self, i: usize) -> C64 {
        self.a[i]
    }

    pub fn norm(&self) -> f64 {
        self.a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>` (conjugate-linear in `self`).
    pub fn inner(&self, other: &Ket) -> C64 {
        self.a
            .iter()
            .zip(other.a.iter())
            .map(|(x, y)| x.conj() * y)
            .sum()
    }

    /// Projector `|self><self|`.
    pub fn outer(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                m.set(i, j, self.a[i] * self.a[j].conj());
            }
        }
        m
    }

    /// Matrix-vector product `M|self>`, not renormalized.
    pub fn applied(&self, m: &ComplexMatrix) -> [C64; 4] {
        assert_eq!(m.dim(), 4);
        let mut out = [C_ZERO; 4];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..4 {
                *o += m.at(i, j) * self.a[j];
            }
        }
        out
    }
}

/// Single-qubit operator kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    /// Raising operator `|1><0|`.
    Plus,
    /// Lowering operator `|0><1|`.
    Minus,
}

/// Which qubit a single-qubit operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Qubit {
    One,
    Two,
}

fn pauli_2x2(kind: Pauli) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2);
    match kind {
        Pauli::X => {
            m.set(0, 1, C_ONE);
            m.set(1, 0, C_ONE);
        }
        Pauli::Y => {
            m.set(0, 1, -C_I);
            m.set(1, 0, C_I);
        }
        Pauli::Z => {
            m.set(0, 0, C_ONE);
            m.set(1, 1, -C_ONE);
        }
        Pauli::Plus => {
            m.set(1, 0, C_ONE);
        }
        Pauli::Minus => {
            m.set(0, 1, C_ONE);
        }
    }
    m
}

/// Single-qubit operator embedded in the two-qubit space.
pub fn qubit_op(kind: Pauli, which: Qubit) -> ComplexMatrix {
    let op = pauli_2x2(kind);
    let id = ComplexMatrix::identity(2);
    match which {
        Qubit::One => kron(&op, &id),
        Qubit::Two => kron(&id, &op),
    }
}

/// Collective (two-qubit) operator kinds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Collective {
    /// `sigma1_z + sigma2_z`, the monitored observable.
    Jz,
    /// `sigma1_x + sigma2_x`.
    Jx,
    /// `sigma1_x - sigma2_x`.
    JxBar,
    /// `sigma1_minus - sigma2_minus`, the correlated decay operator that
    /// leaves `|Phi+>` dark.
    LoweringDiff,
    /// `sigma1_minus + sigma2_minus`.
    LoweringSum,
    /// `c1*sigma1_x + c2*sigma2_x`.
    WeightedX { c1: f64, c2: f64 },
}

/// Build a collective operator.
pub fn collective_op(kind: Collective) -> ComplexMatrix {
    match kind {
        Collective::Jz => qubit_op(Pauli::Z, Qubit::One) + qubit_op(Pauli::Z, Qubit::Two),
        Collective::Jx => qubit_op(Pauli::X, Qubit::One) + qubit_op(Pauli::X, Qubit::Two),
        Collective::JxBar => qubit_op(Pauli::X, Qubit::One) - qubit_op(Pauli::X, Qubit::Two),
        Collective::LoweringDiff => {
            qubit_op(Pauli::Minus, Qubit::One) - qubit_op(Pauli::Minus, Qubit::Two)
        }
        Collective::LoweringSum => {
            qubit_op(Pauli::Minus, Qubit::One) + qubit_op(Pauli::Minus, Qubit::Two)
        }
        Collective::WeightedX { c1, c2 } => {
            assert!(c1.is_finite() && c2.is_finite(), "weights must be finite");
            qubit_op(Pauli::X, Qubit::One).scale(c1) + qubit_op(Pauli::X, Qubit::Two).scale(c2)
        }
    }
}

/// Bell-state labels. See the module docs: `Psi` pairs `|00>/|11>`, `Phi`
/// pairs `|01>/|10>`, which is swapped relative to the common convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bell {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
}

/// Construct a Bell state.
pub fn bell_state(which: Bell) -> Ket {
    let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let a = match which {
        Bell::PsiPlus => [r, C_ZERO, C_ZERO, r],
        Bell::PsiMinus => [r, C_ZERO, C_ZERO, -r],
        Bell::PhiPlus => [C_ZERO, r, r, C_ZERO],
        Bell::PhiMinus => [C_ZERO, r, -r, C_ZERO],
    };
    Ket { a }
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues with
/// matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub values: [f64; 4],
    pub vectors: [Ket; 4],
}

// One cyclic Jacobi pass structure shared by the value-only and full solvers.
// Each rotation zeroes one off-diagonal pair (p, q): the pair's phase is
// absorbed into the unitary so the remaining 2x2 problem is real symmetric.
fn jacobi(mut a: ComplexMatrix, want_vectors: bool) -> Result<(ComplexMatrix, ComplexMatrix), QstateError> {
    let d = a.dim();
    let mut v = ComplexMatrix::identity(d);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut off: f64 = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off = off.max(a.at(p, q).norm());
            }
        }
        if off <= 1e-15 * scale {
            return Ok((a, v));
        }
        for p in 0..(d - 1) {
            for q in (p + 1)..d {
                let apq = a.at(p, q);
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let ph_c = phase.conj();
                let app = a.at(p, p).re;
                let aqq = a.at(q, q).re;
                let th = (aqq - app) / (2.0 * r);
                let t = if th >= 0.0 {
                    1.0 / (th + (1.0 + th * th).sqrt())
                } else {
                    -1.0 / (-th + (1.0 + th * th).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // A <- U† A U with U = I except
                // U[p][p]=c, U[p][q]=s, U[q][p]=-s*conj(phase), U[q][q]=c*conj(phase).
                for k in 0..d {
                    let akp = a.at(k, p);
                    let akq = a.at(k, q);
                    a.set(k, p, akp * c - akq * ph_c * s);
                    a.set(k, q, akp * s + akq * ph_c * c);
                }
                for k in 0..d {
                    let apk = a.at(p, k);
                    let aqk = a.at(q, k);
                    a.set(p, k, apk * c - aqk * phase * s);
                    a.set(q, k, apk * s + aqk * phase * c);
                }
                // analytic rotated values; keeps the diagonal exactly real
                a.set(p, p, C64::new(app - t * r, 0.0));
                a.set(q, q, C64::new(aqq + t * r, 0.0));
                a.set(p, q, C_ZERO);
                a.set(q, p, C_ZERO);
                if want_vectors {
                    for k in 0..d {
                        let vkp = v.at(k, p);
                        let vkq = v.at(k, q);
                        v.set(k, p, vkp * c - vkq * ph_c * s);
                        v.set(k, q, vkp * s + vkq * ph_c * c);
                    }
                }
            }
        }
    }
    Err(QstateError::NoConvergence)
}

fn check_hermitian(m: &ComplexMatrix) -> Result<ComplexMatrix, QstateError> {
    let dev = m.hermiticity_deviation();
    if dev > 1e-10 {
        return Err(QstateError::NonHermitian { deviation: dev });
    }
    Ok(m.hermitized())
}

/// Ascending eigenvalues of a 4x4 Hermitian matrix (no eigenvectors).
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<[f64; 4], QstateError> {
    assert_eq!(m.dim(), 4);
    let (a, _) = jacobi(check_hermitian(m)?, false)?;
    let mut vals = [a.at(0, 0).re, a.at(1, 1).re, a.at(2, 2).re, a.at(3, 3).re];
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Full eigendecomposition of a 4x4 Hermitian matrix via cyclic Jacobi
/// rotations. Eigenvalues ascend; eigenvectors are orthonormal and satisfy
/// `M v_k = lambda_k v_k` to roughly machine precision.
pub fn hermitian_eigensystem(m: &ComplexMatrix) -> Result<EigenSystem, QstateError> {
    assert_eq!(m.dim(), 4);
    let (a, v) = jacobi(check_hermitian(m)?, true)?;
    let mut idx = [0usize, 1, 2, 3];
    let diag = [a.at(0, 0).re, a.at(1, 1).re, a.at(2, 2).re, a.at(3, 3).re];
    idx.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = idx.map(|i| diag[i]);
    let vectors = idx.map(|col| Ket {
        a: [v.at(0, col), v.at(1, col), v.at(2, col), v.at(3, col)],
    });
    Ok(EigenSystem { values, vectors })
}

/// Principal square root of a PSD Hermitian matrix.
///
/// Eigenvalues in `[-1e-6, 0)` are treated as roundoff and clipped to zero;
/// anything more negative is a real PSD violation and errors out.
pub fn matrix_sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix, QstateError> {
    let es = hermitian_eigensystem(m)?;
    let mut out = ComplexMatrix::zeros(4);
    for k in 0..4 {
        let lam = es.values[k];
        if lam < -1e-6 {
            return Err(QstateError::NegativeEigenvalue { value: lam });
        }
        let s = lam.max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        let v = &es.vectors[k];
        for i in 0..4 {
            for j in 0..4 {
                out.add_at(i, j, v.a[i] * v.a[j].conj() * s);
            }
        }
    }
    Ok(out)
}

/// Two-qubit density matrix: Hermitian, unit trace, PSD within tolerance.
#[derive(Clone, Copy, Debug)]
pub struct DensityMatrix {
    m: ComplexMatrix,
}

impl DensityMatrix {
    /// Pure state `|psi><psi|`.
    pub fn pure(psi: &Ket) -> Self {
        DensityMatrix { m: psi.outer() }
    }

    /// `I/4`.
    pub fn maximally_mixed() -> Self {
        DensityMatrix {
            m: ComplexMatrix::identity(4).scale(0.25),
        }
    }

    /// Validate and wrap a matrix: Hermitian and unit trace within `tol`,
    /// smallest eigenvalue `>= -tol`.
    pub fn from_matrix(m: ComplexMatrix, tol: f64) -> Result<Self, QstateError> {
        if m.dim() != 4 {
            return Err(QstateError::InvalidDensity {
                reason: "dimension must be 4".into(),
            });
        }
        let dev = m.hermiticity_deviation();
        if dev > tol {
            return Err(QstateError::InvalidDensity {
                reason: format!("not Hermitian (deviation {dev:.3e})"),
            });
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(QstateError::InvalidDensity {
                reason: format!("trace {tr} differs from 1"),
            });
        }
        let h = m.hermitized();
        let min = hermitian_eigenvalues(&h)?[0];
        if min < -tol {
            return Err(QstateError::InvalidDensity {
                reason: format!("eigenvalue {min:.3e} below -tolerance"),
            });
        }
        Ok(DensityMatrix { m: h })
    }

    /// Wrap without validation; the caller guarantees the invariants.
    pub(crate) fn from_matrix_unchecked(m: ComplexMatrix) -> Self {
        DensityMatrix { m }
    }

    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.m.at(i, j)
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> Result<f64, QstateError> {
        Ok(hermitian_eigenvalues(&self.m)?[0])
    }

    /// `Tr[A rho]`.
    pub fn expectation(&self, op: &ComplexMatrix) -> C64 {
        assert_eq!(op.dim(), 4);
        let mut t = C_ZERO;
        for i in 0..4 {
            for k in 0..4 {
                t += op.at(i, k) * self.m.at(k, i);
            }
        }
        t
    }

    /// `Tr[rho^2]`, in `[1/4, 1]` for valid states.
    pub fn purity(&self) -> f64 {
        // Tr[rho^2] = sum |rho_ij|^2 for Hermitian rho
        self.m.entries().iter().map(|v| v.norm_sqr()).sum()
    }

    /// Overlap `<target|rho|target>`, clipped to `[0, 1]`.
    pub fn fidelity_to(&self, target: &Ket) -> f64 {
        let mt = target.applied(&self.m);
        let f: C64 = target
            .a
            .iter()
            .zip(mt.iter())
            .map(|(x, y)| x.conj() * y)
            .sum();
        f.re.clamp(0.0, 1.0)
    }

    /// Wootters concurrence.
    ///
    /// Computed from the spin-flipped state `rho~ = (sy x sy) rho* (sy x sy)`
    /// as `C = max(0, l1 - l2 - l3 - l4)`, the `l_k` being the descending
    /// square roots of the eigenvalues of `sqrt(rho) rho~ sqrt(rho)`.
    ///
    /// Accuracy is about 1e-7, not machine precision: near-zero eigenvalues
    /// of the intermediate matrix carry O(sqrt(eps)) noise through the square
    /// root, and they enter the sum with a minus sign.
    pub fn concurrence(&self) -> Result<f64, QstateError> {
        let sq = matrix_sqrt_psd(&self.m)?;
        let yy = kron(&pauli_2x2(Pauli::Y), &pauli_2x2(Pauli::Y));
        let tilde = yy * self.m.conj() * yy;
        let mm = (sq * tilde * sq).hermitized();
        let vals = hermitian_eigenvalues(&mm)?;
        let l: Vec<f64> = vals.iter().map(|&x| x.max(0.0).sqrt()).collect();
        Ok((l[3] - l[2] - l[1] - l[0]).max(0.0))
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::Rng;

    /// Random full-rank density matrix (normalized G G†, Ginibre sampled).
    pub fn random_rho(rng: &mut impl Rng) -> DensityMatrix {
        let mut g = ComplexMatrix::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                g.set(
                    i,
                    j,
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                );
            }
        }
        let m = g * g.adjoint();
        let tr = m.trace().re;
        DensityMatrix::from_matrix(m.scale(1.0 / tr), 1e-9).expect("valid by construction")
    }

    /// Random normalized pure state.
    pub fn random_ket(rng: &mut impl Rng) -> Ket {
        loop {
            let a = std::array::from_fn(|_| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            if let Ok(k) = Ket::new(a) {
                return k;
            }
        }
    }

    /// Haar-ish random single-qubit unitary from three angles.
    pub fn random_su2(rng: &mut impl Rng) -> ComplexMatrix {
        let th: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let lam: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let (ct, st) = ((th / 2.0).cos(), (th / 2.0).sin());
        let mut u = ComplexMatrix::zeros(2);
        u.set(0, 0, C64::new(ct, 0.0));
        u.set(0, 1, -C64::from_polar(st, lam));
        u.set(1, 0, C64::from_polar(st, phi));
        u.set(1, 1, C64::from_polar(ct, phi + lam));
        u
    }

    pub fn werner(p: f64) -> DensityMatrix {
        let bell = DensityMatrix::pure(&bell_state(Bell::PhiPlus));
        let m = bell.matrix().scale(p) + ComplexMatrix::identity(4).scale((1.0 - p) / 4.0);
        DensityMatrix::from_matrix(m, 1e-9).unwrap()
    }
}
