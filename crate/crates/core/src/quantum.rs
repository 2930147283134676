//! Dense states, operators and Kraus channels over an explicit finite
//! Hilbert dimension.
//!
//! Multi-qubit bases use big-endian ordering: qubit 1 is the most
//! significant tensor factor, so the basis index of `|q1 q2 q3>` is the
//! binary number `q1 q2 q3`.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Default tolerance for identities that hold exactly in finite dimension.
pub const EXACT_TOL: f64 = 1e-10;
/// Default tolerance for identities that only hold up to Fock truncation.
pub const TRUNCATED_TOL: f64 = 1e-6;
/// Default bound on `max |sum K^dag K - I|` for exactly complete channels.
pub const CHANNEL_TOL: f64 = 1e-9;

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn all_finite<'a>(it: impl IntoIterator<Item = &'a C64>) -> bool {
    it.into_iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Kronecker product of two matrices, left factor most significant.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Square complex matrix acting on a `dim`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: DMatrix<C64>,
}

impl Operator {
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        let (rows, cols) = mat.shape();
        if rows != cols || rows == 0 {
            return Err(Error::NotSquare { rows, cols });
        }
        if !all_finite(mat.iter()) {
            return Err(Error::NonFinite("operator"));
        }
        Ok(Self { mat })
    }

    pub(crate) fn from_matrix(mat: DMatrix<C64>) -> Self {
        debug_assert!(mat.is_square());
        Self { mat }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self::from_matrix(DMatrix::from_fn(dim, dim, f))
    }

    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, actual: entries.len() });
        }
        Self::new(DMatrix::from_row_iterator(dim, dim, entries.iter().map(|&x| C64::new(x, 0.0))))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_matrix(DMatrix::zeros(dim, dim))
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn real_diagonal(diag: impl IntoIterator<Item = f64>) -> Self {
        let d: Vec<C64> = diag.into_iter().map(|x| C64::new(x, 0.0)).collect();
        Self::diagonal(&d)
    }

    /// `|i><j|` in dimension `dim`.
    pub fn ket_bra(dim: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(i, j)] = ONE;
        Self::from_matrix(m)
    }

    /// `|a><b|` for arbitrary vectors.
    pub fn outer(a: &StateVector, b: &StateVector) -> Self {
        Self::from_matrix(a.amps.clone() * b.amps.adjoint())
    }

    pub fn pauli_x() -> Self {
        Self::from_real(2, &[0.0, 1.0, 1.0, 0.0]).expect("static")
    }

    pub fn pauli_y() -> Self {
        Self::from_matrix(DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]))
    }

    pub fn pauli_z() -> Self {
        Self::from_real(2, &[1.0, 0.0, 0.0, -1.0]).expect("static")
    }

    pub fn hadamard() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_real(2, &[s, s, s, -s]).expect("static")
    }

    /// `sigma^- = |0><1|`, i.e. `|g><e|` with `|g> = |0>`, `|e> = |1>`.
    pub fn sigma_minus() -> Self {
        Self::ket_bra(2, 0, 1)
    }

    /// Place a single-qubit operator on qubit `site` (0-based, 0 = most
    /// significant) of an `n`-qubit register.
    pub fn on_qubit(single: &Operator, site: usize, n: usize) -> Self {
        assert!(site < n, "qubit index {site} out of range for {n} qubits");
        let mut out = Operator::identity(1);
        for q in 0..n {
            let f = if q == site { single.clone() } else { Operator::identity(2) };
            out = out.tensor(&f);
        }
        out
    }

    /// Permutation unitary of an `n`-qubit register: flip `target` when every
    /// control qubit holds its requested value.
    pub fn controlled_x(n: usize, controls: &[(usize, bool)], target: usize) -> Self {
        let dim = 1usize << n;
        let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1 == 1;
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let fire = controls.iter().all(|&(q, v)| bit(col, q) == v);
            let row = if fire { col ^ (1 << (n - 1 - target)) } else { col };
            m[(row, col)] = ONE;
        }
        Self::from_matrix(m)
    }

    /// CNOT on an `n`-qubit register.
    pub fn cnot(n: usize, control: usize, target: usize) -> Self {
        Self::controlled_x(n, &[(control, true)], target)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn dagger(&self) -> Self {
        Self::from_matrix(self.mat.adjoint())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_matrix(&self.mat * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.mat)
    }

    pub fn distance(&self, other: &Operator) -> f64 {
        max_abs(&(&self.mat - &other.mat))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_abs(&(&self.mat - self.mat.adjoint())) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let n = self.dim();
        max_abs(&(self.mat.adjoint() * &self.mat - DMatrix::<C64>::identity(n, n))) <= tol
    }

    pub fn projector_deviation(&self) -> f64 {
        let herm = max_abs(&(&self.mat - self.mat.adjoint()));
        let idem = max_abs(&(&self.mat * &self.mat - &self.mat));
        herm.max(idem)
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        self.projector_deviation() <= tol
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        assert_eq!(self.dim(), psi.dim(), "operator/state dimension mismatch");
        StateVector { amps: &self.mat * &psi.amps }
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        self * other - other * self
    }

    pub fn anticommutator(&self, other: &Operator) -> Operator {
        self * other + other * self
    }

    /// `<psi|A|psi>` without normalization.
    pub fn expectation(&self, psi: &StateVector) -> C64 {
        psi.inner(&self.apply(psi))
    }

    /// Restriction `P A P` to the range of a projector.
    pub fn sandwich(&self, p: &Operator) -> Operator {
        p * &(self * p)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator::from_matrix(&self.mat * &rhs.mat)
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        &self * &rhs
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        Operator::from_matrix(&self.mat + &rhs.mat)
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        Operator::from_matrix(&self.mat - &rhs.mat)
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

/// Pure state (not necessarily normalized until [`StateVector::normalize`]).
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(amps: DVector<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, actual: 0 });
        }
        if !all_finite(amps.iter()) {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(Self { amps })
    }

    pub fn from_slice(amps: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(amps))
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(DVector::from_iterator(amps.len(), amps.iter().map(|&x| C64::new(x, 0.0))))
    }

    pub fn zeros(dim: usize) -> Self {
        Self { amps: DVector::zeros(dim) }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dim {dim}");
        let mut amps = DVector::zeros(dim);
        amps[index] = ONE;
        Self { amps }
    }

    /// Computational basis state of `bits.len()` qubits, e.g. `&[0, 1, 1]`.
    pub fn qubits(bits: &[u8]) -> Self {
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b & 1));
        Self::basis(1 << bits.len(), idx)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn amplitude(&self, i: usize) -> C64 {
        self.amps[i]
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if n <= f64::MIN_POSITIVE || !n.is_finite() {
            return Err(Error::NotNormalized(n));
        }
        Ok(Self { amps: &self.amps / C64::new(n, 0.0) })
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        assert_eq!(self.dim(), other.dim(), "state dimension mismatch");
        self.amps.dotc(&other.amps)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { amps: &self.amps * s }
    }

    pub fn add(&self, other: &StateVector) -> Self {
        Self { amps: &self.amps + &other.amps }
    }

    pub fn sub(&self, other: &StateVector) -> Self {
        Self { amps: &self.amps - &other.amps }
    }

    /// Linear combination `sum c_i |v_i>`.
    pub fn combination(terms: &[(C64, &StateVector)]) -> Self {
        let dim = terms.first().map(|(_, v)| v.dim()).unwrap_or(0);
        let mut amps = DVector::zeros(dim);
        for (c, v) in terms {
            amps += &v.amps * *c;
        }
        Self { amps }
    }

    pub fn projector(&self) -> Operator {
        Operator::outer(self, self)
    }

    /// `|<self|other>|^2` for normalized inputs.
    pub fn overlap_sq(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Copy in dimension `dim`: zero-padded, or cut off when `dim` is smaller.
    pub fn padded(&self, dim: usize) -> StateVector {
        let n = self.dim().min(dim);
        let mut amps = DVector::zeros(dim);
        amps.rows_mut(0, n).copy_from(&self.amps.rows(0, n));
        StateVector { amps }
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        DensityMatrix::from_pure(self)
    }
}

/// Mixed state: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        Self::new_with_tol(mat, EXACT_TOL)
    }

    pub fn new_with_tol(mat: DMatrix<C64>, tol: f64) -> Result<Self> {
        let op = Operator::new(mat)?;
        if !op.is_hermitian(tol) {
            return Err(Error::InvalidDensityMatrix("not Hermitian".into()));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min_ev = op.hermitian_eigenvalues().first().copied().unwrap_or(0.0);
        if min_ev < -tol {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min_ev:.3e}")));
        }
        Ok(Self { mat: op.into_matrix() })
    }

    pub(crate) fn from_matrix_unchecked(mat: DMatrix<C64>) -> Self {
        Self { mat }
    }

    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        let n2 = psi.norm().powi(2);
        if n2 <= f64::MIN_POSITIVE {
            return Err(Error::NotNormalized(0.0));
        }
        Ok(Self { mat: &psi.amps * psi.amps.adjoint() / C64::new(n2, 0.0) })
    }

    /// Convex mixture `sum p_i |psi_i><psi_i|`.
    pub fn mixture(terms: &[(f64, StateVector)]) -> Result<Self> {
        let dim = terms.first().map(|(_, v)| v.dim()).ok_or(Error::DimensionMismatch { expected: 1, actual: 0 })?;
        let mut mat = DMatrix::zeros(dim, dim);
        for (p, psi) in terms {
            let psi = psi.normalize()?;
            mat += &psi.amps * psi.amps.adjoint() * C64::new(*p, 0.0);
        }
        Self::new(mat)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { mat: DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn as_operator(&self) -> Operator {
        Operator::from_matrix(self.mat.clone())
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    /// `Tr(rho A)`.
    pub fn expectation(&self, op: &Operator) -> C64 {
        assert_eq!(self.dim(), op.dim(), "operator/state dimension mismatch");
        (&self.mat * op.matrix()).trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        Operator::from_matrix(self.mat.clone()).hermitian_eigenvalues()
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs(&(&self.mat - &other.mat))
    }

    /// Conjugation `U rho U^dag` (also valid for non-unitary `U`; no renormalization).
    pub fn conjugate(&self, u: &Operator) -> DensityMatrix {
        let m = u.matrix() * &self.mat * u.matrix().adjoint();
        Self { mat: hermitize(m) }
    }

    /// Trace over the right factor of a `dim_a x dim_b` bipartition.
    pub fn partial_trace_right(&self, dim_a: usize, dim_b: usize) -> Result<DensityMatrix> {
        if dim_a * dim_b != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: dim_a * dim_b });
        }
        let mut out = DMatrix::zeros(dim_a, dim_a);
        for i in 0..dim_a {
            for j in 0..dim_a {
                let mut s = ZERO;
                for k in 0..dim_b {
                    s += self.mat[(i * dim_b + k, j * dim_b + k)];
                }
                out[(i, j)] = s;
            }
        }
        Ok(Self { mat: out })
    }

    /// Trace over the left factor of a `dim_a x dim_b` bipartition.
    pub fn partial_trace_left(&self, dim_a: usize, dim_b: usize) -> Result<DensityMatrix> {
        if dim_a * dim_b != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: dim_a * dim_b });
        }
        let mut out = DMatrix::zeros(dim_b, dim_b);
        for i in 0..dim_b {
            for j in 0..dim_b {
                let mut s = ZERO;
                for k in 0..dim_a {
                    s += self.mat[(k * dim_b + i, k * dim_b + j)];
                }
                out[(i, j)] = s;
            }
        }
        Ok(Self { mat: out })
    }

    /// Embed into a larger space by zero padding (Fock truncation helper).
    pub fn padded(&self, dim: usize) -> DensityMatrix {
        let n = self.dim().min(dim);
        let mut out = DMatrix::zeros(dim, dim);
        out.view_mut((0, 0), (n, n)).copy_from(&self.mat.view((0, 0), (n, n)));
        Self { mat: out }
    }
}

pub(crate) fn hermitize(m: DMatrix<C64>) -> DMatrix<C64> {
    let adj = m.adjoint();
    (m + adj) * C64::new(0.5, 0.0)
}

/// Kronecker product for operators and state vectors.
pub trait Tensor {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for Operator {
    fn tensor(&self, other: &Self) -> Self {
        Operator::from_matrix(kron(&self.mat, &other.mat))
    }
}

impl Tensor for StateVector {
    fn tensor(&self, other: &Self) -> Self {
        let mut amps = DVector::zeros(self.dim() * other.dim());
        for (i, a) in self.amps.iter().enumerate() {
            for (j, b) in other.amps.iter().enumerate() {
                amps[i * other.dim() + j] = a * b;
            }
        }
        StateVector { amps }
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Self {
        DensityMatrix { mat: kron(&self.mat, &other.mat) }
    }
}

/// Kronecker product; `a` is the most significant factor.
pub fn tensor<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// Tensor product of a non-empty list of factors.
pub fn tensor_all<T: Tensor + Clone>(factors: &[T]) -> T {
    let (first, rest) = factors.split_first().expect("at least one factor");
    rest.iter().fold(first.clone(), |acc, f| acc.tensor(f))
}

/// Ordered Kraus operators with a trace-preservation certificate.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    dim: usize,
    ops: Vec<Operator>,
    labels: Vec<String>,
    defect: f64,
    tol: f64,
}

impl KrausChannel {
    /// Builds a channel, requiring `max |sum K^dag K - I| <= 1e-9`.
    pub fn new(ops: Vec<Operator>, labels: Vec<String>) -> Result<Self> {
        Self::with_tolerance(ops, labels, CHANNEL_TOL)
    }

    /// Builds a channel with a caller-declared completeness bound (truncated
    /// bosonic channels).
    pub fn with_tolerance(ops: Vec<Operator>, labels: Vec<String>, tol: f64) -> Result<Self> {
        let dim = ops.first().map(Operator::dim).ok_or(Error::DimensionMismatch { expected: 1, actual: 0 })?;
        if labels.len() != ops.len() {
            return Err(Error::DimensionMismatch { expected: ops.len(), actual: labels.len() });
        }
        if let Some(bad) = ops.iter().find(|k| k.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: bad.dim() });
        }
        let defect = completeness_defect(&ops);
        if defect > tol {
            return Err(Error::NotTracePreserving { defect, tol });
        }
        Ok(Self { dim, ops, labels, defect, tol })
    }

    pub fn from_ops(ops: Vec<Operator>) -> Result<Self> {
        let labels = (0..ops.len()).map(|i| format!("K{i}")).collect();
        Self::new(ops, labels)
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, ops: vec![Operator::identity(dim)], labels: vec!["identity".into()], defect: 0.0, tol: CHANNEL_TOL }
    }

    /// Unitary channel `{U}`.
    pub fn unitary(u: Operator, label: &str) -> Result<Self> {
        Self::new(vec![u], vec![label.to_string()])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ops(&self) -> &[Operator] {
        &self.ops
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// `max |sum K^dag K - I|` measured at construction.
    pub fn completeness_defect(&self) -> f64 {
        self.defect
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Channel `after ∘ self`: Kraus set `{A_j K_i}`, zero products dropped.
    pub fn then(&self, after: &KrausChannel) -> Result<KrausChannel> {
        if self.dim != after.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: after.dim });
        }
        let mut ops = Vec::new();
        let mut labels = Vec::new();
        for (a, la) in after.ops.iter().zip(&after.labels) {
            for (k, lk) in self.ops.iter().zip(&self.labels) {
                let prod = a * k;
                if prod.max_abs() > 0.0 {
                    ops.push(prod);
                    labels.push(format!("{la}*{lk}"));
                }
            }
        }
        Self::with_tolerance(ops, labels, self.tol.max(after.tol) * 2.0 + self.defect + after.defect)
    }

    /// Parallel composition on a tensor-product space.
    pub fn tensor(&self, other: &KrausChannel) -> Result<KrausChannel> {
        let mut ops = Vec::new();
        let mut labels = Vec::new();
        for (a, la) in self.ops.iter().zip(&self.labels) {
            for (b, lb) in other.ops.iter().zip(&other.labels) {
                ops.push(a.tensor(b));
                labels.push(format!("{la}(x){lb}"));
            }
        }
        Self::with_tolerance(ops, labels, self.tol.max(other.tol) * 2.0 + self.defect + other.defect)
    }

    /// Unitary re-mixing `F_k = sum_j u[j, k] K_j` (same channel for unitary `u`).
    pub fn remix(&self, u: &DMatrix<C64>) -> Result<KrausChannel> {
        let n = self.ops.len();
        if u.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, actual: u.nrows() });
        }
        let ops = mix_operators(&self.ops, u);
        let labels = (0..n).map(|k| format!("F{k}")).collect();
        Self::with_tolerance(ops, labels, self.tol.max(CHANNEL_TOL) + self.defect)
    }
}

/// `F_k = sum_j u[j, k] K_j`.
pub fn mix_operators(ops: &[Operator], u: &DMatrix<C64>) -> Vec<Operator> {
    let dim = ops.first().map(Operator::dim).unwrap_or(0);
    (0..u.ncols())
        .map(|k| {
            let mut m = DMatrix::zeros(dim, dim);
            for (j, op) in ops.iter().enumerate() {
                let c = u[(j, k)];
                if c != ZERO {
                    m += op.matrix() * c;
                }
            }
            Operator::from_matrix(m)
        })
        .collect()
}

/// `max |sum K^dag K - I|`.
pub fn completeness_defect(ops: &[Operator]) -> f64 {
    let Some(first) = ops.first() else { return f64::INFINITY };
    let dim = first.dim();
    let mut sum = DMatrix::<C64>::zeros(dim, dim);
    for k in ops {
        sum += k.matrix().adjoint() * k.matrix();
    }
    max_abs(&(sum - DMatrix::identity(dim, dim)))
}

/// `rho' = sum K rho K^dag`, symmetrized to suppress roundoff drift.
pub fn apply_channel(ch: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if ch.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: ch.dim(), actual: rho.dim() });
    }
    if ch.defect > ch.tol {
        return Err(Error::NotTracePreserving { defect: ch.defect, tol: ch.tol });
    }
    let dim = ch.dim();
    let mut out = DMatrix::zeros(dim, dim);
    for k in &ch.ops {
        out += k.matrix() * rho.matrix() * k.matrix().adjoint();
    }
    Ok(DensityMatrix::from_matrix_unchecked(hermitize(out)))
}

/// Outcome of a two-outcome projective measurement `{P, 1-P}`.
#[derive(Clone, Debug)]
pub struct ProjectiveOutcome {
    /// 1 if the state was found in the range of `P`, else 0.
    pub outcome: u8,
    pub post_state: StateVector,
    /// Exact Born probability of outcome 1.
    pub prob_one: f64,
}

impl ProjectiveOutcome {
    pub fn prob_zero(&self) -> f64 {
        1.0 - self.prob_one
    }
}

/// Measures `{P, 1-P}` on `psi`, sampling the branch with `rng`.
pub fn measure_projector<R: Rng + ?Sized>(p: &Operator, psi: &StateVector, rng: &mut R) -> Result<ProjectiveOutcome> {
    measure_projector_with_tol(p, psi, rng, EXACT_TOL)
}

pub fn measure_projector_with_tol<R: Rng + ?Sized>(
    p: &Operator,
    psi: &StateVector,
    rng: &mut R,
    tol: f64,
) -> Result<ProjectiveOutcome> {
    if p.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), actual: psi.dim() });
    }
    let dev = p.projector_deviation();
    if dev > tol {
        return Err(Error::NotProjector(dev));
    }
    let psi = psi.normalize()?;
    let projected = p.apply(&psi);
    let prob_one = projected.norm().powi(2).clamp(0.0, 1.0);
    let outcome = if rng.gen::<f64>() < prob_one { 1 } else { 0 };
    let branch = if outcome == 1 { projected } else { psi.sub(&projected) };
    let branch_prob = if outcome == 1 { prob_one } else { 1.0 - prob_one };
    if branch_prob <= 0.0 {
        return Err(Error::ZeroProbabilityBranch);
    }
    Ok(ProjectiveOutcome { outcome, post_state: branch.normalize()?, prob_one })
}

/// Pure-target fidelity `<psi|rho|psi>`.
pub fn fidelity(rho: &DensityMatrix, psi: &StateVector) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), actual: psi.dim() });
    }
    let psi = psi.normalize()?;
    let v = psi.amps.dotc(&(rho.matrix() * &psi.amps));
    Ok(v.re.clamp(0.0, 1.0))
}

/// Trace distance `(1/2) ||rho - sigma||_1`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), actual: b.dim() });
    }
    let diff = Operator::from_matrix(a.matrix() - b.matrix());
    Ok(0.5 * diff.hermitian_eigenvalues().iter().map(|x| x.abs()).sum::<f64>())
}

/// Schmidt coefficients (descending singular values) of a bipartite pure state.
pub fn schmidt_coefficients(psi: &StateVector, dim_a: usize, dim_b: usize) -> Result<Vec<f64>> {
    if dim_a * dim_b != psi.dim() {
        return Err(Error::DimensionMismatch { expected: psi.dim(), actual: dim_a * dim_b });
    }
    let m = DMatrix::from_fn(dim_a, dim_b, |i, j| psi.amps[i * dim_b + j]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Orthonormal completion of `basis` (assumed orthonormal) by Gram-Schmidt over
/// the canonical basis vectors in index order.
pub fn complete_basis(basis: &[DVector<C64>], dim: usize) -> Vec<DVector<C64>> {
    let mut all: Vec<DVector<C64>> = basis.to_vec();
    let mut extra = Vec::new();
    for k in 0..dim {
        if all.len() == dim {
            break;
        }
        let mut v = DVector::<C64>::zeros(dim);
        v[k] = ONE;
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for b in &all {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let n = v.norm();
        if n > 1e-6 {
            v /= C64::new(n, 0.0);
            all.push(v.clone());
            extra.push(v);
        }
    }
    extra
}

fn orthonormality_deviation(vs: &[&StateVector]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in vs.iter().enumerate() {
        for (j, b) in vs.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.inner(b) - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Unitary `U` with `U source_i = target_i`; the orthogonal complements are
/// paired through Gram-Schmidt completions over the canonical basis.
pub fn unitary_rotation_from_basis_pairs(pairs: &[(StateVector, StateVector)]) -> Result<Operator> {
    unitary_rotation_from_basis_pairs_with_tol(pairs, EXACT_TOL)
}

pub fn unitary_rotation_from_basis_pairs_with_tol(pairs: &[(StateVector, StateVector)], tol: f64) -> Result<Operator> {
    let dim = pairs.first().map(|(s, _)| s.dim()).ok_or(Error::DimensionMismatch { expected: 1, actual: 0 })?;
    for (s, t) in pairs {
        if s.dim() != dim || t.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: s.dim().max(t.dim()) });
        }
    }
    let sources: Vec<&StateVector> = pairs.iter().map(|(s, _)| s).collect();
    let targets: Vec<&StateVector> = pairs.iter().map(|(_, t)| t).collect();
    let dev = orthonormality_deviation(&sources).max(orthonormality_deviation(&targets));
    if dev > tol {
        return Err(Error::NotOrthonormal(dev));
    }
    let src: Vec<DVector<C64>> = sources.iter().map(|s| s.amps.clone()).collect();
    let tgt: Vec<DVector<C64>> = targets.iter().map(|t| t.amps.clone()).collect();
    let src_rest = complete_basis(&src, dim);
    let tgt_rest = complete_basis(&tgt, dim);
    let mut m = DMatrix::zeros(dim, dim);
    for (s, t) in src.iter().chain(&src_rest).zip(tgt.iter().chain(&tgt_rest)) {
        m += t * s.adjoint();
    }
    Ok(Operator::from_matrix(m))
}

/// The six cardinal states `|0>, |1>, |+>, |->, |+i>, |-i>` of a logical qubit
/// spanned by `zero` and `one`.
pub fn cardinal_states(zero: &StateVector, one: &StateVector) -> Vec<StateVector> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r = |x: f64| C64::new(x, 0.0);
    vec![
        zero.clone(),
        one.clone(),
        StateVector::combination(&[(r(s), zero), (r(s), one)]),
        StateVector::combination(&[(r(s), zero), (r(-s), one)]),
        StateVector::combination(&[(r(s), zero), (C64::new(0.0, s), one)]),
        StateVector::combination(&[(r(s), zero), (C64::new(0.0, -s), one)]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn tensor_identity_and_basis_ordering() {
        let i4 = Operator::identity(2).tensor(&Operator::identity(2));
        assert!(i4.distance(&Operator::identity(4)) == 0.0);
        let v = StateVector::basis(2, 0).tensor(&StateVector::basis(2, 1));
        assert_eq!(v, StateVector::basis(4, 1));
        assert_eq!(StateVector::qubits(&[0, 1]), StateVector::basis(4, 1));
    }

    #[test]
    fn zz_on_01_flips_sign() {
        let zz = Operator::pauli_z().tensor(&Operator::pauli_z());
        let out = zz.apply(&StateVector::qubits(&[0, 1]));
        assert_eq!(out, StateVector::qubits(&[0, 1]).scale(c(-1.0)));
    }

    #[test]
    fn apply_channel_examples() {
        let rho = DensityMatrix::from_pure(&StateVector::basis(2, 0)).unwrap();
        let id = KrausChannel::identity(2);
        assert!(apply_channel(&id, &rho).unwrap().max_abs_diff(&rho) < 1e-15);

        let flip = KrausChannel::from_ops(vec![Operator::identity(2).scale_real(0.0), Operator::pauli_x()]).unwrap();
        let out = apply_channel(&flip, &rho).unwrap();
        assert!((out.entry(1, 1).re - 1.0).abs() < 1e-15);

        // amplitude damping: |e> = |1> decays with probability 0.25
        let p: f64 = 0.25;
        let k_minus = Operator::sigma_minus().scale_real(p.sqrt());
        let k_zero = Operator::real_diagonal([1.0, (1.0 - p).sqrt()]);
        let ad = KrausChannel::new(vec![k_zero, k_minus], vec!["no-jump".into(), "decay".into()]).unwrap();
        let excited = DensityMatrix::from_pure(&StateVector::basis(2, 1)).unwrap();
        let out = apply_channel(&ad, &excited).unwrap();
        assert!((out.entry(0, 0).re - 0.25).abs() < 1e-15);
        assert!((out.entry(1, 1).re - 0.75).abs() < 1e-15);
    }

    #[test]
    fn channel_rejects_incomplete_ops() {
        let err = KrausChannel::from_ops(vec![Operator::pauli_x().scale_real(0.5)]).unwrap_err();
        assert!(matches!(err, Error::NotTracePreserving { .. }));
        let rho = DensityMatrix::maximally_mixed(4);
        let err = apply_channel(&KrausChannel::identity(2), &rho).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn measure_projector_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p0 = Operator::ket_bra(2, 0, 0);
        let out = measure_projector(&p0, &StateVector::basis(2, 0), &mut rng).unwrap();
        assert_eq!(out.outcome, 1);
        assert_eq!(out.prob_one, 1.0);

        let zz = Operator::pauli_z().tensor(&Operator::pauli_z());
        let proj = (Operator::identity(4) + zz).scale_real(0.5);
        let bell = StateVector::from_real(&[std::f64::consts::FRAC_1_SQRT_2, 0.0, 0.0, std::f64::consts::FRAC_1_SQRT_2])
            .unwrap();
        let out = measure_projector(&proj, &bell, &mut rng).unwrap();
        assert_eq!(out.outcome, 1);
        assert!((out.prob_one - 1.0).abs() < 1e-15);
        assert!((out.post_state.overlap_sq(&bell) - 1.0).abs() < 1e-15);

        let out = measure_projector(&proj, &StateVector::qubits(&[0, 1]), &mut rng).unwrap();
        assert_eq!(out.outcome, 0);
        assert_eq!(out.prob_one, 0.0);
        assert!((out.prob_one + out.prob_zero() - 1.0).abs() < 1e-12);

        let not_proj = Operator::pauli_x();
        assert!(matches!(
            measure_projector(&not_proj, &StateVector::basis(2, 0), &mut rng),
            Err(Error::NotProjector(_))
        ));
    }

    #[test]
    fn fidelity_examples() {
        let psi = StateVector::from_slice(&[c(0.6), C64::new(0.0, 0.8)]).unwrap();
        let rho = psi.to_density().unwrap();
        assert!((fidelity(&rho, &psi).unwrap() - 1.0).abs() < 1e-15);
        assert!((fidelity(&DensityMatrix::maximally_mixed(2), &psi).unwrap() - 0.5).abs() < 1e-15);

        let p: f64 = 0.1;
        let bf = KrausChannel::from_ops(vec![
            Operator::identity(2).scale_real((1.0 - p).sqrt()),
            Operator::pauli_x().scale_real(p.sqrt()),
        ])
        .unwrap();
        let zero = StateVector::basis(2, 0);
        let out = apply_channel(&bf, &zero.to_density().unwrap()).unwrap();
        assert!((fidelity(&out, &zero).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn basis_pair_rotation_examples() {
        let u = unitary_rotation_from_basis_pairs(&[(StateVector::basis(2, 0), StateVector::basis(2, 0))]).unwrap();
        assert!(u.distance(&Operator::identity(2)) < 1e-15);

        let u = unitary_rotation_from_basis_pairs(&[
            (StateVector::basis(2, 0), StateVector::basis(2, 1)),
            (StateVector::basis(2, 1), StateVector::basis(2, 0)),
        ])
        .unwrap();
        assert!(u.distance(&Operator::pauli_x()) < 1e-15);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let target = StateVector::from_real(&[s, 0.0, 0.0, 0.0, s]).unwrap();
        let pairs = vec![
            (StateVector::basis(5, 3), target.clone()),
            (StateVector::basis(5, 1), StateVector::basis(5, 2)),
        ];
        let u = unitary_rotation_from_basis_pairs(&pairs).unwrap();
        assert!(u.is_unitary(1e-12));
        for (src, tgt) in &pairs {
            assert!(u.apply(src).sub(tgt).norm() < 1e-12);
        }

        let bad = vec![
            (StateVector::basis(2, 0), StateVector::basis(2, 0)),
            (StateVector::basis(2, 0), StateVector::basis(2, 1)),
        ];
        assert!(matches!(unitary_rotation_from_basis_pairs(&bad), Err(Error::NotOrthonormal(_))));
    }

    #[test]
    fn predicates() {
        assert!(Operator::hadamard().is_unitary(1e-10));
        assert!(Operator::pauli_y().is_hermitian(1e-15));
        assert!(Operator::ket_bra(3, 1, 1).is_projector(1e-15));
        assert!(!Operator::sigma_minus().is_projector(1e-3));
        assert!(Operator::cnot(2, 0, 1).is_unitary(1e-15));
    }

    #[test]
    fn partial_trace_of_product() {
        let a = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let b = StateVector::basis(3, 2);
        let rho = a.tensor(&b).to_density().unwrap();
        let ra = rho.partial_trace_right(2, 3).unwrap();
        assert!(ra.max_abs_diff(&a.to_density().unwrap()) < 1e-15);
        let rb = rho.partial_trace_left(2, 3).unwrap();
        assert!(rb.max_abs_diff(&b.to_density().unwrap()) < 1e-15);
        let sc = schmidt_coefficients(&a.tensor(&b), 2, 3).unwrap();
        assert!((sc[0] - 1.0).abs() < 1e-12 && sc[1].abs() < 1e-12);
    }

    #[test]
    fn density_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.0), c(0.0), c(0.6)]);
        assert!(DensityMatrix::new(bad).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[c(1.2), c(0.0), c(0.0), c(-0.2)]);
        assert!(DensityMatrix::new(neg).is_err());
        assert!(Operator::new(DMatrix::from_element(2, 2, C64::new(f64::NAN, 0.0))).is_err());
    }
}
