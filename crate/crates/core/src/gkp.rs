//! Phase-space displacements and square-lattice GKP codes.
//!
//! `T(V) = exp(i(dp x - dx p))` moves a state by `+dx` in position and `+dp`
//! in momentum. Two displacements compose as
//! `T(U) T(V) = T(U + V) exp((i/2) V^T Omega U)` with `Omega = [[0, 1], [-1, 0]]`,
//! so they commute exactly when `V^T Omega U` is a multiple of `2 pi`.
//!
//! Truncated displacements are built from one diagonalization of the
//! truncated position operator, `x = O diag(lambda) O^T`, and the rotation
//! `exp(i theta n) x exp(-i theta n) = x cos(theta) + p sin(theta)`. The
//! result is the exact exponential of the truncated generator and is unitary
//! to machine precision; the only truncation effect is leakage into the top
//! Fock levels, which is guarded.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::bosonic::{FockSpace, LEAKAGE_TOL};
use crate::error::{Error, Result};
use crate::quantum::{Operator, StateVector, C64, ONE, ZERO};

/// Lattice constant of the square GKP code, `2 sqrt(pi)`.
pub fn lattice_constant() -> f64 {
    2.0 * PI.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseVector {
    pub dx: f64,
    pub dp: f64,
}

impl PhaseVector {
    pub const ZERO: PhaseVector = PhaseVector { dx: 0.0, dp: 0.0 };

    pub fn new(dx: f64, dp: f64) -> Self {
        Self { dx, dp }
    }

    /// Phase-space vector of the coherent displacement `D(alpha)`.
    pub fn from_alpha(alpha: C64) -> Self {
        Self { dx: 2f64.sqrt() * alpha.re, dp: 2f64.sqrt() * alpha.im }
    }

    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dp)
    }

    /// `self^T Omega other = self.dx * other.dp - self.dp * other.dx`.
    pub fn symplectic(&self, other: &PhaseVector) -> f64 {
        self.dx * other.dp - self.dp * other.dx
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dp.is_finite()
    }
}

impl Add for PhaseVector {
    type Output = PhaseVector;
    fn add(self, o: PhaseVector) -> PhaseVector {
        PhaseVector::new(self.dx + o.dx, self.dp + o.dp)
    }
}

impl Sub for PhaseVector {
    type Output = PhaseVector;
    fn sub(self, o: PhaseVector) -> PhaseVector {
        PhaseVector::new(self.dx - o.dx, self.dp - o.dp)
    }
}

impl Neg for PhaseVector {
    type Output = PhaseVector;
    fn neg(self) -> PhaseVector {
        PhaseVector::new(-self.dx, -self.dp)
    }
}

impl Mul<f64> for PhaseVector {
    type Output = PhaseVector;
    fn mul(self, s: f64) -> PhaseVector {
        PhaseVector::new(self.dx * s, self.dp * s)
    }
}

/// `T(U) T(V) = T(U + V) * composition_phase(U, V)`.
pub fn composition_phase(u: PhaseVector, v: PhaseVector) -> C64 {
    C64::from_polar(1.0, 0.5 * v.symplectic(&u))
}

/// `T(U) T(V) = commutation_phase(U, V) * T(V) T(U)`.
pub fn commutation_phase(u: PhaseVector, v: PhaseVector) -> C64 {
    C64::from_polar(1.0, v.symplectic(&u))
}

/// The operator `phase * T(v)`, multiplied symbolically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Displacement {
    pub v: PhaseVector,
    #[serde(serialize_with = "serialize_c64")]
    pub phase: C64,
}

fn serialize_c64<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

impl Displacement {
    pub fn new(v: PhaseVector) -> Self {
        Self { v, phase: ONE }
    }

    pub fn with_phase(v: PhaseVector, phase: C64) -> Self {
        Self { v, phase }
    }

    /// `self * other`.
    pub fn compose(&self, other: &Displacement) -> Displacement {
        Displacement { v: self.v + other.v, phase: self.phase * other.phase * composition_phase(self.v, other.v) }
    }

    pub fn dagger(&self) -> Displacement {
        Displacement { v: -self.v, phase: self.phase.conj() }
    }

    /// `c` with `self * other = c * other * self`.
    pub fn commutation_with(&self, other: &Displacement) -> C64 {
        commutation_phase(self.v, other.v)
    }

    pub fn matrix(&self, d: &Displacer) -> Result<Operator> {
        Ok(d.operator(self.v)?.scale(self.phase))
    }
}

/// Stabilizers and logical Paulis of the square GKP code.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GkpPauliFrame {
    /// `exp(-i 2 sqrt(pi) p)`, a position translation by one lattice constant.
    pub s_x: Displacement,
    /// `exp(+i 2 sqrt(pi) x)`.
    pub s_p: Displacement,
    pub x_l: Displacement,
    pub z_l: Displacement,
    /// `Y_L = i X_L Z_L`, which works out to `T(sqrt(pi), sqrt(pi))` with unit phase.
    pub y_l: Displacement,
}

pub fn gkp_pauli_frame() -> GkpPauliFrame {
    let l = lattice_constant();
    let h = 0.5 * l;
    let x_l = Displacement::new(PhaseVector::new(h, 0.0));
    let z_l = Displacement::new(PhaseVector::new(0.0, h));
    let xz = x_l.compose(&z_l);
    let y_l = Displacement::with_phase(xz.v, xz.phase * C64::new(0.0, 1.0));
    GkpPauliFrame {
        s_x: Displacement::new(PhaseVector::new(l, 0.0)),
        s_p: Displacement::new(PhaseVector::new(0.0, l)),
        x_l,
        z_l,
        y_l,
    }
}

/// Displacement operators in a fixed truncated Fock space.
#[derive(Clone, Debug)]
pub struct Displacer {
    dim: usize,
    /// Columns are eigenvectors of the truncated position operator.
    vecs: DMatrix<f64>,
    vals: DVector<f64>,
}

impl Displacer {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!("Fock dimension {dim} < 2")));
        }
        let mut x = DMatrix::<f64>::zeros(dim, dim);
        for n in 1..dim {
            let v = (n as f64 / 2.0).sqrt();
            x[(n - 1, n)] = v;
            x[(n, n - 1)] = v;
        }
        let eig = SymmetricEigen::new(x);
        Ok(Self { dim, vecs: eig.eigenvectors, vals: eig.eigenvalues })
    }

    pub fn for_space(fs: &FockSpace) -> Result<Self> {
        Self::new(fs.dim())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(theta, r)` with `dp x - dx p = r (x cos(theta) + p sin(theta))`.
    fn polar(v: PhaseVector) -> (f64, f64) {
        let r = v.norm();
        if r == 0.0 {
            return (0.0, 0.0);
        }
        ((-v.dx).atan2(v.dp), r)
    }

    /// Dense `T(v)`. Fails when the displaced vacuum reaches the top level.
    pub fn operator(&self, v: PhaseVector) -> Result<Operator> {
        self.check_vector(v)?;
        let vac = self.apply_raw(v, &StateVector::basis(self.dim, 0));
        self.guard(&vac, "displaced vacuum")?;
        Ok(self.operator_unchecked(v))
    }

    pub fn operator_unchecked(&self, v: PhaseVector) -> Operator {
        let (theta, r) = Self::polar(v);
        let d = self.dim;
        let phases: Vec<C64> = self.vals.iter().map(|&l| C64::from_polar(1.0, r * l)).collect();
        let o = self.vecs.map(|e| C64::new(e, 0.0));
        let mut scaled = o.clone();
        for (k, ph) in phases.iter().enumerate() {
            for j in 0..d {
                scaled[(j, k)] *= ph;
            }
        }
        let mut m = scaled * o.transpose();
        if theta != 0.0 {
            for j in 0..d {
                for k in 0..d {
                    m[(j, k)] *= C64::from_polar(1.0, theta * (j as f64 - k as f64));
                }
            }
        }
        Operator::from_matrix(m)
    }

    /// `T(v) |psi>` in `O(dim^2)`. Shorter inputs are zero-padded; the output
    /// is guarded against leakage into the top Fock level.
    pub fn apply(&self, v: PhaseVector, psi: &StateVector) -> Result<StateVector> {
        self.check_vector(v)?;
        if psi.dim() > self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: psi.dim() });
        }
        let out = self.apply_raw(v, &psi.padded(self.dim));
        self.guard(&out, "displaced state")?;
        Ok(out)
    }

    fn apply_raw(&self, v: PhaseVector, psi: &StateVector) -> StateVector {
        let (theta, r) = Self::polar(v);
        let a = psi.amplitudes();
        let rot = |k: usize, sign: f64| C64::from_polar(1.0, sign * theta * k as f64);
        let y: Vec<C64> = (0..self.dim).map(|k| a[k] * rot(k, -1.0)).collect();
        let yr = DVector::from_iterator(self.dim, y.iter().map(|z| z.re));
        let yi = DVector::from_iterator(self.dim, y.iter().map(|z| z.im));
        let zr = self.vecs.tr_mul(&yr);
        let zi = self.vecs.tr_mul(&yi);
        let mut wr = DVector::zeros(self.dim);
        let mut wi = DVector::zeros(self.dim);
        for k in 0..self.dim {
            let z = C64::new(zr[k], zi[k]) * C64::from_polar(1.0, r * self.vals[k]);
            wr[k] = z.re;
            wi[k] = z.im;
        }
        let ur = &self.vecs * wr;
        let ui = &self.vecs * wi;
        StateVector::new(DVector::from_fn(self.dim, |k, _| C64::new(ur[k], ui[k]) * rot(k, 1.0)))
            .expect("displacement of a valid state is finite")
    }

    fn check_vector(&self, v: PhaseVector) -> Result<()> {
        if v.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("phase vector"))
        }
    }

    fn guard(&self, psi: &StateVector, what: &str) -> Result<()> {
        let n2 = psi.norm().powi(2).max(f64::MIN_POSITIVE);
        let top = psi.amplitude(self.dim - 1).norm_sqr() / n2;
        if top >= LEAKAGE_TOL {
            return Err(Error::Leakage(format!("{what} has weight {top:.3e} in Fock level {}", self.dim - 1)));
        }
        Ok(())
    }
}

/// Normalized Hermite functions `h_0(x) .. h_{n-1}(x)` (oscillator
/// eigenfunctions in position representation). The recurrence is rescaled
/// on the fly so large `|x|` neither overflows nor underflows early.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    // values are stored as h * exp(-log_scale)
    let mut log_scale = -0.5 * x * x;
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    out[0] = cur * log_scale.exp();
    for k in 1..n {
        let next = if k == 1 {
            2f64.sqrt() * x * cur
        } else {
            (2.0 / k as f64).sqrt() * x * cur - ((k as f64 - 1.0) / k as f64).sqrt() * prev
        };
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            cur *= 1e-150;
            prev *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
        out[k] = cur * log_scale.exp();
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GkpParams {
    /// Envelope `Lambda` in `exp(-Lambda n)`.
    pub lambda: f64,
    /// Seed squeezing `r`: each comb tooth has position variance `exp(-2r)/2`.
    pub squeeze: f64,
    /// Comb half-width: teeth `s = -comb ..= comb`.
    pub comb: usize,
    pub fock_dim: usize,
    /// Dimension used for displacements acting on the states.
    pub work_dim: usize,
}

impl Default for GkpParams {
    fn default() -> Self {
        Self { lambda: 0.025, squeeze: 4.0, comb: 6, fock_dim: 350, work_dim: 500 }
    }
}

impl GkpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("envelope {} must be >= 0", self.lambda)));
        }
        if !(self.squeeze.is_finite() && self.squeeze >= 0.0) {
            return Err(Error::InvalidParameter(format!("squeezing {} must be >= 0", self.squeeze)));
        }
        if self.comb > 16 {
            return Err(Error::InvalidParameter(format!("comb half-width {} > 16", self.comb)));
        }
        if self.fock_dim < 2 || self.work_dim < self.fock_dim {
            return Err(Error::InvalidParameter(format!(
                "need 2 <= fock_dim ({}) <= work_dim ({})",
                self.fock_dim, self.work_dim
            )));
        }
        Ok(())
    }

    /// Dimension of the Hermite expansion of the seed comb.
    fn basis_dim(&self) -> usize {
        self.work_dim.max(2 * self.fock_dim)
    }

    fn tooth_width(&self) -> f64 {
        (-self.squeeze).exp()
    }
}

/// Hermite coefficients `c_n = int h_n(x) g(x) dx` of a function that is
/// negligible farther than `12 width` from every center.
fn project(g: impl Fn(f64) -> C64, centers: &[f64], width: f64, nmax: usize) -> DVector<C64> {
    let reach = 12.0 * width;
    let h = (width / 16.0).min(0.02);
    let lo = centers.iter().copied().fold(f64::INFINITY, f64::min) - reach;
    let hi = centers.iter().copied().fold(f64::NEG_INFINITY, f64::max) + reach;
    let steps = ((hi - lo) / h).ceil() as usize;
    let mut c = DVector::<C64>::zeros(nmax);
    for i in 0..=steps {
        let x = lo + i as f64 * h;
        if !centers.iter().any(|&m| (x - m).abs() <= reach) {
            continue;
        }
        let gx = g(x) * h;
        if gx == ZERO {
            continue;
        }
        for (n, hn) in hermite_functions(nmax, x).into_iter().enumerate() {
            c[n] += gx * hn;
        }
    }
    c
}

fn tooth_centers(first: i64, last: i64, mu: u8) -> Vec<f64> {
    (first..=last).map(|s| (2 * s + i64::from(mu)) as f64 * PI.sqrt()).collect()
}

fn comb_function(centers: Vec<f64>, width: f64) -> impl Fn(f64) -> C64 {
    let a = 0.5 / (width * width);
    move |x| C64::new(centers.iter().map(|&m| (-(x - m).powi(2) * a).exp()).sum(), 0.0)
}

fn envelope(c: &mut DVector<C64>, lambda: f64) {
    for (n, z) in c.iter_mut().enumerate() {
        *z *= (-lambda * n as f64).exp();
    }
}

fn check_mu(mu: u8) -> Result<()> {
    if mu > 1 {
        return Err(Error::InvalidParameter(format!("logical value {mu} is not 0 or 1")));
    }
    Ok(())
}

fn seed_comb(gp: &GkpParams, mu: u8) -> DVector<C64> {
    let s = gp.comb as i64;
    let centers = tooth_centers(-s, s, mu);
    let width = gp.tooth_width();
    project(comb_function(centers.clone(), width), &centers, width, gp.basis_dim())
}

#[derive(Clone, Debug)]
pub struct GkpState {
    pub mu: u8,
    /// Normalized state in `fock_dim`.
    pub state: StateVector,
    /// Weight above `fock_dim` before truncation.
    pub leakage: f64,
}

/// `exp(-Lambda n) sum_s T((2s + mu) sqrt(pi), 0) S(r)|0>`, normalized and
/// truncated to `fock_dim`.
pub fn make_gkp_state(gp: &GkpParams, mu: u8) -> Result<GkpState> {
    gp.validate()?;
    check_mu(mu)?;
    let mut c = seed_comb(gp, mu);
    envelope(&mut c, gp.lambda);
    let total = c.norm_squared();
    if !(total.is_finite() && total > 1e-300) {
        return Err(Error::InvalidParameter("finite-energy comb has zero norm".into()));
    }
    let kept: f64 = c.rows(0, gp.fock_dim).norm_squared();
    let leakage = (1.0 - kept / total).max(0.0);
    if leakage >= 1e-6 {
        return Err(Error::Leakage(format!("GKP state leaks {leakage:.3e} above Fock level {}", gp.fock_dim)));
    }
    let state = StateVector::new(c.rows(0, gp.fock_dim).into_owned())?.normalize()?;
    FockSpace::new(gp.fock_dim)?.check_leakage(&state)?;
    Ok(GkpState { mu, state, leakage })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StabilizerResidual {
    /// `||S_x^Lambda psi - psi||`; set by the missing comb teeth at the edges.
    pub residual_x: f64,
    /// `||S_p^Lambda psi - psi||`; set by the finite squeezing of the teeth.
    pub residual_p: f64,
}

impl StabilizerResidual {
    pub fn max(&self) -> f64 {
        self.residual_x.max(self.residual_p)
    }
}

/// Residuals of the similarity-transformed stabilizers
/// `S^Lambda = exp(-Lambda n) S exp(Lambda n)`. Because
/// `S^Lambda exp(-Lambda n)|comb> = exp(-Lambda n) S |comb>`, the ideal
/// stabilizers act on the unenveloped comb directly in position space.
pub fn finite_energy_stabilizer_check(gp: &GkpParams, mu: u8) -> Result<StabilizerResidual> {
    gp.validate()?;
    check_mu(mu)?;
    let s = gp.comb as i64;
    let width = gp.tooth_width();
    let nmax = gp.basis_dim();
    let l = lattice_constant();

    let mut c = seed_comb(gp, mu);
    let shifted_centers = tooth_centers(-s + 1, s + 1, mu);
    let mut cx = project(comb_function(shifted_centers.clone(), width), &shifted_centers, width, nmax);
    let centers = tooth_centers(-s, s, mu);
    let comb = comb_function(centers.clone(), width);
    let mut cp = project(|x| comb(x) * C64::from_polar(1.0, l * x), &centers, width, nmax);
    for v in [&mut c, &mut cx, &mut cp] {
        envelope(v, gp.lambda);
    }
    let norm = c.norm();
    if !(norm.is_finite() && norm > 1e-150) {
        return Err(Error::InvalidParameter("finite-energy comb has zero norm".into()));
    }
    Ok(StabilizerResidual { residual_x: (&cx - &c).norm() / norm, residual_p: (&cp - &c).norm() / norm })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GkpStabilizer {
    Sx,
    Sp,
}

impl GkpStabilizer {
    pub fn vector(self) -> PhaseVector {
        match self {
            GkpStabilizer::Sx => PhaseVector::new(lattice_constant(), 0.0),
            GkpStabilizer::Sp => PhaseVector::new(0.0, lattice_constant()),
        }
    }
}

/// Expectation of a stabilizer and the shift it implies.
///
/// A shift `T(d, 0)` multiplies `<S_p>` by `exp(+i 2 sqrt(pi) d)` and leaves
/// `<S_x>` alone; a shift `T(0, d)` multiplies `<S_x>` by
/// `exp(-i 2 sqrt(pi) d)`. So `S_p` reads out position errors and `S_x`
/// reads out momentum errors:
///
/// | stabilizer | estimate                        |
/// |------------|---------------------------------|
/// | `S_p`      | `dx = +arg<S_p> / (2 sqrt(pi))` |
/// | `S_x`      | `dp = -arg<S_x> / (2 sqrt(pi))` |
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GkpSyndrome {
    pub stabilizer: GkpStabilizer,
    #[serde(serialize_with = "serialize_c64")]
    pub value: C64,
    /// Estimated shift, reduced to `(-sqrt(pi)/2, sqrt(pi)/2]`.
    pub shift: f64,
    /// False when `|<S>| < 0.1`.
    pub reliable: bool,
}

#[derive(Clone, Debug)]
pub struct GkpCorrection {
    pub state: StateVector,
    pub dx: f64,
    pub dp: f64,
    pub reliable: bool,
}

/// A finite-energy GKP qubit with displacements in `work_dim`.
#[derive(Clone, Debug)]
pub struct GkpCode {
    params: GkpParams,
    displacer: Displacer,
    zero: GkpState,
    one: GkpState,
}

impl GkpCode {
    pub fn new(params: GkpParams) -> Result<Self> {
        let zero = make_gkp_state(&params, 0)?;
        let one = make_gkp_state(&params, 1)?;
        Ok(Self { params, displacer: Displacer::new(params.work_dim)?, zero, one })
    }

    pub fn params(&self) -> &GkpParams {
        &self.params
    }

    pub fn displacer(&self) -> &Displacer {
        &self.displacer
    }

    pub fn codeword(&self, mu: u8) -> &GkpState {
        if mu == 0 {
            &self.zero
        } else {
            &self.one
        }
    }

    /// Codeword `mu` embedded in `work_dim`.
    pub fn embedded(&self, mu: u8) -> StateVector {
        self.codeword(mu).state.padded(self.params.work_dim)
    }

    pub fn displace(&self, psi: &StateVector, v: PhaseVector) -> Result<StateVector> {
        self.displacer.apply(v, psi)
    }

    pub fn expectation(&self, psi: &StateVector, stab: GkpStabilizer) -> Result<C64> {
        let psi = psi.padded(self.params.work_dim);
        Ok(psi.inner(&self.displacer.apply(stab.vector(), &psi)?))
    }

    pub fn syndrome_phase(&self, psi: &StateVector, stab: GkpStabilizer) -> Result<GkpSyndrome> {
        let value = self.expectation(psi, stab)?;
        let arg = value.arg() / lattice_constant();
        let shift = match stab {
            GkpStabilizer::Sp => arg,
            GkpStabilizer::Sx => -arg,
        };
        Ok(GkpSyndrome { stabilizer: stab, value, shift, reliable: value.norm() >= 0.1 })
    }

    /// Shift-back correction: `T(-dx, 0)` then `T(0, -dp)`.
    pub fn correct_displacement(&self, psi: &StateVector) -> Result<GkpCorrection> {
        let sx = self.syndrome_phase(psi, GkpStabilizer::Sp)?;
        let sp = self.syndrome_phase(psi, GkpStabilizer::Sx)?;
        let once = self.displacer.apply(PhaseVector::new(-sx.shift, 0.0), psi)?;
        let state = self.displacer.apply(PhaseVector::new(0.0, -sp.shift), &once)?;
        Ok(GkpCorrection { state, dx: sx.shift, dp: sp.shift, reliable: sx.reliable && sp.reliable })
    }

    /// `[|<0_L|psi>|^2, |<1_L|psi>|^2]`.
    pub fn logical_fidelities(&self, psi: &StateVector) -> [f64; 2] {
        let psi = psi.padded(self.params.work_dim);
        [self.embedded(0).overlap_sq(&psi), self.embedded(1).overlap_sq(&psi)]
    }

    pub fn mean_photon(&self, mu: u8) -> f64 {
        mean_photon(&self.codeword(mu).state)
    }
}

pub fn mean_photon(psi: &StateVector) -> f64 {
    psi.amplitudes().iter().enumerate().map(|(n, z)| n as f64 * z.norm_sqr()).sum::<f64>() / psi.norm().powi(2)
}
