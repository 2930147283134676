//! Single-oscillator machinery in a truncated Fock space: the exact
//! damped-oscillator Kraus family, a Lindblad integrator used as its oracle,
//! the displaced-frame treatment of a driven damped oscillator, binomial
//! codes with the kitten recovery, the two-mode code, and break-even curves.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gkp::{Displacer, PhaseVector};
use crate::quantum::{
    apply_channel, cardinal_states, fidelity, hermitize, trace_distance, unitary_rotation_from_basis_pairs,
    DensityMatrix, KrausChannel, Operator, StateVector, Tensor, C64, CHANNEL_TOL, I, ZERO,
};
use crate::qubit_codes::CodeSpace;

/// Largest allowed weight in the top Fock level of any constructed state.
pub const LEAKAGE_TOL: f64 = 1e-8;

/// Truncated oscillator with states `|0> .. |dim-1>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FockSpace {
    dim: usize,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!("Fock dimension {dim} < 2")));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn annihilation(&self) -> Operator {
        Operator::from_fn(self.dim, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { ZERO })
    }

    pub fn creation(&self) -> Operator {
        self.annihilation().dagger()
    }

    pub fn number(&self) -> Operator {
        Operator::real_diagonal((0..self.dim).map(|n| n as f64))
    }

    /// `exp(i pi n)`.
    pub fn parity(&self) -> Operator {
        Operator::real_diagonal((0..self.dim).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 }))
    }

    /// Projector onto even (`odd = false`) or odd photon numbers.
    pub fn parity_projector(&self, odd: bool) -> Operator {
        Operator::real_diagonal((0..self.dim).map(|n| if (n % 2 == 1) == odd { 1.0 } else { 0.0 }))
    }

    /// `x = (a + a^dag) / sqrt 2`.
    pub fn position(&self) -> Operator {
        let a = self.annihilation();
        (&a + &a.dagger()).scale_real(std::f64::consts::FRAC_1_SQRT_2)
    }

    /// `p = i (a^dag - a) / sqrt 2`.
    pub fn momentum(&self) -> Operator {
        let a = self.annihilation();
        (&a.dagger() - &a).scale(I * std::f64::consts::FRAC_1_SQRT_2)
    }

    /// `exp(-kappa t n / 2)`, the no-jump evolution.
    pub fn no_jump(&self, kappa_t: f64) -> Operator {
        Operator::real_diagonal((0..self.dim).map(|n| (-0.5 * kappa_t * n as f64).exp()))
    }

    pub fn fock(&self, n: usize) -> Result<StateVector> {
        if n + 1 >= self.dim {
            return Err(Error::Leakage(format!("|{n}> touches the top of a {}-level space", self.dim)));
        }
        Ok(StateVector::basis(self.dim, n))
    }

    /// Coherent state `|alpha>`, renormalized after truncation.
    pub fn coherent(&self, alpha: C64) -> Result<StateVector> {
        if !(alpha.re.is_finite() && alpha.im.is_finite()) {
            return Err(Error::NonFinite("coherent amplitude"));
        }
        let mut amps = Vec::with_capacity(self.dim);
        let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for n in 0..self.dim {
            if n > 0 {
                c = c * alpha / (n as f64).sqrt();
            }
            amps.push(c);
        }
        let psi = StateVector::from_slice(&amps)?.normalize()?;
        self.check_leakage(&psi)?;
        Ok(psi)
    }

    /// `(|alpha> + sign |-alpha>)`, normalized.
    pub fn cat(&self, alpha: C64, sign: f64) -> Result<StateVector> {
        let plus = self.coherent(alpha)?;
        let minus = self.coherent(-alpha)?;
        plus.add(&minus.scale(C64::new(sign, 0.0))).normalize()
    }

    pub fn check_leakage(&self, psi: &StateVector) -> Result<()> {
        if psi.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: psi.dim() });
        }
        let top = psi.amplitude(self.dim - 1).norm_sqr() / psi.norm().powi(2).max(f64::MIN_POSITIVE);
        if top >= LEAKAGE_TOL {
            return Err(Error::Leakage(format!("weight {top:.3e} in Fock level {}", self.dim - 1)));
        }
        Ok(())
    }

    pub fn check_density_leakage(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: rho.dim() });
        }
        let top = rho.entry(self.dim - 1, self.dim - 1).re;
        if top >= LEAKAGE_TOL {
            return Err(Error::Leakage(format!("population {top:.3e} in Fock level {}", self.dim - 1)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DampingParams {
    pub kappa: f64,
    pub t: f64,
    /// Highest number of lost photons with its own Kraus operator.
    pub ellmax: usize,
}

impl DampingParams {
    pub fn new(kappa: f64, t: f64, ellmax: usize) -> Result<Self> {
        let p = Self { kappa, t, ellmax };
        if !(p.kappa_t().is_finite() && kappa >= 0.0 && t >= 0.0) {
            return Err(Error::InvalidParameter(format!("need kappa, t >= 0 (got {kappa}, {t})")));
        }
        Ok(p)
    }

    pub fn kappa_t(&self) -> f64 {
        self.kappa * self.t
    }

    /// Single-photon loss probability `1 - exp(-kappa t)`.
    pub fn gamma(&self) -> f64 {
        -(-self.kappa_t()).exp_m1()
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    (1..=k).map(|i| ((n + 1 - i) as f64).ln() - (i as f64).ln()).sum()
}

/// `<n - l| K_l |n> = sqrt(C(n, l) gamma^l (1 - gamma)^(n - l))`.
fn kraus_element(n: usize, l: usize, gamma: f64, kappa_t: f64) -> f64 {
    if l > n {
        return 0.0;
    }
    if l == 0 {
        return (-0.5 * kappa_t * n as f64).exp();
    }
    if gamma == 0.0 {
        return 0.0;
    }
    let ln = ln_binomial(n, l) + l as f64 * gamma.ln() - kappa_t * (n - l) as f64;
    (0.5 * ln).exp()
}

/// Largest probability, over Fock states below `dim`, of losing more than
/// `ellmax` photons.
pub fn damping_truncation_defect(dim: usize, dp: &DampingParams) -> f64 {
    let gamma = dp.gamma();
    (0..dim)
        .map(|n| (dp.ellmax + 1..=n).map(|l| kraus_element(n, l, gamma, dp.kappa_t()).powi(2)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `K_l = sqrt((1 - e^{-kappa t})^l / l!) e^{-kappa t n / 2} a^l` for
/// `l = 0 ..= ellmax`. The channel carries the truncation defect as its
/// declared tolerance; operators that vanish identically (all `l > 0` at
/// `kappa t = 0`) are dropped.
pub fn damped_kraus(fs: &FockSpace, dp: &DampingParams) -> Result<KrausChannel> {
    if dp.ellmax >= fs.dim() {
        return Err(Error::InvalidParameter(format!("ellmax {} needs a Fock dimension above it (got {})", dp.ellmax, fs.dim())));
    }
    let gamma = dp.gamma();
    let kt = dp.kappa_t();
    let mut ops = Vec::new();
    let mut labels = Vec::new();
    for l in 0..=dp.ellmax {
        if l > 0 && gamma == 0.0 {
            break;
        }
        ops.push(Operator::from_fn(fs.dim(), |i, j| {
            if j == i + l {
                C64::new(kraus_element(j, l, gamma, kt), 0.0)
            } else {
                ZERO
            }
        }));
        labels.push(format!("K{l}"));
    }
    let tol = damping_truncation_defect(fs.dim(), dp) + CHANNEL_TOL;
    KrausChannel::with_tolerance(ops, labels, tol)
}

/// `kappa (a rho a^dag - (n rho + rho n) / 2)` using the banded structure of `a`.
fn dissipator(rho: &DMatrix<C64>, kappa: f64) -> DMatrix<C64> {
    let d = rho.nrows();
    DMatrix::from_fn(d, d, |i, j| {
        let jump = if i + 1 < d && j + 1 < d { rho[(i + 1, j + 1)] * ((i + 1) as f64 * (j + 1) as f64).sqrt() } else { ZERO };
        kappa * (jump - rho[(i, j)] * (0.5 * (i + j) as f64))
    })
}

fn rk4<F>(y: &DMatrix<C64>, t: f64, h: f64, f: &F) -> DMatrix<C64>
where
    F: Fn(f64, &DMatrix<C64>) -> DMatrix<C64>,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &(y + &k1 * C64::new(0.5 * h, 0.0)));
    let k3 = f(t + 0.5 * h, &(y + &k2 * C64::new(0.5 * h, 0.0)));
    let k4 = f(t + h, &(y + &k3 * C64::new(h, 0.0)));
    y + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0)
}

fn check_steps(steps: usize, t: f64, kappa: f64) -> Result<()> {
    if steps == 0 {
        return Err(Error::InvalidParameter("need at least one integration step".into()));
    }
    if !(t.is_finite() && t >= 0.0 && kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::InvalidParameter(format!("need kappa, t >= 0 (got {kappa}, {t})")));
    }
    Ok(())
}

/// Integrates `d rho / dt = kappa D[a] rho` with classical RK4.
pub fn lindblad_evolve(fs: &FockSpace, rho0: &DensityMatrix, kappa: f64, t: f64, steps: usize) -> Result<DensityMatrix> {
    check_steps(steps, t, kappa)?;
    fs.check_density_leakage(rho0)?;
    let h = t / steps as f64;
    let f = |_: f64, r: &DMatrix<C64>| dissipator(r, kappa);
    let mut rho = rho0.matrix().clone();
    for k in 0..steps {
        rho = rk4(&rho, k as f64 * h, h, &f);
    }
    Ok(DensityMatrix::from_matrix_unchecked(hermitize(rho)))
}

/// Tabulated complex drive `epsilon(t)`, linearly interpolated and zero
/// outside the table. The table spacing has to resolve the pulse (at least a
/// few samples per shortest feature), and the integrator step should not be
/// coarser than the table spacing.
#[derive(Clone, Debug)]
pub struct DriveTable {
    times: Vec<f64>,
    values: Vec<C64>,
}

impl DriveTable {
    pub fn new(times: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidParameter("drive table needs >= 2 matching samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("drive sample times must increase".into()));
        }
        Ok(Self { times, values })
    }

    pub fn zero(t: f64) -> Self {
        Self { times: vec![0.0, t.max(f64::MIN_POSITIVE)], values: vec![ZERO, ZERO] }
    }

    pub fn constant(eps: C64, t: f64) -> Self {
        Self { times: vec![0.0, t.max(f64::MIN_POSITIVE)], values: vec![eps, eps] }
    }

    /// `amp exp(-(t - center)^2 / (2 sigma^2))` sampled at `samples` points on `[0, t_end]`.
    pub fn gaussian(amp: C64, center: f64, sigma: f64, t_end: f64, samples: usize) -> Result<Self> {
        let n = samples.max(2);
        let times: Vec<f64> = (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect();
        let values = times.iter().map(|&s| amp * (-(s - center).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
        Self::new(times, values)
    }

    pub fn at(&self, t: f64) -> C64 {
        let last = self.times.len() - 1;
        if t < self.times[0] || t > self.times[last] {
            return ZERO;
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, last);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.values[k - 1] * (1.0 - w) + self.values[k] * w
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DrivenFrameReport {
    /// Largest trace distance between the two reconstructions over the checkpoints.
    pub deviation: f64,
    pub alpha_re: f64,
    pub alpha_im: f64,
}

impl DrivenFrameReport {
    pub fn alpha(&self) -> C64 {
        C64::new(self.alpha_re, self.alpha_im)
    }
}

/// Compares the driven, damped master equation with `H = eps a^dag + eps* a`
/// against the displaced-frame solution `D(alpha) rho~ D(alpha)^dag`, where
/// `rho~` obeys the undriven equation and `d alpha / dt = -i eps - (kappa/2) alpha`
/// with `alpha(0) = 0`. Both are integrated with the same RK4 grid and
/// compared at ten evenly spaced checkpoints.
pub fn driven_frame_check(
    fs: &FockSpace,
    drive: &DriveTable,
    kappa: f64,
    t: f64,
    rho0: &DensityMatrix,
    steps: usize,
) -> Result<DrivenFrameReport> {
    check_steps(steps, t, kappa)?;
    fs.check_density_leakage(rho0)?;
    let d = fs.dim();
    let a = fs.annihilation();
    let ad = a.dagger();
    let driven = |s: f64, r: &DMatrix<C64>| {
        let e = drive.at(s);
        let h = ad.matrix() * e + a.matrix() * e.conj();
        (&h * r - r * &h) * (-I) + dissipator(r, kappa)
    };
    let undriven = |_: f64, r: &DMatrix<C64>| dissipator(r, kappa);
    let alpha_dot = |s: f64, al: C64| -I * drive.at(s) - al * (0.5 * kappa);

    let displacer = Displacer::new(d)?;
    let h = t / steps as f64;
    let checkpoints = 10.min(steps);
    let mut rho = rho0.matrix().clone();
    let mut tilde = rho0.matrix().clone();
    let mut alpha = ZERO;
    let mut deviation = 0.0f64;
    for k in 0..steps {
        let s = k as f64 * h;
        rho = rk4(&rho, s, h, &driven);
        tilde = rk4(&tilde, s, h, &undriven);
        let k1 = alpha_dot(s, alpha);
        let k2 = alpha_dot(s + 0.5 * h, alpha + k1 * (0.5 * h));
        let k3 = alpha_dot(s + 0.5 * h, alpha + k2 * (0.5 * h));
        let k4 = alpha_dot(s + h, alpha + k3 * h);
        alpha += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if (k + 1) * checkpoints % steps == 0 {
            let lhs = DensityMatrix::from_matrix_unchecked(hermitize(rho.clone()));
            fs.check_density_leakage(&lhs)?;
            let shift = displacer.operator(PhaseVector::from_alpha(alpha))?;
            let rhs = DensityMatrix::from_matrix_unchecked(hermitize(tilde.clone())).conjugate(&shift);
            deviation = deviation.max(trace_distance(&lhs, &rhs)?);
        }
    }
    Ok(DrivenFrameReport { deviation, alpha_re: alpha.re, alpha_im: alpha.im })
}

/// Binomial code with Fock spacing `s + 1` and `n + 2` nonzero amplitudes
/// `sqrt(C(n+1, p) / 2^n)` on `|p (s+1)>`; even `p` build `|0_L>`, odd `p`
/// build `|1_L>`.
#[derive(Clone, Debug)]
pub struct BinomialCode {
    pub n: usize,
    pub s: usize,
    /// Photon losses the spacing is designed to detect (`s`, no gains).
    pub losses: usize,
    pub gains: usize,
    pub dephasing: usize,
    fs: FockSpace,
    code: CodeSpace,
}

impl BinomialCode {
    pub fn code(&self) -> &CodeSpace {
        &self.code
    }

    pub fn fock_space(&self) -> FockSpace {
        self.fs
    }

    pub fn zero(&self) -> &StateVector {
        self.code.zero()
    }

    pub fn one(&self) -> &StateVector {
        self.code.one()
    }

    /// Fock levels carrying codeword `mu`.
    pub fn support(&self, mu: u8) -> Vec<usize> {
        let w = if mu == 0 { self.zero() } else { self.one() };
        (0..self.fs.dim()).filter(|&k| w.amplitude(k).norm() > 0.0).collect()
    }

    pub fn mean_photon(&self, mu: u8) -> f64 {
        let w = if mu == 0 { self.zero() } else { self.one() };
        self.fs.number().expectation(w).re
    }
}

/// Default truncation: four times the largest occupied Fock index.
pub fn binomial_default_dim(n: usize, s: usize) -> usize {
    4 * (n + 1) * (s + 1)
}

pub fn binomial_code(n: usize, s: usize) -> Result<BinomialCode> {
    binomial_code_in(n, s, binomial_default_dim(n, s))
}

pub fn binomial_code_in(n: usize, s: usize, dim: usize) -> Result<BinomialCode> {
    if n == 0 || s == 0 {
        return Err(Error::InvalidParameter(format!("binomial code needs N, S >= 1 (got {n}, {s})")));
    }
    if dim < (n + 2) * (s + 1) {
        return Err(Error::InvalidParameter(format!("Fock dimension {dim} < (N+2)(S+1) = {}", (n + 2) * (s + 1))));
    }
    let fs = FockSpace::new(dim)?;
    let mut words = [vec![ZERO; dim], vec![ZERO; dim]];
    for p in 0..=n + 1 {
        let amp = (ln_binomial(n + 1, p) - n as f64 * std::f64::consts::LN_2).exp().sqrt();
        words[p % 2][p * (s + 1)] = C64::new(amp, 0.0);
    }
    let zero = StateVector::from_slice(&words[0])?;
    let one = StateVector::from_slice(&words[1])?;
    for w in [&zero, &one] {
        fs.check_leakage(w)?;
    }
    let mean = |w: &StateVector| fs.number().expectation(w).re;
    let gap = (mean(&zero) - mean(&one)).abs();
    if gap > 1e-12 {
        return Err(Error::InvalidParameter(format!("codeword photon numbers differ by {gap:.3e}")));
    }
    let code = CodeSpace::new(&format!("binomial(N={n},S={s})"), zero, one, Vec::new())?;
    Ok(BinomialCode { n, s, losses: s, gains: 0, dephasing: n / 2, fs, code })
}

/// `|0_L> = (|0> + |4>)/sqrt 2`, `|1_L> = |2>` in 16 Fock levels.
pub fn kitten_code() -> BinomialCode {
    binomial_code(1, 1).expect("kitten code parameters are valid")
}

/// The kitten error words: `|E_0> = |3>`, `|E_1> = |1>` (one loss) and
/// `|E_2> = (|0> - |4>)/sqrt 2` (the no-jump leakage direction).
pub fn kitten_error_words(dim: usize) -> Result<[StateVector; 3]> {
    if dim < 6 {
        return Err(Error::InvalidParameter(format!("kitten code needs at least 6 Fock levels (got {dim})")));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let e2 = StateVector::basis(dim, 0).sub(&StateVector::basis(dim, 4)).scale(C64::new(s, 0.0));
    Ok([StateVector::basis(dim, 3), StateVector::basis(dim, 1), e2])
}

#[derive(Clone, Debug)]
pub struct KittenRecovery {
    /// `|3> -> |0_L>`, `|1> -> |1_L>`; applied after odd parity.
    pub jump: Operator,
    /// Rotation by `theta` in the `{|0_L>, |E_2>}` plane; applied after even parity.
    pub no_jump: Operator,
    pub theta: f64,
}

impl KittenRecovery {
    /// Parity measurement followed by the conditional unitary:
    /// `{U_nj P_even, U_j P_odd}`.
    pub fn channel(&self) -> Result<KrausChannel> {
        let fs = FockSpace::new(self.jump.dim())?;
        KrausChannel::new(
            vec![&self.no_jump * &fs.parity_projector(false), &self.jump * &fs.parity_projector(true)],
            vec!["even".into(), "odd".into()],
        )
    }
}

/// Recovery unitaries for one kitten round of duration `kappa t`; the
/// no-jump angle obeys `sin(theta/2) = kappa t`.
pub fn kitten_recovery(kappa_t: f64, dim: usize) -> Result<KittenRecovery> {
    if !(0.0..0.5).contains(&kappa_t) {
        return Err(Error::InvalidParameter(format!("kitten recovery needs 0 <= kappa t < 0.5 (got {kappa_t})")));
    }
    let code = binomial_code_in(1, 1, dim)?;
    let [e0, e1, e2] = kitten_error_words(dim)?;
    let (zero, one) = (code.zero().clone(), code.one().clone());
    let jump = unitary_rotation_from_basis_pairs(&[(e0, zero.clone()), (e1, one.clone())])?;
    let half = kappa_t.asin();
    let (c, s) = (C64::new(half.cos(), 0.0), C64::new(half.sin(), 0.0));
    let rot0 = StateVector::combination(&[(c, &zero), (-s, &e2)]);
    let rot2 = StateVector::combination(&[(s, &zero), (c, &e2)]);
    let no_jump = unitary_rotation_from_basis_pairs(&[(zero, rot0), (e2, rot2), (one.clone(), one)])?;
    Ok(KittenRecovery { jump, no_jump, theta: 2.0 * half })
}

/// Damping for `kappa t` (with `ellmax` retained losses) followed by the
/// kitten recovery, as one channel on the code's Fock space.
pub fn kitten_round(code: &BinomialCode, kappa_t: f64, ellmax: usize) -> Result<KrausChannel> {
    let fs = code.fock_space();
    let damp = damped_kraus(&fs, &DampingParams::new(kappa_t, 1.0, ellmax)?)?;
    damp.then(&kitten_recovery(kappa_t, fs.dim())?.channel()?)
}

/// Worst logical infidelity over the six cardinal states after one kitten round.
pub fn kitten_worst_infidelity(kappa_t: f64) -> Result<f64> {
    let code = kitten_code();
    let round = kitten_round(&code, kappa_t, 4)?;
    Ok(1.0 - code.code().worst_cardinal_fidelity(|rho| apply_channel(&round, rho))?)
}

/// `|0_L> = (|0,4> + |4,0>)/sqrt 2`, `|1_L> = |2,2>`, stabilized by the
/// joint parity.
pub fn two_mode_code(dim_each: usize) -> Result<CodeSpace> {
    if dim_each < 5 {
        return Err(Error::InvalidParameter(format!("two-mode code needs 5 levels per mode (got {dim_each})")));
    }
    let fs = FockSpace::new(dim_each)?;
    let ket = |i: usize, j: usize| StateVector::basis(dim_each * dim_each, i * dim_each + j);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let zero = ket(0, 4).add(&ket(4, 0)).scale(C64::new(s, 0.0));
    let one = ket(2, 2);
    CodeSpace::new("two-mode", zero, one, vec![fs.parity().tensor(&fs.parity())])
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NoJumpInvariance {
    /// Largest `|| psi' - psi ||` over the codewords, `psi'` the normalized
    /// no-jump image.
    pub deviation: f64,
    /// Largest `1 - |<psi|psi'>|^2` over the codewords.
    pub infidelity: f64,
}

/// Deviation of the codewords under `K_0 (x) K_0` with rates `kappa1`, `kappa2`.
pub fn two_mode_nojump_invariance(kappa1: f64, kappa2: f64, t: f64) -> Result<NoJumpInvariance> {
    let dim = 5;
    let code = two_mode_code(dim)?;
    let fs = FockSpace::new(dim)?;
    let k0 = fs.no_jump(kappa1 * t).tensor(&fs.no_jump(kappa2 * t));
    let mut out = NoJumpInvariance { deviation: 0.0, infidelity: 0.0 };
    for w in code.codewords() {
        let img = k0.apply(w).normalize()?;
        out.deviation = out.deviation.max(img.sub(w).norm());
        out.infidelity = out.infidelity.max(1.0 - img.overlap_sq(w));
    }
    Ok(out)
}

/// Exponent `k` in `infidelity ~ (kappa2 - kappa1)^k` from the two-point fit
/// at the given rate difference and half of it.
pub fn two_mode_scaling_exponent(kappa1: f64, kappa2: f64, t: f64) -> Result<f64> {
    let full = two_mode_nojump_invariance(kappa1, kappa2, t)?.infidelity;
    let half = two_mode_nojump_invariance(kappa1, 0.5 * (kappa1 + kappa2), t)?.infidelity;
    if !(full > 0.0 && half > 0.0) {
        return Err(Error::InvalidParameter("equal rates leave nothing to fit".into()));
    }
    Ok((full / half).log2())
}

#[derive(Clone, Debug, Serialize)]
pub struct BreakEven {
    pub kappa: f64,
    pub cycle_time: f64,
    /// Cardinal-averaged fidelity after `k` cycles, `k = 0 ..= n_cycles`.
    pub corrected: Vec<f64>,
    pub trivial: Vec<f64>,
    /// Fitted rates `Gamma` in `2 F - 1 = exp(-Gamma t)`.
    pub corrected_rate: f64,
    pub trivial_rate: f64,
    /// `trivial_rate / corrected_rate`.
    pub gain: f64,
}

fn averaged_curve(zero: &StateVector, one: &StateVector, round: &KrausChannel, cycles: usize) -> Result<Vec<f64>> {
    let states = cardinal_states(zero, one);
    let mut rhos: Vec<DensityMatrix> = states.iter().map(StateVector::to_density).collect::<Result<_>>()?;
    let mut curve = Vec::with_capacity(cycles + 1);
    for k in 0..=cycles {
        if k > 0 {
            for r in rhos.iter_mut() {
                *r = apply_channel(round, r)?;
            }
        }
        let mut f = 0.0;
        for (r, psi) in rhos.iter().zip(&states) {
            f += fidelity(r, psi)?;
        }
        curve.push(f / states.len() as f64);
    }
    Ok(curve)
}

/// Least-squares rate through the origin of `-ln(2F - 1)` against time.
fn fitted_rate(curve: &[f64], dt: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (k, f) in curve.iter().enumerate().skip(1) {
        let t = k as f64 * dt;
        num += t * -(2.0 * f - 1.0).max(f64::MIN_POSITIVE).ln();
        den += t * t;
    }
    num / den
}

/// Kitten code with ideal recovery every `cycle_time` against the 0/1 Fock
/// encoding under the same damping.
pub fn break_even_compare(kappa: f64, cycle_time: f64, n_cycles: usize) -> Result<BreakEven> {
    if n_cycles == 0 || !(cycle_time > 0.0) {
        return Err(Error::InvalidParameter("need n_cycles >= 1 and cycle_time > 0".into()));
    }
    let kt = kappa * cycle_time;
    let code = kitten_code();
    let round = kitten_round(&code, kt, 4)?;
    let corrected = averaged_curve(code.zero(), code.one(), &round, n_cycles)?;

    let fs = code.fock_space();
    let damp = damped_kraus(&fs, &DampingParams::new(kappa, cycle_time, 4)?)?;
    let dim = fs.dim();
    let trivial = averaged_curve(&StateVector::basis(dim, 0), &StateVector::basis(dim, 1), &damp, n_cycles)?;

    let corrected_rate = fitted_rate(&corrected, cycle_time);
    let trivial_rate = fitted_rate(&trivial, cycle_time);
    Ok(BreakEven { kappa, cycle_time, corrected, trivial, corrected_rate, trivial_rate, gain: trivial_rate / corrected_rate })
}

/// Ratio of the initial photon-loss rates `d<n>/dt` of the unprotected kitten
/// codewords and the 0/1 encoding, averaged over the cardinal states.
pub fn photon_loss_ratio(kappa_t: f64) -> Result<f64> {
    let code = kitten_code();
    let fs = code.fock_space();
    let damp = damped_kraus(&fs, &DampingParams::new(kappa_t, 1.0, fs.dim() - 1)?)?;
    let num = fs.number();
    let loss = |zero: &StateVector, one: &StateVector| -> Result<f64> {
        let mut total = 0.0;
        for psi in cardinal_states(zero, one) {
            let rho = psi.to_density()?;
            total += rho.expectation(&num).re - apply_channel(&damp, &rho)?.expectation(&num).re;
        }
        Ok(total)
    };
    let dim = fs.dim();
    Ok(loss(code.zero(), code.one())? / loss(&StateVector::basis(dim, 0), &StateVector::basis(dim, 1))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(dim: usize, support: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let g = DMatrix::from_fn(dim, dim, |i, _| {
            if i < support {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                ZERO
            }
        });
        let m = &g * g.adjoint();
        let tr = m.trace();
        DensityMatrix::new(m / tr).unwrap()
    }

    #[test]
    fn ladder_operators() {
        let fs = FockSpace::new(8).unwrap();
        let a = fs.annihilation();
        let psi = a.apply(&StateVector::basis(8, 5));
        assert!((psi.amplitude(4).re - 5f64.sqrt()).abs() < 1e-15);
        let n = &fs.creation() * &a;
        assert!(n.distance(&fs.number()) < 1e-14);
        let pi = fs.parity();
        assert!((&(&pi * &a) + &(&a * &pi)).max_abs() == 0.0);
        // [x, p] = i away from the truncation edge
        let c = fs.position().commutator(&fs.momentum());
        for k in 0..7 {
            assert!((c.matrix()[(k, k)] - I).norm() < 1e-14);
        }
    }

    #[test]
    fn kraus_completeness_is_binomial_identity() {
        let fs = FockSpace::new(12).unwrap();
        let dp = DampingParams::new(0.7, 0.5, 5).unwrap();
        let ch = damped_kraus(&fs, &dp).unwrap();
        let mut sum = DMatrix::<C64>::zeros(12, 12);
        for k in ch.ops() {
            sum += k.matrix().adjoint() * k.matrix();
        }
        for n in 0..=5 {
            assert!((sum[(n, n)].re - 1.0).abs() < 1e-12);
        }
        // above ellmax the deficit is the binomial tail
        let g = dp.gamma();
        let tail: f64 = (6..=7).map(|l| (ln_binomial(7, l) + l as f64 * g.ln() + (7 - l) as f64 * (1.0 - g).ln()).exp()).sum();
        assert!((1.0 - sum[(7, 7)].re - tail).abs() < 1e-12);
        assert!(damped_kraus(&fs, &DampingParams::new(1.0, 1.0, 12).unwrap()).is_err());
    }

    #[test]
    fn single_loss_amplitude() {
        let fs = FockSpace::new(6).unwrap();
        let ch = damped_kraus(&fs, &DampingParams::new(0.1, 1.0, 3).unwrap()).unwrap();
        let out = ch.ops()[1].apply(&StateVector::basis(6, 1));
        let expected = (1.0 - (-0.1f64).exp()).sqrt();
        assert!((out.amplitude(0).re - expected).abs() < 1e-15);
        assert!((out.amplitude(0).norm_sqr() - 0.09516).abs() < 5e-6);
    }

    #[test]
    fn zero_time_is_identity() {
        let fs = FockSpace::new(6).unwrap();
        let ch = damped_kraus(&fs, &DampingParams::new(2.0, 0.0, 4).unwrap()).unwrap();
        assert_eq!(ch.len(), 1);
        assert!(ch.ops()[0].distance(&Operator::identity(6)) == 0.0);
    }

    #[test]
    fn lindblad_matches_kraus() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fs = FockSpace::new(12).unwrap();
        let rho0 = random_density(12, 11, &mut rng);
        let ch = damped_kraus(&fs, &DampingParams::new(0.3, 1.0, 11).unwrap()).unwrap();
        let a = apply_channel(&ch, &rho0).unwrap();
        let b = lindblad_evolve(&fs, &rho0, 0.3, 1.0, 400).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-7);
        let c = lindblad_evolve(&fs, &rho0, 0.3, 1.0, 800).unwrap();
        assert!(b.max_abs_diff(&c) < 1e-9);
    }

    #[test]
    fn photon_number_decays_exponentially() {
        let fs = FockSpace::new(30).unwrap();
        let rho = fs.coherent(C64::new(1.5, 0.5)).unwrap().to_density().unwrap();
        let n0 = rho.expectation(&fs.number()).re;
        let out = lindblad_evolve(&fs, &rho, 0.8, 1.0, 400).unwrap();
        assert!((out.expectation(&fs.number()).re - n0 * (-0.8f64).exp()).abs() < 1e-6);
        let vac = StateVector::basis(30, 0).to_density().unwrap();
        assert!(lindblad_evolve(&fs, &vac, 0.8, 1.0, 10).unwrap().max_abs_diff(&vac) == 0.0);
    }

    #[test]
    fn driven_frame() {
        let fs = FockSpace::new(20).unwrap();
        let vac = StateVector::basis(20, 0).to_density().unwrap();
        let zero = driven_frame_check(&fs, &DriveTable::zero(1.0), 0.5, 1.0, &vac, 50).unwrap();
        assert!(zero.deviation < 1e-12);

        let eps = C64::new(0.4, 0.1);
        let r = driven_frame_check(&fs, &DriveTable::constant(eps, 1.0), 0.0, 1.0, &vac, 100).unwrap();
        assert!((r.alpha() - (-I * eps * 1.0)).norm() < 1e-12);
        assert!(r.deviation < 1e-8);

        let pulse = DriveTable::gaussian(C64::new(1.0, 0.0), 0.5, 0.12, 1.0, 201).unwrap();
        let r = driven_frame_check(&fs, &pulse, 0.2, 1.0, &vac, 400).unwrap();
        assert!(r.alpha().norm() > 0.1);
        assert!(r.deviation < 1e-5, "{}", r.deviation);
    }

    #[test]
    fn kitten_codewords_and_parity() {
        let code = kitten_code();
        let fs = code.fock_space();
        assert_eq!(code.support(0), vec![0, 4]);
        assert_eq!(code.support(1), vec![2]);
        let pi = fs.parity();
        let a = fs.annihilation();
        for w in [code.zero(), code.one()] {
            assert!((pi.expectation(w).re - 1.0).abs() < 1e-15);
            let lost = a.apply(w).normalize().unwrap();
            assert!((pi.expectation(&lost).re + 1.0).abs() < 1e-15);
        }
        let kt: f64 = 0.05;
        let ch = damped_kraus(&fs, &DampingParams::new(kt, 1.0, 4).unwrap()).unwrap();
        let k0 = &ch.ops()[0];
        let direct = k0.apply(code.zero()).norm().powi(2);
        assert!((direct - 0.5 * (1.0 + (-4.0 * kt).exp())).abs() < 1e-14);
        assert!((direct - 0.90936).abs() < 1e-5);
    }

    #[test]
    fn kitten_recovery_maps_error_words() {
        let rec = kitten_recovery(0.02, 16).unwrap();
        let code = kitten_code();
        let [e0, e1, _] = kitten_error_words(16).unwrap();
        assert!(rec.jump.apply(&e0).sub(code.zero()).norm() < 1e-12);
        assert!(rec.jump.apply(&e1).sub(code.one()).norm() < 1e-12);
        assert!(rec.no_jump.apply(code.one()).sub(code.one()).norm() < 1e-12);
        assert!(((rec.theta / 2.0).sin() - 0.02).abs() < 1e-15);
        assert!(rec.channel().unwrap().completeness_defect() < 1e-12);
        assert!(kitten_recovery(0.5, 16).is_err());
    }

    #[test]
    fn kitten_round_error_is_second_order() {
        let inf = kitten_worst_infidelity(0.02).unwrap();
        assert!(inf <= 5.0 * 0.02f64.powi(2), "{inf}");
        let inf = kitten_worst_infidelity(0.05).unwrap();
        assert!(inf <= 20.0 * 0.05f64.powi(2), "{inf}");
    }

    #[test]
    fn binomial_family() {
        let c = binomial_code(2, 1).unwrap();
        assert!((c.mean_photon(0) - c.mean_photon(1)).abs() < 1e-12);
        let c = binomial_code(1, 2).unwrap();
        assert_eq!(c.support(0), vec![0, 6]);
        assert_eq!(c.support(1), vec![3]);
        for code in [binomial_code(3, 2).unwrap(), binomial_code(4, 1).unwrap()] {
            let s1 = code.s + 1;
            assert!(code.support(0).iter().all(|k| k % s1 == 0 && (k / s1) % 2 == 0));
            assert!(code.support(1).iter().all(|k| k % s1 == 0 && (k / s1) % 2 == 1));
        }
        assert!(binomial_code_in(1, 1, 5).is_err());
        assert!(binomial_code(0, 1).is_err());
    }

    #[test]
    fn fock_state_invariant_under_no_jump() {
        let fs = FockSpace::new(10).unwrap();
        let psi = fs.no_jump(0.7).apply(&StateVector::basis(10, 3)).normalize().unwrap();
        assert!(psi.sub(&StateVector::basis(10, 3)).norm() < 1e-15);
    }

    #[test]
    fn two_mode_code_no_jump() {
        let code = two_mode_code(5).unwrap();
        let fs = FockSpace::new(5).unwrap();
        let n_tot = fs.number().tensor(&Operator::identity(5)) + Operator::identity(5).tensor(&fs.number());
        for w in code.codewords() {
            assert!((n_tot.expectation(w).re - 4.0).abs() < 1e-12);
        }
        assert!(two_mode_nojump_invariance(1.0, 1.0, 0.1).unwrap().deviation < 1e-12);
        let r = two_mode_nojump_invariance(1.0, 1.3, 0.1).unwrap();
        assert!(r.deviation > 1e-4);
        let k = two_mode_scaling_exponent(1.0, 1.3, 0.1).unwrap();
        assert!((k - 2.0).abs() < 0.1, "{k}");
    }

    #[test]
    fn photon_loss_ratio_is_four() {
        assert!((photon_loss_ratio(0.01).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn break_even_scalings() {
        let a = break_even_compare(1.0, 0.01, 50).unwrap();
        let b = break_even_compare(1.0, 0.005, 50).unwrap();
        let c = break_even_compare(2.0, 0.005, 50).unwrap();
        // corrected rate ~ kappa^2 * cycle_time
        assert!((a.corrected_rate / b.corrected_rate - 2.0).abs() < 0.2, "{} {}", a.corrected_rate, b.corrected_rate);
        assert!((c.corrected_rate / b.corrected_rate - 4.0).abs() < 0.4);
        // trivial rate ~ kappa, independent of the cycle time
        assert!((a.trivial_rate / b.trivial_rate - 1.0).abs() < 0.05);
        assert!((c.trivial_rate / b.trivial_rate - 2.0).abs() < 0.1);
        assert!(a.gain > 1.0);
        // shorter cycles at fixed total time keep the state better
        let short = break_even_compare(1.0, 0.001, 500).unwrap();
        assert!(short.corrected[500] > a.corrected[50]);
    }
}
