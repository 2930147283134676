//! Qubit codes: the three-qubit repetition code with measured and
//! measurement-free correction, coherent and bath-entangled errors, a generic
//! Knill-Laflamme checker with recovery construction, and the four-qubit
//! amplitude-damping code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::montecarlo;
use crate::quantum::{
    apply_channel, cardinal_states, complete_basis, fidelity, measure_projector, mix_operators, schmidt_coefficients,
    tensor_all, DensityMatrix, KrausChannel, Operator, StateVector, Tensor, C64, EXACT_TOL, ONE, ZERO,
};

/// Two orthonormal logical codewords in a host space plus declared stabilizers.
#[derive(Clone, Debug)]
pub struct CodeSpace {
    name: String,
    zero: StateVector,
    one: StateVector,
    stabilizers: Vec<Operator>,
}

impl CodeSpace {
    pub fn new(name: &str, zero: StateVector, one: StateVector, stabilizers: Vec<Operator>) -> Result<Self> {
        Self::with_tolerance(name, zero, one, stabilizers, EXACT_TOL)
    }

    pub fn with_tolerance(
        name: &str,
        zero: StateVector,
        one: StateVector,
        stabilizers: Vec<Operator>,
        tol: f64,
    ) -> Result<Self> {
        if zero.dim() != one.dim() {
            return Err(Error::DimensionMismatch { expected: zero.dim(), actual: one.dim() });
        }
        let dev = (zero.inner(&zero) - ONE).norm().max((one.inner(&one) - ONE).norm()).max(zero.inner(&one).norm());
        if dev > tol {
            return Err(Error::NotOrthonormal(dev));
        }
        for s in &stabilizers {
            if s.dim() != zero.dim() {
                return Err(Error::DimensionMismatch { expected: zero.dim(), actual: s.dim() });
            }
            let d = s.apply(&zero).sub(&zero).norm().max(s.apply(&one).sub(&one).norm());
            if d > tol {
                return Err(Error::InvalidParameter(format!("stabilizer does not fix the codewords ({d:.3e})")));
            }
        }
        Ok(Self { name: name.to_string(), zero, one, stabilizers })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn host_dim(&self) -> usize {
        self.zero.dim()
    }

    /// `[|W_down>, |W_up>]`, i.e. `[|0_L>, |1_L>]`.
    pub fn codewords(&self) -> [&StateVector; 2] {
        [&self.zero, &self.one]
    }

    pub fn zero(&self) -> &StateVector {
        &self.zero
    }

    pub fn one(&self) -> &StateVector {
        &self.one
    }

    pub fn stabilizers(&self) -> &[Operator] {
        &self.stabilizers
    }

    pub fn projector(&self) -> Operator {
        &self.zero.projector() + &self.one.projector()
    }

    pub fn encode(&self, alpha: C64, beta: C64) -> StateVector {
        StateVector::combination(&[(alpha, &self.zero), (beta, &self.one)])
    }

    pub fn cardinal_states(&self) -> Vec<StateVector> {
        cardinal_states(&self.zero, &self.one)
    }

    /// Embeds a logical operator given in the `{|0_L>, |1_L>}` basis.
    pub fn logical_operator(&self, m: &Operator) -> Operator {
        let w = [&self.zero, &self.one];
        let mut out = Operator::zeros(self.host_dim());
        for (i, wi) in w.iter().enumerate() {
            for (j, wj) in w.iter().enumerate() {
                let c = m.matrix()[(i, j)];
                if c != ZERO {
                    out = &out + &Operator::outer(wi, wj).scale(c);
                }
            }
        }
        out
    }

    /// Logical-qubit process: the worst fidelity over the six cardinal states
    /// of `channel` acting on the encoded state.
    pub fn worst_cardinal_fidelity(&self, channel: impl Fn(&DensityMatrix) -> Result<DensityMatrix>) -> Result<f64> {
        let mut worst = 1.0f64;
        for psi in self.cardinal_states() {
            let out = channel(&psi.to_density()?)?;
            worst = worst.min(fidelity(&out, &psi)?);
        }
        Ok(worst)
    }
}

fn pauli_string(ops: &[Operator]) -> Operator {
    tensor_all(ops)
}

fn x() -> Operator {
    Operator::pauli_x()
}

fn z() -> Operator {
    Operator::pauli_z()
}

fn id2() -> Operator {
    Operator::identity(2)
}

/// `Z1 Z2` and `Z2 Z3` on three qubits.
pub fn repetition3_stabilizers() -> [Operator; 2] {
    [pauli_string(&[z(), z(), id2()]), pauli_string(&[id2(), z(), z()])]
}

pub fn repetition3_code() -> CodeSpace {
    let s = repetition3_stabilizers();
    CodeSpace::new("repetition3", StateVector::qubits(&[0, 0, 0]), StateVector::qubits(&[1, 1, 1]), s.to_vec())
        .expect("repetition code is valid")
}

/// `X_L = X1X2X3`, `Y_L = i X_L Z_L`, `Z_L = Z1Z2Z3`.
pub fn repetition3_logicals() -> [Operator; 3] {
    let xl = pauli_string(&[x(), x(), x()]);
    let zl = pauli_string(&[z(), z(), z()]);
    let yl = (&xl * &zl).scale(C64::new(0.0, 1.0));
    [xl, yl, zl]
}

/// `X` on qubit `j` (1-based) of three.
pub fn x_on(j: usize) -> Operator {
    Operator::on_qubit(&x(), j - 1, 3)
}

fn check_amplitudes(alpha: C64, beta: C64) -> Result<()> {
    let n = alpha.norm_sqr() + beta.norm_sqr();
    if (n - 1.0).abs() > EXACT_TOL {
        return Err(Error::NotNormalized(n.sqrt()));
    }
    Ok(())
}

/// `(alpha|0> + beta|1>) |00>` through CNOT(1->2) and CNOT(1->3).
pub fn encode_repetition3(alpha: C64, beta: C64) -> Result<StateVector> {
    check_amplitudes(alpha, beta)?;
    let input = StateVector::from_slice(&[alpha, beta])?.tensor(&StateVector::qubits(&[0, 0]));
    let circuit = &Operator::cnot(3, 0, 2) * &Operator::cnot(3, 0, 1);
    Ok(circuit.apply(&input))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Syndrome {
    pub s1: i8,
    pub s2: i8,
}

impl Syndrome {
    pub const ALL: [Syndrome; 4] =
        [Syndrome { s1: 1, s2: 1 }, Syndrome { s1: -1, s2: 1 }, Syndrome { s1: -1, s2: -1 }, Syndrome { s1: 1, s2: -1 }];

    /// Qubit (1-based) the lookup table flips, or `None` for the trivial syndrome.
    pub fn flipped_qubit(&self) -> Option<usize> {
        match (self.s1, self.s2) {
            (1, 1) => None,
            (-1, 1) => Some(1),
            (-1, -1) => Some(2),
            _ => Some(3),
        }
    }

    pub fn correction(&self) -> Operator {
        self.flipped_qubit().map_or_else(|| Operator::identity(8), x_on)
    }

    pub fn index(&self) -> usize {
        Syndrome::ALL.iter().position(|s| s == self).expect("valid syndrome")
    }
}

fn stabilizer_projectors() -> [Operator; 2] {
    let [s1, s2] = repetition3_stabilizers();
    let i8 = Operator::identity(8);
    [(&i8 + &s1).scale_real(0.5), (&i8 + &s2).scale_real(0.5)]
}

/// Projector onto the joint eigenspace with the given syndrome.
pub fn syndrome_projector(s: Syndrome) -> Operator {
    let [p1, p2] = stabilizer_projectors();
    let i8 = Operator::identity(8);
    let a = if s.s1 == 1 { p1 } else { &i8 - &p1 };
    let b = if s.s2 == 1 { p2 } else { &i8 - &p2 };
    &a * &b
}

#[derive(Clone, Debug)]
pub struct SyndromeOutcome {
    pub syndrome: Syndrome,
    pub post_state: StateVector,
    /// Born probability of the observed syndrome.
    pub prob: f64,
}

/// Measures `S1` then `S2` on a three-qubit (or three-qubit-plus-bath) state.
/// `extra_dim` is the dimension of any trailing subsystem that is left alone.
pub fn syndrome_repetition3_ext<R: Rng + ?Sized>(psi: &StateVector, extra_dim: usize, order_s2_first: bool, rng: &mut R) -> Result<SyndromeOutcome> {
    if psi.dim() != 8 * extra_dim {
        return Err(Error::DimensionMismatch { expected: 8 * extra_dim, actual: psi.dim() });
    }
    let ext = Operator::identity(extra_dim);
    let [p1, p2] = stabilizer_projectors().map(|p| p.tensor(&ext));
    let (first, second) = if order_s2_first { (&p2, &p1) } else { (&p1, &p2) };
    let a = measure_projector(first, psi, rng)?;
    let pa = if a.outcome == 1 { a.prob_one } else { a.prob_zero() };
    let b = measure_projector(second, &a.post_state, rng)?;
    let pb = if b.outcome == 1 { b.prob_one } else { b.prob_zero() };
    let sign = |o: u8| if o == 1 { 1 } else { -1 };
    let (o1, o2) = if order_s2_first { (b.outcome, a.outcome) } else { (a.outcome, b.outcome) };
    Ok(SyndromeOutcome { syndrome: Syndrome { s1: sign(o1), s2: sign(o2) }, post_state: b.post_state, prob: pa * pb })
}

pub fn syndrome_repetition3<R: Rng + ?Sized>(psi: &StateVector, rng: &mut R) -> Result<SyndromeOutcome> {
    syndrome_repetition3_ext(psi, 1, false, rng)
}

/// Non-selective syndrome measurement of a mixed state: every branch with its
/// probability and normalized post-measurement state.
pub fn syndrome_branches(rho: &DensityMatrix) -> Result<Vec<(Syndrome, f64, Option<DensityMatrix>)>> {
    if rho.dim() != 8 {
        return Err(Error::DimensionMismatch { expected: 8, actual: rho.dim() });
    }
    Ok(Syndrome::ALL
        .iter()
        .map(|&s| {
            let p = syndrome_projector(s);
            let branch = rho.conjugate(&p);
            let prob = branch.trace().re;
            let post = (prob > 1e-15).then(|| {
                DensityMatrix::from_matrix_unchecked(branch.matrix() / C64::new(prob, 0.0))
            });
            (s, prob, post)
        })
        .collect())
}

/// Kraus set `R0 = P1 P2, R1 = X1 (1-P1) P2, R2 = X2 (1-P1)(1-P2), R3 = X3 P1 (1-P2)`.
pub fn repetition3_recovery() -> KrausChannel {
    let ops = Syndrome::ALL.iter().map(|&s| &s.correction() * &syndrome_projector(s)).collect();
    KrausChannel::new(ops, vec!["R0".into(), "R1".into(), "R2".into(), "R3".into()]).expect("complete")
}

/// Five-qubit circuit: ancillas 4 and 5 collect the parities of (1,2) and
/// (2,3) through four CNOTs, then three ancilla-controlled NOTs apply the
/// lookup-table correction.
pub fn measurement_free_circuit() -> Operator {
    let n = 5;
    let gates = [
        Operator::cnot(n, 0, 3),
        Operator::cnot(n, 1, 3),
        Operator::cnot(n, 1, 4),
        Operator::cnot(n, 2, 4),
        Operator::controlled_x(n, &[(3, true), (4, false)], 0),
        Operator::controlled_x(n, &[(3, true), (4, true)], 1),
        Operator::controlled_x(n, &[(3, false), (4, true)], 2),
    ];
    gates.iter().fold(Operator::identity(32), |acc, g| g * &acc)
}

/// The data-qubit channel of the measurement-free circuit when the ancillas
/// start in `|00>` and are traced out afterwards.
pub fn measurement_free_channel() -> KrausChannel {
    let u = measurement_free_circuit();
    let mut ops = Vec::new();
    let mut labels = Vec::new();
    for a in 0..4usize {
        // K_a = (I (x) <a|) U (I (x) |00>)
        let k = Operator::from_fn(8, |i, j| u.matrix()[(i * 4 + a, j * 4)]);
        ops.push(k);
        labels.push(format!("ancilla={a:02b}"));
    }
    KrausChannel::new(ops, labels).expect("unitary dilation is complete")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMode {
    Measured,
    MeasurementFree,
}

/// Ensemble-level correction of a three-qubit state.
pub fn correct_repetition3(rho: &DensityMatrix, mode: CorrectionMode) -> Result<DensityMatrix> {
    let ch = match mode {
        CorrectionMode::Measured => repetition3_recovery(),
        CorrectionMode::MeasurementFree => measurement_free_channel(),
    };
    apply_channel(&ch, rho)
}

/// Single-shot measured correction of a pure state.
pub fn correct_repetition3_pure<R: Rng + ?Sized>(psi: &StateVector, rng: &mut R) -> Result<(Syndrome, StateVector)> {
    let out = syndrome_repetition3(psi, rng)?;
    Ok((out.syndrome, out.syndrome.correction().apply(&out.post_state)))
}

/// `exp(-i theta X2) = cos(theta) I - i sin(theta) X2`.
pub fn coherent_error(theta: f64) -> Operator {
    &Operator::identity(8).scale_real(theta.cos()) + &x_on(2).scale(C64::new(0.0, -theta.sin()))
}

#[derive(Clone, Debug)]
pub struct CoherentTrial {
    pub syndrome: Syndrome,
    /// Fidelity with the initial codeword after the table correction.
    pub fidelity: f64,
}

pub fn coherent_error_trial<R: Rng + ?Sized>(theta: f64, psi0: &StateVector, rng: &mut R) -> Result<CoherentTrial> {
    let hit = coherent_error(theta).apply(psi0);
    let (syndrome, fixed) = correct_repetition3_pure(&hit, rng)?;
    Ok(CoherentTrial { syndrome, fidelity: fixed.overlap_sq(psi0) })
}

/// Syndrome histogram (indexed like [`Syndrome::ALL`]) over seeded trials.
pub fn coherent_error_statistics(theta: f64, psi0: &StateVector, trials: u64, seed: u64) -> Vec<u64> {
    montecarlo::tally(trials, seed, 4, |rng| {
        coherent_error_trial(theta, psi0, rng).expect("valid trial").syndrome.index()
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BathBranch {
    pub syndrome: Syndrome,
    pub prob: f64,
    /// Number of Schmidt coefficients above `1e-10` across the system|bath cut.
    pub schmidt_rank: usize,
    /// Weight outside the leading Schmidt coefficient, `1 - s_0^2`.
    pub schmidt_residual: f64,
}

/// Entangled error `sqrt(1-|eps|^2) |Psi0>|B0> + eps X2 |Psi0>|B2>` with a
/// one-qubit bath.
pub fn bath_error_state(eps: C64, psi0: &StateVector) -> Result<StateVector> {
    if eps.norm() > 1.0 + EXACT_TOL {
        return Err(Error::InvalidParameter(format!("|eps| = {} > 1", eps.norm())));
    }
    let keep = (1.0 - eps.norm_sqr()).max(0.0).sqrt();
    let a = psi0.tensor(&StateVector::basis(2, 0)).scale(C64::new(keep, 0.0));
    let b = x_on(2).apply(psi0).tensor(&StateVector::basis(2, 1)).scale(eps);
    Ok(a.add(&b))
}

fn schmidt_summary(psi: &StateVector) -> Result<(usize, f64)> {
    let sc = schmidt_coefficients(psi, 8, 2)?;
    let rank = sc.iter().filter(|&&s| s > 1e-10).count();
    Ok((rank, 1.0 - sc[0] * sc[0]))
}

/// Both syndrome branches with their exact probabilities and Schmidt data.
pub fn bath_error_branches(eps: C64, psi0: &StateVector) -> Result<Vec<BathBranch>> {
    let state = bath_error_state(eps, psi0)?;
    let mut out = Vec::new();
    for s in Syndrome::ALL {
        let p = syndrome_projector(s).tensor(&Operator::identity(2));
        let branch = p.apply(&state);
        let prob = branch.norm().powi(2);
        if prob > 1e-14 {
            let (schmidt_rank, schmidt_residual) = schmidt_summary(&branch.normalize()?)?;
            out.push(BathBranch { syndrome: s, prob, schmidt_rank, schmidt_residual });
        }
    }
    Ok(out)
}

/// One sampled syndrome measurement on the system-bath state.
pub fn bath_error_trial<R: Rng + ?Sized>(eps: C64, psi0: &StateVector, rng: &mut R) -> Result<BathBranch> {
    let state = bath_error_state(eps, psi0)?;
    let out = syndrome_repetition3_ext(&state, 2, false, rng)?;
    let (schmidt_rank, schmidt_residual) = schmidt_summary(&out.post_state)?;
    Ok(BathBranch { syndrome: out.syndrome, prob: out.prob, schmidt_rank, schmidt_residual })
}

/// Per-qubit amplitude damping `K0 = |g><g| + sqrt(1-p)|e><e|`, `K- = sqrt(p)|g><e|`.
pub fn qubit_amplitude_damping(p: f64) -> [Operator; 2] {
    [Operator::real_diagonal([1.0, (1.0 - p).sqrt()]), Operator::sigma_minus().scale_real(p.sqrt())]
}

/// `{sqrt(1-3p) I, sqrt(p) X_j}` on three qubits.
pub fn bitflip_errors(p: f64) -> Vec<Operator> {
    let mut ops = vec![Operator::identity(8).scale_real((1.0 - 3.0 * p).max(0.0).sqrt())];
    ops.extend((1..=3).map(|j| x_on(j).scale_real(p.sqrt())));
    ops
}

/// Independent amplitude damping on each of `n` qubits: all `2^n` products.
pub fn amplitude_damping_register(p: f64, n: usize) -> Vec<Operator> {
    let k = qubit_amplitude_damping(p);
    (0..1usize << n)
        .map(|mask| {
            let factors: Vec<Operator> = (0..n).map(|q| k[(mask >> (n - 1 - q)) & 1].clone()).collect();
            tensor_all(&factors)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KlVerdict {
    Exact,
    /// Violations shrink like `x^violation_order`; `ratio` is the measured
    /// violation ratio under halving the parameter.
    Approximate { violation_order: u32, ratio: f64 },
    Fail,
}

#[derive(Clone, Debug)]
pub struct KlReport {
    pub alpha_down: DMatrix<C64>,
    pub alpha_up: DMatrix<C64>,
    pub max_cross_block: f64,
    pub max_word_dependence: f64,
    /// Eigenvalues of the codeword-averaged alpha, descending.
    pub beta: Vec<f64>,
    /// Column `k` holds the coefficients of `F_k` in the original set.
    pub mixing: DMatrix<C64>,
    pub f_basis: Vec<Operator>,
    pub verdict: KlVerdict,
}

impl KlReport {
    pub fn violation(&self) -> f64 {
        self.max_cross_block.max(self.max_word_dependence)
    }

    pub fn alpha_mean(&self) -> DMatrix<C64> {
        (&self.alpha_down + &self.alpha_up) * C64::new(0.5, 0.0)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let split = |m: &DMatrix<C64>| {
            let (r, c) = m.shape();
            let re: Vec<Vec<f64>> = (0..r).map(|i| (0..c).map(|j| m[(i, j)].re).collect()).collect();
            let im: Vec<Vec<f64>> = (0..r).map(|i| (0..c).map(|j| m[(i, j)].im).collect()).collect();
            serde_json::json!({ "re": re, "im": im })
        };
        serde_json::json!({
            "verdict": self.verdict,
            "alpha_down": split(&self.alpha_down),
            "alpha_up": split(&self.alpha_up),
            "max_cross_block": self.max_cross_block,
            "max_word_dependence": self.max_word_dependence,
            "beta": self.beta,
            "mixing": split(&self.mixing),
        })
    }
}

/// Default bound on KL violations for the exact verdict.
pub const KL_TOL: f64 = 1e-9;

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Evaluates `alpha^sigma_{lk} = <W_sigma|K_l^dag K_k|W_sigma>`, the cross
/// blocks and the diagonalizing rotation. Error sets need not be complete.
pub fn kl_check(code: &CodeSpace, errs: &[Operator]) -> Result<KlReport> {
    kl_check_with_tol(code, errs, KL_TOL)
}

pub fn kl_check_with_tol(code: &CodeSpace, errs: &[Operator], tol: f64) -> Result<KlReport> {
    let n = errs.len();
    if n == 0 {
        return Err(Error::DimensionMismatch { expected: 1, actual: 0 });
    }
    for e in errs {
        if e.dim() != code.host_dim() {
            return Err(Error::DimensionMismatch { expected: code.host_dim(), actual: e.dim() });
        }
    }
    let images = |w: &StateVector| errs.iter().map(|e| e.apply(w)).collect::<Vec<_>>();
    let down = images(code.zero());
    let up = images(code.one());
    let gram = |a: &[StateVector], b: &[StateVector]| DMatrix::from_fn(n, n, |l, k| a[l].inner(&b[k]));
    let alpha_down = gram(&down, &down);
    let alpha_up = gram(&up, &up);
    let cross = gram(&down, &up);
    let max_cross_block = max_abs(&cross);
    let max_word_dependence = max_abs(&(&alpha_down - &alpha_up));

    let mean = (&alpha_down + &alpha_up) * C64::new(0.5, 0.0);
    let herm = (&mean + mean.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let beta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mixing = DMatrix::from_fn(n, n, |j, k| eig.eigenvectors[(j, order[k])]);
    let f_basis = mix_operators(errs, &mixing);
    let verdict = if max_cross_block.max(max_word_dependence) < tol { KlVerdict::Exact } else { KlVerdict::Fail };
    Ok(KlReport { alpha_down, alpha_up, max_cross_block, max_word_dependence, beta, mixing, f_basis, verdict })
}

/// Decides exact/approximate/fail from an error family `x -> ops` by
/// evaluating the violation at `x` and `x/2`. A ratio of 4 within 25%
/// (quadratic violation) gives the approximate verdict.
pub fn kl_check_scaling<F>(code: &CodeSpace, family: F, x: f64) -> Result<KlReport>
where
    F: Fn(f64) -> Result<Vec<Operator>>,
{
    let mut report = kl_check(code, &family(x)?)?;
    if report.verdict == KlVerdict::Exact {
        return Ok(report);
    }
    let half = kl_check(code, &family(0.5 * x)?)?;
    let ratio = report.violation() / half.violation();
    report.verdict = if (ratio - 4.0).abs() <= 1.0 {
        KlVerdict::Approximate { violation_order: 2, ratio }
    } else {
        KlVerdict::Fail
    };
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct RecoveryChannel {
    pub channel: KrausChannel,
    /// Projectors onto the recognized error spaces, one per retained `F_k`.
    pub error_projectors: Vec<Operator>,
    /// `beta_k` of the retained `F_k`.
    pub beta: Vec<f64>,
    /// Number of sink operators completing the channel.
    pub completion_ops: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct RecoveryOptions {
    pub beta_tol: f64,
    /// Build even when the exact KL check fails (approximate codes).
    pub allow_approximate: bool,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self { beta_tol: 1e-12, allow_approximate: false }
    }
}

/// Recovery from the `F` basis. The normalized images `F_k |W_sigma>` are
/// orthonormalized in order of decreasing `beta`, `R_k` maps them back to the
/// codewords, and the leftover space is sent to `|W_down>`. When the KL
/// conditions hold exactly, `R_k = P_c F_k^dag / sqrt(beta_k)`.
pub fn build_recovery(code: &CodeSpace, errs: &[Operator], opts: RecoveryOptions) -> Result<RecoveryChannel> {
    let report = kl_check(code, errs)?;
    if report.verdict != KlVerdict::Exact && !opts.allow_approximate {
        return Err(Error::KnillLaflamme(format!("violation {:.3e}", report.violation())));
    }
    if let Some(&b) = report.beta.iter().find(|&&b| b < -1e-10) {
        return Err(Error::KnillLaflamme(format!("beta matrix not positive ({b:.3e})")));
    }
    let dim = code.host_dim();
    let words = code.codewords();
    let mut basis: Vec<DVector<C64>> = Vec::new();
    let mut ops = Vec::new();
    let mut labels = Vec::new();
    let mut projectors = Vec::new();
    let mut betas = Vec::new();
    for (k, (f, &b)) in report.f_basis.iter().zip(&report.beta).enumerate() {
        if b < opts.beta_tol {
            continue;
        }
        let mut r = DMatrix::<C64>::zeros(dim, dim);
        let mut p = DMatrix::<C64>::zeros(dim, dim);
        let mut kept = 0;
        for w in words {
            let mut v = f.apply(w).amplitudes().clone();
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dotc(&v);
                    v -= q * c;
                }
            }
            let norm = v.norm();
            if norm < 1e-8 * b.sqrt() {
                continue;
            }
            v /= C64::new(norm, 0.0);
            r += w.amplitudes() * v.adjoint();
            p += &v * v.adjoint();
            basis.push(v);
            kept += 1;
        }
        if kept > 0 {
            ops.push(Operator::new(r)?);
            projectors.push(Operator::new(p)?);
            labels.push(format!("R{k}"));
            betas.push(b);
        }
    }
    let rest = complete_basis(&basis, dim);
    let completion_ops = rest.len();
    for (i, q) in rest.iter().enumerate() {
        ops.push(Operator::new(words[0].amplitudes() * q.adjoint())?);
        labels.push(format!("sink{i}"));
    }
    let channel = KrausChannel::new(ops, labels)?;
    Ok(RecoveryChannel { channel, error_projectors: projectors, beta: betas, completion_ops })
}

/// Leung-Nielsen-Chuang-Yamamoto four-qubit amplitude-damping code.
pub fn leung4_code() -> CodeSpace {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let zero = StateVector::qubits(&[0, 0, 0, 0]).add(&StateVector::qubits(&[1, 1, 1, 1])).scale(C64::new(s, 0.0));
    let one = StateVector::qubits(&[1, 1, 0, 0]).add(&StateVector::qubits(&[0, 0, 1, 1])).scale(C64::new(s, 0.0));
    let stabilizers = vec![
        pauli_string(&[z(), z(), id2(), id2()]),
        pauli_string(&[id2(), id2(), z(), z()]),
        pauli_string(&[x(), x(), x(), x()]),
    ];
    CodeSpace::new("leung4", zero, one, stabilizers).expect("Leung code is valid")
}

/// `{E0, E-^(1), .., E-^(4)}`: no damping, or one damping event on qubit `j`.
pub fn leung4_errors(p: f64) -> Vec<Operator> {
    let [k0, km] = qubit_amplitude_damping(p);
    let mut ops = vec![tensor_all(&[k0.clone(), k0.clone(), k0.clone(), k0.clone()])];
    for j in 0..4 {
        let factors: Vec<Operator> = (0..4).map(|q| if q == j { km.clone() } else { k0.clone() }).collect();
        ops.push(tensor_all(&factors));
    }
    ops
}

pub fn leung4_first_order_recovery(p_minus: f64) -> Result<RecoveryChannel> {
    if !(0.0..0.5).contains(&p_minus) {
        return Err(Error::InvalidParameter(format!("p- = {p_minus} outside [0, 0.5)")));
    }
    build_recovery(&leung4_code(), &leung4_errors(p_minus), RecoveryOptions { allow_approximate: true, ..Default::default() })
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
    fn encoding_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(encode_repetition3(ONE, ZERO).unwrap(), StateVector::qubits(&[0, 0, 0]));
        let ghz = encode_repetition3(c(s), c(s)).unwrap();
        let expected = StateVector::qubits(&[0, 0, 0]).add(&StateVector::qubits(&[1, 1, 1])).scale(c(s));
        assert!(ghz.sub(&expected).norm() < 1e-15);
        assert!(encode_repetition3(c(1.0), c(1.0)).is_err());
    }

    #[test]
    fn syndrome_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let code = repetition3_code();
        let out = syndrome_repetition3(&x_on(2).apply(code.zero()), &mut rng).unwrap();
        assert_eq!(out.syndrome, Syndrome { s1: -1, s2: -1 });
        let psi = code.encode(c(0.6), C64::new(0.0, 0.8));
        let out = syndrome_repetition3(&psi, &mut rng).unwrap();
        assert_eq!(out.syndrome, Syndrome { s1: 1, s2: 1 });
        assert!((out.post_state.overlap_sq(&psi) - 1.0).abs() < 1e-14);
        let out = syndrome_repetition3(&x_on(1).apply(&psi), &mut rng).unwrap();
        assert_eq!(out.syndrome, Syndrome { s1: -1, s2: 1 });
        assert!((x_on(1).apply(&out.post_state).overlap_sq(&psi) - 1.0).abs() < 1e-14);
        for j in 1..=3 {
            let hit = x_on(j).apply(&psi);
            let a = syndrome_repetition3_ext(&hit, 1, false, &mut rng).unwrap();
            let b = syndrome_repetition3_ext(&hit, 1, true, &mut rng).unwrap();
            assert_eq!(a.syndrome, b.syndrome);
            assert_eq!(a.syndrome.flipped_qubit(), Some(j));
        }
    }

    #[test]
    fn logical_algebra_on_code_space() {
        let [xl, yl, zl] = repetition3_logicals();
        let pc = repetition3_code().projector();
        let comm = xl.commutator(&yl).sandwich(&pc);
        assert!(comm.distance(&zl.scale(C64::new(0.0, 2.0)).sandwich(&pc)) < 1e-12);
        let yy = pauli_string(&[Operator::pauli_y(), Operator::pauli_y(), Operator::pauli_y()]).scale_real(-1.0);
        assert!(yl.distance(&yy) < 1e-12);
        for s in repetition3_stabilizers() {
            for l in [&xl, &yl, &zl] {
                assert!(s.commutator(l).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_flips_cause_logical_error() {
        let code = repetition3_code();
        let psi = code.encode(c(0.6), c(0.8));
        let hit = (&x_on(1) * &x_on(2)).apply(&psi);
        let flipped = repetition3_logicals()[0].apply(&psi);
        for mode in [CorrectionMode::Measured, CorrectionMode::MeasurementFree] {
            let out = correct_repetition3(&hit.to_density().unwrap(), mode).unwrap();
            assert!((fidelity(&out, &flipped).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_error_limits() {
        let psi = repetition3_code().encode(c(0.6), c(0.8));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let t = coherent_error_trial(0.0, &psi, &mut rng).unwrap();
            assert_eq!(t.syndrome, Syndrome { s1: 1, s2: 1 });
            assert!((t.fidelity - 1.0).abs() < 1e-12);
            let t = coherent_error_trial(std::f64::consts::FRAC_PI_2, &psi, &mut rng).unwrap();
            assert_eq!(t.syndrome, Syndrome { s1: -1, s2: -1 });
            assert!((t.fidelity - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bath_examples() {
        let psi = repetition3_code().encode(c(0.6), c(0.8));
        let b = bath_error_branches(ZERO, &psi).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].syndrome, Syndrome { s1: 1, s2: 1 });
        let b = bath_error_branches(ONE, &psi).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].syndrome, Syndrome { s1: -1, s2: -1 });
        let b = bath_error_branches(C64::new(0.3, 0.4), &psi).unwrap();
        assert_eq!(b.len(), 2);
        assert!((b[0].prob - 0.75).abs() < 1e-12 && (b[1].prob - 0.25).abs() < 1e-12);
        assert!(b.iter().all(|x| x.schmidt_rank == 1 && x.schmidt_residual < 1e-10));
        // before measurement the state is entangled
        let st = bath_error_state(C64::new(0.3, 0.4), &psi).unwrap();
        assert_eq!(schmidt_summary(&st).unwrap().0, 2);
    }

    #[test]
    fn kl_bitflip_exact() {
        let p = 0.01;
        let r = kl_check(&repetition3_code(), &bitflip_errors(p)).unwrap();
        assert_eq!(r.verdict, KlVerdict::Exact);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0 - 3.0 * p), c(p), c(p), c(p)]));
        assert!(max_abs(&(r.alpha_down - &expected)) < 1e-12);
    }

    #[test]
    fn kl_amplitude_damping_fails_on_repetition() {
        let r = kl_check_scaling(&repetition3_code(), |p| Ok(amplitude_damping_register(p, 3)), 0.02).unwrap();
        assert_eq!(r.verdict, KlVerdict::Fail);
    }

    #[test]
    fn leung_numbers() {
        let p = 0.1;
        let code = leung4_code();
        let e = leung4_errors(p);
        assert!((e[3].apply(code.zero()).norm().powi(2) - 0.03645).abs() < 1e-12);
        let no_jump = e[0].apply(code.zero()).norm().powi(2);
        assert!((no_jump - 0.5 * (1.0 + 0.9f64.powi(4))).abs() < 1e-12);
        assert!((no_jump - 0.8281).abs() < 5e-5);
        let r = kl_check_scaling(&code, |p| Ok(leung4_errors(p)), 0.01).unwrap();
        assert!(matches!(r.verdict, KlVerdict::Approximate { .. }), "{:?}", r.verdict);
        assert!(leung4_first_order_recovery(0.5).is_err());
    }

    #[test]
    fn trivial_error_set_recovery() {
        let code = repetition3_code();
        let rec = build_recovery(&code, &[Operator::identity(8)], RecoveryOptions::default()).unwrap();
        assert_eq!(rec.completion_ops, 6);
        for psi in code.cardinal_states() {
            let out = apply_channel(&rec.channel, &psi.to_density().unwrap()).unwrap();
            assert!((fidelity(&out, &psi).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn recovery_projectors_orthogonal() {
        let rec = build_recovery(&repetition3_code(), &bitflip_errors(0.05), RecoveryOptions::default()).unwrap();
        for (i, a) in rec.error_projectors.iter().enumerate() {
            assert!(a.is_projector(1e-12));
            for b in &rec.error_projectors[i + 1..] {
                assert!((a * b).max_abs() < 1e-12);
            }
        }
        assert!(rec.channel.completeness_defect() < 1e-12);
    }
}
