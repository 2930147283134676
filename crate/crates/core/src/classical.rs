//! Classical coding and fault-tolerance analytics: repetition codes,
//! parity checks, the Hamming [7,4,3] code, triple modular redundancy for
//! memory and NAND gates, and recursive concatenation.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gf2::{BitRow, Gf2Matrix};
use crate::montecarlo;

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {p} is not a probability")))
    }
}

/// Binomial coefficient as a float (exact for the sizes used here).
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probabilities of zero, one and two flips in a block of `m` data bits plus
/// one parity bit.
pub fn parity_detect_probs(m: u32, eps: f64) -> (f64, f64, f64) {
    let n = m as i32 + 1;
    let q = 1.0 - eps;
    let p0 = q.powi(n);
    let p1 = n as f64 * eps * q.powi(n - 1);
    let p2 = binomial(n as u64, 2) * eps * eps * q.powi(n - 2);
    (p0, p1, p2)
}

/// Logical error of the `2m+1` bit repetition code under majority vote.
pub fn repetition_logical_error(m: u32, eps: f64) -> f64 {
    let n = 2 * m + 1;
    let q = 1.0 - eps;
    (m + 1..=n)
        .map(|k| binomial(n as u64, k as u64) * eps.powi(k as i32) * q.powi((n - k) as i32))
        .sum()
}

/// Relative width `sigma/N` of the error-count distribution at `eps = 1/2`.
pub fn repetition_transition_width(m: u32) -> f64 {
    (0.25 / (2 * m + 1) as f64).sqrt()
}

/// `2^R >= M + R + 1`.
pub fn redundancy_bound_ok(data_bits: u64, ancilla_bits: u32) -> bool {
    let need = data_bits as u128 + ancilla_bits as u128 + 1;
    match 1u128.checked_shl(ancilla_bits) {
        Some(cap) if ancilla_bits < 128 => cap >= need,
        _ => true,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShannonRedundancy {
    /// Entropy of the error pattern in bits.
    pub entropy_bits: f64,
    /// Exact rate `1 - S/N`.
    pub rate: f64,
    /// Small-error approximation `1 - eps log2(2/eps)`.
    pub rate_small_eps: f64,
}

pub fn binary_entropy(eps: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(eps) + term(1.0 - eps)
}

pub fn shannon_redundancy(n: u64, eps: f64) -> Result<ShannonRedundancy> {
    check_prob("eps", eps)?;
    let h = binary_entropy(eps);
    let rate_small_eps = if eps <= 0.0 { 1.0 } else { 1.0 - eps * (2.0 / eps).log2() };
    Ok(ShannonRedundancy { entropy_bits: n as f64 * h, rate: 1.0 - h, rate_small_eps })
}

/// Linear block code given by its parity-check matrix and codeword list.
#[derive(Clone, Debug)]
pub struct BinaryCode {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub h: Gf2Matrix,
    pub codewords: Vec<BitRow>,
}

impl BinaryCode {
    /// Checks `H c = 0`, the codeword count and the declared distance.
    pub fn validate(&self) -> Result<()> {
        if self.codewords.len() != 1 << self.k {
            return Err(Error::InvalidParameter(format!("{} codewords for k = {}", self.codewords.len(), self.k)));
        }
        if let Some(c) = self.codewords.iter().find(|c| !self.h.mul_vec(c).is_zero()) {
            return Err(Error::InvalidParameter(format!("{c:?} violates a parity check")));
        }
        for (i, a) in self.codewords.iter().enumerate() {
            for b in &self.codewords[i + 1..] {
                if a.xor(b).weight() < self.d {
                    return Err(Error::InvalidParameter(format!("{a:?} and {b:?} closer than d = {}", self.d)));
                }
            }
        }
        Ok(())
    }
}

/// Columns of the Hamming parity-check matrix are the binary numbers 1..7,
/// with row `j` holding bit `j` (pool `P_{j+1}`).
pub fn hamming_h() -> Gf2Matrix {
    let rows: Vec<BitRow> = (0..3)
        .map(|j| {
            let bits: Vec<u8> = (1..=7u8).map(|k| (k >> j) & 1).collect();
            BitRow::from_bits(&bits)
        })
        .collect();
    Gf2Matrix::new(7, rows)
}

/// Data bits occupy positions 3, 5, 6, 7 (1-based); parity bits sit at the
/// powers of two.
pub const HAMMING_DATA_POSITIONS: [usize; 4] = [3, 5, 6, 7];

pub fn hamming_encode(data: [u8; 4]) -> [u8; 7] {
    let mut w = [0u8; 7];
    for (&pos, &b) in HAMMING_DATA_POSITIONS.iter().zip(&data) {
        w[pos - 1] = b & 1;
    }
    for j in 0..3 {
        let p = 1usize << j;
        let parity = (1..=7).filter(|&k| k != p && k & p != 0).fold(0, |acc, k| acc ^ w[k - 1]);
        w[p - 1] = parity;
    }
    w
}

/// Syndrome `(P3 P2 P1)` read as a number, i.e. the suspected flip position.
pub fn hamming_syndrome(word: &[u8; 7]) -> usize {
    let s = hamming_h().mul_vec(&BitRow::from_bits(word));
    (0..3).filter(|&j| s.get(j)).map(|j| 1 << j).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HammingDecoded {
    pub data: [u8; 4],
    /// 1-based position of the corrected bit; 0 when the syndrome was empty.
    pub position: usize,
}

/// Single-error syndrome decoding. Two flips decode to a wrong codeword.
pub fn hamming_decode(word: [u8; 7]) -> HammingDecoded {
    let position = hamming_syndrome(&word);
    let mut w = word;
    if position != 0 {
        w[position - 1] ^= 1;
    }
    let mut data = [0u8; 4];
    for (d, &pos) in data.iter_mut().zip(&HAMMING_DATA_POSITIONS) {
        *d = w[pos - 1] & 1;
    }
    HammingDecoded { data, position }
}

pub fn hamming_code() -> BinaryCode {
    let codewords = (0..16u8)
        .map(|v| {
            let data = [(v >> 3) & 1, (v >> 2) & 1, (v >> 1) & 1, v & 1];
            BitRow::from_bits(&hamming_encode(data))
        })
        .collect();
    BinaryCode { n: 7, k: 4, d: 3, h: hamming_h(), codewords }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TmrKind {
    Memory,
    Nand,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseParams {
    /// Per-bit flip probability (NAND gate failure for `TmrKind::Nand`).
    pub eps: f64,
    /// Majority-voter failure probability.
    pub eps_m: f64,
    /// Memory flip rate.
    pub kappa: f64,
    /// Memory waiting time.
    pub t0: f64,
}

impl NoiseParams {
    pub fn memory(eps_m: f64, kappa: f64, t0: f64) -> Self {
        Self { eps: memory_flip_probability(kappa * t0), eps_m, kappa, t0 }
    }

    pub fn gate(eps: f64, eps_m: f64) -> Self {
        Self { eps, eps_m, kappa: 0.0, t0: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_prob("eps", self.eps)?;
        check_prob("eps_M", self.eps_m)?;
        if !(self.kappa >= 0.0 && self.t0 >= 0.0) {
            return Err(Error::InvalidParameter("kappa and t0 must be non-negative".into()));
        }
        Ok(())
    }
}

/// Net flip probability after waiting `kappa * t0` with symmetric flips.
pub fn memory_flip_probability(kappa_t0: f64) -> f64 {
    0.5 * (1.0 - (-2.0 * kappa_t0).exp())
}

/// Inverse of [`memory_flip_probability`].
pub fn memory_wait_for_flip(eps: f64, kappa: f64) -> f64 {
    -(1.0 - 2.0 * eps).ln() / (2.0 * kappa)
}

/// Probability that an unprotected bit survives a wait of `kappa * t0`.
pub fn single_bit_reliability(kappa_t0: f64) -> f64 {
    0.5 * (1.0 + (-2.0 * kappa_t0).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TmrReliability {
    /// Probability that at most one of the three bits is wrong.
    pub r: f64,
    /// Per-bit success probability.
    pub r_m0: f64,
    /// Second-order approximation.
    pub quadratic: f64,
}

fn majority_of_three(x: f64) -> f64 {
    x.powi(3) + 3.0 * x * x * (1.0 - x)
}

pub fn tmr_reliability(kind: TmrKind, np: &NoiseParams) -> Result<TmrReliability> {
    np.validate()?;
    let r_m = 1.0 - np.eps_m;
    Ok(match kind {
        TmrKind::Memory => {
            // eps is the net flip probability of one wait, so R_0 = 1 - eps
            let r_m0 = r_m * (1.0 - np.eps);
            TmrReliability { r: majority_of_three(r_m0), r_m0, quadratic: 1.0 - 3.0 * (np.eps + np.eps_m).powi(2) }
        }
        TmrKind::Nand => {
            let r_m0 = r_m * r_m * (1.0 - np.eps);
            TmrReliability {
                r: majority_of_three(r_m0),
                r_m0,
                quadratic: 1.0 - 3.0 * (2.0 * np.eps_m + np.eps).powi(2),
            }
        }
    })
}

/// Values of `kappa t0` where the protected memory reliability equals that of
/// a single unprotected bit, for voter reliability `r_m`.
pub fn ftmem_crossings(r_m: f64) -> Result<Vec<f64>> {
    check_prob("R_M", r_m)?;
    let gap = |kt: f64| {
        let r0 = single_bit_reliability(kt);
        majority_of_three(r_m * r0) - r0
    };
    let grid: Vec<f64> = (0..=4000).map(|i| 1e-5 * (5.0f64 / 1e-5).powf(i as f64 / 4000.0)).collect();
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (fa, fb) = (gap(a), gap(b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb < 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if gap(a) * gap(mid) <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    Ok(roots)
}

/// Effective flip-rate ratio `kappa_eff / kappa = 3 (eps + eps_M)^2 / eps`
/// when each correction cycle waits long enough for per-bit error `eps`.
pub fn kappa_eff_ratio(eps: f64, eps_m: f64) -> f64 {
    3.0 * (eps + eps_m).powi(2) / eps
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MemoryOptimum {
    pub t0_opt: f64,
    pub eps_opt: f64,
    pub kappa_eff_ratio: f64,
    pub gain: f64,
    /// Set when `eps_M = 0`: the optimum is the limit `t0 -> 0`.
    pub degenerate: bool,
}

pub fn tmr_memory_optimize(eps_m: f64, kappa: f64) -> Result<MemoryOptimum> {
    check_prob("eps_M", eps_m)?;
    if eps_m >= 0.5 {
        return Err(Error::InvalidParameter(format!("eps_M = {eps_m} leaves no useful wait time")));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter("kappa must be positive".into()));
    }
    if eps_m == 0.0 {
        return Ok(MemoryOptimum { t0_opt: 0.0, eps_opt: 0.0, kappa_eff_ratio: 0.0, gain: f64::INFINITY, degenerate: true });
    }
    let ratio = kappa_eff_ratio(eps_m, eps_m);
    Ok(MemoryOptimum {
        t0_opt: memory_wait_for_flip(eps_m, kappa),
        eps_opt: eps_m,
        kappa_eff_ratio: ratio,
        gain: 1.0 / ratio,
        degenerate: false,
    })
}

/// Gain `eps / (3 (2 eps_M + eps)^2)` of a TMR NAND over a bare gate.
pub fn nand_gain(eps: f64, eps_m: f64) -> Result<f64> {
    check_prob("eps", eps)?;
    check_prob("eps_M", eps_m)?;
    let denom = 3.0 * (2.0 * eps_m + eps).powi(2);
    if denom <= 0.0 {
        return Err(Error::InvalidParameter("gain undefined at eps = eps_M = 0".into()));
    }
    Ok(eps / denom)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RecursionParams {
    pub c_n: f64,
    pub lambda: f64,
    pub eps0: f64,
    pub levels: usize,
    /// Hardware blow-up per level.
    pub copies: u32,
}

impl RecursionParams {
    pub fn new(c_n: f64, lambda: f64, eps0: f64, levels: usize) -> Self {
        Self { c_n, lambda, eps0, levels, copies: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecursionFlow {
    pub eps: Vec<f64>,
    pub hardware_cost: Vec<f64>,
    /// `eps_0 / eps_j`; equals `G^(2^j - 1)` with `G = 1/(c_n eps_0)` when `lambda = 0`.
    pub gain: Vec<f64>,
    /// Fixed point `(1 - lambda)/c_n` separating contraction from growth.
    pub threshold: f64,
    /// First level with `eps_j < lambda / c_n`, where the decay turns single-exponential.
    pub linear_crossover: Option<usize>,
}

pub fn recursion_flow(rp: &RecursionParams) -> Result<RecursionFlow> {
    if !(rp.c_n > 0.0) || !(0.0..1.0).contains(&rp.lambda) {
        return Err(Error::InvalidParameter("need c_n > 0 and 0 <= lambda < 1".into()));
    }
    let mut eps = vec![rp.eps0];
    for _ in 0..rp.levels {
        let e = *eps.last().expect("non-empty");
        eps.push(rp.lambda * e + rp.c_n * e * e);
    }
    let hardware_cost = (0..=rp.levels).map(|j| (rp.copies as f64).powi(j as i32)).collect();
    let gain = eps.iter().map(|e| rp.eps0 / e).collect();
    let linear_crossover =
        if rp.lambda > 0.0 { eps.iter().position(|&e| e < rp.lambda / rp.c_n) } else { None };
    Ok(RecursionFlow { eps, hardware_cost, gain, threshold: (1.0 - rp.lambda) / rp.c_n, linear_crossover })
}

/// How a bit that suffers several faults in one cycle is scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultModel {
    /// Any faulty component leaves its output bit wrong. This is the model
    /// behind `R_M0 = R_M R_0` and `R_M^2 R_0`.
    WorstCase,
    /// Faults are bit flips and compose by XOR, so two faults can cancel.
    Physical,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TmrSimulation {
    pub trials: u64,
    /// Fraction of trials with at most one wrong bit after each cycle.
    pub reliability: Vec<f64>,
    /// Fraction of trials whose majority is wrong after each cycle.
    pub logical_error: Vec<f64>,
}

/// Monte Carlo of the three-bit memory bundle: each cycle is a perfect
/// majority vote whose three outputs are each flipped with `eps_M`, followed
/// by a memory wait flipping each bit with `eps`.
pub fn simulate_tmr_memory(np: &NoiseParams, cycles: usize, trials: u64, seed: u64, model: FaultModel) -> Result<TmrSimulation> {
    np.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let (eps, eps_m) = (np.eps, np.eps_m);
    let counts = montecarlo::accumulate(trials, seed, 2 * cycles, |rng, acc| {
        // wrong[i]: bit i disagrees with the stored logical value
        let mut wrong = [false; 3];
        let mut failed = false;
        for c in 0..cycles {
            let majority_wrong = wrong.iter().filter(|&&w| w).count() >= 2;
            failed |= majority_wrong;
            for w in wrong.iter_mut() {
                let voter = rng.gen::<f64>() < eps_m;
                let memory = rng.gen::<f64>() < eps;
                *w = match model {
                    FaultModel::WorstCase => majority_wrong || voter || memory,
                    FaultModel::Physical => majority_wrong ^ voter ^ memory,
                };
            }
            let n_wrong = wrong.iter().filter(|&&w| w).count();
            if n_wrong <= 1 && !failed {
                acc[2 * c] += 1;
            }
            if failed || n_wrong >= 2 {
                acc[2 * c + 1] += 1;
            }
        }
    });
    let t = trials as f64;
    Ok(TmrSimulation {
        trials,
        reliability: (0..cycles).map(|c| counts[2 * c] as f64 / t).collect(),
        logical_error: (0..cycles).map(|c| counts[2 * c + 1] as f64 / t).collect(),
    })
}

/// Monte Carlo failure rate of a TMR NAND bundle. Each of the three branches
/// passes through two input voters and one NAND gate; a failed NAND emits the
/// complement. The bundle fails when two or more branch outputs are wrong.
pub fn simulate_tmr_nand(eps: f64, eps_m: f64, trials: u64, seed: u64, model: FaultModel) -> Result<f64> {
    check_prob("eps", eps)?;
    check_prob("eps_M", eps_m)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let failures = montecarlo::count(trials, seed, |rng| {
        let mut wrong_branches = 0;
        for _ in 0..3 {
            let a_in: bool = rng.gen();
            let b_in: bool = rng.gen();
            let a_bad = rng.gen::<f64>() < eps_m;
            let b_bad = rng.gen::<f64>() < eps_m;
            let gate_bad = rng.gen::<f64>() < eps;
            let wrong = match model {
                FaultModel::WorstCase => a_bad || b_bad || gate_bad,
                FaultModel::Physical => {
                    let ideal = !(a_in && b_in);
                    let actual = !((a_in ^ a_bad) && (b_in ^ b_bad)) ^ gate_bad;
                    actual != ideal
                }
            };
            wrong_branches += usize::from(wrong);
        }
        wrong_branches >= 2
    });
    Ok(failures as f64 / trials as f64)
}
