//! Kitaev toric code as a GF(2) stabilizer model.
//!
//! Sites `(i, j)` live on an `Lx x Ly` torus. Bond `h(i, j) = j Lx + i`
//! joins `(i, j)` to `(i+1, j)` and bond `v(i, j) = Lx Ly + j Lx + i` joins
//! `(i, j)` to `(i, j+1)`. Star `A_s` is the Z-type product over the four
//! bonds at a site, so X errors show up as charges; plaquette `B_p` is the
//! X-type product around the square with lower-left corner `(i, j)`, so Z
//! errors show up as fluxes. Site couplings `J_s` and `K_p` in a disordered
//! Hamiltonian change energies only and leave everything here untouched.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gf2::{BitRow, Gf2Matrix};
use crate::montecarlo;

#[derive(Clone, Debug)]
pub struct ToricLattice {
    pub lx: usize,
    pub ly: usize,
    stars: Vec<[usize; 4]>,
    plaquettes: Vec<[usize; 4]>,
}

impl ToricLattice {
    pub fn n_qubits(&self) -> usize {
        2 * self.lx * self.ly
    }

    pub fn n_sites(&self) -> usize {
        self.lx * self.ly
    }

    pub fn h(&self, i: usize, j: usize) -> usize {
        (j % self.ly) * self.lx + i % self.lx
    }

    pub fn v(&self, i: usize, j: usize) -> usize {
        self.lx * self.ly + (j % self.ly) * self.lx + i % self.lx
    }

    /// Index of site or plaquette `(i, j)`.
    pub fn cell(&self, i: usize, j: usize) -> usize {
        (j % self.ly) * self.lx + i % self.lx
    }

    fn coords(&self, c: usize) -> (usize, usize) {
        (c % self.lx, c / self.lx)
    }

    pub fn stars(&self) -> &[[usize; 4]] {
        &self.stars
    }

    pub fn plaquettes(&self) -> &[[usize; 4]] {
        &self.plaquettes
    }

    pub fn star_matrix(&self) -> Gf2Matrix {
        Gf2Matrix::new(self.n_qubits(), self.stars.iter().map(|b| BitRow::from_indices(self.n_qubits(), b)).collect())
    }

    pub fn plaquette_matrix(&self) -> Gf2Matrix {
        Gf2Matrix::new(self.n_qubits(), self.plaquettes.iter().map(|b| BitRow::from_indices(self.n_qubits(), b)).collect())
    }

    /// Horizontal X loop along row `j` (a representative of `X_1`).
    pub fn horizontal_loop(&self, j: usize) -> BitRow {
        BitRow::from_indices(self.n_qubits(), &(0..self.lx).map(|i| self.h(i, j)).collect::<Vec<_>>())
    }

    /// Vertical X loop along column `i` (a representative of `X_2`).
    pub fn vertical_loop(&self, i: usize) -> BitRow {
        BitRow::from_indices(self.n_qubits(), &(0..self.ly).map(|j| self.v(i, j)).collect::<Vec<_>>())
    }

    /// Z loop on the dual lattice crossing every vertical bond of row `j` (`Z_1`).
    pub fn dual_horizontal_loop(&self, j: usize) -> BitRow {
        BitRow::from_indices(self.n_qubits(), &(0..self.lx).map(|i| self.v(i, j)).collect::<Vec<_>>())
    }

    /// Z loop on the dual lattice crossing every horizontal bond of column `i` (`Z_2`).
    pub fn dual_vertical_loop(&self, i: usize) -> BitRow {
        BitRow::from_indices(self.n_qubits(), &(0..self.ly).map(|j| self.h(i, j)).collect::<Vec<_>>())
    }
}

/// Builds the index maps and checks that every bond sits in exactly two
/// stars and two plaquettes.
pub fn build_lattice(lx: usize, ly: usize) -> Result<ToricLattice> {
    if lx < 2 || ly < 2 {
        return Err(Error::InvalidParameter(format!("torus needs Lx, Ly >= 2 (got {lx}x{ly})")));
    }
    let mut lat = ToricLattice { lx, ly, stars: Vec::new(), plaquettes: Vec::new() };
    for j in 0..ly {
        for i in 0..lx {
            let (im, jm) = ((i + lx - 1) % lx, (j + ly - 1) % ly);
            lat.stars.push([lat.h(i, j), lat.h(im, j), lat.v(i, j), lat.v(i, jm)]);
            lat.plaquettes.push([lat.h(i, j), lat.h(i, j + 1), lat.v(i, j), lat.v(i + 1, j)]);
        }
    }
    let n = lat.n_qubits();
    for (what, list) in [("star", &lat.stars), ("plaquette", &lat.plaquettes)] {
        let mut count = vec![0usize; n];
        for bonds in list.iter() {
            for &b in bonds {
                count[b] += 1;
            }
        }
        if let Some(q) = count.iter().position(|&c| c != 2) {
            return Err(Error::InvalidParameter(format!("bond {q} lies in {} {what}s", count[q])));
        }
    }
    Ok(lat)
}

/// Pauli operator up to phase, as X and Z support bit vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PauliPattern {
    pub x: BitRow,
    pub z: BitRow,
}

impl PauliPattern {
    pub fn identity(n: usize) -> Self {
        Self { x: BitRow::zeros(n), z: BitRow::zeros(n) }
    }

    pub fn x_only(x: BitRow) -> Self {
        let n = x.len();
        Self { x, z: BitRow::zeros(n) }
    }

    pub fn z_only(z: BitRow) -> Self {
        let n = z.len();
        Self { x: BitRow::zeros(n), z }
    }

    pub fn compose(&self, other: &PauliPattern) -> PauliPattern {
        PauliPattern { x: self.x.xor(&other.x), z: self.z.xor(&other.z) }
    }

    /// True when the two operators anticommute.
    pub fn anticommutes(&self, other: &PauliPattern) -> bool {
        self.x.dot(&other.z) ^ self.z.dot(&other.x)
    }

    pub fn is_identity(&self) -> bool {
        self.x.is_zero() && self.z.is_zero()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StabilizerStructure {
    pub commutation_ok: bool,
    pub independent_count: usize,
    pub logical_qubits: usize,
    pub degeneracy: u64,
}

/// Commutation through the symplectic product of Z-type stars with X-type
/// plaquettes, rank of the stacked generators, and the ground-space size.
pub fn stabilizer_structure(lat: &ToricLattice) -> StabilizerStructure {
    let n = lat.n_qubits();
    let stars: Vec<PauliPattern> =
        lat.stars.iter().map(|b| PauliPattern::z_only(BitRow::from_indices(n, b))).collect();
    let plaqs: Vec<PauliPattern> =
        lat.plaquettes.iter().map(|b| PauliPattern::x_only(BitRow::from_indices(n, b))).collect();
    let commutation_ok = stars.iter().all(|s| plaqs.iter().all(|p| !s.anticommutes(p)));
    let symplectic = |p: &PauliPattern| {
        let mut bits = p.x.to_bits();
        bits.extend(p.z.to_bits());
        BitRow::from_bits(&bits)
    };
    let rows: Vec<BitRow> = stars.iter().chain(&plaqs).map(symplectic).collect();
    let independent_count = Gf2Matrix::new(2 * n, rows).rank();
    let logical_qubits = n - independent_count;
    StabilizerStructure { commutation_ok, independent_count, logical_qubits, degeneracy: 1u64 << logical_qubits }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToricSyndrome {
    /// Charges: stars with `A_s = -1`.
    pub stars: BitRow,
    /// Fluxes: plaquettes with `B_p = -1`.
    pub plaquettes: BitRow,
}

impl ToricSyndrome {
    pub fn is_empty(&self) -> bool {
        self.stars.is_zero() && self.plaquettes.is_zero()
    }
}

pub fn syndrome(lat: &ToricLattice, err: &PauliPattern) -> ToricSyndrome {
    ToricSyndrome { stars: lat.star_matrix().mul_vec(&err.x), plaquettes: lat.plaquette_matrix().mul_vec(&err.z) }
}

/// Signed shortest step count from `a` to `b` on a cycle of length `l`;
/// the positive direction wins ties.
fn torus_delta(a: usize, b: usize, l: usize) -> isize {
    let fwd = (b + l - a) % l;
    if fwd <= l - fwd {
        fwd as isize
    } else {
        -((l - fwd) as isize)
    }
}

fn torus_distance(lat: &ToricLattice, a: usize, b: usize) -> usize {
    let (ai, aj) = lat.coords(a);
    let (bi, bj) = lat.coords(b);
    torus_delta(ai, bi, lat.lx).unsigned_abs() + torus_delta(aj, bj, lat.ly).unsigned_abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefectKind {
    /// Star defects, cleared by X strings on the lattice.
    Charge,
    /// Plaquette defects, cleared by Z strings on the dual lattice.
    Flux,
}

/// Bond crossed when stepping one unit from cell `(i, j)`.
fn step_bond(lat: &ToricLattice, kind: DefectKind, i: usize, j: usize, horizontal: bool, forward: bool) -> usize {
    let (lx, ly) = (lat.lx, lat.ly);
    match (kind, horizontal, forward) {
        (DefectKind::Charge, true, true) => lat.h(i, j),
        (DefectKind::Charge, true, false) => lat.h((i + lx - 1) % lx, j),
        (DefectKind::Charge, false, true) => lat.v(i, j),
        (DefectKind::Charge, false, false) => lat.v(i, (j + ly - 1) % ly),
        (DefectKind::Flux, true, true) => lat.v(i + 1, j),
        (DefectKind::Flux, true, false) => lat.v(i, j),
        (DefectKind::Flux, false, true) => lat.h(i, j + 1),
        (DefectKind::Flux, false, false) => lat.h(i, j),
    }
}

/// Greedy matching: all defect pairs sorted by torus Manhattan distance
/// (then by the lower index, then the higher), each accepted when both ends
/// are still free; every pair is joined by an x-then-y shortest path.
pub fn greedy_decode(lat: &ToricLattice, defects: &BitRow, kind: DefectKind) -> Result<BitRow> {
    let list: Vec<usize> = defects.ones().collect();
    if list.len() % 2 == 1 {
        return Err(Error::OddDefects(list.len()));
    }
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (ia, &a) in list.iter().enumerate() {
        for &b in &list[ia + 1..] {
            pairs.push((torus_distance(lat, a, b), a, b));
        }
    }
    pairs.sort_unstable();
    let mut used = vec![false; lat.n_sites()];
    let mut corr = BitRow::zeros(lat.n_qubits());
    for (_, a, b) in pairs {
        if used[a] || used[b] {
            continue;
        }
        used[a] = true;
        used[b] = true;
        let (mut i, mut j) = lat.coords(a);
        let (bi, bj) = lat.coords(b);
        let dx = torus_delta(i, bi, lat.lx);
        for _ in 0..dx.unsigned_abs() {
            corr.flip(step_bond(lat, kind, i, j, true, dx > 0));
            i = if dx > 0 { (i + 1) % lat.lx } else { (i + lat.lx - 1) % lat.lx };
        }
        let dy = torus_delta(j, bj, lat.ly);
        for _ in 0..dy.unsigned_abs() {
            corr.flip(step_bond(lat, kind, i, j, false, dy > 0));
            j = if dy > 0 { (j + 1) % lat.ly } else { (j + lat.ly - 1) % lat.ly };
        }
    }
    Ok(corr)
}

/// Corrections for both defect species of a syndrome.
pub fn decode(lat: &ToricLattice, syn: &ToricSyndrome) -> Result<PauliPattern> {
    Ok(PauliPattern {
        x: greedy_decode(lat, &syn.stars, DefectKind::Charge)?,
        z: greedy_decode(lat, &syn.plaquettes, DefectKind::Flux)?,
    })
}

/// Winding parities of a syndrome-free Pauli pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LogicalClass {
    /// `[X_1, X_2]`: horizontal and vertical X windings.
    pub x: [bool; 2],
    /// `[Z_1, Z_2]`: horizontal and vertical dual Z windings.
    pub z: [bool; 2],
}

impl LogicalClass {
    pub fn is_stabilizer(&self) -> bool {
        !(self.x[0] || self.x[1] || self.z[0] || self.z[1])
    }

    pub fn x_error(&self) -> bool {
        self.x[0] || self.x[1]
    }

    pub fn z_error(&self) -> bool {
        self.z[0] || self.z[1]
    }
}

/// Classifies a closed pattern by its parities against the cuts
/// `{h(0, j)}`, `{v(i, 0)}` (X windings) and `{v(0, j)}`, `{h(i, 0)}` (Z windings).
pub fn logical_error_check(lat: &ToricLattice, residual: &PauliPattern) -> Result<LogicalClass> {
    if !syndrome(lat, residual).is_empty() {
        return Err(Error::NonemptySyndrome);
    }
    let n = lat.n_qubits();
    let cut = |bonds: Vec<usize>| BitRow::from_indices(n, &bonds);
    let hx = cut((0..lat.ly).map(|j| lat.h(0, j)).collect());
    let vx = cut((0..lat.lx).map(|i| lat.v(i, 0)).collect());
    let vz = cut((0..lat.ly).map(|j| lat.v(0, j)).collect());
    let hz = cut((0..lat.lx).map(|i| lat.h(i, 0)).collect());
    Ok(LogicalClass { x: [residual.x.dot(&hx), residual.x.dot(&vx)], z: [residual.z.dot(&vz), residual.z.dot(&hz)] })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ToricMonteCarlo {
    pub l: usize,
    pub p: f64,
    pub trials: u64,
    pub seed: u64,
    pub logical_x_failures: u64,
    pub logical_z_failures: u64,
    pub logical_x_rate: f64,
    pub logical_z_rate: f64,
}

/// Independent X and Z flips with probability `p` on every bond of an
/// `L x L` torus, greedy decoding, and counting of nontrivial windings.
pub fn toric_monte_carlo(l: usize, p: f64, trials: u64, seed: u64) -> Result<ToricMonteCarlo> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("flip probability {p} outside [0, 1]")));
    }
    let lat = build_lattice(l, l)?;
    let n = lat.n_qubits();
    let counts = montecarlo::accumulate(trials, seed, 2, |rng, acc| {
        use rand::Rng;
        let mut err = PauliPattern::identity(n);
        for q in 0..n {
            if rng.gen::<f64>() < p {
                err.x.flip(q);
            }
        }
        for q in 0..n {
            if rng.gen::<f64>() < p {
                err.z.flip(q);
            }
        }
        let corr = decode(&lat, &syndrome(&lat, &err)).expect("syndromes have even weight");
        let class = logical_error_check(&lat, &err.compose(&corr)).expect("decoder clears the syndrome");
        acc[0] += u64::from(class.x_error());
        acc[1] += u64::from(class.z_error());
    });
    Ok(ToricMonteCarlo {
        l,
        p,
        trials,
        seed,
        logical_x_failures: counts[0],
        logical_z_failures: counts[1],
        logical_x_rate: counts[0] as f64 / trials.max(1) as f64,
        logical_z_rate: counts[1] as f64 / trials.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting() {
        let l = build_lattice(2, 2).unwrap();
        assert_eq!((l.n_qubits(), l.stars().len(), l.plaquettes().len()), (8, 4, 4));
        assert_eq!(build_lattice(3, 3).unwrap().n_qubits(), 18);
        assert!(build_lattice(2, 3).is_ok());
        assert!(build_lattice(1, 3).is_err());
    }

    #[test]
    fn structure_and_degeneracy() {
        for (lx, ly, rank) in [(2, 2, 6), (3, 3, 16), (4, 4, 30), (2, 3, 10)] {
            let s = stabilizer_structure(&build_lattice(lx, ly).unwrap());
            assert!(s.commutation_ok);
            assert_eq!(s.independent_count, rank);
            assert_eq!(s.logical_qubits, 2);
            assert_eq!(s.degeneracy, 4);
        }
    }

    #[test]
    fn star_and_plaquette_products_vanish() {
        let lat = build_lattice(3, 4).unwrap();
        for m in [lat.star_matrix(), lat.plaquette_matrix()] {
            let mut acc = BitRow::zeros(lat.n_qubits());
            for r in m.rows() {
                acc.xor_assign(r);
            }
            assert!(acc.is_zero());
        }
        for s in lat.stars() {
            for p in lat.plaquettes() {
                let shared = s.iter().filter(|b| p.contains(b)).count();
                assert!(shared == 0 || shared == 2);
            }
        }
    }

    #[test]
    fn single_flip_makes_adjacent_charges() {
        let lat = build_lattice(4, 4).unwrap();
        let err = PauliPattern::x_only(BitRow::from_indices(32, &[lat.h(1, 2)]));
        let syn = syndrome(&lat, &err);
        assert_eq!(syn.stars.ones().collect::<Vec<_>>(), vec![lat.cell(1, 2), lat.cell(2, 2)]);
        assert!(syn.plaquettes.is_zero());
        let corr = greedy_decode(&lat, &syn.stars, DefectKind::Charge).unwrap();
        assert_eq!(corr.ones().collect::<Vec<_>>(), vec![lat.h(1, 2)]);
        assert!(greedy_decode(&lat, &BitRow::zeros(16), DefectKind::Charge).unwrap().is_zero());
        assert!(matches!(
            greedy_decode(&lat, &BitRow::from_indices(16, &[3]), DefectKind::Flux),
            Err(Error::OddDefects(1))
        ));
    }

    #[test]
    fn loops_and_logical_classes() {
        let lat = build_lattice(4, 4).unwrap();
        let plaq = PauliPattern::x_only(BitRow::from_indices(32, &lat.plaquettes()[5]));
        assert!(syndrome(&lat, &plaq).is_empty());
        assert!(logical_error_check(&lat, &plaq).unwrap().is_stabilizer());
        let star = PauliPattern::z_only(BitRow::from_indices(32, &lat.stars()[7]));
        assert!(logical_error_check(&lat, &star).unwrap().is_stabilizer());

        let wrap = PauliPattern::x_only(lat.horizontal_loop(1));
        assert!(syndrome(&lat, &wrap).is_empty());
        let class = logical_error_check(&lat, &wrap).unwrap();
        assert_eq!(class, LogicalClass { x: [true, false], z: [false, false] });
        let twice = wrap.compose(&PauliPattern::x_only(lat.horizontal_loop(3)));
        assert!(logical_error_check(&lat, &twice).unwrap().is_stabilizer());
        let zl = PauliPattern::z_only(lat.dual_horizontal_loop(2));
        assert_eq!(logical_error_check(&lat, &zl).unwrap().z, [true, false]);
        // conjugate logical pairs anticommute, mismatched ones commute
        let x1 = PauliPattern::x_only(lat.horizontal_loop(0));
        let x2 = PauliPattern::x_only(lat.vertical_loop(0));
        let z1 = PauliPattern::z_only(lat.dual_horizontal_loop(0));
        let z2 = PauliPattern::z_only(lat.dual_vertical_loop(0));
        assert!(x1.anticommutes(&z2) && x2.anticommutes(&z1));
        assert!(!x1.anticommutes(&z1) && !x2.anticommutes(&z2));
        assert!(logical_error_check(&lat, &PauliPattern::x_only(BitRow::from_indices(32, &[0]))).is_err());
    }

    #[test]
    fn encircled_charge_braiding_sign() {
        // a string ending inside a closed Z loop anticommutes with it
        let lat = build_lattice(5, 5).unwrap();
        let string = PauliPattern::x_only(BitRow::from_indices(50, &[lat.h(1, 2), lat.h(2, 2)]));
        let around_end = PauliPattern::z_only(BitRow::from_indices(50, &lat.stars()[lat.cell(3, 2)]));
        let around_both = PauliPattern::z_only(
            BitRow::from_indices(50, &lat.stars()[lat.cell(1, 2)]).xor(&BitRow::from_indices(50, &lat.stars()[lat.cell(2, 2)]))
                .xor(&BitRow::from_indices(50, &lat.stars()[lat.cell(3, 2)])),
        );
        assert!(string.anticommutes(&around_end));
        assert!(!string.anticommutes(&around_both));
    }

    #[test]
    fn decoder_always_clears_syndrome() {
        use rand::{Rng, SeedableRng};
        let lat = build_lattice(5, 4).unwrap();
        let n = lat.n_qubits();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let mut e = PauliPattern::identity(n);
            for q in 0..n {
                if rng.gen::<f64>() < 0.15 {
                    e.x.flip(q);
                }
                if rng.gen::<f64>() < 0.15 {
                    e.z.flip(q);
                }
            }
            let c = decode(&lat, &syndrome(&lat, &e)).unwrap();
            assert!(syndrome(&lat, &e.compose(&c)).is_empty());
        }
    }

    #[test]
    fn monte_carlo_is_seeded_and_zero_at_zero() {
        let a = toric_monte_carlo(4, 0.05, 2000, 7).unwrap();
        let b = toric_monte_carlo(4, 0.05, 2000, 7).unwrap();
        assert_eq!((a.logical_x_failures, a.logical_z_failures), (b.logical_x_failures, b.logical_z_failures));
        let z = toric_monte_carlo(4, 0.0, 500, 1).unwrap();
        assert_eq!(z.logical_x_failures + z.logical_z_failures, 0);
    }
}
