use nalgebra::DMatrix;
use proptest::prelude::*;
use qecw_core::bosonic::{damped_kraus, DampingParams, FockSpace};
use qecw_core::classical::{hamming_decode, hamming_encode};
use qecw_core::gf2::{BitRow, Gf2Matrix};
use qecw_core::gkp::{Displacer, PhaseVector};
use qecw_core::qubit_codes::{encode_repetition3, repetition3_stabilizers};
use qecw_core::toric::{build_lattice, greedy_decode, syndrome, DefectKind, PauliPattern};
use qecw_core::wigner::wigner_point;
use qecw_core::{apply_channel, measure_projector, DensityMatrix, Operator, StateVector, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn state(n: usize) -> impl Strategy<Value = StateVector> {
    complex_vec(n)
        .prop_filter("nonzero", |v| v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3)
        .prop_map(|v| StateVector::from_slice(&v).unwrap().normalize().unwrap())
}

fn unitary(n: usize) -> impl Strategy<Value = DMatrix<C64>> {
    complex_vec(n * n).prop_filter_map("full rank", move |v| {
        let m = DMatrix::from_vec(n, n, v);
        let qr = m.qr();
        let r = qr.r();
        if (0..n).any(|i| r[(i, i)].norm() < 1e-6) {
            return None;
        }
        Some(qr.q())
    })
}

fn bits(n: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kraus_remix_leaves_channel_unchanged(psi in state(8), kt in 0.01f64..1.0, u in unitary(4)) {
        let fs = FockSpace::new(8).unwrap();
        let ch = damped_kraus(&fs, &DampingParams::new(kt, 1.0, 3).unwrap()).unwrap();
        let rho = psi.to_density().unwrap();
        let a = apply_channel(&ch, &rho).unwrap();
        let b = apply_channel(&ch.remix(&u).unwrap(), &rho).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn channel_output_has_unit_trace(psi in state(10), kt in 0.0f64..2.0) {
        let fs = FockSpace::new(10).unwrap();
        let ch = damped_kraus(&fs, &DampingParams::new(kt, 1.0, 9).unwrap()).unwrap();
        let out = apply_channel(&ch, &psi.to_density().unwrap()).unwrap();
        prop_assert!((out.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measurement_probabilities_sum_to_one(psi in state(8), which in 0usize..2, seed in any::<u64>()) {
        let s = &repetition3_stabilizers()[which];
        let p = (&Operator::identity(8) + s).scale_real(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = measure_projector(&p, &psi, &mut rng).unwrap();
        let direct = p.expectation(&psi).re;
        prop_assert!((out.prob_one - direct).abs() < 1e-12);
        prop_assert!((out.prob_one + out.prob_zero() - 1.0).abs() < 1e-15);
        prop_assert!((out.post_state.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repetition_encoding_is_isometric(a in complex_vec(2)) {
        let n = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
        prop_assume!(n > 1e-3);
        let psi = encode_repetition3(a[0] / n, a[1] / n).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
        prop_assert!((psi.amplitude(0) - a[0] / n).norm() < 1e-12);
        prop_assert!((psi.amplitude(7) - a[1] / n).norm() < 1e-12);
    }

    #[test]
    fn displacement_inverse(psi in state(12), dx in -1.5f64..1.5, dp in -1.5f64..1.5) {
        let d = Displacer::new(80).unwrap();
        let v = PhaseVector::new(dx, dp);
        let there = d.apply(v, &psi).unwrap();
        let back = d.apply(-v, &there).unwrap();
        prop_assert!(back.sub(&psi.padded(80)).norm() < 1e-10);
        prop_assert!((there.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn wigner_is_linear(a in state(6), b in state(6), w in 0.0f64..1.0, x in -2.0f64..2.0, p in -2.0f64..2.0) {
        let mix = DensityMatrix::mixture(&[(w, a.clone()), (1.0 - w, b.clone())]).unwrap();
        let lhs = wigner_point(&mix, x, p).unwrap();
        let rhs = w * wigner_point(&a.to_density().unwrap(), x, p).unwrap()
            + (1.0 - w) * wigner_point(&b.to_density().unwrap(), x, p).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn hamming_corrects_every_single_error(data in bits(4), pos in 0usize..8) {
        let d = [data[0], data[1], data[2], data[3]];
        let mut w = hamming_encode(d);
        if pos > 0 {
            w[pos - 1] ^= 1;
        }
        let dec = hamming_decode(w);
        prop_assert_eq!(dec.data, d);
        prop_assert_eq!(dec.position, pos);
    }

    #[test]
    fn gf2_rank_is_bounded_and_invariant_under_row_sums(rows in prop::collection::vec(bits(9), 1..7), i in 0usize..7, j in 0usize..7) {
        let r: Vec<BitRow> = rows.iter().map(|b| BitRow::from_bits(b)).collect();
        let m = Gf2Matrix::new(9, r.clone());
        let rank = m.rank();
        prop_assert!(rank <= r.len().min(9));
        let (i, j) = (i % r.len(), j % r.len());
        prop_assume!(i != j);
        let mut r2 = r;
        let add = r2[j].clone();
        r2[i].xor_assign(&add);
        prop_assert_eq!(Gf2Matrix::new(9, r2).rank(), rank);
    }

    #[test]
    fn toric_syndrome_is_linear(a in bits(32), b in bits(32), c in bits(32), d in bits(32)) {
        let lat = build_lattice(4, 4).unwrap();
        let e1 = PauliPattern { x: BitRow::from_bits(&a), z: BitRow::from_bits(&b) };
        let e2 = PauliPattern { x: BitRow::from_bits(&c), z: BitRow::from_bits(&d) };
        let s1 = syndrome(&lat, &e1);
        let s2 = syndrome(&lat, &e2);
        let s12 = syndrome(&lat, &e1.compose(&e2));
        prop_assert_eq!(s12.stars, s1.stars.xor(&s2.stars));
        prop_assert_eq!(s12.plaquettes, s1.plaquettes.xor(&s2.plaquettes));
        prop_assert!(s1.stars.weight().is_multiple_of(2) && s1.plaquettes.weight().is_multiple_of(2));
    }

    #[test]
    fn toric_decoder_clears_any_syndrome(a in bits(30), b in bits(30)) {
        let lat = build_lattice(5, 3).unwrap();
        let e = PauliPattern { x: BitRow::from_bits(&a), z: BitRow::from_bits(&b) };
        let s = syndrome(&lat, &e);
        let cx = greedy_decode(&lat, &s.stars, DefectKind::Charge).unwrap();
        let cz = greedy_decode(&lat, &s.plaquettes, DefectKind::Flux).unwrap();
        let residual = e.compose(&PauliPattern { x: cx, z: cz });
        prop_assert!(syndrome(&lat, &residual).is_empty());
    }
}
