//! Randomized invariants across the linear algebra, permutation, intertwiner,
//! SDP and equivalence layers.

use ebitloc::catalog;
use ebitloc::equivalence::{fingerprint, random_equivalent};
use ebitloc::linalg::{
    c, haar_unitary, kron, partial_trace, partial_transpose, trace, unitarity_defect, CMatrix,
};
use ebitloc::pauli::Pauli;
use ebitloc::perm::{as_perm_with_phases, PermWithPhases};
use ebitloc::repsolver::{find_su2_triples, sylvester_kernel, unitary_intertwiner};
use ebitloc::sdpbound::sdp_bound;
use ebitloc::MeasurementBasis;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn bob_paulis() -> [CMatrix; 2] {
    let id = CMatrix::identity(2, 2);
    [kron(&id, &Pauli::X.matrix()), kron(&id, &Pauli::Z.matrix())]
}

/// `W` is `U ⊗ 𝟙` exactly when it equals `Tr_B(W)/2 ⊗ 𝟙`.
fn alice_only_defect(w: &CMatrix) -> f64 {
    let u = partial_trace(w, &[2, 2], &[0]).unwrap() / c(2.0, 0.0);
    (w - kron(&u, &CMatrix::identity(2, 2))).norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_trace_and_adjoint(seed in any::<u64>(), a in 1usize..=3, b in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (gaussian(a, &mut rng), gaussian(b, &mut rng));
        let (p, q) = (gaussian(a, &mut rng), gaussian(b, &mut rng));
        let xy = kron(&x, &y);
        prop_assert!((trace(&xy) - trace(&x) * trace(&y)).norm() < 1e-12);
        prop_assert!((xy.adjoint() - kron(&x.adjoint(), &y.adjoint())).norm() < 1e-12);
        prop_assert!((&xy * kron(&p, &q) - kron(&(&x * &p), &(&y * &q))).norm() < 1e-12);
        let z = gaussian(2, &mut rng);
        prop_assert!((kron(&xy, &z) - kron(&x, &kron(&y, &z))).norm() < 1e-12);
        prop_assert!((partial_trace(&xy, &[a, b], &[0]).unwrap() - &x * trace(&y)).norm() < 1e-12);
    }

    #[test]
    fn partial_transpose_identities(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (gaussian(2, &mut rng), gaussian(3, &mut rng));
        let xy = kron(&x, &y);
        let tb = partial_transpose(&xy, &[2, 3], &[1]).unwrap();
        prop_assert!((&tb - kron(&x, &y.transpose())).norm() < 1e-12);
        let ta = partial_transpose(&xy, &[2, 3], &[0]).unwrap();
        prop_assert!((ta.transpose() - &tb).norm() < 1e-12);
        let m = gaussian(6, &mut rng);
        let twice = partial_transpose(&partial_transpose(&m, &[2, 3], &[1]).unwrap(), &[2, 3], &[1]).unwrap();
        prop_assert!((twice - &m).norm() < 1e-12);
        prop_assert!((trace(&partial_transpose(&m, &[2, 3], &[1]).unwrap()) - trace(&m)).norm() < 1e-12);
    }

    #[test]
    fn permutation_recognition_round_trips(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let phases = (0..n).map(|_| c(0.0, rng.random::<f64>() * std::f64::consts::TAU).exp()).collect();
        let p = PermWithPhases { perm, phases };
        let back = as_perm_with_phases(&p.to_matrix(), 1e-9).unwrap();
        prop_assert_eq!(&back.perm, &p.perm);
        prop_assert!((back.to_matrix() - p.to_matrix()).norm() < 1e-12);
        prop_assert!((p.inverse().to_matrix() - p.to_matrix().adjoint()).norm() < 1e-12);
        prop_assert!((p.compose(&p.inverse()).to_matrix() - CMatrix::identity(n, n)).norm() < 1e-12);
        for j in 0..n {
            prop_assert_eq!(p.preimage(p.image(j)), j);
        }
        // a generic unitary is not a permutation with phases
        if n > 1 {
            prop_assert!(as_perm_with_phases(&haar_unitary(n, &mut rng), 1e-6).is_none());
        }
    }

    #[test]
    fn intertwiners_are_unique_up_to_alice_unitaries(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let triples = find_su2_triples();
        let t = &triples[pick.index(triples.len())];
        let [px, _, pz] = t.matrices();
        let gens = bob_paulis();
        let targets = [px, pz];
        let kernel = sylvester_kernel(&gens, &targets).unwrap();
        prop_assert_eq!(kernel.len(), 4);
        let m1 = unitary_intertwiner(&gens, &targets, seed).unwrap();
        let m2 = unitary_intertwiner(&gens, &targets, seed.wrapping_add(1)).unwrap();
        prop_assert!(unitarity_defect(&m1) < 1e-9 && unitarity_defect(&m2) < 1e-9);
        let w = &m2 * m1.adjoint();
        prop_assert!(alice_only_defect(&w) < 1e-8);
        // and any U ⊗ 𝟙 applied to a solution stays a solution
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let moved = kron(&haar_unitary(2, &mut rng), &CMatrix::identity(2, 2)) * &m1;
        for (g, t) in gens.iter().zip(&targets) {
            prop_assert!((g * &moved - &moved * t).norm() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn sdp_value_is_monotone_in_ebits(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let name = catalog::LEVEL2_CLASSES[pick.index(catalog::LEVEL2_CLASSES.len())];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_equivalent(&catalog::basis(name).unwrap(), &mut rng);
        let v: Vec<f64> = (0..=2).map(|n| sdp_bound(&m, n).unwrap().value).collect();
        for w in v.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-6, "{}: {:?}", name, v);
        }
        prop_assert!(v[0] >= 0.25 - 1e-6 && v[2] <= 1.0 + 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fingerprint_survives_hundred_random_moves(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let mut names: Vec<&str> = catalog::LEVEL2_CLASSES.to_vec();
        names.extend(["GHZ", "M106"]);
        let name = names[pick.index(names.len())];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let original: MeasurementBasis = catalog::basis(name).unwrap();
        let want = fingerprint(&original).unwrap();
        let mut m = original;
        for _ in 0..100 {
            m = random_equivalent(&m, &mut rng);
            prop_assert_eq!(&fingerprint(&m).unwrap(), &want, "{}", name);
        }
    }
}
