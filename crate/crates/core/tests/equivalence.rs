use ebitloc::catalog;
use ebitloc::equivalence::{
    bloch_report, equivalent, fingerprint, nearest_class, party_permutation, random_equivalent, EquivalenceBudget,
};
use ebitloc::linalg::{c, cis, haar_unitary, kron, CMatrix};
use ebitloc::pauli::Pauli;
use ebitloc::{MeasurementBasis, PermWithPhases};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn basis(name: &str) -> MeasurementBasis {
    catalog::basis(name).unwrap()
}

fn assert_mm(got: &[Vec<f64>], printed: [[f64; 4]; 4], scale: f64, what: &str) {
    for i in 0..4 {
        for j in 0..4 {
            assert!((got[i][j] - printed[i][j] / scale).abs() < 1e-9, "{what} ({i},{j}): {}", got[i][j]);
        }
    }
}

/// Bloch vector of party A from scratch: `r_k = ⟨ψ|σ_k⊗𝟙|ψ⟩`.
fn bloch_a(m: &MeasurementBasis, j: usize) -> [f64; 3] {
    let v = m.column(j);
    let id = CMatrix::identity(2, 2);
    [Pauli::X, Pauli::Y, Pauli::Z].map(|p| (v.adjoint() * kron(&p.matrix(), &id) * &v)[(0, 0)].re)
}

#[test]
fn ejm_autocorrelations() {
    let r = bloch_report(&basis("EJM")).unwrap();
    let printed = [[3.0, -1.0, -1.0, -1.0], [-1.0, 3.0, -1.0, -1.0], [-1.0, -1.0, 3.0, -1.0], [-1.0, -1.0, -1.0, 3.0]];
    assert_mm(r.mm_a(), printed, 4.0, "EJM A");
    assert_mm(r.mm_b(), printed, 4.0, "EJM B");
    assert!(r.tangles.iter().all(|t| (t - 0.25).abs() < 1e-12));
}

#[test]
fn e2_autocorrelations() {
    let m = basis("E2");
    let r = bloch_report(&m).unwrap();
    // The printed mm_A has +1 at (4,1) although its transpose entry (1,4) is −1;
    // the autocorrelation matrix is symmetric, so the upper triangle is compared.
    let printed_a = [[3.0, 1.0, -3.0, -1.0], [1.0, 3.0, -1.0, -3.0], [-3.0, -1.0, 3.0, 1.0], [1.0, -3.0, 1.0, 3.0]];
    for i in 0..4 {
        for j in i..4 {
            assert!((r.mm_a()[i][j] - printed_a[i][j] / 4.0).abs() < 1e-9, "({i},{j})");
            assert!((r.mm_a()[i][j] - r.mm_a()[j][i]).abs() < 1e-12);
        }
    }
    assert!((r.mm_a()[3][0] - printed_a[3][0] / 4.0).abs() > 0.1);
    let printed_b = [[3.0, -3.0, 1.0, -1.0], [-3.0, 3.0, -1.0, 1.0], [1.0, -1.0, 3.0, -3.0], [-1.0, 1.0, -3.0, 3.0]];
    assert_mm(r.mm_b(), printed_b, 4.0, "E2 B");
    let h = 0.5f64.sqrt();
    let printed_bloch = [[h, 0.0, -0.5], [h, 0.0, 0.5], [-h, 0.0, 0.5], [-h, 0.0, -0.5]];
    for (j, want) in printed_bloch.iter().enumerate() {
        let got = bloch_a(&m, j);
        for k in 0..3 {
            assert!((got[k] - want[k]).abs() < 1e-12);
            assert!((r.bloch[0][j][k] - want[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn tbsm_and_b2_autocorrelations() {
    let r = bloch_report(&basis("tBSM")).unwrap();
    assert_mm(
        r.mm_a(),
        [[1.0, -1.0, 1.0, -1.0], [-1.0, 1.0, -1.0, 1.0], [1.0, -1.0, 1.0, -1.0], [-1.0, 1.0, -1.0, 1.0]],
        2.0,
        "tBSM A",
    );
    assert_mm(
        r.mm_b(),
        [[1.0, -1.0, -1.0, 1.0], [-1.0, 1.0, 1.0, -1.0], [-1.0, 1.0, 1.0, -1.0], [1.0, -1.0, -1.0, 1.0]],
        2.0,
        "tBSM B",
    );
    let r = bloch_report(&basis("B2")).unwrap();
    assert_mm(
        r.mm_a(),
        [[1.0, -1.0, 0.0, 0.0], [-1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0], [0.0, 0.0, -1.0, 1.0]],
        2.0,
        "B2 A",
    );
    assert_mm(
        r.mm_b(),
        [[1.0, 1.0, -1.0, -1.0], [1.0, 1.0, -1.0, -1.0], [-1.0, -1.0, 1.0, 1.0], [-1.0, -1.0, 1.0, 1.0]],
        2.0,
        "B2 B",
    );
}

#[test]
fn bell_measurement_has_no_bloch_vectors() {
    let r = bloch_report(&basis("BSM")).unwrap();
    assert!(r.tangles.iter().all(|t| (t - 1.0).abs() < 1e-12));
    assert!(r.bloch.iter().flatten().flatten().all(|x| x.abs() < 1e-12));
    assert!(r.mm.iter().flatten().flatten().all(|x| x.abs() < 1e-12));
}

#[test]
fn report_invariants_hold_on_the_catalog() {
    for name in catalog::LEVEL2_CLASSES {
        let m = basis(name);
        let r = bloch_report(&m).unwrap();
        for j in 0..4 {
            let v = r.bloch[0][j];
            let norm2 = v.iter().map(|x| x * x).sum::<f64>();
            assert!((norm2 - (1.0 - r.tangles[j])).abs() < 1e-10, "{name}");
            for k in 0..4 {
                let dot: f64 = (0..3).map(|i| v[i] * r.bloch[0][k][i]).sum();
                assert!((r.mm_a()[j][k] - dot).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn fingerprints_separate_the_eight_classes() {
    let fps: Vec<_> = catalog::LEVEL2_CLASSES.iter().map(|n| fingerprint(&basis(n)).unwrap()).collect();
    for i in 0..fps.len() {
        for j in i + 1..fps.len() {
            assert_ne!(fps[i], fps[j], "{} vs {}", catalog::LEVEL2_CLASSES[i], catalog::LEVEL2_CLASSES[j]);
        }
    }
    assert_eq!(fps[4].tangles, fps[5].tangles, "EJM and E2 share tangles");
    assert_eq!(fps[6].tangles, fps[7].tangles, "tBSM and B2 share tangles");
    for name in catalog::LEVEL2_CLASSES {
        assert_eq!(nearest_class(&basis(name)), Some(name));
    }
}

#[test]
fn fingerprint_invariant_under_hundred_moves() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for name in ["EJM", "E2", "tBSM", "B2", "pBSM", "GHZ"] {
        let m = basis(name);
        let f = fingerprint(&m).unwrap();
        for _ in 0..100 {
            assert_eq!(fingerprint(&random_equivalent(&m, &mut rng)).unwrap(), f, "{name}");
        }
    }
}

#[test]
fn equivalence_verdicts() {
    let budget = EquivalenceBudget::default();
    let bsm = basis("BSM");
    let q = PermWithPhases { perm: vec![2, 0, 3, 1], phases: vec![cis(0.3), c(0.0, 1.0), cis(-2.0), c(-1.0, 0.0)] };
    let shuffled = MeasurementBasis::qubits2(&bsm.matrix * q.to_matrix()).unwrap();
    let v = equivalent(&bsm, &shuffled, budget);
    assert!(v.is_yes());
    assert!(equivalent(&basis("EJM"), &basis("B2"), budget).is_no());
    assert!(equivalent(&basis("tBSM"), &catalog::tilted_bsm(), budget).is_yes());
    assert!(equivalent(&basis("EJM"), &basis("EJM"), budget).is_yes());
}

#[test]
fn witness_reconstructs_the_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for name in ["EJM", "B2", "twisted"] {
        let m1 = basis(name);
        let m2 = random_equivalent(&m1, &mut rng);
        for (a, b) in [(&m1, &m2), (&m2, &m1)] {
            match equivalent(a, b, EquivalenceBudget::default()) {
                ebitloc::equivalence::Equivalence::Yes(w) => {
                    assert!((w.apply(a) - &b.matrix).norm() < 1e-6, "{name}");
                }
                other => panic!("{name}: {}", other.label()),
            }
        }
    }
}

#[test]
fn party_swap_exchanges_reduced_data() {
    let m = basis("E2");
    let s = party_permutation(&[2, 2], &[1, 0]);
    let swapped = MeasurementBasis::qubits2(&s * &m.matrix).unwrap();
    let (r, rs) = (bloch_report(&m).unwrap(), bloch_report(&swapped).unwrap());
    assert_eq!(r.mm_a(), rs.mm_b());
    assert_eq!(r.mm_b(), rs.mm_a());
    assert_eq!(fingerprint(&m).unwrap(), fingerprint(&swapped).unwrap());
}

#[test]
fn wrong_dims_are_rejected() {
    let single = MeasurementBasis::new(CMatrix::identity(2, 2), vec![2]).unwrap();
    assert!(bloch_report(&single).is_err());
    assert!(fingerprint(&single).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn local_rotations_preserve_the_fingerprint(seed in any::<u64>(), k in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = basis(catalog::LEVEL2_CLASSES[k]);
        let u = kron(&haar_unitary(2, &mut rng), &haar_unitary(2, &mut rng));
        let rotated = MeasurementBasis::qubits2(&u * &m.matrix).unwrap();
        prop_assert_eq!(fingerprint(&rotated).unwrap(), fingerprint(&m).unwrap());
    }
}
