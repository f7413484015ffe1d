use ebitloc::catalog;
use ebitloc::hierarchy::*;
use ebitloc::linalg::{cis, haar_unitary, kron, perm_matrix, phase_diag, CMatrix};
use ebitloc::localizability::check_level1;
use ebitloc::pauli::{Pauli, PauliString};
use ebitloc::MeasurementBasis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn basis(n: &str) -> MeasurementBasis {
    catalog::basis(n).unwrap()
}

/// Independent Pauli-group oracle: compare against all 16 strings times a quarter phase.
fn oracle_is_pauli(u: &CMatrix) -> bool {
    PauliString::all(2).iter().any(|s| {
        let p = s.matrix();
        (0..4).any(|q| (u - &p * cis(q as f64 * std::f64::consts::FRAC_PI_2)).norm() < 1e-9)
    })
}

#[test]
fn bsm_conjugates_every_pauli_to_a_pauli() {
    let m = basis("BSM").matrix;
    for s in PauliString::all(2) {
        assert!(oracle_is_pauli(&(m.adjoint() * s.matrix() * &m)), "{s}");
    }
    assert!(clifford_member(&basis("BSM"), 1).unwrap().member);
}

#[test]
fn twisted_clifford_level_two_only() {
    let t = basis("twisted");
    let v = clifford_member(&t, 1).unwrap();
    assert!(!v.member);
    // the witness is genuinely mapped outside the Pauli group
    let w = v.witness.unwrap().matrix();
    assert!(!oracle_is_pauli(&(t.matrix.adjoint() * w * &t.matrix)));
    assert!(clifford_member(&t, 2).unwrap().member);
}

#[test]
fn twisted_does_not_map_xy_to_a_pauli_product() {
    let t = basis("twisted").matrix;
    let xy = PauliString(vec![Pauli::X, Pauli::Y]).matrix();
    assert!(!oracle_is_pauli(&(t.adjoint() * xy * &t)));
    assert!(v_member(&basis("twisted"), 1).unwrap().member);
}

#[test]
fn b2_outside_low_clifford_levels() {
    for k in 0..=3 {
        assert!(!clifford_member(&basis("B2"), k).unwrap().member, "k = {k}");
    }
}

#[test]
fn permutations_with_phases_are_vbar_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = &perm_matrix(&[2, 0, 3, 1]) * &phase_diag(&[0.3, 1.1, -2.0, 0.7]);
    let m = MeasurementBasis::qubits2(u).unwrap();
    assert!(vbar_member(&m, 0).unwrap().member);
    let r = MeasurementBasis::qubits2(haar_unitary(4, &mut rng)).unwrap();
    assert!(!vbar_member(&r, 0).unwrap().member);
}

#[test]
fn nesting_and_clifford_inside_v_on_catalog() {
    for name in catalog::LEVEL2_CLASSES {
        let m = basis(name);
        for fam in [HierarchyFamily::Clifford, HierarchyFamily::V, HierarchyFamily::Vbar] {
            for k in 0..2 {
                if member_with_cap(fam, &m, k, 3).unwrap().member {
                    assert!(member_with_cap(fam, &m, k + 1, 3).unwrap().member, "{name} {fam} {k}");
                }
            }
        }
        for k in 0..=2 {
            if clifford_member(&m, k).unwrap().member {
                assert!(v_member(&m, k).unwrap().member, "{name} k = {k}");
            }
        }
    }
}

#[test]
fn v_level_one_agrees_with_raw_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut cases: Vec<MeasurementBasis> = catalog::NAMES.iter().filter_map(|n| catalog::basis(n).ok()).filter(|m| m.is_two_qubit()).collect();
    cases.push(MeasurementBasis::qubits2(haar_unitary(4, &mut rng)).unwrap());
    let h = catalog::sigma(Pauli::X) + catalog::sigma(Pauli::Z);
    let h = h.map(|z| z / 2f64.sqrt());
    cases.push(MeasurementBasis::qubits2(kron(&h, &h)).unwrap());
    for m in &cases {
        assert_eq!(v_member(m, 1).unwrap().member, check_level1(m, 1e-8).is_some(), "{:?}", m.name);
    }
}

#[test]
fn cap_is_enforced() {
    assert!(clifford_member(&basis("BSM"), K_MAX + 1).is_err());
}
