use std::collections::BTreeSet;

use ebitloc::catalog;
use ebitloc::equivalence::{equivalent, fingerprint, EquivalenceBudget};
use ebitloc::linalg::{cr, hermitian_eigen, identity, kron, rounded_key, CMatrix};
use ebitloc::localizability::{check_level1, check_level1_qudit, check_level2};
use ebitloc::pauli::{Pauli, PauliString};
use ebitloc::perm::as_perm_with_phases;
use ebitloc::repsolver::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sx() -> CMatrix {
    Pauli::X.matrix()
}
fn sy() -> CMatrix {
    Pauli::Y.matrix()
}
fn sz() -> CMatrix {
    Pauli::Z.matrix()
}
fn eye2() -> CMatrix {
    identity(2)
}

#[test]
fn twenty_one_families() {
    assert_eq!(enumerate_p_families().len(), 21);
}

#[test]
fn diagonal_family_is_traceless_and_hermitian() {
    let f = enumerate_p_families().into_iter().find(|f| f.id == 10 && f.minus == (0, 1)).unwrap();
    let m = f.instantiate(&[]).to_matrix();
    let expected = CMatrix::from_diagonal(&ebitloc::linalg::CVector::from_vec(vec![cr(-1.0), cr(-1.0), cr(1.0), cr(1.0)]));
    assert!((m.clone() - expected).norm() < 1e-15);
    assert!(m.trace().norm() < 1e-15);
    assert!((m.clone() - m.adjoint()).norm() < 1e-15);
}

#[test]
fn random_instantiations_have_pauli_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for f in enumerate_p_families() {
        for _ in 0..5 {
            let p: Vec<f64> = (0..f.nparams()).map(|_| rng.random::<f64>() * 6.3).collect();
            let (vals, _) = hermitian_eigen(&f.instantiate(&p).to_matrix());
            let expected = [-1.0, -1.0, 1.0, 1.0];
            for (v, e) in vals.iter().zip(expected) {
                assert!((v - e).abs() < 1e-12, "{} {:?}", f.label(), vals);
            }
        }
    }
}

fn triple_report() -> &'static TripleSearchReport {
    static REPORT: std::sync::OnceLock<TripleSearchReport> = std::sync::OnceLock::new();
    REPORT.get_or_init(find_su2_triples_report)
}

#[test]
fn triple_search_counts_and_verifies() {
    let r = triple_report();
    assert_eq!(r.distinct_subsets, 1330);
    assert_eq!(r.multisets, 1771);
    assert!(!r.triples.is_empty());
    for t in &r.triples {
        assert!(t.verify(1e-9), "{:?}", t.families);
        assert!(t.residual < 1e-18);
    }
}

/// The families a fixed representation falls into, read off from its matrices.
fn families_of(ms: [&CMatrix; 3]) -> Option<[PFamily; 3]> {
    let fams = enumerate_p_families();
    let mut out = Vec::new();
    for m in ms {
        let p = as_perm_with_phases(m, 1e-12)?;
        let f = fams.iter().find(|f| {
            let q = f.instantiate(&vec![0.0; f.nparams()]);
            q.perm == p.perm
                && p.perm.iter().enumerate().all(|(j, &i)| i != j || (q.phases[j] - p.phases[j]).norm() < 1e-12)
        })?;
        out.push(*f);
    }
    Some([out[0], out[1], out[2]])
}

#[test]
fn product_representation_arises() {
    let (x, y, z) = (kron(&sx(), &eye2()), kron(&sy(), &eye2()), kron(&sz(), &eye2()));
    let fams = families_of([&x, &y, &z]).unwrap();
    let t = triple_report().triples.iter().find(|t| t.families == fams).expect("σ⊗𝟙 families solved");
    let m = intertwiner_level1(t).unwrap();
    assert_eq!(fingerprint(&m).unwrap(), fingerprint(&catalog::basis("product").unwrap()).unwrap());
}

#[test]
fn bell_representation_arises() {
    let x = kron(&sx(), &eye2());
    let z = kron(&sz(), &sx());
    let y = &x * &z * ebitloc::linalg::c(0.0, 1.0);
    let fams = families_of([&x, &y, &z]).unwrap();
    let t = triple_report().triples.iter().find(|t| t.families == fams).expect("Bell families solved");
    let m = intertwiner_level1(t).unwrap();
    assert_eq!(fingerprint(&m).unwrap(), fingerprint(&catalog::basis("BSM").unwrap()).unwrap());
}

fn stack(gens: &[CMatrix], targets: &[CMatrix]) -> CMatrix {
    let n = gens[0].nrows();
    let mut s = CMatrix::zeros(n * n * gens.len(), n * n);
    for (k, (g, t)) in gens.iter().zip(targets).enumerate() {
        let b = kron(&identity(n), g) - kron(&t.transpose(), &identity(n));
        s.view_mut((k * n * n, 0), (n * n, n * n)).copy_from(&b);
    }
    s
}

#[test]
fn level1_kernel_has_dimension_four() {
    let gens = [kron(&eye2(), &sx()), kron(&eye2(), &sz())];
    for t in triple_report().triples.iter().step_by(37) {
        let [px, _, pz] = t.matrices();
        let s = stack(&gens, &[px, pz]);
        let sv = s.svd(false, false).singular_values;
        let rank_deficit = sv.iter().filter(|v| **v < 1e-9).count() + (16 - sv.len());
        assert_eq!(rank_deficit, 4);
    }
}

#[test]
fn intertwiner_unique_up_to_alice_unitary() {
    let gens = [kron(&eye2(), &sx()), kron(&eye2(), &sz())];
    for t in triple_report().triples.iter().step_by(53) {
        let [px, _, pz] = t.matrices();
        let a = unitary_intertwiner(&gens, &[px.clone(), pz.clone()], 10).unwrap();
        let b = unitary_intertwiner(&gens, &[px, pz], 99).unwrap();
        // a·b† must act on Alice only: it commutes with every 𝟙⊗σ
        let u = &a * b.adjoint();
        for s in [sx(), sy(), sz()] {
            let bob = kron(&eye2(), &s);
            assert!((&u * &bob - &bob * &u).norm() < 1e-8);
        }
    }
}

#[test]
fn theorem_one_three_classes() {
    let classes = solve_level1().unwrap();
    assert_eq!(classes.len(), 3);
    let found: BTreeSet<_> = classes.iter().map(|c| c.fingerprint.clone()).collect();
    let expected: BTreeSet<_> =
        ["product", "BSM", "twisted"].iter().map(|n| fingerprint(&catalog::basis(n).unwrap()).unwrap()).collect();
    assert_eq!(found, expected);
    for c in &classes {
        assert!(check_level1(&c.measurement, 1e-8).is_some());
    }
}

/// Ordered stabilizer frames built directly from commuting Pauli pairs.
fn direct_stabilizer_frames() -> BTreeSet<Vec<i64>> {
    let strings = PauliString::all(2);
    let mut out = BTreeSet::new();
    for g1 in &strings {
        for g2 in &strings {
            if g1.is_identity() || g2.is_identity() || g1 == g2 {
                continue;
            }
            let (a, b) = (g1.matrix(), g2.matrix());
            if (&a * &b - &b * &a).norm() > 1e-9 {
                continue;
            }
            let mut states = Vec::new();
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    let p = (identity(4) + &a * cr(s1)) * (identity(4) + &b * cr(s2)) * cr(0.25);
                    let j = (0..4).max_by(|&x, &y| p.column(x).norm().total_cmp(&p.column(y).norm())).unwrap();
                    let v = p.column(j).into_owned();
                    states.push(&v / cr(v.norm()));
                }
            }
            for perm in permutations(4) {
                let m = CMatrix::from_fn(4, 4, |i, j| states[perm[j]][i]);
                out.insert(rounded_key(&frame_normal_form(&m), 1e-6));
            }
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn intermediate_frames_match_direct_enumeration() {
    let pairs = commuting_pairs(&triple_report().triples);
    let frames: BTreeSet<Vec<i64>> =
        intermediate_frames(&pairs).iter().map(|f| rounded_key(f, 1e-6)).collect();
    let direct = direct_stabilizer_frames();
    assert_eq!(direct.len(), 360);
    assert_eq!(frames, direct);
}

#[test]
fn intermediate_kernel_is_one_dimensional() {
    let pairs = commuting_pairs(&triple_report().triples);
    let gens = [
        kron(&sx(), &eye2()),
        kron(&sz(), &eye2()),
        kron(&eye2(), &sx()),
        kron(&eye2(), &sz()),
    ];
    for (a, b) in pairs.iter().step_by(29) {
        let [ax, _, az] = a.matrices();
        let [bx, _, bz] = b.matrices();
        let sv = stack(&gens, &[ax, az, bx, bz]).svd(false, false).singular_values;
        assert_eq!(sv.iter().filter(|v| **v < 1e-9).count(), 1);
    }
}

#[test]
fn hermitian_families_are_hermitian() {
    let pairs = commuting_pairs(&triple_report().triples);
    let frames = intermediate_frames(&pairs);
    let fams: Vec<HermitianFamily> = frames.iter().flat_map(hermitian_families).collect();
    assert_eq!(fams.len(), 333);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for f in fams.iter().step_by(7) {
        let p: Vec<f64> = (0..f.nparams()).map(|_| rng.random::<f64>() * 6.3).collect();
        let m = f.instantiate(&p);
        assert!((&m - m.adjoint()).norm() < 1e-10);
        assert!(m.trace().norm() < 1e-10);
    }
}

#[test]
fn theorem_two_eight_classes() {
    let report = solve_level2_report().unwrap();
    assert_eq!(report.frames.len(), 360);
    assert_eq!(report.classes.len(), 8);
    let found: BTreeSet<_> = report.classes.iter().map(|c| c.fingerprint.clone()).collect();
    let expected: BTreeSet<_> =
        catalog::LEVEL2_CLASSES.iter().map(|n| fingerprint(&catalog::basis(n).unwrap()).unwrap()).collect();
    assert_eq!(found, expected);
    let allowed = [0.0, 0.25, 0.5, 1.0];
    for c in &report.classes {
        assert!(check_level2(&c.measurement, 1e-8).is_some());
        for t in c.tangles() {
            assert!(allowed.iter().any(|a| (a - t).abs() < 1e-6), "{t}");
        }
    }
}

#[test]
fn qudit_bell_representation_gives_bell_basis() {
    for d in [2, 3] {
        let [px, pz] = bell_weyl_rep(d);
        let m = intertwiner_weyl(&px, &pz, d).unwrap();
        assert!(check_level1_qudit(&m, d, 1e-8).is_some());
        let bell = catalog::bell_basis(d).unwrap();
        let budget = EquivalenceBudget { restarts: 8, max_evals: 6000, seed: 1 };
        assert!(equivalent(&m, &bell, budget).is_yes(), "d = {d}");
    }
}

#[test]
fn weyl_rejects_broken_braiding() {
    let [px, _] = bell_weyl_rep(3);
    assert!(intertwiner_weyl(&px, &px, 3).is_err());
}

#[test]
fn twisted_bell_representation() {
    for d in 2..=5 {
        assert!(TwistedBellRep::standard(d).verify(1e-9), "d = {d}");
    }
    let m2 = TwistedBellRep::standard(2).measurement().unwrap();
    assert_eq!(fingerprint(&m2).unwrap(), fingerprint(&catalog::basis("tBSM").unwrap()).unwrap());
    let m3 = TwistedBellRep::standard(3).measurement().unwrap();
    // a generalisation of a second-level class: level two holds, level one does not
    assert!(weyl_level2_holds(&m3, 3, 1e-8));
    assert!(check_level1_qudit(&m3, 3, 1e-8).is_none());
}
