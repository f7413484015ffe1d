use ebitloc::bank::{Provenance, SolutionBank, SolvedClass, SCHEMA_VERSION};
use ebitloc::catalog;
use ebitloc::linalg::{phase_diag, PERM_TOL};
use ebitloc::localizability::{check_raw, Scenario};
use ebitloc::repsolver::solve_level2;
use ebitloc::MeasurementBasis;

fn class(name: &str, level: usize, provenance: Provenance) -> SolvedClass {
    SolvedClass::new(catalog::basis(name).unwrap(), level, Scenario::Bipartite, provenance).unwrap()
}

fn small_bank() -> SolutionBank {
    SolutionBank::from_entries(vec![
        class("BSM", 1, Provenance::Solver),
        class("twisted", 1, Provenance::Solver),
        class("EJM", 2, Provenance::Catalog),
    ])
}

fn same(a: &SolutionBank, b: &SolutionBank) -> bool {
    a.entries.len() == b.entries.len()
        && a.entries.iter().zip(&b.entries).all(|(x, y)| {
            x.fingerprint == y.fingerprint && x.level == y.level && x.measurement.matrix == y.measurement.matrix
        })
}

#[test]
fn merge_identities() {
    let bank = small_bank();
    assert!(same(&SolutionBank::merge(&bank, &SolutionBank::default()).unwrap(), &bank));
    assert!(same(&SolutionBank::merge(&SolutionBank::default(), &bank).unwrap(), &bank));
    assert!(same(&SolutionBank::merge(&bank, &bank).unwrap(), &bank));
}

#[test]
fn merge_rejects_schema_mismatch() {
    let mut other = small_bank();
    other.schema_version = SCHEMA_VERSION + 1;
    assert!(SolutionBank::merge(&small_bank(), &other).is_err());
}

#[test]
fn equivalent_copies_collapse() {
    let bsm = catalog::basis("BSM").unwrap();
    let phased = MeasurementBasis::qubits2(&bsm.matrix * phase_diag(&[0.0, 1.0, 2.0, 3.0])).unwrap();
    let bank = SolutionBank::from_entries(vec![
        class("BSM", 1, Provenance::Solver),
        SolvedClass::new(phased, 1, Scenario::Bipartite, Provenance::Heuristic { seed: 4 }).unwrap(),
        class("BSM", 2, Provenance::Solver),
    ]);
    // same fingerprint at the same level collapses, different levels do not
    assert_eq!(bank.entries.len(), 2);
}

#[test]
fn solver_and_catalog_banks_merge_to_eight() {
    let solver = SolutionBank::from_entries(solve_level2().unwrap());
    assert_eq!(solver.entries.len(), 8);
    let catalog_bank = SolutionBank::from_entries(
        catalog::LEVEL2_CLASSES.iter().map(|n| class(n, 2, Provenance::Catalog)).collect(),
    );
    let merged = SolutionBank::merge(&solver, &catalog_bank).unwrap();
    assert_eq!(merged.entries.len(), 8);
    assert!(merged.failures().is_empty());
}

#[test]
fn json_round_trip_re_verifies() {
    let bank = small_bank();
    let text = bank.to_json_string().unwrap();
    let back = SolutionBank::from_json_str(&text).unwrap();
    assert!(same(&bank, &back));
    assert!(back.failures().is_empty());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema_version"], SCHEMA_VERSION);
    assert_eq!(v["entries"][0]["scenario"], "bipartite");
}

#[test]
fn stored_verdicts_are_not_trusted() {
    // An EJM entry claiming level 1 fails on re-verification.
    let bad = class("EJM", 1, Provenance::Heuristic { seed: 0 });
    assert!(check_raw(&bad.measurement, Scenario::Bipartite, 1, PERM_TOL).is_none());
    let bank = SolutionBank::from_entries(vec![class("BSM", 1, Provenance::Solver), bad]);
    assert_eq!(bank.failures().len(), 1);
    let text = bank.to_json_string().unwrap();
    assert_eq!(SolutionBank::from_json_str(&text).unwrap().failures().len(), 1);
}

#[test]
fn save_and_load() {
    let dir = std::env::temp_dir().join(format!("ebitloc-bank-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bank.json");
    let bank = small_bank();
    bank.save(&path).unwrap();
    let back = SolutionBank::load(&path).unwrap();
    assert!(same(&bank, &back));
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(SolutionBank::load(&dir.join("missing.json")).is_err());
}
