//! Verb implementations. Each prints one JSON document on standard output.

use std::path::{Path, PathBuf};

use ebitloc::bank::{SolutionBank, SolvedClass};
use ebitloc::basis::BasisJson;
use ebitloc::catalog;
use ebitloc::clark::{clark_single_rotation, clark_upper_bound_with, Euler};
use ebitloc::conic::SolverStatus;
use ebitloc::equivalence::{bloch_report, fingerprint, nearest_class};
use ebitloc::heuristic::{nine_ebit_tangle_set, search, SearchOptions};
use ebitloc::hierarchy::{lowest_level, member_with_cap, HierarchyFamily};
use ebitloc::linalg::haar_state;
use ebitloc::localizability::{check_class, check_raw, ClassBudget, LocalizabilityCertificate, Scenario};
use ebitloc::protosim::{simulate_certificate, InputState};
use ebitloc::repsolver::{solve_level1, solve_level2};
use ebitloc::sdpbound::{sdp_bound_with, verify_dual, Formulation, SdpOptions, SdpProblem};
use ebitloc::{Error, MeasurementBasis, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::input;
use crate::{BankAction, CatalogAction, Command, Status};

/// Tolerance for protocol statistics against Born probabilities.
const BORN_TOL: f64 = 1e-10;

fn emit(v: &Value) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v).expect("json values serialize");
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn verdict(ok: bool) -> Status {
    if ok {
        Status::Success
    } else {
        Status::Negative
    }
}

pub fn run(cmd: Command, seed: u64) -> Result<Status> {
    match cmd {
        Command::Catalog { action } => catalog_cmd(action),
        Command::Check { measurement, level, qudit, parties, class, tol, restarts } => {
            let m = input::measurement(&measurement)?;
            let s = input::scenario(&m, qudit, parties)?;
            let budget = ClassBudget { restarts, seed, ..ClassBudget::default() };
            let cert = certificate(&m, s, level, tol, class.then_some(budget))?;
            emit(&json!({
                "measurement": measurement,
                "scenario": s.name(),
                "level": level,
                "localizable": cert.is_some(),
                "certificate": cert.as_ref().map(|c| c.to_json()),
            }));
            Ok(verdict(cert.is_some()))
        }
        Command::Classify { measurement } => {
            let m = input::measurement(&measurement)?;
            let rep = bloch_report(&m)?;
            let fp = fingerprint(&m)?;
            emit(&json!({
                "measurement": measurement,
                "dims": m.dims,
                "tangles": rep.tangles,
                "bloch": rep.bloch,
                "mm": rep.mm,
                "fingerprint": fp,
                "nearest_class": nearest_class(&m),
            }));
            Ok(Status::Success)
        }
        Command::Hierarchy { measurement, family, k, k_max } => {
            let m = input::measurement(&measurement)?;
            let families = match family {
                Some(f) => vec![HierarchyFamily::parse(&f)?],
                None => vec![HierarchyFamily::Clifford, HierarchyFamily::Vbar, HierarchyFamily::V],
            };
            match k {
                Some(k) => {
                    let verdicts = families
                        .iter()
                        .map(|&f| member_with_cap(f, &m, k, k_max.max(k)))
                        .collect::<Result<Vec<_>>>()?;
                    let all = verdicts.iter().all(|v| v.member);
                    emit(&json!({ "measurement": measurement, "verdicts": verdicts }));
                    Ok(verdict(all))
                }
                None => {
                    let mut out = serde_json::Map::new();
                    for f in families {
                        out.insert(f.to_string(), json!(lowest_level(f, &m, k_max)?));
                    }
                    emit(&json!({ "measurement": measurement, "k_max": k_max, "lowest_level": out }));
                    Ok(Status::Success)
                }
            }
        }
        Command::Solve { level, out } => {
            let classes = match level {
                1 => solve_level1()?,
                2 => solve_level2()?,
                _ => return Err(Error::Unsupported(format!("the solver handles levels 1 and 2, not {level}"))),
            };
            emit(&json!({ "level": level, "count": classes.len(), "classes": describe(&classes, level) }));
            save_into(out.as_deref(), classes)?;
            Ok(Status::Success)
        }
        Command::Search { level, scenario, restarts, out } => {
            let s = Scenario::parse(&scenario)?;
            let classes = search(level, s, SearchOptions::new(restarts, seed))?;
            emit(&json!({
                "level": level,
                "scenario": s.name(),
                "restarts": restarts,
                "seed": seed,
                "distinct_fingerprints": classes.len(),
                "classes": describe(&classes, level),
            }));
            save_into(out.as_deref(), classes)?;
            Ok(Status::Success)
        }
        Command::Clark { measurement, euler, single } => {
            let m = input::measurement(&measurement)?;
            let bound = clark_upper_bound_with(&m, Euler::parse(&euler)?)?;
            let single = match single {
                Some(d) => clark_single_rotation(&m, d)?.map(|(axis, theta, ebits)| {
                    json!({ "axis": axis, "theta": theta, "ebits": ebits })
                }),
                None => None,
            };
            emit(&json!({
                "measurement": measurement,
                "euler": bound.euler,
                "ebits": bound.ebits,
                "finite": bound.ebits.is_some(),
                "residual": bound.residual,
                "chain": bound.chain,
                "single_rotation": single,
            }));
            Ok(Status::Success)
        }
        Command::Sdp { measurement, n, formulation, allow_large, dump_conic, verify, tol } => {
            let m = input::measurement(&measurement)?;
            let formulation = match formulation.as_str() {
                "twirled" => Formulation::Twirled,
                "full" => Formulation::Full,
                other => return Err(Error::InvalidArgument(format!("unknown formulation `{other}`"))),
            };
            let opts = SdpOptions { formulation, allow_large, tolerance: tol };
            if let Some(path) = dump_conic {
                let prob = SdpProblem::new(&m, n, &opts)?;
                std::fs::write(&path, serde_json::to_string(&prob.dump())?)?;
                emit(&json!({ "measurement": measurement, "n": n, "dumped": path }));
                return Ok(Status::Success);
            }
            let r = sdp_bound_with(&m, n, &opts)?;
            let verified = if verify { Some(verify_dual(&r, &m, n)?) } else { None };
            emit(&json!({ "measurement": measurement, "result": r, "dual_verified": verified }));
            if r.status != SolverStatus::Optimal || verified == Some(false) {
                return Ok(Status::Numerical);
            }
            Ok(Status::Success)
        }
        Command::Simulate { measurement, level, state, samples, qudit, parties, class } => {
            let m = input::measurement(&measurement)?;
            let s = input::scenario(&m, qudit, parties)?;
            let budget = ClassBudget { seed, ..ClassBudget::default() };
            let Some(cert) = certificate(&m, s, level, ebitloc::linalg::PERM_TOL, class.then_some(budget))? else {
                emit(&json!({ "measurement": measurement, "level": level, "localizable": false }));
                return Ok(Status::Negative);
            };
            let states: Vec<InputState> = if state == "random" {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..samples).map(|_| InputState::Pure(haar_state(m.order(), &mut rng))).collect()
            } else {
                vec![input::state(Path::new(&state), m.order())?]
            };
            let mut worst: f64 = 0.0;
            let mut last = None;
            for psi in &states {
                let trace = simulate_certificate(&m, &cert, psi)?;
                worst = worst.max(trace.born_deviation(&m, psi)).max((trace.total_probability - 1.0).abs());
                last = Some((trace.ebits, trace.branches.len(), trace.decoded, psi.born(&m)));
            }
            let (ebits, branches, decoded, born) = last.expect("at least one state");
            let ok = worst <= BORN_TOL;
            emit(&json!({
                "measurement": measurement,
                "scenario": s.name(),
                "level": level,
                "ebits": ebits,
                "branches": branches,
                "states": states.len(),
                "max_deviation": worst,
                "within_tolerance": ok,
                "last_decoded": decoded,
                "last_born": born,
            }));
            Ok(if ok { Status::Success } else { Status::Numerical })
        }
        Command::Bank { action } => bank_cmd(action),
    }
}

fn certificate(
    m: &MeasurementBasis,
    s: Scenario,
    level: usize,
    tol: f64,
    class: Option<ClassBudget>,
) -> Result<Option<LocalizabilityCertificate>> {
    if s.cost(level).is_none() {
        return Err(Error::Unsupported(format!("level {level} for {} measurements", s.name())));
    }
    Ok(check_raw(m, s, level, tol).or_else(|| class.and_then(|b| check_class(m, s, level, b))))
}

fn describe(classes: &[SolvedClass], level: usize) -> Vec<Value> {
    let nine = nine_ebit_tangle_set();
    classes
        .iter()
        .map(|c| {
            let tangles = c.tangles();
            let mut v = json!({
                "nearest_class": nearest_class(&c.measurement),
                "tangles": tangles,
                "fingerprint": c.fingerprint,
                "provenance": c.provenance,
                "verified": c.verify(),
            });
            if level == 3 && c.scenario == Scenario::Bipartite {
                v["tangles_in_nine_ebit_set"] =
                    json!(tangles.iter().all(|t| nine.iter().any(|s| (s - t).abs() < 1e-6)));
            }
            v
        })
        .collect()
}

fn bank_path(path: Option<PathBuf>) -> Result<PathBuf> {
    path.or_else(|| std::env::var_os("EBITLOC_BANK").map(PathBuf::from))
        .ok_or_else(|| Error::InvalidArgument("no bank path given and EBITLOC_BANK is unset".into()))
}

fn save_into(path: Option<&Path>, classes: Vec<SolvedClass>) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let fresh = SolutionBank::from_entries(classes);
    let bank = if path.exists() { SolutionBank::merge(&SolutionBank::load(path)?, &fresh)? } else { fresh };
    bank.save(path)
}

fn catalog_cmd(action: CatalogAction) -> Result<Status> {
    match action {
        CatalogAction::List => {
            let list: Vec<Value> = catalog::NAMES
                .iter()
                .map(|n| {
                    let e = catalog::get(n).expect("listed names resolve");
                    json!({
                        "name": e.name,
                        "dims": e.basis.dims,
                        "claimed_ebits": e.claimed_level,
                        "claimed_tangles": e.claimed_tangles,
                    })
                })
                .collect();
            emit(&json!(list));
        }
        CatalogAction::Show { name } => {
            let e = catalog::get(&name)?;
            emit(&json!({
                "name": e.name,
                "basis": BasisJson::from_basis(&e.basis),
                "claimed_ebits": e.claimed_level,
                "claimed_tangles": e.claimed_tangles,
            }));
        }
    }
    Ok(Status::Success)
}

fn bank_cmd(action: BankAction) -> Result<Status> {
    match action {
        BankAction::Verify { path } => {
            let bank = SolutionBank::load(&bank_path(path)?)?;
            let failures = bank.failures();
            emit(&json!({ "entries": bank.entries.len(), "failures": failures }));
            Ok(verdict(failures.is_empty()))
        }
        BankAction::Show { path } => {
            let bank = SolutionBank::load(&bank_path(path)?)?;
            let rows: Vec<Value> = bank
                .entries
                .iter()
                .map(|c| {
                    json!({
                        "scenario": c.scenario.name(),
                        "level": c.level,
                        "nearest_class": nearest_class(&c.measurement),
                        "tangles": c.tangles(),
                        "provenance": c.provenance,
                    })
                })
                .collect();
            emit(&json!({ "schema_version": bank.schema_version, "entries": rows }));
            Ok(Status::Success)
        }
        BankAction::Merge { a, b, out } => {
            let merged = SolutionBank::merge(&SolutionBank::load(&a)?, &SolutionBank::load(&b)?)?;
            merged.save(&out)?;
            emit(&json!({ "entries": merged.entries.len(), "out": out }));
            Ok(Status::Success)
        }
    }
}
