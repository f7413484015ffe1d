//! Membership in the two-qubit Clifford hierarchy and in the teleportation
//! hierarchies `𝒱_k` and `𝒱̄_k`.
//!
//! All three are defined by conjugation, `U†·P·U ∈ level k−1`. The Clifford
//! hierarchy starts from the Pauli group and conjugates every Pauli string; `𝒱̄_k`
//! starts from the permutations with phases; `𝒱_k` conjugates only `𝟙⊗𝒫₁` at its
//! top step and continues in `𝒱̄`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::basis::MeasurementBasis;
use crate::error::{Error, Result};
use crate::linalg::{rounded_key, trace_product, CMatrix, PERM_TOL};
use crate::pauli::{Pauli, PauliString};
use crate::perm::as_perm_with_phases;

/// Deepest level answered by default; each level multiplies the work by 15.
pub const K_MAX: usize = 3;

const MEMO_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HierarchyFamily {
    Clifford,
    V,
    Vbar,
}

impl HierarchyFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clifford" | "c" => Ok(HierarchyFamily::Clifford),
            "v" => Ok(HierarchyFamily::V),
            "vbar" => Ok(HierarchyFamily::Vbar),
            other => Err(Error::InvalidArgument(format!("unknown hierarchy `{other}`"))),
        }
    }
}

impl fmt::Display for HierarchyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HierarchyFamily::Clifford => "clifford",
            HierarchyFamily::V => "v",
            HierarchyFamily::Vbar => "vbar",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyVerdict {
    pub family: HierarchyFamily,
    pub level: usize,
    pub member: bool,
    /// For a non-member above level 0, a Pauli string whose conjugate leaves level k−1.
    pub witness: Option<PauliString>,
}

type MemoKey = (HierarchyFamily, usize, Vec<i64>);

fn memo() -> &'static RwLock<HashMap<MemoKey, bool>> {
    static MEMO: OnceLock<RwLock<HashMap<MemoKey, bool>>> = OnceLock::new();
    MEMO.get_or_init(|| RwLock::new(HashMap::new()))
}

fn two_qubit_strings() -> &'static [(PauliString, CMatrix)] {
    static STRINGS: OnceLock<Vec<(PauliString, CMatrix)>> = OnceLock::new();
    STRINGS.get_or_init(|| {
        PauliString::all(2)
            .into_iter()
            .filter(|s| !s.is_identity())
            .map(|s| {
                let m = s.matrix();
                (s, m)
            })
            .collect()
    })
}

fn bob_strings() -> &'static [(PauliString, CMatrix)] {
    static STRINGS: OnceLock<Vec<(PauliString, CMatrix)>> = OnceLock::new();
    STRINGS.get_or_init(|| {
        [Pauli::X, Pauli::Y, Pauli::Z]
            .into_iter()
            .map(|p| {
                let s = PauliString(vec![Pauli::I, p]);
                let m = s.matrix();
                (s, m)
            })
            .collect()
    })
}

/// A unit-modulus multiple of a two-qubit Pauli string.
pub fn is_pauli_with_phase(u: &CMatrix, tol: f64) -> bool {
    if as_perm_with_phases(u, tol).is_none() {
        return false;
    }
    PauliString::all(2).iter().any(|s| (trace_product(&s.matrix(), u).norm() / 4.0 - 1.0).abs() < tol)
}

fn base_member(family: HierarchyFamily, u: &CMatrix) -> bool {
    match family {
        HierarchyFamily::Clifford => is_pauli_with_phase(u, PERM_TOL),
        HierarchyFamily::V | HierarchyFamily::Vbar => as_perm_with_phases(u, PERM_TOL).is_some(),
    }
}

fn generators(family: HierarchyFamily) -> &'static [(PauliString, CMatrix)] {
    match family {
        HierarchyFamily::V => bob_strings(),
        _ => two_qubit_strings(),
    }
}

/// The hierarchy the conjugates must land in one level down.
fn inner(family: HierarchyFamily) -> HierarchyFamily {
    match family {
        HierarchyFamily::V => HierarchyFamily::Vbar,
        f => f,
    }
}

fn member_rec(family: HierarchyFamily, u: &CMatrix, k: usize) -> bool {
    if k == 0 {
        return base_member(family, u);
    }
    let key = (family, k, rounded_key(u, MEMO_RESOLUTION));
    if let Some(v) = memo().read().ok().and_then(|g| g.get(&key).copied()) {
        return v;
    }
    let ud = u.adjoint();
    let v = generators(family).iter().all(|(_, p)| member_rec(inner(family), &(&ud * p * u), k - 1));
    if let Ok(mut g) = memo().write() {
        g.insert(key, v);
    }
    v
}

fn verdict(family: HierarchyFamily, m: &MeasurementBasis, k: usize, k_max: usize) -> Result<HierarchyVerdict> {
    if !m.is_two_qubit() {
        return Err(Error::Unsupported("hierarchy membership is defined for two qubits".into()));
    }
    if k > k_max {
        return Err(Error::InvalidArgument(format!("level {k} exceeds k_max = {k_max}")));
    }
    let u = &m.matrix;
    if k == 0 {
        return Ok(HierarchyVerdict { family, level: 0, member: base_member(family, u), witness: None });
    }
    let ud = u.adjoint();
    let witness = generators(family)
        .iter()
        .find(|(_, p)| !member_rec(inner(family), &(&ud * p * u), k - 1))
        .map(|(s, _)| s.clone());
    Ok(HierarchyVerdict { family, level: k, member: witness.is_none(), witness })
}

/// Membership at level `k` with an explicit depth cap.
pub fn member_with_cap(family: HierarchyFamily, m: &MeasurementBasis, k: usize, k_max: usize) -> Result<HierarchyVerdict> {
    verdict(family, m, k, k_max)
}

pub fn clifford_member(m: &MeasurementBasis, k: usize) -> Result<HierarchyVerdict> {
    verdict(HierarchyFamily::Clifford, m, k, K_MAX)
}

pub fn vbar_member(m: &MeasurementBasis, k: usize) -> Result<HierarchyVerdict> {
    verdict(HierarchyFamily::Vbar, m, k, K_MAX)
}

pub fn v_member(m: &MeasurementBasis, k: usize) -> Result<HierarchyVerdict> {
    verdict(HierarchyFamily::V, m, k, K_MAX)
}

/// Smallest level `≤ k_max` at which `m` belongs to the family.
pub fn lowest_level(family: HierarchyFamily, m: &MeasurementBasis, k_max: usize) -> Result<Option<usize>> {
    for k in 0..=k_max {
        if verdict(family, m, k, k_max)?.member {
            return Ok(Some(k));
        }
    }
    Ok(None)
}
