//! Permutations with phases: the matrices `P̃·Φ` that every localizability
//! equation must produce.

use serde::{Deserialize, Serialize};

use crate::linalg::{c, CMatrix, Complex64};

/// The matrix `P̃·Φ`: column `j` carries phase `phases[j]` at row `perm[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PermWithPhases {
    pub perm: Vec<usize>,
    pub phases: Vec<Complex64>,
}

impl PermWithPhases {
    pub fn identity(n: usize) -> Self {
        PermWithPhases { perm: (0..n).collect(), phases: vec![c(1.0, 0.0); n] }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn to_matrix(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for j in 0..n {
            m[(self.perm[j], j)] = self.phases[j];
        }
        m
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &PermWithPhases) -> PermWithPhases {
        let n = self.dim();
        let mut perm = vec![0; n];
        let mut phases = vec![c(0.0, 0.0); n];
        for j in 0..n {
            let k = other.perm[j];
            perm[j] = self.perm[k];
            phases[j] = self.phases[k] * other.phases[j];
        }
        PermWithPhases { perm, phases }
    }

    pub fn inverse(&self) -> PermWithPhases {
        let n = self.dim();
        let mut perm = vec![0; n];
        let mut phases = vec![c(0.0, 0.0); n];
        for j in 0..n {
            perm[self.perm[j]] = j;
            phases[self.perm[j]] = self.phases[j].conj();
        }
        PermWithPhases { perm, phases }
    }

    /// Row index hit by column `j`.
    pub fn image(&self, j: usize) -> usize {
        self.perm[j]
    }

    /// Column whose nonzero entry lies in row `i`.
    pub fn preimage(&self, i: usize) -> usize {
        self.perm.iter().position(|&r| r == i).expect("bijection")
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.dim()];
        for &p in &self.perm {
            if p >= seen.len() || seen[p] {
                return false;
            }
            seen[p] = true;
        }
        true
    }

    /// Largest deviation of the stored entries from the matrix `m`.
    pub fn distance_to(&self, m: &CMatrix) -> f64 {
        let d = self.to_matrix() - m;
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Recognizes `m = P̃·Φ`: every row and column has exactly one entry of modulus
/// within `tol` of 1 and all other entries have modulus below `tol`.
pub fn as_perm_with_phases(m: &CMatrix, tol: f64) -> Option<PermWithPhases> {
    if !m.is_square() {
        return None;
    }
    let n = m.nrows();
    let mut perm = vec![usize::MAX; n];
    let mut phases = vec![c(0.0, 0.0); n];
    let mut row_used = vec![false; n];
    for j in 0..n {
        for i in 0..n {
            let a = m[(i, j)].norm();
            if (a - 1.0).abs() <= tol {
                if perm[j] != usize::MAX || row_used[i] {
                    return None;
                }
                perm[j] = i;
                row_used[i] = true;
                phases[j] = m[(i, j)] / a;
            } else if a >= tol {
                return None;
            }
        }
        if perm[j] == usize::MAX {
            return None;
        }
    }
    Some(PermWithPhases { perm, phases })
}

/// Serializable form with phases as `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PermJson {
    pub perm: Vec<usize>,
    pub phases: Vec<[f64; 2]>,
}

impl From<&PermWithPhases> for PermJson {
    fn from(p: &PermWithPhases) -> Self {
        PermJson { perm: p.perm.clone(), phases: p.phases.iter().map(|z| [z.re, z.im]).collect() }
    }
}

impl From<&PermJson> for PermWithPhases {
    fn from(p: &PermJson) -> Self {
        PermWithPhases { perm: p.perm.clone(), phases: p.phases.iter().map(|z| c(z[0], z[1])).collect() }
    }
}
