//! Pauli operators for qubits and Weyl (clock and shift) operators for qudits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{c, cis, cr, identity, kron_all, zeros, CMatrix};

/// Single-qubit Pauli label, indexed 0..4 as (𝟙, X, Y, Z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    pub const NONTRIVIAL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Pauli {
        Pauli::ALL[i % 4]
    }

    pub fn matrix(self) -> CMatrix {
        let o = cr(0.0);
        let l = cr(1.0);
        let v = match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, c(0.0, -1.0), c(0.0, 1.0), o],
            Pauli::Z => [l, o, o, -l],
        };
        CMatrix::from_row_slice(2, 2, &v)
    }

    /// Symplectic (x, z) bits.
    pub fn bits(self) -> (u8, u8) {
        match self {
            Pauli::I => (0, 0),
            Pauli::X => (1, 0),
            Pauli::Y => (1, 1),
            Pauli::Z => (0, 1),
        }
    }

    pub fn from_bits(x: u8, z: u8) -> Pauli {
        match (x & 1, z & 1) {
            (0, 0) => Pauli::I,
            (1, 0) => Pauli::X,
            (1, 1) => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    pub fn label(self) -> char {
        ['0', 'X', 'Y', 'Z'][self.index()]
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Tensor product of per-party Pauli labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    pub fn matrix(&self) -> CMatrix {
        kron_all(&self.0.iter().map(|p| p.matrix()).collect::<Vec<_>>())
    }

    /// All `4^n` strings in lexicographic order of indices.
    pub fn all(n: usize) -> Vec<PauliString> {
        (0..4usize.pow(n as u32))
            .map(|mut k| {
                let mut v = vec![Pauli::I; n];
                for slot in v.iter_mut().rev() {
                    *slot = Pauli::from_index(k % 4);
                    k /= 4;
                }
                PauliString(v)
            })
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|p| *p == Pauli::I)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Shift operator `X_d|j⟩ = |j+1 mod d⟩`.
pub fn shift(d: usize) -> CMatrix {
    let mut m = zeros(d, d);
    for j in 0..d {
        m[((j + 1) % d, j)] = cr(1.0);
    }
    m
}

/// Clock operator `Z_d|j⟩ = ω^j|j⟩` with `ω = e^{2πi/d}`.
pub fn clock(d: usize) -> CMatrix {
    let mut m = zeros(d, d);
    for j in 0..d {
        m[(j, j)] = cis(2.0 * std::f64::consts::PI * j as f64 / d as f64);
    }
    m
}

/// `X_d^{a} Z_d^{b}`.
pub fn weyl(d: usize, a: usize, b: usize) -> CMatrix {
    let x = shift(d);
    let z = clock(d);
    let mut m = identity(d);
    for _ in 0..(a % d) {
        m = &x * m;
    }
    let mut zz = identity(d);
    for _ in 0..(b % d) {
        zz = &z * zz;
    }
    m * zz
}
