//! Reference measurements, transcribed entry by entry.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::basis::MeasurementBasis;
use crate::error::{Error, Result};
use crate::linalg::{c, cr, from_columns, from_rows, kron, CMatrix, CVector, Complex64};
use crate::pauli::{weyl, Pauli};

/// A named reference measurement with the properties claimed for it.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub basis: MeasurementBasis,
    /// Ebits consumed by the lowest teleportation level that localizes it.
    pub claimed_level: Option<usize>,
    /// Tangle of each column (bipartite entries only).
    pub claimed_tangles: Option<Vec<f64>>,
}

pub const NAMES: [&str; 11] =
    ["product", "twisted", "BSM", "EJM", "E2", "pBSM", "tBSM", "B2", "GHZ", "M98", "M106"];

/// The eight two-qubit classes localizable with at most three ebits.
pub const LEVEL2_CLASSES: [&str; 8] = ["product", "twisted", "BSM", "pBSM", "EJM", "E2", "tBSM", "B2"];

fn ket(bits: &str) -> CVector {
    let single = |ch: char| -> CVector {
        let h = FRAC_1_SQRT_2;
        match ch {
            '0' => CVector::from_vec(vec![cr(1.0), cr(0.0)]),
            '1' => CVector::from_vec(vec![cr(0.0), cr(1.0)]),
            '+' => CVector::from_vec(vec![cr(h), cr(h)]),
            '-' => CVector::from_vec(vec![cr(h), cr(-h)]),
            _ => unreachable!("ket label"),
        }
    };
    let mut v = CVector::from_vec(vec![cr(1.0)]);
    for ch in bits.chars() {
        v = v.kronecker(&single(ch));
    }
    v
}

fn combo(terms: &[(Complex64, &str)]) -> CVector {
    let mut v = CVector::zeros(1 << terms[0].1.len());
    for (a, k) in terms {
        v += ket(k) * *a;
    }
    v * cr(FRAC_1_SQRT_2)
}

fn bell_states() -> [CVector; 4] {
    let one = cr(1.0);
    [
        combo(&[(one, "00"), (one, "11")]),
        combo(&[(one, "01"), (one, "10")]),
        combo(&[(one, "01"), (-one, "10")]),
        combo(&[(one, "00"), (-one, "11")]),
    ]
}

fn qubits(m: CMatrix, name: &str) -> MeasurementBasis {
    MeasurementBasis::new(m, vec![2, 2]).expect("catalog entry is unitary").named(name)
}

fn product() -> MeasurementBasis {
    qubits(CMatrix::identity(4, 4), "product")
}

fn twisted() -> MeasurementBasis {
    qubits(from_columns(&[ket("00"), ket("01"), ket("1+"), ket("1-")]), "twisted")
}

fn bsm() -> MeasurementBasis {
    qubits(from_columns(&bell_states()), "BSM")
}

fn ejm() -> MeasurementBasis {
    let z = cr(0.0);
    let data = [
        c(1.0, 1.0), c(-1.0, 1.0), c(1.0, -1.0), c(-1.0, -1.0),
        c(0.0, -2.0), z, z, c(0.0, -2.0),
        z, c(0.0, 2.0), c(0.0, 2.0), z,
        c(1.0, -1.0), c(-1.0, -1.0), c(1.0, 1.0), c(-1.0, 1.0),
    ];
    qubits(from_rows(4, 4, &data, 1.0 / 8f64.sqrt()), "EJM")
}

fn e2() -> MeasurementBasis {
    let (o, l, r) = (cr(0.0), cr(1.0), cr(SQRT_2));
    let data = [
        o, r, -r, o,
        l, -l, -l, l,
        l, l, l, l,
        r, o, o, -r,
    ];
    qubits(from_rows(4, 4, &data, 0.5), "E2")
}

fn pbsm() -> MeasurementBasis {
    let b = bell_states();
    qubits(from_columns(&[b[1].clone(), b[2].clone(), ket("00"), ket("11")]), "pBSM")
}

fn tbsm() -> MeasurementBasis {
    let (o, l, r) = (cr(0.0), cr(1.0), cr(SQRT_2));
    let data = [
        l, l, l, l,
        l, -l, -l, l,
        o, r, -r, o,
        -r, o, o, r,
    ];
    qubits(from_rows(4, 4, &data, 0.5), "tBSM")
}

fn b2() -> MeasurementBasis {
    let (o, l, r, ir) = (cr(0.0), cr(1.0), cr(SQRT_2), c(0.0, SQRT_2));
    let data = [
        o, o, ir, -ir,
        r, -r, o, o,
        l, l, l, l,
        -l, -l, l, l,
    ];
    qubits(from_rows(4, 4, &data, 0.5), "B2")
}

/// Column `(a,b,c)` is `(|0,b⊕a,c⊕a⟩ + (−1)^a |1,¬(b⊕a),¬(c⊕a)⟩)/√2`.
fn ghz() -> MeasurementBasis {
    let mut cols = Vec::new();
    for j in 0..8usize {
        let a = (j >> 2) & 1;
        let b = ((j >> 1) & 1) ^ a;
        let cc = (j & 1) ^ a;
        let mut v = CVector::zeros(8);
        v[(b << 1) | cc] = cr(FRAC_1_SQRT_2);
        v[4 | ((1 - b) << 1) | (1 - cc)] = cr(if a == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 });
        cols.push(v);
    }
    MeasurementBasis::new(from_columns(&cols), vec![2, 2, 2]).expect("unitary").named("GHZ")
}

fn m98() -> MeasurementBasis {
    let (o, l, i) = (cr(0.0), cr(1.0), c(0.0, 1.0));
    let data = [
        o, o, o, o, l, l, l, l,
        o, o, o, o, l, -l, l, -l,
        o, o, o, o, l, l, -l, -l,
        l, l, l, l, o, o, o, o,
        o, o, o, o, -i, i, i, -i,
        l, -l, l, -l, o, o, o, o,
        i, i, -i, -i, o, o, o, o,
        l, -l, -l, l, o, o, o, o,
    ];
    MeasurementBasis::new(from_rows(8, 8, &data, 0.5), vec![2, 2, 2]).expect("unitary").named("M98")
}

fn m106() -> MeasurementBasis {
    let (o, l) = (cr(0.0), cr(1.0));
    let data = [
        o, o, o, o, -l, l, l, -l,
        o, o, o, o, l, l, l, l,
        o, o, o, o, l, l, -l, -l,
        l, l, l, l, o, o, o, o,
        o, o, o, o, l, -l, l, -l,
        l, -l, -l, l, o, o, o, o,
        l, -l, l, -l, o, o, o, o,
        -l, -l, l, l, o, o, o, o,
    ];
    MeasurementBasis::new(from_rows(8, 8, &data, 0.5), vec![2, 2, 2]).expect("unitary").named("M106")
}

/// Looks up a catalog entry by key.
pub fn get(name: &str) -> Result<CatalogEntry> {
    let q = |v: f64| Some(vec![v; 4]);
    let (basis, level, tangles) = match name {
        "product" => (product(), Some(0), q(0.0)),
        "twisted" => (twisted(), Some(1), q(0.0)),
        "BSM" => (bsm(), Some(1), q(1.0)),
        "EJM" => (ejm(), Some(3), q(0.25)),
        "E2" => (e2(), Some(3), q(0.25)),
        "pBSM" => (pbsm(), Some(3), Some(vec![1.0, 1.0, 0.0, 0.0])),
        "tBSM" => (tbsm(), Some(3), q(0.5)),
        "B2" => (b2(), Some(3), q(0.5)),
        "GHZ" => (ghz(), Some(2), None),
        "M98" => (m98(), Some(17), None),
        "M106" => (m106(), Some(17), None),
        other => return Err(Error::UnknownName(other.to_string())),
    };
    let name = NAMES.iter().find(|n| **n == name).copied().expect("listed");
    Ok(CatalogEntry { name, basis, claimed_level: level, claimed_tangles: tangles })
}

/// Shorthand for the basis of a catalog entry.
pub fn basis(name: &str) -> Result<MeasurementBasis> {
    get(name).map(|e| e.basis)
}

/// `|0⟩⟨0|⊗𝟙 + |1⟩⟨1|⊗R_Y(θ)` with `R_Y(θ) = exp(−iθσ_Y/2)`.
pub fn crot(theta: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    let mut u = CMatrix::identity(4, 4);
    u[(2, 2)] = cr(co);
    u[(2, 3)] = cr(-s);
    u[(3, 2)] = cr(s);
    u[(3, 3)] = cr(co);
    u
}

/// The computational basis twisted by a controlled Y rotation.
pub fn crot_basis(theta: f64) -> MeasurementBasis {
    qubits(crot(theta), "crot")
}

/// `{X_d^{x₁} Z_d^{x₂} ⊗ 𝟙 |φ₊⟩}` with column index `x₁·d + x₂`.
pub fn bell_basis(d: usize) -> Result<MeasurementBasis> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("local dimension {d} < 2")));
    }
    let phi = crate::linalg::max_entangled_vector(d)?;
    let id = CMatrix::identity(d, d);
    let mut cols = Vec::with_capacity(d * d);
    for x1 in 0..d {
        for x2 in 0..d {
            cols.push(kron(&weyl(d, x1, x2), &id) * &phi);
        }
    }
    Ok(MeasurementBasis::new(from_columns(&cols), vec![d, d])?.named("bell"))
}

/// A form of the twisted Bell measurement with entries `{1, ±i}/2`.
pub fn tbsm_weyl_form() -> MeasurementBasis {
    let (l, i) = (cr(1.0), c(0.0, 1.0));
    let data = [
        l, l, l, l,
        i, i, -i, -i,
        i, -i, i, -i,
        i, -i, -i, i,
    ];
    qubits(from_rows(4, 4, &data, 0.5), "tBSM-weyl")
}

/// Tilted Bell measurement with columns `cos x|00⟩ + sin x|11⟩`, etc., at `x = π/8`
/// (the angle giving tangle 1/2).
pub fn tilted_bsm() -> MeasurementBasis {
    let (s, co) = (PI / 8.0).sin_cos();
    let (o, c0, s0) = (cr(0.0), cr(co), cr(s));
    let data = [
        c0, s0, o, o,
        o, o, c0, s0,
        o, o, s0, -c0,
        s0, -c0, o, o,
    ];
    qubits(from_rows(4, 4, &data, 1.0), "tilted-BSM")
}

/// Single-qubit Pauli matrix helper for fixtures.
pub fn sigma(p: Pauli) -> CMatrix {
    p.matrix()
}
