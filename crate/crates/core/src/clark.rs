//! Cost accounting for the Pauli-rotation ping-pong scheme.
//!
//! A rotation `R_P(θ) = exp(−iθ/2 P)` with a binary angle `θ = (2m−1)π/2^D` is
//! implemented deterministically with at most `2D+1` ebits. Chaining rotations
//! multiplies the branches: every exit point of an earlier rotation needs its own
//! copy of the later ones. Any two-qubit unitary is brought to a nine-rotation
//! chain by a Cartan (KAK) decomposition followed by Euler angles.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::basis::MeasurementBasis;
use crate::equivalence::{equivalent, EquivalenceBudget};
use crate::error::{Error, Result};
use crate::linalg::{c, cis, cr, from_rows, identity, kron, phase_distance, CMatrix, Complex64};
use crate::pauli::{Pauli, PauliString};

pub const D_MAX: u32 = 30;
const ANGLE_REL_TOL: f64 = 1e-10;
const ZERO_ANGLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Euler {
    Zyz,
    Zxz,
}

impl Euler {
    pub fn parse(s: &str) -> Result<Euler> {
        match s.to_ascii_lowercase().as_str() {
            "zyz" => Ok(Euler::Zyz),
            "zxz" => Ok(Euler::Zxz),
            other => Err(Error::InvalidArgument(format!("unknown Euler convention `{other}`"))),
        }
    }

    fn middle(self) -> Pauli {
        match self {
            Euler::Zyz => Pauli::Y,
            Euler::Zxz => Pauli::X,
        }
    }
}

/// `θ = (2m−1)π/2^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryAngle {
    pub m: i64,
    pub d: u32,
}

/// Smallest `D ≤ d_max` with `θ = (2m−1)π/2^D` for an integer `m`; `None` when
/// no such form exists (the infinite case).
pub fn binary_angle(theta: f64, d_max: u32) -> Option<BinaryAngle> {
    let tol = ANGLE_REL_TOL * theta.abs().max(1.0);
    for d in 0..=d_max {
        let step = PI / 2f64.powi(d as i32);
        let x = theta / step;
        let k = x.round();
        if (x - k).abs() * step <= tol && (k as i64).rem_euclid(2) == 1 {
            return Some(BinaryAngle { m: (k as i64 + 1) / 2, d });
        }
    }
    None
}

/// Angle reduced to `(−π, π]`; rotations differing by 2π agree up to sign.
fn reduce_angle(theta: f64) -> f64 {
    let r = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI + 1e-15 {
        PI
    } else {
        r
    }
}

fn is_zero_angle(theta: f64) -> bool {
    reduce_angle(theta).abs() < ZERO_ANGLE_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationRole {
    /// Local rotations applied before any teleportation; no ebits.
    Free,
    /// Rotations implemented through the ping-pong protocol.
    Charged,
    /// Trailing Z rotations that do not change computational-basis statistics.
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub axis: PauliString,
    pub theta: f64,
    pub binary: Option<BinaryAngle>,
    pub role: RotationRole,
}

impl Rotation {
    pub fn new(axis: PauliString, theta: f64, role: RotationRole) -> Self {
        let theta = reduce_angle(theta);
        Rotation { binary: binary_angle(theta, D_MAX), axis, theta, role }
    }

    pub fn charged(axis: &[Pauli], theta: f64) -> Self {
        Self::new(PauliString(axis.to_vec()), theta, RotationRole::Charged)
    }

    pub fn matrix(&self) -> CMatrix {
        rotation(&self.axis.matrix(), self.theta)
    }

    pub fn is_zero(&self) -> bool {
        is_zero_angle(self.theta)
    }
}

/// `exp(−iθ/2 P)` for an involutive Pauli string `P`.
pub fn rotation(p: &CMatrix, theta: f64) -> CMatrix {
    identity(p.nrows()) * cr((theta / 2.0).cos()) - p * c(0.0, (theta / 2.0).sin())
}

/// Rotations in application order (the first entry acts first on the state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationChain {
    pub rotations: Vec<Rotation>,
}

impl RotationChain {
    pub fn new(rotations: Vec<Rotation>) -> Self {
        RotationChain { rotations }
    }

    pub fn reconstruct(&self) -> CMatrix {
        let n = self.rotations.first().map(|r| r.axis.matrix().nrows()).unwrap_or(4);
        self.rotations.iter().fold(identity(n), |acc, r| r.matrix() * acc)
    }

    pub fn charged(&self) -> impl Iterator<Item = &Rotation> {
        self.rotations.iter().filter(|r| r.role == RotationRole::Charged)
    }
}

/// Worst-case ebits: each nonzero charged rotation costs `2D+1` times the number of
/// branches opened by earlier rotations with `0 < D < ∞`. `None` is infinite.
pub fn chain_cost(chain: &RotationChain) -> Option<u64> {
    let mut total: u64 = 0;
    let mut branches: u64 = 1;
    for r in chain.charged() {
        if r.is_zero() {
            continue;
        }
        let d = r.binary?.d as u64;
        total = total.checked_add((2 * d + 1).checked_mul(branches)?)?;
        if d > 0 {
            branches = branches.checked_mul(2 * d + 1)?;
        }
    }
    Some(total)
}

// ---------------------------------------------------------------------------
// Cartan decomposition

/// `U = e^{iφ} (V_A⊗V_B) exp(i(ξ₁XX + ξ₂YY + ξ₃ZZ)) (W_A⊗W_B)` with ξ in the Weyl
/// chamber `π/4 ≥ ξ₁ ≥ ξ₂ ≥ |ξ₃|`.
#[derive(Debug, Clone)]
pub struct CartanFactors {
    pub xi: [f64; 3],
    pub va: CMatrix,
    pub vb: CMatrix,
    pub wa: CMatrix,
    pub wb: CMatrix,
    pub phase: Complex64,
}

fn pauli(p: Pauli) -> CMatrix {
    p.matrix()
}

fn pp(p: Pauli) -> CMatrix {
    kron(&pauli(p), &pauli(p))
}

const AXES: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

/// `exp(i(ξ₁XX + ξ₂YY + ξ₃ZZ))`; the three terms commute.
pub fn canonical_gate(xi: [f64; 3]) -> CMatrix {
    AXES.iter().zip(xi).fold(identity(4), |acc, (&p, x)| acc * rotation(&pp(p), -2.0 * x))
}

impl CartanFactors {
    pub fn reconstruct(&self) -> CMatrix {
        kron(&self.va, &self.vb) * canonical_gate(self.xi) * kron(&self.wa, &self.wb) * self.phase
    }
}

fn magic() -> CMatrix {
    let s = 1.0 / 2f64.sqrt();
    let (o, z, i) = (cr(1.0), cr(0.0), c(0.0, 1.0));
    from_rows(4, 4, &[o, z, z, i, z, i, o, z, z, i, -o, z, o, z, z, -i], s)
}

/// Splits a local 4×4 unitary into `A⊗B` with `A ∈ SU(2)`.
fn split_local(k: &CMatrix) -> (CMatrix, CMatrix) {
    let (mut best, mut bv) = ((0, 0), -1.0);
    for p in 0..2 {
        for q in 0..2 {
            let v: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| k[(2 * i + p, 2 * j + q)].norm_sqr()).sum();
            if v > bv {
                bv = v;
                best = (p, q);
            }
        }
    }
    let (p, q) = best;
    let mut a = CMatrix::from_fn(2, 2, |i, j| k[(2 * i + p, 2 * j + q)]);
    let det = a.determinant();
    a /= det.sqrt();
    let rest = kron(&a.adjoint(), &identity(2)) * k;
    let b = CMatrix::from_fn(2, 2, |i, j| (rest[(i, j)] + rest[(2 + i, 2 + j)]) / cr(2.0));
    (a, b)
}

/// Real orthogonal `P` (det 1) diagonalizing the commuting real symmetric parts of
/// `m`. Inside a degenerate eigenspace the basis is the Gram–Schmidt image of the
/// standard vectors, so symmetric inputs get reproducible, axis-aligned factors.
fn simultaneous_real_eigenbasis(m: &CMatrix) -> Result<nalgebra::DMatrix<f64>> {
    use nalgebra::{DMatrix, DVector};
    let re = m.map(|z| z.re);
    let im = m.map(|z| z.im);
    for &t in &[0.5773502691896258, 1.3247179572447460, 2.718281828459045, 0.1234567] {
        let eig = nalgebra::SymmetricEigen::new(&re + &im * t);
        let vecs = eig.eigenvectors;
        let lam: Vec<Complex64> = (0..4)
            .map(|j| {
                let v = vecs.column(j).map(cr);
                (v.transpose() * m * &v)[(0, 0)]
            })
            .collect();
        let mut cols: Vec<DVector<f64>> = Vec::new();
        let mut done = [false; 4];
        for j in 0..4 {
            if done[j] {
                continue;
            }
            let group: Vec<usize> = (j..4).filter(|&k| !done[k] && (lam[k] - lam[j]).norm() < 1e-8).collect();
            let mut proj = DMatrix::<f64>::zeros(4, 4);
            for &k in &group {
                done[k] = true;
                proj += vecs.column(k) * vecs.column(k).transpose();
            }
            let mut basis: Vec<DVector<f64>> = Vec::new();
            for e in 0..4 {
                if basis.len() == group.len() {
                    break;
                }
                let mut v = proj.column(e).into_owned();
                for b in &basis {
                    v -= b * b.dot(&v);
                }
                if v.norm() > 1e-6 {
                    basis.push(&v / v.norm());
                }
            }
            cols.extend(basis);
        }
        if cols.len() != 4 {
            continue;
        }
        let mut p = DMatrix::from_columns(&cols);
        let pc = p.map(cr);
        let d = pc.transpose() * m * &pc;
        let off: f64 = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| d[(i, j)].norm()).sum();
        if off < 1e-9 {
            if p.determinant() < 0.0 {
                p.column_mut(3).neg_mut();
            }
            return Ok(p);
        }
    }
    Err(Error::Numerical("no common real eigenbasis in the Cartan decomposition".into()))
}

/// Eigenvalues of `XX`, `YY`, `ZZ` on the magic-basis columns.
fn magic_signs() -> [[f64; 3]; 4] {
    let b = magic();
    let mut out = [[0.0; 3]; 4];
    for (j, row) in out.iter_mut().enumerate() {
        let v = b.column(j).into_owned();
        for (k, &p) in AXES.iter().enumerate() {
            row[k] = (v.adjoint() * pp(p) * &v)[(0, 0)].re.round();
        }
    }
    out
}

struct Kak {
    k1: CMatrix,
    xi: [f64; 3],
    k2: CMatrix,
    phase: Complex64,
}

fn raw_kak(u: &CMatrix) -> Result<Kak> {
    let det = u.determinant();
    let g = det.powf(0.25);
    let us = u / g;
    let b = magic();
    let up = b.adjoint() * &us * &b;
    let m2 = up.transpose() * &up;
    let p = simultaneous_real_eigenbasis(&m2)?;
    let pc = p.map(cr);
    let d = pc.transpose() * &m2 * &pc;
    let mut half: Vec<Complex64> = (0..4).map(|j| d[(j, j)].sqrt()).collect();
    let prod: Complex64 = half.iter().product();
    if prod.re < 0.0 {
        half[0] = -half[0];
    }
    let dhi = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(half.iter().map(|z| z.inv()).collect()));
    let o1 = &up * &pc * dhi;
    let o2 = pc.transpose();
    let k1 = &b * o1 * b.adjoint();
    let k2 = &b * o2 * b.adjoint();
    let signs = magic_signs();
    let phi: Vec<f64> = half.iter().map(|z| z.arg()).collect();
    let mut xi = [0.0; 3];
    for (k, x) in xi.iter_mut().enumerate() {
        *x = (0..4).map(|j| signs[j][k] * phi[j]).sum::<f64>() / 4.0;
    }
    let gph: f64 = phi.iter().sum::<f64>() / 4.0;
    let kak = Kak { k1, xi, k2, phase: g * cis(gph) };
    Ok(kak)
}

fn one_qubit_rotation_quarter(l: Pauli) -> CMatrix {
    rotation(&pauli(l), FRAC_PI_2)
}

impl Kak {
    /// `A(ξ) = A(ξ')·(∓i P_jP_j)` with `ξ'_j = ξ_j ∓ π/2`.
    fn shift(&mut self, j: usize, down: bool) {
        let s = if down { c(0.0, 1.0) } else { c(0.0, -1.0) };
        self.k2 = pp(AXES[j]) * s * &self.k2;
        self.xi[j] += if down { -FRAC_PI_2 } else { FRAC_PI_2 };
    }

    /// Conjugation by `Q⊗𝟙` negates the two coordinates other than `Q`'s.
    fn flip(&mut self, keep: usize) {
        let q = kron(&pauli(AXES[keep]), &identity(2));
        self.k1 = &self.k1 * &q;
        self.k2 = &q * &self.k2;
        for k in 0..3 {
            if k != keep {
                self.xi[k] = -self.xi[k];
            }
        }
    }

    /// Conjugation by `C⊗C`, a quarter turn about the third axis, swaps two coordinates.
    fn swap(&mut self, i: usize, j: usize) {
        let l = 3 - i - j;
        let cc = one_qubit_rotation_quarter(AXES[l]);
        let c2 = kron(&cc, &cc);
        self.k1 = &self.k1 * c2.adjoint();
        self.k2 = c2 * &self.k2;
        self.xi.swap(i, j);
    }

    fn canonicalize(&mut self) {
        const EPS: f64 = 1e-12;
        for j in 0..3 {
            while self.xi[j] > FRAC_PI_4 + EPS {
                self.shift(j, true);
            }
            while self.xi[j] <= -FRAC_PI_4 + EPS {
                self.shift(j, false);
            }
        }
        for _ in 0..3 {
            for j in 0..2 {
                if self.xi[j].abs() + EPS < self.xi[j + 1].abs() {
                    self.swap(j, j + 1);
                }
            }
        }
        if self.xi[0] < -EPS {
            self.flip(1);
        }
        if self.xi[1] < -EPS {
            self.flip(0);
        }
        if (self.xi[0] - FRAC_PI_4).abs() < EPS && self.xi[2] < -EPS {
            self.shift(0, true);
            self.flip(1);
        }
    }
}

/// Cartan decomposition of an arbitrary two-qubit unitary.
pub fn cartan_decompose_unitary(u: &CMatrix) -> Result<CartanFactors> {
    if u.nrows() != 4 || u.ncols() != 4 {
        return Err(Error::Dimension("Cartan decomposition needs a 4×4 unitary".into()));
    }
    let mut kak = raw_kak(u)?;
    kak.canonicalize();
    let (va, vb) = split_local(&kak.k1);
    let (wa, wb) = split_local(&kak.k2);
    let mut f = CartanFactors { xi: kak.xi, va, vb, wa, wb, phase: kak.phase };
    // the local splits fix determinants; restore the global phase from the product
    let r = f.reconstruct();
    let (mut best, mut bv) = (0, -1.0);
    for (k, z) in r.iter().enumerate() {
        if z.norm() > bv {
            bv = z.norm();
            best = k;
        }
    }
    f.phase *= u.iter().nth(best).copied().unwrap_or(cr(1.0)) / r.iter().nth(best).copied().unwrap_or(cr(1.0));
    let err = phase_distance(&f.reconstruct(), u);
    if err > 1e-8 {
        return Err(Error::Numerical(format!("Cartan reconstruction error {err:.2e}")));
    }
    Ok(f)
}

pub fn cartan_decompose(m: &MeasurementBasis) -> Result<CartanFactors> {
    if !m.is_two_qubit() {
        return Err(Error::Unsupported("Cartan decomposition is for two qubits".into()));
    }
    cartan_decompose_unitary(&m.matrix)
}

/// `U = e^{iφ} R_Z(α) R_Q(β) R_Z(γ)` with `Q` the middle axis of the convention.
pub fn euler_angles(u: &CMatrix, euler: Euler) -> (f64, f64, f64) {
    let beta = 2.0 * u[(1, 0)].norm().atan2(u[(0, 0)].norm());
    let sum = if u[(0, 0)].norm() > 1e-12 { (u[(1, 1)] / u[(0, 0)]).arg() } else { 0.0 };
    let diff = if u[(1, 0)].norm() > 1e-12 { (u[(1, 0)] / -u[(0, 1)]).arg() } else { 0.0 };
    let (alpha, gamma) = ((sum + diff) / 2.0, (sum - diff) / 2.0);
    // the ratios fix α and γ only up to a joint shift by π, which flips β
    let z = pauli(Pauli::Z);
    let recon = |b: f64| rotation(&z, alpha) * rotation(&pauli(Pauli::Y), b) * rotation(&z, gamma);
    let beta = if phase_distance(&recon(beta), u) <= phase_distance(&recon(-beta), u) { beta } else { -beta };
    match euler {
        Euler::Zyz => (alpha, beta, gamma),
        Euler::Zxz => (alpha + FRAC_PI_2, beta, gamma - FRAC_PI_2),
    }
}

fn on(party: usize, p: Pauli) -> PauliString {
    let mut v = vec![Pauli::I, Pauli::I];
    v[party] = p;
    PauliString(v)
}

fn euler_rotations(u: &CMatrix, party: usize, euler: Euler) -> [(PauliString, f64); 3] {
    let (a, b, g) = euler_angles(u, euler);
    [(on(party, Pauli::Z), g), (on(party, euler.middle()), b), (on(party, Pauli::Z), a)]
}

/// The nine-rotation chain of a Cartan decomposition, in application order: the
/// free `W` rotations, then `ZZ`, `YY`, `XX`, then `V_B` and `V_A` interleaved,
/// ending with the dropped final Z rotations.
pub fn cartan_chain(f: &CartanFactors, euler: Euler) -> RotationChain {
    let mut rot = Vec::new();
    for (party, w) in [(0, &f.wa), (1, &f.wb)] {
        for (axis, t) in euler_rotations(w, party, euler) {
            rot.push(Rotation::new(axis, t, RotationRole::Free));
        }
    }
    for k in (0..3).rev() {
        rot.push(Rotation::new(PauliString(vec![AXES[k], AXES[k]]), -2.0 * f.xi[k], RotationRole::Charged));
    }
    let va = euler_rotations(&f.va, 0, euler);
    let vb = euler_rotations(&f.vb, 1, euler);
    for step in 0..3 {
        let role = if step == 2 { RotationRole::Dropped } else { RotationRole::Charged };
        for (axis, t) in [&vb[step], &va[step]] {
            rot.push(Rotation::new(axis.clone(), *t, role));
        }
    }
    RotationChain::new(rot)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClarkBound {
    pub euler: Euler,
    pub chain: RotationChain,
    /// `None` when some charged angle is not binary.
    pub ebits: Option<u64>,
    /// Reconstruction error of the chain, up to global phase.
    pub residual: f64,
}

/// Worst-case ebit bound from the Cartan chain of the operation `M†` that rotates
/// the measurement basis onto the computational basis.
pub fn clark_upper_bound_with(m: &MeasurementBasis, euler: Euler) -> Result<ClarkBound> {
    if !m.is_two_qubit() {
        return Err(Error::Unsupported("Clark bounds are for two qubits".into()));
    }
    let u = m.matrix.adjoint();
    let f = cartan_decompose_unitary(&u)?;
    let chain = cartan_chain(&f, euler);
    let residual = phase_distance(&chain.reconstruct(), &u);
    Ok(ClarkBound { euler, ebits: chain_cost(&chain), chain, residual })
}

pub fn clark_upper_bound(m: &MeasurementBasis) -> Result<ClarkBound> {
    clark_upper_bound_with(m, Euler::Zyz)
}

/// Cheapest single nonlocal rotation `R_P(θ)` with `D ≤ d_max` whose rotated
/// computational basis is equivalent to `m`; returns the axis, the angle and `2D+1`.
pub fn clark_single_rotation(m: &MeasurementBasis, d_max: u32) -> Result<Option<(PauliString, f64, u64)>> {
    if !m.is_two_qubit() {
        return Err(Error::Unsupported("Clark costs are for two qubits".into()));
    }
    let budget = EquivalenceBudget { restarts: 6, max_evals: 4000, seed: 11 };
    for d in 0..=d_max {
        let step = PI / 2f64.powi(d as i32);
        let mut k: i64 = 1;
        while (k as f64) * step < 2.0 * PI {
            for a in AXES {
                for b in AXES {
                    let axis = PauliString(vec![a, b]);
                    let theta = k as f64 * step;
                    let basis = MeasurementBasis::qubits2(rotation(&axis.matrix(), theta).adjoint())?;
                    if equivalent(m, &basis, budget).is_yes() {
                        return Ok(Some((axis, theta, 2 * d as u64 + 1)));
                    }
                }
            }
            k += 2;
        }
    }
    Ok(None)
}

/// Makhlin invariants `(G₁, G₂)`, equal exactly for locally equivalent unitaries.
pub fn makhlin_invariants(u: &CMatrix) -> (Complex64, f64) {
    let b = magic();
    let ub = b.adjoint() * u * &b;
    let m = ub.transpose() * &ub;
    let det = u.determinant();
    let tr = m.trace();
    let g1 = tr * tr / (det * cr(16.0));
    let g2 = (tr * tr - (&m * &m).trace()) / (det * cr(4.0));
    (g1, g2.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_angle_examples() {
        assert_eq!(binary_angle(FRAC_PI_2, D_MAX), Some(BinaryAngle { m: 1, d: 1 }));
        assert_eq!(binary_angle(3.0 * FRAC_PI_4, D_MAX), Some(BinaryAngle { m: 2, d: 2 }));
        assert_eq!(binary_angle(1.0, D_MAX), None);
        assert_eq!(binary_angle(PI / 6.0, D_MAX), None);
    }

    #[test]
    fn single_rotation_costs() {
        let xx = RotationChain::new(vec![Rotation::charged(&[Pauli::X, Pauli::X], FRAC_PI_2)]);
        assert_eq!(chain_cost(&xx), Some(3));
        let xz = RotationChain::new(vec![Rotation::charged(&[Pauli::X, Pauli::Z], FRAC_PI_4)]);
        assert_eq!(chain_cost(&xz), Some(5));
        let bad = RotationChain::new(vec![Rotation::charged(&[Pauli::X, Pauli::Z], 1.0)]);
        assert_eq!(chain_cost(&bad), None);
    }

    #[test]
    fn euler_round_trip() {
        let u = rotation(&pauli(Pauli::Z), 0.3) * rotation(&pauli(Pauli::Y), 1.1) * rotation(&pauli(Pauli::Z), -0.7);
        for e in [Euler::Zyz, Euler::Zxz] {
            let (a, b, g) = euler_angles(&u, e);
            let r = rotation(&pauli(Pauli::Z), a) * rotation(&pauli(e.middle()), b) * rotation(&pauli(Pauli::Z), g);
            assert!(phase_distance(&r, &u) < 1e-12);
        }
    }
}
