//! PPT relaxation of localization with `n` shared ebits.
//!
//! For a two-qubit measurement `{M_c}` the program is
//!
//! maximize `¼ Σ_c Tr[Ñ_c (M_c ⊗ φ₊^⊗n)]`
//! subject to `Ñ_c ⪰ 0`, `Ñ_c^{T_B} ⪰ 0`, `Σ_c Ñ_c = 𝟙`,
//!
//! on `A ⊗ B ⊗ (A'B')^⊗n`, with the transpose taken over `B` and every `B'_i`.
//! A value below one rules out any `n`-ebit LOCC protocol.
//!
//! Two formulations are provided. The full one works on the whole space.
//! The twirled one uses the `U ⊗ Ū` symmetry of each ancilla pair to write
//! `Ñ_c = Σ_s X_{c,s} ⊗ P_{s₁} ⊗ … ⊗ P_{s_n}` with `P_0 = φ₊`, `P_1 = 𝟙 − φ₊`,
//! which leaves `2^n` four-by-four blocks per outcome. After the partial
//! transpose `φ₊ ↦ F/2 = (Π_S − Π_A)/2` and `𝟙 − φ₊ ↦ Π_S/2 + 3Π_A/2`, so the PPT
//! condition splits over the symmetric/antisymmetric patterns `r`.

use serde::{Deserialize, Serialize};

use crate::basis::MeasurementBasis;
use crate::conic::{ConicDump, ConicProblem, Constraint, IpmOptions, SolverStatus};
use crate::error::{Error, Result};
use crate::linalg::{c, kron, kron_all, max_abs, max_entangled, min_eigenvalue, partial_transpose, trace, CMatrix};
use crate::pauli::{Pauli, PauliString};
use nalgebra::DMatrix;

/// Largest ebit count accepted by the twirled formulation.
pub const N_MAX: usize = 3;

/// Largest ebit count the full formulation builds without `allow_large`.
pub const FULL_N_DEFAULT_MAX: usize = 1;

const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Twirled,
    Full,
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    pub formulation: Formulation,
    /// Permit full-space problems above `FULL_N_DEFAULT_MAX` ebits.
    pub allow_large: bool,
    pub tolerance: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions { formulation: Formulation::Twirled, allow_large: false, tolerance: 1e-9 }
    }
}

/// Dual solution. `bound = Σ Tr Λ` upper-bounds the primal value.
#[derive(Debug, Clone)]
pub enum DualCertificate {
    /// `Λ_s − δ_{s,0} M_c/4 − Σ_r κ(s,r) Γ_{c,r}^{T_B} ⪰ 0`, `Γ_{c,r} ⪰ 0`.
    Twirled { lambda: Vec<CMatrix>, gamma: Vec<Vec<CMatrix>> },
    /// `Λ − (M_c ⊗ φ₊^⊗n)/4 − Γ_c^{T_{BB'}} ⪰ 0`, `Γ_c ⪰ 0`.
    Full { lambda: CMatrix, gamma: Vec<CMatrix> },
}

#[derive(Debug, Clone, Serialize)]
pub struct SdpResult {
    pub n: usize,
    pub formulation: Formulation,
    pub value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    #[serde(skip)]
    pub dual: Option<DualCertificate>,
}

/// Which Hermitian variable a PSD block carries.
#[derive(Debug, Clone, Copy)]
enum Slot {
    /// Twirled `X_{c,s}` or full `Ñ_c` (s = 0).
    Primal { c: usize, s: usize },
    /// Partial-transpose image: twirled `Y_{c,r}` or full `Ñ_c^{T}`.
    Ppt,
}

/// One row's role, used to read the dual back.
#[derive(Debug, Clone)]
enum Row {
    Completeness { s: usize, p: usize },
    Link { c: usize, r: usize, p: usize },
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub n: usize,
    pub formulation: Formulation,
    pub conic: ConicProblem,
    /// Hermitian order of every block.
    pub order: usize,
    outcomes: usize,
    slots: Vec<Slot>,
    rows: Vec<Row>,
    paulis: Vec<CMatrix>,
}

fn embed(g: &CMatrix) -> DMatrix<f64> {
    let d = g.nrows();
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let v = g[(i, j)];
            out[(i, j)] = v.re;
            out[(i + d, j + d)] = v.re;
            out[(i, j + d)] = -v.im;
            out[(i + d, j)] = v.im;
        }
    }
    out
}

/// `A` with `⟨A, embed(H)⟩ = Re Tr(G H)`.
fn functional(g: &CMatrix) -> DMatrix<f64> {
    embed(g) * 0.5
}

/// Hermitian part encoded by a real symmetric block.
fn extract(w: &DMatrix<f64>) -> CMatrix {
    let d = w.nrows() / 2;
    CMatrix::from_fn(d, d, |i, j| {
        c((w[(i, j)] + w[(i + d, j + d)]) / 2.0, (w[(i + d, j)] - w[(i, j + d)]) / 2.0)
    })
}

/// `κ(s, r)`: coefficient of `Π_r` in `P_s^T` per ancilla pair, multiplied out.
fn kappa(s: usize, r: usize, n: usize) -> f64 {
    (0..n)
        .map(|i| match ((s >> i) & 1, (r >> i) & 1) {
            (0, 0) => 0.5,
            (0, _) => -0.5,
            (_, 0) => 0.5,
            _ => 1.5,
        })
        .product()
}

/// Sign picked up by a Pauli string under transposition of the listed qubits.
fn transpose_sign(p: &PauliString, qubits: &[usize]) -> f64 {
    let ys = qubits.iter().filter(|&&q| p.0[q] == Pauli::Y).count();
    if ys % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Qubits transposed in the full space: `B` and each `B'_i`.
fn bob_qubits(n: usize) -> Vec<usize> {
    std::iter::once(1).chain((0..n).map(|i| 3 + 2 * i)).collect()
}

fn check_input(m: &MeasurementBasis) -> Result<()> {
    if !m.is_two_qubit() {
        return Err(Error::Unsupported("the PPT bound is implemented for two-qubit measurements".into()));
    }
    Ok(())
}

impl SdpProblem {
    pub fn new(m: &MeasurementBasis, n: usize, opts: &SdpOptions) -> Result<Self> {
        check_input(m)?;
        match opts.formulation {
            Formulation::Twirled => Self::twirled(m, n),
            Formulation::Full => Self::full(m, n, opts.allow_large),
        }
    }

    pub fn twirled(m: &MeasurementBasis, n: usize) -> Result<Self> {
        check_input(m)?;
        if n > N_MAX {
            return Err(Error::InvalidArgument(format!("n = {n} exceeds {N_MAX}")));
        }
        let outcomes = m.outcomes();
        let patterns = 1usize << n;
        let strings = PauliString::all(2);
        let paulis: Vec<CMatrix> = strings.iter().map(|s| s.matrix()).collect();
        let signs: Vec<f64> = strings.iter().map(|s| transpose_sign(s, &[1])).collect();
        let mut slots = Vec::new();
        for cc in 0..outcomes {
            for s in 0..patterns {
                slots.push(Slot::Primal { c: cc, s });
            }
        }
        slots.extend(std::iter::repeat_n(Slot::Ppt, outcomes * patterns));
        let xb = |cc: usize, s: usize| cc * patterns + s;
        let yb = |cc: usize, r: usize| outcomes * patterns + cc * patterns + r;
        let mut conic = ConicProblem::new(vec![8; slots.len()]);
        for cc in 0..outcomes {
            conic.objective.push((xb(cc, 0), functional(&(m.projector(cc) * c(0.25, 0.0)))));
        }
        let mut rows = Vec::new();
        let funcs: Vec<DMatrix<f64>> = paulis.iter().map(functional).collect();
        for s in 0..patterns {
            for (p, f) in funcs.iter().enumerate() {
                conic.constraints.push(Constraint {
                    terms: (0..outcomes).map(|cc| (xb(cc, s), f.clone())).collect(),
                    rhs: trace(&paulis[p]).re,
                });
                rows.push(Row::Completeness { s, p });
            }
        }
        for cc in 0..outcomes {
            for r in 0..patterns {
                for (p, f) in funcs.iter().enumerate() {
                    let mut terms = vec![(yb(cc, r), f.clone())];
                    for s in 0..patterns {
                        terms.push((xb(cc, s), f * (-kappa(s, r, n) * signs[p])));
                    }
                    conic.constraints.push(Constraint { terms, rhs: 0.0 });
                    rows.push(Row::Link { c: cc, r, p });
                }
            }
        }
        Ok(SdpProblem { n, formulation: Formulation::Twirled, conic, order: 4, outcomes, slots, rows, paulis })
    }

    pub fn full(m: &MeasurementBasis, n: usize, allow_large: bool) -> Result<Self> {
        check_input(m)?;
        if n > FULL_N_DEFAULT_MAX && !allow_large {
            return Err(Error::InvalidArgument(format!(
                "full formulation at n = {n} needs allow_large (block order {})",
                4 * 4usize.pow(n as u32)
            )));
        }
        let outcomes = m.outcomes();
        let qubits = 2 + 2 * n;
        let order = 1usize << qubits;
        let strings = PauliString::all(qubits);
        let paulis: Vec<CMatrix> = strings.iter().map(|s| s.matrix()).collect();
        let bq = bob_qubits(n);
        let signs: Vec<f64> = strings.iter().map(|s| transpose_sign(s, &bq)).collect();
        let phi = max_entangled(2)?;
        let mut slots = Vec::new();
        for cc in 0..outcomes {
            slots.push(Slot::Primal { c: cc, s: 0 });
        }
        slots.extend(std::iter::repeat_n(Slot::Ppt, outcomes));
        let mut conic = ConicProblem::new(vec![2 * order; slots.len()]);
        for cc in 0..outcomes {
            let mut factors = vec![m.projector(cc)];
            factors.extend(std::iter::repeat_n(phi.clone(), n));
            conic.objective.push((cc, functional(&(kron_all(&factors) * c(0.25, 0.0)))));
        }
        let funcs: Vec<DMatrix<f64>> = paulis.iter().map(functional).collect();
        let mut rows = Vec::new();
        for (p, f) in funcs.iter().enumerate() {
            conic.constraints.push(Constraint {
                terms: (0..outcomes).map(|cc| (cc, f.clone())).collect(),
                rhs: trace(&paulis[p]).re,
            });
            rows.push(Row::Completeness { s: 0, p });
        }
        for cc in 0..outcomes {
            for (p, f) in funcs.iter().enumerate() {
                conic.constraints.push(Constraint {
                    terms: vec![(outcomes + cc, f.clone()), (cc, f * (-signs[p]))],
                    rhs: 0.0,
                });
                rows.push(Row::Link { c: cc, r: 0, p });
            }
        }
        Ok(SdpProblem { n, formulation: Formulation::Full, conic, order, outcomes, slots, rows, paulis })
    }

    pub fn dump(&self) -> ConicDump {
        self.conic.dump()
    }

    /// Hermitian primal variable `Ñ_c` of the full formulation, or `X_{c,s}` of the twirled one.
    fn primal_blocks(&self, x: &[DMatrix<f64>]) -> Vec<(usize, usize, CMatrix)> {
        self.slots
            .iter()
            .zip(x)
            .filter_map(|(slot, w)| match slot {
                Slot::Primal { c, s } => Some((*c, *s, extract(w))),
                Slot::Ppt => None,
            })
            .collect()
    }

    fn certificate(&self, y: &nalgebra::DVector<f64>) -> DualCertificate {
        let d = self.order;
        let patterns = match self.formulation {
            Formulation::Twirled => 1usize << self.n,
            Formulation::Full => 1,
        };
        let mut lambda = vec![CMatrix::zeros(d, d); patterns];
        let mut gamma = vec![vec![CMatrix::zeros(d, d); patterns]; self.outcomes];
        for (row, &yi) in self.rows.iter().zip(y.iter()) {
            match *row {
                Row::Completeness { s, p } => lambda[s] += &self.paulis[p] * c(yi, 0.0),
                Row::Link { c: cc, r, p } => gamma[cc][r] += &self.paulis[p] * c(yi, 0.0),
            }
        }
        match self.formulation {
            Formulation::Twirled => DualCertificate::Twirled { lambda, gamma },
            Formulation::Full => DualCertificate::Full {
                lambda: lambda.remove(0),
                gamma: gamma.into_iter().map(|mut g| g.remove(0)).collect(),
            },
        }
    }

    pub fn solve(&self, tolerance: f64) -> Result<SdpResult> {
        let sol = self.conic.solve(IpmOptions { tolerance, ..IpmOptions::default() })?;
        if sol.status == SolverStatus::NumericalFailure {
            return Err(Error::Numerical(format!(
                "interior-point solver failed after {} iterations (primal {:.3e}, dual {:.3e})",
                sol.iterations, sol.primal_objective, sol.dual_objective
            )));
        }
        Ok(SdpResult {
            n: self.n,
            formulation: self.formulation,
            value: sol.primal_objective,
            dual_value: sol.dual_objective,
            gap: (sol.dual_objective - sol.primal_objective).abs(),
            status: sol.status,
            iterations: sol.iterations,
            dual: Some(self.certificate(&sol.y)),
        })
    }

    /// Primal POVM operators `Ñ_c` of an optimal point, assembled on the full space.
    pub fn povm(&self, tolerance: f64) -> Result<Vec<CMatrix>> {
        let sol = self.conic.solve(IpmOptions { tolerance, ..IpmOptions::default() })?;
        let blocks = self.primal_blocks(&sol.x);
        let phi = max_entangled(2)?;
        let ortho = CMatrix::identity(4, 4) - &phi;
        let mut out = vec![CMatrix::zeros(4 << (2 * self.n), 4 << (2 * self.n)); self.outcomes];
        for (cc, s, x) in blocks {
            let full = match self.formulation {
                Formulation::Full => x,
                Formulation::Twirled => {
                    let mut factors = vec![x];
                    for i in 0..self.n {
                        factors.push(if (s >> i) & 1 == 0 { phi.clone() } else { ortho.clone() });
                    }
                    kron_all(&factors)
                }
            };
            out[cc] += full;
        }
        Ok(out)
    }
}

/// Optimal PPT value with `n` ebits, twirled formulation.
pub fn sdp_bound(m: &MeasurementBasis, n: usize) -> Result<SdpResult> {
    sdp_bound_with(m, n, &SdpOptions::default())
}

pub fn sdp_bound_with(m: &MeasurementBasis, n: usize, opts: &SdpOptions) -> Result<SdpResult> {
    SdpProblem::new(m, n, opts)?.solve(opts.tolerance)
}

fn hermitian_defect(h: &CMatrix) -> f64 {
    max_abs(&(h - h.adjoint()))
}

/// Re-checks a dual certificate by direct matrix arithmetic: Hermiticity,
/// positivity of every slack, and that `Σ Tr Λ` reproduces the reported value.
pub fn verify_dual(result: &SdpResult, m: &MeasurementBasis, n: usize) -> Result<bool> {
    check_input(m)?;
    let dual = result
        .dual
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("result carries no dual certificate".into()))?;
    if result.n != n {
        return Ok(false);
    }
    let outcomes = m.outcomes();
    let quarter = c(0.25, 0.0);
    let psd = |h: &CMatrix| hermitian_defect(h) <= VERIFY_TOL && min_eigenvalue(h) >= -VERIFY_TOL;
    let bound = match dual {
        DualCertificate::Twirled { lambda, gamma } => {
            let patterns = 1usize << n;
            if lambda.len() != patterns || gamma.len() != outcomes || gamma.iter().any(|g| g.len() != patterns) {
                return Ok(false);
            }
            if lambda.iter().chain(gamma.iter().flatten()).any(|h| h.shape() != (4, 4)) {
                return Ok(false);
            }
            if lambda.iter().any(|h| hermitian_defect(h) > VERIFY_TOL) || !gamma.iter().flatten().all(psd) {
                return Ok(false);
            }
            for (cc, gc) in gamma.iter().enumerate() {
                for (s, ls) in lambda.iter().enumerate() {
                    let mut slack = ls.clone();
                    if s == 0 {
                        slack -= m.projector(cc) * quarter;
                    }
                    for (r, g) in gc.iter().enumerate() {
                        slack -= partial_transpose(g, &[2, 2], &[1])? * c(kappa(s, r, n), 0.0);
                    }
                    if !psd(&slack) {
                        return Ok(false);
                    }
                }
            }
            lambda.iter().map(|l| trace(l).re).sum::<f64>()
        }
        DualCertificate::Full { lambda, gamma } => {
            let order = 4usize << (2 * n);
            if lambda.shape() != (order, order) || gamma.len() != outcomes || gamma.iter().any(|g| g.shape() != (order, order)) {
                return Ok(false);
            }
            if hermitian_defect(lambda) > VERIFY_TOL || !gamma.iter().all(psd) {
                return Ok(false);
            }
            let dims = vec![2; 2 + 2 * n];
            let phi = max_entangled(2)?;
            let mut anc = CMatrix::identity(1, 1);
            for _ in 0..n {
                anc = kron(&anc, &phi);
            }
            for (cc, g) in gamma.iter().enumerate() {
                let slack = lambda - kron(&m.projector(cc), &anc) * quarter - partial_transpose(g, &dims, &bob_qubits(n))?;
                if !psd(&slack) {
                    return Ok(false);
                }
            }
            trace(lambda).re
        }
    };
    Ok((bound - result.value).abs() <= VERIFY_TOL && (bound - result.dual_value).abs() <= VERIFY_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn kappa_table() {
        assert_eq!(kappa(0, 0, 1), 0.5);
        assert_eq!(kappa(0, 1, 1), -0.5);
        assert_eq!(kappa(1, 1, 1), 1.5);
        assert_eq!(kappa(0b10, 0b11, 2), -0.75);
    }

    #[test]
    fn embedding_round_trip() {
        let h = catalog::basis("EJM").unwrap().projector(2);
        assert!(max_abs(&(extract(&embed(&h)) - &h)) < 1e-15);
    }

    #[test]
    fn bsm_without_ebits_is_one_half() {
        let r = sdp_bound(&catalog::basis("BSM").unwrap(), 0).unwrap();
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.value - 0.5).abs() < 1e-6, "{}", r.value);
    }
}
