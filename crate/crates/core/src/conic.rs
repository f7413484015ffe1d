//! Real block-diagonal semidefinite programs in primal standard form and a
//! primal–dual interior-point solver.
//!
//! Primal: maximize `⟨C, X⟩` subject to `⟨A_i, X⟩ = b_i`, `X ⪰ 0`.
//! Dual:   minimize `bᵀy` subject to `Z = Σ y_i A_i − C ⪰ 0`.
//!
//! The solver follows the HKM search direction with Mehrotra's
//! predictor–corrector and an infeasible start.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One equality row: a symmetric matrix on each block it touches.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub terms: Vec<(usize, DMatrix<f64>)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub blocks: Vec<usize>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(usize, DMatrix<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: Vec<DMatrix<f64>>,
    pub y: DVector<f64>,
    pub z: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    pub status: SolverStatus,
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions { max_iterations: 120, tolerance: 1e-9 }
    }
}

/// Sparse triplet `(block, row, col, value)` with `row ≤ col`.
pub type Triplet = (usize, usize, usize, f64);

/// JSON interchange format of a conic problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConicDump {
    pub sense: String,
    pub psd_blocks: Vec<usize>,
    pub objective: Vec<Triplet>,
    pub equalities: Vec<EqualityDump>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqualityDump {
    pub entries: Vec<Triplet>,
    pub rhs: f64,
}

fn triplets(terms: &[(usize, DMatrix<f64>)]) -> Vec<Triplet> {
    let mut out = Vec::new();
    for (b, m) in terms {
        for j in 0..m.ncols() {
            for i in 0..=j {
                if m[(i, j)].abs() > 0.0 {
                    out.push((*b, i, j, m[(i, j)]));
                }
            }
        }
    }
    out
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn inverse_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Cholesky::new(m.clone()).map(|c| c.inverse()).ok_or_else(|| Error::Numerical("iterate lost definiteness".into()))
}

/// Largest `α` with `X + α·dX ⪰ 0`, capped at `cap`.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>, cap: f64) -> f64 {
    let Some(ch) = Cholesky::new(x.clone()) else { return 0.0 };
    let l = ch.l();
    let Some(li) = l.clone().try_inverse() else { return 0.0 };
    let s = sym(&(&li * dx * li.transpose()));
    let lmin = SymmetricEigen::new(s).eigenvalues.min();
    if lmin >= 0.0 {
        cap
    } else {
        cap.min(-1.0 / lmin)
    }
}

impl ConicProblem {
    pub fn new(blocks: Vec<usize>) -> Self {
        ConicProblem { blocks, constraints: Vec::new(), objective: Vec::new() }
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn dump(&self) -> ConicDump {
        ConicDump {
            sense: "maximize".into(),
            psd_blocks: self.blocks.clone(),
            objective: triplets(&self.objective),
            equalities: self
                .constraints
                .iter()
                .map(|c| EqualityDump { entries: triplets(&c.terms), rhs: c.rhs })
                .collect(),
        }
    }

    fn apply(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.constraints.len(),
            self.constraints.iter().map(|c| c.terms.iter().map(|(b, a)| inner(a, &x[*b])).sum()),
        )
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (c, &yi) in self.constraints.iter().zip(y.iter()) {
            for (b, a) in &c.terms {
                out[*b] += a * yi;
            }
        }
        out
    }

    fn objective_blocks(&self) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (b, m) in &self.objective {
            out[*b] += m;
        }
        out
    }

    fn rhs(&self) -> DVector<f64> {
        DVector::from_iterator(self.constraints.len(), self.constraints.iter().map(|c| c.rhs))
    }

    /// Constraint indices and matrices touching each block.
    fn by_block(&self) -> Vec<Vec<(usize, &DMatrix<f64>)>> {
        let mut out = vec![Vec::new(); self.blocks.len()];
        for (i, c) in self.constraints.iter().enumerate() {
            for (b, a) in &c.terms {
                out[*b].push((i, a));
            }
        }
        out
    }

    pub fn solve(&self, opts: IpmOptions) -> Result<ConicSolution> {
        let m = self.constraints.len();
        let nb = self.blocks.len();
        let dim: usize = self.blocks.iter().sum();
        let c = self.objective_blocks();
        let b = self.rhs();
        let by_block = self.by_block();
        let mut x: Vec<DMatrix<f64>> = self.blocks.iter().map(|&n| DMatrix::identity(n, n)).collect();
        let mut z = x.clone();
        let mut y = DVector::zeros(m);
        let bnorm = 1.0 + b.norm();
        let cnorm = 1.0 + c.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
        let mut status = SolverStatus::MaxIterations;
        let mut iterations = 0;
        for it in 0..opts.max_iterations {
            iterations = it;
            let ax = self.apply(&x);
            let rp = &b - &ax;
            let aty = self.adjoint(&y);
            let rd: Vec<DMatrix<f64>> = (0..nb).map(|k| &aty[k] - &c[k] - &z[k]).collect();
            let pobj: f64 = (0..nb).map(|k| inner(&c[k], &x[k])).sum();
            let dobj = b.dot(&y);
            let gap: f64 = (0..nb).map(|k| inner(&x[k], &z[k])).sum();
            let mu = gap / dim as f64;
            let pinf = rp.norm() / bnorm;
            let dinf = rd.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt() / cnorm;
            let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            if pinf < opts.tolerance && dinf < opts.tolerance && rel_gap < opts.tolerance && gap < 10.0 * opts.tolerance * (1.0 + pobj.abs()) {
                status = SolverStatus::Optimal;
                break;
            }
            // fallback when the iterate is already close but the next step breaks down
            let loose = opts.tolerance.max(1e-7);
            let acceptable = pinf < loose && dinf < loose && rel_gap < loose;
            let failed = if acceptable { SolverStatus::Optimal } else { SolverStatus::NumericalFailure };
            let zinv: Vec<DMatrix<f64>> = match z.iter().map(inverse_spd).collect::<Result<Vec<_>>>() {
                Ok(v) => v,
                Err(_) => {
                    status = failed;
                    break;
                }
            };
            // Schur complement M_ij = Tr(A_i X A_j Z⁻¹)
            let mut schur = DMatrix::<f64>::zeros(m, m);
            for k in 0..nb {
                for &(i, ai) in &by_block[k] {
                    let g = &x[k] * ai * &zinv[k];
                    for &(j, aj) in &by_block[k] {
                        schur[(i, j)] += inner(aj, &g);
                    }
                }
            }
            let schur = sym(&schur);
            let chol = match Cholesky::new(schur.clone()) {
                Some(ch) => ch,
                None => {
                    let scale = 1.0 + schur.diagonal().amax();
                    let regularized = [1e-14, 1e-12, 1e-10]
                        .iter()
                        .find_map(|r| Cholesky::new(&schur + DMatrix::identity(m, m) * (r * scale)));
                    match regularized {
                        Some(ch) => ch,
                        None => {
                            status = failed;
                            break;
                        }
                    }
                }
            };
            // direction for a complementarity target R_c: dX = (R_c − X dZ) Z⁻¹, dZ = Aᵀdy + R_d
            let direction = |rc: &[DMatrix<f64>]| {
                let tmp: Vec<DMatrix<f64>> = (0..nb).map(|k| (&rc[k] - &x[k] * &rd[k]) * &zinv[k]).collect();
                let rhs = self.apply(&tmp) - &rp;
                let dy = chol.solve(&rhs);
                let atdy = self.adjoint(&dy);
                let dz: Vec<DMatrix<f64>> = (0..nb).map(|k| &atdy[k] + &rd[k]).collect();
                let dx: Vec<DMatrix<f64>> = (0..nb).map(|k| sym(&((&rc[k] - &x[k] * &dz[k]) * &zinv[k]))).collect();
                (dx, dy, dz)
            };
            let xz: Vec<DMatrix<f64>> = (0..nb).map(|k| &x[k] * &z[k]).collect();
            let rc_aff: Vec<DMatrix<f64>> = xz.iter().map(|m| -m).collect();
            let (dx_a, _, dz_a) = direction(&rc_aff);
            let ap = (0..nb).map(|k| max_step(&x[k], &dx_a[k], 1.0)).fold(1.0, f64::min);
            let ad = (0..nb).map(|k| max_step(&z[k], &dz_a[k], 1.0)).fold(1.0, f64::min);
            let gap_aff: f64 = (0..nb).map(|k| inner(&(&x[k] + &dx_a[k] * ap), &(&z[k] + &dz_a[k] * ad))).sum();
            let sigma = (gap_aff / gap.max(1e-300)).clamp(0.0, 1.0).powi(3);
            let rc: Vec<DMatrix<f64>> = (0..nb)
                .map(|k| {
                    let n = self.blocks[k];
                    DMatrix::identity(n, n) * (sigma * mu) - &xz[k] - &dx_a[k] * &dz_a[k]
                })
                .collect();
            let (dx, dy, dz) = direction(&rc);
            let ap = 0.95 * (0..nb).map(|k| max_step(&x[k], &dx[k], 1.0 / 0.95)).fold(1.0 / 0.95, f64::min);
            let ad = 0.95 * (0..nb).map(|k| max_step(&z[k], &dz[k], 1.0 / 0.95)).fold(1.0 / 0.95, f64::min);
            for k in 0..nb {
                x[k] += &dx[k] * ap;
                z[k] += &dz[k] * ad;
            }
            y += dy * ad;
        }
        let rp = &b - self.apply(&x);
        let aty = self.adjoint(&y);
        let dinf = (0..nb).map(|k| (&aty[k] - &c[k] - &z[k]).norm_squared()).sum::<f64>().sqrt() / cnorm;
        Ok(ConicSolution {
            primal_objective: (0..nb).map(|k| inner(&c[k], &x[k])).sum(),
            dual_objective: b.dot(&y),
            primal_infeasibility: rp.norm() / bnorm,
            dual_infeasibility: dinf,
            x,
            y,
            z,
            iterations,
            status,
        })
    }
}
