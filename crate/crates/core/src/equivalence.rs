//! Equivalence of measurements under local unitaries, relabelings, rephasings
//! and party permutations, plus the Bloch-vector invariants that separate classes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::MeasurementBasis;
use crate::error::{Error, Result};
use crate::linalg::{
    cis, dagger, expi_hermitian, hermitian_from_params, kron_all, partial_trace, polar_unitary, CMatrix,
};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::pauli::Pauli;
use crate::perm::PermWithPhases;

/// Fingerprint entries are rounded to this resolution.
pub const FINGERPRINT_RESOLUTION: f64 = 1e-6;

/// Reduced-state data of every column of a bipartite (or multipartite) basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlochReport {
    /// `tangles[j] = 2(1 − Tr ρ_A(j)²)`, bipartition between the first party and the rest.
    pub tangles: Vec<f64>,
    /// `bloch[p][j]`: Bloch vector of party `p` in column `j` (qubit parties only, empty otherwise).
    pub bloch: Vec<Vec<[f64; 3]>>,
    /// `mm[p][j][k] = d·Tr(ρ_p(j)ρ_p(k)) − 1`, the Bloch dot product for qubits.
    pub mm: Vec<Vec<Vec<f64>>>,
}

impl BlochReport {
    pub fn mm_a(&self) -> &Vec<Vec<f64>> {
        &self.mm[0]
    }

    pub fn mm_b(&self) -> &Vec<Vec<f64>> {
        &self.mm[1]
    }
}

/// Computes per-column reduced states and their overlaps.
pub fn bloch_report(m: &MeasurementBasis) -> Result<BlochReport> {
    if m.dims.len() < 2 {
        return Err(Error::Dimension("need at least two parties".into()));
    }
    let n = m.outcomes();
    let parties = m.dims.len();
    let mut reduced: Vec<Vec<CMatrix>> = vec![Vec::with_capacity(n); parties];
    for j in 0..n {
        let v = m.column(j);
        let rho = &v * v.adjoint();
        for (p, slot) in reduced.iter_mut().enumerate() {
            slot.push(partial_trace(&rho, &m.dims, &[p])?);
        }
    }
    let tangles = reduced[0].iter().map(|r| 2.0 * (1.0 - (r * r).trace().re)).collect();
    let paulis = [Pauli::X, Pauli::Y, Pauli::Z].map(|p| p.matrix());
    let bloch = reduced
        .iter()
        .zip(&m.dims)
        .map(|(rs, &d)| {
            if d != 2 {
                return Vec::new();
            }
            rs.iter()
                .map(|r| {
                    let mut v = [0.0; 3];
                    for (k, s) in paulis.iter().enumerate() {
                        v[k] = (r * s).trace().re;
                    }
                    v
                })
                .collect()
        })
        .collect();
    let mm = reduced
        .iter()
        .zip(&m.dims)
        .map(|(rs, &d)| {
            (0..n)
                .map(|j| (0..n).map(|k| d as f64 * (&rs[j] * &rs[k]).trace().re - 1.0).collect())
                .collect()
        })
        .collect();
    Ok(BlochReport { tangles, bloch, mm })
}

/// Local-unitary invariants: the tangle multiset and the unordered collection of
/// autocorrelation spectra, rounded to [`FINGERPRINT_RESOLUTION`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EquivalenceFingerprint {
    pub tangles: Vec<i64>,
    pub spectra: Vec<Vec<i64>>,
}

fn round(x: f64) -> i64 {
    (x / FINGERPRINT_RESOLUTION).round() as i64
}

impl EquivalenceFingerprint {
    pub fn tangles_f64(&self) -> Vec<f64> {
        self.tangles.iter().map(|&t| t as f64 * FINGERPRINT_RESOLUTION).collect()
    }

    pub fn spectra_f64(&self) -> Vec<Vec<f64>> {
        self.spectra
            .iter()
            .map(|s| s.iter().map(|&t| t as f64 * FINGERPRINT_RESOLUTION).collect())
            .collect()
    }
}

pub fn fingerprint(m: &MeasurementBasis) -> Result<EquivalenceFingerprint> {
    let rep = bloch_report(m)?;
    // With more than two parties the first-party tangle is not permutation
    // invariant, so every single-party purity enters the multiset.
    let mut tangles: Vec<i64> = if m.dims.len() == 2 {
        rep.tangles.iter().map(|&t| round(t)).collect()
    } else {
        let mut all = Vec::new();
        for (p, mmp) in rep.mm.iter().enumerate() {
            let d = m.dims[p] as f64;
            for (j, row) in mmp.iter().enumerate() {
                // purity = (mm_jj + 1)/d
                all.push(round(2.0 * (1.0 - (row[j] + 1.0) / d)));
            }
        }
        all
    };
    tangles.sort_unstable();
    let mut spectra: Vec<Vec<i64>> = rep
        .mm
        .iter()
        .map(|mmp| {
            let n = mmp.len();
            let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| mmp[i][j]);
            let mut ev: Vec<f64> = mat.symmetric_eigen().eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev.into_iter().map(round).collect()
        })
        .collect();
    spectra.sort();
    Ok(EquivalenceFingerprint { tangles, spectra })
}

/// Search budget for [`equivalent`].
#[derive(Debug, Clone, Copy)]
pub struct EquivalenceBudget {
    pub restarts: usize,
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for EquivalenceBudget {
    fn default() -> Self {
        EquivalenceBudget { restarts: 16, max_evals: 4000, seed: 7 }
    }
}

/// Explicit transformation with `m2 ≈ (⊗U_p)·S·m1·Q`.
#[derive(Debug, Clone)]
pub struct EquivalenceWitness {
    /// Local unitaries in the party order of `m2`.
    pub locals: Vec<CMatrix>,
    /// `party_order[k]` is the party of `m1` placed at position `k`.
    pub party_order: Vec<usize>,
    pub columns: PermWithPhases,
    pub distance: f64,
}

impl EquivalenceWitness {
    pub fn apply(&self, m1: &MeasurementBasis) -> CMatrix {
        let s = party_permutation(&m1.dims, &self.party_order);
        kron_all(&self.locals) * s * &m1.matrix * self.columns.to_matrix()
    }
}

#[derive(Debug, Clone)]
pub enum Equivalence {
    Yes(Box<EquivalenceWitness>),
    No,
    Unknown,
}

impl Equivalence {
    pub fn is_yes(&self) -> bool {
        matches!(self, Equivalence::Yes(_))
    }

    pub fn is_no(&self) -> bool {
        matches!(self, Equivalence::No)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Equivalence::Yes(_) => "yes",
            Equivalence::No => "no",
            Equivalence::Unknown => "unknown",
        }
    }
}

/// Unitary that moves party `order[k]` of a register with `dims` to position `k`.
pub fn party_permutation(dims: &[usize], order: &[usize]) -> CMatrix {
    let n: usize = dims.iter().product();
    let new_dims: Vec<usize> = order.iter().map(|&p| dims[p]).collect();
    let mut s = CMatrix::zeros(n, n);
    let mut digits = vec![0usize; dims.len()];
    for idx in 0..n {
        let mut r = idx;
        for p in (0..dims.len()).rev() {
            digits[p] = r % dims[p];
            r /= dims[p];
        }
        let mut out = 0;
        for (k, &p) in order.iter().enumerate() {
            out = out * new_dims[k] + digits[p];
        }
        s[(out, idx)] = crate::linalg::cr(1.0);
    }
    s
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Maximum-weight perfect matching (Hungarian algorithm); returns `rows[j]` for each column `j`.
pub fn max_weight_assignment(w: &[Vec<f64>]) -> Vec<usize> {
    let n = w.len();
    let big = w.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    // minimize cost = big - w, 1-indexed potentials
    let cost = |i: usize, j: usize| big - w[i][j];
    let inf = f64::INFINITY;
    let (mut u, mut v) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    let (mut p, mut way) = (vec![0usize; n + 1], vec![0usize; n + 1]);
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![0; n];
    for j in 1..=n {
        rows[j - 1] = p[j] - 1;
    }
    rows
}

/// Nearest permutation-with-phases to `h` in Frobenius norm, and that distance
/// (valid for unitary `h`).
pub fn nearest_perm_with_phases(h: &CMatrix) -> (PermWithPhases, f64) {
    let n = h.nrows();
    let w: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| h[(i, j)].norm()).collect()).collect();
    let rows = max_weight_assignment(&w);
    let mut total = 0.0;
    let phases = (0..n)
        .map(|j| {
            let z = h[(rows[j], j)];
            total += z.norm();
            if z.norm() > 0.0 { z / z.norm() } else { crate::linalg::cr(1.0) }
        })
        .collect();
    let dist = (2.0 * n as f64 - 2.0 * total).max(0.0).sqrt();
    (PermWithPhases { perm: rows, phases }, dist)
}

fn locals_from_params(dims: &[usize], p: &[f64]) -> Vec<CMatrix> {
    let mut off = 0;
    dims.iter()
        .map(|&d| {
            let k = d * d - 1;
            let mut full = vec![0.0];
            full.extend_from_slice(&p[off..off + k]);
            off += k;
            expi_hermitian(&hermitian_from_params(d, &full))
        })
        .collect()
}

/// Alternating polar refinement of the local unitaries with the column map re-fitted each sweep.
fn refine(
    dims: &[usize],
    sm1: &CMatrix,
    m2: &CMatrix,
    mut locals: Vec<CMatrix>,
    sweeps: usize,
) -> (Vec<CMatrix>, PermWithPhases, f64) {
    let eye = |d: usize| CMatrix::identity(d, d);
    let mut best = {
        let h = dagger(&(kron_all(&locals) * sm1)) * m2;
        let (q, d) = nearest_perm_with_phases(&h);
        (locals.clone(), q, d)
    };
    for _ in 0..sweeps {
        let q = best.1.to_matrix();
        let target = m2 * dagger(&q);
        let k = sm1 * dagger(&target);
        for p in 0..dims.len() {
            let others: Vec<CMatrix> =
                (0..dims.len()).map(|r| if r == p { eye(dims[r]) } else { locals[r].clone() }).collect();
            let w = kron_all(&others) * &k;
            let Ok(r) = partial_trace(&w, dims, &[p]) else { continue };
            if let Ok(u) = polar_unitary(&r) {
                locals[p] = dagger(&u);
            }
        }
        let h = dagger(&(kron_all(&locals) * sm1)) * m2;
        let (q, d) = nearest_perm_with_phases(&h);
        if d < best.2 - 1e-15 {
            best = (locals.clone(), q, d);
        } else {
            break;
        }
    }
    best
}

/// Decides whether two measurements are equivalent.
///
/// "No" comes from differing fingerprints, "yes" from an explicit witness within
/// `1e-6` in Frobenius norm, and "unknown" when the search fails.
pub fn equivalent(m1: &MeasurementBasis, m2: &MeasurementBasis, budget: EquivalenceBudget) -> Equivalence {
    if m1.order() != m2.order() {
        return Equivalence::No;
    }
    let (Ok(f1), Ok(f2)) = (fingerprint(m1), fingerprint(m2)) else {
        return Equivalence::Unknown;
    };
    if f1 != f2 {
        return Equivalence::No;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let nparams: usize = m2.dims.iter().map(|d| d * d - 1).sum();
    let mut best: Option<EquivalenceWitness> = None;
    for order in permutations(m1.dims.len()) {
        let new_dims: Vec<usize> = order.iter().map(|&p| m1.dims[p]).collect();
        if new_dims != m2.dims {
            continue;
        }
        let sm1 = party_permutation(&m1.dims, &order) * &m1.matrix;
        for restart in 0..budget.restarts {
            let x0: Vec<f64> = if restart == 0 {
                vec![0.0; nparams]
            } else {
                (0..nparams).map(|_| StandardNormal.sample(&mut rng)).collect()
            };
            let objective = |x: &[f64]| {
                let l = kron_all(&locals_from_params(&m2.dims, x));
                let h = dagger(&(l * &sm1)) * &m2.matrix;
                nearest_perm_with_phases(&h).1
            };
            let opts = NelderMeadOptions { scale: 0.5, diameter_tol: 1e-9, value_tol: 0.0, max_evals: budget.max_evals };
            let min = nelder_mead(objective, &x0, opts);
            let (locals, q, dist) = refine(&m2.dims, &sm1, &m2.matrix, locals_from_params(&m2.dims, &min.x), 500);
            if best.as_ref().is_none_or(|b| dist < b.distance) {
                best = Some(EquivalenceWitness { locals, party_order: order.clone(), columns: q, distance: dist });
            }
            if dist < 1e-9 {
                break;
            }
        }
        if best.as_ref().is_some_and(|b| b.distance < 1e-9) {
            break;
        }
    }
    match best {
        Some(w) if w.distance < 1e-6 => {
            // re-measure the witness from scratch
            let recon = w.apply(m1);
            let err = (recon - &m2.matrix).norm();
            if err < 1e-6 {
                Equivalence::Yes(Box::new(EquivalenceWitness { distance: err, ..w }))
            } else {
                Equivalence::Unknown
            }
        }
        _ => Equivalence::Unknown,
    }
}

/// Applies a random equivalence move to `m` (local unitaries, column permutation
/// and phases, party permutation).
pub fn random_equivalent<R: rand::Rng + ?Sized>(m: &MeasurementBasis, rng: &mut R) -> MeasurementBasis {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..m.dims.len()).collect();
    order.shuffle(rng);
    let dims: Vec<usize> = order.iter().map(|&p| m.dims[p]).collect();
    let locals: Vec<CMatrix> = dims.iter().map(|&d| crate::linalg::haar_unitary(d, rng)).collect();
    let n = m.outcomes();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let phases = (0..n).map(|_| cis(rng.random::<f64>() * std::f64::consts::TAU)).collect();
    let q = PermWithPhases { perm, phases };
    let mat = kron_all(&locals) * party_permutation(&m.dims, &order) * &m.matrix * q.to_matrix();
    MeasurementBasis { matrix: mat, dims, name: m.name.clone() }
}

/// Catalog class whose fingerprint matches, if any.
pub fn nearest_class(m: &MeasurementBasis) -> Option<&'static str> {
    let f = fingerprint(m).ok()?;
    crate::catalog::NAMES
        .iter()
        .copied()
        .find(|name| crate::catalog::basis(name).ok().and_then(|b| fingerprint(&b).ok()).as_ref() == Some(&f))
}
