//! Finite ping-pong teleportation: raw localizability checks and certificates.
//!
//! Conventions: a label is a list of Pauli indices (0..4 for 𝟙, X, Y, Z), or a
//! pair of Weyl exponents for qudits. The distortion matrices are
//!
//! | scenario, level | label | matrix |
//! |---|---|---|
//! | bipartite 1 | `[b]` | `M†(𝟙⊗σ_b)M` |
//! | bipartite 2 | `[a₁,a₂,b]` | `ℳ_b†(σ_{a₁}⊗σ_{a₂})ℳ_b` |
//! | bipartite 3 | `[a₁,a₂,b₁,b₂,b]` | `ℳ_{a,b}†(σ_{b₁}⊗σ_{b₂})ℳ_{a,b}` |
//! | qudit 1 | `[x,z]` | `M†(𝟙⊗X^x Z^z)M` |
//! | tripartite 1 | `[b,c]` | `M†(𝟙⊗σ_b⊗σ_c)M` |
//! | tripartite 2 | `[b₀,c₀,s₁,s₂,s₃]` | `ℳ_{b₀c₀}(σ_{s₁}⊗σ_{s₂}⊗σ_{s₃})ℳ_{b₀c₀}†` |
//!
//! with `ℳ_b = M†(𝟙⊗σ_b)M` and `ℳ_{a,b} = ℳ_b†(σ_{a₁}⊗σ_{a₂})ℳ_b`. In the
//! tripartite second level the Pauli `σ_{s_i}` stands for the product `σ_{b_i}σ_{a_i}`
//! of the two teleportation distortions, which fixes it up to a phase.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::MeasurementBasis;
use crate::equivalence::party_permutation;
use crate::error::{Error, Result};
use crate::linalg::{
    c, cis, cr, dagger, expi_hermitian, hermitian_from_params, kron, kron_all, phase_diag, CMatrix, Complex64,
    MatrixJson, PERM_TOL,
};
use crate::optimize::{levenberg_marquardt, nelder_mead, NelderMeadOptions};
use crate::pauli::{weyl, Pauli};
use crate::perm::{as_perm_with_phases, PermJson, PermWithPhases};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    Bipartite,
    Qudit(usize),
    Tripartite,
}

impl Scenario {
    pub fn dims(self) -> Vec<usize> {
        match self {
            Scenario::Bipartite => vec![2, 2],
            Scenario::Qudit(d) => vec![d, d],
            Scenario::Tripartite => vec![2, 2, 2],
        }
    }

    pub fn max_level(self) -> usize {
        match self {
            Scenario::Bipartite => 3,
            Scenario::Qudit(_) => 1,
            Scenario::Tripartite => 2,
        }
    }

    /// Ebits consumed by the scheme at `level`.
    pub fn cost(self, level: usize) -> Option<usize> {
        match (self, level) {
            (Scenario::Bipartite, 1) | (Scenario::Qudit(_), 1) => Some(1),
            (Scenario::Bipartite, 2) => Some(3),
            (Scenario::Bipartite, 3) => Some(9),
            (Scenario::Tripartite, 1) => Some(2),
            (Scenario::Tripartite, 2) => Some(17),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Result<Scenario> {
        match s {
            "bipartite" => Ok(Scenario::Bipartite),
            "tripartite" => Ok(Scenario::Tripartite),
            _ => match s.strip_prefix("qudit:").and_then(|d| d.parse().ok()) {
                Some(d) if d >= 2 => Ok(Scenario::Qudit(d)),
                _ => Err(Error::InvalidArgument(format!("unknown scenario {s}"))),
            },
        }
    }

    pub fn name(self) -> String {
        match self {
            Scenario::Bipartite => "bipartite".into(),
            Scenario::Qudit(d) => format!("qudit:{d}"),
            Scenario::Tripartite => "tripartite".into(),
        }
    }

    fn check_supported(self, level: usize) -> Result<()> {
        if self.cost(level).is_none() {
            return Err(Error::Unsupported(format!("level {level} for {} measurements", self.name())));
        }
        Ok(())
    }
}

pub type DistortionLabel = Vec<usize>;

fn sigma(i: usize) -> CMatrix {
    Pauli::from_index(i).matrix()
}

fn sigmas(idx: &[usize]) -> CMatrix {
    kron_all(&idx.iter().map(|&i| sigma(i)).collect::<Vec<_>>())
}

/// `Π_k σ_{s_k}` on a register of `n` qubits, for the string encoded in base 4.
fn string_labels(n: usize) -> Vec<Vec<usize>> {
    (0..4usize.pow(n as u32))
        .map(|mut v| {
            let mut s = vec![0; n];
            for k in (0..n).rev() {
                s[k] = v % 4;
                v /= 4;
            }
            s
        })
        .collect()
}

/// `ℳ_b` for each bipartite Bob distortion `b`.
fn bob_conjugates(m: &CMatrix) -> Vec<CMatrix> {
    let md = dagger(m);
    (0..4).map(|b| &md * kron(&CMatrix::identity(2, 2), &sigma(b)) * m).collect()
}

/// Every distortion matrix of a level, computed directly.
pub fn distortion_matrices(m: &CMatrix, scenario: Scenario, level: usize) -> Result<Vec<(DistortionLabel, CMatrix)>> {
    scenario.check_supported(level)?;
    let n: usize = scenario.dims().iter().product();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension(format!("expected a {n}x{n} matrix for {}", scenario.name())));
    }
    let md = dagger(m);
    let mut out = Vec::new();
    match (scenario, level) {
        (Scenario::Bipartite, 1) => {
            for (b, mb) in bob_conjugates(m).into_iter().enumerate() {
                out.push((vec![b], mb));
            }
        }
        (Scenario::Bipartite, 2) => {
            let mbs = bob_conjugates(m);
            for a in string_labels(2) {
                let s = sigmas(&a);
                for (b, mb) in mbs.iter().enumerate() {
                    out.push((vec![a[0], a[1], b], dagger(mb) * &s * mb));
                }
            }
        }
        (Scenario::Bipartite, 3) => {
            let mbs = bob_conjugates(m);
            let strings = string_labels(2);
            let ss: Vec<CMatrix> = strings.iter().map(|s| sigmas(s)).collect();
            for (ia, a) in strings.iter().enumerate() {
                for (b, mb) in mbs.iter().enumerate() {
                    let mab = dagger(mb) * &ss[ia] * mb;
                    let mabd = dagger(&mab);
                    for (ib, bb) in strings.iter().enumerate() {
                        out.push((vec![a[0], a[1], bb[0], bb[1], b], &mabd * &ss[ib] * &mab));
                    }
                }
            }
        }
        (Scenario::Qudit(d), 1) => {
            for x in 0..d {
                for z in 0..d {
                    let op = kron(&CMatrix::identity(d, d), &weyl(d, x, z));
                    out.push((vec![x, z], &md * op * m));
                }
            }
        }
        (Scenario::Tripartite, 1) => {
            for bc in string_labels(2) {
                let op = kron(&CMatrix::identity(2, 2), &sigmas(&bc));
                out.push((bc.clone(), &md * op * m));
            }
        }
        (Scenario::Tripartite, 2) => {
            let strings = string_labels(3);
            let ss: Vec<CMatrix> = strings.iter().map(|s| sigmas(s)).collect();
            for bc in string_labels(2) {
                let mbc = &md * kron(&CMatrix::identity(2, 2), &sigmas(&bc)) * m;
                let mbcd = dagger(&mbc);
                for (is, s) in strings.iter().enumerate() {
                    let mut label = bc.clone();
                    label.extend_from_slice(s);
                    out.push((label, &mbc * &ss[is] * &mbcd));
                }
            }
        }
        _ => unreachable!("checked above"),
    }
    Ok(out)
}

/// Recognized permutations with phases for every label of a level, plus the
/// witnessing transformation when the check ran on a transformed representative.
#[derive(Debug, Clone)]
pub struct LocalizabilityCertificate {
    pub scenario: Scenario,
    pub level: usize,
    pub cost: usize,
    pub entries: BTreeMap<DistortionLabel, PermWithPhases>,
    /// Set by [`check_class`]: the representative that passed the raw check.
    pub representative: Option<ClassWitness>,
}

/// `representative = (⊗U_p)·S·M·Φ` for the party reordering `S`.
#[derive(Debug, Clone)]
pub struct ClassWitness {
    pub locals: Vec<CMatrix>,
    pub party_order: Vec<usize>,
    pub column_phases: Vec<Complex64>,
    pub matrix: CMatrix,
}

impl ClassWitness {
    pub fn apply(&self, m: &MeasurementBasis) -> CMatrix {
        kron_all(&self.locals)
            * party_permutation(&m.dims, &self.party_order)
            * &m.matrix
            * CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(self.column_phases.clone()))
    }
}

impl LocalizabilityCertificate {
    /// Outcome `c` of the target measurement given the computational-basis result
    /// read off in the branch `label`.
    pub fn decode(&self, label: &[usize], observed: usize) -> Option<usize> {
        self.entries.get(label).map(|p| p.preimage(observed))
    }

    /// The matrix the raw check was run on.
    pub fn checked_matrix<'a>(&'a self, m: &'a MeasurementBasis) -> &'a CMatrix {
        match &self.representative {
            Some(w) => &w.matrix,
            None => &m.matrix,
        }
    }

    /// Recomputes every distortion matrix from scratch and compares with the stored entries.
    pub fn verify(&self, m: &MeasurementBasis, tol: f64) -> bool {
        let target = match &self.representative {
            Some(w) => {
                let again = w.apply(m);
                if (&again - &w.matrix).norm() > 1e-8 {
                    return false;
                }
                again
            }
            None => m.matrix.clone(),
        };
        let Ok(all) = distortion_matrices(&target, self.scenario, self.level) else {
            return false;
        };
        all.len() == self.entries.len()
            && all.iter().all(|(label, mat)| match self.entries.get(label) {
                Some(p) => p.is_bijection() && p.distance_to(mat) <= tol && as_perm_with_phases(mat, tol).is_some(),
                None => false,
            })
    }

    pub fn to_json(&self) -> CertificateJson {
        CertificateJson {
            scenario: self.scenario.name(),
            level: self.level,
            cost: self.cost,
            entries: self
                .entries
                .iter()
                .map(|(label, p)| CertificateEntryJson {
                    label: label.clone(),
                    perm: PermJson::from(p),
                    decode: (0..p.dim()).map(|o| p.preimage(o)).collect(),
                })
                .collect(),
            representative: self.representative.as_ref().map(|w| MatrixJson::from_matrix(&w.matrix)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateEntryJson {
    pub label: Vec<usize>,
    pub perm: PermJson,
    /// `decode[observed] = c`.
    pub decode: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateJson {
    pub scenario: String,
    pub level: usize,
    pub cost: usize,
    pub entries: Vec<CertificateEntryJson>,
    pub representative: Option<MatrixJson>,
}

fn scalar_times(z: Complex64, p: &PermWithPhases) -> PermWithPhases {
    PermWithPhases { perm: p.perm.clone(), phases: p.phases.iter().map(|w| w * z).collect() }
}

/// Conjugates of `σ_s` for every qubit string `s`, from the conjugates of the
/// single-site generators `X_k` and `Z_k` (index `2k` and `2k+1` of `gens`).
///
/// Uses `σ_Y = i σ_X σ_Z` per site; conjugation is multiplicative, so the result
/// is a permutation with phases whenever the generators are.
fn close_qubit_strings(gens: &[PermWithPhases], n: usize) -> BTreeMap<Vec<usize>, PermWithPhases> {
    let dim = gens[0].dim();
    let mut out = BTreeMap::new();
    for s in string_labels(n) {
        let mut p = PermWithPhases::identity(dim);
        let mut phase = cr(1.0);
        for (k, &site) in s.iter().enumerate() {
            let (x, z) = Pauli::from_index(site).bits();
            if x == 1 {
                p = p.compose(&gens[2 * k]);
            }
            if z == 1 {
                p = p.compose(&gens[2 * k + 1]);
            }
            if x == 1 && z == 1 {
                phase *= c(0.0, 1.0);
            }
        }
        out.insert(s, scalar_times(phase, &p));
    }
    out
}

fn recognize_all(mats: &[CMatrix], tol: f64) -> Option<Vec<PermWithPhases>> {
    mats.iter().map(|m| as_perm_with_phases(m, tol)).collect()
}

fn require(m: &MeasurementBasis, dims: &[usize]) -> bool {
    m.dims == dims
}

/// Level 1: `M†(𝟙⊗σ_b)M` is a permutation with phases for `b = X, Z`; `Y` follows.
pub fn check_level1(m: &MeasurementBasis, tol: f64) -> Option<LocalizabilityCertificate> {
    if !require(m, &[2, 2]) {
        return None;
    }
    let mb = bob_conjugates(&m.matrix);
    let gens = recognize_all(&[mb[1].clone(), mb[3].clone()], tol)?;
    let strings = close_qubit_strings(&[gens[0].clone(), gens[1].clone()], 1);
    let entries = strings.into_iter().map(|(s, p)| (vec![s[0]], p)).collect();
    Some(LocalizabilityCertificate { scenario: Scenario::Bipartite, level: 1, cost: 1, entries, representative: None })
}

/// Level 2: `ℳ_b†(σ_{a₁}⊗σ_{a₂})ℳ_b` for every `b` and the four single-site generators.
pub fn check_level2(m: &MeasurementBasis, tol: f64) -> Option<LocalizabilityCertificate> {
    if !require(m, &[2, 2]) {
        return None;
    }
    let mbs = bob_conjugates(&m.matrix);
    let gen_ops: Vec<CMatrix> = [[1, 0], [3, 0], [0, 1], [0, 3]].iter().map(|s| sigmas(s)).collect();
    let mut entries = BTreeMap::new();
    for (b, mb) in mbs.iter().enumerate() {
        let mats: Vec<CMatrix> = gen_ops.iter().map(|s| dagger(mb) * s * mb).collect();
        let gens = recognize_all(&mats, tol)?;
        for (a, p) in close_qubit_strings(&gens, 2) {
            entries.insert(vec![a[0], a[1], b], p);
        }
    }
    Some(LocalizabilityCertificate { scenario: Scenario::Bipartite, level: 2, cost: 3, entries, representative: None })
}

/// Level 3: `ℳ_{a,b}†(σ_{b₁}⊗σ_{b₂})ℳ_{a,b}` for every `(a, b)` and the four generators.
pub fn check_level3(m: &MeasurementBasis, tol: f64) -> Option<LocalizabilityCertificate> {
    if !require(m, &[2, 2]) {
        return None;
    }
    let mbs = bob_conjugates(&m.matrix);
    let gen_ops: Vec<CMatrix> = [[1, 0], [3, 0], [0, 1], [0, 3]].iter().map(|s| sigmas(s)).collect();
    let mut entries = BTreeMap::new();
    for a in string_labels(2) {
        let sa = sigmas(&a);
        for (b, mb) in mbs.iter().enumerate() {
            let mab = dagger(mb) * &sa * mb;
            let mats: Vec<CMatrix> = gen_ops.iter().map(|s| dagger(&mab) * s * &mab).collect();
            let gens = recognize_all(&mats, tol)?;
            for (s, p) in close_qubit_strings(&gens, 2) {
                entries.insert(vec![a[0], a[1], s[0], s[1], b], p);
            }
        }
    }
    Some(LocalizabilityCertificate { scenario: Scenario::Bipartite, level: 3, cost: 9, entries, representative: None })
}

/// Qudit level 1: `M†(𝟙⊗X_d^{x}Z_d^{z})M` from the generators `(1,0)` and `(0,1)`.
pub fn check_level1_qudit(m: &MeasurementBasis, d: usize, tol: f64) -> Option<LocalizabilityCertificate> {
    if !require(m, &[d, d]) {
        return None;
    }
    let md = dagger(&m.matrix);
    let id = CMatrix::identity(d, d);
    let px = as_perm_with_phases(&(&md * kron(&id, &weyl(d, 1, 0)) * &m.matrix), tol)?;
    let pz = as_perm_with_phases(&(&md * kron(&id, &weyl(d, 0, 1)) * &m.matrix), tol)?;
    let mut entries = BTreeMap::new();
    let mut xp = PermWithPhases::identity(d * d);
    for x in 0..d {
        let mut p = xp.clone();
        for z in 0..d {
            entries.insert(vec![x, z], p.clone());
            p = p.compose(&pz);
        }
        xp = xp.compose(&px);
    }
    Some(LocalizabilityCertificate { scenario: Scenario::Qudit(d), level: 1, cost: 1, entries, representative: None })
}

/// Three qubits: level 1 (two ebits) or level 2 (17 ebits).
pub fn check_tripartite(m: &MeasurementBasis, level: usize, tol: f64) -> Option<LocalizabilityCertificate> {
    if !require(m, &[2, 2, 2]) {
        return None;
    }
    let md = dagger(&m.matrix);
    let id = CMatrix::identity(2, 2);
    // generators X_B, Z_B, X_C, Z_C on Bob's and Cindy's qubits
    let gen_bc = [[1, 0], [3, 0], [0, 1], [0, 3]];
    match level {
        1 => {
            let mats: Vec<CMatrix> =
                gen_bc.iter().map(|s| &md * kron(&id, &sigmas(s)) * &m.matrix).collect();
            let gens = recognize_all(&mats, tol)?;
            let entries = close_qubit_strings(&gens, 2);
            Some(LocalizabilityCertificate { scenario: Scenario::Tripartite, level: 1, cost: 2, entries, representative: None })
        }
        2 => {
            let gen3: Vec<CMatrix> =
                [[1, 0, 0], [3, 0, 0], [0, 1, 0], [0, 3, 0], [0, 0, 1], [0, 0, 3]].iter().map(|s| sigmas(s)).collect();
            let mut entries = BTreeMap::new();
            for bc in string_labels(2) {
                let mbc = &md * kron(&id, &sigmas(&bc)) * &m.matrix;
                let mbcd = dagger(&mbc);
                let mats: Vec<CMatrix> = gen3.iter().map(|s| &mbc * s * &mbcd).collect();
                let gens = recognize_all(&mats, tol)?;
                for (s, p) in close_qubit_strings(&gens, 3) {
                    let mut label = bc.clone();
                    label.extend_from_slice(&s);
                    entries.insert(label, p);
                }
            }
            Some(LocalizabilityCertificate { scenario: Scenario::Tripartite, level: 2, cost: 17, entries, representative: None })
        }
        _ => None,
    }
}

/// Dispatches to the raw checker for a scenario and level.
pub fn check_raw(m: &MeasurementBasis, scenario: Scenario, level: usize, tol: f64) -> Option<LocalizabilityCertificate> {
    match (scenario, level) {
        (Scenario::Bipartite, 1) => check_level1(m, tol),
        (Scenario::Bipartite, 2) => check_level2(m, tol),
        (Scenario::Bipartite, 3) => check_level3(m, tol),
        (Scenario::Qudit(d), 1) => check_level1_qudit(m, d, tol),
        (Scenario::Tripartite, l) => check_tripartite(m, l, tol),
        _ => None,
    }
}

/// Search budget for [`check_class`].
#[derive(Debug, Clone, Copy)]
pub struct ClassBudget {
    pub restarts: usize,
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for ClassBudget {
    fn default() -> Self {
        ClassBudget { restarts: 50, max_evals: 6000, seed: 11 }
    }
}

struct ClassChart {
    dims: Vec<usize>,
    order: Vec<usize>,
    phases: bool,
}

impl ClassChart {
    fn nparams(&self) -> usize {
        let locals: usize = self.dims[1..].iter().map(|d| d * d - 1).sum();
        let n: usize = self.dims.iter().product();
        locals + if self.phases { n - 1 } else { 0 }
    }

    fn witness(&self, m: &MeasurementBasis, x: &[f64]) -> ClassWitness {
        let mut off = 0;
        let mut locals = vec![CMatrix::identity(self.dims[0], self.dims[0])];
        for &d in &self.dims[1..] {
            let k = d * d - 1;
            let mut full = vec![0.0];
            full.extend_from_slice(&x[off..off + k]);
            off += k;
            locals.push(expi_hermitian(&hermitian_from_params(d, &full)));
        }
        let n: usize = self.dims.iter().product();
        let column_phases: Vec<Complex64> = if self.phases {
            std::iter::once(cr(1.0)).chain(x[off..off + n - 1].iter().map(|&t| cis(t))).collect()
        } else {
            vec![cr(1.0); n]
        };
        let mut w = ClassWitness { locals, party_order: self.order.clone(), column_phases, matrix: CMatrix::zeros(0, 0) };
        w.matrix = w.apply(m);
        w
    }
}

/// Searches for an equivalent representative that passes the raw check.
///
/// The raw equations are invariant under local unitaries on the first party and,
/// at level 1, under column relabelings and phases; the search therefore runs
/// over local unitaries on the remaining parties, party orderings and (for
/// levels above 1, where column phases matter) column phases.
pub fn check_class(
    m: &MeasurementBasis,
    scenario: Scenario,
    level: usize,
    budget: ClassBudget,
) -> Option<LocalizabilityCertificate> {
    if scenario.check_supported(level).is_err() || m.dims != scenario.dims() {
        return None;
    }
    if let Some(cert) = check_raw(m, scenario, level, PERM_TOL) {
        return Some(cert);
    }
    let orders: Vec<Vec<usize>> = match m.dims.len() {
        2 => vec![vec![0, 1], vec![1, 0]],
        _ => vec![vec![0, 1, 2], vec![1, 0, 2], vec![2, 1, 0], vec![0, 2, 1], vec![1, 2, 0], vec![2, 0, 1]],
    };
    let charts: Vec<ClassChart> = orders
        .into_iter()
        .map(|order| ClassChart { dims: m.dims.clone(), order, phases: level >= 2 })
        .collect();
    let jobs: Vec<(usize, usize)> =
        (0..budget.restarts).flat_map(|r| (0..charts.len()).map(move |c| (r, c))).collect();
    let found = jobs.par_iter().find_map_first(|&(r, ci)| {
        let chart = &charts[ci];
        let mut rng = ChaCha8Rng::seed_from_u64(budget.seed ^ ((r as u64) << 8) ^ ci as u64);
        let x0: Vec<f64> = (0..chart.nparams()).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 2.0 * z }).collect();
        let f = |x: &[f64]| {
            crate::heuristic::cost_matrix(&chart.witness(m, x).matrix, scenario, level).map(|c| c.value).unwrap_or(f64::INFINITY)
        };
        let opts = NelderMeadOptions { scale: 0.5, diameter_tol: 1e-10, value_tol: 0.0, max_evals: budget.max_evals };
        let min = nelder_mead(f, &x0, opts);
        if min.value > 1e-2 {
            return None;
        }
        let resid = |x: &[f64]| {
            crate::heuristic::residuals(&chart.witness(m, x).matrix, scenario, level).unwrap_or_default()
        };
        let (x, _) = levenberg_marquardt(resid, &min.x, 200, 1e-30);
        let w = chart.witness(m, &x);
        let rep = MeasurementBasis { matrix: w.matrix.clone(), dims: scenario.dims(), name: m.name.clone() };
        check_raw(&rep, scenario, level, PERM_TOL).map(|mut cert| {
            cert.representative = Some(w);
            cert
        })
    });
    found
}

/// Column phases applied on the right, for tests and fixtures.
pub fn with_column_phases(m: &MeasurementBasis, phases: &[f64]) -> MeasurementBasis {
    MeasurementBasis { matrix: &m.matrix * phase_diag(phases), dims: m.dims.clone(), name: m.name.clone() }
}
