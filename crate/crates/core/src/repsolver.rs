//! Representation-theoretic solver for the first two levels.
//!
//! A measurement `M` solves the first level exactly when it intertwines the
//! representation `𝟙⊗σ_b` of the Pauli algebra with a representation by
//! permutations with phases, `M†(𝟙⊗σ_b)M = P_b`. The solver enumerates the
//! Hermitian, traceless, involutive permutations with phases of size 4, finds
//! every triple obeying `[P_i, P_j] = 2iε_ijk P_k`, and recovers `M` from the
//! kernel of the stacked Sylvester operator. The second level repeats the
//! construction one layer down: commuting pairs of triples give the
//! intermediate intertwiners `ℳ_b`, and triples of those give `M`.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bank::{Provenance, SolvedClass};
use crate::basis::MeasurementBasis;
use crate::equivalence::{equivalent, fingerprint, EquivalenceBudget};
use crate::error::{Error, Result};
use crate::linalg::{c, cis, cr, dagger, kron, null_space, polar_unitary, CMatrix, Complex64};
use crate::localizability::{check_level1, check_level2, Scenario};
use crate::optimize::{levenberg_marquardt, nelder_mead, NelderMeadOptions};
use crate::pauli::{clock, shift, Pauli};
use crate::perm::PermWithPhases;

/// Acceptance threshold on the squared algebra residual.
pub const PHASE_RESIDUAL_TOL: f64 = 1e-18;

/// One of the 21 parametric shapes a Hermitian involution with spectrum
/// `{1, 1, −1, −1}` can take as a 4×4 permutation with phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PFamily {
    /// Shape number 1..=10.
    pub id: u8,
    /// Sign branch for shapes with a `∓1, ±1` diagonal; 0 otherwise.
    pub sign: i8,
    /// For shape 10, the pair of diagonal positions carrying `−1`.
    pub minus: (u8, u8),
}

impl PFamily {
    pub fn nparams(&self) -> usize {
        match self.id {
            1 | 3 | 5 => 2,
            10 => 0,
            _ => 1,
        }
    }

    pub fn label(&self) -> String {
        match (self.id, self.sign) {
            (10, _) => format!("P10[{},{}]", self.minus.0, self.minus.1),
            (id, 0) => format!("P{id}"),
            (id, s) => format!("P{id}{}", if s < 0 { '-' } else { '+' }),
        }
    }

    /// The matrix at the given phases (`nparams()` values).
    pub fn instantiate(&self, p: &[f64]) -> PermWithPhases {
        let m = self.mono(p);
        PermWithPhases { perm: m.perm.to_vec(), phases: m.phases.to_vec() }
    }

    fn mono(&self, p: &[f64]) -> Mono {
        assert_eq!(p.len(), self.nparams(), "wrong number of phases for {}", self.label());
        let s = self.sign as f64;
        let mut m = Mono { perm: [0; 4], phases: [cr(0.0); 4] };
        let mut put = |r: usize, col: usize, v: Complex64| {
            m.perm[col] = r;
            m.phases[col] = v;
        };
        // transposition (i j) with e^{iθ} at (i, j) and its conjugate at (j, i)
        let mut swap = |i: usize, j: usize, theta: f64| {
            put(i, j, cis(theta));
            put(j, i, cis(-theta));
        };
        let mut diag = Vec::with_capacity(2);
        match self.id {
            1 => {
                swap(0, 3, p[0]);
                swap(1, 2, p[1]);
            }
            2 => {
                swap(0, 3, p[0]);
                diag.extend([(1, -s), (2, s)]);
            }
            3 => {
                swap(0, 2, p[0]);
                swap(1, 3, p[1]);
            }
            4 => {
                swap(0, 2, p[0]);
                diag.extend([(1, -s), (3, s)]);
            }
            5 => {
                swap(0, 1, -p[0]);
                swap(2, 3, -p[1]);
            }
            6 => {
                swap(0, 1, -p[0]);
                diag.extend([(2, -s), (3, s)]);
            }
            7 => {
                swap(1, 3, p[0]);
                diag.extend([(0, -s), (2, s)]);
            }
            8 => {
                swap(1, 2, p[0]);
                diag.extend([(0, -s), (3, s)]);
            }
            9 => {
                swap(2, 3, p[0]);
                diag.extend([(0, -s), (1, s)]);
            }
            10 => {
                for k in 0..4 {
                    let v = if k == self.minus.0 as usize || k == self.minus.1 as usize { -1.0 } else { 1.0 };
                    diag.push((k, v));
                }
            }
            _ => unreachable!("family ids are 1..=10"),
        }
        for (k, v) in diag {
            m.perm[k] = k;
            m.phases[k] = cr(v);
        }
        m
    }
}

/// Stack-allocated 4×4 permutation with phases for the inner solver loops.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Mono {
    perm: [usize; 4],
    phases: [Complex64; 4],
}

impl Mono {
    fn compose(&self, o: &Mono) -> Mono {
        let mut r = Mono { perm: [0; 4], phases: [cr(0.0); 4] };
        for j in 0..4 {
            let k = o.perm[j];
            r.perm[j] = self.perm[k];
            r.phases[j] = self.phases[k] * o.phases[j];
        }
        r
    }

    fn to_pwp(self) -> PermWithPhases {
        PermWithPhases { perm: self.perm.to_vec(), phases: self.phases.to_vec() }
    }
}

/// All 21 families: ten shapes, with both sign branches where the diagonal
/// carries `∓1, ±1` and the six placements of the diagonal `−1`s.
pub fn enumerate_p_families() -> Vec<PFamily> {
    let mut out = Vec::new();
    for id in 1..=9u8 {
        match id {
            1 | 3 | 5 => out.push(PFamily { id, sign: 0, minus: (0, 0) }),
            _ => {
                for sign in [-1i8, 1] {
                    out.push(PFamily { id, sign, minus: (0, 0) });
                }
            }
        }
    }
    for i in 0..4u8 {
        for j in (i + 1)..4 {
            out.push(PFamily { id: 10, sign: 0, minus: (i, j) });
        }
    }
    out
}

/// A representation `(P_X, P_Y, P_Z)` of the Pauli algebra by permutations with phases.
#[derive(Debug, Clone)]
pub struct RepTriple {
    /// Families of `P_X`, `P_Y`, `P_Z`.
    pub families: [PFamily; 3],
    /// Solved phases, concatenated in the order X, Y, Z.
    pub phases: Vec<f64>,
    pub ops: [PermWithPhases; 3],
    pub residual: f64,
}

impl RepTriple {
    pub fn x(&self) -> &PermWithPhases {
        &self.ops[0]
    }

    pub fn y(&self) -> &PermWithPhases {
        &self.ops[1]
    }

    pub fn z(&self) -> &PermWithPhases {
        &self.ops[2]
    }

    pub fn matrices(&self) -> [CMatrix; 3] {
        [self.ops[0].to_matrix(), self.ops[1].to_matrix(), self.ops[2].to_matrix()]
    }

    /// Re-checks Hermiticity, unitarity, spectrum and all commutators.
    pub fn verify(&self, tol: f64) -> bool {
        let ms = self.matrices();
        let eye = CMatrix::identity(4, 4);
        for m in &ms {
            if (m - m.adjoint()).norm() > tol || (m * m - &eye).norm() > tol || m.trace().norm() > tol {
                return false;
            }
        }
        let two_i = c(0.0, 2.0);
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            let comm = &ms[i] * &ms[j] - &ms[j] * &ms[i];
            if (comm - &ms[k] * two_i).norm() > tol {
                return false;
            }
        }
        true
    }

    fn key(&self) -> Vec<i64> {
        self.ops.iter().flat_map(pwp_key).collect()
    }
}

fn pwp_key(p: &PermWithPhases) -> Vec<i64> {
    let mut k: Vec<i64> = p.perm.iter().map(|&x| x as i64).collect();
    for z in &p.phases {
        k.push((z.re * 1e6).round() as i64);
        k.push((z.im * 1e6).round() as i64);
    }
    k
}

/// Appends the entrywise gap between `a` and `scale_b · b`; false when the
/// underlying permutations differ.
fn phase_gap(a: &Mono, b: &Mono, scale_b: Complex64, out: &mut Vec<f64>) -> bool {
    if a.perm != b.perm {
        return false;
    }
    for (x, y) in a.phases.iter().zip(&b.phases) {
        let d = x - y * scale_b;
        out.push(d.re);
        out.push(d.im);
    }
    true
}

/// Residuals of `P_X P_Z = −P_Z P_X` and `P_Y = i P_X P_Z`, appended to `out`;
/// false when a relation fails already at the level of the permutations.
fn triple_residuals(t: &[Mono; 3], out: &mut Vec<f64>) -> bool {
    let [x, y, z] = t;
    let xz = x.compose(z);
    let zx = z.compose(x);
    phase_gap(&xz, &zx, cr(-1.0), out) && phase_gap(&xz, y, c(0.0, -1.0), out)
}

fn split3<'a>(fams: &[PFamily; 3], p: &'a [f64]) -> [&'a [f64]; 3] {
    let a = fams[0].nparams();
    let b = a + fams[1].nparams();
    [&p[..a], &p[a..b], &p[b..]]
}

fn instantiate3(fams: &[PFamily; 3], p: &[f64]) -> [Mono; 3] {
    let s = split3(fams, p);
    [fams[0].mono(s[0]), fams[1].mono(s[1]), fams[2].mono(s[2])]
}

fn rep_triple(fams: [PFamily; 3], p: &[f64], residual: f64) -> RepTriple {
    RepTriple { families: fams, phases: p.to_vec(), ops: instantiate3(&fams, p).map(Mono::to_pwp), residual }
}

/// Phase assignment search for an ordered family triple: multi-start
/// Nelder–Mead on the squared residual, refined by Levenberg–Marquardt.
/// Returns up to `samples` distinct solutions.
fn solve_triple_phases(fams: [PFamily; 3], starts: usize, samples: usize, seed: u64) -> Vec<RepTriple> {
    let n: usize = fams.iter().map(|f| f.nparams()).sum();
    let resid = |p: &[f64]| {
        let mut out = Vec::with_capacity(32);
        triple_residuals(&instantiate3(&fams, p), &mut out).then_some(out)
    };
    let probe = vec![0.0; n];
    if resid(&probe).is_none() {
        return Vec::new();
    }
    let sq = |p: &[f64]| resid(p).map(|r| r.iter().map(|v| v * v).sum()).unwrap_or(f64::INFINITY);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<RepTriple> = Vec::new();
    let runs = if n == 0 { 1 } else { starts };
    for _ in 0..runs {
        let x0: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        let p = if n == 0 {
            x0
        } else {
            let opts = NelderMeadOptions { scale: 1.0, diameter_tol: 1e-10, value_tol: 0.0, max_evals: 600 * n };
            let min = nelder_mead(sq, &x0, opts);
            if min.value > 1e-6 {
                continue;
            }
            levenberg_marquardt(|q| resid(q).unwrap_or_default(), &min.x, 50, 1e-30).0
        };
        let value = sq(&p);
        if value >= PHASE_RESIDUAL_TOL {
            continue;
        }
        let t = rep_triple(fams, &p, value);
        if !found.iter().any(|f| f.key() == t.key()) {
            found.push(t);
            if found.len() >= samples {
                break;
            }
        }
    }
    found
}

/// Bookkeeping from [`find_su2_triples_report`].
#[derive(Debug, Clone)]
pub struct TripleSearchReport {
    /// Unordered triples of distinct families.
    pub distinct_subsets: usize,
    /// Unordered triples allowing repeated families.
    pub multisets: usize,
    /// Ordered assignments whose permutation patterns are compatible.
    pub pattern_survivors: usize,
    pub triples: Vec<RepTriple>,
}

/// Samples per continuous solution family and starts per candidate.
const TRIPLE_SAMPLES: usize = 8;
const TRIPLE_STARTS: usize = 32;

/// Every triple of families admitting phases that satisfy the Pauli algebra,
/// with up to eight sampled solutions each.
///
/// Candidates are unordered; each is tried in all of its distinct orderings,
/// since the relative orientation of `(X, Y, Z)` matters once phases are fixed.
pub fn find_su2_triples_report() -> TripleSearchReport {
    let fams = enumerate_p_families();
    let nf = fams.len();
    let mut ordered: BTreeSet<[usize; 3]> = BTreeSet::new();
    let mut distinct_subsets = 0;
    let mut multisets = 0;
    for i in 0..nf {
        for j in i..nf {
            for k in j..nf {
                multisets += 1;
                if i < j && j < k {
                    distinct_subsets += 1;
                }
                for o in [[i, j, k], [i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]] {
                    ordered.insert(o);
                }
            }
        }
    }
    let survivors: Vec<[usize; 3]> = ordered
        .into_iter()
        .filter(|o| {
            let t = o.map(|f| fams[f].mono(&vec![0.0; fams[f].nparams()]));
            triple_residuals(&t, &mut Vec::new())
        })
        .collect();
    let pattern_survivors = survivors.len();
    let triples: Vec<RepTriple> = survivors
        .par_iter()
        .flat_map_iter(|o| {
            let seed = (o[0] * 441 + o[1] * 21 + o[2]) as u64;
            solve_triple_phases(o.map(|f| fams[f]), TRIPLE_STARTS, TRIPLE_SAMPLES, seed)
        })
        .collect();
    TripleSearchReport { distinct_subsets, multisets, pattern_survivors, triples }
}

pub fn find_su2_triples() -> Vec<RepTriple> {
    find_su2_triples_report().triples
}

/// Solves `G_k X = X T_k` for all `k`: the kernel of the stacked operator
/// `𝟙⊗G_k − T_kᵀ⊗𝟙` acting on `vec X`.
pub fn sylvester_kernel(generators: &[CMatrix], targets: &[CMatrix]) -> Result<Vec<CMatrix>> {
    if generators.len() != targets.len() || generators.is_empty() {
        return Err(Error::InvalidArgument("need matching generator and target lists".into()));
    }
    let r = generators[0].nrows();
    let s = targets[0].nrows();
    let mut stack = CMatrix::zeros(r * s * generators.len(), r * s);
    for (k, (g, t)) in generators.iter().zip(targets).enumerate() {
        let block = kron(&CMatrix::identity(s, s), g) - kron(&t.transpose(), &CMatrix::identity(r, r));
        stack.view_mut((k * r * s, 0), (r * s, r * s)).copy_from(&block);
    }
    Ok(null_space(&stack, 1e-9 * (1.0 + stack.norm()))
        .into_iter()
        .map(|v| CMatrix::from_column_slice(r, s, v.as_slice()))
        .collect())
}

/// A unitary element of the kernel: random combination, polar factor, and a
/// check that it still intertwines.
pub fn unitary_intertwiner(generators: &[CMatrix], targets: &[CMatrix], seed: u64) -> Result<CMatrix> {
    let kernel = sylvester_kernel(generators, targets)?;
    if kernel.is_empty() {
        return Err(Error::EmptyKernel("representations are not equivalent".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..16 {
        let mut x = CMatrix::zeros(kernel[0].nrows(), kernel[0].ncols());
        for k in &kernel {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            x += k * c(a, b);
        }
        let Ok(u) = polar_unitary(&x) else { continue };
        let defect: f64 = generators.iter().zip(targets).map(|(g, t)| (g * &u - &u * t).norm()).sum();
        if defect < 1e-8 {
            return Ok(u);
        }
    }
    Err(Error::Numerical("no unitary element found in the kernel".into()))
}

fn bob_paulis() -> [CMatrix; 2] {
    let eye = CMatrix::identity(2, 2);
    [kron(&eye, &Pauli::X.matrix()), kron(&eye, &Pauli::Z.matrix())]
}

/// The measurement `M` with `M†(𝟙⊗σ_b)M = P_b`.
pub fn intertwiner_level1(triple: &RepTriple) -> Result<MeasurementBasis> {
    let [px, _, pz] = triple.matrices();
    let u = unitary_intertwiner(&bob_paulis(), &[px, pz], 1)?;
    MeasurementBasis::new(u, vec![2, 2])
}

/// Groups measurements into classes by fingerprint, keeping the first
/// representative and confirming later members with an explicit equivalence
/// search when the budget allows.
fn collect_classes(ms: Vec<MeasurementBasis>, level: usize, confirm: bool) -> Result<Vec<SolvedClass>> {
    let mut classes: BTreeMap<_, SolvedClass> = BTreeMap::new();
    for m in ms {
        let fp = fingerprint(&m)?;
        match classes.get(&fp) {
            Some(rep) => {
                if confirm && equivalent(&rep.measurement, &m, EquivalenceBudget::default()).is_no() {
                    return Err(Error::Numerical("fingerprint collision between inequivalent solutions".into()));
                }
            }
            None => {
                classes.insert(
                    fp.clone(),
                    SolvedClass {
                        measurement: m,
                        level,
                        scenario: Scenario::Bipartite,
                        fingerprint: fp,
                        provenance: Provenance::Solver,
                    },
                );
            }
        }
    }
    Ok(classes.into_values().collect())
}

/// All first-level classes.
pub fn solve_level1() -> Result<Vec<SolvedClass>> {
    let triples = find_su2_triples();
    let ms: Vec<MeasurementBasis> = triples
        .par_iter()
        .filter_map(|t| intertwiner_level1(t).ok())
        .filter(|m| check_level1(m, 1e-8).is_some())
        .collect();
    collect_classes(ms, 1, false)
}

fn quarter(z: Complex64) -> u8 {
    ((z.arg() / std::f64::consts::FRAC_PI_2).round() as i64).rem_euclid(4) as u8
}

/// Solutions of an ordered family triple with every free phase a multiple of `π/2`.
fn quarter_solutions(fams: [PFamily; 3]) -> Vec<(Vec<f64>, [Mono; 3])> {
    let n: usize = fams.iter().map(|f| f.nparams()).sum();
    let mut out = Vec::new();
    for code in 0..4usize.pow(n as u32) {
        let p: Vec<f64> = (0..n).map(|k| ((code >> (2 * k)) & 3) as f64 * std::f64::consts::FRAC_PI_2).collect();
        let t = instantiate3(&fams, &p);
        let mut r = Vec::with_capacity(32);
        if triple_residuals(&t, &mut r) && r.iter().all(|v| v.abs() < 1e-9) {
            out.push((p, t));
        }
    }
    out
}

/// `D†PD` for `D = diag(i^{g_k})`.
fn gauge(m: &Mono, g: [u8; 4]) -> Mono {
    let mut r = *m;
    for j in 0..4 {
        let shift = (g[j] as i32 - g[m.perm[j]] as i32).rem_euclid(4);
        r.phases[j] = m.phases[j] * c(0.0, 1.0).powi(shift);
    }
    r
}

/// Smallest encoding of a pair over the 64 quarter-phase diagonal gauges.
fn gauge_key(a: &[Mono; 3], b: &[Mono; 3]) -> Vec<u8> {
    let mut best: Option<Vec<u8>> = None;
    for code in 0..64u8 {
        let g = [0, code & 3, (code >> 2) & 3, (code >> 4) & 3];
        let key: Vec<u8> = a
            .iter()
            .chain(b)
            .flat_map(|m| {
                let m = gauge(m, g);
                (0..4).flat_map(move |j| [m.perm[j] as u8, quarter(m.phases[j])])
            })
            .collect();
        if best.as_ref().is_none_or(|k| key < *k) {
            best = Some(key);
        }
    }
    best.unwrap_or_default()
}

/// Pairs `(P_{a,0}, P_{0,a})` of representations whose elements commute
/// pairwise, one per class under simultaneous diagonal conjugation.
///
/// Phases are re-solved jointly and exactly: a pair is `B†σB` conjugated by a
/// diagonal unitary for a stabilizer frame `B`, and in column normal form the
/// overlaps of stabilizer states take values in `{0, ±1, ±i}`. Every pair is
/// therefore gauge-equivalent to one with all phases multiples of `π/2`, and
/// enumerating those on the family triples found by the phase search is complete.
pub fn commuting_pairs(triples: &[RepTriple]) -> Vec<(RepTriple, RepTriple)> {
    let families: BTreeSet<[PFamily; 3]> = triples.iter().map(|t| t.families).collect();
    let lattice: Vec<([PFamily; 3], Vec<(Vec<f64>, [Mono; 3])>)> =
        families.into_iter().map(|f| (f, quarter_solutions(f))).filter(|(_, s)| !s.is_empty()).collect();
    let structural = |a: &[Mono; 3], b: &[Mono; 3]| a.iter().all(|x| b.iter().all(|y| x.compose(y).perm == y.compose(x).perm));
    let found: Vec<(Vec<u8>, RepTriple, RepTriple)> = (0..lattice.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut local: BTreeMap<Vec<u8>, (RepTriple, RepTriple)> = BTreeMap::new();
            let (fa, sa) = &lattice[i];
            for (fb, sb) in &lattice {
                if !structural(&sa[0].1, &sb[0].1) {
                    continue;
                }
                for (pa, a) in sa {
                    for (pb, b) in sb {
                        let commute = a.iter().all(|x| {
                            b.iter().all(|y| {
                                let (xy, yx) = (x.compose(y), y.compose(x));
                                xy.perm == yx.perm && xy.phases.iter().zip(&yx.phases).all(|(u, v)| (u - v).norm() < 1e-9)
                            })
                        });
                        if commute {
                            local
                                .entry(gauge_key(a, b))
                                .or_insert_with(|| (rep_triple(*fa, pa, 0.0), rep_triple(*fb, pb, 0.0)));
                        }
                    }
                }
            }
            local.into_iter().map(|(k, (a, b))| (k, a, b))
        })
        .collect();
    let mut unique: BTreeMap<Vec<u8>, (RepTriple, RepTriple)> = BTreeMap::new();
    for (k, a, b) in found {
        unique.entry(k).or_insert((a, b));
    }
    unique.into_values().collect()
}

fn site_paulis() -> [CMatrix; 4] {
    let eye = CMatrix::identity(2, 2);
    [
        kron(&Pauli::X.matrix(), &eye),
        kron(&Pauli::Z.matrix(), &eye),
        kron(&eye, &Pauli::X.matrix()),
        kron(&eye, &Pauli::Z.matrix()),
    ]
}

/// The unitary `ℳ` with `ℳ†(σ_a⊗𝟙)ℳ = P_{a,0}` and `ℳ†(𝟙⊗σ_a)ℳ = P_{0,a}`,
/// unique up to a phase.
pub fn intermediate_intertwiner(first: &RepTriple, second: &RepTriple) -> Result<CMatrix> {
    let [ax, _, az] = first.matrices();
    let [bx, _, bz] = second.matrices();
    let targets = [ax, az, bx, bz];
    let kernel = sylvester_kernel(&site_paulis(), &targets)?;
    if kernel.len() != 1 {
        return Err(Error::Numerical(format!("expected a one-dimensional kernel, found {}", kernel.len())));
    }
    unitary_intertwiner(&site_paulis(), &targets, 2)
}

/// Column-phase normal form: each column divided by the phase of its first
/// non-negligible entry.
pub fn frame_normal_form(m: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    for j in 0..m.ncols() {
        if let Some(z) = m.column(j).iter().find(|z| z.norm() > 1e-6) {
            let ph = z / z.norm();
            for i in 0..m.nrows() {
                out[(i, j)] = m[(i, j)] / ph;
            }
        }
    }
    out
}

fn frame_key(m: &CMatrix) -> Vec<i64> {
    crate::linalg::rounded_key(&frame_normal_form(m), 1e-6)
}

/// Ordered frames `B` (normal form) of the intertwiners `ℳ = B·D` reachable
/// from commuting pairs.
pub fn intermediate_frames(pairs: &[(RepTriple, RepTriple)]) -> Vec<CMatrix> {
    let ms: Vec<CMatrix> = pairs.par_iter().filter_map(|(a, b)| intermediate_intertwiner(a, b).ok()).collect();
    let mut frames: BTreeMap<Vec<i64>, CMatrix> = BTreeMap::new();
    for m in ms {
        frames.entry(frame_key(&m)).or_insert_with(|| frame_normal_form(&m));
    }
    frames.into_values().collect()
}

/// Hermitian traceless members `B·D(θ)` of a frame, `D` diagonal.
///
/// Hermiticity reads `θ_i + θ_j = arg conj(B_ji) − arg B_ij` on the support of
/// `B`; each connected component of the support graph contributes one free
/// angle, or two isolated values when the component has an odd cycle.
#[derive(Debug, Clone)]
pub struct HermitianFamily {
    pub frame: CMatrix,
    comp: Vec<usize>,
    sign: Vec<f64>,
    offset: Vec<f64>,
    /// Per component: `Some(t)` when fixed, `None` when free.
    fixed: Vec<Option<f64>>,
}

fn wrap(x: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = x.rem_euclid(t);
    if r > t / 2.0 { r - t } else { r }
}

impl HermitianFamily {
    pub fn nparams(&self) -> usize {
        self.fixed.iter().filter(|f| f.is_none()).count()
    }

    pub fn angles(&self, p: &[f64]) -> Vec<f64> {
        let mut free = self.fixed.iter().enumerate().filter(|(_, f)| f.is_none()).map(|(k, _)| k);
        let mut t = vec![0.0; self.fixed.len()];
        for (k, f) in self.fixed.iter().enumerate() {
            if let Some(v) = f {
                t[k] = *v;
            }
        }
        for v in p {
            if let Some(k) = free.next() {
                t[k] = *v;
            }
        }
        (0..self.comp.len()).map(|i| self.sign[i] * t[self.comp[i]] + self.offset[i]).collect()
    }

    pub fn instantiate(&self, p: &[f64]) -> CMatrix {
        let th = self.angles(p);
        let mut m = self.frame.clone();
        for j in 0..m.ncols() {
            let ph = cis(th[j]);
            for i in 0..m.nrows() {
                m[(i, j)] *= ph;
            }
        }
        m
    }
}

pub fn hermitian_families(frame: &CMatrix) -> Vec<HermitianFamily> {
    let n = frame.nrows();
    let nz = |i: usize, j: usize| frame[(i, j)].norm() > 1e-9;
    for i in 0..n {
        for j in 0..n {
            if nz(i, j) != nz(j, i) || (frame[(i, j)].norm() - frame[(j, i)].norm()).abs() > 1e-9 {
                return Vec::new();
            }
        }
    }
    let cst = |i: usize, j: usize| frame[(j, i)].conj().arg() - frame[(i, j)].arg();
    let mut comp = vec![usize::MAX; n];
    let mut sign = vec![0.0; n];
    let mut offset = vec![0.0; n];
    let mut constraints: Vec<Vec<f64>> = Vec::new();
    for root in 0..n {
        if comp[root] != usize::MAX {
            continue;
        }
        let id = constraints.len();
        constraints.push(Vec::new());
        comp[root] = id;
        sign[root] = 1.0;
        let mut queue = vec![root];
        while let Some(i) = queue.pop() {
            for j in 0..n {
                if !nz(i, j) {
                    continue;
                }
                // θ_j = c_ij − θ_i
                let (s, o) = (-sign[i], cst(i, j) - offset[i]);
                if comp[j] == usize::MAX {
                    comp[j] = id;
                    sign[j] = s;
                    offset[j] = o;
                    queue.push(j);
                } else if sign[j] == s {
                    if wrap(offset[j] - o).abs() > 1e-7 {
                        return Vec::new();
                    }
                } else {
                    constraints[id].push(sign[j] * (o - offset[j]) / 2.0);
                }
            }
        }
    }
    let choices: Vec<Vec<Option<f64>>> = constraints
        .iter()
        .map(|cs| match cs.first() {
            None => vec![None],
            Some(&v) => [v, v + std::f64::consts::PI]
                .into_iter()
                .filter(|t| cs.iter().all(|x| wrap(2.0 * (t - x)).abs() < 1e-7))
                .map(Some)
                .collect(),
        })
        .collect();
    let mut out = Vec::new();
    let mut stack: Vec<Vec<Option<f64>>> = vec![Vec::new()];
    for ch in &choices {
        stack = stack.into_iter().flat_map(|prefix| ch.iter().map(move |c| [prefix.clone(), vec![*c]].concat())).collect();
    }
    for fixed in stack {
        let fam = HermitianFamily { frame: frame.clone(), comp: comp.clone(), sign: sign.clone(), offset: offset.clone(), fixed };
        let np = fam.nparams();
        let traceless = [0.3, 1.9].iter().all(|&v| fam.instantiate(&vec![v; np]).trace().norm() < 1e-9);
        if traceless {
            out.push(fam);
        }
    }
    out
}

/// Monomial Clifford generators: conjugating every `ℳ_b` by one of them maps
/// second-level solutions to second-level solutions.
fn monomial_cliffords() -> Vec<CMatrix> {
    let eye = CMatrix::identity(2, 2);
    let s = CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(vec![cr(1.0), c(0.0, 1.0)]));
    let perm = |p: [usize; 4]| crate::linalg::perm_matrix(&p);
    let mut gens = site_paulis().to_vec();
    gens.push(kron(&s, &eye));
    gens.push(kron(&eye, &s));
    gens.push(CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(vec![cr(1.0), cr(1.0), cr(1.0), cr(-1.0)])));
    gens.push(perm([0, 1, 3, 2]));
    gens.push(perm([0, 2, 1, 3]));
    gens
}

/// One frame per orbit of the monomial Clifford action `B ↦ Q†BQ`.
pub fn frame_orbit_representatives(frames: &[CMatrix]) -> Vec<CMatrix> {
    let gens = monomial_cliffords();
    let keys: Vec<Vec<i64>> = frames.iter().map(frame_key).collect();
    let index: BTreeMap<&Vec<i64>, usize> = keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let mut seen = vec![false; frames.len()];
    let mut reps = Vec::new();
    for start in 0..frames.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        reps.push(frames[start].clone());
        let mut queue = vec![start];
        while let Some(i) = queue.pop() {
            for q in &gens {
                let img = dagger(q) * &frames[i] * q;
                if let Some(&j) = index.get(&frame_key(&img)) {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push(j);
                    }
                }
            }
        }
    }
    reps
}

fn smooth_monomial_residual(f: &CMatrix, out: &mut Vec<f64>) {
    for z in f.iter() {
        if z.norm() >= 0.5 {
            out.push(z.norm_sqr() - 1.0);
            out.push(0.0);
        } else {
            out.push(z.re);
            out.push(z.im);
        }
    }
}

/// Residual of the last layer: `ℳ_X` and `ℳ_Z` anticommute and
/// `ℳ_Y = iℳ_Xℳ_Z` conjugates the site Paulis to permutations with phases.
fn generator_residuals(mx: &CMatrix, mz: &CMatrix, gens: &[CMatrix; 4]) -> Vec<f64> {
    let xz = mx * mz;
    let anti = &xz + mz * mx;
    let mut out: Vec<f64> = anti.iter().flat_map(|z| [z.re, z.im]).collect();
    let my = xz * c(0.0, 1.0);
    let myd = my.adjoint();
    for g in gens {
        smooth_monomial_residual(&(&myd * g * &my), &mut out);
    }
    out
}

/// A solution `(ℳ_X, ℳ_Z)` of the last layer.
#[derive(Debug, Clone)]
pub struct GeneratorPair {
    pub mx: CMatrix,
    pub mz: CMatrix,
}

impl GeneratorPair {
    pub fn my(&self) -> CMatrix {
        &self.mx * &self.mz * c(0.0, 1.0)
    }

    /// Hermiticity, anticommutation, and the permutation-with-phases property
    /// of all three conjugations.
    pub fn verify(&self, tol: f64) -> bool {
        let gens = site_paulis();
        let ms = [self.mx.clone(), self.my(), self.mz.clone()];
        let herm = ms.iter().all(|m| (m - m.adjoint()).norm() < tol);
        let anti = (&self.mx * &self.mz + &self.mz * &self.mx).norm() < tol;
        let mono = ms.iter().all(|m| {
            gens.iter().all(|g| crate::perm::as_perm_with_phases(&(m.adjoint() * g * m), tol).is_some())
        });
        herm && anti && mono
    }
}

const GENERATOR_STARTS: usize = 6;

/// All `(ℳ_X, ℳ_Z)` with `ℳ_X` drawn from one frame per monomial-Clifford orbit.
///
/// Right multiplication of `M` by a monomial Clifford `Q` conjugates every
/// `ℳ_b` by `Q` and preserves the second-level equations, so `ℳ_X` only needs
/// to range over orbit representatives; `ℳ_Z` ranges over every Hermitian family.
pub fn generator_pairs(frames: &[CMatrix]) -> Vec<GeneratorPair> {
    let reps = frame_orbit_representatives(frames);
    let xs: Vec<HermitianFamily> = reps.iter().flat_map(hermitian_families).collect();
    let zs: Vec<HermitianFamily> = frames.iter().flat_map(hermitian_families).collect();
    let gens = site_paulis();
    let work: Vec<(usize, usize)> = (0..xs.len()).flat_map(|i| (0..zs.len()).map(move |j| (i, j))).collect();
    let found: Vec<GeneratorPair> = work
        .par_iter()
        .flat_map_iter(|&(i, j)| {
            let (fx, fz) = (&xs[i], &zs[j]);
            let (nx, nz) = (fx.nparams(), fz.nparams());
            let resid = |p: &[f64]| generator_residuals(&fx.instantiate(&p[..nx]), &fz.instantiate(&p[nx..]), &gens);
            let mut rng = ChaCha8Rng::seed_from_u64((i * 100_000 + j) as u64);
            let starts = if nx + nz == 0 { 1 } else { GENERATOR_STARTS };
            let mut out: Vec<GeneratorPair> = Vec::new();
            for _ in 0..starts {
                let x0: Vec<f64> = (0..nx + nz).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
                let (p, value) = if nx + nz == 0 {
                    (x0.clone(), resid(&x0).iter().map(|v| v * v).sum())
                } else {
                    levenberg_marquardt(resid, &x0, 60, 1e-30)
                };
                if value < PHASE_RESIDUAL_TOL {
                    let g = GeneratorPair { mx: fx.instantiate(&p[..nx]), mz: fz.instantiate(&p[nx..]) };
                    if g.verify(1e-8) {
                        out.push(g);
                    }
                }
            }
            out
        })
        .collect();
    let mut unique: BTreeMap<Vec<i64>, GeneratorPair> = BTreeMap::new();
    for g in found {
        let mut key = crate::linalg::rounded_key(&g.mx, 1e-6);
        key.extend(crate::linalg::rounded_key(&g.mz, 1e-6));
        unique.entry(key).or_insert(g);
    }
    unique.into_values().collect()
}

/// The measurement with `M†(𝟙⊗σ_b)M = ℳ_b`.
pub fn intertwiner_level2(pair: &GeneratorPair) -> Result<MeasurementBasis> {
    let u = unitary_intertwiner(&bob_paulis(), &[pair.mx.clone(), pair.mz.clone()], 3)?;
    MeasurementBasis::new(u, vec![2, 2])
}

/// Everything the second-level pipeline produced, stage by stage.
#[derive(Debug, Clone)]
pub struct Level2Report {
    pub triples: usize,
    pub pairs: usize,
    pub frames: Vec<CMatrix>,
    pub hermitian_families: usize,
    pub generator_pairs: usize,
    pub classes: Vec<SolvedClass>,
}

pub fn solve_level2_report() -> Result<Level2Report> {
    let triples = find_su2_triples();
    let pairs = commuting_pairs(&triples);
    let frames = intermediate_frames(&pairs);
    let hermitian = frames.iter().map(|f| hermitian_families(f).len()).sum();
    let gp = generator_pairs(&frames);
    let ms: Vec<MeasurementBasis> = gp
        .par_iter()
        .filter_map(|g| intertwiner_level2(g).ok())
        .filter(|m| check_level2(m, 1e-8).is_some())
        .collect();
    let classes = collect_classes(ms, 2, false)?;
    Ok(Level2Report {
        triples: triples.len(),
        pairs: pairs.len(),
        frames,
        hermitian_families: hermitian,
        generator_pairs: gp.len(),
        classes,
    })
}

/// All second-level classes.
pub fn solve_level2() -> Result<Vec<SolvedClass>> {
    Ok(solve_level2_report()?.classes)
}

fn omega(d: usize) -> Complex64 {
    cis(std::f64::consts::TAU / d as f64)
}

fn matrix_power(m: &CMatrix, k: usize) -> CMatrix {
    let mut out = CMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

/// Checks `P_Z P_X = ω P_X P_Z` and `P_X^d = P_Z^d = 𝟙`.
pub fn is_weyl_rep(px: &CMatrix, pz: &CMatrix, d: usize, tol: f64) -> bool {
    let n = px.nrows();
    let eye = CMatrix::identity(n, n);
    (pz * px - px * pz * omega(d)).norm() < tol
        && (matrix_power(px, d) - &eye).norm() < tol
        && (matrix_power(pz, d) - &eye).norm() < tol
}

fn weyl_generators(d: usize) -> [CMatrix; 2] {
    let eye = CMatrix::identity(d, d);
    [kron(&eye, &shift(d)), kron(&eye, &clock(d))]
}

/// The measurement `M` with `M†(𝟙⊗X_d)M = P_X` and `M†(𝟙⊗Z_d)M = P_Z` for a
/// representation of the Weyl–Heisenberg group on `d²` dimensions.
pub fn intertwiner_weyl(px: &CMatrix, pz: &CMatrix, d: usize) -> Result<MeasurementBasis> {
    if px.nrows() != d * d || pz.nrows() != d * d {
        return Err(Error::Dimension(format!("representation must act on {} dimensions", d * d)));
    }
    if !is_weyl_rep(px, pz, d, 1e-9) {
        return Err(Error::InvalidArgument("braiding or normalisation relations fail".into()));
    }
    let u = unitary_intertwiner(&weyl_generators(d), &[px.clone(), pz.clone()], 4)?;
    MeasurementBasis::new(u, vec![d, d])
}

/// Same as [`intertwiner_weyl`] for permutations with phases.
pub fn intertwiner_weyl_pwp(rep: &[PermWithPhases; 2], d: usize) -> Result<MeasurementBasis> {
    intertwiner_weyl(&rep[0].to_matrix(), &rep[1].to_matrix(), d)
}

/// `P_X = X_d⊗𝟙`, `P_Z = Z_d⊗X_d`, whose intertwiner is the qudit Bell basis.
pub fn bell_weyl_rep(d: usize) -> [CMatrix; 2] {
    let eye = CMatrix::identity(d, d);
    [kron(&shift(d), &eye), kron(&clock(d), &shift(d))]
}

/// Second-layer data of the qudit twisted Bell basis: for each `b ∈ {X, Z}`,
/// the images of `X⊗𝟙`, `Z⊗𝟙`, `𝟙⊗X`, `𝟙⊗Z` under conjugation by `ℳ_b`.
#[derive(Debug, Clone)]
pub struct TwistedBellRep {
    pub d: usize,
    pub w: Complex64,
    /// `[P_{X,0,b}, P_{Z,0,b}, P_{0,X,b}, P_{0,Z,b}]` for `b = X` then `b = Z`.
    pub blocks: [[CMatrix; 4]; 2],
}

impl TwistedBellRep {
    /// The representation with `w = ω`.
    pub fn standard(d: usize) -> Self {
        Self::new(d, omega(d))
    }

    /// The representation with scalar `w`, which must satisfy `w^d = 1`.
    pub fn new(d: usize, w: Complex64) -> Self {
        let (x, z) = (shift(d), clock(d));
        let eye = CMatrix::identity(d, d);
        // normalises (XZ)^d = (−1)^{d−1}
        let phase = cis(std::f64::consts::PI * (1.0 + 1.0 / d as f64));
        let bx = [
            kron(&x, &eye) * w,
            kron(&z, &x) * w,
            kron(&eye, &x),
            kron(&x, &(&x * &z)) * (w * phase),
        ];
        let bz = [kron(&x, &eye), kron(&z, &eye) * w, kron(&eye, &x), kron(&eye, &z)];
        TwistedBellRep { d, w, blocks: [bx, bz] }
    }

    /// Each block's two halves are Weyl representations and commute with each other.
    pub fn verify(&self, tol: f64) -> bool {
        self.blocks.iter().all(|b| {
            let halves = is_weyl_rep(&b[0], &b[1], self.d, tol) && is_weyl_rep(&b[2], &b[3], self.d, tol);
            let commute = b[..2].iter().all(|p| b[2..].iter().all(|q| (p * q - q * p).norm() < tol));
            let monomial = b.iter().all(|p| crate::perm::as_perm_with_phases(p, tol).is_some());
            halves && commute && monomial
        })
    }

    /// The intermediate intertwiners `ℳ_X, ℳ_Z`, each rescaled so that `ℳ_b^d = 𝟙`.
    pub fn intermediates(&self) -> Result<[CMatrix; 2]> {
        let d = self.d;
        let (x, z) = (shift(d), clock(d));
        let eye = CMatrix::identity(d, d);
        let gens = [kron(&x, &eye), kron(&z, &eye), kron(&eye, &x), kron(&eye, &z)];
        let mut out = [CMatrix::zeros(0, 0), CMatrix::zeros(0, 0)];
        for (k, block) in self.blocks.iter().enumerate() {
            let m = unitary_intertwiner(&gens, block, 5 + k as u64)?;
            let p = matrix_power(&m, d);
            let lambda = p[(0, 0)];
            if (p - CMatrix::identity(d * d, d * d) * lambda).norm() > 1e-8 {
                return Err(Error::Numerical("intermediate intertwiner has no normalisable power".into()));
            }
            out[k] = m * cis(-lambda.arg() / d as f64);
        }
        Ok(out)
    }

    /// The qudit twisted Bell basis. Of the `d` normalisations of each `ℳ_b`,
    /// the first pair satisfying the braiding relation is used.
    pub fn measurement(&self) -> Result<MeasurementBasis> {
        let [mx, mz] = self.intermediates()?;
        let d = self.d;
        for j in 0..d {
            for k in 0..d {
                let (px, pz) = (&mx * omega(d).powi(j as i32), &mz * omega(d).powi(k as i32));
                if is_weyl_rep(&px, &pz, d, 1e-8) {
                    return intertwiner_weyl(&px, &pz, d);
                }
            }
        }
        Err(Error::InvalidArgument("intermediate intertwiners do not braid".into()))
    }
}

/// Second-level condition for qudits: with `ℳ_b = M†(𝟙⊗X^{b₁}Z^{b₂})M`, every
/// `ℳ_b†(X^{a₁}Z^{a₂}⊗X^{a₃}Z^{a₄})ℳ_b` is a permutation with phases.
pub fn weyl_level2_holds(m: &MeasurementBasis, d: usize, tol: f64) -> bool {
    if m.dims != [d, d] {
        return false;
    }
    let eye = CMatrix::identity(d, d);
    let md = m.matrix.adjoint();
    let site = |a: usize, b: usize| crate::pauli::weyl(d, a, b);
    let gens = [kron(&shift(d), &eye), kron(&clock(d), &eye), kron(&eye, &shift(d)), kron(&eye, &clock(d))];
    (0..d).all(|b1| {
        (0..d).all(|b2| {
            let mb = &md * kron(&eye, &site(b1, b2)) * &m.matrix;
            let mbd = mb.adjoint();
            gens.iter().all(|g| crate::perm::as_perm_with_phases(&(&mbd * g * &mb), tol).is_some())
        })
    })
}
