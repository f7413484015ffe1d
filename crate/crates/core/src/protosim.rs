//! State-vector simulation of the finite ping-pong teleportation protocols.
//!
//! Every teleportation is carried out explicitly: a fresh ebit is appended,
//! the sender's qudit and her half of the ebit are projected onto each Bell
//! state in turn, and the branch continues on the receiver's half. Parties
//! apply only the unitaries the protocol prescribes from their own classical
//! knowledge. The final computational-basis readout of every branch is mapped
//! through the certificate's decode table, and the aggregated distribution can
//! be compared against Born's rule as an independent check of the certificate.
//! Mixed inputs are handled through their eigen-decomposition.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::basis::MeasurementBasis;
use crate::equivalence::party_permutation;
use crate::error::{Error, Result};
use crate::linalg::{c, dagger, hermitian_eigen, kron, kron_all, CMatrix, CVector, PERM_TOL};
use crate::localizability::{LocalizabilityCertificate, Scenario};
use crate::pauli::{weyl, Pauli};
use crate::perm::as_perm_with_phases;

/// Input to the protocol: a pure state vector or a density matrix.
#[derive(Debug, Clone)]
pub enum InputState {
    Pure(CVector),
    Mixed(CMatrix),
}

impl InputState {
    fn dim(&self) -> usize {
        match self {
            InputState::Pure(v) => v.len(),
            InputState::Mixed(r) => r.nrows(),
        }
    }

    /// Weighted pure components summing to the state.
    fn components(&self) -> Result<Vec<(f64, CVector)>> {
        match self {
            InputState::Pure(v) => {
                let n = v.norm();
                if (n - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!("state has norm {n}")));
                }
                Ok(vec![(1.0, v.clone())])
            }
            InputState::Mixed(rho) => {
                if !rho.is_square() || (rho - rho.adjoint()).iter().any(|z| z.norm() > 1e-9) {
                    return Err(Error::InvalidArgument("density matrix must be Hermitian".into()));
                }
                let (w, vecs) = hermitian_eigen(rho);
                if w.iter().any(|&x| x < -1e-9) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument("density matrix must be positive with unit trace".into()));
                }
                Ok(w.iter()
                    .enumerate()
                    .filter(|(_, &x)| x > 1e-15)
                    .map(|(k, &x)| (x, vecs.column(k).into_owned()))
                    .collect())
            }
        }
    }

    pub fn born(&self, m: &MeasurementBasis) -> Vec<f64> {
        match self {
            InputState::Pure(v) => m.born(v),
            InputState::Mixed(r) => m.born_mixed(r),
        }
    }
}

/// One leaf of the protocol tree.
#[derive(Debug, Clone, Serialize)]
pub struct BranchRecord {
    /// Bell outcomes in the order they occur, as distortion indices.
    pub outcomes: Vec<usize>,
    /// Label under which the branch is decoded.
    pub label: Vec<usize>,
    /// Probability of reaching this leaf.
    pub weight: f64,
    /// Joint probability of each computational-basis readout in this leaf.
    pub readout: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolTrace {
    pub scenario: String,
    pub level: usize,
    /// Ebits allocated by the protocol, idle ports included.
    pub ebits: usize,
    pub branches: Vec<BranchRecord>,
    pub decoded: Vec<f64>,
    pub total_probability: f64,
}

impl ProtocolTrace {
    /// Largest deviation of the decoded distribution from Born's rule.
    pub fn born_deviation(&self, m: &MeasurementBasis, psi: &InputState) -> f64 {
        psi.born(m).iter().zip(&self.decoded).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Probability of each first Bell outcome, summed over the rest of the tree.
    pub fn first_outcome_marginal(&self) -> Vec<f64> {
        let k = self.branches.iter().filter_map(|b| b.outcomes.first()).max().map_or(0, |m| m + 1);
        let mut out = vec![0.0; k];
        for b in &self.branches {
            if let Some(&o) = b.outcomes.first() {
                out[o] += b.weight;
            }
        }
        out
    }
}

/// Amplitudes over a list of qudit registers, the first register most significant.
#[derive(Debug, Clone)]
struct Registers {
    dims: Vec<usize>,
    ids: Vec<usize>,
    amp: CVector,
    next_id: usize,
}

impl Registers {
    fn new(psi: &CVector, dims: &[usize]) -> (Self, Vec<usize>) {
        let ids: Vec<usize> = (0..dims.len()).collect();
        let r = Registers { dims: dims.to_vec(), ids: ids.clone(), amp: psi.clone(), next_id: dims.len() };
        (r, ids)
    }

    fn position(&self, id: usize) -> usize {
        self.ids.iter().position(|&x| x == id).expect("register id")
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for p in (0..self.dims.len().saturating_sub(1)).rev() {
            s[p] = s[p + 1] * self.dims[p + 1];
        }
        s
    }

    /// Offsets of every joint value of the listed positions.
    fn offsets(&self, positions: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut out = vec![0usize];
        for &p in positions {
            let step = strides[p];
            out = out.iter().flat_map(|&o| (0..self.dims[p]).map(move |v| o + v * step)).collect();
        }
        out
    }

    /// Indices whose digits at `positions` are all zero, in increasing order.
    fn bases(&self, positions: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        (0..self.amp.len())
            .filter(|&i| positions.iter().all(|&p| (i / strides[p]) % self.dims[p] == 0))
            .collect()
    }

    fn append_ebit(&mut self, d: usize) -> (usize, usize) {
        let mut phi = CVector::zeros(d * d);
        for j in 0..d {
            phi[j * d + j] = c(1.0 / (d as f64).sqrt(), 0.0);
        }
        self.amp = self.amp.kronecker(&phi);
        let (e1, e2) = (self.next_id, self.next_id + 1);
        self.next_id += 2;
        self.dims.extend([d, d]);
        self.ids.extend([e1, e2]);
        (e1, e2)
    }

    fn apply(&mut self, u: &CMatrix, ids: &[usize]) {
        let positions: Vec<usize> = ids.iter().map(|&i| self.position(i)).collect();
        let offsets = self.offsets(&positions);
        for base in self.bases(&positions) {
            let sub = CVector::from_iterator(offsets.len(), offsets.iter().map(|&o| self.amp[base + o]));
            let out = u * sub;
            for (k, &o) in offsets.iter().enumerate() {
                self.amp[base + o] = out[k];
            }
        }
    }

    /// Contracts registers `a`, `b` with the bra of `bell` (`bell[(m, n)]` the amplitude on `|m⟩_a|n⟩_b`).
    fn project_pair(&self, a: usize, b: usize, bell: &CMatrix) -> Registers {
        let positions = [self.position(a), self.position(b)];
        let offsets = self.offsets(&positions);
        let bra: Vec<_> = (0..offsets.len()).map(|k| bell[(k / bell.ncols(), k % bell.ncols())].conj()).collect();
        let bases = self.bases(&positions);
        let amp = CVector::from_iterator(
            bases.len(),
            bases.iter().map(|&base| offsets.iter().zip(&bra).map(|(&o, w)| w * self.amp[base + o]).sum()),
        );
        let keep: Vec<usize> = (0..self.dims.len()).filter(|p| !positions.contains(p)).collect();
        Registers {
            dims: keep.iter().map(|&p| self.dims[p]).collect(),
            ids: keep.iter().map(|&p| self.ids[p]).collect(),
            amp,
            next_id: self.next_id,
        }
    }

    /// Readout probabilities with the listed registers in the given order; all registers must be listed.
    fn probabilities(&self, ids: &[usize]) -> Vec<f64> {
        assert_eq!(ids.len(), self.ids.len(), "readout must cover every register");
        let positions: Vec<usize> = ids.iter().map(|&i| self.position(i)).collect();
        let offsets = self.offsets(&positions);
        offsets.iter().map(|&o| self.amp[o].norm_sqr()).collect()
    }
}

/// Bell states `(𝟙 ⊗ W_k)|Φ⟩` with the distortion label left on the receiver's half.
///
/// Projecting onto `(𝟙 ⊗ W)|Φ⟩` leaves `W̄` on the output. For qubits `σ̄_k ∝ σ_k`,
/// so the label is the Pauli index; for qudits `X^x Z^z` becomes `X^x Z^{−z}` up to phase.
fn bell_states(d: usize, weyl_labels: bool) -> Vec<(usize, CMatrix)> {
    let s = 1.0 / (d as f64).sqrt();
    let amplitudes = |w: &CMatrix| CMatrix::from_fn(d, d, |m, n| w[(n, m)] * c(s, 0.0));
    if !weyl_labels {
        Pauli::ALL.iter().map(|p| (p.index(), amplitudes(&p.matrix()))).collect()
    } else {
        let mut out = Vec::with_capacity(d * d);
        for x in 0..d {
            for z in 0..d {
                out.push((x * d + (d - z) % d, amplitudes(&weyl(d, x, z))));
            }
        }
        out
    }
}

/// Teleports each listed register through its own fresh ebit.
fn teleport_all(reg: &Registers, ids: &[usize], d: usize, weyl_labels: bool, spent: &mut BTreeSet<String>, tag: &str) -> Vec<(Vec<usize>, Registers, Vec<usize>)> {
    let mut level = vec![(Vec::new(), reg.clone(), Vec::new())];
    for (k, &id) in ids.iter().enumerate() {
        spent.insert(format!("{tag}{k}"));
        let bells = bell_states(d, weyl_labels);
        let mut next = Vec::with_capacity(level.len() * bells.len());
        for (labels, r, moved) in level {
            let mut with = r.clone();
            let (e1, e2) = with.append_ebit(d);
            for (label, bell) in &bells {
                let out = with.project_pair(id, e1, bell);
                let mut l: Vec<usize> = labels.clone();
                l.push(*label);
                let mut mv: Vec<usize> = moved.clone();
                mv.push(e2);
                next.push((l, out, mv));
            }
        }
        level = next;
    }
    level
}

fn sigma(i: usize) -> CMatrix {
    Pauli::from_index(i).matrix()
}

fn sigmas(idx: &[usize]) -> CMatrix {
    kron_all(&idx.iter().map(|&i| sigma(i)).collect::<Vec<_>>())
}

/// Pauli index of `σ_p σ_q` up to phase.
fn pauli_product(p: usize, q: usize) -> usize {
    let (px, pz) = Pauli::from_index(p).bits();
    let (qx, qz) = Pauli::from_index(q).bits();
    Pauli::from_bits(px ^ qx, pz ^ qz).index()
}

/// Neumaier-compensated running sum; protocol trees have up to ~10⁵ leaves.
#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    sum: f64,
    carry: f64,
}

impl Accumulator {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// How the Referee maps a leaf's readout to an outcome.
enum Decoder {
    Certificate(Vec<usize>),
    /// The leaf state is `σ_s M†ψ`; the readout is relabelled by that Pauli string.
    Pauli(Vec<usize>),
}

struct Leaf {
    outcomes: Vec<usize>,
    decoder: Decoder,
    readout: Vec<f64>,
}

fn simulate_pure(u: &CMatrix, scenario: Scenario, level: usize, psi: &CVector, spent: &mut BTreeSet<String>) -> Vec<Leaf> {
    let ud = dagger(u);
    let mut leaves = Vec::new();
    match (scenario, level) {
        (Scenario::Bipartite, 1) | (Scenario::Qudit(_), 1) => {
            let d = scenario.dims()[0];
            let qudit = matches!(scenario, Scenario::Qudit(_));
            let (reg, ids) = Registers::new(psi, &[d, d]);
            for (lb, mut r, moved) in teleport_all(&reg, &[ids[1]], d, qudit, spent, "bob:") {
                let regs = [ids[0], moved[0]];
                r.apply(&ud, &regs);
                let label = if qudit { vec![lb[0] / d, lb[0] % d] } else { lb.clone() };
                leaves.push(Leaf { outcomes: lb, decoder: Decoder::Certificate(label), readout: r.probabilities(&regs) });
            }
        }
        (Scenario::Bipartite, 2) | (Scenario::Bipartite, 3) => {
            let (reg, ids) = Registers::new(psi, &[2, 2]);
            let mbs: Vec<CMatrix> = (0..4).map(|b| &ud * kron(&CMatrix::identity(2, 2), &sigma(b)) * u).collect();
            for (lb, mut r, moved) in teleport_all(&reg, &[ids[1]], 2, false, spent, "bob:") {
                let b = lb[0];
                r.apply(&ud, &[ids[0], moved[0]]);
                for (la, mut r2, at_bob) in teleport_all(&r, &[ids[0], moved[0]], 2, false, spent, "alice:") {
                    r2.apply(&mbs[b], &at_bob);
                    let outcomes: Vec<usize> = lb.iter().chain(&la).copied().collect();
                    if level == 2 {
                        let label = vec![la[0], la[1], b];
                        leaves.push(Leaf { outcomes, decoder: Decoder::Certificate(label), readout: r2.probabilities(&at_bob) });
                    } else if b == 0 {
                        leaves.push(Leaf { outcomes, decoder: Decoder::Pauli(la.clone()), readout: r2.probabilities(&at_bob) });
                    } else {
                        // Bob sends through port b; Alice undoes ℳ_{a,b} = ℳ_b† σ_a ℳ_b for that port.
                        let mab = dagger(&mbs[b]) * sigmas(&la) * &mbs[b];
                        let tag = format!("bob-port{b}:");
                        for (lbb, mut r3, at_alice) in teleport_all(&r2, &at_bob, 2, false, spent, &tag) {
                            r3.apply(&dagger(&mab), &at_alice);
                            let label = vec![la[0], la[1], lbb[0], lbb[1], b];
                            let out: Vec<usize> = outcomes.iter().chain(&lbb).copied().collect();
                            leaves.push(Leaf { outcomes: out, decoder: Decoder::Certificate(label), readout: r3.probabilities(&at_alice) });
                        }
                    }
                }
            }
        }
        (Scenario::Tripartite, 1) | (Scenario::Tripartite, 2) => {
            let (reg, ids) = Registers::new(psi, &[2, 2, 2]);
            for (lbc, mut r, moved) in teleport_all(&reg, &[ids[1], ids[2]], 2, false, spent, "bob-cindy:") {
                let (b0, c0) = (lbc[0], lbc[1]);
                let at_alice = [ids[0], moved[0], moved[1]];
                r.apply(&ud, &at_alice);
                if level == 1 {
                    leaves.push(Leaf { outcomes: lbc.clone(), decoder: Decoder::Certificate(lbc), readout: r.probabilities(&at_alice) });
                    continue;
                }
                let mbc = &ud * kron(&CMatrix::identity(2, 2), &kron(&sigma(b0), &sigma(c0))) * u;
                for (la, r2, at_bob) in teleport_all(&r, &at_alice, 2, false, spent, "alice:") {
                    let tag = format!("bob-port{b0}:");
                    for (lb, mut r3, at_cindy) in teleport_all(&r2, &at_bob, 2, false, spent, &tag) {
                        r3.apply(&mbc, &at_cindy);
                        let mut label = vec![b0, c0];
                        label.extend((0..3).map(|k| pauli_product(lb[k], la[k])));
                        let outcomes: Vec<usize> = lbc.iter().chain(&la).chain(&lb).copied().collect();
                        leaves.push(Leaf { outcomes, decoder: Decoder::Certificate(label), readout: r3.probabilities(&at_cindy) });
                    }
                }
            }
        }
        _ => {}
    }
    leaves
}

/// Ebits the protocol allocates, including ports that a given run leaves idle.
fn allocated(scenario: Scenario, level: usize) -> BTreeSet<String> {
    let mut s = BTreeSet::new();
    let mut add = |tag: &str, n: usize| {
        for k in 0..n {
            s.insert(format!("{tag}{k}"));
        }
    };
    match (scenario, level) {
        (Scenario::Bipartite, 1) | (Scenario::Qudit(_), 1) => add("bob:", 1),
        (Scenario::Bipartite, 2) => {
            add("bob:", 1);
            add("alice:", 2);
        }
        (Scenario::Bipartite, 3) => {
            add("bob:", 1);
            add("alice:", 2);
            for b in 1..4 {
                add(&format!("bob-port{b}:"), 2);
            }
        }
        (Scenario::Tripartite, 1) => add("bob-cindy:", 2),
        (Scenario::Tripartite, 2) => {
            add("bob-cindy:", 2);
            add("alice:", 3);
            for b in 0..4 {
                add(&format!("bob-port{b}:"), 3);
            }
        }
        _ => {}
    }
    s
}

fn simulate(m: &MeasurementBasis, cert: &LocalizabilityCertificate, psi: &InputState, scenario_ok: fn(Scenario) -> bool) -> Result<ProtocolTrace> {
    if !scenario_ok(cert.scenario) {
        return Err(Error::CertificateMismatch(format!("{} certificate for this protocol", cert.scenario.name())));
    }
    if m.dims != cert.scenario.dims() {
        return Err(Error::CertificateMismatch(format!("measurement dims {:?} vs {}", m.dims, cert.scenario.name())));
    }
    if psi.dim() != m.order() {
        return Err(Error::Dimension(format!("state of dimension {} for a measurement of order {}", psi.dim(), m.order())));
    }
    let cost = cert
        .scenario
        .cost(cert.level)
        .ok_or_else(|| Error::Unsupported(format!("level {} for {}", cert.level, cert.scenario.name())))?;
    // A class certificate holds for a transformed representative; the parties
    // rotate their inputs locally and run the protocol on that representative.
    let (u, transform) = match &cert.representative {
        Some(w) => (w.matrix.clone(), Some(kron_all(&w.locals) * party_permutation(&m.dims, &w.party_order))),
        None => (m.matrix.clone(), None),
    };
    let n = m.outcomes();
    let mut decoded = vec![Accumulator::default(); n];
    let mut branches: Vec<BranchRecord> = Vec::new();
    let mut spent = BTreeSet::new();
    let mut total = Accumulator::default();
    for (w, v) in psi.components()? {
        let v = match &transform {
            Some(t) => t * v,
            None => v,
        };
        let leaves = simulate_pure(&u, cert.scenario, cert.level, &v, &mut spent);
        let fresh = branches.is_empty();
        for (k, leaf) in leaves.into_iter().enumerate() {
            let pauli_perm = match &leaf.decoder {
                Decoder::Pauli(s) => Some(as_perm_with_phases(&sigmas(s), PERM_TOL).expect("Pauli strings are monomial")),
                Decoder::Certificate(_) => None,
            };
            for (obs, &p) in leaf.readout.iter().enumerate() {
                let cc = match (&leaf.decoder, &pauli_perm) {
                    (Decoder::Certificate(label), _) => cert.decode(label, obs).ok_or_else(|| {
                        Error::CertificateMismatch(format!("no decode entry for label {label:?}"))
                    })?,
                    (Decoder::Pauli(_), Some(pp)) => pp.preimage(obs),
                    _ => unreachable!(),
                };
                decoded[cc].add(w * p);
                total.add(w * p);
            }
            let weight: f64 = leaf.readout.iter().sum();
            let label = match leaf.decoder {
                Decoder::Certificate(l) | Decoder::Pauli(l) => l,
            };
            if fresh {
                branches.push(BranchRecord {
                    outcomes: leaf.outcomes,
                    label,
                    weight: w * weight,
                    readout: leaf.readout.iter().map(|p| w * p).collect(),
                });
            } else {
                let b = &mut branches[k];
                b.weight += w * weight;
                for (acc, p) in b.readout.iter_mut().zip(&leaf.readout) {
                    *acc += w * p;
                }
            }
        }
    }
    let declared = allocated(cert.scenario, cert.level);
    if !spent.is_subset(&declared) || declared.len() != cost {
        return Err(Error::Numerical(format!(
            "ebit ledger: {} declared, {} used, certificate cost {cost}",
            declared.len(),
            spent.len()
        )));
    }
    Ok(ProtocolTrace {
        scenario: cert.scenario.name(),
        level: cert.level,
        ebits: declared.len(),
        branches,
        decoded: decoded.into_iter().map(Accumulator::value).collect(),
        total_probability: total.value(),
    })
}

/// One-ebit protocol: Bob teleports his share to Alice, who applies `M†` and reads out.
pub fn simulate_level1(m: &MeasurementBasis, cert: &LocalizabilityCertificate, psi: &InputState) -> Result<ProtocolTrace> {
    if cert.level != 1 {
        return Err(Error::CertificateMismatch(format!("level-{} certificate for the one-ebit protocol", cert.level)));
    }
    simulate(m, cert, psi, |s| matches!(s, Scenario::Bipartite | Scenario::Qudit(_)))
}

/// Three-ebit protocol; also runs the nine-ebit continuation for level-3 certificates.
pub fn simulate_level2(m: &MeasurementBasis, cert: &LocalizabilityCertificate, psi: &InputState) -> Result<ProtocolTrace> {
    if cert.level != 2 && cert.level != 3 {
        return Err(Error::CertificateMismatch(format!("level-{} certificate for the three-ebit protocol", cert.level)));
    }
    simulate(m, cert, psi, |s| s == Scenario::Bipartite)
}

pub fn simulate_tripartite(m: &MeasurementBasis, cert: &LocalizabilityCertificate, psi: &InputState, level: usize) -> Result<ProtocolTrace> {
    if cert.level != level {
        return Err(Error::CertificateMismatch(format!("level-{} certificate, level {level} requested", cert.level)));
    }
    simulate(m, cert, psi, |s| s == Scenario::Tripartite)
}

/// Dispatches on the certificate's scenario and level.
pub fn simulate_certificate(m: &MeasurementBasis, cert: &LocalizabilityCertificate, psi: &InputState) -> Result<ProtocolTrace> {
    match (cert.scenario, cert.level) {
        (Scenario::Tripartite, l) => simulate_tripartite(m, cert, psi, l),
        (_, 1) => simulate_level1(m, cert, psi),
        _ => simulate_level2(m, cert, psi),
    }
}
