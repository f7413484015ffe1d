//! Numerical search for measurements that pass the raw localizability checks.
//!
//! The cost `C(M) = Σ_t Σ_ij ||2|f_ij(t, M)| − 1| − 1|` vanishes exactly when every
//! distortion matrix `f(t, M)` has entries of modulus 0 or 1, which for a unitary
//! means a permutation with phases.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::bank::{Provenance, SolvedClass};
use crate::basis::MeasurementBasis;
use crate::equivalence::fingerprint;
use crate::error::{Error, Result};
use crate::linalg::{expi_hermitian, hermitian_from_params, polar_unitary, CMatrix, PERM_TOL};
use crate::localizability::{check_raw, distortion_matrices, DistortionLabel, Scenario};
use crate::optimize::{levenberg_marquardt, nelder_mead, NelderMeadOptions};

/// Cost value with its per-label breakdown.
#[derive(Debug, Clone)]
pub struct CostEval {
    pub scenario: Scenario,
    pub level: usize,
    pub value: f64,
    pub per_label: BTreeMap<DistortionLabel, f64>,
}

fn entry_cost(z: f64) -> f64 {
    ((2.0 * z - 1.0).abs() - 1.0).abs()
}

/// Cost of a raw matrix (no unitarity check).
pub fn cost_matrix(m: &CMatrix, scenario: Scenario, level: usize) -> Result<CostEval> {
    let mut per_label = BTreeMap::new();
    let mut value = 0.0;
    for (label, f) in distortion_matrices(m, scenario, level)? {
        let c: f64 = f.iter().map(|z| entry_cost(z.norm())).sum();
        value += c;
        per_label.insert(label, c);
    }
    Ok(CostEval { scenario, level, value, per_label })
}

pub fn cost(m: &MeasurementBasis, level: usize, scenario: Scenario) -> Result<CostEval> {
    if m.dims != scenario.dims() {
        return Err(Error::Dimension(format!("{:?} is not a {} measurement", m.dims, scenario.name())));
    }
    cost_matrix(&m.matrix, scenario, level)
}

/// Smooth residuals that vanish on the same set as the cost: entries currently
/// closer to the unit circle contribute `|f|² − 1`, the rest their real and
/// imaginary parts.
pub fn residuals(m: &CMatrix, scenario: Scenario, level: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (_, f) in distortion_matrices(m, scenario, level)? {
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
    Ok(out)
}

/// Cost per matrix entry below which [`polish`] is attempted.
pub const POLISH_ENTRY: f64 = 0.02;

fn polish_threshold(eval: &CostEval, n: usize) -> f64 {
    POLISH_ENTRY * (eval.per_label.len() * n * n) as f64
}

/// Refines an approximate solution by Levenberg–Marquardt on the residuals.
pub fn polish(m: &MeasurementBasis, level: usize, scenario: Scenario) -> Result<MeasurementBasis> {
    let n = m.order();
    let eval = cost(m, level, scenario)?;
    if eval.value > polish_threshold(&eval, n) {
        return Err(Error::Numerical(format!("cost {:.3e} too large to polish", eval.value)));
    }
    let chart = |x: &[f64]| {
        let mut full = vec![0.0];
        full.extend_from_slice(x);
        &m.matrix * expi_hermitian(&hermitian_from_params(n, &full))
    };
    let resid = |x: &[f64]| residuals(&chart(x), scenario, level).unwrap_or_default();
    let (x, _) = levenberg_marquardt(resid, &vec![0.0; n * n - 1], 300, 1e-30);
    let u = polar_unitary(&chart(&x))?;
    let out = MeasurementBasis::new(u, m.dims.clone())?;
    let end = cost(&out, level, scenario)?.value;
    if end > 1e-9 {
        return Err(Error::Numerical(format!("polish stalled at cost {end:.3e}")));
    }
    Ok(MeasurementBasis { name: m.name.clone(), ..out })
}

/// Search settings.
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub restarts: usize,
    pub seed: u64,
    pub nelder_mead: NelderMeadOptions,
}

impl SearchOptions {
    pub fn new(restarts: usize, seed: u64) -> Self {
        SearchOptions { restarts, seed, nelder_mead: NelderMeadOptions::default() }
    }
}

/// Random start, Nelder–Mead, polish and raw check for a single restart.
pub fn single_restart(level: usize, scenario: Scenario, seed: u64, opts: NelderMeadOptions) -> Option<MeasurementBasis> {
    let dims = scenario.dims();
    let n: usize = dims.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std::f64::consts::PI).expect("valid normal");
    let x0: Vec<f64> = (0..n * n - 1).map(|_| normal.sample(&mut rng)).collect();
    let unitary = |x: &[f64]| {
        let mut full = vec![0.0];
        full.extend_from_slice(x);
        expi_hermitian(&hermitian_from_params(n, &full))
    };
    let f = |x: &[f64]| cost_matrix(&unitary(x), scenario, level).map(|c| c.value).unwrap_or(f64::INFINITY);
    let min = nelder_mead(f, &x0, opts);
    let basis = MeasurementBasis::new(unitary(&min.x), dims).ok()?;
    let polished = polish(&basis, level, scenario).ok()?;
    check_raw(&polished, scenario, level, PERM_TOL)?;
    Some(polished)
}

/// Runs `restarts` independent searches and returns the distinct classes found,
/// ordered by fingerprint. The result depends only on `(level, scenario, restarts, seed)`.
pub fn search(level: usize, scenario: Scenario, options: SearchOptions) -> Result<Vec<SolvedClass>> {
    if scenario.cost(level).is_none() {
        return Err(Error::Unsupported(format!("level {level} for {}", scenario.name())));
    }
    let found: Vec<Option<MeasurementBasis>> = (0..options.restarts)
        .into_par_iter()
        .map(|r| single_restart(level, scenario, options.seed.wrapping_add(r as u64), options.nelder_mead))
        .collect();
    let mut classes: BTreeMap<_, SolvedClass> = BTreeMap::new();
    for (r, m) in found.into_iter().enumerate() {
        let Some(m) = m else { continue };
        let fp = fingerprint(&m)?;
        classes.entry(fp.clone()).or_insert_with(|| SolvedClass {
            measurement: m,
            level,
            scenario,
            fingerprint: fp,
            provenance: Provenance::Heuristic { seed: options.seed.wrapping_add(r as u64) },
        });
    }
    Ok(classes.into_values().collect())
}

/// Tangles appearing in the nine-ebit classes found by numerical search.
pub fn nine_ebit_tangle_set() -> Vec<f64> {
    let r2 = std::f64::consts::SQRT_2;
    vec![
        0.0,
        1.0,
        0.5,
        0.25,
        0.75,
        0.125,
        0.375,
        0.625,
        (2.0 + r2) / 4.0,
        (2.0 - r2) / 4.0,
        (2.0 + r2) / 8.0,
        (2.0 - r2) / 8.0,
        (3.0 + r2) / 8.0,
        (3.0 - r2) / 8.0,
    ]
}
