//! Dense complex linear algebra shared by every other module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`; everything here is a pure
//! function of its inputs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = DVector<Complex64>;

/// Unitarity tolerance for measurement bases.
pub const UNITARY_TOL: f64 = 1e-10;
/// Default tolerance for permutation-with-phases recognition.
pub const PERM_TOL: f64 = 1e-8;
/// Singular values below this are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `e^{i phi}`.
#[inline]
pub fn cis(phi: f64) -> Complex64 {
    Complex64::from_polar(1.0, phi)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMatrix {
    CMatrix::zeros(r, c)
}

/// Builds a matrix from row-major real/imaginary pairs scaled by `scale`.
pub fn from_rows(rows: usize, cols: usize, data: &[Complex64], scale: f64) -> CMatrix {
    assert_eq!(data.len(), rows * cols, "row-major data length");
    CMatrix::from_fn(rows, cols, |i, j| data[i * cols + j] * scale)
}

/// Matrix whose columns are the given vectors.
pub fn from_columns(cols: &[CVector]) -> CMatrix {
    let n = cols.first().map(|v| v.len()).unwrap_or(0);
    CMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of a list, left to right.
pub fn kron_all(ms: &[CMatrix]) -> CMatrix {
    let mut out = identity(1);
    for m in ms {
        out = kron(&out, m);
    }
    out
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// Largest entrywise modulus of `m†m − 𝟙`.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let d = m.adjoint() * m - identity(m.nrows());
    max_abs(&d)
}

pub fn is_unitary(m: &CMatrix, tol: f64) -> bool {
    unitarity_defect(m) <= tol
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

/// Distance between two matrices after removing the best global phase.
pub fn phase_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let ip = trace_product(&a.adjoint(), b);
    let ph = if ip.norm() > 1e-300 { ip / ip.norm() } else { cr(1.0) };
    frobenius(&(a * ph - b))
}

fn digits(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
}

fn undigits(ds: &[usize], dims: &[usize]) -> usize {
    ds.iter().zip(dims).fold(0, |acc, (d, n)| acc * n + d)
}

fn check_dims(m: &CMatrix, dims: &[usize]) -> Result<usize> {
    let n: usize = dims.iter().product();
    if !m.is_square() || m.nrows() != n {
        return Err(Error::Dimension(format!(
            "matrix {}x{} vs subsystem dims {:?}",
            m.nrows(),
            m.ncols(),
            dims
        )));
    }
    Ok(n)
}

/// Partial trace keeping the subsystems listed in `keep` (in their original order).
pub fn partial_trace(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let n = check_dims(m, dims)?;
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Dimension(format!("keep {keep:?} out of range")));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    let kdims: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
    let kn: usize = kdims.iter().product();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep_sorted.contains(k)).collect();
    let mut out = zeros(kn, kn);
    let mut dr = vec![0; dims.len()];
    let mut dc = vec![0; dims.len()];
    let mut kr = vec![0; kdims.len()];
    let mut kc = vec![0; kdims.len()];
    for r in 0..n {
        digits(r, dims, &mut dr);
        for col in 0..n {
            digits(col, dims, &mut dc);
            if traced.iter().any(|&t| dr[t] != dc[t]) {
                continue;
            }
            for (i, &k) in keep_sorted.iter().enumerate() {
                kr[i] = dr[k];
                kc[i] = dc[k];
            }
            out[(undigits(&kr, &kdims), undigits(&kc, &kdims))] += m[(r, col)];
        }
    }
    Ok(out)
}

/// Partial transpose over the subsystems listed in `transposed`.
pub fn partial_transpose(m: &CMatrix, dims: &[usize], transposed: &[usize]) -> Result<CMatrix> {
    let n = check_dims(m, dims)?;
    if transposed.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Dimension(format!("transposed {transposed:?} out of range")));
    }
    let mut out = zeros(n, n);
    let mut dr = vec![0; dims.len()];
    let mut dc = vec![0; dims.len()];
    for r in 0..n {
        digits(r, dims, &mut dr);
        for col in 0..n {
            digits(col, dims, &mut dc);
            let (mut er, mut ec) = (dr.clone(), dc.clone());
            for &t in transposed {
                er[t] = dc[t];
                ec[t] = dr[t];
            }
            out[(undigits(&er, dims), undigits(&ec, dims))] = m[(r, col)];
        }
    }
    Ok(out)
}

/// State vector `(1/√d) Σ_j |jj⟩`.
pub fn max_entangled_vector(d: usize) -> Result<CVector> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("local dimension {d} < 2")));
    }
    let mut v = CVector::zeros(d * d);
    let a = cr(1.0 / (d as f64).sqrt());
    for j in 0..d {
        v[j * d + j] = a;
    }
    Ok(v)
}

/// Density matrix of the maximally entangled state of two qudits.
pub fn max_entangled(d: usize) -> Result<CMatrix> {
    let v = max_entangled_vector(d)?;
    Ok(&v * v.adjoint())
}

/// Orthonormal kernel basis from singular-value thresholding.
pub fn null_space(m: &CMatrix, tol: f64) -> Vec<CVector> {
    let (r, cols) = m.shape();
    if cols == 0 {
        return Vec::new();
    }
    let padded = if r < cols {
        let mut p = zeros(cols, cols);
        p.view_mut((0, 0), (r, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut out = Vec::new();
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s <= tol {
            out.push(vt.row(k).adjoint());
        }
    }
    out
}

/// Unitary factor of the polar decomposition.
pub fn polar_unitary(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension("polar decomposition needs a square matrix".into()));
    }
    let svd = m.clone().svd(true, true);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 || smin <= 1e-12 * smax {
        return Err(Error::Singular);
    }
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    Ok(u * vt)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * cr(0.5);
    let eig = h.symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// `exp(i H)` for Hermitian `H`.
pub fn expi_hermitian(h: &CMatrix) -> CMatrix {
    let (vals, v) = hermitian_eigen(h);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(vals.len(), vals.iter().map(|&x| cis(x))));
    &v * d * v.adjoint()
}

/// Hermitian matrix from `n²` real parameters: diagonal first, then (re, im) of the strict upper triangle.
pub fn hermitian_from_params(n: usize, p: &[f64]) -> CMatrix {
    assert_eq!(p.len(), n * n, "need n^2 parameters");
    let mut h = zeros(n, n);
    for i in 0..n {
        h[(i, i)] = cr(p[i]);
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let z = c(p[k], p[k + 1]);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

/// Haar-random unitary via QR of a complex Ginibre matrix.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { cr(1.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Haar-random pure state.
pub fn haar_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let mut v = CVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    });
    let nrm = v.norm();
    v /= cr(nrm);
    v
}

/// Diagonal matrix of unit-modulus phases.
pub fn phase_diag(phases: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(phases.len(), phases.iter().map(|&p| cis(p))))
}

/// Permutation matrix sending basis vector `j` to `perm[j]`.
pub fn perm_matrix(perm: &[usize]) -> CMatrix {
    let n = perm.len();
    let mut p = zeros(n, n);
    for (j, &i) in perm.iter().enumerate() {
        p[(i, j)] = cr(1.0);
    }
    p
}

/// Key identifying a matrix up to rounding at `resolution`, with global phase fixed
/// by the first entry of largest modulus.
pub fn rounded_key(m: &CMatrix, resolution: f64) -> Vec<i64> {
    let mut best = 0;
    let mut bv = -1.0;
    for (k, z) in m.iter().enumerate() {
        if z.norm() > bv + 1e-7 {
            bv = z.norm();
            best = k;
        }
    }
    let z0 = m.iter().nth(best).copied().unwrap_or(cr(1.0));
    let ph = if z0.norm() > 0.0 { z0.conj() / z0.norm() } else { cr(1.0) };
    let mut key = Vec::with_capacity(2 * m.len() + 2);
    key.push(m.nrows() as i64);
    key.push(m.ncols() as i64);
    for z in m.iter() {
        let w = z * ph;
        key.push((w.re / resolution).round() as i64);
        key.push((w.im / resolution).round() as i64);
    }
    key
}

/// Row-major JSON encoding `{"rows","cols","data":[[re,im],...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        MatrixJson { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.rows == 0 || self.cols == 0 || self.rows * self.cols != self.data.len() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix with {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        if self.data.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let p = self.data[i * self.cols + j];
            c(p[0], p[1])
        }))
    }
}
