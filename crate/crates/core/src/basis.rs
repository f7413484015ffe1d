//! Measurements represented as unitaries whose columns are the eigenvectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{unitarity_defect, CMatrix, CVector, MatrixJson, UNITARY_TOL};

/// A complete projective measurement on `dims` parties, stored as a unitary
/// whose column `c` is the eigenvector of outcome `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBasis {
    pub matrix: CMatrix,
    pub dims: Vec<usize>,
    pub name: Option<String>,
}

impl MeasurementBasis {
    pub fn new(matrix: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if !matrix.is_square() || matrix.nrows() != n || dims.is_empty() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for local dims {:?}",
                matrix.nrows(),
                matrix.ncols(),
                dims
            )));
        }
        let defect = unitarity_defect(&matrix);
        if defect > UNITARY_TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(MeasurementBasis { matrix, dims, name: None })
    }

    /// Two-qubit measurement.
    pub fn qubits2(matrix: CMatrix) -> Result<Self> {
        Self::new(matrix, vec![2, 2])
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }

    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn outcomes(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_two_qubit(&self) -> bool {
        self.dims == [2, 2]
    }

    pub fn column(&self, c: usize) -> CVector {
        self.matrix.column(c).into_owned()
    }

    /// Projector onto outcome `c`.
    pub fn projector(&self, c: usize) -> CMatrix {
        let v = self.column(c);
        &v * v.adjoint()
    }

    /// Born probabilities of a pure state.
    pub fn born(&self, psi: &CVector) -> Vec<f64> {
        (0..self.outcomes()).map(|c| self.column(c).dotc(psi).norm_sqr()).collect()
    }

    /// Born probabilities of a density matrix.
    pub fn born_mixed(&self, rho: &CMatrix) -> Vec<f64> {
        (0..self.outcomes())
            .map(|c| {
                let v = self.column(c);
                (v.adjoint() * rho * &v)[(0, 0)].re
            })
            .collect()
    }
}

/// File format for a measurement: the matrix encoding plus local dimensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisJson {
    #[serde(flatten)]
    pub matrix: MatrixJson,
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
    #[serde(default)]
    pub name: Option<String>,
}

impl BasisJson {
    pub fn from_basis(b: &MeasurementBasis) -> Self {
        BasisJson { matrix: MatrixJson::from_matrix(&b.matrix), dims: Some(b.dims.clone()), name: b.name.clone() }
    }

    /// Missing `dims` default to qubits.
    pub fn to_basis(&self) -> Result<MeasurementBasis> {
        let m = self.matrix.to_matrix()?;
        let dims = match &self.dims {
            Some(d) => d.clone(),
            None => {
                let n = m.nrows();
                if !n.is_power_of_two() || n < 2 {
                    return Err(Error::Dimension(format!("cannot infer qubit dims for order {n}")));
                }
                vec![2; n.trailing_zeros() as usize]
            }
        };
        let mut b = MeasurementBasis::new(m, dims)?;
        b.name = self.name.clone();
        Ok(b)
    }
}
