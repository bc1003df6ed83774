//! Dense exact diagonalization of small Hamiltonians: ground-truth energies,
//! target states for the ansatz builder, and independent expectation checks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::circuit::QuantumState;
use crate::error::{Error, Result};
use crate::pauli::{ParameterizedHamiltonian, PauliString};

/// Dense matrices are limited to this many qubits (dimension 4096).
pub const MAX_DENSE_QUBITS: usize = 12;

/// The explicit 2^n x 2^n Hermitian matrix of one grid point's Hamiltonian.
#[derive(Clone, Debug)]
pub struct DenseHamiltonian {
    matrix: DMatrix<Complex64>,
    n: usize,
    alpha: usize,
}

impl DenseHamiltonian {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn grid_index(&self) -> usize {
        self.alpha
    }

    /// Rayleigh quotient <psi|H|psi> (real for Hermitian H).
    pub fn expectation(&self, state: &QuantumState) -> Result<f64> {
        if state.num_qubits() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "state on {} qubits, matrix on {}",
                state.num_qubits(),
                self.n
            )));
        }
        let psi = DVector::from_column_slice(state.amplitudes());
        let h_psi = &self.matrix * &psi;
        Ok(psi.dotc(&h_psi).re)
    }

    /// Smallest eigenvalue and a unit-norm eigenvector, with the phase fixed
    /// so the largest-magnitude amplitude is real and positive. For
    /// degenerate ground spaces the eigenvector the decomposition yields is
    /// returned as-is (up to that phase convention).
    pub fn ground_state(&self) -> (f64, QuantumState) {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut best = 0;
        for i in 1..eig.eigenvalues.len() {
            if eig.eigenvalues[i] < eig.eigenvalues[best] {
                best = i;
            }
        }
        let column = eig.eigenvectors.column(best);
        let mut amps: Vec<Complex64> = column.iter().copied().collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in amps.iter_mut() {
            *a /= norm;
        }
        let mut pivot = 0;
        for (k, a) in amps.iter().enumerate() {
            if a.norm() > amps[pivot].norm() {
                pivot = k;
            }
        }
        let phase = amps[pivot] / amps[pivot].norm();
        for a in amps.iter_mut() {
            *a /= phase;
        }
        let state = QuantumState::from_amplitudes(amps).expect("eigenvector is normalized");
        (eig.eigenvalues[best], state)
    }
}

/// Assemble the dense matrix `sum_i c[alpha][i] P_i` for grid point `alpha`.
pub fn dense_matrix(h: &ParameterizedHamiltonian, alpha: usize) -> Result<DenseHamiltonian> {
    let n = h.num_qubits();
    if n > MAX_DENSE_QUBITS {
        return Err(Error::InvalidSize(format!(
            "{n} qubits exceeds the dense-diagonalization cap of {MAX_DENSE_QUBITS}"
        )));
    }
    if alpha >= h.grid().num_points() {
        return Err(Error::InvalidArgument(format!(
            "grid index {alpha} out of range"
        )));
    }
    let dim = 1usize << n;
    let mut matrix = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for (p, &c) in h.paulis().iter().zip(h.coeffs_at(alpha)) {
        if c == 0.0 {
            continue;
        }
        accumulate_pauli(&mut matrix, p, Complex64::new(c, 0.0));
    }
    Ok(DenseHamiltonian { matrix, n, alpha })
}

/// Dense matrix of a single Pauli string (test and cross-check helper).
pub fn dense_pauli(p: &PauliString) -> DMatrix<Complex64> {
    let dim = 1usize << p.num_qubits();
    let mut matrix = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    accumulate_pauli(&mut matrix, p, Complex64::new(1.0, 0.0));
    matrix
}

/// Add `weight * P` into `matrix`, using P|k> = phase(k) |k ^ flip>.
fn accumulate_pauli(matrix: &mut DMatrix<Complex64>, p: &PauliString, weight: Complex64) {
    let (x, y, z) = p.masks();
    let flip = (x | y) as usize;
    let sign_mask = y | z;
    let global = match y.count_ones() % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    let dim = matrix.nrows();
    for k in 0..dim {
        let sign = if ((k as u64 & sign_mask).count_ones()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        matrix[(k ^ flip, k)] += weight * global * sign;
    }
}

/// Exact ground energies for every grid point of a family.
pub fn exact_ground_energies(h: &ParameterizedHamiltonian) -> Result<Vec<f64>> {
    (0..h.grid().num_points())
        .map(|alpha| Ok(dense_matrix(h, alpha)?.ground_state().0))
        .collect()
}
