//! Dense linear-algebra helpers shared by the simulator and the encodings.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Number of qubits needed to index `n` items (at least 1 for n ≥ 2, 0 for n = 1).
pub fn qubits_for(n: usize) -> usize {
    let mut q = 0;
    while (1usize << q) < n {
        q += 1;
    }
    q
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Spectral-norm distance `‖a − b‖`.
pub fn operator_norm_distance(a: &CMatrix, b: &CMatrix) -> crate::Result<f64> {
    if a.shape() != b.shape() {
        return Err(crate::Error::dimension(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(spectral_norm(&(a - b)))
}

pub fn real_spectral_norm(m: &RMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Hermitian part `(m + m†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = m.nrows();
    let mut vecs = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    hermitian_function_c(m, |x| C64::new(f(x), 0.0))
}

pub fn hermitian_function_c(m: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&x| f(x)),
    ));
    &vecs * diag * vecs.adjoint()
}

/// `exp(−i·h·t)` for Hermitian `h`.
pub fn unitary_evolution(h: &CMatrix, t: f64) -> CMatrix {
    hermitian_function_c(h, |x| C64::from_polar(1.0, -x * t))
}

pub fn is_unitary(u: &CMatrix, tol: f64) -> bool {
    if !u.is_square() {
        return false;
    }
    let id = CMatrix::identity(u.nrows(), u.ncols());
    (u.adjoint() * u - id).iter().all(|z| z.norm() <= tol)
}

/// Unitary dilation `[[A, √(I−AA†)], [√(I−A†A), −A†]]` of a contraction.
pub fn unitary_dilation(a: &CMatrix) -> crate::Result<CMatrix> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(crate::Error::dimension("dilation needs a square block"));
    }
    let norm = spectral_norm(a);
    if norm > 1.0 + 1e-10 {
        return Err(crate::Error::Range(format!(
            "block norm {norm} exceeds 1; cannot dilate"
        )));
    }
    let id = CMatrix::identity(n, n);
    let left = hermitian_function(&(&id - a * a.adjoint()), |x| x.max(0.0).sqrt());
    let right = hermitian_function(&(&id - a.adjoint() * a), |x| x.max(0.0).sqrt());
    let mut u = CMatrix::zeros(2 * n, 2 * n);
    u.view_mut((0, 0), (n, n)).copy_from(a);
    u.view_mut((0, n), (n, n)).copy_from(&left);
    u.view_mut((n, 0), (n, n)).copy_from(&right);
    u.view_mut((n, n), (n, n)).copy_from(&(-a.adjoint()));
    Ok(u)
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Gershgorin bound on the spectral radius of a Hermitian matrix.
pub fn gershgorin_radius(m: &CMatrix) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qubit_counts() {
        assert_eq!(qubits_for(1), 0);
        assert_eq!(qubits_for(2), 1);
        assert_eq!(qubits_for(3), 2);
        assert_eq!(qubits_for(4), 2);
        assert_eq!(qubits_for(5), 3);
    }

    #[test]
    fn distance_trivial_cases() {
        let id = CMatrix::identity(2, 2);
        assert!(operator_norm_distance(&id, &id).unwrap() < 1e-15);
        let z = CMatrix::zeros(2, 2);
        assert!((operator_norm_distance(&id, &z).unwrap() - 1.0).abs() < 1e-15);
        assert!(operator_norm_distance(&id, &CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn dilation_is_unitary() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.3, 0.1), C64::new(-0.2, 0.0), C64::new(0.1, 0.4), C64::new(0.5, 0.0)],
        );
        let u = unitary_dilation(&a).unwrap();
        assert!(is_unitary(&u, 1e-12));
        assert!((u.view((0, 0), (2, 2)) - &a).norm() < 1e-14);
    }
}
