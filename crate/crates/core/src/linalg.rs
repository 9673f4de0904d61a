//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub fn vector(xs: &[f64]) -> Vector {
    DVector::from_column_slice(xs)
}

/// `x - (x, v) v` for unit `v`.
pub fn project_orthogonal(x: &Vector, v: &Vector) -> Vector {
    x - v * x.dot(v)
}

/// Orthonormal basis of the complement of unit `n`, built by Gram-Schmidt of the
/// standard basis against `n`, skipping the axis most aligned with `n`.
pub fn orthonormal_complement(n: &Vector) -> Vec<Vector> {
    let d = n.len();
    let skip = n.iamax();
    let mut basis: Vec<Vector> = Vec::with_capacity(d.saturating_sub(1));
    for axis in (0..d).filter(|&i| i != skip) {
        let mut e = Vector::zeros(d);
        e[axis] = 1.0;
        e -= n * n.dot(&e);
        for b in &basis {
            let c = b.dot(&e);
            e -= b * c;
        }
        let norm = e.norm();
        basis.push(e / norm);
    }
    basis
}

/// Gram-Schmidt of `vectors` against the orthonormal set `against` (and each other).
pub fn gram_schmidt(vectors: &[Vector], against: &[Vector]) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut e = v.clone();
        for b in against.iter().chain(out.iter()) {
            let c = b.dot(&e);
            e -= b * c;
        }
        let norm = e.norm();
        out.push(e / norm);
    }
    out
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Sorted (descending) eigenvalues and matching eigenvectors of a symmetric matrix.
pub fn sorted_eigen(m: &Matrix) -> (Vec<f64>, Vec<Vector>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = idx
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (values, vectors)
}

pub fn largest_singular_value(m: &Matrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Minimum-norm least-squares solution of `a x = b` plus the condition number of `a`.
pub fn least_squares(a: &Matrix, b: &Vector) -> (Vector, f64) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let eps = smax * 1e-12;
    let x = svd
        .solve(b, eps)
        .unwrap_or_else(|_| Vector::zeros(a.ncols()));
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    (x, cond)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_is_orthonormal() {
        let n = vector(&[0.3, -0.4, 0.5]).normalize();
        let basis = orthonormal_complement(&n);
        assert_eq!(basis.len(), 2);
        for (i, b) in basis.iter().enumerate() {
            assert!(b.dot(&n).abs() < 1e-15);
            assert!((b.norm() - 1.0).abs() < 1e-15);
            for c in &basis[i + 1..] {
                assert!(b.dot(c).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn complement_is_deterministic() {
        let n = vector(&[0.0, 1.0]);
        let basis = orthonormal_complement(&n);
        assert_eq!(basis[0], vector(&[1.0, 0.0]));
    }

    #[test]
    fn least_squares_underdetermined_is_min_norm() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let (x, _) = least_squares(&a, &vector(&[2.0]));
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
