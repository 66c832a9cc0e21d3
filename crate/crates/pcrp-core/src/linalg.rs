//! Small shared linear-algebra helpers.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

/// Flips `v` so its largest-magnitude component is positive (first one on
/// ties). Makes eigenvector output deterministic across runs.
pub fn canonical_sign(v: &mut DVector<f64>) {
    let mut pivot = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    if v[pivot] < 0.0 {
        v.neg_mut();
    }
}

fn canonical_sign3(v: &mut Vector3<f64>) {
    let mut pivot = 0;
    for i in 1..3 {
        if v[i].abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    if v[pivot] < 0.0 {
        *v = -*v;
    }
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// non-increasing order and sign-canonicalized eigenvectors (as columns).
pub fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eigen = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));

    let values: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eigen.eigenvectors.column(i).clone_owned();
        canonical_sign(&mut v);
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// 3×3 case of [`sorted_symmetric_eigen`].
pub fn sorted_symmetric_eigen3(m: &Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let eigen = m.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));

    let values = [
        eigen.eigenvalues[order[0]],
        eigen.eigenvalues[order[1]],
        eigen.eigenvalues[order[2]],
    ];
    let vectors = order.map(|i| {
        let mut v = Vector3::from(eigen.eigenvectors.fixed_view::<3, 1>(0, i).into_owned());
        canonical_sign3(&mut v);
        v
    });
    (values, vectors)
}
