//! Small dense symmetric eigendecomposition helpers shared by the solvers.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending,
/// eigenvectors as the corresponding columns of the returned matrix.
///
/// Panics on non-finite input; callers validate first.
pub(crate) fn eigh_descending(sym: &ArrayView2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = sym.nrows();
    assert_eq!(n, sym.ncols(), "matrix must be square");
    assert!(
        sym.iter().all(|v| v.is_finite()),
        "eigendecomposition of non-finite matrix"
    );
    let m = DMatrix::from_row_iterator(n, n, sym.iter().copied());
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("non-finite eigenvalue")
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[[r, dst]] = eig.eigenvectors[(r, src)];
        }
    }
    (values, vectors)
}

/// Singular values of an arbitrary matrix, descending, computed from the
/// eigenvalues of the small-side Gram matrix.
pub(crate) fn singular_values(m: &ArrayView2<f64>) -> Vec<f64> {
    let gram = if m.nrows() <= m.ncols() {
        m.dot(&m.t())
    } else {
        m.t().dot(m)
    };
    let (vals, _) = eigh_descending(&gram.view());
    vals.into_iter().map(|v| v.max(0.0).sqrt()).collect()
}

/// Sum of singular values.
pub(crate) fn nuclear_norm(m: &ArrayView2<f64>) -> f64 {
    singular_values(m).iter().sum()
}

/// Number of singular values above `rel_tol` times the largest one.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn numerical_rank(m: &ArrayView2<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&top) if top > 0.0 => sv.iter().filter(|&&s| s > rel_tol * top).count(),
        _ => 0,
    }
}

/// Solves the symmetric positive-definite system `A x = b` for several
/// right-hand sides via Cholesky. Returns `None` when `A` is not PD.
pub(crate) fn solve_spd(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.nrows());
    let am = DMatrix::from_row_iterator(n, n, a.iter().copied());
    let bm = DMatrix::from_row_iterator(n, b.ncols(), b.iter().copied());
    let chol = am.cholesky()?;
    let x = chol.solve(&bm);
    Some(Array2::from_shape_fn((n, b.ncols()), |(i, j)| x[(i, j)]))
}
