use nalgebra::{DMatrix, DVector};

/// Minimum-norm least-squares solution via SVD, discarding singular values
/// below `rel_tol · σ_max`.
pub(crate) fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if !smax.is_finite() || smax == 0.0 {
        return None;
    }
    svd.solve(b, rel_tol * smax).ok()
}

/// `(AᵀA + μ I) x = Aᵀ b` with `μ = level · ‖A‖_F²`.
pub(crate) fn tikhonov_solve(a: &DMatrix<f64>, b: &DVector<f64>, level: f64) -> Option<DVector<f64>> {
    let at = a.transpose();
    let mut normal = &at * a;
    let mu = level * a.norm_squared().max(1e-300);
    for i in 0..normal.nrows() {
        normal[(i, i)] += mu;
    }
    normal.cholesky().map(|c| c.solve(&(at * b)))
}
