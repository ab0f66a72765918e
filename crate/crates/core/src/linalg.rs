//! Shared numerical kernels: sparse matrices in CSR form, dense singular
//! value and Hermitian eigendecompositions, and a blocked iterative solver
//! for the extreme eigenvalues of large Gram operators.
//!
//! Everything here is deterministic: iterative solvers draw their start
//! blocks from a caller-supplied seed and all reductions run in fixed order.

use nalgebra::{ComplexField, DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type C64 = Complex<f64>;

/// Problems at or below this dimension use dense decompositions.
pub const DENSE_CUTOFF: usize = 3200;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is empty")]
    Empty,
    #[error("iterative eigensolver did not converge: residual {0:.3e} after {1} iterations")]
    NoConvergence(f64, usize),
    #[error("start block collapsed during orthonormalization")]
    BlockCollapse,
}

/// Accumulates (row, col, value) entries; duplicates sum on build.
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: C64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if value != C64::new(0.0, 0.0) {
            self.rows.push(row);
            self.cols.push(col);
            self.vals.push(value);
        }
    }

    pub fn push_real(&mut self, row: usize, col: usize, value: f64) {
        self.push(row, col, C64::new(value, 0.0));
    }

    pub fn build(self) -> CsrMatrix<C64> {
        let coo = CooMatrix::try_from_triplets(self.nrows, self.ncols, self.rows, self.cols, self.vals)
            .expect("triplet indices validated on push");
        CsrMatrix::from(&coo)
    }
}

/// Conjugate transpose of a CSR matrix.
pub fn adjoint(a: &CsrMatrix<C64>) -> CsrMatrix<C64> {
    let mut t = a.transpose();
    for v in t.values_mut() {
        *v = v.conj();
    }
    t
}

/// y = a * x for a dense block x, one column at a time in index order.
pub fn csr_mul_block<T: ComplexField + Copy>(a: &CsrMatrix<T>, x: &DMatrix<T>) -> DMatrix<T> {
    assert_eq!(a.ncols(), x.nrows());
    let mut y = DMatrix::zeros(a.nrows(), x.ncols());
    for (row, row_view) in a.row_iter().enumerate() {
        let (cols, vals) = (row_view.col_indices(), row_view.values());
        for col in 0..x.ncols() {
            let mut acc = T::zero();
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[(j, col)];
            }
            y[(row, col)] = acc;
        }
    }
    y
}

pub fn csr_mul_vec<T: ComplexField + Copy>(a: &CsrMatrix<T>, x: &[T]) -> Vec<T> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![T::zero(); a.nrows()];
    for (row, row_view) in a.row_iter().enumerate() {
        let mut acc = T::zero();
        for (&j, &v) in row_view.col_indices().iter().zip(row_view.values()) {
            acc += v * x[j];
        }
        y[row] = acc;
    }
    y
}

/// Rescales row i by factors[i] in place.
pub fn scale_rows(a: &mut CsrMatrix<C64>, factors: &[f64]) {
    assert_eq!(a.nrows(), factors.len());
    for (row, mut row_view) in a.row_iter_mut().enumerate() {
        let f = factors[row];
        for v in row_view.values_mut() {
            *v *= f;
        }
    }
}

/// Rescales column j by factors[j] in place.
pub fn scale_cols(a: &mut CsrMatrix<C64>, factors: &[f64]) {
    assert_eq!(a.ncols(), factors.len());
    for mut row_view in a.row_iter_mut() {
        let (cols, vals) = row_view.cols_and_values_mut();
        for (&j, v) in cols.iter().zip(vals) {
            *v *= factors[j];
        }
    }
}

pub fn to_dense(a: &CsrMatrix<C64>) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for (row, row_view) in a.row_iter().enumerate() {
        for (&j, &v) in row_view.col_indices().iter().zip(row_view.values()) {
            m[(row, j)] += v;
        }
    }
    m
}

/// The real part of a matrix whose imaginary entries all vanish.
pub fn try_real(a: &CsrMatrix<C64>) -> Option<CsrMatrix<f64>> {
    if a.values().iter().any(|v| v.im != 0.0) {
        return None;
    }
    let (offsets, cols, vals) = (
        a.row_offsets().to_vec(),
        a.col_indices().to_vec(),
        a.values().iter().map(|v| v.re).collect::<Vec<_>>(),
    );
    Some(
        CsrMatrix::try_from_csr_data(a.nrows(), a.ncols(), offsets, cols, vals)
            .expect("pattern is valid by construction"),
    )
}

/// max_i sum_j |a_ij|, the operator infinity-norm.
pub fn max_abs_row_sum(a: &CsrMatrix<C64>) -> f64 {
    let mut best = 0.0f64;
    for row_view in a.row_iter() {
        let s: f64 = row_view.values().iter().map(|v| v.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Largest |a_ij - b_ij| over all positions.
pub fn max_abs_diff(a: &CsrMatrix<C64>, b: &CsrMatrix<C64>) -> f64 {
    let d = a - b;
    d.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn complexify(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// Largest entry modulus.
pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// All singular values, ascending.
pub fn singular_values_dense(a: &DMatrix<C64>) -> Vec<f64> {
    let svd = a.clone().svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.as_slice().to_vec();
    s.sort_by(|x, y| x.total_cmp(y));
    s
}

/// Singular values (ascending) together with an orthonormal basis of right
/// singular vectors for every value strictly below `threshold`.
pub fn kernel_basis_dense(a: &DMatrix<C64>, threshold: f64) -> (Vec<f64>, DMatrix<C64>) {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let kernel_count = values.iter().filter(|&&s| s < threshold).count();
    let mut basis = DMatrix::zeros(a.ncols(), kernel_count);
    for (out_col, &i) in order.iter().take(kernel_count).enumerate() {
        // Right singular vector = adjoint of row i of V^H.
        for j in 0..a.ncols() {
            basis[(j, out_col)] = v_t[(i, j)].conj();
        }
    }
    (values, basis)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen_dense(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(a.nrows(), a.ncols());
    for (out_col, &i) in order.iter().enumerate() {
        vectors.set_column(out_col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// A Hermitian positive semidefinite operator given by its action on blocks.
pub trait BlockOp<T: ComplexField> {
    fn dim(&self) -> usize;
    fn apply_block(&self, x: &DMatrix<T>) -> DMatrix<T>;
}

/// Gram operator A^H A of a sparse matrix.
pub struct GramOp<T: ComplexField + Copy> {
    a: CsrMatrix<T>,
    a_adj: CsrMatrix<T>,
}

impl GramOp<C64> {
    pub fn new(a: CsrMatrix<C64>) -> Self {
        let a_adj = adjoint(&a);
        Self { a, a_adj }
    }
}

impl GramOp<f64> {
    pub fn new_real(a: CsrMatrix<f64>) -> Self {
        let a_adj = a.transpose();
        Self { a, a_adj }
    }
}

impl<T: ComplexField<RealField = f64> + Copy> GramOp<T> {
    /// Column sums of |a_ij|^2: the diagonal of A^H A, used as a Jacobi
    /// preconditioner.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0f64; self.a.ncols()];
        for row_view in self.a.row_iter() {
            for (&j, &v) in row_view.col_indices().iter().zip(row_view.values()) {
                diag[j] += v.modulus_squared();
            }
        }
        diag
    }
}

impl<T: ComplexField + Copy> BlockOp<T> for GramOp<T> {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn apply_block(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let ax = csr_mul_block(&self.a, x);
        csr_mul_block(&self.a_adj, &ax)
    }
}

/// Twice-iterated modified Gram-Schmidt. Columns that collapse below the
/// drop tolerance are removed; returns the surviving orthonormal block.
fn orthonormalize<T: ComplexField<RealField = f64> + Copy>(block: &DMatrix<T>) -> DMatrix<T> {
    let n = block.nrows();
    let mut kept: Vec<DVector<T>> = Vec::with_capacity(block.ncols());
    for col in block.column_iter() {
        let mut v: DVector<T> = col.into_owned();
        let original_norm = v.norm();
        for _ in 0..2 {
            for q in &kept {
                let proj = q.dotc(&v);
                v -= q * proj;
            }
        }
        let norm = v.norm();
        if norm > original_norm.max(1e-300) * 1e-8 {
            kept.push(v / T::from_real(norm));
        }
    }
    let mut out = DMatrix::zeros(n, kept.len());
    for (i, q) in kept.iter().enumerate() {
        out.set_column(i, q);
    }
    out
}

#[derive(Debug, Clone)]
pub struct IterativeSpectrum {
    /// Converged smallest eigenvalues of the operator, ascending.
    pub eigenvalues: Vec<f64>,
    /// Final residual norms, one per reported eigenvalue.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Smallest `k` eigenvalues of a Hermitian PSD block operator by a locally
/// optimal block preconditioned conjugate gradient iteration with a Jacobi
/// preconditioner and a deterministic start block.
pub fn lobpcg_smallest<T: ComplexField<RealField = f64> + Copy>(
    op: &impl BlockOp<T>,
    precond_diag: &[f64],
    k: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<IterativeSpectrum, LinalgError> {
    let n = op.dim();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    let block = (k + (k / 2).max(4)).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::<T>::zeros(n, block);
    for j in 0..block {
        for i in 0..n {
            x[(i, j)] = T::from_real(rng.gen_range(-1.0..1.0));
        }
    }
    let mut x = orthonormalize(&x);
    if x.ncols() < k {
        return Err(LinalgError::BlockCollapse);
    }
    let inv_diag: Vec<f64> = precond_diag
        .iter()
        .map(|&d| if d > 1e-300 { 1.0 / d } else { 1.0 })
        .collect();

    let mut p: Option<DMatrix<T>> = None;
    let mut last_residual = f64::INFINITY;
    for iter in 0..max_iter {
        let ax = op.apply_block(&x);
        // Rayleigh quotients and residuals for the current block.
        let lambda: Vec<f64> = (0..x.ncols())
            .map(|j| x.column(j).dotc(&ax.column(j)).real())
            .collect();
        let mut r = ax.clone();
        for j in 0..x.ncols() {
            let lj = T::from_real(lambda[j]);
            for i in 0..n {
                r[(i, j)] -= lj * x[(i, j)];
            }
        }
        let scale = lambda.iter().cloned().fold(1.0f64, f64::max);
        let mut worst = 0.0f64;
        for j in 0..k.min(x.ncols()) {
            worst = worst.max(r.column(j).norm() / scale);
        }
        last_residual = worst;
        if worst < tol {
            let mut eigenvalues = lambda[..k].to_vec();
            eigenvalues.sort_by(f64::total_cmp);
            let residuals = (0..k).map(|j| r.column(j).norm()).collect();
            return Ok(IterativeSpectrum {
                eigenvalues,
                residuals,
                iterations: iter,
            });
        }
        // Preconditioned residuals extend the search space.
        let mut w = r;
        for j in 0..w.ncols() {
            for i in 0..n {
                w[(i, j)] *= T::from_real(inv_diag[i]);
            }
        }
        let mut basis = DMatrix::zeros(
            n,
            x.ncols() + w.ncols() + p.as_ref().map_or(0, |p| p.ncols()),
        );
        basis.columns_mut(0, x.ncols()).copy_from(&x);
        basis.columns_mut(x.ncols(), w.ncols()).copy_from(&w);
        if let Some(p) = &p {
            basis
                .columns_mut(x.ncols() + w.ncols(), p.ncols())
                .copy_from(p);
        }
        let v = orthonormalize(&basis);
        if v.ncols() < k {
            return Err(LinalgError::BlockCollapse);
        }
        let av = op.apply_block(&v);
        let mut small = v.adjoint() * &av;
        // Symmetrize to scrub rounding before the dense eigensolve.
        small = (small.clone() + small.adjoint()) * T::from_real(0.5);
        let eig = small.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let take = block.min(v.ncols());
        let mut y = DMatrix::zeros(v.ncols(), take);
        for (out, &idx) in order.iter().take(take).enumerate() {
            y.set_column(out, &eig.eigenvectors.column(idx));
        }
        let x_new = &v * &y;
        // Direction block: the part of the update orthogonal to the old x.
        let overlap = x.adjoint() * &x_new;
        let mut direction = x_new.clone();
        direction -= &x * overlap;
        let direction = orthonormalize(&direction);
        p = if direction.ncols() > 0 {
            Some(direction)
        } else {
            None
        };
        x = orthonormalize(&x_new);
    }
    Err(LinalgError::NoConvergence(last_residual, max_iter))
}

/// Largest eigenvalue of a Hermitian PSD block operator by power iteration
/// with a deterministic start vector.
pub fn power_largest<T: ComplexField<RealField = f64> + Copy>(
    op: &impl BlockOp<T>,
    iters: usize,
    seed: u64,
) -> f64 {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::<T>::zeros(n, 1);
    for i in 0..n {
        x[(i, 0)] = T::from_real(rng.gen_range(-1.0..1.0));
    }
    let mut lambda = 0.0f64;
    for _ in 0..iters {
        let norm = x.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x /= T::from_real(norm);
        let ax = op.apply_block(&x);
        lambda = x.column(0).dotc(&ax.column(0)).real();
        x = ax;
    }
    lambda.max(0.0)
}
