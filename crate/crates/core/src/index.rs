//! Kernel dimensions, spectral gaps, and graded indices of assembled
//! operators, plus the experiment drivers built on top of them.

use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{
    self, lobpcg_smallest, max_abs, power_largest, singular_values_dense, to_dense, GramOp,
    LinalgError, TripletBuilder, C64, DENSE_CUTOFF,
};

/// Kernel threshold as a fraction of the largest singular value, used when
/// the caller does not override it.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 1e-6;

/// A grading must anticommute with the operator to this absolute tolerance.
pub const ANTICOMMUTATOR_TOL: f64 = 1e-8;

/// Width of the cluster band around the threshold, in units of machine
/// epsilon times the largest value. A spectral value inside the band means
/// the threshold cannot cleanly separate kernel from cokernel.
pub const CLUSTER_EPS_FACTOR: f64 = 10.0;

/// A spectral report is inconclusive when the gap above the threshold or the
/// headroom below it shrinks under this factor.
pub const INCONCLUSIVE_MARGIN: f64 = 10.0;

const ITERATIVE_LOW_COUNT: usize = 8;
const LOBPCG_TOL: f64 = 1e-8;
const LOBPCG_MAX_ITER: usize = 1200;
const POWER_ITERS: usize = 300;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("operator must be square for a spectral report of this kind, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("grading length {0} does not match operator dimension {1}")]
    GradingLength(usize, usize),
    #[error("grading entry {0} is {1}, expected +1 or -1")]
    GradingSign(usize, f64),
    #[error("grading does not anticommute with the operator: max |GD + DG| = {0:.3e}")]
    Anticommutator(f64),
    #[error("relative threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("iterative spectrum saturated: all {0} computed values sit below the threshold, kernel dimension is only bounded below")]
    Saturated(usize),
    #[error("pairing requested against the unit class but no curvature integral was supplied")]
    MissingIntegral,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// What the `values` of a [`SpectralReport`] are.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    /// Moduli of eigenvalues, available when the matrix is real or purely
    /// imaginary so a real Schur decomposition applies.
    EigenvalueMagnitudes,
    /// Singular values; always available and the authority on rank.
    SingularValues,
}

#[derive(Debug, Clone)]
pub struct SpectralReport {
    /// Ascending spectral magnitudes. When `truncated` is set only the
    /// lowest part of the spectrum was computed.
    pub values: Vec<f64>,
    pub kind: ValueKind,
    /// Absolute threshold separating kernel from the rest.
    pub threshold: f64,
    /// Number of values strictly below the threshold (see `values` caveat).
    pub kernel_dim: usize,
    /// Smallest value at or above the threshold, if any was computed.
    pub gap: Option<f64>,
    /// Largest singular value, the scale for the relative threshold.
    pub largest: f64,
    /// Set when a value lies within `CLUSTER_EPS_FACTOR * eps * largest` of
    /// the threshold: the kernel count depends on rounding at that point.
    pub cluster_warning: bool,
    /// True when only the lowest part of the spectrum was computed.
    pub truncated: bool,
}

impl SpectralReport {
    fn from_values(values: Vec<f64>, kind: ValueKind, threshold: f64, largest: f64, truncated: bool) -> Self {
        let kernel_dim = values.iter().filter(|&&v| v < threshold).count();
        let gap = values.iter().copied().find(|&v| v >= threshold);
        let band = CLUSTER_EPS_FACTOR * f64::EPSILON * largest.max(1e-300);
        let cluster_warning = values.iter().any(|&v| (v - threshold).abs() <= band);
        Self {
            values,
            kind,
            threshold,
            kernel_dim,
            gap,
            largest,
            cluster_warning,
            truncated,
        }
    }

    /// True when some computed value sits suspiciously close to the
    /// threshold on a log scale, so the kernel count is fragile.
    pub fn near_threshold(&self) -> bool {
        let below = self
            .values
            .iter()
            .copied()
            .filter(|&v| v < self.threshold)
            .fold(0.0f64, f64::max);
        let crowding_above = self
            .gap
            .map(|g| g < INCONCLUSIVE_MARGIN * self.threshold)
            .unwrap_or(false);
        let crowding_below = below * INCONCLUSIVE_MARGIN > self.threshold && below > 0.0;
        crowding_above || crowding_below
    }
}

fn resolve_relative(rel: Option<f64>) -> Result<f64, IndexError> {
    let rel = rel.unwrap_or(DEFAULT_RELATIVE_THRESHOLD);
    if !(rel > 0.0) || !rel.is_finite() {
        return Err(IndexError::BadThreshold(rel));
    }
    Ok(rel)
}

/// Eigenvalue moduli via a real Schur decomposition, when the matrix is real
/// or purely imaginary. A global factor of i rotates every eigenvalue by a
/// quarter turn without changing its modulus, so both cases reduce to a real
/// matrix. Returns None for a genuinely complex matrix.
fn eigen_magnitudes(dense: &DMatrix<C64>) -> Option<Vec<f64>> {
    if dense.nrows() != dense.ncols() {
        return None;
    }
    let scale = max_abs(dense);
    if scale == 0.0 {
        return Some(vec![0.0; dense.nrows()]);
    }
    let im_max = dense.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let re_max = dense.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    let tol = 1e-13 * scale;
    let real: DMatrix<f64> = if im_max <= tol {
        dense.map(|v| v.re)
    } else if re_max <= tol {
        dense.map(|v| v.im)
    } else {
        return None;
    };
    let eig = real.complex_eigenvalues();
    let mut mags: Vec<f64> = eig.iter().map(|v| v.norm()).collect();
    mags.sort_by(f64::total_cmp);
    Some(mags)
}

/// Full spectral report of an operator: sorted spectral magnitudes, the
/// kernel dimension at the (relative) threshold, and the gap above it.
///
/// Eigenvalue magnitudes are reported when the matrix is real up to a global
/// factor of i; otherwise, and for all rectangular or large matrices, the
/// values are singular values. Kernel dimensions agree between the two views
/// whenever the operator is diagonalizable at zero; singular values are the
/// authority on rank, eigenvalues on the physical spectrum.
pub fn kernel_dim(
    matrix: &CsrMatrix<C64>,
    relative_threshold: Option<f64>,
    seed: u64,
) -> Result<SpectralReport, IndexError> {
    let rel = resolve_relative(relative_threshold)?;
    let (nr, nc) = (matrix.nrows(), matrix.ncols());
    if nr.max(nc) <= DENSE_CUTOFF {
        let dense = to_dense(matrix);
        let singular = padded_singular(&dense);
        let largest = singular.last().copied().unwrap_or(0.0);
        // A zero operator has no scale; everything is kernel.
        let threshold = if largest == 0.0 { f64::MIN_POSITIVE } else { rel * largest };
        let (values, kind) = match eigen_magnitudes(&dense) {
            Some(mags) => (mags, ValueKind::EigenvalueMagnitudes),
            None => (singular, ValueKind::SingularValues),
        };
        Ok(SpectralReport::from_values(values, kind, threshold, largest, false))
    } else {
        let gram = GramOp::new(matrix.clone());
        let largest = power_largest(&gram, POWER_ITERS, seed ^ 0x9e37_79b9).max(0.0).sqrt();
        let threshold = if largest == 0.0 { f64::MIN_POSITIVE } else { rel * largest };
        let k = ITERATIVE_LOW_COUNT.min(nc);
        let diag = gram.diagonal();
        let spectrum = lobpcg_smallest(&gram, &diag, k, LOBPCG_TOL, LOBPCG_MAX_ITER, seed)?;
        let values: Vec<f64> = spectrum
            .eigenvalues
            .iter()
            .map(|&v| v.max(0.0).sqrt())
            .collect();
        let report = SpectralReport::from_values(
            values,
            ValueKind::SingularValues,
            threshold,
            largest,
            true,
        );
        if report.kernel_dim == k && k < nc {
            return Err(IndexError::Saturated(k));
        }
        Ok(report)
    }
}

/// Singular values extended by the zeros the factorization leaves implicit:
/// an m x n matrix with n > m has at least n - m kernel directions that the
/// returned min(m, n) values do not show. The padded list makes "count
/// below threshold" equal the kernel dimension for any shape.
fn padded_singular(dense: &DMatrix<C64>) -> Vec<f64> {
    if dense.nrows() == 0 || dense.ncols() == 0 {
        return vec![0.0; dense.ncols()];
    }
    let singular = singular_values_dense(dense);
    let missing = dense.ncols().saturating_sub(dense.nrows());
    let mut values = vec![0.0; missing];
    values.extend(singular);
    values
}

/// Extract `a[rows, cols]` with indices renumbered in the given order.
fn submatrix(a: &CsrMatrix<C64>, rows: &[usize], cols: &[usize]) -> CsrMatrix<C64> {
    let mut row_of = vec![usize::MAX; a.nrows()];
    for (new, &old) in rows.iter().enumerate() {
        row_of[old] = new;
    }
    let mut col_of = vec![usize::MAX; a.ncols()];
    for (new, &old) in cols.iter().enumerate() {
        col_of[old] = new;
    }
    let mut t = TripletBuilder::new(rows.len(), cols.len());
    for (r, c, &v) in a.triplet_iter() {
        if row_of[r] != usize::MAX && col_of[c] != usize::MAX {
            t.push(row_of[r], col_of[c], v);
        }
    }
    t.build()
}

/// Checks the grading squares to the identity and anticommutes with the
/// operator; returns the measured anticommutator residual.
fn validate_grading(matrix: &CsrMatrix<C64>, grading: &[f64]) -> Result<f64, IndexError> {
    if matrix.nrows() != matrix.ncols() {
        return Err(IndexError::NotSquare(matrix.nrows(), matrix.ncols()));
    }
    if grading.len() != matrix.nrows() {
        return Err(IndexError::GradingLength(grading.len(), matrix.nrows()));
    }
    for (i, &s) in grading.iter().enumerate() {
        if (s.abs() - 1.0).abs() > 1e-12 {
            return Err(IndexError::GradingSign(i, s));
        }
    }
    let mut gd = matrix.clone();
    linalg::scale_rows(&mut gd, grading);
    let mut dg = matrix.clone();
    linalg::scale_cols(&mut dg, grading);
    let sum = &gd + &dg;
    let residual = sum.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if residual > ANTICOMMUTATOR_TOL {
        return Err(IndexError::Anticommutator(residual));
    }
    Ok(residual)
}

#[derive(Debug, Clone)]
pub struct GradedIndexReport {
    /// dim ker(D restricted to the +1 part) - dim ker(D restricted to -1).
    pub index: i64,
    pub plus_kernel: usize,
    pub minus_kernel: usize,
    /// Spectral report of the block mapping the +1 part into the -1 part.
    pub plus: SpectralReport,
    /// Spectral report of the block mapping the -1 part into the +1 part.
    pub minus: SpectralReport,
    /// Measured max |GD + DG|.
    pub anticommutator: f64,
    /// Shared absolute threshold, relative to the larger block norm.
    pub threshold: f64,
}

fn block_report(
    block: &CsrMatrix<C64>,
    threshold: f64,
    largest: f64,
    seed: u64,
) -> Result<SpectralReport, IndexError> {
    let (nr, nc) = (block.nrows(), block.ncols());
    if nc == 0 {
        return Ok(SpectralReport::from_values(
            Vec::new(),
            ValueKind::SingularValues,
            threshold,
            largest,
            false,
        ));
    }
    if nr.max(nc) <= DENSE_CUTOFF {
        let singular = padded_singular(&to_dense(block));
        Ok(SpectralReport::from_values(
            singular,
            ValueKind::SingularValues,
            threshold,
            largest,
            false,
        ))
    } else {
        let gram = GramOp::new(block.clone());
        let k = ITERATIVE_LOW_COUNT.min(nc);
        let diag = gram.diagonal();
        let spectrum = lobpcg_smallest(&gram, &diag, k, LOBPCG_TOL, LOBPCG_MAX_ITER, seed)?;
        let values: Vec<f64> = spectrum
            .eigenvalues
            .iter()
            .map(|&v| v.max(0.0).sqrt())
            .collect();
        let report = SpectralReport::from_values(
            values,
            ValueKind::SingularValues,
            threshold,
            largest,
            true,
        );
        if report.kernel_dim == k && k < nc {
            return Err(IndexError::Saturated(k));
        }
        Ok(report)
    }
}

fn block_largest(block: &CsrMatrix<C64>, seed: u64) -> f64 {
    if block.ncols() == 0 || block.nrows() == 0 {
        return 0.0;
    }
    if block.nrows().max(block.ncols()) <= DENSE_CUTOFF {
        singular_values_dense(&to_dense(block)).last().copied().unwrap_or(0.0)
    } else {
        power_largest(&GramOp::new(block.clone()), POWER_ITERS, seed).max(0.0).sqrt()
    }
}

/// Index of an operator graded by a pointwise sign vector.
///
/// The grading must square to the identity and anticommute with the
/// operator, so the operator exchanges the two sign eigenspaces. The index
/// is the kernel dimension of the block leaving the +1 space minus that of
/// the block leaving the -1 space, both measured at a threshold relative to
/// the larger block norm. Negating the grading swaps the blocks and negates
/// the index.
pub fn graded_index(
    matrix: &CsrMatrix<C64>,
    grading: &[f64],
    relative_threshold: Option<f64>,
    seed: u64,
) -> Result<GradedIndexReport, IndexError> {
    let anticommutator = validate_grading(matrix, grading)?;
    let rel = resolve_relative(relative_threshold)?;
    let plus_idx: Vec<usize> = (0..grading.len()).filter(|&i| grading[i] > 0.0).collect();
    let minus_idx: Vec<usize> = (0..grading.len()).filter(|&i| grading[i] < 0.0).collect();
    // Rows in the target eigenspace, columns in the source eigenspace.
    let d_plus = submatrix(matrix, &minus_idx, &plus_idx);
    let d_minus = submatrix(matrix, &plus_idx, &minus_idx);

    let largest =
        block_largest(&d_plus, seed ^ 0x5bd1_e995).max(block_largest(&d_minus, seed ^ 0xc2b2_ae35));
    let threshold = if largest == 0.0 { f64::MIN_POSITIVE } else { rel * largest };

    let plus = block_report(&d_plus, threshold, largest, seed)?;
    let minus = block_report(&d_minus, threshold, largest, seed.wrapping_add(1))?;
    let plus_kernel = plus.kernel_dim;
    let minus_kernel = minus.kernel_dim;
    Ok(GradedIndexReport {
        index: plus_kernel as i64 - minus_kernel as i64,
        plus_kernel,
        minus_kernel,
        plus,
        minus,
        anticommutator,
        threshold,
    })
}

#[derive(Debug, Clone)]
pub struct HarmonicVanishingReport {
    pub spectral: SpectralReport,
    /// Smallest scalar curvature sample over the retained rows.
    pub min_scalar: f64,
    /// True when the curvature hypothesis (strictly positive scalar) holds.
    pub hypothesis_met: bool,
    /// True when the kernel at the threshold is empty.
    pub kernel_vanishes: bool,
    /// Declared lower bound on the gap, already reduced by the caller's
    /// discretization slack.
    pub gap_bound: Option<f64>,
    /// Whether the measured gap clears the declared bound. None when no
    /// bound was declared or no gap was computed.
    pub gap_exceeds_bound: Option<bool>,
}

/// Checks whether a strictly positive curvature term empties the kernel.
///
/// When the smallest scalar sample is positive the kernel is expected to be
/// empty and the gap to clear `declared_bound - slack` if a bound is given.
/// When the hypothesis fails (a flat background) the report simply records
/// that the conclusion is not implied; a nonzero kernel is then unremarkable.
pub fn harmonic_vanishing_experiment(
    matrix: &CsrMatrix<C64>,
    scalar: &[f64],
    declared_bound: Option<f64>,
    slack: f64,
    relative_threshold: Option<f64>,
    seed: u64,
) -> Result<HarmonicVanishingReport, IndexError> {
    let spectral = kernel_dim(matrix, relative_threshold, seed)?;
    let min_scalar = scalar.iter().copied().fold(f64::INFINITY, f64::min);
    let hypothesis_met = min_scalar > 0.0 && min_scalar.is_finite();
    let kernel_vanishes = spectral.kernel_dim == 0;
    let gap_bound = declared_bound.map(|b| b - slack);
    let gap_exceeds_bound = gap_bound.map(|b| spectral.gap.map(|g| g >= b).unwrap_or(false));
    Ok(HarmonicVanishingReport {
        spectral,
        min_scalar,
        hypothesis_met,
        kernel_vanishes,
        gap_bound,
        gap_exceeds_bound,
    })
}

#[derive(Debug, Clone)]
pub struct PerturbedIndex {
    pub report: GradedIndexReport,
    /// Set when spectral values crowd the threshold, so the kernel count and
    /// hence the index cannot be trusted at this perturbation strength.
    pub inconclusive: bool,
}

#[derive(Debug, Clone)]
pub struct SymbolInvarianceReport {
    pub base: GradedIndexReport,
    pub perturbed: Vec<PerturbedIndex>,
    /// True when every conclusive perturbed index equals the base index.
    pub all_equal: bool,
    pub any_inconclusive: bool,
}

/// Perturbs the operator by the given zero-order terms and recomputes the
/// graded index each time. The grading must anticommute with each
/// perturbation, so each perturbed operator remains graded; that
/// precondition is enforced by the per-operator grading check. A
/// perturbation strong enough to push spectral values into the threshold
/// band is flagged inconclusive rather than failed.
pub fn symbol_invariance_experiment(
    matrix: &CsrMatrix<C64>,
    grading: &[f64],
    perturbations: &[CsrMatrix<C64>],
    relative_threshold: Option<f64>,
    seed: u64,
) -> Result<SymbolInvarianceReport, IndexError> {
    let base = graded_index(matrix, grading, relative_threshold, seed)?;
    let mut perturbed = Vec::with_capacity(perturbations.len());
    let mut all_equal = true;
    let mut any_inconclusive = false;
    for (k, p) in perturbations.iter().enumerate() {
        let shifted = matrix + p;
        let report = graded_index(&shifted, grading, relative_threshold, seed.wrapping_add(k as u64 + 1))?;
        let inconclusive = report.plus.near_threshold() || report.minus.near_threshold();
        if inconclusive {
            any_inconclusive = true;
        } else if report.index != base.index {
            all_equal = false;
        }
        perturbed.push(PerturbedIndex { report, inconclusive });
    }
    Ok(SymbolInvarianceReport {
        base,
        perturbed,
        all_equal,
        any_inconclusive,
    })
}

/// A random zero-order perturbation anticommuting with a pointwise grading.
///
/// The operator is block diagonal over points with `block` rows each; within
/// a block, entries are drawn only where the grading signs of the row and
/// column differ, which is exactly the anticommutation constraint for a
/// diagonal grading. Each block is rescaled so its largest singular value is
/// `norm`, making `norm` the operator norm of the whole perturbation.
pub fn random_odd_perturbation(
    grading: &[f64],
    block: usize,
    norm: f64,
    seed: u64,
) -> CsrMatrix<C64> {
    assert!(block > 0 && grading.len() % block == 0);
    let points = grading.len() / block;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = TripletBuilder::new(grading.len(), grading.len());
    for p in 0..points {
        let base = p * block;
        let mut local = DMatrix::<C64>::zeros(block, block);
        for r in 0..block {
            for c in 0..block {
                if grading[base + r] * grading[base + c] < 0.0 {
                    local[(r, c)] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
        }
        let top = singular_values_dense(&local).last().copied().unwrap_or(0.0);
        if top > 0.0 {
            local *= C64::new(norm / top, 0.0);
        }
        for r in 0..block {
            for c in 0..block {
                if local[(r, c)] != C64::new(0.0, 0.0) {
                    t.push(base + r, base + c, local[(r, c)]);
                }
            }
        }
    }
    t.build()
}

/// What pairing form the integral side of an index comparison used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateForm {
    /// Flat background: the pairing form is the unit class, so the integral
    /// is just the curvature integral.
    FlatUnit,
    /// No candidate form supplied; the comparison is informative only.
    Unknown,
}

#[derive(Debug, Clone)]
pub struct PairingReport {
    pub graded_index: i64,
    pub form: CandidateForm,
    pub integral: Option<f64>,
    /// |integral - index| when a comparison is meaningful.
    pub abs_error: Option<f64>,
    pub note: String,
}

/// Compares a graded index with a curvature integral, when the pairing form
/// needed to interpret the integral is known.
pub fn index_pairing_report(
    graded_index: i64,
    integral: Option<f64>,
    form: CandidateForm,
) -> Result<PairingReport, IndexError> {
    match form {
        CandidateForm::FlatUnit => {
            let integral = integral.ok_or(IndexError::MissingIntegral)?;
            let abs_error = (integral - graded_index as f64).abs();
            Ok(PairingReport {
                graded_index,
                form,
                integral: Some(integral),
                abs_error: Some(abs_error),
                note: "flat background: pairing form is the unit class".to_string(),
            })
        }
        CandidateForm::Unknown => Ok(PairingReport {
            graded_index,
            form,
            integral,
            abs_error: None,
            note: "t(M) unknown: no candidate pairing form supplied, integral not compared"
                .to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_csr(values: &[C64]) -> CsrMatrix<C64> {
        let n = values.len();
        let mut t = TripletBuilder::new(n, n);
        for (i, &v) in values.iter().enumerate() {
            if v != C64::new(0.0, 0.0) {
                t.push(i, i, v);
            }
        }
        t.build()
    }

    fn real_diag(values: &[f64]) -> CsrMatrix<C64> {
        let vals: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        diag_csr(&vals)
    }

    #[test]
    fn zero_operator_is_all_kernel() {
        let z = TripletBuilder::new(5, 5).build();
        let report = kernel_dim(&z, None, 7).unwrap();
        assert_eq!(report.kernel_dim, 5);
        assert_eq!(report.gap, None);
        assert_eq!(report.largest, 0.0);
    }

    #[test]
    fn diagonal_kernel_count_tracks_the_threshold() {
        let d = real_diag(&[0.0, 0.0, 1e-9, 0.5, 2.0]);
        let report = kernel_dim(&d, None, 7).unwrap();
        assert_eq!(report.kernel_dim, 3);
        assert_eq!(report.gap, Some(0.5));
        assert!((report.threshold - 2e-6).abs() < 1e-18);

        let tight = kernel_dim(&d, Some(1e-12), 7).unwrap();
        assert_eq!(tight.kernel_dim, 2);
        assert_eq!(tight.gap, Some(1e-9));
    }

    #[test]
    fn cluster_warning_fires_only_inside_the_rounding_band() {
        let tau = 2e-6;
        let warn = real_diag(&[0.0, tau + 1e-15, 2.0]);
        assert!(kernel_dim(&warn, None, 7).unwrap().cluster_warning);
        let clean = real_diag(&[0.0, tau + 1e-12, 2.0]);
        assert!(!kernel_dim(&clean, None, 7).unwrap().cluster_warning);
    }

    #[test]
    fn nonnormal_real_matrix_reports_eigenvalue_magnitudes() {
        // Shear with eigenvalues {1, 1} but singular values near {1/100, 100}.
        let mut t = TripletBuilder::new(2, 2);
        t.push_real(0, 0, 1.0);
        t.push_real(0, 1, 100.0);
        t.push_real(1, 1, 1.0);
        let report = kernel_dim(&t.build(), None, 7).unwrap();
        assert_eq!(report.kind, ValueKind::EigenvalueMagnitudes);
        assert!((report.values[0] - 1.0).abs() < 1e-9);
        assert!((report.values[1] - 1.0).abs() < 1e-9);
        assert_eq!(report.kernel_dim, 0);
        // The threshold scale still comes from singular values.
        assert!(report.largest > 100.0);
    }

    #[test]
    fn purely_imaginary_matrix_uses_the_rotated_real_part() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 1, C64::new(0.0, -3.0));
        t.push(1, 0, C64::new(0.0, 3.0));
        let report = kernel_dim(&t.build(), None, 7).unwrap();
        assert_eq!(report.kind, ValueKind::EigenvalueMagnitudes);
        assert!((report.values[0] - 3.0).abs() < 1e-12);
        assert!((report.values[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn genuinely_complex_matrix_falls_back_to_singular_values() {
        let d = diag_csr(&[C64::new(1.0, 1.0), C64::new(2.0, 0.0)]);
        let report = kernel_dim(&d, None, 7).unwrap();
        assert_eq!(report.kind, ValueKind::SingularValues);
        assert!((report.values[0] - 2.0f64.sqrt()).abs() < 1e-12);
        assert!((report.values[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn iterative_path_matches_the_diagonal() {
        let n = DENSE_CUTOFF + 800;
        let mut vals = vec![0.0f64; n];
        for (i, v) in vals.iter_mut().enumerate().skip(1) {
            *v = 0.5 + 1e-4 * i as f64;
        }
        vals[n - 1] = 3.0;
        let report = kernel_dim(&real_diag(&vals), None, 11).unwrap();
        assert!(report.truncated);
        assert_eq!(report.kind, ValueKind::SingularValues);
        assert_eq!(report.kernel_dim, 1);
        let gap = report.gap.unwrap();
        assert!((gap - (0.5 + 1e-4)).abs() < 1e-6, "gap {gap}");
        assert!((report.largest - 3.0).abs() < 1e-6);
    }

    /// Grading [+1 p times, -1 q times] with the zero operator: every block
    /// is zero, so the index is p - q.
    #[test]
    fn zero_operator_index_is_the_signature() {
        let z = TripletBuilder::new(5, 5).build();
        let grading = [1.0, 1.0, 1.0, -1.0, -1.0];
        let report = graded_index(&z, &grading, None, 7).unwrap();
        assert_eq!(report.index, 1);
        assert_eq!(report.plus_kernel, 3);
        assert_eq!(report.minus_kernel, 2);
    }

    /// D+ = diag(0, 1) has a one-dimensional kernel, D- = identity none.
    fn square_index_one() -> (CsrMatrix<C64>, Vec<f64>) {
        let grading = vec![1.0, 1.0, -1.0, -1.0];
        let mut t = TripletBuilder::new(4, 4);
        // Block rows 2..4, cols 0..2 map plus to minus.
        t.push_real(3, 1, 1.0);
        // Block rows 0..2, cols 2..4 map minus to plus.
        t.push_real(0, 2, 1.0);
        t.push_real(1, 3, 1.0);
        (t.build(), grading)
    }

    #[test]
    fn graded_index_counts_block_kernels() {
        let (d, grading) = square_index_one();
        let report = graded_index(&d, &grading, None, 7).unwrap();
        assert_eq!(report.index, 1);
        assert_eq!(report.plus_kernel, 1);
        assert_eq!(report.minus_kernel, 0);
        assert!(report.anticommutator < 1e-15);
    }

    #[test]
    fn negating_the_grading_negates_the_index() {
        let (d, grading) = square_index_one();
        let negated: Vec<f64> = grading.iter().map(|s| -s).collect();
        let plus = graded_index(&d, &grading, None, 7).unwrap();
        let minus = graded_index(&d, &negated, None, 7).unwrap();
        assert_eq!(plus.index, -minus.index);
        assert_eq!(plus.plus_kernel, minus.minus_kernel);
        assert_eq!(plus.minus_kernel, minus.plus_kernel);
    }

    #[test]
    fn index_is_stable_under_threshold_changes_within_the_gap() {
        let (d, grading) = square_index_one();
        let base = graded_index(&d, &grading, None, 7).unwrap();
        for rel in [1e-7, 1e-6, 1e-5, 1e-3] {
            let r = graded_index(&d, &grading, Some(rel), 7).unwrap();
            assert_eq!(r.index, base.index, "relative threshold {rel}");
        }
    }

    #[test]
    fn commuting_grading_is_rejected() {
        let d = real_diag(&[1.0, 2.0]);
        let err = graded_index(&d, &[1.0, -1.0], None, 7).unwrap_err();
        assert!(matches!(err, IndexError::Anticommutator(_)));
    }

    #[test]
    fn non_unimodular_grading_is_rejected() {
        let z = TripletBuilder::new(2, 2).build();
        let err = graded_index(&z, &[0.5, -1.0], None, 7).unwrap_err();
        assert!(matches!(err, IndexError::GradingSign(0, _)));
    }

    #[test]
    fn harmonic_vanishing_passes_on_a_gapped_operator() {
        // Rotation generator: eigenvalue magnitudes both 1, no kernel.
        let mut t = TripletBuilder::new(2, 2);
        t.push_real(0, 1, -1.0);
        t.push_real(1, 0, 1.0);
        let report =
            harmonic_vanishing_experiment(&t.build(), &[2.0, 2.0], Some(0.9), 0.05, None, 7)
                .unwrap();
        assert!(report.hypothesis_met);
        assert!(report.kernel_vanishes);
        assert_eq!(report.gap_exceeds_bound, Some(true));
    }

    #[test]
    fn harmonic_vanishing_reports_unmet_hypothesis_on_flat_data() {
        let z = TripletBuilder::new(2, 2).build();
        let report = harmonic_vanishing_experiment(&z, &[0.0, 0.0], None, 0.0, None, 7).unwrap();
        assert!(!report.hypothesis_met);
        assert!(!report.kernel_vanishes);
        assert_eq!(report.spectral.kernel_dim, 2);
        assert_eq!(report.gap_exceeds_bound, None);
    }

    #[test]
    fn odd_perturbations_preserve_the_reported_index_when_small() {
        let (d, grading) = square_index_one();
        // Order-0 blocks over a single point of fiber dimension 4.
        let perturbations: Vec<CsrMatrix<C64>> = (0..4)
            .map(|k| random_odd_perturbation(&grading, 4, 1e-9, 100 + k))
            .collect();
        let report =
            symbol_invariance_experiment(&d, &grading, &perturbations, None, 7).unwrap();
        assert_eq!(report.base.index, 1);
        for p in &report.perturbed {
            assert_eq!(p.report.index, 1);
        }
        assert!(report.all_equal);
    }

    #[test]
    fn a_perturbation_that_moves_the_kernel_is_detected() {
        let (d, grading) = square_index_one();
        // Fill the kernel of D+ directly: a large odd shift on the (3,0) slot.
        let mut t = TripletBuilder::new(4, 4);
        t.push_real(2, 0, 0.5);
        let report =
            symbol_invariance_experiment(&d, &grading, &[t.build()], None, 7).unwrap();
        assert_eq!(report.perturbed.len(), 1);
        let p = &report.perturbed[0];
        assert!(p.report.index == 0 || p.inconclusive);
        assert!(!report.all_equal || report.any_inconclusive);
    }

    #[test]
    fn values_crowding_the_threshold_flag_inconclusive() {
        let (d, grading) = square_index_one();
        // Push a spectral value to ~3x the threshold: conclusive it is not.
        let mut t = TripletBuilder::new(4, 4);
        t.push_real(2, 0, 3e-6);
        let report =
            symbol_invariance_experiment(&d, &grading, &[t.build()], None, 7).unwrap();
        assert!(report.perturbed[0].inconclusive);
        assert!(report.any_inconclusive);
    }

    #[test]
    fn random_odd_perturbation_anticommutes_and_has_the_requested_norm() {
        let grading = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let p = random_odd_perturbation(&grading, 2, 0.3, 42);
        let mut gp = p.clone();
        linalg::scale_rows(&mut gp, &grading);
        let mut pg = p.clone();
        linalg::scale_cols(&mut pg, &grading);
        let sum = &gp + &pg;
        let residual = sum.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(residual < 1e-15);
        let top = singular_values_dense(&to_dense(&p)).last().copied().unwrap();
        assert!((top - 0.3).abs() < 1e-12);
    }

    #[test]
    fn pairing_against_the_unit_class_reports_the_error() {
        let report = index_pairing_report(3, Some(2.9996), CandidateForm::FlatUnit).unwrap();
        assert!((report.abs_error.unwrap() - 4e-4).abs() < 1e-12);
        assert!(index_pairing_report(3, None, CandidateForm::FlatUnit).is_err());
    }

    #[test]
    fn pairing_without_a_candidate_form_is_informative_only() {
        let report = index_pairing_report(2, Some(1.5), CandidateForm::Unknown).unwrap();
        assert_eq!(report.abs_error, None);
        assert!(report.note.contains("unknown"));
    }
}
