//! Principal symbols of described operators and the ellipticity check.

use nalgebra::DMatrix;

use crate::cover::Cover;
use crate::linalg::{singular_values_dense, C64};

use super::connection::grid;
use super::operator::DiscreteOperator;
use super::CalculusError;

/// The symbol matrix at one base point and covector.
#[derive(Debug, Clone)]
pub struct SymbolSample {
    pub chart: usize,
    pub sample: usize,
    pub xi: Vec<f64>,
    pub matrix: DMatrix<C64>,
}

/// Evaluates the principal symbol: the top-order terms contracted with
/// (i xi)^alpha. Requires the stencil description; an operator supplied as a
/// bare matrix has no symbol.
pub fn principal_symbol(
    op: &DiscreteOperator,
    chart: usize,
    sample: usize,
    xi: &[f64],
) -> Result<DMatrix<C64>, CalculusError> {
    let desc = op.description.as_ref().ok_or(CalculusError::MatrixOnly)?;
    let order = desc.order();
    let fiber = desc.fiber_dim;
    let mut total = DMatrix::zeros(fiber, fiber);
    for term in &desc.terms {
        if term.order() != order {
            continue;
        }
        if term.alpha.len() != xi.len() {
            return Err(CalculusError::AxisCount {
                chart,
                got: xi.len(),
                expected: term.alpha.len(),
            });
        }
        let mut factor = C64::new(1.0, 0.0);
        for (a, &power) in term.alpha.iter().enumerate() {
            for _ in 0..power {
                factor *= C64::new(0.0, xi[a]);
            }
        }
        total += term.coeffs[chart].at(sample) * factor;
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct EllipticityReport {
    /// Smallest symbol singular value over all sampled points and unit
    /// covectors.
    pub min_singular: f64,
    pub threshold: f64,
    pub pass: bool,
    pub points_checked: usize,
    pub directions: usize,
}

/// Deterministic unit covectors covering the cosphere of the given rank.
fn cosphere_directions(rank: usize, count: usize) -> Vec<Vec<f64>> {
    match rank {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            // Spiral point set on the sphere, adequate for a minimum scan.
            let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    let mut v = vec![r * t.cos(), r * t.sin(), z];
                    v.truncate(rank);
                    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter_mut().for_each(|x| *x /= norm);
                    v
                })
                .collect()
        }
    }
}

/// Scans the symbol over every owned sample and a fixed set of unit
/// covectors; elliptic iff the smallest singular value stays above the
/// threshold.
pub fn elliptic(
    cover: &Cover,
    op: &DiscreteOperator,
    threshold: f64,
    directions: usize,
) -> Result<EllipticityReport, CalculusError> {
    let mut min_singular = f64::INFINITY;
    let mut points = 0usize;
    let mut dirs_used = 0usize;
    for &(chart, sample) in &op.dofs.points {
        let (shape, _) = grid(cover, chart)?;
        let dirs = cosphere_directions(shape.len(), directions);
        dirs_used = dirs.len();
        for xi in &dirs {
            let sigma = principal_symbol(op, chart, sample, xi)?;
            let svals = singular_values_dense(&sigma);
            let smallest = svals.first().copied().unwrap_or(0.0);
            min_singular = min_singular.min(smallest);
        }
        points += 1;
    }
    Ok(EllipticityReport {
        min_singular,
        threshold,
        pass: min_singular > threshold,
        points_checked: points,
        directions: dirs_used,
    })
}
