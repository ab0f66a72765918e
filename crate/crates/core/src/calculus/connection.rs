//! Sampled connection coefficients, the overlap transformation law, curvature,
//! Chern forms, and the passage from frame connections to spinor connections.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::clifford::CliffordElement;
use crate::cover::{flatten, unflatten, ChartGeometry, Cover, TransitionFamily};
use crate::linalg::{complexify, max_abs, C64};
use crate::sections::PartitionOfUnity;

use super::{CalculusError, CoeffField};

/// Additive floor under the mesh-proportional tolerance of the overlap law.
pub const LAW_FLOOR: f64 = 1e-8;
/// Largest imaginary part tolerated in a frame connection entry.
pub const REAL_PART_TOL: f64 = 1e-12;
/// Antisymmetry tolerance for frame connection coefficients.
pub const ANTISYMMETRY_TOL: f64 = 1e-10;

/// Connection coefficients sampled over a cover: one matrix-valued component
/// per chart axis, acting on the fiber.
#[derive(Debug, Clone)]
pub struct ConnectionData {
    pub fiber_dim: usize,
    /// Indexed [chart][axis].
    pub coeffs: Vec<Vec<CoeffField>>,
}

impl ConnectionData {
    pub fn check_shapes(&self, cover: &Cover) -> Result<(), CalculusError> {
        if self.coeffs.len() != cover.charts.len() {
            return Err(CalculusError::LayoutMismatch);
        }
        for chart in &cover.charts {
            let (shape, _) = grid(cover, chart.id)?;
            let per_axis = &self.coeffs[chart.id];
            if per_axis.len() != shape.len() {
                return Err(CalculusError::AxisCount {
                    chart: chart.id,
                    got: per_axis.len(),
                    expected: shape.len(),
                });
            }
            let samples = chart.sample_count();
            for field in per_axis {
                if let CoeffField::PerSample(ms) = field {
                    if ms.len() != samples {
                        return Err(CalculusError::SampleCount {
                            chart: chart.id,
                            got: ms.len(),
                            expected: samples,
                        });
                    }
                }
                for s in 0..samples {
                    let m = field.at(s);
                    if m.nrows() != self.fiber_dim || m.ncols() != self.fiber_dim {
                        return Err(CalculusError::CoeffShape {
                            expected: self.fiber_dim,
                            rows: m.nrows(),
                            cols: m.ncols(),
                        });
                    }
                    if field.is_constant() {
                        break;
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn grid<'a>(
    cover: &'a Cover,
    chart: usize,
) -> Result<(&'a [usize], &'a [f64]), CalculusError> {
    match &cover.charts[chart].geometry {
        ChartGeometry::Grid { shape, spacing, .. } => Ok((shape, spacing)),
        ChartGeometry::Cloud { .. } => Err(CalculusError::GridOnly(chart)),
    }
}

/// Partial derivative of a sampled matrix field along a grid axis: centered
/// differences inside, 2-point one-sided at the chart edge.
fn grid_partial(
    shape: &[usize],
    spacing: &[f64],
    field: &CoeffField,
    sample: usize,
    axis: usize,
    chart: usize,
) -> Result<DMatrix<C64>, CalculusError> {
    let dim = field.at(sample).nrows();
    if field.is_constant() {
        return Ok(DMatrix::zeros(dim, field.at(sample).ncols()));
    }
    let extent = shape[axis];
    if extent < 2 {
        return Err(CalculusError::ShapeTooSmall { chart, axis, extent });
    }
    let h = spacing[axis];
    let mut multi = unflatten(sample, shape);
    let pos = multi[axis];
    let at = |multi: &mut Vec<usize>, p: usize| {
        multi[axis] = p;
        flatten(multi, shape)
    };
    let d = if pos > 0 && pos + 1 < extent {
        (field.at(at(&mut multi, pos + 1)) - field.at(at(&mut multi, pos - 1))) / C64::new(2.0 * h, 0.0)
    } else if pos + 1 < extent {
        (field.at(at(&mut multi, pos + 1)) - field.at(at(&mut multi, pos))) / C64::new(h, 0.0)
    } else {
        (field.at(at(&mut multi, pos)) - field.at(at(&mut multi, pos - 1))) / C64::new(h, 0.0)
    };
    Ok(d)
}

/// Outcome of checking the connection transformation law on overlaps.
#[derive(Debug, Clone)]
pub struct ConnectionReport {
    pub max_residual: f64,
    /// Largest tolerance used: slope * spacing + floor.
    pub bound: f64,
    pub pass: bool,
    pub checked_directions: usize,
    /// Directions where the overlap band was too thin to difference the
    /// transition maps.
    pub skipped_directions: usize,
}

/// Checks w_j = ad(g_ij)^{-1} w_i + g_ij^{-1} dg_ij on every matched overlap
/// sample, with dg taken by finite differences along the overlap band.
///
/// `jacobians` holds the constant direction matrix d x_i / d x_j per overlap
/// component; identity when absent. `slope` scales the mesh-proportional part
/// of the tolerance.
pub fn validate_connection(
    cover: &Cover,
    transitions: &TransitionFamily,
    conn: &ConnectionData,
    jacobians: &BTreeMap<(usize, usize, usize), DMatrix<f64>>,
    slope: f64,
) -> Result<ConnectionReport, CalculusError> {
    conn.check_shapes(cover)?;
    if transitions.fiber_dim != conn.fiber_dim {
        return Err(CalculusError::FiberDim(transitions.fiber_dim, conn.fiber_dim));
    }
    let mut max_residual: f64 = 0.0;
    let mut bound: f64 = 0.0;
    let mut pass = true;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    for ov in &cover.overlaps {
        let (i, j) = ov.charts;
        let (shape_i, _) = grid(cover, i)?;
        let (shape_j, spacing_j) = grid(cover, j)?;
        let rank_i = shape_i.len();
        let rank_j = shape_j.len();
        let jac = jacobians.get(&(i, j, ov.component));
        if let Some(jm) = jac {
            if jm.nrows() != rank_i || jm.ncols() != rank_j {
                return Err(CalculusError::LayoutMismatch);
            }
        }
        // Position of each matched chart-j sample inside this component.
        let mut pos_of: BTreeMap<usize, usize> = BTreeMap::new();
        for (p, &(_, sj)) in ov.pairs.iter().enumerate() {
            pos_of.insert(sj, p);
        }
        for (p, &(si, sj)) in ov.pairs.iter().enumerate() {
            let g = transitions
                .at(i, j, ov.component, p)
                .ok_or(crate::cover::CoverError::MissingTransition(i, j, ov.component))?;
            let ginv = transitions
                .at(j, i, ov.component, p)
                .ok_or(crate::cover::CoverError::MissingTransition(j, i, ov.component))?;
            let multi_j = unflatten(sj, shape_j);
            for b in 0..rank_j {
                let h = spacing_j[b];
                // dg along chart-j axis b, differencing transition samples
                // within the overlap component.
                let neighbor = |offset: isize| -> Option<usize> {
                    let pb = multi_j[b] as isize + offset;
                    if pb < 0 || pb as usize >= shape_j[b] {
                        return None;
                    }
                    let mut m = multi_j.clone();
                    m[b] = pb as usize;
                    pos_of.get(&flatten(&m, shape_j)).copied()
                };
                let plus = neighbor(1);
                let minus = neighbor(-1);
                let sample_g = |p: usize| transitions.at(i, j, ov.component, p).unwrap();
                let dg = match (plus, minus) {
                    (Some(pp), Some(pm)) => {
                        (sample_g(pp) - sample_g(pm)) / C64::new(2.0 * h, 0.0)
                    }
                    (Some(pp), None) => (sample_g(pp) - g) / C64::new(h, 0.0),
                    (None, Some(pm)) => (g - sample_g(pm)) / C64::new(h, 0.0),
                    (None, None) => {
                        skipped += 1;
                        continue;
                    }
                };
                let mut transported = DMatrix::zeros(conn.fiber_dim, conn.fiber_dim);
                for d in 0..rank_i {
                    let jdb = match jac {
                        Some(jm) => jm[(d, b)],
                        None => {
                            if d == b {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    };
                    if jdb == 0.0 {
                        continue;
                    }
                    transported += (ginv * conn.coeffs[i][d].at(si) * g) * C64::new(jdb, 0.0);
                }
                let predicted = transported + ginv * dg;
                let residual = max_abs(&(conn.coeffs[j][b].at(sj) - predicted));
                let tol = slope * h + LAW_FLOOR;
                max_residual = max_residual.max(residual);
                bound = bound.max(tol);
                if residual >= tol {
                    pass = false;
                }
                checked += 1;
            }
        }
    }
    Ok(ConnectionReport {
        max_residual,
        bound,
        pass,
        checked_directions: checked,
        skipped_directions: skipped,
    })
}

/// Curvature coefficients per chart and coordinate plane.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub fiber_dim: usize,
    /// Axis pairs (a, b) with a < b, per chart.
    pub planes: Vec<Vec<(usize, usize)>>,
    /// Indexed [chart][plane][sample].
    pub coeffs: Vec<Vec<Vec<DMatrix<C64>>>>,
}

/// Curvature of sampled connection coefficients: for each coordinate plane,
/// d_a w_b - d_b w_a + [w_a, w_b] with finite-difference derivatives.
pub fn curvature(cover: &Cover, conn: &ConnectionData) -> Result<CurvatureData, CalculusError> {
    conn.check_shapes(cover)?;
    let mut planes = Vec::new();
    let mut coeffs = Vec::new();
    for chart in &cover.charts {
        let (shape, spacing) = grid(cover, chart.id)?;
        let rank = shape.len();
        let mut chart_planes = Vec::new();
        for a in 0..rank {
            for b in (a + 1)..rank {
                chart_planes.push((a, b));
            }
        }
        let samples = chart.sample_count();
        let mut chart_coeffs = Vec::with_capacity(chart_planes.len());
        for &(a, b) in &chart_planes {
            let wa = &conn.coeffs[chart.id][a];
            let wb = &conn.coeffs[chart.id][b];
            let mut plane = Vec::with_capacity(samples);
            for s in 0..samples {
                let da_wb = grid_partial(shape, spacing, wb, s, a, chart.id)?;
                let db_wa = grid_partial(shape, spacing, wa, s, b, chart.id)?;
                let ma = wa.at(s);
                let mb = wb.at(s);
                plane.push(da_wb - db_wa + ma * mb - mb * ma);
            }
            chart_coeffs.push(plane);
        }
        planes.push(chart_planes);
        coeffs.push(chart_coeffs);
    }
    Ok(CurvatureData {
        fiber_dim: conn.fiber_dim,
        planes,
        coeffs,
    })
}

/// Chern forms of a curvature: the degree-zero rank term, the sampled
/// degree-two coefficients Tr(i Omega / 2 pi), and the character. On bases of
/// dimension at most three every higher wedge power vanishes, so the
/// character is the rank term plus the degree-two form.
#[derive(Debug, Clone)]
pub struct ChernForms {
    pub fiber_dim: usize,
    pub rank_term: f64,
    /// Indexed [chart][plane][sample].
    pub degree_two: Vec<Vec<Vec<C64>>>,
}

impl ChernForms {
    /// Sampled character Tr exp(i Omega / 2 pi) as (degree 0, degree 2) parts.
    pub fn character_at(&self, chart: usize, plane: usize, sample: usize) -> (f64, C64) {
        (self.rank_term, self.degree_two[chart][plane][sample])
    }
}

pub fn chern(cover: &Cover, curv: &CurvatureData) -> Result<ChernForms, CalculusError> {
    let factor = C64::new(0.0, 1.0 / (2.0 * std::f64::consts::PI));
    let mut degree_two = Vec::new();
    for chart in &cover.charts {
        let (shape, _) = grid(cover, chart.id)?;
        if shape.len() > 3 {
            return Err(CalculusError::BaseDimension(chart.id, shape.len()));
        }
        let per_plane = curv.coeffs[chart.id]
            .iter()
            .map(|plane| {
                plane
                    .iter()
                    .map(|m| {
                        let mut tr = C64::new(0.0, 0.0);
                        for k in 0..m.nrows() {
                            tr += m[(k, k)];
                        }
                        factor * tr
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>();
        degree_two.push(per_plane);
    }
    Ok(ChernForms {
        fiber_dim: curv.fiber_dim,
        rank_term: curv.fiber_dim as f64,
        degree_two,
    })
}

/// Integrates a sampled top-degree coefficient against a partition of unity:
/// the partition weights enter linearly and the chart weights supply the cell
/// volumes.
pub fn integrate_top_form(
    cover: &Cover,
    values: &[Vec<C64>],
    partition: &PartitionOfUnity,
) -> Result<C64, CalculusError> {
    if values.len() != cover.charts.len() {
        return Err(CalculusError::LayoutMismatch);
    }
    for chart in &cover.charts {
        if values[chart.id].len() != chart.sample_count() {
            return Err(CalculusError::SampleCount {
                chart: chart.id,
                got: values[chart.id].len(),
                expected: chart.sample_count(),
            });
        }
    }
    let mut total = C64::new(0.0, 0.0);
    for piece in &partition.pieces {
        let chart = &cover.charts[piece.chart];
        for s in 0..chart.sample_count() {
            let rho = piece.weights[s];
            if rho == 0.0 {
                continue;
            }
            total += values[piece.chart][s] * C64::new(rho * chart.weights[s], 0.0);
        }
    }
    Ok(total)
}

/// Largest disagreement of the degree-two Chern coefficient across overlap
/// samples, after the constant plane factor det(d x_i / d x_j) declared per
/// component (default 1). Meaningful for two-dimensional charts, where each
/// chart has a single plane.
pub fn chern_overlap_residual(
    cover: &Cover,
    forms: &ChernForms,
    plane_factors: &BTreeMap<(usize, usize, usize), f64>,
) -> Result<f64, CalculusError> {
    let mut worst: f64 = 0.0;
    for ov in &cover.overlaps {
        let (i, j) = ov.charts;
        if forms.degree_two[i].len() != 1 || forms.degree_two[j].len() != 1 {
            return Err(CalculusError::BaseDimension(i, forms.degree_two[i].len()));
        }
        let det = plane_factors.get(&(i, j, ov.component)).copied().unwrap_or(1.0);
        for &(si, sj) in &ov.pairs {
            let vi = forms.degree_two[i][0][si];
            let vj = forms.degree_two[j][0][sj];
            worst = worst.max((vj - vi * C64::new(det, 0.0)).norm());
        }
    }
    Ok(worst)
}

/// Converts frame connection coefficients (real antisymmetric, fiber n) into
/// spinor connection coefficients (fiber 2^n): each component becomes left
/// multiplication by -(1/4) sum_{k,l} w_kl e_k e_l.
pub fn spin_connection(
    cover: &Cover,
    levi: &ConnectionData,
) -> Result<ConnectionData, CalculusError> {
    levi.check_shapes(cover)?;
    let n = levi.fiber_dim;
    let convert = |m: &DMatrix<C64>, chart: usize, axis: usize, sample: usize| -> Result<DMatrix<C64>, CalculusError> {
        let mut anti_residual: f64 = 0.0;
        for k in 0..n {
            for l in 0..n {
                if m[(k, l)].im.abs() > REAL_PART_TOL {
                    return Err(CalculusError::NotAntisymmetric {
                        chart,
                        axis,
                        sample,
                        residual: m[(k, l)].im.abs(),
                    });
                }
                anti_residual = anti_residual.max((m[(k, l)].re + m[(l, k)].re).abs());
            }
        }
        if anti_residual > ANTISYMMETRY_TOL {
            return Err(CalculusError::NotAntisymmetric {
                chart,
                axis,
                sample,
                residual: anti_residual,
            });
        }
        let mut phi = CliffordElement::zero(n)?;
        for k in 0..n {
            for l in (k + 1)..n {
                let mask = (1u32 << k) | (1u32 << l);
                phi.set_coeff(mask, -0.5 * m[(k, l)].re);
            }
        }
        Ok(complexify(&phi.left_mul_matrix()))
    };
    let mut coeffs = Vec::with_capacity(levi.coeffs.len());
    for (chart, per_axis) in levi.coeffs.iter().enumerate() {
        let mut out_axes = Vec::with_capacity(per_axis.len());
        for (axis, field) in per_axis.iter().enumerate() {
            let out = match field {
                CoeffField::Constant(m) => CoeffField::Constant(convert(m, chart, axis, 0)?),
                CoeffField::PerSample(ms) => CoeffField::PerSample(
                    ms.iter()
                        .enumerate()
                        .map(|(s, m)| convert(m, chart, axis, s))
                        .collect::<Result<Vec<_>, _>>()?,
                ),
            };
            out_axes.push(out);
        }
        coeffs.push(out_axes);
    }
    Ok(ConnectionData {
        fiber_dim: 1 << n,
        coeffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::Chart;
    use crate::sections::PartitionPiece;
    use nalgebra::DMatrix;

    fn unit_square_cover(n: usize) -> Cover {
        let h = 1.0 / n as f64;
        let chart = Chart {
            id: 0,
            geometry: ChartGeometry::Grid {
                shape: vec![n, n],
                spacing: vec![h, h],
                origin: vec![0.5 * h, 0.5 * h],
            },
            weights: vec![h * h; n * n],
        };
        Cover {
            charts: vec![chart],
            overlaps: vec![],
            triples: vec![],
            quadruples: vec![],
        }
    }

    fn scalar(v: C64) -> DMatrix<C64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn linear_coefficient_gives_constant_curvature() {
        let n = 8;
        let cover = unit_square_cover(n);
        let (shape, _) = grid(&cover, 0).unwrap();
        let shape = shape.to_vec();
        let mut wy = Vec::new();
        for s in 0..n * n {
            let x = cover.charts[0].geometry.coords(s)[0];
            wy.push(scalar(C64::new(0.0, 3.0 * x)));
        }
        assert_eq!(shape, vec![n, n]);
        let conn = ConnectionData {
            fiber_dim: 1,
            coeffs: vec![vec![
                CoeffField::Constant(scalar(C64::new(0.0, 0.0))),
                CoeffField::PerSample(wy),
            ]],
        };
        let curv = curvature(&cover, &conn).unwrap();
        assert_eq!(curv.planes[0], vec![(0, 1)]);
        for m in &curv.coeffs[0][0] {
            assert!((m[(0, 0)] - C64::new(0.0, 3.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn commuting_constant_coefficients_are_flat() {
        let cover = unit_square_cover(5);
        let w = scalar(C64::new(0.0, 0.7));
        let conn = ConnectionData {
            fiber_dim: 1,
            coeffs: vec![vec![
                CoeffField::Constant(w.clone()),
                CoeffField::Constant(w),
            ]],
        };
        let curv = curvature(&cover, &conn).unwrap();
        for m in &curv.coeffs[0][0] {
            assert!(max_abs(m) < 1e-14);
        }
    }

    #[test]
    fn noncommuting_constant_coefficients_curve() {
        let cover = unit_square_cover(4);
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = C64::new(1.0, 0.0);
        a[(1, 0)] = C64::new(-1.0, 0.0);
        let mut b = DMatrix::zeros(2, 2);
        b[(0, 0)] = C64::new(0.0, 1.0);
        b[(1, 1)] = C64::new(0.0, -1.0);
        let expected = &a * &b - &b * &a;
        let conn = ConnectionData {
            fiber_dim: 2,
            coeffs: vec![vec![CoeffField::Constant(a), CoeffField::Constant(b)]],
        };
        let curv = curvature(&cover, &conn).unwrap();
        for m in &curv.coeffs[0][0] {
            assert!(max_abs(&(m - &expected)) < 1e-12);
        }
    }

    #[test]
    fn chern_integral_of_constant_curvature_matches_area_formula() {
        let n = 16;
        let cover = unit_square_cover(n);
        let a = 2.5;
        let mut wy = Vec::new();
        for s in 0..n * n {
            let x = cover.charts[0].geometry.coords(s)[0];
            wy.push(scalar(C64::new(0.0, a * x)));
        }
        let conn = ConnectionData {
            fiber_dim: 1,
            coeffs: vec![vec![
                CoeffField::Constant(scalar(C64::new(0.0, 0.0))),
                CoeffField::PerSample(wy),
            ]],
        };
        let curv = curvature(&cover, &conn).unwrap();
        let forms = chern(&cover, &curv).unwrap();
        let partition = PartitionOfUnity {
            pieces: vec![PartitionPiece {
                chart: 0,
                weights: vec![1.0; n * n],
            }],
        };
        let total = integrate_top_form(&cover, &forms.degree_two[0].clone(), &partition);
        // Omega = i a, so Tr(i Omega / 2 pi) = -a / 2 pi over the unit square.
        let expected = -a / (2.0 * std::f64::consts::PI);
        let total = total.unwrap();
        assert!((total.re - expected).abs() < 1e-12, "got {total}");
        assert!(total.im.abs() < 1e-12);
    }

    #[test]
    fn chern_trace_is_conjugation_invariant() {
        let cover = unit_square_cover(6);
        let n = 6 * 6;
        let mut u = DMatrix::zeros(2, 2);
        u[(0, 0)] = C64::new(0.8, 0.6);
        u[(0, 1)] = C64::new(0.1, -0.2);
        u[(1, 1)] = C64::new(1.0, 0.0);
        let uinv = u.clone().try_inverse().unwrap();
        let mut wx = Vec::new();
        let mut wy = Vec::new();
        for s in 0..n {
            let xy = cover.charts[0].geometry.coords(s);
            let mut mx = DMatrix::zeros(2, 2);
            mx[(0, 1)] = C64::new(xy[1], 0.3);
            mx[(1, 0)] = C64::new(-xy[1], 0.3);
            let mut my = DMatrix::zeros(2, 2);
            my[(0, 0)] = C64::new(0.0, xy[0]);
            my[(1, 1)] = C64::new(0.0, -2.0 * xy[0]);
            wx.push(mx);
            wy.push(my);
        }
        let conj = |ms: &Vec<DMatrix<C64>>| {
            CoeffField::PerSample(ms.iter().map(|m| &u * m * &uinv).collect())
        };
        let plain = ConnectionData {
            fiber_dim: 2,
            coeffs: vec![vec![
                CoeffField::PerSample(wx.clone()),
                CoeffField::PerSample(wy.clone()),
            ]],
        };
        let dressed = ConnectionData {
            fiber_dim: 2,
            coeffs: vec![vec![conj(&wx), conj(&wy)]],
        };
        // Conjugating the connection by a constant frame conjugates the
        // curvature, so the trace form is unchanged.
        let f1 = chern(&cover, &curvature(&cover, &plain).unwrap()).unwrap();
        let f2 = chern(&cover, &curvature(&cover, &dressed).unwrap()).unwrap();
        for (a, b) in f1.degree_two[0][0].iter().zip(&f2.degree_two[0][0]) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    fn line_pair_cover(n: usize, overlap: usize, h: f64) -> Cover {
        let chart = |id: usize, origin: f64| Chart {
            id,
            geometry: ChartGeometry::Grid {
                shape: vec![n],
                spacing: vec![h],
                origin: vec![origin],
            },
            weights: vec![h; n],
        };
        let pairs: Vec<(usize, usize)> = (0..overlap).map(|k| (n - overlap + k, k)).collect();
        Cover {
            charts: vec![chart(0, 0.0), chart(1, (n - overlap) as f64 * h)],
            overlaps: vec![crate::cover::OverlapComponent {
                charts: (0, 1),
                component: 0,
                pairs,
            }],
            triples: vec![],
            quadruples: vec![],
        }
    }

    #[test]
    fn connection_law_accepts_gauge_transformed_zero() {
        let n = 12;
        let overlap = 5;
        let h = 0.05;
        let cover = line_pair_cover(n, overlap, h);
        cover.validate().unwrap();
        let alpha = 0.8;
        // Transition e^{i alpha x} relates the flat coefficient 0 on chart 0
        // to the constant coefficient i alpha on chart 1.
        let phase = |x: f64| C64::new(0.0, alpha * x).exp();
        let mut fwd = Vec::new();
        let mut bwd = Vec::new();
        for &(s0, _) in &cover.overlaps[0].pairs {
            let x = cover.charts[0].geometry.coords(s0)[0];
            fwd.push(scalar(phase(x)));
            bwd.push(scalar(phase(x).conj()));
        }
        let mut maps = BTreeMap::new();
        maps.insert((0usize, 1usize, 0usize), crate::cover::TransitionMaps::PerSample(fwd));
        maps.insert((1, 0, 0), crate::cover::TransitionMaps::PerSample(bwd));
        let transitions = TransitionFamily { fiber_dim: 1, maps };
        transitions.validate_against(&cover).unwrap();
        let conn = ConnectionData {
            fiber_dim: 1,
            coeffs: vec![
                vec![CoeffField::Constant(scalar(C64::new(0.0, 0.0)))],
                vec![CoeffField::Constant(scalar(C64::new(0.0, alpha)))],
            ],
        };
        let report =
            validate_connection(&cover, &transitions, &conn, &BTreeMap::new(), 1.0).unwrap();
        assert!(report.pass, "residual {}", report.max_residual);
        assert!(report.checked_directions > 0);
        // The band-end one-sided differences dominate at alpha^2 h / 2.
        assert!(report.max_residual < 0.5 * h, "residual {}", report.max_residual);

        let wrong = ConnectionData {
            fiber_dim: 1,
            coeffs: vec![
                vec![CoeffField::Constant(scalar(C64::new(0.0, 0.0)))],
                vec![CoeffField::Constant(scalar(C64::new(0.0, -alpha)))],
            ],
        };
        let report =
            validate_connection(&cover, &transitions, &wrong, &BTreeMap::new(), 1.0).unwrap();
        assert!(!report.pass);
        assert!(report.max_residual > alpha);
    }

    #[test]
    fn spin_connection_of_single_rotation_coefficient() {
        let cover = unit_square_cover(3);
        let a = 0.9;
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = C64::new(a, 0.0);
        w[(1, 0)] = C64::new(-a, 0.0);
        let levi = ConnectionData {
            fiber_dim: 2,
            coeffs: vec![vec![
                CoeffField::Constant(w),
                CoeffField::Constant(DMatrix::zeros(2, 2)),
            ]],
        };
        let spin = spin_connection(&cover, &levi).unwrap();
        assert_eq!(spin.fiber_dim, 4);
        let mut expected = CliffordElement::zero(2).unwrap();
        expected.set_coeff(0b11, -0.5 * a);
        let expected = complexify(&expected.left_mul_matrix());
        assert!(max_abs(&(spin.coeffs[0][0].at(0) - &expected)) < 1e-14);
        assert!(max_abs(spin.coeffs[0][1].at(0)) < 1e-14);
    }

    #[test]
    fn spin_connection_rejects_symmetric_input() {
        let cover = unit_square_cover(3);
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = C64::new(0.4, 0.0);
        w[(1, 0)] = C64::new(0.4, 0.0);
        let levi = ConnectionData {
            fiber_dim: 2,
            coeffs: vec![vec![
                CoeffField::Constant(w),
                CoeffField::Constant(DMatrix::zeros(2, 2)),
            ]],
        };
        let err = spin_connection(&cover, &levi).unwrap_err();
        assert!(matches!(err, CalculusError::NotAntisymmetric { .. }));
    }
}
