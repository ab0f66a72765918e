//! Assembly of discrete differential operators over chart covers.
//!
//! Rows are built per manifold point in its owning chart (lowest chart id).
//! Stencils reach neighbors through the grid, through declared edge rules
//! (one-sided fallback, periodic wrap with a fiber twist, or an explicit link
//! to another sample), and through overlap transport back to owner samples.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;

use crate::clifford::{grade_involution_diagonal, CliffordElement};
use crate::cover::{flatten, unflatten, Cover, TransitionFamily};
use crate::linalg::{adjoint, complexify, scale_cols, scale_rows, C64, TripletBuilder};

use super::connection::grid;
use super::{CalculusError, CoeffField, ConnectionData};

/// What happens when a stencil steps off a chart edge.
#[derive(Debug, Clone)]
pub enum EdgeRule {
    /// Fall back to a one-sided difference. Width 1 is the 2-point first
    /// order stencil, width 2 the 3-point second order one.
    OneSided { width: u8 },
    /// Wrap around to the opposite edge of the same chart axis. The twist
    /// carries the wrapped sample's fiber data into this edge's frame; one
    /// matrix per position along the edge, or a single matrix for all.
    Periodic { twists: Vec<DMatrix<C64>> },
    /// Step to an explicit (chart, sample) target. The map carries the
    /// target's fiber data into this chart's frame; one per edge position.
    Link { targets: Vec<LinkTarget> },
}

#[derive(Debug, Clone)]
pub struct LinkTarget {
    pub chart: usize,
    pub sample: usize,
    pub map: DMatrix<C64>,
}

/// Edge rules for one chart: a (low, high) pair per axis.
#[derive(Debug, Clone)]
pub struct ChartEdgeRules {
    pub rules: Vec<(EdgeRule, EdgeRule)>,
}

impl ChartEdgeRules {
    pub fn one_sided(rank: usize, width: u8) -> Self {
        let rule = || EdgeRule::OneSided { width };
        Self {
            rules: (0..rank).map(|_| (rule(), rule())).collect(),
        }
    }
}

/// Global degrees of freedom: one block of fiber coordinates per manifold
/// point, held in the frame of the owning chart.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub fiber_dim: usize,
    /// dof -> owning (chart, sample).
    pub points: Vec<(usize, usize)>,
    /// Every (chart, sample) -> dof of its manifold point.
    pub dof_of: BTreeMap<(usize, usize), usize>,
    /// Non-owner (chart, sample) -> map carrying owner-frame fiber data into
    /// that chart's frame.
    pub transport: BTreeMap<(usize, usize), DMatrix<C64>>,
    /// Quadrature weight per dof, from the owning chart.
    pub weights: Vec<f64>,
}

impl DofMap {
    pub fn new(cover: &Cover, chain: &TransitionFamily) -> Result<Self, CalculusError> {
        // Transition maps between identified locations, keyed by the matched
        // pair they connect.
        let mut edges: BTreeMap<(usize, usize), Vec<((usize, usize), DMatrix<C64>)>> =
            BTreeMap::new();
        for ov in &cover.overlaps {
            let (i, j) = ov.charts;
            for (p, &(si, sj)) in ov.pairs.iter().enumerate() {
                let gij = chain
                    .at(i, j, ov.component, p)
                    .ok_or(crate::cover::CoverError::MissingTransition(i, j, ov.component))?;
                let gji = chain
                    .at(j, i, ov.component, p)
                    .ok_or(crate::cover::CoverError::MissingTransition(j, i, ov.component))?;
                edges.entry((j, sj)).or_default().push(((i, si), gij.clone()));
                edges.entry((i, si)).or_default().push(((j, sj), gji.clone()));
            }
        }
        let mut points = Vec::new();
        let mut dof_of = BTreeMap::new();
        let mut transport = BTreeMap::new();
        let mut weights = Vec::new();
        for group in cover.manifold_points() {
            let owner = group[0];
            let dof = points.len();
            points.push(owner);
            weights.push(cover.charts[owner.0].weights[owner.1]);
            for &loc in &group {
                dof_of.insert(loc, dof);
            }
            if group.len() == 1 {
                continue;
            }
            // Spread owner-frame data through the matching graph of the
            // group; each step composes one sampled transition.
            let mut reached: BTreeMap<(usize, usize), DMatrix<C64>> = BTreeMap::new();
            reached.insert(owner, DMatrix::identity(chain.fiber_dim, chain.fiber_dim));
            let mut queue = vec![owner];
            while let Some(cur) = queue.pop() {
                let cur_map = reached[&cur].clone();
                if let Some(nexts) = edges.get(&cur) {
                    for (next, step) in nexts {
                        if !reached.contains_key(next) {
                            reached.insert(*next, step * &cur_map);
                            queue.push(*next);
                        }
                    }
                }
            }
            for &loc in &group[1..] {
                let map = reached
                    .remove(&loc)
                    .ok_or(CalculusError::TransportUnavailable {
                        chart: loc.0,
                        sample: loc.1,
                    })?;
                transport.insert(loc, map);
            }
        }
        Ok(Self {
            fiber_dim: chain.fiber_dim,
            points,
            dof_of,
            transport,
            weights,
        })
    }

    /// Number of manifold points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total matrix dimension: points times fiber coordinates.
    pub fn dim(&self) -> usize {
        self.points.len() * self.fiber_dim
    }

    /// Quadrature weight per matrix index.
    pub fn weight_vector(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.dim());
        for &wd in &self.weights {
            for _ in 0..self.fiber_dim {
                w.push(wd);
            }
        }
        w
    }

    /// The dof holding a location's data and the map from the dof's frame
    /// into that location's chart frame.
    fn resolve(&self, loc: (usize, usize)) -> (usize, Option<&DMatrix<C64>>) {
        let dof = self.dof_of[&loc];
        (dof, self.transport.get(&loc))
    }
}

/// One polynomial term C(x) d^alpha of an operator. `alpha` is a derivative
/// multi-index over the chart axes; coefficients are sampled per chart.
#[derive(Debug, Clone)]
pub struct OperatorTerm {
    pub alpha: Vec<u32>,
    pub coeffs: Vec<CoeffField>,
}

impl OperatorTerm {
    pub fn order(&self) -> u32 {
        self.alpha.iter().sum()
    }
}

/// A differential operator as a sum of polynomial terms plus the edge rules
/// needed to discretize it.
#[derive(Debug, Clone)]
pub struct OperatorDescription {
    pub fiber_dim: usize,
    pub terms: Vec<OperatorTerm>,
    /// Indexed by chart.
    pub edges: Vec<ChartEdgeRules>,
}

impl OperatorDescription {
    pub fn order(&self) -> u32 {
        self.terms.iter().map(|t| t.order()).max().unwrap_or(0)
    }
}

/// An assembled operator together with the layout it acts on.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: CsrMatrix<C64>,
    pub dofs: DofMap,
    pub order: u32,
    /// Present when the operator was assembled from a stencil description;
    /// a bare matrix has no principal symbol.
    pub description: Option<OperatorDescription>,
}

/// A Dirac operator: sum over axes of Clifford generator times covariant
/// derivative, with the parity grading of the fiber.
#[derive(Debug, Clone)]
pub struct DiracOperator {
    pub op: DiscreteOperator,
    /// Grading signs per matrix index.
    pub grading: Vec<f64>,
    pub algebra_dim: usize,
}

enum Step {
    /// Neighbor resolved to a location, with an optional fiber map into the
    /// stepping chart's frame.
    At((usize, usize), Option<DMatrix<C64>>),
    /// Stepped off an edge governed by a one-sided rule.
    Boundary { width: u8 },
}

fn perp_index(multi: &[usize], shape: &[usize], axis: usize) -> usize {
    let m: Vec<usize> = multi
        .iter()
        .enumerate()
        .filter(|(a, _)| *a != axis)
        .map(|(_, &v)| v)
        .collect();
    let s: Vec<usize> = shape
        .iter()
        .enumerate()
        .filter(|(a, _)| *a != axis)
        .map(|(_, &v)| v)
        .collect();
    flatten(&m, &s)
}

fn edge_map<'a>(
    maps_len: usize,
    perp: usize,
    chart: usize,
    axis: usize,
    expected: usize,
) -> Result<usize, CalculusError> {
    if maps_len == 1 {
        Ok(0)
    } else if maps_len == expected {
        Ok(perp)
    } else {
        Err(CalculusError::EdgeRuleCount {
            chart,
            axis,
            got: maps_len,
            expected,
        })
    }
}

fn resolve_step(
    cover: &Cover,
    edges: &[ChartEdgeRules],
    chart: usize,
    multi: &[usize],
    axis: usize,
    dir: isize,
) -> Result<Step, CalculusError> {
    let (shape, _) = grid(cover, chart)?;
    let extent = shape[axis];
    let pos = multi[axis] as isize + dir;
    if pos >= 0 && (pos as usize) < extent {
        let mut m = multi.to_vec();
        m[axis] = pos as usize;
        return Ok(Step::At((chart, flatten(&m, shape)), None));
    }
    let rules = &edges[chart].rules;
    if rules.len() != shape.len() {
        return Err(CalculusError::AxisCount {
            chart,
            got: rules.len(),
            expected: shape.len(),
        });
    }
    let rule = if pos < 0 { &rules[axis].0 } else { &rules[axis].1 };
    let perp_total: usize = shape
        .iter()
        .enumerate()
        .filter(|(a, _)| *a != axis)
        .map(|(_, &v)| v)
        .product();
    let perp = perp_index(multi, shape, axis);
    match rule {
        EdgeRule::OneSided { width } => Ok(Step::Boundary { width: *width }),
        EdgeRule::Periodic { twists } => {
            let k = edge_map(twists.len(), perp, chart, axis, perp_total)?;
            let mut m = multi.to_vec();
            m[axis] = if pos < 0 { extent - 1 } else { 0 };
            Ok(Step::At((chart, flatten(&m, shape)), Some(twists[k].clone())))
        }
        EdgeRule::Link { targets } => {
            let k = edge_map(targets.len(), perp, chart, axis, perp_total)?;
            let t = &targets[k];
            Ok(Step::At((t.chart, t.sample), Some(t.map.clone())))
        }
    }
}

fn push_block(
    builder: &mut TripletBuilder,
    fiber: usize,
    row_dof: usize,
    col_dof: usize,
    block: &DMatrix<C64>,
) {
    for r in 0..fiber {
        for c in 0..fiber {
            builder.push(row_dof * fiber + r, col_dof * fiber + c, block[(r, c)]);
        }
    }
}

/// Fiber map carrying a neighbor location's data into the row chart frame:
/// the edge map composed with overlap transport to the neighbor's owner.
fn neighbor_block(
    dofs: &DofMap,
    loc: (usize, usize),
    map: &Option<DMatrix<C64>>,
) -> (usize, Option<DMatrix<C64>>) {
    let (dof, t) = dofs.resolve(loc);
    let combined = match (map, t) {
        (None, None) => None,
        (Some(m), None) => Some(m.clone()),
        (None, Some(t)) => Some(t.clone()),
        (Some(m), Some(t)) => Some(m * t),
    };
    (dof, combined)
}

fn apply_map(coeff: &DMatrix<C64>, map: &Option<DMatrix<C64>>) -> DMatrix<C64> {
    match map {
        None => coeff.clone(),
        Some(m) => coeff * m,
    }
}

/// Assembles a described operator over the cover. Terms must have order zero
/// or one; higher order operators arise as matrix products of assembled ones.
pub fn assemble_operator(
    cover: &Cover,
    chain: &TransitionFamily,
    desc: &OperatorDescription,
) -> Result<DiscreteOperator, CalculusError> {
    if desc.fiber_dim != chain.fiber_dim {
        return Err(CalculusError::FiberDim(desc.fiber_dim, chain.fiber_dim));
    }
    if desc.edges.len() != cover.charts.len() {
        return Err(CalculusError::LayoutMismatch);
    }
    for term in &desc.terms {
        if term.order() > 1 {
            return Err(CalculusError::HigherOrderTerm);
        }
        if term.coeffs.len() != cover.charts.len() {
            return Err(CalculusError::LayoutMismatch);
        }
    }
    let dofs = DofMap::new(cover, chain)?;
    let fiber = desc.fiber_dim;
    let mut builder = TripletBuilder::new(dofs.dim(), dofs.dim());
    for (dof, &(chart, sample)) in dofs.points.iter().enumerate() {
        let (shape, spacing) = grid(cover, chart)?;
        let multi = unflatten(sample, shape);
        for term in &desc.terms {
            let coeff = term.coeffs[chart].at(sample);
            if term.order() == 0 {
                push_block(&mut builder, fiber, dof, dof, coeff);
                continue;
            }
            if term.alpha.len() != shape.len() {
                return Err(CalculusError::AxisCount {
                    chart,
                    got: term.alpha.len(),
                    expected: shape.len(),
                });
            }
            let axis = term.alpha.iter().position(|&a| a == 1).expect("order checked");
            let h = spacing[axis];
            let plus = resolve_step(cover, &desc.edges, chart, &multi, axis, 1)?;
            let minus = resolve_step(cover, &desc.edges, chart, &multi, axis, -1)?;
            match (plus, minus) {
                (Step::At(lp, mp), Step::At(lm, mm)) => {
                    let (dp, bp) = neighbor_block(&dofs, lp, &mp);
                    let (dm, bm) = neighbor_block(&dofs, lm, &mm);
                    let w = C64::new(1.0 / (2.0 * h), 0.0);
                    push_block(&mut builder, fiber, dof, dp, &(apply_map(coeff, &bp) * w));
                    push_block(&mut builder, fiber, dof, dm, &(apply_map(coeff, &bm) * -w));
                }
                (Step::At(lp, mp), Step::Boundary { width }) => {
                    one_sided(
                        &mut builder, &dofs, cover, coeff, fiber, dof, chart, &multi, axis, h,
                        1, (lp, mp), width,
                    )?;
                }
                (Step::Boundary { width }, Step::At(lm, mm)) => {
                    one_sided(
                        &mut builder, &dofs, cover, coeff, fiber, dof, chart, &multi, axis, h,
                        -1, (lm, mm), width,
                    )?;
                }
                (Step::Boundary { .. }, Step::Boundary { .. }) => {
                    return Err(CalculusError::ShapeTooSmall {
                        chart,
                        axis,
                        extent: shape[axis],
                    });
                }
            }
        }
    }
    Ok(DiscreteOperator {
        matrix: builder.build(),
        dofs,
        order: desc.order(),
        description: Some(desc.clone()),
    })
}

/// One-sided difference at an edge row. `dir` points into the grid; the
/// available first neighbor in that direction is already resolved.
#[allow(clippy::too_many_arguments)]
fn one_sided(
    builder: &mut TripletBuilder,
    dofs: &DofMap,
    cover: &Cover,
    coeff: &DMatrix<C64>,
    fiber: usize,
    dof: usize,
    chart: usize,
    multi: &[usize],
    axis: usize,
    h: f64,
    dir: isize,
    first: ((usize, usize), Option<DMatrix<C64>>),
    width: u8,
) -> Result<(), CalculusError> {
    let (shape, _) = grid(cover, chart)?;
    let sign = dir as f64;
    let (loc1, map1) = first;
    let (d1, b1) = neighbor_block(dofs, loc1, &map1);
    match width {
        1 => {
            let w = C64::new(sign / h, 0.0);
            push_block(builder, fiber, dof, d1, &(apply_map(coeff, &b1) * w));
            push_block(builder, fiber, dof, dof, &(coeff * -w));
        }
        _ => {
            // 3-point stencil; the second neighbor must lie inside the grid.
            let pos2 = multi[axis] as isize + 2 * dir;
            if pos2 < 0 || pos2 as usize >= shape[axis] {
                return Err(CalculusError::ShapeTooSmall {
                    chart,
                    axis,
                    extent: shape[axis],
                });
            }
            let mut m2 = multi.to_vec();
            m2[axis] = pos2 as usize;
            let loc2 = (chart, flatten(&m2, shape));
            let (d2, b2) = neighbor_block(dofs, loc2, &None);
            let w0 = C64::new(-3.0 * sign / (2.0 * h), 0.0);
            let w1 = C64::new(4.0 * sign / (2.0 * h), 0.0);
            let w2 = C64::new(-sign / (2.0 * h), 0.0);
            push_block(builder, fiber, dof, dof, &(coeff * w0));
            push_block(builder, fiber, dof, d1, &(apply_map(coeff, &b1) * w1));
            push_block(builder, fiber, dof, d2, &(apply_map(coeff, &b2) * w2));
        }
    }
    Ok(())
}

/// The Dirac operator of a spinor connection: sum over chart axes of left
/// multiplication by the axis generator composed with the covariant
/// derivative along that axis.
pub fn assemble_dirac(
    cover: &Cover,
    chain: &TransitionFamily,
    spin_conn: &ConnectionData,
    edges: Vec<ChartEdgeRules>,
) -> Result<DiracOperator, CalculusError> {
    spin_conn.check_shapes(cover)?;
    let fiber = spin_conn.fiber_dim;
    let n = fiber.trailing_zeros() as usize;
    if 1usize << n != fiber {
        return Err(CalculusError::FiberDim(fiber, fiber.next_power_of_two()));
    }
    let rank = match &cover.charts[0].geometry {
        crate::cover::ChartGeometry::Grid { shape, .. } => shape.len(),
        _ => return Err(CalculusError::GridOnly(0)),
    };
    if rank > n {
        return Err(CalculusError::FiberDim(fiber, 1usize << rank));
    }
    let mut generators = Vec::with_capacity(rank);
    for k in 1..=rank {
        let e = CliffordElement::basis_vector(n, k)?;
        generators.push(complexify(&e.left_mul_matrix()));
    }
    let charts = cover.charts.len();
    let mut terms = Vec::new();
    for (axis, gen) in generators.iter().enumerate() {
        let mut alpha = vec![0u32; rank];
        alpha[axis] = 1;
        terms.push(OperatorTerm {
            alpha,
            coeffs: (0..charts).map(|_| CoeffField::Constant(gen.clone())).collect(),
        });
    }
    // Zero order part: sum over axes of generator times connection
    // coefficient, evaluated per sample.
    let mut zero_coeffs = Vec::with_capacity(charts);
    for chart in &cover.charts {
        let samples = chart.sample_count();
        let constant = spin_conn.coeffs[chart.id].iter().all(|f| f.is_constant());
        let eval = |s: usize| {
            let mut m = DMatrix::zeros(fiber, fiber);
            for (axis, gen) in generators.iter().enumerate() {
                m += gen * spin_conn.coeffs[chart.id][axis].at(s);
            }
            m
        };
        if constant {
            zero_coeffs.push(CoeffField::Constant(eval(0)));
        } else {
            zero_coeffs.push(CoeffField::PerSample((0..samples).map(eval).collect()));
        }
    }
    terms.push(OperatorTerm {
        alpha: vec![0; rank],
        coeffs: zero_coeffs,
    });
    let desc = OperatorDescription {
        fiber_dim: fiber,
        terms,
        edges,
    };
    let op = assemble_operator(cover, chain, &desc)?;
    let parity = grade_involution_diagonal(n);
    let mut grading = Vec::with_capacity(op.dofs.dim());
    for _ in 0..op.dofs.len() {
        grading.extend_from_slice(&parity);
    }
    Ok(DiracOperator {
        op,
        grading,
        algebra_dim: n,
    })
}

/// The covariant derivative along each chart axis, as matrices over a shared
/// layout. Meaningful when overlap direction Jacobians are orthogonal, so
/// that the summed Gram form is frame-independent.
pub fn covariant_derivatives(
    cover: &Cover,
    chain: &TransitionFamily,
    conn: &ConnectionData,
    edges: &[ChartEdgeRules],
) -> Result<(DofMap, Vec<CsrMatrix<C64>>), CalculusError> {
    conn.check_shapes(cover)?;
    let fiber = conn.fiber_dim;
    let rank = match &cover.charts[0].geometry {
        crate::cover::ChartGeometry::Grid { shape, .. } => shape.len(),
        _ => return Err(CalculusError::GridOnly(0)),
    };
    for chart in &cover.charts {
        let (shape, _) = grid(cover, chart.id)?;
        if shape.len() != rank {
            return Err(CalculusError::LayoutMismatch);
        }
    }
    let charts = cover.charts.len();
    let identity = DMatrix::identity(fiber, fiber);
    let mut dofs = None;
    let mut nablas = Vec::with_capacity(rank);
    for axis in 0..rank {
        let mut alpha = vec![0u32; rank];
        alpha[axis] = 1;
        let desc = OperatorDescription {
            fiber_dim: fiber,
            terms: vec![
                OperatorTerm {
                    alpha,
                    coeffs: (0..charts)
                        .map(|_| CoeffField::Constant(identity.clone()))
                        .collect(),
                },
                OperatorTerm {
                    alpha: vec![0; rank],
                    coeffs: (0..charts)
                        .map(|c| conn.coeffs[c][axis].clone())
                        .collect(),
                },
            ],
            edges: edges.to_vec(),
        };
        let op = assemble_operator(cover, chain, &desc)?;
        if dofs.is_none() {
            dofs = Some(op.dofs);
        }
        nablas.push(op.matrix);
    }
    Ok((dofs.expect("rank >= 1"), nablas))
}

/// The connection Laplacian: sum over axes of the quadrature adjoint of each
/// covariant derivative composed with the derivative itself.
pub fn connection_laplacian(dofs: &DofMap, nablas: &[CsrMatrix<C64>]) -> CsrMatrix<C64> {
    let w = dofs.weight_vector();
    let winv: Vec<f64> = w.iter().map(|v| 1.0 / v).collect();
    let mut total: Option<CsrMatrix<C64>> = None;
    for nabla in nablas {
        let mut star = adjoint(nabla);
        scale_cols(&mut star, &w);
        scale_rows(&mut star, &winv);
        let term = &star * nabla;
        total = Some(match total {
            None => term,
            Some(t) => t + term,
        });
    }
    total.expect("at least one derivative")
}

/// Marks dofs within `depth` grid cells of a one-sided chart edge, where
/// one-sided stencils pollute second order identities.
pub fn boundary_exclusion(
    cover: &Cover,
    edges: &[ChartEdgeRules],
    dofs: &DofMap,
    depth: usize,
) -> Result<Vec<bool>, CalculusError> {
    let mut excluded = vec![false; dofs.len()];
    for (dof, &(chart, sample)) in dofs.points.iter().enumerate() {
        let (shape, _) = grid(cover, chart)?;
        let multi = unflatten(sample, shape);
        for axis in 0..shape.len() {
            let (low, high) = &edges[chart].rules[axis];
            if matches!(low, EdgeRule::OneSided { .. }) && multi[axis] < depth {
                excluded[dof] = true;
            }
            if matches!(high, EdgeRule::OneSided { .. }) && multi[axis] + depth >= shape[axis] {
                excluded[dof] = true;
            }
        }
    }
    Ok(excluded)
}

/// Largest absolute row sum of D^2 - Laplacian - s/4 over rows outside the
/// excluded band. `scalar_curvature` is sampled per dof.
pub fn lichnerowicz_residual(
    dirac: &DiracOperator,
    laplacian: &CsrMatrix<C64>,
    scalar_curvature: &[f64],
    excluded: &[bool],
) -> f64 {
    let fiber = dirac.op.dofs.fiber_dim;
    let d2 = &dirac.op.matrix * &dirac.op.matrix;
    let mut residual = &d2 - laplacian;
    // Subtract the curvature term on the diagonal.
    let n = residual.nrows();
    let mut shift = TripletBuilder::new(n, n);
    for (dof, &s) in scalar_curvature.iter().enumerate() {
        for f in 0..fiber {
            shift.push_real(dof * fiber + f, dof * fiber + f, -0.25 * s);
        }
    }
    residual = residual + shift.build();
    let mut worst: f64 = 0.0;
    for (r, row) in residual.row_iter().enumerate() {
        if excluded[r / fiber] {
            continue;
        }
        let sum: f64 = row.values().iter().map(|v| v.norm()).sum();
        worst = worst.max(sum);
    }
    worst
}

/// Block-diagonal operator applying the same fiber map at every dof.
pub fn blockwise_operator(dofs: &DofMap, block: &DMatrix<C64>) -> CsrMatrix<C64> {
    let fiber = dofs.fiber_dim;
    let mut builder = TripletBuilder::new(dofs.dim(), dofs.dim());
    for dof in 0..dofs.len() {
        push_block(&mut builder, fiber, dof, dof, block);
    }
    builder.build()
}

/// Largest entry of the commutator U D - D U.
pub fn equivariance_residual(d: &CsrMatrix<C64>, u: &CsrMatrix<C64>) -> f64 {
    let diff = &(u * d) - &(d * u);
    diff.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Quadrature pairing sum of conj(x) w y over matrix indices.
pub fn pairing(dofs: &DofMap, x: &[C64], y: &[C64]) -> C64 {
    let w = dofs.weight_vector();
    let mut total = C64::new(0.0, 0.0);
    for i in 0..w.len() {
        total += x[i].conj() * y[i] * C64::new(w[i], 0.0);
    }
    total
}
