//! Vector-bundle gerbes: transition families whose triple products land in a
//! finite cyclic band, plus the constructions that produce them (frame lifts,
//! group-extension lifting problems, invariant subbundles, trivial embeddings).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::cech::{coboundary, Band, Cochain, SpinLiftFamily};
use crate::clifford::SpinElement;
use crate::cover::{Cover, CoverError, TransitionFamily, TransitionMaps};
use crate::linalg::{complexify, kernel_basis_dense, max_abs, C64};

/// A triple product must sit on a band element to within this.
pub const BAND_MEMBER_TOL: f64 = 1e-9;
/// Metric compatibility and structural identities (inverses, commuting
/// squares, band commutation) are held to this.
pub const STRUCTURE_TOL: f64 = 1e-10;
/// Induced transitions of an invariant subbundle must satisfy the strict
/// cocycle identity to within this.
pub const STRICT_COCYCLE_TOL: f64 = 1e-10;
/// An embedding into a trivial bundle must keep its smallest singular value
/// above this to count as injective.
pub const EMBEDDING_RANK_TOL: f64 = 1e-8;
/// Band searches enumerate powers of the generator; refuse absurd moduli.
const BAND_SEARCH_CAP: u64 = 1 << 16;

#[derive(Debug, Error)]
pub enum GerbeError {
    #[error("band generator must be square of dimension {expected}, got {rows}x{cols}")]
    BandShape { expected: usize, rows: usize, cols: usize },
    #[error("band generator does not have order {m}: generator^m deviates from identity by {residual:.3e}")]
    BandOrder { m: u64, residual: f64 },
    #[error("band modulus {m} exceeds the search cap {cap}")]
    BandTooLarge { m: u64, cap: u64 },
    #[error("cover error: {0}")]
    Cover(#[from] CoverError),
    #[error("cech error: {0}")]
    Cech(#[from] crate::cech::CechError),
    #[error("clifford error: {0}")]
    Clifford(#[from] crate::clifford::CliffordError),
    #[error("transition family fiber dimension {got} does not match the band fiber dimension {expected}")]
    TransitionShape { got: usize, expected: usize },
    #[error("not a gerbe over this band: triple ({i},{j},{k}) sample {sample} lies {residual:.3e} from the nearest band element")]
    OutsideBand { i: usize, j: usize, k: usize, sample: usize, residual: f64 },
    #[error("chart {chart} metric must be {expected}x{expected}, got {rows}x{cols}")]
    MetricShape { chart: usize, expected: usize, rows: usize, cols: usize },
    #[error("frame transitions for charts ({i},{j}) component {component} sample {sample} deviate from a rotation by {residual:.3e}")]
    NotARotation { i: usize, j: usize, component: usize, sample: usize, residual: f64 },
    #[error("frame dimension {n} out of range for directly lifted gerbes (need 2 or 3)")]
    FrameDimension { n: usize },
    #[error("lifting square fails on provided group sample {sample}: residual {residual:.3e}")]
    SquareSample { sample: usize, residual: f64 },
    #[error("lift family does not project onto the base family through f: charts ({i},{j}) component {component} sample {sample}, residual {residual:.3e}")]
    LiftProjection { i: usize, j: usize, component: usize, sample: usize, residual: f64 },
    #[error("projection f must be a surjection: smallest singular value {sigma:.3e}")]
    NotSurjective { sigma: f64 },
    #[error("band does not commute with transition for charts ({i},{j}) component {component} sample {sample}: residual {residual:.3e}")]
    BandNotCentral { i: usize, j: usize, component: usize, sample: usize, residual: f64 },
    #[error("band has no fixed vectors, invariant subbundle is empty")]
    EmptyFixedSpace,
    #[error("induced transitions violate the strict cocycle identity on triple ({i},{j},{k}) sample {sample}: residual {residual:.3e}")]
    InducedNotStrict { i: usize, j: usize, k: usize, sample: usize, residual: f64 },
    #[error("partition weight {piece} is nonzero at chart {chart} sample {sample} but no transition into chart {into} is available there")]
    PartitionNotSubordinate { piece: usize, chart: usize, sample: usize, into: usize },
    #[error("embedding loses rank at chart {chart} sample {sample}: smallest singular value {sigma:.3e}")]
    EmbeddingRankLoss { chart: usize, sample: usize, sigma: f64 },
}

/// Finite cyclic band together with its matrix realization: the residue `a`
/// acts as `generator^a` on the fiber.
#[derive(Debug, Clone)]
pub struct BandSpec {
    pub band: Band,
    pub generator: DMatrix<C64>,
}

impl BandSpec {
    pub fn new(band: Band, generator: DMatrix<C64>, fiber_dim: usize) -> Result<Self, GerbeError> {
        if generator.nrows() != fiber_dim || generator.ncols() != fiber_dim {
            return Err(GerbeError::BandShape {
                expected: fiber_dim,
                rows: generator.nrows(),
                cols: generator.ncols(),
            });
        }
        if band.modulus() > BAND_SEARCH_CAP {
            return Err(GerbeError::BandTooLarge { m: band.modulus(), cap: BAND_SEARCH_CAP });
        }
        let spec = Self { band, generator };
        let id = DMatrix::<C64>::identity(fiber_dim, fiber_dim);
        let full = spec.member(spec.band.modulus());
        let residual = max_abs(&(&full - &id));
        if residual > STRUCTURE_TOL {
            return Err(GerbeError::BandOrder { m: spec.band.modulus(), residual });
        }
        Ok(spec)
    }

    /// Sign band {+1, -1} acting by global sign on a fiber of the given dimension.
    pub fn signs(fiber_dim: usize) -> Self {
        let band = Band::f2();
        let generator = DMatrix::<C64>::identity(fiber_dim, fiber_dim).map(|v| -v);
        Self { band, generator }
    }

    pub fn fiber_dim(&self) -> usize {
        self.generator.nrows()
    }

    /// Matrix of the residue `a` (taken mod m, except that `a = m` itself is
    /// kept whole so order checking can exercise the full cycle).
    pub fn member(&self, a: u64) -> DMatrix<C64> {
        let n = self.fiber_dim();
        let mut acc = DMatrix::<C64>::identity(n, n);
        let mut base = self.generator.clone();
        let mut e = if a == self.band.modulus() { a } else { self.band.reduce(a) };
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// Band element closest to `c` in max-entry norm, with its distance.
    pub fn nearest_member(&self, c: &DMatrix<C64>) -> (u64, f64) {
        let mut best = (0u64, f64::INFINITY);
        let n = self.fiber_dim();
        let mut power = DMatrix::<C64>::identity(n, n);
        for a in 0..self.band.modulus() {
            let d = max_abs(&(c - &power));
            if d < best.1 {
                best = (a, d);
            }
            power = &power * &self.generator;
        }
        best
    }
}

/// A vector bundle over the cover whose transition family closes only up to
/// the band: each triple product is a band element, constant per triangle.
#[derive(Debug, Clone)]
pub struct VectorialGerbe {
    pub cover: Cover,
    pub transitions: TransitionFamily,
    pub band: BandSpec,
    /// Optional per-chart fiber metrics; identity when absent.
    pub metrics: Option<Vec<DMatrix<C64>>>,
}

/// Outcome of gerbe validation. Tolerance failures are reported here rather
/// than as errors so callers can surface the residuals; structural failures
/// (shape mismatches, out-of-band triples) abort instead.
#[derive(Debug, Clone)]
pub struct GerbeValidation {
    pub pass: bool,
    pub failures: Vec<String>,
    /// Band class of the triple products, one residue per nerve triangle.
    pub cocycle: Cochain,
    /// Worst distance from a triple product to its nearest band element.
    pub band_residual: f64,
    /// Worst deviation of paired transitions from mutual inverses.
    pub inverse_residual: f64,
    /// Worst metric compatibility defect, 0 when no metrics are declared.
    pub isometry_residual: f64,
    pub delta_is_zero: bool,
}

fn at_or_missing<'a>(
    family: &'a TransitionFamily,
    i: usize,
    j: usize,
    component: usize,
    sample: usize,
) -> Result<&'a DMatrix<C64>, GerbeError> {
    family
        .at(i, j, component, sample)
        .ok_or(GerbeError::Cover(CoverError::MissingTransition(i, j, component)))
}

impl VectorialGerbe {
    pub fn fiber_dim(&self) -> usize {
        self.band.fiber_dim()
    }

    fn metric(&self, chart: usize) -> DMatrix<C64> {
        match &self.metrics {
            Some(ms) => ms[chart].clone(),
            None => DMatrix::identity(self.fiber_dim(), self.fiber_dim()),
        }
    }

    fn check_shapes(&self) -> Result<(), GerbeError> {
        let n = self.fiber_dim();
        if self.transitions.fiber_dim != n {
            return Err(GerbeError::TransitionShape {
                got: self.transitions.fiber_dim,
                expected: n,
            });
        }
        if let Some(ms) = &self.metrics {
            for (chart, m) in ms.iter().enumerate() {
                if m.nrows() != n || m.ncols() != n {
                    return Err(GerbeError::MetricShape {
                        chart, expected: n, rows: m.nrows(), cols: m.ncols(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Full validation sweep: structure, inverses, triple products against the
    /// band, per-triangle constancy, cocycle closure, metric compatibility.
    pub fn validate(&self) -> Result<GerbeValidation, GerbeError> {
        self.check_shapes()?;
        self.cover.validate()?;
        self.transitions.validate_against(&self.cover)?;
        let nerve = self.cover.nerve()?;

        let mut failures = Vec::new();
        let id = DMatrix::<C64>::identity(self.fiber_dim(), self.fiber_dim());
        let mut inverse_residual: f64 = 0.0;
        for ov in &self.cover.overlaps {
            let (i, j) = ov.charts;
            for t in 0..ov.pairs.len() {
                let fwd = at_or_missing(&self.transitions, i, j, ov.component, t)?;
                let bwd = at_or_missing(&self.transitions, j, i, ov.component, t)?;
                inverse_residual = inverse_residual.max(max_abs(&(&(fwd * bwd) - &id)));
            }
        }

        // Triple products, nearest band member per sample, constancy per
        // triangle.
        let mut band_residual: f64 = 0.0;
        let mut values = vec![0u64; nerve.triangles().len()];
        let mut seen = vec![false; nerve.triangles().len()];
        for t in &self.cover.triples {
            let (i, j, k) = t.charts;
            let gij = at_or_missing(&self.transitions, i, j, t.ij.0, t.ij.1)?;
            let gjk = at_or_missing(&self.transitions, j, k, t.jk.0, t.jk.1)?;
            let gki = at_or_missing(&self.transitions, k, i, t.ik.0, t.ik.1)?;
            let c = &(gij * gjk) * gki;
            let (a, residual) = self.band.nearest_member(&c);
            if residual > BAND_MEMBER_TOL {
                return Err(GerbeError::OutsideBand {
                    i, j, k,
                    sample: t.ij.1,
                    residual,
                });
            }
            band_residual = band_residual.max(residual);
            let ti = nerve
                .triangle_index([i, j, k])
                .expect("cover triples index nerve triangles");
            if seen[ti] && values[ti] != a {
                failures.push(format!(
                    "triple ({i},{j},{k}) class is not constant across samples: {} vs {a}",
                    values[ti]
                ));
            }
            values[ti] = a;
            seen[ti] = true;
        }
        for (ti, s) in seen.iter().enumerate() {
            if !s {
                let t = nerve.triangles()[ti];
                failures.push(format!(
                    "nerve triangle ({},{},{}) has no sampled triple point",
                    t[0], t[1], t[2]
                ));
            }
        }
        let cocycle = Cochain::new(&nerve, 2, self.band.band, values)?;
        let delta = coboundary(&nerve, &cocycle)?;
        let delta_is_zero = delta.is_zero();
        if !delta_is_zero {
            failures.push("band classes do not close as a cocycle".to_string());
        }

        // Metric compatibility: transitions are isometries chart to chart and
        // the band preserves every chart metric.
        let mut isometry_residual: f64 = 0.0;
        if self.metrics.is_some() {
            for ov in &self.cover.overlaps {
                let (i, j) = ov.charts;
                let mi = self.metric(i);
                let mj = self.metric(j);
                for t in 0..ov.pairs.len() {
                    let g = at_or_missing(&self.transitions, i, j, ov.component, t)?;
                    let pulled = &(&g.adjoint() * &mi) * g;
                    isometry_residual = isometry_residual.max(max_abs(&(&pulled - &mj)));
                }
            }
            let gamma = &self.band.generator;
            for chart in 0..self.cover.charts.len() {
                let m = self.metric(chart);
                let pulled = &(&gamma.adjoint() * &m) * gamma;
                isometry_residual = isometry_residual.max(max_abs(&(&pulled - &m)));
            }
            if isometry_residual > STRUCTURE_TOL {
                failures.push(format!(
                    "transitions are not isometries of the declared metrics: residual {isometry_residual:.3e}"
                ));
            }
        }

        Ok(GerbeValidation {
            pass: failures.is_empty(),
            failures,
            cocycle,
            band_residual,
            inverse_residual,
            isometry_residual,
            delta_is_zero,
        })
    }
}

fn rotation_from_matrix(
    m: &DMatrix<C64>,
    i: usize,
    j: usize,
    component: usize,
    sample: usize,
) -> Result<DMatrix<f64>, GerbeError> {
    let n = m.nrows();
    let real = DMatrix::from_fn(n, n, |r, c| m[(r, c)].re);
    let mut residual = m.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let gram = real.transpose() * &real;
    residual = residual.max((gram - DMatrix::<f64>::identity(n, n)).abs().max());
    let det = real.clone().determinant();
    residual = residual.max((det - 1.0).abs());
    if residual > crate::clifford::ROTATION_INPUT_TOL {
        return Err(GerbeError::NotARotation { i, j, component, sample, residual });
    }
    Ok(real)
}

fn spin_to_block(g: &SpinElement) -> DMatrix<C64> {
    complexify(&g.element().left_mul_matrix())
}

/// Lift sampled frame rotations to spin representatives, continuous along each
/// overlap component, and package their left-multiplication action on the full
/// Clifford fiber as a gerbe banded by {+1, -1}.
///
/// `frames` holds sampled rotation matrices with the same keying convention as
/// any transition family. Returns the gerbe together with the chosen lifts so
/// obstruction computations can reuse them.
pub fn clifford_gerbe(
    cover: &Cover,
    frames: &TransitionFamily,
) -> Result<(VectorialGerbe, SpinLiftFamily), GerbeError> {
    let n = frames.fiber_dim;
    if !(2..=3).contains(&n) {
        return Err(GerbeError::FrameDimension { n });
    }
    cover.validate()?;
    frames.validate_against(cover)?;

    let mut lifts: SpinLiftFamily = BTreeMap::new();
    for ov in &cover.overlaps {
        let (i, j) = ov.charts;
        let mut path = Vec::with_capacity(ov.pairs.len());
        for s in 0..ov.pairs.len() {
            let m = at_or_missing(frames, i, j, ov.component, s)?;
            path.push(rotation_from_matrix(m, i, j, ov.component, s)?);
        }
        let forward = crate::clifford::lift_path(&path)?;
        let mut backward = Vec::with_capacity(forward.len());
        for g in &forward {
            backward.push(SpinElement::new(g.inverse())?);
        }
        lifts.insert((i, j, ov.component), forward);
        lifts.insert((j, i, ov.component), backward);
    }

    let dim = 1usize << n;
    let mut maps = BTreeMap::new();
    for (key, family) in &lifts {
        let blocks: Vec<DMatrix<C64>> = family.iter().map(spin_to_block).collect();
        maps.insert(*key, TransitionMaps::PerSample(blocks));
    }
    let transitions = TransitionFamily { fiber_dim: dim, maps };
    let band = BandSpec::signs(dim);
    let gerbe = VectorialGerbe {
        cover: cover.clone(),
        transitions,
        band,
        metrics: None,
    };
    Ok((gerbe, lifts))
}

/// Data of a lifting problem along a central extension: a base transition
/// family in the quotient group, a chosen family of lifts represented on a
/// bigger fiber, the projection intertwiner, and sample pairs of the two
/// representations for square checking.
#[derive(Debug, Clone)]
pub struct LiftingProblemSpec {
    /// Base transitions, represented on the small fiber.
    pub base: TransitionFamily,
    /// Chosen lifts, represented on the big fiber.
    pub lifts: TransitionFamily,
    /// Intertwiner from the big fiber onto the small fiber.
    pub projection: DMatrix<C64>,
    /// Band of the extension kernel, acting on the big fiber.
    pub band: BandSpec,
    /// Pairs (action on big fiber, action on small fiber) of further group
    /// samples the square must commute on.
    pub square_samples: Vec<(DMatrix<C64>, DMatrix<C64>)>,
}

/// Check the commuting square and package the lift family as a gerbe banded by
/// the extension kernel.
pub fn lifting_gerbe(cover: &Cover, spec: &LiftingProblemSpec) -> Result<VectorialGerbe, GerbeError> {
    cover.validate()?;
    spec.base.validate_against(cover)?;
    spec.lifts.validate_against(cover)?;
    let f = &spec.projection;

    let svd = f.clone().svd(false, false);
    let sigma_min = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(sigma_min > EMBEDDING_RANK_TOL) {
        return Err(GerbeError::NotSurjective { sigma: sigma_min });
    }

    for (idx, (big, small)) in spec.square_samples.iter().enumerate() {
        let residual = max_abs(&(&(f * big) - &(small * f)));
        if residual > STRUCTURE_TOL {
            return Err(GerbeError::SquareSample { sample: idx, residual });
        }
    }

    // The chosen lifts must project onto the base family through f.
    for ov in &cover.overlaps {
        let (i, j) = ov.charts;
        for (a, b) in [(i, j), (j, i)] {
            for s in 0..ov.pairs.len() {
                let big = at_or_missing(&spec.lifts, a, b, ov.component, s)?;
                let small = at_or_missing(&spec.base, a, b, ov.component, s)?;
                let residual = max_abs(&(&(f * big) - &(small * f)));
                if residual > STRUCTURE_TOL {
                    return Err(GerbeError::LiftProjection {
                        i: a, j: b, component: ov.component, sample: s, residual,
                    });
                }
            }
        }
    }

    Ok(VectorialGerbe {
        cover: cover.clone(),
        transitions: spec.lifts.clone(),
        band: spec.band.clone(),
        metrics: None,
    })
}

/// Fixed space of the band action together with the strict bundle it induces.
#[derive(Debug, Clone)]
pub struct InvariantSubbundle {
    /// Orthonormal basis of the band-fixed subspace, columns of a fiber_dim x
    /// fixed_dim matrix shared by every chart.
    pub basis: DMatrix<C64>,
    /// Transitions compressed to the fixed subspace; these close strictly.
    pub induced: TransitionFamily,
    pub fixed_dim: usize,
}

/// Compress a gerbe to the subspace its band fixes. The result is an honest
/// bundle: induced transitions satisfy the strict cocycle identity, which is
/// verified here on every sampled triple.
pub fn invariant_subbundle(gerbe: &VectorialGerbe) -> Result<InvariantSubbundle, GerbeError> {
    let n = gerbe.fiber_dim();
    let id = DMatrix::<C64>::identity(n, n);
    let shifted = &gerbe.band.generator - &id;
    let (_, basis) = kernel_basis_dense(&shifted, 1e-8);
    let fixed_dim = basis.ncols();
    if fixed_dim == 0 {
        return Err(GerbeError::EmptyFixedSpace);
    }

    // Transitions must commute with the band to even act on the fixed space.
    let gamma = &gerbe.band.generator;
    let mut maps = BTreeMap::new();
    for ov in &gerbe.cover.overlaps {
        let (i, j) = ov.charts;
        for (a, b) in [(i, j), (j, i)] {
            let mut induced = Vec::with_capacity(ov.pairs.len());
            for s in 0..ov.pairs.len() {
                let g = at_or_missing(&gerbe.transitions, a, b, ov.component, s)?;
                let residual = max_abs(&(&(g * gamma) - &(gamma * g)));
                if residual > STRUCTURE_TOL {
                    return Err(GerbeError::BandNotCentral {
                        i: a, j: b, component: ov.component, sample: s, residual,
                    });
                }
                induced.push(&(&basis.adjoint() * g) * &basis);
            }
            maps.insert((a, b, ov.component), TransitionMaps::PerSample(induced));
        }
    }
    let induced = TransitionFamily { fiber_dim: fixed_dim, maps };

    // Strictness: every sampled triple product of induced maps is the identity.
    let idt = DMatrix::<C64>::identity(fixed_dim, fixed_dim);
    for t in &gerbe.cover.triples {
        let (i, j, k) = t.charts;
        let hij = at_or_missing(&induced, i, j, t.ij.0, t.ij.1)?;
        let hjk = at_or_missing(&induced, j, k, t.jk.0, t.jk.1)?;
        let hki = at_or_missing(&induced, k, i, t.ik.0, t.ik.1)?;
        let c = &(hij * hjk) * hki;
        let residual = max_abs(&(&c - &idt));
        if residual > STRICT_COCYCLE_TOL {
            return Err(GerbeError::InducedNotStrict { i, j, k, sample: t.ij.1, residual });
        }
    }

    Ok(InvariantSubbundle { basis, induced, fixed_dim })
}

/// Per-sample weights of a partition used for embedding; the full partition
/// type with quadrature support lives in the sections module, this is the
/// minimal shape the embedding needs.
pub struct EmbeddingPartition<'a> {
    /// Piece p is supported in chart `chart_of[p]`.
    pub chart_of: &'a [usize],
    /// weight(p, chart, sample) evaluates piece p at a sample of any chart.
    pub weight: &'a dyn Fn(usize, usize, usize) -> f64,
}

/// Result of embedding a chart's fiber data into a trivial bundle of rank
/// pieces x fiber_dim: the per-sample block column matrices, all full rank.
pub struct TrivialEmbedding {
    pub chart: usize,
    /// One (pieces * fiber_dim) x fiber_dim matrix per sample of the chart.
    pub blocks: Vec<DMatrix<C64>>,
    /// Smallest singular value seen across samples.
    pub min_sigma: f64,
}

/// Embed the fiber over chart `chart` into a trivial bundle by stacking
/// partition-weighted transitions, one block per partition piece. Requires
/// the partition weights of foreign pieces to vanish wherever no transition
/// into their chart is sampled.
pub fn embed_in_trivial(
    gerbe: &VectorialGerbe,
    chart: usize,
    partition: &EmbeddingPartition,
) -> Result<TrivialEmbedding, GerbeError> {
    let n = gerbe.fiber_dim();
    let pieces = partition.chart_of.len();
    let samples = gerbe.cover.charts[chart].sample_count();

    // Transition from chart into each foreign chart, indexed by the
    // chart-local sample where one is available.
    let mut into: BTreeMap<usize, BTreeMap<usize, DMatrix<C64>>> = BTreeMap::new();
    for ov in &gerbe.cover.overlaps {
        let (i, j) = ov.charts;
        let other = if i == chart {
            j
        } else if j == chart {
            i
        } else {
            continue;
        };
        let entry = into.entry(other).or_default();
        for (pos, pair) in ov.pairs.iter().enumerate() {
            let sample_here = if chart == i { pair.0 } else { pair.1 };
            let g = at_or_missing(&gerbe.transitions, other, chart, ov.component, pos)?;
            entry.insert(sample_here, g.clone());
        }
    }

    let identity = DMatrix::<C64>::identity(n, n);
    let mut blocks = Vec::with_capacity(samples);
    let mut min_sigma = f64::INFINITY;
    for s in 0..samples {
        let mut k = DMatrix::<C64>::zeros(pieces * n, n);
        for p in 0..pieces {
            let home = partition.chart_of[p];
            let w = (partition.weight)(p, chart, s);
            if w == 0.0 {
                continue;
            }
            let g = if home == chart {
                &identity
            } else {
                match into.get(&home).and_then(|m| m.get(&s)) {
                    Some(g) => g,
                    None => {
                        return Err(GerbeError::PartitionNotSubordinate {
                            piece: p, chart, sample: s, into: home,
                        })
                    }
                }
            };
            let scaled = g.map(|v| v * C64::new(w, 0.0));
            k.view_mut((p * n, 0), (n, n)).copy_from(&scaled);
        }
        let svd = k.clone().svd(false, false);
        let sigma = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(sigma > EMBEDDING_RANK_TOL) {
            return Err(GerbeError::EmbeddingRankLoss { chart, sample: s, sigma });
        }
        min_sigma = min_sigma.min(sigma);
        blocks.push(k);
    }

    Ok(TrivialEmbedding { chart, blocks, min_sigma })
}

/// A circle element and its chosen square root, each acting diagonally; used
/// by tests and the circle-extension example datasets.
pub fn unitary_square_pair(theta: f64) -> (DMatrix<C64>, DMatrix<C64>) {
    let big = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        C64::from_polar(1.0, theta),
        C64::from_polar(1.0, theta / 2.0),
    ]));
    let small = DMatrix::from_element(1, 1, C64::from_polar(1.0, theta));
    (big, small)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{Chart, ChartGeometry, OverlapComponent, TripleSample};
    use nalgebra::DVector;

    fn rot2(theta: f64) -> DMatrix<C64> {
        complexify(&DMatrix::from_row_slice(2, 2, &[
            theta.cos(), -theta.sin(),
            theta.sin(), theta.cos(),
        ]))
    }

    /// Three charts with one shared sample per pair and one triple point.
    /// Chart sample 0 is the shared triple point throughout.
    fn tiny_triple_cover() -> Cover {
        let charts = (0..3)
            .map(|id| Chart {
                id,
                geometry: ChartGeometry::Cloud { points: vec![vec![id as f64]; 2] },
                weights: vec![1.0; 2],
            })
            .collect();
        let overlaps = vec![
            OverlapComponent { charts: (0, 1), component: 0, pairs: vec![(0, 0)] },
            OverlapComponent { charts: (0, 2), component: 0, pairs: vec![(0, 0)] },
            OverlapComponent { charts: (1, 2), component: 0, pairs: vec![(0, 0)] },
        ];
        let triples = vec![TripleSample {
            charts: (0, 1, 2),
            ij: (0, 0),
            jk: (0, 0),
            ik: (0, 0),
        }];
        Cover {
            charts,
            overlaps,
            triples,
            quadruples: vec![],
        }
    }

    fn constant_family(
        dim: usize,
        g01: DMatrix<C64>,
        g02: DMatrix<C64>,
        g12: DMatrix<C64>,
    ) -> TransitionFamily {
        let mut maps = BTreeMap::new();
        let inv = |m: &DMatrix<C64>| m.clone().try_inverse().expect("invertible");
        maps.insert((0, 1, 0), TransitionMaps::Constant(g01.clone()));
        maps.insert((1, 0, 0), TransitionMaps::Constant(inv(&g01)));
        maps.insert((0, 2, 0), TransitionMaps::Constant(g02.clone()));
        maps.insert((2, 0, 0), TransitionMaps::Constant(inv(&g02)));
        maps.insert((1, 2, 0), TransitionMaps::Constant(g12.clone()));
        maps.insert((2, 1, 0), TransitionMaps::Constant(inv(&g12)));
        TransitionFamily { fiber_dim: dim, maps }
    }

    #[test]
    fn trivial_triple_cover_validates_with_zero_class() {
        let cover = tiny_triple_cover();
        let id = DMatrix::<C64>::identity(2, 2);
        let family = constant_family(2, id.clone(), id.clone(), id);
        let gerbe = VectorialGerbe {
            cover,
            transitions: family,
            band: BandSpec::signs(2),
            metrics: None,
        };
        let v = gerbe.validate().expect("structurally sound");
        assert!(v.pass, "failures: {:?}", v.failures);
        assert!(v.delta_is_zero);
        assert_eq!(v.cocycle.values, vec![0]);
        assert!(v.band_residual < 1e-14);
    }

    #[test]
    fn sign_frustrated_triple_lands_on_nonzero_class() {
        let cover = tiny_triple_cover();
        let id = DMatrix::<C64>::identity(2, 2);
        let minus = id.map(|v| -v);
        // g01 g12 g20 = (-I) I I = -I picks out residue 1.
        let family = constant_family(2, minus, id.clone(), id);
        let gerbe = VectorialGerbe {
            cover,
            transitions: family,
            band: BandSpec::signs(2),
            metrics: None,
        };
        let v = gerbe.validate().expect("still a gerbe, class is just nonzero");
        assert!(v.pass, "failures: {:?}", v.failures);
        assert_eq!(v.cocycle.values, vec![1]);
    }

    #[test]
    fn perturbed_transitions_leave_the_band() {
        let cover = tiny_triple_cover();
        let id = DMatrix::<C64>::identity(2, 2);
        let mut bumped = id.clone();
        bumped[(0, 1)] = C64::new(1e-3, 0.0);
        let family = constant_family(2, bumped, id.clone(), id);
        let gerbe = VectorialGerbe {
            cover,
            transitions: family,
            band: BandSpec::signs(2),
            metrics: None,
        };
        match gerbe.validate() {
            Err(GerbeError::OutsideBand { residual, .. }) => {
                assert!((residual - 1e-3).abs() < 1e-4, "residual {residual}");
            }
            other => panic!("expected out-of-band failure, got {other:?}"),
        }
    }

    #[test]
    fn band_spec_rejects_wrong_order() {
        let band = Band::new(3).unwrap();
        let gen = DMatrix::<C64>::identity(2, 2).map(|v| -v);
        // (-I)^3 = -I, not the identity.
        assert!(matches!(
            BandSpec::new(band, gen, 2),
            Err(GerbeError::BandOrder { .. })
        ));
    }

    #[test]
    fn band_nearest_member_identifies_powers() {
        let band = Band::new(4).unwrap();
        let gen = DMatrix::from_element(1, 1, C64::new(0.0, 1.0));
        let spec = BandSpec::new(band, gen, 1).unwrap();
        let probe = DMatrix::from_element(1, 1, C64::new(0.0, -1.0));
        let (a, d) = spec.nearest_member(&probe);
        assert_eq!(a, 3);
        assert!(d < 1e-15);
    }

    #[test]
    fn clifford_gerbe_matches_spin_obstruction() {
        let cover = tiny_triple_cover();
        // Frame rotations compose to a full turn around the triple point, so
        // the frustration sits purely in the lift and the class is nonzero.
        let t = 2.0 * std::f64::consts::PI / 3.0;
        let frames = constant_family(2, rot2(t), rot2(-t), rot2(t));
        let (gerbe, lifts) = clifford_gerbe(&cover, &frames).expect("liftable");
        let v = gerbe.validate().expect("valid gerbe");
        assert!(v.pass, "failures: {:?}", v.failures);
        assert_eq!(v.cocycle.values, vec![1]);

        let obstruction = crate::cech::spin_obstruction(&cover, &lifts).expect("sampled");
        assert_eq!(obstruction.values, v.cocycle.values);
    }

    #[test]
    fn clifford_gerbe_transitions_act_on_full_clifford_fiber() {
        let cover = tiny_triple_cover();
        let frames = constant_family(
            2,
            rot2(0.3),
            rot2(0.3),
            DMatrix::<C64>::identity(2, 2),
        );
        let (gerbe, _) = clifford_gerbe(&cover, &frames).expect("liftable");
        assert_eq!(gerbe.fiber_dim(), 4);
        let g = gerbe.transitions.at(0, 1, 0, 0).unwrap();
        // Left multiplication by a unit even element is orthogonal on the
        // blade basis, so columns stay unit length.
        for c in 0..4 {
            let norm: f64 = (0..4).map(|r| g[(r, c)].norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lifting_square_detects_broken_projection() {
        let cover = tiny_triple_cover();
        let theta = 0.7;
        let (big, small) = unitary_square_pair(theta);
        let base = constant_family(
            1,
            small.clone(),
            small.clone(),
            DMatrix::<C64>::identity(1, 1),
        );
        let lifts = constant_family(
            2,
            big.clone(),
            big.clone(),
            DMatrix::<C64>::identity(2, 2),
        );
        let projection = DMatrix::from_row_slice(1, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let band = BandSpec::new(
            Band::f2(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)])),
            2,
        )
        .unwrap();
        let spec = LiftingProblemSpec {
            base,
            lifts,
            projection,
            band,
            square_samples: vec![(big.clone(), small.clone())],
        };
        let gerbe = lifting_gerbe(&cover, &spec).expect("square commutes");
        gerbe.validate().expect("valid gerbe");

        // Breaking the projected entry of one lift must be caught.
        let mut bad = spec.clone();
        let mut broken = big.clone();
        broken[(0, 0)] *= C64::new(0.999, 0.0);
        bad.lifts = constant_family(
            2,
            broken,
            big.clone(),
            DMatrix::<C64>::identity(2, 2),
        );
        assert!(matches!(
            lifting_gerbe(&cover, &bad),
            Err(GerbeError::LiftProjection { .. })
        ));
    }

    #[test]
    fn invariant_subbundle_extracts_fixed_block() {
        let cover = tiny_triple_cover();
        // Band acts as diag(1, 1, -1): fixed space is the first two coords.
        let gamma = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(-1.0, 0.0),
        ]));
        let band = BandSpec::new(Band::f2(), gamma, 3).unwrap();
        // Block-diagonal transitions commute with the band; the upper block
        // closes strictly, the lower block is sign-frustrated.
        let block = |theta: f64, s: f64| -> DMatrix<C64> {
            let mut m = DMatrix::<C64>::zeros(3, 3);
            m[(0, 0)] = C64::new(theta.cos(), 0.0);
            m[(0, 1)] = C64::new(-theta.sin(), 0.0);
            m[(1, 0)] = C64::new(theta.sin(), 0.0);
            m[(1, 1)] = C64::new(theta.cos(), 0.0);
            m[(2, 2)] = C64::new(s, 0.0);
            m
        };
        let family = constant_family(
            3,
            block(0.4, -1.0),
            block(0.9, 1.0),
            block(0.5, 1.0),
        );
        let gerbe = VectorialGerbe {
            cover,
            transitions: family,
            band,
            metrics: None,
        };
        let v = gerbe.validate().expect("valid");
        assert!(v.pass, "failures: {:?}", v.failures);
        assert_eq!(v.cocycle.values, vec![1]);

        let sub = invariant_subbundle(&gerbe).expect("fixed space exists");
        assert_eq!(sub.fixed_dim, 2);
        let h = sub.induced.at(0, 1, 0, 0).unwrap();
        // The induced map is the rotation block expressed in the basis of the
        // fixed space, so it stays unitary.
        let gram = &h.adjoint() * h;
        assert!(max_abs(&(&gram - &DMatrix::<C64>::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn embedding_stacks_weighted_transitions() {
        let cover = tiny_triple_cover();
        let family = constant_family(2, rot2(0.3), rot2(1.1), rot2(0.8));
        let gerbe = VectorialGerbe {
            cover,
            transitions: family,
            band: BandSpec::signs(2),
            metrics: None,
        };
        let chart_of = [0usize, 1, 2];
        // Sample 0 of chart 0 is shared with both other charts; sample 1 is
        // private, so foreign weights must vanish there.
        let weight = |p: usize, chart: usize, sample: usize| -> f64 {
            match (p, chart, sample) {
                (0, 0, _) => 0.5,
                (1, 0, 0) => 0.25,
                (2, 0, 0) => 0.25,
                _ => 0.0,
            }
        };
        let partition = EmbeddingPartition { chart_of: &chart_of, weight: &weight };
        let emb = embed_in_trivial(&gerbe, 0, &partition).expect("subordinate");
        assert_eq!(emb.blocks.len(), 2);
        assert_eq!(emb.blocks[0].nrows(), 6);
        assert!(emb.min_sigma > EMBEDDING_RANK_TOL);
        // Private sample gets only the identity block scaled by 0.5.
        let private = &emb.blocks[1];
        assert!((private[(0, 0)].re - 0.5).abs() < 1e-15);
        assert_eq!(private[(2, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn embedding_rejects_nonsubordinate_weights() {
        let cover = tiny_triple_cover();
        let family = constant_family(2, rot2(0.3), rot2(1.1), rot2(0.8));
        let gerbe = VectorialGerbe {
            cover,
            transitions: family,
            band: BandSpec::signs(2),
            metrics: None,
        };
        let chart_of = [0usize, 1];
        // Piece 1 claims weight at chart 0 sample 1 where no transition into
        // chart 1 exists.
        let weight = |p: usize, _chart: usize, _sample: usize| -> f64 {
            if p == 0 { 0.5 } else { 0.5 }
        };
        let partition = EmbeddingPartition { chart_of: &chart_of, weight: &weight };
        assert!(matches!(
            embed_in_trivial(&gerbe, 0, &partition),
            Err(GerbeError::PartitionNotSubordinate { sample: 1, .. })
        ));
    }
}
