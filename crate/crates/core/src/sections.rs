//! Global sections of a transition chain: compatibility checking, bump
//! construction, partition-weighted inner products, projection to a base
//! bundle, the defect 2-cocycle, and formal sums across chains.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::cover::{Cover, TransitionFamily};
use crate::linalg::C64;

/// Partition weights must sum to one at every manifold point within this.
pub const PARTITION_SUM_TOL: f64 = 1e-12;
/// Default overlap-compatibility tolerance for sections.
pub const DEFAULT_SECTION_TOL: f64 = 1e-8;
/// Base sections obtained through a projection must glue within this.
pub const BASE_GLUE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SectionError {
    #[error("expected values for {expected} charts, got {got}")]
    ChartCount { got: usize, expected: usize },
    #[error("chart {chart}: expected {expected} sampled fiber vectors, got {got}")]
    SampleCount { chart: usize, got: usize, expected: usize },
    #[error("chart {chart}: fiber dimension {got} does not match {expected}")]
    FiberDim { chart: usize, got: usize, expected: usize },
    #[error("partition piece {piece} declares weights over chart {chart} with {got} entries, expected {expected}")]
    WeightCount { piece: usize, chart: usize, got: usize, expected: usize },
    #[error("partition piece {piece} has negative weight {value} at chart {chart} sample {sample}")]
    NegativeWeight { piece: usize, chart: usize, sample: usize, value: f64 },
    #[error("partition weights sum to {total} at a sample of chart {chart}, not 1")]
    PartitionSum { chart: usize, total: f64 },
    #[error("partition piece {piece} references chart {chart} outside the cover")]
    PieceChartRange { piece: usize, chart: usize },
    #[error("section is not compatible with the chain: {0}")]
    Incompatible(DefectReport),
    #[error("missing transition for overlap ({0},{1}) component {2}")]
    MissingTransition(usize, usize, usize),
    #[error("sections belong to different chains: {0} vs {1}")]
    ChainMismatch(String, String),
    #[error("chart {chart} has no samples outside every other chart")]
    NoPrivateRegion { chart: usize },
    #[error("projected base sections fail to glue: {0}")]
    BaseGlueFailed(DefectReport),
    #[error("cover error: {0}")]
    Cover(#[from] crate::cover::CoverError),
    #[error("formal summands must share fiber dimension and sample layout on chain {0}")]
    SummandShape(String),
}

/// Worst overlap defects of a candidate section, per overlap component and
/// overall.
#[derive(Debug, Clone)]
pub struct DefectReport {
    pub per_overlap: BTreeMap<(usize, usize, usize), f64>,
    pub max: f64,
}

impl std::fmt::Display for DefectReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "max overlap defect {:.3e} across {} overlap components",
            self.max,
            self.per_overlap.len()
        )
    }
}

/// Partition of unity subordinate to the cover: each piece lives on one chart
/// and stores a weight per sample of that chart.
#[derive(Debug, Clone)]
pub struct PartitionPiece {
    pub chart: usize,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    pub pieces: Vec<PartitionPiece>,
}

impl PartitionOfUnity {
    /// Indicator partition by sample ownership: one piece per chart, weight 1
    /// exactly on the samples the chart owns. Sums to 1 by construction and
    /// squares to itself, so products weighted by it are quadratures over
    /// manifold points.
    pub fn owner_indicator(cover: &Cover) -> Self {
        let ownership = cover.ownership();
        let pieces = cover
            .charts
            .iter()
            .map(|chart| {
                let weights = (0..chart.sample_count())
                    .map(|s| {
                        if ownership.contains_key(&(chart.id, s)) {
                            0.0
                        } else {
                            1.0
                        }
                    })
                    .collect();
                PartitionPiece { chart: chart.id, weights }
            })
            .collect();
        Self { pieces }
    }

    pub fn validate(&self, cover: &Cover) -> Result<(), SectionError> {
        for (p, piece) in self.pieces.iter().enumerate() {
            if piece.chart >= cover.charts.len() {
                return Err(SectionError::PieceChartRange { piece: p, chart: piece.chart });
            }
            let expected = cover.charts[piece.chart].sample_count();
            if piece.weights.len() != expected {
                return Err(SectionError::WeightCount {
                    piece: p,
                    chart: piece.chart,
                    got: piece.weights.len(),
                    expected,
                });
            }
            for (s, &w) in piece.weights.iter().enumerate() {
                if w < 0.0 {
                    return Err(SectionError::NegativeWeight {
                        piece: p,
                        chart: piece.chart,
                        sample: s,
                        value: w,
                    });
                }
            }
        }
        // Weights sum to 1 at every manifold point, counting each piece at
        // the sample of its own chart.
        for group in cover.manifold_points() {
            let mut total = 0.0;
            for (p, piece) in self.pieces.iter().enumerate() {
                let _ = p;
                for &(chart, sample) in &group {
                    if chart == piece.chart {
                        total += piece.weights[sample];
                    }
                }
            }
            if (total - 1.0).abs() > PARTITION_SUM_TOL {
                let (chart, _) = group[0];
                return Err(SectionError::PartitionSum { chart, total });
            }
        }
        Ok(())
    }
}

/// Per-chart sampled fiber vectors that glue across overlaps under a named
/// chain. Chart `c` holds a fiber_dim x sample_count matrix, one column per
/// sample.
#[derive(Debug, Clone)]
pub struct GlobalSection {
    pub chain_id: String,
    pub fiber_dim: usize,
    pub values: Vec<DMatrix<C64>>,
}

impl GlobalSection {
    pub fn zeros(cover: &Cover, chain_id: &str, fiber_dim: usize) -> Self {
        let values = cover
            .charts
            .iter()
            .map(|c| DMatrix::zeros(fiber_dim, c.sample_count()))
            .collect();
        Self {
            chain_id: chain_id.to_string(),
            fiber_dim,
            values,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, SectionError> {
        if self.chain_id != other.chain_id {
            return Err(SectionError::ChainMismatch(
                self.chain_id.clone(),
                other.chain_id.clone(),
            ));
        }
        if self.fiber_dim != other.fiber_dim || self.values.len() != other.values.len() {
            return Err(SectionError::SummandShape(self.chain_id.clone()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            chain_id: self.chain_id.clone(),
            fiber_dim: self.fiber_dim,
            values,
        })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            chain_id: self.chain_id.clone(),
            fiber_dim: self.fiber_dim,
            values: self.values.iter().map(|m| m.map(|v| v * factor)).collect(),
        }
    }
}

fn check_shapes(
    cover: &Cover,
    fiber_dim: usize,
    values: &[DMatrix<C64>],
) -> Result<(), SectionError> {
    if values.len() != cover.charts.len() {
        return Err(SectionError::ChartCount {
            got: values.len(),
            expected: cover.charts.len(),
        });
    }
    for (chart, m) in values.iter().enumerate() {
        if m.nrows() != fiber_dim {
            return Err(SectionError::FiberDim {
                chart,
                got: m.nrows(),
                expected: fiber_dim,
            });
        }
        let expected = cover.charts[chart].sample_count();
        if m.ncols() != expected {
            return Err(SectionError::SampleCount {
                chart,
                got: m.ncols(),
                expected,
            });
        }
    }
    Ok(())
}

fn max_abs_vec(v: &DVector<C64>) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Worst |s_i - g_ij(s_j)| per overlap component for candidate per-chart
/// values over the chain.
pub fn section_defects(
    cover: &Cover,
    chain: &TransitionFamily,
    values: &[DMatrix<C64>],
) -> Result<DefectReport, SectionError> {
    check_shapes(cover, chain.fiber_dim, values)?;
    let mut per_overlap = BTreeMap::new();
    let mut max: f64 = 0.0;
    for ov in &cover.overlaps {
        let (i, j) = ov.charts;
        let mut worst: f64 = 0.0;
        for (pos, &(si, sj)) in ov.pairs.iter().enumerate() {
            let g = chain
                .at(i, j, ov.component, pos)
                .ok_or(SectionError::MissingTransition(i, j, ov.component))?;
            let defect = values[i].column(si) - g * values[j].column(sj);
            worst = worst.max(max_abs_vec(&defect));
        }
        per_overlap.insert((i, j, ov.component), worst);
        max = max.max(worst);
    }
    Ok(DefectReport { per_overlap, max })
}

/// Accept per-chart values as a global section of the chain when every
/// overlap defect stays below the tolerance; otherwise hand back the report.
pub fn check_global_section(
    cover: &Cover,
    chain_id: &str,
    chain: &TransitionFamily,
    values: Vec<DMatrix<C64>>,
    tolerance: f64,
) -> Result<GlobalSection, SectionError> {
    let report = section_defects(cover, chain, &values)?;
    if report.max >= tolerance {
        return Err(SectionError::Incompatible(report));
    }
    Ok(GlobalSection {
        chain_id: chain_id.to_string(),
        fiber_dim: chain.fiber_dim,
        values,
    })
}

/// Samples of `chart` matched into no other chart.
fn private_samples(cover: &Cover, chart: usize) -> Vec<usize> {
    let mut shared = vec![false; cover.charts[chart].sample_count()];
    for ov in &cover.overlaps {
        let (i, j) = ov.charts;
        for &(si, sj) in &ov.pairs {
            if i == chart {
                shared[si] = true;
            }
            if j == chart {
                shared[sj] = true;
            }
        }
    }
    shared
        .iter()
        .enumerate()
        .filter(|(_, &s)| !s)
        .map(|(idx, _)| idx)
        .collect()
}

/// A section supported strictly inside one chart's private region: a raised
/// cosine profile over the private samples on the first fiber coordinate,
/// zero elsewhere. Always passes compatibility because it vanishes at every
/// matched sample.
pub fn construct_bump_section(
    cover: &Cover,
    chain_id: &str,
    chain: &TransitionFamily,
    chart: usize,
) -> Result<GlobalSection, SectionError> {
    let private = private_samples(cover, chart);
    if private.is_empty() {
        return Err(SectionError::NoPrivateRegion { chart });
    }
    let mut section = GlobalSection::zeros(cover, chain_id, chain.fiber_dim);
    let count = private.len();
    for (pos, &s) in private.iter().enumerate() {
        let u = (pos + 1) as f64 / (count + 1) as f64;
        let w = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * u).cos());
        section.values[chart][(0, s)] = C64::new(w.max(f64::EPSILON), 0.0);
    }
    // A single interior sample sits at u = 1/2 where the profile peaks; any
    // count >= 1 therefore yields a nonzero section.
    check_global_section(
        cover,
        chain_id,
        chain,
        section.values,
        DEFAULT_SECTION_TOL,
    )
}

/// Partition-weighted quadrature product: sum over pieces k and samples x of
/// chart i(k) of w(x) f_k(x)^2 <s(x), M t(x)>. Metrics default to the
/// identity. Returns the real part; the imaginary part of a hermitian
/// product of matching sections vanishes.
pub fn inner_product(
    cover: &Cover,
    metrics: Option<&[DMatrix<C64>]>,
    s: &GlobalSection,
    t: &GlobalSection,
    partition: &PartitionOfUnity,
) -> Result<f64, SectionError> {
    if s.chain_id != t.chain_id {
        return Err(SectionError::ChainMismatch(
            s.chain_id.clone(),
            t.chain_id.clone(),
        ));
    }
    check_shapes(cover, s.fiber_dim, &s.values)?;
    check_shapes(cover, t.fiber_dim, &t.values)?;
    partition.validate(cover)?;
    let mut total = 0.0;
    for piece in &partition.pieces {
        let chart = piece.chart;
        let weights = &cover.charts[chart].weights;
        let sv = &s.values[chart];
        let tv = &t.values[chart];
        let mut acc = 0.0;
        for (sample, &f) in piece.weights.iter().enumerate() {
            if f == 0.0 {
                continue;
            }
            let sc = sv.column(sample);
            let tc = tv.column(sample);
            let pairing: C64 = match metrics {
                None => sc.dotc(&tc),
                Some(ms) => sc.dotc(&(&ms[chart] * tc)),
            };
            acc += weights[sample] * f * f * pairing.re;
        }
        total += acc;
    }
    Ok(total)
}

/// Push a section of a lifted chain down to the base through the projection
/// intertwiner, verifying the images glue under the base chain.
pub fn project_to_base(
    cover: &Cover,
    s: &GlobalSection,
    projection: &DMatrix<C64>,
    base_chain_id: &str,
    base_chain: &TransitionFamily,
) -> Result<GlobalSection, SectionError> {
    check_shapes(cover, s.fiber_dim, &s.values)?;
    let values: Vec<DMatrix<C64>> = s.values.iter().map(|m| projection * m).collect();
    let report = section_defects(cover, base_chain, &values)?;
    if report.max > BASE_GLUE_TOL {
        return Err(SectionError::BaseGlueFailed(report));
    }
    Ok(GlobalSection {
        chain_id: base_chain_id.to_string(),
        fiber_dim: base_chain.fiber_dim,
        values,
    })
}

/// The pairwise defects s_ij = s_i - g_ij(s_j) of arbitrary per-chart values,
/// with the triple sums they generate.
#[derive(Debug, Clone)]
pub struct DefectCocycle {
    /// s_ij at each matched sample of each keyed overlap direction, expressed
    /// in the frame of the first chart of the key.
    pub pair_defects: BTreeMap<(usize, usize, usize), Vec<DVector<C64>>>,
    /// Per cover triple: g_ij(s_jk) - s_ik + s_ij in the chart-i frame.
    pub triple_sums: Vec<DVector<C64>>,
    /// Worst deviation of the triple sums from their closed form
    /// (I - g_ij g_jk g_ki) g_ik(s_k); the identity is algebraic, so this is
    /// rounding noise only.
    pub identity_residual: f64,
    /// Worst |f(s_ij)| when a base projection is supplied, else 0.
    pub base_glue_defect: f64,
}

/// Defects and triple sums of per-chart values over a chain. When a
/// projection to a base bundle is supplied, its images of all pair defects
/// must vanish within the tolerance: the values must share a glued base
/// section even if they fail to glue upstairs.
pub fn defect_cocycle(
    cover: &Cover,
    chain: &TransitionFamily,
    values: &[DMatrix<C64>],
    base_projection: Option<(&DMatrix<C64>, f64)>,
) -> Result<DefectCocycle, SectionError> {
    check_shapes(cover, chain.fiber_dim, values)?;
    let mut pair_defects: BTreeMap<(usize, usize, usize), Vec<DVector<C64>>> = BTreeMap::new();
    let mut base_glue_defect: f64 = 0.0;
    for ov in &cover.overlaps {
        let (i, j) = ov.charts;
        for (a, b) in [(i, j), (j, i)] {
            let mut defects = Vec::with_capacity(ov.pairs.len());
            for (pos, &(si, sj)) in ov.pairs.iter().enumerate() {
                let (sa, sb) = if a == i { (si, sj) } else { (sj, si) };
                let g = chain
                    .at(a, b, ov.component, pos)
                    .ok_or(SectionError::MissingTransition(a, b, ov.component))?;
                let defect = values[a].column(sa) - g * values[b].column(sb);
                if let Some((f, _)) = base_projection {
                    base_glue_defect = base_glue_defect.max(max_abs_vec(&(f * &defect)));
                }
                defects.push(defect);
            }
            pair_defects.insert((a, b, ov.component), defects);
        }
    }
    if let Some((_, tol)) = base_projection {
        if base_glue_defect > tol {
            let per_overlap = BTreeMap::new();
            return Err(SectionError::BaseGlueFailed(DefectReport {
                per_overlap,
                max: base_glue_defect,
            }));
        }
    }

    let mut triple_sums = Vec::with_capacity(cover.triples.len());
    let mut identity_residual: f64 = 0.0;
    for t in &cover.triples {
        let (i, j, k) = t.charts;
        let gij = chain
            .at(i, j, t.ij.0, t.ij.1)
            .ok_or(SectionError::MissingTransition(i, j, t.ij.0))?;
        let gjk = chain
            .at(j, k, t.jk.0, t.jk.1)
            .ok_or(SectionError::MissingTransition(j, k, t.jk.0))?;
        let gik = chain
            .at(i, k, t.ik.0, t.ik.1)
            .ok_or(SectionError::MissingTransition(i, k, t.ik.0))?;
        let s_ij = &pair_defects[&(i, j, t.ij.0)][t.ij.1];
        let s_jk = &pair_defects[&(j, k, t.jk.0)][t.jk.1];
        let s_ik = &pair_defects[&(i, k, t.ik.0)][t.ik.1];
        // All three defects transported to the chart-i frame.
        let sum = gij * s_jk - s_ik + s_ij;
        // Closed form: the failure of the chain to close acts on s_k.
        let sample_k = cover
            .overlap(i, k, t.ik.0)
            .map(|ov| ov.pairs[t.ik.1].1)
            .expect("validated triple addresses its overlaps");
        let sk = values[k].column(sample_k);
        let closed = (gik - gij * gjk) * sk;
        identity_residual = identity_residual.max(max_abs_vec(&(&sum - &closed)));
        triple_sums.push(sum);
    }

    Ok(DefectCocycle {
        pair_defects,
        triple_sums,
        identity_residual,
        base_glue_defect,
    })
}

/// Finite formal sum of global sections; summands on the same chain merge by
/// addition, summands on different chains stay orthogonal blocks.
#[derive(Debug, Clone)]
pub struct FormalSection {
    pub summands: BTreeMap<String, GlobalSection>,
}

impl FormalSection {
    pub fn new(parts: Vec<GlobalSection>) -> Result<Self, SectionError> {
        let mut summands: BTreeMap<String, GlobalSection> = BTreeMap::new();
        for part in parts {
            match summands.remove(&part.chain_id) {
                None => {
                    summands.insert(part.chain_id.clone(), part);
                }
                Some(existing) => {
                    let merged = existing.add(&part)?;
                    summands.insert(part.chain_id.clone(), merged);
                }
            }
        }
        Ok(Self { summands })
    }
}

/// Block-diagonal pairing over chain ids: summands on different chains
/// contribute nothing, summands on a shared chain pair by inner_product.
/// Metrics are looked up per chain id, defaulting to the identity.
pub fn formal_inner_product(
    cover: &Cover,
    metrics: &BTreeMap<String, Vec<DMatrix<C64>>>,
    a: &FormalSection,
    b: &FormalSection,
    partition: &PartitionOfUnity,
) -> Result<f64, SectionError> {
    let mut total = 0.0;
    for (chain_id, s) in &a.summands {
        if let Some(t) = b.summands.get(chain_id) {
            let m = metrics.get(chain_id).map(|v| v.as_slice());
            total += inner_product(cover, m, s, t, partition)?;
        }
    }
    Ok(total)
}

/// Sobolev-weighted product of integer order: apply the supplied discrete
/// Laplacian `order` times to the left argument, then take the partition
/// product. Order zero is the plain product.
pub fn sobolev_inner_product(
    cover: &Cover,
    metrics: Option<&[DMatrix<C64>]>,
    s: &GlobalSection,
    t: &GlobalSection,
    partition: &PartitionOfUnity,
    laplacian: &dyn Fn(&GlobalSection) -> Result<GlobalSection, SectionError>,
    order: usize,
) -> Result<f64, SectionError> {
    let mut u = s.clone();
    for _ in 0..order {
        u = laplacian(&u)?;
    }
    inner_product(cover, metrics, &u, t, partition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{Chart, ChartGeometry, OverlapComponent, TransitionMaps, TripleSample};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line_chart(id: usize, n: usize, origin: f64, h: f64) -> Chart {
        Chart {
            id,
            geometry: ChartGeometry::Grid {
                shape: vec![n],
                spacing: vec![h],
                origin: vec![origin],
            },
            weights: vec![h; n],
        }
    }

    /// Two arcs closing into a circle of circumference 10: chart coordinates
    /// 0..=5 and 5..=10, matched at coordinate 5 (component 0) and at the
    /// wrap 10 == 0 (component 1).
    fn circle_cover() -> Cover {
        Cover {
            charts: vec![line_chart(0, 6, 0.0, 1.0), line_chart(1, 6, 5.0, 1.0)],
            overlaps: vec![
                OverlapComponent { charts: (0, 1), component: 0, pairs: vec![(5, 0)] },
                OverlapComponent { charts: (0, 1), component: 1, pairs: vec![(0, 5)] },
            ],
            triples: vec![],
            quadruples: vec![],
        }
    }

    fn scalar_chain(cover: &Cover, g_comp0: C64, g_comp1: C64) -> TransitionFamily {
        let mut family = TransitionFamily::identity(cover, 1);
        for (component, g) in [(0usize, g_comp0), (1usize, g_comp1)] {
            family.maps.insert(
                (0, 1, component),
                TransitionMaps::Constant(DMatrix::from_element(1, 1, g)),
            );
            family.maps.insert(
                (1, 0, component),
                TransitionMaps::Constant(DMatrix::from_element(1, 1, C64::new(1.0, 0.0) / g)),
            );
        }
        family
    }

    fn antiperiodic_chain(cover: &Cover) -> TransitionFamily {
        scalar_chain(cover, C64::new(1.0, 0.0), C64::new(-1.0, 0.0))
    }

    /// cos(pi * theta / 10) sampled in both chart coordinates; flips sign
    /// across the wrap, matching the antiperiodic chain exactly.
    fn half_angle_values(cover: &Cover) -> Vec<DMatrix<C64>> {
        cover
            .charts
            .iter()
            .map(|chart| {
                let n = chart.sample_count();
                DMatrix::from_fn(1, n, |_, s| {
                    let theta = chart.geometry.coords(s)[0];
                    C64::new((std::f64::consts::PI * theta / 10.0).cos(), 0.0)
                })
            })
            .collect()
    }

    #[test]
    fn owner_indicator_partition_is_valid() {
        let cover = circle_cover();
        let p = PartitionOfUnity::owner_indicator(&cover);
        p.validate(&cover).unwrap();
        // Chart 0 owns both shared points, so its piece is identically 1.
        assert!(p.pieces[0].weights.iter().all(|&w| w == 1.0));
        assert_eq!(p.pieces[1].weights[0], 0.0);
        assert_eq!(p.pieces[1].weights[5], 0.0);
    }

    #[test]
    fn partition_sum_violation_is_reported() {
        let cover = circle_cover();
        let mut p = PartitionOfUnity::owner_indicator(&cover);
        p.pieces[0].weights[2] = 0.75;
        assert!(matches!(
            p.validate(&cover),
            Err(SectionError::PartitionSum { .. })
        ));
    }

    #[test]
    fn constant_section_glues_on_trivial_chain() {
        let cover = circle_cover();
        let chain = scalar_chain(&cover, C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        let values = vec![
            DMatrix::from_element(1, 6, C64::new(0.7, 0.0)),
            DMatrix::from_element(1, 6, C64::new(0.7, 0.0)),
        ];
        check_global_section(&cover, "trivial", &chain, values, DEFAULT_SECTION_TOL).unwrap();
    }

    #[test]
    fn constant_section_fails_antiperiodic_chain_with_double_norm_defect() {
        let cover = circle_cover();
        let chain = antiperiodic_chain(&cover);
        let values = vec![
            DMatrix::from_element(1, 6, C64::new(0.7, 0.0)),
            DMatrix::from_element(1, 6, C64::new(0.7, 0.0)),
        ];
        match check_global_section(&cover, "anti", &chain, values, DEFAULT_SECTION_TOL) {
            Err(SectionError::Incompatible(report)) => {
                assert!((report.max - 1.4).abs() < 1e-12, "defect {}", report.max);
            }
            other => panic!("expected incompatibility, got {other:?}"),
        }
    }

    #[test]
    fn half_angle_section_glues_on_antiperiodic_chain() {
        let cover = circle_cover();
        let chain = antiperiodic_chain(&cover);
        let s = check_global_section(
            &cover,
            "anti",
            &chain,
            half_angle_values(&cover),
            1e-10,
        )
        .unwrap();
        assert_eq!(s.fiber_dim, 1);
    }

    #[test]
    fn bump_section_lives_in_private_region() {
        let cover = circle_cover();
        let chain = antiperiodic_chain(&cover);
        let bump = construct_bump_section(&cover, "anti", &chain, 0).unwrap();
        // Zero on the other chart and at the matched samples.
        assert!(bump.values[1].iter().all(|v| v.norm() == 0.0));
        assert_eq!(bump.values[0][(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(bump.values[0][(0, 5)], C64::new(0.0, 0.0));
        let peak: f64 = bump.values[0].iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(peak > 0.5);
    }

    #[test]
    fn fully_shared_cover_has_no_bump() {
        let mut cover = circle_cover();
        cover.overlaps = vec![OverlapComponent {
            charts: (0, 1),
            component: 0,
            pairs: (0..6).map(|s| (s, s)).collect(),
        }];
        let chain = TransitionFamily::identity(&cover, 1);
        assert!(matches!(
            construct_bump_section(&cover, "id", &chain, 0),
            Err(SectionError::NoPrivateRegion { chart: 0 })
        ));
    }

    #[test]
    fn unit_constant_on_unit_chart_has_unit_norm() {
        let chart = line_chart(0, 256, 0.0, 1.0 / 256.0);
        let cover = Cover {
            charts: vec![chart],
            overlaps: vec![],
            triples: vec![],
            quadruples: vec![],
        };
        let chain = TransitionFamily::identity(&cover, 1);
        let s = check_global_section(
            &cover,
            "single",
            &chain,
            vec![DMatrix::from_element(1, 256, C64::new(1.0, 0.0))],
            DEFAULT_SECTION_TOL,
        )
        .unwrap();
        let p = PartitionOfUnity {
            pieces: vec![PartitionPiece { chart: 0, weights: vec![1.0; 256] }],
        };
        let v = inner_product(&cover, None, &s, &s, &p).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
    }

    #[test]
    fn inner_product_agrees_across_ownership_splits() {
        let cover = circle_cover();
        let chain = antiperiodic_chain(&cover);
        let s = check_global_section(&cover, "anti", &chain, half_angle_values(&cover), 1e-10)
            .unwrap();

        let p1 = PartitionOfUnity::owner_indicator(&cover);
        // Opposite ownership: chart 1 takes both shared points.
        let p2 = PartitionOfUnity {
            pieces: vec![
                PartitionPiece {
                    chart: 0,
                    weights: vec![0.0, 1.0, 1.0, 1.0, 1.0, 0.0],
                },
                PartitionPiece {
                    chart: 1,
                    weights: vec![1.0; 6],
                },
            ],
        };
        p2.validate(&cover).unwrap();
        let v1 = inner_product(&cover, None, &s, &s, &p1).unwrap();
        let v2 = inner_product(&cover, None, &s, &s, &p2).unwrap();
        assert!((v1 - v2).abs() < 1e-9, "{v1} vs {v2}");
        // Ten unit-weight samples of cos^2 over a full period sum to 5.
        assert!((v1 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn inner_product_requires_matching_chains() {
        let cover = circle_cover();
        let chain = scalar_chain(&cover, C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        let zeros = GlobalSection::zeros(&cover, "a", 1);
        let other = GlobalSection::zeros(&cover, "b", 1);
        let p = PartitionOfUnity::owner_indicator(&cover);
        let _ = chain;
        assert!(matches!(
            inner_product(&cover, None, &zeros, &other, &p),
            Err(SectionError::ChainMismatch(_, _))
        ));
    }

    #[test]
    fn accepted_sections_form_a_vector_space() {
        let cover = circle_cover();
        let chain = antiperiodic_chain(&cover);
        let s = check_global_section(&cover, "anti", &chain, half_angle_values(&cover), 1e-10)
            .unwrap();
        let bump = construct_bump_section(&cover, "anti", &chain, 0).unwrap();
        let combo = s.scale(C64::new(2.0, 0.5)).add(&bump).unwrap();
        check_global_section(&cover, "anti", &chain, combo.values, 1e-9).unwrap();
    }

    /// Three charts, two samples each; sample 0 is the common triple point.
    fn triple_cover() -> Cover {
        let charts = (0..3)
            .map(|id| Chart {
                id,
                geometry: ChartGeometry::Cloud {
                    points: vec![vec![0.0], vec![1.0 + id as f64]],
                },
                weights: vec![1.0; 2],
            })
            .collect();
        Cover {
            charts,
            overlaps: vec![
                OverlapComponent { charts: (0, 1), component: 0, pairs: vec![(0, 0)] },
                OverlapComponent { charts: (0, 2), component: 0, pairs: vec![(0, 0)] },
                OverlapComponent { charts: (1, 2), component: 0, pairs: vec![(0, 0)] },
            ],
            triples: vec![TripleSample {
                charts: (0, 1, 2),
                ij: (0, 0),
                jk: (0, 0),
                ik: (0, 0),
            }],
            quadruples: vec![],
        }
    }

    fn frustrated_chain(cover: &Cover) -> TransitionFamily {
        // g01 = -1, rest +1: the triple product is -1.
        let mut family = TransitionFamily::identity(cover, 1);
        family.maps.insert(
            (0, 1, 0),
            TransitionMaps::Constant(DMatrix::from_element(1, 1, C64::new(-1.0, 0.0))),
        );
        family.maps.insert(
            (1, 0, 0),
            TransitionMaps::Constant(DMatrix::from_element(1, 1, C64::new(-1.0, 0.0))),
        );
        family
    }

    #[test]
    fn defect_cocycle_vanishes_for_compatible_values() {
        let cover = circle_cover();
        let chain = antiperiodic_chain(&cover);
        let values = half_angle_values(&cover);
        let d = defect_cocycle(&cover, &chain, &values, None).unwrap();
        for defects in d.pair_defects.values() {
            for v in defects {
                assert!(max_abs_vec(v) < 1e-12);
            }
        }
        assert!(d.triple_sums.is_empty());
    }

    #[test]
    fn defect_triple_sum_matches_closed_form_on_random_values() {
        let cover = triple_cover();
        let chain = frustrated_chain(&cover);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values: Vec<DMatrix<C64>> = (0..3)
            .map(|_| {
                DMatrix::from_fn(1, 2, |_, _| {
                    C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                })
            })
            .collect();
        let d = defect_cocycle(&cover, &chain, &values, None).unwrap();
        assert!(d.identity_residual < 1e-12);
        // (I - c) g_ik s_k with c = -1 doubles the transported value.
        let expected = values[2][(0, 0)] * C64::new(2.0, 0.0);
        assert!((d.triple_sums[0][0] - expected).norm() < 1e-12);
    }

    #[test]
    fn project_to_base_accepts_glued_base_even_when_lift_does_not_glue() {
        let cover = circle_cover();
        let alpha = 0.9;
        let base = scalar_chain(&cover, C64::new(1.0, 0.0), C64::from_polar(1.0, alpha));
        // Lift acts diagonally; second coordinate uses the half angle.
        let mut lift = TransitionFamily::identity(&cover, 2);
        let diag = |a: f64| {
            let mut m = DMatrix::<C64>::identity(2, 2);
            m[(0, 0)] = C64::from_polar(1.0, a);
            m[(1, 1)] = C64::from_polar(1.0, a / 2.0);
            m
        };
        lift.maps.insert((0, 1, 1), TransitionMaps::Constant(diag(alpha)));
        lift.maps.insert((1, 0, 1), TransitionMaps::Constant(diag(-alpha)));
        let projection = DMatrix::from_row_slice(1, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);

        // First coordinate glues under the base chain; second is junk.
        let mut values = vec![
            DMatrix::from_element(2, 6, C64::new(1.0, 0.0)),
            DMatrix::from_element(2, 6, C64::new(1.0, 0.0)),
        ];
        values[1]
            .column_mut(5)
            .copy_from_slice(&[C64::from_polar(1.0, -alpha), C64::new(0.3, 0.3)]);
        let lifted = GlobalSection {
            chain_id: "lift".to_string(),
            fiber_dim: 2,
            values: values.clone(),
        };
        // The junk coordinate breaks gluing upstairs.
        assert!(section_defects(&cover, &lift, &values).unwrap().max > 0.1);

        let base_section =
            project_to_base(&cover, &lifted, &projection, "base", &base).unwrap();
        assert_eq!(base_section.fiber_dim, 1);
        assert!((base_section.values[0][(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn formal_products_are_block_diagonal() {
        let cover = circle_cover();
        let chain = antiperiodic_chain(&cover);
        let s = check_global_section(&cover, "anti", &chain, half_angle_values(&cover), 1e-10)
            .unwrap();
        let trivial_chain = scalar_chain(&cover, C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        let t = check_global_section(
            &cover,
            "trivial",
            &trivial_chain,
            vec![
                DMatrix::from_element(1, 6, C64::new(0.5, 0.0)),
                DMatrix::from_element(1, 6, C64::new(0.5, 0.0)),
            ],
            DEFAULT_SECTION_TOL,
        )
        .unwrap();
        let p = PartitionOfUnity::owner_indicator(&cover);
        let metrics = BTreeMap::new();

        let fa = FormalSection::new(vec![s.clone()]).unwrap();
        let fb = FormalSection::new(vec![t.clone()]).unwrap();
        let cross = formal_inner_product(&cover, &metrics, &fa, &fb, &p).unwrap();
        assert_eq!(cross, 0.0);

        // ([s] + [t]) against [t] sees only the shared chain.
        let mixed = FormalSection::new(vec![s.clone(), t.clone()]).unwrap();
        let tt = inner_product(&cover, None, &t, &t, &p).unwrap();
        let paired = formal_inner_product(&cover, &metrics, &mixed, &fb, &p).unwrap();
        assert!((paired - tt).abs() < 1e-12);

        // Summands on one chain merge by addition: [s] + [s] pairs at 4x.
        let doubled = FormalSection::new(vec![s.clone(), s.clone()]).unwrap();
        let ss = inner_product(&cover, None, &s, &s, &p).unwrap();
        let quad = formal_inner_product(&cover, &metrics, &doubled, &doubled, &p).unwrap();
        assert!((quad - 4.0 * ss).abs() < 1e-9);
    }

    #[test]
    fn sobolev_order_zero_is_plain_product() {
        let cover = circle_cover();
        let chain = antiperiodic_chain(&cover);
        let s = check_global_section(&cover, "anti", &chain, half_angle_values(&cover), 1e-10)
            .unwrap();
        let p = PartitionOfUnity::owner_indicator(&cover);
        let lap = |u: &GlobalSection| -> Result<GlobalSection, SectionError> {
            Ok(u.scale(C64::new(3.0, 0.0)))
        };
        let plain = inner_product(&cover, None, &s, &s, &p).unwrap();
        let h0 = sobolev_inner_product(&cover, None, &s, &s, &p, &lap, 0).unwrap();
        let h2 = sobolev_inner_product(&cover, None, &s, &s, &p, &lap, 2).unwrap();
        assert_eq!(plain, h0);
        assert!((h2 - 9.0 * plain).abs() < 1e-12);
    }
}
