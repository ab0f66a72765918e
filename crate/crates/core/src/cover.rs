//! Chart covers as sampled data: per-chart grids or point clouds with
//! quadrature weights, overlap matchings between charts, triple-overlap
//! samples, and sampled transition families over the overlaps.
//!
//! Matched samples across charts represent the same manifold point. The
//! lowest chart id among the matches owns the point; owners define the
//! degree-of-freedom set used by assembled operators and quadrature.

use crate::cech::Nerve;
use crate::linalg::C64;
use nalgebra::DMatrix;
use std::collections::BTreeMap;
use thiserror::Error;

/// Mutual-inverse tolerance for transition families.
pub const TRANSITION_INVERSE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CoverError {
    #[error("chart {0} id does not match its position")]
    ChartIdMismatch(usize),
    #[error("chart {chart}: weight count {got} does not match sample count {expected}")]
    WeightCount {
        chart: usize,
        got: usize,
        expected: usize,
    },
    #[error("chart {0}: grid shape and spacing/origin ranks differ")]
    GridRankMismatch(usize),
    #[error("overlap ({i},{j}) component {component}: sample index out of range")]
    OverlapIndexRange {
        i: usize,
        j: usize,
        component: usize,
    },
    #[error("overlap ({i},{j}) component {component}: chart-{side} sample {sample} matched twice")]
    DuplicateMatch {
        i: usize,
        j: usize,
        component: usize,
        side: usize,
        sample: usize,
    },
    #[error("overlap pair ({0},{1}) declared with i >= j")]
    UnorderedPair(usize, usize),
    #[error("triple {0:?}: references unknown overlap component")]
    TripleUnknownOverlap([usize; 3]),
    #[error("triple {0:?}: pair index out of range")]
    TriplePairRange([usize; 3]),
    #[error("triple {0:?}: chart sample indices inconsistent across its three overlaps")]
    TripleInconsistent([usize; 3]),
    #[error("nerve construction failed: {0}")]
    Nerve(#[from] crate::cech::CechError),
    #[error("transition family: missing maps for overlap ({0},{1}) component {2}")]
    MissingTransition(usize, usize, usize),
    #[error("transition ({i},{j}) component {component}: expected {expected} sampled maps, got {got}")]
    TransitionSampleCount {
        i: usize,
        j: usize,
        component: usize,
        expected: usize,
        got: usize,
    },
    #[error("transition ({i},{j}) component {component}, sample {sample}: g_ij g_ji deviates from identity by {residual:.3e}")]
    NotMutuallyInverse {
        i: usize,
        j: usize,
        component: usize,
        sample: usize,
        residual: f64,
    },
    #[error("transition matrices must be square of the declared fiber dimension")]
    FiberDimMismatch,
}

/// Sample layout of one chart.
#[derive(Debug, Clone)]
pub enum ChartGeometry {
    /// Regular grid; samples flatten row-major with the last axis fastest.
    Grid {
        shape: Vec<usize>,
        spacing: Vec<f64>,
        origin: Vec<f64>,
    },
    /// Explicit sample coordinates.
    Cloud { points: Vec<Vec<f64>> },
}

impl ChartGeometry {
    pub fn sample_count(&self) -> usize {
        match self {
            ChartGeometry::Grid { shape, .. } => shape.iter().product(),
            ChartGeometry::Cloud { points } => points.len(),
        }
    }

    pub fn coords(&self, sample: usize) -> Vec<f64> {
        match self {
            ChartGeometry::Grid {
                shape,
                spacing,
                origin,
            } => {
                let multi = unflatten(sample, shape);
                multi
                    .iter()
                    .zip(spacing.iter().zip(origin))
                    .map(|(&i, (&h, &o))| o + h * i as f64)
                    .collect()
            }
            ChartGeometry::Cloud { points } => points[sample].clone(),
        }
    }
}

/// Row-major flattening with the last axis fastest.
pub fn flatten(multi: &[usize], shape: &[usize]) -> usize {
    let mut idx = 0;
    for (i, (&m, &s)) in multi.iter().zip(shape).enumerate() {
        debug_assert!(m < s, "multi-index out of range at axis {i}");
        idx = idx * s + m;
    }
    idx
}

pub fn unflatten(mut idx: usize, shape: &[usize]) -> Vec<usize> {
    let mut multi = vec![0; shape.len()];
    for (axis, &s) in shape.iter().enumerate().rev() {
        multi[axis] = idx % s;
        idx /= s;
    }
    multi
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub id: usize,
    pub geometry: ChartGeometry,
    /// Quadrature volume per sample.
    pub weights: Vec<f64>,
}

impl Chart {
    pub fn sample_count(&self) -> usize {
        self.geometry.sample_count()
    }
}

/// One connected component of a pairwise overlap: matched sample pairs
/// (index in chart i, index in chart j), ordered along a path through the
/// component so that lift continuity is well defined.
#[derive(Debug, Clone)]
pub struct OverlapComponent {
    /// Chart pair with i < j.
    pub charts: (usize, usize),
    pub component: usize,
    pub pairs: Vec<(usize, usize)>,
}

/// One sampled point of a triple overlap, addressed through the three
/// pairwise overlaps: (component index within that pair's components, pair
/// position). Charts are ordered i < j < k.
#[derive(Debug, Clone)]
pub struct TripleSample {
    pub charts: (usize, usize, usize),
    pub ij: (usize, usize),
    pub jk: (usize, usize),
    pub ik: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct Cover {
    pub charts: Vec<Chart>,
    pub overlaps: Vec<OverlapComponent>,
    pub triples: Vec<TripleSample>,
    /// Chart quadruples with nonempty common intersection (nerve dimension 3).
    pub quadruples: Vec<[usize; 4]>,
}

impl Cover {
    pub fn validate(&self) -> Result<(), CoverError> {
        for (pos, chart) in self.charts.iter().enumerate() {
            if chart.id != pos {
                return Err(CoverError::ChartIdMismatch(pos));
            }
            let n = chart.sample_count();
            if chart.weights.len() != n {
                return Err(CoverError::WeightCount {
                    chart: pos,
                    got: chart.weights.len(),
                    expected: n,
                });
            }
            if let ChartGeometry::Grid {
                shape,
                spacing,
                origin,
            } = &chart.geometry
            {
                if spacing.len() != shape.len() || origin.len() != shape.len() {
                    return Err(CoverError::GridRankMismatch(pos));
                }
            }
        }
        for ov in &self.overlaps {
            let (i, j) = ov.charts;
            if i >= j {
                return Err(CoverError::UnorderedPair(i, j));
            }
            let (ni, nj) = (self.charts[i].sample_count(), self.charts[j].sample_count());
            let mut seen_i = std::collections::BTreeSet::new();
            let mut seen_j = std::collections::BTreeSet::new();
            for &(si, sj) in &ov.pairs {
                if si >= ni || sj >= nj {
                    return Err(CoverError::OverlapIndexRange {
                        i,
                        j,
                        component: ov.component,
                    });
                }
                if !seen_i.insert(si) {
                    return Err(CoverError::DuplicateMatch {
                        i,
                        j,
                        component: ov.component,
                        side: i,
                        sample: si,
                    });
                }
                if !seen_j.insert(sj) {
                    return Err(CoverError::DuplicateMatch {
                        i,
                        j,
                        component: ov.component,
                        side: j,
                        sample: sj,
                    });
                }
            }
        }
        for triple in &self.triples {
            let (i, j, k) = triple.charts;
            let pij = self.lookup_pair(i, j, triple.ij)?.ok_or(
                CoverError::TripleUnknownOverlap([i, j, k]),
            )?;
            let pjk = self
                .lookup_pair(j, k, triple.jk)?
                .ok_or(CoverError::TripleUnknownOverlap([i, j, k]))?;
            let pik = self
                .lookup_pair(i, k, triple.ik)?
                .ok_or(CoverError::TripleUnknownOverlap([i, j, k]))?;
            // The same manifold point seen through three overlaps: chart
            // sample indices must agree pairwise.
            if pij.0 != pik.0 || pij.1 != pjk.0 || pjk.1 != pik.1 {
                return Err(CoverError::TripleInconsistent([i, j, k]));
            }
        }
        Ok(())
    }

    /// Matched sample pair of overlap (a,b) with a < b, addressed by
    /// (component, position). Returns (sample in a, sample in b).
    fn lookup_pair(
        &self,
        a: usize,
        b: usize,
        addr: (usize, usize),
    ) -> Result<Option<(usize, usize)>, CoverError> {
        let ov = self
            .overlaps
            .iter()
            .find(|ov| ov.charts == (a, b) && ov.component == addr.0);
        match ov {
            None => Ok(None),
            Some(ov) => {
                let pair = ov
                    .pairs
                    .get(addr.1)
                    .ok_or(CoverError::TriplePairRange([a, b, 0]))?;
                Ok(Some(*pair))
            }
        }
    }

    pub fn overlap_components(&self, a: usize, b: usize) -> Vec<&OverlapComponent> {
        let key = (a.min(b), a.max(b));
        self.overlaps
            .iter()
            .filter(|ov| ov.charts == key)
            .collect()
    }

    /// One overlap component by chart pair (either order) and component id.
    pub fn overlap(&self, a: usize, b: usize, component: usize) -> Option<&OverlapComponent> {
        let key = (a.min(b), a.max(b));
        self.overlaps
            .iter()
            .find(|ov| ov.charts == key && ov.component == component)
    }

    /// The nerve of the cover: an edge per overlapping pair, a triangle per
    /// chart triple with sampled common intersection, tetrahedra as declared.
    pub fn nerve(&self) -> Result<Nerve, CoverError> {
        let mut edges: Vec<[usize; 2]> = self
            .overlaps
            .iter()
            .map(|ov| [ov.charts.0, ov.charts.1])
            .collect();
        edges.sort();
        edges.dedup();
        let mut triangles: Vec<[usize; 3]> = self
            .triples
            .iter()
            .map(|t| [t.charts.0, t.charts.1, t.charts.2])
            .collect();
        triangles.sort();
        triangles.dedup();
        let mut tetrahedra = self.quadruples.clone();
        tetrahedra.sort();
        tetrahedra.dedup();
        Ok(Nerve::new(self.charts.len(), edges, triangles, tetrahedra)?)
    }

    /// Groups (chart, sample) pairs identified by overlap matchings into
    /// manifold points. Each group is sorted; the first entry is the owner.
    pub fn manifold_points(&self) -> Vec<Vec<(usize, usize)>> {
        let offsets: Vec<usize> = self
            .charts
            .iter()
            .scan(0, |acc, c| {
                let start = *acc;
                *acc += c.sample_count();
                Some(start)
            })
            .collect();
        let total: usize = self.charts.iter().map(|c| c.sample_count()).sum();
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            let mut root = x;
            while parent[root] != root {
                root = parent[root];
            }
            let mut cur = x;
            while parent[cur] != root {
                let next = parent[cur];
                parent[cur] = root;
                cur = next;
            }
            root
        }
        for ov in &self.overlaps {
            let (i, j) = ov.charts;
            for &(si, sj) in &ov.pairs {
                let a = find(&mut parent, offsets[i] + si);
                let b = find(&mut parent, offsets[j] + sj);
                // Deterministic union: smaller global index is the root.
                if a < b {
                    parent[b] = a;
                } else if b < a {
                    parent[a] = b;
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for chart in &self.charts {
            for s in 0..chart.sample_count() {
                let root = find(&mut parent, offsets[chart.id] + s);
                groups.entry(root).or_default().push((chart.id, s));
            }
        }
        groups.into_values().collect()
    }

    /// For every non-owner matched sample: (chart, sample) -> owner
    /// (chart, sample).
    pub fn ownership(&self) -> BTreeMap<(usize, usize), (usize, usize)> {
        let mut map = BTreeMap::new();
        for group in self.manifold_points() {
            let owner = group[0];
            for &loc in &group[1..] {
                map.insert(loc, owner);
            }
        }
        map
    }
}

/// Sampled maps over one overlap component: either one constant matrix or a
/// matrix per matched sample.
#[derive(Debug, Clone)]
pub enum TransitionMaps {
    Constant(DMatrix<C64>),
    PerSample(Vec<DMatrix<C64>>),
}

impl TransitionMaps {
    pub fn at(&self, sample: usize) -> &DMatrix<C64> {
        match self {
            TransitionMaps::Constant(m) => m,
            TransitionMaps::PerSample(ms) => &ms[sample],
        }
    }

    pub fn len_for(&self, pair_count: usize) -> usize {
        match self {
            TransitionMaps::Constant(_) => pair_count,
            TransitionMaps::PerSample(ms) => ms.len(),
        }
    }
}

/// A chain (g_ij): sampled fiber transitions over every overlap component,
/// both directions present and mutually inverse.
///
/// Convention: g keyed (i, j, component) maps chart-j fiber data to chart-i
/// fiber data at each matched sample.
#[derive(Debug, Clone)]
pub struct TransitionFamily {
    pub fiber_dim: usize,
    pub maps: BTreeMap<(usize, usize, usize), TransitionMaps>,
}

impl TransitionFamily {
    /// Identity chain over every overlap of the cover.
    pub fn identity(cover: &Cover, fiber_dim: usize) -> Self {
        let mut maps = BTreeMap::new();
        let id = DMatrix::identity(fiber_dim, fiber_dim);
        for ov in &cover.overlaps {
            let (i, j) = ov.charts;
            maps.insert((i, j, ov.component), TransitionMaps::Constant(id.clone()));
            maps.insert((j, i, ov.component), TransitionMaps::Constant(id.clone()));
        }
        Self { fiber_dim, maps }
    }

    pub fn get(&self, from_to: (usize, usize), component: usize) -> Option<&TransitionMaps> {
        self.maps.get(&(from_to.0, from_to.1, component))
    }

    /// Map at one matched sample, applying chart-j data into chart i.
    pub fn at(&self, i: usize, j: usize, component: usize, sample: usize) -> Option<&DMatrix<C64>> {
        self.get((i, j), component).map(|m| m.at(sample))
    }

    pub fn validate_against(&self, cover: &Cover) -> Result<(), CoverError> {
        for m in self.maps.values() {
            let mat = match m {
                TransitionMaps::Constant(m) => m,
                TransitionMaps::PerSample(ms) => {
                    ms.first().ok_or(CoverError::FiberDimMismatch)?
                }
            };
            if mat.nrows() != self.fiber_dim || mat.ncols() != self.fiber_dim {
                return Err(CoverError::FiberDimMismatch);
            }
        }
        for ov in &cover.overlaps {
            let (i, j) = ov.charts;
            let fwd = self
                .get((i, j), ov.component)
                .ok_or(CoverError::MissingTransition(i, j, ov.component))?;
            let bwd = self
                .get((j, i), ov.component)
                .ok_or(CoverError::MissingTransition(j, i, ov.component))?;
            for m in [fwd, bwd] {
                let got = m.len_for(ov.pairs.len());
                if got != ov.pairs.len() {
                    return Err(CoverError::TransitionSampleCount {
                        i,
                        j,
                        component: ov.component,
                        expected: ov.pairs.len(),
                        got,
                    });
                }
            }
            for t in 0..ov.pairs.len() {
                let product = fwd.at(t) * bwd.at(t);
                let residual = (&product - DMatrix::<C64>::identity(self.fiber_dim, self.fiber_dim))
                    .iter()
                    .map(|v| v.norm())
                    .fold(0.0, f64::max);
                if residual > TRANSITION_INVERSE_TOL {
                    return Err(CoverError::NotMutuallyInverse {
                        i,
                        j,
                        component: ov.component,
                        sample: t,
                        residual,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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

    /// Two arcs covering a circle with a single shared sample at each end.
    fn two_arc_cover() -> Cover {
        let charts = vec![line_chart(0, 6, 0.0, 1.0), line_chart(1, 6, 5.0, 1.0)];
        let overlaps = vec![
            OverlapComponent {
                charts: (0, 1),
                component: 0,
                pairs: vec![(5, 0)],
            },
            OverlapComponent {
                charts: (0, 1),
                component: 1,
                pairs: vec![(0, 5)],
            },
        ];
        Cover {
            charts,
            overlaps,
            triples: vec![],
            quadruples: vec![],
        }
    }

    #[test]
    fn flatten_round_trips() {
        let shape = [3usize, 4, 5];
        for idx in 0..60 {
            let multi = unflatten(idx, &shape);
            assert_eq!(flatten(&multi, &shape), idx);
        }
        assert_eq!(flatten(&[1, 2], &[3, 4]), 6);
    }

    #[test]
    fn grid_coords_follow_origin_and_spacing() {
        let g = ChartGeometry::Grid {
            shape: vec![2, 3],
            spacing: vec![0.5, 0.1],
            origin: vec![1.0, -1.0],
        };
        assert_eq!(g.sample_count(), 6);
        assert_eq!(g.coords(4), vec![1.5, -0.9]);
    }

    #[test]
    fn two_arc_cover_validates_and_builds_edge_nerve() {
        let cover = two_arc_cover();
        cover.validate().unwrap();
        let nerve = cover.nerve().unwrap();
        assert_eq!(nerve.vertex_count(), 2);
        assert_eq!(nerve.edges().len(), 1);
        assert!(nerve.triangles().is_empty());
    }

    #[test]
    fn manifold_points_merge_matched_samples() {
        let cover = two_arc_cover();
        let points = cover.manifold_points();
        // 12 samples, 2 matched pairs -> 10 manifold points.
        assert_eq!(points.len(), 10);
        let ownership = cover.ownership();
        assert_eq!(ownership.get(&(1, 0)), Some(&(0, 5)));
        assert_eq!(ownership.get(&(1, 5)), Some(&(0, 0)));
    }

    #[test]
    fn duplicate_match_is_rejected() {
        let mut cover = two_arc_cover();
        cover.overlaps[0].pairs.push((5, 1));
        assert!(matches!(
            cover.validate(),
            Err(CoverError::DuplicateMatch { .. })
        ));
    }

    #[test]
    fn transition_family_requires_mutual_inverses() {
        let cover = two_arc_cover();
        let mut family = TransitionFamily::identity(&cover, 1);
        family.validate_against(&cover).unwrap();
        // Breaking one direction breaks the inverse check.
        family.maps.insert(
            (0, 1, 0),
            TransitionMaps::Constant(DMatrix::from_element(1, 1, C64::new(2.0, 0.0))),
        );
        assert!(matches!(
            family.validate_against(&cover),
            Err(CoverError::NotMutuallyInverse { .. })
        ));
    }

    #[test]
    fn inconsistent_triple_is_rejected() {
        // Three charts pairwise overlapping in one sample each, but the
        // declared triple references mismatched chart samples.
        let charts = vec![
            line_chart(0, 3, 0.0, 1.0),
            line_chart(1, 3, 1.0, 1.0),
            line_chart(2, 3, 2.0, 1.0),
        ];
        let overlaps = vec![
            OverlapComponent {
                charts: (0, 1),
                component: 0,
                pairs: vec![(2, 1)],
            },
            OverlapComponent {
                charts: (1, 2),
                component: 0,
                pairs: vec![(2, 1)],
            },
            OverlapComponent {
                charts: (0, 2),
                component: 0,
                pairs: vec![(2, 0)],
            },
        ];
        let cover = Cover {
            charts,
            overlaps,
            triples: vec![TripleSample {
                charts: (0, 1, 2),
                ij: (0, 0),
                jk: (0, 0),
                ik: (0, 0),
            }],
            quadruples: vec![],
        };
        // The (0,1) overlap puts the point at chart-1 sample 1, but the
        // (1,2) overlap says chart-1 sample 2.
        assert!(matches!(
            cover.validate(),
            Err(CoverError::TripleInconsistent(_))
        ));
    }
}
