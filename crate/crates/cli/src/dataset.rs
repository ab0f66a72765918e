//! Dataset files.
//!
//! A dataset is a JSON document bundling a cover, a transition chain, and the
//! optional geometric payloads (connections, operators, sections, gradings,
//! curvature samples) together with the list of experiments to run over them.
//! Parsing is strict: unknown fields, shape mismatches, and dangling
//! references are input errors that name the offending field.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use gerbelab::calculus::{
    CoeffField, ConnectionData, ChartEdgeRules, EdgeRule, LinkTarget, OperatorDescription,
    OperatorTerm,
};
use gerbelab::cech::SpinLiftFamily;
use gerbelab::cover::{
    Chart, ChartGeometry, Cover, OverlapComponent, TransitionFamily, TransitionMaps, TripleSample,
};
use gerbelab::gerbe::{clifford_gerbe, BandSpec, VectorialGerbe};
use gerbelab::linalg::C64;
use gerbelab::sections::{PartitionOfUnity, PartitionPiece};

pub const SCHEMA: &str = "gerbelab-dataset/1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Syntactic or structural JSON failure; `location` is the field path.
    #[error("{path}: at {location}: {detail}")]
    Parse {
        path: String,
        location: String,
        detail: String,
    },
    #[error("unsupported schema {got:?}, this tool reads {expected:?}")]
    Schema { got: String, expected: String },
    /// Semantic failure after parsing; `at` is the field path.
    #[error("at {at}: {message}")]
    Invalid { at: String, message: String },
}

impl DatasetError {
    pub fn invalid(at: impl Into<String>, message: impl std::fmt::Display) -> Self {
        DatasetError::Invalid {
            at: at.into(),
            message: message.to_string(),
        }
    }
}

/// Dense matrix payload, row-major. `im` may be omitted for real matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

impl MatrixSpec {
    pub fn from_complex(m: &DMatrix<C64>) -> Self {
        let mut re = Vec::with_capacity(m.nrows() * m.ncols());
        let mut im = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                re.push(m[(r, c)].re);
                im.push(m[(r, c)].im);
            }
        }
        let im = if im.iter().any(|&v| v != 0.0) { Some(im) } else { None };
        Self { rows: m.nrows(), cols: m.ncols(), re, im }
    }

    pub fn from_real(m: &DMatrix<f64>) -> Self {
        let mut re = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                re.push(m[(r, c)]);
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), re, im: None }
    }

    fn check(&self, at: &str) -> Result<(), DatasetError> {
        let n = self.rows * self.cols;
        if self.re.len() != n {
            return Err(DatasetError::invalid(
                format!("{at}.re"),
                format!("{} entries for a {}x{} matrix", self.re.len(), self.rows, self.cols),
            ));
        }
        if let Some(im) = &self.im {
            if im.len() != n {
                return Err(DatasetError::invalid(
                    format!("{at}.im"),
                    format!("{} entries for a {}x{} matrix", im.len(), self.rows, self.cols),
                ));
            }
        }
        Ok(())
    }

    pub fn to_complex(&self, at: &str) -> Result<DMatrix<C64>, DatasetError> {
        self.check(at)?;
        Ok(DMatrix::from_fn(self.rows, self.cols, |r, c| {
            let k = r * self.cols + c;
            C64::new(self.re[k], self.im.as_ref().map_or(0.0, |v| v[k]))
        }))
    }

    pub fn to_real(&self, at: &str) -> Result<DMatrix<f64>, DatasetError> {
        self.check(at)?;
        if self.im.as_ref().is_some_and(|v| v.iter().any(|&x| x != 0.0)) {
            return Err(DatasetError::invalid(
                format!("{at}.im"),
                "expected a real matrix",
            ));
        }
        Ok(DMatrix::from_fn(self.rows, self.cols, |r, c| self.re[r * self.cols + c]))
    }

    fn square(&self, fiber: usize, at: &str) -> Result<(), DatasetError> {
        if self.rows != fiber || self.cols != fiber {
            return Err(DatasetError::invalid(
                at,
                format!("expected a {fiber}x{fiber} matrix, found {}x{}", self.rows, self.cols),
            ));
        }
        Ok(())
    }
}

/// Real scalar samples, either one constant or one value per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarField {
    Constant(f64),
    Samples(Vec<f64>),
}

impl ScalarField {
    pub fn expand(&self, samples: usize, at: &str) -> Result<Vec<f64>, DatasetError> {
        match self {
            ScalarField::Constant(c) => Ok(vec![*c; samples]),
            ScalarField::Samples(v) => {
                if v.len() != samples {
                    return Err(DatasetError::invalid(
                        at,
                        format!("{} samples where the chart has {samples}", v.len()),
                    ));
                }
                Ok(v.clone())
            }
        }
    }
}

/// Matrix samples, either one constant or one matrix per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapData {
    Constant(MatrixSpec),
    PerSample(Vec<MatrixSpec>),
}

impl MapData {
    fn to_transition(
        &self,
        fiber: usize,
        samples: usize,
        at: &str,
    ) -> Result<TransitionMaps, DatasetError> {
        match self {
            MapData::Constant(m) => {
                m.square(fiber, at)?;
                Ok(TransitionMaps::Constant(m.to_complex(at)?))
            }
            MapData::PerSample(ms) => {
                if ms.len() != samples {
                    return Err(DatasetError::invalid(
                        at,
                        format!("{} matrices for {samples} matched samples", ms.len()),
                    ));
                }
                let mut out = Vec::with_capacity(ms.len());
                for (k, m) in ms.iter().enumerate() {
                    let here = format!("{at}[{k}]");
                    m.square(fiber, &here)?;
                    out.push(m.to_complex(&here)?);
                }
                Ok(TransitionMaps::PerSample(out))
            }
        }
    }

    fn to_coeff(&self, fiber: usize, samples: usize, at: &str) -> Result<CoeffField, DatasetError> {
        match self {
            MapData::Constant(m) => {
                m.square(fiber, at)?;
                Ok(CoeffField::Constant(m.to_complex(at)?))
            }
            MapData::PerSample(ms) => {
                if ms.len() != samples {
                    return Err(DatasetError::invalid(
                        at,
                        format!("{} matrices for {samples} chart samples", ms.len()),
                    ));
                }
                let mut out = Vec::with_capacity(ms.len());
                for (k, m) in ms.iter().enumerate() {
                    let here = format!("{at}[{k}]");
                    m.square(fiber, &here)?;
                    out.push(m.to_complex(&here)?);
                }
                Ok(CoeffField::PerSample(out))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometrySpec {
    Grid {
        shape: Vec<usize>,
        spacing: Vec<f64>,
        origin: Vec<f64>,
    },
    Cloud {
        points: Vec<Vec<f64>>,
    },
}

impl GeometrySpec {
    fn to_core(&self, at: &str) -> Result<ChartGeometry, DatasetError> {
        match self {
            GeometrySpec::Grid { shape, spacing, origin } => {
                if spacing.len() != shape.len() || origin.len() != shape.len() {
                    return Err(DatasetError::invalid(
                        at,
                        "shape, spacing, and origin must share one length",
                    ));
                }
                if shape.iter().any(|&s| s == 0) {
                    return Err(DatasetError::invalid(at, "grid axes must be nonempty"));
                }
                if spacing.iter().any(|&h| !(h > 0.0)) {
                    return Err(DatasetError::invalid(at, "grid spacing must be positive"));
                }
                Ok(ChartGeometry::Grid {
                    shape: shape.clone(),
                    spacing: spacing.clone(),
                    origin: origin.clone(),
                })
            }
            GeometrySpec::Cloud { points } => {
                if points.is_empty() {
                    return Err(DatasetError::invalid(at, "cloud charts need at least one point"));
                }
                let dim = points[0].len();
                if points.iter().any(|p| p.len() != dim) {
                    return Err(DatasetError::invalid(at, "cloud points must share one dimension"));
                }
                Ok(ChartGeometry::Cloud { points: points.clone() })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub id: usize,
    pub geometry: GeometrySpec,
    pub weights: ScalarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapSpec {
    /// Chart pair, first strictly smaller.
    pub charts: [usize; 2],
    #[serde(default)]
    pub component: usize,
    /// Matched sample pairs (sample in first chart, sample in second).
    pub pairs: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleSpec {
    pub charts: [usize; 3],
    /// (component, pair position) within the (i, j) overlap.
    pub ij: [usize; 2],
    pub jk: [usize; 2],
    pub ik: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverSpec {
    pub charts: Vec<ChartSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overlaps: Vec<OverlapSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triples: Vec<TripleSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quadruples: Vec<[usize; 4]>,
}

impl CoverSpec {
    pub fn to_core(&self) -> Result<Cover, DatasetError> {
        let mut charts = Vec::with_capacity(self.charts.len());
        for (k, c) in self.charts.iter().enumerate() {
            let at = format!("cover.charts[{k}]");
            let geometry = c.geometry.to_core(&format!("{at}.geometry"))?;
            let weights = c
                .weights
                .expand(geometry.sample_count(), &format!("{at}.weights"))?;
            charts.push(Chart { id: c.id, geometry, weights });
        }
        let overlaps = self
            .overlaps
            .iter()
            .map(|ov| OverlapComponent {
                charts: (ov.charts[0], ov.charts[1]),
                component: ov.component,
                pairs: ov.pairs.iter().map(|p| (p[0], p[1])).collect(),
            })
            .collect();
        let triples = self
            .triples
            .iter()
            .map(|t| TripleSample {
                charts: (t.charts[0], t.charts[1], t.charts[2]),
                ij: (t.ij[0], t.ij[1]),
                jk: (t.jk[0], t.jk[1]),
                ik: (t.ik[0], t.ik[1]),
            })
            .collect();
        let cover = Cover {
            charts,
            overlaps,
            triples,
            quadruples: self.quadruples.clone(),
        };
        cover
            .validate()
            .map_err(|e| DatasetError::invalid("cover", e))?;
        Ok(cover)
    }
}

/// One direction of gluing data on an overlap component: `data` rewrites
/// values stored in chart `from` into the frame of chart `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub component: usize,
    pub data: MapData,
}

/// A transition chain over the cover. With `lift` set the stored maps must be
/// frame rotations; the solver chain is then their spin lift acting on the
/// Clifford fiber, and the stored chain remains addressable for sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionsSpec {
    pub fiber_dim: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub lift: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub maps: Vec<TransitionEntry>,
}

impl TransitionsSpec {
    pub fn to_core(&self, cover: &Cover, at: &str) -> Result<TransitionFamily, DatasetError> {
        if self.fiber_dim == 0 {
            return Err(DatasetError::invalid(
                format!("{at}.fiber_dim"),
                "fiber dimension must be positive",
            ));
        }
        let mut maps = BTreeMap::new();
        for (k, entry) in self.maps.iter().enumerate() {
            let here = format!("{at}.maps[{k}]");
            let ov = cover
                .overlaps
                .iter()
                .find(|ov| {
                    (ov.charts == (entry.from, entry.to) || ov.charts == (entry.to, entry.from))
                        && ov.component == entry.component
                })
                .ok_or_else(|| {
                    DatasetError::invalid(
                        &here,
                        format!(
                            "no overlap between charts {} and {} with component {}",
                            entry.from, entry.to, entry.component
                        ),
                    )
                })?;
            let tm = entry.data.to_transition(
                self.fiber_dim,
                ov.pairs.len(),
                &format!("{here}.data"),
            )?;
            // The solver keys maps by (destination, source); the file states
            // the flow direction.
            if maps
                .insert((entry.to, entry.from, entry.component), tm)
                .is_some()
            {
                return Err(DatasetError::invalid(
                    &here,
                    "duplicate transition entry for this overlap direction",
                ));
            }
        }
        let family = TransitionFamily { fiber_dim: self.fiber_dim, maps };
        family
            .validate_against(cover)
            .map_err(|e| DatasetError::invalid(at, e))?;
        Ok(family)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraChainSpec {
    pub name: String,
    pub transitions: TransitionsSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConnectionSpec {
    /// One coefficient field per chart axis.
    pub axes: Vec<MapData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobianSpec {
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub component: usize,
    pub matrix: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    pub fiber_dim: usize,
    /// Indexed by chart id.
    pub charts: Vec<ChartConnectionSpec>,
    /// Constant coordinate Jacobians d x_from / d x_to per overlap component,
    /// identity when omitted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jacobians: Vec<JacobianSpec>,
}

impl ConnectionSpec {
    pub fn to_core(&self, cover: &Cover, at: &str) -> Result<ConnectionData, DatasetError> {
        if self.charts.len() != cover.charts.len() {
            return Err(DatasetError::invalid(
                format!("{at}.charts"),
                format!("{} chart entries for {} charts", self.charts.len(), cover.charts.len()),
            ));
        }
        let mut coeffs = Vec::with_capacity(self.charts.len());
        for (c, chart) in self.charts.iter().enumerate() {
            let samples = cover.charts[c].sample_count();
            let mut per_axis = Vec::with_capacity(chart.axes.len());
            for (a, field) in chart.axes.iter().enumerate() {
                per_axis.push(field.to_coeff(
                    self.fiber_dim,
                    samples,
                    &format!("{at}.charts[{c}].axes[{a}]"),
                )?);
            }
            coeffs.push(per_axis);
        }
        let conn = ConnectionData { fiber_dim: self.fiber_dim, coeffs };
        conn.check_shapes(cover)
            .map_err(|e| DatasetError::invalid(at, e))?;
        Ok(conn)
    }

    pub fn jacobian_map(
        &self,
        at: &str,
    ) -> Result<BTreeMap<(usize, usize, usize), DMatrix<f64>>, DatasetError> {
        let mut out = BTreeMap::new();
        for (k, j) in self.jacobians.iter().enumerate() {
            let here = format!("{at}.jacobians[{k}].matrix");
            out.insert((j.from, j.to, j.component), j.matrix.to_real(&here)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkTargetSpec {
    pub chart: usize,
    pub sample: usize,
    pub map: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRuleSpec {
    OneSided { width: u8 },
    /// Wrap around the axis; the twist carries the wrapped neighbor's data
    /// into the stepping frame. One matrix broadcasts over the edge,
    /// otherwise one per perpendicular index.
    Periodic { twists: Vec<MatrixSpec> },
    /// Step into another chart. One target broadcasts, otherwise one per
    /// perpendicular index.
    Link { targets: Vec<LinkTargetSpec> },
}

impl EdgeRuleSpec {
    fn to_core(&self, fiber: usize, at: &str) -> Result<EdgeRule, DatasetError> {
        match self {
            EdgeRuleSpec::OneSided { width } => {
                if !matches!(width, 1 | 2) {
                    return Err(DatasetError::invalid(
                        format!("{at}.width"),
                        "one-sided stencils support widths 1 and 2",
                    ));
                }
                Ok(EdgeRule::OneSided { width: *width })
            }
            EdgeRuleSpec::Periodic { twists } => {
                let mut out = Vec::with_capacity(twists.len());
                for (k, m) in twists.iter().enumerate() {
                    let here = format!("{at}.twists[{k}]");
                    m.square(fiber, &here)?;
                    out.push(m.to_complex(&here)?);
                }
                Ok(EdgeRule::Periodic { twists: out })
            }
            EdgeRuleSpec::Link { targets } => {
                let mut out = Vec::with_capacity(targets.len());
                for (k, t) in targets.iter().enumerate() {
                    let here = format!("{at}.targets[{k}].map");
                    t.map.square(fiber, &here)?;
                    out.push(LinkTarget {
                        chart: t.chart,
                        sample: t.sample,
                        map: t.map.to_complex(&here)?,
                    });
                }
                Ok(EdgeRule::Link { targets: out })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisEdgeSpec {
    pub low: EdgeRuleSpec,
    pub high: EdgeRuleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartEdgeSpec {
    pub axes: Vec<AxisEdgeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    /// Derivative multi-index over chart axes, order at most one.
    pub alpha: Vec<u32>,
    /// Coefficient field per chart.
    pub coeffs: Vec<MapData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub fiber_dim: usize,
    pub terms: Vec<TermSpec>,
}

/// An operator given directly as a sparse matrix in an orthonormal basis of
/// its own, with grading signs per basis vector. Used when the operator's
/// eigenstructure is computed in a symmetry-adapted basis rather than
/// assembled from grid stencils; such operators have no stencil description
/// and hence no principal symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixOperatorSpec {
    pub dim: usize,
    /// Names the basis for the report, e.g. "magnetic-eigenbasis".
    pub basis: String,
    pub grading: Vec<f64>,
    pub entries: Vec<EntrySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySpec {
    pub row: usize,
    pub col: usize,
    pub re: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub im: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradingSpec {
    /// Use the parity grading of the Clifford fiber; needs a frame
    /// connection backed operator.
    Parity,
    /// Constant diagonal signs on the operator fiber.
    FiberSigns(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSpecJson {
    /// The sign band {1, -1} acting by a global sign.
    Signs,
    /// Cyclic band of the given modulus realized by a stored generator.
    Cyclic { modulus: u64, generator: MatrixSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub chart: usize,
    pub weights: ScalarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub name: String,
    pub pieces: Vec<PieceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionValuesSpec {
    pub name: String,
    /// "main", "spinor" for the spin lift of the main chain, or the name of
    /// an extra chain.
    pub chain: String,
    /// Per chart, fiber rows by sample columns.
    pub values: Vec<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectionsSpec {
    pub partitions: Vec<PartitionSpec>,
    pub sections: Vec<SectionValuesSpec>,
}

impl Default for SectionsSpec {
    fn default() -> Self {
        Self { partitions: Vec::new(), sections: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateExperiment {
    /// Bound on the inverse-pair and metric residuals.
    pub tolerance: f64,
    /// "trivial" or "nontrivial" when the band class is asserted.
    pub expect_class: Option<String>,
}

impl Default for ValidateExperiment {
    fn default() -> Self {
        Self { tolerance: 1e-8, expect_class: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohomologyExperiment {
    pub expect_class: Option<String>,
}

impl Default for CohomologyExperiment {
    fn default() -> Self {
        Self { expect_class: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectionsExperiment {
    /// Bound on the spread of one inner product across stored partitions.
    pub pair_tolerance: f64,
    /// Bound on the defect identity residual over random inputs.
    pub defect_tolerance: f64,
    pub trials: usize,
    pub seed: u64,
    /// Glue tolerance for the stored section values.
    pub section_tolerance: f64,
}

impl Default for SectionsExperiment {
    fn default() -> Self {
        Self {
            pair_tolerance: 1e-9,
            defect_tolerance: 1e-12,
            trials: 8,
            seed: 7,
            section_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumExperiment {
    /// Relative kernel threshold; the command line flag overrides it.
    pub threshold: Option<f64>,
    pub seed: u64,
    pub expect_kernel: Option<usize>,
    pub expect_gap_at_least: Option<f64>,
    /// Asserted smallest spectral magnitude, compared within
    /// `magnitude_tolerance`.
    pub expect_smallest: Option<f64>,
    pub magnitude_tolerance: f64,
}

impl Default for SpectrumExperiment {
    fn default() -> Self {
        Self {
            threshold: None,
            seed: 11,
            expect_kernel: None,
            expect_gap_at_least: None,
            expect_smallest: None,
            magnitude_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LichnerowiczExperiment {
    /// Residual bound; when absent the residual is recorded, not gated.
    pub tolerance: Option<f64>,
    /// Rows within this many samples of a one-sided edge are skipped.
    pub exclusion_depth: usize,
    /// Stored sections to apply the defect operator to. With probes the
    /// residual is the largest defect value over probe fields, normalized by
    /// the probe's largest magnitude; without probes it is the raw row norm,
    /// which only converges when both sides share identical stencils.
    pub probes: Vec<String>,
}

impl Default for LichnerowiczExperiment {
    fn default() -> Self {
        Self { tolerance: None, exclusion_depth: 1, probes: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EllipticityExperiment {
    /// Lower bound on the principal symbol's smallest singular value over
    /// unit covectors.
    pub threshold: f64,
    pub directions: usize,
}

impl Default for EllipticityExperiment {
    fn default() -> Self {
        Self { threshold: 0.5, directions: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChernExperiment {
    pub expect_integer: Option<i64>,
    pub tolerance: f64,
}

impl Default for ChernExperiment {
    fn default() -> Self {
        Self { expect_integer: None, tolerance: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConnectionLawExperiment {
    /// Mesh-proportional tolerance slope for the transformation law.
    pub slope: f64,
}

impl Default for ConnectionLawExperiment {
    fn default() -> Self {
        Self { slope: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradedIndexExperiment {
    pub threshold: Option<f64>,
    pub seed: u64,
    pub expect: Option<i64>,
}

impl Default for GradedIndexExperiment {
    fn default() -> Self {
        Self { threshold: None, seed: 13, expect: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarmonicVanishingExperiment {
    /// Curvature-derived lower bound on the squared spectrum, recorded as
    /// data next to the measured gap.
    pub declared_bound: Option<f64>,
    /// Discretization allowance subtracted from the declared bound.
    pub slack: f64,
    pub threshold: Option<f64>,
    pub seed: u64,
}

impl Default for HarmonicVanishingExperiment {
    fn default() -> Self {
        Self { declared_bound: None, slack: 0.0, threshold: None, seed: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymbolInvarianceExperiment {
    /// Number of random order-zero perturbations.
    pub count: usize,
    /// Operator norm of each perturbation.
    pub norm: f64,
    pub seed: u64,
    pub threshold: Option<f64>,
}

impl Default for SymbolInvarianceExperiment {
    fn default() -> Self {
        Self { count: 10, norm: 0.3, seed: 17, threshold: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexPairingExperiment {
    /// "unit" pairs the index against the plain curvature integral; absent
    /// means no candidate form is known and the pairing is only recorded.
    pub candidate_form: Option<String>,
    pub tolerance: f64,
}

impl Default for IndexPairingExperiment {
    fn default() -> Self {
        Self { candidate_form: None, tolerance: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentSpec {
    Validate(ValidateExperiment),
    Cohomology(CohomologyExperiment),
    Sections(SectionsExperiment),
    Spectrum(SpectrumExperiment),
    Lichnerowicz(LichnerowiczExperiment),
    Ellipticity(EllipticityExperiment),
    Chern(ChernExperiment),
    ConnectionLaw(ConnectionLawExperiment),
    GradedIndex(GradedIndexExperiment),
    HarmonicVanishing(HarmonicVanishingExperiment),
    SymbolInvariance(SymbolInvarianceExperiment),
    IndexPairing(IndexPairingExperiment),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub schema: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub cover: CoverSpec,
    pub transitions: TransitionsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<BandSpecJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_chains: Vec<ExtraChainSpec>,
    /// Per-chart fiber metrics for inner products and gerbe validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Vec<MatrixSpec>>,
    /// Bundle connection whose curvature feeds the characteristic integrals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<ConnectionSpec>,
    /// Frame connection; antisymmetric coefficients on the frame fiber. Its
    /// spinor form drives the assembled first order operator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levi_civita: Option<ConnectionSpec>,
    /// Diagonal vielbein: per chart, per axis, the factor carrying the
    /// coordinate derivative to the orthonormal frame derivative. Omitted
    /// axes mean factor one, i.e. the coordinates are already orthonormal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_scales: Option<Vec<Vec<ScalarField>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar_curvature: Option<Vec<ScalarField>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    /// Operator stated directly as a matrix in a symmetry-adapted basis,
    /// carrying its own grading. Mutually exclusive with stencil operators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator_matrix: Option<MatrixOperatorSpec>,
    /// Edge rules per chart, required by any assembled operator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<ChartEdgeSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<GradingSpec>,
    #[serde(default, skip_serializing_if = "is_default_sections")]
    pub sections: SectionsSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub experiments: Vec<ExperimentSpec>,
}

fn is_default_sections(s: &SectionsSpec) -> bool {
    s.partitions.is_empty() && s.sections.is_empty()
}

impl Dataset {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("dataset serialization");
        text.push('\n');
        text
    }
}

/// Parses and semantically validates a dataset file.
pub fn parse(path: &Path) -> Result<Dataset, DatasetError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: display.clone(),
        source,
    })?;
    parse_str(&text, &display)
}

/// Parses dataset text; `origin` names the source in errors.
pub fn parse_str(text: &str, origin: &str) -> Result<Dataset, DatasetError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let dataset: Dataset =
        serde_path_to_error::deserialize(&mut de).map_err(|e| DatasetError::Parse {
            path: origin.to_string(),
            location: e.path().to_string(),
            detail: e.inner().to_string(),
        })?;
    if dataset.schema != SCHEMA {
        return Err(DatasetError::Schema {
            got: dataset.schema,
            expected: SCHEMA.to_string(),
        });
    }
    Ok(dataset)
}

/// A dataset compiled to solver objects. Construction performs every
/// structural check; residual-based judgments are left to the experiments.
#[derive(Debug)]
pub struct Compiled {
    pub cover: Cover,
    /// The stored chain, addressable by sections as "main".
    pub base_chain: TransitionFamily,
    /// The chain the operator acts on: the spin lift when requested,
    /// otherwise the stored chain itself.
    pub chain: TransitionFamily,
    pub frames: Option<TransitionFamily>,
    pub gerbe: VectorialGerbe,
    pub lifts: Option<SpinLiftFamily>,
    pub extra_chains: BTreeMap<String, TransitionFamily>,
    pub metrics: Option<Vec<DMatrix<C64>>>,
    pub connection: Option<ConnectionData>,
    pub connection_jacobians: BTreeMap<(usize, usize, usize), DMatrix<f64>>,
    pub levi_civita: Option<ConnectionData>,
    pub levi_jacobians: BTreeMap<(usize, usize, usize), DMatrix<f64>>,
    /// Per chart, per axis, per sample; all ones when the file omits it.
    pub frame_scales: Option<Vec<Vec<Vec<f64>>>>,
    /// Per chart, per sample.
    pub scalar_curvature: Option<Vec<Vec<f64>>>,
    pub edges: Option<Vec<ChartEdgeRules>>,
    pub operator: Option<OperatorSpec>,
    /// Basis name, grading signs, and the matrix itself.
    pub operator_matrix: Option<(String, Vec<f64>, CsrMatrix<C64>)>,
    pub grading: Option<GradingSpec>,
    pub partitions: Vec<(String, PartitionOfUnity)>,
    /// Name, chain name, per-chart values.
    pub section_values: Vec<(String, String, Vec<DMatrix<C64>>)>,
    pub experiments: Vec<ExperimentSpec>,
}

impl Dataset {
    pub fn compile(&self) -> Result<Compiled, DatasetError> {
        let cover = self.cover.to_core()?;
        let base_chain = self.transitions.to_core(&cover, "transitions")?;

        let metrics = match &self.metrics {
            None => None,
            Some(ms) => {
                if ms.len() != cover.charts.len() {
                    return Err(DatasetError::invalid(
                        "metrics",
                        format!("{} matrices for {} charts", ms.len(), cover.charts.len()),
                    ));
                }
                let mut out = Vec::with_capacity(ms.len());
                for (k, m) in ms.iter().enumerate() {
                    out.push(m.to_complex(&format!("metrics[{k}]"))?);
                }
                Some(out)
            }
        };

        // The solver chain and the gerbe it generates. Lifted chains build
        // the Clifford gerbe from the stored rotations; plain chains form a
        // gerbe directly under the declared band.
        let (chain, frames, gerbe, lifts) = if self.transitions.lift {
            if self.band.is_some() && !matches!(self.band, Some(BandSpecJson::Signs)) {
                return Err(DatasetError::invalid(
                    "band",
                    "lifted transitions close in the sign band",
                ));
            }
            // clifford_gerbe checks orthogonality; here only realness, for a
            // named error.
            for (key, maps) in &base_chain.maps {
                let count = match maps {
                    TransitionMaps::Constant(_) => 1,
                    TransitionMaps::PerSample(v) => v.len(),
                };
                for s in 0..count {
                    if maps.at(s).iter().any(|v| v.im != 0.0) {
                        return Err(DatasetError::invalid(
                            "transitions",
                            format!(
                                "lifted transitions must be real rotations, found a complex entry on overlap ({}, {}, {})",
                                key.0, key.1, key.2
                            ),
                        ));
                    }
                }
            }
            let (mut gerbe, lifts) = clifford_gerbe(&cover, &base_chain)
                .map_err(|e| DatasetError::invalid("transitions", e))?;
            gerbe.metrics = metrics.clone();
            (gerbe.transitions.clone(), Some(base_chain.clone()), gerbe, Some(lifts))
        } else {
            let band = match &self.band {
                None | Some(BandSpecJson::Signs) => BandSpec::signs(base_chain.fiber_dim),
                Some(BandSpecJson::Cyclic { modulus, generator }) => {
                    let band = gerbelab::cech::Band::new(*modulus)
                        .map_err(|e| DatasetError::invalid("band", e))?;
                    let gen = generator.to_complex("band.generator")?;
                    BandSpec::new(band, gen, base_chain.fiber_dim)
                        .map_err(|e| DatasetError::invalid("band", e))?
                }
            };
            let gerbe = VectorialGerbe {
                cover: cover.clone(),
                transitions: base_chain.clone(),
                band,
                metrics: metrics.clone(),
            };
            (base_chain.clone(), None, gerbe, None)
        };

        let mut extra_chains = BTreeMap::new();
        for (k, extra) in self.extra_chains.iter().enumerate() {
            let at = format!("extra_chains[{k}]");
            if extra.name == "main" || extra_chains.contains_key(&extra.name) {
                return Err(DatasetError::invalid(
                    format!("{at}.name"),
                    "chain names must be unique and distinct from \"main\"",
                ));
            }
            if extra.transitions.lift {
                return Err(DatasetError::invalid(
                    format!("{at}.transitions.lift"),
                    "only the main chain can be lifted",
                ));
            }
            let family = extra
                .transitions
                .to_core(&cover, &format!("{at}.transitions"))?;
            extra_chains.insert(extra.name.clone(), family);
        }

        let connection = match &self.connection {
            None => None,
            Some(c) => Some(c.to_core(&cover, "connection")?),
        };
        let connection_jacobians = match &self.connection {
            None => BTreeMap::new(),
            Some(c) => c.jacobian_map("connection")?,
        };
        let levi_civita = match &self.levi_civita {
            None => None,
            Some(c) => Some(c.to_core(&cover, "levi_civita")?),
        };
        let levi_jacobians = match &self.levi_civita {
            None => BTreeMap::new(),
            Some(c) => c.jacobian_map("levi_civita")?,
        };
        if let Some(levi) = &levi_civita {
            let n = frames.as_ref().map(|f| f.fiber_dim).unwrap_or(levi.fiber_dim);
            if levi.fiber_dim != n {
                return Err(DatasetError::invalid(
                    "levi_civita.fiber_dim",
                    format!("frame connection fiber {} where the frames have fiber {n}", levi.fiber_dim),
                ));
            }
        }

        let frame_scales = match &self.frame_scales {
            None => None,
            Some(charts) => {
                if self.levi_civita.is_none() {
                    return Err(DatasetError::invalid(
                        "frame_scales",
                        "frame scales only qualify an assembled operator",
                    ));
                }
                if charts.len() != cover.charts.len() {
                    return Err(DatasetError::invalid(
                        "frame_scales",
                        format!("{} entries for {} charts", charts.len(), cover.charts.len()),
                    ));
                }
                let mut out = Vec::with_capacity(charts.len());
                for (c, axes) in charts.iter().enumerate() {
                    let rank = match &cover.charts[c].geometry {
                        ChartGeometry::Grid { shape, .. } => shape.len(),
                        ChartGeometry::Cloud { .. } => {
                            return Err(DatasetError::invalid(
                                format!("frame_scales[{c}]"),
                                "frame scales need grid axes",
                            ))
                        }
                    };
                    if axes.len() != rank {
                        return Err(DatasetError::invalid(
                            format!("frame_scales[{c}]"),
                            format!("{} axes for a rank {rank} grid", axes.len()),
                        ));
                    }
                    let samples = cover.charts[c].sample_count();
                    let mut per_axis = Vec::with_capacity(axes.len());
                    for (a, field) in axes.iter().enumerate() {
                        let at = format!("frame_scales[{c}][{a}]");
                        let values = field.expand(samples, &at)?;
                        if values.iter().any(|v| *v <= 0.0 || !v.is_finite()) {
                            return Err(DatasetError::invalid(at, "scales must be positive"));
                        }
                        per_axis.push(values);
                    }
                    out.push(per_axis);
                }
                Some(out)
            }
        };

        let scalar_curvature = match &self.scalar_curvature {
            None => None,
            Some(fields) => {
                if fields.len() != cover.charts.len() {
                    return Err(DatasetError::invalid(
                        "scalar_curvature",
                        format!("{} fields for {} charts", fields.len(), cover.charts.len()),
                    ));
                }
                let mut out = Vec::with_capacity(fields.len());
                for (c, f) in fields.iter().enumerate() {
                    out.push(f.expand(
                        cover.charts[c].sample_count(),
                        &format!("scalar_curvature[{c}]"),
                    )?);
                }
                Some(out)
            }
        };

        let edges = match &self.edges {
            None => None,
            Some(specs) => {
                if specs.len() != cover.charts.len() {
                    return Err(DatasetError::invalid(
                        "edges",
                        format!("{} entries for {} charts", specs.len(), cover.charts.len()),
                    ));
                }
                let fiber = chain.fiber_dim;
                let mut out = Vec::with_capacity(specs.len());
                for (c, spec) in specs.iter().enumerate() {
                    let mut rules = Vec::with_capacity(spec.axes.len());
                    for (a, axis) in spec.axes.iter().enumerate() {
                        let at = format!("edges[{c}].axes[{a}]");
                        rules.push((
                            axis.low.to_core(fiber, &format!("{at}.low"))?,
                            axis.high.to_core(fiber, &format!("{at}.high"))?,
                        ));
                    }
                    out.push(ChartEdgeRules { rules });
                }
                Some(out)
            }
        };

        if let Some(op) = &self.operator {
            if op.fiber_dim != chain.fiber_dim {
                return Err(DatasetError::invalid(
                    "operator.fiber_dim",
                    format!("operator fiber {} where the chain has fiber {}", op.fiber_dim, chain.fiber_dim),
                ));
            }
            if self.edges.is_none() {
                return Err(DatasetError::invalid(
                    "operator",
                    "an explicit operator needs edge rules",
                ));
            }
        }
        if self.levi_civita.is_some() && self.edges.is_none() {
            return Err(DatasetError::invalid(
                "levi_civita",
                "an assembled first order operator needs edge rules",
            ));
        }

        let operator_matrix = match &self.operator_matrix {
            None => None,
            Some(spec) => {
                if self.operator.is_some() || self.levi_civita.is_some() {
                    return Err(DatasetError::invalid(
                        "operator_matrix",
                        "a matrix operator excludes stencil operators",
                    ));
                }
                if spec.dim == 0 {
                    return Err(DatasetError::invalid("operator_matrix.dim", "empty matrix"));
                }
                if spec.grading.len() != spec.dim {
                    return Err(DatasetError::invalid(
                        "operator_matrix.grading",
                        format!("{} signs for dimension {}", spec.grading.len(), spec.dim),
                    ));
                }
                if spec.grading.iter().any(|s| (s.abs() - 1.0).abs() > 1e-12) {
                    return Err(DatasetError::invalid(
                        "operator_matrix.grading",
                        "grading signs must be unimodular",
                    ));
                }
                let mut coo = CooMatrix::new(spec.dim, spec.dim);
                for (k, e) in spec.entries.iter().enumerate() {
                    if e.row >= spec.dim || e.col >= spec.dim {
                        return Err(DatasetError::invalid(
                            format!("operator_matrix.entries[{k}]"),
                            format!("index ({}, {}) outside dimension {}", e.row, e.col, spec.dim),
                        ));
                    }
                    coo.push(e.row, e.col, C64::new(e.re, e.im));
                }
                Some((spec.basis.clone(), spec.grading.clone(), CsrMatrix::from(&coo)))
            }
        };

        if let Some(GradingSpec::FiberSigns(signs)) = &self.grading {
            let fiber = self
                .operator
                .as_ref()
                .map(|op| op.fiber_dim)
                .unwrap_or(chain.fiber_dim);
            if signs.len() != fiber {
                return Err(DatasetError::invalid(
                    "grading",
                    format!("{} signs for fiber dimension {fiber}", signs.len()),
                ));
            }
            if signs.iter().any(|s| (s.abs() - 1.0).abs() > 1e-12) {
                return Err(DatasetError::invalid("grading", "grading signs must be unimodular"));
            }
        }

        let mut partitions = Vec::with_capacity(self.sections.partitions.len());
        for (k, p) in self.sections.partitions.iter().enumerate() {
            let at = format!("sections.partitions[{k}]");
            let mut pieces = Vec::with_capacity(p.pieces.len());
            for (n, piece) in p.pieces.iter().enumerate() {
                if piece.chart >= cover.charts.len() {
                    return Err(DatasetError::invalid(
                        format!("{at}.pieces[{n}].chart"),
                        format!("chart {} out of range", piece.chart),
                    ));
                }
                let weights = piece.weights.expand(
                    cover.charts[piece.chart].sample_count(),
                    &format!("{at}.pieces[{n}].weights"),
                )?;
                pieces.push(PartitionPiece { chart: piece.chart, weights });
            }
            let partition = PartitionOfUnity { pieces };
            partition
                .validate(&cover)
                .map_err(|e| DatasetError::invalid(&at, e))?;
            partitions.push((p.name.clone(), partition));
        }

        let mut section_values = Vec::with_capacity(self.sections.sections.len());
        for (k, s) in self.sections.sections.iter().enumerate() {
            let at = format!("sections.sections[{k}]");
            let family = if s.chain == "main" {
                &base_chain
            } else if s.chain == "spinor" {
                if !self.transitions.lift {
                    return Err(DatasetError::invalid(
                        format!("{at}.chain"),
                        "the spinor chain only exists when transitions request a lift",
                    ));
                }
                &chain
            } else {
                extra_chains.get(&s.chain).ok_or_else(|| {
                    DatasetError::invalid(format!("{at}.chain"), format!("unknown chain {:?}", s.chain))
                })?
            };
            if s.values.len() != cover.charts.len() {
                return Err(DatasetError::invalid(
                    format!("{at}.values"),
                    format!("{} charts of values for {} charts", s.values.len(), cover.charts.len()),
                ));
            }
            let mut values = Vec::with_capacity(s.values.len());
            for (c, m) in s.values.iter().enumerate() {
                let here = format!("{at}.values[{c}]");
                let v = m.to_complex(&here)?;
                if v.nrows() != family.fiber_dim || v.ncols() != cover.charts[c].sample_count() {
                    return Err(DatasetError::invalid(
                        &here,
                        format!(
                            "expected {} rows by {} columns, found {} by {}",
                            family.fiber_dim,
                            cover.charts[c].sample_count(),
                            v.nrows(),
                            v.ncols()
                        ),
                    ));
                }
                values.push(v);
            }
            section_values.push((s.name.clone(), s.chain.clone(), values));
        }

        let solver_chain = if self.transitions.lift { "spinor" } else { "main" };
        for (k, exp) in self.experiments.iter().enumerate() {
            if let ExperimentSpec::Lichnerowicz(l) = exp {
                for name in &l.probes {
                    let stored = section_values
                        .iter()
                        .any(|(n, chain, _)| n == name && chain == solver_chain);
                    if !stored {
                        return Err(DatasetError::invalid(
                            format!("experiments[{k}].probes"),
                            format!("no stored section {name:?} on the {solver_chain:?} chain"),
                        ));
                    }
                }
            }
        }

        Ok(Compiled {
            cover,
            base_chain,
            chain,
            frames,
            gerbe,
            lifts,
            extra_chains,
            metrics,
            connection,
            connection_jacobians,
            levi_civita,
            levi_jacobians,
            frame_scales,
            scalar_curvature,
            edges,
            operator: self.operator.clone(),
            operator_matrix,
            grading: self.grading.clone(),
            partitions,
            section_values,
            experiments: self.experiments.clone(),
        })
    }
}

impl Compiled {
    /// Edge rules mapped to the solver chain's fiber, cloned for assembly.
    pub fn edge_rules(&self) -> Result<Vec<ChartEdgeRules>, DatasetError> {
        self.edges
            .clone()
            .ok_or_else(|| DatasetError::invalid("edges", "this dataset declares no edge rules"))
    }

    /// The assembled operator description from the explicit terms.
    pub fn operator_description(&self) -> Result<Option<OperatorDescription>, DatasetError> {
        let Some(op) = &self.operator else {
            return Ok(None);
        };
        let edges = self.edge_rules()?;
        let mut terms = Vec::with_capacity(op.terms.len());
        for (k, term) in op.terms.iter().enumerate() {
            let at = format!("operator.terms[{k}]");
            if term.coeffs.len() != self.cover.charts.len() {
                return Err(DatasetError::invalid(
                    format!("{at}.coeffs"),
                    format!(
                        "{} coefficient fields for {} charts",
                        term.coeffs.len(),
                        self.cover.charts.len()
                    ),
                ));
            }
            let mut coeffs = Vec::with_capacity(term.coeffs.len());
            for (c, field) in term.coeffs.iter().enumerate() {
                coeffs.push(field.to_coeff(
                    op.fiber_dim,
                    self.cover.charts[c].sample_count(),
                    &format!("{at}.coeffs[{c}]"),
                )?);
            }
            terms.push(OperatorTerm { alpha: term.alpha.clone(), coeffs });
        }
        Ok(Some(OperatorDescription {
            fiber_dim: op.fiber_dim,
            terms,
            edges,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_dataset_text() -> String {
        let two = |v: [f64; 1]| MatrixSpec { rows: 1, cols: 1, re: v.to_vec(), im: None };
        let ds = Dataset {
            schema: SCHEMA.to_string(),
            name: "pair-of-arcs".to_string(),
            description: String::new(),
            cover: CoverSpec {
                charts: vec![
                    ChartSpec {
                        id: 0,
                        geometry: GeometrySpec::Grid {
                            shape: vec![4],
                            spacing: vec![0.5],
                            origin: vec![0.0],
                        },
                        weights: ScalarField::Constant(0.5),
                    },
                    ChartSpec {
                        id: 1,
                        geometry: GeometrySpec::Grid {
                            shape: vec![4],
                            spacing: vec![0.5],
                            origin: vec![2.0],
                        },
                        weights: ScalarField::Constant(0.5),
                    },
                ],
                overlaps: vec![OverlapSpec {
                    charts: [0, 1],
                    component: 0,
                    pairs: vec![[3, 1]],
                }],
                triples: vec![],
                quadruples: vec![],
            },
            transitions: TransitionsSpec {
                fiber_dim: 1,
                lift: false,
                maps: vec![
                    TransitionEntry {
                        from: 0,
                        to: 1,
                        component: 0,
                        data: MapData::Constant(two([1.0])),
                    },
                    TransitionEntry {
                        from: 1,
                        to: 0,
                        component: 0,
                        data: MapData::Constant(two([1.0])),
                    },
                ],
            },
            band: None,
            extra_chains: vec![],
            metrics: None,
            connection: None,
            levi_civita: None,
            frame_scales: None,
            scalar_curvature: None,
            operator: None,
            operator_matrix: None,
            edges: None,
            grading: None,
            sections: SectionsSpec::default(),
            experiments: vec![ExperimentSpec::Validate(ValidateExperiment::default())],
        };
        ds.to_json()
    }

    #[test]
    fn round_trips_through_json() {
        let text = circle_dataset_text();
        let parsed = parse_str(&text, "inline").unwrap();
        let echoed = parsed.to_json();
        let reparsed = parse_str(&echoed, "echo").unwrap();
        assert_eq!(parsed, reparsed);
        assert_eq!(text, echoed);
    }

    #[test]
    fn unknown_fields_name_the_path() {
        let text = circle_dataset_text().replace("\"component\": 0,", "\"component\": 0, \"wing\": 3,");
        let err = parse_str(&text, "inline").unwrap_err();
        match err {
            DatasetError::Parse { location, detail, .. } => {
                assert!(location.contains("overlaps") || detail.contains("wing"), "{location}: {detail}");
                assert!(detail.contains("wing"), "{detail}");
            }
            other => panic!("expected a parse error, found {other}"),
        }
    }

    #[test]
    fn truncated_input_is_a_parse_error() {
        let text = circle_dataset_text();
        let cut = &text[..text.len() / 2];
        assert!(matches!(parse_str(cut, "inline"), Err(DatasetError::Parse { .. })));
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let text = circle_dataset_text().replace("gerbelab-dataset/1", "gerbelab-dataset/9");
        assert!(matches!(parse_str(&text, "inline"), Err(DatasetError::Schema { .. })));
    }

    #[test]
    fn compiles_to_a_validated_cover() {
        let text = circle_dataset_text();
        let ds = parse_str(&text, "inline").unwrap();
        let compiled = ds.compile().unwrap();
        assert_eq!(compiled.cover.charts.len(), 2);
        assert_eq!(compiled.chain.fiber_dim, 1);
        assert!(compiled.frames.is_none());
    }

    #[test]
    fn transition_entries_must_reference_overlaps() {
        let text = circle_dataset_text().replace("\"from\": 1,", "\"from\": 2,");
        let ds = parse_str(&text, "inline").unwrap();
        let err = ds.compile().unwrap_err();
        match err {
            DatasetError::Invalid { at, .. } => assert!(at.contains("transitions.maps[1]"), "{at}"),
            other => panic!("expected an invalid-reference error, found {other}"),
        }
    }

    #[test]
    fn matrix_shape_mismatches_name_the_field() {
        let text = circle_dataset_text().replace(
            "\"re\": [\n              1.0\n            ]",
            "\"re\": [\n              1.0,\n              2.0\n            ]",
        );
        let ds = parse_str(&text, "inline").unwrap();
        assert!(ds.compile().is_err());
    }
}
