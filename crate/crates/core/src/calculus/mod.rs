//! Discrete differential calculus over chart covers: connections and their
//! transformation law, curvature and Chern forms, spin connections, operator
//! assembly with overlap identification, Lichnerowicz bookkeeping, and
//! principal symbols.

mod connection;
mod operator;
mod symbol;

pub use connection::{
    chern, chern_overlap_residual, curvature, integrate_top_form, spin_connection,
    validate_connection, ChernForms, ConnectionData, ConnectionReport, CurvatureData,
};
pub use operator::{
    assemble_dirac, assemble_operator, blockwise_operator, boundary_exclusion,
    connection_laplacian, covariant_derivatives, equivariance_residual, lichnerowicz_residual,
    pairing, ChartEdgeRules, DiracOperator, DiscreteOperator, DofMap, EdgeRule, LinkTarget,
    OperatorDescription, OperatorTerm,
};
pub use symbol::{elliptic, principal_symbol, EllipticityReport, SymbolSample};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::C64;

/// Sampled matrix coefficients over one chart: one constant matrix or one
/// matrix per sample.
#[derive(Debug, Clone)]
pub enum CoeffField {
    Constant(DMatrix<C64>),
    PerSample(Vec<DMatrix<C64>>),
}

impl CoeffField {
    pub fn at(&self, sample: usize) -> &DMatrix<C64> {
        match self {
            CoeffField::Constant(m) => m,
            CoeffField::PerSample(ms) => &ms[sample],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, CoeffField::Constant(_))
    }
}

#[derive(Debug, Error)]
pub enum CalculusError {
    #[error("chart {0} must be a grid for differential calculus")]
    GridOnly(usize),
    #[error("chart {chart}: expected coefficient data for {expected} axes, got {got}")]
    AxisCount { chart: usize, got: usize, expected: usize },
    #[error("chart {chart}: expected {expected} sampled coefficients, got {got}")]
    SampleCount { chart: usize, got: usize, expected: usize },
    #[error("coefficient matrices must be {expected}x{expected}, got {rows}x{cols}")]
    CoeffShape { expected: usize, rows: usize, cols: usize },
    #[error("chart {chart} axis {axis} sample {sample}: frame connection must be real antisymmetric, residual {residual:.3e}")]
    NotAntisymmetric { chart: usize, axis: usize, sample: usize, residual: f64 },
    #[error("chart {chart}: grid extent {extent} along axis {axis} is too small for the stencil")]
    ShapeTooSmall { chart: usize, axis: usize, extent: usize },
    #[error("no transition to transport chart {chart} sample {sample} to its owner")]
    TransportUnavailable { chart: usize, sample: usize },
    #[error("chart {chart} axis {axis} ({side} side): stepping off the grid with no edge rule")]
    EdgeRuleMissing { chart: usize, axis: usize, side: &'static str },
    #[error("chart {chart} axis {axis}: edge rule provides {got} maps for {expected} edge positions")]
    EdgeRuleCount { chart: usize, axis: usize, got: usize, expected: usize },
    #[error("operator terms must be order 0 or a single first derivative; higher orders arise as matrix products")]
    HigherOrderTerm,
    #[error("symbol unavailable: the operator was supplied as a bare matrix without a stencil description")]
    MatrixOnly,
    #[error("operators live over different sample layouts")]
    LayoutMismatch,
    #[error("fiber dimension mismatch: {0} vs {1}")]
    FiberDim(usize, usize),
    #[error("edge twist is not invertible")]
    SingularTwist,
    #[error("cover error: {0}")]
    Cover(#[from] crate::cover::CoverError),
    #[error("clifford error: {0}")]
    Clifford(#[from] crate::clifford::CliffordError),
    #[error("linear algebra error: {0}")]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("chern forms are implemented for charts of dimension at most three, chart {0} has rank {1}")]
    BaseDimension(usize, usize),
}
