//! Čech cochain calculus on the nerve of a chart cover, with coefficients
//! in a finite additive band Z/m. Includes the coboundary-witness solver
//! over F_2 and the spin obstruction cocycle of a family of Spin(n) lifts.

use crate::clifford::SpinElement;
use crate::cover::Cover;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Products of three Spin lifts must land within this distance of +-1.
pub const SPIN_TRIPLE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CechError {
    #[error("simplex {0:?} has a non-increasing or out-of-range index tuple")]
    BadSimplex(Vec<usize>),
    #[error("simplex {0:?} listed twice")]
    DuplicateSimplex(Vec<usize>),
    #[error("face {missing:?} of simplex {of:?} is not listed")]
    FaceMissing { missing: Vec<usize>, of: Vec<usize> },
    #[error("band modulus must lie in 1..=2^32, got {0}")]
    BadModulus(u64),
    #[error("cochain has {got} values but the nerve has {expected} simplices of degree {degree}")]
    ValueCount {
        degree: u8,
        got: usize,
        expected: usize,
    },
    #[error("cochain value {0} not reduced modulo {1}")]
    ValueRange(u64, u64),
    #[error("cochain degree {0} out of range for this operation")]
    BadDegree(u8),
    #[error("bands differ between operands")]
    BandMismatch,
    #[error("coboundary witness requires band Z/2, got Z/{0}")]
    WitnessNeedsF2(u64),
    #[error("witness input is not a cocycle (first failing tetrahedron: {0:?})")]
    NotACocycle([usize; 4]),
    #[error("triangle {0:?} has no sampled triple-overlap points")]
    TriangleUnsampled([usize; 3]),
    #[error("missing Spin lifts for overlap ({0},{1}) component {2}")]
    MissingLift(usize, usize, usize),
    #[error("lift family for overlap ({i},{j}) component {component} has {got} samples, expected {expected}")]
    LiftSampleCount {
        i: usize,
        j: usize,
        component: usize,
        got: usize,
        expected: usize,
    },
    #[error("lifts for overlap ({i},{j}) component {component}, sample {sample} are not mutually inverse (residual {residual:.3e})")]
    LiftsNotInverse {
        i: usize,
        j: usize,
        component: usize,
        sample: usize,
        residual: f64,
    },
    #[error("triple product at {charts:?}, sample {sample} is not +-1 (residual {residual:.3e})")]
    TripleNotSign {
        charts: [usize; 3],
        sample: usize,
        residual: f64,
    },
    #[error("triple product sign is not constant over triangle {0:?}")]
    TripleSignNotConstant([usize; 3]),
    #[error("cover error: {0}")]
    Cover(String),
    #[error("clifford error: {0}")]
    Clifford(#[from] crate::clifford::CliffordError),
}

/// Additive group Z/m.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Band {
    modulus: u64,
}

impl Band {
    pub fn new(modulus: u64) -> Result<Self, CechError> {
        if modulus == 0 || modulus > 1 << 32 {
            return Err(CechError::BadModulus(modulus));
        }
        Ok(Self { modulus })
    }

    pub fn f2() -> Self {
        Self { modulus: 2 }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn reduce(&self, v: u64) -> u64 {
        v % self.modulus
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        (a + b) % self.modulus
    }

    pub fn neg(&self, a: u64) -> u64 {
        (self.modulus - a % self.modulus) % self.modulus
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        self.add(a, self.neg(b))
    }
}

fn strictly_increasing(tuple: &[usize], vertices: usize) -> bool {
    tuple.windows(2).all(|w| w[0] < w[1]) && tuple.iter().all(|&v| v < vertices)
}

/// Simplicial nerve of a cover, capped at dimension 3.
#[derive(Debug, Clone)]
pub struct Nerve {
    vertices: usize,
    edges: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
    tetrahedra: Vec<[usize; 4]>,
    edge_lookup: BTreeMap<[usize; 2], usize>,
    triangle_lookup: BTreeMap<[usize; 3], usize>,
}

impl Nerve {
    pub fn new(
        vertices: usize,
        edges: Vec<[usize; 2]>,
        triangles: Vec<[usize; 3]>,
        tetrahedra: Vec<[usize; 4]>,
    ) -> Result<Self, CechError> {
        let mut edge_lookup = BTreeMap::new();
        for (idx, e) in edges.iter().enumerate() {
            if !strictly_increasing(e, vertices) {
                return Err(CechError::BadSimplex(e.to_vec()));
            }
            if edge_lookup.insert(*e, idx).is_some() {
                return Err(CechError::DuplicateSimplex(e.to_vec()));
            }
        }
        let mut triangle_lookup = BTreeMap::new();
        for (idx, t) in triangles.iter().enumerate() {
            if !strictly_increasing(t, vertices) {
                return Err(CechError::BadSimplex(t.to_vec()));
            }
            if triangle_lookup.insert(*t, idx).is_some() {
                return Err(CechError::DuplicateSimplex(t.to_vec()));
            }
            for omit in 0..3 {
                let face = edge_face(t, omit);
                if !edge_lookup.contains_key(&face) {
                    return Err(CechError::FaceMissing {
                        missing: face.to_vec(),
                        of: t.to_vec(),
                    });
                }
            }
        }
        let mut tetra_seen = BTreeSet::new();
        for q in &tetrahedra {
            if !strictly_increasing(q, vertices) {
                return Err(CechError::BadSimplex(q.to_vec()));
            }
            if !tetra_seen.insert(*q) {
                return Err(CechError::DuplicateSimplex(q.to_vec()));
            }
            for omit in 0..4 {
                let face = triangle_face(q, omit);
                if !triangle_lookup.contains_key(&face) {
                    return Err(CechError::FaceMissing {
                        missing: face.to_vec(),
                        of: q.to_vec(),
                    });
                }
            }
        }
        Ok(Self {
            vertices,
            edges,
            triangles,
            tetrahedra,
            edge_lookup,
            triangle_lookup,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn tetrahedra(&self) -> &[[usize; 4]] {
        &self.tetrahedra
    }

    pub fn edge_index(&self, e: [usize; 2]) -> Option<usize> {
        self.edge_lookup.get(&e).copied()
    }

    pub fn triangle_index(&self, t: [usize; 3]) -> Option<usize> {
        self.triangle_lookup.get(&t).copied()
    }

    pub fn simplex_count(&self, degree: u8) -> usize {
        match degree {
            0 => self.vertices,
            1 => self.edges.len(),
            2 => self.triangles.len(),
            3 => self.tetrahedra.len(),
            _ => 0,
        }
    }
}

fn edge_face(t: &[usize; 3], omit: usize) -> [usize; 2] {
    match omit {
        0 => [t[1], t[2]],
        1 => [t[0], t[2]],
        _ => [t[0], t[1]],
    }
}

fn triangle_face(q: &[usize; 4], omit: usize) -> [usize; 3] {
    match omit {
        0 => [q[1], q[2], q[3]],
        1 => [q[0], q[2], q[3]],
        2 => [q[0], q[1], q[3]],
        _ => [q[0], q[1], q[2]],
    }
}

/// Degree-k cochain with one band value per k-simplex, in nerve order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    pub degree: u8,
    pub band: Band,
    pub values: Vec<u64>,
}

impl Cochain {
    pub fn new(nerve: &Nerve, degree: u8, band: Band, values: Vec<u64>) -> Result<Self, CechError> {
        if degree > 3 {
            return Err(CechError::BadDegree(degree));
        }
        let expected = nerve.simplex_count(degree);
        if values.len() != expected {
            return Err(CechError::ValueCount {
                degree,
                got: values.len(),
                expected,
            });
        }
        for &v in &values {
            if v >= band.modulus() {
                return Err(CechError::ValueRange(v, band.modulus()));
            }
        }
        Ok(Self {
            degree,
            band,
            values,
        })
    }

    pub fn zero(nerve: &Nerve, degree: u8, band: Band) -> Result<Self, CechError> {
        Self::new(nerve, degree, band, vec![0; nerve.simplex_count(degree)])
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    /// Componentwise difference, same degree and band.
    pub fn sub(&self, other: &Self) -> Result<Self, CechError> {
        if self.band != other.band || self.degree != other.degree {
            return Err(CechError::BandMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| self.band.sub(a, b))
            .collect();
        Ok(Self {
            degree: self.degree,
            band: self.band,
            values,
        })
    }
}

/// Alternating-sum Čech differential (signs vanish over Z/2).
pub fn coboundary(nerve: &Nerve, c: &Cochain) -> Result<Cochain, CechError> {
    let band = c.band;
    match c.degree {
        0 => {
            let values = nerve
                .edges()
                .iter()
                .map(|&[a, b]| band.sub(c.values[b], c.values[a]))
                .collect();
            Cochain::new(nerve, 1, band, values)
        }
        1 => {
            let values = nerve
                .triangles()
                .iter()
                .map(|t| {
                    let jk = c.values[nerve.edge_index(edge_face(t, 0)).expect("face closed")];
                    let ik = c.values[nerve.edge_index(edge_face(t, 1)).expect("face closed")];
                    let ij = c.values[nerve.edge_index(edge_face(t, 2)).expect("face closed")];
                    band.add(band.sub(jk, ik), ij)
                })
                .collect();
            Cochain::new(nerve, 2, band, values)
        }
        2 => {
            let values = nerve
                .tetrahedra()
                .iter()
                .map(|q| {
                    let mut acc = 0u64;
                    for omit in 0..4 {
                        let v = c.values
                            [nerve.triangle_index(triangle_face(q, omit)).expect("face closed")];
                        acc = if omit % 2 == 0 {
                            band.add(acc, v)
                        } else {
                            band.sub(acc, v)
                        };
                    }
                    acc
                })
                .collect();
            Cochain::new(nerve, 3, band, values)
        }
        d => Err(CechError::BadDegree(d)),
    }
}

pub fn is_cocycle(nerve: &Nerve, c: &Cochain) -> Result<bool, CechError> {
    Ok(coboundary(nerve, c)?.is_zero())
}

/// Bit-packed F_2 row with an attached right-hand side.
#[derive(Clone)]
struct F2Row {
    bits: Vec<u64>,
    rhs: bool,
}

impl F2Row {
    fn new(blocks: usize) -> Self {
        Self {
            bits: vec![0; blocks],
            rhs: false,
        }
    }

    fn get(&self, col: usize) -> bool {
        self.bits[col / 64] >> (col % 64) & 1 == 1
    }

    fn set(&mut self, col: usize) {
        self.bits[col / 64] |= 1 << (col % 64);
    }

    fn xor_in(&mut self, other: &F2Row) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a ^= b;
        }
        self.rhs ^= other.rhs;
    }

    fn is_zero(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }
}

/// Solves A x = rhs over F_2 by Gaussian elimination, free variables set to
/// zero. Returns None when the system is inconsistent.
fn solve_f2(mut rows: Vec<F2Row>, unknowns: usize) -> Option<Vec<bool>> {
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; unknowns];
    let mut next_row = 0;
    for col in 0..unknowns {
        let Some(pivot) = (next_row..rows.len()).find(|&r| rows[r].get(col)) else {
            continue;
        };
        rows.swap(next_row, pivot);
        let pivot_row = rows[next_row].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != next_row && row.get(col) {
                row.xor_in(&pivot_row);
            }
        }
        pivot_of_col[col] = Some(next_row);
        next_row += 1;
    }
    if rows[next_row..].iter().any(|r| r.is_zero() && r.rhs) {
        return None;
    }
    let mut x = vec![false; unknowns];
    for col in 0..unknowns {
        if let Some(r) = pivot_of_col[col] {
            x[col] = rows[r].rhs;
        }
    }
    Some(x)
}

/// Finds a 1-cochain b with delta(b) = c over Z/2, when one exists. The
/// unknowns are edge values, the equations are the triangles. Input must be
/// a cocycle; the returned witness is re-verified before being returned.
pub fn coboundary_witness(nerve: &Nerve, c: &Cochain) -> Result<Option<Cochain>, CechError> {
    if c.band.modulus() != 2 {
        return Err(CechError::WitnessNeedsF2(c.band.modulus()));
    }
    if c.degree != 2 {
        return Err(CechError::BadDegree(c.degree));
    }
    let dc = coboundary(nerve, c)?;
    if let Some(bad) = dc.values.iter().position(|&v| v != 0) {
        return Err(CechError::NotACocycle(nerve.tetrahedra()[bad]));
    }
    let unknowns = nerve.edges().len();
    let blocks = unknowns.div_ceil(64).max(1);
    let mut rows = Vec::with_capacity(nerve.triangles().len());
    for (ti, t) in nerve.triangles().iter().enumerate() {
        let mut row = F2Row::new(blocks);
        for omit in 0..3 {
            row.set(nerve.edge_index(edge_face(t, omit)).expect("face closed"));
        }
        row.rhs = c.values[ti] == 1;
        rows.push(row);
    }
    let Some(x) = solve_f2(rows, unknowns) else {
        return Ok(None);
    };
    let witness = Cochain::new(
        nerve,
        1,
        c.band,
        x.into_iter().map(u64::from).collect(),
    )?;
    let check = coboundary(nerve, &witness)?;
    assert_eq!(check, *c, "witness verification must be exact over F2");
    Ok(Some(witness))
}

/// Per-overlap-component Spin(n) lifts, sampled along the component's
/// matched pairs; both key directions must be present.
pub type SpinLiftFamily = BTreeMap<(usize, usize, usize), Vec<SpinElement>>;

/// Validates a lift family against a cover: both directions present with
/// matching sample counts and mutually inverse values.
pub fn validate_lifts(cover: &Cover, lifts: &SpinLiftFamily) -> Result<(), CechError> {
    for ov in &cover.overlaps {
        let (i, j) = ov.charts;
        let fwd = lifts
            .get(&(i, j, ov.component))
            .ok_or(CechError::MissingLift(i, j, ov.component))?;
        let bwd = lifts
            .get(&(j, i, ov.component))
            .ok_or(CechError::MissingLift(j, i, ov.component))?;
        for (side, family) in [(i, fwd), (j, bwd)] {
            if family.len() != ov.pairs.len() {
                return Err(CechError::LiftSampleCount {
                    i,
                    j,
                    component: ov.component,
                    got: family.len(),
                    expected: ov.pairs.len(),
                });
            }
            let _ = side;
        }
        for t in 0..ov.pairs.len() {
            let product = fwd[t].element().mul(bwd[t].element())?;
            let residual = product
                .sub(&crate::clifford::CliffordElement::one(product.dim())?)?
                .norm();
            if residual > crate::cover::TRANSITION_INVERSE_TOL {
                return Err(CechError::LiftsNotInverse {
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

/// The sign cocycle of a Spin lift family: on each triangle (i,j,k) of the
/// nerve, the product g_ij g_jk g_ki is +-1; the output records that sign in
/// Z/2 per triangle and is asserted to be a cocycle.
pub fn spin_obstruction(cover: &Cover, lifts: &SpinLiftFamily) -> Result<Cochain, CechError> {
    validate_lifts(cover, lifts)?;
    let nerve = cover
        .nerve()
        .map_err(|e| CechError::Cover(e.to_string()))?;
    let band = Band::f2();
    let mut values = vec![None::<u64>; nerve.triangles().len()];
    for triple in &cover.triples {
        let (i, j, k) = triple.charts;
        let t_idx = nerve
            .triangle_index([i, j, k])
            .expect("cover triples appear in its nerve");
        let g_ij = &lifts
            .get(&(i, j, triple.ij.0))
            .ok_or(CechError::MissingLift(i, j, triple.ij.0))?[triple.ij.1];
        let g_jk = &lifts
            .get(&(j, k, triple.jk.0))
            .ok_or(CechError::MissingLift(j, k, triple.jk.0))?[triple.jk.1];
        let g_ki = &lifts
            .get(&(k, i, triple.ik.0))
            .ok_or(CechError::MissingLift(k, i, triple.ik.0))?[triple.ik.1];
        let product = g_ij
            .element()
            .mul(g_jk.element())?
            .mul(g_ki.element())?;
        let scalar = product.scalar_part();
        let one = crate::clifford::CliffordElement::one(product.dim())?;
        let residual = if scalar >= 0.0 {
            product.sub(&one)?.norm()
        } else {
            product.add(&one)?.norm()
        };
        if residual > SPIN_TRIPLE_TOL {
            return Err(CechError::TripleNotSign {
                charts: [i, j, k],
                sample: triple.ij.1,
                residual,
            });
        }
        let bit = u64::from(scalar < 0.0);
        match values[t_idx] {
            None => values[t_idx] = Some(bit),
            Some(prev) if prev != bit => {
                return Err(CechError::TripleSignNotConstant([i, j, k]))
            }
            Some(_) => {}
        }
    }
    let values: Result<Vec<u64>, CechError> = values
        .iter()
        .enumerate()
        .map(|(idx, v)| v.ok_or(CechError::TriangleUnsampled(nerve.triangles()[idx])))
        .collect();
    let c = Cochain::new(&nerve, 2, band, values?)?;
    let dc = coboundary(&nerve, &c)?;
    assert!(dc.is_zero(), "triple-sign cochain must be a cocycle");
    Ok(c)
}
