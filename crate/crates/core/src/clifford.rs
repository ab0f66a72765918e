//! Real Clifford algebra Cl(R^n) with generators e_1..e_n satisfying
//!
//! ```text
//!   e_k * e_k = -1,        e_k * e_l = -e_l * e_k   (k != l)
//! ```
//!
//! Elements are stored densely over the 2^n blade basis. Blade `b` is the
//! ordered product of the generators whose bits are set in the index mask
//! (bit k-1 <=> e_k), factors in increasing index order. The product sign of
//! two blades is the parity of the transpositions needed to merge the two
//! ordered factor lists, times one -1 per repeated generator.
//!
//! The even-grade unit elements form Spin(n); `adjoint_action` (g v g^-1)
//! realizes the double cover Spin(n) -> SO(n), and `lift_rotation` /
//! `lift_path` invert it, tracking the sign ambiguity by path continuity.

use nalgebra::DMatrix;
use thiserror::Error;

/// Largest supported generator count; 2^8 = 256 blade coefficients.
pub const MAX_DIM: usize = 8;

/// Unit-norm / inverse checks on Spin elements.
pub const SPIN_UNIT_TOL: f64 = 1e-12;
/// Grade-1 preservation check for adjoint actions.
pub const ADJOINT_GRADE_TOL: f64 = 1e-12;
/// Orthogonality/determinant slack accepted on rotation-matrix input.
pub const ROTATION_INPUT_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum CliffordError {
    #[error("generator count {0} exceeds supported maximum {MAX_DIM}")]
    DimensionTooLarge(usize),
    #[error("operands live in different algebras ({0} vs {1} generators)")]
    DimensionMismatch(usize, usize),
    #[error("element has odd-grade support (max residual {0:.3e})")]
    NotEven(f64),
    #[error("element norm deviates from 1 by {0:.3e}")]
    NotUnit(f64),
    #[error("element is not invertible by reversal (residual {0:.3e})")]
    NotInvertible(f64),
    #[error("value is not a grade-1 vector (residual {0:.3e})")]
    NotGradeOne(f64),
    #[error("adjoint action does not preserve grade 1 (residual {0:.3e})")]
    GradeNotPreserved(f64),
    #[error("matrix is not in SO(n) within {ROTATION_INPUT_TOL:.0e} (residual {0:.3e})")]
    NotARotation(f64),
    #[error("rotation lift in dimension {0} requires an antisymmetric generator")]
    NeedsGenerator(usize),
    #[error("generator matrix is not antisymmetric (residual {0:.3e})")]
    NotAntisymmetric(f64),
    #[error("empty rotation path")]
    EmptyPath,
}

/// Sign from merging the ordered factor lists of blades `a` and `b`
/// (transposition parity), excluding the metric contribution.
fn reorder_sign(a: u32, b: u32) -> f64 {
    let mut shifted = a >> 1;
    let mut swaps = 0u32;
    while shifted != 0 {
        swaps += (shifted & b).count_ones();
        shifted >>= 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Product of basis blades: resulting blade mask and total sign, with the
/// e_k^2 = -1 metric applied to every repeated generator.
pub fn blade_mul(a: u32, b: u32) -> (u32, f64) {
    let mut sign = reorder_sign(a, b);
    if (a & b).count_ones() % 2 == 1 {
        sign = -sign;
    }
    (a ^ b, sign)
}

/// Grade (factor count) of a basis blade.
pub fn blade_grade(mask: u32) -> u32 {
    mask.count_ones()
}

/// Sign of reversion on a grade-k blade: (-1)^(k(k-1)/2).
fn reversion_sign(grade: u32) -> f64 {
    if (grade * grade.wrapping_sub(1) / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Dense element of Cl(R^n).
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordElement {
    dim: usize,
    coeffs: Vec<f64>,
}

impl CliffordElement {
    pub fn zero(dim: usize) -> Result<Self, CliffordError> {
        if dim > MAX_DIM {
            return Err(CliffordError::DimensionTooLarge(dim));
        }
        Ok(Self {
            dim,
            coeffs: vec![0.0; 1 << dim],
        })
    }

    pub fn scalar(dim: usize, value: f64) -> Result<Self, CliffordError> {
        let mut e = Self::zero(dim)?;
        e.coeffs[0] = value;
        Ok(e)
    }

    pub fn one(dim: usize) -> Result<Self, CliffordError> {
        Self::scalar(dim, 1.0)
    }

    /// Basis blade for a generator-index mask (bit k-1 <=> e_k).
    pub fn basis_blade(dim: usize, mask: u32) -> Result<Self, CliffordError> {
        let mut e = Self::zero(dim)?;
        assert!((mask as usize) < (1 << dim), "blade mask out of range");
        e.coeffs[mask as usize] = 1.0;
        Ok(e)
    }

    /// The generator e_k, with k in 1..=dim.
    pub fn basis_vector(dim: usize, k: usize) -> Result<Self, CliffordError> {
        assert!(k >= 1 && k <= dim, "generator index out of range");
        Self::basis_blade(dim, 1 << (k - 1))
    }

    /// Grade-1 element with the given coordinates.
    pub fn vector(coords: &[f64]) -> Result<Self, CliffordError> {
        let mut e = Self::zero(coords.len())?;
        for (k, &c) in coords.iter().enumerate() {
            e.coeffs[1 << k] = c;
        }
        Ok(e)
    }

    pub fn from_coeffs(dim: usize, coeffs: Vec<f64>) -> Result<Self, CliffordError> {
        if dim > MAX_DIM {
            return Err(CliffordError::DimensionTooLarge(dim));
        }
        assert_eq!(coeffs.len(), 1 << dim, "coefficient count mismatch");
        Ok(Self { dim, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, mask: u32) -> f64 {
        self.coeffs[mask as usize]
    }

    pub fn set_coeff(&mut self, mask: u32, value: f64) {
        self.coeffs[mask as usize] = value;
    }

    pub fn scalar_part(&self) -> f64 {
        self.coeffs[0]
    }

    fn check_dims(&self, other: &Self) -> Result<(), CliffordError> {
        if self.dim != other.dim {
            return Err(CliffordError::DimensionMismatch(self.dim, other.dim));
        }
        Ok(())
    }

    /// Full geometric product.
    pub fn mul(&self, other: &Self) -> Result<Self, CliffordError> {
        self.check_dims(other)?;
        let mut out = Self::zero(self.dim)?;
        for (a, &ca) in self.coeffs.iter().enumerate() {
            if ca == 0.0 {
                continue;
            }
            for (b, &cb) in other.coeffs.iter().enumerate() {
                if cb == 0.0 {
                    continue;
                }
                let (mask, sign) = blade_mul(a as u32, b as u32);
                out.coeffs[mask as usize] += sign * ca * cb;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self, CliffordError> {
        self.check_dims(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| x + y)
            .collect();
        Ok(Self {
            dim: self.dim,
            coeffs,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, CliffordError> {
        self.check_dims(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| x - y)
            .collect();
        Ok(Self {
            dim: self.dim,
            coeffs,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    /// Reversion: reverses factor order within each blade.
    pub fn reverse(&self) -> Self {
        let mut out = self.clone();
        for (mask, c) in out.coeffs.iter_mut().enumerate() {
            *c *= reversion_sign(blade_grade(mask as u32));
        }
        out
    }

    /// Clifford conjugation (reversion composed with grade involution). With
    /// e_k^2 = -1 this is the positivity-compatible involution: the scalar
    /// part of conj(a) * a is the squared coefficient norm.
    pub fn conjugation(&self) -> Self {
        self.reverse().grade_involution()
    }

    /// Grade involution: -1 on odd-grade blades.
    pub fn grade_involution(&self) -> Self {
        let mut out = self.clone();
        for (mask, c) in out.coeffs.iter_mut().enumerate() {
            if blade_grade(mask as u32) % 2 == 1 {
                *c = -*c;
            }
        }
        out
    }

    /// Projection onto grade-k blades.
    pub fn grade_projection(&self, grade: u32) -> Self {
        let mut out = Self::zero(self.dim).expect("dim already validated");
        for (mask, &c) in self.coeffs.iter().enumerate() {
            if blade_grade(mask as u32) == grade {
                out.coeffs[mask] = c;
            }
        }
        out
    }

    /// Largest |coefficient| outside the given grade.
    pub fn off_grade_residual(&self, grade: u32) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(mask, _)| blade_grade(*mask as u32) != grade)
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    }

    /// Largest |coefficient| on odd-grade blades.
    pub fn odd_residual(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(mask, _)| blade_grade(*mask as u32) % 2 == 1)
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    }

    /// Coordinates of a grade-1 element; errors if other grades are present.
    pub fn to_vector(&self) -> Result<Vec<f64>, CliffordError> {
        let residual = self.off_grade_residual(1);
        if residual > ADJOINT_GRADE_TOL {
            return Err(CliffordError::NotGradeOne(residual));
        }
        Ok((0..self.dim).map(|k| self.coeffs[1 << k]).collect())
    }

    /// Blade-orthonormal scalar product; coincides with the scalar part of
    /// conj(a) * b, so it is invariant under left multiplication by Spin
    /// elements.
    pub fn scalar_product(&self, other: &Self) -> Result<f64, CliffordError> {
        self.check_dims(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| x * y)
            .sum())
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Exponential by scaling and squaring with a truncated series.
    pub fn exp(&self) -> Result<Self, CliffordError> {
        let norm = self.norm();
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let x = self.scale(0.5f64.powi(squarings as i32));
        let mut sum = Self::one(self.dim)?;
        let mut term = Self::one(self.dim)?;
        for k in 1..64 {
            term = term.mul(&x)?.scale(1.0 / k as f64);
            sum = sum.add(&term)?;
            if term.norm() < 1e-20 * sum.norm().max(1.0) {
                break;
            }
        }
        let mut out = sum;
        for _ in 0..squarings {
            out = out.mul(&out)?;
        }
        Ok(out)
    }

    /// Matrix of left multiplication by `self` on the blade basis.
    pub fn left_mul_matrix(&self) -> DMatrix<f64> {
        let size = 1 << self.dim;
        let mut m = DMatrix::zeros(size, size);
        for (a, &ca) in self.coeffs.iter().enumerate() {
            if ca == 0.0 {
                continue;
            }
            for b in 0..size {
                let (mask, sign) = blade_mul(a as u32, b as u32);
                m[(mask as usize, b)] += sign * ca;
            }
        }
        m
    }

    /// Matrix of right multiplication by `self` on the blade basis. Commutes
    /// with every left multiplication by associativity.
    pub fn right_mul_matrix(&self) -> DMatrix<f64> {
        let size = 1 << self.dim;
        let mut m = DMatrix::zeros(size, size);
        for (a, &ca) in self.coeffs.iter().enumerate() {
            if ca == 0.0 {
                continue;
            }
            for b in 0..size {
                let (mask, sign) = blade_mul(b as u32, a as u32);
                m[(mask as usize, b)] += sign * ca;
            }
        }
        m
    }
}

/// Diagonal of the grade involution on the blade basis: +1 on even blades,
/// -1 on odd ones. Anticommutes with left multiplication by any vector.
pub fn grade_involution_diagonal(dim: usize) -> Vec<f64> {
    (0..1usize << dim)
        .map(|mask| {
            if blade_grade(mask as u32) % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// Validated element of Spin(n): even grade, unit norm, invertible by
/// reversal, with a grade-preserving adjoint action.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinElement {
    element: CliffordElement,
}

impl SpinElement {
    pub fn new(element: CliffordElement) -> Result<Self, CliffordError> {
        let odd = element.odd_residual();
        if odd > SPIN_UNIT_TOL {
            return Err(CliffordError::NotEven(odd));
        }
        let norm_dev = (element.norm() - 1.0).abs();
        if norm_dev > SPIN_UNIT_TOL {
            return Err(CliffordError::NotUnit(norm_dev));
        }
        let rev = element.reverse();
        let prod = rev.mul(&element)?;
        let inv_residual = prod
            .sub(&CliffordElement::one(element.dim())?)?
            .norm();
        if inv_residual > SPIN_UNIT_TOL {
            return Err(CliffordError::NotInvertible(inv_residual));
        }
        let spin = Self { element };
        for k in 1..=spin.element.dim() {
            let v = CliffordElement::basis_vector(spin.element.dim(), k)?;
            let image = spin.apply_raw(&v)?;
            let residual = image.off_grade_residual(1);
            if residual > ADJOINT_GRADE_TOL {
                return Err(CliffordError::GradeNotPreserved(residual));
            }
        }
        Ok(spin)
    }

    pub fn element(&self) -> &CliffordElement {
        &self.element
    }

    pub fn dim(&self) -> usize {
        self.element.dim()
    }

    pub fn inverse(&self) -> CliffordElement {
        self.element.reverse()
    }

    pub fn neg(&self) -> Self {
        Self {
            element: self.element.neg(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, CliffordError> {
        Self::new(self.element.mul(&other.element)?)
    }

    fn apply_raw(&self, v: &CliffordElement) -> Result<CliffordElement, CliffordError> {
        self.element.mul(v)?.mul(&self.element.reverse())
    }

    /// g v g^-1 on a grade-1 vector; the image is checked to be grade 1.
    pub fn adjoint_action(&self, v: &CliffordElement) -> Result<CliffordElement, CliffordError> {
        let residual = v.off_grade_residual(1);
        if residual > ADJOINT_GRADE_TOL {
            return Err(CliffordError::NotGradeOne(residual));
        }
        let image = self.apply_raw(v)?;
        let off = image.off_grade_residual(1);
        if off > ADJOINT_GRADE_TOL {
            return Err(CliffordError::GradeNotPreserved(off));
        }
        Ok(image.grade_projection(1))
    }

    /// The SO(n) matrix of the adjoint action on coordinates.
    pub fn rotation_matrix(&self) -> Result<DMatrix<f64>, CliffordError> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for k in 1..=n {
            let image = self.adjoint_action(&CliffordElement::basis_vector(n, k)?)?;
            let col = image.to_vector()?;
            for (row, &value) in col.iter().enumerate() {
                m[(row, k - 1)] = value;
            }
        }
        Ok(m)
    }
}

fn so_residual(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let gram = m.transpose() * m;
    let mut residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            residual = residual.max((gram[(i, j)] - target).abs());
        }
    }
    residual.max((m.determinant() - 1.0).abs())
}

fn check_rotation(m: &DMatrix<f64>) -> Result<(), CliffordError> {
    assert_eq!(m.nrows(), m.ncols(), "rotation matrix must be square");
    let residual = so_residual(m);
    if residual > ROTATION_INPUT_TOL {
        return Err(CliffordError::NotARotation(residual));
    }
    Ok(())
}

/// Canonical sign: first nonzero coefficient (in blade order) positive.
fn canonical_sign(e: &CliffordElement) -> CliffordElement {
    for &c in e.coeffs() {
        if c.abs() > 1e-9 {
            return if c < 0.0 { e.neg() } else { e.clone() };
        }
    }
    e.clone()
}

/// Quaternion (w, x, y, z) of a 3x3 rotation matrix, largest-pivot branch.
fn rotation_to_quaternion(m: &DMatrix<f64>) -> [f64; 4] {
    let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let (w, x, y, z);
    if tr >= m[(0, 0)].max(m[(1, 1)]).max(m[(2, 2)]) {
        let s = (1.0 + tr).sqrt() * 2.0;
        w = 0.25 * s;
        x = (m[(2, 1)] - m[(1, 2)]) / s;
        y = (m[(0, 2)] - m[(2, 0)]) / s;
        z = (m[(1, 0)] - m[(0, 1)]) / s;
    } else if m[(0, 0)] >= m[(1, 1)] && m[(0, 0)] >= m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(2, 1)] - m[(1, 2)]) / s;
        x = 0.25 * s;
        y = (m[(0, 1)] + m[(1, 0)]) / s;
        z = (m[(0, 2)] + m[(2, 0)]) / s;
    } else if m[(1, 1)] >= m[(2, 2)] {
        let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(0, 2)] - m[(2, 0)]) / s;
        x = (m[(0, 1)] + m[(1, 0)]) / s;
        y = 0.25 * s;
        z = (m[(1, 2)] + m[(2, 1)]) / s;
    } else {
        let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
        w = (m[(1, 0)] - m[(0, 1)]) / s;
        x = (m[(0, 2)] + m[(2, 0)]) / s;
        y = (m[(1, 2)] + m[(2, 1)]) / s;
        z = 0.25 * s;
    }
    let norm = (w * w + x * x + y * y + z * z).sqrt();
    [w / norm, x / norm, y / norm, z / norm]
}

/// Spin(3) element of a unit quaternion under the adjoint-compatible
/// identification i = e2e3, j = e3e1, k = e1e2.
fn quaternion_to_spin(q: [f64; 4]) -> Result<SpinElement, CliffordError> {
    let [w, x, y, z] = q;
    let mut e = CliffordElement::zero(3)?;
    e.set_coeff(0b000, w);
    e.set_coeff(0b110, x); // e2e3
    e.set_coeff(0b101, -y); // e3e1 = -e1e3
    e.set_coeff(0b011, z); // e1e2
    SpinElement::new(e)
}

/// Both Spin(n) lifts (g, -g) of a rotation, n in {2, 3}; the first lift is
/// sign-canonical. The adjoint of each lift reproduces the input matrix.
pub fn lift_rotation(m: &DMatrix<f64>) -> Result<(SpinElement, SpinElement), CliffordError> {
    check_rotation(m)?;
    let n = m.nrows();
    let lift = match n {
        2 => {
            let theta = m[(1, 0)].atan2(m[(0, 0)]);
            let mut e = CliffordElement::zero(2)?;
            e.set_coeff(0b00, (theta / 2.0).cos());
            e.set_coeff(0b11, (theta / 2.0).sin());
            SpinElement::new(e)?
        }
        3 => quaternion_to_spin(rotation_to_quaternion(m))?,
        _ => return Err(CliffordError::NeedsGenerator(n)),
    };
    let lift = SpinElement::new(canonical_sign(lift.element()))?;
    let reproduced = lift.rotation_matrix()?;
    let residual = (reproduced - m).abs().max();
    if residual > 1e-9 {
        return Err(CliffordError::NotARotation(residual));
    }
    let neg = lift.neg();
    Ok((lift, neg))
}

/// Lift of exp(A) for antisymmetric A in any supported dimension:
/// exp(-(1/4) sum_{k,l} A_kl e_k e_l). For n in {2,3} this agrees with
/// `lift_rotation` up to sign.
pub fn lift_rotation_from_generator(a: &DMatrix<f64>) -> Result<SpinElement, CliffordError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "generator must be square");
    if n > MAX_DIM {
        return Err(CliffordError::DimensionTooLarge(n));
    }
    let antisym_residual = (a + a.transpose()).abs().max();
    if antisym_residual > 1e-10 {
        return Err(CliffordError::NotAntisymmetric(antisym_residual));
    }
    let mut bivector = CliffordElement::zero(n)?;
    for k in 0..n {
        for l in 0..n {
            if k == l {
                continue;
            }
            let (mask, sign) = blade_mul(1 << k, 1 << l);
            let current = bivector.coeff(mask);
            bivector.set_coeff(mask, current - 0.25 * sign * a[(k, l)]);
        }
    }
    SpinElement::new(bivector.exp()?)
}

/// Continuity lift of a sampled rotation path: each step takes the sign
/// closest to the previous lift. The first sample takes the canonical sign,
/// so a closed loop that generates pi_1(SO(n)) ends at minus the identity
/// lift.
pub fn lift_path(path: &[DMatrix<f64>]) -> Result<Vec<SpinElement>, CliffordError> {
    if path.is_empty() {
        return Err(CliffordError::EmptyPath);
    }
    let mut lifts: Vec<SpinElement> = Vec::with_capacity(path.len());
    for m in path {
        let (plus, minus) = lift_rotation(m)?;
        let chosen = match lifts.last() {
            None => plus,
            Some(prev) => {
                if plus.element().scalar_product(prev.element())? >= 0.0 {
                    plus
                } else {
                    minus
                }
            }
        };
        lifts.push(chosen);
    }
    Ok(lifts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn e(dim: usize, mask: u32) -> CliffordElement {
        CliffordElement::basis_blade(dim, mask).unwrap()
    }

    #[test]
    fn generator_sign_rules() {
        let e1 = e(2, 0b01);
        let e2 = e(2, 0b10);
        assert_eq!(e1.mul(&e1).unwrap().coeff(0), -1.0);
        assert_eq!(e1.mul(&e2).unwrap().coeff(0b11), 1.0);
        assert_eq!(e2.mul(&e1).unwrap().coeff(0b11), -1.0);
        let e12 = e(2, 0b11);
        assert_eq!(e12.mul(&e12).unwrap().coeff(0), -1.0);
    }

    #[test]
    fn blade_products_in_cl3() {
        // e1e2 * e2e3 = e1 (e2 e2) e3 = -e1e3.
        let a = e(3, 0b011);
        let b = e(3, 0b110);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.coeff(0b101), -1.0);
        assert_eq!(p.norm(), 1.0);
    }

    #[test]
    fn reversion_matches_factor_reversal() {
        // reverse(e1e2e3) = e3e2e1 = -e1e2e3.
        let w = e(3, 0b111);
        assert_eq!(w.reverse().coeff(0b111), -1.0);
    }

    #[test]
    fn adjoint_of_plane_rotor_flips_vector() {
        let g = SpinElement::new(e(2, 0b11)).unwrap();
        let image = g
            .adjoint_action(&CliffordElement::basis_vector(2, 1).unwrap())
            .unwrap();
        assert!((image.coeff(0b01) + 1.0).abs() < 1e-15);
        assert!(image.coeff(0b10).abs() < 1e-15);
    }

    #[test]
    fn half_angle_rotor_rotates_by_theta() {
        let theta = PI / 3.0;
        let mut g = CliffordElement::zero(2).unwrap();
        g.set_coeff(0b00, (theta / 2.0).cos());
        g.set_coeff(0b11, (theta / 2.0).sin());
        let g = SpinElement::new(g).unwrap();
        let m = g.rotation_matrix().unwrap();
        let expected = DMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
        );
        assert!((m - expected).abs().max() < 1e-12);
    }

    #[test]
    fn lift_reproduces_rotation_both_signs() {
        let theta = PI / 3.0;
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
        );
        let (plus, minus) = lift_rotation(&m).unwrap();
        assert!((plus.rotation_matrix().unwrap() - &m).abs().max() < 1e-12);
        assert!((minus.rotation_matrix().unwrap() - &m).abs().max() < 1e-12);
        assert!(
            plus.element()
                .add(minus.element())
                .unwrap()
                .norm()
                < 1e-15
        );
    }

    #[test]
    fn so3_lift_round_trips_on_axis_rotations() {
        for (axis, theta) in [(0usize, 0.7), (1, -1.3), (2, 2.2)] {
            let (c, s) = (f64::cos(theta), f64::sin(theta));
            let m = match axis {
                0 => DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c]),
                1 => DMatrix::from_row_slice(3, 3, &[c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c]),
                _ => DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]),
            };
            let (lift, _) = lift_rotation(&m).unwrap();
            assert!((lift.rotation_matrix().unwrap() - &m).abs().max() < 1e-12);
        }
    }

    #[test]
    fn full_turn_ends_at_minus_identity() {
        let steps = 64;
        let path: Vec<DMatrix<f64>> = (0..=steps)
            .map(|i| {
                let theta = 2.0 * PI * i as f64 / steps as f64;
                let (c, s) = (theta.cos(), theta.sin());
                DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
            })
            .collect();
        let lifts = lift_path(&path).unwrap();
        let first = lifts.first().unwrap().element();
        let last = lifts.last().unwrap().element();
        assert!(first.sub(&CliffordElement::one(3).unwrap()).unwrap().norm() < 1e-12);
        assert!(last.add(&CliffordElement::one(3).unwrap()).unwrap().norm() < 1e-12);
    }

    #[test]
    fn generator_lift_matches_direct_lift_in_dim_two() {
        let theta = 0.9;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
        let lift = lift_rotation_from_generator(&a).unwrap();
        let m = lift.rotation_matrix().unwrap();
        let expected = DMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
        );
        assert!((m - expected).abs().max() < 1e-12);
    }

    #[test]
    fn scalar_product_invariant_under_spin_left_multiplication() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                0.36, 0.48, -0.8, //
                -0.8, 0.6, 0.0, //
                0.48, 0.64, 0.6,
            ],
        );
        let (g, _) = lift_rotation(&m).unwrap();
        let a = CliffordElement::from_coeffs(3, (0..8).map(|i| 0.3 * i as f64 - 1.0).collect())
            .unwrap();
        let b = CliffordElement::from_coeffs(3, (0..8).map(|i| 0.7 - 0.2 * i as f64).collect())
            .unwrap();
        let ga = g.element().mul(&a).unwrap();
        let gb = g.element().mul(&b).unwrap();
        let lhs = ga.scalar_product(&gb).unwrap();
        let rhs = a.scalar_product(&b).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn non_unit_even_element_is_rejected() {
        let mut bad = CliffordElement::zero(4).unwrap();
        bad.set_coeff(0b0000, 1.0 / 2.0f64.sqrt());
        bad.set_coeff(0b1111, 1.0 / 2.0f64.sqrt());
        // Unit norm and even, but 1 + e1234 is a zero divisor.
        assert!(matches!(
            SpinElement::new(bad),
            Err(CliffordError::NotInvertible(_))
        ));
    }

    #[test]
    fn exp_of_plane_bivector_is_half_angle_rotor() {
        let theta = 1.1;
        let b = e(2, 0b11).scale(theta / 2.0);
        let g = b.exp().unwrap();
        assert!((g.coeff(0b00) - (theta / 2.0).cos()).abs() < 1e-14);
        assert!((g.coeff(0b11) - (theta / 2.0).sin()).abs() < 1e-14);
    }

    #[test]
    fn right_multiplication_commutes_with_left() {
        let a = e(3, 0b011).add(&e(3, 0b100).scale(0.5)).unwrap();
        let b = e(3, 0b101).add(&e(3, 0b010).scale(-2.0)).unwrap();
        let la = a.left_mul_matrix();
        let rb = b.right_mul_matrix();
        assert!(((&la * &rb) - (&rb * &la)).abs().max() < 1e-14);
        // Right multiplication matrix applied to c reproduces c * b.
        let c = e(3, 0b110).add(&e(3, 0b001).scale(3.0)).unwrap();
        let expect = c.mul(&b).unwrap();
        let got =
            rb * nalgebra::DVector::from_vec((0..8).map(|m| c.coeff(m as u32)).collect::<Vec<_>>());
        for m in 0..8u32 {
            assert!((got[m as usize] - expect.coeff(m)).abs() < 1e-14);
        }
    }
}
