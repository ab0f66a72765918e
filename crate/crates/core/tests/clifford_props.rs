mod common;

use common::blade_mul_oracle;
use gerbelab::clifford::{blade_mul, lift_path, lift_rotation, CliffordElement, SpinElement};
use nalgebra::DMatrix;
use proptest::prelude::*;

#[test]
fn blade_product_matches_symbol_oracle_up_to_dim_five() {
    for dim in 0..=5u32 {
        let size = 1u32 << dim;
        for a in 0..size {
            for b in 0..size {
                let fast = blade_mul(a, b);
                let slow = blade_mul_oracle(a, b);
                assert_eq!(fast, slow, "blade product mismatch at a={a:b}, b={b:b}");
            }
        }
    }
}

fn element(dim: usize) -> impl Strategy<Value = CliffordElement> {
    prop::collection::vec(-2.0f64..2.0, 1 << dim)
        .prop_map(move |coeffs| CliffordElement::from_coeffs(dim, coeffs).unwrap())
}

fn rotation3() -> impl Strategy<Value = DMatrix<f64>> {
    (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b, c)| {
        let gen = DMatrix::from_row_slice(3, 3, &[0.0, -a, -b, a, 0.0, -c, b, c, 0.0]);
        gen.exp()
    })
}

proptest! {
    #[test]
    fn product_is_associative(a in element(4), b in element(4), c in element(4)) {
        let lhs = a.mul(&b).unwrap().mul(&c).unwrap();
        let rhs = a.mul(&b.mul(&c).unwrap()).unwrap();
        let scale = a.norm() * b.norm() * c.norm();
        prop_assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn product_distributes_over_sum(a in element(3), b in element(3), c in element(3)) {
        let lhs = a.mul(&b.add(&c).unwrap()).unwrap();
        let rhs = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
        let scale = a.norm() * (b.norm() + c.norm());
        prop_assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn reversion_is_an_antiautomorphism(a in element(4), b in element(4)) {
        let lhs = a.mul(&b).unwrap().reverse();
        let rhs = b.reverse().mul(&a.reverse()).unwrap();
        let scale = a.norm() * b.norm();
        prop_assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn grade_involution_is_an_automorphism(a in element(4), b in element(4)) {
        let lhs = a.mul(&b).unwrap().grade_involution();
        let rhs = a.grade_involution().mul(&b.grade_involution()).unwrap();
        let scale = a.norm() * b.norm();
        prop_assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn scalar_product_is_scalar_part_of_conjugate_product(a in element(3), b in element(3)) {
        // The blade basis is orthonormal for <conj(a) b>_0; bare reversion
        // would give (-1)^grade on each blade under e_k^2 = -1.
        let direct = a.scalar_product(&b).unwrap();
        let via_product = a.conjugation().mul(&b).unwrap().scalar_part();
        let scale = a.norm() * b.norm();
        prop_assert!((direct - via_product).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn lifted_rotations_preserve_scalar_product(m in rotation3(), a in element(3), b in element(3)) {
        let (g, _) = lift_rotation(&m).unwrap();
        let ga = g.element().mul(&a).unwrap();
        let gb = g.element().mul(&b).unwrap();
        let scale = (a.norm() * b.norm()).max(1.0);
        prop_assert!((ga.scalar_product(&gb).unwrap() - a.scalar_product(&b).unwrap()).abs() <= 1e-10 * scale);
    }

    #[test]
    fn adjoint_action_reproduces_the_rotation(m in rotation3(), v in prop::collection::vec(-2.0f64..2.0, 3)) {
        let (g, _) = lift_rotation(&m).unwrap();
        let image = g.adjoint_action(&CliffordElement::vector(&v).unwrap()).unwrap();
        let coords = image.to_vector().unwrap();
        let expected = &m * DMatrix::from_column_slice(3, 1, &v);
        for k in 0..3 {
            prop_assert!((coords[k] - expected[(k, 0)]).abs() < 1e-9);
        }
    }

    #[test]
    fn spin_products_stay_unit_norm(m1 in rotation3(), m2 in rotation3()) {
        let (g1, _) = lift_rotation(&m1).unwrap();
        let (g2, _) = lift_rotation(&m2).unwrap();
        let product = g1.mul(&g2).unwrap();
        prop_assert!((product.element().norm() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn path_lifts_are_continuous_and_sign_coherent() {
    // Half turn about z then half turn about the rotated x axis: stays
    // continuous, never jumps by more than the step size.
    let steps = 200;
    let path: Vec<DMatrix<f64>> = (0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            let theta = std::f64::consts::PI * t;
            let gen = DMatrix::from_row_slice(
                3,
                3,
                &[0.0, -theta, 0.0, theta, 0.0, -0.4 * theta, 0.0, 0.4 * theta, 0.0],
            );
            gen.exp()
        })
        .collect();
    let lifts = lift_path(&path).unwrap();
    for pair in lifts.windows(2) {
        let jump = pair[1].element().sub(pair[0].element()).unwrap().norm();
        assert!(jump < 0.2, "sign flip or discontinuity in path lift: {jump}");
    }
}

#[test]
fn spin_rejects_odd_and_non_unit_input() {
    let v = CliffordElement::basis_vector(3, 1).unwrap();
    assert!(SpinElement::new(v).is_err());
    let half = CliffordElement::scalar(3, 0.5).unwrap();
    assert!(SpinElement::new(half).is_err());
}
