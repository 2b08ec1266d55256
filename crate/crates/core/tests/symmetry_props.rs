mod common;

use common::{random_field, rel};
use logsp::energy::{energy, euler_gradient};
use logsp::symmetry::{
    average_over, invariance_residual, sign_change_certificate, symmetrize, GroupElement, SymmetryGroup,
};
use logsp::{Field, GridSpec, Params};
use proptest::prelude::*;

fn sup_rel(a: &Field, b: &Field) -> f64 {
    a.sub(b).unwrap().max_abs() / b.max_abs()
}

fn harmonic(g: GridSpec) -> Field {
    Field::from_fn(g, |x, y| (x.powi(3) - 3.0 * x * y * y) * (-(x * x + y * y)).exp()).unwrap()
}

/// `r³ cos 3θ e^{-r²}` changes sign under the rotation by π/3, so it is fixed
/// by `Dihedral(3)` with its alternating character.
#[test]
fn angular_harmonic_is_dihedral_fixed_point() {
    let g = GridSpec::new(4.0, 256).unwrap();
    let u = harmonic(g);
    let s = symmetrize(&u, SymmetryGroup::Dihedral(3));
    assert!(sup_rel(&s, &u) <= 1e-3, "{}", sup_rel(&s, &u));
    assert!(invariance_residual(&u, SymmetryGroup::Dihedral(3)) <= 2e-3);
    // the same harmonic is not fixed by the finer group
    assert!(invariance_residual(&u, SymmetryGroup::Dihedral(9)) > 0.5);
}

#[test]
fn energy_invariant_under_lattice_maps() {
    let g = GridSpec::new(6.0, 48).unwrap();
    let params = Params::new(3.0, g).unwrap();
    let u = random_field(g, 21);
    let base = energy(&u, &params).unwrap();
    let mut maps = SymmetryGroup::Radial.elements();
    maps.extend(SymmetryGroup::OddEven.elements());
    maps.extend(SymmetryGroup::Dihedral(2).elements());
    for e in maps.iter().filter(|e| e.is_lattice_exact()) {
        let b = energy(&e.apply(&u), &params).unwrap();
        assert!(rel(b.i, base.i) < 1e-12);
        assert!(rel(b.j, base.j) < 1e-12);
    }
    assert_eq!(maps.iter().filter(|e| e.is_lattice_exact()).count(), maps.len());
}

/// Bilinear resampling smooths the field, so the kinetic energy drops by
/// `O(h²)` (about `0.5 h²` relative here).
#[test]
fn energy_nearly_invariant_under_interpolated_rotations() {
    let g = GridSpec::new(5.0, 256).unwrap();
    let params = Params::new(3.0, g).unwrap();
    let u = Field::from_fn(g, |x, y| (-(x - 0.8).powi(2) - 1.5 * (y + 0.4).powi(2)).exp() * (1.0 + 0.5 * x)).unwrap();
    let base = energy(&u, &params).unwrap().i;
    for e in SymmetryGroup::Dihedral(3).elements() {
        let moved = energy(&e.apply(&u), &params).unwrap().i;
        assert!(rel(moved, base) < 1e-3, "{moved} vs {base}");
    }
}

#[test]
fn reflection_projector_is_exactly_idempotent() {
    let g = GridSpec::new(5.0, 40).unwrap();
    let u = random_field(g, 8);
    let once = symmetrize(&u, SymmetryGroup::OddEven);
    assert_eq!(symmetrize(&once, SymmetryGroup::OddEven), once);
    assert_eq!(invariance_residual(&once, SymmetryGroup::OddEven), 0.0);
    let one = Field::constant(g, 1.0).unwrap();
    assert!(symmetrize(&one, SymmetryGroup::OddEven).is_zero());
}

#[test]
fn rotation_projector_is_idempotent_to_interpolation_accuracy() {
    let g = GridSpec::new(5.0, 128).unwrap();
    let u = Field::from_fn(g, |x, y| (-(x - 1.2).powi(2) - (y - 0.3).powi(2)).exp()).unwrap();
    let once = symmetrize(&u, SymmetryGroup::Dihedral(3));
    let twice = symmetrize(&once, SymmetryGroup::Dihedral(3));
    assert!(sup_rel(&twice, &once) < 5e-3, "{}", sup_rel(&twice, &once));
    assert!(invariance_residual(&once, SymmetryGroup::Dihedral(3)) < 5e-3);
}

#[test]
fn nested_dihedral_fixed_spaces() {
    let g = GridSpec::new(4.0, 192).unwrap();
    let u = Field::from_fn(g, |x, y| (-(x - 1.5).powi(2) / 0.25 - y * y / 0.25).exp()).unwrap();
    let fine = symmetrize(&u, SymmetryGroup::Dihedral(9));
    let floor = invariance_residual(&fine, SymmetryGroup::Dihedral(9));
    assert!(invariance_residual(&fine, SymmetryGroup::Dihedral(3)) <= 2.0 * floor.max(1e-3));
    let coarse = symmetrize(&u, SymmetryGroup::Dihedral(3));
    assert!(invariance_residual(&coarse, SymmetryGroup::Dihedral(9)) > 0.5);
}

/// The Euler gradient of a symmetric field is symmetric, so a descent step
/// leaves the fixed space up to interpolation error.
#[test]
fn descent_step_preserves_fixed_space() {
    let g = GridSpec::new(4.0, 256).unwrap();
    let params = Params::new(3.0, g).unwrap();
    let group = SymmetryGroup::Dihedral(3);
    let u = harmonic(g).scaled(4.0);
    let floor = invariance_residual(&u, group);
    let step = u.lin_comb(1.0, &euler_gradient(&u, &params).unwrap(), -0.05).unwrap();
    let projected = symmetrize(&step, group);
    let moved = projected.sub(&step).unwrap().l2_norm() / step.l2_norm();
    assert!(moved <= 2.0 * floor.max(1e-3), "{moved} vs floor {floor}");
}

#[test]
fn radial_average_is_radial() {
    let g = GridSpec::new(6.0, 96).unwrap();
    let u = Field::from_fn(g, |x, y| (-(x - 1.0).powi(2) - (y + 0.5).powi(2)).exp()).unwrap();
    assert!(invariance_residual(&u, SymmetryGroup::Radial) > 0.3);
    let r = symmetrize(&u, SymmetryGroup::Radial);
    assert!(invariance_residual(&r, SymmetryGroup::Radial) < 1e-12);
    let rot = GroupElement::rotation(0.3, 1.0).apply(&r);
    assert!(sup_rel(&rot, &r) < 1e-2);
}

#[test]
fn symmetric_fields_change_sign() {
    let g = GridSpec::new(5.0, 64).unwrap();
    let u = symmetrize(&random_field(g, 4), SymmetryGroup::OddEven);
    let cert = sign_change_certificate(&u, SymmetryGroup::OddEven).unwrap();
    assert!(cert.both_signs);
    assert_eq!(cert.vanishing_fraction, 1.0);
    assert!((cert.vanishing_measure - 10.0).abs() < 1e-12);

    let d = symmetrize(&random_field(g, 5), SymmetryGroup::Dihedral(3));
    let cert = sign_change_certificate(&d, SymmetryGroup::Dihedral(3)).unwrap();
    assert!(cert.both_signs);
    assert!(cert.max_on_fixed_set < 1e-12);
}

#[test]
fn orbit_average_over_identity_is_identity() {
    let g = GridSpec::new(3.0, 24).unwrap();
    let u = random_field(g, 2);
    assert_eq!(average_over(&u, &[GroupElement::IDENTITY]), u);
}

fn arb_field() -> impl Strategy<Value = Field> {
    any::<u64>().prop_map(|seed| random_field(GridSpec::new(5.0, 32).unwrap(), seed))
}

fn arb_group() -> impl Strategy<Value = SymmetryGroup> {
    prop_oneof![
        Just(SymmetryGroup::OddEven),
        Just(SymmetryGroup::Radial),
        (1u32..7).prop_map(SymmetryGroup::Dihedral),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projector_is_linear(u in arb_field(), v in arb_field(), a in -2.0f64..2.0, b in -2.0f64..2.0, g in arb_group()) {
        let lhs = symmetrize(&u.lin_comb(a, &v, b).unwrap(), g);
        let rhs = symmetrize(&u, g).lin_comb(a, &symmetrize(&v, g), b).unwrap();
        let scale = u.max_abs() * a.abs() + v.max_abs() * b.abs();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn characters_multiply(g in arb_group()) {
        let els = g.elements();
        for x in &els {
            for y in &els {
                let xy = x.compose(y);
                prop_assert_eq!(xy.tau, x.tau * y.tau);
                prop_assert!(els.iter().any(|z| z.same_map(&xy) && z.tau == xy.tau));
            }
        }
    }
}
