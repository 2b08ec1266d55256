mod common;

use std::f64::consts::PI;

use common::{gaussian, j_of_scaled, j_scale, rel};
use logsp::energy::energy;
use logsp::fiber::{
    fiber_derivative, fiber_energy, fiber_j, fiber_scan, moments, project_to_manifold, rescale, Moments,
};
use logsp::{Field, GridSpec, Params};
use proptest::prelude::*;

/// Random moments. The fiber maximum sits near `log t ≈ (2a + c) / b²`, so
/// tiny mass against large `a` or `c` puts it beyond the range of `f64`.
/// Drawing `a` and `c` in units of `b²` (for a field `c / b²` is the log of a
/// typical pair distance) keeps it inside `[1e-3, 1e3]`.
fn arb_moments(ps: &'static [f64]) -> impl Strategy<Value = Moments> {
    (0.02f64..2.0, 1.0f64..6.0, -1.5f64..1.5, 0.05f64..10.0, 0..ps.len()).prop_map(
        move |(alpha, b, gamma, d, k)| Moments::new(alpha * b * b, b, gamma * b * b, d * b, ps[k]).unwrap(),
    )
}

const P_GE_3: &[f64] = &[3.0, 3.5, 4.0, 5.0];
const ANY_P: &[f64] = &[2.2, 2.5, 3.0, 3.5, 4.0, 6.0];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn t_times_derivative_is_j(m in arb_moments(ANY_P), lt in -3.0f64..3.0) {
        let t = lt.exp();
        let scale = j_scale(&m, t);
        let th = t * fiber_derivative(&m, t).unwrap();
        prop_assert!((th - j_of_scaled(&m, t)).abs() <= 1e-12 * scale);
        prop_assert!((fiber_j(&m, t).unwrap() - j_of_scaled(&m, t)).abs() <= 1e-12 * scale);
        let e = m.scaled(t).energy();
        prop_assert!((fiber_energy(&m, t).unwrap() - e).abs() <= 1e-12 * scale);
    }

    #[test]
    fn derivative_matches_central_differences(m in arb_moments(ANY_P), lt in -2.0f64..2.0) {
        let t = lt.exp();
        let dt = 1e-5 * t;
        let fd = (fiber_energy(&m, t + dt).unwrap() - fiber_energy(&m, t - dt).unwrap()) / (2.0 * dt);
        let exact = fiber_derivative(&m, t).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-8 * j_scale(&m, t) / t, "{} vs {}", fd, exact);
    }

    #[test]
    fn projection_is_the_unique_maximum(m in arb_moments(P_GE_3)) {
        let t = project_to_manifold(&m).unwrap();
        prop_assert!(fiber_derivative(&m, 0.5 * t).unwrap() > 0.0);
        prop_assert!(fiber_derivative(&m, 2.0 * t).unwrap() < 0.0);
        prop_assert!(fiber_j(&m, t).unwrap().abs() <= 1e-10 * j_scale(&m, t));
        let scan = fiber_scan(&m, 1e-3, 1e3, 2001).unwrap();
        prop_assert_eq!(scan.brackets.len(), 1);
        let (lo, hi) = scan.brackets[0];
        prop_assert!(lo <= t && t <= hi);
        let top = fiber_energy(&m, t).unwrap();
        prop_assert!(scan.rows.iter().all(|r| r.h <= top + 1e-12 * top.abs().max(1.0)));
    }

    #[test]
    fn projection_scales_with_the_fiber(m in arb_moments(P_GE_3), ls in -1.5f64..1.5) {
        let s = ls.exp();
        let t = project_to_manifold(&m).unwrap();
        let ts = project_to_manifold(&m.scaled(s)).unwrap();
        prop_assert!(rel(ts, t / s) <= 1e-10, "{} vs {}", ts, t / s);
    }

    #[test]
    fn projection_is_continuous(m in arb_moments(P_GE_3), signs in prop::array::uniform4(any::<bool>())) {
        let t = project_to_manifold(&m).unwrap();
        let bump = |x: f64, up: bool| x * (1.0 + if up { 1e-6 } else { -1e-6 });
        let q = Moments::new(bump(m.a, signs[0]), bump(m.b, signs[1]), bump(m.c, signs[2]), bump(m.d, signs[3]), m.p).unwrap();
        let tq = project_to_manifold(&q).unwrap();
        prop_assert!(rel(tq, t) <= 1e-4, "{} vs {}", tq, t);
    }
}

#[test]
fn unrepresentable_maximum_is_an_error() {
    let m = Moments::new(6.8, 0.05, 0.0, 0.05, 3.0).unwrap();
    assert!(matches!(project_to_manifold(&m), Err(logsp::Error::NoBracket)));
}

#[test]
fn pure_power_fiber_has_no_bracket() {
    let m = Moments::new(0.0, 0.0, 0.0, 2.0, 3.0).unwrap();
    let scan = fiber_scan(&m, 1e-3, 1e3, 501).unwrap();
    assert!(scan.brackets.is_empty());
    assert!(scan.rows.windows(2).all(|w| w[1].h < w[0].h));
    assert!(scan.rows.iter().all(|r| r.hprime < 0.0));
}

#[test]
fn fiber_eventually_negative() {
    let m = Moments::new(1.0, 2.0, -0.5, 1.0, 3.0).unwrap();
    let scan = fiber_scan(&m, 1e-3, 1e3, 2001).unwrap();
    let t = scan.first_negative.expect("h must become negative");
    assert!(fiber_energy(&m, t).unwrap() < 0.0);
    assert!(scan.rows.last().unwrap().h < 0.0);
}

#[test]
fn gaussian_moments() {
    let g = GridSpec::new(12.0, 256).unwrap();
    let h = g.spacing();
    let params = Params::new(3.0, g).unwrap();
    let u = gaussian(g, 0.5);
    let m = moments(&u, &params).unwrap();
    let b = energy(&u, &params).unwrap();
    assert!(rel(m.a, PI * (1.0 - h * h / 8.0 + h.powi(4) / 96.0)) < 2.0 * h.powi(6));
    assert!((m.b - PI).abs() < 1e-10);
    assert!((m.d - 2.0 * PI / 3.0).abs() < 1e-10);
    assert_eq!(m.c, b.v0);
    assert!(rel(m.energy(), b.i) < 1e-14);
    assert!(moments(&Field::zeros(g), &params).map(|m| m.b == 0.0).unwrap_or(true));
}

/// The closed-form fiber of the sampled Gaussian against the energy of the
/// sampled analytic rescaled Gaussian `t² e^{-t²|x|²/2}`. The two differ by
/// the `O(h²)` kinetic discretisation error at widths `1` and `1/t`.
#[test]
fn fiber_energy_matches_resampled_gaussian() {
    for (n, tol) in [(256, 2e-3), (512, 5e-4)] {
        let g = GridSpec::new(12.0, n).unwrap();
        let params = Params::new(3.0, g).unwrap();
        let m = moments(&gaussian(g, 0.5), &params).unwrap();
        for t in [0.5, 1.5] {
            let sampled = gaussian(g, 0.5 * t * t).scaled(t * t);
            let direct = energy(&sampled, &params).unwrap().i;
            let closed = fiber_energy(&m, t).unwrap();
            assert!(rel(closed, direct) < tol, "N={n}, t={t}: {closed} vs {direct}");
        }
    }
}

fn sup_dev(a: &Field, b: &Field) -> f64 {
    a.sub(b).unwrap().max_abs()
}

/// Bilinear interpolation errs by at most `h²/8 (max|∂₁²v| + max|∂₂²v|)`;
/// resampling `v` onto `t² v(t·)` multiplies that by `t²`.
fn bilinear_bound(h: f64, t: f64, curvature: f64) -> f64 {
    t * t * h * h / 4.0 * curvature
}

#[test]
fn rescale_matches_analytic_gaussian() {
    let fine = GridSpec::new(6.0, 512).unwrap();
    let u = gaussian(fine, 0.5);
    let exact = Field::from_fn(fine, |x, y| 4.0 * (-2.0 * (x * x + y * y)).exp()).unwrap();
    let got = rescale(&u, 2.0).unwrap();
    assert!(sup_dev(&got, &exact) <= 1e-3, "{}", sup_dev(&got, &exact));

    let coarse = GridSpec::new(12.0, 256).unwrap();
    let h = coarse.spacing();
    let u = gaussian(coarse, 0.5);
    let exact = Field::from_fn(coarse, |x, y| 4.0 * (-2.0 * (x * x + y * y)).exp()).unwrap();
    let dev = sup_dev(&rescale(&u, 2.0).unwrap(), &exact);
    let bound = bilinear_bound(h, 2.0, 1.0);
    assert!(dev <= bound && dev >= 0.9 * bound, "{dev} vs {bound}");
}

#[test]
fn rescale_composes() {
    let g = GridSpec::new(6.0, 256).unwrap();
    let h = g.spacing();
    let u = gaussian(g, 0.5);
    let analytic = |t: f64| Field::from_fn(g, move |x, y| t * t * (-0.5 * t * t * (x * x + y * y)).exp()).unwrap();
    for (s, t) in [(1.3, 0.9), (0.8, 1.6), (1.25, 1.25)] {
        let once = rescale(&u, s * t).unwrap();
        let twice = rescale(&rescale(&u, s).unwrap(), t).unwrap();
        // e^{-|x|²/2} has curvature ≤ 1, its rescale by s has curvature ≤ s⁴
        let tol = bilinear_bound(h, s, 1.0)
            .max(bilinear_bound(h, t, s.powi(4)))
            .max(bilinear_bound(h, s * t, 1.0));
        assert!(sup_dev(&once, &analytic(s * t)) <= tol);
        let dev = sup_dev(&once, &twice);
        assert!(dev <= 2.0 * tol, "s={s} t={t}: {dev} vs {tol}");
    }
    assert_eq!(rescale(&u, 1.0).unwrap(), u);
}
