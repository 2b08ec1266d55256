//! The scaling fibration `u_t(x) = t² u(t x)` and projection onto the
//! Nehari–Pohozaev set `M = {J = 0}`.
//!
//! Along a fiber every energy term scales in closed form, so the whole fiber
//! energy `h(t) = I(u_t)` is determined by four integrals of `u`:
//!
//! ```text
//! h(t) = (t⁴/2) a + (t²/2) b + (t⁴/4) c - (t⁴ log t / 4) b² - (t^{2p-2}/p) d
//! ```
//!
//! with `a = ∫|∇u|²`, `b = ∫u²`, `c = V₀(u)`, `d = ∫|u|^p`, and
//! `t h'(t) = J(u_t)`. For `p ≥ 3`, `b > 0`, `d > 0` the derivative `h'` has
//! exactly one positive zero `t_u`, which is the global maximum of `h`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::energy::{Functional, Params};
use crate::error::{Error, Result};
use crate::grid::{sample_bilinear, Field};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// `∫|∇u|²`
    pub a: f64,
    /// `∫u²`
    pub b: f64,
    /// `V₀(u)`
    pub c: f64,
    /// `∫|u|^p`
    pub d: f64,
    pub p: f64,
}

impl Moments {
    pub fn new(a: f64, b: f64, c: f64, d: f64, p: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && d >= 0.0 && c.is_finite() && a.is_finite() && b.is_finite() && d.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "moments must be finite with a, b, d >= 0 (got a={a}, b={b}, c={c}, d={d})"
            )));
        }
        if !(p > 2.0 && p.is_finite()) {
            return Err(Error::InvalidExponent(p));
        }
        Ok(Self { a, b, c, d, p })
    }

    /// Moments of the rescaled field `u_s`, exactly.
    pub fn scaled(&self, s: f64) -> Moments {
        let s2 = s * s;
        let s4 = s2 * s2;
        Moments {
            a: s4 * self.a,
            b: s2 * self.b,
            c: s4 * (self.c - self.b * self.b * s.ln()),
            d: s.powf(2.0 * self.p - 2.0) * self.d,
            p: self.p,
        }
    }

    /// `I(u)` assembled from the moments.
    pub fn energy(&self) -> f64 {
        0.5 * self.a + 0.5 * self.b + 0.25 * self.c - self.d / self.p
    }

    fn is_degenerate(&self) -> bool {
        self.b <= 0.0 || self.d <= 0.0
    }
}

pub fn moments(u: &Field, params: &Params) -> Result<Moments> {
    let s = Functional::new(*params).state(u.clone())?;
    Ok(Moments {
        a: s.kinetic,
        b: s.mass,
        c: s.v0,
        d: s.lp,
        p: params.p(),
    })
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("fiber parameter must be positive, got {t}")))
    }
}

/// `h(t) = I(u_t)`.
pub fn fiber_energy(m: &Moments, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(h(m, t))
}

/// `h'(t)`.
pub fn fiber_derivative(m: &Moments, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(hprime(m, t))
}

/// `J(u_t)` in closed form; equals `t h'(t)`.
pub fn fiber_j(m: &Moments, t: f64) -> Result<f64> {
    check_t(t)?;
    let t2 = t * t;
    let t4 = t2 * t2;
    let b2 = m.b * m.b;
    Ok(2.0 * m.a * t4 + m.b * t2 + m.c * t4 - b2 * t4 * t.ln() - 0.25 * b2 * t4
        - 2.0 * (m.p - 1.0) / m.p * m.d * t.powf(2.0 * m.p - 2.0))
}

fn h(m: &Moments, t: f64) -> f64 {
    let t2 = t * t;
    let t4 = t2 * t2;
    0.5 * t4 * m.a + 0.5 * t2 * m.b + 0.25 * t4 * m.c - 0.25 * t4 * t.ln() * m.b * m.b
        - t.powf(2.0 * m.p - 2.0) / m.p * m.d
}

fn hprime_terms(m: &Moments, t: f64) -> [f64; 6] {
    let t3 = t * t * t;
    let b2 = m.b * m.b;
    [
        2.0 * m.a * t3,
        m.b * t,
        m.c * t3,
        -b2 * t3 * t.ln(),
        -0.25 * b2 * t3,
        -(2.0 * m.p - 2.0) / m.p * m.d * t.powf(2.0 * m.p - 3.0),
    ]
}

fn hprime(m: &Moments, t: f64) -> f64 {
    hprime_terms(m, t).iter().sum()
}

fn hsecond(m: &Moments, t: f64) -> f64 {
    let t2 = t * t;
    let b2 = m.b * m.b;
    6.0 * m.a * t2 + m.b + 3.0 * m.c * t2 - b2 * (3.0 * t2 * t.ln() + t2) - 0.75 * b2 * t2
        - (2.0 * m.p - 2.0) * (2.0 * m.p - 3.0) / m.p * m.d * t.powf(2.0 * m.p - 4.0)
}

/// Root of `h'` in `[lo, hi]` given `h'(lo) > 0 > h'(hi)`: 80 bisection
/// steps followed by a guarded Newton polish.
fn refine_root(m: &Moments, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hprime(m, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..4 {
        let d2 = hsecond(m, t);
        if d2 == 0.0 {
            break;
        }
        let next = t - hprime(m, t) / d2;
        if !(next >= lo && next <= hi) || hprime(m, next).abs() >= hprime(m, t).abs() {
            break;
        }
        t = next;
    }
    t
}

/// The unique `t_u > 0` with `u_{t_u} ∈ M`, for `p ≥ 3`.
pub fn project_to_manifold(m: &Moments) -> Result<f64> {
    if m.p < 3.0 {
        return Err(Error::ExponentBelowThree(m.p));
    }
    if m.is_degenerate() {
        return Err(Error::ZeroField);
    }
    // the fiber terms overflow long before t reaches the end of f64
    let positive = |t: f64| {
        let d = hprime(m, t);
        if d.is_finite() {
            Ok(d > 0.0)
        } else {
            Err(Error::NoBracket)
        }
    };
    let (mut lo, mut hi) = (1.0, 1.0);
    if positive(1.0)? {
        while positive(hi)? {
            lo = hi;
            hi *= 2.0;
        }
    } else {
        while !positive(lo)? {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-150 {
                return Err(Error::NoBracket);
            }
        }
    }
    Ok(refine_root(m, lo, hi))
}

/// `|h'(t)|` relative to the largest of its individual terms.
pub fn relative_derivative(m: &Moments, t: f64) -> f64 {
    let terms = hprime_terms(m, t);
    let scale = terms.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    if scale == 0.0 {
        0.0
    } else {
        terms.iter().sum::<f64>().abs() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberRow {
    pub t: f64,
    pub h: f64,
    pub hprime: f64,
    #[serde(rename = "J")]
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberScan {
    pub rows: Vec<FiberRow>,
    /// Consecutive sample pairs `(t_k, t_{k+1})` across which `h'` changes sign.
    pub brackets: Vec<(f64, f64)>,
    /// First sampled `t` with `h(t) < 0`, if any.
    pub first_negative: Option<f64>,
}

impl FiberScan {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,h,hprime,J\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:e},{:e},{:e},{:e}", r.t, r.h, r.hprime, r.j);
        }
        s
    }
}

/// Sample the fiber on a geometric grid of `samples` points in `[t_min, t_max]`.
pub fn fiber_scan(m: &Moments, t_min: f64, t_max: f64, samples: usize) -> Result<FiberScan> {
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) || samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "bad scan range [{t_min}, {t_max}] with {samples} samples"
        )));
    }
    let ratio = (t_max / t_min).ln() / (samples - 1) as f64;
    let rows: Vec<FiberRow> = par::map_range(samples, |k| {
        let t = if k == samples - 1 {
            t_max
        } else {
            t_min * (ratio * k as f64).exp()
        };
        FiberRow {
            t,
            h: h(m, t),
            hprime: hprime(m, t),
            j: fiber_j(m, t).unwrap_or(f64::NAN),
        }
    });
    let brackets = rows
        .windows(2)
        .filter(|w| sign_changes(w[0].hprime, w[1].hprime))
        .map(|w| (w[0].t, w[1].t))
        .collect();
    let first_negative = rows.iter().find(|r| r.h < 0.0).map(|r| r.t);
    Ok(FiberScan {
        rows,
        brackets,
        first_negative,
    })
}

fn sign_changes(a: f64, b: f64) -> bool {
    (a > 0.0 && b <= 0.0) || (a < 0.0 && b >= 0.0)
}

/// Zeros of `h'` where it turns from positive to negative inside the scanned
/// brackets (local maxima of the fiber energy), refined to full precision.
pub fn fiber_local_maxima(m: &Moments, t_min: f64, t_max: f64, samples: usize) -> Result<Vec<f64>> {
    let scan = fiber_scan(m, t_min, t_max, samples)?;
    Ok(scan
        .rows
        .windows(2)
        .filter(|w| w[0].hprime > 0.0 && w[1].hprime <= 0.0)
        .map(|w| refine_root(m, w[0].t, w[1].t))
        .collect())
}

/// Global maximiser of `h` over `t > 0`. Closed-form root for `p ≥ 3`; for
/// `2 < p < 3` the best local maximum of a dense scan over `[1e-3, 1e3]`.
pub fn fiber_maximizer(m: &Moments) -> Result<f64> {
    if m.is_degenerate() {
        return Err(Error::ZeroField);
    }
    if m.p >= 3.0 {
        return project_to_manifold(m);
    }
    fiber_local_maxima(m, 1e-3, 1e3, 4001)?
        .into_iter()
        .map(|t| (t, h(m, t)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(t, _)| t)
        .ok_or(Error::NoBracket)
}

/// The local maximum of `h` inside `[1/window, window]` nearest to `t = 1`
/// (in `log t`), if there is one.
pub fn local_fiber_root(m: &Moments, window: f64) -> Option<f64> {
    if m.is_degenerate() || !(window > 1.0) {
        return None;
    }
    fiber_local_maxima(m, 1.0 / window, window, 129)
        .ok()?
        .into_iter()
        .min_by(|a, b| a.ln().abs().total_cmp(&b.ln().abs()))
}

/// `u_t(x) = t² u(t x)` by bilinear interpolation, zero outside the domain.
pub fn rescale(u: &Field, t: f64) -> Result<Field> {
    check_t(t)?;
    if t == 1.0 {
        return Ok(u.clone());
    }
    let grid = *u.grid();
    let n = grid.n();
    let half = n as f64 / 2.0;
    let t2 = t * t;
    let mut out = vec![0.0; grid.len()];
    par::for_each_row_mut(&mut out, n, |i, row| {
        let si = t * (i as f64 + 0.5 - half) + half - 0.5;
        for (j, o) in row.iter_mut().enumerate() {
            let sj = t * (j as f64 + 0.5 - half) + half - 0.5;
            *o = t2 * sample_bilinear(u, si, sj);
        }
    });
    Ok(Field::from_raw(grid, out))
}
