#![allow(dead_code)]

use std::f64::consts::PI;

use logsp::{Field, GridSpec, Moments};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Composite Simpson rule with `panels` (even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `∫_{ℝ²} f(|x|) dx` for integrands negligible beyond `r_max`.
pub fn radial_integral<F: Fn(f64) -> f64>(f: F, r_max: f64) -> f64 {
    2.0 * PI * simpson(|r| f(r) * r, 0.0, r_max, 200_000)
}

/// Mean of `ln|z|` over the unit square centred at the origin, by polar
/// integration over one eighth of the square.
pub fn unit_square_log_mean() -> f64 {
    // ∫_0^R r ln r dr = R²/2 (ln R - 1/2) with R(θ) = 1/(2 cos θ)
    8.0 * simpson(
        |th| {
            let r = 0.5 / th.cos();
            0.5 * r * r * (r.ln() - 0.5)
        },
        0.0,
        PI / 4.0,
        20_000,
    )
}

/// Lattice log kernel: `ln|z|` off the origin, the cell mean at the origin.
pub struct LogLattice {
    h: f64,
    origin: f64,
}

impl LogLattice {
    pub fn new(h: f64) -> Self {
        Self {
            h,
            origin: h.ln() + unit_square_log_mean(),
        }
    }

    pub fn at(&self, di: i64, dj: i64) -> f64 {
        if di == 0 && dj == 0 {
            self.origin
        } else {
            (self.h * (di as f64).hypot(dj as f64)).ln()
        }
    }
}

/// `w = Σ_cells h² K(x - y) u(y)²`, written out as four nested loops.
pub fn direct_potential(u: &Field) -> Vec<f64> {
    let g = *u.grid();
    let n = g.n();
    let k = LogLattice::new(g.spacing());
    let table: Vec<f64> = (0..n * n).map(|t| k.at((t / n) as i64, (t % n) as i64)).collect();
    let rho: Vec<f64> = u.values().iter().map(|v| v * v).collect();
    let h2 = g.cell_area();
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                let trow = &table[i.abs_diff(a) * n..];
                for b in 0..n {
                    s += trow[j.abs_diff(b)] * rho[a * n + b];
                }
            }
            w[i * n + j] = h2 * s;
        }
    }
    w
}

/// A sum of three Gaussian bumps with random centres, widths and signed amplitudes.
pub fn random_field(grid: GridSpec, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = grid.half_width() / 3.0;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let cx = rng.gen_range(-reach..reach);
            let cy = rng.gen_range(-reach..reach);
            let w = rng.gen_range(0.6..1.5);
            let a = rng.gen_range(0.3..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (cx, cy, w, a)
        })
        .collect();
    Field::from_fn(grid, move |x, y| {
        bumps
            .iter()
            .map(|&(cx, cy, w, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (w * w)).exp())
            .sum()
    })
    .unwrap()
}

pub fn gaussian(grid: GridSpec, inv_two_sigma2: f64) -> Field {
    Field::from_fn(grid, |x, y| (-(x * x + y * y) * inv_two_sigma2).exp()).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Shift by whole cells; cells shifted in from outside are zero.
pub fn shift(u: &Field, di: i64, dj: i64) -> Field {
    let g = *u.grid();
    let n = g.n() as i64;
    let mut out = vec![0.0; u.values().len()];
    for i in 0..n {
        for j in 0..n {
            let (si, sj) = (i - di, j - dj);
            if (0..n).contains(&si) && (0..n).contains(&sj) {
                out[(i * n + j) as usize] = u.at(si as usize, sj as usize);
            }
        }
    }
    Field::from_values(g, out).unwrap()
}

/// Apply one of the eight symmetries of the index square.
pub fn square_symmetry(u: &Field, which: u8) -> Field {
    let g = *u.grid();
    let n = g.n();
    let m = n - 1;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = match which % 8 {
                0 => (i, j),
                1 => (j, m - i),
                2 => (m - i, m - j),
                3 => (m - j, i),
                4 => (m - i, j),
                5 => (i, m - j),
                6 => (j, i),
                _ => (m - j, m - i),
            };
            out[a * n + b] = u.at(i, j);
        }
    }
    Field::from_values(g, out).unwrap()
}

/// `J(u_t)` written out from the scaling laws of each moment.
pub fn j_of_scaled(m: &Moments, t: f64) -> f64 {
    let (a, b, c, d, p) = (m.a, m.b, m.c, m.d, m.p);
    let at = t.powi(4) * a;
    let bt = t * t * b;
    let ct = t.powi(4) * (c - b * b * t.ln());
    let dt = t.powf(2.0 * p - 2.0) * d;
    2.0 * at + bt + ct - bt * bt / 4.0 - 2.0 * (p - 1.0) / p * dt
}

/// Magnitude of the largest individual term of `J(u_t)`, for relative checks.
pub fn j_scale(m: &Moments, t: f64) -> f64 {
    let t4 = t.powi(4);
    [
        2.0 * t4 * m.a,
        t * t * m.b,
        t4 * m.c.abs(),
        t4 * m.b * m.b * t.ln().abs(),
        t4 * m.b * m.b / 4.0,
        2.0 * t.powf(2.0 * m.p - 2.0) * m.d,
    ]
    .into_iter()
    .fold(0.0, f64::max)
}
