//! Truncated square domain, sampled fields, rectangle-rule quadrature and the
//! 5-point finite-difference operators.
//!
//! The domain is `[-L, L]^2` split into `N x N` square cells of side
//! `h = 2L / N`; values live at cell centres. Outside the domain the field is
//! taken to be zero one cell beyond the boundary (homogeneous Dirichlet ghost
//! cells), which is the convention shared by [`kinetic_energy`] and
//! [`laplacian`] so that summation by parts holds exactly.
//!
//! Storage is row-major: node `(i, j)` sits at `values[i * N + j]` with
//! coordinates `(x1, x2) = (-L + (i + 1/2) h, -L + (j + 1/2) h)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    half_width: f64,
    n: usize,
    spacing: f64,
}

impl GridSpec {
    /// `n` must be even and at least 2; `half_width` finite and positive.
    ///
    /// The stored half-width is rounded so that `spacing * n == 2 * half_width`
    /// holds exactly in floating point.
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width must be finite and positive, got {half_width}"
            )));
        }
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per side must be even and >= 2, got {n}"
            )));
        }
        if n > u32::MAX as usize {
            return Err(Error::InvalidGrid(format!("points per side {n} too large")));
        }
        let spacing = 2.0 * half_width / n as f64;
        let half_width = spacing * n as f64 / 2.0;
        Ok(Self {
            half_width,
            n,
            spacing,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    /// Cell-centre coordinate of index `i` along either axis. Exactly odd
    /// under `i ↦ n - 1 - i`.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 + 0.5 - (self.n / 2) as f64) * self.spacing
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.coord(i), self.coord(j))
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }
}

/// A real function sampled at the cell centres of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Result<Self> {
        Self::from_values(grid, vec![c; grid.len()])
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, values })
    }

    /// Sample `f(x1, x2)` at every node. Non-finite samples are an error.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Sync + Send,
    {
        let n = grid.n();
        let mut values = vec![0.0; grid.len()];
        par::for_each_row_mut(&mut values, n, |i, row| {
            let x1 = grid.coord(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(x1, grid.coord(j));
            }
        });
        Self::from_values(grid, values)
    }

    /// Internal constructor for values produced by finite arithmetic on finite inputs.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Field> {
        Field::from_values(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn abs(&self) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|v| v.abs()).collect())
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|v| a * v).collect())
    }

    /// `a * self + b * other`
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.ensure_same_grid(other)?;
        Ok(Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        ))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.lin_comb(1.0, other, -1.0)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.ensure_same_grid(other)?;
        Ok(Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x * y)
                .collect(),
        ))
    }

    /// Discrete L² inner product `h² Σ f g`.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(dot_unchecked(self, other))
    }

    /// Discrete L² norm.
    pub fn l2_norm(&self) -> f64 {
        dot_unchecked(self, self).sqrt()
    }
}

pub(crate) fn dot_unchecked(f: &Field, g: &Field) -> f64 {
    let n = f.grid.n();
    let (a, b) = (&f.values, &g.values);
    f.grid.cell_area()
        * par::sum_rows(n, |i| {
            let r = i * n..(i + 1) * n;
            a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x * y).sum()
        })
}

/// Rectangle-rule integral `h² Σ f(x_ij)`.
pub fn integrate(f: &Field) -> f64 {
    let n = f.grid.n();
    let v = &f.values;
    f.grid.cell_area() * par::sum_rows(n, |i| v[i * n..(i + 1) * n].iter().sum())
}

/// `|u|_p^p = ∫ |u|^p` (not its p-th root). Requires `p > 2`.
pub fn lp_norm_p(u: &Field, p: f64) -> Result<f64> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    Ok(lp_unchecked(u, p))
}

pub(crate) fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 3.0 {
        a * a * a
    } else if p == 4.0 {
        let s = a * a;
        s * s
    } else {
        a.powf(p)
    }
}

pub(crate) fn lp_unchecked(u: &Field, p: f64) -> f64 {
    let n = u.grid.n();
    let v = &u.values;
    u.grid.cell_area()
        * par::sum_rows(n, |i| v[i * n..(i + 1) * n].iter().map(|&x| abs_pow(x, p)).sum())
}

/// Sum over all cell edges of `(u_a - u_b)(v_a - v_b)`, with zero ghost cells
/// outside the domain. This is the discrete `∫ ∇u · ∇v` (the `h²` quadrature
/// weight cancels the `1/h²` of the difference quotients).
pub fn gradient_inner(u: &Field, v: &Field) -> Result<f64> {
    u.ensure_same_grid(v)?;
    Ok(edge_sum(u, v))
}

fn edge_sum(u: &Field, v: &Field) -> f64 {
    let n = u.grid.n();
    let (a, b) = (&u.values, &v.values);
    par::sum_rows(n, |i| {
        let row = |k: usize| k * n..(k + 1) * n;
        let (ua, va) = (&a[row(i)], &b[row(i)]);
        let mut s = 0.0;
        // edges along the row, including the two exterior ones
        s += ua[0] * va[0];
        for j in 1..n {
            s += (ua[j] - ua[j - 1]) * (va[j] - va[j - 1]);
        }
        s += ua[n - 1] * va[n - 1];
        // edges to the previous row (or the ghost row below the first)
        if i == 0 {
            s += ua.iter().zip(va).map(|(x, y)| x * y).sum::<f64>();
        } else {
            let (up, vp) = (&a[row(i - 1)], &b[row(i - 1)]);
            for j in 0..n {
                s += (ua[j] - up[j]) * (va[j] - vp[j]);
            }
        }
        if i == n - 1 {
            s += ua.iter().zip(va).map(|(x, y)| x * y).sum::<f64>();
        }
        s
    })
}

/// Discrete Dirichlet energy `∫ |∇u|²` as a sum of squared edge differences.
pub fn kinetic_energy(u: &Field) -> f64 {
    edge_sum(u, u)
}

/// 5-point Laplacian with zero ghost cells.
pub fn laplacian(u: &Field) -> Field {
    let grid = u.grid;
    let n = grid.n();
    let inv_h2 = 1.0 / grid.cell_area();
    let src = &u.values;
    let mut out = vec![0.0; grid.len()];
    par::for_each_row_mut(&mut out, n, |i, row| {
        let c = &src[i * n..(i + 1) * n];
        let up = (i > 0).then(|| &src[(i - 1) * n..i * n]);
        let dn = (i + 1 < n).then(|| &src[(i + 1) * n..(i + 2) * n]);
        for j in 0..n {
            let mut s = -4.0 * c[j];
            if j > 0 {
                s += c[j - 1];
            }
            if j + 1 < n {
                s += c[j + 1];
            }
            if let Some(r) = up {
                s += r[j];
            }
            if let Some(r) = dn {
                s += r[j];
            }
            row[j] = s * inv_h2;
        }
    });
    Field::from_raw(grid, out)
}

/// Weighted norm `|u|_*² = ∫ log(1 + |x|) u²`.
pub fn star_norm_sq(u: &Field) -> f64 {
    let grid = u.grid;
    let n = grid.n();
    let v = &u.values;
    grid.cell_area()
        * par::sum_rows(n, |i| {
            let x1 = grid.coord(i);
            (0..n)
                .map(|j| {
                    let x2 = grid.coord(j);
                    x1.hypot(x2).ln_1p() * v[i * n + j] * v[i * n + j]
                })
                .sum()
        })
}

/// Bilinear interpolation at fractional index position `(si, sj)`, with zero
/// ghost values one cell outside the domain and zero beyond.
pub(crate) fn sample_bilinear(u: &Field, si: f64, sj: f64) -> f64 {
    let n = u.grid.n() as i64;
    if !(si > -1.0 && si < n as f64 && sj > -1.0 && sj < n as f64) {
        return 0.0;
    }
    let i0 = si.floor();
    let j0 = sj.floor();
    let (fi, fj) = (si - i0, sj - j0);
    let (i0, j0) = (i0 as i64, j0 as i64);
    let v = &u.values;
    let at = |i: i64, j: i64| {
        if i < 0 || j < 0 || i >= n || j >= n {
            0.0
        } else {
            v[(i * n + j) as usize]
        }
    };
    let lo = (1.0 - fj) * at(i0, j0) + fj * at(i0, j0 + 1);
    if fi == 0.0 {
        return lo;
    }
    let hi = (1.0 - fj) * at(i0 + 1, j0) + fj * at(i0 + 1, j0 + 1);
    (1.0 - fi) * lo + fi * hi
}

/// Discrete `H¹` norm squared, `∫|∇u|² + ∫u²`.
pub fn h1_norm_sq(u: &Field) -> f64 {
    kinetic_energy(u) + dot_unchecked(u, u)
}
