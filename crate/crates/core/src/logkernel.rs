//! The logarithmic convolution potential `w = log|·| * u²` and the split
//! functionals `V₀ = V₁ - V₂` built from the kernels
//!
//! * `K₀(z) = log|z|`
//! * `K₁(z) = log(1 + |z|)`
//! * `K₂(z) = log(1 + 1/|z|)`
//!
//! sampled on the lattice of cell displacements. The singular origin sample of
//! `K₀` is replaced by its exact average over one cell, `log h + C□` with
//! `C□ = ∫_{[-1/2,1/2]²} log|z| dz`; then `K₁(0) = 0` and `K₂(0) = -K₀(0)` so
//! the splitting holds exactly at every lattice point.
//!
//! Convolutions are linear (zero-padded to `2N x 2N`), never circular: the
//! kernel grows at infinity, so wrap-around would corrupt the potential.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{dot_unchecked, integrate, Field, GridSpec};
use crate::par;
use crate::spectral::PaddedConvolver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kernel {
    /// `log|z|`
    Log,
    /// `log(1 + |z|)`
    LogOnePlus,
    /// `log(1 + 1/|z|)`
    LogOnePlusInv,
}

impl Kernel {
    fn slot(self) -> usize {
        match self {
            Kernel::Log => 0,
            Kernel::LogOnePlus => 1,
            Kernel::LogOnePlusInv => 2,
        }
    }
}

/// `∫_{[-1/2,1/2]²} log|z| dz`, by quadrature in polar coordinates over the
/// eighth of the square `0 ≤ φ ≤ π/4`, `0 ≤ r ≤ 1/(2 cos φ)` where the radial
/// integral `∫₀^R r log r dr = R² log R / 2 - R² / 4` is done analytically.
pub fn unit_cell_log_average() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        let f = |phi: f64| {
            let r = 0.5 / phi.cos();
            0.5 * r * r * r.ln() - 0.25 * r * r
        };
        // composite Simpson; the integrand is analytic on [0, π/4]
        let panels = 4096;
        let a = std::f64::consts::FRAC_PI_4;
        let step = a / panels as f64;
        let mut s = f(0.0) + f(a);
        for k in 1..panels {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(k as f64 * step);
        }
        8.0 * s * step / 3.0
    })
}

/// Precomputed kernel samples and their padded spectra for one grid.
pub struct KernelTables {
    grid: GridSpec,
    conv: PaddedConvolver,
    origin_log: f64,
    spectra: [OnceLock<Vec<Complex<f64>>>; 3],
}

impl std::fmt::Debug for KernelTables {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelTables")
            .field("grid", &self.grid)
            .field("origin_log", &self.origin_log)
            .finish()
    }
}

impl KernelTables {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            conv: PaddedConvolver::new(grid.n()),
            origin_log: grid.spacing().ln() + unit_cell_log_average(),
            spectra: Default::default(),
        }
    }

    /// Process-wide cached tables for `grid`.
    pub fn shared(grid: GridSpec) -> Arc<KernelTables> {
        type Cache = Mutex<HashMap<(usize, u64), Arc<KernelTables>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let key = (grid.n(), grid.half_width().to_bits());
        let mut cache = CACHE
            .get_or_init(Default::default)
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        cache
            .entry(key)
            .or_insert_with(|| Arc::new(KernelTables::new(grid)))
            .clone()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Kernel value at lattice displacement `(di, dj)` (in cells).
    pub fn value(&self, kernel: Kernel, di: i64, dj: i64) -> f64 {
        if di == 0 && dj == 0 {
            return match kernel {
                Kernel::Log => self.origin_log,
                Kernel::LogOnePlus => 0.0,
                Kernel::LogOnePlusInv => -self.origin_log,
            };
        }
        let r = self.grid.spacing() * ((di * di + dj * dj) as f64).sqrt();
        match kernel {
            Kernel::Log => r.ln(),
            Kernel::LogOnePlus => r.ln_1p(),
            Kernel::LogOnePlusInv => r.recip().ln_1p(),
        }
    }

    fn spectrum(&self, kernel: Kernel) -> &[Complex<f64>] {
        self.spectra[kernel.slot()].get_or_init(|| {
            let n = self.grid.n();
            let m = self.conv.padded_len();
            let wrap = |a: usize| if a < n { a as i64 } else { a as i64 - m as i64 };
            let mut table = vec![0.0; m * m];
            par::for_each_row_mut(&mut table, m, |a, row| {
                if a == n {
                    return;
                }
                for (b, v) in row.iter_mut().enumerate() {
                    if b != n {
                        *v = self.value(kernel, wrap(a), wrap(b));
                    }
                }
            });
            self.conv.forward(&table, m, m)
        })
    }

    fn check(&self, u: &Field) -> Result<()> {
        if *u.grid() == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `h² Σ_kl K(x_ij - x_kl) ρ_kl` for an arbitrary density `ρ`.
    pub fn convolve(&self, kernel: Kernel, density: &Field) -> Result<Field> {
        self.check(density)?;
        let mut out = self.conv.convolve(self.spectrum(kernel), density.values());
        let h2 = self.grid.cell_area();
        out.iter_mut().for_each(|v| *v *= h2);
        Ok(Field::from_raw(self.grid, out))
    }

    /// Logarithmic potential `w = log|·| * u²`.
    pub fn log_potential(&self, u: &Field) -> Result<Field> {
        self.convolve(Kernel::Log, &square(u))
    }

    fn split(&self, kernel: Kernel, u: &Field) -> Result<f64> {
        let rho = square(u);
        let w = self.convolve(kernel, &rho)?;
        Ok(dot_unchecked(&rho, &w))
    }

    /// `V₀(u) = ∫∫ log|x-y| u²(x) u²(y)`.
    pub fn v0(&self, u: &Field) -> Result<f64> {
        self.split(Kernel::Log, u)
    }

    /// `V₁(u) = ∫∫ log(1+|x-y|) u²(x) u²(y)`.
    pub fn v1(&self, u: &Field) -> Result<f64> {
        self.split(Kernel::LogOnePlus, u)
    }

    /// `V₂(u) = ∫∫ log(1+1/|x-y|) u²(x) u²(y)`.
    pub fn v2(&self, u: &Field) -> Result<f64> {
        self.split(Kernel::LogOnePlusInv, u)
    }

    /// `max |w(x) - log|x| ∫u²|` over the outermost ring of cells.
    pub fn potential_asymptotics_residual(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        let w = self.log_potential(u)?;
        asymptotics_residual(u, &w)
    }

    /// Direct `O(N⁴)` evaluation of [`Self::log_potential`], used as an oracle.
    pub fn direct_log_potential(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let n = self.grid.n();
        let table: Vec<f64> = (0..n * n)
            .map(|k| self.value(Kernel::Log, (k / n) as i64, (k % n) as i64))
            .collect();
        let rho = square(u);
        let rv = rho.values();
        let h2 = self.grid.cell_area();
        let mut out = vec![0.0; n * n];
        par::for_each_row_mut(&mut out, n, |i, row| {
            for (j, o) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for k in 0..n {
                    let trow = &table[i.abs_diff(k) * n..];
                    let rrow = &rv[k * n..(k + 1) * n];
                    for (l, r) in rrow.iter().enumerate() {
                        s += trow[j.abs_diff(l)] * r;
                    }
                }
                *o = h2 * s;
            }
        });
        Ok(Field::from_raw(self.grid, out))
    }
}

pub(crate) fn square(u: &Field) -> Field {
    Field::from_raw(*u.grid(), u.values().iter().map(|v| v * v).collect())
}

pub(crate) fn asymptotics_residual(u: &Field, w: &Field) -> Result<f64> {
    let mass = integrate(&square(u));
    if mass <= 0.0 {
        return Err(Error::ZeroField);
    }
    let grid = *u.grid();
    let n = grid.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                let (x1, x2) = grid.node(i, j);
                let r = (w.at(i, j) - x1.hypot(x2).ln() * mass).abs();
                worst = worst.max(r);
            }
        }
    }
    Ok(worst)
}

/// Free-function forms using the shared per-grid tables.
pub fn log_potential(u: &Field) -> Result<Field> {
    KernelTables::shared(*u.grid()).log_potential(u)
}

pub fn v0(u: &Field) -> Result<f64> {
    KernelTables::shared(*u.grid()).v0(u)
}

pub fn v1(u: &Field) -> Result<f64> {
    KernelTables::shared(*u.grid()).v1(u)
}

pub fn v2(u: &Field) -> Result<f64> {
    KernelTables::shared(*u.grid()).v2(u)
}

pub fn potential_asymptotics_residual(u: &Field) -> Result<f64> {
    KernelTables::shared(*u.grid()).potential_asymptotics_residual(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cell_constant_matches_closed_form() {
        // ∫_0^a∫_0^a log(x²+y²) = a²(2 log a - 3 + π/2 + log 2)
        let closed = 0.5 * (std::f64::consts::FRAC_PI_2 - 3.0 - 2f64.ln());
        assert!((unit_cell_log_average() - closed).abs() < 1e-13);
    }

    #[test]
    fn kernel_split_and_signs() {
        let t = KernelTables::new(GridSpec::new(4.0, 16).unwrap());
        for di in -15..16 {
            for dj in -15..16 {
                let (k0, k1, k2) = (
                    t.value(Kernel::Log, di, dj),
                    t.value(Kernel::LogOnePlus, di, dj),
                    t.value(Kernel::LogOnePlusInv, di, dj),
                );
                assert!((k1 - k2 - k0).abs() < 1e-14);
                assert!(k1 >= 0.0 && k2 >= 0.0);
            }
        }
        for ray in [(1, 0), (1, 1), (2, 1)] {
            let mut prev = f64::INFINITY;
            for s in 0..8 {
                let k2 = t.value(Kernel::LogOnePlusInv, s * ray.0, s * ray.1);
                assert!(k2 < prev);
                prev = k2;
            }
        }
    }

    #[test]
    fn zero_field_gives_zero_potential() {
        let g = GridSpec::new(2.0, 8).unwrap();
        let t = KernelTables::new(g);
        let u = Field::zeros(g);
        assert!(t.log_potential(&u).unwrap().is_zero());
        assert_eq!(t.v0(&u).unwrap(), 0.0);
        assert_eq!(t.v1(&u).unwrap(), 0.0);
        assert_eq!(t.v2(&u).unwrap(), 0.0);
        assert!(matches!(t.potential_asymptotics_residual(&u), Err(Error::ZeroField)));
    }

    #[test]
    fn lattice_delta_reproduces_kernel() {
        let g = GridSpec::new(3.0, 12).unwrap();
        let t = KernelTables::new(g);
        let c = (5, 7);
        let mut u = Field::zeros(g);
        u.values_mut()[g.index(c.0, c.1)] = 1.0 / g.spacing();
        let w = t.log_potential(&u).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let want = t.value(Kernel::Log, i as i64 - c.0 as i64, j as i64 - c.1 as i64);
                assert!((w.at(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_cell_v1_vanishes() {
        let g = GridSpec::new(3.0, 12).unwrap();
        let t = KernelTables::new(g);
        let mut u = Field::zeros(g);
        u.values_mut()[g.index(3, 3)] = 2.0;
        assert!(t.v1(&u).unwrap().abs() < 1e-14);
    }

    #[test]
    fn grid_mismatch_is_error() {
        let t = KernelTables::new(GridSpec::new(2.0, 8).unwrap());
        let u = Field::zeros(GridSpec::new(2.0, 10).unwrap());
        assert!(matches!(t.log_potential(&u), Err(Error::GridMismatch)));
    }
}
