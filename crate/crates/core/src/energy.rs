//! The energy functional
//!
//! ```text
//! I(u) = ½∫(|∇u|² + u²) + ¼ V₀(u) - (1/p)∫|u|^p
//! ```
//!
//! its Euler–Lagrange gradient, the Pohozaev functional `P` and the
//! Nehari–Pohozaev functional `J = 2 I'(u)u - P(u)`, all on the discrete grid.
//! The discrete `I` is differentiated exactly: [`euler_gradient`] is the
//! `h²`-weighted gradient of the discrete functional, and
//! [`Functional::hessian_apply`] its exact derivative.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, dot_unchecked, Field, GridSpec};
use crate::logkernel::{square, KernelTables};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    exponent: f64,
    grid: GridSpec,
}

impl Params {
    pub fn new(exponent: f64, grid: GridSpec) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 2.0) {
            return Err(Error::InvalidExponent(exponent));
        }
        Ok(Self { exponent, grid })
    }

    pub fn p(&self) -> f64 {
        self.exponent
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn p_ge_3(&self) -> bool {
        self.exponent >= 3.0
    }
}

/// All energy components of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub mass: f64,
    pub v0: f64,
    pub v1: f64,
    pub v2: f64,
    pub lp: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub star_sq: f64,
    pub h1_sq: f64,
}

pub fn energy_i(kinetic: f64, mass: f64, v0: f64, lp: f64, p: f64) -> f64 {
    0.5 * kinetic + 0.5 * mass + 0.25 * v0 - lp / p
}

pub fn pohozaev_value(mass: f64, v0: f64, lp: f64, p: f64) -> f64 {
    mass + v0 + 0.25 * mass * mass - 2.0 / p * lp
}

pub fn nehari_pohozaev_value(kinetic: f64, mass: f64, v0: f64, lp: f64, p: f64) -> f64 {
    2.0 * kinetic + mass - 2.0 * (p - 1.0) / p * lp + v0 - 0.25 * mass * mass
}

/// `sign(u)|u|^{p-1}`, with `0 ↦ 0`.
pub(crate) fn power_nonlinearity(x: f64, p: f64) -> f64 {
    if p == 3.0 {
        x * x.abs()
    } else if p == 4.0 {
        x * x * x
    } else {
        x * x.abs().powf(p - 2.0)
    }
}

fn power_derivative(x: f64, p: f64) -> f64 {
    if p == 3.0 {
        2.0 * x.abs()
    } else if p == 4.0 {
        3.0 * x * x
    } else {
        (p - 1.0) * x.abs().powf(p - 2.0)
    }
}

/// A field together with the quantities every solver step needs.
#[derive(Debug, Clone)]
pub struct State {
    pub u: Field,
    /// `w = log|·| * u²`
    pub w: Field,
    pub kinetic: f64,
    pub mass: f64,
    pub v0: f64,
    pub lp: f64,
    p: f64,
}

impl State {
    pub fn energy(&self) -> f64 {
        energy_i(self.kinetic, self.mass, self.v0, self.lp, self.p)
    }

    pub fn pohozaev(&self) -> f64 {
        pohozaev_value(self.mass, self.v0, self.lp, self.p)
    }

    pub fn nehari_pohozaev(&self) -> f64 {
        nehari_pohozaev_value(self.kinetic, self.mass, self.v0, self.lp, self.p)
    }

    pub fn h1_sq(&self) -> f64 {
        self.kinetic + self.mass
    }
}

/// The discrete functional for fixed `(p, grid)`, holding the shared kernel tables.
#[derive(Debug, Clone)]
pub struct Functional {
    params: Params,
    tables: Arc<KernelTables>,
}

impl Functional {
    pub fn new(params: Params) -> Self {
        Self {
            tables: KernelTables::shared(params.grid),
            params,
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn tables(&self) -> &KernelTables {
        &self.tables
    }

    fn check(&self, u: &Field) -> Result<()> {
        if *u.grid() == self.params.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn state(&self, u: Field) -> Result<State> {
        self.check(&u)?;
        let rho = square(&u);
        let w = self.tables.log_potential(&u)?;
        Ok(State {
            kinetic: grid::kinetic_energy(&u),
            mass: grid::integrate(&rho),
            v0: dot_unchecked(&rho, &w),
            lp: grid::lp_unchecked(&u, self.params.p()),
            p: self.params.p(),
            w,
            u,
        })
    }

    /// `-Δ_h u + u + w u - |u|^{p-2} u` at a prepared state.
    pub fn gradient(&self, s: &State) -> Field {
        let p = self.params.p();
        let mut g = grid::laplacian(&s.u);
        for ((gv, &u), &w) in g.values_mut().iter_mut().zip(s.u.values()).zip(s.w.values()) {
            *gv = -*gv + u + w * u - power_nonlinearity(u, p);
        }
        g
    }

    /// Second derivative `I''(u)[v]`:
    /// `-Δ_h v + v + w v + 2 (log|·| * (u v)) u - (p-1)|u|^{p-2} v`.
    pub fn hessian_apply(&self, s: &State, v: &Field) -> Result<Field> {
        self.check(v)?;
        let p = self.params.p();
        let uv = s.u.mul(v)?;
        let cross = self.tables.convolve(crate::logkernel::Kernel::Log, &uv)?;
        let mut out = grid::laplacian(v);
        let it = out
            .values_mut()
            .iter_mut()
            .zip(v.values())
            .zip(s.u.values())
            .zip(s.w.values())
            .zip(cross.values());
        for ((((o, &vv), &u), &w), &c) in it {
            *o = -*o + vv + w * vv + 2.0 * c * u - power_derivative(u, p) * vv;
        }
        Ok(out)
    }

    /// Relative residual `‖I'(u)‖₂ / ‖u‖_{H¹}`.
    pub fn residual(&self, s: &State, g: &Field) -> f64 {
        let scale = s.h1_sq().sqrt();
        if scale > 0.0 {
            g.l2_norm() / scale
        } else {
            0.0
        }
    }

    pub fn breakdown(&self, s: &State) -> Result<EnergyBreakdown> {
        let v1 = self.tables.v1(&s.u)?;
        let v2 = self.tables.v2(&s.u)?;
        let b = EnergyBreakdown {
            kinetic: s.kinetic,
            mass: s.mass,
            v0: s.v0,
            v1,
            v2,
            lp: s.lp,
            i: s.energy(),
            j: s.nehari_pohozaev(),
            p: s.pohozaev(),
            star_sq: grid::star_norm_sq(&s.u),
            h1_sq: s.h1_sq(),
        };
        debug_assert!({
            let d = 2.0 * (b.kinetic + b.mass + b.v0 - b.lp) - b.p;
            (b.j - d).abs() <= 1e-10 * (1.0 + b.j.abs() + d.abs())
        });
        Ok(b)
    }
}

pub fn energy(u: &Field, params: &Params) -> Result<EnergyBreakdown> {
    let f = Functional::new(*params);
    let s = f.state(u.clone())?;
    f.breakdown(&s)
}

pub fn euler_gradient(u: &Field, params: &Params) -> Result<Field> {
    let f = Functional::new(*params);
    let s = f.state(u.clone())?;
    Ok(f.gradient(&s))
}

/// Directional derivative `I'(u)v = ⟨∇u,∇v⟩ + ⟨u,v⟩ + ∫w u v - ∫|u|^{p-2}u v`.
pub fn dir_i(u: &Field, v: &Field, params: &Params) -> Result<f64> {
    let f = Functional::new(*params);
    f.check(v)?;
    let s = f.state(u.clone())?;
    let p = params.p();
    let grad = grid::gradient_inner(u, v)?;
    let h2 = params.grid.cell_area();
    let rest: f64 = u
        .values()
        .iter()
        .zip(v.values())
        .zip(s.w.values())
        .map(|((&a, &b), &w)| (a + w * a - power_nonlinearity(a, p)) * b)
        .sum();
    Ok(grad + h2 * rest)
}

pub fn pohozaev(u: &Field, params: &Params) -> Result<f64> {
    let s = Functional::new(*params).state(u.clone())?;
    Ok(s.pohozaev())
}

pub fn nehari_pohozaev(u: &Field, params: &Params) -> Result<f64> {
    let s = Functional::new(*params).state(u.clone())?;
    Ok(s.nehari_pohozaev())
}
