//! Signed orthogonal group actions `[A * u](x) = τ(A) u(A⁻¹x)` and the
//! averaging projector onto the fixed subspace `X_G`.
//!
//! Lattice maps (reflections and quarter turns) are exact index permutations on
//! the cell-centred grid. Other rotations go through bilinear interpolation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample_bilinear, Field, GridSpec};
use crate::par;

const EXACT_TOL: f64 = 1e-12;

/// Relative band used by [`sign_change_certificate`].
pub const VANISHING_THETA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SymmetryGroup {
    /// All of `O(2)` with trivial character.
    Radial,
    /// Reflections in both axes; odd in `x₁`, even in `x₂`.
    OddEven,
    /// Cyclic group generated by the rotation through `π/k`, with `τ(A^j) = (-1)^j`.
    Dihedral(u32),
}

impl fmt::Display for SymmetryGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymmetryGroup::Radial => f.write_str("radial"),
            SymmetryGroup::OddEven => f.write_str("oddeven"),
            SymmetryGroup::Dihedral(k) => write!(f, "dihedral:{k}"),
        }
    }
}

impl FromStr for SymmetryGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "radial" => return Ok(SymmetryGroup::Radial),
            "oddeven" | "odd-even" => return Ok(SymmetryGroup::OddEven),
            _ => {}
        }
        if let Some(k) = t.strip_prefix("dihedral:") {
            if let Ok(k) = k.parse::<u32>() {
                if k >= 1 {
                    return Ok(SymmetryGroup::Dihedral(k));
                }
            }
        }
        Err(Error::UnknownGroup(s.to_string()))
    }
}

impl TryFrom<String> for SymmetryGroup {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SymmetryGroup> for String {
    fn from(g: SymmetryGroup) -> String {
        g.to_string()
    }
}

/// An orthogonal map of the plane with its character value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    /// Row-major matrix acting on `(x₁, x₂)`.
    pub matrix: [[f64; 2]; 2],
    pub tau: f64,
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < EXACT_TOL {
        r
    } else {
        x
    }
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement {
        matrix: [[1.0, 0.0], [0.0, 1.0]],
        tau: 1.0,
    };

    pub fn rotation(angle: f64, tau: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let (s, c) = (snap(s), snap(c));
        Self {
            matrix: [[c, -s], [s, c]],
            tau,
        }
    }

    /// `x₁ ↦ -x₁`.
    pub fn reflect_x1(tau: f64) -> Self {
        Self {
            matrix: [[-1.0, 0.0], [0.0, 1.0]],
            tau,
        }
    }

    /// `x₂ ↦ -x₂`.
    pub fn reflect_x2(tau: f64) -> Self {
        Self {
            matrix: [[1.0, 0.0], [0.0, -1.0]],
            tau,
        }
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        let (a, b) = (&self.matrix, &other.matrix);
        let mut m = [[0.0; 2]; 2];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = snap(a[r][0] * b[0][c] + a[r][1] * b[1][c]);
            }
        }
        GroupElement {
            matrix: m,
            tau: self.tau * other.tau,
        }
    }

    pub fn same_map(&self, other: &GroupElement) -> bool {
        self.matrix
            .iter()
            .flatten()
            .zip(other.matrix.iter().flatten())
            .all(|(a, b)| (a - b).abs() < 1e-9)
    }

    /// True for signed permutation matrices, which permute grid cells exactly.
    pub fn is_lattice_exact(&self) -> bool {
        self.matrix.iter().flatten().all(|&v| v == 0.0 || v == 1.0 || v == -1.0)
    }

    /// `A⁻¹ = Aᵀ` applied to centred index coordinates.
    fn preimage(&self, ci: f64, cj: f64) -> (f64, f64) {
        let m = &self.matrix;
        (m[0][0] * ci + m[1][0] * cj, m[0][1] * ci + m[1][1] * cj)
    }

    /// `τ(A) u(A⁻¹x)`.
    pub fn apply(&self, u: &Field) -> Field {
        let grid = *u.grid();
        let mut out = vec![0.0; grid.len()];
        par::for_each_row_mut(&mut out, grid.n(), |i, row| self.apply_row(u, i, row));
        Field::from_raw(grid, out)
    }

    fn apply_row(&self, u: &Field, i: usize, row: &mut [f64]) {
        let n = u.grid().n();
        let half = n as f64 / 2.0;
        let exact = self.is_lattice_exact();
        let ci = i as f64 + 0.5 - half;
        for (j, o) in row.iter_mut().enumerate() {
            let cj = j as f64 + 0.5 - half;
            let (pi, pj) = self.preimage(ci, cj);
            let (si, sj) = (pi + half - 0.5, pj + half - 0.5);
            let v = if exact {
                u.at(si.round() as usize, sj.round() as usize)
            } else {
                sample_bilinear(u, si, sj)
            };
            *o = self.tau * v;
        }
    }
}

/// Closure of `gens` under composition. Panics if the character is not
/// well defined on the generated group.
fn close(gens: &[GroupElement]) -> Vec<GroupElement> {
    let mut out = vec![GroupElement::IDENTITY];
    let mut k = 0;
    while k < out.len() {
        let a = out[k];
        for g in gens {
            let c = a.compose(g);
            match out.iter().find(|e| e.same_map(&c)) {
                Some(e) => assert_eq!(e.tau, c.tau, "character is not a homomorphism"),
                None => out.push(c),
            }
        }
        k += 1;
    }
    out
}

impl SymmetryGroup {
    /// Every element of the group with its character. `Radial` is represented by
    /// its lattice part, the eight symmetries of the square.
    pub fn elements(&self) -> Vec<GroupElement> {
        match *self {
            SymmetryGroup::Radial | SymmetryGroup::OddEven => close(&self.generators()),
            SymmetryGroup::Dihedral(k) => (0..2 * k)
                .map(|j| {
                    let tau = if j % 2 == 0 { 1.0 } else { -1.0 };
                    GroupElement::rotation(std::f64::consts::PI * j as f64 / k as f64, tau)
                })
                .collect(),
        }
    }

    /// Generators used for the invariance residual.
    pub fn generators(&self) -> Vec<GroupElement> {
        match *self {
            SymmetryGroup::Radial => vec![
                GroupElement::rotation(std::f64::consts::FRAC_PI_2, 1.0),
                GroupElement::reflect_x1(1.0),
            ],
            SymmetryGroup::OddEven => vec![GroupElement::reflect_x1(-1.0), GroupElement::reflect_x2(1.0)],
            SymmetryGroup::Dihedral(k) => {
                vec![GroupElement::rotation(std::f64::consts::PI / k as f64, -1.0)]
            }
        }
    }

    pub fn order(&self) -> Option<usize> {
        match *self {
            SymmetryGroup::Radial => None,
            SymmetryGroup::OddEven => Some(4),
            SymmetryGroup::Dihedral(k) => Some(2 * k as usize),
        }
    }

    /// Whether symmetrization is an exact lattice operation.
    pub fn is_lattice_exact(&self) -> bool {
        match self {
            SymmetryGroup::Radial => false,
            _ => self.elements().iter().all(GroupElement::is_lattice_exact),
        }
    }

    pub fn has_negative_character(&self) -> bool {
        !matches!(self, SymmetryGroup::Radial)
    }

    /// A lattice-exact group whose fixed space contains the symmetric fields
    /// of `self` in a fixed orientation: the exact elements of `self`,
    /// plus for `Dihedral(k)` the axis reflections with `τ(x₂ ↦ -x₂) = 1`.
    pub fn lattice_subgroup(&self) -> Vec<GroupElement> {
        match *self {
            SymmetryGroup::Radial | SymmetryGroup::OddEven => self.elements(),
            SymmetryGroup::Dihedral(k) => {
                let mut gens: Vec<GroupElement> = self
                    .elements()
                    .into_iter()
                    .filter(GroupElement::is_lattice_exact)
                    .collect();
                let parity = if k % 2 == 0 { 1.0 } else { -1.0 };
                gens.push(GroupElement::reflect_x2(1.0));
                gens.push(GroupElement::reflect_x1(parity));
                close(&gens)
            }
        }
    }
}

/// `(1/|G|) Σ τ(A) u(A⁻¹x)` over explicit elements.
pub fn average_over(u: &Field, elements: &[GroupElement]) -> Field {
    let grid = *u.grid();
    let mut out = vec![0.0; grid.len()];
    let inv = 1.0 / elements.len() as f64;
    let n = grid.n();
    par::for_each_row_mut(&mut out, n, |i, row| {
        let mut images: Vec<Vec<f64>> = elements
            .iter()
            .map(|e| {
                let mut r = vec![0.0; n];
                e.apply_row(u, i, &mut r);
                r
            })
            .collect();
        // pairwise over the orbit so that fixed points are reproduced exactly
        let mut len = images.len();
        while len > 1 {
            let half = len / 2;
            for k in 0..half {
                let (lo, hi) = images.split_at_mut(len - half + k);
                let src = std::mem::take(&mut hi[0]);
                lo[k].iter_mut().zip(&src).for_each(|(a, b)| *a += b);
            }
            len -= half;
        }
        for (o, v) in row.iter_mut().zip(&images[0]) {
            *o = v * inv;
        }
    });
    Field::from_raw(grid, out)
}

fn radial_average(u: &Field) -> Field {
    let grid: GridSpec = *u.grid();
    let n = grid.n();
    let h = grid.spacing();
    let half = n as f64 / 2.0;
    let dr = 0.5 * h;
    let r_max = std::f64::consts::SQRT_2 * grid.half_width();
    let samples = (r_max / dr).ceil() as usize + 2;
    let angles = 4 * n;
    let trig: Vec<(f64, f64)> = (0..angles)
        .map(|m| (std::f64::consts::TAU * (m as f64 + 0.5) / angles as f64).sin_cos())
        .collect();
    let profile: Vec<f64> = par::map_range(samples, |k| {
        let rc = k as f64 * dr / h;
        let s: f64 = trig
            .iter()
            .map(|&(s, c)| sample_bilinear(u, rc * c + half - 0.5, rc * s + half - 0.5))
            .sum();
        s / angles as f64
    });
    let mut out = vec![0.0; grid.len()];
    par::for_each_row_mut(&mut out, n, |i, row| {
        let x1 = grid.coord(i);
        for (j, o) in row.iter_mut().enumerate() {
            let r = x1.hypot(grid.coord(j)) / dr;
            let k = (r.floor() as usize).min(samples - 2);
            let f = r - k as f64;
            *o = (1.0 - f) * profile[k] + f * profile[k + 1];
        }
    });
    Field::from_raw(grid, out)
}

/// Projector onto `X_G`.
pub fn symmetrize(u: &Field, g: SymmetryGroup) -> Field {
    match g {
        SymmetryGroup::Radial => radial_average(u),
        _ => average_over(u, &g.elements()),
    }
}

/// `max_A ‖τ(A) u(A⁻¹·) - u‖₂ / ‖u‖₂` over the generators.
pub fn invariance_residual(u: &Field, g: SymmetryGroup) -> f64 {
    let norm = u.l2_norm().max(f64::MIN_POSITIVE);
    g.generators()
        .iter()
        .map(|e| {
            let moved = e.apply(u);
            moved.sub(u).map(|d| d.l2_norm()).unwrap_or(f64::INFINITY) / norm
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignChangeCertificate {
    pub min: f64,
    pub max: f64,
    pub both_signs: bool,
    /// Description of the sampled fixed-point set.
    pub fixed_set: String,
    pub samples: usize,
    /// Largest `|u|` on the fixed-point set relative to `max|u|`.
    pub max_on_fixed_set: f64,
    /// Fraction of fixed-set samples with `|u| < θ max|u|`.
    pub vanishing_fraction: f64,
    /// Length (or count, for the origin) of the vanishing part.
    pub vanishing_measure: f64,
    pub theta: f64,
}

/// Sign structure of `u` and its values on the fixed set of a `τ = -1` element.
pub fn sign_change_certificate(u: &Field, g: SymmetryGroup) -> Result<SignChangeCertificate> {
    if !g.has_negative_character() {
        return Err(Error::TrivialCharacter(g.to_string()));
    }
    let grid = *u.grid();
    let n = grid.n();
    let centre = n as f64 / 2.0 - 0.5;
    let peak = u.max_abs();
    let (fixed_set, values, cell) = match g {
        SymmetryGroup::OddEven => (
            "line x1 = 0".to_string(),
            (0..n).map(|j| sample_bilinear(u, centre, j as f64)).collect::<Vec<_>>(),
            grid.spacing(),
        ),
        _ => ("origin".to_string(), vec![sample_bilinear(u, centre, centre)], 1.0),
    };
    let rel: Vec<f64> = values
        .iter()
        .map(|v| if peak > 0.0 { v.abs() / peak } else { 0.0 })
        .collect();
    let vanishing = rel.iter().filter(|&&r| r < VANISHING_THETA).count();
    let (min, max) = (u.min(), u.max());
    Ok(SignChangeCertificate {
        min,
        max,
        both_signs: min < 0.0 && max > 0.0,
        fixed_set,
        samples: rel.len(),
        max_on_fixed_set: rel.iter().fold(0.0, |m: f64, &r| m.max(r)),
        vanishing_fraction: vanishing as f64 / rel.len() as f64,
        vanishing_measure: vanishing as f64 * cell,
        theta: VANISHING_THETA,
    })
}
