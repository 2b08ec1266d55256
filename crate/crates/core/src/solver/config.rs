use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialGuess {
    /// `amplitude · exp(-|x - offset|² / width²)`
    Gaussian {
        width: f64,
        amplitude: f64,
        offset: (f64, f64),
    },
    File { path: PathBuf },
    /// A Gaussian plus uniform noise of size `noise · amplitude`, drawn from the config seed.
    Noise {
        width: f64,
        amplitude: f64,
        offset: (f64, f64),
        noise: f64,
    },
}

impl InitialGuess {
    pub fn gaussian(width: f64, amplitude: f64) -> Self {
        InitialGuess::Gaussian {
            width,
            amplitude,
            offset: (0.0, 0.0),
        }
    }

    pub fn build(&self, grid: GridSpec, seed: u64) -> Result<Field> {
        let bump = |width: f64, amplitude: f64, (ox, oy): (f64, f64)| {
            Field::from_fn(grid, move |x, y| {
                let r2 = (x - ox).powi(2) + (y - oy).powi(2);
                amplitude * (-r2 / (width * width)).exp()
            })
        };
        match self {
            InitialGuess::Gaussian {
                width,
                amplitude,
                offset,
            } => bump(*width, *amplitude, *offset),
            InitialGuess::File { path } => {
                let u = io::load_field(path)?;
                if *u.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                Ok(u)
            }
            InitialGuess::Noise {
                width,
                amplitude,
                offset,
                noise,
            } => {
                let base = bump(*width, *amplitude, *offset)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let scale = noise * amplitude;
                let values = base
                    .values()
                    .iter()
                    .map(|v| v + scale * rng.gen_range(-1.0..1.0))
                    .collect();
                Field::from_values(grid, values)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Target for `‖I'(u)‖₂ / ‖u‖_{H¹}`.
    pub grad_tol: f64,
    pub step0: f64,
    pub backtrack: f64,
    pub armijo: f64,
    pub growth: f64,
    pub max_step: f64,
    /// Residual at which descent hands over to the Newton polish.
    pub polish_switch: f64,
    pub newton_iters: usize,
    pub minres_iters: usize,
    pub collapse_floor: f64,
    pub seed: u64,
    /// `None` picks a default suited to the symmetry group.
    pub initial: Option<InitialGuess>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            grad_tol: 1e-6,
            step0: 0.1,
            backtrack: 0.5,
            armijo: 1e-4,
            growth: 1.2,
            max_step: 1.0,
            polish_switch: 1e-3,
            newton_iters: 30,
            minres_iters: 400,
            collapse_floor: 1e-8,
            seed: 0,
            initial: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_tol", self.grad_tol),
            ("step0", self.step0),
            ("armijo", self.armijo),
            ("max_step", self.max_step),
            ("polish_switch", self.polish_switch),
            ("collapse_floor", self.collapse_floor),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Config(format!("backtrack must lie in (0,1), got {}", self.backtrack)));
        }
        if !(self.armijo < 1.0) {
            return Err(Error::Config(format!("armijo must be below 1, got {}", self.armijo)));
        }
        if !(self.growth >= 1.0 && self.growth.is_finite()) {
            return Err(Error::Config(format!("growth must be >= 1, got {}", self.growth)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        Ok(())
    }

    /// Parse `key = value` lines; `#` starts a comment. Unset keys keep their defaults.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = SolverConfig::default();
        let mut kind: Option<String> = None;
        let (mut width, mut amplitude, mut ox, mut oy, mut noise) = (1.0, 2.0, 0.0, 0.0, 0.1);
        let mut file: Option<PathBuf> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("line {}: {k} expects a number, got {v:?}", lineno + 1)))
            };
            let int = || -> Result<u64> {
                v.parse::<u64>()
                    .map_err(|_| Error::Config(format!("line {}: {k} expects an integer, got {v:?}", lineno + 1)))
            };
            match k {
                "max_iters" => cfg.max_iters = int()? as usize,
                "grad_tol" => cfg.grad_tol = num()?,
                "step0" => cfg.step0 = num()?,
                "backtrack" => cfg.backtrack = num()?,
                "armijo" => cfg.armijo = num()?,
                "growth" => cfg.growth = num()?,
                "max_step" => cfg.max_step = num()?,
                "polish_switch" => cfg.polish_switch = num()?,
                "newton_iters" => cfg.newton_iters = int()? as usize,
                "minres_iters" => cfg.minres_iters = int()? as usize,
                "collapse_floor" => cfg.collapse_floor = num()?,
                "seed" => cfg.seed = int()?,
                "initial" => kind = Some(v.to_ascii_lowercase()),
                "width" => width = num()?,
                "amplitude" => amplitude = num()?,
                "offset_x" => ox = num()?,
                "offset_y" => oy = num()?,
                "noise" => noise = num()?,
                "file" => file = Some(PathBuf::from(v)),
                _ => return Err(Error::Config(format!("line {}: unknown key {k:?}", lineno + 1))),
            }
        }
        cfg.initial = match kind.as_deref() {
            None => None,
            Some("gaussian") => Some(InitialGuess::Gaussian {
                width,
                amplitude,
                offset: (ox, oy),
            }),
            Some("noise") => Some(InitialGuess::Noise {
                width,
                amplitude,
                offset: (ox, oy),
                noise,
            }),
            Some("file") => Some(InitialGuess::File {
                path: file.ok_or_else(|| Error::Config("initial = file needs file = <path>".into()))?,
            }),
            Some(other) => return Err(Error::Config(format!("unknown initial guess {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }
}
