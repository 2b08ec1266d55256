//! Critical points of the discrete energy.
//!
//! Both strategies share one structure. A Sobolev-preconditioned descent moves
//! along `-(1 - Δ_h)⁻¹ I'(u)` and maps each trial point back to the maximum of
//! its scaling fiber, which turns the mountain-pass geometry of `I` into a
//! minimisation. Once the relative residual drops below `polish_switch` a
//! Newton iteration with MINRES inner solves finishes the job, because the
//! discrete critical point sits off the fiber maximum by `O(h²)` and the
//! projected descent stalls there.

mod config;
mod minres;

use serde::Serialize;

pub use config::{InitialGuess, SolverConfig};

use crate::energy::{EnergyBreakdown, Functional, Params, State};
use crate::error::{Error, Result};
use crate::fiber::{self, Moments};
use crate::grid::Field;
use crate::logkernel::asymptotics_residual;
use crate::par;
use crate::spectral::DirichletSolver;
use crate::symmetry::{self, GroupElement, SignChangeCertificate, SymmetryGroup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    FiberProjected,
    DampedFlow,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::FiberProjected => "fiber-projected",
            Strategy::DampedFlow => "damped-flow",
        })
    }
}

/// Ratio window for the local fiber correction of the damped flow.
const LOCAL_FIBER_WINDOW: f64 = 2.0;
const MIN_STEP: f64 = 1e-12;
const STALL_WINDOW: usize = 100;
/// Drift `|log t|` off the projection that triggers resampling the iterate.
const REMATERIALIZE: f64 = 0.02;
const SIGN_SLACK: f64 = 1e-6;
/// Radial residual below which a ladder solution would count as radial.
pub const RADIAL_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub field: Field,
    /// Where the field was written, if it was.
    pub field_file: Option<String>,
    pub strategy: Strategy,
    pub group: Option<SymmetryGroup>,
    pub p: f64,
    pub half_width: f64,
    pub n: usize,
    pub converged: bool,
    pub label: String,
    pub breakdown: EnergyBreakdown,
    pub grad_residual: f64,
    /// Accepted descent steps.
    pub iterations: usize,
    pub newton_iterations: usize,
    pub minres_iterations: usize,
    /// Fiber parameter applied at each accepted descent step.
    pub t_history: Vec<f64>,
    /// Projected energy `sup_t I(u_t)` after each accepted descent step (nonincreasing).
    #[serde(rename = "I_history")]
    pub i_history: Vec<f64>,
    #[serde(rename = "J_history")]
    pub j_history: Vec<f64>,
    #[serde(rename = "P_history")]
    pub p_history: Vec<f64>,
    pub mass_history: Vec<f64>,
    pub residual_history: Vec<f64>,
    pub newton_residuals: Vec<f64>,
    pub minimax_energy: f64,
    pub sign_definite: bool,
    pub symmetry_residual: f64,
    /// Residual left by interpolated group elements after one more projection.
    pub symmetry_floor: f64,
    pub sign_change: Option<SignChangeCertificate>,
    pub asymptotics_residual: f64,
}

impl SolveReport {
    pub fn energy(&self) -> f64 {
        self.breakdown.i
    }
}

/// `sup_t I(u_t)` from the moments of `u`.
pub fn minimax_energy(u: &Field, params: &Params) -> Result<f64> {
    let m = fiber::moments(u, params)?;
    minimax_from_moments(&m)
}

fn minimax_from_moments(m: &Moments) -> Result<f64> {
    let t = fiber::fiber_maximizer(m)?;
    fiber::fiber_energy(m, t)
}

/// `min u · max u ≥ -slack · (max|u|)²`
pub fn is_sign_definite(u: &Field) -> bool {
    let peak = u.max_abs();
    u.min() * u.max() >= -SIGN_SLACK * peak * peak
}

/// Default start: a Gaussian of amplitude 2, centred with width 1 for groups
/// with trivial character. Otherwise it sits at distance 1.5 on the `x₁` axis
/// and is narrow enough that the symmetrised field has one separated lobe per
/// sign sector. For `Dihedral(k)` the amplitude grows like `2k`, roughly the
/// peak height of the symmetric solutions, so that the first projection is a
/// mild rescaling.
pub fn default_initial_guess(group: Option<SymmetryGroup>) -> InitialGuess {
    const R0: f64 = 1.5;
    let (r0, width, amplitude) = match group {
        None | Some(SymmetryGroup::Radial) => (0.0, 1.0, 2.0),
        Some(SymmetryGroup::OddEven) => (R0, 1.0, 2.0),
        Some(SymmetryGroup::Dihedral(k)) => {
            let half_sector = std::f64::consts::PI / (2 * k) as f64;
            (R0, (R0 * half_sector.sin()).min(1.0), 2.0 * k as f64)
        }
    };
    InitialGuess::Gaussian {
        width,
        amplitude,
        offset: (r0, 0.0),
    }
}

/// Initial field from the config (or the group default), symmetrised and
/// rescaled to its original peak value.
pub fn initial_field(params: &Params, cfg: &SolverConfig, group: Option<SymmetryGroup>) -> Result<Field> {
    let guess = cfg.initial.clone().unwrap_or_else(|| default_initial_guess(group));
    let u = guess.build(*params.grid(), cfg.seed)?;
    let peak = u.max_abs();
    let u = match group {
        Some(g) => symmetry::symmetrize(&u, g),
        None => u,
    };
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    // averaging over the orbit divides the lobe height by the group order
    Ok(u.scaled(peak / u.max_abs()))
}

/// Rescale `u` onto its fiber maximum (`p ≥ 3`) or onto the first local
/// maximum of its fiber found by a dense scan (`2 < p < 3`).
pub fn prescale(u: &Field, params: &Params) -> Result<Field> {
    let m = fiber::moments(u, params)?;
    let t = if params.p_ge_3() {
        fiber::project_to_manifold(&m)?
    } else {
        *fiber::fiber_local_maxima(&m, 1e-3, 1e3, 4001)?
            .first()
            .ok_or(Error::NoBracket)?
    };
    fiber::rescale(u, t)
}

/// True once the best residual of the last `STALL_WINDOW` steps is no
/// better than 0.9 times the best before them.
fn stagnated(history: &[f64]) -> bool {
    if history.len() <= STALL_WINDOW {
        return false;
    }
    let (old, recent) = history.split_at(history.len() - STALL_WINDOW);
    let best_old = old.iter().copied().fold(f64::INFINITY, f64::min);
    let best_recent = recent.iter().copied().fold(f64::INFINITY, f64::min);
    best_recent > 0.9 * best_old
}

struct Engine<'a> {
    f: Functional,
    cfg: &'a SolverConfig,
    group: Option<SymmetryGroup>,
    /// Exact lattice symmetries imposed on every iterate and Newton step.
    lattice: Vec<GroupElement>,
    precond: DirichletSolver,
    strategy: Strategy,
}

struct Trace {
    t: Vec<f64>,
    i: Vec<f64>,
    j: Vec<f64>,
    p: Vec<f64>,
    mass: Vec<f64>,
    residual: Vec<f64>,
    newton: Vec<f64>,
    iterations: usize,
    newton_iterations: usize,
    minres_iterations: usize,
}

impl<'a> Engine<'a> {
    fn new(params: Params, cfg: &'a SolverConfig, group: Option<SymmetryGroup>, strategy: Strategy) -> Result<Self> {
        cfg.validate()?;
        let grid = *params.grid();
        Ok(Self {
            f: Functional::new(params),
            cfg,
            group,
            lattice: group.map(|g| g.lattice_subgroup()).unwrap_or_default(),
            precond: DirichletSolver::new(grid.n(), grid.spacing()),
            strategy,
        })
    }

    fn impose(&self, u: Field) -> Field {
        if self.lattice.len() > 1 {
            symmetry::average_over(&u, &self.lattice)
        } else {
            u
        }
    }

    /// Project a descent direction onto the symmetric subspace.
    fn symmetric_direction(&self, d: Field) -> Field {
        match self.group {
            Some(g) if !g.is_lattice_exact() => self.impose(symmetry::symmetrize(&d, g)),
            _ => self.impose(d),
        }
    }

    fn precondition(&self, g: &Field) -> Field {
        Field::from_raw(*g.grid(), self.precond.solve(g.values(), 1.0))
    }

    fn moments(&self, s: &State) -> Moments {
        Moments {
            a: s.kinetic,
            b: s.mass,
            c: s.v0,
            d: s.lp,
            p: self.f.params().p(),
        }
    }

    /// Fiber parameter of the projection and the projected energy, both from
    /// the moments in closed form: the global fiber maximum for the projected
    /// strategy, the nearest local one for the flow (or `t = 1` if none).
    fn fiber_point(&self, s: &State) -> Result<(f64, f64)> {
        if s.mass < self.cfg.collapse_floor {
            return Err(Error::Collapse { mass: s.mass });
        }
        let m = self.moments(s);
        let t = match self.strategy {
            Strategy::FiberProjected => fiber::fiber_maximizer(&m)?,
            Strategy::DampedFlow => fiber::local_fiber_root(&m, LOCAL_FIBER_WINDOW).unwrap_or(1.0),
        };
        Ok((t, fiber::fiber_energy(&m, t)?))
    }

    /// Resample the field onto its projection.
    fn materialize(&self, s: State, t: f64) -> Result<State> {
        if t == 1.0 {
            return Ok(s);
        }
        self.f.state(self.impose(fiber::rescale(&s.u, t)?))
    }

    fn descend(&self, u0: Field, trace: &mut Trace) -> Result<State> {
        let cfg = self.cfg;
        let s0 = self.f.state(self.impose(u0))?;
        let (t0, _) = self.fiber_point(&s0)?;
        let mut s = self.materialize(s0, t0)?;
        let (mut t, mut phi) = self.fiber_point(&s)?;
        let mut sigma = cfg.step0.min(cfg.max_step);
        let mut resampled = false;
        for _ in 0..cfg.max_iters {
            let g = self.f.gradient(&s);
            let res = self.f.residual(&s, &g);
            trace.residual.push(res);
            trace.j.push(s.nehari_pohozaev());
            trace.p.push(s.pohozaev());
            trace.mass.push(s.mass);
            if res <= cfg.polish_switch.max(cfg.grad_tol) || stagnated(&trace.residual) {
                break;
            }
            let d = self.symmetric_direction(self.precondition(&g));
            let slope = g.dot(&d)?;
            if !(slope > 0.0) {
                break;
            }
            // never accept above the last recorded value, so the history stays monotone
            let target = trace.i.last().map_or(phi, |&last| phi.min(last));
            let mut accepted = None;
            while sigma >= MIN_STEP {
                let trial = self.f.state(s.u.lin_comb(1.0, &d, -sigma)?)?;
                let (tt, pt) = self.fiber_point(&trial)?;
                if pt <= target - cfg.armijo * sigma * slope {
                    accepted = Some((trial, tt, pt));
                    break;
                }
                sigma *= cfg.backtrack;
            }
            let Some((st, tt, pt)) = accepted else {
                // off the projection the gradient carries a dilation component
                // that the projected energy does not see; resample and retry once
                if resampled || t == 1.0 {
                    break;
                }
                s = self.materialize(s, t)?;
                (t, phi) = self.fiber_point(&s)?;
                sigma = cfg.step0.min(cfg.max_step);
                resampled = true;
                continue;
            };
            resampled = false;
            trace.iterations += 1;
            trace.t.push(tt);
            trace.i.push(pt);
            sigma = (sigma * cfg.growth).min(cfg.max_step);
            if tt.ln().abs() > REMATERIALIZE {
                s = self.materialize(st, tt)?;
                (t, phi) = self.fiber_point(&s)?;
            } else {
                (s, t, phi) = (st, tt, pt);
            }
        }
        self.materialize(s, t)
    }

    /// Newton on `I'(u) = 0` with MINRES inner solves, line search on the residual.
    fn polish(&self, s0: State, trace: &mut Trace) -> Result<(State, f64)> {
        let cfg = self.cfg;
        let grid = *s0.u.grid();
        let mut s = self.f.state(self.impose(s0.u))?;
        let mut g = self.f.gradient(&s);
        let mut res = self.f.residual(&s, &g);
        trace.newton.push(res);
        for _ in 0..cfg.newton_iters {
            if res <= cfg.grad_tol {
                break;
            }
            let rtol = res.clamp(1e-10, 1e-1);
            let rhs: Vec<f64> = g.values().iter().map(|v| -v).collect();
            let out = minres::minres(
                |v| {
                    let vf = Field::from_raw(grid, v.to_vec());
                    self.f
                        .hessian_apply(&s, &vf)
                        .map(Field::into_values)
                        .unwrap_or_else(|_| vec![0.0; v.len()])
                },
                |r| self.precond.solve(r, 1.0),
                &rhs,
                rtol,
                cfg.minres_iters,
            );
            trace.minres_iterations += out.iterations;
            let step = self.impose(Field::from_raw(grid, out.x));
            let mut alpha = 1.0;
            let mut improved = None;
            for _ in 0..12 {
                let trial = self.f.state(s.u.lin_comb(1.0, &step, alpha)?)?;
                let gt = self.f.gradient(&trial);
                let rt = self.f.residual(&trial, &gt);
                if rt.is_finite() && rt <= (1.0 - 1e-4 * alpha) * res {
                    improved = Some((trial, gt, rt));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((st, gt, rt)) = improved else { break };
            if st.mass < cfg.collapse_floor {
                return Err(Error::Collapse { mass: st.mass });
            }
            trace.newton_iterations += 1;
            s = st;
            g = gt;
            res = rt;
            trace.newton.push(res);
        }
        Ok((s, res))
    }

    fn run(&self, u0: Field) -> Result<SolveReport> {
        let mut trace = Trace {
            t: vec![],
            i: vec![],
            j: vec![],
            p: vec![],
            mass: vec![],
            residual: vec![],
            newton: vec![],
            iterations: 0,
            newton_iterations: 0,
            minres_iterations: 0,
        };
        let s = self.descend(u0, &mut trace)?;
        let (s, res) = self.polish(s, &mut trace)?;
        self.report(s, res, trace)
    }

    fn report(&self, s: State, res: f64, trace: Trace) -> Result<SolveReport> {
        let params = self.f.params();
        let breakdown = self.f.breakdown(&s)?;
        let minimax = minimax_from_moments(&self.moments(&s))?;
        let (symmetry_residual, symmetry_floor, sign_change) = match self.group {
            Some(g) => {
                let floor = symmetry::invariance_residual(&symmetry::symmetrize(&s.u, g), g);
                let cert = if g.has_negative_character() {
                    Some(symmetry::sign_change_certificate(&s.u, g)?)
                } else {
                    None
                };
                (symmetry::invariance_residual(&s.u, g), floor, cert)
            }
            None => (0.0, 0.0, None),
        };
        let label = match (params.p_ge_3(), self.group) {
            (true, None) => "ground state",
            (true, Some(_)) => "symmetric least-energy candidate",
            (false, _) => "critical point candidate",
        };
        let grid = params.grid();
        Ok(SolveReport {
            asymptotics_residual: asymptotics_residual(&s.u, &s.w)?,
            sign_definite: is_sign_definite(&s.u),
            field: s.u,
            field_file: None,
            strategy: self.strategy,
            group: self.group,
            p: params.p(),
            half_width: grid.half_width(),
            n: grid.n(),
            converged: res <= self.cfg.grad_tol,
            label: label.to_string(),
            breakdown,
            grad_residual: res,
            iterations: trace.iterations,
            newton_iterations: trace.newton_iterations,
            minres_iterations: trace.minres_iterations,
            t_history: trace.t,
            i_history: trace.i,
            j_history: trace.j,
            p_history: trace.p,
            mass_history: trace.mass,
            residual_history: trace.residual,
            newton_residuals: trace.newton,
            minimax_energy: minimax,
            symmetry_residual,
            symmetry_floor,
            sign_change,
        })
    }
}

/// Descent on the Nehari–Pohozaev set, `p ≥ 3`. Starts from the configured
/// (or default) guess projected onto the set.
pub fn solve_fiber_projected(
    params: Params,
    cfg: &SolverConfig,
    group: Option<SymmetryGroup>,
) -> Result<SolveReport> {
    if !params.p_ge_3() {
        return Err(Error::ExponentBelowThree(params.p()));
    }
    let engine = Engine::new(params, cfg, group, Strategy::FiberProjected)?;
    let u0 = initial_field(&params, cfg, group)?;
    engine.run(u0)
}

/// Damped gradient flow from `u0` for any `p > 2`, with a local fiber
/// correction that keeps the iterate near the mountain-pass level. A start
/// below the pass flows to zero and is reported as a collapse.
pub fn solve_damped_flow(
    params: Params,
    cfg: &SolverConfig,
    group: Option<SymmetryGroup>,
    u0: Field,
) -> Result<SolveReport> {
    if *u0.grid() != *params.grid() {
        return Err(Error::GridMismatch);
    }
    if u0.is_zero() {
        return Err(Error::ZeroField);
    }
    let engine = Engine::new(params, cfg, group, Strategy::DampedFlow)?;
    let u0 = match group {
        Some(g) => symmetry::symmetrize(&u0, g),
        None => u0,
    };
    engine.run(u0)
}

/// Symmetric solves for `Dihedral(3ⁿ)`, `n = 1..=n_max`, run concurrently.
/// Any level that does not converge is an error.
pub fn dihedral_ladder(params: Params, cfg: &SolverConfig, n_max: u32) -> Result<Vec<SolveReport>> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let reports = par::map_range(n_max as usize, |i| {
        let group = Some(SymmetryGroup::Dihedral(3u32.pow(i as u32 + 1)));
        if params.p_ge_3() {
            solve_fiber_projected(params, cfg, group)
        } else {
            let u0 = prescale(&initial_field(&params, cfg, group)?, &params)?;
            solve_damped_flow(params, cfg, group, u0)
        }
    });
    let mut out = Vec::with_capacity(reports.len());
    for r in reports {
        let r = r?;
        if !r.converged {
            return Err(Error::NonConvergence {
                iterations: r.iterations + r.newton_iterations,
                residual: r.grad_residual,
            });
        }
        out.push(r);
    }
    Ok(out)
}

/// Ladder properties that fail: energies must not decrease by more than
/// `slack`, and every level must change sign and be clearly nonradial.
pub fn ladder_violations(reports: &[SolveReport], slack: f64) -> Vec<String> {
    let mut v = Vec::new();
    for w in reports.windows(2) {
        if w[1].energy() < w[0].energy() - slack {
            v.push(format!(
                "energy decreases from {} ({:.9}) to {} ({:.9})",
                fmt_group(w[0].group),
                w[0].energy(),
                fmt_group(w[1].group),
                w[1].energy()
            ));
        }
    }
    for r in reports {
        let name = fmt_group(r.group);
        if !r.sign_change.as_ref().is_some_and(|c| c.both_signs) {
            v.push(format!("{name}: solution does not change sign"));
        }
        let radial = symmetry::invariance_residual(&r.field, SymmetryGroup::Radial);
        if radial <= RADIAL_FLOOR {
            v.push(format!("{name}: radial residual {radial:.3e} not above {RADIAL_FLOOR}"));
        }
    }
    v
}

fn fmt_group(g: Option<SymmetryGroup>) -> String {
    g.map(|g| g.to_string()).unwrap_or_else(|| "none".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn small() -> (Params, SolverConfig) {
        let g = GridSpec::new(8.0, 48).unwrap();
        let cfg = SolverConfig {
            grad_tol: 1e-8,
            ..SolverConfig::default()
        };
        (Params::new(3.0, g).unwrap(), cfg)
    }

    #[test]
    fn fiber_projected_refuses_low_exponent() {
        let g = GridSpec::new(8.0, 16).unwrap();
        let p = Params::new(2.5, g).unwrap();
        assert!(matches!(
            solve_fiber_projected(p, &SolverConfig::default(), None),
            Err(Error::ExponentBelowThree(_))
        ));
    }

    #[test]
    fn small_ground_state_converges() {
        let (params, cfg) = small();
        let r = solve_fiber_projected(params, &cfg, None).unwrap();
        assert!(r.converged, "residual {}", r.grad_residual);
        assert!(r.sign_definite);
        assert!(r.i_history.windows(2).all(|w| w[1] <= w[0]));
        assert!((r.minimax_energy - r.energy()).abs() <= 1e-3 * r.energy().abs());
    }

    #[test]
    fn tiny_start_collapses() {
        let (params, cfg) = small();
        let u0 = InitialGuess::gaussian(1.0, 1e-3).build(*params.grid(), 0).unwrap();
        assert!(matches!(
            solve_damped_flow(params, &cfg, None, u0),
            Err(Error::Collapse { .. })
        ));
    }

    #[test]
    fn minimax_bounds_energy() {
        let (params, _) = small();
        let u = InitialGuess::gaussian(1.3, 0.7).build(*params.grid(), 0).unwrap();
        let e = crate::energy::energy(&u, &params).unwrap().i;
        assert!(minimax_energy(&u, &params).unwrap() >= e);
        assert!(matches!(
            minimax_energy(&Field::zeros(*params.grid()), &params),
            Err(Error::ZeroField)
        ));
    }
}
