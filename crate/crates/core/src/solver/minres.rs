//! Preconditioned MINRES for symmetric, possibly indefinite systems.

pub(crate) struct MinresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `A x = b` from `x₀ = 0`. `apply_m` must be symmetric positive definite.
pub(crate) fn minres<A, M>(apply_a: A, apply_m: M, b: &[f64], rtol: f64, max_iters: usize) -> MinresOutcome
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = apply_m(&r1);
    let beta1 = dot(&r1, &y).max(0.0).sqrt();
    if beta1 == 0.0 {
        return MinresOutcome {
            x,
            iterations: 0,
        };
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut iterations = 0;
    for itn in 1..=max_iters {
        iterations = itn;
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|t| s * t).collect();
        y = apply_a(&v);
        if itn >= 2 {
            let f = beta / oldb;
            y.iter_mut().zip(&r1).for_each(|(a, b)| *a -= f * b);
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        y.iter_mut().zip(&r2).for_each(|(a, b)| *a -= f * b);
        r1 = std::mem::replace(&mut r2, y);
        y = apply_m(&r2);
        oldb = beta;
        beta = dot(&r2, &y);
        if beta < 0.0 {
            // preconditioner lost definiteness numerically; stop with what we have
            break;
        }
        beta = beta.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
        w = v
            .iter()
            .zip(&w1)
            .zip(&w2)
            .map(|((vi, a), b)| (vi - oldeps * a - delta * b) * denom)
            .collect();
        x.iter_mut().zip(&w).for_each(|(xi, wi)| *xi += phi * wi);

        if phibar <= rtol * beta1 || beta == 0.0 {
            break;
        }
    }
    MinresOutcome {
        x,
        iterations,
    }
}
