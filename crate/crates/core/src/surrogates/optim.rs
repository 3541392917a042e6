//! Quasi-Newton minimizer used for kernel hyperparameters.

pub(crate) trait Objective {
    /// Objective value at `x`, or `None` where it cannot be evaluated.
    fn value(&mut self, x: &[f64]) -> Option<f64>;
    /// Gradient at the point passed to the most recent successful `value` call.
    fn gradient(&mut self, x: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;
const MAX_STEP: f64 = 2.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with Armijo backtracking on an unconstrained parameterization.
pub(crate) fn bfgs<O: Objective>(obj: &mut O, x0: &[f64], max_iterations: usize) -> Option<Minimum> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut f = obj.value(&x)?;
    let mut g = obj.gradient(&x);
    let mut h = identity(n);
    for _ in 0..max_iterations {
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i], &g)).collect();
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            h = identity(n);
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
            if !(slope < 0.0) {
                break;
            }
        }
        let longest = p.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if longest > MAX_STEP {
            let s = MAX_STEP / longest;
            p.iter_mut().for_each(|v| *v *= s);
            slope *= s;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            if let Some(fv) = obj.value(&xn) {
                if fv <= f + ARMIJO * step * slope {
                    accepted = Some((xn, fv));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else { break };
        let gn = obj.gradient(&xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        let df = f - fnew;
        x = xn;
        g = gn;
        let fprev = f;
        f = fnew;
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
            bfgs_update(&mut h, &s, &yv, sy);
        }
        let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if df.abs() <= 1e-10 * (1.0 + fprev.abs()) || gmax < 1e-7 {
            break;
        }
    }
    Some(Minimum { x, value: f })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Inverse-Hessian update `H <- (I - rho s y') H (I - rho y s') + rho s s'`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
