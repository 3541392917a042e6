//! Linear story-shear building under base excitation.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ground_motion::GroundMotionRecord;
use crate::{Error, Result};

pub const STORIES: usize = 10;

/// Story masses (kg), bottom to top.
pub const TABLE_MASSES: [f64; STORIES] = [2.82e5, 2.76e5, 2.76e5, 2.76e5, 2.76e5, 2.76e5, 2.76e5, 2.76e5, 2.76e5, 2.76e5];
/// Story stiffnesses (N/m), bottom to top.
pub const TABLE_STIFFNESSES: [f64; STORIES] =
    [1.007e8, 1.358e8, 1.338e8, 1.330e8, 1.228e8, 1.248e8, 1.237e8, 1.223e8, 1.208e8, 1.187e8];
/// Story heights (m), bottom to top.
pub const TABLE_HEIGHTS: [f64; STORIES] = [5.49, 3.96, 3.96, 3.96, 3.96, 3.96, 3.96, 3.96, 3.96, 3.96];
pub const MASS_COV: f64 = 0.02;
pub const STIFFNESS_COV: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearBuildingParams {
    pub story_masses: Vec<f64>,
    pub story_stiffnesses: Vec<f64>,
    /// Rayleigh damping ratio on the first two modes.
    pub damping_ratio: f64,
    pub heights: Vec<f64>,
}

impl ShearBuildingParams {
    /// Mean (tabulated) structure with 5% damping.
    pub fn table() -> Self {
        Self {
            story_masses: TABLE_MASSES.to_vec(),
            story_stiffnesses: TABLE_STIFFNESSES.to_vec(),
            damping_ratio: 0.05,
            heights: TABLE_HEIGHTS.to_vec(),
        }
    }

    /// Inputs ordered as masses then stiffnesses, story 1 first.
    pub fn from_inputs(x: &[f64]) -> Result<Self> {
        if x.len() != 2 * STORIES {
            return Err(Error::domain(format!("expected {} inputs, got {}", 2 * STORIES, x.len())));
        }
        let mut p = Self::table();
        p.story_masses = x[..STORIES].to_vec();
        p.story_stiffnesses = x[STORIES..].to_vec();
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.story_masses.len();
        if n == 0 || self.story_stiffnesses.len() != n {
            return Err(Error::domain("mass and stiffness vectors must be nonempty and equal length"));
        }
        if self
            .story_masses
            .iter()
            .chain(&self.story_stiffnesses)
            .any(|v| !(*v > 0.0) || !v.is_finite())
        {
            return Err(Error::Simulation("masses and stiffnesses must be positive".into()));
        }
        if !(self.damping_ratio >= 0.0) {
            return Err(Error::domain("damping ratio must be nonnegative"));
        }
        Ok(())
    }

    fn stories(&self) -> usize {
        self.story_masses.len()
    }

    /// Tridiagonal stiffness as (diagonal, off-diagonal).
    fn stiffness(&self) -> (Vec<f64>, Vec<f64>) {
        let k = &self.story_stiffnesses;
        let n = k.len();
        let diag = (0..n).map(|i| k[i] + if i + 1 < n { k[i + 1] } else { 0.0 }).collect();
        let off = (1..n).map(|i| -k[i]).collect();
        (diag, off)
    }

    /// Undamped circular frequencies, ascending.
    pub fn natural_frequencies(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let n = self.stories();
        let (d, o) = self.stiffness();
        let s: Vec<f64> = self.story_masses.iter().map(|m| 1.0 / m.sqrt()).collect();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = d[i] * s[i] * s[i];
            if i + 1 < n {
                a[(i, i + 1)] = o[i] * s[i] * s[i + 1];
                a[(i + 1, i)] = a[(i, i + 1)];
            }
        }
        let eig = SymmetricEigen::new(a);
        let mut w2: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        w2.sort_by(f64::total_cmp);
        if w2[0] <= 0.0 {
            return Err(Error::Simulation("stiffness matrix is not positive definite".into()));
        }
        Ok(w2.into_iter().map(f64::sqrt).collect())
    }

    pub fn fundamental_period(&self) -> Result<f64> {
        Ok(2.0 * std::f64::consts::PI / self.natural_frequencies()?[0])
    }

    /// Mass and stiffness proportional coefficients `(a0, a1)`.
    pub fn rayleigh_coefficients(&self) -> Result<(f64, f64)> {
        let w = self.natural_frequencies()?;
        let (w1, w2) = (w[0], *w.get(1).unwrap_or(&w[0]));
        let z = self.damping_ratio;
        Ok((2.0 * z * w1 * w2 / (w1 + w2), 2.0 * z / (w1 + w2)))
    }
}

/// Factored symmetric tridiagonal system `L D L^T`.
struct Tridiagonal {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl Tridiagonal {
    fn factor(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        d[0] = diag[0];
        for i in 1..n {
            if !(d[i - 1] > 0.0) {
                return Err(Error::Simulation("effective stiffness is not positive definite".into()));
            }
            l[i - 1] = off[i - 1] / d[i - 1];
            d[i] = diag[i] - l[i - 1] * off[i - 1];
        }
        if !(d[n - 1] > 0.0) {
            return Err(Error::Simulation("effective stiffness is not positive definite".into()));
        }
        Ok(Self { d, l })
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 1..n {
            b[i] -= self.l[i - 1] * b[i - 1];
        }
        for i in 0..n {
            b[i] /= self.d[i];
        }
        for i in (0..n - 1).rev() {
            b[i] -= self.l[i] * b[i + 1];
        }
    }
}

fn tri_mul(diag: &[f64], off: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let mut s = diag[i] * x[i];
        if i > 0 {
            s += off[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            s += off[i] * x[i + 1];
        }
        out[i] = s;
    }
}

/// Newmark average-acceleration integration of `M u'' + C u' + K u = -M 1 a_g`
/// with the step of the record. `initial` sets the displacement at t = 0;
/// `visit` sees the relative displacement after each step, including t = 0.
pub fn integrate<F: FnMut(&[f64])>(
    params: &ShearBuildingParams,
    ground: &[f64],
    dt: f64,
    initial: Option<&[f64]>,
    mut visit: F,
) -> Result<()> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::domain("time step must be positive"));
    }
    let n = params.stories();
    let m = &params.story_masses;
    let (kd, ko) = params.stiffness();
    let (a0, a1) = if params.damping_ratio > 0.0 {
        params.rayleigh_coefficients()?
    } else {
        (0.0, 0.0)
    };
    let cd: Vec<f64> = (0..n).map(|i| a0 * m[i] + a1 * kd[i]).collect();
    let co: Vec<f64> = ko.iter().map(|k| a1 * k).collect();
    let (beta, gamma) = (0.25, 0.5);
    let c1 = 1.0 / (beta * dt * dt);
    let c2 = gamma / (beta * dt);
    let ed: Vec<f64> = (0..n).map(|i| kd[i] + c2 * cd[i] + c1 * m[i]).collect();
    let eo: Vec<f64> = (0..n - 1).map(|i| ko[i] + c2 * co[i]).collect();
    let eff = Tridiagonal::factor(&ed, &eo)?;

    let mut u = match initial {
        Some(u0) if u0.len() == n => u0.to_vec(),
        Some(_) => return Err(Error::domain("initial displacement has the wrong length")),
        None => vec![0.0; n],
    };
    let mut v = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    // Initial acceleration from equilibrium.
    tri_mul(&kd, &ko, &u, &mut tmp);
    let g0 = ground.first().copied().unwrap_or(0.0);
    let mut a: Vec<f64> = (0..n).map(|i| -g0 - tmp[i] / m[i]).collect();
    visit(&u);
    let mut rhs = vec![0.0; n];
    let mut cv = vec![0.0; n];
    let (b1, b2) = (1.0 / (beta * dt), 0.5 / beta - 1.0);
    let (g1, g2) = (gamma / beta - 1.0, dt * (0.5 * gamma / beta - 1.0));
    for &ag in ground.iter().skip(1) {
        for i in 0..n {
            tmp[i] = c2 * u[i] + g1 * v[i] + g2 * a[i];
        }
        tri_mul(&cd, &co, &tmp, &mut cv);
        for i in 0..n {
            rhs[i] = -m[i] * ag + m[i] * (c1 * u[i] + b1 * v[i] + b2 * a[i]) + cv[i];
        }
        eff.solve(&mut rhs);
        for i in 0..n {
            let un = rhs[i];
            let an = c1 * (un - u[i]) - b1 * v[i] - b2 * a[i];
            v[i] += dt * ((1.0 - gamma) * a[i] + gamma * an);
            a[i] = an;
            u[i] = un;
        }
        visit(&u);
    }
    Ok(())
}

/// Peak absolute inter-story drift ratio (drift over story height) over time and stories.
pub fn shear_building_response(params: &ShearBuildingParams, record: &GroundMotionRecord) -> Result<f64> {
    if params.heights.len() != params.story_masses.len() || params.heights.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::domain("one positive height per story required"));
    }
    let inv_h: Vec<f64> = params.heights.iter().map(|h| 1.0 / h).collect();
    let mut peak = 0.0_f64;
    integrate(params, &record.accelerations, record.dt, None, |u| {
        let mut below = 0.0;
        for (&x, &ih) in u.iter().zip(&inv_h) {
            peak = peak.max((x - below).abs() * ih);
            below = x;
        }
    })?;
    if !peak.is_finite() {
        return Err(Error::Simulation("response diverged".into()));
    }
    Ok(peak)
}
