//! Closed-form simulators.

use std::f64::consts::{PI, SQRT_2};

pub(crate) fn quartic_polynomial(x: &[f64]) -> f64 {
    2.5 - 0.2357 * (x[0] - x[1]) + 0.00463 * (x[0] + x[1] - 20.0).powi(4)
}

pub(crate) fn sine_product(x: &[f64]) -> f64 {
    (2.5 * x[0]).sin() + 2.0 - (x[0] * x[0] + 4.0) * (x[1] - 1.0) / 20.0
}

/// Branch offset of the four-branch series system.
pub const SERIES_SYSTEM_K: f64 = 7.0;

pub(crate) fn four_branch(x: &[f64]) -> f64 {
    let (a, b) = (x[0] - x[1], x[0] + x[1]);
    let q = 3.0 + 0.1 * a * a;
    let k = SERIES_SYSTEM_K / SQRT_2;
    (q - b / SQRT_2).min(q + b / SQRT_2).min(a + k).min(-a + k)
}

pub(crate) fn two_plane(x: &[f64]) -> f64 {
    (x[0] - x[1]).min(x[0] + x[1])
}

pub(crate) fn parabolic_series(x: &[f64]) -> f64 {
    let g1 = 2.0 - x[1] + (-x[0] * x[0] / 10.0).exp() + (x[0] / 5.0).powi(4);
    let g2 = 4.5 - x[0] * x[1];
    g1.min(g2)
}

pub(crate) fn rastrigin(x: &[f64]) -> f64 {
    10.0 - x.iter().map(|v| v * v - 5.0 * (2.0 * PI * v).cos()).sum::<f64>()
}

pub const ISHIGAMI_A: f64 = 7.0;
pub const ISHIGAMI_B: f64 = 0.1;

pub(crate) fn ishigami(x: &[f64]) -> f64 {
    let s = x[1].sin();
    x[0].sin() + ISHIGAMI_A * s * s + ISHIGAMI_B * x[2].powi(4) * x[0].sin()
}

/// Tube under torsion and bending: `x = (yield stress, diameter, force, length, torque)`.
pub(crate) fn tube_stress(x: &[f64]) -> f64 {
    let bending = x[2] * x[2] * x[3] * x[3] / 16.0;
    x[0] - 32.0 / (PI * x[1].powi(3)) * (bending + x[4] * x[4]).sqrt()
}

/// Nonlinear oscillator: `x = (m, c1, c2, r, F1, t1)`.
pub(crate) fn oscillator(x: &[f64]) -> f64 {
    let (m, c1, c2, r, f1, t1) = (x[0], x[1], x[2], x[3], x[4], x[5]);
    let w0 = ((c1 + c2) / m).sqrt();
    3.0 * r - (2.0 * f1 / (m * w0 * w0) * (w0 * t1 / 2.0).sin()).abs()
}

/// Cylindrical shell buckling margin.
pub(crate) fn shell_buckling(x: &[f64]) -> f64 {
    let c = x[2].cos();
    let factor = (3.0 * (1.0 - 0.3f64.powi(2))).sqrt() / (PI * x[0] * x[1] * x[1] * c * c);
    1.0 - factor * (x[5] / 0.66 + x[4] / (0.41 * x[3]))
}

/// Rotating disk burst margin with a Weibull-distributed material factor.
pub(crate) fn disk_burst(x: &[f64]) -> f64 {
    let omega = x[3] * 2.0 * PI / 60.0;
    let denom = x[2] * omega * omega * (x[4].powi(3) - x[5].powi(3)) / (3.0 * 385.82 * (x[4] - x[5]));
    (x[0] * x[1] / denom).sqrt() - 0.37473
}

/// Frame plastic collapse margin; the leading ratio divides by `X3^3`.
pub(crate) fn frame_collapse(x: &[f64]) -> f64 {
    let (x1, x2, x3, x4, x5, x6, x7) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6]);
    let num = x4 * x4 - 4.0 * x5 * x6 * x7 * x7 + x4 * (x6 + 4.0 * x5 + 2.0 * x6 * x7);
    let den = x4 * x5 * (x4 + x6 + 2.0 * x6 * x7);
    15.59e4 - x1 * x2.powi(3) / (2.0 * x3.powi(3)) * num / den
}

/// Borehole flow rate: `x = (rw, r, Tu, Hu, Tl, Hl, L, Kw)`.
pub(crate) fn borehole(x: &[f64]) -> f64 {
    let (rw, r, tu, hu, tl, hl, l, kw) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]);
    let lr = (r / rw).ln();
    2.0 * PI * tu * (hu - hl) / (lr * (1.0 + 2.0 * l * tu / (lr * rw * rw * kw) + tu / tl))
}
