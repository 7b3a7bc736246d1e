//! Closed-form test functions in their native units.
//!
//! Each takes a point already mapped to the function's native domain.

use std::f64::consts::PI;

pub fn borehole(x: &[f64]) -> f64 {
    let (rw, r, tu, hu, tl, hl, l, kw) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]);
    let log_ratio = (r / rw).ln();
    let denom = log_ratio * (1.0 + 2.0 * l * tu / (log_ratio * rw * rw * kw) + tu / tl);
    2.0 * PI * tu * (hu - hl) / denom
}

pub fn ishigami(x: &[f64]) -> f64 {
    const A: f64 = 7.0;
    const B: f64 = 0.1;
    x[0].sin() + A * x[1].sin().powi(2) + B * x[2].powi(4) * x[0].sin()
}

/// Friedman's five-input benchmark; extra coordinates are ignored.
pub fn friedman(x: &[f64]) -> f64 {
    10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

pub fn piston(x: &[f64]) -> f64 {
    let (m, s, v0, k, p0, ta, t0) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6]);
    let a = p0 * s + 19.62 * m - k * v0 / s;
    let v = s / (2.0 * k) * ((a * a + 4.0 * k * p0 * v0 * ta / t0).sqrt() - a);
    2.0 * PI * (m / (k + s * s * p0 * v0 * ta / (t0 * v * v))).sqrt()
}

pub fn otl_circuit(x: &[f64]) -> f64 {
    let (rb1, rb2, rf, rc1, rc2, beta) = (x[0], x[1], x[2], x[3], x[4], x[5]);
    let vb1 = 12.0 * rb2 / (rb1 + rb2);
    let g = beta * (rc2 + 9.0);
    (vb1 + 0.74) * g / (g + rf) + 11.35 * rf / (g + rf) + 0.74 * rf * g / ((g + rf) * rc1)
}

pub fn wing_weight(x: &[f64]) -> f64 {
    let (sw, wfw, a, sweep_deg, q, taper, tc, nz, wdg, wp) =
        (x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8], x[9]);
    let cos_sweep = sweep_deg.to_radians().cos();
    0.036
        * sw.powf(0.758)
        * wfw.powf(0.0035)
        * (a / (cos_sweep * cos_sweep)).powf(0.6)
        * q.powf(0.006)
        * taper.powf(0.04)
        * (100.0 * tc / cos_sweep).powf(-0.3)
        * (nz * wdg).powf(0.49)
        + sw * wp
}

/// Distance of the end of a four-segment planar arm from the origin.
/// Inputs: four joint angles, then four segment lengths.
pub fn robot_arm(x: &[f64]) -> f64 {
    let (mut u, mut v, mut angle) = (0.0, 0.0, 0.0);
    for i in 0..4 {
        angle += x[i];
        u += x[4 + i] * angle.cos();
        v += x[4 + i] * angle.sin();
    }
    (u * u + v * v).sqrt()
}

pub fn gramacy_lee(x: &[f64]) -> f64 {
    let t = x[0];
    (10.0 * PI * t).sin() / (2.0 * t) + (t - 1.0).powi(4)
}

/// Dette and Pepelyshev's curved three-input function.
pub fn dette_pepelyshev(x: &[f64]) -> f64 {
    4.0 * (x[0] - 2.0 + 8.0 * x[1] - 8.0 * x[1] * x[1]).powi(2)
        + (3.0 - 4.0 * x[1]).powi(2)
        + 16.0 * (x[2] + 1.0).sqrt() * (2.0 * x[2] - 1.0).powi(2)
}

pub fn michalewicz(x: &[f64]) -> f64 {
    const M: i32 = 10;
    -x.iter()
        .enumerate()
        .map(|(i, &xi)| xi.sin() * (((i + 1) as f64) * xi * xi / PI).sin().powi(2 * M))
        .sum::<f64>()
}

pub fn damped_cosine(x: &[f64]) -> f64 {
    (-1.4 * x[0]).exp() * (3.5 * PI * x[0]).cos()
}

/// Welch et al. 20-input screening function; inputs 8 and 16 are inert.
pub fn welch(x: &[f64]) -> f64 {
    5.0 * x[11] / (1.0 + x[0]) + 5.0 * (x[3] - x[19]).powi(2) + x[4] + 40.0 * x[18].powi(3)
        - 5.0 * x[18]
        + 0.05 * x[1]
        + 0.08 * x[2]
        - 0.03 * x[5]
        + 0.03 * x[6]
        - 0.09 * x[8]
        - 0.01 * x[9]
        - 0.07 * x[10]
        + 0.25 * x[12] * x[12]
        - 0.04 * x[13]
        + 0.06 * x[14]
        - 0.01 * x[16]
        - 0.03 * x[17]
}

/// Lim et al. polynomial on the unit square.
pub fn lim_polynomial(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    9.0 + 2.5 * a - 17.5 * b + 2.5 * a * b + 19.0 * b * b - 7.5 * a.powi(3) - 2.5 * a * b * b
        - 5.5 * b.powi(4)
        + a.powi(3) * b * b
}

pub fn oakley_ohagan_1d(x: &[f64]) -> f64 {
    5.0 + x[0] + x[0].cos()
}

/// A ramp with a unit-height jump across `x2 = 0.5`.
pub fn step_2d(x: &[f64]) -> f64 {
    x[0] + if x[1] > 0.5 { 2.0 } else { 0.0 }
}

pub fn constant_one(_x: &[f64]) -> f64 {
    1.0
}

pub fn constant_zero(_x: &[f64]) -> f64 {
    0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_optima_and_values() {
        assert_eq!(ishigami(&[0.0, 0.0, 0.0]), 0.0);
        assert!((ishigami(&[PI / 2.0, PI / 2.0, 1.0]) - (1.0 + 7.0 + 0.1)).abs() < 1e-12);
        // Michalewicz 2-D global minimum -1.8013 at (2.20, 1.57).
        assert!((michalewicz(&[2.20, 1.57]) + 1.8013).abs() < 1e-3);
        assert_eq!(friedman(&[0.0, 0.0, 0.5, 0.0, 0.0]), 0.0);
        assert_eq!(damped_cosine(&[0.0]), 1.0);
        // Gramacy-Lee at x = 1: sin(10 pi) / 2 + 0.
        assert!(gramacy_lee(&[1.0]).abs() < 1e-14);
        assert_eq!(robot_arm(&[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]), 4.0);
    }
}
