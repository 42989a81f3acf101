//! Finite-interval boundary m-functions on [k0, k1] and their Weyl circles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CmvError, Result};
use crate::transfer::{build_numeric_family, expected_wronskian, is_odd, NumericFamily};
use crate::verblunsky::{Side, VerblunskySequence};
use crate::C64;

/// Number of boundary phases sampled for the on-circle statistic.
pub const DEFAULT_PHASES: usize = 12;

fn check(k0: i64, k1: i64, z: C64) -> Result<()> {
    if k1 <= k0 {
        return Err(CmvError::Precondition(format!(
            "need k1 > k0, got k0 = {k0}, k1 = {k1}"
        )));
    }
    if z.norm() == 0.0 {
        return Err(CmvError::Domain("z = 0 is excluded".into()));
    }
    if (z.norm() - 1.0).abs() < 1e-12 {
        return Err(CmvError::PoleRegion(format!(
            "|z| = 1 gives a degenerate disk (z = {z})"
        )));
    }
    Ok(())
}

/// Coefficients (p, q, r, s) and the sign of the phase such that
/// m(s1) = -(q + s e^{i sign s1}) / (p + r e^{i sign s1}).
/// For k1 even p and q carry the weight z^{-1} and the phase enters as e^{-i s1}.
fn circle_coefficients(fam: &NumericFamily, k1: i64) -> Result<(C64, C64, C64, C64, f64)> {
    let (p, r) = fam.pr(k1)?;
    let (q, s) = fam.qs(k1)?;
    Ok(if is_odd(k1) {
        (p, q, r, s, 1.0)
    } else {
        (p / fam.z, q / fam.z, r, s, -1.0)
    })
}

fn eval_circle(c: (C64, C64, C64, C64, f64), s1: f64) -> Result<C64> {
    let (p, q, r, s, sign) = c;
    let e = C64::from_polar(1.0, sign * s1);
    let den = p + r * e;
    if den.norm() <= 1e-13 * (p.norm() + r.norm()) {
        return Err(CmvError::Tangential(format!(
            "boundary phase s1 = {s1} makes the denominator vanish"
        )));
    }
    Ok(-(q + s * e) / den)
}

/// Boundary m-function m_{+,s1}(z, k1, k0) with s0 = 0.
pub fn boundary_m(seq: &VerblunskySequence, k0: i64, k1: i64, z: C64, s1: f64) -> Result<C64> {
    check(k0, k1, z)?;
    let fam = build_numeric_family(seq, k0, Side::Plus, z, k0, k1)?;
    eval_circle(circle_coefficients(&fam, k1)?, s1)
}

/// Circle traced by -(q + s e^{it}) / (p + r e^{it}) computed directly, with the given
/// value of |p|^2 - |r|^2 (pass None to form it by subtraction).
pub fn generic_circle(p: C64, q: C64, r: C64, s: C64, denom: Option<f64>) -> Result<(C64, f64)> {
    let d = denom.unwrap_or(p.norm_sqr() - r.norm_sqr());
    if d.abs() < 1e-300 || r.norm() == 0.0 {
        return Err(CmvError::Singular(
            "|p| = |r|: the map does not describe a circle".into(),
        ));
    }
    let w = q * r - p * s;
    Ok((-s / r - p.conj() / r * w / d, w.norm() / d.abs()))
}

/// Circumcircle through three points.
pub fn circumcircle(a: C64, b: C64, c: C64) -> Result<(C64, f64)> {
    let w = (c - a) / (b - a);
    if w.im.abs() < 1e-14 * w.norm().max(1.0) {
        return Err(CmvError::Singular("collinear points".into()));
    }
    let center = (b - a) * (w - w.norm_sqr()) / C64::new(0.0, 2.0 * w.im) + a;
    Ok((center, (a - center).norm()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeylDisk {
    pub z: C64,
    pub k0: i64,
    pub k1: i64,
    pub k0_odd: bool,
    pub k1_odd: bool,
    pub center: C64,
    pub radius: f64,
    /// sum_{k=k0}^{k1} |p_+(z, k, k0)|^2
    pub p_energy: f64,
    /// circumcircle through the samples at s1 = 0, 2pi/3, 4pi/3; absent once the radius drops
    /// below the rounding level of the samples
    pub fit_center: Option<C64>,
    pub fit_radius: Option<f64>,
    /// max over the sampled phases of ||m - C| - R| / (1 + R)
    pub on_circle_residual: f64,
    pub energy_residual: f64,
}

/// Parity-table numerator of the radius: |W| of the weighted coefficients.
pub fn radius_numerator(k0: i64, k1: i64, z: C64) -> f64 {
    match (is_odd(k0), is_odd(k1)) {
        (true, true) => 2.0 * z.norm(),
        (false, true) | (true, false) => 2.0,
        (false, false) => 2.0 / z.norm(),
    }
}

/// Relative residual of
///   (1 - |z|^{-2}) sum |p_+|^2 = |p_+(k1)|^2 - |r_+(k1)|^2            (k1 odd)
///                              = |r_+(k1)|^2 - |z|^{-2} |p_+(k1)|^2    (k1 even)
pub fn energy_identity_residual(fam: &NumericFamily, k1: i64) -> Result<f64> {
    let z2 = fam.z.norm_sqr();
    let mut sum = 0.0;
    for k in fam.k0..=k1 {
        sum += fam.pr(k)?.0.norm_sqr();
    }
    let lhs = (1.0 - 1.0 / z2) * sum;
    let (p, r) = fam.pr(k1)?;
    let (pp, rr) = (p.norm_sqr(), r.norm_sqr());
    let rhs = if is_odd(k1) { pp - rr } else { rr - pp / z2 };
    Ok((lhs - rhs).abs() / lhs.abs().max(pp.max(rr)).max(1.0))
}

/// Weyl disk of [k0, k1] at z, sampling `phases` boundary phases for the diagnostics.
pub fn weyl_disk_with(
    seq: &VerblunskySequence,
    k0: i64,
    k1: i64,
    z: C64,
    phases: usize,
) -> Result<WeylDisk> {
    check(k0, k1, z)?;
    let fam = build_numeric_family(seq, k0, Side::Plus, z, k0, k1)?;
    let sum: f64 = (k0..=k1).map(|k| fam.p[(k - k0) as usize].norm_sqr()).sum();
    let g = 1.0 - 1.0 / z.norm_sqr();
    let radius = radius_numerator(k0, k1, z) / (g.abs() * sum);

    // |p|^2 - |r|^2 of the weighted coefficients, taken from the energy identity
    let denom = if is_odd(k1) { g * sum } else { -g * sum };
    let cc = circle_coefficients(&fam, k1)?;
    let (p, _, r, s, _) = cc;
    // q r - p s of the weighted coefficients from the Wronskian of the family
    let w = -expected_wronskian(k0, Side::Plus, k1, z)
        / if is_odd(k1) { C64::new(1.0, 0.0) } else { z };
    if r.norm() == 0.0 {
        return Err(CmvError::Singular("r_+(k1) vanishes".into()));
    }
    let center = -s / r - p.conj() / r * w / denom;

    let phases = phases.max(3);
    let samples: Vec<C64> = (0..phases)
        .map(|j| eval_circle(cc, 2.0 * PI * j as f64 / phases as f64))
        .collect::<Result<_>>()?;
    let on_circle_residual = samples
        .iter()
        .map(|m| ((m - center).norm() - radius).abs() / (1.0 + radius))
        .fold(0.0, f64::max);
    let third = |j: usize| eval_circle(cc, 2.0 * PI * j as f64 / 3.0);
    let (fit_center, fit_radius) = if radius > 1e-8 * (1.0 + center.norm()) {
        let (c, r) = circumcircle(third(0)?, third(1)?, third(2)?)?;
        (Some(c), Some(r))
    } else {
        (None, None)
    };
    Ok(WeylDisk {
        z,
        k0,
        k1,
        k0_odd: is_odd(k0),
        k1_odd: is_odd(k1),
        center,
        radius,
        p_energy: sum,
        fit_center,
        fit_radius,
        on_circle_residual,
        energy_residual: energy_identity_residual(&fam, k1)?,
    })
}

pub fn weyl_disk(seq: &VerblunskySequence, k0: i64, k1: i64, z: C64) -> Result<WeylDisk> {
    weyl_disk_with(seq, k0, k1, z, DEFAULT_PHASES)
}

/// Radii R(z, k1, k0) along an increasing list of k1.
pub fn limit_point_sweep(
    seq: &VerblunskySequence,
    k0: i64,
    z: C64,
    k1_list: &[i64],
) -> Result<Vec<WeylDisk>> {
    if k1_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CmvError::Precondition(
            "k1 list must be strictly increasing".into(),
        ));
    }
    k1_list
        .iter()
        .map(|&k1| weyl_disk(seq, k0, k1, z))
        .collect()
}

/// Largest increase of the radius after the first `skip` samples.
pub fn max_increase_after(radii: &[f64], skip: usize) -> f64 {
    radii
        .iter()
        .skip(skip.saturating_sub(1))
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max)
}
