//! Caratheodory functions on the disk: Herglotz evaluation and inversion, radial diagnostics, the
//! exponential representation, reflectionless residuals and the arc-spectrum check for geometric
//! coefficient families.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CmvError, Result};
use crate::spectral::{eigen_unitary, normalize_angle, CircleMeasure};
use crate::verblunsky::{
    build_finite_cmv, generate_sequence, GeneratorSpec, Side, VerblunskySequence,
};
use crate::weyl::{SchurRoute, TailClosure, CIRCLE_TOL};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaratheodorySample {
    pub z: C64,
    pub value: C64,
    pub side: Option<Side>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArcKind {
    Open,
    Closed,
    /// (theta0, theta1]
    HalfOpen,
}

/// Arc of the circle from e^{i theta0} counterclockwise to e^{i theta1}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcSpec {
    pub theta0: f64,
    pub theta1: f64,
    pub kind: ArcKind,
}

impl ArcSpec {
    pub fn new(theta0: f64, theta1: f64, kind: ArcKind) -> Result<Self> {
        let w = theta1 - theta0;
        if !(w > 0.0 && w <= 2.0 * PI + 1e-12) {
            return Err(CmvError::Domain(format!("arc width {w} outside (0, 2pi]")));
        }
        Ok(ArcSpec {
            theta0,
            theta1,
            kind,
        })
    }

    pub fn closed(theta0: f64, theta1: f64) -> Result<Self> {
        Self::new(theta0, theta1, ArcKind::Closed)
    }

    pub fn width(&self) -> f64 {
        self.theta1 - self.theta0
    }

    /// Offset of the angle t from theta0, counterclockwise, in [0, 2pi).
    fn offset(&self, t: f64) -> f64 {
        normalize_angle(t - self.theta0)
    }

    /// Whether e^{it} lies on the arc widened by `fatten` at both ends.
    pub fn contains(&self, t: f64, fatten: f64) -> bool {
        if self.width() + 2.0 * fatten >= 2.0 * PI {
            return true;
        }
        let x = normalize_angle(t - self.theta0 + fatten);
        let w = self.width() + 2.0 * fatten;
        match self.kind {
            ArcKind::Closed => x <= w,
            ArcKind::Open => x > 0.0 && x < w,
            ArcKind::HalfOpen => x > 0.0 && x <= w,
        }
    }

    /// n equispaced angles strictly inside the arc, keeping `margin` from both ends.
    pub fn interior_grid(&self, n: usize, margin: f64) -> Result<Vec<f64>> {
        let w = self.width() - 2.0 * margin;
        if w <= 0.0 || n == 0 {
            return Err(CmvError::Domain("arc interior is empty".into()));
        }
        Ok((0..n)
            .map(|j| self.theta0 + margin + w * (j as f64 + 0.5) / n as f64)
            .collect())
    }
}

fn off_circle(z: C64) -> Result<()> {
    if (z.norm() - 1.0).abs() < CIRCLE_TOL {
        return Err(CmvError::PoleRegion(format!(
            "|z| = {} is on the unit circle",
            z.norm()
        )));
    }
    Ok(())
}

/// i c + integral of (zeta + z)/(zeta - z) d mu(zeta).
pub fn herglotz_eval(mu: &CircleMeasure, c: f64, z: C64) -> Result<C64> {
    off_circle(z)?;
    Ok(C64::new(0.0, c) + mu.integrate(|zeta| (zeta + z) / (zeta - z)))
}

/// Piecewise-constant measure on an angle partition: mass of (edges[i], edges[i+1]].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinnedMeasure {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
    pub r: f64,
}

impl BinnedMeasure {
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Index of the bin (edges[i], edges[i+1]] containing the angle t (taken mod 2pi from edges[0]).
    pub fn bin_of(&self, t: f64) -> Option<usize> {
        let t = self.edges[0] + normalize_angle(t - self.edges[0]);
        let t = if t == self.edges[0] { t + 2.0 * PI } else { t };
        (0..self.masses.len()).find(|&i| t > self.edges[i] && t <= self.edges[i + 1])
    }

    /// Piecewise-constant density form with uniform samples.
    pub fn to_circle_measure(&self, samples: usize) -> Result<CircleMeasure> {
        let mut values = vec![0.0; samples];
        for (m, v) in values.iter_mut().enumerate() {
            let t = 2.0 * PI * m as f64 / samples as f64;
            if let Some(i) = self.bin_of(t) {
                let w = self.edges[i + 1] - self.edges[i];
                *v = (self.masses[i] * 2.0 * PI / w).max(0.0);
            }
        }
        Ok(CircleMeasure {
            atoms: vec![],
            density: Some(crate::spectral::DensitySamples {
                grid_size: samples,
                values,
            }),
        })
    }
}

/// Uniform partition of [theta_start, theta_start + 2pi) into `bins` arcs.
pub fn uniform_edges(theta_start: f64, bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|i| theta_start + 2.0 * PI * i as f64 / bins as f64)
        .collect()
}

/// Arc masses (1/2pi) int Re f(r e^{i theta}) d theta over each cell of the partition, shifted by
/// delta, by composite trapezoid with step at most (1 - r)/8.
pub fn reconstruct_measure_shifted(
    f: &dyn Fn(C64) -> Result<C64>,
    edges: &[f64],
    r: f64,
    delta: f64,
) -> Result<BinnedMeasure> {
    if !(0.0..1.0).contains(&r) {
        return Err(CmvError::Domain(format!("radius {r} must lie in [0, 1)")));
    }
    if edges.len() < 2
        || edges.windows(2).any(|w| w[1] <= w[0])
        || edges[edges.len() - 1] - edges[0] > 2.0 * PI + 1e-12
    {
        return Err(CmvError::Domain(
            "edges must increase and span at most 2pi".into(),
        ));
    }
    let h_max = ((1.0 - r) / 8.0).min(1e-2);
    let mut masses = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        let (a, b) = (w[0] + delta, w[1] + delta);
        let m = ((b - a) / h_max).ceil().max(1.0) as usize;
        let h = (b - a) / m as f64;
        let mut acc = 0.0;
        for j in 0..=m {
            let t = a + h * j as f64;
            let v = f(C64::from_polar(r, t))?.re;
            acc += if j == 0 || j == m { 0.5 * v } else { v };
        }
        masses.push(acc * h / (2.0 * PI));
    }
    Ok(BinnedMeasure {
        edges: edges.to_vec(),
        masses,
        r,
    })
}

pub fn reconstruct_measure(
    f: &dyn Fn(C64) -> Result<C64>,
    edges: &[f64],
    r: f64,
) -> Result<BinnedMeasure> {
    reconstruct_measure_shifted(f, edges, r, 0.0)
}

/// Reconstruction at r = 1 - eps and r = 1 - eps/10, extrapolated linearly in eps to eps = 0.
pub fn reconstruct_measure_richardson(
    f: &dyn Fn(C64) -> Result<C64>,
    edges: &[f64],
    eps: f64,
) -> Result<BinnedMeasure> {
    let a = reconstruct_measure(f, edges, 1.0 - eps)?;
    let b = reconstruct_measure(f, edges, 1.0 - eps / 10.0)?;
    let masses = a
        .masses
        .iter()
        .zip(&b.masses)
        .map(|(x, y)| (10.0 * y - x) / 9.0)
        .collect();
    Ok(BinnedMeasure {
        edges: edges.to_vec(),
        masses,
        r: 1.0,
    })
}

/// Atomic measure binned on a partition (mod 2pi from edges[0]).
pub fn bin_atoms(mu: &CircleMeasure, edges: &[f64]) -> BinnedMeasure {
    let mut b = BinnedMeasure {
        edges: edges.to_vec(),
        masses: vec![0.0; edges.len() - 1],
        r: 1.0,
    };
    for (t, w) in mu.nodes() {
        if let Some(i) = b.bin_of(t) {
            b.masses[i] += w;
        }
    }
    b
}

/// Exact mass that the Poisson smoothing at radius r of a unit atom at angle t0 puts on the arc
/// (a, b), b - a <= 2pi.
pub fn poisson_arc_mass(t0: f64, a: f64, b: f64, r: f64) -> f64 {
    // antiderivative of (1/2pi) P_r(x): (1/pi) atan((1+r)/(1-r) tan(x/2)), continued across x = pi
    let k = (1.0 + r) / (1.0 - r);
    let prim = |x: f64| {
        let turns = ((x + PI) / (2.0 * PI)).floor();
        let y = x - 2.0 * PI * turns;
        (k * (y / 2.0).tan()).atan() / PI + turns
    };
    prim(b - t0) - prim(a - t0)
}

/// Re f(r e^{i theta}) on the given angles.
pub fn radial_ac_density(
    f: &dyn Fn(C64) -> Result<C64>,
    thetas: &[f64],
    r: f64,
) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&r) {
        return Err(CmvError::Domain(format!("radius {r} must lie in [0, 1)")));
    }
    thetas
        .iter()
        .map(|&t| Ok(f(C64::from_polar(r, t))?.re))
        .collect()
}

/// ((1 - r)/2) f(r e^{i theta0}), which tends to the point mass at e^{i theta0}.
pub fn point_mass_estimate(f: &dyn Fn(C64) -> Result<C64>, theta0: f64, r: f64) -> Result<C64> {
    if !(0.0..1.0).contains(&r) {
        return Err(CmvError::Domain(format!("radius {r} must lie in [0, 1)")));
    }
    Ok(0.5 * (1.0 - r) * f(C64::from_polar(r, theta0))?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpHerglotz {
    /// -Re ln f(0)
    pub d: f64,
    pub r: f64,
    /// (theta, Upsilon) with Upsilon = pi/2 + Im ln f(r e^{i theta}) along a continuous branch
    pub upsilon: Vec<(f64, f64)>,
}

/// Steps per ray in the branch tracking; a step is bisected while the argument jumps by more than pi/8.
const RAY_STEPS: usize = 256;

fn sample_on_ray(f: &dyn Fn(C64) -> Result<C64>, x: f64, theta: f64) -> Result<C64> {
    let v = f(C64::from_polar(x, theta))?;
    if v.norm() < 1e-12 {
        return Err(CmvError::Branch(format!(
            "|f| < 1e-12 on the ray at angle {theta}"
        )));
    }
    Ok(v)
}

fn arg_increment(
    f: &dyn Fn(C64) -> Result<C64>,
    theta: f64,
    x0: f64,
    v0: C64,
    x1: f64,
    v1: C64,
    depth: u32,
) -> Result<f64> {
    let jump = (v1 / v0).arg();
    if jump.abs() <= PI / 8.0 {
        return Ok(jump);
    }
    if depth == 0 {
        return Err(CmvError::Branch(format!(
            "argument of f cannot be tracked near radius {x1} at angle {theta}"
        )));
    }
    let xm = 0.5 * (x0 + x1);
    let vm = sample_on_ray(f, xm, theta)?;
    Ok(arg_increment(f, theta, x0, v0, xm, vm, depth - 1)?
        + arg_increment(f, theta, xm, vm, x1, v1, depth - 1)?)
}

fn tracked_arg(f: &dyn Fn(C64) -> Result<C64>, theta: f64, r: f64, f0: C64) -> Result<f64> {
    let mut arg = f0.arg();
    let (mut x, mut v) = (0.0, f0);
    for j in 1..=RAY_STEPS {
        let xn = r * j as f64 / RAY_STEPS as f64;
        let vn = sample_on_ray(f, xn, theta)?;
        arg += arg_increment(f, theta, x, v, xn, vn, 40)?;
        (x, v) = (xn, vn);
    }
    Ok(arg)
}

/// d and Upsilon at r = 1 - eps on the given angles; Upsilon must stay within [0, pi] up to 1e-6.
pub fn exp_herglotz(
    f: &dyn Fn(C64) -> Result<C64>,
    thetas: &[f64],
    eps: f64,
) -> Result<ExpHerglotz> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CmvError::Domain(format!("eps {eps} must lie in (0, 1)")));
    }
    let f0 = f(C64::new(0.0, 0.0))?;
    if f0.norm() < 1e-12 {
        return Err(CmvError::Branch("f(0) vanishes".into()));
    }
    let r = 1.0 - eps;
    let mut upsilon = Vec::with_capacity(thetas.len());
    for &t in thetas {
        let u = PI / 2.0 + tracked_arg(f, t, r, f0)?;
        if !(-1e-6..=PI + 1e-6).contains(&u) {
            return Err(CmvError::Branch(format!(
                "Upsilon({t}) = {u} leaves [0, pi]"
            )));
        }
        upsilon.push((t, u));
    }
    Ok(ExpHerglotz {
        d: -f0.norm().ln(),
        r,
        upsilon,
    })
}

/// max over k and theta of |M_+(r e^{i theta}, k) + conj(M_-(r e^{i theta}, k))|.
pub fn reflectionless_residual(
    route: &SchurRoute,
    ks: &[i64],
    r: f64,
    thetas: &[f64],
) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(CmvError::Domain(format!("radius {r} must lie in [0, 1)")));
    }
    let mut worst = 0.0f64;
    for &k in ks {
        for &t in thetas {
            let z = C64::from_polar(r, t);
            let mp = route.big_m(z, k, Side::Plus)?;
            let mm = route.big_m(z, k, Side::Minus)?;
            worst = worst.max((mp + mm.conj()).norm());
        }
    }
    Ok(worst)
}

/// Settings of the arc-spectrum check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BorgSettings {
    pub phase: f64,
    pub r: f64,
    pub grid: usize,
    /// fraction of the arc width kept clear at each end when sampling the residual
    pub margin_fraction: f64,
    /// seed and cap of the random control sequence
    pub control_seed: u64,
    pub control_cap: f64,
}

impl Default for BorgSettings {
    fn default() -> Self {
        BorgSettings {
            phase: 0.0,
            r: 1.0 - 1e-3,
            grid: 64,
            margin_fraction: 0.05,
            control_seed: 1,
            control_cap: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BorgReport {
    pub theta0: f64,
    pub theta1: f64,
    pub n: usize,
    pub eta: f64,
    pub containment_fraction: f64,
    pub max_interior_gap: f64,
    pub reflectionless_residual: f64,
    pub control_residual: f64,
    pub warnings: Vec<String>,
}

/// Largest gap between consecutive angles lying on the arc, measured from theta0.
pub fn max_gap_on_arc(arc: &ArcSpec, angles: &[f64]) -> f64 {
    let mut inside: Vec<f64> = angles
        .iter()
        .map(|&t| arc.offset(t))
        .filter(|&x| x <= arc.width())
        .collect();
    inside.sort_by(|a, b| a.partial_cmp(b).unwrap());
    inside.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// Schur route on [0, hi] with both tails continued geometrically from the last two coefficients.
pub fn geometric_route(seq: &VerblunskySequence, hi: i64) -> SchurRoute<'_> {
    SchurRoute {
        seq,
        lo: 0,
        hi,
        closure_lo: TailClosure::Geometric,
        closure_hi: TailClosure::Geometric,
    }
}

/// Builds alpha_k = alpha0 g^k on [0, n-1], checks that the eigenangles of the size-n truncation
/// fill the arc [theta0, theta1], and measures the reflectionless residual on the arc interior
/// against a random control.
pub fn borg_verify(
    theta0: f64,
    theta1: f64,
    n: usize,
    settings: &BorgSettings,
) -> Result<BorgReport> {
    if n < 64 {
        return Err(CmvError::Precondition(format!("n = {n} is below 64")));
    }
    let arc = ArcSpec::closed(theta0, theta1)?;
    let mut warnings = Vec::new();
    if arc.width() < 0.1 {
        warnings.push(format!(
            "arc width {} is below 0.1; the truncation cannot resolve it",
            arc.width()
        ));
    }
    let spec = GeneratorSpec::Geometric {
        theta0,
        theta1,
        phase: settings.phase,
    };
    let hi = n as i64 - 1;
    let seq = generate_sequence(&spec, -1, hi + 1)?;
    let u = build_finite_cmv(&seq, 0, hi, 0.0, 0.0)?;
    let angles = eigen_unitary(&u)?.angles();
    let eta = 10.0 / n as f64;
    let containment_fraction =
        angles.iter().filter(|&&t| arc.contains(t, eta)).count() as f64 / n as f64;
    let max_interior_gap = max_gap_on_arc(&arc, &angles);

    let thetas = arc.interior_grid(settings.grid, settings.margin_fraction * arc.width())?;
    let mid = n as i64 / 2;
    let ks: Vec<i64> = (mid - 2..=mid + 2).collect();
    let reflectionless_residual =
        reflectionless_residual(&geometric_route(&seq, hi), &ks, settings.r, &thetas)?;
    let control = generate_sequence(
        &GeneratorSpec::Random {
            seed: settings.control_seed,
            cap: settings.control_cap,
        },
        -1,
        hi + 1,
    )?;
    let control_residual =
        self::reflectionless_residual(&geometric_route(&control, hi), &ks, settings.r, &thetas)?;
    Ok(BorgReport {
        theta0,
        theta1,
        n,
        eta,
        containment_fraction,
        max_interior_gap,
        reflectionless_residual,
        control_residual,
        warnings,
    })
}
