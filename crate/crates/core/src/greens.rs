//! Resolvents of half-lattice and full-lattice truncations in closed form, checked against dense
//! solves, and the Stone-formula check for spectral projections.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{CmvError, Result};
use crate::spectral::{eigen_unitary, normalize_angle};
use crate::transfer::{build_numeric_family, is_odd, parity_sign, seed_values, NumericFamily};
use crate::verblunsky::{build_finite_cmv, BandedUnitary, Side};
use crate::weyl::{
    big_m, boundary_solution, m_function, normalize_at, plus_tilde_factor, MFunctionContext,
    Truncation, WeylSolution, SINGULAR_TOL,
};
use crate::C64;

fn check_z(z: C64) -> Result<()> {
    if z.norm() < 1e-300 {
        return Err(CmvError::Domain("z = 0 is excluded".into()));
    }
    if (z.norm() - 1.0).abs() < 1e-12 {
        return Err(CmvError::PoleRegion(format!(
            "|z| = {} is on the unit circle",
            z.norm()
        )));
    }
    Ok(())
}

/// k < k' or k = k' odd selects the first branch of every closed form below.
fn first_branch(k: i64, kp: i64) -> bool {
    k < kp || (k == kp && is_odd(k))
}

/// Closed-form resolvent of the half-lattice truncation U_{+-,k0} of a context.
///   plus:  (1/2z) [p~_+(k) v_+(k')  | r_+(k') u~_+(k)]   with (u~_+, v_+) = (q~_+, s_+) + m_+ (p~_+, r_+)
///   minus: (1/2z) [t~_-(k) r_-(k')  | w_-(k') p~_-(k)]   with (t~_-, w_-) = (q~_-, s_-) + m_- (p~_-, r_-)
#[derive(Clone, Debug)]
pub struct HalfLatticeGreen {
    pub z: C64,
    pub side: Side,
    pub k_min: i64,
    pub k_max: i64,
    fam: NumericFamily,
    sol: WeylSolution,
    tilde: C64,
}

impl HalfLatticeGreen {
    pub fn new(ctx: &MFunctionContext, z: C64, side: Side) -> Result<Self> {
        check_z(z)?;
        let k0 = ctx.k0;
        let t = &ctx.trunc;
        let (k_min, k_max) = match side {
            Side::Plus => (k0, t.hi),
            Side::Minus => (t.lo, k0),
        };
        let fam = build_numeric_family(&ctx.seq, k0, side, z, k_min, k_max)?;
        let m = m_function(ctx, z, side)?;
        let ((p, r), (q, s)) = seed_values(k0, side, z);
        // the half-lattice operator has its own boundary at k0, so build the solution on its window
        let half = match side {
            Side::Plus => Truncation {
                lo: k0,
                hi: t.hi,
                phase_lo: 0.0,
                phase_hi: t.phase_hi,
            },
            Side::Minus => Truncation {
                lo: t.lo,
                hi: k0,
                phase_lo: t.phase_lo,
                phase_hi: 0.0,
            },
        };
        let raw = boundary_solution(&ctx.seq, &half, z, side, k_min, k_max)?;
        let (sol, _) = normalize_at(raw, k0, (q + m * p, s + m * r))?;
        let tilde = fam.tilde_factor();
        Ok(HalfLatticeGreen {
            z,
            side,
            k_min,
            k_max,
            fam,
            sol,
            tilde,
        })
    }

    pub fn at(&self, k: i64, kp: i64) -> Result<C64> {
        let (pk, _) = self.fam.pr(k)?;
        let (_, rkp) = self.fam.pr(kp)?;
        let (uk, _) = self.sol.at(k)?;
        let (_, vkp) = self.sol.at(kp)?;
        let f = 1.0 / (2.0 * self.z);
        Ok(if first_branch(k, kp) {
            match self.side {
                // p~_+(k) v_+(k')
                Side::Plus => f * self.tilde * pk * vkp,
                // t~_-(k) r_-(k')
                Side::Minus => f * self.tilde * uk * rkp,
            }
        } else {
            match self.side {
                // r_+(k') u~_+(k)
                Side::Plus => f * rkp * self.tilde * uk,
                // w_-(k') p~_-(k)
                Side::Minus => f * vkp * self.tilde * pk,
            }
        })
    }
}

pub fn half_lattice_resolvent(
    ctx: &MFunctionContext,
    z: C64,
    k: i64,
    kp: i64,
    side: Side,
) -> Result<C64> {
    HalfLatticeGreen::new(ctx, z, side)?.at(k, kp)
}

/// Closed-form resolvent of the full truncation:
///   -1/(2z [M_+ - M_-]) [u~_-(k) v_+(k')  | v_-(k') u~_+(k)]
/// with (u~_+-, v_+-) = (q~_+, s_+) + M_+- (p~_+, r_+).
#[derive(Clone, Debug)]
pub struct FullLatticeGreen {
    pub z: C64,
    pub m_plus: C64,
    pub m_minus: C64,
    plus: WeylSolution,
    minus: WeylSolution,
    tilde: C64,
}

impl FullLatticeGreen {
    pub fn new(ctx: &MFunctionContext, z: C64) -> Result<Self> {
        check_z(z)?;
        let t = &ctx.trunc;
        let mp = big_m(ctx, z, Side::Plus)?;
        let mm = big_m(ctx, z, Side::Minus)?;
        if (mp - mm).norm() < SINGULAR_TOL {
            return Err(CmvError::Singular("M_+ - M_- vanishes".into()));
        }
        let ((p, r), (q, s)) = seed_values(ctx.k0, Side::Plus, z);
        let raw = boundary_solution(&ctx.seq, t, z, Side::Plus, t.lo, t.hi)?;
        let (plus, _) = normalize_at(raw, ctx.k0, (q + mp * p, s + mp * r))?;
        let raw = boundary_solution(&ctx.seq, t, z, Side::Minus, t.lo, t.hi)?;
        let (minus, _) = normalize_at(raw, ctx.k0, (q + mm * p, s + mm * r))?;
        Ok(FullLatticeGreen {
            z,
            m_plus: mp,
            m_minus: mm,
            plus,
            minus,
            tilde: plus_tilde_factor(ctx.k0, z),
        })
    }

    pub fn at(&self, k: i64, kp: i64) -> Result<C64> {
        let f = -1.0 / (2.0 * self.z * (self.m_plus - self.m_minus));
        Ok(if first_branch(k, kp) {
            let (um, _) = self.minus.at(k)?;
            let (_, vp) = self.plus.at(kp)?;
            f * self.tilde * um * vp
        } else {
            let (_, vm) = self.minus.at(kp)?;
            let (up, _) = self.plus.at(k)?;
            f * vm * self.tilde * up
        })
    }

    /// W((u~_+, v_+), (u~_-, v_-)) at k1 and its predicted value 2 (-1)^{k1} [M_+ - M_-].
    pub fn wronskian(&self, k1: i64) -> Result<(C64, C64)> {
        let (up, vp) = self.plus.at(k1)?;
        let (um, vm) = self.minus.at(k1)?;
        let w = self.tilde * up * vm - self.tilde * um * vp;
        Ok((w, 2.0 * parity_sign(k1) * (self.m_plus - self.m_minus)))
    }

    /// W((u_+, v_+), (u_-, v_-)) at k1 and its predicted value (-1)^{k1} [M_+ - M_-] (2z or 2).
    pub fn wronskian_plain(&self, k1: i64, k0: i64) -> Result<(C64, C64)> {
        let (up, vp) = self.plus.at(k1)?;
        let (um, vm) = self.minus.at(k1)?;
        let f = if is_odd(k0) {
            2.0 * self.z
        } else {
            C64::new(2.0, 0.0)
        };
        Ok((
            up * vm - um * vp,
            parity_sign(k1) * (self.m_plus - self.m_minus) * f,
        ))
    }
}

pub fn full_lattice_green(ctx: &MFunctionContext, z: C64, k: i64, kp: i64) -> Result<C64> {
    FullLatticeGreen::new(ctx, z)?.at(k, kp)
}

/// Dense (U - z)^{-1}.
pub fn dense_resolvent(u: &BandedUnitary, z: C64) -> Result<DMatrix<C64>> {
    let n = u.dim();
    let a = &u.matrix - DMatrix::<C64>::identity(n, n) * z;
    a.try_inverse()
        .ok_or_else(|| CmvError::Singular(format!("U - z is singular at z = {z}")))
}

/// Half-lattice operator of a context, built directly.
pub fn half_lattice_operator(ctx: &MFunctionContext, side: Side) -> Result<BandedUnitary> {
    let t = &ctx.trunc;
    match side {
        Side::Plus => build_finite_cmv(&ctx.seq, ctx.k0, t.hi, 0.0, t.phase_hi),
        Side::Minus => build_finite_cmv(&ctx.seq, t.lo, ctx.k0, t.phase_lo, 0.0),
    }
}

/// Boxed (k, k') -> G(k, k') evaluator.
pub type EntryFn = Box<dyn Fn(i64, i64) -> Result<C64>>;

/// Largest |closed form - dense solve| over index pairs at distance >= margin from the window ends.
pub fn green_check(ctx: &MFunctionContext, z: C64, side: Option<Side>, margin: i64) -> Result<f64> {
    let (u, lo, hi, eval): (BandedUnitary, i64, i64, EntryFn) = match side {
        Some(s) => {
            let g = HalfLatticeGreen::new(ctx, z, s)?;
            let u = half_lattice_operator(ctx, s)?;
            let (lo, hi) = (u.lo, u.hi);
            (u, lo, hi, Box::new(move |k, kp| g.at(k, kp)))
        }
        None => {
            let g = FullLatticeGreen::new(ctx, z)?;
            let u = ctx.trunc.full_operator(&ctx.seq)?;
            let (lo, hi) = (u.lo, u.hi);
            (u, lo, hi, Box::new(move |k, kp| g.at(k, kp)))
        }
    };
    let dense = dense_resolvent(&u, z)?;
    let mut worst: f64 = 0.0;
    for k in lo + margin..=hi - margin {
        for kp in lo + margin..=hi - margin {
            let d = dense[(u.index(k)?, u.index(kp)?)];
            worst = worst.max((eval(k, kp)? - d).norm());
        }
    }
    Ok(worst)
}

/// Radii and shifts for the Stone limit.
#[derive(Clone, Debug)]
pub struct StoneSchedule {
    pub radii: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Minimum number of trapezoid panels; refined so that the panel width stays below (1 - r)/8.
    pub panels: usize,
}

impl Default for StoneSchedule {
    fn default() -> Self {
        StoneSchedule {
            radii: vec![1.0 - 1e-2, 1.0 - 1e-3, 1.0 - 1e-4],
            deltas: vec![1e-2, 1e-3],
            panels: 4096,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StoneReport {
    pub exact: C64,
    /// (delta, r, value, |value - exact|) for every schedule point.
    pub grid: Vec<(f64, f64, C64, f64)>,
    /// Residual at the smallest delta and the radius closest to 1.
    pub residual: f64,
}

/// Compares (f, F(U) E(Arc(theta1, theta2]) g) from the eigendecomposition with
///   int_{theta1+delta}^{theta2+delta} dtheta/(4 pi) F(e^{i theta})
///       [(f, C(U, r e^{i theta}) g) - (f, C(U, e^{i theta}/r) g)],   C(U, z) = (U + z)(U - z)^{-1}.
pub fn stone_projection_check(
    u: &BandedUnitary,
    f: &DVector<C64>,
    g: &DVector<C64>,
    theta1: f64,
    theta2: f64,
    func: impl Fn(C64) -> C64,
    schedule: &StoneSchedule,
) -> Result<StoneReport> {
    if !(theta2 > theta1) || theta2 - theta1 > 2.0 * PI {
        return Err(CmvError::Domain(
            "arc needs theta1 < theta2 <= theta1 + 2pi".into(),
        ));
    }
    let e = eigen_unitary(u)?;
    let angles = e.angles();
    let fh = e.vectors.adjoint() * f;
    let gh = e.vectors.adjoint() * g;
    let in_arc = |t: f64, a: f64, b: f64| {
        let x = normalize_angle(t - a);
        x > 0.0 && x <= b - a
    };
    for &t in &angles {
        for &ep in &[theta1, theta2] {
            let d = normalize_angle(t - ep);
            if d.min(2.0 * PI - d) < 1e-8 {
                return Err(CmvError::IllPosed(format!(
                    "eigenangle {t} sits on an arc endpoint"
                )));
            }
        }
    }
    let exact: C64 = (0..angles.len())
        .filter(|&j| in_arc(angles[j], theta1, theta2))
        .map(|j| func(e.values[j]) * fh[j].conj() * gh[j])
        .sum();
    let wts: Vec<C64> = (0..angles.len()).map(|j| fh[j].conj() * gh[j]).collect();
    let cay = |z: C64| -> C64 {
        (0..angles.len())
            .map(|j| wts[j] * (e.values[j] + z) / (e.values[j] - z))
            .sum()
    };
    let mut grid = Vec::new();
    for &delta in &schedule.deltas {
        for &r in &schedule.radii {
            let a = theta1 + delta;
            let b = theta2 + delta;
            let n = schedule
                .panels
                .max(((b - a) * 8.0 / (1.0 - r)).ceil() as usize);
            let h = (b - a) / n as f64;
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..=n {
                let th = a + h * i as f64;
                let zeta = C64::from_polar(1.0, th);
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += w * func(zeta) * (cay(r * zeta) - cay(zeta / r));
            }
            let val = acc * h / (4.0 * PI);
            grid.push((delta, r, val, (val - exact).norm()));
        }
    }
    let dmin = schedule
        .deltas
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let rmax = schedule.radii.iter().cloned().fold(0.0, f64::max);
    let residual = grid
        .iter()
        .find(|x| x.0 == dmin && x.1 == rmax)
        .map(|x| x.3)
        .unwrap_or(f64::NAN);
    Ok(StoneReport {
        exact,
        grid,
        residual,
    })
}

/// (f, C(U, z) g) by a dense solve, for spot checks of the eigen-based integrand.
pub fn cayley_form_dense(
    u: &BandedUnitary,
    f: &DVector<C64>,
    g: &DVector<C64>,
    z: C64,
) -> Result<C64> {
    let n = u.dim();
    let a = &u.matrix - DMatrix::<C64>::identity(n, n) * z;
    let x = a
        .lu()
        .solve(g)
        .ok_or_else(|| CmvError::Singular("U - z is singular".into()))?;
    let y = &u.matrix * &x + &x * z;
    Ok(f.dotc(&y))
}
