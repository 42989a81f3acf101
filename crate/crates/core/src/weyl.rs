//! Weyl-Titchmarsh m-functions, their Schur transforms, Riccati identities and Weyl solutions.
//!
//! Everything is computed for a finite truncation of the lattice to [lo, hi] with unit-modulus
//! boundary coefficients alpha_lo = e^{i phase_lo} and alpha_{hi+1} = e^{i phase_hi}. Half-lattice
//! m-functions are Herglotz transforms of the spectral measures of the truncated half-lattice
//! operators, so all algebraic identities between them hold exactly up to rounding.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CmvError, Result};
use crate::spectral::{measure_from_operator, CircleMeasure};
use crate::transfer::{is_odd, seed_values, step_backward, step_forward, tilde_divides};
use crate::verblunsky::{build_finite_cmv, BandedUnitary, Derived, Side, VerblunskySequence};
use crate::C64;

/// Denominators below this are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-13;
/// Points closer than this to the unit circle are rejected by the Herglotz transform.
pub const CIRCLE_TOL: f64 = 1e-12;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn ci(im: f64) -> C64 {
    C64::new(0.0, im)
}

fn safe_div(num: C64, den: C64, what: &str) -> Result<C64> {
    if den.norm() < SINGULAR_TOL {
        return Err(CmvError::Singular(format!("{what}: denominator {den}")));
    }
    Ok(num / den)
}

/// Window [lo, hi] of the lattice with the boundary phases used at both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub lo: i64,
    pub hi: i64,
    pub phase_lo: f64,
    pub phase_hi: f64,
}

impl Truncation {
    pub fn new(lo: i64, hi: i64) -> Self {
        Truncation {
            lo,
            hi,
            phase_lo: 0.0,
            phase_hi: 0.0,
        }
    }

    /// n sites split around k0: [k0 - n/2, k0 + n - n/2 - 1].
    pub fn centered(k0: i64, n: usize) -> Self {
        let h = (n / 2) as i64;
        Self::new(k0 - h, k0 + n as i64 - h - 1)
    }

    pub fn full_operator(&self, seq: &VerblunskySequence) -> Result<BandedUnitary> {
        build_finite_cmv(seq, self.lo, self.hi, self.phase_lo, self.phase_hi)
    }
}

/// sum_j w_j (zeta_j + z)/(zeta_j - z)
pub fn herglotz_transform(mu: &CircleMeasure, z: C64) -> Result<C64> {
    if (z.norm() - 1.0).abs() < CIRCLE_TOL {
        return Err(CmvError::PoleRegion(format!(
            "|z| = {} is on the unit circle",
            z.norm()
        )));
    }
    Ok(mu.integrate(|zeta| (zeta + z) / (zeta - z)))
}

/// Spectral data needed to evaluate m-functions at site k0.
#[derive(Clone, Debug)]
pub struct MFunctionContext {
    pub k0: i64,
    pub trunc: Truncation,
    pub seq: VerblunskySequence,
    /// mu_+(., k0): U_{+,k0} on [k0, hi] with alpha_{k0} = 1.
    pub mu_plus: CircleMeasure,
    /// mu_-(., k0): U_{-,k0} on [lo, k0] with alpha_{k0+1} = 1.
    pub mu_minus: CircleMeasure,
    /// mu_-(., k0-1): U_{-,k0-1} on [lo, k0-1] with alpha_{k0} = 1.
    pub mu_minus_prev: CircleMeasure,
    pub derived: Derived,
}

impl MFunctionContext {
    pub fn new(seq: &VerblunskySequence, k0: i64, trunc: Truncation) -> Result<Self> {
        if !(trunc.lo < k0 - 1 && k0 < trunc.hi) {
            return Err(CmvError::Domain(format!(
                "site {k0} needs lo < k0 - 1 and k0 < hi, got [{}, {}]",
                trunc.lo, trunc.hi
            )));
        }
        seq.require(trunc.lo + 1, trunc.hi)?;
        let up = build_finite_cmv(seq, k0, trunc.hi, 0.0, trunc.phase_hi)?;
        let um = build_finite_cmv(seq, trunc.lo, k0, trunc.phase_lo, 0.0)?;
        let um1 = build_finite_cmv(seq, trunc.lo, k0 - 1, trunc.phase_lo, 0.0)?;
        Ok(MFunctionContext {
            k0,
            trunc,
            seq: seq.clone(),
            mu_plus: measure_from_operator(&up, k0)?,
            mu_minus: measure_from_operator(&um, k0)?,
            mu_minus_prev: measure_from_operator(&um1, k0 - 1)?,
            derived: seq.derived(k0)?,
        })
    }
}

/// m_+(z, k0) or m_-(z, k0) = +- integral of (zeta + z)/(zeta - z).
pub fn m_function(ctx: &MFunctionContext, z: C64, side: Side) -> Result<C64> {
    match side {
        Side::Plus => herglotz_transform(&ctx.mu_plus, z),
        Side::Minus => Ok(-herglotz_transform(&ctx.mu_minus, z)?),
    }
}

/// (Re a + i Im b w) / (i Im a + Re b w)
pub fn coupling_mobius(d: &Derived, w: C64) -> Result<C64> {
    safe_div(
        c(d.a.re) + ci(d.b.im) * w,
        ci(d.a.im) + c(d.b.re) * w,
        "boundary Mobius map",
    )
}

/// M_+(z, k0) = m_+(z, k0) and M_-(z, k0) = coupling_mobius(m_-(z, k0-1)).
pub fn big_m(ctx: &MFunctionContext, z: C64, side: Side) -> Result<C64> {
    match side {
        Side::Plus => m_function(ctx, z, Side::Plus),
        Side::Minus => {
            let mm = -herglotz_transform(&ctx.mu_minus_prev, z)?;
            coupling_mobius(&ctx.derived, mm)
        }
    }
}

/// M^_+(z, k0-1) = (Re a - i Im a m_+) / (-i Im b + Re b m_+) and M^_-(z, k0) = m_-(z, k0).
pub fn hat_m(ctx: &MFunctionContext, z: C64, side: Side) -> Result<C64> {
    match side {
        Side::Plus => {
            let mp = m_function(ctx, z, Side::Plus)?;
            let d = &ctx.derived;
            safe_div(
                c(d.a.re) - ci(d.a.im) * mp,
                ci(-d.b.im) + c(d.b.re) * mp,
                "hat M_+",
            )
        }
        Side::Minus => m_function(ctx, z, Side::Minus),
    }
}

/// Phi = (M - 1)/(M + 1).
pub fn phi_from_m(m: C64) -> Result<C64> {
    safe_div(m - 1.0, m + 1.0, "Schur transform")
}

/// M = (1 + Phi)/(1 - Phi).
pub fn m_from_phi(phi: C64) -> Result<C64> {
    safe_div(1.0 + phi, 1.0 - phi, "inverse Schur transform")
}

/// One step M(k-1) -> M(k) of the Mobius recursion with coefficients taken at site k.
pub fn m_mobius_step(alpha: C64, k: i64, z: C64, m_prev: C64) -> Result<C64> {
    let (a, b) = (1.0 + alpha, 1.0 - alpha);
    let d = if is_odd(k) {
        [
            [a.conj() + a / z, a.conj() - a / z],
            [b.conj() - b / z, b.conj() + b / z],
        ]
    } else {
        [
            [z * a.conj() + a, z * a.conj() - a],
            [z * b.conj() - b, z * b.conj() + b],
        ]
    };
    safe_div(
        d[0][1] + d[0][0] * m_prev,
        d[1][1] + d[1][0] * m_prev,
        "M recursion",
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiccatiMode {
    /// (z b* - b) M(k-1) M(k) + (z b* + b) M(k) - (z a* + a) M(k-1) = z a* - a
    M,
    /// alpha Phi(k-1) Phi(k) - Phi(k-1) + z Phi(k) = conj(alpha) z
    Phi,
    /// Inputs are 1/Phi: conj(alpha) z x(k-1) x(k) + x(k) - z x(k-1) = alpha
    InvPhi,
}

/// Residual of the Riccati identity linking the values at k-1 and k; alpha is alpha_k.
pub fn riccati_residual(mode: RiccatiMode, alpha: C64, z: C64, prev: C64, cur: C64) -> C64 {
    match mode {
        RiccatiMode::M => {
            let (a, b) = (1.0 + alpha, 1.0 - alpha);
            (z * b.conj() - b) * prev * cur + (z * b.conj() + b) * cur
                - (z * a.conj() + a) * prev
                - (z * a.conj() - a)
        }
        RiccatiMode::Phi => alpha * prev * cur - prev + z * cur - alpha.conj() * z,
        RiccatiMode::InvPhi => alpha.conj() * z * prev * cur + cur - z * prev - alpha,
    }
}

/// Taylor coefficients phi_1..phi_J of Phi_+(z, k) at z = 0 (phi_0 = 0):
///   phi_1(k) = -conj(alpha_{k+1}),
///   phi_j(k) = alpha_{k+1} sum_{l=1}^{j-1} phi_{j-l}(k+1) phi_l(k) + phi_{j-1}(k+1).
pub fn schur_series_plus(seq: &VerblunskySequence, k: i64, jmax: usize) -> Result<Vec<C64>> {
    // t[m][j] = phi_j(k + m)
    let mut t = vec![vec![C64::new(0.0, 0.0); jmax + 1]; jmax + 1];
    for j in 1..=jmax {
        for m in 0..=jmax - j {
            let site = k + m as i64;
            let a = seq.get(site + 1)?;
            t[m][j] = if j == 1 {
                -a.conj()
            } else {
                let conv: C64 = (1..j).map(|l| t[m + 1][j - l] * t[m][l]).sum();
                a * conv + t[m + 1][j - 1]
            };
        }
    }
    Ok(t[0][1..].to_vec())
}

/// Taylor coefficients c_0..c_{J-1} of 1/Phi_-(z, k) at z = 0:
///   c_0(k) = alpha_k,
///   c_j(k) = -conj(alpha_k) sum_{l=0}^{j-1} c_{j-1-l}(k-1) c_l(k) + c_{j-1}(k-1).
pub fn inverse_schur_series_minus(
    seq: &VerblunskySequence,
    k: i64,
    jmax: usize,
) -> Result<Vec<C64>> {
    if jmax == 0 {
        return Ok(vec![]);
    }
    // t[m][j] = c_j(k - m)
    let mut t = vec![vec![C64::new(0.0, 0.0); jmax]; jmax];
    for j in 0..jmax {
        for m in 0..jmax - j {
            let site = k - m as i64;
            let a = seq.get(site)?;
            t[m][j] = if j == 0 {
                a
            } else {
                let conv: C64 = (0..j).map(|l| t[m + 1][j - 1 - l] * t[m][l]).sum();
                -a.conj() * conv + t[m + 1][j - 1]
            };
        }
    }
    Ok(t[0].clone())
}

/// How the coefficients beyond a truncation window are replaced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TailClosure {
    /// Unit-modulus boundary coefficient e^{is}; identical to the unitary truncation.
    Phase { s: f64 },
    /// All coefficients beyond the window vanish.
    Free,
    /// Coefficients continue geometrically with the unit-modulus ratio of the last two.
    Geometric,
}

fn unit_ratio(num: C64, den: C64) -> Option<C64> {
    if num.norm() < 1e-14 || den.norm() < 1e-14 {
        None
    } else {
        let g = num / den;
        Some(g / g.norm())
    }
}

fn root_in_disk(a: C64, b: C64, c0: C64) -> C64 {
    // a x^2 + b x + c0 = 0, root of smaller modulus
    let disc = (b * b - 4.0 * a * c0).sqrt();
    let q = if (b.conj() * disc).re >= 0.0 {
        -0.5 * (b + disc)
    } else {
        -0.5 * (b - disc)
    };
    let r1 = q / a;
    let r2 = c0 / q;
    if r1.norm() <= r2.norm() {
        r1
    } else {
        r2
    }
}

/// Schur-algorithm evaluation of Phi_+ and 1/Phi_- with chosen closures at both window ends.
#[derive(Clone, Copy, Debug)]
pub struct SchurRoute<'a> {
    pub seq: &'a VerblunskySequence,
    pub lo: i64,
    pub hi: i64,
    pub closure_lo: TailClosure,
    pub closure_hi: TailClosure,
}

impl<'a> SchurRoute<'a> {
    /// Same boundary conditions as the unitary truncation.
    pub fn from_truncation(seq: &'a VerblunskySequence, t: &Truncation) -> Self {
        SchurRoute {
            seq,
            lo: t.lo,
            hi: t.hi,
            closure_lo: TailClosure::Phase { s: t.phase_lo },
            closure_hi: TailClosure::Phase { s: t.phase_hi },
        }
    }

    fn inside(z: C64) -> Result<()> {
        if z.norm() >= 1.0 - CIRCLE_TOL {
            return Err(CmvError::Domain(format!(
                "Schur recursion needs |z| < 1, got {}",
                z.norm()
            )));
        }
        Ok(())
    }

    /// Phi_+(z, hi) implied by the right closure, |z| < 1.
    fn phi_plus_at_hi(&self, z: C64) -> Result<C64> {
        Ok(match self.closure_hi {
            TailClosure::Phase { s } => -z * C64::from_polar(1.0, -s),
            TailClosure::Free => C64::new(0.0, 0.0),
            TailClosure::Geometric => {
                let ah = self.seq.get(self.hi)?;
                match unit_ratio(ah, self.seq.get(self.hi - 1)?) {
                    None => C64::new(0.0, 0.0),
                    Some(g) => {
                        // alpha_k = a0 g^k beyond hi; Phi(k) = conj(g)^k psi with psi the
                        // fixed point of psi -> w (psi - conj(a0)) / (1 - a0 psi), w = z conj(g).
                        let a0 = ah * g.powi(-(self.hi as i32));
                        let w = z * g.conj();
                        let psi = root_in_disk(a0, w - 1.0, -w * a0.conj());
                        g.conj().powi(self.hi as i32) * psi
                    }
                }
            }
        })
    }

    /// 1/Phi_-(z, lo) implied by the left closure, |z| < 1.
    fn chi_minus_at_lo(&self, z: C64) -> Result<C64> {
        Ok(match self.closure_lo {
            TailClosure::Phase { s } => C64::from_polar(1.0, s),
            TailClosure::Free => C64::new(0.0, 0.0),
            TailClosure::Geometric => {
                let al = self.seq.get(self.lo)?;
                match unit_ratio(self.seq.get(self.lo + 1)?, al) {
                    None => al,
                    Some(g) => {
                        // alpha_k = a0 g^k up to lo; 1/Phi(k) = g^k eta with eta the fixed
                        // point of eta -> (a0 + w eta)/(1 + w conj(a0) eta), w = z conj(g).
                        let a0 = al * g.powi(-(self.lo as i32));
                        let w = z * g.conj();
                        let eta = if a0.norm() < 1e-14 {
                            C64::new(0.0, 0.0)
                        } else {
                            root_in_disk(w * a0.conj(), 1.0 - w, -a0)
                        };
                        g.powi(self.lo as i32) * eta
                    }
                }
            }
        })
    }

    /// Phi_+(z, k) for |z| < 1 by the backward recursion Phi(k-1) = z (Phi(k) - conj a_k)/(1 - a_k Phi(k)).
    pub fn phi_plus(&self, z: C64, k: i64) -> Result<C64> {
        Self::inside(z)?;
        if k > self.hi || k < self.lo {
            return Err(CmvError::Domain(format!(
                "site {k} outside [{}, {}]",
                self.lo, self.hi
            )));
        }
        let mut phi = self.phi_plus_at_hi(z)?;
        for j in (k + 1..=self.hi).rev() {
            let a = self.seq.get(j)?;
            phi = z * safe_div(phi - a.conj(), 1.0 - a * phi, "Schur step")?;
        }
        Ok(phi)
    }

    /// 1/Phi_-(z, k) for |z| < 1 by chi(k) = (a_k + z chi(k-1))/(1 + z conj(a_k) chi(k-1)).
    pub fn chi_minus(&self, z: C64, k: i64) -> Result<C64> {
        Self::inside(z)?;
        if k > self.hi || k < self.lo {
            return Err(CmvError::Domain(format!(
                "site {k} outside [{}, {}]",
                self.lo, self.hi
            )));
        }
        let mut chi = self.chi_minus_at_lo(z)?;
        for j in self.lo + 1..=k {
            let a = self.seq.get(j)?;
            chi = safe_div(a + z * chi, 1.0 + z * a.conj() * chi, "inverse Schur step")?;
        }
        Ok(chi)
    }

    /// M_+-(z, k); for |z| > 1 through M(z) = -conj(M(1/conj z)).
    pub fn big_m(&self, z: C64, k: i64, side: Side) -> Result<C64> {
        let nz = z.norm();
        if (nz - 1.0).abs() < CIRCLE_TOL {
            return Err(CmvError::PoleRegion(format!(
                "|z| = {nz} is on the unit circle"
            )));
        }
        if nz > 1.0 {
            return Ok(-self.big_m(1.0 / z.conj(), k, side)?.conj());
        }
        match side {
            Side::Plus => m_from_phi(self.phi_plus(z, k)?),
            Side::Minus => {
                let chi = self.chi_minus(z, k)?;
                safe_div(chi + 1.0, chi - 1.0, "M_- from 1/Phi_-")
            }
        }
    }
}

/// A solution (u, v) tabulated on [k_min, k_max].
#[derive(Clone, Debug)]
pub struct WeylSolution {
    pub k_min: i64,
    pub u: Vec<C64>,
    pub v: Vec<C64>,
}

impl WeylSolution {
    pub fn k_max(&self) -> i64 {
        self.k_min + self.u.len() as i64 - 1
    }

    pub fn at(&self, k: i64) -> Result<(C64, C64)> {
        if k < self.k_min || k > self.k_max() {
            return Err(CmvError::Domain(format!(
                "site {k} outside [{}, {}]",
                self.k_min,
                self.k_max()
            )));
        }
        let i = (k - self.k_min) as usize;
        Ok((self.u[i], self.v[i]))
    }

    /// Phi read from the solution: z v/u for odd k, u/v for even k.
    pub fn phi(&self, k: i64, z: C64) -> Result<C64> {
        let (u, v) = self.at(k)?;
        if is_odd(k) {
            safe_div(z * v, u, "Phi from solution")
        } else {
            safe_div(u, v, "Phi from solution")
        }
    }

    fn scaled(mut self, f: C64) -> Self {
        for x in self.u.iter_mut().chain(self.v.iter_mut()) {
            *x *= f;
        }
        self
    }
}

/// Solution satisfying the boundary condition at one end of the truncation, up to scale.
/// `end = Plus` starts at hi and recurses backward; `end = Minus` starts at lo and recurses forward.
pub fn boundary_solution(
    seq: &VerblunskySequence,
    t: &Truncation,
    z: C64,
    end: Side,
    k_min: i64,
    k_max: i64,
) -> Result<WeylSolution> {
    if k_min < t.lo || k_max > t.hi || k_min > k_max {
        return Err(CmvError::Domain(format!(
            "range [{k_min}, {k_max}] not inside [{}, {}]",
            t.lo, t.hi
        )));
    }
    let one = C64::new(1.0, 0.0);
    let n = (k_max - k_min + 1) as usize;
    let mut u = vec![C64::new(0.0, 0.0); n];
    let mut v = vec![C64::new(0.0, 0.0); n];
    match end {
        Side::Plus => {
            // u(hi) = -e^{is} v(hi) for odd hi, -z e^{-is} v(hi) for even hi
            let mut x = if is_odd(t.hi) {
                (-C64::from_polar(1.0, t.phase_hi), one)
            } else {
                (-z * C64::from_polar(1.0, -t.phase_hi), one)
            };
            for k in (k_min..=t.hi).rev() {
                if k <= k_max {
                    let i = (k - k_min) as usize;
                    (u[i], v[i]) = x;
                }
                if k > k_min {
                    x = step_backward(seq, k, z, x)?;
                }
            }
        }
        Side::Minus => {
            // u(lo) = z e^{is} v(lo) for odd lo, e^{-is} v(lo) for even lo
            let mut x = if is_odd(t.lo) {
                (z * C64::from_polar(1.0, t.phase_lo), one)
            } else {
                (C64::from_polar(1.0, -t.phase_lo), one)
            };
            for k in t.lo..=k_max {
                if k >= k_min {
                    let i = (k - k_min) as usize;
                    (u[i], v[i]) = x;
                }
                if k < k_max {
                    x = step_forward(seq, k + 1, z, x)?;
                }
            }
        }
    }
    if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
        return Err(CmvError::IllConditioned(
            "solution overflowed; shrink the window".into(),
        ));
    }
    Ok(WeylSolution { k_min, u, v })
}

/// Rescales `sol` so that its value at `k0` equals `target` (least squares on the 2-vector).
/// Returns the rescaled solution and the relative mismatch of the two components.
pub fn normalize_at(sol: WeylSolution, k0: i64, target: (C64, C64)) -> Result<(WeylSolution, f64)> {
    let (u, v) = sol.at(k0)?;
    let den = u.norm_sqr() + v.norm_sqr();
    if den == 0.0 {
        return Err(CmvError::Singular(
            "solution vanishes at the normalization site".into(),
        ));
    }
    let f = (u.conj() * target.0 + v.conj() * target.1) / den;
    let mism = ((f * u - target.0).norm() + (f * v - target.1).norm())
        / (target.0.norm() + target.1.norm()).max(1e-300);
    Ok((sol.scaled(f), mism))
}

/// (u_+-, v_+-) = (q_+, s_+) + M_+-(p_+, r_+) with the plus family seeded at k0, tabulated on
/// [k_min, k_max]. The decaying solution is obtained by stable recursion from the matching end of
/// the truncation and scaled to its value at k0.
pub fn weyl_solutions(
    ctx: &MFunctionContext,
    z: C64,
    side: Side,
    k_min: i64,
    k_max: i64,
) -> Result<WeylSolution> {
    let m = big_m(ctx, z, side)?;
    let ((p, r), (q, s)) = seed_values(ctx.k0, Side::Plus, z);
    let raw = boundary_solution(
        &ctx.seq,
        &ctx.trunc,
        z,
        side,
        k_min.min(ctx.k0),
        k_max.max(ctx.k0),
    )?;
    let (sol, _) = normalize_at(raw, ctx.k0, (q + m * p, s + m * r))?;
    restrict(sol, k_min, k_max)
}

fn restrict(sol: WeylSolution, k_min: i64, k_max: i64) -> Result<WeylSolution> {
    let a = (k_min - sol.k_min) as usize;
    let b = (k_max - sol.k_min) as usize + 1;
    Ok(WeylSolution {
        k_min,
        u: sol.u[a..b].to_vec(),
        v: sol.v[a..b].to_vec(),
    })
}

/// Factor turning u into u~ for the plus family seeded at k0.
pub fn plus_tilde_factor(k0: i64, z: C64) -> C64 {
    if tilde_divides(k0, Side::Plus) {
        1.0 / z
    } else {
        C64::new(1.0, 0.0)
    }
}

/// Dense resolvent columns X = (U - z)^{-1} [e_{cols}].
pub fn resolvent_columns(u: &BandedUnitary, z: C64, cols: &[i64]) -> Result<DMatrix<C64>> {
    let n = u.dim();
    let a = &u.matrix - DMatrix::<C64>::identity(n, n) * z;
    let mut rhs = DMatrix::<C64>::zeros(n, cols.len());
    for (j, &k) in cols.iter().enumerate() {
        rhs[(u.index(k)?, j)] = C64::new(1.0, 0.0);
    }
    let lu = a.lu();
    lu.solve(&rhs)
        .ok_or_else(|| CmvError::Singular(format!("U - z is singular at z = {z}")))
}

pub type Mat2 = [[C64; 2]; 2];

/// Closed form of M(z, k0) built from M_+(z, k0) and M_-(z, k0); entries refer to sites (k0-1, k0).
pub fn matrix_m_closed(ctx: &MFunctionContext, z: C64) -> Result<Mat2> {
    let mp = big_m(ctx, z, Side::Plus)?;
    let mm = big_m(ctx, z, Side::Minus)?;
    matrix_m_from(&ctx.derived, ctx.k0, mp, mm)
}

pub fn matrix_m_from(d: &Derived, k: i64, mp: C64, mm: C64) -> Result<Mat2> {
    let diff = mp - mm;
    if diff.norm() < SINGULAR_TOL {
        return Err(CmvError::Singular("M_+ - M_- vanishes".into()));
    }
    let (a, b, rho) = (d.a, d.b, d.rho);
    if rho <= 0.0 {
        return Err(CmvError::Singular("rho vanishes at this site".into()));
    }
    let one = C64::new(1.0, 0.0);
    let m00 = one + (a.conj() - b.conj() * mp) * (a + b * mm) / (rho * rho * diff);
    let m11 = (one - mp * mm) / diff;
    let x = (one - mp) * (a.conj() - b.conj() * mm);
    let y = (one + mp) * (a + b * mm);
    let (m01, m10) = if is_odd(k) { (x, y) } else { (y, x) };
    let f = -one / (rho * diff);
    Ok([[m00, f * m01], [f * m10, m11]])
}

/// M(z, k) from the resolvent: delta_{ll'} + 2z (U - z)^{-1}(k+l-1, k+l'-1).
pub fn matrix_m_resolvent(u: &BandedUnitary, k: i64, z: C64) -> Result<Mat2> {
    let x = resolvent_columns(u, z, &[k - 1, k])?;
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for l in 0..2 {
        for lp in 0..2 {
            let g = x[(u.index(k - 1 + l as i64)?, lp)];
            out[l][lp] = if l == lp {
                1.0 + 2.0 * z * g
            } else {
                2.0 * z * g
            };
        }
    }
    Ok(out)
}

/// B = [[rho, rho], [-b, a]] for odd k, [[-rho, rho], [conj b, conj a]] for even k.
pub fn tilde_basis(d: &Derived, k: i64) -> Mat2 {
    let r = C64::new(d.rho, 0.0);
    if is_odd(k) {
        [[r, r], [-d.b, d.a]]
    } else {
        [[-r, r], [d.b.conj(), d.a.conj()]]
    }
}

/// (1/4) B^* M B
pub fn matrix_m_tilde_from(d: &Derived, k: i64, m: &Mat2) -> Mat2 {
    let b = tilde_basis(d, k);
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut s = C64::new(0.0, 0.0);
            for x in 0..2 {
                for y in 0..2 {
                    s += b[x][i].conj() * m[x][y] * b[y][j];
                }
            }
            out[i][j] = 0.25 * s;
        }
    }
    out
}

/// Matrix measure of the arc (theta1, theta2] recovered from a matrix Caratheodory function F:
///   (1/4pi) int_{theta1+delta}^{theta2+delta} [F(r e^{i theta}) + F(r e^{i theta})^*] dtheta.
/// Trapezoid rule with panel width at most min((1 - r)/8, 1e-2).
pub fn matrix_arc_mass(
    f: &dyn Fn(C64) -> Result<Mat2>,
    theta1: f64,
    theta2: f64,
    r: f64,
    delta: f64,
) -> Result<Mat2> {
    if !(0.0..1.0).contains(&r) {
        return Err(CmvError::Domain(format!("radius {r} outside [0, 1)")));
    }
    if theta2 <= theta1 || theta2 - theta1 > 2.0 * std::f64::consts::PI {
        return Err(CmvError::Domain(
            "arc needs theta1 < theta2 <= theta1 + 2pi".into(),
        ));
    }
    let h_max = ((1.0 - r) / 8.0).min(1e-2);
    let panels = ((theta2 - theta1) / h_max).ceil() as usize;
    let h = (theta2 - theta1) / panels as f64;
    let mut acc = [[c(0.0); 2]; 2];
    for i in 0..=panels {
        let w = if i == 0 || i == panels { 0.5 } else { 1.0 };
        let m = f(C64::from_polar(r, theta1 + delta + i as f64 * h))?;
        for a in 0..2 {
            for b in 0..2 {
                acc[a][b] += w * (m[a][b] + m[b][a].conj());
            }
        }
    }
    let s = h / (4.0 * std::f64::consts::PI);
    Ok(acc.map(|row| row.map(|x| x * s)))
}

/// Omega-tilde of an arc at site k, read off the tilde M-matrix of the dense truncation u.
pub fn omega_tilde_arc(
    u: &BandedUnitary,
    d: &Derived,
    k: i64,
    theta1: f64,
    theta2: f64,
    r: f64,
    delta: f64,
) -> Result<Mat2> {
    let f =
        |z: C64| -> Result<Mat2> { Ok(matrix_m_tilde_from(d, k, &matrix_m_resolvent(u, k, z)?)) };
    matrix_arc_mass(&f, theta1, theta2, r, delta)
}

/// Closed form of the transformed matrix in terms of M_+- and alpha at the site.
pub fn matrix_m_tilde_closed(d: &Derived, mp: C64, mm: C64) -> Result<Mat2> {
    let diff = mp - mm;
    if diff.norm() < SINGULAR_TOL {
        return Err(CmvError::Singular("M_+ - M_- vanishes".into()));
    }
    let al = d.alpha;
    let s = 0.5 * (mp + mm) / diff;
    Ok([
        [1.0 / diff + ci(0.5 * al.im), s + 0.5 * al.re],
        [-s - 0.5 * al.re, -mp * mm / diff - ci(0.5 * al.im)],
    ])
}

/// Value of the transformed matrix at z = 0.
pub fn matrix_m_tilde_at_zero(d: &Derived) -> Mat2 {
    let r2 = d.rho * d.rho;
    [
        [c(0.25 * (r2 + d.b.norm_sqr())), ci(-0.5 * d.alpha.im)],
        [ci(0.5 * d.alpha.im), c(0.25 * (r2 + d.a.norm_sqr()))],
    ]
}

/// Phi_11 computed two ways: (M_11 - 1)/(M_11 + 1) and Phi_+/Phi_-.
pub fn phi_11(ctx: &MFunctionContext, z: C64) -> Result<(C64, C64)> {
    let m = matrix_m_closed(ctx, z)?;
    let a = phi_from_m(m[1][1])?;
    let pp = phi_from_m(big_m(ctx, z, Side::Plus)?)?;
    let mm = big_m(ctx, z, Side::Minus)?;
    // 1/Phi_- = (M_- + 1)/(M_- - 1)
    let chi = safe_div(mm + 1.0, mm - 1.0, "1/Phi_-")?;
    Ok((a, pp * chi))
}
