//! Transfer matrices, the four polynomial solution families and Szegő polynomials.
//!
//! Solutions (u, v) of the eigenvalue equations satisfy (u, v)(k) = T(z, k) (u, v)(k-1) with
//!   T(z, k) = (1/rho_k) [[alpha_k, z], [1/z, conj(alpha_k)]]   for odd k,
//!   T(z, k) = (1/rho_k) [[conj(alpha_k), 1], [1, alpha_k]]     for even k.

use crate::error::{CmvError, Result};
use crate::laurent::LaurentPolynomial as Lp;
use crate::verblunsky::{Side, VerblunskySequence};
use crate::C64;

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

pub fn is_odd(k: i64) -> bool {
    k.rem_euclid(2) == 1
}

/// (-1)^k
pub fn parity_sign(k: i64) -> f64 {
    if is_odd(k) {
        -1.0
    } else {
        1.0
    }
}

fn rho_checked(seq: &VerblunskySequence, k: i64) -> Result<(C64, f64)> {
    let d = seq.derived(k)?;
    if d.rho <= 0.0 {
        return Err(CmvError::Domain(format!(
            "|alpha_{k}| = 1, transfer matrix undefined"
        )));
    }
    Ok((d.alpha, d.rho))
}

#[derive(Clone, Debug)]
pub struct TransferMatrix {
    pub site: i64,
    pub m: [[Lp; 2]; 2],
}

impl TransferMatrix {
    pub fn at(&self, z: C64) -> [[C64; 2]; 2] {
        [
            [self.m[0][0].eval(z), self.m[0][1].eval(z)],
            [self.m[1][0].eval(z), self.m[1][1].eval(z)],
        ]
    }

    pub fn det(&self) -> Lp {
        &(&self.m[0][0] * &self.m[1][1]) - &(&self.m[0][1] * &self.m[1][0])
    }

    /// Since det T = -1 the inverse is [[-d, b], [c, -a]].
    pub fn inverse(&self) -> TransferMatrix {
        TransferMatrix {
            site: self.site,
            m: [
                [-&self.m[1][1], self.m[0][1].clone()],
                [self.m[1][0].clone(), -&self.m[0][0]],
            ],
        }
    }
}

pub fn transfer_matrix(seq: &VerblunskySequence, k: i64) -> Result<TransferMatrix> {
    let (a, rho) = rho_checked(seq, k)?;
    let s = one() / rho;
    let m = if is_odd(k) {
        [
            [Lp::constant(a * s), Lp::monomial(1, s)],
            [Lp::monomial(-1, s), Lp::constant(a.conj() * s)],
        ]
    } else {
        [
            [Lp::constant(a.conj() * s), Lp::constant(s)],
            [Lp::constant(s), Lp::constant(a * s)],
        ]
    };
    Ok(TransferMatrix { site: k, m })
}

/// Numeric T(z, k) for a given coefficient.
pub fn transfer_at(alpha: C64, rho: f64, k: i64, z: C64) -> [[C64; 2]; 2] {
    let s = 1.0 / rho;
    if is_odd(k) {
        [[alpha * s, z * s], [s / z, alpha.conj() * s]]
    } else {
        [
            [alpha.conj() * s, C64::new(s, 0.0)],
            [C64::new(s, 0.0), alpha * s],
        ]
    }
}

/// Numeric T(z, k)^{-1}.
pub fn transfer_inverse_at(alpha: C64, rho: f64, k: i64, z: C64) -> [[C64; 2]; 2] {
    let t = transfer_at(alpha, rho, k, z);
    [[-t[1][1], t[0][1]], [t[1][0], -t[0][0]]]
}

fn apply(t: &[[C64; 2]; 2], x: (C64, C64)) -> (C64, C64) {
    (t[0][0] * x.0 + t[0][1] * x.1, t[1][0] * x.0 + t[1][1] * x.1)
}

/// Steps a numeric solution from site k-1 to k.
pub fn step_forward(seq: &VerblunskySequence, k: i64, z: C64, x: (C64, C64)) -> Result<(C64, C64)> {
    let (a, rho) = rho_checked(seq, k)?;
    Ok(apply(&transfer_at(a, rho, k, z), x))
}

/// Steps a numeric solution from site k to k-1.
pub fn step_backward(
    seq: &VerblunskySequence,
    k: i64,
    z: C64,
    x: (C64, C64),
) -> Result<(C64, C64)> {
    let (a, rho) = rho_checked(seq, k)?;
    Ok(apply(&transfer_inverse_at(a, rho, k, z), x))
}

/// Szegő step [[z, alpha], [conj(alpha) z, 1]] applied to (phi, phi*).
pub fn szego_step(alpha: C64, phi: &Lp, phi_star: &Lp) -> (Lp, Lp) {
    let zphi = phi.shift(1);
    (
        &zphi + &phi_star.scale(alpha),
        &zphi.scale(alpha.conj()) + phi_star,
    )
}

/// S(zeta, k) = [[zeta, alpha_k], [conj(alpha_k) zeta, 1]], acting on (phi, phi*).
pub fn szego_transfer(seq: &VerblunskySequence, k: i64) -> Result<TransferMatrix> {
    let (a, _) = rho_checked(seq, k)?;
    let o = one();
    Ok(TransferMatrix {
        site: k,
        m: [
            [Lp::monomial(1, o), Lp::constant(a)],
            [Lp::monomial(1, a.conj()), Lp::constant(o)],
        ],
    })
}

/// gamma_k = prod_{j=1}^{k} 1/rho_j for k = 0..=n.
pub fn szego_gammas(seq: &VerblunskySequence, n: usize) -> Result<Vec<f64>> {
    let mut g = vec![1.0];
    for k in 1..=n as i64 {
        let (_, rho) = rho_checked(seq, k)?;
        g.push(g[g.len() - 1] / rho);
    }
    Ok(g)
}

/// phi_k and phi*_k for k = 0..=n from coefficients alpha_1..alpha_n.
pub fn szego_polynomials(seq: &VerblunskySequence, n: usize) -> Result<(Vec<Lp>, Vec<Lp>)> {
    if n < 1 {
        return Err(CmvError::Size("need at least one Szegő step".into()));
    }
    let mut phi = vec![Lp::constant(one())];
    let mut phs = vec![Lp::constant(one())];
    for k in 1..=n as i64 {
        let a = seq.get(k)?;
        let (p, s) = szego_step(a, &phi[phi.len() - 1], &phs[phs.len() - 1]);
        phi.push(p);
        phs.push(s);
    }
    Ok((phi, phs))
}

/// Initial values ((p, r), (q, s)) at k0.
pub fn seed_values(k0: i64, side: Side, z: C64) -> ((C64, C64), (C64, C64)) {
    let o = one();
    match (side, is_odd(k0)) {
        (Side::Plus, true) => ((z, o), (z, -o)),
        (Side::Plus, false) => ((o, o), (-o, o)),
        (Side::Minus, true) => ((o, -o), (o, o)),
        (Side::Minus, false) => ((-z, o), (z, o)),
    }
}

fn seed_polys(k0: i64, side: Side) -> ((Lp, Lp), (Lp, Lp)) {
    let o = one();
    let c = Lp::constant;
    let zm = |s: f64| Lp::monomial(1, C64::new(s, 0.0));
    match (side, is_odd(k0)) {
        (Side::Plus, true) => ((zm(1.0), c(o)), (zm(1.0), c(-o))),
        (Side::Plus, false) => ((c(o), c(o)), (c(-o), c(o))),
        (Side::Minus, true) => ((c(o), c(-o)), (c(o), c(o))),
        (Side::Minus, false) => ((zm(-1.0), c(o)), (zm(1.0), c(o))),
    }
}

/// Whether the tilde variants of p and q carry an extra factor 1/z.
pub fn tilde_divides(k0: i64, side: Side) -> bool {
    match side {
        Side::Plus => is_odd(k0),
        Side::Minus => !is_odd(k0),
    }
}

/// W((p,r),(q,s)) at site k for the family seeded at k0.
pub fn expected_wronskian(k0: i64, side: Side, k: i64, z: C64) -> C64 {
    match side {
        Side::Plus => {
            parity_sign(k)
                * if is_odd(k0) {
                    2.0 * z
                } else {
                    C64::new(2.0, 0.0)
                }
        }
        Side::Minus => {
            -parity_sign(k)
                * if is_odd(k0) {
                    C64::new(2.0, 0.0)
                } else {
                    2.0 * z
                }
        }
    }
}

/// W((u1,v1),(u2,v2)) = u1 v2 - u2 v1.
pub fn wronskian(x: (C64, C64), y: (C64, C64)) -> C64 {
    x.0 * y.1 - y.0 * x.1
}

/// The four Laurent-polynomial solutions seeded at k0, tabulated on [k_min, k_max].
#[derive(Clone, Debug)]
pub struct SolutionFamily {
    pub k0: i64,
    pub side: Side,
    pub k_min: i64,
    pub k_max: i64,
    p: Vec<Lp>,
    r: Vec<Lp>,
    q: Vec<Lp>,
    s: Vec<Lp>,
}

impl SolutionFamily {
    fn idx(&self, k: i64) -> Result<usize> {
        if k < self.k_min || k > self.k_max {
            return Err(CmvError::Domain(format!(
                "site {k} outside [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        Ok((k - self.k_min) as usize)
    }
    pub fn p(&self, k: i64) -> Result<&Lp> {
        Ok(&self.p[self.idx(k)?])
    }
    pub fn r(&self, k: i64) -> Result<&Lp> {
        Ok(&self.r[self.idx(k)?])
    }
    pub fn q(&self, k: i64) -> Result<&Lp> {
        Ok(&self.q[self.idx(k)?])
    }
    pub fn s(&self, k: i64) -> Result<&Lp> {
        Ok(&self.s[self.idx(k)?])
    }
    pub fn p_tilde(&self, k: i64) -> Result<Lp> {
        let p = self.p(k)?;
        Ok(if tilde_divides(self.k0, self.side) {
            p.shift(-1)
        } else {
            p.clone()
        })
    }
    pub fn q_tilde(&self, k: i64) -> Result<Lp> {
        let q = self.q(k)?;
        Ok(if tilde_divides(self.k0, self.side) {
            q.shift(-1)
        } else {
            q.clone()
        })
    }
    /// p s - q r at site k, as a Laurent polynomial.
    pub fn wronskian(&self, k: i64) -> Result<Lp> {
        Ok(&(self.p(k)? * self.s(k)?) - &(self.q(k)? * self.r(k)?))
    }
}

/// Builds p, r, q, s seeded at k0 on [k_min, k_max]: forward with T above k0 and backward with
/// T^{-1} below. Needs coefficients on [k_min+1, k_max].
pub fn build_solution_family(
    seq: &VerblunskySequence,
    k0: i64,
    side: Side,
    k_min: i64,
    k_max: i64,
) -> Result<SolutionFamily> {
    if k_min > k0 || k_max < k0 {
        return Err(CmvError::Domain(format!(
            "window [{k_min}, {k_max}] must contain k0 = {k0}"
        )));
    }
    let n = (k_max - k_min + 1) as usize;
    let mut p = vec![Lp::zero(); n];
    let mut r = vec![Lp::zero(); n];
    let mut q = vec![Lp::zero(); n];
    let mut s = vec![Lp::zero(); n];
    let i0 = (k0 - k_min) as usize;
    let ((p0, r0), (q0, s0)) = seed_polys(k0, side);
    p[i0] = p0;
    r[i0] = r0;
    q[i0] = q0;
    s[i0] = s0;
    let mul = |t: &TransferMatrix, u: &Lp, v: &Lp| {
        (
            &(&t.m[0][0] * u) + &(&t.m[0][1] * v),
            &(&t.m[1][0] * u) + &(&t.m[1][1] * v),
        )
    };
    for k in k0 + 1..=k_max {
        let t = transfer_matrix(seq, k)?;
        let i = (k - k_min) as usize;
        (p[i], r[i]) = mul(&t, &p[i - 1], &r[i - 1]);
        (q[i], s[i]) = mul(&t, &q[i - 1], &s[i - 1]);
    }
    for k in (k_min + 1..=k0).rev() {
        let t = transfer_matrix(seq, k)?.inverse();
        let i = (k - k_min) as usize;
        (p[i - 1], r[i - 1]) = mul(&t, &p[i], &r[i]);
        (q[i - 1], s[i - 1]) = mul(&t, &q[i], &s[i]);
    }
    Ok(SolutionFamily {
        k0,
        side,
        k_min,
        k_max,
        p,
        r,
        q,
        s,
    })
}

/// Largest residual of the reflection relations at site k and point z:
///   plus:  r(z) = conj(p~(1/conj z)),  s(z) = -conj(q~(1/conj z))
///   minus: r(z) = -conj(p~(1/conj z)), s(z) = conj(q~(1/conj z))
pub fn conjugation_check(fam: &SolutionFamily, k: i64, z: C64) -> Result<f64> {
    let zr = one() / z.conj();
    let (sr, ss) = match fam.side {
        Side::Plus => (1.0, -1.0),
        Side::Minus => (-1.0, 1.0),
    };
    let e1 = fam.r(k)?.eval(z) - sr * fam.p_tilde(k)?.eval(zr).conj();
    let e2 = fam.s(k)?.eval(z) - ss * fam.q_tilde(k)?.eval(zr).conj();
    Ok(e1.norm().max(e2.norm()))
}

/// Values of p, r, q, s at one fixed z on [k_min, k_max], computed by direct recursion.
#[derive(Clone, Debug)]
pub struct NumericFamily {
    pub k0: i64,
    pub side: Side,
    pub z: C64,
    pub k_min: i64,
    pub k_max: i64,
    pub p: Vec<C64>,
    pub r: Vec<C64>,
    pub q: Vec<C64>,
    pub s: Vec<C64>,
}

impl NumericFamily {
    pub fn idx(&self, k: i64) -> Result<usize> {
        if k < self.k_min || k > self.k_max {
            return Err(CmvError::Domain(format!(
                "site {k} outside [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        Ok((k - self.k_min) as usize)
    }
    pub fn pr(&self, k: i64) -> Result<(C64, C64)> {
        let i = self.idx(k)?;
        Ok((self.p[i], self.r[i]))
    }
    pub fn qs(&self, k: i64) -> Result<(C64, C64)> {
        let i = self.idx(k)?;
        Ok((self.q[i], self.s[i]))
    }
    /// Factor applied to p and q to form their tilde variants.
    pub fn tilde_factor(&self) -> C64 {
        if tilde_divides(self.k0, self.side) {
            one() / self.z
        } else {
            one()
        }
    }
}

pub fn build_numeric_family(
    seq: &VerblunskySequence,
    k0: i64,
    side: Side,
    z: C64,
    k_min: i64,
    k_max: i64,
) -> Result<NumericFamily> {
    if k_min > k0 || k_max < k0 {
        return Err(CmvError::Domain(format!(
            "window [{k_min}, {k_max}] must contain k0 = {k0}"
        )));
    }
    if z.norm() == 0.0 {
        return Err(CmvError::Domain(
            "z = 0 is not allowed in the transfer recursion".into(),
        ));
    }
    let n = (k_max - k_min + 1) as usize;
    let zero = C64::new(0.0, 0.0);
    let (mut p, mut r, mut q, mut s) = (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let i0 = (k0 - k_min) as usize;
    let ((p0, r0), (q0, s0)) = seed_values(k0, side, z);
    (p[i0], r[i0], q[i0], s[i0]) = (p0, r0, q0, s0);
    for k in k0 + 1..=k_max {
        let i = (k - k_min) as usize;
        (p[i], r[i]) = step_forward(seq, k, z, (p[i - 1], r[i - 1]))?;
        (q[i], s[i]) = step_forward(seq, k, z, (q[i - 1], s[i - 1]))?;
    }
    for k in (k_min + 1..=k0).rev() {
        let i = (k - k_min) as usize;
        (p[i - 1], r[i - 1]) = step_backward(seq, k, z, (p[i], r[i]))?;
        (q[i - 1], s[i - 1]) = step_backward(seq, k, z, (q[i], s[i]))?;
    }
    Ok(NumericFamily {
        k0,
        side,
        z,
        k_min,
        k_max,
        p,
        r,
        q,
        s,
    })
}

/// p_+ and r_+ at site k (seeded at 0) rebuilt from Szegő polynomials:
///   k odd:  p = gamma z^{-(k-1)/2} phi,  r = gamma z^{-(k+1)/2} phi*
///   k even: p = gamma z^{-k/2} phi*,     r = gamma z^{-k/2} phi
/// with gamma^2 = prod_{j<=k} rho_j^{-2}.
pub fn plus_family_from_szego(seq: &VerblunskySequence, k: usize) -> Result<(Lp, Lp)> {
    if k == 0 {
        return Ok((Lp::constant(one()), Lp::constant(one())));
    }
    let (phi, phs) = szego_polynomials(seq, k)?;
    let mut gamma = 1.0;
    for j in 1..=k as i64 {
        let (_, rho) = rho_checked(seq, j)?;
        gamma /= rho;
    }
    let g = C64::new(gamma, 0.0);
    let ki = k as i64;
    Ok(if k % 2 == 1 {
        (
            phi[k].shift(-(ki - 1) / 2).scale(g),
            phs[k].shift(-(ki + 1) / 2).scale(g),
        )
    } else {
        (
            phs[k].shift(-ki / 2).scale(g),
            phi[k].shift(-ki / 2).scale(g),
        )
    })
}
