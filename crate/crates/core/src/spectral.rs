//! Spectral measures of finite CMV matrices, orthonormal Laurent polynomials and the inverse
//! problem (coefficients from a measure).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CmvError, Result};
use crate::laurent::LaurentPolynomial as Lp;
use crate::transfer::{build_numeric_family, is_odd};
use crate::verblunsky::{BandedUnitary, Side, VerblunskySequence};
use crate::C64;

/// Atoms lighter than this are dropped from operator measures.
pub const ATOM_DROP: f64 = 1e-14;
/// Eigenvalues closer than this in angle are merged into one atom.
pub const ATOM_MERGE: f64 = 1e-12;

/// Eigen-decomposition of a unitary matrix through its complex Schur form, which is diagonal up
/// to rounding because unitary matrices are normal.
#[derive(Clone, Debug)]
pub struct UnitaryEigen {
    pub lo: i64,
    pub values: Vec<C64>,
    pub vectors: DMatrix<C64>,
}

pub fn normalize_angle(t: f64) -> f64 {
    let x = t.rem_euclid(2.0 * PI);
    if x >= 2.0 * PI {
        0.0
    } else {
        x
    }
}

impl UnitaryEigen {
    pub fn angles(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| normalize_angle(v.arg()))
            .collect()
    }

    /// Component of eigenvector j at site k.
    pub fn component(&self, k: i64, j: usize) -> C64 {
        self.vectors[((k - self.lo) as usize, j)]
    }
}

pub fn eigen_unitary(u: &BandedUnitary) -> Result<UnitaryEigen> {
    let defect = u.unitarity_defect();
    if defect > 1e-10 {
        return Err(CmvError::Precondition(format!(
            "matrix is not unitary (defect {defect:e})"
        )));
    }
    let n = u.dim();
    let schur = nalgebra::linalg::Schur::try_new(u.matrix.clone(), 1e-15, 10_000)
        .ok_or_else(|| CmvError::IllConditioned("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let mut off: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            off = off.max(t[(i, j)].norm());
        }
    }
    if off > 1e-8 {
        return Err(CmvError::IllConditioned(format!(
            "Schur form not diagonal (off-diagonal {off:e})"
        )));
    }
    let values = (0..n).map(|i| t[(i, i)]).collect();
    Ok(UnitaryEigen {
        lo: u.lo,
        values,
        vectors: q,
    })
}

/// Density samples on the uniform grid theta_m = 2 pi m / N; the measure is (1/N) sum f_m delta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySamples {
    pub grid_size: usize,
    pub values: Vec<f64>,
}

/// A finite measure on the unit circle: atoms plus an optional sampled density with respect to
/// normalized arc length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleMeasure {
    pub atoms: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySamples>,
}

impl CircleMeasure {
    pub fn atomic(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        for a in atoms.iter_mut() {
            a.0 = normalize_angle(a.0);
        }
        atoms.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let m = CircleMeasure {
            atoms,
            density: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.atoms.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(CmvError::Domain(
                    "atom angles must be strictly increasing".into(),
                ));
            }
        }
        for &(t, w) in &self.atoms {
            if !(0.0..2.0 * PI).contains(&t) || !(w > 0.0) || !w.is_finite() {
                return Err(CmvError::Domain(format!("bad atom ({t}, {w})")));
            }
        }
        if let Some(d) = &self.density {
            if d.values.len() != d.grid_size || d.values.iter().any(|v| !(*v >= 0.0)) {
                return Err(CmvError::Domain(
                    "density samples must be nonnegative and match grid_size".into(),
                ));
            }
        }
        Ok(())
    }

    /// Quadrature nodes (angle, weight) covering atoms and density samples.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let mut out = self.atoms.clone();
        if let Some(d) = &self.density {
            let n = d.grid_size as f64;
            for (m, &f) in d.values.iter().enumerate() {
                if f > 0.0 {
                    out.push((2.0 * PI * m as f64 / n, f / n));
                }
            }
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.nodes().iter().map(|n| n.1).sum()
    }

    /// Integral of zeta^j.
    pub fn moment(&self, j: i64) -> C64 {
        self.nodes()
            .iter()
            .map(|&(t, w)| C64::from_polar(w, j as f64 * t))
            .sum()
    }

    /// Integral of f.
    pub fn integrate(&self, f: impl Fn(C64) -> C64) -> C64 {
        self.nodes()
            .iter()
            .map(|&(t, w)| f(C64::from_polar(1.0, t)) * w)
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: CircleMeasure = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

fn atoms_from_weights(angles: Vec<f64>, weights: Vec<f64>) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = angles.into_iter().zip(weights).collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    for (t, w) in pairs {
        match out.last_mut() {
            Some(last) if t - last.0 < ATOM_MERGE => last.1 += w,
            _ => out.push((t, w)),
        }
    }
    // wrap-around merge near 0 and 2pi
    if out.len() > 1 && out[0].0 + 2.0 * PI - out[out.len() - 1].0 < ATOM_MERGE {
        let w = out.pop().unwrap().1;
        out[0].1 += w;
    }
    out.retain(|a| a.1 > ATOM_DROP);
    out
}

/// Spectral measure of U at delta_{k0}: atoms at the eigenangles with weights |v_j(k0)|^2.
pub fn measure_from_operator(u: &BandedUnitary, k0: i64) -> Result<CircleMeasure> {
    u.index(k0)?;
    let e = eigen_unitary(u)?;
    measure_from_eigen(&e, k0)
}

pub fn measure_from_eigen(e: &UnitaryEigen, k0: i64) -> Result<CircleMeasure> {
    let n = e.values.len();
    let w = (0..n).map(|j| e.component(k0, j).norm_sqr()).collect();
    let m = CircleMeasure {
        atoms: atoms_from_weights(e.angles(), w),
        density: None,
    };
    m.validate()?;
    Ok(m)
}

/// 2x2 matrix-valued measure of U at (delta_{k-1}, delta_k).
#[derive(Clone, Debug)]
pub struct MatrixMeasure {
    pub atoms: Vec<(f64, [[C64; 2]; 2])>,
}

impl MatrixMeasure {
    pub fn total(&self) -> [[C64; 2]; 2] {
        let mut t = [[C64::new(0.0, 0.0); 2]; 2];
        for (_, w) in &self.atoms {
            for i in 0..2 {
                for j in 0..2 {
                    t[i][j] += w[i][j];
                }
            }
        }
        t
    }
}

pub fn matrix_measure(u: &BandedUnitary, k: i64) -> Result<MatrixMeasure> {
    u.index(k - 1)?;
    u.index(k)?;
    let e = eigen_unitary(u)?;
    let angles = e.angles();
    let atoms = (0..angles.len())
        .map(|j| {
            let x = [e.component(k - 1, j), e.component(k, j)];
            let mut w = [[C64::new(0.0, 0.0); 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    w[a][b] = x[a] * x[b].conj();
                }
            }
            (angles[j], w)
        })
        .collect();
    Ok(MatrixMeasure { atoms })
}

/// G(i, j) = integral of conj(P_i) P_j.
pub fn gram_matrix(polys: &[Lp], mu: &CircleMeasure) -> DMatrix<C64> {
    let nodes = mu.nodes();
    let n = polys.len();
    let vals: Vec<Vec<C64>> = polys
        .iter()
        .map(|p| {
            nodes
                .iter()
                .map(|&(t, _)| p.eval(C64::from_polar(1.0, t)))
                .collect()
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| {
        nodes
            .iter()
            .enumerate()
            .map(|(m, &(_, w))| vals[i][m].conj() * vals[j][m] * w)
            .sum()
    })
}

/// Which orthonormal family to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpucFamily {
    PPlus,
    RPlus,
    PMinus,
    RMinus,
}

impl OpucFamily {
    pub fn side(self) -> Side {
        match self {
            OpucFamily::PPlus | OpucFamily::RPlus => Side::Plus,
            OpucFamily::PMinus | OpucFamily::RMinus => Side::Minus,
        }
    }
}

/// Signed monomials (exponent, sign) whose span grows one element at a time with the family index.
pub fn monomial_order(family: OpucFamily, k0: i64, n: usize) -> Vec<(i64, f64)> {
    let odd = is_odd(k0);
    (0..n as i64)
        .map(|i| {
            let ev = i % 2 == 0;
            match (family, odd) {
                (OpucFamily::PPlus, true) => (if ev { 1 + i / 2 } else { -(i - 1) / 2 }, 1.0),
                (OpucFamily::PPlus, false) | (OpucFamily::RPlus, true) => (
                    if i == 0 {
                        0
                    } else if ev {
                        -i / 2
                    } else {
                        (i + 1) / 2
                    },
                    1.0,
                ),
                (OpucFamily::RPlus, false) => (if ev { i / 2 } else { -(i + 1) / 2 }, 1.0),
                (OpucFamily::PMinus, true) | (OpucFamily::RMinus, false) => {
                    if ev {
                        (-i / 2, 1.0)
                    } else {
                        ((i + 1) / 2, -1.0)
                    }
                }
                (OpucFamily::PMinus, false) => {
                    if ev {
                        (1 + i / 2, -1.0)
                    } else {
                        (-(i - 1) / 2, 1.0)
                    }
                }
                (OpucFamily::RMinus, true) => {
                    if ev {
                        (i / 2, -1.0)
                    } else {
                        (-(i + 1) / 2, 1.0)
                    }
                }
            }
        })
        .collect()
}

/// Orthonormal Laurent polynomials and their weighted values sqrt(w_m) P(zeta_m) at the nodes.
#[derive(Clone, Debug)]
pub struct OrthoFamily {
    pub family: OpucFamily,
    pub k0: i64,
    pub polys: Vec<Lp>,
    pub values: Vec<DVector<C64>>,
    nodes: Vec<(f64, f64)>,
}

impl OrthoFamily {
    /// Site attached to the i-th polynomial.
    pub fn site(&self, i: usize) -> i64 {
        match self.family.side() {
            Side::Plus => self.k0 + i as i64,
            Side::Minus => self.k0 - i as i64,
        }
    }

    fn index(&self, k: i64) -> Result<usize> {
        let i = match self.family.side() {
            Side::Plus => k - self.k0,
            Side::Minus => self.k0 - k,
        };
        if i < 0 || i as usize >= self.polys.len() {
            return Err(CmvError::Domain(format!(
                "site {k} not covered by the orthonormal family"
            )));
        }
        Ok(i as usize)
    }

    pub fn poly_at_site(&self, k: i64) -> Result<&Lp> {
        Ok(&self.polys[self.index(k)?])
    }

    pub fn values_at_site(&self, k: i64) -> Result<&DVector<C64>> {
        Ok(&self.values[self.index(k)?])
    }

    /// Weighted values multiplied by zeta^j.
    pub fn shifted_values(&self, k: i64, j: i64) -> Result<DVector<C64>> {
        let v = self.values_at_site(k)?;
        Ok(DVector::from_fn(v.len(), |m, _| {
            v[m] * C64::from_polar(1.0, j as f64 * self.nodes[m].0)
        }))
    }
}

fn inner(x: &DVector<C64>, y: &DVector<C64>) -> C64 {
    x.dotc(y)
}

/// Orthonormalizes the signed monomials of `monomial_order` in L^2(mu). Each new direction is
/// zeta^{+-1} times an earlier orthonormal function (Krylov form), followed by modified
/// Gram-Schmidt with one reorthogonalization pass. The coefficient of the newest monomial is
/// then real and positive automatically.
pub fn gram_schmidt_opuc(
    mu: &CircleMeasure,
    k0: i64,
    n: usize,
    family: OpucFamily,
) -> Result<OrthoFamily> {
    mu.validate()?;
    let nodes = mu.nodes();
    if nodes.len() < n {
        return Err(CmvError::Rank {
            achieved: nodes.len(),
            requested: n,
        });
    }
    let order = monomial_order(family, k0, n);
    let zeta: Vec<C64> = nodes
        .iter()
        .map(|&(t, _)| C64::from_polar(1.0, t))
        .collect();
    let sq: Vec<f64> = nodes.iter().map(|&(_, w)| w.sqrt()).collect();
    let mut polys: Vec<Lp> = Vec::with_capacity(n);
    let mut values: Vec<DVector<C64>> = Vec::with_capacity(n);
    for (i, &(e, sgn)) in order.iter().enumerate() {
        let (mut v, mut c) = if i == 0 {
            let v = DVector::from_fn(nodes.len(), |m, _| zeta[m].powi(e as i32) * sq[m] * sgn);
            (v, Lp::monomial(e, C64::new(sgn, 0.0)))
        } else {
            let j = order[..i]
                .iter()
                .position(|&(ej, _)| (ej - e).abs() == 1)
                .ok_or_else(|| {
                    CmvError::Domain("monomial order has no adjacent predecessor".into())
                })?;
            let (ej, sj) = order[j];
            let shift = e - ej;
            let f = sgn / sj;
            let v = DVector::from_fn(nodes.len(), |m, _| {
                values[j][m] * zeta[m].powi(shift as i32) * f
            });
            (v, polys[j].shift(shift).scale(C64::new(f, 0.0)))
        };
        let before = v.norm();
        for _pass in 0..2 {
            for l in 0..i {
                let h = inner(&values[l], &v);
                v -= &values[l] * h;
                c = &c - &polys[l].scale(h);
            }
        }
        let nv = v.norm();
        if !(nv > 1e-13 * before) {
            return Err(CmvError::Rank {
                achieved: i,
                requested: n,
            });
        }
        v /= C64::new(nv, 0.0);
        c = c.scale(C64::new(1.0 / nv, 0.0));
        values.push(v);
        polys.push(c);
    }
    Ok(OrthoFamily {
        family,
        k0,
        polys,
        values,
        nodes,
    })
}

/// Coefficients recovered from a measure together with the normalization read off the recursion.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub side: Side,
    pub k0: i64,
    /// (site, alpha) in order of increasing distance from k0.
    pub alphas: Vec<(i64, C64)>,
    /// (site, rho) read from the recursion normalization, where available.
    pub rhos: Vec<(i64, C64)>,
    /// Number of leading entries considered reliable.
    pub reliable: usize,
}

impl Reconstruction {
    /// max |rho^2 + |alpha|^2 - 1| over the reliable range.
    pub fn normalization_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, (k, a)) in self.alphas.iter().enumerate().take(self.reliable) {
            if let Some((_, r)) = self.rhos.iter().find(|(kr, _)| kr == k) {
                worst = worst
                    .max((r.norm_sqr() + a.norm_sqr() - 1.0).abs())
                    .max(r.im.abs());
            }
            let _ = i;
        }
        worst
    }

    pub fn to_sequence(&self) -> Result<VerblunskySequence> {
        VerblunskySequence::from_entries("reconstructed", self.alphas.iter().copied())
    }
}

/// Recovers n coefficients from mu = mu_{+-}(., k0). Plus side gives alpha_{k0+1..=k0+n}, minus
/// side gives alpha_{k0}, alpha_{k0-1}, ..., alpha_{k0-n+1}.
///   k odd:  alpha_k = -(p(k-1), zeta r(k-1))
///   k even: alpha_k = -(r(k-1), p(k-1))
pub fn reconstruct_verblunsky(
    mu: &CircleMeasure,
    k0: i64,
    n: usize,
    side: Side,
) -> Result<Reconstruction> {
    let nodes = mu.nodes().len();
    if nodes < n + 2 {
        return Err(CmvError::Rank {
            achieved: nodes,
            requested: n + 2,
        });
    }
    let (pf, rf) = match side {
        Side::Plus => (OpucFamily::PPlus, OpucFamily::RPlus),
        Side::Minus => (OpucFamily::PMinus, OpucFamily::RMinus),
    };
    let p = gram_schmidt_opuc(mu, k0, n + 1, pf)?;
    let r = gram_schmidt_opuc(mu, k0, n + 1, rf)?;
    let sites: Vec<i64> = match side {
        Side::Plus => (1..=n as i64).map(|j| k0 + j).collect(),
        Side::Minus => (0..n as i64).map(|j| k0 - j).collect(),
    };
    let mut alphas = Vec::with_capacity(n);
    let mut rhos = Vec::with_capacity(n);
    for &k in &sites {
        let pk1 = p.values_at_site(k - 1)?;
        let rk1 = r.values_at_site(k - 1)?;
        let alpha = if is_odd(k) {
            -inner(pk1, &r.shifted_values(k - 1, 1)?)
        } else {
            -inner(rk1, pk1)
        };
        if alpha.norm() >= 1.0 - 1e-10 {
            return Err(CmvError::IllConditioned(format!(
                "recovered |alpha_{k}| = {} is not below 1",
                alpha.norm()
            )));
        }
        alphas.push((k, alpha));
        if let Ok(pk) = p.values_at_site(k) {
            let rho = if is_odd(k) {
                inner(pk, &r.shifted_values(k - 1, 1)?)
            } else {
                inner(pk, rk1)
            };
            rhos.push((k, rho));
        }
    }
    Ok(Reconstruction {
        side,
        k0,
        alphas,
        rhos,
        reliable: (n / 3).max(1),
    })
}

/// Deviation from orthonormality of the 2-vector systems R (against d Omega) and P (against
/// d Omega^T) for sites k0-m..=k0+m with m = n/4, where Omega is the matrix measure at
/// (delta_{k0-1}, delta_{k0}). Returns (R deviation, P deviation).
pub fn full_lattice_basis_check(
    seq: &VerblunskySequence,
    u: &BandedUnitary,
    k0: i64,
    n: usize,
) -> Result<(f64, f64)> {
    let mm = matrix_measure(u, k0)?;
    let d = seq.derived(k0)?;
    let (rho, a, b) = (C64::new(d.rho, 0.0), d.a, d.b);
    let m = (n / 4) as i64;
    let sites: Vec<i64> = (k0 - m..=k0 + m).collect();
    let ns = sites.len();
    let mut gr = DMatrix::<C64>::zeros(ns, ns);
    let mut gp = DMatrix::<C64>::zeros(ns, ns);
    let half = C64::new(0.5, 0.0);
    for (theta, w) in &mm.atoms {
        let zeta = C64::from_polar(1.0, *theta);
        let fam = build_numeric_family(seq, k0, Side::Plus, zeta, k0 - m, k0 + m)?;
        let mut rv = Vec::with_capacity(ns);
        let mut pv = Vec::with_capacity(ns);
        for &k in &sites {
            let (p, r) = fam.pr(k)?;
            let (q, s) = fam.qs(k)?;
            let rvec = if is_odd(k0) {
                [half * (rho * s + rho * r), half * (-b * s + a * r)]
            } else {
                [
                    half * (-rho * s + rho * r),
                    half * (b.conj() * s + a.conj() * r),
                ]
            };
            let pvec = if is_odd(k0) {
                let f = half / zeta;
                [f * (-rho * q + rho * p), f * (b.conj() * q + a.conj() * p)]
            } else {
                [half * (rho * q + rho * p), half * (-b * q + a * p)]
            };
            rv.push(rvec);
            pv.push(pvec);
        }
        for i in 0..ns {
            for j in 0..ns {
                let mut sr = C64::new(0.0, 0.0);
                let mut sp = C64::new(0.0, 0.0);
                for x in 0..2 {
                    for y in 0..2 {
                        sr += rv[i][x].conj() * w[x][y] * rv[j][y];
                        sp += pv[i][x].conj() * w[y][x] * pv[j][y];
                    }
                }
                gr[(i, j)] += sr;
                gp[(i, j)] += sp;
            }
        }
    }
    let id = DMatrix::<C64>::identity(ns, ns);
    let dev = |g: &DMatrix<C64>| (g - &id).iter().map(|x| x.norm()).fold(0.0, f64::max);
    Ok((dev(&gr), dev(&gp)))
}
