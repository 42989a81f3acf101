//! Verblunsky coefficients, the 2x2 blocks built from them and finite CMV matrices.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CmvError, Result};
use crate::C64;

/// Slack allowed on |alpha| <= 1 before a coefficient is rejected.
pub const UNIT_SLACK: f64 = 1e-14;

/// Quantities derived from a single coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derived {
    pub alpha: C64,
    pub rho: f64,
    pub a: C64,
    pub b: C64,
}

pub fn derive_coefficients(alpha: C64) -> Result<Derived> {
    let m2 = alpha.norm_sqr();
    if !m2.is_finite() || m2.sqrt() > 1.0 + UNIT_SLACK {
        return Err(CmvError::Domain(format!(
            "|alpha| = {} exceeds 1",
            alpha.norm()
        )));
    }
    let rho = (1.0 - m2).max(0.0).sqrt();
    Ok(Derived {
        alpha,
        rho,
        a: C64::new(1.0, 0.0) + alpha,
        b: C64::new(1.0, 0.0) - alpha,
    })
}

/// theta_k = [[-alpha, rho], [rho, conj(alpha)]], acting on the index pair (k-1, k).
#[derive(Clone, Copy, Debug)]
pub struct ThetaBlock {
    pub site: i64,
    pub m: [[C64; 2]; 2],
}

pub fn theta_block(alpha: C64, site: i64) -> Result<ThetaBlock> {
    let d = derive_coefficients(alpha)?;
    let r = C64::new(d.rho, 0.0);
    Ok(ThetaBlock {
        site,
        m: [[-alpha, r], [r, alpha.conj()]],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

impl std::str::FromStr for Side {
    type Err = CmvError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(Side::Plus),
            "minus" | "-" => Ok(Side::Minus),
            _ => Err(CmvError::Parse(format!("unknown side '{s}'"))),
        }
    }
}

/// How a coefficient sequence is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorSpec {
    Constant {
        value: C64,
    },
    Random {
        seed: u64,
        cap: f64,
    },
    /// alpha_k = alpha0 g^k with g = -exp(i(theta0+theta1)/2), |alpha0| = cos((theta1-theta0)/4).
    Geometric {
        theta0: f64,
        theta1: f64,
        phase: f64,
    },
    File {
        path: PathBuf,
    },
}

pub const DEFAULT_RANDOM_CAP: f64 = 0.5;

/// Real number or a multiple of pi such as `pi`, `-pi/2`, `2pi`.
pub fn parse_real(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    let bad = || CmvError::Parse(format!("cannot parse number '{s}'"));
    if let Some(idx) = t.find("pi") {
        let (pre, post) = (&t[..idx], &t[idx + 2..]);
        let mult = match pre.trim_end_matches('*') {
            "" => 1.0,
            "-" => -1.0,
            p => p.parse::<f64>().map_err(|_| bad())?,
        };
        let div = match post {
            "" => 1.0,
            p => p
                .strip_prefix('/')
                .ok_or_else(bad)?
                .parse::<f64>()
                .map_err(|_| bad())?,
        };
        return Ok(mult * PI / div);
    }
    t.parse::<f64>().map_err(|_| bad())
}

impl GeneratorSpec {
    /// Parses `constant:re[:im]`, `random:seed[:cap]`, `geometric:theta0:theta1[:phase]`
    /// and `file:path`. Angles accept forms like `pi`, `2pi`, `pi/2`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let parts: Vec<&str> = if rest.is_empty() {
            vec![]
        } else {
            rest.split(':').collect()
        };
        let spec = match kind {
            "constant" => {
                let re = parts
                    .first()
                    .map(|p| parse_real(p))
                    .transpose()?
                    .unwrap_or(0.0);
                let im = parts
                    .get(1)
                    .map(|p| parse_real(p))
                    .transpose()?
                    .unwrap_or(0.0);
                GeneratorSpec::Constant {
                    value: C64::new(re, im),
                }
            }
            "random" => {
                let seed = parts
                    .first()
                    .ok_or_else(|| CmvError::Parse("random needs a seed".into()))?
                    .parse::<u64>()
                    .map_err(|e| CmvError::Parse(e.to_string()))?;
                let cap = parts
                    .get(1)
                    .map(|p| parse_real(p))
                    .transpose()?
                    .unwrap_or(DEFAULT_RANDOM_CAP);
                GeneratorSpec::Random { seed, cap }
            }
            "geometric" => {
                if parts.len() < 2 {
                    return Err(CmvError::Parse("geometric needs theta0:theta1".into()));
                }
                let phase = parts
                    .get(2)
                    .map(|p| parse_real(p))
                    .transpose()?
                    .unwrap_or(0.0);
                GeneratorSpec::Geometric {
                    theta0: parse_real(parts[0])?,
                    theta1: parse_real(parts[1])?,
                    phase,
                }
            }
            "file" => GeneratorSpec::File {
                path: PathBuf::from(rest),
            },
            _ => return Err(CmvError::Parse(format!("unknown generator '{kind}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GeneratorSpec::Constant { value } => {
                if value.norm() >= 1.0 {
                    return Err(CmvError::Domain(
                        "constant coefficient must satisfy |c| < 1".into(),
                    ));
                }
            }
            GeneratorSpec::Random { cap, .. } => {
                if !(0.0..1.0).contains(&cap) {
                    return Err(CmvError::Domain(format!(
                        "radius cap {cap} must lie in [0, 1)"
                    )));
                }
            }
            GeneratorSpec::Geometric { theta0, theta1, .. } => {
                let w = theta1 - theta0;
                if !(w > 0.0 && w <= 2.0 * PI + 1e-12) {
                    return Err(CmvError::Domain(
                        "geometric arc needs 0 < theta1 - theta0 <= 2pi".into(),
                    ));
                }
            }
            GeneratorSpec::File { .. } => {}
        }
        Ok(())
    }

    /// Short identifier kept with generated sequences.
    pub fn tag(&self) -> String {
        match self {
            GeneratorSpec::Constant { value } => format!("constant:{}:{}", value.re, value.im),
            GeneratorSpec::Random { seed, cap } => format!("random:{seed}:{cap}"),
            GeneratorSpec::Geometric {
                theta0,
                theta1,
                phase,
            } => format!("geometric:{theta0}:{theta1}:{phase}"),
            GeneratorSpec::File { path } => format!("file:{}", path.display()),
        }
    }

    /// Value at a single site. Random values depend only on (seed, k), never on the window.
    pub fn value_at(&self, k: i64) -> Result<C64> {
        match *self {
            GeneratorSpec::Constant { value } => Ok(value),
            GeneratorSpec::Random { seed, cap } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let u: f64 = rng.gen();
                let v: f64 = rng.gen();
                Ok(C64::from_polar(cap * u.sqrt(), 2.0 * PI * v))
            }
            GeneratorSpec::Geometric {
                theta0,
                theta1,
                phase,
            } => {
                let modulus = ((theta1 - theta0) / 4.0).cos();
                let g_arg = PI + 0.5 * (theta0 + theta1);
                Ok(C64::from_polar(modulus, phase + (k as f64) * g_arg))
            }
            GeneratorSpec::File { .. } => Err(CmvError::Domain(
                "file sequences have no closed form".into(),
            )),
        }
    }

    /// Ratio g of the geometric family, if this is one.
    pub fn geometric_ratio(&self) -> Option<C64> {
        match *self {
            GeneratorSpec::Geometric { theta0, theta1, .. } => {
                Some(-C64::from_polar(1.0, 0.5 * (theta0 + theta1)))
            }
            _ => None,
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// Coefficients indexed by integer sites, with a record of which sites are unit-modulus boundaries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerblunskySequence {
    entries: BTreeMap<i64, C64>,
    boundary: BTreeSet<i64>,
    pub tag: String,
}

impl VerblunskySequence {
    pub fn new(tag: impl Into<String>) -> Self {
        VerblunskySequence {
            entries: BTreeMap::new(),
            boundary: BTreeSet::new(),
            tag: tag.into(),
        }
    }

    pub fn from_entries(
        tag: impl Into<String>,
        entries: impl IntoIterator<Item = (i64, C64)>,
    ) -> Result<Self> {
        let mut s = Self::new(tag);
        for (k, a) in entries {
            s.insert(k, a)?;
        }
        Ok(s)
    }

    /// Inserts an interior coefficient (|alpha| < 1).
    pub fn insert(&mut self, k: i64, alpha: C64) -> Result<()> {
        if !(alpha.norm() < 1.0) {
            return Err(CmvError::Domain(format!(
                "|alpha_{k}| = {} is not below 1",
                alpha.norm()
            )));
        }
        self.entries.insert(k, alpha);
        self.boundary.remove(&k);
        Ok(())
    }

    /// Sets alpha_k = e^{is}, which decouples the sites below k from those at and above k.
    pub fn set_boundary(&mut self, k: i64, s: f64) {
        self.entries.insert(k, C64::from_polar(1.0, s));
        self.boundary.insert(k);
    }

    pub fn is_boundary(&self, k: i64) -> bool {
        self.boundary.contains(&k)
    }

    pub fn get(&self, k: i64) -> Result<C64> {
        self.entries
            .get(&k)
            .copied()
            .ok_or_else(|| CmvError::Domain(format!("coefficient at site {k} is not available")))
    }

    pub fn derived(&self, k: i64) -> Result<Derived> {
        derive_coefficients(self.get(k)?)
    }

    pub fn contains(&self, k: i64) -> bool {
        self.entries.contains_key(&k)
    }

    /// Smallest and largest stored sites.
    pub fn range(&self) -> Option<(i64, i64)> {
        Some((
            *self.entries.keys().next()?,
            *self.entries.keys().next_back()?,
        ))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        self.entries.iter().map(|(k, a)| (*k, *a))
    }

    /// Checks that every site in [lo, hi] is present.
    pub fn require(&self, lo: i64, hi: i64) -> Result<()> {
        for k in lo..=hi {
            if !self.contains(k) {
                return Err(CmvError::Domain(format!(
                    "coefficient at site {k} is not available"
                )));
            }
        }
        Ok(())
    }

    /// Reads "k re im" lines; '#' starts a comment.
    pub fn parse_file_contents(text: &str, tag: &str) -> Result<Self> {
        let mut s = Self::new(tag);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let err = || {
                CmvError::Parse(format!(
                    "line {}: expected 'k re im', got '{raw}'",
                    lineno + 1
                ))
            };
            if f.len() != 3 {
                return Err(err());
            }
            let k = f[0].parse::<i64>().map_err(|_| err())?;
            let re = f[1].parse::<f64>().map_err(|_| err())?;
            let im = f[2].parse::<f64>().map_err(|_| err())?;
            s.insert(k, C64::new(re, im))?;
        }
        Ok(s)
    }

    pub fn to_file_contents(&self) -> String {
        let mut out = String::new();
        for (k, a) in self.iter() {
            out.push_str(&format!("{k} {:.17e} {:.17e}\n", a.re, a.im));
        }
        out
    }
}

/// Fills [lo, hi] from a generator. File generators load every line of the file.
pub fn generate_sequence(spec: &GeneratorSpec, lo: i64, hi: i64) -> Result<VerblunskySequence> {
    spec.validate()?;
    if let GeneratorSpec::File { path } = spec {
        let text = std::fs::read_to_string(path)?;
        return VerblunskySequence::parse_file_contents(&text, &spec.tag());
    }
    if hi < lo {
        return Err(CmvError::Size(format!("empty window [{lo}, {hi}]")));
    }
    let mut s = VerblunskySequence::new(spec.tag());
    for k in lo..=hi {
        s.insert(k, spec.value_at(k)?)?;
    }
    Ok(s)
}

/// Dense unitary on the index window [lo, hi] together with its V and W factors.
#[derive(Clone, Debug)]
pub struct BandedUnitary {
    pub lo: i64,
    pub hi: i64,
    pub matrix: DMatrix<C64>,
    pub v: DMatrix<C64>,
    pub w: DMatrix<C64>,
}

pub const MAX_DENSE: usize = 512;

impl BandedUnitary {
    pub fn dim(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn index(&self, k: i64) -> Result<usize> {
        if k < self.lo || k > self.hi {
            return Err(CmvError::Domain(format!(
                "site {k} outside [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok((k - self.lo) as usize)
    }

    pub fn entry(&self, k: i64, kp: i64) -> Result<C64> {
        Ok(self.matrix[(self.index(k)?, self.index(kp)?)])
    }

    /// U^T = W V, since every theta block is symmetric.
    pub fn transpose(&self) -> BandedUnitary {
        BandedUnitary {
            lo: self.lo,
            hi: self.hi,
            matrix: self.matrix.transpose(),
            v: self.w.transpose(),
            w: self.v.transpose(),
        }
    }

    /// max |U* U - I| entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let g = self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(n, n);
        g.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Largest modulus found outside the five central diagonals.
    pub fn band_violation(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i.abs_diff(j) > 2 {
                    worst = worst.max(self.matrix[(i, j)].norm());
                }
            }
        }
        worst
    }

    /// max |U - V W| entrywise.
    pub fn factorization_defect(&self) -> f64 {
        let p = &self.v * &self.w;
        (&self.matrix - p)
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max)
    }
}

/// CMV matrix restricted to [k_lo, k_hi] with alpha_{k_lo} = e^{i s0} and alpha_{k_hi+1} = e^{i s1}.
/// Interior coefficients alpha_{k_lo+1..=k_hi} come from `seq`.
pub fn build_finite_cmv(
    seq: &VerblunskySequence,
    k_lo: i64,
    k_hi: i64,
    s0: f64,
    s1: f64,
) -> Result<BandedUnitary> {
    if k_hi <= k_lo {
        return Err(CmvError::Size(format!(
            "interval [{k_lo}, {k_hi}] needs at least two sites"
        )));
    }
    let n = (k_hi - k_lo + 1) as usize;
    if n > MAX_DENSE {
        return Err(CmvError::Size(format!("dimension {n} exceeds {MAX_DENSE}")));
    }
    let mut v = DMatrix::<C64>::zeros(n, n);
    let mut w = DMatrix::<C64>::zeros(n, n);
    for j in k_lo..=k_hi + 1 {
        let alpha = if j == k_lo {
            C64::from_polar(1.0, s0)
        } else if j == k_hi + 1 {
            C64::from_polar(1.0, s1)
        } else {
            let a = seq.get(j)?;
            if a.norm() >= 1.0 && !(seq.is_boundary(j) && (a.norm() - 1.0).abs() <= UNIT_SLACK) {
                return Err(CmvError::Domain(format!(
                    "interior coefficient at {j} has modulus {}",
                    a.norm()
                )));
            }
            a
        };
        let th = theta_block(alpha, j)?;
        let target = if j.rem_euclid(2) == 0 { &mut v } else { &mut w };
        for (bi, row) in [j - 1, j].into_iter().enumerate() {
            for (bj, col) in [j - 1, j].into_iter().enumerate() {
                if row >= k_lo && row <= k_hi && col >= k_lo && col <= k_hi {
                    target[((row - k_lo) as usize, (col - k_lo) as usize)] = th.m[bi][bj];
                }
            }
        }
    }
    let matrix = &v * &w;
    Ok(BandedUnitary {
        lo: k_lo,
        hi: k_hi,
        matrix,
        v,
        w,
    })
}

/// Half-lattice truncation with n sites. Plus: [k0, k0+n-1] with alpha_{k0} = e^{is} and the far
/// end alpha_{k0+n} = e^{i far_phase}. Minus: [k0-n+1, k0] with alpha_{k0+1} = e^{is} and
/// alpha_{k0-n+1} = e^{i far_phase}.
pub fn build_half_lattice(
    seq: &VerblunskySequence,
    k0: i64,
    s: f64,
    n: usize,
    side: Side,
    far_phase: f64,
) -> Result<BandedUnitary> {
    let n = n as i64;
    match side {
        Side::Plus => build_finite_cmv(seq, k0, k0 + n - 1, s, far_phase),
        Side::Minus => build_finite_cmv(seq, k0 - n + 1, k0, far_phase, s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let d = derive_coefficients(C64::new(0.6, 0.0)).unwrap();
        assert!((d.rho - 0.8).abs() < 1e-15);
        assert_eq!(d.a, C64::new(1.6, 0.0));
        assert_eq!(d.b, C64::new(0.4, 0.0));
        let d = derive_coefficients(C64::new(0.0, 1.0)).unwrap();
        assert_eq!(d.rho, 0.0);
        assert!(derive_coefficients(C64::new(1.1, 0.0)).is_err());
    }

    #[test]
    fn theta_is_unitary_and_symmetric() {
        let t = theta_block(C64::new(0.3, -0.4), 3).unwrap().m;
        assert_eq!(t[0][1], t[1][0]);
        for i in 0..2 {
            for j in 0..2 {
                let g: C64 = (0..2).map(|l| t[l][i].conj() * t[l][j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g - e).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn parse_generators() {
        assert_eq!(
            GeneratorSpec::parse("constant:0.25").unwrap(),
            GeneratorSpec::Constant {
                value: C64::new(0.25, 0.0)
            }
        );
        match GeneratorSpec::parse("geometric:0:pi").unwrap() {
            GeneratorSpec::Geometric { theta1, .. } => assert!((theta1 - PI).abs() < 1e-15),
            _ => panic!(),
        }
        match GeneratorSpec::parse("geometric:pi/2:3pi/2").unwrap() {
            GeneratorSpec::Geometric { theta0, theta1, .. } => {
                assert!((theta0 - PI / 2.0).abs() < 1e-15);
                assert!((theta1 - 1.5 * PI).abs() < 1e-15);
            }
            _ => panic!(),
        }
        assert!(GeneratorSpec::parse("random:3:1.2").is_err());
        assert!(GeneratorSpec::parse("bogus:1").is_err());
    }

    #[test]
    fn random_values_do_not_depend_on_window() {
        let g = GeneratorSpec::Random { seed: 9, cap: 0.7 };
        let a = generate_sequence(&g, -5, 5).unwrap();
        let b = generate_sequence(&g, 2, 40).unwrap();
        for k in 2..=5 {
            assert_eq!(a.get(k).unwrap(), b.get(k).unwrap());
        }
        assert!(a.iter().all(|(_, x)| x.norm() <= 0.7));
    }

    #[test]
    fn free_case_diagonal() {
        let seq = generate_sequence(
            &GeneratorSpec::Constant {
                value: C64::new(0.0, 0.0),
            },
            -10,
            10,
        )
        .unwrap();
        let u = build_finite_cmv(&seq, 0, 7, 0.0, 0.0).unwrap();
        // U(k,k) = -conj(alpha_k) alpha_{k+1} vanishes in the interior
        for k in 1..7 {
            assert_eq!(u.entry(k, k).unwrap(), C64::new(0.0, 0.0));
        }
        assert!(u.unitarity_defect() < 1e-15);
    }

    #[test]
    fn file_roundtrip() {
        let seq = generate_sequence(&GeneratorSpec::Random { seed: 1, cap: 0.5 }, 0, 4).unwrap();
        let txt = format!("# header\n{}", seq.to_file_contents());
        let back = VerblunskySequence::parse_file_contents(&txt, "f").unwrap();
        for (k, a) in seq.iter() {
            assert_eq!(back.get(k).unwrap(), a);
        }
        assert!(VerblunskySequence::parse_file_contents("1 2", "f").is_err());
        assert!(VerblunskySequence::parse_file_contents("1 2.0 0.0", "f").is_err());
    }
}
