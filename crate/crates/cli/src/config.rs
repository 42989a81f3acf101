use std::path::PathBuf;

use clap::{Args, ValueEnum};
use cmv_weyl::verblunsky::{parse_real, GeneratorSpec, Side};
use cmv_weyl::{CmvError, Result, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Measure,
    Mfun,
    Green,
    Disk,
    Borg,
    Reconstruct,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SideArg {
    Plus,
    Minus,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Plus => Side::Plus,
            SideArg::Minus => Side::Minus,
        }
    }
}

/// Which Weyl-type function `mfun` evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MKind {
    M,
    BigM,
    Phi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Lattice {
    Full,
    Half,
}

/// Fully resolved run configuration. Everything except the output path is echoed into the
/// header of the artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    /// coefficient generator; `random` without a seed takes `seed`
    pub alpha: String,
    pub seed: u64,
    pub k0: i64,
    pub n: usize,
    /// first site of the `spectrum` window (default k0)
    pub lo: Option<i64>,
    pub side: SideArg,
    pub s0: f64,
    pub s1: f64,
    pub z: Option<String>,
    pub z_grid: Option<String>,
    pub k1: Option<i64>,
    pub k1_list: Option<Vec<i64>>,
    pub kind: MKind,
    pub lattice: Lattice,
    /// half-width of the (k, k') block written by `green`
    pub radius: i64,
    pub theta0: f64,
    pub theta1: f64,
    pub phase: f64,
    pub phases: usize,
    pub measure: Option<PathBuf>,
    pub format: Option<Format>,
    pub deterministic: bool,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            alpha: "random".into(),
            seed: 0,
            k0: 0,
            n: 64,
            lo: None,
            side: SideArg::Plus,
            s0: 0.0,
            s1: 0.0,
            z: None,
            z_grid: None,
            k1: None,
            k1_list: None,
            kind: MKind::M,
            lattice: Lattice::Full,
            radius: 3,
            theta0: 0.0,
            theta1: std::f64::consts::PI,
            phase: 0.0,
            phases: cmv_weyl::disks::DEFAULT_PHASES,
            measure: None,
            format: None,
            deterministic: false,
            output: None,
        }
    }
}

fn angle(s: &str) -> std::result::Result<f64, String> {
    parse_real(s).map_err(|e| e.to_string())
}

/// Flags; every one overrides the matching field of the config file.
#[derive(Args, Debug, Default)]
pub struct Flags {
    /// JSON file with RunConfig fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// constant:re[:im] | random[:seed[:cap]] | geometric:theta0:theta1[:phase] | file:path
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    pub k0: Option<i64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<i64>,
    #[arg(long, value_enum)]
    pub side: Option<SideArg>,
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub s0: Option<f64>,
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub s1: Option<f64>,
    /// complex point: 0.5, 0.3+0.4i or 0.3,0.4
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    /// radial:r0:r1:NRxNT | list:z1;z2;...
    #[arg(long)]
    pub z_grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub k1: Option<i64>,
    /// comma-separated, strictly increasing
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub k1_list: Option<Vec<i64>>,
    #[arg(long, value_enum)]
    pub kind: Option<MKind>,
    #[arg(long, value_enum)]
    pub lattice: Option<Lattice>,
    #[arg(long)]
    pub radius: Option<i64>,
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub theta0: Option<f64>,
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub theta1: Option<f64>,
    #[arg(long, value_parser = angle, allow_hyphen_values = true)]
    pub phase: Option<f64>,
    #[arg(long)]
    pub phases: Option<usize>,
    /// measure JSON written by `measure`
    #[arg(long)]
    pub measure: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// suppress the timestamp so identical configs give identical bytes
    #[arg(long)]
    pub deterministic: bool,
    /// output file (stdout if absent); written through a temporary file and renamed
    #[arg(long)]
    pub output: Option<PathBuf>,
}

macro_rules! overlay {
    ($cfg:ident, $flags:ident, $($f:ident),*) => {
        $(if let Some(v) = $flags.$f.clone() { $cfg.$f = v.into(); })*
    };
}

impl RunConfig {
    pub fn resolve(command: Option<Command>, flags: &Flags) -> Result<Self> {
        let mut cfg = match &flags.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str::<RunConfig>(&text)
                    .map_err(|e| CmvError::Parse(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if command.is_some() {
            cfg.command = command;
        }
        overlay!(
            cfg, flags, alpha, seed, k0, n, side, s0, s1, kind, lattice, radius, theta0, theta1,
            phase, phases
        );
        if flags.lo.is_some() {
            cfg.lo = flags.lo;
        }
        if flags.z.is_some() {
            cfg.z = flags.z.clone();
        }
        if flags.z_grid.is_some() {
            cfg.z_grid = flags.z_grid.clone();
        }
        if flags.k1.is_some() {
            cfg.k1 = flags.k1;
        }
        if flags.k1_list.is_some() {
            cfg.k1_list = flags.k1_list.clone();
        }
        if flags.measure.is_some() {
            cfg.measure = flags.measure.clone();
        }
        if flags.format.is_some() {
            cfg.format = flags.format;
        }
        cfg.deterministic |= flags.deterministic;
        cfg.output = flags.output.clone();
        if cfg.command.is_none() {
            return Err(CmvError::Parse(
                "no command given on the command line or in the config file".into(),
            ));
        }
        // make the seed of a random generator explicit so the header records the one in use
        let spec = cfg.generator()?;
        if let GeneratorSpec::Random { seed, .. } = spec {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    pub fn command(&self) -> Command {
        self.command.expect("resolved config carries a command")
    }

    pub fn generator(&self) -> Result<GeneratorSpec> {
        let a = self.alpha.trim();
        if a == "random" {
            return GeneratorSpec::parse(&format!("random:{}", self.seed));
        }
        GeneratorSpec::parse(a)
    }

    /// Evaluation points from `z_grid`, falling back to the single point `z`.
    pub fn z_points(&self) -> Result<Vec<C64>> {
        match (&self.z_grid, &self.z) {
            (Some(g), _) => parse_grid(g),
            (None, Some(z)) => Ok(vec![parse_complex(z)?]),
            (None, None) => Err(CmvError::Parse("need --z or --z-grid".into())),
        }
    }
}

pub fn parse_complex(s: &str) -> Result<C64> {
    let t = s.trim();
    let bad = || CmvError::Parse(format!("cannot parse complex number '{s}'"));
    if let Some((re, im)) = t.split_once(',') {
        return Ok(C64::new(parse_real(re)?, parse_real(im)?));
    }
    t.parse::<C64>().map_err(|_| bad())
}

/// `radial:r0:r1:NRxNT` gives NR radii from r0 to r1 (inclusive) times NT equally spaced angles,
/// radius-major. `list:z1;z2;...` gives explicit points.
pub fn parse_grid(s: &str) -> Result<Vec<C64>> {
    let bad = |m: &str| CmvError::Parse(format!("z-grid '{s}': {m}"));
    let (kind, rest) = s.split_once(':').ok_or_else(|| bad("missing ':'"))?;
    match kind {
        "radial" => {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("expected radial:r0:r1:NRxNT"));
            }
            let r0 = parse_real(parts[0])?;
            let r1 = parse_real(parts[1])?;
            let (nr, nt) = parts[2]
                .split_once('x')
                .ok_or_else(|| bad("expected NRxNT"))?;
            let nr: usize = nr.parse().map_err(|_| bad("bad NR"))?;
            let nt: usize = nt.parse().map_err(|_| bad("bad NT"))?;
            if nr == 0 || nt == 0 {
                return Err(bad("empty grid"));
            }
            let mut out = Vec::with_capacity(nr * nt);
            for i in 0..nr {
                let r = if nr == 1 {
                    r0
                } else {
                    r0 + (r1 - r0) * i as f64 / (nr - 1) as f64
                };
                for j in 0..nt {
                    out.push(C64::from_polar(
                        r,
                        2.0 * std::f64::consts::PI * j as f64 / nt as f64,
                    ));
                }
            }
            Ok(out)
        }
        "list" => rest.split(';').map(parse_complex).collect(),
        _ => Err(bad("unknown grid kind")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("0.5").unwrap(), C64::new(0.5, 0.0));
        assert_eq!(parse_complex("0.3+0.4i").unwrap(), C64::new(0.3, 0.4));
        assert_eq!(parse_complex("-0.3,-0.4").unwrap(), C64::new(-0.3, -0.4));
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn radial_grid() {
        let g = parse_grid("radial:0.1:0.9:5x8").unwrap();
        assert_eq!(g.len(), 40);
        assert!((g[0].norm() - 0.1).abs() < 1e-15);
        assert!((g[39].norm() - 0.9).abs() < 1e-15);
        assert_eq!(parse_grid("list:0.5;0.1+0.2i").unwrap().len(), 2);
    }
}
