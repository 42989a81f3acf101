use std::cmp::Ordering;

use cmv_weyl::caratheodory::{borg_verify, BorgSettings};
use cmv_weyl::disks::{limit_point_sweep, weyl_disk_with};
use cmv_weyl::greens::{
    dense_resolvent, half_lattice_operator, EntryFn, FullLatticeGreen, HalfLatticeGreen,
};
use cmv_weyl::spectral::{
    eigen_unitary, measure_from_operator, reconstruct_verblunsky, CircleMeasure,
};
use cmv_weyl::verblunsky::{
    build_finite_cmv, build_half_lattice, generate_sequence, Side, VerblunskySequence,
};
use cmv_weyl::weyl::{big_m, m_function, phi_from_m, MFunctionContext, Truncation};
use cmv_weyl::{CmvError, Result, C64};
use serde_json::{json, Value};

use crate::config::{Command, Format, Lattice, MKind, RunConfig};
use crate::output::{Artifact, Cell, Table};
use crate::verify;

pub fn run(cfg: &RunConfig) -> Result<(Artifact, bool)> {
    let art = match cfg.command() {
        Command::Spectrum => spectrum(cfg)?,
        Command::Measure => measure(cfg)?,
        Command::Mfun => mfun(cfg)?,
        Command::Green => green(cfg)?,
        Command::Disk => disk(cfg)?,
        Command::Borg => borg(cfg)?,
        Command::Reconstruct => reconstruct(cfg)?,
        Command::Verify => return verify::run(cfg),
    };
    Ok((art, true))
}

pub fn sequence(cfg: &RunConfig, lo: i64, hi: i64) -> Result<VerblunskySequence> {
    generate_sequence(&cfg.generator()?, lo, hi)
}

fn truncation(cfg: &RunConfig) -> Truncation {
    let t = Truncation::centered(cfg.k0, cfg.n);
    Truncation {
        phase_lo: cfg.s0,
        phase_hi: cfg.s1,
        ..t
    }
}

fn c(x: C64) -> [Cell; 2] {
    [Cell::Float(x.re), Cell::Float(x.im)]
}

/// Eigenangles of the truncation on [lo, lo + n - 1] and the weights |v_j(k0)|^2, sorted by angle.
fn spectrum(cfg: &RunConfig) -> Result<Artifact> {
    if cfg.n == 0 {
        return Err(CmvError::Size("n must be positive".into()));
    }
    let lo = cfg.lo.unwrap_or(cfg.k0);
    let hi = lo + cfg.n as i64 - 1;
    if cfg.k0 < lo || cfg.k0 > hi {
        return Err(CmvError::Domain(format!(
            "site {} outside the window [{lo}, {hi}]",
            cfg.k0
        )));
    }
    let seq = sequence(cfg, lo - 1, hi + 1)?;
    let u = build_finite_cmv(&seq, lo, hi, cfg.s0, cfg.s1)?;
    let e = eigen_unitary(&u)?;
    let angles = e.angles();
    let mut pairs: Vec<(f64, f64)> = angles
        .iter()
        .enumerate()
        .map(|(j, &t)| (t, e.component(cfg.k0, j).norm_sqr()))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let rows = pairs
        .iter()
        .map(|&(t, w)| vec![Cell::Float(t), Cell::Float(w)])
        .collect();
    Ok(Artifact {
        table: Some(Table {
            columns: vec!["theta", "weight"],
            rows,
        }),
        json: json!({
            "site": cfg.k0,
            "window": [lo, hi],
            "angles": pairs.iter().map(|p| p.0).collect::<Vec<_>>(),
            "weights": pairs.iter().map(|p| p.1).collect::<Vec<_>>(),
        }),
        default_format: Format::Csv,
    })
}

/// Spectral measure of the half-lattice truncation at k0.
fn measure(cfg: &RunConfig) -> Result<Artifact> {
    let n = cfg.n as i64;
    let seq = sequence(cfg, cfg.k0 - n - 1, cfg.k0 + n + 1)?;
    let u = build_half_lattice(&seq, cfg.k0, cfg.s0, cfg.n, cfg.side.into(), cfg.s1)?;
    let mu = measure_from_operator(&u, cfg.k0)?;
    let rows = mu
        .atoms
        .iter()
        .map(|&(t, w)| vec![Cell::Float(t), Cell::Float(w)])
        .collect();
    Ok(Artifact {
        table: Some(Table {
            columns: vec!["theta", "mass"],
            rows,
        }),
        json: serde_json::to_value(&mu)?,
        default_format: Format::Json,
    })
}

fn mfun(cfg: &RunConfig) -> Result<Artifact> {
    let t = truncation(cfg);
    let seq = sequence(cfg, t.lo - 1, t.hi + 1)?;
    let ctx = MFunctionContext::new(&seq, cfg.k0, t)?;
    let side: Side = cfg.side.into();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for z in cfg.z_points()? {
        let m = match cfg.kind {
            MKind::M => m_function(&ctx, z, side)?,
            MKind::BigM => big_m(&ctx, z, side)?,
            MKind::Phi => phi_from_m(big_m(&ctx, z, side)?)?,
        };
        let mut row = Vec::from(c(z));
        row.extend(c(m));
        rows.push(row);
        values.push(json!({ "z": z, "value": m }));
    }
    Ok(Artifact {
        table: Some(Table {
            columns: vec!["re_z", "im_z", "re_m", "im_m"],
            rows,
        }),
        json: Value::Array(values),
        default_format: Format::Csv,
    })
}

/// Closed-form Green's function on the block [k0 - radius, k0 + radius] next to the dense solve.
fn green(cfg: &RunConfig) -> Result<Artifact> {
    let t = truncation(cfg);
    let seq = sequence(cfg, t.lo - 1, t.hi + 1)?;
    let ctx = MFunctionContext::new(&seq, cfg.k0, t)?;
    let zs = cfg.z_points()?;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for z in zs {
        let (u, eval): (_, EntryFn) = match cfg.lattice {
            Lattice::Full => {
                let g = FullLatticeGreen::new(&ctx, z)?;
                (t.full_operator(&seq)?, Box::new(move |k, kp| g.at(k, kp)))
            }
            Lattice::Half => {
                let g = HalfLatticeGreen::new(&ctx, z, cfg.side.into())?;
                (
                    half_lattice_operator(&ctx, cfg.side.into())?,
                    Box::new(move |k, kp| g.at(k, kp)),
                )
            }
        };
        let dense = dense_resolvent(&u, z)?;
        let lo = (cfg.k0 - cfg.radius).max(u.lo);
        let hi = (cfg.k0 + cfg.radius).min(u.hi);
        for k in lo..=hi {
            for kp in lo..=hi {
                let g = eval(k, kp)?;
                let d = dense[(u.index(k)?, u.index(kp)?)];
                let mut row = Vec::from(c(z));
                row.extend([Cell::Int(k), Cell::Int(kp)]);
                row.extend(c(g));
                row.push(Cell::Float((g - d).norm()));
                rows.push(row);
                entries.push(json!({ "z": z, "k": k, "kp": kp, "value": g, "dense": d }));
            }
        }
    }
    Ok(Artifact {
        table: Some(Table {
            columns: vec!["re_z", "im_z", "k", "kp", "re_g", "im_g", "abs_err_dense"],
            rows,
        }),
        json: Value::Array(entries),
        default_format: Format::Csv,
    })
}

/// One Weyl disk per z for `k1`, or the radius sweep over `k1_list`.
fn disk(cfg: &RunConfig) -> Result<Artifact> {
    let zs = match (&cfg.z, &cfg.z_grid) {
        (None, None) => vec![C64::new(0.5, 0.0)],
        _ => cfg.z_points()?,
    };
    if let Some(list) = &cfg.k1_list {
        let top = *list
            .iter()
            .max()
            .ok_or_else(|| CmvError::Size("empty k1 list".into()))?;
        let seq = sequence(cfg, cfg.k0 - 1, top.max(cfg.k0) + 1)?;
        let mut rows = Vec::new();
        let mut disks = Vec::new();
        for z in zs {
            for d in limit_point_sweep(&seq, cfg.k0, z, list)? {
                let mut row = Vec::from(c(z));
                row.extend([Cell::Int(d.k1), Cell::Float(d.radius)]);
                row.extend(c(d.center));
                rows.push(row);
                disks.push(d);
            }
        }
        return Ok(Artifact {
            table: Some(Table {
                columns: vec!["re_z", "im_z", "k1", "radius", "re_center", "im_center"],
                rows,
            }),
            json: serde_json::to_value(&disks)?,
            default_format: Format::Csv,
        });
    }
    let k1 = cfg.k1.unwrap_or(cfg.k0 + 60);
    let seq = sequence(cfg, cfg.k0 - 1, k1.max(cfg.k0) + 1)?;
    let disks = zs
        .iter()
        .map(|&z| weyl_disk_with(&seq, cfg.k0, k1, z, cfg.phases))
        .collect::<Result<Vec<_>>>()?;
    let rows = disks
        .iter()
        .map(|d| {
            let mut row = Vec::from(c(d.z));
            row.extend([Cell::Int(d.k1), Cell::Float(d.radius)]);
            row.extend(c(d.center));
            row.push(Cell::Float(d.on_circle_residual));
            row
        })
        .collect();
    let json = if disks.len() == 1 {
        serde_json::to_value(&disks[0])?
    } else {
        serde_json::to_value(&disks)?
    };
    Ok(Artifact {
        table: Some(Table {
            columns: vec![
                "re_z",
                "im_z",
                "k1",
                "radius",
                "re_center",
                "im_center",
                "on_circle_residual",
            ],
            rows,
        }),
        json,
        default_format: Format::Json,
    })
}

fn borg(cfg: &RunConfig) -> Result<Artifact> {
    let settings = BorgSettings {
        phase: cfg.phase,
        ..BorgSettings::default()
    };
    let rep = borg_verify(cfg.theta0, cfg.theta1, cfg.n, &settings)?;
    let f = |name: &'static str, x: f64| vec![Cell::Text(name.into()), Cell::Float(x)];
    let rows = vec![
        f("theta0", rep.theta0),
        f("theta1", rep.theta1),
        f("n", rep.n as f64),
        f("eta", rep.eta),
        f("containment_fraction", rep.containment_fraction),
        f("max_interior_gap", rep.max_interior_gap),
        f("reflectionless_residual", rep.reflectionless_residual),
        f("control_residual", rep.control_residual),
    ];
    Ok(Artifact {
        table: Some(Table {
            columns: vec!["field", "value"],
            rows,
        }),
        json: serde_json::to_value(&rep)?,
        default_format: Format::Json,
    })
}

/// Accepts a bare measure or the JSON artifact written by `measure`.
pub fn load_measure(text: &str) -> Result<CircleMeasure> {
    let v: Value = serde_json::from_str(text)?;
    let body = v.get("data").cloned().unwrap_or(v);
    let mu: CircleMeasure = serde_json::from_value(body)?;
    mu.validate()?;
    Ok(mu)
}

fn reconstruct(cfg: &RunConfig) -> Result<Artifact> {
    let path = cfg
        .measure
        .as_ref()
        .ok_or_else(|| CmvError::Parse("reconstruct needs --measure".into()))?;
    let mu = load_measure(&std::fs::read_to_string(path)?)?;
    let rec = reconstruct_verblunsky(&mu, cfg.k0, cfg.n, cfg.side.into())?;
    let rows = rec
        .alphas
        .iter()
        .map(|&(k, a)| {
            let mut row = vec![Cell::Int(k)];
            row.extend(c(a));
            row
        })
        .collect();
    Ok(Artifact {
        table: Some(Table {
            columns: vec!["k", "re_alpha", "im_alpha"],
            rows,
        }),
        json: json!({
            "k0": rec.k0,
            "reliable": rec.reliable,
            "alphas": rec.alphas,
            "normalization_defect": rec.normalization_defect(),
        }),
        default_format: Format::Csv,
    })
}
