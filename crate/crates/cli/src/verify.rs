//! Identity checks on the configured coefficients.

use cmv_weyl::disks::weyl_disk;
use cmv_weyl::greens::green_check;
use cmv_weyl::laurent::LaurentPolynomial as Lp;
use cmv_weyl::spectral::{gram_matrix, measure_from_operator, reconstruct_verblunsky};
use cmv_weyl::transfer::{
    build_numeric_family, build_solution_family, expected_wronskian, transfer_matrix, wronskian,
};
use cmv_weyl::verblunsky::{build_finite_cmv, build_half_lattice, Side};
use cmv_weyl::weyl::{m_function, MFunctionContext, Truncation};
use cmv_weyl::{CmvError, Result, C64};
use nalgebra::DMatrix;
use serde_json::json;

use crate::commands::sequence;
use crate::config::{Format, RunConfig};
use crate::output::{Artifact, Cell, Table};

struct Check {
    name: &'static str,
    value: f64,
    tol: f64,
}

fn dev_from_identity(g: &DMatrix<C64>) -> f64 {
    let n = g.nrows();
    (g - DMatrix::<C64>::identity(n, n))
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max)
}

fn checks(cfg: &RunConfig) -> Result<Vec<Check>> {
    let (k0, n) = (cfg.k0, cfg.n);
    if n < 32 {
        return Err(CmvError::Size(format!("verify needs n >= 32, got {n}")));
    }
    let ni = n as i64;
    let seq = sequence(cfg, k0 - ni - 4, k0 + ni + 4)?;
    let z = C64::from_polar(0.5, 0.7);
    let mut out = Vec::new();

    let t = Truncation::centered(k0, n);
    let u = build_finite_cmv(&seq, t.lo, t.hi, cfg.s0, cfg.s1)?;
    out.push(Check {
        name: "unitarity",
        value: u.unitarity_defect(),
        tol: 1e-12,
    });
    out.push(Check {
        name: "five_diagonal",
        value: u.band_violation(),
        tol: 0.0,
    });

    let mut det = 0.0f64;
    for k in t.lo..=t.hi {
        let d = transfer_matrix(&seq, k)?.det();
        if let Some((lo, hi)) = d.support() {
            for j in lo..=hi {
                let want = if j == 0 { -1.0 } else { 0.0 };
                det = det.max((d.coeff(j) - want).norm());
            }
        }
    }
    out.push(Check {
        name: "det_transfer",
        value: det,
        tol: 1e-14,
    });

    let mut wr = 0.0f64;
    for side in [Side::Plus, Side::Minus] {
        let fam = build_numeric_family(&seq, k0, side, z, k0 - 8, k0 + 8)?;
        for k in k0 - 8..=k0 + 8 {
            let (pr, qs) = (fam.pr(k)?, fam.qs(k)?);
            let scale = 1.0 + pr.0.norm() * qs.1.norm();
            wr = wr.max((wronskian(pr, qs) - expected_wronskian(k0, side, k, z)).norm() / scale);
        }
    }
    out.push(Check {
        name: "wronskian",
        value: wr,
        tol: 1e-12,
    });

    let m = n.min(64);
    let hu = build_half_lattice(&seq, k0, 0.0, m, Side::Plus, 0.0)?;
    let mu = measure_from_operator(&hu, k0)?;
    let fam = build_solution_family(&seq, k0, Side::Plus, k0, k0 + m as i64 - 1)?;
    let rs: Vec<Lp> = (k0..k0 + m as i64)
        .map(|k| fam.r(k).cloned())
        .collect::<Result<_>>()?;
    let ps: Vec<Lp> = (k0..k0 + m as i64)
        .map(|k| fam.p(k).cloned())
        .collect::<Result<_>>()?;
    let gram =
        dev_from_identity(&gram_matrix(&rs, &mu)).max(dev_from_identity(&gram_matrix(&ps, &mu)));
    out.push(Check {
        name: "orthonormality",
        value: gram,
        tol: 1e-8,
    });

    let rec = reconstruct_verblunsky(&mu, k0, m / 3, Side::Plus)?;
    let mut rerr = 0.0f64;
    for (k, a) in &rec.alphas {
        rerr = rerr.max((a - seq.get(*k)?).norm());
    }
    out.push(Check {
        name: "reconstruction",
        value: rerr,
        tol: 1e-7,
    });

    let ctx = MFunctionContext::new(&seq, k0, t)?;
    let zero = C64::new(0.0, 0.0);
    let origin = (m_function(&ctx, zero, Side::Plus)? - 1.0)
        .norm()
        .max((m_function(&ctx, zero, Side::Minus)? + 1.0).norm());
    out.push(Check {
        name: "m_at_origin",
        value: origin,
        tol: 1e-12,
    });

    let margin = (ni / 4).min(12);
    out.push(Check {
        name: "green_full",
        value: green_check(&ctx, z, None, margin)?,
        tol: 1e-6,
    });
    out.push(Check {
        name: "green_half_plus",
        value: green_check(&ctx, z, Some(Side::Plus), margin)?,
        tol: 1e-6,
    });

    let d = weyl_disk(&seq, k0, k0 + 20, z)?;
    out.push(Check {
        name: "disk_on_circle",
        value: d.on_circle_residual,
        tol: 1e-8,
    });
    out.push(Check {
        name: "disk_energy",
        value: d.energy_residual,
        tol: 1e-10,
    });
    Ok(out)
}

pub fn run(cfg: &RunConfig) -> Result<(Artifact, bool)> {
    let list = checks(cfg)?;
    let ok = list.iter().all(|c| c.value <= c.tol);
    for c in &list {
        let status = if c.value <= c.tol { "PASS" } else { "FAIL" };
        eprintln!("{status} {}: {:.3e} (tol {:.0e})", c.name, c.value, c.tol);
    }
    let rows = list
        .iter()
        .map(|c| {
            let status = if c.value <= c.tol { "pass" } else { "fail" };
            vec![
                Cell::Text(c.name.into()),
                Cell::Float(c.value),
                Cell::Float(c.tol),
                Cell::Text(status.into()),
            ]
        })
        .collect();
    let json = json!({
        "passed": ok,
        "checks": list.iter().map(|c| json!({ "name": c.name, "value": c.value, "tolerance": c.tol, "pass": c.value <= c.tol })).collect::<Vec<_>>(),
    });
    Ok((
        Artifact {
            table: Some(Table {
                columns: vec!["check", "value", "tolerance", "status"],
                rows,
            }),
            json,
            default_format: Format::Csv,
        },
        ok,
    ))
}
