//! Acceptance gate: every criterion runs at its stated tolerance and reports one line.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};

use cmv_weyl::caratheodory::*;
use cmv_weyl::disks::*;
use cmv_weyl::greens::*;
use cmv_weyl::laurent::LaurentPolynomial as Lp;
use cmv_weyl::spectral::*;
use cmv_weyl::transfer::*;
use cmv_weyl::verblunsky::*;
use cmv_weyl::weyl::*;
use cmv_weyl::C64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn random_seq(seed: u64, cap: f64, lo: i64, hi: i64) -> VerblunskySequence {
    generate_sequence(&GeneratorSpec::Random { seed, cap }, lo, hi).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_z(rng: &mut ChaCha8Rng, rmin: f64, rmax: f64) -> C64 {
    C64::from_polar(rng.gen_range(rmin..rmax), rng.gen_range(0.0..2.0 * PI))
}

fn max_dev_from_identity(g: &DMatrix<C64>) -> f64 {
    let n = g.nrows();
    (g - DMatrix::<C64>::identity(n, n))
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max)
}

fn c1_unitarity() -> Outcome {
    let (mut unit, mut band) = (0.0f64, 0.0f64);
    for seed in 0..20u64 {
        for n in [16i64, 64, 128] {
            let s = random_seq(seed, 0.9, -1, n + 1);
            let u = build_finite_cmv(&s, 0, n - 1, 0.0, 0.0).unwrap();
            unit = unit.max(u.unitarity_defect());
            band = band.max(u.band_violation());
        }
    }
    check(
        unit <= 1e-12 && band == 0.0,
        format!("max |U*U-I| = {unit:.2e}, max off-band = {band:e}"),
    )
}

fn c2_transfer() -> Outcome {
    let mut det = 0.0f64;
    for seed in 0..5u64 {
        let s = random_seq(seed, 0.9, -20, 20);
        for k in -20..=20 {
            let d = transfer_matrix(&s, k).unwrap().det();
            let (lo, hi) = d.support().unwrap();
            let off: f64 = (lo..=hi)
                .filter(|&j| j != 0)
                .map(|j| d.coeff(j).norm())
                .fold(0.0, f64::max);
            det = det.max((d.coeff(0) + 1.0).norm()).max(off);
        }
    }
    let s = random_seq(42, 0.7, -20, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut wr = 0.0f64;
    for _ in 0..10 {
        let z = random_z(&mut rng, 0.2, 2.0);
        for k0 in [0i64, 1] {
            for side in [Side::Plus, Side::Minus] {
                let fam = build_numeric_family(&s, k0, side, z, k0 - 8, k0 + 8).unwrap();
                for k in k0 - 8..=k0 + 8 {
                    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    // plus: (-1)^k {2, 2z}; minus: (-1)^{k+1} {2z, 2} for k0 {even, odd}
                    let want = match (side, k0 == 0) {
                        (Side::Plus, true) => C64::new(2.0 * sign, 0.0),
                        (Side::Plus, false) => 2.0 * sign * z,
                        (Side::Minus, true) => -2.0 * sign * z,
                        (Side::Minus, false) => C64::new(-2.0 * sign, 0.0),
                    };
                    let w = wronskian(fam.pr(k).unwrap(), fam.qs(k).unwrap());
                    let scale = 1.0 + fam.pr(k).unwrap().0.norm() * fam.qs(k).unwrap().1.norm();
                    wr = wr.max((w - want).norm() / scale);
                }
            }
        }
    }
    check(
        det <= 1e-14 && wr < 1e-12,
        format!("det T + 1 = {det:.2e}, Wronskian residual = {wr:.2e}"),
    )
}

fn c3_orthonormality() -> Outcome {
    let mut worst = 0.0f64;
    for k0 in [0i64, 1] {
        for n in [32usize, 64] {
            let s = random_seq(3, 0.6, k0 - 2, k0 + n as i64 + 2);
            let u = build_half_lattice(&s, k0, 0.0, n, Side::Plus, 0.0).unwrap();
            let mu = measure_from_operator(&u, k0).unwrap();
            let fam = build_solution_family(&s, k0, Side::Plus, k0, k0 + n as i64 - 1).unwrap();
            let rs: Vec<Lp> = (k0..k0 + n as i64)
                .map(|k| fam.r(k).unwrap().clone())
                .collect();
            let ps: Vec<Lp> = (k0..k0 + n as i64)
                .map(|k| fam.p(k).unwrap().clone())
                .collect();
            worst = worst.max(max_dev_from_identity(&gram_matrix(&rs, &mu)));
            worst = worst.max(max_dev_from_identity(&gram_matrix(&ps, &mu)));
        }
    }
    check(worst < 1e-8, format!("max |G - I| = {worst:.2e}"))
}

fn c4_reconstruction() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        for n in [48usize, 96] {
            let s = random_seq(100 + seed, DEFAULT_RANDOM_CAP, -1, n as i64 + 1);
            let u = build_half_lattice(&s, 0, 0.0, n, Side::Plus, 0.0).unwrap();
            let mu = measure_from_operator(&u, 0).unwrap();
            let rec = reconstruct_verblunsky(&mu, 0, n / 3, Side::Plus)
                .map_err(|e| format!("seed {seed} n {n}: {e}"))?;
            for (k, a) in &rec.alphas {
                worst = worst.max((a - s.get(*k).unwrap()).norm());
            }
        }
    }
    check(
        worst < 1e-7,
        format!("max coefficient error on the first n/3 sites = {worst:.2e}"),
    )
}

fn c5_m_functions() -> Outcome {
    let s = random_seq(5, 0.6, -80, 80);
    let z0 = C64::new(0.0, 0.0);
    let (mut origin, mut mminus, mut sym) = (0.0f64, 0.0f64, 0.0f64);
    let mut sign_ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k0 in [0i64, 1] {
        let ctx = MFunctionContext::new(&s, k0, Truncation::centered(k0, 64)).unwrap();
        let (mp, mm) = (
            m_function(&ctx, z0, Side::Plus).unwrap(),
            m_function(&ctx, z0, Side::Minus).unwrap(),
        );
        origin = origin.max((mp - 1.0).norm()).max((mm + 1.0).norm());
        let a = s.get(k0).unwrap();
        mminus = mminus.max((big_m(&ctx, z0, Side::Minus).unwrap() - (a + 1.0) / (a - 1.0)).norm());
        for _ in 0..50 {
            let z = random_z(&mut rng, 0.01, 0.99);
            sign_ok &= m_function(&ctx, z, Side::Plus).unwrap().re > 0.0;
            sign_ok &= m_function(&ctx, z, Side::Minus).unwrap().re < 0.0;
            sign_ok &= big_m(&ctx, z, Side::Plus).unwrap().re > 0.0;
            sign_ok &= big_m(&ctx, z, Side::Minus).unwrap().re < 0.0;
            for side in [Side::Plus, Side::Minus] {
                let a = big_m(&ctx, z, side).unwrap();
                let b = big_m(&ctx, 1.0 / z.conj(), side).unwrap();
                sym = sym.max((a + b.conj()).norm());
            }
        }
    }
    check(
        origin <= 1e-12 && mminus < 1e-12 && sign_ok && sym < 1e-10,
        format!("|m(0) -+ 1| = {origin:.1e}, M_-(0) error = {mminus:.1e}, signs ok = {sign_ok}, symmetry = {sym:.1e}"),
    )
}

fn c6_riccati() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = Truncation::new(-40, 40);
    for seed in 0..10u64 {
        let s = random_seq(200 + seed, 0.7, -45, 45);
        let ctxs: Vec<MFunctionContext> = (-5..=5)
            .map(|k| MFunctionContext::new(&s, k, t).unwrap())
            .collect();
        let inside: Vec<C64> = (0..5).map(|_| random_z(&mut rng, 0.05, 0.9)).collect();
        let outside: Vec<C64> = (0..5).map(|_| random_z(&mut rng, 1.1, 4.0)).collect();
        for z in inside.into_iter().chain(outside) {
            for side in [Side::Plus, Side::Minus] {
                for w in ctxs.windows(2) {
                    let a = s.get(w[1].k0).unwrap();
                    let (mp, mc) = (
                        big_m(&w[0], z, side).unwrap(),
                        big_m(&w[1], z, side).unwrap(),
                    );
                    worst = worst.max(riccati_residual(RiccatiMode::M, a, z, mp, mc).norm());
                    let (pp, pc) = (phi_from_m(mp).unwrap(), phi_from_m(mc).unwrap());
                    worst = worst.max(riccati_residual(RiccatiMode::Phi, a, z, pp, pc).norm());
                }
            }
        }
    }
    check(worst < 1e-9, format!("max Riccati residual = {worst:.2e}"))
}

fn ls_taylor(f: impl Fn(C64) -> C64, radius: f64, deg: usize, npts: usize) -> Vec<C64> {
    let pts: Vec<C64> = (0..npts)
        .map(|m| C64::from_polar(radius, 2.0 * PI * m as f64 / npts as f64))
        .collect();
    let a = DMatrix::from_fn(npts, deg + 1, |i, j| pts[i].powi(j as i32));
    let b = DVector::from_iterator(npts, pts.iter().map(|&z| f(z)));
    a.svd(true, true)
        .solve(&b, 1e-14)
        .unwrap()
        .iter()
        .copied()
        .collect()
}

fn c7_series() -> Outcome {
    let s = random_seq(2, 0.7, -45, 45);
    let t = Truncation::new(-40, 40);
    let mut worst = 0.0f64;
    for k in [0i64, 1] {
        let ctx = MFunctionContext::new(&s, k, t).unwrap();
        let fit = ls_taylor(
            |z| phi_from_m(big_m(&ctx, z, Side::Plus).unwrap()).unwrap(),
            0.3,
            24,
            96,
        );
        let ser = schur_series_plus(&s, k, 8).unwrap();
        for j in 1..=8 {
            worst = worst.max((fit[j] - ser[j - 1]).norm());
        }
    }
    check(
        worst < 1e-5,
        format!("max |fit - recursion| over 8 coefficients = {worst:.2e}"),
    )
}

fn c8_green() -> Outcome {
    let mut full = 0.0f64;
    let mut half = 0.0f64;
    for seed in 0..5u64 {
        let s = random_seq(300 + seed, 0.7, -80, 80);
        for k0 in [0i64, 1] {
            let ctx = MFunctionContext::new(&s, k0, Truncation::centered(k0, 64)).unwrap();
            for (i, r) in [0.4, 0.6, 1.8].into_iter().enumerate() {
                let z = C64::from_polar(r, 0.7 + seed as f64 + i as f64);
                full = full.max(green_check(&ctx, z, None, 12).unwrap());
                for side in [Side::Plus, Side::Minus] {
                    half = half.max(green_check(&ctx, z, Some(side), 12).unwrap());
                }
            }
        }
    }
    check(
        full < 1e-6 && half < 1e-6,
        format!("full lattice {full:.2e}, half lattice {half:.2e}"),
    )
}

fn c9_disks() -> Outcome {
    let s = random_seq(6, 0.5, -2, 200);
    let mut circle = 0.0f64;
    let mut energy = 0.0f64;
    for (k0, k1) in [(0i64, 9i64), (0, 10), (1, 9), (1, 10), (2, 31), (3, 40)] {
        for z in [C64::new(0.5, 0.0), C64::new(0.3, 0.3), C64::new(-1.2, 0.8)] {
            let d = weyl_disk_with(&s, k0, k1, z, 12).unwrap();
            circle = circle.max(d.on_circle_residual);
            energy = energy.max(d.energy_residual);
        }
    }
    let z = C64::new(0.5, 0.0);
    let mut ratio = 0.0f64;
    for k0 in [0i64, 1] {
        let a = weyl_disk(&s, k0, k0 + 10, z).unwrap().radius;
        let b = weyl_disk(&s, k0, k0 + 80, z).unwrap().radius;
        ratio = ratio.max(b / a);
    }
    check(
        circle < 1e-9 && energy < 1e-9 && ratio <= 0.1,
        format!(
            "on-circle {circle:.2e}, energy identity {energy:.2e}, R(k0+80)/R(k0+10) = {ratio:.2e}"
        ),
    )
}

fn c10_matrix_m() -> Outcome {
    let s = random_seq(31, 0.6, -60, 60);
    let t = Truncation::centered(0, 96);
    let u = t.full_operator(&s).unwrap();
    let (mut at0, mut routes, mut dual) = (0.0f64, 0.0f64, 0.0f64);
    let mut contractive = true;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for k in [-3i64, 0, 1, 4] {
        let ctx = MFunctionContext::new(&s, k, t).unwrap();
        at0 = at0.max((matrix_m_closed(&ctx, C64::new(0.0, 0.0)).unwrap()[1][1] - 1.0).norm());
        for _ in 0..6 {
            let z = random_z(&mut rng, 0.05, 0.9);
            for zz in [z, 1.0 / z.conj()] {
                let a = matrix_m_closed(&ctx, zz).unwrap();
                let b = matrix_m_resolvent(&u, k, zz).unwrap();
                for i in 0..2 {
                    for j in 0..2 {
                        routes = routes.max((a[i][j] - b[i][j]).norm());
                    }
                }
            }
            let (p1, p2) = phi_11(&ctx, z).unwrap();
            dual = dual.max((p1 - p2).norm());
            contractive &= p1.norm() < 1.0;
        }
    }
    check(
        at0 < 1e-10 && routes < 1e-7 && dual < 1e-9 && contractive,
        format!("|M11(0)-1| = {at0:.1e}, route A vs B = {routes:.2e}, Phi11 routes = {dual:.1e}, |Phi11| < 1: {contractive}"),
    )
}

fn c11_stone() -> Outcome {
    let s = random_seq(7, 0.6, -1, 30);
    let u = build_finite_cmv(&s, 0, 23, 0.0, 0.0).unwrap();
    let angles = eigen_unitary(&u).unwrap().angles();
    let clear = |t: f64| {
        angles.iter().all(|&a| {
            let d = normalize_angle(a - t);
            d.min(2.0 * PI - d) > 0.05
        })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = u.dim();
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 4 {
        let t1 = rng.gen_range(0.0..2.0 * PI);
        let t2 = t1 + rng.gen_range(0.5..4.0);
        if !clear(t1) || !clear(t2) {
            continue;
        }
        // unit vectors, so the residual is on the scale of the spectral measure itself
        let f = DVector::from_fn(n, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
        .normalize();
        let g = DVector::from_fn(n, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
        .normalize();
        let rep = stone_projection_check(
            &u,
            &f,
            &g,
            t1,
            t2,
            |z| z * z + 0.5,
            &StoneSchedule::default(),
        )
        .unwrap();
        worst = worst.max(rep.residual);
        done += 1;
    }
    check(
        worst < 1e-3,
        format!("max residual at the finest schedule point = {worst:.2e}"),
    )
}

fn c12_borg() -> Outcome {
    let rep = borg_verify(0.0, PI, 256, &BorgSettings::default()).unwrap();
    let ok = rep.containment_fraction >= 0.95
        && rep.max_interior_gap < 20.0 * PI / 256.0
        && rep.reflectionless_residual < 0.05
        && rep.control_residual >= 4.0 * rep.reflectionless_residual;
    check(
        ok,
        format!(
            "containment {:.3}, max gap {:.4}, residual {:.2e}, control {:.2e}",
            rep.containment_fraction,
            rep.max_interior_gap,
            rep.reflectionless_residual,
            rep.control_residual
        ),
    )
}

fn c13_appendix() -> Outcome {
    let edges = uniform_edges(0.0, 64);
    let width = 2.0 * PI / 64.0;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut round = 0.0f64;
    for _ in 0..10 {
        let count = rng.gen_range(1..=8usize);
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        while atoms.len() < count {
            // keep atoms off bin edges, where any finite-r smoothing splits them between two bins
            let t = rng.gen_range(0.0..2.0 * PI);
            let off = t.rem_euclid(width);
            if off < 0.03 || width - off < 0.03 || atoms.iter().any(|a| (a.0 - t).abs() < 1e-6) {
                continue;
            }
            atoms.push((t, rng.gen_range(0.05..1.0)));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let mu =
            CircleMeasure::atomic(atoms.iter().map(|&(t, w)| (t, w / total)).collect()).unwrap();
        let f = |z: C64| herglotz_eval(&mu, 0.0, z);
        let rec = reconstruct_measure(&f, &edges, 1.0 - 1e-4).unwrap();
        let want = bin_atoms(&mu, &edges);
        for (a, b) in rec.masses.iter().zip(&want.masses) {
            round = round.max((a - b).abs());
        }
    }
    let mu = CircleMeasure::atomic(vec![(1.0, 0.7), (2.5, 0.2), (5.0, 0.1)]).unwrap();
    let f = |z: C64| herglotz_eval(&mu, 0.3, z);
    let mut point = Vec::new();
    for r in [1.0 - 1e-3, 1.0 - 1e-4, 1.0 - 1e-5] {
        point.push((point_mass_estimate(&f, 1.0, r).unwrap() - 0.7).norm());
    }
    let converging = point.windows(2).all(|w| w[1] < w[0]) && point[2] < 1e-3;
    let thetas: Vec<f64> = (0..64)
        .map(|j| 2.0 * PI * (j as f64 + 0.3) / 64.0)
        .collect();
    let mut ups_ok = true;
    for eps in [1e-3, 1e-4, 1e-5] {
        match exp_herglotz(&f, &thetas, eps) {
            Ok(e) => ups_ok &= e.upsilon.iter().all(|(_, u)| (0.0..=PI).contains(u)),
            Err(_) => ups_ok = false,
        }
    }
    check(
        round < 2e-3 && converging && ups_ok,
        format!("round trip {round:.2e}, point mass errors {:.1e}/{:.1e}/{:.1e}, Upsilon in [0, pi]: {ups_ok}", point[0], point[1], point[2]),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("unitarity and structure", c1_unitarity),
        ("transfer identities", c2_transfer),
        ("orthonormality", c3_orthonormality),
        ("reconstruction round trip", c4_reconstruction),
        ("m/M-function contracts", c5_m_functions),
        ("Riccati suites", c6_riccati),
        ("Schur series", c7_series),
        ("Green's function oracle", c8_green),
        ("Weyl disks", c9_disks),
        ("matrix M-function", c10_matrix_m),
        ("Stone formula", c11_stone),
        ("arc spectrum of the geometric family", c12_borg),
        ("Caratheodory suite", c13_appendix),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match out {
            Ok(d) => println!("criterion {:>2}: PASS  {name}: {d}", i + 1),
            Err(d) => {
                println!("criterion {:>2}: FAIL  {name}: {d}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
