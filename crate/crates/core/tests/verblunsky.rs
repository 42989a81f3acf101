use cmv_weyl::spectral::{eigen_unitary, measure_from_operator};
use cmv_weyl::verblunsky::*;
use cmv_weyl::{CmvError, C64};
use nalgebra::DMatrix;
use std::f64::consts::PI;

fn seq(seed: u64, lo: i64, hi: i64) -> VerblunskySequence {
    generate_sequence(&GeneratorSpec::Random { seed, cap: 0.9 }, lo, hi).unwrap()
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

#[test]
fn derived_examples() {
    let d = derive_coefficients(C64::new(0.0, 0.0)).unwrap();
    assert_eq!(
        (d.rho, d.a, d.b),
        (1.0, C64::new(1.0, 0.0), C64::new(1.0, 0.0))
    );
    let d = derive_coefficients(C64::new(0.5, 0.0)).unwrap();
    assert!((d.rho - 3f64.sqrt() / 2.0).abs() < 1e-15);
    assert_eq!((d.a, d.b), (C64::new(1.5, 0.0), C64::new(0.5, 0.0)));
    let d = derive_coefficients(C64::new(0.0, 0.8)).unwrap();
    assert!((d.rho - 0.6).abs() < 1e-15);
    assert_eq!((d.a, d.b), (C64::new(1.0, 0.8), C64::new(1.0, -0.8)));
    assert!(matches!(
        derive_coefficients(C64::new(0.9, 0.9)),
        Err(CmvError::Domain(_))
    ));
}

#[test]
fn theta_examples() {
    let t = theta_block(C64::new(0.5, 0.0), 0).unwrap().m;
    let r = 3f64.sqrt() / 2.0;
    let want = [[-0.5, r], [r, 0.5]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((t[i][j] - want[i][j]).norm() < 1e-15);
        }
    }
    let t = theta_block(C64::new(0.0, 0.0), 3).unwrap().m;
    assert_eq!(t[0][1], C64::new(1.0, 0.0));
    assert_eq!(t[0][0], C64::new(0.0, 0.0));
}

#[test]
fn unitarity_and_structure() {
    for seed in 0..20 {
        for n in [16i64, 64, 128] {
            let lo = seed as i64 - 7;
            let s = seq(seed, lo - 1, lo + n + 1);
            let u = build_finite_cmv(&s, lo, lo + n - 1, 0.3 * seed as f64, 1.1).unwrap();
            assert!(u.unitarity_defect() <= 1e-12, "seed={seed} n={n}");
            assert_eq!(u.band_violation(), 0.0);
            assert!(u.factorization_defect() <= 1e-14);
            let t = u.transpose();
            assert!(max_abs(&(&u.matrix.transpose() - &t.v * &t.w)) <= 1e-14);
            assert!(max_abs(&(&u.matrix.transpose() - &u.w * &u.v)) <= 1e-14);
        }
    }
}

#[test]
fn entries_follow_the_five_diagonal_pattern() {
    let s = seq(3, -10, 10);
    let u = build_finite_cmv(&s, -6, 6, 0.0, 0.0).unwrap();
    let a = |k: i64| s.get(k).unwrap();
    let rho = |k: i64| s.derived(k).unwrap().rho;
    let e = |j: i64, k: i64| u.entry(j, k).unwrap();
    for k in -4..=4i64 {
        assert!(
            (e(k, k) + a(k).conj() * a(k + 1)).norm() < 1e-15,
            "diag {k}"
        );
        if k % 2 == 0 {
            // row k even: rho_{k-1} rho_k, conj(a_{k-1}) rho_k, -, conj(a_k) rho_{k+1}, 0
            assert!((e(k, k - 2) - rho(k - 1) * rho(k)).norm() < 1e-15);
            assert!((e(k, k - 1) - a(k - 1).conj() * rho(k)).norm() < 1e-15);
            assert!((e(k, k + 1) - a(k).conj() * rho(k + 1)).norm() < 1e-15);
            assert_eq!(e(k, k + 2), C64::new(0.0, 0.0));
        } else {
            // row k odd: 0, -a_{k+1} rho_k, -, -a_{k+2} rho_{k+1}, rho_{k+1} rho_{k+2}
            assert_eq!(e(k, k - 2), C64::new(0.0, 0.0));
            assert!((e(k, k - 1) + a(k + 1) * rho(k)).norm() < 1e-15);
            assert!((e(k, k + 1) + a(k + 2) * rho(k + 1)).norm() < 1e-15);
            assert!((e(k, k + 2) - rho(k + 1) * rho(k + 2)).norm() < 1e-15);
        }
    }
}

#[test]
fn free_interval_and_eigenvalues() {
    let s = generate_sequence(
        &GeneratorSpec::Constant {
            value: C64::new(0.0, 0.0),
        },
        0,
        10,
    )
    .unwrap();
    let u = build_finite_cmv(&s, 0, 9, 0.0, 0.0).unwrap();
    assert!(u.unitarity_defect() < 1e-13);
    assert_eq!(u.band_violation(), 0.0);
    let s = seq(4, -1, 70);
    let u = build_finite_cmv(&s, 0, 63, 0.2, 0.9).unwrap();
    assert!(eigen_unitary(&u)
        .unwrap()
        .values
        .iter()
        .all(|l| (l.norm() - 1.0).abs() < 1e-12));
    let h = build_half_lattice(
        &generate_sequence(
            &GeneratorSpec::Constant {
                value: C64::new(0.0, 0.0),
            },
            0,
            5,
        )
        .unwrap(),
        0,
        0.0,
        4,
        Side::Plus,
        0.0,
    )
    .unwrap();
    assert_eq!(h.dim(), 4);
    assert!(h.unitarity_defect() < 1e-14);
}

#[test]
fn boundary_coefficient_splits_the_operator() {
    for k0 in [0i64, 1] {
        let mut s = seq(5, -20, 20);
        s.set_boundary(k0, 0.7);
        let u = build_finite_cmv(&s, -12, 12, 0.0, 0.0).unwrap();
        assert!(u.unitarity_defect() < 1e-12);
        for j in -12..=12 {
            for k in -12..=12 {
                if (j < k0 && k0 <= k) || (k < k0 && k0 <= j) {
                    assert!(u.entry(j, k).unwrap().norm() < 1e-14, "k0={k0} ({j},{k})");
                }
            }
        }
        // the lower right block is the half-lattice operator with alpha_{k0} = e^{0.7 i}
        let h = build_half_lattice(&s, k0, 0.7, (12 - k0 + 1) as usize, Side::Plus, 0.0).unwrap();
        for j in k0..=12 {
            for k in k0..=12 {
                assert!((u.entry(j, k).unwrap() - h.entry(j, k).unwrap()).norm() < 1e-15);
            }
        }
    }
}

#[test]
fn interval_errors() {
    let s = seq(1, 0, 5);
    assert!(matches!(
        build_finite_cmv(&s, 2, 2, 0.0, 0.0),
        Err(CmvError::Size(_))
    ));
    assert!(build_finite_cmv(&s, 0, 9, 0.0, 0.0).is_err());
}

#[test]
fn far_phase_washes_out() {
    let s = seq(6, -1, 260);
    let moments = |n: usize, phase: f64| {
        let u = build_half_lattice(&s, 0, 0.0, n, Side::Plus, phase).unwrap();
        let mu = measure_from_operator(&u, 0).unwrap();
        (1..=5).map(|j| mu.moment(j)).collect::<Vec<_>>()
    };
    for n in [50, 200] {
        let a = moments(n, 0.0);
        let b = moments(n, 2.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-2, "n={n}");
        }
    }
}

#[test]
fn generators() {
    let g = GeneratorSpec::Geometric {
        theta0: 0.0,
        theta1: PI,
        phase: 0.0,
    };
    assert!((g.geometric_ratio().unwrap() - C64::new(0.0, -1.0)).norm() < 1e-15);
    let a0 = g.value_at(0).unwrap();
    assert!((a0.norm() - 0.5f64.sqrt()).abs() < 1e-15 && a0.im.abs() < 1e-15 && a0.re > 0.0);
    for k in -5..5 {
        let want = a0 * g.geometric_ratio().unwrap().powi(k as i32);
        assert!((g.value_at(k).unwrap() - want).norm() < 1e-14);
    }
    let s = generate_sequence(
        &GeneratorSpec::Constant {
            value: C64::new(0.0, 0.0),
        },
        -3,
        3,
    )
    .unwrap();
    assert!(s.iter().all(|(_, a)| a == C64::new(0.0, 0.0)));
    let r = GeneratorSpec::parse("random:7:0.9").unwrap();
    let a = generate_sequence(&r, -10, 10).unwrap();
    let b = generate_sequence(&r, -10, 10).unwrap();
    assert_eq!(a.to_file_contents(), b.to_file_contents());
    assert!(a.iter().all(|(_, x)| x.norm() < 0.9));
    assert!(matches!(
        GeneratorSpec::parse("random:7:1.0"),
        Err(CmvError::Domain(_))
    ));
    assert!(matches!(
        VerblunskySequence::parse_file_contents("0 0.1\n", "x"),
        Err(CmvError::Parse(_))
    ));
}
