use cmv_weyl::laurent::LaurentPolynomial as Lp;
use cmv_weyl::spectral::*;
use cmv_weyl::transfer::build_solution_family;
use cmv_weyl::verblunsky::*;
use cmv_weyl::C64;
use nalgebra::DMatrix;

fn seq(seed: u64, cap: f64, lo: i64, hi: i64) -> VerblunskySequence {
    generate_sequence(&GeneratorSpec::Random { seed, cap }, lo, hi).unwrap()
}

fn dev_from_identity(g: &DMatrix<C64>) -> f64 {
    let n = g.nrows();
    (g - DMatrix::<C64>::identity(n, n))
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max)
}

#[test]
fn free_measure_is_uniform_at_boundary() {
    let s = generate_sequence(
        &GeneratorSpec::Constant {
            value: C64::new(0.0, 0.0),
        },
        -40,
        40,
    )
    .unwrap();
    let u = build_half_lattice(&s, 0, 0.0, 32, Side::Plus, 0.0).unwrap();
    let mu = measure_from_operator(&u, 0).unwrap();
    assert_eq!(mu.atoms.len(), 32);
    assert!((mu.total_mass() - 1.0).abs() < 1e-12);
    for j in 1..32 {
        assert!(mu.moment(j).norm() < 1e-12, "moment {j} = {}", mu.moment(j));
    }
}

#[test]
fn polynomial_families_are_orthonormal() {
    for k0 in [0i64, 1] {
        let s = seq(3, 0.6, k0 - 70, k0 + 70);
        let n = 40usize;
        let up = build_half_lattice(&s, k0, 0.0, n, Side::Plus, 0.0).unwrap();
        let mup = measure_from_operator(&up, k0).unwrap();
        let fam = build_solution_family(&s, k0, Side::Plus, k0, k0 + n as i64 - 1).unwrap();
        let rs: Vec<Lp> = (k0..k0 + n as i64)
            .map(|k| fam.r(k).unwrap().clone())
            .collect();
        let ps: Vec<Lp> = (k0..k0 + n as i64)
            .map(|k| fam.p(k).unwrap().clone())
            .collect();
        assert!(
            dev_from_identity(&gram_matrix(&rs, &mup)) < 1e-9,
            "r+ k0={k0}"
        );
        assert!(
            dev_from_identity(&gram_matrix(&ps, &mup)) < 1e-9,
            "p+ k0={k0}"
        );

        let um = build_half_lattice(&s, k0, 0.0, n, Side::Minus, 0.0).unwrap();
        let mum = measure_from_operator(&um, k0).unwrap();
        let fam = build_solution_family(&s, k0, Side::Minus, k0 - n as i64 + 1, k0).unwrap();
        let rs: Vec<Lp> = (0..n as i64)
            .map(|j| fam.r(k0 - j).unwrap().clone())
            .collect();
        let ps: Vec<Lp> = (0..n as i64)
            .map(|j| fam.p(k0 - j).unwrap().clone())
            .collect();
        assert!(
            dev_from_identity(&gram_matrix(&rs, &mum)) < 1e-9,
            "r- k0={k0}"
        );
        assert!(
            dev_from_identity(&gram_matrix(&ps, &mum)) < 1e-9,
            "p- k0={k0}"
        );
    }
}

#[test]
fn gram_schmidt_reproduces_recursion() {
    for k0 in [0i64, 1] {
        let s = seq(3, 0.5, k0 - 60, k0 + 60);
        let n = 20usize;
        for side in [Side::Plus, Side::Minus] {
            let u = build_half_lattice(&s, k0, 0.0, 40, side, 0.0).unwrap();
            let mu = measure_from_operator(&u, k0).unwrap();
            let (lo, hi) = match side {
                Side::Plus => (k0, k0 + n as i64),
                Side::Minus => (k0 - n as i64, k0),
            };
            let fam = build_solution_family(&s, k0, side, lo, hi).unwrap();
            let (pf, rf) = match side {
                Side::Plus => (OpucFamily::PPlus, OpucFamily::RPlus),
                Side::Minus => (OpucFamily::PMinus, OpucFamily::RMinus),
            };
            let gp = gram_schmidt_opuc(&mu, k0, n, pf).unwrap();
            let gr = gram_schmidt_opuc(&mu, k0, n, rf).unwrap();
            for i in 0..n {
                let k = gp.site(i);
                let dp = gp.polys[i].rel_distance(fam.p(k).unwrap());
                let dr = gr.polys[i].rel_distance(fam.r(k).unwrap());
                assert!(dp < 1e-8, "p side={side:?} k0={k0} k={k} dev={dp:e}");
                assert!(dr < 1e-8, "r side={side:?} k0={k0} k={k} dev={dr:e}");
            }
        }
    }
}

#[test]
fn reconstruction_round_trip() {
    let mut s = VerblunskySequence::new("rt");
    let g = GeneratorSpec::Random { seed: 11, cap: 0.8 };
    for k in 1..=30 {
        s.insert(k, g.value_at(k).unwrap()).unwrap();
    }
    for k in 31..=70 {
        s.insert(k, C64::new(0.0, 0.0)).unwrap();
    }
    let u = build_half_lattice(&s, 0, 0.0, 64, Side::Plus, 0.0).unwrap();
    let mu = measure_from_operator(&u, 0).unwrap();
    let rec = reconstruct_verblunsky(&mu, 0, 20, Side::Plus).unwrap();
    for (k, a) in &rec.alphas {
        assert!(
            (a - s.get(*k).unwrap()).norm() < 1e-7,
            "k={k} got {a} want {}",
            s.get(*k).unwrap()
        );
    }
    assert!(rec.normalization_defect() < 1e-9);
}

#[test]
fn reconstruction_minus_side() {
    for k0 in [0i64, 1] {
        let s = seq(21, 0.6, k0 - 80, k0 + 10);
        let u = build_half_lattice(&s, k0, 0.0, 60, Side::Minus, 0.0).unwrap();
        let mu = measure_from_operator(&u, k0).unwrap();
        let rec = reconstruct_verblunsky(&mu, k0, 20, Side::Minus).unwrap();
        for (k, a) in &rec.alphas {
            assert!((a - s.get(*k).unwrap()).norm() < 1e-7, "k0={k0} k={k}");
        }
        assert!(rec.normalization_defect() < 1e-9);
    }
}

#[test]
fn two_by_two_systems_are_orthonormal() {
    for k0 in [0i64, 1] {
        let s = seq(8, 0.6, -80, 80);
        let u = build_finite_cmv(&s, k0 - 32, k0 + 31, 0.0, 0.0).unwrap();
        let (dr, dp) = full_lattice_basis_check(&s, &u, k0, 64).unwrap();
        assert!(dr < 1e-8, "R k0={k0} dev={dr:e}");
        assert!(dp < 1e-8, "P k0={k0} dev={dp:e}");
    }
}
