//! Renormalization constants, counter-function, Wick products and the rough
//! distribution.

use num_complex::Complex64;
use pcd_lab::besov::{build_partition, resonant_weight, DyadicPartition};
use pcd_lab::lattice::{cube_full, pointwise_product_full, LatticeSpec, SpectralField, TrajectoryField};
use pcd_lab::ou::{sample_ou, sample_ou_at, MollifierProfile, OuMode, OuSampler};
use pcd_lab::paracalc::{duhamel, Quadrature};
use pcd_lab::renorm::{
    build_rough_distribution, compute_c1, compute_c2, compute_c2_both, compute_constants, compute_phi_eps,
    diamond_cube_integrated, mc_variance_check, min_exponent, resonant_diamond_22, resonant_diamond_32,
    rough_distance, wick_square, C2Variant, CounterFunction, McVarianceConfig, Quantity, RenormConstants,
    RoughExponents, SumSpec,
};
use pcd_lab::stats::Moments;
use pcd_lab::Error;

fn profile() -> MollifierProfile {
    MollifierProfile::new(1.0).unwrap()
}

/// Integer vectors of `Z^3` with `|k| ≤ r`, `k ≠ 0`.
fn ball(r: i64) -> Vec<[i64; 3]> {
    let mut v = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                if (a, b, c) != (0, 0, 0) && a * a + b * b + c * c <= r * r {
                    v.push([a, b, c]);
                }
            }
        }
    }
    v
}

fn n2(k: &[i64; 3]) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
}

fn g(k: &[i64; 3], eps: f64) -> f64 {
    profile().eval(eps * n2(k).sqrt()).powi(2) / n2(k)
}

#[test]
fn combined_constant_identity() {
    let c = RenormConstants::new(2.5, 0.75, 0.1, 12);
    assert_eq!(c.c_combined, 3.0 * (2.5 - 3.0 * 0.75));
    let s = SumSpec::full(3, 0.5, profile());
    let k = compute_constants(&s, C2Variant::Plain).unwrap();
    assert_eq!(k.c_combined, 3.0 * (k.c1 - 3.0 * k.c2));
    assert!(k.c1 >= 0.0 && k.c2 >= 0.0);
}

#[test]
fn constants_vanish_beyond_the_support() {
    let s = SumSpec::full(3, 1.0, profile());
    assert_eq!(compute_c1(&s).unwrap(), 0.0);
    assert_eq!(compute_c2(&s, C2Variant::Plain).unwrap(), 0.0);
    assert!(compute_phi_eps(&[0.0, 0.5], &s).unwrap().values().iter().all(|v| *v == 0.0));
}

#[test]
fn short_truncation_is_an_error() {
    let s = SumSpec::full(3, 0.25, profile()).with_truncation(2);
    assert!(matches!(compute_c1(&s), Err(Error::TruncationError { .. })));
}

#[test]
fn c1_matches_a_reordered_sum() {
    let eps = 0.25;
    let mut terms: Vec<f64> = ball(5).iter().map(|k| g(k, eps)).collect();
    terms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let brute: f64 = terms.iter().sum();
    let got = compute_c1(&SumSpec::full(3, eps, profile())).unwrap();
    assert!((got - brute).abs() <= 1e-10 * brute, "{got} vs {brute}");
}

#[test]
fn c2_matches_a_direct_double_sum() {
    let eps = 0.5;
    let b = ball(3);
    let (mut plain, mut block) = (0.0, 0.0);
    for k1 in b.iter().rev() {
        for k2 in &b {
            let k12 = [k1[0] + k2[0], k1[1] + k2[1], k1[2] + k2[2]];
            let l = n2(k1) + n2(k2) + n2(&k12);
            let t = 2.0 * g(k1, eps) * g(k2, eps) / l;
            plain += t;
            block += t * resonant_weight(n2(&k12).sqrt(), 12);
        }
    }
    let s = SumSpec::full(3, eps, profile());
    let (p, w) = compute_c2_both(&s).unwrap();
    assert!((p - plain).abs() <= 1e-10 * plain, "{p} vs {plain}");
    assert!((w - block).abs() <= 1e-10 * block, "{w} vs {block}");
}

#[test]
fn counter_function_shape() {
    let s = SumSpec::full(3, 0.25, profile());
    let times: Vec<f64> = (0..20).map(|i| 0.05 * i as f64).collect();
    let phi = compute_phi_eps(&times, &s).unwrap();
    let c2 = compute_c2(&s, C2Variant::Block).unwrap();
    assert!((phi.values()[0] + c2).abs() <= 1e-12 * c2);
    for w in phi.values().windows(2) {
        assert!(w[0] <= 0.0 && w[1] <= 0.0 && w[1].abs() <= w[0].abs());
    }
    let lmin = min_exponent(&s).unwrap().unwrap() as f64;
    // k1 = -k2 with |k1| = 1 gives 2
    assert_eq!(lmin, 2.0);
    for (t, v) in times.iter().zip(phi.values()) {
        assert!(v.abs() <= (-lmin * t).exp() * c2 * (1.0 + 1e-12));
    }
}

#[test]
fn counter_function_seminorm_settles() {
    let times: Vec<f64> = (1..=16).map(|i| 0.0625 * i as f64).collect();
    let k = RoughExponents::default().seminorm();
    let phi = |e: f64| compute_phi_eps(&times, &SumSpec::full(3, e, profile())).unwrap();
    let levels: Vec<CounterFunction> = [0.5, 0.25, 0.125].iter().map(|&e| phi(e)).collect();
    let d1 = levels[0].sub(&levels[1]).unwrap().seminorm(k);
    let d2 = levels[1].sub(&levels[2]).unwrap().seminorm(k);
    assert!(levels.iter().all(|p| p.seminorm(k).is_finite()));
    assert!(d2 < d1, "{d1} {d2}");
}

#[test]
fn wick_square_examples() {
    let spec = LatticeSpec::new(3, 8).unwrap();
    let z = TrajectoryField::zeros(spec, 0.0, 1.0, 2).unwrap();
    let w = wick_square(&z, 1.7);
    for i in 0..=2 {
        assert_eq!(w.snapshot(i).mean(), -1.7);
        assert!(w.snapshot(i).clone().without_mean().is_zero());
    }
    let c = SpectralField::single_mode(spec, &[1, 0, 0], Complex64::new(0.5, 0.0)).unwrap();
    let w = wick_square(&TrajectoryField::constant(&c, 0.0, 1.0, 1).unwrap(), 0.3);
    assert!((w.snapshot(0).mean() - 0.2).abs() <= 1e-15);
    assert!((w.snapshot(0).coeff(&[2, 0, 0]).unwrap().re - 0.25).abs() <= 1e-15);
}

#[test]
fn mean_square_matches_c1() {
    let spec = LatticeSpec::new(3, 8).unwrap();
    let eps = 0.3;
    let c1 = compute_c1(&SumSpec::lattice(spec, eps, profile())).unwrap();
    let mut m = Moments::default();
    for r in 0..10_000 {
        let s = OuSampler::new(spec, OuMode::Stationary, eps, profile(), 11, r).unwrap();
        let x = &sample_ou_at(&s, &[0.0]).unwrap()[0];
        m.push(pointwise_product_full(x, x).unwrap().mean());
    }
    assert!((m.mean() - c1).abs() <= 4.0 * m.std_err(), "{} vs {c1}", m.mean());
}

#[test]
fn diamond_objects_of_zero() {
    let spec = LatticeSpec::new(3, 8).unwrap();
    let p = build_partition(spec);
    let z = TrajectoryField::zeros(spec, 0.0, 0.4, 4).unwrap();
    assert_eq!(diamond_cube_integrated(&z, 2.0).max_abs(), 0.0);
    let phi = CounterFunction::new((0..=4).map(|i| 0.1 * i as f64).collect(), vec![-0.5, -0.4, -0.3, -0.2, -0.1]).unwrap();
    assert_eq!(resonant_diamond_32(&z, 2.0, 1.0, &phi, &p).unwrap().max_abs(), 0.0);
    // W = -a, J(W) = -a t, so the resonant product is the constant a² t
    let (a, b) = (2.0, 1.0);
    let r = resonant_diamond_22(&z, a, b, &phi, &p).unwrap();
    for i in 0..=4 {
        let t = 0.1 * i as f64;
        let want = a * a * t - b - phi.values()[i];
        assert!((r.snapshot(i).mean() - want).abs() <= 1e-14, "t={t}");
        assert!(r.snapshot(i).clone().without_mean().is_zero());
    }
    let short = CounterFunction::zero(vec![0.0, 0.4]);
    assert!(matches!(resonant_diamond_22(&z, a, b, &short, &p), Err(Error::GridMismatch)));
}

fn smooth_x(p: &DyadicPartition, n: usize) -> TrajectoryField {
    let spec = p.spec();
    let e1 = SpectralField::single_mode(spec, &[1, 0, 0], Complex64::new(0.5, 0.0)).unwrap();
    let e2 = SpectralField::single_mode(spec, &[0, 1, 1], Complex64::new(0.0, 0.25)).unwrap();
    TrajectoryField::from_fn(spec, 0.0, 0.2, n, |t| {
        let mut u = e1.scale(1.0 + t);
        u.add_scaled((2.0 * t).cos(), &e2).unwrap();
        u
    })
    .unwrap()
}

#[test]
fn unrenormalized_distribution_is_the_plain_products() {
    let p = build_partition(LatticeSpec::new(3, 8).unwrap());
    let x = smooth_x(&p, 6);
    let phi = CounterFunction::zero_on(&x);
    let rd = build_rough_distribution(&x, 0.0, 0.0, &phi, &p, RoughExponents::default()).unwrap();
    assert_eq!(rd.x(), &x);
    let sq = x.map(|s| pointwise_product_full(s, s).unwrap());
    assert!(rd.wick2().sub(&sq).unwrap().max_abs() <= 1e-15);
    let y = duhamel(&x.map(cube_full));
    assert!(rd.int_cube().sub(&y).unwrap().max_abs() <= 1e-15);
    assert_eq!(rd.quadrature, Quadrature::PiecewiseLinear);
}

#[test]
fn rough_distance_is_a_metric() {
    let p = build_partition(LatticeSpec::new(3, 8).unwrap());
    let k = RoughExponents::default();
    let x = smooth_x(&p, 6);
    let build = |a: f64, b: f64, s: f64| {
        let phi = CounterFunction::new(x.times(), x.times().iter().map(|t| -s * (-t).exp()).collect()).unwrap();
        build_rough_distribution(&x, a, b, &phi, &p, k).unwrap()
    };
    let (ra, rb, rc) = (build(0.0, 0.0, 0.0), build(0.3, 0.1, 0.2), build(-0.2, 0.4, 0.5));
    assert_eq!(rough_distance(&ra, &ra, k, &p).unwrap(), 0.0);
    let ab = rough_distance(&ra, &rb, k, &p).unwrap();
    let ba = rough_distance(&rb, &ra, k, &p).unwrap();
    assert!(ab > 0.0 && (ab - ba).abs() <= 1e-12 * ab);
    let (ac, bc) = (rough_distance(&ra, &rc, k, &p).unwrap(), rough_distance(&rb, &rc, k, &p).unwrap());
    assert!(ac <= (ab + bc) * (1.0 + 1e-12));
}

#[test]
fn exponent_constraints() {
    assert!(matches!(RoughExponents::new(0.1, 0.05, 0.1, 0.05), Err(Error::InvalidExponents(_))));
    assert!(matches!(RoughExponents::new(0.2, 0.0, 0.1, 0.05), Err(Error::InvalidExponents(_))));
    assert!(RoughExponents::new(0.2, 0.04, 0.1, 0.05).is_ok());
    assert!(RoughExponents::default().validate().is_ok());
}

#[test]
fn variance_check_for_the_free_field() {
    let spec = LatticeSpec::new(3, 16).unwrap();
    let p = build_partition(spec);
    let eps = 0.15;
    let cfg = McVarianceConfig {
        spec,
        epsilon: eps,
        profile: profile(),
        seed: 5,
        replicas: 400,
        theta: 0.25,
        blocks: vec![1, 2],
        lags: vec![0.01, 0.04],
        start: 0.0,
    };
    let rep = mc_variance_check(Quantity::X, &cfg).unwrap();
    let geo = spec.geometry();
    for row in &rep.rows {
        let want: f64 = p
            .block(row.q)
            .iter()
            .map(|&(i, w)| {
                let l = geo.k2[i as usize] as f64;
                w * w * profile().at(eps, geo.k2[i as usize]).powi(2) * 2.0 * (1.0 - (-l * row.lag).exp()) / l
            })
            .sum();
        assert!((row.estimate - want).abs() <= 4.0 * row.std_err, "q={} lag={}: {} vs {want}", row.q, row.lag, row.estimate);
    }
    assert!(rep.csv().starts_with("q,lag,estimate,std_err,ratio"));
    let bad = McVarianceConfig { replicas: 0, ..cfg };
    assert!(matches!(mc_variance_check(Quantity::X, &bad), Err(Error::Config(_))));
}

#[test]
fn stationary_trajectory_feeds_the_builder() {
    let spec = LatticeSpec::new(3, 8).unwrap();
    let p = build_partition(spec);
    let s = OuSampler::new(spec, OuMode::Stationary, 0.4, profile(), 1, 0).unwrap();
    let x = sample_ou(&s, 0.0, 0.1, 4).unwrap();
    let phi = CounterFunction::zero_on(&x);
    let rd = build_rough_distribution(&x, 1.0, 0.5, &phi, &p, RoughExponents::default()).unwrap();
    assert!(rd.fields.iter().all(|f| f.max_abs().is_finite()));
    let bad = RoughExponents { delta: 0.1, delta_prime: 0.05, nu: 0.1, rho: 0.05 };
    assert!(matches!(build_rough_distribution(&x, 1.0, 0.5, &phi, &p, bad), Err(Error::InvalidExponents(_))));
}
