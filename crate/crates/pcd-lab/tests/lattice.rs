//! Transforms, dealiased products and the binary dump format.

use num_complex::Complex64;
use pcd_lab::io::{decode_field, encode_field, read_field, write_field};
use pcd_lab::lattice::{
    axpy, cube_full, pointwise_product, pointwise_product_full, square_increments, to_physical, to_spectral,
    to_spectral_full, Dealias, LatticeSpec, PhysicalField, SpectralField,
};
use pcd_lab::ou::synthetic_field;
use pcd_lab::Error;
use proptest::prelude::*;

fn spec(dim: usize, n: usize) -> LatticeSpec {
    LatticeSpec::new(dim, n).unwrap()
}

fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    a.sub(b).unwrap().max_abs()
}

fn hermitian_and_mean_free(u: &SpectralField) -> bool {
    let geo = u.spec().geometry();
    let c = u.coeffs();
    c[0].norm() == 0.0 && (0..c.len()).all(|i| c[i] == c[geo.neg[i]].conj())
}

/// Coefficient of `k` in a brute-force convolution over retained modes.
fn brute_product(u: &SpectralField, v: &SpectralField) -> SpectralField {
    let s = u.spec();
    let geo = s.geometry();
    let mut out = vec![Complex64::default(); s.len()];
    for (i, ki) in geo.kvec.iter().enumerate() {
        if u.coeffs()[i].norm() == 0.0 {
            continue;
        }
        for (j, kj) in geo.kvec.iter().enumerate() {
            let k: Vec<i64> = (0..s.dim()).map(|a| ki[a] + kj[a]).collect();
            if let Some(idx) = s.index_of(&k) {
                if !geo.nyquist[idx] && k.iter().all(|c| c.abs() < s.n() as i64 / 2) {
                    out[idx] += u.coeffs()[i] * v.coeffs()[j];
                }
            }
        }
    }
    SpectralField::from_coeffs(s, out).unwrap()
}

#[test]
fn zero_field_maps_to_zero_grid() {
    let v = to_physical(&SpectralField::zeros(spec(3, 16))).unwrap();
    assert!(v.values().iter().all(|x| *x == 0.0));
}

#[test]
fn half_amplitude_pair_is_cosine() {
    let s = spec(3, 16);
    let u = SpectralField::single_mode(s, &[1, 0, 0], Complex64::new(0.5, 0.0)).unwrap();
    let v = to_physical(&u).unwrap();
    let want = PhysicalField::from_fn(s, |x| x[0].cos());
    let err = v.values().iter().zip(want.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-14, "{err}");
}

#[test]
fn transform_round_trip() {
    for (d, n) in [(1, 64), (2, 16), (3, 16)] {
        let u = synthetic_field(spec(d, n), 3, 1.0);
        let back = to_spectral(&to_physical(&u).unwrap()).unwrap();
        let rel = max_diff(&back, &u) / u.max_abs();
        assert!(rel <= 1e-12, "d={d}: {rel}");
    }
}

#[test]
fn constant_grid_has_no_spectral_content() {
    let s = spec(2, 16);
    let v = PhysicalField::new(s, vec![2.5; s.len()]).unwrap();
    assert!(to_spectral(&v).unwrap().is_zero());
    assert!((to_spectral_full(&v).unwrap().mean() - 2.5).abs() < 1e-15);
}

#[test]
fn cosine_grid_gives_two_half_modes() {
    let s = spec(3, 16);
    let u = to_spectral(&PhysicalField::from_fn(s, |x| x[0].cos())).unwrap();
    for (i, c) in u.coeffs().iter().enumerate() {
        let k = s.geometry().kvec[i];
        let want = if k == [1, 0, 0] || k == [-1, 0, 0] { 0.5 } else { 0.0 };
        assert!((c - Complex64::new(want, 0.0)).norm() < 1e-12, "{k:?}: {c}");
    }
}

#[test]
fn to_spectral_rejects_non_finite() {
    let s = spec(1, 8);
    let mut vals = vec![0.0; 8];
    vals[3] = f64::NAN;
    let v = PhysicalField::new(s, vals).unwrap();
    assert!(matches!(to_spectral(&v), Err(Error::InvalidField(_))));
}

#[test]
fn from_coeffs_rejects_non_hermitian() {
    let s = spec(1, 8);
    let mut c = vec![Complex64::default(); 8];
    c[1] = Complex64::new(1.0, 0.0);
    assert!(matches!(SpectralField::from_coeffs(s, c), Err(Error::InvalidField(_))));
}

#[test]
fn cosine_squared_drops_the_mean() {
    let s = spec(3, 16);
    let c = SpectralField::single_mode(s, &[1, 0, 0], Complex64::new(0.5, 0.0)).unwrap();
    let p = pointwise_product(&c, &c).unwrap();
    let want = SpectralField::single_mode(s, &[2, 0, 0], Complex64::new(0.25, 0.0)).unwrap();
    assert!(max_diff(&p, &want) < 1e-15);
    let full = pointwise_product_full(&c, &c).unwrap();
    assert!((full.mean() - 0.5).abs() < 1e-15);
    assert!(pointwise_product(&c, &SpectralField::zeros(s)).unwrap().is_zero());
}

#[test]
fn product_matches_brute_force_convolution() {
    for dealias in [Dealias::ThreeHalves, Dealias::Two] {
        let s = spec(2, 16).with_dealias(dealias);
        let (u, v) = (synthetic_field(s, 1, 1.0), synthetic_field(s, 2, 0.5));
        let fast = pointwise_product_full(&u, &v).unwrap();
        let slow = brute_product(&u, &v);
        let rel = max_diff(&fast, &slow) / slow.max_abs();
        assert!(rel < 1e-12, "{dealias:?}: {rel}");
    }
}

#[test]
fn cube_matches_brute_force_triple_convolution() {
    let s = spec(2, 8).with_dealias(Dealias::Two);
    let u = synthetic_field(s, 5, 0.0);
    // the intermediate square is kept on all modes, so build it on a lattice twice as large
    let big = spec(2, 16).with_dealias(Dealias::Two);
    let lift = SpectralField::from_modes(big, |k| {
        if k.iter().all(|c| c.abs() < 4) {
            u.coeff(&k[..2]).unwrap()
        } else {
            Complex64::default()
        }
    });
    let sq = brute_product(&lift, &lift);
    let cube_big = brute_product(&sq, &lift);
    let fast = cube_full(&u);
    let mut worst = 0.0f64;
    for (i, k) in s.geometry().kvec.iter().enumerate() {
        if s.geometry().nyquist[i] {
            continue;
        }
        worst = worst.max((fast.coeffs()[i] - cube_big.coeff(&k[..2]).unwrap()).norm());
    }
    assert!(worst / fast.max_abs() < 1e-10, "{worst}");
}

#[test]
fn square_increments_match_separate_squares() {
    let s = spec(3, 16).with_dealias(Dealias::ThreeHalves);
    let base = synthetic_field(s, 1, 1.0);
    let later: Vec<SpectralField> = (2..5).map(|i| synthetic_field(s, i, 1.0)).collect();
    let refs: Vec<&SpectralField> = later.iter().collect();
    let incs = square_increments(&base, &refs).unwrap();
    let b2 = pointwise_product_full(&base, &base).unwrap();
    for (u, inc) in later.iter().zip(&incs) {
        let want = pointwise_product_full(u, u).unwrap().sub(&b2).unwrap();
        assert!(max_diff(inc, &want) < 1e-13);
    }
}

#[test]
fn axpy_examples() {
    let s = spec(2, 8);
    let (u, v) = (synthetic_field(s, 1, 1.0), synthetic_field(s, 2, 1.0));
    assert_eq!(axpy(0.0, &u, &v).unwrap(), v);
    assert_eq!(axpy(1.0, &u, &SpectralField::zeros(s)).unwrap(), u);
    let w = axpy(-2.5, &u, &v).unwrap();
    for i in 0..s.len() {
        assert_eq!(w.coeffs()[i], u.coeffs()[i] * -2.5 + v.coeffs()[i]);
    }
}

#[test]
fn spec_mismatch_is_an_error() {
    let a = SpectralField::zeros(spec(2, 8));
    let b = SpectralField::zeros(spec(2, 16));
    assert!(matches!(pointwise_product(&a, &b), Err(Error::SpecMismatch)));
}

#[test]
fn dump_round_trip_is_bit_exact() {
    let u = synthetic_field(spec(3, 8), 9, 1.0);
    let bytes = encode_field(&u);
    let (back, used) = decode_field(&bytes).unwrap();
    assert_eq!(used, bytes.len());
    assert_eq!(back, u);
    let mut buf = Vec::new();
    write_field(&mut buf, &u).unwrap();
    assert_eq!(read_field(&mut buf.as_slice()).unwrap(), u);
}

#[test]
fn dump_header_layout() {
    let u = SpectralField::single_mode(spec(1, 8), &[1], Complex64::new(0.5, -0.25)).unwrap();
    let b = encode_field(&u);
    assert_eq!(&b[0..4], b"PCD1");
    assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 8);
    assert_eq!(u64::from_le_bytes(b[12..20].try_into().unwrap()), 8);
    // ascending order -4..3: k = 1 is the sixth entry
    let off = 20 + 16 * 5;
    assert_eq!(f64::from_le_bytes(b[off..off + 8].try_into().unwrap()), 0.5);
    assert_eq!(f64::from_le_bytes(b[off + 8..off + 16].try_into().unwrap()), -0.25);
}

#[test]
fn dump_rejects_bad_input() {
    let mut b = encode_field(&synthetic_field(spec(1, 8), 1, 1.0));
    assert!(decode_field(&b[..10]).is_err());
    assert!(decode_field(&b[..b.len() - 1]).is_err());
    b[3] = b'2';
    assert!(matches!(decode_field(&b), Err(Error::Decode(_))));
}

fn field_strategy() -> impl Strategy<Value = SpectralField> {
    (any::<u64>(), 0.0f64..2.0).prop_map(|(seed, s)| synthetic_field(spec(2, 8).with_dealias(Dealias::ThreeHalves), seed, s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn products_are_commutative_and_structured(u in field_strategy(), v in field_strategy()) {
        let uv = pointwise_product(&u, &v).unwrap();
        let vu = pointwise_product(&v, &u).unwrap();
        prop_assert!(max_diff(&uv, &vu) <= 1e-14 * (1.0 + uv.max_abs()));
        prop_assert!(hermitian_and_mean_free(&uv));
    }

    #[test]
    fn products_are_bilinear(u in field_strategy(), v in field_strategy(), w in field_strategy(), a in -3.0f64..3.0) {
        let lhs = pointwise_product(&axpy(a, &u, &v).unwrap(), &w).unwrap();
        let rhs = axpy(a, &pointwise_product(&u, &w).unwrap(), &pointwise_product(&v, &w).unwrap()).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-13 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn dumps_round_trip(u in field_strategy()) {
        // the dump carries no dealias setting
        let (back, _) = decode_field(&encode_field(&u)).unwrap();
        prop_assert_eq!((back.spec().dim(), back.spec().n()), (u.spec().dim(), u.spec().n()));
        prop_assert_eq!(back.coeffs(), u.coeffs());
    }
}
