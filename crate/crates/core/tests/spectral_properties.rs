//! Property tests of the spectral operators on random band-limited fields.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simlab::spectral::{Lattice, SpectralField};

fn lattice() -> Lattice {
    Lattice::new(32, 2.0 * PI).unwrap()
}

/// Random real field, not necessarily solenoidal.
fn raw_field(lat: Lattice, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = SpectralField::random_solenoidal(lat, 10, 1.0, &mut rng);
    let mut phi_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let table: Vec<f64> = (0..lat.len() * 2).map(|_| phi_rng.random::<f64>() - 0.5).collect();
    let g = SpectralField::gradient_of(lat, |m| {
        if m[0].abs() > 8 || m[1].abs() > 8 || m == [0, 0] {
            return Complex64::default();
        }
        // Hermitian: phi(-m) = conj(phi(m))
        let key = |m: [i64; 2]| lat.index(m).unwrap();
        let (idx, cidx) = (key(m), key([-m[0], -m[1]]));
        let lo = idx.min(cidx);
        let sign = if idx <= cidx { 1.0 } else { -1.0 };
        Complex64::new(table[2 * lo], sign * table[2 * lo + 1]) / (1.0 + (m[0] * m[0] + m[1] * m[1]) as f64)
    });
    &a + &g
}

fn solenoidal(lat: Lattice, seed: u64) -> SpectralField {
    SpectralField::random_solenoidal(lat, 10, 0.5, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leray_is_idempotent_and_self_adjoint(seed in any::<u64>(), s in -2.0f64..4.0) {
        let lat = lattice();
        let u = raw_field(lat, seed);
        let v = raw_field(lat, seed.wrapping_add(1));
        prop_assert!(u.is_real(1e-14));
        let pu = u.leray_project();
        let ppu = pu.leray_project();
        prop_assert!(ppu.max_abs_diff(&pu) <= 1e-12 * pu.max_abs());
        prop_assert!(pu.is_solenoidal(1e-13));
        let lhs = pu.sobolev_inner(&v, s).unwrap();
        let rhs = u.sobolev_inner(&v.leray_project(), s).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * u.sobolev_norm(s) * v.sobolev_norm(s));
    }

    #[test]
    fn a_alpha_shifts_the_sobolev_index(seed in any::<u64>(), s in -2.0f64..3.0, alpha in -1.5f64..3.0) {
        let u = solenoidal(lattice(), seed);
        let lhs = u.apply_a_alpha(alpha).sobolev_norm(s);
        let rhs = u.sobolev_norm(2.0 * alpha + s);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    }

    #[test]
    fn semigroup_is_additive_and_contractive(seed in any::<u64>(), t1 in 0.0f64..2.0, t2 in 0.0f64..2.0, s in -1.0f64..3.0) {
        let u = solenoidal(lattice(), seed);
        let (nu, alpha) = (0.05, 2.0);
        let a = u.semigroup_apply(nu, alpha, t1).unwrap().semigroup_apply(nu, alpha, t2).unwrap();
        let b = u.semigroup_apply(nu, alpha, t1 + t2).unwrap();
        prop_assert!((&a - &b).sobolev_norm(s) <= 1e-12 * u.sobolev_norm(s));
        prop_assert!(b.sobolev_norm(s) <= u.sobolev_norm(s));
    }

    #[test]
    fn sobolev_inner_is_symmetric(seed in any::<u64>(), s in -2.0f64..4.0) {
        let lat = lattice();
        let u = solenoidal(lat, seed);
        let v = solenoidal(lat, seed ^ 7);
        prop_assert_eq!(u.sobolev_inner(&v, s).unwrap(), v.sobolev_inner(&u, s).unwrap());
    }
}

/// `||u||_{H^r} <= ||u||_{H^p}^l ||u||_{H^q}^{1-l}` with `r = l p + (1-l) q`.
#[test]
fn interpolation_inequality_has_no_violations() {
    let lat = lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0;
    for i in 0..1000 {
        let u = solenoidal(lat, i);
        let p: f64 = rng.random_range(-2.0..5.0);
        let q: f64 = rng.random_range(-2.0..5.0);
        let l: f64 = rng.random_range(0.0..=1.0);
        let r = l * p + (1.0 - l) * q;
        let lhs = u.sobolev_norm(r);
        let rhs = u.sobolev_norm(p).powf(l) * u.sobolev_norm(q).powf(1.0 - l);
        if lhs > rhs * (1.0 + 1e-13) {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}
