//! Machine-precision identity suite on random fields with fixed seeds.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nonlinearity::{convolution_b, DealiasRule, Nonlinearity};
use crate::solver::{ito_balance_audit, simulate, SolverParams};
use crate::spectral::{Lattice, SpectralField, Transform2d};
use crate::stochastic::{NoiseSpec, RngStream};

/// One identity: the worst relative residual over its samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityCheck {
    fn new(name: &str, samples: usize, max_residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            samples,
            max_residual,
            tolerance,
            pass: max_residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub n: usize,
    pub seed: u64,
    pub checks: Vec<IdentityCheck>,
    pub pass: bool,
}

/// Random real field with both a solenoidal and a gradient part.
pub fn random_mixed_field(lat: Lattice, band: i64, rng: &mut RngStream) -> SpectralField {
    let sol = SpectralField::random_solenoidal(lat, band, 0.5, rng);
    // a real scalar on the grid gives Hermitian coefficients
    let mut t = Transform2d::new(lat.n());
    let mut grid: Vec<num_complex::Complex64> =
        (0..lat.len()).map(|_| num_complex::Complex64::new(rng.normal(), 0.0)).collect();
    t.forward(&mut grid);
    let phi = |m: [i64; 2]| {
        if m[0].abs() > band || m[1].abs() > band {
            return num_complex::Complex64::default();
        }
        grid[lat.index(m).expect("on lattice")] / (1.0 + (m[0] * m[0] + m[1] * m[1]) as f64)
    };
    &sol + &SpectralField::gradient_of(lat, phi)
}

fn uniform(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    use rand::Rng;
    rng.random_range(lo..hi)
}

/// Runs every identity on an `n x n` lattice of side `2 pi`; the
/// convolution oracle comparison uses `N = 16`.
pub fn run_identity_suite(n: usize, seed: u64) -> Result<IdentityReport> {
    let lat = Lattice::new(n, 2.0 * std::f64::consts::PI)?;
    let rule = DealiasRule::default();
    let band = rule.max_mode(n);
    let mut rng = RngStream::new(seed, 0);
    let mut checks = Vec::new();

    // Leray projector: idempotence and self-adjointness in H^s
    let (mut idem, mut adj) = (0.0f64, 0.0f64);
    let mut operator = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let u = random_mixed_field(lat, band, &mut rng);
        let v = random_mixed_field(lat, band, &mut rng);
        let s = uniform(&mut rng, -2.0, 4.0);
        let pu = u.leray_project();
        idem = idem.max(pu.leray_project().max_abs_diff(&pu) / pu.max_abs());
        let lhs = pu.sobolev_inner(&v, s)?;
        let rhs = u.sobolev_inner(&v.leray_project(), s)?;
        adj = adj.max((lhs - rhs).abs() / (u.sobolev_norm(s) * v.sobolev_norm(s)));

        // A^alpha shifts the Sobolev index; the semigroup is additive
        let alpha = uniform(&mut rng, -1.5, 3.0);
        let w = pu;
        let a = w.apply_a_alpha(alpha).sobolev_norm(s);
        let b = w.sobolev_norm(2.0 * alpha + s);
        operator.0 = operator.0.max((a - b).abs() / b);
        let (t1, t2) = (uniform(&mut rng, 0.0, 2.0), uniform(&mut rng, 0.0, 2.0));
        let (nu, al) = (0.05, 2.0);
        let split = w.semigroup_apply(nu, al, t1)?.semigroup_apply(nu, al, t2)?;
        let joint = w.semigroup_apply(nu, al, t1 + t2)?;
        operator.1 = operator.1.max((&split - &joint).sobolev_norm(s) / w.sobolev_norm(s));
    }
    checks.push(IdentityCheck::new("leray_idempotence", 100, idem, 1e-12));
    checks.push(IdentityCheck::new("leray_self_adjoint", 100, adj, 1e-12));
    checks.push(IdentityCheck::new("a_alpha_sobolev_shift", 100, operator.0, 1e-12));
    checks.push(IdentityCheck::new("semigroup_additivity", 100, operator.1, 1e-12));

    // cancellations <B(u),u> = 0 and <B(u),Au> = 0
    let mut nl = Nonlinearity::new(lat, rule);
    let (mut l2, mut h1) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let u = SpectralField::random_solenoidal(lat, band, 1.0, &mut rng);
        let b = nl.quadratic(&u)?;
        l2 = l2.max(b.sobolev_inner(&u, 0.0)?.abs() / (b.sobolev_norm(0.0) * u.sobolev_norm(0.0)));
        let au = u.apply_a_alpha(1.0);
        h1 = h1.max(b.sobolev_inner(&au, 0.0)?.abs() / (b.sobolev_norm(0.0) * au.sobolev_norm(0.0)));
    }
    checks.push(IdentityCheck::new("cancellation_l2", 100, l2, 1e-11));
    checks.push(IdentityCheck::new("cancellation_h1", 100, h1, 1e-11));

    // pseudo-spectral product against the direct convolution on N = 16
    let small = Lattice::new(16, 2.0 * std::f64::consts::PI)?;
    let small_band = rule.max_mode(16);
    let mut small_nl = Nonlinearity::new(small, rule);
    let mut conv = 0.0f64;
    for _ in 0..5 {
        let u = SpectralField::random_solenoidal(small, small_band, 0.5, &mut rng);
        let v = SpectralField::random_solenoidal(small, small_band, 0.5, &mut rng);
        let fast = small_nl.bilinear(&u, &v)?;
        let slow = convolution_b(&u, &v, rule)?;
        conv = conv.max(fast.max_abs_diff(&slow) / slow.max_abs());
    }
    checks.push(IdentityCheck::new("convolution_oracle_n16", 5, conv, 1e-12));

    // ||u||_r <= ||u||_p^l ||u||_q^(1-l), r = l p + (1-l) q; counted violations
    let mut violations = 0usize;
    for _ in 0..1000 {
        let u = SpectralField::random_solenoidal(lat, band, uniform(&mut rng, 0.0, 2.0), &mut rng);
        let (p, q, l) = (uniform(&mut rng, -2.0, 5.0), uniform(&mut rng, -2.0, 5.0), uniform(&mut rng, 0.0, 1.0));
        let r = l * p + (1.0 - l) * q;
        // floating-point allowance only; the inequality is Hoelder's with constant 1
        if u.sobolev_norm(r) > u.sobolev_norm(p).powf(l) * u.sobolev_norm(q).powf(1.0 - l) * (1.0 + 1e-13) {
            violations += 1;
        }
    }
    checks.push(IdentityCheck::new("interpolation_violations", 1000, violations as f64, 0.0));

    // nonlinear contribution to the H^1 Ito balance along a noisy trajectory
    let p = SolverParams::new(0.1, 2.0, 0.01, lat)?;
    let noise = NoiseSpec::default_for(2.0).resolve(lat, rule)?;
    let x0 = SpectralField::random_solenoidal(lat, band, 1.0, &mut rng);
    let traj = simulate(&x0, &p, &noise, RngStream::new(seed, 1), 100)?;
    let audit = ito_balance_audit(&traj, &p, &noise, 1.0)?;
    checks.push(IdentityCheck::new("ito_h1_nonlinear_term", 100, audit.nonlinear.abs() / audit.scale, 1e-10));

    let pass = checks.iter().all(|c| c.pass);
    Ok(IdentityReport { n, seed, checks, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_small_lattice() {
        let r = run_identity_suite(16, 3).unwrap();
        assert!(r.pass, "{r:#?}");
    }

    #[test]
    fn mixed_fields_are_real_and_not_solenoidal() {
        let lat = Lattice::new(16, 2.0 * std::f64::consts::PI).unwrap();
        let u = random_mixed_field(lat, 5, &mut RngStream::new(1, 0));
        assert!(u.is_real(1e-14));
        assert!(!u.is_solenoidal(1e-6));
    }
}
