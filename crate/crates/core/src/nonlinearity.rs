//! Dealiased pseudo-spectral evaluation of the Navier-Stokes nonlinearity
//! `B(u, v) = Pi[(u.grad) v]` and the trilinear form `b(u, v, w)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spectral::{Lattice, SobolevIndex, SpectralField, Transform2d};
use crate::spectral::ensure_solenoidal;

/// Orszag-type truncation: after every product, modes with
/// `max(|m1|, |m2|) >= cutoff_fraction * N / 2` are zeroed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DealiasRule {
    pub cutoff_fraction: f64,
}

impl Default for DealiasRule {
    fn default() -> Self {
        Self {
            cutoff_fraction: 2.0 / 3.0,
        }
    }
}

impl DealiasRule {
    pub fn new(cutoff_fraction: f64) -> Result<Self> {
        if !(cutoff_fraction > 0.0 && cutoff_fraction <= 1.0) {
            return Err(invalid(
                "cutoff_fraction",
                format!("must lie in (0, 1], got {cutoff_fraction}"),
            ));
        }
        Ok(Self { cutoff_fraction })
    }

    /// Largest retained `max(|m1|, |m2|)` on an `N x N` lattice.
    pub fn max_mode(&self, n: usize) -> i64 {
        let limit = self.cutoff_fraction * n as f64 / 2.0;
        // strict: a mode sitting exactly on the cutoff (N divisible by 3) aliases
        let m = (limit - 1e-9).ceil() as i64 - 1;
        m.min(n as i64 / 2 - 1)
    }

    pub fn retains(&self, n: usize, m: [i64; 2]) -> bool {
        let k = self.max_mode(n);
        m[0].abs() <= k && m[1].abs() <= k
    }

    /// Whether the retained band makes quadratic products alias-free (`3K < N`).
    pub fn is_alias_free(&self, n: usize) -> bool {
        3 * self.max_mode(n) < n as i64
    }
}

/// Reusable FFT plans and scratch buffers for nonlinear products on one lattice.
///
/// Not shared between threads; every replica owns its own.
pub struct Nonlinearity {
    lattice: Lattice,
    rule: DealiasRule,
    band: i64,
    transform: Transform2d,
    velocity: Vec<Complex64>,
    grad0: Vec<Complex64>,
    grad1: Vec<Complex64>,
    keep: Vec<bool>,
    max_speed: f64,
}

impl Nonlinearity {
    pub fn new(lattice: Lattice, rule: DealiasRule) -> Self {
        let n = lattice.len();
        let keep = (0..n).map(|i| rule.retains(lattice.n(), lattice.modes(i))).collect();
        Self {
            lattice,
            rule,
            band: rule.max_mode(lattice.n()),
            transform: Transform2d::new(lattice.n()),
            velocity: vec![Complex64::default(); n],
            grad0: vec![Complex64::default(); n],
            grad1: vec![Complex64::default(); n],
            keep,
            max_speed: 0.0,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn rule(&self) -> DealiasRule {
        self.rule
    }

    /// Largest retained mode index.
    pub fn band(&self) -> i64 {
        self.band
    }

    /// `max_x |u(x)|` of the advecting field in the last product.
    pub fn last_max_speed(&self) -> f64 {
        self.max_speed
    }

    /// Band-limited, dealiased `(u.grad) v` without Leray projection.
    pub fn advection(&mut self, u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
        self.lattice.ensure_same(u.lattice())?;
        self.lattice.ensure_same(v.lattice())?;
        let mut out = SpectralField::zeros(self.lattice);
        self.advection_into(u, v, &mut out);
        Ok(out)
    }

    /// `B(u, v) = Pi[(u.grad) v]`, dealiased.
    pub fn bilinear(&mut self, u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
        ensure_solenoidal(u)?;
        ensure_solenoidal(v)?;
        let mut out = self.advection(u, v)?;
        out.leray_project_in_place();
        Ok(out)
    }

    pub fn quadratic(&mut self, u: &SpectralField) -> Result<SpectralField> {
        self.bilinear(u, u)
    }

    /// `B(u)` into `out` without input validation (solver hot path).
    pub(crate) fn quadratic_into(&mut self, u: &SpectralField, out: &mut SpectralField) {
        self.advection_into(u, u, out);
        out.leray_project_in_place();
    }

    /// `b(u, v, w) = <(u.grad) v, w>` via Parseval on the dealiased product.
    pub fn trilinear(&mut self, u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Result<f64> {
        ensure_solenoidal(u)?;
        let adv = self.advection(u, v)?;
        adv.sobolev_inner(w, 0.0)
    }

    fn advection_into(&mut self, u: &SpectralField, v: &SpectralField, out: &mut SpectralField) {
        let lattice = self.lattice;
        let i = Complex64::i();
        let (u0, u1) = (u.component(0), u.component(1));
        let (v0, v1) = (v.component(0), v.component(1));
        for idx in 0..lattice.len() {
            let [k1, k2] = lattice.wavevector(idx);
            // packs two real grid fields into one complex transform
            self.velocity[idx] = u0[idx] + i * u1[idx];
            let d1v0 = i * k1 * v0[idx];
            let d2v0 = i * k2 * v0[idx];
            let d1v1 = i * k1 * v1[idx];
            let d2v1 = i * k2 * v1[idx];
            self.grad0[idx] = d1v0 + i * d2v0;
            self.grad1[idx] = d1v1 + i * d2v1;
        }
        self.transform.inverse(&mut self.velocity);
        self.transform.inverse(&mut self.grad0);
        self.transform.inverse(&mut self.grad1);

        let mut max_speed_sq = 0.0f64;
        for p in 0..lattice.len() {
            let (a, b) = (self.velocity[p].re, self.velocity[p].im);
            max_speed_sq = max_speed_sq.max(a * a + b * b);
            let n0 = a * self.grad0[p].re + b * self.grad0[p].im;
            let n1 = a * self.grad1[p].re + b * self.grad1[p].im;
            self.velocity[p] = Complex64::new(n0, n1);
        }
        self.max_speed = max_speed_sq.sqrt();
        self.transform.forward(&mut self.velocity);

        let (o0, o1) = out.components_mut();
        for idx in 0..lattice.len() {
            if !self.keep[idx] {
                o0[idx] = Complex64::default();
                o1[idx] = Complex64::default();
                continue;
            }
            let h = self.velocity[idx];
            let hc = self.velocity[lattice.conjugate_index(idx)].conj();
            o0[idx] = (h + hc) * 0.5;
            o1[idx] = (h - hc) * Complex64::new(0.0, -0.5);
        }
    }
}

/// `B(u, v)` with a temporary workspace.
pub fn bilinear_b(u: &SpectralField, v: &SpectralField, rule: DealiasRule) -> Result<SpectralField> {
    Nonlinearity::new(*u.lattice(), rule).bilinear(u, v)
}

/// `B(u) = B(u, u)`.
pub fn quadratic_b(u: &SpectralField, rule: DealiasRule) -> Result<SpectralField> {
    Nonlinearity::new(*u.lattice(), rule).quadratic(u)
}

/// `b(u, v, w)` with the default 2/3 rule.
pub fn trilinear_b(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Result<f64> {
    Nonlinearity::new(*u.lattice(), DealiasRule::default()).trilinear(u, v, w)
}

/// `B(u, v)` by direct summation over all mode pairs `p + q = k` of the band:
/// `O(N^4)`, intended only as a reference for the pseudo-spectral product.
pub fn convolution_b(u: &SpectralField, v: &SpectralField, rule: DealiasRule) -> Result<SpectralField> {
    u.lattice().ensure_same(v.lattice())?;
    let lat = *u.lattice();
    let band = rule.max_mode(lat.n());
    let h = lat.spacing();
    let i = Complex64::i();
    let active = |f: &SpectralField| -> Vec<(usize, [i64; 2])> {
        (0..lat.len())
            .filter(|&idx| {
                let m = lat.modes(idx);
                m[0].abs() <= band && m[1].abs() <= band && f.coeff(idx) != [Complex64::default(); 2]
            })
            .map(|idx| (idx, lat.modes(idx)))
            .collect()
    };
    let (au, av) = (active(u), active(v));
    let mut out = SpectralField::zeros(lat);
    for &(pu, mp) in &au {
        let cu = u.coeff(pu);
        for &(qv, mq) in &av {
            let m = [mp[0] + mq[0], mp[1] + mq[1]];
            if m[0].abs() > band || m[1].abs() > band {
                continue;
            }
            let cv = v.coeff(qv);
            // (u(p) . i q) v(q)
            let adv = i * (cu[0] * (h * mq[0] as f64) + cu[1] * (h * mq[1] as f64));
            let idx = lat.index(m).expect("band modes lie on the lattice");
            let mut c = out.coeff(idx);
            c[0] += adv * cv[0];
            c[1] += adv * cv[1];
            out.set_coeff(idx, c);
        }
    }
    out.leray_project_in_place();
    Ok(out)
}

/// `(||B(u,v)||_{H^{sigma-1}}, ||u||_{H^{sigma-1}} ||v||_{H^sigma})` for fitting the
/// constant of the product estimate.
pub fn check_b_bound(u: &SpectralField, v: &SpectralField, sigma: f64, rule: DealiasRule) -> Result<(f64, f64)> {
    if !(sigma > 2.0) {
        return Err(invalid("sigma", format!("requires sigma > 2, got {sigma}")));
    }
    let b = bilinear_b(u, v, rule)?;
    let lhs = b.sobolev_norm(SobolevIndex(sigma - 1.0));
    let rhs = u.sobolev_norm(SobolevIndex(sigma - 1.0)) * v.sobolev_norm(SobolevIndex(sigma));
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::error::SimError;

    fn lat(n: usize) -> Lattice {
        Lattice::new(n, 2.0 * PI).unwrap()
    }

    fn random(n: usize, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rule = DealiasRule::default();
        SpectralField::random_solenoidal(lat(n), rule.max_mode(n), 1.0, &mut rng)
    }

    #[test]
    fn band_of_two_thirds_rule() {
        let r = DealiasRule::default();
        assert_eq!(r.max_mode(8), 2);
        assert_eq!(r.max_mode(16), 5);
        assert_eq!(r.max_mode(32), 10);
        assert_eq!(r.max_mode(64), 21);
        assert_eq!(r.max_mode(12), 3);
        assert_eq!(r.max_mode(24), 7);
        for n in [8, 12, 16, 24, 32, 48, 64, 128] {
            assert!(r.is_alias_free(n));
        }
        assert!(!DealiasRule::new(1.0).unwrap().is_alias_free(32));
        assert!(DealiasRule::new(0.0).is_err());
        assert!(DealiasRule::new(1.5).is_err());
    }

    #[test]
    fn zero_and_constant_inputs() {
        let u = random(16, 1);
        let zero = SpectralField::zeros(lat(16));
        let rule = DealiasRule::default();
        assert_eq!(bilinear_b(&zero, &u, rule).unwrap().max_abs(), 0.0);
        let mut constant = SpectralField::zeros(lat(16));
        constant.set_coeff(0, [Complex64::new(0.3, 0.0), Complex64::new(-1.1, 0.0)]);
        assert!(bilinear_b(&u, &constant, rule).unwrap().max_abs() < 1e-15);
        assert_eq!(quadratic_b(&zero, rule).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn output_is_real_solenoidal_and_band_limited() {
        let u = random(32, 2);
        let v = random(32, 3);
        let b = bilinear_b(&u, &v, DealiasRule::default()).unwrap();
        assert!(b.is_real(1e-13));
        assert!(b.is_solenoidal(1e-13));
        assert!(b.max_active_mode() <= 10);
    }

    #[test]
    fn rejects_compressible_input() {
        let g = SpectralField::gradient_of(lat(16), |m| if m == [1, 0] || m == [-1, 0] { Complex64::new(1.0, 0.0) } else { Complex64::default() });
        let u = random(16, 4);
        assert!(matches!(bilinear_b(&g, &u, DealiasRule::default()), Err(SimError::NotSolenoidal { .. })));
        assert!(matches!(bilinear_b(&u, &g, DealiasRule::default()), Err(SimError::NotSolenoidal { .. })));
    }

    #[test]
    fn single_mode_self_advection_vanishes() {
        let u = SpectralField::from_stream_function(lat(16), |m| match m {
            [2, 1] => Complex64::new(0.4, 0.3),
            [-2, -1] => Complex64::new(0.4, -0.3),
            _ => Complex64::default(),
        });
        let b = quadratic_b(&u, DealiasRule::default()).unwrap();
        assert!(b.max_abs() < 1e-15);
    }

    #[test]
    fn bilinearity() {
        let (u, w, v) = (random(16, 5), random(16, 6), random(16, 7));
        let rule = DealiasRule::default();
        let (a, c) = (0.7, -1.3);
        let mut mix = &u * a;
        mix.add_scaled(c, &w);
        let lhs = bilinear_b(&mix, &v, rule).unwrap();
        let mut rhs = &bilinear_b(&u, &v, rule).unwrap() * a;
        rhs.add_scaled(c, &bilinear_b(&w, &v, rule).unwrap());
        assert!(lhs.max_abs_diff(&rhs) < 1e-13 * rhs.max_abs());
    }

    #[test]
    fn bound_rejects_small_sigma_and_scales_homogeneously() {
        let (u, v) = (random(16, 8), random(16, 9));
        let rule = DealiasRule::default();
        assert!(check_b_bound(&u, &v, 2.0, rule).is_err());
        let (l1, r1) = check_b_bound(&u, &v, 3.0, rule).unwrap();
        let (l2, r2) = check_b_bound(&(&u * 2.0), &(&v * 2.0), 3.0, rule).unwrap();
        assert!(((l1 / r1) - (l2 / r2)).abs() < 1e-13 * (l1 / r1));
        let zero = SpectralField::zeros(lat(16));
        let (l0, r0) = check_b_bound(&zero, &v, 3.0, rule).unwrap();
        assert_eq!((l0, r0), (0.0, 0.0));
    }

    #[test]
    fn trilinear_matches_projected_form_for_solenoidal_w() {
        let (u, v, w) = (random(16, 10), random(16, 11), random(16, 12));
        let b = bilinear_b(&u, &v, DealiasRule::default()).unwrap();
        let lhs = trilinear_b(&u, &v, &w).unwrap();
        let rhs = b.sobolev_inner(&w, 0.0).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * (u.sobolev_norm(1.0) * v.sobolev_norm(1.0) * w.sobolev_norm(1.0)));
    }
}
