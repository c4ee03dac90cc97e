use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Lattice, Transform2d};
use crate::error::{invalid, Result, SimError};

/// Sobolev regularity index `s` (any finite real, negative allowed).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SobolevIndex(pub f64);

impl From<f64> for SobolevIndex {
    fn from(s: f64) -> Self {
        SobolevIndex(s)
    }
}

impl From<i32> for SobolevIndex {
    fn from(s: i32) -> Self {
        SobolevIndex(s as f64)
    }
}

/// Real velocity field stored as Fourier coefficients, one complex 2-vector per
/// wavevector (component-major: `coeffs[c][idx]`).
///
/// Reality (`c(-k) = conj c(k)`) and solenoidality (`k.c(k) = 0`) are
/// properties of the data; they are checked by [`SpectralField::hermitian_defect`]
/// and [`SpectralField::divergence_defect`] and preserved by every operator
/// in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    lattice: Lattice,
    coeffs: [Vec<Complex64>; 2],
}

impl SpectralField {
    pub fn zeros(lattice: Lattice) -> Self {
        let n = lattice.len();
        Self {
            lattice,
            coeffs: [vec![Complex64::default(); n], vec![Complex64::default(); n]],
        }
    }

    pub fn from_components(lattice: Lattice, c0: Vec<Complex64>, c1: Vec<Complex64>) -> Result<Self> {
        if c0.len() != lattice.len() || c1.len() != lattice.len() {
            return Err(invalid(
                "coeffs",
                format!("expected {} coefficients per component", lattice.len()),
            ));
        }
        Ok(Self {
            lattice,
            coeffs: [c0, c1],
        })
    }

    /// Velocity `u = (d_2 psi, -d_1 psi)` of a stream function given by its
    /// Fourier coefficients.
    pub fn from_stream_function(lattice: Lattice, psi: impl Fn([i64; 2]) -> Complex64) -> Self {
        let mut out = Self::zeros(lattice);
        let i = Complex64::i();
        for idx in 0..lattice.len() {
            let p = psi(lattice.modes(idx));
            if p == Complex64::default() {
                continue;
            }
            let [k1, k2] = lattice.wavevector(idx);
            out.coeffs[0][idx] = i * k2 * p;
            out.coeffs[1][idx] = -i * k1 * p;
        }
        out
    }

    /// Gradient `grad phi` of a scalar potential; not solenoidal.
    pub fn gradient_of(lattice: Lattice, phi: impl Fn([i64; 2]) -> Complex64) -> Self {
        let mut out = Self::zeros(lattice);
        let i = Complex64::i();
        for idx in 0..lattice.len() {
            let p = phi(lattice.modes(idx));
            let [k1, k2] = lattice.wavevector(idx);
            out.coeffs[0][idx] = i * k1 * p;
            out.coeffs[1][idx] = i * k2 * p;
        }
        out
    }

    /// Random real solenoidal field with modes `max(|m1|,|m2|) <= band`,
    /// amplitude `(1+|k|^2)^(-decay/2)` per mode and a random mean flow.
    pub fn random_solenoidal<R: Rng + ?Sized>(lattice: Lattice, band: i64, decay: f64, rng: &mut R) -> Self {
        let mut out = Self::zeros(lattice);
        for idx in 0..lattice.len() {
            let [m1, m2] = lattice.modes(idx);
            if m1.abs() > band || m2.abs() > band {
                continue;
            }
            let conj = lattice.conjugate_index(idx);
            if conj < idx {
                continue;
            }
            let amp = (1.0 + lattice.k_squared(idx)).powf(-decay / 2.0);
            if idx == 0 {
                out.coeffs[0][0] = Complex64::new(amp * rng.sample::<f64, _>(StandardNormal), 0.0);
                out.coeffs[1][0] = Complex64::new(amp * rng.sample::<f64, _>(StandardNormal), 0.0);
                continue;
            }
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let xi = Complex64::new(re, im) * (amp / std::f64::consts::SQRT_2);
            let e = out.lattice.solenoidal_direction(idx);
            out.coeffs[0][idx] = xi * e[0];
            out.coeffs[1][idx] = xi * e[1];
            out.coeffs[0][conj] = out.coeffs[0][idx].conj();
            out.coeffs[1][conj] = out.coeffs[1][idx].conj();
        }
        out
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.coeffs[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.coeffs[c]
    }

    pub fn components_mut(&mut self) -> (&mut [Complex64], &mut [Complex64]) {
        let [a, b] = &mut self.coeffs;
        (a, b)
    }

    pub fn coeff(&self, idx: usize) -> [Complex64; 2] {
        [self.coeffs[0][idx], self.coeffs[1][idx]]
    }

    pub fn set_coeff(&mut self, idx: usize, c: [Complex64; 2]) {
        self.coeffs[0][idx] = c[0];
        self.coeffs[1][idx] = c[1];
    }

    /// Coefficient of the integer mode `m`, if it lies on the lattice.
    pub fn coeff_at(&self, m: [i64; 2]) -> Option<[Complex64; 2]> {
        self.lattice.index(m).map(|i| self.coeff(i))
    }

    /// Max over `k` of `|c(-k) - conj c(k)|`; zero for real fields.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for idx in 0..self.lattice.len() {
            let conj = self.lattice.conjugate_index(idx);
            for c in 0..2 {
                worst = worst.max((self.coeffs[c][conj] - self.coeffs[c][idx].conj()).norm());
            }
        }
        worst
    }

    /// Max over `k != 0` of `|k.c(k)|`.
    pub fn divergence_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for idx in 1..self.lattice.len() {
            let [k1, k2] = self.lattice.wavevector(idx);
            let d = self.coeffs[0][idx] * k1 + self.coeffs[1][idx] * k2;
            worst = worst.max(d.norm());
        }
        worst
    }

    /// Max over `k` of `|k| |c(k)|`, the natural scale of the divergence defect.
    pub fn gradient_scale(&self) -> f64 {
        let mut worst = 0.0f64;
        for idx in 0..self.lattice.len() {
            let k = self.lattice.k_squared(idx).sqrt();
            let c = self.coeffs[0][idx].norm().max(self.coeffs[1][idx].norm());
            worst = worst.max(k * c);
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// Relative solenoidality test: `divergence_defect <= tol * gradient_scale`.
    pub fn is_solenoidal(&self, tol: f64) -> bool {
        self.divergence_defect() <= tol * self.gradient_scale() + f64::MIN_POSITIVE
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol * self.max_abs() + f64::MIN_POSITIVE
    }

    pub fn all_finite(&self) -> bool {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest `max(|m1|, |m2|)` carrying a nonzero coefficient (0 for the zero field).
    pub fn max_active_mode(&self) -> i64 {
        let mut worst = 0i64;
        for idx in 0..self.lattice.len() {
            if self.coeffs[0][idx] != Complex64::default() || self.coeffs[1][idx] != Complex64::default() {
                let [m1, m2] = self.lattice.modes(idx);
                worst = worst.max(m1.abs().max(m2.abs()));
            }
        }
        worst
    }

    /// Zeroes every mode with `max(|m1|, |m2|) > band`.
    pub fn truncate(&mut self, band: i64) {
        for idx in 0..self.lattice.len() {
            let [m1, m2] = self.lattice.modes(idx);
            if m1.abs() > band || m2.abs() > band {
                self.coeffs[0][idx] = Complex64::default();
                self.coeffs[1][idx] = Complex64::default();
            }
        }
    }

    /// Leray projection: `c <- c - (k.c) k / |k|^2` for `k != 0`; the mean mode is kept.
    pub fn leray_project(&self) -> Self {
        let mut out = self.clone();
        out.leray_project_in_place();
        out
    }

    pub fn leray_project_in_place(&mut self) {
        let lattice = self.lattice;
        let (c0, c1) = self.components_mut();
        for idx in 1..lattice.len() {
            let [k1, k2] = lattice.wavevector(idx);
            let dot = c0[idx] * k1 + c1[idx] * k2;
            if dot == Complex64::default() {
                continue;
            }
            let f = dot / (k1 * k1 + k2 * k2);
            c0[idx] -= f * k1;
            c1[idx] -= f * k2;
        }
    }

    /// Multiplies each mode by `f(|k|^2)`.
    pub fn apply_multiplier(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.apply_multiplier_in_place(f);
        out
    }

    pub fn apply_multiplier_in_place(&mut self, f: impl Fn(f64) -> f64) {
        let lattice = self.lattice;
        let (c0, c1) = self.components_mut();
        for idx in 0..lattice.len() {
            let w = f(lattice.k_squared(idx));
            c0[idx] *= w;
            c1[idx] *= w;
        }
    }

    /// Hyperviscous Stokes operator `A^alpha`: multiplier `(1+|k|^2)^alpha`.
    pub fn apply_a_alpha(&self, alpha: f64) -> Self {
        self.apply_multiplier(|k2| (1.0 + k2).powf(alpha))
    }

    /// `exp(-nu t A^alpha) u`.
    pub fn semigroup_apply(&self, nu: f64, alpha: f64, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(invalid("t", format!("semigroup time must be nonnegative, got {t}")));
        }
        if !(nu > 0.0) {
            return Err(invalid("nu", format!("viscosity must be positive, got {nu}")));
        }
        Ok(self.apply_multiplier(|k2| (-nu * t * (1.0 + k2).powf(alpha)).exp()))
    }

    /// `<u, v>_{H^s} = L^2 sum_k (1+|k|^2)^s Re[c_u(k) . conj c_v(k)]`.
    pub fn sobolev_inner(&self, other: &SpectralField, s: impl Into<SobolevIndex>) -> Result<f64> {
        self.lattice.ensure_same(&other.lattice)?;
        let s = s.into().0;
        Ok(self.weighted_inner(other, |k2| (1.0 + k2).powf(s)))
    }

    pub fn sobolev_norm(&self, s: impl Into<SobolevIndex>) -> f64 {
        self.sobolev_norm_sq(s).sqrt()
    }

    pub fn sobolev_norm_sq(&self, s: impl Into<SobolevIndex>) -> f64 {
        let s = s.into().0;
        self.weighted_inner(self, |k2| (1.0 + k2).powf(s))
    }

    fn weighted_inner(&self, other: &SpectralField, w: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for idx in 0..self.lattice.len() {
            let a = self.coeffs[0][idx] * other.coeffs[0][idx].conj()
                + self.coeffs[1][idx] * other.coeffs[1][idx].conj();
            if a.re != 0.0 {
                acc += w(self.lattice.k_squared(idx)) * a.re;
            }
        }
        acc * self.lattice.volume()
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, a: f64, other: &SpectralField) {
        debug_assert_eq!(self.lattice, other.lattice);
        for c in 0..2 {
            for (x, y) in self.coeffs[c].iter_mut().zip(&other.coeffs[c]) {
                *x += y * a;
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in 0..2 {
            for x in self.coeffs[c].iter_mut() {
                *x *= a;
            }
        }
    }

    /// Max coefficient-wise distance.
    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
    }

    /// Grid values of both components on the `N x N` grid `x_p = p L / N`.
    pub fn to_grid(&self, transform: &mut Transform2d) -> [Vec<f64>; 2] {
        let mut buf: Vec<Complex64> = self.coeffs[0]
            .iter()
            .zip(&self.coeffs[1])
            .map(|(a, b)| a + Complex64::i() * b)
            .collect();
        transform.inverse(&mut buf);
        [buf.iter().map(|z| z.re).collect(), buf.iter().map(|z| z.im).collect()]
    }

    pub fn from_grid(lattice: Lattice, u: &[f64], v: &[f64], transform: &mut Transform2d) -> Self {
        let mut out = Self::zeros(lattice);
        for (c, data) in [u, v].into_iter().enumerate() {
            let mut buf: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            transform.forward(&mut buf);
            out.coeffs[c] = buf;
        }
        out
    }
}

impl Lattice {
    /// Unit divergence-free direction `k_perp / |k| = (-k2, k1) / |k|` for `k != 0`.
    pub fn solenoidal_direction(&self, idx: usize) -> [f64; 2] {
        let [k1, k2] = self.wavevector(idx);
        let k = (k1 * k1 + k2 * k2).sqrt();
        [-k2 / k, k1 / k]
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        self.add_scaled(1.0, rhs);
    }
}

impl SubAssign<&SpectralField> for SpectralField {
    fn sub_assign(&mut self, rhs: &SpectralField) {
        self.add_scaled(-1.0, rhs);
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, a: f64) -> SpectralField {
        let mut out = self.clone();
        out.scale(a);
        out
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self * -1.0
    }
}

/// Precomputed `(1+|k|^2)^s` table for repeated norm evaluations on one lattice.
#[derive(Debug, Clone)]
pub struct SobolevWeights {
    lattice: Lattice,
    s: f64,
    weights: Vec<f64>,
}

impl SobolevWeights {
    pub fn new(lattice: Lattice, s: impl Into<SobolevIndex>) -> Self {
        let s = s.into().0;
        let weights = (0..lattice.len())
            .map(|i| (1.0 + lattice.k_squared(i)).powf(s))
            .collect();
        Self { lattice, s, weights }
    }

    pub fn index(&self) -> f64 {
        self.s
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn norm_sq(&self, u: &SpectralField) -> f64 {
        debug_assert_eq!(u.lattice, self.lattice);
        self.inner_unchecked(u, u)
    }

    pub fn inner(&self, u: &SpectralField, v: &SpectralField) -> Result<f64> {
        self.lattice.ensure_same(u.lattice())?;
        self.lattice.ensure_same(v.lattice())?;
        Ok(self.inner_unchecked(u, v))
    }

    fn inner_unchecked(&self, u: &SpectralField, v: &SpectralField) -> f64 {
        let (u0, u1) = (&u.coeffs[0], &u.coeffs[1]);
        let (v0, v1) = (&v.coeffs[0], &v.coeffs[1]);
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            let re = u0[i].re * v0[i].re + u0[i].im * v0[i].im + u1[i].re * v1[i].re + u1[i].im * v1[i].im;
            acc += w * re;
        }
        acc * self.lattice.volume()
    }
}

/// Error helper shared with the nonlinearity module.
pub(crate) fn ensure_solenoidal(u: &SpectralField) -> Result<()> {
    let defect = u.divergence_defect();
    if defect <= 1e-9 * u.gradient_scale() + f64::MIN_POSITIVE {
        Ok(())
    } else {
        Err(SimError::NotSolenoidal { defect })
    }
}
