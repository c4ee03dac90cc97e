//! Q-Wiener noise diagonal over divergence-free Fourier modes and the exact
//! Ornstein-Uhlenbeck transition.
//!
//! The noise acts on the `H`-orthonormal real modes of the lattice: for every
//! pair `+-k` (`k != 0`) the complex coordinate `xi_k` along `k_perp/|k|`, and
//! the two real components of the mean flow. Field coefficients relate to the
//! coordinates by `c(k) = xi_k (k_perp/|k|) / L`, so `E||dW||^2_{H^g}` equals
//! `dt * sum_k sigma_k^2 (1+|k|^2)^g` with the mean mode counted twice.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::nonlinearity::DealiasRule;
use crate::spectral::{Lattice, SpectralField};

/// Which lattice modes receive noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActiveSetRepr", into = "ActiveSetRepr")]
pub enum ActiveSet {
    /// Every mode of the Galerkin band.
    All,
    /// Explicit integer modes; `-m` is added automatically.
    Modes(Vec<[i64; 2]>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ActiveSetRepr {
    Keyword(String),
    List(Vec<[i64; 2]>),
}

impl TryFrom<ActiveSetRepr> for ActiveSet {
    type Error = String;
    fn try_from(r: ActiveSetRepr) -> std::result::Result<Self, String> {
        match r {
            ActiveSetRepr::Keyword(k) if k == "all" => Ok(ActiveSet::All),
            ActiveSetRepr::Keyword(k) => Err(format!("active_set must be \"all\" or a list of modes, got {k:?}")),
            ActiveSetRepr::List(v) => Ok(ActiveSet::Modes(v)),
        }
    }
}

impl From<ActiveSet> for ActiveSetRepr {
    fn from(a: ActiveSet) -> Self {
        match a {
            ActiveSet::All => ActiveSetRepr::Keyword("all".into()),
            ActiveSet::Modes(v) => ActiveSetRepr::List(v),
        }
    }
}

/// Noise configuration: `sigma_k = sigma0 (1+|k|^2)^(-r/2)` on the active set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma0: f64,
    pub decay_exponent: f64,
    pub active_set: ActiveSet,
}

impl NoiseSpec {
    /// Default family with `r = 2 alpha + 2`, so that `Tr[Q_{2 alpha}]` stays
    /// bounded under lattice refinement.
    pub fn default_for(alpha: f64) -> Self {
        Self {
            sigma0: 1.0,
            decay_exponent: 2.0 * alpha + 2.0,
            active_set: ActiveSet::All,
        }
    }

    pub fn silent() -> Self {
        Self {
            sigma0: 0.0,
            decay_exponent: 0.0,
            active_set: ActiveSet::All,
        }
    }

    pub fn sigma_at(&self, k_squared: f64) -> f64 {
        self.sigma0 * (1.0 + k_squared).powf(-self.decay_exponent / 2.0)
    }

    /// Per-mode standard deviations on a lattice, restricted to the dealias band.
    pub fn resolve(&self, lattice: Lattice, rule: DealiasRule) -> Result<ModeNoise> {
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return Err(invalid("sigma0", format!("must be finite and nonnegative, got {}", self.sigma0)));
        }
        if !self.decay_exponent.is_finite() {
            return Err(invalid("decay_exponent", "must be finite"));
        }
        let band = rule.max_mode(lattice.n());
        let mut sigma = vec![0.0; lattice.len()];
        match &self.active_set {
            ActiveSet::All => {
                for (idx, s) in sigma.iter_mut().enumerate() {
                    if rule.retains(lattice.n(), lattice.modes(idx)) {
                        *s = self.sigma_at(lattice.k_squared(idx));
                    }
                }
            }
            ActiveSet::Modes(list) => {
                for &m in list {
                    if !rule.retains(lattice.n(), m) {
                        return Err(invalid(
                            "active_set",
                            format!("mode {m:?} lies outside the retained band |m| <= {band}"),
                        ));
                    }
                    for mm in [m, [-m[0], -m[1]]] {
                        let idx = lattice.index(mm).expect("band modes lie on the lattice");
                        sigma[idx] = self.sigma_at(lattice.k_squared(idx));
                    }
                }
            }
        }
        Ok(ModeNoise { lattice, sigma })
    }
}

/// A [`NoiseSpec`] resolved on a lattice: `sigma[idx]`, symmetric under `k -> -k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeNoise {
    lattice: Lattice,
    sigma: Vec<f64>,
}

impl ModeNoise {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn is_silent(&self) -> bool {
        self.sigma.iter().all(|&s| s == 0.0)
    }

    /// Real degrees of freedom per index: two at `k = 0`, one elsewhere.
    fn multiplicity(idx: usize) -> f64 {
        if idx == 0 {
            2.0
        } else {
            1.0
        }
    }

    /// `Tr[Q_gamma] = sum_k sigma_k^2 (1+|k|^2)^gamma`.
    pub fn trace_in_sobolev(&self, gamma: f64) -> f64 {
        self.weighted_sum(|k2| (1.0 + k2).powf(gamma))
    }

    /// Stationary `E||Z||^2_{H^gamma} = sum_k sigma_k^2 (1+|k|^2)^gamma / (2 lambda_k)`,
    /// `lambda_k = (1+|k|^2)^alpha`; independent of `nu`.
    pub fn ou_stationary_moment(&self, alpha: f64, gamma: f64) -> f64 {
        self.weighted_sum(|k2| (1.0 + k2).powf(gamma) / (2.0 * (1.0 + k2).powf(alpha)))
    }

    fn weighted_sum(&self, w: impl Fn(f64) -> f64) -> f64 {
        self.sigma
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != 0.0)
            .map(|(idx, &s)| Self::multiplicity(idx) * s * s * w(self.lattice.k_squared(idx)))
            .sum()
    }

    /// Stationary variance of the orthonormal coordinate of one real mode.
    pub fn stationary_variance(&self, idx: usize, alpha: f64) -> f64 {
        let s = self.sigma[idx];
        s * s / (2.0 * (1.0 + self.lattice.k_squared(idx)).powf(alpha))
    }
}

/// `Tr[Q_gamma]` of a noise specification on a lattice.
pub fn trace_in_sobolev(noise: &ModeNoise, gamma: f64) -> f64 {
    noise.trace_in_sobolev(gamma)
}

/// Closed-form stationary `E||Z||^2_{H^gamma}` of the OU process.
pub fn ou_stationary_moment(noise: &ModeNoise, alpha: f64, gamma: f64) -> f64 {
    noise.ou_stationary_moment(alpha, gamma)
}

/// Seeded random stream; `(seed, stream_id)` fixes every draw.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent companion stream (used for quantities that must not perturb
    /// the main draw sequence).
    pub fn companion(&self) -> Self {
        Self::new(self.seed ^ 0x9e37_79b9_7f4a_7c15, self.stream_id)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// Wiener increment `W_{t+dt} - W_t`: per real mode `N(0, sigma_k^2 dt)`.
pub fn sample_wiener_increment(noise: &ModeNoise, dt: f64, rng: &mut RngStream) -> Result<SpectralField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("increment length must be positive, got {dt}")));
    }
    let sd: Vec<f64> = noise.sigma.iter().map(|s| s * dt.sqrt()).collect();
    let mut out = SpectralField::zeros(noise.lattice);
    fill_modes(&mut out, &sd, rng);
    Ok(out)
}

/// Writes `sum over real modes of sd * N(0,1)` into a zeroed field.
fn fill_modes(out: &mut SpectralField, sd: &[f64], rng: &mut RngStream) {
    let lattice = *out.lattice();
    let inv_l = 1.0 / lattice.box_length();
    let (c0, c1) = out.components_mut();
    for idx in 0..lattice.len() {
        let s = sd[idx];
        if s == 0.0 {
            continue;
        }
        let conj = lattice.conjugate_index(idx);
        if conj < idx {
            continue;
        }
        if idx == 0 {
            c0[0] = (s * inv_l * rng.normal()).into();
            c1[0] = (s * inv_l * rng.normal()).into();
            continue;
        }
        let f = inv_l * std::f64::consts::FRAC_1_SQRT_2;
        let (gr, gi) = (rng.normal(), rng.normal());
        let xi = num_complex::Complex64::new(s * gr, s * gi) * f;
        let e = lattice.solenoidal_direction(idx);
        c0[idx] = xi * e[0];
        c1[idx] = xi * e[1];
        c0[conj] = c0[idx].conj();
        c1[conj] = c1[idx].conj();
    }
}

/// Cached exact OU transition over a fixed step:
/// `z <- exp(-nu dt lambda) z + eta`, `Var eta = sigma^2 (1 - exp(-2 nu dt lambda)) / (2 lambda)`.
///
/// With `with_wiener`, the Wiener increment driving `eta` is also produced,
/// jointly Gaussian with `eta`. Its independent part is drawn from a companion
/// stream, so recording increments never changes the OU path.
#[derive(Debug, Clone)]
pub struct OuPropagator {
    lattice: Lattice,
    decay: Vec<f64>,
    eta_sd: Vec<f64>,
    // dW = w_on_eta * g1 + w_resid * g2, where eta = eta_sd * g1
    w_on_eta: Vec<f64>,
    w_resid: Vec<f64>,
    sqrt_nu: f64,
}

impl OuPropagator {
    pub fn new(noise: &ModeNoise, nu: f64, alpha: f64, dt: f64) -> Result<Self> {
        check_ou_params(nu, alpha, dt)?;
        let lattice = noise.lattice;
        let n = lattice.len();
        let mut decay = vec![0.0; n];
        let mut eta_sd = vec![0.0; n];
        let mut w_on_eta = vec![0.0; n];
        let mut w_resid = vec![0.0; n];
        for idx in 0..n {
            let lambda = (1.0 + lattice.k_squared(idx)).powf(alpha);
            let h = nu * dt * lambda;
            decay[idx] = (-h).exp();
            let s = noise.sigma[idx];
            if s == 0.0 {
                continue;
            }
            let var_eta = s * s * (-(-2.0 * h).exp_m1()) / (2.0 * lambda);
            let cov = nu.sqrt() * s * s * (-(-h).exp_m1()) / (nu * lambda);
            let var_w = s * s * dt;
            eta_sd[idx] = var_eta.sqrt();
            let b = if var_eta > 0.0 { cov / var_eta.sqrt() } else { 0.0 };
            w_on_eta[idx] = b;
            w_resid[idx] = (var_w - b * b).max(0.0).sqrt();
        }
        Ok(Self {
            lattice,
            decay,
            eta_sd,
            w_on_eta,
            w_resid,
            sqrt_nu: nu.sqrt(),
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    pub fn sqrt_nu(&self) -> f64 {
        self.sqrt_nu
    }

    /// Applies `exp(-nu dt A^alpha)` in place.
    pub fn decay_in_place(&self, z: &mut SpectralField) {
        let (c0, c1) = z.components_mut();
        for (idx, &d) in self.decay.iter().enumerate() {
            c0[idx] *= d;
            c1[idx] *= d;
        }
    }

    /// Stochastic convolution over one step started from zero.
    pub fn sample_increment(&self, rng: &mut RngStream) -> SpectralField {
        let mut out = SpectralField::zeros(self.lattice);
        fill_modes(&mut out, &self.eta_sd, rng);
        out
    }

    /// Stochastic convolution and the Wiener increment that produced it.
    pub fn sample_increment_with_wiener(&self, rng: &mut RngStream, companion: &mut RngStream) -> (SpectralField, SpectralField) {
        let lattice = self.lattice;
        let inv_l = 1.0 / lattice.box_length();
        let mut eta = SpectralField::zeros(lattice);
        let mut dw = SpectralField::zeros(lattice);
        for idx in 0..lattice.len() {
            let s = self.eta_sd[idx];
            if s == 0.0 && self.w_resid[idx] == 0.0 {
                continue;
            }
            let conj = lattice.conjugate_index(idx);
            if conj < idx {
                continue;
            }
            let (a, b, c) = (self.eta_sd[idx], self.w_on_eta[idx], self.w_resid[idx]);
            if idx == 0 {
                for comp in 0..2 {
                    let g1 = rng.normal();
                    let g2 = companion.normal();
                    eta.component_mut(comp)[0] = (a * inv_l * g1).into();
                    dw.component_mut(comp)[0] = ((b * g1 + c * g2) * inv_l).into();
                }
                continue;
            }
            let f = inv_l * std::f64::consts::FRAC_1_SQRT_2;
            let (g1r, g1i) = (rng.normal(), rng.normal());
            let (g2r, g2i) = (companion.normal(), companion.normal());
            let xi_eta = num_complex::Complex64::new(a * g1r, a * g1i) * f;
            let xi_w = num_complex::Complex64::new(b * g1r + c * g2r, b * g1i + c * g2i) * f;
            let e = lattice.solenoidal_direction(idx);
            for comp in 0..2 {
                eta.component_mut(comp)[idx] = xi_eta * e[comp];
                eta.component_mut(comp)[conj] = (xi_eta * e[comp]).conj();
                dw.component_mut(comp)[idx] = xi_w * e[comp];
                dw.component_mut(comp)[conj] = (xi_w * e[comp]).conj();
            }
        }
        (eta, dw)
    }

    /// One exact transition of `dZ + nu A^alpha Z dt = sqrt(nu) dW`.
    pub fn step(&self, z: &SpectralField, rng: &mut RngStream) -> SpectralField {
        let mut out = self.sample_increment(rng);
        let (o0, o1) = out.components_mut();
        let (z0, z1) = (z.component(0), z.component(1));
        for (idx, &d) in self.decay.iter().enumerate() {
            o0[idx] += z0[idx] * d;
            o1[idx] += z1[idx] * d;
        }
        out
    }
}

fn check_ou_params(nu: f64, alpha: f64, dt: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(invalid("nu", format!("must be positive, got {nu}")));
    }
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(invalid("alpha", format!("must exceed 1, got {alpha}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    Ok(())
}

/// Exact OU transition over `dt` (convenience form building a fresh propagator).
pub fn ou_exact_step(z: &SpectralField, dt: f64, nu: f64, alpha: f64, noise: &ModeNoise, rng: &mut RngStream) -> Result<SpectralField> {
    z.lattice().ensure_same(noise.lattice())?;
    Ok(OuPropagator::new(noise, nu, alpha, dt)?.step(z, rng))
}
