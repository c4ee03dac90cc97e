//! Time integration of `dX + [nu A^alpha X + B(X)] dt = sqrt(nu) dW`.
//!
//! The direct scheme is exponential Euler-Maruyama with an exact stochastic
//! convolution per step,
//!
//! ```text
//! X+ = exp(-nu dt A^alpha) [X - dt B(X)] + dZ,
//! ```
//!
//! where `dZ` is the exact OU increment from zero over `dt`. The companion
//! deterministic solver integrates the shifted equation
//! `v' + nu A^alpha v + B(v + z) = 0` along a given OU path, and
//! `X = v + z` reconstructs the solution pathwise.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::nonlinearity::{DealiasRule, Nonlinearity};
use crate::spectral::{Lattice, SobolevWeights, SpectralField};
use crate::stochastic::{ModeNoise, OuPropagator, RngStream};

/// Parameters of one hyperviscous run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub nu: f64,
    pub alpha: f64,
    pub dt: f64,
    pub lattice: Lattice,
    pub dealias: DealiasRule,
    /// Extra Picard sweeps per step of the shifted-equation solver.
    pub picard_sweeps: usize,
    /// Switches the nonlinearity off (linear OU dynamics); used by tests.
    pub nonlinear: bool,
}

impl SolverParams {
    pub fn new(nu: f64, alpha: f64, dt: f64, lattice: Lattice) -> Result<Self> {
        let p = Self {
            nu,
            alpha,
            dt,
            lattice,
            dealias: DealiasRule::default(),
            picard_sweeps: 1,
            nonlinear: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(invalid("nu", format!("must be positive, got {}", self.nu)));
        }
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("must exceed 1, got {}", self.alpha)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        Ok(())
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    /// Largest retained wavenumber magnitude along an axis.
    pub fn k_max(&self) -> f64 {
        self.dealias.max_mode(self.lattice.n()) as f64 * self.lattice.spacing()
    }

    /// Advective step limit `c / (max|u| k_max)`.
    pub fn cfl_limit(&self, max_speed: f64, c: f64) -> f64 {
        if max_speed > 0.0 {
            c / (max_speed * self.k_max())
        } else {
            f64::INFINITY
        }
    }
}

/// A sampled path: states at increasing times, optionally with the Wiener
/// increments `W_{t_{n+1}} - W_{t_n}` that drove it.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub noise_path: Option<Vec<SpectralField>>,
}

impl Trajectory {
    pub fn new(t0: f64, x0: SpectralField) -> Self {
        Self {
            times: vec![t0],
            states: vec![x0],
            noise_path: None,
        }
    }

    pub fn push(&mut self, t: f64, x: SpectralField) {
        self.times.push(t);
        self.states.push(x);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &SpectralField {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// `sup_n ||self_n - other_n||_{H^s}` over a common grid.
    pub fn sup_distance(&self, other: &Trajectory, s: f64) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (a - b).sobolev_norm(s))
            .fold(0.0, f64::max))
    }

    /// Every `stride`-th state (keeping the first), with the noise path summed accordingly.
    pub fn subsample(&self, stride: usize) -> Trajectory {
        let mut out = Trajectory::default();
        for (i, (t, x)) in self.times.iter().zip(&self.states).enumerate() {
            if i % stride == 0 {
                out.push(*t, x.clone());
            }
        }
        if let Some(dw) = &self.noise_path {
            let summed = dw
                .chunks(stride)
                .filter(|c| c.len() == stride)
                .map(|c| {
                    let mut acc = c[0].clone();
                    for d in &c[1..] {
                        acc += d;
                    }
                    acc
                })
                .collect();
            out.noise_path = Some(summed);
        }
        out
    }

    pub(crate) fn check_same_grid(&self, other: &Trajectory) -> Result<()> {
        if self.len() != other.len() {
            return Err(SimError::GridMismatch(format!("{} vs {} samples", self.len(), other.len())));
        }
        for (a, b) in self.times.iter().zip(&other.times) {
            if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                return Err(SimError::GridMismatch(format!("time {a} vs {b}")));
            }
        }
        Ok(())
    }
}

/// Stateful stepper for one replica: owns the FFT workspace, the cached OU
/// transition and the random streams.
pub struct HnsStepper {
    params: SolverParams,
    nonlinearity: Nonlinearity,
    ou: OuPropagator,
    rng: RngStream,
    companion: Option<RngStream>,
    drift: SpectralField,
    step: usize,
    time: f64,
}

impl HnsStepper {
    pub fn new(params: SolverParams, noise: &ModeNoise, rng: RngStream) -> Result<Self> {
        params.validate()?;
        params.lattice.ensure_same(noise.lattice())?;
        Ok(Self {
            params,
            nonlinearity: Nonlinearity::new(params.lattice, params.dealias),
            ou: OuPropagator::new(noise, params.nu, params.alpha, params.dt)?,
            rng,
            companion: None,
            drift: SpectralField::zeros(params.lattice),
            step: 0,
            time: 0.0,
        })
    }

    /// Also produce the Wiener increment of every step (for Ito audits).
    pub fn record_wiener(mut self) -> Self {
        self.companion = Some(self.rng.companion());
        self
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn propagator(&self) -> &OuPropagator {
        &self.ou
    }

    /// `max|X|` seen by the last nonlinear evaluation.
    pub fn last_max_speed(&self) -> f64 {
        self.nonlinearity.last_max_speed()
    }

    /// Advances `x` by one step; returns the Wiener increment when recording.
    pub fn step(&mut self, x: &mut SpectralField) -> Result<Option<SpectralField>> {
        let (eta, dw) = match self.companion.as_mut() {
            Some(companion) => {
                let (eta, dw) = self.ou.sample_increment_with_wiener(&mut self.rng, companion);
                (eta, Some(dw))
            }
            None => (self.ou.sample_increment(&mut self.rng), None),
        };
        self.step_with_increment(x, &eta)?;
        Ok(dw)
    }

    /// Deterministic part of the step followed by a given OU increment.
    pub fn step_with_increment(&mut self, x: &mut SpectralField, increment: &SpectralField) -> Result<()> {
        lawson_euler(x, &mut self.drift, &mut self.nonlinearity, &self.ou, &self.params);
        *x += increment;
        self.step += 1;
        self.time = self.step as f64 * self.params.dt;
        if !x.all_finite() {
            return Err(SimError::BlowUp {
                step: self.step,
                time: self.time,
            });
        }
        Ok(())
    }
}

/// `x <- S [x - dt B(x)]`.
fn lawson_euler(x: &mut SpectralField, drift: &mut SpectralField, nl: &mut Nonlinearity, ou: &OuPropagator, p: &SolverParams) {
    if p.nonlinear {
        nl.quadratic_into(x, drift);
        x.add_scaled(-p.dt, drift);
    }
    ou.decay_in_place(x);
}

/// One exponential Euler-Maruyama step with exact OU noise.
pub fn step_hns(x: &SpectralField, params: &SolverParams, noise: &ModeNoise, rng: &mut RngStream) -> Result<SpectralField> {
    let mut stepper = HnsStepper::new(*params, noise, rng.clone())?;
    let mut out = x.clone();
    stepper.step(&mut out)?;
    *rng = stepper.rng;
    Ok(out)
}

/// Integrates `steps` steps from `x0`, recording every state and the Wiener increments.
pub fn simulate(x0: &SpectralField, params: &SolverParams, noise: &ModeNoise, rng: RngStream, steps: usize) -> Result<Trajectory> {
    let mut stepper = HnsStepper::new(*params, noise, rng)?.record_wiener();
    let mut traj = Trajectory::new(0.0, x0.clone());
    let mut x = x0.clone();
    let mut dws = Vec::with_capacity(steps);
    for _ in 0..steps {
        let dw = stepper.step(&mut x)?;
        dws.push(dw.expect("recording enabled"));
        traj.push(stepper.time(), x.clone());
    }
    traj.noise_path = Some(dws);
    Ok(traj)
}

/// Exact OU path from `Z_0 = 0` on the grid `n dt`, with its Wiener increments.
pub fn sample_ou_path(params: &SolverParams, noise: &ModeNoise, rng: RngStream, steps: usize) -> Result<Trajectory> {
    let ou = OuPropagator::new(noise, params.nu, params.alpha, params.dt)?;
    let mut rng = rng;
    let mut companion = rng.companion();
    let mut z = SpectralField::zeros(params.lattice);
    let mut traj = Trajectory::new(0.0, z.clone());
    let mut dws = Vec::with_capacity(steps);
    for n in 1..=steps {
        let (eta, dw) = ou.sample_increment_with_wiener(&mut rng, &mut companion);
        ou.decay_in_place(&mut z);
        z += &eta;
        dws.push(dw);
        traj.push(n as f64 * params.dt, z.clone());
    }
    traj.noise_path = Some(dws);
    Ok(traj)
}

/// Direct scheme driven by the increments of a given OU path,
/// `dZ_n = z_{n+1} - S z_n`; starts from `X_0 = x + z_0`.
pub fn direct_along_path(x: &SpectralField, z_path: &Trajectory, params: &SolverParams) -> Result<Trajectory> {
    let noise_free = crate::stochastic::NoiseSpec::silent().resolve(params.lattice, params.dealias)?;
    check_path_grid(z_path, params)?;
    let mut stepper = HnsStepper::new(*params, &noise_free, RngStream::new(0, 0))?;
    let mut state = x + &z_path.states[0];
    let mut traj = Trajectory::new(z_path.times[0], state.clone());
    for n in 0..z_path.len() - 1 {
        let mut inc = z_path.states[n].clone();
        stepper.ou.decay_in_place(&mut inc);
        let inc = &z_path.states[n + 1] - &inc;
        stepper.step_with_increment(&mut state, &inc)?;
        traj.push(z_path.times[n + 1], state.clone());
    }
    Ok(traj)
}

fn check_path_grid(z_path: &Trajectory, params: &SolverParams) -> Result<()> {
    if z_path.is_empty() {
        return Err(SimError::GridMismatch("empty z path".into()));
    }
    for (n, w) in z_path.times.windows(2).enumerate() {
        if ((w[1] - w[0]) - params.dt).abs() > 1e-9 * params.dt {
            return Err(SimError::GridMismatch(format!(
                "z path spacing {} at sample {n} differs from dt = {}",
                w[1] - w[0],
                params.dt
            )));
        }
    }
    Ok(())
}

/// Deterministic solver for `v' + nu A^alpha v + B(v + z) = 0`, `v(0) = x`,
/// with `z` frozen per step and `picard_sweeps` trapezoidal corrections.
pub fn solve_v(x: &SpectralField, z_path: &Trajectory, params: &SolverParams) -> Result<Trajectory> {
    params.validate()?;
    check_path_grid(z_path, params)?;
    let noise_free = crate::stochastic::NoiseSpec::silent().resolve(params.lattice, params.dealias)?;
    let ou = OuPropagator::new(&noise_free, params.nu, params.alpha, params.dt)?;
    let mut nl = Nonlinearity::new(params.lattice, params.dealias);
    let mut v = x.clone();
    let mut traj = Trajectory::new(z_path.times[0], v.clone());
    let mut drift = SpectralField::zeros(params.lattice);
    let mut drift_end = SpectralField::zeros(params.lattice);
    for n in 0..z_path.len() - 1 {
        let z0 = &z_path.states[n];
        let z1 = &z_path.states[n + 1];
        let mut next = v.clone();
        if params.nonlinear {
            let xn = &v + z0;
            nl.quadratic_into(&xn, &mut drift);
            next.add_scaled(-params.dt, &drift);
        }
        ou.decay_in_place(&mut next);
        if params.nonlinear && params.picard_sweeps > 0 {
            // v+ = S v - dt/2 [S B(v + z_n) + B(v+ + z_{n+1})]
            let mut start = v.clone();
            ou.decay_in_place(&mut start);
            let mut left = drift.clone();
            ou.decay_in_place(&mut left);
            for _ in 0..params.picard_sweeps {
                let xe = &next + z1;
                nl.quadratic_into(&xe, &mut drift_end);
                next = start.clone();
                next.add_scaled(-0.5 * params.dt, &left);
                next.add_scaled(-0.5 * params.dt, &drift_end);
            }
        }
        if !next.all_finite() {
            return Err(SimError::BlowUp {
                step: n + 1,
                time: z_path.times[n + 1],
            });
        }
        v = next;
        traj.push(z_path.times[n + 1], v.clone());
    }
    Ok(traj)
}

/// `X = v + z` pointwise in time.
pub fn reconstruct_x(x: &SpectralField, z_path: &Trajectory, params: &SolverParams) -> Result<Trajectory> {
    let v = solve_v(x, z_path, params)?;
    combine(&v, z_path)
}

/// Pointwise sum of two trajectories on the same grid.
pub fn combine(v: &Trajectory, z: &Trajectory) -> Result<Trajectory> {
    v.check_same_grid(z)?;
    let mut out = Trajectory::default();
    for ((t, a), b) in v.times.iter().zip(&v.states).zip(&z.states) {
        out.push(*t, a + b);
    }
    out.noise_path = z.noise_path.clone();
    Ok(out)
}

/// Terms of the discrete Ito identity for `||X||^2_{H^gamma}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BalanceReport {
    pub gamma: f64,
    pub horizon: f64,
    /// `||X_T||^2 - ||X_0||^2`
    pub energy_change: f64,
    /// `2 nu sum dt ||X||^2_{H^{gamma+alpha}}`
    pub dissipation: f64,
    /// `2 sum dt <B(X), X>_{H^gamma}`
    pub nonlinear: f64,
    /// `2 sqrt(nu) sum <X, dW>_{H^gamma}`
    pub martingale: f64,
    /// `nu Tr[Q_gamma] T`
    pub ito_correction: f64,
    pub residual: f64,
    /// Largest magnitude among the terms, for relative statements.
    pub scale: f64,
}

/// Discrete residual of
/// `||X_T||^2 - ||X_0||^2 + 2 nu int ||X||^2_{gamma+alpha} + 2 int <B(X),X>_gamma
///  - 2 sqrt(nu) int <X, dW>_gamma - nu Tr[Q_gamma] T`.
pub fn ito_balance_audit(traj: &Trajectory, params: &SolverParams, noise: &ModeNoise, gamma: f64) -> Result<BalanceReport> {
    let dws = traj.noise_path.as_ref().ok_or(SimError::MissingNoisePath)?;
    if dws.len() + 1 != traj.len() {
        return Err(SimError::GridMismatch(format!(
            "{} states but {} noise increments",
            traj.len(),
            dws.len()
        )));
    }
    let lat = params.lattice;
    let w_gamma = SobolevWeights::new(lat, gamma);
    let w_diss = SobolevWeights::new(lat, gamma + params.alpha);
    let mut nl = Nonlinearity::new(lat, params.dealias);
    let mut b = SpectralField::zeros(lat);
    let (mut diss, mut nonlin, mut mart) = (0.0, 0.0, 0.0);
    for (n, dw) in dws.iter().enumerate() {
        let x = &traj.states[n];
        let dt = traj.times[n + 1] - traj.times[n];
        diss += dt * w_diss.norm_sq(x);
        if params.nonlinear {
            nl.quadratic_into(x, &mut b);
            nonlin += dt * w_gamma.inner(&b, x)?;
        }
        mart += w_gamma.inner(x, dw)?;
    }
    let horizon = traj.final_time() - traj.times[0];
    let energy_change = w_gamma.norm_sq(traj.last()) - w_gamma.norm_sq(&traj.states[0]);
    let dissipation = 2.0 * params.nu * diss;
    let nonlinear = 2.0 * nonlin;
    let martingale = 2.0 * params.nu.sqrt() * mart;
    let ito_correction = params.nu * noise.trace_in_sobolev(gamma) * horizon;
    let residual = energy_change + dissipation + nonlinear - martingale - ito_correction;
    let scale = [energy_change, dissipation, martingale, ito_correction]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(BalanceReport {
        gamma,
        horizon,
        energy_change,
        dissipation,
        nonlinear,
        martingale,
        ito_correction,
        residual,
        scale,
    })
}

/// Empirical moment bounds over an ensemble sharing an initial law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub nu: f64,
    pub horizon: f64,
    pub members: usize,
    /// `(p, E sup_t ||X_t||^p_{H^1}, E||X_0||^p_{H^1} + (T nu)^{p/2}, ratio)`
    pub sup_moments: Vec<(u32, f64, f64, f64)>,
    /// `E[2 nu int_0^T ||X||^2_{H^{alpha+1}}]`
    pub dissipation: f64,
    /// `E||X_T||^2_{H^1} + E[2 nu int ||X||^2_{H^{alpha+1}}] - E||X_0||^2_{H^1} - nu Tr[Q_1] T`
    pub second_moment_balance: f64,
}

pub fn check_apriori_bounds(ensemble: &[Trajectory], params: &SolverParams, noise: &ModeNoise) -> Result<BoundReport> {
    if ensemble.is_empty() {
        return Err(SimError::EmptyEnsemble);
    }
    let lat = params.lattice;
    let h1 = SobolevWeights::new(lat, 1.0);
    let ha1 = SobolevWeights::new(lat, params.alpha + 1.0);
    let powers = [2u32, 4, 8];
    let mut sup_acc = [0.0; 3];
    let mut init_acc = [0.0; 3];
    let (mut diss_acc, mut end_acc) = (0.0, 0.0);
    let horizon = ensemble[0].final_time() - ensemble[0].times[0];
    for traj in ensemble {
        let norms: Vec<f64> = traj.states.iter().map(|x| h1.norm_sq(x).sqrt()).collect();
        let sup = norms.iter().cloned().fold(0.0, f64::max);
        for (i, &p) in powers.iter().enumerate() {
            sup_acc[i] += sup.powi(p as i32);
            init_acc[i] += norms[0].powi(p as i32);
        }
        let mut diss = 0.0;
        for n in 0..traj.len() - 1 {
            diss += (traj.times[n + 1] - traj.times[n]) * ha1.norm_sq(&traj.states[n]);
        }
        diss_acc += 2.0 * params.nu * diss;
        end_acc += norms.last().unwrap().powi(2);
    }
    let m = ensemble.len() as f64;
    let sup_moments = powers
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let lhs = sup_acc[i] / m;
            let rhs = init_acc[i] / m + (horizon * params.nu).powf(p as f64 / 2.0);
            (p, lhs, rhs, if rhs > 0.0 { lhs / rhs } else { 0.0 })
        })
        .collect();
    let dissipation = diss_acc / m;
    let second_moment_balance =
        end_acc / m + dissipation - init_acc[0] / m - params.nu * noise.trace_in_sobolev(1.0) * horizon;
    Ok(BoundReport {
        nu: params.nu,
        horizon,
        members: ensemble.len(),
        sup_moments,
        dissipation,
        second_moment_balance,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::stochastic::NoiseSpec;

    fn params(n: usize) -> SolverParams {
        SolverParams::new(0.1, 2.0, 0.01, Lattice::new(n, 2.0 * PI).unwrap()).unwrap()
    }

    #[test]
    fn parameter_validation() {
        let lat = Lattice::new(16, 1.0).unwrap();
        assert!(SolverParams::new(0.0, 2.0, 0.1, lat).is_err());
        assert!(SolverParams::new(0.1, 1.0, 0.1, lat).is_err());
        assert!(SolverParams::new(0.1, 2.0, 0.0, lat).is_err());
    }

    #[test]
    fn linear_noiseless_step_is_semigroup() {
        let p = params(16).linear();
        let noise = NoiseSpec::silent().resolve(p.lattice, p.dealias).unwrap();
        let x = SpectralField::random_solenoidal(p.lattice, 5, 1.0, &mut RngStream::new(1, 0));
        let out = step_hns(&x, &p, &noise, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(out, x.semigroup_apply(p.nu, p.alpha, p.dt).unwrap());
    }

    #[test]
    fn first_step_from_zero_is_ou_step() {
        let p = params(16);
        let noise = NoiseSpec::default_for(2.0).resolve(p.lattice, p.dealias).unwrap();
        let zero = SpectralField::zeros(p.lattice);
        let x = step_hns(&zero, &p, &noise, &mut RngStream::new(4, 2)).unwrap();
        let z = crate::stochastic::ou_exact_step(&zero, p.dt, p.nu, p.alpha, &noise, &mut RngStream::new(4, 2)).unwrap();
        assert_eq!(x, z);
    }

    #[test]
    fn blow_up_is_reported() {
        let mut p = params(16);
        p.dt = 50.0;
        p.nu = 1e-12;
        let noise = NoiseSpec::silent().resolve(p.lattice, p.dealias).unwrap();
        let mut x = SpectralField::random_solenoidal(p.lattice, 5, 0.0, &mut RngStream::new(1, 0));
        x.scale(1e3);
        let mut stepper = HnsStepper::new(p, &noise, RngStream::new(0, 0)).unwrap();
        let mut err = None;
        for _ in 0..200 {
            if let Err(e) = stepper.step(&mut x) {
                err = Some(e);
                break;
            }
        }
        assert!(matches!(err, Some(SimError::BlowUp { .. })));
    }

    #[test]
    fn v_of_zero_data_is_zero() {
        let p = params(16);
        let z = Trajectory {
            times: (0..5).map(|n| n as f64 * p.dt).collect(),
            states: vec![SpectralField::zeros(p.lattice); 5],
            noise_path: None,
        };
        let v = solve_v(&SpectralField::zeros(p.lattice), &z, &p).unwrap();
        assert!(v.states.iter().all(|s| s.max_abs() == 0.0));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let p = params(16);
        let z = Trajectory {
            times: vec![0.0, 0.5],
            states: vec![SpectralField::zeros(p.lattice); 2],
            noise_path: None,
        };
        assert!(matches!(solve_v(&SpectralField::zeros(p.lattice), &z, &p), Err(SimError::GridMismatch(_))));
    }

    #[test]
    fn audit_requires_noise_path() {
        let p = params(16);
        let noise = NoiseSpec::silent().resolve(p.lattice, p.dealias).unwrap();
        let t = Trajectory::new(0.0, SpectralField::zeros(p.lattice));
        assert!(matches!(ito_balance_audit(&t, &p, &noise, 1.0), Err(SimError::MissingNoisePath)));
        assert!(matches!(check_apriori_bounds(&[], &p, &noise), Err(SimError::EmptyEnsemble)));
    }
}
