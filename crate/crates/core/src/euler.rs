//! Deterministic Euler flow `u' + B(u) = 0` on the Galerkin truncation.
//!
//! Without the hyperviscous term the truncated system is a non-stiff ODE, so
//! a classical explicit scheme is used. Energy and enstrophy are conserved by
//! the exact flow; what the monitors measure is pure time-stepping error.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::nonlinearity::{DealiasRule, Nonlinearity};
use crate::solver::Trajectory;
use crate::spectral::{ensure_solenoidal, Lattice, SobolevWeights, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EulerScheme {
    #[default]
    Rk4,
    Midpoint,
}

impl std::str::FromStr for EulerScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rk4" => Ok(Self::Rk4),
            "midpoint" => Ok(Self::Midpoint),
            other => Err(format!("unknown scheme {other:?} (expected \"rk4\" or \"midpoint\")")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerParams {
    pub dt: f64,
    pub lattice: Lattice,
    pub dealias: DealiasRule,
    pub scheme: EulerScheme,
}

impl EulerParams {
    pub fn new(dt: f64, lattice: Lattice, scheme: EulerScheme) -> Result<Self> {
        let p = Self {
            dt,
            lattice,
            dealias: DealiasRule::default(),
            scheme,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Reusable integrator holding the FFT workspace and stage buffers.
pub struct EulerStepper {
    params: EulerParams,
    nl: Nonlinearity,
    stages: [SpectralField; 4],
    tmp: SpectralField,
}

impl EulerStepper {
    pub fn new(params: EulerParams) -> Result<Self> {
        params.validate()?;
        let z = SpectralField::zeros(params.lattice);
        Ok(Self {
            params,
            nl: Nonlinearity::new(params.lattice, params.dealias),
            stages: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        })
    }

    pub fn params(&self) -> &EulerParams {
        &self.params
    }

    /// One step of size `h` in place.
    pub fn step(&mut self, u: &mut SpectralField, h: f64) {
        match self.params.scheme {
            EulerScheme::Midpoint => {
                // u+ = u - h B(u - h/2 B(u))
                self.nl.quadratic_into(u, &mut self.stages[0]);
                self.tmp.clone_from(u);
                self.tmp.add_scaled(-0.5 * h, &self.stages[0]);
                self.nl.quadratic_into(&self.tmp, &mut self.stages[1]);
                u.add_scaled(-h, &self.stages[1]);
            }
            EulerScheme::Rk4 => {
                let [k1, k2, k3, k4] = &mut self.stages;
                self.nl.quadratic_into(u, k1);
                self.tmp.clone_from(u);
                self.tmp.add_scaled(-0.5 * h, k1);
                self.nl.quadratic_into(&self.tmp, k2);
                self.tmp.clone_from(u);
                self.tmp.add_scaled(-0.5 * h, k2);
                self.nl.quadratic_into(&self.tmp, k3);
                self.tmp.clone_from(u);
                self.tmp.add_scaled(-h, k3);
                self.nl.quadratic_into(&self.tmp, k4);
                u.add_scaled(-h / 6.0, k1);
                u.add_scaled(-h / 3.0, k2);
                u.add_scaled(-h / 3.0, k3);
                u.add_scaled(-h / 6.0, k4);
            }
        }
    }

    /// Integrates to time `t` with `ceil(t/dt)` equal steps; `t = 0` returns `x` bitwise.
    pub fn flow(&mut self, x: &SpectralField, t: f64) -> Result<SpectralField> {
        self.trajectory(x, t, usize::MAX).map(|tr| tr.states.into_iter().last().expect("nonempty"))
    }

    /// As [`flow`](Self::flow), recording every `record_every`-th state and the final one.
    pub fn trajectory(&mut self, x: &SpectralField, t: f64, record_every: usize) -> Result<Trajectory> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid("t", format!("must be nonnegative, got {t}")));
        }
        self.params.lattice.ensure_same(x.lattice())?;
        ensure_solenoidal(x)?;
        let mut traj = Trajectory::new(0.0, x.clone());
        if t == 0.0 {
            return Ok(traj);
        }
        let steps = (t / self.params.dt - 1e-9).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut u = x.clone();
        let every = record_every.max(1);
        for n in 1..=steps {
            self.step(&mut u, h);
            if !u.all_finite() {
                return Err(SimError::BlowUp {
                    step: n,
                    time: n as f64 * h,
                });
            }
            if n % every == 0 || n == steps {
                traj.push(if n == steps { t } else { n as f64 * h }, u.clone());
            }
        }
        if traj.len() == 1 {
            traj.push(t, u);
        }
        Ok(traj)
    }
}

/// Taylor-Green vortex `psi = cos(kx) cos(ky)` (`k = 2 pi / L`) plus
/// `eps [cos(2kx + ky) + sin(kx - 3ky)]`.
///
/// The unperturbed vortex is a steady Euler flow (`B = 0`), so its time
/// stepping error vanishes identically; the perturbation makes the flow
/// genuinely unsteady for conservation and convergence studies.
pub fn taylor_green(lattice: Lattice, eps: f64) -> SpectralField {
    SpectralField::from_stream_function(lattice, |m| {
        let mut c = Complex64::default();
        if m[0].abs() == 1 && m[1].abs() == 1 {
            c += 0.25;
        }
        if m == [2, 1] || m == [-2, -1] {
            c += 0.5 * eps;
        }
        // sin(theta) = (e^{i theta} - e^{-i theta}) / 2i
        if m == [1, -3] {
            c += Complex64::new(0.0, -0.5 * eps);
        }
        if m == [-1, 3] {
            c += Complex64::new(0.0, 0.5 * eps);
        }
        c
    })
}

/// Result of [`EulerStepper::run_monitored`].
#[derive(Debug, Clone)]
pub struct MonitoredFlow {
    pub state: SpectralField,
    /// Drifts checked after every step.
    pub report: ConservationReport,
    /// `[t, ||u||_{H^1}, ||u||_{H^{alpha+1}}, ||u||_{H^{2 alpha}}]` rows.
    pub diagnostics: Vec<[f64; 4]>,
}

impl EulerStepper {
    /// Integrates to `t` while tracking the norm drifts after every step and
    /// recording a diagnostics row every `diag_every` steps.
    pub fn run_monitored(
        &mut self,
        x: &SpectralField,
        t: f64,
        sigma: f64,
        alpha: f64,
        diag_every: usize,
    ) -> Result<MonitoredFlow> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid("t", format!("must be positive, got {t}")));
        }
        self.params.lattice.ensure_same(x.lattice())?;
        ensure_solenoidal(x)?;
        let lat = self.params.lattice;
        let monitors = [0.0, 1.0, sigma].map(|s| SobolevWeights::new(lat, s));
        let diag = [1.0, alpha + 1.0, 2.0 * alpha].map(|s| SobolevWeights::new(lat, s));
        let base = monitors.each_ref().map(|w| w.norm_sq(x).sqrt());
        let row = |u: &SpectralField, time: f64| {
            [time, diag[0].norm_sq(u).sqrt(), diag[1].norm_sq(u).sqrt(), diag[2].norm_sq(u).sqrt()]
        };
        let steps = (t / self.params.dt - 1e-9).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let every = diag_every.max(1);
        let mut u = x.clone();
        let mut drift = [0.0f64; 3];
        let mut diagnostics = vec![row(&u, 0.0)];
        for n in 1..=steps {
            self.step(&mut u, h);
            if !u.all_finite() {
                return Err(SimError::BlowUp {
                    step: n,
                    time: n as f64 * h,
                });
            }
            for i in 0..3 {
                if base[i] > 0.0 {
                    drift[i] = drift[i].max((monitors[i].norm_sq(&u).sqrt() / base[i] - 1.0).abs());
                }
            }
            if n % every == 0 || n == steps {
                diagnostics.push(row(&u, if n == steps { t } else { n as f64 * h }));
            }
        }
        Ok(MonitoredFlow {
            state: u,
            report: ConservationReport {
                samples: steps + 1,
                l2_drift: drift[0],
                h1_drift: drift[1],
                hsigma_drift: drift[2],
                sigma,
            },
            diagnostics,
        })
    }
}

/// Conserved-norm drift at several step sizes and the fitted power law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementFit {
    pub dts: Vec<f64>,
    pub drifts: Vec<f64>,
    /// Least-squares slope of `log drift` against `log dt`.
    pub exponent: f64,
}

pub fn refinement_fit(x: &SpectralField, t: f64, params: &EulerParams, dts: &[f64]) -> Result<RefinementFit> {
    if dts.len() < 2 {
        return Err(invalid("dts", "need at least two step sizes"));
    }
    let drifts = dts
        .iter()
        .map(|&dt| {
            let p = EulerParams { dt, ..*params };
            Ok(EulerStepper::new(p)?.run_monitored(x, t, 0.0, 1.0, usize::MAX)?.report.conserved_drift())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RefinementFit {
        dts: dts.to_vec(),
        exponent: log_log_slope(dts, &drifts),
        drifts,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `Phi(t, x)`.
pub fn euler_flow(x: &SpectralField, t: f64, params: &EulerParams) -> Result<SpectralField> {
    EulerStepper::new(*params)?.flow(x, t)
}

/// Maximal relative drifts of the monitored norms along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub samples: usize,
    /// `max_t | ||u(t)|| / ||u(0)|| - 1 |`
    pub l2_drift: f64,
    /// Same for `||u||_{H^1}`.
    pub h1_drift: f64,
    /// Same for `||u||_{H^sigma}`; not a conserved quantity, reported for context.
    pub hsigma_drift: f64,
    pub sigma: f64,
}

impl ConservationReport {
    /// The larger of the two conserved-norm drifts.
    pub fn conserved_drift(&self) -> f64 {
        self.l2_drift.max(self.h1_drift)
    }
}

pub fn conservation_report(traj: &Trajectory, sigma: f64) -> ConservationReport {
    let Some(first) = traj.states.first() else {
        return ConservationReport {
            samples: 0,
            l2_drift: 0.0,
            h1_drift: 0.0,
            hsigma_drift: 0.0,
            sigma,
        };
    };
    let lat = *first.lattice();
    let weights = [0.0, 1.0, sigma].map(|s| SobolevWeights::new(lat, s));
    let base = weights.each_ref().map(|w| w.norm_sq(first).sqrt());
    let mut drift = [0.0f64; 3];
    for x in &traj.states[1..] {
        for i in 0..3 {
            if base[i] > 0.0 {
                drift[i] = drift[i].max((weights[i].norm_sq(x).sqrt() / base[i] - 1.0).abs());
            }
        }
    }
    ConservationReport {
        samples: traj.len(),
        l2_drift: drift[0],
        h1_drift: drift[1],
        hsigma_drift: drift[2],
        sigma,
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::stochastic::RngStream;

    fn params(scheme: EulerScheme) -> EulerParams {
        EulerParams::new(0.01, Lattice::new(16, 2.0 * PI).unwrap(), scheme).unwrap()
    }

    fn datum(p: &EulerParams) -> SpectralField {
        SpectralField::random_solenoidal(p.lattice, 4, 1.0, &mut RngStream::new(3, 0))
    }

    #[test]
    fn zero_time_is_identity_bitwise() {
        let p = params(EulerScheme::Rk4);
        let x = datum(&p);
        assert_eq!(euler_flow(&x, 0.0, &p).unwrap(), x);
    }

    #[test]
    fn lone_mode_is_steady() {
        let p = params(EulerScheme::Rk4);
        let x = SpectralField::from_stream_function(p.lattice, |m| match m {
            [2, 1] => Complex64::new(0.5, 0.1),
            [-2, -1] => Complex64::new(0.5, -0.1),
            _ => Complex64::default(),
        });
        let y = euler_flow(&x, 3.0, &p).unwrap();
        let d = y.max_abs_diff(&x);
        assert!(d < 1e-13 * x.max_abs(), "lone mode moved by {d:e}");
    }

    #[test]
    fn flow_keeps_structure() {
        let p = params(EulerScheme::Rk4);
        let y = euler_flow(&datum(&p), 1.0, &p).unwrap();
        assert!(y.is_solenoidal(1e-13));
        assert!(y.is_real(1e-13));
    }

    #[test]
    fn semiflow_on_aligned_grid() {
        let p = params(EulerScheme::Rk4);
        let x = datum(&p);
        let a = euler_flow(&euler_flow(&x, 0.3, &p).unwrap(), 0.2, &p).unwrap();
        let b = euler_flow(&x, 0.5, &p).unwrap();
        assert!((&a - &b).sobolev_norm(1.0) < 1e-12 * x.sobolev_norm(1.0));
    }

    #[test]
    fn rk4_conserves_better_than_midpoint() {
        let rk = params(EulerScheme::Rk4);
        let mid = params(EulerScheme::Midpoint);
        let x = datum(&rk);
        let a = EulerStepper::new(rk).unwrap().trajectory(&x, 2.0, 10).unwrap();
        let b = EulerStepper::new(mid).unwrap().trajectory(&x, 2.0, 10).unwrap();
        let (ra, rb) = (conservation_report(&a, 3.0), conservation_report(&b, 3.0));
        assert!(ra.conserved_drift() <= rb.conserved_drift(), "{ra:?} vs {rb:?}");
        assert!(ra.conserved_drift() < 0.1 * rb.conserved_drift(), "{ra:?}");
    }

    #[test]
    fn constant_trajectory_has_no_drift() {
        let p = params(EulerScheme::Rk4);
        let x = datum(&p);
        let mut t = Trajectory::new(0.0, x.clone());
        t.push(1.0, x.clone());
        t.push(2.0, x);
        let r = conservation_report(&t, 3.0);
        assert_eq!((r.l2_drift, r.h1_drift, r.hsigma_drift), (0.0, 0.0, 0.0));
    }

    #[test]
    fn taylor_green_is_steady_only_unperturbed() {
        let p = params(EulerScheme::Rk4);
        let tg = taylor_green(p.lattice, 0.0);
        assert!(tg.is_real(0.0) && tg.is_solenoidal(0.0));
        let mut nl = Nonlinearity::new(p.lattice, p.dealias);
        assert!(nl.quadratic(&tg).unwrap().max_abs() < 1e-15);
        let pert = taylor_green(p.lattice, 0.1);
        assert!(pert.is_real(0.0));
        assert!(nl.quadratic(&pert).unwrap().max_abs() > 1e-3);
    }

    #[test]
    fn monitored_run_matches_stored_trajectory() {
        let p = params(EulerScheme::Rk4);
        let x = datum(&p);
        let stored = EulerStepper::new(p).unwrap().trajectory(&x, 1.0, 1).unwrap();
        let mon = EulerStepper::new(p).unwrap().run_monitored(&x, 1.0, 3.0, 2.0, 10).unwrap();
        assert_eq!(&mon.state, stored.last());
        assert_eq!(mon.report, conservation_report(&stored, 3.0));
        assert_eq!(mon.diagnostics.len(), 11);
    }

    #[test]
    fn slope_of_a_power_law() {
        let x = [0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(4)).collect();
        assert!((log_log_slope(&x, &y) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("rk4".parse::<EulerScheme>().unwrap(), EulerScheme::Rk4);
        assert!("euler".parse::<EulerScheme>().is_err());
        assert!(EulerParams::new(0.0, Lattice::new(8, 1.0).unwrap(), EulerScheme::Rk4).is_err());
    }
}
