//! Experiment configuration: a TOML document with one table per field group.
//!
//! ```toml
//! seed = 7
//! output_dir = "out"
//!
//! [lattice]
//! n = 32
//! length = 6.283185307179586
//!
//! [solver]
//! nu_list = [0.5, 0.1, 0.02]   # or `nu = 0.1`
//! alpha = 2.0
//! dt = 0.1
//!
//! [noise]
//! sigma0 = 1.0
//!
//! [sampling]
//! horizon = 8000.0
//!
//! [euler]
//! dt = 0.001
//! ```
//!
//! Every omitted field takes a documented default and is written back by
//! [`ExperimentConfig::to_canonical_toml`], so the echoed file fully
//! determines a run.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::euler::{EulerParams, EulerScheme};
use crate::measures::{check_nu_list, default_burn_in, SamplingPlan};
use crate::nonlinearity::DealiasRule;
use crate::solver::SolverParams;
use crate::spectral::Lattice;
use crate::stochastic::{ActiveSet, ModeNoise, NoiseSpec};

/// Every problem found in a configuration, not just the first.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub n: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_list: Option<Vec<f64>>,
    pub alpha: f64,
    pub dt: f64,
    pub picard_sweeps: usize,
    pub nonlinear: bool,
    pub dealias_fraction: f64,
    /// Constant `c` of the step heuristic `dt <= c / (max|u| k_max)`.
    pub cfl_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma0: f64,
    pub decay_exponent: f64,
    pub active_set: ActiveSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Burn-in for the first (largest) `nu`; scaled by `nu_0 / nu` in sweeps.
    pub burn_in: f64,
    /// Averaging window for the first `nu`; scaled like `burn_in`.
    pub horizon: f64,
    pub n_replicas: usize,
    pub batches: usize,
    /// Cadence of snapshot candidates (time units).
    pub snapshot_every: f64,
    /// Cadence of diagnostics rows (time units).
    pub diagnostics_every: f64,
    pub beta_fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerConfig {
    pub dt: f64,
    pub scheme: EulerScheme,
    /// Pushforward times of the invariance test.
    pub t_list: Vec<f64>,
    /// Integration time of `euler-check`.
    pub horizon: f64,
    /// Amplitude of the perturbation added to the Taylor-Green datum.
    pub perturbation: f64,
    /// Step sizes of the conservation self-refinement fit.
    pub refinement_dts: Vec<f64>,
    /// Sobolev index of the non-conserved diagnostic norm.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub lattice: LatticeConfig,
    pub solver: SolverConfig,
    pub noise: NoiseConfig,
    pub sampling: SamplingConfig,
    pub euler: EulerConfig,
    /// Non-fatal findings (e.g. a time step above the CFL heuristic).
    #[serde(skip)]
    pub warnings: Vec<String>,
}

// Raw mirror with every field optional, so that all violations can be listed.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    lattice: Option<RawLattice>,
    solver: Option<RawSolver>,
    noise: Option<RawNoise>,
    sampling: Option<RawSampling>,
    euler: Option<RawEuler>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLattice {
    n: Option<usize>,
    length: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    nu: Option<f64>,
    nu_list: Option<Vec<f64>>,
    alpha: Option<f64>,
    dt: Option<f64>,
    picard_sweeps: Option<usize>,
    nonlinear: Option<bool>,
    dealias_fraction: Option<f64>,
    cfl_constant: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    sigma0: Option<f64>,
    decay_exponent: Option<f64>,
    active_set: Option<ActiveSet>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    burn_in: Option<f64>,
    horizon: Option<f64>,
    n_replicas: Option<usize>,
    batches: Option<usize>,
    snapshot_every: Option<f64>,
    diagnostics_every: Option<f64>,
    beta_fractions: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEuler {
    dt: Option<f64>,
    scheme: Option<EulerScheme>,
    t_list: Option<Vec<f64>>,
    horizon: Option<f64>,
    perturbation: Option<f64>,
    refinement_dts: Option<Vec<f64>>,
    sigma: Option<f64>,
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses and validates a configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().trim().to_string();
        let v = match e.span() {
            Some(span) => {
                let (line, column) = line_column(text, span.start);
                format!("syntax error at line {line}, column {column}: {msg}")
            }
            None => format!("syntax error: {msg}"),
        };
        ConfigError { violations: vec![v] }
    })?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let mut v = Vec::new();
    let mut warnings = Vec::new();
    let rl = raw.lattice.unwrap_or_default();
    let rs = raw.solver.unwrap_or_default();
    let rn = raw.noise.unwrap_or_default();
    let rp = raw.sampling.unwrap_or_default();
    let re = raw.euler.unwrap_or_default();

    let lattice_cfg = LatticeConfig {
        n: rl.n.unwrap_or(32),
        length: rl.length.unwrap_or(2.0 * PI),
    };
    let lattice = match Lattice::new(lattice_cfg.n, lattice_cfg.length) {
        Ok(l) => Some(l),
        Err(e) => {
            v.push(format!("lattice: {e}"));
            None
        }
    };

    let alpha = rs.alpha.unwrap_or(2.0);
    if !(alpha > 1.0 && alpha.is_finite()) {
        v.push(format!("solver.alpha must exceed 1, got {alpha}"));
    }
    let (nu, nu_list) = match (rs.nu, rs.nu_list) {
        (Some(_), Some(_)) => {
            v.push("solver: give either nu or nu_list, not both".into());
            (None, None)
        }
        (None, None) => (Some(0.1), None),
        pair => pair,
    };
    if let Some(nu) = nu {
        if !(nu > 0.0 && nu.is_finite()) {
            v.push(format!("solver.nu must be positive, got {nu}"));
        }
    }
    if let Some(list) = &nu_list {
        if let Err(e) = check_nu_list(list) {
            v.push(match e {
                crate::SimError::InvalidParameter { reason, .. } => format!("nu_list {reason}"),
                other => other.to_string(),
            });
        }
    }
    let dt = rs.dt.unwrap_or(0.1);
    if !(dt > 0.0 && dt.is_finite()) {
        v.push(format!("solver.dt must be positive, got {dt}"));
    }
    let dealias_fraction = rs.dealias_fraction.unwrap_or(2.0 / 3.0);
    let rule = match DealiasRule::new(dealias_fraction) {
        Ok(r) => Some(r),
        Err(e) => {
            v.push(format!("solver.dealias_fraction: {e}"));
            None
        }
    };
    let cfl_constant = rs.cfl_constant.unwrap_or(0.5);
    if !(cfl_constant > 0.0 && cfl_constant.is_finite()) {
        v.push(format!("solver.cfl_constant must be positive, got {cfl_constant}"));
    }
    let first_nu = nu.or_else(|| nu_list.as_ref().and_then(|l| l.first().copied()));
    let solver = SolverConfig {
        nu,
        nu_list,
        alpha,
        dt,
        picard_sweeps: rs.picard_sweeps.unwrap_or(1),
        nonlinear: rs.nonlinear.unwrap_or(true),
        dealias_fraction,
        cfl_constant,
    };

    let noise = NoiseConfig {
        sigma0: rn.sigma0.unwrap_or(1.0),
        decay_exponent: rn.decay_exponent.unwrap_or(2.0 * alpha + 2.0),
        active_set: rn.active_set.unwrap_or(ActiveSet::All),
    };
    let mode_noise = match (lattice, rule) {
        (Some(l), Some(r)) => match noise_spec(&noise).resolve(l, r) {
            Ok(m) => Some(m),
            Err(e) => {
                v.push(format!("noise: {e}"));
                None
            }
        },
        _ => None,
    };

    let burn_in = match rp.burn_in {
        Some(b) => b,
        None => match (first_nu, &mode_noise) {
            (Some(nu), Some(m)) if nu > 0.0 && alpha > 1.0 => default_burn_in(nu, alpha, m),
            _ => 0.0,
        },
    };
    let sampling = SamplingConfig {
        burn_in,
        horizon: rp.horizon.unwrap_or(200.0),
        n_replicas: rp.n_replicas.unwrap_or(1),
        batches: rp.batches.unwrap_or(32),
        snapshot_every: rp.snapshot_every.unwrap_or(10.0),
        diagnostics_every: rp.diagnostics_every.unwrap_or(1.0),
        beta_fractions: rp.beta_fractions.unwrap_or_else(|| vec![0.1, 0.25, 0.4]),
    };
    if let Err(e) = sampling_plan(&sampling).validate() {
        v.push(format!("sampling: {e}"));
    }
    for f in &sampling.beta_fractions {
        if *f >= 1.0 {
            v.push(format!(
                "sampling.beta_fractions: {f} gives 2*beta*C_alpha >= 1, where the exponential bound is singular"
            ));
        }
    }

    let euler = EulerConfig {
        dt: re.dt.unwrap_or(1e-3),
        scheme: re.scheme.unwrap_or_default(),
        t_list: re.t_list.unwrap_or_else(|| vec![1.0, 5.0]),
        horizon: re.horizon.unwrap_or(10.0),
        perturbation: re.perturbation.unwrap_or(0.1),
        refinement_dts: re.refinement_dts.unwrap_or_else(|| vec![0.01, 0.005, 0.0025]),
        sigma: re.sigma.unwrap_or(alpha + 1.0),
    };
    if !(euler.dt > 0.0 && euler.dt.is_finite()) {
        v.push(format!("euler.dt must be positive, got {}", euler.dt));
    }
    if euler.t_list.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        v.push("euler.t_list entries must be nonnegative".into());
    }
    if !(euler.horizon > 0.0 && euler.horizon.is_finite()) {
        v.push(format!("euler.horizon must be positive, got {}", euler.horizon));
    }
    if !euler.perturbation.is_finite() {
        v.push("euler.perturbation must be finite".into());
    }
    if euler.refinement_dts.len() < 2 || euler.refinement_dts.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        v.push("euler.refinement_dts needs at least two positive step sizes".into());
    }

    // time step against the advective heuristic, using a 3-sigma stationary speed
    if let (Some(l), Some(r), Some(m)) = (lattice, rule, &mode_noise) {
        if alpha > 1.0 {
            let speed = 3.0 * (m.ou_stationary_moment(alpha, 0.0) / l.volume()).sqrt();
            let k_max = r.max_mode(l.n()) as f64 * l.spacing();
            if speed > 0.0 && dt > cfl_constant / (speed * k_max) {
                warnings.push(format!(
                    "solver.dt = {dt} exceeds the advective heuristic {:.3e} (c = {cfl_constant})",
                    cfl_constant / (speed * k_max)
                ));
            }
        }
    }

    if !v.is_empty() {
        return Err(ConfigError { violations: v });
    }
    Ok(ExperimentConfig {
        seed: raw.seed.unwrap_or(0),
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("simlab-out")),
        lattice: lattice_cfg,
        solver,
        noise,
        sampling,
        euler,
        warnings,
    })
}

fn noise_spec(n: &NoiseConfig) -> NoiseSpec {
    NoiseSpec {
        sigma0: n.sigma0,
        decay_exponent: n.decay_exponent,
        active_set: n.active_set.clone(),
    }
}

fn sampling_plan(s: &SamplingConfig) -> SamplingPlan {
    SamplingPlan {
        burn_in: s.burn_in,
        horizon: s.horizon,
        n_replicas: s.n_replicas,
        beta_fractions: s.beta_fractions.clone(),
        batches: s.batches,
        snapshot_every: Some(s.snapshot_every),
        diagnostics_every: Some(s.diagnostics_every),
    }
}

impl ExperimentConfig {
    /// The fully defaulted configuration as TOML.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.lattice.n, self.lattice.length).expect("validated")
    }

    pub fn dealias(&self) -> DealiasRule {
        DealiasRule::new(self.solver.dealias_fraction).expect("validated")
    }

    /// `nu_list`, or the single `nu` as a one-element list.
    pub fn nu_list(&self) -> Vec<f64> {
        match (&self.solver.nu_list, self.solver.nu) {
            (Some(l), _) => l.clone(),
            (None, Some(nu)) => vec![nu],
            (None, None) => Vec::new(),
        }
    }

    /// Solver parameters at the first `nu`.
    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            nu: self.nu_list().first().copied().unwrap_or(f64::NAN),
            alpha: self.solver.alpha,
            dt: self.solver.dt,
            lattice: self.lattice(),
            dealias: self.dealias(),
            picard_sweeps: self.solver.picard_sweeps,
            nonlinear: self.solver.nonlinear,
        }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        noise_spec(&self.noise)
    }

    pub fn mode_noise(&self) -> ModeNoise {
        self.noise_spec().resolve(self.lattice(), self.dealias()).expect("validated")
    }

    pub fn sampling_plan(&self) -> SamplingPlan {
        sampling_plan(&self.sampling)
    }

    pub fn euler_params(&self) -> EulerParams {
        self.euler_params_with_dt(self.euler.dt)
    }

    pub fn euler_params_with_dt(&self, dt: f64) -> EulerParams {
        EulerParams {
            dt,
            lattice: self.lattice(),
            dealias: self.dealias(),
            scheme: self.euler.scheme,
        }
    }
}
