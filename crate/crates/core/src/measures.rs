//! Stationary sampling by burn-in plus time averaging, moment estimation
//! against the exact stationary identities, the sweep over decreasing `nu`,
//! and the pushforward test of sampled ensembles under the Euler flow.
//!
//! Standard errors come from batch means: each replica's averaging window is
//! cut into equal batches much longer than the slowest relaxation time, and
//! the batch means of all replicas are treated as independent samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::euler::{EulerParams, EulerStepper};
use crate::solver::{HnsStepper, SolverParams};
use crate::spectral::{SobolevWeights, SpectralField};
use crate::stochastic::{ModeNoise, RngStream};

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Mean and standard error of the mean of `samples`, treated as independent.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                value: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self {
                value: mean,
                stderr: 0.0,
            };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self {
            value: mean,
            stderr: (var / n as f64).sqrt(),
        }
    }

    /// `|a - b| / sqrt(se_a^2 + se_b^2)`; zero when both agree exactly.
    pub fn standardized_difference(&self, other: &Estimate) -> f64 {
        let diff = (self.value - other.value).abs();
        if diff == 0.0 {
            return 0.0;
        }
        diff / self.stderr.hypot(other.stderr)
    }
}

/// How a stationary run is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Discarded transient, in time units.
    pub burn_in: f64,
    /// Averaging window after the burn-in, in time units.
    pub horizon: f64,
    pub n_replicas: usize,
    /// `beta = f / (2 C_alpha)` for each fraction `f` in `(0, 1)`.
    pub beta_fractions: Vec<f64>,
    /// Batches per replica for the batch-means standard error.
    pub batches: usize,
    /// Cadence (time units) of snapshot candidates kept after the burn-in.
    pub snapshot_every: Option<f64>,
    /// Cadence (time units) of `t,h1,ha1,h2a` rows recorded from replica 0.
    pub diagnostics_every: Option<f64>,
}

impl SamplingPlan {
    pub fn new(burn_in: f64, horizon: f64, n_replicas: usize) -> Self {
        Self {
            burn_in,
            horizon,
            n_replicas,
            beta_fractions: vec![0.1, 0.25, 0.4],
            batches: 32,
            snapshot_every: None,
            diagnostics_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(invalid("burn_in", format!("must be nonnegative, got {}", self.burn_in)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if self.n_replicas == 0 {
            return Err(invalid("n_replicas", "must be at least 1"));
        }
        if self.batches < 2 {
            return Err(invalid("batches", "must be at least 2"));
        }
        if let Some(f) = self.beta_fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(invalid("beta_fractions", format!("{f} is outside (0, 1)")));
        }
        for (name, v) in [("snapshot_every", self.snapshot_every), ("diagnostics_every", self.diagnostics_every)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(name, format!("must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Burn-in of 20 relaxation times of the slowest forced mode.
pub fn default_burn_in(nu: f64, alpha: f64, noise: &ModeNoise) -> f64 {
    20.0 / (nu * slowest_forced_rate(alpha, noise))
}

/// `min lambda_k = (1 + |k|^2)^alpha` over modes with nonzero forcing (1 if none).
pub fn slowest_forced_rate(alpha: f64, noise: &ModeNoise) -> f64 {
    let lat = noise.lattice();
    noise
        .sigma()
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > 0.0)
        .map(|(idx, _)| (1.0 + lat.k_squared(idx)).powf(alpha))
        .fold(f64::INFINITY, f64::min)
        .min(f64::MAX)
        .max(1.0)
}

/// Stationary moment surrogates of one `(nu, alpha)` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub nu: f64,
    pub alpha: f64,
    pub dt: f64,
    pub horizon: f64,
    pub burn_in: f64,
    pub n_replicas: usize,
    /// Indices of replicas that blew up (excluded from the averages).
    pub failed_replicas: Vec<usize>,
    /// Time-ensemble average of `||X||^2_{H^{alpha+1}}`.
    pub m2_ha1: Estimate,
    /// Averages of `||X||^{2n}_{H^1}` for `n = 1, 2, 3`.
    pub m2n_h1: [Estimate; 3],
    /// `(beta, average of exp(beta ||X||^2_{H^{alpha+1}}))`.
    pub exp_moment: Vec<(f64, Estimate)>,
    /// Per-replica time averages of `||X||^2_{H^{alpha+1}}`.
    pub replica_m2_ha1: Vec<Estimate>,
    /// `Tr[Q_1] / 2` of the configured noise.
    pub c_alpha_target: f64,
    /// Integrated autocorrelation time of `||X||^2_{H^1}` (time units).
    pub autocorr_time_h1: f64,
}

impl MomentReport {
    pub fn is_valid(&self) -> bool {
        self.failed_replicas.len() * 10 <= self.n_replicas
            && self.m2_ha1.value.is_finite()
            && self.m2n_h1.iter().all(|e| e.value.is_finite())
    }

    /// Two halves of the replica set agree on `m2_ha1` within `k` pooled standard errors.
    pub fn groups_agree(&self, k: f64) -> Option<bool> {
        let n = self.replica_m2_ha1.len();
        if n < 4 {
            return None;
        }
        let pool = |rs: &[Estimate]| {
            let m = rs.len() as f64;
            Estimate {
                value: rs.iter().map(|e| e.value).sum::<f64>() / m,
                stderr: rs.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt() / m,
            }
        };
        let (a, b) = self.replica_m2_ha1.split_at(n / 2);
        Some(pool(a).standardized_difference(&pool(b)) <= k)
    }
}

/// Output of [`run_stationary`]: the report plus optional by-products.
#[derive(Debug, Clone)]
pub struct StationaryRun {
    pub report: MomentReport,
    /// Snapshots spaced at least five autocorrelation times apart.
    pub snapshots: Vec<SpectralField>,
    /// `(replica, step)` of each snapshot, counting steps from `X_0`.
    pub snapshot_origin: Vec<(usize, u64)>,
    /// `[t, ||X||_{H^1}, ||X||_{H^{alpha+1}}, ||X||_{H^{2 alpha}}]` from replica 0.
    pub diagnostics: Vec<[f64; 4]>,
}

struct ReplicaOutput {
    /// Batch means, `functionals x batches`.
    batch_means: Vec<Vec<f64>>,
    h1_series: Vec<f64>,
    snapshots: Vec<(u64, SpectralField)>,
    diagnostics: Vec<[f64; 4]>,
}

fn steps_for(t: f64, dt: f64) -> usize {
    (t / dt - 1e-9).ceil().max(0.0) as usize
}

/// Stream id of replica `r` of sweep point `point`.
pub fn stream_id(point: u64, replica: u64) -> u64 {
    (point << 32) | replica
}

/// Burn-in and time averaging of `||X||^2_{H^{alpha+1}}`, `||X||^{2n}_{H^1}`
/// and the exponential moments, starting from `X_0 = 0`, pooled over replicas.
///
/// Replica `r` draws from stream `stream_id(point, r)` of `seed`; results do not
/// depend on how replicas are scheduled.
pub fn run_stationary(
    params: &SolverParams,
    noise: &ModeNoise,
    plan: &SamplingPlan,
    seed: u64,
    point: u64,
) -> Result<StationaryRun> {
    params.validate()?;
    plan.validate()?;
    let c_alpha = noise.trace_in_sobolev(1.0) / 2.0;
    let betas: Vec<f64> = if c_alpha > 0.0 {
        plan.beta_fractions.iter().map(|f| f / (2.0 * c_alpha)).collect()
    } else {
        vec![0.0; plan.beta_fractions.len()]
    };
    let outputs: Vec<std::result::Result<ReplicaOutput, SimError>> = (0..plan.n_replicas)
        .into_par_iter()
        .map(|r| {
            run_replica(
                params,
                noise,
                plan,
                &betas,
                RngStream::new(seed, stream_id(point, r as u64)),
                r == 0,
            )
        })
        .collect();

    let mut failed = Vec::new();
    let mut ok = Vec::new();
    for (r, out) in outputs.into_iter().enumerate() {
        match out {
            Ok(o) => ok.push((r, o)),
            Err(SimError::BlowUp { .. }) => failed.push(r),
            Err(e) => return Err(e),
        }
    }
    if failed.len() * 10 > plan.n_replicas || ok.is_empty() {
        return Err(SimError::ReplicaFailures {
            failed: failed.len(),
            total: plan.n_replicas,
        });
    }

    let functionals = 4 + betas.len();
    let pooled: Vec<Estimate> = (0..functionals)
        .map(|f| {
            let all: Vec<f64> = ok.iter().flat_map(|(_, o)| o.batch_means[f].iter().copied()).collect();
            Estimate::from_samples(&all)
        })
        .collect();
    let replica_m2_ha1 = ok.iter().map(|(_, o)| Estimate::from_samples(&o.batch_means[0])).collect();
    let probe_dt = params.dt * probe_stride(params) as f64;
    let autocorr_time_h1 = ok
        .iter()
        .map(|(_, o)| integrated_autocorr_time(&o.h1_series) * probe_dt)
        .fold(0.0, f64::max);
    let diagnostics = ok.first().map(|(_, o)| o.diagnostics.clone()).unwrap_or_default();

    let mut snapshots = Vec::new();
    let mut snapshot_origin = Vec::new();
    if let Some(every) = plan.snapshot_every {
        let stride = ((5.0 * autocorr_time_h1 / every).ceil() as usize).max(1);
        for (r, o) in &ok {
            for (step, x) in o.snapshots.iter().step_by(stride) {
                snapshot_origin.push((*r, *step));
                snapshots.push(x.clone());
            }
        }
    }

    let horizon_steps = horizon_steps(params, plan);
    let report = MomentReport {
        nu: params.nu,
        alpha: params.alpha,
        dt: params.dt,
        horizon: horizon_steps as f64 * params.dt,
        burn_in: steps_for(plan.burn_in, params.dt) as f64 * params.dt,
        n_replicas: plan.n_replicas,
        failed_replicas: failed,
        m2_ha1: pooled[0],
        m2n_h1: [pooled[1], pooled[2], pooled[3]],
        exp_moment: betas.iter().copied().zip(pooled[4..].iter().copied()).collect(),
        replica_m2_ha1,
        c_alpha_target: c_alpha,
        autocorr_time_h1,
    };
    Ok(StationaryRun {
        report,
        snapshots,
        snapshot_origin,
        diagnostics,
    })
}

/// Averaging window rounded up to a whole number of equal batches.
fn horizon_steps(params: &SolverParams, plan: &SamplingPlan) -> usize {
    let raw = steps_for(plan.horizon, params.dt).max(plan.batches);
    raw.div_ceil(plan.batches) * plan.batches
}

/// `||X||^2_{H^1}` is recorded every this many steps for the autocorrelation estimate.
fn probe_stride(params: &SolverParams) -> usize {
    // about ten probes per relaxation time of the fastest-mixing mode of interest
    ((0.1 / params.dt).floor() as usize).max(1)
}

fn run_replica(
    params: &SolverParams,
    noise: &ModeNoise,
    plan: &SamplingPlan,
    betas: &[f64],
    rng: RngStream,
    record_diagnostics: bool,
) -> Result<ReplicaOutput> {
    let lat = params.lattice;
    let w_h1 = SobolevWeights::new(lat, 1.0);
    let w_ha1 = SobolevWeights::new(lat, params.alpha + 1.0);
    let w_h2a = SobolevWeights::new(lat, 2.0 * params.alpha);
    let burn = steps_for(plan.burn_in, params.dt);
    let total = horizon_steps(params, plan);
    let batch_len = total / plan.batches;
    let stride = probe_stride(params);
    let snap_stride = plan.snapshot_every.map(|e| steps_for(e, params.dt).max(1));
    let diag_stride = plan
        .diagnostics_every
        .filter(|_| record_diagnostics)
        .map(|e| steps_for(e, params.dt).max(1));

    let mut stepper = HnsStepper::new(*params, noise, rng)?;
    let mut x = SpectralField::zeros(lat);
    let mut out = ReplicaOutput {
        batch_means: vec![Vec::with_capacity(plan.batches); 4 + betas.len()],
        h1_series: Vec::with_capacity(total / stride + 1),
        snapshots: Vec::new(),
        diagnostics: Vec::new(),
    };
    let record_diag = |out: &mut ReplicaOutput, x: &SpectralField, step: usize| {
        out.diagnostics.push([
            step as f64 * params.dt,
            w_h1.norm_sq(x).sqrt(),
            w_ha1.norm_sq(x).sqrt(),
            w_h2a.norm_sq(x).sqrt(),
        ]);
    };
    if diag_stride.is_some() {
        record_diag(&mut out, &x, 0);
    }
    let mut sums = vec![0.0; 4 + betas.len()];
    for n in 1..=burn + total {
        stepper.step(&mut x)?;
        if let Some(d) = diag_stride {
            if n % d == 0 {
                record_diag(&mut out, &x, n);
            }
        }
        if n <= burn {
            continue;
        }
        let m = n - burn;
        let ha1 = w_ha1.norm_sq(&x);
        let h1 = w_h1.norm_sq(&x);
        sums[0] += ha1;
        sums[1] += h1;
        sums[2] += h1 * h1;
        sums[3] += h1 * h1 * h1;
        for (s, b) in sums[4..].iter_mut().zip(betas) {
            *s += (b * ha1).exp();
        }
        if m % stride == 0 {
            out.h1_series.push(h1);
        }
        if let Some(s) = snap_stride {
            if m % s == 0 {
                out.snapshots.push((n as u64, x.clone()));
            }
        }
        if m % batch_len == 0 {
            for (acc, s) in out.batch_means.iter_mut().zip(sums.iter_mut()) {
                acc.push(*s / batch_len as f64);
                *s = 0.0;
            }
        }
    }
    Ok(out)
}

/// Integrated autocorrelation time in units of the sampling interval, with
/// the self-consistent truncation window `M >= 6 tau`.
pub fn integrated_autocorr_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return 0.5;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for lag in 1..n / 2 {
        let c = centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        tau += c / c0;
        if lag as f64 >= 6.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// `|m2_ha1 - Tr[Q_1]/2| / (Tr[Q_1]/2)`.
pub fn energy_balance_residual(report: &MomentReport, noise: &ModeNoise) -> Result<f64> {
    let target = noise.trace_in_sobolev(1.0) / 2.0;
    if target == 0.0 {
        return Err(SimError::ZeroTrace);
    }
    Ok((report.m2_ha1.value - target).abs() / target)
}

/// One side of a moment inequality, checked with Monte-Carlo slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub label: String,
    pub value: f64,
    pub stderr: f64,
    pub bound: f64,
    /// `bound - (value - slack * stderr)`; nonnegative iff the check passes.
    pub margin: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(label: String, est: Estimate, bound: f64, slack: f64) -> Self {
        let margin = bound - (est.value - slack * est.stderr);
        Self {
            label,
            value: est.value,
            stderr: est.stderr,
            bound,
            margin,
            pass: margin >= 0.0,
        }
    }
}

/// Standard errors of slack granted to empirical moments in bound checks.
pub const BOUND_SLACK: f64 = 3.0;

fn double_factorial_odd(n: u32) -> f64 {
    (1..=n).map(|k| (2 * k - 1) as f64).product()
}

/// `E||X||^{2n}_{H^1} <= (2n-1)!! C_alpha^n` for `n = 1, 2, 3`.
pub fn check_factorial_bound(report: &MomentReport) -> Vec<BoundCheck> {
    (1..=3u32)
        .map(|n| {
            let bound = double_factorial_odd(n) * report.c_alpha_target.powi(n as i32);
            BoundCheck::new(format!("m2n_h1[n={n}]"), report.m2n_h1[n as usize - 1], bound, BOUND_SLACK)
        })
        .collect()
}

/// `2 exp(2 beta C / (1 - 2 beta C))`, defined for `2 beta C < 1`.
pub fn exp_moment_bound(beta: f64, c_alpha: f64) -> Result<f64> {
    let x = 2.0 * beta * c_alpha;
    if !(beta >= 0.0) || x >= 1.0 {
        return Err(SimError::InadmissibleBeta {
            beta,
            limit: 1.0 / (2.0 * c_alpha),
        });
    }
    Ok(2.0 * (x / (1.0 - x)).exp())
}

/// `E exp(beta ||X||^2_{H^{alpha+1}}) <= 2 exp(2 beta C / (1 - 2 beta C))` on each
/// `beta` of `betas`, which must belong to the report's grid.
pub fn check_exp_bound(report: &MomentReport, betas: &[f64]) -> Result<Vec<BoundCheck>> {
    betas
        .iter()
        .map(|&beta| {
            let bound = exp_moment_bound(beta, report.c_alpha_target)?;
            let est = report
                .exp_moment
                .iter()
                .find(|(b, _)| (b - beta).abs() <= 1e-12 * beta.abs().max(1e-300))
                .map(|(_, e)| *e)
                .ok_or_else(|| invalid("beta", format!("{beta} was not sampled by this report")))?;
            Ok(BoundCheck::new(format!("exp_moment[beta={beta}]"), est, bound, BOUND_SLACK))
        })
        .collect()
}

/// Pairwise `nu`-independence of `m2_ha1`: `(i, j, standardized difference)`.
pub fn nu_independence(reports: &[MomentReport]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            out.push((i, j, reports[i].m2_ha1.standardized_difference(&reports[j].m2_ha1)));
        }
    }
    out
}

/// Moment drift under the Euler flow for one pushforward time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceRow {
    pub t: f64,
    pub quantity: String,
    pub before: Estimate,
    pub after: Estimate,
    /// `|after - before| / pooled standard error`.
    pub standardized_drift: f64,
}

/// Minimum number of decorrelated snapshots for the invariance test.
pub const MIN_INVARIANCE_ENSEMBLE: usize = 30;

/// Pushes every snapshot through `Phi_t` for each `t` and compares the sample
/// moments `(m2_h1, m2_ha1, m4_h1)` before and after.
pub fn euler_invariance_test(
    ensemble: &[SpectralField],
    t_list: &[f64],
    euler: &EulerParams,
    alpha: f64,
) -> Result<Vec<InvarianceRow>> {
    if ensemble.len() < MIN_INVARIANCE_ENSEMBLE {
        return Err(SimError::EnsembleTooSmall {
            got: ensemble.len(),
            need: MIN_INVARIANCE_ENSEMBLE,
        });
    }
    let lat = euler.lattice;
    let w_h1 = SobolevWeights::new(lat, 1.0);
    let w_ha1 = SobolevWeights::new(lat, alpha + 1.0);
    let moments = |fields: &[SpectralField]| -> [Estimate; 3] {
        let h1: Vec<f64> = fields.iter().map(|x| w_h1.norm_sq(x)).collect();
        let ha1: Vec<f64> = fields.iter().map(|x| w_ha1.norm_sq(x)).collect();
        let h1_sq: Vec<f64> = h1.iter().map(|v| v * v).collect();
        [
            Estimate::from_samples(&h1),
            Estimate::from_samples(&ha1),
            Estimate::from_samples(&h1_sq),
        ]
    };
    let before = moments(ensemble);
    let mut rows = Vec::new();
    for &t in t_list {
        let pushed: Vec<SpectralField> = ensemble
            .par_iter()
            .map(|x| EulerStepper::new(*euler)?.flow(x, t))
            .collect::<Result<_>>()?;
        let after = moments(&pushed);
        for (q, name) in ["m2_h1", "m2_ha1", "m4_h1"].iter().enumerate() {
            rows.push(InvarianceRow {
                t,
                quantity: name.to_string(),
                before: before[q],
                after: after[q],
                standardized_drift: before[q].standardized_difference(&after[q]),
            });
        }
    }
    Ok(rows)
}

/// Sampling settings shared by all points of a sweep; the horizon and burn-in
/// given here apply to the first (largest) `nu` and scale as `nu_0 / nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub sampling: SamplingPlan,
    /// Pushforward times for the invariance test on the smallest `nu`.
    pub t_list: Vec<f64>,
    pub euler: Option<EulerParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub nu_list: Vec<f64>,
    pub reports: Vec<MomentReport>,
    /// Drift table of the smallest-`nu` ensemble under the Euler flow.
    pub euler_invariance: Vec<InvarianceRow>,
    pub invariance_ensemble_size: usize,
}

pub fn check_nu_list(nu_list: &[f64]) -> Result<()> {
    if nu_list.is_empty() {
        return Err(invalid("nu_list", "must not be empty"));
    }
    if nu_list.iter().any(|nu| !(*nu > 0.0 && nu.is_finite())) {
        return Err(invalid("nu_list", "entries must be positive"));
    }
    if nu_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("nu_list", "must be strictly decreasing"));
    }
    Ok(())
}

/// Stationary run of sweep point `j` of `nu_list`: the horizon and burn-in of
/// `plan` are scaled by `nu_0 / nu_j`, the point draws from stream group `j`,
/// and only the last point keeps snapshots (when `plan.euler` is set).
pub fn sweep_point(
    j: usize,
    nu_list: &[f64],
    base: &SolverParams,
    noise: &ModeNoise,
    plan: &SweepPlan,
    seed: u64,
) -> Result<StationaryRun> {
    check_nu_list(nu_list)?;
    let nu = *nu_list
        .get(j)
        .ok_or_else(|| invalid("j", format!("sweep has {} points", nu_list.len())))?;
    let params = SolverParams { nu, ..*base };
    let mut sampling = plan.sampling.clone();
    let scale = nu_list[0] / nu;
    sampling.horizon *= scale;
    sampling.burn_in *= scale;
    if !(j + 1 == nu_list.len() && plan.euler.is_some()) {
        sampling.snapshot_every = None;
    }
    run_stationary(&params, noise, &sampling, seed, j as u64)
}

/// Assembles the sweep result from per-point runs, testing Euler invariance of
/// the last (smallest-`nu`) ensemble when `plan.euler` is set.
pub fn finish_sweep(nu_list: &[f64], reports: Vec<MomentReport>, last_snapshots: &[SpectralField], alpha: f64, plan: &SweepPlan) -> Result<SweepResult> {
    let mut euler_invariance = Vec::new();
    let mut invariance_ensemble_size = 0;
    if let Some(euler) = &plan.euler {
        invariance_ensemble_size = last_snapshots.len();
        euler_invariance = euler_invariance_test(last_snapshots, &plan.t_list, euler, alpha)?;
    }
    Ok(SweepResult {
        nu_list: nu_list.to_vec(),
        reports,
        euler_invariance,
        invariance_ensemble_size,
    })
}

/// Runs [`sweep_point`] at each `nu` and then [`finish_sweep`].
pub fn inviscid_sweep(
    nu_list: &[f64],
    base: &SolverParams,
    noise: &ModeNoise,
    plan: &SweepPlan,
    seed: u64,
) -> Result<(SweepResult, Vec<StationaryRun>)> {
    check_nu_list(nu_list)?;
    let runs = (0..nu_list.len())
        .map(|j| sweep_point(j, nu_list, base, noise, plan, seed))
        .collect::<Result<Vec<_>>>()?;
    let reports = runs.iter().map(|r| r.report.clone()).collect();
    let last = &runs.last().expect("nonempty").snapshots;
    let result = finish_sweep(nu_list, reports, last, base.alpha, plan)?;
    Ok((result, runs))
}
