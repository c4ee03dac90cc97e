//! The four subcommands: configuration loading, the checks each one asserts,
//! and the artifacts each one writes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifacts::{csv, fmt_f64, read_manifest, sha256_hex, to_json, verified, write_atomic, ArtifactWriter, Manifest};
use crate::config::{parse_config, ExperimentConfig};
use crate::error::{Result, SimError};
use crate::euler::{refinement_fit, taylor_green, ConservationReport, EulerStepper, RefinementFit};
use crate::measures::{
    check_exp_bound, check_factorial_bound, energy_balance_residual, finish_sweep, nu_independence, run_stationary,
    stream_id, sweep_point, BoundCheck, InvarianceRow, MomentReport, StationaryRun, SweepPlan, SweepResult,
    MIN_INVARIANCE_ENSEMBLE,
};
use crate::snapshot::{read_snapshot_into, write_snapshot, SnapshotMeta};
use crate::spectral::SpectralField;
use crate::stochastic::ModeNoise;
use crate::verify::{run_identity_suite, IdentityReport};

/// Relative tolerance of the stationary energy balance in sweeps.
pub const ENERGY_BALANCE_TOL: f64 = 0.05;
/// Standard errors within which the sweep points must agree and the Euler
/// pushforward must preserve the sample moments.
pub const AGREEMENT_SIGMAS: f64 = 3.0;
/// Bound on the relative drift of the conserved Euler norms.
pub const EULER_DRIFT_TOL: f64 = 1e-8;
/// Accepted window of the fitted drift-versus-step exponent.
pub const EULER_EXPONENT_WINDOW: [f64; 2] = [3.5, 4.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Sweep,
    EulerCheck,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::EulerCheck => "euler-check",
            Command::Verify => "verify",
        }
    }
}

/// A named pass/fail statement that decides the exit status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            pass: value <= limit,
        }
    }

    fn from_bound(b: &BoundCheck) -> Self {
        Self {
            name: format!("bound {}", b.label),
            value: b.value,
            limit: b.bound,
            pass: b.pass,
        }
    }
}

/// What a command produced; the exit status is 0 iff `pass`.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: Command,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub manifest: Manifest,
}

/// Loads and validates a configuration file, then applies the `--seed` and
/// `--out` overrides (the only settings the command line may change).
pub fn load_config(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = o.to_path_buf();
    }
    Ok(cfg)
}

pub fn run_command(command: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    match command {
        Command::Simulate => cmd_simulate(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::EulerCheck => cmd_euler_check(cfg),
        Command::Verify => cmd_verify(cfg),
    }
}

/// Structured record of a failed command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorLog {
    pub command: String,
    pub kind: String,
    pub message: String,
    pub details: Vec<String>,
}

impl ErrorLog {
    pub fn new(command: &str, err: &SimError) -> Self {
        let details = match err {
            SimError::Config(c) => c.violations.clone(),
            _ => Vec::new(),
        };
        Self {
            command: command.to_string(),
            kind: error_kind(err).to_string(),
            message: err.to_string(),
            details,
        }
    }

    /// Writes `error.json` under `dir` (best effort) and returns the JSON text.
    pub fn emit(&self, dir: Option<&Path>) -> String {
        let text = to_json(self).unwrap_or_else(|_| format!("{{\"message\": {:?}}}\n", self.message));
        if let Some(d) = dir {
            let _ = write_atomic(&d.join("error.json"), text.as_bytes());
        }
        text
    }
}

fn error_kind(err: &SimError) -> &'static str {
    match err {
        SimError::InvalidLattice { .. } => "invalid_lattice",
        SimError::LatticeMismatch { .. } => "lattice_mismatch",
        SimError::NotSolenoidal { .. } => "not_solenoidal",
        SimError::InvalidParameter { .. } => "invalid_parameter",
        SimError::BlowUp { .. } => "blow_up",
        SimError::InadmissibleBeta { .. } => "inadmissible_beta",
        SimError::MissingNoisePath => "missing_noise_path",
        SimError::GridMismatch(_) => "grid_mismatch",
        SimError::EmptyEnsemble => "empty_ensemble",
        SimError::EnsembleTooSmall { .. } => "ensemble_too_small",
        SimError::ZeroTrace => "zero_trace",
        SimError::ReplicaFailures { .. } => "replica_failures",
        SimError::Config(_) => "config",
        SimError::Snapshot { .. } => "snapshot",
        SimError::Io(_) => "io",
        SimError::Json(_) => "json",
    }
}

/// Output directory with the canonical configuration echoed into it.
fn open_output(cfg: &ExperimentConfig) -> Result<(ArtifactWriter, String)> {
    let canonical = cfg.to_canonical_toml();
    let mut w = ArtifactWriter::new(&cfg.output_dir)?;
    w.write("config.toml", canonical.as_bytes())?;
    Ok((w, canonical))
}

fn finish(command: Command, w: ArtifactWriter, canonical: &str, checks: Vec<Check>) -> Result<Outcome> {
    let manifest = w.finish(command.name(), canonical)?;
    Ok(Outcome {
        command,
        pass: checks.iter().all(|c| c.pass),
        checks,
        manifest,
    })
}

fn moment_rows(r: &MomentReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut push = |q: String, v: f64, se: f64| rows.push(vec![fmt_f64(r.nu), q, fmt_f64(v), fmt_f64(se)]);
    push("m2_ha1".into(), r.m2_ha1.value, r.m2_ha1.stderr);
    for (n, e) in r.m2n_h1.iter().enumerate() {
        push(format!("m{}_h1", 2 * (n + 1)), e.value, e.stderr);
    }
    for (beta, e) in &r.exp_moment {
        push(format!("exp_beta_{}", fmt_f64(*beta)), e.value, e.stderr);
    }
    push("c_alpha_target".into(), r.c_alpha_target, 0.0);
    push("autocorr_time_h1".into(), r.autocorr_time_h1, 0.0);
    rows
}

fn moments_csv<'a>(reports: impl IntoIterator<Item = &'a MomentReport>) -> String {
    csv(&["nu", "quantity", "value", "stderr"], reports.into_iter().flat_map(moment_rows))
}

fn diagnostics_csv(rows: &[[f64; 4]]) -> String {
    csv(&["t", "h1", "ha1", "h2a"], rows.iter().map(|r| r.iter().map(|v| fmt_f64(*v)).collect()))
}

fn bound_checks(report: &MomentReport) -> Result<Vec<BoundCheck>> {
    let betas: Vec<f64> = report.exp_moment.iter().map(|(b, _)| *b).collect();
    let mut checks = check_factorial_bound(report);
    checks.extend(check_exp_bound(report, &betas)?);
    Ok(checks)
}

/// Writes the snapshots of a run under `dir` (relative to the writer root),
/// named so that lexical order is ensemble order.
fn write_snapshots(w: &mut ArtifactWriter, dir: &str, run: &StationaryRun, cfg: &ExperimentConfig) -> Result<()> {
    let r = &run.report;
    for (i, (x, &(replica, step))) in run.snapshots.iter().zip(&run.snapshot_origin).enumerate() {
        let path = w.root().join(format!("{dir}/snap_{i:05}_r{replica:04}.spf"));
        let meta = SnapshotMeta {
            timestamp: step as f64 * r.dt,
            nu: r.nu,
            alpha: r.alpha,
            seed: cfg.seed,
            step,
        };
        for p in write_snapshot(x, &meta, &path)? {
            w.record_file(&p)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    report: &'a MomentReport,
    energy_balance_relative_error: Option<f64>,
    bounds: Vec<BoundCheck>,
    stream_group: u64,
    first_stream: u64,
    snapshots: usize,
    warnings: &'a [String],
    checks: &'a [Check],
    pass: bool,
}

/// One stationary run at the first `nu` of the configuration.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let params = cfg.solver_params();
    let noise = cfg.mode_noise();
    let plan = cfg.sampling_plan();
    let run = run_stationary(&params, &noise, &plan, cfg.seed, 0)?;
    let (mut w, canonical) = open_output(cfg)?;
    let report = &run.report;
    let bounds = bound_checks(report)?;
    let mut checks = vec![Check::at_most(
        "failed replica fraction",
        report.failed_replicas.len() as f64 / report.n_replicas as f64,
        0.1,
    )];
    checks.extend(bounds.iter().map(Check::from_bound));
    let balance = energy_balance_residual(report, &noise).ok();
    w.write_json(
        "report.json",
        &SimulateReport {
            report,
            energy_balance_relative_error: balance,
            bounds,
            stream_group: 0,
            first_stream: stream_id(0, 0),
            snapshots: run.snapshots.len(),
            warnings: &cfg.warnings,
            pass: checks.iter().all(|c| c.pass),
            checks: &checks,
        },
    )?;
    w.write("moments.csv", moments_csv([report]).as_bytes())?;
    w.write("diagnostics.csv", diagnostics_csv(&run.diagnostics).as_bytes())?;
    write_snapshots(&mut w, "snapshots", &run, cfg)?;
    finish(Command::Simulate, w, &canonical, checks)
}

fn sweep_plan(cfg: &ExperimentConfig) -> SweepPlan {
    SweepPlan {
        sampling: cfg.sampling_plan(),
        t_list: cfg.euler.t_list.clone(),
        euler: Some(cfg.euler_params()),
    }
}

/// Reuses point `j` of an earlier sweep with the same configuration when all
/// of its artifacts are intact.
fn resume_point(
    root: &Path,
    previous: Option<&Manifest>,
    canonical: &str,
    j: usize,
    keep_snapshots: bool,
    lattice: &crate::spectral::Lattice,
) -> Option<(MomentReport, Vec<SpectralField>, Vec<PathBuf>)> {
    let m = previous?;
    if m.config_sha256 != sha256_hex(canonical.as_bytes()) {
        return None;
    }
    let dir = format!("nu_{j}");
    let owned: Vec<&str> = m
        .artifacts
        .iter()
        .map(|e| e.path.as_str())
        .filter(|p| p.starts_with(&format!("{dir}/")))
        .collect();
    for rel in [format!("{dir}/report.json"), format!("{dir}/diagnostics.csv")] {
        if !owned.contains(&rel.as_str()) {
            return None;
        }
    }
    if !owned.iter().all(|rel| verified(root, m, rel)) {
        return None;
    }
    let text = std::fs::read_to_string(root.join(format!("{dir}/report.json"))).ok()?;
    let report: PointReport = serde_json::from_str(&text).ok()?;
    let mut snapshots = Vec::new();
    if keep_snapshots {
        for rel in owned.iter().filter(|p| p.ends_with(".spf")) {
            snapshots.push(read_snapshot_into(&root.join(rel), lattice).ok()?.0);
        }
        if snapshots.len() != report.snapshots {
            return None;
        }
    }
    Some((report.report, snapshots, owned.iter().map(|rel| root.join(rel)).collect()))
}

#[derive(Serialize, Deserialize)]
struct PointReport {
    report: MomentReport,
    snapshots: usize,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    sweep: &'a SweepResult,
    energy_balance_relative_error: Vec<f64>,
    nu_independence: Vec<(usize, usize, f64)>,
    bounds: Vec<Vec<BoundCheck>>,
    resumed_points: Vec<usize>,
    warnings: &'a [String],
    checks: &'a [Check],
    pass: bool,
}

/// Stationary runs over the decreasing `nu_list`, then the Euler invariance
/// test on the smallest-`nu` ensemble. Completed points of an interrupted run
/// with the same configuration are reused.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let nu_list = cfg.nu_list();
    crate::measures::check_nu_list(&nu_list)?;
    let base = cfg.solver_params();
    let noise: ModeNoise = cfg.mode_noise();
    let plan = sweep_plan(cfg);
    let previous = read_manifest(&cfg.output_dir);
    let (mut w, canonical) = open_output(cfg)?;
    let lattice = cfg.lattice();
    let mut reports = Vec::new();
    let mut last_snapshots = Vec::new();
    let mut resumed = Vec::new();
    for j in 0..nu_list.len() {
        let last = j + 1 == nu_list.len();
        let dir = format!("nu_{j}");
        if let Some((report, snaps, files)) = resume_point(w.root(), previous.as_ref(), &canonical, j, last, &lattice) {
            for f in &files {
                w.record_file(f)?;
            }
            resumed.push(j);
            reports.push(report);
            last_snapshots = snaps;
            continue;
        }
        let run = sweep_point(j, &nu_list, &base, &noise, &plan, cfg.seed)?;
        write_snapshots(&mut w, &format!("{dir}/snapshots"), &run, cfg)?;
        w.write(&format!("{dir}/diagnostics.csv"), diagnostics_csv(&run.diagnostics).as_bytes())?;
        // the point report goes last: its presence marks the point complete
        w.write_json(
            &format!("{dir}/report.json"),
            &PointReport {
                report: run.report.clone(),
                snapshots: run.snapshots.len(),
            },
        )?;
        w.checkpoint(Command::Sweep.name(), &canonical)?;
        reports.push(run.report);
        last_snapshots = run.snapshots;
    }

    let mut checks = Vec::new();
    let mut balances = Vec::new();
    let mut bounds = Vec::new();
    for r in &reports {
        let b = energy_balance_residual(r, &noise)?;
        checks.push(Check::at_most(format!("energy balance nu={}", fmt_f64(r.nu)), b, ENERGY_BALANCE_TOL));
        balances.push(b);
        let bc = bound_checks(r)?;
        checks.extend(bc.iter().map(|c| Check {
            name: format!("{} nu={}", Check::from_bound(c).name, fmt_f64(r.nu)),
            ..Check::from_bound(c)
        }));
        bounds.push(bc);
    }
    let pairs = nu_independence(&reports);
    for &(i, j, z) in &pairs {
        checks.push(Check::at_most(format!("nu independence {i}-{j}"), z, AGREEMENT_SIGMAS));
    }
    let ensemble = last_snapshots.len();
    checks.push(Check {
        name: "invariance ensemble size".into(),
        value: ensemble as f64,
        limit: MIN_INVARIANCE_ENSEMBLE as f64,
        pass: ensemble >= MIN_INVARIANCE_ENSEMBLE,
    });
    let sweep = if ensemble >= MIN_INVARIANCE_ENSEMBLE {
        finish_sweep(&nu_list, reports, &last_snapshots, base.alpha, &plan)?
    } else {
        SweepResult {
            nu_list: nu_list.clone(),
            reports,
            euler_invariance: Vec::new(),
            invariance_ensemble_size: ensemble,
        }
    };
    for row in &sweep.euler_invariance {
        checks.push(Check::at_most(
            format!("euler invariance {} t={}", row.quantity, fmt_f64(row.t)),
            row.standardized_drift,
            AGREEMENT_SIGMAS,
        ));
    }
    w.write("moments.csv", moments_csv(&sweep.reports).as_bytes())?;
    w.write("invariance.csv", invariance_csv(&sweep.euler_invariance).as_bytes())?;
    w.write_json(
        "report.json",
        &SweepReport {
            sweep: &sweep,
            energy_balance_relative_error: balances,
            nu_independence: pairs,
            bounds,
            resumed_points: resumed,
            warnings: &cfg.warnings,
            pass: checks.iter().all(|c| c.pass),
            checks: &checks,
        },
    )?;
    finish(Command::Sweep, w, &canonical, checks)
}

fn invariance_csv(rows: &[InvarianceRow]) -> String {
    csv(
        &["t", "quantity", "before", "before_stderr", "after", "after_stderr", "standardized_drift"],
        rows.iter().map(|r| {
            vec![
                fmt_f64(r.t),
                r.quantity.clone(),
                fmt_f64(r.before.value),
                fmt_f64(r.before.stderr),
                fmt_f64(r.after.value),
                fmt_f64(r.after.stderr),
                fmt_f64(r.standardized_drift),
            ]
        }),
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EulerCheckReport {
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
    pub perturbation: f64,
    pub conservation: ConservationReport,
    pub refinement: RefinementFit,
    pub exponent_window: [f64; 2],
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Conservation of `||u||` and `||u||_{H^1}` along the Euler flow of the
/// perturbed Taylor-Green datum, plus the drift-versus-step refinement fit.
pub fn cmd_euler_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let e = &cfg.euler;
    let params = cfg.euler_params();
    let x = taylor_green(params.lattice, e.perturbation);
    let diag_every = ((0.1 / params.dt).round() as usize).max(1);
    let flow = EulerStepper::new(params)?.run_monitored(&x, e.horizon, e.sigma, cfg.solver.alpha, diag_every)?;
    let refinement = refinement_fit(&x, e.horizon, &params, &e.refinement_dts)?;
    let [lo, hi] = EULER_EXPONENT_WINDOW;
    let checks = vec![
        Check::at_most("l2 drift", flow.report.l2_drift, EULER_DRIFT_TOL),
        Check::at_most("h1 drift", flow.report.h1_drift, EULER_DRIFT_TOL),
        Check {
            name: format!("refinement exponent in [{lo}, {hi}]"),
            value: refinement.exponent,
            limit: hi,
            pass: (lo..=hi).contains(&refinement.exponent),
        },
    ];
    let (mut w, canonical) = open_output(cfg)?;
    let report = EulerCheckReport {
        n: params.lattice.n(),
        dt: params.dt,
        horizon: e.horizon,
        perturbation: e.perturbation,
        conservation: flow.report,
        refinement,
        exponent_window: EULER_EXPONENT_WINDOW,
        pass: checks.iter().all(|c| c.pass),
        checks: checks.clone(),
    };
    w.write_json("report.json", &report)?;
    w.write("diagnostics.csv", diagnostics_csv(&flow.diagnostics).as_bytes())?;
    finish(Command::EulerCheck, w, &canonical, checks)
}

/// The machine-precision identity suite on the configured lattice size.
pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let report: IdentityReport = run_identity_suite(cfg.lattice.n, cfg.seed)?;
    let checks = report
        .checks
        .iter()
        .map(|c| Check {
            name: c.name.clone(),
            value: c.max_residual,
            limit: c.tolerance,
            pass: c.pass,
        })
        .collect();
    let (mut w, canonical) = open_output(cfg)?;
    w.write_json("report.json", &report)?;
    finish(Command::Verify, w, &canonical, checks)
}
