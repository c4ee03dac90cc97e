//! C ABI over `simlab`: an opaque simulator handle for stepping the
//! stochastic equation, the identity suite, and whole CLI commands.
//!
//! Every function returns a [`SimlabStatus`]; on failure the message is kept
//! per thread and can be copied out with [`simlab_last_error_message`].
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use simlab::commands::{run_command, Command};
use simlab::config::parse_config;
use simlab::snapshot::{write_snapshot, SnapshotMeta};
use simlab::solver::{HnsStepper, SolverParams};
use simlab::spectral::{Lattice, SpectralField};
use simlab::stochastic::{NoiseSpec, RngStream};
use simlab::verify::run_identity_suite;
use simlab::SimError;

/// Result codes of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BlowUp = 3,
    Config = 4,
    Io = 5,
    /// The operation ran but at least one asserted check failed.
    ChecksFailed = 6,
    Internal = 7,
}

/// Parameters of a simulator; noise is the default family for `alpha`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SimlabParams {
    pub n: u32,
    pub length: f64,
    pub nu: f64,
    pub alpha: f64,
    pub dt: f64,
    pub seed: u64,
    pub stream: u64,
}

/// Opaque simulator: the state `X_t` and its stepper.
pub struct SimlabSimulator {
    stepper: HnsStepper,
    state: SpectralField,
    seed: u64,
}

/// Subcommands of [`simlab_run_command`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimlabCommand {
    Simulate = 0,
    Sweep = 1,
    EulerCheck = 2,
    Verify = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &SimError) -> SimlabStatus {
    match err {
        SimError::BlowUp { .. } => SimlabStatus::BlowUp,
        SimError::Config(_) => SimlabStatus::Config,
        SimError::Io(_) | SimError::Snapshot { .. } | SimError::Json(_) => SimlabStatus::Io,
        _ => SimlabStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<SimlabStatus, SimError>) -> SimlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            SimlabStatus::Internal
        }
    }
}

fn null(name: &str) -> SimlabStatus {
    set_error(format!("{name} is null"));
    SimlabStatus::NullPointer
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn simlab_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a simulator at rest (`X_0 = 0`).
///
/// # Safety
/// `params` must be valid for reads and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn simlab_simulator_new(params: *const SimlabParams, out: *mut *mut SimlabSimulator) -> SimlabStatus {
    if params.is_null() {
        return null("params");
    }
    if out.is_null() {
        return null("out");
    }
    let p = *params;
    guard(|| {
        let lattice = Lattice::new(p.n as usize, p.length)?;
        let solver = SolverParams::new(p.nu, p.alpha, p.dt, lattice)?;
        let noise = NoiseSpec::default_for(p.alpha).resolve(lattice, solver.dealias)?;
        let stepper = HnsStepper::new(solver, &noise, RngStream::new(p.seed, p.stream))?;
        let sim = SimlabSimulator {
            stepper,
            state: SpectralField::zeros(lattice),
            seed: p.seed,
        };
        *out = Box::into_raw(Box::new(sim));
        Ok(SimlabStatus::Ok)
    })
}

/// Releases a simulator; null is ignored.
///
/// # Safety
/// `sim` must come from [`simlab_simulator_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn simlab_simulator_free(sim: *mut SimlabSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances the state by `steps` time steps.
///
/// # Safety
/// `sim` must be a live simulator handle.
#[no_mangle]
pub unsafe extern "C" fn simlab_simulator_step(sim: *mut SimlabSimulator, steps: u64) -> SimlabStatus {
    let Some(sim) = sim.as_mut() else {
        return null("sim");
    };
    guard(|| {
        for _ in 0..steps {
            sim.stepper.step(&mut sim.state)?;
        }
        Ok(SimlabStatus::Ok)
    })
}

/// Current time of the simulator.
///
/// # Safety
/// `sim` must be a live simulator handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn simlab_simulator_time(sim: *const SimlabSimulator, out: *mut f64) -> SimlabStatus {
    let Some(sim) = sim.as_ref() else {
        return null("sim");
    };
    if out.is_null() {
        return null("out");
    }
    *out = sim.stepper.time();
    SimlabStatus::Ok
}

/// `||X_t||_{H^s}` of the current state.
///
/// # Safety
/// `sim` must be a live simulator handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn simlab_simulator_norm(sim: *const SimlabSimulator, s: f64, out: *mut f64) -> SimlabStatus {
    let Some(sim) = sim.as_ref() else {
        return null("sim");
    };
    if out.is_null() {
        return null("out");
    }
    if !s.is_finite() {
        set_error(format!("Sobolev index must be finite, got {s}"));
        return SimlabStatus::InvalidArgument;
    }
    *out = sim.state.sobolev_norm(s);
    SimlabStatus::Ok
}

fn c_path<'a>(path: *const c_char) -> Result<&'a Path, SimlabStatus> {
    if path.is_null() {
        return Err(null("path"));
    }
    // SAFETY: the caller guarantees a NUL-terminated string
    let s = unsafe { CStr::from_ptr(path) }.to_str().map_err(|_| {
        set_error("path is not UTF-8");
        SimlabStatus::InvalidArgument
    })?;
    Ok(Path::new(s))
}

/// Writes the current state as an SPF1 snapshot (plus its JSON sidecar).
///
/// # Safety
/// `sim` must be a live simulator handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn simlab_simulator_write_snapshot(sim: *const SimlabSimulator, path: *const c_char) -> SimlabStatus {
    let Some(sim) = sim.as_ref() else {
        return null("sim");
    };
    let path = match c_path(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(|| {
        let p = sim.stepper.params();
        let meta = SnapshotMeta {
            timestamp: sim.stepper.time(),
            nu: p.nu,
            alpha: p.alpha,
            seed: sim.seed,
            step: sim.stepper.steps_taken() as u64,
        };
        write_snapshot(&sim.state, &meta, path)?;
        Ok(SimlabStatus::Ok)
    })
}

/// Runs the identity suite on an `n x n` lattice; `max_residual` receives
/// the worst residual relative to its tolerance (pass iff `<= 1`).
///
/// # Safety
/// `max_residual` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn simlab_verify(n: u32, seed: u64, max_residual: *mut f64) -> SimlabStatus {
    guard(|| {
        let report = run_identity_suite(n as usize, seed)?;
        if !max_residual.is_null() {
            *max_residual = report
                .checks
                .iter()
                .map(|c| if c.tolerance > 0.0 { c.max_residual / c.tolerance } else if c.max_residual > 0.0 { f64::INFINITY } else { 0.0 })
                .fold(0.0, f64::max);
        }
        Ok(if report.pass { SimlabStatus::Ok } else { SimlabStatus::ChecksFailed })
    })
}

/// Runs a CLI command on configuration text, writing artifacts to `out_dir`.
///
/// # Safety
/// `config_toml` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn simlab_run_command(command: SimlabCommand, config_toml: *const c_char, out_dir: *const c_char) -> SimlabStatus {
    if config_toml.is_null() {
        return null("config_toml");
    }
    let out = match c_path(out_dir) {
        Ok(p) => p.to_path_buf(),
        Err(s) => return s,
    };
    let Ok(text) = CStr::from_ptr(config_toml).to_str() else {
        set_error("config is not UTF-8");
        return SimlabStatus::InvalidArgument;
    };
    guard(|| {
        let mut cfg = parse_config(text)?;
        cfg.output_dir = out;
        let command = match command {
            SimlabCommand::Simulate => Command::Simulate,
            SimlabCommand::Sweep => Command::Sweep,
            SimlabCommand::EulerCheck => Command::EulerCheck,
            SimlabCommand::Verify => Command::Verify,
        };
        let outcome = run_command(command, &cfg)?;
        Ok(if outcome.pass { SimlabStatus::Ok } else { SimlabStatus::ChecksFailed })
    })
}
