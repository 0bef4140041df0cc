//! C ABI for `imle-core`.
//!
//! Every function returns an [`ImleStatus`]. On failure a message is kept per
//! thread and can be read with [`imle_last_error`]. Objects are opaque
//! handles created by `*_new` and released by the matching `*_free`.
//! Buffers are caller-owned; lengths are checked against the handle's
//! dimensions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use imle_core::analysis::{mult_count, MultCountMode};
use imle_core::bnn::{kl_diag_gauss, BayesianDynamics, BayesianLinearModel, DiagGaussian};
use imle_core::config::RunConfig;
use imle_core::envs::{Env, EnvKind, Environment};
use imle_core::pipeline::run_training;
use imle_core::{seeded_rng, Error, Rng};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImleStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numeric = 3,
    Io = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImleMultMode {
    Vime = 0,
    Imle = 1,
}

/// Sparse-reward environment handle.
pub struct ImleEnv {
    env: Env,
}

/// Bayesian linear dynamics model handle with its own generator.
pub struct ImleBnn {
    model: BayesianLinearModel,
    rng: Rng,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(ImleStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let status = match err {
            Error::Config(_) | Error::Usage(_) | Error::Domain(_) | Error::Json(_) => ImleStatus::InvalidArgument,
            Error::Numeric(_) => ImleStatus::Numeric,
            Error::Io(_) => ImleStatus::Io,
        };
        Failure(status, err.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn null(what: &str) -> Failure {
    Failure(ImleStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(ImleStatus::InvalidArgument, msg.into())
}

fn guard(body: impl FnOnce() -> FfiResult) -> ImleStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ImleStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside imle");
            ImleStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

fn check_len(got: usize, want: usize, what: &str) -> FfiResult {
    if got != want {
        return Err(invalid(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

/// Message of the last failed call on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn imle_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates an environment by name (`sparse-mountaincar` or `sparse-acrobot`).
/// `horizon = 0` selects the task default.
///
/// # Safety
/// `name` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn imle_env_new(name: *const c_char, horizon: usize, out: *mut *mut ImleEnv) -> ImleStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let kind: EnvKind = string(name, "name")?.parse()?;
        let horizon = if horizon == 0 { kind.default_horizon() } else { horizon };
        *out = Box::into_raw(Box::new(ImleEnv { env: kind.make(horizon) }));
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`imle_env_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn imle_env_free(env: *mut ImleEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn imle_env_obs_dim(env: *mut ImleEnv, out: *mut usize) -> ImleStatus {
    guard(|| {
        *out_ref(out, "out")? = handle(env, "env")?.env.observation_spec().0;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn imle_env_action_dim(env: *mut ImleEnv, out: *mut usize) -> ImleStatus {
    guard(|| {
        *out_ref(out, "out")? = handle(env, "env")?.env.observation_spec().1;
        Ok(())
    })
}

/// Starts a new episode and writes the first observation.
///
/// # Safety
/// `obs` must point to `obs_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn imle_env_reset(env: *mut ImleEnv, seed: u64, obs: *mut f64, obs_len: usize) -> ImleStatus {
    guard(|| {
        let env = handle(env, "env")?;
        check_len(obs_len, env.env.observation_spec().0, "obs")?;
        let state = env.env.reset(seed);
        slice_mut(obs, obs_len, "obs")?.copy_from_slice(&state.observation);
        Ok(())
    })
}

/// Applies `action` (clipped to [-1, 1]) and writes the next observation,
/// the reward and the episode-end flag.
///
/// # Safety
/// Buffers must hold the stated lengths; `reward` and `done` must be valid.
#[no_mangle]
pub unsafe extern "C" fn imle_env_step(
    env: *mut ImleEnv,
    action: *const f64,
    action_len: usize,
    obs: *mut f64,
    obs_len: usize,
    reward: *mut f64,
    done: *mut bool,
) -> ImleStatus {
    guard(|| {
        let env = handle(env, "env")?;
        let (obs_dim, act_dim) = env.env.observation_spec();
        check_len(action_len, act_dim, "action")?;
        check_len(obs_len, obs_dim, "obs")?;
        let a = slice(action, action_len, "action")?;
        let (obs, reward, done) = (slice_mut(obs, obs_len, "obs")?, out_ref(reward, "reward")?, out_ref(done, "done")?);
        let step = env.env.step(a)?;
        obs.copy_from_slice(&step.observation);
        *reward = step.reward;
        *done = step.done;
        Ok(())
    })
}

/// `KL(p ‖ q)` between diagonal Gaussians given by means and variances.
///
/// # Safety
/// The four arrays must hold `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn imle_kl_diag_gauss(
    mean_p: *const f64,
    var_p: *const f64,
    mean_q: *const f64,
    var_q: *const f64,
    len: usize,
    out: *mut f64,
) -> ImleStatus {
    guard(|| {
        let p = DiagGaussian::new(slice(mean_p, len, "mean_p")?.to_vec(), slice(var_p, len, "var_p")?.to_vec())?;
        let q = DiagGaussian::new(slice(mean_q, len, "mean_q")?.to_vec(), slice(var_q, len, "var_q")?.to_vec())?;
        *out_ref(out, "out")? = kl_diag_gauss(&p, &q)?;
        Ok(())
    })
}

/// Multiplications per scored transition. `latent = 0` uses the last hidden width.
///
/// # Safety
/// `hidden` must hold `n_hidden` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn imle_mult_count(
    state: usize,
    action: usize,
    hidden: *const usize,
    n_hidden: usize,
    latent: usize,
    samples: usize,
    mode: ImleMultMode,
    out: *mut u64,
) -> ImleStatus {
    guard(|| {
        let hidden = slice(hidden, n_hidden, "hidden")?;
        let mode = match mode {
            ImleMultMode::Vime => MultCountMode::Vime,
            ImleMultMode::Imle => MultCountMode::Imle,
        };
        *out_ref(out, "out")? = mult_count(state, action, hidden, (latent > 0).then_some(latent), samples, mode)?;
        Ok(())
    })
}

/// Runs a training configuration given as flat JSON. A non-null `out_dir`
/// overrides the config's output directory.
///
/// # Safety
/// `config_json` must be a valid C string; `out_dir` null or a valid C string.
#[no_mangle]
pub unsafe extern "C" fn imle_train(config_json: *const c_char, out_dir: *const c_char) -> ImleStatus {
    guard(|| {
        let mut cfg: RunConfig = serde_json::from_str(string(config_json, "config_json")?).map_err(Error::from)?;
        if !out_dir.is_null() {
            cfg.out_dir = Some(string(out_dir, "out_dir")?.to_string());
        }
        run_training(&cfg)?;
        Ok(())
    })
}

/// Creates a Bayesian linear model `in_dim → out_dim`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn imle_bnn_new(
    in_dim: usize,
    out_dim: usize,
    prior_std: f64,
    obs_std: f64,
    init_std: f64,
    seed: u64,
    out: *mut *mut ImleBnn,
) -> ImleStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let mut rng = seeded_rng(seed);
        let model = BayesianLinearModel::new(in_dim, out_dim, prior_std, obs_std, init_std, &mut rng)?;
        *out = Box::into_raw(Box::new(ImleBnn { model, rng }));
        Ok(())
    })
}

/// # Safety
/// `bnn` must come from [`imle_bnn_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn imle_bnn_free(bnn: *mut ImleBnn) {
    if !bnn.is_null() {
        drop(Box::from_raw(bnn));
    }
}

/// Predictive mean and variance (observation noise included) of the output.
///
/// # Safety
/// `x` holds `x_len` doubles; `mean` and `var` hold `out_len` each.
#[no_mangle]
pub unsafe extern "C" fn imle_bnn_predict(
    bnn: *mut ImleBnn,
    x: *const f64,
    x_len: usize,
    mean: *mut f64,
    var: *mut f64,
    out_len: usize,
) -> ImleStatus {
    guard(|| {
        let bnn = handle(bnn, "bnn")?;
        check_len(out_len, bnn.model.out_dim(), "output")?;
        let pred = bnn.model.predict_input(slice(x, x_len, "x")?)?;
        slice_mut(mean, out_len, "mean")?.copy_from_slice(&pred.mean);
        slice_mut(var, out_len, "var")?.copy_from_slice(&pred.var);
        Ok(())
    })
}

/// Information gain of one transition `(x, y)` for a step of size `step`,
/// with the prior weighted by `1 / dataset_size`.
///
/// # Safety
/// `x` and `y` hold the stated lengths; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn imle_bnn_info_gain(
    bnn: *mut ImleBnn,
    x: *const f64,
    x_len: usize,
    y: *const f64,
    y_len: usize,
    step: f64,
    dataset_size: usize,
    out: *mut f64,
) -> ImleStatus {
    guard(|| {
        let bnn = handle(bnn, "bnn")?;
        let (x, y) = (slice(x, x_len, "x")?, slice(y, y_len, "y")?);
        if !(step >= 0.0) {
            return Err(invalid("step must be nonnegative"));
        }
        *out_ref(out, "out")? = bnn.model.info_gain_exact(x, y, step, dataset_size, &mut bnn.rng)?;
        Ok(())
    })
}
