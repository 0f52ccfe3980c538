//! C ABI over the inference, likelihood and metric code.
//!
//! Every function returns an [`IctalStatus`]; on failure the message is
//! available from [`ictal_last_error`] on the same thread. Objects are
//! opaque handles released with their `_free` function. Panics are caught
//! at the boundary and reported as `ICTAL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use ictal::evaluation::{auc_roc, cnn_flop_count, EvalError};
use ictal::inference::{
    detect, fg_flop_count, smooth_evidence, DetectorConfig, FixedLagSmoother, InferenceError,
    MarginalSeries, TransitionModel,
};
use ictal::likelihood::{evidence_from_probability, load_weights, LikelihoodError, Model};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IctalStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DegenerateEvidence = 3,
    Io = 4,
    Format = 5,
    UndefinedMetric = 6,
    Panic = 7,
}

/// Two-state chain parameters.
pub struct IctalChain(TransitionModel);

/// Online fixed-lag smoother.
pub struct IctalSmoother(FixedLagSmoother);

/// CNN loaded from a weight file.
pub struct IctalModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

type Failure = (IctalStatus, String);

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IctalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IctalStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IctalStatus::Panic
        }
    }
}

fn inference_failure(e: InferenceError) -> Failure {
    let status = match e {
        InferenceError::DegenerateEvidence { .. } => IctalStatus::DegenerateEvidence,
        _ => IctalStatus::InvalidArgument,
    };
    (status, e.to_string())
}

fn likelihood_failure(e: LikelihoodError) -> Failure {
    let status = match e {
        LikelihoodError::Io { .. } => IctalStatus::Io,
        LikelihoodError::Shape { .. } | LikelihoodError::Numeric(_) => IctalStatus::InvalidArgument,
        _ => IctalStatus::Format,
    };
    (status, e.to_string())
}

fn eval_failure(e: EvalError) -> Failure {
    let status = match e {
        EvalError::SingleClass(_) => IctalStatus::UndefinedMetric,
        _ => IctalStatus::InvalidArgument,
    };
    (status, e.to_string())
}

fn null(name: &str) -> Failure {
    (IctalStatus::NullPointer, format!("{name} is null"))
}

/// # Safety
/// `p` must be null or valid for `n` reads.
unsafe fn input<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, n))
}

/// # Safety
/// `p` must be null or valid for `n` writes.
unsafe fn output<'a, T>(p: *mut T, n: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Message of the last failed call on this thread; empty if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ictal_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ictal_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Chain with transition probabilities `p01`, `p10` and first-block
/// distribution `(pi0, pi1)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ictal_chain_new(
    p01: f64,
    p10: f64,
    pi0: f64,
    pi1: f64,
    out: *mut *mut IctalChain,
) -> IctalStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let t = TransitionModel::new(p01, p10, [pi0, pi1]).map_err(inference_failure)?;
        *out = Box::into_raw(Box::new(IctalChain(t)));
        Ok(())
    })
}

/// Chain started from its stationary distribution.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ictal_chain_new_stationary(
    p01: f64,
    p10: f64,
    out: *mut *mut IctalChain,
) -> IctalStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let t = TransitionModel::stationary(p01, p10).map_err(inference_failure)?;
        *out = Box::into_raw(Box::new(IctalChain(t)));
        Ok(())
    })
}

/// Chain with the default transition probabilities, stationary start.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ictal_chain_new_default(out: *mut *mut IctalChain) -> IctalStatus {
    guard(|| {
        *out_ref(out, "out")? = Box::into_raw(Box::new(IctalChain(TransitionModel::default())));
        Ok(())
    })
}

/// # Safety
/// `chain` must be null or a handle from an `ictal_chain_new*` call, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ictal_chain_free(chain: *mut IctalChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Smoothed seizure marginals of `n` block probabilities.
///
/// # Safety
/// `probabilities` and `marginals_out` must be valid for `n` elements.
#[no_mangle]
pub unsafe extern "C" fn ictal_smooth(
    chain: *const IctalChain,
    probabilities: *const f64,
    n: usize,
    marginals_out: *mut f64,
) -> IctalStatus {
    guard(|| {
        let chain = handle(chain, "chain")?;
        let q = input(probabilities, n, "probabilities")?;
        if let Some(i) = q.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err((
                IctalStatus::InvalidArgument,
                format!("probability {i} = {} outside [0, 1]", q[i]),
            ));
        }
        let evidence: Vec<_> = q.iter().map(|&v| evidence_from_probability(v)).collect();
        let m = smooth_evidence(&evidence, &chain.0).map_err(inference_failure)?;
        output(marginals_out, n, "marginals_out")?.copy_from_slice(&m);
        Ok(())
    })
}

/// `detected_out[i] = marginals[i] > threshold`.
///
/// # Safety
/// `marginals` and `detected_out` must be valid for `n` elements.
#[no_mangle]
pub unsafe extern "C" fn ictal_detect(
    marginals: *const f64,
    n: usize,
    threshold: f64,
    detected_out: *mut u8,
) -> IctalStatus {
    guard(|| {
        let cfg = DetectorConfig::new(threshold).map_err(inference_failure)?;
        let m = MarginalSeries {
            values: input(marginals, n, "marginals")?.to_vec(),
        };
        output(detected_out, n, "detected_out")?.copy_from_slice(&detect(&m, &cfg));
        Ok(())
    })
}

/// FLOPs of smoothing `n` blocks.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ictal_fg_flop_count(n: u64, out: *mut u64) -> IctalStatus {
    guard(|| {
        *out_ref(out, "out")? = fg_flop_count(n).map_err(inference_failure)?;
        Ok(())
    })
}

/// Online smoother releasing each block `lag` blocks after it arrives.
///
/// # Safety
/// `chain` must be a live chain handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ictal_smoother_new(
    chain: *const IctalChain,
    lag: usize,
    out: *mut *mut IctalSmoother,
) -> IctalStatus {
    guard(|| {
        let chain = handle(chain, "chain")?;
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(IctalSmoother(FixedLagSmoother::new(chain.0, lag))));
        Ok(())
    })
}

/// Adds one block probability. When a block becomes final, `*ready_out` is
/// set to 1 and its index and marginal are written; otherwise `*ready_out`
/// is 0.
///
/// # Safety
/// `smoother` must be a live handle; the out pointers valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ictal_smoother_push(
    smoother: *mut IctalSmoother,
    probability: f64,
    ready_out: *mut u8,
    index_out: *mut usize,
    marginal_out: *mut f64,
) -> IctalStatus {
    guard(|| {
        let s = smoother.as_mut().ok_or_else(|| null("smoother"))?;
        let ready = out_ref(ready_out, "ready_out")?;
        if !(0.0..=1.0).contains(&probability) {
            return Err((
                IctalStatus::InvalidArgument,
                format!("probability {probability} outside [0, 1]"),
            ));
        }
        *ready = 0;
        if let Some((i, m)) =
            s.0.push(evidence_from_probability(probability))
                .map_err(inference_failure)?
        {
            *out_ref(index_out, "index_out")? = i;
            *out_ref(marginal_out, "marginal_out")? = m;
            *ready = 1;
        }
        Ok(())
    })
}

/// Releases every pending block. At most `capacity` entries are written;
/// `*count_out` receives the number of pending blocks, and the call fails
/// with `ICTAL_STATUS_INVALID_ARGUMENT` (releasing nothing) if that exceeds
/// `capacity`. `lag + 1` entries always suffice.
///
/// # Safety
/// `smoother` must be a live handle; the arrays valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn ictal_smoother_flush(
    smoother: *mut IctalSmoother,
    indices_out: *mut usize,
    marginals_out: *mut f64,
    capacity: usize,
    count_out: *mut usize,
) -> IctalStatus {
    guard(|| {
        let s = smoother.as_mut().ok_or_else(|| null("smoother"))?;
        let count = out_ref(count_out, "count_out")?;
        let mut probe = s.0.clone();
        let released = probe.flush();
        *count = released.len();
        if released.len() > capacity {
            return Err((
                IctalStatus::InvalidArgument,
                format!(
                    "{} pending blocks exceed capacity {capacity}",
                    released.len()
                ),
            ));
        }
        let idx = output(indices_out, released.len(), "indices_out")?;
        let mar = output(marginals_out, released.len(), "marginals_out")?;
        for (k, (i, m)) in released.into_iter().enumerate() {
            idx[k] = i;
            mar[k] = m;
        }
        s.0 = probe;
        Ok(())
    })
}

/// # Safety
/// `smoother` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ictal_smoother_free(smoother: *mut IctalSmoother) {
    if !smoother.is_null() {
        drop(Box::from_raw(smoother));
    }
}

/// Loads a weight file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ictal_model_load(
    path: *const c_char,
    out: *mut *mut IctalModel,
) -> IctalStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| {
            (
                IctalStatus::InvalidArgument,
                "path is not UTF-8".to_string(),
            )
        })?;
        let model = load_weights(path).map_err(likelihood_failure)?;
        *out = Box::into_raw(Box::new(IctalModel(model)));
        Ok(())
    })
}

/// Number of input values per block: `input_len * input_channels`.
///
/// # Safety
/// `model` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ictal_model_input_size(
    model: *const IctalModel,
    out: *mut usize,
) -> IctalStatus {
    guard(|| {
        let a = handle(model, "model")?.0.architecture();
        *out_ref(out, "out")? = a.input_len * a.input_channels;
        Ok(())
    })
}

/// Seizure probability of one block given time-major samples
/// (`samples[t * channels + c]`).
///
/// # Safety
/// `samples` must be valid for `len` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn ictal_model_forward(
    model: *const IctalModel,
    samples: *const f32,
    len: usize,
    out: *mut f32,
) -> IctalStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let x = input(samples, len, "samples")?;
        *out_ref(out, "out")? = model.0.forward(x).map_err(likelihood_failure)?;
        Ok(())
    })
}

/// FLOPs of one forward pass.
///
/// # Safety
/// `model` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ictal_model_flops(model: *const IctalModel, out: *mut u64) -> IctalStatus {
    guard(|| {
        let model = handle(model, "model")?;
        *out_ref(out, "out")? = cnn_flop_count(model.0.architecture())
            .map_err(eval_failure)?
            .total;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ictal_model_free(model: *mut IctalModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Area under the ROC curve of `scores` against binary `truth`.
///
/// # Safety
/// `scores` and `truth` must be valid for `n` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn ictal_auc_roc(
    scores: *const f64,
    truth: *const u8,
    n: usize,
    out: *mut f64,
) -> IctalStatus {
    guard(|| {
        let s = input(scores, n, "scores")?;
        let t = input(truth, n, "truth")?;
        *out_ref(out, "out")? = auc_roc(s, t).map_err(eval_failure)?;
        Ok(())
    })
}
