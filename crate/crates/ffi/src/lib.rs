//! C ABI over the mixact library.
//!
//! Objects are opaque handles created by `*_new`/`*_fit` functions and
//! released with the matching `*_free`. Fallible functions return a
//! [`MixactStatus`]; on failure [`mixact_last_error`] describes the cause
//! for the calling thread. Points are passed as a `double` array of length
//! `p` and a `uint32_t` array of length `q` (levels are 1-based); arrays of
//! `n` points are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use mixact::acquisition::{self, AcquisitionSpec, CriterionKind, SelectionContext};
use mixact::benchmarks::{example1, example2, example3};
use mixact::{Dataset, DesignSpace, Error, FitOptions, FittedGp, MixedPoint, Posterior, Predictor, RngStream};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixactStatus {
    Ok = 0,
    InvalidArgument = 1,
    InvalidPoint = 2,
    DuplicatePoint = 3,
    FitFailure = 4,
    FactorizationFailure = 5,
    EmptyContour = 6,
    Io = 7,
    NullPointer = 8,
    Panic = 9,
}

/// Criterion codes for [`MixactSpec`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixactCriterion {
    Ei = 0,
    Lcb = 1,
    Ucb = 2,
    Arsd = 3,
    EiC = 4,
    Ecl = 5,
    Rcc = 6,
    ArsdC = 7,
    LcbC = 8,
    EiMc = 9,
    EiSc = 10,
}

impl From<MixactCriterion> for CriterionKind {
    fn from(c: MixactCriterion) -> Self {
        CriterionKind::ALL[c as usize]
    }
}

/// Selection parameters; start from [`mixact_spec_default`]. `a` is
/// ignored by criteria that do not target a contour.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct MixactSpec {
    pub kind: MixactCriterion,
    pub a: f64,
    pub rho: f64,
    pub alpha_conf: f64,
    pub alpha_eps: f64,
    pub delta: f64,
    pub n_contours: usize,
}

pub struct MixactSpace(DesignSpace);
pub struct MixactDataset(Dataset);
pub struct MixactModel(FittedGp);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> MixactStatus {
    match e {
        Error::InvalidSpace(_) | Error::InvalidArgument(_) | Error::Config(_) => MixactStatus::InvalidArgument,
        Error::InvalidPoint(_) => MixactStatus::InvalidPoint,
        Error::DuplicatePoint { .. } => MixactStatus::DuplicatePoint,
        Error::FitFailure(_) => MixactStatus::FitFailure,
        Error::FactorizationFailure { .. } => MixactStatus::FactorizationFailure,
        Error::EmptyContour => MixactStatus::EmptyContour,
        Error::Data { .. } | Error::Io { .. } => MixactStatus::Io,
    }
}

struct Fail(MixactStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MixactStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics to a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MixactStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MixactStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MixactStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn points(space: &DesignSpace, n: usize, x: *const f64, z: *const u32) -> Result<Vec<MixedPoint>, Fail> {
    let (p, q) = (space.p(), space.q());
    let xs = as_slice(x, n * p, "x")?;
    let zs = as_slice(z, n * q, "z")?;
    Ok((0..n)
        .map(|i| MixedPoint::new(xs[i * p..(i + 1) * p].to_vec(), zs[i * q..(i + 1) * q].to_vec()))
        .collect())
}

/// Message for the most recent failure on this thread. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mixact_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// ---------------------------------------------------------------------------
// design space

/// # Safety
/// `levels` points to `q` level counts (may be null when `q == 0`); `out`
/// is writable.
#[no_mangle]
pub unsafe extern "C" fn mixact_space_new(
    p: usize,
    levels: *const u32,
    q: usize,
    out: *mut *mut MixactSpace,
) -> MixactStatus {
    guard(|| {
        let levels = as_slice(levels, q, "levels")?.to_vec();
        let space = DesignSpace::new(p, levels)?;
        write_out(out, Box::into_raw(Box::new(MixactSpace(space))), "out")
    })
}

/// # Safety
/// `space` is null or a handle from `mixact_space_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mixact_space_free(space: *mut MixactSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// Number of level combinations, or 0 for a null handle.
///
/// # Safety
/// `space` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mixact_space_combinations(space: *const MixactSpace) -> usize {
    space.as_ref().map_or(0, |s| s.0.n_combinations())
}

// ---------------------------------------------------------------------------
// dataset

/// # Safety
/// `space` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn mixact_dataset_new(space: *const MixactSpace, out: *mut *mut MixactDataset) -> MixactStatus {
    guard(|| {
        let space = as_ref(space, "space")?;
        write_out(
            out,
            Box::into_raw(Box::new(MixactDataset(Dataset::new(space.0.clone())))),
            "out",
        )
    })
}

/// Appends one observation; rejects invalid, non-finite or repeated points.
///
/// # Safety
/// `data` is a live handle; `x` holds `p` values and `z` holds `q` levels.
#[no_mangle]
pub unsafe extern "C" fn mixact_dataset_push(
    data: *mut MixactDataset,
    x: *const f64,
    z: *const u32,
    y: f64,
) -> MixactStatus {
    guard(|| {
        let data = data.as_mut().ok_or_else(|| null("data"))?;
        let w = points(data.0.space(), 1, x, z)?.pop().expect("one point");
        data.0.push(w, y)?;
        Ok(())
    })
}

/// # Safety
/// `data` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mixact_dataset_len(data: *const MixactDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `data` is null or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mixact_dataset_free(data: *mut MixactDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

// ---------------------------------------------------------------------------
// emulator

/// Fits the EzGP emulator by multi-start maximum likelihood.
///
/// # Safety
/// `data` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn mixact_model_fit(
    data: *const MixactDataset,
    seed: u64,
    out: *mut *mut MixactModel,
) -> MixactStatus {
    guard(|| {
        let data = as_ref(data, "data")?;
        let model = mixact::fit(&data.0, &FitOptions::default(), RngStream::new(seed, 0))?;
        write_out(out, Box::into_raw(Box::new(MixactModel(model))), "out")
    })
}

/// Predictive mean and standard deviation at `n` points.
///
/// # Safety
/// `model` is a live handle; `x` holds `n * p` values, `z` holds `n * q`
/// levels; `mean` and `sd` have room for `n` values.
#[no_mangle]
pub unsafe extern "C" fn mixact_model_predict(
    model: *const MixactModel,
    n: usize,
    x: *const f64,
    z: *const u32,
    mean: *mut f64,
    sd: *mut f64,
) -> MixactStatus {
    guard(|| {
        let model = as_ref(model, "model")?;
        let pts = points(model.0.space(), n, x, z)?;
        for w in &pts {
            model.0.space().validate(w).map_err(Error::from)?;
        }
        if n > 0 && (mean.is_null() || sd.is_null()) {
            return Err(null("mean/sd"));
        }
        for (i, post) in model.0.predict_many(&pts).into_iter().enumerate() {
            mean.add(i).write(post.mean);
            sd.add(i).write(post.sd);
        }
        Ok(())
    })
}

/// # Safety
/// `model` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mixact_model_log_likelihood(model: *const MixactModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.0.log_likelihood())
}

/// Serializes the model to JSON; release the string with
/// [`mixact_string_free`].
///
/// # Safety
/// `model` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn mixact_model_to_json(model: *const MixactModel, out: *mut *mut c_char) -> MixactStatus {
    guard(|| {
        let model = as_ref(model, "model")?;
        let text = CString::new(model.0.to_json()).map_err(|e| Fail(MixactStatus::Io, e.to_string()))?;
        write_out(out, text.into_raw(), "out")
    })
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn mixact_model_from_json(json: *const c_char, out: *mut *mut MixactModel) -> MixactStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(MixactStatus::InvalidArgument, e.to_string()))?;
        let model = FittedGp::from_json(text, &FitOptions::default())?;
        write_out(out, Box::into_raw(Box::new(MixactModel(model))), "out")
    })
}

/// # Safety
/// `model` is null or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mixact_model_free(model: *mut MixactModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` is null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mixact_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// criteria

#[no_mangle]
pub extern "C" fn mixact_ei_min(mean: f64, sd: f64, f_min: f64) -> f64 {
    acquisition::ei_min(Posterior::new(mean, sd.max(0.0)), f_min)
}

#[no_mangle]
pub extern "C" fn mixact_lcb(mean: f64, sd: f64, rho: f64) -> f64 {
    acquisition::lcb(Posterior::new(mean, sd.max(0.0)), rho)
}

#[no_mangle]
pub extern "C" fn mixact_ucb(mean: f64, sd: f64, rho: f64) -> f64 {
    acquisition::ucb(Posterior::new(mean, sd.max(0.0)), rho)
}

#[no_mangle]
pub extern "C" fn mixact_beta0n(n: usize, m: usize, alpha_conf: f64) -> f64 {
    acquisition::beta0n(n, m, alpha_conf)
}

#[no_mangle]
pub extern "C" fn mixact_ei_contour(mean: f64, sd: f64, a: f64, alpha_eps: f64) -> f64 {
    acquisition::ei_contour(Posterior::new(mean, sd.max(0.0)), a, alpha_eps)
}

#[no_mangle]
pub extern "C" fn mixact_ecl(mean: f64, sd: f64, a: f64) -> f64 {
    acquisition::ecl(Posterior::new(mean, sd.max(0.0)), a)
}

/// # Safety
/// `levels` holds `c` values.
#[no_mangle]
pub unsafe extern "C" fn mixact_ei_mc(mean: f64, sd: f64, levels: *const f64, c: usize, alpha_eps: f64) -> f64 {
    match as_slice(levels, c, "levels") {
        Ok(levels) => acquisition::ei_mc(Posterior::new(mean, sd.max(0.0)), levels, alpha_eps),
        Err(_) => f64::NAN,
    }
}

#[no_mangle]
pub extern "C" fn mixact_spec_default(kind: MixactCriterion) -> MixactSpec {
    let s = AcquisitionSpec::new(kind.into());
    MixactSpec {
        kind,
        a: 0.0,
        rho: s.rho,
        alpha_conf: s.alpha_conf,
        alpha_eps: s.alpha_eps,
        delta: s.delta,
        n_contours: s.n_contours,
    }
}

/// Scores `n` candidates under `spec` and writes the winning index and its
/// score.
///
/// # Safety
/// `model` and `spec` are valid; `x`/`z` hold `n` points; `index` and
/// `score` are writable.
#[no_mangle]
pub unsafe extern "C" fn mixact_select(
    model: *const MixactModel,
    spec: *const MixactSpec,
    n: usize,
    x: *const f64,
    z: *const u32,
    seed: u64,
    index: *mut usize,
    score: *mut f64,
) -> MixactStatus {
    guard(|| {
        let model = as_ref(model, "model")?;
        let s = as_ref(spec, "spec")?;
        let kind: CriterionKind = s.kind.into();
        let mut full = AcquisitionSpec::new(kind);
        full.a = kind.needs_level().then_some(s.a);
        full.rho = s.rho;
        full.alpha_conf = s.alpha_conf;
        full.alpha_eps = s.alpha_eps;
        full.delta = s.delta;
        full.n_contours = s.n_contours;
        let candidates = points(model.0.space(), n, x, z)?;
        for w in &candidates {
            model.0.space().validate(w).map_err(Error::from)?;
        }
        let sel = acquisition::select(&model.0, &candidates, &full, RngStream::new(seed, 0))?;
        write_out(index, sel.index, "index")?;
        write_out(score, sel.score, "score")
    })
}

/// Selection from precomputed posteriors (no model needed). `f_min`, `n`
/// and `m` feed EI and the confidence schedule. EI-MC requires
/// `spec.n_contours` levels in `levels`.
///
/// # Safety
/// `mean`, `sd` hold `count` values; `levels` holds `spec.n_contours`
/// values for EI-MC; `index` and `score` are writable.
#[no_mangle]
pub unsafe extern "C" fn mixact_select_posteriors(
    spec: *const MixactSpec,
    count: usize,
    mean: *const f64,
    sd: *const f64,
    f_min: f64,
    n: usize,
    m: usize,
    levels: *const f64,
    index: *mut usize,
    score: *mut f64,
) -> MixactStatus {
    guard(|| {
        let s = as_ref(spec, "spec")?;
        if count == 0 {
            return Err(Fail(MixactStatus::InvalidArgument, "candidate pool is empty".into()));
        }
        let kind: CriterionKind = s.kind.into();
        let means = as_slice(mean, count, "mean")?;
        let sds = as_slice(sd, count, "sd")?;
        let posts: Vec<Posterior> = means
            .iter()
            .zip(sds)
            .map(|(&m, &s)| Posterior::new(m, s.max(0.0)))
            .collect();
        let mut full = AcquisitionSpec::new(kind);
        full.a = kind.needs_level().then_some(s.a);
        full.rho = s.rho;
        full.alpha_conf = s.alpha_conf;
        full.alpha_eps = s.alpha_eps;
        full.delta = s.delta;
        full.n_contours = s.n_contours;
        let lv = if kind == CriterionKind::EiMc {
            let lv = as_slice(levels, s.n_contours, "levels")?.to_vec();
            full.levels = Some(lv.clone());
            Some(lv)
        } else {
            None
        };
        full.validate()?;
        let ctx = SelectionContext {
            n: n.max(1),
            m: m.max(1),
            f_min,
        };
        let pick = acquisition::select_from_posteriors(&posts, &full, &ctx, lv.as_deref());
        write_out(index, pick.index, "index")?;
        write_out(score, pick.score, "score")
    })
}

// ---------------------------------------------------------------------------
// test problems

/// Evaluates built-in test problem `which` (1, 2 or 3) at one point.
///
/// # Safety
/// `x`/`z` hold one point of that problem's dimensions; `y` is writable.
#[no_mangle]
pub unsafe extern "C" fn mixact_example_eval(which: u32, x: *const f64, z: *const u32, y: *mut f64) -> MixactStatus {
    guard(|| {
        let (space, f): (DesignSpace, fn(&MixedPoint) -> f64) = match which {
            1 => (DesignSpace::new(1, vec![3])?, example1),
            2 => (DesignSpace::new(2, vec![3, 3])?, example2),
            3 => (DesignSpace::new(3, vec![3, 3, 3])?, example3),
            _ => return Err(Fail(MixactStatus::InvalidArgument, format!("no example {which}"))),
        };
        let w = points(&space, 1, x, z)?.pop().expect("one point");
        space.validate(&w).map_err(Error::from)?;
        write_out(y, f(&w), "y")
    })
}
