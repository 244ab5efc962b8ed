//! C ABI for rducb.
//!
//! Every fallible function returns an [`RducbStatus`]. On failure a message
//! is stored for the calling thread and can be read with
//! [`rducb_last_error`]; successful calls leave it untouched. Handles are
//! owned by the caller and released with the matching `_free` function,
//! which accepts null. Strings returned through `char **` out-parameters
//! are released with [`rducb_string_free`]. Panics never cross the
//! boundary; they surface as `RDUCB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rducb::acquisition::BetaSchedule;
use rducb::cli::io::write_trace;
use rducb::engine::{self, stream_rng, EdgeRule, Phase, Stream};
use rducb::{AcquisitionFamily, Benchmark, Decomposition, Error, Objective, RegretTrace, RunConfig, Sense, Strategy};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RducbStatus {
    Ok = 0,
    InvalidParameter = 1,
    NullPointer = 2,
    Numerical = 3,
    Resource = 4,
    BlackBox = 5,
    Io = 6,
    Parse = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RducbStrategy {
    Rducb = 0,
    RandomSearch = 1,
    FixedTree = 2,
    MlTree = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RducbAcquisition {
    AddUcb = 0,
    AddEi = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RducbSense {
    Minimize = 0,
    Maximize = 1,
}

/// Settings for one optimisation run. Fill with
/// [`rducb_run_options_default`] and override fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RducbRunOptions {
    pub strategy: RducbStrategy,
    pub acquisition: RducbAcquisition,
    /// Total evaluations, initial design included.
    pub budget: usize,
    pub n_init: usize,
    /// Tree edge count; negative selects max(⌊d/5⌋, 1).
    pub edges: i64,
    /// Constant exploration weight; NaN selects ½ ln(2t).
    pub beta: f64,
    pub grid_size: usize,
    pub refine: bool,
    pub seed: u64,
    /// Record per-round wall time.
    pub timing: bool,
}

/// One round of a trace. Values that do not apply are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RducbRound {
    pub round: usize,
    pub is_init: bool,
    pub y: f64,
    pub best_y: f64,
    pub inst_regret: f64,
    pub best_regret: f64,
    pub beta: f64,
    pub wall_ms: f64,
}

/// Writes `f(x)` to `*y` and returns 0, or returns nonzero to abort the run.
pub type RducbObjectiveFn =
    Option<unsafe extern "C" fn(x: *const f64, d: usize, user_data: *mut c_void, y: *mut f64) -> c_int>;

pub struct RducbDecomposition(Decomposition);
pub struct RducbBenchmark(Benchmark);
pub struct RducbTrace(RegretTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(RducbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidParameter(_) | Error::Decomposition(_) | Error::InvalidMatrix(_) | Error::UnknownOptimum(_) => {
                RducbStatus::InvalidParameter
            }
            Error::Numerical(_) | Error::Fit(_) => RducbStatus::Numerical,
            Error::Resource(_) => RducbStatus::Resource,
            Error::BlackBox { .. } | Error::Timeout(_) => RducbStatus::BlackBox,
            Error::Config(_) | Error::Csv(_) => RducbStatus::Parse,
            Error::Io(_) => RducbStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RducbStatus::NullPointer, format!("`{what}` is null"))
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RducbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RducbStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            RducbStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn in_slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null(what))
    } else {
        Ok(std::slice::from_raw_parts(p, n))
    }
}

unsafe fn in_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(RducbStatus::InvalidParameter, format!("`{what}` is not UTF-8")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(RducbStatus::InvalidParameter, "string contains a NUL byte".into()))
}

fn opt_nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rducb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn rducb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn rducb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default edge count for dimension `d`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_edges_for_dim(d: usize, out: *mut usize) -> RducbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if d == 0 {
            return Err(Failure(RducbStatus::InvalidParameter, "d must be at least 1".into()));
        }
        *out = engine::edges_for_dim(d);
        Ok(())
    })
}

/// Exploration weight ½ ln(2t) for round `t ≥ 1`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_beta(t: usize, out: *mut f64) -> RducbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = rducb::beta(t)?;
        Ok(())
    })
}

/// Samples a random tree decomposition of `d` dimensions with `e` edges.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_decomposition_sample(
    d: usize,
    e: usize,
    seed: u64,
    out: *mut *mut RducbDecomposition,
) -> RducbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let g = rducb::sample_random_tree(d, e, &mut ChaCha8Rng::seed_from_u64(seed))?;
        *out = Box::into_raw(Box::new(RducbDecomposition(g)));
        Ok(())
    })
}

/// The tree a run with master seed `seed` samples at round `round`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_decomposition_sample_round(
    d: usize,
    e: usize,
    seed: u64,
    round: u64,
    out: *mut *mut RducbDecomposition,
) -> RducbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let g = rducb::sample_random_tree(d, e, &mut stream_rng(seed, Stream::Tree, round))?;
        *out = Box::into_raw(Box::new(RducbDecomposition(g)));
        Ok(())
    })
}

/// Parses `1,2;3` or one component per line. The result is not validated.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_decomposition_parse(
    d: usize,
    text: *const c_char,
    out: *mut *mut RducbDecomposition,
) -> RducbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let g = Decomposition::parse(d, in_str(text, "text")?).map_err(|e| Failure(RducbStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(RducbDecomposition(g)));
        Ok(())
    })
}

/// `RDUCB_STATUS_OK` when the decomposition is a valid tree decomposition.
///
/// # Safety
/// `g` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rducb_decomposition_validate(g: *const RducbDecomposition) -> RducbStatus {
    guard(|| {
        in_ref(g, "g")?.0.validate().map_err(|e| Failure::from(Error::from(e)))?;
        Ok(())
    })
}

/// # Safety
/// `g` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_decomposition_num_edges(g: *const RducbDecomposition, out: *mut usize) -> RducbStatus {
    guard(|| {
        *out_ref(out, "out")? = in_ref(g, "g")?.0.num_edges();
        Ok(())
    })
}

/// Compact form, e.g. `1,2;3;4`. Free with [`rducb_string_free`].
///
/// # Safety
/// `g` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_decomposition_to_string(g: *const RducbDecomposition, out: *mut *mut c_char) -> RducbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = into_c_string(in_ref(g, "g")?.0.to_string())?;
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn rducb_decomposition_free(g: *mut RducbDecomposition) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Creates a synthetic benchmark such as `stybtang` or `hartmann6`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_benchmark_new(name: *const c_char, d: usize, out: *mut *mut RducbBenchmark) -> RducbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let b = Benchmark::new(in_str(name, "name")?, d)?;
        *out = Box::into_raw(Box::new(RducbBenchmark(b)));
        Ok(())
    })
}

/// # Safety
/// `b` must be a live handle, `x` must hold `len` values and `out` be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_benchmark_eval(b: *const RducbBenchmark, x: *const f64, len: usize, out: *mut f64) -> RducbStatus {
    guard(|| {
        let b = in_ref(b, "b")?;
        let out = out_ref(out, "out")?;
        *out = b.0.eval(in_slice(x, len, "x")?)?;
        Ok(())
    })
}

/// Known optimal value of the benchmark.
///
/// # Safety
/// `b` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_benchmark_optimum(b: *const RducbBenchmark, out: *mut f64) -> RducbStatus {
    guard(|| {
        let b = in_ref(b, "b")?;
        let out = out_ref(out, "out")?;
        *out = b.0.known_optimum().ok_or_else(|| Failure::from(Error::UnknownOptimum(b.0.name().to_string())))?;
        Ok(())
    })
}

/// # Safety
/// `b` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_benchmark_dim(b: *const RducbBenchmark, out: *mut usize) -> RducbStatus {
    guard(|| {
        *out_ref(out, "out")? = in_ref(b, "b")?.0.dim();
        Ok(())
    })
}

/// # Safety
/// `b` must be null or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn rducb_benchmark_free(b: *mut RducbBenchmark) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_run_options_default(out: *mut RducbRunOptions) -> RducbStatus {
    guard(|| {
        let c = RunConfig::default();
        *out_ref(out, "out")? = RducbRunOptions {
            strategy: RducbStrategy::Rducb,
            acquisition: RducbAcquisition::AddUcb,
            budget: c.budget,
            n_init: c.n_init,
            edges: -1,
            beta: f64::NAN,
            grid_size: c.grid_size,
            refine: c.refine,
            seed: c.seed,
            timing: c.timing,
        };
        Ok(())
    })
}

fn to_config(o: &RducbRunOptions) -> RunConfig {
    RunConfig {
        strategy: match o.strategy {
            RducbStrategy::Rducb => Strategy::Rducb,
            RducbStrategy::RandomSearch => Strategy::RandomSearch,
            RducbStrategy::FixedTree => Strategy::FixedTree,
            RducbStrategy::MlTree => Strategy::MlTree,
        },
        acquisition: match o.acquisition {
            RducbAcquisition::AddUcb => AcquisitionFamily::AddUcb,
            RducbAcquisition::AddEi => AcquisitionFamily::AddEi,
        },
        budget: o.budget,
        n_init: o.n_init,
        edges: if o.edges < 0 { EdgeRule::Auto } else { EdgeRule::Fixed(o.edges as usize) },
        beta: if o.beta.is_nan() { BetaSchedule::Standard } else { BetaSchedule::Constant(o.beta) },
        grid_size: o.grid_size,
        refine: o.refine,
        seed: o.seed,
        timing: o.timing,
        ..RunConfig::default()
    }
}

/// Runs one optimisation and stores the trace in `*out`. If the run fails
/// part-way, `*out` still receives the rounds completed so far and must be
/// freed.
unsafe fn run_into(objective: &mut dyn Objective, options: *const RducbRunOptions, out: *mut *mut RducbTrace) -> Result<(), Failure> {
    let out = out_ref(out, "out")?;
    *out = ptr::null_mut();
    let config = to_config(in_ref(options, "options")?);
    match engine::run(&config, objective) {
        Ok(trace) => {
            *out = Box::into_raw(Box::new(RducbTrace(trace)));
            Ok(())
        }
        Err(f) => {
            *out = Box::into_raw(Box::new(RducbTrace(f.partial)));
            let mut failure = Failure::from(f.source);
            failure.1 = format!("round {}: {}", f.round, failure.1);
            Err(failure)
        }
    }
}

/// Optimises a synthetic benchmark. On a failing status `*out` may still
/// hold a partial trace; free it either way.
///
/// # Safety
/// `b` must be a live handle, `options` readable and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_run_benchmark(
    b: *const RducbBenchmark,
    options: *const RducbRunOptions,
    out: *mut *mut RducbTrace,
) -> RducbStatus {
    guard(|| {
        let mut bench = in_ref(b, "b")?.0.clone();
        run_into(&mut bench, options, out)
    })
}

struct CallbackObjective {
    f: unsafe extern "C" fn(*const f64, usize, *mut c_void, *mut f64) -> c_int,
    user_data: *mut c_void,
    bounds: Vec<(f64, f64)>,
    sense: Sense,
    optimum: Option<f64>,
}

impl Objective for CallbackObjective {
    fn name(&self) -> &str {
        "callback"
    }

    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn sense(&self) -> Sense {
        self.sense
    }

    fn known_optimum(&self) -> Option<f64> {
        self.optimum
    }

    fn evaluate(&mut self, x: &[f64]) -> rducb::Result<f64> {
        let mut y = f64::NAN;
        let code = unsafe { (self.f)(x.as_ptr(), x.len(), self.user_data, &mut y) };
        if code != 0 {
            return Err(Error::BlackBox { message: format!("callback returned {code}"), output: String::new() });
        }
        Ok(y)
    }
}

/// Optimises a caller-supplied function over the box `[lower, upper]`.
/// `optimum` may be null when the optimal value is unknown. On a failing
/// status `*out` may still hold a partial trace; free it either way.
///
/// # Safety
/// `lower` and `upper` must hold `d` values, `f` must be safe to call with
/// `user_data` from the calling thread, `options` readable and `out` valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_run_callback(
    f: RducbObjectiveFn,
    user_data: *mut c_void,
    lower: *const f64,
    upper: *const f64,
    d: usize,
    sense: RducbSense,
    optimum: *const f64,
    options: *const RducbRunOptions,
    out: *mut *mut RducbTrace,
) -> RducbStatus {
    guard(|| {
        let f = f.ok_or_else(|| null("f"))?;
        let lo = in_slice(lower, d, "lower")?;
        let hi = in_slice(upper, d, "upper")?;
        let mut obj = CallbackObjective {
            f,
            user_data,
            bounds: lo.iter().copied().zip(hi.iter().copied()).collect(),
            sense: match sense {
                RducbSense::Minimize => Sense::Minimize,
                RducbSense::Maximize => Sense::Maximize,
            },
            optimum: optimum.as_ref().copied(),
        };
        run_into(&mut obj, options, out)
    })
}

/// # Safety
/// `t` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_trace_len(t: *const RducbTrace, out: *mut usize) -> RducbStatus {
    guard(|| {
        *out_ref(out, "out")? = in_ref(t, "t")?.0.len();
        Ok(())
    })
}

/// # Safety
/// `t` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_trace_dim(t: *const RducbTrace, out: *mut usize) -> RducbStatus {
    guard(|| {
        *out_ref(out, "out")? = in_ref(t, "t")?.0.d;
        Ok(())
    })
}

fn record(t: &RegretTrace, i: usize) -> Result<&rducb::RoundRecord, Failure> {
    t.records
        .get(i)
        .ok_or_else(|| Failure(RducbStatus::InvalidParameter, format!("round index {i} out of range (trace has {})", t.len())))
}

/// Round `i` (0-based) of the trace.
///
/// # Safety
/// `t` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_trace_round(t: *const RducbTrace, i: usize, out: *mut RducbRound) -> RducbStatus {
    guard(|| {
        let r = record(&in_ref(t, "t")?.0, i)?;
        *out_ref(out, "out")? = RducbRound {
            round: r.round,
            is_init: r.phase == Phase::Init,
            y: r.y,
            best_y: r.best_y,
            inst_regret: opt_nan(r.inst_regret),
            best_regret: opt_nan(r.best_regret),
            beta: opt_nan(r.beta),
            wall_ms: r.wall_ms,
        };
        Ok(())
    })
}

/// Copies the query point of round `i` into `x`, which holds `len ≥ d` values.
///
/// # Safety
/// `t` must be a live handle and `x` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_trace_x(t: *const RducbTrace, i: usize, x: *mut f64, len: usize) -> RducbStatus {
    guard(|| {
        let r = record(&in_ref(t, "t")?.0, i)?;
        if len < r.x.len() {
            return Err(Failure(RducbStatus::InvalidParameter, format!("buffer holds {len} values, need {}", r.x.len())));
        }
        if x.is_null() {
            return Err(null("x"));
        }
        std::slice::from_raw_parts_mut(x, r.x.len()).copy_from_slice(&r.x);
        Ok(())
    })
}

/// Decomposition used at round `i`; an empty string for initial-design
/// rounds. Free with [`rducb_string_free`].
///
/// # Safety
/// `t` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rducb_trace_decomposition(t: *const RducbTrace, i: usize, out: *mut *mut c_char) -> RducbStatus {
    guard(|| {
        let r = record(&in_ref(t, "t")?.0, i)?;
        let out = out_ref(out, "out")?;
        *out = into_c_string(r.decomposition.clone().unwrap_or_default())?;
        Ok(())
    })
}

/// Writes the trace in the same CSV layout as the command-line tool.
///
/// # Safety
/// `t` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rducb_trace_write_csv(t: *const RducbTrace, path: *const c_char) -> RducbStatus {
    guard(|| {
        let t = in_ref(t, "t")?;
        let path = in_str(path, "path")?;
        let file = File::create(path).map_err(|e| Failure(RducbStatus::Io, format!("{path}: {e}")))?;
        write_trace(BufWriter::new(file), &t.0)?;
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn rducb_trace_free(t: *mut RducbTrace) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}
