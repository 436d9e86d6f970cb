//! C ABI over `gmib-engine`.
//!
//! Every fallible function returns a [`GmibStatus`] and writes results
//! through out-pointers. On failure, [`gmib_last_error_message`] returns a
//! description of the most recent error on the calling thread. Simulation
//! state lives behind the opaque [`GmibModel`] handle, created by
//! [`gmib_model_new`] and released with [`gmib_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use gmib_engine::regression::{fit_polynomial, nested_f_test};
use gmib_engine::{
    annuity_factor, benefit_base, estimate_value, exercise_probability, expected_terminal_mean,
    fair_guarantee_rate, simulate_terminal, AnnuityTiming, BbRateMode, ContractTerms, CriticalStatus,
    Error, FairRateOptions, FeeStructure, MarketModel, ResetScenario, SimPlan,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmibStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoRoot = 3,
    OutOfRange = 4,
    Allocation = 5,
    ContractViolation = 6,
    SingularFit = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmibFeeStructure {
    F1 = 0,
    F2 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmibAnnuityTiming {
    Due = 0,
    Immediate = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmibBbRateMode {
    Extension = 0,
    Contract = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmibCriticalStatus {
    Found = 0,
    BelowRange = 1,
    AboveRange = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GmibContractParams {
    pub premium: f64,
    pub horizon: u32,
    pub roll_up_rate: f64,
    pub payment_rate: f64,
    pub fee_rate: f64,
    pub fee_structure: GmibFeeStructure,
    pub annuity_term: u32,
    pub annuity_timing: GmibAnnuityTiming,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GmibMarketParams {
    pub rate: f64,
    pub sigma: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GmibSimParams {
    pub n_paths: usize,
    pub seed: u64,
    pub n_workers: usize,
    pub antithetic: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GmibValuation {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GmibFairRate {
    pub g_star: f64,
    pub bracket_low: f64,
    pub bracket_high: f64,
    pub residual: f64,
    pub iterations: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GmibCriticalRate {
    /// NaN unless `status` is `GMIB_CRITICAL_STATUS_FOUND`.
    pub r_star: f64,
    pub status: GmibCriticalStatus,
    pub d_low: f64,
    pub d_high: f64,
    pub iterations: u32,
    pub strictly_increasing: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GmibPolyFitStats {
    pub r_squared: f64,
    pub adjusted_r_squared: f64,
    pub residual_sum_squares: f64,
    pub n_points: usize,
}

/// Contract, market and simulation plan for repeated valuations.
pub struct GmibModel {
    terms: ContractTerms,
    market: MarketModel,
    plan: SimPlan,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> GmibStatus {
    match err {
        Error::InvalidParameter { .. } | Error::Domain(_) => GmibStatus::InvalidArgument,
        Error::ContractViolation(_) => GmibStatus::ContractViolation,
        Error::Allocation { .. } => GmibStatus::Allocation,
        Error::NoRoot { .. } => GmibStatus::NoRoot,
        Error::SingularFit(_) => GmibStatus::SingularFit,
    }
}

fn fail(status: GmibStatus, message: impl Into<String>) -> GmibStatus {
    set_last_error(message.into());
    status
}

/// Runs `body`, mapping errors and panics to status codes.
fn guard(body: impl FnOnce() -> Result<(), GmibStatus>) -> GmibStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GmibStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => fail(GmibStatus::Panic, "internal panic"),
    }
}

fn engine<T>(r: gmib_engine::Result<T>) -> Result<T, GmibStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, GmibStatus> {
    // SAFETY: the caller guarantees that non-null pointers are valid.
    unsafe { p.as_ref() }.ok_or_else(|| fail(GmibStatus::NullPointer, format!("`{name}` is NULL")))
}

fn non_null_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, GmibStatus> {
    // SAFETY: as above; out-pointers must be writable.
    unsafe { p.as_mut() }.ok_or_else(|| fail(GmibStatus::NullPointer, format!("`{name}` is NULL")))
}

fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], GmibStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(GmibStatus::NullPointer, format!("`{name}` is NULL")));
    }
    // SAFETY: the caller guarantees `p` points to `len` readable doubles.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn slice_mut<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], GmibStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(GmibStatus::NullPointer, format!("`{name}` is NULL")));
    }
    // SAFETY: the caller guarantees `p` points to `len` writable doubles.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

impl From<&GmibContractParams> for ContractTerms {
    fn from(p: &GmibContractParams) -> Self {
        ContractTerms {
            premium: p.premium,
            horizon: p.horizon,
            roll_up_rate: p.roll_up_rate,
            payment_rate: p.payment_rate,
            fee_rate: p.fee_rate,
            fee_structure: match p.fee_structure {
                GmibFeeStructure::F1 => FeeStructure::F1,
                GmibFeeStructure::F2 => FeeStructure::F2,
            },
            annuity_term: p.annuity_term,
            annuity_timing: timing(p.annuity_timing),
        }
    }
}

fn timing(t: GmibAnnuityTiming) -> AnnuityTiming {
    match t {
        GmibAnnuityTiming::Due => AnnuityTiming::Due,
        GmibAnnuityTiming::Immediate => AnnuityTiming::Immediate,
    }
}

/// Fills `out` with the baseline contract (S0 = 100000, T = 20, r_g = 5%,
/// g = 6.5%, c = 0.7%, F1, 20-year annuity-due).
#[no_mangle]
pub extern "C" fn gmib_contract_defaults(out: *mut GmibContractParams) -> GmibStatus {
    guard(|| {
        let d = ContractTerms::default();
        *non_null_mut(out, "out")? = GmibContractParams {
            premium: d.premium,
            horizon: d.horizon,
            roll_up_rate: d.roll_up_rate,
            payment_rate: d.payment_rate,
            fee_rate: d.fee_rate,
            fee_structure: GmibFeeStructure::F1,
            annuity_term: d.annuity_term,
            annuity_timing: GmibAnnuityTiming::Due,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn gmib_market_defaults(out: *mut GmibMarketParams) -> GmibStatus {
    guard(|| {
        let d = MarketModel::default();
        *non_null_mut(out, "out")? = GmibMarketParams {
            rate: d.rate,
            sigma: d.sigma,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn gmib_sim_defaults(out: *mut GmibSimParams) -> GmibStatus {
    guard(|| {
        let d = SimPlan::default();
        *non_null_mut(out, "out")? = GmibSimParams {
            n_paths: d.n_paths,
            seed: d.master_seed,
            n_workers: d.n_workers,
            antithetic: d.antithetic,
        };
        Ok(())
    })
}

/// Validates the parameters and allocates a model handle into `*out`.
///
/// # Safety
/// Non-null pointers must be valid for reads (params) or writes (`out`).
#[no_mangle]
pub unsafe extern "C" fn gmib_model_new(
    contract: *const GmibContractParams,
    market: *const GmibMarketParams,
    sim: *const GmibSimParams,
    out: *mut *mut GmibModel,
) -> GmibStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = std::ptr::null_mut();
        let terms = ContractTerms::from(non_null(contract, "contract")?);
        let m = non_null(market, "market")?;
        let market = MarketModel {
            rate: m.rate,
            sigma: m.sigma,
        };
        let s = non_null(sim, "sim")?;
        let plan = SimPlan {
            n_paths: s.n_paths,
            master_seed: s.seed,
            n_workers: s.n_workers,
            antithetic: s.antithetic,
        };
        engine(terms.validate())?;
        engine(market.validate())?;
        engine(plan.validate())?;
        *out = Box::into_raw(Box::new(GmibModel { terms, market, plan }));
        Ok(())
    })
}

/// Releases a handle from [`gmib_model_new`]. NULL is ignored.
///
/// # Safety
/// `model` must come from [`gmib_model_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gmib_model_free(model: *mut GmibModel) {
    if !model.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gmib_model_set_payment_rate(model: *mut GmibModel, g: f64) -> GmibStatus {
    guard(|| {
        let m = non_null_mut(model, "model")?;
        let terms = m.terms.with_payment_rate(g);
        engine(terms.validate())?;
        m.terms = terms;
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gmib_model_set_fee_rate(model: *mut GmibModel, c: f64) -> GmibStatus {
    guard(|| {
        let m = non_null_mut(model, "model")?;
        let terms = m.terms.with_fee_rate(c);
        engine(terms.validate())?;
        m.terms = terms;
        Ok(())
    })
}

/// Present value of `n_payments` annual payments of 1.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gmib_annuity_factor(
    rate: f64,
    n_payments: u32,
    timing_kind: GmibAnnuityTiming,
    out: *mut f64,
) -> GmibStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = engine(annuity_factor(rate, n_payments, timing(timing_kind)))?;
        Ok(())
    })
}

/// Benefit base at the horizon, valued at the contract rate.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmib_benefit_base(model: *const GmibModel, out: *mut f64) -> GmibStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let out = non_null_mut(out, "out")?;
        *out = engine(benefit_base(&m.terms, m.market.rate, m.terms.horizon))?;
        Ok(())
    })
}

/// Closed-form mean of the unfloored terminal account.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmib_expected_terminal_mean(model: *const GmibModel, out: *mut f64) -> GmibStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let out = non_null_mut(out, "out")?;
        *out = engine(expected_terminal_mean(&m.terms, &m.market, None))?;
        Ok(())
    })
}

/// Writes the `n_paths` terminal account values into `values`.
/// `len` must equal the model's path count.
///
/// # Safety
/// `values` must hold `len` writable doubles; `floored` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn gmib_terminal_sample(
    model: *const GmibModel,
    values: *mut f64,
    len: usize,
    floored: *mut usize,
) -> GmibStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        if len != m.plan.n_paths {
            return Err(fail(
                GmibStatus::InvalidArgument,
                format!("buffer holds {len} values, model has {} paths", m.plan.n_paths),
            ));
        }
        let buf = slice_mut(values, len, "values")?;
        let sample = engine(simulate_terminal(&m.terms, &m.market, &m.plan, None))?;
        buf.copy_from_slice(&sample.values);
        if !floored.is_null() {
            // SAFETY: checked non-null; caller guarantees writability.
            unsafe { *floored = sample.floored_paths };
        }
        Ok(())
    })
}

fn valuation(
    model: *const GmibModel,
    out: *mut GmibValuation,
    f: fn(&ContractTerms, &MarketModel, &gmib_engine::TerminalSample) -> gmib_engine::Result<gmib_engine::ValuationResult>,
) -> GmibStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let out = non_null_mut(out, "out")?;
        let sample = engine(simulate_terminal(&m.terms, &m.market, &m.plan, None))?;
        let v = engine(f(&m.terms, &m.market, &sample))?;
        *out = GmibValuation {
            estimate: v.estimate,
            std_error: v.std_error,
            n_paths: v.n_paths,
        };
        Ok(())
    })
}

/// Monte Carlo value of the rider, `E[(1 + r)^{-T} max(BB, S_f)]`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmib_price(model: *const GmibModel, out: *mut GmibValuation) -> GmibStatus {
    valuation(model, out, estimate_value)
}

/// Probability that the benefit base is at least the account at the horizon.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmib_exercise_probability(model: *const GmibModel, out: *mut GmibValuation) -> GmibStatus {
    valuation(model, out, exercise_probability)
}

/// Fair payment rate for the model's fee rate, searching from
/// `[low, high]` with bracket width `tolerance_g`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmib_fair_rate(
    model: *const GmibModel,
    low: f64,
    high: f64,
    tolerance_g: f64,
    out: *mut GmibFairRate,
) -> GmibStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let out = non_null_mut(out, "out")?;
        let options = FairRateOptions {
            bracket: (low, high),
            tolerance_g,
            ..FairRateOptions::default()
        };
        let r = engine(fair_guarantee_rate(&m.terms, &m.market, &m.plan, &options))?;
        *out = GmibFairRate {
            g_star: r.g_star,
            bracket_low: r.bracket.0,
            bracket_high: r.bracket.1,
            residual: r.residual,
            iterations: r.iterations,
        };
        Ok(())
    })
}

/// Critical extension-year rate. `grid` may be NULL for the default
/// `0.00..=0.15` grid. An out-of-range result still fills `out` and
/// returns `GMIB_STATUS_OUT_OF_RANGE`.
///
/// # Safety
/// `grid` must hold `grid_len` doubles when non-null; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gmib_critical_rate(
    model: *const GmibModel,
    grid: *const f64,
    grid_len: usize,
    bb_rate_mode: GmibBbRateMode,
    charge_extension_fees: bool,
    out: *mut GmibCriticalRate,
) -> GmibStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let out = non_null_mut(out, "out")?;
        let mut scenario = ResetScenario::new(m.terms, m.market);
        if !grid.is_null() {
            scenario.rate_grid = slice(grid, grid_len, "grid")?.to_vec();
        }
        scenario.bb_rate_mode = match bb_rate_mode {
            GmibBbRateMode::Extension => BbRateMode::AtExtensionRate,
            GmibBbRateMode::Contract => BbRateMode::AtContractRate,
        };
        scenario.charge_extension_fees = charge_extension_fees;
        let r = engine(gmib_engine::critical_rate(&scenario, &m.plan))?;
        *out = GmibCriticalRate {
            r_star: r.r_star.unwrap_or(f64::NAN),
            status: match r.status {
                CriticalStatus::Found => GmibCriticalStatus::Found,
                CriticalStatus::BelowRange => GmibCriticalStatus::BelowRange,
                CriticalStatus::AboveRange => GmibCriticalStatus::AboveRange,
            },
            d_low: r.d_low,
            d_high: r.d_high,
            iterations: r.iterations,
            strictly_increasing: r.strictly_increasing,
        };
        if r.status != CriticalStatus::Found {
            return Err(fail(
                GmibStatus::OutOfRange,
                format!("no crossing on the rate grid ({})", r.status.as_str()),
            ));
        }
        Ok(())
    })
}

/// Least-squares polynomial of `degree`. Coefficients are written highest
/// power first into `coefficients`, which must hold `degree + 1` values.
///
/// # Safety
/// `xs` and `ys` must hold `n` doubles; `coefficients` `coefficients_len`
/// writable doubles; `stats` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn gmib_fit_polynomial(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    degree: usize,
    coefficients: *mut f64,
    coefficients_len: usize,
    stats: *mut GmibPolyFitStats,
) -> GmibStatus {
    guard(|| {
        if coefficients_len != degree + 1 {
            return Err(fail(GmibStatus::InvalidArgument, "coefficients_len must be degree + 1"));
        }
        let points = points(xs, ys, n)?;
        let coeffs = slice_mut(coefficients, coefficients_len, "coefficients")?;
        let fit = engine(fit_polynomial(&points, degree))?;
        coeffs.copy_from_slice(&fit.coefficients);
        if !stats.is_null() {
            // SAFETY: checked non-null; caller guarantees writability.
            unsafe {
                *stats = GmibPolyFitStats {
                    r_squared: fit.r_squared,
                    adjusted_r_squared: fit.adjusted_r_squared,
                    residual_sum_squares: fit.residual_sum_squares,
                    n_points: fit.n_points,
                };
            }
        }
        Ok(())
    })
}

/// Nested-model F-test p-value for `high_degree` against `low_degree`.
///
/// # Safety
/// `xs` and `ys` must hold `n` doubles; `p_value` writable; `degenerate`
/// may be NULL.
#[no_mangle]
pub unsafe extern "C" fn gmib_nested_f_test(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    low_degree: usize,
    high_degree: usize,
    p_value: *mut f64,
    degenerate: *mut bool,
) -> GmibStatus {
    guard(|| {
        let points = points(xs, ys, n)?;
        let p_out = non_null_mut(p_value, "p_value")?;
        let low = engine(fit_polynomial(&points, low_degree))?;
        let high = engine(fit_polynomial(&points, high_degree))?;
        let test = engine(nested_f_test(&low, &high))?;
        *p_out = test.p_value;
        if !degenerate.is_null() {
            // SAFETY: checked non-null; caller guarantees writability.
            unsafe { *degenerate = test.degenerate };
        }
        Ok(())
    })
}

fn points(xs: *const f64, ys: *const f64, n: usize) -> Result<Vec<(f64, f64)>, GmibStatus> {
    let xs = slice(xs, n, "xs")?;
    let ys = slice(ys, n, "ys")?;
    Ok(xs.iter().copied().zip(ys.iter().copied()).collect())
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`) and returns the full message length plus
/// one. Returns 0 when there is no error.
///
/// # Safety
/// `buf` must hold `len` writable bytes, or be NULL with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn gmib_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            // SAFETY: `n <= len` and `buf` holds `len` bytes.
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gmib_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
