//! C interface to the fee-timing engine.
//!
//! Every function returns an [`FtStatus`]; on failure the message is
//! available from [`ft_last_error`] on the same thread. Scenarios are opaque
//! handles created from TOML text and released with [`ft_scenario_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fee_timing::cli::ScenarioFile;
use fee_timing::ctmc;
use fee_timing::model::MempoolSnapshot;
use fee_timing::sim::{self, SimulationReport};
use fee_timing::strategy::{self, Strategy, StrategyDecision};
use fee_timing::Error;

/// Result codes; values match the command-line exit codes where they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtStatus {
    Ok = 0,
    Parse = 2,
    Domain = 3,
    Numerical = 4,
    NullPointer = 5,
    InvalidArgument = 6,
    Internal = 7,
}

/// Opaque scenario handle.
pub struct FtScenario {
    file: ScenarioFile,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FtDecision {
    pub fee: f64,
    pub broadcast_time: f64,
    pub expected_utility: f64,
    pub inclusion_probability: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FtReport {
    pub trials: u64,
    pub mean_utility: f64,
    pub utility_stderr: f64,
    pub inclusion_rate: f64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FtStatus {
    match e {
        Error::Parse(_) => FtStatus::Parse,
        Error::Domain(_) | Error::InvalidState(_) | Error::Config(_) => FtStatus::Domain,
        Error::Numerical(_) => FtStatus::Numerical,
    }
}

enum Fail {
    Core(Error),
    Null(&'static str),
    Arg(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FtStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FtStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            FtStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            FtStatus::InvalidArgument
        }
        Err(_) => {
            set_error("internal panic".to_string());
            FtStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn pool_from(fees: *const f64, len: usize, elapsed: f64) -> Result<MempoolSnapshot, Fail> {
    let fees = if len == 0 {
        Vec::new()
    } else if fees.is_null() {
        return Err(Fail::Null("fees"));
    } else {
        std::slice::from_raw_parts(fees, len).to_vec()
    };
    Ok(MempoolSnapshot::new(fees, elapsed)?)
}

fn decision(d: &StrategyDecision) -> FtDecision {
    FtDecision {
        fee: d.fee,
        broadcast_time: d.broadcast_time,
        expected_utility: d.expected_utility,
        inclusion_probability: d.inclusion_probability,
    }
}

fn report(r: &SimulationReport) -> FtReport {
    FtReport {
        trials: r.trials,
        mean_utility: r.mean_utility,
        utility_stderr: r.utility_stderr,
        inclusion_rate: r.inclusion_rate,
        seed: r.seed,
    }
}

/// Parses a scenario from NUL-terminated TOML. On success `*out` owns a new
/// handle.
///
/// # Safety
/// `toml` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_scenario_from_toml(toml: *const c_char, out: *mut *mut FtScenario) -> FtStatus {
    guard(|| {
        let out = out_mut(out, "out")?;
        *out = ptr::null_mut();
        let text = c_str(toml, "toml")?;
        let file = ScenarioFile::parse(text)?;
        *out = Box::into_raw(Box::new(FtScenario { file }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `scenario` must come from [`ft_scenario_from_toml`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn ft_scenario_free(scenario: *mut FtScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Last error message on this thread, or null. Valid until the next call
/// into this library from the same thread.
#[no_mangle]
pub extern "C" fn ft_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Best fee posted now without looking at the pool.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ft_nbr_optimize(scenario: *const FtScenario, elapsed: f64, out: *mut FtDecision) -> FtStatus {
    guard(|| {
        let s = deref(scenario, "scenario")?.file.scenario()?;
        let out = out_mut(out, "out")?;
        *out = decision(&strategy::nbr_optimize(&s, elapsed)?);
        Ok(())
    })
}

/// Best fee posted now given the pending fees.
///
/// # Safety
/// `fees` must point to `len` doubles (or be null with `len == 0`).
#[no_mangle]
pub unsafe extern "C" fn ft_ibr_optimize(
    scenario: *const FtScenario,
    fees: *const f64,
    len: usize,
    elapsed: f64,
    out: *mut FtDecision,
) -> FtStatus {
    guard(|| {
        let s = deref(scenario, "scenario")?.file.scenario()?;
        let pool = pool_from(fees, len, elapsed)?;
        let out = out_mut(out, "out")?;
        *out = decision(&strategy::ibr_optimize(&s, &pool)?);
        Ok(())
    })
}

/// Fee and broadcast time of the best-response policy that may wait.
///
/// # Safety
/// As for [`ft_ibr_optimize`].
#[no_mangle]
pub unsafe extern "C" fn ft_fbr_decide(
    scenario: *const FtScenario,
    fees: *const f64,
    len: usize,
    elapsed: f64,
    out: *mut FtDecision,
) -> FtStatus {
    guard(|| {
        let s = deref(scenario, "scenario")?.file.scenario()?;
        let pool = pool_from(fees, len, elapsed)?;
        let out = out_mut(out, "out")?;
        *out = decision(&strategy::fbr_decide(&s, &pool)?);
        Ok(())
    })
}

/// Expected utility of waiting until the deadline of a fixed-interval block.
///
/// # Safety
/// As for [`ft_ibr_optimize`].
#[no_mangle]
pub unsafe extern "C" fn ft_pos_wait_expected_utility(
    scenario: *const FtScenario,
    fees: *const f64,
    len: usize,
    elapsed: f64,
    out: *mut f64,
) -> FtStatus {
    guard(|| {
        let s = deref(scenario, "scenario")?.file.scenario()?;
        let pool = pool_from(fees, len, elapsed)?;
        let out = out_mut(out, "out")?;
        *out = strategy::pos_wait_expected_utility(&s, &pool)?;
        Ok(())
    })
}

/// Per-round expected utility of the strategic user in the fee-bumping game
/// described by the scenario's `[semi_strategic]` section.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ft_ctmc_expected_utility(scenario: *const FtScenario, out: *mut f64) -> FtStatus {
    guard(|| {
        let p = deref(scenario, "scenario")?.file.ctmc_params()?;
        let out = out_mut(out, "out")?;
        let dist = ctmc::solve(&p)?;
        *out = ctmc::expected_utility_per_round(&p, &dist);
        Ok(())
    })
}

/// Simulates one oblivious strategy (`"nbr"`, `"ibr"`, `"fbr"`, `"baseline"`
/// or `"fixed:<fee>"`), drawing a fresh pool per trial.
///
/// # Safety
/// `strategy` must be a valid C string; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ft_simulate_oblivious(
    scenario: *const FtScenario,
    strategy: *const c_char,
    elapsed: f64,
    trials: u64,
    seed: u64,
    out: *mut FtReport,
) -> FtStatus {
    guard(|| {
        let s = deref(scenario, "scenario")?.file.scenario()?;
        let strategy: Strategy = c_str(strategy, "strategy")?.parse()?;
        let out = out_mut(out, "out")?;
        *out = report(&sim::simulate_oblivious(&s, strategy, elapsed, trials, seed)?);
        Ok(())
    })
}

/// Simulates rounds of the fee-bumping game.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ft_simulate_semi(
    scenario: *const FtScenario,
    trials: u64,
    seed: u64,
    out: *mut FtReport,
) -> FtStatus {
    guard(|| {
        let p = deref(scenario, "scenario")?.file.ctmc_params()?;
        let out = out_mut(out, "out")?;
        *out = report(&sim::simulate_semi_strategic(&p, trials, seed)?);
        Ok(())
    })
}
