use std::ffi::{CStr, CString};
use std::ptr;

use fee_timing_ffi::*;

const ETH: &str = r#"
capacity = 200
valuation = 2.0

[interval]
kind = "fixed"
duration = 10.0

[arrivals]
kind = "linear"
rate = 40.0

[fees]
kind = "pareto"
min = 1.0
mean = 5.9512
"#;

const BUMP: &str = r#"
capacity = 3

[interval]
kind = "exponential"
rate = 0.5

[semi_strategic]
n = 10
gamma = 1.0
gamma_s = 4.0
v_hat = 8
"#;

fn scenario(text: &str) -> *mut FtScenario {
    let text = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    let st = unsafe { ft_scenario_from_toml(text.as_ptr(), &mut out) };
    assert_eq!(st, FtStatus::Ok);
    assert!(!out.is_null());
    out
}

fn last_error() -> String {
    let p = ft_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn nbr_matches_library() {
    let s = scenario(ETH);
    let mut d = FtDecision::default();
    assert_eq!(unsafe { ft_nbr_optimize(s, 0.0, &mut d) }, FtStatus::Ok);
    assert!((d.expected_utility - 0.1236).abs() < 1e-3, "{d:?}");
    assert!(ft_last_error().is_null());
    unsafe { ft_scenario_free(s) };
}

#[test]
fn pool_functions_accept_empty_and_explicit_pools() {
    let s = scenario(ETH);
    let mut d = FtDecision::default();
    assert_eq!(unsafe { ft_ibr_optimize(s, ptr::null(), 0, 2.0, &mut d) }, FtStatus::Ok);
    let fees = [1.5, 2.5, 3.0];
    let mut d2 = FtDecision::default();
    assert_eq!(unsafe { ft_fbr_decide(s, fees.as_ptr(), fees.len(), 2.0, &mut d2) }, FtStatus::Ok);
    assert_eq!(d2.broadcast_time, 10.0);
    let mut w = 0.0;
    assert_eq!(unsafe { ft_pos_wait_expected_utility(s, fees.as_ptr(), fees.len(), 2.0, &mut w) }, FtStatus::Ok);
    assert!((w - d2.expected_utility).abs() < 1e-12);
    unsafe { ft_scenario_free(s) };
}

#[test]
fn errors_map_to_status_codes() {
    let bad = CString::new("capacity = 0").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ft_scenario_from_toml(bad.as_ptr(), &mut out) }, FtStatus::Parse);
    assert!(out.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { ft_scenario_from_toml(ptr::null(), &mut out) }, FtStatus::NullPointer);
    assert!(last_error().contains("null"));

    let s = scenario(ETH);
    let mut d = FtDecision::default();
    // the block is already due
    assert_eq!(unsafe { ft_nbr_optimize(s, 10.0, &mut d) }, FtStatus::Domain);
    assert_eq!(unsafe { ft_nbr_optimize(s, 0.0, ptr::null_mut()) }, FtStatus::NullPointer);
    assert_eq!(unsafe { ft_ibr_optimize(s, ptr::null(), 3, 0.0, &mut d) }, FtStatus::NullPointer);

    let mut u = 0.0;
    assert_eq!(unsafe { ft_ctmc_expected_utility(s, &mut u) }, FtStatus::Domain);

    let strat = CString::new("sometimes").unwrap();
    let mut r = FtReport::default();
    assert_eq!(unsafe { ft_simulate_oblivious(s, strat.as_ptr(), 0.0, 10, 1, &mut r) }, FtStatus::Parse);
    let invalid = [0xffu8, 0];
    assert_eq!(
        unsafe { ft_simulate_oblivious(s, invalid.as_ptr().cast(), 0.0, 10, 1, &mut r) },
        FtStatus::InvalidArgument
    );
    unsafe { ft_scenario_free(s) };
    unsafe { ft_scenario_free(ptr::null_mut()) };
}

#[test]
fn bumping_game_chain_and_simulation_agree() {
    let s = scenario(BUMP);
    let mut u = 0.0;
    assert_eq!(unsafe { ft_ctmc_expected_utility(s, &mut u) }, FtStatus::Ok);
    let mut r = FtReport::default();
    assert_eq!(unsafe { ft_simulate_semi(s, 20_000, 3, &mut r) }, FtStatus::Ok);
    assert_eq!((r.trials, r.seed), (20_000, 3));
    assert!((r.mean_utility - u).abs() < 4.0 * r.utility_stderr, "{r:?} vs {u}");
    unsafe { ft_scenario_free(s) };
}

#[test]
fn simulation_is_reproducible() {
    let s = scenario(ETH);
    let strat = CString::new("baseline").unwrap();
    let (mut a, mut b) = (FtReport::default(), FtReport::default());
    unsafe {
        assert_eq!(ft_simulate_oblivious(s, strat.as_ptr(), 0.0, 2000, 9, &mut a), FtStatus::Ok);
        assert_eq!(ft_simulate_oblivious(s, strat.as_ptr(), 0.0, 2000, 9, &mut b), FtStatus::Ok);
        ft_scenario_free(s);
    }
    assert_eq!(a.mean_utility.to_bits(), b.mean_utility.to_bits());
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/fee_timing.h")).unwrap();
    for name in [
        "ft_scenario_from_toml",
        "ft_scenario_free",
        "ft_last_error",
        "ft_nbr_optimize",
        "ft_ibr_optimize",
        "ft_fbr_decide",
        "ft_pos_wait_expected_utility",
        "ft_ctmc_expected_utility",
        "ft_simulate_oblivious",
        "ft_simulate_semi",
        "typedef struct FtScenario FtScenario",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
