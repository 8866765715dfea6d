use std::path::PathBuf;
use std::process::{Command, Output};

use fee_timing::cli::ScenarioFile;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fee-timing"));
    c.env("FEE_TIMING_THREADS", "1");
    c
}

fn scenario(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    p.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o).lines().skip(2).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn shipped_scenarios_round_trip() {
    for name in ["eth-linear.toml", "eth-poisson.toml", "btc-linear.toml", "btc-poisson.toml", "bumping.toml"] {
        let text = std::fs::read_to_string(scenario(name)).unwrap();
        let a = ScenarioFile::parse(&text).unwrap();
        let b = ScenarioFile::parse(&a.to_toml()).unwrap();
        assert_eq!(a.to_toml(), b.to_toml(), "{name}");
        if a.fees.is_some() {
            assert_eq!(a.scenario().unwrap(), b.scenario().unwrap(), "{name}");
        }
    }
}

#[test]
fn every_table_has_metadata_and_header() {
    let eth = scenario("eth-poisson.toml");
    let bump = scenario("bumping.toml");
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["eval", "--scenario", &eth, "--strategy", "nbr"], "strategy,elapsed,fee,broadcast_time,utility,win_prob,fee_rule"),
        (vec!["curve", "--scenario", &eth, "--strategy", "nbr", "--grid", "0:4:2"], "t_elapsed,utility,fee,win_prob"),
        (vec!["ctmc", "--scenario", &bump, "--sweep", "gamma_s=1,2"], "swept_value,utility,residual,state_count"),
        (vec!["simulate", "--scenario", &bump, "--mode", "semi", "--trials", "200"], ""),
    ];
    for (args, header) in cases {
        let o = run(&args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        let mut lines = text.lines();
        let meta = lines.next().unwrap();
        assert!(meta.starts_with("# fee-timing "), "{meta}");
        assert!(meta.contains(" seed=") && meta.contains(" config="), "{meta}");
        let hash = meta.rsplit("config=").next().unwrap();
        assert_eq!(hash.len(), 16);
        let head = lines.next().unwrap();
        if !header.is_empty() {
            assert_eq!(head, header);
        }
        assert!(lines.next().is_some(), "{args:?} has no rows");
    }
}

#[test]
fn eval_reproduces_reference_values() {
    let o = run(&["eval", "--scenario", &scenario("eth-poisson.toml"), "--strategy", "fbr", "--valuation", "4"]);
    assert!(o.status.success());
    let r = &rows(&o)[0];
    assert_eq!(r[0], "fbr");
    assert_eq!(r[6], "threshold-plus-tick");
    let u: f64 = r[4].parse().unwrap();
    assert!((u - 2.211).abs() < 0.03, "{u}");
}

#[test]
fn ctmc_sweep_is_monotone_in_bumping_rate() {
    let o = run(&["ctmc", "--scenario", &scenario("bumping.toml"), "--sweep", "gamma_s=1,2,4,8"]);
    assert!(o.status.success());
    let us: Vec<f64> = rows(&o).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(us.len(), 4);
    assert!(us.windows(2).all(|w| w[1] >= w[0]), "{us:?}");
}

#[test]
fn out_flag_writes_the_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let args = ["simulate", "--scenario", &scenario("eth-linear.toml"), "--trials", "500", "--seed", "3"];
    let direct = run(&args);
    let o = bin().args(args).arg("--out").arg(&path).output().unwrap();
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), direct.stdout);
}

#[test]
fn thread_flag_does_not_change_output() {
    let args = ["simulate", "--scenario", &scenario("btc-poisson.toml"), "--strategy", "ibr", "--elapsed", "2", "--trials", "800"];
    let one = run(&args);
    let many = bin().args(args).args(["--threads", "4"]).output().unwrap();
    assert!(one.status.success() && many.status.success());
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn pool_file_and_inline_pool_agree() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pool.csv");
    std::fs::write(&path, "fee\n3.5\n1.25\n7\n").unwrap();
    let eth = scenario("eth-poisson.toml");
    let base = ["eval", "--scenario", eth.as_str(), "--strategy", "ibr", "--elapsed", "2", "--pool"];
    let from_file = bin().args(base).arg(&path).output().unwrap();
    let inline = run(&[&base[..], &["3.5,1.25,7"]].concat());
    assert!(from_file.status.success(), "{}", String::from_utf8_lossy(&from_file.stderr));
    assert_eq!(rows(&from_file), rows(&inline));
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let eth = scenario("eth-poisson.toml");

    let missing = run(&["eval", "--scenario", "/nonexistent/scenario.toml", "--strategy", "nbr"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("fee-timing: "));

    let broken = dir.path().join("broken.toml");
    std::fs::write(&broken, "capacity = 200\n[interval]\nkind = \"fixed\"\nduration = -1.0\n").unwrap();
    let o = bin().args(["eval", "--scenario"]).arg(&broken).args(["--strategy", "nbr"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&o.stderr));

    assert_eq!(run(&["eval", "--scenario", &eth, "--strategy", "greedy"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "--scenario", &eth, "--strategy", "nbr", "--pool", "1,x"]).status.code(), Some(2));

    // the deadline has passed
    assert_eq!(run(&["eval", "--scenario", &eth, "--strategy", "nbr", "--elapsed", "10"]).status.code(), Some(3));
    // no fee-bumping section
    assert_eq!(run(&["ctmc", "--scenario", &eth]).status.code(), Some(3));
    assert_eq!(run(&["eval", "--scenario", &eth, "--strategy", "nbr", "--valuation=-1"]).status.code(), Some(3));

    let abstain = run(&["eval", "--scenario", &eth, "--strategy", "fixed:9"]);
    assert_eq!(abstain.status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_with_four() {
    assert_eq!(fee_timing::Error::Numerical("x".into()).exit_code(), 4);
    assert_eq!(fee_timing::Error::Parse("x".into()).exit_code(), 2);
    assert_eq!(fee_timing::Error::InvalidState("x".into()).exit_code(), 3);
}

#[test]
fn help_lists_subcommands() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for sub in ["eval", "curve", "ctmc", "simulate", "FEE_TIMING_THREADS"] {
        assert!(text.contains(sub), "{sub}");
    }
}
