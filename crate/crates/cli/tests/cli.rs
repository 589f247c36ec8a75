//! End-to-end runs of the `flatmaj` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture {
            dir: tempfile::tempdir().unwrap(),
        };
        f.write("unit.json", r#"{"blocks":[{"p":1,"q":1,"F":1}]}"#);
        f.write(
            "dust.json",
            r#"{"label":"with dust","blocks":[{"p":0.999,"q":0.999,"F":0.1},{"p":0.001,"q":0,"F":null},{"p":0,"q":0.001,"F":null}]}"#,
        );
        f.write("half.json", r#"{"blocks":[{"p":1,"q":1,"F":0.5}]}"#);
        f.write("tenth.json", r#"{"blocks":[{"p":1,"q":1,"F":0.1}]}"#);
        f.write("two.json", r#"{"blocks":[{"p":0.5,"q":0.3,"F":0.4},{"p":0.5,"q":0.7,"F":0.8}]}"#);
        f.write("bad.json", r#"{"blocks":[{"p":-0.5,"q":1,"F":0.5}]}"#);
        f
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).display().to_string()
    }
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flatmaj"));
    cmd.args(args).env_remove("FLATMAJ_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn entropy_of_unit_pair_is_zero() {
    let f = Fixture::new();
    let out = run(&["entropy", "--pair", &f.path("unit.json"), "--alpha", "0.5", "--z", "1"]);
    assert_eq!(code(&out), 0);
    let v = report(&out);
    assert_eq!(v["schema"], "1.0.0");
    assert_eq!(v["result"]["d_hat"], 0.0);
    assert_eq!(v["result"]["phi"], 1.0);
}

#[test]
fn tropical_entropy() {
    let f = Fixture::new();
    let out = run(&["entropy", "--pair", &f.path("half.json"), "--alpha", "0.3", "--tropical"]);
    assert_eq!(code(&out), 0);
    let d = report(&out)["result"]["d_hat"].as_f64().unwrap();
    assert!((d - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn self_rate_is_one() {
    let f = Fixture::new();
    let a = f.path("two.json");
    let out = run(&["rate", "--in", &a, "--out", &a]);
    assert_eq!(code(&out), 0);
    let v = report(&out);
    assert!((v["result"]["rate"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v["criterion"], "rates");
}

#[test]
fn exact_check_verdicts() {
    let f = Fixture::new();
    let out = run(&["check", "--in", &f.path("dust.json"), "--out", &f.path("half.json")]);
    assert_eq!(code(&out), 0);
    let v = report(&out);
    assert_eq!(v["result"]["kind"], "strict");
    assert_eq!(v["criterion"], "large-sample");
    let out = run(&["check", "--in", &f.path("half.json"), "--out", &f.path("tenth.json")]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["result"]["kind"], "fails");
}

#[test]
fn grid_flag_reaches_the_minimizer() {
    let f = Fixture::new();
    let out = run(&["check", "--in", &f.path("dust.json"), "--out", &f.path("half.json"), "--grid", "16"]);
    let v = report(&out);
    assert_eq!(v["config"]["grid_size"], 16);
    assert_eq!(v["result"]["grid_stats"]["grid"], 16);
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    assert_eq!(code(&out), 0);
    let v = report(&out);
    assert_eq!(v["result"]["passed"], v["result"]["total"]);
}

#[test]
fn unknown_flag_prints_usage() {
    let out = run(&["rate", "--bogus"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(code(&run(&[])), 3);
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("oracle"));
}

#[test]
fn malformed_inputs_exit_three() {
    let f = Fixture::new();
    let out = run(&["rate", "--in", &f.path("bad.json"), "--out", &f.path("half.json")]);
    assert_eq!(code(&out), 3);
    assert_eq!(report(&out)["error"]["kind"], "malformed");
    let out = run(&["rate", "--in", &f.path("missing.json"), "--out", &f.path("half.json")]);
    assert_eq!(code(&out), 3);
    f.write("junk.json", "{not json");
    assert_eq!(code(&run(&["rate", "--in", &f.path("junk.json"), "--out", &f.path("half.json")])), 3);
    assert_eq!(code(&run(&["selftest", "--grid", "4"])), 3);
    assert_eq!(code(&run_env(&["selftest"], &[("FLATMAJ_THREADS", "zero")])), 3);
}

#[test]
fn hypothesis_violations_exit_two() {
    let f = Fixture::new();
    let out = run(&["channel", "uhlmann", "--fin", "0.6", "--fout", "0.3"]);
    assert_eq!(code(&out), 2);
    assert!(report(&out)["error"]["message"].as_str().unwrap().contains("overlap"));
    let out = run(&["check", "--mode", "asymptotic", "--in", &f.path("unit.json"), "--out", &f.path("half.json")]);
    assert_eq!(code(&out), 2);
}

#[test]
fn inconclusive_oracle_exits_four() {
    let f = Fixture::new();
    let out = run(&["oracle", "--in", &f.path("half.json"), "--out", &f.path("tenth.json"), "--iters", "300"]);
    assert_eq!(code(&out), 4);
    let v = report(&out);
    assert_eq!(v["result"]["status"], "undetermined");
    assert!(v["result"].get("channel").is_none());
}

#[test]
fn oracle_emits_channel_on_request() {
    let f = Fixture::new();
    let out = run(&["oracle", "--in", &f.path("tenth.json"), "--out", &f.path("half.json"), "--emit-channel"]);
    assert_eq!(code(&out), 0);
    let v = report(&out);
    assert_eq!(v["result"]["status"], "feasible");
    assert_eq!(v["result"]["channel"]["dim_in"], 2);
    assert!(!v["result"]["channel"]["kraus"].as_array().unwrap().is_empty());
}

#[test]
fn certify_finds_single_copy_conversion() {
    let f = Fixture::new();
    let out = run(&["certify", "--in", &f.path("tenth.json"), "--out", &f.path("half.json"), "--rate", "1/1", "--nmax", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["result"]["n"], 1);
}

#[test]
fn channel_constructions_emit_kraus_operators() {
    let f = Fixture::new();
    let out = run(&["channel", "uhlmann", "--fin", "0.2", "--fout", "0.7"]);
    assert_eq!(code(&out), 0);
    let v = report(&out);
    assert_eq!(v["result"]["check"]["passes"], true);
    let k = &v["result"]["channel"]["kraus"][0];
    assert_eq!(k["dim"], 2);
    assert_eq!(k["entries"].as_array().unwrap().len(), 4);

    let out = run(&["channel", "power-universal", "--F", "0.5", "--target", &f.path("two.json")]);
    assert_eq!(code(&out), 0);
    let v = report(&out);
    assert!(v["result"]["residual"].as_f64().unwrap() <= 1e-6);
    assert!(v["result"]["channel"]["kraus"].is_array());
}

#[test]
fn smoothing_makes_marginal_target_strict() {
    let f = Fixture::new();
    let out = run(&["smooth", "--target", &f.path("half.json"), "--in", &f.path("half.json"), "--eps", "0.05"]);
    assert_eq!(code(&out), 0);
    let v = report(&out);
    assert_eq!(v["result"]["verdict_before"]["kind"], "non_strict");
    assert_eq!(v["result"]["verdict_after"]["kind"], "strict");
    assert!(v["result"]["fidelity"].as_f64().unwrap() >= 0.95 - 1e-9);
}

#[test]
fn jordan_of_zero_and_plus() {
    let f = Fixture::new();
    let p = f.write("p.json", r#"{"dim":2,"entries":[[1,0],[0,0],[0,0],[0,0]]}"#);
    let q = f.write("q.json", r#"{"dim":2,"entries":[[0.5,0],[0.5,0],[0.5,0],[0.5,0]]}"#);
    let out = run(&["jordan", "--p", &p.display().to_string(), "--q", &q.display().to_string()]);
    assert_eq!(code(&out), 0);
    let v = report(&out);
    assert!((v["result"]["pair"]["blocks"][0]["F"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!(v["result"]["residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(code(&run(&["jordan", "--p", &p.display().to_string()])), 3);
}

#[test]
fn realize_then_extract_round_trips() {
    let f = Fixture::new();
    let out = run(&["jordan", "--realize", &f.path("two.json")]);
    assert_eq!(code(&out), 0);
    let dense = f.write("dense.json", &report(&out)["result"].to_string());
    let out = run(&["jordan", "--operators", &dense.display().to_string()]);
    assert_eq!(code(&out), 0);
    let blocks = report(&out)["result"]["pair"]["blocks"].clone();
    let mut fs: Vec<f64> = blocks.as_array().unwrap().iter().map(|b| b["F"].as_f64().unwrap()).collect();
    fs.sort_by(f64::total_cmp);
    assert!((fs[0] - 0.4).abs() < 1e-9 && (fs[1] - 0.8).abs() < 1e-9);
}

#[test]
fn reports_are_byte_identical() {
    let f = Fixture::new();
    let args = ["check", "--in", &f.path("two.json"), "--out", &f.path("half.json"), "--mode", "asymptotic"];
    let first = run(&args);
    let again = run(&args);
    let single = run_env(&args, &[("FLATMAJ_THREADS", "1")]);
    assert_eq!(first.stdout, again.stdout);
    assert_eq!(first.stdout, single.stdout);
    let sa = run(&["selftest", "--seed", "7"]);
    let sb = run(&["selftest", "--seed", "7"]);
    assert_eq!(sa.stdout, sb.stdout);
}

#[test]
fn config_echo_round_trips() {
    let f = Fixture::new();
    let args = ["rate", "--in", &f.path("dust.json"), "--out", &f.path("half.json"), "--grid", "24", "--seed", "5"];
    let first = run(&args);
    let config = f.write("config.json", &report(&first)["config"].to_string());
    let second = run(&["rate", "--in", &f.path("dust.json"), "--out", &f.path("half.json"), "--config", &config.display().to_string()]);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn partial_config_overrides_defaults() {
    let f = Fixture::new();
    let config = f.write("config.json", r#"{"grid_size": 12, "tolerances": {"tau_strict": 1e-6}}"#);
    let out = run(&["selftest", "--config", &config.display().to_string()]);
    let v = report(&out);
    assert_eq!(v["config"]["grid_size"], 12);
    assert_eq!(v["config"]["tolerances"]["tau_strict"], 1e-6);
    assert_eq!(v["config"]["tolerances"]["tau_zero"], 1e-9);
    let bad = f.write("bad_config.json", r#"{"grid": 12}"#);
    assert_eq!(code(&run(&["selftest", "--config", &bad.display().to_string()])), 3);
}

#[test]
fn report_flag_writes_file() {
    let f = Fixture::new();
    let target = f.path("report.json");
    let out = run(&["selftest", "--report", &target]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(Path::new(&target)).unwrap()).unwrap();
    assert_eq!(v["command"], "selftest");
    assert_eq!(v["config"]["output_path"], target);
}
