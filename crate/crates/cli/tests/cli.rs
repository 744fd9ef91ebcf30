use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use lattice_cli::{parse_config, config::to_json};
use lattice_multipliers::io::read_grid_csv;
use serde_json::Value;

fn lattice(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lattice"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    std::fs::write(dir.join(name), json).unwrap();
    name.to_string()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn stderr_error(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

#[test]
fn kernel_command_reproduces_riesz_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "k.json",
        r#"{"command":"kernel","symbol":"riesz:j=1","d":1,"box":64,"tol":1e-9}"#,
    );
    let o = lattice(tmp.path(), &["--config", &cfg, "--out", "run", "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let k = read_grid_csv(std::fs::File::open(tmp.path().join("run/kernel.csv")).unwrap()).unwrap();
    for n in -64..=64i64 {
        let want = -1.0 / (PI * (2 * n + 1) as f64);
        let got = k.get(&[n]);
        assert!((got.im - want).abs() < 1e-9 && got.re.abs() < 1e-9, "n = {n}: {got}");
    }
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/kernel.json")).unwrap()).unwrap();
    assert_eq!(meta["symbol"], "riesz:j=1");
    assert!(meta["aliasing_estimate"].as_f64().unwrap() < 1e-9);
}

#[test]
fn reports_embed_config_seed_version_and_clock() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lattice(
        tmp.path(),
        &["norm", "--set", "symbol=riesz:j=1", "--set", "method=lower-bound", "--set", "radius=4", "--seed", "11", "--out", "."],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(tmp.path());
    assert_eq!(r["seed"], 11);
    assert_eq!(r["config"]["seed"], 11);
    assert_eq!(r["config"]["trials"], 64);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert!(r["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    assert!(r["started_unix"].as_f64().unwrap() > 1.0e9);
    let lb = r["result"]["estimate"]["lower_bound"].as_f64().unwrap();
    assert!(lb > 0.45 && lb <= 0.5 + 1e-6, "{lb}");
}

#[test]
fn embedded_config_regenerates_identical_output() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lattice(
        tmp.path(),
        &["strichartz", "--seed", "5", "--set", "trials=3", "--set", "radius=3", "--set", "p=1.5", "--set", "q=3", "--out", "a"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut cfg = report(&tmp.path().join("a"))["config"].clone();
    cfg["out"] = Value::String("b".into());
    write_config(tmp.path(), "again.json", &cfg.to_string());
    let o = lattice(tmp.path(), &["--config", "again.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = std::fs::read(tmp.path().join("a/ratios.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/ratios.csv")).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with("label,ratio\ndelta-f,"));
}

#[test]
fn verify_hormander_matches_direct_enumeration() {
    // exp:k=3 has kernel delta_3, so the sum over |r| >= 2|s| of
    // |K(r - s) - K(r)| counts which of r = 3 and r = 3 + s are in range.
    let tmp = tempfile::tempdir().unwrap();
    let o = lattice(
        tmp.path(),
        &["verify-hormander", "--set", "symbol=exp:k=3", "--set", "box=24", "--set", "shift_radius=4", "--set", "r_max=20", "--out", "."],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(tmp.path());
    let mut best = 0.0f64;
    for s in -4i64..=4 {
        if s == 0 {
            continue;
        }
        let mut sum = 0.0;
        for r in -20i64..=20 {
            if r.abs() < 2 * s.abs() {
                continue;
            }
            let k = |n: i64| if n == 3 { 1.0f64 } else { 0.0 };
            sum += (k(r - s) - k(r)).abs();
        }
        best = best.max(sum);
    }
    let got = r["result"]["full"]["constant"].as_f64().unwrap();
    assert!((got - best).abs() < 1e-9, "{got} vs {best}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"command":"kernel","symbol":"riesz:j=1","boxx":64}"#);
    let o = lattice(tmp.path(), &["--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_error(&o);
    assert_eq!(e["error"]["kind"], "config");
    assert!(e["error"]["message"].as_str().unwrap().contains("boxx"));
}

#[test]
fn non_convergence_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lattice(
        tmp.path(),
        &["kernel", "--set", "symbol=negpower:r=1", "--set", "d=3", "--set", "box=4", "--set", "tol=1e-12", "--out", "o"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_error(&o)["error"]["kind"], "non-convergence");
    assert!(tmp.path().join("o/error.json").exists());
}

#[test]
fn io_failures_exit_with_four() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lattice(tmp.path(), &["--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(4));
    std::fs::write(tmp.path().join("taken"), b"x").unwrap();
    let o = lattice(tmp.path(), &["kernel", "--set", "symbol=riesz:j=1", "--set", "box=2", "--out", "taken"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr_error(&o)["error"]["kind"], "io");
}

#[test]
fn wave_command_writes_states_and_conserves_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lattice(
        tmp.path(),
        &["wave", "--set", "d=2", "--set", "f=gaussian-profile", "--set", "g=delta", "--set", "times=[0,2.5]", "--out", "."],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(tmp.path());
    let e0 = r["result"]["initial_energy"].as_f64().unwrap();
    for s in r["result"]["states"].as_array().unwrap() {
        let e = s["energy"].as_f64().unwrap();
        assert!((e - e0).abs() < 1e-8 * e0, "{e} vs {e0}");
    }
    let csv = std::fs::read_to_string(tmp.path().join("wave_000.csv")).unwrap();
    assert!(csv.starts_with("n_1,n_2,u_re,u_im,v_re,v_im\n"));
    // At t = 0 the state is the data: u(0,0) = 1 and u_t(0,0) = 1.
    let row: Vec<f64> = csv
        .lines()
        .find(|l| l.starts_with("0,0,"))
        .unwrap()
        .split(',')
        .skip(2)
        .map(|v| v.parse().unwrap())
        .collect();
    for (got, want) in row.iter().zip([1.0, 0.0, 1.0, 0.0]) {
        assert!((got - want).abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn leapfrog_and_spectral_wave_agree() {
    let tmp = tempfile::tempdir().unwrap();
    for (dir, method) in [("s", "spectral"), ("l", "leapfrog")] {
        let o = lattice(
            tmp.path(),
            &["wave", "--set", &format!("method={method}"), "--set", "dt=0.005", "--set", "times=[1]", "--out", dir],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &str| {
        let text = std::fs::read_to_string(tmp.path().join(d).join("wave_000.csv")).unwrap();
        text.lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
            .collect::<Vec<_>>()
    };
    let (a, b) = (read("s"), read("l"));
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-4, "{diff}");
}

#[test]
fn stencil_path_cross_checks_the_laplacian() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lattice(
        tmp.path(),
        &["apply", "--set", "symbol=laplacian", "--set", "d=2", "--set", "stencil=true", "--set", "input=random:4", "--seed", "4", "--set", "tol=1e-12", "--out", "."],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let diff = report(tmp.path())["result"]["stencil_vs_spectral"].as_f64().unwrap();
    assert!(diff < 1e-10, "{diff}");
    let o = lattice(tmp.path(), &["apply", "--set", "symbol=riesz:j=1", "--set", "stencil=true", "--out", "."]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn l2_norm_of_interval_indicator_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lattice(tmp.path(), &["norm", "--set", "symbol=interval:a=0.2,b=0.7", "--out", "."]);
    assert!(o.status.success());
    let v = report(tmp.path())["result"]["l2"]["ess_sup"].as_f64().unwrap();
    assert_eq!(v, 1.0);
}

#[test]
fn selftest_subset_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lattice(tmp.path(), &["selftest", "--set", "criteria=[1,15]", "--out", "."]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(tmp.path());
    assert_eq!(r["result"]["criteria"].as_array().unwrap().len(), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("[PASS]"));
}

#[test]
fn config_round_trip_is_stable() {
    let inputs = [
        r#"{"command":"kernel","symbol":"riesz:j=1","d":1,"box":64,"tol":1e-8}"#,
        r#"{"command":"norm","symbol":"negpower:r=1","d":2,"method":"lower-bound","p":1.3333333333333333,"q":"inf","seed":9}"#,
        r#"{"command":"wave","d":3,"f":"delta:n=1/0/-1","g":"random:3","seed":3,"times":[0.5,1,2],"method":"rk4"}"#,
        r#"{"command":"verify-mikhlin","symbol":"riesz:j=2","d":2,"method":"fd"}"#,
        r#"{"command":"selftest"}"#,
    ];
    for text in inputs {
        let a = parse_config(text).unwrap();
        let once = to_json(&a);
        let b = parse_config(&once).unwrap();
        assert_eq!(a, b, "{text}");
        assert_eq!(once, to_json(&b));
    }
}

#[test]
fn bad_values_name_their_field() {
    for (text, field) in [
        (r#"{"command":"kernel","symbol":"riesz:j=3","d":2}"#, "symbol"),
        (r#"{"command":"kernel","symbol":"riesz:j=1","d":4}"#, "d"),
        (r#"{"command":"kernel","symbol":"riesz:j=1","tol":-1}"#, "tol"),
        (r#"{"command":"verify-mikhlin","symbol":"riesz:j=1","d":2,"weight":"interval"}"#, "weight"),
        (r#"{"command":"norm","symbol":"riesz:j=1","method":"lower-bound","p":0.5,"seed":1}"#, "p"),
        (r#"{"command":"kernel"}"#, "symbol"),
    ] {
        let e = parse_config(text).unwrap_err().to_string();
        assert!(e.contains(&format!("`{field}`")), "{text}: {e}");
    }
}
