use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TOY: &str = r#"
[train]
estimator = "path"
batch_size = 32
iterations = 20
learning_rate = 0.05
seed = 5
eval_every = 5
eval_samples = 64

[flow]
hidden = []
time_mode = "none"
n_steps = 10

[target]
kind = "gaussian"
dim = 1
sigma = 2.0
"#;

fn pathflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathflow")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn strip_timing(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string()).collect()
}

#[test]
fn train_writes_metrics_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "toy.toml", TOY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = pathflow(&["train", "--config", s(&cfg), "--out", s(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ma = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    let mb = std::fs::read_to_string(b.join("metrics.csv")).unwrap();
    assert_eq!(ma.lines().next(), Some("iter,loss,ess,rev_kl,grad_norm,wall_ms"));
    assert_eq!(ma.lines().count(), 1 + 4);
    assert_eq!(strip_timing(&ma), strip_timing(&mb));

    let ja = std::fs::read_to_string(a.join("metrics.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(ja.lines().next().unwrap()).unwrap();
    for key in ["iter", "loss", "ess", "rev_kl", "grad_norm", "wall_ms"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(&std::fs::read(a.join("checkpoint.bin")).unwrap()[..8], b"PFLOWCKP");
}

#[test]
fn manifest_config_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "toy.toml", TOY);
    let a = dir.path().join("a");
    assert_eq!(pathflow(&["train", "--config", s(&cfg), "--out", s(&a), "--seed", "9"]).status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let echoed = write_config(dir.path(), "echo.toml", manifest["config"].as_str().unwrap());
    let b = dir.path().join("b");
    assert_eq!(pathflow(&["train", "--config", s(&echoed), "--out", s(&b)]).status.code(), Some(0));
    let read = |d: &Path| strip_timing(&std::fs::read_to_string(d.join("metrics.csv")).unwrap());
    assert_eq!(read(&a), read(&b));
}

#[test]
fn missing_estimator_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &TOY.replace("estimator = \"path\"", ""));
    let o = pathflow(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("estimator"));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &TOY.replace("batch_size = 32", "batch_size = \"many\""));
    let o = pathflow(&["train", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4") && err.contains("batch_size"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(pathflow(&["frobnicate", "--config", "x.toml"]).status.code(), Some(2));
    assert_eq!(pathflow(&["train"]).status.code(), Some(2));
    assert_eq!(pathflow(&["train", "--config", "/nonexistent/x.toml"]).status.code(), Some(2));
}

#[test]
fn eval_identity_checkpoint_on_base_target() {
    let dir = tempfile::tempdir().unwrap();
    let base = TOY.replace("sigma = 2.0", "sigma = 1.0").replace("iterations = 20", "iterations = 0");
    let cfg = write_config(dir.path(), "base.toml", &base);
    let out = dir.path().join("o");
    assert_eq!(pathflow(&["train", "--config", s(&cfg), "--out", s(&out)]).status.code(), Some(0));
    let ck = out.join("checkpoint.bin");
    let o = pathflow(&["eval", "--config", s(&cfg), "--checkpoint", s(&ck), "--samples", "500"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["ess"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    for key in ["rev_kl", "rev_kl_se", "free_energy", "free_energy_se", "ess_se"] {
        assert!(v[key].is_number(), "missing {key}");
    }

    assert_eq!(
        pathflow(&["eval", "--config", s(&cfg), "--checkpoint", s(&ck), "--samples", "0"]).status.code(),
        Some(2)
    );
    let other = write_config(dir.path(), "other.toml", &base.replace("n_steps = 10", "n_steps = 12"));
    assert_eq!(pathflow(&["eval", "--config", s(&other), "--checkpoint", s(&ck)]).status.code(), Some(2));
    assert_eq!(pathflow(&["eval", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn trained_toy_reverse_kl_matches_closed_form_residual() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = TOY.replace("iterations = 20", "iterations = 30").replace("learning_rate = 0.05", "learning_rate = 0.02");
    let cfg = write_config(dir.path(), "toy.toml", &cfg_text);
    let out = dir.path().join("o");
    assert_eq!(pathflow(&["train", "--config", s(&cfg), "--out", s(&out)]).status.code(), Some(0));
    let ck = pathflow::trainer::Checkpoint::load(&out.join("checkpoint.bin")).unwrap();
    // the affine flow gives q = N(μ, r²); against N(0, 4): KL = ln(2/r) + (r² + μ²)/8 − 1/2
    let parsed = pathflow::cli::config::RunConfig::parse(&cfg_text).unwrap();
    let flow = parsed.model().initial_flow(5).unwrap().with_params(&ck.params).unwrap();
    let mu = flow.sample_forward(&[0.0]).unwrap().x[0];
    let r = flow.sample_forward(&[1.0]).unwrap().x[0] - mu;
    let kl = (2.0 / r).ln() + (r * r + mu * mu) / 8.0 - 0.5;
    let o = pathflow(&["eval", "--config", s(&cfg), "--checkpoint", s(&out.join("checkpoint.bin")), "--samples", "4000"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let (est, se) = (v["rev_kl"].as_f64().unwrap(), v["rev_kl_se"].as_f64().unwrap());
    assert!(kl > 1e-4, "toy should not be converged: {kl}");
    assert!((est - kl).abs() < 3.0 * se + 1e-9, "est {est} se {se} exact {kl}");
}

#[test]
fn gradcheck_default_and_fault() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = "[flow]\nhidden = [6]\nn_steps = 20\n[target]\nkind = \"gaussian\"\ndim = 3\nsigma = 1.5\n";
    let cfg = write_config(dir.path(), "gc.toml", cfg_text);
    let o = pathflow(&["gradcheck", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let table = String::from_utf8_lossy(&o.stdout).to_string();
    for name in ["alpha_terminal", "decomposition", "perfect_fit_path", "linear_closed_form"] {
        assert!(table.contains(name), "{table}");
    }

    let faulty = write_config(
        dir.path(),
        "fault.toml",
        &format!("{cfg_text}[gradcheck]\ninject_fault = \"grad_state_jacobian_trace\"\n"),
    );
    let o = pathflow(&["gradcheck", "--config", s(&faulty)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grad_state_jacobian_trace"));
}

#[test]
fn linear_gradcheck_reports_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lin.toml", TOY);
    let o = pathflow(&["gradcheck", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8_lossy(&o.stdout).to_string();
    let line = out.lines().find(|l| l.starts_with("linear_closed_form")).unwrap();
    let err: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(err < 1e-7);
}

#[test]
fn compare_single_seed_leaves_sd_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "toy.toml", TOY);
    let out = dir.path().join("cmp");
    let o = pathflow(&["compare", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("path_final_ess_sd"), "");
    assert_eq!(col("total_final_ess_sd"), "");
    assert!(col("time_ratio").parse::<f64>().unwrap() > 0.0);
    for run in ["path-seed5", "total-seed5"] {
        assert!(out.join(run).join("metrics.csv").exists());
    }
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "toy.toml", &TOY.replace("hidden = []", "hidden = [4]"));
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = Command::new(env!("CARGO_BIN_EXE_pathflow"))
            .args(["train", "--config", s(&cfg), "--out", s(&out)])
            .env("PATHFLOW_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        outs.push(strip_timing(&std::fs::read_to_string(out.join("metrics.csv")).unwrap()));
    }
    assert_eq!(outs[0], outs[1]);
}
