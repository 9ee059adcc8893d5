use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
seed = 1

[fine]
n = 16
dt = 900.0

[coarse]
n = 8
dt = 7200.0

[data]
spin_up_years = 0.005
duration_years = 0.011

[train]
windows = [1, 2]
iterations = 2
population = 4
batch = 2
ensemble_size = 2

[evaluate]
horizon = 4
ensemble_size = 2
long_run_years = 0.01
sample_every = 2
spread_leads = 4
spread_starts = 2
"#;

fn cglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cglab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&cglab(&[])), 2);
    assert_eq!(code(&cglab(&["frobnicate"])), 2);
    assert_eq!(code(&cglab(&["theory", "prop9"])), 2);
    assert_eq!(code(&cglab(&["generate", "--seed", "x"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[train]\npopulation = 3\n");
    assert_eq!(code(&cglab(&["generate", "--config", &cfg])), 2);
}

#[test]
fn theory_scoring_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = cglab(&["theory", "scoring", "--seed", "4", "--out", s(dir.path())]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = cglab(&["theory", "scoring", "--seed", "4"]);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
    let saved = std::fs::read_to_string(dir.path().join("theory_scoring.txt")).unwrap();
    assert_eq!(saved, text);
}

#[test]
fn zero_duration_gives_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &TINY.replace("duration_years = 0.011", "duration_years = 0.0"),
    );
    let out = dir.path().join("empty");
    let o = cglab(&["generate", "--config", &cfg, "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = cglab::dataset::Manifest::read(&out).unwrap();
    assert_eq!(m.count, 0);
    assert_eq!(std::fs::metadata(out.join("series.cgqg")).unwrap().len(), 0);
    let parsed = cglab::ExperimentConfig::load(&cfg).unwrap();
    assert!(cglab::dataset::Dataset::open(&out, &parsed)
        .unwrap()
        .states
        .is_empty());
}

#[test]
fn generate_train_evaluate_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let train = dir.path().join("train");
    let train2 = dir.path().join("train_again");
    let valid = dir.path().join("valid");
    for (seed, out) in [("1", &train), ("1", &train2), ("2", &valid)] {
        let o = cglab(&[
            "generate",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--out",
            s(out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let manifest = |p: &Path| std::fs::read_to_string(p.join("manifest.toml")).unwrap();
    assert_eq!(manifest(&train), manifest(&train2));
    assert_ne!(manifest(&train), manifest(&valid));
    // floor(0.011 y / 2 h)
    assert_eq!(cglab::dataset::Manifest::read(&train).unwrap().count, 48);

    let ck = dir.path().join("ck");
    let o = cglab(&[
        "train",
        "--config",
        &cfg,
        "--data",
        s(&train),
        "--out",
        s(&ck),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let params = std::fs::read(ck.join("closure.cgcp")).unwrap();
    let record = std::fs::read_to_string(ck.join("train_record.csv")).unwrap();
    assert!(record.starts_with("# config_hash="));
    // 2 phases x 2 iterations
    assert_eq!(record.lines().count(), 2 + 4);

    // resume after an interrupted second phase replays it exactly
    let mut meta = cglab::train::CheckpointMeta::read(&ck).unwrap();
    meta.phases.truncate(1);
    meta.complete = false;
    meta.write(&ck).unwrap();
    std::fs::remove_file(ck.join("closure.cgcp")).unwrap();
    let o = cglab(&[
        "train",
        "--config",
        &cfg,
        "--data",
        s(&train),
        "--out",
        s(&ck),
        "--resume",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(ck.join("closure.cgcp")).unwrap(), params);
    assert_eq!(
        std::fs::read_to_string(ck.join("train_record.csv")).unwrap(),
        record
    );

    let eval = dir.path().join("eval");
    let run_eval = |out: &Path| {
        cglab(&[
            "evaluate",
            "--config",
            &cfg,
            "--validation",
            s(&valid),
            "--checkpoint",
            s(&ck),
            "--out",
            s(out),
        ])
    };
    let o = run_eval(&eval);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "summary.csv",
        "spectra.csv",
        "score_curve_none.csv",
        "score_curve_closure.csv",
        "long_run_none.csv",
        "long_run_closure.csv",
    ] {
        let text = std::fs::read_to_string(eval.join(f)).unwrap();
        assert!(text.starts_with("# config_hash="), "{f}");
    }
    let summary = std::fs::read_to_string(eval.join("summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("none,")));
    assert!(summary.lines().any(|l| l.starts_with("closure,")));
    let eval2 = dir.path().join("eval2");
    assert_eq!(code(&run_eval(&eval2)), 0);
    for f in ["summary.csv", "spectra.csv", "score_curve_closure.csv"] {
        assert_eq!(
            std::fs::read(eval.join(f)).unwrap(),
            std::fs::read(eval2.join(f)).unwrap()
        );
    }

    // training data reused for validation is refused
    let o = cglab(&[
        "evaluate",
        "--config",
        &cfg,
        "--validation",
        s(&train2),
        "--checkpoint",
        s(&ck),
        "--out",
        s(&dir.path().join("bad")),
    ]);
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("share seed"));

    let svg = dir.path().join("spectra.svg");
    let o = cglab(&[
        "plot",
        s(&eval.join("spectra.csv")),
        "--log",
        "--out",
        s(&svg),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn unstable_generation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // strong shear at a long step
    let text = TINY
        .replace("dt = 900.0", "dt = 36000.0")
        .replace("dt = 7200.0", "dt = 72000.0")
        .replace("spin_up_years = 0.005", "spin_up_years = 1.0")
        + "\n[physics]\nubar1 = 50.0\n";
    let cfg = write_config(dir.path(), &text);
    let o = cglab(&[
        "generate",
        "--config",
        &cfg,
        "--out",
        s(&dir.path().join("d")),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("instability"));
}
