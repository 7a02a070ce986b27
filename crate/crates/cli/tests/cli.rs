use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn occufuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_occufuse"))
        .args(args)
        .env_remove("OCCUFUSE_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn digest_line(o: &Output) -> String {
    stdout(o)
        .lines()
        .find(|l| l.starts_with("digest\t"))
        .expect("digest printed")
        .to_string()
}

fn synth(dir: &Path) {
    let o = occufuse(&["synth", "--preset", "regime-jobhop", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let t = TempDir::new().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    synth(&a);
    synth(&b);
    for f in ["histories.tsv", "items.tsv", "splits.json", "meta.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn prepare_prints_stable_digest_and_rejects_missing_items() {
    let t = TempDir::new().unwrap();
    let raw = t.path().join("raw");
    synth(&raw);
    let h = raw.join("histories.tsv");
    let i = raw.join("items.tsv");
    let run = |out: &str| {
        occufuse(&[
            "prepare",
            "--histories",
            h.to_str().unwrap(),
            "--items",
            i.to_str().unwrap(),
            "--out",
            t.path().join(out).to_str().unwrap(),
        ])
    };
    let first = run("p1");
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(digest_line(&first), digest_line(&run("p2")));
    assert!(stdout(&first).contains("users\t2778"));

    let missing = occufuse(&[
        "prepare",
        "--histories",
        h.to_str().unwrap(),
        "--items",
        t.path().join("nope.tsv").to_str().unwrap(),
        "--out",
        t.path().join("p3").to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.tsv"));
}

#[test]
fn evaluate_writes_reports_and_is_deterministic() {
    let t = TempDir::new().unwrap();
    let pkg = t.path().join("pkg");
    synth(&pkg);
    let eval = |out: &str| {
        occufuse(&[
            "evaluate",
            "--benchmark",
            pkg.to_str().unwrap(),
            "--out",
            t.path().join(out).to_str().unwrap(),
            "--models",
            "repeat_last,markov,full",
        ])
    };
    let o = eval("r1");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("timings:"));
    eval("r2");

    let m1 = fs::read(t.path().join("r1/metrics.tsv")).unwrap();
    assert_eq!(m1, fs::read(t.path().join("r2/metrics.tsv")).unwrap());

    let summary = fs::read_to_string(t.path().join("r1/summary.tsv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3);
    let metrics = String::from_utf8(m1).unwrap();
    for m in ["repeat_last", "markov", "full"] {
        assert_eq!(metrics.lines().filter(|l| l.starts_with(&format!("{m}\t"))).count(), 10);
    }

    // stats on the metrics file reproduces the evaluate tests
    let s = occufuse(&[
        "stats",
        "--metrics",
        t.path().join("r1/metrics.tsv").to_str().unwrap(),
        "--pairs",
        "full:repeat_last,full:markov",
    ]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let tests = fs::read_to_string(t.path().join("r1/tests.tsv")).unwrap();
    assert_eq!(stdout(&s), tests);
}

#[test]
fn explain_columns_are_normalized_and_mark_the_target() {
    let t = TempDir::new().unwrap();
    let pkg = t.path().join("pkg");
    synth(&pkg);
    let o = occufuse(&["explain", "--benchmark", pkg.to_str().unwrap(), "--user", "u00007"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("rank\tcandidate\tCF\tRL\tTOPSIS\tFull"));
    assert!(text.lines().any(|l| l.split('\t').nth(1).is_some_and(|c| c.ends_with('*'))));
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip_while(|l| !l.starts_with("rank\tcandidate"))
        .skip(1)
        .take_while(|l| !l.is_empty())
        .map(|l| l.split('\t').skip(2).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(rows.len() >= 5);
    for col in 0..4 {
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r[col])));
    }
    // the top-5 rows contain the best Full score
    assert_eq!(rows[0][3], 1.0);

    let bad = occufuse(&["explain", "--benchmark", pkg.to_str().unwrap(), "--user", "nobody"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn input_errors_exit_with_two() {
    let t = TempDir::new().unwrap();
    let pkg = t.path().join("pkg");
    synth(&pkg);
    let unknown = occufuse(&["evaluate", "--benchmark", pkg.to_str().unwrap(), "--models", "lstm"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("lstm"));

    let bad_key = occufuse(&["evaluate", "--benchmark", pkg.to_str().unwrap(), "--set", "bogus=1"]);
    assert_eq!(bad_key.status.code(), Some(2));

    let posthoc = occufuse(&[
        "evaluate",
        "--benchmark",
        pkg.to_str().unwrap(),
        "--set",
        "comparisons=markov:popularity",
    ]);
    assert_eq!(posthoc.status.code(), Some(2));
}

#[test]
fn config_file_from_environment() {
    let t = TempDir::new().unwrap();
    let pkg = t.path().join("pkg");
    synth(&pkg);
    let out = t.path().join("rep");
    let cfg = t.path().join("run.conf");
    fs::write(
        &cfg,
        format!(
            "# two seeds, two models\nbenchmark = {}\noutput = {}\nseeds = 100,101\nmodels = markov,transition_cf\n",
            pkg.display(),
            out.display()
        ),
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_occufuse"))
        .arg("evaluate")
        .env("OCCUFUSE_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = fs::read_to_string(out.join("metrics.tsv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 2 * 2);
}
