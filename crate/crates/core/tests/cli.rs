use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kgretro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgretro")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A tiny two-relation graph with 3-d vectors, plus one entity outside the graph.
fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let g = dir.join("graph.tsv");
    let e = dir.join("emb.txt");
    fs::write(&g, "a\tsyn\tb\nb\tsyn\tc\nc\tsyn\td\na\tpart\tc\nd\tpart\tb\n").unwrap();
    fs::write(
        &e,
        "5 3\na 1 0 0\nb 0 1 0\nc 0 0 1\nd 1 1 0\nextra 0.5 0.5 0.5\n",
    )
    .unwrap();
    (g, e)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&kgretro(&["--help"])), 0);
    assert_eq!(code(&kgretro(&["retrofit", "--help"])), 0);
    assert_eq!(code(&kgretro(&["retrofit", "--bogus"])), 1);
    assert_eq!(code(&kgretro(&["no-such-command"])), 1);
}

#[test]
fn retrofit_writes_outputs_and_passes_extra_entities_through() {
    let dir = tempfile::tempdir().unwrap();
    let (g, e) = fixture(dir.path());
    let out = dir.path().join("out");
    let o = kgretro(&[
        "retrofit", "--graph", s(&g), "--embeddings", s(&e), "--out-dir", s(&out), "--kind", "translation",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["embeddings.txt", "params.txt", "trace.tsv", "manifest.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let emb = fs::read_to_string(out.join("embeddings.txt")).unwrap();
    assert!(emb.starts_with("5 3\n"));
    let extra: Vec<f64> = emb
        .lines()
        .find_map(|l| l.strip_prefix("extra "))
        .expect("entity outside the graph is kept")
        .split(' ')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(extra, [0.5, 0.5, 0.5]);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("command=retrofit"));
    assert!(manifest.lines().any(|l| l.starts_with("input.sha256.graph=")));
}

#[test]
fn alpha_grid_writes_one_set_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let (g, e) = fixture(dir.path());
    let out = dir.path().join("grid");
    let o = kgretro(&[
        "retrofit", "--graph", s(&g), "--embeddings", s(&e), "--out-dir", s(&out), "--alpha-grid", "0.1,1,10", "--kind", "identity",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for a in ["0.1", "1", "10"] {
        assert!(out.join(format!("embeddings_alpha-{a}.txt")).exists(), "alpha {a}");
        let m = fs::read_to_string(out.join(format!("manifest_alpha-{a}.txt"))).unwrap();
        assert!(m.lines().any(|l| l == format!("alpha={a}")), "{m}");
    }
}

#[test]
fn non_convergence_exits_3_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let (g, e) = fixture(dir.path());
    let out = dir.path().join("o");
    let o = kgretro(&[
        "retrofit", "--graph", s(&g), "--embeddings", s(&e), "--out-dir", s(&out), "--max-sweeps", "1", "--kind", "identity",
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(out.join("embeddings.txt").exists());
}

#[test]
fn input_errors_exit_1_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let (g, e) = fixture(dir.path());
    let o = kgretro(&["retrofit", "--graph", "/no/such/file", "--embeddings", s(&e)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("/no/such/file"), "{}", stderr(&o));

    let o = kgretro(&[
        "eval-linkpred", "--graph", s(&g), "--embeddings", s(&e), "--relation", "nope",
        "--out-dir", s(dir.path()),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("syn"), "should list known relations: {}", stderr(&o));

    let o = kgretro(&["retrofit", "--graph", s(&g), "--embeddings", s(&e), "--alpha", "-1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (g, e) = fixture(dir.path());
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!("command=retrofit\ngraph={}\nembeddings={}\nkind=identity\nalpha=5\n", s(&g), s(&e)),
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = kgretro(&["retrofit", "--config", s(&cfg), "--alpha", "2", "--out-dir", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(m.lines().any(|l| l == "alpha=2"), "{m}");

    fs::write(&cfg, "command=retrofit\nalhpa=2\n").unwrap();
    let o = kgretro(&["retrofit", "--config", s(&cfg)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("alhpa"), "{}", stderr(&o));

    fs::write(&cfg, "command=synth\n").unwrap();
    assert_eq!(code(&kgretro(&["retrofit", "--config", s(&cfg)])), 1);
}

#[test]
fn stats_and_negative_check() {
    let dir = tempfile::tempdir().unwrap();
    let (g, _) = fixture(dir.path());
    let o = kgretro(&["stats", "--graph", s(&g), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("syn") && text.contains("part"), "{text}");

    let o = kgretro(&["sample-neg", "--graph", s(&g), "--out-dir", s(dir.path()), "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let negs = dir.path().join("negatives.tsv");
    let o = kgretro(&["sample-neg", "--graph", s(&g), "--check", s(&negs), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let clash = dir.path().join("clash.tsv");
    fs::write(&clash, "a\tsyn\tb\n").unwrap();
    let o = kgretro(&["sample-neg", "--graph", s(&g), "--check", s(&clash), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 1);
}

#[test]
fn rank_deficient_orthogonalization_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (g, e) = fixture(dir.path());
    // `part` has 2 edges in 3 dimensions
    let o = kgretro(&["retrofit", "--graph", s(&g), "--embeddings", s(&e), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("`part` (2 edges"), "{}", stderr(&o));
    let o = kgretro(&[
        "retrofit", "--graph", s(&g), "--embeddings", s(&e), "--out-dir", s(dir.path()), "--no-orthogonalize",
        "--lambda", "0.1",
    ]);
    assert_ne!(code(&o), 2, "{}", stderr(&o));
}
