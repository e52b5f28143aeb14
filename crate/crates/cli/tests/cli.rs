use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn kdebias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdebias")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// Ten words in four dimensions; the first axis carries gender.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let emb = "\
he 1.0 0.2 0.1 0.0
she -1.0 0.2 0.1 0.0
man 0.9 -0.3 0.2 0.1
woman -0.9 -0.3 0.2 0.1
king 0.8 0.1 -0.4 0.3
queen -0.8 0.1 -0.4 0.3
doctor 0.3 0.5 0.5 -0.2
nurse -0.4 0.4 0.6 -0.1
table 0.0 -0.2 0.3 0.9
chair 0.05 -0.1 0.4 0.8
";
        fs::write(dir.path().join("emb.txt"), emb).unwrap();
        fs::write(
            dir.path().join("sets.json"),
            r#"{"defining_sets": [["he","she"],["man","woman"],["king","queen"]],
                "equality_sets": [["man","woman"],["king","queen"]]}"#,
        )
        .unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn write(&self, name: &str, text: &str) -> String {
        fs::write(self.dir.path().join(name), text).unwrap();
        self.path(name)
    }

    fn fit(&self, extra: &[&str], out: &str) -> Output {
        let (emb, sets, out) = (self.path("emb.txt"), self.path("sets.json"), self.path(out));
        let mut args = vec!["fit", "--embeddings", &emb, "--sets", &sets, "--out", &out];
        args.extend_from_slice(extra);
        kdebias(&args)
    }
}

fn read_json(p: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn vectors(text: &str) -> Vec<(String, Vec<f64>)> {
    text.lines()
        .map(|l| {
            let mut it = l.split_whitespace();
            let w = it.next().unwrap().to_string();
            (w, it.map(|v| v.parse().unwrap()).collect())
        })
        .collect()
}

#[test]
fn linear_fit_writes_one_basis_vector() {
    let f = Fixture::new();
    let out = f.fit(&[], "lin.json");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = read_json(f.path("lin.json"));
    assert_eq!(model["kind"], "linear");
    assert_eq!(model["model"]["basis"]["dim"][0], 1);
}

#[test]
fn kernel_fit_reports_descending_eigenvalues() {
    let f = Fixture::new();
    let out = f.fit(
        &["--kernel", "rbf", "--components", "2", "--preimage-sample", "4"],
        "rbf.json",
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = read_json(f.path("rbf.json"));
    assert_eq!(model["kind"], "kernel");
    let eig: Vec<f64> = model["model"]["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(eig.len(), 2);
    assert!(eig[0] >= eig[1] && eig[1] > 0.0);
    assert!(model["preimage"].is_object());
}

#[test]
fn apply_is_idempotent_for_linear_models() {
    let f = Fixture::new();
    f.fit(&[], "lin.json");
    let (emb, model, once, twice) = (
        f.path("emb.txt"),
        f.path("lin.json"),
        f.path("once.txt"),
        f.path("twice.txt"),
    );
    assert_eq!(
        code(&kdebias(&[
            "apply",
            "--embeddings",
            &emb,
            "--model",
            &model,
            "--out",
            &once
        ])),
        0
    );
    let args = [
        "apply",
        "--embeddings",
        &once,
        "--model",
        &model,
        "--out",
        &twice,
        "--no-normalize",
    ];
    assert_eq!(code(&kdebias(&args)), 0);
    let (a, b) = (
        vectors(&fs::read_to_string(&once).unwrap()),
        vectors(&fs::read_to_string(&twice).unwrap()),
    );
    for ((wa, va), (wb, vb)) in a.iter().zip(&b) {
        assert_eq!(wa, wb);
        for (x, y) in va.iter().zip(vb) {
            assert!((x - y).abs() <= 1e-12, "{wa}: {x} vs {y}");
        }
    }
}

#[test]
fn equalize_makes_set_members_share_their_neutral_part() {
    let f = Fixture::new();
    f.fit(&[], "lin.json");
    let (emb, model, sets, out) = (
        f.path("emb.txt"),
        f.path("lin.json"),
        f.path("sets.json"),
        f.path("eq.txt"),
    );
    let args = [
        "apply",
        "--embeddings",
        &emb,
        "--model",
        &model,
        "--sets",
        &sets,
        "--equalize",
        "--out",
        &out,
    ];
    assert_eq!(code(&kdebias(&args)), 0);
    let v: std::collections::HashMap<_, _> = vectors(&fs::read_to_string(&out).unwrap()).into_iter().collect();
    // Neither doctor nor nurse is in an equality set; both see man and woman alike.
    for probe in ["doctor", "nurse"] {
        let dot = |w: &str| v[probe].iter().zip(&v[w]).map(|(a, b)| a * b).sum::<f64>();
        assert!((dot("man") - dot("woman")).abs() <= 1e-9);
    }
}

#[test]
fn sim_prints_raw_and_corrected_scores() {
    let f = Fixture::new();
    f.fit(&["--kernel", "linear", "--no-preimage"], "k.json");
    let (emb, model) = (f.path("emb.txt"), f.path("k.json"));
    let out = kdebias(&[
        "sim",
        "--embeddings",
        &emb,
        "--model",
        &model,
        "doctor",
        "he",
        "doctor",
        "she",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let corrected = |i: usize| rows[i]["corrected"].as_f64().unwrap();
    let raw = |i: usize| rows[i]["raw"].as_f64().unwrap();
    assert!((raw(0) - raw(1)).abs() > 0.1);
    assert!((corrected(0) - corrected(1)).abs() < (raw(0) - raw(1)).abs());
}

#[test]
fn weat_writes_json_and_csv() {
    let f = Fixture::new();
    f.fit(&[], "lin.json");
    let cfg = f.write(
        "weat.json",
        r#"{"X":["doctor","king"],"Y":["nurse","queen"],"A":["he","table"],"B":["she","chair"]}"#,
    );
    let (emb, model, out) = (f.path("emb.txt"), f.path("lin.json"), f.path("weat_out.json"));
    let res = kdebias(&[
        "eval",
        "weat",
        "--embeddings",
        &emb,
        "--model",
        &model,
        "--config",
        &cfg,
        "--out",
        &out,
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let json = read_json(&out);
    assert_eq!(json["test"], "weat");
    assert_eq!(json["results"].as_array().unwrap().len(), 2);
    let csv = fs::read_to_string(PathBuf::from(&out).with_extension("csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("test,backend,metric,value,p,n_used"));
    assert!(lines.next().unwrap().starts_with("weat,raw,d,"));
    assert!(lines.next().unwrap().starts_with("weat,linear,d,"));
}

#[test]
fn weat_with_fully_neutralized_attributes_exits_4() {
    let f = Fixture::new();
    f.fit(&[], "lin.json");
    // Each attribute differs from its counterpart only along the removed axis.
    let cfg = f.write(
        "weat.json",
        r#"{"X":["doctor","king"],"Y":["nurse","queen"],"A":["he","man"],"B":["she","woman"]}"#,
    );
    let (emb, model) = (f.path("emb.txt"), f.path("lin.json"));
    let res = kdebias(&[
        "eval",
        "weat",
        "--embeddings",
        &emb,
        "--model",
        &model,
        "--config",
        &cfg,
    ]);
    assert_eq!(code(&res), 4);
}

#[test]
fn demo_toy_prints_csv_header() {
    let out = kdebias(&["demo-toy", "--points", "20"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("x,y,x_ntr,y_ntr"));
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn missing_sets_file_exits_2() {
    let f = Fixture::new();
    let (emb, out) = (f.path("emb.txt"), f.path("m.json"));
    let res = kdebias(&[
        "fit",
        "--embeddings",
        &emb,
        "--sets",
        "/nonexistent/sets.json",
        "--out",
        &out,
    ]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("/nonexistent/sets.json"));
}

#[test]
fn bad_flags_exit_2() {
    let f = Fixture::new();
    assert_eq!(code(&f.fit(&["--kernel", "rbf", "--coef0", "1"], "m.json")), 2);
    assert_eq!(code(&f.fit(&["--kernel", "no-such-kernel"], "m.json")), 2);
    assert_eq!(code(&kdebias(&["fit"])), 2);
}

#[test]
fn out_of_vocabulary_defining_sets_exit_3() {
    let f = Fixture::new();
    let sets = f.write("oov.json", r#"{"defining_sets": [["zorp","blip"]]}"#);
    let (emb, out) = (f.path("emb.txt"), f.path("m.json"));
    assert_eq!(
        code(&kdebias(&["fit", "--embeddings", &emb, "--sets", &sets, "--out", &out])),
        3
    );
}

#[test]
fn simlex_without_known_pairs_exits_3() {
    let f = Fixture::new();
    let pairs = f.write("simlex.tsv", "word1\tword2\tscore\nzorp\tblip\t3.0\nfoo\tbar\t1.0\n");
    let emb = f.path("emb.txt");
    assert_eq!(
        code(&kdebias(&["eval", "simlex", "--embeddings", &emb, "--pairs", &pairs])),
        3
    );
}

#[test]
fn kernel_models_refuse_equalize() {
    let f = Fixture::new();
    f.fit(&["--kernel", "rbf", "--preimage-sample", "4"], "rbf.json");
    let (emb, model, sets, out) = (
        f.path("emb.txt"),
        f.path("rbf.json"),
        f.path("sets.json"),
        f.path("o.txt"),
    );
    let args = [
        "apply",
        "--embeddings",
        &emb,
        "--model",
        &model,
        "--sets",
        &sets,
        "--equalize",
        "--out",
        &out,
    ];
    assert_eq!(code(&kdebias(&args)), 2);
}
