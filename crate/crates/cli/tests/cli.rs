use std::path::Path;
use std::process::{Command, Output};

fn gocoma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gocoma"))
        .args(args)
        .env_remove("GOCOMA_SEED")
        .output()
        .unwrap()
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_synth(dir: &Path) {
    ok(gocoma(&[
        "synth",
        "--out",
        s(dir),
        "--n-samples",
        "80",
        "--classes",
        "4",
        "--t-code",
        "3",
        "--t-img",
        "3",
        "--d-code",
        "10",
        "--d-img",
        "10",
        "--depth",
        "2",
        "--noise",
        "0.3",
        "--seed",
        "2",
    ]));
}

fn write_config(dir: &Path) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(
        &p,
        r#"{"train":{"epochs":3,"learning_rate":0.001,"seed":1},"d_model":10,"max_folds":2}"#,
    )
    .unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn synth_split_train_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d);
    for f in ["records.embr", "manifest.json", "synth.json"] {
        assert!(d.join(f).is_file(), "{f}");
    }
    let m = d.join("manifest.json");
    ok(gocoma(&[
        "split",
        "--manifest",
        s(&m),
        "--mode",
        "stratified5cv",
        "--seed",
        "0",
    ]));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&m).unwrap()).unwrap();
    assert_eq!(manifest["splits"]["mode"], "stratified5cv");
    assert!(manifest["prescale"]["code"].as_f64().unwrap() > 1.0);

    let cfg = write_config(d);
    let mut results = Vec::new();
    for fusion in ["gcsa", "concat", "unimodal-code"] {
        let out = d.join(fusion);
        ok(gocoma(&[
            "train",
            "--manifest",
            s(&m),
            "--fusion",
            fusion,
            "--config",
            &cfg,
            "--out",
            s(&out),
        ]));
        for f in ["results.json", "history.jsonl", "head.clsf"] {
            assert!(out.join(f).is_file(), "{fusion}/{f}");
        }
        assert_eq!(out.join("gcsa.ckpt").is_file(), fusion == "gcsa");
        let hist = std::fs::read_to_string(out.join("history.jsonl")).unwrap();
        assert_eq!(hist.lines().count(), 6);
        results.push(out.join("results.json").to_str().unwrap().to_string());
    }

    let mut args = vec!["report", "--format", "json"];
    args.extend(results.iter().map(String::as_str));
    let rep: serde_json::Value = serde_json::from_slice(&ok(gocoma(&args)).stdout).unwrap();
    let methods: Vec<&str> = rep["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["method"].as_str().unwrap())
        .collect();
    assert_eq!(methods, ["code", "concat", "gcsa"]);

    let text_path = d.join("report.txt");
    let mut args = vec!["report", "--out", s(&text_path)];
    args.extend(results.iter().map(String::as_str));
    ok(gocoma(&args));
    let text = std::fs::read_to_string(&text_path).unwrap();
    assert!(text.contains("gcsa") && text.contains("±"));
}

#[test]
fn seed_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d);
    let m = d.join("manifest.json");
    ok(gocoma(&[
        "split",
        "--manifest",
        s(&m),
        "--mode",
        "official",
        "--seed",
        "0",
    ]));
    let cfg = write_config(d);
    let run = |seed: Option<&str>, out: &Path| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_gocoma"));
        c.args([
            "train",
            "--manifest",
            s(&m),
            "--fusion",
            "mobius",
            "--config",
            &cfg,
            "--out",
            s(out),
        ]);
        match seed {
            Some(v) => c.env("GOCOMA_SEED", v),
            None => c.env_remove("GOCOMA_SEED"),
        };
        ok(c.output().unwrap());
        std::fs::read_to_string(out.join("results.json")).unwrap()
    };
    let a = run(None, &d.join("a"));
    let b = run(Some("7"), &d.join("b"));
    let c = run(Some("7"), &d.join("c"));
    let seed = |t: &str| {
        serde_json::from_str::<serde_json::Value>(t).unwrap()["config"]["train"]["seed"].as_u64()
    };
    assert_eq!(seed(&a), Some(1));
    assert_eq!(seed(&b), Some(7));
    assert_eq!(b, c);

    let mut bad = Command::new(env!("CARGO_BIN_EXE_gocoma"));
    bad.args([
        "train",
        "--manifest",
        s(&m),
        "--fusion",
        "mobius",
        "--out",
        s(&d.join("bad")),
    ]);
    assert!(!bad
        .env("GOCOMA_SEED", "seven")
        .output()
        .unwrap()
        .status
        .success());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = d.join("nope.json");
    let out = gocoma(&["split", "--manifest", s(&missing), "--mode", "official"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());

    small_synth(d);
    let m = d.join("manifest.json");
    let out = gocoma(&[
        "train",
        "--manifest",
        s(&m),
        "--fusion",
        "gcsa",
        "--out",
        s(&d.join("t")),
    ]);
    assert!(!out.status.success(), "training without splits must fail");
    let out = gocoma(&[
        "train",
        "--manifest",
        s(&m),
        "--fusion",
        "wavelet",
        "--out",
        s(&d.join("t")),
    ]);
    assert!(!out.status.success());

    let mapping = d.join("map.json");
    std::fs::write(&mapping, r#"{"s000000": "train"}"#).unwrap();
    let out = gocoma(&[
        "split",
        "--manifest",
        s(&m),
        "--mode",
        "official",
        "--mapping",
        s(&mapping),
    ]);
    assert!(!out.status.success());
}

#[test]
fn ingest_builds_a_manifest_from_record_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_synth(d);
    let names = d.join("names.txt");
    std::fs::write(&names, "w\nx\ny\nz\n").unwrap();
    let m = d.join("ingested.json");
    ok(gocoma(&[
        "ingest",
        "--manifest",
        s(&m),
        "--class-names",
        s(&names),
        s(&d.join("records.embr")),
    ]));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&m).unwrap()).unwrap();
    assert_eq!(v["n_samples"], 80);
    assert_eq!(v["class_names"][3], "z");
    assert!(Path::new(v["records"][0].as_str().unwrap()).is_absolute());
}

#[test]
fn bpea_convert_fallback_only() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    std::fs::create_dir_all(src.join("u1")).unwrap();
    std::fs::write(
        src.join("u1/main.c"),
        "int main(void) { return 0; } // hi\n",
    )
    .unwrap();
    std::fs::write(src.join("b.c"), "this is not C\n").unwrap();
    let manifest = dir.path().join("images.jsonl");
    let run = |out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_bpea"))
            .args(["convert", "--lang", "c", "--in", s(&src), "--out"])
            .arg(dir.path().join(out))
            .args(["--manifest", s(&manifest), "--fallback-only", "--jobs", "2"])
            .output()
            .unwrap();
        ok(o);
        std::fs::read_to_string(&manifest).unwrap()
    };
    let text = run("img1");
    let lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["id"], "b");
    assert_eq!(lines[1]["id"], "u1__main");
    assert!(lines.iter().all(|l| l["origin"] != "compiled"));
    assert_eq!(lines[1]["byte_len"], "int main(void) { return 0; }".len());
    let again = run("img2");
    let digests = |t: &str| {
        t.lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["sha256"].clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(digests(&text), digests(&again));
}
