use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const CHAIN: &str = r#"
[model]
source = "chain"
n1 = 10
n2 = 10

[band]
f_max = 0.15

[enrichment]
initial_basis = "free"
"#;

const BOX: &str = r#"
[model]
source = "box"
divisions1 = [1, 1, 1]
divisions2 = [1, 1, 1]
element_size = 0.01

[band]
f_max = 200000.0
"#;

fn modred(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modred"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = modred(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup(config: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("modred.toml"), config).unwrap();
    dir
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap()
}

fn names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn build_writes_matrices_partitions_and_manifest() {
    let d = setup(CHAIN);
    ok(d.path(), &["build"]);
    let model = d.path().join("out/model");
    let files = names(&model);
    assert_eq!(files.iter().filter(|f| f.ends_with(".mtx")).count(), 4);
    assert_eq!(files.iter().filter(|f| f.ends_with("_partition.json")).count(), 2);
    let manifest = fs::read(model.join("manifest.json")).unwrap();

    ok(d.path(), &["build"]);
    assert_eq!(fs::read(model.join("manifest.json")).unwrap(), manifest);
}

#[test]
fn invalid_poisson_ratio_is_rejected_before_writing() {
    let d = setup(&BOX.replace(
        "element_size = 0.01",
        "element_size = 0.01\n[model.material]\nyoungs_modulus = 2.1e11\ndensity = 7800.0\npoisson_ratio = 0.7",
    ));
    let out = modred(d.path(), &["build"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("poisson_ratio"));
    assert!(!d.path().join("out").exists());
}

#[test]
fn config_errors_name_the_field_and_line() {
    let d = setup(&CHAIN.replace("n2 = 10", "n2 = 10\nelement_lenght = 2.0"));
    let out = modred(d.path(), &["build"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("element_lenght") && err.contains("line 2"), "{err}");
}

#[test]
fn reduce_reports_are_deterministic_and_oracle_is_optional() {
    let d = setup(CHAIN);
    ok(d.path(), &["build"]);
    ok(d.path(), &["reduce", "--method", "svd"]);
    let dir = d.path().join("out/reduce/svd");
    for f in ["basis.mtx", "report.json", "mac.csv", "singular_values.csv"] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    let first = fs::read(dir.join("report.json")).unwrap();
    ok(d.path(), &["reduce", "--method", "svd"]);
    assert_eq!(fs::read(dir.join("report.json")).unwrap(), first);

    let with: Value = serde_json::from_slice(&first).unwrap();
    let q = &with["quality"];
    assert!(q["mac_average"].as_f64().unwrap() > 90.0);
    assert!(q["condition_number"].as_f64().unwrap() >= 1.0);
    assert_eq!(q["dof_reduced"], with["basis"]["columns"]);

    ok(d.path(), &["reduce", "--method", "svd", "--no-oracle"]);
    let without = json(dir.join("report.json"));
    let (a, b) = (with.as_object().unwrap(), without.as_object().unwrap());
    assert!(without["quality"].get("mac_average").is_none());
    assert!(without["quality"].get("pairing").is_none());
    for (k, v) in b {
        if k == "quality" {
            for (qk, qv) in v.as_object().unwrap() {
                assert_eq!(&a[k][qk], qv, "quality.{qk} changed");
            }
        } else {
            assert_eq!(&a[k], v, "{k} changed");
        }
    }
}

#[test]
fn craig_bampton_has_one_constraint_mode_per_junction_dof() {
    let d = setup(BOX);
    ok(d.path(), &["build"]);
    ok(d.path(), &["reduce", "--method", "cb"]);
    let r = json(d.path().join("out/reduce/cb/report.json"));
    assert_eq!(r["basis"]["constraint_modes"], 12);
}

#[test]
fn enrichment_of_free_modes_reaches_the_oracle() {
    let d = setup(CHAIN);
    ok(d.path(), &["build"]);
    let out = modred(d.path(), &["enrich"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(d.path().join("out/enrich/free/report.json"));
    assert!(r["quality"]["mac_average"].as_f64().unwrap() >= 99.9);
    assert_eq!(r["enrichment"]["status"], "converged");
    let trace = fs::read_to_string(d.path().join("out/enrich/free/trace.csv")).unwrap();
    assert!(trace.lines().count() > 1);
}

#[test]
fn converged_basis_takes_zero_rounds() {
    // Every fixed-interface mode plus the constraint mode spans the model.
    let d = setup(&format!(
        "cb_mode_f_max_hz = 10.0\n{}",
        CHAIN.replace("initial_basis = \"free\"", "initial_basis = \"method\"")
    ));
    ok(d.path(), &["build"]);
    ok(d.path(), &["reduce", "--method", "cb"]);
    ok(d.path(), &["enrich", "--method", "cb"]);
    let trace = fs::read_to_string(d.path().join("out/enrich/cb/trace.csv")).unwrap();
    assert_eq!(trace, "round,mode,frequency_hz,epsilon,flagged\n");
    let r = json(d.path().join("out/enrich/cb/report.json"));
    assert_eq!(r["enrichment"]["rounds"], 0);
}

#[test]
fn exit_status_distinguishes_partial_and_error() {
    let d = setup(&CHAIN.replace(
        "initial_basis = \"free\"",
        "initial_basis = \"free\"\nmax_rounds = 1\nepsilon_tol = 1e-300",
    ));
    ok(d.path(), &["build"]);
    assert_eq!(modred(d.path(), &["enrich"]).status.code(), Some(2));
    let r = json(d.path().join("out/enrich/free/report.json"));
    assert_eq!(r["enrichment"]["status"], "partial");

    let fresh = setup(CHAIN);
    assert_eq!(modred(fresh.path(), &["reduce"]).status.code(), Some(1));
}

#[test]
fn compare_sorts_by_mac_and_refuses_mixed_models() {
    let d = setup(CHAIN);
    ok(d.path(), &["build"]);
    for m in ["cb", "svd", "cross"] {
        ok(d.path(), &["reduce", "--method", m]);
    }
    let report = |m: &str| format!("out/reduce/{m}/report.json");
    let table = ok(
        d.path(),
        &[
            "compare",
            &report("cb"),
            &report("svd"),
            &report("cross"),
            "--output",
            "cmp",
        ],
    );
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    let macs: Vec<f64> = rows
        .iter()
        .map(|r| r.split_whitespace().nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(macs.windows(2).all(|w| w[0] >= w[1]), "{table}");
    assert!(d.path().join("cmp/comparison.csv").exists());

    let other = setup(&CHAIN.replace("n2 = 10", "n2 = 12"));
    ok(other.path(), &["build"]);
    ok(other.path(), &["reduce"]);
    let foreign = other.path().join("out/reduce/svd/report.json");
    let out = modred(d.path(), &["compare", &report("svd"), foreign.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    let fp = |p: &Path| {
        json(p.to_path_buf())["quality"]["model_fingerprint"]
            .as_str()
            .unwrap()
            .to_string()
    };
    assert!(
        err.contains(&fp(&d.path().join(report("svd")))) && err.contains(&fp(&foreign)),
        "{err}"
    );
}

/// Copies the built model with the junction DoF order reversed in both
/// components.
fn permuted_model(src: &Path, dst: &Path) -> String {
    fs::create_dir_all(dst).unwrap();
    for k in [1, 2] {
        for m in ["mass", "stiffness"] {
            let f = format!("component{k}_{m}.mtx");
            fs::copy(src.join(&f), dst.join(&f)).unwrap();
        }
        let f = format!("component{k}_partition.json");
        let mut p = json(src.join(&f));
        p["junction"].as_array_mut().unwrap().reverse();
        fs::write(dst.join(&f), serde_json::to_string(&p).unwrap()).unwrap();
    }
    let paths = |k: usize| {
        let p = |m: &str| dst.join(format!("component{k}_{m}")).display().to_string();
        format!(
            "mass = \"{}\"\nstiffness = \"{}\"\npartition = \"{}\"\n",
            p("mass.mtx"),
            p("stiffness.mtx"),
            p("partition.json")
        )
    };
    format!(
        "[model]\nsource = \"files\"\n[model.component1]\n{}[model.component2]\n{}[band]\nf_max = 200000.0\n",
        paths(1),
        paths(2)
    )
}

#[test]
fn database_save_load_and_partial_reuse() {
    let d = setup(BOX);
    ok(d.path(), &["build"]);
    let saved = ok(d.path(), &["db", "save", "db"]);
    assert!(saved.contains("coupling vectors"), "{saved}");
    assert_eq!(ok(d.path(), &["db", "load", "db"]).trim(), "identical");

    let moved = TempDir::new().unwrap();
    let cfg = permuted_model(&d.path().join("out/model"), &moved.path().join("model_src"));
    fs::write(moved.path().join("modred.toml"), cfg).unwrap();
    ok(moved.path(), &["build"]);
    let db = d.path().join("db");
    let db = db.to_str().unwrap();
    assert_eq!(modred(moved.path(), &["db", "load", db]).status.code(), Some(1));
    let status = ok(moved.path(), &["db", "reuse-partial", db]);
    let n = json(d.path().join("db/manifest.json"))["coupling"]
        .as_array()
        .unwrap()
        .len();
    assert_eq!(
        status.trim(),
        format!("retained: free modes (2 sets); discarded: {n} coupling vectors")
    );

    fs::write(d.path().join("db/manifest.json"), "{ not json").unwrap();
    let out = modred(d.path(), &["db", "load", "db"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("format"));
}
