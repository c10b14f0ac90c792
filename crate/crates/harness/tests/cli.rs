use std::fs;
use std::path::Path;
use std::process::Command;

use ifelab_core::dgp::{generate, DgpSpec};
use ifelab_core::{load_result, save_panel, ColumnSchema};

fn ifelab(args: &[&str], cwd: &Path) {
    let out = Command::new(env!("CARGO_BIN_EXE_ifelab"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn ifelab");
    assert!(
        out.status.success(),
        "ifelab {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn assert_outputs(dir: &Path, files: &[&str]) {
    for f in files {
        let p = dir.join(f);
        assert!(p.is_file(), "{} missing", p.display());
        assert!(fs::metadata(&p).unwrap().len() > 0, "{} empty", p.display());
    }
}

#[test]
fn sweep_with_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("sweep.toml"),
        r#"
replications = 50
[dgp]
design = "het"
n = 12
t = 10
n1 = 6
t0 = 5
k0 = 1
k_alpha = 2
structural_seed = 1

[[estimators]]
name = "IFE3"
method = "ife"
k = 3

[[estimators]]
name = "SC"
method = "sc"
"#,
    )
    .unwrap();
    ifelab(
        &["sweep", "--config", "sweep.toml", "--reps", "2", "--seed", "4", "--workers", "1", "--out", "o"],
        tmp.path(),
    );
    let dir = tmp.path().join("o");
    assert_outputs(&dir, &["report.txt", "report.csv", "config.resolved"]);
    let resolved = fs::read_to_string(dir.join("config.resolved")).unwrap();
    assert!(resolved.contains("replications = 2"));
    assert!(resolved.contains("noise_seed = 4"));
    let csv = fs::read_to_string(dir.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.contains("IFE3"));
}

#[test]
fn table1_small_grid() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("t1.toml"), "sizes = [[12, 10]]\n").unwrap();
    ifelab(&["table1", "--config", "t1.toml", "--reps", "2", "--scale", "desk", "--out", "o"], tmp.path());
    let dir = tmp.path().join("o");
    assert_outputs(&dir, &["report.txt", "report.csv", "config.resolved"]);
    // two designs x five estimators
    assert_eq!(fs::read_to_string(dir.join("report.csv")).unwrap().lines().count(), 11);
}

#[test]
fn appendix_c_writes_histogram() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "n = 14\nt = 12\nbins = 8\n").unwrap();
    ifelab(&["appendix-c", "--config", "c.toml", "--k-alpha", "2", "--reps", "8", "--out", "o"], tmp.path());
    let dir = tmp.path().join("o");
    assert_outputs(&dir, &["report.txt", "report.csv", "config.resolved", "histogram.bins"]);
    let bins = fs::read_to_string(dir.join("histogram.bins")).unwrap();
    assert!(bins.contains("# reference_att 0.750000"));
    assert!(bins.contains("[alpha_hat]") && bins.contains("[d_of_f]"));
}

#[test]
fn appendix_d_tiny_row() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("d.toml"), "rows = [[12, 6, 8, 4]]\n").unwrap();
    ifelab(&["appendix-d", "--config", "d.toml", "--reps", "2", "--out", "o"], tmp.path());
    let dir = tmp.path().join("o");
    assert_outputs(&dir, &["report.txt", "report.csv", "config.resolved"]);
    assert!(fs::read_to_string(dir.join("report.txt")).unwrap().contains("static att"));
}

#[test]
fn analyze_with_and_without_inference() {
    let tmp = tempfile::tempdir().unwrap();
    let g = generate(&DgpSpec::hom(16, 12).with_seeds(1, 1), 1).unwrap();
    save_panel(&g.panel, &tmp.path().join("panel.csv"), &ColumnSchema::default()).unwrap();

    ifelab(&["analyze", "--data", "panel.csv", "--reps", "9", "--seed", "3", "--out", "with"], tmp.path());
    let dir = tmp.path().join("with");
    assert_outputs(&dir, &["report.txt", "report.csv", "config.resolved", "results/IFE.json", "results/SDiD.json"]);
    let text = fs::read_to_string(dir.join("report.txt")).unwrap();
    assert_eq!(text.matches('[').count(), 5);
    let doc = load_result(&dir.join("results/GSC.json")).unwrap();
    assert_eq!(doc.seed, 3);
    assert_eq!(doc.config_hash.len(), 64);

    ifelab(&["analyze", "--data", "panel.csv", "--no-inference", "--out", "without"], tmp.path());
    let text = fs::read_to_string(tmp.path().join("without/report.txt")).unwrap();
    assert!(!text.contains('['));
}

#[test]
fn bad_invocations_fail() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["sweep"],
        vec!["analyze"],
        vec!["analyze", "--data", "missing.csv"],
        vec!["appendix-c", "--k-alpha", "7", "--reps", "1"],
    ] {
        let status = Command::new(env!("CARGO_BIN_EXE_ifelab"))
            .args(&args)
            .current_dir(tmp.path())
            .env("RUST_LOG", "off")
            .output()
            .unwrap()
            .status;
        assert!(!status.success(), "{args:?} should fail");
    }
}
