use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const OSCILLATOR: &str = r#"
[potential]
dim = 1
minima = [[0.0]]

[[potential.terms]]
type = "monomial"
coeff = [1.0, 1.0]
powers = [2]
"#;

fn nsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsa-spec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_config(dir: &Path, name: &str, text: &str, out: &str) -> Output {
    let cfg = dir.join(name);
    fs::write(&cfg, text).unwrap();
    let out = dir.join(out);
    nsa(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(str::to_string).collect()
}

#[test]
fn model_spectrum_of_imaginary_oscillator() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "kind = \"model-spectrum\"\n[model]\nn = 1\nv = [[[0.0, 2.0]]]\n";
    let o = run_config(tmp.path(), "m.toml", text, "out");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("out");
    let table = rows(&out.join("model_spectrum.csv"));
    let first: Vec<f64> = table[0][..2].iter().map(|s| s.parse().unwrap()).collect();
    let half = std::f64::consts::FRAC_1_SQRT_2;
    assert!((first[0] - half).abs() < 1e-12 && (first[1] - half).abs() < 1e-12);
    assert_eq!(&table[0][2..], ["0", "1"]);
    assert_eq!(table.len(), 8);
    // resolved defaults are echoed
    let r = report(&out);
    assert_eq!(r["config"]["model"]["count"], 8);
    assert_eq!(r["config"]["model"]["a"], serde_json::json!([[0.0]]));
    assert_eq!(r["config"]["seed"], 0);
    assert_eq!(r["passed"], true);
}

#[test]
fn missing_grid_points_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("kind = \"eigs\"\nh = [0.1]\n{OSCILLATOR}\n[grid]\nL = 6.0\n");
    let o = run_config(tmp.path(), "bad.toml", &text, "out");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.N"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_keys_and_unreadable_files_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "kind = \"model-spectrum\"\ncolour = 3\n[model]\nn = 1\nv = [[[0.0, 2.0]]]\n";
    assert_eq!(
        run_config(tmp.path(), "u.toml", text, "out").status.code(),
        Some(2)
    );
    let missing = tmp.path().join("nope.toml");
    assert_eq!(nsa(&["run", missing.to_str().unwrap()]).status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn eigs_rerun_is_bit_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "kind = \"eigs\"\nseed = 5\nh = [0.1]\n{OSCILLATOR}\n[grid]\nL = 5.0\nN = 250\n[window]\nC = 4.0\n"
    );
    let a = run_config(tmp.path(), "e.toml", &text, "a");
    let b = run_config(tmp.path(), "e.toml", &text, "b");
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(b.status.code(), Some(0));
    for file in ["eigs.csv", "projections.csv"] {
        let (x, y) = (tmp.path().join("a").join(file), tmp.path().join("b").join(file));
        assert_eq!(fs::read(&x).unwrap(), fs::read(&y).unwrap(), "{file}");
    }
    let eigs = tmp.path().join("a/eigs.csv");
    assert_eq!(
        header(&eigs),
        [
            "h",
            "re_lambda",
            "im_lambda",
            "residual",
            "paired_mu_re",
            "paired_mu_im"
        ]
    );
    // |μ| < 4 keeps (2k + 1) sqrt(1 + i) for k = 0, 1
    assert_eq!(rows(&eigs).len(), 2);
    let r = report(&tmp.path().join("a"));
    assert_eq!(r["config"]["contour"]["nodes"], 32);
    assert_eq!(r["config"]["window"]["a"], 2.0);
}

#[test]
fn resolvent_map_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "kind = \"resolvent-map\"\nh = [0.1, 0.05]\n{OSCILLATOR}\n[grid]\nL = 6.0\nN = 300\n[resolvent]\nim_samples = 5\n"
    );
    let o = run_config(tmp.path(), "r.toml", &text, "out");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let path = tmp.path().join("out/resolvent_map.csv");
    assert_eq!(header(&path), ["h", "re_z", "im_z", "norm", "compensated"]);
    let table = rows(&path);
    assert_eq!(table.len(), 10);
    // z = h (2 + i s)
    let re: f64 = table[0][1].parse().unwrap();
    assert!((re - 0.2).abs() < 1e-15);
}

#[test]
fn semigroup_decay_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "kind = \"semigroup-decay\"\nh = [0.1]\n{OSCILLATOR}\n[grid]\nL = 5.0\nN = 250\n[window]\nC = 6.0\n[semigroup]\npropagator = \"krylov\"\nt_start = 0.5\nt_end = 6.0\n"
    );
    let o = run_config(tmp.path(), "s.toml", &text, "out");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let path = tmp.path().join("out/semigroup_decay.csv");
    assert_eq!(header(&path), ["h", "t", "remainder", "fitted_rate", "a"]);
    let table = rows(&path);
    assert_eq!(table.len(), 8);
    let rate: f64 = table[0][3].parse().unwrap();
    assert!(rate >= 1.9, "{rate}");
}

#[test]
fn failing_checks_exit_1_with_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let text = OSCILLATOR.replace("minima = [[0.0]]", "minima = [[1.0]]");
    let o = run_config(
        tmp.path(),
        "p.toml",
        &format!("kind = \"check-potential\"\n{text}"),
        "out",
    );
    assert_eq!(o.status.code(), Some(1));
    let r = report(&tmp.path().join("out"));
    assert_eq!(r["passed"], false);
    assert_eq!(r["checks"][0]["passed"], false);
}

#[test]
fn check_potential_on_the_bundled_example() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/check_potential_1d.toml");
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = nsa(&[
        "run",
        root.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "11",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(report(&out)["config"]["seed"], 11);
    assert_eq!(rows(&out.join("assumptions.csv")).len(), 9);
}

/// The full acceptance suite; several minutes on one core.
#[test]
fn verify_all_on_the_bundled_example() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/verify_all.toml");
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = nsa(&[
        "verify",
        root.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out);
    let criteria = r["results"]["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 9);
    assert!(criteria
        .iter()
        .all(|c| c["passed"] == true && !c["metrics"].as_array().unwrap().is_empty()));
    assert_eq!(rows(&out.join("acceptance.csv")).len(), 9);
}
