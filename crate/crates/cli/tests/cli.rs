use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fluxlab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

/// Small but complete configurations of every subcommand.
const CASES: &[&[&str]] = &[
    &["gen", "--n", "32", "--octaves", "3", "--field", "lacunary_velocity", "--csv", "true"],
    &["seminorm", "--n", "32", "--octaves", "3"],
    &["grad-scaling", "--n", "256", "--octaves", "6", "--eps_to", "5"],
    &["commutator", "--n", "256", "--octaves", "6", "--eps_to", "5"],
    &["power-commutator", "--n", "256", "--octaves", "6", "--eps_to", "5"],
    &["taylor-defect", "--samples", "2000"],
    &["euler-run", "--n", "16", "--t_final", "0.05", "--write_frames", "true"],
    &["budget", "--n", "32", "--t_final", "0.05", "--eps_from", "2", "--eps_to", "4"],
    &["check-hypotheses", "--theorem", "bounded_compressible", "--n", "64", "--delta0", "0.3", "--probe_count", "2"],
    &["coarea-selftest", "--n", "64", "--tol", "0.1", "--area_tol", "0.1"],
];

fn strip_timestamp(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn summaries_are_reproducible_and_follow_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    for (k, args) in CASES.iter().enumerate() {
        let (a, b) = (dir.path().join(format!("{k}a")), dir.path().join(format!("{k}b")));
        for out in [&a, &b] {
            let o = fluxlab(out, args);
            assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let s = summary(&a);
        assert_eq!(strip_timestamp(s.clone()), strip_timestamp(summary(&b)), "{args:?}");
        assert_eq!(s["schema_version"], 1);
        assert_eq!(s["command"], args[0]);
        assert!(s["config"].is_object() && s["result"].is_object());
        assert_eq!(s["inputs"]["config"].as_str().unwrap().len(), 40);
        assert!(s["pass"].is_boolean() || s["pass"].is_null());
        assert!(s["timestamp"]["finished_unix_s"].as_f64().unwrap() > 0.0);
        for art in s["artifacts"].as_array().unwrap() {
            assert!(a.join(art.as_str().unwrap()).is_file(), "{args:?}: missing {art}");
        }
    }
}

#[test]
fn unknown_keys_exit_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = fluxlab(dir.path(), &["commutator", "--betta1", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("'betta1'"));
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "n = 32\nwidth = 3\n").unwrap();
    let o = fluxlab(dir.path(), &["seminorm", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("'width'"));
    let o = fluxlab(dir.path(), &["seminorm", "--n", "many"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn constant_field_has_zero_seminorm() {
    let dir = tempfile::tempdir().unwrap();
    let o = fluxlab(dir.path(), &["seminorm", "--source", "constant", "--value", "2.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(summary(dir.path())["result"]["value"], 0.0);
    let csv = std::fs::read_to_string(dir.path().join("shifts.csv")).unwrap();
    assert!(csv.lines().count() > 1);
}

#[test]
fn default_commutator_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = fluxlab(dir.path(), &["commutator"]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(dir.path());
    assert_eq!(s["pass"], true);
    let e = s["result"]["fit"]["exponent"].as_f64().unwrap();
    assert!(e >= 1.0 - 0.15, "{e}");
}

#[test]
fn seminorm_of_a_written_field_records_input_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    assert_eq!(fluxlab(&gen, &["gen", "--n", "32", "--octaves", "3"]).status.code(), Some(0));
    let field = gen.join("field");
    let out = dir.path().join("s");
    let o = fluxlab(&out, &["seminorm", "--source", "file", "--input", field.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let inputs = summary(&out)["inputs"].as_object().unwrap().clone();
    assert_eq!(inputs.len(), 3);
    assert!(summary(&out)["result"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn failed_assertions_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = fluxlab(
        dir.path(),
        &["check-hypotheses", "--theorem", "bounded_incompressible", "--boundary_velocity", "crossflow", "--n", "64",
          "--delta0", "0.3", "--probe_count", "2"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(summary(dir.path())["pass"], false);
}

#[test]
fn unwritable_output_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "").unwrap();
    let o = fluxlab(&file.join("sub"), &["taylor-defect", "--samples", "10"]);
    assert_eq!(o.status.code(), Some(1));
}
