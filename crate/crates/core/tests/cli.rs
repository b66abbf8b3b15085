use std::path::Path;
use std::process::{Command, Output};

use qndlab::config::RunConfig;
use qndlab::output::{read_csv, Table};

const SMALL: &str = "[synth]\nsegment_length = 8192\nn_segments = 8\n";

fn qndlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qndlab"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn table(path: &Path) -> Table {
    read_csv(&std::fs::read_to_string(path).unwrap()).unwrap().1
}

fn column<'a>(t: &'a Table, name: &str) -> &'a [f64] {
    let i = t.names.iter().position(|n| n == name).unwrap_or_else(|| panic!("no column {name}"));
    &t.columns[i]
}

#[test]
fn vacuum_only_theory_is_shot_noise() {
    let dir = tempfile::tempdir().unwrap();
    let out = qndlab(dir.path(), &["--vacuum-only", "theory"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = table(&dir.path().join("theory_full.csv"));
    for name in ["s_xx", "s_yy"] {
        assert!(column(&t, name).iter().all(|v| (v - 1.0).abs() < 1e-9), "{name}");
    }
}

#[test]
fn budget_columns_sum_to_the_total() {
    let dir = tempfile::tempdir().unwrap();
    let out = qndlab(dir.path(), &["budget"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["budget_signal.csv", "budget_meter.csv", "budget_residual.csv"] {
        let t = table(&dir.path().join(file));
        let total = column(&t, "total");
        for (k, want) in total.iter().enumerate() {
            let sum: f64 = t.names.iter().zip(&t.columns).filter(|(n, _)| *n != "frequency_hz" && *n != "total").map(|(_, c)| c[k]).sum();
            assert!((sum - want).abs() <= 1e-9 * want.abs().max(1.0), "{file} row {k}: {sum} vs {want}");
        }
    }
}

#[test]
fn same_seed_gives_identical_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let mut files = Vec::new();
    for (sub, seed) in [("a", "5"), ("b", "5"), ("c", "6")] {
        let d = dir.path().join(sub);
        let out = qndlab(&d, &["--config", &cfg, "--seed", seed, "synth"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        files.push(std::fs::read(d.join("dataset.qndl")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_ne!(files[0], files[2]);
}

#[test]
fn estimate_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[synth]\nsegment_length = 65536\nn_segments = 8\n[estimate]\nband_widths_hz = [600.0]\n");
    assert!(qndlab(dir.path(), &["--config", &cfg, "synth"]).status.success());
    let data = dir.path().join("dataset.qndl");
    let out = qndlab(dir.path(), &["--config", &cfg, "estimate", data.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["spectra.csv", "consistency.csv", "residual_banded_600hz.csv", "report.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("config_hash"));
}

#[test]
fn all_spiked_data_is_a_pipeline_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &format!("{SMALL}spike_rate = 100000.0\nspike_amplitude = 1000.0\n"));
    assert!(qndlab(dir.path(), &["--config", &cfg, "synth"]).status.success());
    let data = dir.path().join("dataset.qndl");
    let out = qndlab(dir.path(), &["--config", &cfg, "estimate", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn flat_fit_direction_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        &format!(
            "{SMALL}[fit]\ninclude_signal = false\nn_starts = 6\n\
             [[fit.bounds]]\nparam = \"signal_phase\"\nlo = -0.08\nhi = 0.02\n"
        ),
    );
    let out = qndlab(dir.path(), &["--config", &cfg, "fit"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("fit_report.txt")).unwrap();
    assert!(report.contains("degenerate = true"), "{report}");
}

#[test]
fn error_families_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = config(dir.path(), "[run]\nsede = 1\n");
    assert_eq!(qndlab(dir.path(), &["--config", &unknown, "theory"]).status.code(), Some(2));
    assert_eq!(qndlab(dir.path(), &["--workers", "0", "theory"]).status.code(), Some(2));
    assert_eq!(qndlab(dir.path(), &["--channels", "bogus", "theory"]).status.code(), Some(2));

    let missing = dir.path().join("absent.qndl");
    assert_eq!(qndlab(dir.path(), &["estimate", missing.to_str().unwrap()]).status.code(), Some(3));

    let junk = dir.path().join("junk.qndl");
    std::fs::write(&junk, b"not a dataset").unwrap();
    assert_eq!(qndlab(dir.path(), &["estimate", junk.to_str().unwrap()]).status.code(), Some(4));

    let bad = config(dir.path(), "[cavity]\nkappa_input_hz = -1.0\n");
    assert_eq!(qndlab(dir.path(), &["--config", &bad, "theory"]).status.code(), Some(2));
}

#[test]
fn printed_defaults_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = qndlab(dir.path(), &["--print-defaults"]);
    assert!(out.status.success());
    let cfg = RunConfig::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.hash(), RunConfig::default().hash());
}
