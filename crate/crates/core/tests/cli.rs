use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn synthwave(args: &[&str], scenario: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synthwave"))
        .args(args)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

/// Bundled scenario with text substitutions, written into `dir`.
fn variant(dir: &Path, name: &str, edits: &[(&str, &str)]) -> PathBuf {
    let mut text = fs::read_to_string(bundled(name)).unwrap();
    for (from, to) in edits {
        assert!(text.contains(from), "{from} not in {name}");
        text = text.replacen(from, to, 1);
    }
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Data rows of a CSV written by the tool (metadata and header skipped).
fn rows(path: &Path) -> Vec<csv::StringRecord> {
    let text = fs::read_to_string(path).unwrap();
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    csv::Reader::from_reader(body.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn synthesize_five_wave_map() {
    let out = tempfile::tempdir().unwrap();
    let o = synthwave(&["synthesize"], &bundled("five_wave_map.scn"), out.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let path = out.path().join("synthesize_processes.csv");
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# command: synthesize\n# scenario_digest: "));
    assert!(text.contains("# input_hash: "));
    let admitted: Vec<_> = rows(&path).into_iter().filter(|r| &r[8] == "true").collect();
    assert_eq!(admitted.len(), 1);
    assert_eq!(&admitted[0][1], "d†³ a c");
    assert!(out.path().join("synthesize.json").exists());
}

#[test]
fn conserve_excludes_mismatched_pair() {
    let out = tempfile::tempdir().unwrap();
    let o = synthwave(&["conserve"], &bundled("visible_telecom.scn"), out.path());
    assert_eq!(o.status.code(), Some(0));
    let verdicts: Vec<(String, String, String)> = rows(&out.path().join("conserve_pairs.csv"))
        .iter()
        .map(|r| (r[0].to_string(), r[1].to_string(), r[7].to_string()))
        .collect();
    assert_eq!(
        verdicts,
        [
            ("bm2".into(), "ap1".into(), "excluded".into()),
            ("bm2".into(), "ap2".into(), "pass".into()),
            ("am1".into(), "ap1".into(), "pass".into()),
        ]
    );
}

#[test]
fn counts_are_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let scn = variant(
        dir.path(),
        "visible_telecom.scn",
        &[("duration = 4.0", "duration = 0.2")],
    );
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let o = synthwave(&["counts", "--seed", seed], &scn, &out);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files: Vec<_> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        files.sort();
        files
            .iter()
            .map(|p| (p.file_name().unwrap().to_owned(), fs::read(p).unwrap()))
            .collect::<Vec<_>>()
    };
    let a = run("a", "7");
    assert!(a.len() >= 4, "car table plus one histogram per pair");
    assert_eq!(a, run("b", "7"));
    assert_ne!(a, run("c", "8"));
}

#[test]
fn franson_sweep_has_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let scn = variant(dir.path(), "franson.scn", &[("duration = 2.0", "duration = 0.05")]);
    let out = dir.path().join("out");
    let o = synthwave(&["franson"], &scn, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = rows(&out.join("franson_phase_sweep.csv"));
    assert_eq!(sweep.len(), 16);
    let phi: Vec<f64> = sweep.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(phi[0], 0.0);
    assert!((phi[8] - std::f64::consts::PI).abs() < 1e-12);
    let vis = rows(&out.join("franson_visibility.csv"));
    let methods: Vec<&str> = vis.iter().map(|r| r.get(0).unwrap()).collect();
    assert_eq!(methods, ["car", "raw_counts"]);
}

#[test]
fn json_format_writes_only_the_report() {
    let out = tempfile::tempdir().unwrap();
    let o = synthwave(
        &["conserve", "--format", "json"],
        &bundled("visible_telecom.scn"),
        out.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let names: Vec<_> = fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names, ["conserve.json"]);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(out.path().join("conserve.json")).unwrap()).unwrap();
    assert_eq!(v["command"], "conserve");
    assert_eq!(v["exit_code"], 0);
    assert_eq!(v["tables"][0]["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn unknown_key_is_rejected_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let scn = variant(dir.path(), "five_wave_map.scn", &[("seed = ", "sede = 4\nseed = ")]);
    let o = synthwave(&["synthesize"], &scn, &dir.path().join("a"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sede"));
    let o = synthwave(&["synthesize", "--allow-unknown"], &scn, &dir.path().join("b"));
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sede"));
}

#[test]
fn bad_scenarios_exit_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.scn");
    fs::write(&broken, "name = \"x\"\n[[modes]\nlabel = 1\n").unwrap();
    let o = synthwave(&["synthesize"], &broken, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.scn:2:"));

    let o = synthwave(&["synthesize"], &dir.path().join("missing.scn"), &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));

    let undeclared = variant(dir.path(), "five_wave_map.scn", &[("\"a\"", "\"zz\"")]);
    let o = synthwave(&["synthesize"], &undeclared, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_runs_every_step() {
    let dir = tempfile::tempdir().unwrap();
    let scn = variant(
        dir.path(),
        "fivewave_sweep.scn",
        &[("duration = ", "duration = 0.05 # ")],
    );
    let out = dir.path().join("out");
    let o = synthwave(&["report"], &scn, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for t in [
        "synthesize_processes",
        "conserve_pairs",
        "simulate_numbers",
        "sweep_fit",
        "counts_car",
    ] {
        assert!(out.join(format!("report_{t}.csv")).exists(), "{t}");
    }
    let fit = rows(&out.join("report_sweep_fit.csv"));
    let exponent: f64 = fit[0][2].parse().unwrap();
    assert!((exponent - 3.0).abs() < 0.05, "{exponent}");
}
