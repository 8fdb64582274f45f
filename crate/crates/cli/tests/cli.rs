use std::path::Path;
use std::process::{Command, Output};

fn orbitrep(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbitrep"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Data rows of a CSV artifact: comment lines dropped, header kept separately.
fn rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let data = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, data)
}

#[test]
fn spectrum_writes_seventeen_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = orbitrep(
        dir.path(),
        &["spectrum", "--set", "naturals", "--alpha", "golden", "--n", "1e6", "--pmax", "8"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(dir.path(), "spectrum.csv");
    assert!(text.contains("# alpha_hex=0x9e3779b97f4a7c16\n"));
    assert!(text.contains("# n=1000000\n"));
    let (header, data) = rows(&text);
    assert_eq!(header, ["p", "re", "im"]);
    assert_eq!(data.len(), 17);
    let zero = data.iter().find(|r| r[0] == "0").unwrap();
    assert_eq!(zero[1].parse::<f64>().unwrap(), 1.0);
    assert_eq!(zero[2].parse::<f64>().unwrap(), 0.0);

    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "spectrum.json")).unwrap();
    assert_eq!(json["config"]["command"], "spectrum");
    assert_eq!(json["config"]["set"], "naturals");
    assert!(json["result"].is_object());
    assert!(!dir.path().join("spectrum.svg").exists());
}

#[test]
fn rational_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = orbitrep(
        dir.path(),
        &["rational", "--a", "1", "--q", "3", "--nu", "0.5,0.25,0.25", "--n", "1e6", "--check"],
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}");
    assert!(stdout.contains("check masses PASS"));
    let (_, data) = rows(&read(dir.path(), "rational.csv"));
    for (r, target) in data.iter().zip([0.5, 0.25, 0.25]) {
        assert!((r[2].parse::<f64>().unwrap() - target).abs() < 5e-3);
    }
}

#[test]
fn blocks_csv_tracks_one_third() {
    let dir = tempfile::tempdir().unwrap();
    let o = orbitrep(dir.path(), &["counterexample", "blocks", "--kmax", "12"]);
    assert_eq!(code(&o), 0);
    let (header, data) = rows(&read(dir.path(), "blocks.csv"));
    let k = header.iter().position(|h| h == "k").unwrap();
    let avg = header.iter().position(|h| h == "intersection_average").unwrap();
    let mut seen = 0;
    for r in &data {
        let kk: i32 = r[k].parse().unwrap();
        if (8..=12).contains(&kk) {
            let sign = if kk % 2 == 0 { 1.0 } else { -1.0 };
            assert!((r[avg].parse::<f64>().unwrap() - sign / 3.0).abs() < 0.05);
            seen += 1;
        }
    }
    assert_eq!(seen, 5);
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["rational", "--a", "3", "--q", "3", "--nu", "0.5,0.25,0.25"][..],
        &["rational", "--a", "1", "--q", "3", "--nu", "0.5,0.25,0.5"],
        &["rational", "--a", "1", "--q", "2", "--nu", "0.5,0.25,0.25"],
        &["spectrum", "--n", "1e9"],
        &["spectrum", "--pmax", "2000"],
        &["spectrum", "--bogus"],
        &["frobnicate"],
    ] {
        let o = orbitrep(dir.path(), args);
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn help_exits_zero() {
    let o = Command::new(env!("CARGO_BIN_EXE_orbitrep")).arg("--help").output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("counterexample"));
}

#[test]
fn failed_check_exits_two() {
    // the horizon is far too short for the density to settle
    let dir = tempfile::tempdir().unwrap();
    let o = orbitrep(
        dir.path(),
        &["rational", "--a", "1", "--q", "3", "--nu", "0.5,0.25,0.25", "--n", "20", "--check"],
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    // without --check the same run succeeds
    let o = orbitrep(dir.path(), &["rational", "--a", "1", "--q", "3", "--nu", "0.5,0.25,0.25", "--n", "20"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# defaults\nn = 5000\npmax = 2\nsvg = true\n").unwrap();
    let o = orbitrep(dir.path(), &["spectrum", "--config", cfg.to_str().unwrap(), "--pmax", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(dir.path(), "spectrum.csv");
    assert!(text.contains("# n=5000\n"));
    assert_eq!(rows(&text).1.len(), 7);
    assert!(read(dir.path(), "spectrum.svg").starts_with("<svg"));
}

#[test]
fn visit_reads_region_files() {
    let dir = tempfile::tempdir().unwrap();
    let region = dir.path().join("region.csv");
    std::fs::write(&region, "start,end\n0,0.25\n0.5,0.75\n").unwrap();
    let o = orbitrep(
        dir.path(),
        &["visit", "--n", "1e5", "--region-file", region.to_str().unwrap(), "--check"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "visit.json")).unwrap();
    assert!((json["result"]["region_measure"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["thin", "--seeds", "3", "--checkpoints", "1e3,1e4"];
    assert_eq!(code(&orbitrep(a.path(), &args)), 0);
    assert_eq!(code(&orbitrep(b.path(), &args)), 0);
    assert_eq!(read(a.path(), "thin.csv"), read(b.path(), "thin.csv"));
    assert_eq!(read(a.path(), "thin.json"), read(b.path(), "thin.json"));
}
