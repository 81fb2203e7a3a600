use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chaotic-tc"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--output-dir").arg(out).output().unwrap()
}

/// Data rows of a CSV output as (header, rows of fields).
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

const SMALL: &[&str] = &["--sites", "6", "--realizations", "2", "--steps", "128", "--panel-count", "4", "--seed", "17"];

#[test]
fn selftest_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["selftest"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS basis_dimension"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn picket_fence_histogram_is_a_spike_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["spectrum", "--picket-fence", "--sites", "10"], dir.path());
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("spacing_histogram.csv"));
    let (cc, dc) = (column(&header, "s_bin_center"), column(&header, "density"));
    let bins: Vec<(f64, f64)> = rows.iter().map(|r| (r[cc].parse().unwrap(), r[dc].parse().unwrap())).collect();
    let width = bins[1].0 - bins[0].0;
    let nonzero: Vec<&(f64, f64)> = bins.iter().filter(|(_, p)| *p > 0.0).collect();
    assert_eq!(nonzero.len(), 1);
    let (center, density) = *nonzero[0];
    assert!((center - 1.0).abs() <= width / 2.0 + 1e-12);
    assert!((density * width - 1.0).abs() < 1e-12);
}

#[test]
fn decoupled_cavity_keeps_two_photons() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["dynamics", "--g-over-sigma", "0", "--sites", "6", "--steps", "64", "--realizations", "1", "--panel-count", "4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("cavity_population.csv"));
    let mc = column(&header, "n_c_mean");
    assert_eq!(rows.len(), 64);
    for r in &rows {
        let n: f64 = r[mc].parse().unwrap();
        assert!((n - 2.0).abs() < 1e-12);
    }
}

#[test]
fn reruns_and_worker_counts_give_identical_csvs() {
    let root = tempfile::tempdir().unwrap();
    let mut outputs = vec![];
    for (label, workers) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let dir = root.path().join(label);
        let mut args = vec!["dynamics", "--g-over-sigma", "0.1,1,2", "--workers", workers];
        args.extend_from_slice(SMALL);
        let out = run(&args, &dir);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn regimes_need_three_couplings() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["regimes", "--g-over-sigma", "0.1,1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn regimes_table_labels_every_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["regimes", "--g-over-sigma", "0.1,1,5"];
    args.extend_from_slice(SMALL);
    let out = run(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("regimes.csv"));
    let rc = column(&header, "regime_label");
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(["ergodic", "transition", "nonergodic"].contains(&r[rc].as_str()), "{}", r[rc]);
    }
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "sites = 4\nrealizations = 0\n").unwrap();
    let out = run(&["dynamics", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::write(&bad, "sites = 4\nunknown_key = 1\n").unwrap();
    let out = run(&["dynamics", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["dynamics", "--sites", "121"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_coupling_list_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    std::fs::write(&cfg, "g_over_sigma = []\n").unwrap();
    let out = run(&["dynamics", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_env");
    let out = bin().args(["selftest"]).env("CHAOTIC_TC_OUTPUT_DIR", &target).output().unwrap();
    assert!(out.status.success());
    assert!(target.join("manifest.json").exists());
}

#[test]
fn json_format_writes_json_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["spectrum", "--g-over-sigma", "0.5", "--format", "json"];
    args.extend_from_slice(SMALL);
    let out = run(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("normalized_energy.json")).unwrap();
    assert!(text.trim_start().starts_with('{'));
}
