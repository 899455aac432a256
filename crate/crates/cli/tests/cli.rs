use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mpcest::beamspace::SearchGrid;
use mpcest::config::SounderConfig;
use mpcest::estimators::{EstimateFile, EstimateSet, EstimatorConfig};
use mpcest::evaluation::as_estimates;
use mpcest::mpc::load_gt_csv;
use mpcest::synthesis::{content_hash, MeasurementSet};
use tempfile::TempDir;

const NOISE_FREE: &str = r#"{"sounder":{"preset":"17x17-1GHz","noise_psd":0.0},"pattern":{"kind":"isotropic"},"scenario":{"builtin":"single-mpc"}}"#;
const NOISY: &str = r#"{"sounder":{"preset":"17x17-1GHz","snr_db":20.0},"pattern":{"kind":"cosine_power"},"scenario":{"builtin":"single-mpc"},"seed":5}"#;

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("cfg.json"), config).unwrap();
        Sandbox { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mpcest"));
        cmd.current_dir(self.dir.path()).env_remove("MPCEST_OUTPUT_DIR").arg("--config").arg("cfg.json");
        cmd.args(args).output().unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }
}

fn code(out: &Output) -> Option<i32> {
    out.status.code()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn synth_writes_three_rotations_of_full_tensors() {
    let sb = Sandbox::new(NOISE_FREE);
    sb.ok(&["--output-dir", "o", "synth", "--scenario", "five-scatterers"]);
    let m = MeasurementSet::load(&sb.path("o/measurement.bin")).unwrap();
    let n = SounderConfig::preset("17x17-1GHz").unwrap().n_freq;
    assert_eq!(m.tensors.len(), 3);
    assert!(m.tensors.iter().all(|t| t.len() == 17 * 17 * n));
    assert_eq!(load_gt_csv(&sb.path("o/gt.csv")).unwrap().len(), 5);
}

#[test]
fn synth_is_byte_identical_for_same_seed() {
    let sb = Sandbox::new(NOISY);
    sb.ok(&["--output-dir", "a", "synth"]);
    sb.ok(&["--output-dir", "b", "--threads", "1", "synth"]);
    sb.ok(&["--output-dir", "c", "--seed", "6", "synth"]);
    assert_eq!(read(&sb.path("a/measurement.bin")), read(&sb.path("b/measurement.bin")));
    assert_eq!(read(&sb.path("a/gt.csv")), read(&sb.path("b/gt.csv")));
    assert_ne!(read(&sb.path("a/measurement.bin")), read(&sb.path("c/measurement.bin")));
}

#[test]
fn missing_ground_truth_file_is_a_usage_error_naming_the_path() {
    let sb = Sandbox::new(NOISE_FREE);
    let out = sb.run(&["synth", "--gt", "no/such/gt.csv"]);
    assert_eq!(code(&out), Some(2));
    assert!(stderr(&out).contains("no/such/gt.csv"));
}

#[test]
fn corrupt_measurement_is_a_data_error() {
    let sb = Sandbox::new(NOISE_FREE);
    std::fs::write(sb.path("bad.bin"), b"{\"format\":\"measurement\"}\n\x01\x02").unwrap();
    assert_eq!(code(&sb.run(&["extract", "bad.bin"])), Some(3));
    sb.ok(&["synth"]);
    let mut bytes = read(&sb.path("measurement.bin"));
    bytes.truncate(bytes.len() - 7);
    std::fs::write(sb.path("short.bin"), bytes).unwrap();
    assert_eq!(code(&sb.run(&["extract", "short.bin"])), Some(3));
}

#[test]
fn unknown_algorithm_is_a_usage_error() {
    let sb = Sandbox::new(NOISE_FREE);
    sb.ok(&["synth"]);
    let out = sb.run(&["extract", "measurement.bin", "--algorithm", "music"]);
    assert_eq!(code(&out), Some(2));
    let err = stderr(&out);
    assert!(err.contains("possible values") && err.contains("Usage: mpcest"), "{err}");
}

#[test]
fn clean_and_rimax_agree_on_a_single_noise_free_path() {
    let sb = Sandbox::new(NOISE_FREE);
    sb.ok(&["synth"]);
    sb.ok(&["extract", "measurement.bin", "--algorithm", "clean"]);
    sb.ok(&["extract", "measurement.bin", "--algorithm", "rimax"]);
    let clean = EstimateFile::load(&sb.path("estimates-clean.json")).unwrap().estimate_set();
    let rimax = EstimateFile::load(&sb.path("estimates-rimax.json")).unwrap().estimate_set();
    assert_eq!(clean.mpcs.len(), 1);
    assert_eq!(rimax.mpcs.len(), 1);

    let est = EstimatorConfig::default();
    let [da, de, dt] = SearchGrid::new(&SounderConfig::preset("17x17-1GHz").unwrap(), est.coarse_os, est.fine_os).fine_steps();
    let (a, b) = (clean.mpcs[0].mu, rimax.mpcs[0].mu);
    assert!((a.az - b.az).abs() <= da);
    assert!((a.el - b.el).abs() <= de);
    assert!((a.delay - b.delay).abs() <= dt);
}

fn write_estimates(sb: &Sandbox, name: &str, set: &EstimateSet) -> PathBuf {
    let bytes = read(&sb.path("measurement.bin"));
    let m = MeasurementSet::read(bytes.as_slice()).unwrap();
    let file = EstimateFile::new(set, &m.config, &EstimatorConfig::default(), &content_hash(&bytes), Some(sb.path("measurement.bin").display().to_string()));
    let p = sb.path(name);
    file.save(&p).unwrap();
    p
}

#[test]
fn ground_truth_as_estimates_gives_a_zero_error_table() {
    let sb = Sandbox::new(NOISE_FREE);
    sb.ok(&["synth", "--scenario", "five-scatterers"]);
    let gt = load_gt_csv(&sb.path("gt.csv")).unwrap();
    let mut set = EstimateSet::empty("oracle");
    set.mpcs = as_estimates(&gt);
    let p = write_estimates(&sb, "est.json", &set);
    let stdout = sb.ok(&["evaluate", p.to_str().unwrap(), "--gt", "gt.csv"]);
    let rows: Vec<&str> = stdout.lines().filter(|l| l.starts_with("oracle") && l.contains('%')).collect();
    assert_eq!(rows.len(), 2, "{stdout}");
    for r in rows {
        let cells: Vec<f64> = r.split_whitespace().skip(2).take(4).map(|c| c.parse().unwrap()).collect();
        assert!(cells.iter().all(|c| *c == 0.0), "{r}");
    }
    let nmse: serde_json::Value = serde_json::from_slice(&read(&sb.path("evaluation-oracle/nmse.json"))).unwrap();
    assert!(nmse["nmse"].as_f64().unwrap() < 1e-12);
    assert!(sb.path("evaluation-oracle/association.csv").exists());
    assert!(sb.path("evaluation-oracle/summary.json").exists());
}

#[test]
fn empty_estimates_give_unit_nmse_and_an_empty_table() {
    let sb = Sandbox::new(NOISE_FREE);
    sb.ok(&["synth"]);
    let p = write_estimates(&sb, "est.json", &EstimateSet::empty("none"));
    let stdout = sb.ok(&["evaluate", p.to_str().unwrap()]);
    let nmse: serde_json::Value = serde_json::from_slice(&read(&sb.path("evaluation-none/nmse.json"))).unwrap();
    assert_eq!(nmse["nmse"].as_f64(), Some(1.0));
    let row = stdout.lines().find(|l| l.starts_with("none") && l.contains("50%")).unwrap();
    assert!(row.split_whitespace().skip(2).take(4).all(|c| c == "-"), "{row}");
}

#[test]
fn no_gt_reports_only_the_nmse() {
    let sb = Sandbox::new(r#"{"sounder":{"preset":"17x17-1GHz","noise_psd":0.0},"pattern":{"kind":"isotropic"}}"#);
    sb.ok(&["synth", "--scenario", "single-mpc"]);
    sb.ok(&["extract", "measurement.bin"]);
    assert_eq!(code(&sb.run(&["evaluate", "estimates-clean.json"])), Some(2));
    let stdout = sb.ok(&["evaluate", "estimates-clean.json", "--no-gt"]);
    assert!(stdout.contains("NMSE"));
    assert!(sb.path("evaluation-clean/nmse.json").exists());
    assert!(!sb.path("evaluation-clean/association.csv").exists());
}

#[test]
fn mismatched_measurement_warns_and_proceeds() {
    let sb = Sandbox::new(NOISY);
    sb.ok(&["synth"]);
    sb.ok(&["extract", "measurement.bin"]);
    sb.ok(&["--seed", "9", "--output-dir", "other", "synth"]);
    let out = sb.run(&["evaluate", "estimates-clean.json", "--measurement", "other/measurement.bin"]);
    assert_eq!(code(&out), Some(0));
    assert!(stderr(&out).contains("warning"));
    let nmse: serde_json::Value = serde_json::from_slice(&read(&sb.path("evaluation-clean/nmse.json"))).unwrap();
    assert_eq!(nmse["hash_matches"], serde_json::Value::Bool(false));
}

#[test]
fn pipeline_outputs_do_not_depend_on_thread_count() {
    let sb = Sandbox::new(NOISY);
    for (dir, threads) in [("t1", "1"), ("t4", "4")] {
        sb.ok(&["--output-dir", dir, "--threads", threads, "synth"]);
        let m = format!("{dir}/measurement.bin");
        sb.ok(&["--output-dir", dir, "--threads", threads, "extract", &m, "--algorithm", "sage"]);
        let e = format!("{dir}/estimates-sage.json");
        sb.ok(&["--output-dir", dir, "--threads", threads, "evaluate", &e, "--gt", &format!("{dir}/gt.csv")]);
    }
    for f in ["measurement.bin", "evaluation-sage/errors.csv", "evaluation-sage/summary.json", "evaluation-sage/association.csv"] {
        assert_eq!(read(&sb.path(&format!("t1/{f}"))), read(&sb.path(&format!("t4/{f}"))), "{f}");
    }
    let strip = |p: &str| {
        let mut v: serde_json::Value = serde_json::from_slice(&read(&sb.path(p))).unwrap();
        v["measurement_path"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip("t1/estimates-sage.json"), strip("t4/estimates-sage.json"));
}

#[test]
fn output_dir_flag_beats_environment_beats_config() {
    let sb = Sandbox::new(r#"{"sounder":{"preset":"17x17-1GHz","noise_psd":0.0},"pattern":{"kind":"isotropic"},"scenario":{"builtin":"single-mpc"},"output_dir":"from-config"}"#);
    sb.ok(&["synth"]);
    assert!(sb.path("from-config/measurement.bin").exists());
    let env_run = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_mpcest")).current_dir(sb.dir.path()).env("MPCEST_OUTPUT_DIR", "from-env").args(["--config", "cfg.json"]).args(args).output().unwrap();
        assert!(out.status.success());
    };
    env_run(&["synth"]);
    assert!(sb.path("from-env/measurement.bin").exists());
    env_run(&["--output-dir", "from-flag", "synth"]);
    assert!(sb.path("from-flag/measurement.bin").exists());
}

#[test]
fn report_writes_plots_and_table() {
    let sb = Sandbox::new(NOISE_FREE);
    sb.ok(&["synth"]);
    sb.ok(&["extract", "measurement.bin"]);
    let stdout = sb.ok(&["report", "estimates-clean.json", "--gt", "gt.csv"]);
    assert!(stdout.contains("50%") && stdout.contains("90%"));
    for f in ["az-delay.svg", "cdf-clean.svg", "percentiles.json", "percentiles.txt"] {
        assert!(sb.path(&format!("report/{f}")).exists(), "{f}");
    }
}

#[test]
fn invalid_config_is_a_usage_error() {
    let sb = Sandbox::new(r#"{"sounder":{"preset":"17x17-1GHz"},"bogus":1}"#);
    assert_eq!(code(&sb.run(&["synth"])), Some(2));
    let sb = Sandbox::new(r#"{"sounder":{"preset":"99x99"}}"#);
    assert_eq!(code(&sb.run(&["synth", "--scenario", "single-mpc"])), Some(2));
}

#[test]
fn shipped_configs_synthesize_their_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for preset in ["17x17-1GHz", "17x17-2GHz", "35x35-1GHz", "35x35-2GHz"] {
        let sb = Sandbox::new(&std::fs::read_to_string(dir.join(format!("{preset}.json"))).unwrap());
        sb.ok(&["synth"]);
        let m = MeasurementSet::load(&sb.path("measurement.bin")).unwrap();
        let want = SounderConfig::preset(preset).unwrap();
        assert_eq!((m.config.nx, m.config.n_freq), (want.nx, want.n_freq), "{preset}");
        assert_eq!(load_gt_csv(&sb.path("gt.csv")).unwrap().len(), 5, "{preset}");
    }
}
