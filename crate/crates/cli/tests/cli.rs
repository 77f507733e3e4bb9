//! End-to-end runs of the `incbeam` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn incbeam(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_incbeam"))
        .args(args)
        .env("BEAM_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("incbeam-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = "nt=6\nk=3\ndrops=20\nsinr_grid_db=0,6,12\nschemes=MRT,ZF,OPT_exact,OPT_eq8,OPT_eq9,full_redesign\n";

#[test]
fn deterministic_output_does_not_depend_on_thread_count() {
    let dir = scratch_dir("det");
    let cfg = write_config(&dir, SMALL);
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let csv = dir.join(format!("t{threads}.csv"));
        let csv_arg = csv.to_string_lossy().into_owned();
        let out = incbeam(
            &["run", "--config", &cfg, "--scenario", "gamma_change", "--deterministic", "--out", &csv_arg],
            threads,
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let meta = dir.join(format!("t{threads}.csv.meta.txt"));
        files.push((std::fs::read(&csv).unwrap(), std::fs::read(&meta).unwrap()));
        assert!(dir.join(format!("t{threads}.gp")).exists());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files[0].0.clone()).unwrap();
    assert!(text.starts_with("sinr_db,scheme,scenario,mode,"));
    assert_eq!(text.lines().count(), 1 + 3 * 6);
    assert!(!String::from_utf8_lossy(&files[0].1).contains("generated_unix"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn table_goes_to_stdout_without_out() {
    let out = incbeam(&["run", "--nt", "4", "--k", "2", "--drops", "5", "--deterministic"], "1");
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with("sinr_db,"));
    assert!(text.contains(",OPT_exact,user_in,exact_refit,"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = scratch_dir("bad");
    for text in ["nt=8\nbogus_key=1\n", "nt=eight\n", "nt=4\nk=9\n", "schemes=MRT,nope\n"] {
        let cfg = write_config(&dir, text);
        let out = incbeam(&["run", "--config", &cfg], "1");
        assert_eq!(out.status.code(), Some(2), "config {text:?}");
    }
    let missing = incbeam(&["run", "--config", "/nonexistent/incbeam.cfg"], "1");
    assert_eq!(missing.status.code(), Some(2));
    let bad_flag = incbeam(&["run", "--scenario", "sideways"], "1");
    assert_eq!(bad_flag.status.code(), Some(2));
    let bad_threads = incbeam(&["run", "--drops", "1"], "many");
    assert_eq!(bad_threads.status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn verify_passes_on_a_small_config() {
    let out = incbeam(&["verify", "--nt", "6", "--k", "3", "--drops", "4"], "1");
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
    assert!(text.contains("zf_direct_vs_block"));
}

#[test]
fn bench_reports_every_kernel() {
    let dir = scratch_dir("bench");
    let cfg = write_config(&dir, "bench_fixed_nt=16\nbench_k=2,4,8\nbench_fixed_k=2\nbench_nt=4,8,16\nbench_reps=3\n");
    let out = incbeam(&["bench", "--config", &cfg], "1");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("op,axis,slope_flops,slope_time"));
    assert_eq!(table.lines().count(), 9);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("op,axis,nt,k,flops,median_ns"));
    let _ = std::fs::remove_dir_all(&dir);
}
