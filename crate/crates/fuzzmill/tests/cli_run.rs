//! End-to-end tests through the compiled binary: subcommands, exit codes,
//! and file outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fuzzmill(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fuzzmill"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .unwrap()
}

fn git(dir: &Path, args: &[&str]) {
    let out = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(args)
        .env("GIT_AUTHOR_NAME", "tester")
        .env("GIT_AUTHOR_EMAIL", "t@example.com")
        .env("GIT_COMMITTER_NAME", "tester")
        .env("GIT_COMMITTER_EMAIL", "t@example.com")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "git {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// A repo whose harness content changes on every second commit.
fn fixture_repo(dir: &Path, commits: usize) {
    git(dir, &["init", "-q", "-b", "main"]);
    git(dir, &["config", "commit.gpgsign", "false"]);
    for i in 0..commits {
        std::fs::write(dir.join("harness.c"), format!("content v{}\n", i / 2)).unwrap();
        std::fs::write(dir.join("log.txt"), format!("commit {i}\n")).unwrap();
        git(dir, &["add", "."]);
        git(dir, &["commit", "-q", "-m", &format!("c{i}")]);
    }
}

fn write_scan_config(dir: &Path, repo: &Path, out: &str) -> PathBuf {
    let path = dir.join("scan.toml");
    std::fs::write(
        &path,
        format!(
            r#"
output_dir = "{out}"
[stream]
mode = "repo"
[stream.repo]
path = "{}"
branch = "main"
[build]
timeout_secs = 60
[[build.targets]]
name = "harness"
command = "cp {{workdir}}/harness.c {{out}}"
[selection]
library = "fixture"
"#,
            repo.display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn scan_reports_identical_fraction_and_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = tmp.path().join("repo");
    std::fs::create_dir_all(&repo).unwrap();
    fixture_repo(&repo, 9); // pairs: 8, identical: v changes at commits 2,4,6,8 -> 4 identical
    let config = write_scan_config(tmp.path(), &repo, "scan-out");
    let out = fuzzmill(&config, &["scan", "--commits", "9"]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("8 pairs compared"), "stdout: {stdout}");
    assert!(stdout.contains("identical fraction 0.50"), "stdout: {stdout}");
    let stats_json = tmp.path().join("scan-out/selection_stats.json");
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&stats_json).unwrap()).unwrap();
    assert_eq!(stats["per_library"][0]["commits_processed"], 8);
    assert!(tmp.path().join("scan-out/selection_stats.csv").exists());
    assert!(tmp.path().join("scan-out/savings.json").exists());
    assert!(tmp.path().join("scan-out/fingerprints.tsv").exists());
}

#[test]
fn scan_with_one_commit_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let repo = tmp.path().join("repo");
    std::fs::create_dir_all(&repo).unwrap();
    fixture_repo(&repo, 3);
    let config = write_scan_config(tmp.path(), &repo, "scan-out");
    let out = fuzzmill(&config, &["scan", "--commits", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 2"));
}

#[test]
fn run_on_synth_stream_produces_job_log_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("model.txt"),
        "edges 8 2\nrate 0.02 0.5\nB1 5 0.01 1.0 0\n",
    )
    .unwrap();
    let config = tmp.path().join("run.toml");
    std::fs::write(
        &config,
        r#"
rng_seed = 5
output_dir = "run-out"
[stream]
mode = "synth"
[stream.synth]
n_commits = 6
file_universe = ["src/a.c", "src/b.c", "docs/x.html"]
merge_probability = 0.2
[campaign]
ensemble_size = 2
[[campaign.backends]]
name = "m0"
kind = "mock"
model = "model.txt"
[[campaign.backends]]
name = "m1"
kind = "mock"
model = "model.txt"
[scheduler]
core_budget = 6
"#,
    )
    .unwrap();
    let out = fuzzmill(&config, &["run"]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out_dir = tmp.path().join("run-out");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["commits_processed"], 6);
    assert_eq!(summary["commits_failed"], 0);
    assert!(out_dir.join("job_log.tsv").exists());
    assert!(out_dir.join("selection_stats.json").exists());
    // Job log decisions are drawn from the documented vocabulary.
    let log = std::fs::read_to_string(out_dir.join("job_log.tsv")).unwrap();
    for line in log.lines() {
        let decision = line.split('\t').nth(2).unwrap();
        assert!(
            ["fuzz", "skip", "error", "snapshot", "interrupted", "cancelled"]
                .contains(&decision),
            "unexpected decision {decision}"
        );
    }
}

#[test]
fn run_with_scripted_external_backend_collects_findings() {
    let tmp = tempfile::tempdir().unwrap();
    // Fake fuzzer: copies its seed corpus out, adds one "finding" with
    // coverage, and drops a crash artifact attributing a known bug.
    let config = tmp.path().join("run.toml");
    std::fs::write(
        &config,
        r#"
rng_seed = 5
output_dir = "run-out"
[stream]
mode = "synth"
[stream.synth]
n_commits = 2
file_universe = ["src/a.c"]
merge_probability = 0.0
[build]
[[build.targets]]
name = "t0"
command = "unused"
[campaign]
ensemble_size = 1
[[campaign.backends]]
name = "fake"
kind = "external"
command = "printf 'hello' > {corpus_out}/finding1; echo 'finding1 7 9' > {corpus_out}/coverage; touch '{artifacts}/crash_bug:CVE-1.bin'; sleep {duration_s}"
[scheduler]
core_budget = 3
[scheduler.ladder]
low = 1
medium = 2
high = 3
"#,
    )
    .unwrap();
    let out = fuzzmill(&config, &["run"]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out_dir = tmp.path().join("run-out");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["detected"][0], "CVE-1");
    // The finding landed in the persisted corpus with its coverage.
    let corpus = fuzzmill::corpus::Corpus::load("t0", &out_dir.join("corpus")).unwrap();
    assert!(corpus.iter().any(|i| i.bytes == b"hello"));
    let edges = corpus.edge_union();
    assert!(edges.contains(&7) && edges.contains(&9));
}

#[test]
fn simulate_honors_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("model.txt"),
        "edges 8 2\nrate 0.02 0.5\nB1 5 0.01 1.0 0\n",
    )
    .unwrap();
    let config = tmp.path().join("sim.toml");
    std::fs::write(
        &config,
        r#"
rng_seed = 5
output_dir = "sim-out"
[stream]
mode = "synth"
[stream.synth]
n_commits = 2
file_universe = ["a.c"]
merge_probability = 0.0
[[simulate.models]]
name = "demo"
path = "model.txt"
"#,
    )
    .unwrap();
    let out = fuzzmill(
        &config,
        &[
            "simulate",
            "--durations",
            "60,120",
            "--trials",
            "3",
            "--commits-per-trial",
            "2",
        ],
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let sweep: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("sim-out/sweep.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(sweep["durations_s"], serde_json::json!([60, 120]));
    assert_eq!(sweep["per_library"]["demo"][0]["trials"], 3);
}

#[test]
fn simulate_without_models_is_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("sim.toml");
    std::fs::write(
        &config,
        r#"
[stream]
mode = "synth"
[stream.synth]
n_commits = 2
file_universe = ["a.c"]
merge_probability = 0.0
"#,
    )
    .unwrap();
    let out = fuzzmill(&config, &["simulate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulate.models"));
}

#[test]
fn missing_config_is_fatal() {
    let out = fuzzmill(Path::new("/no/such/config.toml"), &["run"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("model.txt"),
        "edges 16 2\nrate 0.01 0.5\nB1 7 0.05 1.0 0\nB2 13 0.02 0.8 0\n",
    )
    .unwrap();
    let config = tmp.path().join("sim.toml");
    std::fs::write(
        &config,
        r#"
rng_seed = 1
output_dir = "out"
[stream]
mode = "synth"
[stream.synth]
n_commits = 2
file_universe = ["a.c"]
merge_probability = 0.0
[simulate]
durations_s = [60, 120, 240]
trials = 6
commits_per_trial = 2
[[simulate.models]]
name = "demo"
path = "model.txt"
"#,
    )
    .unwrap();
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["--out", out];
        args.extend_from_slice(extra);
        args.push("simulate");
        let o = Command::new(env!("CARGO_BIN_EXE_fuzzmill"))
            .current_dir(tmp.path())
            .arg("--config")
            .arg(&config)
            .args(&args)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(tmp.path().join(out).join("sweep.json")).unwrap()
    };
    let baseline = run(&[], "a");
    let same_seed = run(&["--seed", "1"], "b");
    let other_seed = run(&["--seed", "2"], "c");
    assert_eq!(baseline, same_seed);
    assert_ne!(baseline, other_seed);
}
