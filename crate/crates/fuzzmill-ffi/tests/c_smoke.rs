//! Compiles and runs a real C program against the generated header and the
//! built cdylib.

use std::path::PathBuf;
use std::process::Command;

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "fuzzmill.h"

int main(void) {
    fm_scrub_rules *rules = fm_scrub_rules_default();
    const char *a = "bin 2024-01-02T03:04:05Z tail";
    const char *b = "bin 2030-09-08T07:06:05Z tail";
    uint8_t da[32], db[32];
    if (fm_fingerprint(rules, (const uint8_t *)a, strlen(a), da) != FM_STATUS_OK) return 1;
    if (fm_fingerprint(rules, (const uint8_t *)b, strlen(b), db) != FM_STATUS_OK) return 2;
    if (memcmp(da, db, 32) != 0) return 3; /* timestamps must be scrubbed */
    fm_scrub_rules_free(rules);

    fm_model *model = fm_model_parse("edges 8 2\nrate 0.1 0.5\nB1 5 0.05 1.0 0\n");
    if (!model) return 4;
    fm_corpus *corpus = fm_corpus_new("t");
    uint32_t roots[2] = {0, 1};
    if (fm_corpus_add_input(corpus, NULL, 0, roots, 2) != FM_STATUS_OK) return 5;
    fm_campaign_counts counts;
    int detected = 0;
    for (uint64_t seed = 0; seed < 10; seed++) {
        if (fm_mock_campaign(model, 500.0, seed, true, corpus, corpus, &counts) != FM_STATUS_OK)
            return 6;
        if (counts.detected > counts.triggered || counts.triggered > counts.reached) return 7;
        detected += (int)counts.detected;
    }
    if (detected == 0) return 8;
    fm_corpus *minimized = fm_corpus_minimize(corpus);
    if (fm_corpus_edge_count(minimized) != fm_corpus_edge_count(corpus)) return 9;
    printf("ok version=%s inputs=%zu minimized=%zu\n",
           fm_version(), fm_corpus_len(corpus), fm_corpus_len(minimized));
    fm_corpus_free(minimized);
    fm_corpus_free(corpus);
    fm_model_free(model);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include_dir = manifest.join("include");
    // CARGO_TARGET_TMPDIR is <target>/tmp; the cdylib lands next to it,
    // either uplifted into debug/ or under debug/deps. Take the newest.
    let target_tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let debug_dir = target_tmp.parent().unwrap().join("debug");
    let mut candidates: Vec<PathBuf> = [debug_dir.clone(), debug_dir.join("deps")]
        .iter()
        .flat_map(|d| std::fs::read_dir(d).into_iter().flatten().flatten())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("libfuzzmill_ffi") && n.ends_with(".so"))
        })
        .collect();
    candidates.sort_by_key(|p| std::fs::metadata(p).and_then(|m| m.modified()).ok());
    let lib = candidates.pop().expect("cdylib built as part of this crate's lib target");
    let lib_dir = lib.parent().unwrap().to_path_buf();

    let src = target_tmp.join("fuzzmill_smoke.c");
    let bin = target_tmp.join("fuzzmill_smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let compile = Command::new("cc")
        .arg(&src)
        .arg("-o")
        .arg(&bin)
        .arg(format!("-I{}", include_dir.display()))
        .arg(format!("-L{}", lib_dir.display()))
        .arg("-lfuzzmill_ffi")
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-Wall")
        .arg("-Werror")
        .output()
        .unwrap();
    assert!(
        compile.status.success(),
        "cc failed: {}",
        String::from_utf8_lossy(&compile.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert!(
        run.status.success(),
        "smoke test exited {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout)
    );
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.starts_with("ok version=0.1.0"), "stdout: {stdout}");
}
