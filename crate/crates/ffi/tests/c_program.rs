//! Compiles and runs a small C program against the generated header and the
//! static library. Skipped when no C compiler or static library is found.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "sugmine.h"

int main(void) {
    SugmineNormalizer *n = NULL;
    char *out = NULL;
    if (sugmine_normalizer_new_default(&n) != SUGMINE_STATUS_OK) return 10;
    if (sugmine_preprocess(n, "win10pro64 rocks", &out) != SUGMINE_STATUS_OK) return 11;
    printf("%s\n", out);
    sugmine_string_free(out);
    if (sugmine_preprocess(n, NULL, &out) != SUGMINE_STATUS_NULL_POINTER) return 12;
    if (strstr(sugmine_last_error(), "NULL") == NULL) return 13;
    sugmine_normalizer_free(n);
    return 0;
}
"#;

fn static_lib() -> Option<PathBuf> {
    // tests/ binaries live in target/<profile>/deps
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libsugmine_ffi.a");
    lib.exists().then_some(lib)
}

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"].into_iter().find(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

#[test]
fn c_program_links_and_runs() {
    let (Some(cc), Some(lib)) = (compiler(), static_lib()) else {
        eprintln!("skipped: no C compiler or static library");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "win pro rocks\n");
}
