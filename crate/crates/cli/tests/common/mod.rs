#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn weakpu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weakpu"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs the binary and panics with its stderr unless it exits 0.
pub fn ok(args: &[&str]) {
    let out = weakpu(args);
    assert!(
        out.status.success(),
        "weakpu {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr_lines(out: &Output) -> usize {
    String::from_utf8_lossy(&out.stderr).lines().count()
}

/// A small, fast configuration.
pub fn write_small_config(path: &Path) {
    std::fs::write(
        path,
        r#"{
  "folds": 3,
  "forest": {"n_estimators": 50, "subsample_size": 64},
  "classifier": {"hidden_sizes": [16, 8], "epochs": 8, "batch_size": 16}
}"#,
    )
    .unwrap();
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
