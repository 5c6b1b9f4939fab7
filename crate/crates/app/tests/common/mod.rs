#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_nftmine");

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("NFTMINE_LOG").output().expect("spawn nftmine")
}

/// Runs and insists on exit 0, returning stdout.
pub fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "nftmine {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf8 path")
}

pub struct Fixture {
    pub dir: PathBuf,
    pub events: PathBuf,
    pub data: PathBuf,
    pub model: PathBuf,
    pub catalog: PathBuf,
}

/// synth, ingest, encode and a short training run under `dir`.
pub fn pipeline(dir: &Path, n_events: usize, epochs: usize, seed: u64) -> Fixture {
    std::fs::create_dir_all(dir).unwrap();
    let events = dir.join("events.jsonl");
    let data = dir.join("data");
    let model = dir.join("model.nftm");
    let seed = seed.to_string();
    let n = n_events.to_string();
    ok(&["synth", "--events", &n, "--users", "40", "--assets", "80", "--collections", "6", "--seed", &seed, "--out", s(&events)]);
    ok(&["ingest", "--input", s(&events), "--seed", &seed, "--out", s(&data)]);
    ok(&["encode", "--data", s(&data)]);
    let epochs = epochs.to_string();
    ok(&["train", "--data", s(&data), "--epochs", &epochs, "--seed", &seed, "--out", s(&model)]);
    Fixture { dir: dir.to_path_buf(), events, catalog: data.join("catalog.json"), data, model }
}

/// A fixture shared by every test in one binary, rebuilt once per run.
pub fn shared(name: &str) -> &'static Fixture {
    use std::sync::OnceLock;
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
        let _ = std::fs::remove_dir_all(&dir);
        pipeline(&dir, 1000, 2, 7)
    })
}
