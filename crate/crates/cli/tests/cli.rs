use std::path::Path;
use std::process::{Command, Output};

use vqa_prefilter::imaging::codec;
use vqa_prefilter::ImageBuffer;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vqa-prefilter"))
}

fn write_fixture(dir: &Path, records: usize) -> std::path::PathBuf {
    let mut lines = String::new();
    for i in 0..records {
        let img = ImageBuffer::from_fn(9 + i, 7, |x, y, c| ((x * 37 + y * 11 + c * 50 + i * 13) % 256) as u8).unwrap();
        let name = format!("img{i}.png");
        std::fs::write(dir.join(&name), codec::encode_png(&img).unwrap()).unwrap();
        let question = if i % 2 == 0 { "What color is the hose?" } else { "How many buttons are there?" };
        lines.push_str(&format!(
            "{{\"id\": \"r{i}\", \"image\": \"{name}\", \"question\": \"{question}\", \"reference_answer\": \"The hose is black.\"}}\n"
        ));
    }
    let manifest = dir.join("manifest.jsonl");
    std::fs::write(&manifest, lines).unwrap();
    manifest
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_fixture(dir.path(), 4);
    let out = dir.path().join("out");
    let args = [
        "run",
        "--manifest",
        manifest.to_str().unwrap(),
        "--limit",
        "3",
        "--out",
        out.to_str().unwrap(),
        "--kernel",
        "3",
        "--seed",
        "9",
    ];
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("3 complete, 0 quarantined"), "{stdout}");
    let summary = std::fs::read(out.join("summary.json")).unwrap();

    let o = run(&args);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 responder calls"));
    assert_eq!(std::fs::read(out.join("summary.json")).unwrap(), summary);

    let again = dir.path().join("again");
    let o = run(&["report", "--run", out.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(again.join("summary.json")).unwrap(), summary);
}

#[test]
fn quarantined_records_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_fixture(dir.path(), 3);
    std::fs::remove_file(dir.path().join("img1.png")).unwrap();
    let out = dir.path().join("out");
    let o = run(&["run", "--manifest", manifest.to_str().unwrap(), "--out", out.to_str().unwrap(), "--kernel", "3"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let q: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("quarantine.json")).unwrap()).unwrap();
    assert_eq!(q.as_array().unwrap().len(), 1);
    assert_eq!(q[0]["record_id"], "r1");
    assert_eq!(q[0]["stage"], "load");
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_fixture(dir.path(), 1);
    let out = dir.path().join("out");
    let m = manifest.to_str().unwrap();
    let o = out.to_str().unwrap();
    for bad in [
        vec!["run", "--manifest", m, "--out", o, "--kernel", "4"],
        vec!["run", "--manifest", m, "--out", o, "--samples", "0"],
        vec!["run", "--manifest", m, "--out", o, "--responder", "carrier-pigeon"],
        vec!["run", "--manifest", m, "--out", o, "--premise", "vibes"],
        vec!["run", "--manifest", "/nope/manifest.jsonl", "--out", o],
        vec!["run", "--out", o],
        vec!["frobnicate"],
    ] {
        let result = run(&bad);
        assert_eq!(code(&result), 1, "{bad:?}: {}", String::from_utf8_lossy(&result.stderr));
    }
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn filters_writes_three_pngs() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), 1);
    let out = dir.path().join("variants");
    let o = run(&[
        "filters",
        "--in",
        dir.path().join("img0.png").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--kernel",
        "5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for v in ["org", "nr", "ee"] {
        let img = codec::load(&out.join(format!("img0_{v}.png"))).unwrap();
        assert_eq!((img.width(), img.height()), (9, 7));
    }
    let org = codec::load(&out.join("img0_org.png")).unwrap();
    assert_eq!(org, codec::load(&dir.path().join("img0.png")).unwrap());
}
