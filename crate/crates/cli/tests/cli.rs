use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use melvq_core::signal_io::write_wav;
use melvq_core::testsignal::synthetic_speech;
use melvq_core::AudioBuffer;
use tempfile::TempDir;

fn melvq(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_melvq"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("MELVQ_THREADS", t),
        None => cmd.env_remove("MELVQ_THREADS"),
    };
    cmd.output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = melvq(args, None);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    /// Four training utterances, a manifest listing them and one test file.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut list = String::new();
        for seed in 0..4 {
            let name = format!("train{seed}.wav");
            write_wav(dir.path().join(&name), &synthetic_speech(seed, 3.0, 16_000)).unwrap();
            list.push_str(&name);
            list.push('\n');
        }
        std::fs::write(dir.path().join("train.txt"), list).unwrap();
        write_wav(dir.path().join("test.wav"), &synthetic_speech(77, 2.0, 16_000)).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, rate: &str, out: &str) -> String {
        let (m, o) = (self.path("train.txt"), self.path(out));
        let mut args = vec!["train", "--manifest", s(&m), "--rate", rate, "--out", s(&o)];
        if rate == "1000" {
            args.extend(["--sq-bits", "4", "--vq-bits", "6"]);
        } else {
            args.extend(["--sq-bits", "6", "--stage-bits", "6,6"]);
        }
        ok(&args)
    }
}

#[test]
fn ten_second_file_reports_exact_rates() {
    let ws = Workspace::new();
    write_wav(ws.path("ten.wav"), &synthetic_speech(5, 10.0, 16_000)).unwrap();
    for rate in ["1000", "2000"] {
        let cb = format!("{rate}.mvqb");
        ws.train(rate, &cb);
        let (inp, cbp, out) = (ws.path("ten.wav"), ws.path(&cb), ws.path("ten.mvqc"));
        let text = ok(&["encode", s(&inp), s(&out), "--codebook", s(&cbp), "--rate", rate]);
        assert!(text.contains("frames: 625"), "{text}");
        assert!(text.contains(&format!("payload bitrate: {rate} bit/s")), "{text}");
        let bits = if rate == "1000" { 16 } else { 32 };
        assert_eq!(std::fs::metadata(&out).unwrap().len(), 18 + 625 * bits / 8);
    }
}

#[test]
fn train_reports_and_writes_desk_scale_codebooks() {
    let ws = Workspace::new();
    let text = ws.train("2000", "cb.mvqb");
    assert!(text.contains("msvq stage 1"), "{text}");
    let info = ok(&["inspect", s(&ws.path("cb.mvqb"))]);
    assert!(info.contains("mode 2000"), "{info}");
    assert!(info.contains("64 x 79 + 64 x 79"), "{info}");
}

#[test]
fn empty_manifest_fails_without_output() {
    let ws = Workspace::new();
    std::fs::write(ws.path("empty.txt"), "# nothing\n\n").unwrap();
    let (m, o) = (ws.path("empty.txt"), ws.path("cb.mvqb"));
    let out = melvq(&["train", "--manifest", s(&m), "--rate", "1000", "--out", s(&o)], None);
    assert_eq!(code(&out), 8);
    assert!(!o.exists());
}

#[test]
fn full_size_training_on_small_corpus_names_minimum() {
    let ws = Workspace::new();
    let (m, o) = (ws.path("train.txt"), ws.path("cb.mvqb"));
    let out = melvq(&["train", "--manifest", s(&m), "--rate", "1000", "--out", s(&o)], None);
    assert_eq!(code(&out), 8);
    assert!(String::from_utf8_lossy(&out.stderr).contains("4096"));
    assert!(!o.exists());
}

#[test]
fn mismatched_width_flags_are_usage_errors() {
    let ws = Workspace::new();
    let (m, o) = (ws.path("train.txt"), ws.path("cb.mvqb"));
    let out = melvq(&["train", "--manifest", s(&m), "--rate", "1000", "--out", s(&o), "--stage-bits", "6,6"], None);
    assert_eq!(code(&out), 2);
    let out = melvq(&["train", "--manifest", s(&m), "--rate", "1000", "--out", s(&o), "--vq-bits", "13"], None);
    assert_eq!(code(&out), 2);
    let out = melvq(&["train", "--rate", "1500", "--manifest", s(&m), "--out", s(&o)], None);
    assert_eq!(code(&out), 2);
}

#[test]
fn eight_khz_input_is_rejected() {
    let ws = Workspace::new();
    ws.train("1000", "cb.mvqb");
    let low = synthetic_speech(1, 1.0, 8_000);
    write_wav(ws.path("low.wav"), &AudioBuffer::new(low.samples, 8_000)).unwrap();
    let (i, c, o) = (ws.path("low.wav"), ws.path("cb.mvqb"), ws.path("low.mvqc"));
    let out = melvq(&["encode", s(&i), s(&o), "--codebook", s(&c)], None);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("8000 Hz"));
    assert!(!o.exists());
}

#[test]
fn decode_length_and_mel_export() {
    let ws = Workspace::new();
    ws.train("2000", "cb.mvqb");
    let (i, c, st, w, mel) = (ws.path("test.wav"), ws.path("cb.mvqb"), ws.path("t.mvqc"), ws.path("t.wav"), ws.path("t.mel"));
    ok(&["encode", s(&i), s(&st), "--codebook", s(&c)]);
    let text = ok(&["decode", s(&st), s(&w), "--codebook", s(&c), "--gl-iters", "10", "--emit-mel", s(&mel)]);
    let frames = 32000usize.div_ceil(256);
    assert!(text.contains(&format!("frames: {frames}")), "{text}");
    let audio = melvq_core::read_wav(&w).unwrap();
    assert_eq!(audio.len(), (frames - 1) * 256 + 1024);
    let info = ok(&["inspect", s(&mel)]);
    assert!(info.contains("mel channels: 80"), "{info}");
    assert!(info.contains(&format!("frames: {frames}")), "{info}");
}

#[test]
fn wrong_codebook_gives_hash_mismatch() {
    let ws = Workspace::new();
    ws.train("1000", "a.mvqb");
    // same corpus, different widths: different content hash
    let (m, b) = (ws.path("train.txt"), ws.path("b.mvqb"));
    ok(&["train", "--manifest", s(&m), "--rate", "1000", "--out", s(&b), "--sq-bits", "3", "--vq-bits", "5"]);
    let (i, a, st, w) = (ws.path("test.wav"), ws.path("a.mvqb"), ws.path("t.mvqc"), ws.path("t.wav"));
    ok(&["encode", s(&i), s(&st), "--codebook", s(&a)]);
    let out = melvq(&["decode", s(&st), s(&w), "--codebook", s(&b)], None);
    assert_eq!(code(&out), 7);
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    let ha = ok(&["inspect", s(&a)]);
    let hb = ok(&["inspect", s(&b)]);
    for info in [ha, hb] {
        let hash = info.lines().find_map(|l| l.strip_prefix("content hash: ")).unwrap();
        assert!(err.contains(hash), "{err}");
    }
    assert!(!w.exists());
}

#[test]
fn malformed_stream_and_unknown_vocoder() {
    let ws = Workspace::new();
    ws.train("1000", "cb.mvqb");
    let (i, c, st, w) = (ws.path("test.wav"), ws.path("cb.mvqb"), ws.path("t.mvqc"), ws.path("t.wav"));
    ok(&["encode", s(&i), s(&st), "--codebook", s(&c)]);
    let bytes = std::fs::read(&st).unwrap();
    let cut = ws.path("cut.mvqc");
    std::fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
    assert_eq!(code(&melvq(&["decode", s(&cut), s(&w), "--codebook", s(&c)], None)), 6);
    let out = melvq(&["decode", s(&st), s(&w), "--codebook", s(&c), "--vocoder", "waveglow"], None);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("griffin-lim"));
    assert!(!w.exists());
    assert_eq!(code(&melvq(&["inspect", s(&i)], None)), 2);
    assert_eq!(code(&melvq(&["inspect", s(&ws.path("missing"))], None)), 3);
}

#[test]
fn eval_single_pair_and_manifest() {
    let ws = Workspace::new();
    let x = ws.path("test.wav");
    let line = ok(&["eval", s(&x), s(&x)]);
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert!((v["stoi"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(v["mcd_db"].as_f64().unwrap(), 0.0);
    assert_eq!(v["lsd_db"].as_f64().unwrap(), 0.0);

    let pairs: String = (0..5).map(|k| format!("train{}.wav\ttrain{}.wav\n", k % 4, (k + 1) % 4)).collect();
    std::fs::write(ws.path("pairs.txt"), pairs).unwrap();
    let (m, r) = (ws.path("pairs.txt"), ws.path("report.jsonl"));
    ok(&["eval", "--manifest", s(&m), "--report", s(&r)]);
    let text = std::fs::read_to_string(&r).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    let footer: serde_json::Value = serde_json::from_str(lines[5]).unwrap();
    assert_eq!(footer["id"], "__mean__");
    assert_eq!(footer["count"], 5);
}

#[test]
fn short_pair_reports_null_stoi() {
    let ws = Workspace::new();
    write_wav(ws.path("short.wav"), &synthetic_speech(3, 0.25, 16_000)).unwrap();
    let x = ws.path("short.wav");
    let line = ok(&["eval", s(&x), s(&x)]);
    assert!(line.contains("\"stoi\":null"), "{line}");
    assert!(line.contains("\"mcd_db\":0.0"), "{line}");
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let out = melvq(&["inspect", "whatever"], Some("zero"));
    assert_eq!(code(&out), 2);
}

fn full_run(ws: &Workspace, tag: &str, threads: &str) -> Vec<Vec<u8>> {
    let run = |args: &[&str]| {
        let out = melvq(args, Some(threads));
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    let dir = ws.path(tag);
    std::fs::create_dir(&dir).unwrap();
    let p = |n: &str| dir.join(n);
    let (m, cb, st, w, mel, rep) = (ws.path("train.txt"), p("cb"), p("st"), p("out.wav"), p("mel"), p("rep"));
    run(&["train", "--manifest", s(&m), "--rate", "2000", "--out", s(&cb), "--sq-bits", "6", "--stage-bits", "6,6"]);
    run(&["encode", s(&ws.path("test.wav")), s(&st), "--codebook", s(&cb)]);
    run(&["decode", s(&st), s(&w), "--codebook", s(&cb), "--gl-iters", "15", "--emit-mel", s(&mel)]);
    std::fs::write(p("pairs"), format!("{}\t{}\n", s(&ws.path("test.wav")), s(&w))).unwrap();
    run(&["eval", "--manifest", s(&p("pairs")), "--report", s(&rep)]);
    let mut files: Vec<Vec<u8>> = [cb, st, w, mel].iter().map(|f| std::fs::read(f).unwrap()).collect();
    // report ids carry the run's own directory
    let report = std::fs::read_to_string(rep).unwrap().replace(s(&dir), "<run>");
    files.push(report.into_bytes());
    files
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let ws = Workspace::new();
    let one = full_run(&ws, "a", "1");
    let four = full_run(&ws, "b", "4");
    let again = full_run(&ws, "c", "1");
    let names = ["codebook", "stream", "audio", "mel", "report"];
    for (k, name) in names.iter().enumerate() {
        assert!(one[k] == four[k], "{name} differs between 1 and 4 threads");
        assert!(one[k] == again[k], "{name} differs between repeated runs");
    }
}
