use std::path::Path;
use std::process::{Command, Output};

use pcgen_core::{read_lpc, read_set, write_set, LabeledPointCloud, PartVocabulary, PointCloudSet, SetFormat};

fn pcgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcgen")).args(args).env_remove("PCGEN_THREADS").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = pcgen(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    pcgen(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn synth_writes_a_reproducible_set() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&["synth", "--family", "stick-ball", "--count", "50", "--points", "64", "--seed", "7", "-o", s(d)]);
    }
    let set = read_set(&a).unwrap();
    assert_eq!(set.len(), 50);
    assert_eq!(set.vocab().names(), &["stick".to_string(), "ball".to_string()]);
    assert!(a.join("manifest.json").is_file() && a.join("config.json").is_file());
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
}

#[test]
fn attack_shares_the_donor_vocabulary() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--count", "20", "--points", "32", "-o", s(&data)]);
    let att = tmp.path().join("att");
    let again = tmp.path().join("again");
    for d in [&att, &again] {
        ok(&["attack", "--donors", s(&data), "--mode", "centroid-snap", "--count", "12", "--seed", "3", "-o", s(d)]);
    }
    let set = read_set(&att).unwrap();
    assert_eq!(set.len(), 12);
    assert_eq!(set.vocab(), read_set(&data).unwrap().vocab());
    assert_eq!(dir_bytes(&att), dir_bytes(&again));
    assert_eq!(code(&["attack", "--count", "3", "-o", s(&att)]), 2);
}

#[test]
fn evaluate_renders_percentages_and_replays_from_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--count", "8", "--points", "32", "-o", s(&data)]);
    let table = ok(&["evaluate", "--real", s(&data), "--gen", s(&data), "--distance", "cd", "--metrics", "1nna"]);
    assert!(table.contains("0.00%"), "{table}");

    let other = tmp.path().join("other");
    ok(&["synth", "--count", "8", "--points", "32", "--seed", "1", "-o", s(&other)]);
    let report = tmp.path().join("r.json");
    let mats = tmp.path().join("m");
    let args = ["evaluate", "--real", s(&data), "--gen", s(&other), "--metrics", "1nna,cov,mmd", "--threads", "3"];
    let first = ok(&[&args[..], &["-o", s(&report), "--save-matrices", s(&mats)]].concat());
    let replay = ok(&["evaluate", "--from-matrices", s(&mats), "--metrics", "1nna,cov,mmd"]);
    assert_eq!(first, replay);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let v = json["reports"][0]["value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&v));
    assert_eq!(json["reports"][0]["metric"], "1nna");
}

fn single_part_set(dir: &Path, part: u16) {
    let clouds = (0..4)
        .map(|k| LabeledPointCloud::new(vec![k as f64, 0.0, 0.0, 1.0], 2, vec![part; 2], 2).unwrap())
        .collect();
    let set = PointCloudSet::new("p", PartVocabulary::anonymous(2).unwrap(), clouds).unwrap();
    write_set(&set, dir, SetFormat::Text).unwrap();
}

#[test]
fn mismatched_part_sets_give_infinite_mmd() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    single_part_set(&a, 0);
    single_part_set(&b, 1);
    let report = tmp.path().join("r.json");
    let table = ok(&["evaluate", "--real", s(&a), "--gen", s(&b), "--distance", "pcd", "--metrics", "mmd", "-o", s(&report)]);
    assert!(table.trim_end().ends_with("inf"), "{table}");
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(json["reports"][0]["value"], "inf");
}

#[test]
fn exit_codes_classify_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let two = tmp.path().join("two");
    let three = tmp.path().join("three");
    ok(&["synth", "--count", "3", "--points", "16", "-o", s(&two)]);
    ok(&["synth", "--family", "winged-body", "--dim", "3", "--count", "3", "--points", "18", "-o", s(&three)]);
    assert_eq!(code(&["evaluate", "--real", s(&two), "--gen", s(&three), "--metrics", "1nna"]), 2);
    assert_eq!(code(&["evaluate", "--real", s(&two), "--gen", s(&two), "--metrics", "bogus"]), 2);
    assert_eq!(code(&["generate", "--checkpoint", s(&tmp.path().join("none.slnk")), "-o", s(tmp.path())]), 2);
    assert_eq!(code(&["synth", "--count", "3"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);

    let bad = tmp.path().join("bad");
    std::fs::create_dir(&bad).unwrap();
    std::fs::write(bad.join("x.lpc"), "not a cloud\n").unwrap();
    assert_eq!(code(&["evaluate", "--real", s(&bad), "--gen", s(&two), "--metrics", "1nna"]), 3);
    let junk = tmp.path().join("junk.slnk");
    std::fs::write(&junk, b"junk").unwrap();
    assert_eq!(code(&["generate", "--checkpoint", s(&junk), "-o", s(tmp.path())]), 3);
}

#[test]
fn thread_count_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--count", "4", "--points", "16", "-o", s(&data)]);
    let out = Command::new(env!("CARGO_BIN_EXE_pcgen"))
        .args(["evaluate", "--real", s(&data), "--gen", s(&data), "--metrics", "cov"])
        .env("PCGEN_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn model_pipeline_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    let (data, vae, model) = (p("data"), p("v.slnk"), p("m.slnk"));
    ok(&["synth", "--count", "6", "--points", "24", "-o", &data]);
    ok(&["train-vae", "--data", &data, "--epochs", "3", "--hidden", "16", "--d-z", "4", "-o", &vae]);
    let curves = std::fs::read_to_string(p("v.curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 4);

    // A stage-one checkpoint cannot generate; stage two needs stage one.
    assert_eq!(code(&["generate", "--checkpoint", &vae, "-o", &p("g")]), 2);
    assert_eq!(code(&["train-diffusion", "--data", &data, "--checkpoint", &p("none.slnk"), "-o", &p("x.slnk")]), 2);

    let diff = |out: &str, extra: &[&str]| {
        let base = ["train-diffusion", "--data", &data, "--checkpoint", &vae, "--epochs", "2", "--steps", "20"];
        let out = p(out);
        ok(&[&base[..], extra, &["--hidden", "16", "-o", &out]].concat());
        std::fs::read(out).unwrap()
    };
    let supervised = diff("m.slnk", &[]);
    let semi = diff("semi.slnk", &["--semi-supervised", "--labeled-fraction", "1.0"]);
    assert_eq!(supervised, semi);
    assert_eq!(diff("m2.slnk", &[]), supervised);

    let generate = |out: &str, threads: &str| {
        let out = p(out);
        ok(&["generate", "--checkpoint", &model, "--count", "4", "--n", "20", "--seed", "3", "--threads", threads, "-o", &out]);
        dir_bytes(Path::new(&out))
    };
    let g1 = generate("g1", "1");
    assert_eq!(g1.iter().filter(|(n, _)| n.ends_with(".lpc")).count(), 4);
    assert_eq!(generate("g2", "3"), g1);

    let input = Path::new(&data).join("cloud_000000.lpc").to_str().unwrap().to_string();
    let edit = |tau: &str, out: &str| {
        let out = p(out);
        ok(&["edit", "--checkpoint", &model, "--input", &input, "--freeze-part", "ball", "--tau", tau, "--seed", "5", "-o", &out]);
        std::fs::read(out).unwrap()
    };
    let rec = p("rec.lpc");
    ok(&["reconstruct", "--checkpoint", &model, "--input", &input, "-o", &rec]);
    assert_eq!(edit("0", "e0.lpc"), std::fs::read(&rec).unwrap());

    assert_eq!(edit("12", "e.lpc"), edit("12", "e_again.lpc"));
    let original = read_lpc(&input).unwrap();
    let edited = read_lpc(p("e.lpc")).unwrap();
    for i in original.part_indices(1) {
        assert_eq!(edited.labels()[i], 1);
    }
    let prov: serde_json::Value = serde_json::from_slice(&std::fs::read(p("e.json")).unwrap()).unwrap();
    assert_eq!(prov["tau"], 12);
    assert_eq!(prov["seed"], 5);
    assert_eq!(prov["frozen_part"], 1);
    assert_eq!(prov["checkpoint_hash"].as_str().unwrap().len(), 64);

    let z = p("z.lpc");
    assert_eq!(code(&["edit", "--checkpoint", &model, "--input", &input, "--freeze-part", "wing", "--tau", "3", "-o", &z]), 2);
    assert_eq!(code(&["edit", "--checkpoint", &model, "--input", &input, "--freeze-part", "1", "--tau", "20", "-o", &z]), 2);
}
