use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ANIMATE: [&str; 8] = ["dog", "cat", "man", "woman", "boy", "girl", "teacher", "farmer"];
const INANIMATE: [&str; 8] = ["bone", "ball", "book", "apple", "roof", "letter", "wheat", "stone"];
const VERBS: [&str; 6] = ["sees", "chases", "eats", "reads", "kicks", "throws"];

/// Transitive sentences with an animate subject and inanimate object,
/// mostly SVO with some OSV.
fn toy_treebank(n: usize, prefix: &str, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    for i in 0..n {
        let s = ANIMATE.choose(rng).unwrap();
        let o = INANIMATE.choose(rng).unwrap();
        let v = VERBS.choose(rng).unwrap();
        let lemma = v.trim_end_matches('s');
        let _ = writeln!(out, "# sent_id = {prefix}{i}");
        if rng.gen_bool(0.8) {
            let _ = writeln!(out, "# text = the {s} {v} the {o}");
            let _ = writeln!(out, "1\tthe\tthe\tDET\t_\t_\t2\tdet\t_\t_");
            let _ = writeln!(out, "2\t{s}\t{s}\tNOUN\t_\t_\t3\tnsubj\t_\t_");
            let _ = writeln!(out, "3\t{v}\t{lemma}\tVERB\t_\t_\t0\troot\t_\t_");
            let _ = writeln!(out, "4\tthe\tthe\tDET\t_\t_\t5\tdet\t_\t_");
            let _ = writeln!(out, "5\t{o}\t{o}\tNOUN\t_\t_\t3\tobj\t_\t_");
        } else {
            let _ = writeln!(out, "# text = {o} the {s} {v}");
            let _ = writeln!(out, "1\t{o}\t{o}\tNOUN\t_\t_\t4\tobj\t_\t_");
            let _ = writeln!(out, "2\tthe\tthe\tDET\t_\t_\t3\tdet\t_\t_");
            let _ = writeln!(out, "3\t{s}\t{s}\tNOUN\t_\t_\t4\tnsubj\t_\t_");
            let _ = writeln!(out, "4\t{v}\t{lemma}\tVERB\t_\t_\t0\troot\t_\t_");
        }
        out.push('\n');
    }
    out
}

/// 6-d vectors: an animacy direction, a verb direction and noise.
fn toy_vectors(rng: &mut ChaCha8Rng) -> String {
    let words: Vec<(&str, [f64; 2])> = ANIMATE
        .iter()
        .map(|w| (*w, [1.0, 0.0]))
        .chain(INANIMATE.iter().map(|w| (*w, [-1.0, 0.0])))
        .chain(VERBS.iter().map(|w| (*w, [0.0, 1.0])))
        .collect();
    let mut out = format!("{} 6\n", words.len() + 1);
    out.push_str("the 0 0 0.1 0.1 0.1 0.1\n");
    for (w, head) in words {
        let noise: Vec<String> = (0..4).map(|_| format!("{:.3}", rng.gen_range(-0.3..0.3))).collect();
        let _ = writeln!(out, "{w} {} {} {}", head[0], head[1], noise.join(" "));
    }
    out
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Workspace {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tb = dir.path().join("toy");
        std::fs::create_dir(&tb).unwrap();
        for (split, n) in [("train", 240), ("dev", 60), ("test", 60)] {
            std::fs::write(tb.join(format!("toy-ud-{split}.conllu")), toy_treebank(n, split, &mut rng)).unwrap();
        }
        for split in ["train", "dev", "test"] {
            std::fs::write(tb.join(format!("catch-ud-{split}.conllu")), toy_treebank(10, &format!("c{split}"), &mut rng)).unwrap();
        }
        std::fs::write(dir.path().join("toy.vec"), toy_vectors(&mut rng)).unwrap();
        Workspace { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn write_config(&self, corpora: &[(&str, &str)], extra: &str) -> PathBuf {
        let mut text = format!(
            "seed = 4\noutput_dir = \"out\"\nmin_triads = 20\n{extra}\n[grid]\nlearning_rates = [0.01, 0.001]\n\
             hidden_sizes = [4, 8, 16]\nmax_epochs = 30\nbatch_size = 16\npatience = 5\n\n[vectors]\nen = \"toy.vec\"\n"
        );
        for (name, stem) in corpora {
            let _ = write!(
                text,
                "\n[[corpus]]\nname = \"{name}\"\nlanguage = \"en\"\ncased = false\n\
                 train = \"toy/{stem}-ud-train.conllu\"\ndev = \"toy/{stem}-ud-dev.conllu\"\ntest = \"toy/{stem}-ud-test.conllu\"\n"
            );
        }
        let p = self.path("run.toml");
        std::fs::write(&p, text).unwrap();
        p
    }
}

fn svolab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svolab"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        text(&out.stdout),
        text(&out.stderr)
    );
}

#[test]
fn pipeline_end_to_end() {
    let ws = Workspace::new();
    let cfg = ws.write_config(&[("toy", "toy")], "");
    let cfg = cfg.to_str().unwrap();
    let cwd = ws.dir.path();

    let out = svolab(&["extract", "--config", cfg], cwd);
    assert_exit(&out, 0);
    assert!(text(&out.stdout).contains("toy"));
    assert_exit(&svolab(&["vectorize", "-c", cfg], cwd), 0);
    let out = svolab(&["train", "-c", cfg, "--jobs", "1"], cwd);
    assert_exit(&out, 0);

    let grid = std::fs::read_to_string(ws.path("out/grid/toy.jsonl")).unwrap();
    assert_eq!(grid.lines().count(), 18);
    let results = std::fs::read_to_string(ws.path("out/results.jsonl")).unwrap();
    let row: serde_json::Value = serde_json::from_str(results.lines().next().unwrap()).unwrap();
    assert_eq!(row["configs_trained"], 18);
    assert_eq!(row["n_train"], 240);
    let acc = row["selected"]["test_accuracy"].as_f64().unwrap();
    assert!(acc > 0.9, "animacy alone decides every toy triad, got {acc}");
    assert!(ws.path("out/models/toy.bin").exists());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("out/manifests/toy.json")).unwrap()).unwrap();
    assert_eq!(manifest["grid"].as_array().unwrap().len(), 18);
    assert_eq!(manifest["datasets"][0]["examples"], 240);
    assert_eq!(manifest["datasets"][0]["sha256"].as_str().unwrap().len(), 64);
    let curves = std::fs::read_to_string(ws.path("out/grid/toy-curves.csv")).unwrap();
    assert!(curves.starts_with("config,learning_rate,hidden1,hidden2,epoch,train_loss,dev_accuracy\n"));
    assert!(curves.lines().count() > 18);

    let out = svolab(&["report", "-c", cfg], cwd);
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["classifier"]["corpora"], 1);
    let log = std::fs::read_to_string(ws.path("out/run-log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 4);
}

#[test]
fn rerun_is_byte_identical() {
    let ws = Workspace::new();
    let cfg = ws.write_config(&[("toy", "toy")], "");
    let cfg = cfg.to_str().unwrap();
    let cwd = ws.dir.path();
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        for cmd in ["extract", "vectorize", "train"] {
            assert_exit(&svolab(&[cmd, "-c", cfg], cwd), 0);
        }
        snapshots.push((
            std::fs::read(ws.path("out/results.jsonl")).unwrap(),
            std::fs::read(ws.path("out/examples/toy/train.bin")).unwrap(),
            std::fs::read(ws.path("out/models/toy.bin")).unwrap(),
        ));
    }
    assert!(snapshots[0] == snapshots[1]);
}

#[test]
fn missing_treebank_names_the_path() {
    let ws = Workspace::new();
    let cfg = ws.write_config(&[("ghost", "ghost")], "");
    let out = svolab(&["extract", "-c", cfg.to_str().unwrap()], ws.dir.path());
    assert_exit(&out, 1);
    assert!(text(&out.stderr).contains("ghost-ud-train.conllu"), "{}", text(&out.stderr));
}

#[test]
fn exclusion_list_drops_named_triads() {
    let ws = Workspace::new();
    let cfg = ws.write_config(&[("toy", "toy")], "");
    assert_exit(&svolab(&["extract", "-c", cfg.to_str().unwrap()], ws.dir.path()), 0);
    let first = std::fs::read_to_string(ws.path("out/triads/toy/train.jsonl")).unwrap();
    let keys: Vec<String> = first
        .lines()
        .take(2)
        .map(|l| {
            let t: serde_json::Value = serde_json::from_str(l).unwrap();
            format!("toy/{}/{}", t["sent_id"].as_str().unwrap(), t["verb"]["token_id"])
        })
        .collect();
    std::fs::write(ws.path("drop.txt"), keys.join("\n")).unwrap();

    let cfg = ws.write_config(&[("toy", "toy")], "exclusion_list = \"drop.txt\"");
    assert_exit(&svolab(&["extract", "-c", cfg.to_str().unwrap()], ws.dir.path()), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("out/extract.json")).unwrap()).unwrap();
    assert_eq!(report["corpora"][0]["splits"][0]["stats"]["excluded_by_list"], 2);
    let second = std::fs::read_to_string(ws.path("out/triads/toy/train.jsonl")).unwrap();
    assert_eq!(second.lines().count(), first.lines().count() - 2);
    for l in second.lines() {
        let t: serde_json::Value = serde_json::from_str(l).unwrap();
        let key = format!("toy/{}/{}", t["sent_id"].as_str().unwrap(), t["verb"]["token_id"]);
        assert!(!keys.contains(&key), "{key} still present");
    }
}

#[test]
fn one_failed_corpus_is_a_partial_run() {
    let ws = Workspace::new();
    let cfg = ws.write_config(&[("toy", "toy"), ("ghost", "ghost")], "");
    let out = svolab(&["extract", "-c", cfg.to_str().unwrap()], ws.dir.path());
    assert_exit(&out, 1);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("out/extract.json")).unwrap()).unwrap();
    assert_eq!(report["corpora"][0]["included"], true);
    assert!(report["corpora"][1]["error"].is_string());
}

#[test]
fn usage_errors_exit_two() {
    let ws = Workspace::new();
    let cwd = ws.dir.path();
    assert_exit(&svolab(&["extract", "-c", "nowhere.toml"], cwd), 2);
    assert_exit(&svolab(&["frobnicate"], cwd), 2);
    let cfg = ws.write_config(&[("toy", "toy")], "learning_rate = 3");
    assert_exit(&svolab(&["extract", "-c", cfg.to_str().unwrap()], cwd), 2);
}

fn build_lists(ws: &Workspace, task: &str) -> PathBuf {
    let cfg = ws.write_config(&[("toy", "toy"), ("catch", "catch")], "");
    let cfg = cfg.to_str().unwrap();
    assert_exit(&svolab(&["extract", "-c", cfg], ws.dir.path()), 0);
    let lists = ws.path(&format!("lists-{task}.json"));
    let out = svolab(
        &[
            "lists",
            "--triads",
            "out/triads/toy/train.jsonl",
            "out/triads/toy/dev.jsonl",
            "--catch",
            "out/triads/catch/train.jsonl",
            "out/triads/catch/dev.jsonl",
            "--task",
            task,
            "--seed",
            "3",
            "--out",
            lists.to_str().unwrap(),
        ],
        ws.dir.path(),
    );
    assert_exit(&out, 0);
    assert_eq!(text(&out.stdout).lines().count(), 5);
    lists
}

#[test]
fn choose_subject_sessions_and_export() {
    let ws = Workspace::new();
    let lists = build_lists(&ws, "choose_subject");
    let lists = lists.to_str().unwrap();
    let out = svolab(&["simulate", "--lists", lists, "--log", "log.jsonl", "--policy", "oracle", "-n", "5"], ws.dir.path());
    assert_exit(&out, 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["included_sessions"], 5);
    assert_eq!(report["participants"]["mean"], 100.0);

    let out = svolab(&["responses", "--lists", lists, "--log", "log.jsonl", "--out", "records.jsonl"], ws.dir.path());
    assert_exit(&out, 0);
    let records = std::fs::read_to_string(ws.path("records.jsonl")).unwrap();
    let critical = records.lines().filter(|l| l.contains("\"is_catch\":false")).count();
    let catch = records.lines().filter(|l| l.contains("\"is_catch\":true")).count();
    assert_eq!(catch, 5 * 20);
    assert!(critical > 0);
}

#[test]
fn construct_sentences_through_adjudication() {
    let ws = Workspace::new();
    let lists = build_lists(&ws, "construct_sentence");
    let lists = lists.to_str().unwrap();
    let cwd = ws.dir.path();
    assert_exit(&svolab(&["simulate", "--lists", lists, "--log", "log.jsonl", "--policy", "chance", "-n", "3"], cwd), 0);
    let out = svolab(&["adjudicate-export", "--lists", lists, "--log", "log.jsonl", "--out", "adj.tsv"], cwd);
    assert_exit(&out, 0);

    let tsv = std::fs::read_to_string(ws.path("adj.tsv")).unwrap();
    let mut coded = String::new();
    for (i, line) in tsv.lines().enumerate() {
        coded.push_str(line.strip_suffix('\t').unwrap_or(line));
        coded.push_str(if i == 0 { "" } else { "\t1" });
        coded.push('\n');
    }
    std::fs::write(ws.path("coded.tsv"), coded).unwrap();
    let out = svolab(
        &["adjudicate-import", "--lists", lists, "--log", "log.jsonl", "--adjudication", "coded.tsv", "--catch-threshold", "0"],
        cwd,
    );
    assert_exit(&out, 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["mode"], "morphology");
    assert_eq!(report["participants"]["mean"], 100.0);
}
