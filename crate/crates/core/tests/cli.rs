use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn listtune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_listtune")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = listtune(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn corpus(dir: &Path) -> PathBuf {
    let cfg = dir.join("gen.cfg");
    std::fs::write(&cfg, "dev_sentences = 8\ntest_sentences = 6\npool_size = 25\nseed = 3\n").unwrap();
    let out = dir.join("corpus.jsonl");
    ok(&["generate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    out
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[test]
fn topn_with_other_method_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let out = listtune(&[
        "tune", "--corpus", c.to_str().unwrap(), "--method", "listmle", "--topn", "3", "--out-dir",
        dir.path().join("t").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[usage]"));
}

#[test]
fn oversized_k_is_a_capability_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let out = listtune(&[
        "tune", "--corpus", c.to_str().unwrap(), "--method", "listnet", "--k", "26", "--out-dir",
        dir.path().join("t").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[capability]"));
}

#[test]
fn tune_writes_weights_and_pool_growth() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    for (pool, expected) in [("aggregate", [8, 16, 24]), ("merge", [8, 8, 8])] {
        let out_dir = dir.path().join(pool);
        ok(&[
            "tune", "--corpus", c.to_str().unwrap(), "--method", "listmle-te", "--k", "5", "--outer-iters", "3",
            "--epochs", "3", "--pool", pool, "--out-dir", out_dir.to_str().unwrap(),
        ]);
        let rows = data_lines(&out_dir.join("iterations.csv"));
        assert_eq!(rows[0], "iteration,pool_size,dev_bleu,loss_name,wall_time_ms");
        let sizes: Vec<usize> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert_eq!(sizes, expected);
        assert!(rows[1..].iter().all(|r| r.split(',').nth(3) == Some("listmle-te")));
        let weights = data_lines(&out_dir.join("weights.tsv"));
        assert!(weights.iter().any(|l| l.starts_with("lm\t")));
        let manifest = std::fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
        assert!(manifest.contains("method = listmle-te"));
    }
}

#[test]
fn compare_with_one_method_and_seed_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let out_dir = dir.path().join("cmp");
    ok(&[
        "compare", "--corpus", c.to_str().unwrap(), "--methods", "listnet", "--seeds", "4", "--k", "5",
        "--outer-iters", "2", "--epochs", "3", "--out-dir", out_dir.to_str().unwrap(),
    ]);
    let rows = data_lines(&out_dir.join("report.csv"));
    assert_eq!(rows[0], "method,seed,dev_bleu,test_bleu,p_value");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("listnet,4,"));
    assert!(rows[2].starts_with("listnet,mean,"));
}

#[test]
fn losscurve_with_zero_epochs_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let out = dir.path().join("curve.csv");
    ok(&[
        "losscurve", "--corpus", c.to_str().unwrap(), "--method", "listmle-te", "--epochs", "0", "--k", "5",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(data_lines(&out), vec!["epoch,loss,top1_bleu".to_string()]);
}

#[test]
fn full_batch_losscurve_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let out = dir.path().join("curve.csv");
    ok(&[
        "losscurve", "--corpus", c.to_str().unwrap(), "--method", "listmle", "--mode", "single-iteration",
        "--full-batch", "--epochs", "40", "--k", "10", "--out", out.to_str().unwrap(),
    ]);
    let losses: Vec<f64> = data_lines(&out)[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(losses.len(), 40);
    assert!(losses.windows(2).filter(|w| w[1] > w[0] + 1e-12).count() <= 2);
    assert!(losses.last().unwrap() < &losses[0]);
}

#[test]
fn generated_corpus_and_planted_weights_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let lines = std::fs::read_to_string(&c).unwrap().lines().count();
    assert_eq!(lines, 14);
    let planted = data_lines(&c.with_extension("planted.tsv"));
    let value = |name: &str| -> f64 {
        planted
            .iter()
            .find_map(|l| l.strip_prefix(&format!("{name}\t")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(value("lm") > 0.0 && value("tm0") > 0.0);
    assert_eq!(value("noise0"), 0.0);
}

#[test]
fn bleu_subcommand_scores_files() {
    let dir = tempfile::tempdir().unwrap();
    let hyp = dir.path().join("hyp.txt");
    let reference = dir.path().join("ref.txt");
    std::fs::write(&hyp, "a b c d\nthe cat sat\n").unwrap();
    std::fs::write(&reference, "a b c d\nthe cat sat\n").unwrap();
    let out = ok(&[
        "bleu", "--hyp", hyp.to_str().unwrap(), "--ref", reference.to_str().unwrap(), "--against",
        hyp.to_str().unwrap(),
    ]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "BLEU = 100.00\np = 1\n");
}
