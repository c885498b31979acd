use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cprdraft::manifest::{manifest_path, RunManifest};
use cprdraft_core::EmbeddingModel;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cprdraft"));
    cmd.env_remove("CPRDRAFT_MODEL_DIR").env_remove("CPRDRAFT_BIND");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn cprdraft")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "cprdraft {args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_manifest(artifact: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(manifest_path(artifact)).unwrap()).unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    cards: PathBuf,
    log: PathBuf,
}

fn fixture(drafts: &str) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let cards = root.join("cards.csv");
    let log = root.join("drafts.jsonl");
    ok(&[
        "gen",
        "--synthetic-cards",
        "30",
        "--cards-out",
        p(&cards),
        "--drafts",
        drafts,
        "--seed",
        "3",
        "--out",
        p(&log),
    ]);
    Fixture { _dir: dir, root, cards, log }
}

const SMALL_NET: [&str; 8] = ["--dim", "4", "--hidden", "16", "--shards", "4", "--lr", "0.003"];

#[test]
fn gen_train_evaluate_rank() {
    let fx = fixture("12");
    assert!(fx.root.join("drafts.jsonl.oracle.json").exists());
    let gen_manifest = read_manifest(&fx.log);
    assert_eq!(gen_manifest.command, "gen");
    assert_eq!(gen_manifest.seed, Some(3));
    assert!(gen_manifest.outputs.contains(&fx.cards));

    let model_dir = fx.root.join("models");
    let mut train = vec!["train", "--cards", p(&fx.cards), "--log", p(&fx.log), "--validation-every", "5000"];
    train.extend(SMALL_NET);
    let stdout = bin().args(&train).env("CPRDRAFT_MODEL_DIR", &model_dir).output().unwrap();
    assert!(stdout.status.success(), "{}", String::from_utf8_lossy(&stdout.stderr));
    let model_file = model_dir.join("model.cpr");
    let (model, _) = EmbeddingModel::load(&model_file).unwrap();
    assert_eq!(model.dim(), 4);
    assert!(model_dir.join("model.cpr.history.json").exists());
    let m = read_manifest(&model_file);
    assert_eq!(m.command, "train");
    assert_eq!(m.config["net"]["dim"], 4);
    assert!(m.inputs.contains(&fx.log));

    let out_dir = fx.root.join("eval");
    let table = ok(&[
        "evaluate",
        "--cards",
        p(&fx.cards),
        "--log",
        p(&fx.log),
        "--agent",
        "random,raredraft,oracle,nnet,siamese",
        "--model",
        p(&model_file),
        "--out-dir",
        p(&out_dir),
    ]);
    assert!(table.contains("siamese"));
    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 5);
    for r in reports {
        let mtta = r["mtta"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&mtta));
        assert!(out_dir.join(format!("per_pick_{}.csv", r["agent"].as_str().unwrap())).exists());
    }
    assert!(manifest_path(&out_dir.join("report.json")).exists());

    let ranking = fx.root.join("ranking.tsv");
    let embeddings = fx.root.join("emb.csv");
    ok(&[
        "rank",
        "--cards",
        p(&fx.cards),
        "--model",
        p(&model_file),
        "--log",
        p(&fx.log),
        "--out",
        p(&ranking),
        "--embeddings",
        p(&embeddings),
    ]);
    let text = std::fs::read_to_string(&ranking).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rank\tcard_id\tname\tdistance");
    assert_eq!(lines.iter().filter(|l| !l.starts_with('#')).count(), 31);
    assert!(lines.last().unwrap().starts_with("# kendall_tau_vs_first_pick_rate"));
    let distances: Vec<f64> = lines[1..31].iter().map(|l| l.split('\t').nth(3).unwrap().parse().unwrap()).collect();
    assert!(distances.windows(2).all(|w| w[0] <= w[1]));
    let csv = std::fs::read_to_string(&embeddings).unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert!(csv.lines().next().unwrap().ends_with("e_3"));
}

#[test]
fn training_is_deterministic() {
    let fx = fixture("6");
    let train = |name: &str| {
        let out = fx.root.join(name);
        let mut args = vec!["train", "--cards", p(&fx.cards), "--log", p(&fx.log), "--seed", "9", "--out", p(&out)];
        args.extend(SMALL_NET);
        ok(&args);
        EmbeddingModel::load(&out).unwrap()
    };
    let (a, sum_a) = train("a.cpr");
    let (b, sum_b) = train("b.cpr");
    assert_eq!(a.params().values(), b.params().values());
    assert_eq!(sum_a, sum_b);
}

#[test]
fn simulate_and_sweep() {
    let fx = fixture("8");
    let sim = fx.root.join("sim.jsonl");
    ok(&[
        "simulate",
        "--cards",
        p(&fx.cards),
        "--agents",
        "random:3,raredraft:3,oracle:2",
        "--oracle",
        p(&fx.root.join("drafts.jsonl.oracle.json")),
        "--drafts",
        "2",
        "--out",
        p(&sim),
    ]);
    let lines = std::fs::read_to_string(&sim).unwrap();
    assert!(lines.contains("raredraft") && lines.contains("oracle"));
    assert_eq!(read_manifest(&sim).command, "simulate");

    let table = fx.root.join("sweep.csv");
    let mut args = vec![
        "sweep",
        "--cards",
        p(&fx.cards),
        "--log",
        p(&fx.log),
        "--dims",
        "2,3",
        "--seeds",
        "0,1",
        "--hidden",
        "8",
        "--shards",
        "4",
        "--shard-budget",
        "2",
        "--out",
        p(&table),
    ];
    args.extend(["--lr", "0.003"]);
    ok(&args);
    let csv = std::fs::read_to_string(&table).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "dim,seed,mtta,mtpd");
    assert_eq!(csv.lines().count(), 1 + 4 + 2);
    assert!(csv.contains("\n3,mean,"));
}

#[test]
fn config_file_sits_under_explicit_flags() {
    let fx = fixture("4");
    let config = fx.root.join("c.toml");
    std::fs::write(&config, "[train]\ndim = 5\nhidden = [8]\nshards = 2\nseed = 4\n").unwrap();
    let from_config = fx.root.join("cfg.cpr");
    ok(&["--config", p(&config), "train", "--cards", p(&fx.cards), "--log", p(&fx.log), "--out", p(&from_config)]);
    let (m, _) = EmbeddingModel::load(&from_config).unwrap();
    assert_eq!(m.dim(), 5);
    assert_eq!(m.spec().hidden_dims, vec![8]);
    assert_eq!(read_manifest(&from_config).config["seed"], 4);

    let overridden = fx.root.join("flag.cpr");
    ok(&[
        "train",
        "--config",
        p(&config),
        "--cards",
        p(&fx.cards),
        "--log",
        p(&fx.log),
        "--dim",
        "3",
        "--out",
        p(&overridden),
    ]);
    let (m, _) = EmbeddingModel::load(&overridden).unwrap();
    assert_eq!(m.dim(), 3);
    assert_eq!(m.spec().hidden_dims, vec![8]);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["train", "--help"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(run(&["train", "--dim", "x"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = run(&["rank", "--cards", p(&missing), "--out", p(&dir.path().join("r.tsv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let fx = fixture("2");
    let out = run(&["rank", "--cards", p(&fx.cards), "--model-dir", p(&fx.root), "--out", p(&fx.root.join("r.tsv"))]);
    assert_eq!(out.status.code(), Some(1), "missing default model is a user error");
    let out =
        run(&["evaluate", "--cards", p(&fx.cards), "--log", p(&fx.log), "--agent", "wizard", "--out-dir", p(&fx.root)]);
    assert_eq!(out.status.code(), Some(1));

    let garbage = fx.root.join("bad.cpr");
    std::fs::write(&garbage, "not a model").unwrap();
    let out = run(&["rank", "--cards", p(&fx.cards), "--model", p(&garbage), "--out", p(&fx.root.join("r.tsv"))]);
    assert_eq!(out.status.code(), Some(1));

    // a divergent learning rate is a failure of the run, not of the input
    let diverged = fx.root.join("inf.cpr");
    let mut args = vec!["train", "--cards", p(&fx.cards), "--log", p(&fx.log), "--out", p(&diverged)];
    args.extend(["--shards", "1", "--hidden", "4", "--dim", "2", "--lr", "1e308", "--batch-size", "8"]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn model_dir_comes_from_environment() {
    let fx = fixture("2");
    let models = fx.root.join("env-models");
    let mut args = vec!["train", "--cards", p(&fx.cards), "--log", p(&fx.log)];
    args.extend(SMALL_NET);
    let out = bin().args(&args).env("CPRDRAFT_MODEL_DIR", &models).output().unwrap();
    assert!(out.status.success());
    assert!(models.join("model.cpr").exists());
    let out = bin()
        .args(["rank", "--cards", p(&fx.cards), "--out", p(&fx.root.join("r.tsv"))])
        .env("CPRDRAFT_MODEL_DIR", &models)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
