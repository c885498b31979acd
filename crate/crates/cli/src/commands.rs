use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use cprdraft_core::analysis::{
    card_stats, dimension_sweep, embedding_rows, evaluate_agent, kendall_tau, write_embedding_csv, write_per_pick_csv,
    EvaluationReport, SweepSetup,
};
use cprdraft_core::cpr::train;
use cprdraft_core::dataio::{
    extract_pick_events, read_draft_logs, split_drafts, stable_hash, stream_triplets, DraftLogWriter, InMemoryShards,
    Partition, ShardSet,
};
use cprdraft_core::draftsim::{run_draft, NNetBot, OracleBot, OracleUtility, RandomBot, RaredraftBot};
use cprdraft_core::neuralnet::{ModelParams, NetworkSpec};
use cprdraft_core::service::DraftService;
use cprdraft_core::synth::synthetic_database;
use cprdraft_core::{
    Agent, CardDatabase, DraftConfig, DraftLog, DraftRng, EmbeddingModel, PickEvent, SiameseBot, TrainConfig,
};

use crate::args::*;
use crate::manifest::RunManifest;
use crate::{http, CliError};

/// Salt for the weight-initialization stream derived from `--seed`.
const INIT_SALT: u64 = 0x1417;

/// Written by `gen` next to the draft log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleSidecar {
    pub db_fingerprint: String,
    pub noise: f64,
    pub utility: OracleUtility,
}

pub(crate) fn dispatch(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(a) => gen(&a, argv),
        Command::Train(a) => train_cmd(&a, argv),
        Command::Evaluate(a) => evaluate(&a, argv),
        Command::Rank(a) => rank(&a, argv),
        Command::Simulate(a) => simulate(&a, argv),
        Command::Sweep(a) => sweep(&a, argv),
        Command::Serve(a) => serve(&a),
    }
}

fn snapshot<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn load_db(path: &Path) -> Result<CardDatabase, CliError> {
    CardDatabase::load(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

fn load_logs(path: &Path, db: &CardDatabase) -> Result<Vec<DraftLog>, CliError> {
    let logs = read_draft_logs(path, db.len()).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    if logs.is_empty() {
        return Err(CliError::user(format!("{}: no drafts", path.display())));
    }
    Ok(logs)
}

fn model_path(explicit: &Option<PathBuf>, dir: &ModelDirArgs) -> PathBuf {
    explicit.clone().unwrap_or_else(|| dir.model_dir.join("model.cpr"))
}

fn load_model(path: &Path, db: &CardDatabase) -> Result<Arc<EmbeddingModel>, CliError> {
    let (model, _) = EmbeddingModel::load(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    model.check_db(db).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    Ok(Arc::new(model))
}

fn load_oracle(path: &Path, db: &CardDatabase) -> Result<OracleSidecar, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    let oracle: OracleSidecar = serde_json::from_str(&text)?;
    if oracle.db_fingerprint != db.fingerprint() || oracle.utility.base.len() != db.len() {
        return Err(CliError::user(format!("{}: oracle was built for another card database", path.display())));
    }
    Ok(oracle)
}

fn events_of<'a>(logs: impl IntoIterator<Item = &'a DraftLog>) -> Result<Vec<PickEvent>, CliError> {
    let mut events = Vec::new();
    for log in logs {
        events.extend(extract_pick_events(log)?);
    }
    Ok(events)
}

fn train_config(net: &NetArgs, validation_every: usize) -> Result<TrainConfig, CliError> {
    if net.batch_size == 0 {
        return Err(CliError::user("--batch-size must be positive"));
    }
    if !net.lr.is_finite() || net.lr <= 0.0 {
        return Err(CliError::user("--lr must be a positive finite number"));
    }
    Ok(TrainConfig {
        learning_rate: net.lr,
        batch_size: net.batch_size,
        margin: net.margin,
        shuffle_buffer: net.shuffle_buffer,
        validation_every,
    })
}

struct TrainingData {
    split: cprdraft_core::DatasetSplit,
    shards: InMemoryShards,
    budget: usize,
    test_events: Vec<PickEvent>,
}

fn training_data(data: &DataArgs, db: &CardDatabase) -> Result<TrainingData, CliError> {
    if data.shards == 0 {
        return Err(CliError::user("--shards must be positive"));
    }
    let logs = load_logs(&data.log, db)?;
    let ids: Vec<u64> = logs.iter().map(|l| l.id).collect();
    let split = split_drafts(&ids, data.split.split_ratio, data.split.split_seed)?;
    let mut test_logs: Vec<&DraftLog> = logs.iter().filter(|l| split.test.contains(&l.id)).collect();
    test_logs.sort_by_key(|l| l.id);
    let test_events = events_of(test_logs)?;
    let shards = InMemoryShards::new(logs, ShardSet::new(data.shards));
    Ok(TrainingData { split, shards, budget: data.shard_budget.unwrap_or(data.shards), test_events })
}

fn gen(args: &GenArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut manifest = RunManifest::begin("gen", argv, snapshot(args), Some(args.seed));
    let db = match (&args.cards, args.synthetic_cards) {
        (Some(path), _) => {
            manifest.input(path);
            load_db(path)?
        }
        (None, Some(n)) => {
            if n < 4 {
                return Err(CliError::user("--synthetic-cards must be at least 4"));
            }
            let db = synthetic_database(n, args.seed);
            let out = args.cards_out.clone().unwrap_or_else(|| args.out.with_extension("cards.csv"));
            db.write(create(&out)?)?;
            manifest.output(out);
            db
        }
        (None, None) => return Err(CliError::user("one of --cards or --synthetic-cards is required")),
    };
    if !args.noise.is_finite() || args.noise < 0.0 {
        return Err(CliError::user("--noise must be a finite non-negative number"));
    }
    let config = DraftConfig { rng_seed: args.seed, ..DraftConfig::default() };
    let mut rng = DraftRng::seed_from_u64(args.seed);
    let utility = OracleUtility::random(&db, args.synergy, &mut rng);
    let bot = OracleBot::new(utility.clone(), args.noise);
    let seats = vec![bot; config.players];

    let mut writer = DraftLogWriter::new(create(&args.out)?)?;
    for id in 0..args.drafts {
        let log = run_draft(id, &seats, &config, &db, &mut rng)?;
        writer.write(&log)?;
    }
    writer.finish()?.flush()?;
    manifest.output(&args.out);

    let oracle_path = sidecar(&args.out, ".oracle.json");
    let side = OracleSidecar { db_fingerprint: db.fingerprint().to_string(), noise: args.noise, utility };
    serde_json::to_writer_pretty(create(&oracle_path)?, &side)?;
    manifest.output(&oracle_path);
    manifest.finish(&args.out)?;
    println!("wrote {} drafts to {}", args.drafts, args.out.display());
    Ok(())
}

fn init_model(db: &CardDatabase, net: &NetArgs, dim: usize, seed: u64) -> Result<EmbeddingModel, CliError> {
    let spec = NetworkSpec { dropout_rate: net.dropout, ..NetworkSpec::embedding(db.len(), net.hidden.clone(), dim) };
    spec.validate().map_err(|e| CliError::user(format!("network: {e}")))?;
    let mut init_rng = DraftRng::seed_from_u64(stable_hash(seed, INIT_SALT));
    let params = ModelParams::init(&spec, &mut init_rng);
    Ok(EmbeddingModel::new(spec, params, db.fingerprint())?)
}

fn train_cmd(args: &TrainArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut manifest = RunManifest::begin("train", argv, snapshot(args), Some(args.seed));
    let db = load_db(&args.db.cards)?;
    manifest.input(&args.db.cards);
    manifest.input(&args.data.log);
    let data = training_data(&args.data, &db)?;
    let config = train_config(&args.net, args.validation_every)?;
    let mut model = init_model(&db, &args.net, args.net.dim, args.seed)?;

    let validation = &data.test_events[..args.validation_events.min(data.test_events.len())];
    let stream = stream_triplets(&data.shards, &data.split, Partition::Train, data.budget);
    let mut rng = DraftRng::seed_from_u64(args.seed);
    let history = train(&mut model, &db, stream, &config, validation, &mut rng)?;

    let out = model_path(&args.out, &args.model_dir);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let last = history.validation.last().map(|v| v.mtta);
    let extra = serde_json::json!({
        "seed": args.seed,
        "triplets_seen": history.triplets_seen,
        "validation_mtta": last,
    });
    let checksum = model.save(&out, extra)?;
    manifest.output(&out);
    let history_path = sidecar(&out, ".history.json");
    serde_json::to_writer(create(&history_path)?, &history)?;
    manifest.output(&history_path);
    manifest.finish(&out)?;

    println!(
        "trained on {} triplets in {} batches; validation MTTA {}; model {} (sha256 {})",
        history.triplets_seen,
        history.batch_losses.len(),
        last.map_or("n/a".to_string(), |m| format!("{m:.4}")),
        out.display(),
        checksum
    );
    Ok(())
}

fn build_agent(
    name: &str,
    db: &CardDatabase,
    model: &mut impl FnMut() -> Result<Arc<EmbeddingModel>, CliError>,
    oracle: &mut impl FnMut() -> Result<OracleSidecar, CliError>,
) -> Result<Box<dyn Agent>, CliError> {
    Ok(match name {
        "random" => Box::new(RandomBot),
        "raredraft" => Box::new(RaredraftBot),
        "oracle" => Box::new(OracleBot::new(oracle()?.utility, 0.0)),
        "siamese" => Box::new(SiameseBot::new(model()?, db)?),
        other => return Err(CliError::user(format!("unknown agent {other:?}"))),
    })
}

fn evaluate(args: &EvaluateArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut manifest = RunManifest::begin("evaluate", argv, snapshot(args), Some(args.seed));
    let db = load_db(&args.db.cards)?;
    manifest.input(&args.db.cards);
    manifest.input(&args.log);
    let logs = load_logs(&args.log, &db)?;
    let ids: Vec<u64> = logs.iter().map(|l| l.id).collect();
    let split = split_drafts(&ids, args.split.split_ratio, args.split.split_seed)?;
    let in_partition = |id: u64| match args.partition.as_str() {
        "train" => split.train.contains(&id),
        "test" => split.test.contains(&id),
        _ => true,
    };
    let events = events_of(logs.iter().filter(|l| in_partition(l.id)))?;
    if events.is_empty() {
        return Err(CliError::user(format!("partition {} has no pick events", args.partition)));
    }

    let model_file = model_path(&args.model, &args.model_dir);
    let oracle_file = args.oracle.clone().unwrap_or_else(|| sidecar(&args.log, ".oracle.json"));
    if name_dupes(&args.agents) {
        return Err(CliError::user("each agent may be listed once"));
    }
    let mut reports: Vec<EvaluationReport> = Vec::new();
    for name in &args.agents {
        let mut rng = DraftRng::seed_from_u64(args.seed);
        let agent: Box<dyn Agent> = if name == "nnet" {
            let train_events = events_of(logs.iter().filter(|l| split.train.contains(&l.id)))?;
            let mut bot = NNetBot::init(db.len(), args.nnet_hidden.clone(), &mut rng)?;
            bot.train(&train_events, args.nnet_lr, 128, &mut rng)?;
            Box::new(bot)
        } else {
            let mut model = || {
                manifest.input(&model_file);
                load_model(&model_file, &db)
            };
            let mut oracle = || load_oracle(&oracle_file, &db);
            build_agent(name, &db, &mut model, &mut oracle)?
        };
        let report = evaluate_agent(agent.as_ref(), &db, &events, &mut rng)?;
        println!("{}", report.table());
        reports.push(report);
    }
    std::fs::create_dir_all(&args.out_dir)?;
    for report in &reports {
        let path = args.out_dir.join(format!("per_pick_{}.csv", report.agent));
        write_per_pick_csv(report, create(&path)?)?;
        manifest.output(path);
    }
    let mut table = create(&args.out_dir.join("table.txt"))?;
    for report in &reports {
        writeln!(table, "{}", report.table())?;
    }
    table.flush()?;
    manifest.output(args.out_dir.join("table.txt"));
    let report_path = args.out_dir.join("report.json");
    serde_json::to_writer_pretty(create(&report_path)?, &reports)?;
    manifest.output(&report_path);
    manifest.finish(&report_path)?;
    Ok(())
}

fn name_dupes(names: &[String]) -> bool {
    let mut sorted = names.to_vec();
    sorted.sort();
    sorted.windows(2).any(|w| w[0] == w[1])
}

fn rank(args: &RankArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut manifest = RunManifest::begin("rank", argv, snapshot(args), None);
    let db = load_db(&args.db.cards)?;
    manifest.input(&args.db.cards);
    let path = model_path(&args.model, &args.model_dir);
    let model = load_model(&path, &db)?;
    manifest.input(&path);
    let ranked = model.rank_all(&db)?;

    let mut out = create(&args.out)?;
    writeln!(out, "rank\tcard_id\tname\tdistance")?;
    for r in &ranked {
        writeln!(out, "{}\t{}\t{}\t{:.6}", r.rank, r.card, db.card(r.card).name, r.distance)?;
    }
    if let Some(log) = &args.log {
        manifest.input(log);
        let events = events_of(&load_logs(log, &db)?)?;
        let stats = card_stats(&events, db.len());
        let (mut closeness, mut rate) = (Vec::new(), Vec::new());
        for r in &ranked {
            if let Some(p) = stats.cards[r.card.index()].first_pick_rate() {
                closeness.push(-r.distance);
                rate.push(p);
            }
        }
        match kendall_tau(&closeness, &rate) {
            Ok(tau) => writeln!(out, "# kendall_tau_vs_first_pick_rate\t{tau:.4}\t{} cards", rate.len())?,
            Err(e) => writeln!(out, "# kendall_tau_vs_first_pick_rate\tn/a\t{e}")?,
        }
    }
    out.flush()?;
    manifest.output(&args.out);

    if let Some(csv) = &args.embeddings {
        let (rows, _) = embedding_rows(&model, &db)?;
        write_embedding_csv(&rows, create(csv)?)?;
        manifest.output(csv);
    }
    manifest.finish(&args.out)?;
    Ok(())
}

fn parse_mix(spec: &str) -> Result<Vec<(String, usize)>, CliError> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|part| {
            let (name, count) = part.split_once(':').unwrap_or((part, "1"));
            let count: usize =
                count.trim().parse().map_err(|_| CliError::user(format!("bad seat count in {part:?}")))?;
            Ok((name.trim().to_string(), count))
        })
        .collect()
}

fn simulate(args: &SimulateArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut manifest = RunManifest::begin("simulate", argv, snapshot(args), Some(args.seed));
    let db = load_db(&args.db.cards)?;
    manifest.input(&args.db.cards);
    let mix = parse_mix(&args.agents)?;
    let model_file = model_path(&args.model, &args.model_dir);
    let mut cached_model: Option<Arc<EmbeddingModel>> = None;
    let mut cached_oracle: Option<OracleSidecar> = None;
    let mut seats: Vec<Box<dyn Agent>> = Vec::new();
    for (name, count) in &mix {
        for _ in 0..*count {
            let mut model = || {
                if cached_model.is_none() {
                    cached_model = Some(load_model(&model_file, &db)?);
                }
                Ok(Arc::clone(cached_model.as_ref().expect("just loaded")))
            };
            let mut oracle = || {
                let path = args.oracle.as_ref().ok_or_else(|| CliError::user("oracle seats need --oracle"))?;
                if cached_oracle.is_none() {
                    cached_oracle = Some(load_oracle(path, &db)?);
                }
                Ok(cached_oracle.clone().expect("just loaded"))
            };
            seats.push(build_agent(name, &db, &mut model, &mut oracle)?);
        }
    }
    if cached_model.is_some() {
        manifest.input(&model_file);
    }
    if let (Some(path), Some(_)) = (&args.oracle, &cached_oracle) {
        manifest.input(path);
    }
    let config = DraftConfig { players: seats.len(), rng_seed: args.seed, ..DraftConfig::default() };
    config.validate()?;

    let mut rng = DraftRng::seed_from_u64(args.seed);
    let mut writer = DraftLogWriter::new(create(&args.out)?)?;
    for id in 0..args.drafts {
        writer.write(&run_draft(id, &seats, &config, &db, &mut rng)?)?;
    }
    writer.finish()?.flush()?;
    manifest.output(&args.out);
    manifest.finish(&args.out)?;
    println!("wrote {} drafts with {} seats to {}", args.drafts, seats.len(), args.out.display());
    Ok(())
}

fn sweep(args: &SweepArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut manifest = RunManifest::begin("sweep", argv, snapshot(args), None);
    let db = load_db(&args.db.cards)?;
    manifest.input(&args.db.cards);
    manifest.input(&args.data.log);
    if args.dims.contains(&0) {
        return Err(CliError::user("--dims entries must be positive"));
    }
    let data = training_data(&args.data, &db)?;
    if data.test_events.is_empty() {
        return Err(CliError::user("test partition is empty"));
    }
    let mut setup = SweepSetup { hidden_dims: args.net.hidden.clone(), train: train_config(&args.net, 0)? };
    setup.train.validation_every = 0;
    let rows = dimension_sweep(
        &db,
        &setup,
        &args.dims,
        &args.seeds,
        || stream_triplets(&data.shards, &data.split, Partition::Train, data.budget),
        &data.test_events,
        |dim, run| println!("dim {dim:>3} seed {:>3}: MTTA {:.4} MTPD {:.4}", run.seed, run.mtta, run.mtpd),
    )?;

    let mut out = create(&args.out)?;
    writeln!(out, "dim,seed,mtta,mtpd")?;
    for row in &rows {
        for run in &row.runs {
            writeln!(out, "{},{},{:.6},{:.6}", row.dim, run.seed, run.mtta, run.mtpd)?;
        }
    }
    for row in &rows {
        writeln!(out, "{},mean,{:.6},", row.dim, row.mean_mtta)?;
        println!("dim {:>3}: mean MTTA {:.4}", row.dim, row.mean_mtta);
    }
    out.flush()?;
    manifest.output(&args.out);
    manifest.finish(&args.out)?;
    Ok(())
}

/// Parses `--model [ID=]FILE`; the id defaults to the file stem.
pub fn parse_model_arg(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((id, path)) if !id.is_empty() => (id.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| spec.to_string());
            (id, path)
        }
    }
}

fn discover_models(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::user(format!("{}: {e}", dir.display())))?;
    let mut found: Vec<(String, PathBuf)> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cpr"))
        .map(|p| parse_model_arg(&p.to_string_lossy()))
        .collect();
    found.sort();
    Ok(found)
}

fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let db = Arc::new(load_db(&args.db.cards)?);
    let specs: Vec<(String, PathBuf)> = if args.models.is_empty() {
        discover_models(&args.model_dir.model_dir)?
    } else {
        args.models.iter().map(|m| parse_model_arg(m)).collect()
    };
    if specs.is_empty() {
        return Err(CliError::user("no models to serve"));
    }
    let mut models = Vec::with_capacity(specs.len());
    for (id, path) in specs {
        models.push((id, load_model(&path, &db)?));
    }
    let mut service = DraftService::new(db, models, &DraftConfig::default())?;
    if let Some(journal) = &args.journal {
        service = service.with_journal(journal)?;
    }
    let app = http::router(Arc::new(service), args.static_dir.as_deref());

    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.bind)
            .await
            .map_err(|e| CliError::user(format!("bind {}: {e}", args.bind)))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Internal(e.to_string()))
    })
}
