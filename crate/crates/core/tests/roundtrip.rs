use std::sync::Arc;

use rand::SeedableRng;

use cprdraft_core::analysis::evaluate_agent;
use cprdraft_core::cpr::train;
use cprdraft_core::dataio::{
    extract_pick_events, read_draft_logs, read_triplet_cache, split_drafts, stream_triplets, write_draft_logs,
    write_triplet_cache, InMemoryShards, Partition, ShardDir, ShardSet,
};
use cprdraft_core::draftsim::{run_draft, OracleBot, OracleUtility, RandomBot};
use cprdraft_core::service::DraftService;
use cprdraft_core::synth::synthetic_database;
use cprdraft_core::{
    CardDatabase, DraftConfig, DraftLog, DraftRng, EmbeddingModel, SiameseBot, TrainConfig, TripletExample,
};

fn oracle_logs(db: &CardDatabase, n: u64, seed: u64) -> (OracleUtility, Vec<DraftLog>) {
    let mut rng = DraftRng::seed_from_u64(seed);
    let utility = OracleUtility::random(db, 1.0, &mut rng);
    let seats = vec![OracleBot::new(utility.clone(), 0.01); 8];
    let logs = (0..n).map(|id| run_draft(id, &seats, &DraftConfig::default(), db, &mut rng).unwrap()).collect();
    (utility, logs)
}

#[test]
fn logs_shards_and_cache_agree() {
    let dir = tempfile::tempdir().unwrap();
    let db = synthetic_database(30, 2);
    let (_, logs) = oracle_logs(&db, 12, 4);
    let path = dir.path().join("drafts.jsonl");
    write_draft_logs(&path, &logs).unwrap();
    let back = read_draft_logs(&path, db.len()).unwrap();
    assert_eq!(back, logs);

    let ids: Vec<u64> = logs.iter().map(|l| l.id).collect();
    let split = split_drafts(&ids, 0.75, 1).unwrap();
    let memory = InMemoryShards::new(logs.clone(), ShardSet::new(5));
    let disk = ShardDir::write(dir.path().join("shards"), &logs, ShardSet::new(5), db.len()).unwrap();
    let a: Vec<TripletExample> =
        stream_triplets(&memory, &split, Partition::Train, 5).collect::<Result<_, _>>().unwrap();
    let b: Vec<TripletExample> = stream_triplets(&disk, &split, Partition::Train, 5).collect::<Result<_, _>>().unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), split.train.len() * 2520);

    let cache = dir.path().join("train.trip");
    write_triplet_cache(&cache, db.len(), a.iter()).unwrap();
    let (n, cached) = read_triplet_cache(&cache).unwrap();
    assert_eq!(n, 30);
    assert_eq!(cached, a);
}

#[test]
fn trained_model_survives_save_and_serves_the_same_ranking() {
    let dir = tempfile::tempdir().unwrap();
    let db = synthetic_database(30, 0);
    let (_, logs) = oracle_logs(&db, 40, 1);
    let ids: Vec<u64> = logs.iter().map(|l| l.id).collect();
    let split = split_drafts(&ids, 0.8, 0).unwrap();
    let shards = InMemoryShards::new(logs.clone(), ShardSet::new(4));
    let mut model = EmbeddingModel::init(&db, vec![32], 8, &mut DraftRng::seed_from_u64(0)).unwrap();
    let config = TrainConfig { learning_rate: 3e-3, ..TrainConfig::default() };
    let test: Vec<_> = logs
        .iter()
        .filter(|l| split.contains(l.id, Partition::Test))
        .flat_map(|l| extract_pick_events(l).unwrap())
        .collect();
    train(
        &mut model,
        &db,
        stream_triplets(&shards, &split, Partition::Train, 4),
        &config,
        &[],
        &mut DraftRng::seed_from_u64(1),
    )
    .unwrap();

    let path = dir.path().join("m.cpr");
    model.save(&path, serde_json::Value::Null).unwrap();
    let (loaded, _) = EmbeddingModel::load(&path).unwrap();
    assert_eq!(loaded.params(), model.params());
    let bot = SiameseBot::new(Arc::new(loaded), &db).unwrap();
    let siamese = evaluate_agent(&bot, &db, &test, &mut DraftRng::seed_from_u64(2)).unwrap();
    let random = evaluate_agent(&RandomBot, &db, &test, &mut DraftRng::seed_from_u64(2)).unwrap();
    assert!(siamese.mtta > random.mtta, "siamese {} vs random {}", siamese.mtta, random.mtta);

    // the service ranks a session state exactly as the bot does for the same event
    let db = Arc::new(db);
    let svc =
        DraftService::new(Arc::clone(&db), [("m".to_string(), Arc::new(model))], &DraftConfig::default()).unwrap();
    let session = svc.create_session("m").unwrap();
    let player0: Vec<_> = test.iter().filter(|e| e.player == test[0].player).take(45).collect();
    for e in player0 {
        let rec = svc.recommend(&session.id, e.pack.cards()).unwrap();
        let mut rng = DraftRng::seed_from_u64(0);
        let expected = cprdraft_core::Agent::rank(&bot, &e.pool_before, &e.pack, &db, &mut rng);
        let got: Vec<_> = rec.ranked.iter().map(|r| r.card_id).collect();
        assert_eq!(got, expected, "pick {}", e.pick_number);
        svc.record_pick(&session.id, e.pack.cards(), e.picked).unwrap();
    }
    assert!(svc.get_session(&session.id).unwrap().complete);
}
