//! End-to-end acceptance checks on synthetic data.
//!
//! Runs as a plain binary so that every criterion prints one PASS/FAIL line.
//! Pass a substring to run only matching criteria.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use cprdraft_core::analysis::{
    card_stats, color_cluster_purity, dimension_sweep, evaluate_agent, kendall_tau, EvaluationReport, SweepSetup,
};
use cprdraft_core::cpr::train;
use cprdraft_core::dataio::{
    extract_pick_events, generate_triplets, split_drafts, stream_triplets, InMemoryShards, Partition, ShardSet,
};
use cprdraft_core::draftsim::{run_draft, OracleBot, OracleUtility, RandomBot, RaredraftBot};
use cprdraft_core::neuralnet::{analytic_triplet_gradient, embed_sparse, ModelParams, NetworkSpec};
use cprdraft_core::synth::synthetic_database;
use cprdraft_core::{
    CardDatabase, CardId, DatasetSplit, DraftConfig, DraftLog, DraftRng, EmbeddingModel, Pack, PickEvent, PlayerPool,
    SiameseBot, TrainConfig,
};

const DRAFTS: u64 = 2_000;
const ORACLE_NOISE: f64 = 0.01;
const SHARDS: usize = 20;
const SWEEP_SHARD_BUDGET: usize = 5;
const EMBEDDING_DIM: usize = 16;
const HIDDEN: [usize; 2] = [64, 64];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Oracle-drafted synthetic data with a fixed train/test split.
struct World {
    db: CardDatabase,
    utility: OracleUtility,
    logs: Vec<DraftLog>,
    split: DatasetSplit,
    test: Vec<PickEvent>,
}

impl World {
    fn build(n_cards: usize, drafts: u64, seed: u64) -> World {
        let db = synthetic_database(n_cards, seed);
        let mut rng = DraftRng::seed_from_u64(seed + 1);
        let utility = OracleUtility::random(&db, 1.0, &mut rng);
        let seats = vec![OracleBot::new(utility.clone(), ORACLE_NOISE); 8];
        let logs: Vec<DraftLog> =
            (0..drafts).map(|id| run_draft(id, &seats, &DraftConfig::default(), &db, &mut rng).unwrap()).collect();
        let ids: Vec<u64> = logs.iter().map(|l| l.id).collect();
        let split = split_drafts(&ids, 0.8, 7).unwrap();
        let test = logs
            .iter()
            .filter(|l| split.contains(l.id, Partition::Test))
            .flat_map(|l| extract_pick_events(l).unwrap())
            .collect();
        World { db, utility, logs, split, test }
    }

    fn shards(&self) -> InMemoryShards {
        InMemoryShards::new(self.logs.clone(), ShardSet::new(SHARDS))
    }

    fn report(&self, agent: &dyn cprdraft_core::Agent) -> EvaluationReport {
        evaluate_agent(agent, &self.db, &self.test, &mut DraftRng::seed_from_u64(11)).unwrap()
    }
}

/// A world plus a model trained on its full training partition.
struct Trained {
    world: World,
    untrained: EmbeddingModel,
    model: Arc<EmbeddingModel>,
}

fn train_on(world: World, seed: u64) -> Trained {
    let mut model =
        EmbeddingModel::init(&world.db, HIDDEN.to_vec(), EMBEDDING_DIM, &mut DraftRng::seed_from_u64(seed)).unwrap();
    let untrained = model.clone();
    let shards = world.shards();
    let stream = stream_triplets(&shards, &world.split, Partition::Train, SHARDS);
    let started = Instant::now();
    let history =
        train(&mut model, &world.db, stream, &TrainConfig::default(), &[], &mut DraftRng::seed_from_u64(seed + 1))
            .unwrap();
    eprintln!(
        "    trained {}-card model on {} triplets in {:.0?}",
        world.db.len(),
        history.triplets_seen,
        started.elapsed()
    );
    Trained { world, untrained, model: Arc::new(model) }
}

#[derive(Default)]
struct Context {
    small: Option<Trained>,
    large: Option<Trained>,
}

impl Context {
    /// 30-card set used for the learning-signal, MTPD and sweep checks.
    fn small(&mut self) -> &Trained {
        self.small.get_or_insert_with(|| train_on(World::build(30, DRAFTS, 0), 3))
    }

    /// 90-card set for the color-structure and utility-correlation checks.
    fn large(&mut self) -> &Trained {
        self.large.get_or_insert_with(|| train_on(World::build(90, DRAFTS, 0), 3))
    }
}

fn random_baseline(_: &mut Context) -> Outcome {
    let world = World::build(30, 500, 42);
    let events: Vec<PickEvent> = world.logs.iter().flat_map(|l| extract_pick_events(l).unwrap()).collect();
    let report = evaluate_agent(&RandomBot, &world.db, &events, &mut DraftRng::seed_from_u64(5)).unwrap();
    let harmonic: f64 = (1..=15).map(|k| 1.0 / k as f64).sum();
    let expected = harmonic / 15.0;
    let diff = (report.mtta - expected).abs();
    outcome(
        diff <= 0.005,
        format!(
            "MTTA {:.4} over {} events, H15/15 = {expected:.4}, |diff| {diff:.4} <= 0.005",
            report.mtta,
            events.len()
        ),
    )
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn reference_loss(spec: &NetworkSpec, params: &ModelParams, inputs: &[Vec<(usize, f64)>; 3], margin: f64) -> f64 {
    let a = embed_sparse(spec, params, &inputs[0]).unwrap();
    let p = embed_sparse(spec, params, &inputs[1]).unwrap();
    let n = embed_sparse(spec, params, &inputs[2]).unwrap();
    (l2(&a, &p) - l2(&a, &n) + margin).max(0.0)
}

fn gradient_correctness(_: &mut Context) -> Outcome {
    let mut rng = DraftRng::seed_from_u64(2024);
    let (mut checked, mut worst) = (0, 0.0f64);
    let margin = 1.0;
    let h = 1e-5;
    while checked < 24 {
        let n = rng.gen_range(4..12);
        let hidden: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(3..9)).collect();
        let spec = NetworkSpec { dropout_rate: 0.0, ..NetworkSpec::embedding(n, hidden, rng.gen_range(2..6)) };
        let params = ModelParams::init(&spec, &mut rng);
        let pool: Vec<(usize, f64)> =
            (0..rng.gen_range(1..4)).map(|_| (rng.gen_range(0..n), rng.gen_range(1..3) as f64)).collect();
        let mut pool = pool;
        pool.sort_by_key(|e| e.0);
        pool.dedup_by_key(|e| e.0);
        let pos = rng.gen_range(0..n);
        let neg = (pos + rng.gen_range(1..n)) % n;
        let inputs = [pool, vec![(pos, 1.0)], vec![(neg, 1.0)]];
        // skip draws sitting on the hinge, where the loss is not differentiable
        if reference_loss(&spec, &params, &inputs, margin) < 1e-3 {
            continue;
        }
        let analytic = analytic_triplet_gradient(&spec, &params, [&inputs[0], &inputs[1], &inputs[2]], margin).unwrap();
        let mut probe = params.clone();
        for i in 0..params.len() {
            let orig = probe.values()[i];
            probe.values_mut()[i] = orig + h;
            let up = reference_loss(&spec, &probe, &inputs, margin);
            probe.values_mut()[i] = orig - h;
            let down = reference_loss(&spec, &probe, &inputs, margin);
            probe.values_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.values()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        checked += 1;
    }
    outcome(worst < 1e-4, format!("{checked} networks, worst relative error {worst:.2e} < 1e-4"))
}

fn triplet_accounting(_: &mut Context) -> Outcome {
    let db = synthetic_database(30, 9);
    let mut rng = DraftRng::seed_from_u64(9);
    let config = DraftConfig::default();
    // every player sees packs of 15, 14, ..., 1 in each of 3 rounds
    let per_draft = config.players * config.rounds * (1..=config.pack_size).map(|k| k - 1).sum::<usize>();
    let mut counts = Vec::new();
    for id in 0..100 {
        let log = run_draft(id, &[RandomBot; 8], &config, &db, &mut rng).unwrap();
        let n: usize = log.events.iter().map(|e| generate_triplets(id, e).len()).sum();
        counts.push(n);
    }
    let total: usize = counts.iter().sum();
    let pass = per_draft == 2520 && counts.iter().all(|&c| c == per_draft) && total == 100 * per_draft;
    outcome(
        pass,
        format!(
            "per draft {}..={}, 100 drafts {total} = 100 x {per_draft}",
            counts.iter().min().unwrap(),
            counts.iter().max().unwrap()
        ),
    )
}

fn learning_signal(ctx: &mut Context) -> Outcome {
    let t = ctx.small();
    let w = &t.world;
    let oracle = w.report(&OracleBot::new(w.utility.clone(), 0.0));
    let siamese = w.report(&SiameseBot::new(Arc::clone(&t.model), &w.db).unwrap());
    let rare = w.report(&RaredraftBot);
    let random = w.report(&RandomBot);
    let pass = oracle.mtta >= 0.95 && siamese.mtta > rare.mtta && siamese.mtta >= 2.0 * random.mtta;
    outcome(
        pass,
        format!(
            "oracle self-MTTA {:.4} >= 0.95; siamese {:.4} > raredraft {:.4}; siamese >= 2 x random {:.4}",
            oracle.mtta, siamese.mtta, rare.mtta, random.mtta
        ),
    )
}

fn mtpd_consistency(ctx: &mut Context) -> Outcome {
    let t = ctx.small();
    let w = &t.world;
    let siamese = w.report(&SiameseBot::new(Arc::clone(&t.model), &w.db).unwrap());
    let rare = w.report(&RaredraftBot);

    let mut rng = DraftRng::seed_from_u64(77);
    let clean = OracleBot::new(w.utility.clone(), 0.0);
    let events: Vec<PickEvent> = (0..20)
        .flat_map(|id| {
            extract_pick_events(
                &run_draft(id, &vec![clean.clone(); 8], &DraftConfig::default(), &w.db, &mut rng).unwrap(),
            )
            .unwrap()
        })
        .collect();
    let own = evaluate_agent(&clean, &w.db, &events, &mut rng).unwrap();
    outcome(
        siamese.mtpd < rare.mtpd && own.mtpd == 0.0,
        format!(
            "siamese MTPD {:.4} < raredraft {:.4}; noise-free oracle on own log {}",
            siamese.mtpd, rare.mtpd, own.mtpd
        ),
    )
}

fn dimension_trend(ctx: &mut Context) -> Outcome {
    let w = &ctx.small().world;
    let shards = w.shards();
    let setup = SweepSetup {
        hidden_dims: HIDDEN.to_vec(),
        train: TrainConfig { validation_every: 0, ..TrainConfig::default() },
    };
    let rows = dimension_sweep(
        &w.db,
        &setup,
        &[2, 8, 32],
        &[0, 1, 2],
        || stream_triplets(&shards, &w.split, Partition::Train, SWEEP_SHARD_BUDGET),
        &w.test,
        |dim, run| eprintln!("    D={dim:<2} seed {} MTTA {:.4}", run.seed, run.mtta),
    )
    .unwrap();
    let means: Vec<String> = rows.iter().map(|r| format!("D={} {:.4}", r.dim, r.mean_mtta)).collect();
    outcome(rows[2].mean_mtta > rows[0].mean_mtta, format!("mean MTTA {}; need D=32 > D=2", means.join(", ")))
}

fn mean_purity(model: &EmbeddingModel, db: &CardDatabase) -> f64 {
    (0..5).map(|s| color_cluster_purity(model, db, &mut DraftRng::seed_from_u64(s)).unwrap()).sum::<f64>() / 5.0
}

fn color_structure(ctx: &mut Context) -> Outcome {
    let t = ctx.large();
    let trained = mean_purity(&t.model, &t.world.db);
    let untrained = mean_purity(&t.untrained, &t.world.db);
    outcome(
        trained >= 0.7 && untrained <= 0.45,
        format!("purity trained {trained:.3} >= 0.7, untrained {untrained:.3} <= 0.45 (mean of 5 k-means seeds)"),
    )
}

fn utility_correlation(ctx: &mut Context) -> Outcome {
    let t = ctx.large();
    let events: Vec<PickEvent> = t.world.logs.iter().flat_map(|l| extract_pick_events(l).unwrap()).collect();
    let stats = card_stats(&events, t.world.db.len());
    let (mut rate, mut closeness) = (Vec::new(), Vec::new());
    for card in t.world.db.cards() {
        if let Some(r) = stats.cards[card.id.index()].first_pick_rate() {
            rate.push(r);
            closeness.push(-t.model.distance_to_empty(card.id).unwrap());
        }
    }
    let tau = kendall_tau(&rate, &closeness).unwrap();
    outcome(tau >= 0.5, format!("tau(first-pick rate, -distance to empty) {tau:.3} over {} cards >= 0.5", rate.len()))
}

fn singleton_identity(ctx: &mut Context) -> Outcome {
    let mut models: Vec<(Arc<EmbeddingModel>, CardDatabase)> = Vec::new();
    let t = ctx.small();
    models.push((Arc::clone(&t.model), t.world.db.clone()));
    let t = ctx.large();
    models.push((Arc::clone(&t.model), t.world.db.clone()));

    let mut rng = DraftRng::seed_from_u64(31);
    let (mut mismatches, mut unstable, mut cards) = (0, 0, 0);
    for (model, db) in &models {
        let n = db.len();
        for c in 0..n {
            let card = CardId::from(c);
            let anchor = model.embed_anchor(&PlayerPool::from_cards(n, [card])).unwrap();
            let candidate = model.candidate_embedding(card).unwrap();
            cards += 1;
            if anchor.iter().zip(candidate).any(|(a, b)| a.to_bits() != b.to_bits()) {
                mismatches += 1;
            }
        }
        let pool = PlayerPool::from_cards(n, (0..rng.gen_range(0..30)).map(|_| CardId::from(rng.gen_range(0..n))));
        let mut cards_in_pack: Vec<CardId> = (0..n).map(CardId::from).collect();
        cards_in_pack.shuffle(&mut rng);
        cards_in_pack.truncate(15);
        let mut pack = Pack::new(cards_in_pack);
        let expected = model.pick_card(db, &pool, &pack).unwrap();
        for _ in 0..100 {
            pack.0.shuffle(&mut rng);
            if model.pick_card(db, &pool, &pack).unwrap() != expected {
                unstable += 1;
            }
        }
    }
    outcome(
        mismatches == 0 && unstable == 0,
        format!("{cards} cards, {mismatches} bitwise mismatches; {unstable} changed picks over 2 x 100 permutations"),
    )
}

type Criterion = (&'static str, fn(&mut Context) -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("random_baseline_mtta", random_baseline),
        ("gradient_correctness", gradient_correctness),
        ("triplet_accounting", triplet_accounting),
        ("learning_signal", learning_signal),
        ("mtpd_consistency", mtpd_consistency),
        ("dimension_trend", dimension_trend),
        ("color_structure", color_structure),
        ("utility_correlation", utility_correlation),
        ("singleton_identity", singleton_identity),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let list_only = std::env::args().any(|a| a == "--list");
    let mut ctx = Context::default();
    let (mut passed, mut failed) = (0, 0);
    for (name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        if list_only {
            println!("{name}: test");
            continue;
        }
        let started = Instant::now();
        let result = check(&mut ctx);
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {} [{:.1?}]", result.detail, started.elapsed());
        if result.pass {
            passed += 1;
        } else {
            failed += 1;
        }
    }
    if list_only {
        return;
    }
    println!("acceptance: {passed} passed, {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
