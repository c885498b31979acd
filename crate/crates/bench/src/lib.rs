//! Shared fixtures for the criterion benches.

use rand::SeedableRng;

use cprdraft_core::dataio::{extract_pick_events, generate_triplets};
use cprdraft_core::draftsim::{run_draft, OracleBot, OracleUtility};
use cprdraft_core::synth::synthetic_database;
use cprdraft_core::{CardDatabase, DraftConfig, DraftRng, EmbeddingModel, PickEvent, TripletExample};

pub struct Fixture {
    pub db: CardDatabase,
    pub model: EmbeddingModel,
    pub events: Vec<PickEvent>,
    pub triplets: Vec<TripletExample>,
}

/// One oracle draft over an `n_cards` synthetic set and an untrained model.
pub fn fixture(n_cards: usize, hidden: Vec<usize>, dim: usize) -> Fixture {
    let db = synthetic_database(n_cards, 0);
    let mut rng = DraftRng::seed_from_u64(0);
    let model = EmbeddingModel::init(&db, hidden, dim, &mut rng).expect("valid network");
    let bot = OracleBot::new(OracleUtility::random(&db, 1.0, &mut rng), 0.01);
    let log = run_draft(0, &vec![bot; 8], &DraftConfig::default(), &db, &mut rng).expect("draft runs");
    let events = extract_pick_events(&log).expect("consistent log");
    let triplets = events.iter().flat_map(|e| generate_triplets(log.id, e)).collect();
    Fixture { db, model, events, triplets }
}
