//! Draft-log files, pick-event extraction, triplet generation, deterministic
//! train/test splits and shard streaming.

mod cache;
mod logfile;
mod shards;

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::cardset::CardId;
use crate::draftsim::{DraftLog, PickEvent, PlayerPool};

pub use cache::{read_triplet_cache, write_triplet_cache};
pub use logfile::{read_draft_logs, write_draft_logs, DraftLogReader, DraftLogWriter, DraftRecord, LogHeader};
pub use shards::{stream_triplets, DraftSource, InMemoryShards, ShardDir, ShardSet, TripletStream};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("draft {draft}: seat {seat} pick {pick_number} picked card {card}, which is not in its pack")]
    IllegalPick { draft: u64, seat: usize, pick_number: usize, card: CardId },
    #[error("draft {draft}: card {card} is outside the database (N = {n_cards})")]
    UnknownCard { draft: u64, card: CardId, n_cards: usize },
    #[error("draft {draft}: {message}")]
    Inconsistent { draft: u64, message: String },
    #[error("no drafts to split")]
    EmptyInput,
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    BadRatio(f64),
    #[error("missing shard file {0}")]
    MissingShard(String),
    #[error("bad file format: {0}")]
    Format(String),
}

/// One preference: `positive` was picked over `negative` given `anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletExample {
    pub draft_id: u64,
    pub anchor: Arc<PlayerPool>,
    pub positive: CardId,
    pub negative: CardId,
}

/// Re-derives every pick event from the log, checking picks against packs
/// and rebuilding each `pool_before` from earlier picks.
///
/// Events come out grouped by player, in pick order.
pub fn extract_pick_events(log: &DraftLog) -> Result<Vec<PickEvent>, DataError> {
    let n_cards = log.events.first().map(|e| e.pool_before.n_cards()).unwrap_or(0);
    let mut events: Vec<&PickEvent> = log.events.iter().collect();
    events.sort_by_key(|e| (e.player, e.pick_number));

    let mut out = Vec::with_capacity(events.len());
    let mut pool = PlayerPool::new(n_cards);
    let mut current_player = None;
    for e in events {
        if current_player != Some(e.player) {
            current_player = Some(e.player);
            pool = PlayerPool::new(n_cards);
        }
        if !e.pack.contains(e.picked) {
            return Err(DataError::IllegalPick {
                draft: log.id,
                seat: e.player,
                pick_number: e.pick_number,
                card: e.picked,
            });
        }
        if e.pool_before != pool {
            return Err(DataError::Inconsistent {
                draft: log.id,
                message: format!(
                    "seat {} pick {} has a pool that does not match earlier picks",
                    e.player, e.pick_number
                ),
            });
        }
        out.push(PickEvent { pool_before: pool.clone(), ..e.clone() });
        pool.add(e.picked);
    }
    Ok(out)
}

/// Pairs the picked card with every other card of the pack.
///
/// A pack of `k` distinct cards yields `k - 1` triplets; copies of the picked
/// card elsewhere in the pack carry no preference and are skipped.
pub fn generate_triplets(draft_id: u64, event: &PickEvent) -> Vec<TripletExample> {
    let anchor = Arc::new(event.pool_before.clone());
    triplets_with_anchor(draft_id, event, anchor)
}

pub(crate) fn triplets_with_anchor(draft_id: u64, event: &PickEvent, anchor: Arc<PlayerPool>) -> Vec<TripletExample> {
    event
        .pack
        .cards()
        .iter()
        .filter(|&&c| c != event.picked)
        .map(|&negative| TripletExample { draft_id, anchor: Arc::clone(&anchor), positive: event.picked, negative })
        .collect()
}

/// Which side of a [`DatasetSplit`] to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Partition {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: BTreeSet<u64>,
    pub test: BTreeSet<u64>,
    pub ratio: f64,
}

impl DatasetSplit {
    pub fn contains(&self, draft_id: u64, partition: Partition) -> bool {
        match partition {
            Partition::Train => self.train.contains(&draft_id),
            Partition::Test => self.test.contains(&draft_id),
        }
    }

    pub fn ids(&self, partition: Partition) -> &BTreeSet<u64> {
        match partition {
            Partition::Train => &self.train,
            Partition::Test => &self.test,
        }
    }
}

/// SplitMix64 finalizer over `(seed, id)`; stable across platforms and releases.
pub fn stable_hash(seed: u64, id: u64) -> u64 {
    let mut z = id ^ seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Splits whole drafts into train and test.
///
/// Drafts are ordered by a seeded hash of their id and the first
/// `round(ratio * n)` go to train, so the assignment depends only on
/// `(ids, ratio, seed)` and never on input order.
pub fn split_drafts(ids: &[u64], ratio: f64, seed: u64) -> Result<DatasetSplit, DataError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DataError::BadRatio(ratio));
    }
    let unique: BTreeSet<u64> = ids.iter().copied().collect();
    if unique.is_empty() {
        return Err(DataError::EmptyInput);
    }
    let mut ordered: Vec<u64> = unique.into_iter().collect();
    ordered.sort_by_key(|&id| (stable_hash(seed, id), id));
    let n_train = (ratio * ordered.len() as f64).round() as usize;
    let test = ordered.split_off(n_train);
    Ok(DatasetSplit { train: ordered.into_iter().collect(), test: test.into_iter().collect(), ratio })
}
