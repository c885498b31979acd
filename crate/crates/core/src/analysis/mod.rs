//! Evaluation metrics and embedding analytics.

mod cluster;
mod report;
mod stats;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cardset::{CardDatabase, CardId};
use crate::cpr::CprError;
use crate::draftsim::{Agent, DraftRng, PickEvent};

pub use cluster::{color_cluster_purity, kmeans, project_2d, KMeansResult, Projection};
pub use report::{embedding_rows, write_card_stats_csv, write_embedding_csv, write_per_pick_csv, EmbeddingRow};
pub use stats::kendall_tau;
pub use sweep::{dimension_sweep, SweepRow, SweepSetup};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no events to evaluate")]
    NoEvents,
    #[error("agent {agent} ranking at pick {pick_number} is not a permutation of the pack")]
    BadRanking { agent: String, pick_number: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("k must be between 1 and the number of points ({points}), got {k}")]
    BadK { k: usize, points: usize },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error(transparent)]
    Cpr(#[from] CprError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Accuracy bucket for one pick ordinal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickBucket {
    pub pick_number: usize,
    pub count: usize,
    pub correct: usize,
}

impl PickBucket {
    /// `None` when no event had this ordinal.
    pub fn accuracy(&self) -> Option<f64> {
        (self.count > 0).then(|| self.correct as f64 / self.count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub agent: String,
    pub events: usize,
    /// Fraction of events where the agent's first choice is the recorded pick.
    pub mtta: f64,
    /// Mean 0-based position of the recorded pick in the agent's ranking.
    pub mtpd: f64,
    /// One bucket per pick ordinal, starting at 1.
    pub per_pick: Vec<PickBucket>,
}

impl EvaluationReport {
    pub fn per_pick_accuracy(&self) -> Vec<Option<f64>> {
        self.per_pick.iter().map(PickBucket::accuracy).collect()
    }

    /// Plain-text summary.
    pub fn table(&self) -> String {
        format!(
            "{:<12} {:>8} {:>8} {:>8}\n{:<12} {:>8} {:>8.4} {:>8.4}\n",
            "agent", "events", "MTTA", "MTPD", self.agent, self.events, self.mtta, self.mtpd
        )
    }
}

fn is_permutation(ranking: &[CardId], pack: &[CardId]) -> bool {
    if ranking.len() != pack.len() {
        return false;
    }
    let mut a = ranking.to_vec();
    let mut b = pack.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    a == b
}

/// Scores `agent` against the recorded picks of `events`.
pub fn evaluate_agent(
    agent: &dyn Agent,
    db: &CardDatabase,
    events: &[PickEvent],
    rng: &mut DraftRng,
) -> Result<EvaluationReport, AnalysisError> {
    if events.is_empty() {
        return Err(AnalysisError::NoEvents);
    }
    let max_pick = events.iter().map(|e| e.pick_number).max().unwrap_or(1);
    let mut per_pick: Vec<PickBucket> =
        (1..=max_pick).map(|pick_number| PickBucket { pick_number, count: 0, correct: 0 }).collect();
    let mut correct = 0usize;
    let mut rank_sum = 0usize;
    for e in events {
        let ranking = agent.rank(&e.pool_before, &e.pack, db, rng);
        let position = is_permutation(&ranking, e.pack.cards())
            .then(|| ranking.iter().position(|&c| c == e.picked))
            .flatten()
            .ok_or_else(|| AnalysisError::BadRanking { agent: agent.name().to_string(), pick_number: e.pick_number })?;
        let bucket = &mut per_pick[e.pick_number.max(1) - 1];
        bucket.count += 1;
        if position == 0 {
            correct += 1;
            bucket.correct += 1;
        }
        rank_sum += position;
    }
    let n = events.len() as f64;
    Ok(EvaluationReport {
        agent: agent.name().to_string(),
        events: events.len(),
        mtta: correct as f64 / n,
        mtpd: rank_sum as f64 / n,
        per_pick,
    })
}

/// Offer and choice counts for one card.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardCounts {
    pub times_offered: u64,
    pub times_chosen: u64,
    pub times_offered_first: u64,
    pub times_chosen_first: u64,
}

impl CardCounts {
    pub fn pick_rate(&self) -> Option<f64> {
        (self.times_offered > 0).then(|| self.times_chosen as f64 / self.times_offered as f64)
    }

    /// Rate over the very first pick of a draft (empty pool).
    pub fn first_pick_rate(&self) -> Option<f64> {
        (self.times_offered_first > 0).then(|| self.times_chosen_first as f64 / self.times_offered_first as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardStats {
    pub cards: Vec<CardCounts>,
}

/// Per-card pick counts. A card is counted as offered once per event whose
/// pack contains it.
pub fn card_stats(events: &[PickEvent], n_cards: usize) -> CardStats {
    let mut cards = vec![CardCounts::default(); n_cards];
    let mut seen = vec![false; n_cards];
    for e in events {
        let first = e.pick_number == 1;
        for &c in e.pack.cards() {
            if c.index() < n_cards && !seen[c.index()] {
                seen[c.index()] = true;
                cards[c.index()].times_offered += 1;
                if first {
                    cards[c.index()].times_offered_first += 1;
                }
            }
        }
        for &c in e.pack.cards() {
            if c.index() < n_cards {
                seen[c.index()] = false;
            }
        }
        if let Some(counts) = cards.get_mut(e.picked.index()) {
            counts.times_chosen += 1;
            if first {
                counts.times_chosen_first += 1;
            }
        }
    }
    CardStats { cards }
}
