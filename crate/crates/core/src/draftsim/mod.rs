//! Pack-passing draft simulator.
//!
//! Every seat opens a pack each round, picks one card, and passes the rest
//! to the next seat. Packs always travel in the same direction.

mod agents;
mod nnet;
mod oracle;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cardset::{CardDatabase, CardId, Rarity};

pub use agents::{RandomBot, RaredraftBot};
pub use nnet::NNetBot;
pub use oracle::{OracleBot, OracleUtility};

/// Random stream used by the simulator and by stochastic agents.
pub type DraftRng = rand_chacha::ChaCha8Rng;

#[derive(Debug, Error)]
pub enum DraftError {
    #[error("invalid draft config: {0}")]
    Config(String),
    #[error("expected {expected} agents, got {got}")]
    AgentCount { expected: usize, got: usize },
    #[error("seat {seat} picked card {card} at pick {pick_number}, which is not in its pack")]
    IllegalPick { seat: usize, pick_number: usize, card: CardId },
    #[error("database has no {0} cards")]
    MissingRarity(Rarity),
    #[error("card {0} is not in the database")]
    UnknownCard(CardId),
}

/// Cards currently offered to one seat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pack(pub Vec<CardId>);

impl Pack {
    pub fn new(cards: Vec<CardId>) -> Self {
        Pack(cards)
    }

    pub fn cards(&self) -> &[CardId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, card: CardId) -> bool {
        self.0.contains(&card)
    }

    /// Removes one copy of `card`; returns false if it was not present.
    pub fn take(&mut self, card: CardId) -> bool {
        match self.0.iter().position(|&c| c == card) {
            Some(i) => {
                self.0.remove(i);
                true
            }
            None => false,
        }
    }
}

impl From<Vec<CardId>> for Pack {
    fn from(cards: Vec<CardId>) -> Self {
        Pack(cards)
    }
}

/// Multiset of cards a player has picked so far (the context set).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlayerPool {
    counts: Vec<u32>,
    total: u32,
}

impl PlayerPool {
    pub fn new(n_cards: usize) -> Self {
        PlayerPool { counts: vec![0; n_cards], total: 0 }
    }

    pub fn from_cards(n_cards: usize, cards: impl IntoIterator<Item = CardId>) -> Self {
        let mut pool = Self::new(n_cards);
        for c in cards {
            pool.add(c);
        }
        pool
    }

    /// Panics if `card` is outside the pool's card range.
    pub fn add(&mut self, card: CardId) {
        self.counts[card.index()] += 1;
        self.total += 1;
    }

    pub fn count(&self, card: CardId) -> u32 {
        self.counts.get(card.index()).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of cards in the pool, counting multiplicity.
    pub fn total(&self) -> usize {
        self.total as usize
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn n_cards(&self) -> usize {
        self.counts.len()
    }

    /// Non-zero entries as `(card, count)` in id order.
    pub fn iter(&self) -> impl Iterator<Item = (CardId, u32)> + '_ {
        self.counts.iter().enumerate().filter(|(_, &n)| n > 0).map(|(i, &n)| (CardId::from(i), n))
    }

    /// Cards per color in the pool; a multicolored card counts once for each of its colors.
    pub fn color_histogram(&self, db: &CardDatabase) -> [u32; 5] {
        let mut hist = [0u32; 5];
        for (card, n) in self.iter() {
            if let Some(c) = db.get(card) {
                for color in c.colors.iter() {
                    hist[color.index()] += n;
                }
            }
        }
        hist
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftConfig {
    pub players: usize,
    pub rounds: usize,
    pub pack_size: usize,
    pub mythic_probability: f64,
    pub rng_seed: u64,
}

impl Default for DraftConfig {
    fn default() -> Self {
        DraftConfig { players: 8, rounds: 3, pack_size: 15, mythic_probability: 0.125, rng_seed: 0 }
    }
}

impl DraftConfig {
    pub fn validate(&self) -> Result<(), DraftError> {
        if self.players < 2 {
            return Err(DraftError::Config(format!("players must be >= 2, got {}", self.players)));
        }
        if self.rounds < 1 {
            return Err(DraftError::Config("rounds must be >= 1".into()));
        }
        if self.pack_size < 1 {
            return Err(DraftError::Config("pack_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.mythic_probability) {
            return Err(DraftError::Config(format!(
                "mythic_probability must lie in [0, 1], got {}",
                self.mythic_probability
            )));
        }
        Ok(())
    }

    /// Picks each player makes over the whole draft.
    pub fn picks_per_player(&self) -> usize {
        self.rounds * self.pack_size
    }

    pub fn total_events(&self) -> usize {
        self.players * self.picks_per_player()
    }

    /// Pack length seen at a 1-based overall pick ordinal.
    pub fn pack_len_at(&self, pick_number: usize) -> usize {
        self.pack_size - (pick_number - 1) % self.pack_size
    }

    /// Slot counts `(common, uncommon, rare)` for a fresh pack.
    ///
    /// A 15-card pack yields 11/3/1; smaller packs keep the rare slot first,
    /// then up to three uncommons.
    pub fn rarity_slots(&self) -> (usize, usize, usize) {
        let rare = self.pack_size.min(1);
        let uncommon = (self.pack_size - rare).min(3);
        (self.pack_size - rare - uncommon, uncommon, rare)
    }
}

/// One pick decision, with the picker's pool as it stood before the pick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickEvent {
    pub player: usize,
    pub round: usize,
    /// 1-based ordinal over the player's whole draft.
    pub pick_number: usize,
    pub pool_before: PlayerPool,
    pub pack: Pack,
    pub picked: CardId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftLog {
    pub id: u64,
    pub config: DraftConfig,
    /// Agent name per seat.
    pub seats: Vec<String>,
    /// Ordered by pick number, then seat.
    pub events: Vec<PickEvent>,
}

impl DraftLog {
    /// Each seat's final pool.
    pub fn final_pools(&self, n_cards: usize) -> Vec<PlayerPool> {
        let mut pools = vec![PlayerPool::new(n_cards); self.config.players];
        for e in &self.events {
            pools[e.player].add(e.picked);
        }
        pools
    }
}

/// A drafting policy.
///
/// `rank` orders every card of the pack best-first; `pick` is its head.
pub trait Agent: Send + Sync {
    fn name(&self) -> &str;

    fn rank(&self, pool: &PlayerPool, pack: &Pack, db: &CardDatabase, rng: &mut DraftRng) -> Vec<CardId>;

    fn pick(&self, pool: &PlayerPool, pack: &Pack, db: &CardDatabase, rng: &mut DraftRng) -> CardId {
        self.rank(pool, pack, db, rng)[0]
    }
}

impl<A: Agent + ?Sized> Agent for std::sync::Arc<A> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn rank(&self, pool: &PlayerPool, pack: &Pack, db: &CardDatabase, rng: &mut DraftRng) -> Vec<CardId> {
        (**self).rank(pool, pack, db, rng)
    }

    fn pick(&self, pool: &PlayerPool, pack: &Pack, db: &CardDatabase, rng: &mut DraftRng) -> CardId {
        (**self).pick(pool, pack, db, rng)
    }
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn rank(&self, pool: &PlayerPool, pack: &Pack, db: &CardDatabase, rng: &mut DraftRng) -> Vec<CardId> {
        (**self).rank(pool, pack, db, rng)
    }

    fn pick(&self, pool: &PlayerPool, pack: &Pack, db: &CardDatabase, rng: &mut DraftRng) -> CardId {
        (**self).pick(pool, pack, db, rng)
    }
}

fn draw_slots(group: &[CardId], count: usize, rng: &mut impl Rng, out: &mut Vec<CardId>) {
    if count <= group.len() {
        out.extend(group.choose_multiple(rng, count).copied());
    } else {
        out.extend((0..count).map(|_| group[rng.gen_range(0..group.len())]));
    }
}

/// Builds one fresh pack: commons, then uncommons, then the rare-or-mythic slot.
pub fn generate_pack(db: &CardDatabase, config: &DraftConfig, rng: &mut impl Rng) -> Result<Pack, DraftError> {
    let group = |r: Rarity| {
        let ids = db.ids_with_rarity(r);
        if ids.is_empty() {
            Err(DraftError::MissingRarity(r))
        } else {
            Ok(ids)
        }
    };
    let (n_common, n_uncommon, n_rare) = config.rarity_slots();
    let mut cards = Vec::with_capacity(config.pack_size);
    if n_common > 0 {
        draw_slots(&group(Rarity::Common)?, n_common, rng, &mut cards);
    }
    if n_uncommon > 0 {
        draw_slots(&group(Rarity::Uncommon)?, n_uncommon, rng, &mut cards);
    }
    for _ in 0..n_rare {
        let rarity = if rng.gen_bool(config.mythic_probability) { Rarity::Mythic } else { Rarity::Rare };
        draw_slots(&group(rarity)?, 1, rng, &mut cards);
    }
    Ok(Pack(cards))
}

/// Simulates a complete draft with one agent per seat.
pub fn run_draft<A: Agent>(
    id: u64,
    agents: &[A],
    config: &DraftConfig,
    db: &CardDatabase,
    rng: &mut DraftRng,
) -> Result<DraftLog, DraftError> {
    config.validate()?;
    if agents.len() != config.players {
        return Err(DraftError::AgentCount { expected: config.players, got: agents.len() });
    }
    let players = config.players;
    let mut pools = vec![PlayerPool::new(db.len()); players];
    let mut events = Vec::with_capacity(config.total_events());

    for round in 0..config.rounds {
        // packs[s] is the pack currently in front of seat s
        let mut packs = (0..players).map(|_| generate_pack(db, config, rng)).collect::<Result<Vec<_>, _>>()?;
        for step in 0..config.pack_size {
            let pick_number = round * config.pack_size + step + 1;
            for seat in 0..players {
                let pack = &mut packs[seat];
                let picked = agents[seat].pick(&pools[seat], pack, db, rng);
                let offered = pack.clone();
                if !pack.take(picked) {
                    return Err(DraftError::IllegalPick { seat, pick_number, card: picked });
                }
                events.push(PickEvent {
                    player: seat,
                    round,
                    pick_number,
                    pool_before: pools[seat].clone(),
                    pack: offered,
                    picked,
                });
                pools[seat].add(picked);
            }
            // seat s hands its pack to seat s + 1
            packs.rotate_right(1);
        }
    }

    Ok(DraftLog { id, config: config.clone(), seats: agents.iter().map(|a| a.name().to_string()).collect(), events })
}
