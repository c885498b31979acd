//! Synthetic ground-truth drafter with a known utility.
//!
//! The utility of adding card `c` to pool `C` is
//! `base[c] + synergy(colors(c), C)`, where the synergy term rewards cards
//! whose colors already dominate the pool and vanishes for an empty pool.

use std::cmp::Ordering;

use rand::Rng;
use rand_distr::{Distribution, Gumbel};
use serde::{Deserialize, Serialize};

use super::{Agent, DraftRng, Pack, PlayerPool};
use crate::cardset::{CardDatabase, CardId, Colors, Rarity};

/// Fit assigned to colorless cards once the pool is nonempty.
const COLORLESS_FIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleUtility {
    /// Context-free strength per card.
    pub base: Vec<f64>,
    /// Synergy weight per color, indexed by `Color::index`.
    pub synergy: [f64; 5],
}

impl OracleUtility {
    /// Draws a utility for `db`: strength rises with rarity on average, with
    /// wide spread inside each rarity.
    pub fn random(db: &CardDatabase, synergy_scale: f64, rng: &mut impl Rng) -> Self {
        let base = db
            .cards()
            .iter()
            .map(|c| {
                let bonus = match c.rarity {
                    Rarity::Common => 0.0,
                    Rarity::Uncommon => 0.15,
                    Rarity::Rare => 0.3,
                    Rarity::Mythic => 0.4,
                };
                bonus + rng.gen::<f64>()
            })
            .collect();
        let mut synergy = [0.0; 5];
        for w in &mut synergy {
            *w = synergy_scale * rng.gen_range(0.8..1.2);
        }
        OracleUtility { base, synergy }
    }

    fn mean_weight(&self) -> f64 {
        self.synergy.iter().sum::<f64>() / 5.0
    }

    /// Color-fit bonus of a card with `colors` against a pool color histogram.
    pub fn synergy_term(&self, colors: Colors, hist: &[u32; 5], pool_size: usize) -> f64 {
        if pool_size == 0 {
            return 0.0;
        }
        let fit = |c: crate::cardset::Color| hist[c.index()] as f64 / pool_size as f64;
        match colors.len() {
            0 => self.mean_weight() * COLORLESS_FIT,
            1 => {
                let c = colors.mono().expect("one color");
                self.synergy[c.index()] * fit(c)
            }
            _ => {
                let weight = colors.iter().map(|c| self.synergy[c.index()]).sum::<f64>() / colors.len() as f64;
                weight * colors.iter().map(fit).fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn score(&self, card: CardId, hist: &[u32; 5], pool_size: usize, db: &CardDatabase) -> f64 {
        self.base[card.index()] + self.synergy_term(db.card(card).colors, hist, pool_size)
    }

    /// Noise-free ranking, highest utility first, lowest id on ties.
    pub fn rank(&self, pool: &PlayerPool, pack: &Pack, db: &CardDatabase) -> Vec<CardId> {
        let hist = pool.color_histogram(db);
        let mut scored: Vec<(f64, CardId)> =
            pack.cards().iter().map(|&c| (self.score(c, &hist, pool.total(), db), c)).collect();
        sort_desc(&mut scored);
        scored.into_iter().map(|(_, c)| c).collect()
    }
}

fn sort_desc(scored: &mut [(f64, CardId)]) {
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
}

/// Picks by oracle utility plus Gumbel noise of scale `noise`.
#[derive(Debug, Clone)]
pub struct OracleBot {
    pub utility: OracleUtility,
    pub noise: f64,
}

impl OracleBot {
    pub fn new(utility: OracleUtility, noise: f64) -> Self {
        OracleBot { utility, noise }
    }
}

impl Agent for OracleBot {
    fn name(&self) -> &str {
        "oracle"
    }

    fn rank(&self, pool: &PlayerPool, pack: &Pack, db: &CardDatabase, rng: &mut DraftRng) -> Vec<CardId> {
        if self.noise <= 0.0 {
            return self.utility.rank(pool, pack, db);
        }
        let gumbel = Gumbel::new(0.0, self.noise).expect("positive scale");
        let hist = pool.color_histogram(db);
        let mut scored: Vec<(f64, CardId)> = pack
            .cards()
            .iter()
            .map(|&c| (self.utility.score(c, &hist, pool.total(), db) + gumbel.sample(rng), c))
            .collect();
        sort_desc(&mut scored);
        scored.into_iter().map(|(_, c)| c).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::draftsim::{run_draft, DraftConfig};
    use crate::synth::synthetic_database;
    use rand::SeedableRng;

    fn setup() -> (CardDatabase, OracleUtility) {
        let db = synthetic_database(30, 1);
        let mut rng = DraftRng::seed_from_u64(9);
        let utility = OracleUtility::random(&db, 1.5, &mut rng);
        (db, utility)
    }

    #[test]
    fn deterministic_argmax() {
        let (db, utility) = setup();
        let mut rng = DraftRng::seed_from_u64(0);
        let bot = OracleBot::new(utility.clone(), 0.0);
        let pool = PlayerPool::from_cards(db.len(), [CardId(0), CardId(5)]);
        let pack = Pack(vec![CardId(1), CardId(2), CardId(3), CardId(4)]);
        let hist = pool.color_histogram(&db);
        let best = *pack
            .cards()
            .iter()
            .max_by(|a, b| utility.score(**a, &hist, 2, &db).partial_cmp(&utility.score(**b, &hist, 2, &db)).unwrap())
            .unwrap();
        assert_eq!(bot.pick(&pool, &pack, &db, &mut rng), best);
    }

    #[test]
    fn empty_pool_picks_strongest_base() {
        let (db, utility) = setup();
        let mut rng = DraftRng::seed_from_u64(0);
        let bot = OracleBot::new(utility.clone(), 0.0);
        let pack = Pack((0..db.len()).map(CardId::from).collect());
        let strongest = (0..db.len()).max_by(|&a, &b| utility.base[a].partial_cmp(&utility.base[b]).unwrap()).unwrap();
        assert_eq!(bot.pick(&PlayerPool::new(db.len()), &pack, &db, &mut rng), CardId::from(strongest));
    }

    #[test]
    fn replay_of_own_log_is_exact_without_noise() {
        let (db, utility) = setup();
        let mut rng = DraftRng::seed_from_u64(3);
        let bot = OracleBot::new(utility, 0.0);
        let agents = vec![bot.clone(); 8];
        let log = run_draft(0, &agents, &DraftConfig::default(), &db, &mut rng).unwrap();
        for e in &log.events {
            assert_eq!(bot.pick(&e.pool_before, &e.pack, &db, &mut rng), e.picked);
        }
    }

    #[test]
    fn synergy_prefers_pool_colors() {
        let (db, utility) = setup();
        let red: Vec<CardId> =
            db.cards().iter().filter(|c| c.colors.mono() == Some(crate::cardset::Color::Red)).map(|c| c.id).collect();
        let pool = PlayerPool::from_cards(db.len(), red.iter().copied());
        let hist = pool.color_histogram(&db);
        let red_bonus = utility.synergy_term(db.card(red[0]).colors, &hist, pool.total());
        let blue = db.cards().iter().find(|c| c.colors.mono() == Some(crate::cardset::Color::Blue)).unwrap();
        assert!(red_bonus > 1.0);
        assert_eq!(utility.synergy_term(blue.colors, &hist, pool.total()), 0.0);
        assert_eq!(utility.synergy_term(blue.colors, &[0; 5], 0), 0.0);
    }
}
