use std::cmp::Reverse;

use rand::seq::SliceRandom;

use super::{Agent, DraftRng, Pack, PlayerPool};
use crate::cardset::{CardDatabase, CardId};

/// Uniformly random picks.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomBot;

impl Agent for RandomBot {
    fn name(&self) -> &str {
        "random"
    }

    fn rank(&self, _pool: &PlayerPool, pack: &Pack, _db: &CardDatabase, rng: &mut DraftRng) -> Vec<CardId> {
        let mut order = pack.cards().to_vec();
        order.shuffle(rng);
        order
    }
}

/// Rarity-first heuristic.
///
/// Orders by rarity (mythic first), then by how many pool cards share a color
/// with the candidate, then by lowest id.
#[derive(Debug, Clone, Copy, Default)]
pub struct RaredraftBot;

impl RaredraftBot {
    fn color_overlap(hist: &[u32; 5], db: &CardDatabase, card: CardId) -> u32 {
        db.card(card).colors.iter().map(|c| hist[c.index()]).sum()
    }
}

impl Agent for RaredraftBot {
    fn name(&self) -> &str {
        "raredraft"
    }

    fn rank(&self, pool: &PlayerPool, pack: &Pack, db: &CardDatabase, _rng: &mut DraftRng) -> Vec<CardId> {
        let hist = pool.color_histogram(db);
        let mut order = pack.cards().to_vec();
        order.sort_by_key(|&c| (Reverse(db.card(c).rarity), Reverse(Self::color_overlap(&hist, db, c)), c));
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cardset::{Card, Colors, Rarity};
    use rand::SeedableRng;

    fn card(id: u32, colors: &str, rarity: Rarity) -> Card {
        Card { id: CardId(id), name: format!("c{id}"), colors: colors.parse::<Colors>().unwrap(), rarity }
    }

    fn db() -> CardDatabase {
        CardDatabase::new(vec![
            card(0, "R", Rarity::Common),
            card(1, "U", Rarity::Common),
            card(2, "R", Rarity::Common),
            card(3, "", Rarity::Common),
            card(4, "G", Rarity::Uncommon),
            card(5, "W", Rarity::Rare),
            card(6, "B", Rarity::Mythic),
            card(7, "U", Rarity::Common),
            card(8, "U", Rarity::Common),
            card(9, "", Rarity::Common),
        ])
        .unwrap()
    }

    #[test]
    fn random_single_card_pack() {
        let mut rng = DraftRng::seed_from_u64(0);
        let pool = PlayerPool::new(10);
        assert_eq!(RandomBot.pick(&pool, &Pack(vec![CardId(4)]), &db(), &mut rng), CardId(4));
    }

    #[test]
    fn random_is_uniform() {
        let mut rng = DraftRng::seed_from_u64(1);
        let db = db();
        let pool = PlayerPool::new(10);
        let pack = Pack(vec![CardId(0), CardId(1), CardId(2), CardId(3)]);
        let mut hits = [0usize; 4];
        for _ in 0..10_000 {
            hits[RandomBot.pick(&pool, &pack, &db, &mut rng).index()] += 1;
        }
        for h in hits {
            let f = h as f64 / 10_000.0;
            assert!((f - 0.25).abs() < 0.02, "frequency {f}");
        }
    }

    #[test]
    fn raredraft_takes_mythic() {
        let mut rng = DraftRng::seed_from_u64(0);
        let db = db();
        let pool = PlayerPool::from_cards(10, [CardId(0), CardId(0), CardId(2)]);
        let pack = Pack(vec![CardId(0), CardId(4), CardId(6), CardId(5)]);
        assert_eq!(RaredraftBot.pick(&pool, &pack, &db, &mut rng), CardId(6));
        assert_eq!(RaredraftBot.rank(&pool, &pack, &db, &mut rng), vec![CardId(6), CardId(5), CardId(4), CardId(0)]);
    }

    #[test]
    fn raredraft_color_tie_break() {
        let mut rng = DraftRng::seed_from_u64(0);
        let db = db();
        let red_pool = PlayerPool::from_cards(10, [CardId(0), CardId(2)]);
        let pack = Pack(vec![CardId(1), CardId(2)]);
        assert_eq!(RaredraftBot.pick(&red_pool, &pack, &db, &mut rng), CardId(2));
    }

    #[test]
    fn raredraft_id_tie_break() {
        let mut rng = DraftRng::seed_from_u64(0);
        let db = db();
        let pack = Pack(vec![CardId(9), CardId(3)]);
        assert_eq!(RaredraftBot.pick(&PlayerPool::new(10), &pack, &db, &mut rng), CardId(3));
    }
}
