//! Synthetic card sets for desk-scale experiments.

use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::cardset::{Card, CardDatabase, CardId, Color, Colors, Rarity};
use crate::draftsim::DraftRng;

const PAIRS: [(Color, Color); 10] = [
    (Color::White, Color::Blue),
    (Color::Blue, Color::Black),
    (Color::Black, Color::Red),
    (Color::Red, Color::Green),
    (Color::Green, Color::White),
    (Color::White, Color::Black),
    (Color::Blue, Color::Red),
    (Color::Black, Color::Green),
    (Color::Red, Color::White),
    (Color::Green, Color::Blue),
];

/// Rarity group sizes `(common, uncommon, rare, mythic)` for an `n`-card set.
pub fn rarity_split(n: usize) -> (usize, usize, usize, usize) {
    let scaled = |num: usize| ((num * n) as f64 / 30.0).round().max(1.0) as usize;
    let mythic = scaled(1);
    let rare = scaled(4);
    let uncommon = scaled(7);
    (n.saturating_sub(mythic + rare + uncommon), uncommon, rare, mythic)
}

/// Builds an `n`-card set (n >= 4) with every rarity, mostly mono-colored
/// cards spread evenly over the five colors, a few two-color cards and a few
/// colorless ones. For n = 30: 18/7/4/1 by rarity, 25 mono, 3 gold, 2 colorless.
pub fn synthetic_database(n: usize, seed: u64) -> CardDatabase {
    assert!(n >= 4, "synthetic database needs at least 4 cards");
    let (common, uncommon, rare, mythic) = rarity_split(n);
    let colorless = (n / 15).max(1);
    let multi = (n / 10).max(1);
    let mono = n - colorless - multi;

    let mut palette: Vec<Colors> = Vec::with_capacity(n);
    palette.extend((0..mono).map(|i| Colors::single(Color::ALL[i % 5])));
    palette.extend((0..multi).map(|i| {
        let (a, b) = PAIRS[i % PAIRS.len()];
        Colors::single(a).with(b)
    }));
    palette.extend((0..colorless).map(|_| Colors::COLORLESS));
    let mut rng = DraftRng::seed_from_u64(seed);
    palette.shuffle(&mut rng);

    let rarities = std::iter::repeat_n(Rarity::Common, common)
        .chain(std::iter::repeat_n(Rarity::Uncommon, uncommon))
        .chain(std::iter::repeat_n(Rarity::Rare, rare))
        .chain(std::iter::repeat_n(Rarity::Mythic, mythic));

    let cards = rarities
        .zip(palette)
        .enumerate()
        .map(|(i, (rarity, colors))| {
            let label = match colors.len() {
                0 => "Colorless".to_string(),
                1 => format!("{:?}", colors.mono().expect("mono")),
                _ => colors.to_string(),
            };
            Card { id: CardId::from(i), name: format!("{label} {rarity} {i}"), colors, rarity }
        })
        .collect();
    CardDatabase::new(cards).expect("synthetic database is valid")
}
