//! Card identities and the card database.
//!
//! The database fixes the input dimensionality `N` of every encoder: each
//! card owns one coordinate, identified by its [`CardId`].

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Current on-disk card database version, written as a leading comment line.
pub const FORMAT_VERSION: u32 = 1;
const VERSION_PREFIX: &str = "# cprdraft card database v";
const HEADER: [&str; 4] = ["id", "name", "colors", "rarity"];

#[derive(Debug, Error)]
pub enum CardsetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("empty database")]
    Empty,
    #[error("duplicate card id {0}")]
    DuplicateId(usize),
    #[error("duplicate card name {0:?}")]
    DuplicateName(String),
    #[error("card ids must be exactly 0..{n}; id {missing} is missing")]
    NonContiguous { n: usize, missing: usize },
    #[error("database has no {0} cards")]
    MissingRarity(Rarity),
    #[error("unsupported card database version {0}")]
    Version(u32),
}

/// Index of a card in its database, in `[0, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CardId(pub u32);

impl CardId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for CardId {
    fn from(i: usize) -> Self {
        CardId(i as u32)
    }
}

impl fmt::Display for CardId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Color {
    White,
    Blue,
    Black,
    Red,
    Green,
}

impl Color {
    pub const ALL: [Color; 5] = [Color::White, Color::Blue, Color::Black, Color::Red, Color::Green];

    pub fn letter(self) -> char {
        match self {
            Color::White => 'W',
            Color::Blue => 'U',
            Color::Black => 'B',
            Color::Red => 'R',
            Color::Green => 'G',
        }
    }

    pub fn from_letter(c: char) -> Option<Color> {
        match c {
            'W' => Some(Color::White),
            'U' => Some(Color::Blue),
            'B' => Some(Color::Black),
            'R' => Some(Color::Red),
            'G' => Some(Color::Green),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A subset of the five colors, stored as a bitmask.
///
/// Empty means colorless; two or more colors means multicolored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Colors(u8);

impl Colors {
    pub const COLORLESS: Colors = Colors(0);

    pub fn single(color: Color) -> Self {
        Colors(1 << color.index())
    }

    pub fn with(self, color: Color) -> Self {
        Colors(self.0 | (1 << color.index()))
    }

    pub fn contains(self, color: Color) -> bool {
        self.0 & (1 << color.index()) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Color> {
        Color::ALL.into_iter().filter(move |c| self.contains(*c))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_colorless(self) -> bool {
        self.0 == 0
    }

    pub fn is_multicolored(self) -> bool {
        self.len() >= 2
    }

    /// The single color of a mono-colored card.
    pub fn mono(self) -> Option<Color> {
        if self.len() == 1 {
            self.iter().next()
        } else {
            None
        }
    }
}

impl FromIterator<Color> for Colors {
    fn from_iter<I: IntoIterator<Item = Color>>(iter: I) -> Self {
        iter.into_iter().fold(Colors::COLORLESS, Colors::with)
    }
}

impl fmt::Display for Colors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.iter() {
            write!(f, "{}", c.letter())?;
        }
        Ok(())
    }
}

impl FromStr for Colors {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut colors = Colors::COLORLESS;
        for ch in s.trim().chars() {
            let color = Color::from_letter(ch).ok_or_else(|| format!("unknown color token {ch:?}"))?;
            colors = colors.with(color);
        }
        Ok(colors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rarity {
    Common,
    Uncommon,
    Rare,
    Mythic,
}

impl Rarity {
    pub const ALL: [Rarity; 4] = [Rarity::Common, Rarity::Uncommon, Rarity::Rare, Rarity::Mythic];

    pub fn as_str(self) -> &'static str {
        match self {
            Rarity::Common => "common",
            Rarity::Uncommon => "uncommon",
            Rarity::Rare => "rare",
            Rarity::Mythic => "mythic",
        }
    }
}

impl fmt::Display for Rarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "common" => Ok(Rarity::Common),
            "uncommon" => Ok(Rarity::Uncommon),
            "rare" => Ok(Rarity::Rare),
            "mythic" => Ok(Rarity::Mythic),
            other => Err(format!("unknown rarity token {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Card {
    pub id: CardId,
    pub name: String,
    pub colors: Colors,
    pub rarity: Rarity,
}

/// Validated, immutable set of cards with ids `0..N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardDatabase {
    cards: Vec<Card>,
    fingerprint: String,
}

impl CardDatabase {
    /// Validates `cards` (any order) and sorts them by id.
    pub fn new(mut cards: Vec<Card>) -> Result<Self, CardsetError> {
        if cards.is_empty() {
            return Err(CardsetError::Empty);
        }
        cards.sort_by_key(|c| c.id);
        let mut names = HashSet::new();
        for pair in cards.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(CardsetError::DuplicateId(pair[0].id.index()));
            }
        }
        for (expected, card) in cards.iter().enumerate() {
            if card.id.index() != expected {
                return Err(CardsetError::NonContiguous { n: cards.len(), missing: expected });
            }
            if !names.insert(card.name.as_str()) {
                return Err(CardsetError::DuplicateName(card.name.clone()));
            }
        }
        for rarity in Rarity::ALL {
            if !cards.iter().any(|c| c.rarity == rarity) {
                return Err(CardsetError::MissingRarity(rarity));
            }
        }
        let fingerprint = Self::compute_fingerprint(&cards);
        Ok(CardDatabase { cards, fingerprint })
    }

    /// Number of cards, the encoder input dimension.
    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn cards(&self) -> &[Card] {
        &self.cards
    }

    pub fn get(&self, id: CardId) -> Option<&Card> {
        self.cards.get(id.index())
    }

    /// Panics if `id` is out of range.
    pub fn card(&self, id: CardId) -> &Card {
        &self.cards[id.index()]
    }

    pub fn contains(&self, id: CardId) -> bool {
        id.index() < self.cards.len()
    }

    pub fn ids_with_rarity(&self, rarity: Rarity) -> Vec<CardId> {
        self.cards.iter().filter(|c| c.rarity == rarity).map(|c| c.id).collect()
    }

    pub fn by_name(&self, name: &str) -> Option<&Card> {
        self.cards.iter().find(|c| c.name == name)
    }

    /// Hex digest binding models to this exact card list.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn compute_fingerprint(cards: &[Card]) -> String {
        let mut hasher = Sha256::new();
        for c in cards {
            hasher.update(format!("{},{},{},{}\n", c.id, c.name, c.colors, c.rarity).as_bytes());
        }
        let digest = hasher.finalize();
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CardsetError> {
        let file = std::fs::File::open(path)?;
        Self::read(file)
    }

    pub fn read(reader: impl Read) -> Result<Self, CardsetError> {
        let mut reader = BufReader::new(reader);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let mut line_offset = 1;
        let rest: Box<dyn Read> = if let Some(v) = first.trim_end().strip_prefix(VERSION_PREFIX) {
            let version: u32 = v.trim().parse().map_err(|_| CardsetError::Parse {
                line: 1,
                message: format!("bad version line {:?}", first.trim_end()),
            })?;
            if version != FORMAT_VERSION {
                return Err(CardsetError::Version(version));
            }
            line_offset = 2;
            Box::new(reader)
        } else {
            Box::new(std::io::Cursor::new(first.into_bytes()).chain(reader))
        };

        let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(rest);
        let headers =
            csv.headers().map_err(|e| CardsetError::Parse { line: line_offset, message: e.to_string() })?.clone();
        if headers.iter().collect::<Vec<_>>() != HEADER {
            return Err(CardsetError::Parse {
                line: line_offset,
                message: format!(
                    "expected header {:?}, found {:?}",
                    HEADER.join(","),
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }

        let mut cards = Vec::new();
        for record in csv.records() {
            let record = record.map_err(|e| CardsetError::Parse {
                line: e.position().map(|p| p.line() + line_offset - 1).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0) + line_offset - 1;
            let bad = |message: String| CardsetError::Parse { line, message };
            if record.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", record.len())));
            }
            let id: u32 = record[0].parse().map_err(|_| bad(format!("bad card id {:?}", &record[0])))?;
            let colors: Colors = record[2].parse().map_err(bad)?;
            let rarity: Rarity = record[3].parse().map_err(bad)?;
            cards.push(Card { id: CardId(id), name: record[1].to_string(), colors, rarity });
        }
        Self::new(cards)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CardsetError> {
        let file = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn write(&self, mut writer: impl Write) -> Result<(), CardsetError> {
        writeln!(writer, "{VERSION_PREFIX}{FORMAT_VERSION}")?;
        let mut csv = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| CardsetError::Io(std::io::Error::other(e));
        csv.write_record(HEADER).map_err(io)?;
        for c in &self.cards {
            csv.write_record([c.id.to_string(), c.name.clone(), c.colors.to_string(), c.rarity.to_string()])
                .map_err(io)?;
        }
        csv.flush()?;
        Ok(())
    }
}
