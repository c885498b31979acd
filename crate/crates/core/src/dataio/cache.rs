//! Binary triplet cache.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "CPRTRIP\0" | version u32 | n_cards u32 | count u64
//! count × { draft_id u64 | runs u32 | runs × (value u32, length u32) | positive u32 | negative u32 }
//! ```
//!
//! The anchor is stored as a run-length encoding of its `n_cards` counts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{DataError, TripletExample};
use crate::cardset::CardId;
use crate::draftsim::PlayerPool;

const MAGIC: &[u8; 8] = b"CPRTRIP\0";
const VERSION: u32 = 1;

fn run_length(counts: &[u32]) -> Vec<(u32, u32)> {
    let mut runs: Vec<(u32, u32)> = Vec::new();
    for &c in counts {
        match runs.last_mut() {
            Some((v, len)) if *v == c => *len += 1,
            _ => runs.push((c, 1)),
        }
    }
    runs
}

pub fn write_triplet_cache<'a>(
    path: impl AsRef<Path>,
    n_cards: usize,
    triplets: impl ExactSizeIterator<Item = &'a TripletExample>,
) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(n_cards as u32).to_le_bytes())?;
    w.write_all(&(triplets.len() as u64).to_le_bytes())?;
    for t in triplets {
        if t.anchor.n_cards() != n_cards {
            return Err(DataError::Format(format!("anchor has {} cards, cache has {n_cards}", t.anchor.n_cards())));
        }
        w.write_all(&t.draft_id.to_le_bytes())?;
        let runs = run_length(t.anchor.counts());
        w.write_all(&(runs.len() as u32).to_le_bytes())?;
        for (value, len) in runs {
            w.write_all(&value.to_le_bytes())?;
            w.write_all(&len.to_le_bytes())?;
        }
        w.write_all(&t.positive.0.to_le_bytes())?;
        w.write_all(&t.negative.0.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads a cache written by [`write_triplet_cache`]; returns `(n_cards, triplets)`.
pub fn read_triplet_cache(path: impl AsRef<Path>) -> Result<(usize, Vec<TripletExample>), DataError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DataError::Format("not a triplet cache".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(DataError::Format(format!("unsupported triplet cache version {version}")));
    }
    let n_cards = read_u32(&mut r)? as usize;
    let count = read_u64(&mut r)?;
    let mut out = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut last_anchor: Option<Arc<PlayerPool>> = None;
    for _ in 0..count {
        let draft_id = read_u64(&mut r)?;
        let n_runs = read_u32(&mut r)?;
        let mut counts = Vec::with_capacity(n_cards);
        for _ in 0..n_runs {
            let value = read_u32(&mut r)?;
            let len = read_u32(&mut r)?;
            counts.extend(std::iter::repeat_n(value, len as usize));
        }
        if counts.len() != n_cards {
            return Err(DataError::Format(format!("anchor decodes to {} counts, expected {n_cards}", counts.len())));
        }
        let pool = PlayerPool::from_cards(
            n_cards,
            counts.iter().enumerate().flat_map(|(i, &n)| std::iter::repeat_n(CardId::from(i), n as usize)),
        );
        // consecutive triplets from one pick share their anchor
        let anchor = match &last_anchor {
            Some(a) if **a == pool => Arc::clone(a),
            _ => Arc::new(pool),
        };
        last_anchor = Some(Arc::clone(&anchor));
        let positive = CardId(read_u32(&mut r)?);
        let negative = CardId(read_u32(&mut r)?);
        out.push(TripletExample { draft_id, anchor, positive, negative });
    }
    Ok((n_cards, out))
}
