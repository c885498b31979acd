use std::borrow::Cow;
use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::logfile::{DraftLogReader, DraftLogWriter};
use super::{
    extract_pick_events, stable_hash, triplets_with_anchor, DataError, DatasetSplit, Partition, TripletExample,
};
use crate::draftsim::DraftLog;

const SHARD_SALT: u64 = 0x5EED_0F5A_4D5C_0DE5;

/// Hash-based assignment of drafts to shards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShardSet {
    pub shard_count: usize,
}

impl ShardSet {
    /// Panics if `shard_count` is zero.
    pub fn new(shard_count: usize) -> Self {
        assert!(shard_count > 0, "shard_count must be positive");
        ShardSet { shard_count }
    }

    pub fn assign(&self, draft_id: u64) -> usize {
        (stable_hash(SHARD_SALT, draft_id) % self.shard_count as u64) as usize
    }
}

/// Anything that can hand out drafts shard by shard, each shard sorted by id.
pub trait DraftSource {
    fn shard_count(&self) -> usize;
    fn load_shard(&self, shard: usize) -> Result<Cow<'_, [DraftLog]>, DataError>;
}

#[derive(Debug, Clone)]
pub struct InMemoryShards {
    shards: Vec<Vec<DraftLog>>,
}

impl InMemoryShards {
    pub fn new(logs: impl IntoIterator<Item = DraftLog>, set: ShardSet) -> Self {
        let mut shards = vec![Vec::new(); set.shard_count];
        for log in logs {
            shards[set.assign(log.id)].push(log);
        }
        for s in &mut shards {
            s.sort_by_key(|l| l.id);
        }
        InMemoryShards { shards }
    }

    pub fn shard(&self, i: usize) -> &[DraftLog] {
        &self.shards[i]
    }

    pub fn all(&self) -> impl Iterator<Item = &DraftLog> {
        self.shards.iter().flatten()
    }
}

impl DraftSource for InMemoryShards {
    fn shard_count(&self) -> usize {
        self.shards.len()
    }

    fn load_shard(&self, shard: usize) -> Result<Cow<'_, [DraftLog]>, DataError> {
        self.shards
            .get(shard)
            .map(|s| Cow::Borrowed(s.as_slice()))
            .ok_or_else(|| DataError::MissingShard(format!("in-memory shard {shard}")))
    }
}

/// Shards stored as `shard-00000.jsonl`, ... draft-log files in one directory.
#[derive(Debug, Clone)]
pub struct ShardDir {
    dir: PathBuf,
    shard_count: usize,
    n_cards: usize,
}

impl ShardDir {
    pub fn open(dir: impl Into<PathBuf>, shard_count: usize, n_cards: usize) -> Self {
        ShardDir { dir: dir.into(), shard_count, n_cards }
    }

    pub fn shard_path(dir: &Path, shard: usize) -> PathBuf {
        dir.join(format!("shard-{shard:05}.jsonl"))
    }

    /// Writes every shard file (empty shards still get a header line).
    pub fn write<'a>(
        dir: impl Into<PathBuf>,
        logs: impl IntoIterator<Item = &'a DraftLog>,
        set: ShardSet,
        n_cards: usize,
    ) -> Result<Self, DataError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut buckets: Vec<Vec<&DraftLog>> = vec![Vec::new(); set.shard_count];
        for log in logs {
            buckets[set.assign(log.id)].push(log);
        }
        for (i, mut bucket) in buckets.into_iter().enumerate() {
            bucket.sort_by_key(|l| l.id);
            let mut w = DraftLogWriter::new(BufWriter::new(File::create(Self::shard_path(&dir, i))?))?;
            for log in bucket {
                w.write(log)?;
            }
            w.finish()?;
        }
        Ok(ShardDir { dir, shard_count: set.shard_count, n_cards })
    }
}

impl DraftSource for ShardDir {
    fn shard_count(&self) -> usize {
        self.shard_count
    }

    fn load_shard(&self, shard: usize) -> Result<Cow<'_, [DraftLog]>, DataError> {
        let path = Self::shard_path(&self.dir, shard);
        let file = File::open(&path).map_err(|_| DataError::MissingShard(path.display().to_string()))?;
        let mut logs: Vec<DraftLog> =
            DraftLogReader::new(BufReader::new(file), self.n_cards)?.collect::<Result<_, _>>()?;
        logs.sort_by_key(|l| l.id);
        Ok(Cow::Owned(logs))
    }
}

/// Triplets of one partition, shard by shard, stopping after `budget` shards.
pub struct TripletStream<'a> {
    source: &'a dyn DraftSource,
    split: &'a DatasetSplit,
    partition: Partition,
    next_shard: usize,
    end_shard: usize,
    queue: VecDeque<TripletExample>,
    failed: bool,
}

impl<'a> TripletStream<'a> {
    fn fill(&mut self) -> Result<(), DataError> {
        while self.queue.is_empty() && self.next_shard < self.end_shard {
            let logs = self.source.load_shard(self.next_shard)?;
            self.next_shard += 1;
            for log in logs.iter().filter(|l| self.split.contains(l.id, self.partition)) {
                for event in extract_pick_events(log)? {
                    let anchor = Arc::new(event.pool_before.clone());
                    self.queue.extend(triplets_with_anchor(log.id, &event, anchor));
                }
            }
        }
        Ok(())
    }

    /// Shards consumed so far.
    pub fn shards_read(&self) -> usize {
        self.next_shard
    }
}

impl Iterator for TripletStream<'_> {
    type Item = Result<TripletExample, DataError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        if let Err(e) = self.fill() {
            self.failed = true;
            return Some(Err(e));
        }
        self.queue.pop_front().map(Ok)
    }
}

/// Streams triplets from shards `0..budget` (clamped to the shard count).
pub fn stream_triplets<'a>(
    source: &'a dyn DraftSource,
    split: &'a DatasetSplit,
    partition: Partition,
    shard_budget: usize,
) -> TripletStream<'a> {
    TripletStream {
        source,
        split,
        partition,
        next_shard: 0,
        end_shard: shard_budget.min(source.shard_count()),
        queue: VecDeque::new(),
        failed: false,
    }
}
