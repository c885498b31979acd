//! Line-delimited draft-log files.
//!
//! The first line is a [`LogHeader`]; every following line is one
//! [`DraftRecord`]. Field names are documented in `docs/formats.md`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::cardset::CardId;
use crate::draftsim::{DraftConfig, DraftLog, Pack, PickEvent, PlayerPool};

pub const LOG_FORMAT: &str = "cprdraft-draftlog";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
}

impl Default for LogHeader {
    fn default() -> Self {
        LogHeader { format: LOG_FORMAT.to_string(), version: LOG_VERSION }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub pack: Vec<CardId>,
    pub picked: CardId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeatRecord {
    pub agent: String,
    pub events: Vec<EventRecord>,
}

/// On-disk form of one draft: per seat, the packs it saw and what it took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftRecord {
    pub id: u64,
    pub config: DraftConfig,
    pub seats: Vec<SeatRecord>,
}

impl DraftRecord {
    pub fn from_log(log: &DraftLog) -> Self {
        let mut seats: Vec<SeatRecord> =
            log.seats.iter().map(|agent| SeatRecord { agent: agent.clone(), events: Vec::new() }).collect();
        let mut events: Vec<&PickEvent> = log.events.iter().collect();
        events.sort_by_key(|e| (e.player, e.pick_number));
        for e in events {
            seats[e.player].events.push(EventRecord { pack: e.pack.cards().to_vec(), picked: e.picked });
        }
        DraftRecord { id: log.id, config: log.config.clone(), seats }
    }

    /// Rebuilds the in-memory log, validating card ids, pack sizes and picks.
    pub fn into_log(self, n_cards: usize) -> Result<DraftLog, DataError> {
        let id = self.id;
        let config = self.config;
        if self.seats.len() != config.players {
            return Err(DataError::Inconsistent {
                draft: id,
                message: format!("config has {} players but {} seats are recorded", config.players, self.seats.len()),
            });
        }
        let picks = config.picks_per_player();
        let mut events = Vec::with_capacity(config.total_events());
        let mut seat_names = Vec::with_capacity(self.seats.len());
        for (seat, record) in self.seats.into_iter().enumerate() {
            if record.events.len() != picks {
                return Err(DataError::Inconsistent {
                    draft: id,
                    message: format!("seat {seat} has {} picks, expected {picks}", record.events.len()),
                });
            }
            let mut pool = PlayerPool::new(n_cards);
            for (i, ev) in record.events.into_iter().enumerate() {
                let pick_number = i + 1;
                if let Some(&card) = ev.pack.iter().chain(std::iter::once(&ev.picked)).find(|c| c.index() >= n_cards) {
                    return Err(DataError::UnknownCard { draft: id, card, n_cards });
                }
                if ev.pack.len() != config.pack_len_at(pick_number) {
                    return Err(DataError::Inconsistent {
                        draft: id,
                        message: format!(
                            "seat {seat} pick {pick_number} has a pack of {}, expected {}",
                            ev.pack.len(),
                            config.pack_len_at(pick_number)
                        ),
                    });
                }
                if !ev.pack.contains(&ev.picked) {
                    return Err(DataError::IllegalPick { draft: id, seat, pick_number, card: ev.picked });
                }
                events.push(PickEvent {
                    player: seat,
                    round: i / config.pack_size,
                    pick_number,
                    pool_before: pool.clone(),
                    pack: Pack(ev.pack),
                    picked: ev.picked,
                });
                pool.add(ev.picked);
            }
            seat_names.push(record.agent);
        }
        events.sort_by_key(|e| (e.pick_number, e.player));
        Ok(DraftLog { id, config, seats: seat_names, events })
    }
}

pub struct DraftLogWriter<W: Write> {
    inner: W,
}

impl<W: Write> DraftLogWriter<W> {
    pub fn new(mut inner: W) -> Result<Self, DataError> {
        serde_json::to_writer(&mut inner, &LogHeader::default()).map_err(std::io::Error::from)?;
        inner.write_all(b"\n")?;
        Ok(DraftLogWriter { inner })
    }

    pub fn write(&mut self, log: &DraftLog) -> Result<(), DataError> {
        serde_json::to_writer(&mut self.inner, &DraftRecord::from_log(log)).map_err(std::io::Error::from)?;
        self.inner.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, DataError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streams drafts from a log, one line at a time.
pub struct DraftLogReader<R: BufRead> {
    lines: std::io::Lines<R>,
    line_no: usize,
    n_cards: usize,
}

impl<R: BufRead> DraftLogReader<R> {
    pub fn new(reader: R, n_cards: usize) -> Result<Self, DataError> {
        let mut lines = reader.lines();
        let first = lines.next().ok_or_else(|| DataError::Format("missing draft-log header".into()))??;
        let header: LogHeader =
            serde_json::from_str(&first).map_err(|e| DataError::Parse { line: 1, message: e.to_string() })?;
        if header.format != LOG_FORMAT {
            return Err(DataError::Format(format!("not a draft log: format {:?}", header.format)));
        }
        if header.version != LOG_VERSION {
            return Err(DataError::Format(format!("unsupported draft-log version {}", header.version)));
        }
        Ok(DraftLogReader { lines, line_no: 1, n_cards })
    }
}

impl<R: BufRead> Iterator for DraftLogReader<R> {
    type Item = Result<DraftLog, DataError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let line_no = self.line_no;
            return Some(
                serde_json::from_str::<DraftRecord>(&line)
                    .map_err(|e| DataError::Parse { line: line_no, message: e.to_string() })
                    .and_then(|r| r.into_log(self.n_cards)),
            );
        }
    }
}

pub fn write_draft_logs<'a>(
    path: impl AsRef<Path>,
    logs: impl IntoIterator<Item = &'a DraftLog>,
) -> Result<(), DataError> {
    let mut writer = DraftLogWriter::new(BufWriter::new(File::create(path)?))?;
    for log in logs {
        writer.write(log)?;
    }
    writer.finish()?;
    Ok(())
}

pub fn read_draft_logs(path: impl AsRef<Path>, n_cards: usize) -> Result<Vec<DraftLog>, DataError> {
    DraftLogReader::new(BufReader::new(File::open(path)?), n_cards)?.collect()
}
