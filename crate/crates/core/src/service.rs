//! Draft-assistant sessions over loaded models.
//!
//! Transport-agnostic: the HTTP layer lives in the CLI crate and maps
//! [`ServiceError`] variants onto status codes.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{embedding_rows, AnalysisError, EmbeddingRow};
use crate::cardset::{Card, CardDatabase, CardId};
use crate::cpr::{CprError, EmbeddingModel};
use crate::draftsim::{DraftConfig, Pack, PlayerPool};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Invalid(String),
    #[error("draft complete")]
    DraftComplete,
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<CprError> for ServiceError {
    fn from(e: CprError) -> Self {
        match e {
            CprError::EmptyPack => ServiceError::Invalid("empty pack".into()),
            CprError::CardOutOfRange { card, .. } => ServiceError::Invalid(format!("unknown card id {card}")),
            e => ServiceError::Internal(e.to_string()),
        }
    }
}

impl From<AnalysisError> for ServiceError {
    fn from(e: AnalysisError) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub pack: Vec<CardId>,
    pub picked: CardId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DraftSession {
    pub id: String,
    pub model_id: String,
    pub pool: PlayerPool,
    pub history: Vec<HistoryEntry>,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub card_id: CardId,
    pub count: u32,
}

/// Session state as returned to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub model_id: String,
    pub created_at: u64,
    pub anchor_size: usize,
    pub capacity: usize,
    pub complete: bool,
    pub pool: Vec<PoolEntry>,
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCard {
    pub card_id: CardId,
    pub name: String,
    pub distance: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationResponse {
    pub ranked: Vec<RankedCard>,
    pub anchor_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub id: String,
    pub dim: usize,
    pub hidden_dims: Vec<usize>,
    pub db_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingsResponse {
    pub model_id: String,
    pub dim: usize,
    /// Projection of the empty-set embedding, when a projection exists.
    pub empty_point: Option<[f64; 2]>,
    pub cards: Vec<EmbeddingRow>,
}

/// One journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum JournalEntry {
    Create { id: String, model_id: String, created_at: u64 },
    Pick { id: String, pack: Vec<CardId>, picked: CardId },
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Loaded models, sessions, and the optional journal.
pub struct DraftService {
    db: Arc<CardDatabase>,
    models: BTreeMap<String, Arc<EmbeddingModel>>,
    embeddings: RwLock<HashMap<String, Arc<EmbeddingsResponse>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<DraftSession>>>>,
    journal: Option<Mutex<File>>,
    max_pack: usize,
    capacity: usize,
}

impl DraftService {
    /// Every model must be bound to `db`.
    pub fn new(
        db: Arc<CardDatabase>,
        models: impl IntoIterator<Item = (String, Arc<EmbeddingModel>)>,
        config: &DraftConfig,
    ) -> Result<Self, ServiceError> {
        let mut map = BTreeMap::new();
        for (id, model) in models {
            model.check_db(&db).map_err(|e| ServiceError::Invalid(format!("model {id}: {e}")))?;
            if map.insert(id.clone(), model).is_some() {
                return Err(ServiceError::Invalid(format!("duplicate model id {id}")));
            }
        }
        Ok(DraftService {
            db,
            models: map,
            embeddings: RwLock::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
            journal: None,
            max_pack: config.pack_size,
            capacity: config.picks_per_player(),
        })
    }

    /// Replays `path` if it exists, then appends every later mutation to it.
    pub fn with_journal(mut self, path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path: PathBuf = path.as_ref().into();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: JournalEntry = serde_json::from_str(&line)
                    .map_err(|e| ServiceError::Internal(format!("journal line {}: {e}", i + 1)))?;
                let replayed = match entry {
                    JournalEntry::Create { id, model_id, created_at } => {
                        self.insert_session(id, model_id, created_at).map(|_| ())
                    }
                    JournalEntry::Pick { id, pack, picked } => self.apply_pick(&id, &pack, picked).map(|_| ()),
                };
                replayed.map_err(|e| ServiceError::Internal(format!("journal line {}: {e}", i + 1)))?;
            }
        }
        self.journal = Some(Mutex::new(OpenOptions::new().create(true).append(true).open(&path)?));
        Ok(self)
    }

    fn log(&self, entry: &JournalEntry) -> Result<(), ServiceError> {
        if let Some(journal) = &self.journal {
            let mut file = journal.lock().map_err(|_| ServiceError::Internal("journal lock poisoned".into()))?;
            let line = serde_json::to_string(entry).map_err(|e| ServiceError::Internal(e.to_string()))?;
            writeln!(file, "{line}")?;
            file.flush()?;
        }
        Ok(())
    }

    pub fn db(&self) -> &CardDatabase {
        &self.db
    }

    pub fn cards(&self) -> &[Card] {
        self.db.cards()
    }

    pub fn models(&self) -> Vec<ModelInfo> {
        self.models
            .iter()
            .map(|(id, m)| ModelInfo {
                id: id.clone(),
                dim: m.dim(),
                hidden_dims: m.spec().hidden_dims.clone(),
                db_fingerprint: m.db_fingerprint().to_string(),
            })
            .collect()
    }

    fn model(&self, id: &str) -> Result<&Arc<EmbeddingModel>, ServiceError> {
        self.models.get(id).ok_or_else(|| ServiceError::NotFound(format!("unknown model {id}")))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<DraftSession>>, ServiceError> {
        let sessions = self.sessions.read().map_err(|_| ServiceError::Internal("session lock poisoned".into()))?;
        sessions.get(id).cloned().ok_or_else(|| ServiceError::NotFound(format!("unknown session {id}")))
    }

    fn insert_session(&self, id: String, model_id: String, created_at: u64) -> Result<SessionView, ServiceError> {
        self.model(&model_id)?;
        let session = DraftSession {
            id: id.clone(),
            model_id,
            pool: PlayerPool::new(self.db.len()),
            history: Vec::new(),
            created_at,
        };
        let view = self.view(&session);
        let mut sessions = self.sessions.write().map_err(|_| ServiceError::Internal("session lock poisoned".into()))?;
        if sessions.contains_key(&id) {
            return Err(ServiceError::Invalid(format!("session {id} already exists")));
        }
        sessions.insert(id, Arc::new(Mutex::new(session)));
        Ok(view)
    }

    pub fn create_session(&self, model_id: &str) -> Result<SessionView, ServiceError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let created_at = now();
        let view = self.insert_session(id.clone(), model_id.to_string(), created_at)?;
        self.log(&JournalEntry::Create { id, model_id: model_id.to_string(), created_at })?;
        Ok(view)
    }

    fn view(&self, s: &DraftSession) -> SessionView {
        SessionView {
            id: s.id.clone(),
            model_id: s.model_id.clone(),
            created_at: s.created_at,
            anchor_size: s.pool.total(),
            capacity: self.capacity,
            complete: s.history.len() >= self.capacity,
            pool: s.pool.iter().map(|(card_id, count)| PoolEntry { card_id, count }).collect(),
            history: s.history.clone(),
        }
    }

    pub fn get_session(&self, id: &str) -> Result<SessionView, ServiceError> {
        let session = self.session(id)?;
        let s = session.lock().map_err(|_| ServiceError::Internal("session lock poisoned".into()))?;
        Ok(self.view(&s))
    }

    fn validate_pack(&self, pack: &[CardId]) -> Result<Pack, ServiceError> {
        if pack.is_empty() {
            return Err(ServiceError::Invalid("empty pack".into()));
        }
        if pack.len() > self.max_pack {
            return Err(ServiceError::Invalid(format!(
                "pack has {} cards, at most {} allowed",
                pack.len(),
                self.max_pack
            )));
        }
        if let Some(bad) = pack.iter().find(|c| !self.db.contains(**c)) {
            return Err(ServiceError::Invalid(format!("unknown card id {bad}")));
        }
        Ok(Pack(pack.to_vec()))
    }

    /// Ranks `pack` against the session's pool without changing the session.
    pub fn recommend(&self, id: &str, pack: &[CardId]) -> Result<RecommendationResponse, ServiceError> {
        let pack = self.validate_pack(pack)?;
        let session = self.session(id)?;
        let s = session.lock().map_err(|_| ServiceError::Internal("session lock poisoned".into()))?;
        let model = self.model(&s.model_id)?;
        let ranked = model
            .rank_candidates(&self.db, &s.pool, &pack)?
            .into_iter()
            .map(|r| RankedCard {
                card_id: r.card,
                name: self.db.card(r.card).name.clone(),
                distance: r.distance,
                rank: r.rank,
            })
            .collect();
        Ok(RecommendationResponse { ranked, anchor_size: s.pool.total() })
    }

    fn apply_pick(&self, id: &str, pack: &[CardId], picked: CardId) -> Result<usize, ServiceError> {
        let pack = self.validate_pack(pack)?;
        if !pack.contains(picked) {
            return Err(ServiceError::Invalid(format!("picked card {picked} is not in the pack")));
        }
        let session = self.session(id)?;
        let mut s = session.lock().map_err(|_| ServiceError::Internal("session lock poisoned".into()))?;
        if s.history.len() >= self.capacity {
            return Err(ServiceError::DraftComplete);
        }
        s.history.push(HistoryEntry { pack: pack.0, picked });
        s.pool.add(picked);
        Ok(s.pool.total())
    }

    /// Appends a pick to the session; returns the new pool size.
    pub fn record_pick(&self, id: &str, pack: &[CardId], picked: CardId) -> Result<usize, ServiceError> {
        let size = self.apply_pick(id, pack, picked)?;
        self.log(&JournalEntry::Pick { id: id.to_string(), pack: pack.to_vec(), picked })?;
        Ok(size)
    }

    /// Per-card embeddings, 2-D projection and distance to the empty set.
    /// Computed once per model.
    pub fn embeddings(&self, model_id: &str) -> Result<Arc<EmbeddingsResponse>, ServiceError> {
        if let Some(hit) =
            self.embeddings.read().map_err(|_| ServiceError::Internal("cache lock poisoned".into()))?.get(model_id)
        {
            return Ok(Arc::clone(hit));
        }
        let model = self.model(model_id)?;
        let (cards, empty_point) = embedding_rows(model, &self.db)?;
        let response =
            Arc::new(EmbeddingsResponse { model_id: model_id.to_string(), dim: model.dim(), empty_point, cards });
        self.embeddings
            .write()
            .map_err(|_| ServiceError::Internal("cache lock poisoned".into()))?
            .insert(model_id.to_string(), Arc::clone(&response));
        Ok(response)
    }
}
