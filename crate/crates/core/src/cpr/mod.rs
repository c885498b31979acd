//! Contextual preference ranking.
//!
//! The shared network embeds the context (the multiset of picked cards, as a
//! count vector) and each candidate (one-hot). A candidate is a better
//! addition the closer its embedding lies to the context's embedding, so a
//! pick is the argmin of that distance and the ordering is a total preorder
//! for any fixed context.

mod train;

use std::cmp::Ordering;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cardset::{CardDatabase, CardId};
use crate::dataio::DataError;
use crate::draftsim::{Agent, DraftRng, Pack, PlayerPool};
use crate::neuralnet::{
    embed_sparse, euclidean_distance, read_model_file, write_model_file, ModelParams, NetError, NetworkSpec,
    OutputActivation,
};

pub use train::{batch_gradient, train, TrainConfig, TrainHistory, TrainWorkspace};

#[derive(Debug, Error)]
pub enum CprError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("model is bound to card database {model}, not {db}")]
    Fingerprint { model: String, db: String },
    #[error("empty pack")]
    EmptyPack,
    #[error("card {card} is out of range for N = {n}")]
    CardOutOfRange { card: CardId, n: usize },
    #[error("non-finite loss at batch {batch}")]
    NonFiniteLoss { batch: usize },
    #[error("invalid model: {0}")]
    Model(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Card multiplicities of a context set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorEncoding(pub Vec<u32>);

impl AnchorEncoding {
    pub fn to_dense(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }

    pub fn to_sparse(&self) -> Vec<(usize, f64)> {
        self.0.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i, c as f64)).collect()
    }
}

/// One-hot encoding of a single candidate card.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateEncoding {
    pub index: usize,
    pub n: usize,
}

impl CandidateEncoding {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        v[self.index] = 1.0;
        v
    }

    pub fn to_sparse(&self) -> Vec<(usize, f64)> {
        vec![(self.index, 1.0)]
    }
}

pub fn encode_anchor(pool: &PlayerPool, n: usize) -> Result<AnchorEncoding, CprError> {
    let mut counts = vec![0u32; n];
    for (card, count) in pool.iter() {
        if card.index() >= n {
            return Err(CprError::CardOutOfRange { card, n });
        }
        counts[card.index()] = count;
    }
    Ok(AnchorEncoding(counts))
}

pub fn encode_candidate(card: CardId, n: usize) -> Result<CandidateEncoding, CprError> {
    if card.index() >= n {
        return Err(CprError::CardOutOfRange { card, n });
    }
    Ok(CandidateEncoding { index: card.index(), n })
}

/// Sparse count input of a pool, without the range check.
pub(crate) fn pool_input(pool: &PlayerPool, out: &mut Vec<(usize, f64)>) {
    out.clear();
    out.extend(pool.iter().map(|(c, n)| (c.index(), n as f64)));
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedRecommendation {
    pub card: CardId,
    pub distance: f64,
    pub rank: usize,
}

/// Trained (or freshly initialized) embedding network bound to one card database.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    spec: NetworkSpec,
    params: ModelParams,
    db_fingerprint: String,
    /// Candidate embeddings do not depend on the context; computed once.
    candidates: Vec<Vec<f64>>,
}

impl EmbeddingModel {
    pub fn new(spec: NetworkSpec, params: ModelParams, db_fingerprint: impl Into<String>) -> Result<Self, CprError> {
        spec.validate()?;
        if spec.output_activation != OutputActivation::Tanh {
            return Err(CprError::Model("embedding networks use a tanh output".into()));
        }
        if !params.matches(&spec) {
            return Err(NetError::Shape.into());
        }
        let mut model = EmbeddingModel { spec, params, db_fingerprint: db_fingerprint.into(), candidates: Vec::new() };
        model.refresh_cache()?;
        Ok(model)
    }

    /// Freshly initialized model for `db`.
    pub fn init(
        db: &CardDatabase,
        hidden_dims: Vec<usize>,
        output_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, CprError> {
        let spec = NetworkSpec::embedding(db.len(), hidden_dims, output_dim);
        spec.validate()?;
        let params = ModelParams::init(&spec, rng);
        Self::new(spec, params, db.fingerprint())
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn db_fingerprint(&self) -> &str {
        &self.db_fingerprint
    }

    pub fn n_cards(&self) -> usize {
        self.spec.input_dim
    }

    pub fn dim(&self) -> usize {
        self.spec.output_dim
    }

    pub fn set_params(&mut self, params: ModelParams) -> Result<(), CprError> {
        if !params.matches(&self.spec) {
            return Err(NetError::Shape.into());
        }
        self.params = params;
        self.refresh_cache()
    }

    fn refresh_cache(&mut self) -> Result<(), CprError> {
        self.candidates = (0..self.spec.input_dim)
            .map(|i| embed_sparse(&self.spec, &self.params, &[(i, 1.0)]))
            .collect::<Result<_, _>>()?;
        Ok(())
    }

    pub fn check_db(&self, db: &CardDatabase) -> Result<(), CprError> {
        if db.fingerprint() != self.db_fingerprint || db.len() != self.spec.input_dim {
            return Err(CprError::Fingerprint { model: self.db_fingerprint.clone(), db: db.fingerprint().to_string() });
        }
        Ok(())
    }

    /// Embedding of a one-card candidate.
    pub fn candidate_embedding(&self, card: CardId) -> Result<&[f64], CprError> {
        self.candidates
            .get(card.index())
            .map(|v| v.as_slice())
            .ok_or(CprError::CardOutOfRange { card, n: self.n_cards() })
    }

    /// Embedding of a context set.
    pub fn embed_anchor(&self, pool: &PlayerPool) -> Result<Vec<f64>, CprError> {
        let enc = encode_anchor(pool, self.n_cards())?;
        Ok(embed_sparse(&self.spec, &self.params, &enc.to_sparse())?)
    }

    /// Embedding of a dense input vector (counts or one-hot).
    pub fn embed_dense(&self, input: &[f64]) -> Result<Vec<f64>, CprError> {
        if input.len() != self.n_cards() {
            return Err(NetError::Dim { expected: self.n_cards(), got: input.len() }.into());
        }
        Ok(embed_sparse(&self.spec, &self.params, &crate::neuralnet::sparse_input(input))?)
    }

    /// Ranks every card of the pack by distance to the embedded context,
    /// closest first, lowest id on ties.
    pub fn rank_candidates(
        &self,
        db: &CardDatabase,
        pool: &PlayerPool,
        pack: &Pack,
    ) -> Result<Vec<RankedRecommendation>, CprError> {
        self.check_db(db)?;
        self.rank_unchecked(pool, pack)
    }

    fn rank_unchecked(&self, pool: &PlayerPool, pack: &Pack) -> Result<Vec<RankedRecommendation>, CprError> {
        if pack.is_empty() {
            return Err(CprError::EmptyPack);
        }
        let anchor = self.embed_anchor(pool)?;
        let mut scored = pack
            .cards()
            .iter()
            .map(|&card| Ok((euclidean_distance(&anchor, self.candidate_embedding(card)?)?, card)))
            .collect::<Result<Vec<(f64, CardId)>, CprError>>()?;
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(rank, (distance, card))| RankedRecommendation { card, distance, rank })
            .collect())
    }

    pub fn pick_card(&self, db: &CardDatabase, pool: &PlayerPool, pack: &Pack) -> Result<CardId, CprError> {
        Ok(self.rank_candidates(db, pool, pack)?[0].card)
    }

    /// Distance from the empty context to a card: the model's context-free
    /// strength estimate (smaller is stronger).
    pub fn distance_to_empty(&self, card: CardId) -> Result<f64, CprError> {
        let empty = embed_sparse(&self.spec, &self.params, &[])?;
        Ok(euclidean_distance(&empty, self.candidate_embedding(card)?)?)
    }

    /// All cards ordered by distance to the empty context.
    pub fn rank_all(&self, db: &CardDatabase) -> Result<Vec<RankedRecommendation>, CprError> {
        self.check_db(db)?;
        let everything = Pack((0..self.n_cards()).map(CardId::from).collect());
        self.rank_unchecked(&PlayerPool::new(self.n_cards()), &everything)
    }

    pub fn save(&self, path: impl AsRef<Path>, extra: serde_json::Value) -> Result<String, CprError> {
        let file = std::fs::File::create(path)?;
        let meta = serde_json::json!({ "kind": "siamese", "db_fingerprint": self.db_fingerprint, "extra": extra });
        Ok(write_model_file(BufWriter::new(file), &self.spec, &self.params, meta)?)
    }

    /// Loads a model file; returns the model and the stored checksum.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String), CprError> {
        let file = read_model_file(BufReader::new(std::fs::File::open(path)?))?;
        if file.metadata["kind"] != "siamese" {
            return Err(CprError::Model(format!("not an embedding model: kind {}", file.metadata["kind"])));
        }
        let fingerprint = file.metadata["db_fingerprint"]
            .as_str()
            .ok_or_else(|| CprError::Model("missing db fingerprint".into()))?
            .to_string();
        Ok((Self::new(file.spec, file.params, fingerprint)?, file.checksum))
    }
}

/// Drafting agent backed by an embedding model.
#[derive(Debug, Clone)]
pub struct SiameseBot {
    model: Arc<EmbeddingModel>,
}

impl SiameseBot {
    pub fn new(model: Arc<EmbeddingModel>, db: &CardDatabase) -> Result<Self, CprError> {
        model.check_db(db)?;
        Ok(SiameseBot { model })
    }

    pub fn model(&self) -> &EmbeddingModel {
        &self.model
    }
}

impl Agent for SiameseBot {
    fn name(&self) -> &str {
        "siamese"
    }

    fn rank(&self, pool: &PlayerPool, pack: &Pack, _db: &CardDatabase, _rng: &mut DraftRng) -> Vec<CardId> {
        self.model
            .rank_unchecked(pool, pack)
            .expect("pack cards are within the bound database")
            .into_iter()
            .map(|r| r.card)
            .collect()
    }
}
