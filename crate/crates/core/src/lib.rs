//! Contextual preference ranking for card drafting.
//!
//! A shared embedding network maps the set of already-picked cards and each
//! candidate card into the same space; candidates closer to the embedded
//! context are better additions. Around that core sit a pack-passing draft
//! simulator with baseline agents, log/triplet data handling, a small
//! hand-written MLP with triplet loss and Adam, evaluation metrics, and the
//! draft-session logic behind the recommendation service.

pub mod analysis;
pub mod cardset;
pub mod cpr;
pub mod dataio;
pub mod draftsim;
pub mod neuralnet;
pub mod service;
pub mod synth;

pub use cardset::{Card, CardDatabase, CardId, Color, Colors, Rarity};
pub use cpr::{EmbeddingModel, RankedRecommendation, SiameseBot, TrainConfig};
pub use dataio::{DatasetSplit, TripletExample};
pub use draftsim::{Agent, DraftConfig, DraftLog, DraftRng, Pack, PickEvent, PlayerPool};
pub use neuralnet::{ModelParams, NetworkSpec};
