use std::sync::Arc;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{evaluate_agent, AnalysisError};
use crate::cardset::CardDatabase;
use crate::cpr::{train, EmbeddingModel, SiameseBot, TrainConfig};
use crate::dataio::{stable_hash, DataError, TripletExample};
use crate::draftsim::{DraftRng, PickEvent};

/// Everything except the embedding dimension and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSetup {
    pub hidden_dims: Vec<usize>,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub seed: u64,
    pub mtta: f64,
    pub mtpd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dim: usize,
    pub runs: Vec<SweepRun>,
    pub mean_mtta: f64,
}

/// Trains one model per (dimension, seed) and scores it on `test`.
///
/// `triplets` must replay the same stream on every call. For a given seed the
/// training rng, and with it the shuffle order, is the same for every
/// dimension; weight initialization uses a separate stream.
pub fn dimension_sweep<I>(
    db: &CardDatabase,
    setup: &SweepSetup,
    dims: &[usize],
    seeds: &[u64],
    triplets: impl Fn() -> I,
    test: &[PickEvent],
    mut on_run: impl FnMut(usize, &SweepRun),
) -> Result<Vec<SweepRow>, AnalysisError>
where
    I: IntoIterator<Item = Result<TripletExample, DataError>>,
{
    if dims.is_empty() || seeds.is_empty() {
        return Err(AnalysisError::TooFew { needed: 1, got: 0 });
    }
    let mut rows = Vec::with_capacity(dims.len());
    for &dim in dims {
        let mut runs = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mut init_rng = DraftRng::seed_from_u64(stable_hash(seed, 0x1417));
            let mut model = EmbeddingModel::init(db, setup.hidden_dims.clone(), dim, &mut init_rng)?;
            let mut rng = DraftRng::seed_from_u64(seed);
            train(&mut model, db, triplets(), &setup.train, &[], &mut rng)?;
            let bot = SiameseBot::new(Arc::new(model), db)?;
            let report = evaluate_agent(&bot, db, test, &mut rng)?;
            let run = SweepRun { seed, mtta: report.mtta, mtpd: report.mtpd };
            on_run(dim, &run);
            runs.push(run);
        }
        let mean_mtta = runs.iter().map(|r| r.mtta).sum::<f64>() / runs.len() as f64;
        rows.push(SweepRow { dim, runs, mean_mtta });
    }
    Ok(rows)
}
