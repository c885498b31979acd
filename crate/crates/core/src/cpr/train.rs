use rand::{Rng, RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{pool_input, CprError, EmbeddingModel};
use crate::cardset::CardDatabase;
use crate::dataio::{DataError, TripletExample};
use crate::draftsim::{DraftRng, PickEvent};
use crate::neuralnet::{
    forward_into, triplet_backward, AdamState, BackpropScratch, ForwardTrace, ModelParams, NetError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub margin: f64,
    /// Size of the streaming shuffle buffer; 0 or 1 keeps stream order.
    pub shuffle_buffer: usize,
    /// Validation cadence in triplets; 0 disables intermediate checks.
    pub validation_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 128,
            margin: 1.0,
            shuffle_buffer: 10_000,
            validation_every: 50_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub triplets_seen: u64,
    pub mtta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean triplet loss of each batch, in update order.
    pub batch_losses: Vec<f64>,
    pub validation: Vec<ValidationPoint>,
    pub triplets_seen: u64,
}

/// Reusable buffers for the three forward passes and backprop.
#[derive(Debug, Default)]
pub struct TrainWorkspace {
    traces: [ForwardTrace; 3],
    inputs: [Vec<(usize, f64)>; 3],
    scratch: BackpropScratch,
}

/// Mean triplet loss of `batch`; accumulates the gradient of that mean into
/// `grads`. Without an rng dropout is off.
pub fn batch_gradient(
    model: &EmbeddingModel,
    batch: &[TripletExample],
    margin: f64,
    mut dropout: Option<&mut DraftRng>,
    grads: &mut ModelParams,
    ws: &mut TrainWorkspace,
) -> Result<f64, CprError> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let n = model.n_cards();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for t in batch {
        for card in [t.positive, t.negative] {
            if card.index() >= n {
                return Err(CprError::CardOutOfRange { card, n });
            }
        }
        pool_input(&t.anchor, &mut ws.inputs[0]);
        ws.inputs[1].clear();
        ws.inputs[1].push((t.positive.index(), 1.0));
        ws.inputs[2].clear();
        ws.inputs[2].push((t.negative.index(), 1.0));
        for (trace, input) in ws.traces.iter_mut().zip(&ws.inputs) {
            forward_into(
                &model.spec,
                &model.params,
                input,
                dropout.as_deref_mut().map(|r| r as &mut dyn RngCore),
                trace,
            )?;
        }
        let [ta, tp, tn] = &ws.traces;
        total += triplet_backward(&model.spec, &model.params, ta, tp, tn, margin, scale, grads, &mut ws.scratch)?;
    }
    Ok(total * scale)
}

/// Top-1 agreement of the model's pick with the recorded pick.
pub(crate) fn top1_accuracy(model: &EmbeddingModel, events: &[PickEvent]) -> Result<f64, CprError> {
    if events.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for e in events {
        if model.rank_unchecked(&e.pool_before, &e.pack)?[0].card == e.picked {
            hits += 1;
        }
    }
    Ok(hits as f64 / events.len() as f64)
}

/// Streaming shuffle: holds up to `capacity` items and emits a random one
/// for each item taken in.
struct ShuffleBuffer<I> {
    inner: I,
    buf: Vec<TripletExample>,
    capacity: usize,
    drained: bool,
}

impl<I: Iterator<Item = Result<TripletExample, DataError>>> ShuffleBuffer<I> {
    fn next(&mut self, rng: &mut impl Rng) -> Option<Result<TripletExample, DataError>> {
        if self.capacity <= 1 {
            return self.inner.next();
        }
        if !self.drained {
            while self.buf.len() < self.capacity {
                match self.inner.next() {
                    Some(Ok(t)) => self.buf.push(t),
                    Some(Err(e)) => return Some(Err(e)),
                    None => {
                        self.drained = true;
                        break;
                    }
                }
            }
        }
        if self.buf.is_empty() {
            return None;
        }
        let j = rng.gen_range(0..self.buf.len());
        Some(Ok(self.buf.swap_remove(j)))
    }
}

/// Trains `model` on a triplet stream with Adam, one update per batch of
/// `batch_size` triplets (the last batch may be smaller).
///
/// `validation` events are scored every `validation_every` triplets and at
/// the end. Candidate embeddings are refreshed before returning.
pub fn train(
    model: &mut EmbeddingModel,
    db: &CardDatabase,
    triplets: impl IntoIterator<Item = Result<TripletExample, DataError>>,
    config: &TrainConfig,
    validation: &[PickEvent],
    rng: &mut DraftRng,
) -> Result<TrainHistory, CprError> {
    model.check_db(db)?;
    if config.batch_size == 0 {
        return Err(CprError::Model("batch size must be at least 1".into()));
    }
    let mut adam = AdamState::new(&model.params, config.learning_rate);
    let mut grads = model.params.zeros_like();
    let mut ws = TrainWorkspace::default();
    let mut history = TrainHistory::default();
    let mut stream =
        ShuffleBuffer { inner: triplets.into_iter(), buf: Vec::new(), capacity: config.shuffle_buffer, drained: false };
    let mut shuffle_rng = DraftRng::from_rng(&mut *rng).expect("chacha seeding");
    let mut batch = Vec::with_capacity(config.batch_size);
    let mut next_validation = config.validation_every as u64;

    loop {
        batch.clear();
        while batch.len() < config.batch_size {
            match stream.next(&mut shuffle_rng) {
                Some(t) => batch.push(t?),
                None => break,
            }
        }
        if batch.is_empty() {
            break;
        }
        let index = history.batch_losses.len();
        grads.fill_zero();
        let loss =
            batch_gradient(model, &batch, config.margin, Some(&mut *rng), &mut grads, &mut ws).map_err(
                |e| match e {
                    CprError::Net(NetError::NonFinite(_)) => CprError::NonFiniteLoss { batch: index },
                    e => e,
                },
            )?;
        if !loss.is_finite() {
            return Err(CprError::NonFiniteLoss { batch: index });
        }
        adam.step(&mut model.params, &grads).map_err(|e| match e {
            NetError::NonFinite(_) => CprError::NonFiniteLoss { batch: index },
            e => e.into(),
        })?;
        history.batch_losses.push(loss);
        history.triplets_seen += batch.len() as u64;

        if config.validation_every > 0 && !validation.is_empty() && history.triplets_seen >= next_validation {
            while next_validation <= history.triplets_seen {
                next_validation += config.validation_every as u64;
            }
            model.refresh_cache()?;
            history.validation.push(ValidationPoint {
                triplets_seen: history.triplets_seen,
                mtta: top1_accuracy(model, validation)?,
            });
        }
    }

    model.refresh_cache()?;
    if !validation.is_empty() && history.validation.last().map(|v| v.triplets_seen) != Some(history.triplets_seen) {
        history
            .validation
            .push(ValidationPoint { triplets_seen: history.triplets_seen, mtta: top1_accuracy(model, validation)? });
    }
    Ok(history)
}
