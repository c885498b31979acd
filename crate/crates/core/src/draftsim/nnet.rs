use std::cmp::Ordering;

use rand::Rng;
use rand::RngCore;

use super::{Agent, DraftRng, Pack, PickEvent, PlayerPool};
use crate::cardset::{CardDatabase, CardId};
use crate::neuralnet::{
    embed_sparse, forward_into, softmax_cross_entropy_backward, AdamState, BackpropScratch, ForwardTrace, ModelParams,
    NetError, NetworkSpec, OutputActivation,
};

/// Classification baseline: maps the pool to one score per card and picks the
/// highest-scoring card in the pack.
#[derive(Debug, Clone, PartialEq)]
pub struct NNetBot {
    spec: NetworkSpec,
    params: ModelParams,
}

impl NNetBot {
    pub fn init(n_cards: usize, hidden_dims: Vec<usize>, rng: &mut impl Rng) -> Result<Self, NetError> {
        let spec = NetworkSpec {
            output_activation: OutputActivation::Linear,
            ..NetworkSpec::embedding(n_cards, hidden_dims, n_cards)
        };
        spec.validate()?;
        let params = ModelParams::init(&spec, rng);
        Ok(NNetBot { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn input(pool: &PlayerPool) -> Vec<(usize, f64)> {
        pool.iter().map(|(c, n)| (c.index(), n as f64)).collect()
    }

    /// Scores for every card given the pool.
    pub fn scores(&self, pool: &PlayerPool) -> Result<Vec<f64>, NetError> {
        embed_sparse(&self.spec, &self.params, &Self::input(pool))
    }

    /// One pass over `events` with Adam, minimizing cross-entropy of the
    /// recorded pick over the cards of its pack. Returns per-batch mean losses.
    pub fn train<'e>(
        &mut self,
        events: impl IntoIterator<Item = &'e PickEvent>,
        learning_rate: f64,
        batch_size: usize,
        rng: &mut DraftRng,
    ) -> Result<Vec<f64>, NetError> {
        let batch_size = batch_size.max(1);
        let mut adam = AdamState::new(&self.params, learning_rate);
        let mut grads = self.params.zeros_like();
        let mut trace = ForwardTrace::default();
        let mut scratch = BackpropScratch::default();
        let mut losses = Vec::new();
        let mut batch: Vec<&PickEvent> = Vec::with_capacity(batch_size);
        let mut events = events.into_iter().peekable();
        while events.peek().is_some() {
            batch.clear();
            batch.extend(events.by_ref().take(batch_size));
            grads.fill_zero();
            let scale = 1.0 / batch.len() as f64;
            let mut total = 0.0;
            for e in &batch {
                let allowed: Vec<usize> = e.pack.cards().iter().map(|c| c.index()).collect();
                forward_into(
                    &self.spec,
                    &self.params,
                    &Self::input(&e.pool_before),
                    Some(&mut *rng as &mut dyn RngCore),
                    &mut trace,
                )?;
                total += softmax_cross_entropy_backward(
                    &self.spec,
                    &self.params,
                    &trace,
                    &allowed,
                    e.picked.index(),
                    scale,
                    &mut grads,
                    &mut scratch,
                )?;
            }
            adam.step(&mut self.params, &grads)?;
            losses.push(total * scale);
        }
        Ok(losses)
    }
}

impl Agent for NNetBot {
    fn name(&self) -> &str {
        "nnet"
    }

    fn rank(&self, pool: &PlayerPool, pack: &Pack, _db: &CardDatabase, _rng: &mut DraftRng) -> Vec<CardId> {
        let scores = self.scores(pool).expect("pool within the trained card set");
        let mut order = pack.cards().to_vec();
        order.sort_by(|a, b| {
            scores[b.index()].partial_cmp(&scores[a.index()]).unwrap_or(Ordering::Equal).then(a.cmp(b))
        });
        order
    }
}
