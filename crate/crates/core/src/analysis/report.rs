use std::io::Write;

use serde::{Deserialize, Serialize};

use super::cluster::all_candidate_embeddings;
use super::{project_2d, AnalysisError, CardStats, EvaluationReport};
use crate::cardset::{CardDatabase, CardId};
use crate::cpr::EmbeddingModel;

fn csv_err(e: csv::Error) -> AnalysisError {
    AnalysisError::Io(std::io::Error::other(e))
}

/// `pick,count,correct,accuracy`, one row per pick ordinal; accuracy is
/// empty for ordinals with no events.
pub fn write_per_pick_csv(report: &EvaluationReport, w: impl Write) -> Result<(), AnalysisError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["pick", "count", "correct", "accuracy"]).map_err(csv_err)?;
    for b in &report.per_pick {
        let acc = b.accuracy().map(|a| format!("{a:.6}")).unwrap_or_default();
        out.write_record([b.pick_number.to_string(), b.count.to_string(), b.correct.to_string(), acc])
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_card_stats_csv(stats: &CardStats, db: &CardDatabase, w: impl Write) -> Result<(), AnalysisError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "card_id",
        "name",
        "offered",
        "chosen",
        "offered_first",
        "chosen_first",
        "pick_rate",
        "first_pick_rate",
    ])
    .map_err(csv_err)?;
    let rate = |r: Option<f64>| r.map(|v| format!("{v:.6}")).unwrap_or_default();
    for (card, c) in db.cards().iter().zip(&stats.cards) {
        out.write_record([
            card.id.to_string(),
            card.name.clone(),
            c.times_offered.to_string(),
            c.times_chosen.to_string(),
            c.times_offered_first.to_string(),
            c.times_chosen_first.to_string(),
            rate(c.pick_rate()),
            rate(c.first_pick_rate()),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// One card's embedding with its analytics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub card_id: CardId,
    pub name: String,
    pub colors: String,
    pub rarity: String,
    pub distance_to_empty: f64,
    pub embedding: Vec<f64>,
    /// Principal-axis projection; absent when D < 2.
    pub point: Option<[f64; 2]>,
}

/// Rows for every card in id order, plus the projection of the empty-set
/// embedding when a projection exists.
pub fn embedding_rows(
    model: &EmbeddingModel,
    db: &CardDatabase,
) -> Result<(Vec<EmbeddingRow>, Option<[f64; 2]>), AnalysisError> {
    model.check_db(db)?;
    let embeddings = all_candidate_embeddings(model)?;
    let projection = if model.dim() >= 2 { project_2d(&embeddings).ok() } else { None };
    let empty = model.embed_anchor(&crate::draftsim::PlayerPool::new(db.len()))?;
    let mut rows = Vec::with_capacity(db.len());
    for (card, embedding) in db.cards().iter().zip(embeddings) {
        rows.push(EmbeddingRow {
            card_id: card.id,
            name: card.name.clone(),
            colors: card.colors.to_string(),
            rarity: card.rarity.to_string(),
            distance_to_empty: model.distance_to_empty(card.id)?,
            point: projection.as_ref().map(|p| p.points[card.id.index()]),
            embedding,
        });
    }
    Ok((rows, projection.map(|p| p.project(&empty))))
}

/// `card_id,name,colors,rarity,distance_to_empty,e_0,...,e_{D-1}`.
pub fn write_embedding_csv(rows: &[EmbeddingRow], w: impl Write) -> Result<(), AnalysisError> {
    let dim = rows.first().map_or(0, |r| r.embedding.len());
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> =
        ["card_id", "name", "colors", "rarity", "distance_to_empty"].map(String::from).to_vec();
    header.extend((0..dim).map(|i| format!("e_{i}")));
    out.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut record = vec![
            r.card_id.to_string(),
            r.name.clone(),
            r.colors.clone(),
            r.rarity.clone(),
            format!("{}", r.distance_to_empty),
        ];
        record.extend(r.embedding.iter().map(|v| format!("{v}")));
        out.write_record(&record).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}
