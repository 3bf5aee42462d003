//! Output files: `metrics.csv`, `report.json`, `events.ndjson`,
//! `train_log.csv`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use qroute_core::rl::TrainLogRow;
use serde::Serialize;

use crate::experiment::{EpisodeRecord, ExperimentError, MetricsRow};

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<(), ExperimentError> {
    write_csv(path, rows)
}

/// Columns: `step, episode, epsilon, loss, train_edr`; `loss` is `NaN` for
/// episodes without a gradient update.
pub fn write_train_log(path: &Path, rows: &[TrainLogRow]) -> Result<(), ExperimentError> {
    write_csv(path, rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct MarkerRecord<'a> {
    step: u64,
    event_type: &'static str,
    payload: EpisodeMarker<'a>,
}

#[derive(Serialize)]
struct EpisodeMarker<'a> {
    cell: usize,
    value: Option<f64>,
    approach: &'a str,
    episode: u64,
    seed: u64,
}

/// One JSON object per line, `{step, event_type, payload}`. Each recorded
/// episode opens with an `episode_started` record naming its cell,
/// approach and seed.
pub fn write_events(path: &Path, records: &[EpisodeRecord]) -> Result<(), ExperimentError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        let Some(events) = &r.events else { continue };
        let marker = EpisodeMarker { cell: r.cell, value: r.value, approach: r.approach.name(), episode: r.episode, seed: r.episode_seed };
        let line = MarkerRecord { step: 0, event_type: "episode_started", payload: marker };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
        for e in events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}
