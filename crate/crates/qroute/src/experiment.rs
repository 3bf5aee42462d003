//! Sweeps, paired evaluation and the comparison report.
//!
//! Every (cell, approach, episode) runs on the topology generated from the
//! cell's scenario and the topology seed, and on the world seeded by
//! `episode_seed(seed, episode)`, so all approaches in a cell face the
//! same networks and the same link-generation draws.

use std::path::Path;
use std::sync::Arc;

use qroute_core::gnn::{GnnError, ParameterSet};
use qroute_core::netsim::{compute_edr, generate_topology, Event, ScenarioError, ScenarioSpec, Topology, World};
use qroute_core::rl::{self, run_episode, EpisodeMode, GnnPolicy, TrainError, TrainLogRow, Trainer};
use qroute_core::rng::{self, Stream};
use qroute_core::stats::{self, StatsError, Summary};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approach::Approach;
use crate::checkpoint::{self, CheckpointError};
use crate::config::{baseline_for, Config, EventRecording};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("model: {0}")]
    Model(#[from] GnnError),
    #[error("training: {0}")]
    Train(#[from] TrainError),
    #[error("checkpoint {path}: {source}")]
    Checkpoint { path: String, source: CheckpointError },
    #[error("statistics: {0}")]
    Stats(#[from] StatsError),
    #[error("cell {cell}, episode {episode}: approaches saw different topologies")]
    Unpaired { cell: usize, episode: u64 },
    #[error("the learned approach needs parameters (a checkpoint or a training run)")]
    MissingParams,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// What one evaluation episode produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub cell: usize,
    pub value: Option<f64>,
    pub approach: Approach,
    pub episode: u64,
    pub episode_seed: u64,
    pub topology_checksum: u64,
    pub edr: usize,
    pub requests: usize,
    pub failed: usize,
    /// End-to-end fidelities of completed requests, highest first.
    pub fidelities: Vec<f64>,
    pub events: Option<Vec<Event>>,
}

/// One `metrics.csv` row.
///
/// Columns: `cell, axis, value, approach, episode, episode_seed,
/// topology_checksum, edr, requests, failed, mean_fidelity`. `axis` and
/// `value` are empty without a sweep; `mean_fidelity` is empty when no
/// request completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub cell: usize,
    pub axis: Option<String>,
    pub value: Option<f64>,
    pub approach: Approach,
    pub episode: u64,
    pub episode_seed: u64,
    pub topology_checksum: u64,
    pub edr: usize,
    pub requests: usize,
    pub failed: usize,
    pub mean_fidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub topology_seed: u64,
    pub episodes: u64,
    pub permutations: usize,
    pub axis: Option<String>,
    pub reference: Option<Approach>,
    pub cells: Vec<CellReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub value: Option<f64>,
    pub topology_checksum: u64,
    pub approaches: Vec<ApproachReport>,
    /// Reference vs every other approach; empty with fewer than two episodes.
    pub tests: Vec<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachReport {
    pub approach: Approach,
    /// EDR per episode, in episode order.
    pub edr: Vec<f64>,
    pub summary: Summary,
    /// Over every completed request of the cell.
    pub fidelity_summary: Summary,
    /// Per episode, highest first.
    pub fidelities: Vec<Vec<f64>>,
}

/// One-sided paired test of `mean(reference) > mean(approach)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub reference: Approach,
    pub approach: Approach,
    pub mean_difference: f64,
    pub p_value: f64,
    pub p_holm: f64,
}

impl ComparisonReport {
    pub fn cell(&self, value: Option<f64>) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.value == value)
    }
}

impl CellReport {
    pub fn approach(&self, a: Approach) -> Option<&ApproachReport> {
        self.approaches.iter().find(|r| r.approach == a)
    }

    pub fn test(&self, a: Approach) -> Option<&TestResult> {
        self.tests.iter().find(|t| t.approach == a)
    }
}

pub struct Outcome {
    pub records: Vec<EpisodeRecord>,
    pub report: ComparisonReport,
    /// Present when the learned approach was trained as part of the run.
    pub train_log: Option<Vec<TrainLogRow>>,
    pub params: Option<Arc<ParameterSet>>,
}

/// Parameters for the learned approach: loaded from the configured
/// checkpoint, else trained on the base scenario.
pub fn learned_params<F>(config: &Config, on_episode: F) -> Result<(Arc<ParameterSet>, Option<Vec<TrainLogRow>>), ExperimentError>
where
    F: FnMut(&TrainLogRow, &Trainer),
{
    if let Some(path) = &config.experiment.checkpoint {
        let p = checkpoint::load(path, Some(&config.trainer.gnn))
            .map_err(|source| ExperimentError::Checkpoint { path: path.display().to_string(), source })?;
        return Ok((Arc::new(p), None));
    }
    let (trainer, log) = train(config, None, on_episode)?;
    Ok((Arc::clone(trainer.params()), Some(log)))
}

/// Train on the base scenario; with `checkpoint_to`, save every
/// `checkpoint_every` episodes and at the end.
pub fn train<F>(config: &Config, checkpoint_to: Option<&Path>, mut on_episode: F) -> Result<(Trainer, Vec<TrainLogRow>), ExperimentError>
where
    F: FnMut(&TrainLogRow, &Trainer),
{
    let x = &config.experiment;
    let spec = Arc::new(config.scenario.clone());
    let topology = Arc::new(generate_topology(&spec, x.topology_seed())?);
    let mut trainer = Trainer::new(config.trainer, x.seed);
    let mut save_error = None;
    let log = rl::train(&spec, &topology, &mut trainer, x.seed, |row, t| {
        if let (Some(path), Some(every)) = (checkpoint_to, x.checkpoint_every) {
            if every > 0 && (row.episode + 1) % every == 0 && save_error.is_none() {
                save_error = checkpoint::save(path, t.params()).err();
            }
        }
        on_episode(row, t);
    })?;
    if let Some(path) = checkpoint_to {
        let err = save_error.map_or_else(|| checkpoint::save(path, trainer.params()).err(), Some);
        if let Some(source) = err {
            return Err(ExperimentError::Checkpoint { path: path.display().to_string(), source });
        }
    }
    Ok((trainer, log))
}

/// Run one evaluation episode.
pub fn evaluate_episode(
    approach: Approach,
    config: &Config,
    spec: &Arc<ScenarioSpec>,
    topology: &Arc<Topology>,
    params: Option<&Arc<ParameterSet>>,
    episode: u64,
    record_events: bool,
) -> Result<(u64, qroute_core::netsim::EpisodeLog), ExperimentError> {
    let seed = rng::episode_seed(config.experiment.seed, episode);
    let mut world = World::new(Arc::clone(spec), Arc::clone(topology), seed)?;
    world.set_record_events(record_events);
    let mut policy_rng = rng::stream(seed, Stream::Policy);
    let log = match approach.baseline() {
        Some(kind) => {
            let mut p = baseline_for(kind, &config.experiment);
            run_episode(world, &mut p, EpisodeMode::Eval, &mut policy_rng)
        }
        None => {
            let params = params.ok_or(ExperimentError::MissingParams)?;
            let mut p = GnnPolicy::evaluation(Arc::clone(params), config.trainer.init_rounds);
            let log = run_episode(world, &mut p, EpisodeMode::Eval, &mut policy_rng);
            if let Some(e) = p.error() {
                return Err(e.clone().into());
            }
            log
        }
    };
    Ok((seed, log))
}

/// Run every cell of `config` and assemble the report. `params` must be
/// given when `learned` is among the approaches.
pub fn run(config: &Config, params: Option<Arc<ParameterSet>>) -> Result<Outcome, ExperimentError> {
    let x = &config.experiment;
    let cells = config.cells();
    let mut jobs = Vec::new();
    for cell in 0..cells.len() {
        for &approach in &x.approaches {
            for episode in 0..x.episodes {
                jobs.push((cell, approach, episode));
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = x.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let specs: Vec<Arc<ScenarioSpec>> = cells.iter().map(|(_, s)| Arc::new(s.clone())).collect();
    let records = pool.install(|| {
        jobs.par_iter()
            .map(|&(cell, approach, episode)| {
                // Each job regenerates its topology so pairing can be checked.
                let topology = Arc::new(generate_topology(&specs[cell], x.topology_seed())?);
                let record = match x.events {
                    EventRecording::None => false,
                    EventRecording::FirstEpisode => episode == 0,
                    EventRecording::All => true,
                };
                let (seed, log) = evaluate_episode(approach, config, &specs[cell], &topology, params.as_ref(), episode, record)?;
                let failed = log.requests.iter().filter(|r| r.failure.is_some()).count();
                Ok(EpisodeRecord {
                    cell,
                    value: cells[cell].0,
                    approach,
                    episode,
                    episode_seed: seed,
                    topology_checksum: topology.checksum(),
                    edr: compute_edr(&log),
                    requests: log.requests.len(),
                    failed,
                    fidelities: log.fidelities(),
                    events: record.then_some(log.events),
                })
            })
            .collect::<Result<Vec<_>, ExperimentError>>()
    })?;
    check_pairing(&records)?;
    let report = report(config, &records)?;
    Ok(Outcome { records, report, train_log: None, params })
}

fn check_pairing(records: &[EpisodeRecord]) -> Result<(), ExperimentError> {
    let mut seen = std::collections::HashMap::new();
    for r in records {
        let first = *seen.entry((r.cell, r.episode)).or_insert((r.topology_checksum, r.episode_seed));
        if first != (r.topology_checksum, r.episode_seed) {
            return Err(ExperimentError::Unpaired { cell: r.cell, episode: r.episode });
        }
    }
    Ok(())
}

/// Summaries and tests for every cell. Records must be grouped by cell,
/// then approach, then episode, as [`run`] produces them.
pub fn report(config: &Config, records: &[EpisodeRecord]) -> Result<ComparisonReport, ExperimentError> {
    let x = &config.experiment;
    let reference = x.reference();
    let mut cells = Vec::new();
    for (ci, (value, _)) in config.cells().iter().enumerate() {
        let mine: Vec<&EpisodeRecord> = records.iter().filter(|r| r.cell == ci).collect();
        let approaches: Vec<ApproachReport> = x
            .approaches
            .iter()
            .map(|&a| {
                let rows: Vec<&&EpisodeRecord> = mine.iter().filter(|r| r.approach == a).collect();
                let edr: Vec<f64> = rows.iter().map(|r| r.edr as f64).collect();
                let all: Vec<f64> = rows.iter().flat_map(|r| r.fidelities.iter().copied()).collect();
                ApproachReport {
                    approach: a,
                    summary: Summary::of(&edr),
                    fidelity_summary: Summary::of(&all),
                    fidelities: rows.iter().map(|r| r.fidelities.clone()).collect(),
                    edr,
                }
            })
            .collect();
        let mut tests = Vec::new();
        if let (Some(reference), true) = (reference, x.episodes >= 2) {
            let a = &approaches.iter().find(|r| r.approach == reference).expect("reference is validated").edr;
            let mut raw = Vec::new();
            for (k, other) in approaches.iter().enumerate().filter(|(_, r)| r.approach != reference) {
                let mut prng = rng::substream(x.seed, Stream::Permutation, (ci * 64 + k) as u64);
                let p = stats::permutation_test(a, &other.edr, x.permutations, &mut prng)?;
                let diff = a.iter().zip(&other.edr).map(|(p, q)| p - q).sum::<f64>() / a.len() as f64;
                raw.push((other.approach, diff, p));
            }
            let holm = stats::holm_bonferroni(&raw.iter().map(|t| t.2).collect::<Vec<_>>())?;
            tests = raw
                .into_iter()
                .zip(holm)
                .map(|((approach, mean_difference, p_value), p_holm)| TestResult {
                    reference,
                    approach,
                    mean_difference,
                    p_value,
                    p_holm,
                })
                .collect();
        }
        let topology_checksum = mine.first().map_or(0, |r| r.topology_checksum);
        cells.push(CellReport { value: *value, topology_checksum, approaches, tests });
    }
    Ok(ComparisonReport {
        seed: x.seed,
        topology_seed: x.topology_seed(),
        episodes: x.episodes,
        permutations: x.permutations,
        axis: x.sweep.as_ref().map(|s| s.axis.name().to_owned()),
        reference,
        cells,
    })
}

pub fn metrics_rows(config: &Config, records: &[EpisodeRecord]) -> Vec<MetricsRow> {
    let axis = config.experiment.sweep.as_ref().map(|s| s.axis.name().to_owned());
    records
        .iter()
        .map(|r| MetricsRow {
            cell: r.cell,
            axis: axis.clone(),
            value: r.value,
            approach: r.approach,
            episode: r.episode,
            episode_seed: r.episode_seed,
            topology_checksum: r.topology_checksum,
            edr: r.edr,
            requests: r.requests,
            failed: r.failed,
            mean_fidelity: (!r.fidelities.is_empty()).then(|| r.fidelities.iter().sum::<f64>() / r.fidelities.len() as f64),
        })
        .collect()
}
