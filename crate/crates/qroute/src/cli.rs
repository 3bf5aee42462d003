//! Command-line interface. Exit codes: 0 success, 2 configuration error,
//! 3 runtime failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use qroute_core::netsim::{generate_topology, World};

use crate::approach::Approach;
use crate::config::{Config, ConfigError};
use crate::experiment::{self, ExperimentError, Outcome};
use crate::{linkbudget, output};

#[derive(Debug, Parser)]
#[command(name = "qroute", version, about = "Entanglement routing on satellite-assisted quantum networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the topology and its line graph.
    Gen(Common),
    /// Train the learned router and write a checkpoint.
    Train(Common),
    /// Evaluate one approach.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "learned")]
        approach: Approach,
    },
    /// Evaluate every configured approach over the sweep and test the differences.
    Compare(Common),
    /// Print link success probabilities for parameter sweeps.
    Linkbudget(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config file; defaults apply to anything it leaves out.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Checkpoint to read (eval, compare) or write (train).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Overrides `experiment.episodes`.
    #[arg(long)]
    pub episodes: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Runtime(#[from] ExperimentError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl Common {
    fn config(&self) -> Result<Config, CliError> {
        let mut c = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(s) = self.seed {
            c.experiment.seed = s;
        }
        if let Some(n) = self.episodes {
            c.experiment.episodes = n;
        }
        c.validate()?;
        Ok(c)
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        std::fs::create_dir_all(&self.out).map_err(ExperimentError::from)?;
        Ok(&self.out)
    }
}

pub fn main_with(cli: Cli) -> ExitCode {
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(c) => gen(&c),
        Command::Train(c) => train(&c),
        Command::Eval { common, approach } => {
            let mut config = common.config()?;
            config.experiment.approaches = vec![approach];
            config.experiment.reference = None;
            config.experiment.sweep = None;
            evaluate(&common, config)
        }
        Command::Compare(c) => {
            let config = c.config()?;
            evaluate(&c, config)
        }
        Command::Linkbudget(c) => budget(&c),
    }
}

fn gen(c: &Common) -> Result<(), CliError> {
    let config = c.config()?;
    let out = c.out_dir()?;
    let spec = Arc::new(config.scenario.clone());
    let topology = Arc::new(generate_topology(&spec, config.experiment.topology_seed()).map_err(ExperimentError::from)?);
    let world = World::cold(Arc::clone(&spec), Arc::clone(&topology), config.experiment.seed).map_err(ExperimentError::from)?;
    output::write_json(&out.join("topology.json"), &*topology)?;
    std::fs::write(out.join("line_graph.txt"), world.line_graph().to_edge_list()).map_err(ExperimentError::from)?;
    println!(
        "{} nodes, {} edges, checksum {:016x}; line graph at t=0: {} nodes, {} arcs",
        topology.nodes.len(),
        topology.edges.len(),
        topology.checksum(),
        world.line_graph().node_count(),
        world.line_graph().arc_count()
    );
    Ok(())
}

fn train(c: &Common) -> Result<(), CliError> {
    let config = c.config()?;
    let out = c.out_dir()?;
    let ckpt = c.checkpoint.clone().unwrap_or_else(|| out.join("model.ckpt"));
    let (_, log) = experiment::train(&config, Some(&ckpt), |r, t| {
        eprintln!(
            "episode {:>4} step {:>7} eps {:.3} loss {:.5} edr {:>3} buffer {}",
            r.episode,
            r.step,
            r.epsilon,
            r.loss,
            r.train_edr,
            t.buffer().len()
        );
    })?;
    output::write_train_log(&out.join("train_log.csv"), &log)?;
    println!("wrote {}", ckpt.display());
    Ok(())
}

fn evaluate(c: &Common, mut config: Config) -> Result<(), CliError> {
    let out = c.out_dir()?;
    if c.checkpoint.is_some() {
        config.experiment.checkpoint = c.checkpoint.clone();
    }
    let params = if config.experiment.approaches.contains(&Approach::Learned) {
        let (params, log) = experiment::learned_params(&config, |r, _| {
            eprintln!("training episode {:>4} step {:>7} eps {:.3} edr {:>3}", r.episode, r.step, r.epsilon, r.train_edr);
        })?;
        if let Some(log) = log {
            output::write_train_log(&out.join("train_log.csv"), &log)?;
            crate::checkpoint::save(&out.join("model.ckpt"), &params).map_err(|source| {
                ExperimentError::Checkpoint { path: out.join("model.ckpt").display().to_string(), source }
            })?;
        }
        Some(params)
    } else {
        None
    };
    let outcome = experiment::run(&config, params)?;
    write_outcome(out, &config, &outcome)?;
    print_summary(&outcome);
    Ok(())
}

pub fn write_outcome(out: &Path, config: &Config, outcome: &Outcome) -> Result<(), ExperimentError> {
    output::write_metrics(&out.join("metrics.csv"), &experiment::metrics_rows(config, &outcome.records))?;
    output::write_json(&out.join("report.json"), &outcome.report)?;
    output::write_events(&out.join("events.ndjson"), &outcome.records)
}

fn print_summary(outcome: &Outcome) {
    let r = &outcome.report;
    for cell in &r.cells {
        if let (Some(axis), Some(v)) = (&r.axis, cell.value) {
            println!("{axis} = {v}");
        }
        for a in &cell.approaches {
            let s = &a.summary;
            print!("  {:<20} edr mean {:>7.2} median {:>6.1} [{:.1}, {:.1}]", a.approach.name(), s.mean, s.median, s.q25, s.q75);
            if let Some(t) = cell.test(a.approach) {
                print!("  p {:.5} holm {:.5}", t.p_value, t.p_holm);
            }
            println!();
        }
    }
}

fn budget(c: &Common) -> Result<(), CliError> {
    let config = c.config()?;
    let rows = linkbudget::table(&config.scenario);
    let mut so = std::io::stdout().lock();
    // A closed pipe (e.g. `| head`) just ends the listing.
    let _ = (|| -> std::io::Result<()> {
        writeln!(so, "link,parameter,value,elevation_deg,distance_km,p_photon,p_step")?;
        for r in &rows {
            let el = r.elevation_deg.map_or(String::new(), |e| e.to_string());
            writeln!(so, "{},{},{},{},{:.1},{:.4e},{:.4}", r.link, r.parameter, r.value, el, r.distance_km, r.p_photon, r.p_step)?;
        }
        Ok(())
    })();
    if c.config.is_some() || c.out != Path::new("out") {
        output::write_csv(&c.out_dir()?.join("linkbudget.csv"), &rows)?;
    }
    Ok(())
}
