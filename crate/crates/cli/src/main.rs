use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use disinfo_grid::harness::{self, sweep, ExperimentConfig};
use disinfo_grid::social_graph::generate_scale_free;
use disinfo_grid::{seed, Error};

#[derive(Parser, Debug)]
#[command(name = "disinfo-grid", version, about = "Disinformation-driven demand attack simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Experiment config (TOML). Built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write one scale-free network replicate as an edge list.
    GenNetwork {
        #[arg(long, default_value_t = 0)]
        replicate: u64,
    },
    /// Write the synthetic city used by the grid sweep as JSON.
    GenCity,
    /// Build feeder trees and write them with trial-0 capacities.
    BuildGrid,
    /// Run the diffusion experiment.
    Diffuse,
    /// Run the follow-through x EV-adoption blackout sweep.
    Sweep,
    /// Diffusion followed by a sweep at the resulting follow-through rates.
    EndToEnd,
    /// Write per-line status for one sweep cell.
    ExportLines {
        #[arg(long)]
        follow_rate: f64,
        #[arg(long)]
        ev_rate: f64,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// File name inside the output directory.
        #[arg(long, default_value = "line_status.csv")]
        file: String,
    },
}

fn load_config(g: &Global) -> Result<ExperimentConfig, Error> {
    let cwd = std::env::current_dir().map_err(|e| Error::Config(format!("current directory: {e}")))?;
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::from_toml("[diffusion]\n[grid]\n", &cwd)?,
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out = cwd.join(o);
    }
    if g.threads.is_some() {
        cfg.threads = g.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn out_file(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf, Error> {
    let dir = cfg.resolve(&cfg.out);
    std::fs::create_dir_all(&dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

fn run(cmd: &Command, cfg: &ExperimentConfig) -> Result<(), Error> {
    match cmd {
        Command::GenNetwork { replicate } => {
            let d = cfg.diffusion()?;
            let net = generate_scale_free(d.nodes, d.attachments, seed::derive(cfg.seed, "network", &[*replicate]))?;
            let path = out_file(cfg, &format!("network_{replicate}.edges"))?;
            net.write_edge_list(&path)?;
            report(&[path]);
        }
        Command::GenCity => {
            let city = sweep::load_city(cfg)?;
            let path = out_file(cfg, "city.json")?;
            city.write_json(&path)?;
            report(&[path]);
        }
        Command::BuildGrid => {
            let grid = harness::with_threads(cfg.threads, || -> Result<_, Error> {
                let grid = harness::load_grid(cfg)?;
                sweep::calibrated_grid(cfg, &grid)
            })??;
            let path = out_file(cfg, "feeders.csv")?;
            grid.write_csv(&path)?;
            println!("{} feeders, {} lines", grid.feeders.len(), grid.line_count());
            report(&[path]);
        }
        Command::Diffuse => {
            let (_, files) = harness::diffuse(cfg)?;
            report(&files);
        }
        Command::Sweep => {
            let (_, files) = harness::sweep(cfg)?;
            report(&files);
        }
        Command::EndToEnd => {
            let (_, files) = harness::end_to_end(cfg)?;
            report(&files);
        }
        Command::ExportLines { follow_rate, ev_rate, trial, file } => {
            let path = out_file(cfg, file)?;
            harness::with_threads(cfg.threads, || harness::export_line_status(cfg, *follow_rate, *ev_rate, *trial, &path))??;
            report(&[path]);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match load_config(&cli.global) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
