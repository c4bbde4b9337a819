//! Command line front end for the false base station detection workbench.
//!
//! `fbs pipeline --config <toml>` runs simulate -> extract -> train ->
//! evaluate in one go; the individual subcommands run single stages against
//! the same output directory. Exit codes: 0 success, 2 configuration error,
//! 3 missing dependency (an earlier stage's output), 4 numerical failure,
//! 5 i/o failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fbs_core::pipeline::{
    cmd_evaluate, cmd_extract, cmd_pipeline, cmd_report, cmd_simulate, cmd_train, PipelineConfig,
    PipelineError,
};
use fbs_core::sim::io::{write_reports_csv, write_topology_csv, ScenarioFile};
use fbs_core::sim::{build_topology, run_scenario, Scenario};

#[derive(Parser)]
#[command(name = "fbs", version, about = "Radio neighborhood simulation and false base station detection workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Pipeline configuration file (TOML). Missing keys take the standard
    /// 12-cell defaults.
    #[arg(long)]
    config: PathBuf,
    /// Override the target benign false positive rate.
    #[arg(long)]
    fpr: Option<f64>,
    /// Restrict to these detector:scheme pairs (e.g. adf:col).
    #[arg(long = "model", value_delimiter = ',')]
    models: Vec<String>,
}

impl ConfigArg {
    fn load(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(fpr) = self.fpr {
            cfg.target_fpr = fpr;
        }
        if !self.models.is_empty() {
            let specs: Result<Vec<_>, String> =
                self.models.iter().map(|m| m.parse()).collect();
            cfg.detectors = specs.map_err(PipelineError::Config)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one standalone scenario from a flat scenario file and write
    /// reports.csv + topology.csv.
    Simulate {
        /// Flat scenario file (TOML key-value).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for reports.csv and topology.csv.
        #[arg(long, default_value = "sim-out")]
        out: PathBuf,
        /// Override the scenario: "benign" or "attack:<pci>".
        #[arg(long)]
        scenario: Option<String>,
        /// Override the random seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate every pipeline scenario (benign training plus one attack and
    /// one validation run per configured false cell).
    SimulateAll(ConfigArg),
    /// Preprocess the logs, fit neighbor catalogs and write feature files.
    Extract(ConfigArg),
    /// Train one detector per serving cell and persist the models.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        /// Overwrite existing model files.
        #[arg(long)]
        force: bool,
    },
    /// Calibrate thresholds, score the attack runs and write the reports.
    Evaluate(ConfigArg),
    /// Regenerate plot-ready timelines and print a run summary.
    Report(ConfigArg),
    /// Run the whole pipeline in dependency order.
    Pipeline {
        #[command(flatten)]
        config: ConfigArg,
        /// Overwrite existing model files.
        #[arg(long)]
        force: bool,
    },
}

fn simulate_standalone(
    config: &PathBuf,
    out: &PathBuf,
    scenario: Option<&str>,
    seed: Option<u64>,
) -> Result<(), PipelineError> {
    let mut file = ScenarioFile::load(config)?;
    if let Some(spec) = scenario {
        match spec.split_once(':') {
            Some(("attack", pci)) => {
                file.scenario = "attack".into();
                file.attack_pci = Some(pci.parse().map_err(|_| {
                    PipelineError::Config(format!("bad attack pci in --scenario {spec:?}"))
                })?);
            }
            None if spec == "benign" => file.scenario = "benign".into(),
            _ => {
                return Err(PipelineError::Config(format!(
                    "--scenario must be benign or attack:<pci>, got {spec:?}"
                )))
            }
        }
    }
    if let Some(seed) = seed {
        file.seed = seed;
    }

    let sim_config = file.sim_config();
    let scenario = file.scenario()?;
    let reports = run_scenario(&sim_config, &scenario)?;
    let mut topology = build_topology(&sim_config.grid);
    if let Scenario::Attack {
        decommissioned_pci, ..
    } = &scenario
    {
        for cell in &mut topology {
            if cell.pci == *decommissioned_pci {
                cell.can_serve = false;
            }
        }
    }

    std::fs::create_dir_all(out)?;
    let reports_path = out.join("reports.csv");
    let mut buf = Vec::new();
    write_reports_csv(&mut buf, &reports, sim_config.max_neighbors_per_report)?;
    std::fs::write(&reports_path, buf)?;
    let mut buf = Vec::new();
    write_topology_csv(&mut buf, &topology)?;
    std::fs::write(out.join("topology.csv"), buf)?;
    log::info!(
        "wrote {} reports to {}",
        reports.len(),
        reports_path.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            scenario,
            seed,
        } => simulate_standalone(&config, &out, scenario.as_deref(), seed),
        Command::SimulateAll(arg) => cmd_simulate(&arg.load()?).map(|_| ()),
        Command::Extract(arg) => cmd_extract(&arg.load()?).map(|_| ()),
        Command::Train { config, force } => cmd_train(&config.load()?, force).map(|_| ()),
        Command::Evaluate(arg) => cmd_evaluate(&arg.load()?).map(|_| ()),
        Command::Report(arg) => {
            let summary = cmd_report(&arg.load()?)?;
            print!("{summary}");
            Ok(())
        }
        Command::Pipeline { config, force } => {
            let cfg = config.load()?;
            let outputs = cmd_pipeline(&cfg, force)?;
            println!(
                "pipeline finished in {:.1?}; reports under {}",
                outputs.elapsed,
                cfg.out_dir.join("reports").display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
