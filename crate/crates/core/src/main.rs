use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use cfbench::bench::{self, Experiment, ExperimentConfig, InstanceCap};
use cfbench::cell::{CellId, ModelId};
use cfbench::dataset::{format_value, ingest_oulad};
use cfbench::forest::write_model;
use cfbench::{Error, Result};

#[derive(Parser)]
#[command(name = "cfbench", version, about = "Counterfactual explanation benchmark for student-success forests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate raw OULAD logs into the weekly click-count frame.
    Ingest {
        /// Directory holding studentInfo.csv, studentVle.csv and vle.csv.
        #[arg(long)]
        raw: PathBuf,
        #[arg(long, default_value = "DDD")]
        course: String,
        #[arg(long, value_delimiter = ',', default_value = "2013J,2014J")]
        presentations: Vec<String>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one balancing × tuning model and print its test metrics.
    Train {
        #[command(flatten)]
        common: Common,
        /// `<balancing>:<tuning>`; a trailing `:<method>` is ignored.
        #[arg(long)]
        cell: String,
    },
    /// Explain one test instance with one method and print the changes.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cell: CellId,
        /// Test-set row; defaults to the first row predicted fail.
        #[arg(long)]
        instance: Option<usize>,
    },
    /// Run the configured grid (or a single cell).
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        max_instances: Option<usize>,
        /// Restrict the run to one cell.
        #[arg(long)]
        cell: Option<CellId>,
    },
    /// Rebuild the run-level tables from an existing run directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_file(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.run.master_seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.run.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn parse_model_id(s: &str) -> Result<ModelId> {
    let parts: Vec<&str> = s.split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(Error::InvalidArgument(format!(
            "expected <balancing>:<tuning>, got {s:?}"
        )));
    }
    Ok(ModelId {
        balancing: parts[0].parse().map_err(Error::InvalidArgument)?,
        tuning: parts[1].parse().map_err(Error::InvalidArgument)?,
    })
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest {
            raw,
            course,
            presentations,
            out,
        } => {
            let p: Vec<&str> = presentations.iter().map(String::as_str).collect();
            let frame = ingest_oulad(&raw, &course, &p)?;
            frame.write_csv(&out)?;
            println!("{}", serde_json::to_string_pretty(&frame.report).expect("report serialises"));
        }
        Command::Train { common, cell } => {
            let id = parse_model_id(&cell)?;
            let cfg = common.load()?;
            let out = cfg.run.output_dir.join("models");
            let exp = Experiment::prepare(cfg)?;
            let fitted = exp.fit(id)?;
            let metrics = exp.evaluate(&fitted.model)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            let path = out.join(format!("{}_{}.model", id.balancing, id.tuning));
            write_model(&fitted.model, &path)?;
            println!("model        {id}");
            println!("hyperparams  {}", fitted.model.hyperparams());
            println!("train rows   {}", fitted.pool.n_rows());
            println!("accuracy     {:.4}", metrics.accuracy);
            println!("auc          {:.4}", metrics.auc);
            println!("f1           {:.4}", metrics.f1);
            println!("saved        {}", path.display());
        }
        Command::Explain {
            common,
            cell,
            instance,
        } => {
            let exp = Experiment::prepare(common.load()?)?;
            let fitted = exp.fit(cell.model())?;
            let row = match instance {
                Some(r) => r,
                None => *exp
                    .predicted_fail_rows(&fitted.model)
                    .first()
                    .ok_or_else(|| Error::NoCounterfactual("no test row is predicted fail".into()))?,
            };
            let req = exp.request(&fitted.model, row)?;
            let cfs = exp.generate(cell, &fitted, &req)?;
            let names = exp.data.names();
            println!("{cell}: test row {row}, {} counterfactual(s)", cfs.len());
            for (k, cf) in cfs.iter().enumerate() {
                let p_pass = 1.0 - fitted.model.predict_proba(&cf.values)?;
                println!("\n#{k}  p(pass) = {p_pass:.3}");
                for (j, name) in names.iter().enumerate() {
                    if cf.values[j] != req.x[j] {
                        println!(
                            "  {name:<14} {:>10} -> {}",
                            format_value(req.x[j]),
                            format_value(cf.values[j])
                        );
                    }
                }
            }
        }
        Command::Run {
            common,
            max_instances,
            cell,
        } => {
            let mut cfg = common.load()?;
            if let Some(n) = max_instances {
                if n == 0 {
                    return Err(Error::InvalidArgument("--max-instances must be positive".into()));
                }
                cfg.run.max_explained_instances = InstanceCap::Limit(n);
            }
            if let Some(c) = cell {
                cfg.grid.balancing = vec![c.balancing];
                cfg.grid.tuning = vec![c.tuning];
                cfg.grid.methods = vec![c.method];
            }
            let manifest = bench::run(&cfg)?;
            println!(
                "{} of {} cells completed ({} computed now) in {:.1}s; results in {}",
                manifest.completed(),
                manifest.cells.len(),
                manifest.computed_cells.len(),
                manifest.wall_clock_seconds,
                cfg.run.output_dir.display()
            );
            for c in manifest.cells.iter().filter(|c| c.error.is_some()) {
                println!("failed: {} ({})", c.cell, c.error.as_deref().unwrap_or(""));
            }
        }
        Command::Report { out } => {
            let manifest = bench::report(&out)?;
            for a in &manifest.artifacts {
                println!("{}", out.join(a).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
