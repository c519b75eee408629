use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dfls::lpv::jacobian_audit;
use dfls::nn::compare::{fit_elman, fit_mlp, score_elman, score_mlp, score_rbf};
use dfls::nn::rbf::{train_rbf, RbfModel};
use dfls::nn::{compare_models, Dataset};
use dfls::plant::Dfls;
use dfls::sim::{
    build_plant, compute_metrics, generate, load_or_train_rbf, read_trajectory_csv, run_scenario,
    write_error_series_csv, write_trajectory_csv, Config, ControllerKind,
};
use dfls::{Error, Result};

#[derive(Parser)]
#[command(name = "dfls", version, about = "Ducted fan lift system: identification and adaptive MPC")]
struct Cli {
    /// TOML configuration; built-in defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for data generation, training and measurement noise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Excite the plant and write the identification dataset.
    GenData,
    /// Train one network and save it.
    Train {
        #[arg(long, value_enum)]
        model: ModelKind,
        /// Dataset CSV; generated from the plant when absent.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train MLP, Elman and RBF on the same data and report validation MAPE.
    CompareModels {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the closed-loop scenario and write the trajectory CSV.
    Simulate {
        #[arg(long, value_parser = parse_kind)]
        controller: ControllerKind,
        /// Trained RBF file; trained on the fly when absent.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Compare the analytic network Jacobian with finite differences.
    CheckJacobian {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// Recompute metrics from a trajectory CSV and write the error series.
    Report {
        #[arg(long)]
        trajectory: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Mlp,
    Elman,
    Rbf,
}

fn parse_kind(s: &str) -> std::result::Result<ControllerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.scenario.out_dir = out.clone();
    }
    let seed = cfg.scenario.seed;
    let out = cfg.scenario.out_dir.clone();
    std::fs::create_dir_all(&out)?;
    let plant = build_plant(&cfg)?;

    match cli.command {
        Command::GenData => {
            let data = generate(&cfg, &plant, seed)?;
            let path = out.join("dataset.csv");
            data.write_csv(&path)?;
            println!("wrote {} samples to {}", data.len(), path.display());
        }
        Command::Train { model, data } => {
            let data = dataset(&cfg, &plant, seed, data.as_deref())?;
            let (score, path) = match model {
                ModelKind::Mlp => {
                    let (m, curve) = fit_mlp(&data, &cfg.training, seed)?;
                    let path = out.join("mlp.model");
                    m.save(&path)?;
                    (score_mlp(&m, &data, curve.last().copied().unwrap_or(f64::NAN)), path)
                }
                ModelKind::Elman => {
                    let (m, curve) = fit_elman(&data, &cfg.training, seed)?;
                    let path = out.join("elman.model");
                    m.save(&path)?;
                    (score_elman(&m, &data, curve.last().copied().unwrap_or(f64::NAN)), path)
                }
                ModelKind::Rbf => {
                    let m = train_rbf(&data, &cfg.training.rbf, seed)?;
                    let path = out.join("rbf.model");
                    m.save(&path)?;
                    (score_rbf(&m, &data), path)
                }
            };
            println!(
                "{}: validation MAPE torque {:.4} %  speed {:.4} %  afr {:.4} %  -> {}",
                score.name,
                score.mape[0],
                score.mape[1],
                score.mape[2],
                path.display()
            );
        }
        Command::CompareModels { data } => {
            let data = dataset(&cfg, &plant, seed, data.as_deref())?;
            let report = compare_models(&data, &cfg.training, seed)?;
            print!("{}", report.table());
            let path = out.join("model_errors.csv");
            report.write_errors_csv(&path)?;
            println!("wrote {}", path.display());
        }
        Command::Simulate { controller, model } => {
            if model.is_some() {
                cfg.scenario.model = model;
            }
            let rbf = match controller {
                ControllerKind::OpenLoop => None,
                _ => Some(load_or_train_rbf(&cfg, &plant, seed)?),
            };
            let run = run_scenario(&cfg, &plant, rbf.as_ref(), controller)?;
            let path = out.join(format!("trajectory_{}.csv", controller.name()));
            write_trajectory_csv(&run.records, &path)?;
            print!("{}", run.metrics.render(controller.name()));
            println!("wrote {}", path.display());
            if let Some(e) = run.failure {
                return Err(e);
            }
        }
        Command::CheckJacobian { model, points } => {
            let rbf = match model {
                Some(p) => RbfModel::load(&p)?,
                None => load_or_train_rbf(&cfg, &plant, seed)?,
            };
            let worst = jacobian_audit(&rbf, points, seed);
            println!("worst relative deviation over {points} points: {worst:.3e}");
            if worst > 1e-6 {
                return Err(Error::Solver(format!("Jacobian deviates from finite differences by {worst:e}")));
            }
        }
        Command::Report { trajectory } => {
            let records = read_trajectory_csv(&trajectory)?;
            let metrics = compute_metrics(&records, &cfg.scenario, &plant.bounds);
            print!("{}", metrics.render(&trajectory.display().to_string()));
            let path = out.join("error_series.csv");
            write_error_series_csv(&records, &cfg.scenario, &path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn dataset(cfg: &Config, plant: &Dfls, seed: u64, path: Option<&Path>) -> Result<Dataset> {
    match path {
        Some(p) => Dataset::read_csv(p, cfg.training.validation_stride),
        None => generate(cfg, plant, seed),
    }
}
