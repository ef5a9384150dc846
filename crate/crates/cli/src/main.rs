use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use reshape_ot_cli::config::keys_help;
use reshape_ot_cli::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "reshape-ot", version, about = "Optimal transport with displacement-reshaped ground metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    #[command(after_help = keys_help())]
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--override trials=5` or `--override methods.0.alpha=100`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Rotating-moons transport error or domain adaptation.
    Moons(MoonsArgs),
    /// Flows between weekly snapshots of tracked individuals.
    Geo(GeoArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Classical,
    Sinkhorn,
    Reshape,
    ReshapeRng,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Linear,
    Rbf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MoonsTask {
    Transport,
    Da,
}

#[derive(Args)]
struct MethodArgs {
    #[arg(long, value_enum, default_value = "reshape")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "rbf")]
    kernel: KernelArg,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Entropic regularization for `--method sinkhorn`.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct MoonsArgs {
    /// Rotation angles in degrees (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "40")]
    rotation: Vec<f64>,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long = "n-disp", default_value_t = 40)]
    n_disp: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "transport")]
    task: MoonsTask,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GeoArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long = "guidance-ids")]
    guidance_ids: Option<PathBuf>,
    #[command(flatten)]
    method: MethodArgs,
    /// Inclusive ISO week range, `YYYY-Www,YYYY-Www`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    window: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn method_json(m: &MethodArgs, default_lambda: f64, default_alpha: f64) -> Value {
    let kernel = match m.kernel {
        KernelArg::Linear => "linear",
        KernelArg::Rbf => "rbf",
    };
    let guided = |kind: &str| {
        json!({
            "kind": kind,
            "kernel": kernel,
            "lambda": m.lambda.unwrap_or(default_lambda),
            "alpha": m.alpha.unwrap_or(default_alpha),
        })
    };
    match m.method {
        MethodArg::Classical => json!({"kind": "classical_exact"}),
        MethodArg::Sinkhorn => json!({"kind": "sinkhorn", "epsilon": m.epsilon.unwrap_or(0.01)}),
        MethodArg::Reshape => guided("reshape"),
        MethodArg::ReshapeRng => guided("reshape_rng"),
    }
}

fn config_of(command: Command) -> Result<ExperimentConfig, CliError> {
    match command {
        Command::Run { config, overrides } => ExperimentConfig::load(&config, &overrides),
        Command::Moons(a) => {
            let experiment = match a.task {
                MoonsTask::Transport => "moons_transport",
                MoonsTask::Da => "moons_da",
            };
            ExperimentConfig::from_value(json!({
                "experiment": experiment,
                "methods": [method_json(&a.method, 2.0, 1e4)],
                "n_displacements": a.n_disp,
                "rotations": a.rotation,
                "trials": a.trials,
                "base_seed": a.seed,
                "output_dir": a.out,
            }))
        }
        Command::Geo(a) => {
            let classical = json!({"kind": "classical_exact"});
            let chosen = method_json(&a.method, 1.0, 1e3);
            let methods = if chosen == classical { vec![classical] } else { vec![classical, chosen] };
            ExperimentConfig::from_value(json!({
                "experiment": "geo_flows",
                "methods": methods,
                "trials": 1,
                "base_seed": a.seed,
                "output_dir": a.out,
                "geo": {"data": a.data, "guidance_ids": a.guidance_ids, "window": a.window},
            }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = config_of(cli.command).and_then(|cfg| reshape_ot_cli::run(&cfg));
    match result {
        Ok((_, files)) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
