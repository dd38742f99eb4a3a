use std::path::PathBuf;

use attrkit::conformal::{simulate_coverage, ScoreDistribution, SimulationConfig};
use attrkit::jsonl;
use clap::{Args, ValueEnum};

use crate::errors::{log_event, CliError};

#[derive(Args)]
pub struct SimulateArgs {
    /// Destination for the coverage report.
    #[arg(long, env = "ATTRKIT_OUTPUT")]
    pub output: PathBuf,
    /// Tolerated miscoverage level.
    #[arg(long, env = "ATTRKIT_ALPHA", default_value_t = 0.1)]
    pub alpha: f64,
    /// Calibration draws per trial.
    #[arg(long, env = "ATTRKIT_N_CAL", default_value_t = 200)]
    pub n_cal: usize,
    /// Test draws per trial.
    #[arg(long, env = "ATTRKIT_N_TEST", default_value_t = 1000)]
    pub n_test: usize,
    #[arg(long, env = "ATTRKIT_TRIALS", default_value_t = 500)]
    pub trials: usize,
    /// Seed for the simulation stream.
    #[arg(long, env = "ATTRKIT_SEED")]
    pub seed: u64,
    /// Law of the synthetic ground-truth probabilities.
    #[arg(long, env = "ATTRKIT_DISTRIBUTION", value_enum, default_value_t = DistributionArg::Uniform)]
    pub distribution: DistributionArg,
    /// Shape parameter for the power law.
    #[arg(long, env = "ATTRKIT_GAMMA", default_value_t = 4.0)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistributionArg {
    Uniform,
    Power,
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let distribution = match args.distribution {
        DistributionArg::Uniform => ScoreDistribution::Uniform,
        DistributionArg::Power => ScoreDistribution::Power { gamma: args.gamma },
    };
    let report = simulate_coverage(&SimulationConfig {
        distribution,
        alpha: args.alpha,
        n_cal: args.n_cal,
        n_test: args.n_test,
        trials: args.trials,
        seed: args.seed,
    })?;
    let doc = serde_json::to_string_pretty(&report).expect("report serializes");
    jsonl::write_atomic(&args.output, doc.as_bytes())?;
    log_event(
        "simulate",
        serde_json::json!({
            "alpha": report.alpha,
            "trials": report.trials,
            "mean_coverage": report.mean_coverage,
            "std_coverage": report.std_coverage,
        }),
    );
    Ok(())
}
