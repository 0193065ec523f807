use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use permreg::theory::VerifyOptions;
use permreg_cli::analysis::{self, AnalysisConfig, AnalysisMethod, ClusterMode};
use permreg_cli::input::ColumnSpec;
use permreg_cli::{simulate, to_json, verify, OutputFormat};

#[derive(Parser)]
#[command(name = "permreg", version, about = "Permutation tests for a treatment effect in linear regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test the treatment coefficient in `response ~ covariate + treatment`.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        response: String,
        #[arg(long)]
        covariate: String,
        #[arg(long)]
        treatment: String,
        /// Column of family labels for clustered subjects.
        #[arg(long)]
        family: Option<String>,
        /// Comma-separated: manly, draper-stoneman, freedman-lane, terbraak, ols, all.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        method: Vec<String>,
        #[arg(long, default_value_t = 2000)]
        permutations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ClusterMode::Auto)]
        cluster_mode: ClusterMode,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Estimate Type I error rates for the scenarios in a TOML file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Check the theoretical results numerically.
    Verify {
        #[arg(long, default_value_t = VerifyOptions::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = VerifyOptions::default().tolerance_rho)]
        tolerance_rho: f64,
        #[arg(long, default_value_t = VerifyOptions::default().tolerance_var)]
        tolerance_var: f64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
}

fn render(format: OutputFormat, json: String, text: impl FnOnce() -> String) -> String {
    match format {
        OutputFormat::Json => json,
        OutputFormat::Text => text(),
    }
}

fn run(cli: Cli) -> anyhow::Result<String> {
    Ok(match cli.command {
        Command::Analyze {
            input,
            response,
            covariate,
            treatment,
            family,
            method,
            permutations,
            seed,
            cluster_mode,
            format,
        } => {
            let config = AnalysisConfig {
                input_path: input,
                columns: ColumnSpec {
                    response,
                    covariate,
                    treatment,
                    family,
                },
                methods: AnalysisMethod::parse_list(&method).map_err(anyhow::Error::msg)?,
                cluster_mode,
                permutations,
                seed,
                output_format: format,
            };
            let report = analysis::run_analysis(&config)?;
            render(format, to_json(&report), || report.to_text())
        }
        Command::Simulate { config, format } => {
            let configs = simulate::load_sim_configs(&config)?;
            let report = simulate::run_simulation(configs);
            render(format, to_json(&report), || report.to_text())
        }
        Command::Verify {
            seed,
            tolerance_rho,
            tolerance_var,
            format,
        } => {
            let options = VerifyOptions {
                seed,
                tolerance_rho,
                tolerance_var,
                ..VerifyOptions::default()
            };
            let report = verify::run_verification(&options).context("verification could not run")?;
            render(format, to_json(&report), || verify::to_text(&report))
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
