use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use log::LevelFilter;
use quadfield::quad::ValidationThresholds;
use quadfield_cli::{render, CliError, Pipeline, Stage};

#[derive(Parser)]
#[command(name = "quadfield", version, about = "Quadrilateral block decomposition and high-order quad meshing")]
struct Cli {
    /// More log output; repeat for more detail.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rerun one stage from the artifacts of the earlier ones.
    Stage {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        stage: Stage,
    },
    /// Check a quad mesh JSON file and print the report.
    Validate {
        #[arg(long)]
        mesh: PathBuf,
        /// Elements must have a scaled Jacobian above this.
        #[arg(long, default_value_t = 0.0)]
        min_scaled_jacobian: f64,
    },
    /// Draw a mesh, graph or geometry file as SVG.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config } => {
            let (_, timings) = Pipeline::load(&config)?.run()?;
            println!("pipeline finished in {:.3} s", timings.total());
        }
        Command::Stage { config, stage } => {
            let (_, timings) = Pipeline::load(&config)?.run_stage(stage)?;
            println!("stage {stage} finished in {:.3} s", timings.stages.get(&stage).copied().unwrap_or(0.0));
        }
        Command::Validate { mesh, min_scaled_jacobian } => {
            let thresholds = ValidationThresholds { min_scaled_jacobian, ..Default::default() };
            let report = render::validate_file(&mesh, &thresholds)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            if !report.passed {
                return Err(CliError::Invalid(report.failures.join("; ")));
            }
        }
        Command::Render { input, out } => render::render(&input, &out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => LevelFilter::Warn,
        (false, 0) => LevelFilter::Info,
        (false, 1) => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().format_timestamp(None).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
