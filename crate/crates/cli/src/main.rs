mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nlo_core::gateway::GatewayError;
use nlo_core::generation::{FewShotError, GenerationError, Technique};
use nlo_core::maintenance::MaintenanceError;
use nlo_core::triage::TriageError;
use nlo_core::virtual_split::{DiffError, SplitError};
use nlo_core::workbench::SidecarError;
use nlo_core::OutlineError;

use config::BackendKind;

/// Natural-language outlines for source code.
#[derive(Debug, Parser)]
#[command(name = "nlo", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    /// Fixture store directory.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Provider label used in fixture keys.
    #[arg(long, global = true)]
    pub provider: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// HTTP endpoint; overrides the configured one.
    #[arg(long, global = true)]
    pub url: Option<String>,
    /// Ask the HTTP backend on fixture misses and record the answers.
    #[arg(long, global = true)]
    pub record: bool,
    /// Language profile name, instead of guessing from the file extension.
    #[arg(long, global = true)]
    pub profile: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TechniqueArg {
    Interleaved,
    Infilling,
}

impl From<TechniqueArg> for Technique {
    fn from(t: TechniqueArg) -> Self {
        match t {
            TechniqueArg::Interleaved => Technique::Interleaved,
            TechniqueArg::Infilling => Technique::Infilling,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitFormat {
    Terminal,
    Json,
    Html,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an outline for a function.
    Gen {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "interleaved")]
        technique: TechniqueArg,
        /// Check the response against the placement constraint.
        #[arg(long)]
        constrained: bool,
        /// Store the outline in the sidecar file.
        #[arg(long)]
        save: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
    /// Show the stored outline as star comments.
    Render {
        file: PathBuf,
        /// Write the star comments into the file.
        #[arg(long)]
        in_place: bool,
        /// Print only the outline, indented like the code.
        #[arg(long, conflicts_with = "in_place")]
        standalone: bool,
    },
    /// Read the star comments of a file.
    Extract {
        file: PathBuf,
        /// Remove the comments from the file and store them in the sidecar.
        #[arg(long)]
        in_place: bool,
    },
    /// Check that the stored outline still fits the file.
    Check { file: PathBuf },
    /// Let the model finish an edit to the code or its outline.
    Finish {
        file: PathBuf,
        /// Write the proposed version back.
        #[arg(long)]
        apply: bool,
    },
    /// Group the changes of a unified diff by topic.
    Split {
        diff: PathBuf,
        #[arg(long, default_value = "")]
        description: String,
        #[arg(long, conflicts_with = "description")]
        description_file: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "terminal")]
        format: SplitFormat,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Summarize, score and annotate suspicious functions.
    Triage {
        /// A file, or a directory of files.
        path: PathBuf,
        /// Wrap summary lines at this width.
        #[arg(long)]
        width: Option<usize>,
    },
    /// Count parse issues over a corpus directory.
    Eval {
        corpus: PathBuf,
        #[arg(long = "technique", value_enum)]
        techniques: Vec<TechniqueArg>,
        /// Evaluate each of these models; defaults to the configured one.
        #[arg(long = "eval-model")]
        models: Vec<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
    /// Inspect and fill the fixture store.
    Fixtures {
        #[command(subcommand)]
        action: FixturesAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum FixturesAction {
    List,
    Show { key: String },
    /// Requests that missed the store.
    Pending,
    /// Store a response for a pending request.
    Answer { key: String, response: PathBuf },
}

/// Ran to completion, but the result has a major problem.
#[derive(Debug)]
pub struct Reported;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<GatewayError>() {
            return 3;
        }
        let backend = matches!(cause.downcast_ref(), Some(GenerationError::Gateway(_)))
            || matches!(cause.downcast_ref(), Some(MaintenanceError::Gateway(_)))
            || matches!(cause.downcast_ref(), Some(SplitError::Gateway(_)))
            || matches!(cause.downcast_ref(), Some(TriageError::Gateway(_)));
        if backend {
            return 3;
        }
        let parse = cause.is::<OutlineError>()
            || cause.is::<DiffError>()
            || cause.is::<MaintenanceError>()
            || cause.is::<SplitError>()
            || matches!(cause.downcast_ref(), Some(FewShotError::Invalid { .. }))
            || matches!(
                cause.downcast_ref(),
                Some(SidecarError::Schema { .. } | SidecarError::Version { .. } | SidecarError::Invalid(_))
            );
        if parse {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Reported)) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
