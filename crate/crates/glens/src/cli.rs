use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use glens_core::stats::{AverageMode, TTestKind};

use crate::config::{Overrides, RunConfig};
use crate::error::Result;
use crate::mock::{MockConfig, MockMode};
use crate::pipeline::{self, DocKind, Outcome};

#[derive(Debug, Parser)]
#[command(name = "glens", version, about = "Evaluate localization hallucinations of GUI grounding models")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, env = "GLENS_CONFIG", value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "GLENS_SEED", value_name = "N")]
    pub seed: Option<u64>,
    /// Proximity threshold for biased and misleading responses.
    #[arg(long, global = true, env = "GLENS_TAU", value_name = "F")]
    pub tau: Option<f64>,
    /// Crop side as a fraction of the image side.
    #[arg(long, global = true, env = "GLENS_ALPHA", value_name = "F")]
    pub alpha: Option<f64>,
    /// Require model output to be exactly "[x, y]".
    #[arg(long, global = true, conflicts_with = "lenient_format")]
    pub strict_format: bool,
    /// Also accept "(x, y)" and bare "x, y" anywhere in the output.
    #[arg(long, global = true)]
    pub lenient_format: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate annotated icon scenes, their images and a tasks file.
    GenScenes {
        #[arg(long)]
        count: usize,
    },
    /// Check a JSONL stream or a scene manifest against its schema.
    Validate {
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: Option<DocKind>,
    },
    /// Assign a response category to every prediction.
    Classify {
        #[arg(long)]
        predictions: PathBuf,
        /// Directory written by gen-scenes.
        #[arg(long)]
        scenes: PathBuf,
    },
    /// Peak Sharpness Score and perplexity per prediction.
    Score {
        #[arg(long)]
        predictions: PathBuf,
        /// Classified records to attach the scores to.
        #[arg(long)]
        eval: Option<PathBuf>,
    },
    /// Plan crops around full-pass predictions and write second-pass tasks.
    CropPlan {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        /// Several crop fractions, each written to its own subdirectory.
        #[arg(long, value_delimiter = ',', value_name = "F,F,...")]
        sweep: Vec<f64>,
        /// Model to plan for when the log holds several.
        #[arg(long)]
        model: Option<String>,
    },
    /// Join crop-pass answers with their full-pass answers.
    Refine {
        #[arg(long)]
        full: PathBuf,
        #[arg(long)]
        crop: PathBuf,
    },
    /// Aggregate classified records into report tables.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        eval: Vec<PathBuf>,
        /// Accuracy-table columns, in order.
        #[arg(long, value_delimiter = ',')]
        splits: Vec<String>,
        #[arg(long, value_enum)]
        average: Option<Average>,
        #[arg(long, value_enum)]
        ttest: Option<TTest>,
    },
    /// Answer tasks with a deterministic mock model.
    Mock {
        #[arg(long)]
        tasks: PathBuf,
        /// Scene directory; defaults to the directory of the tasks file.
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// center, oracle, offset:D, distractor or mixed.
        #[arg(long, value_parser = clap::value_parser!(MockModeArg))]
        mode: MockModeArg,
        #[arg(long, default_value = "mock")]
        model: String,
        /// One-hot digit scores instead of a noisy bump.
        #[arg(long)]
        one_hot: bool,
        /// Output file name inside --out.
        #[arg(long, default_value = "predictions.jsonl")]
        file: String,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenScenes { .. } => "gen-scenes",
            Command::Validate { .. } => "validate",
            Command::Classify { .. } => "classify",
            Command::Score { .. } => "score",
            Command::CropPlan { .. } => "crop-plan",
            Command::Refine { .. } => "refine",
            Command::Report { .. } => "report",
            Command::Mock { .. } => "mock",
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum Average {
    Unweighted,
    Weighted,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TTest {
    Welch,
    Student,
}

#[derive(Debug, Clone, Copy)]
pub struct MockModeArg(pub MockMode);

impl std::str::FromStr for MockModeArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.parse().map(MockModeArg)
    }
}

impl GlobalArgs {
    pub fn overrides(&self) -> Overrides {
        let strict_format = match (self.strict_format, self.lenient_format) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        };
        Overrides { config: self.config.clone(), seed: self.seed, tau: self.tau, alpha: self.alpha, strict_format }
    }
}

fn report_outcome(what: &str, errs: &Outcome) {
    for e in errs {
        eprintln!("{e}");
    }
    if !errs.is_empty() {
        eprintln!("{what}: {} problem(s)", errs.len());
    }
}

fn execute(cli: Cli) -> Result<Outcome> {
    let mut cfg = RunConfig::load(&cli.global.overrides())?;
    let out = cli.global.out.as_path();
    match cli.command {
        Command::GenScenes { count } => pipeline::gen_scenes(&cfg, count, out),
        Command::Validate { input, kind } => {
            let (n, errs) = pipeline::validate(&input, kind, cfg.coordinate_format())?;
            for e in &errs {
                println!("{e}");
            }
            eprintln!("{}: {n} document(s), {} problem(s)", input.display(), errs.len());
            Ok(errs)
        }
        Command::Classify { predictions, scenes } => pipeline::classify(&predictions, &scenes, &cfg, out),
        Command::Score { predictions, eval } => pipeline::score(&predictions, eval.as_deref(), &cfg, out),
        Command::CropPlan { predictions, scenes, sweep, model } => {
            pipeline::crop_plan(&predictions, &scenes, &cfg, &sweep, model.as_deref(), out)
        }
        Command::Refine { full, crop } => pipeline::refine(&full, &crop, &cfg, out),
        Command::Report { eval, splits, average, ttest } => {
            if let Some(a) = average {
                cfg.average = match a {
                    Average::Unweighted => AverageMode::Unweighted,
                    Average::Weighted => AverageMode::Weighted,
                };
            }
            if let Some(t) = ttest {
                cfg.ttest = match t {
                    TTest::Welch => TTestKind::Welch,
                    TTest::Student => TTestKind::Student,
                };
            }
            pipeline::report(&eval, &cfg, &splits, out).map(|(_, errs)| errs)
        }
        Command::Mock { tasks, scenes, mode, model, one_hot, file } => {
            let scenes = scenes.unwrap_or_else(|| tasks.parent().map(Path::to_path_buf).unwrap_or_default());
            let mcfg = MockConfig { mode: mode.0, model_id: model, seed: cfg.seed, one_hot };
            pipeline::mock(&tasks, &scenes, &mcfg, &out.join(file))
        }
    }
}

/// Parse `args` (including the program name), run the command and return the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let name = cli.command.name();
    match execute(cli) {
        Ok(errs) if errs.is_empty() => 0,
        Ok(errs) => {
            if name != "validate" {
                report_outcome(name, &errs);
            }
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_1_and_help_exits_0() {
        assert_eq!(run(["glens", "frobnicate"]), 1);
        assert_eq!(run(["glens", "classify"]), 1);
        assert_eq!(run(["glens", "--help"]), 0);
        assert_eq!(run(["glens", "--version"]), 0);
    }

    #[test]
    fn global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["glens", "gen-scenes", "--count", "2", "--tau", "0.1", "--lenient-format"]).unwrap();
        let ov = cli.global.overrides();
        assert_eq!(ov.tau, Some(0.1));
        assert_eq!(ov.strict_format, Some(false));
    }
}
