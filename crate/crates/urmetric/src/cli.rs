//! Command-line front end: canonical-format parsing, dispatch to every
//! operation, deterministic output.
//!
//! Exit codes: 0 on success, 1 on domain errors (rendered with their
//! witnesses on the diagnostic stream), 2 on usage errors.  All
//! randomness flows through the single seeded generator, so identical
//! invocations produce identical bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::amalgam::{amalgamated_union, AmalgamError, AmalgamSpec, NamingPolicy};
use crate::builder::{Approximant, BuilderError, EmbedMode};
use crate::dap::{dap_construct, dap_verify, DapError, DapInstance};
use crate::generator::{enumerate_spaces, random_space, GenerateError};
use crate::grid::{DistanceGrid, GridParameterError};
use crate::io::{
    parse_families, parse_katetov, parse_pairs, parse_space, parse_weights, serialize_pairs,
    serialize_sidecar, serialize_space, FormatError,
};
use crate::katetov::{one_point_extension, KatetovError};
use crate::Rational;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Format(#[from] FormatError<Rational>),
    #[error(transparent)]
    Katetov(#[from] KatetovError<Rational>),
    #[error(transparent)]
    Amalgam(#[from] AmalgamError<Rational>),
    #[error(transparent)]
    Builder(#[from] BuilderError<Rational>),
    #[error(transparent)]
    Dap(#[from] DapError<Rational>),
    #[error(transparent)]
    Generate(#[from] GenerateError<Rational>),
    #[error(transparent)]
    Grid(#[from] GridParameterError),
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("some distance identities failed; see the report")]
    ChecksFailed,
}

#[derive(Parser)]
#[command(
    name = "urmetric",
    version,
    about = "Exact-arithmetic toolkit for finite metric spaces: validation, \
             one-point extensions, amalgams, saturated approximants, \
             back-and-forth isometries, and displacement verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Strict,
    Extending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Lines,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a space file holds a finite metric space.
    Validate {
        /// Space file to check.
        space: PathBuf,
    },
    /// Glue two spaces along identified points and write the union.
    Amalgamate {
        /// First space file; its labels win ties.
        space1: PathBuf,
        /// Second space file.
        space2: PathBuf,
        /// Pairs file identifying first-side with second-side labels.
        pairs: PathBuf,
        /// Write the glued space here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Adjoin one point with prescribed distances.
    ExtendPoint {
        /// Space file to extend.
        space: PathBuf,
        /// Prescription file ("label value" lines).
        prescription: PathBuf,
        /// Label for the new point.
        new_label: String,
        /// Write the extended space here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Embed a small space into an ambient one, extending an anchor.
    Embed {
        /// Space file to embed.
        inner: PathBuf,
        /// Ambient space file.
        ambient: PathBuf,
        /// Anchor pairs file (inner label, ambient label); empty if absent.
        #[arg(long)]
        anchor: Option<PathBuf>,
        /// strict reuses existing points only; extending may add points.
        #[arg(long, value_enum, default_value_t = ModeArg::Strict)]
        mode: ModeArg,
        /// Write the (possibly extended) ambient space here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Saturate an approximant from a single base point.
    BuildApproximant {
        /// Grid denominator q.
        #[arg(long, default_value_t = 1)]
        grid_q: u64,
        /// Grid maximal numerator B; the grid is {k/q : 1 <= k <= B}.
        #[arg(long, default_value_t = 1)]
        grid_max: u64,
        /// Saturation stage to reach.
        #[arg(long, default_value_t = 1)]
        stages: u32,
        /// Largest subset size to saturate over.
        #[arg(long, default_value_t = 1)]
        arity: usize,
        /// Point budget.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        /// Write the realization index sidecar here.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Write the approximant space here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a seeded random space over a grid.
    RandomSpace {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        grid_q: u64,
        #[arg(long, default_value_t = 3)]
        grid_max: u64,
        /// Number of points.
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List every space on n ordered points with grid distances.
    Enumerate {
        /// Number of points.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        grid_q: u64,
        #[arg(long, default_value_t = 1)]
        grid_max: u64,
        /// Stop after this many spaces.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Extend a partial self-isometry towards a total bijective one.
    BackAndForth {
        /// Space file.
        space: PathBuf,
        /// Seed pairs file (source label, target label).
        pairs: PathBuf,
        /// Matching steps to spend.
        #[arg(long, default_value_t = 10_000)]
        rounds: usize,
        /// Point budget.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        /// Write the (possibly extended) space here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the displacement construction and verify its identities.
    DapDemo {
        /// Ambient space file; without it a built-in demo instance runs.
        #[arg(requires = "families")]
        space: Option<PathBuf>,
        /// Families file (one label set per line).
        #[arg(requires = "weights")]
        families: Option<PathBuf>,
        /// Weights file ("label value" lines).
        #[arg(requires = "space")]
        weights: Option<PathBuf>,
        /// Report format: human text or stable machine lines.
        #[arg(long, value_enum, default_value_t = FormatArg::Lines)]
        format: FormatArg,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(output: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, content).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// A throwaway grid for approximants that only host embeddings.
fn unit_grid() -> DistanceGrid {
    DistanceGrid::new(1, 1).expect("positive parameters")
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { space } => {
            let s = parse_space::<Rational>(&read(&space)?)?;
            println!("valid metric space with {} points", s.len());
            Ok(())
        }
        Command::Amalgamate {
            space1,
            space2,
            pairs,
            output,
        } => {
            let m1 = parse_space::<Rational>(&read(&space1)?)?;
            let m2 = parse_space::<Rational>(&read(&space2)?)?;
            let pairs = parse_pairs::<Rational>(&read(&pairs)?)?;
            let spec = AmalgamSpec {
                m1: Arc::new(m1),
                m2: Arc::new(m2),
                pairs,
            };
            let glued = amalgamated_union(&spec, &NamingPolicy::default())?;
            emit(&output, &serialize_space(glued.space.as_ref())?)
        }
        Command::ExtendPoint {
            space,
            prescription,
            new_label,
            output,
        } => {
            let s = parse_space::<Rational>(&read(&space)?)?;
            let f = parse_katetov::<Rational>(&read(&prescription)?)?;
            let extended = one_point_extension(&s, &f, &new_label)?;
            emit(&output, &serialize_space(&extended)?)
        }
        Command::Embed {
            inner,
            ambient,
            anchor,
            mode,
            output,
        } => {
            let l = parse_space::<Rational>(&read(&inner)?)?;
            let m = parse_space::<Rational>(&read(&ambient)?)?;
            let anchor_pairs = match &anchor {
                Some(path) => parse_pairs::<Rational>(&read(path)?)?,
                None => Vec::new(),
            };
            let mode = match mode {
                ModeArg::Strict => EmbedMode::Strict,
                ModeArg::Extending => EmbedMode::Extending,
            };
            let mut appr = Approximant::from_space(m, unit_grid());
            let embedding = appr.embed_via_injectivity(&l, &anchor_pairs, mode)?;
            print!("{}", serialize_pairs::<Rational>(embedding.pairs())?);
            if let Some(path) = output {
                emit(&Some(path), &serialize_space(appr.space())?)?;
            }
            Ok(())
        }
        Command::BuildApproximant {
            grid_q,
            grid_max,
            stages,
            arity,
            budget,
            sidecar,
            output,
        } => {
            let grid = DistanceGrid::new(grid_q, grid_max)?;
            let mut appr: Approximant<Rational> =
                Approximant::new(grid).with_budget(budget);
            let result = appr.saturate(arity, stages);
            let mut content = String::new();
            if appr.budget_exceeded() {
                content.push_str(&format!(
                    "# partial: point budget {} exceeded\n",
                    appr.budget()
                ));
            }
            content.push_str(&serialize_space(appr.space())?);
            emit(&output, &content)?;
            if let Some(path) = sidecar {
                emit(&Some(path), &serialize_sidecar(appr.realization_index())?)?;
            }
            result?;
            Ok(())
        }
        Command::RandomSpace {
            seed,
            grid_q,
            grid_max,
            n,
            output,
        } => {
            let grid = DistanceGrid::new(grid_q, grid_max)?;
            let s: crate::FiniteMetricSpace<Rational> = random_space(n, &grid, seed)?;
            emit(&output, &serialize_space(&s)?)
        }
        Command::Enumerate {
            n,
            grid_q,
            grid_max,
            limit,
            output,
        } => {
            let grid = DistanceGrid::new(grid_q, grid_max)?;
            let spaces = enumerate_spaces::<Rational>(n, &grid, limit);
            let mut content = format!("# {} spaces\n", spaces.len());
            for s in &spaces {
                content.push('\n');
                content.push_str(&serialize_space(s)?);
            }
            emit(&output, &content)
        }
        Command::BackAndForth {
            space,
            pairs,
            rounds,
            budget,
            output,
        } => {
            let s = parse_space::<Rational>(&read(&space)?)?;
            let seed_pairs = parse_pairs::<Rational>(&read(&pairs)?)?;
            let mut appr = Approximant::from_space(s, unit_grid()).with_budget(budget);
            let iso = appr.back_and_forth(&seed_pairs, rounds)?;
            let total = iso.is_total_on_source() && iso.is_surjective_onto_target();
            print!(
                "# total: {}\n{}",
                if total { "yes" } else { "no" },
                serialize_pairs::<Rational>(iso.pairs())?
            );
            if let Some(path) = output {
                emit(&Some(path), &serialize_space(appr.space())?)?;
            }
            Ok(())
        }
        Command::DapDemo {
            space,
            families,
            weights,
            format,
            output,
        } => {
            let inst: DapInstance<Rational> = match (&space, &families, &weights) {
                (Some(s), Some(f), Some(w)) => {
                    let ambient = parse_space(&read(s)?)?;
                    let fams = parse_families::<Rational>(&read(f)?)?;
                    let h = parse_weights::<Rational>(&read(w)?)?;
                    DapInstance::new(ambient, fams, h)?
                }
                _ => built_in_demo_instance(),
            };
            let trace = dap_construct(&inst)?;
            let report = dap_verify(&trace);
            let content = match format {
                FormatArg::Lines => report.machine_lines(),
                FormatArg::Text => report.text(),
            };
            emit(&output, &content)?;
            if report.pass() {
                Ok(())
            } else {
                Err(CliError::ChecksFailed)
            }
        }
    }
}

/// Two singleton families over a one-point ambient space with unit
/// weight: the smallest instance whose report exercises every identity.
fn built_in_demo_instance() -> DapInstance<Rational> {
    let ambient = crate::FiniteMetricSpace::singleton("x");
    let mut h = BTreeMap::new();
    h.insert("x".to_string(), Rational::from_integer(1.into()));
    DapInstance::new(
        ambient,
        vec![vec!["x".to_string()], vec!["x".to_string()]],
        h,
    )
    .expect("the demo instance is valid")
}

/// Parses the command line and runs it; the process exit code follows the
/// documented convention.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
