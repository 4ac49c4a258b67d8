//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage/input/I-O errors, 3 singular Gram matrix
//! (from `check-basis`), 4 numerical failure.

mod io;
mod state;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::basis::ExponentSet;
use crate::cluster::{apply_membership_moves, kmeans_curves, ClusterState, HandleBank, KMeansConfig};
use crate::error::{Error, Result};
use crate::lsq::{centroid, group_objective, precompute_solver, solve_with_handle, SignalSet};
use crate::schur::{is_gram_invertible, GramCheck, DEFAULT_TOL};

pub use io::{assignments_csv, load_moves_csv, load_signals_csv, prototypes_csv};
pub use state::{ClusterRecord, StateFile, STATE_FORMAT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SINGULAR: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "protofit",
    version,
    about = "Least-squares curve prototypes and Schur-function basis checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Signal table: first column time, one column per signal.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,

    /// Comma-separated monomial exponents, e.g. "2,0".
    #[arg(long, global = true, default_value = "2,1,0")]
    pub basis: String,

    /// Number of clusters.
    #[arg(long, global = true, default_value_t = 2)]
    pub k: usize,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Zero threshold for Schur values and singular values.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    pub tol: f64,

    #[arg(long = "max-iter", global = true, default_value_t = 100)]
    pub max_iter: usize,

    /// Stop k-means once an iteration improves the objective by less than this.
    #[arg(long = "converge-tol", global = true, default_value_t = 1e-9)]
    pub converge_tol: f64,

    #[arg(long = "output-dir", global = true)]
    pub output_dir: Option<PathBuf>,

    /// CSV of `signal_index,from,to` moves for `update`.
    #[arg(long, global = true)]
    pub moves: Option<PathBuf>,

    /// State file written by `cluster` or `update`.
    #[arg(long, global = true)]
    pub state: Option<PathBuf>,

    /// Also rebuild the updated clustering from scratch and compare.
    #[arg(long = "verify-batch", global = true)]
    pub verify_batch: bool,

    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Decide whether the basis has an invertible Gram matrix on the input grid.
    CheckBasis,
    /// Fit one prototype to all signals.
    Fit,
    /// Cluster the signals with k-means.
    Cluster,
    /// Apply membership moves to a saved clustering.
    Update,
}

/// Validated settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub basis: ExponentSet,
    pub k: usize,
    pub kmeans: KMeansConfig,
    pub tol: f64,
    pub input: PathBuf,
    pub output_dir: Option<PathBuf>,
    pub moves: Option<PathBuf>,
    pub state: Option<PathBuf>,
    pub verify_batch: bool,
}

pub fn parse_basis(s: &str) -> Result<ExponentSet> {
    let degrees = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<u32>().map_err(|_| Error::Input(format!("invalid exponent '{p}'"))))
        .collect::<Result<Vec<u32>>>()?;
    ExponentSet::new(degrees)
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let input = cli.input.clone().ok_or_else(|| Error::Input("--input is required".into()))?;
        if cli.tol.is_nan() || cli.tol <= 0.0 {
            return Err(Error::Input("--tol must be positive".into()));
        }
        if cli.command != Command::CheckBasis && cli.output_dir.is_none() {
            return Err(Error::Input("--output-dir is required".into()));
        }
        if cli.command == Command::Update && (cli.state.is_none() || cli.moves.is_none()) {
            return Err(Error::Input("update needs --state and --moves".into()));
        }
        Ok(Self {
            command: cli.command,
            basis: parse_basis(&cli.basis)?,
            k: cli.k,
            kmeans: KMeansConfig {
                max_iter: cli.max_iter.max(1),
                seed: cli.seed,
                tol: cli.converge_tol,
            },
            tol: cli.tol,
            input,
            output_dir: cli.output_dir.clone(),
            moves: cli.moves.clone(),
            state: cli.state.clone(),
            verify_batch: cli.verify_batch,
        })
    }
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    if cli.threads > 0 {
        // fails only if a pool already exists, e.g. when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match RunConfig::from_cli(&cli).and_then(|cfg| execute(&cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cfg: &RunConfig) -> Result<i32> {
    match cfg.command {
        Command::CheckBasis => cmd_check_basis(cfg),
        Command::Fit => cmd_fit(cfg),
        Command::Cluster => cmd_cluster(cfg),
        Command::Update => cmd_update(cfg),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

pub fn cmd_check_basis(cfg: &RunConfig) -> Result<i32> {
    let (grid, _) = load_signals_csv(&cfg.input)?;
    let report = is_gram_invertible(&cfg.basis, &grid, &GramCheck::with_tol(cfg.tol))?;
    let handle = precompute_solver(&cfg.basis, &grid, cfg.tol)?;
    let out = json!({
        "basis": cfg.basis.exponents(),
        "partition": report.partition,
        "num_points": grid.len(),
        "invertible": report.invertible,
        "verdict": if report.invertible { "invertible" } else { "singular" },
        "certificate": report.certificate,
        "schur_value": report.schur_value,
        "decided_by": report.decided_by,
        "subsets_checked": report.subsets_checked,
        "solver_mode": handle.mode(),
        "rank": handle.rank(),
    });
    let text = pretty(&out);
    print!("{text}");
    if let Some(dir) = &cfg.output_dir {
        write(dir, "check.json", &text)?;
    }
    Ok(if report.invertible { EXIT_OK } else { EXIT_SINGULAR })
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<i32> {
    let (grid, signals) = load_signals_csv(&cfg.input)?;
    let handle = precompute_solver(&cfg.basis, &grid, cfg.tol)?;
    let prototype = solve_with_handle(&handle, &centroid(&signals))?;
    let objective = group_objective(&prototype, &signals);
    let dir = cfg.output_dir.as_deref().expect("validated");
    write(dir, "prototypes.csv", &prototypes_csv(std::slice::from_ref(&prototype)))?;
    let summary = pretty(&json!({
        "command": "fit",
        "basis": cfg.basis.exponents(),
        "num_points": grid.len(),
        "num_signals": signals.num_signals(),
        "objective": objective,
        "solver_mode": handle.mode(),
    }));
    write(dir, "summary.json", &summary)?;
    print!("{summary}");
    Ok(EXIT_OK)
}

fn write_clustering(dir: &Path, state: &ClusterState, cfg: &RunConfig, signals: &SignalSet) -> Result<()> {
    write(dir, "prototypes.csv", &prototypes_csv(&state.prototypes))?;
    write(dir, "assignments.csv", &assignments_csv(&state.assignments))?;
    write(
        dir,
        "state.json",
        &StateFile::from_state(state, &cfg.basis, signals.grid()).to_json(),
    )
}

pub fn cmd_cluster(cfg: &RunConfig) -> Result<i32> {
    let (grid, signals) = load_signals_csv(&cfg.input)?;
    let state = kmeans_curves(&signals, &cfg.basis, cfg.k, &cfg.kmeans)?;
    let handle = precompute_solver(&cfg.basis, &grid, cfg.tol)?;
    let dir = cfg.output_dir.as_deref().expect("validated");
    write_clustering(dir, &state, cfg, &signals)?;
    let summary = pretty(&json!({
        "command": "cluster",
        "basis": cfg.basis.exponents(),
        "clusters": state.num_clusters(),
        "num_signals": signals.num_signals(),
        "objective": state.objective,
        "iterations": state.iteration,
        "history": state.history,
        "solver_mode": handle.mode(),
    }));
    write(dir, "summary.json", &summary)?;
    print!("{summary}");
    Ok(EXIT_OK)
}

pub fn cmd_update(cfg: &RunConfig) -> Result<i32> {
    let (grid, signals) = load_signals_csv(&cfg.input)?;
    let state_path = cfg.state.as_deref().expect("validated");
    let text = fs::read_to_string(state_path).map_err(|e| Error::Io(format!("{}: {e}", state_path.display())))?;
    let file: StateFile = serde_json::from_str(&text)?;
    if file.basis != cfg.basis {
        return Err(Error::Input(format!(
            "state basis {} differs from --basis {}",
            file.basis, cfg.basis
        )));
    }
    let prior = file.into_state(&grid)?;
    let moves = load_moves_csv(cfg.moves.as_deref().expect("validated"))?;

    let handle = precompute_solver(&cfg.basis, &grid, cfg.tol)?;
    let mode = handle.mode();
    let k = prior.num_clusters();
    let bank = HandleBank::shared(handle, k);

    let started = Instant::now();
    let updated = apply_membership_moves(&prior, &signals, &moves, &bank)?;
    let incremental = started.elapsed().as_secs_f64();

    let mut summary = json!({
        "command": "update",
        "basis": cfg.basis.exponents(),
        "clusters": k,
        "moves_applied": moves.len(),
        "objective": updated.objective,
        "iterations": updated.iteration,
        "solver_mode": mode,
    });
    let mut timing = json!({ "incremental_seconds": incremental });

    if cfg.verify_batch {
        let started = Instant::now();
        let fresh = precompute_solver(&cfg.basis, &grid, cfg.tol)?;
        let batch = ClusterState::rebuild(&signals, &fresh, updated.assignments.clone(), k)?;
        timing["batch_seconds"] = json!(started.elapsed().as_secs_f64());
        summary["batch_objective"] = json!(batch.objective);
        summary["batch_max_abs_diff"] = json!(max_abs_diff(&updated, &batch));
    }

    let dir = cfg.output_dir.as_deref().expect("validated");
    write_clustering(dir, &updated, cfg, &signals)?;
    let summary = pretty(&summary);
    write(dir, "summary.json", &summary)?;
    write(dir, "timing.json", &pretty(&timing))?;
    print!("{summary}");
    Ok(EXIT_OK)
}

/// Largest deviation across centroids and coefficients.
fn max_abs_diff(a: &ClusterState, b: &ClusterState) -> f64 {
    let centroids = a
        .centroids
        .iter()
        .zip(&b.centroids)
        .flat_map(|(x, y)| x.values.iter().zip(&y.values));
    let coefs = a
        .prototypes
        .iter()
        .zip(&b.prototypes)
        .flat_map(|(x, y)| x.coefficients().iter().zip(y.coefficients()));
    centroids.chain(coefs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
