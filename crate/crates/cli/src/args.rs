use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "unirep",
    version,
    about = "Finite-truncation numerics for unitary representations of discrete groups"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Return probabilities, minimal averaged defect and spectral radius bounds.
    ProbeAmenability(Common),
    /// Search witnesses of a Gram target inside a representation.
    Contain(ContainArgs),
    /// Normalized Følner indicator with its exact defect.
    FolnerWitness(Common),
    /// Move targets of an extension into fresh regular copies.
    Transfer(Common),
    /// Projection-based independence of two tuples over an orbit closure.
    Nondividing(Common),
    /// Canonical base of a tuple over an orbit closure.
    CanonicalBase(Common),
    /// Finite approximation of a tuple over a small part of a closure.
    Superstable(Common),
    /// Amalgamate two finite-dimensional extensions of a common subrepresentation.
    Amalgamate(Common),
    /// Recompute the headline number of a report from its witness data.
    Verify(VerifyArgs),
}

/// Flags shared by every computing subcommand; they override the config's task block.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Workbench config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Report path; the report goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the estimator or closure trace as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Cayley-ball radius of the truncation.
    #[arg(long)]
    pub radius: Option<usize>,
    /// Tolerance of the search or of the independence test.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Følner defect or approximation budget.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Largest half-length `n` of the return-probability trace.
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Seed of the restart generator.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random restarts of the witness search.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Gauss–Newton steps per restart.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Walk length up to which return probabilities are exact rationals.
    #[arg(long)]
    pub exact_steps: Option<usize>,
    /// Largest Cayley ball to enumerate.
    #[arg(long)]
    pub cap_ball: Option<usize>,
    /// Largest closure or greedy subspace dimension.
    #[arg(long)]
    pub cap_closure_dim: Option<usize>,
    /// Largest random-walk support.
    #[arg(long)]
    pub cap_support: Option<usize>,
    /// Largest number of regular copies materialized.
    #[arg(long)]
    pub cap_copies: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ContainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Target file (JSON); overrides the config's `target` block.
    #[arg(long)]
    pub target: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Report written by one of the computing subcommands.
    pub report: PathBuf,
    /// Accepted deviation between the reported and the recomputed headline.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}
