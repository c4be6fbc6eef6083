use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "curvlab", version, about = "Algebraic curvature tensors, curvature cones and the curvature ODE")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON file with default values for the subcommand's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (written atomically); stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Accept tensor files whose Bianchi projection residual is large.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a model tensor and write it as tensor JSON.
    Model(ModelArgs),
    /// Membership margin of a tensor in a cone.
    Membership(MembershipArgs),
    /// Integrate dR/dt = Q(R).
    Flow(FlowArgs),
    /// Statistical check that boundary points flow into the cone.
    Invariance(InvarianceArgs),
    /// Check scalar/Ricci positivity on boundary points (`iii`) or that I is interior (`iv`).
    ConditionCheck(ConditionArgs),
    /// Normalize an Einstein tensor and pinch it against a cone.
    Rigidity(RigidityArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Model(_) => "model",
            Self::Membership(_) => "membership",
            Self::Flow(_) => "flow",
            Self::Invariance(_) => "invariance",
            Self::ConditionCheck(_) => "condition-check",
            Self::Rigidity(_) => "rigidity",
        }
    }
}

// Every subcommand field is optional so that flags can be overlaid on a
// config file; defaults are applied after merging.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// constant, complex_space_form, product_spheres, random, random_einstein
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    /// Complex dimension for complex_space_form.
    #[arg(long)]
    pub m: Option<usize>,
    /// Comma-separated factor dimensions for product_spheres.
    #[arg(long)]
    pub dims: Option<String>,
    /// Comma-separated factor curvatures for product_spheres.
    #[arg(long, allow_negative_numbers = true)]
    pub curvatures: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SearchArgs {
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub step_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TensorArgs {
    /// Tensor JSON file.
    #[arg(long, conflicts_with = "model")]
    pub input: Option<PathBuf>,
    /// Model spec such as `constant:4:1` or `product_spheres:2,2:3,3`.
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct MembershipArgs {
    #[arg(long)]
    pub cone: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub tensor: TensorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct FlowArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub tensor: TensorArgs,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Fixed step, or initial step for rk4_adaptive.
    #[arg(long)]
    pub dt: Option<f64>,
    /// rk4_fixed or rk4_adaptive
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalized: Option<bool>,
    #[arg(long)]
    pub sample_every: Option<usize>,
    #[arg(long)]
    pub blowup_threshold: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Include every sampled tensor in the report, not just the last one.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub keep_tensors: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct InvarianceArgs {
    #[arg(long)]
    pub cone: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Iii,
    Iv,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ConditionArgs {
    #[arg(long)]
    pub cone: Option<String>,
    #[arg(long, value_enum)]
    pub which: Option<Which>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct RigidityArgs {
    #[arg(long)]
    pub cone: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub tensor: TensorArgs,
    /// Seed for the frame search and for random model specs without one.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
}
