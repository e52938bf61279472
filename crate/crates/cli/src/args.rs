use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "odecheck", version, about = "Goodness-of-fit tests for ODE models observed with noise")]
pub struct Cli {
    /// Worker threads for simulations (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Run TM, IM and GM tests on a data file.
    Test(TestArgs),
    /// Estimate parameters by NLS or two-step collocation.
    Estimate(EstimateArgs),
    /// Monte Carlo size and power study.
    Simulate(SimulateArgs),
    /// Residual ratio check for trajectory perturbations X + delta L.
    VerifyLocalAlt(LocalAltArgs),
    /// Show registered models.
    Registry(RegistryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutFormat {
    Json,
    Tsv,
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    pub format: OutFormat,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    /// Registry key (see `registry --list`).
    #[arg(long)]
    pub model: String,
    /// Timescale multiplying the right-hand side.
    #[arg(long, default_value_t = 10.0)]
    pub tau: f64,
    /// Forcing curve CSV (`t,value`) for the T-cell model.
    #[arg(long)]
    pub forcing: Option<PathBuf>,
    /// Initial state at the start of the span; defaults to the registry value.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// First optimizer start; defaults to the registry parameter.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub initial: Option<Vec<f64>>,
    /// Time span `a,b`; defaults to the registry span when it covers the data.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    pub span: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TestChoice {
    Tm,
    Im,
    Gm,
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct TestArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// CSV with header `t,y1,...,yp`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "test", value_enum, default_value_t = TestChoice::All)]
    pub test: TestChoice,
    /// One-based components for IM/GM (comma separated); all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub component: Option<Vec<usize>>,
    /// Use this parameter instead of estimating it.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optimizer starts.
    #[arg(long, default_value_t = 8)]
    pub multistart: usize,
    /// Test bandwidth for TM/IM/GM (each test's default when omitted).
    #[arg(long)]
    pub h: Option<f64>,
    /// State smoothing bandwidth.
    #[arg(long)]
    pub h0: Option<f64>,
    /// Derivative smoothing bandwidth (GM).
    #[arg(long)]
    pub h1: Option<f64>,
    /// Collocation smoothing bandwidth.
    #[arg(long = "h-e")]
    pub h_e: Option<f64>,
    /// Collocation grid size.
    #[arg(long)]
    pub m: Option<usize>,
    /// GM bias gain; 1 for the linear system and 0.2 otherwise.
    #[arg(long)]
    pub c: Option<f64>,
    /// IM sub-intervals.
    #[arg(long = "n-l", default_value_t = 8)]
    pub n_l: usize,
    /// Collocation weight ramp width.
    #[arg(long = "delta-w", default_value_t = 0.1)]
    pub delta_w: f64,
    /// Unadjusted IM statistic over the whole span.
    #[arg(long)]
    pub im_plain: bool,
    /// Write `t, y, smoothed X` rows for plotting.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Nls,
    Twostep,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodChoice::Nls)]
    pub method: MethodChoice,
    /// One-based component matched by the two-step method.
    #[arg(long, default_value_t = 1)]
    pub component: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub multistart: usize,
    #[arg(long = "h-e")]
    pub h_e: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long = "delta-w", default_value_t = 0.1)]
    pub delta_w: f64,
    /// Write the fitted trajectory `(t, X1..Xp)` for plotting.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
    /// Rows in the plot-data file.
    #[arg(long, default_value_t = 201)]
    pub plot_points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AltChoice {
    Trajectory,
    Derivative,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// 1 = linear, 2 = FitzHugh-Nagumo, 3 = Lotka-Volterra.
    #[arg(long)]
    pub study: u8,
    /// Disturbance family of study 1: h11, h12 or h13.
    #[arg(long, default_value = "h11")]
    pub variant: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    #[arg(long, default_value_t = 10.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tests to run, e.g. `tm,im1,gm2`; all five when omitted.
    #[arg(long, value_delimiter = ',')]
    pub tests: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Use the true parameter instead of estimating it.
    #[arg(long)]
    pub oracle_theta: bool,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub multistart: usize,
    /// Local alternative family.
    #[arg(long, value_enum)]
    pub local_alt: Option<AltChoice>,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// One-based components carrying the local perturbation.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub alt_components: Vec<usize>,
    #[arg(long)]
    pub keep_replications: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct LocalAltArgs {
    /// study1, fhn or lotka-volterra.
    #[arg(long, default_value = "study1")]
    pub model: String,
    #[arg(long, default_value_t = 10.0)]
    pub tau: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.001,0.0001")]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = 201)]
    pub grid_points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct RegistryArgs {
    /// Print every key with a short description.
    #[arg(long)]
    pub list: bool,
    /// Print one entry as JSON.
    #[arg(long)]
    pub show: Option<String>,
}
