use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug, Clone, Serialize)]
#[command(
    name = "hpoly",
    version,
    about = "Cut polyhedra, Korányi ball coverings and boundary maps for Siegel-type domains",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GlobalOpts {
    /// Directory receiving all outputs and manifest.json.
    #[arg(long, global = true, default_value = "hpoly-out")]
    pub output_dir: PathBuf,
    /// Worker threads; 0 means one per logical core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Monte-Carlo sample budget; each command has its own default.
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Monte-Carlo volumes of cuts and Korányi balls against closed forms.
    Volumes(VolumesArgs),
    /// Horizontal power diagram of a ball configuration, with an SVG slice.
    Diagram(DiagramArgs),
    /// The polyhedron P_k: cut count, tile containment, coverage and gap.
    Tile(TileArgs),
    /// Closed-form gap bounds for P_k and the tiling constant.
    Bounds(BoundsArgs),
    /// Anneal a covering of the unit box by n balls.
    Optimize(OptimizeArgs),
    /// Lattice and optimized √n·gap for k = 1..k_max.
    Asymptotics(AsymptoticsArgs),
    /// Fefferman boundary integral.
    Fefferman(FeffermanArgs),
    /// Contact straightening checks and the local map onto the model.
    Darboux(DarbouxArgs),
    /// Model-domain demonstrations.
    Demo(DemoArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VolumesArgs {
    /// Cut sizes δ.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
    /// Korányi ball radii.
    #[arg(long, value_delimiter = ',')]
    pub rad: Vec<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DiagramArgs {
    /// Use the projected cuts of P_k.
    #[arg(long, conflicts_with = "config")]
    pub k: Option<u32>,
    /// JSON file holding a ball configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Height of the horizontal slice drawn in the SVG.
    #[arg(long, default_value_t = 0.5)]
    pub x2: f64,
    #[arg(long, default_value_t = 200)]
    pub pixels: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TileArgs {
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    /// Halton points for the coverage check.
    #[arg(long, default_value_t = 1 << 17)]
    pub cover_points: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BoundsArgs {
    #[arg(long, default_value_t = 2)]
    pub k: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OptimizerOpts {
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub restarts: Option<u32>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OptimizeArgs {
    #[arg(long, default_value_t = 24)]
    pub n: u64,
    #[command(flatten)]
    pub opt: OptimizerOpts,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AsymptoticsArgs {
    #[arg(long, default_value_t = 4)]
    pub k_max: u32,
    #[command(flatten)]
    pub opt: OptimizerOpts,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FeffermanArgs {
    #[command(subcommand)]
    pub domain: FeffermanDomain,
    /// Midpoint nodes per coordinate.
    #[arg(long, global = true, default_value_t = 48)]
    pub resolution: u32,
    /// Multiply the defining function by this constant.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeffermanDomain {
    /// The ball |z|² < R².
    Ball {
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    /// The boundary of S_λ over the unit box.
    Siegel {
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// A polynomial defining function read from JSON.
    Custom {
        #[arg(long)]
        file: PathBuf,
        /// Star centre x1,y1,x2,y2; without it the boundary is taken as a
        /// graph over the unit box.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Option<Vec<f64>>,
    },
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DarbouxArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub mu_re: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub mu_im: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub nu: f64,
    /// Radius of the region where the flow is built.
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    #[arg(long, default_value_t = 0.1)]
    pub probe_radius: f64,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    /// Polynomial defining function (JSON) for the composite map probe.
    #[arg(long)]
    pub rho_file: Option<PathBuf>,
    /// Boundary point x1,y1,x2,y2 for the composite map probe.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    pub theta_radius: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DemoArgs {
    #[command(subcommand)]
    pub demo: Demo,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadingArg {
    PerFactor,
    Literal,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Demo {
    /// n·vol(𝔻∖P_n) for the lemniscate domains.
    Lemniscate {
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        n: Vec<u32>,
        #[arg(long, value_enum, default_value_t = ReadingArg::PerFactor)]
        reading: ReadingArg,
        #[arg(long, default_value_t = 2000)]
        radial: u32,
        #[arg(long, default_value_t = 4000)]
        angular: u32,
        /// Also draw P_n and the sandwich circles for the largest n.
        #[arg(long)]
        svg: bool,
    },
    /// √n·gap for torus-grid cuts of the bidisc.
    Bidisc {
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
        m: Vec<u32>,
        /// δ(m) = c/m².
        #[arg(long, default_value_t = 2.0)]
        delta_constant: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Volumes(_) => "volumes",
            Command::Diagram(_) => "diagram",
            Command::Tile(_) => "tile",
            Command::Bounds(_) => "bounds",
            Command::Optimize(_) => "optimize",
            Command::Asymptotics(_) => "asymptotics",
            Command::Fefferman(_) => "fefferman",
            Command::Darboux(_) => "darboux",
            Command::Demo(d) => match d.demo {
                Demo::Lemniscate { .. } => "lemniscate",
                Demo::Bidisc { .. } => "bidisc",
            },
        }
    }
}
