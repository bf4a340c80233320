//! Ball coverings of the unit box: the `Σ_k` polyhedra `P_k`, the
//! covering lower bound, the subdivision map and an annealing search for
//! low-gap coverings.

mod anneal;
mod covering;
mod lattice;

pub use anneal::{asymptotics_harness, estimate_vn, HarnessRow, OptimizerConfig, VnResult};
pub use covering::{
    coverage_verify, lower_bound_check, lower_bound_exact, power_mean_check, wiener_subcover, CoverageReport,
    ExactLowerBound, LowerBoundReport,
};
pub use lattice::{
    build_pk, lkor_lower, lkor_upper, pk_configuration, pk_radius, pk_size, subdivide_scale,
    tile_containment, upper_bound_closed, TileContainment,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::heis::{HBox, KoranyiBall};
use crate::numerics::{Estimate, IntegrationSpec};
use crate::power_diagram::{gap_functional, HPowerDiagram};

/// A finite family of Korányi balls meant to cover `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallConfiguration {
    pub balls: Vec<KoranyiBall>,
    pub target: HBox,
}

impl BallConfiguration {
    pub fn new(balls: Vec<KoranyiBall>) -> Self {
        BallConfiguration {
            balls,
            target: HBox::unit(),
        }
    }

    /// `Σ r⁴`, compensated.
    pub fn radius4_sum(&self) -> f64 {
        crate::numerics::compensated_sum(self.balls.iter().map(|b| b.radius.powi(4)))
    }

    pub fn gap(&self, spec: &IntegrationSpec) -> Result<Estimate> {
        gap_functional(&HPowerDiagram::new(self.balls.clone())?, spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRecord {
    pub n: u64,
    pub gap: f64,
    pub gap_stderr: f64,
    pub sqrt_n_gap: f64,
}

impl AsymptoticRecord {
    pub fn new(n: u64, gap: Estimate) -> Self {
        AsymptoticRecord {
            n,
            gap: gap.value,
            gap_stderr: gap.stderr,
            sqrt_n_gap: (n as f64).sqrt() * gap.value,
        }
    }

    pub fn sqrt_n_stderr(&self) -> f64 {
        (self.n as f64).sqrt() * self.gap_stderr
    }
}
