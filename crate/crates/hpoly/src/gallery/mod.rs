//! Worked model examples: the lemniscate domains in the disc, the bidisc
//! with a torus grid of cuts, and the cut-nesting checks for peak functions
//! that agree up to a factor `1 ± ε`.

mod bidisc;
mod lemniscate;
mod nesting;
mod trend;

pub use bidisc::{bidisc_demo, bidisc_gap, f_bidisc, min_cut_value, BidiscReport, BidiscRow, BidiscScheme, BidiscSpec};
pub use lemniscate::{
    annulus_bounds, boundary_curve, gap_per_factor_radial, gap_polar, in_pn, inner_radius, lemniscate_demo,
    outer_radius, LemniscateReport, LemniscateRow, LemniscateSpec, Reading,
};
pub use nesting::{
    cut_nesting_check, delta_shrink_check, eps_hat, Counterexample, NestingReport, NestingSpec, ShrinkReport,
    ROUNDING_SLACK,
};
pub use trend::{tail_len, trend_verdict, TrendReport, Verdict, SLOPE_TOL};
