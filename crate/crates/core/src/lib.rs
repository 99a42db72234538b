//! Branching random walk with stretched-exponential displacements: exact
//! simulation, centring/scaling numerics, rare-event tail estimators and the
//! limiting Cox cluster process, with the statistical checks tying them
//! together.

pub mod asymptotics;
pub mod cumulants;
pub mod displacement;
pub mod galton_watson;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod tail;

pub use asymptotics::{compute_scaling, rate_i, solve_d_n, solve_s_star, solve_tau_n, CentringScaling};
pub use cumulants::{kappa_for, CumulantTable};
pub use displacement::StdWeibullDisplacement;
pub use galton_watson::{ClusterLawCache, OffspringLaw};
pub use rng::{Stream, StreamKey};
pub use tail::{TailFunction, TailSpec, TailVariant};
