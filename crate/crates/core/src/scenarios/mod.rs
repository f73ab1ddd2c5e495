//! Ready-made setups with closed-form reference values: a box cavity driven
//! by a gravitational wave, and particle creation in a 1+1 expanding torus.

pub mod flrw;
pub mod gw;

pub use flrw::{
    flrw_asymptote, flrw_run, flrw_time_grid, flrw_unconfined_limit, FlrwConfig, FlrwCurve, FlrwOutcome, TimeMap,
};
pub use gw::{gw_cavity_run, gw_nonperturbative, CavityBoundary, GwCavityConfig, GwOutcome, GwSample};
