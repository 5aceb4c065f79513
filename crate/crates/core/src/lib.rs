//! EPR criteria for spatially entangled photon pairs.
//!
//! The crate evaluates the variance-product and conditional-entropy EPR
//! inequalities for bipartite continuous-variable states. Inputs are either
//! analytic wavefunctions sampled on grids ([`states`]) or coincidence-count
//! tables ([`ingest`]), which [`simulate`] can generate from a state.
//!
//! Units: positions in mm, momenta (transverse wavenumbers) in mm⁻¹, entropies
//! in nats, with `[X, P] = i`.

pub mod criteria;
pub mod entropy;
pub mod grid;
pub mod ingest;
pub mod simulate;
pub mod states;
pub mod theory;
