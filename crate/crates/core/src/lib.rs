//! Twin-field multi-party quantum key agreement: discrimination bounds,
//! asymptotic key rates, pulse-level simulation and network planning.

pub mod coherent;
pub mod discrimination;
pub mod error;
pub mod keyrate;
pub mod linalg;
pub mod network;
pub mod selftest;
pub mod sim;

pub use coherent::{basis_coeffs, correlated_mixture, signal_vector, CoherentBasisCoeffs, SignalSign};
pub use discrimination::{
    compose_error, discriminate, helstrom_error, qmin_pair_closed, qmin_triple_closed, ComposeMode,
    DiscriminationResult,
};
pub use error::{Error, Result};
pub use keyrate::{
    announcement_probability, asymptotic_rate, devetak_winter_rate, eve_conditional_state, eve_mixture, holevo,
    loss_povm, optimize_intensity, transmittance_from_distance, Announcement, ChannelParams, KeyRateResult, LossPovm,
};
pub use linalg::{
    binary_entropy, eigenvalues_hermitian, outer, trace_norm, von_neumann_entropy, HermitianOperator, ModeVector,
};
pub use network::{
    minimum_network, plan_network, plan_rates, reconcile_network, segment_tree, MuPolicy, NetworkPlan, PartyGraph,
    PartyId, Segment,
};
pub use sim::{
    calibrate_source_intensity, interfere_and_detect, reconcile_pair, run_session, sift_pair, DetectorModel, KeyBits,
    SessionConfig, SessionResult, SiftRole,
};
