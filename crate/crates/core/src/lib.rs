//! Sampling plane trees from the Gibbs distribution `exp(-alpha*d0 - beta*d1) / Z`
//! with a Markov chain on 2-Motzkin paths, plus exhaustive small-instance
//! oracles for the chain's stationary law, spectrum and block decomposition.
//!
//! ```
//! use treesample_core::{Chain, ChainConfig, EnergyParams, PlaneTree};
//!
//! let cfg = ChainConfig::new(6, EnergyParams::new(-0.9, -1.8), 1);
//! let mut chain = Chain::new(&cfg).unwrap();
//! chain.advance(10_000);
//! let tree = PlaneTree::decode(&chain.state());
//! assert_eq!(tree.edge_count(), 7);
//! ```

pub mod chain;
pub mod decomposition;
pub mod energy;
pub mod error;
pub mod exact;
pub mod paths;
pub mod sparse;
pub mod spectral;
pub mod stats;
pub mod tree;

pub use chain::{neighbors, transition_probability, Chain, ChainConfig, Collector, MoveProbabilities, Sample};
pub use energy::{
    builtin_params, derive_params, gibbs_log_weight, parse_param_file, path_energy, tree_energy, EnergyParams,
    NntmParams, ParamSpec, BUILTIN_PARAM_SETS,
};
pub use error::{Error, Result};
pub use exact::{build_transition_model, gibbs_distribution, tv_decay_curve, tv_distance, StateIndex, TransitionModel};
pub use paths::{catalan, enumerate_paths, motzkin, validate, DyckPath, Symbol, SymbolCounts, TwoMotzkinPath};
pub use spectral::{spectral_gap, SpectralMethod, SpectralReport};
pub use tree::{decode, encode, path_degree_profile, DegreeProfile, PlaneTree};
