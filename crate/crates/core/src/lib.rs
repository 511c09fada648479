//! Atomic selfish routing games whose edge costs mix affine congestion with
//! volume-discount pricing.
//!
//! - [`model`]: networks, commodities, scenario files, path enumeration.
//! - [`pricing`]: the price-function catalog and its discount properties.
//! - [`engine`]: costs, the potential function, equilibrium checks,
//!   best-response dynamics.
//! - [`oracle`]: exhaustive equilibria, optimum and price of anarchy.
//! - [`braess`]: the Braess network builders and edge-addition experiments.
//! - [`random`]: seeded random games for property sweeps.

pub mod braess;
pub mod engine;
pub mod model;
pub mod oracle;
pub mod pricing;
pub mod random;

pub use braess::{
    build_classic_braess, build_priced_braess, edge_addition_experiment, rho_formula, BraessPair,
    BraessReport, ExperimentConfig, Method,
};
pub use engine::{
    best_response, edge_loads, is_equilibrium, potential, run_best_response_dynamics, social_cost,
    unit_path_cost, DynamicsConfig, EdgeLoads, EquilibriumReport, Game, StrategyProfile,
};
pub use model::{parse_scenario, validate_instance, GameInstance, Scenario, ValidationReport};
pub use oracle::{find_all_equilibria, optimal_profile, price_of_anarchy, PoaReport, SearchConfig};
pub use pricing::{PriceFamily, PriceSpec};
