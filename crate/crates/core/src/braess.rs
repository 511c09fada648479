//! The four-node Braess network, with and without edge pricing, and the
//! edge-addition experiment that measures how much a zero-cost shortcut
//! worsens the equilibrium.
//!
//! Topology: `s -> v -> t` (top) and `s -> w -> t` (bottom), where `s->v` and
//! `w->t` are congestible (`a = 1, b = 0`) and `v->t`, `s->w` cost a constant 1.
//! The second instance of a pair adds the free shortcut `v -> w`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    player_costs, run_best_response_dynamics, DynamicsConfig, EngineError, Game, StrategyProfile,
};
use crate::model::{Commodity, Construction, EdgeSpec, GameInstance, NodeId, Scenario, MIXING_TOLERANCE};
use crate::oracle::{exhaustive, OracleError, SearchConfig};
use crate::pricing::{PriceError, PriceSpec};

#[derive(Debug, Error)]
pub enum BraessError {
    #[error("player count must be even and positive, got {0}")]
    PlayerCount(usize),
    #[error("mixing coefficients c1 = {c1}, c2 = {c2} must lie in [0, 1] and sum to 1")]
    Mixing { c1: f64, c2: f64 },
    #[error("unit price {0} outside [0, 1]")]
    UnitPrice(f64),
    #[error("the two instances do not share the same commodities")]
    CommoditiesDiffer,
    #[error("best-response dynamics did not converge within {0} moves")]
    NotConverged(usize),
    #[error("equilibrium cost before the edge addition is zero")]
    ZeroBaseline,
    #[error(transparent)]
    Price(#[from] PriceError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BraessPair {
    pub before: GameInstance,
    pub after: GameInstance,
}

struct Mixed {
    c1: f64,
    c2: f64,
    price: PriceSpec,
}

fn fixed(id: &str, from: &str, to: &str, b: f64) -> EdgeSpec {
    EdgeSpec {
        id: id.into(),
        from: NodeId::new(from),
        to: NodeId::new(to),
        a: 0.0,
        b,
        c1: 1.0,
        c2: 0.0,
        price: PriceSpec::Zero,
    }
}

fn congestible(id: &str, from: &str, to: &str, mix: &Mixed) -> EdgeSpec {
    EdgeSpec {
        a: 1.0,
        b: 0.0,
        c1: mix.c1,
        c2: mix.c2,
        price: mix.price,
        ..fixed(id, from, to, 0.0)
    }
}

fn build_pair(
    players: usize,
    mix: &Mixed,
    tag: impl Fn(bool) -> Construction,
) -> Result<BraessPair, BraessError> {
    if players == 0 || players % 2 == 1 {
        return Err(BraessError::PlayerCount(players));
    }
    let demand = 1.0 / players as f64;
    let commodities = (1..=players)
        .map(|i| Commodity {
            id: format!("p{i}"),
            source: NodeId::new("s"),
            sink: NodeId::new("t"),
            demand,
        })
        .collect();
    let base = Scenario {
        nodes: ["s", "v", "w", "t"].map(NodeId::new).to_vec(),
        edges: vec![
            congestible("sv", "s", "v", mix),
            fixed("vt", "v", "t", 1.0),
            fixed("sw", "s", "w", 1.0),
            congestible("wt", "w", "t", mix),
        ],
        commodities,
    };
    let mut before = GameInstance::from_scenario(base);
    before.construction = Some(tag(false));
    let mut after = before.clone();
    after.edges.push(fixed("vw", "v", "w", 0.0));
    after.construction = Some(tag(true));
    Ok(BraessPair { before, after })
}

/// Pure congestion: the original Braess network with `players` equal users
/// sharing one unit of flow.
pub fn build_classic_braess(players: usize) -> Result<BraessPair, BraessError> {
    let mix = Mixed {
        c1: 1.0,
        c2: 0.0,
        price: PriceSpec::Zero,
    };
    build_pair(players, &mix, |shortcut| Construction::Classic {
        players,
        shortcut,
    })
}

/// The Braess network where the congestible edges also charge `price`,
/// mixed as `c1 * congestion + c2 * unit price`. Constant and shortcut edges
/// stay unpriced. With `c2 = 0` the result is the classic network.
pub fn build_priced_braess(
    players: usize,
    price: PriceSpec,
    c1: f64,
    c2: f64,
) -> Result<BraessPair, BraessError> {
    check_mixing(c1, c2)?;
    price.check_params()?;
    // A price with no weight is no price; keeps c2 = 0 identical to classic.
    let edge_price = if c2 == 0.0 { PriceSpec::Zero } else { price };
    let mix = Mixed {
        c1,
        c2,
        price: edge_price,
    };
    build_pair(players, &mix, |shortcut| Construction::Priced {
        players,
        shortcut,
        price,
        c1,
        c2,
    })
}

fn check_mixing(c1: f64, c2: f64) -> Result<(), BraessError> {
    let in_range = |c: f64| (0.0..=1.0).contains(&c);
    if in_range(c1) && in_range(c2) && (c1 + c2 - 1.0).abs() <= MIXING_TOLERANCE {
        Ok(())
    } else {
        Err(BraessError::Mixing { c1, c2 })
    }
}

/// Closed-form severity of the paradox on the priced network:
/// `rho = 4 (c1 + c2 u) / (2 + c1 + 2 c2 u)`, where `u` is the unit price
/// each player pays on a congestible edge.
pub fn rho_formula(u: f64, c1: f64, c2: f64) -> Result<f64, BraessError> {
    if !(0.0..=1.0).contains(&u) {
        return Err(BraessError::UnitPrice(u));
    }
    check_mixing(c1, c2)?;
    Ok(4.0 * (c1 + c2 * u) / (2.0 + c1 + 2.0 * c2 * u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Worst equilibrium found by exhaustive enumeration.
    Oracle,
    /// Equilibrium reached by best-response dynamics.
    Dynamics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub search: SearchConfig,
    pub dynamics: DynamicsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            method: Method::Oracle,
            search: SearchConfig::default(),
            dynamics: DynamicsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BraessReport {
    pub method: Method,
    pub n_players: usize,
    pub price: Option<PriceSpec>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    /// Largest per-unit player cost at the equilibrium before the edge addition.
    pub before: f64,
    /// Same, after the edge addition.
    pub after: f64,
    pub rho: f64,
    pub formula_rho: Option<f64>,
    pub before_profile: StrategyProfile,
    pub after_profile: StrategyProfile,
}

/// Compares equilibrium costs before and after adding edges.
///
/// With [`Method::Oracle`] each side uses its worst equilibrium by social
/// cost. With [`Method::Dynamics`] the first instance starts from the greedy
/// profile, and the second starts from the first's equilibrium (players keep
/// their old routes when the new network still has them).
pub fn edge_addition_experiment(
    before: &GameInstance,
    after: &GameInstance,
    config: &ExperimentConfig,
) -> Result<BraessReport, BraessError> {
    if before.commodities != after.commodities {
        return Err(BraessError::CommoditiesDiffer);
    }
    let before_game = Game::with_path_cap(before.clone(), crate::model::DEFAULT_PATH_CAP)?;
    let after_game = Game::with_path_cap(after.clone(), crate::model::DEFAULT_PATH_CAP)?;

    let (before_profile, after_profile) = match config.method {
        Method::Oracle => (
            worst_equilibrium(&before_game, &config.search)?,
            worst_equilibrium(&after_game, &config.search)?,
        ),
        Method::Dynamics => {
            let first = settle(
                &before_game,
                StrategyProfile::greedy(&before_game),
                &config.dynamics,
            )?;
            let start = carry_over(&before_game, &after_game, &first)
                .unwrap_or_else(|| StrategyProfile::greedy(&after_game));
            let second = settle(&after_game, start, &config.dynamics)?;
            (first, second)
        }
    };

    let worst_cost =
        |game: &Game, profile: &StrategyProfile| player_costs(game, profile).into_iter().fold(0.0, f64::max);
    let before_cost = worst_cost(&before_game, &before_profile);
    let after_cost = worst_cost(&after_game, &after_profile);
    if before_cost == 0.0 {
        return Err(BraessError::ZeroBaseline);
    }

    let (price, c1, c2) = match before.construction {
        Some(Construction::Priced { price, c1, c2, .. }) => (Some(price), Some(c1), Some(c2)),
        Some(Construction::Classic { .. }) => (Some(PriceSpec::Zero), Some(1.0), Some(0.0)),
        None => (None, None, None),
    };

    Ok(BraessReport {
        method: config.method,
        n_players: before.commodities.len(),
        price,
        c1,
        c2,
        before: before_cost,
        after: after_cost,
        rho: after_cost / before_cost,
        formula_rho: predicted_rho(before, after)?,
        before_profile,
        after_profile,
    })
}

fn worst_equilibrium(game: &Game, search: &SearchConfig) -> Result<StrategyProfile, BraessError> {
    let result = exhaustive(game, search)?;
    let worst = result
        .worst_equilibrium()
        .ok_or(OracleError::NoEquilibrium(result.profile_count))?;
    Ok(worst.profile.clone())
}

fn settle(
    game: &Game,
    start: StrategyProfile,
    config: &DynamicsConfig,
) -> Result<StrategyProfile, BraessError> {
    let outcome = run_best_response_dynamics(game, start, config);
    if outcome.converged {
        Ok(outcome.profile)
    } else {
        Err(BraessError::NotConverged(config.max_moves))
    }
}

fn carry_over(from: &Game, to: &Game, profile: &StrategyProfile) -> Option<StrategyProfile> {
    let choice = profile
        .choice
        .iter()
        .enumerate()
        .map(|(player, &path)| {
            let ids = from.instance().path_edge_ids(from.path(player, path));
            to.paths(player)
                .iter()
                .position(|p| to.instance().path_edge_ids(p) == ids)
        })
        .collect::<Option<Vec<_>>>()?;
    Some(StrategyProfile::new(choice))
}

/// The closed form applies only to builder-made pairs with matching parameters.
fn predicted_rho(before: &GameInstance, after: &GameInstance) -> Result<Option<f64>, BraessError> {
    match (before.construction, after.construction) {
        (
            Some(Construction::Classic {
                players: n,
                shortcut: false,
            }),
            Some(Construction::Classic {
                players: m,
                shortcut: true,
            }),
        ) if n == m => Ok(Some(rho_formula(1.0, 1.0, 0.0)?)),
        (
            Some(Construction::Priced {
                players: n,
                shortcut: false,
                price,
                c1,
                c2,
            }),
            Some(Construction::Priced {
                players: m,
                shortcut: true,
                price: p,
                c1: d1,
                c2: d2,
            }),
        ) if n == m && price == p && c1 == d1 && c2 == d2 => {
            let u = price.eval_u(1.0 / n as f64)?;
            Ok(Some(rho_formula(u, c1, c2)?))
        }
        _ => Ok(None),
    }
}
