//! Exhaustive ground truth for small games: every pure equilibrium, the
//! social optimum and the price of anarchy.
//!
//! Profiles are numbered by a mixed-radix counter over the players' path
//! indices, player 0 being the most significant digit. That number is the
//! tie-breaker everywhere. The index range is cut into fixed chunks which may
//! be evaluated on several threads; partial results are merged in chunk
//! order, so the output does not depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{social_cost, Deviation, Game, StrategyProfile, DEFAULT_EPSILON};
use crate::model::GameInstance;

pub const DEFAULT_PROFILE_CAP: u64 = 200_000;

/// Slack allowed above the `(3 + sqrt 5) / 2` bound.
pub const POA_SLACK: f64 = 1e-6;

const CHUNK: u64 = 4096;

/// Worst-case price of anarchy for affine congestion: `(3 + sqrt 5) / 2`.
pub fn poa_bound() -> f64 {
    (3.0 + 5f64.sqrt()) / 2.0
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("profile count exceeds 2^63")]
    Overflow,
    #[error("{count} profiles exceed the cap of {cap}")]
    CapExceeded { count: u64, cap: u64 },
    #[error("no pure equilibrium among {0} profiles")]
    NoEquilibrium(u64),
    #[error("could not start worker pool: {0}")]
    Workers(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub cap: u64,
    pub epsilon: f64,
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            cap: DEFAULT_PROFILE_CAP,
            epsilon: DEFAULT_EPSILON,
            workers: 1,
        }
    }
}

/// Product of the strategy-set sizes.
pub fn profile_count(game: &Game) -> Result<u64, OracleError> {
    let mut count: u64 = 1;
    for player in 0..game.players() {
        count = count
            .checked_mul(game.paths(player).len() as u64)
            .filter(|&c| c <= i64::MAX as u64)
            .ok_or(OracleError::Overflow)?;
    }
    Ok(count)
}

pub fn profile_at(game: &Game, mut index: u64) -> StrategyProfile {
    let mut choice = vec![0; game.players()];
    for player in (0..game.players()).rev() {
        let radix = game.paths(player).len() as u64;
        choice[player] = (index % radix) as usize;
        index /= radix;
    }
    StrategyProfile::new(choice)
}

pub fn profile_index(game: &Game, profile: &StrategyProfile) -> u64 {
    profile.choice.iter().enumerate().fold(0, |acc, (player, &c)| {
        acc * game.paths(player).len() as u64 + c as u64
    })
}

fn advance(game: &Game, profile: &mut StrategyProfile) {
    for player in (0..game.players()).rev() {
        profile.choice[player] += 1;
        if profile.choice[player] < game.paths(player).len() {
            return;
        }
        profile.choice[player] = 0;
    }
}

/// Equilibrium test written straight from the definition, independent of the
/// engine's incremental deviation costs: for every player and every other
/// path, the moved profile is built explicitly, its loads are recomputed from
/// scratch and the player's cost on the new path is read off those loads.
#[derive(Debug, Clone)]
pub struct DefinitionCheck<'a> {
    instance: &'a GameInstance,
    // unit_price[player][edge] = u_e(r_player), before mixing
    unit_price: Vec<Vec<f64>>,
}

impl<'a> DefinitionCheck<'a> {
    pub fn new(game: &'a Game) -> Self {
        let instance = game.instance();
        let unit_price = instance
            .commodities
            .iter()
            .map(|c| {
                instance
                    .edges
                    .iter()
                    .map(|e| e.price.eval_u(c.demand).expect("validated demand"))
                    .collect()
            })
            .collect();
        DefinitionCheck { instance, unit_price }
    }

    fn loads(&self, choice: &[usize]) -> Vec<f64> {
        let mut loads = vec![0.0; self.instance.edges.len()];
        for (player, &path) in choice.iter().enumerate() {
            for &e in self.instance.paths[player][path].edges() {
                loads[e] += self.instance.commodities[player].demand;
            }
        }
        loads
    }

    fn cost(&self, player: usize, path: usize, loads: &[f64]) -> f64 {
        self.instance.paths[player][path]
            .edges()
            .iter()
            .map(|&e| {
                let edge = &self.instance.edges[e];
                edge.c1 * (edge.a * loads[e] + edge.b) + edge.c2 * self.unit_price[player][e]
            })
            .sum()
    }

    /// First improving move in (player, path) order, if any.
    pub fn witness(&self, profile: &StrategyProfile, epsilon: f64) -> Option<Deviation> {
        let loads = self.loads(&profile.choice);
        let mut moved = profile.choice.clone();
        for (player, &current) in profile.choice.iter().enumerate() {
            let current_cost = self.cost(player, current, &loads);
            for candidate in 0..self.instance.paths[player].len() {
                if candidate == current {
                    continue;
                }
                moved[player] = candidate;
                let deviated_cost = self.cost(player, candidate, &self.loads(&moved));
                let improvement = current_cost - deviated_cost;
                if improvement > epsilon {
                    return Some(Deviation {
                        player,
                        from_path: current,
                        to_path: candidate,
                        deviated_cost,
                        improvement,
                    });
                }
            }
            moved[player] = current;
        }
        None
    }

    pub fn is_equilibrium(&self, profile: &StrategyProfile, epsilon: f64) -> bool {
        self.witness(profile, epsilon).is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedProfile {
    pub index: u64,
    pub profile: StrategyProfile,
    pub social_cost: f64,
}

/// Everything one exhaustive pass learns about a game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exhaustive {
    pub profile_count: u64,
    /// All pure equilibria in index order.
    pub equilibria: Vec<RankedProfile>,
    /// Minimum social cost, lowest index among ties.
    pub optimum: RankedProfile,
}

impl Exhaustive {
    /// Maximum social cost among equilibria, lowest index among ties.
    pub fn worst_equilibrium(&self) -> Option<&RankedProfile> {
        self.equilibria.iter().fold(None, |worst, eq| match worst {
            Some(w) if w.social_cost >= eq.social_cost => Some(w),
            _ => Some(eq),
        })
    }
}

#[derive(Default)]
struct Partial {
    equilibria: Vec<(u64, f64)>,
    optimum: Option<(u64, f64)>,
}

fn scan_range(game: &Game, check: &DefinitionCheck<'_>, start: u64, end: u64, epsilon: f64) -> Partial {
    let mut partial = Partial::default();
    let mut profile = profile_at(game, start);
    for index in start..end {
        let cost = social_cost(game, &profile);
        if partial.optimum.is_none_or(|(_, best)| cost < best) {
            partial.optimum = Some((index, cost));
        }
        if check.is_equilibrium(&profile, epsilon) {
            partial.equilibria.push((index, cost));
        }
        advance(game, &mut profile);
    }
    partial
}

/// Evaluates every profile once.
pub fn exhaustive(game: &Game, config: &SearchConfig) -> Result<Exhaustive, OracleError> {
    let count = profile_count(game)?;
    if count > config.cap {
        return Err(OracleError::CapExceeded {
            count,
            cap: config.cap,
        });
    }
    let check = DefinitionCheck::new(game);
    let chunks = count.div_ceil(CHUNK);
    let run = |chunk: u64| {
        let start = chunk * CHUNK;
        scan_range(game, &check, start, (start + CHUNK).min(count), config.epsilon)
    };
    let partials: Vec<Partial> = if config.workers <= 1 {
        (0..chunks).map(run).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| OracleError::Workers(e.to_string()))?
            .install(|| (0..chunks).into_par_iter().map(run).collect())
    };

    let mut equilibria = Vec::new();
    let mut optimum: Option<(u64, f64)> = None;
    for partial in partials {
        equilibria.extend(partial.equilibria);
        if let Some((index, cost)) = partial.optimum {
            if optimum.is_none_or(|(_, best)| cost < best) {
                optimum = Some((index, cost));
            }
        }
    }
    let ranked = |(index, social_cost): (u64, f64)| RankedProfile {
        index,
        profile: profile_at(game, index),
        social_cost,
    };
    Ok(Exhaustive {
        profile_count: count,
        equilibria: equilibria.into_iter().map(ranked).collect(),
        optimum: ranked(optimum.expect("at least one profile")),
    })
}

pub fn find_all_equilibria(game: &Game, config: &SearchConfig) -> Result<Vec<StrategyProfile>, OracleError> {
    Ok(exhaustive(game, config)?
        .equilibria
        .into_iter()
        .map(|eq| eq.profile)
        .collect())
}

pub fn optimal_profile(game: &Game, config: &SearchConfig) -> Result<(StrategyProfile, f64), OracleError> {
    let optimum = exhaustive(game, config)?.optimum;
    Ok((optimum.profile, optimum.social_cost))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoaReport {
    pub profile_count: u64,
    pub equilibrium_count: usize,
    pub optimal_profile: StrategyProfile,
    pub optimal_cost: f64,
    pub worst_equilibrium_profile: StrategyProfile,
    pub worst_equilibrium_cost: f64,
    pub poa: f64,
    pub bound: f64,
    pub within_bound: bool,
}

impl PoaReport {
    pub fn from_exhaustive(result: &Exhaustive) -> Result<Self, OracleError> {
        let worst = result
            .worst_equilibrium()
            .ok_or(OracleError::NoEquilibrium(result.profile_count))?;
        let optimum = &result.optimum;
        let poa = if optimum.social_cost == 0.0 {
            // Every equilibrium of a cost-free game is optimal.
            if worst.social_cost == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            worst.social_cost / optimum.social_cost
        };
        let bound = poa_bound();
        Ok(PoaReport {
            profile_count: result.profile_count,
            equilibrium_count: result.equilibria.len(),
            optimal_profile: optimum.profile.clone(),
            optimal_cost: optimum.social_cost,
            worst_equilibrium_profile: worst.profile.clone(),
            worst_equilibrium_cost: worst.social_cost,
            poa,
            bound,
            within_bound: poa <= bound + POA_SLACK,
        })
    }
}

pub fn price_of_anarchy(game: &Game, config: &SearchConfig) -> Result<PoaReport, OracleError> {
    PoaReport::from_exhaustive(&exhaustive(game, config)?)
}
