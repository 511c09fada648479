//! Flow evaluation, the potential function, equilibrium checks and
//! best-response dynamics.
//!
//! Player `i` pays, per unit of its demand `r_i`, the sum over the edges of
//! its path of `c1 * (a * f_e + b) + c2 * u_e(r_i)`, where `f_e` is the total
//! load on the edge. When a player considers another path, the cost of that
//! path is taken at the loads that would result from moving, i.e. edges it
//! would newly enter carry `f_e + r_i`.
//!
//! With affine congestion the game has the exact potential
//!
//! ```text
//! Phi = sum_e [ c1 * ( c_e(f_e) f_e + sum_{i on e} c_e(r_i) r_i )
//!             + 2 c2 * sum_{i on e} u_e(r_i) r_i ]
//! ```
//!
//! and any unilateral move of player `i` changes `Phi` by exactly
//! `2 r_i` times the change of that player's unit cost, so improving moves
//! strictly decrease it.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_instance, GameInstance, ModelError, Path, DEFAULT_PATH_CAP};
use crate::pricing::PriceError;

/// Strictness threshold for "strictly better" path switches.
pub const DEFAULT_EPSILON: f64 = 1e-9;
pub const DEFAULT_MAX_MOVES: usize = 100_000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Price(#[from] PriceError),
    #[error("profile does not fit the instance: {0}")]
    BadProfile(String),
}

/// A validated instance with enumerated strategy sets and cached price terms.
#[derive(Debug, Clone)]
pub struct Game {
    instance: GameInstance,
    // price_terms[player][edge] = c2_e * u_e(r_player)
    price_terms: Vec<Vec<f64>>,
}

impl Game {
    pub fn new(instance: GameInstance) -> Result<Self, EngineError> {
        Self::with_path_cap(instance, DEFAULT_PATH_CAP)
    }

    pub fn with_path_cap(instance: GameInstance, cap: usize) -> Result<Self, EngineError> {
        let report = validate_instance(&instance);
        if !report.is_valid() {
            return Err(ModelError::Invalid(report).into());
        }
        let instance = if instance.has_paths() {
            instance
        } else {
            instance.with_paths(cap)?
        };
        let price_terms = instance
            .commodities
            .iter()
            .map(|commodity| {
                instance
                    .edges
                    .iter()
                    .map(|edge| Ok(edge.c2 * edge.price.eval_u(commodity.demand)?))
                    .collect::<Result<Vec<_>, PriceError>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Game {
            instance,
            price_terms,
        })
    }

    pub fn instance(&self) -> &GameInstance {
        &self.instance
    }

    pub fn players(&self) -> usize {
        self.instance.commodities.len()
    }

    pub fn edge_count(&self) -> usize {
        self.instance.edges.len()
    }

    pub fn demand(&self, player: usize) -> f64 {
        self.instance.commodities[player].demand
    }

    pub fn paths(&self, player: usize) -> &[Path] {
        &self.instance.paths[player]
    }

    pub fn path(&self, player: usize, index: usize) -> &Path {
        &self.instance.paths[player][index]
    }

    /// Congestion part of an edge's cost at `load`, weighted by `c1`.
    pub fn congestion_cost(&self, edge: usize, load: f64) -> f64 {
        let spec = &self.instance.edges[edge];
        spec.c1 * spec.congestion(load)
    }

    /// Price part of an edge's cost for `player`, weighted by `c2`.
    pub fn price_term(&self, player: usize, edge: usize) -> f64 {
        self.price_terms[player][edge]
    }

    /// Per-unit cost of `edge` for `player` at total load `load`.
    pub fn edge_cost(&self, player: usize, edge: usize, load: f64) -> f64 {
        self.congestion_cost(edge, load) + self.price_term(player, edge)
    }

    pub fn check_profile(&self, profile: &StrategyProfile) -> Result<(), EngineError> {
        if profile.choice.len() != self.players() {
            return Err(EngineError::BadProfile(format!(
                "{} choices for {} players",
                profile.choice.len(),
                self.players()
            )));
        }
        for (player, &choice) in profile.choice.iter().enumerate() {
            if choice >= self.paths(player).len() {
                return Err(EngineError::BadProfile(format!(
                    "player {player} picks path {choice} of {}",
                    self.paths(player).len()
                )));
            }
        }
        Ok(())
    }
}

/// One path index per player.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StrategyProfile {
    pub choice: Vec<usize>,
}

impl StrategyProfile {
    pub fn new(choice: Vec<usize>) -> Self {
        StrategyProfile { choice }
    }

    /// Every player on its first path.
    pub fn first_paths(game: &Game) -> Self {
        StrategyProfile::new(vec![0; game.players()])
    }

    /// Uniformly random path per player.
    pub fn random<R: Rng + ?Sized>(game: &Game, rng: &mut R) -> Self {
        StrategyProfile::new(
            (0..game.players())
                .map(|p| rng.gen_range(0..game.paths(p).len()))
                .collect(),
        )
    }

    /// Players join one at a time, in order, each taking its cheapest path
    /// given the players already placed.
    pub fn greedy(game: &Game) -> Self {
        let mut loads = vec![0.0; game.edge_count()];
        let mut choice = Vec::with_capacity(game.players());
        for player in 0..game.players() {
            let r = game.demand(player);
            let mut best = (0, f64::INFINITY);
            for (index, path) in game.paths(player).iter().enumerate() {
                let cost: f64 = path
                    .edges()
                    .iter()
                    .map(|&e| game.edge_cost(player, e, loads[e] + r))
                    .sum();
                if cost < best.1 {
                    best = (index, cost);
                }
            }
            for &e in game.path(player, best.0).edges() {
                loads[e] += r;
            }
            choice.push(best.0);
        }
        StrategyProfile::new(choice)
    }

    pub fn players(&self) -> usize {
        self.choice.len()
    }
}

/// Total flow per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeLoads {
    pub load: Vec<f64>,
}

impl EdgeLoads {
    fn shift(&mut self, path: &Path, amount: f64) {
        for &e in path.edges() {
            self.load[e] += amount;
        }
    }
}

pub fn edge_loads(game: &Game, profile: &StrategyProfile) -> EdgeLoads {
    let mut loads = EdgeLoads {
        load: vec![0.0; game.edge_count()],
    };
    for (player, &choice) in profile.choice.iter().enumerate() {
        loads.shift(game.path(player, choice), game.demand(player));
    }
    loads
}

/// Per-unit cost for `player` of path `path` at the given loads, as is.
pub fn unit_path_cost(game: &Game, loads: &EdgeLoads, player: usize, path: usize) -> f64 {
    game.path(player, path)
        .edges()
        .iter()
        .map(|&e| game.edge_cost(player, e, loads.load[e]))
        .sum()
}

/// Per-unit cost `player` would pay after moving from `current` to
/// `candidate`: edges not on `current` carry the player's demand on top.
pub fn deviation_cost(
    game: &Game,
    loads: &EdgeLoads,
    player: usize,
    current: usize,
    candidate: usize,
) -> f64 {
    let r = game.demand(player);
    let held = game.path(player, current);
    game.path(player, candidate)
        .edges()
        .iter()
        .map(|&e| {
            let load = if held.contains(e) {
                loads.load[e]
            } else {
                loads.load[e] + r
            };
            game.edge_cost(player, e, load)
        })
        .sum()
}

/// Every player's per-unit cost under `profile`.
pub fn player_costs(game: &Game, profile: &StrategyProfile) -> Vec<f64> {
    let loads = edge_loads(game, profile);
    profile
        .choice
        .iter()
        .enumerate()
        .map(|(player, &path)| unit_path_cost(game, &loads, player, path))
        .collect()
}

/// Total congestion cost over edges plus total price paid over players.
pub fn social_cost(game: &Game, profile: &StrategyProfile) -> f64 {
    let loads = edge_loads(game, profile);
    let congestion: f64 = loads
        .load
        .iter()
        .enumerate()
        .map(|(e, &f)| game.congestion_cost(e, f) * f)
        .sum();
    let pricing: f64 = profile
        .choice
        .iter()
        .enumerate()
        .map(|(player, &path)| {
            let r = game.demand(player);
            game.path(player, path)
                .edges()
                .iter()
                .map(|&e| game.price_term(player, e) * r)
                .sum::<f64>()
        })
        .sum();
    congestion + pricing
}

pub fn potential(game: &Game, profile: &StrategyProfile) -> f64 {
    let loads = edge_loads(game, profile);
    let mut per_edge: Vec<f64> = loads
        .load
        .iter()
        .enumerate()
        .map(|(e, &f)| game.congestion_cost(e, f) * f)
        .collect();
    for (player, &path) in profile.choice.iter().enumerate() {
        let r = game.demand(player);
        for &e in game.path(player, path).edges() {
            per_edge[e] += game.congestion_cost(e, r) * r + 2.0 * game.price_term(player, e) * r;
        }
    }
    per_edge.iter().sum()
}

/// A strictly improving unilateral move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub player: usize,
    pub from_path: usize,
    pub to_path: usize,
    /// Unit cost on `to_path` after moving.
    pub deviated_cost: f64,
    /// Current unit cost minus `deviated_cost`.
    pub improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub is_equilibrium: bool,
    pub player_costs: Vec<f64>,
    pub potential: f64,
    pub witness: Option<Deviation>,
}

/// Checks every player against every other path in its strategy set; the
/// witness is the first improving move in (player, path) order.
pub fn is_equilibrium(game: &Game, profile: &StrategyProfile, epsilon: f64) -> EquilibriumReport {
    let loads = edge_loads(game, profile);
    let player_costs: Vec<f64> = profile
        .choice
        .iter()
        .enumerate()
        .map(|(player, &path)| unit_path_cost(game, &loads, player, path))
        .collect();

    let witness = profile.choice.iter().enumerate().find_map(|(player, &current)| {
        (0..game.paths(player).len())
            .filter(|&candidate| candidate != current)
            .find_map(|candidate| {
                let deviated_cost = deviation_cost(game, &loads, player, current, candidate);
                let improvement = player_costs[player] - deviated_cost;
                (improvement > epsilon).then_some(Deviation {
                    player,
                    from_path: current,
                    to_path: candidate,
                    deviated_cost,
                    improvement,
                })
            })
    });

    EquilibriumReport {
        is_equilibrium: witness.is_none(),
        player_costs,
        potential: potential(game, profile),
        witness,
    }
}

/// Cheapest path for `player` given everyone else stays put.
///
/// Ties go to the current path, then to the lowest index.
pub fn best_response(game: &Game, profile: &StrategyProfile, player: usize) -> (usize, f64) {
    let loads = edge_loads(game, profile);
    best_response_at(game, &loads, profile.choice[player], player)
}

fn best_response_at(game: &Game, loads: &EdgeLoads, current: usize, player: usize) -> (usize, f64) {
    let mut best = (current, unit_path_cost(game, loads, player, current));
    for candidate in 0..game.paths(player).len() {
        if candidate == current {
            continue;
        }
        let cost = deviation_cost(game, loads, player, current, candidate);
        if cost < best.1 {
            best = (candidate, cost);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub max_moves: usize,
    pub epsilon: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            max_moves: DEFAULT_MAX_MOVES,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub player: usize,
    pub from_path: usize,
    pub to_path: usize,
    pub improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsOutcome {
    pub profile: StrategyProfile,
    pub moves: Vec<Move>,
    /// Potential at the start and after every move.
    pub potential_trace: Vec<f64>,
    pub converged: bool,
    /// Loads maintained incrementally along the way.
    #[serde(skip)]
    pub loads: Option<EdgeLoads>,
}

/// Round-robin best-response dynamics: players take turns in index order and
/// switch to their best response whenever it improves on the current path by
/// more than `epsilon`. Stops after a full round without moves, or after
/// `max_moves` moves with `converged = false`.
pub fn run_best_response_dynamics(
    game: &Game,
    initial: StrategyProfile,
    config: &DynamicsConfig,
) -> DynamicsOutcome {
    let players = game.players();
    let mut profile = initial;
    let mut loads = edge_loads(game, &profile);
    let mut moves = Vec::new();
    let mut potential_trace = vec![potential(game, &profile)];
    let mut converged = true;

    let mut quiet = 0;
    let mut player = 0;
    while quiet < players {
        let current = profile.choice[player];
        let current_cost = unit_path_cost(game, &loads, player, current);
        let (best, best_cost) = best_response_at(game, &loads, current, player);
        let improvement = current_cost - best_cost;
        if best != current && improvement > config.epsilon {
            if moves.len() == config.max_moves {
                converged = false;
                break;
            }
            let r = game.demand(player);
            loads.shift(game.path(player, current), -r);
            loads.shift(game.path(player, best), r);
            profile.choice[player] = best;
            moves.push(Move {
                player,
                from_path: current,
                to_path: best,
                improvement,
            });
            potential_trace.push(potential(game, &profile));
            quiet = 0;
        } else {
            quiet += 1;
        }
        player = (player + 1) % players;
    }

    DynamicsOutcome {
        profile,
        moves,
        potential_trace,
        converged,
        loads: Some(loads),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Commodity, EdgeSpec, NodeId, Scenario};
    use crate::pricing::PriceSpec;

    fn edge(id: &str, from: &str, to: &str, a: f64, b: f64) -> EdgeSpec {
        EdgeSpec {
            id: id.into(),
            from: NodeId::new(from),
            to: NodeId::new(to),
            a,
            b,
            c1: 1.0,
            c2: 0.0,
            price: PriceSpec::Zero,
        }
    }

    fn classic(players: usize, shortcut: bool) -> Game {
        let mut edges = vec![
            edge("sv", "s", "v", 1.0, 0.0),
            edge("vt", "v", "t", 0.0, 1.0),
            edge("sw", "s", "w", 0.0, 1.0),
            edge("wt", "w", "t", 1.0, 0.0),
        ];
        if shortcut {
            edges.push(edge("vw", "v", "w", 0.0, 0.0));
        }
        let commodities = (0..players)
            .map(|i| Commodity {
                id: format!("p{i}"),
                source: NodeId::new("s"),
                sink: NodeId::new("t"),
                demand: 1.0 / players as f64,
            })
            .collect();
        let scenario = Scenario {
            nodes: ["s", "v", "w", "t"].map(NodeId::new).to_vec(),
            edges,
            commodities,
        };
        Game::new(GameInstance::from_scenario(scenario)).unwrap()
    }

    // Paths with the shortcut: 0 = top, 1 = zigzag, 2 = bottom.
    fn half_split(players: usize, bottom: usize) -> StrategyProfile {
        StrategyProfile::new(
            (0..players)
                .map(|i| if i < players / 2 { 0 } else { bottom })
                .collect(),
        )
    }

    #[test]
    fn loads_aggregate_demand() {
        let game = classic(10, false);
        let loads = edge_loads(&game, &half_split(10, 1));
        for e in 0..4 {
            assert!((loads.load[e] - 0.5).abs() < 1e-12);
        }
        let game = classic(10, true);
        let loads = edge_loads(&game, &StrategyProfile::new(vec![1; 10]));
        assert!((loads.load[0] - 1.0).abs() < 1e-12);
        assert!((loads.load[3] - 1.0).abs() < 1e-12);
        assert_eq!(loads.load[1], 0.0);
    }

    #[test]
    fn empty_commodity_list() {
        let mut instance = classic(2, true).instance().clone();
        instance.commodities.clear();
        instance.paths.clear();
        let game = Game::new(instance).unwrap();
        let profile = StrategyProfile::new(vec![]);
        assert_eq!(edge_loads(&game, &profile).load, vec![0.0; 5]);
        assert_eq!(social_cost(&game, &profile), 0.0);
        let outcome = run_best_response_dynamics(&game, profile, &DynamicsConfig::default());
        assert!(outcome.converged);
        assert!(outcome.moves.is_empty());
    }

    #[test]
    fn classic_costs() {
        let before = classic(10, false);
        let split = half_split(10, 1);
        assert!((social_cost(&before, &split) - 1.5).abs() < 1e-12);
        let loads = edge_loads(&before, &split);
        assert!((unit_path_cost(&before, &loads, 0, 0) - 1.5).abs() < 1e-12);

        let after = classic(10, true);
        let zigzag = StrategyProfile::new(vec![1; 10]);
        assert!((social_cost(&after, &zigzag) - 2.0).abs() < 1e-12);
        let report = is_equilibrium(&after, &zigzag, DEFAULT_EPSILON);
        assert!(report.is_equilibrium, "{report:?}");
        assert!(report.witness.is_none());
    }

    #[test]
    fn half_split_with_shortcut_has_witness() {
        let game = classic(10, true);
        let report = is_equilibrium(&game, &half_split(10, 2), DEFAULT_EPSILON);
        assert!(!report.is_equilibrium);
        let witness = report.witness.unwrap();
        // Player 0 on top pays 1.5; the zigzag costs 0.5 + 0.6 after moving.
        assert_eq!((witness.player, witness.from_path, witness.to_path), (0, 0, 1));
        assert!((witness.deviated_cost - 1.1).abs() < 1e-12);
        // A bottom player would pay 0.6 + 0.5 on the zigzag as well.
        let loads = edge_loads(&game, &half_split(10, 2));
        assert!((deviation_cost(&game, &loads, 9, 2, 1) - 1.1).abs() < 1e-12);
        assert_eq!(best_response(&game, &half_split(10, 2), 9).0, 1);
        assert_eq!(best_response(&game, &half_split(10, 2), 0).0, 1);
    }

    #[test]
    fn single_player_single_edge_potential() {
        let (a, b, r) = (1.5, 0.25, 0.75);
        let mut e = edge("e", "s", "t", a, b);
        e.c2 = 1.0;
        e.price = PriceSpec::Log1p;
        let scenario = Scenario {
            nodes: ["s", "t"].map(NodeId::new).to_vec(),
            edges: vec![e],
            commodities: vec![Commodity {
                id: "p".into(),
                source: NodeId::new("s"),
                sink: NodeId::new("t"),
                demand: r,
            }],
        };
        // c1 = c2 = 1 is outside the normalized range, so build the game by hand.
        let instance = GameInstance::from_scenario(scenario).with_paths(4).unwrap();
        let u = r.ln_1p() / r;
        let game = Game {
            price_terms: vec![vec![u]],
            instance,
        };
        let profile = StrategyProfile::new(vec![0]);
        let expected = 2.0 * r * (a * r + b) + 2.0 * u * r;
        assert!((potential(&game, &profile) - expected).abs() < 1e-12);
        assert!((social_cost(&game, &profile) - r * (a * r + b + u)).abs() < 1e-12);
        assert_eq!(best_response(&game, &profile, 0).0, 0);
        assert!(is_equilibrium(&game, &profile, DEFAULT_EPSILON).is_equilibrium);
    }

    #[test]
    fn dynamics_from_split_stop_one_short_of_all_zigzag() {
        let game = classic(10, true);
        let outcome = run_best_response_dynamics(&game, half_split(10, 2), &DynamicsConfig::default());
        assert!(outcome.converged);
        // The last top player and the last bottom player face a 1.5 vs 1.5
        // and 1.9 vs 1.9 tie respectively, and ties never move.
        assert_eq!(
            outcome.profile,
            StrategyProfile::new(vec![1, 1, 1, 1, 0, 1, 1, 1, 1, 2])
        );
        assert!(is_equilibrium(&game, &outcome.profile, DEFAULT_EPSILON).is_equilibrium);
        assert!((social_cost(&game, &outcome.profile) - 1.82).abs() < 1e-12);
        assert!(outcome.potential_trace.windows(2).all(|w| w[1] < w[0]));
        for (m, w) in outcome.moves.iter().zip(outcome.potential_trace.windows(2)) {
            let drop = 2.0 * game.demand(m.player) * m.improvement;
            assert!((w[0] - w[1] - drop).abs() < 1e-12);
        }
        let fresh = edge_loads(&game, &outcome.profile);
        for (x, y) in fresh.load.iter().zip(&outcome.loads.unwrap().load) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn dynamics_stay_at_equilibrium() {
        let game = classic(10, true);
        let outcome = run_best_response_dynamics(
            &game,
            StrategyProfile::new(vec![1; 10]),
            &DynamicsConfig::default(),
        );
        assert!(outcome.converged);
        assert!(outcome.moves.is_empty());
        assert_eq!(outcome.potential_trace.len(), 1);
    }

    #[test]
    fn move_cap_reports_non_convergence() {
        let game = classic(10, true);
        let config = DynamicsConfig {
            max_moves: 2,
            ..DynamicsConfig::default()
        };
        let outcome = run_best_response_dynamics(&game, half_split(10, 2), &config);
        assert!(!outcome.converged);
        assert_eq!(outcome.moves.len(), 2);
    }

    #[test]
    fn greedy_start_splits_then_zigzags() {
        assert_eq!(
            StrategyProfile::greedy(&classic(4, false)),
            StrategyProfile::new(vec![0, 1, 0, 1])
        );
        // The last arrival ties top against zigzag at 2.0 and takes the lower index.
        assert_eq!(
            StrategyProfile::greedy(&classic(4, true)),
            StrategyProfile::new(vec![1, 1, 1, 0])
        );
    }

    #[test]
    fn profile_shape_is_checked() {
        let game = classic(2, true);
        assert!(game.check_profile(&StrategyProfile::new(vec![0, 2])).is_ok());
        assert!(game.check_profile(&StrategyProfile::new(vec![0, 3])).is_err());
        assert!(game.check_profile(&StrategyProfile::new(vec![0])).is_err());
    }
}
