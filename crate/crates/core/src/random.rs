//! Seeded generator of small random games, used by the property sweeps.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::engine::Game;
use crate::model::{Commodity, EdgeSpec, GameInstance, NodeId, Scenario};
use crate::oracle::profile_count;
use crate::pricing::PriceSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_nodes: usize,
    pub max_edges: usize,
    pub max_players: usize,
    pub max_profiles: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_nodes: 5,
            max_edges: 8,
            max_players: 3,
            max_profiles: 2_000,
        }
    }
}

pub fn random_price<R: Rng + ?Sized>(rng: &mut R) -> PriceSpec {
    match rng.gen_range(0..5) {
        0 => PriceSpec::Zero,
        1 => PriceSpec::Identity,
        2 => PriceSpec::Sin,
        3 => PriceSpec::Log1p,
        _ => PriceSpec::Saturating {
            beta: rng.gen_range(0.25..4.0),
        },
    }
}

fn random_edge<R: Rng + ?Sized>(rng: &mut R, id: usize, nodes: usize) -> EdgeSpec {
    let from = rng.gen_range(0..nodes);
    let to = (from + rng.gen_range(1..nodes)) % nodes;
    let c1 = match rng.gen_range(0..4) {
        0 => 1.0,
        1 => 0.0,
        _ => rng.gen_range(0.0..=1.0),
    };
    let coefficient = |rng: &mut R| {
        if rng.gen_bool(0.2) {
            0.0
        } else {
            rng.gen_range(0.0..2.0)
        }
    };
    EdgeSpec {
        id: format!("e{id}"),
        from: NodeId::new(format!("n{from}")),
        to: NodeId::new(format!("n{to}")),
        a: coefficient(rng),
        b: coefficient(rng),
        c1,
        c2: 1.0 - c1,
        price: random_price(rng),
    }
}

/// Draws games with affine congestion and catalog prices until one fits
/// `limits`. Every commodity has at least one path.
pub fn random_game<R: Rng + ?Sized>(rng: &mut R, limits: &Limits) -> Game {
    loop {
        if let Some(game) = attempt(rng, limits) {
            return game;
        }
    }
}

fn attempt<R: Rng + ?Sized>(rng: &mut R, limits: &Limits) -> Option<Game> {
    let node_count = rng.gen_range(2..=limits.max_nodes);
    let edge_count = rng.gen_range(node_count - 1..=limits.max_edges.max(node_count - 1));
    let nodes: Vec<NodeId> = (0..node_count).map(|i| NodeId::new(format!("n{i}"))).collect();
    let edges: Vec<EdgeSpec> = (0..edge_count)
        .map(|id| random_edge(rng, id, node_count))
        .collect();

    let scratch = GameInstance::from_scenario(Scenario {
        nodes: nodes.clone(),
        edges: edges.clone(),
        commodities: Vec::new(),
    });
    let pairs = connected_pairs(&scratch);
    if pairs.is_empty() {
        return None;
    }
    let players = rng.gen_range(1..=limits.max_players);
    let commodities = (0..players)
        .map(|i| {
            let (s, t) = pairs.choose(rng).expect("nonempty");
            Commodity {
                id: format!("p{i}"),
                source: nodes[*s].clone(),
                sink: nodes[*t].clone(),
                demand: rng.gen_range(0.1..=1.0),
            }
        })
        .collect();

    let instance = GameInstance::from_scenario(Scenario {
        nodes,
        edges,
        commodities,
    });
    let game = Game::new(instance).ok()?;
    (profile_count(&game).ok()? <= limits.max_profiles).then_some(game)
}

fn connected_pairs(instance: &GameInstance) -> Vec<(usize, usize)> {
    let index = |id: &NodeId| instance.nodes.iter().position(|n| n == id).expect("known node");
    let n = instance.nodes.len();
    let mut pairs = Vec::new();
    for s in 0..n {
        let mut seen = BTreeSet::from([s]);
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for edge in instance.edges.iter().filter(|e| index(&e.from) == v) {
                let w = index(&edge.to);
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        pairs.extend(seen.into_iter().filter(|&t| t != s).map(|t| (s, t)));
    }
    pairs
}
