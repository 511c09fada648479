use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use selfish_routing::braess::{BraessError, BraessPair, BraessReport, ExperimentConfig};
use selfish_routing::engine::{
    is_equilibrium, player_costs, potential, run_best_response_dynamics, social_cost, DynamicsConfig,
    DynamicsOutcome, EngineError, Game, StrategyProfile,
};
use selfish_routing::model::{
    parse_scenario, parse_scenario_unchecked, validate_instance, GameInstance, ModelError, ValidationReport,
    DEFAULT_PATH_CAP,
};
use selfish_routing::oracle::{exhaustive, OracleError, PoaReport, RankedProfile, SearchConfig};
use selfish_routing::pricing::{PriceFamily, PriceSpec};
use selfish_routing::{build_classic_braess, build_priced_braess, edge_addition_experiment};

use crate::args::{BraessCommand, Command, RunConfig};
use crate::render::{profile_text, render, sig9, Report, Rows};

/// Failures that end a command without a report.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: ModelError },
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            _ => 2,
        }
    }
}

/// Text for stdout plus the exit code; domain failures that still produce a
/// report (violations, non-convergence, bound violation) use code 1.
#[derive(Debug)]
pub struct Output {
    pub text: String,
    pub code: u8,
}

pub fn run(command: &Command, config: &RunConfig) -> Result<Output, CliError> {
    check_config(config)?;
    if config.emit_scenario.is_some() && !matches!(command, Command::Braess { .. }) {
        return Err(CliError::Usage(
            "--emit-scenario only applies to braess experiments".into(),
        ));
    }
    match command {
        Command::Validate { scenario } => validate(scenario, config),
        Command::Equilibrate { scenario, init } => equilibrate(scenario, init, config),
        Command::Enumerate { scenario } => enumerate(scenario, config),
        Command::Poa { scenario } => poa(scenario, config),
        Command::Braess { experiment } => braess(experiment, config),
        Command::PriceCurves {
            functions,
            samples,
            x_max,
            beta,
        } => price_curves(functions, *samples, *x_max, *beta),
    }
}

fn check_config(config: &RunConfig) -> Result<(), CliError> {
    if !(config.epsilon.is_finite() && config.epsilon > 0.0) {
        return Err(CliError::Usage(format!(
            "--epsilon must be positive, got {}",
            config.epsilon
        )));
    }
    for (flag, value) in [
        ("--max-moves", config.max_moves as u64),
        ("--cap", config.cap),
        ("--workers", config.workers as u64),
    ] {
        if value == 0 {
            return Err(CliError::Usage(format!("{flag} must be positive")));
        }
    }
    Ok(())
}

fn search_config(config: &RunConfig) -> SearchConfig {
    SearchConfig {
        cap: config.cap,
        epsilon: config.epsilon,
        workers: config.workers,
    }
}

fn dynamics_config(config: &RunConfig) -> DynamicsConfig {
    DynamicsConfig {
        max_moves: config.max_moves,
        epsilon: config.epsilon,
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })
}

/// Reads and validates a scenario. Syntax and schema errors are parse
/// failures; semantic violations are domain failures.
fn load_instance(path: &Path) -> Result<GameInstance, CliError> {
    match parse_scenario(&read(path)?) {
        Ok(instance) => Ok(instance),
        Err(ModelError::Invalid(report)) => Err(CliError::Domain(format!("{}: {report}", path.display()))),
        Err(source) => Err(CliError::Parse {
            path: path.to_owned(),
            source,
        }),
    }
}

fn load_game(path: &Path) -> Result<Game, CliError> {
    Game::with_path_cap(load_instance(path)?, DEFAULT_PATH_CAP).map_err(|e| CliError::Domain(e.to_string()))
}

fn oracle_error(e: OracleError) -> CliError {
    CliError::Domain(e.to_string())
}

// ---------------------------------------------------------------- validate

impl Report for ValidationReport {
    fn rows(&self) -> Rows {
        let mut rows = Rows::default();
        rows.push("valid", self.is_valid());
        rows.push("violations", self.violations.len());
        for (i, v) in self.violations.iter().enumerate() {
            rows.push(format!("violation.{i}"), v.to_string());
        }
        rows
    }
}

fn validate(path: &Path, config: &RunConfig) -> Result<Output, CliError> {
    let instance = parse_scenario_unchecked(&read(path)?).map_err(|source| CliError::Parse {
        path: path.to_owned(),
        source,
    })?;
    let report = validate_instance(&instance);
    Ok(Output {
        text: render(&report, config.format),
        code: if report.is_valid() { 0 } else { 1 },
    })
}

// ------------------------------------------------------------- equilibrate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibrateReport {
    pub initial_profile: StrategyProfile,
    pub outcome: DynamicsOutcome,
    /// Edge ids of each player's final path.
    pub paths: Vec<String>,
    pub player_costs: Vec<f64>,
    pub social_cost: f64,
    pub potential: f64,
    pub is_equilibrium: bool,
}

impl Report for EquilibrateReport {
    fn rows(&self) -> Rows {
        let mut rows = Rows::default();
        rows.push("converged", self.outcome.converged);
        rows.push("moves", self.outcome.moves.len());
        rows.push("potential_trace_len", self.outcome.potential_trace.len());
        rows.push("initial_profile", profile_text(&self.initial_profile.choice));
        rows.push("profile", profile_text(&self.outcome.profile.choice));
        rows.push("social_cost", self.social_cost);
        rows.push("potential", self.potential);
        rows.push("is_equilibrium", self.is_equilibrium);
        for (i, (path, cost)) in self.paths.iter().zip(&self.player_costs).enumerate() {
            rows.push(format!("player.{i}.path"), path.as_str());
            rows.push(format!("player.{i}.cost"), *cost);
        }
        rows
    }
}

fn initial_profile(game: &Game, init: &str, seed: u64) -> Result<StrategyProfile, CliError> {
    let profile = match init {
        "greedy" => StrategyProfile::greedy(game),
        "first" => StrategyProfile::first_paths(game),
        "random" => StrategyProfile::random(game, &mut ChaCha8Rng::seed_from_u64(seed)),
        list => {
            let choice = list
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| {
                    CliError::Usage(format!(
                        "--init must be greedy, first, random or comma-separated path indices, got `{list}`"
                    ))
                })?;
            let profile = StrategyProfile::new(choice);
            game.check_profile(&profile)
                .map_err(|e: EngineError| CliError::Usage(format!("--init: {e}")))?;
            profile
        }
    };
    Ok(profile)
}

fn equilibrate(path: &Path, init: &str, config: &RunConfig) -> Result<Output, CliError> {
    let game = load_game(path)?;
    let start = initial_profile(&game, init, config.seed)?;
    let outcome = run_best_response_dynamics(&game, start.clone(), &dynamics_config(config));
    let profile = &outcome.profile;
    let report = EquilibrateReport {
        initial_profile: start,
        paths: (0..game.players())
            .map(|i| game.instance().path_label(game.path(i, profile.choice[i])))
            .collect(),
        player_costs: player_costs(&game, profile),
        social_cost: social_cost(&game, profile),
        potential: potential(&game, profile),
        is_equilibrium: is_equilibrium(&game, profile, config.epsilon).is_equilibrium,
        outcome,
    };
    let code = if report.outcome.converged { 0 } else { 1 };
    Ok(Output {
        text: render(&report, config.format),
        code,
    })
}

// ------------------------------------------------------- enumerate and poa

impl Report for PoaReport {
    fn rows(&self) -> Rows {
        let mut rows = Rows::default();
        poa_rows(self, &mut rows);
        rows
    }
}

fn poa_rows(report: &PoaReport, rows: &mut Rows) {
    rows.push("profile_count", report.profile_count);
    rows.push("equilibrium_count", report.equilibrium_count);
    rows.push("optimal_profile", profile_text(&report.optimal_profile.choice));
    rows.push("optimal_cost", report.optimal_cost);
    rows.push(
        "worst_equilibrium_profile",
        profile_text(&report.worst_equilibrium_profile.choice),
    );
    rows.push("worst_equilibrium_cost", report.worst_equilibrium_cost);
    rows.push("poa", report.poa);
    rows.push("bound", report.bound);
    rows.push("within_bound", report.within_bound);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerateReport {
    /// Every pure equilibrium in profile-index order.
    pub equilibria: Vec<RankedProfile>,
    pub poa: PoaReport,
}

impl Report for EnumerateReport {
    fn rows(&self) -> Rows {
        let mut rows = Rows::default();
        poa_rows(&self.poa, &mut rows);
        for (i, eq) in self.equilibria.iter().enumerate() {
            rows.push(
                format!("equilibrium.{i}.profile"),
                profile_text(&eq.profile.choice),
            );
            rows.push(format!("equilibrium.{i}.social_cost"), eq.social_cost);
        }
        rows
    }
}

fn bound_code(report: &PoaReport) -> u8 {
    if report.within_bound {
        0
    } else {
        1
    }
}

fn enumerate(path: &Path, config: &RunConfig) -> Result<Output, CliError> {
    let game = load_game(path)?;
    let result = exhaustive(&game, &search_config(config)).map_err(oracle_error)?;
    let poa = PoaReport::from_exhaustive(&result).map_err(oracle_error)?;
    let code = bound_code(&poa);
    let report = EnumerateReport {
        equilibria: result.equilibria,
        poa,
    };
    Ok(Output {
        text: render(&report, config.format),
        code,
    })
}

fn poa(path: &Path, config: &RunConfig) -> Result<Output, CliError> {
    let game = load_game(path)?;
    let result = exhaustive(&game, &search_config(config)).map_err(oracle_error)?;
    let report = PoaReport::from_exhaustive(&result).map_err(oracle_error)?;
    Ok(Output {
        text: render(&report, config.format),
        code: bound_code(&report),
    })
}

// ------------------------------------------------------------------ braess

impl Report for BraessReport {
    fn rows(&self) -> Rows {
        let mut rows = Rows::default();
        rows.push("method", format!("{:?}", self.method).to_lowercase());
        rows.push("n_players", self.n_players);
        rows.push_opt("price", self.price.map(|p| p.to_string()));
        rows.push_opt("c1", self.c1);
        rows.push_opt("c2", self.c2);
        rows.push("before", self.before);
        rows.push("after", self.after);
        rows.push("rho", self.rho);
        rows.push_opt("formula_rho", self.formula_rho);
        rows.push("before_profile", profile_text(&self.before_profile.choice));
        rows.push("after_profile", profile_text(&self.after_profile.choice));
        rows
    }
}

/// Builder errors come from the flags, everything later from the instances.
fn flag_error(e: BraessError) -> CliError {
    CliError::Usage(e.to_string())
}

fn braess(experiment: &BraessCommand, config: &RunConfig) -> Result<Output, CliError> {
    let (pair, method) = match experiment {
        BraessCommand::Classic { n, method } => (build_classic_braess(*n).map_err(flag_error)?, *method),
        BraessCommand::Priced {
            n,
            price,
            beta,
            c1,
            c2,
            method,
        } => {
            let family: PriceFamily = price
                .parse()
                .map_err(|e: selfish_routing::pricing::PriceError| CliError::Usage(e.to_string()))?;
            let spec = PriceSpec::from_family(family, *beta).map_err(|e| CliError::Usage(e.to_string()))?;
            (
                build_priced_braess(*n, spec, *c1, *c2).map_err(flag_error)?,
                *method,
            )
        }
        BraessCommand::Pair {
            before,
            after,
            method,
        } => (
            BraessPair {
                before: load_instance(before)?,
                after: load_instance(after)?,
            },
            *method,
        ),
    };
    if let Some(prefix) = &config.emit_scenario {
        emit(prefix, &pair)?;
    }
    let experiment_config = ExperimentConfig {
        method: method.into(),
        search: search_config(config),
        dynamics: dynamics_config(config),
    };
    let report = edge_addition_experiment(&pair.before, &pair.after, &experiment_config)
        .map_err(|e| CliError::Domain(e.to_string()))?;
    Ok(Output {
        text: render(&report, config.format),
        code: 0,
    })
}

fn emit(prefix: &Path, pair: &BraessPair) -> Result<(), CliError> {
    for (suffix, instance) in [("before", &pair.before), ("after", &pair.after)] {
        let mut name = prefix.as_os_str().to_owned();
        name.push(format!(".{suffix}.json"));
        let path = PathBuf::from(name);
        fs::write(&path, instance.to_json()).map_err(|source| CliError::Write { path, source })?;
    }
    Ok(())
}

// ------------------------------------------------------------ price curves

fn price_curves(functions: &[String], samples: usize, x_max: f64, beta: f64) -> Result<Output, CliError> {
    if samples < 2 {
        return Err(CliError::Usage(format!(
            "--samples must be at least 2, got {samples}"
        )));
    }
    if !(x_max.is_finite() && x_max > 0.0) {
        return Err(CliError::Usage(format!("--x-max must be positive, got {x_max}")));
    }
    if functions.is_empty() {
        return Err(CliError::Usage("--functions needs at least one family".into()));
    }
    let specs = functions
        .iter()
        .map(|name| {
            let family: PriceFamily = name
                .trim()
                .parse()
                .map_err(|e: selfish_routing::pricing::PriceError| CliError::Usage(e.to_string()))?;
            let spec = PriceSpec::from_family(family, beta).map_err(|e| CliError::Usage(e.to_string()))?;
            if !spec.in_domain(x_max) {
                return Err(CliError::Usage(format!(
                    "--x-max {x_max} is outside the {family} domain [0, {}]",
                    spec.domain_max()
                )));
            }
            Ok((family, spec))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut text = String::from("x");
    for (family, _) in &specs {
        text.push_str(&format!(",{family}_F,{family}_u"));
    }
    text.push_str(",y_eq_x\n");
    let last = samples - 1;
    for k in 0..samples {
        let x = if k == last {
            x_max
        } else {
            x_max * k as f64 / last as f64
        };
        text.push_str(&sig9(x));
        for (_, spec) in &specs {
            let f = spec.eval_f(x).map_err(|e| CliError::Domain(e.to_string()))?;
            let u = spec.eval_u(x).map_err(|e| CliError::Domain(e.to_string()))?;
            text.push_str(&format!(",{},{}", sig9(f), sig9(u)));
        }
        text.push_str(&format!(",{}\n", sig9(x)));
    }
    Ok(Output { text, code: 0 })
}
