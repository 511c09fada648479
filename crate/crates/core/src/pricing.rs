//! Volume-discount price functions charged per edge.
//!
//! A price function `F(x)` is the total charge for routing a volume `x` over an
//! edge. The per-unit price is `u(x) = F(x) / x`. Every catalog family except
//! `zero` satisfies `F(x) <= x`, has `u` nonincreasing (buying in bulk never
//! costs more per unit) and `u(x) -> 1` as `x -> 0`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed when comparing neighbouring grid values.
const GRID_SLACK: f64 = 1e-14;

/// Volume at which the `u -> 1` limit is probed.
pub const LIMIT_PROBE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PriceError {
    #[error("{family} price evaluated at {x}, outside its domain [0, {max}]")]
    OutOfDomain { family: PriceFamily, x: f64, max: f64 },
    #[error("unknown price family `{0}`")]
    UnknownFamily(String),
    #[error("invalid parameters for {family} price: {reason}")]
    BadParams { family: PriceFamily, reason: String },
    #[error("property check needs at least one grid point")]
    EmptyGrid,
    #[error("property grid must be sorted ascending and lie in the domain")]
    BadGrid,
}

/// Price function families available to scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceFamily {
    Zero,
    Identity,
    Sin,
    Log1p,
    Saturating,
}

impl PriceFamily {
    pub const ALL: [PriceFamily; 5] = [
        PriceFamily::Zero,
        PriceFamily::Identity,
        PriceFamily::Sin,
        PriceFamily::Log1p,
        PriceFamily::Saturating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PriceFamily::Zero => "zero",
            PriceFamily::Identity => "identity",
            PriceFamily::Sin => "sin",
            PriceFamily::Log1p => "log1p",
            PriceFamily::Saturating => "saturating",
        }
    }
}

impl fmt::Display for PriceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PriceFamily {
    type Err = PriceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PriceFamily::ALL
            .into_iter()
            .find(|family| family.name() == s)
            .ok_or_else(|| PriceError::UnknownFamily(s.to_owned()))
    }
}

/// A concrete price function: a family plus its parameters.
///
/// Serialized as `{"fn": "<family>", "params": {...}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrice", into = "RawPrice")]
pub enum PriceSpec {
    /// `F = 0`: an unpriced edge.
    Zero,
    /// `F(x) = x`, flat unit price 1 (no discount at all).
    Identity,
    /// `F(x) = sin x` on `[0, pi/2]`.
    Sin,
    /// `F(x) = ln(1 + x)`.
    Log1p,
    /// `F(x) = x / (1 + beta x)`, so `u(x) = 1 / (1 + beta x)`.
    Saturating { beta: f64 },
}

impl PriceSpec {
    pub fn family(&self) -> PriceFamily {
        match self {
            PriceSpec::Zero => PriceFamily::Zero,
            PriceSpec::Identity => PriceFamily::Identity,
            PriceSpec::Sin => PriceFamily::Sin,
            PriceSpec::Log1p => PriceFamily::Log1p,
            PriceSpec::Saturating { .. } => PriceFamily::Saturating,
        }
    }

    /// Builds the price for `family`, using `beta` for the saturating family.
    pub fn from_family(family: PriceFamily, beta: f64) -> Result<Self, PriceError> {
        let spec = match family {
            PriceFamily::Zero => PriceSpec::Zero,
            PriceFamily::Identity => PriceSpec::Identity,
            PriceFamily::Sin => PriceSpec::Sin,
            PriceFamily::Log1p => PriceSpec::Log1p,
            PriceFamily::Saturating => PriceSpec::Saturating { beta },
        };
        spec.check_params()?;
        Ok(spec)
    }

    pub fn check_params(&self) -> Result<(), PriceError> {
        match *self {
            PriceSpec::Saturating { beta } if !(beta.is_finite() && beta > 0.0) => {
                Err(PriceError::BadParams {
                    family: PriceFamily::Saturating,
                    reason: format!("beta must be a positive finite number, got {beta}"),
                })
            }
            _ => Ok(()),
        }
    }

    /// Upper end of the admissible domain.
    pub fn domain_max(&self) -> f64 {
        match self {
            PriceSpec::Sin => FRAC_PI_2,
            _ => f64::INFINITY,
        }
    }

    pub fn in_domain(&self, x: f64) -> bool {
        x >= 0.0 && x <= self.domain_max()
    }

    fn check_domain(&self, x: f64) -> Result<(), PriceError> {
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(PriceError::OutOfDomain {
                family: self.family(),
                x,
                max: self.domain_max(),
            })
        }
    }

    /// Total charge `F(x)` for a volume `x`.
    pub fn eval_f(&self, x: f64) -> Result<f64, PriceError> {
        self.check_domain(x)?;
        Ok(match *self {
            PriceSpec::Zero => 0.0,
            PriceSpec::Identity => x,
            PriceSpec::Sin => x.sin(),
            PriceSpec::Log1p => x.ln_1p(),
            PriceSpec::Saturating { beta } => x / (1.0 + beta * x),
        })
    }

    /// Per-unit charge `u(x) = F(x) / x`, with `u(0)` taken as the limit.
    pub fn eval_u(&self, x: f64) -> Result<f64, PriceError> {
        self.check_domain(x)?;
        if x == 0.0 {
            return Ok(self.limit_at_zero());
        }
        Ok(match *self {
            PriceSpec::Zero => 0.0,
            PriceSpec::Identity => 1.0,
            PriceSpec::Sin => x.sin() / x,
            PriceSpec::Log1p => x.ln_1p() / x,
            PriceSpec::Saturating { beta } => 1.0 / (1.0 + beta * x),
        })
    }

    fn limit_at_zero(&self) -> f64 {
        match self {
            PriceSpec::Zero => 0.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for PriceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriceSpec::Saturating { beta } => write!(f, "saturating(beta={beta})"),
            other => f.write_str(other.family().name()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrice {
    #[serde(rename = "fn")]
    family: PriceFamily,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

impl TryFrom<RawPrice> for PriceSpec {
    type Error = PriceError;

    fn try_from(raw: RawPrice) -> Result<Self, Self::Error> {
        let allowed: &[&str] = match raw.family {
            PriceFamily::Saturating => &["beta"],
            _ => &[],
        };
        if let Some(key) = raw.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(PriceError::BadParams {
                family: raw.family,
                reason: format!("unknown parameter `{key}`"),
            });
        }
        let beta = match raw.family {
            PriceFamily::Saturating => *raw.params.get("beta").ok_or(PriceError::BadParams {
                family: raw.family,
                reason: "missing parameter `beta`".into(),
            })?,
            _ => 0.0,
        };
        PriceSpec::from_family(raw.family, beta)
    }
}

impl From<PriceSpec> for RawPrice {
    fn from(spec: PriceSpec) -> Self {
        let mut params = BTreeMap::new();
        if let PriceSpec::Saturating { beta } = spec {
            params.insert("beta".to_owned(), beta);
        }
        RawPrice {
            family: spec.family(),
            params,
        }
    }
}

/// Anything that can be checked for the bulk-discount properties.
///
/// Implemented by [`PriceSpec`]; tests implement it for deliberately broken
/// functions.
pub trait PriceCurve {
    fn total(&self, x: f64) -> Result<f64, PriceError>;
    fn unit(&self, x: f64) -> Result<f64, PriceError>;
    /// `false` for curves that are identically zero and so have no unit limit of 1.
    fn expects_unit_limit(&self) -> bool;
}

impl PriceCurve for PriceSpec {
    fn total(&self, x: f64) -> Result<f64, PriceError> {
        self.eval_f(x)
    }

    fn unit(&self, x: f64) -> Result<f64, PriceError> {
        self.eval_u(x)
    }

    fn expects_unit_limit(&self) -> bool {
        !matches!(self, PriceSpec::Zero)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    /// `F(x) <= x` at every grid point.
    pub below_identity: bool,
    /// `u` nonincreasing along the grid.
    pub unit_nonincreasing: bool,
    /// `|u(LIMIT_PROBE) - 1| <= 1e-6`; vacuously true for `zero`.
    pub unit_limit_one: bool,
    /// Grid points where `F(x) > x`.
    pub above_identity_at: Vec<f64>,
}

impl PropertyReport {
    pub fn all_hold(&self) -> bool {
        self.below_identity && self.unit_nonincreasing && self.unit_limit_one
    }
}

/// Checks the bulk-discount properties of `curve` on an ascending grid.
pub fn check_price_properties<C: PriceCurve + ?Sized>(
    curve: &C,
    grid: &[f64],
) -> Result<PropertyReport, PriceError> {
    if grid.is_empty() {
        return Err(PriceError::EmptyGrid);
    }
    if grid.windows(2).any(|w| w[1] < w[0]) || grid[0] < 0.0 {
        return Err(PriceError::BadGrid);
    }

    let mut above_identity_at = Vec::new();
    let mut unit_nonincreasing = true;
    let mut previous_unit = f64::INFINITY;
    for &x in grid {
        let total = curve.total(x)?;
        let unit = curve.unit(x)?;
        if total > x * (1.0 + GRID_SLACK) {
            above_identity_at.push(x);
        }
        if unit > previous_unit + GRID_SLACK {
            unit_nonincreasing = false;
        }
        previous_unit = unit;
    }
    let unit_limit_one = !curve.expects_unit_limit() || (curve.unit(LIMIT_PROBE)? - 1.0).abs() <= 1e-6;

    Ok(PropertyReport {
        below_identity: above_identity_at.is_empty(),
        unit_nonincreasing,
        unit_limit_one,
        above_identity_at,
    })
}

/// `count` evenly spaced points `x_max/count, 2 x_max/count, ..., x_max`.
pub fn open_grid(x_max: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| x_max * k as f64 / count as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const CATALOG: [PriceSpec; 5] = [
        PriceSpec::Zero,
        PriceSpec::Identity,
        PriceSpec::Sin,
        PriceSpec::Log1p,
        PriceSpec::Saturating { beta: 1.0 },
    ];

    #[test]
    fn analytic_values() {
        assert_eq!(PriceSpec::Identity.eval_f(0.5).unwrap(), 0.5);
        assert!((PriceSpec::Log1p.eval_f(1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(PriceSpec::Identity.eval_u(0.25).unwrap(), 1.0);
        let u = PriceSpec::Log1p.eval_u(0.25).unwrap();
        assert!((u - 0.892_574_205_256_839_4).abs() < 1e-12, "{u}");
        assert_eq!(PriceSpec::Sin.eval_u(0.0).unwrap(), 1.0);
        assert_eq!(PriceSpec::Zero.eval_u(0.0).unwrap(), 0.0);
        for spec in CATALOG {
            assert_eq!(spec.eval_f(0.0).unwrap(), 0.0, "{spec}");
        }
    }

    #[test]
    fn sin_domain_is_quarter_turn() {
        assert!(PriceSpec::Sin.eval_f(FRAC_PI_2).is_ok());
        assert!(matches!(
            PriceSpec::Sin.eval_u(1.6),
            Err(PriceError::OutOfDomain {
                family: PriceFamily::Sin,
                ..
            })
        ));
        assert!(PriceSpec::Identity.eval_f(-0.1).is_err());
        assert!(PriceSpec::Log1p.eval_f(f64::NAN).is_err());
    }

    #[test]
    fn total_is_volume_times_unit() {
        for spec in CATALOG {
            for x in open_grid(1.0, 97) {
                let f = spec.eval_f(x).unwrap();
                let xu = x * spec.eval_u(x).unwrap();
                assert!(
                    (f - xu).abs() <= 1e-12 * f.abs().max(f64::MIN_POSITIVE),
                    "{spec} at {x}"
                );
            }
        }
    }

    #[test]
    fn catalog_satisfies_discount_properties() {
        let grid = open_grid(1.0, 1000);
        for spec in CATALOG {
            let report = check_price_properties(&spec, &grid).unwrap();
            assert!(report.all_hold(), "{spec}: {report:?}");
        }
    }

    struct Doubling;

    impl PriceCurve for Doubling {
        fn total(&self, x: f64) -> Result<f64, PriceError> {
            Ok(2.0 * x)
        }
        fn unit(&self, _x: f64) -> Result<f64, PriceError> {
            Ok(2.0)
        }
        fn expects_unit_limit(&self) -> bool {
            true
        }
    }

    #[test]
    fn doubling_price_fails_identity_bound() {
        let report = check_price_properties(&Doubling, &open_grid(1.0, 10)).unwrap();
        assert!(!report.below_identity);
        assert!(!report.unit_limit_one);
        assert!(report.unit_nonincreasing);
        assert_eq!(report.above_identity_at.len(), 10);
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert_eq!(
            check_price_properties(&PriceSpec::Sin, &[]),
            Err(PriceError::EmptyGrid)
        );
        assert_eq!(
            check_price_properties(&PriceSpec::Sin, &[0.5, 0.2]),
            Err(PriceError::BadGrid)
        );
    }

    #[test]
    fn json_shape() {
        let spec: PriceSpec =
            serde_json::from_str(r#"{"fn": "saturating", "params": {"beta": 2.5}}"#).unwrap();
        assert_eq!(spec, PriceSpec::Saturating { beta: 2.5 });
        assert_eq!(
            serde_json::to_string(&PriceSpec::Log1p).unwrap(),
            r#"{"fn":"log1p","params":{}}"#
        );
        let bare: PriceSpec = serde_json::from_str(r#"{"fn": "sin"}"#).unwrap();
        assert_eq!(bare, PriceSpec::Sin);
        assert!(serde_json::from_str::<PriceSpec>(r#"{"fn": "cube", "params": {}}"#).is_err());
        assert!(serde_json::from_str::<PriceSpec>(r#"{"fn": "sin", "params": {"beta": 1}}"#).is_err());
        assert!(serde_json::from_str::<PriceSpec>(r#"{"fn": "saturating", "params": {}}"#).is_err());
        assert!(
            serde_json::from_str::<PriceSpec>(r#"{"fn": "saturating", "params": {"beta": -1}}"#).is_err()
        );
        assert!(serde_json::from_str::<PriceSpec>(r#"{"fn": "sin", "extra": 1}"#).is_err());
    }

    #[test]
    fn family_names_parse() {
        for family in PriceFamily::ALL {
            assert_eq!(family.name().parse::<PriceFamily>().unwrap(), family);
        }
        assert!("tanh".parse::<PriceFamily>().is_err());
    }
}
