use selfish_routing::braess::{
    build_classic_braess, build_priced_braess, edge_addition_experiment, rho_formula, ExperimentConfig,
};
use selfish_routing::PriceSpec;

const CATALOG: [PriceSpec; 4] = [
    PriceSpec::Identity,
    PriceSpec::Sin,
    PriceSpec::Log1p,
    PriceSpec::Saturating { beta: 1.0 },
];

#[test]
fn classic_ratio_is_four_thirds_for_every_even_n() {
    for n in [2, 4, 6, 8, 10] {
        let pair = build_classic_braess(n).unwrap();
        let report =
            edge_addition_experiment(&pair.before, &pair.after, &ExperimentConfig::default()).unwrap();
        assert!((report.before - 1.5).abs() <= 1e-12, "n={n}: {}", report.before);
        assert!((report.after - 2.0).abs() <= 1e-12, "n={n}: {}", report.after);
        assert!((report.rho - 4.0 / 3.0).abs() <= 1e-12);
        assert_eq!(report.formula_rho, Some(4.0 / 3.0));
        assert_eq!(report.after_profile.choice, vec![1; n]);
    }
}

#[test]
fn identity_price_ratio_is_eight_sevenths_for_every_even_n() {
    for n in [2, 4, 6, 8, 10] {
        let pair = build_priced_braess(n, PriceSpec::Identity, 0.5, 0.5).unwrap();
        let report =
            edge_addition_experiment(&pair.before, &pair.after, &ExperimentConfig::default()).unwrap();
        assert!((report.before - 1.75).abs() <= 1e-12);
        assert!((report.after - 2.0).abs() <= 1e-12);
        assert!((report.rho - 8.0 / 7.0).abs() <= 1e-12);
    }
}

#[test]
fn mixing_endpoints() {
    let pair = build_priced_braess(10, PriceSpec::Identity, 0.0, 1.0).unwrap();
    let report = edge_addition_experiment(&pair.before, &pair.after, &ExperimentConfig::default()).unwrap();
    assert!((report.rho - 1.0).abs() <= 1e-12);

    let pair = build_priced_braess(10, PriceSpec::Identity, 1.0, 0.0).unwrap();
    let report = edge_addition_experiment(&pair.before, &pair.after, &ExperimentConfig::default()).unwrap();
    assert!((report.rho - 4.0 / 3.0).abs() <= 1e-12);
}

#[test]
fn simulation_matches_formula() {
    for price in CATALOG {
        for n in [2, 4, 10] {
            let pair = build_priced_braess(n, price, 0.5, 0.5).unwrap();
            let report =
                edge_addition_experiment(&pair.before, &pair.after, &ExperimentConfig::default()).unwrap();
            let u = price.eval_u(1.0 / n as f64).unwrap();
            let formula = rho_formula(u, 0.5, 0.5).unwrap();
            assert!(
                (report.rho - formula).abs() <= 1e-9,
                "{price} n={n}: {} vs {formula}",
                report.rho
            );
            assert_eq!(report.formula_rho, Some(formula));
        }
    }
}

#[test]
fn log1p_four_players() {
    let pair = build_priced_braess(4, PriceSpec::Log1p, 0.5, 0.5).unwrap();
    let report = edge_addition_experiment(&pair.before, &pair.after, &ExperimentConfig::default()).unwrap();
    let u = 1.25f64.ln() / 0.25;
    assert!((u - 0.892_574).abs() < 1e-6);
    assert!((report.rho - (4.0 + 4.0 * u) / (5.0 + 2.0 * u)).abs() <= 1e-12);
    assert!((report.rho - 1.1157).abs() < 1e-4);
}

#[test]
fn severity_grows_with_unit_price() {
    let grid: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
    let rhos: Vec<f64> = grid.iter().map(|&u| rho_formula(u, 0.5, 0.5).unwrap()).collect();
    assert!(rhos.windows(2).all(|w| w[1] >= w[0]));
    assert!((rhos[1000] - 8.0 / 7.0).abs() < 1e-15);
    assert!((rhos[0] - 0.8).abs() < 1e-15);
}

#[test]
fn unequal_mixing_still_matches_formula() {
    for (c1, c2) in [(0.25, 0.75), (0.75, 0.25), (0.0, 1.0)] {
        for price in [PriceSpec::Log1p, PriceSpec::Sin] {
            let pair = build_priced_braess(4, price, c1, c2).unwrap();
            let report =
                edge_addition_experiment(&pair.before, &pair.after, &ExperimentConfig::default()).unwrap();
            let formula = rho_formula(price.eval_u(0.25).unwrap(), c1, c2).unwrap();
            assert!(
                (report.rho - formula).abs() <= 1e-9,
                "c1={c1} {price}: {} vs {formula}",
                report.rho
            );
        }
    }
}
