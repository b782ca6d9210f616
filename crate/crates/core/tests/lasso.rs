mod common;

use common::{linear_fixture, rng};
use hinge_ewa::lasso::{
    cv_select, kkt_residual, logistic_gradient, logistic_lasso_fit, soft_threshold, LassoConfig, PenaltyGrid,
};
use hinge_ewa::model::{logistic_risk, misclassification_rate};
use hinge_ewa::LabeledDataset;

fn objective(beta: &[f64], data: &LabeledDataset, penalty: f64) -> f64 {
    logistic_risk(beta, data).unwrap() + penalty * beta.iter().map(|b| b.abs()).sum::<f64>()
}

fn fixture() -> LabeledDataset {
    linear_fixture(30, &[1.0, -0.7], 1.0, &[2, 9, 17, 25], 41)
}

#[test]
fn solution_matches_brute_force_grid() {
    let data = fixture();
    for penalty in [0.01, 0.05, 0.2] {
        let fit = logistic_lasso_fit(&data, penalty, &LassoConfig::default()).unwrap();
        let mut best = f64::INFINITY;
        let mut arg = [0.0, 0.0];
        let steps = 1200;
        for i in 0..=steps {
            for j in 0..=steps {
                let b = [-3.0 + 0.005 * i as f64, -3.0 + 0.005 * j as f64];
                let f = objective(&b, &data, penalty);
                if f < best {
                    best = f;
                    arg = b;
                }
            }
        }
        let solved = objective(&fit.beta, &data, penalty);
        assert!(arg.iter().all(|b| b.abs() < 2.99), "grid minimum on the boundary: {arg:?}");
        assert!(solved - best < 1e-4, "penalty {penalty}: gap {}", solved - best);
        assert!((solved - fit.objective).abs() < 1e-12);
    }
}

#[test]
fn kkt_conditions_hold_at_convergence() {
    for seed in 0..10 {
        let data = linear_fixture(40, &[1.0, 0.0, -2.0, 0.0, 0.5], 1.0, &[1, 7], seed);
        let cfg = LassoConfig::default();
        for penalty in [0.005, 0.02, 0.1] {
            let fit = logistic_lasso_fit(&data, penalty, &cfg).unwrap();
            assert!(fit.converged);
            let g = logistic_gradient(&data, &fit.beta, None);
            for (gi, bi) in g.iter().zip(fit.beta.iter()) {
                if *bi != 0.0 {
                    assert!((gi + penalty * bi.signum()).abs() <= 10.0 * cfg.tol, "active {gi} {bi}");
                } else {
                    assert!(gi.abs() <= penalty + 10.0 * cfg.tol, "inactive {gi}");
                }
            }
            assert!(kkt_residual(&g, &fit.beta, penalty) <= 10.0 * cfg.tol);
        }
    }
}

#[test]
fn objective_is_non_increasing_along_iterations() {
    let data = fixture();
    let mut last = f64::INFINITY;
    for max_iter in 1..60 {
        let cfg = LassoConfig {
            max_iter,
            tol: 1e-14,
            ..LassoConfig::default()
        };
        let fit = logistic_lasso_fit(&data, 0.02, &cfg).unwrap();
        assert!(fit.objective <= last + 1e-15, "iteration {max_iter}: {} > {last}", fit.objective);
        last = fit.objective;
    }
}

#[test]
fn soft_threshold_unit_cases() {
    assert_eq!(soft_threshold(3.0, 1.0), 2.0);
    assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
    assert_eq!(soft_threshold(-2.5, 0.0), -2.5);
    assert_eq!(soft_threshold(1.0, 1.0), 0.0);
}

#[test]
fn huge_penalty_on_standardized_data_gives_zero() {
    let data = fixture();
    let (z, _) = hinge_ewa::io::standardize(&data, &data).unwrap();
    let fit = logistic_lasso_fit(&z, 1e9, &LassoConfig::default()).unwrap();
    assert!(fit.beta.iter().all(|&b| b == 0.0));
}

#[test]
fn separable_d1_path_grows_as_penalty_shrinks() {
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 - 9.5]).collect();
    let labels = rows.iter().map(|x| if x[0] > 0.0 { 1.0 } else { -1.0 }).collect();
    let data = LabeledDataset::from_rows(&rows, labels).unwrap();
    let grid = [0.5, 0.2, 0.1, 0.05, 0.02, 0.01];
    let betas: Vec<f64> = grid
        .iter()
        .map(|&p| logistic_lasso_fit(&data, p, &LassoConfig::default()).unwrap().beta[0].abs())
        .collect();
    assert!(betas.windows(2).all(|w| w[1] > w[0]), "{betas:?}");
}

#[test]
fn cv_on_separable_data_fits_training_set_perfectly() {
    // separable with a gap around the boundary
    let raw = linear_fixture(120, &[2.0, -1.0, 0.0], 1.0, &[], 43);
    let keep: Vec<usize> = (0..raw.n())
        .filter(|&i| (2.0 * raw.row(i)[0] - raw.row(i)[1]).abs() > 0.5)
        .take(60)
        .collect();
    let data = raw.subset(&keep).unwrap();
    let report = cv_select(&data, &LassoConfig::default(), &mut rng(44)).unwrap();
    assert_eq!(misclassification_rate(&report.fit.beta, &data).unwrap(), 0.0);
    assert_eq!(report.cv_error.len(), report.grid.len());
    assert!(report.grid.contains(&report.selected_penalty));
}

#[test]
fn cv_fold_assignment_is_deterministic() {
    let data = fixture();
    let cfg = LassoConfig {
        penalty_grid: PenaltyGrid::Auto {
            count: 10,
            min_ratio: 1e-2,
        },
        ..LassoConfig::default()
    };
    let a = cv_select(&data, &cfg, &mut rng(45)).unwrap();
    let b = cv_select(&data, &cfg, &mut rng(45)).unwrap();
    assert_eq!(a, b);
}
