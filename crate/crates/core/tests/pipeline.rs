use logistic_cde::dataset::{
    apply_normalization, fit_normalization, kfold_by_group, load_table, Dataset, LoadOptions, Table,
};
use logistic_cde::experiment::{
    covariate_sweep, emit_quantile_curves, run_cv, run_simulation_study, ExperimentConfig, FitSettings, FittedModel,
    Method,
};
use logistic_cde::fit::SgdConfig;
use logistic_cde::simgen::{generate, ScenarioConfig};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn grouped_data(groups: usize, per: usize, seed: u64) -> Dataset {
    let sc = generate(&ScenarioConfig::new(3, groups * per * 2, seed)).unwrap();
    let d = sc.train.subset(&(0..groups * per).collect::<Vec<_>>());
    let labels = (0..d.n()).map(|i| format!("storm{:02}", i % groups)).collect();
    d.with_groups(labels).unwrap()
}

fn bits(m: &FittedModel) -> Vec<u64> {
    let mut v: Vec<u64> = m.model.params().iter().map(|t| t.to_bits()).collect();
    v.extend(m.normalization.mean.iter().chain(&m.normalization.sd).map(|t| t.to_bits()));
    v.extend(m.transform.beta.iter().map(|t| t.to_bits()));
    v.push(m.transform.sigma.to_bits());
    v
}

/// Perturbing held-out responses must not move anything fitted on the
/// training folds.
#[test]
fn test_fold_canary() {
    let data = grouped_data(10, 12, 3);
    let mut ipp = FitSettings::new(Method::MlpIpp, 0.0075);
    ipp.hidden_width = 6;
    ipp.output_width = 6;
    ipp.sgd = SgdConfig { total_steps: 60, ..Default::default() };
    let settings = [FitSettings::new(Method::PolyMcc, 0.025), ipp];
    let before = run_cv(&data, 5, &settings, 17, 100).unwrap();

    let mut poisoned = data.clone();
    let held_out = &before.folds[0].test_rows;
    for &i in held_out {
        poisoned.response[i] = 1e6 * (i as f64 + 1.0);
    }
    let after = run_cv(&poisoned, 5, &settings, 17, 100).unwrap();
    for (a, b) in before.folds.iter().zip(&after.folds) {
        assert_eq!(a.test_rows, b.test_rows);
        if a.fold == 0 {
            assert_eq!(bits(&a.model), bits(&b.model), "fold 0 {:?}", a.method);
            assert_ne!(a.crps.mean, b.crps.mean);
        } else {
            assert_ne!(bits(&a.model), bits(&b.model));
        }
    }
}

#[test]
fn datasets_round_trip_through_the_loader() {
    let data = grouped_data(4, 5, 8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    data.write_csv(&path).unwrap();
    let loaded = load_table(&path, &LoadOptions::new("y").group("group")).unwrap();
    assert_eq!(loaded.rows_dropped, 0);
    let back = loaded.data;
    assert_eq!(back.features.map(|v| v.to_bits()), data.features.map(|v| v.to_bits()));
    assert_eq!(back.response.map(|v| v.to_bits()), data.response.map(|v| v.to_bits()));
    assert_eq!(back.groups, data.groups);
}

fn assert_table_round_trip(table: &Table, dir: &std::path::Path, response: &str, text: &[&str]) {
    let path = dir.join(format!("{response}.csv"));
    table.write_csv(&path).unwrap();
    assert_eq!(&Table::read_csv(&path).unwrap(), table);
    let mut opts = LoadOptions::new(response);
    opts.exclude = text.iter().map(|s| s.to_string()).collect();
    let d = load_table(&path, &opts).unwrap().data;
    let want = table.numeric_column(response).unwrap();
    assert_eq!(d.response.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), want.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    for (j, name) in d.column_names.iter().enumerate() {
        let col = table.numeric_column(name).unwrap();
        for (i, v) in col.iter().enumerate() {
            assert_eq!(d.features[[i, j]].to_bits(), v.to_bits(), "{name} row {i}");
        }
    }
}

#[test]
fn emitted_tables_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        scenarios: vec![3],
        sizes: vec![80],
        replicates: 2,
        methods: vec![Method::PolyMcc, Method::OlsGaussian],
        seed: 5,
        ..Default::default()
    };
    let study = run_simulation_study(&cfg).unwrap();
    assert_table_round_trip(&study.scores, dir.path(), "divergence", &["method", "label", "status"]);
    assert_table_round_trip(&study.summary, dir.path(), "median", &["method", "label"]);
    assert_table_round_trip(&study.timing, dir.path(), "mean_seconds", &["method", "label"]);

    let sc = generate(&ScenarioConfig::new(3, 120, 6)).unwrap();
    let m = FittedModel::fit(&sc.train, &FitSettings::new(Method::PolyMcc, 0.025), 1).unwrap();
    let grid = covariate_sweep(&m, 0, 0.5, 9.5, 4).unwrap();
    let curves = emit_quantile_curves(&m, &grid, &m.feature_names, 100).unwrap();
    assert_table_round_trip(&curves, dir.path(), "probability", &[]);

    let data = grouped_data(5, 8, 9);
    let cv = run_cv(&data, 5, &[FitSettings::new(Method::OlsGaussian, 0.0)], 2, 100).unwrap();
    assert_table_round_trip(&cv.table(), dir.path(), "mean_crps", &["method", "label"]);
    assert_table_round_trip(&cv.fold_table(), dir.path(), "fold", &["method"]);
}

#[test]
fn simulated_replicates_are_bitwise_reproducible() {
    for model in 1..=4 {
        let a = generate(&ScenarioConfig::new(model, 300, 77)).unwrap();
        let b = generate(&ScenarioConfig::new(model, 300, 77)).unwrap();
        let f = |s: &logistic_cde::simgen::Scenario| {
            let mut v: Vec<u64> = s.train.features.iter().chain(s.train.response.iter()).map(|t| t.to_bits()).collect();
            v.extend(s.params.beta1.iter().chain(&s.params.beta2).map(|t| t.to_bits()));
            v
        };
        assert_eq!(f(&a), f(&b));
        assert_eq!(a.test_truth, b.test_truth);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalization_round_trips(seed in 0u64..1000, n in 3usize..40, p in 1usize..5) {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 * 200.0 - 100.0
        };
        let x = Array2::from_shape_simple_fn((n, p), &mut next);
        let d = Dataset::from_arrays(x.clone(), Array1::zeros(n)).unwrap();
        let params = fit_normalization(&d).unwrap();
        let z = apply_normalization(&d, &params).unwrap();
        let back = params.invert(&z.features).unwrap();
        for (a, b) in back.iter().zip(x.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn folds_partition_rows(seed in 0u64..1000, groups in 5usize..20, k in 2usize..5) {
        let n = groups * 3;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let d = Dataset::from_arrays(x, Array1::zeros(n))
            .unwrap()
            .with_groups((0..n).map(|i| format!("g{}", i % groups)).collect())
            .unwrap();
        let folds = kfold_by_group(&d, k, seed).unwrap();
        let mut seen = vec![0; n];
        for f in &folds {
            for &i in &f.test {
                seen[i] += 1;
            }
            prop_assert_eq!(f.test.len() + f.train.len(), n);
            let g = d.groups.as_ref().unwrap();
            for &i in &f.test {
                prop_assert!(f.train.iter().all(|&j| g[j] != g[i]));
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert_eq!(folds, kfold_by_group(&d, k, seed).unwrap());
    }
}
