use astm_core::forecast::{fit_forecaster, ForecasterSpec, LstmModel, TrainConfig};
use astm_core::harness::{
    emit_report, generate_suite, run_comparison, run_seed, simulate_with, training_series,
    ControllerKind, ExperimentConfig, FixedTiming, ForecasterSource, ScenarioSource,
};
use astm_core::Scenario;

fn small_model() -> LstmModel<f64> {
    let spec = ForecasterSpec {
        hidden: 4,
        context: 24,
        train: TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        },
        seed: 1,
    };
    fit_forecaster(&training_series(1, 3, 5), &spec).unwrap().0
}

fn short_suite(n: usize, hours: u64) -> Vec<Scenario> {
    generate_suite(n, 12)
        .into_iter()
        .map(|mut s| {
            s.horizon = hours * 3600;
            s
        })
        .collect()
}

#[test]
fn arms_see_identical_arrivals() {
    let model = small_model();
    for s in short_suite(3, 3) {
        for seed in [1, 2] {
            let run = run_seed(&s, seed);
            let fixed = simulate_with(
                ControllerKind::Fixed,
                &s,
                &FixedTiming::default(),
                Some(&model),
                run,
            )
            .unwrap();
            let astm = simulate_with(
                ControllerKind::Astm,
                &s,
                &FixedTiming::default(),
                Some(&model),
                run,
            )
            .unwrap();
            assert_eq!(fixed.arrival_stream(), astm.arrival_stream());
            assert_ne!(fixed.cycles, astm.cycles);
        }
    }
}

#[test]
fn comparison_is_reproducible_bit_for_bit() {
    let model = small_model();
    let config = ExperimentConfig {
        seeds: vec![3, 4],
        ..ExperimentConfig::default()
    };
    let suite = short_suite(3, 2);
    let a = run_comparison(&config, &suite, Some(&model)).unwrap();
    let b = run_comparison(&config, &suite, Some(&model)).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let order: Vec<(usize, u64)> = a.rows.iter().map(|r| (r.scenario, r.seed)).collect();
    assert_eq!(order, vec![(0, 3), (0, 4), (1, 3), (1, 4), (2, 3), (2, 4)]);

    let (x, y) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(&a, x.path()).unwrap();
    emit_report(&b, y.path()).unwrap();
    for f in ["per_scenario.csv", "aggregate.csv", "summary.txt"] {
        assert_eq!(
            std::fs::read(x.path().join(f)).unwrap(),
            std::fs::read(y.path().join(f)).unwrap()
        );
    }
}

#[test]
fn saved_model_drives_the_same_run() {
    let model = small_model();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let source = ForecasterSource::Load { path };
    let loaded = source.obtain().unwrap();
    assert_eq!(loaded, model);
    let s = &short_suite(1, 2)[0];
    let a = simulate_with(
        ControllerKind::Astm,
        s,
        &FixedTiming::default(),
        Some(&model),
        5,
    )
    .unwrap();
    let b = simulate_with(
        ControllerKind::Astm,
        s,
        &FixedTiming::default(),
        Some(&loaded),
        5,
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn scenario_files_feed_the_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = short_suite(2, 1)
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let p = dir.path().join(format!("s{i}.json"));
            s.save(&p).unwrap();
            p
        })
        .collect();
    let config = ExperimentConfig {
        scenarios: ScenarioSource::Files { paths },
        seeds: vec![1],
        treatment: ControllerKind::Fixed,
        fixed: FixedTiming {
            cycle: 60.0,
            greens: None,
        },
        ..ExperimentConfig::default()
    };
    let suite = config.scenarios.load().unwrap();
    assert_eq!(suite, short_suite(2, 1));
    let report = run_comparison(&config, &suite, None).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.aggregate.delay_improvement_pct, Some(0.0));
}
