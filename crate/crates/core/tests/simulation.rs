use defer_core::embeddings::ConstraintSpec;
use defer_core::simulate::{generate, ScenarioConfig};
use defer_core::{
    build_embeddings, fit_policy, fit_scores, ExpertModel, FitConfig, GridSpec, PolicyMode, SolverOptions, Split,
};

fn scenario(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n_train: 0,
        n_val: 10_000,
        n_test: 0,
        seed,
        ..ScenarioConfig::default()
    }
}

#[test]
fn expert_agreement_concentrates_on_group_accuracy() {
    let sim = generate(&scenario(11)).unwrap();
    for (a, acc) in [(0, 0.85), (1, 0.60)] {
        let recs: Vec<_> = sim.dataset.records().iter().filter(|r| r.group == a).collect();
        let n = recs.len() as f64;
        let rate = recs.iter().filter(|r| r.expert == r.label).count() as f64 / n;
        let sigma = (acc * (1.0 - acc) / n).sqrt();
        assert!((rate - acc).abs() <= 3.0 * sigma, "group {a}: {rate}");
    }
}

#[test]
fn truth_scores_satisfy_tower_property() {
    let sim = generate(&scenario(12)).unwrap();
    let n = sim.dataset.len() as f64;
    let mean_p: f64 = (0..sim.truth.len()).map(|i| sim.truth.p_y(i)[1]).sum::<f64>() / n;
    let rate = sim.dataset.labels().filter(|&y| y == 1).count() as f64 / n;
    let sigma = (rate * (1.0 - rate) / n).sqrt();
    assert!((mean_p - rate).abs() <= 3.0 * sigma, "{mean_p} vs {rate}");
}

#[test]
fn dp_with_truth_scores_meets_tolerance_on_tuning_set() {
    let sim = generate(&scenario(13)).unwrap();
    let val = sim.dataset.split(Split::Val).unwrap();
    let groups: Vec<usize> = val.records().iter().map(|r| r.group).collect();
    for delta in [0.0, 0.02, 0.05] {
        let set = build_embeddings(&sim.truth, &groups, &[ConstraintSpec::Dp { delta }]).unwrap();
        let policy = fit_policy(&set, PolicyMode::Randomized, &SolverOptions::default(), &GridSpec::default()).unwrap();
        let achieved = policy.summary.constraint_values[0];
        assert!(achieved.abs() <= delta + 1e-9, "delta {delta}: {achieved}");
    }
}

#[test]
fn conditional_expert_model_recovers_joint_scores() {
    let sim = generate(&ScenarioConfig {
        n_train: 10_000,
        n_val: 2_000,
        n_test: 0,
        seed: 14,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let train = sim.dataset.split(Split::Train).unwrap();
    let val = sim.dataset.split(Split::Val).unwrap();
    let truth = sim.truth.subset(&sim.dataset.split_indices(Split::Val));
    let error = |model: ExpertModel, column: &str| {
        let cfg = FitConfig {
            expert_model: model,
            ..FitConfig::default()
        };
        let scores = fit_scores(&train, &cfg).unwrap().score(&val).unwrap();
        let (fit, exact) = (scores.column(column).unwrap(), truth.column(column).unwrap());
        fit.iter().zip(exact).map(|(a, b)| (a - b).abs()).sum::<f64>() / fit.len() as f64
    };
    for column in ["p_agree", "p_m1", "p_m1_y1", "p_m0_y0", "p_mneq_y_1"] {
        let conditional = error(ExpertModel::Conditional, column);
        assert!(conditional < 0.02, "{column}: {conditional}");
    }
    assert!(error(ExpertModel::Conditional, "p_m1_y1") < error(ExpertModel::Joint, "p_m1_y1"));
}
