use defer_core::decision::SimplexVector;
use defer_core::embeddings::Embedding;
use defer_core::oracle::{lp_exact, FiniteInstance};
use defer_core::scores::{Marginals, RawScores};
use defer_core::solver::{constraint_curve, solve_single, SolverOptions};
use defer_core::{LabeledDataset, Record, ScoreTable, Split};
use proptest::prelude::*;

fn rows(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), n)
}

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (1usize..30, 3usize..5).prop_flat_map(|(n, d)| (rows(n, d), rows(n, d)))
}

fn direct(psi0: &Embedding, psi1: &Embedding, t: f64) -> f64 {
    defer_core::solver::curve::direct_value(psi0, psi1, t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn curve_is_non_increasing_and_exact((a, b) in instance(), t in 0.0f64..5.0) {
        let psi0 = Embedding::from_rows(&a).unwrap();
        let psi1 = Embedding::from_rows(&b).unwrap();
        let c = constraint_curve(&psi0, &psi1).unwrap();
        prop_assert_eq!(c.monotonicity_violations(1e-9), 0);
        let near_breakpoint = c.breakpoints.iter().any(|&k| (k - t).abs() < 1e-9);
        if !near_breakpoint {
            prop_assert!((c.value_at(t) - direct(&psi0, &psi1, t)).abs() < 1e-9);
        }
    }

    #[test]
    fn single_solver_matches_lp((a, b) in instance(), frac in 0.0f64..1.0) {
        let n = a.len();
        let psi0 = Embedding::from_rows(&a).unwrap();
        let psi1 = Embedding::from_rows(&b).unwrap();
        let c = constraint_curve(&psi0, &psi1).unwrap();
        let delta = c.min_value() + frac * (c.at_zero - c.min_value());
        let s = solve_single(&psi0, &psi1, delta, false, "c", &SolverOptions::default()).unwrap();
        let inst = FiniteInstance::new(vec![1.0 / n as f64; n], a, vec![b]).unwrap();
        let lp = lp_exact(&inst, &[delta]).unwrap();
        prop_assert!((s.objective - lp.objective).abs() <= 1e-9, "{} vs {}", s.objective, lp.objective);
        prop_assert!(s.constraint_value <= delta + 1e-9);
    }

    #[test]
    fn outputs_are_distributions((a, b) in instance(), t in 0.0f64..3.0, p in 0.0f64..1.0) {
        let psi0 = Embedding::from_rows(&a).unwrap();
        let psi1 = Embedding::from_rows(&b).unwrap();
        for f in defer_core::solver::curve::predictor_outputs(&psi0, &psi1, t, p, 1e-12) {
            let w = f.weights();
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(SimplexVector::new(w.to_vec()).is_ok());
        }
    }

    #[test]
    fn score_csv_round_trips(
        p in prop::collection::vec((0.01f64..0.99, 0.01f64..0.99, 0.01f64..0.99, 0.0f64..1.0), 1..40)
    ) {
        let raw = RawScores {
            p_y: p.iter().map(|r| vec![1.0 - r.0, r.0]).collect(),
            p_agree: p.iter().map(|r| r.1).collect(),
            p_m1: Some(p.iter().map(|r| r.2).collect()),
            p_m1_y1: Some(p.iter().map(|r| r.0 * r.2).collect()),
            p_m0_y0: Some(p.iter().map(|r| (1.0 - r.0) * r.3).collect()),
            density_ratio: Some(p.iter().map(|r| r.3).collect()),
            ..RawScores::default()
        };
        let m = Marginals { p_group: vec![0.5, 0.5], p_label: vec![0.4, 0.6], p_label_group: vec![vec![0.2, 0.2], vec![0.3, 0.3]] };
        let table = ScoreTable::new(raw, m.clone()).unwrap();
        let mut buf = Vec::new();
        table.to_csv_writer(&mut buf).unwrap();
        let back = ScoreTable::from_csv_reader(buf.as_slice(), m.clone(), Some(p.len())).unwrap();
        prop_assert_eq!(&back, &table);
        prop_assert_eq!(Marginals::from_kv_str(&m.to_kv_string()).unwrap(), m);
    }

    #[test]
    fn dataset_csv_round_trips(
        recs in prop::collection::vec((prop::collection::vec(-1e3f64..1e3, 2), 0usize..2, 0usize..3, 0usize..3, 0usize..3), 3..40)
    ) {
        let splits = [Split::Train, Split::Val, Split::Test];
        let records: Vec<Record> = recs
            .iter()
            .map(|(f, g, m, y, s)| Record { features: f.clone(), group: *g, expert: *m, label: *y, split: splits[*s] })
            .collect();
        let ds = LabeledDataset::new(records, 3).unwrap();
        let mut buf = Vec::new();
        ds.to_csv_writer(&mut buf).unwrap();
        let back = LabeledDataset::from_csv_reader(buf.as_slice(), Some(3), 0).unwrap();
        prop_assert_eq!(back.records(), ds.records());
    }
}
