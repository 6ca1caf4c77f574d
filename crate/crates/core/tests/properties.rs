use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use genbound::bounds::{empirical_margin_risk, iid_pac_bound, BoundSettings, RademacherInput};
use genbound::complexity::{
    bound_theorem, exact_rademacher, make_fplus, monte_carlo_rademacher, FiniteHypothesisTable,
    RademacherMode,
};
use genbound::io::{hypothesis_csv, load_hypothesis_csv};
use genbound::margins::MarginModel;
use genbound::markov::{
    analyze, random_reversible_chain, reversible_second_eigenvalue, AnalysisOptions,
};
use genbound::network::{Activation, NetworkSpec};
use genbound::Workers;
use nalgebra::DMatrix;

fn table(rows: usize, n: usize) -> impl Strategy<Value = FiniteHypothesisTable> {
    prop::collection::vec(-1.0f64..1.0, rows * n)
        .prop_map(move |v| FiniteHypothesisTable::new(rows, n, 1, v).unwrap())
}

fn linear_net(w: f64, b: f64) -> NetworkSpec {
    NetworkSpec::new(
        vec![1, 1],
        vec![DMatrix::from_row_slice(2, 1, &[w, b])],
        vec![Activation::identity()],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reversible_chains_agree_on_both_eigen_routes(seed in any::<u64>(), states in 2usize..7) {
        let chain = random_reversible_chain(states, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let a = analyze(&chain, &AnalysisOptions::default()).unwrap();
        let jacobi = reversible_second_eigenvalue(&chain).unwrap();
        prop_assert!((a.lambda - jacobi).abs() < 1e-10);
        let q = chain.transition();
        for y in 0..states {
            let flow: f64 = (0..states).map(|x| a.pi[x] * q[(x, y)]).sum();
            prop_assert!((flow - a.pi[y]).abs() < 1e-12);
        }
        let (lo, hi) = a.mixing_sandwich();
        prop_assert!(lo <= a.t_mix as f64 && a.t_mix as f64 <= hi);
    }

    #[test]
    fn signed_complexity_is_between_zero_and_fplus_abs(t in table(4, 6)) {
        let w = Workers::new(1);
        let with_zero = t.with_zero_row();
        let signed = exact_rademacher(&with_zero, RademacherMode::SignedSup, w).unwrap().value;
        let plus = exact_rademacher(&make_fplus(&t), RademacherMode::SignedSup, w).unwrap().value;
        let abs = exact_rademacher(&t, RademacherMode::AbsSupInfNorm, w).unwrap().value;
        prop_assert!(signed >= -1e-12);
        prop_assert!(abs <= plus + 1e-12);
    }

    #[test]
    fn monte_carlo_ignores_worker_count(t in table(3, 12), seed in any::<u64>()) {
        let a = monte_carlo_rademacher(&t, RademacherMode::SignedSup, 5000, seed, Workers::new(1)).unwrap();
        let b = monte_carlo_rademacher(&t, RademacherMode::SignedSup, 5000, seed, Workers::new(3)).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn hypothesis_csv_roundtrips(t in table(3, 5)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        std::fs::write(&p, hypothesis_csv(&t).unwrap()).unwrap();
        prop_assert_eq!(load_hypothesis_csv(&p).unwrap(), t);
    }

    #[test]
    fn closed_form_shrinks_with_n(w in -1.0f64..1.0, b in -1.0f64..1.0, n in 1usize..10_000) {
        let net = linear_net(w, b);
        prop_assert!(bound_theorem(&net, n + 1, 0.0).unwrap() <= bound_theorem(&net, n, 0.0).unwrap());
    }

    #[test]
    fn iid_bound_is_a_valid_probability_and_monotone_in_delta(
        margins in prop::collection::vec(-1.0f64..1.0, 1..200),
        w in -0.5f64..0.5,
        d1 in 0.01f64..0.5,
        d2 in 0.01f64..0.5,
    ) {
        let net = linear_net(w, 0.25);
        let model = MarginModel::binary(1.0).unwrap();
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let run = |delta| {
            let s = BoundSettings { delta, ..Default::default() };
            iid_pac_bound(&margins, &net, &model, RademacherInput::closed_form(&net, margins.len(), 0.0).unwrap(), &s).unwrap()
        };
        let (a, b) = (run(lo), run(hi));
        prop_assert!(a.bound_value <= 1.0 && b.bound_value <= a.bound_value + 1e-15);
        let floor = empirical_margin_risk(&margins, 2f64.powi(-10)).unwrap();
        prop_assert!(a.bound_value >= floor.min(1.0) - 1e-12);
    }
}
