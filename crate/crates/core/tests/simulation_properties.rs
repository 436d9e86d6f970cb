use gmib_engine::simulation::DeferralSample;
use gmib_engine::{
    estimate_value, exercise_probability, expected_terminal_mean, simulate_terminal, ContractTerms,
    FeeStructure, MarketModel, SimPlan,
};
use proptest::prelude::*;

fn small_plan(seed: u64) -> SimPlan {
    SimPlan::new(400, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn account_is_never_negative(seed in any::<u64>(), c in 0.0..0.2f64, sigma in 0.0..0.6f64) {
        let terms = ContractTerms::default().with_fee_rate(c);
        let model = MarketModel { sigma, ..MarketModel::default() };
        let sample = simulate_terminal(&terms, &model, &small_plan(seed), None).unwrap();
        prop_assert!(sample.values.iter().all(|&v| v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn higher_fees_lower_every_path(seed in any::<u64>(), c in 0.0..0.05f64, dc in 0.0001..0.02f64) {
        let (terms, model) = (ContractTerms::default(), MarketModel::default());
        let plan = small_plan(seed);
        let low = simulate_terminal(&terms.with_fee_rate(c), &model, &plan, None).unwrap();
        let high = simulate_terminal(&terms.with_fee_rate(c + dc), &model, &plan, None).unwrap();
        prop_assert!(low.values.iter().zip(&high.values).all(|(a, b)| b <= a));
    }

    #[test]
    fn value_and_probability_rise_with_g(seed in any::<u64>(), g in 0.0..0.12f64, dg in 0.0..0.02f64) {
        let base = ContractTerms { fee_structure: FeeStructure::F1, ..ContractTerms::default() };
        let model = MarketModel::default();
        let lo = base.with_payment_rate(g);
        let hi = base.with_payment_rate(g + dg);
        let sample = simulate_terminal(&lo, &model, &small_plan(seed), None).unwrap();
        prop_assert!(estimate_value(&hi, &model, &sample).unwrap().estimate >= estimate_value(&lo, &model, &sample).unwrap().estimate);
        prop_assert!(exercise_probability(&hi, &model, &sample).unwrap().estimate >= exercise_probability(&lo, &model, &sample).unwrap().estimate);
    }

    #[test]
    fn worker_count_does_not_change_results(seed in any::<u64>(), workers in 2usize..9) {
        let (terms, model) = (ContractTerms::default(), MarketModel::default());
        let plan = SimPlan::new(3000, seed);
        let one = simulate_terminal(&terms, &model, &plan.with_workers(1), None).unwrap();
        let many = simulate_terminal(&terms, &model, &plan.with_workers(workers), None).unwrap();
        prop_assert_eq!(one.values, many.values);
    }
}

#[test]
fn deferral_replay_is_bit_identical_to_direct_extension() {
    let (terms, model) = (ContractTerms::default(), MarketModel::default());
    let plan = SimPlan::new(2000, 5);
    let deferral = DeferralSample::simulate(&terms, &model, &plan).unwrap();
    for r in [0.0, 0.03, 0.07, 0.15] {
        let ext = gmib_engine::Extension { extra_years: 1, rate: r, charge_fees: true };
        let direct = simulate_terminal(&terms, &model, &plan, Some(&ext)).unwrap();
        assert_eq!(deferral.extend(r, true).unwrap().values, direct.values);
    }
}

#[test]
fn zero_volatility_matches_the_closed_form_exactly() {
    let terms = ContractTerms::default();
    let model = MarketModel { sigma: 0.0, ..MarketModel::default() };
    let sample = simulate_terminal(&terms, &model, &SimPlan::new(10, 1), None).unwrap();
    let oracle = expected_terminal_mean(&terms, &model, None).unwrap();
    for v in sample.values {
        assert!((v - oracle).abs() <= 1e-8 * oracle);
    }
}
