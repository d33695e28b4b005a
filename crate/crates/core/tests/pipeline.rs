use stsp::anneal::{anneal, AnnealParams};
use stsp::decoder::{decode, decode_sample, DecodeOutcome, DecodeViolation};
use stsp::fixtures::{t1, t2};
use stsp::model::{build_model, evaluate_assignment};
use stsp::oracle::optimal_cost;
use stsp::pmra::reduce;
use stsp::qubo::{to_qubo, Penalty};

#[test]
fn t2_reduces_to_the_t1_model() {
    let (reduced, report) = reduce(&t2()).unwrap();
    assert_eq!(reduced, t1());
    assert_eq!(report.removed_step1, vec![6, 7]);
    let a = build_model(&reduced).unwrap();
    let b = build_model(&t1()).unwrap();
    assert_eq!(a, b);
    assert_eq!(optimal_cost(&t2()).unwrap().0, 55.0);
}

#[test]
fn annealing_t1_reaches_the_optimum() {
    let inst = reduce(&t1()).unwrap().0;
    let model = build_model(&inst).unwrap();
    let qubo = to_qubo(&model, Penalty::Auto).unwrap();
    let mut best_costs = Vec::new();
    for seed in 0..4 {
        let params = AnnealParams { num_reads: 1000, seed, ..Default::default() };
        let samples = anneal(&qubo, &params);
        assert_eq!(samples.records.len(), 1000);
        let best = samples.best().unwrap();
        let report = decode_sample(&best.assignment, &qubo, &model, &inst).unwrap();
        if let Some(cost) = report.true_cost() {
            assert!(cost >= 55.0);
            assert_eq!(report.penalty_part, Some(0.0));
            assert_eq!(report.energy, Some(cost));
        }
        best_costs.push(report.true_cost());
    }
    assert!(best_costs.contains(&Some(55.0)), "{best_costs:?}");
}

#[test]
fn concurrent_walks_satisfy_the_model_but_do_not_decode() {
    // 0->1 in period 1, then 1->0 and 0->2 together in period 2, 2->0 in period 3
    let inst = t1();
    let model = build_model(&inst).unwrap();
    let mut asg = vec![false; model.num_variables()];
    for (arc, t) in [(0, 1), (1, 2), (2, 2), (5, 3)] {
        asg[model.var_index(arc, t).unwrap()] = true;
    }
    let eval = evaluate_assignment(&model, &asg).unwrap();
    assert!(eval.is_feasible());
    assert_eq!(eval.objective, 96.0);
    let report = decode(&asg, &model, &inst).unwrap();
    assert_eq!(
        report.outcome,
        DecodeOutcome::Infeasible(vec![DecodeViolation::MultipleArcs { period: 2 }])
    );
}

#[test]
fn dominant_penalty_exceeds_every_objective() {
    let model = build_model(&t1()).unwrap();
    let auto = to_qubo(&model, Penalty::Auto).unwrap();
    let dominant = to_qubo(&model, Penalty::Dominant).unwrap();
    let total: f64 = model.objective().iter().sum();
    assert_eq!(auto.penalty(), 276.0);
    assert_eq!(dominant.penalty(), total + 1.0);
    assert_eq!(auto.num_variables(), dominant.num_variables());
}
