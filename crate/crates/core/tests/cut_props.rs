use dhd_sddp::cuts::{Cut, CutStore};
use dhd_sddp_testkit::{random_instance, GenOptions};
use proptest::prelude::*;

fn cut_strategy(n: usize) -> impl Strategy<Value = Cut> {
    (-50.0..50.0f64, prop::collection::vec(-5.0..5.0f64, n)).prop_map(|(alpha, beta)| Cut {
        alpha,
        beta,
        iteration_born: 1,
        source_state: None,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn adding_cuts_never_lowers_the_envelope(
        cuts in prop::collection::vec(cut_strategy(2), 1..12),
        xs in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 2), 1..8),
    ) {
        let p = random_instance(0, &GenOptions::default());
        let mut store = CutStore::initialize(&p);
        for c in cuts {
            let before: Vec<f64> = xs.iter().map(|x| store.evaluate(0, 0, x).unwrap()).collect();
            store.add_cut(0, 0, c).unwrap();
            for (x, b) in xs.iter().zip(before) {
                prop_assert!(store.evaluate(0, 0, x).unwrap() >= b);
            }
        }
    }

    #[test]
    fn envelope_is_convex(
        cuts in prop::collection::vec(cut_strategy(2), 1..12),
        a in prop::collection::vec(-10.0..10.0f64, 2),
        b in prop::collection::vec(-10.0..10.0f64, 2),
        lambda in 0.0..1.0f64,
    ) {
        let p = random_instance(0, &GenOptions::default());
        let mut store = CutStore::initialize(&p);
        for c in cuts {
            store.add_cut(0, 0, c).unwrap();
        }
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
        let lhs = store.evaluate(0, 0, &mid).unwrap();
        let rhs = lambda * store.evaluate(0, 0, &a).unwrap() + (1.0 - lambda) * store.evaluate(0, 0, &b).unwrap();
        prop_assert!(lhs <= rhs + 1e-9);
    }
}

#[test]
fn initial_store_holds_stage_bounds_and_terminal_cuts() {
    let p = random_instance(4, &GenOptions::default());
    let store = CutStore::initialize(&p);
    for t in 0..p.horizon() {
        for i in 0..p.num_markov(t) {
            assert_eq!(store.cuts(t, i).unwrap().len(), 1);
            assert_eq!(store.evaluate(t, i, &[3.0, 4.0]).unwrap(), p.stage_lower_bounds[t]);
        }
    }
    let t = p.horizon();
    let x = [2.0, 7.0];
    let expected = p
        .terminal
        .for_state(0)
        .cuts
        .iter()
        .map(|c| c.eval(&x))
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(store.evaluate(t, 0, &x).unwrap(), expected);
    assert_eq!(store.total(), (0..t).map(|s| p.num_markov(s)).sum::<usize>());
}
