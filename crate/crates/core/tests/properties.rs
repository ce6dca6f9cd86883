use proptest::prelude::*;

use legrm::demand::{curve_from_frat5, DemandCurve};
use legrm::discrete::{exact_optimize, greedy_optimize, prune_dominated_prices, SearchConfig};
use legrm::policies::{emsrb_policy, mr_transform, mrt_emsrb_policy, classic_emsrb_policy, FareClass};
use legrm::relaxed::{dual_gradient, dual_objective, solve_dual, DEFAULT_MAX_ITER, DEFAULT_TOL};
use legrm::scenario::{
    generate_synthetic, load_scenario, save_scenario, validate_scenario, DemandCell, GeneratorSpec,
    Product, Scenario,
};
use legrm::simulator::{simulate_greedy_rolling, simulate_policy};

fn curve() -> impl Strategy<Value = DemandCurve> {
    (0.0..50.0f64, 1.05..5.0f64, 20.0..800.0f64)
        .prop_map(|(q, f, pmin)| curve_from_frat5(q, f, pmin).unwrap())
}

fn small_scenario() -> impl Strategy<Value = Scenario> {
    let product = (1usize..=4, 50.0..300.0f64, 1usize..=3).prop_flat_map(|(n, base, horizon)| {
        (
            prop::collection::vec(5.0..150.0f64, n),
            prop::collection::vec((0.0..15.0f64, 1.1..4.0f64), horizon),
        )
            .prop_map(move |(steps, cells)| {
                let mut p = base.round();
                let ladder = steps
                    .iter()
                    .map(|d| {
                        let x = p;
                        p += d.round().max(1.0);
                        x
                    })
                    .collect();
                (ladder, cells)
            })
    });
    (1usize..=2, 1usize..=3, 1u32..60).prop_flat_map(move |(n, horizon, capacity)| {
        prop::collection::vec(product.clone(), n).prop_map(move |ps| Scenario {
            capacity,
            horizon,
            products: ps
                .into_iter()
                .enumerate()
                .map(|(i, (ladder, cells))| Product {
                    id: format!("P{i}"),
                    price_ladder: ladder,
                    cells: cells
                        .iter()
                        .cycle()
                        .take(horizon)
                        .map(|&(q, f)| DemandCell { mean_demand_at_min: q, frat5: f })
                        .collect(),
                })
                .collect(),
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn arbitrary_text_never_panics(src in ".{0,300}") {
        if let Ok(s) = load_scenario(&src) {
            prop_assert!(validate_scenario(&s).is_empty());
        }
    }

    #[test]
    fn mutated_documents_never_panic(s in small_scenario(), cut in 0usize..400, junk in "[\\[\\]=a-z0-9., \\n\"-]{0,12}") {
        let text = save_scenario(&s);
        let cut = cut.min(text.len());
        let cut = (0..=cut).rev().find(|&k| text.is_char_boundary(k)).unwrap();
        let mutated = format!("{}{}{}", &text[..cut], junk, &text[cut..]);
        if let Ok(back) = load_scenario(&mutated) {
            prop_assert!(validate_scenario(&back).is_empty());
        }
    }

    #[test]
    fn documents_round_trip(s in small_scenario()) {
        prop_assert_eq!(load_scenario(&save_scenario(&s)).unwrap(), s);
    }

    #[test]
    fn generator_is_deterministic_and_valid(seed in any::<u64>(), products in 1usize..5, horizon in 1usize..12) {
        let spec = GeneratorSpec { products, horizon, ..GeneratorSpec::baseline() };
        let a = generate_synthetic(&spec, seed).unwrap();
        prop_assert!(validate_scenario(&a).is_empty());
        prop_assert_eq!(save_scenario(&a), save_scenario(&generate_synthetic(&spec, seed).unwrap()));
    }

    #[test]
    fn dual_is_convex_and_weakly_bounds_primal(cells in prop::collection::vec(curve(), 1..12), c in 0.5..300.0f64, mu in 0.0..2000.0f64, h in 0.1..100.0f64) {
        prop_assume!(cells.iter().any(|x| !x.is_zero()));
        // gradient is non-decreasing in mu
        prop_assert!(dual_gradient(&cells, c, mu) <= dual_gradient(&cells, c, mu + h) + 1e-9);
        let sol = solve_dual(&cells, c, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        // any dual point bounds the optimum from above
        prop_assert!(dual_objective(&cells, c, mu) >= sol.bound * (1.0 - 1e-9) - 1e-9);
        // prices that fill at most capacity earn at most the bound
        let scale = (c / cells.iter().map(|x| x.alpha).sum::<f64>()).min(1.0);
        let feasible: f64 = cells
            .iter()
            .filter(|x| !x.is_zero())
            .map(|x| {
                let p = (x.alpha / (x.alpha * scale)).ln() / x.beta + 1e-9;
                p * x.alpha * (-x.beta * p).exp()
            })
            .sum();
        prop_assert!(feasible <= sol.bound * (1.0 + 1e-9) + 1e-9);
        prop_assert!(sol.kkt.capacity_slack >= -1e-9 * c);
    }

    #[test]
    fn pruning_keeps_the_optimum(s in small_scenario()) {
        let c = f64::from(s.capacity);
        let pruned = exact_optimize(&s, c, &SearchConfig::default()).unwrap();
        let full = exact_optimize(&s, c, &SearchConfig { prune_dominated: false, ..SearchConfig::default() }).unwrap();
        prop_assert_eq!(pruned.feasible, full.feasible);
        if full.feasible {
            prop_assert!((pruned.expected_revenue - full.expected_revenue).abs() <= 1e-9 * full.expected_revenue.max(1.0));
            let greedy = greedy_optimize(&s, c, s.horizon - 1, &SearchConfig::default()).unwrap();
            prop_assert!(greedy.feasible);
            prop_assert!(greedy.expected_demand <= c + 1e-6);
            prop_assert!(greedy.expected_revenue <= full.expected_revenue * (1.0 + 1e-9) + 1e-9);
        }
    }

    #[test]
    fn pruned_ladders_keep_their_best_price(ladder in prop::collection::btree_set(1u32..2000, 1..8), c in curve()) {
        let ladder: Vec<f64> = ladder.into_iter().map(f64::from).collect();
        let kept = prune_dominated_prices(&ladder, &c).unwrap();
        prop_assert!(!kept.is_empty());
        prop_assert!(kept.iter().all(|p| ladder.contains(p)));
        prop_assert_eq!(*kept.last().unwrap(), *ladder.last().unwrap());
        let best = |xs: &[f64]| xs.iter().map(|&p| p * c.alpha * (-c.beta * p).exp()).fold(f64::MIN, f64::max);
        prop_assert!((best(&kept) - best(&ladder)).abs() <= 1e-9 * best(&ladder).abs().max(1.0));
    }

    #[test]
    fn marginal_revenues_telescope(classes in prop::collection::vec((1.0..50.0f64, 0.0..40.0f64), 1..7)) {
        let mut fare = 2000.0;
        let fam: Vec<FareClass> = classes
            .iter()
            .map(|&(gap, d)| {
                fare -= gap;
                FareClass::new(0, fare, d, d.sqrt())
            })
            .collect();
        let out = mr_transform(&fam).unwrap();
        let total: f64 = out.iter().map(|c| c.adjusted_fare * c.adjusted_mean).sum();
        let last = out.last().unwrap();
        prop_assert!((total - last.cumulative_revenue).abs() <= 1e-6 * last.cumulative_revenue.max(1.0));
        let q: f64 = fam.iter().map(|c| c.mean_demand).sum();
        prop_assert!((last.cumulative_demand - q).abs() <= 1e-9 * q.max(1.0));
    }

    #[test]
    fn nested_limits_are_ordered(classes in prop::collection::vec((50.0..2000.0f64, 0.0..40.0f64, 0.0..10.0f64), 1..8), cap in 0.0..200.0f64) {
        let fcs: Vec<FareClass> = classes.iter().map(|&(f, m, s)| FareClass::new(0, f, m, s)).collect();
        let p = emsrb_policy(&fcs, cap).unwrap();
        prop_assert_eq!(p.protections.len() + 1, p.ordered_classes.len());
        prop_assert!(p.protections.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(p.protections.iter().all(|&y| (0.0..=cap).contains(&y)));
        prop_assert!(p.booking_limits.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(p.booking_limits[0], cap);
        prop_assert!(p.booking_limits.iter().all(|&b| (0.0..=cap).contains(&b)));
        prop_assert!(p.ordered_classes.windows(2).all(|w| w[0].adjusted_fare >= w[1].adjusted_fare));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn simulations_conserve_seats_and_money(s in small_scenario(), seed in any::<u64>()) {
        let c = s.capacity;
        let mrt = mrt_emsrb_policy(&s, f64::from(c), s.horizon - 1).unwrap();
        let classic = classic_emsrb_policy(&s, f64::from(c), s.horizon - 1).unwrap();
        let outcomes = [
            simulate_policy(&s, &mrt, c, seed).unwrap(),
            simulate_policy(&s, &classic, c, seed).unwrap(),
            simulate_greedy_rolling(&s, &s, c, seed, &SearchConfig::default()).unwrap(),
        ];
        let arrivals: Vec<usize> = outcomes[0].ledger.iter().map(|r| r.arrivals).collect();
        for o in &outcomes {
            prop_assert!(o.seats_sold <= c);
            let sold: f64 = o.ledger.iter().flat_map(|r| &r.sales).map(|x| x.price).sum();
            prop_assert!((sold - o.revenue).abs() <= 1e-6);
            // common random numbers: every policy sees the same passengers
            prop_assert_eq!(o.ledger.iter().map(|r| r.arrivals).collect::<Vec<_>>(), arrivals.clone());
            for r in &o.ledger {
                prop_assert!(r.sales.len() <= r.arrivals);
                prop_assert!(r.sales.iter().all(|x| x.price <= x.wtp));
            }
        }
    }
}
