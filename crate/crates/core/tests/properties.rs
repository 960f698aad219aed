use dynclust::fractional::{close, water_fill, TOL};
use dynclust::learner::{FractionalLearner, LearnerConfig};
use dynclust::oracle::{best_static_centers, lp_cost_bruteforce};
use dynclust::{connection_cost, fractional_cost, CenterSet, ClientRound, FractionalOpening, MetricSpace, NormOrder};
use proptest::prelude::*;

fn norm_order() -> impl Strategy<Value = NormOrder> {
    prop_oneof![
        Just(NormOrder::Finite(1.0)),
        Just(NormOrder::Finite(2.0)),
        (1.0f64..12.0).prop_map(NormOrder::Finite),
        Just(NormOrder::Infinity),
    ]
}

fn points(max_n: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0).prop_map(|(x, y)| [x, y]), 2..=max_n)
}

/// Space, opening with mass `k` and a client multiset.
fn instance(max_n: usize, max_r: usize) -> impl Strategy<Value = (MetricSpace, FractionalOpening, ClientRound)> {
    points(max_n).prop_flat_map(move |pts| {
        let n = pts.len();
        (
            Just(pts),
            1..=n.min(4),
            prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], n),
            prop::collection::vec(0..n, 0..=max_r),
        )
            .prop_map(|(pts, k, mut w, r)| {
                if w.iter().all(|&v| v == 0.0) {
                    w[0] = 1.0;
                }
                let total: f64 = w.iter().sum();
                let y = w.iter().map(|v| v * k as f64 / total).collect();
                (
                    MetricSpace::from_points(pts).unwrap(),
                    FractionalOpening::new(y, k).unwrap(),
                    ClientRound::new(r),
                )
            })
    })
}

proptest! {
    #[test]
    fn cost_monotone_under_adding_centers(
        pts in points(12),
        seed_centers in prop::collection::vec(0usize..12, 1..4),
        extra in 0usize..12,
        clients in prop::collection::vec(0usize..12, 0..8),
        p in norm_order(),
    ) {
        let n = pts.len();
        let space = MetricSpace::from_points(pts).unwrap();
        let base = CenterSet::new(seed_centers.iter().map(|c| c % n).collect());
        let more = CenterSet::new(base.iter().chain([extra % n]).collect());
        let round = ClientRound::new(clients.iter().map(|c| c % n).collect());
        let a = connection_cost(&space, &round, &base, p).unwrap();
        let b = connection_cost(&space, &round, &more, p).unwrap();
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn cost_matches_direct_formula(
        pts in points(10),
        centers in prop::collection::vec(0usize..10, 1..4),
        clients in prop::collection::vec(0usize..10, 1..8),
    ) {
        let n = pts.len();
        let space = MetricSpace::from_points(pts).unwrap();
        let f = CenterSet::new(centers.iter().map(|c| c % n).collect());
        let round = ClientRound::new(clients.iter().map(|c| c % n).collect());
        let d: Vec<f64> = round
            .iter()
            .map(|j| f.iter().map(|c| space.dist(j, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let sum: f64 = d.iter().sum();
        let max = d.iter().copied().fold(0.0, f64::max);
        let l2 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(close(connection_cost(&space, &round, &f, NormOrder::Finite(1.0)).unwrap(), sum));
        prop_assert!(close(connection_cost(&space, &round, &f, NormOrder::Finite(2.0)).unwrap(), l2));
        prop_assert_eq!(connection_cost(&space, &round, &f, NormOrder::Infinity).unwrap(), max);
    }

    #[test]
    fn single_client_cost_ignores_p(
        pts in points(10),
        centers in prop::collection::vec(0usize..10, 1..4),
        client in 0usize..10,
        p in norm_order(),
    ) {
        let n = pts.len();
        let space = MetricSpace::from_points(pts).unwrap();
        let f = CenterSet::new(centers.iter().map(|c| c % n).collect());
        let round = ClientRound::new(vec![client % n]);
        let a = connection_cost(&space, &round, &f, p).unwrap();
        let b = connection_cost(&space, &round, &f, NormOrder::Finite(1.0)).unwrap();
        prop_assert!(close(a, b));
    }

    #[test]
    fn water_fill_is_feasible((space, y, round) in instance(15, 8)) {
        for fill in water_fill(&space, &y, &round).unwrap() {
            let total: f64 = fill.support.iter().map(|&(_, x)| x).sum();
            prop_assert!((total - 1.0).abs() <= TOL);
            let mut beta = 0.0;
            for &(i, x) in &fill.support {
                prop_assert!(x > 0.0 && x <= y.values()[i] + TOL);
                beta += space.dist(fill.client, i) * x;
            }
            prop_assert!(close(beta, fill.beta));
        }
    }

    #[test]
    fn fractional_cost_is_convex(
        (space, y, round) in instance(12, 6),
        w in prop::collection::vec(0.0f64..1.0, 12),
        theta in 0.0f64..1.0,
        p in norm_order(),
    ) {
        let n = space.n();
        let k = y.k();
        let mut w: Vec<f64> = w[..n].to_vec();
        w[0] += 0.1;
        let total: f64 = w.iter().sum();
        let y2 = FractionalOpening::new(w.iter().map(|v| v * k as f64 / total).collect(), k).unwrap();
        let mix = FractionalOpening::new(
            y.values().iter().zip(y2.values()).map(|(a, b)| theta * a + (1.0 - theta) * b).collect(),
            k,
        )
        .unwrap();
        let a = fractional_cost(&space, &y, &round, p).unwrap();
        let b = fractional_cost(&space, &y2, &round, p).unwrap();
        let m = fractional_cost(&space, &mix, &round, p).unwrap();
        prop_assert!(m <= theta * a + (1.0 - theta) * b + 1e-9);
    }

    #[test]
    fn integral_opening_costs_match(
        pts in points(10),
        centers in prop::collection::vec(0usize..10, 1..4),
        clients in prop::collection::vec(0usize..10, 0..6),
        p in norm_order(),
    ) {
        let n = pts.len();
        let space = MetricSpace::from_points(pts).unwrap();
        let f = CenterSet::new(centers.iter().map(|c| c % n).collect());
        let y = FractionalOpening::indicator(n, &f).unwrap();
        let round = ClientRound::new(clients.iter().map(|c| c % n).collect());
        let fc = fractional_cost(&space, &y, &round, p).unwrap();
        let c = connection_cost(&space, &round, &f, p).unwrap();
        prop_assert!(close(fc, c));
    }

    #[test]
    fn learner_stays_in_scaled_simplex(
        (space, _, _) in instance(10, 0),
        k in 1usize..4,
        rounds in prop::collection::vec(prop::collection::vec(0usize..10, 0..4), 1..30),
        p in norm_order(),
    ) {
        prop_assume!(space.diameter() > 0.0);
        let n = space.n();
        let k = k.min(n);
        let mut learner = FractionalLearner::new(LearnerConfig::new(&space, k, 30, 4)).unwrap();
        for r in rounds {
            let round = ClientRound::new(r.iter().map(|c| c % n).collect());
            learner.step(&space, &round, p).unwrap();
            let y = learner.opening().values();
            prop_assert!(y.iter().all(|&v| v >= 0.0 && v.is_finite()));
            prop_assert!((y.iter().sum::<f64>() - k as f64).abs() <= TOL * k as f64);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn water_fill_matches_lp_oracle((space, y, round) in instance(6, 4), p in norm_order()) {
        let fast = fractional_cost(&space, &y, &round, p).unwrap();
        let slow = lp_cost_bruteforce(&space, &y, &round, p).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-7, "water fill {} vs oracle {}", fast, slow);
    }
}

/// Reversed-order enumeration of all k-subsets, keeping the
/// lexicographically smallest among equal costs.
fn reversed_static(space: &MetricSpace, rounds: &[ClientRound], k: usize, p: NormOrder) -> (Vec<usize>, f64) {
    let n = space.n();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for mask in (0u32..1 << n).rev() {
        if mask.count_ones() as usize != k {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let f = CenterSet::new(set.clone());
        let cost: f64 = rounds.iter().map(|r| connection_cost(space, r, &f, p).unwrap()).sum();
        let better = match &best {
            None => true,
            Some((s, c)) => cost < *c || (cost == *c && set < *s),
        };
        if better {
            best = Some((set, cost));
        }
    }
    best.unwrap()
}

proptest! {
    #[test]
    fn static_oracle_is_order_independent(
        pts in points(8),
        k in 1usize..4,
        rounds in prop::collection::vec(prop::collection::vec(0usize..8, 0..4), 1..12),
        p in norm_order(),
    ) {
        let n = pts.len();
        let k = k.min(n);
        let space = MetricSpace::from_points(pts).unwrap();
        let rounds: Vec<ClientRound> = rounds
            .iter()
            .map(|r| ClientRound::new(r.iter().map(|c| c % n).collect()))
            .collect();
        let (f, cost) = best_static_centers(&space, &rounds, k, p).unwrap();
        let (g, cost2) = reversed_static(&space, &rounds, k, p);
        prop_assert_eq!(cost, cost2);
        prop_assert_eq!(f.as_slice(), g.as_slice());
    }
}
