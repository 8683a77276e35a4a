use pdhjb::paths::{action, concat_scaled, dinf_distance, load_path, rescale_path, save_path, stop_path};
use pdhjb::{DiscretePath, Lagrangian, TimeGrid};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = TimeGrid> {
    prop::collection::vec(0.01f64..1.0, 1..12).prop_map(|mut interior| {
        interior.sort_by(|a, b| a.total_cmp(b));
        interior.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let mut nodes = vec![0.0];
        nodes.extend(interior.into_iter().filter(|t| *t > 1e-6 && *t < 1.0 - 1e-6));
        nodes.push(1.0);
        TimeGrid::new(nodes).unwrap()
    })
}

fn path_strategy(dim: usize) -> impl Strategy<Value = DiscretePath> {
    grid_strategy().prop_flat_map(move |g| {
        let n = g.nodes().len() * dim;
        prop::collection::vec(-3.0f64..3.0, n).prop_map(move |v| DiscretePath::new(g.clone(), dim, v).unwrap())
    })
}

fn anchored(dim: usize) -> impl Strategy<Value = DiscretePath> {
    path_strategy(dim).prop_map(|p| {
        let first = p.node(0).to_vec();
        let values = p
            .values()
            .chunks(p.dim())
            .flat_map(|c| c.iter().zip(&first).map(|(x, f)| x - f).collect::<Vec<_>>())
            .collect();
        DiscretePath::new(p.grid().clone(), p.dim(), values).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn distance_is_a_pseudo_metric(
        a in path_strategy(2), b in path_strategy(2), c in path_strategy(2),
        ta in 0.0f64..=1.0, tb in 0.0f64..=1.0, tc in 0.0f64..=1.0,
    ) {
        let ab = dinf_distance((ta, &a), (tb, &b)).unwrap();
        let ba = dinf_distance((tb, &b), (ta, &a)).unwrap();
        let bc = dinf_distance((tb, &b), (tc, &c)).unwrap();
        let ac = dinf_distance((ta, &a), (tc, &c)).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert_eq!(dinf_distance((ta, &a), (ta, &a)).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn concatenation_keeps_the_prefix(w1 in path_strategy(1), w2 in anchored(1), t in 0.0f64..=1.0) {
        let c = concat_scaled(&w1, t, &w2).unwrap();
        for (i, &s) in w1.times().iter().enumerate() {
            if s <= t {
                prop_assert!((c.at(s)[0] - w1.node(i)[0]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rescale_inverts_concatenation(w1 in path_strategy(2), w2 in anchored(2), t in 0.0f64..0.999) {
        let back = rescale_path(&concat_scaled(&w1, t, &w2).unwrap(), t).unwrap();
        prop_assert_eq!(back.len(), w2.len());
        for i in 0..w2.len() {
            prop_assert!((back.times()[i] - w2.times()[i]).abs() <= 1e-12);
            for k in 0..2 {
                prop_assert!((back.node(i)[k] - w2.node(i)[k]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn concatenation_inverts_rescale(w in path_strategy(1), t in 0.0f64..=1.0) {
        let back = concat_scaled(&w, t, &rescale_path(&w, t).unwrap()).unwrap();
        for (i, &s) in w.times().iter().enumerate() {
            prop_assert!((back.at(s)[0] - w.node(i)[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn action_is_additive(w in path_strategy(1), a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0) {
        let mut ts = [a, b, c];
        ts.sort_by(|x, y| x.total_cmp(y));
        for l in [Lagrangian::quadratic(1, 1.0).unwrap(), Lagrangian::power(1.5, 1, 1.0).unwrap()] {
            let left = action(&l, &w, ts[0], ts[1]).to_f64() + action(&l, &w, ts[1], ts[2]).to_f64();
            let whole = action(&l, &w, ts[0], ts[2]).to_f64();
            prop_assert!((left - whole).abs() <= 1e-12 * (1.0 + whole.abs()));
        }
    }

    #[test]
    fn action_respects_the_minorant(w in path_strategy(2), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (t0, t1) = (a.min(b), a.max(b));
        for l in [Lagrangian::quadratic(2, 1.0).unwrap(), Lagrangian::power(1.5, 2, 1.0).unwrap()] {
            let bound = (t1 - t0) * l.minorant_floor();
            prop_assert!(action(&l, &w, t0, t1).to_f64() >= bound - 1e-12);
        }
    }

    #[test]
    fn stopping_freezes_the_tail(w in path_strategy(1), t in 0.0f64..=1.0, s in 0.0f64..=1.0) {
        let stopped = stop_path(&w, t);
        prop_assert!((stopped.at(s)[0] - w.at(s.min(t))[0]).abs() <= 1e-12);
    }

    #[test]
    fn csv_round_trip_is_bit_exact(w in path_strategy(3)) {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("p.csv");
        save_path(&w, &file).unwrap();
        let back = load_path(&file).unwrap();
        prop_assert_eq!(back.times(), w.times());
        let same = back.values().iter().zip(w.values()).all(|(x, y)| x.to_bits() == y.to_bits());
        prop_assert!(same);
    }
}
