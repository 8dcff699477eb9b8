mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use restoration::grid::hops_from_energized;
use restoration::{energization_path, hop_distance, load_distance, BusId, Grid};

/// Up to 12 buses with arbitrary (possibly disconnected) edges.
fn arb_grid() -> impl Strategy<Value = Grid> {
    (2u32..=12).prop_flat_map(|n| {
        prop::collection::vec((1..=n, 1..=n, any::<bool>()), 0..20).prop_map(move |edges| {
            let lines = edges
                .into_iter()
                .filter(|(a, b, _)| a != b)
                .map(|(a, b, live)| {
                    let mut l = line(a, b, 0.01, 0.1, 0.0);
                    l.in_service = live || a % 3 != 0;
                    l
                })
                .collect();
            grid(&(1..=n).collect::<Vec<_>>(), lines, vec![], vec![])
        })
    })
}

fn arb_grid_and_set() -> impl Strategy<Value = (Grid, BTreeSet<BusId>, BusId)> {
    arb_grid().prop_flat_map(|g| {
        let n = g.buses().count() as u32;
        (Just(g), prop::collection::btree_set(1..=n, 1..=3), 1..=n)
            .prop_map(|(g, set, t)| (g, set.into_iter().map(BusId).collect(), BusId(t)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hop_distance_matches_floyd_warshall(g in arb_grid()) {
        let reference = floyd_hops(&g);
        let ids: Vec<BusId> = g.buses().map(|b| b.id).collect();
        for &a in &ids {
            for &b in &ids {
                let d = hop_distance(&g, a, b).unwrap();
                prop_assert_eq!(d, reference.get(&(a, b)).copied());
                prop_assert_eq!(d, hop_distance(&g, b, a).unwrap());
                for &c in &ids {
                    if let (Some(ab), Some(bc)) = (d, hop_distance(&g, b, c).unwrap()) {
                        let ac = hop_distance(&g, a, c).unwrap().unwrap();
                        prop_assert!(ac <= ab + bc);
                    }
                }
            }
        }
    }

    #[test]
    fn energization_path_is_a_shortest_live_walk((g, live, target) in arb_grid_and_set()) {
        let hops = hops_from_energized(&g, &live, target).unwrap();
        match energization_path(&g, &live, target) {
            Ok(path) => {
                prop_assert_eq!(Some(path.len()), hops);
                if let Some(&first) = path.first() {
                    prop_assert!(g.neighbors(first).iter().any(|b| live.contains(b)));
                    prop_assert_eq!(*path.last().unwrap(), target);
                }
                for w in path.windows(2) {
                    prop_assert!(g.neighbors(w[0]).contains(&w[1]));
                }
                for b in &path {
                    prop_assert!(!live.contains(b));
                }
            }
            Err(_) => prop_assert_eq!(hops, None),
        }
    }

    #[test]
    fn load_distance_is_clamped_nearest_hop((g, bs, target) in arb_grid_and_set()) {
        let reference = floyd_hops(&g);
        let nearest = bs.iter().filter_map(|b| reference.get(&(*b, target))).min().copied();
        match load_distance(&g, target, &bs) {
            Ok(d) => prop_assert_eq!(Some(d as usize), nearest.map(|h| h.max(1))),
            Err(_) => prop_assert_eq!(nearest, None),
        }
    }
}

#[test]
fn out_of_service_lines_are_ignored() {
    let mut lines = chain(3, 0.01, 0.1);
    lines[1].in_service = false;
    let g = grid(&[1, 2, 3], lines, vec![], vec![]);
    assert_eq!(hop_distance(&g, BusId(1), BusId(3)).unwrap(), None);
    assert_eq!(hop_distance(&g, BusId(1), BusId(2)).unwrap(), Some(1));
}
