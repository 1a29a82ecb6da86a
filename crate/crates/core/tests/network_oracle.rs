mod common;

use amod_core::network::{all_pairs_shortest_paths, kmeans_partition, regional_marginals, DemandDensity, RoadGraph};
use common::graphs::{dijkstra, random_graph};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn floyd_warshall_equals_dijkstra() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=200);
        let g = random_graph(&mut rng, n);
        let fw = all_pairs_shortest_paths(&g);
        for s in 0..n {
            let d = dijkstra(&g, s);
            for t in 0..n {
                assert_eq!(fw.dist(s, t), d[t], "seed {seed}: {s} -> {t}");
                let path = fw.shortest_path(s, t);
                assert_eq!((path[0], *path.last().unwrap()), (s, t));
                let walked: f64 = path
                    .windows(2)
                    .map(|w| {
                        g.outgoing(w[0])
                            .filter(|l| l.to == w[1])
                            .map(|l| l.length_km)
                            .fold(f64::INFINITY, f64::min)
                    })
                    .sum();
                assert!((walked - d[t]).abs() <= 1e-9, "seed {seed}: path {s} -> {t}");
            }
        }
    }
}

#[test]
fn triangle_inequality_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = random_graph(&mut rng, 40);
    let fw = all_pairs_shortest_paths(&g);
    for i in 0..40 {
        assert_eq!(fw.dist(i, i), 0.0);
        for j in 0..40 {
            for k in 0..40 {
                assert!(fw.dist(i, k) <= fw.dist(i, j) + fw.dist(j, k));
            }
        }
    }
}

proptest! {
    #[test]
    fn kmeans_is_deterministic_and_covers_all_regions(seed in 0u64..1000, regions in 1usize..8) {
        let g = RoadGraph::grid(6, 7, 0.5).unwrap();
        let a = kmeans_partition(&g, regions, seed).unwrap();
        let b = kmeans_partition(&g, regions, seed).unwrap();
        prop_assert_eq!(a.assignment(), b.assignment());
        for r in 0..regions {
            prop_assert!(!a.members(r).is_empty());
        }
        let weights: Vec<f64> = (0..g.node_count()).map(|v| 1.0 + (v * 7 % 5) as f64).collect();
        let m = regional_marginals(&DemandDensity::from_weights(weights).unwrap(), &a);
        prop_assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}
