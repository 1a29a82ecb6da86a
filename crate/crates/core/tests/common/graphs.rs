//! Random road networks and a reference shortest-path search.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use amod_core::network::{DemandDensity, DistanceMatrix, Link, Node, RoadGraph};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random strongly connected digraph: a directed ring through a shuffled
/// node order plus random chords. Lengths are multiples of 1/8 so every
/// path sum is exact in binary floating point.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> RoadGraph {
    let nodes = (0..n)
        .map(|id| Node {
            id,
            x: rng.random::<f64>() * 10.0,
            y: rng.random::<f64>() * 10.0,
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let len = |rng: &mut ChaCha8Rng| rng.random_range(1..=40) as f64 / 8.0;
    let mut links: Vec<Link> = (0..n)
        .map(|i| Link {
            from: order[i],
            to: order[(i + 1) % n],
            length_km: len(rng),
        })
        .collect();
    for _ in 0..3 * n {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            links.push(Link {
                from: a,
                to: b,
                length_km: len(rng),
            });
        }
    }
    RoadGraph::new(nodes, links).unwrap()
}

pub fn dijkstra(graph: &RoadGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.node_count()];
    dist[source] = 0.0;
    // lengths are positive, so their bit patterns order like the values
    let mut heap = BinaryHeap::from([Reverse((0u64, source))]);
    while let Some(Reverse((bits, v))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[v] {
            continue;
        }
        for link in graph.outgoing(v) {
            let nd = d + link.length_km;
            if nd < dist[link.to] {
                dist[link.to] = nd;
                heap.push(Reverse((nd.to_bits(), link.to)));
            }
        }
    }
    dist
}

/// Random planar road network: each node links both ways to its three
/// nearest neighbours, plus a path through all nodes for connectivity.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize) -> DistanceMatrix {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>() * 4.0, rng.random::<f64>() * 4.0)).collect();
    let d = |a: usize, b: usize| ((pts[a].0 - pts[b].0).powi(2) + (pts[a].1 - pts[b].1).powi(2)).sqrt().max(0.01);
    let mut links = Vec::new();
    let mut both = |a: usize, b: usize| {
        links.push(Link { from: a, to: b, length_km: d(a, b) });
        links.push(Link { from: b, to: a, length_km: d(a, b) });
    };
    for a in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&b| b != a).collect();
        others.sort_by(|&x, &y| d(a, x).total_cmp(&d(a, y)));
        for &b in &others[..3] {
            both(a, b);
        }
        if a + 1 < n {
            both(a, a + 1);
        }
    }
    let nodes = pts.iter().enumerate().map(|(id, &(x, y))| Node { id, x, y }).collect();
    DistanceMatrix::floyd_warshall(&RoadGraph::new(nodes, links).unwrap())
}

pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> DemandDensity {
    DemandDensity::from_weights((0..n).map(|_| rng.random::<f64>().powi(3)).collect()).unwrap()
}

