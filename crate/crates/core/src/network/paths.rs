use super::RoadGraph;

const NO_HOP: u32 = u32::MAX;

/// All-pairs shortest-path lengths with a successor table for path
/// reconstruction. Stored densely, row-major.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    dist: Vec<f64>,
    next_hop: Vec<u32>,
}

impl DistanceMatrix {
    /// Floyd–Warshall over the directed links. Parallel links keep the
    /// shortest one; ties between equal-length routes keep the first found,
    /// so the result is a deterministic function of the link order.
    pub fn floyd_warshall(graph: &RoadGraph) -> Self {
        let n = graph.node_count();
        let mut dist = vec![f64::INFINITY; n * n];
        let mut next_hop = vec![NO_HOP; n * n];
        for i in 0..n {
            dist[i * n + i] = 0.0;
            next_hop[i * n + i] = i as u32;
        }
        for link in graph.links() {
            let ij = link.from * n + link.to;
            if link.length_km < dist[ij] {
                dist[ij] = link.length_km;
                next_hop[ij] = link.to as u32;
            }
        }
        for k in 0..n {
            let row_k = dist[k * n..(k + 1) * n].to_vec();
            for i in 0..n {
                let d_ik = dist[i * n + k];
                if !d_ik.is_finite() {
                    continue;
                }
                let hop_ik = next_hop[i * n + k];
                let row = i * n;
                for j in 0..n {
                    let candidate = d_ik + row_k[j];
                    if candidate < dist[row + j] {
                        dist[row + j] = candidate;
                        next_hop[row + j] = hop_ik;
                    }
                }
            }
        }
        DistanceMatrix { n, dist, next_hop }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dist(&self, from: usize, to: usize) -> f64 {
        self.dist[from * self.n + to]
    }

    #[inline]
    pub fn next_hop(&self, from: usize, to: usize) -> usize {
        self.next_hop[from * self.n + to] as usize
    }

    /// Node sequence from `a` to `b`, both inclusive.
    pub fn shortest_path(&self, a: usize, b: usize) -> Vec<usize> {
        let mut path = vec![a];
        let mut cur = a;
        while cur != b {
            cur = self.next_hop(cur, b);
            path.push(cur);
            debug_assert!(path.len() <= self.n, "next-hop table contains a cycle");
        }
        path
    }

    /// Sum of link lengths along a node sequence.
    pub fn path_length(&self, path: &[usize]) -> f64 {
        path.windows(2).map(|w| self.dist(w[0], w[1])).sum()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Link, Node};

    fn triangle() -> RoadGraph {
        let nodes = (0..3)
            .map(|id| Node {
                id,
                x: id as f64,
                y: 0.0,
            })
            .collect();
        let mut links = Vec::new();
        for (a, b, l) in [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 3.0)] {
            links.push(Link {
                from: a,
                to: b,
                length_km: l,
            });
            links.push(Link {
                from: b,
                to: a,
                length_km: l,
            });
        }
        RoadGraph::new(nodes, links).unwrap()
    }

    #[test]
    fn triangle_routes_through_middle() {
        let d = DistanceMatrix::floyd_warshall(&triangle());
        assert_eq!(d.dist(0, 2), 2.0);
        assert_eq!(d.shortest_path(0, 2), vec![0, 1, 2]);
        assert_eq!(d.shortest_path(1, 1), vec![1]);
        for i in 0..3 {
            assert_eq!(d.dist(i, i), 0.0);
        }
    }

    #[test]
    fn grid_diagonal() {
        let g = RoadGraph::grid(2, 2, 1.0).unwrap();
        let d = DistanceMatrix::floyd_warshall(&g);
        assert_eq!(d.dist(0, 3), 2.0);
        let p = d.shortest_path(0, 3);
        assert_eq!(p.len(), 3);
        assert_eq!(d.path_length(&p), 2.0);
    }
}
