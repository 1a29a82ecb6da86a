use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An intersection with planar coordinates in kilometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

/// A directed road segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    #[serde(rename = "length_km")]
    pub length_km: f64,
}

/// Directed road network. Construction validates every invariant, so a
/// `RoadGraph` in hand is always strongly connected with positive link lengths.
#[derive(Debug, Clone)]
pub struct RoadGraph {
    nodes: Vec<Node>,
    links: Vec<Link>,
    outgoing: Vec<Vec<usize>>,
}

impl RoadGraph {
    pub fn new(mut nodes: Vec<Node>, links: Vec<Link>) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        for (expected, node) in nodes.iter().enumerate() {
            if node.id != expected {
                return Err(Error::Config(format!(
                    "node ids must be dense 0..{}; found id {} at position {expected}",
                    nodes.len(),
                    node.id
                )));
            }
            if !node.x.is_finite() || !node.y.is_finite() {
                return Err(Error::Config(format!(
                    "node {} has non-finite coordinates",
                    node.id
                )));
            }
        }
        if nodes.is_empty() {
            return Err(Error::Config("graph has no nodes".into()));
        }
        let n = nodes.len();
        let mut outgoing = vec![Vec::new(); n];
        for (i, link) in links.iter().enumerate() {
            for node in [link.from, link.to] {
                if node >= n {
                    return Err(Error::DanglingEndpoint {
                        link: i,
                        node,
                        nodes: n,
                    });
                }
            }
            if link.from == link.to {
                return Err(Error::SelfLoop {
                    link: i,
                    node: link.from,
                });
            }
            if !(link.length_km > 0.0) || !link.length_km.is_finite() {
                return Err(Error::NonPositiveLength {
                    link: i,
                    length: link.length_km,
                });
            }
            outgoing[link.from].push(i);
        }
        let graph = RoadGraph {
            nodes,
            links,
            outgoing,
        };
        graph.check_strongly_connected()?;
        Ok(graph)
    }

    /// Lattice of `rows × cols` intersections with both link directions
    /// between 4-neighbours.
    pub fn grid(rows: usize, cols: usize, spacing_km: f64) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 rows and 2 columns, got {rows}x{cols}"
            )));
        }
        if !(spacing_km > 0.0) || !spacing_km.is_finite() {
            return Err(Error::Config(format!(
                "grid spacing must be positive, got {spacing_km}"
            )));
        }
        let id = |r: usize, c: usize| r * cols + c;
        let mut nodes = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                nodes.push(Node {
                    id: id(r, c),
                    x: c as f64 * spacing_km,
                    y: r as f64 * spacing_km,
                });
            }
        }
        let mut links = Vec::new();
        let mut both = |a: usize, b: usize| {
            links.push(Link {
                from: a,
                to: b,
                length_km: spacing_km,
            });
            links.push(Link {
                from: b,
                to: a,
                length_km: spacing_km,
            });
        };
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    both(id(r, c), id(r, c + 1));
                }
                if r + 1 < rows {
                    both(id(r, c), id(r + 1, c));
                }
            }
        }
        RoadGraph::new(nodes, links)
    }

    pub fn load(nodes_path: &Path, links_path: &Path) -> Result<Self> {
        let nodes = read_records::<Node>(nodes_path, &["id", "x", "y"])?;
        let links = read_records::<Link>(links_path, &["from", "to", "length_km"])?;
        RoadGraph::new(nodes, links)
    }

    pub fn from_readers(nodes: impl Read, links: impl Read) -> Result<Self> {
        let nodes = parse_records::<Node>(nodes, Path::new("<nodes>"), &["id", "x", "y"])?;
        let links = parse_records::<Link>(links, Path::new("<links>"), &["from", "to", "length_km"])?;
        RoadGraph::new(nodes, links)
    }

    pub fn write_nodes_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for node in &self.nodes {
            w.serialize(node)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_links_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for link in &self.links {
            w.serialize(link)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn outgoing(&self, node: usize) -> impl Iterator<Item = &Link> + '_ {
        self.outgoing[node].iter().map(move |&i| &self.links[i])
    }

    fn check_strongly_connected(&self) -> Result<()> {
        let n = self.nodes.len();
        let mut incoming = vec![Vec::new(); n];
        for link in &self.links {
            incoming[link.to].push(link.from);
        }
        let forward: Vec<Vec<usize>> = self
            .outgoing
            .iter()
            .map(|ls| ls.iter().map(|&i| self.links[i].to).collect())
            .collect();
        for adjacency in [&forward, &incoming] {
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(v) = stack.pop() {
                for &w in &adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            if let Some(node) = seen.iter().position(|s| !s) {
                return Err(Error::Disconnected { from: 0, node });
            }
        }
        Ok(())
    }
}

fn read_records<T: serde::de::DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let file = std::fs::File::open(path)?;
    parse_records(file, path, header)
}

fn parse_records<T: serde::de::DeserializeOwned>(
    input: impl Read,
    path: &Path,
    header: &[&str],
) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if found != header {
        return Err(Error::parse(
            path,
            format!("expected header {:?}, found {:?}", header.join(","), found.join(",")),
        ));
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(row, rec)| rec.map_err(|e| Error::parse(path, format!("row {}: {e}", row + 1))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIANGLE_NODES: &str = "id,x,y\n0,0,0\n1,1,0\n2,0.5,1\n";

    #[test]
    fn grid_counts() {
        let g = RoadGraph::grid(2, 2, 1.0).unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.links().len(), 8);
        assert!(g.links().iter().all(|l| l.length_km == 1.0));

        let g = RoadGraph::grid(15, 15, 0.3).unwrap();
        assert_eq!(g.node_count(), 225);
        // two directions for each of rows*(cols-1) + cols*(rows-1) lattice edges
        let undirected: usize = (0..15)
            .flat_map(|r| (0..15).map(move |c| (r, c)))
            .map(|(r, c)| usize::from(c + 1 < 15) + usize::from(r + 1 < 15))
            .sum();
        assert_eq!(g.links().len(), 2 * undirected);
        assert_eq!(g.links().len(), 840);
    }

    #[test]
    fn grid_rejects_degenerate_dimensions() {
        assert!(matches!(RoadGraph::grid(1, 5, 1.0), Err(Error::Config(_))));
        assert!(matches!(RoadGraph::grid(3, 3, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn loads_triangle() {
        let links = "from,to,length_km\n0,1,1\n1,0,1\n1,2,1\n2,1,1\n0,2,3\n2,0,3\n";
        let g = RoadGraph::from_readers(TRIANGLE_NODES.as_bytes(), links.as_bytes()).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.links().len(), 6);
    }

    #[test]
    fn load_errors_are_distinct() {
        let dangling = "from,to,length_km\n0,1,1\n1,99,1\n";
        assert!(matches!(
            RoadGraph::from_readers(TRIANGLE_NODES.as_bytes(), dangling.as_bytes()),
            Err(Error::DanglingEndpoint { node: 99, .. })
        ));

        let negative = "from,to,length_km\n0,1,-1\n";
        assert!(matches!(
            RoadGraph::from_readers(TRIANGLE_NODES.as_bytes(), negative.as_bytes()),
            Err(Error::NonPositiveLength { .. })
        ));

        let nodes = "id,x,y\n0,0,0\n1,1,0\n2,5,5\n3,6,5\n";
        let split = "from,to,length_km\n0,1,1\n1,0,1\n2,3,1\n3,2,1\n";
        assert!(matches!(
            RoadGraph::from_readers(nodes.as_bytes(), split.as_bytes()),
            Err(Error::Disconnected { .. })
        ));

        let garbage = "from,to,length_km\n0,one,1\n";
        assert!(matches!(
            RoadGraph::from_readers(TRIANGLE_NODES.as_bytes(), garbage.as_bytes()),
            Err(Error::Parse { .. })
        ));

        let wrong_header = "a,b,c\n0,1,1\n";
        assert!(matches!(
            RoadGraph::from_readers(TRIANGLE_NODES.as_bytes(), wrong_header.as_bytes()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn one_way_cycle_is_strongly_connected() {
        let links = "from,to,length_km\n0,1,1\n1,2,1\n2,0,1\n";
        assert!(RoadGraph::from_readers(TRIANGLE_NODES.as_bytes(), links.as_bytes()).is_ok());
        let links = "from,to,length_km\n0,1,1\n1,2,1\n";
        assert!(matches!(
            RoadGraph::from_readers(TRIANGLE_NODES.as_bytes(), links.as_bytes()),
            Err(Error::Disconnected { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let g = RoadGraph::grid(3, 4, 0.5).unwrap();
        let mut nodes = Vec::new();
        let mut links = Vec::new();
        g.write_nodes_csv(&mut nodes).unwrap();
        g.write_links_csv(&mut links).unwrap();
        let back = RoadGraph::from_readers(nodes.as_slice(), links.as_slice()).unwrap();
        assert_eq!(back.nodes(), g.nodes());
        assert_eq!(back.links(), g.links());
    }
}
