//! Per-origin Dijkstra, shortest-path cost matrices, and all-or-nothing loading.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::demand::DemandSpec;
use crate::error::{Error, Result};
use crate::network::Network;

/// Forward-star adjacency over a [`Network`], built once per solve.
#[derive(Debug, Clone)]
pub struct RoadGraph {
    node_count: usize,
    first_thru_node: usize,
    offsets: Vec<usize>,
    /// Link ids grouped by tail node, in link-id order within a node.
    out_links: Vec<usize>,
    heads: Vec<usize>,
    tails: Vec<usize>,
}

impl RoadGraph {
    pub fn new(net: &Network) -> Self {
        let n = net.node_count;
        let mut offsets = vec![0usize; n + 1];
        for l in &net.links {
            offsets[l.tail + 1] += 1;
        }
        for v in 0..n {
            offsets[v + 1] += offsets[v];
        }
        let mut fill = offsets.clone();
        let mut out_links = vec![0usize; net.links.len()];
        for (id, l) in net.links.iter().enumerate() {
            out_links[fill[l.tail]] = id;
            fill[l.tail] += 1;
        }
        RoadGraph {
            node_count: n,
            first_thru_node: net.first_thru_node,
            offsets,
            out_links,
            heads: net.links.iter().map(|l| l.head).collect(),
            tails: net.links.iter().map(|l| l.tail).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn link_count(&self) -> usize {
        self.heads.len()
    }

    pub fn tail(&self, link: usize) -> usize {
        self.tails[link]
    }

    pub fn head(&self, link: usize) -> usize {
        self.heads[link]
    }

    fn out(&self, node: usize) -> &[usize] {
        &self.out_links[self.offsets[node]..self.offsets[node + 1]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPathTree {
    pub origin: usize,
    pub dist: Vec<f64>,
    /// Incoming tree link per node; `None` at the origin and unreachable nodes.
    pub pred: Vec<Option<usize>>,
    /// Nodes in the order they were settled (origin first).
    pub settled: Vec<usize>,
}

impl ShortestPathTree {
    pub fn is_reachable(&self, node: usize) -> bool {
        self.dist[node].is_finite()
    }

    /// Link ids on the tree path to `node`, from the origin outwards.
    pub fn path_to(&self, graph: &RoadGraph, node: usize) -> Option<Vec<usize>> {
        if !self.is_reachable(node) {
            return None;
        }
        let mut links = Vec::new();
        let mut v = node;
        while let Some(e) = self.pred[v] {
            links.push(e);
            v = graph.tail(e);
        }
        links.reverse();
        Some(links)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    // Min-heap on (dist, node).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths with a lazy-deletion binary heap.
///
/// Centroids other than the origin are settled but never expanded, so they
/// can end a path but not be passed through. Ties keep the first relaxation.
pub fn sssp(graph: &RoadGraph, costs: &[f64], origin: usize) -> ShortestPathTree {
    let n = graph.node_count;
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut done = vec![false; n];
    let mut settled = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    dist[origin] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        node: origin,
    });
    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        settled.push(u);
        if u != origin && u < graph.first_thru_node {
            continue;
        }
        for &e in graph.out(u) {
            let v = graph.heads[e];
            let nd = d + costs[e];
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some(e);
                heap.push(HeapEntry { dist: nd, node: v });
            }
        }
    }
    ShortestPathTree {
        origin,
        dist,
        pred,
        settled,
    }
}

/// Shortest-path costs over the OD pairs plus the trees that produced them.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    /// `T_ij` per pair index; `f64::INFINITY` for unreachable pairs.
    pub values: Vec<f64>,
    /// One tree per origin index of the demand spec.
    pub trees: Vec<ShortestPathTree>,
}

impl CostMatrix {
    pub fn has_unreachable(&self) -> bool {
        self.values.iter().any(|v| !v.is_finite())
    }
}

pub fn cost_matrix(graph: &RoadGraph, costs: &[f64], demand: &DemandSpec) -> CostMatrix {
    let trees: Vec<ShortestPathTree> = demand
        .origins
        .iter()
        .map(|&o| sssp(graph, costs, o))
        .collect();
    let values = demand
        .pairs
        .pairs
        .iter()
        .map(|p| trees[p.origin].dist[demand.destinations[p.destination]])
        .collect();
    CostMatrix { values, trees }
}

/// Routes each pair's demand along its tree path and returns link flows.
///
/// Loads are pushed towards the root in reverse settle order, one origin at a
/// time in origin order.
pub fn aon_assign(
    graph: &RoadGraph,
    trees: &[ShortestPathTree],
    demand: &DemandSpec,
    trips: &[f64],
) -> Result<Vec<f64>> {
    let mut flows = vec![0.0; graph.link_count()];
    let mut load = vec![0.0; graph.node_count()];
    for (i, tree) in trees.iter().enumerate() {
        let ks = demand.pairs.from_origin(i);
        if ks.iter().all(|&k| trips[k] == 0.0) {
            continue;
        }
        load.iter_mut().for_each(|x| *x = 0.0);
        for &k in ks {
            let dest = demand.destinations[demand.pairs.pairs[k].destination];
            if trips[k] != 0.0 && !tree.is_reachable(dest) {
                return Err(Error::Unreachable {
                    origin: tree.origin + 1,
                    destination: dest + 1,
                    demand: trips[k],
                });
            }
            load[dest] += trips[k];
        }
        for &v in tree.settled.iter().rev() {
            if let Some(e) = tree.pred[v] {
                let l = load[v];
                if l != 0.0 {
                    flows[e] += l;
                    load[graph.tail(e)] += l;
                }
            }
        }
    }
    Ok(flows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link_cost::LinkParams;
    use crate::network::Link;

    fn net(n: usize, arcs: &[(usize, usize)]) -> Network {
        let p = LinkParams::new(1.0, 1.0, 0.15, 4.0).unwrap();
        Network::unrestricted(
            n,
            arcs.iter()
                .map(|&(tail, head)| Link {
                    tail,
                    head,
                    params: p,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn path_graph() {
        let n = net(3, &[(0, 1), (1, 2)]);
        let g = RoadGraph::new(&n);
        let tree = sssp(&g, &[1.0, 2.0], 0);
        assert_eq!(tree.dist[2], 3.0);
        assert_eq!(tree.pred[2], Some(1));
        assert_eq!(tree.pred[1], Some(0));
        assert_eq!(tree.path_to(&g, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn parallel_links_pick_cheaper() {
        let n = net(2, &[(0, 1), (0, 1)]);
        let g = RoadGraph::new(&n);
        let tree = sssp(&g, &[5.0, 4.0], 0);
        assert_eq!(tree.dist[1], 4.0);
        assert_eq!(tree.pred[1], Some(1));
    }

    #[test]
    fn ties_keep_first_relaxation() {
        let n = net(2, &[(0, 1), (0, 1)]);
        let g = RoadGraph::new(&n);
        let tree = sssp(&g, &[4.0, 4.0], 0);
        assert_eq!(tree.pred[1], Some(0));
    }

    #[test]
    fn centroids_are_not_through_nodes() {
        // 0 -> 1 -> 2 is cheap but node 1 is a centroid; 0 -> 3 -> 2 must be used.
        let p = LinkParams::new(1.0, 1.0, 0.15, 4.0).unwrap();
        let links = [(0, 1), (1, 2), (0, 3), (3, 2)]
            .iter()
            .map(|&(tail, head)| Link {
                tail,
                head,
                params: p,
            })
            .collect();
        let n = Network::new(4, 3, 3, links).unwrap();
        let g = RoadGraph::new(&n);
        let tree = sssp(&g, &[1.0, 1.0, 5.0, 5.0], 0);
        assert_eq!(tree.dist[1], 1.0);
        assert_eq!(tree.dist[2], 10.0);
        // Starting at the centroid itself is allowed.
        let tree = sssp(&g, &[1.0, 1.0, 5.0, 5.0], 1);
        assert_eq!(tree.dist[2], 1.0);
    }

    #[test]
    fn unreachable_is_infinite_and_aon_errors() {
        let n = net(3, &[(0, 1)]);
        let g = RoadGraph::new(&n);
        let spec = DemandSpec::new(vec![0], vec![1, 2], vec![2.0], vec![1.0, 1.0]).unwrap();
        let cm = cost_matrix(&g, &[1.0], &spec);
        assert!(cm.has_unreachable());
        assert_eq!(cm.values[0], 1.0);
        assert!(cm.values[1].is_infinite());
        let err = aon_assign(&g, &cm.trees, &spec, &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Unreachable { destination: 3, .. }));
        // Zero demand on the unreachable pair is fine.
        assert_eq!(
            aon_assign(&g, &cm.trees, &spec, &[1.0, 0.0]).unwrap(),
            vec![1.0]
        );
    }

    #[test]
    fn single_link_cost_matrix() {
        let n = net(2, &[(0, 1)]);
        let g = RoadGraph::new(&n);
        let spec = DemandSpec::new(vec![0], vec![1], vec![1.0], vec![1.0]).unwrap();
        assert_eq!(cost_matrix(&g, &[7.0], &spec).values, vec![7.0]);
    }

    #[test]
    fn symmetric_costs_give_symmetric_matrix() {
        let arcs = [(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)];
        let n = net(3, &arcs);
        let g = RoadGraph::new(&n);
        let spec =
            DemandSpec::new(vec![0, 1, 2], vec![0, 1, 2], vec![1.0; 3], vec![1.0; 3]).unwrap();
        let cm = cost_matrix(&g, &[1.0, 1.0, 2.0, 2.0, 4.0, 4.0], &spec);
        for k in 0..spec.pairs.len() {
            let (o, d) = spec.pair_nodes(k);
            let back = spec.pair_index(d, o).unwrap();
            assert_eq!(cm.values[k], cm.values[back]);
        }
    }

    #[test]
    fn aon_examples() {
        let n = net(3, &[(0, 1), (1, 2)]);
        let g = RoadGraph::new(&n);
        let spec = DemandSpec::new(vec![0], vec![2], vec![5.0], vec![5.0]).unwrap();
        let cm = cost_matrix(&g, &[1.0, 1.0], &spec);
        assert_eq!(
            aon_assign(&g, &cm.trees, &spec, &[5.0]).unwrap(),
            vec![5.0, 5.0]
        );

        // Pairs (0,2) and (1,2) share link 1 -> 2.
        let spec = DemandSpec::new(vec![0, 1], vec![2], vec![2.0, 3.0], vec![5.0]).unwrap();
        let cm = cost_matrix(&g, &[1.0, 1.0], &spec);
        assert_eq!(
            aon_assign(&g, &cm.trees, &spec, &[2.0, 3.0]).unwrap(),
            vec![2.0, 5.0]
        );
    }

    #[test]
    fn repeated_runs_identical() {
        let arcs = [(0, 1), (1, 2), (0, 2), (2, 3), (1, 3), (0, 3)];
        let n = net(4, &arcs);
        let g = RoadGraph::new(&n);
        let c = [1.0, 1.0, 2.0, 1.0, 2.0, 3.0];
        assert_eq!(sssp(&g, &c, 0), sssp(&g, &c, 0));
    }
}
