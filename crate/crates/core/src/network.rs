//! Directed road network with coordinating/cruising zone geometry.
//!
//! Every edge is split into a cruising zone (`d2`, right after the upstream
//! vertex) followed by a coordinating zone (`d1`, right before the downstream
//! vertex). Vertices carry caller-chosen labels; edges are numbered from 1 in
//! the order their arcs were supplied, so "edge 18" of a benchmark is stable.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use thiserror::Error;

/// Vertex label as it appears in scenario files and reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

/// One-based edge number, assigned in arc-list order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(index: usize) -> Self {
        EdgeId(index as u32 + 1)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("arc {0} is a self-loop")]
    SelfLoop(EdgeId),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("edge {edge}: invalid geometry (length {length} m, coordinating zone {d1} m)")]
    InvalidGeometry { edge: EdgeId, length: f64, d1: f64 },
    #[error("edge {0}: lane count must be positive")]
    NoLanes(EdgeId),
    #[error("destination {destination} is unreachable from origin {origin}")]
    Unreachable { origin: VertexId, destination: VertexId },
    #[error("a cascade needs at least one junction")]
    NoJunctions,
    #[error("network has no {0}")]
    Empty(&'static str),
}

/// Arc description used to build a network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcSpec {
    pub from: VertexId,
    pub to: VertexId,
    pub length: f64,
    pub d1: f64,
}

impl ArcSpec {
    pub fn new(from: u32, to: u32, length: f64, d1: f64) -> Self {
        ArcSpec { from: VertexId(from), to: VertexId(to), length, d1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub id: VertexId,
    /// More than two incident edges.
    pub is_junction: bool,
}

/// Step function of edge availability; append-only.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AvailabilityTimeline {
    steps: Vec<(f64, bool)>,
}

impl AvailabilityTimeline {
    pub fn is_available(&self, t: f64) -> bool {
        self.steps.iter().rev().find(|(at, _)| *at <= t).is_none_or(|&(_, on)| on)
    }

    /// Inserts a step, keeping the list sorted; equal times keep insertion order.
    fn push(&mut self, t: f64, available: bool) {
        let pos = self.steps.partition_point(|(at, _)| *at <= t);
        self.steps.insert(pos, (t, available));
    }

    pub fn steps(&self) -> &[(f64, bool)] {
        &self.steps
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub from: VertexId,
    pub to: VertexId,
    pub length: f64,
    /// Coordinating zone before `to`.
    pub d1: f64,
    /// Cruising zone after `from`.
    pub d2: f64,
    pub lanes: u32,
    pub availability: AvailabilityTimeline,
}

/// A vertex path together with the edges joining it.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoadNetwork {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    origins: Vec<VertexId>,
    destinations: Vec<VertexId>,
    index: BTreeMap<VertexId, usize>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

/// Standard Nguyen-Dupuis arc list; position + 1 is the edge id.
pub const NGUYEN_DUPUIS_ARCS: [(u32, u32); 19] = [
    (1, 5),
    (1, 12),
    (4, 5),
    (4, 9),
    (5, 6),
    (5, 9),
    (6, 7),
    (6, 10),
    (7, 8),
    (7, 11),
    (8, 2),
    (9, 10),
    (9, 13),
    (10, 11),
    (11, 2),
    (11, 3),
    (12, 6),
    (12, 8),
    (13, 3),
];

impl RoadNetwork {
    pub fn new(
        arcs: &[ArcSpec],
        lanes: u32,
        origins: &[VertexId],
        destinations: &[VertexId],
    ) -> Result<Self, NetworkError> {
        if arcs.is_empty() {
            return Err(NetworkError::Empty("arcs"));
        }
        if origins.is_empty() {
            return Err(NetworkError::Empty("origins"));
        }
        if destinations.is_empty() {
            return Err(NetworkError::Empty("destinations"));
        }
        let mut index = BTreeMap::new();
        for arc in arcs {
            for v in [arc.from, arc.to] {
                let next = index.len();
                index.entry(v).or_insert(next);
            }
        }
        // Dense indices follow label order so iteration is label-sorted.
        for (i, slot) in index.values_mut().enumerate() {
            *slot = i;
        }
        let n = index.len();
        let mut edges = Vec::with_capacity(arcs.len());
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (k, arc) in arcs.iter().enumerate() {
            let id = EdgeId::from_index(k);
            if arc.from == arc.to {
                return Err(NetworkError::SelfLoop(id));
            }
            let d2 = arc.length - arc.d1;
            let valid = arc.length.is_finite() && arc.d1 > 0.0 && d2 > 0.0 && arc.d1 < d2;
            if !valid {
                return Err(NetworkError::InvalidGeometry { edge: id, length: arc.length, d1: arc.d1 });
            }
            if lanes == 0 {
                return Err(NetworkError::NoLanes(id));
            }
            out_edges[index[&arc.from]].push(k);
            in_edges[index[&arc.to]].push(k);
            edges.push(Edge {
                id,
                from: arc.from,
                to: arc.to,
                length: arc.length,
                d1: arc.d1,
                d2,
                lanes,
                availability: AvailabilityTimeline::default(),
            });
        }
        let vertices = index
            .iter()
            .map(|(&id, &i)| Vertex { id, is_junction: out_edges[i].len() + in_edges[i].len() > 2 })
            .collect();
        for v in origins.iter().chain(destinations) {
            if !index.contains_key(v) {
                return Err(NetworkError::UnknownVertex(*v));
            }
        }
        let net = RoadNetwork {
            vertices,
            edges,
            origins: origins.to_vec(),
            destinations: destinations.to_vec(),
            index,
            out_edges,
            in_edges,
        };
        let unit: Vec<f64> = vec![1.0; net.edges.len()];
        for &d in &net.destinations {
            let dist = net.distances_to(d, |e| Some(unit[e.id.index()]));
            for &o in &net.origins {
                if !dist[net.index[&o]].is_finite() {
                    return Err(NetworkError::Unreachable { origin: o, destination: d });
                }
            }
        }
        Ok(net)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn origins(&self) -> &[VertexId] {
        &self.origins
    }

    pub fn destinations(&self) -> &[VertexId] {
        &self.destinations
    }

    pub fn vertex_index(&self, v: VertexId) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.index.contains_key(&v)
    }

    pub fn edge(&self, id: EdgeId) -> Result<&Edge, NetworkError> {
        if id.0 == 0 {
            return Err(NetworkError::UnknownEdge(id));
        }
        self.edges.get(id.index()).ok_or(NetworkError::UnknownEdge(id))
    }

    /// Outgoing edges of `v` in arc-list order.
    pub fn out_edges(&self, v: VertexId) -> impl Iterator<Item = &Edge> + '_ {
        let list = self.index.get(&v).map(|&i| self.out_edges[i].as_slice()).unwrap_or(&[]);
        list.iter().map(move |&k| &self.edges[k])
    }

    pub fn in_edges(&self, v: VertexId) -> impl Iterator<Item = &Edge> + '_ {
        let list = self.index.get(&v).map(|&i| self.in_edges[i].as_slice()).unwrap_or(&[]);
        list.iter().map(move |&k| &self.edges[k])
    }

    pub fn edge_between(&self, from: VertexId, to: VertexId) -> Option<&Edge> {
        self.out_edges(from).find(|e| e.to == to)
    }

    pub fn set_lanes(&mut self, lanes: u32) -> Result<(), NetworkError> {
        if lanes == 0 {
            return Err(NetworkError::NoLanes(EdgeId(1)));
        }
        for e in &mut self.edges {
            e.lanes = lanes;
        }
        Ok(())
    }

    /// Appends an availability step for `edge` effective from time `t`.
    pub fn set_edge_availability(&mut self, edge: EdgeId, available: bool, t: f64) -> Result<(), NetworkError> {
        if edge.0 == 0 || edge.index() >= self.edges.len() {
            return Err(NetworkError::UnknownEdge(edge));
        }
        self.edges[edge.index()].availability.push(t, available);
        Ok(())
    }

    pub fn is_available(&self, edge: EdgeId, t: f64) -> Result<bool, NetworkError> {
        Ok(self.edge(edge)?.availability.is_available(t))
    }

    /// Distinct times at which any edge changes availability, ascending.
    pub fn availability_change_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self.edges.iter().flat_map(|e| e.availability.steps().iter().map(|s| s.0)).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    /// Minimum weight from every vertex (dense index) to `dest`.
    ///
    /// `weight` returns `None` for edges that must not be used.
    pub fn distances_to<F>(&self, dest: VertexId, weight: F) -> Vec<f64>
    where
        F: Fn(&Edge) -> Option<f64>,
    {
        let n = self.vertices.len();
        let mut dist = vec![f64::INFINITY; n];
        let Some(&target) = self.index.get(&dest) else {
            return dist;
        };
        dist[target] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapItem { cost: 0.0, vertex: target });
        while let Some(HeapItem { cost, vertex }) = heap.pop() {
            if cost > dist[vertex] {
                continue;
            }
            for &k in &self.in_edges[vertex] {
                let e = &self.edges[k];
                let Some(w) = weight(e) else { continue };
                let u = self.index[&e.from];
                let cand = cost + w;
                if cand < dist[u] {
                    dist[u] = cand;
                    heap.push(HeapItem { cost: cand, vertex: u });
                }
            }
        }
        dist
    }

    /// Minimum-weight path; ties go to the lowest next-vertex label.
    ///
    /// Only edges available at time `t` are used. Returns `None` when the
    /// destination cannot be reached.
    pub fn shortest_path(&self, origin: VertexId, destination: VertexId, edge_weights: &[f64], t: f64) -> Option<Path> {
        self.shortest_path_by(origin, destination, |e| {
            e.availability.is_available(t).then(|| edge_weights[e.id.index()])
        })
    }

    pub fn shortest_path_by<F>(&self, origin: VertexId, destination: VertexId, weight: F) -> Option<Path>
    where
        F: Fn(&Edge) -> Option<f64>,
    {
        let dist = self.distances_to(destination, &weight);
        let start = *self.index.get(&origin)?;
        if !dist[start].is_finite() {
            return None;
        }
        let mut vertices = vec![origin];
        let mut edges = Vec::new();
        let mut cost = 0.0;
        let mut at = origin;
        while at != destination {
            let (e, w) = self.next_hop(at, &dist, &weight)?;
            cost += w;
            edges.push(e.id);
            vertices.push(e.to);
            at = e.to;
            if edges.len() > self.vertices.len() {
                return None;
            }
        }
        Some(Path { vertices, edges, cost })
    }

    /// Best outgoing edge given distances-to-destination.
    pub fn next_hop<F>(&self, at: VertexId, dist: &[f64], weight: F) -> Option<(&Edge, f64)>
    where
        F: Fn(&Edge) -> Option<f64>,
    {
        let mut best: Option<(&Edge, f64, f64)> = None;
        for e in self.out_edges(at) {
            let Some(w) = weight(e) else { continue };
            let total = w + dist[self.index[&e.to]];
            if !total.is_finite() {
                continue;
            }
            best = match best {
                None => Some((e, w, total)),
                Some((be, bw, bt)) => {
                    if nearly_less(total, bt) || (!nearly_less(bt, total) && e.to < be.to) {
                        Some((e, w, total))
                    } else {
                        Some((be, bw, bt))
                    }
                }
            };
        }
        best.map(|(e, w, _)| (e, w))
    }

    /// Vertex labels in topological order, or `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<VertexId>> {
        let n = self.vertices.len();
        let mut indeg: Vec<usize> = self.in_edges.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(self.vertices[i].id);
            for &k in &self.out_edges[i] {
                let j = self.index[&self.edges[k].to];
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.push(j);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// Strictly less by more than a relative 1e-12.
pub(crate) fn nearly_less(a: f64, b: f64) -> bool {
    a < b - 1e-12 * (1.0 + b.abs())
}

#[derive(PartialEq)]
struct HeapItem {
    cost: f64,
    vertex: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The 13-vertex, 19-edge Nguyen-Dupuis benchmark with uniform edges.
///
/// Origins are vertices 1 and 4, destinations 2 and 3.
pub fn build_nguyen_dupuis(edge_length: f64, d1: f64, lanes: u32) -> Result<RoadNetwork, NetworkError> {
    let arcs: Vec<ArcSpec> = NGUYEN_DUPUIS_ARCS.iter().map(|&(a, b)| ArcSpec::new(a, b, edge_length, d1)).collect();
    RoadNetwork::new(&arcs, lanes, &[VertexId(1), VertexId(4)], &[VertexId(2), VertexId(3)])
}

/// Labels used by [`build_cascade`].
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeLayout {
    /// Junctions in mainline order (labels `1..=n`).
    pub junctions: Vec<VertexId>,
    pub destination: VertexId,
    pub mainline_source: VertexId,
    /// On-ramp source of junction `i` at position `i`.
    pub ramp_sources: Vec<VertexId>,
}

impl CascadeLayout {
    pub fn new(n_junctions: u32) -> Self {
        let dest = n_junctions + 1;
        CascadeLayout {
            junctions: (1..=n_junctions).map(VertexId).collect(),
            destination: VertexId(dest),
            mainline_source: VertexId(dest + 1),
            ramp_sources: (1..=n_junctions).map(|i| VertexId(dest + 1 + i)).collect(),
        }
    }
}

/// A mainline of `n_junctions` junctions, each fed by one on-ramp.
///
/// Mainline edges between junctions (and from the last junction to the
/// destination) have cruising zone `mainline_d2` and coordinating zone `d1`.
/// Entry edges (mainline source and ramps) are short approaches of length
/// `3 * d1`. Edge ids: mainline entry first, then the ramps, then the
/// mainline links in order.
pub fn build_cascade(n_junctions: u32, mainline_d2: f64, d1: f64) -> Result<RoadNetwork, NetworkError> {
    if n_junctions == 0 {
        return Err(NetworkError::NoJunctions);
    }
    let layout = CascadeLayout::new(n_junctions);
    let approach = 3.0 * d1;
    let mut arcs = Vec::new();
    arcs.push(ArcSpec { from: layout.mainline_source, to: layout.junctions[0], length: approach, d1 });
    for (r, j) in layout.ramp_sources.iter().zip(&layout.junctions) {
        arcs.push(ArcSpec { from: *r, to: *j, length: approach, d1 });
    }
    let mainline = mainline_d2 + d1;
    for w in layout.junctions.windows(2) {
        arcs.push(ArcSpec { from: w[0], to: w[1], length: mainline, d1 });
    }
    arcs.push(ArcSpec {
        from: *layout.junctions.last().unwrap_or(&layout.junctions[0]),
        to: layout.destination,
        length: mainline,
        d1,
    });
    let mut origins = vec![layout.mainline_source];
    origins.extend(layout.ramp_sources.iter().copied());
    RoadNetwork::new(&arcs, 1, &origins, &[layout.destination])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nd() -> RoadNetwork {
        build_nguyen_dupuis(2000.0, 500.0, 1).unwrap()
    }

    #[test]
    fn nguyen_dupuis_counts() {
        let net = nd();
        assert_eq!(net.vertices().len(), 13);
        assert_eq!(net.edges().len(), 19);
        assert_eq!(net.origins(), &[VertexId(1), VertexId(4)]);
        assert_eq!(net.destinations(), &[VertexId(2), VertexId(3)]);
        for e in net.edges() {
            assert_eq!(e.length, 2000.0);
            assert_eq!(e.d1, 500.0);
            assert_eq!(e.d1 + e.d2, e.length);
        }
    }

    #[test]
    fn edge_18_is_twelve_to_eight() {
        let net = nd();
        let e = net.edge(EdgeId(18)).unwrap();
        assert_eq!((e.from, e.to), (VertexId(12), VertexId(8)));
    }

    #[test]
    fn golden_route_origin1_dest2() {
        // Recorded from the constructed arc list: 1 -> 12 -> 8 -> 2 via edges 2, 18, 11.
        let net = nd();
        let w = vec![1.0; 19];
        let p = net.shortest_path(VertexId(1), VertexId(2), &w, 0.0).unwrap();
        assert_eq!(p.edges, vec![EdgeId(2), EdgeId(18), EdgeId(11)]);
        assert_eq!(p.vertices, vec![VertexId(1), VertexId(12), VertexId(8), VertexId(2)]);
    }

    #[test]
    fn junction_flags() {
        let net = nd();
        let j = |v: u32| net.vertices()[net.vertex_index(VertexId(v)).unwrap()].is_junction;
        assert!(j(5) && j(11) && j(12));
        assert!(!j(1) && !j(13) && !j(2));
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(matches!(build_nguyen_dupuis(2000.0, 2000.0, 1), Err(NetworkError::InvalidGeometry { .. })));
        assert!(matches!(build_nguyen_dupuis(2000.0, 0.0, 1), Err(NetworkError::InvalidGeometry { .. })));
        // d1 must stay below d2
        assert!(build_nguyen_dupuis(2000.0, 1200.0, 1).is_err());
        let arcs = [ArcSpec::new(1, 1, 100.0, 10.0)];
        assert_eq!(RoadNetwork::new(&arcs, 1, &[VertexId(1)], &[VertexId(1)]), Err(NetworkError::SelfLoop(EdgeId(1))));
    }

    #[test]
    fn unreachable_destination_rejected() {
        let arcs = [ArcSpec::new(1, 2, 100.0, 10.0), ArcSpec::new(3, 2, 100.0, 10.0)];
        let err = RoadNetwork::new(&arcs, 1, &[VertexId(2)], &[VertexId(3)]).unwrap_err();
        assert!(matches!(err, NetworkError::Unreachable { .. }));
    }

    #[test]
    fn cascade_two_junctions() {
        let net = build_cascade(2, 30_000.0, 1000.0).unwrap();
        let layout = CascadeLayout::new(2);
        let link = net.edge_between(layout.junctions[0], layout.junctions[1]).unwrap();
        assert_eq!(link.length, 31_000.0);
        assert_eq!(link.d2, 30_000.0);
        assert_eq!(link.d1, 1000.0);
        assert_eq!(net.origins().len(), 3);
    }

    #[test]
    fn cascade_sizes() {
        assert_eq!(build_cascade(0, 1000.0, 100.0), Err(NetworkError::NoJunctions));
        let one = build_cascade(1, 5000.0, 500.0).unwrap();
        let l1 = CascadeLayout::new(1);
        assert_eq!(one.in_edges(l1.junctions[0]).count(), 2);
        assert_eq!(l1.ramp_sources.len(), 1);

        let five = build_cascade(5, 5000.0, 500.0).unwrap();
        let l5 = CascadeLayout::new(5);
        let ramps = l5.junctions.iter().filter(|j| five.in_edges(**j).any(|e| l5.ramp_sources.contains(&e.from)));
        assert_eq!(ramps.count(), 5);
        let w = vec![1.0; five.edges().len()];
        let p = five.shortest_path(l5.junctions[0], l5.destination, &w, 0.0).unwrap();
        assert_eq!(p.edges.len(), 5);
        assert!(l5.junctions.iter().all(|j| five.vertices()[five.vertex_index(*j).unwrap()].is_junction));
    }

    #[test]
    fn availability_timeline() {
        let mut net = nd();
        assert!(net.is_available(EdgeId(18), 1e9).unwrap());
        net.set_edge_availability(EdgeId(18), false, 1000.0).unwrap();
        assert!(net.is_available(EdgeId(18), 999.0).unwrap());
        assert!(!net.is_available(EdgeId(18), 1500.0).unwrap());
        net.set_edge_availability(EdgeId(18), true, 2000.0).unwrap();
        assert!(net.is_available(EdgeId(18), 2500.0).unwrap());
        assert!(!net.is_available(EdgeId(18), 1999.9).unwrap());
        assert_eq!(net.set_edge_availability(EdgeId(20), false, 0.0), Err(NetworkError::UnknownEdge(EdgeId(20))));
        assert_eq!(net.set_edge_availability(EdgeId(0), false, 0.0), Err(NetworkError::UnknownEdge(EdgeId(0))));
        assert_eq!(net.availability_change_times(), vec![1000.0, 2000.0]);
    }

    #[test]
    fn single_edge_path() {
        let arcs = [ArcSpec::new(1, 2, 100.0, 10.0)];
        let net = RoadNetwork::new(&arcs, 1, &[VertexId(1)], &[VertexId(2)]).unwrap();
        let p = net.shortest_path(VertexId(1), VertexId(2), &[7.5], 0.0).unwrap();
        assert_eq!(p.vertices, vec![VertexId(1), VertexId(2)]);
        assert_eq!(p.cost, 7.5);
    }

    #[test]
    fn tie_goes_to_lower_intermediate() {
        // 1 -> 3 -> 4 and 1 -> 2 -> 4 with equal weights; arc order lists 3 first.
        let arcs = [
            ArcSpec::new(1, 3, 100.0, 10.0),
            ArcSpec::new(3, 4, 100.0, 10.0),
            ArcSpec::new(1, 2, 100.0, 10.0),
            ArcSpec::new(2, 4, 100.0, 10.0),
        ];
        let net = RoadNetwork::new(&arcs, 1, &[VertexId(1)], &[VertexId(4)]).unwrap();
        let p = net.shortest_path(VertexId(1), VertexId(4), &[1.0; 4], 0.0).unwrap();
        assert_eq!(p.vertices, vec![VertexId(1), VertexId(2), VertexId(4)]);
    }

    #[test]
    fn unavailable_edges_are_avoided() {
        let mut net = nd();
        net.set_edge_availability(EdgeId(18), false, 0.0).unwrap();
        let w = vec![1.0; 19];
        let p = net.shortest_path(VertexId(1), VertexId(2), &w, 10.0).unwrap();
        assert!(!p.edges.contains(&EdgeId(18)));
        assert_eq!(p.edges.len(), 5);
        // disconnect every way into 3 from 13 and 11 -> no path
        net.set_edge_availability(EdgeId(19), false, 0.0).unwrap();
        net.set_edge_availability(EdgeId(16), false, 0.0).unwrap();
        assert!(net.shortest_path(VertexId(4), VertexId(3), &w, 10.0).is_none());
    }

    #[test]
    fn nguyen_dupuis_is_acyclic() {
        let order = nd().topological_order().unwrap();
        assert_eq!(order.len(), 13);
    }
}
