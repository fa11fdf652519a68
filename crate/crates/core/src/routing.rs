//! Per-vertex travel-time tables with asynchronous DP updates.
//!
//! `T(i, d, j)` estimates the time from vertex `i` to destination `d` when
//! leaving over edge `i -> j`. Entries start at free-flow values and are
//! corrected from realized link times as vehicles pass.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::dynamics::FuelModel;
use crate::network::{EdgeId, RoadNetwork, VertexId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("no table entry for vertex {vertex}, destination {destination}, edge {edge}")]
    UnknownEntry { vertex: VertexId, destination: VertexId, edge: EdgeId },
    #[error("no usable route from {from} to {destination}")]
    NoRoute { from: VertexId, destination: VertexId },
    #[error("paths start at different vertices")]
    DifferentStart,
    #[error("update rate must lie in [0,1]")]
    InvalidRate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TravelTimeTable {
    chi: f64,
    dests: Vec<VertexId>,
    /// `[vertex index][destination index][position in out-edge list]`
    t: Vec<Vec<Vec<f64>>>,
    out: Vec<Vec<(EdgeId, VertexId)>>,
}

/// Result of a greedy next-hop query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hop {
    pub edge: EdgeId,
    pub next: VertexId,
    pub time: f64,
}

impl TravelTimeTable {
    /// Free-flow tables: edge length over `v0` plus the free-flow time onward.
    pub fn init(net: &RoadNetwork, v0: f64, chi: f64) -> Result<Self, RoutingError> {
        if !(0.0..=1.0).contains(&chi) {
            return Err(RoutingError::InvalidRate);
        }
        let dests = net.destinations().to_vec();
        let dist: Vec<Vec<f64>> = dests.iter().map(|&d| net.distances_to(d, |e| Some(e.length / v0))).collect();
        let mut t = Vec::with_capacity(net.vertices().len());
        let mut out = Vec::with_capacity(net.vertices().len());
        for v in net.vertices() {
            let edges: Vec<(EdgeId, VertexId)> = net.out_edges(v.id).map(|e| (e.id, e.to)).collect();
            let rows = dist
                .iter()
                .map(|dd| {
                    net.out_edges(v.id)
                        .map(|e| {
                            let j = net.vertex_index(e.to).unwrap_or(0);
                            e.length / v0 + dd[j]
                        })
                        .collect()
                })
                .collect();
            t.push(rows);
            out.push(edges);
        }
        Ok(TravelTimeTable { chi, dests, t, out })
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn set_chi(&mut self, chi: f64) -> Result<(), RoutingError> {
        if !(0.0..=1.0).contains(&chi) {
            return Err(RoutingError::InvalidRate);
        }
        self.chi = chi;
        Ok(())
    }

    pub fn destinations(&self) -> &[VertexId] {
        &self.dests
    }

    fn slot(
        &self,
        net: &RoadNetwork,
        i: VertexId,
        d: VertexId,
        edge: EdgeId,
    ) -> Result<(usize, usize, usize), RoutingError> {
        let err = RoutingError::UnknownEntry { vertex: i, destination: d, edge };
        let vi = net.vertex_index(i).ok_or(err.clone())?;
        let di = self.dests.iter().position(|x| *x == d).ok_or(err.clone())?;
        let ei = self.out[vi].iter().position(|(e, _)| *e == edge).ok_or(err)?;
        Ok((vi, di, ei))
    }

    pub fn get(&self, net: &RoadNetwork, i: VertexId, d: VertexId, edge: EdgeId) -> Result<f64, RoutingError> {
        let (vi, di, ei) = self.slot(net, i, d, edge)?;
        Ok(self.t[vi][di][ei])
    }

    /// `T <- T + chi (U + downstream_min - T)`; an infinite entry is replaced.
    pub fn update(
        &mut self,
        net: &RoadNetwork,
        i: VertexId,
        d: VertexId,
        edge: EdgeId,
        realized: f64,
        downstream_min: f64,
    ) -> Result<f64, RoutingError> {
        let (vi, di, ei) = self.slot(net, i, d, edge)?;
        let target = realized + downstream_min;
        let cur = &mut self.t[vi][di][ei];
        if cur.is_finite() {
            *cur += self.chi * (target - *cur);
        } else if self.chi > 0.0 {
            *cur = target;
        }
        Ok(*cur)
    }

    /// Smallest estimate over edges out of `j` available at `t`; 0 at `d`.
    pub fn downstream_min(&self, net: &RoadNetwork, j: VertexId, d: VertexId, t: f64) -> f64 {
        if j == d {
            return 0.0;
        }
        self.best_neighbor(net, j, d, t).map_or(f64::INFINITY, |h| h.time)
    }

    /// Greedy next hop; ties go to the lowest neighbor label, then edge id.
    pub fn best_neighbor(&self, net: &RoadNetwork, i: VertexId, d: VertexId, t: f64) -> Result<Hop, RoutingError> {
        let no_route = RoutingError::NoRoute { from: i, destination: d };
        let vi = net.vertex_index(i).ok_or(no_route.clone())?;
        let di = self.dests.iter().position(|x| *x == d).ok_or(no_route.clone())?;
        let mut best: Option<Hop> = None;
        for (k, &(edge, next)) in self.out[vi].iter().enumerate() {
            let time = self.t[vi][di][k];
            if !time.is_finite() || !net.is_available(edge, t).unwrap_or(false) {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => time < b.time || (time == b.time && (next, edge) < (b.next, b.edge)),
            };
            if better {
                best = Some(Hop { edge, next, time });
            }
        }
        best.ok_or(no_route)
    }

    /// Greedy chain of best neighbors from `i` to `d`.
    pub fn predict_path(
        &self,
        net: &RoadNetwork,
        i: VertexId,
        d: VertexId,
        t: f64,
    ) -> Result<Vec<VertexId>, RoutingError> {
        let mut path = vec![i];
        self.extend_greedy(net, &mut path, d, t)?;
        Ok(path)
    }

    /// Like [`predict_path`](Self::predict_path) but the first edge is fixed.
    pub fn predict_path_via(
        &self,
        net: &RoadNetwork,
        first: EdgeId,
        d: VertexId,
        t: f64,
    ) -> Result<Vec<VertexId>, RoutingError> {
        let e = net.edge(first).map_err(|_| RoutingError::NoRoute { from: VertexId(0), destination: d })?;
        let mut path = vec![e.from, e.to];
        self.extend_greedy(net, &mut path, d, t)?;
        Ok(path)
    }

    fn extend_greedy(
        &self,
        net: &RoadNetwork,
        path: &mut Vec<VertexId>,
        d: VertexId,
        t: f64,
    ) -> Result<(), RoutingError> {
        let limit = net.vertices().len();
        let start = path[0];
        let mut at = *path.last().unwrap_or(&start);
        while at != d {
            if path.len() > limit {
                return Err(RoutingError::NoRoute { from: start, destination: d });
            }
            let hop = self.best_neighbor(net, at, d, t)?;
            path.push(hop.next);
            at = hop.next;
        }
        Ok(())
    }

    /// Rows `(i, d, edge, j, T)` for export.
    pub fn entries(&self, net: &RoadNetwork) -> Vec<(VertexId, VertexId, EdgeId, VertexId, f64)> {
        let mut rows = Vec::new();
        for (vi, v) in net.vertices().iter().enumerate() {
            for (di, &d) in self.dests.iter().enumerate() {
                for (k, &(edge, next)) in self.out[vi].iter().enumerate() {
                    rows.push((v.id, d, edge, next, self.t[vi][di][k]));
                }
            }
        }
        rows
    }
}

/// Last vertex of the longest common prefix of two paths from the same start.
pub fn split_vertex(path_k: &[VertexId], path_prev: &[VertexId]) -> Result<VertexId, RoutingError> {
    match (path_k.first(), path_prev.first()) {
        (Some(a), Some(b)) if a == b => {}
        _ => return Err(RoutingError::DifferentStart),
    }
    let common = path_k.iter().zip(path_prev).take_while(|(a, b)| a == b).count();
    Ok(path_k[common - 1])
}

/// Cruising distance estimate of the shared part of a route.
///
/// Returns the distance and whether it had to be clamped at zero.
pub fn cruising_distance_common(t_i: f64, t_s: f64, vbar_i: f64, vbar_s: f64, fm: &FuelModel) -> (f64, bool) {
    let r = |v: f64| fm.fuel_rate(v.max(0.0)).unwrap_or(0.0);
    let d = (r(vbar_i) * t_i - r(vbar_s) * t_s) / fm.phi;
    if d < 0.0 {
        (0.0, true)
    } else {
        (d, false)
    }
}

pub fn cruising_distance_single(t: f64, vbar: f64, fm: &FuelModel) -> f64 {
    cruising_distance_common(t, 0.0, vbar, vbar, fm).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_nguyen_dupuis, ArcSpec};

    fn chain() -> RoadNetwork {
        let arcs = [ArcSpec::new(1, 2, 2000.0, 500.0), ArcSpec::new(2, 3, 2000.0, 500.0)];
        RoadNetwork::new(&arcs, 1, &[VertexId(1)], &[VertexId(3)]).unwrap()
    }

    #[test]
    fn init_values() {
        let net = chain();
        let tt = TravelTimeTable::init(&net, 24.0, 1.0).unwrap();
        let one = tt.get(&net, VertexId(2), VertexId(3), EdgeId(2)).unwrap();
        assert!((one - 83.333333).abs() < 1e-5);
        let two = tt.get(&net, VertexId(1), VertexId(3), EdgeId(2));
        assert!(two.is_err());
        let two = tt.get(&net, VertexId(1), VertexId(3), EdgeId(1)).unwrap();
        assert!((two - 166.666667).abs() < 1e-5);
    }

    #[test]
    fn unreachable_is_infinite() {
        let arcs = [ArcSpec::new(1, 2, 2000.0, 500.0), ArcSpec::new(1, 3, 2000.0, 500.0)];
        let net = RoadNetwork::new(&arcs, 1, &[VertexId(1)], &[VertexId(3)]).unwrap();
        let tt = TravelTimeTable::init(&net, 24.0, 1.0).unwrap();
        assert!(tt.get(&net, VertexId(1), VertexId(3), EdgeId(1)).unwrap().is_infinite());
    }

    #[test]
    fn update_rates() {
        let net = chain();
        let (i, d, e) = (VertexId(2), VertexId(3), EdgeId(2));
        let mut full = TravelTimeTable::init(&net, 24.0, 1.0).unwrap();
        assert_eq!(full.update(&net, i, d, e, 70.0, 10.0).unwrap(), 80.0);
        let mut none = TravelTimeTable::init(&net, 24.0, 0.0).unwrap();
        let before = none.get(&net, i, d, e).unwrap();
        assert_eq!(none.update(&net, i, d, e, 70.0, 10.0).unwrap(), before);
        let mut half = TravelTimeTable::init(&net, 24.0, 1.0).unwrap();
        half.update(&net, i, d, e, 100.0, 0.0).unwrap();
        half.set_chi(0.5).unwrap();
        assert_eq!(half.update(&net, i, d, e, 80.0, 0.0).unwrap(), 90.0);
        assert!(half.update(&net, i, VertexId(1), e, 1.0, 0.0).is_err());
    }

    #[test]
    fn neighbor_ties_and_masks() {
        let mut net = build_nguyen_dupuis(2000.0, 500.0, 1).unwrap();
        let tt = TravelTimeTable::init(&net, 24.0, 1.0).unwrap();
        // from 1 to 2: via 12 is strictly best (3 hops)
        let hop = tt.best_neighbor(&net, VertexId(1), VertexId(2), 0.0).unwrap();
        assert_eq!(hop.next, VertexId(12));
        let hop = tt.best_neighbor(&net, VertexId(12), VertexId(2), 0.0).unwrap();
        assert_eq!(hop.edge, EdgeId(18));
        net.set_edge_availability(EdgeId(18), false, 100.0).unwrap();
        let hop = tt.best_neighbor(&net, VertexId(12), VertexId(2), 150.0).unwrap();
        assert_eq!(hop.edge, EdgeId(17));
        assert_eq!(split_vertex(&[VertexId(1)], &[VertexId(1)]).unwrap(), VertexId(1));
    }

    #[test]
    fn equal_times_pick_lower_label() {
        let arcs = [
            ArcSpec::new(1, 3, 100.0, 10.0),
            ArcSpec::new(3, 4, 100.0, 10.0),
            ArcSpec::new(1, 2, 100.0, 10.0),
            ArcSpec::new(2, 4, 100.0, 10.0),
        ];
        let net = RoadNetwork::new(&arcs, 1, &[VertexId(1)], &[VertexId(4)]).unwrap();
        let tt = TravelTimeTable::init(&net, 10.0, 1.0).unwrap();
        assert_eq!(tt.best_neighbor(&net, VertexId(1), VertexId(4), 0.0).unwrap().next, VertexId(2));
        assert_eq!(tt.predict_path(&net, VertexId(4), VertexId(4), 0.0).unwrap(), vec![VertexId(4)]);
    }

    #[test]
    fn split_cases() {
        let v = |x: &[u32]| x.iter().map(|&i| VertexId(i)).collect::<Vec<_>>();
        assert_eq!(split_vertex(&v(&[1, 5, 7, 9]), &v(&[1, 5, 8, 10])).unwrap(), VertexId(5));
        assert_eq!(split_vertex(&v(&[1, 5, 9]), &v(&[1, 5, 9])).unwrap(), VertexId(9));
        assert_eq!(split_vertex(&v(&[1, 5]), &v(&[1, 6])).unwrap(), VertexId(1));
        assert_eq!(split_vertex(&v(&[1, 5]), &v(&[2, 5])), Err(RoutingError::DifferentStart));
    }

    #[test]
    fn cruising_distance_points() {
        let fm = FuelModel::default();
        let d = cruising_distance_single(1000.0, 24.0, &fm);
        assert!((d - 0.014620224 * 1000.0 / 3.22e-4).abs() < 1e-6);
        assert_eq!(cruising_distance_single(0.0, 24.0, &fm), 0.0);
        assert_eq!(cruising_distance_common(500.0, 500.0, 20.0, 20.0, &fm), (0.0, false));
        let (a, _) = cruising_distance_common(800.0, 300.0, 20.0, 22.0, &fm);
        let (b, _) = cruising_distance_common(1600.0, 600.0, 20.0, 22.0, &fm);
        assert!((2.0 * a - b).abs() < 1e-6);
        assert!(cruising_distance_common(100.0, 300.0, 20.0, 20.0, &fm).1);
        assert_eq!(cruising_distance_common(1000.0, 0.0, 24.0, 5.0, &fm).0, d);
    }
}
