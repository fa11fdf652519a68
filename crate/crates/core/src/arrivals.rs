//! Poisson demand streams and the discounted arrival-rate estimator.
//!
//! Every source draws from its own ChaCha8 stream (seed, stream id), so adding
//! or removing a source never perturbs the others.

use alloc::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::math;
use crate::network::VertexId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrivalError {
    #[error("arrival rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("headway history has no positive entries")]
    EmptyHistory,
    #[error("invalid estimator parameters: psi {psi}, M {m}")]
    InvalidParams { psi: f64, m: usize },
}

/// Inverse-CDF exponential variate with the given rate.
///
/// The uniform is built from the top 53 bits and shifted into (0, 1], so the
/// logarithm is always finite.
pub fn sample_exponential<R: RngCore>(rng: &mut R, rate: f64) -> f64 {
    let bits = rng.next_u64() >> 11;
    let u = (bits + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    -math::ln(u) / rate
}

#[derive(Clone, Debug)]
pub struct PoissonSource {
    pub rate: f64,
    pub origin: VertexId,
    pub destination: VertexId,
    /// `None` means unbounded.
    pub n_total: Option<u64>,
    pub stream: u64,
    emitted: u64,
    rng: ChaCha8Rng,
}

impl PoissonSource {
    pub fn new(
        rate: f64,
        origin: VertexId,
        destination: VertexId,
        n_total: Option<u64>,
        seed: u64,
        stream: u64,
    ) -> Result<Self, ArrivalError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(ArrivalError::NonPositiveRate(rate));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(PoissonSource { rate, origin, destination, n_total, stream, emitted: 0, rng })
    }

    pub fn sample_interarrival(&mut self) -> f64 {
        sample_exponential(&mut self.rng, self.rate)
    }

    /// Next inter-arrival time, or `None` once `n_total` vehicles were emitted.
    pub fn next_arrival(&mut self) -> Option<f64> {
        if self.n_total.is_some_and(|n| self.emitted >= n) {
            return None;
        }
        self.emitted += 1;
        Some(self.sample_interarrival())
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }
}

/// Last `M` inter-arrival times at a vertex, newest first.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadwayHistory {
    psi: f64,
    m: usize,
    buf: VecDeque<f64>,
}

impl HeadwayHistory {
    pub fn new(psi: f64, m: usize) -> Result<Self, ArrivalError> {
        if !(psi > 0.0 && psi < 1.0) || m == 0 {
            return Err(ArrivalError::InvalidParams { psi, m });
        }
        Ok(HeadwayHistory { psi, m, buf: VecDeque::with_capacity(m) })
    }

    /// Records a headway; non-positive values are ignored.
    pub fn push(&mut self, x: f64) {
        if !(x > 0.0) || !x.is_finite() {
            return;
        }
        if self.buf.len() == self.m {
            self.buf.pop_back();
        }
        self.buf.push_front(x);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn window(&self) -> usize {
        self.m
    }

    /// Newest first.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.buf.iter().copied()
    }

    pub fn estimate(&self) -> Result<f64, ArrivalError> {
        estimate_arrival_rate(self)
    }
}

/// Discounted arrival-rate estimate in veh/s.
///
/// With fewer than `M` entries the weighted sum is rescaled so that a
/// constant stream yields the same value the full window would.
pub fn estimate_arrival_rate(history: &HeadwayHistory) -> Result<f64, ArrivalError> {
    let m_avail = history.len();
    if m_avail == 0 {
        return Err(ArrivalError::EmptyHistory);
    }
    let psi = history.psi;
    let mut weight = 1.0;
    let mut sum = 0.0;
    for x in history.iter() {
        sum += weight * x;
        weight *= psi;
    }
    let full = 1.0 - math::powi(psi, history.m as i32);
    let avail = 1.0 - math::powi(psi, m_avail as i32);
    let denom = (1.0 - psi) * sum * full / avail;
    if !(denom > 0.0) {
        return Err(ArrivalError::EmptyHistory);
    }
    Ok(1.0 / denom)
}

/// Rate of the background stream paired with a CAV stream at penetration `zeta`.
pub fn background_rate(cav_rate: f64, zeta: f64) -> f64 {
    if zeta >= 1.0 {
        0.0
    } else {
        cav_rate * (1.0 - zeta) / zeta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec::Vec;

    fn src(rate: f64, seed: u64) -> PoissonSource {
        PoissonSource::new(rate, VertexId(1), VertexId(2), None, seed, 0).unwrap()
    }

    #[test]
    fn sample_mean_216_per_hour() {
        let mut s = src(0.06, 7);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| s.sample_interarrival()).sum::<f64>() / n as f64;
        assert!((mean - 1.0 / 0.06).abs() / (1.0 / 0.06) < 0.02, "mean {mean}");
    }

    #[test]
    fn deterministic_streams() {
        let a: Vec<f64> = {
            let mut s = src(0.06, 11);
            (0..100).map(|_| s.sample_interarrival()).collect()
        };
        let b: Vec<f64> = {
            let mut s = src(0.06, 11);
            (0..100).map(|_| s.sample_interarrival()).collect()
        };
        assert_eq!(a, b);
        let mut other = PoissonSource::new(0.06, VertexId(1), VertexId(2), None, 11, 1).unwrap();
        assert_ne!(a[0], other.sample_interarrival());
    }

    #[test]
    fn rate_scaling() {
        let n = 100_000;
        let mut s1 = src(0.05, 3);
        let mut s2 = src(0.10, 4);
        let m1: f64 = (0..n).map(|_| s1.sample_interarrival()).sum::<f64>() / n as f64;
        let m2: f64 = (0..n).map(|_| s2.sample_interarrival()).sum::<f64>() / n as f64;
        assert!(((m1 / 2.0) - m2).abs() / m2 < 0.02);
    }

    #[test]
    fn bounded_source_stops() {
        let mut s = PoissonSource::new(1.0, VertexId(1), VertexId(2), Some(3), 1, 0).unwrap();
        assert!(s.next_arrival().is_some());
        assert!(s.next_arrival().is_some());
        assert!(s.next_arrival().is_some());
        assert!(s.next_arrival().is_none());
        assert!(PoissonSource::new(0.0, VertexId(1), VertexId(2), None, 1, 0).is_err());
    }

    #[test]
    fn constant_stream_closed_form() {
        let mut h = HeadwayHistory::new(0.9, 50).unwrap();
        for _ in 0..50 {
            h.push(10.0);
        }
        let lam = h.estimate().unwrap();
        assert!((lam - 0.100518).abs() < 1e-6, "{lam}");
        // warm-up agrees with the full window on constant streams
        let mut w = HeadwayHistory::new(0.9, 50).unwrap();
        for _ in 0..7 {
            w.push(10.0);
        }
        assert!((w.estimate().unwrap() - lam).abs() < 1e-12);
    }

    #[test]
    fn single_term() {
        for psi in [0.1, 0.5, 0.9] {
            let mut h = HeadwayHistory::new(psi, 1).unwrap();
            h.push(4.0);
            h.push(8.0);
            assert!((h.estimate().unwrap() - 1.0 / ((1.0 - psi) * 8.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_and_invalid() {
        let mut h = HeadwayHistory::new(0.9, 5).unwrap();
        assert_eq!(h.estimate(), Err(ArrivalError::EmptyHistory));
        h.push(0.0);
        h.push(-3.0);
        assert!(h.is_empty());
        assert!(HeadwayHistory::new(1.0, 5).is_err());
        assert!(HeadwayHistory::new(0.5, 0).is_err());
    }

    #[test]
    fn background_split() {
        assert!((background_rate(0.01, 0.1) - 0.09).abs() < 1e-15);
        assert_eq!(background_rate(0.01, 1.0), 0.0);
    }
}
