//! Cost-to-go approximation for merge decisions.
//!
//! Merge outcomes are regressed on the headway with a polynomial; non-merge
//! outcomes are averaged. The cheaper estimate wins.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use thiserror::Error;

use crate::lsq::{fit_polynomial, PolyFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("merge cost model has not been fitted")]
    Unfitted,
    #[error("no non-merge outcomes recorded")]
    EmptyWindow,
    #[error("non-finite outcome")]
    NonFinite,
    #[error("window must hold more than degree + 1 samples")]
    WindowTooSmall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Merge,
    NoMerge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ApproxParams {
    pub degree: usize,
    /// Merge window holds `window_l + 1` samples.
    pub window_l: usize,
    /// Non-merge window holds `window_y + 1` samples.
    pub window_y: usize,
}

impl Default for ApproxParams {
    fn default() -> Self {
        ApproxParams { degree: 3, window_l: 30, window_y: 20 }
    }
}

#[derive(Clone, Debug)]
pub struct PolyCostModel {
    params: ApproxParams,
    merge: VecDeque<(f64, f64)>,
    nomerge: VecDeque<f64>,
    fit: Option<PolyFit>,
    sigma2: f64,
    decisions: usize,
}

impl PolyCostModel {
    pub fn new(params: ApproxParams) -> Result<Self, ApproxError> {
        if params.window_l < params.degree {
            return Err(ApproxError::WindowTooSmall);
        }
        Ok(PolyCostModel {
            params,
            merge: VecDeque::with_capacity(params.window_l + 1),
            nomerge: VecDeque::with_capacity(params.window_y + 1),
            fit: None,
            sigma2: 0.0,
            decisions: 0,
        })
    }

    pub fn params(&self) -> ApproxParams {
        self.params
    }

    pub fn fit(&self) -> Option<&PolyFit> {
        self.fit.as_ref()
    }

    pub fn noise_variance(&self) -> f64 {
        self.sigma2
    }

    pub fn merge_window(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.merge.iter()
    }

    pub fn nomerge_window(&self) -> impl Iterator<Item = &f64> {
        self.nomerge.iter()
    }

    pub fn estimate_merge_cost(&self, h: f64) -> Result<f64, ApproxError> {
        self.fit.as_ref().map(|f| f.eval(h)).ok_or(ApproxError::Unfitted)
    }

    pub fn estimate_nomerge_cost(&self) -> Result<f64, ApproxError> {
        if self.nomerge.is_empty() {
            return Err(ApproxError::EmptyWindow);
        }
        Ok(self.nomerge.iter().sum::<f64>() / self.nomerge.len() as f64)
    }

    /// Chooses an action for headway `h`.
    ///
    /// The first `2(n+1)` calls alternate merge / no-merge so that both
    /// estimators get samples.
    pub fn decide(&mut self, h: f64) -> Action {
        let k = self.decisions;
        self.decisions += 1;
        if k < 2 * (self.params.degree + 1) {
            return if k.is_multiple_of(2) { Action::Merge } else { Action::NoMerge };
        }
        let Ok(merge) = self.estimate_merge_cost(h) else {
            return Action::Merge;
        };
        let Ok(nomerge) = self.estimate_nomerge_cost() else {
            return Action::NoMerge;
        };
        choose(merge, nomerge)
    }

    /// Adds an observed cost-to-go for the action taken at headway `h`.
    pub fn record_outcome(&mut self, h: f64, action: Action, realized: f64) -> Result<(), ApproxError> {
        if !realized.is_finite() || !h.is_finite() {
            return Err(ApproxError::NonFinite);
        }
        match action {
            Action::Merge => {
                if self.merge.len() == self.params.window_l + 1 {
                    self.merge.pop_front();
                }
                self.merge.push_back((h, realized));
                if self.merge.len() > self.params.degree {
                    let samples: Vec<(f64, f64)> = self.merge.iter().copied().collect();
                    // keep the previous fit when the window is degenerate
                    if let Ok(fit) = fit_polynomial(&samples, self.params.degree) {
                        let dof = samples.len().saturating_sub(self.params.degree + 1).max(1);
                        self.sigma2 = fit.sse(&samples) / dof as f64;
                        self.fit = Some(fit);
                    }
                }
            }
            Action::NoMerge => {
                if self.nomerge.len() == self.params.window_y + 1 {
                    self.nomerge.pop_front();
                }
                self.nomerge.push_back(realized);
            }
        }
        Ok(())
    }
}

/// Smaller estimated cost-to-go; ties merge.
pub fn choose(merge_cost: f64, nomerge_cost: f64) -> Action {
    if merge_cost <= nomerge_cost {
        Action::Merge
    } else {
        Action::NoMerge
    }
}
