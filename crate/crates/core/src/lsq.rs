//! Polynomial least squares via Householder QR on standardized inputs.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {need} samples with distinct abscissae, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("non-finite sample")]
    NonFinite,
}

/// Polynomial in `z = (h - mean) / scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyFit {
    pub mean: f64,
    pub scale: f64,
    /// Coefficients of `z^0 ..= z^n`.
    pub beta: Vec<f64>,
}

impl PolyFit {
    /// Wraps coefficients of the raw variable `h` (no standardization).
    pub fn from_raw(beta: Vec<f64>) -> Self {
        PolyFit { mean: 0.0, scale: 1.0, beta }
    }

    pub fn degree(&self) -> usize {
        self.beta.len().saturating_sub(1)
    }

    pub fn eval(&self, h: f64) -> f64 {
        let z = (h - self.mean) / self.scale;
        self.beta.iter().rev().fold(0.0, |acc, b| acc * z + b)
    }

    /// Coefficients of `h^0 ..= h^n` after undoing the standardization.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        let n = self.beta.len();
        let mut out = vec![0.0; n];
        // expand beta_k ((h - m)/s)^k binomially
        for (k, &b) in self.beta.iter().enumerate() {
            let coef = b / math::powi(self.scale, k as i32);
            let mut binom = 1.0;
            for j in 0..=k {
                out[j] += coef * binom * math::powi(-self.mean, (k - j) as i32);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        out
    }

    /// Sum of squared residuals over `samples`.
    pub fn sse(&self, samples: &[(f64, f64)]) -> f64 {
        samples.iter().map(|&(h, y)| (self.eval(h) - y) * (self.eval(h) - y)).sum()
    }
}

/// Least-squares polynomial of degree `n` through `samples = (h, y)`.
pub fn fit_polynomial(samples: &[(f64, f64)], n: usize) -> Result<PolyFit, FitError> {
    let m = samples.len();
    let cols = n + 1;
    if samples.iter().any(|(h, y)| !h.is_finite() || !y.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if m < cols || distinct.len() < cols {
        return Err(FitError::TooFewSamples { need: cols, got: distinct.len().min(m) });
    }
    let mean = samples.iter().map(|s| s.0).sum::<f64>() / m as f64;
    let var = samples.iter().map(|s| (s.0 - mean) * (s.0 - mean)).sum::<f64>() / m as f64;
    let scale = if var > 0.0 { math::sqrt(var) } else { 1.0 };

    // column-major design matrix
    let mut a = vec![0.0; m * cols];
    for (i, &(h, _)) in samples.iter().enumerate() {
        let z = (h - mean) / scale;
        let mut p = 1.0;
        for j in 0..cols {
            a[j * m + i] = p;
            p *= z;
        }
    }
    let mut y: Vec<f64> = samples.iter().map(|s| s.1).collect();

    let mut diag = vec![0.0; cols];
    for k in 0..cols {
        let col = &a[k * m..(k + 1) * m];
        let norm = math::sqrt(col[k..].iter().map(|x| x * x).sum::<f64>());
        if norm == 0.0 {
            return Err(FitError::RankDeficient);
        }
        let alpha = if col[k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = col[k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..cols {
            let cj = &mut a[j * m..(j + 1) * m];
            let dot: f64 = v.iter().zip(&cj[k..]).map(|(p, q)| p * q).sum();
            let f = 2.0 * dot / vnorm2;
            for (x, vi) in cj[k..].iter_mut().zip(&v) {
                *x -= f * vi;
            }
        }
        let dot: f64 = v.iter().zip(&y[k..]).map(|(p, q)| p * q).sum();
        let f = 2.0 * dot / vnorm2;
        for (x, vi) in y[k..].iter_mut().zip(&v) {
            *x -= f * vi;
        }
    }
    let rmax = diag.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    if diag.iter().any(|d| d.abs() <= 1e-10 * rmax) {
        return Err(FitError::RankDeficient);
    }
    let mut beta = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut s = y[k];
        for j in k + 1..cols {
            s -= a[j * m + k] * beta[j];
        }
        beta[k] = s / a[k * m + k];
    }
    Ok(PolyFit { mean, scale, beta })
}
