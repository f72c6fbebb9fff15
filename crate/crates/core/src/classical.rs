//! Classical q-attention model.
//!
//! The receiver splits unit attention `q_j` over `N` channels and retweets
//! through channel `j` with probability `P(C|A;B_j)`. The probability for an
//! active subset is the law of total probability over that subset. Under
//! homogeneous attention and channel probabilities this becomes a line in `n`
//! through `P(1)` that flattens once `n` reaches capacity.

use std::fmt::Write as _;

use crate::cascade::PatternStats;
use crate::error::{Error, Result};

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Attention weights and per-channel retweet probabilities for `N` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalParams {
    attention: Vec<f64>,
    channel_probs: Vec<f64>,
}

impl ClassicalParams {
    pub fn new(attention: Vec<f64>, channel_probs: Vec<f64>) -> Result<Self> {
        if attention.is_empty() || attention.len() != channel_probs.len() {
            return Err(Error::Domain(format!(
                "need one attention weight per channel (got {} and {})",
                attention.len(),
                channel_probs.len()
            )));
        }
        let unit = |x: &f64| (0.0..=1.0).contains(x);
        if !attention.iter().all(unit) || !channel_probs.iter().all(unit) {
            return Err(Error::Domain("probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = attention.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Domain(format!(
                "attention weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            attention,
            channel_probs,
        })
    }

    /// Homogeneous parameters: channel 1 gets `q1`, the other `capacity - 1`
    /// channels share the rest equally, and every channel retweets with `p`.
    pub fn homogeneous(q1: f64, capacity: usize, p: f64) -> Result<Self> {
        if capacity < 2 {
            return Err(Error::Domain("capacity must be at least 2".into()));
        }
        let rest = (1.0 - q1) / (capacity - 1) as f64;
        let mut attention = vec![rest; capacity];
        attention[0] = q1;
        Self::new(attention, vec![p; capacity])
    }

    /// `N`.
    pub fn capacity(&self) -> usize {
        self.attention.len()
    }

    pub fn attention(&self) -> &[f64] {
        &self.attention
    }

    pub fn channel_probs(&self) -> &[f64] {
        &self.channel_probs
    }
}

/// Sum of `q_j * P(C|A;B_j)` over the active channels (0-based indices).
pub fn total_probability(params: &ClassicalParams, active: &[usize]) -> Result<f64> {
    check_active_set(active, params.capacity())?;
    Ok(active
        .iter()
        .map(|&j| params.attention[j] * params.channel_probs[j])
        .sum())
}

/// Rejects empty sets, out-of-range and repeated indices.
pub(crate) fn check_active_set(active: &[usize], channels: usize) -> Result<()> {
    if active.is_empty() {
        return Err(Error::Domain("active channel set is empty".into()));
    }
    for (pos, &j) in active.iter().enumerate() {
        if j >= channels {
            return Err(Error::Domain(format!(
                "channel index {j} out of range for {channels} channels"
            )));
        }
        if active[..pos].contains(&j) {
            return Err(Error::Domain(format!("channel index {j} repeated")));
        }
    }
    Ok(())
}

/// Anchored line fitted to pattern means.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalFit {
    /// Observed `P(1)`; the line passes through it exactly.
    pub anchor: f64,
    /// Increase per added channel, never negative.
    pub slope: f64,
    /// Least-squares slope before clamping at zero.
    pub unconstrained_slope: f64,
    /// Largest fitted `n`; predictions plateau beyond it.
    pub n_max_fitted: usize,
    /// Objective at the fitted slope, over every fitted `n`.
    pub residual: f64,
    /// Fitted points `(n, observed mean, weight)`.
    pub points: Vec<(usize, f64, f64)>,
}

/// Options for [`fit_classical`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassicalFitOptions {
    /// Weight each pattern by its instance count instead of uniformly.
    pub weight_by_instances: bool,
}

impl ClassicalFit {
    /// Anchor plus slope times `(n - 1)`, held constant past `n_max_fitted`.
    pub fn predict(&self, n: usize) -> f64 {
        let n = n.clamp(1, self.n_max_fitted.max(1));
        self.anchor + self.slope * (n - 1) as f64
    }

    /// Flat `key = value` report with per-n observed and predicted values.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "classical.anchor = {}", self.anchor);
        let _ = writeln!(out, "classical.slope = {}", self.slope);
        let _ = writeln!(
            out,
            "classical.unconstrained_slope = {}",
            self.unconstrained_slope
        );
        let _ = writeln!(out, "classical.n_max_fitted = {}", self.n_max_fitted);
        let _ = writeln!(out, "classical.residual = {}", self.residual);
        for &(n, observed, _) in &self.points {
            let _ = writeln!(out, "classical.observed.{n} = {observed}");
            let _ = writeln!(out, "classical.predicted.{n} = {}", self.predict(n));
        }
        out
    }
}

/// `predict_classical`: the fitted piecewise-linear curve at `n`.
pub fn predict_classical(fit: &ClassicalFit, n: usize) -> f64 {
    fit.predict(n)
}

/// Least-squares line through the fixed point `(1, P(1))` with slope clamped
/// at zero.
///
/// With `d_n = n - 1` and weights `w_n`, the unconstrained optimum is
/// `s* = sum w d (y - P(1)) / sum w d^2`; the objective is a convex parabola
/// in `s`, so the constrained optimum is `max(s*, 0)`.
pub fn fit_classical(stats: &PatternStats, options: ClassicalFitOptions) -> Result<ClassicalFit> {
    let populated = stats.populated();
    let anchor = match populated.first() {
        Some(&(1, mean, _)) => mean,
        _ => {
            return Err(Error::Precondition(
                "no data for the one-channel pattern".into(),
            ))
        }
    };
    if populated.len() < 2 {
        return Err(Error::Precondition(
            "need at least one populated pattern with n >= 2".into(),
        ));
    }
    let points: Vec<(usize, f64, f64)> = populated
        .iter()
        .map(|&(n, mean, count)| {
            let weight = if options.weight_by_instances {
                count as f64
            } else {
                1.0
            };
            (n, mean, weight)
        })
        .collect();

    let (num, den) = points.iter().fold((0.0, 0.0), |(num, den), &(n, y, w)| {
        let d = (n - 1) as f64;
        (num + w * d * (y - anchor), den + w * d * d)
    });
    let unconstrained_slope = num / den;
    let slope = unconstrained_slope.max(0.0);
    let n_max_fitted = points.last().map(|p| p.0).unwrap_or(1);

    let residual = points
        .iter()
        .map(|&(n, y, w)| w * (anchor + slope * (n - 1) as f64 - y).powi(2))
        .sum();
    Ok(ClassicalFit {
        anchor,
        slope,
        unconstrained_slope,
        n_max_fitted,
        residual,
        points,
    })
}
