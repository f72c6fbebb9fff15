//! Quantum q-attention model.
//!
//! Attention weights and channel retweet probabilities are replaced by complex
//! amplitudes. The amplitude for an active channel set is the sum of path
//! amplitudes `psi_j * <C|A;B_j>`, and its probability is the squared
//! magnitude. Expanding the square gives the classical sum of path
//! probabilities plus one interference term per channel pair,
//!
//! ```text
//! Int_ij = 2 |psi_i psi_j <C|A;B_i> <C|A;B_j>| cos(theta_ij)
//! ```
//!
//! which can be negative, so adding a channel can lower the probability.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cascade::PatternStats;
use crate::classical::check_active_set;
use crate::error::{Error, Result};
use crate::exec::{mix_seed, Execution};
use crate::optimize::{nelder_mead, NelderMeadConfig};

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Attention amplitudes `psi_j` and channel amplitudes `<C|A;B_j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumParams {
    attention: Vec<Complex64>,
    channel: Vec<Complex64>,
}

impl QuantumParams {
    /// Requires `sum |psi_j|^2 = 1` and `|<C|A;B_j>|^2 <= 1`.
    pub fn new(attention: Vec<Complex64>, channel: Vec<Complex64>) -> Result<Self> {
        if attention.is_empty() || attention.len() != channel.len() {
            return Err(Error::Domain(format!(
                "need one attention amplitude per channel (got {} and {})",
                attention.len(),
                channel.len()
            )));
        }
        let norm: f64 = attention.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Domain(format!(
                "attention amplitudes have squared norm {norm}, expected 1"
            )));
        }
        if let Some(c) = channel
            .iter()
            .find(|c| c.norm_sqr().is_nan() || c.norm_sqr() > 1.0 + NORMALIZATION_TOLERANCE)
        {
            return Err(Error::Domain(format!(
                "channel amplitude {c} has squared magnitude above 1"
            )));
        }
        Ok(Self { attention, channel })
    }

    /// Real attention `sqrt(q1)` on channel 1 and `sqrt((1 - q1) / (K - 1))`
    /// elsewhere; channel amplitudes `sqrt(p) e^{i phase_j}`.
    pub fn homogeneous(q1: f64, p: f64, phases: &[f64]) -> Result<Self> {
        let k = phases.len();
        if k == 0 {
            return Err(Error::Domain("need at least one channel".into()));
        }
        if !(0.0..=1.0).contains(&q1) || !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain("q1 and p must lie in [0, 1]".into()));
        }
        if k == 1 && q1 != 1.0 {
            return Err(Error::Domain("a single channel needs q1 = 1".into()));
        }
        let rest = if k > 1 {
            (1.0 - q1) / (k - 1) as f64
        } else {
            0.0
        };
        let attention = (0..k)
            .map(|j| Complex64::new(if j == 0 { q1 } else { rest }.sqrt(), 0.0))
            .collect();
        let channel = phases
            .iter()
            .map(|&phase| Complex64::from_polar(p.sqrt(), phase))
            .collect();
        Self::new(attention, channel)
    }

    /// Random valid parameters: normalized attention with uniform phases,
    /// channel magnitudes uniform in [0, 1] with uniform phases.
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        assert!(k > 0, "need at least one channel");
        let raw: Vec<Complex64> = (0..k)
            .map(|_| Complex64::from_polar(rng.random_range(0.05..1.0), rng.random_range(0.0..TAU)))
            .collect();
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let attention = raw.into_iter().map(|a| a / norm).collect();
        let channel = (0..k)
            .map(|_| Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..TAU)))
            .collect();
        Self { attention, channel }
    }

    /// `K`.
    pub fn channels(&self) -> usize {
        self.attention.len()
    }

    pub fn attention(&self) -> &[Complex64] {
        &self.attention
    }

    pub fn channel_amplitudes(&self) -> &[Complex64] {
        &self.channel
    }

    /// Multiply every attention amplitude by `e^{i phase}`.
    pub fn with_global_phase(&self, phase: f64) -> Self {
        let unit = Complex64::from_polar(1.0, phase);
        Self {
            attention: self.attention.iter().map(|a| a * unit).collect(),
            channel: self.channel.clone(),
        }
    }

    fn path(&self, j: usize) -> Complex64 {
        self.attention[j] * self.channel[j]
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::Domain(format!(
                "interference needs two channels, got {i} twice"
            )));
        }
        let k = self.channels();
        if i >= k || j >= k {
            return Err(Error::Domain(format!(
                "channel pair ({i}, {j}) out of range for {k} channels"
            )));
        }
        Ok(())
    }
}

/// Sum of path amplitudes over the active channels (0-based indices).
pub fn total_amplitude(params: &QuantumParams, active: &[usize]) -> Result<Complex64> {
    check_active_set(active, params.channels())?;
    Ok(active.iter().map(|&j| params.path(j)).sum())
}

/// Squared magnitude of a total amplitude. Values above one are possible for
/// valid parameters; they are flagged, not clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeProbability {
    pub value: f64,
    pub within_unit_interval: bool,
}

pub fn probability(params: &QuantumParams, active: &[usize]) -> Result<AmplitudeProbability> {
    let value = total_amplitude(params, active)?.norm_sqr();
    Ok(AmplitudeProbability {
        value,
        within_unit_interval: value <= 1.0,
    })
}

/// `theta_ij`, the phase of `psi_i* psi_j <C|A;B_i>* <C|A;B_j>`.
pub fn interference_phase(params: &QuantumParams, i: usize, j: usize) -> Result<f64> {
    params.check_pair(i, j)?;
    Ok(pair_product(params, i, j).arg())
}

fn pair_product(params: &QuantumParams, i: usize, j: usize) -> Complex64 {
    params.attention[i].conj() * params.attention[j] * params.channel[i].conj() * params.channel[j]
}

/// `Int_ij = 2 |psi_i psi_j <C|A;B_i> <C|A;B_j>| cos(theta_ij)`. Symmetric in
/// `(i, j)`.
pub fn interference_term(params: &QuantumParams, i: usize, j: usize) -> Result<f64> {
    params.check_pair(i, j)?;
    let z = pair_product(params, i, j);
    Ok(2.0 * z.norm() * z.arg().cos())
}

/// Probability split into the classical sum of path probabilities and the
/// pairwise interference terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Active channel indices, in the order given.
    pub channels: Vec<usize>,
    pub classical_part: f64,
    /// Row-major `n x n` symmetric matrix over positions in `channels`; zero diagonal.
    interference: Vec<f64>,
}

impl Decomposition {
    /// Interference between the channels at positions `a` and `b` of `channels`.
    pub fn interference(&self, a: usize, b: usize) -> f64 {
        self.interference[a * self.channels.len() + b]
    }

    /// `(i, j, Int_ij)` for every pair with `i` before `j` in `channels`.
    pub fn pairs(&self) -> Vec<(usize, usize, f64)> {
        let n = self.channels.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for a in 0..n {
            for b in a + 1..n {
                out.push((self.channels[a], self.channels[b], self.interference(a, b)));
            }
        }
        out
    }

    pub fn total_interference(&self) -> f64 {
        self.pairs().iter().map(|p| p.2).sum()
    }

    /// `classical_part + sum Int_ij`.
    pub fn probability(&self) -> f64 {
        self.classical_part + self.total_interference()
    }
}

pub fn decompose(params: &QuantumParams, active: &[usize]) -> Result<Decomposition> {
    check_active_set(active, params.channels())?;
    let n = active.len();
    let classical_part = active.iter().map(|&j| params.path(j).norm_sqr()).sum();
    let mut interference = vec![0.0; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let value = interference_term(params, active[a], active[b])?;
            interference[a * n + b] = value;
            interference[b * n + a] = value;
        }
    }
    Ok(Decomposition {
        channels: active.to_vec(),
        classical_part,
        interference,
    })
}

/// Optimizer settings for [`fit_quantum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumFitConfig {
    pub starts: usize,
    pub evaluations_per_start: usize,
    /// Weight on squared excess of any predicted probability above one.
    pub penalty_weight: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for QuantumFitConfig {
    fn default() -> Self {
        Self {
            starts: 64,
            evaluations_per_start: 2_000,
            penalty_weight: 1e3,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

/// Homogeneous-magnitude quantum fit with `theta_1 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumFit {
    /// Observed `P(1)`, reproduced as `q1 * p`.
    pub anchor: f64,
    pub q1: f64,
    /// Shared channel probability; the channel magnitude is `sqrt(p)`.
    pub p: f64,
    /// Channel phases in `[0, 2 pi)`, first entry zero. Length is `K`.
    pub phases: Vec<f64>,
    /// Sum of squared errors over observed patterns.
    pub residual: f64,
    /// Residual plus the out-of-range penalty.
    pub objective: f64,
    pub converged: bool,
    pub winning_start: usize,
    pub evaluations: usize,
    /// `(n, observed mean)` for every fitted pattern.
    pub observed: Vec<(usize, f64)>,
}

impl QuantumFit {
    /// Number of modeled channels `K`.
    pub fn channels(&self) -> usize {
        self.phases.len()
    }

    pub fn params(&self) -> QuantumParams {
        QuantumParams::homogeneous(self.q1, self.p, &self.phases)
            .expect("fitted parameters are valid by construction")
    }

    /// Flat `key = value` report: parameters, per-n observed and predicted
    /// values, and the interference table over all `K` channels.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "quantum.q_1 = {}", self.q1);
        let _ = writeln!(out, "quantum.p = {}", self.p);
        for (j, phase) in self.phases.iter().enumerate().skip(1) {
            let _ = writeln!(out, "quantum.theta_{} = {phase}", j + 1);
        }
        let _ = writeln!(out, "quantum.residual = {}", self.residual);
        let _ = writeln!(out, "quantum.converged = {}", self.converged);
        let _ = writeln!(out, "quantum.winning_start = {}", self.winning_start);
        for &(n, observed) in &self.observed {
            let predicted = predict_quantum(self, n)
                .map(|p| p.value)
                .unwrap_or(f64::NAN);
            let _ = writeln!(out, "quantum.observed.{n} = {observed}");
            let _ = writeln!(out, "quantum.predicted.{n} = {predicted}");
        }
        let all: Vec<usize> = (0..self.channels()).collect();
        if let Ok(decomposition) = decompose(&self.params(), &all) {
            for (i, j, value) in decomposition.pairs() {
                let _ = writeln!(out, "quantum.int_{}_{} = {value}", i + 1, j + 1);
            }
        }
        out
    }
}

/// Probability over the nested set `{1..n}` under the fit's parameters.
pub fn predict_quantum(fit: &QuantumFit, n: usize) -> Result<AmplitudeProbability> {
    if n == 0 || n > fit.channels() {
        return Err(Error::Domain(format!(
            "n = {n} outside 1..={}",
            fit.channels()
        )));
    }
    let active: Vec<usize> = (0..n).collect();
    probability(&fit.params(), &active)
}

/// Objective over the search vector `[u, phi_2, .., phi_K]`, where
/// `p = anchor + (1 - anchor) sin^2 u` keeps `p` in `[anchor, 1]` and
/// `q1 = anchor / p` pins `P(1)` to the anchor.
struct Curve<'a> {
    anchor: f64,
    k: usize,
    observed: &'a [(usize, f64)],
    penalty_weight: f64,
}

impl Curve<'_> {
    fn unpack(&self, x: &[f64]) -> (f64, f64) {
        let p = self.anchor + (1.0 - self.anchor) * x[0].sin().powi(2);
        let q1 = if p > 0.0 {
            (self.anchor / p).min(1.0)
        } else {
            1.0
        };
        (q1, p)
    }

    /// Returns `(sse, penalty)`.
    fn evaluate(&self, x: &[f64]) -> (f64, f64) {
        let (q1, p) = self.unpack(x);
        let head = (q1 * p).sqrt();
        let rest = ((1.0 - q1) / (self.k - 1) as f64 * p).sqrt();
        let mut amplitude = Complex64::new(head, 0.0);
        let mut predicted = Vec::with_capacity(self.k);
        predicted.push(amplitude.norm_sqr());
        for &phase in &x[1..] {
            amplitude += Complex64::from_polar(rest, phase);
            predicted.push(amplitude.norm_sqr());
        }
        let sse = self
            .observed
            .iter()
            .map(|&(n, y)| (predicted[n - 1] - y).powi(2))
            .sum();
        let penalty = predicted
            .iter()
            .map(|&v| (v - 1.0).max(0.0).powi(2))
            .sum::<f64>()
            * self.penalty_weight;
        (sse, penalty)
    }
}

/// Homogeneous parameters `(q1, p, theta_2)` for `K = 2` that reproduce
/// `P(1) = anchor` and `P(2) = second` exactly, with `theta_2` at 0
/// (constructive) or pi (destructive). `None` when `p` would exceed one.
pub fn two_channel_witness(anchor: f64, second: f64) -> Option<(f64, f64, f64)> {
    let x = witness_start(anchor, second, 2)?;
    let p = anchor + (1.0 - anchor) * x[0].sin().powi(2);
    Some((anchor / p, p, x[1]))
}

/// Search point reproducing the first two observations exactly with the
/// second phase at 0 (constructive) or pi (destructive), if one exists.
fn witness_start(anchor: f64, second: f64, k: usize) -> Option<Vec<f64>> {
    let (root, phase) = if second >= anchor {
        (second.sqrt() - anchor.sqrt(), 0.0)
    } else {
        (anchor.sqrt() - second.sqrt(), PI)
    };
    // per-channel path probability (1 - q1) p / (K - 1)
    let path = root * root;
    let p = anchor + (k - 1) as f64 * path;
    if p > 1.0 || anchor >= 1.0 {
        return None;
    }
    let u = ((p - anchor) / (1.0 - anchor)).sqrt().asin();
    let mut x = vec![phase; k];
    x[0] = u;
    Some(x)
}

fn wrap_phase(phase: f64) -> f64 {
    let wrapped = phase.rem_euclid(TAU);
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Fit the homogeneous quantum model to observed pattern means.
///
/// Start 0 is the analytic two-channel witness when one exists; the rest are
/// drawn from a generator seeded by `config.seed`. Each start runs an
/// independent Nelder-Mead search and the winner is the lexicographic minimum
/// of (objective, start index), so the result does not depend on scheduling.
pub fn fit_quantum(stats: &PatternStats, config: &QuantumFitConfig) -> Result<QuantumFit> {
    let observed: Vec<(usize, f64)> = stats.populated().iter().map(|&(n, y, _)| (n, y)).collect();
    let anchor = match observed.first() {
        Some(&(1, y)) => y,
        _ => {
            return Err(Error::Precondition(
                "no data for the one-channel pattern".into(),
            ))
        }
    };
    if observed.len() < 2 {
        return Err(Error::Precondition(
            "need at least one populated pattern with n >= 2".into(),
        ));
    }
    if config.starts == 0 {
        return Err(Error::Precondition(
            "need at least one optimizer start".into(),
        ));
    }
    let k = observed.last().map(|o| o.0).unwrap_or(1);
    let curve = Curve {
        anchor,
        k,
        observed: &observed,
        penalty_weight: config.penalty_weight,
    };

    let witness = observed
        .iter()
        .find(|o| o.0 == 2)
        .and_then(|&(_, second)| witness_start(anchor, second, k));
    let starts: Vec<Vec<f64>> = (0..config.starts)
        .map(|index| match (&witness, index) {
            (Some(w), 0) => w.clone(),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, index as u64));
                let mut x = vec![rng.random_range(0.0..PI / 2.0)];
                x.extend((1..k).map(|_| rng.random_range(0.0..TAU)));
                x
            }
        })
        .collect();

    let nm = NelderMeadConfig {
        max_evaluations: config.evaluations_per_start,
        ..NelderMeadConfig::default()
    };
    let runs = config.execution.map_slice(&starts, |start| {
        nelder_mead(
            |x| {
                let (sse, penalty) = curve.evaluate(x);
                sse + penalty
            },
            start,
            &nm,
        )
    });
    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let (winning_start, best) = runs
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .expect("at least one start");

    let (q1, p) = curve.unpack(&best.x);
    let (residual, _) = curve.evaluate(&best.x);
    let mut phases = vec![0.0];
    phases.extend(best.x[1..].iter().map(|&phase| wrap_phase(phase)));
    Ok(QuantumFit {
        anchor,
        q1,
        p,
        phases,
        residual,
        objective: best.value,
        converged: best.converged,
        winning_start,
        evaluations,
        observed,
    })
}

/// Average split of probability into classical and interference parts over
/// random phase draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceSummary {
    pub draws: usize,
    pub mean_classical: f64,
    pub mean_interference: f64,
}

/// Sample `draws` homogeneous `K`-channel configurations (uniform attention,
/// channel probability `p`) with every phase drawn uniformly from `[0, 2 pi)`,
/// and average the decomposition over all `K` channels.
pub fn decoherence_profile(
    k: usize,
    p: f64,
    draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<DecoherenceSummary> {
    if k < 2 || draws == 0 {
        return Err(Error::Precondition(
            "need at least two channels and one draw".into(),
        ));
    }
    let q1 = 1.0 / k as f64;
    let active: Vec<usize> = (0..k).collect();
    let parts = exec.map_range(draws, |draw| -> Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, draw as u64));
        let phases: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..TAU)).collect();
        let params = QuantumParams::homogeneous(q1, p, &phases)?;
        let decomposition = decompose(&params, &active)?;
        Ok((
            decomposition.classical_part,
            decomposition.total_interference(),
        ))
    });
    let mut classical = 0.0;
    let mut interference = 0.0;
    for part in parts {
        let (c, i) = part?;
        classical += c;
        interference += i;
    }
    Ok(DecoherenceSummary {
        draws,
        mean_classical: classical / draws as f64,
        mean_interference: interference / draws as f64,
    })
}
