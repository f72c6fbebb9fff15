//! Synthetic corpora with known retweeting probabilities.
//!
//! Every world is a star gadget: one source `A`, `n` channels `B_j` and one
//! receiver `C`. Worlds are generated independently, each from a generator
//! seeded by mixing the master seed with the world index, and concatenated in
//! world order, so output bytes depend on the seed alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::exec::{mix_seed, Execution};
use crate::ingest::{normalize_username, TweetRecord};

/// 2009-06-01 00:00:00 UTC.
const BASE_TIMESTAMP: i64 = 1_243_814_400;
const SECONDS_PER_SOURCE_TWEET: i64 = 60;
const MAX_REDRAWS: usize = 1_000;

fn default_prefix() -> String {
    "u".to_string()
}

fn default_worlds() -> usize {
    1
}

/// Independent-channel world: each of the source's tweets is relayed by
/// channel `j` with probability `relay[j]`, and each relay is re-retweeted by
/// the receiver with probability `reretweet[j]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    /// Number of independent worlds (sources).
    #[serde(default = "default_worlds")]
    pub worlds: usize,
    /// Handle prefix; world `w` uses `<prefix><w>a`, `<prefix><w>b<j>`, `<prefix><w>c`.
    #[serde(default = "default_prefix")]
    pub prefix: String,
    pub relay: Vec<f64>,
    pub reretweet: Vec<f64>,
    /// Original tweets per source, `M`.
    pub tweets_per_source: u64,
    #[serde(default)]
    pub seed: u64,
}

/// Expected retweeting probability of one classical world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub n: usize,
    /// `sum_j relay_j * reretweet_j`.
    pub expected_probability: f64,
    /// Expected value after the downstream clamp at 1.
    pub observable: f64,
    /// Standard deviation of one world's ratio over `M` tweets.
    pub instance_std_error: f64,
    /// Standard error of the mean over all worlds.
    pub mean_std_error: f64,
}

fn check_unit(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(Error::Config(format!(
            "{name}[{i}] = {} is outside [0, 1]",
            values[i]
        ))),
        None => Ok(()),
    }
}

fn check_names(prefix: &str, last_world: usize, channels: usize) -> Result<()> {
    for name in [
        format!("{prefix}{last_world}a"),
        format!("{prefix}{last_world}b{channels}"),
    ] {
        normalize_username(&name).map_err(|_| {
            Error::Config(format!("generated handle {name:?} is not a valid username"))
        })?;
    }
    Ok(())
}

struct Gadget {
    source: String,
    receiver: String,
    channels: Vec<String>,
}

impl Gadget {
    fn new(prefix: &str, world: usize, n: usize) -> Self {
        Self {
            source: format!("{prefix}{world}a"),
            receiver: format!("{prefix}{world}c"),
            channels: (1..=n).map(|j| format!("{prefix}{world}b{j}")).collect(),
        }
    }

    fn original(&self, tweet: u64) -> TweetRecord {
        record(&self.source, tweet, 0, format!("post {tweet}"))
    }

    fn relay(&self, tweet: u64, channel: usize) -> TweetRecord {
        record(
            &self.channels[channel],
            tweet,
            1,
            format!("RT @{}: post {tweet}", self.source),
        )
    }

    fn reretweet(&self, tweet: u64, channel: usize) -> TweetRecord {
        record(
            &self.receiver,
            tweet,
            2,
            format!(
                "RT @{}: RT @{}: post {tweet}",
                self.channels[channel], self.source
            ),
        )
    }
}

fn record(author: &str, tweet: u64, offset: i64, text: String) -> TweetRecord {
    let timestamp = BASE_TIMESTAMP + tweet as i64 * SECONDS_PER_SOURCE_TWEET + offset;
    TweetRecord::new(author, timestamp, &text).expect("generated handles are validated up front")
}

impl WorldConfig {
    pub fn channels(&self) -> usize {
        self.relay.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.relay.is_empty() {
            return Err(Error::Config(
                "relay must list at least one channel (n >= 1)".into(),
            ));
        }
        if self.relay.len() != self.reretweet.len() {
            return Err(Error::Config(format!(
                "relay has {} entries but reretweet has {}",
                self.relay.len(),
                self.reretweet.len()
            )));
        }
        check_unit("relay", &self.relay)?;
        check_unit("reretweet", &self.reretweet)?;
        if self.tweets_per_source == 0 {
            return Err(Error::Config("tweets_per_source must be at least 1".into()));
        }
        if self.worlds == 0 {
            return Err(Error::Config("worlds must be at least 1".into()));
        }
        check_names(&self.prefix, self.worlds - 1, self.channels())
    }
}

/// Expected instance probability of a classical world.
///
/// A tweet relayed and re-retweeted through two channels yields two receiver
/// tweets, both counted, so the expectation is a plain sum over channels.
pub fn ground_truth(config: &WorldConfig) -> GroundTruth {
    let per_channel: Vec<f64> = config
        .relay
        .iter()
        .zip(&config.reretweet)
        .map(|(r, c)| r * c)
        .collect();
    let expected: f64 = per_channel.iter().sum();
    let variance: f64 = per_channel.iter().map(|v| v * (1.0 - v)).sum();
    let m = config.tweets_per_source.max(1) as f64;
    let instance_std_error = (variance / m).sqrt();
    GroundTruth {
        n: config.channels(),
        expected_probability: expected,
        observable: expected.min(1.0),
        instance_std_error,
        mean_std_error: instance_std_error / (config.worlds.max(1) as f64).sqrt(),
    }
}

/// Emit the corpus of every classical world in world order.
pub fn simulate_classical_world(config: &WorldConfig, exec: Execution) -> Result<Vec<TweetRecord>> {
    config.validate()?;
    let n = config.channels();
    let worlds = exec.map_range(config.worlds, |world| {
        let gadget = Gadget::new(&config.prefix, world, n);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, world as u64));
        let mut out = Vec::new();
        let mut reretweets = Vec::with_capacity(n);
        for tweet in 0..config.tweets_per_source {
            out.push(gadget.original(tweet));
            reretweets.clear();
            for j in 0..n {
                if rng.random_bool(config.relay[j]) {
                    out.push(gadget.relay(tweet, j));
                    if rng.random_bool(config.reretweet[j]) {
                        reretweets.push(j);
                    }
                }
            }
            out.extend(reretweets.iter().map(|&j| gadget.reretweet(tweet, j)));
        }
        out
    });
    Ok(worlds.into_iter().flatten().collect())
}

/// World set whose n-channel pattern means track `targets[n - 1]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub targets: Vec<f64>,
    pub instances_per_pattern: usize,
    /// Original tweets per source, `M`.
    pub tweets_per_source: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::Config(
                "targets must list at least one pattern".into(),
            ));
        }
        check_unit("targets", &self.targets)?;
        if self.instances_per_pattern == 0 {
            return Err(Error::Config(
                "instances_per_pattern must be at least 1".into(),
            ));
        }
        if self.tweets_per_source == 0 {
            return Err(Error::Config("tweets_per_source must be at least 1".into()));
        }
        for (i, &target) in self.targets.iter().enumerate() {
            let n = i + 1;
            let expected = target * self.tweets_per_source as f64;
            if expected < n as f64 {
                return Err(Error::Precondition(format!(
                    "targets[{i}] * tweets_per_source = {expected} expected matches cannot cover {n} channels"
                )));
            }
        }
        let last = self.targets.len() * self.instances_per_pattern - 1;
        check_names(&self.prefix, last, self.targets.len())
    }
}

/// Emit one gadget per (pattern, instance). Each gadget's receiver matches a
/// Binomial(M, target) number of source tweets, spread over exactly `n`
/// channels: draws with fewer than `n` matches are redrawn, and channel
/// assignments that leave a channel empty are rejected and redrawn.
pub fn simulate_sequence_world(
    config: &SequenceConfig,
    exec: Execution,
) -> Result<Vec<TweetRecord>> {
    config.validate()?;
    let per = config.instances_per_pattern;
    let gadgets = config.targets.len() * per;
    let worlds = exec.map_range(gadgets, |index| -> Result<Vec<TweetRecord>> {
        let n = index / per + 1;
        let target = config.targets[n - 1];
        let gadget = Gadget::new(&config.prefix, index, n);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, index as u64));

        let mut hits = Vec::new();
        for attempt in 0..=MAX_REDRAWS {
            if attempt == MAX_REDRAWS {
                return Err(Error::Precondition(format!(
                    "pattern n={n}: fewer than {n} matches in {MAX_REDRAWS} draws"
                )));
            }
            hits.clear();
            hits.extend((0..config.tweets_per_source).filter(|_| rng.random_bool(target)));
            if hits.len() >= n {
                break;
            }
        }

        let mut assignment = vec![0usize; hits.len()];
        let mut covered = vec![false; n];
        let mut accepted = false;
        for _ in 0..MAX_REDRAWS {
            covered.fill(false);
            for slot in assignment.iter_mut() {
                *slot = rng.random_range(0..n);
                covered[*slot] = true;
            }
            if covered.iter().all(|&c| c) {
                accepted = true;
                break;
            }
        }
        if !accepted {
            // Rejection is hopeless only when matches barely exceed n.
            for (slot, channel) in assignment.iter_mut().zip(0..n) {
                *slot = channel;
            }
        }

        let mut out = Vec::with_capacity(config.tweets_per_source as usize + 2 * hits.len());
        let mut next_hit = hits.iter().zip(&assignment).peekable();
        for tweet in 0..config.tweets_per_source {
            out.push(gadget.original(tweet));
            if let Some((_, &channel)) = next_hit.next_if(|(&hit, _)| hit == tweet) {
                out.push(gadget.relay(tweet, channel));
                out.push(gadget.reretweet(tweet, channel));
            }
        }
        Ok(out)
    });
    let mut corpus = Vec::new();
    for world in worlds {
        corpus.extend(world?);
    }
    Ok(corpus)
}

/// Simulator input as read from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SimulationConfig {
    Classical(WorldConfig),
    Sequence(SequenceConfig),
}

impl SimulationConfig {
    /// Parse a flat TOML-style key-value document with a `mode` key.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let config: SimulationConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SimulationConfig::Classical(c) => c.validate(),
            SimulationConfig::Sequence(c) => c.validate(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            SimulationConfig::Classical(c) => c.seed,
            SimulationConfig::Sequence(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            SimulationConfig::Classical(c) => c.seed = seed,
            SimulationConfig::Sequence(c) => c.seed = seed,
        }
    }

    pub fn simulate(&self, exec: Execution) -> Result<Vec<TweetRecord>> {
        match self {
            SimulationConfig::Classical(c) => simulate_classical_world(c, exec),
            SimulationConfig::Sequence(c) => simulate_sequence_world(c, exec),
        }
    }

    /// Expected pattern mean per `n`.
    pub fn ground_truth_table(&self) -> Vec<(usize, f64)> {
        match self {
            SimulationConfig::Classical(c) => {
                let truth = ground_truth(c);
                vec![(truth.n, truth.observable)]
            }
            SimulationConfig::Sequence(c) => c
                .targets
                .iter()
                .enumerate()
                .map(|(i, &t)| (i + 1, t))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::extract_retweet_chain;

    fn world(relay: &[f64], reretweet: &[f64], m: u64) -> WorldConfig {
        WorldConfig {
            worlds: 1,
            prefix: "u".into(),
            relay: relay.to_vec(),
            reretweet: reretweet.to_vec(),
            tweets_per_source: m,
            seed: 11,
        }
    }

    #[test]
    fn ground_truth_examples() {
        assert!(
            (ground_truth(&world(&[0.2], &[0.25], 100)).expected_probability - 0.05).abs() < 1e-15
        );
        let two = ground_truth(&world(&[0.2, 0.2], &[0.25, 0.25], 100));
        assert!((two.expected_probability - 0.10).abs() < 1e-15);
        let saturated = ground_truth(&world(&[1.0, 1.0], &[1.0, 1.0], 100));
        assert_eq!(saturated.expected_probability, 2.0);
        assert_eq!(saturated.observable, 1.0);
    }

    #[test]
    fn minimal_world_emits_three_tweets() {
        let corpus =
            simulate_classical_world(&world(&[1.0], &[1.0], 1), Execution::Sequential).unwrap();
        let texts: Vec<_> = corpus.iter().map(|r| (r.author(), r.text())).collect();
        assert_eq!(
            texts,
            [
                ("u0a", "post 0"),
                ("u0b1", "RT @u0a: post 0"),
                ("u0c", "RT @u0b1: RT @u0a: post 0"),
            ]
        );
    }

    #[test]
    fn chains_are_recoverable() {
        let corpus =
            simulate_classical_world(&world(&[0.5, 0.5], &[0.5, 0.5], 200), Execution::Sequential)
                .unwrap();
        for record in &corpus {
            let chain = extract_retweet_chain(record.text());
            let expected = match record.author() {
                "u0a" => 0,
                "u0c" => 2,
                _ => 1,
            };
            assert_eq!(chain.len(), expected, "{record:?}");
        }
    }

    #[test]
    fn classical_validation_names_constraint() {
        let mut bad = world(&[1.2], &[0.5], 10);
        let err = bad.validate().unwrap_err().to_string();
        assert!(err.contains("relay[0]"), "{err}");
        bad.relay = vec![0.2, 0.2];
        assert!(bad
            .validate()
            .unwrap_err()
            .to_string()
            .contains("reretweet"));
        let mut long = world(&[0.2], &[0.2], 10);
        long.prefix = "averyveryverylongprefix".into();
        assert!(long.validate().is_err());
        assert!(world(&[0.2], &[0.2], 0).validate().is_err());
    }

    #[test]
    fn sequence_infeasible_guard() {
        let config = SequenceConfig {
            targets: vec![0.05, 0.001],
            instances_per_pattern: 1,
            tweets_per_source: 100,
            seed: 0,
            prefix: "s".into(),
        };
        assert!(matches!(
            simulate_sequence_world(&config, Execution::Sequential),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn sequence_gadgets_have_exact_channel_counts() {
        let config = SequenceConfig {
            targets: vec![0.05, 0.05, 0.06],
            instances_per_pattern: 5,
            tweets_per_source: 100,
            seed: 4,
            prefix: "s".into(),
        };
        let corpus = simulate_sequence_world(&config, Execution::Parallel).unwrap();
        let set = crate::cascade::build_instances(&corpus, 6, Execution::Sequential);
        assert_eq!(set.instances.len(), 15);
        for inst in &set.instances {
            let index: usize = inst.source[1..inst.source.len() - 1].parse().unwrap();
            assert_eq!(inst.n(), index / 5 + 1);
            assert_eq!(inst.source_tweet_count, 100);
        }
    }

    #[test]
    fn config_file_parsing() {
        let text = "mode = \"classical\"\nrelay = [0.2]\nreretweet = [0.25]\ntweets_per_source = 100\nseed = 5\n";
        let config = SimulationConfig::from_kv_str(text).unwrap();
        assert_eq!(config.seed(), 5);
        assert_eq!(config.ground_truth_table(), vec![(1, 0.05)]);

        let seq = "mode = \"sequence\"\ntargets = [0.05, 0.04]\ninstances_per_pattern = 3\ntweets_per_source = 1000\n";
        assert!(matches!(
            SimulationConfig::from_kv_str(seq).unwrap(),
            SimulationConfig::Sequence(_)
        ));

        let bad =
            "mode = \"classical\"\nrelay = [2.0]\nreretweet = [0.25]\ntweets_per_source = 100\n";
        assert!(SimulationConfig::from_kv_str(bad)
            .unwrap_err()
            .to_string()
            .contains("relay[0]"));
        assert!(SimulationConfig::from_kv_str("mode = \"other\"").is_err());
        assert!(SimulationConfig::from_kv_str(
            "mode = \"classical\"\nrelay=[0.1]\nreretweet=[0.1]\ntweets_per_source=1\ntypo=1"
        )
        .is_err());
    }
}
