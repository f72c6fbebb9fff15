//! Transfer-instance assembly and empirical retweeting probabilities.
//!
//! An instance is keyed by the (source, receiver) pair over the whole corpus.
//! Its channels are every distinct first-hop relay seen in the receiver's
//! `RT @B: RT @A` tweets, and its probability is the count of those tweets
//! divided by the number of tweets the source posted.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::{extract_retweet_chain, TweetRecord};

/// Default channel cap: one- through six-channel patterns.
pub const DEFAULT_N_MAX: usize = 6;

/// Records per aggregation shard.
const SHARD_RECORDS: usize = 1 << 15;

/// One (source, receiver, channel set) triple with its counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferInstance {
    pub source: String,
    pub receiver: String,
    pub channels: BTreeSet<String>,
    /// Receiver tweets of the form `RT @B: RT @source` with `B` in `channels`.
    pub relayed_retweet_count: u64,
    /// Tweets authored by the source anywhere in the corpus.
    pub source_tweet_count: u64,
}

impl TransferInstance {
    /// Number of channels, `n`.
    pub fn n(&self) -> usize {
        self.channels.len()
    }
}

/// Empirical retweeting probability of one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceProbability {
    pub value: f64,
    /// Raw ratio exceeded one and was clamped.
    pub clamped: bool,
}

/// Relayed count over source count, clamped to 1.
pub fn instance_probability(instance: &TransferInstance) -> InstanceProbability {
    debug_assert!(instance.source_tweet_count > 0);
    let ratio = instance.relayed_retweet_count as f64 / instance.source_tweet_count as f64;
    if ratio > 1.0 {
        InstanceProbability {
            value: 1.0,
            clamped: true,
        }
    } else {
        InstanceProbability {
            value: ratio,
            clamped: false,
        }
    }
}

/// Exact per-author tweet totals. Retweets count as posted tweets.
pub fn author_tweet_counts(records: &[TweetRecord], exec: Execution) -> HashMap<String, u64> {
    let shards: Vec<&[TweetRecord]> = records.chunks(SHARD_RECORDS).collect();
    let partials = exec.map_slice(&shards, |shard| {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for record in *shard {
            *counts.entry(record.author().to_string()).or_default() += 1;
        }
        counts
    });
    let mut total: HashMap<String, u64> = HashMap::new();
    for partial in partials {
        for (author, count) in partial {
            *total.entry(author).or_default() += count;
        }
    }
    total
}

/// Diagnostics from [`build_instances`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BuildCounters {
    /// Tweets whose chain has at least two relays.
    pub two_hop_tweets: u64,
    /// Two-hop tweets dropped for a repeated identity among source, channel and receiver.
    pub excluded_tweets: u64,
    /// Distinct (source, receiver) groups formed.
    pub groups: u64,
    /// Groups dropped for exceeding `n_max` channels.
    pub dropped_over_n_max: u64,
    /// Groups dropped because the source posted nothing in the corpus.
    pub dropped_unknown_source: u64,
    /// Kept instances whose receiver also retweeted the source directly.
    pub direct_retweet_cooccurrence: u64,
}

impl BuildCounters {
    pub fn dropped(&self) -> u64 {
        self.dropped_over_n_max + self.dropped_unknown_source
    }
}

/// Instances sorted by (source, receiver) plus build counters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InstanceSet {
    pub instances: Vec<TransferInstance>,
    pub counters: BuildCounters,
}

#[derive(Default)]
struct Group {
    channels: BTreeSet<String>,
    relayed: u64,
}

#[derive(Default)]
struct ShardScan {
    groups: HashMap<(String, String), Group>,
    /// (source, receiver) pairs where the receiver retweeted the source directly.
    direct: BTreeSet<(String, String)>,
    two_hop: u64,
    excluded: u64,
}

fn scan_shard(records: &[TweetRecord]) -> ShardScan {
    let mut scan = ShardScan::default();
    for record in records {
        let chain = extract_retweet_chain(record.text());
        let relays = chain.relays();
        let receiver = record.author();
        if let Some(first) = relays.first() {
            scan.direct.insert((first.clone(), receiver.to_string()));
        }
        if relays.len() < 2 {
            continue;
        }
        scan.two_hop += 1;
        let (channel, source) = (&relays[0], &relays[1]);
        if source == receiver || channel == source || channel == receiver {
            scan.excluded += 1;
            continue;
        }
        let group = scan
            .groups
            .entry((source.clone(), receiver.to_string()))
            .or_default();
        group.channels.insert(channel.clone());
        group.relayed += 1;
    }
    scan
}

/// Assemble transfer instances from parsed records.
///
/// Only the first two hops of a chain are used: `RT @B: RT @A ...` posted by
/// `C` makes `B` a channel of the (A, C) instance. Groups with more than
/// `n_max` channels, or whose source has no tweets in the corpus, are dropped
/// and counted.
pub fn build_instances(records: &[TweetRecord], n_max: usize, exec: Execution) -> InstanceSet {
    let shards: Vec<&[TweetRecord]> = records.chunks(SHARD_RECORDS).collect();
    let scans = exec.map_slice(&shards, |shard| scan_shard(shard));
    let author_counts = author_tweet_counts(records, exec);

    let mut merged: BTreeMap<(String, String), Group> = BTreeMap::new();
    let mut direct: BTreeSet<(String, String)> = BTreeSet::new();
    let mut counters = BuildCounters::default();
    for scan in scans {
        counters.two_hop_tweets += scan.two_hop;
        counters.excluded_tweets += scan.excluded;
        direct.extend(scan.direct);
        for (key, group) in scan.groups {
            let slot = merged.entry(key).or_default();
            slot.channels.extend(group.channels);
            slot.relayed += group.relayed;
        }
    }

    counters.groups = merged.len() as u64;
    let mut instances = Vec::with_capacity(merged.len());
    for ((source, receiver), group) in merged {
        if group.channels.len() > n_max {
            counters.dropped_over_n_max += 1;
            continue;
        }
        let source_tweet_count = author_counts.get(&source).copied().unwrap_or(0);
        if source_tweet_count == 0 {
            counters.dropped_unknown_source += 1;
            continue;
        }
        if direct.contains(&(source.clone(), receiver.clone())) {
            counters.direct_retweet_cooccurrence += 1;
        }
        instances.push(TransferInstance {
            source,
            receiver,
            channels: group.channels,
            relayed_retweet_count: group.relayed,
            source_tweet_count,
        });
    }
    InstanceSet {
        instances,
        counters,
    }
}

/// Aggregate statistics for the n-channel pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    pub n: usize,
    pub instance_count: u64,
    /// Mean instance probability; absent when there are no instances.
    pub mean_probability: Option<f64>,
    /// Sample standard deviation over sqrt(count); absent below two instances.
    pub std_error: Option<f64>,
    /// Matching receiver tweets summed over the pattern's instances.
    #[serde(default)]
    pub raw_tweet_count: u64,
}

/// Per-pattern aggregates for n = 1..=n_max.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PatternStats {
    pub rows: Vec<PatternRow>,
    /// Instances whose probability was clamped to 1.
    pub clamped_instances: u64,
}

impl PatternStats {
    /// Stats carrying one instance per observed mean, for n = 1..=means.len().
    pub fn from_means(means: &[f64]) -> Self {
        Self {
            rows: means
                .iter()
                .enumerate()
                .map(|(i, &mean)| PatternRow {
                    n: i + 1,
                    instance_count: 1,
                    mean_probability: Some(mean),
                    std_error: None,
                    raw_tweet_count: 0,
                })
                .collect(),
            clamped_instances: 0,
        }
    }

    pub fn row(&self, n: usize) -> Option<&PatternRow> {
        self.rows.iter().find(|row| row.n == n)
    }

    /// (n, mean, instance count) for every pattern with data, ascending in n.
    pub fn populated(&self) -> Vec<(usize, f64, u64)> {
        let mut points: Vec<_> = self
            .rows
            .iter()
            .filter(|row| row.instance_count > 0)
            .filter_map(|row| row.mean_probability.map(|m| (row.n, m, row.instance_count)))
            .collect();
        points.sort_by_key(|p| p.0);
        points
    }

    pub fn total_instances(&self) -> u64 {
        self.rows.iter().map(|row| row.instance_count).sum()
    }

    /// Write `n,instance_count,mean_probability,std_error,raw_tweet_count`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        for row in &self.rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Read a stats table. Columns are matched by header name; the raw tweet
    /// count column is optional.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for row in csv.deserialize::<PatternRow>() {
            let row = row?;
            if row.n == 0 {
                return Err(Error::Table("pattern n must be at least 1".into()));
            }
            if let Some(mean) = row.mean_probability {
                if !(0.0..=1.0).contains(&mean) {
                    return Err(Error::Table(format!(
                        "mean_probability {mean} at n={} outside [0, 1]",
                        row.n
                    )));
                }
            }
            if rows.iter().any(|r: &PatternRow| r.n == row.n) {
                return Err(Error::Table(format!("duplicate row for n={}", row.n)));
            }
            rows.push(row);
        }
        rows.sort_by_key(|r| r.n);
        Ok(Self {
            rows,
            clamped_instances: 0,
        })
    }
}

/// Mean and standard error of instance probabilities for each n in 1..=n_max.
pub fn aggregate_patterns(instances: &[TransferInstance], n_max: usize) -> PatternStats {
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n_max];
    let mut raw = vec![0u64; n_max];
    let mut clamped_instances = 0;
    for instance in instances {
        let n = instance.n();
        if n == 0 || n > n_max {
            continue;
        }
        let probability = instance_probability(instance);
        clamped_instances += u64::from(probability.clamped);
        buckets[n - 1].push(probability.value);
        raw[n - 1] += instance.relayed_retweet_count;
    }
    let rows = buckets
        .iter()
        .zip(raw)
        .enumerate()
        .map(|(i, (values, raw_tweet_count))| {
            let count = values.len();
            let mean = (count > 0).then(|| values.iter().sum::<f64>() / count as f64);
            let std_error = match mean {
                Some(mean) if count >= 2 => {
                    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
                    Some((ss / (count - 1) as f64).sqrt() / (count as f64).sqrt())
                }
                _ => None,
            };
            PatternRow {
                n: i + 1,
                instance_count: count as u64,
                mean_probability: mean,
                std_error,
                raw_tweet_count,
            }
        })
        .collect();
    PatternStats {
        rows,
        clamped_instances,
    }
}

#[derive(Serialize)]
struct InstanceCsvRow<'a> {
    source: &'a str,
    receiver: &'a str,
    n: usize,
    relayed: u64,
    source_total: u64,
    probability: f64,
}

/// Write `source,receiver,n,relayed,source_total,probability`.
pub fn write_instances_csv<W: Write>(instances: &[TransferInstance], writer: W) -> Result<()> {
    let mut csv = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    csv.write_record([
        "source",
        "receiver",
        "n",
        "relayed",
        "source_total",
        "probability",
    ])?;
    for instance in instances {
        csv.serialize(InstanceCsvRow {
            source: &instance.source,
            receiver: &instance.receiver,
            n: instance.n(),
            relayed: instance.relayed_retweet_count,
            source_total: instance.source_tweet_count,
            probability: instance_probability(instance).value,
        })?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tweet(author: &str, text: &str) -> TweetRecord {
        TweetRecord::new(author, 0, text).unwrap()
    }

    fn originals(author: &str, count: usize) -> Vec<TweetRecord> {
        (0..count)
            .map(|i| tweet(author, &format!("post {i}")))
            .collect()
    }

    fn instance(relayed: u64, source: u64) -> TransferInstance {
        TransferInstance {
            source: "a".into(),
            receiver: "c".into(),
            channels: ["b".to_string()].into(),
            relayed_retweet_count: relayed,
            source_tweet_count: source,
        }
    }

    #[test]
    fn author_counts_fold_case() {
        let records = vec![
            tweet("Alice", "1"),
            tweet("alice", "2"),
            tweet("ALICE", "3"),
            tweet("bob", "4"),
        ];
        let counts = author_tweet_counts(&records, Execution::Sequential);
        assert_eq!(counts.len(), 2);
        assert_eq!(counts["alice"], 3);
        assert_eq!(counts["bob"], 1);
        assert!(author_tweet_counts(&[], Execution::Parallel).is_empty());
    }

    #[test]
    fn author_counts_simple_totals() {
        let mut records = originals("alice", 100);
        records.extend(originals("bob", 5));
        let counts = author_tweet_counts(&records, Execution::Parallel);
        assert_eq!(counts["alice"], 100);
        assert_eq!(counts["bob"], 5);
    }

    #[test]
    fn two_channel_instance() {
        let mut records = originals("a", 100);
        records.push(tweet("c", "RT @B1: RT @A: x"));
        records.push(tweet("c", "RT @B2: RT @A: y"));
        let set = build_instances(&records, DEFAULT_N_MAX, Execution::Sequential);
        assert_eq!(set.instances.len(), 1);
        let inst = &set.instances[0];
        assert_eq!(inst.source, "a");
        assert_eq!(inst.receiver, "c");
        assert_eq!(inst.channels, ["b1".to_string(), "b2".to_string()].into());
        assert_eq!(inst.relayed_retweet_count, 2);
        assert_eq!(inst.source_tweet_count, 100);
    }

    #[test]
    fn duplicate_texts_are_distinct_tweets() {
        let mut records = originals("a", 100);
        for _ in 0..5 {
            records.push(tweet("c", "RT @B1: RT @A"));
        }
        let set = build_instances(&records, DEFAULT_N_MAX, Execution::Sequential);
        assert_eq!(set.instances.len(), 1);
        assert_eq!(set.instances[0].n(), 1);
        assert_eq!(set.instances[0].relayed_retweet_count, 5);
        assert_eq!(set.instances[0].source_tweet_count, 100);
    }

    #[test]
    fn no_two_hop_chains_means_no_instances() {
        let records = vec![tweet("c", "RT @a: hi"), tweet("a", "hello")];
        let set = build_instances(&records, DEFAULT_N_MAX, Execution::Sequential);
        assert!(set.instances.is_empty());
        assert_eq!(set.counters.two_hop_tweets, 0);
    }

    #[test]
    fn identity_violations_are_excluded() {
        let mut records = originals("a", 10);
        records.push(tweet("a", "RT @b: RT @a: self loop"));
        records.push(tweet("c", "RT @a: RT @a: channel is source"));
        records.push(tweet("c", "RT @c: RT @a: channel is receiver"));
        let set = build_instances(&records, DEFAULT_N_MAX, Execution::Sequential);
        assert!(set.instances.is_empty());
        assert_eq!(set.counters.excluded_tweets, 3);
    }

    #[test]
    fn drops_are_counted() {
        let mut records = originals("a", 10);
        for j in 0..3 {
            records.push(tweet("c", &format!("RT @b{j}: RT @a: x")));
        }
        // source "ghost" never posts
        records.push(tweet("c", "RT @b0: RT @ghost: x"));
        let set = build_instances(&records, 2, Execution::Sequential);
        assert!(set.instances.is_empty());
        assert_eq!(set.counters.groups, 2);
        assert_eq!(set.counters.dropped_over_n_max, 1);
        assert_eq!(set.counters.dropped_unknown_source, 1);
    }

    #[test]
    fn direct_retweets_are_diagnostic_only() {
        let mut records = originals("a", 10);
        records.push(tweet("c", "RT @b: RT @a: x"));
        records.push(tweet("c", "RT @a: direct"));
        let set = build_instances(&records, DEFAULT_N_MAX, Execution::Sequential);
        assert_eq!(set.instances[0].relayed_retweet_count, 1);
        assert_eq!(set.counters.direct_retweet_cooccurrence, 1);
    }

    #[test]
    fn deeper_chains_use_first_two_hops() {
        let mut records = originals("a", 4);
        records.push(tweet("c", "RT @b: RT @a: RT @z: deep"));
        let set = build_instances(&records, DEFAULT_N_MAX, Execution::Sequential);
        assert_eq!(set.instances.len(), 1);
        assert_eq!(set.instances[0].source, "a");
    }

    #[test]
    fn worked_probabilities() {
        assert_eq!(instance_probability(&instance(5, 100)).value, 0.05);
        assert_eq!(instance_probability(&instance(20, 100)).value, 0.2);
        let clamped = instance_probability(&instance(7, 5));
        assert_eq!(clamped.value, 1.0);
        assert!(clamped.clamped);
    }

    #[test]
    fn aggregate_two_instances() {
        let mut a = instance(1, 10);
        let mut b = instance(3, 10);
        a.receiver = "c1".into();
        b.receiver = "c2".into();
        let stats = aggregate_patterns(&[a, b], 3);
        let row = stats.row(1).unwrap();
        assert_eq!(row.instance_count, 2);
        assert!((row.mean_probability.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(stats.row(2).unwrap().instance_count, 0);
        assert_eq!(stats.row(2).unwrap().mean_probability, None);
    }

    #[test]
    fn aggregate_empty() {
        let stats = aggregate_patterns(&[], DEFAULT_N_MAX);
        assert_eq!(stats.rows.len(), DEFAULT_N_MAX);
        assert!(stats.rows.iter().all(|r| r.instance_count == 0));
        assert!(stats.populated().is_empty());
    }

    #[test]
    fn csv_round_trip_keeps_empty_cells() {
        let stats = aggregate_patterns(&[instance(3, 10)], 2);
        let mut buf = Vec::new();
        stats.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "n,instance_count,mean_probability,std_error,raw_tweet_count\n1,1,0.3,,3\n2,0,,,0\n"
        );
        let back = PatternStats::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows, stats.rows);
    }

    #[test]
    fn csv_without_raw_column_is_accepted() {
        let text = "n,instance_count,mean_probability,std_error\n1,3,0.05,0.01\n2,2,0.04,\n";
        let stats = PatternStats::read_csv(text.as_bytes()).unwrap();
        assert_eq!(stats.populated(), vec![(1, 0.05, 3), (2, 0.04, 2)]);
    }

    #[test]
    fn csv_rejects_bad_tables() {
        assert!(PatternStats::read_csv("n,instance_count\nx,1\n".as_bytes()).is_err());
        let out_of_range = "n,instance_count,mean_probability,std_error\n1,1,1.5,\n";
        assert!(PatternStats::read_csv(out_of_range.as_bytes()).is_err());
        let dup = "n,instance_count,mean_probability,std_error\n1,1,0.1,\n1,1,0.1,\n";
        assert!(PatternStats::read_csv(dup.as_bytes()).is_err());
    }

    #[test]
    fn instance_csv_columns() {
        let mut buf = Vec::new();
        write_instances_csv(&[instance(5, 100)], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "source,receiver,n,relayed,source_total,probability\na,c,1,5,100,0.05\n"
        );
    }
}
