//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line; run with
//! `cargo test -p qtransfer --test acceptance -- --nocapture --test-threads 1`
//! to see them in order.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qtransfer::ingest::write_records;
use qtransfer::{
    aggregate_patterns, build_instances, decoherence_profile, decompose, fit_classical,
    fit_quantum, ground_truth, instance_probability, predict_quantum, probability,
    simulate_classical_world, simulate_sequence_world, two_channel_witness, ClassicalFit,
    ClassicalFitOptions, Execution, PatternStats, QuantumFitConfig, QuantumParams, SequenceConfig,
    TransferInstance, TweetRecord, WireFormat, WorldConfig,
};

fn verdict(
    id: u32,
    name: &str,
    passed: bool,
    elapsed: Duration,
    limit: Option<Duration>,
    detail: String,
) {
    let in_time = limit.is_none_or(|l| elapsed < l);
    let ok = passed && in_time;
    let budget = limit
        .map(|l| format!(" (limit {:.0?})", l))
        .unwrap_or_default();
    println!(
        "[{}] criterion {id}: {name} | {detail} | {:.2?}{budget}",
        if ok { "PASS" } else { "FAIL" },
        elapsed
    );
    assert!(passed, "criterion {id} failed: {detail}");
    assert!(
        in_time,
        "criterion {id} exceeded its runtime limit: {elapsed:?}"
    );
}

#[test]
fn criterion_1_decomposition_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xDEC0);
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for _ in 0..1_000 {
        let k = rng.random_range(1..=6);
        let params = QuantumParams::random(k, &mut rng);
        for n in 1..=k {
            let active: Vec<usize> = (0..n).collect();
            let direct = probability(&params, &active).unwrap().value;
            let parts = decompose(&params, &active).unwrap();
            worst = worst.max((direct - parts.probability()).abs());
            checks += 1;
        }
    }
    verdict(
        1,
        "decomposition identity",
        worst < 1e-12,
        start.elapsed(),
        Some(Duration::from_secs(5)),
        format!("{checks} nested sets, max |P - (classical + sum Int)| = {worst:.3e} < 1e-12"),
    );
}

#[test]
fn criterion_2_classical_monotonicity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1A5);
    let mut violations = 0;
    for _ in 0..1_000 {
        let len = rng.random_range(2..=8);
        let means: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
        let fit: ClassicalFit = fit_classical(
            &PatternStats::from_means(&means),
            ClassicalFitOptions::default(),
        )
        .unwrap();
        let plateau = fit.predict(fit.n_max_fitted);
        for n in 1..fit.n_max_fitted + 10 {
            if fit.predict(n + 1) < fit.predict(n) {
                violations += 1;
            }
            if n >= fit.n_max_fitted && fit.predict(n) != plateau {
                violations += 1;
            }
        }
    }
    verdict(
        2,
        "classical monotonicity",
        violations == 0,
        start.elapsed(),
        Some(Duration::from_secs(1)),
        format!("1000 random fits, {violations} decreases or plateau breaks"),
    );
}

fn ulp_distance(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

#[test]
fn criterion_3_drop_reproducibility_gap() {
    let start = Instant::now();
    let stats = PatternStats::from_means(&[0.05, 0.04]);
    let classical = fit_classical(&stats, ClassicalFitOptions::default()).unwrap();
    let (q1, p, theta) = two_channel_witness(0.05, 0.04).unwrap();
    let witness_p2 = QuantumParams::homogeneous(q1, p, &[0.0, theta])
        .and_then(|params| probability(&params, &[0, 1]))
        .unwrap()
        .value;
    let quantum = fit_quantum(&stats, &QuantumFitConfig::default()).unwrap();

    let classical_ok = classical.slope == 0.0 && ulp_distance(classical.residual, 1e-4) <= 4;
    let witness_ok = theta == std::f64::consts::PI && (witness_p2 - 0.04).abs() < 1e-12;
    let quantum_ok = quantum.residual < 1e-8 && (quantum.q1 * quantum.p - 0.05).abs() < 1e-9;
    verdict(
        3,
        "drop reproducibility gap",
        classical_ok && witness_ok && quantum_ok,
        start.elapsed(),
        Some(Duration::from_secs(10)),
        format!(
            "classical slope {} residual {:e}; witness theta {theta:.6} P(2) {witness_p2:.12}; quantum residual {:.3e}",
            classical.slope, classical.residual, quantum.residual
        ),
    );
}

#[test]
fn criterion_4_worked_examples() {
    let start = Instant::now();
    let direct = TransferInstance {
        source: "a".into(),
        receiver: "b".into(),
        channels: ["x".to_string()].into(),
        relayed_retweet_count: 20,
        source_tweet_count: 100,
    };
    let one_hop = instance_probability(&direct).value;

    // A posts 100, B relays 20 of them, C re-retweets 5 of those.
    let mut corpus: Vec<TweetRecord> = (0..100)
        .map(|i| TweetRecord::new("a", i, &format!("tweet {i}")).unwrap())
        .collect();
    corpus.extend((0..20).map(|i| TweetRecord::new("b", i, &format!("RT @a: tweet {i}")).unwrap()));
    corpus.extend(
        (0..5).map(|i| TweetRecord::new("c", i, &format!("RT @b: RT @a: tweet {i}")).unwrap()),
    );
    let set = build_instances(&corpus, 6, Execution::Sequential);
    let two_hop = instance_probability(&set.instances[0]).value;

    verdict(
        4,
        "worked-example agreement",
        one_hop == 0.2 && two_hop == 0.05 && set.instances.len() == 1,
        start.elapsed(),
        None,
        format!("20/100 -> {one_hop}, 5/100 -> {two_hop}"),
    );
}

#[test]
fn criterion_5_pipeline_round_trip() {
    let start = Instant::now();
    let config = WorldConfig {
        worlds: 1,
        prefix: "u".into(),
        relay: vec![0.2, 0.2],
        reretweet: vec![0.25, 0.25],
        tweets_per_source: 100_000,
        seed: 20_091_201,
    };
    let truth = ground_truth(&config);
    let corpus = simulate_classical_world(&config, Execution::Parallel).unwrap();
    let mut bytes = Vec::new();
    write_records(WireFormat::Snap, &mut bytes, &corpus).unwrap();
    let parsed = qtransfer::parse_snap_stream(bytes.as_slice(), Execution::Parallel).unwrap();
    let set = build_instances(&parsed.records, 6, Execution::Parallel);
    let stats = aggregate_patterns(&set.instances, 6);
    let p2 = stats
        .row(2)
        .and_then(|r| r.mean_probability)
        .unwrap_or(f64::NAN);
    let sigma = truth.mean_std_error;
    verdict(
        5,
        "pipeline round-trip",
        parsed.malformed == 0 && (p2 - 0.10).abs() < 3.0 * sigma,
        start.elapsed(),
        Some(Duration::from_secs(60)),
        format!(
            "recovered P(2) = {p2:.5}, |P(2) - 0.10| = {:.2e} < 3 sigma = {:.2e}",
            (p2 - 0.10).abs(),
            3.0 * sigma
        ),
    );
}

#[test]
fn criterion_6_two_drop_shape_reproduction() {
    let start = Instant::now();
    // drops at 1->2 and 5->6
    let targets = vec![0.08, 0.05, 0.06, 0.07, 0.08, 0.065];
    let config = SequenceConfig {
        targets: targets.clone(),
        instances_per_pattern: 60,
        tweets_per_source: 2_000,
        seed: 46,
        prefix: "f".into(),
    };
    let corpus = simulate_sequence_world(&config, Execution::Parallel).unwrap();
    let set = build_instances(&corpus, 6, Execution::Parallel);
    let stats = aggregate_patterns(&set.instances, 6);
    let mean = |n: usize| stats.row(n).unwrap().mean_probability.unwrap();
    let se = |n: usize| stats.row(n).unwrap().std_error.unwrap();
    let drop_sigma =
        |n: usize| (mean(n) - mean(n + 1)) / (se(n).powi(2) + se(n + 1).powi(2)).sqrt();
    let data_ok = drop_sigma(1) > 3.0 && drop_sigma(5) > 3.0;

    let quantum = fit_quantum(&stats, &QuantumFitConfig::default()).unwrap();
    let q = |n: usize| predict_quantum(&quantum, n).unwrap().value;
    let quantum_ok = q(2) < q(1) && q(6) < q(5);

    let classical = fit_classical(&stats, ClassicalFitOptions::default()).unwrap();
    let classical_ok = (1..6).all(|n| classical.predict(n + 1) - classical.predict(n) >= 0.0);

    verdict(
        6,
        "two-drop shape reproduction",
        data_ok && quantum_ok && classical_ok,
        start.elapsed(),
        Some(Duration::from_secs(120)),
        format!(
            "observed drops {:.1} and {:.1} sigma; quantum P(1..6) = [{}] residual {:.2e}; classical slope {:.4}",
            drop_sigma(1),
            drop_sigma(5),
            (1..=6).map(|n| format!("{:.4}", q(n))).collect::<Vec<_>>().join(", "),
            quantum.residual,
            classical.slope
        ),
    );
}

#[test]
fn criterion_7_decoherence() {
    let start = Instant::now();
    let summary = decoherence_profile(6, 0.5, 10_000, 0x5EED, Execution::Parallel).unwrap();
    let ratio = summary.mean_interference.abs() / summary.mean_classical;
    verdict(
        7,
        "decoherence",
        ratio < 0.05,
        start.elapsed(),
        Some(Duration::from_secs(10)),
        format!(
            "mean sum Int = {:.3e}, mean classical = {:.4}, ratio {ratio:.4} < 0.05",
            summary.mean_interference, summary.mean_classical
        ),
    );
}

fn seeded_outputs(exec: Execution) -> Vec<Vec<u8>> {
    let classical = WorldConfig {
        worlds: 8,
        prefix: "d".into(),
        relay: vec![0.3, 0.2],
        reretweet: vec![0.2, 0.4],
        tweets_per_source: 1_000,
        seed: 5,
    };
    let sequence = SequenceConfig {
        targets: vec![0.08, 0.05, 0.06],
        instances_per_pattern: 8,
        tweets_per_source: 500,
        seed: 6,
        prefix: "e".into(),
    };
    let mut outputs = Vec::new();
    for corpus in [
        simulate_classical_world(&classical, exec).unwrap(),
        simulate_sequence_world(&sequence, exec).unwrap(),
    ] {
        for format in [WireFormat::Snap, WireFormat::Jsonl] {
            let mut bytes = Vec::new();
            write_records(format, &mut bytes, &corpus).unwrap();
            outputs.push(bytes);
        }
    }
    let fit = fit_quantum(
        &PatternStats::from_means(&[0.08, 0.05, 0.06, 0.07]),
        &QuantumFitConfig {
            execution: exec,
            seed: 12,
            ..Default::default()
        },
    )
    .unwrap();
    outputs.push(format!("{fit:?}").into_bytes());
    outputs.push(fit.report().into_bytes());
    let deco = decoherence_profile(6, 0.5, 2_000, 7, exec).unwrap();
    outputs.push(format!("{deco:?}").into_bytes());
    outputs
}

#[test]
fn criterion_8_determinism() {
    let start = Instant::now();
    let reference = seeded_outputs(Execution::Sequential);
    let runs = {
        #[allow(unused_mut)]
        let mut runs = vec![
            seeded_outputs(Execution::Sequential),
            seeded_outputs(Execution::Parallel),
        ];
        #[cfg(feature = "parallel")]
        for threads in [1, 2, 5] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            runs.push(pool.install(|| seeded_outputs(Execution::Parallel)));
        }
        runs
    };
    let identical = runs.iter().all(|run| *run == reference);
    verdict(
        8,
        "determinism",
        identical,
        start.elapsed(),
        None,
        format!(
            "{} runs x {} seeded outputs byte-identical",
            runs.len() + 1,
            reference.len()
        ),
    );
}
