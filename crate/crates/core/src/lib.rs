//! Retweet-transfer pattern extraction and the classical and quantum
//! q-attention models of multi-channel information transfer.
//!
//! The pipeline runs corpus parsing ([`ingest`]), then instance assembly and
//! per-pattern probabilities ([`cascade`]), then model fitting ([`classical`],
//! [`quantum`]). [`simulator`] generates corpora with known ground truth.
//!
//! Data-parallel loops take an [`Execution`]; with the default `parallel`
//! feature they can run on rayon, otherwise everything is sequential. Seeded
//! results are identical either way.

pub mod cascade;
pub mod classical;
pub mod error;
pub mod exec;
pub mod ingest;
pub mod optimize;
pub mod quantum;
pub mod simulator;

pub use cascade::{
    aggregate_patterns, author_tweet_counts, build_instances, instance_probability,
    write_instances_csv, BuildCounters, InstanceSet, PatternRow, PatternStats, TransferInstance,
    DEFAULT_N_MAX,
};
pub use classical::{
    fit_classical, predict_classical, total_probability, ClassicalFit, ClassicalFitOptions,
    ClassicalParams,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use ingest::{
    extract_retweet_chain, parse_jsonl_stream, parse_snap_stream, parse_stream, ParseOutcome,
    RetweetChain, TweetRecord, WireFormat,
};
pub use quantum::{
    decoherence_profile, decompose, fit_quantum, interference_term, predict_quantum, probability,
    total_amplitude, two_channel_witness, Decomposition, QuantumFit, QuantumFitConfig,
    QuantumParams,
};
pub use simulator::{
    ground_truth, simulate_classical_world, simulate_sequence_world, GroundTruth, SequenceConfig,
    SimulationConfig, WorldConfig,
};
