//! Latent node discovery in covert social networks.
//!
//! The pipeline turns co-occurrence records (sets of persons seen together) into
//! a ranked list of records that most likely hide an unobserved person:
//!
//! 1. [`cluster`]: Jaccard similarity between persons and k-medoids clustering.
//! 2. [`rank`]: per-record scores measuring how strongly a record pulls in
//!    persons from several clusters, plus the gateway person per cluster.
//! 3. [`diagram`]: the resulting network diagram with red candidate nodes.
//!
//! [`simulate`] and [`eval`] form the test harness: records are generated by a
//! two-hop cascade over a known network, one person is deleted, and the ranking
//! is scored by precision, recall, F and F-gain.

pub mod cluster;
pub mod diagram;
pub mod error;
pub mod eval;
pub mod exec;
pub mod network;
pub mod rank;
pub mod records;
pub mod simulate;

pub use cluster::{k_medoids, Clustering, CooccurrenceIndex, KMedoidsOptions};
pub use diagram::{build_diagram, DiagramModel};
pub use error::{Error, Result};
pub use eval::{run_experiment, sweep, EvaluationCurve, ExperimentConfig};
pub use exec::ExecMode;
pub use network::{PersonId, SocialNetwork};
pub use rank::{rank_records, RankingFunction, RankingOutcome};
pub use records::{Basket, RecordSet};
pub use simulate::{generate_records, occlude, OcclusionResult, SimulationConfig};
