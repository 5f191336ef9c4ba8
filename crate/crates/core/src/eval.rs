//! Retrieval metrics (precision, recall, F, F-gain) and the experiment runner:
//! simulate → occlude → cluster → rank → score, repeated over seeded trials.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cluster::{self, CooccurrenceIndex, KMedoidsOptions};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::network::{PersonId, SocialNetwork};
use crate::rank::{rank_records_with, RankingFunction, RankingOutcome};
use crate::simulate::{child_seed, generate_records_with, occlude, SimulationConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Give up on a trial after this many simulations that never reach the target.
const MAX_ATTEMPTS: u32 = 1000;

/// Precision and recall of the top `m_ret` records of `outcome`.
pub fn precision_recall(
    outcome: &RankingOutcome,
    altered: &[bool],
    m_ret: usize,
) -> Result<(f64, f64)> {
    let relevant = altered.iter().filter(|&&a| a).count();
    if relevant == 0 {
        return Err(Error::NoRelevant);
    }
    if m_ret == 0 || m_ret > outcome.order.len() {
        return Err(Error::invalid(
            "m_ret",
            format!("must be in 1..={}", outcome.order.len()),
        ));
    }
    let hits = outcome.order[..m_ret]
        .iter()
        .filter(|&&i| altered[i])
        .count();
    Ok((hits as f64 / m_ret as f64, hits as f64 / relevant as f64))
}

/// Harmonic mean `2pr / (p + r)`; 0 when both are 0.
pub fn f_value(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Expected F of a uniformly random ordering.
///
/// `retrievable` relevant records sit among `basket_total`, out of
/// `relevant_total` relevant overall (records emptied by occlusion can never
/// be retrieved).
pub fn random_retrieval_f(
    m_ret: usize,
    retrievable: usize,
    relevant_total: usize,
    basket_total: usize,
) -> f64 {
    let p = retrievable as f64 / basket_total as f64;
    let r = (m_ret as f64 / basket_total as f64) * (retrievable as f64 / relevant_total as f64);
    f_value(p, r)
}

/// `f / F_rd`, with `F_rd = f_value(R/|b|, m_ret/|b|)`.
pub fn f_gain(f: f64, m_ret: usize, relevant: usize, basket_total: usize) -> Result<f64> {
    if relevant == 0 {
        return Err(Error::NoRelevant);
    }
    if basket_total == 0 || m_ret > basket_total || relevant > basket_total {
        return Err(Error::invalid(
            "m_ret",
            "counts exceed the number of baskets",
        ));
    }
    let baseline = random_retrieval_f(m_ret, relevant, relevant, basket_total);
    if baseline == 0.0 {
        return Err(Error::ZeroBaselineF);
    }
    Ok(f / baseline)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub m_ret: usize,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    /// Absent where the random baseline F is 0.
    pub f_gain: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationCurve {
    pub points: Vec<CurvePoint>,
    /// Relevant records, including unretrievable ones.
    pub relevant_count: usize,
    pub basket_total: usize,
    /// Relevant records removed by occlusion (only the target was in them).
    pub unretrievable: usize,
}

impl EvaluationCurve {
    /// Full curve for `m_ret = 1..=|order|`.
    pub fn compute(
        outcome: &RankingOutcome,
        altered: &[bool],
        unretrievable: usize,
    ) -> Result<Self> {
        let total = outcome.order.len();
        let retrievable = altered.iter().filter(|&&a| a).count();
        let relevant = retrievable + unretrievable;
        if relevant == 0 {
            return Err(Error::NoRelevant);
        }
        let mut hits = 0usize;
        let points = outcome
            .order
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                let m_ret = i + 1;
                hits += usize::from(altered[b]);
                let precision = hits as f64 / m_ret as f64;
                let recall = hits as f64 / relevant as f64;
                let f = f_value(precision, recall);
                let baseline = random_retrieval_f(m_ret, retrievable, relevant, total);
                CurvePoint {
                    m_ret,
                    precision,
                    recall,
                    f,
                    f_gain: (baseline > 0.0).then(|| f / baseline),
                }
            })
            .collect();
        Ok(EvaluationCurve {
            points,
            relevant_count: relevant,
            basket_total: total,
            unretrievable,
        })
    }

    /// Point at `m_ret` (1-based).
    pub fn at(&self, m_ret: usize) -> &CurvePoint {
        &self.points[m_ret - 1]
    }

    /// Points with `lo ≤ m_ret/|b| ≤ hi`.
    pub fn fraction_range(&self, lo: f64, hi: f64) -> impl Iterator<Item = &CurvePoint> {
        let total = self.basket_total as f64;
        self.points.iter().filter(move |p| {
            let x = p.m_ret as f64 / total;
            x >= lo && x <= hi
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Source label echoed into outputs, e.g. `builtin:911`.
    pub network: String,
    pub target: PersonId,
    pub t: f64,
    pub basket_count: usize,
    pub k: usize,
    pub ranking_fn: RankingFunction,
    pub trials: usize,
    pub base_seed: u64,
    pub restarts: usize,
    #[serde(default)]
    pub seeded_medoids: Vec<PersonId>,
}

impl ExperimentConfig {
    /// The headline setting: 370 records, t = 0.8, 4 clusters, sd ranking.
    pub fn headline(target: PersonId) -> Self {
        ExperimentConfig {
            network: "builtin:911".into(),
            target,
            t: 0.8,
            basket_count: 370,
            k: 4,
            ranking_fn: RankingFunction::Sd,
            trials: 50,
            base_seed: 2008,
            restarts: 10,
            seeded_medoids: Vec::new(),
        }
    }

    pub fn validate(&self, net: &SocialNetwork) -> Result<()> {
        if !net.contains(&self.target) {
            return Err(Error::invalid(
                "target",
                format!("`{}` is not in the network", self.target),
            ));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be positive"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k", "must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts", "must be positive"));
        }
        SimulationConfig {
            t: self.t,
            basket_count: self.basket_count,
            rng_seed: 0,
        }
        .validate()
    }

    /// Seed of trial `trial`, attempt `attempt`.
    pub fn trial_seed(&self, trial: usize, attempt: u32) -> u64 {
        child_seed(self.base_seed, (u64::from(attempt) << 32) | trial as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub medoids: Vec<PersonId>,
    pub sizes: Vec<usize>,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    /// Simulations discarded because the target was never reached.
    pub reruns: u32,
    pub mean_basket_size: f64,
    pub clustering: ClusteringSummary,
    pub curve: EvaluationCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    /// How the F-gain denominator was computed.
    pub baseline: String,
    pub trials: Vec<TrialResult>,
}

impl ExperimentResult {
    pub fn curves(&self) -> Vec<&EvaluationCurve> {
        self.trials.iter().map(|t| &t.curve).collect()
    }

    pub fn aggregate(&self) -> AggregateCurve {
        AggregateCurve::from_curves(&self.curves())
    }

    pub fn mean_basket_size(&self) -> f64 {
        self.trials.iter().map(|t| t.mean_basket_size).sum::<f64>() / self.trials.len() as f64
    }

    pub fn total_reruns(&self) -> u32 {
        self.trials.iter().map(|t| t.reruns).sum()
    }
}

fn run_trial(
    net: &SocialNetwork,
    cfg: &ExperimentConfig,
    trial: usize,
    inner: ExecMode,
) -> Result<TrialResult> {
    for attempt in 0..MAX_ATTEMPTS {
        let seed = cfg.trial_seed(trial, attempt);
        let sim = SimulationConfig {
            t: cfg.t,
            basket_count: cfg.basket_count,
            rng_seed: child_seed(seed, 0),
        };
        let records = generate_records_with(net, &sim, inner)?;
        let occluded = match occlude(&records, &cfg.target) {
            Ok(o) => o,
            Err(Error::TargetAbsent { .. }) => continue,
            Err(e) => return Err(e),
        };
        if occluded.occluded.is_empty() {
            return Err(Error::EmptyRecords);
        }
        let idx = CooccurrenceIndex::new(&occluded.occluded);
        let opts = KMedoidsOptions {
            restarts: cfg.restarts,
            exec: inner,
            ..Default::default()
        };
        let clustering =
            cluster::k_medoids_with(&idx, cfg.k, child_seed(seed, 1), &cfg.seeded_medoids, &opts)?;
        let outcome = rank_records_with(&occluded.occluded, &clustering, cfg.ranking_fn, inner)?;
        let curve = EvaluationCurve::compute(&outcome, &occluded.altered, occluded.emptied.len())?;
        return Ok(TrialResult {
            trial,
            seed,
            reruns: attempt,
            mean_basket_size: records.mean_basket_size(),
            clustering: ClusteringSummary {
                sizes: clustering.clusters().iter().map(Vec::len).collect(),
                objective: cluster::total_objective(&idx, &clustering)?,
                medoids: clustering.medoids,
            },
            curve,
        });
    }
    Err(Error::TargetNeverReached {
        target: cfg.target.to_string(),
        attempts: MAX_ATTEMPTS,
    })
}

pub fn run_experiment(net: &SocialNetwork, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with(net, cfg, ExecMode::default())
}

/// Runs every trial; trials fan out under `mode`, each trial runs serially inside.
pub fn run_experiment_with(
    net: &SocialNetwork,
    cfg: &ExperimentConfig,
    mode: ExecMode,
) -> Result<ExperimentResult> {
    cfg.validate(net)?;
    let inner = if mode.is_parallel() {
        ExecMode::Serial
    } else {
        mode
    };
    let trials = mode
        .map_indexed(cfg.trials, |i| run_trial(net, cfg, i, inner))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        baseline: "expected precision/recall of a uniformly random ordering".into(),
        trials,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Mean and population standard deviation; `None` for no values.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(MeanSd {
            mean,
            sd: var.sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub m_ret: usize,
    pub precision: MeanSd,
    pub recall: MeanSd,
    pub f: MeanSd,
    pub f_gain: Option<MeanSd>,
}

/// Per-`m_ret` mean ± population sd across trials, up to the shortest curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub trials: usize,
    pub rows: Vec<AggregateRow>,
}

pub const CSV_HEADER: &str =
    "m_ret,precision_mean,precision_sd,recall_mean,recall_sd,f_mean,f_sd,fgain_mean,fgain_sd";

impl AggregateCurve {
    pub fn from_curves(curves: &[&EvaluationCurve]) -> Self {
        let len = curves.iter().map(|c| c.points.len()).min().unwrap_or(0);
        let rows = (0..len)
            .map(|i| {
                let column = |f: fn(&CurvePoint) -> f64| -> MeanSd {
                    let v: Vec<f64> = curves.iter().map(|c| f(&c.points[i])).collect();
                    MeanSd::of(&v).unwrap_or_default()
                };
                let gains: Vec<f64> = curves.iter().filter_map(|c| c.points[i].f_gain).collect();
                AggregateRow {
                    m_ret: i + 1,
                    precision: column(|p| p.precision),
                    recall: column(|p| p.recall),
                    f: column(|p| p.f),
                    f_gain: MeanSd::of(&gains),
                }
            })
            .collect();
        AggregateCurve {
            trials: curves.len(),
            rows,
        }
    }

    fn write_row(out: &mut String, row: &AggregateRow) {
        let (gm, gs) = match &row.f_gain {
            Some(g) => (g.mean.to_string(), g.sd.to_string()),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.m_ret,
            row.precision.mean,
            row.precision.sd,
            row.recall.mean,
            row.recall.sd,
            row.f.mean,
            row.f.sd,
            gm,
            gs
        );
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            Self::write_row(&mut out, row);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    T,
    K,
    Fn,
    Target,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::T => "t",
            SweepAxis::K => "k",
            SweepAxis::Fn => "fn",
            SweepAxis::Target => "target",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::T => {
                cfg.t = value
                    .parse()
                    .map_err(|_| Error::invalid("t", format!("`{value}` is not a number")))?
            }
            SweepAxis::K => {
                cfg.k = value
                    .parse()
                    .map_err(|_| Error::invalid("k", format!("`{value}` is not an integer")))?
            }
            SweepAxis::Fn => cfg.ranking_fn = value.parse()?,
            SweepAxis::Target => cfg.target = PersonId::new(value)?,
        }
        Ok(cfg)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t" => Ok(SweepAxis::T),
            "k" => Ok(SweepAxis::K),
            "fn" => Ok(SweepAxis::Fn),
            "target" => Ok(SweepAxis::Target),
            _ => Err(Error::invalid(
                "axis",
                format!("`{s}` is not one of t, k, fn, target"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub mean_basket_size: f64,
    pub reruns: u32,
    pub aggregate: AggregateCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// One CSV: the axis value and mean basket size, then the standard columns.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},mean_basket_size,{CSV_HEADER}\n", self.axis.as_str());
        for row in &self.rows {
            let mut body = String::new();
            for r in &row.aggregate.rows {
                AggregateCurve::write_row(&mut body, r);
            }
            for line in body.lines() {
                let _ = writeln!(
                    out,
                    "{},{},{line}",
                    csv_field(&row.value),
                    row.mean_basket_size
                );
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub fn sweep(
    net: &SocialNetwork,
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
) -> Result<SweepTable> {
    sweep_with(net, base, axis, values, ExecMode::default())
}

pub fn sweep_with(
    net: &SocialNetwork,
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
    mode: ExecMode,
) -> Result<SweepTable> {
    let rows = values
        .iter()
        .map(|v| {
            let cfg = axis.apply(base, v)?;
            let result = run_experiment_with(net, &cfg, mode)?;
            Ok(SweepRow {
                value: v.clone(),
                mean_basket_size: result.mean_basket_size(),
                reruns: result.total_reruns(),
                aggregate: result.aggregate(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { axis, rows })
}
