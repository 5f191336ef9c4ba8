//! Ranking records by how strongly they bridge clusters, and gateway persons.
//!
//! For a record `b` and cluster `c_j`, the profile entry is
//! `max_{p ∈ c_j ∩ b} 1 / F(p)` (0 for an empty intersection). The three
//! ranking functions summarize that profile.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cluster::{Clustering, CooccurrenceIndex};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::network::PersonId;
use crate::records::{Basket, RecordSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankingFunction {
    /// Mean of the profile; larger is more likely.
    Av,
    /// Population standard deviation of the profile; smaller is more likely.
    Sd,
    /// Mean of the two largest profile entries; larger is more likely.
    Tp,
}

impl RankingFunction {
    pub const ALL: [RankingFunction; 3] = [
        RankingFunction::Av,
        RankingFunction::Sd,
        RankingFunction::Tp,
    ];

    pub fn larger_is_more_likely(self) -> bool {
        !matches!(self, RankingFunction::Sd)
    }

    pub fn score(self, profile: &ClusterMaxProfile) -> Result<f64> {
        match self {
            RankingFunction::Av => Ok(score_av(profile)),
            RankingFunction::Sd => Ok(score_sd(profile)),
            RankingFunction::Tp => score_tp(profile),
        }
    }

    /// Orders two scores so that the more likely one comes first.
    fn likeliness_cmp(self, a: f64, b: f64) -> Ordering {
        if self.larger_is_more_likely() {
            b.total_cmp(&a)
        } else {
            a.total_cmp(&b)
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RankingFunction::Av => "av",
            RankingFunction::Sd => "sd",
            RankingFunction::Tp => "tp",
        }
    }
}

impl std::str::FromStr for RankingFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "av" => Ok(RankingFunction::Av),
            "sd" => Ok(RankingFunction::Sd),
            "tp" => Ok(RankingFunction::Tp),
            _ => Err(Error::invalid(
                "fn",
                format!("`{s}` is not one of av, sd, tp"),
            )),
        }
    }
}

impl std::fmt::Display for RankingFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-cluster maximal contribution `1/F` of a record's members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterMaxProfile(pub Vec<f64>);

impl ClusterMaxProfile {
    pub fn entries(&self) -> &[f64] {
        &self.0
    }
}

pub fn cluster_max_profile(
    idx: &CooccurrenceIndex,
    clustering: &Clustering,
    basket: &Basket,
) -> Result<ClusterMaxProfile> {
    let mut entries = vec![0.0; clustering.k];
    for p in basket.iter() {
        let j = clustering
            .cluster_of(p)
            .ok_or_else(|| Error::UnknownPerson(p.to_string()))?;
        let contribution = 1.0 / idx.frequency(p)? as f64;
        if contribution > entries[j] {
            entries[j] = contribution;
        }
    }
    Ok(ClusterMaxProfile(entries))
}

pub fn score_av(profile: &ClusterMaxProfile) -> f64 {
    let v = profile.entries();
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn score_sd(profile: &ClusterMaxProfile) -> f64 {
    let v = profile.entries();
    // Exact zero for equal entries, independent of rounding in the mean.
    if v.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let mean = score_av(profile);
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64;
    var.sqrt()
}

pub fn score_tp(profile: &ClusterMaxProfile) -> Result<f64> {
    let v = profile.entries();
    if v.len() < 2 {
        return Err(Error::invalid(
            "k",
            "the top-two score needs at least 2 clusters",
        ));
    }
    Ok((select_kth(v, 1)? + select_kth(v, 2)?) / 2.0)
}

/// The `k`-th largest value (1-based); duplicates occupy distinct ranks.
pub fn select_kth(values: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > values.len() {
        return Err(Error::invalid(
            "k",
            format!("rank {k} out of range 1..={}", values.len()),
        ));
    }
    let mut v = values.to_vec();
    let (_, kth, _) = v.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    Ok(*kth)
}

/// Member of `c_j ∩ basket` with the largest `1/F` (least name on ties).
pub fn gateway(
    idx: &CooccurrenceIndex,
    clustering: &Clustering,
    basket: &Basket,
    j: usize,
) -> Option<PersonId> {
    basket
        .iter()
        .filter(|p| clustering.cluster_of(p) == Some(j))
        .filter_map(|p| idx.frequency(p).ok().map(|f| (f, p)))
        // basket iterates in ascending name order, so `min_by_key` keeps the least name
        .min_by_key(|&(f, _)| f)
        .map(|(_, p)| p.clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingOutcome {
    pub scores: Vec<f64>,
    /// Basket indices, most likely first.
    pub order: Vec<usize>,
    /// `gateways[i][j]`: gateway of basket `i` in cluster `j`.
    pub gateways: Vec<Vec<Option<PersonId>>>,
    pub function_used: RankingFunction,
}

impl RankingOutcome {
    /// Distinct gateways of basket `i`, in cluster order.
    pub fn gateways_of(&self, i: usize) -> Vec<&PersonId> {
        self.gateways[i].iter().flatten().collect()
    }
}

pub fn rank_records(
    records: &RecordSet,
    clustering: &Clustering,
    function: RankingFunction,
) -> Result<RankingOutcome> {
    rank_records_with(records, clustering, function, ExecMode::default())
}

pub fn rank_records_with(
    records: &RecordSet,
    clustering: &Clustering,
    function: RankingFunction,
    mode: ExecMode,
) -> Result<RankingOutcome> {
    let idx = CooccurrenceIndex::new(records);
    let per_basket = mode.map_indexed(records.len(), |i| -> Result<(f64, Vec<Option<PersonId>>)> {
        let basket = &records[i];
        let score = function.score(&cluster_max_profile(&idx, clustering, basket)?)?;
        let gateways = (0..clustering.k)
            .map(|j| gateway(&idx, clustering, basket, j))
            .collect();
        Ok((score, gateways))
    });
    let (scores, gateways): (Vec<f64>, Vec<_>) = per_basket
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        function
            .likeliness_cmp(scores[a], scores[b])
            .then(a.cmp(&b))
    });
    Ok(RankingOutcome {
        scores,
        order,
        gateways,
        function_used: function,
    })
}


#[cfg(test)]
mod tests {
    use super::fixture::{clustering, pid, records};
    use super::*;

    const EPS: f64 = 1e-15;

    #[test]
    fn fixture_profiles() {
        let rs = records();
        let idx = CooccurrenceIndex::new(&rs);
        let c = clustering();
        let r4 = cluster_max_profile(&idx, &c, &rs[4]).unwrap();
        assert_eq!(r4.entries(), &[1.0 / 3.0, 1.0 / 3.0]);
        let r0 = cluster_max_profile(&idx, &c, &rs[0]).unwrap();
        assert_eq!(r0.entries(), &[0.5, 0.0]);
    }

    #[test]
    fn fixture_scores() {
        let rs = records();
        let idx = CooccurrenceIndex::new(&rs);
        let c = clustering();
        let r4 = cluster_max_profile(&idx, &c, &rs[4]).unwrap();
        let r0 = cluster_max_profile(&idx, &c, &rs[0]).unwrap();
        assert!((score_av(&r4) - 1.0 / 3.0).abs() < EPS);
        assert!((score_av(&r0) - 0.25).abs() < EPS);
        assert_eq!(score_sd(&r4), 0.0);
        assert!((score_sd(&r0) - 0.25).abs() < EPS);
        assert!((score_tp(&r4).unwrap() - 1.0 / 3.0).abs() < EPS);
    }

    #[test]
    fn fixture_ranking_and_gateways() {
        let rs = records();
        let c = clustering();
        for f in [RankingFunction::Av, RankingFunction::Sd] {
            let out = rank_records(&rs, &c, f).unwrap();
            assert_eq!(out.order[0], 4, "{f}");
        }
        let out = rank_records(&rs, &c, RankingFunction::Av).unwrap();
        assert_eq!(out.gateways[4], vec![Some(pid("p0")), Some(pid("p4"))]);
        assert_eq!(out.gateways[0][1], None);
    }

    #[test]
    fn score_edge_cases() {
        assert_eq!(score_av(&ClusterMaxProfile(vec![0.0, 0.0])), 0.0);
        assert_eq!(score_av(&ClusterMaxProfile(vec![1.0])), 1.0);
        assert_eq!(score_sd(&ClusterMaxProfile(vec![0.3; 4])), 0.0);
        assert_eq!(score_sd(&ClusterMaxProfile(vec![1.0, 0.0])), 0.5);
        let p = ClusterMaxProfile(vec![0.5, 0.2, 0.1]);
        assert!((score_tp(&p).unwrap() - 0.35).abs() < EPS);
        let two = ClusterMaxProfile(vec![0.25, 0.5]);
        assert_eq!(score_tp(&two).unwrap(), score_av(&two));
        assert!(score_tp(&ClusterMaxProfile(vec![0.5])).is_err());
    }

    #[test]
    fn select_kth_examples() {
        assert_eq!(select_kth(&[0.2, 0.5, 0.1], 1).unwrap(), 0.5);
        assert_eq!(select_kth(&[0.2, 0.5, 0.1], 2).unwrap(), 0.2);
        assert_eq!(select_kth(&[0.4, 0.4], 2).unwrap(), 0.4);
        assert!(select_kth(&[0.4], 0).is_err());
        assert!(select_kth(&[0.4], 2).is_err());
    }

    #[test]
    fn gateway_prefers_rarer_member() {
        // q occurs 3 times, r twice; both in cluster 0.
        let rs = RecordSet::parse("q;r\nq;r\nq\ns\n").unwrap();
        let idx = CooccurrenceIndex::new(&rs);
        let c = Clustering {
            k: 2,
            assignment: [(pid("q"), 0), (pid("r"), 0), (pid("s"), 1)]
                .into_iter()
                .collect(),
            medoids: vec![pid("q"), pid("s")],
        };
        assert_eq!(gateway(&idx, &c, &rs[0], 0), Some(pid("r")));
        assert_eq!(gateway(&idx, &c, &rs[0], 1), None);
    }

    #[test]
    fn profile_rejects_unclustered_person() {
        let rs = RecordSet::parse("a;b\n").unwrap();
        let idx = CooccurrenceIndex::new(&rs);
        let c = Clustering {
            k: 1,
            assignment: [(pid("a"), 0)].into_iter().collect(),
            medoids: vec![pid("a")],
        };
        assert!(matches!(
            cluster_max_profile(&idx, &c, &rs[0]),
            Err(Error::UnknownPerson(_))
        ));
    }

    #[test]
    fn ties_keep_index_order() {
        let rs = RecordSet::parse("a\na\na\n").unwrap();
        let c = Clustering {
            k: 1,
            assignment: [(pid("a"), 0)].into_iter().collect(),
            medoids: vec![pid("a")],
        };
        let out = rank_records(&rs, &c, RankingFunction::Sd).unwrap();
        assert_eq!(out.order, vec![0, 1, 2]);
        let single = RecordSet::parse("a\n").unwrap();
        assert_eq!(
            rank_records(&single, &c, RankingFunction::Av)
                .unwrap()
                .order,
            vec![0]
        );
    }
}
