use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use latentnode::cluster::{em_from, k_medoids, CooccurrenceIndex};
use latentnode::eval::{run_experiment_with, EvaluationCurve};
use latentnode::network::{degree_gini, mean_clustering_coefficient, mean_degree, Person};
use latentnode::rank::{
    cluster_max_profile, rank_records, score_av, select_kth, ClusterMaxProfile,
};
use latentnode::simulate::generate_cascades;
use latentnode::{
    Basket, Clustering, ExecMode, ExperimentConfig, PersonId, RankingFunction, RankingOutcome,
    RecordSet, SimulationConfig, SocialNetwork,
};

fn pid(i: usize) -> PersonId {
    PersonId::new(format!("p{i:02}")).unwrap()
}

/// Record sets over persons `p00..p{n-1}`; each basket is a non-empty subset.
fn record_sets(max_persons: usize, max_baskets: usize) -> impl Strategy<Value = RecordSet> {
    (2..=max_persons).prop_flat_map(move |n| {
        prop::collection::vec(prop::collection::btree_set(0..n, 1..=n), 1..=max_baskets).prop_map(
            |baskets| {
                baskets
                    .into_iter()
                    .map(|b| Basket::new(b.into_iter().map(pid)).unwrap())
                    .collect()
            },
        )
    })
}

fn records_and_k(max_k: usize) -> impl Strategy<Value = (RecordSet, usize, u64)> {
    record_sets(8, 12).prop_flat_map(move |rs| {
        let n = rs.persons().len();
        (Just(rs), 1..=n.min(max_k), any::<u64>())
    })
}

fn occurrence_count(records: &RecordSet, p: &PersonId) -> usize {
    records.iter().filter(|b| b.contains(p)).count()
}

/// The cluster term of the average score, summed literally over every
/// cluster member with the indicator in the numerator.
fn literal_profile(records: &RecordSet, c: &Clustering, basket: &Basket) -> Vec<f64> {
    (0..c.k)
        .map(|j| {
            c.assignment
                .iter()
                .filter(|&(_, &cj)| cj == j)
                .map(|(p, _)| {
                    f64::from(u8::from(basket.contains(p))) / occurrence_count(records, p) as f64
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Same term as the reciprocal of the least frequency in `c_j ∩ basket`.
fn reciprocal_min_profile(records: &RecordSet, c: &Clustering, basket: &Basket) -> Vec<f64> {
    (0..c.k)
        .map(|j| {
            basket
                .iter()
                .filter(|p| c.cluster_of(p) == Some(j))
                .map(|p| occurrence_count(records, p))
                .min()
                .map_or(0.0, |f| 1.0 / f as f64)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn profile_matches_literal_and_reciprocal_min_forms((rs, k, seed) in records_and_k(4)) {
        let c = k_medoids(&rs, k, seed, &[]).unwrap();
        let idx = CooccurrenceIndex::new(&rs);
        for b in rs.iter() {
            let got = cluster_max_profile(&idx, &c, b).unwrap();
            let literal = literal_profile(&rs, &c, b);
            let recip = reciprocal_min_profile(&rs, &c, b);
            prop_assert_eq!(&got.0, &literal);
            prop_assert_eq!(&got.0, &recip);
            let mean = literal.iter().sum::<f64>() / k as f64;
            prop_assert!((score_av(&got) - mean).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn top_two_equals_average_with_two_clusters(rs in record_sets(8, 15), seed in any::<u64>()) {
        prop_assume!(rs.persons().len() >= 2);
        let c = k_medoids(&rs, 2, seed, &[]).unwrap();
        let tp = rank_records(&rs, &c, RankingFunction::Tp).unwrap();
        let av = rank_records(&rs, &c, RankingFunction::Av).unwrap();
        prop_assert_eq!(tp.order, av.order);
        prop_assert_eq!(tp.gateways, av.gateways);
    }

    #[test]
    fn select_kth_matches_sorting(values in prop::collection::vec(-1e6f64..1e6, 1..40), pick in any::<prop::sample::Index>()) {
        let k = pick.index(values.len()) + 1;
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assert_eq!(select_kth(&values, k).unwrap(), sorted[k - 1]);
    }

    #[test]
    fn em_objective_never_decreases_and_terminates((rs, k, seed) in records_and_k(5)) {
        let idx = CooccurrenceIndex::new(&rs);
        let sim = idx.similarity_matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let initial = sample(&mut rng, idx.len(), k).into_vec();
        let run = em_from(&sim, initial, 200);
        prop_assert!(run.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{:?}", run.trace);
        prop_assert!(run.trace.len() <= 200);
        // A fixed point: restarting from the result changes nothing.
        let again = em_from(&sim, run.medoids.clone(), 200);
        prop_assert_eq!(again.trace.len(), 1);
        prop_assert_eq!(again.medoids, run.medoids);
    }

    #[test]
    fn ranking_is_monotone_in_each_cluster_term(entries in prop::collection::vec(0.0f64..1.0, 1..8), j in any::<prop::sample::Index>(), bump in 0.0f64..1.0) {
        let before = ClusterMaxProfile(entries.clone());
        let mut raised = entries;
        let j = j.index(raised.len());
        raised[j] += bump;
        prop_assert!(score_av(&ClusterMaxProfile(raised)) >= score_av(&before));
    }
}

fn outcome_from(order: Vec<usize>) -> RankingOutcome {
    let n = order.len();
    RankingOutcome {
        scores: vec![0.0; n],
        order,
        gateways: vec![Vec::new(); n],
        function_used: RankingFunction::Av,
    }
}

fn shuffled_with_truth() -> impl Strategy<Value = (Vec<usize>, Vec<bool>, usize)> {
    (1usize..60).prop_flat_map(|n| {
        (
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            prop::collection::vec(any::<bool>(), n),
            0usize..5,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn precision_recall_counting_identity((order, mut altered, unretrievable) in shuffled_with_truth()) {
        if !altered.iter().any(|&a| a) && unretrievable == 0 {
            altered[0] = true;
        }
        let relevant = altered.iter().filter(|&&a| a).count() + unretrievable;
        let curve = EvaluationCurve::compute(&outcome_from(order), &altered, unretrievable).unwrap();
        for point in &curve.points {
            let lhs = point.precision * point.m_ret as f64;
            let rhs = point.recall * relevant as f64;
            prop_assert!((lhs - rhs).abs() < 1e-9, "m_ret={} {lhs} vs {rhs}", point.m_ret);
        }
    }

    #[test]
    fn gain_is_one_when_everything_is_retrieved((order, mut altered, unretrievable) in shuffled_with_truth()) {
        altered[0] = true;
        let n = order.len();
        let curve = EvaluationCurve::compute(&outcome_from(order), &altered, unretrievable).unwrap();
        let gain = curve.at(n).f_gain.unwrap();
        prop_assert!((gain - 1.0).abs() < 1e-12, "{gain}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_cascade_member_has_a_chain(t in 0.0f64..=1.0, seed in any::<u64>()) {
        let net = SocialNetwork::builtin_911();
        let cfg = SimulationConfig { t, basket_count: 370, rng_seed: seed };
        for c in generate_cascades(&net, &cfg, ExecMode::Serial).unwrap() {
            for p in &c.hop1 {
                prop_assert!(net.has_edge(&c.initiator, p));
            }
            let mut seen: BTreeSet<&PersonId> = c.hop1.iter().collect();
            prop_assert!(!seen.contains(&c.initiator));
            prop_assert_eq!(seen.len(), c.hop1.len());
            for (p, via) in &c.hop2 {
                prop_assert!(c.hop1.contains(via));
                prop_assert!(net.has_edge(via, p));
                prop_assert!(p != &c.initiator);
                prop_assert!(seen.insert(p), "duplicate member {}", p);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn experiments_are_byte_identical_across_exec_modes(seed in any::<u64>(), k in 2usize..5, fn_pick in 0usize..3) {
        let net = SocialNetwork::builtin_911();
        let cfg = ExperimentConfig {
            trials: 4,
            base_seed: seed,
            k,
            basket_count: 120,
            ranking_fn: RankingFunction::ALL[fn_pick],
            ..ExperimentConfig::headline(PersonId::new("Mustafa A. Al-Hisawi").unwrap())
        };
        let serial = run_experiment_with(&net, &cfg, ExecMode::Serial).unwrap();
        let parallel = run_experiment_with(&net, &cfg, ExecMode::Parallel).unwrap();
        prop_assert_eq!(serde_json::to_string(&serial).unwrap(), serde_json::to_string(&parallel).unwrap());
    }
}

fn relabeled(net: &SocialNetwork, prefix: &str) -> SocialNetwork {
    let rename = |p: &PersonId| {
        PersonId::new(format!(
            "{prefix}{}",
            p.as_str().chars().rev().collect::<String>()
        ))
        .unwrap()
    };
    let persons: Vec<Person> = net
        .persons()
        .iter()
        .map(|p| Person::new(rename(&p.id)))
        .collect();
    let edges: Vec<_> = net.edges().map(|(a, b)| (rename(a), rename(b))).collect();
    SocialNetwork::new(persons, edges).unwrap()
}

#[test]
fn topology_metrics_ignore_labels() {
    let net = SocialNetwork::builtin_911();
    let other = relabeled(&net, "x-");
    assert!((mean_degree(&net).unwrap() - mean_degree(&other).unwrap()).abs() < 1e-12);
    assert!((degree_gini(&net).unwrap() - degree_gini(&other).unwrap()).abs() < 1e-12);
    assert!(
        (mean_clustering_coefficient(&net).unwrap() - mean_clustering_coefficient(&other).unwrap())
            .abs()
            < 1e-12
    );
}

#[test]
fn complete_graphs_are_fully_clustered() {
    for n in 3..12 {
        let persons: Vec<Person> = (0..n).map(|i| Person::new(pid(i))).collect();
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (pid(i), pid(j))))
            .collect();
        let net = SocialNetwork::new(persons, edges).unwrap();
        assert_eq!(mean_clustering_coefficient(&net).unwrap(), 1.0);
        assert_eq!(degree_gini(&net).unwrap(), 0.0);
        assert_eq!(mean_degree(&net).unwrap(), (n - 1) as f64);
    }
}

#[test]
fn basket_size_grows_with_transmission() {
    let net = SocialNetwork::builtin_911();
    for seed in 0..20 {
        let sizes: Vec<f64> = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
            .iter()
            .map(|&t| {
                let cfg = SimulationConfig {
                    t,
                    basket_count: 370,
                    rng_seed: seed,
                };
                latentnode::generate_records(&net, &cfg)
                    .unwrap()
                    .mean_basket_size()
            })
            .collect();
        assert!(
            sizes.windows(2).all(|w| w[1] >= w[0]),
            "seed {seed}: {sizes:?}"
        );
    }
}
