//! Jaccard co-occurrence similarity and k-medoids clustering of persons.

use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::network::PersonId;
use crate::records::RecordSet;
use crate::simulate::child_rng;

/// For every person, the sorted indices of the baskets containing them.
#[derive(Clone, Debug)]
pub struct CooccurrenceIndex {
    persons: Vec<PersonId>,
    position: HashMap<PersonId, usize>,
    occurrences: Vec<Vec<usize>>,
}

impl CooccurrenceIndex {
    pub fn new(records: &RecordSet) -> Self {
        let persons: Vec<PersonId> = records.persons().into_iter().collect();
        let position: HashMap<PersonId, usize> = persons
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        let mut occurrences = vec![Vec::new(); persons.len()];
        for (bi, basket) in records.iter().enumerate() {
            for p in basket.iter() {
                occurrences[position[p]].push(bi);
            }
        }
        CooccurrenceIndex {
            persons,
            position,
            occurrences,
        }
    }

    /// Indexed persons in sorted order; positions index into this slice.
    pub fn persons(&self) -> &[PersonId] {
        &self.persons
    }

    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    pub fn position(&self, p: &PersonId) -> Result<usize> {
        self.position
            .get(p)
            .copied()
            .ok_or_else(|| Error::UnknownPerson(p.to_string()))
    }

    /// Occurrence frequency F(p).
    pub fn frequency(&self, p: &PersonId) -> Result<usize> {
        Ok(self.occurrences[self.position(p)?].len())
    }

    pub fn frequency_at(&self, i: usize) -> usize {
        self.occurrences[i].len()
    }

    pub fn occurrences(&self, p: &PersonId) -> Result<&[usize]> {
        Ok(&self.occurrences[self.position(p)?])
    }

    pub fn jaccard(&self, a: &PersonId, b: &PersonId) -> Result<f64> {
        Ok(self.jaccard_at(self.position(a)?, self.position(b)?))
    }

    /// Jaccard coefficient between indexed persons `i` and `j`.
    pub fn jaccard_at(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.occurrences[i], &self.occurrences[j]);
        let both = sorted_intersection_len(a, b);
        let either = a.len() + b.len() - both;
        both as f64 / either as f64
    }

    /// Dense pairwise Jaccard matrix over indexed persons.
    pub fn similarity_matrix(&self) -> SimilarityMatrix {
        let n = self.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in i + 1..n {
                let s = self.jaccard_at(i, j);
                values[i * n + j] = s;
                values[j * n + i] = s;
            }
        }
        SimilarityMatrix { n, values }
    }
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

#[derive(Clone, Debug)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Partition of the observed persons into `k` clusters with one medoid each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub assignment: BTreeMap<PersonId, usize>,
    pub medoids: Vec<PersonId>,
}

impl Clustering {
    pub fn cluster_of(&self, p: &PersonId) -> Option<usize> {
        self.assignment.get(p).copied()
    }

    /// Members of each cluster, sorted.
    pub fn clusters(&self) -> Vec<Vec<PersonId>> {
        let mut out = vec![Vec::new(); self.k];
        for (p, &j) in &self.assignment {
            out[j].push(p.clone());
        }
        out
    }
}

/// M(c_j): summed Jaccard between the medoid of cluster `j` and its other members.
pub fn medoid_objective(idx: &CooccurrenceIndex, clustering: &Clustering, j: usize) -> Result<f64> {
    let medoid = clustering
        .medoids
        .get(j)
        .ok_or_else(|| Error::invalid("cluster", format!("no cluster {j}")))?;
    let m = idx.position(medoid)?;
    let mut total = 0.0;
    for (p, &c) in &clustering.assignment {
        if c == j && p != medoid {
            total += idx.jaccard_at(m, idx.position(p)?);
        }
    }
    Ok(total)
}

/// Σ_j M(c_j).
pub fn total_objective(idx: &CooccurrenceIndex, clustering: &Clustering) -> Result<f64> {
    (0..clustering.k)
        .map(|j| medoid_objective(idx, clustering, j))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMedoidsOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    pub exec: ExecMode,
}

impl Default for KMedoidsOptions {
    fn default() -> Self {
        KMedoidsOptions {
            restarts: 10,
            max_iterations: 200,
            exec: ExecMode::default(),
        }
    }
}

/// One EM run from a fixed initialization.
#[derive(Clone, Debug)]
pub struct EmRun {
    pub medoids: Vec<usize>,
    pub assignment: Vec<usize>,
    pub objective: f64,
    /// Σ_j M(c_j) after each assignment step.
    pub trace: Vec<f64>,
}

fn assign(sim: &SimilarityMatrix, medoids: &[usize]) -> Vec<usize> {
    let mut assignment = vec![0; sim.len()];
    for (p, slot) in assignment.iter_mut().enumerate() {
        if let Some(j) = medoids.iter().position(|&m| m == p) {
            *slot = j;
            continue;
        }
        // Highest similarity; ties go to the lexicographically least medoid.
        let mut best = 0;
        for j in 1..medoids.len() {
            let (s, b) = (sim.get(p, medoids[j]), sim.get(p, medoids[best]));
            if s > b || (s == b && medoids[j] < medoids[best]) {
                best = j;
            }
        }
        *slot = best;
    }
    assignment
}

fn objective(sim: &SimilarityMatrix, medoids: &[usize], assignment: &[usize]) -> f64 {
    let mut per_cluster = vec![0.0; medoids.len()];
    for (p, &j) in assignment.iter().enumerate() {
        if p != medoids[j] {
            per_cluster[j] += sim.get(medoids[j], p);
        }
    }
    per_cluster.iter().sum()
}

fn update(sim: &SimilarityMatrix, medoids: &[usize], assignment: &[usize]) -> Vec<usize> {
    let mut members = vec![Vec::new(); medoids.len()];
    for (p, &j) in assignment.iter().enumerate() {
        members[j].push(p);
    }
    medoids
        .iter()
        .zip(&members)
        .map(|(&current, cluster)| {
            let score = |c: usize| -> f64 {
                cluster
                    .iter()
                    .filter(|&&p| p != c)
                    .map(|&p| sim.get(c, p))
                    .sum()
            };
            let current_score = score(current);
            let mut best = current;
            let mut best_score = current_score;
            // Members are in ascending (lexicographic) order, so the first
            // strict maximizer is the least one.
            for &c in cluster {
                let s = score(c);
                if s > best_score {
                    best = c;
                    best_score = s;
                }
            }
            best
        })
        .collect()
}

/// Alternates assignment and medoid update until the medoids stop changing.
pub fn em_from(sim: &SimilarityMatrix, initial: Vec<usize>, max_iterations: usize) -> EmRun {
    let mut medoids = initial;
    let mut assignment = assign(sim, &medoids);
    let mut trace = vec![objective(sim, &medoids, &assignment)];
    for _ in 0..max_iterations {
        let next = update(sim, &medoids, &assignment);
        if next == medoids {
            break;
        }
        medoids = next;
        assignment = assign(sim, &medoids);
        trace.push(objective(sim, &medoids, &assignment));
    }
    EmRun {
        objective: *trace.last().expect("trace is non-empty"),
        medoids,
        assignment,
        trace,
    }
}

fn initial_medoids(n: usize, k: usize, seeded: &[usize], seed: u64, restart: usize) -> Vec<usize> {
    let mut rng = child_rng(seed, restart as u64);
    let mut medoids = seeded.to_vec();
    let pool: Vec<usize> = (0..n).filter(|p| !seeded.contains(p)).collect();
    medoids.extend(
        sample(&mut rng, pool.len(), k - seeded.len())
            .into_iter()
            .map(|i| pool[i]),
    );
    medoids
}

/// k-medoids with the default options (10 restarts).
pub fn k_medoids(
    records: &RecordSet,
    k: usize,
    rng_seed: u64,
    seeded_medoids: &[PersonId],
) -> Result<Clustering> {
    let idx = CooccurrenceIndex::new(records);
    k_medoids_with(
        &idx,
        k,
        rng_seed,
        seeded_medoids,
        &KMedoidsOptions::default(),
    )
}

/// Runs `opts.restarts` EM runs and keeps the one with maximal Σ_j M(c_j)
/// (ties: lexicographically least medoid list).
///
/// Seeded medoids occupy the first cluster slots of every restart.
pub fn k_medoids_with(
    idx: &CooccurrenceIndex,
    k: usize,
    rng_seed: u64,
    seeded_medoids: &[PersonId],
    opts: &KMedoidsOptions,
) -> Result<Clustering> {
    if idx.is_empty() {
        return Err(Error::EmptyRecords);
    }
    if k == 0 || k > idx.len() {
        return Err(Error::invalid(
            "k",
            format!("must be in 1..={} (distinct persons)", idx.len()),
        ));
    }
    if seeded_medoids.len() > k {
        return Err(Error::invalid(
            "medoids",
            "more seeded medoids than clusters",
        ));
    }
    let mut seeded = Vec::with_capacity(seeded_medoids.len());
    for p in seeded_medoids {
        let i = idx.position(p)?;
        if seeded.contains(&i) {
            return Err(Error::invalid("medoids", format!("`{p}` seeded twice")));
        }
        seeded.push(i);
    }
    if opts.restarts == 0 {
        return Err(Error::invalid("restarts", "must be positive"));
    }
    let sim = idx.similarity_matrix();
    let runs = opts.exec.map_indexed(opts.restarts, |r| {
        em_from(
            &sim,
            initial_medoids(idx.len(), k, &seeded, rng_seed, r),
            opts.max_iterations,
        )
    });
    let best = runs
        .into_iter()
        .reduce(|best, run| {
            let better = run.objective > best.objective
                || (run.objective == best.objective && run.medoids < best.medoids);
            if better {
                run
            } else {
                best
            }
        })
        .expect("at least one restart");
    Ok(Clustering {
        k,
        assignment: best
            .assignment
            .iter()
            .enumerate()
            .map(|(p, &j)| (idx.persons()[p].clone(), j))
            .collect(),
        medoids: best
            .medoids
            .iter()
            .map(|&m| idx.persons()[m].clone())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::Basket;

    fn pid(s: &str) -> PersonId {
        PersonId::new(s).unwrap()
    }

    fn records(rows: &[&[&str]]) -> RecordSet {
        rows.iter()
            .map(|r| Basket::new(r.iter().map(|n| pid(n))).unwrap())
            .collect()
    }

    fn example_records() -> RecordSet {
        records(&[
            &[
                "Abdul A. Al-Omari",
                "Marwan Al-Shehhi",
                "Mohamed Atta",
                "Waleed Alshehri",
            ],
            &[
                "Mustafa A. Al-Hisawi",
                "Marwan Al-Shehhi",
                "Mohamed Atta",
                "Fayez Ahmed",
                "Waleed Alshehri",
            ],
            &[
                "Waleed Alshehri",
                "Abdul A. Al-Omari",
                "Mustafa A. Al-Hisawi",
                "Wail Alshehri",
                "Satam Suqami",
            ],
            &["Fayez Ahmed", "Mohand Alshehri", "Hamza Alghamdi"],
        ])
    }

    #[test]
    fn jaccard_on_example_records() {
        let idx = CooccurrenceIndex::new(&example_records());
        assert_eq!(
            idx.jaccard(&pid("Mohamed Atta"), &pid("Marwan Al-Shehhi"))
                .unwrap(),
            1.0
        );
        let j = idx
            .jaccard(&pid("Waleed Alshehri"), &pid("Mohamed Atta"))
            .unwrap();
        assert!((j - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            idx.jaccard(&pid("Fayez Ahmed"), &pid("Fayez Ahmed"))
                .unwrap(),
            1.0
        );
        assert_eq!(
            idx.jaccard(&pid("Hamza Alghamdi"), &pid("Satam Suqami"))
                .unwrap(),
            0.0
        );
        assert!(matches!(
            idx.jaccard(&pid("nobody"), &pid("Mohamed Atta")),
            Err(Error::UnknownPerson(_))
        ));
        assert_eq!(idx.frequency(&pid("Waleed Alshehri")).unwrap(), 3);
    }

    #[test]
    fn k_equal_to_person_count_gives_singletons() {
        let rs = example_records();
        let n = rs.persons().len();
        let c = k_medoids(&rs, n, 1, &[]).unwrap();
        let clusters = c.clusters();
        assert!(clusters.iter().all(|m| m.len() == 1));
        for (j, m) in c.medoids.iter().enumerate() {
            assert_eq!(c.cluster_of(m), Some(j));
        }
    }

    #[test]
    fn k_one_picks_brute_force_medoid() {
        let rs = example_records();
        let idx = CooccurrenceIndex::new(&rs);
        // Oracle: argmax over candidates of Σ Jaccard to everyone else,
        // least name on ties.
        let persons = idx.persons();
        let mut best: Option<(f64, &PersonId)> = None;
        for a in persons {
            let s: f64 = persons
                .iter()
                .filter(|b| *b != a)
                .map(|b| idx.jaccard(a, b).unwrap())
                .sum();
            if best.is_none_or(|(bs, _)| s > bs) {
                best = Some((s, a));
            }
        }
        let c = k_medoids(&rs, 1, 7, &[]).unwrap();
        assert_eq!(&c.medoids[0], best.unwrap().1);
        assert_eq!(c.assignment.len(), persons.len());
    }

    #[test]
    fn medoid_objective_small_cases() {
        let rs = records(&[&["a", "b"], &["a"]]);
        let idx = CooccurrenceIndex::new(&rs);
        let c = Clustering {
            k: 1,
            assignment: [(pid("a"), 0), (pid("b"), 0)].into_iter().collect(),
            medoids: vec![pid("a")],
        };
        assert_eq!(medoid_objective(&idx, &c, 0).unwrap(), 0.5);
        let single = Clustering {
            k: 2,
            assignment: [(pid("a"), 0), (pid("b"), 1)].into_iter().collect(),
            medoids: vec![pid("a"), pid("b")],
        };
        assert_eq!(medoid_objective(&idx, &single, 0).unwrap(), 0.0);
        assert!(medoid_objective(&idx, &single, 2).is_err());
    }

    #[test]
    fn seeded_medoids_fill_first_slots() {
        let rs = example_records();
        let opts = KMedoidsOptions {
            restarts: 1,
            ..Default::default()
        };
        let idx = CooccurrenceIndex::new(&rs);
        let c = k_medoids_with(&idx, 3, 11, &[pid("Hamza Alghamdi")], &opts).unwrap();
        assert_eq!(c.cluster_of(&pid("Hamza Alghamdi")), Some(0));
    }

    #[test]
    fn argument_errors() {
        let rs = example_records();
        assert!(k_medoids(&rs, 0, 1, &[]).is_err());
        assert!(k_medoids(&rs, 100, 1, &[]).is_err());
        assert_eq!(
            k_medoids(&RecordSet::default(), 1, 1, &[]),
            Err(Error::EmptyRecords)
        );
        assert!(k_medoids(&rs, 2, 1, &[pid("ghost")]).is_err());
        assert!(k_medoids(&rs, 2, 1, &[pid("Fayez Ahmed"), pid("Fayez Ahmed")]).is_err());
        assert!(k_medoids(&rs, 1, 1, &[pid("Fayez Ahmed"), pid("Mohamed Atta")]).is_err());
    }

    #[test]
    fn deterministic_across_exec_modes() {
        let net = crate::network::SocialNetwork::builtin_911();
        let cfg = crate::simulate::SimulationConfig {
            t: 0.8,
            basket_count: 370,
            rng_seed: 3,
        };
        let rs = crate::simulate::generate_records(&net, &cfg).unwrap();
        let idx = CooccurrenceIndex::new(&rs);
        let mut opts = KMedoidsOptions {
            exec: ExecMode::Serial,
            ..Default::default()
        };
        let a = k_medoids_with(&idx, 4, 5, &[], &opts).unwrap();
        opts.exec = ExecMode::Parallel;
        let b = k_medoids_with(&idx, 4, 5, &[], &opts).unwrap();
        assert_eq!(a, b);
    }
}
