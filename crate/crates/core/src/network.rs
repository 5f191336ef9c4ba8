//! Ground-truth social networks: edge-list parsing, topology metrics and the
//! embedded 9/11 hijacker/conspirator network.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const KREBS_911: &str = include_str!("../data/krebs_911.tsv");

/// Stable, non-empty person key.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PersonId(String);

impl PersonId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::invalid("person", "person id must be non-empty"));
        }
        Ok(PersonId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for PersonId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        PersonId::new(value)
    }
}

impl From<PersonId> for String {
    fn from(id: PersonId) -> String {
        id.0
    }
}

impl fmt::Display for PersonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Hijacker,
    Conspirator,
    #[default]
    Unknown,
}

impl Role {
    fn parse(s: &str) -> Option<Role> {
        match s {
            "hijacker" => Some(Role::Hijacker),
            "conspirator" => Some(Role::Conspirator),
            "unknown" | "" | "-" => Some(Role::Unknown),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Role::Hijacker => "hijacker",
            Role::Conspirator => "conspirator",
            Role::Unknown => "unknown",
        }
    }
}

/// A person node. `role` and `flight` are descriptive metadata only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    pub id: PersonId,
    pub display_name: String,
    pub role: Role,
    pub flight: Option<String>,
}

impl Person {
    pub fn new(id: PersonId) -> Self {
        Person {
            display_name: id.as_str().to_owned(),
            id,
            role: Role::Unknown,
            flight: None,
        }
    }
}

/// Undirected simple graph over persons. Immutable once built.
///
/// Persons are stored sorted by id; adjacency lists hold sorted person indices.
#[derive(Clone, Debug)]
pub struct SocialNetwork {
    persons: Vec<Person>,
    index: HashMap<PersonId, usize>,
    adjacency: Vec<Vec<usize>>,
}

impl PartialEq for SocialNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.persons == other.persons && self.adjacency == other.adjacency
    }
}

impl SocialNetwork {
    /// Builds a network from persons and undirected edges.
    ///
    /// Edge endpoints missing from `persons` are added with default metadata.
    /// Duplicate edges collapse; self-loops are rejected.
    pub fn new(
        persons: impl IntoIterator<Item = Person>,
        edges: impl IntoIterator<Item = (PersonId, PersonId)>,
    ) -> Result<Self> {
        let mut by_id: BTreeMap<PersonId, Person> = BTreeMap::new();
        for p in persons {
            by_id.insert(p.id.clone(), p);
        }
        let mut edge_set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::invalid("edges", format!("self-loop on `{a}`")));
            }
            for end in [&a, &b] {
                by_id
                    .entry(end.clone())
                    .or_insert_with(|| Person::new(end.clone()));
            }
            edge_set.insert(if a < b { (a, b) } else { (b, a) });
        }
        let persons: Vec<Person> = by_id.into_values().collect();
        let index: HashMap<PersonId, usize> = persons
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.clone(), i))
            .collect();
        let mut adjacency = vec![Vec::new(); persons.len()];
        for (a, b) in &edge_set {
            let (ia, ib) = (index[a], index[b]);
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(SocialNetwork {
            persons,
            index,
            adjacency,
        })
    }

    /// Parses the tab-separated edge-list format.
    ///
    /// Edge lines are `nameA<TAB>nameB`; metadata lines are
    /// `#node<TAB>name<TAB>role<TAB>flight`. Other `#` lines are comments.
    pub fn load_edge_list(text: &str) -> Result<Self> {
        let mut persons: BTreeMap<PersonId, Person> = BTreeMap::new();
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let id = |field: &str| {
                PersonId::new(field.trim_end()).map_err(|_| parse_err("empty person name".into()))
            };
            if let Some(rest) = line.strip_prefix("#node") {
                let fields: Vec<&str> = rest.split('\t').collect();
                if fields.len() < 2 || !fields[0].is_empty() || fields.len() > 4 {
                    return Err(parse_err(
                        "expected `#node<TAB>name[<TAB>role[<TAB>flight]]`".into(),
                    ));
                }
                let pid = id(fields[1])?;
                let role_text = fields.get(2).map_or("", |s| s.trim_end());
                let role = Role::parse(role_text)
                    .ok_or_else(|| parse_err(format!("unknown role `{role_text}`")))?;
                let flight = fields
                    .get(3)
                    .map(|s| s.trim_end())
                    .filter(|s| !s.is_empty() && *s != "-")
                    .map(str::to_owned);
                if persons.contains_key(&pid) {
                    return Err(parse_err(format!("duplicate node declaration `{pid}`")));
                }
                persons.insert(
                    pid.clone(),
                    Person {
                        display_name: pid.as_str().to_owned(),
                        id: pid,
                        role,
                        flight,
                    },
                );
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(parse_err(format!(
                    "expected `nameA<TAB>nameB`, found {} field(s)",
                    fields.len()
                )));
            }
            let (a, b) = (id(fields[0])?, id(fields[1])?);
            if a == b {
                return Err(parse_err(format!("self-loop on `{a}`")));
            }
            edges.push((a, b));
        }
        SocialNetwork::new(persons.into_values(), edges)
    }

    /// Serializes to the edge-list format; `load_edge_list` reproduces `self`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for p in &self.persons {
            out.push_str(&format!(
                "#node\t{}\t{}\t{}\n",
                p.id,
                p.role.as_str(),
                p.flight.as_deref().unwrap_or("-")
            ));
        }
        for (a, b) in self.edges() {
            out.push_str(&format!("{a}\t{b}\n"));
        }
        out
    }

    /// The embedded 37-person network (19 hijackers, 18 conspirators).
    pub fn builtin_911() -> Self {
        SocialNetwork::load_edge_list(KREBS_911).expect("embedded dataset is well-formed")
    }

    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    pub fn persons(&self) -> &[Person] {
        &self.persons
    }

    pub fn person(&self, i: usize) -> &Person {
        &self.persons[i]
    }

    pub fn index_of(&self, id: &PersonId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &PersonId) -> bool {
        self.index.contains_key(id)
    }

    /// Sorted neighbor indices of person `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, a: &PersonId, b: &PersonId) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(ia), Some(ib)) => self.adjacency[ia].binary_search(&ib).is_ok(),
            _ => false,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as `(a, b)` with `a < b`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (&PersonId, &PersonId)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(move |(i, list)| {
                list.iter()
                    .filter(move |&&j| j > i)
                    .map(move |&j| (&self.persons[i].id, &self.persons[j].id))
            })
    }

    /// Hop distance from `from` to every person, capped at `max_hops`
    /// (`None` beyond the cap or unreachable).
    pub fn hop_distances(&self, from: usize, max_hops: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[from] = Some(0);
        let mut frontier = vec![from];
        for hop in 1..=max_hops {
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in &self.adjacency[u] {
                    if dist[v].is_none() {
                        dist[v] = Some(hop);
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        dist
    }

    fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }
}

/// Arithmetic mean of node degrees.
pub fn mean_degree(net: &SocialNetwork) -> Result<f64> {
    if net.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    Ok(net.degrees().iter().sum::<usize>() as f64 / net.len() as f64)
}

/// Population Gini coefficient of the degree distribution:
/// `Σ_i Σ_j |d_i - d_j| / (2 n² μ)` over ordered pairs.
pub fn degree_gini(net: &SocialNetwork) -> Result<f64> {
    let mu = mean_degree(net)?;
    if mu == 0.0 {
        return Err(Error::NoEdges);
    }
    let degrees = net.degrees();
    let n = degrees.len() as f64;
    let total: usize = degrees
        .iter()
        .flat_map(|&a| degrees.iter().map(move |&b| a.abs_diff(b)))
        .sum();
    Ok(total as f64 / (2.0 * n * n * mu))
}

/// Mean local clustering coefficient; nodes of degree < 2 contribute 0.
pub fn mean_clustering_coefficient(net: &SocialNetwork) -> Result<f64> {
    if net.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    let total: f64 = (0..net.len()).map(|i| local_clustering(net, i)).sum();
    Ok(total / net.len() as f64)
}

fn local_clustering(net: &SocialNetwork, i: usize) -> f64 {
    let nbrs = net.neighbors(i);
    let k = nbrs.len();
    if k < 2 {
        return 0.0;
    }
    let mut links = 0usize;
    for (x, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[x + 1..] {
            if net.neighbors(a).binary_search(&b).is_ok() {
                links += 1;
            }
        }
    }
    2.0 * links as f64 / (k * (k - 1)) as f64
}
