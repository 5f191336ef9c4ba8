//! Network diagram model: clustered black nodes with Jaccard-weighted links,
//! plus one red `DE_i` node per retrieved record, wired to its gateway persons.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cluster::{Clustering, CooccurrenceIndex};
use crate::error::{Error, Result};
use crate::network::PersonId;
use crate::rank::{RankingFunction, RankingOutcome};
use crate::records::RecordSet;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlackNode {
    pub person: PersonId,
    pub cluster: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlackLink {
    pub source: PersonId,
    pub target: PersonId,
    /// Jaccard coefficient, in (0, 1].
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedNode {
    pub label: String,
    pub basket: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedLink {
    pub red_node: String,
    pub person: PersonId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramMeta {
    pub schema_version: u32,
    pub m_ret: usize,
    pub link_threshold: f64,
    pub k: usize,
    pub ranking_fn: RankingFunction,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagramModel {
    pub black_nodes: Vec<BlackNode>,
    pub black_links: Vec<BlackLink>,
    pub red_nodes: Vec<RedNode>,
    pub red_links: Vec<RedLink>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<DiagramMeta>,
}

pub fn red_label(basket: usize) -> String {
    format!("DE_{basket}")
}

/// Builds the diagram for the top `m_ret` records of `outcome`.
///
/// Black links join every person pair whose Jaccard coefficient exceeds
/// `link_threshold` (0.0 draws every co-occurring pair).
pub fn build_diagram(
    records: &RecordSet,
    clustering: &Clustering,
    outcome: &RankingOutcome,
    m_ret: usize,
    link_threshold: f64,
) -> Result<DiagramModel> {
    if m_ret == 0 || m_ret > outcome.order.len() {
        return Err(Error::invalid(
            "mret",
            format!("must be in 1..={}", outcome.order.len()),
        ));
    }
    if !(0.0..=1.0).contains(&link_threshold) {
        return Err(Error::invalid("threshold", "must be in [0, 1]"));
    }
    let idx = CooccurrenceIndex::new(records);
    let persons = idx.persons();

    let black_nodes = persons
        .iter()
        .map(|p| {
            let cluster = clustering
                .cluster_of(p)
                .ok_or_else(|| Error::UnknownPerson(p.to_string()))?;
            Ok(BlackNode {
                person: p.clone(),
                cluster,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut black_links = Vec::new();
    for i in 0..persons.len() {
        for j in i + 1..persons.len() {
            let weight = idx.jaccard_at(i, j);
            if weight > 0.0 && weight > link_threshold || link_threshold == 1.0 && weight == 1.0 {
                black_links.push(BlackLink {
                    source: persons[i].clone(),
                    target: persons[j].clone(),
                    weight,
                });
            }
        }
    }

    let mut red_nodes = Vec::with_capacity(m_ret);
    let mut red_links = Vec::new();
    for &b in &outcome.order[..m_ret] {
        let label = red_label(b);
        for person in outcome.gateways_of(b) {
            red_links.push(RedLink {
                red_node: label.clone(),
                person: person.clone(),
            });
        }
        red_nodes.push(RedNode {
            label,
            basket: b,
            score: outcome.scores[b],
        });
    }

    Ok(DiagramModel {
        black_nodes,
        black_links,
        red_nodes,
        red_links,
        meta: Some(DiagramMeta {
            schema_version: SCHEMA_VERSION,
            m_ret,
            link_threshold,
            k: clustering.k,
            ranking_fn: outcome.function_used,
        }),
    })
}

impl DiagramModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("diagram serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Graphviz DOT rendering: black persons colored by cluster group, red
    /// `DE_i` nodes, red links to gateways.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph diagram {\n");
        out.push_str("  node [shape=circle, style=filled, fontsize=10];\n");
        for n in &self.black_nodes {
            let _ = writeln!(
                out,
                "  {} [fillcolor=black, fontcolor=white, color=black, group=\"c{}\"];",
                quote(n.person.as_str()),
                n.cluster
            );
        }
        for n in &self.red_nodes {
            let _ = writeln!(
                out,
                "  {} [fillcolor=red, fontcolor=white, color=red, shape=doublecircle];",
                quote(&n.label)
            );
        }
        for l in &self.black_links {
            let _ = writeln!(
                out,
                "  {} -- {} [color=black, penwidth={:.3}, weight={}];",
                quote(l.source.as_str()),
                quote(l.target.as_str()),
                0.5 + 2.5 * l.weight,
                l.weight
            );
        }
        for l in &self.red_links {
            let _ = writeln!(
                out,
                "  {} -- {} [color=red];",
                quote(&l.red_node),
                quote(l.person.as_str())
            );
        }
        out.push_str("}\n");
        out
    }
}

fn quote(id: &str) -> String {
    format!("\"{}\"", id.replace('\\', "\\\\").replace('"', "\\\""))
}
