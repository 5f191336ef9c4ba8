//! Co-occurrence records ("market baskets") and the `;`-separated record file format.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::PersonId;

/// One observed record: the set of persons seen together. Order-free.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BTreeSet<PersonId>", into = "BTreeSet<PersonId>")]
pub struct Basket(BTreeSet<PersonId>);

impl Basket {
    pub fn new(members: impl IntoIterator<Item = PersonId>) -> Result<Self> {
        let set: BTreeSet<PersonId> = members.into_iter().collect();
        if set.is_empty() {
            return Err(Error::invalid(
                "basket",
                "a basket needs at least one member",
            ));
        }
        Ok(Basket(set))
    }

    pub fn members(&self) -> &BTreeSet<PersonId> {
        &self.0
    }

    pub fn contains(&self, p: &PersonId) -> bool {
        self.0.contains(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PersonId> {
        self.0.iter()
    }

    /// Removes `p`; returns `None` when nothing remains.
    pub fn without(&self, p: &PersonId) -> Option<Basket> {
        let mut set = self.0.clone();
        set.remove(p);
        (!set.is_empty()).then_some(Basket(set))
    }
}

impl TryFrom<BTreeSet<PersonId>> for Basket {
    type Error = Error;

    fn try_from(set: BTreeSet<PersonId>) -> Result<Self> {
        Basket::new(set)
    }
}

impl From<Basket> for BTreeSet<PersonId> {
    fn from(b: Basket) -> Self {
        b.0
    }
}

/// Ordered list of baskets; the index is bookkeeping only.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordSet {
    baskets: Vec<Basket>,
}

impl RecordSet {
    pub fn new(baskets: Vec<Basket>) -> Self {
        RecordSet { baskets }
    }

    /// Parses the record file format: one basket per line, members separated
    /// by `;`, whitespace around members trimmed. Blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut baskets = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let members = line
                .split(';')
                .map(|m| {
                    PersonId::new(m.trim()).map_err(|_| Error::Parse {
                        line: i + 1,
                        message: "empty member name".into(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            baskets.push(Basket::new(members)?);
        }
        Ok(RecordSet { baskets })
    }

    /// Serializes to the record file format (members in sorted order).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for b in &self.baskets {
            let line: Vec<&str> = b.iter().map(PersonId::as_str).collect();
            out.push_str(&line.join(";"));
            out.push('\n');
        }
        out
    }

    pub fn baskets(&self) -> &[Basket] {
        &self.baskets
    }

    pub fn len(&self) -> usize {
        self.baskets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.baskets.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Basket> {
        self.baskets.iter()
    }

    /// Distinct persons across all baskets, sorted.
    pub fn persons(&self) -> BTreeSet<PersonId> {
        self.baskets
            .iter()
            .flat_map(|b| b.iter().cloned())
            .collect()
    }

    pub fn mean_basket_size(&self) -> f64 {
        if self.baskets.is_empty() {
            return 0.0;
        }
        self.baskets.iter().map(Basket::len).sum::<usize>() as f64 / self.baskets.len() as f64
    }
}

impl std::ops::Index<usize> for RecordSet {
    type Output = Basket;

    fn index(&self, i: usize) -> &Basket {
        &self.baskets[i]
    }
}

impl FromIterator<Basket> for RecordSet {
    fn from_iter<I: IntoIterator<Item = Basket>>(iter: I) -> Self {
        RecordSet {
            baskets: iter.into_iter().collect(),
        }
    }
}
