//! Reference relation tables for rank 2 shipped with the crate, and a set
//! diff against computed censuses.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freegroup::{has_prefix, Letter, SphereIndexing, Word};
use crate::relations::Relation;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldenSet {
    Words(Vec<Word>),
    AllExcept(Vec<Word>),
    StartsWith(String),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct GoldenRow {
    pub row: usize,
    pub gamma: Word,
    pub s: Word,
    #[serde(rename = "S")]
    pub set: GoldenSet,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct GoldenTable {
    pub table: String,
    pub k: usize,
    pub product_length: usize,
    pub rows: Vec<GoldenRow>,
}

/// `(γ, s, S)` with `S` as sorted sphere indices.
pub type Triple = (String, String, Vec<usize>);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableId {
    K2LengthZero,
    K2LengthOne,
    K2LengthTwo,
    K3LengthZero,
}

impl TableId {
    pub const ALL: [TableId; 4] = [
        TableId::K2LengthZero,
        TableId::K2LengthOne,
        TableId::K2LengthTwo,
        TableId::K3LengthZero,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            TableId::K2LengthZero => "k2_length0.json",
            TableId::K2LengthOne => "k2_length1.json",
            TableId::K2LengthTwo => "k2_length2.json",
            TableId::K3LengthZero => "k3_length0.json",
        }
    }

    fn source(self) -> &'static str {
        match self {
            TableId::K2LengthZero => include_str!("../tables/k2_length0.json"),
            TableId::K2LengthOne => include_str!("../tables/k2_length1.json"),
            TableId::K2LengthTwo => include_str!("../tables/k2_length2.json"),
            TableId::K3LengthZero => include_str!("../tables/k3_length0.json"),
        }
    }
}

pub fn load(id: TableId) -> Result<GoldenTable> {
    serde_json::from_str(id.source()).map_err(|e| Error::Golden {
        table: id.file_name().into(),
        reason: e.to_string(),
    })
}

/// Tables for a given radius, in file order.
pub fn tables_for_radius(k: usize) -> Result<Vec<GoldenTable>> {
    TableId::ALL
        .iter()
        .map(|&id| load(id))
        .filter(|t| t.as_ref().map_or(true, |t| t.k == k))
        .collect()
}

fn index_set(table: &GoldenTable, row: &GoldenRow, indexing: &SphereIndexing) -> Result<Vec<usize>> {
    let err = |reason: String| Error::Golden {
        table: table.table.clone(),
        reason: format!("row {}: {reason}", row.row),
    };
    let lookup = |w: &Word| {
        indexing
            .index_of(w)
            .ok_or_else(|| err(format!("{w} is not a sphere word of radius {}", indexing.radius())))
    };
    let set: BTreeSet<usize> = match &row.set {
        GoldenSet::Words(ws) => ws.iter().map(lookup).collect::<Result<_>>()?,
        GoldenSet::AllExcept(ws) => {
            let excluded: BTreeSet<usize> = ws.iter().map(lookup).collect::<Result<_>>()?;
            (1..=indexing.d()).filter(|i| !excluded.contains(i)).collect()
        }
        GoldenSet::StartsWith(sym) => {
            let mut chars = sym.chars();
            let letter = match (chars.next().and_then(Letter::from_symbol), chars.next()) {
                (Some(l), None) => l,
                _ => return Err(err(format!("bad letter {sym:?}"))),
            };
            let prefix = Word::letter(letter);
            (1..=indexing.d())
                .filter(|&i| has_prefix(indexing.word(i), &prefix))
                .collect()
        }
    };
    Ok(set.into_iter().collect())
}

/// Normalizes every row to a [`Triple`].
pub fn normalize(table: &GoldenTable, indexing: &SphereIndexing) -> Result<Vec<Triple>> {
    if table.k != indexing.radius() {
        return Err(Error::Golden {
            table: table.table.clone(),
            reason: format!("radius {} does not match indexing radius {}", table.k, indexing.radius()),
        });
    }
    table
        .rows
        .iter()
        .map(|r| Ok((r.gamma.to_string(), r.s.to_string(), index_set(table, r, indexing)?)))
        .collect()
}

pub fn relation_triple(r: &Relation) -> Triple {
    (r.gamma.to_string(), r.s.to_string(), r.s_set.clone())
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct GoldenDiff {
    pub expected: usize,
    pub actual: usize,
    pub missing: Vec<Triple>,
    pub unexpected: Vec<Triple>,
}

impl GoldenDiff {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.unexpected.is_empty() && self.expected == self.actual
    }
}

/// Set comparison of reference triples against computed relations.
pub fn diff<'a, I>(expected: &[Triple], relations: I) -> GoldenDiff
where
    I: IntoIterator<Item = &'a Relation>,
{
    let want: BTreeSet<Triple> = expected.iter().cloned().collect();
    let have: BTreeSet<Triple> = relations.into_iter().map(relation_triple).collect();
    GoldenDiff {
        expected: expected.len(),
        actual: have.len(),
        missing: want.difference(&have).cloned().collect(),
        unexpected: have.difference(&want).cloned().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freegroup::enumerate_sphere;

    #[test]
    fn tables_parse() {
        for id in TableId::ALL {
            let t = load(id).unwrap();
            assert!(!t.rows.is_empty());
        }
        assert_eq!(tables_for_radius(2).unwrap().len(), 3);
        assert_eq!(tables_for_radius(3).unwrap().len(), 1);
    }

    #[test]
    fn normalized_sets_have_expected_sizes() {
        let ix2 = enumerate_sphere(2, 2).unwrap();
        let sizes: Vec<usize> = tables_for_radius(2)
            .unwrap()
            .iter()
            .flat_map(|t| normalize(t, &ix2).unwrap())
            .map(|(_, _, s)| s.len())
            .collect();
        assert_eq!(sizes.len(), 48);
        assert!(sizes[..12].iter().all(|&n| n == 3));
        assert!(sizes[12..24].iter().all(|&n| n == 9));
        assert!(sizes[24..].iter().all(|&n| n == 11));
    }

    #[test]
    fn census_matches_reference() {
        let ix2 = enumerate_sphere(2, 2).unwrap();
        let want: Vec<Triple> = tables_for_radius(2)
            .unwrap()
            .iter()
            .flat_map(|t| normalize(t, &ix2).unwrap())
            .collect();
        let census = crate::relations::enumerate_relations(2, 2).unwrap();
        let d = diff(&want, &census.relations);
        assert!(d.is_clean(), "{d:?}");

        let ix3 = enumerate_sphere(2, 3).unwrap();
        let want3 = normalize(&load(TableId::K3LengthZero).unwrap(), &ix3).unwrap();
        let rels = crate::relations::census_for_k3_length0().unwrap();
        let d3 = diff(&want3, &rels);
        assert!(d3.is_clean(), "{d3:?}");
    }

    #[test]
    fn radius_mismatch_is_reported() {
        let ix3 = enumerate_sphere(2, 3).unwrap();
        let t = load(TableId::K2LengthZero).unwrap();
        assert!(matches!(normalize(&t, &ix3), Err(Error::Golden { .. })));
    }
}
