use std::sync::Arc;

use indexmap::IndexMap;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::document::NodeName;
use crate::range::Range;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Constant,
    Theory,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Constant => "constant",
            EntityKind::Theory => "theory",
        }
    }
}

/// A named formal entity and where it was defined.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Entity {
    pub name: String,
    pub kind: EntityKind,
    pub def_node: NodeName,
    pub def_range: Range,
    /// Bound value of a constant.
    pub value: Option<BigUint>,
}

/// Names that were offered instead of a failed lookup.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Alternatives {
    pub names: Vec<String>,
    pub truncated: bool,
}

/// Insertion-ordered name space with exact-match lookup.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Namespace {
    entries: IndexMap<String, Arc<Entity>>,
}

fn common_prefix_len(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}

impl Namespace {
    pub fn new() -> Self {
        Namespace::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&Arc<Entity>> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Arc<Entity>> {
        self.entries.values()
    }

    /// Adds an entity; returns false (and changes nothing) if the name is taken.
    pub fn define(&mut self, entity: Entity) -> bool {
        if self.entries.contains_key(&entity.name) {
            return false;
        }
        self.entries.insert(entity.name.clone(), Arc::new(entity));
        true
    }

    /// Adds all entries of `other` whose names are not yet present.
    pub fn absorb(&mut self, other: &Namespace) {
        for (k, v) in &other.entries {
            self.entries.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }

    /// Exact lookup. On a miss, proposes alternatives:
    ///
    /// - `name_` (trailing underscores): every name with the stripped prefix;
    /// - `__`: every name;
    /// - otherwise: the names sharing the longest common prefix (at least
    ///   one character) with `name`.
    ///
    /// Alternatives are sorted and truncated to `limit`.
    pub fn lookup(&self, name: &str, limit: usize) -> Result<Arc<Entity>, Alternatives> {
        if let Some(e) = self.entries.get(name) {
            return Ok(e.clone());
        }
        let mut names: Vec<&str> = if name == "__" {
            self.names().collect()
        } else if name.ends_with('_') {
            let stem = name.trim_end_matches('_');
            self.names().filter(|n| n.starts_with(stem)).collect()
        } else {
            let best = self.names().map(|n| common_prefix_len(n, name)).max().unwrap_or(0);
            if best == 0 {
                Vec::new()
            } else {
                self.names().filter(|n| common_prefix_len(n, name) == best).collect()
            }
        };
        names.sort_unstable();
        let limit = limit.max(1);
        let truncated = names.len() > limit;
        names.truncate(limit);
        Err(Alternatives { names: names.into_iter().map(String::from).collect(), truncated })
    }
}
