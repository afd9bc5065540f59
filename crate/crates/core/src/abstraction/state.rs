use std::fmt;

use serde::{Deserialize, Serialize};

use super::AbstractionError;

/// An abstract state: one value per schema attribute. Booleans are 0/1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AbstractState(pub Vec<u32>);

impl AbstractState {
    pub fn new(values: Vec<u32>) -> Self {
        AbstractState(values)
    }

    pub fn values(&self) -> &[u32] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for AbstractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Per-attribute `(from, to)` changes between two abstract states; `None`
/// marks an unchanged attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttributeDiff(pub Vec<Option<(u32, u32)>>);

impl AttributeDiff {
    pub fn empty(arity: usize) -> Self {
        AttributeDiff(vec![None; arity])
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(Option::is_none)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, u32, u32)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.map(|(from, to)| (i, from, to)))
    }

    /// True when every present entry's from-value matches `s`.
    pub fn applies_to(&self, s: &AbstractState) -> bool {
        self.0.len() == s.arity() && self.entries().all(|(i, from, _)| s.0[i] == from)
    }
}

impl fmt::Display for AttributeDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (n, (i, from, to)) in self.entries().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}:{from}>{to}")?;
        }
        write!(f, "]")
    }
}

pub fn diff(a: &AbstractState, b: &AbstractState) -> Result<AttributeDiff, AbstractionError> {
    if a.arity() != b.arity() {
        return Err(AbstractionError::Arity {
            expected: a.arity(),
            found: b.arity(),
        });
    }
    Ok(AttributeDiff(
        a.0.iter()
            .zip(&b.0)
            .map(|(&x, &y)| if x != y { Some((x, y)) } else { None })
            .collect(),
    ))
}

pub fn apply_diff(s: &AbstractState, d: &AttributeDiff) -> Result<AbstractState, AbstractionError> {
    if s.arity() != d.0.len() {
        return Err(AbstractionError::Arity {
            expected: s.arity(),
            found: d.0.len(),
        });
    }
    let mut out = s.clone();
    for (i, from, to) in d.entries() {
        if s.0[i] != from {
            return Err(AbstractionError::Inapplicable {
                attribute: i,
                expected: from,
                found: s.0[i],
            });
        }
        out.0[i] = to;
    }
    Ok(out)
}
