//! Canonical conjunctive predicates and the slice lattice.
//!
//! A [`Predicate`] is a sorted list of [`SingletonPredicate`]s with at most
//! one entry per feature; the empty predicate is the overall slice. Slice
//! containment is predicate containment in the other direction: a slice is a
//! sub-slice of another exactly when its singleton set is a superset.

use std::collections::HashSet;
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::schema::{FeatureDomain, FeatureSchema};

/// `feature = value` for one feature of the active schema.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SingletonPredicate {
    pub feature: u32,
    pub value: u32,
}

impl SingletonPredicate {
    pub fn new(feature: u32, value: u32) -> Self {
        Self { feature, value }
    }
}

/// Canonical conjunction, sorted by `(feature, value)` with one singleton
/// per feature.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Predicate(Vec<SingletonPredicate>);

impl Predicate {
    /// The always-true predicate.
    pub fn overall() -> Self {
        Self(Vec::new())
    }

    /// Builds a predicate from singletons in any order. Returns `None` if two
    /// singletons constrain the same feature.
    pub fn from_singletons(singletons: impl IntoIterator<Item = SingletonPredicate>) -> Option<Self> {
        singletons
            .into_iter()
            .try_fold(Self::overall(), |p, s| p.conjoin(s))
    }

    pub fn singletons(&self) -> &[SingletonPredicate] {
        &self.0
    }

    pub fn cross_size(&self) -> usize {
        self.0.len()
    }

    pub fn is_overall(&self) -> bool {
        self.0.is_empty()
    }

    /// `self ∧ s`, or `None` when `self` already constrains `s.feature`.
    pub fn conjoin(&self, s: SingletonPredicate) -> Option<Predicate> {
        match self.0.binary_search_by_key(&s.feature, |x| x.feature) {
            Ok(_) => None,
            Err(pos) => {
                let mut v = Vec::with_capacity(self.0.len() + 1);
                v.extend_from_slice(&self.0[..pos]);
                v.push(s);
                v.extend_from_slice(&self.0[pos..]);
                Some(Predicate(v))
            }
        }
    }

    /// True when every singleton matches `row` (value ids indexed by feature).
    #[inline]
    pub fn matches(&self, row: &[u32]) -> bool {
        self.0.iter().all(|s| row[s.feature as usize] == s.value)
    }

    /// All predicates formed by dropping any subset of singletons, including
    /// `self` and the overall predicate.
    pub fn subsets(&self) -> impl Iterator<Item = Predicate> + '_ {
        let n = self.0.len();
        (0u32..(1u32 << n)).map(move |mask| {
            Predicate(
                self.0
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, s)| *s)
                    .collect(),
            )
        })
    }

    pub fn display<'a>(&'a self, schema: &'a FeatureSchema) -> PredicateDisplay<'a> {
        PredicateDisplay {
            predicate: self,
            schema,
        }
    }

    /// Inverse of [`Predicate::display`].
    pub fn parse(text: &str, schema: &FeatureSchema) -> Result<Predicate, ParseError> {
        let text = text.trim();
        if text == "OVERALL" {
            return Ok(Predicate::overall());
        }
        let mut singletons = Vec::new();
        for part in text.split(" AND ") {
            singletons.push(parse_singleton(part, schema)?);
        }
        Predicate::from_singletons(singletons).ok_or_else(|| ParseError::Conflict(text.to_string()))
    }
}

/// True iff `child`'s slice is contained in `parent`'s, i.e. `parent`'s
/// singletons are a subsequence of `child`'s.
pub fn is_subslice(child: &Predicate, parent: &Predicate) -> bool {
    let mut it = child.0.iter();
    parent.0.iter().all(|p| it.any(|c| c == p))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("no feature matches `{0}`")]
    UnknownFeature(String),
    #[error("value in `{0}` is not in the feature's domain")]
    UnknownValue(String),
    #[error("predicate `{0}` constrains a feature twice")]
    Conflict(String),
}

fn parse_singleton(part: &str, schema: &FeatureSchema) -> Result<SingletonPredicate, ParseError> {
    // Longest matching feature name wins so that `a` never shadows `ab`.
    let (f, rest) = schema
        .features
        .iter()
        .enumerate()
        .filter_map(|(i, spec)| part.strip_prefix(spec.name.as_str()).map(|r| (i, r)))
        .filter(|(_, r)| r.starts_with('=') || r.starts_with('∈'))
        .max_by_key(|(_, r)| std::cmp::Reverse(r.len()))
        .ok_or_else(|| ParseError::UnknownFeature(part.to_string()))?;
    let unknown = || ParseError::UnknownValue(part.to_string());
    let value = match &schema.features[f].domain {
        FeatureDomain::Categorical { values, other } => {
            if let Some(v) = rest.strip_prefix('=') {
                values.iter().position(|x| x == v).ok_or_else(unknown)? as u32
            } else if rest == "∈OTHER" && other.is_some() {
                values.len() as u32
            } else {
                return Err(unknown());
            }
        }
        domain @ FeatureDomain::Numeric { .. } => {
            let body = rest.strip_prefix("∈[").ok_or_else(unknown)?;
            let lo: f64 = body
                .split(',')
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(unknown)?;
            let bin = domain.bin_of(lo).ok_or_else(unknown)?;
            let rendered = render_bin(domain, bin).ok_or_else(unknown)?;
            if rendered != body {
                return Err(unknown());
            }
            bin
        }
    };
    Ok(SingletonPredicate::new(f as u32, value))
}

fn render_bin(domain: &FeatureDomain, bin: u32) -> Option<String> {
    let (lo, hi, closed) = domain.bin_range(bin)?;
    Some(format!("{lo},{hi}{}", if closed { ']' } else { ')' }))
}

pub struct PredicateDisplay<'a> {
    predicate: &'a Predicate,
    schema: &'a FeatureSchema,
}

impl fmt::Display for PredicateDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.predicate.is_overall() {
            return f.write_str("OVERALL");
        }
        for (i, s) in self.predicate.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            let spec = &self.schema.features[s.feature as usize];
            match &spec.domain {
                FeatureDomain::Categorical { values, .. } => match values.get(s.value as usize) {
                    Some(v) => write!(f, "{}={v}", spec.name)?,
                    None => write!(f, "{}∈OTHER", spec.name)?,
                },
                domain @ FeatureDomain::Numeric { .. } => {
                    let range = render_bin(domain, s.value).ok_or(fmt::Error)?;
                    write!(f, "{}∈[{range}", spec.name)?
                }
            }
        }
        Ok(())
    }
}

/// Every singleton predicate of the schema in `(feature, value)` order.
pub fn singletons(schema: &FeatureSchema) -> Vec<SingletonPredicate> {
    schema
        .domain_sizes()
        .into_iter()
        .enumerate()
        .flat_map(|(f, size)| (0..size as u32).map(move |v| SingletonPredicate::new(f as u32, v)))
        .collect()
}

/// Every canonical predicate of cross size `l`.
pub fn enumerate_layer(schema: &FeatureSchema, l: usize) -> impl Iterator<Item = Predicate> + '_ {
    let sizes = schema.domain_sizes();
    (0..schema.n_features())
        .combinations(l)
        .flat_map(move |features| {
            features
                .iter()
                .map(|&f| (0..sizes[f] as u32).map(move |v| SingletonPredicate::new(f as u32, v)))
                .multi_cartesian_product()
                .map(Predicate)
                .collect::<Vec<_>>()
        })
}

/// Number of predicates of each cross size `1..=max_cross_size`, from the
/// elementary symmetric polynomials of the domain sizes.
pub fn layer_sizes(schema: &FeatureSchema, max_cross_size: usize) -> Vec<u128> {
    let mut e = vec![0u128; max_cross_size + 1];
    e[0] = 1;
    for d in schema.domain_sizes() {
        for l in (1..=max_cross_size).rev() {
            e[l] += e[l - 1] * d as u128;
        }
    }
    e.remove(0);
    e
}

/// Candidates of cross size `1..=max_cross_size`.
pub fn batch_space_size(schema: &FeatureSchema, max_cross_size: usize) -> u128 {
    layer_sizes(schema, max_cross_size).iter().sum()
}

/// Predicates whose sub-slices must not be generated: the significant set
/// and the too-small set.
///
/// Membership is a hash set; a covering query enumerates the `2^|P|` subsets
/// of the probe, which is cheap for the small cross sizes in play.
#[derive(Clone, Debug, Default)]
pub struct PruneIndex {
    members: HashSet<Predicate>,
}

impl PruneIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, p: Predicate) -> bool {
        self.members.insert(p)
    }

    pub fn contains(&self, p: &Predicate) -> bool {
        self.members.contains(p)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// True if `p` is a sub-slice of (or equal to) some member.
    pub fn covers(&self, p: &Predicate) -> bool {
        if self.members.is_empty() {
            return false;
        }
        if p.cross_size() > 16 {
            return self.members.iter().any(|m| is_subslice(p, m));
        }
        p.subsets().any(|s| self.members.contains(&s))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Expansion {
    pub candidates: Vec<Predicate>,
    /// Children skipped because a pruned predicate covers them.
    pub pruned: usize,
}

/// One-singleton refinements of `base` that are consistent, not covered by
/// `prune`, at most `max_cross_size` wide and not yet in `seen`. Returned
/// candidates are added to `seen`.
pub fn expand(
    base: &Predicate,
    singletons: &[SingletonPredicate],
    prune: &PruneIndex,
    max_cross_size: usize,
    seen: &mut HashSet<Predicate>,
) -> Expansion {
    let mut out = Expansion::default();
    if base.cross_size() >= max_cross_size {
        return out;
    }
    for &s in singletons {
        let Some(child) = base.conjoin(s) else { continue };
        if seen.contains(&child) {
            continue;
        }
        if prune.covers(&child) {
            out.pruned += 1;
            continue;
        }
        seen.insert(child.clone());
        out.candidates.push(child);
    }
    out
}
