//! Amalgamated unions: gluing two spaces along an isometrically identified
//! common part.
//!
//! The glued distance between x on one side and y on the other is the
//! shortest route through the common part,
//! d(x,y) = min over z of (d₁(x,z) + d₂(z,y)), the minimum over a finite
//! identification set.  Both sides embed isometrically into the result and
//! distances to identified points are preserved on the nose.

use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;

use crate::isometry::PartialIsometry;
use crate::scalar::Scalar;
use crate::space::FiniteMetricSpace;

/// Why a gluing request is rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmalgamError<T: Scalar> {
    #[error("empty amalgam: no points are identified")]
    EmptyAmalgam,
    /// First pair of identification rows whose two sides disagree on a
    /// distance, in pair-list order.
    #[error(
        "non-isometric amalgam pairs ({x1},{y1})~({x2},{y2}): {d1} on the first side, {d2} on the second"
    )]
    NonIsometricAmalgamPairs {
        x1: String,
        y1: String,
        x2: String,
        y2: String,
        d1: T,
        d2: T,
    },
    #[error("unknown label {label}")]
    UnknownLabel { label: String },
    #[error("label {label} appears twice in the identification")]
    DuplicatePairLabel { label: String },
}

/// Two spaces plus the list of identified label pairs (first-side label,
/// second-side label).
#[derive(Debug, Clone)]
pub struct AmalgamSpec<T: Scalar> {
    pub m1: Arc<FiniteMetricSpace<T>>,
    pub m2: Arc<FiniteMetricSpace<T>>,
    pub pairs: Vec<(String, String)>,
}

/// How to rename points when the two non-identified parts use the same
/// label.  Identified points always keep the first side's label.
#[derive(Debug, Clone)]
pub struct NamingPolicy {
    pub suffix1: String,
    pub suffix2: String,
}

impl Default for NamingPolicy {
    fn default() -> Self {
        NamingPolicy {
            suffix1: ".1".to_string(),
            suffix2: ".2".to_string(),
        }
    }
}

/// The glued space together with the two isometric injections.
#[derive(Debug, Clone)]
pub struct AmalgamResult<T: Scalar> {
    pub space: Arc<FiniteMetricSpace<T>>,
    pub h1: PartialIsometry<T>,
    pub h2: PartialIsometry<T>,
}

fn fresh_name(base: &str, suffix: &str, taken: &HashSet<String>) -> String {
    let mut name = format!("{base}{suffix}");
    while taken.contains(&name) {
        name = format!("{name}{suffix}");
    }
    name
}

/// Glues `spec.m1` and `spec.m2` along the identified pairs.
///
/// The result keeps every first-side label; second-side points that are not
/// identified come in after them, renamed by `policy` on collision (the
/// suffix is repeated until the name is fresh).  Cross distances take the
/// minimum route through the identification.  The two returned maps send
/// each original space onto its copy and are always isometric embeddings.
pub fn amalgamated_union<T: Scalar>(
    spec: &AmalgamSpec<T>,
    policy: &NamingPolicy,
) -> Result<AmalgamResult<T>, AmalgamError<T>> {
    let m1 = &spec.m1;
    let m2 = &spec.m2;
    if spec.pairs.is_empty() {
        return Err(AmalgamError::EmptyAmalgam);
    }
    let mut seen1: HashSet<&str> = HashSet::new();
    let mut seen2: HashSet<&str> = HashSet::new();
    for (l1, l2) in &spec.pairs {
        if !m1.contains_label(l1) {
            return Err(AmalgamError::UnknownLabel { label: l1.clone() });
        }
        if !m2.contains_label(l2) {
            return Err(AmalgamError::UnknownLabel { label: l2.clone() });
        }
        if !seen1.insert(l1) {
            return Err(AmalgamError::DuplicatePairLabel { label: l1.clone() });
        }
        if !seen2.insert(l2) {
            return Err(AmalgamError::DuplicatePairLabel { label: l2.clone() });
        }
    }
    for i in 0..spec.pairs.len() {
        for j in (i + 1)..spec.pairs.len() {
            let (x1, x2) = &spec.pairs[i];
            let (y1, y2) = &spec.pairs[j];
            let d1 = m1.dist_by_label(x1, y1).expect("checked above");
            let d2 = m2.dist_by_label(x2, y2).expect("checked above");
            if d1 != d2 {
                return Err(AmalgamError::NonIsometricAmalgamPairs {
                    x1: x1.clone(),
                    y1: y1.clone(),
                    x2: x2.clone(),
                    y2: y2.clone(),
                    d1: d1.clone(),
                    d2: d2.clone(),
                });
            }
        }
    }

    // Second-side identified labels, and the first-side label each maps to.
    let ident2: Vec<(&str, &str)> = spec
        .pairs
        .iter()
        .map(|(l1, l2)| (l2.as_str(), l1.as_str()))
        .collect();
    let is_identified2 =
        |l: &str| ident2.iter().any(|(l2, _)| *l2 == l);

    // Result labels: all of m1 (first-side non-identified points may need a
    // rename), then the non-identified part of m2 in its own order.
    let extra2: Vec<&String> = m2
        .labels()
        .iter()
        .filter(|l| !is_identified2(l))
        .collect();
    let extra2_set: HashSet<&str> = extra2.iter().map(|l| l.as_str()).collect();

    // Original-label collisions between the two free parts: both copies are
    // renamed, the first side by suffix1 and the second by suffix2.  A free
    // second-side label that matches an identified first-side label is
    // renamed alone, since identified points always keep the first side's
    // name.  Renames must be fresh against every original label of either
    // side, not just the ones emitted so far.
    let colliding: HashSet<&str> = m1
        .labels()
        .iter()
        .filter(|l| !seen1.contains(l.as_str()) && extra2_set.contains(l.as_str()))
        .map(|l| l.as_str())
        .collect();
    let mut reserved: HashSet<String> = m1.labels().iter().cloned().collect();
    reserved.extend(extra2.iter().map(|l| (*l).clone()));

    let mut labels1: Vec<String> = Vec::with_capacity(m1.len());
    for l in m1.labels() {
        let name = if colliding.contains(l.as_str()) {
            let n = fresh_name(l, &policy.suffix1, &reserved);
            reserved.insert(n.clone());
            n
        } else {
            l.clone()
        };
        labels1.push(name);
    }
    let mut labels2: Vec<String> = Vec::with_capacity(extra2.len());
    for l in &extra2 {
        let name = if colliding.contains(l.as_str()) || m1.contains_label(l) {
            let n = fresh_name(l, &policy.suffix2, &reserved);
            reserved.insert(n.clone());
            n
        } else {
            (*l).clone()
        };
        labels2.push(name);
    }

    let n1 = m1.len();
    let n = n1 + extra2.len();
    let extra2_idx: Vec<usize> = extra2
        .iter()
        .map(|l| m2.index_of(l).expect("label from m2 itself"))
        .collect();
    let glue: Vec<(usize, usize)> = spec
        .pairs
        .iter()
        .map(|(l1, l2)| {
            (
                m1.index_of(l1).expect("checked above"),
                m2.index_of(l2).expect("checked above"),
            )
        })
        .collect();

    let mut labels: Vec<String> = labels1.clone();
    labels.extend(labels2.iter().cloned());
    let mut rows: Vec<Vec<T>> = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let v = if i < n1 && j < n1 {
                m1.dist(i, j).clone()
            } else if i >= n1 && j >= n1 {
                m2.dist(extra2_idx[i - n1], extra2_idx[j - n1]).clone()
            } else {
                let (i1, j2) = if i < n1 {
                    (i, extra2_idx[j - n1])
                } else {
                    (j, extra2_idx[i - n1])
                };
                glue.iter()
                    .map(|(z1, z2)| m1.dist(i1, *z1).clone() + m2.dist(*z2, j2).clone())
                    .min()
                    .expect("identification is nonempty")
            };
            rows[i][j] = v;
        }
    }

    let space = Arc::new(
        FiniteMetricSpace::validate_metric(labels, rows)
            .expect("amalgamated distances always form a metric"),
    );

    let pairs1: Vec<(String, String)> = m1
        .labels()
        .iter()
        .zip(labels1.iter())
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect();
    let mut pairs2: Vec<(String, String)> = Vec::with_capacity(m2.len());
    for l in m2.labels() {
        if let Some((_, first)) = ident2.iter().find(|(l2, _)| *l2 == l.as_str()) {
            let i1 = m1.index_of(first).expect("checked above");
            pairs2.push((l.clone(), labels1[i1].clone()));
        } else {
            let pos = extra2
                .iter()
                .position(|e| e.as_str() == l.as_str())
                .expect("non-identified label");
            pairs2.push((l.clone(), labels2[pos].clone()));
        }
    }
    let h1 = PartialIsometry::new(Arc::clone(m1), Arc::clone(&space), pairs1)
        .expect("h1 pairs are well-formed by construction");
    let h2 = PartialIsometry::new(Arc::clone(m2), Arc::clone(&space), pairs2)
        .expect("h2 pairs are well-formed by construction");
    Ok(AmalgamResult { space, h1, h2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isometry::find_embeddings;
    use crate::test_support::{rat, space_from_ints};
    use proptest::prelude::*;

    fn spec_of(
        m1: FiniteMetricSpace<crate::Rational>,
        m2: FiniteMetricSpace<crate::Rational>,
        pairs: &[(&str, &str)],
    ) -> AmalgamSpec<crate::Rational> {
        AmalgamSpec {
            m1: Arc::new(m1),
            m2: Arc::new(m2),
            pairs: pairs
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }

    #[test]
    fn single_anchor_adds_routes() {
        let spec = spec_of(
            space_from_ints(&["a", "x"], &[&[0, 1], &[1, 0]]).unwrap(),
            space_from_ints(&["a", "y"], &[&[0, 2], &[2, 0]]).unwrap(),
            &[("a", "a")],
        );
        let out = amalgamated_union(&spec, &NamingPolicy::default()).unwrap();
        assert_eq!(out.space.len(), 3);
        assert_eq!(*out.space.dist_by_label("x", "y").unwrap(), rat(3, 1));
        assert!(out.h1.is_isometric_embedding().is_ok());
        assert!(out.h2.is_isometric_embedding().is_ok());
    }

    #[test]
    fn two_anchors_take_the_shorter_route() {
        let spec = spec_of(
            space_from_ints(
                &["a", "b", "x"],
                &[&[0, 2, 1], &[2, 0, 3], &[1, 3, 0]],
            )
            .unwrap(),
            space_from_ints(
                &["a", "b", "y"],
                &[&[0, 2, 4], &[2, 0, 2], &[4, 2, 0]],
            )
            .unwrap(),
            &[("a", "a"), ("b", "b")],
        );
        let out = amalgamated_union(&spec, &NamingPolicy::default()).unwrap();
        assert_eq!(*out.space.dist_by_label("x", "y").unwrap(), rat(5, 1));
        assert!(out.space.recheck().is_ok());
        assert!(out.h1.is_isometric_embedding().is_ok());
        assert!(out.h2.is_isometric_embedding().is_ok());
    }

    #[test]
    fn full_overlap_reproduces_the_first_side() {
        let m = space_from_ints(&["a", "b", "c"], &[&[0, 1, 2], &[1, 0, 1], &[2, 1, 0]])
            .unwrap();
        let spec = spec_of(m.clone(), m.clone(), &[("a", "a"), ("b", "b"), ("c", "c")]);
        let out = amalgamated_union(&spec, &NamingPolicy::default()).unwrap();
        assert_eq!(*out.space, m);
    }

    #[test]
    fn empty_identification_is_rejected() {
        let m = space_from_ints(&["a"], &[&[0]]).unwrap();
        let spec = spec_of(m.clone(), m, &[]);
        assert!(matches!(
            amalgamated_union(&spec, &NamingPolicy::default()),
            Err(AmalgamError::EmptyAmalgam)
        ));
    }

    #[test]
    fn disagreeing_identification_carries_both_distances() {
        let spec = spec_of(
            space_from_ints(&["a", "b"], &[&[0, 1], &[1, 0]]).unwrap(),
            space_from_ints(&["a", "b"], &[&[0, 2], &[2, 0]]).unwrap(),
            &[("a", "a"), ("b", "b")],
        );
        match amalgamated_union(&spec, &NamingPolicy::default()).unwrap_err() {
            AmalgamError::NonIsometricAmalgamPairs { d1, d2, .. } => {
                assert_eq!(d1, rat(1, 1));
                assert_eq!(d2, rat(2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn colliding_free_labels_get_suffixes() {
        let spec = spec_of(
            space_from_ints(&["a", "w"], &[&[0, 1], &[1, 0]]).unwrap(),
            space_from_ints(&["b", "w"], &[&[0, 2], &[2, 0]]).unwrap(),
            &[("a", "b")],
        );
        let out = amalgamated_union(&spec, &NamingPolicy::default()).unwrap();
        let mut labels = out.space.labels().to_vec();
        labels.sort();
        assert_eq!(labels, vec!["a", "w.1", "w.2"]);
        assert_eq!(out.h1.image_of("w"), Some("w.1"));
        assert_eq!(out.h2.image_of("w"), Some("w.2"));
        assert_eq!(out.h2.image_of("b"), Some("a"));
    }

    #[test]
    fn suffix_repeats_until_fresh() {
        let spec = spec_of(
            space_from_ints(&["a", "w", "w.1"], &[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]])
                .unwrap(),
            space_from_ints(&["b", "w"], &[&[0, 2], &[2, 0]]).unwrap(),
            &[("a", "b")],
        );
        let out = amalgamated_union(&spec, &NamingPolicy::default()).unwrap();
        assert!(out.space.contains_label("w.1.1"));
        assert!(out.space.contains_label("w.2"));
    }

    #[test]
    fn swapping_the_sides_gives_an_isometric_result() {
        let m1 = space_from_ints(
            &["a", "b", "x"],
            &[&[0, 2, 1], &[2, 0, 3], &[1, 3, 0]],
        )
        .unwrap();
        let m2 = space_from_ints(
            &["a", "b", "y"],
            &[&[0, 2, 4], &[2, 0, 2], &[4, 2, 0]],
        )
        .unwrap();
        let fwd = spec_of(m1.clone(), m2.clone(), &[("a", "a"), ("b", "b")]);
        let bwd = spec_of(m2, m1, &[("a", "a"), ("b", "b")]);
        let out_f = amalgamated_union(&fwd, &NamingPolicy::default()).unwrap();
        let out_b = amalgamated_union(&bwd, &NamingPolicy::default()).unwrap();
        assert_eq!(out_f.space.len(), out_b.space.len());
        let embeddings = find_embeddings(&out_f.space, &out_b.space, Some(1));
        assert_eq!(embeddings.len(), 1, "the two gluings must be isometric");
    }

    /// A pair of triangles sharing an edge of the same length, glued along
    /// that edge.
    fn shared_edge_instance() -> impl Strategy<Value = AmalgamSpec<crate::Rational>> {
        (1i64..=6, 1i64..=6, 1i64..=6, 1i64..=6, 1i64..=6)
            .prop_filter("triangles", |(ab, ax, bx, ay, by)| {
                ab + ax >= *bx
                    && ab + bx >= *ax
                    && ax + bx >= *ab
                    && ab + ay >= *by
                    && ab + by >= *ay
                    && ay + by >= *ab
            })
            .prop_map(|(ab, ax, bx, ay, by)| {
                spec_of(
                    space_from_ints(
                        &["a", "b", "x"],
                        &[&[0, ab, ax], &[ab, 0, bx], &[ax, bx, 0]],
                    )
                    .unwrap(),
                    space_from_ints(
                        &["a", "b", "y"],
                        &[&[0, ab, ay], &[ab, 0, by], &[ay, by, 0]],
                    )
                    .unwrap(),
                    &[("a", "a"), ("b", "b")],
                )
            })
    }

    proptest! {
        /// The glued space is a metric and both sides embed isometrically.
        #[test]
        fn gluing_is_sound(spec in shared_edge_instance()) {
            let out = amalgamated_union(&spec, &NamingPolicy::default()).unwrap();
            prop_assert!(out.space.recheck().is_ok());
            prop_assert!(out.h1.is_isometric_embedding().is_ok());
            prop_assert!(out.h2.is_isometric_embedding().is_ok());
            prop_assert!(out.h1.is_total_on_source());
            prop_assert!(out.h2.is_total_on_source());
        }

        /// Distances from any first-side point to every identified point
        /// are carried over unchanged.
        #[test]
        fn anchor_distances_are_fixed(spec in shared_edge_instance()) {
            let out = amalgamated_union(&spec, &NamingPolicy::default()).unwrap();
            for x in spec.m1.labels() {
                for (z1, _) in &spec.pairs {
                    let before = spec.m1.dist_by_label(x, z1).unwrap();
                    let after = out
                        .space
                        .dist_by_label(
                            out.h1.image_of(x).unwrap(),
                            out.h1.image_of(z1).unwrap(),
                        )
                        .unwrap();
                    prop_assert_eq!(before, after);
                }
            }
        }
    }
}
