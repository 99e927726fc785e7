//! Partial isometries between labeled spaces, and the brute-force embedding
//! oracle used to cross-check cleverer searches.
//!
//! A partial isometry is a partial bijection on labels; whether it actually
//! preserves distances is a separate, decidable question answered by
//! [`PartialIsometry::is_isometric_embedding`].  Keeping construction and
//! verification apart lets tests build deliberately broken maps and watch
//! the checker catch them.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::space::FiniteMetricSpace;

/// Why a pairing fails to be a well-formed partial isometry, or fails to
/// preserve distances.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsometryError<T: Scalar> {
    #[error("unknown label {label}")]
    UnknownLabel { label: String },
    #[error("source label {label} is paired twice")]
    DuplicateSourceLabel { label: String },
    #[error("target label {label} is paired twice")]
    DuplicateTargetLabel { label: String },
    /// First pair of source points whose distance is not preserved, in
    /// pair-list order.
    #[error(
        "distance mismatch on ({a},{b}): source {source_distance} != target {target_distance}"
    )]
    DistanceMismatch {
        a: String,
        b: String,
        source_distance: T,
        target_distance: T,
    },
}

/// A partial bijection between the label sets of two spaces.
#[derive(Debug, Clone)]
pub struct PartialIsometry<T: Scalar> {
    source: Arc<FiniteMetricSpace<T>>,
    target: Arc<FiniteMetricSpace<T>>,
    pairs: Vec<(String, String)>,
}

impl<T: Scalar> PartialIsometry<T> {
    /// Builds a pairing after checking that every label exists and that the
    /// pairing is injective in both coordinates.  Distance preservation is
    /// *not* checked here — see [`Self::is_isometric_embedding`].
    pub fn new(
        source: Arc<FiniteMetricSpace<T>>,
        target: Arc<FiniteMetricSpace<T>>,
        pairs: Vec<(String, String)>,
    ) -> Result<Self, IsometryError<T>> {
        let mut seen_src: HashMap<&str, ()> = HashMap::new();
        let mut seen_tgt: HashMap<&str, ()> = HashMap::new();
        for (a, b) in &pairs {
            if !source.contains_label(a) {
                return Err(IsometryError::UnknownLabel { label: a.clone() });
            }
            if !target.contains_label(b) {
                return Err(IsometryError::UnknownLabel { label: b.clone() });
            }
            if seen_src.insert(a, ()).is_some() {
                return Err(IsometryError::DuplicateSourceLabel { label: a.clone() });
            }
            if seen_tgt.insert(b, ()).is_some() {
                return Err(IsometryError::DuplicateTargetLabel { label: b.clone() });
            }
        }
        Ok(PartialIsometry {
            source,
            target,
            pairs,
        })
    }

    pub fn source(&self) -> &Arc<FiniteMetricSpace<T>> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FiniteMetricSpace<T>> {
        &self.target
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Image of a source label, if paired.
    pub fn image_of(&self, label: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(a, _)| a == label)
            .map(|(_, b)| b.as_str())
    }

    /// Preimage of a target label, if paired.
    pub fn preimage_of(&self, label: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(_, b)| b == label)
            .map(|(a, _)| a.as_str())
    }

    /// True when every source point is paired.
    pub fn is_total_on_source(&self) -> bool {
        self.pairs.len() == self.source.len()
    }

    /// True when every target point is hit.
    pub fn is_surjective_onto_target(&self) -> bool {
        self.pairs.len() == self.target.len()
    }

    /// Ok iff the pairing preserves every pairwise distance exactly.
    ///
    /// On failure, returns the first violating pair of source points in
    /// pair-list order, with both distances as witnesses.
    pub fn is_isometric_embedding(&self) -> Result<(), IsometryError<T>> {
        for i in 0..self.pairs.len() {
            for j in (i + 1)..self.pairs.len() {
                let (a, a2) = &self.pairs[i];
                let (b, b2) = &self.pairs[j];
                let ds = self
                    .source
                    .dist_by_label(a, b)
                    .map_err(|_| IsometryError::UnknownLabel { label: a.clone() })?;
                let dt = self
                    .target
                    .dist_by_label(a2, b2)
                    .map_err(|_| IsometryError::UnknownLabel { label: a2.clone() })?;
                if ds != dt {
                    return Err(IsometryError::DistanceMismatch {
                        a: a.clone(),
                        b: b.clone(),
                        source_distance: ds.clone(),
                        target_distance: dt.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Exhaustively enumerates the total isometric embeddings of `k` into `m`,
/// by backtracking over label assignments with distance pruning.
///
/// The points of `k` are assigned in lexicographic label order, candidates
/// in `m` are tried in lexicographic label order, so the result list is in
/// lexicographic order of the image sequences and is deterministic.  An
/// empty list is a valid result; `limit` truncates the enumeration.
pub fn find_embeddings<T: Scalar>(
    k: &Arc<FiniteMetricSpace<T>>,
    m: &Arc<FiniteMetricSpace<T>>,
    limit: Option<usize>,
) -> Vec<PartialIsometry<T>> {
    let korder = k.lex_order();
    let morder = m.lex_order();
    let mut out = Vec::new();
    let mut image: Vec<usize> = Vec::with_capacity(korder.len());
    let mut used = vec![false; m.len()];

    fn rec<T: Scalar>(
        k: &Arc<FiniteMetricSpace<T>>,
        m: &Arc<FiniteMetricSpace<T>>,
        korder: &[usize],
        morder: &[usize],
        image: &mut Vec<usize>,
        used: &mut [bool],
        out: &mut Vec<PartialIsometry<T>>,
        limit: Option<usize>,
    ) {
        if let Some(cap) = limit {
            if out.len() >= cap {
                return;
            }
        }
        if image.len() == korder.len() {
            let pairs = korder
                .iter()
                .zip(image.iter())
                .map(|(&ki, &mi)| (k.label(ki).to_string(), m.label(mi).to_string()))
                .collect();
            out.push(
                PartialIsometry::new(Arc::clone(k), Arc::clone(m), pairs)
                    .expect("backtracking produces well-formed pairings"),
            );
            return;
        }
        let next = korder[image.len()];
        for &cand in morder {
            if used[cand] {
                continue;
            }
            let ok = korder[..image.len()]
                .iter()
                .zip(image.iter())
                .all(|(&kprev, &mprev)| k.dist(kprev, next) == m.dist(mprev, cand));
            if !ok {
                continue;
            }
            used[cand] = true;
            image.push(cand);
            rec(k, m, korder, morder, image, used, out, limit);
            image.pop();
            used[cand] = false;
        }
    }

    rec(k, m, &korder, &morder, &mut image, &mut used, &mut out, limit);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{rat, space_from_ints};

    fn path_abc() -> Arc<FiniteMetricSpace<crate::Rational>> {
        Arc::new(
            space_from_ints(&["a", "b", "c"], &[&[0, 1, 2], &[1, 0, 1], &[2, 1, 0]])
                .unwrap(),
        )
    }

    #[test]
    fn identity_pairing_is_an_embedding() {
        let m = path_abc();
        let pairs = m
            .labels()
            .iter()
            .map(|l| (l.clone(), l.clone()))
            .collect();
        let p = PartialIsometry::new(Arc::clone(&m), Arc::clone(&m), pairs).unwrap();
        assert!(p.is_isometric_embedding().is_ok());
        assert!(p.is_total_on_source());
    }

    #[test]
    fn swap_preserves_the_single_distance() {
        let m = path_abc();
        let p = PartialIsometry::new(
            Arc::clone(&m),
            Arc::clone(&m),
            vec![("a".into(), "b".into()), ("b".into(), "a".into())],
        )
        .unwrap();
        assert!(p.is_isometric_embedding().is_ok());
    }

    #[test]
    fn stretch_is_caught_with_witness_distances() {
        let m = path_abc();
        let p = PartialIsometry::new(
            Arc::clone(&m),
            Arc::clone(&m),
            vec![("a".into(), "a".into()), ("c".into(), "b".into())],
        )
        .unwrap();
        match p.is_isometric_embedding().unwrap_err() {
            IsometryError::DistanceMismatch {
                a,
                b,
                source_distance,
                target_distance,
            } => {
                assert_eq!((a.as_str(), b.as_str()), ("a", "c"));
                assert_eq!(source_distance, rat(2, 1));
                assert_eq!(target_distance, rat(1, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pairing_must_be_injective_both_ways() {
        let m = path_abc();
        assert!(matches!(
            PartialIsometry::new(
                Arc::clone(&m),
                Arc::clone(&m),
                vec![("a".into(), "a".into()), ("a".into(), "b".into())],
            ),
            Err(IsometryError::DuplicateSourceLabel { .. })
        ));
        assert!(matches!(
            PartialIsometry::new(
                Arc::clone(&m),
                Arc::clone(&m),
                vec![("a".into(), "b".into()), ("c".into(), "b".into())],
            ),
            Err(IsometryError::DuplicateTargetLabel { .. })
        ));
    }

    #[test]
    fn unit_pair_embeds_into_the_path_four_ways() {
        let k = Arc::new(
            space_from_ints(&["x", "y"], &[&[0, 1], &[1, 0]]).unwrap(),
        );
        let m = path_abc();
        let found = find_embeddings(&k, &m, None);
        let images: Vec<(String, String)> = found
            .iter()
            .map(|p| {
                (
                    p.image_of("x").unwrap().to_string(),
                    p.image_of("y").unwrap().to_string(),
                )
            })
            .collect();
        assert_eq!(
            images,
            vec![
                ("a".to_string(), "b".to_string()),
                ("b".to_string(), "a".to_string()),
                ("b".to_string(), "c".to_string()),
                ("c".to_string(), "b".to_string()),
            ]
        );
    }

    #[test]
    fn no_pair_at_distance_five_in_the_path() {
        let k = Arc::new(
            space_from_ints(&["x", "y"], &[&[0, 5], &[5, 0]]).unwrap(),
        );
        let m = path_abc();
        assert!(find_embeddings(&k, &m, None).is_empty());
    }

    #[test]
    fn self_embeddings_include_the_identity() {
        let m = path_abc();
        let found = find_embeddings(&m, &m, None);
        assert!(found.iter().any(|p| {
            p.pairs().iter().all(|(a, b)| a == b)
        }));
    }

    #[test]
    fn limit_truncates_the_enumeration() {
        let k = Arc::new(
            space_from_ints(&["x", "y"], &[&[0, 1], &[1, 0]]).unwrap(),
        );
        let m = path_abc();
        assert_eq!(find_embeddings(&k, &m, Some(2)).len(), 2);
    }

    #[test]
    fn every_embedding_of_small_spaces_is_found() {
        // Independent oracle: all injections of a 3-point space into a
        // 4-point space, filtered by the embedding check, must coincide
        // with the backtracking output.
        let k = Arc::new(
            space_from_ints(
                &["x", "y", "z"],
                &[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]],
            )
            .unwrap(),
        );
        let m = Arc::new(
            space_from_ints(
                &["a", "b", "c", "d"],
                &[
                    &[0, 1, 1, 2],
                    &[1, 0, 1, 2],
                    &[1, 1, 0, 2],
                    &[2, 2, 2, 0],
                ],
            )
            .unwrap(),
        );
        let found = find_embeddings(&k, &m, None);
        let mut count = 0usize;
        let mlabels = m.labels();
        for p0 in mlabels {
            for p1 in mlabels {
                for p2 in mlabels {
                    let img = [p0, p1, p2];
                    let mut distinct = img.to_vec();
                    distinct.sort();
                    distinct.dedup();
                    if distinct.len() != 3 {
                        continue;
                    }
                    let pairs: Vec<(String, String)> = ["x", "y", "z"]
                        .iter()
                        .zip(img.iter())
                        .map(|(a, b)| (a.to_string(), b.to_string()))
                        .collect();
                    let p = PartialIsometry::new(
                        Arc::clone(&k),
                        Arc::clone(&m),
                        pairs,
                    )
                    .unwrap();
                    if p.is_isometric_embedding().is_ok() {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(found.len(), count);
        assert!(found
            .iter()
            .all(|p| p.is_isometric_embedding().is_ok()));
    }
}
