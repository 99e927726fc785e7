//! Random and exhaustive generation of grid-valued metric spaces.
//!
//! Random spaces grow by chains of one-point extensions: each new point
//! fixes its distance to the existing points one at a time, in
//! lexicographic label order, drawing uniformly among the grid values that
//! the admissible interval still allows.  The chain narrows the interval
//! as it goes, so every draw keeps the matrix a metric; on a contiguous
//! grid {k/q : 1 ≤ k ≤ B} the intersection is provably never empty, and on
//! other value sets exhaustion is reported rather than resampled around.
//!
//! Exhaustive enumeration walks the upper triangle of the matrix in
//! row-major order, deepest entry last, pruning by the triangle inequality
//! as soon as all three sides of a triple are fixed.  The output order is
//! lexicographic in the flattened upper triangle, with grid values
//! ascending.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::amalgam::AmalgamSpec;
use crate::dap::DapInstance;
use crate::grid::DistanceGrid;
use crate::katetov::{
    admissible_interval, one_point_extension, AdmissibleInterval, KatetovFunction,
};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::space::FiniteMetricSpace;

/// Why a random construction cannot proceed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError<T: Scalar> {
    /// No grid value lies inside the admissible interval at the given
    /// construction step (1-based index of the point being added).
    #[error("grid exhausted at step {step}: no grid value in {interval}")]
    GridExhausted {
        step: usize,
        interval: AdmissibleInterval<T>,
    },
    #[error("point count must be at least 1")]
    EmptySpace,
}

/// Draws one distance uniformly among the grid values inside `interval`,
/// or reports exhaustion with the step number and the interval as witness.
pub fn sample_distance<T: Scalar>(
    grid: &DistanceGrid,
    interval: &AdmissibleInterval<T>,
    rng: &mut SplitMix64,
    step: usize,
) -> Result<T, GenerateError<T>> {
    let candidates = grid.values_in(interval);
    if candidates.is_empty() {
        return Err(GenerateError::GridExhausted {
            step,
            interval: interval.clone(),
        });
    }
    let i = rng.pick_index(candidates.len());
    Ok(candidates[i].clone())
}

/// Labels p1..pn for generated points.
fn point_label(i: usize) -> String {
    format!("p{}", i + 1)
}

/// Builds an n-point space with all distances in `grid`, deterministically
/// from `seed`, by n−1 successive one-point extensions.
pub fn random_space<T: Scalar>(
    n: usize,
    grid: &DistanceGrid,
    seed: u64,
) -> Result<FiniteMetricSpace<T>, GenerateError<T>> {
    if n == 0 {
        return Err(GenerateError::EmptySpace);
    }
    let mut rng = SplitMix64::new(seed);
    let mut space: FiniteMetricSpace<T> = FiniteMetricSpace::singleton(point_label(0));
    for i in 1..n {
        extend_randomly(&mut space, &point_label(i), grid, &mut rng, i + 1)?;
    }
    Ok(space)
}

/// Adds one point with grid distances to `space`, drawing each distance in
/// lexicographic order of the existing labels.  `step` is only reported in
/// the exhaustion witness.
pub fn extend_randomly<T: Scalar>(
    space: &mut FiniteMetricSpace<T>,
    new_label: &str,
    grid: &DistanceGrid,
    rng: &mut SplitMix64,
    step: usize,
) -> Result<(), GenerateError<T>> {
    let mut f: KatetovFunction<T> = KatetovFunction::new();
    let order = space.lex_order();
    for &ti in &order {
        let target = space.label(ti).to_string();
        let interval = admissible_interval(space, &f, &target)
            .expect("targets come from the space itself");
        let v = sample_distance(grid, &interval, rng, step)?;
        f.assign(target, v);
    }
    *space = one_point_extension(space, &f, new_label)
        .expect("interval-constrained draws are always admissible");
    Ok(())
}

/// All metric spaces on `n` ordered points p1..pn with distances in the
/// grid, in lexicographic order of the flattened upper triangle, truncated
/// at `limit`.
pub fn enumerate_spaces<T: Scalar>(
    n: usize,
    grid: &DistanceGrid,
    limit: Option<usize>,
) -> Vec<FiniteMetricSpace<T>> {
    let labels: Vec<String> = (0..n).map(point_label).collect();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![FiniteMetricSpace::singleton(labels[0].clone())];
    }
    let values: Vec<T> = grid.values();
    // Upper-triangle entries in row-major order.
    let mut slots: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            slots.push((i, j));
        }
    }
    let mut out: Vec<FiniteMetricSpace<T>> = Vec::new();
    let mut m: Vec<Vec<T>> = vec![vec![T::zero(); n]; n];

    fn assigned_before(slot: usize, a: usize, b: usize, slots: &[(usize, usize)]) -> bool {
        let (x, y) = if a < b { (a, b) } else { (b, a) };
        slots[..slot].contains(&(x, y))
    }

    fn rec<T: Scalar>(
        slot: usize,
        slots: &[(usize, usize)],
        values: &[T],
        n: usize,
        m: &mut Vec<Vec<T>>,
        labels: &[String],
        out: &mut Vec<FiniteMetricSpace<T>>,
        limit: Option<usize>,
    ) {
        if let Some(cap) = limit {
            if out.len() >= cap {
                return;
            }
        }
        if slot == slots.len() {
            let rows: Vec<Vec<T>> = m.clone();
            let space = FiniteMetricSpace::validate_metric(labels.to_vec(), rows)
                .expect("pruned assignments always satisfy the axioms");
            out.push(space);
            return;
        }
        let (i, j) = slots[slot];
        'next_value: for v in values {
            // Triangle feasibility against every completed triple.
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                if !assigned_before(slot, i, k, slots) || !assigned_before(slot, k, j, slots)
                {
                    continue;
                }
                let dik = &m[i.min(k)][i.max(k)];
                let dkj = &m[k.min(j)][k.max(j)];
                let sum = dik.clone() + dkj.clone();
                let diff = (dik.clone() - dkj.clone()).abs();
                if *v > sum || *v < diff {
                    continue 'next_value;
                }
            }
            m[i][j] = v.clone();
            m[j][i] = v.clone();
            rec(slot + 1, slots, values, n, m, labels, out, limit);
        }
    }

    rec(0, &slots, &values, n, &mut m, &labels, &mut out, limit);
    out
}

/// A seeded gluing instance: two random spaces sharing an isometric part.
///
/// The derivation from the seed is fixed: grid q in 1..=4 and B in 1..=8,
/// side sizes in 1..=8, overlap size in 1..=min, then the first side is
/// drawn point by point; the second side starts from a relabeled copy of
/// the first side's lexicographically first overlap points and grows by
/// further random extensions.  First-side points are p1..pn, second-side
/// points q1..qm, identified in index order.
pub fn random_amalgam_spec<T: Scalar>(seed: u64) -> (AmalgamSpec<T>, DistanceGrid) {
    let mut rng = SplitMix64::new(seed);
    let q = 1 + rng.next_u64() % 4;
    let b = 1 + rng.next_u64() % 8;
    let grid = DistanceGrid::new(q, b).expect("parameters are positive");
    let n1 = 1 + (rng.next_u64() % 8) as usize;
    let n2 = 1 + (rng.next_u64() % 8) as usize;
    let k = 1 + (rng.next_u64() % n1.min(n2) as u64) as usize;

    let mut m1: FiniteMetricSpace<T> = FiniteMetricSpace::singleton("p1");
    for i in 1..n1 {
        extend_randomly(&mut m1, &format!("p{}", i + 1), &grid, &mut rng, i + 1)
            .expect("contiguous grids never exhaust");
    }

    let shared: Vec<String> = {
        let order = m1.lex_order();
        order[..k].iter().map(|&i| m1.label(i).to_string()).collect()
    };
    let core = m1.restrict(&shared).expect("labels from m1 itself");
    let rows: Vec<Vec<T>> = (0..k)
        .map(|i| (0..k).map(|j| core.dist(i, j).clone()).collect())
        .collect();
    let qlabels: Vec<String> = (0..k).map(|i| format!("q{}", i + 1)).collect();
    let mut m2 = FiniteMetricSpace::validate_metric(qlabels, rows)
        .expect("restriction of a metric is a metric");
    for i in k..n2 {
        extend_randomly(&mut m2, &format!("q{}", i + 1), &grid, &mut rng, i + 1)
            .expect("contiguous grids never exhaust");
    }

    let pairs: Vec<(String, String)> = shared
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), format!("q{}", i + 1)))
        .collect();
    (
        AmalgamSpec {
            m1: Arc::new(m1),
            m2: Arc::new(m2),
            pairs,
        },
        grid,
    )
}

/// A seeded extension instance: a random space plus a prescription with
/// values drawn from the same grid, unconstrained — admissible roughly
/// half the time, which is what an agreement test wants.
pub fn random_katetov_instance<T: Scalar>(
    seed: u64,
) -> (FiniteMetricSpace<T>, KatetovFunction<T>) {
    let mut rng = SplitMix64::new(seed);
    let q = 1 + rng.next_u64() % 4;
    let b = 1 + rng.next_u64() % 8;
    let grid = DistanceGrid::new(q, b).expect("parameters are positive");
    let n = 1 + (rng.next_u64() % 6) as usize;
    let mut space: FiniteMetricSpace<T> = FiniteMetricSpace::singleton("p1");
    for i in 1..n {
        extend_randomly(&mut space, &format!("p{}", i + 1), &grid, &mut rng, i + 1)
            .expect("contiguous grids never exhaust");
    }
    let values: Vec<T> = grid.values();
    let mut f = KatetovFunction::new();
    for l in space.labels() {
        let v = values[rng.pick_index(values.len())].clone();
        f.assign(l.clone(), v);
    }
    (space, f)
}

/// A seeded displacement-harness instance: an ambient space of at most 12
/// points over a small grid, up to 4 point families, and grid-valued
/// weights on their union.
pub fn random_dap_instance<T: Scalar>(seed: u64) -> DapInstance<T> {
    let mut rng = SplitMix64::new(seed);
    let q = 1 + rng.next_u64() % 4;
    let b = 1 + rng.next_u64() % 8;
    let grid = DistanceGrid::new(q, b).expect("parameters are positive");
    let n = 1 + (rng.next_u64() % 12) as usize;
    let ambient: FiniteMetricSpace<T> = random_space(n, &grid, rng.next_u64())
        .expect("contiguous grids never exhaust");
    let m = 1 + (rng.next_u64() % 4) as usize;
    let labels: Vec<String> = ambient.labels().to_vec();
    let mut families: Vec<Vec<String>> = Vec::with_capacity(m);
    for _ in 0..m {
        let k = 1 + (rng.pick_index(n));
        let mut pool = labels.clone();
        let mut fam: Vec<String> = Vec::with_capacity(k);
        for _ in 0..k {
            let i = rng.pick_index(pool.len());
            fam.push(pool.swap_remove(i));
        }
        fam.sort();
        families.push(fam);
    }
    let scope: BTreeSet<String> = families.iter().flatten().cloned().collect();
    let values: Vec<T> = grid.values();
    let h: BTreeMap<String, T> = scope
        .into_iter()
        .map(|l| (l, values[rng.pick_index(values.len())].clone()))
        .collect();
    DapInstance::new(ambient, families, h)
        .expect("generated instances satisfy their own bounds")
}
