//! Saturated approximants and constructive finite injectivity.
//!
//! An approximant is a growing metric space that, stage by stage, realizes
//! every grid-valued Katětov function on every small subset of its earlier
//! points.  Saturation makes the one-point extension property true by
//! exhaustion; induction over points then embeds any small space over the
//! grid, anchored anywhere — realized here literally, by backtracking
//! search in strict mode and by amalgamation in extending mode.
//!
//! Back-and-forth keeps a working permutation of the matched set at all
//! times.  A seed partial isometry is first closed into honest cycles —
//! each maximal chain x₀ → … → xᵣ is completed to a cycle through
//! existing or fresh points, with every forced distance propagated along
//! the orbit relation d(σp, σq) = d(p, q) to a fixpoint and every free
//! distance pushed to the top of its admissible interval.  After that the
//! invariant is cheap to maintain: an unmatched u needs the least k with
//! f∘σᵏ = f for f = d(u, ·), and a k-cycle of fresh points with circulant
//! internal distances c_m = max(L_m, min_m U_m) always closes it, where
//! [L_m, U_m] is the admissibility window between the m-shifted
//! prescriptions.  The window is never empty: σ^{-m} is an isometry of the
//! matched set, so the usual two-function argument applies shift by shift.
//! Matching one point per step, the process is total in at most one step
//! per point of the final space.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::grid::DistanceGrid;
use crate::isometry::PartialIsometry;
use crate::scalar::Scalar;
use crate::space::FiniteMetricSpace;

/// Why a construction step cannot proceed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuilderError<T: Scalar> {
    /// The configured point budget was hit.  The approximant keeps the
    /// partial result and raises its `budget_exceeded` flag.
    #[error("point budget {point_cap} exceeded; partial result retained")]
    BudgetExceeded { point_cap: usize },
    /// Strict-mode embedding found no assignment using existing points.
    #[error("not realizable with existing points; first open point {label}")]
    NotRealizable { label: String },
    /// The anchor is empty in a mode/state that requires one.
    #[error("empty anchor not supported here: supply at least one anchored point")]
    EmptyAnchorNotSupported,
    #[error("unknown label {label}")]
    UnknownLabel { label: String },
    #[error("label {label} is used twice")]
    DuplicateLabel { label: String },
    /// The given pairing does not preserve some distance, with witnesses.
    #[error("pairs are not isometric on ({a},{b}): {da} vs {db}")]
    PairsNotIsometric { a: String, b: String, da: T, db: T },
}

/// Strict mode only reuses existing points; extending mode may grow the
/// approximant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedMode {
    Strict,
    Extending,
}

/// A staged approximant: the space, its distance grid, the saturation
/// stage reached, and an index from realized (subset, prescription) pairs
/// to the realizing point.
#[derive(Debug, Clone)]
pub struct Approximant<T: Scalar> {
    space: FiniteMetricSpace<T>,
    grid: DistanceGrid,
    stage: u32,
    realization_index: BTreeMap<(Vec<String>, Vec<T>), String>,
    /// Point labels at the start of each completed round, for invariant
    /// checks: `snapshots[s-1]` is the stage-(s−1) point set.
    snapshots: Vec<Vec<String>>,
    budget: usize,
    budget_exceeded: bool,
}

const DEFAULT_BUDGET: usize = 10_000;

/// Safety margin for the float pre-filter in shortest-path scans.  A term
/// is skipped only when its float estimate clears the current bound by at
/// least this relative margin — orders of magnitude wider than `to_f64`
/// conversion error — so a skip is always a sound "cannot improve" proof.
/// Everything that survives the filter is decided in exact arithmetic.
const FILTER_MARGIN: f64 = 1e-9;

/// Float image of a scalar for pre-filtering; NaN (which disables every
/// skip it appears in) when the value has no finite float image.
fn filter_f64<T: Scalar>(v: &T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Appends one point's row to the float shadow of the distance matrix.
fn shadow_push<T: Scalar>(shadow: &mut Vec<Vec<f64>>, dists: &[T]) {
    let row: Vec<f64> = dists.iter().map(filter_f64).collect();
    for (r, v) in shadow.iter_mut().zip(row.iter()) {
        r.push(*v);
    }
    let mut full = row;
    full.push(0.0);
    shadow.push(full);
}

impl<T: Scalar> Approximant<T> {
    /// Fresh approximant on a single base point labeled "u0_0".
    pub fn new(grid: DistanceGrid) -> Self {
        Approximant::from_space(FiniteMetricSpace::singleton("u0_0"), grid)
    }

    /// Wraps an existing space as a stage-0 approximant.
    pub fn from_space(space: FiniteMetricSpace<T>, grid: DistanceGrid) -> Self {
        Approximant {
            space,
            grid,
            stage: 0,
            realization_index: BTreeMap::new(),
            snapshots: Vec::new(),
            budget: DEFAULT_BUDGET,
            budget_exceeded: false,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn space(&self) -> &FiniteMetricSpace<T> {
        &self.space
    }

    pub fn grid(&self) -> &DistanceGrid {
        &self.grid
    }

    pub fn stage(&self) -> u32 {
        self.stage
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn budget_exceeded(&self) -> bool {
        self.budget_exceeded
    }

    pub fn realization_index(&self) -> &BTreeMap<(Vec<String>, Vec<T>), String> {
        &self.realization_index
    }

    /// Point labels at the start of round `s` (1-based), if that round ran.
    pub fn stage_snapshot(&self, s: u32) -> Option<&[String]> {
        self.snapshots
            .get((s as usize).checked_sub(1)?)
            .map(|v| v.as_slice())
    }

    /// The anchoring base point: the lexicographically first label.
    pub fn base_label(&self) -> &str {
        self.space
            .lex_first_label()
            .expect("approximants are never empty")
    }

    /// Restores the bookkeeping of a persisted approximant.  The entries
    /// are trusted only after [`Self::check_index`].
    pub fn restore_index(
        &mut self,
        stage: u32,
        entries: impl IntoIterator<Item = ((Vec<String>, Vec<T>), String)>,
    ) {
        self.stage = stage;
        self.realization_index = entries.into_iter().collect();
    }

    /// Verifies that every indexed realization has exactly the prescribed
    /// distances, returning the first offending entry.
    pub fn check_index(&self) -> Result<(), BuilderError<T>> {
        for ((labels, values), realizer) in &self.realization_index {
            let r = self
                .space
                .index_of(realizer)
                .ok_or_else(|| BuilderError::UnknownLabel {
                    label: realizer.clone(),
                })?;
            for (l, v) in labels.iter().zip(values.iter()) {
                let x = self
                    .space
                    .index_of(l)
                    .ok_or_else(|| BuilderError::UnknownLabel { label: l.clone() })?;
                if self.space.dist(r, x) != v {
                    return Err(BuilderError::PairsNotIsometric {
                        a: realizer.clone(),
                        b: l.clone(),
                        da: self.space.dist(r, x).clone(),
                        db: v.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    fn katetov_ok_idx(&self, s: &[usize], values: &[T]) -> bool {
        for a in 0..s.len() {
            for b in (a + 1)..s.len() {
                let d = self.space.dist(s[a], s[b]);
                let diff = (values[a].clone() - values[b].clone()).abs();
                let sum = values[a].clone() + values[b].clone();
                if diff > *d || *d > sum {
                    return false;
                }
            }
        }
        true
    }

    fn find_realizer(&self, s: &[usize], values: &[T]) -> Option<usize> {
        'next: for r in self.space.lex_order() {
            if s.contains(&r) {
                continue;
            }
            for (x, v) in s.iter().zip(values.iter()) {
                if self.space.dist(r, *x) != v {
                    continue 'next;
                }
            }
            return Some(r);
        }
        None
    }

    /// Canonical index key: the (label, value) pairs sorted by label.
    fn index_key(&self, s: &[usize], values: &[T]) -> (Vec<String>, Vec<T>) {
        let mut pairs: Vec<(String, T)> = s
            .iter()
            .zip(values.iter())
            .map(|(&i, v)| (self.space.label(i).to_string(), v.clone()))
            .collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        pairs.into_iter().unzip()
    }

    /// Finds or creates the realizer of the prescription `values` on `s`,
    /// recording it in the index.  New points take the label
    /// "u<stage>_<counter>" and their free distances come from the maximal
    /// extension f̂(y) = min over x of (f(x) + d(x,y)).
    fn realize(
        &mut self,
        s: &[usize],
        values: &[T],
        stage: u32,
        counter: &mut usize,
    ) -> Result<usize, BuilderError<T>> {
        let key = self.index_key(s, values);
        if let Some(label) = self.realization_index.get(&key) {
            let r = self
                .space
                .index_of(label)
                .expect("indexed labels always exist");
            return Ok(r);
        }
        if let Some(r) = self.find_realizer(s, values) {
            self.realization_index
                .insert(key, self.space.label(r).to_string());
            return Ok(r);
        }
        if self.space.len() >= self.budget {
            self.budget_exceeded = true;
            return Err(BuilderError::BudgetExceeded {
                point_cap: self.budget,
            });
        }
        let label = format!("u{stage}_{counter}");
        *counter += 1;
        let n = self.space.len();
        let mut dists: Vec<Option<T>> = vec![None; n];
        for (x, v) in s.iter().zip(values.iter()) {
            dists[*x] = Some(v.clone());
        }
        let filled: Vec<T> = (0..n)
            .map(|y| match &dists[y] {
                Some(v) => v.clone(),
                None => s
                    .iter()
                    .zip(values.iter())
                    .map(|(&x, v)| v.clone() + self.space.dist(x, y).clone())
                    .min()
                    .expect("prescription sets are nonempty"),
            })
            .collect();
        self.space.push_point_unchecked(label.clone(), filled);
        self.realization_index.insert(key, label);
        Ok(self.space.len() - 1)
    }

    /// Saturates up to `target_stage`.  Each round enumerates the subsets
    /// of the round-start point set with at most `arity_cap` points, in
    /// prefix-first lexicographic order, and every admissible grid
    /// prescription on each subset in ascending value order, realizing the
    /// missing ones.  A call that runs at least one round finishes with a
    /// closure pass: every chain of realizers rooted at the base point
    /// (follow a realized prescription to its realizer, prescribe on the
    /// extended set, repeat up to the arity cap) is realized too, so that
    /// iterated-prescription targets exist as concrete points.
    ///
    /// Calling with `target_stage` at or below the current stage is a
    /// no-op, which makes saturation idempotent at fixed parameters.
    pub fn saturate(
        &mut self,
        arity_cap: usize,
        target_stage: u32,
    ) -> Result<(), BuilderError<T>> {
        assert!(arity_cap >= 1, "arity cap must be at least 1");
        let values: Vec<T> = self.grid.values();
        let mut ran_round = false;
        while self.stage < target_stage {
            self.stage += 1;
            let stage = self.stage;
            ran_round = true;
            let snapshot: Vec<usize> = self.space.lex_order();
            self.snapshots
                .push(snapshot.iter().map(|&i| self.space.label(i).to_string()).collect());
            let mut counter: usize = 0;
            for s in subsets_prefix_lex(&snapshot, arity_cap) {
                let mut odo = ValueOdometer::new(values.len(), s.len());
                while let Some(choice) = odo.next() {
                    let fv: Vec<T> =
                        choice.iter().map(|&vi| values[vi].clone()).collect();
                    if !self.katetov_ok_idx(&s, &fv) {
                        continue;
                    }
                    self.realize(&s, &fv, stage, &mut counter)?;
                }
            }
            if self.stage == target_stage {
                self.close_chains(arity_cap, stage, &mut counter, &values)?;
            }
        }
        let _ = ran_round;
        Ok(())
    }

    /// The closure pass: depth-first over chains (base, r₁, …) where each
    /// rᵢ realizes some admissible grid prescription on the points so far.
    fn close_chains(
        &mut self,
        arity_cap: usize,
        stage: u32,
        counter: &mut usize,
        values: &[T],
    ) -> Result<(), BuilderError<T>> {
        let root = self.space.lex_order()[0];
        self.chain_rec(vec![root], arity_cap, stage, counter, values)
    }

    fn chain_rec(
        &mut self,
        chain: Vec<usize>,
        arity_cap: usize,
        stage: u32,
        counter: &mut usize,
        values: &[T],
    ) -> Result<(), BuilderError<T>> {
        if chain.len() > arity_cap {
            return Ok(());
        }
        let mut odo = ValueOdometer::new(values.len(), chain.len());
        while let Some(choice) = odo.next() {
            let fv: Vec<T> = choice.iter().map(|&vi| values[vi].clone()).collect();
            if !self.katetov_ok_idx(&chain, &fv) {
                continue;
            }
            let r = self.realize(&chain, &fv, stage, counter)?;
            let mut ext = chain.clone();
            ext.push(r);
            self.chain_rec(ext, arity_cap, stage, counter, values)?;
        }
        Ok(())
    }

    /// Embeds `l` into the approximant, extending `anchor` (pairs from
    /// labels of `l` to labels of the approximant).
    ///
    /// Strict mode backtracks over existing points, assigning the open
    /// points of `l` in lexicographic order with candidates in
    /// lexicographic order, and returns the first full assignment.
    /// Extending mode walks the open points of `l` in lexicographic order,
    /// reuses an existing point whenever one has exactly the prescribed
    /// distances to everything placed so far, and otherwise adjoins a new
    /// point by the gluing formula d(x, y) = min over placed z of
    /// (d_l(x, z) + d(image z, y)) — the one-point amalgam, so distances
    /// among pre-existing points never change.  New points take the label
    /// of the point of `l` they realize, suffixed with "~1", "~2", … if
    /// that label is taken.
    ///
    /// An empty anchor is accepted in strict mode against a nonempty
    /// approximant (plain unanchored search) and in extending mode only
    /// against an empty approximant (`l` is copied in); the remaining
    /// combinations fail with `EmptyAnchorNotSupported`.
    pub fn embed_via_injectivity(
        &mut self,
        l: &FiniteMetricSpace<T>,
        anchor: &[(String, String)],
        mode: EmbedMode,
    ) -> Result<PartialIsometry<T>, BuilderError<T>> {
        // Validate the anchor: labels, injectivity, distance preservation.
        let mut seen_l: HashSet<&str> = HashSet::new();
        let mut seen_a: HashSet<&str> = HashSet::new();
        for (ll, al) in anchor {
            if !l.contains_label(ll) {
                return Err(BuilderError::UnknownLabel { label: ll.clone() });
            }
            if !self.space.contains_label(al) {
                return Err(BuilderError::UnknownLabel { label: al.clone() });
            }
            if !seen_l.insert(ll) {
                return Err(BuilderError::DuplicateLabel { label: ll.clone() });
            }
            if !seen_a.insert(al) {
                return Err(BuilderError::DuplicateLabel { label: al.clone() });
            }
        }
        for i in 0..anchor.len() {
            for j in (i + 1)..anchor.len() {
                let (l1, a1) = &anchor[i];
                let (l2, a2) = &anchor[j];
                let dl = l.dist_by_label(l1, l2).expect("checked above");
                let da = self.space.dist_by_label(a1, a2).expect("checked above");
                if dl != da {
                    return Err(BuilderError::PairsNotIsometric {
                        a: l1.clone(),
                        b: l2.clone(),
                        da: dl.clone(),
                        db: da.clone(),
                    });
                }
            }
        }
        if anchor.is_empty() {
            match mode {
                EmbedMode::Strict if self.space.is_empty() => {
                    return Err(BuilderError::EmptyAnchorNotSupported)
                }
                EmbedMode::Extending if !self.space.is_empty() => {
                    return Err(BuilderError::EmptyAnchorNotSupported)
                }
                _ => {}
            }
        }

        let assignment = match mode {
            EmbedMode::Strict => self.strict_assignment(l, anchor)?,
            EmbedMode::Extending => self.extending_assignment(l, anchor)?,
        };
        let pairs: Vec<(String, String)> = {
            let lorder = l.lex_order();
            lorder
                .iter()
                .map(|&li| {
                    (
                        l.label(li).to_string(),
                        self.space.label(assignment[&li]).to_string(),
                    )
                })
                .collect()
        };
        Ok(PartialIsometry::new(
            Arc::new(l.clone()),
            Arc::new(self.space.clone()),
            pairs,
        )
        .expect("constructed assignments are well-formed"))
    }

    fn strict_assignment(
        &self,
        l: &FiniteMetricSpace<T>,
        anchor: &[(String, String)],
    ) -> Result<HashMap<usize, usize>, BuilderError<T>> {
        let mut assign: HashMap<usize, usize> = HashMap::new();
        let mut used: HashSet<usize> = HashSet::new();
        for (ll, al) in anchor {
            let li = l.index_of(ll).expect("validated");
            let ai = self.space.index_of(al).expect("validated");
            assign.insert(li, ai);
            used.insert(ai);
        }
        let todo: Vec<usize> = l
            .lex_order()
            .into_iter()
            .filter(|li| !assign.contains_key(li))
            .collect();
        let morder = self.space.lex_order();

        fn rec<T: Scalar>(
            k: usize,
            todo: &[usize],
            l: &FiniteMetricSpace<T>,
            m: &FiniteMetricSpace<T>,
            morder: &[usize],
            assign: &mut HashMap<usize, usize>,
            used: &mut HashSet<usize>,
        ) -> bool {
            if k == todo.len() {
                return true;
            }
            let li = todo[k];
            for &cand in morder {
                if used.contains(&cand) {
                    continue;
                }
                let ok = assign
                    .iter()
                    .all(|(&lj, &aj)| m.dist(cand, aj) == l.dist(li, lj));
                if !ok {
                    continue;
                }
                assign.insert(li, cand);
                used.insert(cand);
                if rec(k + 1, todo, l, m, morder, assign, used) {
                    return true;
                }
                assign.remove(&li);
                used.remove(&cand);
            }
            false
        }

        if rec(0, &todo, l, &self.space, &morder, &mut assign, &mut used) {
            Ok(assign)
        } else {
            Err(BuilderError::NotRealizable {
                label: todo
                    .first()
                    .map(|&li| l.label(li).to_string())
                    .unwrap_or_default(),
            })
        }
    }

    fn extending_assignment(
        &mut self,
        l: &FiniteMetricSpace<T>,
        anchor: &[(String, String)],
    ) -> Result<HashMap<usize, usize>, BuilderError<T>> {
        let mut assign: HashMap<usize, usize> = HashMap::new();
        let mut used: HashSet<usize> = HashSet::new();
        for (ll, al) in anchor {
            let li = l.index_of(ll).expect("validated");
            let ai = self.space.index_of(al).expect("validated");
            assign.insert(li, ai);
            used.insert(ai);
        }
        for li in l.lex_order() {
            if assign.contains_key(&li) {
                continue;
            }
            let required: Vec<(usize, T)> = assign
                .iter()
                .map(|(&lj, &aj)| (aj, l.dist(li, lj).clone()))
                .collect();
            let reuse = 'scan: {
                for r in self.space.lex_order() {
                    if used.contains(&r) {
                        continue;
                    }
                    if required
                        .iter()
                        .all(|(aj, v)| self.space.dist(r, *aj) == v)
                        && !required.is_empty()
                    {
                        break 'scan Some(r);
                    }
                }
                None
            };
            let target = match reuse {
                Some(r) => r,
                None => {
                    if self.space.len() >= self.budget {
                        self.budget_exceeded = true;
                        return Err(BuilderError::BudgetExceeded {
                            point_cap: self.budget,
                        });
                    }
                    let label = self.fresh_label_like(l.label(li));
                    let n = self.space.len();
                    let dists: Vec<T> = (0..n)
                        .map(|y| {
                            required
                                .iter()
                                .map(|(aj, v)| v.clone() + self.space.dist(*aj, y).clone())
                                .min()
                                .unwrap_or_else(|| {
                                    // Empty approximant, first point placed.
                                    T::one()
                                })
                        })
                        .collect();
                    self.space.push_point_unchecked(label, dists);
                    self.space.len() - 1
                }
            };
            assign.insert(li, target);
            used.insert(target);
        }
        Ok(assign)
    }

    /// A label equal to `base` if free, else `base~1`, `base~2`, …
    fn fresh_label_like(&self, base: &str) -> String {
        if !self.space.contains_label(base) {
            return base.to_string();
        }
        let mut k = 1usize;
        loop {
            let cand = format!("{base}~{k}");
            if !self.space.contains_label(&cand) {
                return cand;
            }
            k += 1;
        }
    }

    /// Extends the partial self-isometry given by `seed` towards a total
    /// bijective self-isometry, spending at most `rounds` matching steps.
    ///
    /// The seed's chains are closed into cycles first (one round per
    /// chain), then one unmatched point is matched per round — to itself
    /// when admissible, then to the lexicographically first workable
    /// existing point, then by a batch of fresh points.  With enough
    /// rounds the result is total and bijective; with too few, the partial
    /// isometry reached so far is returned and the approximant keeps any
    /// points already added.
    pub fn back_and_forth(
        &mut self,
        seed: &[(String, String)],
        rounds: usize,
    ) -> Result<PartialIsometry<T>, BuilderError<T>> {
        let mut sigma: HashMap<usize, usize> = HashMap::new();
        let mut entries: Vec<(usize, usize)> = Vec::with_capacity(seed.len());
        {
            let mut seen_a: HashSet<usize> = HashSet::new();
            let mut seen_b: HashSet<usize> = HashSet::new();
            for (a, b) in seed {
                let ia = self
                    .space
                    .index_of(a)
                    .ok_or_else(|| BuilderError::UnknownLabel { label: a.clone() })?;
                let ib = self
                    .space
                    .index_of(b)
                    .ok_or_else(|| BuilderError::UnknownLabel { label: b.clone() })?;
                if !seen_a.insert(ia) {
                    return Err(BuilderError::DuplicateLabel { label: a.clone() });
                }
                if !seen_b.insert(ib) {
                    return Err(BuilderError::DuplicateLabel { label: b.clone() });
                }
                sigma.insert(ia, ib);
                entries.push((ia, ib));
            }
            // Witness order follows the given pair list.
            for i in 0..entries.len() {
                for j in (i + 1)..entries.len() {
                    let (a1, b1) = entries[i];
                    let (a2, b2) = entries[j];
                    if self.space.dist(a1, a2) != self.space.dist(b1, b2) {
                        return Err(BuilderError::PairsNotIsometric {
                            a: self.space.label(a1).to_string(),
                            b: self.space.label(a2).to_string(),
                            da: self.space.dist(a1, a2).clone(),
                            db: self.space.dist(b1, b2).clone(),
                        });
                    }
                }
            }
        }

        let mut w_counter = self.next_w_counter();
        let mut rounds_left = rounds;

        // A global lower bound on every distance in the space, kept
        // current as points are added.  It lets the shortest-path scans
        // stop early without ever changing a computed minimum.
        let mut dmin = T::zero();
        {
            let n = self.space.len();
            let mut first = true;
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = self.space.dist(i, j);
                    if first || *d < dmin {
                        dmin = d.clone();
                        first = false;
                    }
                }
            }
        }
        // Point indices in label order, maintained incrementally as the
        // space grows.
        let mut lex: Vec<usize> = self.space.lex_order();
        // Float shadow of the distance matrix for the scan pre-filter,
        // grown in lockstep with the space.
        let mut shadow: Vec<Vec<f64>> = {
            let n = self.space.len();
            (0..n)
                .map(|i| (0..n).map(|j| filter_f64(self.space.dist(i, j))).collect())
                .collect()
        };

        // Close every chain of the seed into a cycle.
        loop {
            let chains = self.sigma_chains(&sigma);
            if chains.is_empty() {
                break;
            }
            if rounds_left == 0 {
                return Ok(self.sigma_to_isometry(&sigma));
            }
            rounds_left -= 1;
            let before = self.space.len();
            let closed = self.close_chain(
                &chains[0],
                &mut sigma,
                &mut w_counter,
                &mut dmin,
                &mut shadow,
            );
            self.extend_lex(&mut lex, before);
            if !closed {
                return Ok(self.sigma_to_isometry(&sigma));
            }
        }

        // Match the remaining points one per round.
        loop {
            let matched: HashSet<usize> = sigma.keys().copied().collect();
            let u = match lex.iter().copied().find(|i| !matched.contains(i)) {
                Some(u) => u,
                None => break,
            };
            if rounds_left == 0 {
                return Ok(self.sigma_to_isometry(&sigma));
            }
            rounds_left -= 1;
            let before = self.space.len();
            let ok = self.match_one(u, &mut sigma, &mut w_counter, &lex, &mut dmin, &mut shadow);
            self.extend_lex(&mut lex, before);
            if !ok {
                return Ok(self.sigma_to_isometry(&sigma));
            }
        }
        Ok(self.sigma_to_isometry(&sigma))
    }

    /// Maximal σ-chains: walks from each domain point that nothing maps
    /// to, ordered by start label.
    fn sigma_chains(&self, sigma: &HashMap<usize, usize>) -> Vec<Vec<usize>> {
        let range: HashSet<usize> = sigma.values().copied().collect();
        let mut starts: Vec<usize> = sigma
            .keys()
            .copied()
            .filter(|i| !range.contains(i))
            .collect();
        starts.sort_by(|&a, &b| self.space.label(a).cmp(self.space.label(b)));
        starts
            .into_iter()
            .map(|s| {
                let mut ch = vec![s];
                let mut visited: HashSet<usize> = HashSet::new();
                visited.insert(s);
                while let Some(&nxt) = sigma.get(ch.last().expect("nonempty")) {
                    if !visited.insert(nxt) {
                        break;
                    }
                    ch.push(nxt);
                }
                ch
            })
            .collect()
    }

    /// Inserts the indices of points added since `from` into the
    /// label-ordered index list, preserving exact lexicographic order.
    fn extend_lex(&self, lex: &mut Vec<usize>, from: usize) {
        for idx in from..self.space.len() {
            let label = self.space.label(idx);
            let pos = lex.partition_point(|&e| self.space.label(e) < label);
            lex.insert(pos, idx);
        }
    }

    fn next_w_counter(&self) -> usize {
        self.space
            .labels()
            .iter()
            .filter_map(|l| l.strip_prefix('w').and_then(|s| s.parse::<usize>().ok()))
            .map(|k| k + 1)
            .max()
            .unwrap_or(0)
    }

    fn sigma_to_isometry(&self, sigma: &HashMap<usize, usize>) -> PartialIsometry<T> {
        let mut pairs: Vec<(String, String)> = sigma
            .iter()
            .map(|(&a, &b)| {
                (
                    self.space.label(a).to_string(),
                    self.space.label(b).to_string(),
                )
            })
            .collect();
        pairs.sort();
        let arc = Arc::new(self.space.clone());
        PartialIsometry::new(Arc::clone(&arc), arc, pairs)
            .expect("sigma is a partial injection by construction")
    }

    /// Tries closures of escalating length for one chain: direct, one
    /// existing bridge point, then 1, 2, … fresh points.
    fn close_chain(
        &mut self,
        chain: &[usize],
        sigma: &mut HashMap<usize, usize>,
        w_counter: &mut usize,
        dmin: &mut T,
        shadow: &mut Vec<Vec<f64>>,
    ) -> bool {
        let r = chain.len() - 1;
        let range: HashSet<usize> = sigma.values().copied().collect();
        let d1 = self.space.dist(chain[0], chain[1]).clone();
        let bridge_candidates: Vec<usize> = self
            .space
            .lex_order()
            .into_iter()
            .filter(|y| {
                !sigma.contains_key(y)
                    && !range.contains(y)
                    && !chain.contains(y)
                    && *self.space.dist(*y, chain[r]) == d1
                    && *self.space.dist(*y, chain[0]) == d1
            })
            .collect();
        let mut attempts: Vec<Vec<Insert>> = vec![Vec::new()];
        for y in bridge_candidates {
            attempts.push(vec![Insert::Existing(y)]);
        }
        for t in 1..=(2 * r + 4) {
            attempts.push(vec![Insert::New; t]);
        }
        for ins in attempts {
            if self.try_cycle(chain, &ins, sigma, w_counter, dmin, shadow) {
                return true;
            }
        }
        false
    }

    /// Attempts to close `chain` plus the inserted points into a σ-cycle.
    /// Works entirely in a candidate entry store; commits only complete,
    /// validated plans.
    fn try_cycle(
        &mut self,
        chain: &[usize],
        inserts: &[Insert],
        sigma: &mut HashMap<usize, usize>,
        w_counter: &mut usize,
        dmin: &mut T,
        shadow: &mut Vec<Vec<f64>>,
    ) -> bool {
        let r = chain.len() - 1;
        let n0 = self.space.len();
        let new_count = inserts.iter().filter(|i| matches!(i, Insert::New)).count();
        if n0 + new_count > self.budget {
            // No error here: the caller falls back to a partial return.
            self.budget_exceeded = true;
            return false;
        }
        let mut cyc: Vec<usize> = chain.to_vec();
        let mut next_new = n0;
        for ins in inserts {
            match ins {
                Insert::Existing(y) => cyc.push(*y),
                Insert::New => {
                    cyc.push(next_new);
                    next_new += 1;
                }
            }
        }
        let big_n = next_new;
        let cycle_len = cyc.len();

        let mut smap: HashMap<usize, usize> = sigma.clone();
        for i in r..cycle_len {
            smap.insert(cyc[i], cyc[(i + 1) % cycle_len]);
        }
        let mut dom: Vec<usize> = smap.keys().copied().collect();
        dom.sort_by_key(|&i| (i >= n0, i));
        let mut pairs_list: Vec<(usize, usize)> = Vec::new();
        for ii in 0..dom.len() {
            for jj in (ii + 1)..dom.len() {
                pairs_list.push((dom[ii], dom[jj]));
            }
        }

        let mut store: EntryStore<T> = EntryStore::new(n0);
        if !propagate(&self.space, &mut store, &smap, &pairs_list) {
            return false;
        }

        // Assign the free entries among the mapped points, in index order,
        // each pushed to the high end of its admissible window, with
        // re-propagation after every assignment.  Entries towards points
        // outside the domain are not materialized: the committed rows
        // extend the domain block by the shortest-path formula through the
        // old domain points, which glues the validated block onto the
        // untouched ambient space and therefore stays a metric; a window
        // over those implied entries could never beat a direct window over
        // the domain, so restricting the scan changes no assigned value.
        for ii in 0..dom.len() {
            for jj in (ii + 1)..dom.len() {
                let (i, j) = (dom[ii], dom[jj]);
                if i < n0 && j < n0 {
                    continue;
                }
                if store.get(&self.space, i, j).is_some() {
                    continue;
                }
                let mut lo = T::zero();
                let mut hi: Option<T> = None;
                for &x in &dom {
                    if x == i || x == j {
                        continue;
                    }
                    let (dxi, dxj) = match (
                        store.get(&self.space, i, x),
                        store.get(&self.space, j, x),
                    ) {
                        (Some(a), Some(b)) => (a, b),
                        _ => continue,
                    };
                    let diff = (dxi.clone() - dxj.clone()).abs();
                    if diff > lo {
                        lo = diff;
                    }
                    let sum = dxi + dxj;
                    hi = Some(match hi {
                        Some(cur) => cur.min(sum),
                        None => sum,
                    });
                }
                let v = match hi {
                    None => lo.max(T::one()),
                    Some(hi) => {
                        if lo > hi {
                            return false;
                        }
                        hi
                    }
                };
                if v <= T::zero() || !store.put(&self.space, i, j, v) {
                    return false;
                }
                if !propagate(&self.space, &mut store, &smap, &pairs_list) {
                    return false;
                }
            }
        }

        // Completeness, metric validity around the new points, and the
        // isometry identity for the candidate map.
        for (i, j) in &pairs_list {
            if store.get(&self.space, *i, *j).is_none() {
                return false;
            }
        }
        for w in n0..big_n {
            for (xx, &x) in dom.iter().enumerate() {
                if x == w {
                    continue;
                }
                let dwx = store.get(&self.space, w, x).expect("complete");
                if dwx <= T::zero() {
                    return false;
                }
                for &y in &dom[(xx + 1)..] {
                    if y == w {
                        continue;
                    }
                    let dwy = store.get(&self.space, w, y).expect("complete");
                    let dxy = store.get(&self.space, x, y).expect("complete");
                    let diff = (dwx.clone() - dwy.clone()).abs();
                    let sum = dwx.clone() + dwy;
                    if diff > dxy || dxy > sum {
                        return false;
                    }
                }
            }
        }
        for (p, q) in &pairs_list {
            let a = store.get(&self.space, *p, *q).expect("complete on dom");
            let b = store
                .get(&self.space, smap[p], smap[q])
                .expect("complete on dom");
            if a != b {
                return false;
            }
        }

        // Commit: domain entries verbatim, all other columns by the
        // shortest-path extension through the old domain points.
        let dom_old: Vec<usize> = dom.iter().copied().filter(|&x| x < n0).collect();
        for w in n0..big_n {
            let dists: Vec<T> = (0..self.space.len())
                .map(|x| match store.get(&self.space, w, x) {
                    Some(v) => v,
                    None => dom_old
                        .iter()
                        .map(|&a| {
                            store.get(&self.space, w, a).expect("complete on dom")
                                + self.space.dist(a, x).clone()
                        })
                        .min()
                        .expect("the domain always holds old points"),
                })
                .collect();
            for v in &dists {
                if *v < *dmin {
                    *dmin = v.clone();
                }
            }
            shadow_push(shadow, &dists);
            let label = format!("w{:04}", *w_counter);
            *w_counter += 1;
            self.space.push_point_unchecked(label, dists);
        }
        for i in r..cycle_len {
            sigma.insert(cyc[i], cyc[(i + 1) % cycle_len]);
        }
        true
    }

    /// Matches one unmatched point `u`: self-match if the distance profile
    /// is σ-invariant, an existing two-way partner for period 2, else a
    /// batch of k−1 fresh points arranged in a σ-cycle with circulant
    /// internal distances.
    fn match_one(
        &mut self,
        u: usize,
        sigma: &mut HashMap<usize, usize>,
        w_counter: &mut usize,
        lex: &[usize],
        dmin: &mut T,
        shadow: &mut Vec<Vec<f64>>,
    ) -> bool {
        let f: Vec<T> = (0..self.space.len())
            .map(|z| self.space.dist(u, z).clone())
            .collect();
        let order = sigma_order(sigma);
        let mut domain: Vec<usize> = sigma.keys().copied().collect();
        domain.sort_unstable();

        let mut k_use: Option<usize> = None;
        let mut pow = domain.clone();
        for k in 1..=order {
            for y in pow.iter_mut() {
                *y = sigma[y];
            }
            if domain.iter().zip(pow.iter()).all(|(&z, &y)| f[y] == f[z]) {
                k_use = Some(k);
                break;
            }
        }
        // σ^order is the identity, so k = order always satisfies the
        // invariance condition; the loop cannot fall through.
        let k = k_use.expect("the permutation order always works");

        if k == 1 {
            sigma.insert(u, u);
            return true;
        }
        if k == 2 {
            let matched: HashSet<usize> = sigma.keys().copied().collect();
            let images: Vec<usize> = domain.iter().map(|&z| sigma[&z]).collect();
            let z0 = domain
                .iter()
                .copied()
                .min_by(|&a, &b| self.space.label(a).cmp(self.space.label(b)));
            let z0_img = z0.map(|z| sigma[&z]);
            let mut found: Option<usize> = None;
            'cand: for &cand in lex {
                if matched.contains(&cand) || cand == u {
                    continue;
                }
                if let (Some(z0), Some(z0i)) = (z0, z0_img) {
                    if self.space.dist(cand, z0i) != &f[z0] {
                        continue;
                    }
                }
                for (&z, &zi) in domain.iter().zip(images.iter()) {
                    if self.space.dist(cand, zi) != &f[z] || f[zi] != *self.space.dist(cand, z) {
                        continue 'cand;
                    }
                }
                found = Some(cand);
                break;
            }
            if let Some(img) = found {
                sigma.insert(u, img);
                sigma.insert(img, u);
                return true;
            }
        }

        // Batch: u = w₀ plus fresh w₁..w_{k−1}; prescriptions are the
        // σ-shifted profiles f_i(t) = f(σ^{-i} t), internals circulant.
        if self.space.len() + k - 1 > self.budget {
            // No error: the caller falls back to a partial return.
            self.budget_exceeded = true;
            return false;
        }
        let inv: HashMap<usize, usize> = sigma.iter().map(|(&a, &b)| (b, a)).collect();
        let sig_ipow = |x: usize, i: usize| -> usize {
            let mut y = x;
            for _ in 0..i {
                y = inv[&y];
            }
            y
        };
        let fi: Vec<Vec<T>> = (0..k)
            .map(|i| domain.iter().map(|&t| f[sig_ipow(t, i)].clone()).collect())
            .collect();
        let mut c_m: Vec<T> = vec![T::zero(); k];
        {
            let mut l_m: Vec<T> = vec![T::zero(); k];
            let mut u_m: Vec<Option<T>> = vec![None; k];
            for m in 1..k {
                let mut lo = T::zero();
                let mut hi: Option<T> = None;
                for i in 0..k {
                    let fa = &fi[i];
                    let fb = &fi[(i + m) % k];
                    for t in 0..domain.len() {
                        let (a, b) = (&fa[t], &fb[t]);
                        // |a − b| ≤ max(a, b) and a + b ≥ max(a, b) for
                        // positive values, so terms inside the current
                        // window cannot move either end.
                        if *a > lo || *b > lo {
                            let diff = (a.clone() - b.clone()).abs();
                            if diff > lo {
                                lo = diff;
                            }
                        }
                        let take = match &hi {
                            None => true,
                            Some(h) => *a < *h && *b < *h,
                        };
                        if take {
                            let sum = a.clone() + b.clone();
                            hi = Some(match hi.take() {
                                Some(cur) => cur.min(sum),
                                None => sum,
                            });
                        }
                    }
                }
                l_m[m] = lo;
                u_m[m] = hi;
            }
            // δ = min over shifts of the upper bound; the window
            // [L_m, U_m] is nonempty for every shift because σ^{-m}
            // preserves distances, so c_m = max(L_m, δ) is admissible and
            // circulant-triangular.
            let delta: T = u_m[1..]
                .iter()
                .filter_map(|h| h.clone())
                .min()
                .unwrap_or_else(T::one);
            debug_assert!(delta > T::zero());
            for m in 1..k {
                c_m[m] = l_m[m].clone().max(delta.clone());
                if let Some(h) = &u_m[m] {
                    debug_assert!(c_m[m] <= *h);
                }
            }
        }
        let mut widx: Vec<usize> = vec![u];
        for i in 1..k {
            let mut forced: Vec<(usize, T)> = domain
                .iter()
                .enumerate()
                .map(|(pos, &t)| (t, fi[i][pos].clone()))
                .collect();
            for (jj, &wj) in widx.iter().enumerate() {
                forced.push((wj, c_m[i - jj].clone()));
            }
            let n = self.space.len();
            let mut fixed: Vec<Option<T>> = vec![None; n];
            for (t, v) in &forced {
                fixed[*t] = Some(v.clone());
            }
            // Scan prescriptions grouped by value, ascending.  Exact
            // cutoffs keep the scan short without changing any minimum:
            // within a group of equal values v, a term improves the best
            // sum exactly when its distance is below lim = best - v, a
            // compare-only test; once lim falls to the global distance
            // floor dmin, no term in this or any later group can improve;
            // and a sum equal to the absolute floor v_min + dmin is the
            // minimum outright.
            let mut by_value: Vec<usize> = (0..forced.len()).collect();
            by_value.sort_by(|&a, &b| forced[a].1.cmp(&forced[b].1).then(a.cmp(&b)));
            let mut groups: Vec<(T, Vec<usize>)> = Vec::new();
            for &fidx in &by_value {
                let (t, v) = &forced[fidx];
                match groups.last_mut() {
                    Some((gv, ts)) if *gv == *v => ts.push(*t),
                    _ => groups.push((v.clone(), vec![*t])),
                }
            }
            let floor = groups[0].0.clone() + dmin.clone();
            let gf: Vec<f64> = groups.iter().map(|(v, _)| filter_f64(v)).collect();
            let dists: Vec<T> = (0..n)
                .map(|x| {
                    if let Some(v) = &fixed[x] {
                        return v.clone();
                    }
                    let mut best: Option<T> = None;
                    let mut best_f = f64::NAN;
                    'col: for (gi, (v, ts)) in groups.iter().enumerate() {
                        if let Some(b) = &best {
                            if *v >= *b {
                                break;
                            }
                            let l = b.clone() - v.clone();
                            if l <= *dmin {
                                break;
                            }
                        }
                        let vf = gf[gi];
                        // Skip a term when its float distance clears this
                        // by the safety margin; NaN disables the skip.
                        let mut filter = if best_f.is_finite() && vf.is_finite() {
                            (best_f - vf) + FILTER_MARGIN * (best_f + vf)
                        } else {
                            f64::NAN
                        };
                        for &t in ts {
                            if shadow[t][x] * (1.0 - FILTER_MARGIN) >= filter {
                                continue;
                            }
                            let d = self.space.dist(t, x);
                            let cand = v.clone() + d.clone();
                            let improves = match &best {
                                None => true,
                                Some(b) => cand < *b,
                            };
                            if improves {
                                let done = cand == floor;
                                best_f = filter_f64(&cand);
                                filter = if best_f.is_finite() && vf.is_finite() {
                                    (best_f - vf) + FILTER_MARGIN * (best_f + vf)
                                } else {
                                    f64::NAN
                                };
                                best = Some(cand);
                                if done {
                                    break 'col;
                                }
                            }
                        }
                    }
                    best.expect("forced part is nonempty")
                })
                .collect();
            for v in &dists {
                if *v < *dmin {
                    *dmin = v.clone();
                }
            }
            shadow_push(shadow, &dists);
            let label = format!("w{:04}", *w_counter);
            *w_counter += 1;
            self.space.push_point_unchecked(label, dists);
            widx.push(self.space.len() - 1);
        }
        for i in 0..k {
            sigma.insert(widx[i], widx[(i + 1) % k]);
        }
        true
    }
}

#[derive(Debug, Clone, Copy)]
enum Insert {
    Existing(usize),
    New,
}

/// Candidate distances for a cycle-closure attempt: known entries come
/// from the space, everything else lives in an overlay keyed by the
/// unordered index pair.
struct EntryStore<T: Scalar> {
    n0: usize,
    val: HashMap<(usize, usize), T>,
}

impl<T: Scalar> EntryStore<T> {
    fn new(n0: usize) -> Self {
        EntryStore {
            n0,
            val: HashMap::new(),
        }
    }

    fn key(i: usize, j: usize) -> (usize, usize) {
        if i < j {
            (i, j)
        } else {
            (j, i)
        }
    }

    fn get(&self, space: &FiniteMetricSpace<T>, i: usize, j: usize) -> Option<T> {
        if i == j {
            return Some(T::zero());
        }
        if i < self.n0 && j < self.n0 {
            return Some(space.dist(i, j).clone());
        }
        self.val.get(&Self::key(i, j)).cloned()
    }

    /// Records an entry; false on conflict or a non-positive value.
    fn put(&mut self, space: &FiniteMetricSpace<T>, i: usize, j: usize, v: T) -> bool {
        if i < self.n0 && j < self.n0 {
            return *space.dist(i, j) == v;
        }
        let k = Self::key(i, j);
        if let Some(old) = self.val.get(&k) {
            return *old == v;
        }
        if v <= T::zero() {
            return false;
        }
        self.val.insert(k, v);
        true
    }
}

/// Pushes d(σp, σq) = d(p, q) to a fixpoint over all domain pairs;
/// false on any conflict.
fn propagate<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    store: &mut EntryStore<T>,
    smap: &HashMap<usize, usize>,
    pairs_list: &[(usize, usize)],
) -> bool {
    let mut changed = true;
    while changed {
        changed = false;
        for (p, q) in pairs_list {
            let a = store.get(space, *p, *q);
            let b = store.get(space, smap[p], smap[q]);
            match (a, b) {
                (None, None) => {}
                (None, Some(b)) => {
                    if !store.put(space, *p, *q, b) {
                        return false;
                    }
                    changed = true;
                }
                (Some(a), None) => {
                    if !store.put(space, smap[p], smap[q], a) {
                        return false;
                    }
                    changed = true;
                }
                (Some(a), Some(b)) => {
                    if a != b {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// The order of σ as a permutation of its domain: the least common
/// multiple of its cycle lengths.
fn sigma_order(sigma: &HashMap<usize, usize>) -> usize {
    if sigma.is_empty() {
        return 1;
    }
    let mut seen: HashSet<usize> = HashSet::new();
    let mut order: usize = 1;
    for &s in sigma.keys() {
        if seen.contains(&s) {
            continue;
        }
        let mut len = 0usize;
        let mut x = s;
        loop {
            seen.insert(x);
            x = sigma[&x];
            len += 1;
            if x == s {
                break;
            }
        }
        order = order / gcd(order, len) * len;
    }
    order
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// All nonempty subsets of `base` (given in the desired order) with at
/// most `cap` elements, in prefix-first lexicographic order: each subset
/// is emitted before its extensions.
fn subsets_prefix_lex(base: &[usize], cap: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut prefix: Vec<usize> = Vec::new();
    fn rec(base: &[usize], cap: usize, start: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for i in start..base.len() {
            prefix.push(base[i]);
            out.push(prefix.clone());
            if prefix.len() < cap {
                rec(base, cap, i + 1, prefix, out);
            }
            prefix.pop();
        }
    }
    rec(base, cap, 0, &mut prefix, &mut out);
    out
}

/// Odometer over value-index tuples of the given width, in lexicographic
/// order with the last position varying fastest.
struct ValueOdometer {
    radix: usize,
    width: usize,
    state: Vec<usize>,
    done: bool,
    fresh: bool,
}

impl ValueOdometer {
    fn new(radix: usize, width: usize) -> Self {
        ValueOdometer {
            radix,
            width,
            state: vec![0; width],
            done: radix == 0,
            fresh: true,
        }
    }

    fn next(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if self.fresh {
            self.fresh = false;
            return Some(&self.state);
        }
        let mut i = self.width;
        loop {
            if i == 0 {
                self.done = true;
                return None;
            }
            i -= 1;
            self.state[i] += 1;
            if self.state[i] < self.radix {
                break;
            }
            self.state[i] = 0;
        }
        Some(&self.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{rat, space_from_ints};
    use crate::Rational;

    fn int_grid(max: u64) -> DistanceGrid {
        DistanceGrid::new(1, max).unwrap()
    }

    #[test]
    fn one_value_one_stage_adds_one_point() {
        let mut a: Approximant<Rational> = Approximant::new(int_grid(1));
        a.saturate(1, 1).unwrap();
        assert_eq!(a.space().len(), 2);
        assert_eq!(*a.space().dist_by_label("u0_0", "u1_0").unwrap(), rat(1, 1));
    }

    #[test]
    fn two_values_one_stage_uses_the_maximal_extension() {
        let mut a: Approximant<Rational> = Approximant::new(int_grid(2));
        a.saturate(1, 1).unwrap();
        assert_eq!(a.space().len(), 3);
        assert_eq!(*a.space().dist_by_label("u0_0", "u1_0").unwrap(), rat(1, 1));
        assert_eq!(*a.space().dist_by_label("u0_0", "u1_1").unwrap(), rat(2, 1));
        // Free distance filled by min over the prescribed part: 2 + 1.
        assert_eq!(*a.space().dist_by_label("u1_0", "u1_1").unwrap(), rat(3, 1));
        assert!(a.space().recheck().is_ok());
    }

    #[test]
    fn target_stage_zero_is_identity() {
        let mut a: Approximant<Rational> = Approximant::new(int_grid(3));
        a.saturate(3, 0).unwrap();
        assert_eq!(a.space().len(), 1);
        assert_eq!(a.stage(), 0);
    }

    #[test]
    fn saturation_is_idempotent_at_fixed_parameters() {
        let mut a: Approximant<Rational> = Approximant::new(int_grid(2));
        a.saturate(2, 1).unwrap();
        let n1 = a.space().len();
        a.saturate(2, 1).unwrap();
        assert_eq!(a.space().len(), n1);
        let labels_before = a.space().labels().to_vec();
        a.saturate(2, 1).unwrap();
        assert_eq!(a.space().labels(), labels_before.as_slice());
    }

    #[test]
    fn stage_invariant_holds_after_each_stage() {
        let mut a: Approximant<Rational> = Approximant::new(int_grid(2));
        a.saturate(2, 2).unwrap();
        assert!(a.space().recheck().is_ok());
        // Invariant: every admissible grid prescription on a subset of the
        // previous stage's points has a realizer.
        let snapshot = a.stage_snapshot(2).unwrap().to_vec();
        let idx: Vec<usize> = snapshot
            .iter()
            .map(|l| a.space().index_of(l).unwrap())
            .collect();
        let values: Vec<Rational> = a.grid().values();
        for s in subsets_prefix_lex(&idx, 2) {
            let mut odo = ValueOdometer::new(values.len(), s.len());
            while let Some(choice) = odo.next() {
                let fv: Vec<Rational> =
                    choice.iter().map(|&vi| values[vi].clone()).collect();
                if !a.katetov_ok_idx(&s, &fv) {
                    continue;
                }
                assert!(
                    a.find_realizer(&s, &fv).is_some(),
                    "missing realizer for {s:?} {fv:?}"
                );
            }
        }
    }

    #[test]
    fn realization_index_entries_check_out() {
        let mut a: Approximant<Rational> = Approximant::new(int_grid(2));
        a.saturate(2, 1).unwrap();
        assert!(!a.realization_index().is_empty());
        assert!(a.check_index().is_ok());
    }

    #[test]
    fn budget_stops_saturation_with_flag() {
        let mut a: Approximant<Rational> = Approximant::new(int_grid(3)).with_budget(4);
        let err = a.saturate(3, 2).unwrap_err();
        assert!(matches!(err, BuilderError::BudgetExceeded { point_cap: 4 }));
        assert!(a.budget_exceeded());
        assert_eq!(a.space().len(), 4);
    }

    #[test]
    fn strict_embedding_picks_the_lex_first_completion() {
        let eq3 = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]],
        )
        .unwrap();
        let mut a = Approximant::from_space(eq3, int_grid(1));
        let l = space_from_ints(&["x", "y"], &[&[0, 1], &[1, 0]]).unwrap();
        let anchor = vec![("x".to_string(), "a".to_string())];
        let embedding = a
            .embed_via_injectivity(&l, &anchor, EmbedMode::Strict)
            .unwrap();
        assert_eq!(embedding.image_of("x"), Some("a"));
        assert_eq!(embedding.image_of("y"), Some("b"));
        assert!(embedding.is_isometric_embedding().is_ok());
        assert_eq!(a.space().len(), 3);
    }

    #[test]
    fn strict_embedding_reports_unrealizable() {
        let two = space_from_ints(&["a", "b"], &[&[0, 2], &[2, 0]]).unwrap();
        let mut a = Approximant::from_space(two, int_grid(2));
        let l = space_from_ints(&["x", "y"], &[&[0, 1], &[1, 0]]).unwrap();
        let anchor = vec![("x".to_string(), "a".to_string())];
        match a.embed_via_injectivity(&l, &anchor, EmbedMode::Strict) {
            Err(BuilderError::NotRealizable { label }) => assert_eq!(label, "y"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn total_anchor_is_returned_unchanged() {
        let eq3 = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]],
        )
        .unwrap();
        let mut a = Approximant::from_space(eq3.clone(), int_grid(1));
        let anchor: Vec<(String, String)> = vec![
            ("a".into(), "b".into()),
            ("b".into(), "c".into()),
            ("c".into(), "a".into()),
        ];
        let n_before = a.space().len();
        let emb = a
            .embed_via_injectivity(&eq3, &anchor, EmbedMode::Strict)
            .unwrap();
        assert_eq!(a.space().len(), n_before);
        assert_eq!(emb.image_of("a"), Some("b"));
        assert_eq!(emb.image_of("b"), Some("c"));
        assert_eq!(emb.image_of("c"), Some("a"));
    }

    #[test]
    fn extending_embedding_adds_the_midpoint() {
        let two = space_from_ints(&["a", "c"], &[&[0, 2], &[2, 0]]).unwrap();
        let mut appr = Approximant::from_space(two, int_grid(2));
        let path = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 1, 2], &[1, 0, 1], &[2, 1, 0]],
        )
        .unwrap();
        let anchor: Vec<(String, String)> =
            vec![("a".into(), "a".into()), ("c".into(), "c".into())];
        let emb = appr
            .embed_via_injectivity(&path, &anchor, EmbedMode::Extending)
            .unwrap();
        assert_eq!(appr.space().len(), 3);
        assert!(appr.space().contains_label("b"));
        assert_eq!(*appr.space().dist_by_label("a", "b").unwrap(), rat(1, 1));
        assert_eq!(*appr.space().dist_by_label("b", "c").unwrap(), rat(1, 1));
        assert_eq!(*appr.space().dist_by_label("a", "c").unwrap(), rat(2, 1));
        assert!(appr.space().recheck().is_ok());
        assert!(emb.is_isometric_embedding().is_ok());
        assert!(emb.is_total_on_source());
    }

    #[test]
    fn extending_embedding_reuses_exact_realizers() {
        let eq3 = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]],
        )
        .unwrap();
        let mut appr = Approximant::from_space(eq3, int_grid(1));
        let l = space_from_ints(&["x", "y", "z"], &[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]])
            .unwrap();
        let anchor = vec![("x".to_string(), "a".to_string())];
        let emb = appr
            .embed_via_injectivity(&l, &anchor, EmbedMode::Extending)
            .unwrap();
        assert_eq!(appr.space().len(), 3, "no new points were needed");
        assert!(emb.is_isometric_embedding().is_ok());
    }

    #[test]
    fn extending_mode_requires_an_anchor_against_a_nonempty_space() {
        let two = space_from_ints(&["a", "b"], &[&[0, 1], &[1, 0]]).unwrap();
        let mut appr = Approximant::from_space(two.clone(), int_grid(1));
        assert!(matches!(
            appr.embed_via_injectivity(&two, &[], EmbedMode::Extending),
            Err(BuilderError::EmptyAnchorNotSupported)
        ));
    }

    #[test]
    fn strict_mode_searches_unanchored_when_anchor_is_empty() {
        let eq3 = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]],
        )
        .unwrap();
        let mut appr = Approximant::from_space(eq3, int_grid(1));
        let l = space_from_ints(&["x", "y"], &[&[0, 1], &[1, 0]]).unwrap();
        let emb = appr
            .embed_via_injectivity(&l, &[], EmbedMode::Strict)
            .unwrap();
        assert_eq!(emb.image_of("x"), Some("a"));
        assert_eq!(emb.image_of("y"), Some("b"));
    }

    #[test]
    fn empty_seed_yields_the_identity() {
        let eq3 = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]],
        )
        .unwrap();
        let mut appr = Approximant::from_space(eq3, int_grid(1));
        let iso = appr.back_and_forth(&[], 10).unwrap();
        assert!(iso.is_total_on_source());
        assert!(iso.pairs().iter().all(|(a, b)| a == b));
        assert_eq!(appr.space().len(), 3);
    }

    #[test]
    fn transposition_extends_on_the_equilateral_triangle() {
        let eq3 = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]],
        )
        .unwrap();
        let mut appr = Approximant::from_space(eq3, int_grid(1));
        let iso = appr
            .back_and_forth(&[("a".into(), "b".into())], 10)
            .unwrap();
        assert_eq!(appr.space().len(), 3, "no growth needed");
        assert_eq!(iso.image_of("a"), Some("b"));
        assert_eq!(iso.image_of("b"), Some("a"));
        assert_eq!(iso.image_of("c"), Some("c"));
        assert!(iso.is_isometric_embedding().is_ok());
        assert!(iso.is_total_on_source() && iso.is_surjective_onto_target());
    }

    #[test]
    fn fixing_a_point_gives_an_automorphism_fixing_it() {
        let eq3 = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]],
        )
        .unwrap();
        let mut appr = Approximant::from_space(eq3, int_grid(1));
        let iso = appr
            .back_and_forth(&[("a".into(), "a".into())], 10)
            .unwrap();
        assert_eq!(iso.image_of("a"), Some("a"));
        assert!(iso.is_total_on_source());
        assert!(iso.is_isometric_embedding().is_ok());
    }

    #[test]
    fn asymmetric_path_forces_a_fresh_partner() {
        let path = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 1, 2], &[1, 0, 1], &[2, 1, 0]],
        )
        .unwrap();
        let mut appr = Approximant::from_space(path, int_grid(2));
        let iso = appr
            .back_and_forth(&[("a".into(), "b".into())], 20)
            .unwrap();
        assert_eq!(appr.space().len(), 4, "one partner point expected");
        assert!(appr.space().contains_label("w0000"));
        assert!(iso.is_total_on_source() && iso.is_surjective_onto_target());
        assert!(iso.is_isometric_embedding().is_ok());
        assert_eq!(iso.image_of("a"), Some("b"));
        assert!(appr.space().recheck().is_ok());
    }

    #[test]
    fn zero_rounds_returns_the_seed_as_partial() {
        let eq3 = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]],
        )
        .unwrap();
        let mut appr = Approximant::from_space(eq3, int_grid(1));
        let iso = appr
            .back_and_forth(&[("a".into(), "b".into())], 0)
            .unwrap();
        assert!(!iso.is_total_on_source());
        assert_eq!(iso.pairs(), &[("a".to_string(), "b".to_string())]);
        assert_eq!(appr.space().len(), 3);
    }

    #[test]
    fn non_isometric_seed_is_rejected_with_witness() {
        let path = space_from_ints(
            &["a", "b", "c"],
            &[&[0, 1, 2], &[1, 0, 1], &[2, 1, 0]],
        )
        .unwrap();
        let mut appr = Approximant::from_space(path, int_grid(2));
        // a,b at distance 1 cannot map to a,c at distance 2.
        let err = appr
            .back_and_forth(
                &[("a".into(), "a".into()), ("b".into(), "c".into())],
                10,
            )
            .unwrap_err();
        assert!(matches!(err, BuilderError::PairsNotIsometric { .. }));
    }

    #[test]
    fn every_single_pair_seed_extends_on_a_saturated_approximant() {
        let mut base: Approximant<Rational> = Approximant::new(int_grid(2));
        base.saturate(2, 1).unwrap();
        let labels: Vec<String> = base.space().labels().to_vec();
        for x in &labels {
            for y in &labels {
                let mut appr = base.clone();
                let iso = appr
                    .back_and_forth(&[(x.clone(), y.clone())], 200)
                    .unwrap();
                assert!(
                    iso.is_total_on_source() && iso.is_surjective_onto_target(),
                    "seed {x}->{y} did not extend"
                );
                assert!(iso.is_isometric_embedding().is_ok(), "seed {x}->{y}");
                assert_eq!(iso.image_of(x), Some(y.as_str()), "seed {x}->{y}");
                assert!(appr.space().recheck().is_ok(), "seed {x}->{y}");
            }
        }
    }

    #[test]
    fn subset_enumeration_is_prefix_first() {
        let base = vec![10, 20, 30];
        let subs = subsets_prefix_lex(&base, 2);
        assert_eq!(
            subs,
            vec![
                vec![10],
                vec![10, 20],
                vec![10, 30],
                vec![20],
                vec![20, 30],
                vec![30],
            ]
        );
    }

    #[test]
    fn odometer_counts_in_lexicographic_order() {
        let mut odo = ValueOdometer::new(2, 2);
        let mut seen = Vec::new();
        while let Some(s) = odo.next() {
            seen.push(s.to_vec());
        }
        assert_eq!(
            seen,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
    }

    #[test]
    fn odometer_width_zero_emits_the_empty_tuple_once() {
        let mut odo = ValueOdometer::new(3, 0);
        assert_eq!(odo.next(), Some(&[][..]));
        assert_eq!(odo.next(), None);
    }
}
