//! Discrete approximation at finite scale: graph spaces, staged
//! amalgams, and exact verification of the displacement identities.
//!
//! Given families K₁, …, K_m inside an ambient space and a positive
//! weight h on their union, each step builds the graph space
//! N_n = K_n×{0} ∪ {(x, h(x))} under ρ((x,t),(y,s)) = d(x,y) + |s−t|,
//! glues it to the subspace spanned by the earlier images and K_n, and
//! realizes the glued space back inside the ambient without moving any
//! existing point.  The image of the graph part is the family L_n and
//! f_n(x) is the image of (x, h(x)): a map that moves every x by exactly
//! h(x) while every earlier image sees f_n(x) at distance d(x, y) + h(x).
//! Verification recomputes those identities — equalities, not bounds —
//! from the final space alone, so a defective construction cannot vouch
//! for itself.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::amalgam::{amalgamated_union, AmalgamError, AmalgamSpec, NamingPolicy};
use crate::builder::{Approximant, BuilderError, EmbedMode};
use crate::grid::DistanceGrid;
use crate::scalar::Scalar;
use crate::space::{FiniteMetricSpace, MetricError};

/// Why an instance or a construction step is rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DapError<T: Scalar> {
    /// The weight must be strictly positive everywhere in scope.
    #[error("non-positive weight at {label}: {value}")]
    NonPositiveH { label: String, value: T },
    #[error("no weight assigned to {label}")]
    MissingH { label: String },
    #[error("unknown label {label}")]
    UnknownLabel { label: String },
    #[error("family {index} is empty")]
    EmptyFamily { index: usize },
    #[error(transparent)]
    Metric(#[from] MetricError<T>),
    #[error(transparent)]
    Amalgam(#[from] AmalgamError<T>),
    #[error(transparent)]
    Builder(#[from] BuilderError<T>),
}

/// An ambient space, families K₁..K_m of its points, and a positive
/// weight on their union.
#[derive(Debug, Clone)]
pub struct DapInstance<T: Scalar> {
    pub ambient: FiniteMetricSpace<T>,
    pub families: Vec<Vec<String>>,
    pub h: BTreeMap<String, T>,
}

impl<T: Scalar> DapInstance<T> {
    /// Validates family membership and weight totality/positivity.
    pub fn new(
        ambient: FiniteMetricSpace<T>,
        families: Vec<Vec<String>>,
        h: BTreeMap<String, T>,
    ) -> Result<Self, DapError<T>> {
        for (i, fam) in families.iter().enumerate() {
            if fam.is_empty() {
                return Err(DapError::EmptyFamily { index: i + 1 });
            }
            for l in fam {
                if !ambient.contains_label(l) {
                    return Err(DapError::UnknownLabel { label: l.clone() });
                }
                match h.get(l) {
                    None => return Err(DapError::MissingH { label: l.clone() }),
                    Some(v) if *v <= T::zero() => {
                        return Err(DapError::NonPositiveH {
                            label: l.clone(),
                            value: v.clone(),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(DapInstance {
            ambient,
            families,
            h,
        })
    }

    /// Union of the families, deduplicated, in lexicographic order.
    pub fn scope(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.families.iter().flatten().collect();
        set.into_iter().cloned().collect()
    }

    /// Smallest weight over the scope.
    pub fn min_h(&self) -> Option<T> {
        self.scope()
            .iter()
            .filter_map(|l| self.h.get(l))
            .cloned()
            .min()
    }
}

/// K×{0} together with the graph of the weight, under the sum metric.
#[derive(Debug, Clone)]
pub struct GraphSpace<T: Scalar> {
    pub space: FiniteMetricSpace<T>,
    pub base_part: Vec<String>,
    pub graph_part: Vec<String>,
}

/// Builds the graph space of `k` at `level`: base points keep their
/// labels, graph points take "<x>@L<level>", and
/// ρ((x,t),(y,s)) = d(x,y) + |s−t| exactly.
pub fn graph_space<T: Scalar>(
    k: &FiniteMetricSpace<T>,
    h: &BTreeMap<String, T>,
    level: u32,
) -> Result<GraphSpace<T>, DapError<T>> {
    let base: Vec<String> = k.labels().to_vec();
    let mut heights: Vec<T> = Vec::with_capacity(base.len());
    for l in &base {
        match h.get(l) {
            None => return Err(DapError::MissingH { label: l.clone() }),
            Some(v) if *v <= T::zero() => {
                return Err(DapError::NonPositiveH {
                    label: l.clone(),
                    value: v.clone(),
                })
            }
            Some(v) => heights.push(v.clone()),
        }
    }
    let graph: Vec<String> = base.iter().map(|l| format!("{l}@L{level}")).collect();
    let n = base.len();
    // Point i < n is (x_i, 0); point n + i is (x_i, h(x_i)).
    let coord = |p: usize| -> (usize, T) {
        if p < n {
            (p, T::zero())
        } else {
            (p - n, heights[p - n].clone())
        }
    };
    let labels: Vec<String> = base.iter().chain(graph.iter()).cloned().collect();
    let rows: Vec<Vec<T>> = (0..2 * n)
        .map(|p| {
            let (x, t) = coord(p);
            (0..2 * n)
                .map(|q| {
                    let (y, s) = coord(q);
                    k.dist(x, y).clone() + (s - t.clone()).abs()
                })
                .collect()
        })
        .collect();
    let space = FiniteMetricSpace::validate_metric(labels, rows)
        .expect("the sum of a metric and a line distance is a metric");
    Ok(GraphSpace {
        space,
        base_part: base,
        graph_part: graph,
    })
}

/// One construction step: the glued input space, the new family, and the
/// displacement map.
#[derive(Debug, Clone)]
pub struct DapStep<T: Scalar> {
    pub n: usize,
    pub glued: FiniteMetricSpace<T>,
    pub l_n: Vec<String>,
    pub f_n: Vec<(String, String)>,
}

/// The full construction record: instance, per-step data, final space.
#[derive(Debug, Clone)]
pub struct DapTrace<T: Scalar> {
    pub instance: DapInstance<T>,
    pub steps: Vec<DapStep<T>>,
    pub final_space: FiniteMetricSpace<T>,
}

/// Runs the staged construction.  Step n glues the graph space of K_n to
/// the subspace spanned by the earlier families' images and K_n
/// (identifying x with (x,0)), then realizes the glued space inside the
/// ambient with every already-present point fixed; only the graph part
/// can create points.
pub fn dap_construct<T: Scalar>(inst: &DapInstance<T>) -> Result<DapTrace<T>, DapError<T>> {
    // The grid is irrelevant here; the approximant only hosts embeddings.
    let grid = DistanceGrid::new(1, 1).expect("trivial grid");
    let mut appr = Approximant::from_space(inst.ambient.clone(), grid);
    let mut steps: Vec<DapStep<T>> = Vec::new();
    let mut earlier: Vec<String> = Vec::new();
    for (idx, fam) in inst.families.iter().enumerate() {
        let n = idx + 1;
        let k_space = appr.space().restrict(fam)?;
        let graph = graph_space(&k_space, &inst.h, n as u32)?;
        let m1_labels: Vec<String> = {
            let mut set: BTreeSet<String> = earlier.iter().cloned().collect();
            set.extend(fam.iter().cloned());
            set.into_iter().collect()
        };
        let m1 = appr.space().restrict(&m1_labels)?;
        let spec = AmalgamSpec {
            m1: Arc::new(m1),
            m2: Arc::new(graph.space.clone()),
            pairs: fam.iter().map(|x| (x.clone(), x.clone())).collect(),
        };
        let glued = amalgamated_union(&spec, &NamingPolicy::default())?;
        let anchor: Vec<(String, String)> = m1_labels
            .iter()
            .map(|l| {
                let in_glued = glued
                    .h1
                    .image_of(l)
                    .expect("h1 is total on the first side")
                    .to_string();
                (in_glued, l.clone())
            })
            .collect();
        let embedding =
            appr.embed_via_injectivity(glued.space.as_ref(), &anchor, EmbedMode::Extending)?;
        let mut f_n: Vec<(String, String)> = Vec::with_capacity(fam.len());
        for g in &graph.graph_part {
            let in_glued = glued
                .h2
                .image_of(g)
                .expect("h2 is total on the second side");
            let in_ambient = embedding
                .image_of(in_glued)
                .expect("the embedding is total")
                .to_string();
            let x = g
                .rsplit_once("@L")
                .expect("graph labels carry the level tag")
                .0
                .to_string();
            f_n.push((x, in_ambient));
        }
        let l_n: Vec<String> = f_n.iter().map(|(_, y)| y.clone()).collect();
        earlier.extend(l_n.iter().cloned());
        steps.push(DapStep {
            n,
            glued: glued.space.as_ref().clone(),
            l_n,
            f_n,
        });
    }
    Ok(DapTrace {
        instance: inst.clone(),
        steps,
        final_space: appr.space().clone(),
    })
}

/// Which identity a check instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// d(x, f_n(x)) = h(x).
    V1,
    /// d(f_n(x), y) = d(x, y) + h(x) for earlier images y.
    V2,
    /// Cross-family separation: d(u, v) ≥ min h.
    V3,
    /// Distances among original ambient points are unchanged.
    V4,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::V1 => "V1",
            CheckKind::V2 => "V2",
            CheckKind::V3 => "V3",
            CheckKind::V4 => "V4",
        }
    }
}

/// One exact check, with both sides and the verdict.
#[derive(Debug, Clone)]
pub struct DapCheck<T: Scalar> {
    pub kind: CheckKind,
    pub n: Option<usize>,
    pub x: String,
    pub y: Option<String>,
    pub lhs: T,
    pub rhs: T,
    pub pass: bool,
}

/// All checks plus the overall verdict.
#[derive(Debug, Clone)]
pub struct DapReport<T: Scalar> {
    pub checks: Vec<DapCheck<T>>,
}

impl<T: Scalar> DapReport<T> {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// One line per check:
    /// "CHECK V2 n=2 x=a y=b@L1 lhs=5/2 rhs=5/2 PASS".
    pub fn machine_lines(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = write!(out, "CHECK {}", c.kind.name());
            if let Some(n) = c.n {
                let _ = write!(out, " n={n}");
            }
            let _ = write!(out, " x={}", c.x);
            if let Some(y) = &c.y {
                let _ = write!(out, " y={y}");
            }
            let _ = writeln!(
                out,
                " lhs={} rhs={} {}",
                c.lhs,
                c.rhs,
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(out, "RESULT {}", if self.pass() { "PASS" } else { "FAIL" });
        out
    }

    /// Human-oriented summary grouped by identity.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for kind in [CheckKind::V1, CheckKind::V2, CheckKind::V3, CheckKind::V4] {
            let of_kind: Vec<&DapCheck<T>> =
                self.checks.iter().filter(|c| c.kind == kind).collect();
            let failed: Vec<&&DapCheck<T>> = of_kind.iter().filter(|c| !c.pass).collect();
            let _ = writeln!(
                out,
                "{}: {} checks, {} failed",
                kind.name(),
                of_kind.len(),
                failed.len()
            );
            for c in failed {
                let _ = write!(out, "  FAIL at x={}", c.x);
                if let Some(y) = &c.y {
                    let _ = write!(out, ", y={y}");
                }
                let _ = writeln!(out, ": lhs={} rhs={}", c.lhs, c.rhs);
            }
        }
        let _ = writeln!(out, "overall: {}", if self.pass() { "PASS" } else { "FAIL" });
        out
    }
}

/// Recomputes every identity from the final space and the recorded maps;
/// nothing in the trace is trusted beyond the labels.
///
/// V1: each x moves by exactly h(x).  V2: each earlier image sees f_n(x)
/// at d(x, y) + h(x).  V3: points of different families are at least
/// min h apart.  V4: the original ambient distances survive verbatim.
pub fn dap_verify<T: Scalar>(trace: &DapTrace<T>) -> DapReport<T> {
    let f = &trace.final_space;
    let inst = &trace.instance;
    let mut checks: Vec<DapCheck<T>> = Vec::new();
    let dist = |a: &str, b: &str| -> Option<T> { f.dist_by_label(a, b).ok().cloned() };

    let mut earlier: Vec<String> = Vec::new();
    for step in &trace.steps {
        for (x, fx) in &step.f_n {
            let h = inst.h.get(x).cloned().unwrap_or_else(T::zero);
            let lhs = dist(x, fx).unwrap_or_else(T::zero);
            checks.push(DapCheck {
                kind: CheckKind::V1,
                n: Some(step.n),
                x: x.clone(),
                y: None,
                pass: lhs == h,
                lhs,
                rhs: h,
            });
            for y in &earlier {
                let lhs = dist(fx, y).unwrap_or_else(T::zero);
                let rhs = dist(x, y).unwrap_or_else(T::zero)
                    + inst.h.get(x).cloned().unwrap_or_else(T::zero);
                checks.push(DapCheck {
                    kind: CheckKind::V2,
                    n: Some(step.n),
                    x: x.clone(),
                    y: Some(y.clone()),
                    pass: lhs == rhs,
                    lhs,
                    rhs,
                });
            }
        }
        earlier.extend(step.l_n.iter().cloned());
    }

    if let Some(min_h) = inst.min_h() {
        for j in 0..trace.steps.len() {
            for n in (j + 1)..trace.steps.len() {
                for u in &trace.steps[n].l_n {
                    for v in &trace.steps[j].l_n {
                        let lhs = dist(u, v).unwrap_or_else(T::zero);
                        checks.push(DapCheck {
                            kind: CheckKind::V3,
                            n: Some(trace.steps[n].n),
                            x: u.clone(),
                            y: Some(v.clone()),
                            pass: lhs >= min_h,
                            lhs,
                            rhs: min_h.clone(),
                        });
                    }
                }
            }
        }
    }

    let orig = &inst.ambient;
    for i in 0..orig.len() {
        for j in (i + 1)..orig.len() {
            let a = orig.label(i);
            let b = orig.label(j);
            let lhs = dist(a, b).unwrap_or_else(T::zero);
            let rhs = orig.dist(i, j).clone();
            checks.push(DapCheck {
                kind: CheckKind::V4,
                n: None,
                x: a.to_string(),
                y: Some(b.to_string()),
                pass: lhs == rhs,
                lhs,
                rhs,
            });
        }
    }

    DapReport { checks }
}
