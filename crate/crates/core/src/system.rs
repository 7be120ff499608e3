//! The problem instance: subsystem family, dwell-time bounds and the switch
//! digraph, plus enumeration of the paths the certificates are built on.
//!
//! Subsystem indices are 1-based throughout, matching how instances are
//! written down in problem files.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result, Violations};
use crate::linalg::{self, Matrix};

/// The family of subsystem matrices `A_1, …, A_N`, all `d×d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemFamily {
    dimension: usize,
    matrices: Vec<Matrix>,
}

impl SubsystemFamily {
    pub fn new(matrices: Vec<Matrix>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidInput("subsystem family is empty".into()))?;
        let dimension = first.rows();
        for m in &matrices {
            if !m.is_square() {
                return Err(Error::NotSquare {
                    rows: m.rows(),
                    cols: m.cols(),
                });
            }
            if m.rows() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    actual: m.rows(),
                });
            }
        }
        Ok(Self {
            dimension,
            matrices,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// The matrix of subsystem `index` (1-based). Panics when out of range.
    pub fn matrix(&self, index: usize) -> &Matrix {
        &self.matrices[index - 1]
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.matrices
    }

    /// `A_index^k`.
    pub fn power(&self, index: usize, k: u32) -> Matrix {
        linalg::matrix_power(self.matrix(index), k).expect("family matrices are square")
    }
}

/// Admissible minimum (`delta`) and maximum (`max`) dwell times, in steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DwellBounds {
    pub delta: u32,
    #[serde(rename = "Delta")]
    pub max: u32,
}

impl DwellBounds {
    pub fn new(delta: u32, max: u32) -> Result<Self> {
        if delta == 0 || delta >= max {
            return Err(Error::InvalidInput(format!(
                "dwell bounds must satisfy 0 < delta < Delta, got delta={delta}, Delta={max}"
            )));
        }
        Ok(Self { delta, max })
    }

    pub fn contains(&self, dwell: u32) -> bool {
        (self.delta..=self.max).contains(&dwell)
    }

    pub fn range(&self) -> std::ops::RangeInclusive<u32> {
        self.delta..=self.max
    }
}

/// Directed graph of admissible switches on vertices `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl SwitchGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges: BTreeSet<_> = edges.into_iter().collect();
        for &(k, l) in &edges {
            if k == l {
                return Err(Error::InvalidInput(format!(
                    "self-loop ({k},{l}) is not a switch"
                )));
            }
            if !(1..=n).contains(&k) || !(1..=n).contains(&l) {
                return Err(Error::InvalidInput(format!(
                    "edge ({k},{l}) references a vertex outside 1..={n}"
                )));
            }
        }
        Ok(Self { n, edges })
    }

    /// The complete digraph on `n` vertices.
    pub fn complete(n: usize) -> Self {
        let edges = (1..=n)
            .flat_map(|k| (1..=n).filter(move |&l| l != k).map(move |l| (k, l)))
            .collect();
        Self { n, edges }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Successors of `v` in ascending order.
    pub fn successors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((v, 0)..(v + 1, 0)).map(|&(_, l)| l)
    }
}

/// A path `w_0, …, w_n` whose interior avoids both endpoints.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Path {
    vertices: Vec<usize>,
}

impl Path {
    pub fn new(vertices: Vec<usize>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidInput(
                "a path needs a source and a destination".into(),
            ));
        }
        Ok(Self { vertices })
    }

    /// The single-edge path `u, (u, v), v`.
    pub fn direct(u: usize, v: usize) -> Self {
        Self {
            vertices: vec![u, v],
        }
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn source(&self) -> usize {
        self.vertices[0]
    }

    pub fn destination(&self) -> usize {
        *self.vertices.last().expect("non-empty path")
    }

    pub fn interior(&self) -> &[usize] {
        &self.vertices[1..self.vertices.len() - 1]
    }

    /// Number of interior vertices.
    pub fn length(&self) -> usize {
        self.vertices.len() - 2
    }

    /// Checks edge membership, interior exclusion and interior distinctness.
    pub fn is_valid_in(&self, graph: &SwitchGraph) -> bool {
        let (u, v) = (self.source(), self.destination());
        let edges_ok = self.vertices.windows(2).all(|w| graph.has_edge(w[0], w[1]));
        let interior = self.interior();
        let excluded = interior.iter().all(|&w| w != u && w != v);
        let distinct = interior.iter().collect::<BTreeSet<_>>().len() == interior.len();
        edges_ok && excluded && distinct
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.vertices.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// A validated problem instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub family: SubsystemFamily,
    pub bounds: DwellBounds,
    pub graph: SwitchGraph,
}

impl Instance {
    /// Assembles an instance from individually constructed parts. Does not
    /// check the all-unstable premise; see [`validate_instance`].
    pub fn new(family: SubsystemFamily, bounds: DwellBounds, graph: SwitchGraph) -> Self {
        Self {
            family,
            bounds,
            graph,
        }
    }
}

/// Unchecked instance data as read from a problem file.
#[derive(Debug, Clone)]
pub struct RawInstance {
    pub matrices: Vec<Matrix>,
    pub delta: u32,
    pub max_dwell: u32,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewSubsystems {
        count: usize,
    },
    DimensionMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    DwellOrder {
        delta: u32,
        max: u32,
    },
    EdgeOutOfRange {
        from: usize,
        to: usize,
        n: usize,
    },
    SelfLoop {
        vertex: usize,
    },
    StableSubsystem {
        index: usize,
        radius: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooFewSubsystems { count } => {
                write!(f, "need at least 2 subsystems, got {count}")
            }
            Self::DimensionMismatch {
                index,
                rows,
                cols,
                expected,
            } => write!(
                f,
                "subsystem {index} is {rows}x{cols}, expected {expected}x{expected}"
            ),
            Self::DwellOrder { delta, max } => {
                write!(
                    f,
                    "dwell bounds must satisfy 0 < delta < Delta, got {delta} and {max}"
                )
            }
            Self::EdgeOutOfRange { from, to, n } => {
                write!(f, "edge ({from},{to}) references a vertex outside 1..={n}")
            }
            Self::SelfLoop { vertex } => write!(f, "self-loop on vertex {vertex}"),
            Self::StableSubsystem { index, radius } => write!(
                f,
                "subsystem {index} is Schur stable (spectral radius {radius:.7}); \
                 stable subsystems require allow_stable"
            ),
        }
    }
}

/// Checks every structural invariant and, unless `allow_stable` is set, that
/// no subsystem matrix is Schur stable. Collects all violations.
pub fn validate_instance(raw: RawInstance, allow_stable: bool) -> Result<Instance, Violations> {
    let mut violations = Vec::new();
    let n = raw.matrices.len();
    if n < 2 {
        violations.push(Violation::TooFewSubsystems { count: n });
    }
    let expected = raw.matrices.first().map_or(0, Matrix::rows);
    let mut shapes_ok = true;
    for (k, m) in raw.matrices.iter().enumerate() {
        if m.rows() != expected || m.cols() != expected {
            shapes_ok = false;
            violations.push(Violation::DimensionMismatch {
                index: k + 1,
                rows: m.rows(),
                cols: m.cols(),
                expected,
            });
        }
    }
    if raw.delta == 0 || raw.delta >= raw.max_dwell {
        violations.push(Violation::DwellOrder {
            delta: raw.delta,
            max: raw.max_dwell,
        });
    }
    for &(from, to) in &raw.edges {
        if from == to {
            violations.push(Violation::SelfLoop { vertex: from });
        } else if !(1..=n).contains(&from) || !(1..=n).contains(&to) {
            violations.push(Violation::EdgeOutOfRange { from, to, n });
        }
    }
    if shapes_ok && !allow_stable {
        for (k, m) in raw.matrices.iter().enumerate() {
            match linalg::spectral_radius(m) {
                Ok(radius) if radius < 1.0 - linalg::TOL_SCHUR => {
                    violations.push(Violation::StableSubsystem {
                        index: k + 1,
                        radius,
                    });
                }
                _ => {}
            }
        }
    }
    if !violations.is_empty() {
        return Err(Violations(violations));
    }

    let family = SubsystemFamily::new(raw.matrices).expect("shapes checked above");
    let bounds = DwellBounds::new(raw.delta, raw.max_dwell).expect("order checked above");
    let graph = SwitchGraph::new(n, raw.edges).expect("edges checked above");
    Ok(Instance::new(family, bounds, graph))
}

/// `M = max_ℓ ‖A_ℓ‖`.
pub fn family_bound_m(family: &SubsystemFamily) -> f64 {
    family
        .matrices()
        .iter()
        .map(|m| linalg::spectral_norm(m).expect("family matrices are finite"))
        .fold(0.0, f64::max)
}

/// All `u → v` paths with pairwise-distinct interior vertices avoiding
/// `{u, v}`, at most `max_interior` of them, in lexicographic order. The
/// direct path is included iff `(u, v)` is an edge.
pub fn enumerate_paths(
    graph: &SwitchGraph,
    u: usize,
    v: usize,
    max_interior: usize,
) -> Result<Vec<Path>> {
    if u == v {
        return Err(Error::InvalidInput(format!(
            "path endpoints must differ, got {u} -> {v}"
        )));
    }
    check_vertex(graph, u)?;
    check_vertex(graph, v)?;
    Ok(search_paths(graph, u, v, max_interior, false))
}

/// Cycles `u → u` through at least one interior vertex, with the same
/// interior rules as [`enumerate_paths`]. Used when a stable subsystem is
/// combined with itself.
pub fn enumerate_cycles(graph: &SwitchGraph, u: usize, max_interior: usize) -> Result<Vec<Path>> {
    check_vertex(graph, u)?;
    Ok(search_paths(graph, u, u, max_interior, true))
}

fn check_vertex(graph: &SwitchGraph, v: usize) -> Result<()> {
    if (1..=graph.vertex_count()).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "vertex {v} outside 1..={}",
            graph.vertex_count()
        )))
    }
}

fn search_paths(
    graph: &SwitchGraph,
    u: usize,
    v: usize,
    max_interior: usize,
    need_interior: bool,
) -> Vec<Path> {
    let mut out = Vec::new();
    let mut stack = vec![u];
    let mut on_path = vec![false; graph.vertex_count() + 1];
    extend(
        graph,
        v,
        max_interior,
        need_interior,
        &mut stack,
        &mut on_path,
        &mut out,
    );
    out.sort();
    out
}

fn extend(
    graph: &SwitchGraph,
    target: usize,
    max_interior: usize,
    need_interior: bool,
    stack: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Path>,
) {
    let last = *stack.last().expect("stack starts with the source");
    let interior_len = stack.len() - 1;
    let source = stack[0];
    for next in graph.successors(last) {
        if next == target {
            if !(need_interior && interior_len == 0) {
                let mut vertices = stack.clone();
                vertices.push(target);
                out.push(Path { vertices });
            }
        } else if next != source && !on_path[next] && interior_len < max_interior {
            on_path[next] = true;
            stack.push(next);
            extend(
                graph,
                target,
                max_interior,
                need_interior,
                stack,
                on_path,
                out,
            );
            stack.pop();
            on_path[next] = false;
        }
    }
}

/// `A_{w_{n-1}}^b ⋯ A_{w_1}^b`; the identity for a path without interior.
pub fn interior_product(family: &SubsystemFamily, path: &Path, b: u32) -> Matrix {
    path.interior()
        .iter()
        .fold(Matrix::identity(family.dimension()), |acc, &w| {
            &family.power(w, b) * &acc
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{reference_edges, reference_family};
    use proptest::prelude::*;

    fn raw(matrices: Vec<Matrix>, delta: u32, max: u32) -> RawInstance {
        RawInstance {
            matrices,
            delta,
            max_dwell: max,
            edges: reference_edges(),
        }
    }

    #[test]
    fn reference_instance_is_valid() {
        assert!(validate_instance(raw(reference_family(), 2, 3), false).is_ok());
    }

    #[test]
    fn equal_dwell_bounds_are_rejected() {
        let err = validate_instance(raw(reference_family(), 3, 3), false).unwrap_err();
        assert_eq!(err.0, vec![Violation::DwellOrder { delta: 3, max: 3 }]);
    }

    #[test]
    fn stable_subsystem_rejected_unless_allowed() {
        let mut ms = reference_family();
        ms[1] = Matrix::diag(&[0.5, 0.5]);
        let err = validate_instance(raw(ms.clone(), 2, 3), false).unwrap_err();
        assert!(matches!(
            err.0[..],
            [Violation::StableSubsystem { index: 2, .. }]
        ));
        assert!(validate_instance(raw(ms, 2, 3), true).is_ok());
    }

    #[test]
    fn collects_every_violation() {
        let mut ms = reference_family();
        ms.push(Matrix::identity(3));
        let mut r = raw(ms, 0, 3);
        r.edges.push((1, 9));
        r.edges.push((2, 2));
        let err = validate_instance(r, false).unwrap_err();
        assert_eq!(err.0.len(), 4, "{err}");
    }

    #[test]
    fn bound_m() {
        let fam = SubsystemFamily::new(reference_family()).unwrap();
        assert!((family_bound_m(&fam) - 1.41).abs() <= 0.005);
        let one = SubsystemFamily::new(vec![Matrix::identity(2)]).unwrap();
        assert!((family_bound_m(&one) - 1.0).abs() < 1e-14);
        let two = SubsystemFamily::new(vec![Matrix::diag(&[2.0, 1.0]), Matrix::diag(&[0.5, 3.0])])
            .unwrap();
        assert!((family_bound_m(&two) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn reference_paths_three_to_one() {
        let g = SwitchGraph::new(4, reference_edges()).unwrap();
        let paths = enumerate_paths(&g, 3, 1, 2).unwrap();
        let got: Vec<_> = paths.iter().map(|p| p.vertices().to_vec()).collect();
        assert_eq!(got, vec![vec![3, 2, 1], vec![3, 4, 1]]);
    }

    #[test]
    fn direct_edge_only() {
        let g = SwitchGraph::new(3, [(1, 2)]).unwrap();
        let paths = enumerate_paths(&g, 1, 2, 1).unwrap();
        assert_eq!(paths, vec![Path::direct(1, 2)]);
        assert_eq!(paths[0].length(), 0);
    }

    #[test]
    fn disconnected_and_degenerate() {
        let g = SwitchGraph::new(3, [(1, 2)]).unwrap();
        assert!(enumerate_paths(&g, 2, 1, 1).unwrap().is_empty());
        assert!(enumerate_paths(&g, 1, 1, 1).is_err());
        assert!(enumerate_paths(&g, 1, 7, 1).is_err());
    }

    #[test]
    fn max_interior_caps_length() {
        let g = SwitchGraph::complete(5);
        assert!(enumerate_paths(&g, 1, 2, 1)
            .unwrap()
            .iter()
            .all(|p| p.length() <= 1));
        assert_eq!(
            enumerate_paths(&g, 1, 2, 0).unwrap(),
            vec![Path::direct(1, 2)]
        );
    }

    #[test]
    fn cycles_need_interior() {
        let g = SwitchGraph::new(4, reference_edges()).unwrap();
        let cycles = enumerate_cycles(&g, 1, 3).unwrap();
        let got: Vec<_> = cycles.iter().map(|p| p.vertices().to_vec()).collect();
        assert_eq!(got, vec![vec![1, 2, 1], vec![1, 2, 3, 4, 1]]);
    }

    #[test]
    fn interior_products() {
        let fam = SubsystemFamily::new(reference_family()).unwrap();
        assert_eq!(
            interior_product(&fam, &Path::direct(1, 3), 2),
            Matrix::identity(2)
        );

        let p = Path::new(vec![3, 2, 1]).unwrap();
        assert!(interior_product(&fam, &p, 2).max_abs_diff(&fam.power(2, 2)) == 0.0);

        // Interior 1 then 2: the later vertex multiplies on the left.
        let p = Path::new(vec![3, 1, 2, 4]).unwrap();
        let a1 = fam.matrix(1);
        let a2 = fam.matrix(2);
        let expected = &(&(a2 * a2) * a1) * a1;
        assert!(interior_product(&fam, &p, 2).max_abs_diff(&expected) < 1e-15);
    }

    fn falling(n: usize, k: usize) -> usize {
        (0..k).map(|i| n - i).product()
    }

    proptest! {
        #[test]
        fn complete_graph_path_count(n in 2usize..=6, u in 1usize..=6, v in 1usize..=6) {
            prop_assume!(u <= n && v <= n && u != v);
            let g = SwitchGraph::complete(n);
            let paths = enumerate_paths(&g, u, v, n - 2).unwrap();
            let expected: usize = (0..=n - 2).map(|k| falling(n - 2, k)).sum();
            prop_assert_eq!(paths.len(), expected);
        }

        #[test]
        fn enumerated_paths_are_valid(
            n in 2usize..=6,
            mask in prop::collection::vec(any::<bool>(), 36),
            max_interior in 0usize..=4,
        ) {
            let edges: Vec<_> = (1..=n)
                .flat_map(|k| (1..=n).map(move |l| (k, l)))
                .filter(|&(k, l)| k != l && mask[(k - 1) * 6 + (l - 1)])
                .collect();
            let g = SwitchGraph::new(n, edges).unwrap();
            let paths = enumerate_paths(&g, 1, 2, max_interior).unwrap();
            for w in paths.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            for p in &paths {
                prop_assert!(p.is_valid_in(&g));
                prop_assert!(p.length() <= max_interior);
                prop_assert_eq!((p.source(), p.destination()), (1, 2));
            }
        }

        #[test]
        fn single_interior_product_is_power(w in 1usize..=4, b in 1u32..=4) {
            let fam = SubsystemFamily::new(reference_family()).unwrap();
            let (u, v) = if w == 1 { (2, 3) } else { (1, if w == 4 { 3 } else { 4 }) };
            let p = Path::new(vec![u, w, v]).unwrap();
            prop_assert_eq!(interior_product(&fam, &p, b), fam.power(w, b));
        }
    }
}
