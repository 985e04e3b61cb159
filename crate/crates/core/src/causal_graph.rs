//! Concept-level causal graphs and the linear structural transform.
//!
//! A [`ConceptGraph`] is a weighted DAG over latent concepts. Its adjacency
//! matrix `C` (with `C[i][j]` the weight of edge `i -> j`) turns independent
//! latent codes `z` into structured codes `z'` by solving
//! `(I - Cᵀ) z' = z`, i.e. `z'_j = z_j + Σ_i C[i][j] z'_i` in topological
//! order. The solve is exact for DAGs and never forms an explicit inverse.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub weight: f64,
}

/// Dense `n × n` weight matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyMatrix {
    n: usize,
    data: Vec<f64>,
}

impl AdjacencyMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "adjacency row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, parent: usize, child: usize) -> f64 {
        self.data[parent * self.n + child]
    }

    pub fn set(&mut self, parent: usize, child: usize, weight: f64) {
        self.data[parent * self.n + child] = weight;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&w| w == 0.0)
    }

    /// Nonzero entries as edges, in row-major order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for parent in 0..self.n {
            for child in 0..self.n {
                let weight = self.get(parent, child);
                if weight != 0.0 {
                    out.push(Edge {
                        parent,
                        child,
                        weight,
                    });
                }
            }
        }
        out
    }

    /// Ok iff the graph induced by nonzero entries is acyclic. Returns a
    /// topological order on success.
    pub fn validate_dag(&self) -> Result<Vec<usize>> {
        let labels: Vec<String> = (0..self.n).map(|i| i.to_string()).collect();
        self.validate_dag_labeled(&labels)
    }

    fn validate_dag_labeled(&self, labels: &[String]) -> Result<Vec<usize>> {
        if let Some(w) = self.data.iter().find(|w| !w.is_finite()) {
            return Err(Error::Graph(format!("non-finite edge weight {w}")));
        }
        let children: Vec<Vec<usize>> = (0..self.n)
            .map(|p| (0..self.n).filter(|&c| self.get(p, c) != 0.0).collect())
            .collect();
        match topological_order(&children) {
            Ok(order) => Ok(order),
            Err(cycle) => Err(Error::Cycle(
                cycle.into_iter().map(|i| labels[i].clone()).collect(),
            )),
        }
    }
}

/// Kahn's algorithm; on failure returns one directed cycle (first node repeated at the end).
fn topological_order(children: &[Vec<usize>]) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let n = children.len();
    let mut indegree = vec![0usize; n];
    for cs in children {
        for &c in cs {
            indegree[c] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every remaining node has a remaining parent; walk parents until a repeat.
    let remaining: Vec<bool> = indegree.iter().map(|&d| d > 0).collect();
    let start = remaining.iter().position(|&r| r).unwrap();
    let mut parent_of = vec![usize::MAX; n];
    for (p, cs) in children.iter().enumerate() {
        if !remaining[p] {
            continue;
        }
        for &c in cs {
            if remaining[c] && parent_of[c] == usize::MAX {
                parent_of[c] = p;
            }
        }
    }
    let mut seen = vec![usize::MAX; n];
    let mut path = Vec::new();
    let mut v = start;
    while seen[v] == usize::MAX {
        seen[v] = path.len();
        path.push(v);
        v = parent_of[v];
    }
    let mut cycle: Vec<usize> = path[seen[v]..].to_vec();
    cycle.reverse();
    cycle.push(cycle[0]);
    Err(cycle)
}

/// Labeled, weighted DAG over latent concepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptGraph {
    labels: Vec<String>,
    edges: Vec<Edge>,
}

impl ConceptGraph {
    pub fn new(labels: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let n = labels.len();
        let mut seen = BTreeSet::new();
        for e in &edges {
            if e.parent >= n || e.child >= n {
                return Err(Error::Graph(format!(
                    "edge {} -> {} references a node outside 0..{n}",
                    e.parent, e.child
                )));
            }
            if e.parent == e.child {
                return Err(Error::Graph(format!("self-loop on '{}'", labels[e.parent])));
            }
            if !e.weight.is_finite() {
                return Err(Error::Graph(format!(
                    "edge {} -> {} has non-finite weight",
                    labels[e.parent], labels[e.child]
                )));
            }
            if !seen.insert((e.parent, e.child)) {
                return Err(Error::Graph(format!(
                    "duplicate edge {} -> {}",
                    labels[e.parent], labels[e.child]
                )));
            }
        }
        let graph = Self { labels, edges };
        graph.adjacency().validate_dag_labeled(&graph.labels)?;
        Ok(graph)
    }

    /// Graph with `n` unnamed concepts and no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            labels: (0..n).map(|i| format!("c{}", i + 1)).collect(),
            edges: Vec::new(),
        }
    }

    pub fn from_adjacency(labels: Vec<String>, c: &AdjacencyMatrix) -> Result<Self> {
        if labels.len() != c.n() {
            return Err(Error::Dimension(format!(
                "{} labels for a {}x{} adjacency matrix",
                labels.len(),
                c.n(),
                c.n()
            )));
        }
        Self::new(labels, c.edges())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn adjacency(&self) -> AdjacencyMatrix {
        let mut c = AdjacencyMatrix::zeros(self.n());
        for e in &self.edges {
            c.set(e.parent, e.child, e.weight);
        }
        c
    }

    pub fn topological_order(&self) -> Vec<usize> {
        self.adjacency()
            .validate_dag()
            .expect("ConceptGraph is acyclic by construction")
    }

    /// Parse the text interchange format:
    ///
    /// ```text
    /// # comment
    /// n 3
    /// labels intelligence career salary
    /// intelligence career 1.0
    /// 0 2 0.5
    /// ```
    ///
    /// Edge endpoints may be labels or zero-based indices.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut labels: Option<Vec<String>> = None;
        let mut raw_edges: Vec<(usize, String, String, String)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens[0] {
                "n" => {
                    if tokens.len() != 2 {
                        return Err(parse_err(lineno, "expected `n <count>`"));
                    }
                    n = Some(
                        tokens[1]
                            .parse()
                            .map_err(|_| parse_err(lineno, "node count is not an integer"))?,
                    );
                }
                "labels" => labels = Some(tokens[1..].iter().map(|s| s.to_string()).collect()),
                _ => {
                    if tokens.len() != 3 {
                        return Err(parse_err(lineno, "expected `parent child weight`"));
                    }
                    raw_edges.push((
                        lineno,
                        tokens[0].to_string(),
                        tokens[1].to_string(),
                        tokens[2].to_string(),
                    ));
                }
            }
        }
        let n = n.ok_or_else(|| Error::Graph("missing `n <count>` line".into()))?;
        let labels = labels.unwrap_or_else(|| (0..n).map(|i| format!("c{}", i + 1)).collect());
        if labels.len() != n {
            return Err(Error::Graph(format!(
                "declared n = {n} but {} labels given",
                labels.len()
            )));
        }
        let resolve = |lineno: usize, token: &str| -> Result<usize> {
            if let Some(i) = labels.iter().position(|l| l == token) {
                return Ok(i);
            }
            match token.parse::<usize>() {
                Ok(i) if i < n => Ok(i),
                _ => Err(parse_err(lineno, &format!("unknown node '{token}'"))),
            }
        };
        let mut edges = Vec::with_capacity(raw_edges.len());
        for (lineno, p, c, w) in &raw_edges {
            let weight: f64 = w
                .parse()
                .map_err(|_| parse_err(*lineno, &format!("weight '{w}' is not a number")))?;
            edges.push(Edge {
                parent: resolve(*lineno, p)?,
                child: resolve(*lineno, c)?,
                weight,
            });
        }
        Self::new(labels, edges)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n {}", self.n());
        let _ = writeln!(out, "labels {}", self.labels.join(" "));
        for e in &self.edges {
            let _ = writeln!(
                out,
                "{} {} {:?}",
                self.labels[e.parent], self.labels[e.child], e.weight
            );
        }
        out
    }
}

fn parse_err(lineno: usize, msg: &str) -> Error {
    Error::Graph(format!("line {}: {msg}", lineno + 1))
}

/// How the structured code is built from the independent code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemMode {
    /// `z' = (I - Cᵀ)⁻¹ z`.
    #[default]
    Exact,
    /// `z' = (I + Cᵀ) z`, the single-hop expansion.
    OneStep,
}

/// Precomputed linear SEM `z -> z'` for a validated adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureTransform {
    c: AdjacencyMatrix,
    order: Vec<usize>,
    parents: Vec<Vec<(usize, f64)>>,
    children: Vec<Vec<(usize, f64)>>,
    mode: SemMode,
}

impl StructureTransform {
    pub fn new(c: &AdjacencyMatrix, mode: SemMode) -> Result<Self> {
        let order = c.validate_dag()?;
        let n = c.n();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for e in c.edges() {
            parents[e.child].push((e.parent, e.weight));
            children[e.parent].push((e.child, e.weight));
        }
        Ok(Self {
            c: c.clone(),
            order,
            parents,
            children,
            mode,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(&AdjacencyMatrix::zeros(n), SemMode::Exact).expect("empty graph is a DAG")
    }

    pub fn n(&self) -> usize {
        self.c.n()
    }

    pub fn adjacency(&self) -> &AdjacencyMatrix {
        &self.c
    }

    pub fn mode(&self) -> SemMode {
        self.mode
    }

    fn forward_row(&self, z: &[f64], out: &mut [f64]) {
        match self.mode {
            SemMode::Exact => {
                for &j in &self.order {
                    let mut v = z[j];
                    for &(i, w) in &self.parents[j] {
                        v += w * out[i];
                    }
                    out[j] = v;
                }
            }
            SemMode::OneStep => {
                for j in 0..z.len() {
                    let mut v = z[j];
                    for &(i, w) in &self.parents[j] {
                        v += w * z[i];
                    }
                    out[j] = v;
                }
            }
        }
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.n() {
            return Err(Error::Dimension(format!(
                "latent width {width} does not match graph with {} concepts",
                self.n()
            )));
        }
        Ok(())
    }

    /// Apply the transform to every row of `z` (batch × n).
    pub fn apply(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(z.ncols())?;
        let mut out = Array2::zeros(z.raw_dim());
        let mut zrow = vec![0.0; self.n()];
        let mut orow = vec![0.0; self.n()];
        for (src, mut dst) in z.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
            zrow.iter_mut().zip(src.iter()).for_each(|(a, b)| *a = *b);
            self.forward_row(&zrow, &mut orow);
            dst.iter_mut().zip(orow.iter()).for_each(|(a, b)| *a = *b);
        }
        Ok(out)
    }

    /// Pull back `grad` (d loss / d z') to d loss / d z.
    ///
    /// For the exact transform this solves `(I - C) u = g` in reverse
    /// topological order.
    pub fn backward(&self, grad: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(grad.ncols())?;
        let n = self.n();
        let mut out = Array2::zeros(grad.raw_dim());
        for (g, mut u) in grad.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
            match self.mode {
                SemMode::Exact => {
                    for &i in self.order.iter().rev() {
                        let mut v = g[i];
                        for &(k, w) in &self.children[i] {
                            v += w * u[k];
                        }
                        u[i] = v;
                    }
                }
                SemMode::OneStep => {
                    for i in 0..n {
                        let mut v = g[i];
                        for &(k, w) in &self.children[i] {
                            v += w * g[k];
                        }
                        u[i] = v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// d loss / d C[i][j] summed over the batch, given the forward input `z`
    /// and the upstream gradient on `z'`. Entries outside the edge set are
    /// still populated, so the result is the full matrix gradient.
    pub fn weight_gradient(&self, z: ArrayView2<f64>, grad: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(z.ncols())?;
        let n = self.n();
        let mut out = Array2::zeros((n, n));
        match self.mode {
            SemMode::Exact => {
                let zp = self.apply(z)?;
                let u = self.backward(grad)?;
                // dz'/dC_ij = M⁻¹ e_j z'_i  =>  dL/dC_ij = u_j z'_i
                for (zr, ur) in zp.axis_iter(Axis(0)).zip(u.axis_iter(Axis(0))) {
                    for i in 0..n {
                        for j in 0..n {
                            out[[i, j]] += ur[j] * zr[i];
                        }
                    }
                }
            }
            SemMode::OneStep => {
                for (zr, gr) in z.axis_iter(Axis(0)).zip(grad.axis_iter(Axis(0))) {
                    for i in 0..n {
                        for j in 0..n {
                            out[[i, j]] += gr[j] * zr[i];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Jacobian column d z' / d C[parent][child] for a single input vector.
    pub fn weight_jacobian(&self, z: &[f64], parent: usize, child: usize) -> Result<Vec<f64>> {
        self.check_width(z.len())?;
        let n = self.n();
        if parent >= n || child >= n {
            return Err(Error::Dimension(format!(
                "entry ({parent}, {child}) outside a {n}x{n} matrix"
            )));
        }
        let zv = ndarray::ArrayView2::from_shape((1, n), z).expect("row view");
        let zp = self.apply(zv)?;
        let mut seed = vec![0.0; n];
        match self.mode {
            SemMode::Exact => {
                // M⁻¹ e_child scaled by z'_parent: solve the forward system with a unit impulse.
                seed[child] = zp[[0, parent]];
                let sv = ndarray::ArrayView2::from_shape((1, n), &seed).expect("row view");
                Ok(self.apply(sv)?.row(0).to_vec())
            }
            SemMode::OneStep => {
                seed[child] = z[parent];
                Ok(seed)
            }
        }
    }
}

/// Directed graph over named nodes with some nodes marked sensitive, used to
/// decide which inputs are admissible for a counterfactually fair predictor.
#[derive(Debug, Clone)]
pub struct CausalDiagram {
    nodes: Vec<String>,
    children: Vec<Vec<usize>>,
    sensitive: BTreeSet<usize>,
}

impl CausalDiagram {
    pub fn new(nodes: Vec<String>, edges: &[(&str, &str)], sensitive: &[&str]) -> Result<Self> {
        let mut children = vec![Vec::new(); nodes.len()];
        let index = |name: &str| -> Result<usize> {
            nodes
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Graph(format!("unknown node '{name}'")))
        };
        for (p, c) in edges {
            let (p, c) = (index(p)?, index(c)?);
            children[p].push(c);
        }
        let sensitive = sensitive
            .iter()
            .map(|s| index(s))
            .collect::<Result<BTreeSet<_>>>()?;
        if let Err(cycle) = topological_order(&children) {
            return Err(Error::Cycle(
                cycle.into_iter().map(|i| nodes[i].clone()).collect(),
            ));
        }
        Ok(Self {
            nodes,
            children,
            sensitive,
        })
    }

    /// The attribute-level template used to argue fairness of `Z'_x`:
    /// sensitive `A`, the four covariate subsets split by their relation to
    /// `A` and `Y`, the target, and the two learned representations.
    /// `Z_a` is tagged sensitive because it encodes `A`.
    pub fn fairness_template() -> Self {
        let nodes = ["A", "X_A_Y", "X_N_Y", "X_A_N", "X_N_N", "Y", "Z_a", "Z_x'"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let edges = [
            ("A", "X_A_Y"),
            ("A", "X_A_N"),
            ("A", "Y"),
            ("X_A_Y", "Y"),
            ("X_N_Y", "Y"),
            ("Y", "X_A_N"),
            ("Z_a", "A"),
            ("Z_x'", "X_A_Y"),
            ("Z_x'", "X_N_Y"),
            ("Z_x'", "X_N_N"),
            ("Z_x'", "Y"),
        ];
        Self::new(nodes, &edges, &["A", "Z_a"]).expect("template is a DAG")
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    /// True iff no directed path from a sensitive node reaches `node`. A
    /// sensitive node counts as its own descendant.
    pub fn is_non_descendant(&self, node: &str) -> Result<bool> {
        let target = self
            .nodes
            .iter()
            .position(|n| n == node)
            .ok_or_else(|| Error::Graph(format!("unknown node '{node}'")))?;
        let mut seen = vec![false; self.nodes.len()];
        let mut queue: VecDeque<usize> = self.sensitive.iter().copied().collect();
        for &s in &self.sensitive {
            seen[s] = true;
        }
        while let Some(v) = queue.pop_front() {
            if v == target {
                return Ok(false);
            }
            for &c in &self.children[v] {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn adult_c(l12: f64, l13: f64, l23: f64) -> AdjacencyMatrix {
        AdjacencyMatrix::from_rows(&[
            vec![0.0, l12, l13],
            vec![0.0, 0.0, l23],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn zero_matrix_is_a_dag() {
        assert!(AdjacencyMatrix::zeros(4).validate_dag().is_ok());
    }

    #[test]
    fn two_cycle_is_reported() {
        let c = AdjacencyMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        match c.validate_dag() {
            Err(Error::Cycle(nodes)) => {
                assert_eq!(nodes.len(), 3);
                assert_eq!(nodes.first(), nodes.last());
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn longer_cycle_names_its_members() {
        let mut c = AdjacencyMatrix::zeros(4);
        c.set(0, 1, 1.0);
        c.set(1, 2, 1.0);
        c.set(2, 3, 1.0);
        c.set(3, 1, 1.0);
        let Err(Error::Cycle(nodes)) = c.validate_dag() else {
            panic!("expected a cycle")
        };
        let members: BTreeSet<_> = nodes.iter().cloned().collect();
        assert_eq!(members, ["1", "2", "3"].iter().map(|s| s.to_string()).collect());
    }

    #[test]
    fn upper_triangular_adult_matrix_is_ok() {
        assert!(adult_c(1.0, 1.0, 1.0).validate_dag().is_ok());
    }

    #[test]
    fn transform_identity_without_edges() {
        let t = StructureTransform::new(&AdjacencyMatrix::zeros(3), SemMode::Exact).unwrap();
        let z = array![[0.3, -1.2, 4.0], [1.0, 2.0, 3.0]];
        assert_eq!(t.apply(z.view()).unwrap(), z);
    }

    #[test]
    fn transform_two_nodes_by_hand() {
        let mut c = AdjacencyMatrix::zeros(2);
        c.set(0, 1, 0.5);
        let t = StructureTransform::new(&c, SemMode::Exact).unwrap();
        let out = t.apply(array![[2.0, 0.0]].view()).unwrap();
        assert_eq!(out, array![[2.0, 1.0]]);
    }

    #[test]
    fn transform_adult_unit_weights_includes_composed_path() {
        let t = StructureTransform::new(&adult_c(1.0, 1.0, 1.0), SemMode::Exact).unwrap();
        let out = t.apply(array![[1.0, 1.0, 1.0]].view()).unwrap();
        assert_eq!(out, array![[1.0, 2.0, 4.0]]);
    }

    #[test]
    fn one_step_mode_drops_composed_path() {
        let t = StructureTransform::new(&adult_c(1.0, 1.0, 1.0), SemMode::OneStep).unwrap();
        let out = t.apply(array![[1.0, 1.0, 1.0]].view()).unwrap();
        assert_eq!(out, array![[1.0, 2.0, 3.0]]);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let t = StructureTransform::identity(3);
        assert!(matches!(
            t.apply(array![[1.0, 2.0]].view()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn graph_text_round_trip() {
        let text = "# adult concepts\nn 3\nlabels c1 c2 c3\nc1 c2 1\nc1 c3 1\n1 2 0.5\n";
        let g = ConceptGraph::parse(text).unwrap();
        assert_eq!(g.adjacency(), adult_c(1.0, 1.0, 0.5));
        assert_eq!(ConceptGraph::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn graph_parse_rejects_cycles_and_junk() {
        assert!(matches!(
            ConceptGraph::parse("n 2\n0 1 1\n1 0 1\n"),
            Err(Error::Cycle(_))
        ));
        assert!(ConceptGraph::parse("n 2\n0 5 1\n").is_err());
        assert!(ConceptGraph::parse("n 2\n0 1 abc\n").is_err());
        assert!(ConceptGraph::parse("0 1 1\n").is_err());
        assert!(ConceptGraph::parse("n 2\n0 0 1\n").is_err());
    }

    #[test]
    fn template_descendant_queries() {
        let g = CausalDiagram::fairness_template();
        assert!(g.is_non_descendant("X_N_Y").unwrap());
        assert!(g.is_non_descendant("X_N_N").unwrap());
        assert!(g.is_non_descendant("Z_x'").unwrap());
        assert!(!g.is_non_descendant("A").unwrap());
        assert!(!g.is_non_descendant("Z_a").unwrap());
        assert!(!g.is_non_descendant("X_A_Y").unwrap());
        assert!(!g.is_non_descendant("X_A_N").unwrap());
        assert!(!g.is_non_descendant("Y").unwrap());
        assert!(g.is_non_descendant("nope").is_err());
    }
}
