//! Return-ratio conductances, stationary weights and the finite node measure.
//!
//! Edge conductances depend only on (kind, level): an edge between levels n
//! and n+1 carries `(3 lambda)^-n`, a horizontal edge at level n carries
//! `C1 (3 lambda)^-n` (type I) or `C2 (3 lambda)^-n` (type II). With these
//! weights the father edge at every node carries exactly `lambda` times the
//! total weight of its child edges, which is the defining return ratio.

use crate::address::Word;
use crate::error::{Error, Result};
use crate::graph::{horizontal_neighbors, EdgeKind, Graph};

/// Model parameters. `gamma` is the base of the node measure
/// `m(x) = (gamma / (3 lambda))^{|x|}` and must stay below `lambda`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConductanceParams {
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
    pub gamma: f64,
}

impl ConductanceParams {
    pub fn new(lambda: f64, c1: f64, c2: f64, gamma: f64) -> Result<ConductanceParams> {
        let p = ConductanceParams { lambda, c1, c2, gamma };
        p.validate()?;
        Ok(p)
    }

    /// Reference parameters: lambda = 1/4 sits inside the regular regime
    /// (1/5, 1/3) and gives beta = 2.
    pub fn reference() -> ConductanceParams {
        ConductanceParams { lambda: 0.25, c1: 1.0, c2: 1.0, gamma: 0.125 }
    }

    pub fn with_lambda(lambda: f64) -> Result<ConductanceParams> {
        ConductanceParams::new(lambda, 1.0, 1.0, lambda / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidParams(format!(
                "lambda = {} must lie in (0,1)",
                self.lambda
            )));
        }
        if !(self.c1 > 0.0) || !(self.c2 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "c1 = {}, c2 = {} must be positive",
                self.c1, self.c2
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < self.lambda) {
            return Err(Error::InvalidParams(format!(
                "gamma = {} must lie in (0, lambda) = (0, {})",
                self.gamma, self.lambda
            )));
        }
        Ok(())
    }

    /// `beta = -log lambda / log 2`.
    pub fn beta(&self) -> f64 {
        -self.lambda.ln() / std::f64::consts::LN_2
    }

    /// Hausdorff dimension of the gasket, `alpha = log 3 / log 2`.
    pub fn alpha() -> f64 {
        3.0f64.ln() / std::f64::consts::LN_2
    }

    /// True when lambda lies in the regular regime (1/5, 1/3).
    pub fn in_regular_regime(&self) -> bool {
        self.lambda > 0.2 && self.lambda < 1.0 / 3.0
    }

    pub fn require_regular_regime(&self) -> Result<()> {
        if self.in_regular_regime() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "lambda = {} must lie in (1/5, 1/3) for this operation",
                self.lambda
            )))
        }
    }

    /// Conductance of a vertical edge between levels `n` and `n+1`.
    pub fn vertical_conductance(&self, lower_level: usize) -> f64 {
        (3.0 * self.lambda).powi(-(lower_level as i32))
    }

    /// Conductance of a horizontal edge at `level` of the given type.
    pub fn horizontal_conductance(&self, kind: EdgeKind, level: usize) -> f64 {
        let base = (3.0 * self.lambda).powi(-(level as i32));
        match kind {
            EdgeKind::HorizontalI => self.c1 * base,
            EdgeKind::HorizontalII => self.c2 * base,
            EdgeKind::Vertical => panic!("vertical edges are keyed by their lower level"),
        }
    }

    /// Conductance of the edge between adjacent `x` and `y` from kind and
    /// levels alone.
    pub fn edge_conductance(&self, kind: EdgeKind, level_x: usize, level_y: usize) -> f64 {
        match kind {
            EdgeKind::Vertical => self.vertical_conductance(level_x.min(level_y)),
            _ => {
                debug_assert_eq!(level_x, level_y);
                self.horizontal_conductance(kind, level_x)
            }
        }
    }

    /// Node measure `m(x) = (gamma / (3 lambda))^{|x|}`.
    pub fn measure_m(&self, x: &Word) -> f64 {
        (self.gamma / (3.0 * self.lambda)).powi(x.len() as i32)
    }

    /// Total mass `m(X) = sum_n (gamma/lambda)^n = 1 / (1 - gamma/lambda)`.
    pub fn measure_total(&self) -> f64 {
        1.0 / (1.0 - self.gamma / self.lambda)
    }

    /// Mass of the ball B_depth.
    pub fn measure_ball(&self, depth: usize) -> f64 {
        let q = self.gamma / self.lambda;
        (1.0 - q.powi(depth as i32 + 1)) / (1.0 - q)
    }

    /// Closed-form expected lifetime of the continuous-time walk from the
    /// root: `(G(o,o) / pi(o)) * sum gamma^n`.
    pub fn expected_lifetime_from_root(&self) -> f64 {
        (1.0 / (1.0 - self.lambda)) / 3.0 / (1.0 - self.gamma)
    }

    /// Closed-form Green value `G(o,o) = 1 / (1 - lambda)`.
    pub fn green_oo(&self) -> f64 {
        1.0 / (1.0 - self.lambda)
    }

    /// Stationary weight from the word rule alone, valid at any depth:
    /// father + three children + horizontal neighbors.
    pub fn pi_local(&self, x: &Word) -> f64 {
        let n = x.len();
        let mut pi = 3.0 * self.vertical_conductance(n);
        if n > 0 {
            pi += self.vertical_conductance(n - 1);
            for (_, kind) in horizontal_neighbors(x) {
                pi += self.horizontal_conductance(kind, n);
            }
        }
        pi
    }

    /// Neighbor list with conductances from the word rule alone. The order is
    /// fixed (father, children, siblings, bridge) so that sampling from it is
    /// reproducible.
    pub fn local_edges(&self, x: &Word) -> Vec<(Word, f64)> {
        let n = x.len();
        let mut out = Vec::with_capacity(7);
        if let Some(f) = x.father() {
            out.push((f, self.vertical_conductance(n - 1)));
        }
        let c_child = self.vertical_conductance(n);
        for letter in 0..3u8 {
            out.push((x.child(letter).unwrap(), c_child));
        }
        for (nb, kind) in horizontal_neighbors(x) {
            out.push((nb, self.horizontal_conductance(kind, n)));
        }
        out
    }
}

/// A built graph together with parameters and cached stationary weights.
pub struct WeightedGraph {
    graph: Graph,
    params: ConductanceParams,
    pi: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(graph: Graph, params: ConductanceParams) -> Result<WeightedGraph> {
        params.validate()?;
        let mut pi = vec![0.0; graph.node_count()];
        for idx in 0..graph.node_count() {
            let w = graph.word_at(idx);
            let n = w.len();
            // Children below the truncation still contribute to pi; this is
            // what kills the walk at the frontier of the ball.
            let mut total = 3.0 * params.vertical_conductance(n);
            for &(nb, kind) in graph.neighbors_by_index(idx) {
                let nb_word = graph.word_at(nb as usize);
                if kind == EdgeKind::Vertical {
                    if nb_word.len() < n {
                        total += params.vertical_conductance(n - 1);
                    }
                } else {
                    total += params.horizontal_conductance(kind, n);
                }
            }
            pi[idx] = total;
        }
        Ok(WeightedGraph { graph, params, pi })
    }

    pub fn build(depth: usize, params: ConductanceParams) -> Result<WeightedGraph> {
        WeightedGraph::new(crate::graph::build_graph(depth)?, params)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn params(&self) -> &ConductanceParams {
        &self.params
    }

    pub fn depth(&self) -> usize {
        self.graph.depth()
    }

    /// Conductance of the edge between adjacent nodes.
    pub fn conductance(&self, x: &Word, y: &Word) -> Result<f64> {
        let kind = self
            .graph
            .edge_kind(x, y)
            .ok_or_else(|| Error::NotAdjacent(x.to_string(), y.to_string()))?;
        Ok(self.params.edge_conductance(kind, x.len(), y.len()))
    }

    /// Stationary weight `pi(x)`, the sum of all incident conductances of the
    /// infinite graph (cached).
    pub fn pi(&self, x: &Word) -> f64 {
        self.pi[self.graph.node_index(x)]
    }

    pub fn pi_by_index(&self, index: usize) -> f64 {
        self.pi[index]
    }

    /// One-step transition probability `P(x,y) = c(x,y) / pi(x)`.
    pub fn transition_prob(&self, x: &Word, y: &Word) -> Result<f64> {
        Ok(self.conductance(x, y)? / self.pi(x))
    }

    pub fn measure_m(&self, x: &Word) -> f64 {
        self.params.measure_m(x)
    }
}
