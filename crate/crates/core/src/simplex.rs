//! Network simplex for the masked transportation problem.
//!
//! Sources and sinks are joined by one arc per open mask cell; closed cells
//! simply have no arc. An extra root node carries one artificial arc per
//! source (`i -> root`) and per sink (`root -> j`), which gives a feasible
//! star-shaped starting tree. Phase one drives the artificial flow out
//! (artificial cost 1, real cost 0); phase two prices the real costs with the
//! artificial arcs capped at zero.
//!
//! Pricing uses the lowest-index eligible arc and ties in the ratio test go to
//! the lowest arc index (Bland's rule), so the pivot sequence is deterministic
//! and cannot cycle.

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::masking::MaskMatrix;

#[derive(Debug, Clone)]
struct Arc {
    tail: usize,
    head: usize,
    cost: f64,
    flow: f64,
    cap: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct FlowSolution {
    pub flows: Array2<f64>,
    pub pivots: usize,
}

struct Network {
    arcs: Vec<Arc>,
    in_tree: Vec<bool>,
    real_arcs: usize,
    root: usize,
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    adjacency: Vec<Vec<usize>>,
}

const NONE: usize = usize::MAX;

impl Network {
    fn rebuild_tree(&mut self) {
        let nodes = self.root + 1;
        for list in &mut self.adjacency {
            list.clear();
        }
        for (a, arc) in self.arcs.iter().enumerate() {
            if self.in_tree[a] {
                self.adjacency[arc.tail].push(a);
                self.adjacency[arc.head].push(a);
            }
        }
        self.parent.iter_mut().for_each(|v| *v = NONE);
        self.parent[self.root] = self.root;
        self.parent_arc[self.root] = NONE;
        self.depth[self.root] = 0;
        self.potential[self.root] = 0.0;
        let mut queue = VecDeque::with_capacity(nodes);
        queue.push_back(self.root);
        while let Some(u) = queue.pop_front() {
            for k in 0..self.adjacency[u].len() {
                let a = self.adjacency[u][k];
                let arc = &self.arcs[a];
                let v = if arc.tail == u { arc.head } else { arc.tail };
                if self.parent[v] != NONE {
                    continue;
                }
                self.parent[v] = u;
                self.parent_arc[v] = a;
                self.depth[v] = self.depth[u] + 1;
                // tree arcs have zero reduced cost: y_head = y_tail + c
                self.potential[v] = if arc.tail == u {
                    self.potential[u] + arc.cost
                } else {
                    self.potential[u] - arc.cost
                };
                queue.push_back(v);
            }
        }
        debug_assert!(self.parent.iter().all(|&p| p != NONE));
    }

    fn reduced_cost(&self, a: usize) -> f64 {
        let arc = &self.arcs[a];
        arc.cost + self.potential[arc.tail] - self.potential[arc.head]
    }

    /// Lowest-index arc that can improve the objective.
    fn entering_arc(&self, tol: f64) -> Option<usize> {
        (0..self.arcs.len()).find(|&a| {
            !self.in_tree[a] && self.arcs[a].flow < self.arcs[a].cap && self.reduced_cost(a) < -tol
        })
    }

    /// Pushes flow around the cycle closed by `entering`. Returns false when
    /// the cycle is unbounded.
    fn pivot(&mut self, entering: usize, flow_tol: f64) -> bool {
        let (u, v) = (self.arcs[entering].tail, self.arcs[entering].head);
        // flow travels u -> v along the entering arc and back v ~> u through the tree
        let mut cycle: Vec<(usize, bool)> = Vec::new();
        let mut tail_side: Vec<(usize, bool)> = Vec::new();
        let (mut a, mut b) = (v, u);
        while a != b {
            if self.depth[a] >= self.depth[b] {
                let arc = self.parent_arc[a];
                cycle.push((arc, self.arcs[arc].tail == a));
                a = self.parent[a];
            } else {
                let arc = self.parent_arc[b];
                tail_side.push((arc, self.arcs[arc].head == b));
                b = self.parent[b];
            }
        }
        cycle.extend(tail_side.into_iter().rev());

        let residual = |arc: &Arc, forward: bool| {
            if forward {
                arc.cap - arc.flow
            } else {
                arc.flow
            }
        };
        let mut delta = residual(&self.arcs[entering], true);
        let mut leaving = entering;
        for &(arc, forward) in &cycle {
            let r = residual(&self.arcs[arc], forward).max(0.0);
            if r < delta - flow_tol || (r <= delta + flow_tol && arc < leaving) {
                delta = r;
                leaving = arc;
            }
        }
        // use the exact minimum so that no other arc is pushed negative
        for &(arc, forward) in &cycle {
            delta = delta.min(residual(&self.arcs[arc], forward).max(0.0));
        }
        if !delta.is_finite() {
            return false;
        }

        self.arcs[entering].flow += delta;
        for &(arc, forward) in &cycle {
            let entry = &mut self.arcs[arc];
            if forward {
                entry.flow += delta;
            } else {
                entry.flow -= delta;
            }
            if entry.flow < 0.0 {
                entry.flow = 0.0;
            }
        }
        if leaving != entering {
            let forward = cycle.iter().find(|c| c.0 == leaving).map(|c| c.1).unwrap();
            let arc = &mut self.arcs[leaving];
            arc.flow = if forward { arc.cap } else { 0.0 };
            self.in_tree[leaving] = false;
            self.in_tree[entering] = true;
            self.rebuild_tree();
        }
        true
    }

    fn optimize(&mut self, tol: f64, flow_tol: f64, pivots: &mut usize) -> Result<()> {
        while let Some(entering) = self.entering_arc(tol) {
            if !self.pivot(entering, flow_tol) {
                return Err(Error::Infeasible("unbounded transport cycle".into()));
            }
            *pivots += 1;
        }
        Ok(())
    }
}

/// Exact minimum-cost flow from `supply` to `demand` over the open cells of
/// `mask`. Total supply and demand must agree.
pub(crate) fn transport_simplex(
    supply: ArrayView1<f64>,
    demand: ArrayView1<f64>,
    cost: ArrayView2<f64>,
    mask: &MaskMatrix,
) -> Result<FlowSolution> {
    let (m, n) = (supply.len(), demand.len());
    if cost.dim() != (m, n) || mask.dim() != (m, n) {
        return Err(Error::ShapeMismatch(format!(
            "cost {:?}, mask {:?}, masses ({m}, {n})",
            cost.dim(),
            mask.dim()
        )));
    }
    let total = supply.sum();
    let root = m + n;
    let mut arcs = Vec::with_capacity(m * n + m + n);
    let mut cells = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            if mask.allows(i, j) {
                arcs.push(Arc {
                    tail: i,
                    head: m + j,
                    cost: 0.0,
                    flow: 0.0,
                    cap: f64::INFINITY,
                });
                cells.push((i, j));
            }
        }
    }
    let real_arcs = arcs.len();
    for i in 0..m {
        arcs.push(Arc {
            tail: i,
            head: root,
            cost: 1.0,
            flow: supply[i],
            cap: f64::INFINITY,
        });
    }
    for j in 0..n {
        arcs.push(Arc {
            tail: root,
            head: m + j,
            cost: 1.0,
            flow: demand[j],
            cap: f64::INFINITY,
        });
    }
    let arc_count = arcs.len();
    let mut in_tree = vec![false; arc_count];
    in_tree[real_arcs..].iter_mut().for_each(|t| *t = true);
    let mut net = Network {
        arcs,
        in_tree,
        real_arcs,
        root,
        parent: vec![NONE; root + 1],
        parent_arc: vec![NONE; root + 1],
        depth: vec![0; root + 1],
        potential: vec![0.0; root + 1],
        adjacency: vec![Vec::new(); root + 1],
    };
    net.rebuild_tree();

    let flow_tol = 1e-15 * total.max(1.0);
    let mut pivots = 0;

    // phase one: minimize artificial flow
    net.optimize(1e-12, flow_tol, &mut pivots)?;
    let artificial: f64 = net.arcs[real_arcs..].iter().map(|a| a.flow).sum();
    if artificial > 1e-10 * total.max(1.0) {
        return Err(Error::Infeasible(format!(
            "{artificial:e} mass cannot be routed through the open cells"
        )));
    }

    // phase two: real costs, artificial arcs pinned at zero
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    for (arc, &(i, j)) in net.arcs[..real_arcs].iter_mut().zip(&cells) {
        arc.cost = cost[[i, j]];
    }
    for arc in &mut net.arcs[real_arcs..] {
        arc.cost = 0.0;
        arc.flow = 0.0;
        arc.cap = 0.0;
    }
    net.rebuild_tree();
    net.optimize(1e-12 * max_cost.max(f64::MIN_POSITIVE), flow_tol, &mut pivots)?;

    let mut flows = Array2::zeros((m, n));
    for (arc, &(i, j)) in net.arcs[..net.real_arcs].iter().zip(&cells) {
        flows[[i, j]] = arc.flow;
    }
    Ok(FlowSolution { flows, pivots })
}
