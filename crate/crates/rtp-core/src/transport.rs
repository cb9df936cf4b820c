//! Exact optimal transport between finite point-mass measures.
//!
//! States are embedded in Euclidean 3-space as (x, s1, s2) and the cost is
//! the Euclidean distance, so the optimal value is the W1 distance. The
//! solver is a transportation simplex over the bipartite supply/demand
//! graph; costs are computed on the fly, never stored as a matrix.

use crate::{Error, Result};

/// A finite measure as weighted points in (x, s1, s2) space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub points: Vec<[f64; 3]>,
    pub mass: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Drop zero-mass points and sort by (s1, s2, x). Sorting makes the
    /// simplex warm start nearly optimal for measures that mostly agree
    /// per velocity pair.
    fn cleaned(&self) -> (Vec<[f64; 3]>, Vec<f64>) {
        let mut idx: Vec<usize> = (0..self.points.len())
            .filter(|&i| self.mass[i] > 0.0)
            .collect();
        idx.sort_by(|&a, &b| {
            let (p, q) = (self.points[a], self.points[b]);
            (p[1], p[2], p[0])
                .partial_cmp(&(q[1], q[2], q[0]))
                .unwrap()
        });
        (
            idx.iter().map(|&i| self.points[i]).collect(),
            idx.iter().map(|&i| self.mass[i]).collect(),
        )
    }
}

fn dist(p: [f64; 3], q: [f64; 3]) -> f64 {
    let d0 = p[0] - q[0];
    let d1 = p[1] - q[1];
    let d2 = p[2] - q[2];
    (d0 * d0 + d1 * d1 + d2 * d2).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    i: usize,
    j: usize,
    flow: f64,
    alive: bool,
}

/// W1 distance between two measures of (nearly) equal total mass.
pub fn w1(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let (sp, sa) = mu.cleaned();
    let (tp, mut ta) = nu.cleaned();
    let ms: f64 = sa.iter().sum();
    let mt: f64 = ta.iter().sum();
    if (ms - mt).abs() > 1e-9 * ms.max(mt).max(1.0) {
        return Err(Error::MassMismatch(ms, mt));
    }
    if sp.is_empty() || tp.is_empty() {
        return Err(Error::Degenerate("empty measure".into()));
    }
    // balance exactly
    for a in &mut ta {
        *a *= ms / mt;
    }
    // fix tiny residual on the largest entries
    let ns = sp.len();
    let nt = tp.len();

    // northwest-corner start on the sorted supports
    let mut arcs: Vec<Arc> = Vec::with_capacity(ns + nt);
    {
        let (mut i, mut j) = (0, 0);
        let mut ra = sa[0];
        let mut rb = ta[0];
        loop {
            let f = ra.min(rb);
            arcs.push(Arc {
                i,
                j,
                flow: f,
                alive: true,
            });
            ra -= f;
            rb -= f;
            if i == ns - 1 && j == nt - 1 {
                break;
            }
            if ra <= rb && i < ns - 1 {
                i += 1;
                ra = sa[i];
            } else {
                j += 1;
                rb = ta[j];
            }
        }
    }

    // node ids: sources 0..ns, sinks ns..ns+nt
    let n_nodes = ns + nt;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for (id, a) in arcs.iter().enumerate() {
        adj[a.i].push(id);
        adj[ns + a.j].push(id);
    }

    let mut u = vec![0.0f64; ns];
    let mut v = vec![0.0f64; nt];
    let mut visited = vec![false; n_nodes];
    let mut stack: Vec<usize> = Vec::with_capacity(n_nodes);
    let scale: f64 = {
        let a = sp.iter().chain(&tp).fold([0.0f64; 2], |m, p| {
            [m[0].max(p[0].abs()), m[1].max(p[1].abs().max(p[2].abs()))]
        });
        (a[0] + a[1]).max(1.0)
    };
    let tol = 1e-12 * scale;

    let mut parent_arc = vec![usize::MAX; n_nodes];
    let mut parent = vec![usize::MAX; n_nodes];

    let recompute_potentials = |arcs: &Vec<Arc>,
                                    adj: &Vec<Vec<usize>>,
                                    u: &mut Vec<f64>,
                                    v: &mut Vec<f64>,
                                    visited: &mut Vec<bool>,
                                    stack: &mut Vec<usize>| {
        visited.iter_mut().for_each(|b| *b = false);
        u[0] = 0.0;
        visited[0] = true;
        stack.clear();
        stack.push(0);
        while let Some(node) = stack.pop() {
            for &id in &adj[node] {
                let a = &arcs[id];
                if !a.alive {
                    continue;
                }
                let (src, snk) = (a.i, ns + a.j);
                let other = if node == src { snk } else { src };
                if visited[other] {
                    continue;
                }
                visited[other] = true;
                let c = dist(sp[a.i], tp[a.j]);
                if other == snk {
                    v[a.j] = c - u[a.i];
                } else {
                    u[a.i] = c - v[a.j];
                }
                stack.push(other);
            }
        }
    };

    recompute_potentials(&arcs, &adj, &mut u, &mut v, &mut visited, &mut stack);

    let max_pivots = 400 * (ns + nt);
    let mut pivots = 0usize;
    let mut row = 0usize;
    let mut clean_rows = 0usize;
    while clean_rows < ns && pivots < max_pivots {
        // best entering arc in this supply row
        let mut best = -tol;
        let mut best_j = usize::MAX;
        for j in 0..nt {
            let rc = dist(sp[row], tp[j]) - u[row] - v[j];
            if rc < best {
                best = rc;
                best_j = j;
            }
        }
        if best_j == usize::MAX {
            clean_rows += 1;
            row = (row + 1) % ns;
            continue;
        }
        clean_rows = 0;
        pivots += 1;

        // cycle: tree path from source `row` to sink `best_j`
        let start = row;
        let goal = ns + best_j;
        visited.iter_mut().for_each(|b| *b = false);
        visited[start] = true;
        parent[start] = usize::MAX;
        stack.clear();
        stack.push(start);
        while let Some(node) = stack.pop() {
            if node == goal {
                break;
            }
            for &id in &adj[node] {
                let a = &arcs[id];
                if !a.alive {
                    continue;
                }
                let other = if node == a.i { ns + a.j } else { a.i };
                if visited[other] {
                    continue;
                }
                visited[other] = true;
                parent[other] = node;
                parent_arc[other] = id;
                stack.push(other);
            }
        }
        debug_assert!(visited[goal], "basis must be a spanning tree");

        // walk back from goal collecting the alternating cycle; the
        // entering arc adds flow, path arcs alternate starting with minus
        let mut path: Vec<usize> = Vec::new();
        let mut node = goal;
        while node != start {
            path.push(parent_arc[node]);
            node = parent[node];
        }
        // path[0] is adjacent to the sink; orientation: entering arc is
        // source->sink (+). Traversing from goal back to start, arcs
        // alternate -, +, -, ...
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (k, &id) in path.iter().enumerate() {
            if k % 2 == 0 {
                if arcs[id].flow < theta {
                    theta = arcs[id].flow;
                    leave = id;
                }
            }
        }
        for (k, &id) in path.iter().enumerate() {
            if k % 2 == 0 {
                arcs[id].flow -= theta;
            } else {
                arcs[id].flow += theta;
            }
        }
        // remove the leaving arc, insert the entering one
        arcs[leave].alive = false;
        let (li, lj) = (arcs[leave].i, arcs[leave].j);
        adj[li].retain(|&id| id != leave);
        adj[ns + lj].retain(|&id| id != leave);
        let id = arcs.len();
        arcs.push(Arc {
            i: row,
            j: best_j,
            flow: theta,
            alive: true,
        });
        adj[row].push(id);
        adj[ns + best_j].push(id);

        recompute_potentials(&arcs, &adj, &mut u, &mut v, &mut visited, &mut stack);
    }

    let cost = arcs
        .iter()
        .filter(|a| a.alive)
        .map(|a| a.flow * dist(sp[a.i], tp[a.j]))
        .sum();
    Ok(cost)
}
