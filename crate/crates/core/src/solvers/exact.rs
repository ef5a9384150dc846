//! Exact discrete OT.
//!
//! Uniform square problems reduce to linear assignment and are solved with a
//! shortest-augmenting-path (Hungarian / Jonker–Volgenant style) method in `O(n³)`.
//! Everything else goes through a network simplex on the bipartite transportation
//! graph, started from a north-west-corner basis with block-search pricing.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::{validate_problem, Coupling};
use crate::error::{Error, Result};

/// Solves `min ⟨γ, C⟩` over couplings with marginals `a`, `b`.
pub fn solve_exact(c: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> Result<Coupling> {
    let (a, b) = validate_problem(c, a, b)?;
    let n = a.len();
    if n == b.len() && is_uniform(&a) && is_uniform(&b) {
        let assignment = solve_assignment(c)?;
        let mut plan = DMatrix::zeros(n, n);
        for (i, &j) in assignment.iter().enumerate() {
            plan[(i, j)] = 1.0 / n as f64;
        }
        return Ok(Coupling::from_plan(plan, a, b, c, true, n));
    }
    let basis = network_simplex(c, &a, &b)?;
    Ok(Coupling::from_plan(basis.plan, a, b, c, true, basis.pivots))
}

fn is_uniform(w: &DVector<f64>) -> bool {
    let target = 1.0 / w.len() as f64;
    w.iter().all(|&x| (x - target).abs() <= 1e-15)
}

/// Minimum-cost assignment of rows to columns for an `n × m` cost matrix, `n ≤ m`.
/// Returns the column assigned to each row.
pub fn solve_assignment(c: &DMatrix<f64>) -> Result<Vec<usize>> {
    let (n, m) = c.shape();
    if n > m {
        return Err(Error::DimensionMismatch(format!("assignment needs rows <= columns, got {n}x{m}")));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("assignment costs".into()));
    }
    // 1-based potentials; index 0 is the virtual start column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = c[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if j1 == 0 {
                return Err(Error::Numerical("assignment search stalled".into()));
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![usize::MAX; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    Ok(assignment)
}

/// Optimal basic solution of a transportation problem with its dual potentials.
#[derive(Debug, Clone)]
pub struct TransportBasis {
    pub plan: DMatrix<f64>,
    /// Row potentials `uᵢ`; `uᵢ + vⱼ = Cᵢⱼ` on basic cells and `≤ Cᵢⱼ` elsewhere.
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    pub pivots: usize,
}

struct Tree {
    n: usize,
    m: usize,
    adj: Vec<Vec<usize>>,
    parent_arc: Vec<usize>,
    parent: Vec<usize>,
    depth: Vec<usize>,
}

impl Tree {
    fn endpoints(&self, arc: usize) -> (usize, usize) {
        (arc / self.m, self.n + arc % self.m)
    }

    fn add(&mut self, arc: usize) {
        let (r, c) = self.endpoints(arc);
        self.adj[r].push(arc);
        self.adj[c].push(arc);
    }

    fn remove(&mut self, arc: usize) {
        let (r, c) = self.endpoints(arc);
        self.adj[r].retain(|&a| a != arc);
        self.adj[c].retain(|&a| a != arc);
    }

    /// Re-roots the tree at node 0 and recomputes potentials.
    fn refresh(&mut self, costs: &[f64], pot: &mut [f64]) -> Result<()> {
        let total = self.n + self.m;
        let mut seen = vec![false; total];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        pot[0] = 0.0;
        self.depth[0] = 0;
        self.parent[0] = usize::MAX;
        let mut visited = 1;
        while let Some(node) = queue.pop_front() {
            for &arc in &self.adj[node] {
                let (r, c) = self.endpoints(arc);
                let other = if node == r { c } else { r };
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                visited += 1;
                // u_r + v_c = cost on basic arcs
                pot[other] = costs[arc] - pot[node];
                self.parent[other] = node;
                self.parent_arc[other] = arc;
                self.depth[other] = self.depth[node] + 1;
                queue.push_back(other);
            }
        }
        if visited != total {
            return Err(Error::Numerical("transportation basis is not a spanning tree".into()));
        }
        Ok(())
    }
}

/// Network simplex for the transportation problem with marginals `a` (rows) and `b` (columns).
pub fn network_simplex(c: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> Result<TransportBasis> {
    let (n, m) = c.shape();
    if a.len() != n || b.len() != m {
        return Err(Error::DimensionMismatch("marginals do not match cost matrix".into()));
    }
    let arcs = n * m;
    let costs: Vec<f64> = (0..arcs).map(|k| c[(k / m, k % m)]).collect();
    let mut flow = vec![0.0f64; arcs];
    let mut basic = vec![false; arcs];
    let mut tree = Tree {
        n,
        m,
        adj: vec![Vec::new(); n + m],
        parent_arc: vec![usize::MAX; n + m],
        parent: vec![usize::MAX; n + m],
        depth: vec![0; n + m],
    };

    // North-west corner start: exactly n + m - 1 basic cells forming a staircase tree.
    let mut supply: Vec<f64> = a.iter().copied().collect();
    let mut demand: Vec<f64> = b.iter().copied().collect();
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let x = supply[i].min(demand[j]);
        let arc = i * m + j;
        flow[arc] = x;
        basic[arc] = true;
        tree.add(arc);
        supply[i] -= x;
        demand[j] -= x;
        if i == n - 1 && j == m - 1 {
            break;
        }
        if j == m - 1 || (i < n - 1 && supply[i] <= demand[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }

    let cmax = c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-12 * cmax.max(1.0);
    let block = ((arcs as f64).sqrt() as usize).max(10).min(arcs);
    let max_pivots = 50 * arcs + 1000;
    let mut pot = vec![0.0f64; n + m];
    let mut next_arc = 0usize;
    let mut pivots = 0usize;

    loop {
        tree.refresh(&costs, &mut pot)?;

        // Block-search pricing.
        let mut entering = None;
        let mut best = -tol;
        let mut scanned = 0usize;
        while scanned < arcs {
            let stop = (scanned + block).min(arcs);
            for _ in scanned..stop {
                let arc = next_arc;
                next_arc = (next_arc + 1) % arcs;
                if basic[arc] {
                    continue;
                }
                let reduced = costs[arc] - pot[arc / m] - pot[n + arc % m];
                if reduced < best {
                    best = reduced;
                    entering = Some(arc);
                }
            }
            scanned = stop;
            if entering.is_some() {
                break;
            }
        }
        let Some(entering) = entering else { break };

        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Numerical(format!("network simplex exceeded {max_pivots} pivots")));
        }

        // Tree path from the entering column node to the entering row node; arcs at
        // even positions lose flow, odd positions gain it.
        let (row_node, col_node) = tree.endpoints(entering);
        let mut up_from_col = Vec::new();
        let mut up_from_row = Vec::new();
        let (mut x, mut y) = (col_node, row_node);
        while tree.depth[x] > tree.depth[y] {
            up_from_col.push(tree.parent_arc[x]);
            x = tree.parent[x];
        }
        while tree.depth[y] > tree.depth[x] {
            up_from_row.push(tree.parent_arc[y]);
            y = tree.parent[y];
        }
        while x != y {
            up_from_col.push(tree.parent_arc[x]);
            x = tree.parent[x];
            up_from_row.push(tree.parent_arc[y]);
            y = tree.parent[y];
        }
        let path: Vec<usize> = up_from_col.into_iter().chain(up_from_row.into_iter().rev()).collect();

        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (pos, &arc) in path.iter().enumerate() {
            if pos % 2 == 0 && flow[arc] < theta {
                theta = flow[arc];
                leaving = arc;
            }
        }
        if leaving == usize::MAX {
            return Err(Error::Numerical("unbounded transportation cycle".into()));
        }
        for (pos, &arc) in path.iter().enumerate() {
            if pos % 2 == 0 {
                flow[arc] -= theta;
            } else {
                flow[arc] += theta;
            }
        }
        flow[entering] = theta;
        flow[leaving] = 0.0;
        basic[leaving] = false;
        basic[entering] = true;
        tree.remove(leaving);
        tree.add(entering);
    }

    let plan = DMatrix::from_fn(n, m, |i, j| flow[i * m + j].max(0.0));
    Ok(TransportBasis {
        plan,
        row_potentials: pot[..n].to_vec(),
        col_potentials: pot[n..].to_vec(),
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uniform(n: usize) -> DVector<f64> {
        DVector::from_element(n, 1.0 / n as f64)
    }

    #[test]
    fn diagonal_optimum() {
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let g = solve_exact(&c, &uniform(2), &uniform(2)).unwrap();
        assert_eq!(g.plan, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
        assert_eq!(g.objective, 0.0);
    }

    #[test]
    fn anti_diagonal_optimum() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let g = solve_exact(&c, &uniform(2), &uniform(2)).unwrap();
        assert_eq!(g.plan, DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        assert_eq!(g.objective, 0.0);
    }

    #[test]
    fn network_simplex_on_uniform_square_matches_assignment() {
        let c = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0]);
        let basis = network_simplex(&c, &uniform(3), &uniform(3)).unwrap();
        let obj: f64 = basis.plan.component_mul(&c).sum();
        // optimum assignment 0->1, 1->0, 2->2: (1 + 2 + 2) / 3
        assert_abs_diff_eq!(obj, 5.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn rectangular_problem_is_feasible() {
        let c = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 3.0, 2.0, 1.0]);
        let g = solve_exact(&c, &uniform(2), &uniform(3)).unwrap();
        assert!(g.marginal_violation < 1e-12);
        // row 0 sends to columns 0 and 1, row 1 to columns 1 and 2
        assert_abs_diff_eq!(g.objective, 4.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn infeasible_marginals_rejected() {
        let c = DMatrix::zeros(2, 2);
        let bad = DVector::from_vec(vec![0.7, 0.7]);
        assert!(matches!(solve_exact(&c, &bad, &uniform(2)), Err(Error::InfeasibleMarginals(_))));
    }

    #[test]
    fn assignment_rejects_tall_matrix() {
        assert!(solve_assignment(&DMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn one_by_one() {
        let g = solve_exact(&DMatrix::from_element(1, 1, 2.5), &uniform(1), &uniform(1)).unwrap();
        assert_eq!(g.plan[(0, 0)], 1.0);
        assert_eq!(g.objective, 2.5);
    }
}
