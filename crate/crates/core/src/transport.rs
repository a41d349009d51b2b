//! Balanced transportation problems solved with the transportation simplex.
//!
//! Initial basis by the northwest-corner rule (degenerate zeros kept so the
//! basis is always a spanning tree of `n + m − 1` cells), MODI potentials for
//! pricing, and Bland's rule for both entering and leaving cells so degenerate
//! pivots cannot cycle.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("supply sums to {supply} but demand sums to {demand}")]
    Unbalanced { supply: f64, demand: f64 },
    #[error("masses must be finite and nonnegative")]
    InvalidMass,
    #[error("cost matrix must be {rows}x{cols} with finite entries")]
    InvalidCost { rows: usize, cols: usize },
    #[error("no optimal basis after {0} pivots")]
    NoConvergence(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub cost: f64,
    pub plan: Vec<Vec<f64>>,
    /// Row potentials; `u_i + v_j ≤ c_ij` with equality on basic cells.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl TransportSolution {
    /// `Σ supply·u + Σ demand·v`, equal to `cost` at optimality.
    pub fn dual_value(&self, supply: &[f64], demand: &[f64]) -> f64 {
        supply.iter().zip(&self.u).map(|(a, b)| a * b).sum::<f64>() + demand.iter().zip(&self.v).map(|(a, b)| a * b).sum::<f64>()
    }
}

const PRICE_TOL: f64 = 1e-12;

struct Basis {
    n: usize,
    m: usize,
    /// Basic cells in insertion order.
    cells: Vec<(usize, usize)>,
    x: Vec<Vec<f64>>,
    basic: Vec<Vec<bool>>,
}

impl Basis {
    fn northwest(supply: &[f64], demand: &[f64]) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut b = Basis { n, m, cells: Vec::with_capacity(n + m - 1), x: vec![vec![0.0; m]; n], basic: vec![vec![false; m]; n] };
        let (mut i, mut j) = (0, 0);
        loop {
            let q = s[i].min(d[j]);
            b.x[i][j] = q;
            b.basic[i][j] = true;
            b.cells.push((i, j));
            s[i] -= q;
            d[j] -= q;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if (s[i] <= d[j] && i < n - 1) || j == m - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(b.cells.len(), n + m - 1);
        b
    }

    /// Adjacency over nodes `0..n` (rows) and `n..n+m` (columns).
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n + self.m];
        for &(i, j) in &self.cells {
            adj[i].push(self.n + j);
            adj[self.n + j].push(i);
        }
        adj
    }

    fn potentials(&self, cost: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let adj = self.adjacency();
        let mut pot = vec![f64::NAN; self.n + self.m];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if pot[b].is_nan() {
                    let (i, j) = if a < self.n { (a, b - self.n) } else { (b, a - self.n) };
                    pot[b] = cost[i][j] - pot[a];
                    queue.push_back(b);
                }
            }
        }
        (pot[..self.n].to_vec(), pot[self.n..].to_vec())
    }

    /// Tree path from row `i` to column `j` as a list of cells.
    fn path(&self, i: usize, j: usize) -> Vec<(usize, usize)> {
        let adj = self.adjacency();
        let total = self.n + self.m;
        let mut prev = vec![usize::MAX; total];
        prev[i] = i;
        let mut queue = VecDeque::from([i]);
        let target = self.n + j;
        while let Some(a) = queue.pop_front() {
            if a == target {
                break;
            }
            for &b in &adj[a] {
                if prev[b] == usize::MAX {
                    prev[b] = a;
                    queue.push_back(b);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = target;
        while node != i {
            let p = prev[node];
            let cell = if p < self.n { (p, node - self.n) } else { (node, p - self.n) };
            cells.push(cell);
            node = p;
        }
        cells.reverse();
        cells
    }
}

/// Minimum-cost transport of `supply` onto `demand`.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> Result<TransportSolution, TransportError> {
    let (n, m) = (supply.len(), demand.len());
    if n == 0 || m == 0 || supply.iter().chain(demand).any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(TransportError::InvalidMass);
    }
    if cost.len() != n || cost.iter().any(|r| r.len() != m || r.iter().any(|c| !c.is_finite())) {
        return Err(TransportError::InvalidCost { rows: n, cols: m });
    }
    let (ss, ds) = (supply.iter().sum::<f64>(), demand.iter().sum::<f64>());
    if (ss - ds).abs() > 1e-9 * ss.max(ds).max(1.0) {
        return Err(TransportError::Unbalanced { supply: ss, demand: ds });
    }
    // Absorb round-off so the northwest rule closes exactly.
    let mut demand = demand.to_vec();
    demand[m - 1] = (demand[m - 1] + ss - ds).max(0.0);

    let mut basis = Basis::northwest(supply, &demand);
    let max_pivots = 50 * (n + m) * (n + m) + 1000;
    for _ in 0..max_pivots {
        let (u, v) = basis.potentials(cost);
        let entering = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .find(|&(i, j)| !basis.basic[i][j] && cost[i][j] - u[i] - v[j] < -PRICE_TOL);
        let Some((ei, ej)) = entering else {
            let plan = basis.x.clone();
            let total = (0..n).map(|i| (0..m).map(|j| plan[i][j] * cost[i][j]).sum::<f64>()).sum();
            return Ok(TransportSolution { cost: total, plan, u, v });
        };
        let path = basis.path(ei, ej);
        // Path cells alternate −, +, −, … starting next to the entering row.
        let minus: Vec<(usize, usize)> = path.iter().copied().step_by(2).collect();
        let plus: Vec<(usize, usize)> = path.iter().copied().skip(1).step_by(2).collect();
        let theta = minus.iter().map(|&(i, j)| basis.x[i][j]).fold(f64::INFINITY, f64::min);
        let leaving = *minus.iter().filter(|&&(i, j)| basis.x[i][j] == theta).min().unwrap();
        for &(i, j) in &minus {
            basis.x[i][j] -= theta;
        }
        for &(i, j) in &plus {
            basis.x[i][j] += theta;
        }
        basis.x[leaving.0][leaving.1] = 0.0;
        basis.x[ei][ej] = theta;
        basis.basic[leaving.0][leaving.1] = false;
        basis.basic[ei][ej] = true;
        let pos = basis.cells.iter().position(|&c| c == leaving).unwrap();
        basis.cells[pos] = (ei, ej);
    }
    Err(TransportError::NoConvergence(max_pivots))
}
