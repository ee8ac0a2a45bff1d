//! Optimal rectangular assignment with forbidden cells.
//!
//! Among all assignments that respect the mask and have maximum cardinality,
//! [`hungarian`] returns one of minimum total cost; among those, the one whose
//! sorted `(row, col)` list is lexicographically smallest.

use alloc::vec;
use alloc::vec::Vec;

/// Dense `rows × cols` cost matrix with a per-cell allowed flag.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<f64>,
    allowed: Vec<bool>,
}

impl CostMatrix {
    /// All cells allowed with cost 0.
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            costs: vec![0.0; rows * cols],
            allowed: vec![true; rows * cols],
        }
    }

    /// `None` marks a forbidden cell.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Self {
        let mut m = Self::new(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                match f(r, c) {
                    Some(v) => m.set(r, c, v),
                    None => m.forbid(r, c),
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn set(&mut self, r: usize, c: usize, cost: f64) {
        let i = r * self.cols + c;
        self.costs[i] = cost;
        self.allowed[i] = cost.is_finite();
    }

    pub fn forbid(&mut self, r: usize, c: usize) {
        self.allowed[r * self.cols + c] = false;
    }

    pub fn is_allowed(&self, r: usize, c: usize) -> bool {
        self.allowed[r * self.cols + c]
    }

    /// Cost of an allowed cell.
    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        let i = r * self.cols + c;
        self.allowed[i].then_some(self.costs[i])
    }

    /// Sum of the costs of the given pairs, in the given order.
    pub fn total(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().filter_map(|&(r, c)| self.get(r, c)).sum()
    }
}

/// Square, padded problem solved by the shortest-augmenting-path method,
/// keeping the dual potentials for the tie-breaking pass.
struct Solved {
    n: usize,
    cost: Vec<f64>,
    /// Row and column potentials, 1-indexed (index 0 unused).
    u: Vec<f64>,
    v: Vec<f64>,
    row_of_col: Vec<usize>,
}

fn solve_square(n: usize, cost: Vec<f64>) -> Solved {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    Solved {
        n,
        cost,
        u,
        v,
        row_of_col: p,
    }
}

/// Walks the equality subgraph of an optimal dual solution to pick the
/// lexicographically smallest optimal assignment.
struct TightGraph<'a> {
    solved: &'a Solved,
    mask: &'a CostMatrix,
    tol: f64,
    col_of_row: Vec<usize>,
    row_of_col: Vec<usize>,
    fixed: Vec<Fix>,
}

#[derive(Clone, Copy, PartialEq)]
enum Fix {
    Free,
    /// Held on its real column.
    Pinned,
    /// Decided unmatched; may still move between forbidden or padding columns.
    Unmatched,
}

impl TightGraph<'_> {
    fn tight(&self, r: usize, c: usize) -> bool {
        let s = self.solved;
        s.cost[r * s.n + c] - s.u[r + 1] - s.v[c + 1] <= self.tol
    }

    fn is_real_pair(&self, r: usize, c: usize) -> bool {
        r < self.mask.rows && c < self.mask.cols && self.mask.is_allowed(r, c)
    }

    fn may_take(&self, r: usize, c: usize) -> bool {
        match self.fixed[r] {
            Fix::Free => true,
            Fix::Pinned => false,
            Fix::Unmatched => !self.is_real_pair(r, c),
        }
    }

    /// Re-seats row `r` on another tight column, cascading, until the chain
    /// lands on `freed`.
    fn reroute(&mut self, r: usize, freed: usize, mover: usize, visited: &mut [bool]) -> bool {
        for c in 0..self.solved.n {
            if visited[c] || c == self.col_of_row[r] || !self.may_take(r, c) || !self.tight(r, c) {
                continue;
            }
            visited[c] = true;
            let owner = self.row_of_col[c];
            let free = c == freed || (owner != mover && self.reroute(owner, freed, mover, visited));
            if free {
                self.col_of_row[r] = c;
                self.row_of_col[c] = r;
                return true;
            }
        }
        false
    }

    fn try_seat(&mut self, r: usize, c: usize) -> bool {
        if self.col_of_row[r] == c {
            return true;
        }
        let owner = self.row_of_col[c];
        let freed = self.col_of_row[r];
        let mut visited = vec![false; self.solved.n];
        visited[c] = true;
        if self.reroute(owner, freed, r, &mut visited) {
            self.col_of_row[r] = c;
            self.row_of_col[c] = r;
            true
        } else {
            false
        }
    }
}

/// Optimal assignment on the allowed cells of `m`; see the module docs for
/// the exact objective and tie-breaking. Pairs are sorted by row.
pub fn hungarian(m: &CostMatrix) -> Vec<(usize, usize)> {
    let (rows, cols) = (m.rows, m.cols);
    if rows == 0 || cols == 0 || !m.allowed.iter().any(|&a| a) {
        return Vec::new();
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (c, _) in m.costs.iter().zip(&m.allowed).filter(|(_, &a)| a) {
        lo = lo.min(*c);
        hi = hi.max(*c);
    }
    let spread = hi - lo;
    // Any forbidden cell costs more than the whole allowed-cost range, so
    // cardinality is maximized before cost is minimized.
    let big = (rows.min(cols) as f64 + 1.0) * (spread + 1.0);
    let n = rows.max(cols);
    let mut cost = vec![0.0; n * n];
    for r in 0..rows {
        for c in 0..cols {
            cost[r * n + c] = match m.get(r, c) {
                Some(v) => v - lo,
                None => big,
            };
        }
    }
    let solved = solve_square(n, cost);

    let mut col_of_row = vec![0usize; n];
    let mut row_of_col = vec![0usize; n];
    for j in 1..=n {
        let i = solved.row_of_col[j] - 1;
        col_of_row[i] = j - 1;
        row_of_col[j - 1] = i;
    }
    let tol = 1e-9 * (1.0 + big);
    let mut graph = TightGraph {
        solved: &solved,
        mask: m,
        tol,
        col_of_row,
        row_of_col,
        fixed: vec![Fix::Free; n],
    };
    for r in 0..rows {
        let mut seated = false;
        for c in 0..cols {
            if m.is_allowed(r, c) && graph.tight(r, c) && graph.try_seat(r, c) {
                seated = true;
                break;
            }
        }
        if seated {
            graph.fixed[r] = Fix::Pinned;
        } else {
            // Unmatched: any tight forbidden or padding column will do.
            let current = graph.col_of_row[r];
            if current < cols && m.is_allowed(r, current) {
                for c in 0..n {
                    if !graph.is_real_pair(r, c) && graph.tight(r, c) && graph.try_seat(r, c) {
                        break;
                    }
                }
            }
            graph.fixed[r] = Fix::Unmatched;
        }
    }

    (0..rows)
        .filter_map(|r| {
            let c = graph.col_of_row[r];
            (c < cols && m.is_allowed(r, c)).then_some((r, c))
        })
        .collect()
}
