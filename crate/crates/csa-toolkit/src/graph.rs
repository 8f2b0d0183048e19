//! Finite simple graphs with the spectral and combinatorial quantities the
//! phase classification depends on: the Perron-Frobenius eigenvalue, the
//! independence number, vertex degrees and maximal cliques.

use thiserror::Error;

/// Exact combinatorial routines refuse graphs above this size.
pub const EXACT_VERTEX_CAP: usize = 40;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("vertex {0} out of range for {1} vertices")]
    VertexOutOfRange(usize, usize),
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("graph has {0} vertices, exact routine capped at {1}")]
    TooLarge(usize, usize),
    #[error("invalid size {size} for family {family}")]
    BadSize { family: &'static str, size: usize },
    #[error("graph is not connected")]
    Disconnected,
    #[error("cannot parse graph spec {0:?}")]
    Parse(String),
}

/// Named graph families with closed-form largest eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Cycle C_n, n >= 3.
    Cycle(usize),
    /// Star K_{1,m} with m leaves.
    Star(usize),
    /// Path with n vertices, n >= 2.
    Path(usize),
    /// Complete graph K_n, n >= 1.
    Complete(usize),
}

#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbours: Vec<Vec<usize>>,
    connected: bool,
    family: Option<Family>,
}

impl Graph {
    /// Build from an unordered edge list; duplicate edges are collapsed.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut adj = vec![vec![false; n]; n];
        for &(u, v) in edges {
            if u >= n {
                return Err(GraphError::VertexOutOfRange(u, n));
            }
            if v >= n {
                return Err(GraphError::VertexOutOfRange(v, n));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adj[u][v] = true;
            adj[v][u] = true;
        }
        let mut uniq = Vec::new();
        let mut neighbours = vec![Vec::new(); n];
        for u in 0..n {
            for v in 0..n {
                if adj[u][v] {
                    neighbours[u].push(v);
                    if u < v {
                        uniq.push((u, v));
                    }
                }
            }
        }
        let connected = is_connected(n, &neighbours);
        Ok(Self {
            n,
            edges: uniq,
            neighbours,
            connected,
            family: None,
        })
    }

    /// Constructors for the example families.
    pub fn family(family: Family) -> Result<Self, GraphError> {
        let edges: Vec<(usize, usize)> = match family {
            Family::Cycle(n) => {
                if n < 3 {
                    return Err(GraphError::BadSize { family: "cycle", size: n });
                }
                (0..n).map(|i| (i, (i + 1) % n)).collect()
            }
            Family::Star(m) => {
                if m < 1 {
                    return Err(GraphError::BadSize { family: "star", size: m });
                }
                (1..=m).map(|i| (0, i)).collect()
            }
            Family::Path(n) => {
                if n < 2 {
                    return Err(GraphError::BadSize { family: "path", size: n });
                }
                (0..n - 1).map(|i| (i, i + 1)).collect()
            }
            Family::Complete(n) => {
                if n < 1 {
                    return Err(GraphError::BadSize { family: "complete", size: n });
                }
                let mut e = Vec::new();
                for u in 0..n {
                    for v in u + 1..n {
                        e.push((u, v));
                    }
                }
                e
            }
        };
        let n = match family {
            Family::Cycle(n) | Family::Path(n) | Family::Complete(n) => n,
            Family::Star(m) => m + 1,
        };
        let mut g = Self::from_edges(n, &edges)?;
        g.family = Some(family);
        Ok(g)
    }

    /// Parse a CLI-style spec such as `cycle:7`, `star:4`, `path:5`,
    /// `complete:3` or `k2` (shorthand for `complete:2`).
    pub fn parse_spec(spec: &str) -> Result<Self, GraphError> {
        let (kind, size) = spec
            .split_once(':')
            .ok_or_else(|| GraphError::Parse(spec.to_string()))?;
        let size: usize = size
            .trim()
            .parse()
            .map_err(|_| GraphError::Parse(spec.to_string()))?;
        let family = match kind.trim() {
            "cycle" => Family::Cycle(size),
            "star" => Family::Star(size),
            "path" => Family::Path(size),
            "complete" => Family::Complete(size),
            _ => return Err(GraphError::Parse(spec.to_string())),
        };
        Self::family(family)
    }

    /// Parse an edge-list file body: one `u v` pair per line, `#` comments.
    pub fn from_edge_list_str(text: &str) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        let mut max_v = 0usize;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let u: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| GraphError::Parse(line.to_string()))?;
            let v: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| GraphError::Parse(line.to_string()))?;
            max_v = max_v.max(u).max(v);
            edges.push((u, v));
        }
        if edges.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        Self::from_edges(max_v + 1, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.neighbours[v]
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.neighbours[u].contains(&v)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbours[v].len()
    }

    pub fn min_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).min().unwrap_or(0)
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn family_kind(&self) -> Option<Family> {
        self.family
    }

    /// Closed-form largest adjacency eigenvalue, when the graph was built
    /// from a family constructor.
    pub fn lambda1_exact(&self) -> Option<f64> {
        match self.family? {
            Family::Cycle(_) => Some(2.0),
            Family::Star(m) => Some((m as f64).sqrt()),
            Family::Path(n) => Some(2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos()),
            Family::Complete(n) => Some(n as f64 - 1.0),
        }
    }

    /// Largest adjacency eigenvalue by power iteration with a deterministic
    /// all-ones start. A diagonal shift by the maximum degree keeps the
    /// dominant eigenvalue of the shifted matrix simple even on bipartite
    /// graphs; the shift is subtracted before returning.
    pub fn lambda1(&self, tol: f64) -> Result<f64, GraphError> {
        if self.edges.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let shift = self.max_degree() as f64;
        let mut v = vec![1.0f64; self.n];
        let mut eig = shift;
        for _ in 0..100_000 {
            let mut w = vec![0.0f64; self.n];
            for (u, x) in v.iter().enumerate() {
                w[u] += shift * x;
                for &nb in &self.neighbours[u] {
                    w[nb] += x;
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut w {
                *x /= norm;
            }
            // Rayleigh quotient of the shifted matrix
            let mut aw = vec![0.0f64; self.n];
            for (u, x) in w.iter().enumerate() {
                aw[u] += shift * x;
                for &nb in &self.neighbours[u] {
                    aw[nb] += x;
                }
            }
            let next = w.iter().zip(&aw).map(|(a, b)| a * b).sum::<f64>();
            let done = (next - eig).abs() <= tol * next.abs().max(1.0);
            eig = next;
            v = w;
            if done {
                break;
            }
        }
        let lambda = eig - shift;
        if self.n <= 12 {
            debug_assert!(
                (lambda - self.lambda1_charpoly()).abs() <= 1e-6 * lambda.abs().max(1.0),
                "power iteration disagrees with characteristic-polynomial bracketing"
            );
        }
        Ok(lambda)
    }

    /// Largest root of det(xI - A) by sign bracketing, for small graphs.
    /// Serves as a cross-check for [`Graph::lambda1`].
    pub fn lambda1_charpoly(&self) -> f64 {
        let det = |x: f64| -> f64 {
            // det(xI - A) via Gaussian elimination with partial pivoting
            let n = self.n;
            let mut m = vec![vec![0.0f64; n]; n];
            for i in 0..n {
                m[i][i] = x;
            }
            for &(u, v) in &self.edges {
                m[u][v] = -1.0;
                m[v][u] = -1.0;
            }
            let mut det = 1.0;
            for col in 0..n {
                let piv = (col..n)
                    .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
                    .unwrap();
                if m[piv][col].abs() < 1e-300 {
                    return 0.0;
                }
                if piv != col {
                    m.swap(piv, col);
                    det = -det;
                }
                det *= m[col][col];
                for row in col + 1..n {
                    let f = m[row][col] / m[col][col];
                    for k in col..n {
                        m[row][k] -= f * m[col][k];
                    }
                }
            }
            det
        };
        // det(xI - A) > 0 for x above the largest root; scan down for the
        // first sign change, then bisect.
        let mut hi = self.max_degree() as f64 + 1e-9;
        let mut lo = hi;
        let step = 0.01;
        while lo > -(self.max_degree() as f64) - 1.0 {
            lo -= step;
            if det(lo) < 0.0 {
                break;
            }
            hi = lo;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if det(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Exact independence number by branch-and-bound over bitmasks.
    pub fn independence_number(&self) -> Result<usize, GraphError> {
        if self.n > EXACT_VERTEX_CAP {
            return Err(GraphError::TooLarge(self.n, EXACT_VERTEX_CAP));
        }
        let masks = self.neighbour_masks();
        let mut best = 0;
        mis_branch(self.n, &masks, (1u64 << self.n) - 1, 0, &mut best);
        Ok(best)
    }

    /// All maximal cliques, Bron-Kerbosch with pivoting.
    pub fn maximal_cliques(&self) -> Result<Vec<Vec<usize>>, GraphError> {
        if self.n > EXACT_VERTEX_CAP {
            return Err(GraphError::TooLarge(self.n, EXACT_VERTEX_CAP));
        }
        let masks = self.neighbour_masks();
        let mut out = Vec::new();
        bron_kerbosch(&masks, 0, (1u64 << self.n) - 1, 0, &mut out);
        let mut cliques: Vec<Vec<usize>> = out
            .into_iter()
            .map(|mask| (0..self.n).filter(|v| mask >> v & 1 == 1).collect())
            .collect();
        cliques.sort();
        Ok(cliques)
    }

    /// Does `set` induce a clique that no outside vertex extends?
    pub fn is_maximal_clique(&self, set: &[usize]) -> bool {
        if set.is_empty() {
            return false;
        }
        for (i, &u) in set.iter().enumerate() {
            for &v in &set[i + 1..] {
                if !self.adjacent(u, v) {
                    return false;
                }
            }
        }
        'outer: for w in 0..self.n {
            if set.contains(&w) {
                continue;
            }
            for &u in set {
                if !self.adjacent(w, u) {
                    continue 'outer;
                }
            }
            return false; // w extends the clique
        }
        true
    }

    fn neighbour_masks(&self) -> Vec<u64> {
        (0..self.n)
            .map(|u| self.neighbours[u].iter().fold(0u64, |m, &v| m | 1 << v))
            .collect()
    }
}

fn is_connected(n: usize, neighbours: &[Vec<usize>]) -> bool {
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &neighbours[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

fn mis_branch(n: usize, masks: &[u64], candidates: u64, size: usize, best: &mut usize) {
    if size + candidates.count_ones() as usize <= *best {
        return;
    }
    if candidates == 0 {
        *best = (*best).max(size);
        return;
    }
    // branch on a candidate of maximum degree within the candidate set
    let v = (0..n)
        .filter(|&v| candidates >> v & 1 == 1)
        .max_by_key(|&v| (masks[v] & candidates).count_ones())
        .unwrap();
    // include v
    mis_branch(n, masks, candidates & !(1 << v) & !masks[v], size + 1, best);
    // exclude v
    mis_branch(n, masks, candidates & !(1 << v), size, best);
}

fn bron_kerbosch(masks: &[u64], r: u64, p: u64, x: u64, out: &mut Vec<u64>) {
    if p == 0 && x == 0 {
        out.push(r);
        return;
    }
    // pivot with most neighbours in p
    let pivot = (0..masks.len())
        .filter(|&v| (p | x) >> v & 1 == 1)
        .max_by_key(|&v| (masks[v] & p).count_ones())
        .unwrap();
    let mut todo = p & !masks[pivot];
    let mut p = p;
    let mut x = x;
    while todo != 0 {
        let v = todo.trailing_zeros() as usize;
        todo &= todo - 1;
        bron_kerbosch(masks, r | 1 << v, p & masks[v], x & masks[v], out);
        p &= !(1u64 << v);
        x |= 1 << v;
    }
}
