//! Dinic max-flow over any [`Mass`] capacity type.
//!
//! Edges are stored in pairs; edge `e ^ 1` is the reverse of edge `e`.

use std::collections::VecDeque;

use crate::mass::Mass;

#[derive(Debug, Clone)]
struct Edge<W> {
    to: usize,
    residual: W,
    capacity: W,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork<W> {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge<W>>,
}

impl<W: Mass> FlowNetwork<W> {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            edges: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds `u -> v` and returns its edge id.
    pub fn add_edge(&mut self, u: usize, v: usize, capacity: W) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge {
            to: v,
            residual: capacity.clone(),
            capacity,
        });
        self.edges.push(Edge {
            to: u,
            residual: W::zero(),
            capacity: W::zero(),
        });
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    /// Flow currently routed through edge `id`.
    pub fn flow(&self, id: usize) -> W {
        let e = &self.edges[id];
        e.capacity.clone() - e.residual.clone()
    }

    pub fn edge_target(&self, id: usize) -> usize {
        self.edges[id].to
    }

    fn bfs_levels(&self, s: usize, t: usize) -> Option<Vec<usize>> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &id in &self.adj[u] {
                let e = &self.edges[id];
                if level[e.to] == usize::MAX && e.residual.is_positive() {
                    level[e.to] = level[u] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        (level[t] != usize::MAX).then_some(level)
    }

    fn augment(&mut self, u: usize, t: usize, limit: W, level: &[usize], next: &mut [usize]) -> W {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let id = self.adj[u][next[u]];
            let (to, residual) = {
                let e = &self.edges[id];
                (e.to, e.residual.clone())
            };
            if residual.is_positive() && level[to] == level[u] + 1 {
                let pushed = self.augment(to, t, W::min_of(&limit, &residual), level, next);
                if pushed.is_positive() {
                    self.edges[id].residual = self.edges[id].residual.clone() - pushed.clone();
                    self.edges[id ^ 1].residual = self.edges[id ^ 1].residual.clone() + pushed.clone();
                    return pushed;
                }
            }
            next[u] += 1;
        }
        W::zero()
    }

    /// Maximum `s -> t` flow; the network keeps the final flow afterwards.
    pub fn max_flow(&mut self, s: usize, t: usize) -> W {
        let mut total = W::zero();
        let unbounded: W = self
            .adj[s]
            .iter()
            .fold(W::zero(), |acc, &id| acc + self.edges[id].residual.clone());
        while let Some(level) = self.bfs_levels(s, t) {
            let mut next = vec![0usize; self.adj.len()];
            loop {
                let pushed = self.augment(s, t, unbounded.clone(), &level, &mut next);
                if !pushed.is_positive() {
                    break;
                }
                total = total + pushed;
            }
        }
        total
    }

    /// Nodes reachable from `s` through edges with positive residual.
    pub fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &id in &self.adj[u] {
                let e = &self.edges[id];
                if !seen[e.to] && e.residual.is_positive() {
                    seen[e.to] = true;
                    queue.push_back(e.to);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mass::Rational;

    #[test]
    fn classic_network() {
        // CLRS figure 26.1, max flow 23
        let mut g = FlowNetwork::<f64>::new(6);
        for (u, v, c) in [
            (0, 1, 16.0),
            (0, 2, 13.0),
            (2, 1, 4.0),
            (1, 3, 12.0),
            (3, 2, 9.0),
            (2, 4, 14.0),
            (4, 3, 7.0),
            (3, 5, 20.0),
            (4, 5, 4.0),
        ] {
            g.add_edge(u, v, c);
        }
        assert_eq!(g.max_flow(0, 5), 23.0);
        let cut = g.residual_reachable(0);
        assert_eq!(cut, vec![true, true, true, false, true, false]);
    }

    #[test]
    fn exact_rational_capacities() {
        let mut g = FlowNetwork::<Rational>::new(4);
        g.add_edge(0, 1, Rational::from_ratio(1, 3));
        g.add_edge(0, 2, Rational::from_ratio(2, 3));
        g.add_edge(1, 3, Rational::from_ratio(1, 2));
        let e = g.add_edge(2, 3, Rational::from_ratio(1, 7));
        assert_eq!(g.max_flow(0, 3), Rational::from_ratio(1, 3) + Rational::from_ratio(1, 7));
        assert_eq!(g.flow(e), Rational::from_ratio(1, 7));
    }
}
