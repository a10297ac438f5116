//! Wasserstein-1 distance between finitely supported distributions on measures.

use crate::error::{Error, Result};
use crate::scenery::{CylinderVector, EmpiricalDistribution};

/// Atoms closer than this in the ground metric are agglomerated.
pub const CLUSTER_RADIUS: f64 = 1e-9;
/// Atom count allowed per side after agglomeration.
pub const MAX_ATOMS: usize = 256;

const FLOW_EPS: f64 = 1e-15;

/// `sum_{l=1}^m 2^{-l} * (1/2) sum_{|w|=l} |nu[w] - nu'[w]|`.
pub fn ground_distance(a: &CylinderVector, b: &CylinderVector) -> Result<f64> {
    if a.depth() != b.depth() {
        return Err(Error::DepthMismatch(a.depth(), b.depth()));
    }
    Ok(levels_distance(&levels(a), &levels(b)))
}

fn levels(v: &CylinderVector) -> Vec<Vec<f64>> {
    (1..=v.depth())
        .map(|l| v.marginal(l).expect("l <= depth").probs().to_vec())
        .collect()
}

fn levels_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut scale = 1.0;
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        scale *= 0.5;
        let tv: f64 = x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>() * 0.5;
        total += scale * tv;
    }
    total
}

struct Cluster {
    levels: Vec<Vec<f64>>,
    weight: f64,
}

/// Closest-pair agglomeration within [`CLUSTER_RADIUS`]; a merged cluster
/// keeps the representative of its heavier part.
fn agglomerate(d: &EmpiricalDistribution) -> Vec<Cluster> {
    let mut cs: Vec<Cluster> = d
        .atoms()
        .iter()
        .map(|a| Cluster { levels: levels(&a.vector), weight: a.weight })
        .collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..cs.len() {
            for j in i + 1..cs.len() {
                let dist = levels_distance(&cs[i].levels, &cs[j].levels);
                if dist <= CLUSTER_RADIUS && best.is_none_or(|(b, _, _)| dist < b) {
                    best = Some((dist, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        let gone = cs.remove(j);
        if gone.weight > cs[i].weight {
            cs[i].levels = gone.levels;
        }
        cs[i].weight += gone.weight;
    }
    cs
}

/// Exact optimal transport between supplies `a` and demands `b` (equal
/// totals) under `cost`, by successive shortest paths with potentials.
/// Returns the optimal cost and the flow matrix.
pub fn transport(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 || cost.len() != n || cost.iter().any(|r| r.len() != m) {
        return Err(Error::Transport("cost matrix shape".into()));
    }
    if cost.iter().flatten().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::Transport("costs must be finite and nonnegative".into()));
    }
    let total_a: f64 = a.iter().sum();
    let total_b: f64 = b.iter().sum();
    if (total_a - total_b).abs() > 1e-9 {
        return Err(Error::Transport(format!("unbalanced: {total_a} vs {total_b}")));
    }
    // Nodes: 0 = source, 1..=n supplies, n+1..=n+m demands, n+m+1 = sink.
    let src = 0;
    let sink = n + m + 1;
    let nodes = n + m + 2;
    let mut sent = vec![0.0; n];
    let mut recv = vec![0.0; m];
    let mut flow = vec![vec![0.0; m]; n];
    let mut pot = vec![0.0; nodes];
    let target = total_a.min(total_b);
    let mut moved = 0.0;
    let mut rounds = 0usize;

    while target - moved > 1e-13 {
        rounds += 1;
        if rounds > 100 * (n + m) + 1000 {
            return Err(Error::Transport("augmentation limit".into()));
        }
        // Dense Dijkstra on reduced costs.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        let mut done = vec![false; nodes];
        dist[src] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            let relax = |v: usize, c: f64, dist: &mut Vec<f64>, prev: &mut Vec<usize>| {
                let nd = dist[u] + (c + pot[u] - pot[v]).max(0.0);
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = u;
                }
            };
            if u == src {
                for i in 0..n {
                    if a[i] - sent[i] > FLOW_EPS {
                        relax(1 + i, 0.0, &mut dist, &mut prev);
                    }
                }
            } else if u <= n {
                let i = u - 1;
                for j in 0..m {
                    relax(n + 1 + j, cost[i][j], &mut dist, &mut prev);
                }
                if sent[i] > FLOW_EPS {
                    relax(src, 0.0, &mut dist, &mut prev);
                }
            } else if u < sink {
                let j = u - n - 1;
                for i in 0..n {
                    if flow[i][j] > FLOW_EPS {
                        relax(1 + i, -cost[i][j], &mut dist, &mut prev);
                    }
                }
                if b[j] - recv[j] > FLOW_EPS {
                    relax(sink, 0.0, &mut dist, &mut prev);
                }
            } else {
                for j in 0..m {
                    if recv[j] > FLOW_EPS {
                        relax(n + 1 + j, 0.0, &mut dist, &mut prev);
                    }
                }
            }
        }
        if !dist[sink].is_finite() {
            return Err(Error::Transport("sink unreachable".into()));
        }
        for v in 0..nodes {
            pot[v] += dist[v].min(dist[sink]);
        }
        // Bottleneck along the path.
        let mut amount = target - moved;
        let mut v = sink;
        while v != src {
            let u = prev[v];
            amount = amount.min(residual(u, v, n, m, a, b, &sent, &recv, &flow));
            v = u;
        }
        if amount <= FLOW_EPS {
            return Err(Error::Transport("zero-capacity augmenting path".into()));
        }
        let mut v = sink;
        while v != src {
            let u = prev[v];
            match edge(u, v, n, m) {
                Edge::Supply(i) => sent[i] += amount,
                Edge::SupplyBack(i) => sent[i] -= amount,
                Edge::Route(i, j) => flow[i][j] += amount,
                Edge::RouteBack(i, j) => flow[i][j] -= amount,
                Edge::Demand(j) => recv[j] += amount,
                Edge::DemandBack(j) => recv[j] -= amount,
            }
            v = u;
        }
        moved += amount;
    }
    let total = flow
        .iter()
        .zip(cost)
        .map(|(f, c)| f.iter().zip(c).map(|(x, y)| x * y).sum::<f64>())
        .sum();
    Ok((total, flow))
}

enum Edge {
    Supply(usize),
    SupplyBack(usize),
    Route(usize, usize),
    RouteBack(usize, usize),
    Demand(usize),
    DemandBack(usize),
}

fn edge(u: usize, v: usize, n: usize, m: usize) -> Edge {
    let sink = n + m + 1;
    let supply = |x: usize| (1..=n).contains(&x);
    match (u, v) {
        (0, v) => Edge::Supply(v - 1),
        (u, 0) => Edge::SupplyBack(u - 1),
        (u, v) if v == sink => Edge::Demand(u - n - 1),
        (u, v) if u == sink => Edge::DemandBack(v - n - 1),
        (u, v) if supply(u) => Edge::Route(u - 1, v - n - 1),
        (u, v) => Edge::RouteBack(v - 1, u - n - 1),
    }
}

#[allow(clippy::too_many_arguments)]
fn residual(u: usize, v: usize, n: usize, m: usize, a: &[f64], b: &[f64], sent: &[f64], recv: &[f64], flow: &[Vec<f64>]) -> f64 {
    match edge(u, v, n, m) {
        Edge::Supply(i) => a[i] - sent[i],
        Edge::SupplyBack(i) => sent[i],
        Edge::Route(..) => f64::INFINITY,
        Edge::RouteBack(i, j) => flow[i][j],
        Edge::Demand(j) => b[j] - recv[j],
        Edge::DemandBack(j) => recv[j],
    }
}

/// Wasserstein-1 distance under [`ground_distance`], after agglomerating
/// atoms within [`CLUSTER_RADIUS`].
pub fn distribution_distance(d1: &EmpiricalDistribution, d2: &EmpiricalDistribution) -> Result<f64> {
    if d1.depth() != d2.depth() {
        return Err(Error::DepthMismatch(d1.depth(), d2.depth()));
    }
    let c1 = agglomerate(d1);
    let c2 = agglomerate(d2);
    for c in [&c1, &c2] {
        if c.len() > MAX_ATOMS {
            return Err(Error::TooManyAtoms(c.len(), MAX_ATOMS));
        }
    }
    let cost: Vec<Vec<f64>> = c1
        .iter()
        .map(|x| c2.iter().map(|y| levels_distance(&x.levels, &y.levels)).collect())
        .collect();
    let a: Vec<f64> = c1.iter().map(|c| c.weight).collect();
    let b: Vec<f64> = c2.iter().map(|c| c.weight).collect();
    // Rescale to a common total so rounding in the weights cannot unbalance.
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    let a: Vec<f64> = a.iter().map(|w| w / sa).collect();
    let b: Vec<f64> = b.iter().map(|w| w / sb).collect();
    Ok(transport(&a, &b, &cost)?.0.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shift::Alphabet;

    fn vec2(x: f64, y: f64) -> CylinderVector {
        // Depth-2 vector of a Markov-like law with nu[0] = x, nu[00] = x*y.
        let p = vec![x * y, x * (1.0 - y), (1.0 - x) * 0.5, (1.0 - x) * 0.5];
        CylinderVector::new(Alphabet::new(2).unwrap(), 2, p).unwrap()
    }

    #[test]
    fn ground_metric_by_hand() {
        let a = vec2(0.9, 1.0);
        let b = vec2(0.2, 1.0);
        // Level 1: tv 0.7; level 2: masses (.9,0,.05,.05) vs (.2,0,.4,.4): tv 0.7.
        let d = ground_distance(&a, &b).unwrap();
        assert!((d - (0.5 * 0.7 + 0.25 * 0.7)).abs() < 1e-15);
        assert_eq!(ground_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn diracs_and_two_point() {
        let (x, y) = (vec2(0.9, 0.3), vec2(0.2, 0.6));
        let rho = ground_distance(&x, &y).unwrap();
        let dx = EmpiricalDistribution::dirac(x.clone());
        let dy = EmpiricalDistribution::dirac(y.clone());
        assert!((distribution_distance(&dx, &dy).unwrap() - rho).abs() < 1e-15);
        assert_eq!(distribution_distance(&dx, &dx).unwrap(), 0.0);
        let half = EmpiricalDistribution::from_weighted(vec![(x, 0.5), (y, 0.5)]).unwrap();
        assert!((distribution_distance(&half, &dx).unwrap() - 0.5 * rho).abs() < 1e-15);
    }

    #[test]
    fn uniform_weights_match_best_permutation() {
        // Birkhoff: with equal uniform weights an optimal plan is a permutation.
        fn perms(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in perms(n - 1) {
                for pos in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(pos, n - 1);
                    out.push(q);
                }
            }
            out
        }
        let mut state = 12345u64;
        let mut next = || {
            state = crate::sampling::splitmix64(state);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for n in 1..=6 {
            for _ in 0..5 {
                let xs: Vec<_> = (0..n).map(|_| vec2(next(), next())).collect();
                let ys: Vec<_> = (0..n).map(|_| vec2(next(), next())).collect();
                let cost: Vec<Vec<f64>> =
                    xs.iter().map(|x| ys.iter().map(|y| ground_distance(x, y).unwrap()).collect()).collect();
                let brute = perms(n)
                    .iter()
                    .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>() / n as f64)
                    .fold(f64::INFINITY, f64::min);
                let w = vec![1.0 / n as f64; n];
                let (opt, flow) = transport(&w, &w, &cost).unwrap();
                assert!((opt - brute).abs() < 1e-12, "n={n}: {opt} vs {brute}");
                for (i, row) in flow.iter().enumerate() {
                    assert!((row.iter().sum::<f64>() - w[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn agglomeration_and_cap() {
        let x = vec2(0.5, 0.5);
        let y = vec2(0.5 + 1e-11, 0.5);
        let d = EmpiricalDistribution::from_weighted(vec![(x.clone(), 0.25), (y, 0.75)]).unwrap();
        // Within the radius: collapses onto a single atom.
        assert!(distribution_distance(&d, &EmpiricalDistribution::dirac(x)).unwrap() < 1e-9);
        let many: Vec<_> = (0..300).map(|i| (vec2(i as f64 / 300.0, 0.5), 1.0 / 300.0)).collect();
        let big = EmpiricalDistribution::from_weighted(many).unwrap();
        assert!(matches!(distribution_distance(&big, &big), Err(Error::TooManyAtoms(300, 256))));
    }

    #[test]
    fn depth_mismatch() {
        let a = EmpiricalDistribution::dirac(vec2(0.5, 0.5));
        let b = EmpiricalDistribution::dirac(CylinderVector::new(Alphabet::new(2).unwrap(), 1, vec![0.5, 0.5]).unwrap());
        assert_eq!(distribution_distance(&a, &b), Err(Error::DepthMismatch(2, 1)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn dist() -> impl Strategy<Value = EmpiricalDistribution> {
            proptest::collection::vec((0.01f64..0.99, 0.01f64..0.99, 0.05f64..1.0), 1..5).prop_map(|atoms| {
                let total: f64 = atoms.iter().map(|a| a.2).sum();
                EmpiricalDistribution::from_weighted(atoms.into_iter().map(|(x, y, w)| (vec2(x, y), w / total)).collect())
                    .unwrap()
            })
        }

        proptest! {
            #[test]
            fn metric_axioms(a in dist(), b in dist(), c in dist()) {
                let ab = distribution_distance(&a, &b).unwrap();
                let ba = distribution_distance(&b, &a).unwrap();
                let bc = distribution_distance(&b, &c).unwrap();
                let ac = distribution_distance(&a, &c).unwrap();
                prop_assert!((ab - ba).abs() < 1e-9);
                prop_assert!(ac <= ab + bc + 1e-9);
                prop_assert!((0.0..=1.0).contains(&ab));
                prop_assert!(distribution_distance(&a, &a).unwrap() < 1e-12);
            }
        }
    }
}
