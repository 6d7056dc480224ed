//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use gcindex::model::{
    validate_tree, Bounds, ClassMap, Edge, IndexTree, InnovatorClass, Node, Normalization,
    Observation, Panel, TreeSpec, Weight, Weights,
};
use rand::seq::index::sample;
use rand::Rng;

pub const YEAR: i32 = 2006;

/// Raw description of a generated tree, kept apart from the engine's own
/// representation so the oracle does not read back what it is checking.
#[derive(Debug, Clone)]
pub struct GenTree {
    pub n: usize,
    pub first_leaf: usize,
    /// (child index, numerator, denominator) per class
    pub core: Vec<Vec<(usize, i64, i64)>>,
    pub noncore: Vec<Vec<(usize, i64, i64)>>,
    pub bounds: Vec<Option<(f64, f64)>>,
}

pub fn id(i: usize) -> String {
    format!("N{i}")
}

impl GenTree {
    pub fn is_leaf(&self, i: usize) -> bool {
        i >= self.first_leaf
    }

    pub fn edges(&self, i: usize, class: InnovatorClass) -> &[(usize, i64, i64)] {
        match class {
            InnovatorClass::Core => &self.core[i],
            InnovatorClass::NonCore => &self.noncore[i],
        }
    }

    pub fn spec(&self) -> TreeSpec {
        let to_edges = |es: &[(usize, i64, i64)]| {
            es.iter()
                .map(|&(c, p, q)| Edge::new(id(c), Weight::new(p, q)))
                .collect::<Vec<_>>()
        };
        let nodes = (0..self.n)
            .map(|i| {
                if self.is_leaf(i) {
                    let norm = self.bounds[i]
                        .map(|(lo, hi)| Normalization::Fixed(Bounds::new(lo, hi).unwrap()));
                    Node::leaf(id(i), norm)
                } else if self.core[i] == self.noncore[i] {
                    Node::aggregate(id(i), Weights::Shared(to_edges(&self.core[i])))
                } else {
                    Node::aggregate(
                        id(i),
                        Weights::ByClass {
                            core: to_edges(&self.core[i]),
                            noncore: to_edges(&self.noncore[i]),
                        },
                    )
                }
            })
            .collect();
        TreeSpec { root: id(0), nodes }
    }

    pub fn tree(&self) -> IndexTree {
        validate_tree(self.spec()).expect("generated tree is valid")
    }

    /// Ids of nodes reachable from the root for `class`.
    pub fn reachable(&self, class: InnovatorClass) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            if seen[i] {
                continue;
            }
            seen[i] = true;
            if !self.is_leaf(i) {
                stack.extend(self.edges(i, class).iter().map(|e| e.0));
            }
        }
        (0..self.n).filter(|&i| seen[i]).collect()
    }

    /// Brute-force recursive weighted sum with float weights.
    pub fn oracle(&self, i: usize, class: InnovatorClass, raw: &[f64]) -> f64 {
        if self.is_leaf(i) {
            return match self.bounds[i] {
                None => raw[i],
                Some((lo, hi)) => (1.0 + 6.0 * (raw[i] - lo) / (hi - lo)).clamp(1.0, 7.0),
            };
        }
        self.edges(i, class)
            .iter()
            .map(|&(c, p, q)| p as f64 / q as f64 * self.oracle(c, class, raw))
            .sum()
    }
}

fn random_edges<R: Rng>(rng: &mut R, i: usize, n: usize) -> Vec<(usize, i64, i64)> {
    let pool = n - i - 1;
    let k = rng.gen_range(1..=pool.min(4));
    let mut children: Vec<usize> = sample(rng, pool, k)
        .into_iter()
        .map(|c| c + i + 1)
        .collect();
    children.sort_unstable();
    let parts: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=9)).collect();
    let total: i64 = parts.iter().sum();
    children
        .into_iter()
        .zip(parts)
        .map(|(c, p)| (c, p, total))
        .collect()
}

/// A random valid tree with `2..=max_nodes` nodes. Children always have a
/// larger index than their parent, so the graph is acyclic by construction.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize) -> GenTree {
    let n = rng.gen_range(2..=max_nodes);
    let leaves = rng.gen_range(1..n);
    let first_leaf = n - leaves;
    let mut core = vec![Vec::new(); n];
    let mut noncore = vec![Vec::new(); n];
    for i in 0..first_leaf {
        core[i] = random_edges(rng, i, n);
        noncore[i] = if rng.gen_bool(0.4) {
            random_edges(rng, i, n)
        } else {
            core[i].clone()
        };
    }
    let bounds = (0..n)
        .map(|i| {
            (i >= first_leaf && rng.gen_bool(0.3)).then(|| {
                let lo = rng.gen_range(-50.0..50.0);
                (lo, lo + rng.gen_range(1.0..100.0))
            })
        })
        .collect();
    GenTree {
        n,
        first_leaf,
        core,
        noncore,
        bounds,
    }
}

/// Raw leaf values: 1-7 for unnormalized leaves, the bounds widened by 10
/// on each side for normalized ones (so clamping is exercised).
pub fn random_leaf_values<R: Rng>(rng: &mut R, g: &GenTree) -> Vec<f64> {
    (0..g.n)
        .map(|i| match g.bounds[i] {
            _ if !g.is_leaf(i) => f64::NAN,
            None => rng.gen_range(1.0..=7.0),
            Some((lo, hi)) => rng.gen_range(lo - 10.0..=hi + 10.0),
        })
        .collect()
}

pub fn leaf_panel(g: &GenTree, countries: &[(&str, InnovatorClass, Vec<f64>)]) -> Panel {
    let mut obs = Vec::new();
    let mut classes = ClassMap::new();
    for (c, class, raw) in countries {
        classes.insert(c.to_string(), *class);
        for (i, v) in raw.iter().enumerate().skip(g.first_leaf) {
            obs.push(Observation::new(YEAR, *c, id(i), *v).unwrap());
        }
    }
    Panel::new(obs, classes).unwrap()
}

/// Panel of TI, PII and MEI component scores on a 0.01 grid.
pub fn component_panel<R: Rng>(rng: &mut R, countries: usize, lo: f64, hi: f64) -> Panel {
    let mut obs = Vec::new();
    let mut classes = ClassMap::new();
    for i in 0..countries {
        let c = format!("C{i:02}");
        let class = if rng.gen_bool(0.5) {
            InnovatorClass::Core
        } else {
            InnovatorClass::NonCore
        };
        classes.insert(c.clone(), class);
        for node in ["TI", "PII", "MEI"] {
            let v = (rng.gen_range(lo..=hi) * 100.0).round() / 100.0;
            obs.push(Observation::new(YEAR, &c, node, v).unwrap());
        }
    }
    Panel::new(obs, classes).unwrap()
}

/// Panel with every leaf of the default tree for each country. Survey-style
/// leaves are on the 1-7 scale; hard leaves are raw counts.
pub fn full_leaf_panel<R: Rng>(rng: &mut R, countries: usize) -> Panel {
    use gcindex::model::{HARD_LEAVES, SURVEY_LEAVES};
    let scaled = ["IS", "TTS", "CLS", "CS", "MSS", "CCR", "GW"];
    let mut obs = Vec::new();
    let mut classes = ClassMap::new();
    for i in 0..countries {
        let c = format!("C{i:02}");
        let class = if i % 2 == 0 {
            InnovatorClass::Core
        } else {
            InnovatorClass::NonCore
        };
        classes.insert(c.clone(), class);
        for leaf in scaled.iter().chain(SURVEY_LEAVES.iter()) {
            obs.push(Observation::new(YEAR, &c, *leaf, rng.gen_range(1.0..=7.0)).unwrap());
        }
        for leaf in HARD_LEAVES {
            obs.push(Observation::new(YEAR, &c, leaf, rng.gen_range(0.0..1000.0)).unwrap());
        }
    }
    Panel::new(obs, classes).unwrap()
}

/// Gamma(k/2) from the half-integer recurrence.
pub fn gamma_half(k: u32) -> f64 {
    let (mut g, mut a) = if k.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while a < k as f64 / 2.0 {
        g *= a;
        a += 1.0;
    }
    g
}

#[allow(clippy::too_many_arguments)]
fn simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * eps {
        return left + right + diff / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, eps: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, eps, 50)
}

/// Upper chi-square tail by quadrature of the density. With t = u^2 the
/// integrand 2u f(u^2) is smooth at the origin for every df.
pub fn simpson_sf(x: f64, df: u32) -> f64 {
    let k = df as f64;
    let norm = 2f64.powf(k / 2.0) * gamma_half(df);
    let g = |u: f64| 2.0 * u.powf(k - 1.0) * (-u * u / 2.0).exp() / norm;
    let lo = x.sqrt();
    let mut total = 0.0;
    // unit panels keep the adaptive recursion well conditioned
    let mut a = lo;
    while a < lo + 15.0 {
        total += adaptive_simpson(g, a, a + 1.0, 1e-14);
        a += 1.0;
    }
    total
}

/// Least squares by the normal equations, with exact integer sums over the
/// years. Returns the slope and the fitted value at every point; the
/// intercept at year zero is badly conditioned and is not compared.
pub fn normal_equations(series: &[(i32, f64)]) -> (f64, Vec<f64>) {
    let n = series.len() as i128;
    let sx: i128 = series.iter().map(|p| p.0 as i128).sum();
    let sxx: i128 = series.iter().map(|p| (p.0 as i128).pow(2)).sum();
    let sy: f64 = series.iter().map(|p| p.1).sum();
    let sxy: f64 = series.iter().map(|p| p.0 as f64 * p.1).sum();
    let det = (n * sxx - sx * sx) as f64;
    let slope = (n as f64 * sxy - sx as f64 * sy) / det;
    let mean_x = sx as f64 / n as f64;
    let fitted = series
        .iter()
        .map(|p| sy / n as f64 + slope * (p.0 as f64 - mean_x))
        .collect();
    (slope, fitted)
}

/// Competition ranks by counting, for comparison with the engine.
pub fn counted_ranks(scores: &BTreeMap<String, f64>) -> BTreeMap<String, u32> {
    scores
        .iter()
        .map(|(c, s)| {
            let ahead = scores.values().filter(|v| *v > s).count();
            (c.clone(), ahead as u32 + 1)
        })
        .collect()
}
