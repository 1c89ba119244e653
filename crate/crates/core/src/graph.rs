//! The Sierpinski graph truncated at a chosen depth.
//!
//! Nodes are words; level-n words form the sphere S_n and the union of the
//! first N spheres forms the ball B_N. Edges are vertical (father-child) or
//! horizontal (same level, touching cells). Horizontal edges split into type
//! I (distinct vertex images) and type II (identified vertex images).
//!
//! Horizontal adjacency is decided by an exact shared-corner test on the
//! dyadic lattice; a closed-form word rule (`horizontal_neighbors`) provides
//! the same adjacency without materializing a level, which the walk engine
//! uses to step through arbitrarily deep nodes.

use std::collections::HashMap;

use rand::Rng;

use crate::address::{cell_vertices, vertex_point, LatticePoint, Word, POW3};
use crate::error::{Error, Result};

/// Maximum materialized depth. B_12 has ~800k nodes / ~2.8M directed edges;
/// beyond that the adjacency store stops being desk-scale.
pub const MAX_DEPTH: usize = 12;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum EdgeKind {
    Vertical,
    HorizontalI,
    HorizontalII,
}

impl EdgeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeKind::Vertical => "vertical",
            EdgeKind::HorizontalI => "horizontal-i",
            EdgeKind::HorizontalII => "horizontal-ii",
        }
    }
}

/// Number of nodes in the ball B_depth.
pub fn ball_size(depth: usize) -> usize {
    ((POW3[depth + 1] - 1) / 2) as usize
}

/// Offset of sphere S_level inside the level-major node indexing.
pub fn sphere_offset(level: usize) -> usize {
    ((POW3[level] - 1) / 2) as usize
}

/// Sierpinski graph on B_depth with typed adjacency lists.
pub struct Graph {
    depth: usize,
    adj: Vec<Vec<(u32, EdgeKind)>>,
}

impl Graph {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn node_index(&self, w: &Word) -> usize {
        debug_assert!(w.len() <= self.depth);
        sphere_offset(w.len()) + w.code() as usize
    }

    pub fn word_at(&self, index: usize) -> Word {
        let mut level = 0usize;
        while sphere_offset(level + 1) <= index {
            level += 1;
        }
        Word::from_code(level, (index - sphere_offset(level)) as u128)
    }

    pub fn neighbors(&self, w: &Word) -> &[(u32, EdgeKind)] {
        &self.adj[self.node_index(w)]
    }

    pub fn neighbors_by_index(&self, index: usize) -> &[(u32, EdgeKind)] {
        &self.adj[index]
    }

    /// Edge kind between two nodes, if they are adjacent.
    pub fn edge_kind(&self, x: &Word, y: &Word) -> Option<EdgeKind> {
        let yi = self.node_index(y) as u32;
        self.adj[self.node_index(x)].iter().find(|(n, _)| *n == yi).map(|(_, k)| *k)
    }

    pub fn degree(&self, w: &Word) -> usize {
        self.adj[self.node_index(w)].len()
    }

    /// Words of sphere S_level in code order.
    pub fn sphere(&self, level: usize) -> impl Iterator<Item = Word> + '_ {
        (0..POW3[level]).map(move |code| Word::from_code(level, code))
    }
}

/// Build the graph on B_depth.
///
/// Horizontal edges come from bucketing cells of each level by their exact
/// corner points: two same-level cells intersect iff they share a corner.
/// Each edge is typed by comparing vertex images.
pub fn build_graph(depth: usize) -> Result<Graph> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(Error::DepthTooLarge { depth, max: MAX_DEPTH });
    }
    let n_nodes = ball_size(depth);
    let mut adj: Vec<Vec<(u32, EdgeKind)>> = vec![Vec::with_capacity(7); n_nodes];

    // Vertical edges.
    for level in 1..=depth {
        let off = sphere_offset(level);
        let parent_off = sphere_offset(level - 1);
        for code in 0..POW3[level] as usize {
            let child = off + code;
            let parent = parent_off + code / 3;
            adj[child].push((parent as u32, EdgeKind::Vertical));
            adj[parent].push((child as u32, EdgeKind::Vertical));
        }
    }

    // Horizontal edges, one level at a time.
    for level in 1..=depth {
        let off = sphere_offset(level);
        let mut buckets: HashMap<LatticePoint, Vec<u32>> = HashMap::new();
        for code in 0..POW3[level] {
            let w = Word::from_code(level, code);
            for corner in cell_vertices(&w) {
                buckets.entry(corner).or_default().push(code as u32);
            }
        }
        for (_, cells) in buckets {
            // A corner point of a level-n cell is shared by at most one other
            // cell of the same level.
            debug_assert!(cells.len() <= 2);
            if cells.len() == 2 {
                let (ca, cb) = (cells[0], cells[1]);
                let wa = Word::from_code(level, ca as u128);
                let wb = Word::from_code(level, cb as u128);
                let kind = if vertex_point(&wa).unwrap() == vertex_point(&wb).unwrap() {
                    EdgeKind::HorizontalII
                } else {
                    EdgeKind::HorizontalI
                };
                adj[off + ca as usize].push((off as u32 + cb, kind));
                adj[off + cb as usize].push((off as u32 + ca, kind));
            }
        }
    }

    for list in &mut adj {
        list.sort_unstable_by_key(|(n, _)| *n);
        debug_assert!(list.windows(2).all(|p| p[0].0 != p[1].0));
    }
    Ok(Graph { depth, adj })
}

/// Horizontal neighbors of a word by the closed word rule, with edge kinds:
/// the two siblings (type I) and, for non-constant words, the unique bridge
/// partner `u a b^r <-> u b a^r` (type II).
pub fn horizontal_neighbors(w: &Word) -> Vec<(Word, EdgeKind)> {
    let mut out = Vec::with_capacity(3);
    let last = match w.last_letter() {
        None => return out,
        Some(l) => l,
    };
    let father = w.father().unwrap();
    for letter in 0..3u8 {
        if letter != last {
            out.push((father.child(letter).unwrap(), EdgeKind::HorizontalI));
        }
    }
    if let Some(p) = bridge_partner(w) {
        out.push((p, EdgeKind::HorizontalII));
    }
    out
}

/// The type-II partner of `w`: writing `w = u a b^r` with a maximal trailing
/// run of `b` and `a != b`, the partner is `u b a^r`. Constant words have no
/// partner.
pub fn bridge_partner(w: &Word) -> Option<Word> {
    let n = w.len();
    let r = w.trailing_run();
    if r == 0 || r == n {
        return None;
    }
    let b = w.last_letter().unwrap() as u128;
    let a = w.letter(n - 1 - r) as u128;
    let u_code = w.code() / POW3[r + 1];
    let rep_a = a * (POW3[r] - 1) / 2; // a repeated r times in base 3
    Some(Word::from_code(n, (u_code * 3 + b) * POW3[r] + rep_a))
}

/// BFS distances from `source` to every node of the ball; `u16::MAX` marks
/// unreachable (never happens on a connected ball).
pub fn bfs_distances(g: &Graph, source: &Word) -> Vec<u16> {
    let mut dist = vec![u16::MAX; g.node_count()];
    let s = g.node_index(source);
    dist[s] = 0;
    let mut queue = std::collections::VecDeque::with_capacity(1024);
    queue.push_back(s as u32);
    while let Some(x) = queue.pop_front() {
        let dx = dist[x as usize];
        for &(y, _) in g.neighbors_by_index(x as usize) {
            if dist[y as usize] == u16::MAX {
                dist[y as usize] = dx + 1;
                queue.push_back(y);
            }
        }
    }
    dist
}

/// Graph metric between `x` and `y`.
///
/// Computed on the truncated ball, valid for the infinite graph when both
/// ends keep a two-level safety margin below the truncation depth (depth
/// stability is covered by tests rather than assumed).
pub fn graph_distance(g: &Graph, x: &Word, y: &Word) -> Result<usize> {
    let level = x.len().max(y.len());
    if level + 2 > g.depth() {
        return Err(Error::MarginViolated { level, depth: g.depth() });
    }
    if x == y {
        return Ok(0);
    }
    // BFS truncated as soon as the target is settled.
    let mut dist = vec![u16::MAX; g.node_count()];
    let s = g.node_index(x);
    let t = g.node_index(y);
    dist[s] = 0;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(s as u32);
    while let Some(v) = queue.pop_front() {
        if v as usize == t {
            return Ok(dist[t] as usize);
        }
        let dv = dist[v as usize];
        for &(u, _) in g.neighbors_by_index(v as usize) {
            if dist[u as usize] == u16::MAX {
                dist[u as usize] = dv + 1;
                queue.push_back(u);
            }
        }
    }
    unreachable!("ball is connected");
}

/// Gromov product `|x ^ y| = (|x| + |y| - d(x,y)) / 2`.
///
/// Always a half-integer, hence exactly representable in an f64.
pub fn gromov_product(g: &Graph, x: &Word, y: &Word) -> Result<f64> {
    let d = graph_distance(g, x, y)?;
    Ok((x.len() as f64 + y.len() as f64 - d as f64) / 2.0)
}

/// The visual quasi-metric `rho_a(x,y) = exp(-a |x ^ y|)`, zero on the
/// diagonal.
pub fn rho_a(g: &Graph, x: &Word, y: &Word, a: f64) -> Result<f64> {
    assert!(a > 0.0, "rho_a needs a > 0");
    if x == y {
        return Ok(0.0);
    }
    Ok((-a * gromov_product(g, x, y)?).exp())
}

/// Hyperbolicity defect `max min(|x^z|, |z^y|) - |x^y|` over all triples of
/// the ball up to `radius`, plus the implied ultra-metric constant
/// `a' = e^{a delta} - 1` for a given `a`.
pub struct UltrametricReport {
    pub delta: f64,
    pub a_prime: f64,
    pub triples: usize,
}

pub fn ultrametric_constant(g: &Graph, radius: usize, a: f64) -> Result<UltrametricReport> {
    if radius + 2 > g.depth() {
        return Err(Error::MarginViolated { level: radius, depth: g.depth() });
    }
    let n = ball_size(radius);
    // Dense Gromov-product table in half-units.
    let mut gp2 = vec![0i16; n * n];
    for i in 0..n {
        let w = g.word_at(i);
        let dist = bfs_distances(g, &w);
        for j in 0..n {
            let v = g.word_at(j);
            gp2[i * n + j] = (w.len() + v.len()) as i16 - dist[g.node_index(&v)] as i16;
        }
    }
    let mut worst = i16::MIN;
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let gxy = gp2[x * n + y];
            for z in 0..n {
                let m = gp2[x * n + z].min(gp2[z * n + y]);
                if m - gxy > worst {
                    worst = m - gxy;
                }
            }
        }
    }
    let delta = worst.max(0) as f64 / 2.0;
    Ok(UltrametricReport { delta, a_prime: (a * delta).exp() - 1.0, triples: n * n * n })
}

/// Log-log comparison of the gasket metric against `rho_a` over sampled deep
/// word pairs (finite-word proxies for boundary points).
pub struct HolderReport {
    pub slope: f64,
    pub expected_slope: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub used: usize,
    pub skipped_identified: usize,
}

pub fn holder_check(g: &Graph, pairs: &[(Word, Word)], a: f64) -> Result<HolderReport> {
    let exponent = std::f64::consts::LN_2 / a;
    let mut pts = Vec::with_capacity(pairs.len());
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = 0.0f64;
    let mut skipped = 0usize;
    for (x, y) in pairs {
        let px = vertex_point(x)?;
        let py = vertex_point(y)?;
        let de = px.euclid_distance(&py);
        if de == 0.0 {
            skipped += 1;
            continue;
        }
        let rho = rho_a(g, x, y, a)?;
        let ratio = de / rho.powf(exponent);
        ratio_min = ratio_min.min(ratio);
        ratio_max = ratio_max.max(ratio);
        pts.push((rho.ln(), de.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::DegenerateSample(pairs.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(HolderReport {
        slope: sxy / sxx,
        expected_slope: exponent,
        ratio_min,
        ratio_max,
        used: pts.len(),
        skipped_identified: skipped,
    })
}

/// Sample word pairs with a shared random prefix, spread across scales.
pub fn sample_deep_pairs<R: Rng>(
    depth_lo: usize,
    depth_hi: usize,
    count: usize,
    rng: &mut R,
) -> Vec<(Word, Word)> {
    assert!(depth_lo >= 1 && depth_lo <= depth_hi);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let depth = rng.gen_range(depth_lo..=depth_hi);
        let split = rng.gen_range(0..depth);
        let mut prefix = Word::ROOT;
        for _ in 0..split {
            prefix = prefix.child(rng.gen_range(0..3u8)).unwrap();
        }
        let mut x = prefix;
        let mut y = prefix;
        for i in 0..depth - split {
            let (lx, ly) = if i == 0 {
                let lx = rng.gen_range(0..3u8);
                let mut ly = rng.gen_range(0..3u8);
                while ly == lx {
                    ly = rng.gen_range(0..3u8);
                }
                (lx, ly)
            } else {
                (rng.gen_range(0..3u8), rng.gen_range(0..3u8))
            };
            x = x.child(lx).unwrap();
            y = y.child(ly).unwrap();
        }
        out.push((x, y));
    }
    out
}

/// A function on the nodes of B_depth, stored level-major.
#[derive(Clone)]
pub struct NodeFunction {
    depth: usize,
    values: Vec<f64>,
}

impl NodeFunction {
    pub fn zeros(depth: usize) -> NodeFunction {
        NodeFunction { depth, values: vec![0.0; ball_size(depth)] }
    }

    pub fn constant(depth: usize, value: f64) -> NodeFunction {
        NodeFunction { depth, values: vec![value; ball_size(depth)] }
    }

    pub fn from_values(depth: usize, values: Vec<f64>) -> NodeFunction {
        assert_eq!(values.len(), ball_size(depth));
        NodeFunction { depth, values }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, w: &Word) -> f64 {
        self.values[sphere_offset(w.len()) + w.code() as usize]
    }

    pub fn set(&mut self, w: &Word, value: f64) {
        self.values[sphere_offset(w.len()) + w.code() as usize] = value;
    }

    /// Slice holding the values of sphere S_level, indexed by word code.
    pub fn sphere(&self, level: usize) -> &[f64] {
        let off = sphere_offset(level);
        &self.values[off..off + POW3[level] as usize]
    }

    pub fn scaled(&self, factor: f64) -> NodeFunction {
        NodeFunction { depth: self.depth, values: self.values.iter().map(|v| v * factor).collect() }
    }
}
