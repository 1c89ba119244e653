//! Energy-minimizing triangle interpolation, the separating-function
//! construction, Poisson integrals and continuous extension to the boundary.
//!
//! One sibling triangle with corner values (a, b, c) spawns three triangles
//! one level down; the midpoint values minimizing the new horizontal energy
//! are x = (2a+2b+c)/5, y = (a+2b+2c)/5, z = (2a+b+2c)/5. With them the
//! horizontal energy contracts by exactly 1/(5 lambda) per level and the
//! vertical energy locks to 14/(25 C1) times the horizontal one. The
//! identities are checked in exact rational arithmetic; large-depth
//! propagation runs in binary64.

use num::{BigRational, FromPrimitive, Zero};

use crate::address::{Word, POW3};
use crate::conductance::WeightedGraph;
use crate::error::{Error, Result};
use crate::graph::{horizontal_neighbors, sphere_offset, NodeFunction};
use crate::green::HittingSolver;

/// Values at the three corners of one sibling triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleValues<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T> TriangleValues<T> {
    pub fn new(a: T, b: T, c: T) -> TriangleValues<T> {
        TriangleValues { a, b, c }
    }
}

/// Midpoint values (x, y, z) minimizing the energy of the three spawned
/// triangles; exact when `T` is rational.
pub fn interpolate_triangle<T>(t: &TriangleValues<T>) -> (T, T, T)
where
    T: Clone
        + FromPrimitive
        + std::ops::Add<Output = T>
        + std::ops::Mul<Output = T>
        + std::ops::Div<Output = T>,
{
    let two = T::from_u8(2).unwrap();
    let five = T::from_u8(5).unwrap();
    let x = (two.clone() * t.a.clone() + two.clone() * t.b.clone() + t.c.clone()) / five.clone();
    let y = (t.a.clone() + two.clone() * t.b.clone() + two.clone() * t.c.clone()) / five.clone();
    let z = (two.clone() * t.a.clone() + t.b.clone() + two * t.c.clone()) / five;
    (x, y, z)
}

/// Exact energy bookkeeping for one triangle at level `n`:
/// A1 is its horizontal contribution, A2 the contribution of the three
/// spawned triangles (with minimizing midpoints), A3 that of the nine
/// vertical edges connecting the two levels. All three are direct sums; the
/// contraction identities `A2 * 5 lambda = A1` and `A3 * 25 C1 = 14 A1`
/// are checked against them exactly.
pub struct RecursionCheck {
    pub a1: BigRational,
    pub a2: BigRational,
    pub a3: BigRational,
    pub degenerate: bool,
}

impl RecursionCheck {
    pub fn identities_hold(&self, lambda: &BigRational, c1: &BigRational) -> bool {
        let five = BigRational::from_u8(5).unwrap();
        let fourteen = BigRational::from_u8(14).unwrap();
        let twentyfive = BigRational::from_u8(25).unwrap();
        self.a2.clone() * five * lambda.clone() == self.a1
            && self.a3.clone() * twentyfive * c1.clone() == fourteen * self.a1.clone()
    }
}

pub fn energy_recursion_check(
    t: &TriangleValues<BigRational>,
    level: usize,
    lambda: &BigRational,
    c1: &BigRational,
) -> RecursionCheck {
    let three = BigRational::from_u8(3).unwrap();
    let factor_n = (three.clone() * lambda.clone()).pow(-(level as i32));
    let factor_n1 = (three * lambda.clone()).pow(-(level as i32) - 1);
    let sq = |v: BigRational| v.clone() * v;
    let (a, b, c) = (t.a.clone(), t.b.clone(), t.c.clone());
    let (x, y, z) = interpolate_triangle(t);

    let a1 = c1.clone()
        * factor_n.clone()
        * (sq(a.clone() - b.clone()) + sq(b.clone() - c.clone()) + sq(a.clone() - c.clone()));
    let a2 = c1.clone()
        * factor_n1
        * (sq(a.clone() - x.clone())
            + sq(a.clone() - z.clone())
            + sq(x.clone() - z.clone())
            + sq(b.clone() - x.clone())
            + sq(b.clone() - y.clone())
            + sq(x.clone() - y.clone())
            + sq(c.clone() - y.clone())
            + sq(c.clone() - z.clone())
            + sq(y.clone() - z.clone()));
    let a3 = factor_n
        * (sq(a.clone() - x.clone())
            + sq(a.clone() - z.clone())
            + sq(b.clone() - x.clone())
            + sq(b.clone() - y.clone())
            + sq(c.clone() - y.clone())
            + sq(c - z));
    let degenerate = a1.is_zero();
    RecursionCheck { a1, a2, a3, degenerate }
}

/// Assign sphere `n+1` from sphere `n` by the minimizing interpolation.
///
/// Corner children inherit their parent's value; the two words meeting at
/// each midpoint (an identified pair) both receive the minimizing value, so
/// type-II edges never contribute energy.
pub fn propagate_level(level_values: &[f64]) -> Vec<f64> {
    debug_assert_eq!(level_values.len() % 3, 0);
    let parents = level_values.len() / 3;
    let mut out = vec![0.0; level_values.len() * 3];
    for u in 0..parents {
        let t = TriangleValues::new(
            level_values[u * 3],
            level_values[u * 3 + 1],
            level_values[u * 3 + 2],
        );
        let (x, y, z) = interpolate_triangle(&t);
        let base = u * 9;
        out[base] = t.a;
        out[base + 1] = x;
        out[base + 2] = z;
        out[base + 3] = x;
        out[base + 4] = t.b;
        out[base + 5] = y;
        out[base + 6] = z;
        out[base + 7] = y;
        out[base + 8] = t.c;
    }
    out
}

/// The separating function for two disjoint same-level cells: zero on the
/// ball up to their level, one on the children of `p_cell` and on their
/// same-sphere neighbors, zero elsewhere on that sphere, then interpolated
/// level by level.
pub struct SeparatingFunction {
    pub values: NodeFunction,
    pub p_cell: Word,
    pub q_cell: Word,
    /// First sphere carrying nonzero values (one below the cell level).
    pub seed_level: usize,
}

pub fn build_separating_function(
    depth: usize,
    p_cell: &Word,
    q_cell: &Word,
) -> Result<SeparatingFunction> {
    let m = p_cell.len();
    if q_cell.len() != m || m == 0 {
        return Err(Error::Precondition(
            "separating cells must sit at the same positive level".into(),
        ));
    }
    if p_cell == q_cell
        || horizontal_neighbors(p_cell).iter().any(|(nb, _)| nb == q_cell)
    {
        return Err(Error::CellsAdjacent(p_cell.to_string(), q_cell.to_string()));
    }
    if depth < m + 2 {
        return Err(Error::Precondition(format!(
            "separating function needs depth >= {} (cells at level {m})",
            m + 2
        )));
    }

    let seed_level = m + 1;
    let mut seed = vec![0.0f64; POW3[seed_level] as usize];
    let ones: Vec<Word> = (0..3u8).map(|l| p_cell.child(l).unwrap()).collect();
    for w in &ones {
        seed[w.code() as usize] = 1.0;
        for (nb, _) in horizontal_neighbors(w) {
            seed[nb.code() as usize] = 1.0;
        }
    }
    // The construction must keep identified pairs consistent and must leave
    // the children of the far cell untouched; both could only fail if the
    // cells were too close.
    for code in 0..POW3[seed_level] {
        let w = Word::from_code(seed_level, code);
        if let Some(partner) = crate::graph::bridge_partner(&w) {
            if seed[w.code() as usize] != seed[partner.code() as usize] {
                return Err(Error::SeedConflict(w.to_string(), partner.to_string()));
            }
        }
    }
    for l in 0..3u8 {
        let qc = q_cell.child(l).unwrap();
        if seed[qc.code() as usize] != 0.0 {
            return Err(Error::SeedConflict(qc.to_string(), p_cell.to_string()));
        }
    }

    let mut values = NodeFunction::zeros(depth);
    let off = sphere_offset(seed_level);
    values.values_mut()[off..off + seed.len()].copy_from_slice(&seed);
    let mut level_values = seed;
    for level in seed_level + 1..=depth {
        level_values = propagate_level(&level_values);
        let off = sphere_offset(level);
        values.values_mut()[off..off + level_values.len()].copy_from_slice(&level_values);
    }
    Ok(SeparatingFunction { values, p_cell: *p_cell, q_cell: *q_cell, seed_level })
}

/// Poisson integral of a piecewise-constant boundary function (one value per
/// level-L cell), as a node function on the whole ball.
pub fn poisson_integral(
    wg: &WeightedGraph,
    cell_level: usize,
    cell_values: &[f64],
) -> Result<NodeFunction> {
    HittingSolver::new(wg, cell_level)?.poisson(cell_values)
}

/// Boundary trace of a finite-energy node function along canonical rays.
pub struct BoundaryTrace {
    pub cell_level: usize,
    /// Value at the depth-N node of the ray descending into each cell.
    pub values: Vec<f64>,
    /// Certified modulus: `sqrt(2C) / (1 - sqrt(3 lambda)) * (3 lambda)^{N/2}`.
    pub tail_bound: f64,
    pub energy: f64,
}

/// Trace of `v` on level-L cells: each cell is entered along the ray that
/// repeatedly appends letter 0, and the value at depth N is reported with
/// the tail bound certified by the energy of `v`.
pub fn extend_to_boundary(
    wg: &WeightedGraph,
    v: &NodeFunction,
    cell_level: usize,
) -> Result<BoundaryTrace> {
    let lambda = wg.params().lambda;
    if lambda >= 1.0 / 3.0 {
        return Err(Error::ExtensionNotCertified { lambda });
    }
    let depth = v.depth();
    if cell_level > depth {
        return Err(Error::Precondition("trace level exceeds function depth".into()));
    }
    let energy = crate::energy::graph_energy(wg, v)?.total;
    let tail_bound = ray_tail_bound(lambda, energy, depth);
    let mut values = Vec::with_capacity(POW3[cell_level] as usize);
    for code in 0..POW3[cell_level] {
        let mut x = Word::from_code(cell_level, code);
        while x.len() < depth {
            x = x.child(0).unwrap();
        }
        values.push(v.get(&x));
    }
    Ok(BoundaryTrace { cell_level, values, tail_bound, energy })
}

/// `sqrt(2C) / (1 - sqrt(3 lambda)) * (sqrt(3 lambda))^n`: the certified
/// distance between the value at a depth-n ray node and the ray's boundary
/// limit, for a function of energy `C`.
pub fn ray_tail_bound(lambda: f64, energy: f64, level: usize) -> f64 {
    let root = (3.0 * lambda).sqrt();
    (2.0 * energy).sqrt() / (1.0 - root) * root.powi(level as i32)
}
