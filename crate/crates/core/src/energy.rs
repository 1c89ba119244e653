//! Graph energies, the jump-form quadrature on the gasket, the trace
//! inequality and the walk-dimension scanner.
//!
//! The scanner classifies the separating function's per-level horizontal
//! energies: they contract by exactly 1/(5 lambda) per level, so the
//! convergent/divergent boundary sits at lambda = 1/5 and the critical
//! exponent is beta* = log 5 / log 2. Two routes locate it: the fitted
//! successive ratio compared against 1, and the regression slope of the raw
//! log-energies; both operate on measured finite-depth energies only.

use rayon::prelude::*;

use crate::address::{cell_barycenter, vertex_point, Word, POW3};
use crate::conductance::{ConductanceParams, WeightedGraph};
use crate::error::{Error, Result};
use crate::graph::{EdgeKind, NodeFunction};
use crate::harmonic::{build_separating_function, poisson_integral};

/// Fitted per-level ratios within this band of 1 are declared critical.
pub const CRITICAL_BAND: f64 = 0.02;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Classification {
    Convergent,
    Divergent,
    Critical,
}

impl Classification {
    pub fn from_ratio(ratio: f64) -> Classification {
        if (ratio - 1.0).abs() <= CRITICAL_BAND {
            Classification::Critical
        } else if ratio < 1.0 {
            Classification::Convergent
        } else {
            Classification::Divergent
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Convergent => "convergent",
            Classification::Divergent => "divergent",
            Classification::Critical => "critical",
        }
    }
}

/// Per-level energy decomposition of a node function.
///
/// `horizontal[n]` is the energy carried by sphere S_n (n >= 1) and
/// `vertical[n]` by the edges between S_n and S_{n+1}; every unordered edge
/// is counted once.
pub struct EnergyReport {
    pub horizontal: Vec<f64>,
    pub vertical: Vec<f64>,
    pub total: f64,
    pub fitted_ratio: Option<f64>,
    pub classification: Classification,
}

impl EnergyReport {
    fn from_levels(horizontal: Vec<f64>, vertical: Vec<f64>) -> EnergyReport {
        let total = horizontal.iter().sum::<f64>() + vertical.iter().sum::<f64>();
        let fitted_ratio = fit_ratio(&horizontal);
        let classification = match fitted_ratio {
            Some(r) => Classification::from_ratio(r),
            // No geometric signal at all: the truncated sum is trivially
            // finite.
            None => Classification::Convergent,
        };
        EnergyReport { horizontal, vertical, total, fitted_ratio, classification }
    }
}

/// Least-squares slope of log h_n over the levels with nonzero energy;
/// returns the per-level ratio e^slope, or None with fewer than two usable
/// levels.
fn fit_ratio(horizontal: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = horizontal
        .iter()
        .enumerate()
        .filter(|(_, h)| **h > 0.0)
        .map(|(n, h)| (n as f64, h.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some((sxy / sxx).exp())
}

/// Exact per-level decomposition of `(1/2) sum c(x,y) (u(x)-u(y))^2` on the
/// ball, each unordered edge once.
pub fn graph_energy(wg: &WeightedGraph, u: &NodeFunction) -> Result<EnergyReport> {
    let g = wg.graph();
    if u.depth() != g.depth() {
        return Err(Error::Precondition(format!(
            "function depth {} does not match graph depth {}",
            u.depth(),
            g.depth()
        )));
    }
    let depth = g.depth();
    let mut horizontal = vec![0.0; depth + 1];
    let mut vertical = vec![0.0; depth];
    let values = u.values();
    for idx in 0..g.node_count() {
        let x = g.word_at(idx);
        let n = x.len();
        for &(j, kind) in g.neighbors_by_index(idx) {
            match kind {
                EdgeKind::Vertical => {
                    // Count the edge at its child endpoint.
                    if (j as usize) < idx {
                        let d = values[idx] - values[j as usize];
                        vertical[n - 1] += wg.params().vertical_conductance(n - 1) * d * d;
                    }
                }
                _ => {
                    if (j as usize) > idx {
                        let d = values[idx] - values[j as usize];
                        horizontal[n] += wg.params().horizontal_conductance(kind, n) * d * d;
                    }
                }
            }
        }
    }
    Ok(EnergyReport::from_levels(horizontal, vertical))
}

/// Midpoint-cell quadrature of the jump energy
/// `sum_{w != w'} (u_w - u_{w'})^2 |x_w - x_{w'}|^{-(alpha+beta)} 3^{-2L}`
/// over ordered cell pairs, with cell barycenters as representative points.
pub struct JumpQuadrature {
    level: usize,
    barycenters: Vec<(f64, f64)>,
}

impl JumpQuadrature {
    pub fn new(level: usize) -> Result<JumpQuadrature> {
        if level == 0 || level > 8 {
            return Err(Error::Precondition(format!(
                "jump quadrature level {level} outside 1..=8"
            )));
        }
        let barycenters = (0..POW3[level])
            .map(|code| cell_barycenter(&Word::from_code(level, code)))
            .collect();
        Ok(JumpQuadrature { level, barycenters })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn cell_count(&self) -> usize {
        self.barycenters.len()
    }

    /// Quadrature value for cell values `u` and total exponent
    /// `alpha + beta`. Diagonal pairs are excluded.
    pub fn energy(&self, u: &[f64], alpha_plus_beta: f64) -> Result<f64> {
        let n = self.barycenters.len();
        if u.len() != n {
            return Err(Error::Precondition(format!(
                "expected {} cell values, got {}",
                n,
                u.len()
            )));
        }
        let weight = 9.0f64.powi(-(self.level as i32));
        let half = -alpha_plus_beta / 2.0;
        // Deterministic tree reduction: each row is summed in index order and
        // rows are combined in index order.
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (xi, yi) = self.barycenters[i];
                let ui = u[i];
                let mut acc = 0.0;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let (xj, yj) = self.barycenters[j];
                    let du = ui - u[j];
                    let d2 = (xi - xj) * (xi - xj) + (yi - yj) * (yi - yj);
                    acc += du * du * d2.powf(half);
                }
                acc
            })
            .collect();
        Ok(rows.iter().sum::<f64>() * weight)
    }
}

/// The named smooth test family used for comparability experiments: ten
/// non-constant functions evaluated at cell barycenters.
pub fn test_function_family() -> Vec<(&'static str, fn(f64, f64) -> f64)> {
    vec![
        ("coord_x", |x, _| x),
        ("coord_y", |_, y| y),
        ("coord_sum", |x, y| x + y),
        ("coord_diff", |x, y| x - y),
        ("coord_prod", |x, y| x * y),
        ("sq_x", |x, _| x * x),
        ("sq_y", |_, y| y * y),
        ("radial2", |x, y| (x - 0.5).powi(2) + (y - 0.3).powi(2)),
        ("exp_x", |x, _| (-x).exp()),
        ("saddle", |x, y| x * x - y * y),
    ]
}

pub fn cell_values_of(level: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..POW3[level])
        .map(|code| {
            let (x, y) = cell_barycenter(&Word::from_code(level, code));
            f(x, y)
        })
        .collect()
}

pub struct NaimReport {
    pub per_function: Vec<(String, f64)>,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

/// Ratio of the graph energy of the harmonic extension to the jump
/// quadrature, over a family of boundary functions. The two sides are
/// comparable with unknown constants; the report carries the measured band.
pub fn naim_comparability(
    wg: &WeightedGraph,
    cell_level: usize,
    functions: &[(&str, fn(f64, f64) -> f64)],
) -> Result<NaimReport> {
    let quad = JumpQuadrature::new(cell_level)?;
    let exponent = ConductanceParams::alpha() + wg.params().beta();
    let mut per_function = Vec::with_capacity(functions.len());
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = 0.0f64;
    for (name, f) in functions {
        let cells = cell_values_of(cell_level, f);
        let spread = cells.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - cells.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread == 0.0 {
            return Err(Error::Precondition(format!(
                "constant test function {name} excluded from comparability"
            )));
        }
        let hu = poisson_integral(wg, cell_level, &cells)?;
        let graph = graph_energy(wg, &hu)?.total;
        let jump = quad.energy(&cells, exponent)?;
        let ratio = graph / jump;
        per_function.push((name.to_string(), ratio));
        ratio_min = ratio_min.min(ratio);
        ratio_max = ratio_max.max(ratio);
    }
    Ok(NaimReport { per_function, ratio_min, ratio_max })
}

pub struct TraceInequalityReport {
    pub lhs: f64,
    pub extension_energy: f64,
    pub extension_l2m: f64,
    pub c_squared: f64,
    pub rhs: f64,
    /// RHS / LHS; at least 1 when the inequality holds.
    pub slack: f64,
}

/// Explicit trace-inequality constant
/// `C^2 = max(14 G(o,o) / pi(o), 4 / m(o))` with `G(o,o) = 1/(1-lambda)`,
/// `pi(o) = 3`, `m(o) = 1`.
pub fn trace_constant(params: &ConductanceParams) -> f64 {
    (14.0 * params.green_oo() / 3.0).max(4.0)
}

/// Check `int |u|^2 dnu <= C^2 (E(Hu,Hu) + ||Hu||^2_{L2(m)})` for a
/// piecewise-constant boundary function.
pub fn trace_inequality_check(
    wg: &WeightedGraph,
    cell_level: usize,
    cell_values: &[f64],
) -> Result<TraceInequalityReport> {
    wg.params().require_regular_regime()?;
    let nu_cell = 3.0f64.powi(-(cell_level as i32));
    let lhs: f64 = cell_values.iter().map(|v| v * v).sum::<f64>() * nu_cell;
    let hu = poisson_integral(wg, cell_level, cell_values)?;
    let energy = graph_energy(wg, &hu)?.total;
    let g = wg.graph();
    let l2m: f64 = (0..g.node_count())
        .map(|i| {
            let v = hu.values()[i];
            v * v * wg.params().measure_m(&g.word_at(i))
        })
        .sum();
    let c_squared = trace_constant(wg.params());
    let rhs = c_squared * (energy + l2m);
    Ok(TraceInequalityReport {
        lhs,
        extension_energy: energy,
        extension_l2m: l2m,
        c_squared,
        rhs,
        slack: rhs / lhs,
    })
}

/// Horizontal sphere energy of the pullback of a plane function:
/// `sum_{x~y in S_n} c(x,y) (f(Phi x) - f(Phi y))^2`, unordered edges once.
pub fn sphere_pullback_energy(
    wg: &WeightedGraph,
    f: impl Fn(f64, f64) -> f64,
    level: usize,
) -> Result<f64> {
    let g = wg.graph();
    if level == 0 || level > g.depth() {
        return Err(Error::Precondition(format!("sphere level {level} outside the ball")));
    }
    let mut total = 0.0;
    for word in g.sphere(level) {
        let idx = g.node_index(&word);
        let (px, py) = vertex_point(&word)?.plane();
        let fx = f(px, py);
        for &(j, kind) in g.neighbors_by_index(idx) {
            if kind != EdgeKind::Vertical && (j as usize) > idx {
                let other = g.word_at(j as usize);
                let (qx, qy) = vertex_point(&other)?.plane();
                let d = fx - f(qx, qy);
                total += wg.params().horizontal_conductance(kind, level) * d * d;
            }
        }
    }
    Ok(total)
}

/// Energy report of the separating function for the standard disjoint pair
/// of level-2 cells, at the given lambda.
pub fn separating_energy_report(
    c1: f64,
    c2: f64,
    lambda: f64,
    depth: usize,
) -> Result<EnergyReport> {
    let params = ConductanceParams::new(lambda, c1, c2, lambda / 2.0)?;
    let wg = WeightedGraph::build(depth, params)?;
    let sep = build_separating_function(depth, &"00".parse().unwrap(), &"11".parse().unwrap())?;
    graph_energy(&wg, &sep.values)
}

/// Fitted ratio restricted to the propagated levels (seed level onward).
fn separating_fitted_ratio(c1: f64, c2: f64, lambda: f64, depth: usize) -> Result<(f64, f64)> {
    let report = separating_energy_report(c1, c2, lambda, depth)?;
    // Levels 3..depth carry the interpolated cascade (cells at level 2).
    let h = &report.horizontal[3..];
    let mut ratios = Vec::new();
    for w in h.windows(2) {
        if w[0] > 0.0 && w[1] > 0.0 {
            ratios.push(w[1] / w[0]);
        }
    }
    let ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    // Raw-growth route: regression slope of log h_n over the same levels.
    let slope = {
        let pts: Vec<(f64, f64)> = h
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, v)| (i as f64, v.ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    };
    Ok((ratio, slope))
}

pub struct ScanPoint {
    pub lambda: f64,
    pub fitted_ratio: f64,
    pub classification: Classification,
}

pub struct ScanReport {
    pub points: Vec<ScanPoint>,
    pub lambda_hat_ratio: f64,
    pub beta_hat_ratio: f64,
    pub lambda_hat_growth: f64,
    pub beta_hat_growth: f64,
}

/// Scan lambda over a grid, classify the separating-function energies, and
/// bisect the convergent/divergent boundary along both routes.
pub fn walk_dimension_scan(
    c1: f64,
    c2: f64,
    grid: &[f64],
    depth: usize,
) -> Result<ScanReport> {
    if grid.len() < 2 {
        return Err(Error::Precondition("scan grid needs at least two points".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let (ratio, _) = separating_fitted_ratio(c1, c2, lambda, depth)?;
        points.push(ScanPoint {
            lambda,
            fitted_ratio: ratio,
            classification: Classification::from_ratio(ratio),
        });
    }
    let any_div = points.iter().any(|p| p.fitted_ratio > 1.0);
    let any_conv = points.iter().any(|p| p.fitted_ratio < 1.0);
    if !any_div || !any_conv {
        return Err(Error::NoBracket);
    }
    let (mut lo, mut hi) = (grid[0], grid[grid.len() - 1]);
    let lambda_hat_ratio = bisect(lo, hi, |l| {
        separating_fitted_ratio(c1, c2, l, depth).map(|(r, _)| r - 1.0)
    })?;
    lo = grid[0];
    hi = grid[grid.len() - 1];
    let lambda_hat_growth =
        bisect(lo, hi, |l| separating_fitted_ratio(c1, c2, l, depth).map(|(_, s)| s))?;
    let beta = |l: f64| -l.ln() / std::f64::consts::LN_2;
    Ok(ScanReport {
        points,
        lambda_hat_ratio,
        beta_hat_ratio: beta(lambda_hat_ratio),
        lambda_hat_growth,
        beta_hat_growth: beta(lambda_hat_growth),
    })
}

/// Bisection for a decreasing function with a bracketed sign change.
fn bisect(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-12 {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sphere_offset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wd(s: &str) -> Word {
        s.parse().unwrap()
    }

    /// Direct edge-sum oracle over explicit edge enumeration; independent of
    /// the per-level bookkeeping in graph_energy.
    fn direct_energy_oracle(wg: &WeightedGraph, u: &NodeFunction) -> f64 {
        let g = wg.graph();
        let mut total = 0.0;
        for idx in 0..g.node_count() {
            let x = g.word_at(idx);
            for &(j, kind) in g.neighbors_by_index(idx) {
                let y = g.word_at(j as usize);
                let c = wg.params().edge_conductance(kind, x.len(), y.len());
                let d = u.values()[idx] - u.values()[j as usize];
                total += 0.5 * c * d * d;
            }
        }
        total
    }

    #[test]
    fn constant_function_has_zero_report() {
        let wg = WeightedGraph::build(5, ConductanceParams::reference()).unwrap();
        let report = graph_energy(&wg, &NodeFunction::constant(5, 2.0)).unwrap();
        assert_eq!(report.total, 0.0);
        assert!(report.fitted_ratio.is_none());
        assert_eq!(report.classification, Classification::Convergent);
    }

    #[test]
    fn root_indicator_energy_is_pi_of_root() {
        let wg = WeightedGraph::build(5, ConductanceParams::reference()).unwrap();
        let mut u = NodeFunction::zeros(5);
        u.set(&Word::ROOT, 1.0);
        let report = graph_energy(&wg, &u).unwrap();
        assert!((report.total - 3.0).abs() < 1e-12);
        assert!((report.total - direct_energy_oracle(&wg, &u)).abs() < 1e-12);
    }

    #[test]
    fn graph_energy_matches_direct_oracle_on_random_functions() {
        let wg = WeightedGraph::build(5, ConductanceParams::reference()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let values: Vec<f64> =
                (0..wg.graph().node_count()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let u = NodeFunction::from_values(5, values);
            let report = graph_energy(&wg, &u).unwrap();
            let oracle = direct_energy_oracle(&wg, &u);
            assert!((report.total - oracle).abs() < 1e-10 * oracle.max(1.0));
        }
    }

    #[test]
    fn separating_energy_contracts_at_one_over_five_lambda() {
        let report = separating_energy_report(1.0, 1.0, 0.25, 8).unwrap();
        // Propagated levels contract by exactly 1/(5 lambda) = 4/5.
        for n in 3..7usize {
            let ratio = report.horizontal[n + 1] / report.horizontal[n];
            assert!((ratio - 0.8).abs() < 1e-12, "level {n}: {ratio}");
        }
        assert_eq!(report.classification, Classification::Convergent);
        assert!(report.total.is_finite());
        // Vertical lockstep: v_n = 14/(25 C1) h_n on propagated levels.
        for n in 3..7usize {
            let lock = report.vertical[n] / report.horizontal[n];
            assert!((lock - 14.0 / 25.0).abs() < 1e-12, "level {n}: {lock}");
        }
    }

    #[test]
    fn separating_energy_dichotomy_in_lambda() {
        // Divergent below 1/5, critical at 1/5, convergent above.
        let report = separating_energy_report(1.0, 1.0, 0.15, 8).unwrap();
        assert_eq!(report.classification, Classification::Divergent);
        let ratio = report.horizontal[4] / report.horizontal[3];
        assert!((ratio - 1.0 / (5.0 * 0.15)).abs() < 1e-12);

        let report = separating_energy_report(1.0, 1.0, 0.2, 8).unwrap();
        assert_eq!(report.classification, Classification::Critical);

        let report = separating_energy_report(1.0, 1.0, 0.3, 8).unwrap();
        assert_eq!(report.classification, Classification::Convergent);
    }

    #[test]
    fn energy_is_quadratically_homogeneous() {
        let wg = WeightedGraph::build(5, ConductanceParams::reference()).unwrap();
        let sep = build_separating_function(5, &wd("00"), &wd("11")).unwrap();
        let e1 = graph_energy(&wg, &sep.values).unwrap().total;
        let e2 = graph_energy(&wg, &sep.values.scaled(3.0)).unwrap().total;
        assert!((e2 - 9.0 * e1).abs() < 1e-10 * e2);
    }

    #[test]
    fn jump_energy_zero_for_constants_and_quadratic() {
        let quad = JumpQuadrature::new(4).unwrap();
        let exponent = ConductanceParams::alpha() + 2.0;
        let zeros = vec![5.0; quad.cell_count()];
        assert_eq!(quad.energy(&zeros, exponent).unwrap(), 0.0);
        let u = cell_values_of(4, |x, _| x);
        let e1 = quad.energy(&u, exponent).unwrap();
        let doubled: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        let e2 = quad.energy(&doubled, exponent).unwrap();
        assert!((e2 - 4.0 * e1).abs() < 1e-12 * e2);
    }

    #[test]
    fn jump_energy_symmetric_under_dihedral_action() {
        // Reflect the gasket across its vertical symmetry axis: cell values
        // of the reflected coordinate give the same quadrature.
        let quad = JumpQuadrature::new(5).unwrap();
        let exponent = ConductanceParams::alpha() + 2.0;
        let u = cell_values_of(5, |x, _| x);
        let reflected = cell_values_of(5, |x, _| 1.0 - x);
        let e1 = quad.energy(&u, exponent).unwrap();
        let e2 = quad.energy(&reflected, exponent).unwrap();
        assert!((e1 - e2).abs() < 1e-10 * e1);
    }

    #[test]
    fn jump_energy_refinement_converges_below_critical_and_diverges_above() {
        // beta = 2 < beta*: successive refinements form a Cauchy-looking
        // sequence (diffs shrink by at least 2x). beta = 2.5 > beta*: the
        // quadrature grows without bound.
        let alpha = ConductanceParams::alpha();
        let mut below = Vec::new();
        let mut above = Vec::new();
        for level in 4..=7usize {
            let quad = JumpQuadrature::new(level).unwrap();
            let u = cell_values_of(level, |x, _| x);
            below.push(quad.energy(&u, alpha + 2.0).unwrap());
            above.push(quad.energy(&u, alpha + 2.5).unwrap());
        }
        let d1 = (below[1] - below[0]).abs();
        let d2 = (below[2] - below[1]).abs();
        let d3 = (below[3] - below[2]).abs();
        assert!(d2 <= d1 / 2.0, "diffs {d1} {d2}");
        assert!(d3 <= d2 / 2.0, "diffs {d2} {d3}");
        assert!(above[1] > above[0] && above[2] > above[1] && above[3] > above[2]);
        let growth = above[3] / above[2];
        assert!(growth > 1.1, "divergent growth factor {growth}");
    }

    #[test]
    fn naim_ratio_band_is_bounded() {
        let wg = WeightedGraph::build(9, ConductanceParams::reference()).unwrap();
        let family = test_function_family();
        let report = naim_comparability(&wg, 5, &family).unwrap();
        assert_eq!(report.per_function.len(), 10);
        assert!(report.ratio_min > 0.0);
        assert!(report.ratio_max.is_finite());
        assert!(
            report.ratio_max / report.ratio_min <= 100.0,
            "band [{}, {}]",
            report.ratio_min,
            report.ratio_max
        );
    }

    #[test]
    fn naim_ratio_is_scale_invariant() {
        let wg = WeightedGraph::build(7, ConductanceParams::reference()).unwrap();
        let one: &[(&str, fn(f64, f64) -> f64)] = &[("coord_x", |x, _| x)];
        let double: &[(&str, fn(f64, f64) -> f64)] = &[("coord_x2", |x, _| 2.0 * x)];
        let r1 = naim_comparability(&wg, 3, one).unwrap().ratio_min;
        let r2 = naim_comparability(&wg, 3, double).unwrap().ratio_min;
        assert!((r1 - r2).abs() < 1e-9 * r1, "{r1} vs {r2}");
    }

    #[test]
    fn trace_constant_reference_value() {
        // lambda = 1/4, gamma = 1/8: C^2 = max(14*(4/3)/3, 4) = 56/9.
        let c2 = trace_constant(&ConductanceParams::reference());
        assert!((c2 - 56.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn trace_inequality_for_ones() {
        let wg = WeightedGraph::build(8, ConductanceParams::reference()).unwrap();
        let report = trace_inequality_check(&wg, 2, &vec![1.0; 9]).unwrap();
        assert!((report.lhs - 1.0).abs() < 1e-12);
        // RHS = C^2 (0 + m(B_N)) with m(B_N) just under m(X) = 2.
        assert!(report.extension_energy < 1e-8);
        assert!((report.extension_l2m - 2.0).abs() < 0.01);
        assert!(report.slack >= 1.0);
        assert!((report.rhs - 56.0 / 9.0 * report.extension_l2m).abs() < 1e-6);
    }

    #[test]
    fn trace_inequality_random_cell_functions() {
        let wg = WeightedGraph::build(8, ConductanceParams::reference()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..20 {
            let cells: Vec<f64> = (0..81).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let report = trace_inequality_check(&wg, 4, &cells).unwrap();
            assert!(report.slack >= 1.0, "trial {trial}: slack {}", report.slack);
        }
    }

    #[test]
    fn trace_inequality_requires_regular_regime() {
        let params = ConductanceParams::with_lambda(0.15).unwrap();
        let wg = WeightedGraph::build(6, params).unwrap();
        assert!(trace_inequality_check(&wg, 2, &vec![1.0; 9]).is_err());
    }

    #[test]
    fn sphere_pullback_of_constant_is_zero() {
        let wg = WeightedGraph::build(5, ConductanceParams::reference()).unwrap();
        assert_eq!(sphere_pullback_energy(&wg, |_, _| 7.0, 4).unwrap(), 0.0);
    }

    #[test]
    fn sphere_pullback_ratio_for_coordinate_function() {
        // Direct-computation oracle: the coordinate pullback contracts by
        // exactly 1/(4 lambda) per level (corner differences halve, the
        // conductance grows by 1/(3 lambda), triangles triple), which sits
        // above the minimizing-interpolation bound 1/(5 lambda).
        for lambda in [0.15, 0.25] {
            let params = ConductanceParams::with_lambda(lambda).unwrap();
            let wg = WeightedGraph::build(8, params).unwrap();
            let mut prev = None;
            for level in 1..=7usize {
                let e = sphere_pullback_energy(&wg, |x, _| x, level).unwrap();
                if let Some(p) = prev {
                    let ratio: f64 = e / p;
                    assert!(
                        (ratio - 1.0 / (4.0 * lambda)).abs() < 1e-12,
                        "lambda {lambda} level {level}: ratio {ratio}"
                    );
                    assert!(ratio >= 1.0 / (5.0 * lambda) - 1e-12);
                }
                prev = Some(e);
            }
        }
    }

    #[test]
    fn sphere_pullback_lower_bound_over_test_family() {
        // The minimizing interpolation is the energy floor: every pullback
        // contracts no faster than 1/(5 lambda).
        let params = ConductanceParams::reference();
        let wg = WeightedGraph::build(7, params).unwrap();
        for (name, f) in test_function_family() {
            let e5 = sphere_pullback_energy(&wg, f, 5).unwrap();
            let e6 = sphere_pullback_energy(&wg, f, 6).unwrap();
            let floor = 1.0 / (5.0 * params.lambda);
            assert!(
                e6 >= floor * e5 * (1.0 - 1e-9),
                "{name}: ratio {} below floor {floor}",
                e6 / e5
            );
        }
    }

    #[test]
    fn scan_classifies_grid_and_recovers_walk_dimension() {
        let grid = [0.15, 0.18, 0.22, 0.25, 0.30];
        let report = walk_dimension_scan(1.0, 1.0, &grid, 8).unwrap();
        let classes: Vec<Classification> =
            report.points.iter().map(|p| p.classification).collect();
        assert_eq!(
            classes,
            vec![
                Classification::Divergent,
                Classification::Divergent,
                Classification::Convergent,
                Classification::Convergent,
                Classification::Convergent,
            ]
        );
        assert!((report.lambda_hat_ratio - 0.2).abs() < 1e-9);
        let beta_star = 5.0f64.ln() / 2.0f64.ln();
        assert!((report.beta_hat_ratio - beta_star).abs() < 1e-6);
        assert!((report.beta_hat_growth - beta_star).abs() < 0.05);
    }

    #[test]
    fn scan_without_bracket_is_an_error() {
        assert!(matches!(
            walk_dimension_scan(1.0, 1.0, &[0.25, 0.3], 6),
            Err(Error::NoBracket)
        ));
    }

    #[test]
    fn fitted_ratio_ignores_empty_levels() {
        let wg = WeightedGraph::build(6, ConductanceParams::reference()).unwrap();
        let sep = build_separating_function(6, &wd("00"), &wd("11")).unwrap();
        let report = graph_energy(&wg, &sep.values).unwrap();
        assert_eq!(report.horizontal[1], 0.0);
        assert_eq!(report.horizontal[2], 0.0);
        assert!(report.horizontal[3] > 0.0);
        let off = sphere_offset(3);
        assert!(sep.values.values()[off..].iter().any(|v| *v != 0.0));
        assert!(report.fitted_ratio.is_some());
    }
}
