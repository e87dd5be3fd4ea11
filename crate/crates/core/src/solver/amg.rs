//! Smoothed-aggregation algebraic multigrid, applied as one symmetric V-cycle.
//!
//! Setup per level: strength graph `|a_ij| ≥ θ √(a_ii a_jj)`, greedy
//! aggregation, piecewise-constant tentative prolongator with normalized
//! columns, one damped-Jacobi smoothing step of the prolongator
//! `P = (I - ω_p D⁻¹A) T` with `ω_p = 4 / (3 ρ(D⁻¹A))`, and the Galerkin
//! coarse operator `Pᵀ A P`. The V-cycle uses one weighted-Jacobi sweep
//! before and after the coarse correction and a direct solve on the coarsest
//! level.

use super::cholesky::CholeskyFactor;
use crate::error::Result;
use crate::sparse::{norm2, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmgConfig {
    pub strength_threshold: f64,
    /// Levels at or below this size are solved directly.
    pub max_coarse: usize,
    /// Including the finest level; 1 disables coarsening.
    pub max_levels: usize,
    pub jacobi_weight: f64,
    pub power_iterations: usize,
}

impl Default for AmgConfig {
    fn default() -> Self {
        Self {
            strength_threshold: 0.08,
            max_coarse: 64,
            max_levels: 25,
            jacobi_weight: 2.0 / 3.0,
            power_iterations: 10,
        }
    }
}

#[derive(Debug, Clone)]
struct Level {
    a: CsrMatrix,
    inv_diag: Vec<f64>,
    /// Prolongator to this level from the next coarser one.
    p: Option<CsrMatrix>,
    r: Option<CsrMatrix>,
}

#[derive(Debug, Clone)]
enum Coarsest {
    Direct(CholeskyFactor),
    Smooth,
}

#[derive(Debug, Clone)]
pub struct AmgHierarchy {
    levels: Vec<Level>,
    coarsest: Coarsest,
    omega: f64,
}

impl AmgHierarchy {
    pub fn new(a: &CsrMatrix, config: &AmgConfig) -> Result<Self> {
        let mut levels = Vec::new();
        let mut current = a.clone();
        let direct = loop {
            let n = current.n_rows();
            let inv_diag: Vec<f64> = current.diagonal().iter().map(|d| 1.0 / d).collect();
            if config.max_levels <= 1 {
                levels.push(Level { a: current, inv_diag, p: None, r: None });
                break false;
            }
            if n <= config.max_coarse {
                levels.push(Level { a: current, inv_diag, p: None, r: None });
                break true;
            }
            if levels.len() + 1 >= config.max_levels {
                levels.push(Level { a: current, inv_diag, p: None, r: None });
                break false;
            }
            let aggregates = aggregate(&current, config.strength_threshold);
            let n_coarse = aggregates.iter().copied().max().map_or(0, |m| m + 1);
            if n_coarse == 0 || n_coarse >= n {
                log::debug!("AMG: aggregation stalled at {n} unknowns, truncating hierarchy");
                levels.push(Level { a: current, inv_diag, p: None, r: None });
                break true;
            }
            let tentative = tentative_prolongator(&aggregates, n_coarse);
            let rho = spectral_radius_estimate(&current, &inv_diag, config.power_iterations);
            let p = smooth_prolongator(&current, &inv_diag, &tentative, 4.0 / (3.0 * rho));
            let r = p.transpose();
            let coarse = r.matmul(&current.matmul(&p));
            levels.push(Level { a: current, inv_diag, p: Some(p), r: Some(r) });
            current = symmetrize(&coarse);
        };
        let last = levels.last().expect("at least one level");
        let coarsest = if direct { Coarsest::Direct(CholeskyFactor::new(&last.a)?) } else { Coarsest::Smooth };
        Ok(Self { levels, coarsest, omega: config.jacobi_weight })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Sizes of the level operators, finest first.
    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.a.n_rows()).collect()
    }

    /// Operator complexity: total nonzeros over the nonzeros of the finest level.
    pub fn operator_complexity(&self) -> f64 {
        let total: usize = self.levels.iter().map(|l| l.a.nnz()).sum();
        total as f64 / self.levels[0].a.nnz() as f64
    }

    /// One V-cycle for `A z = r` from a zero initial guess.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        let level = &self.levels[l];
        let n = b.len();
        if l + 1 == self.levels.len() {
            match &self.coarsest {
                Coarsest::Direct(f) => {
                    x.copy_from_slice(b);
                    f.solve_in_place(x);
                }
                Coarsest::Smooth => {
                    x.iter_mut().for_each(|v| *v = 0.0);
                    self.jacobi(level, b, x);
                    self.jacobi(level, b, x);
                }
            }
            return;
        }
        x.iter_mut().for_each(|v| *v = 0.0);
        self.jacobi(level, b, x);
        let mut residual = vec![0.0; n];
        level.a.mul_vec_into(x, &mut residual);
        residual.iter_mut().zip(b).for_each(|(r, bi)| *r = bi - *r);
        let restrict = level.r.as_ref().expect("inner level has restriction");
        let coarse_b = restrict.mul_vec(&residual);
        let mut coarse_x = vec![0.0; coarse_b.len()];
        self.cycle(l + 1, &coarse_b, &mut coarse_x);
        let correction = level.p.as_ref().expect("inner level has prolongator").mul_vec(&coarse_x);
        x.iter_mut().zip(&correction).for_each(|(xi, c)| *xi += c);
        self.jacobi(level, b, x);
    }

    fn jacobi(&self, level: &Level, b: &[f64], x: &mut [f64]) {
        let ax = level.a.mul_vec(x);
        for i in 0..x.len() {
            x[i] += self.omega * level.inv_diag[i] * (b[i] - ax[i]);
        }
    }
}

/// Greedy aggregation; returns the aggregate index of every node.
fn aggregate(a: &CsrMatrix, theta: f64) -> Vec<usize> {
    let n = a.n_rows();
    let diag = a.diagonal();
    let strong: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let (cols, vals) = a.row(i);
            cols.iter()
                .zip(vals)
                .filter(|&(&j, &v)| j != i && v.abs() >= theta * (diag[i] * diag[j]).abs().sqrt())
                .map(|(&j, _)| j)
                .collect()
        })
        .collect();
    const NONE: usize = usize::MAX;
    let mut agg = vec![NONE; n];
    let mut count = 0;

    // seed aggregates from nodes whose whole strong neighborhood is free
    for i in 0..n {
        if agg[i] == NONE && strong[i].iter().all(|&j| agg[j] == NONE) {
            agg[i] = count;
            for &j in &strong[i] {
                agg[j] = count;
            }
            count += 1;
        }
    }
    // attach leftovers to a neighboring aggregate
    let snapshot = agg.clone();
    for i in 0..n {
        if agg[i] == NONE {
            if let Some(&j) = strong[i].iter().find(|&&j| snapshot[j] != NONE) {
                agg[i] = snapshot[j];
            }
        }
    }
    // whatever remains forms new aggregates with its free strong neighbors
    for i in 0..n {
        if agg[i] == NONE {
            agg[i] = count;
            for &j in &strong[i] {
                if agg[j] == NONE {
                    agg[j] = count;
                }
            }
            count += 1;
        }
    }
    agg
}

fn tentative_prolongator(aggregates: &[usize], n_coarse: usize) -> CsrMatrix {
    let mut sizes = vec![0usize; n_coarse];
    for &g in aggregates {
        sizes[g] += 1;
    }
    CsrMatrix::from_triplets(
        aggregates.len(),
        n_coarse,
        aggregates.iter().enumerate().map(|(i, &g)| (i, g, 1.0 / (sizes[g] as f64).sqrt())),
    )
}

fn smooth_prolongator(a: &CsrMatrix, inv_diag: &[f64], t: &CsrMatrix, weight: f64) -> CsrMatrix {
    let at = a.matmul(t);
    let n = t.n_rows();
    let triplets = (0..n).flat_map(|i| {
        let (tc, tv) = t.row(i);
        let (ac, av) = at.row(i);
        let s = weight * inv_diag[i];
        tc.iter()
            .zip(tv)
            .map(|(&j, &v)| (i, j, v))
            .chain(ac.iter().zip(av).map(move |(&j, &v)| (i, j, -s * v)))
            .collect::<Vec<_>>()
    });
    CsrMatrix::from_triplets(n, t.n_cols(), triplets)
}

/// Power-iteration estimate of the spectral radius of `D⁻¹A`.
fn spectral_radius_estimate(a: &CsrMatrix, inv_diag: &[f64], iterations: usize) -> f64 {
    let n = a.n_rows();
    // deterministic, non-smooth start vector
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i as f64) * 0.618_033_988_75).fract()).collect();
    let mut rho = 1.0;
    for _ in 0..iterations.max(1) {
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let mut w = a.mul_vec(&v);
        w.iter_mut().zip(inv_diag).for_each(|(x, d)| *x *= d);
        rho = norm2(&w);
        v = w;
    }
    if rho.is_finite() && rho > 0.0 {
        rho
    } else {
        1.0
    }
}

fn symmetrize(a: &CsrMatrix) -> CsrMatrix {
    let t = a.transpose();
    let n = a.n_rows();
    let triplets = (0..n).flat_map(|i| {
        let (c1, v1) = a.row(i);
        let (c2, v2) = t.row(i);
        c1.iter().zip(v1).chain(c2.iter().zip(v2)).map(move |(&j, &v)| (i, j, 0.5 * v)).collect::<Vec<_>>()
    });
    CsrMatrix::from_triplets(n, a.n_cols(), triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, TriMesh};

    fn poisson(r: usize) -> CsrMatrix {
        let mesh = TriMesh::structured(r).unwrap();
        assemble(&mesh, &vec![1.0; mesh.n_nodes()]).unwrap().a
    }

    #[test]
    fn hierarchy_coarsens_to_direct_solve() {
        let a = poisson(32);
        let h = AmgHierarchy::new(&a, &AmgConfig::default()).unwrap();
        let sizes = h.level_sizes();
        assert_eq!(sizes[0], 961);
        assert!(*sizes.last().unwrap() <= 64, "{sizes:?}");
        assert!(sizes.windows(2).all(|w| w[1] < w[0]));
        assert!(h.operator_complexity() < 2.0, "{}", h.operator_complexity());
        assert!(matches!(h.coarsest, Coarsest::Direct(_)));
    }

    #[test]
    fn single_level_is_the_smoother() {
        let a = poisson(12);
        let cfg = AmgConfig { max_levels: 1, ..AmgConfig::default() };
        let h = AmgHierarchy::new(&a, &cfg).unwrap();
        assert_eq!(h.n_levels(), 1);
        let n = a.n_rows();
        let r: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut z = vec![0.0; n];
        h.apply(&r, &mut z);
        // two Jacobi sweeps from zero: z = 2ωD⁻¹r - ω²D⁻¹AD⁻¹r
        let w = 2.0 / 3.0;
        let d = a.diagonal();
        let dr: Vec<f64> = r.iter().zip(&d).map(|(x, d)| x / d).collect();
        let adr = a.mul_vec(&dr);
        for i in 0..n {
            let want = 2.0 * w * dr[i] - w * w * adr[i] / d[i];
            assert!((z[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn small_system_is_solved_directly() {
        let a = poisson(6);
        let h = AmgHierarchy::new(&a, &AmgConfig::default()).unwrap();
        assert_eq!(h.n_levels(), 1);
        let b = vec![1.0; a.n_rows()];
        let mut z = vec![0.0; a.n_rows()];
        h.apply(&b, &mut z);
        let r = a.mul_vec(&z);
        assert!(r.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn aggregates_cover_every_node() {
        let a = poisson(20);
        let agg = aggregate(&a, 0.08);
        let n_coarse = agg.iter().max().unwrap() + 1;
        assert!(agg.iter().all(|&g| g < n_coarse));
        assert!(n_coarse < a.n_rows() / 4);
    }
}
