//! Uniform 1D grids, grid measures, grid functions, and phase-space
//! (position x velocity) grid measures.
//!
//! All continuum functionals in this crate live on these grids. A
//! `GridMeasure` stores a nonnegative density tabulated at cell centers,
//! normalized so that `sum(weights) * h == 1` within 1e-10. Cell-averaged
//! Gaussian constructors go through `erf` so that discretized references
//! are accurate to quadrature order, not sampling order.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MASS_TOL: f64 = 1e-10;

/// Uniform one-dimensional grid with `m >= 3` cell centers spanning `[lo, hi]`.
///
/// Centers sit at `lo + (i + 1/2) h` with `h = (hi - lo) / m`; the cells
/// partition `[lo, hi]` exactly, which keeps mass bookkeeping exact under
/// zero-flux boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1d {
    pub lo: f64,
    pub hi: f64,
    pub m: usize,
}

impl Grid1d {
    pub fn new(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::InvalidDomain(format!(
                "grid bounds [{lo}, {hi}] are not a proper interval"
            )));
        }
        if m < 3 {
            return Err(Error::InvalidDomain(format!("grid needs m >= 3, got {m}")));
        }
        Ok(Grid1d { lo, hi, m })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / self.m as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.h()
    }

    /// Left edge of cell `i`; `edge(m)` is the right boundary.
    #[inline]
    pub fn edge(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.h()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.center(i)).collect()
    }

    /// Cell index containing `x`, or None when `x` falls outside `[lo, hi)`.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        let i = ((x - self.lo) / self.h()) as usize;
        Some(i.min(self.m - 1))
    }
}

/// Nonnegative normalized density on a `Grid1d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub grid: Grid1d,
    pub weights: Vec<f64>,
}

impl GridMeasure {
    /// Wraps raw density values, renormalizing total mass to one.
    pub fn from_weights(grid: Grid1d, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.m {
            return Err(Error::Grid(format!(
                "expected {} weights, got {}",
                grid.m,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Numerical(
                "grid measure weights must be finite and nonnegative".into(),
            ));
        }
        let mass: f64 = weights.iter().sum::<f64>() * grid.h();
        if mass <= 0.0 {
            return Err(Error::Numerical("grid measure has zero total mass".into()));
        }
        for w in weights.iter_mut() {
            *w /= mass;
        }
        Ok(GridMeasure { grid, weights })
    }

    /// Tabulates `density` at cell centers and normalizes.
    pub fn from_density(grid: Grid1d, density: impl Fn(f64) -> f64) -> Result<Self> {
        let w: Vec<f64> = (0..grid.m).map(|i| density(grid.center(i))).collect();
        GridMeasure::from_weights(grid, w)
    }

    /// Cell-averaged Gaussian `N(mean, sd^2)`, renormalized onto the grid.
    pub fn gaussian(grid: Grid1d, mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0) {
            return Err(Error::InvalidDomain(format!("gaussian sd must be > 0, got {sd}")));
        }
        let h = grid.h();
        let w: Vec<f64> = (0..grid.m)
            .map(|i| {
                let a = (grid.edge(i) - mean) / sd;
                let b = (grid.edge(i + 1) - mean) / sd;
                let cell = (std_normal_cdf(b) - std_normal_cdf(a)) / h;
                if cell > 0.0 {
                    cell
                } else {
                    // far-tail CDF differences cancel to zero; keep the
                    // density strictly positive while the pdf still is
                    std_normal_pdf((grid.center(i) - mean) / sd) / sd
                }
            })
            .collect();
        GridMeasure::from_weights(grid, w)
    }

    pub fn uniform(grid: Grid1d) -> Self {
        let w = vec![1.0 / (grid.hi - grid.lo); grid.m];
        GridMeasure { grid, weights: w }
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() * self.h()
    }

    pub fn is_normalized(&self) -> bool {
        (self.mass() - 1.0).abs() <= MASS_TOL
    }

    pub fn mean(&self) -> f64 {
        let h = self.h();
        (0..self.grid.m)
            .map(|i| self.grid.center(i) * self.weights[i])
            .sum::<f64>()
            * h
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let h = self.h();
        (0..self.grid.m)
            .map(|i| {
                let d = self.grid.center(i) - m;
                d * d * self.weights[i]
            })
            .sum::<f64>()
            * h
    }

    /// Expectation of `f` at cell centers.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let h = self.h();
        (0..self.grid.m)
            .map(|i| f(self.grid.center(i)) * self.weights[i])
            .sum::<f64>()
            * h
    }

    /// CDF values at the `m + 1` cell edges (piecewise linear in between).
    pub fn cdf_edges(&self) -> Vec<f64> {
        let h = self.h();
        let mut cdf = Vec::with_capacity(self.grid.m + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in &self.weights {
            acc += w * h;
            cdf.push(acc);
        }
        // guard against rounding drift at the top
        let top = *cdf.last().unwrap();
        if top > 0.0 {
            for c in cdf.iter_mut() {
                *c /= top;
            }
        }
        cdf
    }

    /// Inverse CDF by linear interpolation over cells.
    pub fn quantile_from_cdf(&self, cdf: &[f64], q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        // binary search for the first edge with cdf >= q
        let mut lo = 0usize;
        let mut hi = cdf.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if cdf[mid] < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c0 = cdf[lo];
        let c1 = cdf[hi];
        let x0 = self.grid.edge(lo);
        if c1 > c0 {
            x0 + (q - c0) / (c1 - c0) * self.h()
        } else {
            x0
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,density\n");
        for i in 0..self.grid.m {
            s.push_str(&format!(
                "{:.16e},{:.16e}\n",
                self.grid.center(i),
                self.weights[i]
            ));
        }
        s
    }
}

/// Real-valued function tabulated on a `Grid1d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: Grid1d,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid1d, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.m {
            return Err(Error::Grid(format!(
                "expected {} values, got {}",
                grid.m,
                values.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zero(grid: Grid1d) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.m],
        }
    }

    pub fn from_fn(grid: Grid1d, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.m).map(|i| f(grid.center(i))).collect();
        GridFunction { grid, values }
    }

    /// Central-difference spatial derivative, one-sided at the ends.
    pub fn derivative(&self) -> GridFunction {
        let m = self.grid.m;
        let h = self.grid.h();
        let v = &self.values;
        let mut d = vec![0.0; m];
        d[0] = (v[1] - v[0]) / h;
        d[m - 1] = (v[m - 1] - v[m - 2]) / h;
        for i in 1..m - 1 {
            d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
        }
        GridFunction {
            grid: self.grid,
            values: d,
        }
    }

    /// Mean of the function under `mu` (common-grid check included).
    pub fn mean_under(&self, mu: &GridMeasure) -> Result<f64> {
        same_grid(&self.grid, &mu.grid)?;
        let h = mu.h();
        Ok((0..self.grid.m)
            .map(|i| self.values[i] * mu.weights[i])
            .sum::<f64>()
            * h)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,value\n");
        for i in 0..self.grid.m {
            s.push_str(&format!(
                "{:.16e},{:.16e}\n",
                self.grid.center(i),
                self.values[i]
            ));
        }
        s
    }
}

pub fn same_grid(a: &Grid1d, b: &Grid1d) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Grid(format!("grids differ: {a:?} vs {b:?}")))
    }
}

/// Nonnegative normalized density on a position x velocity grid.
///
/// Weights are stored row-major with position outermost:
/// `weights[ix * v_grid.m + iv]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGridMeasure {
    pub x_grid: Grid1d,
    pub v_grid: Grid1d,
    pub weights: Vec<f64>,
}

impl PhaseGridMeasure {
    pub fn from_weights(x_grid: Grid1d, v_grid: Grid1d, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != x_grid.m * v_grid.m {
            return Err(Error::Grid(format!(
                "expected {} weights, got {}",
                x_grid.m * v_grid.m,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Numerical(
                "phase measure weights must be finite and nonnegative".into(),
            ));
        }
        let cell = x_grid.h() * v_grid.h();
        let mass: f64 = weights.iter().sum::<f64>() * cell;
        if mass <= 0.0 {
            return Err(Error::Numerical("phase measure has zero total mass".into()));
        }
        for w in weights.iter_mut() {
            *w /= mass;
        }
        Ok(PhaseGridMeasure {
            x_grid,
            v_grid,
            weights,
        })
    }

    /// Product measure `mu_x (x) mu_v`.
    pub fn product(mu_x: &GridMeasure, mu_v: &GridMeasure) -> Self {
        let mut w = Vec::with_capacity(mu_x.grid.m * mu_v.grid.m);
        for wx in &mu_x.weights {
            for wv in &mu_v.weights {
                w.push(wx * wv);
            }
        }
        PhaseGridMeasure {
            x_grid: mu_x.grid,
            v_grid: mu_v.grid,
            weights: w,
        }
    }

    #[inline]
    pub fn idx(&self, ix: usize, iv: usize) -> usize {
        ix * self.v_grid.m + iv
    }

    pub fn cell(&self) -> f64 {
        self.x_grid.h() * self.v_grid.h()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() * self.cell()
    }

    pub fn is_normalized(&self) -> bool {
        (self.mass() - 1.0).abs() <= MASS_TOL
    }

    pub fn x_marginal(&self) -> GridMeasure {
        let hv = self.v_grid.h();
        let w: Vec<f64> = (0..self.x_grid.m)
            .map(|ix| {
                (0..self.v_grid.m)
                    .map(|iv| self.weights[self.idx(ix, iv)])
                    .sum::<f64>()
                    * hv
            })
            .collect();
        GridMeasure {
            grid: self.x_grid,
            weights: w,
        }
    }

    pub fn v_marginal(&self) -> GridMeasure {
        let hx = self.x_grid.h();
        let mut w = vec![0.0; self.v_grid.m];
        for ix in 0..self.x_grid.m {
            for iv in 0..self.v_grid.m {
                w[iv] += self.weights[self.idx(ix, iv)];
            }
        }
        for wi in w.iter_mut() {
            *wi *= hx;
        }
        GridMeasure {
            grid: self.v_grid,
            weights: w,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,v,density\n");
        for ix in 0..self.x_grid.m {
            for iv in 0..self.v_grid.m {
                s.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e}\n",
                    self.x_grid.center(ix),
                    self.v_grid.center(iv),
                    self.weights[self.idx(ix, iv)]
                ));
            }
        }
        s
    }
}

/// `erf` by Cody's rational approximations (double-precision accurate).
pub fn erf(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        const A: [f64; 5] = [
            3.16112374387056560e0,
            1.13864154151050156e2,
            3.77485237685302021e2,
            3.20937758913846947e3,
            1.85777706184603153e-1,
        ];
        const B: [f64; 4] = [
            2.36012909523441209e1,
            2.44024637934444173e2,
            1.28261652607737228e3,
            2.84423683343917062e3,
        ];
        let z = y * y;
        let mut num = A[4] * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + A[i]) * z;
            den = (den + B[i]) * z;
        }
        x * (num + A[3]) / (den + B[3])
    } else {
        let e = erfc_positive(y);
        if x >= 0.0 {
            1.0 - e
        } else {
            e - 1.0
        }
    }
}

pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        if x <= 0.46875 {
            1.0 - erf(x)
        } else {
            erfc_positive(x)
        }
    } else {
        2.0 - erfc(-x)
    }
}

fn erfc_positive(y: f64) -> f64 {
    debug_assert!(y > 0.46875);
    if y <= 4.0 {
        const C: [f64; 9] = [
            5.64188496988670089e-1,
            8.88314979438837594e0,
            6.61191906371416295e1,
            2.98635138197400131e2,
            8.81952221241769090e2,
            1.71204761263407058e3,
            2.05107837782607147e3,
            1.23033935479799725e3,
            2.15311535474403846e-8,
        ];
        const D: [f64; 8] = [
            1.57449261107098347e1,
            1.17693950891312499e2,
            5.37181101862009858e2,
            1.62138957456669019e3,
            3.29079923573345963e3,
            4.36261909014324716e3,
            3.43936767414372164e3,
            1.23033935480374942e3,
        ];
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        (-y * y).exp() * (num + C[7]) / (den + D[7])
    } else {
        const P: [f64; 6] = [
            3.05326634961232344e-1,
            3.60344899949804439e-1,
            1.25781726111229246e-1,
            1.60837851487422766e-2,
            6.58749161529837803e-4,
            1.63153871373020978e-2,
        ];
        const Q: [f64; 5] = [
            2.56852019228982242e0,
            1.87295284992346047e0,
            5.27905102951428412e-1,
            6.05183413124413191e-2,
            2.33520497626869185e-3,
        ];
        const SQRPI: f64 = 5.6418958354775628695e-1;
        if y >= 26.6 {
            return 0.0;
        }
        let z = 1.0 / (y * y);
        let mut num = P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + P[i]) * z;
            den = (den + Q[i]) * z;
        }
        let r = z * (num + P[4]) / (den + Q[4]);
        (-y * y).exp() * (SQRPI - r) / y
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn erf_reference_values() {
        assert_relative_eq!(erf(0.5), 0.5204998778130465, max_relative = 1e-14);
        assert_relative_eq!(erf(1.0), 0.8427007929497149, max_relative = 1e-14);
        assert_relative_eq!(erf(2.0), 0.9953222650189527, max_relative = 1e-14);
        assert_relative_eq!(erf(-1.0), -0.8427007929497149, max_relative = 1e-14);
        assert_relative_eq!(erfc(3.0), 2.209049699858544e-5, max_relative = 1e-12);
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert_relative_eq!(std_normal_cdf(1.96), 0.9750021048517795, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_grid_measure_moments() {
        let grid = Grid1d::new(-8.0, 8.0, 801).unwrap();
        let mu = GridMeasure::gaussian(grid, 1.0, 1.0).unwrap();
        assert!(mu.is_normalized());
        assert_relative_eq!(mu.mean(), 1.0, epsilon = 1e-8);
        assert_relative_eq!(mu.variance(), 1.0, epsilon = 1e-4);
    }

    #[test]
    fn quantiles_invert_cdf() {
        let grid = Grid1d::new(-8.0, 8.0, 801).unwrap();
        let mu = GridMeasure::gaussian(grid, 0.0, 1.0).unwrap();
        let cdf = mu.cdf_edges();
        let med = mu.quantile_from_cdf(&cdf, 0.5);
        assert!(med.abs() < 1e-6);
        let q84 = mu.quantile_from_cdf(&cdf, std_normal_cdf(1.0));
        assert!((q84 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn phase_marginals_are_normalized() {
        let gx = Grid1d::new(-4.0, 4.0, 81).unwrap();
        let gv = Grid1d::new(-5.0, 5.0, 101).unwrap();
        let mx = GridMeasure::gaussian(gx, 0.5, 0.8).unwrap();
        let mv = GridMeasure::gaussian(gv, 0.0, 1.0).unwrap();
        let q = PhaseGridMeasure::product(&mx, &mv);
        assert!(q.is_normalized());
        let qx = q.x_marginal();
        let qv = q.v_marginal();
        assert!(qx.is_normalized());
        assert!(qv.is_normalized());
        assert_relative_eq!(qx.mean(), 0.5, epsilon = 1e-4);
        // coarse grid: discretization shifts the second moment by ~h^2/12
        assert_relative_eq!(qv.variance(), 1.0, epsilon = 2e-3);
    }
}
