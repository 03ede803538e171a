//! Divergences, transport distances, spectral gaps, and the entropy
//! identities on grid measures.
//!
//! Relative entropy and Fisher information return a tagged extended real:
//! `+inf` is a signal value, never a floating-point infinity leaking into
//! arithmetic. Wasserstein distances come in three shapes: order statistics
//! for equal-size samples, quantile coupling on 4096 nodes for grid
//! measures, and an exact assignment solver for small point clouds in any
//! dimension.

use crate::error::{Error, Result};
use crate::grid::{same_grid, Grid1d, GridFunction, GridMeasure, PhaseGridMeasure};
use crate::rng::pairwise_sum;
use serde::{Deserialize, Serialize};

/// Number of quantile nodes used by grid-mode Wasserstein distances.
pub const QUANTILE_NODES: usize = 4096;

/// Extended real used by divergences: finite or a tagged plus infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// Finite value, or an error naming the caller.
    pub fn finite(&self, what: &str) -> Result<f64> {
        match self {
            ExtReal::Finite(v) => Ok(*v),
            ExtReal::PosInf => Err(Error::Numerical(format!("{what} is +inf"))),
        }
    }

    pub fn unwrap_or_inf(&self) -> f64 {
        match self {
            ExtReal::Finite(v) => *v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }
}

/// Normalized histogram of 1D samples with optional Gaussian smoothing;
/// the second return value is the escaped mass fraction (mass outside the
/// grid is reported, and more than 0.1% of it is an error).
pub fn histogram_density(
    samples: &[f64],
    grid: Grid1d,
    bandwidth: f64,
) -> Result<(GridMeasure, f64)> {
    if samples.is_empty() {
        return Err(Error::InvalidDomain("empty sample list".into()));
    }
    let mut counts = vec![0.0; grid.m];
    let mut inside = 0usize;
    for &s in samples {
        if let Some(i) = grid.locate(s) {
            counts[i] += 1.0;
            inside += 1;
        } else if s == grid.hi {
            counts[grid.m - 1] += 1.0;
            inside += 1;
        }
    }
    let escaped = 1.0 - inside as f64 / samples.len() as f64;
    if escaped > 1e-3 {
        return Err(Error::Coverage {
            escaped,
            allowed: 1e-3,
        });
    }
    if bandwidth > 0.0 {
        counts = gaussian_smooth(&counts, grid.h(), bandwidth);
    }
    Ok((GridMeasure::from_weights(grid, counts)?, escaped))
}

fn gaussian_smooth(w: &[f64], h: f64, bandwidth: f64) -> Vec<f64> {
    let half = ((4.0 * bandwidth / h).ceil() as usize).max(1);
    let kernel: Vec<f64> = (0..=2 * half)
        .map(|j| {
            let x = (j as f64 - half as f64) * h / bandwidth;
            (-0.5 * x * x).exp()
        })
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let m = w.len();
    let mut out = vec![0.0; m];
    for i in 0..m {
        if w[i] == 0.0 {
            continue;
        }
        for (j, kv) in kernel.iter().enumerate() {
            let target = i as i64 + j as i64 - half as i64;
            // reflect at the boundary so smoothing conserves mass
            let t = if target < 0 {
                (-target - 1) as usize
            } else if target >= m as i64 {
                2 * m - 1 - target as usize
            } else {
                target as usize
            };
            out[t.min(m - 1)] += w[i] * kv / ksum;
        }
    }
    out
}

/// `H[nu | mu] = sum nu_i log(nu_i / mu_i) h`, with `0 log 0 = 0`;
/// `PosInf` when `nu` charges a cell where `mu` vanishes.
pub fn relative_entropy(nu: &GridMeasure, mu: &GridMeasure) -> Result<ExtReal> {
    same_grid(&nu.grid, &mu.grid)?;
    let h = nu.h();
    let mut acc = 0.0;
    for i in 0..nu.grid.m {
        let (p, q) = (nu.weights[i], mu.weights[i]);
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Ok(ExtReal::PosInf);
        }
        acc += p * (p / q).ln();
    }
    Ok(ExtReal::Finite(acc * h))
}

/// Fisher-Donsker-Varadhan information
/// `I[nu | mu] = (1/4) int |grad log(d nu / d mu)|^2 d nu`,
/// central differences on the log ratio, one-sided at the support boundary.
pub fn fisher_information(nu: &GridMeasure, mu: &GridMeasure) -> Result<ExtReal> {
    same_grid(&nu.grid, &mu.grid)?;
    let m = nu.grid.m;
    let h = nu.h();
    // support of nu as the maximal index range with positive mass
    let lo = match nu.weights.iter().position(|w| *w > 0.0) {
        Some(i) => i,
        None => return Ok(ExtReal::Finite(0.0)),
    };
    let hi = nu.weights.iter().rposition(|w| *w > 0.0).unwrap();
    if hi - lo < 2 {
        return Ok(ExtReal::Finite(0.0));
    }
    let mut log_ratio = vec![0.0; m];
    for i in lo..=hi {
        let (p, q) = (nu.weights[i], mu.weights[i]);
        if p > 0.0 && q == 0.0 {
            return Ok(ExtReal::PosInf);
        }
        if p > 0.0 {
            log_ratio[i] = (p / q).ln();
        }
    }
    // interior zero-mass cells make the log ratio undefined there; treat the
    // support as the contiguous hull and interpolate through holes
    for i in lo + 1..hi {
        if nu.weights[i] == 0.0 {
            log_ratio[i] = 0.5 * (log_ratio[i - 1] + log_ratio[i + 1]);
        }
    }
    let mut acc = 0.0;
    for i in lo..=hi {
        let slope = if i == lo {
            (log_ratio[i + 1] - log_ratio[i]) / h
        } else if i == hi {
            (log_ratio[i] - log_ratio[i - 1]) / h
        } else {
            (log_ratio[i + 1] - log_ratio[i - 1]) / (2.0 * h)
        };
        acc += nu.weights[i] * slope * slope;
    }
    Ok(ExtReal::Finite(0.25 * acc * h))
}

/// W2 between two equal-size samples: root mean square difference of order
/// statistics (exact in 1D).
pub fn wasserstein2_1d_samples(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Arity(format!(
            "sample-mode W2 needs equal nonempty sample counts, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let sq: Vec<f64> = sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| (x - y) * (x - y))
        .collect();
    Ok((pairwise_sum(&sq) / a.len() as f64).sqrt())
}

/// W2 between two grid measures by quantile coupling on
/// [`QUANTILE_NODES`] midpoint nodes (piecewise-linear inverse CDFs).
pub fn wasserstein2_1d_grid(a: &GridMeasure, b: &GridMeasure) -> f64 {
    let cdf_a = a.cdf_edges();
    let cdf_b = b.cdf_edges();
    let n = QUANTILE_NODES;
    let sq: Vec<f64> = (0..n)
        .map(|i| {
            let q = (i as f64 + 0.5) / n as f64;
            let d = a.quantile_from_cdf(&cdf_a, q) - b.quantile_from_cdf(&cdf_b, q);
            d * d
        })
        .collect();
    (pairwise_sum(&sq) / n as f64).sqrt()
}

/// W1 between two grid measures: exact area between piecewise-linear CDFs
/// on a common grid.
pub fn wasserstein1_1d_grid(a: &GridMeasure, b: &GridMeasure) -> Result<f64> {
    same_grid(&a.grid, &b.grid)?;
    let h = a.h();
    let mut acc = 0.0;
    let mut ca = 0.0;
    let mut cb = 0.0;
    for i in 0..a.grid.m - 1 {
        ca += a.weights[i] * h;
        cb += b.weights[i] * h;
        acc += (ca - cb).abs();
    }
    Ok(acc * h)
}

/// W2 between a sample cloud and a grid measure: each sorted sample is an
/// atom at its midpoint quantile of the grid inverse CDF.
pub fn wasserstein2_1d_samples_vs_grid(samples: &[f64], mu: &GridMeasure) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Arity("empty sample list".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let cdf = mu.cdf_edges();
    let n = s.len();
    let sq: Vec<f64> = (0..n)
        .map(|i| {
            let q = (i as f64 + 0.5) / n as f64;
            let d = s[i] - mu.quantile_from_cdf(&cdf, q);
            d * d
        })
        .collect();
    Ok((pairwise_sum(&sq) / n as f64).sqrt())
}

/// Exact W2 between two equal-size point clouds in any dimension via an
/// optimal assignment over squared Euclidean cost.
pub fn wasserstein2_assignment(
    a: &[f64],
    b: &[f64],
    n: usize,
    d: usize,
) -> Result<f64> {
    if a.len() != n * d || b.len() != n * d {
        return Err(Error::Arity(format!(
            "clouds must both be n x d = {} values, got {} and {}",
            n * d,
            a.len(),
            b.len()
        )));
    }
    if n == 0 {
        return Err(Error::Arity("empty cloud".into()));
    }
    if n > 256 {
        return Err(Error::ComplexityRefusal(format!(
            "exact assignment limited to n <= 256, got {n}"
        )));
    }
    let cost = |i: usize, j: usize| -> f64 {
        let mut acc = 0.0;
        for c in 0..d {
            let diff = a[i * d + c] - b[j * d + c];
            acc += diff * diff;
        }
        acc
    };
    let total = hungarian_min_cost(n, &cost);
    Ok((total / n as f64).sqrt())
}

/// O(n^3) Jonker-Volgenant style shortest augmenting path assignment.
fn hungarian_min_cost(n: usize, cost: &impl Fn(usize, usize) -> f64) -> f64 {
    const INF: f64 = f64::INFINITY;
    // potentials and matching; 1-based virtual row 0 as in the classic scheme
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j]: row matched to column j

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
    (1..=n).map(|j| cost(p[j] - 1, j - 1)).sum()
}

/// Smallest nonzero eigenvalue of the Dirichlet form
/// `E_mu(g) = int |grad g|^2 d mu` against `L^2(mu)` with Neumann ends
/// (the Poincare constant of `mu` on the grid).
pub fn spectral_gap_1d(mu: &GridMeasure) -> Result<f64> {
    let m = mu.grid.m;
    let h = mu.grid.h();
    if mu.weights.iter().take(m).any(|w| *w <= 0.0) {
        return Err(Error::Numerical(
            "spectral gap needs strictly positive weights on the grid".into(),
        ));
    }
    // stiffness A (tridiagonal, face-averaged weights) and mass M (diagonal)
    let face: Vec<f64> = (0..m - 1)
        .map(|i| 0.5 * (mu.weights[i] + mu.weights[i + 1]))
        .collect();
    // generalized problem A g = lambda M g with
    //   A_ii = (face[i-1] + face[i]) / h^2 * h, offdiag -face[i]/h^2 * h
    //   M_ii = mu_i * h
    // fold into the symmetric tridiagonal B = M^{-1/2} A M^{-1/2}
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m - 1];
    for i in 0..m {
        let left = if i > 0 { face[i - 1] } else { 0.0 };
        let right = if i < m - 1 { face[i] } else { 0.0 };
        diag[i] = (left + right) / (h * h * mu.weights[i]);
    }
    for i in 0..m - 1 {
        off[i] = -face[i] / (h * h * (mu.weights[i] * mu.weights[i + 1]).sqrt());
    }
    // second-smallest eigenvalue by Sturm bisection (the smallest is ~0)
    let lam = tridiag_eigenvalue(&diag, &off, 1);
    if !lam.is_finite() {
        return Err(Error::Numerical("eigenvalue iteration failed".into()));
    }
    Ok(lam)
}

/// k-th smallest eigenvalue (0-based) of a symmetric tridiagonal matrix by
/// Sturm-sequence bisection.
fn tridiag_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    let n = diag.len();
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = (if i > 0 { off[i - 1].abs() } else { 0.0 })
            + (if i < n - 1 { off[i].abs() } else { 0.0 });
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    // count of eigenvalues strictly below x
    let count_below = |x: f64| -> usize {
        let mut count = 0usize;
        let mut q = diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let denom = if q.abs() < 1e-300 {
                1e-300_f64.copysign(if q == 0.0 { 1.0 } else { q })
            } else {
                q
            };
            q = diag[i] - x - off[i - 1] * off[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let mut a = lo;
    let mut b = hi;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if count_below(mid) > k {
            b = mid;
        } else {
            a = mid;
        }
        if b - a <= 1e-13 * (1.0 + b.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

/// `H[nu | mu_U]` and the Boltzmann triple
/// `(H[nu | mu], int U d nu, log int e^{-U} d mu)` with `mu_U ~ e^{-U} mu`;
/// the identity `lhs = sum(rhs)` is the caller's assertion.
pub fn boltzmann_decompose(
    nu: &GridMeasure,
    mu: &GridMeasure,
    u: &GridFunction,
) -> Result<(f64, [f64; 3])> {
    same_grid(&nu.grid, &mu.grid)?;
    same_grid(&nu.grid, &u.grid)?;
    let h = nu.h();
    // mu_U with a max-shift guard before exponentiation
    let shift = u
        .values
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let weights: Vec<f64> = (0..nu.grid.m)
        .map(|i| (-(u.values[i] - shift)).exp() * mu.weights[i])
        .collect();
    let raw_mass: f64 = weights.iter().sum::<f64>() * h;
    if raw_mass <= 0.0 {
        return Err(Error::Numerical("e^{-U} mu has zero mass on the grid".into()));
    }
    let log_partition = raw_mass.ln() - shift;
    let mu_u = GridMeasure::from_weights(nu.grid, weights)?;
    let lhs = relative_entropy(nu, &mu_u)?.finite("H[nu|mu_U]")?;
    let h_nm = relative_entropy(nu, mu)?.finite("H[nu|mu]")?;
    let int_u = u.mean_under(nu)?;
    Ok((lhs, [h_nm, int_u, log_partition]))
}

/// Joint relative entropy `H[Q | alpha1 (x) alpha2]` and the marginal sum
/// `H[Q1 | alpha1] + H[Q2 | alpha2]`; the caller asserts joint >= sum.
pub fn tensorization_gap(
    q: &PhaseGridMeasure,
    alpha1: &GridMeasure,
    alpha2: &GridMeasure,
) -> Result<(f64, f64)> {
    same_grid(&q.x_grid, &alpha1.grid)?;
    same_grid(&q.v_grid, &alpha2.grid)?;
    let cell = q.cell();
    let mut joint = 0.0;
    for ix in 0..q.x_grid.m {
        for iv in 0..q.v_grid.m {
            let p = q.weights[q.idx(ix, iv)];
            if p == 0.0 {
                continue;
            }
            let r = alpha1.weights[ix] * alpha2.weights[iv];
            if r == 0.0 {
                return Err(Error::Numerical(
                    "joint charges a cell where the product reference vanishes".into(),
                ));
            }
            joint += p * (p / r).ln();
        }
    }
    joint *= cell;
    let m1 = relative_entropy(&q.x_marginal(), alpha1)?.finite("H[Q1|alpha1]")?;
    let m2 = relative_entropy(&q.v_marginal(), alpha2)?.finite("H[Q2|alpha2]")?;
    Ok((joint, m1 + m2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::std_normal_cdf;
    use crate::rng::NoiseStreams;
    use approx::assert_relative_eq;

    fn grid801() -> Grid1d {
        Grid1d::new(-8.0, 8.0, 801).unwrap()
    }

    #[test]
    fn relative_entropy_examples() {
        let g = grid801();
        let mu = GridMeasure::gaussian(g, 0.0, 1.0).unwrap();
        let nu = GridMeasure::gaussian(g, 1.0, 1.0).unwrap();
        assert_eq!(
            relative_entropy(&mu, &mu).unwrap(),
            ExtReal::Finite(0.0)
        );
        let kl = relative_entropy(&nu, &mu).unwrap().finite("kl").unwrap();
        assert_relative_eq!(kl, 0.5, epsilon = 1e-3);

        // absolute-continuity failure
        let mut w = vec![0.0; g.m];
        w[10] = 1.0;
        let spike = GridMeasure::from_weights(g, w).unwrap();
        let mut w2 = vec![0.0; g.m];
        w2[500] = 1.0;
        let other = GridMeasure::from_weights(g, w2).unwrap();
        assert_eq!(relative_entropy(&spike, &other).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn fisher_information_examples() {
        let g = grid801();
        let mu = GridMeasure::gaussian(g, 0.0, 1.0).unwrap();
        let nu = GridMeasure::gaussian(g, 1.0, 1.0).unwrap();
        assert_eq!(fisher_information(&mu, &mu).unwrap(), ExtReal::Finite(0.0));
        let fi = fisher_information(&nu, &mu).unwrap().finite("fi").unwrap();
        assert_relative_eq!(fi, 0.25, epsilon = 1e-3);
    }

    #[test]
    fn fisher_refinement_is_second_order() {
        let coarse = Grid1d::new(-8.0, 8.0, 401).unwrap();
        let fine = Grid1d::new(-8.0, 8.0, 801).unwrap();
        let f = |g: Grid1d| {
            let mu = GridMeasure::gaussian(g, 0.0, 1.0).unwrap();
            let nu = GridMeasure::from_density(g, |x| (-0.5 * (x - 0.7) * (x - 0.7) / 0.64).exp())
                .unwrap();
            fisher_information(&nu, &mu).unwrap().finite("fi").unwrap()
        };
        let (fc, ff) = (f(coarse), f(fine));
        // both near the closed form; refinement moves the value by O(h^2)
        assert!((fc - ff).abs() < 4e-4, "coarse {fc} fine {ff}");
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein2_1d_samples(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_relative_eq!(
            wasserstein2_1d_samples(&[0.0, 2.0], &[1.0, 3.0]).unwrap(),
            1.0
        );
        assert_relative_eq!(
            wasserstein2_1d_samples(&[0.0, 0.0], &[-1.0, 1.0]).unwrap(),
            1.0
        );
        assert!(wasserstein2_1d_samples(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn grid_wasserstein_gaussian_shift() {
        let g = grid801();
        let a = GridMeasure::gaussian(g, 0.0, 1.0).unwrap();
        let b = GridMeasure::gaussian(g, 1.0, 1.0).unwrap();
        assert_relative_eq!(wasserstein2_1d_grid(&a, &b), 1.0, epsilon = 2e-3);
        assert!(wasserstein2_1d_grid(&a, &a) < 1e-12);
    }

    #[test]
    fn assignment_matches_sort_in_1d() {
        let streams = NoiseStreams::new(3, 3);
        let mut a = vec![0.0; 40];
        let mut b = vec![0.0; 40];
        streams.fill_standard_normals(0, 0, &mut a);
        streams.fill_standard_normals(1, 0, &mut b);
        let exact = wasserstein2_assignment(&a, &b, 40, 1).unwrap();
        let sorted = wasserstein2_1d_samples(&a, &b).unwrap();
        assert_relative_eq!(exact, sorted, epsilon = 1e-10);
    }

    #[test]
    fn assignment_two_point_swap_geometry() {
        // a = {(0,0), (1,0)}, b = {(1,1), (0,1)}: crossing beats identity
        let a = [0.0, 0.0, 1.0, 0.0];
        let b = [1.0, 1.0, 0.0, 1.0];
        let cost = |p: &[f64], q: &[f64]| -> f64 {
            (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
        };
        let identity = cost(&a[0..2], &b[0..2]) + cost(&a[2..4], &b[2..4]);
        let crossing = cost(&a[0..2], &b[2..4]) + cost(&a[2..4], &b[0..2]);
        let hand = (identity.min(crossing) / 2.0).sqrt();
        let w = wasserstein2_assignment(&a, &b, 2, 2).unwrap();
        assert_relative_eq!(w, hand, epsilon = 1e-12);
        assert!(crossing < identity, "geometry must force the swap");
        assert_eq!(wasserstein2_assignment(&a, &a, 2, 2).unwrap(), 0.0);
    }

    #[test]
    fn assignment_refuses_large_n() {
        let a = vec![0.0; 300];
        assert!(matches!(
            wasserstein2_assignment(&a, &a, 300, 1),
            Err(Error::ComplexityRefusal(_))
        ));
    }

    #[test]
    fn spectral_gap_oracles() {
        let g = grid801();
        let std = GridMeasure::gaussian(g, 0.0, 1.0).unwrap();
        let gap = spectral_gap_1d(&std).unwrap();
        assert_relative_eq!(gap, 1.0, max_relative = 0.02);

        let narrow = GridMeasure::gaussian(g, 0.0, 0.5).unwrap();
        assert_relative_eq!(spectral_gap_1d(&narrow).unwrap(), 4.0, max_relative = 0.02);

        let wide = GridMeasure::gaussian(g, 0.0, 1.6).unwrap();
        assert_relative_eq!(
            spectral_gap_1d(&wide).unwrap(),
            1.0 / (1.6 * 1.6),
            max_relative = 0.02
        );
    }

    #[test]
    fn spectral_gap_double_well_below_single_wells() {
        // [-4, 4] keeps the double-well density above the f64 underflow line
        let g = Grid1d::new(-4.0, 4.0, 401).unwrap();
        let dw = GridMeasure::from_density(g, |x| {
            (-(0.25 * x.powi(4) - 0.5 * x * x)).exp()
        })
        .unwrap();
        let gap_dw = spectral_gap_1d(&dw).unwrap();
        assert!(gap_dw > 0.0);
        // single wells centered at the two minima x = +-1, curvature V'' = 2
        let well = GridMeasure::from_density(g, |x| (-((x - 1.0) * (x - 1.0))).exp()).unwrap();
        let gap_well = spectral_gap_1d(&well).unwrap();
        assert!(
            gap_dw < gap_well,
            "double well {gap_dw} should relax slower than single well {gap_well}"
        );
    }

    #[test]
    fn spectral_gap_refinement_stability() {
        let coarse = Grid1d::new(-8.0, 8.0, 401).unwrap();
        let fine = Grid1d::new(-8.0, 8.0, 801).unwrap();
        let a = spectral_gap_1d(&GridMeasure::gaussian(coarse, 0.0, 1.0).unwrap()).unwrap();
        let b = spectral_gap_1d(&GridMeasure::gaussian(fine, 0.0, 1.0).unwrap()).unwrap();
        assert!((a - b).abs() / b < 0.02);
    }

    #[test]
    fn histogram_density_examples() {
        let g = grid801();
        // unit spike
        let (spike, escaped) = histogram_density(&[0.505; 100], g, 0.0).unwrap();
        let idx = g.locate(0.505).unwrap();
        assert_relative_eq!(spike.weights[idx] * g.h(), 1.0, epsilon = 1e-12);
        assert_eq!(escaped, 0.0);
        // empty list errors
        assert!(histogram_density(&[], g, 0.0).is_err());
        // coverage failure
        let far = vec![100.0; 1000];
        assert!(matches!(
            histogram_density(&far, g, 0.0),
            Err(Error::Coverage { .. })
        ));
    }

    #[test]
    fn histogram_matches_discretized_gaussian() {
        let g = grid801();
        let streams = NoiseStreams::new(123, 9);
        let n = 200_000usize;
        let mut samples = vec![0.0; n];
        streams.fill_standard_normals(0, 0, &mut samples);
        let (hist, escaped) = histogram_density(&samples, g, 0.0).unwrap();
        assert!(escaped <= 1e-3);
        let exact = GridMeasure::gaussian(g, 0.0, 1.0).unwrap();
        let w2 = wasserstein2_1d_grid(&hist, &exact);
        assert!(w2 <= 0.01, "w2 = {w2}");
    }

    #[test]
    fn boltzmann_identity() {
        let g = grid801();
        let mu = GridMeasure::gaussian(g, 0.0, 1.2).unwrap();
        let nu = GridMeasure::gaussian(g, 0.5, 0.9).unwrap();

        // constant U cancels
        let uc = GridFunction::from_fn(g, |_| 1.7);
        let (lhs, rhs) = boltzmann_decompose(&nu, &mu, &uc).unwrap();
        assert_relative_eq!(lhs, rhs[0], epsilon = 1e-10);
        assert_relative_eq!(rhs[1] + rhs[2], 0.0, epsilon = 1e-10);

        // quadratic U
        let uq = GridFunction::from_fn(g, |x| 0.3 * x * x - 0.2 * x);
        let (lhs, rhs) = boltzmann_decompose(&nu, &mu, &uq).unwrap();
        let total: f64 = rhs.iter().sum();
        assert_relative_eq!(lhs, total, max_relative = 1e-8);
    }

    #[test]
    fn tensorization_product_and_correlated() {
        let gx = Grid1d::new(-6.0, 6.0, 201).unwrap();
        let gv = Grid1d::new(-6.0, 6.0, 201).unwrap();
        let a1 = GridMeasure::gaussian(gx, 0.0, 1.0).unwrap();
        let a2 = GridMeasure::gaussian(gv, 0.0, 1.0).unwrap();

        let q = PhaseGridMeasure::product(&a1, &a2);
        let (joint, marg) = tensorization_gap(&q, &a1, &a2).unwrap();
        assert!(joint.abs() < 1e-10 && marg.abs() < 1e-10);

        // product of shifted Gaussians: tensorization is tight
        let b1 = GridMeasure::gaussian(gx, 0.8, 1.0).unwrap();
        let b2 = GridMeasure::gaussian(gv, -0.5, 1.0).unwrap();
        let qs = PhaseGridMeasure::product(&b1, &b2);
        let (joint, marg) = tensorization_gap(&qs, &a1, &a2).unwrap();
        assert_relative_eq!(joint, marg, max_relative = 1e-10);

        // correlated Gaussian: joint exceeds the marginal sum by the mutual
        // information, cross-checked by a direct grid computation
        let rho = 0.6_f64;
        let det = 1.0 - rho * rho;
        let w: Vec<f64> = (0..gx.m * gv.m)
            .map(|idx| {
                let (i, j) = (idx / gv.m, idx % gv.m);
                let (x, v) = (gx.center(i), gv.center(j));
                (-(x * x - 2.0 * rho * x * v + v * v) / (2.0 * det)).exp()
            })
            .collect();
        let qc = PhaseGridMeasure::from_weights(gx, gv, w).unwrap();
        let (joint, marg) = tensorization_gap(&qc, &a1, &a2).unwrap();
        assert!(joint > marg);
        // grid mutual information: H[Q | Q1 (x) Q2]
        let q1 = qc.x_marginal();
        let q2 = qc.v_marginal();
        let (mi, _) = tensorization_gap(&qc, &q1, &q2).unwrap();
        assert_relative_eq!(joint - marg, mi, max_relative = 1e-6);
        // Gaussian mutual information oracle: -(1/2) ln(1 - rho^2)
        assert_relative_eq!(mi, -0.5 * det.ln(), max_relative = 1e-3);
    }

    #[test]
    fn pinsker_sanity() {
        let g = Grid1d::new(-6.0, 6.0, 301).unwrap();
        let streams = NoiseStreams::new(77, 0);
        for t in 0..100u64 {
            let m1 = 2.0 * (streams.uniform(t, 0, 0) - 0.5);
            let s1 = 0.5 + streams.uniform(t, 0, 1);
            let m2 = 2.0 * (streams.uniform(t, 0, 2) - 0.5);
            let s2 = 0.5 + streams.uniform(t, 0, 3);
            let nu = GridMeasure::gaussian(g, m1, s1).unwrap();
            let mu = GridMeasure::gaussian(g, m2, s2).unwrap();
            let h = relative_entropy(&nu, &mu).unwrap().finite("h").unwrap();
            let tv = 0.5
                * nu.weights
                    .iter()
                    .zip(&mu.weights)
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                * g.h();
            assert!(tv <= (0.5 * h).sqrt() + 1e-9, "tv={tv} h={h}");
        }
    }

    #[test]
    fn entropy_nonnegative_zero_iff_equal() {
        let g = Grid1d::new(-6.0, 6.0, 301).unwrap();
        let streams = NoiseStreams::new(12, 0);
        for t in 0..50u64 {
            let m1 = streams.uniform(t, 0, 0) - 0.5;
            let s1 = 0.6 + streams.uniform(t, 0, 1);
            let nu = GridMeasure::gaussian(g, m1, s1).unwrap();
            let mu = GridMeasure::gaussian(g, m1 + 0.3, s1).unwrap();
            let h = relative_entropy(&nu, &mu).unwrap().finite("h").unwrap();
            assert!(h > 0.0);
            let self_h = relative_entropy(&nu, &nu).unwrap().finite("h").unwrap();
            assert!(self_h.abs() <= 1e-10);
        }
    }

    #[test]
    fn quantile_nodes_constant_is_applied() {
        // two identical measures on different grids must still be comparable
        let g1 = Grid1d::new(-8.0, 8.0, 801).unwrap();
        let g2 = Grid1d::new(-8.0, 8.0, 401).unwrap();
        let a = GridMeasure::gaussian(g1, 0.3, 1.1).unwrap();
        let b = GridMeasure::gaussian(g2, 0.3, 1.1).unwrap();
        assert!(wasserstein2_1d_grid(&a, &b) < 1e-3);
        let p = std_normal_cdf(0.0);
        assert!((p - 0.5).abs() < 1e-15);
    }
}
