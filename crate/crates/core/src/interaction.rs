//! U-statistics, many-body Hamiltonians, and the measure-level polynomial
//! calculus (monomials, flat and intrinsic derivatives).
//!
//! The microscopic interaction energy of an n-particle configuration is
//! `n * sum_k U_n(W^(k))` with `U_n` the average of the kernel over all
//! k-subsets. Builtin kernels are evaluated through power sums in O(n);
//! tabulated kernels fall back to subset enumeration behind an explicit
//! cost guard. Enumeration is the correctness oracle in the test suite,
//! never the production path for builtins.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridMeasure};
use crate::potentials::{InteractionKernel, ModelSpec};
use crate::rng::SeedLineage;
use serde::{Deserialize, Serialize};

/// Exact enumeration budget for generic kernels (number of k-subsets).
pub const ENUMERATION_BUDGET: f64 = 2.0e5;

/// n particle positions in d dimensions, row-major `positions[i*d + c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub n: usize,
    pub d: usize,
    pub positions: Vec<f64>,
    pub seed_lineage: SeedLineage,
}

impl ParticleEnsemble {
    pub fn new(n: usize, d: usize, positions: Vec<f64>, seed_lineage: SeedLineage) -> Result<Self> {
        if n == 0 || d == 0 || positions.len() != n * d {
            return Err(Error::InvalidDomain(format!(
                "ensemble shape mismatch: n={n}, d={d}, len={}",
                positions.len()
            )));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("ensemble has non-finite coordinates".into()));
        }
        Ok(ParticleEnsemble {
            n,
            d,
            positions,
            seed_lineage,
        })
    }

    #[inline]
    pub fn pos(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }
}

/// Pairwise tree reduction over `f(lo..hi)`; summation order is fixed by
/// the index structure, independent of callers or worker counts.
pub fn pairwise_sum_by(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
    if hi - lo <= 8 {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    } else {
        let mid = lo + (hi - lo) / 2;
        pairwise_sum_by(lo, mid, f) + pairwise_sum_by(mid, hi, f)
    }
}

/// Sum of a multiset of terms in value order: the result depends only on
/// the multiset, so relabeling particles cannot move the last bit.
pub fn canonical_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    crate::rng::pairwise_sum(&terms)
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for j in 0..k {
        acc *= (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

/// Walks all k-subsets of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut body: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        body(&idx);
        // advance the rightmost index that can move
        let mut j = k;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if idx[j] != j + n - k {
                break;
            }
            if j == 0 {
                return;
            }
        }
        idx[j] += 1;
        for l in j + 1..k {
            idx[l] = idx[l - 1] + 1;
        }
    }
}

struct PowerSums {
    /// per-coordinate sums of x, x^2, x^3
    p1: Vec<f64>,
    p2: Vec<f64>,
    p3: Vec<f64>,
    /// scalar sums of |x|^2 and <S, .> helpers
    norm2_total: f64,
}

fn power_sums(ensemble: &ParticleEnsemble) -> PowerSums {
    let (n, d) = (ensemble.n, ensemble.d);
    let col = |c: usize, p: i32| {
        canonical_sum(
            (0..n)
                .map(|i| ensemble.positions[i * d + c].powi(p))
                .collect(),
        )
    };
    let p1: Vec<f64> = (0..d).map(|c| col(c, 1)).collect();
    let p2: Vec<f64> = (0..d).map(|c| col(c, 2)).collect();
    let p3: Vec<f64> = (0..d).map(|c| col(c, 3)).collect();
    let norm2_total = p2.iter().sum();
    PowerSums {
        p1,
        p2,
        p3,
        norm2_total,
    }
}

/// `U_n(W) = (k!(n-k)!/n!) * sum over k-subsets of W`.
pub fn u_statistic(kernel: &InteractionKernel, ensemble: &ParticleEnsemble) -> Result<f64> {
    let (n, d, k) = (ensemble.n, ensemble.d, kernel.order());
    if n < k {
        return Err(Error::Arity(format!(
            "U-statistic of order {k} needs n >= {k}, got n = {n}"
        )));
    }
    if kernel.has_fast_path() {
        let ps = power_sums(ensemble);
        let total = match kernel {
            InteractionKernel::Constant { value } => return Ok(*value),
            InteractionKernel::ProductPair { lambda } => {
                let s_norm2: f64 = ps.p1.iter().map(|s| s * s).sum();
                0.5 * lambda * (s_norm2 - ps.norm2_total)
            }
            InteractionKernel::QuadraticPair { lambda } => {
                let s_norm2: f64 = ps.p1.iter().map(|s| s * s).sum();
                0.25 * lambda * (n as f64 * ps.norm2_total - s_norm2)
            }
            InteractionKernel::TripleProduct { epsilon } => {
                // elementary symmetric e3 per coordinate from power sums
                let e3: f64 = (0..d)
                    .map(|c| {
                        let (p1, p2, p3) = (ps.p1[c], ps.p2[c], ps.p3[c]);
                        (p1 * p1 * p1 - 3.0 * p1 * p2 + 2.0 * p3) / 6.0
                    })
                    .sum();
                epsilon * e3
            }
            InteractionKernel::Table { .. } => unreachable!(),
        };
        Ok(total / binomial(n, k))
    } else {
        let count = binomial(n, k);
        if count > ENUMERATION_BUDGET {
            return Err(Error::ComplexityRefusal(format!(
                "C({n},{k}) = {count:.3e} k-subsets exceed the enumeration budget {ENUMERATION_BUDGET:.1e}"
            )));
        }
        let mut pts = vec![0.0; k * d];
        let mut terms = Vec::with_capacity(count as usize);
        for_each_subset(n, k, |subset| {
            for (slot, &i) in subset.iter().enumerate() {
                pts[slot * d..slot * d + d].copy_from_slice(ensemble.pos(i));
            }
            terms.push(kernel.eval_flat(&pts, d));
        });
        Ok(canonical_sum(terms) / count)
    }
}

/// `H_n(x) = sum_j V(x_j) + n * sum_k U_n(W^(k))`.
pub fn hamiltonian(model: &ModelSpec, ensemble: &ParticleEnsemble) -> Result<f64> {
    let n = ensemble.n;
    let confinement = canonical_sum(
        (0..n)
            .map(|i| model.confinement.eval(ensemble.pos(i)))
            .collect(),
    );
    let mut interaction = 0.0;
    for kern in &model.kernels {
        interaction += u_statistic(kern, ensemble)?;
    }
    let h = confinement + n as f64 * interaction;
    if !h.is_finite() {
        return Err(Error::Numerical("hamiltonian is non-finite".into()));
    }
    Ok(h)
}

/// Gradient of `H_n`, an n x d array.
pub fn hamiltonian_gradient(model: &ModelSpec, ensemble: &ParticleEnsemble) -> Result<Vec<f64>> {
    let (n, d) = (ensemble.n, ensemble.d);
    let mut grad = vec![0.0; n * d];
    let mut g = vec![0.0; d];
    for i in 0..n {
        model.confinement.gradient(ensemble.pos(i), &mut g);
        grad[i * d..(i + 1) * d].copy_from_slice(&g);
    }
    for kern in &model.kernels {
        add_interaction_gradient(kern, ensemble, &mut grad)?;
    }
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("hamiltonian gradient is non-finite".into()));
    }
    Ok(grad)
}

/// Adds `grad_i ( n * U_n(W) )` to `grad`.
fn add_interaction_gradient(
    kernel: &InteractionKernel,
    ensemble: &ParticleEnsemble,
    grad: &mut [f64],
) -> Result<()> {
    let (n, d, k) = (ensemble.n, ensemble.d, kernel.order());
    if n < k {
        return Err(Error::Arity(format!(
            "gradient of order-{k} interaction needs n >= {k}, got n = {n}"
        )));
    }
    match kernel {
        InteractionKernel::Constant { .. } => {}
        InteractionKernel::ProductPair { lambda } => {
            // n U = lambda (|S|^2 - sum |x_i|^2) / (n - 1)
            let ps = power_sums(ensemble);
            let c = 2.0 * lambda / (n as f64 - 1.0);
            for i in 0..n {
                for cdim in 0..d {
                    grad[i * d + cdim] += c * (ps.p1[cdim] - ensemble.positions[i * d + cdim]);
                }
            }
        }
        InteractionKernel::QuadraticPair { lambda } => {
            // n U = (lambda/2) (n sum |x_i|^2 - |S|^2) / (n - 1)
            let ps = power_sums(ensemble);
            let c = lambda / (n as f64 - 1.0);
            for i in 0..n {
                for cdim in 0..d {
                    grad[i * d + cdim] +=
                        c * (n as f64 * ensemble.positions[i * d + cdim] - ps.p1[cdim]);
                }
            }
        }
        InteractionKernel::TripleProduct { epsilon } => {
            // n U = 6 eps sum_c e3(col c) / ((n-1)(n-2));
            // grad_ic = 3 eps [ (S_c - x_ic)^2 - (Q_c - x_ic^2) ] / ((n-1)(n-2))
            let ps = power_sums(ensemble);
            let c = 3.0 * epsilon / ((n as f64 - 1.0) * (n as f64 - 2.0));
            for i in 0..n {
                for cdim in 0..d {
                    let x = ensemble.positions[i * d + cdim];
                    let s_rest = ps.p1[cdim] - x;
                    let q_rest = ps.p2[cdim] - x * x;
                    grad[i * d + cdim] += c * (s_rest * s_rest - q_rest);
                }
            }
        }
        InteractionKernel::Table { .. } => {
            let count = binomial(n, k);
            if count > ENUMERATION_BUDGET {
                return Err(Error::ComplexityRefusal(format!(
                    "C({n},{k}) = {count:.3e} k-subsets exceed the enumeration budget"
                )));
            }
            // n U = (n / C(n,k)) sum_subsets W; distribute partial gradients
            let scale = n as f64 / count;
            let mut pts = vec![0.0; k * d];
            let mut gslot = vec![0.0; d];
            for_each_subset(n, k, |subset| {
                for (slot, &i) in subset.iter().enumerate() {
                    pts[slot * d..slot * d + d].copy_from_slice(ensemble.pos(i));
                }
                for (slot, &i) in subset.iter().enumerate() {
                    kernel.partial_gradient(slot, &pts, d, &mut gslot);
                    for cdim in 0..d {
                        grad[i * d + cdim] += scale * gslot[cdim];
                    }
                }
            });
        }
    }
    Ok(())
}

/// Kinetic Hamiltonian `0.5 sum |v_j|^2 + H_n(x)`; the position part is the
/// first-order Hamiltonian so that the kinetic position marginal matches the
/// first-order invariant measure.
pub fn kinetic_hamiltonian(
    model: &ModelSpec,
    positions: &ParticleEnsemble,
    velocities: &[f64],
) -> Result<f64> {
    if velocities.len() != positions.positions.len() {
        return Err(Error::InvalidDomain(format!(
            "velocity array has length {}, positions {}",
            velocities.len(),
            positions.positions.len()
        )));
    }
    let kinetic = 0.5 * canonical_sum(velocities.iter().map(|v| v * v).collect());
    Ok(kinetic + hamiltonian(model, positions)?)
}

/// `int W d mu^(x) k` by tensor quadrature over the grid (d = 1).
///
/// Separable builtins go through moment factorization; a generic pair table
/// uses the full double sum. The results agree to rounding.
pub fn monomial(kernel: &InteractionKernel, mu: &GridMeasure) -> Result<f64> {
    if !mu.is_normalized() {
        return Err(Error::Numerical("monomial needs a normalized measure".into()));
    }
    let m1 = mu.mean();
    match kernel {
        InteractionKernel::Constant { value } => Ok(*value),
        InteractionKernel::ProductPair { lambda } => Ok(lambda * m1 * m1),
        InteractionKernel::QuadraticPair { lambda } => Ok(0.5 * lambda * mu.variance()),
        InteractionKernel::TripleProduct { epsilon } => Ok(epsilon * m1 * m1 * m1),
        InteractionKernel::Table { .. } => {
            let g = &mu.grid;
            let h = g.h();
            let mut acc = 0.0;
            for i in 0..g.m {
                if mu.weights[i] == 0.0 {
                    continue;
                }
                let xi = g.center(i);
                let row = pairwise_sum_by(0, g.m, &|j| {
                    kernel.eval_flat(&[xi, g.center(j)], 1) * mu.weights[j]
                });
                acc += mu.weights[i] * row;
            }
            Ok(acc * h * h)
        }
    }
}

/// Unnormalized flat derivative `x -> sum_k sum_j int W^(k)(.., x at j, ..)
/// d mu^(x)(k-1)`; the additive normalization is applied by
/// [`flat_derivative`] and cancels inside [`intrinsic_derivative`].
pub fn flat_derivative_raw(kernels: &[InteractionKernel], mu: &GridMeasure) -> Result<GridFunction> {
    if !mu.is_normalized() {
        return Err(Error::Numerical(
            "flat derivative needs a normalized measure".into(),
        ));
    }
    let g = mu.grid;
    let m1 = mu.mean();
    let m2 = mu.integrate(|x| x * x);
    let mut values = vec![0.0; g.m];
    for kern in kernels {
        match kern {
            InteractionKernel::Constant { value } => {
                for v in values.iter_mut() {
                    *v += 2.0 * value;
                }
            }
            InteractionKernel::ProductPair { lambda } => {
                for (i, v) in values.iter_mut().enumerate() {
                    *v += 2.0 * lambda * m1 * g.center(i);
                }
            }
            InteractionKernel::QuadraticPair { lambda } => {
                for (i, v) in values.iter_mut().enumerate() {
                    let x = g.center(i);
                    *v += 0.5 * lambda * (x * x - 2.0 * x * m1 + m2);
                }
            }
            InteractionKernel::TripleProduct { epsilon } => {
                for (i, v) in values.iter_mut().enumerate() {
                    *v += 3.0 * epsilon * m1 * m1 * g.center(i);
                }
            }
            InteractionKernel::Table { .. } => {
                let h = mu.h();
                for (i, v) in values.iter_mut().enumerate() {
                    let xi = g.center(i);
                    let row = pairwise_sum_by(0, g.m, &|j| {
                        kern.eval_flat(&[xi, g.center(j)], 1) * mu.weights[j]
                    });
                    *v += 2.0 * row * h;
                }
            }
        }
    }
    GridFunction::new(g, values)
}

/// Flat derivative with the zero-mean normalization `int (dF/dm) d mu = 0`.
pub fn flat_derivative(kernels: &[InteractionKernel], mu: &GridMeasure) -> Result<GridFunction> {
    let mut f = flat_derivative_raw(kernels, mu)?;
    let mean = f.mean_under(mu)?;
    for v in f.values.iter_mut() {
        *v -= mean;
    }
    Ok(f)
}

/// Intrinsic derivative `D_m F = grad dF/dm` as a grid function.
pub fn intrinsic_derivative(
    kernels: &[InteractionKernel],
    mu: &GridMeasure,
) -> Result<GridFunction> {
    Ok(flat_derivative_raw(kernels, mu)?.derivative())
}

/// Universal decoupling constants: `C_2 = 8`,
/// `C_k = 2^k prod_{j=2..k} (j^j - 1)` for `k >= 3`.
pub fn decoupling_constant(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Arity(format!("decoupling constant needs k >= 2, got {k}")));
    }
    if k == 2 {
        return Ok(8.0);
    }
    let mut c = (2.0_f64).powi(k as i32);
    for j in 2..=k {
        c *= (j as f64).powi(j as i32) - 1.0;
    }
    Ok(c)
}
