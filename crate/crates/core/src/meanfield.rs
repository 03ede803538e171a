//! Measure-level limit objects: mean-field energy / entropy / Fisher
//! information, the Gibbs fixed-point map with its Picard solver, the
//! nonlinear Fokker-Planck and kinetic Vlasov-Fokker-Planck grid flows, and
//! the Cesaro-limit estimators.
//!
//! Conventions: `sigma = sqrt(2)`, so the reference measure is
//! `alpha ~ e^{-V}` and the nonlinear Fokker-Planck equation reads
//! `dmu/dt = d/dx( (D_m F(mu, x) + V'(x)) mu + mu' )`. The drift is frozen
//! at the start of each step; fluxes use exponentially fitted upwind
//! weights so the discrete Gibbs profile is stationary to rounding.

use crate::error::{Error, Result};
use crate::grid::{same_grid, std_normal_cdf, Grid1d, GridFunction, GridMeasure, PhaseGridMeasure};
use crate::interaction::{flat_derivative_raw, monomial, u_statistic, ParticleEnsemble};
use crate::measures::{relative_entropy, wasserstein1_1d_grid, ExtReal};
use crate::potentials::{InteractionKernel, ModelSpec};
use crate::rng::{NoiseStreams, SeedLineage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Reference measure `alpha ~ e^{-V}` discretized on the grid.
pub fn alpha_measure(model: &ModelSpec, grid: Grid1d) -> Result<GridMeasure> {
    let mut log_w: Vec<f64> = (0..grid.m)
        .map(|i| -model.confinement.eval(&[grid.center(i)]))
        .collect();
    let shift = log_w.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    for v in log_w.iter_mut() {
        *v = (*v - shift).exp();
    }
    GridMeasure::from_weights(grid, log_w)
}

/// `E_W[mu] = H[mu | alpha] + sum_k int W^(k) d mu^(x) k`, by term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub relative_entropy_term: f64,
    /// per kernel order
    pub interaction_terms: Vec<(usize, f64)>,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum EnergyValue {
    Finite(EnergyBreakdown),
    Infinite,
}

impl EnergyValue {
    pub fn total(&self) -> Result<f64> {
        match self {
            EnergyValue::Finite(b) => Ok(b.total),
            EnergyValue::Infinite => Err(Error::Numerical("mean-field energy is +inf".into())),
        }
    }
}

/// Macroscopic mean-field energy of `mu` under the model (d = 1 grids).
pub fn mean_field_energy(mu: &GridMeasure, model: &ModelSpec, grid: Grid1d) -> Result<EnergyValue> {
    same_grid(&mu.grid, &grid)?;
    let alpha = alpha_measure(model, grid)?;
    let h = match relative_entropy(mu, &alpha)? {
        ExtReal::Finite(v) => v,
        ExtReal::PosInf => return Ok(EnergyValue::Infinite),
    };
    let mut terms = Vec::with_capacity(model.kernels.len());
    let mut total = h;
    for kern in &model.kernels {
        let w = monomial(kern, mu)?;
        terms.push((kern.order(), w));
        total += w;
    }
    Ok(EnergyValue::Finite(EnergyBreakdown {
        relative_entropy_term: h,
        interaction_terms: terms,
        total,
    }))
}

/// Gibbs map `Gamma(mu) ~ e^{-dF/dm(mu, .) - V}` (max-shift guarded).
pub fn gamma_map(mu: &GridMeasure, model: &ModelSpec) -> Result<GridMeasure> {
    let grid = mu.grid;
    let flat = flat_derivative_raw(&model.kernels, mu)?;
    let mut log_w: Vec<f64> = (0..grid.m)
        .map(|i| -(flat.values[i] + model.confinement.eval(&[grid.center(i)])))
        .collect();
    let shift = log_w.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    for v in log_w.iter_mut() {
        *v = (*v - shift).exp();
    }
    GridMeasure::from_weights(grid, log_w)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub measure: GridMeasure,
    pub iterations: usize,
    /// W1 between the last two iterates
    pub final_residual: f64,
    /// geometric mean of late residual ratios, clamped into (0, 1) on success
    pub contraction_estimate: f64,
}

/// Picard iteration `mu <- Gamma(mu)` until the W1 residual drops below
/// `tol`. Non-contracting residuals at `max_iter` surface `NoContraction`,
/// the phase-transition signal.
pub fn solve_fixed_point(
    model: &ModelSpec,
    grid: Grid1d,
    tol: f64,
    max_iter: usize,
    init: &GridMeasure,
) -> Result<FixedPointResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidDomain(format!("tol must be > 0, got {tol}")));
    }
    same_grid(&init.grid, &grid)?;
    let mut current = init.clone();
    let mut residuals: Vec<f64> = Vec::new();
    for iter in 1..=max_iter.max(1) {
        let next = gamma_map(&current, model)?;
        let r = wasserstein1_1d_grid(&next, &current)?;
        residuals.push(r);
        current = next;
        if r <= tol {
            let ratios: Vec<f64> = residuals
                .windows(2)
                .filter(|w| w[0] > 100.0 * tol)
                .map(|w| w[1] / w[0])
                .collect();
            let tail = &ratios[ratios.len().saturating_sub(5)..];
            let estimate = if tail.is_empty() {
                f64::MIN_POSITIVE
            } else {
                let log_mean =
                    tail.iter().map(|x| x.max(f64::MIN_POSITIVE).ln()).sum::<f64>() / tail.len() as f64;
                log_mean.exp()
            };
            return Ok(FixedPointResult {
                measure: current,
                iterations: iter,
                final_residual: r,
                contraction_estimate: estimate.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16),
            });
        }
    }
    let k = residuals.len();
    let ratio = if k >= 2 { residuals[k - 1] / residuals[k - 2] } else { 1.0 };
    Err(Error::NoContraction {
        iterations: k,
        residual: residuals[k - 1],
        ratio,
    })
}

/// `H_W[mu] = E_W[mu] - E_W[mu_inf]`; nonnegative up to grid error.
pub fn mean_field_entropy(
    mu: &GridMeasure,
    model: &ModelSpec,
    mu_inf: &GridMeasure,
) -> Result<f64> {
    let grid = mu.grid;
    let e_mu = mean_field_energy(mu, model, grid)?.total()?;
    let e_inf = mean_field_energy(mu_inf, model, grid)?.total()?;
    let h = e_mu - e_inf;
    if h < -1e-8 {
        return Err(Error::Numerical(format!(
            "mean-field entropy {h:.3e} below the -1e-8 grid-error floor"
        )));
    }
    Ok(h)
}

/// `I_W[mu] = (1/4) int | d/dx ( log(d mu/d alpha) + dF/dm(mu, .) ) |^2 d mu`.
pub fn mean_field_fisher(mu: &GridMeasure, model: &ModelSpec) -> Result<ExtReal> {
    let grid = mu.grid;
    let alpha = alpha_measure(model, grid)?;
    let flat = flat_derivative_raw(&model.kernels, mu)?;
    let lo = match mu.weights.iter().position(|w| *w > 0.0) {
        Some(i) => i,
        None => return Ok(ExtReal::Finite(0.0)),
    };
    let hi = mu.weights.iter().rposition(|w| *w > 0.0).unwrap();
    if hi - lo < 2 {
        return Ok(ExtReal::Finite(0.0));
    }
    let mut score = vec![0.0; grid.m];
    for i in lo..=hi {
        if mu.weights[i] == 0.0 {
            return Ok(ExtReal::PosInf);
        }
        score[i] = (mu.weights[i] / alpha.weights[i]).ln() + flat.values[i];
    }
    let h = grid.h();
    let mut acc = 0.0;
    for i in lo..=hi {
        let slope = if i == lo {
            (score[i + 1] - score[i]) / h
        } else if i == hi {
            (score[i] - score[i - 1]) / h
        } else {
            (score[i + 1] - score[i - 1]) / (2.0 * h)
        };
        acc += mu.weights[i] * slope * slope;
    }
    Ok(ExtReal::Finite(0.25 * acc * h))
}

/// Frozen mean-field drift field `b(x) = D_m F(mu, x) + V'(x)`: the
/// measure moments are captured once, evaluation at a point is then O(1)
/// for builtin kernels (one quadrature for tables).
pub struct MeanFieldDrift<'a> {
    model: &'a ModelSpec,
    mu: &'a GridMeasure,
    m1: f64,
}

impl<'a> MeanFieldDrift<'a> {
    pub fn new(model: &'a ModelSpec, mu: &'a GridMeasure) -> Self {
        MeanFieldDrift {
            model,
            mu,
            m1: mu.mean(),
        }
    }

    pub fn at(&self, x: f64) -> f64 {
        let mut g = [0.0];
        self.model.confinement.gradient(&[x], &mut g);
        let mut b = g[0];
        for kern in &self.model.kernels {
            b += match kern {
                InteractionKernel::Constant { .. } => 0.0,
                InteractionKernel::ProductPair { lambda } => 2.0 * lambda * self.m1,
                InteractionKernel::QuadraticPair { lambda } => lambda * (x - self.m1),
                InteractionKernel::TripleProduct { epsilon } => {
                    3.0 * epsilon * self.m1 * self.m1
                }
                InteractionKernel::Table { .. } => {
                    let fd = 1e-5;
                    let up = table_flat_at(kern, self.mu, x + fd);
                    let dn = table_flat_at(kern, self.mu, x - fd);
                    (up - dn) / (2.0 * fd)
                }
            };
        }
        b
    }
}

/// Convenience single-point evaluation of the mean-field drift.
pub fn drift_at(model: &ModelSpec, mu: &GridMeasure, x: f64) -> f64 {
    MeanFieldDrift::new(model, mu).at(x)
}

fn table_flat_at(kern: &InteractionKernel, mu: &GridMeasure, x: f64) -> f64 {
    let g = mu.grid;
    let h = mu.h();
    2.0 * (0..g.m)
        .map(|j| kern.eval_flat(&[x, g.center(j)], 1) * mu.weights[j])
        .sum::<f64>()
        * h
}

/// Exponentially fitted flux weight `B(z) = z / (e^z - 1)`.
fn bernoulli_b(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 - 0.5 * z + z * z / 12.0
    } else if z > 700.0 {
        0.0
    } else {
        z / z.exp_m1()
    }
}

/// Admissible explicit step for the drift-diffusion flux scheme.
pub fn fokker_planck_admissible_dt(mu: &GridMeasure, model: &ModelSpec) -> f64 {
    let grid = mu.grid;
    let h = grid.h();
    let drift = MeanFieldDrift::new(model, mu);
    let mut bmax: f64 = 0.0;
    for i in 0..=grid.m {
        bmax = bmax.max(drift.at(grid.edge(i)).abs());
    }
    h * h / (2.0 + h * bmax)
}

/// One conservative finite-volume step of the nonlinear Fokker-Planck flow.
///
/// The drift is frozen at step start; faces carry exponentially fitted
/// upwind weights against unit diffusion, zero-flux boundaries. Mass is
/// conserved exactly; negative values are clipped at -1e-14 and the
/// density renormalized.
pub fn fokker_planck_step(
    mu: &GridMeasure,
    model: &ModelSpec,
    dt: f64,
) -> Result<GridMeasure> {
    let admissible = fokker_planck_admissible_dt(mu, model);
    if !(dt > 0.0) || dt > admissible {
        return Err(Error::Stability { dt, admissible });
    }
    let grid = mu.grid;
    let m = grid.m;
    let h = grid.h();
    let drift = MeanFieldDrift::new(model, mu);
    // interior face fluxes; zero at the domain boundary
    let mut flux = vec![0.0; m + 1];
    for f in 1..m {
        let p = drift.at(grid.edge(f)) * h;
        flux[f] = (bernoulli_b(p) * mu.weights[f - 1] - bernoulli_b(-p) * mu.weights[f]) / h;
    }
    let mut next = vec![0.0; m];
    for i in 0..m {
        next[i] = mu.weights[i] - dt / h * (flux[i + 1] - flux[i]);
    }
    for w in next.iter_mut() {
        if *w < 0.0 {
            if *w < -1e-14 {
                return Err(Error::Numerical(format!(
                    "negative density {w:.3e} beyond the clipping floor"
                )));
            }
            *w = 0.0;
        }
    }
    GridMeasure::from_weights(grid, next)
}

/// Precomputed exact Ornstein-Uhlenbeck transition on a velocity grid.
///
/// Source cell `i` spreads to a band of target cells around `e^{-dt} v_i`
/// with cell-integrated Gaussian weights, truncated at 1e-14 tail mass and
/// renormalized per source so the map conserves mass exactly.
pub struct OuKernel {
    v_grid: Grid1d,
    band: Vec<(usize, Vec<f64>)>,
}

impl OuKernel {
    pub fn new(v_grid: Grid1d, dt: f64) -> Result<Self> {
        let c = (-dt).exp();
        let h = v_grid.h();
        // deconvolve the cell-center atomization: targets are re-atomized
        // with +h^2/12 second moment, so the kernel spread is shrunk by the
        // same amount to keep the atom-level variance map exactly
        // var' = c^2 var + (1 - c^2)
        let s2 = (1.0 - c * c) - h * h / 12.0;
        if s2 <= h * h / 12.0 {
            return Err(Error::InvalidDomain(format!(
                "OU refresh needs 1 - e^(-2 dt) > h^2/6 = {:.3e}; increase dt or refine the velocity grid",
                h * h / 6.0
            )));
        }
        let s = s2.sqrt();
        let reach = (8.0 * s / h).ceil() as i64 + 1;
        let mut band = Vec::with_capacity(v_grid.m);
        for i in 0..v_grid.m {
            let center = c * v_grid.center(i);
            let j0 = ((center - v_grid.lo) / h).floor() as i64;
            let lo = (j0 - reach).max(0) as usize;
            let hi = ((j0 + reach) as usize).min(v_grid.m - 1);
            let mut w: Vec<f64> = (lo..=hi)
                .map(|j| {
                    let a = (v_grid.edge(j) - center) / s;
                    let b = (v_grid.edge(j + 1) - center) / s;
                    let val = std_normal_cdf(b) - std_normal_cdf(a);
                    if val > 1e-14 {
                        val
                    } else {
                        0.0
                    }
                })
                .collect();
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                for x in w.iter_mut() {
                    *x /= total;
                }
            }
            band.push((lo, w));
        }
        Ok(OuKernel { v_grid, band })
    }

    /// Applies the transition to one velocity column (density values).
    pub fn apply(&self, column: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, src) in column.iter().enumerate() {
            if *src == 0.0 {
                continue;
            }
            let (lo, w) = &self.band[i];
            for (k, wv) in w.iter().enumerate() {
                out[lo + k] += src * wv;
            }
        }
    }

    pub fn grid(&self) -> Grid1d {
        self.v_grid
    }
}

/// Semi-Lagrangian shift in donor (scatter) form with cubic Lagrange
/// weights: every source cell distributes its mass over the four targets
/// enclosing its displaced position, clamped at the walls. The weights sum
/// to one for every fractional offset, so a uniform shift conserves mass
/// exactly with zero flux through the boundary; linear-interpolation
/// heating is absent at this order (small undershoots are clipped by the
/// caller).
fn shift_cubic(values: &[f64], grid: Grid1d, shift: f64, out: &mut [f64]) {
    let m = values.len();
    let h = grid.h();
    let offset = shift / h;
    out.fill(0.0);
    let clamp = |j: i64| -> usize { j.clamp(0, m as i64 - 1) as usize };
    for (i, &w) in values.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let t = i as f64 + offset;
        let j = t.floor();
        let phi = t - j;
        let j = j as i64;
        let w_m1 = -phi * (1.0 - phi) * (2.0 - phi) / 6.0;
        let w_0 = (1.0 + phi) * (1.0 - phi) * (2.0 - phi) / 2.0;
        let w_p1 = (1.0 + phi) * phi * (2.0 - phi) / 2.0;
        let w_p2 = -(1.0 + phi) * phi * (1.0 - phi) / 6.0;
        out[clamp(j - 1)] += w_m1 * w;
        out[clamp(j)] += w_0 * w;
        out[clamp(j + 1)] += w_p1 * w;
        out[clamp(j + 2)] += w_p2 * w;
    }
}

/// One Strang-split step of the kinetic Vlasov-Fokker-Planck flow:
/// half x-transport, half velocity kick by the frozen mean-field force,
/// exact OU velocity refresh, half kick, half transport. The force field
/// is rebuilt from the current position marginal each step (the nonlinear
/// coupling).
pub fn vfp_step(
    mu: &PhaseGridMeasure,
    model: &ModelSpec,
    dt: f64,
    ou: &OuKernel,
) -> Result<PhaseGridMeasure> {
    let (gx, gv) = (mu.x_grid, mu.v_grid);
    same_grid(&ou.grid(), &gv)?;
    let (mx, mv) = (gx.m, gv.m);
    let vmax = gv.lo.abs().max(gv.hi.abs());
    let marginal = mu.x_marginal();
    // frozen force per x-cell (evaluated at centers)
    let drift = MeanFieldDrift::new(model, &marginal);
    let force: Vec<f64> = (0..mx).map(|ix| -drift.at(gx.center(ix))).collect();
    let fmax = force.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let adm_x = gx.h() / vmax.max(1e-12);
    let adm_v = gv.h() / fmax.max(1e-12);
    let admissible = adm_x.min(adm_v);
    if !(dt > 0.0) || dt > admissible {
        return Err(Error::Stability { dt, admissible });
    }

    let mut w = mu.weights.clone();
    let mut row = vec![0.0; mx];
    let mut row_out = vec![0.0; mx];
    let mut col = vec![0.0; mv];
    let mut col_out = vec![0.0; mv];

    fn transport_half(
        w: &mut [f64],
        gx: Grid1d,
        gv: Grid1d,
        dt: f64,
        row: &mut [f64],
        row_out: &mut [f64],
    ) {
        let (mx, mv) = (gx.m, gv.m);
        for iv in 0..mv {
            let v = gv.center(iv);
            for ix in 0..mx {
                row[ix] = w[ix * mv + iv];
            }
            shift_cubic(row, gx, 0.5 * dt * v, row_out);
            for ix in 0..mx {
                w[ix * mv + iv] = row_out[ix];
            }
        }
    }
    fn kick_half(
        w: &mut [f64],
        gx: Grid1d,
        gv: Grid1d,
        dt: f64,
        force: &[f64],
        col: &mut [f64],
        col_out: &mut [f64],
    ) {
        let (mx, mv) = (gx.m, gv.m);
        for ix in 0..mx {
            col.copy_from_slice(&w[ix * mv..(ix + 1) * mv]);
            shift_cubic(col, gv, 0.5 * dt * force[ix], col_out);
            w[ix * mv..(ix + 1) * mv].copy_from_slice(col_out);
        }
    }

    transport_half(&mut w, gx, gv, dt, &mut row, &mut row_out);
    kick_half(&mut w, gx, gv, dt, &force, &mut col, &mut col_out);
    // exact OU refresh per x-column
    for ix in 0..mx {
        col.copy_from_slice(&w[ix * mv..(ix + 1) * mv]);
        ou.apply(&col, &mut col_out);
        w[ix * mv..(ix + 1) * mv].copy_from_slice(&col_out);
    }
    kick_half(&mut w, gx, gv, dt, &force, &mut col, &mut col_out);
    transport_half(&mut w, gx, gv, dt, &mut row, &mut row_out);

    // the scatter stages conserve mass exactly; verify before clipping the
    // cubic undershoots and renormalizing
    let mass: f64 = w.iter().sum::<f64>() * gx.h() * gv.h();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::Numerical(format!(
            "phase-space mass drifted to {mass:.12} within one step"
        )));
    }
    for x in w.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    PhaseGridMeasure::from_weights(gx, gv, w)
}

/// Kinetic free energy `E`, entropy `S = E - E[mu_inf]`, and the
/// velocity-projected Fisher information `I = int |d_v log mu + v|^2 d mu`.
pub fn vfp_free_energy(
    mu: &PhaseGridMeasure,
    model: &ModelSpec,
    mu_z_inf: &PhaseGridMeasure,
) -> Result<(f64, f64, f64)> {
    let e = kinetic_energy_functional(mu, model)?;
    let e_inf = kinetic_energy_functional(mu_z_inf, model)?;
    let s = e - e_inf;
    let i = velocity_fisher(mu)?;
    Ok((e, s, i))
}

fn kinetic_energy_functional(mu: &PhaseGridMeasure, model: &ModelSpec) -> Result<f64> {
    let alpha = alpha_measure(model, mu.x_grid)?;
    let gauss = GridMeasure::gaussian(mu.v_grid, 0.0, 1.0)?;
    let cell = mu.cell();
    let mut h = 0.0;
    for ix in 0..mu.x_grid.m {
        for iv in 0..mu.v_grid.m {
            let p = mu.weights[mu.idx(ix, iv)];
            if p == 0.0 {
                continue;
            }
            let r = alpha.weights[ix] * gauss.weights[iv];
            if r == 0.0 {
                return Err(Error::Numerical(
                    "phase measure charges a cell where alpha (x) N(0,1) vanishes".into(),
                ));
            }
            h += p * (p / r).ln();
        }
    }
    let mut total = h * cell;
    let marginal = mu.x_marginal();
    for kern in &model.kernels {
        total += monomial(kern, &marginal)?;
    }
    Ok(total)
}

fn velocity_fisher(mu: &PhaseGridMeasure) -> Result<f64> {
    let hv = mu.v_grid.h();
    let mv = mu.v_grid.m;
    let mut acc = 0.0;
    for ix in 0..mu.x_grid.m {
        let col = &mu.weights[ix * mv..(ix + 1) * mv];
        let lo = match col.iter().position(|w| *w > 0.0) {
            Some(i) => i,
            None => continue,
        };
        let hi = col.iter().rposition(|w| *w > 0.0).unwrap();
        if hi - lo < 2 {
            continue;
        }
        for iv in lo..=hi {
            if col[iv] == 0.0 {
                continue;
            }
            let back = iv > lo && col[iv - 1] > 0.0;
            let fwd = iv < hi && col[iv + 1] > 0.0;
            let slope = match (back, fwd) {
                (true, true) => (col[iv + 1] / col[iv - 1]).ln() / (2.0 * hv),
                (false, true) => (col[iv + 1] / col[iv]).ln() / hv,
                (true, false) => (col[iv] / col[iv - 1]).ln() / hv,
                (false, false) => 0.0,
            };
            let score = slope + mu.v_grid.center(iv);
            acc += col[iv] * score * score;
        }
    }
    Ok(acc * mu.cell())
}

/// Monte Carlo estimate of `(1/n) log Ztilde_n` where
/// `Ztilde_n = E_{alpha^n}[ e^{-n sum_k U_n(W^(k))} ]`, with a delta-method
/// standard error. Samples draw from the grid inverse CDF of `alpha`.
pub fn log_partition_mc(
    model: &ModelSpec,
    grid: Grid1d,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n < model.max_order().max(2) {
        return Err(Error::Arity(format!(
            "log partition needs n >= max kernel order, got n = {n}"
        )));
    }
    if n_samples < 2 {
        return Err(Error::InvalidDomain("need at least 2 samples".into()));
    }
    let alpha = alpha_measure(model, grid)?;
    let cdf = alpha.cdf_edges();
    let streams = NoiseStreams::new(seed, 0x10c);
    let lineage = SeedLineage::new(seed, 0x10c);

    let exponents: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let xs: Vec<f64> = (0..n)
                .map(|i| {
                    let u = streams.uniform(s as u64, i as u64, 0);
                    alpha.quantile_from_cdf(&cdf, u)
                })
                .collect();
            let ens = ParticleEnsemble::new(n, 1, xs, lineage).expect("finite sample");
            let mut acc = 0.0;
            for kern in &model.kernels {
                acc += u_statistic(kern, &ens).expect("n >= k checked");
            }
            -(n as f64) * acc
        })
        .collect();

    let shift = exponents.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !shift.is_finite() {
        return Err(Error::Numerical("all importance weights underflowed".into()));
    }
    let weights: Vec<f64> = exponents.iter().map(|e| (e - shift).exp()).collect();
    let mean = crate::rng::pairwise_sum(&weights) / n_samples as f64;
    let sq: Vec<f64> = weights.iter().map(|w| (w - mean) * (w - mean)).collect();
    let var = crate::rng::pairwise_sum(&sq) / (n_samples as f64 - 1.0);
    let se_mean = (var / n_samples as f64).sqrt();
    let value = (mean.ln() + shift) / n as f64;
    let stderr = se_mean / mean / n as f64;
    Ok((value, stderr))
}

/// One Cesaro entropy estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CesaroEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// `(1/n) H[nu^n | mu_n] = H[nu | alpha] + sum_k int W^(k) d nu^(x) k
///  + (1/n) log Ztilde_n`, assembled from grid functionals plus the Monte
/// Carlo log-partition term.
pub fn cesaro_entropy(
    nu: &GridMeasure,
    model: &ModelSpec,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<CesaroEstimate> {
    let grid = nu.grid;
    let alpha = alpha_measure(model, grid)?;
    let h = relative_entropy(nu, &alpha)?.finite("H[nu|alpha]")?;
    let mut value = h;
    for kern in &model.kernels {
        value += monomial(kern, nu)?;
    }
    let (logz, stderr) = log_partition_mc(model, grid, n, n_samples, seed)?;
    Ok(CesaroEstimate {
        value: value + logz,
        stderr,
    })
}

/// Monte Carlo diagnostic for the Fisher-information Cesaro limit:
/// `(1/n) I[nu^n | mu_n] = (1/4) E_{nu^n} | score_nu(x_1)
///  + sum_k grad_{x_1} (n U_n) |^2`, sampling from the grid inverse CDF.
pub fn cesaro_fisher(
    nu: &GridMeasure,
    model: &ModelSpec,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<CesaroEstimate> {
    if n < model.max_order().max(2) {
        return Err(Error::Arity(format!(
            "Cesaro Fisher needs n >= max kernel order, got n = {n}"
        )));
    }
    let grid = nu.grid;
    let alpha = alpha_measure(model, grid)?;
    // score of nu against alpha, tabulated then linearly interpolated
    let score_tab: Vec<f64> = {
        let mut log_ratio = vec![0.0; grid.m];
        for i in 0..grid.m {
            log_ratio[i] = (nu.weights[i].max(1e-300) / alpha.weights[i]).ln();
        }
        GridFunction::new(grid, log_ratio)?.derivative().values
    };
    let score_at = |x: f64| -> f64 {
        let h = grid.h();
        let t = ((x - grid.lo) / h - 0.5).clamp(0.0, (grid.m - 1) as f64);
        let i = (t as usize).min(grid.m - 2);
        let frac = t - i as f64;
        (1.0 - frac) * score_tab[i] + frac * score_tab[i + 1]
    };
    let interaction_only = ModelSpec::new(
        1,
        crate::potentials::ConfinementPotential::Quadratic { a: 0.0 },
        model.kernels.clone(),
    )?;
    let cdf = nu.cdf_edges();
    let streams = NoiseStreams::new(seed, 0x11f);
    let lineage = SeedLineage::new(seed, 0x11f);
    let terms: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let xs: Vec<f64> = (0..n)
                .map(|i| {
                    let u = streams.uniform(s as u64, i as u64, 0);
                    nu.quantile_from_cdf(&cdf, u)
                })
                .collect();
            let ens = ParticleEnsemble::new(n, 1, xs.clone(), lineage).expect("finite sample");
            let grad =
                crate::interaction::hamiltonian_gradient(&interaction_only, &ens).expect("grad");
            let total = score_at(xs[0]) + grad[0];
            0.25 * total * total
        })
        .collect();
    let mean = crate::rng::pairwise_sum(&terms) / n_samples as f64;
    let sq: Vec<f64> = terms.iter().map(|t| (t - mean) * (t - mean)).collect();
    let var = crate::rng::pairwise_sum(&sq) / (n_samples as f64 - 1.0);
    Ok(CesaroEstimate {
        value: mean,
        stderr: (var / n_samples as f64).sqrt(),
    })
}
