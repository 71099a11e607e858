//! Heat-kernel maximal functions and weak-type diagnostics.
//!
//! `𝓜 f = sup_t |f ∗ p_t|` and `𝓜₁ u = sup_t |u ∗ √t (X_j p_t)ˇ|`, with the
//! supremum taken over a finite log-spaced t-grid. The discrete sup
//! under-estimates the true one, so wherever these appear on the right-hand
//! side of an inequality a violation can only be spurious; callers re-check
//! with a doubled t-grid before declaring failure.

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::heat::HeatSemigroup;
use crate::numeric::log_spaced;
use crate::report::ExperimentReport;

/// Discretization of `sup_{t>0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TGrid {
    nodes: Vec<f64>,
}

impl TGrid {
    /// 64 log-spaced nodes spanning `[1e-3, 1e3]`.
    pub fn standard() -> Self {
        TGrid {
            nodes: log_spaced(1e-3, 1e3, 64),
        }
    }

    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(Error::invalid("TGrid needs 0 < lo < hi and n >= 2"));
        }
        Ok(TGrid {
            nodes: log_spaced(lo, hi, n),
        })
    }

    /// Same range, twice the node density.
    pub fn doubled(&self) -> Self {
        let lo = self.nodes[0];
        let hi = *self.nodes.last().unwrap();
        TGrid {
            nodes: log_spaced(lo, hi, 2 * self.nodes.len() - 1),
        }
    }

    /// Every node multiplied by `c` (dilation covariance uses `c = r²`).
    pub fn scaled(&self, c: f64) -> Self {
        TGrid {
            nodes: self.nodes.iter().map(|t| t * c).collect(),
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

/// `𝓜 f = max_{t ∈ tg} |f ∗ p_t|` on the full grid.
pub fn heat_maximal(heat: &HeatSemigroup, f: &GridFunction, tg: &TGrid) -> Result<GridFunction> {
    let prep = heat.prepare(f)?;
    let mut max = vec![0.0f64; f.spec().num_points()];
    for &t in tg.nodes() {
        let ft = heat.apply_prepared(&prep, t)?;
        for (m, v) in max.iter_mut().zip(ft.samples()) {
            *m = m.max(v.abs());
        }
    }
    GridFunction::from_samples(*f.spec(), *f.group(), max)
}

/// `𝓜 f` at selected grid node indices.
pub fn heat_maximal_at(
    heat: &HeatSemigroup,
    f: &GridFunction,
    tg: &TGrid,
    outputs: &[usize],
) -> Result<Vec<f64>> {
    let prep = heat.prepare(f)?;
    let mut max = vec![0.0f64; outputs.len()];
    for &t in tg.nodes() {
        let vals = heat.apply_prepared_at(&prep, t, outputs)?;
        for (m, v) in max.iter_mut().zip(&vals) {
            *m = m.max(v.abs());
        }
    }
    Ok(max)
}

/// `𝓜₁ u = max_{t ∈ tg} |u ∗ √t (X_j p_t)ˇ|` on the full grid.
pub fn derivative_maximal(
    heat: &HeatSemigroup,
    u: &GridFunction,
    j: usize,
    tg: &TGrid,
) -> Result<GridFunction> {
    let outputs: Vec<usize> = (0..u.spec().num_points()).collect();
    let vals = derivative_maximal_at(heat, u, j, tg, &outputs)?;
    GridFunction::from_samples(*u.spec(), *u.group(), vals)
}

/// `𝓜₁ u` at selected grid node indices.
pub fn derivative_maximal_at(
    heat: &HeatSemigroup,
    u: &GridFunction,
    j: usize,
    tg: &TGrid,
    outputs: &[usize],
) -> Result<Vec<f64>> {
    let prep = heat.prepare(u)?;
    let mut max = vec![0.0f64; outputs.len()];
    for &t in tg.nodes() {
        let vals = heat.apply_deriv_kernel_at(&prep, t, j, outputs)?;
        for (m, v) in max.iter_mut().zip(&vals) {
            *m = m.max(v.abs());
        }
    }
    Ok(max)
}

/// Weak-(1,1) diagnostic: `sup_λ λ · m(𝓜f, λ) / ‖f‖₁` over a 40-node λ-grid
/// spanning `[1e-3, 1] · ‖𝓜f‖_∞`. The constant is recorded, not asserted.
pub fn weak11_ratio(
    heat: &HeatSemigroup,
    f: &GridFunction,
    tg: &TGrid,
) -> Result<ExperimentReport> {
    let l1 = f.lp_norm(1.0)?;
    if !(l1 > 0.0) {
        return Err(Error::invalid("weak-(1,1) ratio needs ‖f‖₁ > 0"));
    }
    let mf = heat_maximal(heat, f, tg)?;
    let sup = mf.lp_norm(f64::INFINITY)?;
    if !(sup > 0.0) {
        return Err(Error::invalid("maximal function vanished identically"));
    }
    let w = mf.spec().cell_weight();
    let lambdas = log_spaced(1e-3 * sup, sup, 40);
    let mut best = 0.0f64;
    let mut best_lambda = lambdas[0];
    for &lambda in &lambdas {
        let m = mf.samples().iter().filter(|s| s.abs() > lambda).count() as f64 * w;
        if lambda * m > best {
            best = lambda * m;
            best_lambda = lambda;
        }
    }
    Ok(
        ExperimentReport::observational("weak11_ratio", f.group().tag(), None, best, l1)
            .with_detail("lambda_argmax", best_lambda)
            .with_detail("maximal_sup", sup),
    )
}
