//! Riesz kernels and Riesz potentials via heat-semigroup subordination:
//!
//! ```text
//! 𝓚_α(x)  = Γ(α/2)⁻¹ ∫₀^∞ t^(α/2-1) p_t(x) dt,      𝓘_α f = f ∗ 𝓚_α .
//! ```
//!
//! The t-integral is a trapezoid rule in ln t (log-spaced ladder), which is
//! spectrally accurate for these integrands, plus analytic corrections: the
//! `[0, t_min]` block uses `f ∗ p_t ≈ f + tΛf`, and the `[t_max, ∞)` block
//! uses `p_t ≈ t^(-Q/2) p₁(0)`.
//!
//! For potentials the ladder is split at the grid's Taylor threshold. Nodes
//! below it act through the small-t expansion; the remaining nodes are
//! collapsed into a single subordinated kernel that is convolved with `f`
//! once (padded FFT on Euclidean grids, a support-lattice sum against a
//! cylindrical `(r, |u|)` kernel table on H¹). Kernel cells within two
//! lattice steps of the singularity are replaced by sub-cell averages, the
//! usual treatment for integrable kernel singularities on a grid.

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{horizontal_gradient, GridFunction, GridSpec};
use crate::group::{GroupDescriptor, LawTag, Point, MAX_DIM};
use crate::heat::HeatSemigroup;
use crate::numeric::{gamma, tree_sum, LogLadder};
use rayon::prelude::*;

/// Parameters of the subordination quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubordinationRule {
    pub t_min: f64,
    pub t_max: f64,
    pub nodes_per_decade: usize,
    pub alpha: f64,
}

impl SubordinationRule {
    /// Default desk rule: t ∈ [1e-4, 1e4], 16 nodes per decade.
    pub fn standard(alpha: f64) -> Self {
        SubordinationRule {
            t_min: 1e-4,
            t_max: 1e4,
            nodes_per_decade: 16,
            alpha,
        }
    }

    pub fn with_nodes_per_decade(mut self, n: usize) -> Self {
        self.nodes_per_decade = n;
        self
    }

    pub fn validate(&self, group: &GroupDescriptor) -> Result<()> {
        let q = group.homogeneous_dimension();
        if !(self.alpha > 0.0 && self.alpha < q) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, Q) = (0, {q}), got {}",
                self.alpha
            )));
        }
        if !(self.t_min > 0.0 && self.t_max > self.t_min) {
            return Err(Error::invalid("need 0 < t_min < t_max"));
        }
        if self.nodes_per_decade < 8 {
            return Err(Error::invalid("nodes_per_decade must be at least 8"));
        }
        Ok(())
    }

    fn ladder(&self) -> Result<LogLadder> {
        LogLadder::new(self.t_min, self.t_max, self.nodes_per_decade)
    }

    /// Subordination weights: `Σ_k w_k F(t_k) ≈ Γ(α/2)⁻¹ ∫ t^(α/2-1) F dt`.
    fn weights(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let ladder = self.ladder()?;
        let g = gamma(self.alpha / 2.0);
        let w = ladder
            .weights_for(self.alpha / 2.0)
            .into_iter()
            .map(|x| x / g)
            .collect();
        Ok((ladder.nodes, w))
    }
}

/// Coefficient of the `[t_max, ∞)` tail: the potential gains
/// `coef · ∫f` uniformly, since `p_t → t^(-Q/2) p₁(0)` there.
fn large_tail_coefficient(heat: &HeatSemigroup, rule: &SubordinationRule) -> f64 {
    let group = heat.group();
    let q = group.homogeneous_dimension();
    let p1_at_origin =
        heat.kernel_unchecked(1.0, &vec![0.0; group.topological_dimension()]);
    p1_at_origin * (2.0 / (q - rule.alpha)) * rule.t_max.powf((rule.alpha - q) / 2.0)
        / gamma(rule.alpha / 2.0)
}

/// Pointwise Riesz kernel `𝓚_α(p)`, `p ≠ identity`.
pub fn riesz_kernel(heat: &HeatSemigroup, rule: &SubordinationRule, p: &Point) -> Result<f64> {
    let group = heat.group();
    rule.validate(group)?;
    if group.homogeneous_norm(p)? == 0.0 {
        return Err(Error::Singularity);
    }
    let (nodes, weights) = rule.weights()?;
    let terms: Vec<f64> = nodes
        .iter()
        .zip(&weights)
        .map(|(&t, &w)| w * heat.kernel_unchecked(t, p.coords()))
        .collect();
    Ok(tree_sum(&terms) + large_tail_coefficient(heat, rule))
}

/// Upper bound for the neglected `[0, t_min]` block of the pointwise kernel;
/// valid while `t_min ≪ gauge(p)²`, where `p_t(p)` is still increasing in t.
pub fn riesz_kernel_small_tail_bound(
    heat: &HeatSemigroup,
    rule: &SubordinationRule,
    p: &Point,
) -> Result<f64> {
    let v = heat.kernel(rule.t_min, p)?;
    Ok(v * (2.0 / rule.alpha) * rule.t_min.powf(rule.alpha / 2.0) / gamma(rule.alpha / 2.0))
}

/// Diagnostics accompanying a potential evaluation.
#[derive(Debug, Clone, Copy)]
pub struct RieszDiagnostics {
    /// `[t_max, ∞)` tail as a fraction of the output sup; should be ≪ 1%.
    pub large_tail_fraction: f64,
}

enum Backend {
    /// Kernel tabulated per lattice offset, convolved by padded FFT.
    Euclidean {
        offsets: Vec<f64>,
        dims: Vec<usize>,
    },
    /// Cylindrical kernel table in stretched coordinates (√r, √|u|),
    /// applied by a support-lattice sum with near-cell sub-averaging.
    Heisenberg(CylKernelTable),
}

struct CylKernelTable {
    n_xi: usize,
    n_eta: usize,
    xi_max: f64,
    eta_max: f64,
    values: Vec<f64>,
}

impl CylKernelTable {
    #[inline]
    fn value(&self, r: f64, u: f64) -> f64 {
        let xi = r.sqrt() / self.xi_max * (self.n_xi - 1) as f64;
        let eta = u.abs().sqrt() / self.eta_max * (self.n_eta - 1) as f64;
        let i = xi.floor() as usize;
        let j = eta.floor() as usize;
        if i + 1 >= self.n_xi || j + 1 >= self.n_eta {
            return 0.0;
        }
        let fx = xi - i as f64;
        let fy = eta - j as f64;
        let v00 = self.values[i * self.n_eta + j];
        let v01 = self.values[i * self.n_eta + j + 1];
        let v10 = self.values[(i + 1) * self.n_eta + j];
        let v11 = self.values[(i + 1) * self.n_eta + j + 1];
        (1.0 - fx) * ((1.0 - fy) * v00 + fy * v01) + fx * ((1.0 - fy) * v10 + fy * v11)
    }
}

/// The Riesz potential as an operator prepared for one (grid, rule) pair, so
/// the subordinated kernel is built once and reused across a whole family of
/// inputs.
pub struct RieszOperator<'h> {
    heat: &'h HeatSemigroup,
    rule: SubordinationRule,
    spec: GridSpec,
    /// Taylor-block coefficients for f, Λf, Λ²f (includes the [0, t_min] tail).
    taylor_c: [f64; 3],
    big_nodes: Vec<f64>,
    big_weights: Vec<f64>,
    tail_coef: f64,
    backend: Backend,
}

impl<'h> RieszOperator<'h> {
    pub fn new(heat: &'h HeatSemigroup, spec: GridSpec, rule: SubordinationRule) -> Result<Self> {
        let group = heat.group();
        rule.validate(group)?;
        if spec.dim() != group.topological_dimension() {
            return Err(Error::DimensionMismatch {
                expected: group.topological_dimension(),
                got: spec.dim(),
            });
        }
        let (nodes, weights) = rule.weights()?;
        let t_a = heat.taylor_threshold(&spec);
        let alpha = rule.alpha;
        let g = gamma(alpha / 2.0);

        let mut taylor_c = [
            (2.0 / alpha) * rule.t_min.powf(alpha / 2.0) / g,
            rule.t_min.powf(alpha / 2.0 + 1.0) / (alpha / 2.0 + 1.0) / g,
            0.0,
        ];
        let mut big_nodes = Vec::new();
        let mut big_weights = Vec::new();
        for (&t, &w) in nodes.iter().zip(&weights) {
            if t < t_a {
                taylor_c[0] += w;
                taylor_c[1] += w * t;
                taylor_c[2] += w * t * t / 2.0;
            } else {
                big_nodes.push(t);
                big_weights.push(w);
            }
        }
        let tail_coef = large_tail_coefficient(heat, &rule);

        let backend = match group.law_tag() {
            LawTag::Euclidean => {
                Self::build_euclidean_kernel(heat, &spec, &big_nodes, &big_weights)?
            }
            LawTag::Heisenberg1 => {
                Self::build_heisenberg_table(heat, &spec, &big_nodes, &big_weights)?
            }
        };
        Ok(RieszOperator {
            heat,
            rule,
            spec,
            taylor_c,
            big_nodes,
            big_weights,
            tail_coef,
            backend,
        })
    }

    pub fn rule(&self) -> &SubordinationRule {
        &self.rule
    }

    fn build_euclidean_kernel(
        heat: &HeatSemigroup,
        spec: &GridSpec,
        big_nodes: &[f64],
        big_weights: &[f64],
    ) -> Result<Backend> {
        let d = spec.dim();
        let spacing = spec.spacing().to_vec();
        let res = spec.resolution().to_vec();
        let dims: Vec<usize> = res.iter().map(|&n| 2 * n - 1).collect();
        let total: usize = dims.iter().product();
        let norms: Vec<f64> = big_nodes
            .iter()
            .map(|&t| (4.0 * std::f64::consts::PI * t).powf(-(d as f64) / 2.0))
            .collect();
        let kernel_at = |coords: &[f64]| -> f64 {
            let r2: f64 = coords.iter().map(|x| x * x).sum();
            let mut acc = 0.0;
            for ((&t, &w), &nrm) in big_nodes.iter().zip(big_weights).zip(&norms) {
                acc += w * nrm * (-r2 / (4.0 * t)).exp();
            }
            acc
        };
        let offsets: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let mut rem = idx;
                let mut o = [0isize; MAX_DIM];
                for a in (0..d).rev() {
                    o[a] = (rem % dims[a]) as isize - (res[a] as isize - 1);
                    rem /= dims[a];
                }
                let cheb = (0..d).map(|a| o[a].abs()).max().unwrap_or(0);
                if cheb <= 2 {
                    // sub-cell average near the singularity
                    let m: usize = if cheb == 0 { 10 } else { 4 };
                    let total_sub: usize = m.pow(d as u32);
                    let mut acc = 0.0;
                    for sub in 0..total_sub {
                        let mut rems = sub;
                        let mut c = [0.0; MAX_DIM];
                        for a in (0..d).rev() {
                            let s = rems % m;
                            rems /= m;
                            c[a] = (o[a] as f64 + (s as f64 + 0.5) / m as f64 - 0.5) * spacing[a];
                        }
                        acc += kernel_at(&c[..d]);
                    }
                    acc / total_sub as f64
                } else {
                    let mut c = [0.0; MAX_DIM];
                    for a in 0..d {
                        c[a] = o[a] as f64 * spacing[a];
                    }
                    kernel_at(&c[..d])
                }
            })
            .collect();
        let _ = heat;
        Ok(Backend::Euclidean { offsets, dims })
    }

    fn build_heisenberg_table(
        heat: &HeatSemigroup,
        spec: &GridSpec,
        big_nodes: &[f64],
        big_weights: &[f64],
    ) -> Result<Backend> {
        let xy_extent = spec.upper()[0].abs().max(spec.lower()[0].abs())
            + spec.upper()[1].abs().max(spec.lower()[1].abs());
        let r_max = 1.02 * (2.0f64).sqrt() * xy_extent;
        let u_extent = spec.upper()[2].abs().max(spec.lower()[2].abs());
        let u_max = 1.02 * (2.0 * u_extent + 0.5 * xy_extent * xy_extent);
        let n_xi = 640;
        let n_eta = 640;
        let xi_max = r_max.sqrt();
        let eta_max = u_max.sqrt();
        let values: Vec<f64> = (0..n_xi * n_eta)
            .into_par_iter()
            .map(|idx| {
                let i = idx / n_eta;
                let j = idx % n_eta;
                let r = (i as f64 / (n_xi - 1) as f64 * xi_max).powi(2);
                let u = (j as f64 / (n_eta - 1) as f64 * eta_max).powi(2);
                let c = [r, 0.0, u];
                let mut acc = 0.0;
                for (&t, &w) in big_nodes.iter().zip(big_weights) {
                    acc += w * heat.kernel_unchecked(t, &c);
                }
                acc
            })
            .collect();
        Ok(Backend::Heisenberg(CylKernelTable {
            n_xi,
            n_eta,
            xi_max,
            eta_max,
            values,
        }))
    }

    /// `𝓘_α f` on the full grid.
    pub fn potential(&self, f: &GridFunction) -> Result<GridFunction> {
        let (out, _) = self.potential_with_diagnostics(f)?;
        Ok(out)
    }

    pub fn potential_with_diagnostics(
        &self,
        f: &GridFunction,
    ) -> Result<(GridFunction, RieszDiagnostics)> {
        let outputs: Vec<usize> = (0..self.spec.num_points()).collect();
        let (vals, diag) = self.potential_at_impl(f, &outputs)?;
        Ok((
            GridFunction::from_samples(self.spec, *self.heat.group(), vals)?,
            diag,
        ))
    }

    /// `𝓘_α f` at selected grid node indices.
    pub fn potential_at(&self, f: &GridFunction, outputs: &[usize]) -> Result<Vec<f64>> {
        Ok(self.potential_at_impl(f, outputs)?.0)
    }

    fn potential_at_impl(
        &self,
        f: &GridFunction,
        outputs: &[usize],
    ) -> Result<(Vec<f64>, RieszDiagnostics)> {
        if *f.spec() != self.spec {
            return Err(Error::GridMismatch(
                "function grid differs from operator grid".into(),
            ));
        }
        let prep = self.heat.prepare(f)?;
        // Taylor block + [0, t_min] tail
        let taylor = {
            let t1 = f.linear_combination(self.taylor_c[0], &prep.lap, self.taylor_c[1])?;
            t1.linear_combination(1.0, &prep.lap2, self.taylor_c[2])?
        };
        let mass = f.integrate();
        let tail_add = self.tail_coef * mass;

        let big: Vec<f64> = match &self.backend {
            Backend::Euclidean { offsets, dims } => {
                let res = self.spec.resolution().to_vec();
                let d = self.spec.dim();
                let full = fft::convolve_offsets(&res, f.samples(), |o: &[isize]| {
                    let mut idx = 0usize;
                    for a in 0..d {
                        let i = o[a] + res[a] as isize - 1;
                        idx = idx * dims[a] + i as usize;
                    }
                    offsets[idx]
                });
                let w = self.spec.cell_weight();
                outputs.iter().map(|&i| full[i] * w).collect()
            }
            Backend::Heisenberg(table) => self.heisenberg_sum(f, table, outputs),
        };

        let vals: Vec<f64> = outputs
            .iter()
            .zip(&big)
            .map(|(&i, &b)| taylor.sample(i) + b + tail_add)
            .collect();
        let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diag = RieszDiagnostics {
            large_tail_fraction: if sup > 0.0 {
                (tail_add / sup).abs()
            } else {
                0.0
            },
        };
        Ok((vals, diag))
    }

    fn heisenberg_sum(
        &self,
        f: &GridFunction,
        table: &CylKernelTable,
        outputs: &[usize],
    ) -> Vec<f64> {
        let spec = &self.spec;
        let w = spec.cell_weight();
        let support = f.support_indices(0.0);
        let support_multi: Vec<[usize; MAX_DIM]> =
            support.iter().map(|&s| spec.multi_of(s)).collect();
        let spacing = spec.spacing();
        let (hx, hy, hu) = (spacing[0], spacing[1], spacing[2]);
        outputs
            .par_iter()
            .map(|&out| {
                let xm = spec.multi_of(out);
                let xc = spec.coords_of(out);
                let mut acc = 0.0;
                for (&s, sm) in support.iter().zip(&support_multi) {
                    let cheb = (0..3)
                        .map(|a| (xm[a] as isize - sm[a] as isize).abs())
                        .max()
                        .unwrap();
                    let sc = spec.coords_of(s);
                    let fv = f.sample(s);
                    if cheb > 2 {
                        // s⁻¹·x = (x₀-s₀, x₁-s₁, x₂-s₂ - (s₀x₁ - s₁x₀)/2)
                        let dx = xc[0] - sc[0];
                        let dy = xc[1] - sc[1];
                        let du = xc[2] - sc[2] - 0.5 * (sc[0] * xc[1] - sc[1] * xc[0]);
                        acc += fv * table.value((dx * dx + dy * dy).sqrt(), du);
                    } else {
                        // cell-average the kernel over the s-cell
                        let m = if cheb == 0 { 6usize } else { 3 };
                        let mut cell = 0.0;
                        for a in 0..m {
                            let ox = sc[0] + ((a as f64 + 0.5) / m as f64 - 0.5) * hx;
                            for b in 0..m {
                                let oy = sc[1] + ((b as f64 + 0.5) / m as f64 - 0.5) * hy;
                                for c in 0..m {
                                    let ou = sc[2] + ((c as f64 + 0.5) / m as f64 - 0.5) * hu;
                                    let dx = xc[0] - ox;
                                    let dy = xc[1] - oy;
                                    let du = xc[2] - ou - 0.5 * (ox * xc[1] - oy * xc[0]);
                                    cell += table.value((dx * dx + dy * dy).sqrt(), du);
                                }
                            }
                        }
                        acc += fv * cell / (m * m * m) as f64;
                    }
                }
                acc * w
            })
            .collect()
    }

    /// Ladder nodes handled by the collapsed-kernel block (diagnostics).
    pub fn collapsed_nodes(&self) -> (&[f64], &[f64]) {
        (&self.big_nodes, &self.big_weights)
    }
}

/// `𝓘_α X_j u` on the full grid.
pub fn riesz_of_hgrad(op: &RieszOperator, u: &GridFunction, j: usize) -> Result<GridFunction> {
    let grads = horizontal_gradient(u)?;
    if j >= grads.len() {
        return Err(Error::invalid(format!("field index {j} out of range")));
    }
    op.potential(&grads[j])
}

/// `𝓘_α X_j u` at selected node indices.
pub fn riesz_of_hgrad_at(
    op: &RieszOperator,
    u: &GridFunction,
    j: usize,
    outputs: &[usize],
) -> Result<Vec<f64>> {
    let grads = horizontal_gradient(u)?;
    if j >= grads.len() {
        return Err(Error::invalid(format!("field index {j} out of range")));
    }
    op.potential_at(&grads[j], outputs)
}

/// Closed-form Euclidean Riesz kernel constant: `𝓚_α(x) = c_{α,d} |x|^(α-d)`
/// with `c = Γ((d-α)/2) / (Γ(α/2) 4^(α/2) π^(d/2))`, derived by evaluating
/// the subordination integral in closed form.
pub fn euclidean_riesz_constant(d: usize, alpha: f64) -> f64 {
    gamma((d as f64 - alpha) / 2.0)
        / (gamma(alpha / 2.0)
            * 4.0f64.powf(alpha / 2.0)
            * std::f64::consts::PI.powf(d as f64 / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn newtonian_kernel_d3_alpha2() {
        let g = GroupDescriptor::euclidean(3).unwrap();
        let heat = HeatSemigroup::new(g).unwrap();
        let rule = SubordinationRule::standard(2.0);
        for &r in &[0.2, 0.5, 1.0, 2.0] {
            let p = Point::new(&[r, 0.0, 0.0]);
            let got = riesz_kernel(&heat, &rule, &p).unwrap();
            let want = 1.0 / (4.0 * std::f64::consts::PI * r);
            assert_relative_eq!(got, want, max_relative = 0.01);
        }
        assert!(riesz_kernel(&heat, &rule, &Point::zero(3)).is_err());
        assert!(riesz_kernel(&heat, &SubordinationRule::standard(5.0), &Point::zero(3)).is_err());
    }

    #[test]
    fn kernel_homogeneity() {
        // 𝓚_α(δ_r p) = r^(α-Q) 𝓚_α(p)
        for (tag, alpha) in [("euclidean:2", 0.7), ("heisenberg1", 1.2)] {
            let g = GroupDescriptor::from_tag(tag).unwrap();
            let heat = HeatSemigroup::new(g).unwrap();
            let q = g.homogeneous_dimension();
            let rule = SubordinationRule::standard(alpha);
            let p = if g.topological_dimension() == 2 {
                Point::new(&[0.8, -0.5])
            } else {
                Point::new(&[0.8, -0.5, 0.6])
            };
            let base = riesz_kernel(&heat, &rule, &p).unwrap();
            for &r in &[0.5, 2.0] {
                let pd = g.dilate(r, &p).unwrap();
                let got = riesz_kernel(&heat, &rule, &pd).unwrap();
                let want = r.powf(alpha - q) * base;
                assert_relative_eq!(got, want, max_relative = 0.01);
            }
        }
    }

    #[test]
    fn heisenberg_fundamental_solution_is_gauge_power() {
        // α = 2: 𝓚₂ · gauge² is constant (Folland's fundamental solution)
        let g = GroupDescriptor::heisenberg1();
        let heat = HeatSemigroup::new(g).unwrap();
        let rule = SubordinationRule::standard(2.0);
        let pts = [
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 0.5],
            [0.7, 0.7, 0.3],
            [0.3, -0.9, -0.8],
            [1.4, 0.2, 1.0],
        ];
        let mut vals = Vec::new();
        for c in pts {
            let p = Point::new(&c);
            let k = riesz_kernel(&heat, &rule, &p).unwrap();
            let n = g.homogeneous_norm(&p).unwrap();
            vals.push(k * n * n);
        }
        let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        for v in &vals {
            assert!(
                (v - mean).abs() <= 0.02 * mean,
                "gauge-power constancy violated: {vals:?}"
            );
        }
    }

    #[test]
    fn ladder_refinement_is_converged() {
        let g = GroupDescriptor::heisenberg1();
        let heat = HeatSemigroup::new(g).unwrap();
        let p = Point::new(&[0.9, 0.4, -0.5]);
        let coarse = riesz_kernel(&heat, &SubordinationRule::standard(0.5), &p).unwrap();
        let fine = riesz_kernel(
            &heat,
            &SubordinationRule::standard(0.5).with_nodes_per_decade(32),
            &p,
        )
        .unwrap();
        assert!(
            (coarse - fine).abs() <= 2e-3 * fine.abs(),
            "refinement drift {coarse} vs {fine}"
        );
    }

    #[test]
    fn potential_is_linear_and_nonnegative() {
        let g = GroupDescriptor::heisenberg1();
        let heat = HeatSemigroup::new(g).unwrap();
        let spec = GridSpec::symmetric(&[2.0, 2.0, 4.0], &[12, 12, 12]).unwrap();
        let rule = SubordinationRule::standard(0.5);
        let op = RieszOperator::new(&heat, spec, rule).unwrap();
        let f = GridFunction::from_fn(spec, g, |c| {
            let r2 = c[0] * c[0] + c[1] * c[1] + 0.25 * c[2] * c[2];
            if r2 < 1.0 {
                (-r2 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        })
        .unwrap();
        let h = GridFunction::from_fn(spec, g, |c| {
            let r2 = (c[0] - 0.3).powi(2) + c[1] * c[1] + 0.25 * c[2] * c[2];
            if r2 < 0.8 {
                (-r2 / (0.8 - r2)).exp()
            } else {
                0.0
            }
        })
        .unwrap();
        let combo = f.linear_combination(2.0, &h, -0.7).unwrap();
        let pf = op.potential(&f).unwrap();
        let ph = op.potential(&h).unwrap();
        let pc = op.potential(&combo).unwrap();
        for i in 0..spec.num_points() {
            let want = 2.0 * pf.sample(i) - 0.7 * ph.sample(i);
            assert!((pc.sample(i) - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
        // nonnegativity
        assert!(pf.samples().iter().all(|&v| v >= 0.0));
        // zero input stays zero
        let z = GridFunction::zeros(spec, g).unwrap();
        assert!(op.potential(&z).unwrap().samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn euclidean_potential_matches_closed_form_kernel() {
        let d = 2usize;
        let g = GroupDescriptor::euclidean(d).unwrap();
        let heat = HeatSemigroup::new(g).unwrap();
        let spec = GridSpec::symmetric(&[6.0, 6.0], &[72, 72]).unwrap();
        let alpha = 0.5;
        let rule = SubordinationRule::standard(alpha);
        let op = RieszOperator::new(&heat, spec, rule).unwrap();
        let f = GridFunction::from_fn(spec, g, |c| {
            let r2 = c[0] * c[0] + c[1] * c[1];
            if r2 < 2.25 {
                (-r2 / (2.25 - r2)).exp()
            } else {
                0.0
            }
        })
        .unwrap();
        let got = op.potential(&f).unwrap();

        // oracle: direct convolution with the closed-form kernel; the cell
        // containing the singularity gets its exact polar integral (the
        // r^(α-d) mass concentrates at 0 and midpoint sub-sampling misses it),
        // nearby cells get sub-cell averages
        let c_ad = euclidean_riesz_constant(d, alpha);
        let w = spec.cell_weight();
        let h = spec.spacing()[0];
        let n = spec.num_points();
        // (1/h²) ∫_square r^(α-2) dy over [-h/2, h/2]²: polar form
        // 8 ∫_0^{π/4} R(θ)^α / α dθ with R(θ) = (h/2)/cos θ
        let singular_cell = {
            let m = 256;
            let mut acc = 0.0;
            for k in 0..m {
                let th = (k as f64 + 0.5) / m as f64 * std::f64::consts::FRAC_PI_4;
                let rmax = (h / 2.0) / th.cos();
                acc += rmax.powf(alpha) / alpha;
            }
            c_ad * 8.0 * acc * std::f64::consts::FRAC_PI_4 / m as f64 / (h * h)
        };
        let oracle: Vec<f64> = (0..n)
            .map(|i| {
                let xc = spec.coords_of(i);
                let mut acc = 0.0;
                for jdx in 0..n {
                    if f.sample(jdx) == 0.0 {
                        continue;
                    }
                    let yc = spec.coords_of(jdx);
                    let (dx, dy) = (xc[0] - yc[0], xc[1] - yc[1]);
                    let r = (dx * dx + dy * dy).sqrt();
                    let k = if r < 0.5 * h {
                        singular_cell
                    } else if r < 2.5 * h {
                        let m = 12;
                        let mut cell = 0.0;
                        for a in 0..m {
                            for b in 0..m {
                                let ox = dx + ((a as f64 + 0.5) / m as f64 - 0.5) * h;
                                let oy = dy + ((b as f64 + 0.5) / m as f64 - 0.5) * h;
                                let rr = (ox * ox + oy * oy).sqrt().max(1e-12);
                                cell += rr.powf(alpha - d as f64);
                            }
                        }
                        c_ad * cell / (m * m) as f64
                    } else {
                        c_ad * r.powf(alpha - d as f64)
                    };
                    acc += f.sample(jdx) * k;
                }
                acc * w
            })
            .collect();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let xc = spec.coords_of(i);
            if xc[0].abs() <= 3.0 && xc[1].abs() <= 3.0 {
                let rel = (got.sample(i) - oracle[i]).abs() / oracle[i].abs().max(1e-12);
                worst = worst.max(rel);
            }
        }
        assert!(worst <= 0.02, "worst relative gap {worst}");
    }

    #[test]
    fn hgrad_potential_of_constantish_input_is_finite() {
        let g = GroupDescriptor::euclidean(2).unwrap();
        let heat = HeatSemigroup::new(g).unwrap();
        let spec = GridSpec::symmetric(&[3.0, 3.0], &[24, 24]).unwrap();
        let op = RieszOperator::new(&heat, spec, SubordinationRule::standard(0.5)).unwrap();
        let u = GridFunction::from_fn(spec, g, |c| {
            let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
            crate::numeric::smooth_ramp((1.5 - r) / 0.4)
        })
        .unwrap();
        let v = riesz_of_hgrad(&op, &u, 0).unwrap();
        assert!(v.samples().iter().all(|s| s.is_finite()));
        let z = GridFunction::zeros(spec, g).unwrap();
        let vz = riesz_of_hgrad(&op, &z, 1).unwrap();
        assert!(vz.samples().iter().all(|&s| s == 0.0));
    }
}

