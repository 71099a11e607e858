//! Shared numerical utilities: deterministic summation, log-spaced quadrature
//! ladders, adaptive Gauss–Kronrod integration, and the smooth ramp used for
//! mollified indicators.

use crate::error::{Error, Result};

/// Deterministic pairwise tree sum.
///
/// The summation order depends only on the slice layout, never on thread
/// scheduling, so reports built from parallel pipelines hash identically
/// across runs.
pub fn tree_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            tree_sum(&values[..mid]) + tree_sum(&values[mid..])
        }
    }
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Log-spaced quadrature ladder for improper integrals of the form
/// `∫ t^(a-1) F(t) dt` over `[t_min, t_max]`.
///
/// Nodes are uniform in `ln t`; `weight_for(a)` returns trapezoid weights in
/// the log variable with the `t^a` Jacobian factor folded in, so that
/// `Σ_k w_k F(t_k) ≈ ∫ t^(a-1) F(t) dt`.
#[derive(Debug, Clone)]
pub struct LogLadder {
    pub nodes: Vec<f64>,
    pub log_step: f64,
}

impl LogLadder {
    pub fn new(t_min: f64, t_max: f64, nodes_per_decade: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min) {
            return Err(Error::invalid(format!(
                "log ladder needs 0 < t_min < t_max, got [{t_min}, {t_max}]"
            )));
        }
        if nodes_per_decade == 0 {
            return Err(Error::invalid("nodes_per_decade must be positive"));
        }
        let decades = (t_max / t_min).log10();
        let segments = (decades * nodes_per_decade as f64).round().max(1.0) as usize;
        let log_step = (t_max / t_min).ln() / segments as f64;
        let nodes = (0..=segments)
            .map(|k| t_min * (k as f64 * log_step).exp())
            .collect();
        Ok(Self { nodes, log_step })
    }

    /// Trapezoid weight of node `k` for exponent `a`: `Δτ c_k t_k^a`.
    pub fn weights_for(&self, a: f64) -> Vec<f64> {
        let n = self.nodes.len();
        self.nodes
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let c = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                self.log_step * c * t.powf(a)
            })
            .collect()
    }
}

// 15-point Kronrod rule with embedded 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    kronrod *= half;
    gauss *= half;
    (kronrod, (kronrod - gauss).abs())
}

/// Adaptive Gauss–Kronrod quadrature on `[a, b]` by recursive bisection.
pub fn adaptive_quadrature<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        rel_tol: f64,
        abs_tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let (value, err) = gk15(f, a, b);
        if err <= abs_tol + rel_tol * value.abs() {
            return Ok(value);
        }
        if depth == 0 {
            return Err(Error::NumericFailure(format!(
                "adaptive quadrature did not converge on [{a}, {b}]: estimate {value}, error {err}"
            )));
        }
        let mid = 0.5 * (a + b);
        Ok(recurse(f, a, mid, rel_tol, abs_tol * 0.5, depth - 1)?
            + recurse(f, mid, b, rel_tol, abs_tol * 0.5, depth - 1)?)
    }
    recurse(f, a, b, rel_tol, abs_tol, 40)
}

/// Integrate `f` over `[0, ∞)` on dyadic panels `[0,w], [w,2w], [2w,4w], …`,
/// stopping once two consecutive panel contributions fall below
/// `rel_stop` of the accumulated value.
pub fn dyadic_panel_integral<F: Fn(f64) -> f64>(
    f: &F,
    first_width: f64,
    rel_stop: f64,
    panel_rel_tol: f64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut hi = first_width;
    let mut quiet_panels = 0;
    for _ in 0..200 {
        let panel = adaptive_quadrature(f, lo, hi, panel_rel_tol, 1e-300)?;
        total += panel;
        if panel.abs() < rel_stop * total.abs().max(1e-300) {
            quiet_panels += 1;
            if quiet_panels >= 2 {
                return Ok(total);
            }
        } else {
            quiet_panels = 0;
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(Error::NumericFailure(
        "dyadic panel integral did not settle within 200 panels".into(),
    ))
}

/// Quintic ramp: 0 below -1, 1 above +1, C² polynomial in between.
pub fn smooth_ramp(s: f64) -> f64 {
    if s <= -1.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        0.5 + (15.0 * s - 10.0 * s * s * s + 3.0 * s * s * s * s * s) / 16.0
    }
}

/// Derivative of [`smooth_ramp`].
pub fn smooth_ramp_deriv(s: f64) -> f64 {
    if !(-1.0..=1.0).contains(&s) {
        0.0
    } else {
        let q = 1.0 - s * s;
        15.0 * q * q / 16.0
    }
}

/// `n` log-spaced values between `lo` and `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|k| lo * (k as f64 * step).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tree_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert_relative_eq!(tree_sum(&v), naive, max_relative = 1e-12);
    }

    #[test]
    fn gk_integrates_gaussian() {
        let v = adaptive_quadrature(&|x: f64| (-x * x).exp(), -10.0, 10.0, 1e-12, 1e-300).unwrap();
        assert_relative_eq!(v, std::f64::consts::PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn dyadic_panels_integrate_exponential() {
        let v = dyadic_panel_integral(&|x: f64| (-x).exp(), 1.0, 1e-12, 1e-12).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn log_ladder_integrates_power_law() {
        // ∫ t^(a-1) e^(-t) dt with a = 0.5 equals Γ(0.5) minus the [0, t_min] tail,
        // which is 2√t_min - (2/3) t_min^(3/2) + O(t_min^(5/2)).
        let t_min = 1e-6;
        let ladder = LogLadder::new(t_min, 1e3, 32).unwrap();
        let w = ladder.weights_for(0.5);
        let total: f64 = ladder
            .nodes
            .iter()
            .zip(&w)
            .map(|(&t, &wk)| wk * (-t).exp())
            .sum();
        let expected = gamma(0.5) - 2.0 * t_min.sqrt() + (2.0 / 3.0) * t_min.powf(1.5);
        assert_relative_eq!(total, expected, max_relative = 1e-6);
    }

    #[test]
    fn ramp_endpoints_and_midpoint() {
        assert_eq!(smooth_ramp(-1.5), 0.0);
        assert_eq!(smooth_ramp(1.5), 1.0);
        assert_relative_eq!(smooth_ramp(0.0), 0.5);
        assert_relative_eq!(smooth_ramp_deriv(0.0), 15.0 / 16.0);
        assert_relative_eq!(smooth_ramp(0.3) + smooth_ramp(-0.3), 1.0, epsilon = 1e-15);
    }
}
