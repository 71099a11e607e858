//! Distribution function, decreasing rearrangement, and Lorentz functionals.
//!
//! A sampled function rearranges into a step profile (plateau values with
//! masses), and every norm here is evaluated by closed-form integration over
//! the plateaus — there is no secondary discretization in the t-variable.
//! The f**-based norm at non-integer finite r has no elementary antiderivative
//! on interior plateaus; those few segments fall back to adaptive quadrature
//! at 1e-12 relative accuracy, which is still far below every verdict
//! tolerance in the crate.
//!
//! Conventions: `m(f,y) = |{|f| > y}|`, `f*` is the right-continuous step
//! function with `f*(t) = v_i` on `[M_{i-1}, M_i)`, and
//! `f**(x) = x⁻¹ ∫₀ˣ f*`. Norms: `‖f‖_(q,r) = (∫ [t^(1/q) f**]^r dt/t)^(1/r)`
//! and the quasi-norm `|||f|||` uses `f*` instead.

use crate::error::{Error, Result};
use crate::grid::{convolve, GridFunction};
use crate::numeric::adaptive_quadrature;
use crate::report::{ExperimentReport, TolerancePolicy};
use std::io::Write;

/// Step-function representation of the decreasing rearrangement.
#[derive(Debug, Clone, PartialEq)]
pub struct RearrangementProfile {
    values: Vec<f64>,   // strictly decreasing, positive
    measures: Vec<f64>, // plateau masses
    cum_measure: Vec<f64>,
    cum_integral: Vec<f64>, // ∫₀^{M_i} f*
}

/// A Lorentz functional either evaluates to a finite number or is tagged
/// divergent (+∞); divergent bounds make inequalities vacuous rather than
/// failing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LorentzValue {
    Finite(f64),
    Divergent,
}

impl LorentzValue {
    pub fn value(self) -> f64 {
        match self {
            LorentzValue::Finite(v) => v,
            LorentzValue::Divergent => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            LorentzValue::Finite(v) => Some(v),
            LorentzValue::Divergent => None,
        }
    }
}

/// `m(f, y) = |{|f| > y}|` by direct count over the grid.
pub fn distribution_function(f: &GridFunction, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::invalid(format!("distribution function needs y > 0, got {y}")));
    }
    let w = f.spec().cell_weight();
    Ok(f.samples().iter().filter(|s| s.abs() > y).count() as f64 * w)
}

/// Sort |samples| into a decreasing step profile with exact tie coalescing.
pub fn rearrange(f: &GridFunction) -> RearrangementProfile {
    let w = f.spec().cell_weight();
    let mut mags: Vec<f64> = f
        .samples()
        .iter()
        .map(|s| s.abs())
        .filter(|&s| s > 0.0)
        .collect();
    mags.sort_by(|a, b| b.partial_cmp(a).expect("finite samples"));
    let mut values = Vec::new();
    let mut measures = Vec::new();
    for m in mags {
        if values.last() == Some(&m) {
            *measures.last_mut().unwrap() += w;
        } else {
            values.push(m);
            measures.push(w);
        }
    }
    RearrangementProfile::new(values, measures)
}

impl RearrangementProfile {
    pub fn new(values: Vec<f64>, measures: Vec<f64>) -> Self {
        assert_eq!(values.len(), measures.len());
        let mut cum_measure = Vec::with_capacity(values.len());
        let mut cum_integral = Vec::with_capacity(values.len());
        let (mut m, mut a) = (0.0, 0.0);
        for (v, mu) in values.iter().zip(&measures) {
            m += mu;
            a += v * mu;
            cum_measure.push(m);
            cum_integral.push(a);
        }
        RearrangementProfile {
            values,
            measures,
            cum_measure,
            cum_integral,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn total_measure(&self) -> f64 {
        self.cum_measure.last().copied().unwrap_or(0.0)
    }

    /// `∫₀^∞ f*(t) dt`, which equals `‖f‖₁` by equimeasurability.
    pub fn total_integral(&self) -> f64 {
        self.cum_integral.last().copied().unwrap_or(0.0)
    }

    /// Distribution function of the profile itself.
    pub fn distribution(&self, y: f64) -> f64 {
        // measures of plateaus with value > y
        let mut total = 0.0;
        for (v, m) in self.values.iter().zip(&self.cum_measure) {
            if *v > y {
                total = *m;
            } else {
                break;
            }
        }
        total
    }

    /// Right-continuous step function `f*(t)`.
    pub fn f_star(&self, t: f64) -> f64 {
        if t < 0.0 {
            return self.values.first().copied().unwrap_or(0.0);
        }
        match self
            .cum_measure
            .binary_search_by(|m| m.partial_cmp(&t).unwrap())
        {
            // t == M_i: right-continuity puts it in the next plateau
            Ok(i) => self.values.get(i + 1).copied().unwrap_or(0.0),
            Err(i) => self.values.get(i).copied().unwrap_or(0.0),
        }
    }

    /// `f**(x) = x⁻¹ ∫₀ˣ f*`, exact on the step structure.
    pub fn double_star(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::invalid(format!("f** needs x > 0, got {x}")));
        }
        if self.is_empty() {
            return Ok(0.0);
        }
        let i = match self
            .cum_measure
            .binary_search_by(|m| m.partial_cmp(&x).unwrap())
        {
            Ok(i) => i + 1,
            Err(i) => i,
        };
        if i >= self.values.len() {
            return Ok(self.total_integral() / x);
        }
        let m_prev = if i == 0 { 0.0 } else { self.cum_measure[i - 1] };
        let a_prev = if i == 0 { 0.0 } else { self.cum_integral[i - 1] };
        Ok((a_prev + self.values[i] * (x - m_prev)) / x)
    }

    /// Plateau-wise power `|f|^γ` (masses unchanged).
    pub fn powered(&self, gamma: f64) -> RearrangementProfile {
        RearrangementProfile::new(
            self.values.iter().map(|v| v.powf(gamma)).collect(),
            self.measures.clone(),
        )
    }

    /// Two-column CSV `value,measure`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "value,measure")?;
        for (v, m) in self.values.iter().zip(&self.measures) {
            writeln!(w, "{v:.17e},{m:.17e}")?;
        }
        Ok(())
    }
}

/// Lorentz norm `‖f‖_(q,r)` built on `f**`.
///
/// Finite r needs q > 1 (otherwise the tail `t^(r/q - r - 1)` diverges for
/// any nonzero f, reported as [`LorentzValue::Divergent`]); `r = ∞` accepts
/// q ≥ 1 and returns `sup t^(1/q) f**(t)`.
pub fn lorentz_norm(profile: &RearrangementProfile, q: f64, r: f64) -> Result<LorentzValue> {
    if profile.is_empty() {
        return Ok(LorentzValue::Finite(0.0));
    }
    if r.is_infinite() {
        if !(q >= 1.0) {
            return Err(Error::invalid("lorentz_norm with r = ∞ needs q ≥ 1"));
        }
        return Ok(LorentzValue::Finite(weak_norm_sup(profile, q)));
    }
    if !(r >= 1.0) {
        return Err(Error::invalid(format!("lorentz_norm needs r ≥ 1, got {r}")));
    }
    if q <= 1.0 {
        return Ok(LorentzValue::Divergent);
    }
    let c = 1.0 / q;
    let n = profile.values.len();
    let mut total = 0.0;
    for i in 0..n {
        let m0 = if i == 0 { 0.0 } else { profile.cum_measure[i - 1] };
        let m1 = profile.cum_measure[i];
        let a_prev = if i == 0 { 0.0 } else { profile.cum_integral[i - 1] };
        // f**(t) = b + a/t on this plateau
        let b = profile.values[i];
        let a = a_prev - m0 * b;
        total += segment_power_integral(a, b, c, r, m0, m1)?;
    }
    // tail: f** = A/t on [M_n, ∞), integral converges since q > 1
    let a_total = profile.total_integral();
    let m_last = profile.total_measure();
    total += a_total.powf(r) * m_last.powf(r * c - r) / (r - r * c);
    Ok(LorentzValue::Finite(total.powf(1.0 / r)))
}

/// `sup_t t^(1/q) f**(t)` over the step structure.
fn weak_norm_sup(profile: &RearrangementProfile, q: f64) -> f64 {
    let c = 1.0 / q;
    let n = profile.values.len();
    let mut sup = 0.0f64;
    let eval = |a: f64, b: f64, t: f64| (a + b * t) * t.powf(c - 1.0);
    for i in 0..n {
        let m0 = if i == 0 { 0.0 } else { profile.cum_measure[i - 1] };
        let m1 = profile.cum_measure[i];
        let a_prev = if i == 0 { 0.0 } else { profile.cum_integral[i - 1] };
        let b = profile.values[i];
        let a = a_prev - m0 * b;
        if m0 > 0.0 {
            sup = sup.max(eval(a, b, m0));
        }
        sup = sup.max(eval(a, b, m1));
        if q > 1.0 && b > 0.0 {
            let t_star = a * (q - 1.0) / b;
            if t_star > m0 && t_star < m1 {
                sup = sup.max(eval(a, b, t_star));
            }
        }
    }
    // tail g(t) = A t^(1/q - 1): decreasing for q > 1, constant A for q = 1
    let a_total = profile.total_integral();
    let m_last = profile.total_measure();
    sup = sup.max(if q == 1.0 {
        a_total
    } else {
        a_total * m_last.powf(c - 1.0)
    });
    sup
}

/// `∫_{m0}^{m1} (a t^(c-1) + b t^c)^r dt/t`, exact where elementary.
fn segment_power_integral(a: f64, b: f64, c: f64, r: f64, m0: f64, m1: f64) -> Result<f64> {
    debug_assert!(a >= -1e-12);
    let a = a.max(0.0);
    if m1 <= m0 {
        return Ok(0.0);
    }
    let power_int = |p: f64, lo: f64, hi: f64| -> f64 {
        // ∫ t^(p-1) dt
        if p.abs() < 1e-14 {
            (hi / lo.max(1e-300)).ln()
        } else {
            (hi.powf(p) - lo.powf(p)) / p
        }
    };
    if a == 0.0 {
        return Ok(b.powf(r) * power_int(r * c, m0, m1));
    }
    let r_round = r.round();
    if (r - r_round).abs() < 1e-12 && (1.0..=60.0).contains(&r_round) {
        let ri = r_round as i64;
        let mut total = 0.0;
        let mut binom = 1.0f64;
        for k in 0..=ri {
            if k > 0 {
                binom *= (ri - k + 1) as f64 / k as f64;
            }
            let coeff = binom * a.powi((ri - k) as i32) * b.powi(k as i32);
            total += coeff * power_int(r * c - r + k as f64, m0, m1);
        }
        return Ok(total);
    }
    // non-integer r: smooth positive integrand on the plateau
    adaptive_quadrature(
        &|t: f64| (a * t.powf(c - 1.0) + b * t.powf(c)).powf(r) / t,
        m0.max(1e-300),
        m1,
        1e-12,
        1e-300,
    )
}

/// Quasi-norm `|||f|||_(q,r) = (∫ (t^(1/q) f*)^r dt/t)^(1/r)`, exact for all
/// q, r > 0 on step profiles; `r = ∞` gives `sup t^(1/q) f*(t)`.
pub fn lorentz_quasinorm(profile: &RearrangementProfile, q: f64, r: f64) -> Result<f64> {
    if !(q > 0.0) || !(r > 0.0) {
        return Err(Error::invalid(format!(
            "lorentz_quasinorm needs q, r > 0, got q={q}, r={r}"
        )));
    }
    if profile.is_empty() {
        return Ok(0.0);
    }
    if r.is_infinite() {
        let mut sup = 0.0f64;
        for (v, m) in profile.values.iter().zip(&profile.cum_measure) {
            sup = sup.max(v * m.powf(1.0 / q));
        }
        return Ok(sup);
    }
    let mut total = 0.0;
    for i in 0..profile.values.len() {
        let m0 = if i == 0 { 0.0 } else { profile.cum_measure[i - 1] };
        let m1 = profile.cum_measure[i];
        total += profile.values[i].powf(r) * (q / r) * (m1.powf(r / q) - m0.powf(r / q));
    }
    Ok(total.powf(1.0 / r))
}

/// The equivalent distribution-function form
/// `q^(1/r) (∫ (t · m(f,t)^(1/q))^r dt/t)^(1/r)`, used as an internal oracle
/// against the rearrangement form.
pub fn lorentz_quasinorm_distribution_form(
    profile: &RearrangementProfile,
    q: f64,
    r: f64,
) -> Result<f64> {
    if !(q > 0.0) || !(r > 0.0) || r.is_infinite() {
        return Err(Error::invalid("distribution form needs finite q, r > 0"));
    }
    if profile.is_empty() {
        return Ok(0.0);
    }
    let n = profile.values.len();
    let mut total = 0.0;
    for i in 0..n {
        // m(f, y) = M_i for y ∈ [v_{i+1}, v_i)
        let v_hi = profile.values[i];
        let v_lo = if i + 1 < n { profile.values[i + 1] } else { 0.0 };
        let m = profile.cum_measure[i];
        total += m.powf(r / q) * (v_hi.powf(r) - v_lo.powf(r)) / r;
    }
    Ok((q * total).powf(1.0 / r))
}

/// Exponents for the Lorentz Hölder inequality
/// `‖fg‖_(q,r) ≤ q' ‖f‖_(q1,r1) ‖g‖_(q2,r2)`.
#[derive(Debug, Clone, Copy)]
pub struct HolderExponents {
    pub q1: f64,
    pub r1: f64,
    pub q2: f64,
    pub r2: f64,
    pub q: f64,
    pub r: f64,
}

impl HolderExponents {
    fn validate(&self) -> Result<()> {
        let lhs = 1.0 / self.q1 + 1.0 / self.q2;
        if (lhs - 1.0 / self.q).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "Hölder exponent relation violated: 1/q1 + 1/q2 = {lhs} but 1/q = {}",
                1.0 / self.q
            )));
        }
        if !(1.0 / self.q < 1.0) {
            return Err(Error::invalid(format!(
                "Hölder needs 1/q < 1, got q = {}",
                self.q
            )));
        }
        if 1.0 / self.r1 + 1.0 / self.r2 < 1.0 / self.r - 1e-12 {
            return Err(Error::invalid(format!(
                "Hölder needs 1/r1 + 1/r2 ≥ 1/r, got {} < {}",
                1.0 / self.r1 + 1.0 / self.r2,
                1.0 / self.r
            )));
        }
        if !(self.r >= 1.0) {
            return Err(Error::invalid("Hölder needs r ≥ 1"));
        }
        Ok(())
    }
}

fn conjugate(q: f64) -> f64 {
    q / (q - 1.0)
}

/// Check `‖fg‖_(q,r) ≤ q' ‖f‖_(q1,r1) ‖g‖_(q2,r2)` on a concrete pair.
pub fn holder_lorentz_check(
    f: &GridFunction,
    g: &GridFunction,
    exps: HolderExponents,
) -> Result<ExperimentReport> {
    exps.validate()?;
    f.check_compatible(g)?;
    let product = {
        let samples = f
            .samples()
            .iter()
            .zip(g.samples())
            .map(|(a, b)| a * b)
            .collect();
        GridFunction::from_samples(*f.spec(), *f.group(), samples)?
    };
    let lhs = lorentz_norm(&rearrange(&product), exps.q, exps.r)?.value();
    let nf = lorentz_norm(&rearrange(f), exps.q1, exps.r1)?.value();
    let ng = lorentz_norm(&rearrange(g), exps.q2, exps.r2)?.value();
    let rhs = conjugate(exps.q) * nf * ng;
    Ok(
        ExperimentReport::for_bound(
            "holder_lorentz",
            f.group().tag(),
            None,
            lhs,
            rhs,
            TolerancePolicy::exact(),
        )
        .with_detail("norm_f", nf)
        .with_detail("norm_g", ng)
        .with_detail("constant", conjugate(exps.q)),
    )
}

/// Check O'Neil's convolution inequality
/// `‖f∗g‖_(q,r) ≤ 3q ‖f‖_(q1,r1) ‖g‖_(q2,r2)` with `1/q1 + 1/q2 - 1 = 1/q`.
pub fn young_lorentz_check(
    f: &GridFunction,
    g: &GridFunction,
    exps: HolderExponents,
) -> Result<ExperimentReport> {
    let sum = 1.0 / exps.q1 + 1.0 / exps.q2 - 1.0;
    if (sum - 1.0 / exps.q).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "Young exponent relation violated: 1/q1 + 1/q2 - 1 = {sum} but 1/q = {}",
            1.0 / exps.q
        )));
    }
    if !(exps.q > 1.0 && exps.q.is_finite()) {
        return Err(Error::invalid("Young needs 1 < q < ∞"));
    }
    if 1.0 / exps.r1 + 1.0 / exps.r2 < 1.0 / exps.r - 1e-12 {
        return Err(Error::invalid("Young needs 1/r1 + 1/r2 ≥ 1/r"));
    }
    let conv = convolve(f, g)?;
    let lhs = lorentz_norm(&rearrange(&conv), exps.q, exps.r)?.value();
    let nf = lorentz_norm(&rearrange(f), exps.q1, exps.r1)?.value();
    let ng = lorentz_norm(&rearrange(g), exps.q2, exps.r2)?.value();
    let rhs = 3.0 * exps.q * nf * ng;
    Ok(
        ExperimentReport::for_bound(
            "young_lorentz",
            f.group().tag(),
            None,
            lhs,
            rhs,
            TolerancePolicy::exact(),
        )
        .with_detail("norm_f", nf)
        .with_detail("norm_g", ng)
        .with_detail("constant", 3.0 * exps.q),
    )
}
