//! Sets of finite perimeter, horizontal perimeter, the coarea identity, and
//! isoperimetric ratios.
//!
//! A region is a smooth level set `E = {φ > 0}` plus a mollification width;
//! its indicator proxy is `u_ε = σ(φ/ε)` with the quintic ramp σ. The
//! horizontal perimeter is `∫ |X u_ε|`, Richardson-extrapolated over
//! `ε ∈ {2ε₀, ε₀}` (the leading mollification bias of the symmetric ramp is
//! O(ε²)). Level sets of a sampled function are taken as shifted level sets
//! of the same samples, so both sides of the coarea identity see one
//! discretization.

use crate::error::{Error, Result};
use crate::grid::{horizontal_gradient_norm, GridFunction, GridSpec};
use crate::group::{GroupDescriptor, LawTag, Point};
use crate::numeric::{smooth_ramp, tree_sum};
use crate::report::ExperimentReport;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Coordinate ball `{ |x - c| < radius }`.
    EuclideanBall { center: Vec<f64>, radius: f64 },
    /// Gauge ball `{ ‖p‖ < radius }` in the group's homogeneous norm.
    KoranyiBall { radius: f64 },
    /// Axis box `{ |x_a| < half[a] }`.
    Box { half: Vec<f64> },
    /// `{ exp(-|x|²) > threshold }`.
    GaussianSuperlevel { threshold: f64 },
}

/// A set of finite perimeter described by a level-set function and a
/// mollification width.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub shape: Shape,
    pub width: f64,
    pub group: GroupDescriptor,
}

impl RegionSpec {
    pub fn new(shape: Shape, width: f64, group: GroupDescriptor) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::invalid("mollification width must be positive"));
        }
        Ok(RegionSpec { shape, width, group })
    }

    /// Parse a CLI shape: `euclidean-ball r`, `koranyi-ball r`,
    /// `box a b [c]`, `gaussian-superlevel s`.
    pub fn from_cli(
        text: &str,
        width: f64,
        group: GroupDescriptor,
    ) -> Result<Self> {
        let mut parts = text.split_whitespace();
        let name = parts
            .next()
            .ok_or_else(|| Error::invalid("empty shape"))?;
        let params: Vec<f64> = parts
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad shape parameter {t:?}")))
            })
            .collect::<Result<_>>()?;
        let shape = match (name, params.as_slice()) {
            ("euclidean-ball", [r]) => Shape::EuclideanBall {
                center: vec![0.0; group.topological_dimension()],
                radius: *r,
            },
            ("koranyi-ball", [r]) => Shape::KoranyiBall { radius: *r },
            ("box", half) if half.len() == group.topological_dimension() => Shape::Box {
                half: half.to_vec(),
            },
            ("gaussian-superlevel", [s]) => Shape::GaussianSuperlevel { threshold: *s },
            _ => {
                return Err(Error::invalid(format!(
                    "unrecognized shape {text:?} for group {}",
                    group.tag()
                )))
            }
        };
        RegionSpec::new(shape, width, group)
    }

    /// Level-set value φ at a point.
    pub fn level_value(&self, coords: &[f64]) -> f64 {
        match &self.shape {
            Shape::EuclideanBall { center, radius } => {
                let r2: f64 = coords
                    .iter()
                    .zip(center)
                    .map(|(x, c)| (x - c) * (x - c))
                    .sum();
                radius - r2.sqrt()
            }
            Shape::KoranyiBall { radius } => {
                radius - self.group.homogeneous_norm_unchecked(&Point::new(coords))
            }
            Shape::Box { half } => coords
                .iter()
                .zip(half)
                .map(|(x, h)| h - x.abs())
                .fold(f64::INFINITY, f64::min),
            Shape::GaussianSuperlevel { threshold } => {
                let r2: f64 = coords.iter().map(|x| x * x).sum();
                (-r2).exp() - threshold
            }
        }
    }

    /// The group-dilated region `δ_r E` (shape families closed under
    /// dilation only).
    pub fn dilated(&self, r: f64) -> Result<RegionSpec> {
        if !(r > 0.0) {
            return Err(Error::invalid("dilation factor must be positive"));
        }
        let shape = match (&self.shape, self.group.law_tag()) {
            (Shape::KoranyiBall { radius }, _) => Shape::KoranyiBall { radius: r * radius },
            (Shape::EuclideanBall { center, radius }, LawTag::Euclidean) => Shape::EuclideanBall {
                center: center.iter().map(|c| c * r).collect(),
                radius: r * radius,
            },
            (Shape::Box { half }, _) => {
                let exps = self.group.dilation_exponents();
                Shape::Box {
                    half: half
                        .iter()
                        .zip(exps)
                        .map(|(h, &e)| h * r.powi(e as i32))
                        .collect(),
                }
            }
            (shape, law) => {
                return Err(Error::invalid(format!(
                    "shape {shape:?} is not dilation-closed on {law:?}"
                )))
            }
        };
        // width scales with r so the mollified boundary layer dilates too
        RegionSpec::new(shape, self.width * r, self.group)
    }
}

/// `u_ε = σ(φ/ε)`; rejects regions without a zero margin at the box faces.
pub fn mollified_indicator(region: &RegionSpec, spec: &GridSpec) -> Result<GridFunction> {
    let eps = region.width;
    let r = region.clone();
    let u = GridFunction::from_fn(*spec, region.group, move |c| {
        smooth_ramp(r.level_value(c) / eps)
    })?;
    if !u.has_margin(2, 1e-9) {
        return Err(Error::invalid(
            "region is not compactly contained in the grid box (margin < 2 cells)",
        ));
    }
    Ok(u)
}

/// Richardson-extrapolated horizontal perimeter with an ε-drift diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct PerimeterEstimate {
    pub value: f64,
    /// Relative change between the ε and 2ε evaluations.
    pub drift: f64,
    /// Set when the drift exceeds 10%.
    pub warn: bool,
}

/// `∫ |X u_ε|` of a mollified indicator.
pub fn perimeter_of_mollified(u: &GridFunction) -> Result<f64> {
    Ok(horizontal_gradient_norm(u)?.integrate())
}

/// Horizontal perimeter of a region: `P ≈ (4 P(ε) − P(2ε)) / 3`.
pub fn horizontal_perimeter(region: &RegionSpec, spec: &GridSpec) -> Result<PerimeterEstimate> {
    let p1 = perimeter_of_mollified(&mollified_indicator(region, spec)?)?;
    let coarse = RegionSpec::new(region.shape.clone(), 2.0 * region.width, region.group)?;
    let p2 = perimeter_of_mollified(&mollified_indicator(&coarse, spec)?)?;
    let value = (4.0 * p1 - p2) / 3.0;
    let drift = if value.abs() > 0.0 {
        (p1 - p2).abs() / value.abs()
    } else {
        0.0
    };
    Ok(PerimeterEstimate {
        value,
        drift,
        warn: drift > 0.10,
    })
}

/// Coarea identity `∫|Xu| = ∫ Per({u > t}) dt` on a sampled function, with
/// the superlevel sets mollified through the same samples.
pub fn coarea_check(u: &GridFunction) -> Result<ExperimentReport> {
    let lhs = horizontal_gradient_norm(u)?.integrate();
    let u_max = u.samples().iter().cloned().fold(0.0f64, f64::max);
    let u_min = u.samples().iter().cloned().fold(0.0f64, f64::min);
    if u_max - u_min <= 0.0 {
        return Ok(ExperimentReport::for_identity(
            "coarea",
            u.group().tag(),
            None,
            0.0,
            0.0,
            0.02,
            "both sides vanish for constant input",
        ));
    }
    // midpoint t-nodes over [u_min - ε, u_max]; ε tied to the node spacing so
    // the σ' bumps telescope across levels
    let n_nodes = 64usize;
    let dt = (u_max - u_min) / (n_nodes as f64 - 2.5);
    let eps = 2.5 * dt;
    let lo = u_min - eps;
    let spec = *u.spec();
    let group = *u.group();
    let per_level: Vec<f64> = (0..n_nodes)
        .map(|k| {
            let t = lo + (k as f64 + 0.5) * dt;
            let slice = GridFunction::from_samples(
                spec,
                group,
                u.samples()
                    .iter()
                    .map(|&s| smooth_ramp((s - t) / eps))
                    .collect(),
            )?;
            perimeter_of_mollified(&slice)
        })
        .collect::<Result<_>>()?;
    let rhs = tree_sum(&per_level) * dt;
    Ok(ExperimentReport::for_identity(
        "coarea",
        group.tag(),
        None,
        lhs,
        rhs,
        0.02,
        "level quadrature with matched mollification",
    )
    .with_detail("epsilon", eps)
    .with_detail("t_nodes", n_nodes as f64))
}

/// Isoperimetric ratio `ρ(E) = |E|^(1-1/Q) / Per_H(E)` and its dilation
/// invariance over `r ∈ {1/2, 1, 2}` (pass when the drift stays below 1%).
pub fn isoperimetric_ratio(region: &RegionSpec, spec: &GridSpec) -> Result<ExperimentReport> {
    let q = region.group.homogeneous_dimension();
    let rho = |reg: &RegionSpec| -> Result<f64> {
        let u = mollified_indicator(reg, spec)?;
        let volume = u.integrate();
        let per = horizontal_perimeter(reg, spec)?;
        if !(per.value > 1e-12) {
            return Err(Error::invalid("degenerate region: vanishing perimeter"));
        }
        Ok(volume.powf(1.0 - 1.0 / q) / per.value)
    };
    let base = rho(region)?;
    let mut worst = 0.0f64;
    let mut dilated_rhos = Vec::new();
    for &r in &[0.5, 2.0] {
        let r_rho = rho(&region.dilated(r)?)?;
        worst = worst.max((r_rho / base - 1.0).abs());
        dilated_rhos.push((r, r_rho));
    }
    let mut out = ExperimentReport::for_identity(
        "isoperimetric_ratio",
        region.group.tag(),
        None,
        base * (1.0 + worst),
        base,
        0.01,
        "dilation invariance of the isoperimetric ratio",
    )
    .with_detail("rho", base)
    .with_detail("max_dilation_drift", worst);
    for (r, v) in dilated_rhos {
        out.details.insert(format!("rho_dilated_{r}"), v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn euclid2() -> GroupDescriptor {
        GroupDescriptor::euclidean(2).unwrap()
    }

    #[test]
    fn indicator_values_and_volume() {
        let g = euclid2();
        let spec = GridSpec::symmetric(&[2.5, 2.5], &[128, 128]).unwrap();
        let region = RegionSpec::new(
            Shape::EuclideanBall {
                center: vec![0.0, 0.0],
                radius: 1.0,
            },
            0.05,
            g,
        )
        .unwrap();
        let u = mollified_indicator(&region, &spec).unwrap();
        let center = spec.index_of(&[64, 64]);
        assert_eq!(u.sample(center), 1.0);
        assert_eq!(u.sample(spec.index_of(&[4, 4])), 0.0);
        assert!((u.integrate() - std::f64::consts::PI).abs() <= 0.05);
        // monotonicity in φ: a smaller ball is dominated pointwise
        let smaller = RegionSpec::new(
            Shape::EuclideanBall {
                center: vec![0.0, 0.0],
                radius: 0.8,
            },
            0.05,
            g,
        )
        .unwrap();
        let us = mollified_indicator(&smaller, &spec).unwrap();
        for (a, b) in us.samples().iter().zip(u.samples()) {
            assert!(*a <= b + 1e-15);
        }
    }

    #[test]
    fn margin_violation_rejected() {
        let g = euclid2();
        let spec = GridSpec::symmetric(&[1.0, 1.0], &[32, 32]).unwrap();
        let region = RegionSpec::new(
            Shape::EuclideanBall {
                center: vec![0.0, 0.0],
                radius: 1.1,
            },
            0.05,
            g,
        )
        .unwrap();
        assert!(mollified_indicator(&region, &spec).is_err());
    }

    #[test]
    fn disk_perimeter_matches_classical_value() {
        let g = euclid2();
        let spec = GridSpec::symmetric(&[2.5, 2.5], &[128, 128]).unwrap();
        let region = RegionSpec::new(
            Shape::EuclideanBall {
                center: vec![0.0, 0.0],
                radius: 1.0,
            },
            0.08,
            g,
        )
        .unwrap();
        let p = horizontal_perimeter(&region, &spec).unwrap();
        assert!(!p.warn, "drift {}", p.drift);
        assert_relative_eq!(p.value, 2.0 * std::f64::consts::PI, max_relative = 0.02);
    }

    #[test]
    fn perimeter_dilation_scaling() {
        // Per(δ_r E) = r^(Q-1) Per(E)
        let g = euclid2();
        let spec = GridSpec::symmetric(&[4.0, 4.0], &[128, 128]).unwrap();
        let region = RegionSpec::new(
            Shape::EuclideanBall {
                center: vec![0.0, 0.0],
                radius: 1.0,
            },
            0.08,
            g,
        )
        .unwrap();
        let base = horizontal_perimeter(&region, &spec).unwrap().value;
        for &r in &[0.5f64, 2.0] {
            let per = horizontal_perimeter(&region.dilated(r).unwrap(), &spec)
                .unwrap()
                .value;
            assert_relative_eq!(per, r.powf(1.0) * base, max_relative = 0.01);
        }
    }

    #[test]
    fn coarea_on_cone_bump() {
        let g = euclid2();
        let spec = GridSpec::symmetric(&[2.0, 2.0], &[128, 128]).unwrap();
        // mollified cone (1 - |x|)₊, both sides ≈ π for the radial profile
        let u = GridFunction::from_fn(spec, g, |c| {
            let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
            let v: f64 = 1.0 - r;
            // soften the tip and the rim with the ramp
            v.clamp(0.0, 1.0) * smooth_ramp((1.0 - r) / 0.08)
        })
        .unwrap();
        let rep = coarea_check(&u).unwrap();
        assert!(rep.passed(), "coarea gap: {} vs {}", rep.lhs, rep.rhs);
        // homogeneity under u → c·u
        let rep5 = coarea_check(&u.scaled(5.0)).unwrap();
        assert_relative_eq!(rep5.lhs, 5.0 * rep.lhs, max_relative = 1e-12);
        assert_relative_eq!(rep5.rhs, 5.0 * rep.rhs, max_relative = 5e-3);
        // zero input is vacuous
        let z = GridFunction::zeros(spec, g).unwrap();
        let repz = coarea_check(&z).unwrap();
        assert!(repz.passed());
    }

    #[test]
    fn disk_beats_square_and_ratio_value() {
        let g = euclid2();
        let spec = GridSpec::symmetric(&[4.0, 4.0], &[128, 128]).unwrap();
        let disk = RegionSpec::new(
            Shape::EuclideanBall {
                center: vec![0.0, 0.0],
                radius: 1.0,
            },
            0.16,
            g,
        )
        .unwrap();
        let rep = isoperimetric_ratio(&disk, &spec).unwrap();
        assert!(rep.passed(), "dilation drift {:?}", rep.details);
        let rho_disk = rep.details["rho"];
        assert_relative_eq!(
            rho_disk,
            1.0 / (2.0 * std::f64::consts::PI.sqrt()),
            max_relative = 0.02
        );
        // square of the same area π: side √π
        let half = std::f64::consts::PI.sqrt() / 2.0;
        let square = RegionSpec::new(
            Shape::Box {
                half: vec![half, half],
            },
            0.16,
            g,
        )
        .unwrap();
        let rep_sq = isoperimetric_ratio(&square, &spec).unwrap();
        assert!(rho_disk > rep_sq.details["rho"]);
    }

    #[test]
    fn koranyi_ball_ratio_is_dilation_invariant() {
        // anisotropic grid: the gauge ball's central thickness is R²/4, so the
        // u-axis needs most of the resolution
        let g = GroupDescriptor::heisenberg1();
        let spec = GridSpec::symmetric(&[3.4, 3.4, 2.6], &[48, 48, 96]).unwrap();
        let ball = RegionSpec::new(Shape::KoranyiBall { radius: 1.1 }, 0.2, g).unwrap();
        let rep = isoperimetric_ratio(&ball, &spec).unwrap();
        assert!(
            rep.passed(),
            "H¹ dilation drift {}",
            rep.details["max_dilation_drift"]
        );
        // perimeter scales like r^(Q-1) = r³
        let base = horizontal_perimeter(&ball, &spec).unwrap().value;
        let twice = horizontal_perimeter(&ball.dilated(2.0).unwrap(), &spec)
            .unwrap()
            .value;
        assert_relative_eq!(twice, 8.0 * base, max_relative = 0.01);
    }
}
