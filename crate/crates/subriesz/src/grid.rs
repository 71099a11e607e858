//! Sampled functions on rectangular coordinate grids: Haar quadrature, group
//! convolution, horizontal differentiation, and (de)serialization.
//!
//! Nodes sit at `lower + i·spacing` along each axis (`i` in `0..resolution`)
//! and every node carries the same quadrature weight `Π spacing`. Samples are
//! stored with the last coordinate varying fastest. Functions are extended by
//! zero outside the box; test functions keep a support margin so this is
//! harmless.

use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, Point, MAX_DIM};
use crate::numeric::tree_sum;
use rayon::prelude::*;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    lower: [f64; MAX_DIM],
    upper: [f64; MAX_DIM],
    resolution: [usize; MAX_DIM],
    spacing: [f64; MAX_DIM],
    dim: usize,
}

impl GridSpec {
    pub fn new(lower: &[f64], upper: &[f64], resolution: &[usize]) -> Result<Self> {
        let dim = lower.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::invalid(format!("grid dimension must be 1..={MAX_DIM}")));
        }
        if upper.len() != dim || resolution.len() != dim {
            return Err(Error::invalid("lower/upper/resolution length mismatch"));
        }
        let mut spec = GridSpec {
            lower: [0.0; MAX_DIM],
            upper: [0.0; MAX_DIM],
            resolution: [1; MAX_DIM],
            spacing: [1.0; MAX_DIM],
            dim,
        };
        for a in 0..dim {
            if !(upper[a] > lower[a]) {
                return Err(Error::invalid(format!(
                    "axis {a}: upper ({}) must exceed lower ({})",
                    upper[a], lower[a]
                )));
            }
            if resolution[a] == 0 {
                return Err(Error::invalid(format!("axis {a}: resolution must be positive")));
            }
            spec.lower[a] = lower[a];
            spec.upper[a] = upper[a];
            spec.resolution[a] = resolution[a];
            spec.spacing[a] = (upper[a] - lower[a]) / resolution[a] as f64;
        }
        Ok(spec)
    }

    /// Symmetric box `[-half, half]^d` with `n` nodes per axis.
    pub fn symmetric(half: &[f64], n: &[usize]) -> Result<Self> {
        let lower: Vec<f64> = half.iter().map(|h| -h).collect();
        let upper: Vec<f64> = half.to_vec();
        GridSpec::new(&lower, &upper, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim]
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().iter().cloned().fold(0.0, f64::max)
    }

    pub fn cell_weight(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn num_points(&self) -> usize {
        self.resolution().iter().product()
    }

    pub fn node(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + i as f64 * self.spacing[axis]
    }

    /// Strides for flat indexing, last axis fastest.
    pub fn strides(&self) -> [usize; MAX_DIM] {
        let mut s = [1usize; MAX_DIM];
        for a in (0..self.dim.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.resolution[a + 1];
        }
        s
    }

    pub fn index_of(&self, multi: &[usize]) -> usize {
        let strides = self.strides();
        multi
            .iter()
            .enumerate()
            .map(|(a, &i)| i * strides[a])
            .sum()
    }

    pub fn multi_of(&self, mut index: usize) -> [usize; MAX_DIM] {
        let strides = self.strides();
        let mut multi = [0usize; MAX_DIM];
        for a in 0..self.dim {
            multi[a] = index / strides[a];
            index %= strides[a];
        }
        multi
    }

    pub fn coords_of(&self, index: usize) -> [f64; MAX_DIM] {
        let multi = self.multi_of(index);
        let mut c = [0.0; MAX_DIM];
        for a in 0..self.dim {
            c[a] = self.node(a, multi[a]);
        }
        c
    }

    pub fn point_of(&self, index: usize) -> Point {
        let c = self.coords_of(index);
        Point::new(&c[..self.dim])
    }

    /// Scale the box by the group dilation δ_r, keeping node counts.
    pub fn dilated(&self, group: &GroupDescriptor, r: f64) -> Result<GridSpec> {
        if self.dim != group.topological_dimension() {
            return Err(Error::DimensionMismatch {
                expected: group.topological_dimension(),
                got: self.dim,
            });
        }
        let exps = group.dilation_exponents();
        let lower: Vec<f64> = (0..self.dim)
            .map(|a| self.lower[a] * r.powi(exps[a] as i32))
            .collect();
        let upper: Vec<f64> = (0..self.dim)
            .map(|a| self.upper[a] * r.powi(exps[a] as i32))
            .collect();
        GridSpec::new(&lower, &upper, self.resolution())
    }
}

/// A real-valued function sampled on a grid, tied to a group.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    group: GroupDescriptor,
    samples: Vec<f64>,
}

impl GridFunction {
    pub fn from_samples(spec: GridSpec, group: GroupDescriptor, samples: Vec<f64>) -> Result<Self> {
        if spec.dim() != group.topological_dimension() {
            return Err(Error::DimensionMismatch {
                expected: group.topological_dimension(),
                got: spec.dim(),
            });
        }
        if samples.len() != spec.num_points() {
            return Err(Error::invalid(format!(
                "sample count {} does not match grid size {}",
                samples.len(),
                spec.num_points()
            )));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample {bad}")));
        }
        Ok(GridFunction { spec, group, samples })
    }

    pub fn zeros(spec: GridSpec, group: GroupDescriptor) -> Result<Self> {
        let n = spec.num_points();
        GridFunction::from_samples(spec, group, vec![0.0; n])
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64 + Sync>(
        spec: GridSpec,
        group: GroupDescriptor,
        f: F,
    ) -> Result<Self> {
        let n = spec.num_points();
        let samples: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|idx| {
                let c = spec.coords_of(idx);
                f(&c[..spec.dim()])
            })
            .collect();
        GridFunction::from_samples(spec, group, samples)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample(&self, index: usize) -> f64 {
        self.samples[index]
    }

    /// Pointwise map (same grid).
    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> GridFunction {
        GridFunction {
            spec: self.spec,
            group: self.group,
            samples: self.samples.iter().map(|&s| f(s)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        self.map(|s| c * s)
    }

    /// Linear combination a·self + b·other (same grid).
    pub fn linear_combination(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        self.check_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Ok(GridFunction {
            spec: self.spec,
            group: self.group,
            samples,
        })
    }

    pub fn check_compatible(&self, other: &GridFunction) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch("grid specs differ".into()));
        }
        if self.group != other.group {
            return Err(Error::GridMismatch("groups differ".into()));
        }
        Ok(())
    }

    /// Haar quadrature: Σ samples × cell weight, pairwise-summed.
    pub fn integrate(&self) -> f64 {
        tree_sum(&self.samples) * self.spec.cell_weight()
    }

    /// Quadrature p-norm; `p = ∞` returns the max absolute sample.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_infinite() && p > 0.0 {
            return Ok(self
                .samples
                .iter()
                .fold(0.0f64, |m, &s| m.max(s.abs())));
        }
        if !(p >= 1.0) {
            return Err(Error::invalid(format!("lp_norm needs p >= 1, got {p}")));
        }
        let powers: Vec<f64> = self.samples.iter().map(|s| s.abs().powf(p)).collect();
        Ok((tree_sum(&powers) * self.spec.cell_weight()).powf(1.0 / p))
    }

    /// Multilinear interpolation at arbitrary coordinates, zero outside.
    pub fn interpolate(&self, coords: &[f64]) -> f64 {
        interpolate_raw(&self.spec, &self.samples, coords)
    }

    /// Flat indices of samples with |value| above `threshold`.
    pub fn support_indices(&self, threshold: f64) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.abs() > threshold)
            .map(|(i, _)| i)
            .collect()
    }

    /// True when every sample within `shells` nodes of a box face is below
    /// `tol` in absolute value.
    pub fn has_margin(&self, shells: usize, tol: f64) -> bool {
        let res = self.spec.resolution();
        let d = self.spec.dim();
        self.samples.iter().enumerate().all(|(idx, &s)| {
            if s.abs() <= tol {
                return true;
            }
            let multi = self.spec.multi_of(idx);
            (0..d).all(|a| multi[a] >= shells && multi[a] + shells < res[a])
        })
    }
}

pub(crate) fn interpolate_raw(spec: &GridSpec, samples: &[f64], coords: &[f64]) -> f64 {
    let d = spec.dim();
    let mut base = [0usize; MAX_DIM];
    let mut frac = [0.0f64; MAX_DIM];
    for a in 0..d {
        let t = (coords[a] - spec.lower[a]) / spec.spacing[a];
        if !(t >= -1.0 && t <= spec.resolution[a] as f64) {
            return 0.0;
        }
        let i = t.floor();
        base[a] = i as isize as usize; // may wrap for i = -1; masked below
        frac[a] = t - i;
        if i < 0.0 {
            base[a] = usize::MAX; // sentinel: below the grid
        }
    }
    let strides = spec.strides();
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut weight = 1.0;
        let mut index = 0usize;
        let mut inside = true;
        for a in 0..d {
            let hi = (corner >> a) & 1 == 1;
            let ia = if base[a] == usize::MAX {
                if hi {
                    0
                } else {
                    inside = false;
                    break;
                }
            } else {
                base[a] + hi as usize
            };
            if ia >= spec.resolution[a] {
                inside = false;
                break;
            }
            weight *= if hi { frac[a] } else { 1.0 - frac[a] };
            index += ia * strides[a];
        }
        if inside && weight != 0.0 {
            acc += weight * samples[index];
        }
    }
    acc
}

/// Group convolution `(f∗g)(x) = Σ_y f(x·y⁻¹) g(y) · cell_weight`.
///
/// On aligned Euclidean grids `x·y⁻¹ = x−y` lands on the lattice and no
/// interpolation happens; otherwise `f` is read multilinearly (zero outside
/// the box). Direct `O(N²)` sum, parallel over output nodes.
pub fn convolve(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    f.check_compatible(g)?;
    let points: Vec<usize> = (0..f.spec.num_points()).collect();
    let samples = convolve_at_indices(f, g, &points)?;
    GridFunction::from_samples(f.spec, f.group, samples)
}

/// Offsets `m_a = -lower_a / spacing_a` when they are integers; the Euclidean
/// lattice-aligned path needs them.
fn alignment_offsets(spec: &GridSpec) -> Option<[isize; MAX_DIM]> {
    let mut m = [0isize; MAX_DIM];
    for a in 0..spec.dim() {
        let raw = -spec.lower[a] / spec.spacing[a];
        let rounded = raw.round();
        if (raw - rounded).abs() > 1e-9 {
            return None;
        }
        m[a] = rounded as isize;
    }
    Some(m)
}

fn convolve_at_indices(f: &GridFunction, g: &GridFunction, outputs: &[usize]) -> Result<Vec<f64>> {
    let spec = &f.spec;
    let d = spec.dim();
    let w = spec.cell_weight();
    let n = spec.num_points();
    let euclidean_aligned = matches!(f.group.law_tag(), crate::group::LawTag::Euclidean)
        .then(|| alignment_offsets(spec))
        .flatten();

    let result: Vec<f64> = outputs
        .par_iter()
        .map(|&out_idx| {
            let xm = spec.multi_of(out_idx);
            let xc = spec.coords_of(out_idx);
            if let Some(m) = euclidean_aligned {
                // f[(i - j) + m] g[j], pure index arithmetic.
                let strides = spec.strides();
                let mut acc = 0.0;
                let mut multi = [0usize; MAX_DIM];
                for j in 0..n {
                    let gj = g.samples[j];
                    if gj == 0.0 {
                        // advance multi-index
                        bump(&mut multi, spec.resolution(), d);
                        continue;
                    }
                    let mut idx = 0usize;
                    let mut inside = true;
                    for a in 0..d {
                        let k = xm[a] as isize - multi[a] as isize + m[a];
                        if k < 0 || k >= spec.resolution[a] as isize {
                            inside = false;
                            break;
                        }
                        idx += k as usize * strides[a];
                    }
                    if inside {
                        acc += f.samples[idx] * gj;
                    }
                    bump(&mut multi, spec.resolution(), d);
                }
                acc * w
            } else {
                // generic path: f read at x·y⁻¹ by interpolation
                let mut acc = 0.0;
                for j in 0..n {
                    let gj = g.samples[j];
                    if gj == 0.0 {
                        continue;
                    }
                    let yc = spec.coords_of(j);
                    let p = group_quotient(&f.group, &xc, &yc);
                    acc += interpolate_raw(spec, &f.samples, &p[..d]) * gj;
                }
                acc * w
            }
        })
        .collect();
    Ok(result)
}

#[inline]
fn bump(multi: &mut [usize; MAX_DIM], res: &[usize], d: usize) {
    for a in (0..d).rev() {
        multi[a] += 1;
        if multi[a] < res[a] {
            return;
        }
        multi[a] = 0;
    }
}

/// Coordinates of `x · y⁻¹`.
#[inline]
pub(crate) fn group_quotient(
    group: &GroupDescriptor,
    x: &[f64; MAX_DIM],
    y: &[f64; MAX_DIM],
) -> [f64; MAX_DIM] {
    let mut out = [0.0; MAX_DIM];
    match group.law_tag() {
        crate::group::LawTag::Euclidean => {
            for a in 0..group.topological_dimension() {
                out[a] = x[a] - y[a];
            }
        }
        crate::group::LawTag::Heisenberg1 => {
            out[0] = x[0] - y[0];
            out[1] = x[1] - y[1];
            out[2] = x[2] - y[2] - 0.5 * (x[0] * y[1] - x[1] * y[0]);
        }
    }
    out
}

/// Convolution evaluated only at the given points; cost O(|points|·N).
pub fn evaluate_convolution_at(
    f: &GridFunction,
    g: &GridFunction,
    points: &[Point],
) -> Result<Vec<f64>> {
    f.check_compatible(g)?;
    let spec = &f.spec;
    let d = spec.dim();
    let w = spec.cell_weight();
    let n = spec.num_points();
    points
        .iter()
        .map(|p| {
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.dim(),
                });
            }
            let mut xc = [0.0; MAX_DIM];
            xc[..d].copy_from_slice(p.coords());
            let mut acc = 0.0;
            for j in 0..n {
                let gj = g.samples[j];
                if gj == 0.0 {
                    continue;
                }
                let yc = spec.coords_of(j);
                let q = group_quotient(&f.group, &xc, &yc);
                acc += interpolate_raw(spec, &f.samples, &q[..d]) * gj;
            }
            Ok(acc * w)
        })
        .collect()
}

/// Partial derivative along a coordinate axis: centered second-order stencil
/// in the interior, one-sided second-order at the box faces.
pub fn partial_derivative(u: &GridFunction, axis: usize) -> Result<GridFunction> {
    let spec = &u.spec;
    let d = spec.dim();
    if axis >= d {
        return Err(Error::invalid(format!("axis {axis} out of range")));
    }
    if spec.resolution[axis] < 3 {
        return Err(Error::invalid(format!(
            "axis {axis}: resolution {} < 3, cannot difference",
            spec.resolution[axis]
        )));
    }
    let h = spec.spacing[axis];
    let stride = spec.strides()[axis];
    let n_axis = spec.resolution[axis];
    let n = spec.num_points();
    let s = &u.samples;
    let samples: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let i = (idx / stride) % n_axis;
            if i == 0 {
                (-3.0 * s[idx] + 4.0 * s[idx + stride] - s[idx + 2 * stride]) / (2.0 * h)
            } else if i == n_axis - 1 {
                (3.0 * s[idx] - 4.0 * s[idx - stride] + s[idx - 2 * stride]) / (2.0 * h)
            } else {
                (s[idx + stride] - s[idx - stride]) / (2.0 * h)
            }
        })
        .collect();
    GridFunction::from_samples(*spec, u.group, samples)
}

/// Horizontal gradient `(X₁u, …, X_n u)` via the coefficient form of the
/// fields, e.g. on H¹: `X₁u = ∂_x u − (y/2) ∂_u u`.
pub fn horizontal_gradient(u: &GridFunction) -> Result<Vec<GridFunction>> {
    let d = u.spec.dim();
    let partials: Vec<GridFunction> = (0..d)
        .map(|a| partial_derivative(u, a))
        .collect::<Result<_>>()?;
    let group = u.group;
    (0..group.horizontal_count())
        .map(|j| {
            let samples: Vec<f64> = (0..u.spec.num_points())
                .into_par_iter()
                .map(|idx| {
                    let c = u.spec.coords_of(idx);
                    let p = Point::new(&c[..d]);
                    let coeff = group
                        .horizontal_coefficients(j, &p)
                        .expect("validated field index");
                    (0..d).map(|a| coeff[a] * partials[a].samples[idx]).sum()
                })
                .collect();
            GridFunction::from_samples(u.spec, group, samples)
        })
        .collect()
}

/// Pointwise Euclidean length of the horizontal gradient, `|Xu|`.
pub fn horizontal_gradient_norm(u: &GridFunction) -> Result<GridFunction> {
    let grads = horizontal_gradient(u)?;
    let n = u.spec.num_points();
    let samples: Vec<f64> = (0..n)
        .map(|idx| {
            grads
                .iter()
                .map(|g| g.samples[idx] * g.samples[idx])
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    GridFunction::from_samples(u.spec, u.group, samples)
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

const BIN_MAGIC: &[u8; 4] = b"SRGF";
const FORMAT_VERSION: u32 = 1;

impl GridFunction {
    /// CSV with a `#`-prefixed header (bounds, resolution, group tag); one
    /// sample per line, last coordinate fastest.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# subriesz grid v{FORMAT_VERSION}")?;
        writeln!(w, "# group {}", self.group.tag())?;
        let fmt = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.17e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(w, "# lower {}", fmt(self.spec.lower()))?;
        writeln!(w, "# upper {}", fmt(self.spec.upper()))?;
        writeln!(
            w,
            "# resolution {}",
            self.spec
                .resolution()
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )?;
        for s in &self.samples {
            writeln!(w, "{s:.17e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut group = None;
        let mut lower = None;
        let mut upper = None;
        let mut resolution = None;
        let mut samples = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("group ") {
                    group = Some(GroupDescriptor::from_tag(v.trim())?);
                } else if let Some(v) = rest.strip_prefix("lower ") {
                    lower = Some(parse_floats(v)?);
                } else if let Some(v) = rest.strip_prefix("upper ") {
                    upper = Some(parse_floats(v)?);
                } else if let Some(v) = rest.strip_prefix("resolution ") {
                    resolution = Some(
                        v.split_whitespace()
                            .map(|t| {
                                t.parse::<usize>().map_err(|_| {
                                    Error::Serialization(format!("bad resolution entry {t:?}"))
                                })
                            })
                            .collect::<Result<Vec<_>>>()?,
                    );
                }
                continue;
            }
            samples.push(
                line.parse::<f64>()
                    .map_err(|_| Error::Serialization(format!("bad sample line {line:?}")))?,
            );
        }
        let group = group.ok_or_else(|| Error::Serialization("missing group header".into()))?;
        let lower = lower.ok_or_else(|| Error::Serialization("missing lower header".into()))?;
        let upper = upper.ok_or_else(|| Error::Serialization("missing upper header".into()))?;
        let resolution =
            resolution.ok_or_else(|| Error::Serialization("missing resolution header".into()))?;
        let spec = GridSpec::new(&lower, &upper, &resolution)?;
        GridFunction::from_samples(spec, group, samples)
    }

    /// Flat little-endian binary with a fixed header.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(BIN_MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let tag = self.group.tag();
        w.write_all(&(tag.len() as u32).to_le_bytes())?;
        w.write_all(tag.as_bytes())?;
        w.write_all(&(self.spec.dim() as u32).to_le_bytes())?;
        for a in 0..self.spec.dim() {
            w.write_all(&self.spec.lower[a].to_le_bytes())?;
            w.write_all(&self.spec.upper[a].to_le_bytes())?;
            w.write_all(&(self.spec.resolution[a] as u64).to_le_bytes())?;
        }
        for s in &self.samples {
            w.write_all(&s.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BIN_MAGIC {
            return Err(Error::Serialization("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Serialization(format!("unsupported version {version}")));
        }
        let tag_len = read_u32(&mut r)? as usize;
        if tag_len > 64 {
            return Err(Error::Serialization("group tag too long".into()));
        }
        let mut tag = vec![0u8; tag_len];
        r.read_exact(&mut tag)?;
        let tag = String::from_utf8(tag).map_err(|e| Error::Serialization(e.to_string()))?;
        let group = GroupDescriptor::from_tag(&tag)?;
        let dim = read_u32(&mut r)? as usize;
        let mut lower = vec![0.0; dim];
        let mut upper = vec![0.0; dim];
        let mut resolution = vec![0usize; dim];
        for a in 0..dim {
            lower[a] = read_f64(&mut r)?;
            upper[a] = read_f64(&mut r)?;
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            resolution[a] = u64::from_le_bytes(b) as usize;
        }
        let spec = GridSpec::new(&lower, &upper, &resolution)?;
        let mut samples = vec![0.0; spec.num_points()];
        for s in samples.iter_mut() {
            *s = read_f64(&mut r)?;
        }
        GridFunction::from_samples(spec, group, samples)
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn write_binary_file(&self, path: &Path) -> Result<()> {
        self.write_binary(std::fs::File::create(path)?)
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Serialization(format!("bad float {t:?}")))
        })
        .collect()
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn euclid2_grid(half: f64, n: usize) -> (GridSpec, GroupDescriptor) {
        (
            GridSpec::symmetric(&[half, half], &[n, n]).unwrap(),
            GroupDescriptor::euclidean(2).unwrap(),
        )
    }

    #[test]
    fn integrate_constant_box() {
        let (spec, g) = euclid2_grid(std::f64::consts::SQRT_2, 16);
        let f = GridFunction::from_fn(spec, g, |_| 1.0).unwrap();
        assert_relative_eq!(f.integrate(), 8.0, max_relative = 1e-12);
    }

    #[test]
    fn integrate_heat_kernel_mass() {
        let (spec, g) = euclid2_grid(8.0, 128);
        let f = GridFunction::from_fn(spec, g, |c| {
            (1.0 / (4.0 * std::f64::consts::PI)) * (-(c[0] * c[0] + c[1] * c[1]) / 4.0).exp()
        })
        .unwrap();
        assert!((f.integrate() - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn lp_norm_basics() {
        let (spec, g) = euclid2_grid(2.0, 32);
        let f = GridFunction::from_fn(spec, g, |c| {
            if c[0].abs() < 1.0 && c[1].abs() < 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        // characteristic function of a 2x2 box
        assert_relative_eq!(f.lp_norm(1.0).unwrap(), 4.0, max_relative = 0.15);
        let c = 3.7;
        assert_relative_eq!(
            f.scaled(c).lp_norm(2.0).unwrap(),
            c * f.lp_norm(2.0).unwrap(),
            max_relative = 1e-14
        );
        let sq = f.map(|s| s * s);
        assert_relative_eq!(
            f.lp_norm(2.0).unwrap().powi(2),
            sq.integrate(),
            max_relative = 1e-12
        );
        assert!(f.lp_norm(0.5).is_err());
    }

    #[test]
    fn convolve_with_spike_is_approximate_identity() {
        let (spec, g) = euclid2_grid(2.0, 32);
        let f = GridFunction::from_fn(spec, g, |c| (-(c[0] * c[0] + c[1] * c[1])).exp()).unwrap();
        // normalized spike at the origin node
        let w = spec.cell_weight();
        let mut spike = vec![0.0; spec.num_points()];
        let center = spec.index_of(&[16, 16]);
        spike[center] = 1.0 / w;
        let spike = GridFunction::from_samples(spec, g, spike).unwrap();
        let conv = convolve(&f, &spike).unwrap();
        let lipschitz = 1.0; // |∇f| ≤ ~0.86 for this Gaussian
        let sup: f64 = conv
            .samples()
            .iter()
            .zip(f.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup <= 2.0 * spec.max_spacing() * lipschitz, "sup diff {sup}");
    }

    #[test]
    fn euclidean_convolution_commutes() {
        let (spec, g) = euclid2_grid(2.0, 24);
        let f = GridFunction::from_fn(spec, g, |c| (-(c[0] * c[0] + 2.0 * c[1] * c[1])).exp())
            .unwrap();
        let h = GridFunction::from_fn(spec, g, |c| {
            (-(1.5 * c[0] * c[0] + c[1] * c[1])).exp() * (1.0 + 0.3 * c[0])
        })
        .unwrap();
        let fg = convolve(&f, &h).unwrap();
        let gf = convolve(&h, &f).unwrap();
        for (a, b) in fg.samples().iter().zip(gf.samples()) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    /// Brute-force oracle: nearest-sample reads instead of interpolation.
    fn convolve_nearest_oracle(f: &GridFunction, g: &GridFunction) -> Vec<f64> {
        let spec = f.spec();
        let d = spec.dim();
        let n = spec.num_points();
        let w = spec.cell_weight();
        (0..n)
            .map(|out| {
                let xc = spec.coords_of(out);
                let mut acc = 0.0;
                for j in 0..n {
                    let yc = spec.coords_of(j);
                    let q = group_quotient(f.group(), &xc, &yc);
                    let mut idx = 0usize;
                    let mut inside = true;
                    let strides = spec.strides();
                    for a in 0..d {
                        let k = ((q[a] - spec.lower()[a]) / spec.spacing()[a]).round();
                        if k < 0.0 || k >= spec.resolution()[a] as f64 {
                            inside = false;
                            break;
                        }
                        idx += k as usize * strides[a];
                    }
                    if inside {
                        acc += f.samples()[idx] * g.samples()[j];
                    }
                }
                acc * w
            })
            .collect()
    }

    #[test]
    fn heisenberg_convolution_matches_nearest_sample_oracle() {
        let group = GroupDescriptor::heisenberg1();
        let spec = GridSpec::symmetric(&[2.0, 2.0, 2.0], &[16, 16, 16]).unwrap();
        let f = GridFunction::from_fn(spec, group, |c| {
            (-(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]) * 2.0).exp()
        })
        .unwrap();
        let g = GridFunction::from_fn(spec, group, |c| {
            (-(c[0] * c[0] + 2.0 * c[1] * c[1] + 0.5 * c[2] * c[2]) * 2.5).exp()
        })
        .unwrap();
        let conv = convolve(&f, &g).unwrap();
        let oracle = convolve_nearest_oracle(&f, &g);
        let sup: f64 = conv
            .samples()
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        // nearest-sample reads differ from multilinear by O(spacing · |∇f|) · ‖g‖₁
        let bound = 1.0 * spec.max_spacing() * g.lp_norm(1.0).unwrap();
        assert!(sup <= bound, "sup {sup} vs bound {bound}");
    }

    #[test]
    fn pointwise_convolution_matches_full() {
        let group = GroupDescriptor::heisenberg1();
        let spec = GridSpec::symmetric(&[2.0, 2.0, 2.0], &[12, 12, 12]).unwrap();
        let f = GridFunction::from_fn(spec, group, |c| (-(c[0] * c[0] + c[1] * c[1] + c[2] * c[2])).exp())
            .unwrap();
        let g = GridFunction::from_fn(spec, group, |c| (-(c[0] * c[0] + c[1] * c[1])).exp() * c[2].cos())
            .unwrap();
        let full = convolve(&f, &g).unwrap();
        let idx = spec.index_of(&[6, 5, 7]);
        let pts = vec![spec.point_of(idx)];
        let vals = evaluate_convolution_at(&f, &g, &pts).unwrap();
        assert!((vals[0] - full.sample(idx)).abs() <= 1e-12 * (1.0 + full.sample(idx).abs()));
        let empty = evaluate_convolution_at(&f, &g, &[]).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn gradient_annihilates_constants_and_is_exact_on_quadratics() {
        let group = GroupDescriptor::heisenberg1();
        let spec = GridSpec::symmetric(&[2.0, 2.0, 2.0], &[12, 12, 12]).unwrap();
        let c = GridFunction::from_fn(spec, group, |_| 3.25).unwrap();
        for comp in horizontal_gradient(&c).unwrap() {
            assert!(comp.samples().iter().all(|s| s.abs() < 1e-12));
        }
        // u = central coordinate: X₁u = -y/2, X₂u = x/2 exactly at interior nodes
        let u = GridFunction::from_fn(spec, group, |c| c[2]).unwrap();
        let grads = horizontal_gradient(&u).unwrap();
        for idx in 0..spec.num_points() {
            let m = spec.multi_of(idx);
            let interior = (0..3).all(|a| m[a] > 0 && m[a] + 1 < spec.resolution()[a]);
            if interior {
                let p = spec.coords_of(idx);
                assert_relative_eq!(grads[0].sample(idx), -p[1] / 2.0, epsilon = 1e-12);
                assert_relative_eq!(grads[1].sample(idx), p[0] / 2.0, epsilon = 1e-12);
            }
        }
        // Euclidean u = x²: exact derivative at interior nodes
        let (spec2, g2) = euclid2_grid(2.0, 16);
        let q = GridFunction::from_fn(spec2, g2, |c| c[0] * c[0]).unwrap();
        let dq = horizontal_gradient(&q).unwrap();
        for idx in 0..spec2.num_points() {
            let m = spec2.multi_of(idx);
            if m[0] > 0 && m[0] + 1 < 16 {
                let p = spec2.coords_of(idx);
                assert_relative_eq!(dq[0].sample(idx), 2.0 * p[0], epsilon = 1e-12);
            }
        }
        let tiny = GridSpec::symmetric(&[1.0, 1.0], &[2, 8]).unwrap();
        let bad = GridFunction::zeros(tiny, g2).unwrap();
        assert!(horizontal_gradient(&bad).is_err());
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let group = GroupDescriptor::heisenberg1();
        let spec = GridSpec::new(&[-1.0, -2.0, -0.5], &[1.0, 2.0, 1.5], &[4, 5, 6]).unwrap();
        let f = GridFunction::from_fn(spec, group, |c| c[0] + 2.0 * c[1] - 0.25 * c[2]).unwrap();

        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        let f2 = GridFunction::read_csv(csv.as_slice()).unwrap();
        assert_eq!(f, f2);

        let mut bin = Vec::new();
        f.write_binary(&mut bin).unwrap();
        let f3 = GridFunction::read_binary(bin.as_slice()).unwrap();
        assert_eq!(f, f3);
    }

    #[test]
    fn convolve_rejects_mismatched_grids() {
        let (spec, g) = euclid2_grid(2.0, 8);
        let (spec2, _) = euclid2_grid(2.0, 10);
        let a = GridFunction::zeros(spec, g).unwrap();
        let b = GridFunction::zeros(spec2, g).unwrap();
        assert!(convolve(&a, &b).is_err());
    }
}
