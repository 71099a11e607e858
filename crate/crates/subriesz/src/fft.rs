//! FFT-backed linear convolution on abelian (Euclidean) grids.
//!
//! Arrays are zero-padded to twice the resolution per axis, so the circular
//! convolution of the padded arrays equals the linear convolution on the
//! original lattice exactly; offsets beyond the difference set never wrap.

use crate::group::MAX_DIM;
use rustfft::{num_complex::Complex64, FftPlanner};

fn fft_axis(data: &mut [Complex64], dims: &[usize], axis: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let d = dims.len();
    let n = dims[axis];
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut strides = vec![1usize; d];
    for a in (0..d.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * dims[a + 1];
    }
    let stride = strides[axis];
    let total: usize = dims.iter().product();
    let lines = total / n;
    let mut scratch = vec![Complex64::default(); n];
    for line in 0..lines {
        // map line number to the base flat index with axis fixed at 0
        let mut rem = line;
        let mut base = 0usize;
        for a in 0..d {
            if a == axis {
                continue;
            }
            let extent = dims[a];
            let coord = rem % extent;
            rem /= extent;
            base += coord * strides[a];
        }
        for k in 0..n {
            scratch[k] = data[base + k * stride];
        }
        fft.process(&mut scratch);
        for k in 0..n {
            data[base + k * stride] = scratch[k];
        }
    }
}

/// Linear convolution `out[i] = Σ_j f[j] · kernel(i − j)` over a rectangular
/// lattice, where `kernel` is given as a function of the (signed) per-axis
/// offset. No quadrature weight is applied.
pub fn convolve_offsets<K: Fn(&[isize]) -> f64>(
    res: &[usize],
    samples: &[f64],
    kernel: K,
) -> Vec<f64> {
    let d = res.len();
    let pad: Vec<usize> = res.iter().map(|&n| 2 * n).collect();
    let total_pad: usize = pad.iter().product();

    let mut pad_strides = vec![1usize; d];
    for a in (0..d.saturating_sub(1)).rev() {
        pad_strides[a] = pad_strides[a + 1] * pad[a + 1];
    }
    let mut res_strides = vec![1usize; d];
    for a in (0..d.saturating_sub(1)).rev() {
        res_strides[a] = res_strides[a + 1] * res[a + 1];
    }

    // f embedded at the low corner of the padded array
    let mut fa = vec![Complex64::default(); total_pad];
    for (idx, &s) in samples.iter().enumerate() {
        let mut rem = idx;
        let mut pidx = 0usize;
        for a in 0..d {
            let c = rem / res_strides[a];
            rem %= res_strides[a];
            pidx += c * pad_strides[a];
        }
        fa[pidx] = Complex64::new(s, 0.0);
    }

    // kernel placed at wrapped offsets
    let mut ka = vec![Complex64::default(); total_pad];
    let mut offsets = vec![0isize; d];
    fill_kernel(&mut ka, &pad, &pad_strides, res, &mut offsets, 0, &kernel);

    let mut planner = FftPlanner::new();
    for a in 0..d {
        fft_axis(&mut fa, &pad, a, &mut planner, false);
        fft_axis(&mut ka, &pad, a, &mut planner, false);
    }
    for (x, y) in fa.iter_mut().zip(&ka) {
        *x *= *y;
    }
    for a in 0..d {
        fft_axis(&mut fa, &pad, a, &mut planner, true);
    }
    let scale = 1.0 / total_pad as f64;

    let total_res: usize = res.iter().product();
    let mut out = vec![0.0; total_res];
    for (idx, o) in out.iter_mut().enumerate() {
        let mut rem = idx;
        let mut pidx = 0usize;
        for a in 0..d {
            let c = rem / res_strides[a];
            rem %= res_strides[a];
            pidx += c * pad_strides[a];
        }
        *o = fa[pidx].re * scale;
    }
    out
}

fn fill_kernel<K: Fn(&[isize]) -> f64>(
    ka: &mut [Complex64],
    pad: &[usize],
    pad_strides: &[usize],
    res: &[usize],
    offsets: &mut [isize],
    axis: usize,
    kernel: &K,
) {
    if axis == res.len() {
        let mut pidx = 0usize;
        for a in 0..res.len() {
            let wrapped = offsets[a].rem_euclid(pad[a] as isize) as usize;
            pidx += wrapped * pad_strides[a];
        }
        ka[pidx] = Complex64::new(kernel(offsets), 0.0);
        return;
    }
    let n = res[axis] as isize;
    for o in -(n - 1)..n {
        offsets[axis] = o;
        fill_kernel(ka, pad, pad_strides, res, offsets, axis + 1, kernel);
    }
}

/// Smallest flat offset table covering the lattice difference set, for
/// callers that want to precompute kernel values once.
pub fn offset_range(res: &[usize]) -> Vec<(isize, isize)> {
    res.iter()
        .map(|&n| (-(n as isize - 1), n as isize - 1))
        .collect()
}

#[allow(dead_code)]
pub fn max_dim_guard() -> usize {
    MAX_DIM
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_convolution_1d() {
        let f = vec![1.0, 2.0, -1.0, 0.5, 3.0];
        let k = |o: &[isize]| match o[0] {
            -1 => 0.25,
            0 => 1.0,
            1 => -0.5,
            _ => 0.0,
        };
        let got = convolve_offsets(&[5], &f, k);
        for i in 0..5 {
            let mut want = 0.0;
            for j in 0..5i64 {
                want += f[j as usize] * k(&[(i as i64 - j) as isize]);
            }
            assert!((got[i] - want).abs() < 1e-12, "i={i}: {} vs {want}", got[i]);
        }
    }

    #[test]
    fn matches_direct_convolution_2d() {
        let res = [4usize, 3usize];
        let f: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let kernel = |o: &[isize]| (-((o[0] * o[0] + o[1] * o[1]) as f64) / 3.0).exp();
        let got = convolve_offsets(&res, &f, kernel);
        for i0 in 0..4isize {
            for i1 in 0..3isize {
                let mut want = 0.0;
                for j0 in 0..4isize {
                    for j1 in 0..3isize {
                        want += f[(j0 * 3 + j1) as usize] * kernel(&[i0 - j0, i1 - j1]);
                    }
                }
                let got_v = got[(i0 * 3 + i1) as usize];
                assert!((got_v - want).abs() < 1e-12);
            }
        }
    }
}
