//! Cross-correlation kernels over NCHW batches via im2col + GEMM.

use super::gemm::{gemm, Layout};
use crate::par;
use std::cell::RefCell;

thread_local! {
    static SCRATCH: RefCell<(Vec<f64>, Vec<f64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

/// Runs `f` with two per-thread buffers of at least `a` and `b` elements.
/// Contents are unspecified on entry.
fn with_scratch<R>(a: usize, b: usize, f: impl FnOnce(&mut [f64], &mut [f64]) -> R) -> R {
    SCRATCH.with(|cell| {
        let mut bufs = cell.borrow_mut();
        let (x, y) = &mut *bufs;
        if x.len() < a {
            x.resize(a, 0.0);
        }
        if y.len() < b {
            y.resize(b, 0.0);
        }
        f(&mut x[..a], &mut y[..b])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub filters: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.pad - self.kh) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.pad - self.kw) / self.stride + 1
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kh * self.kw
    }

    fn in_plane(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    fn out_plane(&self) -> usize {
        self.out_height() * self.out_width()
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }
}

/// Output columns `[lo, hi)` whose input column `ox·stride + kj − pad` lies
/// inside the image.
fn valid_cols(g: &ConvGeometry, kj: usize, ow: usize) -> (usize, usize) {
    let lo = g.pad.saturating_sub(kj).div_ceil(g.stride).min(ow);
    let limit = (g.width + g.pad).saturating_sub(kj); // ix < width  <=>  ox·stride < limit
    let hi = if limit == 0 {
        0
    } else {
        ((limit - 1) / g.stride + 1).min(ow)
    };
    (lo, hi.max(lo))
}

/// Unfolds one sample `[C, H, W]` into `[C·kh·kw, H'·W']`.
fn im2col(g: &ConvGeometry, x: &[f64], cols: &mut [f64]) {
    let (oh, ow) = (g.out_height(), g.out_width());
    let plane = oh * ow;
    for c in 0..g.in_channels {
        let xc = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let (lo, hi) = valid_cols(g, kj, ow);
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let line = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= g.height as isize || lo == hi {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &xc[iy as usize * g.width..(iy as usize + 1) * g.width];
                    line[..lo].fill(0.0);
                    line[hi..].fill(0.0);
                    let first = lo * g.stride + kj - g.pad;
                    if g.stride == 1 {
                        line[lo..hi].copy_from_slice(&src[first..first + hi - lo]);
                    } else {
                        for (v, s) in line[lo..hi].iter_mut().zip(src[first..].iter().step_by(g.stride)) {
                            *v = *s;
                        }
                    }
                }
            }
        }
    }
}

/// Folds `[C·kh·kw, H'·W']` back into `[C, H, W]`, summing overlaps.
fn col2im(g: &ConvGeometry, cols: &[f64], dx: &mut [f64]) {
    let (oh, ow) = (g.out_height(), g.out_width());
    let plane = oh * ow;
    dx.fill(0.0);
    for c in 0..g.in_channels {
        let dxc = &mut dx[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let (lo, hi) = valid_cols(g, kj, ow);
                if lo == hi {
                    continue;
                }
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let first = iy as usize * g.width + lo * g.stride + kj - g.pad;
                    let line = &src[oy * ow + lo..oy * ow + hi];
                    if g.stride == 1 {
                        dxc[first..first + line.len()]
                            .iter_mut()
                            .zip(line)
                            .for_each(|(d, s)| *d += s);
                    } else {
                        dxc[first..]
                            .iter_mut()
                            .step_by(g.stride)
                            .zip(line)
                            .for_each(|(d, s)| *d += s);
                    }
                }
            }
        }
    }
}

pub fn forward(g: &ConvGeometry, x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let plane = g.out_plane();
    let mut out = vec![0.0; g.batch * g.filters * plane];
    let patch = g.patch_len();
    par::for_each_chunk_mut(&mut out, g.filters * plane, |b, y| {
        let xb = &x[b * g.in_plane()..(b + 1) * g.in_plane()];
        if g.is_pointwise() {
            gemm(
                g.filters,
                patch,
                plane,
                kernel,
                Layout::Normal,
                xb,
                Layout::Normal,
                0.0,
                y,
            );
        } else {
            with_scratch(patch * plane, 0, |cols, _| {
                im2col(g, xb, cols);
                gemm(
                    g.filters,
                    patch,
                    plane,
                    kernel,
                    Layout::Normal,
                    cols,
                    Layout::Normal,
                    0.0,
                    y,
                );
            });
        }
    });
    out
}

type Partials = (Option<Vec<f64>>, Option<Vec<f64>>);

/// Returns `(dx, dkernel)`; `dx` is skipped when `need_dx` is false.
pub fn backward(g: &ConvGeometry, x: &[f64], kernel: &[f64], dy: &[f64], need_dx: bool, need_dk: bool) -> Partials {
    let plane = g.out_plane();
    let patch = g.patch_len();
    let klen = g.filters * patch;
    let in_plane = g.in_plane();
    // Per-sample kernel partials are reduced afterwards in sample order so the
    // sum does not depend on scheduling.
    let per_sample: Vec<Partials> = par::map_range(g.batch, |b| {
        let xb = &x[b * in_plane..(b + 1) * in_plane];
        let dyb = &dy[b * g.filters * plane..(b + 1) * g.filters * plane];
        let pointwise = g.is_pointwise();
        let cols_len = if pointwise { 0 } else { patch * plane };
        let dcols_len = if need_dx && !pointwise { patch * plane } else { 0 };
        with_scratch(cols_len, dcols_len, |cols, dcols| {
            if !pointwise {
                im2col(g, xb, cols);
            }
            let cols_ref: &[f64] = if pointwise { xb } else { cols };
            let dk = need_dk.then(|| {
                let mut dk = vec![0.0; klen];
                gemm(
                    g.filters,
                    plane,
                    patch,
                    dyb,
                    Layout::Normal,
                    cols_ref,
                    Layout::Transposed,
                    0.0,
                    &mut dk,
                );
                dk
            });
            let dx = need_dx.then(|| {
                if pointwise {
                    let mut dxb = vec![0.0; in_plane];
                    gemm(
                        patch,
                        g.filters,
                        plane,
                        kernel,
                        Layout::Transposed,
                        dyb,
                        Layout::Normal,
                        0.0,
                        &mut dxb,
                    );
                    dxb
                } else {
                    gemm(
                        patch,
                        g.filters,
                        plane,
                        kernel,
                        Layout::Transposed,
                        dyb,
                        Layout::Normal,
                        0.0,
                        dcols,
                    );
                    let mut dxb = vec![0.0; in_plane];
                    col2im(g, dcols, &mut dxb);
                    dxb
                }
            });
            (dx, dk)
        })
    });
    let mut dx = need_dx.then(|| Vec::with_capacity(g.batch * in_plane));
    let mut dk = need_dk.then(|| vec![0.0; klen]);
    for (dxb, dkb) in per_sample {
        if let (Some(acc), Some(part)) = (dx.as_mut(), dxb) {
            acc.extend_from_slice(&part);
        }
        if let (Some(acc), Some(part)) = (dk.as_mut(), dkb) {
            acc.iter_mut().zip(&part).for_each(|(a, p)| *a += p);
        }
    }
    (dx, dk)
}
