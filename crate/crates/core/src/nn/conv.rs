//! Valid (unpadded, stride 1) 2-D convolution over a batch stored
//! channel-major as `(channel, sample, row, col)`.

use super::gemm::{gemm, Strided};

/// Upper bound on the im2col buffer, in values. Larger batches are split.
const COLS_BUDGET: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvShape {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub in_side: usize,
}

impl ConvShape {
    pub fn out_side(&self) -> usize {
        self.in_side + 1 - self.kernel
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.patch_len()
    }

    fn chunk(&self, batch: usize) -> usize {
        let per_sample = self.patch_len() * self.out_side().pow(2);
        (COLS_BUDGET / per_sample.max(1)).clamp(1, batch.max(1))
    }
}

/// Unfolds samples `b0..b0+nb` of `x` into `cols`, a `(C k k) x (nb o o)`
/// row-major matrix.
fn im2col(shape: &ConvShape, x: &[f64], batch: usize, b0: usize, nb: usize, cols: &mut Vec<f64>) {
    let (k, s, o) = (shape.kernel, shape.in_side, shape.out_side());
    let ncol = nb * o * o;
    cols.clear();
    cols.resize(shape.patch_len() * ncol, 0.0);
    for c in 0..shape.in_channels {
        for u in 0..k {
            for v in 0..k {
                let row = (c * k + u) * k + v;
                let dst = &mut cols[row * ncol..(row + 1) * ncol];
                for bl in 0..nb {
                    let xbase = (c * batch + b0 + bl) * s * s;
                    for i in 0..o {
                        let src = xbase + (i + u) * s + v;
                        let d = bl * o * o + i * o;
                        dst[d..d + o].copy_from_slice(&x[src..src + o]);
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates `cols` back into `dx`.
fn col2im(shape: &ConvShape, cols: &[f64], batch: usize, b0: usize, nb: usize, dx: &mut [f64]) {
    let (k, s, o) = (shape.kernel, shape.in_side, shape.out_side());
    let ncol = nb * o * o;
    for c in 0..shape.in_channels {
        for u in 0..k {
            for v in 0..k {
                let row = (c * k + u) * k + v;
                let src = &cols[row * ncol..(row + 1) * ncol];
                for bl in 0..nb {
                    let xbase = (c * batch + b0 + bl) * s * s;
                    for i in 0..o {
                        let d = xbase + (i + u) * s + v;
                        let sr = bl * o * o + i * o;
                        for (t, &g) in dx[d..d + o].iter_mut().zip(&src[sr..sr + o]) {
                            *t += g;
                        }
                    }
                }
            }
        }
    }
}

/// `relu(W * x + b)` for the whole batch. Returns `(out_channels, batch, o, o)`.
pub(crate) fn conv_forward(shape: &ConvShape, weight: &[f64], bias: &[f64], x: &[f64], batch: usize) -> Vec<f64> {
    let o2 = shape.out_side().pow(2);
    let plane = batch * o2;
    let mut y = vec![0.0; shape.out_channels * plane];
    let mut cols = Vec::new();
    let chunk = shape.chunk(batch);
    let mut b0 = 0;
    while b0 < batch {
        let nb = chunk.min(batch - b0);
        im2col(shape, x, batch, b0, nb, &mut cols);
        let ncol = nb * o2;
        gemm(
            shape.out_channels,
            shape.patch_len(),
            ncol,
            1.0,
            Strided::row_major(weight, shape.patch_len()),
            Strided::row_major(&cols, ncol),
            0.0,
            &mut y[b0 * o2..],
            plane,
        );
        b0 += nb;
    }
    for (f, row) in y.chunks_exact_mut(plane).enumerate() {
        let b = bias[f];
        for v in row {
            *v = (*v + b).max(0.0);
        }
    }
    y
}

/// Backward through one conv + ReLU layer. `dy` holds gradients w.r.t. the
/// post-activation output and is masked in place. Parameter gradients are
/// accumulated into `dweight`/`dbias`; the input gradient is returned when
/// requested.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward(
    shape: &ConvShape,
    weight: &[f64],
    x: &[f64],
    y: &[f64],
    dy: &mut [f64],
    batch: usize,
    dweight: &mut [f64],
    dbias: &mut [f64],
    want_dx: bool,
) -> Option<Vec<f64>> {
    for (g, &out) in dy.iter_mut().zip(y) {
        if out <= 0.0 {
            *g = 0.0;
        }
    }
    let o2 = shape.out_side().pow(2);
    let plane = batch * o2;
    for (f, row) in dy.chunks_exact(plane).enumerate() {
        dbias[f] += row.iter().sum::<f64>();
    }
    let mut dx = want_dx.then(|| vec![0.0; shape.in_channels * batch * shape.in_side.pow(2)]);
    let mut cols = Vec::new();
    let mut dcols = Vec::new();
    let chunk = shape.chunk(batch);
    let pl = shape.patch_len();
    let mut b0 = 0;
    while b0 < batch {
        let nb = chunk.min(batch - b0);
        let ncol = nb * o2;
        im2col(shape, x, batch, b0, nb, &mut cols);
        let dy_chunk = Strided {
            data: &dy[b0 * o2..],
            rs: plane,
            cs: 1,
        };
        gemm(
            shape.out_channels,
            ncol,
            pl,
            1.0,
            dy_chunk,
            Strided::transposed(&cols, ncol),
            1.0,
            dweight,
            pl,
        );
        if let Some(dx) = dx.as_mut() {
            dcols.clear();
            dcols.resize(pl * ncol, 0.0);
            gemm(
                pl,
                shape.out_channels,
                ncol,
                1.0,
                Strided::transposed(weight, pl),
                dy_chunk,
                0.0,
                &mut dcols,
                ncol,
            );
            col2im(shape, &dcols, batch, b0, nb, dx);
        }
        b0 += nb;
    }
    dx
}
