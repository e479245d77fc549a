use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d { filters: usize, kernel_h: usize, kernel_w: usize, stride: usize },
    Relu,
    Flatten,
    Dense { units: usize },
    Sigmoid,
}

impl LayerSpec {
    pub fn conv2d(filters: usize, kernel_h: usize, kernel_w: usize) -> Self {
        LayerSpec::Conv2d { filters, kernel_h, kernel_w, stride: 1 }
    }

    pub fn dense(units: usize) -> Self {
        LayerSpec::Dense { units }
    }

    /// Output shape for a single-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerSpec::Conv2d { filters, kernel_h, kernel_w, stride } => {
                let &[_, h, w] = input else {
                    return Err(Error::shape(format!("conv2d needs a [channels, height, width] input, got {input:?}")));
                };
                if filters == 0 || kernel_h == 0 || kernel_w == 0 || stride == 0 {
                    return Err(Error::spec("conv2d sizes must be positive"));
                }
                if kernel_h > h || kernel_w > w {
                    return Err(Error::shape(format!("{kernel_h}x{kernel_w} kernel does not fit {h}x{w} input")));
                }
                Ok(vec![filters, (h - kernel_h) / stride + 1, (w - kernel_w) / stride + 1])
            }
            LayerSpec::Relu | LayerSpec::Sigmoid => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense { units } => {
                if units == 0 {
                    return Err(Error::spec("dense layer needs at least one unit"));
                }
                Ok(vec![units])
            }
        }
    }

    /// (weight count, bias count).
    pub fn param_counts(&self, input: &[usize]) -> (usize, usize) {
        match *self {
            LayerSpec::Conv2d { filters, kernel_h, kernel_w, .. } => (filters * input[0] * kernel_h * kernel_w, filters),
            LayerSpec::Dense { units } => (units * input.iter().product::<usize>(), units),
            _ => (0, 0),
        }
    }

    pub fn fan_in(&self, input: &[usize]) -> usize {
        match *self {
            LayerSpec::Conv2d { kernel_h, kernel_w, .. } => input[0] * kernel_h * kernel_w,
            LayerSpec::Dense { .. } => input.iter().product(),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub f: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    pub fn in_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn out_len(&self) -> usize {
        self.f * self.ho * self.wo
    }
}

pub(crate) fn conv_forward(g: &ConvGeom, wts: &[f64], bias: &[f64], x: &[f64], y: &mut [f64]) {
    let ksz = g.c * g.kh * g.kw;
    for f in 0..g.f {
        let wf = &wts[f * ksz..(f + 1) * ksz];
        for oy in 0..g.ho {
            for ox in 0..g.wo {
                let mut acc = bias[f];
                for c in 0..g.c {
                    for i in 0..g.kh {
                        let row = &x[c * g.h * g.w + (oy * g.stride + i) * g.w + ox * g.stride..];
                        let wr = &wf[(c * g.kh + i) * g.kw..(c * g.kh + i + 1) * g.kw];
                        for j in 0..g.kw {
                            acc += wr[j] * row[j];
                        }
                    }
                }
                y[(f * g.ho + oy) * g.wo + ox] = acc;
            }
        }
    }
}

/// Accumulates weight and bias gradients; writes the input gradient when `dx` is given.
pub(crate) fn conv_backward(
    g: &ConvGeom,
    wts: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let ksz = g.c * g.kh * g.kw;
    for f in 0..g.f {
        let dwf = &mut dw[f * ksz..(f + 1) * ksz];
        for oy in 0..g.ho {
            for ox in 0..g.wo {
                let d = dy[(f * g.ho + oy) * g.wo + ox];
                db[f] += d;
                for c in 0..g.c {
                    for i in 0..g.kh {
                        let base = c * g.h * g.w + (oy * g.stride + i) * g.w + ox * g.stride;
                        let k0 = (c * g.kh + i) * g.kw;
                        for j in 0..g.kw {
                            dwf[k0 + j] += d * x[base + j];
                        }
                    }
                }
            }
        }
    }
    if let Some(dx) = dx {
        dx.iter_mut().for_each(|v| *v = 0.0);
        for f in 0..g.f {
            let wf = &wts[f * ksz..(f + 1) * ksz];
            for oy in 0..g.ho {
                for ox in 0..g.wo {
                    let d = dy[(f * g.ho + oy) * g.wo + ox];
                    for c in 0..g.c {
                        for i in 0..g.kh {
                            let base = c * g.h * g.w + (oy * g.stride + i) * g.w + ox * g.stride;
                            let k0 = (c * g.kh + i) * g.kw;
                            for j in 0..g.kw {
                                dx[base + j] += d * wf[k0 + j];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `c = a * b + beta * c` on strided row-major views.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let reach = |r: usize, cc: usize, rs: usize, cs: usize| (r - 1) * rs + (cc - 1) * cs + 1;
    if k > 0 {
        assert!(a.len() >= reach(m, k, rsa, csa) && b.len() >= reach(k, n, rsb, csb));
    }
    assert!(c.len() >= reach(m, n, rsc, csc));
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// `y[b, o] = sum_i x[b, i] w[o, i] + bias[o]`.
pub(crate) fn dense_forward(batch: usize, inputs: usize, units: usize, wts: &[f64], bias: &[f64], x: &[f64], y: &mut [f64]) {
    for row in y.chunks_exact_mut(units) {
        row.copy_from_slice(bias);
    }
    gemm(batch, inputs, units, x, (inputs, 1), wts, (1, inputs), 1.0, y, (units, 1));
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward(
    batch: usize,
    inputs: usize,
    units: usize,
    wts: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    // dw[o, i] += sum_b dy[b, o] x[b, i]
    gemm(units, batch, inputs, dy, (1, units), x, (inputs, 1), 1.0, dw, (inputs, 1));
    for row in dy.chunks_exact(units) {
        for (d, v) in db.iter_mut().zip(row) {
            *d += v;
        }
    }
    if let Some(dx) = dx {
        gemm(batch, units, inputs, dy, (units, 1), wts, (inputs, 1), 0.0, dx, (inputs, 1));
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
