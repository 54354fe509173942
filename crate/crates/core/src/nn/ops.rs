use rand::Rng;

use super::{NnError, Result, Scalar, Tensor};

fn dims3<T>(t: &Tensor<T>, what: &str) -> Result<(usize, usize, usize)> {
    match t.shape[..] {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(NnError::Shape(format!("{what} must be (channels, height, width), got {:?}", t.shape))),
    }
}

fn conv_out(size: usize, k: usize, stride: usize) -> usize {
    (size - k) / stride + 1
}

/// `(C·k·k, Ho·Wo)` patch matrix of a `(C, H, W)` input.
fn im2col<T: Scalar>(x: &[T], (c, h, w): (usize, usize, usize), k: usize, s: usize) -> (Vec<T>, usize, usize) {
    let (ho, wo) = (conv_out(h, k, s), conv_out(w, k, s));
    let n = ho * wo;
    let mut cols = vec![T::ZERO; c * k * k * n];
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ci * k + ky) * k + kx) * n..][..n];
                for oy in 0..ho {
                    let src = &x[(ci * h + oy * s + ky) * w + kx..];
                    let dst = &mut row[oy * wo..(oy + 1) * wo];
                    if s == 1 {
                        dst.copy_from_slice(&src[..wo]);
                    } else {
                        for (ox, d) in dst.iter_mut().enumerate() {
                            *d = src[ox * s];
                        }
                    }
                }
            }
        }
    }
    (cols, ho, wo)
}

/// Valid (unpadded) cross-correlation of a `(C, H, W)` input with `(O, C, k, k)`
/// kernels plus a bias per output channel.
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, kernel: &Tensor<T>, bias: &[T], stride: usize) -> Result<Tensor<T>> {
    let (c, h, w) = dims3(input, "conv input")?;
    let [o, kc, k, k2] = kernel.shape[..] else {
        return Err(NnError::Shape(format!("kernel must be (out, in, k, k), got {:?}", kernel.shape)));
    };
    if kc != c || k != k2 || bias.len() != o || stride == 0 {
        return Err(NnError::Shape(format!(
            "kernel {:?} / bias {} / stride {stride} do not fit input {:?}",
            kernel.shape,
            bias.len(),
            input.shape
        )));
    }
    if h < k || w < k {
        return Err(NnError::Shape(format!("input {h}×{w} is smaller than the {k}×{k} filter")));
    }
    let (cols, ho, wo) = im2col(&input.data, (c, h, w), k, stride);
    let n = ho * wo;
    let ckk = c * k * k;
    let mut out = vec![T::ZERO; o * n];
    for oc in 0..o {
        let dst = &mut out[oc * n..(oc + 1) * n];
        dst.fill(bias[oc]);
        for (p, &wv) in kernel.data[oc * ckk..(oc + 1) * ckk].iter().enumerate() {
            for (d, &x) in dst.iter_mut().zip(&cols[p * n..(p + 1) * n]) {
                *d += wv * x;
            }
        }
    }
    let t = Tensor {
        shape: vec![o, ho, wo],
        data: out,
    };
    t.debug_check("conv2d_forward");
    Ok(t)
}

/// Returns `(input gradient, kernel gradient, bias gradient)`.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Vec<T>)> {
    let (c, h, w) = dims3(input, "conv input")?;
    let [o, _, k, _] = kernel.shape[..] else {
        return Err(NnError::Shape("kernel must be 4-D".into()));
    };
    let (ho, wo) = (conv_out(h, k, stride), conv_out(w, k, stride));
    if grad_out.shape != [o, ho, wo] {
        return Err(NnError::Shape(format!("output gradient {:?} should be {:?}", grad_out.shape, [o, ho, wo])));
    }
    let (cols, _, _) = im2col(&input.data, (c, h, w), k, stride);
    let n = ho * wo;
    let ckk = c * k * k;
    let mut gk = vec![T::ZERO; o * ckk];
    let mut gb = vec![T::ZERO; o];
    let mut gcols = vec![T::ZERO; ckk * n];
    for oc in 0..o {
        let g = &grad_out.data[oc * n..(oc + 1) * n];
        gb[oc] = g.iter().copied().sum();
        for p in 0..ckk {
            let col = &cols[p * n..(p + 1) * n];
            gk[oc * ckk + p] = g.iter().zip(col).map(|(&a, &b)| a * b).sum();
            let wv = kernel.data[oc * ckk + p];
            for (d, &gv) in gcols[p * n..(p + 1) * n].iter_mut().zip(g) {
                *d += wv * gv;
            }
        }
    }
    let mut gin = vec![T::ZERO; c * h * w];
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = &gcols[((ci * k + ky) * k + kx) * n..][..n];
                for oy in 0..ho {
                    let base = (ci * h + oy * stride + ky) * w + kx;
                    for ox in 0..wo {
                        gin[base + ox * stride] += row[oy * wo + ox];
                    }
                }
            }
        }
    }
    Ok((
        Tensor {
            shape: input.shape.clone(),
            data: gin,
        },
        Tensor {
            shape: kernel.shape.clone(),
            data: gk,
        },
        gb,
    ))
}

/// 2×2 max pooling with stride 2. Odd sizes are padded by replicating the
/// last row or column. Returns the output and, per output value, the flat
/// input index it came from (first maximum in row-major window order).
pub fn maxpool2_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let (c, h, w) = dims3(input, "pool input")?;
    let (ho, wo) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = Vec::with_capacity(c * ho * wo);
    let mut arg = Vec::with_capacity(c * ho * wo);
    for ci in 0..c {
        for oy in 0..ho {
            let rows = [2 * oy, (2 * oy + 1).min(h - 1)];
            for ox in 0..wo {
                let cols = [2 * ox, (2 * ox + 1).min(w - 1)];
                let mut best = (ci * h + rows[0]) * w + cols[0];
                for r in rows {
                    for cc in cols {
                        let i = (ci * h + r) * w + cc;
                        if input.data[i] > input.data[best] {
                            best = i;
                        }
                    }
                }
                out.push(input.data[best]);
                arg.push(best);
            }
        }
    }
    Ok((
        Tensor {
            shape: vec![c, ho, wo],
            data: out,
        },
        arg,
    ))
}

pub fn maxpool2_backward<T: Scalar>(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if argmax.len() != grad_out.len() {
        return Err(NnError::Shape("argmax and output gradient differ in length".into()));
    }
    let mut g = Tensor::zeros(input_shape);
    for (&i, &v) in argmax.iter().zip(&grad_out.data) {
        g.data[i] += v;
    }
    Ok(g)
}

pub fn relu<T: Scalar>(x: &mut [T]) {
    for v in x {
        if *v < T::ZERO {
            *v = T::ZERO;
        }
    }
}

/// Gradient of ReLU given its output: 1 where the output is positive, else 0
/// (including exactly at zero).
pub fn relu_backward<T: Scalar>(output: &[T], grad: &mut [T]) {
    for (g, &y) in grad.iter_mut().zip(output) {
        if y <= T::ZERO {
            *g = T::ZERO;
        }
    }
}

/// `y = W x + b` with `W` of shape `(out, in)`.
pub fn fc_forward<T: Scalar>(x: &[T], weight: &Tensor<T>, bias: &[T]) -> Result<Vec<T>> {
    let [o, i] = weight.shape[..] else {
        return Err(NnError::Shape("FC weight must be 2-D".into()));
    };
    if x.len() != i || bias.len() != o {
        return Err(NnError::Shape(format!("FC {o}×{i} got input {} and bias {}", x.len(), bias.len())));
    }
    Ok((0..o)
        .map(|r| bias[r] + weight.data[r * i..(r + 1) * i].iter().zip(x).map(|(&a, &b)| a * b).sum::<T>())
        .collect())
}

/// Returns `(input gradient, weight gradient, bias gradient)`.
pub fn fc_backward<T: Scalar>(x: &[T], weight: &Tensor<T>, grad_out: &[T]) -> (Vec<T>, Tensor<T>, Vec<T>) {
    let (o, i) = (weight.shape[0], weight.shape[1]);
    let mut gx = vec![T::ZERO; i];
    let mut gw = Tensor::zeros(&[o, i]);
    for r in 0..o {
        let g = grad_out[r];
        let wrow = &weight.data[r * i..(r + 1) * i];
        for ((gwv, gxv), (&xv, &wv)) in gw.data[r * i..(r + 1) * i].iter_mut().zip(gx.iter_mut()).zip(x.iter().zip(wrow)) {
            *gwv = g * xv;
            *gxv += g * wv;
        }
    }
    (gx, gw, grad_out.to_vec())
}

/// Softmax with max subtraction.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(logits[0], |a, b| if b > a { b } else { a });
    let e: Vec<T> = logits.iter().map(|&a| (a - max).exp()).collect();
    let sum: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / sum).collect()
}

/// Cross-entropy of softmax(logits) against class `target`; returns the loss
/// and its gradient with respect to the logits.
pub fn cross_entropy<T: Scalar>(logits: &[T], target: usize) -> (T, Vec<T>) {
    let max = logits.iter().copied().fold(logits[0], |a, b| if b > a { b } else { a });
    let sum: T = logits.iter().map(|&a| (a - max).exp()).sum();
    let log_z = max + sum.ln();
    let loss = log_z - logits[target];
    let grad = logits
        .iter()
        .enumerate()
        .map(|(k, &a)| (a - log_z).exp() - if k == target { T::ONE } else { T::ZERO })
        .collect();
    (loss, grad)
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise `1 / (1 - rate)`.
pub fn dropout_mask<T: Scalar>(len: usize, rate: f64, rng: &mut (impl Rng + ?Sized)) -> Vec<T> {
    let keep = T::from_f64(1.0 / (1.0 - rate));
    (0..len).map(|_| if rng.gen::<f64>() < rate { T::ZERO } else { keep }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_kernel_is_identity() {
        let x = Tensor::from_vec(&[1, 3, 3], (0..9).map(|v| v as f64).collect()).unwrap();
        let k = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(conv2d_forward(&x, &k, &[0.0], 1).unwrap(), x);
    }

    #[test]
    fn box_kernel_sums_constant_image() {
        let x = Tensor::from_vec(&[1, 5, 5], vec![2.5f64; 25]).unwrap();
        let k = Tensor::from_vec(&[1, 1, 3, 3], vec![1.0; 9]).unwrap();
        let y = conv2d_forward(&x, &k, &[0.0], 1).unwrap();
        assert_eq!(y.shape, [1, 3, 3]);
        assert!(y.data.iter().all(|&v| v == 22.5));
        let y2 = conv2d_forward(&x, &k, &[0.0], 2).unwrap();
        assert_eq!(y2.shape, [1, 2, 2]);
    }

    #[test]
    fn pooling_examples() {
        let x = Tensor::from_vec(&[1, 2, 2], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let (y, arg) = maxpool2_forward(&x).unwrap();
        assert_eq!(y.data, [4.0]);
        assert_eq!(arg, [3]);
        let c = Tensor::from_vec(&[2, 4, 4], vec![0.7f64; 32]).unwrap();
        let (y, arg) = maxpool2_forward(&c).unwrap();
        assert_eq!(y.shape, [2, 2, 2]);
        assert!(y.data.iter().all(|&v| v == 0.7));
        assert_eq!(arg[0], 0);
        let odd = Tensor::from_vec(&[1, 3, 3], (0..9).map(|v| v as f64).collect()).unwrap();
        let (y, _) = maxpool2_forward(&odd).unwrap();
        assert_eq!(y.data, [4.0, 5.0, 7.0, 8.0]);
    }

    #[test]
    fn relu_examples() {
        let mut x = vec![-1.0f64, 0.0, 2.0];
        relu(&mut x);
        assert_eq!(x, [0.0, 0.0, 2.0]);
        let mut g = vec![1.0; 3];
        relu_backward(&x, &mut g);
        assert_eq!(g, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0f64, 0.0]), [0.5, 0.5]);
        let p = softmax(&[3f64.ln(), 0.0]);
        assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
        let q = softmax(&[3f64.ln() + 100.0, 100.0]);
        assert!((q[0] - p[0]).abs() < 1e-9);
        let big = softmax(&[1000.0f64, -1000.0]);
        assert!(big.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::from_vec(&[1, 2, 2], vec![0.0f64; 4]).unwrap();
        let k = Tensor::from_vec(&[1, 1, 3, 3], vec![0.0; 9]).unwrap();
        assert!(conv2d_forward(&x, &k, &[0.0], 1).is_err());
        let k2 = Tensor::from_vec(&[1, 2, 1, 1], vec![0.0; 2]).unwrap();
        assert!(conv2d_forward(&x, &k2, &[0.0], 1).is_err());
        assert!(Tensor::from_vec(&[2, 2], vec![0.0f64; 3]).is_err());
    }
}
