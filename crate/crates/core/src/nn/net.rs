use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ops::{
    conv2d_backward, conv2d_forward, cross_entropy, dropout_mask, fc_backward, fc_forward, maxpool2_backward, maxpool2_forward, relu,
    relu_backward, softmax,
};
use super::{NnError, Result, Scalar, Tensor};

/// One convolution stage: conv, ReLU, then optional 2×2 max pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub filter: usize,
    pub channels: usize,
    pub stride: usize,
    pub pool: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    /// Side of the square input crops, pixels.
    pub input: usize,
    /// Stages run separately on each channel before the merge.
    pub twin: Vec<StageSpec>,
    /// Stages run on the concatenated channels.
    pub shared: Vec<StageSpec>,
    /// Hidden fully connected widths; each is followed by ReLU and dropout.
    pub hidden: Vec<usize>,
    pub dropout: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl NetConfig {
    /// 64×64 crops, filters (8, 4, 3, 3), widths (8, 16, 16, 16), FC 128.
    pub fn desk() -> Self {
        let s = |filter, channels, stride| StageSpec {
            filter,
            channels,
            stride,
            pool: true,
        };
        Self {
            input: 64,
            twin: vec![s(8, 8, 1), s(4, 16, 2)],
            shared: vec![s(3, 16, 1), s(3, 16, 1)],
            hidden: vec![128, 128],
            dropout: 0.5,
        }
    }

    /// 250×250 crops, filters (16, 8, 5, 3), widths (32, 64, 64, 64), FC 1024.
    pub fn paper_scale() -> Self {
        let s = |filter, channels, stride| StageSpec {
            filter,
            channels,
            stride,
            pool: true,
        };
        Self {
            input: 250,
            twin: vec![s(16, 32, 2), s(8, 64, 2)],
            shared: vec![s(5, 64, 1), s(3, 64, 1)],
            hidden: vec![1024, 1024],
            dropout: 0.5,
        }
    }

    /// The layer graph with every size derived from the configuration.
    pub fn layer_specs(&self) -> Result<Vec<LayerSpec>> {
        if self.input == 0 || self.twin.is_empty() {
            return Err(NnError::Config("input size and twin stages are required".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NnError::Config("dropout must lie in [0, 1)".into()));
        }
        let mut out = Vec::new();
        let stage = |branch: &str, (c, h, w): (usize, usize, usize), s: &StageSpec, out: &mut Vec<LayerSpec>| {
            if s.stride == 0 || s.filter == 0 || s.channels == 0 {
                return Err(NnError::Config(format!("{branch}: filter, channels and stride must be positive")));
            }
            if h < s.filter || w < s.filter {
                return Err(NnError::Config(format!("{branch}: {h}×{w} input is smaller than the {0}×{0} filter", s.filter)));
            }
            let (ho, wo) = ((h - s.filter) / s.stride + 1, (w - s.filter) / s.stride + 1);
            out.push(LayerSpec::Conv {
                branch: branch.into(),
                in_channels: c,
                out_channels: s.channels,
                filter: s.filter,
                stride: s.stride,
                output: [s.channels, ho, wo],
            });
            out.push(LayerSpec::Relu);
            if s.pool {
                let (hp, wp) = (ho.div_ceil(2), wo.div_ceil(2));
                out.push(LayerSpec::MaxPool {
                    output: [s.channels, hp, wp],
                });
                Ok((s.channels, hp, wp))
            } else {
                Ok((s.channels, ho, wo))
            }
        };
        let mut shape = (1, self.input, self.input);
        for branch in ["a", "b"] {
            shape = (1, self.input, self.input);
            for s in &self.twin {
                shape = stage(branch, shape, s, &mut out)?;
            }
        }
        shape.0 *= 2;
        out.push(LayerSpec::Concat {
            output: [shape.0, shape.1, shape.2],
        });
        for s in &self.shared {
            shape = stage("shared", shape, s, &mut out)?;
        }
        let mut width = shape.0 * shape.1 * shape.2;
        for &h in &self.hidden {
            out.push(LayerSpec::FullyConnected { inputs: width, outputs: h });
            out.push(LayerSpec::Relu);
            out.push(LayerSpec::Dropout { rate: self.dropout });
            width = h;
        }
        out.push(LayerSpec::FullyConnected { inputs: width, outputs: 2 });
        out.push(LayerSpec::Softmax { classes: 2 });
        Ok(out)
    }
}

/// Node of the layer graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LayerSpec {
    Conv {
        branch: String,
        in_channels: usize,
        out_channels: usize,
        filter: usize,
        stride: usize,
        output: [usize; 3],
    },
    Relu,
    MaxPool {
        output: [usize; 3],
    },
    Concat {
        output: [usize; 3],
    },
    FullyConnected {
        inputs: usize,
        outputs: usize,
    },
    Dropout {
        rate: f64,
    },
    Softmax {
        classes: usize,
    },
}

/// Parameter gradients, one tensor per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Self {
            tensors: net.params.iter().map(|p| Tensor::zeros(&p.shape)).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients<T>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvLayer {
    /// Index of the kernel tensor; the bias follows it.
    param: usize,
    stride: usize,
    pool: bool,
}

/// Two-channel classifier. Parameters are stored in declaration order:
/// (kernel, bias) for channel-A stages, channel-B stages, shared stages, then
/// (weight, bias) for each FC layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub config: NetConfig,
    pub params: Vec<Tensor<T>>,
}

struct StageCache<T> {
    input: Tensor<T>,
    activated: Tensor<T>,
    argmax: Option<Vec<usize>>,
}

struct FcCache<T> {
    input: Vec<T>,
    activated: Vec<T>,
    mask: Option<Vec<T>>,
}

struct Trace<T> {
    a: Vec<StageCache<T>>,
    b: Vec<StageCache<T>>,
    merged_channels: [usize; 2],
    shared: Vec<StageCache<T>>,
    shared_shape: Vec<usize>,
    fc: Vec<FcCache<T>>,
    last_input: Vec<T>,
}

impl<T: Scalar> Network<T> {
    /// He-uniform weights `U(±√(6 / fan_in))` and zero biases, seeded.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        let specs = config.layer_specs()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut push = |shape: Vec<usize>, fan_in: usize, n_out: usize, rng: &mut ChaCha8Rng| {
            let bound = (6.0 / fan_in as f64).sqrt();
            let n: usize = shape.iter().product();
            params.push(Tensor {
                shape,
                data: (0..n).map(|_| T::from_f64(rng.gen_range(-bound..bound))).collect(),
            });
            params.push(Tensor::zeros(&[n_out]));
        };
        for spec in &specs {
            match spec {
                LayerSpec::Conv {
                    in_channels,
                    out_channels,
                    filter,
                    ..
                } => push(
                    vec![*out_channels, *in_channels, *filter, *filter],
                    in_channels * filter * filter,
                    *out_channels,
                    &mut rng,
                ),
                LayerSpec::FullyConnected { inputs, outputs } => push(vec![*outputs, *inputs], *inputs, *outputs, &mut rng),
                _ => {}
            }
        }
        Ok(Self { config, params })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            params: self
                .params
                .iter()
                .map(|p| Tensor {
                    shape: p.shape.clone(),
                    data: p.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
                })
                .collect(),
        }
    }

    fn stages(&self) -> (Vec<ConvLayer>, Vec<ConvLayer>, Vec<ConvLayer>, usize) {
        let mut p = 0;
        let mut take = |specs: &[StageSpec]| {
            specs
                .iter()
                .map(|s| {
                    let l = ConvLayer {
                        param: p,
                        stride: s.stride,
                        pool: s.pool,
                    };
                    p += 2;
                    l
                })
                .collect::<Vec<_>>()
        };
        let a = take(&self.config.twin);
        let b = take(&self.config.twin);
        let shared = take(&self.config.shared);
        (a, b, shared, p)
    }

    fn run_stages(&self, mut x: Tensor<T>, layers: &[ConvLayer], trace: bool) -> Result<(Tensor<T>, Vec<StageCache<T>>)> {
        let mut caches = Vec::new();
        for l in layers {
            let mut y = conv2d_forward(&x, &self.params[l.param], &self.params[l.param + 1].data, l.stride)?;
            relu(&mut y.data);
            let (out, argmax) = if l.pool {
                let (p, a) = maxpool2_forward(&y)?;
                (p, Some(a))
            } else {
                (y.clone(), None)
            };
            if trace {
                caches.push(StageCache {
                    input: x,
                    activated: y,
                    argmax,
                });
            }
            x = out;
        }
        Ok((x, caches))
    }

    fn check_inputs(&self, depth: &[T], gripper: &[T]) -> Result<()> {
        let n = self.config.input * self.config.input;
        if depth.len() != n || gripper.len() != n {
            return Err(NnError::Shape(format!(
                "inputs must have {n} values each, got {} and {}",
                depth.len(),
                gripper.len()
            )));
        }
        Ok(())
    }

    fn run(&self, depth: &[T], gripper: &[T], mut dropout: Option<&mut dyn RngCore>, trace: bool) -> Result<(Vec<T>, Option<Trace<T>>)> {
        self.check_inputs(depth, gripper)?;
        let side = self.config.input;
        let (la, lb, ls, fc0) = self.stages();
        let (ya, ca) = self.run_stages(Tensor::from_vec(&[1, side, side], depth.to_vec())?, &la, trace)?;
        let (yb, cb) = self.run_stages(Tensor::from_vec(&[1, side, side], gripper.to_vec())?, &lb, trace)?;
        let merged_channels = [ya.shape[0], yb.shape[0]];
        let mut merged = ya.data;
        merged.extend_from_slice(&yb.data);
        let merged = Tensor::from_vec(&[ya.shape[0] + yb.shape[0], ya.shape[1], ya.shape[2]], merged)?;
        let (ys, cs) = self.run_stages(merged, &ls, trace)?;
        let shared_shape = ys.shape.clone();
        let mut x = ys.data;
        let mut fc_caches = Vec::new();
        let hidden = self.config.hidden.len();
        for k in 0..hidden {
            let p = fc0 + 2 * k;
            let mut y = fc_forward(&x, &self.params[p], &self.params[p + 1].data)?;
            relu(&mut y);
            let activated = y.clone();
            let mask = match dropout.as_deref_mut() {
                Some(rng) if self.config.dropout > 0.0 => {
                    let m: Vec<T> = dropout_mask(y.len(), self.config.dropout, rng);
                    for (v, &mv) in y.iter_mut().zip(&m) {
                        *v *= mv;
                    }
                    Some(m)
                }
                _ => None,
            };
            if trace {
                fc_caches.push(FcCache {
                    input: x,
                    activated,
                    mask,
                });
            }
            x = y;
        }
        let p = fc0 + 2 * hidden;
        let logits = fc_forward(&x, &self.params[p], &self.params[p + 1].data)?;
        let trace = trace.then(|| Trace {
            a: ca,
            b: cb,
            merged_channels,
            shared: cs,
            shared_shape,
            fc: fc_caches,
            last_input: x,
        });
        Ok((logits, trace))
    }

    /// Final-layer activations before the softmax.
    pub fn logits(&self, depth: &[T], gripper: &[T]) -> Result<Vec<T>> {
        Ok(self.run(depth, gripper, None, false)?.0)
    }

    /// Inference: `(y0, y1)` with `y0` the predicted success rate. Dropout is off.
    pub fn forward(&self, depth: &[T], gripper: &[T]) -> Result<(T, T)> {
        let p = softmax(&self.logits(depth, gripper)?);
        Ok((p[0], p[1]))
    }

    /// Training-mode forward: dropout masks are drawn from `rng`.
    pub fn forward_train(&self, depth: &[T], gripper: &[T], rng: &mut dyn RngCore) -> Result<(T, T)> {
        let p = softmax(&self.run(depth, gripper, Some(rng), false)?.0);
        Ok((p[0], p[1]))
    }

    /// Cross-entropy loss for class `target` (0 = success) and its parameter
    /// gradients. Dropout is active when `rng` is given.
    pub fn loss_and_grad(&self, depth: &[T], gripper: &[T], target: usize, rng: Option<&mut dyn RngCore>) -> Result<(T, Gradients<T>)> {
        if target > 1 {
            return Err(NnError::Shape(format!("target class {target} out of range")));
        }
        let (logits, trace) = self.run(depth, gripper, rng, true)?;
        let trace = trace.expect("traced run");
        let (loss, dlogits) = cross_entropy(&logits, target);
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.params.len()];
        let (la, lb, ls, fc0) = self.stages();
        let hidden = self.config.hidden.len();

        let p = fc0 + 2 * hidden;
        let (mut g, gw, gb) = fc_backward(&trace.last_input, &self.params[p], &dlogits);
        grads[p] = Some(gw);
        grads[p + 1] = Some(Tensor::from_vec(&[gb.len()], gb)?);
        for k in (0..hidden).rev() {
            let c = &trace.fc[k];
            if let Some(m) = &c.mask {
                for (gv, &mv) in g.iter_mut().zip(m) {
                    *gv *= mv;
                }
            }
            relu_backward(&c.activated, &mut g);
            let p = fc0 + 2 * k;
            let (gx, gw, gb) = fc_backward(&c.input, &self.params[p], &g);
            grads[p] = Some(gw);
            grads[p + 1] = Some(Tensor::from_vec(&[gb.len()], gb)?);
            g = gx;
        }
        let gs = Tensor::from_vec(&trace.shared_shape, g)?;
        let gm = self.back_stages(gs, &ls, &trace.shared, &mut grads)?;
        let plane = gm.shape[1] * gm.shape[2];
        let split = trace.merged_channels[0] * plane;
        let ga = Tensor::from_vec(&[trace.merged_channels[0], gm.shape[1], gm.shape[2]], gm.data[..split].to_vec())?;
        let gb = Tensor::from_vec(&[trace.merged_channels[1], gm.shape[1], gm.shape[2]], gm.data[split..].to_vec())?;
        self.back_stages(ga, &la, &trace.a, &mut grads)?;
        self.back_stages(gb, &lb, &trace.b, &mut grads)?;
        Ok((
            loss,
            Gradients {
                tensors: grads.into_iter().map(|g| g.expect("every parameter has a gradient")).collect(),
            },
        ))
    }

    fn back_stages(&self, mut g: Tensor<T>, layers: &[ConvLayer], caches: &[StageCache<T>], grads: &mut [Option<Tensor<T>>]) -> Result<Tensor<T>> {
        for (l, c) in layers.iter().zip(caches).rev() {
            let mut gy = match &c.argmax {
                Some(arg) => maxpool2_backward(&c.activated.shape, arg, &g)?,
                None => g,
            };
            relu_backward(&c.activated.data, &mut gy.data);
            let (gx, gk, gb) = conv2d_backward(&c.input, &self.params[l.param], l.stride, &gy)?;
            grads[l.param] = Some(gk);
            grads[l.param + 1] = Some(Tensor::from_vec(&[gb.len()], gb)?);
            g = gx;
        }
        Ok(g)
    }
}
