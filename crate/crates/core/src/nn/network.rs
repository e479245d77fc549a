use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::{self, ConvGeom, LayerSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng;

/// Samples per inference chunk when evaluating in parallel.
const INFERENCE_CHUNK: usize = 64;

/// Layer stack plus the single-sample input shape and the init seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
}

impl Architecture {
    /// conv 8@3x3, relu, conv 16@3x3, relu, flatten, dense 64, relu, dense n, sigmoid.
    pub fn default_topology(input_shape: Vec<usize>, n_labels: usize, seed: u64) -> Self {
        Self {
            input_shape,
            layers: vec![
                LayerSpec::conv2d(8, 3, 3),
                LayerSpec::Relu,
                LayerSpec::conv2d(16, 3, 3),
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::dense(64),
                LayerSpec::Relu,
                LayerSpec::dense(n_labels),
                LayerSpec::Sigmoid,
            ],
            seed,
        }
    }

    /// One convolution whose kernel spans every row of a `[1, rows, cols]`
    /// input, followed by ReLU dense layers and a sigmoid output.
    pub fn band_conv(input_shape: Vec<usize>, filters: usize, kernel_w: usize, hidden: &[usize], n_labels: usize, seed: u64) -> Self {
        let rows = input_shape.get(1).copied().unwrap_or(1);
        let mut layers = vec![LayerSpec::conv2d(filters, rows, kernel_w), LayerSpec::Relu, LayerSpec::Flatten];
        for &h in hidden {
            layers.push(LayerSpec::dense(h));
            layers.push(LayerSpec::Relu);
        }
        layers.push(LayerSpec::dense(n_labels));
        layers.push(LayerSpec::Sigmoid);
        Self { input_shape, layers, seed }
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    pub spec: LayerSpec,
    pub in_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn in_len(&self) -> usize {
        self.in_shape.iter().product()
    }

    fn out_len(&self) -> usize {
        self.out_shape.iter().product()
    }

    fn geom(&self) -> ConvGeom {
        let LayerSpec::Conv2d { filters, kernel_h, kernel_w, stride } = self.spec else {
            unreachable!("geometry of a non-convolution layer")
        };
        ConvGeom {
            c: self.in_shape[0],
            h: self.in_shape[1],
            w: self.in_shape[2],
            f: filters,
            kh: kernel_h,
            kw: kernel_w,
            stride,
            ho: self.out_shape[1],
            wo: self.out_shape[2],
        }
    }
}

/// Per-layer (weights, bias) gradients, same layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b).copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Architecture,
    layers: Vec<Layer>,
}

impl Network {
    /// Builds the network and draws He-uniform weights (zero biases) from the architecture seed.
    pub fn new(arch: Architecture) -> Result<Self> {
        let mut net = Self::zeroed(arch)?;
        let seed = net.arch.seed;
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let fan_in = layer.spec.fan_in(&layer.in_shape);
            if fan_in == 0 {
                continue;
            }
            let limit = (6.0 / fan_in as f64).sqrt();
            let mut g = rng::rng_for(seed, &[0x696e6974, i as u64]);
            layer.weights.iter_mut().for_each(|w| *w = g.random_range(-limit..limit));
        }
        Ok(net)
    }

    /// Shape-checked network with all parameters zero.
    pub fn zeroed(arch: Architecture) -> Result<Self> {
        if arch.layers.is_empty() {
            return Err(Error::spec("network needs at least one layer"));
        }
        if arch.input_shape.is_empty() || arch.input_shape.contains(&0) {
            return Err(Error::shape(format!("invalid input shape {:?}", arch.input_shape)));
        }
        let mut shape = arch.input_shape.clone();
        let mut layers = Vec::with_capacity(arch.layers.len());
        for spec in &arch.layers {
            let out = spec.output_shape(&shape)?;
            let (nw, nb) = spec.param_counts(&shape);
            layers.push(Layer { spec: *spec, in_shape: shape, out_shape: out.clone(), weights: vec![0.0; nw], bias: vec![0.0; nb] });
            shape = out;
        }
        Ok(Self { arch, layers })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.arch.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.arch.input_len()
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_len)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(format!("{} parameters for a network of {}", params.len(), self.param_count())));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().expect("length checked"));
        }
        Ok(())
    }

    /// Weights and bias of layer `i`.
    pub fn layer_params_mut(&mut self, i: usize) -> Option<(&mut [f64], &mut [f64])> {
        self.layers.get_mut(i).map(|l| (l.weights.as_mut_slice(), l.bias.as_mut_slice()))
    }

    /// Accepts either one sample of the input shape or a leading batch axis.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let shape = input.shape();
        let (batch, batched) = if shape == self.input_shape() {
            (1, false)
        } else if shape.len() == self.input_shape().len() + 1 && &shape[1..] == self.input_shape() {
            (shape[0], true)
        } else {
            return Err(Error::shape(format!("input {shape:?} does not match network input {:?}", self.input_shape())));
        };
        let out = self.forward_batch(input.data(), batch)?;
        let out_shape = if batched { vec![batch, self.output_len()] } else { vec![self.output_len()] };
        Tensor::new(out_shape, out)
    }

    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        self.check_batch(x, batch)?;
        let mut cur = x.to_vec();
        for l in &self.layers {
            cur = layer_forward(l, &cur, batch);
        }
        Ok(cur)
    }

    /// Inference over many samples; chunks run in parallel and results are
    /// concatenated in input order.
    pub fn predict_many(&self, x: &[f64], count: usize) -> Result<Vec<f64>> {
        self.check_batch(x, count)?;
        let n_in = self.input_len();
        let chunks: Vec<Vec<f64>> = x
            .par_chunks(INFERENCE_CHUNK * n_in)
            .map(|c| self.forward_batch(c, c.len() / n_in))
            .collect::<Result<_>>()?;
        Ok(chunks.concat())
    }

    fn check_batch(&self, x: &[f64], batch: usize) -> Result<()> {
        if x.len() != batch * self.input_len() {
            return Err(Error::shape(format!("{} inputs for batch {batch} of size {}", x.len(), self.input_len())));
        }
        Ok(())
    }

    fn trace(&self, x: &[f64], batch: usize) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for l in &self.layers {
            let next = layer_forward(l, acts.last().expect("non-empty"), batch);
            acts.push(next);
        }
        acts
    }

    /// Quadratic loss, exact gradients and predictions for one batch.
    pub fn gradients(&self, x: &[f64], targets: &[f64], batch: usize) -> Result<(f64, Gradients, Vec<f64>)> {
        self.check_batch(x, batch)?;
        if batch == 0 {
            return Err(Error::input("empty batch"));
        }
        if targets.len() != batch * self.output_len() {
            return Err(Error::shape(format!("{} targets for batch {batch} of {} outputs", targets.len(), self.output_len())));
        }
        let acts = self.trace(x, batch);
        let pred = acts.last().expect("non-empty").clone();
        let inv_b = 1.0 / batch as f64;
        let loss = 0.5 * pred.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() * inv_b;
        let mut delta: Vec<f64> = pred.iter().zip(targets).map(|(p, t)| (p - t) * inv_b).collect();

        let mut grads: Vec<(Vec<f64>, Vec<f64>)> =
            self.layers.iter().map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()])).collect();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let need_dx = i > 0;
            let x_in = &acts[i];
            let y_out = &acts[i + 1];
            match l.spec {
                LayerSpec::Sigmoid => {
                    for (d, y) in delta.iter_mut().zip(y_out) {
                        *d *= y * (1.0 - y);
                    }
                }
                LayerSpec::Relu => {
                    for (d, v) in delta.iter_mut().zip(x_in) {
                        if *v <= 0.0 {
                            *d = 0.0;
                        }
                    }
                }
                LayerSpec::Flatten => {}
                LayerSpec::Dense { units } => {
                    let (dw, db) = &mut grads[i];
                    let n_in = l.in_len();
                    let mut dx = if need_dx { vec![0.0; batch * n_in] } else { Vec::new() };
                    layers::dense_backward(
                        batch,
                        n_in,
                        units,
                        &l.weights,
                        x_in,
                        &delta,
                        dw,
                        db,
                        need_dx.then_some(dx.as_mut_slice()),
                    );
                    delta = dx;
                }
                LayerSpec::Conv2d { .. } => {
                    let g = l.geom();
                    let (dw, db) = &mut grads[i];
                    let mut dx = if need_dx { vec![0.0; batch * g.in_len()] } else { Vec::new() };
                    for b in 0..batch {
                        let xb = &x_in[b * g.in_len()..(b + 1) * g.in_len()];
                        let dyb = &delta[b * g.out_len()..(b + 1) * g.out_len()];
                        let dxb = need_dx.then(|| &mut dx[b * g.in_len()..(b + 1) * g.in_len()]);
                        layers::conv_backward(&g, &l.weights, xb, dyb, dw, db, dxb);
                    }
                    delta = dx;
                }
            }
        }
        Ok((loss, Gradients { layers: grads }, pred))
    }

    /// One SGD step; returns the loss before the update.
    pub fn backward_and_step(&mut self, x: &[f64], targets: &[f64], batch: usize, learning_rate: f64) -> Result<f64> {
        self.step_with_predictions(x, targets, batch, learning_rate).map(|(loss, _)| loss)
    }

    pub(crate) fn step_with_predictions(
        &mut self,
        x: &[f64],
        targets: &[f64],
        batch: usize,
        learning_rate: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let (loss, grads, pred) = self.gradients(x, targets, batch)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("loss is {loss}")));
        }
        if grads.layers.iter().any(|(w, b)| w.iter().chain(b).any(|g| !g.is_finite())) {
            return Err(Error::Diverged("non-finite gradient".into()));
        }
        for (l, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            for (p, g) in l.weights.iter_mut().zip(gw) {
                *p -= learning_rate * g;
            }
            for (p, g) in l.bias.iter_mut().zip(gb) {
                *p -= learning_rate * g;
            }
        }
        Ok((loss, pred))
    }

    pub fn predict_topk(&self, input: &Tensor, k: usize) -> Result<Vec<usize>> {
        if k > self.output_len() {
            return Err(Error::spec(format!("k = {k} exceeds {} outputs", self.output_len())));
        }
        if input.shape() != self.input_shape() {
            return Err(Error::shape(format!("input {:?} is not a single sample of {:?}", input.shape(), self.input_shape())));
        }
        let out = self.forward_batch(input.data(), 1)?;
        Ok(top_k(&out, k))
    }
}

fn layer_forward(l: &Layer, x: &[f64], batch: usize) -> Vec<f64> {
    match l.spec {
        LayerSpec::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
        LayerSpec::Sigmoid => x.iter().map(|&v| layers::sigmoid(v)).collect(),
        LayerSpec::Flatten => x.to_vec(),
        LayerSpec::Dense { units } => {
            let mut y = vec![0.0; batch * units];
            layers::dense_forward(batch, l.in_len(), units, &l.weights, &l.bias, x, &mut y);
            y
        }
        LayerSpec::Conv2d { .. } => {
            let g = l.geom();
            let mut y = vec![0.0; batch * g.out_len()];
            for (xb, yb) in x.chunks_exact(g.in_len()).zip(y.chunks_exact_mut(g.out_len())) {
                layers::conv_forward(&g, &l.weights, &l.bias, xb, yb);
            }
            y
        }
    }
}

/// Indices of the `k` largest values, ties broken toward the lower index,
/// returned in ascending index order.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut out: Vec<usize> = idx.into_iter().take(k).collect();
    out.sort_unstable();
    out
}

/// `0.5 * sum (pred - target)^2 / batch`, where batch is the leading axis of a
/// 2-D tensor and 1 otherwise.
pub fn loss_quadratic(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!("prediction {:?} vs target {:?}", pred.shape(), target.shape())));
    }
    let batch = if pred.shape().len() >= 2 { pred.shape()[0].max(1) } else { 1 };
    Ok(0.5 * pred.data().iter().zip(target.data()).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / batch as f64)
}

/// Derivative of [`loss_quadratic`] with respect to the prediction.
pub fn loss_quadratic_grad(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("prediction and target shapes differ"));
    }
    let batch = if pred.shape().len() >= 2 { pred.shape()[0].max(1) } else { 1 };
    Tensor::new(
        pred.shape().to_vec(),
        pred.data().iter().zip(target.data()).map(|(p, t)| (p - t) / batch as f64).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_arch(seed: u64) -> Architecture {
        Architecture {
            input_shape: vec![1, 5, 6],
            layers: vec![
                LayerSpec::conv2d(2, 3, 3),
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::dense(8),
                LayerSpec::Relu,
                LayerSpec::dense(4),
                LayerSpec::Sigmoid,
            ],
            seed,
        }
    }

    #[test]
    fn identity_dense_passes_input() {
        let arch = Architecture { input_shape: vec![3], layers: vec![LayerSpec::dense(3)], seed: 0 };
        let mut net = Network::zeroed(arch).unwrap();
        let (w, _) = net.layer_params_mut(0).unwrap();
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let x = Tensor::from_vec(vec![0.5, -2.0, 3.0]).unwrap();
        assert_eq!(net.forward(&x).unwrap().data(), x.data());
    }

    #[test]
    fn relu_kills_negatives_and_unit_conv_is_identity() {
        let relu = Network::zeroed(Architecture { input_shape: vec![4], layers: vec![LayerSpec::Relu], seed: 0 }).unwrap();
        let x = Tensor::from_vec(vec![-1.0, -0.1, -5.0, -2.0]).unwrap();
        assert!(relu.forward(&x).unwrap().data().iter().all(|&v| v == 0.0));

        let mut conv =
            Network::zeroed(Architecture { input_shape: vec![1, 2, 3], layers: vec![LayerSpec::conv2d(1, 1, 1)], seed: 0 })
                .unwrap();
        conv.layer_params_mut(0).unwrap().0[0] = 1.0;
        let x = Tensor::new(vec![1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(conv.forward(&x).unwrap().data(), x.data());
    }

    #[test]
    fn loss_examples() {
        let p = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(loss_quadratic(&p, &p).unwrap(), 0.0);
        let t = Tensor::new(vec![1, 3], vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(loss_quadratic(&p, &t).unwrap(), 1.5);
        let g = loss_quadratic_grad(&p, &t).unwrap();
        assert_eq!(g.data(), &[1.0, 1.0, 1.0]);
        assert!(loss_quadratic(&p, &Tensor::zeros(vec![3])).is_err());
    }

    #[test]
    fn finite_difference_gradients() {
        let net = Network::new(tiny_arch(3)).unwrap();
        let batch = 3;
        let mut g = rng::rng(11);
        let x: Vec<f64> = (0..batch * 30).map(|_| g.random_range(-1.0..1.0)).collect();
        let t: Vec<f64> = (0..batch * 4).map(|_| g.random_range(0.0..1.0)).collect();
        let (_, grads, _) = net.gradients(&x, &t, batch).unwrap();
        let analytic = grads.flat();
        let base = net.params_flat();
        let eps = 1e-5;
        for (i, a) in analytic.iter().enumerate() {
            let mut probe = net.clone();
            let mut p = base.clone();
            p[i] += eps;
            probe.set_params_flat(&p).unwrap();
            let up = probe.gradients(&x, &t, batch).unwrap().0;
            p[i] -= 2.0 * eps;
            probe.set_params_flat(&p).unwrap();
            let down = probe.gradients(&x, &t, batch).unwrap().0;
            let numeric = (up - down) / (2.0 * eps);
            let scale = a.abs().max(numeric.abs()).max(1e-6);
            assert!((a - numeric).abs() / scale < 1e-4, "param {i}: {a} vs {numeric}");
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut net = Network::new(tiny_arch(1)).unwrap();
        let before = net.params_flat();
        let loss = net.backward_and_step(&[0.3; 60], &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0], 2, 0.0).unwrap();
        assert!(loss > 0.0);
        assert_eq!(net.params_flat(), before);
    }

    #[test]
    fn single_weight_descends_to_target() {
        let arch = Architecture { input_shape: vec![1], layers: vec![LayerSpec::dense(1)], seed: 0 };
        let mut net = Network::zeroed(arch).unwrap();
        // Closed form: error shrinks by (1 - 0.1 * x^2) per step on weight and bias.
        for _ in 0..1000 {
            net.backward_and_step(&[1.0], &[0.7], 1, 0.1).unwrap();
        }
        let y = net.forward_batch(&[1.0], 1).unwrap()[0];
        assert!((y - 0.7).abs() < 1e-6);
    }

    #[test]
    fn divergence_is_reported() {
        let arch = Architecture { input_shape: vec![1], layers: vec![LayerSpec::dense(1)], seed: 0 };
        let mut net = Network::zeroed(arch).unwrap();
        net.layer_params_mut(0).unwrap().0[0] = 1e200;
        let err = net.backward_and_step(&[1e200], &[0.0], 1, 0.1);
        assert!(matches!(err, Err(Error::Diverged(_))));
    }

    #[test]
    fn topk_examples() {
        assert_eq!(top_k(&[0.9, 0.1, 0.8, 0.2], 2), vec![0, 2]);
        assert_eq!(top_k(&[0.9, 0.1, 0.8, 0.2], 4), vec![0, 1, 2, 3]);
        assert_eq!(top_k(&[0.5, 0.7, 0.5, 0.5], 2), vec![0, 1]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let net = Network::new(tiny_arch(0)).unwrap();
        assert!(matches!(net.forward(&Tensor::zeros(vec![1, 5, 5])), Err(Error::Shape(_))));
        let out = net.forward(&Tensor::zeros(vec![2, 1, 5, 6])).unwrap();
        assert_eq!(out.shape(), &[2, 4]);
        assert!(Network::new(Architecture { input_shape: vec![1, 2, 2], layers: vec![LayerSpec::conv2d(1, 3, 3)], seed: 0 }).is_err());
    }

    #[test]
    fn parallel_inference_matches_batch() {
        let net = Network::new(tiny_arch(2)).unwrap();
        let x: Vec<f64> = (0..150 * 30).map(|i| ((i * 37) % 11) as f64 / 11.0 - 0.5).collect();
        assert_eq!(net.predict_many(&x, 150).unwrap(), net.forward_batch(&x, 150).unwrap());
    }
}
