use crate::error::{Error, Result};
use crate::nn::config::TrainConfig;
use crate::nn::layer::{Activation, DenseLayer, LayerCache, LayerGrads, LayerOptim};
use crate::nn::loss::{bce_logit_grad, bce_loss, mse_loss, Loss};
use crate::nn::matrix::Matrix;
use crate::scalar::Scalar;

/// A stack of dense layers applied in order.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequential<T> {
    layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("a network needs at least one layer".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::shape(
                    format!("layer {} input", i + 1),
                    format!("{} (previous output)", w[0].out_dim()),
                    format!("{}", w[1].in_dim()),
                ));
            }
        }
        Ok(Sequential { layers })
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn infer(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut h = self.layers[0].infer(x)?;
        for layer in &self.layers[1..] {
            h = layer.infer(&h)?;
        }
        Ok(h)
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<(Matrix<T>, Vec<LayerCache<T>>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let (mut h, c) = self.layers[0].forward(x)?;
        caches.push(c);
        for layer in &self.layers[1..] {
            let (next, c) = layer.forward(&h)?;
            caches.push(c);
            h = next;
        }
        Ok((h, caches))
    }

    fn check_caches(&self, caches: &[LayerCache<T>]) -> Result<()> {
        if caches.len() != self.layers.len() {
            return Err(Error::StaleCache(format!(
                "{} caches for {} layers",
                caches.len(),
                self.layers.len()
            )));
        }
        Ok(())
    }

    /// Backpropagates `grad_out` (w.r.t. the network output).
    pub fn backward(&self, caches: &[LayerCache<T>], grad_out: &Matrix<T>) -> Result<(Matrix<T>, Vec<LayerGrads<T>>)> {
        self.check_caches(caches)?;
        let last = self.layers.len() - 1;
        let (g, lg) = self.layers[last].backward(&caches[last], grad_out)?;
        self.backward_from(caches, last, g, lg)
    }

    /// Backpropagates a gradient taken w.r.t. the last layer's pre-activation.
    pub fn backward_pre(&self, caches: &[LayerCache<T>], delta: &Matrix<T>) -> Result<(Matrix<T>, Vec<LayerGrads<T>>)> {
        self.check_caches(caches)?;
        let last = self.layers.len() - 1;
        let (g, lg) = self.layers[last].backward_pre(&caches[last], delta)?;
        self.backward_from(caches, last, g, lg)
    }

    fn backward_from(
        &self,
        caches: &[LayerCache<T>],
        last: usize,
        mut grad: Matrix<T>,
        last_grads: LayerGrads<T>,
    ) -> Result<(Matrix<T>, Vec<LayerGrads<T>>)> {
        let mut grads = vec![last_grads];
        for i in (0..last).rev() {
            let (g, lg) = self.layers[i].backward(&caches[i], &grad)?;
            grads.push(lg);
            grad = g;
        }
        grads.reverse();
        Ok((grad, grads))
    }

    /// Loss value of the network on `(x, y)`; `y` is n×1 labels for BCE.
    pub fn loss(&self, loss: Loss, x: &Matrix<T>, y: &Matrix<T>) -> Result<T> {
        let out = self.infer(x)?;
        match loss {
            Loss::Mse => Ok(mse_loss(&out, y)?.0),
            Loss::Bce => Ok(bce_loss(out.as_slice(), y.as_slice())?.0),
        }
    }

    /// Loss and parameter gradients. With BCE behind a sigmoid output the
    /// gradient is taken directly w.r.t. the logits.
    pub fn loss_and_grads(&self, loss: Loss, x: &Matrix<T>, y: &Matrix<T>) -> Result<(T, Vec<LayerGrads<T>>)> {
        let (out, caches) = self.forward(x)?;
        match loss {
            Loss::Mse => {
                let (l, g) = mse_loss(&out, y)?;
                Ok((l, self.backward(&caches, &g)?.1))
            }
            Loss::Bce => {
                if out.cols() != 1 || y.shape() != out.shape() {
                    return Err(Error::shape(
                        "bce network output",
                        format!("{}x1", out.rows()),
                        format!("output {:?}, labels {:?}", out.shape(), y.shape()),
                    ));
                }
                let (l, gp) = bce_loss(out.as_slice(), y.as_slice())?;
                let last = self.layers.len() - 1;
                let grads = if self.layers[last].activation() == Activation::Sigmoid {
                    let d = bce_logit_grad(out.as_slice(), y.as_slice())?;
                    let delta = Matrix::from_vec(out.rows(), 1, d)?;
                    self.backward_pre(&caches, &delta)?.1
                } else {
                    let g = Matrix::from_vec(out.rows(), 1, gp)?;
                    self.backward(&caches, &g)?.1
                };
                Ok((l, grads))
            }
        }
    }

    /// Adam update of every layer; `name` prefixes the block names.
    pub fn adam_update(
        &mut self,
        name: &str,
        grads: &[LayerGrads<T>],
        optim: &mut [LayerOptim<T>],
        cfg: &TrainConfig,
    ) -> Result<()> {
        for (i, ((layer, g), o)) in self.layers.iter_mut().zip(grads).zip(optim.iter_mut()).enumerate() {
            layer.adam_update(&format!("{name}.{i}"), g, o, cfg)?;
        }
        Ok(())
    }

    pub fn new_optim(&self) -> Vec<LayerOptim<T>> {
        self.layers.iter().map(LayerOptim::for_layer).collect()
    }

    /// Parameters flattened layer by layer, weights before bias.
    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights().as_slice());
            out.extend_from_slice(l.bias());
        }
        out
    }

    pub(crate) fn param_mut(&mut self, mut index: usize) -> &mut T {
        for l in &mut self.layers {
            let nw = l.out_dim() * l.in_dim();
            if index < nw {
                return &mut l.weights_mut().as_mut_slice()[index];
            }
            index -= nw;
            if index < l.out_dim() {
                return &mut l.bias_mut()[index];
            }
            index -= l.out_dim();
        }
        panic!("parameter index out of range");
    }
}

/// Flattens per-layer gradients in the same order as [`Sequential::flat_params`].
pub fn flatten_grads<T: Scalar>(grads: &[LayerGrads<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for g in grads {
        out.extend_from_slice(g.weights.as_slice());
        out.extend_from_slice(&g.bias);
    }
    out
}
