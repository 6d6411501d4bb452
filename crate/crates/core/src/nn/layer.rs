use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::adam::{adam_step, AdamState};
use crate::nn::config::TrainConfig;
use crate::nn::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    z
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn derivative<T: Scalar>(self, z: T, y: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => y * (T::one() - y),
            Activation::Identity => T::one(),
        }
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

// Every parameter mutation takes a fresh generation so caches from earlier
// forward passes can be recognised as stale.
static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Fully connected layer `y = act(x·Wᵀ + b)` with `W` stored out×in.
#[derive(Clone, Debug)]
pub struct DenseLayer<T> {
    weights: Matrix<T>,
    bias: Vec<T>,
    activation: Activation,
    generation: u64,
}

impl<T: PartialEq> PartialEq for DenseLayer<T> {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights && self.bias == other.bias && self.activation == other.activation
    }
}

/// Values retained by a forward pass for the matching backward pass.
#[derive(Clone, Debug)]
pub struct LayerCache<T> {
    input: Matrix<T>,
    pre: Matrix<T>,
    output: Matrix<T>,
    generation: u64,
}

impl<T: Scalar> LayerCache<T> {
    pub fn output(&self) -> &Matrix<T> {
        &self.output
    }

    pub fn pre_activation(&self) -> &Matrix<T> {
        &self.pre
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> LayerGrads<T> {
    pub fn zeros_like(layer: &DenseLayer<T>) -> Self {
        LayerGrads {
            weights: Matrix::zeros(layer.out_dim(), layer.in_dim()),
            bias: vec![T::zero(); layer.out_dim()],
        }
    }

    pub fn accumulate(&mut self, other: &LayerGrads<T>) {
        for (a, b) in self.weights.as_mut_slice().iter_mut().zip(other.weights.as_slice()) {
            *a = *a + *b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a = *a + *b;
        }
    }
}

/// Adam moments for the two blocks of a layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerOptim<T> {
    pub weights: AdamState<T>,
    pub bias: AdamState<T>,
}

impl<T: Scalar> LayerOptim<T> {
    pub fn for_layer(layer: &DenseLayer<T>) -> Self {
        LayerOptim {
            weights: AdamState::new(layer.out_dim() * layer.in_dim()),
            bias: AdamState::new(layer.out_dim()),
        }
    }
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weights: Matrix<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::shape(
                "DenseLayer::new bias",
                format!("{} entries", weights.rows()),
                format!("{} entries", bias.len()),
            ));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
            generation: next_generation(),
        })
    }

    /// Uniform fan-in initialization: He-style for ReLU, Xavier-style otherwise.
    /// Biases start at zero.
    pub fn init(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = match activation {
            Activation::Relu => (6.0 / in_dim as f64).sqrt(),
            Activation::Sigmoid | Activation::Identity => (6.0 / (in_dim + out_dim) as f64).sqrt(),
        };
        let data = (0..in_dim * out_dim)
            .map(|_| T::lit(limit * (2.0 * rng.random::<f64>() - 1.0)))
            .collect();
        DenseLayer {
            weights: Matrix::from_vec(out_dim, in_dim, data).expect("sized above"),
            bias: vec![T::zero(); out_dim],
            activation,
            generation: next_generation(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Matrix<T> {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }

    /// Mutable access to the weights; invalidates outstanding caches.
    pub fn weights_mut(&mut self) -> &mut Matrix<T> {
        self.generation = next_generation();
        &mut self.weights
    }

    /// Mutable access to the bias; invalidates outstanding caches.
    pub fn bias_mut(&mut self) -> &mut [T] {
        self.generation = next_generation();
        &mut self.bias
    }

    fn check_input(&self, x: &Matrix<T>) -> Result<()> {
        if x.cols() != self.in_dim() {
            return Err(Error::shape(
                "dense layer input",
                format!("{} columns (layer in_dim)", self.in_dim()),
                format!("{} columns", x.cols()),
            ));
        }
        Ok(())
    }

    fn affine(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(x)?;
        let mut pre = x.matmul_t(&self.weights)?;
        for r in 0..pre.rows() {
            for (z, b) in pre.row_mut(r).iter_mut().zip(&self.bias) {
                *z = *z + *b;
            }
        }
        Ok(pre)
    }

    /// Forward pass without retaining a cache.
    pub fn infer(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let act = self.activation;
        let mut y = self.affine(x)?;
        y.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
        Ok(y)
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<(Matrix<T>, LayerCache<T>)> {
        let pre = self.affine(x)?;
        let y = pre.map(|z| self.activation.apply(z));
        let cache = LayerCache {
            input: x.clone(),
            pre,
            output: y.clone(),
            generation: self.generation,
        };
        Ok((y, cache))
    }

    fn check_cache(&self, cache: &LayerCache<T>, grad_rows: usize, grad_cols: usize) -> Result<()> {
        if cache.generation != self.generation {
            return Err(Error::StaleCache(
                "layer parameters changed since the forward pass".into(),
            ));
        }
        if cache.input.cols() != self.in_dim() || cache.pre.cols() != self.out_dim() {
            return Err(Error::StaleCache(format!(
                "cache shaped {}→{} for a {}→{} layer",
                cache.input.cols(),
                cache.pre.cols(),
                self.in_dim(),
                self.out_dim()
            )));
        }
        if grad_rows != cache.pre.rows() || grad_cols != self.out_dim() {
            return Err(Error::shape(
                "dense layer upstream gradient",
                format!("{}x{}", cache.pre.rows(), self.out_dim()),
                format!("{grad_rows}x{grad_cols}"),
            ));
        }
        Ok(())
    }

    /// Backward pass given the gradient with respect to the layer output.
    pub fn backward(&self, cache: &LayerCache<T>, grad_out: &Matrix<T>) -> Result<(Matrix<T>, LayerGrads<T>)> {
        self.check_cache(cache, grad_out.rows(), grad_out.cols())?;
        let act = self.activation;
        let mut delta = grad_out.clone();
        for ((d, &z), &y) in delta
            .as_mut_slice()
            .iter_mut()
            .zip(cache.pre.as_slice())
            .zip(cache.output.as_slice())
        {
            *d = *d * act.derivative(z, y);
        }
        self.backward_pre(cache, &delta)
    }

    /// Backward pass given the gradient with respect to the pre-activation.
    pub fn backward_pre(&self, cache: &LayerCache<T>, delta: &Matrix<T>) -> Result<(Matrix<T>, LayerGrads<T>)> {
        self.check_cache(cache, delta.rows(), delta.cols())?;
        let grad_in = delta.matmul(&self.weights)?;
        let grad_w = delta.t_matmul(&cache.input)?;
        let mut grad_b = vec![T::zero(); self.out_dim()];
        for r in 0..delta.rows() {
            for (gb, d) in grad_b.iter_mut().zip(delta.row(r)) {
                *gb = *gb + *d;
            }
        }
        Ok((
            grad_in,
            LayerGrads {
                weights: grad_w,
                bias: grad_b,
            },
        ))
    }

    pub fn adam_update(
        &mut self,
        name: &str,
        grads: &LayerGrads<T>,
        optim: &mut LayerOptim<T>,
        cfg: &TrainConfig,
    ) -> Result<()> {
        adam_step(
            &format!("{name}.w"),
            self.weights.as_mut_slice(),
            grads.weights.as_slice(),
            &mut optim.weights,
            cfg,
        )?;
        adam_step(&format!("{name}.b"), &mut self.bias, &grads.bias, &mut optim.bias, cfg)?;
        self.generation = next_generation();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn layer(w: &[&[f64]], b: &[f64], act: Activation) -> DenseLayer<f64> {
        DenseLayer::new(Matrix::from_f64_rows(w).unwrap(), b.to_vec(), act).unwrap()
    }

    #[test]
    fn identity_forward() {
        let l = layer(&[&[1., 0.], &[0., 1.]], &[0., 0.], Activation::Identity);
        let x = Matrix::from_f64_rows(&[[3., 4.]]).unwrap();
        assert_eq!(l.forward(&x).unwrap().0, x);
    }

    #[test]
    fn relu_forward_clips() {
        let l = layer(&[&[1., -1.]], &[0.], Activation::Relu);
        let x = Matrix::from_f64_rows(&[[2., 5.]]).unwrap();
        assert_eq!(l.forward(&x).unwrap().0.as_slice(), &[0.0]);
    }

    #[test]
    fn sigmoid_of_zero_is_half() {
        let l = layer(&[&[0.]], &[0.], Activation::Sigmoid);
        let x = Matrix::from_f64_rows(&[[7.]]).unwrap();
        assert_eq!(l.forward(&x).unwrap().0.as_slice(), &[0.5]);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-800.0f64), 0.0);
        assert_eq!(sigmoid(800.0f64), 1.0);
        assert!(sigmoid(-30.0f64) > 0.0);
    }

    #[test]
    fn input_shape_error_names_dims() {
        let l = layer(&[&[1., 0.], &[0., 1.]], &[0., 0.], Activation::Identity);
        let x = Matrix::from_f64_rows(&[[1., 2., 3.]]).unwrap();
        let msg = l.forward(&x).unwrap_err().to_string();
        assert!(msg.contains('2') && msg.contains('3'), "{msg}");
    }

    #[test]
    fn identity_backward_is_linear_chain_rule() {
        let l = layer(&[&[1., 2.], &[3., 4.], &[5., 6.]], &[0.; 3], Activation::Identity);
        let x = Matrix::from_f64_rows(&[[1., -1.], [0.5, 2.]]).unwrap();
        let g = Matrix::from_f64_rows(&[[1., 0., -1.], [2., 1., 0.]]).unwrap();
        let (_, cache) = l.forward(&x).unwrap();
        let (gin, grads) = l.backward(&cache, &g).unwrap();
        assert_eq!(gin, g.matmul(l.weights()).unwrap());
        assert_eq!(grads.weights, g.transpose().matmul(&x).unwrap());
        assert_eq!(grads.bias, vec![3., 1., -1.]);
    }

    #[test]
    fn relu_gate_zeroes_inactive_unit() {
        let l = layer(&[&[1., -1.], &[1., 1.]], &[0., 0.], Activation::Relu);
        let x = Matrix::from_f64_rows(&[[2., 5.]]).unwrap(); // pre = [-3, 7]
        let (_, cache) = l.forward(&x).unwrap();
        let g = Matrix::from_f64_rows(&[[1., 1.]]).unwrap();
        let (gin, grads) = l.backward(&cache, &g).unwrap();
        assert_eq!(grads.bias, vec![0., 1.]);
        assert_eq!(grads.weights.row(0), &[0., 0.]);
        assert_eq!(gin.as_slice(), &[1., 1.]);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut l = layer(&[&[1.]], &[0.], Activation::Identity);
        let x = Matrix::from_f64_rows(&[[1.]]).unwrap();
        let (_, cache) = l.forward(&x).unwrap();
        l.bias_mut()[0] = 1.0;
        let g = Matrix::from_f64_rows(&[[1.]]).unwrap();
        assert!(matches!(l.backward(&cache, &g), Err(Error::StaleCache(_))));

        let other = layer(&[&[1., 1.]], &[0.], Activation::Identity);
        assert!(other.backward(&cache, &g).is_err());
    }

    #[test]
    fn init_is_seeded() {
        let a: DenseLayer<f64> = DenseLayer::init(5, 3, Activation::Relu, &mut StreamRng::new(1));
        let b: DenseLayer<f64> = DenseLayer::init(5, 3, Activation::Relu, &mut StreamRng::new(1));
        let c: DenseLayer<f64> = DenseLayer::init(5, 3, Activation::Relu, &mut StreamRng::new(2));
        assert_eq!(a, b);
        assert_ne!(a, c);
        let limit = (6.0f64 / 5.0).sqrt();
        assert!(a.weights().as_slice().iter().all(|w| w.abs() <= limit));
    }
}
