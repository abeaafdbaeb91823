use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::conv::{Conv3d, ConvTranspose3d, LayerGrads};
use super::dense::{relu, relu_backward, sigmoid, sigmoid_backward, Dense};

/// One stage of a feed-forward chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T: Scalar> {
    Conv3d(Conv3d<T>),
    ConvTranspose3d(ConvTranspose3d<T>),
    Dense(Dense<T>),
    Relu,
    Sigmoid,
    Flatten,
    Reshape(Vec<usize>),
}

impl<T: Scalar> Layer<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv3d(_) => "conv3d",
            Layer::ConvTranspose3d(_) => "conv_transpose3d",
            Layer::Dense(_) => "dense",
            Layer::Relu => "relu",
            Layer::Sigmoid => "sigmoid",
            Layer::Flatten => "flatten",
            Layer::Reshape(_) => "reshape",
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv3d(l) => l.forward(x),
            Layer::ConvTranspose3d(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x),
            Layer::Relu => Ok(relu(x)),
            Layer::Sigmoid => Ok(sigmoid(x)),
            Layer::Flatten => x.clone().reshape(&[x.len()]),
            Layer::Reshape(shape) => x.clone().reshape(shape),
        }
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<LayerGrads<T>> {
        let plain = |input: Tensor<T>| LayerGrads { input, weight: None, bias: None };
        match self {
            Layer::Conv3d(l) => l.backward(x, grad_out),
            Layer::ConvTranspose3d(l) => l.backward(x, grad_out),
            Layer::Dense(l) => l.backward(x, grad_out),
            Layer::Relu => relu_backward(x, grad_out).map(plain),
            Layer::Sigmoid => sigmoid_backward(x, grad_out).map(plain),
            Layer::Flatten | Layer::Reshape(_) => grad_out.clone().reshape(x.shape()).map(plain),
        }
    }

    /// Output shape for a given input shape, without running the layer.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Conv3d(l) => l.output_shape(input),
            Layer::ConvTranspose3d(l) => l.output_shape(input),
            Layer::Dense(l) => {
                if input != [l.inputs()] {
                    return Err(Error::Dimension(format!(
                        "dense expects [{}], got {input:?}",
                        l.inputs()
                    )));
                }
                Ok(vec![l.outputs()])
            }
            Layer::Relu | Layer::Sigmoid => Ok(input.to_vec()),
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Reshape(shape) => {
                if shape.iter().product::<usize>() != input.iter().product::<usize>() {
                    return Err(Error::Dimension(format!("cannot reshape {input:?} to {shape:?}")));
                }
                Ok(shape.clone())
            }
        }
    }

    /// `(weight, bias)` for parameterized layers.
    pub fn params(&self) -> Option<(&Tensor<T>, &Tensor<T>)> {
        match self {
            Layer::Conv3d(l) => Some((&l.weight, &l.bias)),
            Layer::ConvTranspose3d(l) => Some((&l.weight, &l.bias)),
            Layer::Dense(l) => Some((&l.weight, &l.bias)),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut Tensor<T>, &mut Tensor<T>)> {
        match self {
            Layer::Conv3d(l) => Some((&mut l.weight, &mut l.bias)),
            Layer::ConvTranspose3d(l) => Some((&mut l.weight, &mut l.bias)),
            Layer::Dense(l) => Some((&mut l.weight, &mut l.bias)),
            _ => None,
        }
    }
}

/// Sequential chain of layers with an explicit backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Scalar> {
    pub layers: Vec<Layer<T>>,
}

/// Per-layer inputs recorded by [`Network::forward_trace`]; the last entry is the output.
#[derive(Debug, Clone)]
pub struct Trace<T: Scalar> {
    pub activations: Vec<Tensor<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.activations.last().expect("trace always holds the input")
    }
}

impl<T: Scalar> Network<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Network { layers }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    pub fn forward_trace(&self, x: &Tensor<T>) -> Result<Trace<T>> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward(activations.last().unwrap())?;
            activations.push(next);
        }
        Ok(Trace { activations })
    }

    /// Back-propagates `grad_out` through the traced pass. Returns the input
    /// gradient and parameter gradients in [`Network::params`] order.
    pub fn backward(&self, trace: &Trace<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
        let mut grad = grad_out.clone();
        let mut per_layer: Vec<Option<(Tensor<T>, Tensor<T>)>> = vec![None; self.layers.len()];
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let g = layer.backward(&trace.activations[i], &grad)?;
            if let (Some(w), Some(b)) = (g.weight, g.bias) {
                per_layer[i] = Some((w, b));
            }
            grad = g.input;
        }
        let params = per_layer
            .into_iter()
            .flatten()
            .flat_map(|(w, b)| [w, b])
            .collect();
        Ok((grad, params))
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mut shape = input.to_vec();
        for layer in &self.layers {
            shape = layer.output_shape(&shape)?;
        }
        Ok(shape)
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .filter_map(Layer::params_mut)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
