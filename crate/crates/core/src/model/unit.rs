//! Composite units (conv -> BN -> PReLU) and the reconstruction layer.

use crate::error::Result;
use crate::layers::{
    bn_backward, bn_forward_eval, bn_forward_train, conv_backward, conv_forward, prelu_backward,
    prelu_forward, tconv_backward, tconv_forward, BnCache, BnGrads, BNParams, ConvGrads,
    ConvParams, PReLUParams,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// One composite unit. BN and PReLU are optional so the BN-ablated and
/// activation-free variants reuse the same struct.
#[derive(Debug, Clone)]
pub struct CompositeUnit<S> {
    pub conv: ConvParams<S>,
    pub bn: Option<BNParams<S>>,
    pub prelu: Option<PReLUParams<S>>,
}

/// Activations captured by a train-mode pass through one unit.
#[derive(Debug, Clone)]
pub struct UnitCache<S> {
    /// Unit input (conv input).
    pub x: Tensor4<S>,
    /// Conv output == BN input.
    pub conv_out: Tensor4<S>,
    pub bn: Option<BnCache<S>>,
    /// BN output == activation input; `None` when the unit has no BN (the
    /// activation then reads `conv_out`).
    pub bn_out: Option<Tensor4<S>>,
}

#[derive(Debug, Clone)]
pub struct UnitGrads<S> {
    pub conv: ConvGrads<S>,
    pub bn: Option<BnGrads<S>>,
    pub slope: Option<Vec<S>>,
}

impl<S: Scalar> CompositeUnit<S> {
    /// Train-mode pass: updates BN running stats and returns the cache the
    /// backward pass needs.
    pub fn forward_train(&mut self, x: &Tensor4<S>) -> Result<(Tensor4<S>, UnitCache<S>)> {
        let conv_out = conv_forward(x, &self.conv)?;
        let (act_in, bn_cache, bn_out) = match self.bn.as_mut() {
            Some(bn) => {
                let (y, cache) = bn_forward_train(&conv_out, bn)?;
                (y.clone(), Some(cache), Some(y))
            }
            None => (conv_out.clone(), None, None),
        };
        let out = match &self.prelu {
            Some(p) => prelu_forward(&act_in, p)?,
            None => act_in,
        };
        Ok((out, UnitCache { x: x.clone(), conv_out, bn: bn_cache, bn_out }))
    }

    /// Eval-mode pass: running statistics, no cache, no state change.
    pub fn forward_eval(&self, x: &Tensor4<S>) -> Result<Tensor4<S>> {
        let mut cur = conv_forward(x, &self.conv)?;
        if let Some(bn) = &self.bn {
            cur = bn_forward_eval(&cur, bn)?;
        }
        if let Some(p) = &self.prelu {
            cur = prelu_forward(&cur, p)?;
        }
        Ok(cur)
    }

    /// Backward through activation, BN and conv; returns the gradient w.r.t.
    /// the unit input.
    pub fn backward(&self, cache: &UnitCache<S>, grad_out: &Tensor4<S>) -> Result<(Tensor4<S>, UnitGrads<S>)> {
        let mut g = grad_out;
        let storage; // keeps the intermediate gradient alive while borrowed
        let mut slope = None;
        if let Some(p) = &self.prelu {
            let act_in = cache.bn_out.as_ref().unwrap_or(&cache.conv_out);
            let (gx, ga) = prelu_backward(act_in, p, g)?;
            storage = gx;
            g = &storage;
            slope = Some(ga);
        }
        let mut bn_grads = None;
        let storage_bn;
        if let (Some(bn), Some(bn_cache)) = (&self.bn, &cache.bn) {
            let (gx, grads) = bn_backward(&cache.conv_out, bn, bn_cache, g)?;
            storage_bn = gx;
            g = &storage_bn;
            bn_grads = Some(grads);
        }
        let (gx, conv_grads) = conv_backward(&cache.x, &self.conv, g)?;
        Ok((gx, UnitGrads { conv: conv_grads, bn: bn_grads, slope }))
    }

    /// Trainable parameter count (running statistics excluded).
    pub fn param_count(&self) -> usize {
        let mut n = self.conv.weights.len();
        if let Some(b) = &self.conv.bias {
            n += b.len();
        }
        if let Some(bn) = &self.bn {
            n += bn.gamma.len() + bn.beta.len();
        }
        if let Some(p) = &self.prelu {
            n += p.slope.len();
        }
        n
    }
}

/// How the reconstruction layer maps features back to the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconOp {
    /// Plain convolution (wide baseline).
    Conv,
    /// Transposed convolution (block topology).
    Tconv,
}

/// Final features-to-image layer; always carries a bias (no BN follows it).
#[derive(Debug, Clone)]
pub struct ReconLayer<S> {
    pub op: ReconOp,
    pub params: ConvParams<S>,
}

impl<S: Scalar> ReconLayer<S> {
    pub fn forward(&self, x: &Tensor4<S>) -> Result<Tensor4<S>> {
        match self.op {
            ReconOp::Conv => conv_forward(x, &self.params),
            ReconOp::Tconv => tconv_forward(x, &self.params),
        }
    }

    pub fn backward(&self, x: &Tensor4<S>, grad_out: &Tensor4<S>) -> Result<(Tensor4<S>, ConvGrads<S>)> {
        match self.op {
            ReconOp::Conv => conv_backward(x, &self.params, grad_out),
            ReconOp::Tconv => tconv_backward(x, &self.params, grad_out),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.weights.len() + self.params.bias.as_ref().map_or(0, |b| b.len())
    }
}
