//! SGD with momentum and weight decay, the stepped learning-rate schedule,
//! and the training loop with its loss log.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::{Mode, NetGrads, Network};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// Optimizer and schedule hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SGDHyper {
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Divide the learning rate every this many iterations…
    pub lr_drop_every: u64,
    /// …by this factor.
    pub lr_drop_factor: f64,
    pub batch_size: usize,
    pub max_iters: u64,
}

impl Default for SGDHyper {
    /// The published denoising recipe: lr 0.1 divided by 10 every 150k
    /// iterations, momentum 0.9, weight decay 1e-4, batches of 64.
    fn default() -> Self {
        SGDHyper {
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr_drop_every: 150_000,
            lr_drop_factor: 10.0,
            batch_size: 64,
            max_iters: 250_000,
        }
    }
}

impl SGDHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) || !self.lr0.is_finite() {
            return Err(Error::InvalidConfig(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "weight decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if !(self.lr_drop_factor > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lr drop factor must be > 1, got {}",
                self.lr_drop_factor
            )));
        }
        if self.lr_drop_every == 0 {
            return Err(Error::InvalidConfig("lr drop interval must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Piecewise-constant schedule: `lr0 / factor^floor(iter / every)`.
pub fn lr_at(iter: u64, hyper: &SGDHyper) -> f64 {
    let drops = (iter / hyper.lr_drop_every) as i32;
    hyper.lr0 / hyper.lr_drop_factor.powi(drops)
}

/// Velocity buffers (one per trainable parameter buffer, same order as
/// [`Network::visit_params`]) plus the step counter.
#[derive(Debug, Clone)]
pub struct SgdState<S> {
    pub velocities: Vec<Vec<S>>,
    pub iter: u64,
}

impl<S: Scalar> SgdState<S> {
    pub fn new(net: &Network<S>) -> Self {
        let mut velocities = Vec::new();
        net.visit_params(&mut |_, p| velocities.push(vec![S::default(); p.len()]));
        SgdState { velocities, iter: 0 }
    }
}

/// One momentum-SGD update on a single buffer:
/// `v ← momentum·v + g (+ weight_decay·p if decayed); p ← p − lr·v`.
pub fn sgd_update_buffer<S: Scalar>(
    param: &mut [S],
    grad: &[S],
    velocity: &mut [S],
    lr: f64,
    momentum: f64,
    weight_decay: f64,
    decayed: bool,
) {
    let mu = S::from_f64(momentum);
    let wd = S::from_f64(weight_decay);
    let lr = S::from_f64(lr);
    for ((p, g), v) in param.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        let mut step = *g;
        if decayed {
            step += wd * *p;
        }
        *v = mu * *v + step;
        *p -= lr * *v;
    }
}

/// Apply one optimizer step across the whole network. Weight decay touches
/// conv weights and biases only; BN affine parameters and PReLU slopes are
/// exempt. Increments the step counter once.
pub fn sgd_step<S: Scalar>(
    net: &mut Network<S>,
    grads: &NetGrads<S>,
    state: &mut SgdState<S>,
    hyper: &SGDHyper,
) -> Result<()> {
    let lr = lr_at(state.iter, hyper);
    let mut grad_slices: Vec<&[S]> = Vec::with_capacity(state.velocities.len());
    grads.visit(&mut |g| grad_slices.push(g));
    if grad_slices.len() != state.velocities.len() {
        return Err(Error::ShapeMismatch {
            left: format!("{} gradient buffers", grad_slices.len()),
            right: format!("{} velocity buffers", state.velocities.len()),
        });
    }
    let mut idx = 0;
    let mut mismatch = None;
    let velocities = &mut state.velocities;
    net.visit_params_mut(&mut |kind, param| {
        let g = grad_slices[idx];
        let v = &mut velocities[idx];
        if g.len() != param.len() || v.len() != param.len() {
            if mismatch.is_none() {
                mismatch = Some((idx, param.len(), g.len(), v.len()));
            }
        } else {
            sgd_update_buffer(
                param,
                g,
                v,
                lr,
                hyper.momentum,
                hyper.weight_decay,
                kind.weight_decayed(),
            );
        }
        idx += 1;
    });
    if let Some((i, p, g, v)) = mismatch {
        return Err(Error::ShapeMismatch {
            left: format!("buffer {i}: param len {p}"),
            right: format!("grad len {g} / velocity len {v}"),
        });
    }
    state.iter += 1;
    Ok(())
}

/// Anything that can produce deterministic `(input, target)` batches for a
/// given `(seed, iter)`.
pub trait BatchSource<S: Scalar> {
    fn batch(&self, batch_size: usize, seed: u64, iter: u64) -> Result<(Tensor4<S>, Tensor4<S>)>;
}

impl<S: Scalar> BatchSource<S> for crate::data::PatchSource {
    fn batch(&self, batch_size: usize, seed: u64, iter: u64) -> Result<(Tensor4<S>, Tensor4<S>)> {
        self.sample_batch(batch_size, seed, iter)
    }
}

/// One logged training step (`iter` is the 0-based step index, so the
/// logged `lr` column shows schedule drops exactly at the drop iterations).
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub iter: u64,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_psnr: Option<f64>,
}

/// Iteration-indexed loss log.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,lr,train_loss,val_loss,val_psnr\n");
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.iter,
                e.lr,
                e.train_loss,
                opt(e.val_loss),
                opt(e.val_psnr)
            ));
        }
        out
    }

    /// Train-loss values in iteration order.
    pub fn train_losses(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.train_loss).collect()
    }

    /// `(iter, val_loss)` pairs for entries that carried a validation pass.
    pub fn val_losses(&self) -> Vec<(u64, f64)> {
        self.entries
            .iter()
            .filter_map(|e| e.val_loss.map(|v| (e.iter, v)))
            .collect()
    }
}

/// Per-step callback; checkpointing and progress printing hang off this.
pub trait TrainHooks<S: Scalar> {
    fn on_step(&mut self, net: &Network<S>, state: &SgdState<S>, entry: &LogEntry) -> Result<()> {
        let _ = (net, state, entry);
        Ok(())
    }
}

/// No-op hooks.
pub struct NoHooks;

impl<S: Scalar> TrainHooks<S> for NoHooks {}

/// Mean squared error over every element, and its gradient w.r.t. `y`.
fn mse_loss<S: Scalar>(y: &Tensor4<S>, target: &Tensor4<S>) -> Result<(f64, Tensor4<S>)> {
    let loss = y.mse(target)?;
    let scale = S::from_f64(2.0 / y.len() as f64);
    let mut grad = y.clone();
    for (g, t) in grad.data_mut().iter_mut().zip(target.data()) {
        *g = (*g - *t) * scale;
    }
    Ok((loss, grad))
}

/// MSE between a clamped-to-[0,1] prediction and its target, on the 0–255
/// scale — the quantity validation PSNR is computed from.
fn clamped_mse_255<S: Scalar>(y: &Tensor4<S>, target: &Tensor4<S>) -> Result<f64> {
    if y.shape() != target.shape() {
        return Err(Error::shapes(y.shape(), target.shape()));
    }
    let mut sum = 0.0;
    for (a, b) in y.data().iter().zip(target.data()) {
        let a = (*a).to_f64().clamp(0.0, 1.0) * 255.0;
        let b = (*b).to_f64() * 255.0;
        sum += (a - b) * (a - b);
    }
    Ok(sum / y.len() as f64)
}

/// Run `hyper.max_iters` steps of forward → MSE → backward → SGD on batches
/// drawn from `source`. When `val_every > 0` and a fixed validation pair is
/// given, an eval-mode pass every `val_every` steps records validation loss
/// and PSNR. Deterministic given the seed; aborts with diagnostics if the
/// loss leaves the finite range.
pub fn train<S: Scalar>(
    net: &mut Network<S>,
    source: &dyn BatchSource<S>,
    val: Option<&(Tensor4<S>, Tensor4<S>)>,
    hyper: &SGDHyper,
    seed: u64,
    val_every: u64,
    hooks: &mut dyn TrainHooks<S>,
) -> Result<TrainLog> {
    hyper.validate()?;
    let mut state = SgdState::new(net);
    let mut log = TrainLog::default();
    let mut tail: VecDeque<f64> = VecDeque::with_capacity(6);
    net.set_mode(Mode::Train);
    for t in 0..hyper.max_iters {
        let (input, target) = source.batch(hyper.batch_size, seed, t)?;
        let y = net.forward(&input)?;
        let (loss, grad) = mse_loss(&y, &target)?;
        tail.push_back(loss);
        if tail.len() > 6 {
            tail.pop_front();
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                iter: t,
                lr: lr_at(t, hyper),
                tail: tail.iter().copied().collect(),
            });
        }
        let (grads, _) = net.backward(&grad)?;
        let lr = lr_at(state.iter, hyper);
        sgd_step(net, &grads, &mut state, hyper)?;
        let mut entry = LogEntry { iter: t, lr, train_loss: loss, val_loss: None, val_psnr: None };
        if val_every > 0 && (t + 1) % val_every == 0 {
            if let Some((vx, vy)) = val {
                let pred = net.infer(vx)?;
                entry.val_loss = Some(pred.mse(vy)?);
                entry.val_psnr = Some(crate::metrics::psnr_from_mse(clamped_mse_255(&pred, vy)?, 255.0));
            }
        }
        hooks.on_step(net, &state, &entry)?;
        log.entries.push(entry);
    }
    Ok(log)
}
