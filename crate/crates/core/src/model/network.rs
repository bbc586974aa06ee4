//! The assembled network: topology construction, execution in both modes,
//! backpropagation, and uniform access to every parameter buffer.
//!
//! Three residual sites exist in the block topology:
//!   1. in-block: the large filter's output is added to the block-body output;
//!   2. block-level: each block's input is added to its output;
//!   3. global: the network input is added to the reconstruction output.
//! The wide baseline keeps only the global site.

use crate::error::{Error, Result};
use crate::layers::{init_bn, init_conv, init_prelu, init_tconv, mix_seed, ConvGrads};
use crate::model::config::{NetConfig, NetKind};
use crate::model::unit::{CompositeUnit, ReconLayer, ReconOp, UnitCache, UnitGrads};
use crate::scalar::{Precision, Scalar};
use crate::tensor::Tensor4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Freshly built networks scale the reconstruction layer's weights down to 1%
/// of their drawn magnitude. The global skip then dominates at the start —
/// the network opens as nearly the identity map — so the first optimizer
/// steps see small, well-conditioned gradients instead of having to unlearn a
/// large random correction. Every other layer keeps its full-scale draw.
const RECON_INIT_SCALE: f64 = 0.01;

/// Kinds of state buffers a network exposes; the two running statistics are
/// state but not trainable parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufKind {
    ConvWeight,
    ConvBias,
    BnGamma,
    BnBeta,
    BnRunningMean,
    BnRunningVar,
    PreluSlope,
}

impl BufKind {
    pub fn trainable(self) -> bool {
        !matches!(self, BufKind::BnRunningMean | BufKind::BnRunningVar)
    }

    /// Whether weight decay applies: conv weights and biases only; norm and
    /// activation parameters are exempt.
    pub fn weight_decayed(self) -> bool {
        matches!(self, BufKind::ConvWeight | BufKind::ConvBias)
    }
}

#[derive(Debug, Clone)]
struct BlockCache<S> {
    units: Vec<UnitCache<S>>,
}

#[derive(Debug, Clone)]
struct NetCache<S> {
    x0: Tensor4<S>,
    head: Vec<UnitCache<S>>,
    blocks: Vec<BlockCache<S>>,
    expand: Option<UnitCache<S>>,
    recon_in: Tensor4<S>,
}

/// Gradients for every trainable buffer, mirroring the network structure.
#[derive(Debug, Clone)]
pub struct NetGrads<S> {
    pub head: Vec<UnitGrads<S>>,
    pub blocks: Vec<Vec<UnitGrads<S>>>,
    pub expand: Option<UnitGrads<S>>,
    pub recon: ConvGrads<S>,
}

impl<S: Scalar> NetGrads<S> {
    /// Visit gradient buffers in exactly the order of
    /// [`Network::visit_params`]; the slices borrow from `self`, so callers
    /// may collect them.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a [S])) {
        let mut unit = |u: &'a UnitGrads<S>| {
            f(u.conv.weights.data());
            if let Some(b) = &u.conv.bias {
                f(b);
            }
            if let Some(bn) = &u.bn {
                f(&bn.gamma);
                f(&bn.beta);
            }
            if let Some(s) = &u.slope {
                f(s);
            }
        };
        for u in &self.head {
            unit(u);
        }
        for block in &self.blocks {
            for u in block {
                unit(u);
            }
        }
        if let Some(u) = &self.expand {
            unit(u);
        }
        f(self.recon.weights.data());
        if let Some(b) = &self.recon.bias {
            f(b);
        }
    }
}

/// One row of the per-layer summary.
#[derive(Debug, Clone)]
pub struct LayerRow {
    pub name: String,
    pub op: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub k: usize,
    pub params: usize,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct Network<S> {
    config: NetConfig,
    pub head: Vec<CompositeUnit<S>>,
    pub blocks: Vec<Vec<CompositeUnit<S>>>,
    pub expand: Option<CompositeUnit<S>>,
    pub recon: ReconLayer<S>,
    mode: Mode,
    cache: Option<NetCache<S>>,
}

impl<S: Scalar> Network<S> {
    /// Build and initialize a network. The same `(config, seed)` pair always
    /// produces bitwise-identical parameters.
    pub fn build(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut site = 0u64;
        let mut next_seed = || {
            let s = mix_seed(seed, site);
            site += 1;
            s
        };
        let composite = |in_c: usize, out_c: usize, k: usize, seed: u64| -> Result<CompositeUnit<S>> {
            Ok(CompositeUnit {
                conv: init_conv(out_c, in_c, k, !config.use_bn, seed)?,
                bn: config.use_bn.then(|| init_bn(out_c)),
                prelu: Some(init_prelu(out_c)),
            })
        };

        let mut head = Vec::new();
        let mut blocks = Vec::new();
        let mut expand = None;
        let mut recon;
        match config.kind {
            NetKind::RcNet => {
                head.push(composite(config.in_channels, config.n_dense, config.k_dense, next_seed())?);
                if !config.remove_second_dense {
                    head.push(composite(config.n_dense, config.n_dense, config.k_dense, next_seed())?);
                }
                head.push(composite(config.n_dense, config.block.width, 1, next_seed())?);
                let w = config.block.width;
                for _ in 0..config.num_blocks {
                    blocks.push(vec![
                        composite(w, w, 1, next_seed())?,
                        composite(w, w, config.block.k_large, next_seed())?,
                        composite(w, w, 1, next_seed())?,
                        composite(w, w, config.block.k_small, next_seed())?,
                    ]);
                }
                expand = Some(composite(config.block.width, config.n_dense, 1, next_seed())?);
                recon = ReconLayer {
                    op: ReconOp::Tconv,
                    params: init_tconv(config.n_dense, config.in_channels, 3, true, next_seed())?,
                };
            }
            NetKind::Win => {
                head.push(composite(config.in_channels, config.n_dense, config.k_dense, next_seed())?);
                for _ in 0..3 {
                    head.push(composite(config.n_dense, config.n_dense, config.k_dense, next_seed())?);
                }
                recon = ReconLayer {
                    op: ReconOp::Conv,
                    params: init_conv(config.in_channels, config.n_dense, 3, true, next_seed())?,
                };
            }
        }
        let scale = S::from_f64(RECON_INIT_SCALE);
        for w in recon.params.weights.data_mut() {
            *w = *w * scale;
        }
        Ok(Network { config, head, blocks, expand, recon, mode: Mode::Train, cache: None })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        if mode == Mode::Eval {
            self.cache = None;
        }
    }

    pub fn precision(&self) -> Precision {
        S::PRECISION
    }

    fn check_input(&self, x0: &Tensor4<S>) -> Result<()> {
        if x0.channels() != self.config.in_channels {
            return Err(Error::ChannelMismatch {
                input: x0.channels(),
                expected: self.config.in_channels,
            });
        }
        let need = self.config.max_kernel();
        if x0.height() < need || x0.width() < need {
            return Err(Error::ImageTooSmall { h: x0.height(), w: x0.width(), need });
        }
        Ok(())
    }

    /// Run the network in its current mode. Train mode caches activations for
    /// [`Network::backward`] and updates BN running statistics.
    pub fn forward(&mut self, x0: &Tensor4<S>) -> Result<Tensor4<S>> {
        match self.mode {
            Mode::Eval => self.infer(x0),
            Mode::Train => self.forward_train(x0),
        }
    }

    /// Eval-mode pass: pure, reads running statistics, safe to call from
    /// several threads on a shared reference.
    pub fn infer(&self, x0: &Tensor4<S>) -> Result<Tensor4<S>> {
        self.check_input(x0)?;
        let mut cur = x0.clone();
        for unit in &self.head {
            cur = unit.forward_eval(&cur)?;
        }
        for block in &self.blocks {
            let block_in = cur;
            let a = block[0].forward_eval(&block_in)?;
            let yl = block[1].forward_eval(&a)?;
            let b = block[2].forward_eval(&yl)?;
            let ys = block[3].forward_eval(&b)?;
            let body = ys.add(&yl)?;
            cur = body.add(&block_in)?;
        }
        if let Some(unit) = &self.expand {
            cur = unit.forward_eval(&cur)?;
        }
        let r = self.recon.forward(&cur)?;
        x0.add(&r)
    }

    fn forward_train(&mut self, x0: &Tensor4<S>) -> Result<Tensor4<S>> {
        self.check_input(x0)?;
        let mut head_caches = Vec::with_capacity(self.head.len());
        let mut cur = x0.clone();
        for unit in &mut self.head {
            let (out, cache) = unit.forward_train(&cur)?;
            head_caches.push(cache);
            cur = out;
        }
        let mut block_caches = Vec::with_capacity(self.blocks.len());
        for block in &mut self.blocks {
            let block_in = cur;
            let mut units = Vec::with_capacity(4);
            let (a, c0) = block[0].forward_train(&block_in)?;
            units.push(c0);
            let (yl, c1) = block[1].forward_train(&a)?;
            units.push(c1);
            let (b, c2) = block[2].forward_train(&yl)?;
            units.push(c2);
            let (ys, c3) = block[3].forward_train(&b)?;
            units.push(c3);
            let body = ys.add(&yl)?;
            cur = body.add(&block_in)?;
            block_caches.push(BlockCache { units });
        }
        let expand_cache = match &mut self.expand {
            Some(unit) => {
                let (out, cache) = unit.forward_train(&cur)?;
                cur = out;
                Some(cache)
            }
            None => None,
        };
        let recon_in = cur;
        let r = self.recon.forward(&recon_in)?;
        let y = x0.add(&r)?;
        self.cache = Some(NetCache {
            x0: x0.clone(),
            head: head_caches,
            blocks: block_caches,
            expand: expand_cache,
            recon_in,
        });
        Ok(y)
    }

    /// Backpropagate `grad_out` (gradient w.r.t. the network output) through
    /// the cached train-mode pass. Consumes the cache; returns the parameter
    /// gradients and the gradient w.r.t. the input.
    pub fn backward(&mut self, grad_out: &Tensor4<S>) -> Result<(NetGrads<S>, Tensor4<S>)> {
        let cache = self.cache.take().ok_or(Error::MissingCache)?;
        if grad_out.shape() != cache.x0.shape() {
            return Err(Error::shapes(grad_out.shape(), cache.x0.shape()));
        }
        // Reconstruction; the global skip feeds grad_out straight to x0 as well.
        let (mut g, recon_grads) = self.recon.backward(&cache.recon_in, grad_out)?;
        let expand_grads = match (&self.expand, &cache.expand) {
            (Some(unit), Some(ucache)) => {
                let (gx, ug) = unit.backward(ucache, &g)?;
                g = gx;
                Some(ug)
            }
            _ => None,
        };
        let mut block_grads_rev = Vec::with_capacity(self.blocks.len());
        for (block, bcache) in self.blocks.iter().zip(&cache.blocks).rev() {
            // out = (u3(u2(u1(in))) + large) + in, with large = u1(u0(in)).
            let (g3, u3g) = block[3].backward(&bcache.units[3], &g)?;
            let (g2, u2g) = block[2].backward(&bcache.units[2], &g3)?;
            let g_large = g2.add(&g)?; // chain + in-block skip
            let (g1, u1g) = block[1].backward(&bcache.units[1], &g_large)?;
            let (g0, u0g) = block[0].backward(&bcache.units[0], &g1)?;
            let g_in = g0.add(&g)?; // chain + block-level skip
            block_grads_rev.push(vec![u0g, u1g, u2g, u3g]);
            g = g_in;
        }
        let mut head_grads_rev = Vec::with_capacity(self.head.len());
        for (unit, ucache) in self.head.iter().zip(&cache.head).rev() {
            let (gx, ug) = unit.backward(ucache, &g)?;
            head_grads_rev.push(ug);
            g = gx;
        }
        let grad_x0 = g.add(grad_out)?; // chain + global skip
        block_grads_rev.reverse();
        head_grads_rev.reverse();
        Ok((
            NetGrads {
                head: head_grads_rev,
                blocks: block_grads_rev,
                expand: expand_grads,
                recon: recon_grads,
            },
            grad_x0,
        ))
    }

    /// Total trainable parameter count (running statistics excluded).
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.len());
        n
    }

    /// Names of the network's composite units in execution order, paired with
    /// the units; used by traversals and the summary.
    fn unit_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        match self.config.kind {
            NetKind::RcNet => {
                names.push("dense1".to_string());
                if !self.config.remove_second_dense {
                    names.push("dense2".to_string());
                }
                names.push("shrink".to_string());
                for b in 0..self.blocks.len() {
                    for u in 0..4 {
                        names.push(format!("block{b}.unit{u}"));
                    }
                }
                names.push("expand".to_string());
            }
            NetKind::Win => {
                for i in 0..self.head.len() {
                    names.push(format!("dense{}", i + 1));
                }
            }
        }
        names
    }

    fn units_in_order(&self) -> Vec<&CompositeUnit<S>> {
        let mut units: Vec<&CompositeUnit<S>> = self.head.iter().collect();
        for block in &self.blocks {
            units.extend(block.iter());
        }
        if let Some(u) = &self.expand {
            units.push(u);
        }
        units
    }

    /// Visit every state buffer (trainable parameters and running statistics)
    /// with a stable name, kind and dims. Order is the execution order and is
    /// identical to [`Network::visit_buffers_mut`].
    pub fn visit_buffers(&self, f: &mut impl FnMut(&str, BufKind, &[usize], &[S])) {
        let names = self.unit_names();
        for (name, u) in names.iter().zip(self.units_in_order()) {
            let (oc, ic, k, _) = u.conv.weights.shape();
            f(&format!("{name}.conv.weight"), BufKind::ConvWeight, &[oc, ic, k, k], u.conv.weights.data());
            if let Some(b) = &u.conv.bias {
                f(&format!("{name}.conv.bias"), BufKind::ConvBias, &[b.len()], b);
            }
            if let Some(bn) = &u.bn {
                f(&format!("{name}.bn.gamma"), BufKind::BnGamma, &[bn.gamma.len()], &bn.gamma);
                f(&format!("{name}.bn.beta"), BufKind::BnBeta, &[bn.beta.len()], &bn.beta);
                f(&format!("{name}.bn.running_mean"), BufKind::BnRunningMean, &[bn.running_mean.len()], &bn.running_mean);
                f(&format!("{name}.bn.running_var"), BufKind::BnRunningVar, &[bn.running_var.len()], &bn.running_var);
            }
            if let Some(p) = &u.prelu {
                f(&format!("{name}.prelu.slope"), BufKind::PreluSlope, &[p.slope.len()], &p.slope);
            }
        }
        let (a, b, k, _) = self.recon.params.weights.shape();
        f("recon.weight", BufKind::ConvWeight, &[a, b, k, k], self.recon.params.weights.data());
        if let Some(bias) = &self.recon.params.bias {
            f("recon.bias", BufKind::ConvBias, &[bias.len()], bias);
        }
    }

    /// Mutable buffer traversal; keep in sync with [`Network::visit_buffers`]
    /// (a unit test asserts the orders agree).
    pub fn visit_buffers_mut(&mut self, f: &mut impl FnMut(&str, BufKind, &mut [S])) {
        let names = self.unit_names();
        let mut units: Vec<&mut CompositeUnit<S>> = self.head.iter_mut().collect();
        for block in &mut self.blocks {
            units.extend(block.iter_mut());
        }
        if let Some(u) = &mut self.expand {
            units.push(u);
        }
        for (name, u) in names.iter().zip(units) {
            f(&format!("{name}.conv.weight"), BufKind::ConvWeight, u.conv.weights.data_mut());
            if let Some(b) = &mut u.conv.bias {
                f(&format!("{name}.conv.bias"), BufKind::ConvBias, b);
            }
            if let Some(bn) = &mut u.bn {
                f(&format!("{name}.bn.gamma"), BufKind::BnGamma, &mut bn.gamma);
                f(&format!("{name}.bn.beta"), BufKind::BnBeta, &mut bn.beta);
                f(&format!("{name}.bn.running_mean"), BufKind::BnRunningMean, &mut bn.running_mean);
                f(&format!("{name}.bn.running_var"), BufKind::BnRunningVar, &mut bn.running_var);
            }
            if let Some(p) = &mut u.prelu {
                f(&format!("{name}.prelu.slope"), BufKind::PreluSlope, &mut p.slope);
            }
        }
        f("recon.weight", BufKind::ConvWeight, self.recon.params.weights.data_mut());
        if let Some(bias) = &mut self.recon.params.bias {
            f("recon.bias", BufKind::ConvBias, bias);
        }
    }

    /// Visit trainable parameters only, in the order [`NetGrads::visit`]
    /// mirrors.
    pub fn visit_params(&self, f: &mut impl FnMut(BufKind, &[S])) {
        self.visit_buffers(&mut |_, kind, _, data| {
            if kind.trainable() {
                f(kind, data);
            }
        });
    }

    pub fn visit_params_mut(&mut self, f: &mut impl FnMut(BufKind, &mut [S])) {
        self.visit_buffers_mut(&mut |_, kind, data| {
            if kind.trainable() {
                f(kind, data);
            }
        });
    }

    /// Per-layer summary rows: one per composite unit plus the
    /// reconstruction layer.
    pub fn summarize(&self) -> Vec<LayerRow> {
        let names = self.unit_names();
        let mut rows = Vec::new();
        for (name, u) in names.iter().zip(self.units_in_order()) {
            let (oc, ic, k, _) = u.conv.weights.shape();
            let note = if name.ends_with(".unit3") {
                "adds large-filter output, then block input".to_string()
            } else {
                String::new()
            };
            rows.push(LayerRow {
                name: name.clone(),
                op: "composite".to_string(),
                in_channels: ic,
                out_channels: oc,
                k,
                params: u.param_count(),
                note,
            });
        }
        let (a, b, k, _) = self.recon.params.weights.shape();
        let (in_c, out_c, op) = match self.recon.op {
            ReconOp::Tconv => (a, b, "tconv"),
            ReconOp::Conv => (b, a, "conv"),
        };
        rows.push(LayerRow {
            name: "recon".to_string(),
            op: op.to_string(),
            in_channels: in_c,
            out_channels: out_c,
            k,
            params: self.recon.param_count(),
            note: "adds network input".to_string(),
        });
        rows
    }

    /// Count all state buffers, running statistics included.
    pub fn buffer_count(&self) -> usize {
        let mut n = 0;
        self.visit_buffers(&mut |_, _, _, _| n += 1);
        n
    }

    /// Human-readable summary table.
    pub fn summary_table(&self) -> String {
        let rows = self.summarize();
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:<10} {:>4} {:>4} {:>3} {:>10}  {}\n",
            "layer", "op", "in", "out", "k", "params", "notes"
        ));
        for r in &rows {
            out.push_str(&format!(
                "{:<14} {:<10} {:>4} {:>4} {:>3} {:>10}  {}\n",
                r.name, r.op, r.in_channels, r.out_channels, r.k, r.params, r.note
            ));
        }
        out.push_str(&format!(
            "total: {} layers, {} parameters\n",
            rows.len(),
            self.param_count()
        ));
        out
    }
}
