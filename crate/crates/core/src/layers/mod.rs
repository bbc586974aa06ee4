//! Network layers: convolution, transposed convolution, batch normalization
//! and PReLU, each as pure forward/backward functions over parameter structs
//! plus explicit caches. Composition into composite units and blocks lives in
//! [`crate::model`].

mod bn;
mod conv;
mod init;
mod prelu;

pub use bn::{bn_backward, bn_forward_eval, bn_forward_train, BnCache, BnGrads, BNParams};
pub use conv::{
    conv_backward, conv_backward_with_threads, conv_forward, conv_forward_with_threads,
    tconv_backward, tconv_forward, ConvGrads, ConvParams,
};
pub use init::{init_bn, init_conv, init_prelu, init_tconv, mix_seed};
pub use prelu::{prelu_backward, prelu_forward, PReLUParams};
