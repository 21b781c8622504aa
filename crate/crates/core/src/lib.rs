// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod augment;
pub mod cli;
pub mod io;
pub mod metrics;
pub mod model;
pub mod numfmt;
pub mod stack;
pub mod tensor;
pub mod train;
pub mod volumetrics;
