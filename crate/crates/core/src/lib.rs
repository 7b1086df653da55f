//! Numerical experiments on operator systems, completely positive maps and
//! Korovkin-type approximation at matrix scale.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::should_implement_trait
)]

pub mod choi;
pub mod expr;
pub mod function_system;
pub mod korovkin;
pub mod lab;
pub mod linalg;
pub mod minimax;
pub mod rigidity;
pub mod uep;
