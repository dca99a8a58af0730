//! Stability equivalence analysis for linear time-delay systems.
//!
//! Given a characteristic function `f(s, τ)` of quasi-polynomial type and a
//! starting parameter point, the crate certifies how far the parameters can
//! move (along a ray, or inside a norm ball grown into a region) without
//! changing the number of characteristic zeros in the closed right half-plane.
//!
//! Module map:
//!
//! - [`expr`]: expression parsing, evaluation and symbolic differentiation
//! - [`charfun`]: quasi-polynomial characteristic functions and their gradients
//! - [`distributed`]: conversion of distributed-delay state models
//! - [`sweep`]: certified global minimisation of frequency ratios
//! - [`line`]: step bounds and the iteration along a ray
//! - [`region`]: Hölder-ball bounds and region growth
//! - [`polecount`]: unstable zero counting by the argument principle

pub mod charfun;
pub mod distributed;
pub mod expr;
pub mod line;
pub mod polecount;
pub mod region;
pub mod sweep;

pub use charfun::{CharFun, ParamPoint};
pub use expr::Expr;
