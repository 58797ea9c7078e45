//! Reverse-mode automatic differentiation over [`Tensor`](crate::Tensor)s.

mod gradcheck;
mod params;
mod tape;

pub use gradcheck::{gradcheck, GradcheckOptions, GradcheckReport, ParamCheck};
pub use params::{Param, ParamId, ParamStore};
pub use tape::{BackwardReport, Tape, Var, BCE_EPS};

