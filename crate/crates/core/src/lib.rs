//! Analysis toolkit for partially dissipative hyperbolic systems of balance laws
//! `u_t + sum_a f_a(u)_{x_a} = g(u)` and their linearizations
//! `u_t + sum_a A_a u_{x_a} = B u`.

pub mod asymptotics;
pub mod cd_form;
pub mod decay;
pub mod error;
pub mod expansion;
pub mod grid;
pub mod kernel1d;
pub mod linalg;
pub mod nonlinear;
pub mod nonlinearity;
pub mod sk;
pub mod solver;
pub mod splitting;
pub mod system;

pub use cd_form::{spd_sqrt, to_cd_form, CdSystem, ProjectorSet};
pub use error::{Error, Result};
pub use system::{assemble_symbol, make_builtin, validate_h1, Builtin, H1Report, RawSystem};
