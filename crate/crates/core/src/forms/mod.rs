//! Symbolic weak forms: expression trees, integrals, derivatives and
//! adjoints.
//!
//! ```
//! use goalfem::forms::{grad, inner, Coefficient, Expr, Form};
//!
//! let u = Coefficient::new("u");
//! let v = Expr::test();
//! let f = Form::dx(inner(&grad(&u.expr()), &grad(&v)) - v).unwrap();
//! assert_eq!(f.arity(), 1);
//! ```

pub(crate) mod eval;
mod expr;
mod form;

pub use expr::{div, grad, inner, pow, Coefficient, Expr, Field, Role, Shape};
pub use form::{Form, Integral, Measure};
