//! Integral collections of arity 0, 1 or 2.

use std::ops::{Add, Neg, Sub};
use std::sync::Arc;

use super::expr::{Coefficient, Expr, Role, Shape};
use crate::error::{Error, Result};
use crate::mesh::Marker;
use crate::space::FEFunction;

/// Integration domain of a term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    /// `dx`: the whole domain.
    Cell,
    /// `ds(marker)`: boundary facets carrying the marker.
    ExteriorFacet(Marker),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Integral {
    pub integrand: Expr,
    pub measure: Measure,
}

/// A sum of integrals. Arity 0 is a functional, 1 a linear form in the test
/// function, 2 a bilinear form in (trial, test).
#[derive(Clone, Debug, PartialEq)]
pub struct Form {
    terms: Vec<Integral>,
    arity: usize,
}

fn arity_of(e: &Expr) -> Result<usize> {
    let test = e.argument_degree(Role::Test)?;
    let trial = e.argument_degree(Role::Trial)?;
    match (test, trial) {
        (0, 0) => Ok(0),
        (1, 0) => Ok(1),
        (1, 1) => Ok(2),
        _ => Err(Error::NotLinear(format!(
            "trial function without test function in {e:?}"
        ))),
    }
}

impl Form {
    fn single(integrand: Expr, measure: Measure) -> Result<Self> {
        if integrand.shape()? != Shape::Scalar {
            return Err(Error::Shape(format!("integrand must be scalar: {integrand:?}")));
        }
        if measure == Measure::Cell && integrand.contains_normal() {
            return Err(Error::Shape("facet normal in a cell integral".into()));
        }
        let arity = arity_of(&integrand)?;
        let terms = if integrand.is_zero() {
            Vec::new()
        } else {
            vec![Integral { integrand, measure }]
        };
        Ok(Self { terms, arity })
    }

    /// `∫_Ω e dx`.
    pub fn dx(e: Expr) -> Result<Self> {
        Self::single(e, Measure::Cell)
    }

    /// `∫_Γ e ds` over boundary facets with `marker`.
    pub fn ds(e: Expr, marker: Marker) -> Result<Self> {
        Self::single(e, Measure::ExteriorFacet(marker))
    }

    /// The empty form of the given arity.
    pub fn zero(arity: usize) -> Self {
        Self {
            terms: Vec::new(),
            arity,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> &[Integral] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn checked_add(mut self, other: Form) -> Result<Form> {
        if self.arity != other.arity {
            return Err(Error::InvalidArgument(format!(
                "cannot add forms of arity {} and {}",
                self.arity, other.arity
            )));
        }
        self.terms.extend(other.terms);
        Ok(self)
    }

    pub fn scale(&self, s: f64) -> Form {
        self.map(|e| s * e.clone())
    }

    fn map(&self, f: impl Fn(&Expr) -> Expr) -> Form {
        Form {
            terms: self
                .terms
                .iter()
                .map(|t| Integral {
                    integrand: f(&t.integrand),
                    measure: t.measure,
                })
                .filter(|t| !t.integrand.is_zero())
                .collect(),
            arity: self.arity,
        }
    }

    pub fn depends_on(&self, u: &Coefficient) -> bool {
        self.terms.iter().any(|t| t.integrand.depends_on(u.id()))
    }

    /// Binds every occurrence of `u` to `value`.
    pub fn bind(&self, u: &Coefficient, value: &Arc<FEFunction>) -> Form {
        self.map(|e| e.bind(u.id(), value))
    }

    /// Coefficients occurring in the form, by first occurrence.
    pub fn coefficients(&self) -> Vec<Coefficient> {
        let mut out: Vec<Coefficient> = Vec::new();
        for t in &self.terms {
            t.integrand.visit_coefficients(&mut |c| {
                if !out.contains(c) {
                    out.push(c.clone());
                }
            });
        }
        out
    }

    /// Gateaux derivative with respect to `u`, linearized at `at`. A
    /// functional becomes a linear form in the test function; a linear form
    /// becomes a bilinear form with the trial function as the direction.
    pub fn derivative(&self, u: &Coefficient, at: &Arc<FEFunction>) -> Result<Form> {
        let role = match self.arity {
            0 => Role::Test,
            1 => Role::Trial,
            _ => return Err(Error::NotDifferentiable("bilinear forms cannot be differentiated".into())),
        };
        if !self.depends_on(u) {
            return Err(Error::NotDifferentiable(format!(
                "form does not depend on `{}`",
                u.name()
            )));
        }
        let mut terms = Vec::new();
        for t in &self.terms {
            let d = t.integrand.derivative(u.id(), role)?.bind(u.id(), at);
            if !d.is_zero() {
                terms.push(Integral {
                    integrand: d,
                    measure: t.measure,
                });
            }
        }
        Ok(Form {
            terms,
            arity: self.arity + 1,
        })
    }

    /// Exchanges the test and trial roles of a bilinear form.
    pub fn adjoint(&self) -> Result<Form> {
        if self.arity != 2 {
            return Err(Error::InvalidArgument(format!(
                "adjoint of a form of arity {}",
                self.arity
            )));
        }
        Ok(self.map(Expr::swap_arguments))
    }

    /// The weak residual `v ↦ -F(u_h; v)`.
    pub fn residual_form(&self, u: &Coefficient, u_h: &Arc<FEFunction>) -> Result<Form> {
        if self.arity != 1 {
            return Err(Error::InvalidArgument(format!(
                "residual of a form of arity {}",
                self.arity
            )));
        }
        for c in self.coefficients() {
            if let Some(v) = c.value() {
                if v.space().mesh().uid() != u_h.space().mesh().uid() {
                    return Err(Error::SpaceMismatch(format!(
                        "`{}` and `{}` live on different meshes",
                        c.name(),
                        u.name()
                    )));
                }
            }
        }
        Ok(self.bind(u, u_h).scale(-1.0))
    }

    /// Replaces the highest argument (trial for bilinear, test for linear
    /// forms) by a function.
    pub fn action(&self, f: &Arc<FEFunction>) -> Result<Form> {
        let role = match self.arity {
            1 => Role::Test,
            2 => Role::Trial,
            _ => return Err(Error::InvalidArgument("action of a functional".into())),
        };
        let w = Coefficient::new("w").bound(f.clone()).expr();
        let mut out = self.map(|e| e.replace_argument(role, &w));
        out.arity -= 1;
        Ok(out)
    }
}

impl Add for Form {
    type Output = Form;
    /// Panics on arity mismatch; see [`Form::checked_add`].
    fn add(self, rhs: Form) -> Form {
        self.checked_add(rhs).expect("form arity mismatch")
    }
}

impl Sub for Form {
    type Output = Form;
    fn sub(self, rhs: Form) -> Form {
        self.checked_add(rhs.scale(-1.0)).expect("form arity mismatch")
    }
}

impl Neg for Form {
    type Output = Form;
    fn neg(self) -> Form {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::expr::{grad, inner, pow};
    use crate::mesh::Mesh;
    use crate::space::FunctionSpace;

    fn u_h() -> Arc<FEFunction> {
        let s = FunctionSpace::new(Arc::new(Mesh::unit_square(2).unwrap()), 1).unwrap();
        Arc::new(FEFunction::from_fn(&s, |x| x[0]))
    }

    #[test]
    fn arity_and_validation() {
        let (u, v) = (Expr::trial(), Expr::test());
        assert_eq!(Form::dx(inner(&grad(&u), &grad(&v))).unwrap().arity(), 2);
        assert_eq!(Form::dx(v.clone()).unwrap().arity(), 1);
        assert_eq!(Form::dx(Expr::constant(1.0)).unwrap().arity(), 0);
        assert!(Form::dx(u.clone()).is_err());
        assert!(Form::dx(grad(&v)).is_err());
        assert!(Form::dx(inner(&Expr::normal(), &grad(&v))).is_err());
        assert!(Form::ds(inner(&Expr::normal(), &grad(&v)), 1).is_ok());
        assert!(Form::dx(v.clone()).unwrap().checked_add(Form::zero(2)).is_err());
    }

    #[test]
    fn derivative_of_nonlinear_poisson() {
        let c = Coefficient::new("u");
        let (u, v) = (c.expr(), Expr::test());
        let f = Expr::constant(1.0);
        let form = Form::dx(inner(&((1.0 + pow(&u, 2)) * grad(&u)), &grad(&v)) - f * v).unwrap();
        let at = u_h();
        let j = form.derivative(&c, &at).unwrap();
        assert_eq!(j.arity(), 2);
        assert_eq!(j.terms().len(), 1);
        let text = format!("{:?}", j.terms()[0].integrand);
        assert_eq!(text, "inner((2*u[bound]*du*grad(u[bound]) + (1 + u[bound]**2)*grad(du)), grad(v))");
        assert!(j.coefficients().iter().all(|c| c.value().is_some()));
    }

    #[test]
    fn derivative_errors() {
        let c = Coefficient::new("u");
        let f = Form::dx(Expr::test()).unwrap();
        assert!(matches!(f.derivative(&c, &u_h()), Err(Error::NotDifferentiable(_))));
        let m = Form::dx(c.expr()).unwrap();
        let dm = m.derivative(&c, &u_h()).unwrap();
        assert_eq!(dm, Form::dx(Expr::test()).unwrap());
    }

    #[test]
    fn adjoint_is_an_involution() {
        let b = Expr::vector([1.0, 0.5]);
        let a = Form::dx(inner(&b, &grad(&Expr::trial())) * Expr::test()).unwrap();
        let adj = a.adjoint().unwrap();
        assert_eq!(format!("{:?}", adj.terms()[0].integrand), "inner((1, 0.5), grad(v))*du");
        assert_eq!(adj.adjoint().unwrap(), a);
        assert!(Form::dx(Expr::test()).unwrap().adjoint().is_err());
    }
}
