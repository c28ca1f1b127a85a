//! Expression trees for integrands.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::space::FEFunction;

static NEXT_COEFFICIENT: AtomicU64 = AtomicU64::new(1);

/// Argument slot of a multilinear form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Test,
    Trial,
}

/// A named function appearing in a form, optionally bound to a value.
#[derive(Clone)]
pub struct Coefficient {
    id: u64,
    name: Arc<str>,
    value: Option<Arc<FEFunction>>,
}

impl Coefficient {
    pub fn new(name: &str) -> Self {
        Self {
            id: NEXT_COEFFICIENT.fetch_add(1, Ordering::Relaxed),
            name: name.into(),
            value: None,
        }
    }

    /// The same coefficient bound to `value`.
    pub fn bound(&self, value: Arc<FEFunction>) -> Self {
        Self {
            value: Some(value),
            ..self.clone()
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> Option<&Arc<FEFunction>> {
        self.value.as_ref()
    }

    pub fn expr(&self) -> Expr {
        Expr::new(Node::Coefficient(self.clone()))
    }
}

impl PartialEq for Coefficient {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && match (&self.value, &other.value) {
                (None, None) => true,
                (Some(a), Some(b)) => Arc::ptr_eq(a, b),
                _ => false,
            }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if self.value.is_some() {
            write!(f, "[bound]")?;
        }
        Ok(())
    }
}

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// A callable of the spatial coordinate. Integrated with the highest
/// quadrature degree since its polynomial degree is unknown.
#[derive(Clone)]
pub enum Field {
    Scalar(Arc<str>, ScalarFn),
    Vector(Arc<str>, VectorFn),
}

impl Field {
    fn name(&self) -> &str {
        match self {
            Field::Scalar(n, _) | Field::Vector(n, _) => n,
        }
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Field::Scalar(_, a), Field::Scalar(_, b)) => Arc::ptr_eq(a, b),
            (Field::Vector(_, a), Field::Vector(_, b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

#[derive(Clone, PartialEq)]
pub(crate) enum Node {
    Argument(Role),
    Coefficient(Coefficient),
    SpatialCoordinate,
    Constant(f64),
    VectorConstant([f64; 2]),
    Field(Field),
    FacetNormal,
    Component(Expr, usize),
    Grad(Expr),
    Div(Expr),
    Inner(Expr, Expr),
    Sum(Vec<Expr>),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Power(Expr, i32),
}

/// Value shape of an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector,
}

impl Shape {
    pub fn components(self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Vector => 2,
        }
    }
}

/// Immutable, cheaply clonable expression node.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub(crate) fn new(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub(crate) fn node(&self) -> &Node {
        &self.0
    }

    pub fn test() -> Self {
        Self::new(Node::Argument(Role::Test))
    }

    pub fn trial() -> Self {
        Self::new(Node::Argument(Role::Trial))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Node::Constant(c))
    }

    pub fn vector(v: [f64; 2]) -> Self {
        Self::new(Node::VectorConstant(v))
    }

    /// The spatial coordinate `x = (x, y)`.
    pub fn x() -> Self {
        Self::new(Node::SpatialCoordinate)
    }

    /// Outward unit normal; only valid in exterior facet integrals.
    pub fn normal() -> Self {
        Self::new(Node::FacetNormal)
    }

    pub fn scalar_field(name: &str, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(Node::Field(Field::Scalar(name.into(), Arc::new(f))))
    }

    pub fn vector_field(name: &str, f: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self::new(Node::Field(Field::Vector(name.into(), Arc::new(f))))
    }

    fn zero(shape: Shape) -> Self {
        match shape {
            Shape::Scalar => Self::constant(0.0),
            Shape::Vector => Self::vector([0.0; 2]),
        }
    }

    pub(crate) fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Constant(c) if *c == 0.0)
            || matches!(self.node(), Node::VectorConstant(v) if *v == [0.0, 0.0])
    }

    fn as_constant(&self) -> Option<f64> {
        match self.node() {
            Node::Constant(c) => Some(*c),
            _ => None,
        }
    }

    /// Component `k` of a vector expression.
    pub fn component(&self, k: usize) -> Self {
        match self.node() {
            Node::VectorConstant(v) if k < 2 => Self::constant(v[k]),
            _ => Self::new(Node::Component(self.clone(), k)),
        }
    }

    /// Shape of the expression, checking all shape rules.
    pub fn shape(&self) -> Result<Shape> {
        use Shape::*;
        Ok(match self.node() {
            Node::Argument(_) | Node::Coefficient(_) | Node::Constant(_) => Scalar,
            Node::SpatialCoordinate | Node::VectorConstant(_) | Node::FacetNormal => Vector,
            Node::Field(Field::Scalar(..)) => Scalar,
            Node::Field(Field::Vector(..)) => Vector,
            Node::Component(e, k) => {
                if e.shape()? != Vector || *k > 1 {
                    return Err(Error::Shape(format!("component {k} of {e:?}")));
                }
                Scalar
            }
            Node::Grad(e) => match e.node() {
                Node::Argument(_) | Node::Coefficient(_) | Node::Constant(_) => Vector,
                _ => {
                    return Err(Error::Shape(format!(
                        "grad is only defined for arguments and coefficients, got grad({e:?})"
                    )))
                }
            },
            Node::Div(e) => match e.node() {
                Node::Grad(_) | Node::SpatialCoordinate | Node::VectorConstant(_) => {
                    e.shape()?;
                    Scalar
                }
                _ => {
                    return Err(Error::Shape(format!(
                        "div is only defined for gradients, x and constant vectors, got div({e:?})"
                    )))
                }
            },
            Node::Inner(a, b) => {
                let (sa, sb) = (a.shape()?, b.shape()?);
                if sa != sb {
                    return Err(Error::Shape(format!("inner of {sa:?} and {sb:?}: {a:?}, {b:?}")));
                }
                Scalar
            }
            Node::Sum(items) => {
                let s = items[0].shape()?;
                for e in &items[1..] {
                    if e.shape()? != s {
                        return Err(Error::Shape(format!("sum of mixed shapes in {self:?}")));
                    }
                }
                s
            }
            Node::Sub(a, b) => {
                let (sa, sb) = (a.shape()?, b.shape()?);
                if sa != sb {
                    return Err(Error::Shape(format!("difference of {sa:?} and {sb:?}")));
                }
                sa
            }
            Node::Mul(a, b) => match (a.shape()?, b.shape()?) {
                (Scalar, s) | (s, Scalar) => s,
                _ => return Err(Error::Shape(format!("product of two vectors {a:?} * {b:?}; use inner"))),
            },
            Node::Power(e, _) => {
                if e.shape()? != Scalar {
                    return Err(Error::Shape(format!("power of a vector {e:?}")));
                }
                Scalar
            }
        })
    }

    /// Polynomial degree in the argument `role` (0 or 1); errors when the
    /// expression is not linear in it.
    pub fn argument_degree(&self, role: Role) -> Result<u8> {
        let nl = |e: &Expr| Error::NotLinear(format!("{role:?} function in {e:?}"));
        Ok(match self.node() {
            Node::Argument(r) => u8::from(*r == role),
            Node::Coefficient(_)
            | Node::SpatialCoordinate
            | Node::Constant(_)
            | Node::VectorConstant(_)
            | Node::Field(_)
            | Node::FacetNormal => 0,
            Node::Component(e, _) | Node::Grad(e) | Node::Div(e) => e.argument_degree(role)?,
            Node::Inner(a, b) | Node::Mul(a, b) => {
                let d = a.argument_degree(role)? + b.argument_degree(role)?;
                if d > 1 {
                    return Err(nl(self));
                }
                d
            }
            Node::Sum(items) => {
                let d = items[0].argument_degree(role)?;
                for e in &items[1..] {
                    if e.argument_degree(role)? != d {
                        return Err(nl(self));
                    }
                }
                d
            }
            Node::Sub(a, b) => {
                let d = a.argument_degree(role)?;
                if b.argument_degree(role)? != d {
                    return Err(nl(self));
                }
                d
            }
            Node::Power(e, _) => {
                if e.argument_degree(role)? > 0 {
                    return Err(nl(self));
                }
                0
            }
        })
    }

    /// Whether the expression contains the coefficient with id `id`.
    pub fn depends_on(&self, id: u64) -> bool {
        self.any(&mut |n| matches!(n, Node::Coefficient(c) if c.id == id))
    }

    pub(crate) fn contains_normal(&self) -> bool {
        self.any(&mut |n| matches!(n, Node::FacetNormal))
    }

    pub(crate) fn contains_div(&self) -> bool {
        self.any(&mut |n| matches!(n, Node::Div(_)))
    }

    fn any(&self, pred: &mut impl FnMut(&Node) -> bool) -> bool {
        if pred(self.node()) {
            return true;
        }
        match self.node() {
            Node::Component(e, _) | Node::Grad(e) | Node::Div(e) | Node::Power(e, _) => e.any(pred),
            Node::Inner(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => a.any(pred) || b.any(pred),
            Node::Sum(items) => items.iter().any(|e| e.any(pred)),
            _ => false,
        }
    }

    /// Calls `f` on every coefficient occurrence.
    pub(crate) fn visit_coefficients(&self, f: &mut impl FnMut(&Coefficient)) {
        self.any(&mut |n| {
            if let Node::Coefficient(c) = n {
                f(c);
            }
            false
        });
    }

    /// Rebuilds the tree bottom-up, replacing terminals through `leaf`.
    pub(crate) fn map_leaves(&self, leaf: &impl Fn(&Node) -> Option<Expr>) -> Expr {
        if let Some(e) = leaf(self.node()) {
            return e;
        }
        match self.node() {
            Node::Component(e, k) => e.map_leaves(leaf).component(*k),
            Node::Grad(e) => grad(&e.map_leaves(leaf)),
            Node::Div(e) => div(&e.map_leaves(leaf)),
            Node::Inner(a, b) => inner(&a.map_leaves(leaf), &b.map_leaves(leaf)),
            Node::Sum(items) => items.iter().map(|e| e.map_leaves(leaf)).reduce(|a, b| a + b).unwrap(),
            Node::Sub(a, b) => a.map_leaves(leaf) - b.map_leaves(leaf),
            Node::Mul(a, b) => a.map_leaves(leaf) * b.map_leaves(leaf),
            Node::Power(e, n) => pow(&e.map_leaves(leaf), *n),
            _ => self.clone(),
        }
    }

    /// Binds every occurrence of the coefficient `id` to `value`.
    pub fn bind(&self, id: u64, value: &Arc<FEFunction>) -> Expr {
        self.map_leaves(&|n| match n {
            Node::Coefficient(c) if c.id == id => Some(c.bound(value.clone()).expr()),
            _ => None,
        })
    }

    /// Replaces the argument `role` by `with`.
    pub fn replace_argument(&self, role: Role, with: &Expr) -> Expr {
        self.map_leaves(&|n| match n {
            Node::Argument(r) if *r == role => Some(with.clone()),
            _ => None,
        })
    }

    /// Exchanges test and trial arguments.
    pub fn swap_arguments(&self) -> Expr {
        self.map_leaves(&|n| match n {
            Node::Argument(Role::Test) => Some(Expr::trial()),
            Node::Argument(Role::Trial) => Some(Expr::test()),
            _ => None,
        })
    }

    /// Gateaux derivative with respect to coefficient `id` in the direction
    /// of the argument `role`.
    pub fn derivative(&self, id: u64, role: Role) -> Result<Expr> {
        let d = |e: &Expr| e.derivative(id, role);
        Ok(match self.node() {
            Node::Coefficient(c) if c.id == id => Self::new(Node::Argument(role)),
            Node::Argument(_)
            | Node::Coefficient(_)
            | Node::SpatialCoordinate
            | Node::Constant(_)
            | Node::VectorConstant(_)
            | Node::Field(_)
            | Node::FacetNormal => Self::zero(self.shape()?),
            Node::Component(e, k) => d(e)?.component(*k),
            Node::Grad(e) => grad(&d(e)?),
            Node::Div(e) => div(&d(e)?),
            Node::Inner(a, b) => inner(&d(a)?, b) + inner(a, &d(b)?),
            Node::Sum(items) => {
                let mut acc = d(&items[0])?;
                for e in &items[1..] {
                    acc = acc + d(e)?;
                }
                acc
            }
            Node::Sub(a, b) => d(a)? - d(b)?,
            Node::Mul(a, b) => d(a)? * b.clone() + a.clone() * d(b)?,
            Node::Power(e, n) => Expr::constant(*n as f64) * pow(e, n - 1) * d(e)?,
        })
    }

    /// Quadrature degree estimate, given the polynomial degrees of the test
    /// and trial functions. Fields count as `cap`.
    pub(crate) fn degree_estimate(&self, test: usize, trial: usize, cap: usize) -> usize {
        let est = |e: &Expr| e.degree_estimate(test, trial, cap);
        let deg = match self.node() {
            Node::Argument(Role::Test) => test,
            Node::Argument(Role::Trial) => trial,
            Node::Coefficient(c) => c.value.as_ref().map_or(cap, |v| v.space().degree()),
            Node::SpatialCoordinate => 1,
            Node::Constant(_) | Node::VectorConstant(_) | Node::FacetNormal => 0,
            Node::Field(_) => cap,
            Node::Component(e, _) => est(e),
            Node::Grad(e) | Node::Div(e) => est(e).saturating_sub(1),
            Node::Inner(a, b) | Node::Mul(a, b) => est(a) + est(b),
            Node::Sum(items) => items.iter().map(est).max().unwrap_or(0),
            Node::Sub(a, b) => est(a).max(est(b)),
            Node::Power(e, n) => {
                if *n >= 0 {
                    est(e) * *n as usize
                } else if est(e) == 0 {
                    0
                } else {
                    cap
                }
            }
        };
        deg.min(cap)
    }
}

/// Gradient of a scalar argument or coefficient.
pub fn grad(e: &Expr) -> Expr {
    match e.node() {
        Node::Constant(_) => Expr::zero(Shape::Vector),
        _ => Expr::new(Node::Grad(e.clone())),
    }
}

/// Divergence of a gradient, of `x` or of a constant vector.
pub fn div(e: &Expr) -> Expr {
    match e.node() {
        Node::VectorConstant(_) => Expr::constant(0.0),
        Node::SpatialCoordinate => Expr::constant(2.0),
        _ => Expr::new(Node::Div(e.clone())),
    }
}

/// Euclidean inner product (plain product for scalars).
pub fn inner(a: &Expr, b: &Expr) -> Expr {
    match (a.node(), b.node()) {
        (Node::Constant(x), Node::Constant(y)) => Expr::constant(x * y),
        (Node::VectorConstant(x), Node::VectorConstant(y)) => Expr::constant(x[0] * y[0] + x[1] * y[1]),
        _ if (a.is_zero() || b.is_zero()) && a.shape().is_ok() && a.shape().ok() == b.shape().ok() => {
            Expr::constant(0.0)
        }
        _ => Expr::new(Node::Inner(a.clone(), b.clone())),
    }
}

/// Integer power of a scalar.
pub fn pow(e: &Expr, n: i32) -> Expr {
    match (e.node(), n) {
        (_, 0) => Expr::constant(1.0),
        (_, 1) => e.clone(),
        (Node::Constant(c), _) => Expr::constant(c.powi(n)),
        _ => Expr::new(Node::Power(e.clone(), n)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    let shapes_agree = |a: &Expr, b: &Expr| matches!((a.shape(), b.shape()), (Ok(x), Ok(y)) if x == y);
    if a.is_zero() && shapes_agree(&a, &b) {
        return b;
    }
    if b.is_zero() && shapes_agree(&a, &b) {
        return a;
    }
    match (a.node(), b.node()) {
        (Node::Constant(x), Node::Constant(y)) => return Expr::constant(x + y),
        (Node::VectorConstant(x), Node::VectorConstant(y)) => return Expr::vector([x[0] + y[0], x[1] + y[1]]),
        _ => {}
    }
    let mut items = Vec::new();
    for e in [a, b] {
        match e.node() {
            Node::Sum(inner) => items.extend(inner.iter().cloned()),
            _ => items.push(e),
        }
    }
    // Fold scalar constants into the first constant slot.
    if let Some(first) = items.iter().position(|e| e.as_constant().is_some()) {
        let total: f64 = items.iter().filter_map(Expr::as_constant).sum();
        let mut k = 0;
        items.retain(|e| {
            let keep = e.as_constant().is_none() || k == first;
            k += 1;
            keep
        });
        items[first] = Expr::constant(total);
        if total == 0.0 && items.len() > 1 {
            items.remove(first);
        }
    }
    if items.len() == 1 {
        return items.pop().unwrap();
    }
    Expr::new(Node::Sum(items))
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a.node(), b.node()) {
        (Node::Constant(x), Node::Constant(y)) => Expr::constant(x - y),
        (Node::VectorConstant(x), Node::VectorConstant(y)) => Expr::vector([x[0] - y[0], x[1] - y[1]]),
        _ if b.is_zero() && a.shape().ok() == b.shape().ok() => a,
        _ if a.is_zero() && a.shape().ok() == b.shape().ok() => Expr::constant(-1.0) * b,
        _ => Expr::new(Node::Sub(a, b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a.node(), b.node()) {
        (Node::Constant(x), Node::Constant(y)) => return Expr::constant(x * y),
        (Node::Constant(x), Node::VectorConstant(v)) | (Node::VectorConstant(v), Node::Constant(x)) => {
            return Expr::vector([x * v[0], x * v[1]])
        }
        (Node::Constant(x), _) if *x == 1.0 => return b,
        (_, Node::Constant(y)) if *y == 1.0 => return a,
        _ => {}
    }
    if a.is_zero() || b.is_zero() {
        if let (Ok(sa), Ok(sb)) = (a.shape(), b.shape()) {
            if sa == Shape::Scalar || sb == Shape::Scalar {
                let s = if sa == Shape::Vector || sb == Shape::Vector {
                    Shape::Vector
                } else {
                    Shape::Scalar
                };
                return Expr::zero(s);
            }
        }
    }
    // Keep scalar constants in front so that `c * (d * e)` folds.
    if let (Some(x), Node::Mul(l, r)) = (a.as_constant(), b.node()) {
        if let Some(y) = l.as_constant() {
            return mul(Expr::constant(x * y), r.clone());
        }
    }
    Expr::new(Node::Mul(a, b))
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        add(self, rhs)
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        sub(self, rhs)
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        mul(self, rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        mul(Expr::constant(-1.0), self)
    }
}

macro_rules! ref_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                $tr::$m(self.clone(), rhs.clone())
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                $tr::$m(self, Expr::constant(rhs))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $tr::$m(Expr::constant(self), rhs)
            }
        }
    )*};
}
ref_ops!(Add add, Sub sub, Mul mul);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -self.clone()
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Argument(Role::Test) => write!(f, "v"),
            Node::Argument(Role::Trial) => write!(f, "du"),
            Node::Coefficient(c) => write!(f, "{c:?}"),
            Node::SpatialCoordinate => write!(f, "x"),
            Node::Constant(c) => write!(f, "{c}"),
            Node::VectorConstant(v) => write!(f, "({}, {})", v[0], v[1]),
            Node::Field(fl) => write!(f, "{}", fl.name()),
            Node::FacetNormal => write!(f, "n"),
            Node::Component(e, k) => write!(f, "{e:?}[{k}]"),
            Node::Grad(e) => write!(f, "grad({e:?})"),
            Node::Div(e) => write!(f, "div({e:?})"),
            Node::Inner(a, b) => write!(f, "inner({a:?}, {b:?})"),
            Node::Sum(items) => {
                write!(f, "(")?;
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{e:?}")?;
                }
                write!(f, ")")
            }
            Node::Sub(a, b) => write!(f, "({a:?} - {b:?})"),
            Node::Mul(a, b) => write!(f, "{a:?}*{b:?}"),
            Node::Power(e, n) => write!(f, "{e:?}**{n}"),
        }
    }
}
