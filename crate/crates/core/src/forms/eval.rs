//! Interpretation of integrands at quadrature points and local integration.
//!
//! An expression is evaluated over all quadrature points of a cell or facet
//! at once. Since integrands are at most linear in each argument, a value is
//! a set of up to four blocks: argument-free, test-only, trial-only and
//! test × trial, each indexed `((q * ni + i) * nj + j) * comps + k`.

use std::sync::Arc;

use super::expr::{Coefficient, Expr, Field, Node, Role};
use super::form::{Form, Measure};
use crate::error::{Error, Result};
use crate::mesh::{CellGeometry, Mesh, Point};
use crate::poly::Poly2;
use crate::quadrature::{line_rule, triangle_rule, MAX_DEGREE};
use crate::space::{FEFunction, Tabulation};

const TEST: usize = 1;
const TRIAL: usize = 2;

#[derive(Clone, Copy)]
struct Dims {
    nq: usize,
    nt: usize,
    nr: usize,
}

impl Dims {
    fn ni(&self, b: usize) -> usize {
        if b & TEST != 0 {
            self.nt
        } else {
            1
        }
    }

    fn nj(&self, b: usize) -> usize {
        if b & TRIAL != 0 {
            self.nr
        } else {
            1
        }
    }

    fn len(&self, b: usize, comps: usize) -> usize {
        self.nq * self.ni(b) * self.nj(b) * comps
    }
}

#[derive(Clone)]
struct Val {
    comps: usize,
    blocks: [Option<Vec<f64>>; 4],
}

impl Val {
    fn constant(data: Vec<f64>, comps: usize) -> Self {
        Self::block(0, data, comps)
    }

    fn block(b: usize, data: Vec<f64>, comps: usize) -> Self {
        let mut blocks = [None, None, None, None];
        blocks[b] = Some(data);
        Val { comps, blocks }
    }

    fn add_scaled(&mut self, other: &Val, s: f64) {
        for (mine, theirs) in self.blocks.iter_mut().zip(&other.blocks) {
            if let Some(t) = theirs {
                match mine {
                    Some(m) => m.iter_mut().zip(t).for_each(|(m, t)| *m += s * t),
                    None => *mine = Some(t.iter().map(|t| s * t).collect()),
                }
            }
        }
    }

    fn map(&self, comps: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Val {
        Val {
            comps,
            blocks: self.blocks.clone().map(|b| b.map(|b| f(&b))),
        }
    }

    /// Pointwise product (`dot = false`, one operand scalar) or inner
    /// product (`dot = true`, equal component counts).
    fn product(&self, other: &Val, dot: bool, d: Dims) -> Val {
        let (ca, cb) = (self.comps, other.comps);
        let co = if dot { 1 } else { ca.max(cb) };
        let mut out = Val {
            comps: co,
            blocks: [None, None, None, None],
        };
        for ba in 0..4 {
            let Some(xa) = &self.blocks[ba] else { continue };
            for bb in 0..4 {
                let Some(xb) = &other.blocks[bb] else { continue };
                if ba & bb != 0 {
                    continue;
                }
                let bo = ba | bb;
                let (ni, nj) = (d.ni(bo), d.nj(bo));
                let (nia, nja, nib, njb) = (d.ni(ba), d.nj(ba), d.ni(bb), d.nj(bb));
                let dst = out.blocks[bo].get_or_insert_with(|| vec![0.0; d.len(bo, co)]);
                for q in 0..d.nq {
                    for i in 0..ni {
                        let ia = if ba & TEST != 0 { i } else { 0 };
                        let ib = if bb & TEST != 0 { i } else { 0 };
                        for j in 0..nj {
                            let ja = if ba & TRIAL != 0 { j } else { 0 };
                            let jb = if bb & TRIAL != 0 { j } else { 0 };
                            let pa = ((q * nia + ia) * nja + ja) * ca;
                            let pb = ((q * nib + ib) * njb + jb) * cb;
                            let po = ((q * ni + i) * nj + j) * co;
                            if dot {
                                dst[po] += (0..ca).map(|k| xa[pa + k] * xb[pb + k]).sum::<f64>();
                            } else if ca == 1 {
                                for k in 0..cb {
                                    dst[po + k] += xa[pa] * xb[pb + k];
                                }
                            } else {
                                for k in 0..ca {
                                    dst[po + k] += xa[pa + k] * xb[pb];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Reference tabulation pushed forward to a physical cell.
struct PhysTab<'a> {
    n: usize,
    values: &'a [f64],
    grads: Vec<f64>,
    laps: Vec<f64>,
}

impl<'a> PhysTab<'a> {
    fn new(tab: &'a Tabulation, g: &CellGeometry, laplacian: bool) -> Self {
        let grads = tab
            .grads
            .iter()
            .flat_map(|&r| g.push_gradient(r))
            .collect();
        let laps = if laplacian {
            tab.hessians.iter().map(|&h| g.push_laplacian(h)).collect()
        } else {
            Vec::new()
        };
        PhysTab {
            n: tab.n,
            values: &tab.values,
            grads,
            laps,
        }
    }
}

/// Values of one coefficient at the quadrature points.
struct CoeffVals {
    values: Vec<f64>,
    grads: Vec<f64>,
    laps: Vec<f64>,
}

struct Env<'a> {
    d: Dims,
    x: &'a [Point],
    normal: Option<[f64; 2]>,
    test: Option<&'a PhysTab<'a>>,
    trial: Option<&'a PhysTab<'a>>,
    keys: &'a [CoeffKey],
    coeffs: &'a [CoeffVals],
}

/// Coefficient id plus the address of its bound value.
#[derive(Clone, Copy, PartialEq)]
struct CoeffKey {
    id: u64,
    addr: usize,
}

fn key_of(c: &Coefficient) -> Option<CoeffKey> {
    c.value().map(|v| CoeffKey {
        id: c.id(),
        addr: Arc::as_ptr(v) as usize,
    })
}

impl Env<'_> {
    fn coefficient(&self, c: &Coefficient) -> Result<&CoeffVals> {
        let key = key_of(c).ok_or_else(|| Error::UnboundCoefficient(c.name().into()))?;
        let k = self.keys.iter().position(|&k| k == key).expect("coefficient registered");
        Ok(&self.coeffs[k])
    }

    fn argument(&self, role: Role) -> Result<(&PhysTab<'_>, usize)> {
        let (tab, b) = match role {
            Role::Test => (self.test, TEST),
            Role::Trial => (self.trial, TRIAL),
        };
        tab.map(|t| (t, b))
            .ok_or_else(|| Error::InvalidArgument(format!("no basis supplied for the {role:?} function")))
    }

    fn uniform(&self, v: &[f64]) -> Val {
        Val::constant(v.iter().copied().cycle().take(self.d.nq * v.len()).collect(), v.len())
    }

    fn eval(&self, e: &Expr) -> Result<Val> {
        let d = self.d;
        Ok(match e.node() {
            Node::Argument(role) => {
                let (t, b) = self.argument(*role)?;
                Val::block(b, t.values.to_vec(), 1)
            }
            Node::Coefficient(c) => Val::constant(self.coefficient(c)?.values.clone(), 1),
            Node::SpatialCoordinate => Val::constant(self.x.iter().flatten().copied().collect(), 2),
            Node::Constant(c) => self.uniform(&[*c]),
            Node::VectorConstant(v) => self.uniform(v),
            Node::Field(Field::Scalar(_, f)) => Val::constant(self.x.iter().map(|&x| f(x)).collect(), 1),
            Node::Field(Field::Vector(_, f)) => Val::constant(self.x.iter().flat_map(|&x| f(x)).collect(), 2),
            Node::FacetNormal => {
                let n = self
                    .normal
                    .ok_or_else(|| Error::Shape("facet normal outside a facet integral".into()))?;
                self.uniform(&n)
            }
            Node::Component(inner, k) => {
                let v = self.eval(inner)?;
                v.map(1, |b| b.iter().skip(*k).step_by(2).copied().collect())
            }
            Node::Grad(inner) => match inner.node() {
                Node::Argument(role) => {
                    let (t, b) = self.argument(*role)?;
                    Val::block(b, t.grads.clone(), 2)
                }
                Node::Coefficient(c) => Val::constant(self.coefficient(c)?.grads.clone(), 2),
                Node::Constant(_) => self.uniform(&[0.0, 0.0]),
                _ => return Err(Error::Shape(format!("cannot evaluate {e:?}"))),
            },
            Node::Div(inner) => match inner.node() {
                Node::Grad(g) => match g.node() {
                    Node::Argument(role) => {
                        let (t, b) = self.argument(*role)?;
                        Val::block(b, t.laps.clone(), 1)
                    }
                    Node::Coefficient(c) => Val::constant(self.coefficient(c)?.laps.clone(), 1),
                    Node::Constant(_) => self.uniform(&[0.0]),
                    _ => return Err(Error::Shape(format!("cannot evaluate {e:?}"))),
                },
                Node::SpatialCoordinate => self.uniform(&[2.0]),
                Node::VectorConstant(_) => self.uniform(&[0.0]),
                _ => return Err(Error::Shape(format!("cannot evaluate {e:?}"))),
            },
            Node::Inner(a, b) => self.eval(a)?.product(&self.eval(b)?, true, d),
            Node::Mul(a, b) => self.eval(a)?.product(&self.eval(b)?, false, d),
            Node::Sum(items) => {
                let mut acc = self.eval(&items[0])?;
                for item in &items[1..] {
                    acc.add_scaled(&self.eval(item)?, 1.0);
                }
                acc
            }
            Node::Sub(a, b) => {
                let mut acc = self.eval(a)?;
                acc.add_scaled(&self.eval(b)?, -1.0);
                acc
            }
            Node::Power(inner, n) => {
                let v = self.eval(inner)?;
                if v.blocks[1..].iter().any(Option::is_some) {
                    return Err(Error::NotLinear(format!("{e:?}")));
                }
                v.map(1, |b| b.iter().map(|x| x.powi(*n)).collect())
            }
        })
    }
}

/// A set of local basis functions given as polynomials on the reference
/// triangle.
#[derive(Clone, Copy)]
pub(crate) struct LocalBasis<'a> {
    pub polys: &'a [Poly2],
    pub degree: usize,
}

struct PointSet {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    test: Option<Tabulation>,
    trial: Option<Tabulation>,
    coeffs: Vec<Tabulation>,
}

struct TermPlan {
    integrand: Expr,
    measure: Measure,
    laplacian: bool,
    /// One set for cell integrals, one per local edge for facet integrals.
    sets: Vec<PointSet>,
}

/// Precomputed data for integrating a form cell by cell.
pub(crate) struct Kernel {
    arity: usize,
    nt: usize,
    nr: usize,
    keys: Vec<CoeffKey>,
    values: Vec<Arc<FEFunction>>,
    terms: Vec<TermPlan>,
}

const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Points on local edge `e`, running from vertex `(e+1)%3` to `(e+2)%3`.
pub(crate) fn edge_points(e: usize, t: &[f64]) -> Vec<[f64; 2]> {
    let (a, b) = (REF_VERTICES[(e + 1) % 3], REF_VERTICES[(e + 2) % 3]);
    t.iter()
        .map(|&t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
        .collect()
}

impl Kernel {
    pub fn new(form: &Form, mesh: &Mesh, test: Option<LocalBasis>, trial: Option<LocalBasis>) -> Result<Self> {
        let arity = form.arity();
        if (arity >= 1 && test.is_none()) || (arity == 2 && trial.is_none()) {
            return Err(Error::InvalidArgument(format!(
                "form of arity {arity} needs {} basis",
                if arity == 2 { "test and trial" } else { "a test" }
            )));
        }
        let test = if arity >= 1 { test } else { None };
        let trial = if arity == 2 { trial } else { None };

        let mut keys = Vec::new();
        let mut values = Vec::new();
        for c in form.coefficients() {
            let v = c.value().ok_or_else(|| Error::UnboundCoefficient(c.name().into()))?;
            if v.space().mesh().uid() != mesh.uid() {
                return Err(Error::SpaceMismatch(format!(
                    "coefficient `{}` lives on a different mesh",
                    c.name()
                )));
            }
            let key = key_of(&c).unwrap();
            if !keys.contains(&key) {
                keys.push(key);
                values.push(v.clone());
            }
        }

        let tab = |b: Option<LocalBasis>, pts: &[[f64; 2]]| b.map(|b| Tabulation::of(b.polys, pts));
        let mut terms = Vec::new();
        for t in form.terms() {
            let deg = t.integrand.degree_estimate(
                test.map_or(0, |b| b.degree),
                trial.map_or(0, |b| b.degree),
                MAX_DEGREE,
            );
            let point_sets: Vec<(Vec<[f64; 2]>, Vec<f64>)> = match t.measure {
                Measure::Cell => {
                    let rule = triangle_rule(deg);
                    vec![(rule.points.clone(), rule.weights.clone())]
                }
                Measure::ExteriorFacet(_) => {
                    let rule = line_rule(deg);
                    (0..3)
                        .map(|e| (edge_points(e, &rule.points), rule.weights.clone()))
                        .collect()
                }
            };
            let sets = point_sets
                .into_iter()
                .map(|(points, weights)| PointSet {
                    test: tab(test, &points),
                    trial: tab(trial, &points),
                    coeffs: values.iter().map(|v| v.space().element().tabulate(&points)).collect(),
                    points,
                    weights,
                })
                .collect();
            terms.push(TermPlan {
                laplacian: t.integrand.contains_div(),
                integrand: t.integrand.clone(),
                measure: t.measure,
                sets,
            });
        }
        Ok(Kernel {
            arity,
            nt: test.map_or(1, |b| b.polys.len()),
            nr: trial.map_or(1, |b| b.polys.len()),
            keys,
            values,
            terms,
        })
    }

    /// Size of the local tensor: 1, `nt` or `nt * nr`.
    pub fn local_len(&self) -> usize {
        match self.arity {
            0 => 1,
            1 => self.nt,
            _ => self.nt * self.nr,
        }
    }

    /// Integrates all terms over `cell` and its boundary facets, adding into
    /// `out` (layout `i * nr + j`).
    pub fn integrate(&self, mesh: &Mesh, cell: usize, out: &mut [f64]) -> Result<()> {
        let geom = mesh.geometry(cell);
        let facets = mesh.cell_facets(cell);
        for term in &self.terms {
            match term.measure {
                Measure::Cell => {
                    self.integrate_set(term, &term.sets[0], cell, &geom, None, geom.det_jacobian(), out)?;
                }
                Measure::ExteriorFacet(m) => {
                    for (e, &f) in facets.iter().enumerate() {
                        if mesh.facet(f).marker == Some(m) {
                            let scale = geom.edge_lengths[e];
                            self.integrate_set(term, &term.sets[e], cell, &geom, Some(geom.normals[e]), scale, out)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn integrate_set(
        &self,
        term: &TermPlan,
        set: &PointSet,
        cell: usize,
        geom: &CellGeometry,
        normal: Option<[f64; 2]>,
        scale: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let nq = set.points.len();
        let x: Vec<Point> = set.points.iter().map(|&p| geom.to_physical(p)).collect();
        let test = set.test.as_ref().map(|t| PhysTab::new(t, geom, term.laplacian));
        let trial = set.trial.as_ref().map(|t| PhysTab::new(t, geom, term.laplacian));
        let coeffs: Vec<CoeffVals> = self
            .values
            .iter()
            .zip(&set.coeffs)
            .map(|(f, tab)| {
                let dofs = f.space().cell_dofs(cell);
                let c = f.coeffs();
                let ph = PhysTab::new(tab, geom, term.laplacian);
                let mut v = CoeffVals {
                    values: vec![0.0; nq],
                    grads: vec![0.0; 2 * nq],
                    laps: vec![0.0; if term.laplacian { nq } else { 0 }],
                };
                for q in 0..nq {
                    for (i, &dof) in dofs.iter().enumerate() {
                        let k = q * ph.n + i;
                        v.values[q] += c[dof] * ph.values[k];
                        v.grads[2 * q] += c[dof] * ph.grads[2 * k];
                        v.grads[2 * q + 1] += c[dof] * ph.grads[2 * k + 1];
                        if term.laplacian {
                            v.laps[q] += c[dof] * ph.laps[k];
                        }
                    }
                }
                v
            })
            .collect();
        let env = Env {
            d: Dims {
                nq,
                nt: self.nt,
                nr: self.nr,
            },
            x: &x,
            normal,
            test: test.as_ref(),
            trial: trial.as_ref(),
            keys: &self.keys,
            coeffs: &coeffs,
        };
        let val = env.eval(&term.integrand)?;
        let block = match self.arity {
            0 => 0,
            1 => TEST,
            _ => TEST | TRIAL,
        };
        if let Some(data) = &val.blocks[block] {
            let n = self.local_len();
            for q in 0..nq {
                let w = set.weights[q] * scale;
                for (o, v) in out.iter_mut().zip(&data[q * n..(q + 1) * n]) {
                    *o += w * v;
                }
            }
        }
        Ok(())
    }
}
