//! Dual-weighted residual error estimation: residual localization, dual
//! extrapolation, the estimate `η_h`, cell indicators and Dörfler marking.

mod extrapolate;
mod localize;

use std::io::Write;
use std::sync::Arc;

pub use extrapolate::extrapolate;
pub use localize::{localize, ResidualRep};

use crate::assemble::assemble_vector;
use crate::error::{Error, Result};
use crate::forms::Form;
use crate::space::{FEFunction, FunctionSpace};

/// `η_h = |r(Ez_h)|`, with `r` assembled against the space of `ez`.
pub fn estimate(r: &Form, ez: &FEFunction) -> Result<f64> {
    let v = assemble_vector(r, ez.space())?;
    Ok(v.iter().zip(ez.coeffs()).map(|(a, b)| a * b).sum::<f64>().abs())
}

/// The dual weight `Ez_h - π_h Ez_h`, with `π_h` nodal interpolation into
/// `coarse` and the difference taken in the space of `ez`.
pub fn dual_weight(ez: &FEFunction, coarse: &Arc<FunctionSpace>) -> Result<FEFunction> {
    let pi = ez.interpolate(coarse)?.interpolate(ez.space())?;
    let coeffs = ez.coeffs().iter().zip(pi.coeffs()).map(|(a, b)| a - b).collect();
    FEFunction::new(ez.space(), coeffs)
}

/// Per-cell error indicators.
#[derive(Clone, Debug, PartialEq)]
pub struct Indicators {
    /// `η_T = |signed_T|`.
    pub eta: Vec<f64>,
    /// `⟨R_T, w⟩_T + {⟨R_∂T, w⟩_{∂T}}` with interior facet terms averaged
    /// over the two incident cells.
    pub signed: Vec<f64>,
}

impl Indicators {
    /// `Σ_T η_T`.
    pub fn sum(&self) -> f64 {
        self.eta.iter().sum()
    }

    pub fn signed_sum(&self) -> f64 {
        self.signed.iter().sum()
    }

    /// CSV rows `cell_id,eta_T,signed_contribution`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let mut s = String::from("cell_id,eta_T,signed_contribution\n");
        for (c, (e, v)) in self.eta.iter().zip(&self.signed).enumerate() {
            s.push_str(&format!("{c},{e:.11e},{v:.11e}\n"));
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }
}

/// Indicators `η_T = |⟨R_T, w⟩_T + {⟨R_∂T, w⟩_{∂T}}|` for the weight
/// `w = ez - pi_ez`. Interior facets contribute half of the sum of both
/// incident cells' facet terms to each cell; boundary facets contribute
/// their full term.
pub fn indicators(rep: &ResidualRep, ez: &FEFunction, pi_ez: &FEFunction) -> Result<Indicators> {
    let pi = pi_ez.interpolate(ez.space())?;
    let w = FEFunction::new(
        ez.space(),
        ez.coeffs().iter().zip(pi.coeffs()).map(|(a, b)| a - b).collect(),
    )?;
    weighted_indicators(rep, &w)
}

/// [`indicators`] for a precomputed weight.
pub fn weighted_indicators(rep: &ResidualRep, w: &FEFunction) -> Result<Indicators> {
    let terms = rep.cell_terms(w)?;
    let mesh = rep.mesh();
    let mut signed: Vec<f64> = terms.iter().map(|t| t[0]).collect();
    for facet in mesh.facet_adjacency() {
        match facet.incident.as_slice() {
            [(c, e)] => signed[*c] += terms[*c][1 + e],
            [(c1, e1), (c2, e2)] => {
                let avg = 0.5 * (terms[*c1][1 + e1] + terms[*c2][1 + e2]);
                signed[*c1] += avg;
                signed[*c2] += avg;
            }
            _ => unreachable!("facets have one or two incident cells"),
        }
    }
    Ok(Indicators {
        eta: signed.iter().map(|s| s.abs()).collect(),
        signed,
    })
}

/// Dörfler marking: the shortest prefix of cells, sorted by decreasing
/// indicator with ties broken by ascending id, whose indicators sum to at
/// least `alpha` times the total. Returns the prefix in that order. With
/// `alpha = 1` every cell with a positive indicator is marked; a zero total
/// marks nothing.
pub fn mark_dorfler(eta: &[f64], alpha: f64) -> Result<Vec<usize>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("Dörfler parameter {alpha} not in (0, 1]")));
    }
    if let Some(bad) = eta.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::InvalidArgument(format!("indicator {bad} is not a nonnegative number")));
    }
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]).then(a.cmp(&b)));
    let positive = order.iter().take_while(|&&c| eta[c] > 0.0).count();
    order.truncate(positive);
    if alpha == 1.0 {
        return Ok(order);
    }
    let total: f64 = order.iter().map(|&c| eta[c]).sum();
    let target = alpha * total;
    let mut acc = 0.0;
    for (k, &c) in order.iter().enumerate() {
        acc += eta[c];
        if acc >= target {
            order.truncate(k + 1);
            return Ok(order);
        }
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dorfler_examples() {
        assert_eq!(mark_dorfler(&[4.0, 3.0, 2.0, 1.0], 0.5).unwrap(), vec![0, 1]);
        assert_eq!(mark_dorfler(&[1.0, 0.0, 2.0], 1.0).unwrap(), vec![2, 0]);
        assert_eq!(mark_dorfler(&[0.0; 4], 0.5).unwrap(), Vec::<usize>::new());
        assert_eq!(mark_dorfler(&[1.0; 7], 0.5).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(mark_dorfler(&[2.0, 5.0, 2.0], 0.7).unwrap(), vec![1, 0]);
        assert_eq!(mark_dorfler(&[2.0, 5.0, 2.0], 0.8).unwrap(), vec![1, 0, 2]);
        assert!(mark_dorfler(&[1.0], 0.0).is_err());
        assert!(mark_dorfler(&[1.0], 1.5).is_err());
        assert!(mark_dorfler(&[-1.0], 0.5).is_err());
        assert!(mark_dorfler(&[f64::NAN], 0.5).is_err());
    }

    #[test]
    fn indicator_csv() {
        let ind = Indicators {
            eta: vec![0.5, 0.25],
            signed: vec![-0.5, 0.25],
        };
        let mut buf = Vec::new();
        ind.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "cell_id,eta_T,signed_contribution\n0,5.00000000000e-1,-5.00000000000e-1\n1,2.50000000000e-1,2.50000000000e-1\n"
        );
        assert_eq!(ind.sum(), 0.75);
        assert_eq!(ind.signed_sum(), -0.25);
    }
}
