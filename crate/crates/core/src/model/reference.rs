use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracops::{caputo_apply_rows, gamma, FractionalOrder, Grid};

/// p(t)·cos(ω t) with p given by ascending coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyCosine {
    pub poly: Vec<f64>,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSignal {
    Zero {
        dim: usize,
    },
    /// Ascending coefficient vectors, one per component.
    Polynomial(Vec<Vec<f64>>),
    PolyCosine(Vec<PolyCosine>),
    /// Linear interpolation of `values` (q × len(times)) over `times`.
    SampleTable {
        times: Vec<f64>,
        values: DMatrix<f64>,
    },
}

fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * t + ci)
}

impl ReferenceSignal {
    pub fn sample_table(times: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        if times.is_empty() || values.ncols() != times.len() {
            return Err(Error::input("reference table needs one column per time"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input(
                "reference table times must be strictly increasing",
            ));
        }
        Ok(ReferenceSignal::SampleTable { times, values })
    }

    pub fn dim(&self) -> usize {
        match self {
            ReferenceSignal::Zero { dim } => *dim,
            ReferenceSignal::Polynomial(c) => c.len(),
            ReferenceSignal::PolyCosine(c) => c.len(),
            ReferenceSignal::SampleTable { values, .. } => values.nrows(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ReferenceSignal::Zero { .. })
    }

    /// Reference value at an arbitrary time; tables clamp outside their range.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            ReferenceSignal::Zero { dim } => DVector::zeros(*dim),
            ReferenceSignal::Polynomial(c) => {
                DVector::from_iterator(c.len(), c.iter().map(|p| poly_eval(p, t)))
            }
            ReferenceSignal::PolyCosine(c) => DVector::from_iterator(
                c.len(),
                c.iter()
                    .map(|pc| poly_eval(&pc.poly, t) * (pc.omega * t).cos()),
            ),
            ReferenceSignal::SampleTable { times, values } => {
                let last = times.len() - 1;
                if t <= times[0] {
                    return values.column(0).into_owned();
                }
                if t >= times[last] {
                    return values.column(last).into_owned();
                }
                let i = times.partition_point(|&s| s <= t) - 1;
                let s = (t - times[i]) / (times[i + 1] - times[i]);
                values.column(i) * (1.0 - s) + values.column(i + 1) * s
            }
        }
    }

    pub fn covers(&self, t_final: f64) -> bool {
        match self {
            ReferenceSignal::SampleTable { times, .. } => {
                times[0] <= 0.0 && *times.last().unwrap() >= t_final
            }
            _ => true,
        }
    }
}

/// q × (N+1) samples of the reference on the grid.
pub fn sample_reference(reference: &ReferenceSignal, grid: &Grid) -> Result<DMatrix<f64>> {
    if !reference.covers(grid.t_final()) {
        return Err(Error::input(format!(
            "reference table does not cover [0, {}]",
            grid.t_final()
        )));
    }
    let q = reference.dim();
    let mut out = DMatrix::zeros(q, grid.len());
    if reference.is_zero() {
        return Ok(out);
    }
    for k in 0..grid.len() {
        out.set_column(k, &reference.eval(grid.t(k)));
    }
    Ok(out)
}

/// Analytic Caputo derivative of a polynomial reference via
/// C D^α t^p = Γ(p+1)/Γ(p+1−α) t^{p−α} (p ≥ 1; constants vanish).
pub fn polynomial_caputo(coeffs: &[Vec<f64>], alpha: FractionalOrder, grid: &Grid) -> DMatrix<f64> {
    let a = alpha.value();
    let mut out = DMatrix::zeros(coeffs.len(), grid.len());
    for (i, c) in coeffs.iter().enumerate() {
        for k in 1..grid.len() {
            let t = grid.t(k);
            let mut acc = 0.0;
            for (p, &cp) in c.iter().enumerate().skip(1) {
                if cp == 0.0 {
                    continue;
                }
                let pf = p as f64;
                acc += cp * gamma(pf + 1.0) / gamma(pf + 1.0 - a) * t.powf(pf - a);
            }
            out[(i, k)] = acc;
        }
    }
    out
}

/// Caputo derivative of the sampled reference through the GL kernel.
pub fn reference_caputo_numeric(
    reference: &ReferenceSignal,
    alpha: FractionalOrder,
    grid: &Grid,
) -> Result<DMatrix<f64>> {
    caputo_apply_rows(&sample_reference(reference, grid)?, alpha, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_reference_samples() {
        let g = Grid::new(1.0, 4).unwrap();
        let s = sample_reference(&ReferenceSignal::Zero { dim: 3 }, &g).unwrap();
        assert_eq!(s, DMatrix::zeros(3, 5));
    }

    #[test]
    fn poly_cosine_evaluates() {
        let r = ReferenceSignal::PolyCosine(vec![PolyCosine {
            poly: vec![1.0, -0.4],
            omega: 1.0,
        }]);
        assert_eq!(r.eval(0.0)[0], 1.0);
        let t = 2.0f64;
        assert!((r.eval(t)[0] - (1.0 - 0.4 * t) * t.cos()).abs() < 1e-15);
    }

    #[test]
    fn table_must_cover_horizon() {
        let r = ReferenceSignal::sample_table(
            vec![0.0, 1.0],
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        )
        .unwrap();
        let g = Grid::new(2.0, 4).unwrap();
        assert!(matches!(sample_reference(&r, &g), Err(Error::Input(_))));
        let g = Grid::new(1.0, 4).unwrap();
        let s = sample_reference(&r, &g).unwrap();
        assert!((s[(0, 2)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn polynomial_caputo_matches_gl_to_first_order() {
        let coeffs = vec![vec![0.3, -1.0, 2.0]];
        let r = ReferenceSignal::Polynomial(coeffs.clone());
        let alpha = FractionalOrder::new(0.8).unwrap();
        let mut errs = Vec::new();
        for n in [200, 400] {
            let g = Grid::new(1.0, n).unwrap();
            let exact = polynomial_caputo(&coeffs, alpha, &g);
            let gl = reference_caputo_numeric(&r, alpha, &g).unwrap();
            // Away from t = 0 where the GL start-up error is concentrated.
            let k0 = n / 4;
            let e = (k0..=n)
                .map(|k| (exact[(0, k)] - gl[(0, k)]).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[0] < 2e-2, "{errs:?}");
        assert!(errs[0] / errs[1] > 1.7, "{errs:?}");
    }
}
