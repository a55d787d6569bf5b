use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::plant::{Plant, TimeMatrix};
use super::reference::ReferenceSignal;
use crate::error::{Error, Result};
use crate::fracops::FractionalOrder;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Quadratic weights. `cost_order` = 1 is the ordinary integral cost; values
/// below one weight the running cost with the Riemann–Liouville kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub q: TimeMatrix,
    pub r: TimeMatrix,
    pub terminal: DMatrix<f64>,
    pub cost_order: FractionalOrder,
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Weights(format!(
            "{what} is not square ({}x{})",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * m.amax().max(1.0) {
        return Err(Error::Weights(format!(
            "{what} is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    Ok(())
}

fn check_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    check_symmetric(m, what)?;
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL {
        return Err(Error::Weights(format!(
            "{what} is not positive semi-definite (smallest eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

fn check_pd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    check_symmetric(m, what)?;
    if m.clone().cholesky().is_none() {
        return Err(Error::Weights(format!("{what} is not positive definite")));
    }
    Ok(())
}

impl Weights {
    pub fn validate(&self, q: usize, r: usize) -> Result<()> {
        if self.q.shape() != (q, q) {
            return Err(Error::input(format!(
                "Q is {:?}, expected ({q}, {q})",
                self.q.shape()
            )));
        }
        if self.r.shape() != (r, r) {
            return Err(Error::input(format!(
                "R is {:?}, expected ({r}, {r})",
                self.r.shape()
            )));
        }
        if self.terminal.shape() != (q, q) {
            return Err(Error::input(format!(
                "T is {:?}, expected ({q}, {q})",
                self.terminal.shape()
            )));
        }
        // Interpolated tables stay PSD/PD when every knot is.
        for m in self.q.knots() {
            check_psd(m, "Q")?;
        }
        for m in self.r.knots() {
            check_pd(m, "R")?;
        }
        check_psd(&self.terminal, "T")
    }

    pub fn scaled(&self, c: f64) -> Weights {
        Weights {
            q: self.q.scaled(c),
            r: self.r.scaled(c),
            terminal: &self.terminal * c,
            cost_order: self.cost_order,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingProblem {
    name: String,
    plant: Plant,
    weights: Weights,
    reference: ReferenceSignal,
    x0: DVector<f64>,
    alpha: FractionalOrder,
    t_final: f64,
}

impl TrackingProblem {
    pub fn new(
        name: impl Into<String>,
        plant: Plant,
        weights: Weights,
        reference: ReferenceSignal,
        x0: DVector<f64>,
        alpha: FractionalOrder,
        t_final: f64,
    ) -> Result<Self> {
        let p = TrackingProblem {
            name: name.into(),
            plant,
            weights,
            reference,
            x0,
            alpha,
            t_final,
        };
        p.validate()?;
        if !alpha.nominal_range() {
            log::warn!(
                "problem '{}': alpha = {} lies outside (0.9, 1], where the optimality conditions are stated; \
                 the costate residual is not expected to be small",
                p.name,
                alpha.value()
            );
        }
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let q = self.plant.state_dim();
        let r = self.plant.control_dim();
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::input(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if self.x0.len() != q {
            return Err(Error::input(format!(
                "x0 has length {}, state dimension is {q}",
                self.x0.len()
            )));
        }
        if self.reference.dim() != q {
            return Err(Error::input(format!(
                "reference has dimension {}, state dimension is {q}",
                self.reference.dim()
            )));
        }
        if !self.reference.covers(self.t_final) {
            return Err(Error::input("reference table does not cover the horizon"));
        }
        if let Plant::Linear(p) = &self.plant {
            if !p.a.covers(self.t_final) || !p.b.covers(self.t_final) {
                return Err(Error::input(
                    "plant matrix table does not cover the horizon",
                ));
            }
        }
        if !self.weights.q.covers(self.t_final) || !self.weights.r.covers(self.t_final) {
            return Err(Error::input("weight table does not cover the horizon"));
        }
        self.weights.validate(q, r)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn plant(&self) -> &Plant {
        &self.plant
    }
    pub fn weights(&self) -> &Weights {
        &self.weights
    }
    pub fn reference(&self) -> &ReferenceSignal {
        &self.reference
    }
    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }
    pub fn alpha(&self) -> FractionalOrder {
        self.alpha
    }
    pub fn t_final(&self) -> f64 {
        self.t_final
    }
    pub fn state_dim(&self) -> usize {
        self.plant.state_dim()
    }
    pub fn control_dim(&self) -> usize {
        self.plant.control_dim()
    }

    pub fn with_x0(&self, x0: DVector<f64>) -> Result<Self> {
        let mut p = self.clone();
        p.x0 = x0;
        p.validate()?;
        Ok(p)
    }

    pub fn with_reference(&self, reference: ReferenceSignal) -> Result<Self> {
        let mut p = self.clone();
        p.reference = reference;
        p.validate()?;
        Ok(p)
    }

    pub fn with_alpha(&self, alpha: FractionalOrder) -> Self {
        let mut p = self.clone();
        p.alpha = alpha;
        p
    }

    pub fn with_plant(&self, plant: Plant) -> Result<Self> {
        let mut p = self.clone();
        p.plant = plant;
        p.validate()?;
        Ok(p)
    }

    pub fn with_weights(&self, weights: Weights) -> Result<Self> {
        let mut p = self.clone();
        p.weights = weights;
        p.validate()?;
        Ok(p)
    }

    /// Same problem with (Q, R, T) multiplied by `c`.
    pub fn with_cost_scaled(&self, c: f64) -> Result<Self> {
        self.with_weights(self.weights.scaled(c))
    }

    /// Same problem with only Q multiplied by `c`.
    pub fn with_q_scaled(&self, c: f64) -> Result<Self> {
        let mut w = self.weights.clone();
        w.q = w.q.scaled(c);
        self.with_weights(w)
    }

    pub fn with_cost_order(&self, alpha1: FractionalOrder) -> Self {
        let mut p = self.clone();
        p.weights.cost_order = alpha1;
        p
    }

    pub fn with_name(&self, name: impl Into<String>) -> Self {
        let mut p = self.clone();
        p.name = name.into();
        p
    }
}
