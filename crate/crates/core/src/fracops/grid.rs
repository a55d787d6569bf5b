use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Differentiation order α ∈ (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub const ONE: FractionalOrder = FractionalOrder(1.0);

    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
            Ok(FractionalOrder(alpha))
        } else {
            Err(Error::Domain(format!(
                "fractional order must lie in (0, 1], got {alpha}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// True for α ∈ (0.9, 1], the window in which the optimality conditions
    /// are stated and checked.
    pub fn nominal_range(self) -> bool {
        self.0 > 0.9
    }

    pub fn is_integer(self) -> bool {
        self.0 == 1.0
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        FractionalOrder::new(v)
    }
}

impl From<FractionalOrder> for f64 {
    fn from(a: FractionalOrder) -> f64 {
        a.0
    }
}

/// Uniform mesh t_k = k·h on [0, t_final].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    t_final: f64,
    n_steps: usize,
}

impl Grid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::input(format!(
                "t_final must be positive, got {t_final}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::input("grid needs at least one step"));
        }
        Ok(Grid { t_final, n_steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, n_steps + 1.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    /// Node k, computed as k·h rather than accumulated.
    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_final
        } else {
            k as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.t(k)).collect()
    }

    /// Trapezoid weights over the nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; self.len()];
        w[0] = 0.5 * h;
        w[self.n_steps] = 0.5 * h;
        w
    }

    pub fn trapezoid(&self, f: &[f64]) -> f64 {
        self.trapezoid_weights()
            .iter()
            .zip(f)
            .map(|(w, v)| w * v)
            .sum()
    }

    pub fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.len() {
            return Err(Error::input(format!(
                "{what} has {len} samples, grid has {} nodes",
                self.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_bounds() {
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(1.0 + 1e-12).is_err());
        assert!(FractionalOrder::new(f64::NAN).is_err());
        assert!(FractionalOrder::new(1.0).unwrap().nominal_range());
        assert!(FractionalOrder::new(0.95).unwrap().nominal_range());
        assert!(!FractionalOrder::new(0.9).unwrap().nominal_range());
        assert!(!FractionalOrder::new(0.5).unwrap().nominal_range());
    }

    #[test]
    fn nodes_are_uniform_and_pinned() {
        let g = Grid::new(5.0, 500).unwrap();
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.t(500), 5.0);
        assert_eq!(g.t(37), 37.0 * 0.01);
        assert_eq!(g.len(), 501);
        assert!(Grid::new(0.0, 10).is_err());
        assert!(Grid::new(1.0, 0).is_err());
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let g = Grid::new(2.0, 7).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|t| 3.0 * t + 1.0).collect();
        assert!((g.trapezoid(&f) - 8.0).abs() < 1e-14);
    }
}
