use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracops::{FractionalOrder, Grid};
use crate::model::{
    build_mass_spring, builtin_problem, builtin_problem_with, van_der_pol_plant, BuiltinOptions,
    LinearPlant, Plant, PolyCosine, ReferenceSignal, TimeMatrix, TrackingProblem, Weights,
    BUILTIN_NAMES,
};

/// Grid size used when neither the file nor the command line sets one.
pub const DEFAULT_STEPS: usize = 500;

/// Problem description as stored on disk (TOML). Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: String,
    /// Start from a builtin problem; the remaining fields override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<PlantSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrides: Option<Overrides>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantSpec {
    Linear {
        a: MatrixSpec,
        b: MatrixSpec,
    },
    MassSpring {
        masses: Vec<f64>,
        stiffnesses: Vec<f64>,
    },
    VanDerPol,
}

/// Dense rows, a diagonal, or a time table of dense matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Diagonal {
        diag: Vec<f64>,
    },
    Table {
        times: Vec<f64>,
        values: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    pub q: MatrixSpec,
    pub r: MatrixSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    Zero,
    Polynomial {
        coeffs: Vec<Vec<f64>>,
    },
    PolyCosine {
        components: Vec<PolyCosine>,
    },
    Table {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_spring_reference_constant: Option<f64>,
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::input(format!("{what} is empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::input(format!("{what} is not rectangular")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl MatrixSpec {
    pub fn to_time_matrix(&self, what: &str) -> Result<TimeMatrix> {
        match self {
            MatrixSpec::Rows(rows) => Ok(TimeMatrix::Constant(rows_to_matrix(rows, what)?)),
            MatrixSpec::Diagonal { diag } => {
                if diag.is_empty() {
                    return Err(Error::input(format!("{what} diagonal is empty")));
                }
                Ok(TimeMatrix::Constant(DMatrix::from_diagonal(
                    &DVector::from_column_slice(diag),
                )))
            }
            MatrixSpec::Table { times, values } => {
                let mats = values
                    .iter()
                    .map(|v| rows_to_matrix(v, what))
                    .collect::<Result<Vec<_>>>()?;
                TimeMatrix::table(times.clone(), mats)
            }
        }
    }

    pub fn constant(&self, what: &str) -> Result<DMatrix<f64>> {
        match self.to_time_matrix(what)? {
            TimeMatrix::Constant(m) => Ok(m),
            TimeMatrix::Table { .. } => {
                Err(Error::input(format!("{what} must be a constant matrix")))
            }
        }
    }

    pub fn from_time_matrix(m: &TimeMatrix) -> Self {
        match m {
            TimeMatrix::Constant(m) => MatrixSpec::Rows(matrix_to_rows(m)),
            TimeMatrix::Table { times, values } => MatrixSpec::Table {
                times: times.clone(),
                values: values.iter().map(matrix_to_rows).collect(),
            },
        }
    }
}

impl ReferenceSpec {
    fn to_signal(&self, dim: usize) -> Result<ReferenceSignal> {
        match self {
            ReferenceSpec::Zero => Ok(ReferenceSignal::Zero { dim }),
            ReferenceSpec::Polynomial { coeffs } => Ok(ReferenceSignal::Polynomial(coeffs.clone())),
            ReferenceSpec::PolyCosine { components } => {
                Ok(ReferenceSignal::PolyCosine(components.clone()))
            }
            ReferenceSpec::Table { times, values } => {
                let m = rows_to_matrix(values, "reference table")?;
                ReferenceSignal::sample_table(times.clone(), m)
            }
        }
    }

    fn from_signal(r: &ReferenceSignal) -> Self {
        match r {
            ReferenceSignal::Zero { .. } => ReferenceSpec::Zero,
            ReferenceSignal::Polynomial(c) => ReferenceSpec::Polynomial { coeffs: c.clone() },
            ReferenceSignal::PolyCosine(c) => ReferenceSpec::PolyCosine {
                components: c.clone(),
            },
            ReferenceSignal::SampleTable { times, values } => ReferenceSpec::Table {
                times: times.clone(),
                values: matrix_to_rows(values),
            },
        }
    }
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::input(format!("problem file: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::input(format!("cannot serialize problem: {e}")))
    }

    /// Builds and validates the problem and its grid.
    pub fn build(&self) -> Result<(TrackingProblem, Grid)> {
        let base = match &self.builtin {
            Some(name) => {
                let mut opts = BuiltinOptions::default();
                if let Some(c) = self
                    .overrides
                    .as_ref()
                    .and_then(|o| o.mass_spring_reference_constant)
                {
                    opts.mass_spring_reference_constant = c;
                }
                Some(builtin_problem_with(name, opts)?)
            }
            None => {
                if self
                    .overrides
                    .as_ref()
                    .is_some_and(|o| o.mass_spring_reference_constant.is_some())
                {
                    return Err(Error::input("overrides apply to builtin problems only"));
                }
                None
            }
        };

        let plant = match (&self.plant, &base) {
            (Some(spec), _) => build_plant(spec)?,
            (None, Some(b)) => b.plant().clone(),
            (None, None) => return Err(Error::input("problem file needs a plant (or a builtin)")),
        };
        let q = plant.state_dim();
        let weights = match (&self.weights, &base) {
            (Some(spec), _) => build_weights(spec, q)?,
            (None, Some(b)) => b.weights().clone(),
            (None, None) => return Err(Error::input("problem file needs weights (or a builtin)")),
        };
        let reference = match (&self.reference, &base) {
            (Some(spec), _) => spec.to_signal(q)?,
            (None, Some(b)) => b.reference().clone(),
            (None, None) => ReferenceSignal::Zero { dim: q },
        };
        let x0 = match (&self.x0, &base) {
            (Some(v), _) => DVector::from_column_slice(v),
            (None, Some(b)) => b.x0().clone(),
            (None, None) => return Err(Error::input("problem file needs x0 (or a builtin)")),
        };
        let alpha = match (self.alpha, &base) {
            (Some(a), _) => FractionalOrder::new(a)?,
            (None, Some(b)) => b.alpha(),
            (None, None) => return Err(Error::input("problem file needs alpha (or a builtin)")),
        };
        let t_final = match (self.t_final, &base) {
            (Some(t), _) => t,
            (None, Some(b)) => b.t_final(),
            (None, None) => return Err(Error::input("problem file needs t_final (or a builtin)")),
        };
        let problem = TrackingProblem::new(
            self.name.clone(),
            plant,
            weights,
            reference,
            x0,
            alpha,
            t_final,
        )?;
        let grid = Grid::new(t_final, self.n_steps.unwrap_or(DEFAULT_STEPS))?;
        Ok((problem, grid))
    }

    /// Explicit description of a problem; builtin nonlinear plants are named.
    pub fn describe(problem: &TrackingProblem, grid: &Grid) -> Result<Self> {
        let plant = match problem.plant() {
            Plant::Linear(p) => PlantSpec::Linear {
                a: MatrixSpec::from_time_matrix(&p.a),
                b: MatrixSpec::from_time_matrix(&p.b),
            },
            Plant::Nonlinear(p) if p.name() == "van_der_pol" => PlantSpec::VanDerPol,
            Plant::Nonlinear(p) => {
                return Err(Error::Unsupported(format!(
                    "nonlinear plant '{}' has no file form",
                    p.name()
                )));
            }
        };
        let w = problem.weights();
        Ok(ProblemFile {
            name: problem.name().to_string(),
            builtin: None,
            alpha: Some(problem.alpha().value()),
            t_final: Some(problem.t_final()),
            n_steps: Some(grid.n_steps()),
            x0: Some(problem.x0().iter().copied().collect()),
            plant: Some(plant),
            weights: Some(WeightsSpec {
                q: MatrixSpec::from_time_matrix(&w.q),
                r: MatrixSpec::from_time_matrix(&w.r),
                t: Some(MatrixSpec::Rows(matrix_to_rows(&w.terminal))),
                cost_order: Some(w.cost_order.value()),
            }),
            reference: Some(ReferenceSpec::from_signal(problem.reference())),
            overrides: None,
        })
    }
}

fn build_plant(spec: &PlantSpec) -> Result<Plant> {
    match spec {
        PlantSpec::Linear { a, b } => Ok(Plant::Linear(LinearPlant::new(
            a.to_time_matrix("plant A")?,
            b.to_time_matrix("plant B")?,
        )?)),
        PlantSpec::MassSpring {
            masses,
            stiffnesses,
        } => Ok(Plant::Linear(build_mass_spring(
            masses.len(),
            masses,
            stiffnesses,
        )?)),
        PlantSpec::VanDerPol => Ok(Plant::Nonlinear(van_der_pol_plant()?)),
    }
}

fn build_weights(spec: &WeightsSpec, q: usize) -> Result<Weights> {
    Ok(Weights {
        q: spec.q.to_time_matrix("weight Q")?,
        r: spec.r.to_time_matrix("weight R")?,
        terminal: match &spec.t {
            Some(t) => t.constant("weight T")?,
            None => DMatrix::zeros(q, q),
        },
        cost_order: FractionalOrder::new(spec.cost_order.unwrap_or(1.0))?,
    })
}

/// Resolves `--problem`: an existing path is read as a problem file,
/// anything else must be a builtin name.
pub fn load_problem(spec: &str) -> Result<(TrackingProblem, Grid)> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return ProblemFile::parse(&text)?.build();
    }
    if BUILTIN_NAMES.contains(&spec) {
        let problem = builtin_problem(spec)?;
        let grid = Grid::new(problem.t_final(), DEFAULT_STEPS)?;
        return Ok((problem, grid));
    }
    Err(Error::input(format!(
        "'{spec}' is neither a problem file nor a builtin problem; builtin names: {}",
        BUILTIN_NAMES.join(", ")
    )))
}

pub fn write_problem(problem: &TrackingProblem, grid: &Grid, path: &Path) -> Result<()> {
    std::fs::write(path, ProblemFile::describe(problem, grid)?.to_toml()?)?;
    Ok(())
}
