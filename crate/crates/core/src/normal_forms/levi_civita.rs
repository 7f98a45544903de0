use serde::{Deserialize, Serialize};

use crate::charts::{Chart, Components, MetricField, MetricPair};
use crate::error::{GeqError, Result};
use crate::poly::ScalarFunction1D;
use crate::scalar::Scalar;

/// Samples per axis for the separation and positivity checks.
pub const SEPARATION_SAMPLES: usize = 64;

/// Eigenvalue functions `lambda_i(x_i)` on a chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeviCivitaData {
    pub lambdas: Vec<ScalarFunction1D>,
    pub chart: Chart,
}

impl LeviCivitaData {
    pub fn new(lambdas: Vec<ScalarFunction1D>, chart: Chart) -> Result<Self> {
        let d = Self { lambdas, chart };
        d.validate()?;
        Ok(d)
    }

    /// Sampled `(inf, sup)` of `lambda_i` over its chart axis.
    pub fn range(&self, i: usize) -> (f64, f64) {
        self.lambdas[i].sampled_range(self.chart.lo[i], self.chart.hi[i], SEPARATION_SAMPLES)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.chart.dim();
        if self.lambdas.len() != n {
            return Err(GeqError::DimensionMismatch { expected: n, got: self.lambdas.len() });
        }
        let (inf0, _) = self.range(0);
        if !(inf0 > 0.0) {
            return Err(GeqError::NotPositive(format!("lambda_1 reaches {inf0} on the chart")));
        }
        for i in 0..n.saturating_sub(1) {
            let (_, sup) = self.range(i);
            let (inf, _) = self.range(i + 1);
            if !(sup < inf) {
                return Err(GeqError::SeparationViolated { i: i + 1, j: i + 2, sup, inf });
            }
        }
        Ok(())
    }

    /// `diag(lambda_i(x_i))`, unsorted.
    pub fn eigenvalues_at(&self, x: &[f64]) -> Vec<f64> {
        self.lambdas.iter().zip(x).map(|(l, &xi)| l.eval(xi)).collect()
    }
}

/// `g = sum Pi_i dx_i^2` or (with `bar`) `gbar = sum rho_i Pi_i dx_i^2`.
#[derive(Clone, Debug)]
pub struct LeviCivitaComponents {
    pub lambdas: Vec<ScalarFunction1D>,
    pub bar: bool,
}

impl Components for LeviCivitaComponents {
    fn dim(&self) -> usize {
        self.lambdas.len()
    }

    fn components<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        let n = self.lambdas.len();
        let lam: Vec<S> = self.lambdas.iter().zip(x).map(|(l, &xi)| l.eval(xi)).collect();
        let mut prod = S::one();
        for &l in &lam {
            prod *= l;
        }
        let mut m = vec![S::zero(); n * n];
        for i in 0..n {
            let mut pi = S::one();
            for j in 0..n {
                if j < i {
                    pi *= lam[i] - lam[j];
                } else if j > i {
                    pi *= lam[j] - lam[i];
                }
            }
            m[i * n + i] = if self.bar { pi / (lam[i] * prod) } else { pi };
        }
        Some(m)
    }
}

/// The diagonal Levi-Civita model pair; `L = diag(lambda_i(x_i))`.
pub fn levi_civita_pair(data: &LeviCivitaData) -> Result<MetricPair> {
    data.validate()?;
    let g = MetricField::from_components(
        data.chart.clone(),
        LeviCivitaComponents { lambdas: data.lambdas.clone(), bar: false },
        "levi-civita:g",
    )?;
    let gb = MetricField::from_components(
        data.chart.clone(),
        LeviCivitaComponents { lambdas: data.lambdas.clone(), bar: true },
        "levi-civita:gbar",
    )?;
    MetricPair::new(g, gb, format!("levi-civita(n={})", data.chart.dim()))
}

/// Constant eigenvalues on the unit cube `[0, 1]^n`.
pub fn constant_levi_civita(values: &[f64]) -> Result<LeviCivitaData> {
    let n = values.len();
    let chart = Chart::cube(n, 0.0, 1.0)?;
    let lambdas = values.iter().map(|&v| ScalarFunction1D::constant(v, (0.0, 1.0))).collect();
    LeviCivitaData::new(lambdas, chart)
}
