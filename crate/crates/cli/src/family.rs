//! Turning a [`FamilySpec`] into a metric pair.

use geq_core::constructions::{beltrami_pair, spheres_product_with, LinearMap, SphereChart};
use geq_core::normal_forms::{model_form_pair, FormKind, FormParams};
use geq_core::split_glue::{oplus, EquivTriple};
use geq_core::verify::{non_equivalent_control, non_integrable_control};
use geq_core::{GeqError, MetricPair};

use crate::config::{FamilySpec, SphereSpec};

/// A built pair together with what is known about its structure.
#[derive(Clone)]
pub struct BuiltFamily {
    pub name: &'static str,
    pub pair: MetricPair,
    pub params: Option<FormParams>,
    /// Factor pairs of a glued family, in order.
    pub factors: Vec<MetricPair>,
}

impl BuiltFamily {
    /// A point where eigenvalues of `L` are known to coincide, if the chart
    /// contains one.
    pub fn bifurcation_point(&self) -> Option<Vec<f64>> {
        let params = self.params.as_ref()?;
        let chart = self.pair.chart();
        let x = match params.kind() {
            FormKind::LcNd => return None,
            FormKind::ThreeDAxial => vec![chart.center()[0], 0.0, 0.0],
            _ => vec![0.0; chart.dim()],
        };
        chart.contains(&x).then_some(x)
    }
}

fn linear_map(s: &SphereSpec) -> Result<LinearMap, GeqError> {
    let m = s.n + 1;
    if s.a.len() == m {
        LinearMap::diagonal(&s.a)
    } else if s.a.len() == m * m {
        LinearMap::new(m, s.a.clone())
    } else {
        Err(GeqError::InvalidInput(format!(
            "linear map for n = {} needs {m} diagonal or {} full entries, got {}",
            s.n,
            m * m,
            s.a.len()
        )))
    }
}

fn sphere_chart(s: &SphereSpec) -> Result<SphereChart, GeqError> {
    match (s.half_width, &s.pole) {
        (None, None) => Ok(SphereChart::standard(s.n)),
        (w, p) => SphereChart::new(s.n, w.unwrap_or(SphereChart::standard(s.n).half_width), p.clone()),
    }
}

pub fn build_family(spec: &FamilySpec) -> Result<BuiltFamily, GeqError> {
    let name = spec.name();
    if let Some(params) = spec.form_params()? {
        let pair = model_form_pair(&params)?;
        return Ok(BuiltFamily { name, pair, params: Some(params), factors: vec![] });
    }
    let plain = |pair| BuiltFamily { name, pair, params: None, factors: vec![] };
    Ok(match spec {
        FamilySpec::Beltrami(s) => plain(beltrami_pair(s.n, &linear_map(s)?, &sphere_chart(s)?)?.pair),
        FamilySpec::Product { factors } => {
            let f = factors
                .iter()
                .map(|s| Ok((sphere_chart(s)?, linear_map(s)?)))
                .collect::<Result<Vec<_>, GeqError>>()?;
            plain(spheres_product_with(&f)?.pair)
        }
        FamilySpec::Glue { factors } => {
            let built = factors.iter().map(build_family).collect::<Result<Vec<_>, _>>()?;
            let triples = built.iter().map(|b| EquivTriple::new(b.pair.clone())).collect::<Result<Vec<_>, _>>()?;
            let glued = oplus(&triples)?;
            BuiltFamily { name, pair: glued.pair, params: None, factors: built.into_iter().map(|b| b.pair).collect() }
        }
        FamilySpec::ControlNonEquivalent => plain(non_equivalent_control()),
        FamilySpec::ControlNonIntegrable => plain(non_integrable_control()),
        _ => unreachable!("normal-form families are handled above"),
    })
}
