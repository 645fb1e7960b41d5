//! Python bindings.

use std::collections::HashMap;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use diracgl::cauchy::PotentialField;
use diracgl::glcore::{closed_form_remove_zero as closed_form, synthesize, EigenIndex, PerturbationPlan, PerturbedOperator};
use diracgl::model::{model_spectrum, BoundaryCondition};
use diracgl::quadrature::Grid;
use diracgl::verify::{spectrum_scan, verify_plan, VerifyOptions};
use diracgl::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidPlan(_)
        | Error::MuCollidesWithSpectrum { .. }
        | Error::InvalidNorming(_)
        | Error::UnsupportedBoundary(_)
        | Error::InvalidGrid(_)
        | Error::InvalidScan { .. }
        | Error::IndexWasRemoved(_)
        | Error::UnknownIndex(_)
        | Error::OutOfRange { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn boundary(name: &str) -> PyResult<BoundaryCondition> {
    match name {
        "alpha0" => Ok(BoundaryCondition::Alpha0),
        "alphaPiOver2" => Ok(BoundaryCondition::AlphaHalfPi),
        _ => Err(PyValueError::new_err(format!("unknown boundary {name:?}; use alpha0 or alphaPiOver2"))),
    }
}

fn index(obj: &Bound<'_, PyAny>) -> PyResult<EigenIndex> {
    if let Ok(k) = obj.extract::<i64>() {
        return Ok(EigenIndex::Model(k));
    }
    Ok(EigenIndex::Added(obj.extract::<f64>()?))
}

/// Model eigenvalues and norming constants as `(k, lambda, norming)`.
#[pyfunction]
#[pyo3(signature = (k_min, k_max, boundary_name = "alpha0"))]
fn spectrum(k_min: i64, k_max: i64, boundary_name: &str) -> PyResult<Vec<(i64, f64, f64)>> {
    if k_min > k_max {
        return Err(PyValueError::new_err("k_min exceeds k_max"));
    }
    let points = model_spectrum(boundary(boundary_name)?, k_min, k_max).map_err(to_py)?;
    Ok((k_min..=k_max).zip(points).map(|(k, p)| (k, p.lambda, p.norming)).collect())
}

/// Potential `(p, q)` after removing the zero eigenvalue, in closed form.
#[pyfunction]
fn closed_form_remove_zero(x: f64) -> (f64, f64) {
    closed_form(x)
}

/// Eigenvalues detected by a miss-distance scan of the model.
#[pyfunction]
#[pyo3(signature = (lo, hi, samples = 256, boundary_name = "alpha0"))]
fn scan_model(lo: f64, hi: f64, samples: usize, boundary_name: &str) -> PyResult<Vec<f64>> {
    let scan = spectrum_scan(&PotentialField::model(), boundary(boundary_name)?, lo, hi, samples).map_err(to_py)?;
    Ok(scan.detected)
}

/// Operator synthesized from a finite change of the model spectral data.
#[pyclass(name = "Operator", frozen)]
struct PyOperator {
    inner: PerturbedOperator,
}

#[pymethods]
impl PyOperator {
    #[new]
    #[pyo3(signature = (boundary_name = "alpha0", remove = Vec::new(), rescale = HashMap::new(), add = Vec::new(), x_max = 12.0, step = 1.0 / 256.0))]
    fn new(
        boundary_name: &str,
        remove: Vec<i64>,
        rescale: HashMap<i64, f64>,
        add: Vec<(f64, f64)>,
        x_max: f64,
        step: f64,
    ) -> PyResult<Self> {
        let mut plan = PerturbationPlan::new(boundary(boundary_name)?);
        for k in remove {
            plan = plan.remove(k);
        }
        for (k, b) in rescale {
            plan = plan.rescale(k, b);
        }
        for (mu, c) in add {
            plan = plan.add(mu, c);
        }
        let grid = Arc::new(Grid::uniform(x_max, step).map_err(to_py)?);
        Ok(Self { inner: synthesize(&plan, &grid).map_err(to_py)? })
    }

    fn grid(&self) -> Vec<f64> {
        self.inner.grid().nodes().to_vec()
    }

    fn potential_at(&self, x: f64) -> PyResult<(f64, f64)> {
        self.inner.potential_at(x).map_err(to_py)
    }

    /// `(p, q)` sampled on the grid.
    fn potential(&self) -> PyResult<(Vec<f64>, Vec<f64>)> {
        self.inner.potential_samples().map_err(to_py)
    }

    /// Eigenfunction `(y1, y2)` on the grid; integers select model indices,
    /// floats select added eigenvalues.
    fn eigenfunction(&self, which: &Bound<'_, PyAny>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let y = self.inner.eigenfunction(index(which)?).map_err(to_py)?;
        Ok((y.component1, y.component2))
    }

    /// `(lambda, norming)` of the perturbed spectrum for model indices in range.
    fn spectrum(&self, k_min: i64, k_max: i64) -> PyResult<Vec<(f64, f64)>> {
        let points = self.inner.spectrum(k_min, k_max).map_err(to_py)?;
        Ok(points.into_iter().map(|p| (p.lambda, p.norming)).collect())
    }

    #[pyo3(signature = (lo, hi, samples = 256))]
    fn scan(&self, lo: f64, hi: f64, samples: usize) -> PyResult<Vec<f64>> {
        let field = self.inner.potential_field().map_err(to_py)?;
        let scan = spectrum_scan(&field, self.inner.plan().boundary, lo, hi, samples).map_err(to_py)?;
        Ok(scan.detected)
    }

    /// Verification report as a JSON string.
    #[pyo3(signature = (max_index = 4))]
    fn verify(&self, max_index: i64) -> PyResult<String> {
        let report = verify_plan(&self.inner, &VerifyOptions { max_index, ..VerifyOptions::default() }).map_err(to_py)?;
        serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

#[pymodule]
#[pyo3(name = "diracgl")]
fn diracgl_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_remove_zero, m)?)?;
    m.add_function(wrap_pyfunction!(scan_model, m)?)?;
    m.add_class::<PyOperator>()?;
    Ok(())
}
