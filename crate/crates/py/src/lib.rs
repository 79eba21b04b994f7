//! Python bindings: build algebras, check equations, run experiments.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use qea_core::bao::{verify_bao, FiniteBAO};
use qea_core::experiment::{run, ExperimentConfig};
use qea_core::setalg::{generate, BaseSpec, DEFAULT_CLOSURE_CAP};
use qea_core::splitting::split;
use qea_core::terms::{check_equation, parse_equation, parse_term, print_term, Strategy, DEFAULT_EXHAUSTIVE_CAP};
use qea_core::witness::verify_tau_zero;
use qea_core::{Algebra as _, FiniteAlgebra as _};
use std::sync::Arc;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A finite Boolean algebra with operators given by its atom tables.
#[pyclass(name = "Algebra", module = "qea")]
struct PyAlgebra {
    inner: FiniteBAO,
}

#[pymethods]
impl PyAlgebra {
    /// The algebra generated by the product of the blocks.
    #[staticmethod]
    #[pyo3(signature = (blocks, n = 2))]
    fn prototype(blocks: Vec<usize>, n: usize) -> PyResult<Self> {
        let base = BaseSpec::new(blocks).map_err(err)?;
        let sp = Arc::new(base.space().map_err(err)?);
        let r = base.product_r(&sp).map_err(err)?;
        let a = generate(sp, n, &[r], DEFAULT_CLOSURE_CAP).map_err(err)?;
        Ok(PyAlgebra {
            inner: FiniteBAO::from_concrete(&a).map_err(err)?,
        })
    }

    /// The prototype with its product atom split into `m + 1` parts.
    #[staticmethod]
    #[pyo3(signature = (blocks, m, n = 2))]
    fn split(blocks: Vec<usize>, m: usize, n: usize) -> PyResult<Self> {
        let base = BaseSpec::new(blocks).map_err(err)?;
        let sp = Arc::new(base.space().map_err(err)?);
        let r = base.product_r(&sp).map_err(err)?;
        let a = generate(sp, n, std::slice::from_ref(&r), DEFAULT_CLOSURE_CAP).map_err(err)?;
        let s = split(&a, &r, m, n).map_err(err)?;
        Ok(PyAlgebra { inner: s.bao().clone() })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyAlgebra {
            inner: serde_json::from_str(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.subst_bound()
    }

    #[getter]
    fn atom_count(&self) -> usize {
        self.inner.atom_count()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    /// Whether every operator law holds; failures as JSON otherwise.
    fn verify(&self) -> PyResult<(bool, String)> {
        let rec = verify_bao(&self.inner);
        let failures: Vec<_> = rec.failures().collect();
        Ok((rec.passed(), serde_json::to_string(&failures).map_err(err)?))
    }

    /// Check `lhs = rhs`; returns the verdict as JSON.
    #[pyo3(signature = (equation, samples = None, seed = 0))]
    fn check_equation(&self, equation: &str, samples: Option<u64>, seed: u64) -> PyResult<String> {
        let (l, r) = parse_equation(equation, self.inner.dimension(), self.inner.subst_bound()).map_err(err)?;
        let strategy = match samples {
            None => Strategy::Exhaustive,
            Some(count) => Strategy::Sampled { count, seed },
        };
        let v = check_equation(&l, &r, &self.inner, strategy, DEFAULT_EXHAUSTIVE_CAP).map_err(err)?;
        serde_json::to_string(&v).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Algebra(dimension={}, n={}, atoms={})",
            self.inner.dimension(),
            self.inner.subst_bound(),
            self.inner.atom_count()
        )
    }
}

/// Parse a term and print it back in canonical form.
#[pyfunction]
#[pyo3(signature = (text, dimension, n = 2))]
fn normalize_term(text: &str, dimension: usize, n: usize) -> PyResult<String> {
    Ok(print_term(&parse_term(text, dimension, n).map_err(err)?))
}

/// Whether the witness term vanishes on the product atom of the blocks.
#[pyfunction]
#[pyo3(signature = (blocks, m, n = 2))]
fn tau_vanishes(blocks: Vec<usize>, m: usize, n: usize) -> PyResult<bool> {
    let base = BaseSpec::new(blocks).map_err(err)?;
    let sp = Arc::new(base.space().map_err(err)?);
    let r = base.product_r(&sp).map_err(err)?;
    let a = generate(sp, n, std::slice::from_ref(&r), DEFAULT_CLOSURE_CAP).map_err(err)?;
    verify_tau_zero(&a, &r, m).map_err(err)
}

/// Run a preset and return the report as JSON.
#[pyfunction]
#[pyo3(signature = (name, seed = None))]
fn run_preset(py: Python<'_>, name: &str, seed: Option<u64>) -> PyResult<String> {
    let mut cfg = ExperimentConfig::preset(name).map_err(err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    run_config_inner(py, cfg)
}

/// Run a JSON config and return the report as JSON.
#[pyfunction]
fn run_config(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config).map_err(err)?;
    run_config_inner(py, cfg)
}

fn run_config_inner(py: Python<'_>, cfg: ExperimentConfig) -> PyResult<String> {
    let report = py.detach(|| run(&cfg)).map_err(err)?;
    serde_json::to_string(&report).map_err(err)
}

#[pymodule]
fn qea(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAlgebra>()?;
    m.add_function(wrap_pyfunction!(normalize_term, m)?)?;
    m.add_function(wrap_pyfunction!(tau_vanishes, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
