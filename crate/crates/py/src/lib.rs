//! Python bindings: spaces, spectral operators, square functions, Hardy
//! norms, the reproducing formula and the Calderon split.

use std::collections::HashMap;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use hardygap::calculus::TimeGrid;
use hardygap::molecules;
use hardygap::operator::{
    build_operator, harmonic_potential, Boundary, OperatorKind, Scaling, SpectralOperator,
};
use hardygap::space::{self, Ball};
use hardygap::squarefn::{self, Field, SquareRange};

fn err(e: hardygap::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scaling_from(name: &str) -> PyResult<Scaling> {
    match name {
        "order-m" => Ok(Scaling::OrderM),
        "order-1" => Ok(Scaling::OrderOne),
        other => Err(PyValueError::new_err(format!("unknown scaling '{other}'"))),
    }
}

/// Finite doubling metric measure space on a uniform grid.
#[pyclass(name = "Space", frozen)]
struct PySpace {
    inner: Arc<space::Space>,
}

#[pymethods]
impl PySpace {
    /// Uniform grid centered at the origin with spacing `extent / count`.
    #[staticmethod]
    fn grid(dims: u8, extent: f64, count: usize) -> PyResult<Self> {
        let s = space::build_grid_space(dims, extent, count).map_err(err)?;
        Ok(PySpace { inner: Arc::new(s) })
    }

    #[getter]
    fn points(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    #[getter]
    fn doubling_exponent(&self) -> f64 {
        self.inner.doubling_exponent()
    }

    #[getter]
    fn diameter(&self) -> f64 {
        self.inner.diameter()
    }

    fn mass(&self, index: usize) -> f64 {
        self.inner.mass(index)
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        self.inner.distance(i, j)
    }

    /// Indices of the closed ball `B(center, radius)`.
    fn ball_members(&self, center: usize, radius: f64) -> Vec<usize> {
        space::ball_members(&self.inner, Ball::new(center, radius))
    }

    /// The annulus `C_k(B)` and its fattened version `C_k*(B)`.
    fn annuli(&self, center: usize, radius: f64, k: u32) -> (Vec<usize>, Vec<usize>) {
        space::annuli(&self.inner, Ball::new(center, radius), k)
    }

    /// Interchange JSON document.
    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Space(points={}, total_mass={:.6})", self.inner.len(), self.inner.total_mass())
    }
}

/// Spectrally decomposed non-negative self-adjoint operator.
#[pyclass(name = "Operator", frozen)]
struct PyOperator {
    inner: Arc<SpectralOperator>,
}

impl PyOperator {
    fn field(&self, values: Vec<f64>) -> PyResult<Field> {
        Field::new(values, Arc::clone(self.inner.space())).map_err(err)
    }
}

#[pymethods]
impl PyOperator {
    /// Builds and decomposes an operator over `space`.
    ///
    /// `kind`: `shift | laplacian | schrodinger | fractional`;
    /// `boundary`: `dirichlet | periodic`. The potential for the Schrodinger
    /// and fractional kinds is the harmonic well `omega^2 |x|^2`.
    #[staticmethod]
    #[pyo3(signature = (space, kind="schrodinger", boundary="dirichlet", m=2.0, omega=1.0, shift=0.0, m_pow=2))]
    fn build(
        space: &PySpace,
        kind: &str,
        boundary: &str,
        m: f64,
        omega: f64,
        shift: f64,
        m_pow: u32,
    ) -> PyResult<Self> {
        let s = &space.inner;
        let kind = match kind {
            "shift" => OperatorKind::Shift { c: shift },
            "laplacian" => OperatorKind::Laplacian,
            "schrodinger" => OperatorKind::Schrodinger { potential: harmonic_potential(s, omega) },
            "fractional" => {
                OperatorKind::Fractional { m_pow, potential: harmonic_potential(s, omega) }
            }
            other => return Err(PyValueError::new_err(format!("unknown kind '{other}'"))),
        };
        let boundary = match boundary {
            "dirichlet" => Boundary::Dirichlet,
            "periodic" => Boundary::Periodic,
            other => return Err(PyValueError::new_err(format!("unknown boundary '{other}'"))),
        };
        let matrix = build_operator(s, &kind, boundary).map_err(err)?;
        let op = SpectralOperator::decompose(&matrix, Arc::clone(s), m).map_err(err)?;
        Ok(PyOperator { inner: Arc::new(op) })
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    #[getter]
    fn lambda0(&self) -> f64 {
        self.inner.lambda0()
    }

    #[getter]
    fn gapped(&self) -> bool {
        self.inner.gapped()
    }

    #[getter]
    fn order(&self) -> f64 {
        self.inner.order()
    }

    /// Same eigenvectors with the spectrum shifted by `eps >= 0`.
    fn shifted(&self, eps: f64) -> PyOperator {
        PyOperator { inner: Arc::new(self.inner.shifted(eps)) }
    }

    /// Unit-norm field with standard normal eigen-coefficients.
    fn random_field(&self, seed: u64) -> Vec<f64> {
        squarefn::random_unit_field(&self.inner, seed).values().to_vec()
    }

    /// `(s L)^j e^{-s L} f` with `s = t^m` (`"order-m"`) or `s = t`
    /// (`"order-1"`).
    #[pyo3(signature = (f, t, j=1, scaling="order-m"))]
    fn evolve(&self, f: Vec<f64>, t: f64, j: u32, scaling: &str) -> PyResult<Vec<f64>> {
        let field = self.field(f)?;
        let out = squarefn::evolve(&self.inner, &field, t, j, scaling_from(scaling)?);
        Ok(out.values().to_vec())
    }

    /// Conical square function; `variant` is `global | local | tail`.
    #[pyo3(signature = (f, variant="global", ratio=1.02))]
    fn square_function(&self, f: Vec<f64>, variant: &str, ratio: f64) -> PyResult<Vec<f64>> {
        let range = match variant {
            "global" => SquareRange::Global,
            "local" => SquareRange::Local,
            "tail" => SquareRange::Tail,
            other => return Err(PyValueError::new_err(format!("unknown variant '{other}'"))),
        };
        let grids = squarefn::default_grids(&self.inner, ratio).map_err(err)?;
        let field = self.field(f)?;
        Ok(squarefn::square_function(&self.inner, &field, &grids, range).values().to_vec())
    }

    /// `(||Sf||_1, ||S_loc f||_1 + ||f||_1, quotient)`.
    #[pyo3(signature = (f, ratio=1.02))]
    fn hardy_norms(&self, f: Vec<f64>, ratio: f64) -> PyResult<(f64, f64, f64)> {
        let grids = squarefn::default_grids(&self.inner, ratio).map_err(err)?;
        let field = self.field(f)?;
        let norms = squarefn::hardy_norms(&self.inner, &field, &grids);
        Ok((norms.global, norms.local, norms.ratio))
    }

    /// Residual of the order-one vertical identity.
    #[pyo3(signature = (f, ratio=1.01))]
    fn identity_residual(&self, f: Vec<f64>, ratio: f64) -> PyResult<HashMap<String, f64>> {
        let field = self.field(f)?;
        let rep = squarefn::spectral_identity_residual(&self.inner, &field, ratio).map_err(err)?;
        Ok(HashMap::from([
            ("residual".to_string(), rep.residual),
            ("local_energy".to_string(), rep.local_energy),
            ("spectral_term".to_string(), rep.spectral_term),
            ("norm2_sq".to_string(), rep.norm2_sq),
        ]))
    }

    /// `(pi1, pi2, residual)` of the reproducing-formula split.
    #[pyo3(signature = (f, n_mol=2, ratio=1.005))]
    fn calderon_split(&self, f: Vec<f64>, n_mol: usize, ratio: f64) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
        let consts = molecules::reproducing_constants(n_mol, self.inner.order()).map_err(err)?;
        let field = self.field(f)?;
        let rep = molecules::calderon_split(&self.inner, &field, &consts, ratio).map_err(err)?;
        Ok((rep.pi1.values().to_vec(), rep.pi2.values().to_vec(), rep.residual))
    }

    /// Per-`(j, k)` margins for a noncancellative molecule candidate on
    /// `B(center, radius)`; returns `(pass, scaling_factor)`.
    fn validate_indicator_molecule(&self, center: usize, radius: f64, n_mol: usize) -> PyResult<(bool, f64)> {
        let mol = molecules::Molecule::indicator(self.inner.space(), Ball::new(center, radius), n_mol)
            .map_err(err)?;
        let rep = molecules::validate_molecule(&self.inner, &mol).map_err(err)?;
        Ok((rep.pass, rep.scaling_factor))
    }

    /// `||S_inf a||_1` and the two tail-estimate sup ratios for the
    /// saturating indicator molecule on `B(center, radius)`.
    #[pyo3(signature = (center, radius=1.0, n_mol=2, ratio=1.02))]
    fn tail_check(&self, center: usize, radius: f64, n_mol: usize, ratio: f64) -> PyResult<HashMap<String, f64>> {
        let grids = squarefn::default_grids(&self.inner, ratio).map_err(err)?;
        let mol = molecules::Molecule::indicator(self.inner.space(), Ball::new(center, radius), n_mol)
            .map_err(err)?;
        let rep = molecules::molecule_tail_check(&self.inner, &mol, &grids).map_err(err)?;
        Ok(HashMap::from([
            ("s_inf_l1".to_string(), rep.s_inf_l1),
            ("sup_ratio1".to_string(), rep.sup_ratio1),
            ("sup_ratio2".to_string(), rep.sup_ratio2),
        ]))
    }

    fn __repr__(&self) -> String {
        format!(
            "Operator(points={}, lambda0={:.6}, m={}, gapped={})",
            self.inner.len(),
            self.inner.lambda0(),
            self.inner.order(),
            self.inner.gapped()
        )
    }
}

/// Certified reproducing-formula constants for `(N, m)` as a dict with
/// `c_tail`, `coeffs` and the certificate `residual`.
#[pyfunction]
fn reproducing_constants(py: Python<'_>, n_mol: usize, m: f64) -> PyResult<Bound<'_, pyo3::types::PyDict>> {
    use pyo3::types::PyDictMethods;
    let c = molecules::reproducing_constants(n_mol, m).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("c_tail", c.c_tail)?;
    dict.set_item("coeffs", c.coeffs.clone())?;
    dict.set_item("residual", c.residual)?;
    Ok(dict)
}

/// `(1/4 - (lambda0/2 + 1/4) e^{-2 lambda0})^{1/2}`.
#[pyfunction]
fn lower_bound_constant(lambda0: f64) -> f64 {
    squarefn::lower_bound_constant(lambda0)
}

/// `integral g(t) dt/t` over a geometric grid (log-midpoint rule),
/// evaluating a Python callable at the nodes.
#[pyfunction]
fn log_integrate(g: Bound<'_, pyo3::types::PyAny>, t_min: f64, t_max: f64, ratio: f64) -> PyResult<f64> {
    let grid = TimeGrid::new(t_min, t_max, ratio).map_err(err)?;
    let mut total = 0.0;
    for &t in grid.nodes() {
        let val: f64 = g.call1((t,))?.extract()?;
        total += val;
    }
    Ok(total * grid.weight())
}

#[pymodule]
fn hardygap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpace>()?;
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(reproducing_constants, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_constant, m)?)?;
    m.add_function(wrap_pyfunction!(log_integrate, m)?)?;
    Ok(())
}
