//! Python bindings for the core library. Build with
//! `cargo build -p mtrd-py`, then import the produced cdylib as `mtrd`
//! (python/smoke_test.py stages and exercises it).
//!
//! The surface mirrors the Rust API but flattens everything to plain Python
//! types: classes wrap the owned core structs, search and simulation results
//! come back as dicts.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mtrd_core::prob::attach_test_channels;
use mtrd_core::{
    classical, density_spectrum, divergence_tail_check, run_experiment, search_region,
    spectral_proxies, wyner_ziv_rate, Alphabet, Attachment, Channel, CodecConfig, DensityKind,
    DensitySpectrum, DistortionMeasure, JointPmf, RegionFrontier, SearchParams, Slacks,
    SourceKind, SourceModel, Variable,
};

fn core_err(e: mtrd_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn as_refs(names: &[String]) -> Vec<&str> {
    names.iter().map(String::as_str).collect()
}

fn channel_from_rows(rows: Vec<Vec<f64>>) -> PyResult<Channel> {
    let nin = rows.len();
    let nout = rows.first().map(Vec::len).unwrap_or(0);
    Channel::new(Alphabet::indexed(nin), Alphabet::indexed(nout), rows).map_err(core_err)
}

/// Density kinds use the same compact syntax as the command line:
/// `entropy:V,..`, `cond-entropy:T,../G,..`, `mutual:L,../R,..`, `multi:V,..`.
fn parse_kind(s: &str) -> PyResult<DensityKind> {
    let bad = || {
        PyValueError::new_err(format!(
            "cannot parse density kind `{s}`; expected entropy:V,.. | \
             cond-entropy:T,../G,.. | mutual:L,../R,.. | multi:V,.."
        ))
    };
    let names = |part: &str| -> PyResult<Vec<String>> {
        let v: Vec<String> = part
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
        if v.is_empty() {
            Err(bad())
        } else {
            Ok(v)
        }
    };
    let (tag, rest) = s.split_once(':').ok_or_else(bad)?;
    match tag {
        "entropy" => Ok(DensityKind::Entropy { vars: names(rest)? }),
        "multi" => Ok(DensityKind::MultiInfo { vars: names(rest)? }),
        "cond-entropy" => {
            let (t, g) = rest.split_once('/').ok_or_else(bad)?;
            Ok(DensityKind::CondEntropy {
                target: names(t)?,
                given: names(g)?,
            })
        }
        "mutual" => {
            let (l, r) = rest.split_once('/').ok_or_else(bad)?;
            Ok(DensityKind::MutualInfo {
                left: names(l)?,
                right: names(r)?,
            })
        }
        _ => Err(bad()),
    }
}

/// Joint pmf over named finite variables, stored row-major in declaration
/// order (last variable fastest).
#[pyclass(frozen)]
struct Joint {
    inner: JointPmf,
}

#[pymethods]
impl Joint {
    #[new]
    fn new(names: Vec<String>, sizes: Vec<usize>, probs: Vec<f64>) -> PyResult<Self> {
        if names.len() != sizes.len() {
            return Err(PyValueError::new_err(format!(
                "{} names but {} sizes",
                names.len(),
                sizes.len()
            )));
        }
        let vars = names
            .into_iter()
            .zip(sizes)
            .map(|(n, k)| Variable::new(n, Alphabet::indexed(k)))
            .collect();
        Ok(Joint {
            inner: JointPmf::new(vars, probs).map_err(core_err)?,
        })
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.var_names().iter().map(|s| s.to_string()).collect()
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.inner.vars().iter().map(|v| v.alphabet.len()).collect()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.inner.probs().to_vec()
    }

    fn entropy(&self, vars: Vec<String>) -> PyResult<f64> {
        classical::entropy(&self.inner, &as_refs(&vars)).map_err(core_err)
    }

    fn cond_entropy(&self, target: Vec<String>, given: Vec<String>) -> PyResult<f64> {
        classical::cond_entropy(&self.inner, &as_refs(&target), &as_refs(&given)).map_err(core_err)
    }

    fn mutual_info(&self, left: Vec<String>, right: Vec<String>) -> PyResult<f64> {
        classical::mutual_info(&self.inner, &as_refs(&left), &as_refs(&right)).map_err(core_err)
    }

    fn cond_mutual_info(
        &self,
        left: Vec<String>,
        right: Vec<String>,
        given: Vec<String>,
    ) -> PyResult<f64> {
        classical::cond_mutual_info(&self.inner, &as_refs(&left), &as_refs(&right), &as_refs(&given))
            .map_err(core_err)
    }

    /// Extends the joint with per-variable channel outputs. Each attachment
    /// is (source_var, new_var, rows) where rows is the transition matrix
    /// from the source alphabet.
    fn attach(&self, attachments: Vec<(String, String, Vec<Vec<f64>>)>) -> PyResult<Joint> {
        let channels: Vec<Channel> = attachments
            .iter()
            .map(|(_, _, rows)| channel_from_rows(rows.clone()))
            .collect::<PyResult<_>>()?;
        let specs: Vec<Attachment> = attachments
            .iter()
            .zip(&channels)
            .map(|((src, out, _), ch)| Attachment {
                source_var: src,
                output_var: out.clone(),
                channel: ch,
            })
            .collect();
        Ok(Joint {
            inner: attach_test_channels(&self.inner, &specs).map_err(core_err)?,
        })
    }

    fn marginal(&self, keep: Vec<String>) -> PyResult<Joint> {
        Ok(Joint {
            inner: self.inner.marginalize(&as_refs(&keep)).map_err(core_err)?,
        })
    }

    fn __repr__(&self) -> String {
        let vars: Vec<String> = self
            .inner
            .vars()
            .iter()
            .map(|v| format!("{}({})", v.name, v.alphabet.len()))
            .collect();
        format!("Joint([{}])", vars.join(", "))
    }
}

/// Source model: memoryless, two-component mixture, or explicit per-n law.
#[pyclass(frozen)]
struct Model {
    inner: SourceModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Model {
            inner: SourceModel::from_json_str(text).map_err(core_err)?,
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind() {
            SourceKind::Iid { .. } => "iid",
            SourceKind::Mixed { .. } => "mixed",
            SourceKind::Explicit { .. } => "explicit",
        }
    }

    #[getter]
    fn variable_names(&self) -> Vec<String> {
        self.inner.vars().iter().map(|v| v.name.clone()).collect()
    }

    #[getter]
    fn side_info(&self) -> Option<String> {
        self.inner.side_info().map(str::to_string)
    }

    /// Single-letter law (the mixture blend for mixed models).
    fn single_letter(&self) -> PyResult<Joint> {
        Ok(Joint {
            inner: self.inner.single_letter().map_err(core_err)?,
        })
    }

    /// Distribution of the normalized information density at blocklength n.
    #[pyo3(signature = (kind, n, budget = 2_000_000))]
    fn spectrum(&self, kind: &str, n: u32, budget: u64) -> PyResult<Spectrum> {
        let kind = parse_kind(kind)?;
        Ok(Spectrum {
            inner: density_spectrum(&self.inner, &[], n, &kind, budget).map_err(core_err)?,
        })
    }
}

/// Exact finite-n distribution of a normalized information density: atoms of
/// (value, mass) sorted by value.
#[pyclass(frozen)]
struct Spectrum {
    inner: DensitySpectrum,
}

#[pymethods]
impl Spectrum {
    #[getter]
    fn n(&self) -> u32 {
        self.inner.n
    }

    fn atoms(&self) -> Vec<(f64, f64)> {
        self.inner.atoms().to_vec()
    }

    fn quantile(&self, eps: f64) -> PyResult<f64> {
        self.inner.quantile(eps).map_err(core_err)
    }

    fn mass_below(&self, t: f64) -> f64 {
        self.inner.mass_below(t)
    }

    fn __repr__(&self) -> String {
        format!("Spectrum(n={}, atoms={})", self.inner.n, self.inner.atoms().len())
    }
}

/// Per-letter distortion table d(x_tuple, y) for one terminal.
#[pyclass(frozen)]
struct Measure {
    inner: DistortionMeasure,
}

#[pymethods]
impl Measure {
    #[new]
    fn new(x_sizes: Vec<usize>, y_size: usize, table: Vec<f64>) -> PyResult<Self> {
        Ok(Measure {
            inner: DistortionMeasure::new(x_sizes, y_size, table).map_err(core_err)?,
        })
    }

    /// 0/1 mismatch against one terminal's coordinate.
    #[staticmethod]
    fn hamming(x_sizes: Vec<usize>, terminal: usize) -> PyResult<Self> {
        Ok(Measure {
            inner: DistortionMeasure::hamming(&x_sizes, terminal).map_err(core_err)?,
        })
    }

    /// Least achievable expected distortion under the given source pmf.
    fn floor_under(&self, px: Vec<f64>) -> PyResult<f64> {
        self.inner.floor_under(&px).map_err(core_err)
    }
}

fn search_params(aux_sizes: Option<Vec<usize>>, restarts: usize, seed: u64) -> SearchParams {
    SearchParams {
        aux_sizes,
        restarts,
        seed,
        ..SearchParams::default()
    }
}

fn measure_pairs(py: Python<'_>, targets: &[(Py<Measure>, f64)]) -> Vec<(DistortionMeasure, f64)> {
    let _ = py;
    targets
        .iter()
        .map(|(m, d)| (m.get().inner.clone(), *d))
        .collect()
}

fn frontier_dict<'py>(py: Python<'py>, frontier: &RegionFrontier) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("min_sum_rate", frontier.min_sum_rate())?;
    out.set_item(
        "subset_bounds",
        frontier.subset_bounds.clone().into_iter().collect::<BTreeMap<u32, f64>>(),
    )?;
    let corners: Vec<Bound<'py, PyDict>> = frontier
        .corners
        .iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("rates", c.rates.clone())?;
            d.set_item("distortions", c.distortions.clone())?;
            d.set_item("bounds", c.bounds.clone())?;
            Ok(d)
        })
        .collect::<PyResult<_>>()?;
    out.set_item("corners", corners)?;
    Ok(out)
}

/// Best rate region found for jointly encoding `x_vars` under the distortion
/// targets; returns min_sum_rate, subset_bounds (bitmask over terminals) and
/// the frontier corners.
#[pyfunction]
#[pyo3(signature = (joint, x_vars, targets, side = None, aux_sizes = None, restarts = 200, seed = 0))]
fn region<'py>(
    py: Python<'py>,
    joint: &Joint,
    x_vars: Vec<String>,
    targets: Vec<(Py<Measure>, f64)>,
    side: Option<String>,
    aux_sizes: Option<Vec<usize>>,
    restarts: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let pairs = measure_pairs(py, &targets);
    let params = search_params(aux_sizes, restarts, seed);
    let frontier = search_region(
        &joint.inner,
        &as_refs(&x_vars),
        side.as_deref(),
        &pairs,
        &params,
    )
    .map_err(core_err)?;
    frontier_dict(py, &frontier)
}

/// Worst-component region for a two-component mixture model.
#[pyfunction]
#[pyo3(signature = (model, x_vars, targets, side = None, aux_sizes = None, restarts = 200, seed = 0))]
fn mixed_region<'py>(
    py: Python<'py>,
    model: &Model,
    x_vars: Vec<String>,
    targets: Vec<(Py<Measure>, f64)>,
    side: Option<String>,
    aux_sizes: Option<Vec<usize>>,
    restarts: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let pairs = measure_pairs(py, &targets);
    let params = search_params(aux_sizes, restarts, seed);
    let frontier = mtrd_core::mixed_region(
        &model.inner,
        &as_refs(&x_vars),
        side.as_deref(),
        &pairs,
        &params,
    )
    .map_err(core_err)?;
    frontier_dict(py, &frontier)
}

/// Single-terminal rate with decoder side information.
#[pyfunction]
#[pyo3(signature = (joint, x_var, side_var, measure, target, aux_sizes = None, restarts = 200, seed = 0))]
fn wyner_ziv(
    joint: &Joint,
    x_var: &str,
    side_var: &str,
    measure: &Measure,
    target: f64,
    aux_sizes: Option<Vec<usize>>,
    restarts: usize,
    seed: u64,
) -> PyResult<f64> {
    let params = search_params(aux_sizes, restarts, seed);
    wyner_ziv_rate(&joint.inner, x_var, side_var, &measure.inner, target, &params)
        .map_err(core_err)
}

/// Exact probability that the conditional log-likelihood ratio density
/// (reference rows q_rows, indexed by the product of `given`) drops below
/// -gamma, together with the e^(-n*gamma) ceiling it must respect.
#[pyfunction]
#[pyo3(signature = (joint, target, given, q_rows, n, gamma, budget = 2_000_000))]
fn tail_check<'py>(
    py: Python<'py>,
    joint: &Joint,
    target: Vec<String>,
    given: Vec<String>,
    q_rows: Vec<Vec<f64>>,
    n: u32,
    gamma: f64,
    budget: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let q = channel_from_rows(q_rows)?;
    let tc = divergence_tail_check(
        &joint.inner,
        &as_refs(&target),
        &as_refs(&given),
        &q,
        n,
        gamma,
        budget,
    )
    .map_err(core_err)?;
    let out = PyDict::new(py);
    out.set_item("n", tc.n)?;
    out.set_item("gamma", tc.gamma)?;
    out.set_item("probability", tc.probability)?;
    out.set_item("bound", tc.bound)?;
    out.set_item("holds", tc.holds())?;
    Ok(out)
}

/// Monte-Carlo encode/decode experiment at one blocklength. Channels default
/// to identity on each terminal; slacks is an optional (g1, g2, g3, g4)
/// tuple, with the production relation g2=g3=g4 < g1/6 enforced unless
/// enforce_slack_relation is False.
#[pyfunction]
#[pyo3(signature = (model, rates, targets, n, trials, seed = 0, channel_rows = None,
                    slacks = None, enforce_slack_relation = None, tuple_cap = None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    model: &Model,
    rates: Vec<f64>,
    targets: Vec<(Py<Measure>, f64)>,
    n: u32,
    trials: u64,
    seed: u64,
    channel_rows: Option<Vec<Vec<Vec<f64>>>>,
    slacks: Option<(f64, f64, f64, f64)>,
    enforce_slack_relation: Option<bool>,
    tuple_cap: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let terminals = model.inner.terminal_vars();
    let channels: Vec<Channel> = match channel_rows {
        Some(all_rows) => all_rows
            .into_iter()
            .map(channel_from_rows)
            .collect::<PyResult<_>>()?,
        None => terminals
            .iter()
            .map(|v| {
                let k = v.alphabet.len();
                let rows = (0..k)
                    .map(|x| {
                        let mut row = vec![0.0; k];
                        row[x] = 1.0;
                        row
                    })
                    .collect();
                Channel::new(Alphabet::indexed(k), Alphabet::indexed(k), rows).map_err(core_err)
            })
            .collect::<PyResult<_>>()?,
    };
    let pairs = measure_pairs(py, &targets);
    let mut config = CodecConfig::new(n, rates, trials, seed);
    if let Some((g1, g2, g3, g4)) = slacks {
        config.slacks = Slacks {
            gamma1: g1,
            gamma2: g2,
            gamma3: g3,
            gamma4: g4,
        };
    }
    if let Some(flag) = enforce_slack_relation {
        config.enforce_slack_relation = flag;
    }
    if let Some(cap) = tuple_cap {
        config.tuple_cap = cap;
    }
    let stats = run_experiment(&model.inner, &channels, &pairs, &config).map_err(core_err)?;
    let out = PyDict::new(py);
    out.set_item("n", stats.n)?;
    out.set_item("trials", stats.trials)?;
    out.set_item("errors", stats.errors)?;
    out.set_item("p_error", stats.p_error)?;
    out.set_item("ci_halfwidth", stats.ci_halfwidth)?;
    out.set_item("quantizer_failures", stats.quantizer_failures)?;
    out.set_item("decode_failures", stats.decode_failures)?;
    out.set_item("decode_failures_none", stats.decode_failures_none)?;
    out.set_item("decode_failures_multiple", stats.decode_failures_multiple)?;
    out.set_item("wrong_decodes", stats.wrong_decodes)?;
    out.set_item("distortion_violations", stats.distortion_violations)?;
    out.set_item("completed", stats.completed)?;
    out.set_item("mean_distortion", stats.mean_distortion.clone())?;
    out.set_item("max_distortion", stats.max_distortion.clone())?;
    Ok(out)
}

/// sup/inf quantile trajectory over spectra at several blocklengths; the
/// headline proxies come from the largest n.
#[pyfunction]
#[pyo3(signature = (spectra, epsilon = 0.01))]
fn proxies<'py>(
    py: Python<'py>,
    spectra: Vec<Py<Spectrum>>,
    epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let owned: Vec<DensitySpectrum> = spectra.iter().map(|s| s.get().inner.clone()).collect();
    let est = spectral_proxies(&owned, epsilon).map_err(core_err)?;
    let out = PyDict::new(py);
    out.set_item("sup", est.sup_proxy)?;
    out.set_item("inf", est.inf_proxy)?;
    out.set_item("extrapolated", est.extrapolated)?;
    out.set_item(
        "trajectory",
        est.trajectory
            .iter()
            .map(|p| (p.n, p.sup, p.inf))
            .collect::<Vec<_>>(),
    )?;
    Ok(out)
}

#[pymodule]
fn mtrd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Joint>()?;
    m.add_class::<Model>()?;
    m.add_class::<Spectrum>()?;
    m.add_class::<Measure>()?;
    m.add_function(wrap_pyfunction!(region, m)?)?;
    m.add_function(wrap_pyfunction!(mixed_region, m)?)?;
    m.add_function(wrap_pyfunction!(wyner_ziv, m)?)?;
    m.add_function(wrap_pyfunction!(tail_check, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(proxies, m)?)?;
    Ok(())
}
