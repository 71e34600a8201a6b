//! Finite alphabets, dense joint pmfs over named variables, and conditional
//! channels. Everything downstream (spectra, regions, the codec) is built on
//! these three types.
//!
//! Conventions: probabilities are plain `f64`, logs are natural (nats), tables
//! are dense row-major with the *first* declared variable slowest. A valid pmf
//! sums to 1 within 1e-12 after construction; construction renormalizes only
//! when the raw sum is within 1e-9 of 1.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Deviation from 1 tolerated on input tables (renormalized away).
pub const SUM_TOL: f64 = 1e-9;
/// Deviation tolerated on anything this crate itself produces.
pub const EXACT_TOL: f64 = 1e-12;

/// An ordered finite symbol set. Symbol order is declaration order and is
/// significant: it fixes table layout everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Self {
        Alphabet {
            symbols: symbols.into_iter().map(Into::into).collect(),
        }
    }

    /// `0..size` rendered as decimal strings.
    pub fn indexed(size: usize) -> Self {
        Alphabet::new((0..size).map(|i| i.to_string()))
    }

    pub fn binary() -> Self {
        Alphabet::indexed(2)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    /// Product alphabet; symbols joined with `,` in argument order.
    pub fn product(parts: &[&Alphabet]) -> Self {
        let mut symbols = vec![String::new()];
        for part in parts {
            let mut next = Vec::with_capacity(symbols.len() * part.len());
            for prefix in &symbols {
                for s in part.symbols() {
                    if prefix.is_empty() {
                        next.push(s.clone());
                    } else {
                        next.push(format!("{prefix},{s}"));
                    }
                }
            }
            symbols = next;
        }
        Alphabet { symbols }
    }
}

/// A named variable with its alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub alphabet: Alphabet,
}

impl Variable {
    pub fn new(name: impl Into<String>, alphabet: Alphabet) -> Self {
        Variable {
            name: name.into(),
            alphabet,
        }
    }
}

/// Dense joint pmf over an ordered list of variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    vars: Vec<Variable>,
    probs: Vec<f64>,
}

impl JointPmf {
    /// Validates shape, nonnegativity (entries below -1e-12 are rejected,
    /// tiny negative noise is clamped to 0) and total mass (renormalized when
    /// within 1e-9 of 1, rejected otherwise).
    pub fn new(vars: Vec<Variable>, mut probs: Vec<f64>) -> Result<Self> {
        let want: usize = vars.iter().map(|v| v.alphabet.len()).product();
        if probs.len() != want {
            return Err(Error::ShapeMismatch {
                got: probs.len(),
                want,
            });
        }
        for (index, p) in probs.iter_mut().enumerate() {
            if *p < -EXACT_TOL {
                return Err(Error::NegativeMass { index, mass: *p });
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::SumNotOne { sum });
        }
        if sum != 1.0 {
            for p in probs.iter_mut() {
                *p /= sum;
            }
        }
        Ok(JointPmf { vars, probs })
    }

    /// Scalar pmf over no variables: a single cell of mass 1.
    pub fn scalar() -> Self {
        JointPmf {
            vars: Vec::new(),
            probs: vec![1.0],
        }
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var_names(&self) -> Vec<&str> {
        self.vars.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn axis(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable {
                name: name.to_string(),
            })
    }

    pub fn alphabet(&self, name: &str) -> Result<&Alphabet> {
        Ok(&self.vars[self.axis(name)?].alphabet)
    }

    /// Strides for flat indexing, last variable fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.vars.len()];
        for i in (0..self.vars.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.vars[i + 1].alphabet.len();
        }
        strides
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.vars.len());
        let strides = self.strides();
        idx.iter().zip(&strides).map(|(i, s)| i * s).sum()
    }

    /// Decodes a flat index into per-variable symbol indices.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.vars.len()];
        for (i, v) in self.vars.iter().enumerate().rev() {
            let k = v.alphabet.len();
            idx[i] = flat % k;
            flat /= k;
        }
        idx
    }

    pub fn prob_at(&self, idx: &[usize]) -> f64 {
        self.probs[self.flat_index(idx)]
    }

    /// Marginal onto `keep` (any order); result variables follow the original
    /// declaration order. `keep` may be empty, giving the scalar pmf.
    pub fn marginalize(&self, keep: &[&str]) -> Result<JointPmf> {
        let mut keep_axes = Vec::with_capacity(keep.len());
        for name in keep {
            let ax = self.axis(name)?;
            if !keep_axes.contains(&ax) {
                keep_axes.push(ax);
            }
        }
        keep_axes.sort_unstable();
        let kept_vars: Vec<Variable> = keep_axes.iter().map(|&a| self.vars[a].clone()).collect();
        let out_len: usize = kept_vars.iter().map(|v| v.alphabet.len()).product();
        let mut out = vec![0.0f64; out_len];

        // Strides of kept axes inside the output table.
        let mut out_strides = vec![0usize; self.vars.len()];
        let mut s = 1usize;
        for &a in keep_axes.iter().rev() {
            out_strides[a] = s;
            s *= self.vars[a].alphabet.len();
        }

        let mut idx = vec![0usize; self.vars.len()];
        for (flat, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                // Still advance the odometer.
            }
            let mut o = 0usize;
            {
                let mut rem = flat;
                for i in (0..self.vars.len()).rev() {
                    let k = self.vars[i].alphabet.len();
                    idx[i] = rem % k;
                    rem /= k;
                }
            }
            for &a in &keep_axes {
                o += idx[a] * out_strides[a];
            }
            out[o] += p;
        }
        Ok(JointPmf {
            vars: kept_vars,
            probs: out,
        })
    }

    /// Conditional law of `target` given `given`, as a channel from the
    /// product alphabet of `given` to the product alphabet of `target`
    /// (declaration order on both sides). Rows conditioned on zero-mass
    /// symbols are undefined, not NaN.
    pub fn condition(&self, target: &[&str], given: &[&str]) -> Result<Channel> {
        let t_axes = self.resolve_axes(target)?;
        let g_axes = self.resolve_axes(given)?;
        for a in &t_axes {
            if g_axes.contains(a) {
                return Err(Error::InvalidConfig {
                    context: format!(
                        "variable `{}` appears on both sides of condition()",
                        self.vars[*a].name
                    ),
                });
            }
        }
        let t_alpha: Vec<&Alphabet> = t_axes.iter().map(|&a| &self.vars[a].alphabet).collect();
        let g_alpha: Vec<&Alphabet> = g_axes.iter().map(|&a| &self.vars[a].alphabet).collect();
        let out_len: usize = t_alpha.iter().map(|a| a.len()).product();
        let in_len: usize = g_alpha.iter().map(|a| a.len()).product();

        let mut joint = vec![0.0f64; in_len * out_len];
        let mut idx = vec![0usize; self.vars.len()];
        for (flat, &p) in self.probs.iter().enumerate() {
            let mut rem = flat;
            for i in (0..self.vars.len()).rev() {
                let k = self.vars[i].alphabet.len();
                idx[i] = rem % k;
                rem /= k;
            }
            let mut gi = 0usize;
            for &a in &g_axes {
                gi = gi * self.vars[a].alphabet.len() + idx[a];
            }
            let mut ti = 0usize;
            for &a in &t_axes {
                ti = ti * self.vars[a].alphabet.len() + idx[a];
            }
            joint[gi * out_len + ti] += p;
        }

        let mut rows: Vec<Option<Vec<f64>>> = Vec::with_capacity(in_len);
        let mut any_defined = false;
        for gi in 0..in_len {
            let row = &joint[gi * out_len..(gi + 1) * out_len];
            let mass: f64 = row.iter().sum();
            if mass <= 0.0 {
                rows.push(None);
            } else {
                any_defined = true;
                rows.push(Some(row.iter().map(|&p| p / mass).collect()));
            }
        }
        if !any_defined {
            return Err(Error::AllMassZero);
        }
        Ok(Channel {
            input: Alphabet::product(&g_alpha),
            output: Alphabet::product(&t_alpha),
            rows,
        })
    }

    fn resolve_axes(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut axes = Vec::with_capacity(names.len());
        for n in names {
            let a = self.axis(n)?;
            if !axes.contains(&a) {
                axes.push(a);
            }
        }
        axes.sort_unstable();
        Ok(axes)
    }

    /// Total mass — 1 within 1e-12 for any constructed pmf; exposed for tests.
    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// A conditional law: one pmf over `output` per input symbol. Rows may be
/// undefined (conditioning on a zero-mass symbol).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    input: Alphabet,
    output: Alphabet,
    rows: Vec<Option<Vec<f64>>>,
}

impl Channel {
    /// All rows defined; each row validated like a pmf.
    pub fn new(input: Alphabet, output: Alphabet, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != input.len() {
            return Err(Error::ShapeMismatch {
                got: rows.len(),
                want: input.len(),
            });
        }
        let mut checked = Vec::with_capacity(rows.len());
        for mut row in rows {
            if row.len() != output.len() {
                return Err(Error::ShapeMismatch {
                    got: row.len(),
                    want: output.len(),
                });
            }
            for (index, p) in row.iter_mut().enumerate() {
                if *p < -EXACT_TOL {
                    return Err(Error::NegativeMass { index, mass: *p });
                }
                if *p < 0.0 {
                    *p = 0.0;
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::SumNotOne { sum });
            }
            if sum != 1.0 {
                for p in row.iter_mut() {
                    *p /= sum;
                }
            }
            checked.push(Some(row));
        }
        Ok(Channel {
            input,
            output,
            rows: checked,
        })
    }

    pub fn input(&self) -> &Alphabet {
        &self.input
    }

    pub fn output(&self) -> &Alphabet {
        &self.output
    }

    /// `None` when the row is undefined.
    pub fn row(&self, i: usize) -> Option<&[f64]> {
        self.rows[i].as_deref()
    }

    pub fn is_fully_defined(&self) -> bool {
        self.rows.iter().all(|r| r.is_some())
    }

    /// P(output j | input i); panics on an undefined row.
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.rows[i].as_ref().expect("undefined channel row")[j]
    }

    /// Deterministic channel z = x embedded into the first `output_size`
    /// symbols; requires `output_size >= input len`.
    pub fn identity(input: &Alphabet, output_size: usize) -> Result<Self> {
        if output_size < input.len() {
            return Err(Error::AlphabetMismatch {
                context: format!(
                    "identity channel needs output size >= {}, got {output_size}",
                    input.len()
                ),
            });
        }
        let rows = (0..input.len())
            .map(|i| {
                let mut r = vec![0.0; output_size];
                r[i] = 1.0;
                r
            })
            .collect();
        Channel::new(input.clone(), Alphabet::indexed(output_size), rows)
    }

    /// Channel ignoring its input: every row is a point mass on symbol 0.
    pub fn constant(input: &Alphabet, output_size: usize) -> Result<Self> {
        let rows = (0..input.len())
            .map(|_| {
                let mut r = vec![0.0; output_size];
                r[0] = 1.0;
                r
            })
            .collect();
        Channel::new(input.clone(), Alphabet::indexed(output_size), rows)
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        Channel::new(
            Alphabet::binary(),
            Alphabet::binary(),
            vec![vec![1.0 - p, p], vec![p, 1.0 - p]],
        )
    }

    /// Output marginal under an input pmf.
    pub fn output_marginal(&self, input_pmf: &[f64]) -> Result<Vec<f64>> {
        if input_pmf.len() != self.input.len() {
            return Err(Error::ShapeMismatch {
                got: input_pmf.len(),
                want: self.input.len(),
            });
        }
        let mut out = vec![0.0f64; self.output.len()];
        for (i, &px) in input_pmf.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            let row = self.rows[i].as_ref().ok_or_else(|| Error::InvalidConfig {
                context: format!("undefined channel row {i} has positive input mass"),
            })?;
            for (j, &p) in row.iter().enumerate() {
                out[j] += px * p;
            }
        }
        Ok(out)
    }
}

/// One per-terminal test channel to attach: the source variable it reads and
/// the name of the new output variable.
#[derive(Debug, Clone)]
pub struct Attachment<'a> {
    pub source_var: &'a str,
    pub output_var: String,
    pub channel: &'a Channel,
}

/// Extends `source` with one new variable per attachment, each drawn from its
/// channel applied to its own source variable only:
/// P(omega, z_1..z_M) = P(omega) * prod_m P(z_m | x_m(omega)).
///
/// New variables appear after the source variables, in attachment order.
pub fn attach_test_channels(source: &JointPmf, attachments: &[Attachment]) -> Result<JointPmf> {
    let mut vars = source.vars().to_vec();
    let mut axes = Vec::with_capacity(attachments.len());
    for at in attachments {
        let ax = source.axis(at.source_var)?;
        if at.channel.input() != &source.vars()[ax].alphabet {
            return Err(Error::AlphabetMismatch {
                context: format!(
                    "channel for `{}` has input alphabet of size {}, variable has {}",
                    at.source_var,
                    at.channel.input().len(),
                    source.vars()[ax].alphabet.len()
                ),
            });
        }
        if vars.iter().any(|v| v.name == at.output_var) {
            return Err(Error::InvalidConfig {
                context: format!("output variable `{}` already exists", at.output_var),
            });
        }
        vars.push(Variable::new(
            at.output_var.clone(),
            at.channel.output().clone(),
        ));
        axes.push(ax);
    }

    let z_sizes: Vec<usize> = attachments
        .iter()
        .map(|a| a.channel.output().len())
        .collect();
    let z_total: usize = z_sizes.iter().product();
    let mut probs = vec![0.0f64; source.probs().len() * z_total];
    let mut idx = vec![0usize; source.vars().len()];
    for (flat, &p) in source.probs().iter().enumerate() {
        let mut rem = flat;
        for i in (0..source.vars().len()).rev() {
            let k = source.vars()[i].alphabet.len();
            idx[i] = rem % k;
            rem /= k;
        }
        if p == 0.0 {
            continue;
        }
        // Check rows are defined on the support before multiplying out.
        for (at, &ax) in attachments.iter().zip(&axes) {
            if at.channel.row(idx[ax]).is_none() {
                return Err(Error::InvalidConfig {
                    context: format!(
                        "channel for `{}` is undefined on symbol index {} which has positive mass",
                        at.source_var, idx[ax]
                    ),
                });
            }
        }
        let mut z_idx = vec![0usize; attachments.len()];
        loop {
            let mut q = p;
            for (m, at) in attachments.iter().enumerate() {
                q *= at.channel.prob(idx[axes[m]], z_idx[m]);
            }
            if q != 0.0 {
                let mut zf = 0usize;
                for (m, &zi) in z_idx.iter().enumerate() {
                    zf = zf * z_sizes[m] + zi;
                }
                probs[flat * z_total + zf] += q;
            }
            // Odometer over z indices.
            let mut carry = true;
            for m in (0..z_idx.len()).rev() {
                if !carry {
                    break;
                }
                z_idx[m] += 1;
                if z_idx[m] == z_sizes[m] {
                    z_idx[m] = 0;
                } else {
                    carry = false;
                }
            }
            if carry {
                break;
            }
        }
    }
    JointPmf::new(vars, probs)
}

/// Joint pmf of a doubly symmetric binary source: uniform marginals, crossover
/// probability `p` between the two terminals. Variable names are the callers'.
pub fn dsbs(p: f64, x1: &str, x2: &str) -> Result<JointPmf> {
    JointPmf::new(
        vec![
            Variable::new(x1, Alphabet::binary()),
            Variable::new(x2, Alphabet::binary()),
        ],
        vec![(1.0 - p) / 2.0, p / 2.0, p / 2.0, (1.0 - p) / 2.0],
    )
}

/// Single Bernoulli(p) variable.
pub fn bernoulli(p: f64, name: &str) -> Result<JointPmf> {
    JointPmf::new(
        vec![Variable::new(name, Alphabet::binary())],
        vec![1.0 - p, p],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_pair_is_valid() {
        let j = JointPmf::new(
            vec![
                Variable::new("X", Alphabet::binary()),
                Variable::new("Y", Alphabet::binary()),
            ],
            vec![0.25; 4],
        )
        .unwrap();
        assert_abs_diff_eq!(j.total_mass(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sum_off_by_a_lot_is_rejected() {
        let err = JointPmf::new(
            vec![Variable::new("X", Alphabet::binary())],
            vec![0.5, 0.4],
        )
        .unwrap_err();
        assert!(matches!(err, Error::SumNotOne { .. }));
    }

    #[test]
    fn tiny_sum_deviation_is_renormalized() {
        let j = JointPmf::new(
            vec![Variable::new("X", Alphabet::binary())],
            vec![0.5 + 3e-10, 0.5],
        )
        .unwrap();
        assert_abs_diff_eq!(j.total_mass(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn negative_mass_is_rejected() {
        let err = JointPmf::new(
            vec![Variable::new("X", Alphabet::binary())],
            vec![1.1, -0.1],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NegativeMass { index: 1, .. }));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let err = JointPmf::new(vec![Variable::new("X", Alphabet::binary())], vec![1.0]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { got: 1, want: 2 }));
    }

    #[test]
    fn dsbs_marginals_are_uniform() {
        let j = dsbs(0.11, "X1", "X2").unwrap();
        for name in ["X1", "X2"] {
            let m = j.marginalize(&[name]).unwrap();
            assert_abs_diff_eq!(m.probs()[0], 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(m.probs()[1], 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn marginalize_everything_is_identity() {
        let j = dsbs(0.3, "A", "B").unwrap();
        let m = j.marginalize(&["A", "B"]).unwrap();
        assert_eq!(m, j);
    }

    #[test]
    fn marginal_of_product_recovers_factor() {
        // P(x) ⊗ Q(y), marginal onto X must be exactly P.
        let p = [0.2, 0.8];
        let q = [0.7, 0.1, 0.2];
        let mut tab = Vec::new();
        for a in p {
            for b in q {
                tab.push(a * b);
            }
        }
        let j = JointPmf::new(
            vec![
                Variable::new("X", Alphabet::binary()),
                Variable::new("Y", Alphabet::indexed(3)),
            ],
            tab,
        )
        .unwrap();
        let m = j.marginalize(&["X"]).unwrap();
        assert_abs_diff_eq!(m.probs()[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(m.probs()[1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn marginalize_unknown_variable_fails() {
        let j = dsbs(0.11, "X1", "X2").unwrap();
        assert!(matches!(
            j.marginalize(&["Q"]),
            Err(Error::UnknownVariable { .. })
        ));
    }

    #[test]
    fn marginalize_keep_order_is_declaration_order() {
        let j = dsbs(0.11, "X1", "X2").unwrap();
        let m = j.marginalize(&["X2", "X1"]).unwrap();
        assert_eq!(m.var_names(), vec!["X1", "X2"]);
    }

    #[test]
    fn empty_marginal_is_scalar() {
        let j = dsbs(0.11, "X1", "X2").unwrap();
        let m = j.marginalize(&[]).unwrap();
        assert!(m.vars().is_empty());
        assert_eq!(m.probs(), &[1.0]);
    }

    #[test]
    fn conditioning_dsbs_gives_bsc() {
        let j = dsbs(0.11, "X1", "X2").unwrap();
        let ch = j.condition(&["X2"], &["X1"]).unwrap();
        assert_abs_diff_eq!(ch.prob(0, 0), 0.89, epsilon = 1e-12);
        assert_abs_diff_eq!(ch.prob(0, 1), 0.11, epsilon = 1e-12);
        assert_abs_diff_eq!(ch.prob(1, 0), 0.11, epsilon = 1e-12);
        assert_abs_diff_eq!(ch.prob(1, 1), 0.89, epsilon = 1e-12);
    }

    #[test]
    fn conditioning_product_gives_constant_rows() {
        let p = [0.2, 0.8];
        let q = [0.6, 0.4];
        let mut tab = Vec::new();
        for a in p {
            for b in q {
                tab.push(a * b);
            }
        }
        let j = JointPmf::new(
            vec![
                Variable::new("X", Alphabet::binary()),
                Variable::new("Y", Alphabet::binary()),
            ],
            tab,
        )
        .unwrap();
        let ch = j.condition(&["Y"], &["X"]).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(ch.prob(i, 0), 0.6, epsilon = 1e-12);
            assert_abs_diff_eq!(ch.prob(i, 1), 0.4, epsilon = 1e-12);
        }
    }

    #[test]
    fn conditioning_on_zero_mass_symbol_is_undefined_not_nan() {
        let j = JointPmf::new(
            vec![
                Variable::new("X", Alphabet::binary()),
                Variable::new("Y", Alphabet::binary()),
            ],
            vec![0.5, 0.5, 0.0, 0.0],
        )
        .unwrap();
        let ch = j.condition(&["Y"], &["X"]).unwrap();
        assert!(ch.row(0).is_some());
        assert!(ch.row(1).is_none());
    }

    #[test]
    fn attach_identity_channel_concentrates_on_diagonal() {
        let j = bernoulli(0.3, "X").unwrap();
        let id = Channel::identity(&Alphabet::binary(), 2).unwrap();
        let out = attach_test_channels(
            &j,
            &[Attachment {
                source_var: "X",
                output_var: "Z".into(),
                channel: &id,
            }],
        )
        .unwrap();
        assert_abs_diff_eq!(out.prob_at(&[0, 0]), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(out.prob_at(&[1, 1]), 0.3, epsilon = 1e-15);
        assert_eq!(out.prob_at(&[0, 1]), 0.0);
        assert_eq!(out.prob_at(&[1, 0]), 0.0);
    }

    #[test]
    fn attach_checks_alphabets() {
        let j = JointPmf::new(
            vec![Variable::new("X", Alphabet::indexed(3))],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let ch = Channel::bsc(0.1).unwrap();
        let err = attach_test_channels(
            &j,
            &[Attachment {
                source_var: "X",
                output_var: "Z".into(),
                channel: &ch,
            }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::AlphabetMismatch { .. }));
    }

    #[test]
    fn attached_outputs_are_conditionally_independent_given_own_source() {
        // Brute-force check of the factorization on every cell.
        let src = dsbs(0.11, "X1", "X2").unwrap();
        let c1 = Channel::bsc(0.2).unwrap();
        let c2 = Channel::bsc(0.2).unwrap();
        let out = attach_test_channels(
            &src,
            &[
                Attachment {
                    source_var: "X1",
                    output_var: "Z1".into(),
                    channel: &c1,
                },
                Attachment {
                    source_var: "X2",
                    output_var: "Z2".into(),
                    channel: &c2,
                },
            ],
        )
        .unwrap();
        for x1 in 0..2 {
            for x2 in 0..2 {
                for z1 in 0..2 {
                    for z2 in 0..2 {
                        let lhs = out.prob_at(&[x1, x2, z1, z2]);
                        let rhs = src.prob_at(&[x1, x2]) * c1.prob(x1, z1) * c2.prob(x2, z2);
                        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn product_alphabet_symbols_are_joined_in_order() {
        let a = Alphabet::binary();
        let b = Alphabet::new(["x", "y", "z"]);
        let p = Alphabet::product(&[&a, &b]);
        assert_eq!(p.len(), 6);
        assert_eq!(p.symbol(0), "0,x");
        assert_eq!(p.symbol(5), "1,z");
    }
}
