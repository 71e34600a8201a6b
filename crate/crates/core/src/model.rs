//! Source models: memoryless, two-component mixtures of memoryless laws, and
//! explicit per-blocklength tables. A model owns its single-letter variable
//! declarations and hands out a lazy blocklength-n evaluator (`SequenceLaw`)
//! that works in log domain and never materializes product tables.

use crate::error::{Error, Result};
use crate::prob::{Alphabet, JointPmf, Variable};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind {
    /// Blocks are i.i.d. copies of `base`.
    Iid { base: JointPmf },
    /// One latent coin with bias `alpha` picks component `a` for the whole
    /// block, else `b`; within a block the chosen component is memoryless.
    /// `alpha` is strictly inside (0,1) and both components share the
    /// declared variables and alphabets.
    Mixed {
        alpha: f64,
        a: JointPmf,
        b: JointPmf,
    },
    /// One joint table per supported blocklength n, over the declared
    /// variables with n-fold tuple alphabets.
    Explicit { tables: BTreeMap<u32, JointPmf> },
}

/// A multi-variable source plus an optional designation of one variable as
/// decoder side information.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    vars: Vec<Variable>,
    kind: SourceKind,
    side_info: Option<String>,
}

impl SourceModel {
    pub fn iid(base: JointPmf, side_info: Option<&str>) -> Result<Self> {
        let vars = base.vars().to_vec();
        let model = SourceModel {
            vars,
            kind: SourceKind::Iid { base },
            side_info: side_info.map(str::to_string),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn mixed(alpha: f64, a: JointPmf, b: JointPmf, side_info: Option<&str>) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig {
                context: format!("mixture weight alpha={alpha} must lie strictly in (0,1)"),
            });
        }
        if a.vars() != b.vars() {
            return Err(Error::AlphabetMismatch {
                context: "mixture components must share variables and alphabets".into(),
            });
        }
        let vars = a.vars().to_vec();
        let model = SourceModel {
            vars,
            kind: SourceKind::Mixed { alpha, a, b },
            side_info: side_info.map(str::to_string),
        };
        model.validate()?;
        Ok(model)
    }

    /// `tables` maps blocklength n to a joint over the same variable names
    /// with n-fold tuple alphabets (as produced by [`tuple_vars`]).
    pub fn explicit(
        vars: Vec<Variable>,
        tables: BTreeMap<u32, JointPmf>,
        side_info: Option<&str>,
    ) -> Result<Self> {
        for (&n, t) in &tables {
            let want = tuple_vars(&vars, n);
            if t.vars() != want.as_slice() {
                return Err(Error::AlphabetMismatch {
                    context: format!("explicit table for n={n} does not match declared variables"),
                });
            }
        }
        let model = SourceModel {
            vars,
            kind: SourceKind::Explicit { tables },
            side_info: side_info.map(str::to_string),
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.vars.is_empty() {
            return Err(Error::InvalidConfig {
                context: "model declares no variables".into(),
            });
        }
        if let Some(s) = &self.side_info {
            if !self.vars.iter().any(|v| &v.name == s) {
                return Err(Error::UnknownVariable { name: s.clone() });
            }
        }
        Ok(())
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    pub fn side_info(&self) -> Option<&str> {
        self.side_info.as_deref()
    }

    /// Terminal variables: everything that is not side information, in
    /// declaration order.
    pub fn terminal_vars(&self) -> Vec<&Variable> {
        self.vars
            .iter()
            .filter(|v| Some(v.name.as_str()) != self.side_info())
            .collect()
    }

    /// Weighted single-letter components: one for memoryless models, two for
    /// mixtures. Empty for explicit models.
    pub fn components(&self) -> Vec<(&JointPmf, f64)> {
        match &self.kind {
            SourceKind::Iid { base } => vec![(base, 1.0)],
            SourceKind::Mixed { alpha, a, b } => vec![(a, *alpha), (b, 1.0 - *alpha)],
            SourceKind::Explicit { .. } => Vec::new(),
        }
    }

    /// The single-letter law if one exists (memoryless base, or the
    /// alpha-blend of mixture components).
    pub fn single_letter(&self) -> Result<JointPmf> {
        match &self.kind {
            SourceKind::Iid { base } => Ok(base.clone()),
            SourceKind::Mixed { alpha, a, b } => {
                let probs = a
                    .probs()
                    .iter()
                    .zip(b.probs())
                    .map(|(&pa, &pb)| alpha * pa + (1.0 - alpha) * pb)
                    .collect();
                JointPmf::new(a.vars().to_vec(), probs)
            }
            SourceKind::Explicit { .. } => Err(Error::InvalidConfig {
                context: "explicit models have no single-letter law".into(),
            }),
        }
    }

    /// Lazy blocklength-n evaluator. For explicit models the table for `n`
    /// must exist.
    pub fn law(&self, n: u32) -> Result<SequenceLaw<'_>> {
        if n == 0 {
            return Err(Error::InvalidConfig {
                context: "blocklength must be at least 1".into(),
            });
        }
        match &self.kind {
            SourceKind::Explicit { tables } => {
                let table = tables.get(&n).ok_or(Error::MissingBlocklength { n })?;
                Ok(SequenceLaw {
                    model: self,
                    n,
                    explicit: Some(table),
                })
            }
            _ => Ok(SequenceLaw {
                model: self,
                n,
                explicit: None,
            }),
        }
    }
}

/// Tuple-alphabet variables for an explicit blocklength-n table: each
/// variable's alphabet becomes its n-fold product, symbols joined with `,`,
/// first letter slowest.
pub fn tuple_vars(vars: &[Variable], n: u32) -> Vec<Variable> {
    vars.iter()
        .map(|v| {
            let parts: Vec<&Alphabet> = (0..n).map(|_| &v.alphabet).collect();
            Variable::new(v.name.clone(), Alphabet::product(&parts))
        })
        .collect()
}

/// Blocklength-n view of a model: log-probability evaluation and sampling,
/// both over per-variable index sequences of length n.
pub struct SequenceLaw<'a> {
    model: &'a SourceModel,
    n: u32,
    explicit: Option<&'a JointPmf>,
}

impl SequenceLaw<'_> {
    pub fn n(&self) -> u32 {
        self.n
    }

    /// ln P(x_1^n, ..., x_V^n). `seqs` holds one index sequence of length n
    /// per declared variable, in declaration order.
    pub fn ln_prob(&self, seqs: &[Vec<usize>]) -> Result<f64> {
        self.check_shape(seqs)?;
        match &self.model.kind {
            SourceKind::Iid { base } => Ok(Self::ln_prob_memoryless(base, seqs, self.n)),
            SourceKind::Mixed { alpha, a, b } => {
                let la = (alpha).ln() + Self::ln_prob_memoryless(a, seqs, self.n);
                let lb = (1.0 - alpha).ln() + Self::ln_prob_memoryless(b, seqs, self.n);
                Ok(log_sum_exp(la, lb))
            }
            SourceKind::Explicit { .. } => {
                let table = self.explicit.expect("explicit law without table");
                let flat = self.explicit_flat_index(table, seqs);
                let p = table.probs()[flat];
                Ok(p.ln())
            }
        }
    }

    fn ln_prob_memoryless(base: &JointPmf, seqs: &[Vec<usize>], n: u32) -> f64 {
        let mut total = 0.0f64;
        let mut idx = vec![0usize; seqs.len()];
        for i in 0..n as usize {
            for (v, s) in seqs.iter().enumerate() {
                idx[v] = s[i];
            }
            total += base.prob_at(&idx).ln();
        }
        total
    }

    fn explicit_flat_index(&self, table: &JointPmf, seqs: &[Vec<usize>]) -> usize {
        // Tuple symbol index of a per-letter sequence: base-|alphabet| digits,
        // first letter slowest; then flatten across variables.
        let mut flat = 0usize;
        for (v, var) in self.model.vars.iter().enumerate() {
            let k = var.alphabet.len();
            let mut ti = 0usize;
            for i in 0..self.n as usize {
                ti = ti * k + seqs[v][i];
            }
            flat = flat * table.vars()[v].alphabet.len() + ti;
        }
        flat
    }

    /// Draws one block: a length-n index sequence per variable.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<usize>> {
        match &self.model.kind {
            SourceKind::Iid { base } => self.sample_memoryless(base, rng),
            SourceKind::Mixed { alpha, a, b } => {
                // One latent draw per block.
                if rng.random::<f64>() < *alpha {
                    self.sample_memoryless(a, rng)
                } else {
                    self.sample_memoryless(b, rng)
                }
            }
            SourceKind::Explicit { .. } => {
                let table = self.explicit.expect("explicit law without table");
                let flat = sample_index(table.probs(), rng);
                let tuple_idx = table.unflatten(flat);
                // Decode each variable's tuple index into n letters.
                let mut seqs = vec![vec![0usize; self.n as usize]; self.model.vars.len()];
                for (v, var) in self.model.vars.iter().enumerate() {
                    let k = var.alphabet.len();
                    let mut rem = tuple_idx[v];
                    for i in (0..self.n as usize).rev() {
                        seqs[v][i] = rem % k;
                        rem /= k;
                    }
                }
                seqs
            }
        }
    }

    fn sample_memoryless<R: Rng + ?Sized>(&self, base: &JointPmf, rng: &mut R) -> Vec<Vec<usize>> {
        let mut seqs = vec![vec![0usize; self.n as usize]; self.model.vars.len()];
        for i in 0..self.n as usize {
            let flat = sample_index(base.probs(), rng);
            for (v, s) in base.unflatten(flat).into_iter().enumerate() {
                seqs[v][i] = s;
            }
        }
        seqs
    }

    fn check_shape(&self, seqs: &[Vec<usize>]) -> Result<()> {
        if seqs.len() != self.model.vars.len() {
            return Err(Error::ShapeMismatch {
                got: seqs.len(),
                want: self.model.vars.len(),
            });
        }
        for (v, s) in seqs.iter().enumerate() {
            if s.len() != self.n as usize {
                return Err(Error::ShapeMismatch {
                    got: s.len(),
                    want: self.n as usize,
                });
            }
            let k = self.model.vars[v].alphabet.len();
            if s.iter().any(|&i| i >= k) {
                return Err(Error::InvalidConfig {
                    context: format!("symbol index out of range for `{}`", self.model.vars[v].name),
                });
            }
        }
        Ok(())
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Inverse-CDF draw over a nonnegative weight table summing to ~1.
fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0f64;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Mass deficit from rounding: land on the last positive cell.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("pmf with no positive mass")
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

/// On-disk form. `alphabets` declares the variables in order; `kind` selects
/// which remaining fields apply:
///   iid      -> `joint` (flat table over the declared variables)
///   mixed    -> `alpha` plus `components` (exactly two flat tables)
///   explicit -> `tables` (map: blocklength as string -> flat table over
///               n-fold tuple alphabets, letters of one variable adjacent,
///               first letter slowest)
/// `side_info` optionally names one declared variable.
#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    alphabets: Vec<AlphabetDoc>,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    joint: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    components: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tables: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    side_info: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AlphabetDoc {
    variable: String,
    symbols: Vec<String>,
}

impl SourceModel {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ModelDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::ModelParse {
            pointer: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        Self::from_doc(doc)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    fn from_doc(doc: ModelDoc) -> Result<Self> {
        let mut vars = Vec::with_capacity(doc.alphabets.len());
        for a in &doc.alphabets {
            if a.symbols.is_empty() {
                return Err(Error::ModelParse {
                    pointer: format!("alphabets.{}", a.variable),
                    message: "empty alphabet".into(),
                });
            }
            vars.push(Variable::new(a.variable.clone(), Alphabet::new(a.symbols.clone())));
        }
        let side = doc.side_info.as_deref();
        let parse = |field: &str, table: Vec<f64>| -> Result<JointPmf> {
            JointPmf::new(vars.clone(), table).map_err(|e| Error::ModelParse {
                pointer: field.to_string(),
                message: e.to_string(),
            })
        };
        match doc.kind.as_str() {
            "iid" => {
                let table = doc.joint.ok_or_else(|| Error::ModelParse {
                    pointer: "joint".into(),
                    message: "iid models require `joint`".into(),
                })?;
                SourceModel::iid(parse("joint", table)?, side)
            }
            "mixed" => {
                let alpha = doc.alpha.ok_or_else(|| Error::ModelParse {
                    pointer: "alpha".into(),
                    message: "mixed models require `alpha`".into(),
                })?;
                let comps = doc.components.ok_or_else(|| Error::ModelParse {
                    pointer: "components".into(),
                    message: "mixed models require `components`".into(),
                })?;
                if comps.len() != 2 {
                    return Err(Error::ModelParse {
                        pointer: "components".into(),
                        message: format!("expected exactly 2 components, got {}", comps.len()),
                    });
                }
                let mut it = comps.into_iter();
                let a = parse("components[0]", it.next().unwrap())?;
                let b = parse("components[1]", it.next().unwrap())?;
                SourceModel::mixed(alpha, a, b, side)
            }
            "explicit" => {
                let raw = doc.tables.ok_or_else(|| Error::ModelParse {
                    pointer: "tables".into(),
                    message: "explicit models require `tables`".into(),
                })?;
                let mut tables = BTreeMap::new();
                for (key, table) in raw {
                    let n: u32 = key.parse().map_err(|_| Error::ModelParse {
                        pointer: format!("tables.{key}"),
                        message: "blocklength keys must be positive integers".into(),
                    })?;
                    if n == 0 {
                        return Err(Error::ModelParse {
                            pointer: format!("tables.{key}"),
                            message: "blocklength 0 is not allowed".into(),
                        });
                    }
                    let tvars = tuple_vars(&vars, n);
                    let pmf = JointPmf::new(tvars, table).map_err(|e| Error::ModelParse {
                        pointer: format!("tables.{key}"),
                        message: e.to_string(),
                    })?;
                    tables.insert(n, pmf);
                }
                SourceModel::explicit(vars, tables, side)
            }
            other => Err(Error::ModelParse {
                pointer: "kind".into(),
                message: format!("unknown kind `{other}` (expected iid|mixed|explicit)"),
            }),
        }
    }

    pub fn to_json_string(&self) -> String {
        let alphabets = self
            .vars
            .iter()
            .map(|v| AlphabetDoc {
                variable: v.name.clone(),
                symbols: v.alphabet.symbols().to_vec(),
            })
            .collect();
        let doc = match &self.kind {
            SourceKind::Iid { base } => ModelDoc {
                alphabets,
                kind: "iid".into(),
                joint: Some(base.probs().to_vec()),
                alpha: None,
                components: None,
                tables: None,
                side_info: self.side_info.clone(),
            },
            SourceKind::Mixed { alpha, a, b } => ModelDoc {
                alphabets,
                kind: "mixed".into(),
                joint: None,
                alpha: Some(*alpha),
                components: Some(vec![a.probs().to_vec(), b.probs().to_vec()]),
                tables: None,
                side_info: self.side_info.clone(),
            },
            SourceKind::Explicit { tables } => ModelDoc {
                alphabets,
                kind: "explicit".into(),
                joint: None,
                alpha: None,
                components: None,
                tables: Some(
                    tables
                        .iter()
                        .map(|(n, t)| (n.to_string(), t.probs().to_vec()))
                        .collect(),
                ),
                side_info: self.side_info.clone(),
            },
        };
        serde_json::to_string_pretty(&doc).expect("model serialization cannot fail")
    }
}
