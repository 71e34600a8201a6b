//! Exact distributions of normalized information densities at finite
//! blocklength, their quantile proxies for sup/inf spectral rates, and the
//! exponential tail bound on conditional log-likelihood ratios.
//!
//! For memoryless models the blocklength-n density is a sum of i.i.d.
//! single-letter terms, so its law is an n-fold convolution of a small atomic
//! distribution; we compute it exactly by binary doubling with atom merging at
//! 1e-12 nats. Mixtures are handled by tracking, per atom, the running
//! log-probability under *each* component and finishing with a log-sum-exp,
//! which evaluates every density under the true mixture law.

use crate::error::{Error, Result};
use crate::model::{SourceKind, SourceModel};
use crate::prob::{attach_test_channels, Attachment, Channel, JointPmf};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Merge resolution for spectrum atoms, in nats (on the unnormalized sum
/// scale during convolution).
pub const ATOM_RESOLUTION: f64 = 1e-12;

/// Atoms below this mass are dropped: near the subnormal range the
/// mass-weighted value accumulators lose their precision and produce
/// spurious grid cells, and 1e-300 is still 290 orders of magnitude below
/// the 1e-10 total-mass tolerance.
const MASS_FLOOR: f64 = 1e-300;

/// Which normalized density to look at. Groups are variable-name sets; the
/// two-group `MutualInfo` form also covers the subset-versus-(side
/// information plus remaining outputs) densities used by the region bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityKind {
    /// -(1/n) ln P(vars)
    Entropy { vars: Vec<String> },
    /// -(1/n) ln P(target | given)
    CondEntropy {
        target: Vec<String>,
        given: Vec<String>,
    },
    /// (1/n) ln [ P(left, right) / (P(left) P(right)) ]
    MutualInfo {
        left: Vec<String>,
        right: Vec<String>,
    },
    /// (1/n) ln [ P(vars) / prod_v P(v) ]; identically zero for one variable.
    MultiInfo { vars: Vec<String> },
    /// (1/n) ln [ P(target|given) / Q(target|given) ], sampled under P.
    CondDivergence {
        target: Vec<String>,
        given: Vec<String>,
    },
}

impl DensityKind {
    /// Signed log-probability terms over variable groups. `CondDivergence`
    /// has no term form (it needs a second law) and is rejected here.
    fn terms(&self) -> Result<Vec<(Vec<String>, f64)>> {
        let nonempty = |g: &Vec<String>, side: &str| -> Result<()> {
            if g.is_empty() {
                Err(Error::InvalidConfig {
                    context: format!("{side} variable group is empty"),
                })
            } else {
                Ok(())
            }
        };
        match self {
            DensityKind::Entropy { vars } => {
                nonempty(vars, "entropy")?;
                Ok(vec![(vars.clone(), -1.0)])
            }
            DensityKind::CondEntropy { target, given } => {
                nonempty(target, "target")?;
                nonempty(given, "given")?;
                let mut both = target.clone();
                for g in given {
                    if !both.contains(g) {
                        both.push(g.clone());
                    }
                }
                Ok(vec![(both, -1.0), (given.clone(), 1.0)])
            }
            DensityKind::MutualInfo { left, right } => {
                nonempty(left, "left")?;
                nonempty(right, "right")?;
                let mut both = left.clone();
                for r in right {
                    if both.contains(r) {
                        return Err(Error::InvalidConfig {
                            context: format!("variable `{r}` appears in both groups"),
                        });
                    }
                    both.push(r.clone());
                }
                Ok(vec![(both, 1.0), (left.clone(), -1.0), (right.clone(), -1.0)])
            }
            DensityKind::MultiInfo { vars } => {
                if vars.is_empty() {
                    return Err(Error::EmptySubset);
                }
                let mut t = vec![(vars.clone(), 1.0)];
                for v in vars {
                    t.push((vec![v.clone()], -1.0));
                }
                Ok(t)
            }
            DensityKind::CondDivergence { .. } => Err(Error::InvalidConfig {
                context: "divergence densities require a reference law; use divergence_tail_check"
                    .into(),
            }),
        }
    }
}

/// Exact law of a normalized density at one blocklength: atoms sorted by
/// value, masses summing to 1 within 1e-10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySpectrum {
    pub kind: DensityKind,
    pub n: u32,
    atoms: Vec<(f64, f64)>,
}

impl DensitySpectrum {
    pub fn new(kind: DensityKind, n: u32, mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        atoms.retain(|&(_, m)| m > MASS_FLOOR);
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Merge neighbors closer than the resolution.
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, m) in atoms {
            match merged.last_mut() {
                Some(last) if (v - last.0).abs() <= ATOM_RESOLUTION => {
                    let t = last.1 + m;
                    last.0 = (last.0 * last.1 + v * m) / t;
                    last.1 = t;
                }
                _ => merged.push((v, m)),
            }
        }
        let total: f64 = merged.iter().map(|&(_, m)| m).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::SumNotOne { sum: total });
        }
        Ok(DensitySpectrum {
            kind,
            n,
            atoms: merged,
        })
    }

    /// (value, mass) pairs in ascending value order.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(v, m)| v * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.atoms.iter().map(|&(v, m)| m * (v - mu) * (v - mu)).sum()
    }

    /// Left-continuous inverse CDF: the smallest atom value whose cumulative
    /// mass reaches `p` (tiny slack absorbs the 1e-10 mass tolerance).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig {
                context: format!("quantile level {p} outside [0,1]"),
            });
        }
        let mut cum = 0.0;
        for &(v, m) in &self.atoms {
            cum += m;
            if cum + 1e-12 >= p {
                return Ok(v);
            }
        }
        Ok(self.atoms.last().map(|&(v, _)| v).unwrap_or(f64::NAN))
    }

    /// P[value < x], strict.
    pub fn mass_below(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|&&(v, _)| v < x)
            .map(|&(_, m)| m)
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Sparse vector-atom convolution
// ---------------------------------------------------------------------------

/// Atoms carrying a small vector of running log-probability sums.
struct VecAtoms {
    dim: usize,
    atoms: Vec<(Vec<f64>, f64)>,
}

impl VecAtoms {
    fn convolve(&self, other: &VecAtoms, budget: u64) -> Result<VecAtoms> {
        let pairs = self.atoms.len() as u64 * other.atoms.len() as u64;
        let pair_cap = (budget.saturating_mul(64)).max(16_000_000);
        if pairs > pair_cap {
            return Err(Error::BudgetExceeded {
                context: "spectrum convolution pair count".into(),
                needed: pairs,
                budget: pair_cap,
            });
        }
        // Deterministic merge: quantize each coordinate to the resolution
        // grid and accumulate mass plus mass-weighted values per grid cell.
        let mut cells: BTreeMap<Vec<i64>, (f64, Vec<f64>)> = BTreeMap::new();
        let mut key = vec![0i64; self.dim];
        let mut sum = vec![0f64; self.dim];
        for (va, ma) in &self.atoms {
            for (vb, mb) in &other.atoms {
                for k in 0..self.dim {
                    let s = va[k] + vb[k];
                    sum[k] = s;
                    key[k] = (s / ATOM_RESOLUTION).round() as i64;
                }
                let m = ma * mb;
                if m <= MASS_FLOOR {
                    continue;
                }
                match cells.get_mut(&key) {
                    Some(acc) => {
                        acc.0 += m;
                        for k in 0..self.dim {
                            acc.1[k] += m * sum[k];
                        }
                    }
                    None => {
                        let weighted: Vec<f64> = sum.iter().map(|&s| s * m).collect();
                        cells.insert(key.clone(), (m, weighted));
                    }
                }
            }
        }
        if cells.len() as u64 > budget {
            return Err(Error::BudgetExceeded {
                context: "spectrum atom count".into(),
                needed: cells.len() as u64,
                budget,
            });
        }
        let atoms = cells
            .into_values()
            .map(|(m, ws)| {
                let vals: Vec<f64> = ws
                    .iter()
                    .map(|&w| {
                        if w == f64::NEG_INFINITY {
                            f64::NEG_INFINITY
                        } else {
                            w / m
                        }
                    })
                    .collect();
                (vals, m)
            })
            .collect();
        Ok(VecAtoms {
            dim: self.dim,
            atoms,
        })
    }

    /// n-fold self-convolution by binary doubling.
    fn power(&self, n: u32, budget: u64) -> Result<VecAtoms> {
        let mut result: Option<VecAtoms> = None;
        let mut square = VecAtoms {
            dim: self.dim,
            atoms: self.atoms.clone(),
        };
        let mut rem = n;
        loop {
            if rem & 1 == 1 {
                result = Some(match result {
                    None => VecAtoms {
                        dim: square.dim,
                        atoms: square.atoms.clone(),
                    },
                    Some(r) => r.convolve(&square, budget)?,
                });
            }
            rem >>= 1;
            if rem == 0 {
                break;
            }
            square = square.convolve(&square, budget)?;
        }
        Ok(result.expect("power of at least 1"))
    }
}

// ---------------------------------------------------------------------------
// Spectrum construction
// ---------------------------------------------------------------------------

/// Exact blocklength-n law of a normalized density under `model`, optionally
/// after attaching per-terminal test channels (memoryless and mixed models
/// only; explicit models take no attachments and evaluate their stored
/// block law directly). `budget` caps the working atom count.
pub fn density_spectrum(
    model: &SourceModel,
    attachments: &[Attachment],
    n: u32,
    kind: &DensityKind,
    budget: u64,
) -> Result<DensitySpectrum> {
    if n == 0 {
        return Err(Error::InvalidConfig {
            context: "blocklength must be at least 1".into(),
        });
    }
    let terms = kind.terms()?;

    if let SourceKind::Explicit { tables } = model.kind() {
        if !attachments.is_empty() {
            return Err(Error::InvalidConfig {
                context: "explicit models do not support test-channel attachments".into(),
            });
        }
        let table = tables.get(&n).ok_or(Error::MissingBlocklength { n })?;
        return explicit_spectrum(table, n, kind, &terms);
    }

    // One weighted memoryless component (iid) or two (mixed).
    let components: Vec<(JointPmf, f64)> = {
        let mut out = Vec::new();
        for (base, w) in model.components() {
            let joint = if attachments.is_empty() {
                base.clone()
            } else {
                attach_test_channels(base, attachments)?
            };
            out.push((joint, w));
        }
        out
    };
    let c = components.len();

    // Per term and per component, the marginal probability of each full cell's
    // projection. Laid out term-major: slot t*c + ci.
    let mut cell_logs: Vec<Vec<f64>> = Vec::new(); // [cell][slot]
    let n_cells = components[0].0.probs().len();
    for _ in 0..n_cells {
        cell_logs.push(vec![0.0; terms.len() * c]);
    }
    for (t, (group, _)) in terms.iter().enumerate() {
        let names: Vec<&str> = group.iter().map(String::as_str).collect();
        for (ci, (joint, _)) in components.iter().enumerate() {
            let marg = joint.marginalize(&names)?;
            let proj = projection_map(joint, &marg)?;
            for cell in 0..n_cells {
                cell_logs[cell][t * c + ci] = marg.probs()[proj[cell]].ln();
            }
        }
    }

    let mut all_atoms: Vec<(f64, f64)> = Vec::new();
    for (ci, (joint, w)) in components.iter().enumerate() {
        // Sampling law of this component; value vector = all slots.
        let single = VecAtoms {
            dim: terms.len() * c,
            atoms: joint
                .probs()
                .iter()
                .enumerate()
                .filter(|&(_, &p)| p > 0.0)
                .map(|(cell, &p)| (cell_logs[cell].clone(), p))
                .collect(),
        };
        debug_assert!(!single.atoms.is_empty());
        let convolved = single.power(n, budget)?;
        let weights: Vec<f64> = components.iter().map(|&(_, w)| w.ln()).collect();
        for (sums, mass) in convolved.atoms {
            let mut value = 0.0;
            for (t, (_, sign)) in terms.iter().enumerate() {
                // ln sum_c w_c exp(S_{t,c}): the mixture log-probability of
                // this term's group at the block level.
                let slot = &sums[t * c..(t + 1) * c];
                let mut hi = f64::NEG_INFINITY;
                for (ci2, &s) in slot.iter().enumerate() {
                    let x = weights[ci2] + s;
                    if x > hi {
                        hi = x;
                    }
                }
                let lse = if hi == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    let mut acc = 0.0;
                    for (ci2, &s) in slot.iter().enumerate() {
                        acc += (weights[ci2] + s - hi).exp();
                    }
                    hi + acc.ln()
                };
                value += sign * lse;
            }
            all_atoms.push((value / n as f64, w * mass));
        }
        let _ = ci;
    }
    DensitySpectrum::new(kind.clone(), n, all_atoms)
}

/// Spectrum of an explicit block law: one atom per positive-mass block cell.
fn explicit_spectrum(
    table: &JointPmf,
    n: u32,
    kind: &DensityKind,
    terms: &[(Vec<String>, f64)],
) -> Result<DensitySpectrum> {
    let mut term_logs: Vec<Vec<f64>> = Vec::new();
    for (group, _) in terms {
        let names: Vec<&str> = group.iter().map(String::as_str).collect();
        let marg = table.marginalize(&names)?;
        let proj = projection_map(table, &marg)?;
        term_logs.push(
            (0..table.probs().len())
                .map(|cell| marg.probs()[proj[cell]].ln())
                .collect(),
        );
    }
    let mut atoms = Vec::new();
    for (cell, &p) in table.probs().iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let mut value = 0.0;
        for (t, (_, sign)) in terms.iter().enumerate() {
            value += sign * term_logs[t][cell];
        }
        atoms.push((value / n as f64, p));
    }
    DensitySpectrum::new(kind.clone(), n, atoms)
}

/// For each flat cell of `joint`, the flat cell of `marg` it projects to.
fn projection_map(joint: &JointPmf, marg: &JointPmf) -> Result<Vec<usize>> {
    let axes: Vec<usize> = marg
        .vars()
        .iter()
        .map(|v| joint.axis(&v.name))
        .collect::<Result<_>>()?;
    let marg_strides = marg.strides();
    let mut map = vec![0usize; joint.probs().len()];
    for (flat, slot) in map.iter_mut().enumerate() {
        let idx = joint.unflatten(flat);
        let mut o = 0usize;
        for (k, &a) in axes.iter().enumerate() {
            o += idx[a] * marg_strides[k];
        }
        *slot = o;
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// Quantile proxies
// ---------------------------------------------------------------------------

/// Finite-n stand-ins for the sup/inf spectral rates: the (1-eps) and eps
/// quantiles of the density law, tracked over a grid of blocklengths. The
/// headline values are taken at the largest n; no extrapolation beyond the
/// grid is ever performed (`extrapolated` stays false and is reserved).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub kind: DensityKind,
    pub epsilon: f64,
    pub n_grid: Vec<u32>,
    pub trajectory: Vec<ProxyPoint>,
    pub sup_proxy: f64,
    pub inf_proxy: f64,
    pub extrapolated: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProxyPoint {
    pub n: u32,
    pub sup: f64,
    pub inf: f64,
}

/// Quantile trajectory over the given spectra (sorted by n internally).
/// All spectra must share one kind; `epsilon` must lie in (0, 0.5).
pub fn spectral_proxies(spectra: &[DensitySpectrum], epsilon: f64) -> Result<SpectralEstimate> {
    if spectra.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidConfig {
            context: format!("epsilon {epsilon} outside (0, 0.5)"),
        });
    }
    let kind = &spectra[0].kind;
    let mut order: Vec<&DensitySpectrum> = spectra.iter().collect();
    for s in &order {
        if &s.kind != kind {
            return Err(Error::InvalidConfig {
                context: "spectra passed to spectral_proxies mix density kinds".into(),
            });
        }
    }
    order.sort_by_key(|s| s.n);
    let mut trajectory = Vec::with_capacity(order.len());
    for s in &order {
        trajectory.push(ProxyPoint {
            n: s.n,
            sup: s.quantile(1.0 - epsilon)?,
            inf: s.quantile(epsilon)?,
        });
    }
    let last = trajectory.last().unwrap();
    Ok(SpectralEstimate {
        kind: kind.clone(),
        epsilon,
        n_grid: order.iter().map(|s| s.n).collect(),
        sup_proxy: last.sup,
        inf_proxy: last.inf,
        trajectory,
        extrapolated: false,
    })
}

// ---------------------------------------------------------------------------
// Divergence tail bound
// ---------------------------------------------------------------------------

/// Result of the exponential tail check: the exact probability that the
/// normalized conditional log-likelihood ratio falls below -gamma, and the
/// bound e^{-n gamma} it must stay strictly under.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailCheck {
    pub n: u32,
    pub gamma: f64,
    pub probability: f64,
    pub bound: f64,
}

impl TailCheck {
    pub fn holds(&self) -> bool {
        self.probability < self.bound
    }
}

/// Exact blocklength-n probability, under the i.i.d. extension of `p`, that
/// (1/n) ln [P(target|given) / Q(target|given)] < -gamma, together with the
/// e^{-n gamma} bound. `q`'s input must be the product alphabet of `given`
/// and its output the product alphabet of `target` (both in declaration
/// order). Q must be positive wherever `p` puts mass, else the density is
/// undefined.
pub fn divergence_tail_check(
    p: &JointPmf,
    target: &[&str],
    given: &[&str],
    q: &Channel,
    n: u32,
    gamma: f64,
    budget: u64,
) -> Result<TailCheck> {
    if gamma <= 0.0 {
        return Err(Error::InvalidConfig {
            context: format!("gamma {gamma} must be positive"),
        });
    }
    if n == 0 {
        return Err(Error::InvalidConfig {
            context: "blocklength must be at least 1".into(),
        });
    }
    let p_cond = p.condition(target, given)?;
    if q.input().len() != p_cond.input().len() || q.output().len() != p_cond.output().len() {
        return Err(Error::ShapeMismatch {
            got: q.input().len() * q.output().len(),
            want: p_cond.input().len() * p_cond.output().len(),
        });
    }
    // Atom per (given, target) cell with positive joint mass.
    let g_names: Vec<&str> = given.to_vec();
    let t_names: Vec<&str> = target.to_vec();
    let mut both = g_names.clone();
    both.extend(&t_names);
    let joint_gt = p.marginalize(&both)?;
    // joint_gt variables follow declaration order, which may interleave
    // given/target; recover flat (g, t) indices per cell.
    let g_axes: Vec<usize> = g_names
        .iter()
        .map(|nm| joint_gt.axis(nm))
        .collect::<Result<_>>()?;
    let t_axes: Vec<usize> = t_names
        .iter()
        .map(|nm| joint_gt.axis(nm))
        .collect::<Result<_>>()?;
    let mut atoms = Vec::new();
    for (flat, &mass) in joint_gt.probs().iter().enumerate() {
        if mass <= 0.0 {
            continue;
        }
        let idx = joint_gt.unflatten(flat);
        let mut gi = 0usize;
        for &a in &g_axes {
            gi = gi * joint_gt.vars()[a].alphabet.len() + idx[a];
        }
        let mut ti = 0usize;
        for &a in &t_axes {
            ti = ti * joint_gt.vars()[a].alphabet.len() + idx[a];
        }
        let p_tg = p_cond
            .row(gi)
            .expect("positive-mass conditioning row must be defined")[ti];
        let q_tg = match q.row(gi) {
            Some(row) => row[ti],
            None => {
                return Err(Error::UndefinedDensity {
                    context: format!("reference law undefined on conditioning symbol {gi}"),
                })
            }
        };
        if q_tg <= 0.0 {
            return Err(Error::UndefinedDensity {
                context: format!(
                    "reference law has zero mass on a positive-probability cell ({gi},{ti})"
                ),
            });
        }
        atoms.push((vec![p_tg.ln() - q_tg.ln()], mass));
    }
    let single = VecAtoms { dim: 1, atoms };
    let convolved = single.power(n, budget)?;
    let threshold = -(n as f64) * gamma;
    let mut probability = 0.0;
    for (v, m) in &convolved.atoms {
        if v[0] < threshold {
            probability += m;
        }
    }
    Ok(TailCheck {
        n,
        gamma,
        probability,
        bound: (-(n as f64) * gamma).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical;
    use crate::prob::{bernoulli, dsbs, Alphabet, Variable};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;

    const BUDGET: u64 = 2_000_000;

    fn h_binary(p: f64) -> f64 {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    }

    fn entropy_kind(v: &str) -> DensityKind {
        DensityKind::Entropy {
            vars: vec![v.to_string()],
        }
    }

    #[test]
    fn fair_coin_spectrum_is_one_atom() {
        let m = SourceModel::iid(bernoulli(0.5, "X").unwrap(), None).unwrap();
        for n in [1u32, 7, 64] {
            let s = density_spectrum(&m, &[], n, &entropy_kind("X"), BUDGET).unwrap();
            assert_eq!(s.atoms().len(), 1);
            assert_abs_diff_eq!(s.atoms()[0].0, 2f64.ln(), epsilon = 1e-12);
            assert_abs_diff_eq!(s.atoms()[0].1, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bernoulli_011_spectrum_at_n2() {
        // Three atoms: all-likely, one-of-each, all-unlikely; masses are the
        // binomial weights 0.89^2, 2*0.89*0.11, 0.11^2.
        let m = SourceModel::iid(bernoulli(0.11, "X").unwrap(), None).unwrap();
        let s = density_spectrum(&m, &[], 2, &entropy_kind("X"), BUDGET).unwrap();
        let atoms = s.atoms();
        assert_eq!(atoms.len(), 3);
        let v0 = -(0.89f64.ln());
        let v2 = -(0.11f64.ln());
        let v1 = 0.5 * (v0 + v2);
        assert_abs_diff_eq!(atoms[0].0, v0, epsilon = 1e-12);
        assert_abs_diff_eq!(atoms[1].0, v1, epsilon = 1e-12);
        assert_abs_diff_eq!(atoms[2].0, v2, epsilon = 1e-12);
        assert_abs_diff_eq!(atoms[0].1, 0.7921, epsilon = 1e-12);
        assert_abs_diff_eq!(atoms[1].1, 0.1958, epsilon = 1e-12);
        assert_abs_diff_eq!(atoms[2].1, 0.0121, epsilon = 1e-12);
    }

    #[test]
    fn spectrum_mean_is_classical_value_and_variance_scales() {
        let base = bernoulli(0.11, "X").unwrap();
        let m = SourceModel::iid(base.clone(), None).unwrap();
        let s1 = density_spectrum(&m, &[], 1, &entropy_kind("X"), BUDGET).unwrap();
        let h = classical::entropy(&base, &["X"]).unwrap();
        let var1 = s1.variance();
        for n in [2u32, 5, 17, 64] {
            let s = density_spectrum(&m, &[], n, &entropy_kind("X"), BUDGET).unwrap();
            assert_abs_diff_eq!(s.mean(), h, epsilon = 1e-9);
            assert_abs_diff_eq!(s.variance(), var1 / n as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn multi_info_of_single_variable_is_identically_zero() {
        let m = SourceModel::iid(dsbs(0.11, "A", "B").unwrap(), None).unwrap();
        let s = density_spectrum(
            &m,
            &[],
            5,
            &DensityKind::MultiInfo {
                vars: vec!["A".into()],
            },
            BUDGET,
        )
        .unwrap();
        assert_eq!(s.atoms().len(), 1);
        assert_abs_diff_eq!(s.atoms()[0].0, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mutual_info_spectrum_of_independent_pair_is_zero_atom() {
        let mut tab = Vec::new();
        for a in [0.2, 0.8] {
            for b in [0.6, 0.4] {
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
        let m = SourceModel::iid(j, None).unwrap();
        let s = density_spectrum(
            &m,
            &[],
            8,
            &DensityKind::MutualInfo {
                left: vec!["X".into()],
                right: vec!["Y".into()],
            },
            BUDGET,
        )
        .unwrap();
        for &(v, _) in s.atoms() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn proxies_of_point_mass_are_exact() {
        let m = SourceModel::iid(bernoulli(0.5, "X").unwrap(), None).unwrap();
        let s = density_spectrum(&m, &[], 16, &entropy_kind("X"), BUDGET).unwrap();
        let est = spectral_proxies(&[s], 0.01).unwrap();
        assert_abs_diff_eq!(est.sup_proxy, 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(est.inf_proxy, 2f64.ln(), epsilon = 1e-12);
        assert!(!est.extrapolated);
    }

    #[test]
    fn proxies_contract_toward_entropy_for_memoryless_source() {
        let m = SourceModel::iid(bernoulli(0.11, "X").unwrap(), None).unwrap();
        let spectra: Vec<_> = [64u32, 256, 1024]
            .iter()
            .map(|&n| density_spectrum(&m, &[], n, &entropy_kind("X"), BUDGET).unwrap())
            .collect();
        let est = spectral_proxies(&spectra, 0.01).unwrap();
        let h = h_binary(0.11);
        assert!((est.sup_proxy - h).abs() < 0.05, "sup {}", est.sup_proxy);
        assert!((est.inf_proxy - h).abs() < 0.05, "inf {}", est.inf_proxy);
        // The sup-inf gap strictly shrinks along the grid.
        let gaps: Vec<f64> = est.trajectory.iter().map(|p| p.sup - p.inf).collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "gaps {gaps:?}");
        // Inf proxy never exceeds sup proxy anywhere on the grid.
        for p in &est.trajectory {
            assert!(p.inf <= p.sup + 1e-12);
        }
    }

    #[test]
    fn chebyshev_proxy_window_for_memoryless_sources() {
        let base = bernoulli(0.11, "X").unwrap();
        let m = SourceModel::iid(base.clone(), None).unwrap();
        let h = classical::entropy(&base, &["X"]).unwrap();
        let var1 = density_spectrum(&m, &[], 1, &entropy_kind("X"), BUDGET)
            .unwrap()
            .variance();
        for (n, eps) in [(64u32, 0.05f64), (256, 0.01), (1024, 0.02)] {
            let s = density_spectrum(&m, &[], n, &entropy_kind("X"), BUDGET).unwrap();
            let est = spectral_proxies(&[s], eps).unwrap();
            let window = 3.0 * (var1 / n as f64).sqrt() / eps;
            assert!((est.sup_proxy - h).abs() <= window);
            assert!((est.inf_proxy - h).abs() <= window);
        }
    }

    #[test]
    fn mixture_spectrum_splits_into_component_clusters() {
        let a = bernoulli(0.1, "X").unwrap();
        let b = bernoulli(0.4, "X").unwrap();
        let m = SourceModel::mixed(0.5, a, b, None).unwrap();
        let s = density_spectrum(&m, &[], 1024, &entropy_kind("X"), BUDGET).unwrap();
        let est = spectral_proxies(&[s], 0.01).unwrap();
        assert!((est.sup_proxy - h_binary(0.4)).abs() < 0.05, "sup {}", est.sup_proxy);
        assert!((est.inf_proxy - h_binary(0.1)).abs() < 0.05, "inf {}", est.inf_proxy);
    }

    #[test]
    fn mixture_mass_within_resolution_is_exact_at_n1() {
        // At n=1 the mixture entropy spectrum has atoms at -ln P_mix(x).
        let a = bernoulli(0.1, "X").unwrap();
        let b = bernoulli(0.4, "X").unwrap();
        let m = SourceModel::mixed(0.25, a, b, None).unwrap();
        let s = density_spectrum(&m, &[], 1, &entropy_kind("X"), BUDGET).unwrap();
        let p1: f64 = 0.25 * 0.1 + 0.75 * 0.4; // P_mix(1)
        let p0: f64 = 1.0 - p1;
        assert_eq!(s.atoms().len(), 2);
        assert_abs_diff_eq!(s.atoms()[0].0, -(p0.ln()), epsilon = 1e-12);
        assert_abs_diff_eq!(s.atoms()[0].1, p0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.atoms()[1].0, -(p1.ln()), epsilon = 1e-12);
        assert_abs_diff_eq!(s.atoms()[1].1, p1, epsilon = 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let m = SourceModel::iid(dsbs(0.3, "A", "B").unwrap(), None).unwrap();
        let err = density_spectrum(
            &m,
            &[],
            512,
            &DensityKind::MutualInfo {
                left: vec!["A".into()],
                right: vec!["B".into()],
            },
            100,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn explicit_model_spectrum_at_listed_n() {
        use std::collections::BTreeMap;
        let vars = vec![Variable::new("X", Alphabet::binary())];
        // n=2 block law: heavily favors 00 and 11 (a correlated, non-iid law).
        let t2 = JointPmf::new(
            crate::model::tuple_vars(&vars, 2),
            vec![0.45, 0.05, 0.05, 0.45],
        )
        .unwrap();
        let mut tables = BTreeMap::new();
        tables.insert(2, t2);
        let m = SourceModel::explicit(vars, tables, None).unwrap();
        let s = density_spectrum(&m, &[], 2, &entropy_kind("X"), BUDGET).unwrap();
        assert_eq!(s.atoms().len(), 2);
        assert_abs_diff_eq!(s.atoms()[0].0, -(0.45f64.ln()) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.atoms()[0].1, 0.9, epsilon = 1e-12);
        assert!(matches!(
            density_spectrum(&m, &[], 3, &entropy_kind("X"), BUDGET),
            Err(Error::MissingBlocklength { n: 3 })
        ));
    }

    #[test]
    fn conditional_entropy_spectrum_mean_matches_classical() {
        let j = dsbs(0.11, "X", "Y").unwrap();
        let m = SourceModel::iid(j.clone(), None).unwrap();
        let kind = DensityKind::CondEntropy {
            target: vec!["X".into()],
            given: vec!["Y".into()],
        };
        let s = density_spectrum(&m, &[], 16, &kind, BUDGET).unwrap();
        assert_abs_diff_eq!(
            s.mean(),
            classical::cond_entropy(&j, &["X"], &["Y"]).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn tail_check_identical_laws_has_zero_probability() {
        let j = dsbs(0.11, "X", "Y").unwrap();
        let q = j.condition(&["X"], &["Y"]).unwrap();
        let chk = divergence_tail_check(&j, &["X"], &["Y"], &q, 4, 0.1, BUDGET).unwrap();
        assert_eq!(chk.probability, 0.0);
        assert!(chk.holds());
    }

    #[test]
    fn tail_check_against_exhaustive_enumeration() {
        // Independent oracle: enumerate every (x^n, y^n) pair and accumulate
        // the exact probability of the tail event.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for trial in 0..20 {
            let kx = 2 + (trial % 2) as usize;
            let ky = 2 + ((trial / 2) % 2) as usize;
            let mut tab: Vec<f64> = (0..kx * ky).map(|_| rng.random::<f64>() + 0.01).collect();
            let s: f64 = tab.iter().sum();
            tab.iter_mut().for_each(|p| *p /= s);
            let j = JointPmf::new(
                vec![
                    Variable::new("Y", Alphabet::indexed(ky)),
                    Variable::new("X", Alphabet::indexed(kx)),
                ],
                tab,
            )
            .unwrap();
            let mut qrows = Vec::new();
            for _ in 0..ky {
                let mut row: Vec<f64> = (0..kx).map(|_| rng.random::<f64>() + 0.01).collect();
                let rs: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= rs);
                qrows.push(row);
            }
            let q = Channel::new(Alphabet::indexed(ky), Alphabet::indexed(kx), qrows).unwrap();
            let p_cond = j.condition(&["X"], &["Y"]).unwrap();
            let py = j.marginalize(&["Y"]).unwrap();

            for n in [1u32, 2, 4] {
                for gamma in [0.05f64, 0.2] {
                    let chk =
                        divergence_tail_check(&j, &["X"], &["Y"], &q, n, gamma, BUDGET).unwrap();
                    // Oracle: walk all (y,x) sequence pairs.
                    let cells = kx * ky;
                    let mut oracle = 0.0f64;
                    for word in 0..cells.pow(n) {
                        let mut rem = word;
                        let mut mass = 1.0f64;
                        let mut dens = 0.0f64;
                        for _ in 0..n {
                            let cell = rem % cells;
                            rem /= cells;
                            let y = cell / kx;
                            let x = cell % kx;
                            let pxy = py.probs()[y] * p_cond.row(y).unwrap()[x];
                            mass *= pxy;
                            dens += (p_cond.row(y).unwrap()[x] / q.prob(y, x)).ln();
                        }
                        if mass > 0.0 && dens < -(n as f64) * gamma {
                            oracle += mass;
                        }
                    }
                    assert_abs_diff_eq!(chk.probability, oracle, epsilon = 1e-12);
                    assert!(
                        chk.probability < chk.bound,
                        "tail {} !< bound {}",
                        chk.probability,
                        chk.bound
                    );
                }
            }
        }
    }

    #[test]
    fn tail_check_rejects_zero_reference_mass() {
        let j = dsbs(0.11, "X", "Y").unwrap();
        let q = Channel::new(
            Alphabet::binary(),
            Alphabet::binary(),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        assert!(matches!(
            divergence_tail_check(&j, &["X"], &["Y"], &q, 2, 0.1, BUDGET),
            Err(Error::UndefinedDensity { .. })
        ));
    }

    #[test]
    fn quantiles_are_left_continuous() {
        let s = DensitySpectrum::new(
            entropy_kind("X"),
            1,
            vec![(1.0, 0.25), (2.0, 0.5), (3.0, 0.25)],
        )
        .unwrap();
        assert_eq!(s.quantile(0.25).unwrap(), 1.0);
        assert_eq!(s.quantile(0.2500001).unwrap(), 2.0);
        assert_eq!(s.quantile(0.75).unwrap(), 2.0);
        assert_eq!(s.quantile(1.0).unwrap(), 3.0);
        assert_eq!(s.quantile(0.0).unwrap(), 1.0);
    }

    #[test]
    fn big_n_entropy_spectrum_stays_sparse() {
        let m = SourceModel::iid(bernoulli(0.11, "X").unwrap(), None).unwrap();
        let s = density_spectrum(&m, &[], 1024, &entropy_kind("X"), BUDGET).unwrap();
        // One atom per empirical type, except deep-tail types whose mass
        // underflows f64 and is dropped.
        assert!(s.atoms().len() <= 1025 && s.atoms().len() > 500, "{}", s.atoms().len());
        let total: f64 = s.atoms().iter().map(|&(_, m)| m).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }
}
