//! Achievable rate regions for distributed lossy compression with separate
//! encoders and a joint decoder that may hold side information.
//!
//! A configuration is one memoryless test channel per terminal. For terminal
//! subset A the configuration supports any rate vector with
//!   sum_{m in A} R_m >= sum_{m in A} I(X_m;Z_m)
//!                        - MultiInfo(Z_A) - I(Z_A ; side, Z_{A^c}),
//! and the corner points of that polyhedron are reached by a greedy rule
//! evaluated along every terminal ordering. The search over channels is a
//! multi-start cyclic coordinate descent: each step moves probability mass
//! between two entries of one channel row, line-searched by golden section.

use crate::classical;
use crate::error::{Error, Result};
use crate::prob::{attach_test_channels, Alphabet, Attachment, Channel, JointPmf};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Below this, two rate vectors count as the same corner.
const CORNER_DEDUP_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Composed systems and subset bounds
// ---------------------------------------------------------------------------

/// A source joined with one test channel per terminal: the joint law of
/// (sources, side information, channel outputs).
#[derive(Debug, Clone)]
pub struct ChannelSystem {
    joint: JointPmf,
    x_vars: Vec<String>,
    z_vars: Vec<String>,
    side: Option<String>,
}

impl ChannelSystem {
    /// Attach `channels[m]` to `x_vars[m]` in `base`. Output variables get
    /// fresh names Z1..ZM (suffixed with `_` on collision).
    pub fn compose(
        base: &JointPmf,
        x_vars: &[&str],
        side: Option<&str>,
        channels: &[Channel],
    ) -> Result<ChannelSystem> {
        if x_vars.is_empty() {
            return Err(Error::EmptySubset);
        }
        if channels.len() != x_vars.len() {
            return Err(Error::ShapeMismatch {
                got: channels.len(),
                want: x_vars.len(),
            });
        }
        if let Some(s) = side {
            base.axis(s)?;
            if x_vars.contains(&s) {
                return Err(Error::InvalidConfig {
                    context: format!("side variable `{s}` is also a terminal"),
                });
            }
        }
        let z_vars = fresh_output_names(base, x_vars.len());
        let attachments: Vec<Attachment> = x_vars
            .iter()
            .zip(&z_vars)
            .zip(channels)
            .map(|((x, z), ch)| Attachment {
                source_var: x,
                output_var: z.clone(),
                channel: ch,
            })
            .collect();
        let joint = attach_test_channels(base, &attachments)?;
        Ok(ChannelSystem {
            joint,
            x_vars: x_vars.iter().map(|s| s.to_string()).collect(),
            z_vars,
            side: side.map(str::to_string),
        })
    }

    pub fn joint(&self) -> &JointPmf {
        &self.joint
    }

    pub fn terminals(&self) -> usize {
        self.x_vars.len()
    }

    pub fn x_vars(&self) -> Vec<&str> {
        self.x_vars.iter().map(String::as_str).collect()
    }

    pub fn z_vars(&self) -> Vec<&str> {
        self.z_vars.iter().map(String::as_str).collect()
    }

    pub fn side(&self) -> Option<&str> {
        self.side.as_deref()
    }

    /// Rate-sum lower bound for the terminal subset `a` (indices into the
    /// terminal list): sum of per-terminal informations, minus the redundancy
    /// among the subset's outputs, minus what the decoder already gets from
    /// side information and the other outputs.
    pub fn subset_bound(&self, a: &[usize]) -> Result<f64> {
        let mask = indices_to_mask(a, self.terminals())?;
        subset_bound_terms(&self.joint, &self.x_vars, &self.z_vars, self.side.as_deref(), mask)
    }

    /// For two terminals under per-terminal channels, the first terminal's
    /// solo bound in its two algebraic forms:
    /// (I(X1;Z1) - I(Z1;Z2), I(X1;Z1|Z2)). They agree exactly when
    /// P(z1,z2|x1,x2) factorizes through the per-terminal channels; that
    /// factorization is verified first.
    pub fn two_terminal_bound_forms(&self) -> Result<(f64, f64)> {
        if self.terminals() != 2 {
            return Err(Error::InvalidConfig {
                context: format!("need exactly 2 terminals, have {}", self.terminals()),
            });
        }
        self.check_factorization()?;
        let x1 = self.x_vars[0].as_str();
        let z1 = self.z_vars[0].as_str();
        let z2 = self.z_vars[1].as_str();
        let difference = classical::mutual_info(&self.joint, &[x1], &[z1])?
            - classical::mutual_info(&self.joint, &[z1], &[z2])?;
        let conditional = classical::cond_mutual_info(&self.joint, &[x1], &[z1], &[z2])?;
        Ok((difference, conditional))
    }

    /// Verifies P(z_1..z_M | x_1..x_M) = prod_m P(z_m | x_m) on the support,
    /// entrywise within 1e-9.
    fn check_factorization(&self) -> Result<()> {
        let m = self.terminals();
        let x_names: Vec<&str> = self.x_vars();
        let z_names: Vec<&str> = self.z_vars();
        let mut all = x_names.clone();
        all.extend(&z_names);
        let joint_xz = self.joint.marginalize(&all)?;
        let px = joint_xz.marginalize(&x_names)?;
        // Per-terminal conditionals P(z_m | x_m).
        let mut conds = Vec::with_capacity(m);
        for i in 0..m {
            conds.push(joint_xz.condition(&[z_names[i]], &[x_names[i]])?);
        }
        let x_axes: Vec<usize> = x_names
            .iter()
            .map(|n| joint_xz.axis(n))
            .collect::<Result<_>>()?;
        let z_axes: Vec<usize> = z_names
            .iter()
            .map(|n| joint_xz.axis(n))
            .collect::<Result<_>>()?;
        let px_strides = px.strides();
        for (flat, &p) in joint_xz.probs().iter().enumerate() {
            let idx = joint_xz.unflatten(flat);
            let mut xflat = 0usize;
            for (k, &a) in x_axes.iter().enumerate() {
                xflat += idx[a] * px_strides[k];
            }
            let pxv = px.probs()[xflat];
            if pxv <= 0.0 {
                continue;
            }
            let mut prod = 1.0;
            for i in 0..m {
                match conds[i].row(idx[x_axes[i]]) {
                    Some(row) => prod *= row[idx[z_axes[i]]],
                    None => {
                        prod = f64::NAN;
                        break;
                    }
                }
            }
            if !(prod.is_finite() && (p / pxv - prod).abs() <= 1e-9) {
                return Err(Error::FactorizationViolated {
                    context: format!(
                        "P(z|x) = {} but per-terminal product = {} at cell {}",
                        p / pxv,
                        prod,
                        flat
                    ),
                });
            }
        }
        Ok(())
    }
}

fn fresh_output_names(base: &JointPmf, m: usize) -> Vec<String> {
    let taken: Vec<&str> = base.var_names();
    (0..m)
        .map(|i| {
            let mut name = format!("Z{}", i + 1);
            while taken.contains(&name.as_str()) {
                name.push('_');
            }
            name
        })
        .collect()
}

fn indices_to_mask(a: &[usize], m: usize) -> Result<u32> {
    if a.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut mask = 0u32;
    for &i in a {
        if i >= m {
            return Err(Error::InvalidConfig {
                context: format!("terminal index {i} out of range (have {m})"),
            });
        }
        mask |= 1 << i;
    }
    Ok(mask)
}

/// The bound for one subset mask on one joint law.
fn subset_bound_terms(
    joint: &JointPmf,
    x_vars: &[String],
    z_vars: &[String],
    side: Option<&str>,
    mask: u32,
) -> Result<f64> {
    let m = x_vars.len();
    let mut sum_i = 0.0;
    let mut in_z: Vec<&str> = Vec::new();
    let mut out_z: Vec<&str> = Vec::new();
    for t in 0..m {
        if mask >> t & 1 == 1 {
            sum_i += classical::mutual_info(joint, &[&x_vars[t]], &[&z_vars[t]])?;
            in_z.push(&z_vars[t]);
        } else {
            out_z.push(&z_vars[t]);
        }
    }
    if in_z.is_empty() {
        return Err(Error::EmptySubset);
    }
    let redundancy = classical::multi_info(joint, &in_z)?;
    let mut known = out_z;
    if let Some(s) = side {
        known.push(s);
    }
    let cross = classical::mutual_info(joint, &in_z, &known)?;
    Ok(sum_i - redundancy - cross)
}

// ---------------------------------------------------------------------------
// Distortion
// ---------------------------------------------------------------------------

/// A per-letter distortion on (all source symbols, one reconstruction
/// symbol). Table layout: source cells (in terminal order, first terminal
/// slowest) major, reconstruction symbol minor.
#[derive(Debug, Clone)]
pub struct DistortionMeasure {
    x_sizes: Vec<usize>,
    y_size: usize,
    table: Vec<f64>,
}

impl DistortionMeasure {
    pub fn new(x_sizes: Vec<usize>, y_size: usize, table: Vec<f64>) -> Result<Self> {
        let cells: usize = x_sizes.iter().product();
        if x_sizes.is_empty() || y_size == 0 || cells == 0 {
            return Err(Error::InvalidConfig {
                context: "distortion measure needs nonempty source and reconstruction alphabets"
                    .into(),
            });
        }
        if table.len() != cells * y_size {
            return Err(Error::ShapeMismatch {
                got: table.len(),
                want: cells * y_size,
            });
        }
        if let Some(&bad) = table.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidConfig {
                context: format!("distortion values must be finite and nonnegative, got {bad}"),
            });
        }
        Ok(DistortionMeasure {
            x_sizes,
            y_size,
            table,
        })
    }

    /// Reproduce one terminal exactly: d = 1 unless y equals that terminal's
    /// symbol.
    pub fn hamming(x_sizes: &[usize], terminal: usize) -> Result<Self> {
        if terminal >= x_sizes.len() {
            return Err(Error::InvalidConfig {
                context: format!("terminal {terminal} out of range"),
            });
        }
        let cells: usize = x_sizes.iter().product();
        let y_size = x_sizes[terminal];
        let mut table = vec![0.0; cells * y_size];
        let mut strides = vec![1usize; x_sizes.len()];
        for i in (0..x_sizes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * x_sizes[i + 1];
        }
        for xflat in 0..cells {
            let xm = xflat / strides[terminal] % x_sizes[terminal];
            for y in 0..y_size {
                table[xflat * y_size + y] = if y == xm { 0.0 } else { 1.0 };
            }
        }
        DistortionMeasure::new(x_sizes.to_vec(), y_size, table)
    }

    pub fn x_sizes(&self) -> &[usize] {
        &self.x_sizes
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn value(&self, x_flat: usize, y: usize) -> f64 {
        self.table[x_flat * self.y_size + y]
    }

    /// Distortion of the best reconstruction when the sources themselves are
    /// known: the floor of every coding scheme.
    pub fn floor_under(&self, px: &[f64]) -> Result<f64> {
        let cells: usize = self.x_sizes.iter().product();
        if px.len() != cells {
            return Err(Error::ShapeMismatch {
                got: px.len(),
                want: cells,
            });
        }
        let mut total = 0.0;
        for (xflat, &p) in px.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let best = (0..self.y_size)
                .map(|y| self.value(xflat, y))
                .fold(f64::INFINITY, f64::min);
            total += p * best;
        }
        Ok(total)
    }
}

/// A decoder table: one reconstruction symbol per (side, outputs) cell.
/// Cells the decoder can never observe carry `defined = false`.
#[derive(Debug, Clone)]
pub struct ReconMap {
    pub y_size: usize,
    table: Vec<usize>,
    defined: Vec<bool>,
}

impl ReconMap {
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, cell: usize) -> Option<usize> {
        if self.defined[cell] {
            Some(self.table[cell])
        } else {
            None
        }
    }
}

/// Geometry shared by the decoder-side computations: flat indices for the
/// source block and for the (side, outputs) block within one joint law.
struct CellIndexer {
    x_axes: Vec<usize>,
    x_strides: Vec<usize>,
    obs_axes: Vec<usize>,
    obs_strides: Vec<usize>,
    obs_cells: usize,
}

impl CellIndexer {
    fn new(
        joint: &JointPmf,
        x_vars: &[String],
        z_vars: &[String],
        side: Option<&str>,
    ) -> Result<CellIndexer> {
        let x_axes: Vec<usize> = x_vars
            .iter()
            .map(|n| joint.axis(n))
            .collect::<Result<_>>()?;
        let mut obs_names: Vec<&str> = Vec::new();
        if let Some(s) = side {
            obs_names.push(s);
        }
        obs_names.extend(z_vars.iter().map(String::as_str));
        let obs_axes: Vec<usize> = obs_names
            .iter()
            .map(|n| joint.axis(n))
            .collect::<Result<_>>()?;
        let x_sizes: Vec<usize> = x_axes
            .iter()
            .map(|&a| joint.vars()[a].alphabet.len())
            .collect();
        let obs_sizes: Vec<usize> = obs_axes
            .iter()
            .map(|&a| joint.vars()[a].alphabet.len())
            .collect();
        let suffix_product = |sizes: &[usize]| {
            let mut s = vec![1usize; sizes.len()];
            for i in (0..sizes.len().saturating_sub(1)).rev() {
                s[i] = s[i + 1] * sizes[i + 1];
            }
            s
        };
        let obs_cells = obs_sizes.iter().product();
        Ok(CellIndexer {
            x_strides: suffix_product(&x_sizes),
            x_axes,
            obs_strides: suffix_product(&obs_sizes),
            obs_axes,
            obs_cells,
        })
    }

    fn split(&self, idx: &[usize]) -> (usize, usize) {
        let mut x = 0usize;
        for (k, &a) in self.x_axes.iter().enumerate() {
            x += idx[a] * self.x_strides[k];
        }
        let mut o = 0usize;
        for (k, &a) in self.obs_axes.iter().enumerate() {
            o += idx[a] * self.obs_strides[k];
        }
        (x, o)
    }
}

/// The decoder that minimizes expected distortion for `measure` under
/// `joint`: per observable cell, the reconstruction minimizing the posterior
/// expected distortion (ties to the lowest symbol). Returns the map and its
/// achieved expected distortion.
pub fn optimal_recon(
    joint: &JointPmf,
    x_vars: &[String],
    z_vars: &[String],
    side: Option<&str>,
    measure: &DistortionMeasure,
) -> Result<(ReconMap, f64)> {
    let ix = CellIndexer::new(joint, x_vars, z_vars, side)?;
    let x_cells: usize = measure.x_sizes.iter().product();
    // cost[o][y] = sum_x P(x, o) d(x, y); minimizing over y per cell also
    // minimizes the total, so no explicit posterior normalization is needed.
    let mut cost = vec![0.0f64; ix.obs_cells * measure.y_size];
    let mut cell_mass = vec![0.0f64; ix.obs_cells];
    for (flat, &p) in joint.probs().iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let idx = joint.unflatten(flat);
        let (x, o) = ix.split(&idx);
        if x >= x_cells {
            return Err(Error::ShapeMismatch {
                got: x_cells,
                want: x + 1,
            });
        }
        cell_mass[o] += p;
        for y in 0..measure.y_size {
            cost[o * measure.y_size + y] += p * measure.value(x, y);
        }
    }
    let mut table = vec![0usize; ix.obs_cells];
    let mut defined = vec![false; ix.obs_cells];
    let mut total = 0.0;
    for o in 0..ix.obs_cells {
        if cell_mass[o] <= 0.0 {
            continue;
        }
        let mut best_y = 0usize;
        let mut best = f64::INFINITY;
        for y in 0..measure.y_size {
            let c = cost[o * measure.y_size + y];
            if c < best {
                best = c;
                best_y = y;
            }
        }
        table[o] = best_y;
        defined[o] = true;
        total += best;
    }
    Ok((
        ReconMap {
            y_size: measure.y_size,
            table,
            defined,
        },
        total,
    ))
}

/// Expected distortion of a fixed decoder table under `joint`. The table
/// must be defined on every positive-mass observable cell.
pub fn expected_distortion(
    joint: &JointPmf,
    x_vars: &[String],
    z_vars: &[String],
    side: Option<&str>,
    measure: &DistortionMeasure,
    recon: &ReconMap,
) -> Result<f64> {
    let ix = CellIndexer::new(joint, x_vars, z_vars, side)?;
    if recon.len() != ix.obs_cells || recon.y_size != measure.y_size {
        return Err(Error::ShapeMismatch {
            got: recon.len(),
            want: ix.obs_cells,
        });
    }
    let mut total = 0.0;
    for (flat, &p) in joint.probs().iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let idx = joint.unflatten(flat);
        let (x, o) = ix.split(&idx);
        let y = recon.get(o).ok_or_else(|| Error::InvalidConfig {
            context: format!("decoder table undefined on a positive-mass cell ({o})"),
        })?;
        total += p * measure.value(x, y);
    }
    Ok(total)
}

/// Reconstruction maps induced by one channel configuration: compose every
/// component, blend, and pick the cost-minimizing symbol per (side, outputs)
/// cell for each measure — the same tables the binning decoder replays.
pub fn corner_recons(
    components: &[(&JointPmf, f64)],
    x_vars: &[&str],
    side: Option<&str>,
    measures: &[DistortionMeasure],
    channels: &[Channel],
) -> Result<Vec<ReconMap>> {
    let mut systems = Vec::with_capacity(components.len());
    for (base, w) in components {
        systems.push((ChannelSystem::compose(base, x_vars, side, channels)?, *w));
    }
    let blended = blend(&systems)?;
    let sys0 = &systems[0].0;
    measures
        .iter()
        .map(|m| optimal_recon(&blended, &sys0.x_vars, &sys0.z_vars, side, m).map(|(r, _)| r))
        .collect()
}

// ---------------------------------------------------------------------------
// Region search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SearchParams {
    /// Output alphabet size per terminal; default |X_m| + 2.
    pub aux_sizes: Option<Vec<usize>>,
    pub restarts: usize,
    pub seed: u64,
    /// Stop a descent sweep cycle once it improves the objective by less.
    pub tol: f64,
    /// Additive slack when checking distortion targets.
    pub distortion_slack: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            aux_sizes: None,
            restarts: 200,
            seed: 0,
            tol: 1e-6,
            distortion_slack: 1e-12,
        }
    }
}

/// One supported rate vector with everything needed to audit or replay it.
#[derive(Debug, Clone)]
pub struct FrontierCorner {
    pub rates: Vec<f64>,
    pub distortions: Vec<f64>,
    /// Subset-mask -> rate-sum bound for this corner's configuration.
    pub bounds: BTreeMap<u32, f64>,
    pub channels: Vec<Channel>,
}

/// Pruned union of corners over every configuration the search kept, plus
/// the least subset bounds seen among feasible configurations.
#[derive(Debug, Clone)]
pub struct RegionFrontier {
    pub corners: Vec<FrontierCorner>,
    pub subset_bounds: BTreeMap<u32, f64>,
}

impl RegionFrontier {
    /// The least total rate among kept corners.
    pub fn min_sum_rate(&self) -> Option<f64> {
        self.corners
            .iter()
            .map(|c| c.rates.iter().sum::<f64>())
            .min_by(f64::total_cmp)
    }
}

/// Weighted memoryless components sharing one variable layout. A plain
/// source is a single component of weight 1.
struct Components<'a> {
    parts: Vec<(&'a JointPmf, f64)>,
}

struct Assessment {
    bounds: BTreeMap<u32, f64>,
    distortions: Vec<f64>,
    violation: f64,
}

struct Evaluator<'a> {
    components: Components<'a>,
    x_vars: Vec<String>,
    side: Option<String>,
    targets: &'a [(DistortionMeasure, f64)],
    slack: f64,
}

impl<'a> Evaluator<'a> {
    fn terminals(&self) -> usize {
        self.x_vars.len()
    }

    /// Bounds for every nonempty subset mask, per-measure distortions, and
    /// the summed target violation.
    fn assess(&self, channels: &[Channel]) -> Result<Assessment> {
        let m = self.terminals();
        let x_refs: Vec<&str> = self.x_vars.iter().map(String::as_str).collect();
        let mut systems = Vec::with_capacity(self.components.parts.len());
        for &(base, w) in &self.components.parts {
            let sys = ChannelSystem::compose(base, &x_refs, self.side.as_deref(), channels)?;
            systems.push((sys, w));
        }
        let z_vars: Vec<String> = systems[0].0.z_vars.clone();

        // Per-component per-terminal informations, reused across masks.
        let mut per_terminal: Vec<Vec<f64>> = Vec::new();
        for (sys, _) in &systems {
            let mut v = Vec::with_capacity(m);
            for t in 0..m {
                v.push(classical::mutual_info(
                    &sys.joint,
                    &[&self.x_vars[t]],
                    &[&z_vars[t]],
                )?);
            }
            per_terminal.push(v);
        }

        let mut bounds = BTreeMap::new();
        for mask in 1u32..(1 << m) {
            let mut sum_i = f64::NEG_INFINITY;
            let mut redundancy = f64::INFINITY;
            let mut cross = f64::INFINITY;
            for (c, (sys, _)) in systems.iter().enumerate() {
                let mut in_z: Vec<&str> = Vec::new();
                let mut known: Vec<&str> = Vec::new();
                let mut s = 0.0;
                for t in 0..m {
                    if mask >> t & 1 == 1 {
                        s += per_terminal[c][t];
                        in_z.push(&z_vars[t]);
                    } else {
                        known.push(&z_vars[t]);
                    }
                }
                if let Some(sv) = self.side.as_deref() {
                    known.push(sv);
                }
                // Worst component needs the most rate; the coupling discounts
                // are only safe at their least values.
                sum_i = sum_i.max(s);
                redundancy = redundancy.min(classical::multi_info(&sys.joint, &in_z)?);
                cross = cross.min(classical::mutual_info(&sys.joint, &in_z, &known)?);
            }
            bounds.insert(mask, sum_i - redundancy - cross);
        }

        // Decoder tables are built on the blended law (the decoder cannot see
        // which component is active), then charged against each component.
        let mixture = blend(&systems)?;
        let mut distortions = Vec::with_capacity(self.targets.len());
        let mut violation = 0.0;
        for (k, (measure, target)) in self.targets.iter().enumerate() {
            let (recon, _) =
                optimal_recon(&mixture, &self.x_vars, &z_vars, self.side.as_deref(), measure)?;
            let mut worst = 0.0f64;
            for (sys, _) in &systems {
                let d = expected_distortion(
                    &sys.joint,
                    &self.x_vars,
                    &z_vars,
                    self.side.as_deref(),
                    measure,
                    &recon,
                )?;
                worst = worst.max(d);
            }
            distortions.push(worst);
            violation += (worst - target - self.slack).max(0.0);
            let _ = k;
        }
        Ok(Assessment {
            bounds,
            distortions,
            violation,
        })
    }
}

pub(crate) fn blend(systems: &[(ChannelSystem, f64)]) -> Result<JointPmf> {
    if systems.len() == 1 {
        return Ok(systems[0].0.joint.clone());
    }
    let vars = systems[0].0.joint.vars().to_vec();
    let mut probs = vec![0.0f64; systems[0].0.joint.probs().len()];
    for (sys, w) in systems {
        if sys.joint.probs().len() != probs.len() {
            return Err(Error::ShapeMismatch {
                got: sys.joint.probs().len(),
                want: probs.len(),
            });
        }
        for (acc, &p) in probs.iter_mut().zip(sys.joint.probs()) {
            *acc += w * p;
        }
    }
    JointPmf::new(vars, probs)
}

/// Greedy corner of the subset-bound polyhedron along ordering `perm`:
/// terminal perm[k] takes the largest rate forced by any subset of the
/// already-served terminals that includes it.
fn greedy_corner(bounds: &BTreeMap<u32, f64>, perm: &[usize]) -> Vec<f64> {
    let m = perm.len();
    let mut rates = vec![0.0f64; m];
    let mut served_mask = 0u32;
    for (k, &t) in perm.iter().enumerate() {
        let mut best = f64::NEG_INFINITY;
        // Subsets of served+t containing t: iterate submasks.
        let pool = served_mask;
        let mut sub = pool;
        loop {
            let mask = sub | (1 << t);
            let mut need = bounds[&mask];
            for &u in &perm[..k] {
                if mask >> u & 1 == 1 {
                    need -= rates[u];
                }
            }
            if need > best {
                best = need;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & pool;
        }
        rates[t] = best.max(0.0);
        served_mask |= 1 << t;
    }
    rates
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..m).collect();
    fn heap(k: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, items, out);
            if k % 2 == 0 {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    heap(m, &mut items, &mut out);
    out
}

/// Scalarization directions cycled across restarts: each axis emphasized,
/// the uniform direction, and (for two terminals) two skewed blends.
fn lambda_directions(m: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for t in 0..m {
        let mut v = vec![if m > 1 { 0.1 / (m - 1) as f64 } else { 0.0 }; m];
        v[t] = 0.9;
        dirs.push(v);
    }
    dirs.push(vec![1.0 / m as f64; m]);
    if m == 2 {
        dirs.push(vec![0.7, 0.3]);
        dirs.push(vec![0.3, 0.7]);
    }
    dirs
}

fn objective(assessment: &Assessment, lambda: &[f64], perms: &[Vec<usize>]) -> f64 {
    if assessment.violation > 0.0 {
        return 1e6 * (1.0 + assessment.violation);
    }
    let mut best = f64::INFINITY;
    for perm in perms {
        let rates = greedy_corner(&assessment.bounds, perm);
        let v: f64 = rates.iter().zip(lambda).map(|(r, l)| r * l).sum();
        if v < best {
            best = v;
        }
    }
    best
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Minimize f over [lo, hi] by golden-section; returns (argmin, min).
fn golden_min(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..28 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// One multi-start descent; returns all feasible corner candidates found.
fn run_restart(
    ev: &Evaluator,
    aux_sizes: &[usize],
    restart: usize,
    params: &SearchParams,
    perms: &[Vec<usize>],
) -> Result<Vec<FrontierCorner>> {
    let m = ev.terminals();
    let base0 = ev.components.parts[0].0;
    let x_alphabets: Vec<&Alphabet> = ev
        .x_vars
        .iter()
        .map(|n| base0.alphabet(n))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
    rng.set_stream(3000 + restart as u64);

    let mut channels: Vec<Channel> = Vec::with_capacity(m);
    for t in 0..m {
        let input = x_alphabets[t];
        let ch = if restart == 0 && aux_sizes[t] >= input.len() {
            Channel::identity(input, aux_sizes[t])?
        } else if restart == 1 {
            Channel::constant(input, aux_sizes[t])?
        } else {
            random_channel(input, aux_sizes[t], &mut rng)?
        };
        channels.push(ch);
    }

    let dirs = lambda_directions(m);
    let lambda = &dirs[restart % dirs.len()];

    let mut out = Vec::new();
    let assessment = ev.assess(&channels)?;
    if assessment.violation == 0.0 {
        collect_corners(&assessment, &channels, perms, &mut out);
    }
    let mut current = objective(&assessment, lambda, perms);

    let max_sweeps = 40;
    for _ in 0..max_sweeps {
        let before = current;
        for t in 0..m {
            let rows = x_alphabets[t].len();
            let cols = aux_sizes[t];
            for i in 0..rows {
                for j1 in 0..cols {
                    for j2 in (j1 + 1)..cols {
                        let row = channels[t].row(i).expect("search channels fully defined");
                        let (p1, p2) = (row[j1], row[j2]);
                        if p1 + p2 <= 1e-15 {
                            continue;
                        }
                        // Move mass delta from j2 to j1; delta in [-p1, p2].
                        let eval = |delta: f64, channels: &mut Vec<Channel>| -> f64 {
                            let mut rows_new: Vec<Vec<f64>> = (0..rows)
                                .map(|r| channels[t].row(r).unwrap().to_vec())
                                .collect();
                            rows_new[i][j1] = p1 + delta;
                            rows_new[i][j2] = p2 - delta;
                            let cand = Channel::new(
                                channels[t].input().clone(),
                                channels[t].output().clone(),
                                rows_new,
                            );
                            let cand = match cand {
                                Ok(c) => c,
                                Err(_) => return f64::INFINITY,
                            };
                            let old = std::mem::replace(&mut channels[t], cand);
                            let v = ev
                                .assess(channels)
                                .map(|a| objective(&a, lambda, perms))
                                .unwrap_or(f64::INFINITY);
                            channels[t] = old;
                            v
                        };
                        let (best_delta, best_val) =
                            golden_min(-p1, p2, |d| eval(d, &mut channels));
                        if best_val + 1e-12 < current {
                            let mut rows_new: Vec<Vec<f64>> = (0..rows)
                                .map(|r| channels[t].row(r).unwrap().to_vec())
                                .collect();
                            rows_new[i][j1] = p1 + best_delta;
                            rows_new[i][j2] = p2 - best_delta;
                            channels[t] = Channel::new(
                                channels[t].input().clone(),
                                channels[t].output().clone(),
                                rows_new,
                            )?;
                            current = best_val;
                        }
                    }
                }
            }
        }
        if before - current < params.tol {
            break;
        }
    }

    let final_assessment = ev.assess(&channels)?;
    if final_assessment.violation == 0.0 {
        collect_corners(&final_assessment, &channels, perms, &mut out);
    }
    Ok(out)
}

fn collect_corners(
    assessment: &Assessment,
    channels: &[Channel],
    perms: &[Vec<usize>],
    out: &mut Vec<FrontierCorner>,
) {
    for perm in perms {
        let rates = greedy_corner(&assessment.bounds, perm);
        out.push(FrontierCorner {
            rates,
            distortions: assessment.distortions.clone(),
            bounds: assessment.bounds.clone(),
            channels: channels.to_vec(),
        });
    }
}

fn random_channel(input: &Alphabet, out_size: usize, rng: &mut ChaCha12Rng) -> Result<Channel> {
    let mut rows = Vec::with_capacity(input.len());
    for _ in 0..input.len() {
        // Flat Dirichlet via normalized exponentials.
        let mut row: Vec<f64> = (0..out_size)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
        rows.push(row);
    }
    Channel::new(input.clone(), Alphabet::indexed(out_size), rows)
}

fn prune_corners(mut all: Vec<FrontierCorner>) -> Vec<FrontierCorner> {
    // Sort for determinism, then drop duplicates and dominated corners.
    all.sort_by(|a, b| {
        for (x, y) in a.rates.iter().zip(&b.rates) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    });
    let dominates = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).all(|(x, y)| *x <= y + 1e-12)
            && a.iter().zip(b).any(|(x, y)| *x < y - CORNER_DEDUP_TOL)
    };
    let mut kept: Vec<FrontierCorner> = Vec::new();
    'outer: for c in all {
        for k in &kept {
            let dup = c
                .rates
                .iter()
                .zip(&k.rates)
                .all(|(x, y)| (x - y).abs() <= CORNER_DEDUP_TOL);
            if dup || dominates(&k.rates, &c.rates) {
                continue 'outer;
            }
        }
        kept.retain(|k| !dominates(&c.rates, &k.rates));
        kept.push(c);
    }
    kept
}

fn search_over(
    components: Vec<(&JointPmf, f64)>,
    x_vars: &[&str],
    side: Option<&str>,
    targets: &[(DistortionMeasure, f64)],
    params: &SearchParams,
) -> Result<RegionFrontier> {
    if x_vars.is_empty() {
        return Err(Error::EmptySubset);
    }
    if targets.is_empty() {
        return Err(Error::InvalidConfig {
            context: "at least one distortion target is required".into(),
        });
    }
    let base0 = components[0].0;
    for x in x_vars {
        base0.axis(x)?;
    }
    if let Some(s) = side {
        base0.axis(s)?;
        if x_vars.contains(&s) {
            return Err(Error::InvalidConfig {
                context: format!("side variable `{s}` is also a terminal"),
            });
        }
    }
    let m = x_vars.len();
    let x_sizes: Vec<usize> = x_vars
        .iter()
        .map(|n| base0.alphabet(n).map(|a| a.len()))
        .collect::<Result<_>>()?;
    for (measure, target) in targets {
        if measure.x_sizes() != x_sizes.as_slice() {
            return Err(Error::AlphabetMismatch {
                context: format!(
                    "distortion table defined over {:?}, terminals have {:?}",
                    measure.x_sizes(),
                    x_sizes
                ),
            });
        }
        if !target.is_finite() || *target < 0.0 {
            return Err(Error::InvalidConfig {
                context: format!("distortion target {target} must be finite and nonnegative"),
            });
        }
    }
    let aux_sizes: Vec<usize> = match &params.aux_sizes {
        Some(a) => {
            if a.len() != m || a.iter().any(|&s| s == 0) {
                return Err(Error::InvalidConfig {
                    context: "aux_sizes must give a positive size per terminal".into(),
                });
            }
            a.clone()
        }
        None => x_sizes.iter().map(|s| s + 2).collect(),
    };
    if params.restarts == 0 {
        return Err(Error::InvalidConfig {
            context: "need at least one restart".into(),
        });
    }

    // Feasibility floor: even a decoder handed the sources themselves cannot
    // beat this, under the weight-blended source law.
    let x_refs: Vec<&str> = x_vars.to_vec();
    let mut px = vec![0.0f64; x_sizes.iter().product()];
    for &(base, w) in &components {
        let marg = base.marginalize(&x_refs)?;
        for (acc, &p) in px.iter_mut().zip(marg.probs()) {
            *acc += w * p;
        }
    }
    for (measure, target) in targets {
        let floor = measure.floor_under(&px)?;
        if *target + params.distortion_slack < floor {
            return Err(Error::InfeasibleDistortion {
                target: *target,
                minimum: floor,
            });
        }
    }

    let ev = Evaluator {
        components: Components { parts: components },
        x_vars: x_vars.iter().map(|s| s.to_string()).collect(),
        side: side.map(str::to_string),
        targets,
        slack: params.distortion_slack,
    };
    let perms = permutations(m);

    let results: Vec<Result<Vec<FrontierCorner>>> = (0..params.restarts)
        .into_par_iter()
        .map(|r| run_restart(&ev, &aux_sizes, r, params, &perms))
        .collect();
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    if all.is_empty() {
        // Feasibility passed the floor check, so some configuration exists;
        // reaching here means the targets sit between the floor and anything
        // the started configurations attain.
        return Err(Error::InfeasibleDistortion {
            target: targets
                .iter()
                .map(|(_, t)| *t)
                .fold(f64::INFINITY, f64::min),
            minimum: f64::NAN,
        });
    }
    let corners = prune_corners(all);
    let mut subset_bounds: BTreeMap<u32, f64> = BTreeMap::new();
    for c in &corners {
        for (&mask, &b) in &c.bounds {
            subset_bounds
                .entry(mask)
                .and_modify(|v| *v = v.min(b))
                .or_insert(b);
        }
    }
    Ok(RegionFrontier {
        corners,
        subset_bounds,
    })
}

/// Searches test-channel configurations for `source` meeting every
/// distortion target, and returns the pruned union of supported rate
/// corners.
pub fn search_region(
    source: &JointPmf,
    x_vars: &[&str],
    side: Option<&str>,
    targets: &[(DistortionMeasure, f64)],
    params: &SearchParams,
) -> Result<RegionFrontier> {
    search_over(vec![(source, 1.0)], x_vars, side, targets, params)
}

/// Least rate for one terminal with decoder side information: the single
/// subset bound I(X;Z) - I(Z; side) minimized over feasible channels.
pub fn wyner_ziv_rate(
    source: &JointPmf,
    x_var: &str,
    side: &str,
    measure: &DistortionMeasure,
    target: f64,
    params: &SearchParams,
) -> Result<f64> {
    let frontier = search_region(
        source,
        &[x_var],
        Some(side),
        &[(measure.clone(), target)],
        params,
    )?;
    frontier
        .min_sum_rate()
        .ok_or(Error::InvalidConfig {
            context: "search produced no feasible corner".into(),
        })
}

/// Region for a two-component mixture: channels are shared across
/// components, rate terms take each component's worst case, coupling
/// discounts take their least values, and decoder tables are built on the
/// blended law. The result is supported whichever component is active.
pub fn mixed_region(
    model: &crate::model::SourceModel,
    x_vars: &[&str],
    side: Option<&str>,
    targets: &[(DistortionMeasure, f64)],
    params: &SearchParams,
) -> Result<RegionFrontier> {
    let comps = model.components();
    if comps.len() < 2 {
        return Err(Error::InvalidConfig {
            context: "mixed_region needs a mixture model; use search_region for a single law"
                .into(),
        });
    }
    search_over(comps, x_vars, side, targets, params)
}
