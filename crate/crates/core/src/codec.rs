//! Monte Carlo random-binning codec: per-terminal quantizer codebooks drawn
//! i.i.d. from the output marginal, uniform random bin assignments, density-
//! threshold encoders, and a joint decoder that accepts a codeword tuple only
//! if it is the unique one matching every bin index and clearing every
//! information-density threshold.
//!
//! All thresholds are instantiated with exact single-letter values of the
//! composed (source, side, outputs) law, which is what the spectral limits
//! collapse to for the memoryless and mixed models this module accepts.
//! Failed trials score infinite distortion, so they count toward the error
//! event exactly when some distortion target is finite.

use crate::classical;
use crate::error::{Error, Result};
use crate::model::{SourceKind, SourceModel};
use crate::prob::{Channel, JointPmf};
use crate::region::{blend, optimal_recon, ChannelSystem, DistortionMeasure, ReconMap};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Largest supported blocklength; the decoder's exact density bookkeeping is
/// meant for desk-scale runs.
pub const MAX_BLOCKLENGTH: u32 = 24;
/// Largest codebook (words per terminal).
pub const MAX_CODEBOOK: u64 = 1 << 20;
/// Largest output alphabet per terminal (words are stored as bytes).
pub const MAX_OUTPUT_ALPHABET: usize = 256;

const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Positive slack parameters: gamma1 pads bin counts and distortion targets,
/// gamma2 pads codebook sizes and the encoder/typicality cutoffs, gamma4
/// pads the decoder's subset-density cutoffs. gamma3 belongs to the
/// feasibility argument the scheme is drawn from and is carried for
/// configuration completeness; no runtime check consumes it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slacks {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
}

impl Default for Slacks {
    fn default() -> Self {
        Slacks {
            gamma1: 0.12,
            gamma2: 0.015,
            gamma3: 0.015,
            gamma4: 0.015,
        }
    }
}

impl Slacks {
    fn validate(&self, enforce_relation: bool) -> Result<()> {
        for (name, g) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("gamma4", self.gamma4),
        ] {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidConfig {
                    context: format!("slack {name} must be positive and finite, got {g}"),
                });
            }
        }
        if enforce_relation
            && !(self.gamma2 == self.gamma3
                && self.gamma3 == self.gamma4
                && self.gamma4 < self.gamma1 / 6.0)
        {
            return Err(Error::InvalidConfig {
                context: format!(
                    "slacks must satisfy gamma2 = gamma3 = gamma4 < gamma1/6 \
                     (got {:?}); pass enforce_slack_relation = false to override",
                    self
                ),
            });
        }
        Ok(())
    }
}

/// Everything that pins down one binning experiment.
#[derive(Debug, Clone, Serialize)]
pub struct CodecConfig {
    pub n: u32,
    /// Transmitted rate per terminal, nats per symbol.
    pub rates: Vec<f64>,
    pub slacks: Slacks,
    pub trials: u64,
    pub seed: u64,
    /// Decoder gives up (with an error) past this many candidate tuples in
    /// one trial.
    pub tuple_cap: u64,
    /// When true (the default), reject slack settings outside
    /// gamma2 = gamma3 = gamma4 < gamma1/6.
    pub enforce_slack_relation: bool,
}

impl CodecConfig {
    pub fn new(n: u32, rates: Vec<f64>, trials: u64, seed: u64) -> Self {
        CodecConfig {
            n,
            rates,
            trials,
            seed,
            slacks: Slacks::default(),
            tuple_cap: 1_000_000,
            enforce_slack_relation: true,
        }
    }

    fn validate(&self, terminals: usize) -> Result<()> {
        if self.n == 0 || self.n > MAX_BLOCKLENGTH {
            return Err(Error::InvalidConfig {
                context: format!("blocklength {} outside 1..={MAX_BLOCKLENGTH}", self.n),
            });
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig {
                context: "need at least one trial".into(),
            });
        }
        if self.rates.len() != terminals {
            return Err(Error::ShapeMismatch {
                got: self.rates.len(),
                want: terminals,
            });
        }
        if let Some(&bad) = self.rates.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(Error::InvalidConfig {
                context: format!("rates must be finite and nonnegative, got {bad}"),
            });
        }
        if self.tuple_cap == 0 {
            return Err(Error::InvalidConfig {
                context: "tuple cap must be positive".into(),
            });
        }
        self.slacks.validate(self.enforce_slack_relation)
    }
}

// ---------------------------------------------------------------------------
// Quantizer
// ---------------------------------------------------------------------------

/// One terminal's codebook: `size` words of length n over the output
/// alphabet, drawn i.i.d. from the output marginal, each pre-screened
/// against the per-terminal self-information cutoff.
#[derive(Debug, Clone)]
pub struct Codebook {
    pub terminal: usize,
    n: u32,
    words: Vec<Vec<u8>>,
    screen_pass: Vec<bool>,
}

impl Codebook {
    pub fn size(&self) -> usize {
        self.words.len()
    }

    pub fn word(&self, i: usize) -> &[u8] {
        &self.words[i]
    }

    /// Whether word i clears the per-terminal cutoff
    /// -(1/n) ln P_Z(word) <= I(X;Z) + 2 gamma2.
    pub fn screen_pass(&self, i: usize) -> bool {
        self.screen_pass[i]
    }

    pub fn n(&self) -> u32 {
        self.n
    }
}

/// Codebook plus its encoder rule: map a source block to the first codeword
/// whose pairwise density (1/n) sum ln[W(z|x)/P_Z(z)] reaches I(X;Z) - gamma2.
#[derive(Debug, Clone)]
pub struct Quantizer {
    pub codebook: Codebook,
    /// density[x][z] = ln W(z|x) - ln P_Z(z).
    density: Vec<Vec<f64>>,
    /// Acceptance threshold on the unnormalized density sum.
    threshold_sum: f64,
}

impl Quantizer {
    /// Index of the first acceptable codeword for `x`, or None (quantizer
    /// failure). Scans in codebook order; a running best-possible-suffix
    /// bound abandons each word as soon as it cannot reach the threshold.
    pub fn encode(&self, x: &[usize]) -> Option<u32> {
        let n = self.codebook.n as usize;
        debug_assert_eq!(x.len(), n);
        // suffix_best[i] = max attainable density sum from positions i..n.
        let mut suffix_best = vec![0.0f64; n + 1];
        for i in (0..n).rev() {
            let row = &self.density[x[i]];
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            suffix_best[i] = suffix_best[i + 1] + best;
        }
        'words: for (w, word) in self.codebook.words.iter().enumerate() {
            let mut sum = 0.0f64;
            for i in 0..n {
                sum += self.density[x[i]][word[i] as usize];
                if sum + suffix_best[i + 1] < self.threshold_sum {
                    continue 'words;
                }
            }
            if sum >= self.threshold_sum {
                return Some(w as u32);
            }
        }
        None
    }
}

/// Draws the codebook for one terminal of a memoryless source and wires up
/// its encoder. `px` is the source letter law; cutoffs use the exact
/// mutual information of (px, channel).
pub fn build_quantizer(
    px: &[f64],
    channel: &Channel,
    n: u32,
    gamma2: f64,
    seed: u64,
    terminal: usize,
) -> Result<Quantizer> {
    if channel.input().len() != px.len() {
        return Err(Error::ShapeMismatch {
            got: channel.input().len(),
            want: px.len(),
        });
    }
    let pz = channel.output_marginal(px)?;
    let mut info = 0.0;
    for (x, &p) in px.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let row = channel.row(x).ok_or_else(|| Error::InvalidConfig {
            context: format!("channel undefined on positive-mass input {x}"),
        })?;
        for (z, &w) in row.iter().enumerate() {
            if w > 0.0 {
                info += p * w * (w / pz[z]).ln();
            }
        }
    }
    let density = density_table(px.len(), channel, &pz);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(1000 + terminal as u64);
    build_quantizer_with(&pz, density, info, info, n, gamma2, &mut rng, terminal)
}

/// ln W(z|x) - ln P_Z(z), with undefined rows pinned to -inf (such inputs
/// carry no source mass).
fn density_table(inputs: usize, channel: &Channel, pz: &[f64]) -> Vec<Vec<f64>> {
    (0..inputs)
        .map(|x| match channel.row(x) {
            Some(row) => row
                .iter()
                .zip(pz)
                .map(|(&w, &q)| {
                    if w > 0.0 && q > 0.0 {
                        w.ln() - q.ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect(),
            None => vec![f64::NEG_INFINITY; pz.len()],
        })
        .collect()
}

/// Shared construction: codebook of ceil(e^{n(sup_rate + gamma2)}) words
/// i.i.d. from `pz`, screened at sup_rate + 2 gamma2, encoder threshold at
/// inf_rate - gamma2. For a single memoryless component the two rates are
/// both I(X;Z); for a mixture they are its extreme component informations.
#[allow(clippy::too_many_arguments)]
fn build_quantizer_with(
    pz: &[f64],
    density: Vec<Vec<f64>>,
    inf_rate: f64,
    sup_rate: f64,
    n: u32,
    gamma2: f64,
    rng: &mut ChaCha12Rng,
    terminal: usize,
) -> Result<Quantizer> {
    if pz.len() > MAX_OUTPUT_ALPHABET {
        return Err(Error::InvalidConfig {
            context: format!(
                "output alphabet {} exceeds the supported {MAX_OUTPUT_ALPHABET}",
                pz.len()
            ),
        });
    }
    let size_f = ((n as f64) * (sup_rate + gamma2)).exp().ceil();
    let size = size_f as u64;
    if size_f > MAX_CODEBOOK as f64 {
        return Err(Error::BudgetExceeded {
            context: format!("terminal {terminal} codebook"),
            needed: if size_f.is_finite() { size } else { u64::MAX },
            budget: MAX_CODEBOOK,
        });
    }
    let size = size.max(1) as usize;
    // Inverse-CDF sampling of each letter.
    let mut cdf = Vec::with_capacity(pz.len());
    let mut acc = 0.0;
    for &p in pz {
        acc += p;
        cdf.push(acc);
    }
    let ln_pz: Vec<f64> = pz
        .iter()
        .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
        .collect();
    let screen_sum = -(n as f64) * (sup_rate + 2.0 * gamma2);
    let mut words = Vec::with_capacity(size);
    let mut screen_pass = Vec::with_capacity(size);
    for _ in 0..size {
        let mut word = Vec::with_capacity(n as usize);
        let mut ln_p = 0.0f64;
        for _ in 0..n {
            let u: f64 = rng.random();
            let z = cdf
                .iter()
                .position(|&c| u < c)
                .unwrap_or(pz.len() - 1);
            word.push(z as u8);
            ln_p += ln_pz[z];
        }
        // -(1/n) ln P_Z(word) <= sup + 2g2  <=>  ln P_Z(word) >= -n(sup+2g2).
        screen_pass.push(ln_p >= screen_sum);
        words.push(word);
    }
    Ok(Quantizer {
        codebook: Codebook {
            terminal,
            n,
            words,
            screen_pass,
        },
        density,
        threshold_sum: (n as f64) * (inf_rate - gamma2),
    })
}

// ---------------------------------------------------------------------------
// Bins
// ---------------------------------------------------------------------------

/// Uniform random bin assignment for one terminal's codebook, with a sorted
/// (bin, word) index so the decoder can enumerate a bin's codewords without
/// materializing the bin space.
#[derive(Debug, Clone)]
pub struct BinMap {
    pub terminal: usize,
    /// Bin count L = ceil(e^{n(R + gamma1)}); beyond u64 range the count
    /// saturates (collisions are then never observed anyway).
    pub bins: u64,
    assignment: Vec<u64>,
    sorted: Vec<(u64, u32)>,
}

impl BinMap {
    pub fn bin_of(&self, word: u32) -> u64 {
        self.assignment[word as usize]
    }

    pub fn codewords(&self) -> usize {
        self.assignment.len()
    }

    /// Codeword indices assigned to `bin`, ascending.
    pub fn in_bin(&self, bin: u64) -> impl Iterator<Item = u32> + '_ {
        let lo = self.sorted.partition_point(|&(b, _)| b < bin);
        self.sorted[lo..]
            .iter()
            .take_while(move |&&(b, _)| b == bin)
            .map(|&(_, w)| w)
    }
}

/// Assigns each of `codewords` a bin uniformly from L = ceil(e^{n(R+gamma1)}).
pub fn assign_bins(
    codewords: usize,
    n: u32,
    rate: f64,
    gamma1: f64,
    seed: u64,
    terminal: usize,
) -> BinMap {
    let bins = (((n as f64) * (rate + gamma1)).exp().ceil() as u64).max(1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(2000 + terminal as u64);
    let assignment: Vec<u64> = (0..codewords).map(|_| rng.random_range(0..bins)).collect();
    let mut sorted: Vec<(u64, u32)> = assignment
        .iter()
        .enumerate()
        .map(|(w, &b)| (b, w as u32))
        .collect();
    sorted.sort_unstable();
    BinMap {
        terminal,
        bins,
        assignment,
        sorted,
    }
}

// ---------------------------------------------------------------------------
// Decoder thresholds
// ---------------------------------------------------------------------------

struct MaskCheck {
    /// Per observable cell, the letterwise redundancy density of the
    /// masked outputs; None for singletons (identically zero).
    multi_table: Option<Vec<f64>>,
    multi_cutoff_sum: f64,
    /// Per observable cell, ln P(s, z_all) - ln P(z_mask) - ln P(s, z_rest).
    cross_table: Vec<f64>,
    cross_cutoff_sum: f64,
}

/// Everything the decoder checks beyond bin membership: the per-terminal
/// codeword screens live in the codebooks; here are the per-subset density
/// tables over single-letter observable cells, with cutoffs already scaled
/// to unnormalized sums.
pub struct Thresholds {
    m: usize,
    /// Strides for the flat (side, z_1..z_M) cell, side slowest; matches the
    /// reconstruction maps' cell layout.
    obs_strides: Vec<usize>,
    checks: Vec<MaskCheck>,
    /// D_k + gamma1 per measure.
    pub distortion_cutoffs: Vec<f64>,
}

/// Builds the decoder's density tables from the composed per-component
/// systems. Cutoff values take each subset quantity at its least component
/// value (its inf spectral rate), minus gamma4; densities are evaluated
/// under the blended single-letter law.
fn build_thresholds(
    systems: &[(ChannelSystem, f64)],
    blended: &JointPmf,
    n: u32,
    slacks: &Slacks,
    targets: &[(DistortionMeasure, f64)],
) -> Result<Thresholds> {
    let sys0 = &systems[0].0;
    let m = sys0.terminals();
    let z_names: Vec<&str> = sys0.z_vars();
    let side = sys0.side();
    let z_sizes: Vec<usize> = z_names
        .iter()
        .map(|zn| blended.alphabet(zn).map(|a| a.len()))
        .collect::<Result<_>>()?;
    let side_size = match side {
        Some(s) => blended.alphabet(s)?.len(),
        None => 1,
    };
    // Flat observable cell (side, z_1..z_M), side slowest, z_M fastest —
    // index k+1 ends up with the product of the sizes after terminal k, and
    // index 0 (side) with the product of all output sizes.
    let mut obs_strides = vec![1usize; m + 1];
    for k in (0..m).rev() {
        obs_strides[k] = obs_strides[k + 1] * z_sizes[k];
    }
    let obs_cells = side_size * obs_strides[0];

    // Walk every obs cell, decode its coordinates, and read each needed
    // marginal by multi-index.
    let mut side_z_names: Vec<&str> = Vec::new();
    if let Some(s) = side {
        side_z_names.push(s);
    }
    side_z_names.extend(&z_names);
    let obs_marg = blended.marginalize(&side_z_names)?; // order: side?, z1..zM
    let decode_obs = |cell: usize| -> Vec<usize> {
        let mut coords = Vec::with_capacity(m + 1);
        coords.push(cell / obs_strides[0] % side_size);
        for t in 0..m {
            coords.push(cell / obs_strides[t + 1] % z_sizes[t]);
        }
        coords // [side, z1..zM], side coordinate 0 when absent
    };
    // obs_marg's flat index for a coords vector ([side?, z...]).
    let obs_marg_strides = obs_marg.strides();
    let has_side = side.is_some();
    let obs_flat = |coords: &[usize]| -> usize {
        let mut f = 0usize;
        let mut k = 0usize;
        if has_side {
            f += coords[0] * obs_marg_strides[k];
            k += 1;
        }
        for t in 0..m {
            f += coords[t + 1] * obs_marg_strides[k];
            k += 1;
        }
        f
    };
    let ln_obs: Vec<f64> = obs_marg
        .probs()
        .iter()
        .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
        .collect();

    // Per-terminal and per-group marginals we need, cached by mask.
    let ln_group = |mask: u32| -> Result<(Vec<f64>, Vec<usize>)> {
        // ln P of (z_t : t in mask), indexed by the group's flat cell with
        // members ordered by terminal index; also returns member sizes'
        // strides.
        let names: Vec<&str> = (0..m).filter(|t| mask >> t & 1 == 1).map(|t| z_names[t]).collect();
        let marg = blended.marginalize(&names)?;
        let lp = marg
            .probs()
            .iter()
            .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
            .collect();
        Ok((lp, marg.strides()))
    };
    let ln_side_group = |mask: u32| -> Result<(Vec<f64>, Vec<usize>, bool)> {
        // ln P(side, z_t : t in mask); bool marks whether side is present.
        let mut names: Vec<&str> = Vec::new();
        if let Some(s) = side {
            names.push(s);
        }
        names.extend((0..m).filter(|t| mask >> t & 1 == 1).map(|t| z_names[t]));
        if names.is_empty() {
            // No side, empty complement: the scalar law, ln P = 0.
            return Ok((vec![0.0], vec![], false));
        }
        let marg = blended.marginalize(&names)?;
        let lp: Vec<f64> = marg
            .probs()
            .iter()
            .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
            .collect();
        Ok((lp, marg.strides(), side.is_some()))
    };

    let mut checks = Vec::new();
    for mask in 1u32..(1 << m) {
        let members: Vec<usize> = (0..m).filter(|t| mask >> t & 1 == 1).collect();
        // Cutoffs: least component value of each quantity, minus gamma4.
        let mut multi_val = f64::INFINITY;
        let mut cross_val = f64::INFINITY;
        for (sys, _) in systems {
            let zn: Vec<&str> = sys.z_vars();
            let in_z: Vec<&str> = members.iter().map(|&t| zn[t]).collect();
            let mut known: Vec<&str> = (0..m)
                .filter(|t| mask >> t & 1 == 0)
                .map(|t| zn[t])
                .collect();
            if let Some(s) = sys.side() {
                known.push(s);
            }
            multi_val = multi_val.min(classical::multi_info(sys.joint(), &in_z)?);
            cross_val = cross_val.min(classical::mutual_info(sys.joint(), &in_z, &known)?);
        }

        // Density tables over obs cells.
        let (group_lp, group_strides) = ln_group(mask)?;
        let comp_mask = !mask & ((1u32 << m) - 1);
        let (rest_lp, rest_strides, rest_has_side) = ln_side_group(comp_mask)?;
        let singles: Vec<(Vec<f64>, usize)> = members
            .iter()
            .map(|&t| {
                let marg = blended.marginalize(&[z_names[t]])?;
                let lp: Vec<f64> = marg
                    .probs()
                    .iter()
                    .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
                    .collect();
                Ok((lp, t))
            })
            .collect::<Result<_>>()?;

        let mut multi_table = if members.len() > 1 {
            Some(vec![0.0f64; obs_cells])
        } else {
            None
        };
        let mut cross_table = vec![0.0f64; obs_cells];
        for cell in 0..obs_cells {
            let coords = decode_obs(cell);
            // Group flat index (members in ascending terminal order).
            let mut gf = 0usize;
            for (k, &t) in members.iter().enumerate() {
                gf += coords[t + 1] * group_strides[k];
            }
            let ln_g = group_lp[gf];
            if let Some(tab) = multi_table.as_mut() {
                let mut v = ln_g;
                for (lp, t) in &singles {
                    v -= lp[coords[t + 1]];
                }
                // inf - inf on zero-mass cells: correct tuples never land
                // there, so rejection is the right reading.
                tab[cell] = if v.is_nan() { f64::NEG_INFINITY } else { v };
            }
            // Complement-with-side flat index.
            let mut rf = 0usize;
            let mut k = 0usize;
            if rest_has_side {
                rf += coords[0] * rest_strides[k];
                k += 1;
            }
            for t in 0..m {
                if comp_mask >> t & 1 == 1 {
                    rf += coords[t + 1] * rest_strides[k];
                    k += 1;
                }
            }
            let v = ln_obs[obs_flat(&coords)] - ln_g - rest_lp[rf];
            cross_table[cell] = if v.is_nan() { f64::NEG_INFINITY } else { v };
        }
        checks.push(MaskCheck {
            multi_table,
            multi_cutoff_sum: (n as f64) * (multi_val - slacks.gamma4),
            cross_table,
            cross_cutoff_sum: (n as f64) * (cross_val - slacks.gamma4),
        });
    }
    Ok(Thresholds {
        m,
        obs_strides,
        checks,
        distortion_cutoffs: targets.iter().map(|&(_, d)| d + slacks.gamma1).collect(),
    })
}

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeOutcome {
    /// Exactly one codeword tuple matched the bins and every threshold.
    Unique { words: Vec<u32> },
    NoSurvivor,
    Multiple,
}

/// Enumerates codeword tuples matching the received bins, keeps those whose
/// every subset density clears its cutoff, and succeeds only on a unique
/// survivor. `side_block` must be given exactly when the system has side
/// information.
pub fn decode(
    side_block: Option<&[usize]>,
    bins: &[u64],
    quantizers: &[Quantizer],
    binmaps: &[BinMap],
    thresholds: &Thresholds,
    tuple_cap: u64,
) -> Result<DecodeOutcome> {
    let m = thresholds.m;
    debug_assert_eq!(bins.len(), m);
    let n = quantizers[0].codebook.n as usize;
    // Candidate codewords per terminal: right bin, passes its screen.
    let mut candidates: Vec<Vec<u32>> = Vec::with_capacity(m);
    for t in 0..m {
        let list: Vec<u32> = binmaps[t]
            .in_bin(bins[t])
            .filter(|&w| quantizers[t].codebook.screen_pass(w as usize))
            .collect();
        if list.is_empty() {
            return Ok(DecodeOutcome::NoSurvivor);
        }
        candidates.push(list);
    }
    let tuple_count: u64 = candidates
        .iter()
        .map(|c| c.len() as u64)
        .try_fold(1u64, |a, b| a.checked_mul(b))
        .unwrap_or(u64::MAX);
    if tuple_count > tuple_cap {
        return Err(Error::BudgetExceeded {
            context: "decoder tuple enumeration".into(),
            needed: tuple_count,
            budget: tuple_cap,
        });
    }

    // Side contribution to each position's observable cell.
    let side_base: Vec<usize> = match side_block {
        Some(s) => {
            debug_assert_eq!(s.len(), n);
            s.iter().map(|&si| si * thresholds.obs_strides[0]).collect()
        }
        None => vec![0; n],
    };

    let mut survivor: Option<Vec<u32>> = None;
    let mut odometer = vec![0usize; m];
    'tuples: loop {
        let words: Vec<&[u8]> = (0..m)
            .map(|t| quantizers[t].codebook.word(candidates[t][odometer[t]] as usize))
            .collect();
        // Accumulate every check's density over positions.
        let mut ok = true;
        'checks: for check in &thresholds.checks {
            let mut multi_sum = 0.0f64;
            let mut cross_sum = 0.0f64;
            for i in 0..n {
                let mut cell = side_base[i];
                for (t, w) in words.iter().enumerate() {
                    cell += (w[i] as usize) * thresholds.obs_strides[t + 1];
                }
                if let Some(tab) = &check.multi_table {
                    multi_sum += tab[cell];
                }
                cross_sum += check.cross_table[cell];
            }
            if check.multi_table.is_some() && multi_sum < check.multi_cutoff_sum {
                ok = false;
                break 'checks;
            }
            if cross_sum < check.cross_cutoff_sum {
                ok = false;
                break 'checks;
            }
        }
        if ok {
            let tuple: Vec<u32> = (0..m).map(|t| candidates[t][odometer[t]]).collect();
            if survivor.is_some() {
                return Ok(DecodeOutcome::Multiple);
            }
            survivor = Some(tuple);
        }
        // Advance odometer.
        for t in (0..m).rev() {
            odometer[t] += 1;
            if odometer[t] < candidates[t].len() {
                continue 'tuples;
            }
            odometer[t] = 0;
        }
        break;
    }
    Ok(match survivor {
        Some(words) => DecodeOutcome::Unique { words },
        None => DecodeOutcome::NoSurvivor,
    })
}

// ---------------------------------------------------------------------------
// Experiment
// ---------------------------------------------------------------------------

/// Measured outcomes of one experiment. A trial is an error when some
/// blockwise distortion exceeds D_k + gamma1, with failed trials scored at
/// infinite distortion; so with every target infinite, p_error is exactly 0.
/// Mean/max distortion cover completed (uniquely decoded) trials only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorStats {
    pub n: u32,
    pub trials: u64,
    pub errors: u64,
    pub p_error: f64,
    /// 95% Wilson confidence halfwidth for p_error.
    pub ci_halfwidth: f64,
    pub quantizer_failures: u64,
    pub decode_failures: u64,
    pub decode_failures_none: u64,
    pub decode_failures_multiple: u64,
    /// Unique decodes whose tuple differs from the transmitted one.
    pub wrong_decodes: u64,
    pub distortion_violations: u64,
    pub completed: u64,
    pub mean_distortion: Vec<f64>,
    pub max_distortion: Vec<f64>,
}

struct TrialOutcome {
    quantizer_failure: bool,
    decode_none: bool,
    decode_multiple: bool,
    wrong: bool,
    violated: bool,
    error: bool,
    distortions: Option<Vec<f64>>,
}

/// Runs the full pipeline: sample, quantize, bin, decode, reconstruct,
/// measure. Deterministic in (config, model, channels, targets): trials use
/// independent streams of one seeded generator and aggregate in trial order.
pub fn run_experiment(
    model: &SourceModel,
    channels: &[Channel],
    targets: &[(DistortionMeasure, f64)],
    config: &CodecConfig,
) -> Result<ErrorStats> {
    if matches!(model.kind(), SourceKind::Explicit { .. }) {
        return Err(Error::InvalidConfig {
            context: "binning experiments need a memoryless or mixed model".into(),
        });
    }
    let terminal_vars = model.terminal_vars();
    let m = terminal_vars.len();
    if channels.len() != m {
        return Err(Error::ShapeMismatch {
            got: channels.len(),
            want: m,
        });
    }
    config.validate(m)?;
    if targets.is_empty() {
        return Err(Error::InvalidConfig {
            context: "at least one distortion target is required".into(),
        });
    }
    let x_names: Vec<&str> = terminal_vars.iter().map(|v| v.name.as_str()).collect();
    let x_sizes: Vec<usize> = terminal_vars.iter().map(|v| v.alphabet.len()).collect();
    for (measure, target) in targets {
        if measure.x_sizes() != x_sizes.as_slice() {
            return Err(Error::AlphabetMismatch {
                context: format!(
                    "distortion table over {:?}, terminals have {:?}",
                    measure.x_sizes(),
                    x_sizes
                ),
            });
        }
        if target.is_nan() || *target < 0.0 {
            return Err(Error::InvalidConfig {
                context: format!("distortion target {target} must be nonnegative"),
            });
        }
    }
    let side = model.side_info();

    // Compose per component and blend; all single-letter quantities and
    // decoder tables come from these.
    let components = model.components();
    let mut systems = Vec::with_capacity(components.len());
    for (base, w) in &components {
        systems.push((
            ChannelSystem::compose(base, &x_names, side, channels)?,
            *w,
        ));
    }
    let blended = blend(&systems)?;
    let z_names: Vec<&str> = systems[0].0.z_vars();

    // Per-terminal informations across components.
    let mut quantizers = Vec::with_capacity(m);
    for t in 0..m {
        let mut inf_rate = f64::INFINITY;
        let mut sup_rate = f64::NEG_INFINITY;
        for (sys, _) in &systems {
            let zn: Vec<&str> = sys.z_vars();
            let i = classical::mutual_info(sys.joint(), &[x_names[t]], &[zn[t]])?;
            inf_rate = inf_rate.min(i);
            sup_rate = sup_rate.max(i);
        }
        let pz = blended.marginalize(&[z_names[t]])?.probs().to_vec();
        let density = density_table(x_sizes[t], &channels[t], &pz);
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        rng.set_stream(1000 + t as u64);
        quantizers.push(build_quantizer_with(
            &pz,
            density,
            inf_rate,
            sup_rate,
            config.n,
            config.slacks.gamma2,
            &mut rng,
            t,
        )?);
    }
    let binmaps: Vec<BinMap> = (0..m)
        .map(|t| {
            assign_bins(
                quantizers[t].codebook.size(),
                config.n,
                config.rates[t],
                config.slacks.gamma1,
                config.seed,
                t,
            )
        })
        .collect();
    let thresholds = build_thresholds(&systems, &blended, config.n, &config.slacks, targets)?;

    // Decoder tables, one per measure, built on the blended law.
    let x_var_names: Vec<String> = x_names.iter().map(|s| s.to_string()).collect();
    let z_var_names: Vec<String> = z_names.iter().map(|s| s.to_string()).collect();
    let recons: Vec<ReconMap> = targets
        .iter()
        .map(|(measure, _)| {
            optimal_recon(&blended, &x_var_names, &z_var_names, side, measure).map(|(r, _)| r)
        })
        .collect::<Result<_>>()?;

    // Variable positions in sampled blocks (declaration order).
    let var_names: Vec<&str> = model.vars().iter().map(|v| v.name.as_str()).collect();
    let x_pos: Vec<usize> = x_names
        .iter()
        .map(|xn| var_names.iter().position(|v| v == xn).unwrap())
        .collect();
    let side_pos = side.map(|s| var_names.iter().position(|v| *v == s).unwrap());
    let mut x_strides = vec![1usize; m];
    for i in (0..m.saturating_sub(1)).rev() {
        x_strides[i] = x_strides[i + 1] * x_sizes[i + 1];
    }
    let any_finite_target = targets.iter().any(|&(_, d)| d.is_finite());
    let law = model.law(config.n)?;
    let n = config.n as usize;

    let outcomes: Vec<Result<TrialOutcome>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
            rng.set_stream(1_000_000 + trial);
            let block = law.sample(&mut rng);
            let side_block = side_pos.map(|p| block[p].as_slice());

            // Quantize every terminal.
            let mut q_words = Vec::with_capacity(m);
            for t in 0..m {
                match quantizers[t].encode(&block[x_pos[t]]) {
                    Some(w) => q_words.push(w),
                    None => {
                        return Ok(TrialOutcome {
                            quantizer_failure: true,
                            decode_none: false,
                            decode_multiple: false,
                            wrong: false,
                            violated: false,
                            error: any_finite_target,
                            distortions: None,
                        })
                    }
                }
            }
            let bins: Vec<u64> = (0..m).map(|t| binmaps[t].bin_of(q_words[t])).collect();
            let outcome = decode(
                side_block,
                &bins,
                &quantizers,
                &binmaps,
                &thresholds,
                config.tuple_cap,
            )?;
            let words = match outcome {
                DecodeOutcome::NoSurvivor => {
                    return Ok(TrialOutcome {
                        quantizer_failure: false,
                        decode_none: true,
                        decode_multiple: false,
                        wrong: false,
                        violated: false,
                        error: any_finite_target,
                        distortions: None,
                    })
                }
                DecodeOutcome::Multiple => {
                    return Ok(TrialOutcome {
                        quantizer_failure: false,
                        decode_none: false,
                        decode_multiple: true,
                        wrong: false,
                        violated: false,
                        error: any_finite_target,
                        distortions: None,
                    })
                }
                DecodeOutcome::Unique { words } => words,
            };
            // Soundness: the survivor must sit in the transmitted bins.
            for t in 0..m {
                assert_eq!(
                    binmaps[t].bin_of(words[t]),
                    bins[t],
                    "decoded word outside its bin"
                );
            }
            let wrong = words != q_words;
            // Componentwise reconstruction and blockwise distortion.
            let mut dists = Vec::with_capacity(targets.len());
            let mut violated = false;
            for (k, (measure, _)) in targets.iter().enumerate() {
                let mut total = 0.0f64;
                for i in 0..n {
                    let mut cell = side_block
                        .map(|s| s[i] * thresholds.obs_strides[0])
                        .unwrap_or(0);
                    let mut xflat = 0usize;
                    for t in 0..m {
                        let w = quantizers[t].codebook.word(words[t] as usize);
                        cell += (w[i] as usize) * thresholds.obs_strides[t + 1];
                        xflat += block[x_pos[t]][i] * x_strides[t];
                    }
                    // Survivors clear every density cutoff, so each of their
                    // per-letter cells has blended mass and a defined entry.
                    let y = recons[k]
                        .get(cell)
                        .expect("survivor tuple reached a zero-mass cell");
                    total += measure.value(xflat, y);
                }
                let d = total / n as f64;
                if d > thresholds.distortion_cutoffs[k] {
                    violated = true;
                }
                dists.push(d);
            }
            Ok(TrialOutcome {
                quantizer_failure: false,
                decode_none: false,
                decode_multiple: false,
                wrong,
                violated,
                error: violated,
                distortions: Some(dists),
            })
        })
        .collect();

    // Order-preserving fold keeps the statistics independent of threading.
    let mut errors = 0u64;
    let mut qf = 0u64;
    let mut none = 0u64;
    let mut multiple = 0u64;
    let mut wrong = 0u64;
    let mut violations = 0u64;
    let mut completed = 0u64;
    let mut mean_d = vec![0.0f64; targets.len()];
    let mut max_d = vec![0.0f64; targets.len()];
    for outcome in outcomes {
        let o = outcome?;
        errors += o.error as u64;
        qf += o.quantizer_failure as u64;
        none += o.decode_none as u64;
        multiple += o.decode_multiple as u64;
        wrong += o.wrong as u64;
        violations += o.violated as u64;
        if let Some(d) = o.distortions {
            completed += 1;
            for k in 0..d.len() {
                mean_d[k] += d[k];
                max_d[k] = max_d[k].max(d[k]);
            }
        }
    }
    if completed > 0 {
        for v in &mut mean_d {
            *v /= completed as f64;
        }
    }
    let trials = config.trials;
    let p = errors as f64 / trials as f64;
    Ok(ErrorStats {
        n: config.n,
        trials,
        errors,
        p_error: p,
        ci_halfwidth: wilson_halfwidth(p, trials),
        quantizer_failures: qf,
        decode_failures: none + multiple,
        decode_failures_none: none,
        decode_failures_multiple: multiple,
        wrong_decodes: wrong,
        distortion_violations: violations,
        completed,
        mean_distortion: mean_d,
        max_distortion: max_d,
    })
}

fn wilson_halfwidth(p: f64, n: u64) -> f64 {
    let nf = n as f64;
    let z = WILSON_Z;
    z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / (1.0 + z * z / nf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{dsbs, Alphabet};

    fn hamming_targets(x_sizes: &[usize], ds: &[f64]) -> Vec<(DistortionMeasure, f64)> {
        ds.iter()
            .enumerate()
            .map(|(t, &d)| (DistortionMeasure::hamming(x_sizes, t).unwrap(), d))
            .collect()
    }

    fn dsbs_model(p: f64) -> SourceModel {
        SourceModel::iid(dsbs(p, "X1", "X2").unwrap(), None).unwrap()
    }

    fn identity_channels() -> Vec<Channel> {
        vec![
            Channel::identity(&Alphabet::binary(), 2).unwrap(),
            Channel::identity(&Alphabet::binary(), 2).unwrap(),
        ]
    }

    fn relaxed_config(n: u32, rates: Vec<f64>, trials: u64, seed: u64) -> CodecConfig {
        // The slack geometry that makes desk-scale blocklengths workable:
        // generous distortion/bin padding, loose decoder cutoffs.
        let mut c = CodecConfig::new(n, rates, trials, seed);
        c.slacks = Slacks {
            gamma1: 0.35,
            gamma2: 0.15,
            gamma3: 0.33,
            gamma4: 0.33,
        };
        c.enforce_slack_relation = false;
        c
    }

    #[test]
    fn bin_count_law() {
        let bm = assign_bins(10, 10, 0.0, 0.1, 7, 0);
        assert_eq!(bm.bins, 3); // ceil(e^{10 * 0.1})
        let bm = assign_bins(10, 4, 0.5852, 0.1, 7, 0);
        assert_eq!(bm.bins, 16); // ceil(e^{4 * 0.6852}) = ceil(15.5)
        for w in 0..10u32 {
            assert!(bm.bin_of(w) < bm.bins);
        }
    }

    #[test]
    fn bin_lookup_agrees_with_assignment() {
        let bm = assign_bins(500, 8, 0.2, 0.1, 3, 1);
        for b in 0..bm.bins {
            let listed: Vec<u32> = bm.in_bin(b).collect();
            let direct: Vec<u32> = (0..500u32).filter(|&w| bm.bin_of(w) == b).collect();
            assert_eq!(listed, direct);
        }
    }

    #[test]
    fn bin_occupancy_is_uniform_by_chi_square() {
        // 10^4 codewords into 16 bins; chi-square(15) 99.9% quantile.
        let bm = assign_bins(10_000, 4, 0.5852, 0.1, 42, 0);
        assert_eq!(bm.bins, 16);
        let mut counts = vec![0u64; 16];
        for w in 0..10_000u32 {
            counts[bm.bin_of(w) as usize] += 1;
        }
        let expected = 10_000.0 / 16.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 <= 37.697, "chi-square statistic {chi2}");
    }

    #[test]
    fn identity_quantizer_encodes_to_equal_codeword() {
        let channel = Channel::identity(&Alphabet::binary(), 2).unwrap();
        let q = build_quantizer(&[0.5, 0.5], &channel, 8, 0.4, 9, 0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut encoded = 0u32;
        for _ in 0..200 {
            let x: Vec<usize> = (0..8).map(|_| (rng.random::<f64>() < 0.5) as usize).collect();
            if let Some(w) = q.encode(&x) {
                let word: Vec<usize> = q.codebook.word(w as usize).iter().map(|&b| b as usize).collect();
                assert_eq!(word, x, "identity encoder must match the block exactly");
                encoded += 1;
            }
        }
        // Codebook has ceil(e^{8(ln2+0.4)}) ≈ 6300 words over 256 blocks, so
        // nearly every block is present.
        assert!(encoded >= 195, "only {encoded}/200 encoded");
    }

    #[test]
    fn covering_failure_matches_exact_binomial_and_decreases_in_n() {
        // Oracle: a random codeword disagrees with the block in Bin(n, 1/2)
        // positions, is accepted iff disagreements stay under the density
        // threshold, and the codebook misses iff all `size` draws miss.
        // Averaged over 30 independent codebooks, since any single small
        // codebook's failure rate scatters a few percent around the mean.
        let channel = Channel::bsc(0.2).unwrap();
        let px = [0.5, 0.5];
        let agree = (2.0f64 * 0.8).ln();
        let disagree = (2.0f64 * 0.2).ln();
        let info = 0.8 * agree + 0.2 * disagree;
        let gamma2 = 0.05;
        let mut prev = f64::INFINITY;
        for n in [8u32, 12, 16] {
            let nf = n as f64;
            let size = (nf * (info + gamma2)).exp().ceil() as u64;
            // Exact single-draw acceptance probability.
            let mut accept = 0.0f64;
            for k in 0..=n {
                let density = agree * (nf - k as f64) + disagree * k as f64;
                if density >= nf * (info - gamma2) {
                    let mut c = 1.0f64;
                    for j in 0..k {
                        c = c * (nf - j as f64) / (j as f64 + 1.0);
                    }
                    accept += c * 0.5f64.powi(n as i32);
                }
            }
            let exact_failure = (1.0 - accept).powi(size as i32);
            let mut failures = 0u32;
            let mut trials = 0u32;
            for book in 0..30u64 {
                let q = build_quantizer(&px, &channel, n, gamma2, 100 * n as u64 + book, 0)
                    .unwrap();
                assert_eq!(q.codebook.size() as u64, size);
                let mut rng = ChaCha12Rng::seed_from_u64(5 + book);
                for _ in 0..300 {
                    let x: Vec<usize> =
                        (0..n).map(|_| (rng.random::<f64>() < 0.5) as usize).collect();
                    if q.encode(&x).is_none() {
                        failures += 1;
                    }
                    trials += 1;
                }
            }
            let rate = failures as f64 / trials as f64;
            assert!(
                (rate - exact_failure).abs() < 0.02,
                "n={n}: observed {rate}, exact {exact_failure}"
            );
            assert!(rate < prev, "failure rate must fall with n");
            prev = rate;
        }
    }

    #[test]
    fn generous_slack_drives_covering_failure_below_one_percent() {
        let channel = Channel::bsc(0.2).unwrap();
        let q = build_quantizer(&[0.5, 0.5], &channel, 12, 0.3, 17, 0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let trials = 10_000;
        let mut failures = 0u32;
        for _ in 0..trials {
            let x: Vec<usize> = (0..12).map(|_| (rng.random::<f64>() < 0.5) as usize).collect();
            if q.encode(&x).is_none() {
                failures += 1;
            }
        }
        assert!(
            (failures as f64 / trials as f64) < 0.01,
            "failure rate {failures}/10000"
        );
    }

    #[test]
    fn slack_relation_is_enforced_by_default() {
        let model = dsbs_model(0.11);
        let mut config = CodecConfig::new(8, vec![1.0, 1.0], 10, 1);
        config.slacks.gamma4 = 0.05; // breaks gamma2 = gamma4
        let err = run_experiment(
            &model,
            &identity_channels(),
            &hamming_targets(&[2, 2], &[0.0, 0.0]),
            &config,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { .. }));
        config.enforce_slack_relation = false;
        run_experiment(
            &model,
            &identity_channels(),
            &hamming_targets(&[2, 2], &[0.0, 0.0]),
            &config,
        )
        .unwrap();
    }

    #[test]
    fn experiment_is_reproducible() {
        let model = dsbs_model(0.11);
        let config = relaxed_config(10, vec![0.6, 0.85], 150, 99);
        let t = hamming_targets(&[2, 2], &[0.0, 0.0]);
        let a = run_experiment(&model, &identity_channels(), &t, &config).unwrap();
        let b = run_experiment(&model, &identity_channels(), &t, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn accounting_identity_holds() {
        let model = dsbs_model(0.11);
        // Rates near the boundary so every failure mode appears.
        let config = relaxed_config(10, vec![0.40, 0.72], 400, 12);
        let t = hamming_targets(&[2, 2], &[0.0, 0.0]);
        let s = run_experiment(&model, &identity_channels(), &t, &config).unwrap();
        assert_eq!(
            s.errors,
            s.quantizer_failures + s.decode_failures + s.distortion_violations,
            "{s:?}"
        );
        assert_eq!(s.decode_failures, s.decode_failures_none + s.decode_failures_multiple);
        assert_eq!(
            s.completed,
            s.trials - s.quantizer_failures - s.decode_failures
        );
        assert!(s.p_error >= 0.0 && s.p_error <= 1.0);
        assert!(s.ci_halfwidth > 0.0 && s.ci_halfwidth < 0.1);
    }

    #[test]
    fn infinite_targets_make_the_error_event_vacuous() {
        let model = dsbs_model(0.11);
        // Starved rates: decoding fails often, yet nothing counts as error.
        let config = relaxed_config(8, vec![0.05, 0.05], 60, 4);
        let t = hamming_targets(&[2, 2], &[f64::INFINITY, f64::INFINITY]);
        let s = run_experiment(&model, &identity_channels(), &t, &config).unwrap();
        assert!(s.decode_failures > 0, "want failures to witness vacuity");
        assert_eq!(s.p_error, 0.0);
        assert_eq!(s.errors, 0);
    }

    #[test]
    fn huge_rates_give_unique_decoding_and_zero_distortion() {
        // Near-injective binning (one codeword per bin with overwhelming
        // probability) plus subset cutoffs slack enough to never reject the
        // transmitted tuple at this short blocklength: every completed trial
        // must decode it and, with identity channels and D = 0, reconstruct
        // the block exactly.
        let model = dsbs_model(0.11);
        let mut config = relaxed_config(8, vec![1.6, 1.6], 200, 31);
        config.slacks.gamma4 = 2.5;
        let t = hamming_targets(&[2, 2], &[0.0, 0.0]);
        let s = run_experiment(&model, &identity_channels(), &t, &config).unwrap();
        assert_eq!(s.decode_failures, 0, "{s:?}");
        assert_eq!(s.wrong_decodes, 0);
        assert!(s.completed > 0);
        assert_eq!(s.max_distortion, vec![0.0, 0.0]);
        assert_eq!(s.errors, s.quantizer_failures);
    }

    #[test]
    fn more_rate_never_hurts_decoding() {
        let model = dsbs_model(0.11);
        let t = hamming_targets(&[2, 2], &[0.0, 0.0]);
        let base_rates = vec![0.50, 0.80];
        let more_rates = vec![0.60, 0.90];
        let mut worse = 0;
        for seed in [1u64, 2, 3] {
            let a = run_experiment(
                &model,
                &identity_channels(),
                &t,
                &relaxed_config(10, base_rates.clone(), 300, seed),
            )
            .unwrap();
            let b = run_experiment(
                &model,
                &identity_channels(),
                &t,
                &relaxed_config(10, more_rates.clone(), 300, seed),
            )
            .unwrap();
            // Allow the paired runs one halfwidth of noise.
            let slack = (a.ci_halfwidth + b.ci_halfwidth) * 300.0;
            if b.decode_failures as f64 > a.decode_failures as f64 + slack {
                worse += 1;
            }
        }
        assert_eq!(worse, 0, "extra rate regressed decoding");
    }

    #[test]
    fn starved_sum_rate_fails_most_trials() {
        // Sum rate well below the lossless requirement: the decoder sees
        // many candidates per bin and almost never isolates one.
        let model = dsbs_model(0.11);
        let config = relaxed_config(12, vec![0.20, 0.35], 200, 8);
        let t = hamming_targets(&[2, 2], &[0.0, 0.0]);
        let s = run_experiment(&model, &identity_channels(), &t, &config).unwrap();
        assert!(
            s.p_error > 0.5,
            "expected mostly errors at starved rates, got {s:?}"
        );
    }

    #[test]
    fn mixture_model_runs_and_accounts() {
        let a = dsbs(0.05, "X1", "X2").unwrap();
        let b = dsbs(0.20, "X1", "X2").unwrap();
        let model = SourceModel::mixed(0.5, a, b, None).unwrap();
        let config = relaxed_config(8, vec![0.9, 1.0], 150, 77);
        let t = hamming_targets(&[2, 2], &[0.0, 0.0]);
        let s = run_experiment(&model, &identity_channels(), &t, &config).unwrap();
        assert_eq!(
            s.errors,
            s.quantizer_failures + s.decode_failures + s.distortion_violations
        );
        assert!(s.completed > 0);
    }

    #[test]
    fn side_information_decoding_works_at_conditional_rate() {
        // Lossless coding of X given side info S at rate H(X|S) + margin.
        let model = SourceModel::iid(dsbs(0.11, "X", "S").unwrap(), Some("S")).unwrap();
        let channels = vec![Channel::identity(&Alphabet::binary(), 2).unwrap()];
        let h_cond = {
            let p: f64 = 0.11;
            -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
        };
        let config = relaxed_config(12, vec![h_cond + 0.15], 300, 50);
        let t = vec![(DistortionMeasure::hamming(&[2], 0).unwrap(), 0.0)];
        let s = run_experiment(&model, &channels, &t, &config).unwrap();
        assert!(
            s.p_error < 0.3,
            "conditional-rate decoding should mostly work: {s:?}"
        );
        // And starving the rate far below H(X|S) must break it.
        let starved = relaxed_config(12, vec![0.02], 300, 50);
        let s2 = run_experiment(&model, &channels, &t, &starved).unwrap();
        assert!(s2.p_error > s.p_error + 0.2, "{} vs {}", s2.p_error, s.p_error);
    }

    #[test]
    fn budget_exceeded_on_tuple_explosion() {
        let model = dsbs_model(0.11);
        let mut config = relaxed_config(12, vec![0.0, 0.0], 5, 2);
        config.tuple_cap = 10;
        let t = hamming_targets(&[2, 2], &[0.0, 0.0]);
        let err = run_experiment(&model, &identity_channels(), &t, &config).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }), "{err:?}");
    }

    #[test]
    fn explicit_models_are_rejected() {
        use std::collections::BTreeMap;
        let vars = vec![crate::prob::Variable::new("X", Alphabet::binary())];
        let mut tables = BTreeMap::new();
        tables.insert(
            2u32,
            JointPmf::new(
                crate::model::tuple_vars(&vars, 2),
                vec![0.25, 0.25, 0.25, 0.25],
            )
            .unwrap(),
        );
        let model = SourceModel::explicit(vars, tables, None).unwrap();
        let config = CodecConfig::new(2, vec![1.0], 5, 1);
        let channels = vec![Channel::identity(&Alphabet::binary(), 2).unwrap()];
        let err = run_experiment(
            &model,
            &channels,
            &[(DistortionMeasure::hamming(&[2], 0).unwrap(), 0.0)],
            &config,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { .. }));
    }

    #[test]
    fn wilson_halfwidth_spot_values() {
        // Against direct evaluation of the closed form.
        let w = wilson_halfwidth(0.5, 100);
        assert!((w - 0.09617).abs() < 5e-4, "{w}");
        let w0 = wilson_halfwidth(0.0, 2000);
        assert!(w0 > 0.0 && w0 < 2e-3, "{w0}");
    }
}
