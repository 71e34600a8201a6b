//! Subcommand bodies. Each writes its artifacts under --out-dir and writes
//! manifest.json strictly last; a manifest on disk means the run finished.
//! Failures mid-sweep keep whatever already completed but emit no manifest.

use crate::artifact::{
    load_model, parse_json_file, sibling, subset_label, AchievingDoc, ChannelsDoc, CornerDoc,
    ExperimentDoc, ManifestBuilder, TargetDoc,
};
use crate::emit::{self, SwRow};
use crate::{
    vlog, CliResult, Failure, RegionArgs, SimulateArgs, SpectrumArgs, SwCheckArgs,
};
use mtrd_core::{
    classical, Channel, CodecConfig, DensityKind, DistortionMeasure, ErrorStats, JointPmf,
    SearchParams, Slacks, SourceKind, SourceModel, Variable,
};
use std::fs;
use std::path::Path;

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

pub fn spectrum(a: &SpectrumArgs, out_dir: &Path, argv: &[String]) -> CliResult {
    fs::create_dir_all(out_dir)?;
    if !(a.epsilon > 0.0 && a.epsilon < 0.5) {
        return Err(Failure::Input(format!(
            "epsilon {} outside (0, 0.5)",
            a.epsilon
        )));
    }
    let model = load_model(&a.model)?;
    let kind = parse_kind(&a.kind)?;
    let mut manifest = ManifestBuilder::new(argv, &a.model, 0);
    let mut spectra = Vec::new();
    for &n in &a.n_grid {
        vlog!("spectrum: n={n}");
        match mtrd_core::density_spectrum(&model, &[], n, &kind, a.budget) {
            Ok(sp) => spectra.push(sp),
            Err(e) => {
                // Keep finished grids; without a manifest the run reads as
                // interrupted.
                if !spectra.is_empty() {
                    emit::write_spectrum_csv(&out_dir.join("spectrum.csv"), &spectra)?;
                }
                return Err(e.into());
            }
        }
    }
    let est = mtrd_core::spectral_proxies(&spectra, a.epsilon)?;
    emit::write_spectrum_csv(&out_dir.join("spectrum.csv"), &spectra)?;
    manifest.add("spectrum.csv");
    emit::write_json(&out_dir.join("proxies.json"), &est)?;
    manifest.add("proxies.json");
    println!("sup_proxy_nats {:.9}", est.sup_proxy);
    println!("inf_proxy_nats {:.9}", est.inf_proxy);
    manifest.finish(out_dir)
}

fn parse_kind(s: &str) -> Result<DensityKind, Failure> {
    let bad = || {
        Failure::Input(format!(
            "cannot parse density kind `{s}`; expected entropy:V,.. | \
             cond-entropy:T,../G,.. | mutual:L,../R,.. | multi:V,.."
        ))
    };
    let names = |part: &str| -> Result<Vec<String>, Failure> {
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

// ---------------------------------------------------------------------------
// region / wz / mixed-region
// ---------------------------------------------------------------------------

#[derive(serde::Deserialize)]
struct MeasureDoc {
    y_size: usize,
    /// Flattened x-major then reconstruction symbol.
    table: Vec<f64>,
}

struct RegionSetup {
    model: SourceModel,
    names: Vec<String>,
    side: Option<String>,
    measures: Vec<DistortionMeasure>,
    targets: Vec<f64>,
    params: SearchParams,
}

impl RegionSetup {
    fn x_refs(&self) -> Vec<&str> {
        self.names.iter().map(String::as_str).collect()
    }

    fn pairs(&self) -> Vec<(DistortionMeasure, f64)> {
        self.measures
            .iter()
            .cloned()
            .zip(self.targets.iter().copied())
            .collect()
    }
}

fn region_setup(a: &RegionArgs) -> Result<RegionSetup, Failure> {
    let model = load_model(&a.model)?;
    let names: Vec<String> = model
        .terminal_vars()
        .iter()
        .map(|v| v.name.clone())
        .collect();
    let x_sizes: Vec<usize> = model
        .terminal_vars()
        .iter()
        .map(|v| v.alphabet.len())
        .collect();
    let side = model.side_info().map(str::to_string);
    let measures: Vec<DistortionMeasure> = if a.distortion == "hamming" {
        (0..names.len())
            .map(|t| DistortionMeasure::hamming(&x_sizes, t))
            .collect::<mtrd_core::Result<_>>()?
    } else {
        let docs: Vec<MeasureDoc> = parse_json_file(Path::new(&a.distortion))?;
        docs.into_iter()
            .map(|d| DistortionMeasure::new(x_sizes.clone(), d.y_size, d.table))
            .collect::<mtrd_core::Result<_>>()?
    };
    let targets = match &a.d {
        Some(d) => {
            if d.len() != measures.len() {
                return Err(Failure::Input(format!(
                    "{} distortion targets for {} measures",
                    d.len(),
                    measures.len()
                )));
            }
            d.clone()
        }
        None => vec![0.0; measures.len()],
    };
    if let Some(sizes) = &a.aux_size {
        if sizes.len() != names.len() {
            return Err(Failure::Input(format!(
                "{} aux sizes for {} terminals",
                sizes.len(),
                names.len()
            )));
        }
    }
    let params = SearchParams {
        aux_sizes: a.aux_size.clone(),
        restarts: a.restarts,
        seed: a.seed,
        ..SearchParams::default()
    };
    Ok(RegionSetup {
        model,
        names,
        side,
        measures,
        targets,
        params,
    })
}

/// frontier.csv + achieving.json + headline rate, manifest last.
fn write_frontier_outputs(
    frontier: &mtrd_core::RegionFrontier,
    components: &[(&JointPmf, f64)],
    setup: &RegionSetup,
    headline: &str,
    mut manifest: ManifestBuilder,
    out_dir: &Path,
) -> CliResult {
    emit::write_frontier_csv(&out_dir.join("frontier.csv"), frontier)?;
    manifest.add("frontier.csv");
    let doc = AchievingDoc::build(
        frontier,
        components,
        &setup.x_refs(),
        setup.side.as_deref(),
        &setup.measures,
    )?;
    emit::write_json(&out_dir.join("achieving.json"), &doc)?;
    manifest.add("achieving.json");
    match frontier.min_sum_rate() {
        Some(r) => println!("{headline} {r:.9}"),
        None => println!("no supported corners"),
    }
    println!("corners {}", frontier.corners.len());
    manifest.finish(out_dir)
}

pub fn region(a: &RegionArgs, out_dir: &Path, argv: &[String]) -> CliResult {
    fs::create_dir_all(out_dir)?;
    let setup = region_setup(a)?;
    match setup.model.kind() {
        SourceKind::Iid { .. } => {}
        SourceKind::Mixed { .. } => {
            return Err(Failure::Input(
                "model is a mixture; use `mixed-region`".into(),
            ))
        }
        SourceKind::Explicit { .. } => {
            return Err(Failure::Input(
                "region search needs a memoryless model".into(),
            ))
        }
    }
    let base = setup.model.single_letter()?;
    vlog!(
        "region: {} terminals, {} restarts",
        setup.names.len(),
        setup.params.restarts
    );
    let manifest = ManifestBuilder::new(argv, &a.model, setup.params.seed);
    let frontier = mtrd_core::search_region(
        &base,
        &setup.x_refs(),
        setup.side.as_deref(),
        &setup.pairs(),
        &setup.params,
    )?;
    write_frontier_outputs(
        &frontier,
        &[(&base, 1.0)],
        &setup,
        "min_sum_rate_nats",
        manifest,
        out_dir,
    )
}

pub fn wz(a: &RegionArgs, out_dir: &Path, argv: &[String]) -> CliResult {
    fs::create_dir_all(out_dir)?;
    let setup = region_setup(a)?;
    if !matches!(setup.model.kind(), SourceKind::Iid { .. }) {
        return Err(Failure::Input(
            "side-information coding needs a memoryless model".into(),
        ));
    }
    if setup.names.len() != 1 {
        return Err(Failure::Input(format!(
            "side-information coding takes exactly one terminal; model has {}",
            setup.names.len()
        )));
    }
    if setup.side.is_none() {
        return Err(Failure::Input(
            "model declares no side_info variable".into(),
        ));
    }
    if setup.measures.len() != 1 {
        return Err(Failure::Input(format!(
            "side-information coding takes one distortion measure, got {}",
            setup.measures.len()
        )));
    }
    let base = setup.model.single_letter()?;
    let manifest = ManifestBuilder::new(argv, &a.model, setup.params.seed);
    let frontier = mtrd_core::search_region(
        &base,
        &setup.x_refs(),
        setup.side.as_deref(),
        &setup.pairs(),
        &setup.params,
    )?;
    write_frontier_outputs(
        &frontier,
        &[(&base, 1.0)],
        &setup,
        "rate_nats",
        manifest,
        out_dir,
    )
}

pub fn mixed_region(a: &RegionArgs, out_dir: &Path, argv: &[String]) -> CliResult {
    fs::create_dir_all(out_dir)?;
    let setup = region_setup(a)?;
    if !matches!(setup.model.kind(), SourceKind::Mixed { .. }) {
        return Err(Failure::Input(
            "mixed-region needs a two-component mixture model".into(),
        ));
    }
    let manifest = ManifestBuilder::new(argv, &a.model, setup.params.seed);
    let frontier = mtrd_core::mixed_region(
        &setup.model,
        &setup.x_refs(),
        setup.side.as_deref(),
        &setup.pairs(),
        &setup.params,
    )?;
    let components = setup.model.components();
    write_frontier_outputs(
        &frontier,
        &components,
        &setup,
        "min_sum_rate_nats",
        manifest,
        out_dir,
    )
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn simulate(a: &SimulateArgs, out_dir: &Path, argv: &[String]) -> CliResult {
    fs::create_dir_all(out_dir)?;
    let doc = ExperimentDoc::load(&a.config)?;
    let model = load_model(&sibling(&a.config, &doc.model))?;
    let terminal_vars = model.terminal_vars();
    let m = terminal_vars.len();
    let x_sizes: Vec<usize> = terminal_vars.iter().map(|v| v.alphabet.len()).collect();

    // Channels, possibly replayed from a frontier run's corner (which then
    // also supplies default rates).
    let mut replay_rates: Option<Vec<f64>> = None;
    let channels: Vec<Channel> = if let Some(path) = &a.rates_from {
        let ach = AchievingDoc::load(path)?;
        let corner = ach.min_sum_corner()?;
        replay_rates = Some(corner.rates.clone());
        corner_channels(corner, &terminal_vars)?
    } else {
        let choice = doc.channels.as_ref().ok_or_else(|| {
            Failure::Input("config has no channels and no --rates-from was given".into())
        })?;
        match choice {
            ChannelsDoc::Named(name) if name == "identity" => identity_channels(&terminal_vars),
            ChannelsDoc::Named(other) => {
                return Err(Failure::Input(format!(
                    "unknown channel set `{other}`; use \"identity\", inline rows, \
                     or {{\"file\": ..., \"corner\": ...}}"
                )))
            }
            ChannelsDoc::Inline(docs) => {
                if docs.len() != m {
                    return Err(Failure::Input(format!(
                        "config lists {} channels for {m} terminals",
                        docs.len()
                    )));
                }
                docs.iter()
                    .zip(&terminal_vars)
                    .map(|(d, v)| d.to_channel(&v.alphabet))
                    .collect::<Result<_, _>>()?
            }
            ChannelsDoc::Replay { file, corner } => {
                let ach = AchievingDoc::load(&sibling(&a.config, file))?;
                let c = match corner {
                    Some(i) => ach.corners.get(*i).ok_or_else(|| {
                        Failure::Input(format!(
                            "corner {i} out of range ({} corners)",
                            ach.corners.len()
                        ))
                    })?,
                    None => ach.min_sum_corner()?,
                };
                replay_rates = Some(c.rates.clone());
                corner_channels(c, &terminal_vars)?
            }
        }
    };

    // Rate precedence: --rates, then --rates-from's corner, then the config's
    // own rates, then a config-referenced corner.
    let rates: Vec<f64> = if let Some(r) = &a.rates {
        r.clone()
    } else if a.rates_from.is_some() {
        replay_rates.clone().expect("replay path sets rates")
    } else if let Some(r) = &doc.rates {
        r.clone()
    } else if let Some(r) = replay_rates {
        r
    } else {
        return Err(Failure::Input(
            "no rates: set them in the config, pass --rates, or replay a corner".into(),
        ));
    };

    let mut pairs: Vec<(DistortionMeasure, f64)> = Vec::new();
    for t in &doc.targets {
        match t {
            TargetDoc::Hamming {
                terminal,
                distortion,
            } => pairs.push((DistortionMeasure::hamming(&x_sizes, *terminal)?, *distortion)),
            TargetDoc::Table {
                table,
                y_size,
                distortion,
            } => pairs.push((
                DistortionMeasure::new(x_sizes.clone(), *y_size, table.clone())?,
                *distortion,
            )),
        }
    }
    if pairs.is_empty() {
        return Err(Failure::Input(
            "config declares no distortion targets".into(),
        ));
    }

    let n_grid = a.n_grid.clone().unwrap_or_else(|| doc.n_grid.clone());
    if n_grid.is_empty() {
        return Err(Failure::Input("blocklength grid is empty".into()));
    }
    let trials = a.trials.unwrap_or(doc.trials);
    let seed = a.seed.unwrap_or(doc.seed);
    let mut manifest = ManifestBuilder::new(argv, &a.config, seed);

    let mut config = CodecConfig::new(1, rates.clone(), trials, seed);
    if let Some(s) = &doc.slacks {
        config.slacks = Slacks {
            gamma1: s.gamma1,
            gamma2: s.gamma2,
            gamma3: s.gamma3,
            gamma4: s.gamma4,
        };
    }
    if let Some(e) = doc.enforce_slack_relation {
        config.enforce_slack_relation = e;
    }
    if let Some(c) = doc.tuple_cap {
        config.tuple_cap = c;
    }

    let mut rows: Vec<ErrorStats> = Vec::new();
    for &n in &n_grid {
        vlog!("simulate: n={n} trials={trials}");
        config.n = n;
        match mtrd_core::run_experiment(&model, &channels, &pairs, &config) {
            Ok(stats) => {
                println!(
                    "n={n} p_error={:.9} ci_halfwidth={:.9} decode_failures={} \
                     quantizer_failures={}",
                    stats.p_error,
                    stats.ci_halfwidth,
                    stats.decode_failures,
                    stats.quantizer_failures
                );
                rows.push(stats);
            }
            Err(e) => {
                // Keep the completed blocklengths; no manifest.
                if !rows.is_empty() {
                    emit::write_results_csv(&out_dir.join("results.csv"), &rates, &rows)?;
                    emit::write_json(&out_dir.join("stats.json"), &rows)?;
                }
                return Err(e.into());
            }
        }
    }
    emit::write_results_csv(&out_dir.join("results.csv"), &rates, &rows)?;
    manifest.add("results.csv");
    emit::write_json(&out_dir.join("stats.json"), &rows)?;
    manifest.add("stats.json");
    manifest.finish(out_dir)
}

fn identity_channels(terminal_vars: &[&Variable]) -> Vec<Channel> {
    terminal_vars
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
            Channel::new(v.alphabet.clone(), v.alphabet.clone(), rows)
                .expect("identity rows are valid")
        })
        .collect()
}

fn corner_channels(
    corner: &CornerDoc,
    terminal_vars: &[&Variable],
) -> Result<Vec<Channel>, Failure> {
    if corner.channels.len() != terminal_vars.len() {
        return Err(Failure::Input(format!(
            "replay corner has {} channels for {} terminals",
            corner.channels.len(),
            terminal_vars.len()
        )));
    }
    corner
        .channels
        .iter()
        .zip(terminal_vars)
        .map(|(d, v)| d.to_channel(&v.alphabet))
        .collect()
}

// ---------------------------------------------------------------------------
// sw-check
// ---------------------------------------------------------------------------

/// Search the lossless (all-zero distortion) region and compare every subset
/// bound against the matching conditional entropy.
pub fn sw_check(a: &SwCheckArgs, out_dir: &Path, argv: &[String]) -> CliResult {
    fs::create_dir_all(out_dir)?;
    let model = load_model(&a.model)?;
    if !matches!(model.kind(), SourceKind::Iid { .. }) {
        return Err(Failure::Input(
            "lossless check needs a memoryless model".into(),
        ));
    }
    let base = model.single_letter()?;
    let names: Vec<String> = model
        .terminal_vars()
        .iter()
        .map(|v| v.name.clone())
        .collect();
    let x_sizes: Vec<usize> = model
        .terminal_vars()
        .iter()
        .map(|v| v.alphabet.len())
        .collect();
    let m = names.len();
    let x_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let side = model.side_info().map(str::to_string);

    let mut pairs = Vec::new();
    for t in 0..m {
        pairs.push((DistortionMeasure::hamming(&x_sizes, t)?, 0.0));
    }
    let params = SearchParams {
        restarts: a.restarts,
        seed: a.seed,
        ..SearchParams::default()
    };
    let mut manifest = ManifestBuilder::new(argv, &a.model, a.seed);
    let frontier = mtrd_core::search_region(&base, &x_refs, side.as_deref(), &pairs, &params)?;

    let mut rows = Vec::new();
    let mut worst: Option<(u32, f64)> = None;
    for (&mask, &searched) in &frontier.subset_bounds {
        let target: Vec<&str> = (0..m)
            .filter(|t| mask >> t & 1 == 1)
            .map(|t| x_refs[t])
            .collect();
        let mut given: Vec<&str> = (0..m)
            .filter(|t| mask >> t & 1 == 0)
            .map(|t| x_refs[t])
            .collect();
        if let Some(s) = side.as_deref() {
            given.push(s);
        }
        let entropy = classical::cond_entropy(&base, &target, &given)?;
        let gap = searched - entropy;
        if worst.map_or(true, |(_, g)| gap.abs() > g.abs()) {
            worst = Some((mask, gap));
        }
        rows.push(SwRow {
            mask,
            searched,
            entropy,
        });
    }
    emit::write_sw_csv(&out_dir.join("sw_check.csv"), &rows, a.tol)?;
    manifest.add("sw_check.csv");
    manifest.finish(out_dir)?;
    match worst {
        Some((mask, gap)) if gap.abs() > a.tol => Err(Failure::CheckFailed(format!(
            "subset {} bound differs from its conditional entropy by {gap:.3e} nats (tol {:.1e})",
            subset_label(mask),
            a.tol
        ))),
        _ => {
            println!(
                "lossless bounds match conditional entropies within {:.1e} nats ({} subsets)",
                a.tol,
                rows.len()
            );
            Ok(())
        }
    }
}
