//! CSV/JSON emitters. All rate-like values print with 9 decimals so reruns
//! with the same seed are byte-identical; masses use scientific notation
//! because spectra reach deep into the tails.

use crate::artifact::subset_label;
use crate::Failure;
use mtrd_core::{DensitySpectrum, ErrorStats, RegionFrontier};
use std::fs;
use std::path::Path;

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Input(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Columns: n, value_nats, mass. One row per atom, grids concatenated.
pub fn write_spectrum_csv(path: &Path, spectra: &[DensitySpectrum]) -> Result<(), Failure> {
    let mut out = String::from("n,value_nats,mass\n");
    for sp in spectra {
        for &(value, mass) in sp.atoms() {
            out.push_str(&format!("{},{:.9},{:.12e}\n", sp.n, value, mass));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Columns: R_1..R_M (nats/symbol), bound_A per nonempty terminal subset,
/// D_1..D_K achieved. One row per supported corner.
pub fn write_frontier_csv(path: &Path, frontier: &RegionFrontier) -> Result<(), Failure> {
    let mut out = String::from("# rates and bounds in nats/symbol; distortions per symbol\n");
    let (m, k, masks): (usize, usize, Vec<u32>) = match frontier.corners.first() {
        Some(c) => (
            c.rates.len(),
            c.distortions.len(),
            c.bounds.keys().copied().collect(),
        ),
        None => (0, 0, Vec::new()),
    };
    let mut header = Vec::new();
    for t in 1..=m {
        header.push(format!("R_{t}"));
    }
    for &mask in &masks {
        header.push(format!("bound_{}", subset_label(mask)));
    }
    for j in 1..=k {
        header.push(format!("D_{j}"));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for c in &frontier.corners {
        let mut row = Vec::new();
        for r in &c.rates {
            row.push(format!("{r:.9}"));
        }
        for &mask in &masks {
            row.push(format!("{:.9}", c.bounds[&mask]));
        }
        for d in &c.distortions {
            row.push(format!("{d:.9}"));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Columns: n, R_1..R_M, p_error, ci_halfwidth, decode_failures,
/// quantizer_failures, mean_d_1..K. One row per blocklength.
pub fn write_results_csv(
    path: &Path,
    rates: &[f64],
    rows: &[ErrorStats],
) -> Result<(), Failure> {
    let mut out = String::from("# rates in nats/symbol; mean_d per symbol\n");
    let k = rows.first().map(|s| s.mean_distortion.len()).unwrap_or(0);
    let mut header = vec!["n".to_string()];
    for t in 1..=rates.len() {
        header.push(format!("R_{t}"));
    }
    header.push("p_error".into());
    header.push("ci_halfwidth".into());
    header.push("decode_failures".into());
    header.push("quantizer_failures".into());
    for j in 1..=k {
        header.push(format!("mean_d_{j}"));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for s in rows {
        let mut row = vec![s.n.to_string()];
        for r in rates {
            row.push(format!("{r:.9}"));
        }
        row.push(format!("{:.9}", s.p_error));
        row.push(format!("{:.9}", s.ci_halfwidth));
        row.push(s.decode_failures.to_string());
        row.push(s.quantizer_failures.to_string());
        for d in &s.mean_distortion {
            row.push(format!("{d:.9}"));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub struct SwRow {
    pub mask: u32,
    pub searched: f64,
    pub entropy: f64,
}

/// Columns: subset, searched_nats, entropy_nats, gap, verdict.
pub fn write_sw_csv(path: &Path, rows: &[SwRow], tol: f64) -> Result<(), Failure> {
    let mut out = String::from("subset,searched_nats,entropy_nats,gap,verdict\n");
    for r in rows {
        let gap = r.searched - r.entropy;
        out.push_str(&format!(
            "{},{:.9},{:.9},{:.3e},{}\n",
            subset_label(r.mask),
            r.searched,
            r.entropy,
            gap,
            if gap.abs() <= tol { "pass" } else { "FAIL" }
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Machine-readable failure report on stderr.
pub fn error_json(f: &Failure) {
    let doc = match f {
        Failure::Core(mtrd_core::Error::ModelParse { pointer, message }) => serde_json::json!({
            "kind": "ModelParse",
            "pointer": pointer,
            "message": message,
        }),
        Failure::Core(e) => serde_json::json!({
            "kind": kind_name(e),
            "message": e.to_string(),
        }),
        Failure::Input(m) => serde_json::json!({ "kind": "Input", "message": m }),
        Failure::CheckFailed(m) => serde_json::json!({ "kind": "CheckFailed", "message": m }),
    };
    eprintln!("{doc}");
}

fn kind_name(e: &mtrd_core::Error) -> &'static str {
    use mtrd_core::Error::*;
    match e {
        NegativeMass { .. } => "NegativeMass",
        SumNotOne { .. } => "SumNotOne",
        ShapeMismatch { .. } => "ShapeMismatch",
        UnknownVariable { .. } => "UnknownVariable",
        AllMassZero => "AllMassZero",
        AlphabetMismatch { .. } => "AlphabetMismatch",
        MissingBlocklength { .. } => "MissingBlocklength",
        BudgetExceeded { .. } => "BudgetExceeded",
        UndefinedDensity { .. } => "UndefinedDensity",
        EmptyGrid => "EmptyGrid",
        EmptySubset => "EmptySubset",
        FactorizationViolated { .. } => "FactorizationViolated",
        InfeasibleDistortion { .. } => "InfeasibleDistortion",
        InvalidConfig { .. } => "InvalidConfig",
        ModelParse { .. } => "ModelParse",
        Io(_) => "Io",
    }
}
