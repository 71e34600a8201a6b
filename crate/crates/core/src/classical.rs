//! Classical single-letter information quantities in nats, computed from a
//! joint pmf by marginalization. `0 ln 0` is 0 throughout. For memoryless
//! sources these equal the spectral sup/inf rates, which is what the
//! spectrum-proxy tests pin down.

use crate::error::{Error, Result};
use crate::prob::JointPmf;

/// -sum p ln p over a weight table.
pub fn entropy_of_table(probs: &[f64]) -> f64 {
    probs
        .iter()
        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .sum()
}

/// H(vars): entropy of the marginal on `vars`.
pub fn entropy(j: &JointPmf, vars: &[&str]) -> Result<f64> {
    Ok(entropy_of_table(j.marginalize(vars)?.probs()))
}

/// H(target | given) = H(target, given) - H(given).
pub fn cond_entropy(j: &JointPmf, target: &[&str], given: &[&str]) -> Result<f64> {
    let both = union(target, given);
    Ok(entropy(j, &both)? - entropy(j, given)?)
}

/// I(left ; right) between two disjoint variable groups:
/// H(left) + H(right) - H(left, right). Either group may be empty (then 0).
pub fn mutual_info(j: &JointPmf, left: &[&str], right: &[&str]) -> Result<f64> {
    check_disjoint(left, right)?;
    if left.is_empty() || right.is_empty() {
        return Ok(0.0);
    }
    let both = union(left, right);
    Ok(entropy(j, left)? + entropy(j, right)? - entropy(j, &both)?)
}

/// I(left ; right | given) = H(left,given) + H(right,given) - H(given) - H(left,right,given).
pub fn cond_mutual_info(
    j: &JointPmf,
    left: &[&str],
    right: &[&str],
    given: &[&str],
) -> Result<f64> {
    check_disjoint(left, right)?;
    check_disjoint(left, given)?;
    check_disjoint(right, given)?;
    if left.is_empty() || right.is_empty() {
        return Ok(0.0);
    }
    let lg = union(left, given);
    let rg = union(right, given);
    let all = union(&lg, right);
    Ok(entropy(j, &lg)? + entropy(j, &rg)? - entropy(j, given)? - entropy(j, &all)?)
}

/// Multi-information (total correlation) of a variable group:
/// sum_v H(v) - H(group). Zero for a single variable, and only then
/// identically zero regardless of the law.
pub fn multi_info(j: &JointPmf, vars: &[&str]) -> Result<f64> {
    if vars.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut sum = 0.0;
    for v in vars {
        sum += entropy(j, &[v])?;
    }
    Ok(sum - entropy(j, vars)?)
}

fn union<'a>(a: &[&'a str], b: &[&'a str]) -> Vec<&'a str> {
    let mut out: Vec<&str> = a.to_vec();
    for x in b {
        if !out.contains(x) {
            out.push(x);
        }
    }
    out
}

fn check_disjoint(a: &[&str], b: &[&str]) -> Result<()> {
    for x in a {
        if b.contains(x) {
            return Err(Error::InvalidConfig {
                context: format!("variable `{x}` appears in both groups"),
            });
        }
    }
    Ok(())
}
