use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Normalized pointwise mutual information of a pair from raw counts.
///
/// `ln(p(u,v) / (p(u) p(v))) / -ln p(u,v)` with `p = count / total`.
/// A pair present in every observation (`p(u,v) = 1`) scores 1.
pub fn npmi(pair: u64, count_u: u64, count_v: u64, total: u64) -> Result<f64> {
    if total == 0 {
        return Err(Error::InvalidArgument("total count is zero".into()));
    }
    if pair == 0 || count_u == 0 || count_v == 0 {
        return Err(Error::InvalidArgument("counts must be positive".into()));
    }
    if pair > count_u.min(count_v) || count_u.max(count_v) > total {
        return Err(Error::InvalidArgument(format!(
            "inconsistent counts: pair {pair}, marginals {count_u}/{count_v}, total {total}"
        )));
    }
    let total = total as f64;
    let p_uv = pair as f64 / total;
    if p_uv == 1.0 {
        return Ok(1.0);
    }
    let p_u = count_u as f64 / total;
    let p_v = count_v as f64 / total;
    Ok((p_uv / (p_u * p_v)).ln() / -p_uv.ln())
}

/// Positive NPMI weights for every co-occurring pair; pairs scoring `<= 0` are dropped.
pub fn npmi_weights(
    cooccurrence: &BTreeMap<(usize, usize), u64>,
    marginals: &[u64],
    total: u64,
) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (&(u, v), &count) in cooccurrence {
        let (cu, cv) = match (marginals.get(u), marginals.get(v)) {
            (Some(&a), Some(&b)) => (a, b),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "pair ({u}, {v}) has no marginal count"
                )))
            }
        };
        let w = npmi(count, cu, cv, total)?;
        if w > 0.0 {
            out.push((u, v, w));
        }
    }
    Ok(out)
}
