use crate::error::{Error, Result};
use crate::geometry::SimplexVector;

/// Euclidean projection onto the closed simplex by sort-and-threshold.
///
/// Sort `v` in decreasing order, find the largest `ρ` with
/// `u_ρ > (Σ_{j≤ρ} u_j - 1)/ρ`, and shift everything by that threshold.
pub fn project_simplex(v: &[f64]) -> Result<SimplexVector> {
    let mut out = vec![0.0; v.len()];
    project_simplex_into(v, &mut out)?;
    SimplexVector::closed(out)
}

pub(crate) fn project_simplex_into(v: &[f64], out: &mut [f64]) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::InvalidDimension(format!(
            "projection needs at least 2 components, got {}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "cannot project a non-finite vector".into(),
        ));
    }
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - theta).max(0.0);
    }
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= s);
    Ok(())
}
