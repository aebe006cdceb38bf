//! Quality indicators for a front approximation: hypervolume, sparsity,
//! cardinality and inverted generational distance.
//!
//! All indicators take plain point slices. A [`ParetoArchive`](crate::ParetoArchive)
//! derefs to one, and so does a reference front that is deliberately left unfiltered.

use std::collections::HashSet;

use crate::error::{MorlError, Result};
use crate::pareto::{check_common_dim, ObjectiveVector};

/// Lebesgue measure of the union of boxes `[reference, p]`.
///
/// Coordinates below the reference are clipped to it, so such points add no
/// volume. Supports one to three objectives.
pub fn hypervolume(front: &[ObjectiveVector], reference: &ObjectiveVector) -> Result<f64> {
    let Some(dim) = check_common_dim(front)? else {
        return Ok(0.0);
    };
    MorlError::check_dim(reference.dim(), dim)?;
    if dim > 3 {
        return Err(MorlError::Contract(format!(
            "hypervolume supports at most 3 objectives, got {dim}"
        )));
    }
    let clipped: Vec<[f64; 3]> = front
        .iter()
        .filter_map(|p| {
            let mut c = [0.0; 3];
            for (o, (v, r)) in p.iter().zip(reference.iter()).enumerate() {
                if v <= r {
                    return None;
                }
                c[o] = v - r;
            }
            Some(c)
        })
        .collect();
    match dim {
        1 => Ok(clipped.iter().map(|c| c[0]).fold(0.0, f64::max)),
        2 => Ok(hv2(clipped.iter().map(|c| (c[0], c[1])).collect())),
        _ => Ok(hv3(clipped)),
    }
}

/// Sweep over points translated so the reference is the origin.
fn hv2(mut pts: Vec<(f64, f64)>) -> f64 {
    pts.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    let mut area = 0.0;
    let mut height = 0.0;
    for (x, y) in pts {
        if y > height {
            area += x * (y - height);
            height = y;
        }
    }
    area
}

/// Slices along the third objective, measuring each slab's 2-D cross-section.
fn hv3(mut pts: Vec<[f64; 3]>) -> f64 {
    pts.sort_by(|a, b| b[2].total_cmp(&a[2]));
    let mut volume = 0.0;
    for i in 0..pts.len() {
        let next_z = pts.get(i + 1).map_or(0.0, |p| p[2]);
        let depth = pts[i][2] - next_z;
        if depth > 0.0 {
            volume += depth * hv2(pts[..=i].iter().map(|p| (p[0], p[1])).collect());
        }
    }
    volume
}

/// Sum over objectives of squared gaps between adjacent sorted values,
/// divided by `|front| - 1`. Fronts of at most one point have sparsity 0.
pub fn sparsity(front: &[ObjectiveVector]) -> Result<f64> {
    let Some(dim) = check_common_dim(front)? else {
        return Ok(0.0);
    };
    if front.len() < 2 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut column = Vec::with_capacity(front.len());
    for o in 0..dim {
        column.clear();
        column.extend(front.iter().map(|p| p[o]));
        column.sort_by(f64::total_cmp);
        total += column.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>();
    }
    Ok(total / (front.len() - 1) as f64)
}

/// Number of distinct points in the set.
pub fn cardinality(front: &[ObjectiveVector]) -> usize {
    front
        .iter()
        .map(|p| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        .collect::<HashSet<_>>()
        .len()
}

/// Mean over reference points of the Euclidean distance to the nearest
/// approximation point. `None` when the approximation is empty.
pub fn igd(approx: &[ObjectiveVector], truth: &[ObjectiveVector]) -> Result<Option<f64>> {
    let Some(dim) = check_common_dim(truth)? else {
        return Err(MorlError::Contract(
            "IGD needs a non-empty reference front".into(),
        ));
    };
    let Some(adim) = check_common_dim(approx)? else {
        return Ok(None);
    };
    MorlError::check_dim(dim, adim)?;
    let total: f64 = truth
        .iter()
        .map(|z| {
            approx
                .iter()
                .map(|a| {
                    z.iter()
                        .zip(a.iter())
                        .map(|(x, y)| (x - y).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(Some(total / truth.len() as f64))
}
