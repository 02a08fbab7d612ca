//! Exact greedy split search with second-order statistics.

use crate::gbdt::Matrix;

/// Regularisation terms shared by split scoring and leaf weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParams {
    pub lambda: f64,
    pub alpha: f64,
    pub min_child_weight: f64,
}

/// `sign(g) * max(|g| - alpha, 0)`.
pub fn soft_threshold(g: f64, alpha: f64) -> f64 {
    // Branch-free: the sign of the gradient is unpredictable in split scans.
    g.signum() * (g.abs() - alpha).max(0.0)
}

/// Structure score of a node: `T(G)^2 / (H + lambda)`.
pub fn node_score(g: f64, h: f64, p: &SplitParams) -> f64 {
    let denom = h + p.lambda;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = soft_threshold(g, p.alpha);
    t * t / denom
}

pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, p: &SplitParams) -> f64 {
    0.5 * (node_score(gl, hl, p) + node_score(gr, hr, p) - node_score(gl + gr, hl + hr, p))
}

/// Optimal leaf weight `-T(G) / (H + lambda)`, before shrinkage.
pub fn leaf_weight(g: f64, h: f64, p: &SplitParams) -> f64 {
    let denom = h + p.lambda;
    if denom <= 0.0 {
        return 0.0;
    }
    -soft_threshold(g, p.alpha) / denom
}

/// Threshold strictly between two consecutive distinct values, such that
/// `lo < t` fails and `hi < t` fails only for values `>= hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid <= lo || mid > hi {
        hi
    } else {
        mid
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    /// Rows with `x < threshold` go left.
    pub threshold: f64,
    /// Where rows with a missing value go.
    pub default_left: bool,
    pub gain: f64,
    pub left_g: f64,
    pub left_h: f64,
    pub right_g: f64,
    pub right_h: f64,
}

/// Best split of one feature given the node's rows with a present value,
/// as `(row, value)` pairs in ascending order of value. `total_g`/`total_h`
/// cover all node rows, including those with the value missing. Returns
/// `None` when no split beats `best_gain`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn scan_feature(
    feature: usize,
    sorted: &[(u32, f64)],
    n_node_rows: usize,
    g: &[f64],
    h: &[f64],
    total_g: f64,
    total_h: f64,
    params: &SplitParams,
    best_gain: f64,
) -> Option<SplitCandidate> {
    if sorted.len() < 2 {
        return None;
    }
    let has_missing = sorted.len() < n_node_rows;
    let (miss_g, miss_h) = if has_missing {
        let (mut pg, mut ph) = (0.0, 0.0);
        for &(r, _) in sorted {
            pg += g[r as usize];
            ph += h[r as usize];
        }
        (total_g - pg, total_h - ph)
    } else {
        (0.0, 0.0)
    };

    // The parent score is shared by every candidate of the node, so
    // candidates are compared on the sum of the child scores alone.
    let parent = node_score(total_g, total_h, params);
    let mut best_children = 2.0 * best_gain + parent;
    let mut best: Option<(usize, bool, f64, f64)> = None;
    let (mut gl, mut hl) = (0.0, 0.0);
    let mcw = params.min_child_weight;
    for w in 0..sorted.len() - 1 {
        let (r, v) = sorted[w];
        gl += g[r as usize];
        hl += h[r as usize];
        if sorted[w + 1].1 == v {
            continue;
        }
        // Missing rows on the right first, then on the left.
        for missing_left in [false, true] {
            if missing_left && !has_missing {
                break;
            }
            let (cgl, chl) = if missing_left { (gl + miss_g, hl + miss_h) } else { (gl, hl) };
            let chr = total_h - chl;
            if chl < mcw || chr < mcw {
                continue;
            }
            let children = node_score(cgl, chl, params) + node_score(total_g - cgl, chr, params);
            if children > best_children {
                best_children = children;
                best = Some((w, missing_left, cgl, chl));
            }
        }
    }
    let (w, missing_left, cgl, chl) = best?;
    let (cgr, chr) = (total_g - cgl, total_h - chl);
    let gain = split_gain(cgl, chl, cgr, chr, params);
    if !(gain > best_gain) {
        return None;
    }
    Some(SplitCandidate {
        feature,
        threshold: midpoint(sorted[w].1, sorted[w + 1].1),
        default_left: if has_missing { missing_left } else { chl >= chr },
        gain,
        left_g: cgl,
        left_h: chl,
        right_g: cgr,
        right_h: chr,
    })
}

/// Best split over `features` for the node holding `rows`. Features are
/// tried in the given order and a later candidate replaces the current one
/// only with strictly larger gain. Only positive gains qualify.
pub fn best_split(
    x: &Matrix,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    features: &[usize],
    params: &SplitParams,
) -> Option<SplitCandidate> {
    let total_g: f64 = rows.iter().map(|&r| g[r]).sum();
    let total_h: f64 = rows.iter().map(|&r| h[r]).sum();
    let mut best: Option<SplitCandidate> = None;
    for &f in features {
        let mut sorted: Vec<(u32, f64)> = rows
            .iter()
            .map(|&r| (r as u32, x.get(r, f)))
            .filter(|(_, v)| !v.is_nan())
            .collect();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let floor = best.map_or(0.0, |b| b.gain);
        if let Some(c) = scan_feature(f, &sorted, rows.len(), g, h, total_g, total_h, params, floor) {
            best = Some(c);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64, alpha: f64, mcw: f64) -> SplitParams {
        SplitParams {
            lambda,
            alpha,
            min_child_weight: mcw,
        }
    }

    #[test]
    fn four_point_stump() {
        // g = p - y at p = 0.5, h = p(1 - p).
        let x = Matrix::new(vec![1.0, 2.0, 3.0, 4.0], 4, 1);
        let g = [0.5, 0.5, -0.5, -0.5];
        let h = [0.25; 4];
        let p = params(1.0, 0.0, 0.0);
        let s = best_split(&x, &[0, 1, 2, 3], &g, &h, &[0], &p).unwrap();
        assert_eq!(s.threshold, 2.5);
        assert!((s.gain - 2.0 / 3.0).abs() < 1e-12);
        assert!((leaf_weight(s.left_g, s.left_h, &p) + 2.0 / 3.0).abs() < 1e-12);
        assert!((leaf_weight(s.right_g, s.right_h, &p) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn min_child_weight_blocks_split() {
        let x = Matrix::new(vec![1.0, 2.0, 3.0, 4.0], 4, 1);
        let g = [0.5, 0.5, -0.5, -0.5];
        let h = [0.25; 4];
        assert!(best_split(&x, &[0, 1, 2, 3], &g, &h, &[0], &params(1.0, 0.0, 0.6)).is_none());
    }

    #[test]
    fn alpha_shrinks_gradients() {
        assert_eq!(soft_threshold(1.5, 1.0), 0.5);
        assert_eq!(soft_threshold(-1.5, 1.0), -0.5);
        assert_eq!(soft_threshold(0.3, 1.0), 0.0);
        let p = params(1.0, 1.0, 0.0);
        assert_eq!(leaf_weight(0.5, 3.0, &p), 0.0);
        assert!((leaf_weight(-3.0, 3.0, &p) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn missing_values_pick_their_side() {
        // Rows 4 and 5 are missing and share the gradient sign of rows 2, 3.
        let x = Matrix::new(vec![1.0, 2.0, 3.0, 4.0, f64::NAN, f64::NAN], 6, 1);
        let g = [0.5, 0.5, -0.5, -0.5, -0.5, -0.5];
        let h = [0.25; 6];
        let s = best_split(&x, &[0, 1, 2, 3, 4, 5], &g, &h, &[0], &params(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(s.threshold, 2.5);
        assert!(!s.default_left);
        let g = [-0.5, -0.5, 0.5, 0.5, -0.5, -0.5];
        let s = best_split(&x, &[0, 1, 2, 3, 4, 5], &g, &h, &[0], &params(1.0, 0.0, 0.0)).unwrap();
        assert!(s.default_left);
    }

    #[test]
    fn midpoint_of_adjacent_floats() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let t = midpoint(lo, hi);
        assert!(lo < t || t == hi);
        assert!(!(hi < t));
        assert_eq!(midpoint(2.0, 3.0), 2.5);
    }

    #[test]
    fn constant_feature_has_no_split() {
        let x = Matrix::new(vec![1.0; 4], 4, 1);
        let g = [0.5, 0.5, -0.5, -0.5];
        assert!(best_split(&x, &[0, 1, 2, 3], &g, &[0.25; 4], &[0], &params(1.0, 0.0, 0.0)).is_none());
    }
}
