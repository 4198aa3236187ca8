//! Deterministic derivative-free maximizers over axis-aligned boxes.
//!
//! Both searches are exact-arithmetic deterministic: no randomness, stable
//! orderings, candidates clamped into the box before every evaluation.

use std::cmp::Ordering;

/// NaN never wins a comparison; failed objective evaluations map to -inf.
fn value_key(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn clamp_into(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Nelder-Mead simplex maximization with candidates projected into `bounds`.
/// Bounds must be non-degenerate in every dimension.
pub(crate) fn nelder_mead_max<F>(
    mut f: F,
    start: &[f64],
    bounds: &[(f64, f64)],
    max_iter: usize,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    debug_assert_eq!(dim, bounds.len());
    debug_assert!(bounds.iter().all(|(lo, hi)| hi > lo));

    // Initial simplex: the start plus one vertex stepped 20% of the box per axis,
    // stepping inward when the start sits at the upper bound.
    let mut vertices: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let mut origin = start.to_vec();
    clamp_into(&mut origin, bounds);
    let origin_val = f(&origin);
    vertices.push((origin.clone(), origin_val));
    for d in 0..dim {
        let (lo, hi) = bounds[d];
        let step = 0.2 * (hi - lo);
        let mut v = origin.clone();
        v[d] = if v[d] + step <= hi { v[d] + step } else { v[d] - step };
        let val = f(&v);
        vertices.push((v, val));
    }

    let better = |a: f64, b: f64| value_key(a).partial_cmp(&value_key(b)).unwrap() == Ordering::Greater;

    for _ in 0..max_iter {
        // Stable sort keeps insertion order on ties, so runs are reproducible.
        vertices.sort_by(|a, b| value_key(b.1).partial_cmp(&value_key(a.1)).unwrap());
        let spread = value_key(vertices[0].1) - value_key(vertices[dim].1);
        if spread.is_finite() && spread < 1e-12 * (1.0 + vertices[0].1.abs()) {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for (v, _) in vertices.iter().take(dim) {
            for d in 0..dim {
                centroid[d] += v[d];
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }
        let worst = vertices[dim].clone();

        let make = |coef: f64| {
            let mut x: Vec<f64> =
                (0..dim).map(|d| centroid[d] + coef * (centroid[d] - worst.0[d])).collect();
            clamp_into(&mut x, bounds);
            x
        };

        let reflected = make(1.0);
        let reflected_val = f(&reflected);
        if better(reflected_val, vertices[0].1) {
            let expanded = make(2.0);
            let expanded_val = f(&expanded);
            vertices[dim] = if better(expanded_val, reflected_val) {
                (expanded, expanded_val)
            } else {
                (reflected, reflected_val)
            };
        } else if better(reflected_val, vertices[dim - 1].1) {
            vertices[dim] = (reflected, reflected_val);
        } else {
            let contracted = if better(reflected_val, worst.1) { make(0.5) } else { make(-0.5) };
            let contracted_val = f(&contracted);
            if better(contracted_val, worst.1) {
                vertices[dim] = (contracted, contracted_val);
            } else {
                // Shrink every vertex halfway toward the best.
                let best = vertices[0].0.clone();
                for (v, val) in vertices.iter_mut().skip(1) {
                    for d in 0..dim {
                        v[d] = best[d] + 0.5 * (v[d] - best[d]);
                    }
                    clamp_into(v, bounds);
                    *val = f(v);
                }
            }
        }
    }

    vertices.sort_by(|a, b| value_key(b.1).partial_cmp(&value_key(a.1)).unwrap());
    vertices.swap_remove(0)
}

/// Coordinate pattern search with step halving. Handles degenerate dimensions
/// (zero initial step) by never moving along them.
pub(crate) fn pattern_search_max<F>(
    mut f: F,
    start: &[f64],
    bounds: &[(f64, f64)],
    init_step: &[f64],
    min_step: &[f64],
    max_passes: usize,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    let mut x = start.to_vec();
    clamp_into(&mut x, bounds);
    let mut best = f(&x);
    let mut step = init_step.to_vec();

    for _ in 0..max_passes {
        let mut improved = false;
        for d in 0..dim {
            if step[d] <= 0.0 {
                continue;
            }
            for dir in [1.0, -1.0] {
                let mut cand = x.clone();
                cand[d] = (cand[d] + dir * step[d]).clamp(bounds[d].0, bounds[d].1);
                if cand[d] == x[d] {
                    continue;
                }
                let val = f(&cand);
                if value_key(val) > value_key(best) {
                    x = cand;
                    best = val;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in step.iter_mut() {
                *s *= 0.5;
            }
            if step.iter().zip(min_step).all(|(s, m)| *s < *m || *s <= 0.0) {
                break;
            }
        }
    }
    (x, best)
}
