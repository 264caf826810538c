//! Scalar maximization: a dense scan to locate the best cell followed by a
//! golden-section search inside it. Objectives here are not known to be
//! unimodal, so the scan does the global work and golden-section only
//! polishes.

/// `(sqrt(5) - 1) / 2`
const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`, stopping once
/// the bracket is narrower than `x_tol`. The endpoints themselves are never
/// evaluated.
pub fn golden_section_max<F>(f: F, lo: f64, hi: f64, x_tol: f64, max_iter: usize) -> Maximum
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= x_tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        Maximum { x: c, value: fc }
    } else {
        Maximum { x: d, value: fd }
    }
}

/// Evenly spaced points including both ends.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Logarithmically spaced points including both ends; `lo` and `hi` must be
/// positive.
pub fn logspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    linspace(a, b, points)
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            if i == 0 {
                lo
            } else if i + 1 == points {
                hi
            } else {
                x.exp()
            }
        })
        .collect()
}

/// Scan `f` over `grid` (sorted ascending), then refine around the best
/// point with golden-section on the neighbouring cells. `None` values are
/// treated as infeasible and skipped. Returns `None` if no grid point is
/// feasible.
///
/// The returned maximum is never worse than the best grid point.
pub fn grid_then_golden<F>(f: F, grid: &[f64], x_tol: f64) -> Option<Maximum>
where
    F: Fn(f64) -> Option<f64>,
{
    let mut best: Option<(usize, Maximum)> = None;
    for (i, &x) in grid.iter().enumerate() {
        if let Some(v) = f(x) {
            if best.is_none_or(|(_, m)| v > m.value) {
                best = Some((i, Maximum { x, value: v }));
            }
        }
    }
    let (i, grid_best) = best?;
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    if hi <= lo {
        return Some(grid_best);
    }
    let refined = golden_section_max(|x| f(x).unwrap_or(f64::NEG_INFINITY), lo, hi, x_tol, 200);
    if refined.value > grid_best.value {
        Some(refined)
    } else {
        Some(grid_best)
    }
}

/// Same as [`grid_then_golden`] but the refinement happens in `ln x`, for
/// objectives sampled on a [`logspace`] grid.
pub fn log_grid_then_golden<F>(f: F, grid: &[f64], rel_tol: f64) -> Option<Maximum>
where
    F: Fn(f64) -> Option<f64>,
{
    let log_grid: Vec<f64> = grid.iter().map(|x| x.ln()).collect();
    grid_then_golden(|y| f(y.exp()), &log_grid, rel_tol).map(|m| Maximum {
        x: m.x.exp(),
        value: m.value,
    })
}
