//! Small derivative-free optimization helpers: a box-constrained Nelder-Mead
//! simplex and Latin-hypercube start points.

use rand::seq::SliceRandom;
use rand::Rng;

/// Stopping rules for [`nelder_mead`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimplexOptions {
    /// Converged once every vertex is within `xtol` (sup norm) of the best one.
    pub xtol: f64,
    /// Converged once the vertex values agree to within `ftol`.
    pub ftol: f64,
    pub max_iter: usize,
    /// Initial edge length as a fraction of each box side.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { xtol: 1e-9, ftol: 1e-24, max_iter: 2000, initial_step: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexResult<const N: usize> {
    pub x: [f64; N],
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project<const N: usize>(mut x: [f64; N], bounds: &[(f64, f64); N]) -> [f64; N] {
    for (xi, (lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(*lo, *hi);
    }
    x
}

fn combine<const N: usize>(a: &[f64; N], b: &[f64; N], t: f64) -> [f64; N] {
    // a + t * (b - a)
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = a[i] + t * (b[i] - a[i]);
    }
    out
}

/// Minimizes `f` over a box. Trial points are projected onto the box, and
/// non-finite values are treated as `+inf`.
pub fn nelder_mead<const N: usize, F>(
    mut f: F,
    x0: [f64; N],
    bounds: &[(f64, f64); N],
    opts: &SimplexOptions,
) -> SimplexResult<N>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let mut evaluations = 0;
    let mut eval = |x: &[f64; N]| {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let x0 = project(x0, bounds);
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((x0, eval(&x0)));
    for i in 0..N {
        let (lo, hi) = bounds[i];
        let mut step = opts.initial_step * (hi - lo);
        if step == 0.0 {
            step = opts.initial_step.max(1e-3);
        }
        let mut x = x0;
        x[i] = if x0[i] + step <= hi { x0[i] + step } else { x0[i] - step };
        let x = project(x, bounds);
        simplex.push((x, eval(&x)));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0];
        let worst = simplex[N];
        let diameter = simplex
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best.0.iter()).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter <= opts.xtol || (worst.1 - best.1).abs() <= opts.ftol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; N];
        for (x, _) in &simplex[..N] {
            for i in 0..N {
                centroid[i] += x[i] / N as f64;
            }
        }
        let reflected = project(combine(&centroid, &worst.0, -1.0), bounds);
        let fr = eval(&reflected);
        if fr < best.1 {
            let expanded = project(combine(&centroid, &worst.0, -2.0), bounds);
            let fe = eval(&expanded);
            simplex[N] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[N - 1].1 {
            simplex[N] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst.1 {
            let c = project(combine(&centroid, &reflected, 0.5), bounds);
            (c, eval(&c))
        } else {
            let c = project(combine(&centroid, &worst.0, 0.5), bounds);
            (c, eval(&c))
        };
        if fc < worst.1.min(fr) {
            simplex[N] = (contracted, fc);
            continue;
        }
        for v in simplex.iter_mut().skip(1) {
            let x = project(combine(&best.0, &v.0, 0.5), bounds);
            *v = (x, eval(&x));
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    SimplexResult { x: simplex[0].0, f: simplex[0].1, iterations, evaluations, converged }
}

/// `n` Latin-hypercube points in the box: each axis is cut into `n` equal
/// strata and every stratum is used exactly once.
pub fn latin_hypercube<const N: usize, R: Rng + ?Sized>(n: usize, bounds: &[(f64, f64); N], rng: &mut R) -> Vec<[f64; N]> {
    let mut points = vec![[0.0; N]; n];
    for (d, (lo, hi)) in bounds.iter().enumerate() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (p, s) in points.iter_mut().zip(strata) {
            let u: f64 = rng.gen();
            p[d] = lo + (hi - lo) * (s as f64 + u) / n as f64;
        }
    }
    points
}
