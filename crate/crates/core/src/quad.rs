//! Quadrature rules shared by the density oracles and solvers.

/// 8-point Gauss–Legendre nodes on [-1, 1].
const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Gauss–Legendre 8-point rule on `[a, b]`. Exact for polynomials of
/// degree 15.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL8_NODES
        .iter()
        .zip(GL8_WEIGHTS.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Leaf interval produced by [`adaptive_simpson`], with its integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Panel {
    pub lo: f64,
    pub hi: f64,
    pub integral: f64,
}

/// Adaptive Simpson integration with Richardson correction.
///
/// `[a, b]` is first cut into panels no wider than `max_width`; each panel is
/// refined until the Simpson halving error estimate is below its share of
/// `abs_tol`. The accepted leaves are returned in increasing order, so the
/// caller can build a cumulative table from them.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_width: f64,
) -> Vec<Panel> {
    let mut leaves = Vec::new();
    if b <= a {
        return leaves;
    }
    let pieces = ((b - a) / max_width).ceil().max(1.0) as usize;
    let tol = abs_tol / pieces as f64;
    for k in 0..pieces {
        let lo = a + (b - a) * k as f64 / pieces as f64;
        let hi = if k + 1 == pieces { b } else { a + (b - a) * (k + 1) as f64 / pieces as f64 };
        let (flo, fmid, fhi) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        refine(f, lo, hi, flo, fmid, fhi, whole, tol, 0, &mut leaves);
    }
    leaves
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    flo: f64,
    fmid: f64,
    fhi: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    out: &mut Vec<Panel>,
) {
    let mid = 0.5 * (lo + hi);
    let lm = 0.5 * (lo + mid);
    let rm = 0.5 * (mid + hi);
    let (flm, frm) = (f(lm), f(rm));
    let left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    let right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    let delta = left + right - whole;
    if depth >= 40 || delta.abs() <= 15.0 * tol {
        out.push(Panel { lo, hi, integral: left + right + delta / 15.0 });
    } else {
        refine(f, lo, mid, flo, flm, fmid, left, 0.5 * tol, depth + 1, out);
        refine(f, mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth + 1, out);
    }
}
