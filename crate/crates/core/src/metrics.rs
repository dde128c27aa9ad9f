//! Distances and diagnostics between samples, densities and the Gibbs oracle.

use thiserror::Error;

use crate::fokker_planck::DensityField;
use crate::gibbs::GibbsDensity;
use crate::par::{self, ExecMode};
use crate::potential::PiecewisePotential1D;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("sample set is empty")]
    Empty,
    #[error("histogram edges must be strictly increasing with at least two entries")]
    Edges,
    #[error("density fields live on different grids")]
    GridMismatch,
    #[error("window must hold at least 100 samples, got {0}")]
    Window(usize),
}

fn sorted(values: &[f64], mode: ExecMode) -> Vec<f64> {
    let mut v = values.to_vec();
    par::sort_floats(mode, &mut v);
    v
}

/// `integral |F_a - F_b|` for two sorted samples by sweeping the merged
/// support.
pub fn w1_staircase(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (t - prev);
        while i < a.len() && a[i] == t {
            i += 1;
        }
        while j < b.len() && b[j] == t {
            j += 1;
        }
        prev = t;
    }
    total
}

/// Wasserstein-1 distance between two empirical distributions.
pub fn w1_samples(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mode = ExecMode::default();
    let (a, b) = (sorted(a, mode), sorted(b, mode));
    if a.len() == b.len() {
        let s: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        Ok(s / a.len() as f64)
    } else {
        Ok(w1_staircase(&a, &b))
    }
}

/// Wasserstein-1 distance between an empirical distribution and the Gibbs
/// law: `integral |F_a - G|` over the union of both supports.
///
/// On each gap between consecutive order statistics `F_a` is constant and
/// the integral of `G` is available in closed form from the CDF and partial
/// first moment, so the only root finds are at the gaps where `G` crosses
/// the empirical level.
pub fn w1_to_gibbs(a: &[f64], g: &GibbsDensity) -> Result<f64, MetricsError> {
    w1_to_gibbs_with(a, g, ExecMode::default())
}

pub fn w1_to_gibbs_with(a: &[f64], g: &GibbsDensity, mode: ExecMode) -> Result<f64, MetricsError> {
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let xs = sorted(a, mode);
    let n = xs.len();
    let (lo, hi) = g.domain();
    let mean = g.mean();
    // (G(x), integral_{-inf}^x G)
    let eval = |x: f64| -> (f64, f64) {
        if x <= lo {
            (0.0, 0.0)
        } else if x >= hi {
            (1.0, x - mean)
        } else {
            let (c, m1) = g.cdf_and_partial_mean(x);
            (c, x * c - m1)
        }
    };
    let mut knots = Vec::with_capacity(n + 2);
    knots.push(xs[0].min(lo));
    knots.extend_from_slice(&xs);
    knots.push(xs[n - 1].max(hi));
    let values = par::map(mode, &knots, |&x| eval(x));
    let parts = par::map_range(mode, knots.len() - 1, |k| {
        let (x0, x1) = (knots[k], knots[k + 1]);
        if x1 <= x0 {
            return 0.0;
        }
        let level = k as f64 / n as f64;
        let ((g0, h0), (g1, h1)) = (values[k], values[k + 1]);
        let part = if g0 >= level {
            (h1 - h0) - level * (x1 - x0)
        } else if g1 <= level {
            level * (x1 - x0) - (h1 - h0)
        } else {
            let xc = g.quantile(level).unwrap_or(0.5 * (x0 + x1)).clamp(x0, x1);
            let (_, hc) = eval(xc);
            (level * (xc - x0) - (hc - h0)) + ((h1 - hc) - level * (x1 - xc))
        };
        part.max(0.0)
    });
    Ok(parts.iter().sum())
}

/// W1 to the Gibbs law of each prefix `a[..k]` for `k` in `checkpoints`.
pub fn w1_to_gibbs_prefixes(
    a: &[f64],
    g: &GibbsDensity,
    checkpoints: &[usize],
    mode: ExecMode,
) -> Result<Vec<f64>, MetricsError> {
    checkpoints
        .iter()
        .map(|&k| w1_to_gibbs_with(&a[..k.min(a.len())], g, mode))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Samples that fell inside the edge range.
    pub total: u64,
    /// Samples outside the edge range (or NaN); excluded from `density`.
    pub overflow: u64,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Center of the densest bin among those centered in `[lo, hi]`.
    pub fn peak_in(&self, lo: f64, hi: f64) -> Option<f64> {
        self.centers()
            .into_iter()
            .zip(&self.density)
            .filter(|(c, _)| *c >= lo && *c <= hi)
            .fold(None, |best: Option<(f64, f64)>, (c, &d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((c, d)),
            })
            .map(|(c, _)| c)
    }
}

pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

/// Bins are left-closed, the last one also right-closed.
pub fn histogram(samples: &[f64], edges: &[f64]) -> Result<Histogram, MetricsError> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(MetricsError::Edges);
    }
    let bins = edges.len() - 1;
    let (first, last) = (edges[0], edges[bins]);
    let mut counts = vec![0u64; bins];
    let mut overflow = 0;
    for &x in samples {
        if !(x >= first && x <= last) {
            overflow += 1;
            continue;
        }
        let k = (edges.partition_point(|&e| e <= x) - 1).min(bins - 1);
        counts[k] += 1;
    }
    let total: u64 = counts.iter().sum();
    let density = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| if total == 0 { 0.0 } else { c as f64 / (total as f64 * (w[1] - w[0])) })
        .collect();
    Ok(Histogram { edges: edges.to_vec(), counts, total, overflow, density })
}

/// `sum |rho1 - rho2| dx` over matching grids.
pub fn l1_density(a: &DensityField, b: &DensityField) -> Result<f64, MetricsError> {
    if a.grid.faces != b.grid.faces {
        return Err(MetricsError::GridMismatch);
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .zip(&a.grid.widths)
        .map(|((x, y), w)| (x - y).abs() * w)
        .sum())
}

/// Free energy `E + sigma * S` of a histogram density: bin masses weight
/// `f` at bin centers, and empty bins contribute nothing to the entropy.
pub fn histogram_free_energy(p: &PiecewisePotential1D, sigma: f64, h: &Histogram) -> f64 {
    h.centers()
        .iter()
        .zip(&h.density)
        .zip(h.widths())
        .filter(|(_, w)| *w > 0.0)
        .map(|((&c, &d), w)| {
            let mass = d * w;
            if mass > 0.0 {
                mass * (p.eval(c) + sigma * d.ln())
            } else {
                0.0
            }
        })
        .sum()
}

/// Free energy of consecutive, non-overlapping windows of `window` samples.
pub fn free_energy_trace(
    p: &PiecewisePotential1D,
    sigma: f64,
    samples: &[f64],
    window: usize,
    edges: &[f64],
) -> Result<Vec<f64>, MetricsError> {
    if window < 100 {
        return Err(MetricsError::Window(window));
    }
    samples
        .chunks_exact(window)
        .map(|w| histogram(w, edges).map(|h| histogram_free_energy(p, sigma, &h)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::example_potential;
    use proptest::prelude::*;

    #[test]
    fn w1_examples() {
        let a = [0.3, -1.0, 2.0];
        assert_eq!(w1_samples(&a, &a).unwrap(), 0.0);
        assert_eq!(w1_samples(&[0.0], &[1.0]).unwrap(), 1.0);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.25).collect();
        assert!((w1_samples(&a, &shifted).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(w1_samples(&[], &a), Err(MetricsError::Empty));
        // Unequal sizes: {0} vs {0, 1} -> integral over [0,1] of 1/2.
        assert!((w1_samples(&[0.0], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn histogram_binning_and_closure() {
        let h = histogram(&[0.0, 1.0, 2.0, 3.0, 5.0, -0.1], &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(h.counts, vec![1, 1, 2]);
        assert_eq!(h.overflow, 2);
        assert_eq!(h.total, 4);
        let mass: f64 = h.density.iter().zip(h.widths()).map(|(d, w)| d * w).sum();
        assert!((mass - 1.0).abs() < 1e-12);

        let one_each = histogram(&[0.5, 1.5, 2.5], &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(one_each.density.iter().all(|&d| (d - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(histogram(&[1.0], &[1.0, 1.0]), Err(MetricsError::Edges));
    }

    #[test]
    fn w1_to_gibbs_dirac_at_median_is_mean_abs_deviation() {
        let g = GibbsDensity::new(&example_potential(), 1.0, None).unwrap();
        let med = g.quantile(0.5).unwrap();
        let w = w1_to_gibbs(&[med; 10], &g).unwrap();
        // Oracle: trapezoid on a fine grid of |x - med| pi(x), kinks on nodes.
        let (lo, hi) = g.domain();
        let n = 400_000;
        let h = (hi - lo) / n as f64;
        let f = |x: f64| (x - med).abs() * g.pdf(x);
        let oracle = h * ((1..n).map(|i| f(lo + h * i as f64)).sum::<f64>() + 0.5 * (f(lo) + f(hi)));
        assert!((w - oracle).abs() < 1e-7, "{w} vs {oracle}");
    }

    #[test]
    fn w1_to_gibbs_detects_shift_and_matches_staircase() {
        let g = GibbsDensity::new(&example_potential(), 1.0, None).unwrap();
        let draws = g.iid_sample(20_000, 8, ExecMode::default());
        let shifted: Vec<f64> = draws.iter().map(|x| x + 0.5).collect();
        assert!(w1_to_gibbs(&shifted, &g).unwrap() >= 0.4);
        let w = w1_to_gibbs(&draws, &g).unwrap();
        assert!(w < 0.05);
        // Against a huge i.i.d. reference the staircase estimate agrees.
        let reference = g.iid_sample(400_000, 9, ExecMode::default());
        let w_emp = w1_samples(&draws, &reference).unwrap();
        assert!((w - w_emp).abs() < 0.01, "{w} vs {w_emp}");
    }

    #[test]
    fn free_energy_window_guard() {
        let p = example_potential();
        assert_eq!(free_energy_trace(&p, 1.0, &[0.0; 500], 50, &[0.0, 1.0]), Err(MetricsError::Window(50)));
        let t = free_energy_trace(&p, 1.0, &[0.0; 500], 100, &[-1.0, 1.0]).unwrap();
        assert_eq!(t.len(), 5);
    }

    proptest! {
        #[test]
        fn w1_is_a_metric(
            a in proptest::collection::vec(-10.0f64..10.0, 1..40),
            b in proptest::collection::vec(-10.0f64..10.0, 1..40),
            c in proptest::collection::vec(-10.0f64..10.0, 1..40),
        ) {
            let ab = w1_samples(&a, &b).unwrap();
            let ba = w1_samples(&b, &a).unwrap();
            let bc = w1_samples(&b, &c).unwrap();
            let ac = w1_samples(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert_eq!(w1_samples(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn equal_size_formula_matches_staircase(
            pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..60),
        ) {
            let (mut a, mut b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let direct = w1_samples(&a, &b).unwrap();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert!((direct - w1_staircase(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn histogram_mass_closes(xs in proptest::collection::vec(-5.0f64..5.0, 1..300)) {
            let h = histogram(&xs, &uniform_edges(-5.0, 5.0, 17)).unwrap();
            prop_assert_eq!(h.total + h.overflow, xs.len() as u64);
            let mass: f64 = h.density.iter().zip(h.widths()).map(|(d, w)| d * w).sum();
            prop_assert!((mass - 1.0).abs() < 1e-12);
        }
    }
}
