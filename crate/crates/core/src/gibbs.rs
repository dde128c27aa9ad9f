//! Exact stationary law `pi(x) = exp(-f(x)/sigma) / Z` of a 1D potential.
//!
//! The normalizer is integrated piece by piece (adaptive Simpson chooses the
//! panels, each panel is then integrated with 8-point Gauss–Legendre), plus
//! closed-form exponential tails when the outer pieces are affine. The panel
//! table doubles as the cumulative table behind [`GibbsDensity::cdf`] and
//! [`GibbsDensity::quantile`].

use thiserror::Error;

use crate::par::{self, ExecMode};
use crate::potential::PiecewisePotential1D;
use crate::quad::{adaptive_simpson, gauss_legendre};
use crate::rng::{chain_rng, open_uniform};

/// Largest admissible probability mass outside the truncation domain,
/// relative to `Z`.
pub const MAX_TAIL_FRACTION: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum GibbsError {
    #[error("sigma must be positive and finite, got {0}")]
    Sigma(f64),
    #[error("invalid domain [{lo}, {hi}]: {reason}")]
    Domain { lo: f64, hi: f64, reason: String },
    #[error("potential does not increase outward at the {side} end of the domain")]
    NotConfined { side: &'static str },
    #[error("truncation drops {fraction:e} of the mass (limit {MAX_TAIL_FRACTION:e})")]
    TailTooHeavy { fraction: f64 },
    #[error("quantile level must lie in (0, 1), got {0}")]
    Level(f64),
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    lo: f64,
    hi: f64,
    /// Unnormalized mass and first moment accumulated before `lo`.
    mass_before: f64,
    moment_before: f64,
}

#[derive(Clone, Debug)]
pub struct GibbsDensity {
    potential: PiecewisePotential1D,
    sigma: f64,
    lo: f64,
    hi: f64,
    /// `min f`, subtracted inside the exponent so the integrand peaks at 1.
    shift: f64,
    /// Integral of the shifted integrand over the whole line (domain plus
    /// closed-form affine tails).
    z_shifted: f64,
    /// Integral of the shifted integrand over the domain.
    mass_in_domain: f64,
    first_moment: f64,
    tail_mass: f64,
    panels: Vec<Panel>,
}

impl GibbsDensity {
    /// Builds the oracle on `domain`, or on an automatically widened domain
    /// whose tails hold less than [`MAX_TAIL_FRACTION`] of the mass.
    pub fn new(
        potential: &PiecewisePotential1D,
        sigma: f64,
        domain: Option<(f64, f64)>,
    ) -> Result<Self, GibbsError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(GibbsError::Sigma(sigma));
        }
        let (lo, hi) = match domain {
            Some((lo, hi)) => {
                check_domain(potential, lo, hi)?;
                (lo, hi)
            }
            None => auto_domain(potential, sigma)?,
        };
        Self::build(potential, sigma, lo, hi)
    }

    fn build(potential: &PiecewisePotential1D, sigma: f64, lo: f64, hi: f64) -> Result<Self, GibbsError> {
        let shift = potential.minimum();
        let weight = |x: f64| (-(potential.eval(x) - shift) / sigma).exp();
        let rough = simpson_estimate(&weight, lo, hi, 4096).max(f64::MIN_POSITIVE);
        let mut cuts = vec![lo];
        cuts.extend(potential.breakpoints().iter().copied().filter(|&b| b > lo && b < hi));
        cuts.push(hi);
        let max_width = ((hi - lo) / 256.0).min(0.25 * sigma.sqrt().min(1.0));
        let mut panels = Vec::new();
        let (mut mass, mut moment) = (0.0, 0.0);
        for w in cuts.windows(2) {
            for leaf in adaptive_simpson(&weight, w[0], w[1], 1e-13 * rough, max_width) {
                panels.push(Panel { lo: leaf.lo, hi: leaf.hi, mass_before: mass, moment_before: moment });
                mass += gauss_legendre(weight, leaf.lo, leaf.hi);
                moment += gauss_legendre(|x| x * weight(x), leaf.lo, leaf.hi);
            }
        }
        let (left_tail, left_affine) = tail(potential, sigma, shift, lo, false)?;
        let (right_tail, right_affine) = tail(potential, sigma, shift, hi, true)?;
        let mut z_shifted = mass;
        if left_affine {
            z_shifted += left_tail;
        }
        if right_affine {
            z_shifted += right_tail;
        }
        let tail_mass = left_tail + right_tail;
        let fraction = tail_mass / z_shifted;
        if fraction > MAX_TAIL_FRACTION {
            return Err(GibbsError::TailTooHeavy { fraction });
        }
        Ok(Self {
            potential: potential.clone(),
            sigma,
            lo,
            hi,
            shift,
            z_shifted,
            mass_in_domain: mass,
            first_moment: moment,
            tail_mass,
            panels,
        })
    }

    pub fn potential(&self) -> &PiecewisePotential1D {
        &self.potential
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// `Z = integral of exp(-f/sigma)` over the real line.
    pub fn normalizer(&self) -> f64 {
        self.z_shifted * (-self.shift / self.sigma).exp()
    }

    /// `log Z`, safe when `Z` itself would overflow or underflow.
    pub fn log_normalizer(&self) -> f64 {
        self.z_shifted.ln() - self.shift / self.sigma
    }

    /// Estimated mass outside the domain divided by `Z`.
    pub fn tail_fraction(&self) -> f64 {
        self.tail_mass / self.z_shifted
    }

    /// Integral of [`Self::pdf`] over the domain.
    pub fn domain_mass(&self) -> f64 {
        self.mass_in_domain / self.z_shifted
    }

    fn weight(&self, x: f64) -> f64 {
        (-(self.potential.eval(x) - self.shift) / self.sigma).exp()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.weight(x) / self.z_shifted
    }

    fn panel_of(&self, x: f64) -> &Panel {
        let k = self.panels.partition_point(|p| p.lo <= x);
        &self.panels[k.saturating_sub(1)]
    }

    /// Unnormalized mass and first moment on `[lo, x]`.
    fn partials(&self, x: f64) -> (f64, f64) {
        if x <= self.lo {
            return (0.0, 0.0);
        }
        if x >= self.hi {
            return (self.mass_in_domain, self.first_moment);
        }
        let p = self.panel_of(x);
        let half = 0.5 * (x - p.lo);
        let mid = 0.5 * (x + p.lo);
        let (mut m, mut m1) = (0.0, 0.0);
        for (node, w) in GL_PAIRS {
            let y = mid + half * node;
            let v = w * self.weight(y);
            m += v;
            m1 += v * y;
        }
        (p.mass_before + m * half, p.moment_before + m1 * half)
    }

    /// CDF of the law truncated to the domain: 0 at the left end, 1 at the
    /// right end.
    pub fn cdf(&self, x: f64) -> f64 {
        (self.partials(x).0 / self.mass_in_domain).clamp(0.0, 1.0)
    }

    /// CDF and partial first moment `integral_lo^x y pi(y) dy`, both for the
    /// truncated law.
    pub fn cdf_and_partial_mean(&self, x: f64) -> (f64, f64) {
        let (m, m1) = self.partials(x);
        ((m / self.mass_in_domain).clamp(0.0, 1.0), m1 / self.mass_in_domain)
    }

    /// Mean of the truncated law.
    pub fn mean(&self) -> f64 {
        self.first_moment / self.mass_in_domain
    }

    /// Inverse CDF by bisection to `1e-12` in `x`.
    pub fn quantile(&self, u: f64) -> Result<f64, GibbsError> {
        if !(u > 0.0 && u < 1.0) {
            return Err(GibbsError::Level(u));
        }
        let target = u * self.mass_in_domain;
        let k = self.panels.partition_point(|p| p.mass_before <= target).saturating_sub(1);
        let panel = &self.panels[k];
        let (mut a, mut b) = (panel.lo, panel.hi);
        if k + 1 == self.panels.len() {
            b = self.hi;
        }
        while b - a > 1e-12 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.partials(mid).0 < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Inverse-CDF transform of externally supplied uniforms.
    pub fn sample_from_uniforms(&self, uniforms: &[f64], mode: ExecMode) -> Result<Vec<f64>, GibbsError> {
        par::map(mode, uniforms, |&u| self.quantile(u)).into_iter().collect()
    }

    /// `n` i.i.d. draws: open uniforms from the seeded stream, then the
    /// quantile function.
    pub fn iid_sample(&self, n: usize, seed: u64, mode: ExecMode) -> Vec<f64> {
        let mut rng = chain_rng(seed, 0);
        let uniforms: Vec<f64> = (0..n).map(|_| open_uniform(&mut rng)).collect();
        self.sample_from_uniforms(&uniforms, mode).expect("open uniforms are valid levels")
    }
}

const GL_PAIRS: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// `Z` for `potential` at temperature `sigma` on `domain` (or an automatic
/// domain when `None`).
pub fn normalizer(
    potential: &PiecewisePotential1D,
    sigma: f64,
    domain: Option<(f64, f64)>,
) -> Result<f64, GibbsError> {
    GibbsDensity::new(potential, sigma, domain).map(|g| g.normalizer())
}

fn check_domain(p: &PiecewisePotential1D, lo: f64, hi: f64) -> Result<(), GibbsError> {
    let err = |reason: &str| Err(GibbsError::Domain { lo, hi, reason: reason.into() });
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return err("need finite lo < hi");
    }
    if let (Some(first), Some(last)) = (p.breakpoints().first(), p.breakpoints().last()) {
        if !(lo < *first && hi > *last) {
            return err("every breakpoint must lie strictly inside");
        }
    }
    Ok(())
}

/// Mass beyond `end` (right side when `right`), and whether the value is
/// exact (affine outer piece) rather than a bound.
fn tail(p: &PiecewisePotential1D, sigma: f64, shift: f64, end: f64, right: bool) -> Result<(f64, bool), GibbsError> {
    let piece = if right { p.pieces().len() - 1 } else { 0 };
    let slope = p.derivative_piece(piece, end);
    let outward = if right { slope } else { -slope };
    if outward <= 0.0 {
        return Err(GibbsError::NotConfined { side: if right { "right" } else { "left" } });
    }
    // For an affine piece this is exact; for a convex one it bounds the tail.
    let c = p.pieces()[piece];
    let affine = c[2] == 0.0 && c[3] == 0.0;
    let boundary_piece = p.piece_index(end) == piece;
    let mass = sigma / outward * (-(p.eval(end) - shift) / sigma).exp();
    Ok((mass, affine && boundary_piece))
}

fn simpson_estimate<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + h * i as f64);
    }
    s * h / 3.0
}

fn auto_domain(p: &PiecewisePotential1D, sigma: f64) -> Result<(f64, f64), GibbsError> {
    let shift = p.minimum();
    let (mut lo, mut hi) = match (p.breakpoints().first(), p.breakpoints().last()) {
        (Some(a), Some(b)) => (a - 1.0, b + 1.0),
        _ => (-1.0, 1.0),
    };
    let weight = |x: f64| (-(p.eval(x) - shift) / sigma).exp();
    let mut step = 1.0f64.max(hi - lo);
    for _ in 0..200 {
        let mass = simpson_estimate(&weight, lo, hi, 4096);
        let side_ok = |end: f64, right: bool| match tail(p, sigma, shift, end, right) {
            Ok((m, _)) => m <= 1e-3 * MAX_TAIL_FRACTION * mass,
            Err(_) => false,
        };
        let (left_ok, right_ok) = (side_ok(lo, false), side_ok(hi, true));
        if left_ok && right_ok {
            return Ok((lo, hi));
        }
        if !left_ok {
            lo -= step;
        }
        if !right_ok {
            hi += step;
        }
        step *= 1.5;
    }
    Err(GibbsError::Domain { lo, hi, reason: "could not find a domain holding the mass".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::example_potential;

    fn example() -> GibbsDensity {
        GibbsDensity::new(&example_potential(), 1.0, Some((-40.0, 40.0))).unwrap()
    }

    /// Independent oracle: fine composite trapezoid on [-40, 40].
    fn trapezoid<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let inner: f64 = (1..n).map(|i| f(lo + h * i as f64)).sum();
        h * (inner + 0.5 * (f(lo) + f(hi)))
    }

    #[test]
    fn normalizer_examples() {
        let z = example().normalizer();
        let exact = 4.0 - 2.0 / std::f64::consts::E;
        assert!((z - exact).abs() / exact < 1e-10, "{z} vs {exact}");
        // Trapezoid oracle with kinks on grid nodes: O(h^2) ~ 1e-8 relative.
        let p = example_potential();
        let oracle = trapezoid(|x| (-p.eval(x)).exp(), -40.0, 40.0, 800_000);
        assert!((z - oracle).abs() / z < 1e-8);

        let q = PiecewisePotential1D::polynomial([0.0, 0.0, 1.0, 0.0]).unwrap();
        let zq = normalizer(&q, 1.0, None).unwrap();
        assert!((zq - std::f64::consts::PI.sqrt()).abs() < 1e-10, "{zq}");

        let abs = PiecewisePotential1D::new(vec![0.0], vec![[0.0, -1.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]).unwrap();
        let z1 = normalizer(&abs, 1.0, None).unwrap();
        let z2 = normalizer(&abs, 2.0, None).unwrap();
        assert!((z1 - 2.0).abs() < 1e-10);
        assert!((z2 - 2.0 * z1).abs() < 1e-10);
    }

    #[test]
    fn pdf_cdf_quantile_examples() {
        let g = example();
        let z = 4.0 - 2.0 / std::f64::consts::E;
        assert!((g.pdf(1.0) - 1.0 / z).abs() < 1e-12);
        assert!((g.pdf(0.0) - (-1.0f64).exp() / z).abs() < 1e-12);
        assert!((g.pdf(1.0) - 0.30635).abs() < 1e-5);
        assert!((g.pdf(0.0) - 0.11270).abs() < 1e-5);
        for u in [0.1, 0.5, 0.9] {
            let x = g.quantile(u).unwrap();
            assert!((g.cdf(x) - u).abs() < 1e-10, "u={u}");
        }
        assert!(g.quantile(0.5).unwrap().abs() < 1e-11);
        assert_eq!(g.cdf(-40.0), 0.0);
        assert_eq!(g.cdf(40.0), 1.0);
        assert!(matches!(g.quantile(0.0), Err(GibbsError::Level(_))));
        assert!(matches!(g.quantile(1.0), Err(GibbsError::Level(_))));
    }

    #[test]
    fn cdf_matches_closed_form() {
        // On [0, 1] the cdf is 1/2 + (e^{x-1} - e^{-1}) / Z.
        let g = example();
        let z = 4.0 - 2.0 / std::f64::consts::E;
        for x in [0.1, 0.37, 0.8] {
            let exact = 0.5 + ((x - 1.0f64).exp() - (-1.0f64).exp()) / z;
            assert!((g.cdf(x) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn pdf_integrates_to_one_and_peaks_at_minimizers() {
        let g = GibbsDensity::new(&example_potential(), 1.0, None).unwrap();
        assert!((g.domain_mass() - 1.0).abs() < 1e-8);
        assert!(g.tail_fraction() <= MAX_TAIL_FRACTION);
        let grid: Vec<f64> = (-3000..=3000).map(|i| i as f64 * 1e-3).collect();
        let best = grid.iter().copied().fold((0.0, f64::NEG_INFINITY), |acc, x| {
            let v = g.pdf(x);
            if v > acc.1 {
                (x, v)
            } else {
                acc
            }
        });
        assert!((best.0.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adding_a_constant_leaves_pdf_unchanged() {
        let p = example_potential();
        let mut spec = p.to_spec();
        for piece in &mut spec.pieces {
            piece[0] += 3.5;
        }
        let shifted = PiecewisePotential1D::from_spec(&spec).unwrap();
        let a = GibbsDensity::new(&p, 0.7, None).unwrap();
        let b = GibbsDensity::new(&shifted, 0.7, None).unwrap();
        for x in [-2.0, -0.3, 0.0, 1.0, 4.0] {
            assert!((a.pdf(x) - b.pdf(x)).abs() < 1e-13);
        }
        assert!((b.normalizer() / a.normalizer() - (-3.5f64 / 0.7).exp()).abs() < 1e-12);
    }

    #[test]
    fn forced_uniform_gives_median() {
        let g = example();
        let x = g.sample_from_uniforms(&[0.5], ExecMode::Sequential).unwrap();
        assert!(x[0].abs() < 1e-11);
    }

    #[test]
    fn domain_errors() {
        let p = example_potential();
        assert!(matches!(GibbsDensity::new(&p, 1.0, Some((-0.5, 5.0))), Err(GibbsError::Domain { .. })));
        assert!(matches!(GibbsDensity::new(&p, 1.0, Some((-3.0, 3.0))), Err(GibbsError::TailTooHeavy { .. })));
        assert!(matches!(GibbsDensity::new(&p, 0.0, None), Err(GibbsError::Sigma(_))));
        // x^2 on the left, x^3 - 3x^2 on the right: confined, but falling at x = 1.
        let q = PiecewisePotential1D::new(vec![0.0], vec![[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, -3.0, 1.0]]).unwrap();
        assert!(matches!(
            GibbsDensity::new(&q, 1.0, Some((-10.0, 1.0))),
            Err(GibbsError::NotConfined { side: "right" })
        ));
    }

    #[test]
    fn quantile_inverts_cdf_across_levels() {
        let g = GibbsDensity::new(&example_potential(), 0.5, None).unwrap();
        for i in 1..200 {
            let u = i as f64 / 200.0;
            let x = g.quantile(u).unwrap();
            assert!((g.cdf(x) - u).abs() < 1e-10);
        }
    }
}
