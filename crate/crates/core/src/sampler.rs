//! Subgradient Langevin, random-walk Metropolis and MALA chains.
//!
//! Every chain owns a [`ChainRng`] seeded from its config, so a run is a pure
//! function of `(potential, config)`. The ULA update is
//!
//! ```text
//! x_{k+1} = x_k - eps * g_k + sqrt(2 * sigma * eps) * B_k,   g_k in F(x_k)
//! ```
//!
//! where `g_k` comes from the configured [`SelectionRule`]. With `sigma = 1`
//! this is the plain Euler–Maruyama discretization of the Langevin inclusion.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, ExecMode};
use crate::potential::{Potential, SelectionRule};
use crate::rng::{chain_rng, open_uniform, ChainRng};

/// States with any coordinate beyond this magnitude count as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e8;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("invalid chain config: {0}")]
    Config(String),
    #[error("chain diverged at step {step}")]
    Diverged { step: u64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    #[default]
    Ula,
    Rwm,
    Mala,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub epsilon: f64,
    pub sigma: f64,
    pub n_steps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub selection: SelectionRule,
    pub init: Vec<f64>,
    /// Random-walk proposal scale; required by [`run_rwm`] only.
    pub proposal_std: Option<f64>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            sigma: 1.0,
            n_steps: 1000,
            burn_in: 0,
            thin: 1,
            seed: 0,
            selection: SelectionRule::MinNorm,
            init: vec![0.0],
            proposal_std: Some(1.0),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self, dim: usize) -> Result<(), SamplerError> {
        let fail = |m: String| Err(SamplerError::Config(m));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return fail(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be > 0, got {}", self.sigma));
        }
        if self.n_steps == 0 {
            return fail("n_steps must be positive".into());
        }
        if self.burn_in + 1 > self.n_steps {
            return fail(format!("burn_in {} leaves no steps out of {}", self.burn_in, self.n_steps));
        }
        if self.thin == 0 {
            return fail("thin must be positive".into());
        }
        if self.init.len() != dim {
            return fail(format!("init has dimension {}, potential has {dim}", self.init.len()));
        }
        if self.init.iter().any(|v| !v.is_finite()) {
            return fail("init must be finite".into());
        }
        if let Some(s) = self.proposal_std {
            if !(s > 0.0 && s.is_finite()) {
                return fail(format!("proposal_std must be > 0, got {s}"));
            }
        }
        Ok(())
    }

    /// Number of retained samples: `floor((n_steps - burn_in) / thin)`.
    pub fn retained(&self) -> u64 {
        (self.n_steps - self.burn_in) / self.thin
    }

    /// Copy of this config for chain `index` of a multi-chain run.
    pub fn for_chain(&self, index: u64) -> Self {
        Self { seed: self.seed ^ index, ..self.clone() }
    }
}

/// Retained states of one run, stored row-major (`dim` values per sample).
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub kind: SamplerKind,
    pub dim: usize,
    /// Step index (1-based count of updates) of each retained sample.
    pub steps: Vec<u64>,
    pub samples: Vec<f64>,
    /// Accepted proposals; every ULA step counts as accepted.
    pub accepted: u64,
    pub config: ChainConfig,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    /// First coordinate of every sample; the whole trajectory in 1D.
    pub fn first_coordinate(&self) -> Vec<f64> {
        self.samples.iter().step_by(self.dim).copied().collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.config.n_steps as f64
    }
}

/// One ULA update with explicit standard-normal `noise`.
pub fn ula_update(x: &[f64], g: &[f64], noise: &[f64], epsilon: f64, sigma: f64, out: &mut [f64]) {
    let scale = (2.0 * sigma * epsilon).sqrt();
    for (((o, x), g), b) in out.iter_mut().zip(x).zip(g).zip(noise) {
        *o = x - epsilon * g + scale * b;
    }
}

/// One ULA step with a caller-supplied noise vector.
pub fn ula_step_with_noise<P: Potential + ?Sized>(
    p: &P,
    x: &[f64],
    cfg: &ChainConfig,
    rng: &mut ChainRng,
    noise: &[f64],
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    p.subgradient(x, cfg.selection, rng, &mut g);
    let mut out = vec![0.0; x.len()];
    ula_update(x, &g, noise, cfg.epsilon, cfg.sigma, &mut out);
    out
}

/// One ULA step: subgradient selection first, then the Gaussian draw.
pub fn ula_step<P: Potential + ?Sized>(p: &P, x: &[f64], cfg: &ChainConfig, rng: &mut ChainRng) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    p.subgradient(x, cfg.selection, rng, &mut g);
    let noise: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = vec![0.0; x.len()];
    ula_update(x, &g, &noise, cfg.epsilon, cfg.sigma, &mut out);
    out
}

/// Metropolis acceptance probability `min(1, exp(-(f_new - f_old)/sigma))`.
pub fn rwm_accept_prob(f_old: f64, f_new: f64, sigma: f64) -> f64 {
    (-(f_new - f_old) / sigma).exp().min(1.0)
}

/// Log of the MALA Hastings ratio for moving `x -> y` with drift selections
/// `gx`, `gy`. Only differences of `f` enter.
pub fn mala_log_ratio(x: &[f64], y: &[f64], fx: f64, fy: f64, gx: &[f64], gy: &[f64], epsilon: f64, sigma: f64) -> f64 {
    // log q(a | b) = -|a - b + eps g(b)|^2 / (4 eps sigma)
    let log_q = |a: &[f64], b: &[f64], gb: &[f64]| {
        -a.iter()
            .zip(b)
            .zip(gb)
            .map(|((a, b), g)| {
                let r = a - b + epsilon * g;
                r * r
            })
            .sum::<f64>()
            / (4.0 * epsilon * sigma)
    };
    -(fy - fx) / sigma + log_q(x, y, gy) - log_q(y, x, gx)
}

fn out_of_bounds(x: &[f64]) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND)
}

struct Recorder {
    burn_in: u64,
    thin: u64,
    steps: Vec<u64>,
    samples: Vec<f64>,
}

impl Recorder {
    fn new(cfg: &ChainConfig, dim: usize) -> Self {
        let n = cfg.retained() as usize;
        Self {
            burn_in: cfg.burn_in,
            thin: cfg.thin,
            steps: Vec::with_capacity(n),
            samples: Vec::with_capacity(n * dim),
        }
    }

    fn push(&mut self, step: u64, x: &[f64]) {
        if step > self.burn_in && (step - self.burn_in).is_multiple_of(self.thin) {
            self.steps.push(step);
            self.samples.extend_from_slice(x);
        }
    }
}

pub fn run_ula<P: Potential + ?Sized>(p: &P, cfg: &ChainConfig) -> Result<Chain, SamplerError> {
    let dim = p.dim();
    cfg.validate(dim)?;
    let mut rng = chain_rng(cfg.seed, 0);
    let mut rec = Recorder::new(cfg, dim);
    let mut x = cfg.init.clone();
    let mut next = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut noise = vec![0.0; dim];
    for step in 1..=cfg.n_steps {
        p.subgradient(&x, cfg.selection, &mut rng, &mut g);
        for b in noise.iter_mut() {
            *b = rng.sample(StandardNormal);
        }
        ula_update(&x, &g, &noise, cfg.epsilon, cfg.sigma, &mut next);
        if out_of_bounds(&next) {
            return Err(SamplerError::Diverged { step });
        }
        std::mem::swap(&mut x, &mut next);
        rec.push(step, &x);
    }
    Ok(Chain {
        kind: SamplerKind::Ula,
        dim,
        steps: rec.steps,
        samples: rec.samples,
        accepted: cfg.n_steps,
        config: cfg.clone(),
    })
}

pub fn run_rwm<P: Potential + ?Sized>(p: &P, cfg: &ChainConfig) -> Result<Chain, SamplerError> {
    let dim = p.dim();
    cfg.validate(dim)?;
    let scale = cfg
        .proposal_std
        .ok_or_else(|| SamplerError::Config("random-walk Metropolis needs proposal_std".into()))?;
    let mut rng = chain_rng(cfg.seed, 0);
    let mut rec = Recorder::new(cfg, dim);
    let mut x = cfg.init.clone();
    let mut fx = p.value(&x);
    let mut y = vec![0.0; dim];
    let mut accepted = 0;
    for step in 1..=cfg.n_steps {
        for (yi, xi) in y.iter_mut().zip(&x) {
            let b: f64 = rng.sample(StandardNormal);
            *yi = xi + scale * b;
        }
        if out_of_bounds(&y) {
            return Err(SamplerError::Diverged { step });
        }
        let fy = p.value(&y);
        let u = open_uniform(&mut rng);
        if fy.is_finite() && u < rwm_accept_prob(fx, fy, cfg.sigma) {
            std::mem::swap(&mut x, &mut y);
            fx = fy;
            accepted += 1;
        }
        rec.push(step, &x);
    }
    Ok(Chain { kind: SamplerKind::Rwm, dim, steps: rec.steps, samples: rec.samples, accepted, config: cfg.clone() })
}

pub fn run_mala<P: Potential + ?Sized>(p: &P, cfg: &ChainConfig) -> Result<Chain, SamplerError> {
    let dim = p.dim();
    cfg.validate(dim)?;
    let mut rng = chain_rng(cfg.seed, 0);
    let mut rec = Recorder::new(cfg, dim);
    let mut x = cfg.init.clone();
    let mut fx = p.value(&x);
    let mut gx = vec![0.0; dim];
    p.subgradient(&x, cfg.selection, &mut rng, &mut gx);
    let mut y = vec![0.0; dim];
    let mut gy = vec![0.0; dim];
    let mut noise = vec![0.0; dim];
    let mut accepted = 0;
    for step in 1..=cfg.n_steps {
        for b in noise.iter_mut() {
            *b = rng.sample(StandardNormal);
        }
        ula_update(&x, &gx, &noise, cfg.epsilon, cfg.sigma, &mut y);
        if out_of_bounds(&y) {
            return Err(SamplerError::Diverged { step });
        }
        let fy = p.value(&y);
        p.subgradient(&y, cfg.selection, &mut rng, &mut gy);
        let log_ratio = mala_log_ratio(&x, &y, fx, fy, &gx, &gy, cfg.epsilon, cfg.sigma);
        let u = open_uniform(&mut rng);
        if log_ratio.is_finite() && u.ln() < log_ratio {
            std::mem::swap(&mut x, &mut y);
            std::mem::swap(&mut gx, &mut gy);
            fx = fy;
            accepted += 1;
        }
        rec.push(step, &x);
    }
    Ok(Chain { kind: SamplerKind::Mala, dim, steps: rec.steps, samples: rec.samples, accepted, config: cfg.clone() })
}

pub fn run<P: Potential + ?Sized>(kind: SamplerKind, p: &P, cfg: &ChainConfig) -> Result<Chain, SamplerError> {
    match kind {
        SamplerKind::Ula => run_ula(p, cfg),
        SamplerKind::Rwm => run_rwm(p, cfg),
        SamplerKind::Mala => run_mala(p, cfg),
    }
}

/// Runs `n_chains` independent chains; chain `k` uses seed `cfg.seed ^ k`.
/// The output is the same for every [`ExecMode`].
pub fn run_chains<P: Potential + ?Sized>(
    kind: SamplerKind,
    p: &P,
    cfg: &ChainConfig,
    n_chains: usize,
    mode: ExecMode,
) -> Result<Vec<Chain>, SamplerError> {
    par::map_range(mode, n_chains, |k| run(kind, p, &cfg.for_chain(k as u64)))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{example_potential, PiecewisePotential1D};

    fn cfg(n: u64) -> ChainConfig {
        ChainConfig { n_steps: n, ..Default::default() }
    }

    #[test]
    fn ula_update_examples() {
        let mut out = [0.0];
        ula_update(&[0.3], &[0.0], &[0.0], 0.01, 1.0, &mut out);
        assert_eq!(out[0], 0.3);

        let p = example_potential();
        let c = ChainConfig { epsilon: 0.01, ..Default::default() };
        let mut rng = chain_rng(0, 0);
        let x = ula_step_with_noise(&p, &[0.5], &c, &mut rng, &[0.0]);
        assert!((x[0] - 0.51).abs() < 1e-15);
        // MinNorm picks 0 at the kink.
        let x = ula_step_with_noise(&p, &[0.0], &c, &mut rng, &[0.0]);
        assert_eq!(x[0], 0.0);
    }

    #[test]
    fn sample_count_and_determinism() {
        let p = example_potential();
        let a = run_ula(&p, &ChainConfig { n_steps: 10, seed: 5, ..Default::default() }).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a.accepted, 10);
        let b = run_ula(&p, &ChainConfig { n_steps: 10, seed: 5, ..Default::default() }).unwrap();
        assert_eq!(a, b);
        for (n, burn, thin) in [(100, 0, 3), (100, 99, 1), (101, 10, 7), (7, 3, 10)] {
            let c = ChainConfig { n_steps: n, burn_in: burn, thin, ..Default::default() };
            let ch = run_ula(&p, &c).unwrap();
            assert_eq!(ch.len() as u64, (n - burn) / thin);
            assert!(ch.steps.iter().all(|&s| s > burn && (s - burn) % thin == 0));
        }
    }

    #[test]
    fn config_errors() {
        let p = example_potential();
        for bad in [
            ChainConfig { epsilon: 0.0, ..cfg(10) },
            ChainConfig { sigma: -1.0, ..cfg(10) },
            ChainConfig { burn_in: 10, ..cfg(10) },
            ChainConfig { thin: 0, ..cfg(10) },
            ChainConfig { init: vec![0.0, 1.0], ..cfg(10) },
            cfg(0),
        ] {
            assert!(matches!(run_ula(&p, &bad), Err(SamplerError::Config(_))), "{bad:?}");
        }
        let no_scale = ChainConfig { proposal_std: None, ..cfg(10) };
        assert!(matches!(run_rwm(&p, &no_scale), Err(SamplerError::Config(_))));
    }

    #[test]
    fn divergence_reports_step() {
        // Huge step on a quadratic: |x| grows by a factor 1e3 per step.
        let q = PiecewisePotential1D::polynomial([0.0, 0.0, 0.5, 0.0]).unwrap();
        let c = ChainConfig { epsilon: 1001.0, init: vec![1.0], ..cfg(100) };
        match run_ula(&q, &c) {
            Err(SamplerError::Diverged { step }) => assert!(step <= 5, "step {step}"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn flat_potential_always_accepts() {
        // Constant potentials are not confining, so use a trait object.
        struct Flat;
        impl Potential for Flat {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, _: &[f64]) -> f64 {
                2.5
            }
            fn subgradient(&self, _: &[f64], _: SelectionRule, _: &mut ChainRng, out: &mut [f64]) {
                out[0] = 0.0;
            }
        }
        let ch = run_rwm(&Flat, &cfg(500)).unwrap();
        assert_eq!(ch.acceptance_rate(), 1.0);
        assert_eq!(rwm_accept_prob(1.0, 1.0, 0.3), 1.0);
        let ch = run_mala(&Flat, &cfg(500)).unwrap();
        assert_eq!(ch.acceptance_rate(), 1.0);
    }

    #[test]
    fn mala_identity_move_has_ratio_one() {
        let r = mala_log_ratio(&[0.4], &[0.4], 1.0, 1.0, &[0.0], &[0.0], 0.1, 1.0);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn mala_small_steps_mostly_accept() {
        let q = PiecewisePotential1D::polynomial([0.0, 0.0, 0.5, 0.0]).unwrap();
        let c = ChainConfig { epsilon: 1e-3, n_steps: 10_000, seed: 3, ..Default::default() };
        let ch = run_mala(&q, &c).unwrap();
        assert!(ch.acceptance_rate() >= 0.9, "{}", ch.acceptance_rate());
    }

    #[test]
    fn multi_chain_modes_agree_with_single_runs() {
        let p = example_potential();
        let c = ChainConfig { n_steps: 2000, seed: 99, ..Default::default() };
        let seq = run_chains(SamplerKind::Ula, &p, &c, 4, ExecMode::Sequential).unwrap();
        let par = run_chains(SamplerKind::Ula, &p, &c, 4, ExecMode::Parallel).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq[2], run_ula(&p, &c.for_chain(2)).unwrap());
        assert_ne!(seq[0].samples, seq[1].samples);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn acceptance_probabilities_are_shift_invariant(
                fx in -50.0f64..50.0, fy in -50.0f64..50.0, shift in -1e3f64..1e3, sigma in 0.01f64..10.0,
                x in -3.0f64..3.0, y in -3.0f64..3.0, gx in -2.0f64..2.0, gy in -2.0f64..2.0, eps in 1e-4f64..1.0,
            ) {
                let a = rwm_accept_prob(fx, fy, sigma);
                prop_assert!((0.0..=1.0).contains(&a));
                let b = rwm_accept_prob(fx + shift, fy + shift, sigma);
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
                let r1 = mala_log_ratio(&[x], &[y], fx, fy, &[gx], &[gy], eps, sigma);
                let r2 = mala_log_ratio(&[x], &[y], fx + shift, fy + shift, &[gx], &[gy], eps, sigma);
                let (p1, p2) = (r1.exp().min(1.0), r2.exp().min(1.0));
                prop_assert!((0.0..=1.0).contains(&p1));
                prop_assert!((p1 - p2).abs() <= 1e-9);
            }

            #[test]
            fn retained_count_arithmetic(n in 1u64..400, burn_frac in 0.0f64..1.0, thin in 1u64..20) {
                let burn = ((n - 1) as f64 * burn_frac) as u64;
                let c = ChainConfig { n_steps: n, burn_in: burn, thin, ..Default::default() };
                let ch = run_ula(&example_potential(), &c).unwrap();
                prop_assert_eq!(ch.len() as u64, (n - burn) / thin);
            }
        }
    }
}
