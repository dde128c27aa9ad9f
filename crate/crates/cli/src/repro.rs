//! Desk-scale reproductions of the experiment figures.
//!
//! Runs are shorter than the originals (2e6 ULA steps per step size instead
//! of 1e7; a synthetic regression instead of the UCI data sets). The scaling
//! is written into each figure's metadata.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use langinc_core::metrics::{histogram, uniform_edges, w1_to_gibbs_prefixes, Histogram};
use langinc_core::par::{self, ExecMode};
use langinc_core::potential::Dataset;
use langinc_core::sampler::{self, ChainConfig};
use langinc_core::{GibbsDensity, PiecewisePotential1D, ReluNetPotential, SamplerKind, SelectionRule};
use serde::Serialize;
use serde_json::json;

use crate::commands::local_maxima;
use crate::config::ExperimentConfig;
use crate::output::{write_json, write_table, Table};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    GibbsPdf,
    MetroHist,
    UlaHist,
    WassersteinCurve,
    ReluToy,
}

pub const ULA_EPSILONS: [f64; 3] = [0.01, 0.001, 0.0001];
pub const ULA_SAMPLES: u64 = 2_000_000;
pub const ULA_BURN_IN: u64 = 100_000;
pub const METRO_SAMPLES: u64 = 100_000;
pub const PROPOSAL_STD: f64 = 1.0;
pub const INIT: f64 = 0.0;
/// Sample counts at which W1 to the Gibbs law is reported.
pub const CHECKPOINTS: [usize; 9] =
    [10_000, 20_000, 50_000, 100_000, 200_000, 500_000, 1_000_000, 1_500_000, 2_000_000];
const SCALING: &str = "2e6 retained samples per chain after 1e5 burn-in steps (the original runs used 1e7 samples)";

pub fn hist_edges() -> Vec<f64> {
    uniform_edges(-4.05, 4.05, 81)
}

fn chain_config(epsilon: f64, n_steps: u64, burn_in: u64, seed: u64) -> ChainConfig {
    ChainConfig {
        epsilon,
        sigma: 1.0,
        n_steps,
        burn_in,
        thin: 1,
        seed,
        selection: SelectionRule::MinNorm,
        init: vec![INIT],
        proposal_std: Some(PROPOSAL_STD),
    }
}

/// One ULA chain per step size; chain `i` uses seed `seed ^ i`.
pub fn ula_chains(p: &PiecewisePotential1D, seed: u64) -> Result<Vec<Vec<f64>>, CliError> {
    let base = chain_config(0.0, ULA_BURN_IN + ULA_SAMPLES, ULA_BURN_IN, seed);
    par::map_range(ExecMode::default(), ULA_EPSILONS.len(), |i| {
        let cfg = ChainConfig { epsilon: ULA_EPSILONS[i], ..base.for_chain(i as u64) };
        sampler::run_ula(p, &cfg).map(|c| c.first_coordinate())
    })
    .into_iter()
    .map(|r| r.map_err(CliError::from))
    .collect()
}

/// Random-walk Metropolis reference chain (seed `seed ^ 3`).
pub fn metropolis_chain(p: &PiecewisePotential1D, seed: u64, n: u64, burn_in: u64) -> Result<Vec<f64>, CliError> {
    // epsilon is unused by random-walk Metropolis but must pass validation.
    let cfg = chain_config(1e-3, burn_in + n, burn_in, seed).for_chain(ULA_EPSILONS.len() as u64);
    Ok(sampler::run_rwm(p, &cfg)?.first_coordinate())
}

/// Histogram modes on the negative and positive half-lines.
pub fn modes(h: &Histogram) -> (Option<f64>, Option<f64>) {
    (h.peak_in(f64::NEG_INFINITY, 0.0), h.peak_in(0.0, f64::INFINITY))
}

#[derive(Clone, Debug, Serialize)]
pub struct WassersteinCurve {
    pub checkpoints: Vec<usize>,
    /// One row per step size, in the order of [`ULA_EPSILONS`].
    pub ula: Vec<Vec<f64>>,
    pub metropolis: Vec<f64>,
}

pub fn wasserstein_curve(g: &GibbsDensity, chains: &[Vec<f64>], rwm: &[f64]) -> Result<WassersteinCurve, CliError> {
    let mode = ExecMode::default();
    let ula = chains
        .iter()
        .map(|c| w1_to_gibbs_prefixes(c, g, &CHECKPOINTS, mode))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(WassersteinCurve { checkpoints: CHECKPOINTS.to_vec(), ula, metropolis: w1_to_gibbs_prefixes(rwm, g, &CHECKPOINTS, mode)? })
}

#[derive(Clone, Debug, Serialize)]
pub struct ReluToy {
    pub steps: Vec<u64>,
    /// Test loss averaged over chains.
    pub ula: Vec<f64>,
    pub rwm: Vec<f64>,
    pub ula_rwm_acceptance: (f64, f64),
}

pub mod relu_toy {
    //! Settings of the ReLU-network toy problem.
    pub const DATA_SEED: u64 = 2024;
    pub const N_TRAIN: usize = 200;
    pub const N_TEST: usize = 100;
    pub const DIM: usize = 5;
    pub const LAMBDA: f64 = 1e-3;
    pub const EPSILON: f64 = 1e-5;
    pub const STEPS: u64 = 20_000;
    pub const THIN: u64 = 10;
    /// Test losses are averaged over this many independent chains.
    pub const CHAINS: usize = 20;
    /// Temperature `1/n_train`: the potential is a mean squared error.
    pub const SIGMA: f64 = 1.0 / N_TRAIN as f64;
}

/// Training and test sets drawn from one synthetic regression stream.
pub fn relu_data() -> (Dataset, Dataset) {
    use relu_toy::*;
    let all = Dataset::synthetic_regression(N_TRAIN + N_TEST, DIM, DATA_SEED);
    let split = N_TRAIN * DIM;
    let train = Dataset::new(DIM, all.x[..split].to_vec(), all.y[..N_TRAIN].to_vec()).expect("consistent split");
    let test = Dataset::new(DIM, all.x[split..].to_vec(), all.y[N_TRAIN..].to_vec()).expect("consistent split");
    (train, test)
}

pub fn run_relu_toy(seed: u64) -> Result<ReluToy, CliError> {
    use relu_toy::*;
    let (train, test) = relu_data();
    let net = ReluNetPotential::three_by_ten(train, LAMBDA, 0.0)?;
    let cfg = ChainConfig {
        epsilon: EPSILON,
        sigma: SIGMA,
        n_steps: STEPS,
        burn_in: 0,
        thin: THIN,
        seed,
        selection: SelectionRule::MinNorm,
        init: net.init_params(seed),
        proposal_std: Some(PROPOSAL_STD),
    };
    let mode = ExecMode::default();
    let mut traces = Vec::new();
    let mut acceptance = Vec::new();
    let mut steps = Vec::new();
    for kind in [SamplerKind::Ula, SamplerKind::Rwm] {
        let chains = sampler::run_chains(kind, &net, &cfg, CHAINS, mode)?;
        steps = chains[0].steps.clone();
        let losses = par::map(mode, &chains, |c| (0..c.len()).map(|i| net.mse(c.sample(i), &test)).collect::<Result<Vec<f64>, _>>());
        let losses = losses.into_iter().collect::<Result<Vec<_>, _>>()?;
        let mean: Vec<f64> = (0..steps.len()).map(|i| losses.iter().map(|l| l[i]).sum::<f64>() / CHAINS as f64).collect();
        traces.push(mean);
        acceptance.push(chains.iter().map(|c| c.acceptance_rate()).sum::<f64>() / CHAINS as f64);
    }
    let rwm = traces.pop().expect("two traces");
    let ula = traces.pop().expect("two traces");
    Ok(ReluToy { steps, ula, rwm, ula_rwm_acceptance: (acceptance[0], acceptance[1]) })
}

/// Mean of `v` over the fraction window `[a, b)` of its length.
pub fn window_mean(v: &[f64], a: f64, b: f64) -> f64 {
    let n = v.len() as f64;
    let (i, j) = ((a * n).round() as usize, ((b * n).round() as usize).max((a * n).round() as usize + 1));
    v[i..j].iter().sum::<f64>() / (j - i) as f64
}

pub fn cmd_repro(cfg: &ExperimentConfig, figure: Figure, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let p = cfg.potential.build()?;
    let seed = cfg.sampler.seed;
    let mut files = Vec::new();
    match figure {
        Figure::GibbsPdf => {
            let g = GibbsDensity::new(&p, 1.0, None)?;
            let mut t = Table::new(&["x", "pdf"]);
            for i in 0..=800 {
                let x = -4.0 + 8.0 * i as f64 / 800.0;
                t.push(vec![x, g.pdf(x)]);
            }
            files.extend(write_table(out, "gibbs_pdf", "Stationary density exp(-f)/Z", &t)?);
            let meta = json!({
                "figure": "gibbs-pdf",
                "potential": p.to_spec(),
                "normalizer": g.normalizer(),
                "local_maxima": local_maxima(&t.column(0), &t.column(1)),
            });
            files.push(write_json(out, "gibbs_pdf_meta.json", &meta)?);
        }
        Figure::MetroHist => {
            let g = GibbsDensity::new(&p, 1.0, None)?;
            let samples = metropolis_chain(&p, seed, METRO_SAMPLES, 0)?;
            let mut s = Table::new(&["step", "x"]);
            for (i, x) in samples.iter().enumerate() {
                s.push(vec![(i + 1) as f64, *x]);
            }
            files.extend(write_table(out, "metro_samples", "Metropolis samples", &s)?);
            let h = histogram(&samples, &hist_edges())?;
            let mut t = Table::new(&["x", "density", "gibbs_pdf"]);
            for (c, d) in h.centers().into_iter().zip(&h.density) {
                t.push(vec![c, *d, g.pdf(c)]);
            }
            files.extend(write_table(out, "metro_hist", "Histogram of 1e5 Metropolis samples", &t)?);
            let meta = json!({
                "figure": "metro-hist",
                "seed": seed,
                "samples": METRO_SAMPLES,
                "proposal_std": PROPOSAL_STD,
                "init": INIT,
                "modes": modes(&h),
                "overflow": h.overflow,
                "notes": "proposal_std and init are defaults of this tool, not values stated by the paper",
            });
            files.push(write_json(out, "metro_hist_meta.json", &meta)?);
        }
        Figure::UlaHist => {
            let g = GibbsDensity::new(&p, 1.0, None)?;
            let chains = ula_chains(&p, seed)?;
            let hists: Vec<Histogram> = chains.iter().map(|c| histogram(c, &hist_edges())).collect::<Result<_, _>>()?;
            let mut headers = vec!["x".to_string()];
            headers.extend(ULA_EPSILONS.iter().map(|e| format!("density_eps_{e}")));
            headers.push("gibbs_pdf".into());
            let mut t = Table::new(&headers);
            for (i, c) in hists[0].centers().into_iter().enumerate() {
                let mut row = vec![c];
                row.extend(hists.iter().map(|h| h.density[i]));
                row.push(g.pdf(c));
                t.push(row);
            }
            files.extend(write_table(out, "ula_hist", "ULA histograms", &t)?);
            let meta = json!({
                "figure": "ula-hist",
                "seed": seed,
                "epsilons": ULA_EPSILONS,
                "burn_in": ULA_BURN_IN,
                "samples": ULA_SAMPLES,
                "init": INIT,
                "modes": hists.iter().map(modes).collect::<Vec<_>>(),
                "overflow": hists.iter().map(|h| h.overflow).collect::<Vec<_>>(),
                "scaling": SCALING,
            });
            files.push(write_json(out, "ula_hist_meta.json", &meta)?);
        }
        Figure::WassersteinCurve => {
            let g = GibbsDensity::new(&p, 1.0, None)?;
            let chains = ula_chains(&p, seed)?;
            let rwm = metropolis_chain(&p, seed, ULA_SAMPLES, ULA_BURN_IN)?;
            let curve = wasserstein_curve(&g, &chains, &rwm)?;
            let mut headers = vec!["n".to_string()];
            headers.extend(ULA_EPSILONS.iter().map(|e| format!("w1_eps_{e}")));
            headers.push("w1_metropolis".into());
            let mut t = Table::new(&headers);
            for (k, &n) in curve.checkpoints.iter().enumerate() {
                let mut row = vec![n as f64];
                row.extend(curve.ula.iter().map(|w| w[k]));
                row.push(curve.metropolis[k]);
                t.push(row);
            }
            files.extend(write_table(out, "wasserstein_curve", "W1 to the Gibbs law", &t)?);
            let meta = json!({
                "figure": "wasserstein-curve",
                "seed": seed,
                "epsilons": ULA_EPSILONS,
                "burn_in": ULA_BURN_IN,
                "proposal_std": PROPOSAL_STD,
                "curve": curve,
                "scaling": SCALING,
            });
            files.push(write_json(out, "wasserstein_curve_meta.json", &meta)?);
        }
        Figure::ReluToy => {
            let toy = run_relu_toy(seed)?;
            let mut t = Table::new(&["step", "ula_test_loss", "rwm_test_loss"]);
            for ((s, u), r) in toy.steps.iter().zip(&toy.ula).zip(&toy.rwm) {
                t.push(vec![*s as f64, *u, *r]);
            }
            files.extend(write_table(out, "relu_toy", "Test loss, ReLU network 3x10", &t)?);
            use relu_toy::*;
            let meta = json!({
                "figure": "relu-toy",
                "seed": seed,
                "data_seed": DATA_SEED,
                "n_train": N_TRAIN,
                "n_test": N_TEST,
                "dim": DIM,
                "lambda": LAMBDA,
                "epsilon": EPSILON,
                "sigma": SIGMA,
                "steps": STEPS,
                "thin": THIN,
                "chains": CHAINS,
                "rwm_proposal_std": PROPOSAL_STD,
                "acceptance": toy.ula_rwm_acceptance,
                "ula_plateau_mean": window_mean(&toy.ula, 0.0, 0.05),
                "ula_post_plateau_mean": window_mean(&toy.ula, 0.05, 0.10),
                "ula_final_quarter_mean": window_mean(&toy.ula, 0.75, 1.0),
                "rwm_first_quarter_mean": window_mean(&toy.rwm, 0.0, 0.25),
                "rwm_final_quarter_mean": window_mean(&toy.rwm, 0.75, 1.0),
                "scaling": "synthetic regression (200 train / 100 test, d = 5) instead of the UCI data sets",
            });
            files.push(write_json(out, "relu_toy_meta.json", &meta)?);
        }
    }
    Ok(files)
}
