//! The `sample`, `fp`, `jko`, `gibbs` and `metrics` commands.

use std::path::{Path, PathBuf};

use langinc_core::fokker_planck::{DensityField, FpSolver, Grid1D};
use langinc_core::jko::{self, QuantileField};
use langinc_core::metrics::{histogram, l1_density, uniform_edges, w1_samples, w1_to_gibbs};
use langinc_core::par::ExecMode;
use langinc_core::sampler::{self, ChainConfig};
use langinc_core::GibbsDensity;
use serde_json::json;

use crate::config::{ExperimentConfig, InitSpec, SamplerSection};
use crate::output::{read_samples, write_json, write_table, Table};
use crate::{CliError, JkoArgs, MetricsArgs};

pub fn chain_config(s: &SamplerSection) -> ChainConfig {
    ChainConfig {
        epsilon: s.epsilon,
        sigma: s.sigma,
        n_steps: s.steps,
        burn_in: s.burn_in,
        thin: s.thin,
        seed: s.seed,
        selection: s.selection,
        init: vec![s.init],
        proposal_std: Some(s.proposal_std),
    }
}

pub fn cmd_sample(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let p = cfg.potential.build()?;
    let s = &cfg.sampler;
    if s.chains == 0 {
        return Err(CliError::Config("sampler.chains must be at least 1".into()));
    }
    let chains = sampler::run_chains(s.kind, &p, &chain_config(s), s.chains, ExecMode::default())?;
    let g = GibbsDensity::new(&p, s.sigma, None)?;

    let mut table = Table::new(&["step", "x", "chain"]);
    for (c, chain) in chains.iter().enumerate() {
        for (i, &step) in chain.steps.iter().enumerate() {
            table.push(vec![step as f64, chain.sample(i)[0], c as f64]);
        }
    }
    let mut files = write_table(out, "samples", "Sampler trace", &table)?;

    let pooled: Vec<f64> = chains.iter().flat_map(|c| c.first_coordinate()).collect();
    let hist = histogram(&pooled, &uniform_edges(-4.05, 4.05, 81))?;
    let mut h = Table::new(&["x", "density", "gibbs_pdf"]);
    for (c, d) in hist.centers().into_iter().zip(&hist.density) {
        h.push(vec![c, *d, g.pdf(c)]);
    }
    files.extend(write_table(out, "samples_hist", "Sample histogram", &h)?);

    let per_chain: Vec<_> = chains
        .iter()
        .map(|c| {
            json!({
                "retained": c.len(),
                "acceptance_rate": c.acceptance_rate(),
                "w1_to_gibbs": w1_to_gibbs(&c.first_coordinate(), &g).ok(),
            })
        })
        .collect();
    let meta = json!({
        "command": "sample",
        "potential": p.to_spec(),
        "sampler": s,
        "chains": per_chain,
        "histogram_overflow": hist.overflow,
        "notes": "proposal_std (RWM) and init are defaults of this tool, not values stated by the paper",
    });
    files.push(write_json(out, "samples_meta.json", &meta)?);
    Ok(files)
}

/// Cell values of the initial law on `grid`.
pub fn init_density(spec: InitSpec, grid: &Grid1D) -> DensityField {
    match spec {
        InitSpec::Gaussian { mean, std } => {
            DensityField::from_fn(grid, |x| (-(x - mean) * (x - mean) / (2.0 * std * std)).exp())
        }
        InitSpec::Uniform { a, b } => {
            let values = grid
                .faces
                .windows(2)
                .zip(&grid.widths)
                .map(|(f, w)| (f[1].min(b) - f[0].max(a)).max(0.0) / w)
                .collect();
            DensityField::new(grid.clone(), values, 0.0).normalized()
        }
    }
}

pub fn init_quantiles(spec: InitSpec, m: usize) -> Result<QuantileField, CliError> {
    Ok(match spec {
        InitSpec::Gaussian { mean, std } => QuantileField::gaussian(mean, std, m)?,
        InitSpec::Uniform { a, b } => QuantileField::uniform(a, b, m)?,
    })
}

/// `x,rho` rows at the cell centers, plus the two walls carrying the
/// adjacent cell value, so the trapezoid rule recovers the cell mass.
pub fn density_table(rho: &DensityField) -> Table {
    let g = &rho.grid;
    let (lo, hi) = g.domain();
    let mut t = Table::new(&["x", "rho"]);
    t.push(vec![lo, rho.values[0]]);
    for (x, v) in g.centers.iter().zip(&rho.values) {
        t.push(vec![*x, *v]);
    }
    t.push(vec![hi, rho.values[rho.values.len() - 1]]);
    t
}

fn time_tag(t: f64) -> String {
    format!("t{t}")
}

pub fn cmd_fp(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let p = cfg.potential.build()?;
    let s = &cfg.fp;
    let grid = Grid1D::build(&p, (s.domain[0], s.domain[1]), s.n)?;
    let solver = FpSolver::new(&p, s.sigma, &grid)?;
    let steady = solver.steady_state(s.tol)?;
    let mut files = write_table(out, "fp_steady", "Fokker-Planck steady state", &density_table(&steady))?;

    let residuals = solver.interface_residual(&steady)?;
    let mut r = Table::new(&["breakpoint", "density_jump", "current_jump"]);
    for res in &residuals {
        r.push(vec![res.breakpoint, res.density_jump, res.current_jump]);
    }
    files.extend(write_table(out, "fp_residuals", "Interface residuals", &r)?);

    let mut times = s.times.clone();
    times.sort_by(f64::total_cmp);
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(CliError::Config("fp.times must be finite and nonnegative".into()));
    }
    let mut rho = init_density(s.init, &grid);
    for &t in &times {
        rho = solver.evolve(&rho, s.dt, t)?;
        let stem = format!("fp_{}", time_tag(t));
        files.extend(write_table(out, &stem, &format!("Fokker-Planck density at t = {t}"), &density_table(&rho))?);
    }

    let g = GibbsDensity::new(&p, s.sigma, None)?;
    let exact = DensityField::new(grid.clone(), grid.centers.iter().map(|&x| g.pdf(x)).collect(), 0.0);
    let meta = json!({
        "command": "fp",
        "potential": p.to_spec(),
        "fp": s,
        "cells": grid.len(),
        "steady_mass": steady.mass(),
        "l1_to_gibbs": l1_density(&steady, &exact)?,
        "max_density_jump": residuals.iter().map(|r| r.density_jump).fold(0.0, f64::max),
        "max_current_jump": residuals.iter().map(|r| r.current_jump).fold(0.0, f64::max),
    });
    files.push(write_json(out, "fp_meta.json", &meta)?);
    Ok(files)
}

pub fn cmd_jko(cfg: &ExperimentConfig, args: &JkoArgs, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let p = cfg.potential.build()?;
    let mut s = cfg.jko.clone();
    s.h = args.h.unwrap_or(s.h);
    s.steps = args.steps.unwrap_or(s.steps);
    s.m = args.m.unwrap_or(s.m);
    s.init = args.init.unwrap_or(s.init);

    let run = jko::run(&p, s.sigma, s.h, s.steps, init_quantiles(s.init, s.m)?)?;
    let mut t = Table::new(&["k", "free_energy", "w2_step"]);
    for (k, (f, w)) in run.free_energies.iter().zip(&run.w2_steps).enumerate() {
        t.push(vec![k as f64, *f, *w]);
    }
    let mut files = write_table(out, "jko_free_energy", "JKO free energy", &t)?;

    let grid = Grid1D::build(&p, (s.domain[0], s.domain[1]), s.n)?;
    for &time in &s.times {
        let rho = jko::density_from_quantiles(run.interpolate(time)?, &grid);
        let stem = format!("jko_density_{}", time_tag(time));
        files.extend(write_table(out, &stem, &format!("JKO density at t = {time}"), &density_table(&rho))?);
    }

    let w2_to_gibbs = if s.sigma > 0.0 {
        let g = GibbsDensity::new(&p, s.sigma, None)?;
        Some(jko::w2(run.steps.last().expect("initial step"), &QuantileField::from_gibbs(&g, s.m)?)?)
    } else {
        None
    };
    let meta = json!({
        "command": "jko",
        "potential": p.to_spec(),
        "jko": s,
        "converged": run.converged,
        "free_energy_nonincreasing": run.free_energies.windows(2).all(|w| w[1] <= w[0] + 1e-8),
        "final_w2_to_gibbs": w2_to_gibbs,
    });
    files.push(write_json(out, "jko_meta.json", &meta)?);
    Ok(files)
}

pub fn cmd_gibbs(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let p = cfg.potential.build()?;
    let s = &cfg.gibbs;
    let g = GibbsDensity::new(&p, s.sigma, None)?;
    let [lo, hi] = s.plot_domain;
    if !(lo < hi) || s.points < 2 {
        return Err(CliError::Config("gibbs.plot_domain must be increasing with at least 2 points".into()));
    }
    let mut t = Table::new(&["x", "pdf", "cdf"]);
    for i in 0..s.points {
        let x = lo + (hi - lo) * i as f64 / (s.points - 1) as f64;
        t.push(vec![x, g.pdf(x), g.cdf(x)]);
    }
    let mut files = write_table(out, "gibbs_pdf", "Gibbs density", &t)?;
    if s.samples > 0 {
        let draws = g.iid_sample(s.samples, cfg.sampler.seed, ExecMode::default());
        let mut d = Table::new(&["i", "x"]);
        for (i, x) in draws.into_iter().enumerate() {
            d.push(vec![i as f64, x]);
        }
        files.extend(write_table(out, "gibbs_samples", "Gibbs i.i.d. samples", &d)?);
    }
    let meta = json!({
        "command": "gibbs",
        "potential": p.to_spec(),
        "gibbs": s,
        "seed": cfg.sampler.seed,
        "normalizer": g.normalizer(),
        "log_normalizer": g.log_normalizer(),
        "mean": g.mean(),
        "domain": g.domain(),
        "local_maxima": local_maxima(&t.column(0), &t.column(1)),
    });
    files.push(write_json(out, "gibbs_meta.json", &meta)?);
    Ok(files)
}

/// Interior grid points where `y` is strictly larger than both neighbours.
pub fn local_maxima(x: &[f64], y: &[f64]) -> Vec<f64> {
    (1..y.len().saturating_sub(1)).filter(|&i| y[i] > y[i - 1] && y[i] > y[i + 1]).map(|i| x[i]).collect()
}

pub fn cmd_metrics(cfg: &ExperimentConfig, args: &MetricsArgs, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let a = read_samples(&args.a)?;
    let result = match &args.b {
        Some(path) => {
            let b = read_samples(path)?;
            json!({ "w1": w1_samples(&a, &b)?, "n_a": a.len(), "n_b": b.len(), "reference": "samples" })
        }
        None => {
            let p = cfg.potential.build()?;
            let g = GibbsDensity::new(&p, cfg.sampler.sigma, None)?;
            json!({ "w1": w1_to_gibbs(&a, &g)?, "n_a": a.len(), "n_b": null, "reference": "gibbs" })
        }
    };
    Ok(vec![write_json(out, "metrics.json", &result)?])
}
