//! Minimizing-movement (JKO) scheme in quantile coordinates.
//!
//! A density is represented by its quantile values `Q_j` at `u_j = (j - 1/2)/M`.
//! In these coordinates the squared 2-Wasserstein distance is a plain sum and
//! each step minimizes
//!
//! ```text
//! Phi(Q) = 1/(2M) sum (Q_j - P_j)^2 + h [ (1/M) sum f(Q_j) - sigma (1/M) sum log(M (Q_{j+1} - Q_j)) ]
//! ```
//!
//! over increasing `Q`. The solver is a projected Newton method: every node
//! stays inside the piece of `f` it currently occupies, a node that reaches a
//! breakpoint either stays there (when zero lies in its one-sided gradient
//! interval) or is released to the side that decreases `Phi`, and the
//! tridiagonal Hessian uses `max(f'', 0)` so the direction is always a descent
//! direction. Armijo backtracking keeps `Phi(result) <= Phi(P)`.

use thiserror::Error;

use crate::fokker_planck::{DensityField, Grid1D};
use crate::gibbs::{GibbsDensity, GibbsError};
use crate::par::{self, ExecMode};
use crate::potential::PiecewisePotential1D;
use crate::tridiag;

/// Smallest allowed gap between consecutive quantile nodes.
pub const MIN_GAP: f64 = 1e-12;
/// Stopping tolerance on the Euclidean norm of the gradient of `Phi`.
pub const GRADIENT_TOL: f64 = 1e-10;
/// Maximum number of step halvings in the line search.
pub const MAX_HALVINGS: usize = 60;
/// Maximum number of Newton iterations per step.
pub const MAX_NEWTON: usize = 500;

#[derive(Debug, Error, PartialEq)]
pub enum JkoError {
    #[error("quantile fields have different sizes ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("invalid quantile field: {0}")]
    Invalid(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("line search failed after {halvings} halvings at Newton iteration {iteration} (gradient norm {grad_norm:e})")]
    LineSearch { iteration: usize, halvings: usize, grad_norm: f64 },
    #[error("time {t} outside [0, {t_max}]")]
    Time { t: f64, t_max: f64 },
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
}

/// Increasing quantile values at the midpoints `u_j = (j - 1/2)/M`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileField {
    values: Vec<f64>,
}

impl QuantileField {
    pub fn new(values: Vec<f64>) -> Result<Self, JkoError> {
        if values.len() < 2 {
            return Err(JkoError::Invalid(format!("need at least 2 nodes, got {}", values.len())));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(JkoError::Invalid(format!("non-finite node {x}")));
        }
        if let Some(j) = values.windows(2).position(|w| w[1] - w[0] < MIN_GAP) {
            return Err(JkoError::Invalid(format!(
                "nodes {} and {} are not separated by {MIN_GAP:e}",
                j + 1,
                j + 2
            )));
        }
        Ok(Self { values })
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Probability levels `u_j`.
    pub fn levels(m: usize) -> Vec<f64> {
        (0..m).map(|j| (j as f64 + 0.5) / m as f64).collect()
    }

    pub fn uniform(a: f64, b: f64, m: usize) -> Result<Self, JkoError> {
        if !(a < b) {
            return Err(JkoError::Parameter(format!("uniform needs a < b, got ({a}, {b})")));
        }
        Self::new(Self::levels(m).into_iter().map(|u| a + (b - a) * u).collect())
    }

    pub fn gaussian(mean: f64, std: f64, m: usize) -> Result<Self, JkoError> {
        if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(JkoError::Parameter(format!("gaussian needs finite mean and std > 0, got ({mean}, {std})")));
        }
        let s2 = std * std;
        let quad = PiecewisePotential1D::polynomial([mean * mean / (2.0 * s2), -mean / s2, 0.5 / s2, 0.0])
            .map_err(|e| JkoError::Parameter(e.to_string()))?;
        Self::from_gibbs(&GibbsDensity::new(&quad, 1.0, None)?, m)
    }

    pub fn from_gibbs(g: &GibbsDensity, m: usize) -> Result<Self, JkoError> {
        let q = par::map(ExecMode::default(), &Self::levels(m), |&u| g.quantile(u));
        Self::new(q.into_iter().collect::<Result<_, _>>()?)
    }
}

pub fn w2(a: &QuantileField, b: &QuantileField) -> Result<f64, JkoError> {
    if a.m() != b.m() {
        return Err(JkoError::SizeMismatch(a.m(), b.m()));
    }
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((s / a.m() as f64).sqrt())
}

/// Potential energy plus `sigma` times the entropy of the quantile field.
pub fn free_energy(p: &PiecewisePotential1D, sigma: f64, q: &QuantileField) -> f64 {
    let m = q.m() as f64;
    let energy: f64 = q.values.iter().map(|&x| p.eval(x)).sum::<f64>() / m;
    let entropy: f64 = -q.values.windows(2).map(|w| (m * (w[1] - w[0])).ln()).sum::<f64>() / m;
    energy + sigma * entropy
}

/// The per-step objective `Phi` on increasing node vectors.
#[derive(Clone, Debug)]
pub struct JkoObjective<'a> {
    pub potential: &'a PiecewisePotential1D,
    pub sigma: f64,
    pub h: f64,
    pub prev: &'a [f64],
}

impl JkoObjective<'_> {
    fn m(&self) -> f64 {
        self.prev.len() as f64
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        let m = self.m();
        let transport: f64 = q.iter().zip(self.prev).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / (2.0 * m);
        let energy: f64 = q.iter().map(|&x| self.potential.eval(x)).sum::<f64>() / m;
        let entropy: f64 = -q.windows(2).map(|w| (m * (w[1] - w[0])).ln()).sum::<f64>() / m;
        transport + self.h * (energy + self.sigma * entropy)
    }

    /// `M (Phi(b) - Phi(a))`, summed term by term to avoid cancellation.
    fn scaled_delta(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut d = 0.0;
        for j in 0..a.len() {
            let p = self.prev[j];
            d += 0.5 * (b[j] - a[j]) * (b[j] + a[j] - 2.0 * p);
            d += self.h * (self.potential.eval(b[j]) - self.potential.eval(a[j]));
        }
        if self.sigma > 0.0 {
            for j in 0..a.len() - 1 {
                let (ga, gb) = (a[j + 1] - a[j], b[j + 1] - b[j]);
                d -= self.h * self.sigma * ((gb - ga) / ga).ln_1p();
            }
        }
        d
    }

    /// `M dPhi/dQ_j` without the potential term.
    fn scaled_base_gradient(&self, q: &[f64]) -> Vec<f64> {
        let n = q.len();
        let hs = self.h * self.sigma;
        (0..n)
            .map(|j| {
                let mut g = q[j] - self.prev[j];
                if hs > 0.0 {
                    if j + 1 < n {
                        g += hs / (q[j + 1] - q[j]);
                    }
                    if j > 0 {
                        g -= hs / (q[j] - q[j - 1]);
                    }
                }
                g
            })
            .collect()
    }

    /// Gradient in `Q` at a point where no node sits on a breakpoint.
    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let m = self.m();
        let p = self.potential;
        self.scaled_base_gradient(q)
            .into_iter()
            .zip(q)
            .map(|(g, &x)| (g + self.h * p.derivative_piece(p.piece_index(x), x)) / m)
            .collect()
    }

    /// Value and gradient in the increment parameterization
    /// `Q_1 = z_0`, `Q_{j+1} = Q_j + exp(z_j)`.
    pub fn value_and_gradient_increments(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let q = increments_to_quantiles(z);
        let gq = self.gradient(&q);
        let mut gz = vec![0.0; z.len()];
        let mut tail = 0.0;
        for j in (0..z.len()).rev() {
            tail += gq[j];
            gz[j] = if j == 0 { tail } else { tail * z[j].exp() };
        }
        (self.value(&q), gz)
    }
}

pub fn increments_to_quantiles(z: &[f64]) -> Vec<f64> {
    let mut q = Vec::with_capacity(z.len());
    let mut x = z[0];
    q.push(x);
    for &zj in &z[1..] {
        x += zj.exp();
        q.push(x);
    }
    q
}

pub fn quantiles_to_increments(q: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(q.len());
    z.push(q[0]);
    z.extend(q.windows(2).map(|w| (w[1] - w[0]).ln()));
    z
}

/// Diagnostics of one minimizing-movement step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Node {
    Fixed,
    Free { piece: usize, grad: f64 },
}

pub fn jko_step(p: &PiecewisePotential1D, sigma: f64, h: f64, prev: &QuantileField) -> Result<QuantileField, JkoError> {
    jko_step_report(p, sigma, h, prev).map(|(q, _)| q)
}

pub fn jko_step_report(
    p: &PiecewisePotential1D,
    sigma: f64,
    h: f64,
    prev: &QuantileField,
) -> Result<(QuantileField, StepReport), JkoError> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(JkoError::Parameter(format!("h must be finite and >= 0, got {h}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(JkoError::Parameter(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let done = StepReport { iterations: 0, grad_norm: 0.0, converged: true };
    if h == 0.0 {
        return Ok((prev.clone(), done));
    }
    let obj = JkoObjective { potential: p, sigma, h, prev: &prev.values };
    let n = prev.m();
    let m = n as f64;
    let bps = p.breakpoints();
    let mut q = prev.values.clone();
    let mut grad_norm = f64::INFINITY;

    for iteration in 0..MAX_NEWTON {
        let base = obj.scaled_base_gradient(&q);
        let mut nodes: Vec<Node> = (0..n)
            .map(|j| match p.breakpoint_index(q[j]) {
                Some(b) => {
                    let dl = base[j] + h * p.derivative_piece(b, q[j]);
                    let dr = base[j] + h * p.derivative_piece(b + 1, q[j]);
                    if dr >= 0.0 && dl <= 0.0 {
                        Node::Fixed
                    } else if dr < 0.0 && (dl <= 0.0 || -dr >= dl) {
                        Node::Free { piece: b + 1, grad: dr }
                    } else {
                        Node::Free { piece: b, grad: dl }
                    }
                }
                None => {
                    let piece = p.piece_index(q[j]);
                    Node::Free { piece, grad: base[j] + h * p.derivative_piece(piece, q[j]) }
                }
            })
            .collect();
        let grad: Vec<f64> = nodes.iter().map(|nd| match nd { Node::Free { grad, .. } => *grad, Node::Fixed => 0.0 }).collect();
        grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() / m;
        if grad_norm <= GRADIENT_TOL {
            return Ok((QuantileField::new(q)?, StepReport { iterations: iteration, grad_norm, converged: true }));
        }

        let hs = h * sigma;
        let gap = |j: usize| q[j + 1] - q[j];
        let diag: Vec<f64> = (0..n)
            .map(|j| match nodes[j] {
                Node::Fixed => 1.0,
                Node::Free { piece, .. } => {
                    let mut d = 1.0 + h * p.second_derivative_piece(piece, q[j]).max(0.0);
                    if hs > 0.0 {
                        if j + 1 < n {
                            d += hs / (gap(j) * gap(j));
                        }
                        if j > 0 {
                            d += hs / (gap(j - 1) * gap(j - 1));
                        }
                    }
                    d
                }
            })
            .collect();

        // Newton direction; released nodes whose direction points back across
        // their breakpoint are frozen for this iteration.
        let mut dir = vec![0.0; n];
        for _ in 0..4 {
            let free = |j: usize| matches!(nodes[j], Node::Free { .. });
            let off: Vec<f64> = (0..n - 1)
                .map(|j| if hs > 0.0 && free(j) && free(j + 1) { -hs / (gap(j) * gap(j)) } else { 0.0 })
                .collect();
            let diag_active: Vec<f64> = (0..n).map(|j| if free(j) { diag[j] } else { 1.0 }).collect();
            let rhs: Vec<f64> = (0..n).map(|j| if free(j) { -grad[j] } else { 0.0 }).collect();
            dir = tridiag::solve(&off, &diag_active, &off, &rhs).unwrap_or_else(|| {
                (0..n).map(|j| rhs[j] / diag_active[j]).collect()
            });
            let mut changed = false;
            for j in 0..n {
                if let (Node::Free { piece, .. }, Some(b)) = (nodes[j], p.breakpoint_index(q[j])) {
                    if (piece == b + 1 && dir[j] < 0.0) || (piece == b && dir[j] > 0.0) {
                        nodes[j] = Node::Fixed;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let bounds = |j: usize| match nodes[j] {
            Node::Fixed => (q[j], q[j]),
            Node::Free { piece, .. } => (
                if piece == 0 { f64::NEG_INFINITY } else { bps[piece - 1] },
                if piece == bps.len() { f64::INFINITY } else { bps[piece] },
            ),
        };
        let attempt = |dir: &[f64]| -> Option<Vec<f64>> {
            // Largest step that keeps every node inside its piece, and the
            // node that reaches a breakpoint first.
            let mut first_hit: Option<(f64, usize, f64)> = None;
            for j in 0..n {
                let (lo, hi) = bounds(j);
                let (dist, bound) = if dir[j] > 0.0 { (hi - q[j], hi) } else if dir[j] < 0.0 { (q[j] - lo, lo) } else { continue };
                let a = dist / dir[j].abs();
                if first_hit.is_none_or(|(best, _, _)| a < best) {
                    first_hit = Some((a, j, bound));
                }
            }
            let trial_at = |alpha: f64, snap: Option<(usize, f64)>| -> Vec<f64> {
                let mut t: Vec<f64> = (0..n)
                    .map(|j| {
                        let (lo, hi) = bounds(j);
                        (q[j] + alpha * dir[j]).clamp(lo, hi)
                    })
                    .collect();
                if let Some((j, b)) = snap {
                    t[j] = b;
                }
                t
            };
            let accept = |trial: &[f64]| -> bool {
                if !trial.windows(2).all(|w| w[1] - w[0] >= MIN_GAP) {
                    return false;
                }
                let slope: f64 = (0..n).map(|j| grad[j] * (trial[j] - q[j])).sum();
                let delta = obj.scaled_delta(&q, trial);
                slope < 0.0 && delta.is_finite() && delta <= 1e-4 * slope
            };
            // Full projected step first; then backtrack from the first
            // breakpoint hit, landing that node exactly on its breakpoint.
            let full = trial_at(1.0, None);
            if accept(&full) {
                return Some(full);
            }
            let (mut alpha, mut snap) = match first_hit {
                Some((a, j, b)) if a < 1.0 => (a, Some((j, b))),
                _ => (0.5, None),
            };
            for _ in 0..MAX_HALVINGS {
                let trial = trial_at(alpha, snap);
                if accept(&trial) {
                    return Some(trial);
                }
                alpha *= 0.5;
                snap = None;
            }
            None
        };
        let steepest: Vec<f64> = (0..n)
            .map(|j| match nodes[j] {
                Node::Fixed => 0.0,
                Node::Free { .. } => -grad[j] / diag[j],
            })
            .collect();
        match attempt(&dir).or_else(|| attempt(&steepest)) {
            Some(next) => q = next,
            None => {
                return Err(JkoError::LineSearch { iteration, halvings: MAX_HALVINGS, grad_norm });
            }
        }
    }
    Ok((QuantileField::new(q)?, StepReport { iterations: MAX_NEWTON, grad_norm, converged: false }))
}

/// Sequence of minimizing-movement steps, including the initial field.
#[derive(Clone, Debug, PartialEq)]
pub struct JkoRun {
    pub h: f64,
    pub sigma: f64,
    pub steps: Vec<QuantileField>,
    pub free_energies: Vec<f64>,
    /// `w2` between consecutive steps; the first entry is 0.
    pub w2_steps: Vec<f64>,
    pub converged: bool,
}

impl JkoRun {
    pub fn t_max(&self) -> f64 {
        self.h * (self.steps.len() - 1) as f64
    }

    /// Piecewise-constant interpolation: the step `floor(t/h)`.
    pub fn interpolate(&self, t: f64) -> Result<&QuantileField, JkoError> {
        let t_max = self.t_max();
        if !(t >= 0.0 && t <= t_max * (1.0 + 1e-12)) {
            return Err(JkoError::Time { t, t_max });
        }
        let ratio = t / self.h;
        // Times that are multiples of h up to rounding land on that step.
        let k = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) { ratio.round() } else { ratio.floor() };
        Ok(&self.steps[(k as usize).min(self.steps.len() - 1)])
    }
}

pub fn run(
    p: &PiecewisePotential1D,
    sigma: f64,
    h: f64,
    n_steps: usize,
    init: QuantileField,
) -> Result<JkoRun, JkoError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(JkoError::Parameter(format!("h must be finite and > 0, got {h}")));
    }
    let mut free_energies = vec![free_energy(p, sigma, &init)];
    let mut w2_steps = vec![0.0];
    let mut steps = vec![init];
    let mut converged = true;
    for _ in 0..n_steps {
        let prev = steps.last().expect("initial field");
        let (next, report) = jko_step_report(p, sigma, h, prev)?;
        converged &= report.converged;
        free_energies.push(free_energy(p, sigma, &next));
        w2_steps.push(w2(prev, &next)?);
        steps.push(next);
    }
    Ok(JkoRun { h, sigma, steps, free_energies, w2_steps, converged })
}

pub fn interpolate(run: &JkoRun, t: f64) -> Result<&QuantileField, JkoError> {
    run.interpolate(t)
}

/// Cell averages of the density whose CDF interpolates `(Q_j, u_j)`
/// linearly, extended by the first and last gap slopes to reach 0 and 1.
pub fn density_from_quantiles(q: &QuantileField, grid: &Grid1D) -> DensityField {
    let v = &q.values;
    let m = v.len();
    let mf = m as f64;
    let start = v[0] - 0.5 * (v[1] - v[0]);
    let end = v[m - 1] + 0.5 * (v[m - 1] - v[m - 2]);
    let cdf = |x: f64| -> f64 {
        if x <= start {
            0.0
        } else if x >= end {
            1.0
        } else if x < v[0] {
            0.5 / mf * (x - start) / (v[0] - start)
        } else if x >= v[m - 1] {
            1.0 - 0.5 / mf * (end - x) / (end - v[m - 1])
        } else {
            let j = v.partition_point(|&y| y <= x) - 1;
            (j as f64 + 0.5 + (x - v[j]) / (v[j + 1] - v[j])) / mf
        }
    };
    let f: Vec<f64> = grid.faces.iter().map(|&x| cdf(x)).collect();
    let values = f.windows(2).zip(&grid.widths).map(|(c, w)| (c[1] - c[0]) / w).collect();
    DensityField::new(grid.clone(), values, 0.0)
}

/// Quantiles of the piecewise-linear CDF of a cell-averaged density.
pub fn quantiles_from_density(rho: &DensityField, m: usize) -> Result<QuantileField, JkoError> {
    let g = &rho.grid;
    if rho.values.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(JkoError::Invalid("density must be finite and nonnegative".into()));
    }
    let masses: Vec<f64> = rho.values.iter().zip(&g.widths).map(|(v, w)| v * w).collect();
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) {
        return Err(JkoError::Invalid("density has no mass".into()));
    }
    let mut cum = Vec::with_capacity(masses.len() + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for mass in &masses {
        acc += mass / total;
        cum.push(acc);
    }
    let values = QuantileField::levels(m)
        .into_iter()
        .map(|u| {
            let i = (cum.partition_point(|&c| c < u) - 1).min(masses.len() - 1);
            let frac = (u - cum[i]) / (cum[i + 1] - cum[i]);
            g.faces[i] + frac.clamp(0.0, 1.0) * g.widths[i]
        })
        .collect();
    QuantileField::new(values)
}
