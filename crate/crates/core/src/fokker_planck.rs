//! Finite-volume Fokker–Planck solver for `d rho/dt = d/dx (f' rho + sigma d rho/dx)`.
//!
//! The grid has a face on every breakpoint of the potential. The flux through
//! an interior face is the exact constant-flux solution of
//! `J = f' rho + sigma rho'` on the dual cell between the two adjacent cell
//! centers:
//!
//! ```text
//! J = sigma (rho_R e^{f(x_R)/sigma} - rho_L e^{f(x_L)/sigma}) / int_{x_L}^{x_R} e^{f/sigma} dx
//! ```
//!
//! It is an exponentially fitted (Scharfetter–Gummel type) upwind flux: the
//! weights are positive, so backward Euler gives an M-matrix, and the Gibbs
//! density sampled at cell centers is an exact discrete steady state. At a
//! breakpoint face the integral is split at the face, so each half of the
//! dual cell sees only its own piece and no drift selection is needed.

use thiserror::Error;

use crate::gibbs::GibbsDensity;
use crate::potential::PiecewisePotential1D;
use crate::quad::gauss_legendre;
use crate::tridiag;

/// Minimum number of cells in each region between breakpoints.
pub const MIN_CELLS_PER_REGION: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum FpError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("sigma must be positive and finite, got {0}")]
    Sigma(f64),
    #[error("time step must be positive and finite, got {0}")]
    TimeStep(f64),
    #[error("density lives on a different grid")]
    GridMismatch,
    #[error("implicit solve failed")]
    Singular,
    #[error("steady state not reached after {iterations} implicit steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Cell-centred grid, uniform inside each region between breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1D {
    pub faces: Vec<f64>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    /// Face index of each breakpoint, in order.
    pub breakpoint_faces: Vec<usize>,
}

impl Grid1D {
    pub fn build(p: &PiecewisePotential1D, domain: (f64, f64), n: usize) -> Result<Self, FpError> {
        Self::with_breakpoints(p.breakpoints(), domain, n)
    }

    /// `n` cells on `domain`, with faces placed exactly on `breakpoints`,
    /// which must sit at least one unit inside the domain.
    pub fn with_breakpoints(breakpoints: &[f64], domain: (f64, f64), n: usize) -> Result<Self, FpError> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FpError::Grid(format!("need finite lo < hi, got [{lo}, {hi}]")));
        }
        if let (Some(&first), Some(&last)) = (breakpoints.first(), breakpoints.last()) {
            if !(lo < first - 1.0 && hi > last + 1.0) {
                return Err(FpError::Grid(format!(
                    "domain [{lo}, {hi}] must extend more than 1 past the breakpoints [{first}, {last}]"
                )));
            }
        }
        let mut cuts = vec![lo];
        cuts.extend_from_slice(breakpoints);
        cuts.push(hi);
        let regions = cuts.len() - 1;
        if n < MIN_CELLS_PER_REGION * regions {
            return Err(FpError::Grid(format!(
                "{n} cells cannot give {MIN_CELLS_PER_REGION} to each of {regions} regions"
            )));
        }
        let counts = allocate_cells(&cuts, n);
        let mut faces = Vec::with_capacity(n + 1);
        let mut breakpoint_faces = Vec::with_capacity(breakpoints.len());
        faces.push(lo);
        for (r, &m) in counts.iter().enumerate() {
            let (a, b) = (cuts[r], cuts[r + 1]);
            for k in 1..m {
                faces.push(a + (b - a) * k as f64 / m as f64);
            }
            if r + 1 < regions {
                breakpoint_faces.push(faces.len());
            }
            faces.push(b);
        }
        let centers = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let widths = faces.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { faces, centers, widths, breakpoint_faces })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.faces[0], self.faces[self.faces.len() - 1])
    }

    pub fn regions(&self) -> usize {
        self.breakpoint_faces.len() + 1
    }
}

/// Cells per region, proportional to length, at least the minimum each.
fn allocate_cells(cuts: &[f64], n: usize) -> Vec<usize> {
    let total = cuts[cuts.len() - 1] - cuts[0];
    let ideal: Vec<f64> = cuts.windows(2).map(|w| n as f64 * (w[1] - w[0]) / total).collect();
    let mut counts: Vec<usize> = ideal.iter().map(|&x| (x.floor() as usize).max(MIN_CELLS_PER_REGION)).collect();
    loop {
        let sum: usize = counts.iter().sum();
        if sum == n {
            return counts;
        }
        let deficit = |i: usize| ideal[i] - counts[i] as f64;
        if sum < n {
            let i = (0..counts.len()).max_by(|&a, &b| deficit(a).total_cmp(&deficit(b))).unwrap();
            counts[i] += 1;
        } else {
            let i = (0..counts.len())
                .filter(|&i| counts[i] > MIN_CELLS_PER_REGION)
                .min_by(|&a, &b| deficit(a).total_cmp(&deficit(b)))
                .expect("enough cells for every region");
            counts[i] -= 1;
        }
    }
}

/// Cell-averaged probability density.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityField {
    pub fn new(grid: Grid1D, values: Vec<f64>, time: f64) -> Self {
        assert_eq!(grid.len(), values.len());
        Self { grid, values, time }
    }

    /// Uniform density on the grid's domain.
    pub fn uniform(grid: &Grid1D) -> Self {
        let (lo, hi) = grid.domain();
        Self::new(grid.clone(), vec![1.0 / (hi - lo); grid.len()], 0.0)
    }

    /// `f` sampled at cell centers, rescaled to unit mass.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Grid1D, f: F) -> Self {
        let values = grid.centers.iter().map(|&x| f(x)).collect();
        Self::new(grid.clone(), values, 0.0).normalized()
    }

    /// Exact cell averages of the Gibbs law (CDF differences).
    pub fn gibbs_cell_averages(grid: &Grid1D, g: &GibbsDensity) -> Self {
        let cdf: Vec<f64> = grid.faces.iter().map(|&x| g.cdf(x)).collect();
        let values = cdf.windows(2).zip(&grid.widths).map(|(c, w)| (c[1] - c[0]) / w).collect();
        Self::new(grid.clone(), values, 0.0)
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().zip(&self.grid.widths).map(|(v, w)| v * w).sum()
    }

    pub fn normalized(mut self) -> Self {
        let m = self.mass();
        for v in &mut self.values {
            *v /= m;
        }
        self
    }
}

/// One-sided density and current mismatch at a breakpoint face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfaceResidual {
    pub breakpoint: f64,
    pub density_jump: f64,
    pub current_jump: f64,
}

/// Face weights of the discrete operator for one potential, temperature and
/// grid.
#[derive(Clone, Debug)]
pub struct FpSolver {
    potential: PiecewisePotential1D,
    sigma: f64,
    grid: Grid1D,
    /// `J_k = a[k] rho[k] - b[k] rho[k-1]` for interior faces `k = 1..n`.
    a: Vec<f64>,
    b: Vec<f64>,
}

/// `(sigma e^{(f_r - m)/sigma} / I, sigma e^{(f_l - m)/sigma} / I)` with
/// `I = int_{xl}^{xr} e^{(f - m)/sigma}`, the integral split at `mid`.
fn flux_weights(p: &PiecewisePotential1D, sigma: f64, xl: f64, mid: f64, xr: f64) -> (f64, f64) {
    let (fl, fm, fr) = (p.eval(xl), p.eval(mid), p.eval(xr));
    let m = fl.max(fm).max(fr);
    let left = p.piece_index(xl);
    let right = p.piece_index(xr);
    let integral = gauss_legendre(|x| ((p.eval_piece(left, x) - m) / sigma).exp(), xl, mid)
        + gauss_legendre(|x| ((p.eval_piece(right, x) - m) / sigma).exp(), mid, xr);
    (sigma * ((fr - m) / sigma).exp() / integral, sigma * ((fl - m) / sigma).exp() / integral)
}

impl FpSolver {
    pub fn new(p: &PiecewisePotential1D, sigma: f64, grid: &Grid1D) -> Result<Self, FpError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FpError::Sigma(sigma));
        }
        let snapped = p
            .breakpoints()
            .iter()
            .zip(&grid.breakpoint_faces)
            .all(|(&t, &k)| grid.faces[k] == t);
        if grid.breakpoint_faces.len() != p.breakpoints().len() || !snapped {
            return Err(FpError::Grid("grid faces are not snapped to the potential's breakpoints".into()));
        }
        let n = grid.len();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for k in 1..n {
            let (wa, wb) = flux_weights(p, sigma, grid.centers[k - 1], grid.faces[k], grid.centers[k]);
            a[k] = wa;
            b[k] = wb;
        }
        Ok(Self { potential: p.clone(), sigma, grid: grid.clone(), a, b })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn check(&self, rho: &DensityField) -> Result<(), FpError> {
        if rho.grid.faces != self.grid.faces {
            return Err(FpError::GridMismatch);
        }
        Ok(())
    }

    /// Probability current at all `n + 1` faces; the walls carry zero.
    pub fn current(&self, rho: &DensityField) -> Result<Vec<f64>, FpError> {
        self.check(rho)?;
        let n = self.grid.len();
        let v = &rho.values;
        let mut j = vec![0.0; n + 1];
        for k in 1..n {
            j[k] = self.a[k] * v[k] - self.b[k] * v[k - 1];
        }
        Ok(j)
    }

    /// One backward-Euler step.
    pub fn step(&self, rho: &DensityField, dt: f64) -> Result<DensityField, FpError> {
        self.check(rho)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FpError::TimeStep(dt));
        }
        let values = tridiag::solve_conservative(&self.grid.widths, &self.a, &self.b, dt, &rho.values)
            .ok_or(FpError::Singular)?;
        Ok(DensityField { grid: rho.grid.clone(), values, time: rho.time + dt })
    }

    /// Steps of size `dt` (the last one shortened) until `t_end`.
    pub fn evolve(&self, rho: &DensityField, dt: f64, t_end: f64) -> Result<DensityField, FpError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FpError::TimeStep(dt));
        }
        let mut cur = rho.clone();
        let steps = ((t_end - rho.time) / dt - 1e-9).ceil().max(0.0) as usize;
        for i in 0..steps {
            let h = if i + 1 == steps { t_end - cur.time } else { dt };
            if h > 0.0 {
                cur = self.step(&cur, h)?;
            }
        }
        cur.time = cur.time.max(t_end);
        Ok(cur)
    }

    /// Implicit steps with doubling `dt`, starting from the uniform density,
    /// until `|rho_{t+dt} - rho_t|_1 / dt <= tol` and every face current is
    /// at most `10 tol`.
    pub fn steady_state(&self, tol: f64) -> Result<DensityField, FpError> {
        const MAX_ITERATIONS: usize = 1_000_000;
        let mut rho = DensityField::uniform(&self.grid);
        let mut dt = 1e-2;
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_ITERATIONS {
            let next = self.step(&rho, dt)?;
            let change: f64 = next
                .values
                .iter()
                .zip(&rho.values)
                .zip(&self.grid.widths)
                .map(|((x, y), w)| (x - y).abs() * w)
                .sum();
            residual = change / dt;
            rho = next;
            if residual <= tol {
                let jmax = self.current(&rho)?.iter().fold(0.0f64, |m, j| m.max(j.abs()));
                if jmax <= 10.0 * tol {
                    return Ok(rho);
                }
            }
            dt = (dt * 2.0).min(1e10);
        }
        Err(FpError::NoConvergence { iterations: MAX_ITERATIONS, residual })
    }

    /// Density and current mismatch at each breakpoint face.
    ///
    /// Each side reconstructs the face density from its adjacent cell along
    /// its own piece, `rho_face = rho_cell e^{-(f(theta) - f(x_cell))/sigma}`,
    /// and computes the constant-flux current across its half of the dual
    /// cell against the averaged face density.
    pub fn interface_residual(&self, rho: &DensityField) -> Result<Vec<InterfaceResidual>, FpError> {
        self.check(rho)?;
        let p = &self.potential;
        let s = self.sigma;
        let g = &self.grid;
        let v = &rho.values;
        let mut out = Vec::with_capacity(g.breakpoint_faces.len());
        for (&k, &theta) in g.breakpoint_faces.iter().zip(p.breakpoints()) {
            let (xl, xr) = (g.centers[k - 1], g.centers[k]);
            let ft = p.eval(theta);
            let left = v[k - 1] * (-(ft - p.eval(xl)) / s).exp();
            let right = v[k] * (-(ft - p.eval(xr)) / s).exp();
            let face = 0.5 * (left + right);
            // Half-cell currents, each from one piece only.
            let (al, bl) = flux_weights(p, s, xl, 0.5 * (xl + theta), theta);
            let (ar, br) = flux_weights(p, s, theta, 0.5 * (theta + xr), xr);
            let j_left = al * face - bl * v[k - 1];
            let j_right = ar * v[k] - br * face;
            out.push(InterfaceResidual {
                breakpoint: theta,
                density_jump: (left - right).abs(),
                current_jump: (j_left - j_right).abs(),
            });
        }
        Ok(out)
    }
}

pub fn current(p: &PiecewisePotential1D, sigma: f64, rho: &DensityField) -> Result<Vec<f64>, FpError> {
    FpSolver::new(p, sigma, &rho.grid)?.current(rho)
}

pub fn step(p: &PiecewisePotential1D, sigma: f64, rho: &DensityField, dt: f64) -> Result<DensityField, FpError> {
    FpSolver::new(p, sigma, &rho.grid)?.step(rho, dt)
}

pub fn steady_state(p: &PiecewisePotential1D, sigma: f64, grid: &Grid1D, tol: f64) -> Result<DensityField, FpError> {
    FpSolver::new(p, sigma, grid)?.steady_state(tol)
}

pub fn interface_residual(
    p: &PiecewisePotential1D,
    sigma: f64,
    rho: &DensityField,
) -> Result<Vec<InterfaceResidual>, FpError> {
    FpSolver::new(p, sigma, &rho.grid)?.interface_residual(rho)
}
