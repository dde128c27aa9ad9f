use serde::{Deserialize, Serialize};

use super::{select, Potential, PotentialError, SelectionRule, SubdiffValue};
use crate::rng::ChainRng;

/// Coefficients `[c0, c1, c2, c3]` of `c0 + c1 x + c2 x^2 + c3 x^3`.
pub type Cubic = [f64; 4];

fn poly(c: &Cubic, x: f64) -> f64 {
    ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
}

fn poly_d1(c: &Cubic, x: f64) -> f64 {
    (3.0 * c[3] * x + 2.0 * c[2]) * x + c[1]
}

fn poly_d2(c: &Cubic, x: f64) -> f64 {
    6.0 * c[3] * x + 2.0 * c[2]
}

/// Sign of `p(x)` as `x -> +inf` (`toward_plus`) or `x -> -inf`, looking at
/// the highest nonconstant term. `None` for constants.
fn tail_sign(c: &Cubic, toward_plus: bool) -> Option<f64> {
    (1..4).rev().find(|&d| c[d] != 0.0).map(|d| {
        let s = c[d].signum();
        if toward_plus || d % 2 == 0 {
            s
        } else {
            -s
        }
    })
}

/// Real roots of `p'(x) = 3 c3 x^2 + 2 c2 x + c1`.
fn critical_points(c: &Cubic) -> Vec<f64> {
    let (qa, qb, qc) = (3.0 * c[3], 2.0 * c[2], c[1]);
    if qa == 0.0 {
        if qb == 0.0 {
            return Vec::new();
        }
        return vec![-qc / qb];
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    vec![(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)]
}

/// Serializable description: `breakpoints = [...]`, `pieces = [[c0, c1, c2, c3], ...]`.
/// Shorter coefficient lists are zero-padded.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<Vec<f64>>,
}

/// Continuous, confining, piecewise cubic potential on the real line.
///
/// Piece `i` is valid on the open interval between breakpoints `i - 1` and
/// `i` (with `-inf`/`+inf` at the ends). At a breakpoint both neighbouring
/// pieces agree, and evaluation uses the piece to the right.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePotential1D {
    breakpoints: Vec<f64>,
    pieces: Vec<Cubic>,
}

impl PiecewisePotential1D {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Cubic>) -> Result<Self, PotentialError> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(PotentialError::PieceCount {
                breakpoints: breakpoints.len(),
                expected: breakpoints.len() + 1,
                got: pieces.len(),
            });
        }
        for (i, w) in breakpoints.windows(2).enumerate() {
            if !(w[0] < w[1]) {
                return Err(PotentialError::Breakpoints { index: i + 1 });
            }
        }
        if let Some(i) = breakpoints.iter().position(|b| !b.is_finite()) {
            return Err(PotentialError::Breakpoints { index: i });
        }
        if let Some(i) = pieces.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(PotentialError::NonFinite { index: i });
        }
        for (i, &theta) in breakpoints.iter().enumerate() {
            let left = poly(&pieces[i], theta);
            let right = poly(&pieces[i + 1], theta);
            let jump = (left - right).abs();
            if jump > 1e-12 * left.abs().max(right.abs()).max(1.0) {
                return Err(PotentialError::Discontinuous { at: theta, jump });
            }
        }
        if tail_sign(&pieces[0], false) != Some(1.0) {
            return Err(PotentialError::NotConfined { side: "left" });
        }
        if tail_sign(&pieces[pieces.len() - 1], true) != Some(1.0) {
            return Err(PotentialError::NotConfined { side: "right" });
        }
        Ok(Self { breakpoints, pieces })
    }

    /// A single polynomial with no exceptional set.
    pub fn polynomial(coeffs: Cubic) -> Result<Self, PotentialError> {
        Self::new(Vec::new(), vec![coeffs])
    }

    pub fn from_spec(spec: &PotentialSpec) -> Result<Self, PotentialError> {
        let mut pieces = Vec::with_capacity(spec.pieces.len());
        for (i, p) in spec.pieces.iter().enumerate() {
            if p.len() > 4 {
                return Err(PotentialError::DegreeTooHigh { index: i, len: p.len() });
            }
            let mut c = [0.0; 4];
            c[..p.len()].copy_from_slice(p);
            pieces.push(c);
        }
        Self::new(spec.breakpoints.clone(), pieces)
    }

    pub fn to_spec(&self) -> PotentialSpec {
        PotentialSpec {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|c| c.to_vec()).collect(),
        }
    }

    /// The exceptional set.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Cubic] {
        &self.pieces
    }

    /// Index of the piece used to evaluate at `x` (right piece on a breakpoint).
    pub fn piece_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= x)
    }

    /// Index `i` such that `x == breakpoints[i]`, if any.
    pub fn breakpoint_index(&self, x: f64) -> Option<usize> {
        self.breakpoints.binary_search_by(|b| b.total_cmp(&x)).ok()
    }

    pub fn eval(&self, x: f64) -> f64 {
        poly(&self.pieces[self.piece_index(x)], x)
    }

    /// Value of piece `i` continued to any `x`.
    pub fn eval_piece(&self, i: usize, x: f64) -> f64 {
        poly(&self.pieces[i], x)
    }

    pub fn derivative_piece(&self, i: usize, x: f64) -> f64 {
        poly_d1(&self.pieces[i], x)
    }

    pub fn second_derivative_piece(&self, i: usize, x: f64) -> f64 {
        poly_d2(&self.pieces[i], x)
    }

    /// Derivative from the left and from the right at `x`.
    pub fn one_sided_derivatives(&self, x: f64) -> (f64, f64) {
        match self.breakpoint_index(x) {
            Some(i) => (poly_d1(&self.pieces[i], x), poly_d1(&self.pieces[i + 1], x)),
            None => {
                let d = poly_d1(&self.pieces[self.piece_index(x)], x);
                (d, d)
            }
        }
    }

    /// Clarke subdifferential: the hull of the one-sided derivatives.
    pub fn clarke_subdiff(&self, x: f64) -> SubdiffValue {
        let (l, r) = self.one_sided_derivatives(x);
        SubdiffValue::new(l.min(r), l.max(r))
    }

    /// Global minimum value, located among breakpoints and interior
    /// critical points of each piece.
    pub fn minimum(&self) -> f64 {
        let mut best = f64::INFINITY;
        for &b in &self.breakpoints {
            best = best.min(self.eval(b));
        }
        for (i, c) in self.pieces.iter().enumerate() {
            let lo = if i == 0 { f64::NEG_INFINITY } else { self.breakpoints[i - 1] };
            let hi = self.breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
            for x in critical_points(c) {
                if x > lo && x < hi {
                    best = best.min(poly(c, x));
                }
            }
        }
        best
    }

    /// True when both outer pieces are affine.
    pub fn has_linear_tails(&self) -> bool {
        let lin = |c: &Cubic| c[2] == 0.0 && c[3] == 0.0;
        lin(&self.pieces[0]) && lin(&self.pieces[self.pieces.len() - 1])
    }
}

impl Potential for PiecewisePotential1D {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x[0])
    }

    fn subgradient(&self, x: &[f64], rule: SelectionRule, rng: &mut ChainRng, out: &mut [f64]) {
        out[0] = select(self.clarke_subdiff(x[0]), rule, rng);
    }
}

/// `f(x) = |x| - 1` folded at the origin: two wells at `x = ±1`, a barrier
/// of height 1 at `x = 0`.
///
/// ```text
/// f(x) = -x - 1   x < -1
///        x + 1    -1 <= x < 0
///        1 - x    0 <= x < 1
///        x - 1    x >= 1
/// ```
pub fn example_potential() -> PiecewisePotential1D {
    PiecewisePotential1D::new(
        vec![-1.0, 0.0, 1.0],
        vec![
            [-1.0, -1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [1.0, -1.0, 0.0, 0.0],
            [-1.0, 1.0, 0.0, 0.0],
        ],
    )
    .expect("builtin potential is valid")
}
