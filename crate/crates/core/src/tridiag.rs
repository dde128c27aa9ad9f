//! Tridiagonal solvers.

/// Solves `A x = rhs` for a tridiagonal `A` given by its `lower`
/// (length n-1), `diag` (n) and `upper` (n-1) bands. Thomas algorithm, no
/// pivoting; intended for diagonally dominant or SPD systems.
///
/// Returns `None` when a pivot vanishes or is not finite.
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    assert!(n > 0 && lower.len() + 1 == n && upper.len() + 1 == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return None;
    }
    if n > 1 {
        c[0] = upper[0] / pivot;
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i - 1] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        if i + 1 < n {
            c[i] = upper[i] / pivot;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

/// Backward-Euler solve for a conservative nearest-neighbour exchange.
///
/// Cell `i` has width `w[i]`; the flux through interior face `k` (between
/// cells `k-1` and `k`, `k = 1..n`) is `J_k = a[k] * x[k] - b[k] * x[k-1]`
/// with `a, b >= 0`. Index 0 of `a` and `b` is unused (no-flux walls). The
/// system solved is
///
/// ```text
/// w_i (x_i - x0_i) = dt (J_{i+1} - J_i)
/// ```
///
/// The pivots are assembled from nonnegative terms only (the
/// Grassmann–Taksar–Heyman device), so the solve has small componentwise
/// relative error even when `dt` is huge and the matrix is close to
/// singular. Total mass `sum w_i x_i` is preserved to rounding.
pub fn solve_conservative(w: &[f64], a: &[f64], b: &[f64], dt: f64, x0: &[f64]) -> Option<Vec<f64>> {
    let n = w.len();
    assert!(n > 0 && a.len() == n && b.len() == n && x0.len() == n);
    // Row i: (w_i + dt (b_{i+1} + a_i)) x_i - dt a_{i+1} x_{i+1} - dt b_i x_{i-1} = w_i x0_i
    // with a_0 = b_0 = a_n = b_n = 0.
    let b_next = |i: usize| if i + 1 < n { dt * b[i + 1] } else { 0.0 };
    let a_next = |i: usize| if i + 1 < n { dt * a[i + 1] } else { 0.0 };

    // excess_i = pivot_i - dt b_{i+1} >= w_i > 0
    let mut pivot = vec![0.0; n];
    let mut excess = vec![0.0; n];
    let mut y = vec![0.0; n];
    excess[0] = w[0];
    pivot[0] = excess[0] + b_next(0);
    y[0] = w[0] * x0[0];
    for i in 1..n {
        let lower = dt * b[i];
        let upper_prev = dt * a[i];
        excess[i] = w[i] + upper_prev * excess[i - 1] / pivot[i - 1];
        pivot[i] = excess[i] + b_next(i);
        y[i] = w[i] * x0[i] + lower * y[i - 1] / pivot[i - 1];
        if !pivot[i].is_finite() || pivot[i] <= 0.0 {
            return None;
        }
    }
    let mut x = vec![0.0; n];
    x[n - 1] = y[n - 1] / pivot[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (y[i] + a_next(i) * x[i + 1]) / pivot[i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense() {
        // [[4,1,0],[1,4,1],[0,1,4]] x = [5,6,5] -> x = [1,1,1]
        let x = solve(&[1.0, 1.0], &[4.0, 4.0, 4.0], &[1.0, 1.0], &[5.0, 6.0, 5.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn conservative_solve_matches_thomas_and_keeps_mass() {
        let n = 6;
        let w = vec![0.5, 0.5, 0.25, 0.25, 0.5, 0.5];
        let a = vec![0.0, 1.0, 2.0, 0.5, 3.0, 1.5];
        let b = vec![0.0, 2.0, 0.7, 1.0, 0.2, 4.0];
        let x0 = vec![1.0, 0.0, 3.0, 0.5, 0.0, 2.0];
        let dt = 0.3;
        let mut lower = vec![0.0; n - 1];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n - 1];
        for i in 0..n {
            let bn = if i + 1 < n { b[i + 1] } else { 0.0 };
            diag[i] = w[i] + dt * (bn + a[i]);
            if i + 1 < n {
                upper[i] = -dt * a[i + 1];
                lower[i] = -dt * b[i + 1];
            }
        }
        let rhs: Vec<f64> = w.iter().zip(&x0).map(|(w, x)| w * x).collect();
        let reference = solve(&lower, &diag, &upper, &rhs).unwrap();
        let x = solve_conservative(&w, &a, &b, dt, &x0).unwrap();
        for (u, v) in x.iter().zip(&reference) {
            assert!((u - v).abs() < 1e-13, "{u} vs {v}");
        }
        let m0: f64 = w.iter().zip(&x0).map(|(w, x)| w * x).sum();
        let m1: f64 = w.iter().zip(&x).map(|(w, x)| w * x).sum();
        assert!((m0 - m1).abs() < 1e-14);
        assert!(x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn huge_dt_converges_to_null_vector() {
        // Equal exchange rates: the stationary vector is uniform.
        let n = 5;
        let w = vec![1.0; n];
        let a = vec![0.0, 1.0, 1.0, 1.0, 1.0];
        let b = a.clone();
        let x0 = vec![5.0, 0.0, 0.0, 0.0, 0.0];
        let x = solve_conservative(&w, &a, &b, 1e12, &x0).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-9, "{v}");
        }
    }
}
