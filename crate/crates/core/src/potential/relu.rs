use std::io::Read;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Potential, PotentialError, SelectionRule};
use crate::rng::{chain_rng, ChainRng};

/// Row-major regression data: `m` rows of `d` features and one target each.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub d: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(d: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self, PotentialError> {
        if x.len() != d * y.len() {
            return Err(PotentialError::Dataset(format!(
                "{} feature values do not form {} rows of width {d}",
                x.len(),
                y.len()
            )));
        }
        Ok(Self { d, x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Reads CSV with a header row; the last column is the target.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, PotentialError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let width = rdr
            .headers()
            .map_err(|e| PotentialError::Dataset(e.to_string()))?
            .len();
        if width < 2 {
            return Err(PotentialError::Dataset("need at least one feature and a target column".into()));
        }
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| PotentialError::Dataset(e.to_string()))?;
            for (col, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    PotentialError::Dataset(format!("row {}: column {col} is not a number: {field:?}", line + 2))
                })?;
                if col + 1 == width {
                    y.push(v);
                } else {
                    x.push(v);
                }
            }
        }
        Self::new(width - 1, x, y)
    }

    /// Smooth nonlinear regression task with Gaussian features and a little
    /// observation noise; deterministic in `seed`.
    pub fn synthetic_regression(n: usize, d: usize, seed: u64) -> Self {
        assert!(d >= 1);
        let mut rng = chain_rng(seed, 0);
        let mut x = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let mut t = 2.0 * (1.5 * row[0]).sin();
            for (j, v) in row.iter().enumerate().skip(1) {
                t += if j % 2 == 1 { 0.8 * v.max(0.0) } else { -0.5 * v };
            }
            let noise: f64 = rng.sample(StandardNormal);
            y.push(t + 0.1 * noise);
            x.extend(row);
        }
        Self { d, x, y }
    }
}

/// Fully connected ReLU regression network seen as a potential over its
/// parameters: mean squared error on the training rows plus a Gaussian prior
/// `lambda/2 * |params|^2`.
///
/// Parameters are laid out layer by layer, each layer as its weight matrix
/// (row-major, `out x in`) followed by its bias.
#[derive(Clone, Debug)]
pub struct ReluNetPotential {
    widths: Vec<usize>,
    n_params: usize,
    data: Dataset,
    lambda: f64,
    relu_slope_at_zero: f64,
}

impl ReluNetPotential {
    /// Three hidden layers of ten units on `d` inputs with a scalar output.
    pub fn three_by_ten(data: Dataset, lambda: f64, relu_slope_at_zero: f64) -> Result<Self, PotentialError> {
        let d = data.d;
        Self::new(vec![d, 10, 10, 10, 1], data, lambda, relu_slope_at_zero)
    }

    pub fn new(
        widths: Vec<usize>,
        data: Dataset,
        lambda: f64,
        relu_slope_at_zero: f64,
    ) -> Result<Self, PotentialError> {
        if widths.len() < 2 || widths.contains(&0) || *widths.last().unwrap() != 1 {
            return Err(PotentialError::Contract(format!(
                "widths must be positive and end in a scalar output, got {widths:?}"
            )));
        }
        if widths[0] != data.d {
            return Err(PotentialError::Contract(format!(
                "input width {} does not match {} dataset features",
                widths[0], data.d
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(PotentialError::Contract(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(0.0..=1.0).contains(&relu_slope_at_zero) {
            return Err(PotentialError::Contract(format!(
                "relu_slope_at_zero must lie in [0, 1], got {relu_slope_at_zero}"
            )));
        }
        let n_params = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self { widths, n_params, data, lambda, relu_slope_at_zero })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn relu_slope_at_zero(&self) -> f64 {
        self.relu_slope_at_zero
    }

    /// He-normal weights, zero biases.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = chain_rng(seed, 0);
        let mut out = Vec::with_capacity(self.n_params);
        for w in self.widths.windows(2) {
            let scale = (2.0 / w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                let z: f64 = rng.sample(StandardNormal);
                out.push(scale * z);
            }
            out.extend(std::iter::repeat_n(0.0, w[1]));
        }
        out
    }

    fn check_dim(&self, params: &[f64]) -> Result<(), PotentialError> {
        if params.len() != self.n_params {
            return Err(PotentialError::Contract(format!(
                "expected {} parameters, got {}",
                self.n_params,
                params.len()
            )));
        }
        Ok(())
    }

    /// Network output; `pre` receives every layer's pre-activations.
    fn forward(&self, params: &[f64], input: &[f64], pre: &mut [Vec<f64>]) -> f64 {
        let layers = self.widths.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let w = &params[offset..offset + n_in * n_out];
            let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let (done, rest) = pre.split_at_mut(l);
            let z = &mut rest[0];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut acc = b[o];
                if l == 0 {
                    for (wi, xi) in row.iter().zip(input) {
                        acc += wi * xi;
                    }
                } else {
                    for (wi, zi) in row.iter().zip(&done[l - 1]) {
                        acc += wi * zi.max(0.0);
                    }
                }
                z[o] = acc;
            }
        }
        pre[layers - 1][0]
    }

    fn buffers(&self) -> Vec<Vec<f64>> {
        self.widths[1..].iter().map(|&w| vec![0.0; w]).collect()
    }

    /// Mean squared error of the network on `data`; 0 for an empty set.
    pub fn mse(&self, params: &[f64], data: &Dataset) -> Result<f64, PotentialError> {
        self.check_dim(params)?;
        if data.d != self.widths[0] {
            return Err(PotentialError::Contract("dataset width does not match the network".into()));
        }
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut pre = self.buffers();
        let sse: f64 = (0..data.len())
            .map(|i| {
                let r = self.forward(params, data.row(i), &mut pre) - data.y[i];
                r * r
            })
            .sum();
        Ok(sse / data.len() as f64)
    }

    pub fn try_value(&self, params: &[f64]) -> Result<f64, PotentialError> {
        let prior = 0.5 * self.lambda * params.iter().map(|p| p * p).sum::<f64>();
        Ok(self.mse(params, &self.data)? + prior)
    }

    /// Reverse-mode derivative of the potential. A ReLU whose pre-activation
    /// is exactly zero contributes `relu_slope_at_zero`.
    pub fn grad(&self, params: &[f64]) -> Result<Vec<f64>, PotentialError> {
        self.check_dim(params)?;
        let mut g: Vec<f64> = params.iter().map(|p| self.lambda * p).collect();
        let m = self.data.len();
        if m == 0 {
            return Ok(g);
        }
        let layers = self.widths.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for w in self.widths.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut pre = self.buffers();
        let mut delta: Vec<Vec<f64>> = self.buffers();
        let slope0 = self.relu_slope_at_zero;
        let relu_d = |z: f64| if z > 0.0 { 1.0 } else if z < 0.0 { 0.0 } else { slope0 };
        for i in 0..m {
            let input = self.data.row(i);
            let out = self.forward(params, input, &mut pre);
            delta[layers - 1][0] = 2.0 * (out - self.data.y[i]) / m as f64;
            for l in (0..layers).rev() {
                let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
                let base = offsets[l];
                for o in 0..n_out {
                    let d = delta[l][o];
                    if d == 0.0 {
                        continue;
                    }
                    let gw = &mut g[base + o * n_in..base + (o + 1) * n_in];
                    if l == 0 {
                        for (gi, xi) in gw.iter_mut().zip(input) {
                            *gi += d * xi;
                        }
                    } else {
                        for (gi, zi) in gw.iter_mut().zip(&pre[l - 1]) {
                            *gi += d * zi.max(0.0);
                        }
                    }
                    g[base + n_in * n_out + o] += d;
                }
                if l > 0 {
                    let w = &params[base..base + n_in * n_out];
                    let (lower, upper) = delta.split_at_mut(l);
                    let next = &mut lower[l - 1];
                    for (j, nj) in next.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for o in 0..n_out {
                            acc += w[o * n_in + j] * upper[0][o];
                        }
                        *nj = acc * relu_d(pre[l - 1][j]);
                    }
                }
            }
        }
        Ok(g)
    }
}

impl Potential for ReluNetPotential {
    fn dim(&self) -> usize {
        self.n_params
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.try_value(x).expect("parameter vector has the network's dimension")
    }

    /// The selection is fixed by `relu_slope_at_zero`; `rule` is not used.
    fn subgradient(&self, x: &[f64], _rule: SelectionRule, _rng: &mut ChainRng, out: &mut [f64]) {
        let g = self.grad(x).expect("parameter vector has the network's dimension");
        out.copy_from_slice(&g);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_net(m: usize, lambda: f64) -> ReluNetPotential {
        let data = Dataset::synthetic_regression(m, 3, 11);
        ReluNetPotential::three_by_ten(data, lambda, 0.0).unwrap()
    }

    fn fd_grad(p: &ReluNetPotential, params: &[f64], h: f64) -> Vec<f64> {
        (0..params.len())
            .map(|k| {
                let mut a = params.to_vec();
                let mut b = params.to_vec();
                a[k] += h;
                b[k] -= h;
                (p.try_value(&a).unwrap() - p.try_value(&b).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn parameter_count() {
        let p = small_net(4, 0.0);
        assert_eq!(p.n_params(), 3 * 10 + 10 + 10 * 10 + 10 + 10 * 10 + 10 + 10 + 1);
    }

    #[test]
    fn gradient_matches_fd_when_all_units_active() {
        // Positive inputs, weights and biases keep every pre-activation > 0.
        let data = Dataset::new(2, vec![0.5, 1.0, 1.5, 0.2, 0.3, 0.9], vec![1.0, -2.0, 0.5]).unwrap();
        let p = ReluNetPotential::new(vec![2, 4, 3, 1], data, 0.0, 0.0).unwrap();
        let params: Vec<f64> = (0..p.n_params()).map(|i| 0.05 + 0.01 * (i % 7) as f64).collect();
        let g = p.grad(&params).unwrap();
        let fd = fd_grad(&p, &params, 1e-6);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn prior_only_gradient_is_params() {
        let data = Dataset::new(3, vec![], vec![]).unwrap();
        let p = ReluNetPotential::three_by_ten(data, 1.0, 0.0).unwrap();
        let params = p.init_params(5);
        assert_eq!(p.grad(&params).unwrap(), params);
    }

    #[test]
    fn kink_gradients_bracket_one_sided_differences() {
        // One datum, one hidden unit whose pre-activation is exactly 0.
        let data = Dataset::new(1, vec![1.0], vec![3.0]).unwrap();
        let zero = ReluNetPotential::new(vec![1, 1, 1], data.clone(), 0.0, 0.0).unwrap();
        let one = ReluNetPotential::new(vec![1, 1, 1], data, 0.0, 1.0).unwrap();
        // w1 = 1, b1 = -1 -> z = 0; w2 = 2, b2 = 0.
        let params = [1.0, -1.0, 2.0, 0.0];
        let g0 = zero.grad(&params).unwrap();
        let g1 = one.grad(&params).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let mut up = params;
            let mut dn = params;
            up[k] += h;
            dn[k] -= h;
            let base = zero.try_value(&params).unwrap();
            let right = (zero.try_value(&up).unwrap() - base) / h;
            let left = (base - zero.try_value(&dn).unwrap()) / h;
            let (lo, hi) = (left.min(right), left.max(right));
            let (a, b) = (g0[k].min(g1[k]), g0[k].max(g1[k]));
            assert!((a - lo).abs() < 1e-4 && (b - hi).abs() < 1e-4, "k={k}: [{a},{b}] vs [{lo},{hi}]");
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = small_net(4, 0.0);
        assert!(matches!(p.grad(&[0.0; 3]), Err(PotentialError::Contract(_))));
    }

    #[test]
    fn csv_round_trip() {
        let text = "a,b,target\n1,2,3\n4,5,6\n";
        let d = Dataset::from_csv(text.as_bytes()).unwrap();
        assert_eq!(d.d, 2);
        assert_eq!(d.x, vec![1.0, 2.0, 4.0, 5.0]);
        assert_eq!(d.y, vec![3.0, 6.0]);
        assert!(Dataset::from_csv("a,b\n1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn invalid_slope_rejected() {
        let data = Dataset::synthetic_regression(2, 2, 0);
        assert!(ReluNetPotential::three_by_ten(data, 0.0, 1.5).is_err());
    }
}
