//! Fully connected tanh network with hand-written backpropagation.

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// One affine layer, `y = W x + b`, `W` row-major `n_out x n_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Float> Dense<T> {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            w: vec![T::zero(); n_in * n_out],
            b: vec![T::zero(); n_out],
        }
    }

    /// Orthogonal rows (or columns, whichever are fewer) scaled by `gain`; zero bias.
    pub fn orthogonal<R: Rng + ?Sized>(n_in: usize, n_out: usize, gain: f64, rng: &mut R) -> Self {
        let w = orthogonal_matrix(n_out, n_in, rng);
        Self {
            n_in,
            n_out,
            w: w.iter().map(|&x| T::from(gain * x).unwrap()).collect(),
            b: vec![T::zero(); n_out],
        }
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }

    fn forward(&self, x: &[T], y: &mut [T]) {
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            let mut s = self.b[o];
            for (wi, xi) in row.iter().zip(x) {
                s = s + *wi * *xi;
            }
            *yo = s;
        }
    }
}

/// `rows x cols` matrix with orthonormal rows (if `rows <= cols`) or columns.
fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    // Gram-Schmidt on the longer dimension's vectors of a Gaussian matrix.
    let (n, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    while q.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
        for prev in &q {
            let d: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(prev).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            q.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = if rows <= cols { q[r][c] } else { q[c][r] };
        }
    }
    out
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpTape<T> {
    /// `acts[0]` is the input, `acts[k]` the output of layer `k - 1` after its nonlinearity.
    acts: Vec<Vec<T>>,
}

impl<T> Default for MlpTape<T> {
    fn default() -> Self {
        Self { acts: Vec::new() }
    }
}

/// Tanh hidden layers, linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Float> Mlp<T> {
    /// `dims = [n_in, h1, ..., n_out]`: orthogonal init with gain `sqrt 2`
    /// and a zero output layer.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, d)| {
                if k == last {
                    Dense::zeros(d[0], d[1])
                } else {
                    Dense::orthogonal(d[0], d[1], 2f64.sqrt(), rng)
                }
            })
            .collect();
        Self { layers }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].n_in];
        d.extend(self.layers.iter().map(|l| l.n_out));
        d
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().unwrap().n_out
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut y = vec![T::zero(); l.n_out];
            l.forward(&cur, &mut y);
            if k < last {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            cur = y;
        }
        cur
    }

    /// Forward pass that records activations for [`Self::backward`].
    pub fn forward_tape(&self, x: &[T], tape: &mut MlpTape<T>) -> Vec<T> {
        tape.acts.clear();
        tape.acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut y = vec![T::zero(); l.n_out];
            l.forward(tape.acts.last().unwrap(), &mut y);
            if k < last {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            tape.acts.push(y);
        }
        tape.acts.last().unwrap().clone()
    }

    /// Accumulates `d loss / d params` into `grad` (flat, [`Self::flatten`] order)
    /// given `d loss / d output`.
    pub fn backward(&self, tape: &MlpTape<T>, d_out: &[T], grad: &mut [T]) {
        debug_assert_eq!(grad.len(), self.n_params());
        let mut delta = d_out.to_vec();
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.n_params();
        }
        for k in (0..self.layers.len()).rev() {
            let l = &self.layers[k];
            let x = &tape.acts[k];
            let g = &mut grad[offsets[k]..offsets[k] + l.n_params()];
            let (gw, gb) = g.split_at_mut(l.w.len());
            for o in 0..l.n_out {
                let d = delta[o];
                if d == T::zero() {
                    continue;
                }
                gb[o] = gb[o] + d;
                let row = &mut gw[o * l.n_in..(o + 1) * l.n_in];
                for (gi, xi) in row.iter_mut().zip(x) {
                    *gi = *gi + d * *xi;
                }
            }
            if k == 0 {
                break;
            }
            // Through W, then through the tanh of the previous layer.
            let mut prev = vec![T::zero(); l.n_in];
            for o in 0..l.n_out {
                let d = delta[o];
                if d == T::zero() {
                    continue;
                }
                let row = &l.w[o * l.n_in..(o + 1) * l.n_in];
                for (p, wi) in prev.iter_mut().zip(row) {
                    *p = *p + d * *wi;
                }
            }
            for (p, a) in prev.iter_mut().zip(x) {
                *p = *p * (T::one() - *a * *a);
            }
            delta = prev;
        }
    }

    /// Parameters as `[W0, b0, W1, b1, ...]`.
    pub fn flatten(&self, out: &mut Vec<T>) {
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
    }

    /// Inverse of [`Self::flatten`]; returns the number of values consumed.
    pub fn unflatten(&mut self, src: &[T]) -> usize {
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&src[k..k + nw]);
            k += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&src[k..k + nb]);
            k += nb;
        }
        k
    }

    /// Same network in another float type.
    pub fn cast<U: Float>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    n_in: l.n_in,
                    n_out: l.n_out,
                    w: l.w.iter().map(|&x| U::from(x).unwrap()).collect(),
                    b: l.b.iter().map(|&x| U::from(x).unwrap()).collect(),
                })
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(&l.b).all(|x| x.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = orthogonal_matrix(4, 9, &mut rng);
        for a in 0..4 {
            for b in 0..4 {
                let d: f64 = (0..9).map(|c| m[a * 9 + c] * m[b * 9 + c]).sum();
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-12);
            }
        }
        let m = orthogonal_matrix(9, 4, &mut rng);
        for a in 0..4 {
            let d: f64 = (0..9).map(|r| m[r * 4 + a] * m[r * 4 + a]).sum();
            assert!((d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_output_layer_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net: Mlp<f64> = Mlp::new(&[5, 7, 7, 1], &mut rng);
        assert_eq!(net.forward(&[1.0, -2.0, 0.5, 0.1, 3.0]), vec![0.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net: Mlp<f64> = Mlp::new(&[3, 4, 4, 2], &mut rng);
        let mut flat = Vec::new();
        net.flatten(&mut flat);
        flat.iter_mut()
            .for_each(|p| *p += 0.3 * rng.random_range(-1.0..1.0));
        net.unflatten(&flat);
        let x = [0.3, -0.7, 1.1];
        let w = [0.6, -1.3];
        let loss = |n: &Mlp<f64>| {
            let y = n.forward(&x);
            y[0] * w[0] + y[1] * w[1]
        };
        let mut tape = MlpTape::default();
        net.forward_tape(&x, &mut tape);
        let mut g = vec![0.0; net.n_params()];
        net.backward(&tape, &w, &mut g);
        for k in 0..flat.len() {
            let mut p = flat.clone();
            p[k] += 1e-6;
            let mut np = net.clone();
            np.unflatten(&p);
            let lp = loss(&np);
            p[k] -= 2e-6;
            np.unflatten(&p);
            let lm = loss(&np);
            let fd = (lp - lm) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-7, "param {k}: {fd} vs {}", g[k]);
        }
    }
}
