//! Batched evaluation of [`Mlp`] with cached activations, for residuals
//! over many sample points at one parameter vector.

use super::mlp::Mlp;
use crate::error::{Error, Result};

/// Activations of every layer for a batch of inputs at fixed `θ`.
/// `acts[l]` is the `B x n_l` input of layer `l` (row-major), `slopes[l]`
/// the `tanh'` values of hidden layer `l`'s pre-activations.
pub struct MlpLinearization<'a> {
    net: &'a Mlp,
    theta: &'a [f64],
    batch: usize,
    acts: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
    out: Vec<f64>,
}

impl Mlp {
    fn check_batch(&self, theta: &[f64], xs: &[f64]) -> Result<usize> {
        if theta.len() != self.param_count() {
            return Err(Error::input(format!(
                "Mlp: theta has length {}, expected {}",
                theta.len(),
                self.param_count()
            )));
        }
        let d = self.input_dim();
        if xs.len() % d != 0 {
            return Err(Error::input(format!(
                "Mlp: batch of {} values is not a multiple of input dim {d}",
                xs.len()
            )));
        }
        Ok(xs.len() / d)
    }

    /// Outputs for a row-major batch of inputs (`B x input_dim`), returned
    /// as `B x output_dim`.
    pub fn forward_batch(&self, theta: &[f64], xs: &[f64]) -> Result<Vec<f64>> {
        let batch = self.check_batch(theta, xs)?;
        // chunks keep the activations cache-resident on large sets
        const CHUNK: usize = 256;
        let d = self.input_dim();
        let mut out = Vec::with_capacity(batch * self.output_dim());
        for c in xs.chunks(CHUNK * d) {
            out.extend(self.batch_sweep(theta, c, c.len() / d, false).2);
        }
        Ok(out)
    }

    /// Runs the batch forward and keeps what the tangent and adjoint sweeps
    /// need.
    pub fn linearize<'a>(&'a self, theta: &'a [f64], xs: &[f64]) -> Result<MlpLinearization<'a>> {
        let batch = self.check_batch(theta, xs)?;
        let (acts, slopes, out) = self.batch_sweep(theta, xs, batch, true);
        Ok(MlpLinearization {
            net: self,
            theta,
            batch,
            acts,
            slopes,
            out,
        })
    }

    /// Forward sweep over a batch. Activations and `tanh'` values are only
    /// kept when `keep` is set.
    fn batch_sweep(
        &self,
        theta: &[f64],
        xs: &[f64],
        batch: usize,
        keep: bool,
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
        let layers = self.layers();
        let last = layers.len() - 1;
        let mut acts = Vec::new();
        let mut slopes = Vec::new();
        let mut h = xs.to_vec();
        for (li, l) in layers.iter().enumerate() {
            let wt = transpose(&theta[l.w..l.b], l.n_out, l.n_in);
            let b = &theta[l.b..l.b + l.n_out];
            let mut z = vec![0.0; batch * l.n_out];
            for i in 0..batch {
                let zi = &mut z[i * l.n_out..(i + 1) * l.n_out];
                zi.copy_from_slice(b);
                for (k, &hk) in h[i * l.n_in..(i + 1) * l.n_in].iter().enumerate() {
                    axpy_into(zi, hk, &wt[k * l.n_out..(k + 1) * l.n_out]);
                }
            }
            if keep {
                acts.push(std::mem::take(&mut h));
            }
            if li == last {
                return (acts, slopes, z);
            }
            if keep {
                let mut s = Vec::with_capacity(z.len());
                for zi in z.iter_mut() {
                    let t = zi.tanh();
                    s.push(1.0 - t * t);
                    *zi = t;
                }
                slopes.push(s);
            } else {
                z.iter_mut().for_each(|zi| *zi = zi.tanh());
            }
            h = z;
        }
        unreachable!("Mlp has at least one layer")
    }
}

/// `a` is `rows x cols` row-major; returns `cols x rows`.
fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; a.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

#[inline]
fn axpy_into(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

impl MlpLinearization<'_> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn param_dim(&self) -> usize {
        self.theta.len()
    }

    /// Network outputs, `B x output_dim`.
    pub fn outputs(&self) -> &[f64] {
        &self.out
    }

    /// Output tangents `B x output_dim` along the parameter direction.
    pub fn jvp(&self, dtheta: &[f64]) -> Vec<f64> {
        assert_eq!(
            dtheta.len(),
            self.theta.len(),
            "MlpLinearization::jvp dimension mismatch"
        );
        let layers = self.net.layers();
        let last = layers.len() - 1;
        let mut th: Vec<f64> = vec![0.0; self.acts[0].len()];
        for (li, l) in layers.iter().enumerate() {
            let wt = transpose(&self.theta[l.w..l.b], l.n_out, l.n_in);
            let dwt = transpose(&dtheta[l.w..l.b], l.n_out, l.n_in);
            let db = &dtheta[l.b..l.b + l.n_out];
            let h = &self.acts[li];
            let mut tz = vec![0.0; self.batch * l.n_out];
            for i in 0..self.batch {
                let tzi = &mut tz[i * l.n_out..(i + 1) * l.n_out];
                tzi.copy_from_slice(db);
                for k in 0..l.n_in {
                    let (a, c) = (th[i * l.n_in + k], h[i * l.n_in + k]);
                    let row = k * l.n_out..(k + 1) * l.n_out;
                    for ((t, w), dw) in tzi.iter_mut().zip(&wt[row.clone()]).zip(&dwt[row]) {
                        *t += a * w + c * dw;
                    }
                }
            }
            if li < last {
                tz.iter_mut()
                    .zip(&self.slopes[li])
                    .for_each(|(t, s)| *t *= s);
            }
            th = tz;
        }
        th
    }

    /// Parameter gradient of `Σᵢ ⟨d_outᵢ, u(xᵢ)⟩` for output cotangents
    /// `B x output_dim`.
    pub fn vjp(&self, d_out: &[f64]) -> Vec<f64> {
        assert_eq!(
            d_out.len(),
            self.out.len(),
            "MlpLinearization::vjp dimension mismatch"
        );
        let layers = self.net.layers();
        let mut grad = vec![0.0; self.theta.len()];
        let mut gz = d_out.to_vec();
        for (li, l) in layers.iter().enumerate().rev() {
            let w = &self.theta[l.w..l.b];
            let h = &self.acts[li];
            {
                let (gw, gb) = grad[l.w..l.b + l.n_out].split_at_mut(l.n_in * l.n_out);
                for i in 0..self.batch {
                    let hi = &h[i * l.n_in..(i + 1) * l.n_in];
                    for o in 0..l.n_out {
                        let g = gz[i * l.n_out + o];
                        if g == 0.0 {
                            continue;
                        }
                        gb[o] += g;
                        for (gwk, hk) in gw[o * l.n_in..(o + 1) * l.n_in].iter_mut().zip(hi) {
                            *gwk += g * hk;
                        }
                    }
                }
            }
            if li == 0 {
                break;
            }
            let mut gh = vec![0.0; self.batch * l.n_in];
            for i in 0..self.batch {
                let ghi = &mut gh[i * l.n_in..(i + 1) * l.n_in];
                for o in 0..l.n_out {
                    let g = gz[i * l.n_out + o];
                    for (ghk, wk) in ghi.iter_mut().zip(&w[o * l.n_in..(o + 1) * l.n_in]) {
                        *ghk += g * wk;
                    }
                }
            }
            gh.iter_mut()
                .zip(&self.slopes[li - 1])
                .for_each(|(g, s)| *g *= s);
            gz = gh;
        }
        grad
    }
}
