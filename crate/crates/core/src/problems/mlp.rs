//! Fully connected tanh network with hand-written forward- and reverse-mode
//! derivatives with respect to its parameters.
//!
//! Parameters are packed layer by layer; within a layer the weight matrix
//! (`out x in`, row-major) comes first, then the bias vector. Hidden layers
//! use `tanh`, the output layer is affine.
//!
//! Besides the plain network, the `*_laplacian` entry points propagate the
//! input-space first and second derivatives `∂u/∂x_k`, `∂²u/∂x_k²` through
//! every layer (exact second derivatives of `tanh`), so that the Laplacian
//! `Δₓu` and its parameter derivatives are available for collocation
//! residuals.

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
}

pub(super) struct Layer {
    pub(super) n_in: usize,
    pub(super) n_out: usize,
    pub(super) w: usize,
    pub(super) b: usize,
}

/// Values cached per layer for the reverse sweep. Channel arrays are laid
/// out `[unit * c + channel]`.
struct Cache {
    a: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    z: Vec<f64>,
    z1: Vec<f64>,
    z2: Vec<f64>,
}

/// Output of a forward sweep: value, per-output Laplacian, and their
/// tangents when a parameter direction was supplied.
#[derive(Clone, Debug, Default)]
pub struct MlpOutput {
    pub value: Vec<f64>,
    pub laplacian: Vec<f64>,
    pub d_value: Vec<f64>,
    pub d_laplacian: Vec<f64>,
}

#[inline]
fn tanh_derivs(z: f64) -> (f64, f64, f64, f64) {
    let t = z.tanh();
    let s1 = 1.0 - t * t;
    let s2 = -2.0 * t * s1;
    let s3 = -2.0 * s1 * s1 + 4.0 * t * t * s1;
    (t, s1, s2, s3)
}

impl Mlp {
    /// `widths = [input, hidden..., output]`.
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::input(format!(
                "Mlp: need at least input and output widths, all positive; got {widths:?}"
            )));
        }
        Ok(Mlp { widths })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub(super) fn layers(&self) -> Vec<Layer> {
        let mut off = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let l = Layer {
                    n_in: w[0],
                    n_out: w[1],
                    w: off,
                    b: off + w[0] * w[1],
                };
                off += w[0] * w[1] + w[1];
                l
            })
            .collect()
    }

    /// Xavier-normal weights, `N(0, 2/(fan_in + fan_out))`, zero biases.
    pub fn xavier_normal(&self, rng: &mut Rng) -> Vec<f64> {
        let mut theta = vec![0.0; self.param_count()];
        for l in self.layers() {
            let std = (2.0 / (l.n_in + l.n_out) as f64).sqrt();
            for w in &mut theta[l.w..l.b] {
                *w = std * rng.normal();
            }
        }
        theta
    }

    fn check(&self, theta: &[f64], x: &[f64]) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::input(format!(
                "Mlp: theta has length {}, expected {}",
                theta.len(),
                self.param_count()
            )));
        }
        if x.len() != self.input_dim() {
            return Err(Error::input(format!(
                "Mlp: input has length {}, expected {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check(theta, x)?;
        Ok(self.sweep(theta, x, false, None).0.value)
    }

    /// Output and its directional derivative along `dtheta`.
    pub fn jvp(&self, theta: &[f64], x: &[f64], dtheta: &[f64]) -> Result<MlpOutput> {
        self.check(theta, x)?;
        self.check_tangent(dtheta)?;
        Ok(self.sweep(theta, x, false, Some(dtheta)).0)
    }

    /// Accumulates `(∂u/∂θ)ᵀ d_out` into `grad`.
    pub fn vjp(&self, theta: &[f64], x: &[f64], d_out: &[f64], grad: &mut [f64]) -> Result<()> {
        self.check(theta, x)?;
        self.check_cotangent(d_out, grad)?;
        let (_, caches) = self.sweep(theta, x, false, None);
        self.reverse(theta, &caches, 0, d_out, None, grad);
        Ok(())
    }

    pub fn forward_laplacian(&self, theta: &[f64], x: &[f64]) -> Result<MlpOutput> {
        self.check(theta, x)?;
        Ok(self.sweep(theta, x, true, None).0)
    }

    pub fn jvp_laplacian(&self, theta: &[f64], x: &[f64], dtheta: &[f64]) -> Result<MlpOutput> {
        self.check(theta, x)?;
        self.check_tangent(dtheta)?;
        Ok(self.sweep(theta, x, true, Some(dtheta)).0)
    }

    /// Accumulates `(∂u/∂θ)ᵀ d_out + (∂Δu/∂θ)ᵀ d_lap` into `grad`.
    pub fn vjp_laplacian(
        &self,
        theta: &[f64],
        x: &[f64],
        d_out: &[f64],
        d_lap: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        self.check(theta, x)?;
        self.check_cotangent(d_out, grad)?;
        self.check_cotangent(d_lap, grad)?;
        let (_, caches) = self.sweep(theta, x, true, None);
        self.reverse(theta, &caches, self.input_dim(), d_out, Some(d_lap), grad);
        Ok(())
    }

    fn check_tangent(&self, dtheta: &[f64]) -> Result<()> {
        if dtheta.len() != self.param_count() {
            return Err(Error::input(format!(
                "Mlp: tangent has length {}, expected {}",
                dtheta.len(),
                self.param_count()
            )));
        }
        Ok(())
    }

    fn check_cotangent(&self, d_out: &[f64], grad: &[f64]) -> Result<()> {
        if d_out.len() != self.output_dim() || grad.len() != self.param_count() {
            return Err(Error::input(format!(
                "Mlp: cotangent/gradient lengths {}/{} do not match {}/{}",
                d_out.len(),
                grad.len(),
                self.output_dim(),
                self.param_count()
            )));
        }
        Ok(())
    }

    fn sweep(
        &self,
        theta: &[f64],
        x: &[f64],
        with_laplacian: bool,
        tangent: Option<&[f64]>,
    ) -> (MlpOutput, Vec<Cache>) {
        let d = self.input_dim();
        let c = if with_laplacian { d } else { 0 };
        let layers = self.layers();
        let n_layers = layers.len();

        let mut a = x.to_vec();
        let mut a1 = vec![0.0; d * c];
        for k in 0..c {
            a1[k * c + k] = 1.0;
        }
        let mut a2 = vec![0.0; d * c];
        let mut ta = vec![0.0; d];
        let mut ta1 = vec![0.0; d * c];
        let mut ta2 = vec![0.0; d * c];

        let mut caches = Vec::with_capacity(n_layers);
        let mut out = MlpOutput::default();

        for (li, l) in layers.iter().enumerate() {
            let w = &theta[l.w..l.b];
            let b = &theta[l.b..l.b + l.n_out];
            let mut z = b.to_vec();
            let mut z1 = vec![0.0; l.n_out * c];
            let mut z2 = vec![0.0; l.n_out * c];
            for o in 0..l.n_out {
                let row = &w[o * l.n_in..(o + 1) * l.n_in];
                let mut acc = 0.0;
                for i in 0..l.n_in {
                    acc += row[i] * a[i];
                    for k in 0..c {
                        z1[o * c + k] += row[i] * a1[i * c + k];
                        z2[o * c + k] += row[i] * a2[i * c + k];
                    }
                }
                z[o] += acc;
            }

            let (mut tz, mut tz1, mut tz2) = (Vec::new(), Vec::new(), Vec::new());
            if let Some(dt) = tangent {
                let dw = &dt[l.w..l.b];
                let db = &dt[l.b..l.b + l.n_out];
                tz = db.to_vec();
                tz1 = vec![0.0; l.n_out * c];
                tz2 = vec![0.0; l.n_out * c];
                for o in 0..l.n_out {
                    let row = &w[o * l.n_in..(o + 1) * l.n_in];
                    let drow = &dw[o * l.n_in..(o + 1) * l.n_in];
                    for i in 0..l.n_in {
                        tz[o] += drow[i] * a[i] + row[i] * ta[i];
                        for k in 0..c {
                            tz1[o * c + k] += drow[i] * a1[i * c + k] + row[i] * ta1[i * c + k];
                            tz2[o * c + k] += drow[i] * a2[i * c + k] + row[i] * ta2[i * c + k];
                        }
                    }
                }
            }

            let last = li + 1 == n_layers;
            if last {
                out.laplacian = (0..l.n_out)
                    .map(|o| (0..c).map(|k| z2[o * c + k]).sum())
                    .collect();
                if tangent.is_some() {
                    out.d_laplacian = (0..l.n_out)
                        .map(|o| (0..c).map(|k| tz2[o * c + k]).sum())
                        .collect();
                    out.d_value = tz.clone();
                }
                out.value = z.clone();
                caches.push(Cache {
                    a: std::mem::take(&mut a),
                    a1: std::mem::take(&mut a1),
                    a2: std::mem::take(&mut a2),
                    z,
                    z1,
                    z2,
                });
                break;
            }

            let mut h = vec![0.0; l.n_out];
            let mut h1 = vec![0.0; l.n_out * c];
            let mut h2 = vec![0.0; l.n_out * c];
            let mut th = vec![0.0; l.n_out];
            let mut th1 = vec![0.0; l.n_out * c];
            let mut th2 = vec![0.0; l.n_out * c];
            for o in 0..l.n_out {
                let (t, s1, s2, s3) = tanh_derivs(z[o]);
                h[o] = t;
                for k in 0..c {
                    let j = o * c + k;
                    h1[j] = s1 * z1[j];
                    h2[j] = s2 * z1[j] * z1[j] + s1 * z2[j];
                }
                if tangent.is_some() {
                    th[o] = s1 * tz[o];
                    for k in 0..c {
                        let j = o * c + k;
                        th1[j] = s2 * tz[o] * z1[j] + s1 * tz1[j];
                        th2[j] = s3 * tz[o] * z1[j] * z1[j]
                            + 2.0 * s2 * z1[j] * tz1[j]
                            + s2 * tz[o] * z2[j]
                            + s1 * tz2[j];
                    }
                }
            }
            caches.push(Cache {
                a: std::mem::replace(&mut a, h),
                a1: std::mem::replace(&mut a1, h1),
                a2: std::mem::replace(&mut a2, h2),
                z,
                z1,
                z2,
            });
            ta = th;
            ta1 = th1;
            ta2 = th2;
        }
        (out, caches)
    }

    fn reverse(
        &self,
        theta: &[f64],
        caches: &[Cache],
        c: usize,
        d_out: &[f64],
        d_lap: Option<&[f64]>,
        grad: &mut [f64],
    ) {
        let layers = self.layers();
        let n_last = self.output_dim();
        let mut zb = d_out.to_vec();
        let mut zb1 = vec![0.0; n_last * c];
        let mut zb2 = vec![0.0; n_last * c];
        if let Some(dl) = d_lap {
            for o in 0..n_last {
                for k in 0..c {
                    zb2[o * c + k] = dl[o];
                }
            }
        }

        for li in (0..layers.len()).rev() {
            let l = &layers[li];
            let cache = &caches[li];
            let w = &theta[l.w..l.b];
            for o in 0..l.n_out {
                let g_row = &mut grad[l.w + o * l.n_in..l.w + (o + 1) * l.n_in];
                for i in 0..l.n_in {
                    let mut acc = zb[o] * cache.a[i];
                    for k in 0..c {
                        acc += zb1[o * c + k] * cache.a1[i * c + k]
                            + zb2[o * c + k] * cache.a2[i * c + k];
                    }
                    g_row[i] += acc;
                }
                grad[l.b + o] += zb[o];
            }
            if li == 0 {
                break;
            }
            // adjoints of this layer's input = previous layer's activations
            let mut ab = vec![0.0; l.n_in];
            let mut ab1 = vec![0.0; l.n_in * c];
            let mut ab2 = vec![0.0; l.n_in * c];
            for o in 0..l.n_out {
                let row = &w[o * l.n_in..(o + 1) * l.n_in];
                for i in 0..l.n_in {
                    ab[i] += row[i] * zb[o];
                    for k in 0..c {
                        ab1[i * c + k] += row[i] * zb1[o * c + k];
                        ab2[i * c + k] += row[i] * zb2[o * c + k];
                    }
                }
            }
            let prev = &caches[li - 1];
            let n = l.n_in;
            zb = vec![0.0; n];
            zb1 = vec![0.0; n * c];
            zb2 = vec![0.0; n * c];
            for o in 0..n {
                let (_, s1, s2, s3) = tanh_derivs(prev.z[o]);
                let mut acc = s1 * ab[o];
                for k in 0..c {
                    let j = o * c + k;
                    let (y1, y2) = (prev.z1[j], prev.z2[j]);
                    acc += s2 * ab1[j] * y1 + ab2[j] * (s3 * y1 * y1 + s2 * y2);
                    zb1[j] = s1 * ab1[j] + 2.0 * s2 * y1 * ab2[j];
                    zb2[j] = s1 * ab2[j];
                }
                zb[o] = acc;
            }
        }
    }
}
