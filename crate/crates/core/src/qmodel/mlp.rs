//! Two-block feed-forward q-function with ELU activations and batch
//! normalization of both pre-activation layers.
//!
//! ```text
//! I   = b_in + w_z (z - 0.5) + W_x x          (width R)
//! H   = b_hid + W_hid ELU(BN(I))              (width T)
//! q   = w_out . ELU(BN(H))
//! ```
//!
//! Flattened parameter order (see [`MlpSpec::params`]):
//! input weights `(2 + p) x R` row-major (bias row, z row, one row per
//! covariate), input BN scale `R`, input BN shift `R`, hidden weights
//! `(1 + R) x T` row-major (bias row first), hidden BN scale `T`, hidden BN
//! shift `T`, output weights `T`.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Batch, Mode};
use crate::error::{invalid, CdeError, Result};

pub const DEFAULT_BN_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

/// Batch-normalization state of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub scale: Array1<f64>,
    pub shift: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn identity(width: usize) -> Self {
        Self {
            scale: Array1::ones(width),
            shift: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MlpDocument", try_from = "MlpDocument")]
pub struct MlpSpec {
    pub input_weights: Array2<f64>,
    pub input_bn: BatchNorm,
    pub hidden_weights: Array2<f64>,
    pub hidden_bn: BatchNorm,
    pub output_weights: Array1<f64>,
    pub elu_alpha: f64,
    pub momentum: f64,
    pub bn_eps: f64,
    /// When false both normalization steps are skipped.
    pub batch_norm: bool,
}

pub fn elu(u: f64, alpha: f64) -> f64 {
    if u > 0.0 {
        u
    } else {
        alpha * u.exp_m1()
    }
}

pub fn elu_grad(u: f64, alpha: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else {
        alpha * u.exp()
    }
}

/// Intermediate values of one normalized layer for every batch row.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Pre-activations before normalization.
    pub pre: Array2<f64>,
    /// Standardized pre-activations.
    pub xhat: Array2<f64>,
    /// After scale and shift; ELU input.
    pub normalized: Array2<f64>,
    /// ELU output.
    pub activation: Array2<f64>,
    pub batch_mean: Array1<f64>,
    pub batch_var: Array1<f64>,
    pub inv_std: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub mode: Mode,
    pub z_centered: Vec<f64>,
    pub owner: Vec<usize>,
    pub x: Array2<f64>,
    pub input: LayerCache,
    pub hidden: LayerCache,
}

impl ForwardCache {
    pub fn rows(&self) -> usize {
        self.z_centered.len()
    }
}

impl MlpSpec {
    /// He initialization: weights `N(0, 2 / fan_in)`, zero biases, identity
    /// batch normalization.
    pub fn init_he(hidden_width: usize, output_width: usize, p: usize, seed: u64) -> Result<Self> {
        if hidden_width == 0 || output_width == 0 {
            return Err(invalid("layer widths must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let he = |fan_in: usize| Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive sd");
        let d_in = he(p + 1);
        let mut input_weights = Array2::zeros((p + 2, hidden_width));
        for mut row in input_weights.rows_mut().into_iter().skip(1) {
            row.iter_mut().for_each(|w| *w = d_in.sample(&mut rng));
        }
        let d_hid = he(hidden_width);
        let mut hidden_weights = Array2::zeros((hidden_width + 1, output_width));
        for mut row in hidden_weights.rows_mut().into_iter().skip(1) {
            row.iter_mut().for_each(|w| *w = d_hid.sample(&mut rng));
        }
        let d_out = he(output_width);
        let output_weights = (0..output_width).map(|_| d_out.sample(&mut rng)).collect();
        Ok(Self {
            input_weights,
            input_bn: BatchNorm::identity(hidden_width),
            hidden_weights,
            hidden_bn: BatchNorm::identity(output_width),
            output_weights,
            elu_alpha: 1.0,
            momentum: DEFAULT_MOMENTUM,
            bn_eps: DEFAULT_BN_EPS,
            batch_norm: true,
        })
    }

    pub fn p(&self) -> usize {
        self.input_weights.nrows() - 2
    }

    pub fn hidden_width(&self) -> usize {
        self.input_weights.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.output_weights.len()
    }

    pub fn num_params(&self) -> usize {
        let (r, t) = (self.hidden_width(), self.output_width());
        (self.p() + 2) * r + 2 * r + (r + 1) * t + 2 * t + t
    }

    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend(self.input_weights.iter());
        v.extend(self.input_bn.scale.iter());
        v.extend(self.input_bn.shift.iter());
        v.extend(self.hidden_weights.iter());
        v.extend(self.hidden_bn.scale.iter());
        v.extend(self.hidden_bn.shift.iter());
        v.extend(self.output_weights.iter());
        v
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(CdeError::Dimension {
                expected: self.num_params(),
                got: theta.len(),
            });
        }
        let mut it = theta.iter().copied();
        let mut fill = |dst: &mut dyn Iterator<Item = &mut f64>| dst.for_each(|d| *d = it.next().unwrap());
        fill(&mut self.input_weights.iter_mut());
        fill(&mut self.input_bn.scale.iter_mut());
        fill(&mut self.input_bn.shift.iter_mut());
        fill(&mut self.hidden_weights.iter_mut());
        fill(&mut self.hidden_bn.scale.iter_mut());
        fill(&mut self.hidden_bn.shift.iter_mut());
        fill(&mut self.output_weights.iter_mut());
        Ok(())
    }

    /// True for parameters under the ridge penalty: everything except
    /// batch-norm shifts (and batch-norm scales when normalization is off).
    pub fn penalty_mask(&self) -> Vec<bool> {
        let (r, t) = (self.hidden_width(), self.output_width());
        let bn = self.batch_norm;
        let mut m = Vec::with_capacity(self.num_params());
        m.extend(std::iter::repeat_n(true, (self.p() + 2) * r));
        m.extend(std::iter::repeat_n(bn, r));
        m.extend(std::iter::repeat_n(false, r));
        m.extend(std::iter::repeat_n(true, (r + 1) * t));
        m.extend(std::iter::repeat_n(bn, t));
        m.extend(std::iter::repeat_n(false, t));
        m.extend(std::iter::repeat_n(true, t));
        m
    }

    fn normalize(&self, pre: Array2<f64>, bn: &BatchNorm, mode: Mode) -> LayerCache {
        let rows = pre.nrows() as f64;
        let width = pre.ncols();
        let (batch_mean, batch_var) = if !self.batch_norm {
            (Array1::zeros(width), Array1::ones(width))
        } else {
            match mode {
                Mode::Train => {
                    let mean = pre.sum_axis(Axis(0)) / rows;
                    let var = (&pre - &mean).mapv(|d| d * d).sum_axis(Axis(0)) / rows;
                    (mean, var)
                }
                Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone()),
            }
        };
        let (xhat, inv_std, normalized) = if self.batch_norm {
            let inv_std = batch_var.mapv(|v| 1.0 / (v + self.bn_eps).sqrt());
            let xhat = (&pre - &batch_mean) * &inv_std;
            let normalized = &xhat * &bn.scale + &bn.shift;
            (xhat, inv_std, normalized)
        } else {
            (pre.clone(), Array1::ones(width), pre.clone())
        };
        let alpha = self.elu_alpha;
        let activation = normalized.mapv(|u| elu(u, alpha));
        LayerCache {
            pre,
            xhat,
            normalized,
            activation,
            batch_mean,
            batch_var,
            inv_std,
        }
    }

    /// Forward pass over a batch. Train mode normalizes with batch
    /// statistics and needs at least two rows; eval mode uses running moments.
    pub fn forward(&self, batch: &Batch<'_>, mode: Mode) -> Result<(Vec<f64>, ForwardCache)> {
        let rows = batch.z.len();
        if rows == 0 {
            return Err(invalid("empty batch"));
        }
        if mode == Mode::Train && self.batch_norm && rows < 2 {
            return Err(invalid("train-mode batch normalization needs at least two rows"));
        }
        batch.check(self.p())?;
        let r = self.hidden_width();
        // covariate contribution once per observation
        let x_part = batch.x.dot(&self.input_weights.slice(ndarray::s![2.., ..]));
        let bias = self.input_weights.row(0);
        let wz = self.input_weights.row(1);
        let z_centered: Vec<f64> = batch.z.iter().map(|z| z - 0.5).collect();
        let mut pre1 = Array2::zeros((rows, r));
        for (i, mut row) in pre1.rows_mut().into_iter().enumerate() {
            let xo = x_part.row(batch.owner[i]);
            let c = z_centered[i];
            Zip::from(&mut row)
                .and(&bias)
                .and(&wz)
                .and(&xo)
                .for_each(|o, &b, &w, &xv| *o = b + w * c + xv);
        }
        let input = self.normalize(pre1, &self.input_bn, mode);
        let pre2 = input.activation.dot(&self.hidden_weights.slice(ndarray::s![1.., ..]))
            + self.hidden_weights.row(0);
        let hidden = self.normalize(pre2, &self.hidden_bn, mode);
        let q = hidden.activation.dot(&self.output_weights).to_vec();
        Ok((
            q,
            ForwardCache {
                mode,
                z_centered,
                owner: batch.owner.to_vec(),
                x: batch.x.to_owned(),
                input,
                hidden,
            },
        ))
    }

    /// Gradient of `sum_rows dq[row] * q[row]` with respect to every
    /// parameter, flattened in [`Self::params`] order.
    pub fn backward(&self, cache: &ForwardCache, dq: &[f64]) -> Result<Vec<f64>> {
        let rows = cache.rows();
        if dq.len() != rows {
            return Err(CdeError::Dimension {
                expected: rows,
                got: dq.len(),
            });
        }
        let (r, t) = (self.hidden_width(), self.output_width());
        if cache.input.pre.ncols() != r || cache.hidden.pre.ncols() != t || cache.x.ncols() != self.p() {
            return Err(invalid("forward cache does not match network shape"));
        }
        let dq = Array1::from(dq.to_vec());
        let g_out = cache.hidden.activation.t().dot(&dq);
        let dact2 = outer(&dq, &self.output_weights);
        let (da2, g_scale2, g_shift2) = self.layer_backward(&cache.hidden, &self.hidden_bn, dact2, cache.mode);

        let mut g_hid = Array2::zeros((r + 1, t));
        g_hid.row_mut(0).assign(&da2.sum_axis(Axis(0)));
        g_hid
            .slice_mut(ndarray::s![1.., ..])
            .assign(&cache.input.activation.t().dot(&da2));
        let dact1 = da2.dot(&self.hidden_weights.slice(ndarray::s![1.., ..]).t());
        let (da1, g_scale1, g_shift1) = self.layer_backward(&cache.input, &self.input_bn, dact1, cache.mode);

        let p = self.p();
        let mut g_in = Array2::zeros((p + 2, r));
        g_in.row_mut(0).assign(&da1.sum_axis(Axis(0)));
        let zc = Array1::from(cache.z_centered.clone());
        g_in.row_mut(1).assign(&da1.t().dot(&zc));
        // aggregate row gradients per observation, then multiply by x
        let mut per_obs = Array2::<f64>::zeros((cache.x.nrows(), r));
        for (i, row) in da1.rows().into_iter().enumerate() {
            let mut dst = per_obs.row_mut(cache.owner[i]);
            dst += &row;
        }
        g_in.slice_mut(ndarray::s![2.., ..]).assign(&cache.x.t().dot(&per_obs));

        let mut grad = Vec::with_capacity(self.num_params());
        grad.extend(g_in.iter());
        grad.extend(g_scale1.iter());
        grad.extend(g_shift1.iter());
        grad.extend(g_hid.iter());
        grad.extend(g_scale2.iter());
        grad.extend(g_shift2.iter());
        grad.extend(g_out.iter());
        Ok(grad)
    }

    /// Back-propagates through ELU and batch normalization of one layer.
    /// Returns (gradient wrt pre-activations, scale gradient, shift gradient).
    fn layer_backward(
        &self,
        layer: &LayerCache,
        bn: &BatchNorm,
        dact: Array2<f64>,
        mode: Mode,
    ) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
        let alpha = self.elu_alpha;
        let mut du = dact;
        Zip::from(&mut du)
            .and(&layer.normalized)
            .for_each(|d, &u| *d *= elu_grad(u, alpha));
        let width = du.ncols();
        if !self.batch_norm {
            return (du, Array1::zeros(width), Array1::zeros(width));
        }
        let g_scale = (&du * &layer.xhat).sum_axis(Axis(0));
        let g_shift = du.sum_axis(Axis(0));
        let dxhat = du * &bn.scale;
        let dpre = match mode {
            Mode::Eval => dxhat * &layer.inv_std,
            Mode::Train => {
                let m = dxhat.nrows() as f64;
                let sum_d = dxhat.sum_axis(Axis(0));
                let sum_dx = (&dxhat * &layer.xhat).sum_axis(Axis(0));
                let mut out = dxhat * m - &sum_d - &(&layer.xhat * &sum_dx);
                out *= &(&layer.inv_std / m);
                out
            }
        };
        (dpre, g_scale, g_shift)
    }

    /// Exponential moving average of the batch moments seen in a train-mode
    /// forward pass. The variance is stored unbiased.
    pub fn update_running_moments(&mut self, cache: &ForwardCache) {
        if !self.batch_norm || cache.mode != Mode::Train {
            return;
        }
        let m = self.momentum;
        let n = cache.rows() as f64;
        let correction = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
        for (bn, layer) in [
            (&mut self.input_bn, &cache.input),
            (&mut self.hidden_bn, &cache.hidden),
        ] {
            bn.running_mean = &bn.running_mean * m + &layer.batch_mean * (1.0 - m);
            bn.running_var = &bn.running_var * m + &layer.batch_var * ((1.0 - m) * correction);
        }
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let col = a.view().insert_axis(Axis(1));
    let row = b.view().insert_axis(Axis(0));
    &col * &row
}

/// On-disk form of an [`MlpSpec`]: dimensions plus flat arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpDocument {
    pub p: usize,
    pub hidden_width: usize,
    pub output_width: usize,
    pub elu_alpha: f64,
    pub momentum: f64,
    pub bn_eps: f64,
    pub batch_norm: bool,
    /// Flattened in [`MlpSpec::params`] order.
    pub parameters: Vec<f64>,
    pub input_running_mean: Vec<f64>,
    pub input_running_var: Vec<f64>,
    pub hidden_running_mean: Vec<f64>,
    pub hidden_running_var: Vec<f64>,
}

impl From<MlpSpec> for MlpDocument {
    fn from(s: MlpSpec) -> Self {
        Self {
            p: s.p(),
            hidden_width: s.hidden_width(),
            output_width: s.output_width(),
            elu_alpha: s.elu_alpha,
            momentum: s.momentum,
            bn_eps: s.bn_eps,
            batch_norm: s.batch_norm,
            parameters: s.params(),
            input_running_mean: s.input_bn.running_mean.to_vec(),
            input_running_var: s.input_bn.running_var.to_vec(),
            hidden_running_mean: s.hidden_bn.running_mean.to_vec(),
            hidden_running_var: s.hidden_bn.running_var.to_vec(),
        }
    }
}

impl TryFrom<MlpDocument> for MlpSpec {
    type Error = CdeError;

    fn try_from(d: MlpDocument) -> Result<Self> {
        let mut s = MlpSpec::init_he(d.hidden_width, d.output_width, d.p, 0)?;
        s.set_params(&d.parameters)?;
        let (r, t) = (d.hidden_width, d.output_width);
        for (v, len) in [
            (&d.input_running_mean, r),
            (&d.input_running_var, r),
            (&d.hidden_running_mean, t),
            (&d.hidden_running_var, t),
        ] {
            if v.len() != len {
                return Err(CdeError::Dimension {
                    expected: len,
                    got: v.len(),
                });
            }
        }
        s.input_bn.running_mean = Array1::from(d.input_running_mean);
        s.input_bn.running_var = Array1::from(d.input_running_var);
        s.hidden_bn.running_mean = Array1::from(d.hidden_running_mean);
        s.hidden_bn.running_var = Array1::from(d.hidden_running_var);
        s.elu_alpha = d.elu_alpha;
        s.momentum = d.momentum;
        s.bn_eps = d.bn_eps;
        s.batch_norm = d.batch_norm;
        Ok(s)
    }
}

/// Builds a batch view where row `i` pairs `z[i]` with observation `owner[i]`.
pub fn batch_view<'a>(z: &'a [f64], owner: &'a [usize], x: ArrayView2<'a, f64>) -> Batch<'a> {
    Batch { z, owner, x }
}
