//! Fully connected variational autoencoder with hand-rolled
//! backpropagation.
//!
//! The encoder maps an observation to the mean and log standard deviation
//! of a diagonal Gaussian over the latent space; the decoder parameterizes
//! a Bernoulli or Gaussian likelihood. Training maximizes the single-sample
//! reparameterized ELBO with the KL term in closed form, using mini-batched
//! Adam. Everything is deterministic given the fit seed.
//!
//! The hidden stacks use ReLU activations and may be empty, in which case
//! encoder and decoder are affine. With an isotropic Gaussian likelihood
//! this exactly represents a linear Gaussian model, which is what the
//! importance-sampling oracle exploits.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CoreError, Result};
#[allow(unused_imports)] // false positive: unstable inherent f64 methods shadow the lint
use crate::math::{sigmoid, softplus, F64Ext, LN_2PI};
use crate::models::linalg::Matrix;
use crate::models::VARIANCE_FLOOR;
use crate::numerics::{adam_step, log_mean_exp, AdamConfig, OptimizerState};
use crate::rng::{standard_normal, uniform, ChaCha8Rng, SeedableRng};

/// Decoder log-sigma outputs are clamped here so a collapsing variance
/// head cannot overflow `exp(-2 log_sigma)` on a memorized observation.
fn floor_logsig(ls: f64) -> f64 {
    let min = 0.5 * VARIANCE_FLOOR.ln();
    ls.max(min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LikelihoodKind {
    /// Sigmoid-squashed decoder output per dimension; valid for data in
    /// `[0, 1]`.
    Bernoulli,
    /// Separate mean and log-sigma decoder heads per dimension.
    DiagonalGaussian,
    /// Mean head plus one learned scalar log-variance.
    IsotropicGaussian,
    /// Mean head with a fixed isotropic observation variance. Pinning the
    /// variance gives the reconstruction term a constant weight, which
    /// keeps training stable and the importance-sampled marginal
    /// well-conditioned even when the decoder memorizes observations.
    FixedGaussian { sigma2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeConfig {
    pub latent_dim: usize,
    /// Encoder hidden widths; the decoder mirrors them in reverse.
    pub hidden: Vec<usize>,
    pub likelihood: LikelihoodKind,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Importance samples used when the model is asked for `log p(x)`.
    pub importance_samples: usize,
}

impl VaeConfig {
    pub fn new(latent_dim: usize, hidden: Vec<usize>, likelihood: LikelihoodKind) -> VaeConfig {
        VaeConfig {
            latent_dim,
            hidden,
            likelihood,
            epochs: 50,
            learning_rate: 1e-3,
            batch_size: 64,
            importance_samples: 64,
        }
    }
}

/// Affine layer `y = W x + b` with `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    fn init(out: usize, inp: usize, rng: &mut ChaCha8Rng) -> Dense {
        // Uniform in +-1/sqrt(fan_in).
        let bound = 1.0 / (inp as f64).sqrt();
        let data = (0..out * inp)
            .map(|_| (2.0 * uniform(rng) - 1.0) * bound)
            .collect();
        Dense {
            w: Matrix::from_data(out, inp, data).expect("sized by construction"),
            b: alloc::vec![0.0; out],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.b.clone();
        for (r, yr) in y.iter_mut().enumerate() {
            *yr += self.w.row(r).iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        }
        y
    }

    fn param_count(&self) -> usize {
        self.w.data.len() + self.b.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeModel {
    pub config: VaeConfig,
    pub input_dim: usize,
    enc_hidden: Vec<Dense>,
    enc_mu: Dense,
    enc_logsig: Dense,
    dec_hidden: Vec<Dense>,
    dec_mu: Dense,
    dec_logsig: Option<Dense>,
    /// Log of the scalar likelihood variance (isotropic Gaussian only).
    log_gamma: Option<f64>,
}

/// Forward-pass caches for one MLP stack: layer inputs and preactivations.
struct StackTrace {
    inputs: Vec<Vec<f64>>,
    pres: Vec<Vec<f64>>,
    output: Vec<f64>,
}

fn stack_forward(layers: &[Dense], x: &[f64]) -> StackTrace {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pres = Vec::with_capacity(layers.len());
    let mut cur = x.to_vec();
    for layer in layers {
        inputs.push(cur.clone());
        let pre = layer.forward(&cur);
        cur = pre.iter().map(|v| v.max(0.0)).collect();
        pres.push(pre);
    }
    StackTrace {
        inputs,
        pres,
        output: cur,
    }
}

/// Backpropagate `d_out` through the ReLU stack, accumulating layer
/// gradients into `grads` (same layout as `layers`). Returns the gradient
/// with respect to the stack input.
fn stack_backward(
    layers: &[Dense],
    trace: &StackTrace,
    mut d_out: Vec<f64>,
    grads: &mut [Dense],
) -> Vec<f64> {
    for idx in (0..layers.len()).rev() {
        // Through the ReLU.
        for (d, pre) in d_out.iter_mut().zip(&trace.pres[idx]) {
            if *pre <= 0.0 {
                *d = 0.0;
            }
        }
        let layer = &layers[idx];
        let input = &trace.inputs[idx];
        let g = &mut grads[idx];
        let mut d_in = alloc::vec![0.0; input.len()];
        for r in 0..layer.w.rows {
            g.b[r] += d_out[r];
            for c in 0..layer.w.cols {
                g.w.data[r * layer.w.cols + c] += d_out[r] * input[c];
                d_in[c] += layer.w.get(r, c) * d_out[r];
            }
        }
        d_out = d_in;
    }
    d_out
}

fn dense_backward(layer: &Dense, input: &[f64], d_out: &[f64], grad: &mut Dense) -> Vec<f64> {
    let mut d_in = alloc::vec![0.0; input.len()];
    for r in 0..layer.w.rows {
        grad.b[r] += d_out[r];
        for c in 0..layer.w.cols {
            grad.w.data[r * layer.w.cols + c] += d_out[r] * input[c];
            d_in[c] += layer.w.get(r, c) * d_out[r];
        }
    }
    d_in
}

impl VaeModel {
    /// Seeded initialization; weights uniform in `+-1/sqrt(fan_in)`, biases
    /// zero, `log_gamma` zero.
    pub fn init(input_dim: usize, config: VaeConfig, seed: u64) -> VaeModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.latent_dim;
        let mut enc_hidden = Vec::new();
        let mut prev = input_dim;
        for &width in &config.hidden {
            enc_hidden.push(Dense::init(width, prev, &mut rng));
            prev = width;
        }
        let enc_mu = Dense::init(d, prev, &mut rng);
        let enc_logsig = Dense::init(d, prev, &mut rng);

        let mut dec_hidden = Vec::new();
        let mut prev = d;
        for &width in config.hidden.iter().rev() {
            dec_hidden.push(Dense::init(width, prev, &mut rng));
            prev = width;
        }
        let dec_mu = Dense::init(input_dim, prev, &mut rng);
        let dec_logsig = match config.likelihood {
            LikelihoodKind::DiagonalGaussian => Some(Dense::init(input_dim, prev, &mut rng)),
            _ => None,
        };
        let log_gamma = match config.likelihood {
            LikelihoodKind::IsotropicGaussian => Some(0.0),
            _ => None,
        };
        VaeModel {
            config,
            input_dim,
            enc_hidden,
            enc_mu,
            enc_logsig,
            dec_hidden,
            dec_mu,
            dec_logsig,
            log_gamma,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    /// Encoder pass: posterior mean and log standard deviation.
    pub fn encode(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let trace = stack_forward(&self.enc_hidden, x);
        (
            self.enc_mu.forward(&trace.output),
            self.enc_logsig.forward(&trace.output),
        )
    }

    /// Decoder pass: likelihood head outputs (raw, before any squashing).
    fn decode_raw(&self, z: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
        let trace = stack_forward(&self.dec_hidden, z);
        let mu = self.dec_mu.forward(&trace.output);
        let ls = self.dec_logsig.as_ref().map(|l| l.forward(&trace.output));
        (mu, ls)
    }

    /// `log p(x | z)` under the configured likelihood.
    pub fn decoder_log_likelihood(&self, x: &[f64], z: &[f64]) -> f64 {
        let (head, ls) = self.decode_raw(z);
        self.likelihood_logp(x, &head, ls.as_deref())
    }

    fn likelihood_logp(&self, x: &[f64], head: &[f64], ls: Option<&[f64]>) -> f64 {
        match self.config.likelihood {
            LikelihoodKind::Bernoulli => x
                .iter()
                .zip(head)
                .map(|(x, a)| x * a - softplus(*a))
                .sum(),
            LikelihoodKind::DiagonalGaussian => {
                let ls = ls.expect("diagonal Gaussian has a log-sigma head");
                x.iter()
                    .zip(head)
                    .zip(ls)
                    .map(|((x, m), ls)| {
                        let ls = floor_logsig(*ls);
                        let inv_var = (-2.0 * ls).exp();
                        -0.5 * LN_2PI - ls - 0.5 * (x - m) * (x - m) * inv_var
                    })
                    .sum()
            }
            LikelihoodKind::IsotropicGaussian => {
                let lg = self.log_gamma.expect("isotropic Gaussian has log_gamma");
                let lg = lg.max(VARIANCE_FLOOR.ln());
                let gamma = lg.exp();
                let sq: f64 = x.iter().zip(head).map(|(x, m)| (x - m) * (x - m)).sum();
                -0.5 * self.input_dim as f64 * (LN_2PI + lg) - sq / (2.0 * gamma)
            }
            LikelihoodKind::FixedGaussian { sigma2 } => {
                let gamma = sigma2.max(VARIANCE_FLOOR);
                let sq: f64 = x.iter().zip(head).map(|(x, m)| (x - m) * (x - m)).sum();
                -0.5 * self.input_dim as f64 * (LN_2PI + gamma.ln()) - sq / (2.0 * gamma)
            }
        }
    }

    /// Closed-form `KL(q(z|x) || N(0, I))` from encoder outputs.
    pub fn kl_closed_form(mu: &[f64], logsig: &[f64]) -> f64 {
        mu.iter()
            .zip(logsig)
            .map(|(m, ls)| {
                let s2 = (2.0 * ls).exp();
                0.5 * (s2 + m * m - 1.0 - 2.0 * ls)
            })
            .sum()
    }

    /// ELBO with a frozen noise vector: `-KL + log p(x | mu + sigma * eps)`.
    pub fn elbo_with_noise(&self, x: &[f64], eps: &[f64]) -> f64 {
        let (mu, logsig) = self.encode(x);
        let z: Vec<f64> = mu
            .iter()
            .zip(&logsig)
            .zip(eps)
            .map(|((m, ls), e)| m + ls.exp() * e)
            .collect();
        self.decoder_log_likelihood(x, &z) - Self::kl_closed_form(&mu, &logsig)
    }

    /// Monte-Carlo ELBO: closed-form KL plus the reconstruction expectation
    /// averaged over `mc_samples` reparameterized draws.
    pub fn elbo_estimate(&self, x: &[f64], mc_samples: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
        self.check_dim(x)?;
        if mc_samples == 0 {
            return Err(CoreError::InvalidArgument("mc_samples must be >= 1".into()));
        }
        let (mu, logsig) = self.encode(x);
        let kl = Self::kl_closed_form(&mu, &logsig);
        let mut recon = 0.0;
        for _ in 0..mc_samples {
            let z: Vec<f64> = mu
                .iter()
                .zip(&logsig)
                .map(|(m, ls)| m + ls.exp() * standard_normal(rng))
                .collect();
            recon += self.decoder_log_likelihood(x, &z);
        }
        Ok(recon / mc_samples as f64 - kl)
    }

    /// Importance-sampled `log p(x)`:
    /// `log mean_l exp(log p(x|z_l) + log p(z_l) - log q(z_l|x))` with
    /// `z_l ~ q(z|x)`, computed in log space.
    pub fn importance_log_marginal(
        &self,
        x: &[f64],
        n_samples: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        self.check_dim(x)?;
        if n_samples == 0 {
            return Err(CoreError::InvalidArgument("need N >= 1 samples".into()));
        }
        let (mu, logsig) = self.encode(x);
        let d = mu.len() as f64;
        let mut weights = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let eps: Vec<f64> = (0..mu.len()).map(|_| standard_normal(rng)).collect();
            let z: Vec<f64> = mu
                .iter()
                .zip(&logsig)
                .zip(&eps)
                .map(|((m, ls), e)| m + ls.exp() * e)
                .collect();
            let log_prior = -0.5 * (d * LN_2PI + z.iter().map(|v| v * v).sum::<f64>());
            let log_q = -0.5 * (d * LN_2PI + eps.iter().map(|v| v * v).sum::<f64>())
                - logsig.iter().sum::<f64>();
            weights.push(self.decoder_log_likelihood(x, &z) + log_prior - log_q);
        }
        log_mean_exp(&weights)
    }

    /// Draw from the generative model: `z ~ N(0, I)`, then the decoder
    /// likelihood.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let z: Vec<f64> = (0..self.config.latent_dim)
            .map(|_| standard_normal(rng))
            .collect();
        let (head, ls) = self.decode_raw(&z);
        match self.config.likelihood {
            LikelihoodKind::Bernoulli => head
                .iter()
                .map(|a| f64::from(uniform(rng) < sigmoid(*a)))
                .collect(),
            LikelihoodKind::DiagonalGaussian => {
                let ls = ls.expect("diagonal Gaussian head");
                head.iter()
                    .zip(&ls)
                    .map(|(m, ls)| m + floor_logsig(*ls).exp() * standard_normal(rng))
                    .collect()
            }
            LikelihoodKind::IsotropicGaussian => {
                let lg = self.log_gamma.expect("log_gamma").max(VARIANCE_FLOOR.ln());
                let sd = (0.5 * lg).exp();
                head.iter().map(|m| m + sd * standard_normal(rng)).collect()
            }
            LikelihoodKind::FixedGaussian { sigma2 } => {
                let sd = sigma2.max(VARIANCE_FLOOR).sqrt();
                head.iter().map(|m| m + sd * standard_normal(rng)).collect()
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let mut count = 0;
        for l in self.enc_hidden.iter().chain(&self.dec_hidden) {
            count += l.param_count();
        }
        count += self.enc_mu.param_count() + self.enc_logsig.param_count();
        count += self.dec_mu.param_count();
        if let Some(l) = &self.dec_logsig {
            count += l.param_count();
        }
        if self.log_gamma.is_some() {
            count += 1;
        }
        count
    }

    /// Flatten all parameters into one vector (fixed layer order).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        let push = |l: &Dense, out: &mut Vec<f64>| {
            out.extend_from_slice(&l.w.data);
            out.extend_from_slice(&l.b);
        };
        for l in &self.enc_hidden {
            push(l, &mut out);
        }
        push(&self.enc_mu, &mut out);
        push(&self.enc_logsig, &mut out);
        for l in &self.dec_hidden {
            push(l, &mut out);
        }
        push(&self.dec_mu, &mut out);
        if let Some(l) = &self.dec_logsig {
            push(l, &mut out);
        }
        if let Some(lg) = self.log_gamma {
            out.push(lg);
        }
        out
    }

    /// Inverse of [`VaeModel::params_flat`].
    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(CoreError::DimensionMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut cursor = 0;
        let pull = |l: &mut Dense, cursor: &mut usize| {
            let nw = l.w.data.len();
            l.w.data.copy_from_slice(&flat[*cursor..*cursor + nw]);
            *cursor += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[*cursor..*cursor + nb]);
            *cursor += nb;
        };
        for l in &mut self.enc_hidden {
            pull(l, &mut cursor);
        }
        pull(&mut self.enc_mu, &mut cursor);
        pull(&mut self.enc_logsig, &mut cursor);
        for l in &mut self.dec_hidden {
            pull(l, &mut cursor);
        }
        pull(&mut self.dec_mu, &mut cursor);
        if let Some(l) = &mut self.dec_logsig {
            pull(l, &mut cursor);
        }
        if let Some(lg) = &mut self.log_gamma {
            *lg = flat[cursor];
        }
        Ok(())
    }

    fn zero_grads(&self) -> VaeGrads {
        let zero_like = |l: &Dense| Dense {
            w: Matrix::zeros(l.w.rows, l.w.cols),
            b: alloc::vec![0.0; l.b.len()],
        };
        VaeGrads {
            enc_hidden: self.enc_hidden.iter().map(zero_like).collect(),
            enc_mu: zero_like(&self.enc_mu),
            enc_logsig: zero_like(&self.enc_logsig),
            dec_hidden: self.dec_hidden.iter().map(zero_like).collect(),
            dec_mu: zero_like(&self.dec_mu),
            dec_logsig: self.dec_logsig.as_ref().map(zero_like),
            log_gamma: self.log_gamma.map(|_| 0.0),
        }
    }

    /// ELBO and its ascent gradient for one observation and one frozen
    /// noise vector, accumulated into `grads`.
    fn elbo_backward(&self, x: &[f64], eps: &[f64], grads: &mut VaeGrads) -> f64 {
        // Forward.
        let enc_trace = stack_forward(&self.enc_hidden, x);
        let mu = self.enc_mu.forward(&enc_trace.output);
        let logsig = self.enc_logsig.forward(&enc_trace.output);
        let sig: Vec<f64> = logsig.iter().map(|ls| ls.exp()).collect();
        let z: Vec<f64> = mu
            .iter()
            .zip(&sig)
            .zip(eps)
            .map(|((m, s), e)| m + s * e)
            .collect();
        let dec_trace = stack_forward(&self.dec_hidden, &z);
        let head = self.dec_mu.forward(&dec_trace.output);
        let head_ls = self.dec_logsig.as_ref().map(|l| l.forward(&dec_trace.output));

        let recon = self.likelihood_logp(x, &head, head_ls.as_deref());
        let kl = Self::kl_closed_form(&mu, &logsig);
        let elbo = recon - kl;

        // Backward pass on the likelihood heads (ascent direction).
        let (d_head, d_head_ls, d_log_gamma) = match self.config.likelihood {
            LikelihoodKind::Bernoulli => {
                let d: Vec<f64> = x
                    .iter()
                    .zip(&head)
                    .map(|(x, a)| x - sigmoid(*a))
                    .collect();
                (d, None, None)
            }
            LikelihoodKind::DiagonalGaussian => {
                let ls = head_ls.as_ref().expect("diagonal head");
                let mut dm = Vec::with_capacity(head.len());
                let mut dls = Vec::with_capacity(head.len());
                for ((x, m), ls) in x.iter().zip(&head).zip(ls) {
                    let clamped = floor_logsig(*ls);
                    let inv_var = (-2.0 * clamped).exp();
                    dm.push((x - m) * inv_var);
                    // Zero below the floor: the clamp makes logp locally
                    // constant in the raw head output.
                    dls.push(if *ls < clamped {
                        0.0
                    } else {
                        -1.0 + (x - m) * (x - m) * inv_var
                    });
                }
                (dm, Some(dls), None)
            }
            LikelihoodKind::IsotropicGaussian => {
                let lg = self.log_gamma.expect("log_gamma");
                let clamped = lg.max(VARIANCE_FLOOR.ln());
                let gamma = clamped.exp();
                let dm: Vec<f64> = x.iter().zip(&head).map(|(x, m)| (x - m) / gamma).collect();
                let sq: f64 = x.iter().zip(&head).map(|(x, m)| (x - m) * (x - m)).sum();
                let dlg = if lg < clamped {
                    0.0
                } else {
                    -0.5 * self.input_dim as f64 + sq / (2.0 * gamma)
                };
                (dm, None, Some(dlg))
            }
            LikelihoodKind::FixedGaussian { sigma2 } => {
                let gamma = sigma2.max(VARIANCE_FLOOR);
                let dm: Vec<f64> = x.iter().zip(&head).map(|(x, m)| (x - m) / gamma).collect();
                (dm, None, None)
            }
        };
        if let Some(dlg) = d_log_gamma {
            *grads.log_gamma.as_mut().expect("log_gamma grad") += dlg;
        }

        // Heads back to the decoder stack output, then to z.
        let mut d_dec_out = dense_backward(&self.dec_mu, &dec_trace.output, &d_head, &mut grads.dec_mu);
        if let Some(dls) = &d_head_ls {
            let extra = dense_backward(
                self.dec_logsig.as_ref().expect("diagonal head"),
                &dec_trace.output,
                dls,
                grads.dec_logsig.as_mut().expect("diagonal head grad"),
            );
            for (a, b) in d_dec_out.iter_mut().zip(extra) {
                *a += b;
            }
        }
        let d_z = stack_backward(&self.dec_hidden, &dec_trace, d_dec_out, &mut grads.dec_hidden);

        // Reparameterization and KL terms into the encoder heads.
        let d_mu: Vec<f64> = d_z.iter().zip(&mu).map(|(dz, m)| dz - m).collect();
        let d_logsig: Vec<f64> = d_z
            .iter()
            .zip(&sig)
            .zip(eps)
            .zip(&logsig)
            .map(|(((dz, s), e), _ls)| dz * s * e + (1.0 - s * s))
            .collect();

        let mut d_enc_out = dense_backward(&self.enc_mu, &enc_trace.output, &d_mu, &mut grads.enc_mu);
        let extra = dense_backward(
            &self.enc_logsig,
            &enc_trace.output,
            &d_logsig,
            &mut grads.enc_logsig,
        );
        for (a, b) in d_enc_out.iter_mut().zip(extra) {
            *a += b;
        }
        stack_backward(&self.enc_hidden, &enc_trace, d_enc_out, &mut grads.enc_hidden);

        elbo
    }

    /// Ascent gradient of the frozen-noise ELBO, flattened in the
    /// [`VaeModel::params_flat`] order. Used by the gradient check.
    pub fn elbo_gradient(&self, x: &[f64], eps: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(x)?;
        if eps.len() != self.config.latent_dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.config.latent_dim,
                got: eps.len(),
            });
        }
        let mut grads = self.zero_grads();
        let elbo = self.elbo_backward(x, eps, &mut grads);
        Ok((elbo, grads.flatten()))
    }
}

struct VaeGrads {
    enc_hidden: Vec<Dense>,
    enc_mu: Dense,
    enc_logsig: Dense,
    dec_hidden: Vec<Dense>,
    dec_mu: Dense,
    dec_logsig: Option<Dense>,
    log_gamma: Option<f64>,
}

impl VaeGrads {
    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let push = |l: &Dense, out: &mut Vec<f64>| {
            out.extend_from_slice(&l.w.data);
            out.extend_from_slice(&l.b);
        };
        for l in &self.enc_hidden {
            push(l, &mut out);
        }
        push(&self.enc_mu, &mut out);
        push(&self.enc_logsig, &mut out);
        for l in &self.dec_hidden {
            push(l, &mut out);
        }
        push(&self.dec_mu, &mut out);
        if let Some(l) = &self.dec_logsig {
            push(l, &mut out);
        }
        if let Some(lg) = self.log_gamma {
            out.push(lg);
        }
        out
    }
}

/// Train for `config.epochs` epochs of mini-batched Adam ascent on the
/// single-sample reparameterized ELBO. Zero epochs returns the seeded
/// initialization unchanged.
///
/// The step size follows a cosine schedule from `learning_rate` down to 5%
/// of it: the early high-rate phase finds the sharp optima, the decayed
/// tail lets every fit settle instead of harvesting mid-oscillation, which
/// keeps refitted models consistent with each other.
pub fn vae_train(data: &Dataset, config: &VaeConfig, seed: u64) -> Result<VaeModel> {
    let mut snapshots = vae_train_checkpoints(data, config, seed, &[config.epochs])?;
    Ok(snapshots.pop().expect("one checkpoint requested"))
}

/// Train once, snapshotting the model after each listed epoch (0 means the
/// initialization). `checkpoints` must be strictly increasing and end at or
/// before `config.epochs`.
pub fn vae_train_checkpoints(
    data: &Dataset,
    config: &VaeConfig,
    seed: u64,
    checkpoints: &[usize],
) -> Result<Vec<VaeModel>> {
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidArgument(
            "checkpoints must be strictly increasing".into(),
        ));
    }
    if checkpoints.last().is_some_and(|&last| last > config.epochs) {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "checkpoint beyond total epochs {}",
            config.epochs
        )));
    }
    let n = data.n();
    let batch_size = config.batch_size.min(n).max(1);
    let mut model = VaeModel::init(data.dim(), config.clone(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::mix_in(seed, 0x7472_6169));
    let mut opt = OptimizerState::new(
        model.param_count(),
        AdamConfig::with_step_size(config.learning_rate),
    );

    let mut snapshots = Vec::with_capacity(checkpoints.len());
    if checkpoints.first() == Some(&0) {
        snapshots.push(model.clone());
    }
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=config.epochs {
        let t = (epoch - 1) as f64 / config.epochs as f64;
        let cosine = 0.5 * (1.0 + (core::f64::consts::PI * t).cos());
        opt.set_step_size(config.learning_rate * (0.05 + 0.95 * cosine));
        crate::rng::shuffle(&mut rng, &mut order);
        for batch in order.chunks(batch_size) {
            let mut grads = model.zero_grads();
            let mut batch_elbo = 0.0;
            for &i in batch {
                let eps: Vec<f64> = (0..config.latent_dim)
                    .map(|_| standard_normal(&mut rng))
                    .collect();
                batch_elbo += model.elbo_backward(data.row(i), &eps, &mut grads);
            }
            if !batch_elbo.is_finite() {
                return Err(CoreError::FitFailed(alloc::format!(
                    "non-finite ELBO at epoch {epoch} (seed {seed})"
                )));
            }
            // Adam minimizes, so feed the negated mean ascent gradient.
            let scale = -1.0 / batch.len() as f64;
            let mut flat = grads.flatten();
            flat.iter_mut().for_each(|g| *g *= scale);
            if flat.iter().any(|g| !g.is_finite()) {
                return Err(CoreError::FitFailed(alloc::format!(
                    "non-finite gradient at epoch {epoch} (seed {seed})"
                )));
            }
            let mut params = model.params_flat();
            adam_step(&mut params, &flat, &mut opt)?;
            model.set_params_flat(&params)?;
        }
        if checkpoints.contains(&epoch) {
            snapshots.push(model.clone());
        }
    }
    Ok(snapshots)
}
