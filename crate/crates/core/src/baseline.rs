//! Nonconvex baselines: minibatch SGD on the regularized two-layer ReLU cost
//! and full-batch gradient descent on the factored linear CNN.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cnn::PatchSet;
use crate::network::TwoLayerReLUNet;
use crate::numerics::vector::dot;
use crate::program::LossKind;
use crate::solvers::elapsed_ms;
use crate::{Error, Matrix, Result};

/// `φ'(0)`: the ReLU subgradient used at the kink.
pub const RELU_SUBGRADIENT_AT_ZERO: f64 = 0.0;

/// Objective above which a run counts as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Derivative of `(t)₊`, with [`RELU_SUBGRADIENT_AT_ZERO`] at `t = 0`.
pub fn relu_subgradient(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        0.0
    } else {
        RELU_SUBGRADIENT_AT_ZERO
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub beta: f64,
    /// Hidden width.
    pub m: usize,
    /// Standard deviation of the Gaussian initialization.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            batch_size: 5,
            epochs: 2000,
            seed: 0,
            loss: LossKind::Squared,
            beta: 1e-3,
            m: 8,
            init_scale: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be finite and ≥ 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::InvalidArgument(format!(
                "batch_size must be in 1..={n}, got {}",
                self.batch_size
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("hidden width m must be ≥ 1".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be finite and ≥ 0, got {}", self.beta)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub epoch: usize,
    /// Full-dataset regularized objective.
    pub objective: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub entries: Vec<TraceEntry>,
    pub diverged: bool,
}

impl TrainTrace {
    pub fn final_objective(&self) -> f64 {
        self.entries.last().map_or(f64::NAN, |e| e.objective)
    }

    /// `epoch,objective,wall_ms` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,objective,wall_ms\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{:.16e},{:.16e}", e.epoch, e.objective, e.wall_ms);
        }
        s
    }
}

/// `U` and `α` with i.i.d. `N(0, scale²)` entries; `U` is drawn neuron by
/// neuron, then `α`.
pub fn init_gaussian(d: usize, m: usize, seed: u64, scale: f64) -> Result<TwoLayerReLUNet> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("initialization scale must be positive, got {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
    let neurons: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| draw()).collect()).collect();
    let alpha: Vec<f64> = (0..m).map(|_| draw()).collect();
    TwoLayerReLUNet::from_neurons(d, neurons, alpha)
}

/// Gradient (with respect to `U` per neuron and `α`) of
/// `(n/|B|) Σ_{i∈B} ℓ_i + (β/2)(‖U‖² + ‖α‖²)`, an unbiased estimate of the
/// full regularized cost's gradient.
pub fn minibatch_gradient(
    net: &TwoLayerReLUNet,
    x: &Matrix,
    y: &[f64],
    batch: &[usize],
    beta: f64,
    loss: LossKind,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = net.width();
    let d = net.input_dim();
    let scale = x.rows() as f64 / batch.len() as f64;
    let mut gu: Vec<Vec<f64>> = net.neurons().iter().map(|u| u.iter().map(|t| beta * t).collect()).collect();
    let mut ga: Vec<f64> = net.alpha().iter().map(|a| beta * a).collect();
    let mut pre = vec![0.0; m];
    for &i in batch {
        let xi = x.row(i);
        let mut yhat = 0.0;
        for (j, u) in net.neurons().iter().enumerate() {
            pre[j] = dot(xi, u);
            yhat += pre[j].max(0.0) * net.alpha()[j];
        }
        let dl = match loss {
            LossKind::Squared => yhat - y[i],
            // subgradient 0 at the hinge kink
            LossKind::Hinge => {
                if y[i] * yhat < 1.0 {
                    -y[i]
                } else {
                    0.0
                }
            }
        };
        if dl == 0.0 {
            continue;
        }
        for j in 0..m {
            ga[j] += scale * dl * pre[j].max(0.0);
            let s = relu_subgradient(pre[j]);
            if s != 0.0 {
                let c = scale * dl * net.alpha()[j] * s;
                for k in 0..d {
                    gu[j][k] += c * xi[k];
                }
            }
        }
    }
    (gu, ga)
}

/// [`train_sgd_from`] starting at [`init_gaussian`]`(d, m, seed, init_scale)`.
pub fn train_sgd(x: &Matrix, y: &[f64], cfg: &TrainConfig) -> Result<(TwoLayerReLUNet, TrainTrace)> {
    cfg.validate(x.rows())?;
    let net = init_gaussian(x.cols(), cfg.m, cfg.seed, cfg.init_scale)?;
    train_sgd_from(net, x, y, cfg)
}

/// Plain constant-step minibatch SGD with a seeded shuffle per epoch. The
/// trace holds the full-dataset objective before training and after every
/// epoch; a run stops early once the objective exceeds
/// [`DIVERGENCE_THRESHOLD`] or is not finite.
pub fn train_sgd_from(
    mut net: TwoLayerReLUNet,
    x: &Matrix,
    y: &[f64],
    cfg: &TrainConfig,
) -> Result<(TwoLayerReLUNet, TrainTrace)> {
    cfg.validate(x.rows())?;
    if y.len() != x.rows() {
        return Err(Error::Shape(format!("{} samples but {} labels", x.rows(), y.len())));
    }
    if net.input_dim() != x.cols() {
        return Err(Error::Shape(format!(
            "network expects {} inputs, data has {} columns",
            net.input_dim(),
            x.cols()
        )));
    }
    cfg.loss.check_labels(y)?;
    let start = Instant::now();
    // a stream independent of the initialization's
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut trace = TrainTrace::default();
    let record = |net: &TwoLayerReLUNet, epoch: usize, trace: &mut TrainTrace| -> Result<bool> {
        let obj = net.nonconvex_cost(x, y, cfg.beta, cfg.loss)?;
        trace.entries.push(TraceEntry {
            epoch,
            objective: obj,
            wall_ms: elapsed_ms(start),
        });
        Ok(!obj.is_finite() || obj > DIVERGENCE_THRESHOLD)
    };
    if record(&net, 0, &mut trace)? {
        trace.diverged = true;
        return Ok((net, trace));
    }
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (gu, ga) = minibatch_gradient(&net, x, y, batch, cfg.beta, cfg.loss);
            for (u, g) in net.neurons_mut().iter_mut().zip(&gu) {
                for (t, gt) in u.iter_mut().zip(g) {
                    *t -= cfg.learning_rate * gt;
                }
            }
            for (a, g) in net.alpha_mut().iter_mut().zip(&ga) {
                *a -= cfg.learning_rate * g;
            }
        }
        if record(&net, epoch, &mut trace)? {
            trace.diverged = true;
            break;
        }
    }
    Ok((net, trace))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearCnnConfig {
    /// Number of filters.
    pub m: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for LinearCnnConfig {
    fn default() -> Self {
        LinearCnnConfig {
            m: 4,
            learning_rate: 1e-2,
            iterations: 20_000,
            seed: 0,
            init_scale: 0.1,
        }
    }
}

/// Factored linear CNN `f(x) = Σ_j Σ_k (x_kᵀ u_j) w_{jk}` trained by
/// full-batch gradient descent on
/// `½‖Σ_k X_k (U Wᵀ)_k − y‖² + (β/2)(‖U‖_F² + ‖W‖_F²)`.
/// Returns `U Wᵀ` (`d × K`) and the objective after every iteration.
pub fn train_linear_cnn_gd(
    ps: &PatchSet,
    y: &[f64],
    beta: f64,
    cfg: &LinearCnnConfig,
) -> Result<(Matrix, Vec<f64>)> {
    if cfg.m == 0 {
        return Err(Error::InvalidArgument("m must be ≥ 1".into()));
    }
    if y.len() != ps.n() {
        return Err(Error::Shape(format!("{} samples but {} targets", ps.n(), y.len())));
    }
    if !(cfg.init_scale > 0.0) {
        return Err(Error::InvalidArgument(format!("init_scale must be positive, got {}", cfg.init_scale)));
    }
    let (d, k) = (ps.d(), ps.k());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw = |r: usize, c: usize| {
        Matrix::from_fn(r, c, |_, _| cfg.init_scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
    };
    let mut u = draw(d, cfg.m);
    let mut w = draw(k, cfg.m);
    let cost = |u: &Matrix, w: &Matrix| -> Result<(f64, Vec<f64>)> {
        let z = u.matmul(&w.transpose())?;
        let res: Vec<f64> = ps.predict(&z)?.iter().zip(y).map(|(a, b)| a - b).collect();
        let fro = u.frobenius_norm().powi(2) + w.frobenius_norm().powi(2);
        Ok((0.5 * res.iter().map(|r| r * r).sum::<f64>() + 0.5 * beta * fro, res))
    };
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let (mut f, mut res) = cost(&u, &w)?;
    trace.push(f);
    for _ in 0..cfg.iterations {
        let g = ps.adjoint(&res)?;
        let gu = g.matmul(&w)?.add(&u.scaled(beta))?;
        let gw = g.transpose().matmul(&u)?.add(&w.scaled(beta))?;
        u = u.sub(&gu.scaled(cfg.learning_rate))?;
        w = w.sub(&gw.scaled(cfg.learning_rate))?;
        (f, res) = cost(&u, &w)?;
        trace.push(f);
        if !f.is_finite() || f > DIVERGENCE_THRESHOLD {
            break;
        }
    }
    Ok((u.matmul(&w.transpose())?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_convention() {
        assert_eq!(relu_subgradient(-1.0), 0.0);
        assert_eq!(relu_subgradient(0.0), 0.0);
        assert_eq!(relu_subgradient(2.0), 1.0);
    }

    #[test]
    fn init_is_seeded_and_checked() {
        let a = init_gaussian(3, 4, 7, 1.0).unwrap();
        assert_eq!(a, init_gaussian(3, 4, 7, 1.0).unwrap());
        assert_ne!(a, init_gaussian(3, 4, 8, 1.0).unwrap());
        assert!(init_gaussian(3, 4, 7, 0.0).is_err());
        let tiny = init_gaussian(1, 1, 0, 1.0).unwrap();
        assert_eq!(tiny.neurons().len() + tiny.alpha().len(), 2);
    }

    #[test]
    fn zero_rate_keeps_trace_constant() {
        let x = Matrix::from_rows(&[[-2.0, 1.0], [-1.0, 1.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0]]).unwrap();
        let y = [1.0, -1.0, 1.0, 1.0, -1.0];
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 5,
            ..TrainConfig::default()
        };
        let (_, trace) = train_sgd(&x, &y, &cfg).unwrap();
        assert_eq!(trace.entries.len(), 6);
        assert!(trace.entries.iter().all(|e| e.objective == trace.entries[0].objective));
        assert!(trace.to_csv().starts_with("epoch,objective,wall_ms\n0,"));
    }
}
