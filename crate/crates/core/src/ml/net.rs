use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Smooth saturating nonlinearity used on hidden layers.
    Tanh,
    Identity,
}

impl Activation {
    fn apply<F: Scalar>(&self, v: F) -> F {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output<F: Scalar>(&self, out: F) -> F {
        match self {
            Activation::Tanh => F::one() - out * out,
            Activation::Identity => F::one(),
        }
    }
}

/// Fully connected feedforward network with the chosen nonlinearity on
/// hidden layers and an identity output layer. Weights are stored row-major
/// as `(outputs x inputs)` per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct DenseNet<F: Scalar> {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<F>>,
    biases: Vec<Vec<F>>,
    hidden_activation: Activation,
}

/// Adam on mean-square reconstruction error. The learning rate starts at
/// `lr0` and is multiplied by `lr_decay` every `decay_every` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_size: 50,
            lr0: 0.002,
            lr_decay: 0.8,
            decay_every: 50,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Learning rate for a zero-based epoch index under the step schedule.
pub fn learning_rate(cfg: &AdamTrainConfig, epoch: usize) -> f64 {
    cfg.lr0 * cfg.lr_decay.powi((epoch / cfg.decay_every) as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Full-data reconstruction MSE before training.
    pub initial_mse: f64,
    /// Full-data reconstruction MSE after every epoch.
    pub epoch_mse: Vec<f64>,
}

impl TrainReport {
    pub fn final_mse(&self) -> f64 {
        *self.epoch_mse.last().unwrap_or(&self.initial_mse)
    }
}

impl<F: Scalar> DenseNet<F> {
    /// Xavier-uniform initialized network.
    pub fn new(layer_sizes: Vec<usize>, hidden_activation: Activation, seed: u64) -> Self {
        assert!(layer_sizes.len() >= 2, "need at least input and output");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| F::from_f64_lossy(rng.gen_range(-limit..limit)))
                    .collect(),
            );
            biases.push(vec![F::zero(); fan_out]);
        }
        Self {
            layer_sizes,
            weights,
            biases,
            hidden_activation,
        }
    }

    /// Hourglass reconstruction network: hidden widths are 0.8, 0.5 and 0.8
    /// of the feature count, input and output both `n_features` wide.
    pub fn hourglass(n_features: usize, seed: u64) -> Self {
        let scaled = |f: f64| ((n_features as f64 * f).round() as usize).max(1);
        Self::new(
            vec![n_features, scaled(0.8), scaled(0.5), scaled(0.8), n_features],
            Activation::Tanh,
            seed,
        )
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Layer activations, input first. The last layer is linear.
    fn forward_trace(&self, x: &[F]) -> Vec<Vec<F>> {
        let n_layers = self.weights.len();
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(x.to_vec());
        for (layer, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let input = activations.last().unwrap();
            let fan_in = self.layer_sizes[layer];
            let fan_out = self.layer_sizes[layer + 1];
            let mut out = Vec::with_capacity(fan_out);
            for o in 0..fan_out {
                let mut acc = b[o];
                let row = &w[o * fan_in..(o + 1) * fan_in];
                for (wi, xi) in row.iter().zip(input) {
                    acc = acc + *wi * *xi;
                }
                if layer != n_layers - 1 {
                    acc = self.hidden_activation.apply(acc);
                }
                out.push(acc);
            }
            activations.push(out);
        }
        activations
    }

    pub fn forward(&self, x: &[F]) -> Vec<F> {
        self.forward_trace(x).pop().unwrap()
    }

    /// Mean squared self-reconstruction error of one row.
    pub fn reconstruction_mse(&self, x: &[F]) -> F {
        let out = self.forward(x);
        let n = F::from_f64_lossy(x.len() as f64);
        out.iter()
            .zip(x)
            .fold(F::zero(), |acc, (&o, &t)| acc + (o - t) * (o - t))
            / n
    }

    /// Backpropagated gradients of the reconstruction MSE for one row,
    /// shaped like `(weights, biases)`.
    fn backprop(&self, x: &[F]) -> (Vec<Vec<F>>, Vec<Vec<F>>) {
        let activations = self.forward_trace(x);
        let n_layers = self.weights.len();
        let out = activations.last().unwrap();
        let scale = F::from_f64_lossy(2.0 / x.len() as f64);

        // Delta of the linear output layer.
        let mut delta: Vec<F> = out.iter().zip(x).map(|(&o, &t)| scale * (o - t)).collect();

        let mut grad_w: Vec<Vec<F>> = self.weights.iter().map(|w| vec![F::zero(); w.len()]).collect();
        let mut grad_b: Vec<Vec<F>> = self.biases.iter().map(|b| vec![F::zero(); b.len()]).collect();

        for layer in (0..n_layers).rev() {
            let fan_in = self.layer_sizes[layer];
            let input = &activations[layer];
            for (o, &d) in delta.iter().enumerate() {
                grad_b[layer][o] = d;
                let row = &mut grad_w[layer][o * fan_in..(o + 1) * fan_in];
                for (g, &xi) in row.iter_mut().zip(input) {
                    *g = d * xi;
                }
            }
            if layer == 0 {
                break;
            }
            // Propagate through the weights, then through the activation of
            // the previous (hidden) layer.
            let mut prev = vec![F::zero(); fan_in];
            for (o, &d) in delta.iter().enumerate() {
                let row = &self.weights[layer][o * fan_in..(o + 1) * fan_in];
                for (p, &wi) in prev.iter_mut().zip(row) {
                    *p = *p + wi * d;
                }
            }
            for (p, &a) in prev.iter_mut().zip(&activations[layer]) {
                *p = *p * self.hidden_activation.derivative_from_output(a);
            }
            delta = prev;
        }
        (grad_w, grad_b)
    }
}

/// Train the network to reproduce its inputs. Returns the per-epoch loss
/// trace; a non-finite loss aborts with a diagnostic error.
pub fn adam_train<F: Scalar>(
    net: &mut DenseNet<F>,
    data: &[Vec<F>],
    cfg: &AdamTrainConfig,
    seed: u64,
) -> Result<TrainReport, MlError> {
    if data.is_empty() {
        return Err(MlError::EmptyInput);
    }
    if data[0].len() != net.n_inputs() {
        return Err(MlError::DimensionMismatch {
            expected: net.n_inputs(),
            got: data[0].len(),
        });
    }

    let full_mse = |net: &DenseNet<F>| -> f64 {
        let sum: f64 = data
            .iter()
            .map(|row| net.reconstruction_mse(row).to_f64_lossy())
            .sum();
        sum / data.len() as f64
    };

    let mut m_w: Vec<Vec<F>> = net.weights.iter().map(|w| vec![F::zero(); w.len()]).collect();
    let mut v_w = m_w.clone();
    let mut m_b: Vec<Vec<F>> = net.biases.iter().map(|b| vec![F::zero(); b.len()]).collect();
    let mut v_b = m_b.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let initial_mse = full_mse(net);
    let mut epoch_mse = Vec::with_capacity(cfg.epochs);
    let mut step = 0u64;

    for epoch in 0..cfg.epochs {
        let lr = learning_rate(cfg, epoch);
        order.shuffle(&mut rng);

        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut batch_gw: Vec<Vec<F>> =
                net.weights.iter().map(|w| vec![F::zero(); w.len()]).collect();
            let mut batch_gb: Vec<Vec<F>> =
                net.biases.iter().map(|b| vec![F::zero(); b.len()]).collect();
            for &i in batch {
                let (gw, gb) = net.backprop(&data[i]);
                for (acc, g) in batch_gw.iter_mut().zip(&gw) {
                    for (a, &v) in acc.iter_mut().zip(g) {
                        *a = *a + v;
                    }
                }
                for (acc, g) in batch_gb.iter_mut().zip(&gb) {
                    for (a, &v) in acc.iter_mut().zip(g) {
                        *a = *a + v;
                    }
                }
            }
            let inv = F::from_f64_lossy(1.0 / batch.len() as f64);
            step += 1;

            let b1 = F::from_f64_lossy(cfg.beta1);
            let b2 = F::from_f64_lossy(cfg.beta2);
            let eps = F::from_f64_lossy(cfg.epsilon);
            let corr1 = F::from_f64_lossy(1.0 - cfg.beta1.powi(step as i32));
            let corr2 = F::from_f64_lossy(1.0 - cfg.beta2.powi(step as i32));
            let lr_f = F::from_f64_lossy(lr);

            let update = |params: &mut [F], grads: &[F], m: &mut [F], v: &mut [F]| {
                for i in 0..params.len() {
                    let g = grads[i] * inv;
                    m[i] = b1 * m[i] + (F::one() - b1) * g;
                    v[i] = b2 * v[i] + (F::one() - b2) * g * g;
                    let m_hat = m[i] / corr1;
                    let v_hat = v[i] / corr2;
                    params[i] = params[i] - lr_f * m_hat / (v_hat.sqrt() + eps);
                }
            };
            for layer in 0..net.weights.len() {
                let (gw, gb) = (&batch_gw[layer], &batch_gb[layer]);
                update(&mut net.weights[layer], gw, &mut m_w[layer], &mut v_w[layer]);
                update(&mut net.biases[layer], gb, &mut m_b[layer], &mut v_b[layer]);
            }
        }

        let mse = full_mse(net);
        if !mse.is_finite() {
            return Err(MlError::NonFiniteLoss { epoch });
        }
        epoch_mse.push(mse);
    }

    Ok(TrainReport {
        initial_mse,
        epoch_mse,
    })
}

/// Compare backpropagated gradients against central finite differences and
/// return the worst relative error over all parameters.
pub fn grad_check<F: Scalar>(net: &DenseNet<F>, x: &[F], eps: F) -> F {
    let (gw, gb) = net.backprop(x);
    let mut worst = F::zero();
    let mut probe = net.clone();
    let floor = F::from_f64_lossy(1e-6);

    let mut check = |analytic: F, read: &mut dyn FnMut(&mut DenseNet<F>) -> &mut F| {
        let original = *read(&mut probe);
        *read(&mut probe) = original + eps;
        let plus = probe.reconstruction_mse(x);
        *read(&mut probe) = original - eps;
        let minus = probe.reconstruction_mse(x);
        *read(&mut probe) = original;
        let fd = (plus - minus) / (F::from_f64_lossy(2.0) * eps);
        let denom = analytic.abs().max(fd.abs()).max(floor);
        let rel = (analytic - fd).abs() / denom;
        if rel > worst {
            worst = rel;
        }
    };

    for layer in 0..net.weights.len() {
        for i in 0..net.weights[layer].len() {
            check(gw[layer][i], &mut |n| &mut n.weights[layer][i]);
        }
        for i in 0..net.biases[layer].len() {
            check(gb[layer][i], &mut |n| &mut n.biases[layer][i]);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hourglass_rounds_hidden_sizes() {
        let net: DenseNet<f64> = DenseNet::hourglass(10, 0);
        assert_eq!(net.layer_sizes(), &[10, 8, 5, 8, 10]);
        let tiny: DenseNet<f64> = DenseNet::hourglass(2, 0);
        assert_eq!(tiny.layer_sizes(), &[2, 2, 1, 2, 2]);
    }

    #[test]
    fn output_width_always_matches_input_width() {
        for f in 2..20 {
            let net: DenseNet<f64> = DenseNet::hourglass(f, 1);
            let x = vec![0.1; f];
            assert_eq!(net.forward(&x).len(), f);
        }
    }

    #[test]
    fn learning_rate_schedule_steps_every_fifty_epochs() {
        let cfg = AdamTrainConfig::default();
        assert_eq!(learning_rate(&cfg, 0), 0.002);
        assert_eq!(learning_rate(&cfg, 49), 0.002);
        assert!((learning_rate(&cfg, 50) - 0.0016).abs() < 1e-15);
        assert!((learning_rate(&cfg, 99) - 0.0016).abs() < 1e-15);
        assert!((learning_rate(&cfg, 100) - 0.00128).abs() < 1e-15);
        assert!((learning_rate(&cfg, 149) - 0.00128).abs() < 1e-15);
    }

    #[test]
    fn a_repeated_vector_is_memorized() {
        let mut net: DenseNet<f64> = DenseNet::hourglass(5, 3);
        let data = vec![vec![0.5, -0.25, 0.1, 0.9, -0.6]; 80];
        let cfg = AdamTrainConfig {
            epochs: 120,
            ..AdamTrainConfig::default()
        };
        let report = adam_train(&mut net, &data, &cfg, 4).unwrap();
        assert!(report.final_mse() < 1e-4, "final mse {}", report.final_mse());
    }

    #[test]
    fn training_reduces_the_loss() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<Vec<f64>> = (0..300)
            .map(|_| {
                let a: f64 = rng.gen_range(-1.0..1.0);
                let b: f64 = rng.gen_range(-1.0..1.0);
                vec![a, b, a + b, a - b, a * 0.5]
            })
            .collect();
        let mut net: DenseNet<f64> = DenseNet::hourglass(5, 5);
        let report = adam_train(&mut net, &data, &AdamTrainConfig::default(), 6).unwrap();
        assert!(report.final_mse() < report.initial_mse);
        assert!(report.epoch_mse[0] <= report.initial_mse);
    }

    #[test]
    fn linear_net_gradients_are_exact() {
        let net: DenseNet<f64> = DenseNet::new(vec![4, 3, 4], Activation::Identity, 2);
        let x = vec![0.3, -0.7, 1.1, 0.2];
        let err = grad_check(&net, &x, 1e-4);
        assert!(err < 1e-9, "relative error {err}");
    }

    #[test]
    fn tanh_net_gradients_match_finite_differences() {
        let net: DenseNet<f64> = DenseNet::new(vec![5, 4, 3, 5], Activation::Tanh, 11);
        let x = vec![0.9, -0.4, 0.2, -1.3, 0.6];
        let err = grad_check(&net, &x, 1e-4);
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn doubling_eps_roughly_quadruples_truncation() {
        // Large weights make the truncation term dominate the roundoff term.
        let mut net: DenseNet<f64> = DenseNet::new(vec![3, 3, 3], Activation::Tanh, 13);
        for w in &mut net.weights {
            for v in w.iter_mut() {
                *v *= 3.0;
            }
        }
        let x = vec![0.8, -0.5, 0.9];

        let gap = |eps: f64| -> f64 {
            let (gw, _) = net.backprop(&x);
            let mut probe = net.clone();
            let mut total = 0.0;
            for layer in 0..net.weights.len() {
                for i in 0..net.weights[layer].len() {
                    let orig = probe.weights[layer][i];
                    probe.weights[layer][i] = orig + eps;
                    let plus = probe.reconstruction_mse(&x);
                    probe.weights[layer][i] = orig - eps;
                    let minus = probe.reconstruction_mse(&x);
                    probe.weights[layer][i] = orig;
                    total += ((plus - minus) / (2.0 * eps) - gw[layer][i]).abs();
                }
            }
            total
        };

        let ratio = gap(2e-3) / gap(1e-3);
        assert!((2.0..8.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn nan_loss_aborts_with_a_diagnostic() {
        let mut net: DenseNet<f64> = DenseNet::new(vec![2, 2, 2], Activation::Identity, 0);
        net.weights[0][0] = f64::NAN;
        let data = vec![vec![1.0, 2.0]; 10];
        match adam_train(&mut net, &data, &AdamTrainConfig::default(), 0) {
            Err(MlError::NonFiniteLoss { .. }) => {}
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let data = vec![vec![0.2, -0.4, 0.6], vec![-0.1, 0.3, 0.5], vec![0.9, 0.0, -0.7]];
        let build = || {
            let mut net: DenseNet<f64> = DenseNet::hourglass(3, 7);
            let cfg = AdamTrainConfig {
                epochs: 20,
                batch_size: 2,
                ..AdamTrainConfig::default()
            };
            adam_train(&mut net, &data, &cfg, 9).unwrap();
            net
        };
        assert_eq!(build(), build());
    }
}
