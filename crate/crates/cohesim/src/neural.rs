//! Minimal feedforward network with backpropagation: rectifier hidden
//! layers, linear output, inverted dropout on hidden activations, plain SGD.
//! Shared by the Q-network and the link-weight predictor.
//!
//! Everything is 64-bit and seed-deterministic: initialization and dropout
//! masks come from the net's own ChaCha stream, so identical seeds give
//! identical training trajectories.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl DenseLayer {
    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            out.push(acc);
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone)]
struct ForwardCache {
    /// Layer inputs: acts[0] is the net input, acts[i] feeds layer i.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<f64>>,
    /// Inverted-dropout masks (0 or 1/(1-p)) per hidden layer.
    masks: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct FeedForwardNet {
    pub sizes: Vec<usize>,
    pub layers: Vec<DenseLayer>,
    pub dropout: f64,
    pub seed: u64,
    rng: ChaCha12Rng,
    cache: Option<ForwardCache>,
}

/// Standard normal via Box-Muller; two uniform draws per sample keeps the
/// stream layout simple and reproducible.
pub fn gauss(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl FeedForwardNet {
    /// He-style initialization scaled by fan-in; biases start at zero.
    pub fn new(sizes: &[usize], dropout: f64, seed: u64) -> FeedForwardNet {
        assert!(sizes.len() >= 2);
        assert!((0.0..1.0).contains(&dropout));
        let mut rng = crate::workload::stream(seed, 0x6e6e5f69); // "nn_i"
        let layers = sizes
            .windows(2)
            .map(|d| {
                let (in_dim, out_dim) = (d[0], d[1]);
                let std = (2.0 / in_dim as f64).sqrt();
                let w = (0..in_dim * out_dim)
                    .map(|_| gauss(&mut rng) * std)
                    .collect();
                DenseLayer {
                    in_dim,
                    out_dim,
                    w,
                    b: vec![0.0; out_dim],
                }
            })
            .collect();
        let drop_rng = crate::workload::stream(seed, 0x6e6e5f64); // "nn_d"
        FeedForwardNet {
            sizes: sizes.to_vec(),
            layers,
            dropout,
            seed,
            rng: drop_rng,
            cache: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Affine + rectifier per hidden layer, linear output. Train mode draws
    /// dropout masks from the net's stream and retains everything backward
    /// needs; inference is pure.
    pub fn forward(&mut self, input: &[f64], mode: Mode) -> Vec<f64> {
        assert_eq!(input.len(), self.input_dim());
        let hidden_layers = self.layers.len() - 1;
        let mut cache = ForwardCache {
            acts: vec![input.to_vec()],
            pre: Vec::with_capacity(hidden_layers),
            masks: Vec::with_capacity(hidden_layers),
        };
        let mut x = input.to_vec();
        let mut z = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            layer.apply(&x, &mut z);
            if li < hidden_layers {
                if mode == Mode::Train {
                    cache.pre.push(z.clone());
                }
                let mut mask = Vec::new();
                if mode == Mode::Train && self.dropout > 0.0 {
                    let keep = 1.0 - self.dropout;
                    mask = (0..z.len())
                        .map(|_| {
                            if self.rng.gen::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
                x = z
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let a = v.max(0.0);
                        if mask.is_empty() {
                            a
                        } else {
                            a * mask[i]
                        }
                    })
                    .collect();
                if mode == Mode::Train {
                    cache.masks.push(mask);
                    cache.acts.push(x.clone());
                }
            } else {
                x = z.clone();
            }
        }
        if mode == Mode::Train {
            self.cache = Some(cache);
        }
        x
    }

    /// Exact gradients of the scalar loss whose output gradient is supplied,
    /// for the activations retained by the last train-mode forward.
    pub fn backward(&mut self, output_grad: &[f64]) -> Gradients {
        let cache = self.cache.as_ref().expect("forward(Train) before backward");
        assert_eq!(output_grad.len(), self.output_dim());
        let mut grads = Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
                .collect(),
        };
        let mut delta = output_grad.to_vec();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let a_in = &cache.acts[li];
            let (dw, db) = &mut grads.layers[li];
            for o in 0..layer.out_dim {
                db[o] += delta[o];
                let row = &mut dw[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (r, ai) in row.iter_mut().zip(a_in) {
                    *r += delta[o] * ai;
                }
            }
            if li == 0 {
                break;
            }
            // Propagate through the previous hidden layer's mask + rectifier.
            let mut prev = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (p, wi) in prev.iter_mut().zip(row) {
                    *p += delta[o] * wi;
                }
            }
            let pre = &cache.pre[li - 1];
            let mask = &cache.masks[li - 1];
            for (i, p) in prev.iter_mut().enumerate() {
                let m = if mask.is_empty() { 1.0 } else { mask[i] };
                *p *= if pre[i] > 0.0 { m } else { 0.0 };
            }
            delta = prev;
        }
        grads
    }

    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (layer, (dw, db)) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, g) in layer.w.iter_mut().zip(dw) {
                *w -= lr * g;
            }
            for (b, g) in layer.b.iter_mut().zip(db) {
                *b -= lr * g;
            }
        }
    }

    fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn get_param(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            if idx < l.w.len() {
                return l.w[idx];
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                return l.b[idx];
            }
            idx -= l.b.len();
        }
        unreachable!()
    }

    fn set_param(&mut self, mut idx: usize, v: f64) {
        for l in &mut self.layers {
            if idx < l.w.len() {
                l.w[idx] = v;
                return;
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                l.b[idx] = v;
                return;
            }
            idx -= l.b.len();
        }
        unreachable!()
    }

    fn grad_at(grads: &Gradients, mut idx: usize) -> f64 {
        for (dw, db) in &grads.layers {
            if idx < dw.len() {
                return dw[idx];
            }
            idx -= dw.len();
            if idx < db.len() {
                return db[idx];
            }
            idx -= db.len();
        }
        unreachable!()
    }

    /// Forward pass that also fingerprints the rectifier activation pattern.
    fn forward_with_pattern(&mut self, input: &[f64]) -> (Vec<f64>, u64) {
        let hidden_layers = self.layers.len() - 1;
        let mut x = input.to_vec();
        let mut z = Vec::new();
        let mut pattern = 0xcbf29ce484222325u64;
        for (li, layer) in self.layers.iter().enumerate() {
            layer.apply(&x, &mut z);
            if li < hidden_layers {
                for &v in &z {
                    pattern = (pattern ^ (v > 0.0) as u64).wrapping_mul(0x100000001b3);
                }
                x = z.iter().map(|&v| v.max(0.0)).collect();
            } else {
                x = z.clone();
            }
        }
        (x, pattern)
    }

    /// Compare analytic gradients against central finite differences
    /// (h = 1e-5) with dropout disabled; returns the max relative error.
    ///
    /// A perturbation that carries a pre-activation across the rectifier kink
    /// makes the central difference meaningless for that parameter; those
    /// crossings are detected exactly (the activation pattern changes at
    /// either probe) and skipped. Crossings are rare at this step size, so
    /// almost every parameter is checked.
    pub fn grad_check<F>(&mut self, input: &[f64], loss: F) -> f64
    where
        F: Fn(&[f64]) -> (f64, Vec<f64>),
    {
        let saved_dropout = self.dropout;
        self.dropout = 0.0;
        let out = self.forward(input, Mode::Train);
        let (_, dl_dy) = loss(&out);
        let grads = self.backward(&dl_dy);
        let (_, base_pattern) = self.forward_with_pattern(input);
        let h = 1e-5;
        let mut max_rel = 0.0f64;
        let mut skipped = 0usize;
        let total = self.param_count();
        for idx in 0..total {
            let orig = self.get_param(idx);
            self.set_param(idx, orig + h);
            let (yp, pat_p) = self.forward_with_pattern(input);
            self.set_param(idx, orig - h);
            let (ym, pat_m) = self.forward_with_pattern(input);
            self.set_param(idx, orig);
            if pat_p != base_pattern || pat_m != base_pattern {
                skipped += 1;
                continue;
            }
            let (lp, _) = loss(&yp);
            let (lm, _) = loss(&ym);
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = Self::grad_at(&grads, idx);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0);
            max_rel = max_rel.max(rel);
        }
        assert!(
            skipped * 10 <= total,
            "kink guard skipped {skipped}/{total}"
        );
        self.dropout = saved_dropout;
        max_rel
    }

    /// Text header plus little-endian f64 parameters; load/save round-trips
    /// bit-exactly.
    pub fn save(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let sizes: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        out.extend_from_slice(
            format!(
                "cohesim-net v1\nsizes {}\ndropout {}\nseed {}\n===\n",
                sizes.join(" "),
                self.dropout,
                self.seed
            )
            .as_bytes(),
        );
        for l in &self.layers {
            for &w in l.w.iter().chain(&l.b) {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }

    pub fn load(bytes: &[u8]) -> Result<FeedForwardNet, String> {
        let marker = b"===\n";
        let split = bytes
            .windows(marker.len())
            .position(|w| w == marker)
            .ok_or("missing header terminator")?;
        let header = std::str::from_utf8(&bytes[..split]).map_err(|e| e.to_string())?;
        let mut sizes = Vec::new();
        let mut dropout = 0.0;
        let mut seed = 0;
        for line in header.lines() {
            if let Some(rest) = line.strip_prefix("sizes ") {
                sizes = rest
                    .split_whitespace()
                    .map(|s| s.parse().map_err(|_| "bad size".to_string()))
                    .collect::<Result<_, _>>()?;
            } else if let Some(rest) = line.strip_prefix("dropout ") {
                dropout = rest.parse().map_err(|_| "bad dropout".to_string())?;
            } else if let Some(rest) = line.strip_prefix("seed ") {
                seed = rest.parse().map_err(|_| "bad seed".to_string())?;
            }
        }
        if sizes.len() < 2 {
            return Err("missing sizes".into());
        }
        let mut net = FeedForwardNet::new(&sizes, dropout, seed);
        let mut off = split + marker.len();
        for l in &mut net.layers {
            for slot in l.w.iter_mut().chain(l.b.iter_mut()) {
                let end = off + 8;
                let chunk: [u8; 8] = bytes
                    .get(off..end)
                    .ok_or("truncated parameters")?
                    .try_into()
                    .unwrap();
                *slot = f64::from_le_bytes(chunk);
                off = end;
            }
        }
        if off != bytes.len() {
            return Err("trailing bytes".into());
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn squared_error(target: &[f64]) -> impl Fn(&[f64]) -> (f64, Vec<f64>) + '_ {
        move |y: &[f64]| {
            let loss: f64 = y.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
            let grad = y.iter().zip(target).map(|(a, b)| 2.0 * (a - b)).collect();
            (loss, grad)
        }
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut net = FeedForwardNet::new(&[3, 4, 2], 0.0, 1);
        for l in &mut net.layers {
            l.w.iter_mut().for_each(|w| *w = 0.0);
        }
        let y = net.forward(&[1.0, -2.0, 3.0], Mode::Inference);
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_single_weight_passes_input_through() {
        let mut net = FeedForwardNet::new(&[1, 1], 0.0, 1);
        net.layers[0].w[0] = 1.0;
        net.layers[0].b[0] = 0.0;
        for x in [-2.5, 0.0, 3.75] {
            assert_eq!(net.forward(&[x], Mode::Inference), vec![x]);
        }
    }

    #[test]
    fn hand_computed_two_layer_forward() {
        // 2-2-1, hidden relu: h = relu(Wx + b), y = V h + c.
        let mut net = FeedForwardNet::new(&[2, 2, 1], 0.0, 1);
        net.layers[0].w = vec![0.5, -1.0, 2.0, 1.0]; // rows: [0.5,-1.0], [2.0,1.0]
        net.layers[0].b = vec![0.25, -0.5];
        net.layers[1].w = vec![3.0, -2.0];
        net.layers[1].b = vec![0.125];
        // x = (1, -1): z = (0.5+1+0.25, 2-1-0.5) = (1.75, 0.5); relu same.
        // y = 3*1.75 - 2*0.5 + 0.125 = 4.375.
        let y = net.forward(&[1.0, -1.0], Mode::Inference);
        assert!((y[0] - 4.375).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = crate::workload::stream(99, 1);
        for trial in 0..10 {
            let mut net = FeedForwardNet::new(&[6, 16, 16, 4], 0.5, trial);
            let input: Vec<f64> = (0..6).map(|_| gauss(&mut rng)).collect();
            let target: Vec<f64> = (0..4).map(|_| gauss(&mut rng)).collect();
            let err = net.grad_check(&input, squared_error(&target));
            assert!(err < 1e-4, "trial {trial}: rel err {err}");
        }
    }

    #[test]
    fn zero_loss_point_has_zero_gradient() {
        let mut net = FeedForwardNet::new(&[2, 3, 2], 0.0, 5);
        let y = net.forward(&[0.3, -0.7], Mode::Train);
        let grads = net.backward(&vec![0.0; y.len()]);
        for (dw, db) in &grads.layers {
            assert!(dw.iter().chain(db).all(|&g| g == 0.0));
        }
    }

    #[test]
    fn linear_net_gradient_matches_closed_form() {
        // y = w*x, loss = (y - t)^2, dL/dw = 2(wx - t) * x.
        let mut net = FeedForwardNet::new(&[1, 1], 0.0, 2);
        net.layers[0].w[0] = 0.8;
        net.layers[0].b[0] = 0.0;
        let (x, t) = (1.7, -0.4);
        let y = net.forward(&[x], Mode::Train);
        let grads = net.backward(&[2.0 * (y[0] - t)]);
        let expect = 2.0 * (0.8 * x - t) * x;
        assert!((grads.layers[0].0[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn dropout_zero_train_equals_inference_bitwise() {
        let mut net = FeedForwardNet::new(&[4, 8, 8, 3], 0.0, 7);
        let x = [0.1, -0.2, 0.3, -0.4];
        let a = net.forward(&x, Mode::Train);
        let b = net.forward(&x, Mode::Inference);
        assert_eq!(a, b);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let run = || {
            let mut net = FeedForwardNet::new(&[3, 32, 32, 2], 0.5, 42);
            let mut out = Vec::new();
            for step in 0..20 {
                let x = [step as f64 * 0.1, 0.5, -0.25];
                let y = net.forward(&x, Mode::Train);
                let g: Vec<f64> = y.iter().map(|v| 2.0 * (v - 1.0)).collect();
                let grads = net.backward(&g);
                net.sgd_step(&grads, 1e-2);
                out.push(y);
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dropout_scales_by_keep_probability() {
        // With huge hidden values, mask slots are either 0 or 1/(1-p).
        let mut net = FeedForwardNet::new(&[1, 64, 1], 0.5, 3);
        net.layers[0].w.iter_mut().for_each(|w| *w = 1.0);
        net.layers[1].w.iter_mut().for_each(|w| *w = 1.0);
        let y_inf = net.forward(&[1.0], Mode::Inference)[0];
        assert!((y_inf - 64.0).abs() < 1e-12);
        let y_train = net.forward(&[1.0], Mode::Train)[0];
        // Sum of kept units, each scaled by 2: an even integer near 64.
        assert!(y_train >= 0.0 && (y_train / 2.0).fract() == 0.0);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut net = FeedForwardNet::new(&[5, 16, 16, 3], 0.5, 11);
        let x = [0.2, 0.4, -0.6, 0.8, -1.0];
        let y = net.forward(&x, Mode::Train);
        let g: Vec<f64> = y.iter().map(|v| *v).collect();
        let grads = net.backward(&g);
        net.sgd_step(&grads, 1e-3);
        let bytes = net.save();
        let mut back = FeedForwardNet::load(&bytes).unwrap();
        assert_eq!(back.sizes, net.sizes);
        assert_eq!(back.dropout, net.dropout);
        for (a, b) in net.layers.iter().zip(&back.layers) {
            assert_eq!(a.w, b.w);
            assert_eq!(a.b, b.b);
        }
        assert_eq!(
            net.forward(&x, Mode::Inference),
            back.forward(&x, Mode::Inference)
        );
        assert_eq!(back.save(), bytes);
    }
}
