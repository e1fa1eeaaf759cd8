//! Phase-gated Q-network: a convolutional encoder for the position grid,
//! a shared dense stack, and two phase-specific branches. Only the branch
//! matching the observation's current phase is evaluated, so the other
//! branch's parameters are inert for that input.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, GridConfig, Observation};
use crate::nn::{
    apply_update, backward, forward, init_params, Activations, LayerSpec, NetworkParams, NnError,
    OptimizerConfig, Tensor,
};
use crate::replay::Experience;
use crate::sim::{Phase, NUM_LANES};

#[derive(Debug, Error)]
pub enum QNetError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
}

/// Fixed scaling applied to the numeric observation vectors before they
/// enter the network. Keeps feature magnitudes comparable so one learning
/// rate works across all inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObsNorm {
    pub queue_scale: f64,
    pub count_scale: f64,
    pub wait_scale: f64,
    /// Damps the convolutional latent so the per-lane scalars dominate
    /// early training; the grid refines decisions once the dense layers
    /// have found the coarse policy.
    pub latent_scale: f64,
}

impl ObsNorm {
    fn sanity(&self) {
        debug_assert!(self.queue_scale > 0.0);
        debug_assert!(self.count_scale > 0.0);
        debug_assert!(self.wait_scale > 0.0);
        debug_assert!(self.latent_scale >= 0.0);
    }
}

impl Default for ObsNorm {
    fn default() -> Self {
        ObsNorm {
            queue_scale: 0.05,
            count_scale: 0.05,
            wait_scale: 0.002,
            latent_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QNetConfig {
    pub grid: GridConfig,
    pub conv_channels: [usize; 2],
    pub conv_kernel: usize,
    pub conv_stride: usize,
    pub shared_width: usize,
    pub branch_width: usize,
    pub norm: ObsNorm,
    /// Added to the Change head's output bias at initialization. A small
    /// optimistic offset keeps ties from collapsing into never switching,
    /// which is an absorbing failure mode for a fresh network.
    pub change_bias_init: f64,
}

impl Default for QNetConfig {
    fn default() -> Self {
        QNetConfig {
            grid: GridConfig::default(),
            conv_channels: [8, 16],
            conv_kernel: 3,
            conv_stride: 2,
            shared_width: 64,
            branch_width: 32,
            norm: ObsNorm::default(),
            change_bias_init: 0.2,
        }
    }
}

impl QNetConfig {
    pub fn cnn_specs(&self) -> Vec<LayerSpec> {
        let h1 = NUM_LANES;
        let w1 = self.grid.cells_per_lane();
        let c1 = LayerSpec::Conv2d {
            in_ch: 1,
            out_ch: self.conv_channels[0],
            in_h: h1,
            in_w: w1,
            kernel: self.conv_kernel,
            stride: self.conv_stride,
        };
        let (h2, w2) = c1.conv_out_dims().unwrap();
        let c2 = LayerSpec::Conv2d {
            in_ch: self.conv_channels[0],
            out_ch: self.conv_channels[1],
            in_h: h2,
            in_w: w2,
            kernel: self.conv_kernel,
            stride: self.conv_stride,
        };
        vec![c1, LayerSpec::Relu, c2, LayerSpec::Relu, LayerSpec::Flatten]
    }

    pub fn latent_len(&self) -> usize {
        let specs = self.cnn_specs();
        let mut n = NUM_LANES * self.grid.cells_per_lane();
        for s in &specs {
            n = s.output_len(n);
        }
        n
    }

    /// q + v + w + two phase one-hots + latent.
    pub fn feature_len(&self) -> usize {
        3 * NUM_LANES + 4 + self.latent_len()
    }

    pub fn shared_specs(&self) -> Vec<LayerSpec> {
        vec![
            LayerSpec::Dense {
                input: self.feature_len(),
                output: self.shared_width,
            },
            LayerSpec::Relu,
        ]
    }

    pub fn branch_specs(&self) -> Vec<LayerSpec> {
        vec![
            LayerSpec::Dense {
                input: self.shared_width,
                output: self.branch_width,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                input: self.branch_width,
                output: 2,
            },
        ]
    }
}

#[derive(Debug, Clone)]
pub struct PhaseGateQNet {
    pub config: QNetConfig,
    pub cnn: NetworkParams,
    pub shared: NetworkParams,
    pub branch_ns: NetworkParams,
    pub branch_we: NetworkParams,
}

/// Gradients mirroring the four parameter groups.
#[derive(Debug, Clone)]
pub struct QNetGrads {
    pub cnn: NetworkParams,
    pub shared: NetworkParams,
    pub branch_ns: NetworkParams,
    pub branch_we: NetworkParams,
}

impl QNetGrads {
    fn zeros(cfg: &QNetConfig) -> Self {
        QNetGrads {
            cnn: NetworkParams::zeros_like(&cfg.cnn_specs()),
            shared: NetworkParams::zeros_like(&cfg.shared_specs()),
            branch_ns: NetworkParams::zeros_like(&cfg.branch_specs()),
            branch_we: NetworkParams::zeros_like(&cfg.branch_specs()),
        }
    }

    fn add(&mut self, other: &QNetGrads) {
        self.cnn.add_scaled(&other.cnn, 1.0);
        self.shared.add_scaled(&other.shared, 1.0);
        self.branch_ns.add_scaled(&other.branch_ns, 1.0);
        self.branch_we.add_scaled(&other.branch_we, 1.0);
    }

    fn scale(&mut self, f: f64) {
        self.cnn.scale(f);
        self.shared.scale(f);
        self.branch_ns.scale(f);
        self.branch_we.scale(f);
    }

    pub fn squared_norm(&self) -> f64 {
        self.cnn.squared_norm()
            + self.shared.squared_norm()
            + self.branch_ns.squared_norm()
            + self.branch_we.squared_norm()
    }
}

struct ForwardPass {
    cnn_acts: Activations,
    shared_acts: Activations,
    branch_acts: Activations,
    phase: Phase,
}

impl ForwardPass {
    fn q_pair(&self) -> (f64, f64) {
        let out = self.branch_acts.output();
        (out.data[0], out.data[1])
    }
}

impl PhaseGateQNet {
    pub fn new(config: QNetConfig, seed: u64) -> Self {
        config.norm.sanity();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut branch_ns = init_params(&config.branch_specs(), &mut rng);
        let mut branch_we = init_params(&config.branch_specs(), &mut rng);
        if config.change_bias_init != 0.0 {
            for branch in [&mut branch_ns, &mut branch_we] {
                if let Some(last) = branch.layers.last_mut() {
                    if last.bias.len() == 2 {
                        last.bias.data[Action::Change.index()] += config.change_bias_init;
                    }
                }
            }
        }
        PhaseGateQNet {
            cnn: init_params(&config.cnn_specs(), &mut rng),
            shared: init_params(&config.shared_specs(), &mut rng),
            branch_ns,
            branch_we,
            config,
        }
    }

    fn branch_for(&self, phase: Phase) -> &NetworkParams {
        match phase {
            Phase::NS => &self.branch_ns,
            Phase::WE => &self.branch_we,
        }
    }

    /// CNN encoding of the position grid.
    pub fn encode(&self, obs: &Observation) -> Result<Activations, NnError> {
        let cells = self.config.grid.cells_per_lane();
        let grid = Tensor::from_vec(vec![1, NUM_LANES, cells], obs.grid.clone());
        forward(&self.cnn, &self.config.cnn_specs(), &grid)
    }

    fn assemble_features(&self, obs: &Observation, latent: &Tensor) -> Tensor {
        let n = self.config.norm;
        let mut data = Vec::with_capacity(self.config.feature_len());
        data.extend(obs.queue.iter().map(|q| q * n.queue_scale));
        data.extend(obs.count.iter().map(|v| v * n.count_scale));
        data.extend(obs.wait.iter().map(|w| w * n.wait_scale));
        data.extend(Observation::phase_one_hot(obs.current_phase));
        data.extend(Observation::phase_one_hot(obs.next_phase()));
        data.extend(latent.data.iter().map(|z| z * n.latent_scale));
        Tensor::vector(data)
    }

    fn run_forward(&self, obs: &Observation) -> Result<ForwardPass, NnError> {
        let cnn_acts = self.encode(obs)?;
        let features = self.assemble_features(obs, cnn_acts.output());
        let shared_acts = forward(&self.shared, &self.config.shared_specs(), &features)?;
        let branch_acts = forward(
            self.branch_for(obs.current_phase),
            &self.config.branch_specs(),
            shared_acts.output(),
        )?;
        Ok(ForwardPass {
            cnn_acts,
            shared_acts,
            branch_acts,
            phase: obs.current_phase,
        })
    }

    /// (Q_keep, Q_change) for this observation, through the branch gated
    /// by its current phase.
    pub fn q_values(&self, obs: &Observation) -> Result<(f64, f64), NnError> {
        Ok(self.run_forward(obs)?.q_pair())
    }

    /// Gradients of `weight * (Q(s,a) - target)^2` for a single sample.
    /// The inactive phase branch receives exactly zero gradient.
    fn sample_grads(
        &self,
        obs: &Observation,
        action: Action,
        target: f64,
        weight: f64,
    ) -> Result<(QNetGrads, f64), NnError> {
        let pass = self.run_forward(obs)?;
        let q = pass.branch_acts.output().data[action.index()];
        let err = q - target;
        let mut out_grad = Tensor::zeros(vec![2]);
        out_grad.data[action.index()] = 2.0 * weight * err;

        let branch_specs = self.config.branch_specs();
        let (branch_g, d_shared_out) = backward(
            self.branch_for(pass.phase),
            &branch_specs,
            &pass.branch_acts,
            &out_grad,
        )?;
        let shared_specs = self.config.shared_specs();
        let (shared_g, d_features) =
            backward(&self.shared, &shared_specs, &pass.shared_acts, &d_shared_out)?;
        // only the latent slice of the feature gradient flows into the CNN
        let latent_len = self.config.latent_len();
        let offset = d_features.len() - latent_len;
        let scale = self.config.norm.latent_scale;
        let d_latent = Tensor::vector(d_features.data[offset..].iter().map(|g| g * scale).collect());
        let cnn_specs = self.config.cnn_specs();
        let (cnn_g, _) = backward(&self.cnn, &cnn_specs, &pass.cnn_acts, &d_latent)?;

        let mut grads = QNetGrads::zeros(&self.config);
        grads.cnn = cnn_g;
        grads.shared = shared_g;
        match pass.phase {
            Phase::NS => grads.branch_ns = branch_g,
            Phase::WE => grads.branch_we = branch_g,
        }
        Ok((grads, err * err))
    }

    /// Accumulated gradients of the mean squared TD error over a batch,
    /// plus the pre-update loss. Chunked so the parallel build can fan
    /// chunks out to worker threads and still reduce deterministically.
    pub fn batch_gradients(
        &self,
        samples: &[(Observation, Action, f64)],
    ) -> Result<(QNetGrads, f64), QNetError> {
        if samples.is_empty() {
            return Err(QNetError::EmptyBatch);
        }
        let weight = 1.0 / samples.len() as f64;
        let partials = self.chunk_gradients(samples, weight)?;
        let mut acc = QNetGrads::zeros(&self.config);
        let mut sq_sum = 0.0;
        for (g, sq) in &partials {
            acc.add(g);
            sq_sum += sq;
        }
        Ok((acc, sq_sum / samples.len() as f64))
    }

    /// Sequential variant kept unconditionally for benchmarking.
    pub fn batch_gradients_seq(
        &self,
        samples: &[(Observation, Action, f64)],
    ) -> Result<(QNetGrads, f64), QNetError> {
        if samples.is_empty() {
            return Err(QNetError::EmptyBatch);
        }
        let weight = 1.0 / samples.len() as f64;
        let mut acc = QNetGrads::zeros(&self.config);
        let mut sq_sum = 0.0;
        for (obs, action, target) in samples {
            let (g, sq) = self.sample_grads(obs, *action, *target, weight)?;
            acc.add(&g);
            sq_sum += sq;
        }
        Ok((acc, sq_sum / samples.len() as f64))
    }

    #[cfg(feature = "parallel")]
    fn chunk_gradients(
        &self,
        samples: &[(Observation, Action, f64)],
        weight: f64,
    ) -> Result<Vec<(QNetGrads, f64)>, QNetError> {
        use rayon::prelude::*;
        samples
            .par_chunks(32)
            .map(|chunk| {
                let mut acc = QNetGrads::zeros(&self.config);
                let mut sq_sum = 0.0;
                for (obs, action, target) in chunk {
                    let (g, sq) = self.sample_grads(obs, *action, *target, weight)?;
                    acc.add(&g);
                    sq_sum += sq;
                }
                Ok((acc, sq_sum))
            })
            .collect()
    }

    #[cfg(not(feature = "parallel"))]
    fn chunk_gradients(
        &self,
        samples: &[(Observation, Action, f64)],
        weight: f64,
    ) -> Result<Vec<(QNetGrads, f64)>, QNetError> {
        samples
            .chunks(32)
            .map(|chunk| {
                let mut acc = QNetGrads::zeros(&self.config);
                let mut sq_sum = 0.0;
                for (obs, action, target) in chunk {
                    let (g, sq) = self.sample_grads(obs, *action, *target, weight)?;
                    acc.add(&g);
                    sq_sum += sq;
                }
                Ok((acc, sq_sum))
            })
            .collect()
    }

    /// One gradient step on the mean squared error between `targets` and
    /// the taken-action Q values. Returns the pre-update loss.
    pub fn train_batch(
        &mut self,
        batch: &[Experience],
        targets: &[f64],
        cfg: &OptimizerConfig,
    ) -> Result<f64, QNetError> {
        if batch.is_empty() {
            return Err(QNetError::EmptyBatch);
        }
        assert_eq!(batch.len(), targets.len());
        let samples: Vec<(Observation, Action, f64)> = batch
            .iter()
            .zip(targets)
            .map(|(e, y)| (e.state.clone(), e.action, *y))
            .collect();
        let (mut grads, loss) = self.batch_gradients(&samples)?;
        // clip on the global norm across all four parameter groups, then
        // step each group without further clipping
        if let Some(clip) = cfg.grad_clip {
            let norm = grads.squared_norm().sqrt();
            if norm > clip {
                grads.scale(clip / norm);
            }
        }
        let step = OptimizerConfig {
            learning_rate: cfg.learning_rate,
            grad_clip: None,
            weight_decay: cfg.weight_decay,
        };
        apply_update(&mut self.cnn, &grads.cnn, &step);
        apply_update(&mut self.shared, &grads.shared, &step);
        apply_update(&mut self.branch_ns, &grads.branch_ns, &step);
        apply_update(&mut self.branch_we, &grads.branch_we, &step);
        Ok(loss)
    }

    pub fn save(&self, path: &Path) -> Result<(), QNetError> {
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config,
            cnn: self.cnn.clone(),
            shared: self.shared.clone(),
            branch_ns: self.branch_ns.clone(),
            branch_we: self.branch_we.clone(),
        };
        fs::write(path, serde_json::to_string(&ckpt)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, QNetError> {
        let ckpt: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(QNetError::Version(ckpt.version));
        }
        Ok(PhaseGateQNet {
            config: ckpt.config,
            cnn: ckpt.cnn,
            shared: ckpt.shared,
            branch_ns: ckpt.branch_ns,
            branch_we: ckpt.branch_we,
        })
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk parameter snapshot: JSON with an explicit version and the full
/// shape manifest carried by each tensor.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: QNetConfig,
    cnn: NetworkParams,
    shared: NetworkParams,
    branch_ns: NetworkParams,
    branch_we: NetworkParams,
}

/// Argmax over the two actions; ties go to Keep to avoid spurious phase
/// changes.
pub fn greedy_action(q: (f64, f64)) -> Action {
    if q.1 > q.0 {
        Action::Change
    } else {
        Action::Keep
    }
}

pub fn epsilon_greedy<R: Rng>(q: (f64, f64), epsilon: f64, rng: &mut R) -> Action {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        Action::ALL[rng.gen_range(0..2)]
    } else {
        greedy_action(q)
    }
}

/// y_t = c * (R_t + b) + gamma * max_a Q(s_{t+1}, a) with the current
/// network.
///
/// `reward_scale` (c) and `reward_shift` (b) map raw rewards into the
/// range the network trains in; c is positive and b is a constant, so
/// greedy decisions are unaffected.
pub fn td_targets(
    batch: &[Experience],
    net: &PhaseGateQNet,
    gamma: f64,
    reward_scale: f64,
    reward_shift: f64,
) -> Result<Vec<f64>, NnError> {
    debug_assert!((0.0..=1.0).contains(&gamma));
    debug_assert!(reward_scale > 0.0);
    batch
        .iter()
        .map(|e| {
            let r = reward_scale * (e.reward + reward_shift);
            if gamma == 0.0 {
                return Ok(r);
            }
            let (qk, qc) = net.q_values(&e.next_state)?;
            Ok(r + gamma * qk.max(qc))
        })
        .collect()
}
