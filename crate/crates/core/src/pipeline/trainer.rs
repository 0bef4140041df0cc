use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::analysis::probe::{ProbeRow, PROBE_FILE};
use crate::bnn::{fit, BayesianLinearModel, BayesianMlp, FitOptions, FitOutcome};
use crate::config::{Method, RunConfig};
use crate::envs::{Environment, EnvKind};
use crate::error::{Error, Result};
use crate::metrics::{write_csv, EpochMetrics, MetricsWriter};
use crate::nn::Adam;
use crate::ppo::{collect_epoch, ppo_update, EnvRunner, GaussianPolicy, ValueNet};
use crate::{seeded_rng, snapshot, Rng};

use super::{score_epoch, DynamicsModel, KlQueue, Projection, ReplayMemory, ReturnScaler, RunningNormalizer, Transition};

/// Independent generator streams, so that adding a consumer of randomness in
/// one part of the loop leaves every other part unchanged.
mod stream {
    pub const INIT: u64 = 0;
    pub const ACTION: u64 = 1;
    pub const PPO: u64 = 2;
    pub const BNN: u64 = 3;
    pub const PROBE: u64 = 4;
    pub const BNN_INIT: u64 = 5;
}

fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub metrics: Vec<EpochMetrics>,
    pub probe: Vec<ProbeRow>,
}

struct Intrinsic {
    model: DynamicsModel,
    adam: Adam,
    normalizer: RunningNormalizer,
    queue: KlQueue,
    fitted: bool,
}

/// Full training state of one run.
pub struct Trainer {
    pub cfg: RunConfig,
    pub policy: GaussianPolicy,
    pub value: ValueNet,
    policy_opt: Adam,
    value_opt: Adam,
    runner: EnvRunner,
    replay: ReplayMemory,
    intrinsic: Option<Intrinsic>,
    scaler: Option<ReturnScaler>,
    epoch: usize,
    action_rng: Rng,
    ppo_rng: Rng,
    bnn_rng: Rng,
    probe_rng: Rng,
}

impl Trainer {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.probe && !(cfg.method == Method::Imle && cfg.intrinsic_active()) {
            return Err(Error::Config("the value-update probe needs method imle with eta > 0".into()));
        }
        let (obs_dim, act_dim) = cfg.env.observation_spec();
        let mut init = stream_rng(cfg.seed, stream::INIT);
        let policy = GaussianPolicy::with_hidden(obs_dim, act_dim, &cfg.policy_hidden, &mut init)?;
        let value = ValueNet::with_hidden(obs_dim, &cfg.value_hidden, &mut init)?;

        let intrinsic = if cfg.intrinsic_active() {
            let mut rng = stream_rng(cfg.seed, stream::BNN_INIT);
            let (model, feature_dim) = match cfg.method {
                Method::Imle => {
                    let d = value.latent_dim();
                    let m = BayesianLinearModel::new(d + act_dim, d, cfg.prior_std, cfg.obs_noise_std, cfg.bnn_init_std, &mut rng)?;
                    (DynamicsModel::Latent(m), d)
                }
                Method::Vime => {
                    let mut sizes = vec![obs_dim + act_dim];
                    sizes.extend_from_slice(&cfg.vime_hidden);
                    sizes.push(obs_dim);
                    let m = BayesianMlp::new(&sizes, cfg.prior_std, cfg.obs_noise_std, cfg.bnn_init_std, cfg.bnn_samples, &mut rng)?;
                    (DynamicsModel::Raw(m), obs_dim)
                }
                Method::Ppo => unreachable!("ppo has no intrinsic model"),
            };
            Some(Intrinsic {
                model,
                adam: Adam::new(cfg.bnn_learning_rate),
                normalizer: RunningNormalizer::new(feature_dim),
                queue: KlQueue::new(cfg.kl_queue_len),
                fitted: false,
            })
        } else {
            None
        };

        let mut runner = EnvRunner::new(cfg.env.make(cfg.horizon()), cfg.seed);
        if cfg.normalize_observations {
            runner = runner.with_obs_normalization();
        }
        Ok(Self {
            policy,
            value,
            policy_opt: Adam::new(cfg.learning_rate),
            value_opt: Adam::new(cfg.learning_rate),
            runner,
            replay: ReplayMemory::new(cfg.replay_capacity),
            intrinsic,
            scaler: cfg.scale_rewards.then(|| ReturnScaler::new(cfg.gamma)),
            epoch: 0,
            action_rng: stream_rng(cfg.seed, stream::ACTION),
            ppo_rng: stream_rng(cfg.seed, stream::PPO),
            bnn_rng: stream_rng(cfg.seed, stream::BNN),
            probe_rng: stream_rng(cfg.seed, stream::PROBE),
            cfg,
        })
    }

    pub fn env(&self) -> EnvKind {
        self.runner.env.kind()
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.cfg.epochs()
    }

    pub fn replay(&self) -> &ReplayMemory {
        &self.replay
    }

    pub fn dynamics(&self) -> Option<&DynamicsModel> {
        self.intrinsic.as_ref().map(|i| &i.model)
    }

    /// One collect / score / PPO / fit round.
    pub fn step_epoch(&mut self) -> Result<(EpochMetrics, Option<ProbeRow>)> {
        let started = Instant::now();
        let cfg = &self.cfg;
        let mut buffer = collect_epoch(&mut self.runner, &self.policy, &self.value, cfg.epoch_steps, &mut self.action_rng)?;
        for i in 0..buffer.len() {
            self.replay.push(Transition {
                s: buffer.observations[i].clone(),
                a: buffer.env_actions[i].clone(),
                r: buffer.rewards[i],
                s_next: buffer.next_observations[i].clone(),
                done: buffer.dones[i],
            });
        }

        let mut row = EpochMetrics {
            epoch: self.epoch,
            env_steps: (self.epoch + 1) * cfg.epoch_steps,
            ..Default::default()
        };
        if !buffer.episode_returns.is_empty() {
            let r = &buffer.episode_returns;
            row.mean_return = r.iter().sum::<f64>() / r.len() as f64;
            row.max_return = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }

        if let Some(intr) = self.intrinsic.as_mut() {
            let kind = intr.model.feature_kind();
            for s in &buffer.observations {
                let f = Projection { kind, value: &self.value, normalizer: &intr.normalizer }.features(s)?;
                intr.normalizer.update(&f);
            }
            if intr.fitted {
                let projection = Projection { kind, value: &self.value, normalizer: &intr.normalizer };
                let stats = score_epoch(
                    &mut buffer,
                    intr.model.model(),
                    &projection,
                    &mut intr.queue,
                    cfg.eta,
                    cfg.info_gain_step(),
                    self.replay.len(),
                    &mut self.bnn_rng,
                )?;
                row.mean_bonus = stats.mean_bonus;
                row.raw_kl_mean = stats.raw_kl_mean;
                row.kl_median = stats.divisor;
            } else {
                log::debug!("epoch {}: model not fit yet, bonuses are zero", self.epoch);
            }
        }
        match self.scaler.as_mut() {
            Some(scaler) => {
                let rewards = scaler.scale(&buffer.augmented_rewards(), &buffer.dones);
                buffer.finish_with(&rewards, cfg.gamma, cfg.gae_tau)?;
            }
            None => buffer.finish(cfg.gamma, cfg.gae_tau)?,
        }

        let before = cfg.probe.then(|| self.value.clone());
        let stats = ppo_update(
            &mut self.policy,
            &mut self.value,
            &mut self.policy_opt,
            &mut self.value_opt,
            &buffer,
            &cfg.ppo(),
            &mut self.ppo_rng,
        )?;
        row.policy_loss = stats.policy_loss;
        row.value_loss = stats.value_loss;

        let mut probe = None;
        if let (Some(before), Some(intr)) = (before, self.intrinsic.as_ref()) {
            if intr.fitted && self.replay.len() >= cfg.min_replay {
                let sample = self.replay.sample(cfg.probe_samples, &mut self.probe_rng);
                let kind = intr.model.feature_kind();
                let old = Projection { kind, value: &before, normalizer: &intr.normalizer };
                let new = Projection { kind, value: &self.value, normalizer: &intr.normalizer };
                probe = Some(ProbeRow::new(
                    self.epoch,
                    intr.model.prediction_mse(&old, &sample)?,
                    intr.model.prediction_mse(&new, &sample)?,
                ));
            }
        }

        if let Some(intr) = self.intrinsic.as_mut() {
            if self.epoch % cfg.bnn_update_interval == 0 {
                let opts = FitOptions {
                    updates: cfg.bnn_updates,
                    batch_size: cfg.bnn_batch_size,
                    n_samples: cfg.bnn_samples,
                    min_replay: cfg.min_replay,
                };
                let projection = Projection { kind: intr.model.feature_kind(), value: &self.value, normalizer: &intr.normalizer };
                match fit(
                    intr.model.model_mut(),
                    &self.replay,
                    |t| projection.transition(t),
                    &opts,
                    &mut intr.adam,
                    &mut self.bnn_rng,
                )? {
                    FitOutcome::Trained { mean_loss, .. } => {
                        intr.fitted = true;
                        row.bnn_loss = mean_loss;
                    }
                    FitOutcome::Skipped { replay_len } => {
                        log::debug!("epoch {}: replay has {replay_len} transitions, fit skipped", self.epoch);
                    }
                }
            }
        }

        if cfg.record_wall_time {
            row.wall_ms = started.elapsed().as_millis() as u64;
        }
        self.epoch += 1;
        Ok((row, probe))
    }

    /// Writes the policy, value and model parameters as text snapshots.
    pub fn write_snapshots(&self, dir: &Path) -> Result<()> {
        snapshot::write(&dir.join("policy.params"), self.policy.params())?;
        snapshot::write(&dir.join("value.params"), self.value.net.params())?;
        if let Some(intr) = &self.intrinsic {
            let tensors = intr.model.model().posterior().into_iter().flat_map(|(m, r)| [m, r]);
            snapshot::write(&dir.join("bnn.params"), tensors)?;
        }
        Ok(())
    }
}

/// Runs a configuration to completion.
///
/// With an output directory, `config.resolved.json` is written first and
/// `metrics.csv` grows one flushed row per epoch; snapshots (and the probe
/// file, when enabled) are written at the end. On failure the rows written so
/// far stay on disk and the error is returned.
pub fn run_training(cfg: &RunConfig) -> Result<RunSummary> {
    let mut trainer = Trainer::new(cfg.clone())?;
    let out: Option<PathBuf> = cfg.out_dir.as_ref().map(PathBuf::from);
    let mut writer = match &out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("config.resolved.json"), cfg.to_json()?)?;
            Some(MetricsWriter::create(&dir.join("metrics.csv"))?)
        }
        None => None,
    };
    let mut summary = RunSummary::default();
    while !trainer.is_done() {
        let (row, probe) = trainer.step_epoch()?;
        if let Some(w) = writer.as_mut() {
            w.write(&row)?;
        }
        log::info!(
            "{} {} seed {} epoch {} steps {} return {:.3} bonus {:.3e}",
            cfg.env,
            cfg.method,
            cfg.seed,
            row.epoch,
            row.env_steps,
            row.mean_return,
            row.mean_bonus
        );
        summary.metrics.push(row);
        summary.probe.extend(probe);
    }
    if let Some(dir) = &out {
        trainer.write_snapshots(dir)?;
        if cfg.probe {
            write_csv(&dir.join(PROBE_FILE), &summary.probe)?;
        }
    }
    Ok(summary)
}
