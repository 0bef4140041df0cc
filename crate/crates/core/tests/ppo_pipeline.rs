use imle_core::bnn::BayesianLinearModel;
use imle_core::config::{Method, RunConfig};
use imle_core::envs::EnvKind;
use imle_core::pipeline::{score_epoch, FeatureKind, KlQueue, Projection, ReturnScaler, RunningNormalizer, Trainer};
use imle_core::ppo::{gae, normalize_advantages, sample_loss, GaussianPolicy, PpoConfig, RolloutBuffer, ValueNet};
use imle_core::seeded_rng;
use proptest::prelude::*;

fn small_buffer(n: usize, seed: u64) -> RolloutBuffer {
    use rand::Rng as _;
    let mut rng = seeded_rng(seed);
    let mut b = RolloutBuffer::default();
    for i in 0..n {
        let s = vec![rng.random_range(-1.2..0.6), rng.random_range(-0.07..0.07)];
        let s2 = vec![s[0] + s[1], s[1]];
        let a = vec![rng.random_range(-1.0..1.0)];
        b.observations.push(s);
        b.next_observations.push(s2);
        b.actions.push(a.clone());
        b.env_actions.push(a);
        b.log_probs.push(0.0);
        b.rewards.push(if i % 7 == 0 { 1.0 } else { 0.0 });
        b.intrinsic.push(0.0);
        b.values.push(0.0);
        b.dones.push(i % 7 == 0);
    }
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_advantages_are_standard(adv in prop::collection::vec(-1e3f64..1e3, 2..128)) {
        let spread = adv.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - adv.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let z = normalize_advantages(&adv);
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let std = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!(mean.abs() < 1e-10);
        prop_assert!((std - 1.0).abs() < 1e-10);
    }

    #[test]
    fn clipped_surrogate_never_exceeds_unclipped(
        obs in prop::collection::vec(-1.0f64..1.0, 2),
        action in -3.0f64..3.0,
        old_log_prob in -4.0f64..1.0,
        advantage in -5.0f64..5.0,
        seed in 0u64..100,
    ) {
        let mut rng = seeded_rng(seed);
        let mut policy = GaussianPolicy::new(2, 1, &mut rng).unwrap();
        let mut value = ValueNet::new(2, &mut rng).unwrap();
        let cfg = PpoConfig::default();
        let l = sample_loss(&mut policy, &mut value, &obs, &[action], old_log_prob, advantage, 0.0, &cfg, 1.0).unwrap();
        // loss.policy is the negated surrogate
        prop_assert!(-l.policy <= l.ratio * advantage + 1e-12);
    }

    #[test]
    fn gae_returns_are_advantages_plus_values(
        rewards in prop::collection::vec(-1.0f64..1.0, 1..50),
        gamma in 0.5f64..1.0,
        tau in 0.0f64..1.0,
    ) {
        let n = rewards.len();
        let values: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let dones: Vec<bool> = (0..n).map(|i| i % 5 == 4).collect();
        let (adv, ret) = gae(&rewards, &values, &dones, 0.3, gamma, tau).unwrap();
        for i in 0..n {
            prop_assert!((ret[i] - adv[i] - values[i]).abs() < 1e-12);
        }
        if tau == 0.0 {
            // one-step TD error
            let next = if n > 1 { values[1] } else { 0.3 };
            let expect = rewards[0] + if dones[0] { 0.0 } else { gamma * next } - values[0];
            prop_assert!((adv[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn bonuses_are_nonnegative_and_augment(seed in 0u64..200, eta in 0.0f64..1.0) {
        let mut rng = seeded_rng(seed);
        let mut buffer = small_buffer(40, seed);
        let value = ValueNet::new(2, &mut rng).unwrap();
        let model = BayesianLinearModel::new(33, 32, 0.5, 0.1, 0.05, &mut rng).unwrap();
        let mut normalizer = RunningNormalizer::new(32);
        for s in &buffer.observations {
            normalizer.update(&value.latent(s).unwrap());
        }
        let projection = Projection { kind: FeatureKind::Latent, value: &value, normalizer: &normalizer };
        let mut queue = KlQueue::new(10);
        queue.push(0.5);
        let stats = score_epoch(&mut buffer, &model, &projection, &mut queue, eta, 1e-3, 1000, &mut rng).unwrap();
        prop_assert_eq!(stats.divisor, 0.5);
        prop_assert_eq!(queue.len(), 2);
        let augmented = buffer.augmented_rewards();
        for i in 0..buffer.len() {
            prop_assert!(buffer.intrinsic[i] >= 0.0);
            prop_assert!(augmented[i] >= buffer.rewards[i]);
        }
    }

    #[test]
    fn reward_scaling_preserves_sign(rewards in prop::collection::vec(-2.0f64..2.0, 1..100)) {
        let dones = vec![false; rewards.len()];
        let scaled = ReturnScaler::new(0.99).scale(&rewards, &dones);
        for (r, s) in rewards.iter().zip(&scaled) {
            prop_assert_eq!(r.signum() * (r.abs() > 0.0) as i32 as f64, s.signum() * (s.abs() > 0.0) as i32 as f64);
            prop_assert!(s.abs() <= 10.0);
        }
    }
}

#[test]
fn zero_eta_matches_plain_ppo_bit_for_bit() {
    let mut base = RunConfig::new(EnvKind::SparseMountainCar, Method::Ppo, 3);
    base.total_steps = 3 * 2048;
    let mut imle = base.clone();
    imle.method = Method::Imle;
    imle.eta = 0.0;
    let mut a = Trainer::new(base).unwrap();
    let mut b = Trainer::new(imle).unwrap();
    while !a.is_done() {
        let (ra, _) = a.step_epoch().unwrap();
        let (rb, _) = b.step_epoch().unwrap();
        assert_eq!(ra, rb);
    }
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.value, b.value);
}

#[test]
fn fit_waits_for_min_replay() {
    let mut cfg = RunConfig::new(EnvKind::SparseMountainCar, Method::Imle, 0);
    cfg.epoch_steps = 499;
    cfg.total_steps = 998;
    let mut t = Trainer::new(cfg).unwrap();
    let (first, _) = t.step_epoch().unwrap();
    assert_eq!(t.replay().len(), 499);
    assert_eq!(first.bnn_loss, 0.0);
    let (second, _) = t.step_epoch().unwrap();
    assert!(second.bnn_loss != 0.0);
    // fitted after the second epoch, so no bonus has been scored yet
    assert_eq!(second.mean_bonus, 0.0);
}

#[test]
fn bonuses_flow_once_fitted() {
    let mut cfg = RunConfig::new(EnvKind::SparseMountainCar, Method::Imle, 1);
    cfg.total_steps = 3 * 2048;
    let mut t = Trainer::new(cfg).unwrap();
    let rows: Vec<_> = (0..3).map(|_| t.step_epoch().unwrap().0).collect();
    assert_eq!(rows[0].mean_bonus, 0.0);
    assert!(rows[1].mean_bonus > 0.0 && rows[1].kl_median == 1.0);
    assert!(rows[2].mean_bonus > 0.0 && rows[2].kl_median == rows[1].raw_kl_mean);
}

#[test]
fn probe_does_not_perturb_training() {
    let mut cfg = RunConfig::new(EnvKind::SparseMountainCar, Method::Imle, 2);
    cfg.total_steps = 3 * 2048;
    let mut probed = cfg.clone();
    probed.probe = true;
    let mut a = Trainer::new(cfg).unwrap();
    let mut b = Trainer::new(probed).unwrap();
    let mut probe_rows = 0;
    while !a.is_done() {
        let (ra, none) = a.step_epoch().unwrap();
        let (rb, row) = b.step_epoch().unwrap();
        assert!(none.is_none());
        probe_rows += row.is_some() as usize;
        assert_eq!(ra, rb);
    }
    assert_eq!(probe_rows, 2);
}
