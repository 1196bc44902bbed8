//! Randomised fixtures shared by the gradient and acceptance targets.
#![allow(dead_code)]

use fobj_core::geomreward::CenterRegressor;
use fobj_core::nn::gradcheck::max_rel_err;
use fobj_core::nn::{init_weight, zero_grad};
use fobj_core::policynet::{MergePolicy, PolicyConfig, PolicySet, SeedPolicy};
use fobj_core::ppo::{log_probs, ppo_loss, PpoConfig, SceneSteps, StepAction, StepTarget};
use fobj_core::rng::rng_from;
use fobj_core::scenegraph::{encoder_input, encoder_input_dim, PointEncoder, Scene, SuperpointPartition};
use fobj_core::tensor::Mat;
use rand::Rng;

pub const GRAD_TOL: f64 = 1e-4;
pub const GRAD_CASES: u64 = 20;

pub fn seed_policy_err(case: u64) -> f64 {
    let mut rng = rng_from(1000 + case);
    let input = rng.random_range(2..6);
    let hidden = rng.random_range(4..10);
    let blocks = rng.random_range(1..3);
    let n = rng.random_range(2..7);
    let p = SeedPolicy::<f64>::new(input, hidden, blocks, &mut rng);
    let x: Mat<f64> = init_weight(n, input, &mut rng);
    let choice = rng.random_range(0..n);
    let (cv, ce) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let loss = |p: &SeedPolicy<f64>| {
        let (d, v, _) = p.forward(&x).unwrap();
        d.log_prob(choice) + ce * d.entropy() + cv * v
    };
    let (d, _, cache) = p.forward(&x).unwrap();
    let dl: Vec<f64> = d
        .grad_log_prob(choice)
        .iter()
        .zip(d.grad_entropy())
        .map(|(a, b)| a + ce * b)
        .collect();
    let mut g = p.clone();
    zero_grad(&mut g);
    p.backward(&cache, &dl, cv, &mut g);
    max_rel_err(&p, &g, loss).0
}

pub fn merge_policy_err(case: u64) -> f64 {
    let mut rng = rng_from(2000 + case);
    let input = rng.random_range(2..6);
    let hidden = rng.random_range(4..10);
    let blocks = rng.random_range(1..4);
    let n = rng.random_range(1..6);
    let p = MergePolicy::<f64>::new(input, hidden, blocks, &mut rng);
    let region: Vec<f64> = (0..input).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nb: Mat<f64> = init_weight(n, input, &mut rng);
    let chosen: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    let (cv, ce) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let loss = |p: &MergePolicy<f64>| {
        let (d, v, _) = p.forward(&region, &nb).unwrap();
        d.log_prob(&chosen) + ce * d.entropy() + cv * v
    };
    let (d, _, cache) = p.forward(&region, &nb).unwrap();
    let dl: Vec<f64> = d
        .grad_log_prob(&chosen)
        .iter()
        .zip(d.grad_entropy())
        .map(|(a, b)| a + ce * b)
        .collect();
    let mut g = p.clone();
    zero_grad(&mut g);
    p.backward(&cache, &dl, cv, &mut g);
    max_rel_err(&p, &g, loss).0
}

fn random_scene(rng: &mut impl Rng, n: usize, sem_dim: usize) -> Scene {
    let points = (0..n)
        .map(|_| {
            [
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..0.5),
            ]
        })
        .collect();
    let colors = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let feats = (0..n * sem_dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    Scene::new("g", points, colors, vec![-1; n])
        .unwrap()
        .with_features(sem_dim, feats)
        .unwrap()
}

pub fn encoder_err(case: u64) -> f64 {
    let mut rng = rng_from(3000 + case);
    let sem = rng.random_range(0..3);
    let hidden = rng.random_range(3..9);
    let out = rng.random_range(2..6);
    let n = rng.random_range(2..8);
    let scene = random_scene(&mut rng, n, sem);
    let enc = PointEncoder::<f64>::new(encoder_input_dim(sem), hidden, out, &mut rng);
    let x: Mat<f64> = encoder_input(&scene);
    let w: Mat<f64> = init_weight(n, out, &mut rng);
    let loss = |e: &PointEncoder<f64>| -> f64 {
        let (y, _) = e.forward(&x).unwrap();
        y.data.iter().zip(&w.data).map(|(a, b)| a * b).sum()
    };
    let (_, cache) = enc.forward(&x).unwrap();
    let mut g = enc.clone();
    zero_grad(&mut g);
    enc.backward(&cache, &w, &mut g);
    max_rel_err(&enc, &g, loss).0
}

pub fn regressor_err(case: u64) -> f64 {
    let mut rng = rng_from(4000 + case);
    let hidden = rng.random_range(3..9);
    let context = rng.random_range(2..6);
    let n = rng.random_range(3..10);
    let m = CenterRegressor::<f64>::new(hidden, context, &mut rng);
    let x = Mat::from_fn(n, 3, |_, _| rng.random_range(-0.5..0.5));
    let t = Mat::from_fn(n, 3, |_, _| rng.random_range(-0.5..0.5));
    let loss = |m: &CenterRegressor<f64>| CenterRegressor::mse(&m.forward(&x).unwrap().0, &t).0;
    let (y, cache) = m.forward(&x).unwrap();
    let (_, dy) = CenterRegressor::mse(&y, &t);
    let mut g = m.clone();
    zero_grad(&mut g);
    m.backward(&cache, &dy, &mut g);
    max_rel_err(&m, &g, loss).0
}

/// A small scene cut into `k` superpoints with a handful of recorded steps.
pub struct LossFixture {
    pub policies: PolicySet<f64>,
    pub input: Mat<f64>,
    pub partition: SuperpointPartition,
    pub sizes: Vec<f64>,
    pub steps: Vec<StepTarget>,
    pub cfg: PpoConfig,
}

impl LossFixture {
    pub fn scene(&self) -> SceneSteps<'_, f64> {
        SceneSteps {
            input: &self.input,
            partition: &self.partition,
            sizes: &self.sizes,
            steps: self.steps.clone(),
        }
    }

    pub fn loss(&self, p: &PolicySet<f64>) -> f64 {
        ppo_loss(p, &[self.scene()], &self.cfg).unwrap().0.total
    }
}

/// Random fixture. `ratio_offset` picks each step's log-ratio (new minus
/// old) given its advantage.
pub fn loss_fixture(case: u64, ratio_offset: impl Fn(&mut dyn rand::RngCore, f64) -> f64) -> LossFixture {
    let mut rng = rng_from(5000 + case);
    let k = rng.random_range(3..6);
    let n = k * 2 + rng.random_range(0..4);
    let sem = 2;
    let scene = random_scene(&mut rng, n, sem);
    let assignment: Vec<u32> = (0..n)
        .map(|i| if i < k { i as u32 } else { rng.random_range(0..k as u32) })
        .collect();
    let partition = SuperpointPartition::from_assignment(&scene, assignment, 10.0).unwrap();
    let sizes: Vec<f64> = partition.sizes().iter().map(|&s| s as f64).collect();
    let cfg = PolicyConfig {
        hidden: 8,
        feature_dim: 4,
        encoder_hidden: 6,
        seed_blocks: 1,
        merge_blocks: 1,
    };
    let policies = PolicySet::<f64>::new(&cfg, sem, &mut rng);
    let input: Mat<f64> = encoder_input(&scene);

    let mut actions = Vec::new();
    let all: Vec<u32> = (0..k as u32).collect();
    actions.push(StepAction::Seed {
        candidates: all.clone(),
        choice: rng.random_range(0..k),
    });
    for _ in 0..rng.random_range(1..3) {
        let split = rng.random_range(1..k);
        let region = all[..split].to_vec();
        let frontier = all[split..].to_vec();
        let chosen = frontier.iter().map(|_| rng.random()).collect();
        actions.push(StepAction::Merge {
            region,
            frontier,
            chosen,
        });
    }
    let mut steps: Vec<StepTarget> = actions
        .into_iter()
        .map(|action| StepTarget {
            action,
            old_log_prob: 0.0,
            advantage: rng.random_range(-2.0..2.0),
            ret: rng.random_range(-1.0..10.0),
        })
        .collect();
    let mut fx = LossFixture {
        policies,
        input,
        partition,
        sizes,
        steps: Vec::new(),
        cfg: PpoConfig::default(),
    };
    fx.steps = steps.clone();
    let lp = log_probs(&fx.policies, &fx.scene()).unwrap();
    for (s, l) in steps.iter_mut().zip(lp) {
        s.old_log_prob = l - ratio_offset(&mut rng, s.advantage);
    }
    fx.steps = steps;
    fx
}

/// Worst relative gradient error of the full PPO loss, with every ratio
/// kept away from the clip boundaries.
pub fn ppo_loss_err(case: u64) -> f64 {
    let fx = loss_fixture(case, |rng, _| {
        let inside: f64 = rng.random_range(-0.1..0.1);
        if rng.random::<f64>() < 0.3 {
            0.5 * inside.signum() + inside
        } else {
            inside
        }
    });
    let (_, g) = ppo_loss(&fx.policies, &[fx.scene()], &fx.cfg).unwrap();
    max_rel_err(&fx.policies, &g, |p| fx.loss(p)).0
}
