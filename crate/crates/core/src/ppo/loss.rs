use super::rollout::{region_feature, to_usize, StepAction, Trajectory};
use super::PpoConfig;
use crate::error::{Error, Result};
use crate::nn::{flatten, zero_grad, Adam, Params};
use crate::par;
use crate::policynet::{PolicySet, TokenCache};
use crate::scenegraph::{aggregate_backward, aggregate_features, SuperpointPartition};
use crate::tensor::{Mat, Real};

/// Generalised advantage estimates and discounted returns for one episode
/// that ends after its last step.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let next = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Clipped surrogate `min(ρA, clip(ρ, 1±ε)A)` and its derivative with
/// respect to the new log-probability.
pub fn clip_objective(ratio: f64, adv: f64, eps: f64) -> (f64, f64) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    if unclipped <= clipped {
        (unclipped, unclipped)
    } else {
        (clipped, 0.0)
    }
}

/// One step prepared for the update.
#[derive(Clone, Debug)]
pub struct StepTarget {
    pub action: StepAction,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Steps of one scene together with what is needed to rebuild features.
pub struct SceneSteps<'a, T> {
    pub input: &'a Mat<T>,
    pub partition: &'a SuperpointPartition,
    pub sizes: &'a [f64],
    pub steps: Vec<StepTarget>,
}

/// Flattens trajectories into targets, standardising advantages over the
/// whole batch.
pub fn build_targets(trajs: &[Vec<Trajectory>], cfg: &PpoConfig) -> Vec<Vec<StepTarget>> {
    let mut out: Vec<Vec<StepTarget>> = Vec::with_capacity(trajs.len());
    let mut all = Vec::new();
    for scene in trajs {
        let mut v = Vec::new();
        for t in scene {
            let (adv, ret) = gae(&t.rewards(), &t.values(), cfg.gamma, cfg.gae_lambda);
            for ((s, a), r) in t.steps.iter().zip(adv).zip(ret) {
                all.push(a);
                v.push(StepTarget {
                    action: s.action.clone(),
                    old_log_prob: s.sample.log_prob,
                    advantage: a,
                    ret: r,
                });
            }
        }
        out.push(v);
    }
    if all.is_empty() {
        return out;
    }
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let std = (all.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    for s in out.iter_mut().flatten() {
        s.advantage = (s.advantage - mean) / (std + cfg.adv_eps);
    }
    out
}

/// Loss components summed over steps (divide by `n_steps` for means).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossStats {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
    pub n_steps: usize,
    pub clip_fraction: f64,
}

impl LossStats {
    fn add(&mut self, o: &LossStats) {
        self.policy += o.policy;
        self.value += o.value;
        self.entropy += o.entropy;
        self.total += o.total;
        self.n_steps += o.n_steps;
        self.clip_fraction += o.clip_fraction;
    }

    pub fn mean(&self) -> LossStats {
        let n = self.n_steps.max(1) as f64;
        LossStats {
            policy: self.policy / n,
            value: self.value / n,
            entropy: self.entropy / n,
            total: self.total / n,
            n_steps: self.n_steps,
            clip_fraction: self.clip_fraction / n,
        }
    }
}

/// Loss of one scene's steps, each weighted by `1/n_total`, accumulating
/// parameter gradients into `grad`.
///
/// Per step: `-c_p·clip + c_v·(V − R)² − c_e·H`.
pub fn scene_loss<T: Real>(
    pol: &PolicySet<T>,
    scene: &SceneSteps<'_, T>,
    cfg: &PpoConfig,
    n_total: usize,
    grad: &mut PolicySet<T>,
) -> Result<LossStats> {
    let (per_point, cache) = pol.encoder.forward(scene.input)?;
    let feats = aggregate_features(&scene.partition.members, &per_point);
    let mut d_feats = Mat::<T>::zeros(feats.rows, feats.cols);
    let w = 1.0 / n_total as f64;
    let mut st = LossStats::default();
    for s in &scene.steps {
        let (logp, ent, value, d_lp, d_ent, back) = match &s.action {
            StepAction::Seed { candidates, choice } => {
                let (d, v, c) = pol.seed.forward(&feats.select_rows(&to_usize(candidates)))?;
                let b = Back::Seed(c, candidates);
                (
                    d.log_prob(*choice),
                    d.entropy(),
                    v,
                    d.grad_log_prob(*choice),
                    d.grad_entropy(),
                    b,
                )
            }
            StepAction::Merge {
                region,
                frontier,
                chosen,
            } => {
                let rf = region_feature(&feats, region, scene.sizes);
                let (d, v, c) = pol.merge.forward(&rf, &feats.select_rows(&to_usize(frontier)))?;
                let b = Back::Merge(c, region, frontier);
                (
                    d.log_prob(chosen),
                    d.entropy(),
                    v,
                    d.grad_log_prob(chosen),
                    d.grad_entropy(),
                    b,
                )
            }
        };
        let ratio = (logp.f64() - s.old_log_prob).exp();
        let (obj, d_obj) = clip_objective(ratio, s.advantage, cfg.clip_ratio);
        let verr = value.f64() - s.ret;
        let step_loss = -cfg.coef_policy * obj + cfg.coef_value * verr * verr - cfg.coef_entropy * ent.f64();
        if !step_loss.is_finite() {
            return Err(Error::Numeric("non-finite PPO loss".into()));
        }
        st.policy += -obj;
        st.value += verr * verr;
        st.entropy += ent.f64();
        st.total += step_loss;
        st.n_steps += 1;
        if (ratio - 1.0).abs() > cfg.clip_ratio {
            st.clip_fraction += 1.0;
        }
        // dL/dlogp = -c_p * d_obj (ratio chain already folded into d_obj).
        let a = T::c(-cfg.coef_policy * d_obj * w);
        let b = T::c(-cfg.coef_entropy * w);
        let d_logits: Vec<T> = d_lp.iter().zip(&d_ent).map(|(g, h)| a * *g + b * *h).collect();
        let d_value = T::c(2.0 * cfg.coef_value * verr * w);
        match back {
            Back::Seed(c, cand) => {
                let dt = pol.seed.backward(&c, &d_logits, d_value, &mut grad.seed);
                for (j, &k) in cand.iter().enumerate() {
                    add_row(&mut d_feats, k as usize, dt.row(j), T::one());
                }
            }
            Back::Merge(c, region, frontier) => {
                let (dr, dn) = pol.merge.backward(&c, &d_logits, d_value, &mut grad.merge);
                for (j, &k) in frontier.iter().enumerate() {
                    add_row(&mut d_feats, k as usize, dn.row(j), T::one());
                }
                let total: f64 = region.iter().map(|&k| scene.sizes[k as usize]).sum();
                for &k in region {
                    add_row(&mut d_feats, k as usize, &dr, T::c(scene.sizes[k as usize] / total));
                }
            }
        }
    }
    let d_pp = aggregate_backward(&scene.partition.members, &d_feats, scene.input.rows);
    pol.encoder.backward(&cache, &d_pp, &mut grad.encoder);
    Ok(st)
}

/// Log-probabilities of the recorded actions under `pol`, through the same
/// forward path the loss uses.
pub fn log_probs<T: Real>(pol: &PolicySet<T>, scene: &SceneSteps<'_, T>) -> Result<Vec<f64>> {
    let (per_point, _) = pol.encoder.forward(scene.input)?;
    let feats = aggregate_features(&scene.partition.members, &per_point);
    scene
        .steps
        .iter()
        .map(|s| {
            Ok(match &s.action {
                StepAction::Seed { candidates, choice } => pol
                    .seed
                    .forward(&feats.select_rows(&to_usize(candidates)))?
                    .0
                    .log_prob(*choice)
                    .f64(),
                StepAction::Merge {
                    region,
                    frontier,
                    chosen,
                } => {
                    let rf = region_feature(&feats, region, scene.sizes);
                    pol.merge
                        .forward(&rf, &feats.select_rows(&to_usize(frontier)))?
                        .0
                        .log_prob(chosen)
                        .f64()
                }
            })
        })
        .collect()
}

enum Back<'a, T> {
    Seed(TokenCache<T>, &'a [u32]),
    Merge(TokenCache<T>, &'a [u32], &'a [u32]),
}

fn add_row<T: Real>(m: &mut Mat<T>, i: usize, src: &[T], s: T) {
    for (o, v) in m.row_mut(i).iter_mut().zip(src) {
        *o += s * *v;
    }
}

/// Mean loss over every step of `scenes` and its gradient.
pub fn ppo_loss<T: Real>(
    pol: &PolicySet<T>,
    scenes: &[SceneSteps<'_, T>],
    cfg: &PpoConfig,
) -> Result<(LossStats, PolicySet<T>)> {
    let n_total: usize = scenes.iter().map(|s| s.steps.len()).sum();
    let mut grad = pol.clone();
    zero_grad(&mut grad);
    if n_total == 0 {
        return Ok((LossStats::default(), grad));
    }
    let parts = par::map(scenes, |_, s| {
        let mut g = pol.clone();
        zero_grad(&mut g);
        scene_loss(pol, s, cfg, n_total, &mut g).map(|st| (st, g))
    });
    let mut st = LossStats::default();
    for p in parts {
        let (s, g) = p?;
        st.add(&s);
        add_params(&mut grad, &g);
    }
    let n = n_total as f64;
    st.total /= n;
    Ok((
        LossStats {
            policy: st.policy / n,
            value: st.value / n,
            entropy: st.entropy / n,
            total: st.total,
            n_steps: n_total,
            clip_fraction: st.clip_fraction / n,
        },
        grad,
    ))
}

/// `dst += src`, elementwise over matching parameter layouts.
pub fn add_params<T: Real, P: Params<T>>(dst: &mut P, src: &P) {
    let flat = flatten(src);
    let mut off = 0;
    dst.visit_mut(&mut |_, m| {
        for x in m.data.iter_mut() {
            *x += flat[off];
            off += 1;
        }
    });
}

/// `ppo_epochs` gradient steps on one collected batch. Returns the stats of
/// the first step.
pub fn ppo_update(
    pol: &mut PolicySet<f32>,
    opt: &mut Adam<f32>,
    scenes: &[SceneSteps<'_, f32>],
    cfg: &PpoConfig,
) -> Result<LossStats> {
    let mut first = None;
    for _ in 0..cfg.ppo_epochs {
        let (st, grad) = ppo_loss(pol, scenes, cfg)?;
        if st.n_steps == 0 {
            return Ok(st);
        }
        opt.step(pol, &grad);
        first.get_or_insert(st);
    }
    Ok(first.unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gae_oracle(r: &[f64], v: &[f64], g: f64, l: f64) -> Vec<f64> {
        // A_t = sum_k (g l)^k delta_{t+k}
        let n = r.len();
        let delta: Vec<f64> = (0..n)
            .map(|t| r[t] + g * if t + 1 < n { v[t + 1] } else { 0.0 } - v[t])
            .collect();
        (0..n)
            .map(|t| (t..n).map(|k| (g * l).powi((k - t) as i32) * delta[k]).sum())
            .collect()
    }

    #[test]
    fn gae_matches_direct_sum() {
        let r = [0.0, -1.0, -1.0, 10.0];
        let v = [0.5, 0.2, -0.3, 1.0];
        let (a, ret) = gae(&r, &v, 0.9, 0.9);
        let want = gae_oracle(&r, &v, 0.9, 0.9);
        for i in 0..4 {
            assert!((a[i] - want[i]).abs() < 1e-12);
            assert!((ret[i] - (a[i] + v[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn gae_with_unit_lambda_is_monte_carlo() {
        let r = [0.0, -1.0, 10.0];
        let v = [0.3, 0.1, 0.2];
        let (_, ret) = gae(&r, &v, 0.9, 1.0);
        assert!((ret[0] - (0.0 - 0.9 + 0.81 * 10.0)).abs() < 1e-12);
    }

    #[test]
    fn clip_gradient_vanishes_outside_trust_region() {
        assert_eq!(clip_objective(1.5, 1.0, 0.2), (1.2, 0.0));
        assert_eq!(clip_objective(1.1, 1.0, 0.2), (1.1, 1.1));
        assert_eq!(clip_objective(0.5, -1.0, 0.2), (-0.8, 0.0));
        let (v, g) = clip_objective(0.5, 1.0, 0.2);
        assert_eq!((v, g), (0.5, 0.5));
    }
}
