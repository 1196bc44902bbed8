//! One PASS/FAIL line per acceptance criterion. Exits non-zero on any failure.

mod common;

use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use common::*;
use fobj_core::evalap::{evaluate_ap, GroundTruth, Prediction};
use fobj_core::geomreward::{
    dbscan, make_center_training_sample, mixed_candidate_fixture, single_object_fixture, verify_center_consistency,
    GeoConfig, SamplerConfig, REWARD_OBJECT, REWARD_REJECT,
};
use fobj_core::nn::flatten;
use fobj_core::ppo::{clip_objective, gae, ppo_loss};
use fobj_core::rng::rng_from;
use fobj_core::semreward::{cut_cost, Affinity, CandidateMask};
use fobj_core::spatial::{dist2, P3};
use fobj_core::suite::{run_benchmark, BenchmarkConfig};
use fobj_core::synth::Archetype;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_affinity(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let mut w = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            if rng.random::<f64>() < 0.4 {
                let v = rng.random_range(0.0..1.0);
                w[i * k + j] = v;
                w[j * k + i] = v;
            }
        }
    }
    w
}

fn cut_cost_brute(w: &[f64], k: usize, mask: &[bool]) -> f64 {
    let (mut cut, mut vol) = (0.0, 0.0);
    for i in 0..k {
        if !mask[i] {
            continue;
        }
        for j in 0..k {
            vol += w[i * k + j];
            if !mask[j] {
                cut += w[i * k + j];
            }
        }
    }
    if vol == 0.0 {
        f64::INFINITY
    } else {
        cut / vol
    }
}

fn cut_cost_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = rng_from(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(1..=64);
        let w = random_affinity(&mut rng, k);
        let mut ids: Vec<u32> = (0..k as u32).filter(|_| rng.random::<bool>()).collect();
        if ids.is_empty() {
            ids.push(rng.random_range(0..k as u32));
        }
        let mask = CandidateMask::new(ids, k).unwrap();
        let fast = cut_cost(&Affinity::from_dense(k, w.clone()).unwrap(), &mask).unwrap();
        let slow = cut_cost_brute(&w, k, &mask.flags());
        let err = if fast.is_infinite() && slow.is_infinite() {
            0.0
        } else {
            (fast - slow).abs()
        };
        worst = worst.max(err);
    }
    let k = 8;
    let mut w = random_affinity(&mut rng, k);
    for j in 1..k {
        w[j] = 0.5;
        w[j * k] = 0.5;
    }
    let a = Affinity::from_dense(k, w).unwrap();
    let full = cut_cost(&a, &CandidateMask::new((0..k as u32).collect(), k).unwrap()).unwrap();
    let single = cut_cost(&a, &CandidateMask::new(vec![0], k).unwrap()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst < 1e-9 && full == 0.0 && single == 1.0 && secs < 10.0,
        format!("max |err| {worst:.2e}, full {full}, single {single}, {secs:.2}s"),
    )
}

/// Reference clustering straight from the definition on the eps-graph.
fn dbscan_brute(points: &[P3], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = points.len();
    let eps2 = eps * eps;
    let nb: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist2(&points[i], &points[j]) <= eps2).collect())
        .collect();
    let core: Vec<bool> = nb.iter().map(|v| v.len() >= min_pts).collect();
    let mut comp = vec![usize::MAX; n];
    let mut n_comp = 0;
    for s in 0..n {
        if !core[s] || comp[s] != usize::MAX {
            continue;
        }
        comp[s] = n_comp;
        let mut queue = VecDeque::from([s]);
        while let Some(i) = queue.pop_front() {
            for &j in &nb[i] {
                if core[j] && comp[j] == usize::MAX {
                    comp[j] = n_comp;
                    queue.push_back(j);
                }
            }
        }
        n_comp += 1;
    }
    let mut label = vec![-1i32; n];
    for i in 0..n {
        if core[i] {
            label[i] = comp[i] as i32;
        } else if let Some(c) = nb[i].iter().filter(|&&j| core[j]).map(|&j| comp[j]).min() {
            label[i] = c as i32;
        }
    }
    label
}

fn same_partition(a: &[i32], b: &[i32]) -> bool {
    let mut fwd = BTreeMap::new();
    let mut back = BTreeMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        if (x < 0) != (y < 0) {
            return false;
        }
        if x < 0 {
            return true;
        }
        *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x
    })
}

fn dbscan_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = rng_from(12);
    let mut bad = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=200);
        let n_blobs = rng.random_range(1..5);
        let centers: Vec<P3> = (0..n_blobs)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        let spread = rng.random_range(0.02..0.2);
        let points: Vec<P3> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.2 {
                    [rng.random(), rng.random(), rng.random()]
                } else {
                    let c = centers[rng.random_range(0..n_blobs)];
                    [0, 1, 2].map(|d| c[d] + rng.random_range(-spread..spread))
                }
            })
            .collect();
        let eps = rng.random_range(0.01..0.15);
        let min_pts = rng.random_range(1..10);
        if !same_partition(&dbscan(&points, eps, min_pts), &dbscan_brute(&points, eps, min_pts)) {
            bad += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(bad == 0 && secs < 30.0, format!("{bad}/200 mismatches, {secs:.2}s"))
}

fn gae_oracle() -> Outcome {
    let mut rng = rng_from(13);
    let (gamma, lambda) = (0.9, 0.9);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let t_len = rng.random_range(1..=5);
        let r: Vec<f64> = (0..t_len)
            .map(|_| if rng.random::<bool>() { 10.0 } else { -1.0 })
            .collect();
        let v: Vec<f64> = (0..t_len).map(|_| rng.random_range(-5.0..10.0)).collect();
        let (adv, _) = gae(&r, &v, gamma, lambda);
        let delta: Vec<f64> = (0..t_len)
            .map(|t| r[t] + gamma * v.get(t + 1).copied().unwrap_or(0.0) - v[t])
            .collect();
        for (t, a) in adv.iter().enumerate() {
            let direct: f64 = (t..t_len)
                .map(|k| (gamma * lambda).powi((k - t) as i32) * delta[k])
                .sum();
            worst = worst.max((direct - a).abs());
        }
    }
    outcome(worst < 1e-10, format!("max |err| {worst:.2e}"))
}

type ErrFn = fn(u64) -> f64;

fn gradient_checks() -> Outcome {
    let t = Instant::now();
    let nets: [(&str, ErrFn); 5] = [
        ("seed", seed_policy_err),
        ("merge", merge_policy_err),
        ("encoder", encoder_err),
        ("center", regressor_err),
        ("ppo", ppo_loss_err),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, f) in nets {
        let worst = (0..GRAD_CASES).map(f).fold(0.0, f64::max);
        pass &= worst < GRAD_TOL;
        parts.push(format!("{name} {worst:.1e}"));
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= secs < 300.0;
    outcome(
        pass,
        format!("{} cases each: {}, {secs:.1}s", GRAD_CASES, parts.join(", ")),
    )
}

fn clip_property() -> Outcome {
    let mut rng = rng_from(14);
    let mut nonzero = 0;
    for _ in 0..10_000 {
        let adv = rng.random_range(0.01..5.0);
        let (_, d) = clip_objective(rng.random_range(1.2000001..5.0), adv, 0.2);
        let (_, e) = clip_objective(rng.random_range(0.0..0.7999999), -adv, 0.2);
        nonzero += usize::from(d != 0.0) + usize::from(e != 0.0);
    }
    for case in 0..GRAD_CASES {
        let mut fx = loss_fixture(case, |_, adv| if adv > 0.0 { 1.5f64.ln() } else { 0.6f64.ln() });
        fx.cfg.coef_value = 0.0;
        fx.cfg.coef_entropy = 0.0;
        let (_, g) = ppo_loss(&fx.policies, &[fx.scene()], &fx.cfg).unwrap();
        nonzero += flatten(&g).iter().filter(|&&v| v != 0.0).count();
    }
    outcome(nonzero == 0, format!("{nonzero} non-zero gradient entries"))
}

fn geometric_fixtures() -> Outcome {
    let cfg = GeoConfig::default();
    let (p, o) = single_object_fixture(200);
    let single = verify_center_consistency(&p, &o, &cfg).unwrap().reward;
    let (p, o) = mixed_candidate_fixture(40, 160);
    let mixed = verify_center_consistency(&p, &o, &cfg).unwrap().reward;
    outcome(
        single == REWARD_OBJECT && mixed == REWARD_REJECT,
        format!("single object {single:+}, 20/80 mixture {mixed:+}"),
    )
}

fn ap_fixtures() -> Outcome {
    let gt: GroundTruth = [("s".to_string(), vec![(0..10).collect(), (10..20).collect()])]
        .into_iter()
        .collect();
    let pred = |points: Vec<u32>, confidence: f64| Prediction {
        scene_id: "s".into(),
        points,
        confidence,
    };
    let perfect = evaluate_ap(&[pred((0..10).collect(), 0.4), pred((10..20).collect(), 0.8)], &gt).unwrap();
    let partial = evaluate_ap(&[pred((4..10).collect(), 0.7)], &gt).unwrap();
    let mixed = vec![
        pred((0..8).collect(), 0.9),
        pred((5..15).collect(), 0.6),
        pred((12..20).collect(), 0.3),
    ];
    let base = evaluate_ap(&mixed, &gt).unwrap();
    let scaled: Vec<Prediction> = mixed
        .iter()
        .map(|p| pred(p.points.clone(), p.confidence * 0.25))
        .collect();
    let again = evaluate_ap(&scaled, &gt).unwrap();
    let perfect_ok = perfect.ap == 1.0 && perfect.ap50 == 1.0 && perfect.ap25 == 1.0;
    let partial_ok = partial.ap50 == 0.5 && (partial.ap - 0.15).abs() < 1e-12;
    let invariant = base == again;
    outcome(
        perfect_ok && partial_ok && invariant,
        format!(
            "perfect {}/{}/{}, IoU-0.6 fixture AP@50 {} AP {:.4}, scaling invariant {invariant}",
            perfect.ap, perfect.ap50, perfect.ap25, partial.ap50, partial.ap
        ),
    )
}

fn sampler_statistics() -> Outcome {
    let cfg = SamplerConfig::default();
    let mut rng = rng_from(15);
    let (mut multi, mut views_ok, mut dist_ok, mut pitch_ok) = (0usize, true, true, true);
    let limit = 30f64.to_radians();
    for _ in 0..1000 {
        let s = make_center_training_sample(&Archetype::ALL, &cfg, &mut rng).unwrap();
        multi += usize::from(s.multi_object);
        views_ok &= (2..=4).contains(&s.chosen_views.len());
        for v in &s.views {
            let d = v.position.iter().map(|c| c * c).sum::<f64>().sqrt();
            dist_ok &= (d - 2.0).abs() < 1e-12;
            pitch_ok &= v.pitch.abs() <= limit;
        }
    }
    let frac = multi as f64 / 1000.0;
    outcome(
        (frac - 0.7).abs() <= 0.043 && views_ok && dist_ok && pitch_ok,
        format!(
            "multi-object {frac:.3}, views in 2..=4 {views_ok}, distance 2 {dist_ok}, pitch within 30 deg {pitch_ok}"
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    };
    report("cut-cost oracle", cut_cost_oracle());
    report("dbscan oracle", dbscan_oracle());
    report("gae oracle", gae_oracle());
    report("gradient checks", gradient_checks());
    report("ppo clip", clip_property());
    report("geometric fixtures", geometric_fixtures());
    report("ap fixtures", ap_fixtures());
    report("sampler statistics", sampler_statistics());

    let cfg = BenchmarkConfig::default();
    let bench = run_benchmark(&cfg, |s| {
        eprintln!(
            "  seed {}: AP@50 {:.3} (untrained {:.3}), reward {:.2} -> {:.2}, {:.0}s",
            s.master, s.trained.ap50, s.baseline.ap50, s.reward_first, s.reward_last, s.seconds
        );
    });
    match bench {
        Err(e) => {
            for name in ["end-to-end benchmark", "discovery dynamics", "cleaning"] {
                report(name, outcome(false, format!("benchmark failed: {e}")));
            }
        }
        Ok(b) => {
            let ratio = b.median_ap50 / b.median_baseline_ap50.max(1e-12);
            let rewards = fobj_core::suite::median(
                &b.seeds
                    .iter()
                    .map(|s| s.reward_last - s.reward_first)
                    .collect::<Vec<_>>(),
            );
            report(
                "end-to-end benchmark",
                outcome(
                    b.median_ap50 >= 0.5 && ratio >= 3.0 && rewards > 0.0 && b.seconds < 1800.0,
                    format!(
                        "median AP@50 {:.3}, untrained {:.3} ({ratio:.1}x), median reward gain {rewards:+.2}, {:.0}s",
                        b.median_ap50, b.median_baseline_ap50, b.seconds
                    ),
                ),
            );
            let med = &b.seeds[b.median_seed()];
            let cps = &med.stats.rows;
            let cumulative = cps.windows(2).all(|w| w[0].n_objects <= w[1].n_objects);
            let shrinking = cps.len() >= 2 && cps[cps.len() - 1].n_new < cps[0].n_new;
            let counts: Vec<String> = cps
                .iter()
                .map(|c| format!("{}:{}/{}", c.epoch, c.n_objects, c.n_new))
                .collect();
            report(
                "discovery dynamics",
                outcome(
                    cumulative && shrinking,
                    format!("seed {} total/new {}", med.master, counts.join(" ")),
                ),
            );
            let pairs: Vec<(f64, f64)> = b
                .seeds
                .iter()
                .filter_map(|s| Some((s.pseudo_raw.as_ref()?.ap, s.pseudo_clean.as_ref()?.ap)))
                .collect();
            let ok = pairs.len() == b.seeds.len() && pairs.iter().all(|(r, c)| c >= r);
            let shown: Vec<String> = pairs.iter().map(|(r, c)| format!("{r:.3}->{c:.3}")).collect();
            report("cleaning", outcome(ok, format!("raw->cleaned AP {}", shown.join(", "))));
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
