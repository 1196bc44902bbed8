//! Training data for the center regressor: normalized objects among planes,
//! observed from a few virtual cameras.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenegraph::{mean_points, Scene};
use crate::spatial::P3;
use crate::synth::shapes::{place, Archetype, Shape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_views: usize,
    pub min_views: usize,
    pub max_views: usize,
    pub max_pitch_deg: f64,
    pub camera_distance: f64,
    pub multi_object_prob: f64,
    pub points_per_object: usize,
    pub points_per_plane: usize,
    pub image_size: usize,
    pub fov_deg: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_views: 12,
            min_views: 2,
            max_views: 4,
            max_pitch_deg: 30.0,
            camera_distance: 2.0,
            multi_object_prob: 0.7,
            points_per_object: 2000,
            points_per_plane: 2000,
            image_size: 64,
            fov_deg: 60.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub azimuth: f64,
    pub pitch: f64,
    pub position: P3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CenterSample {
    pub points: Vec<P3>,
    pub offsets: Vec<P3>,
    /// 0 for the main object, 1.. for extras, -1 for planes.
    pub instances: Vec<i32>,
    pub views: Vec<View>,
    pub chosen_views: Vec<usize>,
    pub multi_object: bool,
}

impl CenterSample {
    pub fn from_parts(points: Vec<P3>, offsets: Vec<P3>) -> Self {
        let n = points.len();
        CenterSample {
            points,
            offsets,
            instances: vec![0; n],
            views: Vec::new(),
            chosen_views: Vec::new(),
            multi_object: false,
        }
    }

    /// Scene-file form with the offsets stored as a 3-channel feature block.
    pub fn to_scene(&self, id: &str) -> Result<Scene> {
        let n = self.points.len();
        let pts = self
            .points
            .iter()
            .map(|p| [p[0] as f32, p[1] as f32, p[2] as f32])
            .collect();
        let feats = self.offsets.iter().flat_map(|o| o.iter().map(|&v| v as f32)).collect();
        Scene::new(id, pts, vec![[128; 3]; n], self.instances.clone())?.with_features(3, feats)
    }
}

fn normalized_shape_points(shape: &Shape, n: usize, rng: &mut impl Rng) -> Vec<P3> {
    let yaw = rng.random::<f64>() * std::f64::consts::TAU;
    let pts: Vec<P3> = shape
        .sample_surface(n, rng)
        .iter()
        .map(|p| place(p, yaw, &[0.0; 3]))
        .collect();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &pts {
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let ext = (0..3).map(|d| hi[d] - lo[d]).fold(0.0, f64::max).max(1e-9);
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0];
    pts.iter()
        .map(|p| [(p[0] - mid[0]) / ext, (p[1] - mid[1]) / ext, (p[2] - mid[2]) / ext])
        .collect()
}

fn sub(a: &P3, b: &P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &P3, b: &P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &P3, b: &P3) -> P3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn unit(a: P3) -> P3 {
    let n = dot(&a, &a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Indices of `points` that win the depth test of a pinhole camera at `eye`
/// looking at the origin.
pub fn visible_points(points: &[P3], eye: &P3, image_size: usize, fov_deg: f64) -> Vec<usize> {
    let fwd = unit(sub(&[0.0; 3], eye));
    let right = unit(cross(&fwd, &[0.0, 0.0, 1.0]));
    let up = cross(&right, &fwd);
    let f = 1.0 / (fov_deg.to_radians() / 2.0).tan();
    let res = image_size as f64;
    let mut zbuf = vec![f64::INFINITY; image_size * image_size];
    let mut pix = vec![usize::MAX; points.len()];
    let mut depth = vec![0.0; points.len()];
    for (i, p) in points.iter().enumerate() {
        let v = sub(p, eye);
        let z = dot(&v, &fwd);
        if z <= 1e-6 {
            continue;
        }
        let u = (dot(&v, &right) / z * f + 1.0) / 2.0 * res;
        let w = (1.0 - dot(&v, &up) / z * f) / 2.0 * res;
        if u < 0.0 || w < 0.0 || u >= res || w >= res {
            continue;
        }
        let k = w as usize * image_size + u as usize;
        pix[i] = k;
        depth[i] = z;
        zbuf[k] = zbuf[k].min(z);
    }
    (0..points.len())
        .filter(|&i| pix[i] != usize::MAX && depth[i] <= zbuf[pix[i]] + 0.02)
        .collect()
}

/// One training sample: a random normalized object, possibly with extra
/// objects, a floor and a wall, seen from 2..=4 of 12 random cameras.
pub fn make_center_training_sample(
    archetypes: &[Archetype],
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<CenterSample> {
    if archetypes.is_empty() {
        return Err(Error::InvalidArgument("need at least one archetype".into()));
    }
    if cfg.min_views == 0 || cfg.min_views > cfg.max_views || cfg.max_views > cfg.n_views {
        return Err(Error::Config(
            "sampler: need 1 <= min_views <= max_views <= n_views".into(),
        ));
    }
    let pick = |rng: &mut dyn rand::RngCore| archetypes[rng.random_range(0..archetypes.len())];

    let mut objects: Vec<Vec<P3>> = Vec::new();
    let main = normalized_shape_points(&Shape::random(pick(rng), rng), cfg.points_per_object, rng);
    let floor_z = main.iter().map(|p| p[2]).fold(f64::INFINITY, f64::min);
    objects.push(main);

    let wall_dir = rng.random::<f64>() * std::f64::consts::TAU;
    let multi_object = rng.random::<f64>() < cfg.multi_object_prob;
    if multi_object {
        let extra = rng.random_range(1..=2);
        let sides = if rng.random::<bool>() { [1.0, -1.0] } else { [-1.0, 1.0] };
        for side in sides.iter().take(extra) {
            let scale = rng.random_range(0.5..1.0);
            let az = wall_dir + side * std::f64::consts::FRAC_PI_2 + rng.random_range(-0.3..0.3);
            let dist = rng.random_range(1.1..1.4);
            let pts = normalized_shape_points(&Shape::random(pick(rng), rng), cfg.points_per_object, rng);
            let bottom = pts.iter().map(|p| p[2]).fold(f64::INFINITY, f64::min) * scale;
            let off = [dist * az.cos(), dist * az.sin(), floor_z - bottom];
            objects.push(
                pts.iter()
                    .map(|p| [p[0] * scale + off[0], p[1] * scale + off[1], p[2] * scale + off[2]])
                    .collect(),
            );
        }
    }

    let mut points = Vec::new();
    let mut offsets = Vec::new();
    let mut instances = Vec::new();
    for (k, obj) in objects.iter().enumerate() {
        let c = mean_points(obj);
        for p in obj {
            points.push(*p);
            offsets.push(sub(&c, p));
            instances.push(k as i32);
        }
    }
    for _ in 0..cfg.points_per_plane {
        points.push([rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), floor_z]);
        offsets.push([0.0; 3]);
        instances.push(-1);
    }
    let wall_d = rng.random_range(0.7..1.0);
    let (wn, wt) = ([wall_dir.cos(), wall_dir.sin()], [-wall_dir.sin(), wall_dir.cos()]);
    for _ in 0..cfg.points_per_plane {
        let t = rng.random_range(-2.0..2.0);
        let z = floor_z + rng.random_range(0.0..1.5);
        points.push([wn[0] * wall_d + wt[0] * t, wn[1] * wall_d + wt[1] * t, z]);
        offsets.push([0.0; 3]);
        instances.push(-1);
    }

    let max_pitch = cfg.max_pitch_deg.to_radians();
    let views: Vec<View> = (0..cfg.n_views)
        .map(|_| {
            let azimuth = rng.random::<f64>() * std::f64::consts::TAU;
            let pitch = rng.random_range(-max_pitch..=max_pitch);
            let d = cfg.camera_distance;
            View {
                azimuth,
                pitch,
                position: [
                    d * pitch.cos() * azimuth.cos(),
                    d * pitch.cos() * azimuth.sin(),
                    d * pitch.sin(),
                ],
            }
        })
        .collect();
    let k = rng.random_range(cfg.min_views..=cfg.max_views);
    let mut order: Vec<usize> = (0..cfg.n_views).collect();
    order.shuffle(rng);
    let mut chosen_views = order[..k].to_vec();
    chosen_views.sort_unstable();

    let mut seen = vec![false; points.len()];
    for &v in &chosen_views {
        for i in visible_points(&points, &views[v].position, cfg.image_size, cfg.fov_deg) {
            seen[i] = true;
        }
    }
    let keep: Vec<usize> = (0..points.len()).filter(|&i| seen[i]).collect();
    Ok(CenterSample {
        points: keep.iter().map(|&i| points[i]).collect(),
        offsets: keep.iter().map(|&i| offsets[i]).collect(),
        instances: keep.iter().map(|&i| instances[i]).collect(),
        views,
        chosen_views,
        multi_object,
    })
}
