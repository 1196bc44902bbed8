use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::shapes::{place, Archetype, Shape};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::stream;
use crate::scenegraph::Scene;
use crate::spatial::P3;

/// Room and object layout for [`gen_scene`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub room_x: f64,
    pub room_y: f64,
    pub wall_height: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    pub archetypes: Vec<Archetype>,
    /// Surface samples per square metre.
    pub density: f64,
    pub noise: f64,
    /// Push every object flush against one of the walls.
    pub contact: bool,
    /// Allow objects to stand close together.
    pub clutter: bool,
    /// Side of the colour tiles on the floor and walls.
    pub texture_cell: f64,
    pub max_attempts: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            room_x: 3.0,
            room_y: 3.0,
            wall_height: 1.0,
            min_objects: 3,
            max_objects: 5,
            archetypes: Archetype::ALL.to_vec(),
            density: 300.0,
            noise: 0.002,
            contact: false,
            clutter: false,
            texture_cell: 0.4,
            max_attempts: 100,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("scene spec: {m}")));
        if !(self.room_x > 0.0 && self.room_y > 0.0 && self.wall_height > 0.0) {
            return bad("room extents must be positive");
        }
        if !(self.density > 0.0) {
            return bad("density must be positive");
        }
        if !(self.noise >= 0.0) || !(self.texture_cell > 0.0) {
            return bad("noise must be >= 0 and texture_cell > 0");
        }
        if self.min_objects > self.max_objects {
            return bad("min_objects exceeds max_objects");
        }
        if self.max_objects > 0 && self.archetypes.is_empty() {
            return bad("no archetypes to place");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be >= 1");
        }
        Ok(())
    }
}

/// A generated scene plus the archetype of each instance id.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthScene {
    pub scene: Scene,
    pub classes: Vec<Archetype>,
}

impl SynthScene {
    /// `classes=box,chair,...` for the scene's sidecar metadata.
    pub fn meta(&self) -> (String, String) {
        let names: Vec<&str> = self.classes.iter().map(|a| a.name()).collect();
        ("classes".to_string(), names.join(","))
    }
}

pub fn parse_classes(s: &str) -> Result<Vec<Archetype>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|n| Archetype::parse(n.trim()).ok_or_else(|| Error::format(format!("unknown archetype {n:?}"))))
        .collect()
}

const OBJECT_PALETTE: [[u8; 3]; 10] = [
    [220, 40, 40],
    [40, 170, 60],
    [40, 80, 220],
    [230, 200, 30],
    [200, 40, 200],
    [30, 200, 210],
    [240, 130, 20],
    [120, 50, 180],
    [150, 90, 30],
    [20, 120, 120],
];

fn tile_color(cell: (i64, i64), plane: u64, seed: u64) -> [u8; 3] {
    let h = crate::rng::splitmix64(
        seed ^ plane.wrapping_mul(0x9E37) ^ ((cell.0 as u64) << 32) ^ (cell.1 as u64 & 0xffff_ffff),
    );
    let v = 110 + (h % 90) as u8;
    let tint = ((h >> 8) % 20) as u8;
    [v, v.saturating_sub(tint / 2), v.saturating_sub(tint)]
}

struct Placed {
    shape: Shape,
    yaw: f64,
    center: [f64; 2],
    radius: f64,
}

const TRIES_PER_OBJECT: usize = 50;

/// Places objects one by one; a layout that gets stuck is discarded and
/// restarted, up to `max_attempts` layouts.
fn place_objects(spec: &SceneSpec, n: usize, rng: &mut impl Rng) -> Result<Vec<Placed>> {
    for _ in 0..spec.max_attempts {
        if let Some(p) = try_layout(spec, n, rng) {
            return Ok(p);
        }
    }
    Err(Error::Placement {
        attempts: spec.max_attempts,
        spec: format!("{spec:?}"),
    })
}

fn try_layout(spec: &SceneSpec, n: usize, rng: &mut impl Rng) -> Option<Vec<Placed>> {
    let gap = if spec.clutter { 0.03 } else { 0.15 };
    let margin = 0.02;
    let mut out: Vec<Placed> = Vec::with_capacity(n);
    for _ in 0..n {
        let archetype = spec.archetypes[rng.random_range(0..spec.archetypes.len())];
        let mut done = false;
        for _ in 0..TRIES_PER_OBJECT {
            let shape = Shape::random(archetype, rng);
            let yaw = rng.random::<f64>() * std::f64::consts::TAU;
            let r = shape.footprint_radius();
            if 2.0 * (r + margin) >= spec.room_x.min(spec.room_y) {
                continue;
            }
            let mut c = [
                rng.random_range(r + margin..spec.room_x - r - margin),
                rng.random_range(r + margin..spec.room_y - r - margin),
            ];
            if spec.contact {
                if rng.random::<bool>() {
                    c[0] = r + margin;
                } else {
                    c[1] = r + margin;
                }
            }
            let clear = out.iter().all(|p| {
                let d = ((p.center[0] - c[0]).powi(2) + (p.center[1] - c[1]).powi(2)).sqrt();
                d >= p.radius + r + gap
            });
            if clear {
                out.push(Placed {
                    shape,
                    yaw,
                    center: c,
                    radius: r,
                });
                done = true;
                break;
            }
        }
        if !done {
            return None;
        }
    }
    Some(out)
}

fn count_for(area: f64, density: f64) -> usize {
    (area * density).round().max(1.0) as usize
}

/// Floor plus two walls as tiled background (instance −1) and uniformly
/// coloured objects with consecutive ids from 0.
pub fn gen_scene(spec: &SceneSpec, scene_id: &str, rng: &mut impl Rng) -> Result<SynthScene> {
    spec.validate()?;
    let n_obj = rng.random_range(spec.min_objects..=spec.max_objects);
    let placed = place_objects(spec, n_obj, rng)?;
    let tile_seed: u64 = rng.random();
    let mut palette = OBJECT_PALETTE.to_vec();
    palette.shuffle(rng);

    let mut pts: Vec<P3> = Vec::new();
    let mut colors = Vec::new();
    let mut inst = Vec::new();
    let cell = |v: f64| (v / spec.texture_cell).floor() as i64;

    let (x, y, h) = (spec.room_x, spec.room_y, spec.wall_height);
    for _ in 0..count_for(x * y, spec.density) {
        let p = [rng.random_range(0.0..x), rng.random_range(0.0..y), 0.0];
        colors.push(tile_color((cell(p[0]), cell(p[1])), 0, tile_seed));
        pts.push(p);
        inst.push(-1);
    }
    for _ in 0..count_for(x * h, spec.density) {
        let p = [rng.random_range(0.0..x), 0.0, rng.random_range(0.0..h)];
        colors.push(tile_color((cell(p[0]), cell(p[2])), 1, tile_seed));
        pts.push(p);
        inst.push(-1);
    }
    for _ in 0..count_for(y * h, spec.density) {
        let p = [0.0, rng.random_range(0.0..y), rng.random_range(0.0..h)];
        colors.push(tile_color((cell(p[1]), cell(p[2])), 2, tile_seed));
        pts.push(p);
        inst.push(-1);
    }
    let mut classes = Vec::with_capacity(placed.len());
    for (k, p) in placed.iter().enumerate() {
        let color = palette[k % palette.len()];
        let offset = [p.center[0], p.center[1], 0.0];
        for q in p.shape.sample_surface(count_for(p.shape.area(), spec.density), rng) {
            pts.push(place(&q, p.yaw, &offset));
            colors.push(color);
            inst.push(k as i32);
        }
        classes.push(p.shape.archetype);
    }
    if spec.noise > 0.0 {
        let nd = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
        for p in pts.iter_mut() {
            for v in p.iter_mut() {
                *v += nd.sample(rng);
            }
        }
    }
    let points = pts.iter().map(|p| [p[0] as f32, p[1] as f32, p[2] as f32]).collect();
    Ok(SynthScene {
        scene: Scene::new(scene_id, points, colors, inst)?,
        classes,
    })
}

pub fn scene_name(i: usize) -> String {
    format!("scene_{i:04}")
}

/// `n` scenes, scene `i` drawn from stream `i` of `master`.
pub fn gen_scenes(spec: &SceneSpec, n: usize, master: u64, first: usize) -> Result<Vec<SynthScene>> {
    par::map_range(n, |i| {
        let idx = first + i;
        gen_scene(spec, &scene_name(idx), &mut stream(master, idx as u64))
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn empty_room_is_background() {
        let spec = SceneSpec {
            min_objects: 0,
            max_objects: 0,
            ..Default::default()
        };
        let s = gen_scene(&spec, "e", &mut rng_from(1)).unwrap();
        assert!(s.scene.instances.iter().all(|&i| i == -1));
        assert!(s.classes.is_empty());
    }

    #[test]
    fn deterministic() {
        let spec = SceneSpec::default();
        let a = gen_scene(&spec, "a", &mut rng_from(7)).unwrap();
        let b = gen_scene(&spec, "a", &mut rng_from(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn impossible_layout_reports_spec() {
        let spec = SceneSpec {
            room_x: 1.2,
            room_y: 1.2,
            min_objects: 6,
            max_objects: 6,
            archetypes: vec![Archetype::Table],
            max_attempts: 20,
            ..Default::default()
        };
        match gen_scene(&spec, "x", &mut rng_from(0)) {
            Err(Error::Placement { attempts, spec }) => {
                assert_eq!(attempts, 20);
                assert!(spec.contains("room_x"));
            }
            other => panic!("expected placement failure, got {other:?}"),
        }
    }
}
