use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::spatial::P3;

/// Object families built from primitives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Archetype {
    Box,
    Cylinder,
    Table,
    Chair,
}

impl Archetype {
    pub const ALL: [Archetype; 4] = [Archetype::Box, Archetype::Cylinder, Archetype::Table, Archetype::Chair];

    /// Stable class index used for semantic embeddings (background is 0).
    pub fn class_id(self) -> usize {
        self as usize + 1
    }

    pub fn from_class_id(id: usize) -> Option<Self> {
        Self::ALL.get(id.checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Archetype::Box => "box",
            Archetype::Cylinder => "cylinder",
            Archetype::Table => "table",
            Archetype::Chair => "chair",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    Cuboid {
        center: P3,
        half: P3,
    },
    /// Vertical cylinder.
    Cylinder {
        center: P3,
        radius: f64,
        half_h: f64,
    },
}

impl Primitive {
    pub fn area(&self) -> f64 {
        match *self {
            Primitive::Cuboid { half: h, .. } => 8.0 * (h[0] * h[1] + h[1] * h[2] + h[0] * h[2]),
            Primitive::Cylinder { radius, half_h, .. } => 2.0 * std::f64::consts::PI * radius * (radius + 2.0 * half_h),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> P3 {
        match *self {
            Primitive::Cuboid { center: c, half: h } => {
                let areas = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
                let total: f64 = areas.iter().sum();
                let mut t = rng.random::<f64>() * total;
                let mut axis = 2;
                for (i, a) in areas.iter().enumerate() {
                    if t < *a {
                        axis = i;
                        break;
                    }
                    t -= a;
                }
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let mut p = [0.0; 3];
                for d in 0..3 {
                    p[d] = if d == axis {
                        c[d] + sign * h[d]
                    } else {
                        c[d] + rng.random_range(-h[d]..=h[d])
                    };
                }
                p
            }
            Primitive::Cylinder {
                center: c,
                radius,
                half_h,
            } => {
                let side = 2.0 * radius * half_h * 2.0;
                let cap = radius * radius;
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                if rng.random::<f64>() * (side + 2.0 * cap) < side {
                    [
                        c[0] + radius * theta.cos(),
                        c[1] + radius * theta.sin(),
                        c[2] + rng.random_range(-half_h..=half_h),
                    ]
                } else {
                    let r = radius * rng.random::<f64>().sqrt();
                    let z = if rng.random::<bool>() { half_h } else { -half_h };
                    [c[0] + r * theta.cos(), c[1] + r * theta.sin(), c[2] + z]
                }
            }
        }
    }
}

/// An object in its local frame: footprint centred on the origin, resting on
/// `z = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Shape {
    pub archetype: Archetype,
    pub parts: Vec<Primitive>,
}

fn cuboid(x: f64, y: f64, z: f64, hx: f64, hy: f64, hz: f64) -> Primitive {
    Primitive::Cuboid {
        center: [x, y, z],
        half: [hx, hy, hz],
    }
}

impl Shape {
    pub fn random(archetype: Archetype, rng: &mut impl Rng) -> Self {
        let parts = match archetype {
            Archetype::Box => {
                let (hx, hy, hz) = (
                    rng.random_range(0.15..0.3),
                    rng.random_range(0.15..0.3),
                    rng.random_range(0.15..0.4),
                );
                vec![cuboid(0.0, 0.0, hz, hx, hy, hz)]
            }
            Archetype::Cylinder => {
                let r = rng.random_range(0.12..0.25);
                let hh = rng.random_range(0.15..0.4);
                vec![Primitive::Cylinder {
                    center: [0.0, 0.0, hh],
                    radius: r,
                    half_h: hh,
                }]
            }
            Archetype::Table => {
                let (hx, hy) = (rng.random_range(0.3..0.5), rng.random_range(0.25..0.4));
                let h = rng.random_range(0.6..0.8);
                let t = 0.025;
                let leg = 0.03;
                let mut p = vec![cuboid(0.0, 0.0, h - t, hx, hy, t)];
                let lh = (h - 2.0 * t) / 2.0;
                for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
                    p.push(cuboid(sx * (hx - leg), sy * (hy - leg), lh, leg, leg, lh));
                }
                p
            }
            Archetype::Chair => {
                let s = rng.random_range(0.2..0.26);
                let sh = rng.random_range(0.4..0.5);
                let bh = rng.random_range(0.35..0.5) / 2.0;
                let t = 0.025;
                let leg = 0.025;
                let mut p = vec![cuboid(0.0, 0.0, sh - t, s, s, t), cuboid(0.0, s - t, sh + bh, s, t, bh)];
                let lh = (sh - 2.0 * t) / 2.0;
                for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
                    p.push(cuboid(sx * (s - leg), sy * (s - leg), lh, leg, leg, lh));
                }
                p
            }
        };
        Shape { archetype, parts }
    }

    pub fn area(&self) -> f64 {
        self.parts.iter().map(Primitive::area).sum()
    }

    /// Axis-aligned bounds `(lo, hi)` in the local frame.
    pub fn bounds(&self) -> (P3, P3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.parts {
            let (c, h) = match *p {
                Primitive::Cuboid { center, half } => (center, half),
                Primitive::Cylinder { center, radius, half_h } => (center, [radius, radius, half_h]),
            };
            for d in 0..3 {
                lo[d] = lo[d].min(c[d] - h[d]);
                hi[d] = hi[d].max(c[d] + h[d]);
            }
        }
        (lo, hi)
    }

    /// Radius of the footprint circle around the local origin.
    pub fn footprint_radius(&self) -> f64 {
        let (lo, hi) = self.bounds();
        let x = lo[0].abs().max(hi[0].abs());
        let y = lo[1].abs().max(hi[1].abs());
        (x * x + y * y).sqrt()
    }

    /// `n` surface points, parts chosen in proportion to their area.
    pub fn sample_surface(&self, n: usize, rng: &mut impl Rng) -> Vec<P3> {
        let areas: Vec<f64> = self.parts.iter().map(Primitive::area).collect();
        let total: f64 = areas.iter().sum();
        (0..n)
            .map(|_| {
                let mut t = rng.random::<f64>() * total;
                let mut idx = areas.len() - 1;
                for (i, a) in areas.iter().enumerate() {
                    if t < *a {
                        idx = i;
                        break;
                    }
                    t -= a;
                }
                self.parts[idx].sample(rng)
            })
            .collect()
    }
}

/// Rotates about the vertical axis by `yaw` then translates.
pub fn place(p: &P3, yaw: f64, offset: &P3) -> P3 {
    let (s, c) = yaw.sin_cos();
    [
        c * p[0] - s * p[1] + offset[0],
        s * p[0] + c * p[1] + offset[1],
        p[2] + offset[2],
    ]
}
