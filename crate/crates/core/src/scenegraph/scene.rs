use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::spatial::P3;

/// A scanned (or synthesised) room: points with colour, optional per-point
/// semantic features and ground-truth instance ids (`-1` = background).
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub scene_id: String,
    pub points: Vec<[f32; 3]>,
    pub colors: Vec<[u8; 3]>,
    pub feat_dim: usize,
    /// Row-major `n_points x feat_dim`; empty when `feat_dim == 0`.
    pub features: Vec<f32>,
    pub instances: Vec<i32>,
}

impl Scene {
    pub fn new(
        scene_id: impl Into<String>,
        points: Vec<[f32; 3]>,
        colors: Vec<[u8; 3]>,
        instances: Vec<i32>,
    ) -> Result<Self> {
        let scene = Scene {
            scene_id: scene_id.into(),
            points,
            colors,
            feat_dim: 0,
            features: Vec::new(),
            instances,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn with_features(mut self, feat_dim: usize, features: Vec<f32>) -> Result<Self> {
        self.feat_dim = feat_dim;
        self.features = features;
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if self.colors.len() != n || self.instances.len() != n {
            return Err(Error::dims(format!(
                "{} points, {} colors, {} instance ids",
                n,
                self.colors.len(),
                self.instances.len()
            )));
        }
        if self.features.len() != n * self.feat_dim {
            return Err(Error::dims(format!(
                "feature block has {} values, expected {} x {}",
                self.features.len(),
                n,
                self.feat_dim
            )));
        }
        if self.points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        if self.instances.iter().any(|&i| i < -1) {
            return Err(Error::InvalidArgument("instance ids must be >= -1".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn point(&self, i: usize) -> P3 {
        let p = self.points[i];
        [p[0] as f64, p[1] as f64, p[2] as f64]
    }

    pub fn points_f64(&self) -> Vec<P3> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// RGB scaled to `[0, 1]`.
    #[inline]
    pub fn color(&self, i: usize) -> [f64; 3] {
        let c = self.colors[i];
        [c[0] as f64 / 255.0, c[1] as f64 / 255.0, c[2] as f64 / 255.0]
    }

    pub fn feature(&self, i: usize) -> &[f32] {
        &self.features[i * self.feat_dim..(i + 1) * self.feat_dim]
    }

    pub fn centroid(&self) -> P3 {
        mean_of(self.points_f64().iter())
    }

    /// Ground-truth object masks keyed by instance id (background excluded).
    pub fn gt_masks(&self) -> BTreeMap<i32, Vec<u32>> {
        let mut out: BTreeMap<i32, Vec<u32>> = BTreeMap::new();
        for (i, &id) in self.instances.iter().enumerate() {
            if id >= 0 {
                out.entry(id).or_default().push(i as u32);
            }
        }
        out
    }

    /// Mean coordinate of every ground-truth instance.
    pub fn gt_centroids(&self) -> BTreeMap<i32, P3> {
        self.gt_masks()
            .into_iter()
            .map(|(id, idx)| {
                (
                    id,
                    mean_of(idx.iter().map(|&i| self.point(i as usize)).collect::<Vec<_>>().iter()),
                )
            })
            .collect()
    }
}

pub(crate) fn mean_of<'a>(pts: impl Iterator<Item = &'a P3>) -> P3 {
    let mut acc = [0.0; 3];
    let mut n = 0usize;
    for p in pts {
        for d in 0..3 {
            acc[d] += p[d];
        }
        n += 1;
    }
    if n > 0 {
        for a in &mut acc {
            *a /= n as f64;
        }
    }
    acc
}

/// Arithmetic mean of `pts`; the origin when empty.
pub fn mean_points(pts: &[P3]) -> P3 {
    mean_of(pts.iter())
}
