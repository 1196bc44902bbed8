use serde::{Deserialize, Serialize};

use super::{iou, GroundTruth};

/// A mask first found at `epoch` in scene `scene_id`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveredMask {
    pub scene_id: String,
    pub points: Vec<u32>,
    pub epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub epoch: usize,
    pub n_objects: usize,
    pub accuracy: f64,
    pub n_new: usize,
    pub accuracy_new: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryStats {
    pub rows: Vec<CheckpointStats>,
}

impl DiscoveryStats {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,n_objects,accuracy,n_new,accuracy_new\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.n_objects, r.accuracy, r.n_new, r.accuracy_new
            ));
        }
        s
    }
}

pub const UNIQUE_IOU: f64 = 0.8;

/// Counts unique and newly found masks at each checkpoint epoch. A mask is
/// unique unless it overlaps an earlier mask of its scene with IoU above 0.8;
/// it is accurate when some GT mask overlaps it with IoU above 0.5.
pub fn discovery_stats(masks: &[DiscoveredMask], gt: &GroundTruth, checkpoints: &[usize]) -> DiscoveryStats {
    let mut order: Vec<usize> = (0..masks.len()).collect();
    order.sort_by_key(|&i| (masks[i].epoch, i));
    let mut unique: Vec<(usize, bool)> = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let m = &masks[i];
        let repeat = order[..pos]
            .iter()
            .any(|&j| masks[j].scene_id == m.scene_id && iou(&masks[j].points, &m.points) > UNIQUE_IOU);
        if !repeat {
            let accurate = gt
                .get(&m.scene_id)
                .is_some_and(|gs| gs.iter().any(|g| iou(&m.points, g) > 0.5));
            unique.push((m.epoch, accurate));
        }
    }
    let frac = |xs: &[&(usize, bool)]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().filter(|(_, a)| *a).count() as f64 / xs.len() as f64
        }
    };
    let mut rows = Vec::new();
    let mut prev: Option<usize> = None;
    for &c in checkpoints {
        let upto: Vec<&(usize, bool)> = unique.iter().filter(|(e, _)| *e <= c).collect();
        let new: Vec<&(usize, bool)> = upto
            .iter()
            .copied()
            .filter(|(e, _)| prev.is_none_or(|p| *e > p))
            .collect();
        rows.push(CheckpointStats {
            epoch: c,
            n_objects: upto.len(),
            accuracy: frac(&upto),
            n_new: new.len(),
            accuracy_new: frac(&new),
        });
        prev = Some(c);
    }
    DiscoveryStats { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(points: Vec<u32>, epoch: usize) -> DiscoveredMask {
        DiscoveredMask {
            scene_id: "s".into(),
            points,
            epoch,
        }
    }

    #[test]
    fn repeated_and_new() {
        let gt: GroundTruth = [("s".to_string(), vec![(0..10).collect::<Vec<u32>>()])]
            .into_iter()
            .collect();
        let masks = vec![
            m((0..10).collect(), 1),
            m((0..10).collect(), 2),
            m((20..30).collect(), 2),
        ];
        let s = discovery_stats(&masks, &gt, &[1, 2]);
        assert_eq!(s.rows[0].n_objects, 1);
        assert_eq!(s.rows[0].n_new, 1);
        assert_eq!(s.rows[0].accuracy, 1.0);
        assert_eq!(s.rows[1].n_objects, 2);
        assert_eq!(s.rows[1].n_new, 1);
        assert_eq!(s.rows[1].accuracy_new, 0.0);
        let single = discovery_stats(&masks, &gt, &[2]);
        assert_eq!(single.rows[0].n_new, single.rows[0].n_objects);
        let empty = discovery_stats(&[], &gt, &[1, 2]);
        assert!(empty.rows.iter().all(|r| r.n_objects == 0 && r.accuracy == 0.0));
    }
}
