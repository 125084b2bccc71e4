use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::Sample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Sample ids per split. Every base id belongs to exactly one split.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitManifest {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub base_assignment: BTreeMap<String, Split>,
}

impl SplitManifest {
    pub fn ids(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn ids_mut(&mut self, split: Split) -> &mut Vec<String> {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shuffles base ids, orders them by group size (largest first, shuffled
/// order among equal sizes), then hands each group to the split currently
/// furthest below its target sample count (ties to the earlier split).
pub fn group_split<R: Rng + ?Sized>(
    samples: &[Sample],
    fractions: [f64; 3],
    rng: &mut R,
) -> Result<SplitManifest> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples to split".into()));
    }
    let total: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || libm::fabs(total - 1.0) > 1e-9 {
        return Err(Error::Config(format!("split fractions {fractions:?} must sum to 1")));
    }
    let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.base_id.as_str()).or_default().push(s.id.as_str());
    }
    let mut bases: Vec<&str> = groups.keys().copied().collect();
    bases.shuffle(rng);
    bases.sort_by_key(|b| core::cmp::Reverse(groups[b].len()));

    let n = samples.len() as f64;
    let mut counts = [0usize; 3];
    let mut out = SplitManifest::default();
    for base in bases {
        let mut best = 0;
        let mut best_deficit = f64::NEG_INFINITY;
        for (k, f) in fractions.iter().enumerate() {
            let deficit = f * n - counts[k] as f64;
            if deficit > best_deficit {
                best = k;
                best_deficit = deficit;
            }
        }
        let split = Split::ALL[best];
        let ids = &groups[base];
        counts[best] += ids.len();
        out.ids_mut(split).extend(ids.iter().map(|s| String::from(*s)));
        out.base_assignment.insert(base.into(), split);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::BitMask;
    use crate::raster::{ChannelId, GeoTransform};
    use crate::rng::seeded;
    use alloc::vec;

    fn samples(groups: &[usize]) -> Vec<Sample> {
        let grid = GeoTransform::north_up(0.0, 0.0, 1.0, -1.0).unwrap();
        let mut out = Vec::new();
        for (g, &n) in groups.iter().enumerate() {
            for k in 0..n {
                out.push(
                    Sample::new(
                        format!("g{g}_{k}"),
                        format!("g{g}"),
                        vec![ChannelId::Red],
                        vec![0.0],
                        BitMask::zeros(1, 1, grid),
                    )
                    .unwrap(),
                );
            }
        }
        out
    }

    #[test]
    fn single_group_goes_to_train() {
        let m = group_split(&samples(&[7]), [0.7, 0.15, 0.15], &mut seeded(0)).unwrap();
        assert_eq!(m.train.len(), 7);
        assert!(m.val.is_empty() && m.test.is_empty());
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(group_split(&[], [0.7, 0.15, 0.15], &mut seeded(0)), Err(Error::Empty(_))));
    }

    #[test]
    fn full_scale_shares() {
        // 455 scenes of 15 crops each: 6825 samples.
        let s = samples(&[15; 455]);
        let m = group_split(&s, [0.7, 0.15, 0.15], &mut seeded(11)).unwrap();
        assert_eq!(m.len(), 6825);
        for (split, target) in Split::ALL.into_iter().zip([0.7, 0.15, 0.15]) {
            let share = m.ids(split).len() as f64 / 6825.0;
            assert!((share - target).abs() <= 0.05, "{split:?} {share}");
        }
    }

    #[test]
    fn groups_never_straddle_splits() {
        let sizes: Vec<usize> = (0..40).map(|i| 1 + (i * 7) % 13).collect();
        let s = samples(&sizes);
        let m = group_split(&s, [0.7, 0.15, 0.15], &mut seeded(3)).unwrap();
        let split_of = |id: &str| Split::ALL.into_iter().find(|&sp| m.ids(sp).iter().any(|x| x == id)).unwrap();
        for a in &s {
            assert_eq!(split_of(&a.id), m.base_assignment[&a.base_id]);
            for b in &s {
                if a.base_id == b.base_id {
                    assert_eq!(split_of(&a.id), split_of(&b.id));
                }
            }
        }
        assert_eq!(m.len(), s.len());
    }
}
