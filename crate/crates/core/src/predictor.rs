//! Depth-limited random forest boundary predictor, built from scratch.
//!
//! Trees are grown on bootstrap resamples with sqrt(d) random candidate
//! features per split, Gini impurity, and a hard depth bound. Leaves store
//! the class-1 fraction of their samples; the forest prediction is the mean
//! leaf value across trees, a confidence in [0, 1]. Training is fully
//! deterministic given the seed.

use rand::{Rng, RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng::{SplitMix64, Xoshiro256StarStar};
use crate::Result;

/// Serialization format version; bump on layout changes.
pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 50,
            max_depth: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        p1: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { p1 } => return *p1,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Longest root-to-leaf path, in edges.
    fn max_path_len(&self) -> usize {
        fn depth(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + depth(nodes, *left).max(depth(nodes, *right))
                }
            }
        }
        depth(&self.nodes, 0)
    }
}

/// Trained forest mapping feature vectors to boundary confidence in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    format_version: u32,
    n_features: usize,
    max_depth: usize,
    seed: u64,
    trees: Vec<Tree>,
}

impl Forest {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Mean leaf class-1 fraction across trees.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::FeatureLengthMismatch {
                got: x.len(),
                expected: self.n_features,
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// True if no root-to-leaf path exceeds the declared depth bound.
    pub fn respects_depth_bound(&self) -> bool {
        self.trees.iter().all(|t| t.max_path_len() <= self.max_depth)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: Forest = serde_json::from_str(s)?;
        if f.format_version != FOREST_FORMAT_VERSION {
            return Err(Error::BadVersion(f.format_version as u8));
        }
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

struct TreeBuilder<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [u8],
    n_features: usize,
    mtry: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
    scratch_features: Vec<usize>,
}

impl<'a> TreeBuilder<'a> {
    fn leaf(&mut self, samples: &[usize]) -> usize {
        let ones = samples.iter().filter(|&&i| self.labels[i] == 1).count();
        self.nodes.push(TreeNode::Leaf {
            p1: ones as f64 / samples.len() as f64,
        });
        self.nodes.len() - 1
    }

    fn grow(&mut self, rng: &mut Xoshiro256StarStar, samples: &[usize], depth: usize) -> usize {
        let ones = samples.iter().filter(|&&i| self.labels[i] == 1).count();
        if depth >= self.max_depth || ones == 0 || ones == samples.len() || samples.len() < 2 {
            return self.leaf(samples);
        }

        // mtry distinct candidate features via partial Fisher-Yates.
        for (k, f) in self.scratch_features.iter_mut().enumerate() {
            *f = k;
        }
        for k in 0..self.mtry {
            let j = rng.random_range(k..self.n_features);
            self.scratch_features.swap(k, j);
        }

        let mut best: Option<(f64, usize, f64)> = None; // (score, feature, threshold)
        let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(samples.len());
        for ci in 0..self.mtry {
            let f = self.scratch_features[ci];
            pairs.clear();
            pairs.extend(samples.iter().map(|&i| (self.features[i][f], self.labels[i])));
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let total = pairs.len() as f64;
            let total_ones = ones as f64;
            let mut left_n = 0.0;
            let mut left_ones = 0.0;
            for w in 0..pairs.len() - 1 {
                left_n += 1.0;
                left_ones += pairs[w].1 as f64;
                // Split only between distinct values; threshold is the left
                // boundary value so the predicate x <= t reproduces the
                // training partition exactly.
                if pairs[w].0 == pairs[w + 1].0 {
                    continue;
                }
                let right_n = total - left_n;
                let right_ones = total_ones - left_ones;
                let gini = |n: f64, o: f64| {
                    let p = o / n;
                    2.0 * p * (1.0 - p) * n
                };
                let score = gini(left_n, left_ones) + gini(right_n, right_ones);
                if best.is_none() || score < best.unwrap().0 {
                    best = Some((score, f, pairs[w].0));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            return self.leaf(samples);
        };
        let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.features[i][feature] <= threshold);

        let node = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { p1: 0.0 }); // placeholder
        let left = self.grow(rng, &left_samples, depth + 1);
        let right = self.grow(rng, &right_samples, depth + 1);
        self.nodes[node] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        node
    }
}

/// Trains a forest on rows of (feature vector, {0, 1} label). Rejects empty
/// or single-class data.
pub fn train_forest(features: &[Vec<f64>], labels: &[u8], params: &ForestParams) -> Result<Forest> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::EmptyTrainingSet);
    }
    let n_features = features[0].len();
    for row in features {
        if row.len() != n_features {
            return Err(Error::FeatureLengthMismatch {
                got: row.len(),
                expected: n_features,
            });
        }
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == labels.len() {
        return Err(Error::SingleClass);
    }

    let n = features.len();
    let mtry = ((n_features as f64).sqrt().floor() as usize).clamp(1, n_features.max(1));
    let mut seeder = SplitMix64::seed_from_u64(params.seed);
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seeder.next_u64());
        let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut builder = TreeBuilder {
            features,
            labels,
            n_features,
            mtry,
            max_depth: params.max_depth,
            nodes: Vec::new(),
            scratch_features: vec![0; n_features],
        };
        let root = builder.grow(&mut rng, &bootstrap, 0);
        debug_assert_eq!(root, 0);
        trees.push(Tree {
            nodes: builder.nodes,
        });
    }

    Ok(Forest {
        format_version: FOREST_FORMAT_VERSION,
        n_features,
        max_depth: params.max_depth,
        seed: params.seed,
        trees,
    })
}
