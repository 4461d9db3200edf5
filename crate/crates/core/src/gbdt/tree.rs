use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bin: Option<u16>,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    /// Depth of the deepest leaf; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn num_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.num_leaves() + right.num_leaves(),
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature, left, right, ..
            } => Some(
                (*feature)
                    .max(left.max_feature().unwrap_or(0))
                    .max(right.max_feature().unwrap_or(0)),
            ),
        }
    }

    pub fn all_finite(&self) -> bool {
        match self {
            TreeNode::Leaf { weight } => weight.is_finite(),
            TreeNode::Split {
                threshold, left, right, ..
            } => !threshold.is_nan() && left.all_finite() && right.all_finite(),
        }
    }
}

/// Flat node storage used while growing, converted to [`TreeNode`] at the end.
#[derive(Debug, Default)]
pub(crate) struct TreeBuilder {
    nodes: Vec<BuildNode>,
}

#[derive(Debug, Clone, Copy)]
enum BuildNode {
    Pending,
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        bin: Option<u16>,
        left: usize,
        right: usize,
    },
}

impl TreeBuilder {
    pub fn add(&mut self) -> usize {
        self.nodes.push(BuildNode::Pending);
        self.nodes.len() - 1
    }

    pub fn set_leaf(&mut self, id: usize, weight: f64) {
        self.nodes[id] = BuildNode::Leaf(weight);
    }

    pub fn set_split(&mut self, id: usize, feature: usize, threshold: f64, bin: Option<u16>) -> (usize, usize) {
        let left = self.add();
        let right = self.add();
        self.nodes[id] = BuildNode::Split {
            feature,
            threshold,
            bin,
            left,
            right,
        };
        (left, right)
    }

    pub fn finish(&self) -> TreeNode {
        self.build(0)
    }

    fn build(&self, id: usize) -> TreeNode {
        match self.nodes[id] {
            BuildNode::Pending => panic!("tree node {id} left unfinished"),
            BuildNode::Leaf(weight) => TreeNode::Leaf { weight },
            BuildNode::Split {
                feature,
                threshold,
                bin,
                left,
                right,
            } => TreeNode::Split {
                feature,
                threshold,
                bin,
                left: Box::new(self.build(left)),
                right: Box::new(self.build(right)),
            },
        }
    }
}
