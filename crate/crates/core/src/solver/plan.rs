//! Coalescence topologies: forests whose leaves are the initial atoms and
//! whose internal nodes are merge events of two or more clusters.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tree {
    Leaf(usize),
    /// Children ordered by their smallest leaf.
    Merge(Vec<Tree>),
}

impl Tree {
    fn min_leaf(&self) -> usize {
        match self {
            Tree::Leaf(i) => *i,
            Tree::Merge(c) => c[0].min_leaf(),
        }
    }

    fn merges(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Merge(c) => 1 + c.iter().map(Tree::merges).sum::<usize>(),
        }
    }

    fn encode(&self, out: &mut String) {
        match self {
            Tree::Leaf(i) => out.push_str(&i.to_string()),
            Tree::Merge(c) => {
                out.push('(');
                for (j, t) in c.iter().enumerate() {
                    if j > 0 {
                        out.push(',');
                    }
                    t.encode(out);
                }
                out.push(')');
            }
        }
    }
}

/// A forest over leaves `0..n`, without times or points.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlanTopology {
    n: usize,
    trees: Vec<Tree>,
}

/// Flattened topology. Node ids `0..n` are leaves, `n + e` is event `e`.
/// Events are listed children first.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub n: usize,
    pub events: Vec<Vec<usize>>,
    pub roots: Vec<usize>,
    pub parent: Vec<Option<usize>>,
}

impl PlanTopology {
    pub fn new(n: usize, mut trees: Vec<Tree>) -> Self {
        trees.sort_by_key(Tree::min_leaf);
        Self { n, trees }
    }

    /// The plan without merges.
    pub fn singletons(n: usize) -> Self {
        Self::new(n, (0..n).map(Tree::Leaf).collect())
    }

    pub fn leaves(&self) -> usize {
        self.n
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn merges(&self) -> usize {
        self.trees.iter().map(Tree::merges).sum()
    }

    /// Canonical text form, e.g. `((0,1),2) 3`.
    pub fn encoding(&self) -> String {
        let mut s = String::new();
        for (j, t) in self.trees.iter().enumerate() {
            if j > 0 {
                s.push(' ');
            }
            t.encode(&mut s);
        }
        s
    }

    /// New topology with roots `a` and `b` merged by a fresh event.
    pub fn merge_roots(&self, a: usize, b: usize) -> Self {
        let mut trees = self.trees.clone();
        let (hi, lo) = (a.max(b), a.min(b));
        let tb = trees.remove(hi);
        let ta = trees.remove(lo);
        let mut children = vec![ta, tb];
        children.sort_by_key(Tree::min_leaf);
        trees.push(Tree::Merge(children));
        Self::new(self.n, trees)
    }

    pub(crate) fn layout(&self) -> Layout {
        fn walk(t: &Tree, n: usize, events: &mut Vec<Vec<usize>>) -> usize {
            match t {
                Tree::Leaf(i) => *i,
                Tree::Merge(c) => {
                    let ids: Vec<usize> = c.iter().map(|x| walk(x, n, events)).collect();
                    events.push(ids);
                    n + events.len() - 1
                }
            }
        }
        let mut events = Vec::new();
        let roots: Vec<usize> = self.trees.iter().map(|t| walk(t, self.n, &mut events)).collect();
        let mut parent = vec![None; self.n + events.len()];
        for (e, children) in events.iter().enumerate() {
            for &c in children {
                parent[c] = Some(self.n + e);
            }
        }
        Layout {
            n: self.n,
            events,
            roots,
            parent,
        }
    }
}

/// All set partitions of `items`, by restricted growth strings.
pub fn set_partitions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
    fn rec(items: &[usize], i: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == items.len() {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(items[i]);
            rec(items, i + 1, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![items[i]]);
        rec(items, i + 1, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(items, 0, &mut Vec::new(), &mut out);
    out
}

/// Trees with leaf set `items`.
fn trees_over(items: &[usize]) -> Vec<Tree> {
    if items.len() == 1 {
        return vec![Tree::Leaf(items[0])];
    }
    let mut out = Vec::new();
    for blocks in set_partitions(items) {
        if blocks.len() < 2 {
            continue;
        }
        for children in product(blocks.iter().map(|b| trees_over(b)).collect()) {
            out.push(Tree::Merge(children));
        }
    }
    out
}

fn product(choices: Vec<Vec<Tree>>) -> Vec<Vec<Tree>> {
    let mut acc: Vec<Vec<Tree>> = vec![Vec::new()];
    for options in choices {
        let mut next = Vec::with_capacity(acc.len() * options.len());
        for prefix in &acc {
            for o in &options {
                let mut v = prefix.clone();
                v.push(o.clone());
                next.push(v);
            }
        }
        acc = next;
    }
    acc
}

/// Every coalescence forest over `n` leaves, ordered by merge count and
/// then by encoding. A simultaneous k-way merge is one event.
pub fn enumerate_plans(n: usize) -> Vec<PlanTopology> {
    let items: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    for blocks in set_partitions(&items) {
        for trees in product(blocks.iter().map(|b| trees_over(b)).collect()) {
            out.push(PlanTopology::new(n, trees));
        }
    }
    let mut keyed: Vec<(usize, String, PlanTopology)> =
        out.into_iter().map(|p| (p.merges(), p.encoding(), p)).collect();
    keyed.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    keyed.into_iter().map(|(_, _, p)| p).collect()
}

/// Serializable description of a topology with its event data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationPlan {
    pub topology: String,
    pub merges: usize,
    pub leaves: Vec<PlanLeaf>,
    pub events: Vec<PlanEvent>,
    pub roots: Vec<PlanRoot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanLeaf {
    pub point: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEvent {
    /// Node ids: `i < leaves.len()` is a leaf, otherwise an event.
    pub children: Vec<usize>,
    pub time: f64,
    pub point: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRoot {
    pub node: usize,
    pub terminal: Vec<f64>,
    /// Target atom assigned under a hard terminal constraint.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_atom: Option<usize>,
}

impl AggregationPlan {
    /// Earliest merge event.
    pub fn first_merge(&self) -> Option<&PlanEvent> {
        self.events.iter().min_by(|a, b| a.time.total_cmp(&b.time))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forest_counts() {
        // Labeled series-reduced forests: 1, 2, 8, 52, 472.
        let counts: Vec<usize> = (1..=5).map(|n| enumerate_plans(n).len()).collect();
        assert_eq!(counts, vec![1, 2, 8, 52, 472]);
    }

    #[test]
    fn three_leaf_catalogue() {
        let enc: Vec<String> = enumerate_plans(3).iter().map(PlanTopology::encoding).collect();
        assert_eq!(
            enc,
            vec!["0 1 2", "(0,1) 2", "(0,1,2)", "(0,2) 1", "0 (1,2)", "((0,1),2)", "((0,2),1)", "(0,(1,2))"]
        );
    }

    #[test]
    fn set_partition_counts_are_bell_numbers() {
        let bell: Vec<usize> = (1..=6).map(|n| set_partitions(&(0..n).collect::<Vec<_>>()).len()).collect();
        assert_eq!(bell, vec![1, 2, 5, 15, 52, 203]);
    }

    #[test]
    fn layout_lists_children_first() {
        let p = enumerate_plans(3).into_iter().find(|p| p.encoding() == "((0,1),2)").unwrap();
        let l = p.layout();
        assert_eq!(l.events, vec![vec![0, 1], vec![3, 2]]);
        assert_eq!(l.roots, vec![4]);
        assert_eq!(l.parent, vec![Some(3), Some(3), Some(4), Some(4), None]);
    }

    #[test]
    fn merging_roots_builds_pairs() {
        let p = PlanTopology::singletons(3).merge_roots(0, 2);
        assert_eq!(p.encoding(), "(0,2) 1");
        assert_eq!(p.merge_roots(0, 1).encoding(), "((0,2),1)");
    }
}
