//! Merge trees (standard flavor) and merge DAGs (rank-greedy flavor).

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::Serialize;

use crate::display::display_token;
use crate::error::{Error, Result};
use crate::model::{Flavor, TokenId, TokenizerModel};

/// Tokens whose merge tree contains a given token, with the number of
/// times it occurs as a subtree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DescendantSet {
    pub token: TokenId,
    pub descendants: BTreeMap<TokenId, u64>,
}

impl DescendantSet {
    pub fn multiplicity(&self, descendant: TokenId) -> u64 {
        self.descendants.get(&descendant).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.descendants.is_empty()
    }
}

#[derive(Debug)]
pub struct MergeGraph {
    flavor: Flavor,
    parents: Vec<Vec<(TokenId, TokenId)>>,
    children: Vec<Vec<TokenId>>,
    /// Operands before results.
    topo: Vec<TokenId>,
    memo: Vec<OnceLock<DescendantSet>>,
}

impl MergeGraph {
    pub fn build(model: &TokenizerModel) -> Result<Self> {
        let n = model.vocab_size();
        let mut parents: Vec<Vec<(TokenId, TokenId)>> = vec![Vec::new(); n];
        match model.flavor() {
            Flavor::Standard => {
                for rule in model.merges() {
                    parents[rule.result.index()].push((rule.left, rule.right));
                }
            }
            Flavor::RankGreedy => {
                for id in model.ids() {
                    if model.is_base(id) || model.is_special(id) {
                        continue;
                    }
                    let bytes = model.bytes_of(id);
                    let rank = model.rank(id).expect("rank-greedy model has ranks");
                    for k in 1..bytes.len() {
                        let (Some(u), Some(v)) = (model.token_id(&bytes[..k]), model.token_id(&bytes[k..]))
                        else {
                            continue;
                        };
                        let lower = |t: TokenId| !model.is_special(t) && model.rank(t).is_some_and(|r| r < rank);
                        if lower(u) && lower(v) {
                            parents[id.index()].push((u, v));
                        }
                    }
                }
            }
        }

        let mut children: Vec<Vec<TokenId>> = vec![Vec::new(); n];
        for (child, pairs) in parents.iter().enumerate() {
            for &(l, r) in pairs {
                children[l.index()].push(TokenId(child as u32));
                children[r.index()].push(TokenId(child as u32));
            }
        }
        let mut indegree = vec![0usize; n];
        for c in &mut children {
            c.sort_unstable();
            c.dedup();
            for child in c.iter() {
                indegree[child.index()] += 1;
            }
        }
        let mut queue: VecDeque<TokenId> = (0..n as u32)
            .map(TokenId)
            .filter(|t| indegree[t.index()] == 0)
            .collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(t) = queue.pop_front() {
            topo.push(t);
            for &c in &children[t.index()] {
                indegree[c.index()] -= 1;
                if indegree[c.index()] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if topo.len() != n {
            return Err(Error::Integrity("merge graph contains a cycle".into()));
        }
        Ok(MergeGraph {
            flavor: model.flavor(),
            parents,
            children,
            topo,
            memo: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parents(&self, t: TokenId) -> &[(TokenId, TokenId)] {
        self.parents.get(t.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn children(&self, t: TokenId) -> &[TokenId] {
        self.children.get(t.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Tokens ordered so that every parent leg precedes its child.
    pub fn topological_order(&self) -> &[TokenId] {
        &self.topo
    }

    /// All tokens built (directly or transitively) from `t`, with subtree
    /// multiplicities. Standard flavor only.
    pub fn descendants(&self, t: TokenId) -> Result<&DescendantSet> {
        if self.flavor != Flavor::Standard {
            return Err(Error::UnsupportedFlavor(self.flavor.name()));
        }
        let slot = self.memo.get(t.index()).ok_or(Error::UnknownId(t.0))?;
        if let Some(set) = slot.get() {
            return Ok(set);
        }
        // fill children first so the recursion below is shallow
        for &c in self.children(t) {
            self.descendants(c)?;
        }
        Ok(slot.get_or_init(|| {
            let mut descendants = BTreeMap::new();
            for &c in self.children(t) {
                let (l, r) = self.parents(c)[0];
                let direct = u64::from(l == t) + u64::from(r == t);
                *descendants.entry(c).or_insert(0) += direct;
                let inner = self.memo[c.index()].get().expect("filled above");
                for (&d, &m) in &inner.descendants {
                    *descendants.entry(d).or_insert(0) += direct * m;
                }
            }
            DescendantSet { token: t, descendants }
        }))
    }

    /// Reverses one merge. Standard flavor returns the unique parent pair
    /// and ignores `used_parent`; rank-greedy requires the pair actually
    /// used, which must be an admissible decomposition.
    pub fn split_once(&self, t: TokenId, used_parent: Option<(TokenId, TokenId)>) -> Result<(TokenId, TokenId)> {
        let parents = self.parents.get(t.index()).ok_or(Error::UnknownId(t.0))?;
        if parents.is_empty() {
            return Err(Error::CannotSplit(t));
        }
        match self.flavor {
            Flavor::Standard => Ok(parents[0]),
            Flavor::RankGreedy => {
                let (left, right) = used_parent.ok_or_else(|| {
                    Error::InvalidInput(format!("rank-greedy split of {t} needs the decomposition used"))
                })?;
                if parents.contains(&(left, right)) {
                    Ok((left, right))
                } else {
                    Err(Error::InvalidParent { token: t, left, right })
                }
            }
        }
    }

    /// Per-token count of formations consumed by later merges, derived
    /// from final counts by pushing each token's total formations down to
    /// its parent pair. Standard flavor only.
    pub fn consumed_from_finals(&self, f1: &[u64]) -> Result<Vec<u64>> {
        if self.flavor != Flavor::Standard {
            return Err(Error::UnsupportedFlavor(self.flavor.name()));
        }
        let mut incoming = vec![0u64; self.len()];
        for &t in self.topo.iter().rev() {
            let total = f1.get(t.index()).copied().unwrap_or(0) + incoming[t.index()];
            if let Some(&(l, r)) = self.parents(t).first() {
                incoming[l.index()] += total;
                incoming[r.index()] += total;
            }
        }
        Ok(incoming)
    }

    /// Like [`Self::consumed_from_finals`] but counting each descendant once
    /// however many times the token occurs inside it.
    pub fn consumed_from_finals_distinct(&self, f1: &[u64]) -> Result<Vec<u64>> {
        (0..self.len())
            .map(|t| {
                let set = self.descendants(TokenId(t as u32))?;
                Ok(set
                    .descendants
                    .keys()
                    .map(|d| f1.get(d.index()).copied().unwrap_or(0))
                    .sum())
            })
            .collect()
    }

    /// Merge tree rooted at `root`, as nested JSON-serializable nodes.
    /// Rank-greedy graphs list every admissible decomposition up to `max_depth`.
    pub fn tree(&self, model: &TokenizerModel, root: TokenId, max_depth: usize) -> TreeNode {
        let parents = if max_depth == 0 {
            Vec::new()
        } else {
            self.parents(root)
                .iter()
                .map(|&(l, r)| {
                    [
                        self.tree(model, l, max_depth - 1),
                        self.tree(model, r, max_depth - 1),
                    ]
                })
                .collect()
        };
        TreeNode {
            id: root,
            text: display_token(model, root),
            parents,
        }
    }

    /// Graphviz rendering of the merge tree rooted at `root`. `colors`
    /// optionally fills nodes by token.
    pub fn to_dot(
        &self,
        model: &TokenizerModel,
        root: TokenId,
        max_depth: usize,
        colors: &HashMap<TokenId, String>,
    ) -> String {
        let tree = self.tree(model, root, max_depth);
        let mut out = String::from("digraph merge_tree {\n  rankdir=BT;\n  node [shape=box, style=\"rounded,filled\", fillcolor=white];\n");
        let mut counter = 0usize;
        write_dot_node(&tree, &mut counter, colors, &mut out);
        out.push_str("}\n");
        out
    }
}

fn write_dot_node(node: &TreeNode, counter: &mut usize, colors: &HashMap<TokenId, String>, out: &mut String) -> usize {
    let me = *counter;
    *counter += 1;
    let label = node.text.replace('\\', "\\\\").replace('"', "\\\"");
    let fill = colors
        .get(&node.id)
        .map(|c| format!(", fillcolor=\"{c}\""))
        .unwrap_or_default();
    let _ = writeln!(out, "  n{me} [label=\"{label}\"{fill}];");
    for (k, [l, r]) in node.parents.iter().enumerate() {
        let li = write_dot_node(l, counter, colors, out);
        let ri = write_dot_node(r, counter, colors, out);
        let style = if k == 0 { "" } else { " [style=dashed]" };
        let _ = writeln!(out, "  n{li} -> n{me}{style};");
        let _ = writeln!(out, "  n{ri} -> n{me}{style};");
    }
    me
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeNode {
    pub id: TokenId,
    pub text: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub parents: Vec<[TreeNode; 2]>,
}
