//! Flat text serialisation of a fitted forest.
//!
//! ```text
//! cfbench-forest 1
//! n_features 42
//! hyperparams 6 gini 1 500          # mtry splitrule min_node_size n_trees
//! class_weights 2.5 1               # fail pass
//! seed 17
//! 0 0 split 12 33.5 1 2             # tree node split feature threshold left right
//! 0 1 leaf 1 0                      # tree node leaf p_fail p_pass
//! ...
//! ```
//!
//! Node lines appear tree by tree with node ids `0..n` in order. Floats use
//! shortest round-trip formatting, so a reloaded model predicts bit-for-bit
//! the same as the original.

use std::fmt::Write as _;
use std::path::Path;

use super::{Hyperparams, Node, RandomForestModel, Tree};
use crate::balance::ClassWeights;
use crate::error::{Error, Result};

const MAGIC: &str = "cfbench-forest 1";

pub fn model_to_string(model: &RandomForestModel) -> String {
    let hp = &model.hyperparams;
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "n_features {}", model.n_features);
    let _ = writeln!(
        s,
        "hyperparams {} {} {} {}",
        hp.mtry, hp.splitrule, hp.min_node_size, hp.n_trees
    );
    let _ = writeln!(
        s,
        "class_weights {} {}",
        model.class_weights.fail, model.class_weights.pass
    );
    let _ = writeln!(s, "seed {}", model.training_seed);
    for (t, tree) in model.trees.iter().enumerate() {
        for (i, node) in tree.nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let _ = writeln!(s, "{t} {i} split {feature} {threshold} {left} {right}");
                }
                Node::Leaf { p_fail } => {
                    let _ = writeln!(s, "{t} {i} leaf {p_fail} {}", 1.0 - p_fail);
                }
            }
        }
    }
    s
}

pub fn write_model(model: &RandomForestModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<RandomForestModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::ModelFormat {
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| bad(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| bad(line, format!("bad {what}")))
}

fn header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<(usize, Vec<&'a str>)> {
    let (no, line) = lines.next().ok_or_else(|| bad(0, format!("missing `{key}` line")))?;
    let mut toks = line.split_whitespace();
    if toks.next() != Some(key) {
        return Err(bad(no, format!("expected `{key}`")));
    }
    Ok((no, toks.collect()))
}

pub fn parse_model(text: &str) -> Result<RandomForestModel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(bad(1, "not a cfbench forest file")),
    }
    let (no, t) = header(&mut lines, "n_features")?;
    let n_features: usize = field(t.first().copied(), no, "n_features")?;
    let (no, t) = header(&mut lines, "hyperparams")?;
    let hyperparams = Hyperparams {
        mtry: field(t.first().copied(), no, "mtry")?,
        splitrule: field(t.get(1).copied(), no, "splitrule")?,
        min_node_size: field(t.get(2).copied(), no, "min_node_size")?,
        n_trees: field(t.get(3).copied(), no, "n_trees")?,
    };
    let (no, t) = header(&mut lines, "class_weights")?;
    let class_weights = ClassWeights::new(
        field(t.first().copied(), no, "fail weight")?,
        field(t.get(1).copied(), no, "pass weight")?,
    )
    .map_err(|e| bad(no, e.to_string()))?;
    let (no, t) = header(&mut lines, "seed")?;
    let training_seed: u64 = field(t.first().copied(), no, "seed")?;

    let mut trees: Vec<Tree> = Vec::new();
    for (no, line) in lines {
        let mut toks = line.split_whitespace();
        let t: usize = field(toks.next(), no, "tree id")?;
        let i: usize = field(toks.next(), no, "node id")?;
        if t == trees.len() {
            trees.push(Tree { nodes: Vec::new() });
        }
        if t + 1 != trees.len() || i != trees[t].nodes.len() {
            return Err(bad(no, "node out of order"));
        }
        let node = match toks.next() {
            Some("split") => {
                let feature: usize = field(toks.next(), no, "feature")?;
                if feature >= n_features {
                    return Err(bad(no, "feature index out of range"));
                }
                Node::Split {
                    feature,
                    threshold: field(toks.next(), no, "threshold")?,
                    left: field(toks.next(), no, "left child")?,
                    right: field(toks.next(), no, "right child")?,
                }
            }
            Some("leaf") => Node::Leaf {
                p_fail: field(toks.next(), no, "fail probability")?,
            },
            _ => return Err(bad(no, "expected `split` or `leaf`")),
        };
        trees[t].nodes.push(node);
    }
    for (t, tree) in trees.iter().enumerate() {
        let n = tree.nodes.len();
        let dangling = tree.nodes.iter().any(|node| {
            matches!(*node, Node::Split { left, right, .. } if left >= n || right >= n)
        });
        if dangling {
            return Err(bad(0, format!("tree {t} references a missing node")));
        }
    }
    if trees.len() != hyperparams.n_trees {
        return Err(bad(
            0,
            format!("expected {} trees, found {}", hyperparams.n_trees, trees.len()),
        ));
    }
    Ok(RandomForestModel {
        trees,
        n_features,
        hyperparams,
        class_weights,
        training_seed,
    })
}
