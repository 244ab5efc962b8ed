//! Additive decompositions of the input dimensions.
//!
//! A decomposition is a collection of components (dimension subsets) whose
//! union covers `1..=d`. Tree decompositions, the only kind the optimiser
//! works with, consist of `E` pairwise components forming an acyclic graph
//! plus one singleton for every dimension not touched by an edge.
//!
//! Dimensions are 1-based throughout this module and in every serialized
//! form.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::union_find::UnionFind;

/// A set of dimension indices, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Component(Vec<usize>);

impl Component {
    /// Builds a component from arbitrary indices; they are sorted but not
    /// deduplicated, so `validate` can report duplicates.
    pub fn new(mut dims: Vec<usize>) -> Self {
        dims.sort_unstable();
        Component(dims)
    }

    pub fn single(dim: usize) -> Self {
        Component(vec![dim])
    }

    pub fn pair(a: usize, b: usize) -> Self {
        Component(vec![a.min(b), a.max(b)])
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, dim: usize) -> bool {
        self.0.contains(&dim)
    }

    pub fn as_edge(&self) -> Option<(usize, usize)> {
        match self.0.as_slice() {
            [a, b] => Some((*a, *b)),
            _ => None,
        }
    }

    /// Picks this component's coordinates out of a full input vector.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.0.iter().map(|&i| x[i - 1]).collect()
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("edges form a cycle through ({0}, {1})")]
    CycleDetected(usize, usize),
    #[error("dimension {dim} outside 1..={d}")]
    DimensionOutOfRange { dim: usize, d: usize },
    #[error("dimension {0} is not covered by any component")]
    DimensionUncovered(usize),
    #[error("component of size {0} is too large for a tree decomposition")]
    ComponentTooLarge(usize),
    #[error("empty component")]
    EmptyComponent,
    #[error("dimension {0} repeated within a component")]
    DuplicateDimension(usize),
    #[error("dimension {0} has more than one singleton component")]
    DuplicateSingleton(usize),
    #[error("dimension {0} has a singleton but is also covered by an edge")]
    RedundantSingleton(usize),
    #[error("dimension count must be positive")]
    ZeroDimensions,
}

/// A set of components over `d` dimensions, stored in canonical sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    d: usize,
    components: Vec<Component>,
}

impl Decomposition {
    /// Builds a tree decomposition, rejecting anything that fails `validate`.
    pub fn new(d: usize, components: Vec<Component>) -> Result<Self> {
        let g = Self::new_unchecked(d, components);
        g.validate()?;
        Ok(g)
    }

    /// Builds a decomposition without tree validation. Used for non-tree
    /// decompositions such as [`Decomposition::full_pairwise`].
    pub fn new_unchecked(d: usize, mut components: Vec<Component>) -> Self {
        components.sort();
        Decomposition { d, components }
    }

    /// Tree decomposition with the given edges plus singletons for every
    /// dimension the edges leave uncovered.
    pub fn from_edges(d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut covered = vec![false; d + 1];
        let mut components = Vec::with_capacity(d);
        for &(a, b) in edges {
            for x in [a, b] {
                if x == 0 || x > d {
                    return Err(ValidationError::DimensionOutOfRange { dim: x, d }.into());
                }
                covered[x] = true;
            }
            components.push(Component::pair(a, b));
        }
        components.extend((1..=d).filter(|&i| !covered[i]).map(Component::single));
        Self::new(d, components)
    }

    /// All singletons: the fully separable decomposition.
    pub fn separable(d: usize) -> Self {
        Self::new_unchecked(d, (1..=d).map(Component::single).collect())
    }

    /// Every pairwise component over `d` dimensions. Not a tree for `d > 2`.
    pub fn full_pairwise(d: usize) -> Self {
        if d == 1 {
            return Self::separable(1);
        }
        let mut comps = Vec::with_capacity(d * (d - 1) / 2);
        for a in 1..=d {
            for b in a + 1..=d {
                comps.push(Component::pair(a, b));
            }
        }
        Self::new_unchecked(d, comps)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn contains(&self, c: &Component) -> bool {
        self.components.binary_search(c).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.components.iter().filter_map(Component::as_edge)
    }

    pub fn num_edges(&self) -> usize {
        self.edges().count()
    }

    /// Checks every tree-decomposition invariant.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let d = self.d;
        if d == 0 {
            return Err(ValidationError::ZeroDimensions);
        }
        let mut covered = vec![false; d + 1];
        let mut singleton = vec![false; d + 1];
        for c in &self.components {
            if c.is_empty() {
                return Err(ValidationError::EmptyComponent);
            }
            if c.len() > 2 {
                return Err(ValidationError::ComponentTooLarge(c.len()));
            }
            for &x in c.dims() {
                if x == 0 || x > d {
                    return Err(ValidationError::DimensionOutOfRange { dim: x, d });
                }
            }
            if let [a, b] = c.dims() {
                if a == b {
                    return Err(ValidationError::DuplicateDimension(*a));
                }
            }
            if let [a] = c.dims() {
                if singleton[*a] {
                    return Err(ValidationError::DuplicateSingleton(*a));
                }
                singleton[*a] = true;
            }
            for &x in c.dims() {
                covered[x] = true;
            }
        }
        if let Some(dim) = (1..=d).find(|&i| !covered[i]) {
            return Err(ValidationError::DimensionUncovered(dim));
        }
        let mut uf = UnionFind::new(d);
        for (a, b) in self.edges() {
            if !uf.union(a - 1, b - 1) {
                return Err(ValidationError::CycleDetected(a, b));
            }
            for x in [a, b] {
                if singleton[x] {
                    return Err(ValidationError::RedundantSingleton(x));
                }
            }
        }
        Ok(())
    }

    /// Splits the edge set into node-disjoint trees, plus the dimensions that
    /// only appear as singletons.
    pub fn connected_groups(&self) -> Result<Forest> {
        self.validate()?;
        let d = self.d;
        let mut uf = UnionFind::new(d);
        let mut in_edge = vec![false; d + 1];
        for (a, b) in self.edges() {
            uf.union(a - 1, b - 1);
            in_edge[a] = true;
            in_edge[b] = true;
        }
        let mut by_root: BTreeMap<usize, TreeGroup> = BTreeMap::new();
        for i in 1..=d {
            if in_edge[i] {
                let root = uf.find(i - 1);
                by_root.entry(root).or_default().nodes.push(i);
            }
        }
        for (a, b) in self.edges() {
            let root = uf.find(a - 1);
            by_root.get_mut(&root).expect("edge root").edges.push((a, b));
        }
        let mut trees: Vec<TreeGroup> = by_root.into_values().collect();
        trees.sort_by_key(|t| t.nodes[0]);
        let singletons = (1..=d).filter(|&i| !in_edge[i]).collect();
        Ok(Forest { trees, singletons })
    }

    /// One component per line, indices comma-separated.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for c in &self.components {
            s.push_str(&c.to_string());
            s.push('\n');
        }
        s
    }

    /// Parses the line format, also accepting `;` as a component separator
    /// (the compact form used inside trace CSV cells). Not validated.
    pub fn parse(d: usize, s: &str) -> Result<Self> {
        let mut comps = Vec::new();
        for part in s.split(['\n', ';']).map(str::trim).filter(|p| !p.is_empty()) {
            let dims = part
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::invalid(format!("bad dimension index `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            comps.push(Component::new(dims));
        }
        Ok(Self::new_unchecked(d, comps))
    }
}

/// Compact single-line form, components separated by `;`.
impl fmt::Display for Decomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let dims = s
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| Error::invalid(format!("bad index `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Component::new(dims))
    }
}

/// One connected tree of a forest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeGroup {
    /// Sorted ascending.
    pub nodes: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Forest {
    /// Ordered by lowest node index.
    pub trees: Vec<TreeGroup>,
    pub singletons: Vec<usize>,
}

/// Random tree sampler: walks two independent permutations of the
/// dimensions, adding every pair not yet joined in the union-find until `e`
/// edges have been collected.
pub fn sample_random_tree<R: Rng + ?Sized>(d: usize, e: usize, rng: &mut R) -> Result<Decomposition> {
    if d == 0 {
        return Err(Error::invalid("d must be positive"));
    }
    if e > d - 1 {
        return Err(Error::invalid(format!("E = {e} exceeds d - 1 = {}", d - 1)));
    }
    let mut l_in: Vec<usize> = (1..=d).collect();
    let mut l_out = l_in.clone();
    l_in.shuffle(rng);
    l_out.shuffle(rng);

    let mut uf = UnionFind::new(d);
    let mut edges = Vec::with_capacity(e);
    'outer: for &n_in in &l_in {
        for &n_out in &l_out {
            if edges.len() == e {
                break 'outer;
            }
            if !uf.connected(n_in - 1, n_out - 1) {
                uf.union(n_in - 1, n_out - 1);
                edges.push((n_in.min(n_out), n_in.max(n_out)));
            }
        }
    }
    Decomposition::from_edges(d, &edges)
}

/// Empirical inclusion frequency of every one of the `d(d-1)/2` possible
/// edges over `samples` draws of [`sample_random_tree`].
pub fn edge_frequencies<R: Rng + ?Sized>(
    d: usize,
    e: usize,
    samples: usize,
    rng: &mut R,
) -> Result<BTreeMap<(usize, usize), f64>> {
    if samples == 0 {
        return Err(Error::invalid("samples must be at least 1"));
    }
    let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for a in 1..=d {
        for b in a + 1..=d {
            counts.insert((a, b), 0);
        }
    }
    for _ in 0..samples {
        let g = sample_random_tree(d, e, rng)?;
        for edge in g.edges() {
            *counts.get_mut(&edge).expect("edge in range") += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(k, n)| (k, n as f64 / samples as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_edges_is_all_singletons() {
        let g = sample_random_tree(3, 0, &mut rng(1)).unwrap();
        assert_eq!(g.components(), &[Component::single(1), Component::single(2), Component::single(3)]);
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn two_dims_one_edge() {
        let g = sample_random_tree(2, 1, &mut rng(5)).unwrap();
        assert_eq!(g.components(), &[Component::pair(1, 2)]);
    }

    #[test]
    fn sampler_rejects_bad_parameters() {
        assert!(matches!(sample_random_tree(0, 0, &mut rng(0)), Err(Error::InvalidParameter(_))));
        assert!(matches!(sample_random_tree(4, 4, &mut rng(0)), Err(Error::InvalidParameter(_))));
        assert!(sample_random_tree(4, 3, &mut rng(0)).is_ok());
    }

    #[test]
    fn sampler_is_deterministic_and_varies_with_seed() {
        let a = sample_random_tree(12, 5, &mut rng(42)).unwrap();
        let b = sample_random_tree(12, 5, &mut rng(42)).unwrap();
        assert_eq!(a, b);
        let distinct = (0..20u64)
            .map(|s| sample_random_tree(12, 5, &mut rng(s)).unwrap().to_string())
            .collect::<std::collections::BTreeSet<_>>();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn validate_examples() {
        let ok = Decomposition::new_unchecked(
            4,
            vec![Component::pair(1, 2), Component::pair(2, 3), Component::single(4)],
        );
        assert_eq!(ok.validate(), Ok(()));

        let cyc = Decomposition::new_unchecked(
            3,
            vec![Component::pair(1, 2), Component::pair(2, 3), Component::pair(1, 3)],
        );
        assert!(matches!(cyc.validate(), Err(ValidationError::CycleDetected(_, _))));

        let oor = Decomposition::new_unchecked(
            4,
            vec![Component::pair(1, 2), Component::pair(2, 3), Component::single(5)],
        );
        assert_eq!(oor.validate(), Err(ValidationError::DimensionOutOfRange { dim: 5, d: 4 }));
    }

    #[test]
    fn validate_other_failures() {
        let unc = Decomposition::new_unchecked(3, vec![Component::pair(1, 2)]);
        assert_eq!(unc.validate(), Err(ValidationError::DimensionUncovered(3)));

        let big = Decomposition::new_unchecked(3, vec![Component::new(vec![1, 2, 3])]);
        assert_eq!(big.validate(), Err(ValidationError::ComponentTooLarge(3)));

        let dup = Decomposition::new_unchecked(2, vec![Component::single(1), Component::single(1), Component::single(2)]);
        assert_eq!(dup.validate(), Err(ValidationError::DuplicateSingleton(1)));

        let red = Decomposition::new_unchecked(2, vec![Component::pair(1, 2), Component::single(1)]);
        assert_eq!(red.validate(), Err(ValidationError::RedundantSingleton(1)));

        let self_loop = Decomposition::new_unchecked(2, vec![Component::new(vec![1, 1]), Component::single(2)]);
        assert_eq!(self_loop.validate(), Err(ValidationError::DuplicateDimension(1)));

        let double_edge = Decomposition::new_unchecked(2, vec![Component::pair(1, 2), Component::pair(2, 1)]);
        assert!(matches!(double_edge.validate(), Err(ValidationError::CycleDetected(1, 2))));

        assert_eq!(Decomposition::new_unchecked(0, vec![]).validate(), Err(ValidationError::ZeroDimensions));
    }

    #[test]
    fn groups_two_trees_and_a_singleton() {
        let g = Decomposition::from_edges(5, &[(1, 2), (3, 4)]).unwrap();
        let f = g.connected_groups().unwrap();
        assert_eq!(f.trees.len(), 2);
        assert_eq!(f.trees[0].nodes, vec![1, 2]);
        assert_eq!(f.trees[1].nodes, vec![3, 4]);
        assert_eq!(f.singletons, vec![5]);
    }

    #[test]
    fn groups_without_edges() {
        let f = Decomposition::separable(3).connected_groups().unwrap();
        assert!(f.trees.is_empty());
        assert_eq!(f.singletons, vec![1, 2, 3]);
    }

    #[test]
    fn groups_chain() {
        let g = Decomposition::from_edges(3, &[(1, 2), (2, 3)]).unwrap();
        let f = g.connected_groups().unwrap();
        assert_eq!(f.trees.len(), 1);
        assert_eq!(f.trees[0].nodes, vec![1, 2, 3]);
        assert_eq!(f.trees[0].edges, vec![(1, 2), (2, 3)]);
        assert!(f.singletons.is_empty());
    }

    #[test]
    fn serialization() {
        let g = Decomposition::from_edges(4, &[(3, 1), (2, 3)]).unwrap();
        assert_eq!(g.to_lines(), "1,3\n2,3\n4\n");
        assert_eq!(g.to_string(), "1,3;2,3;4");
        assert_eq!(Decomposition::parse(4, &g.to_lines()).unwrap(), g);
        assert_eq!(Decomposition::parse(4, &g.to_string()).unwrap(), g);
    }

    #[test]
    fn frequencies_two_dims() {
        let f = edge_frequencies(2, 1, 10, &mut rng(3)).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[&(1, 2)], 1.0);
        assert!(edge_frequencies(2, 1, 0, &mut rng(3)).is_err());
    }

    #[test]
    fn frequencies_sum_to_edge_count() {
        let f = edge_frequencies(7, 3, 500, &mut rng(9)).unwrap();
        assert_eq!(f.len(), 21);
        let total: f64 = f.values().sum();
        assert!((total - 3.0).abs() < 1e-9);
    }

    #[test]
    fn full_pairwise_counts() {
        let g = Decomposition::full_pairwise(5);
        assert_eq!(g.len(), 10);
        assert!(g.validate().is_err());
    }
}
