//! Exact maximisation of an additive acquisition on a per-dimension grid.
//!
//! Each tree of the decomposition's forest is solved by max-sum dynamic
//! programming over its edge tables; singleton dimensions are maximised
//! independently. The argmax is decoded one node at a time in increasing
//! dimension order, clamping each node to the lowest grid index whose
//! max-marginal attains the optimum, which yields the lexicographically
//! smallest maximiser.

use std::collections::BTreeMap;

use crate::acquisition::{total_acquisition, AcquisitionSpec, TermRule};
use crate::decomposition::{Component, TreeGroup};
use crate::error::{Error, Result};
use crate::gp::GpModel;

/// Largest grid the exhaustive search will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 1_000_000;

/// Columns per batched posterior solve while building tables.
const BATCH: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum DimDomain {
    /// `grid` evenly spaced points covering `[lo, hi]`, endpoints included.
    Continuous { lo: f64, hi: f64, grid: usize },
    /// Explicit values (categorical or integer levels), used verbatim.
    Finite(Vec<f64>),
}

impl DimDomain {
    pub fn points(&self) -> Vec<f64> {
        match self {
            DimDomain::Continuous { lo, hi, grid } => {
                let step = (hi - lo) / (*grid as f64 - 1.0);
                (0..*grid)
                    .map(|i| if i + 1 == *grid { *hi } else { lo + step * i as f64 })
                    .collect()
            }
            DimDomain::Finite(v) => v.clone(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            DimDomain::Continuous { grid, .. } => *grid,
            DimDomain::Finite(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    dims: Vec<DimDomain>,
}

impl DomainSpec {
    pub fn new(dims: Vec<DimDomain>) -> Result<Self> {
        for (i, dd) in dims.iter().enumerate() {
            match dd {
                DimDomain::Continuous { lo, hi, grid } => {
                    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                        return Err(Error::invalid(format!("dimension {}: need lo < hi, got [{lo}, {hi}]", i + 1)));
                    }
                    if *grid < 2 {
                        return Err(Error::invalid(format!("dimension {}: grid size must be at least 2", i + 1)));
                    }
                }
                DimDomain::Finite(v) => {
                    if v.is_empty() {
                        return Err(Error::invalid(format!("dimension {}: empty value set", i + 1)));
                    }
                }
            }
        }
        Ok(Self { dims })
    }

    /// `[0, 1]^d` with `grid` points per dimension.
    pub fn unit(d: usize, grid: usize) -> Result<Self> {
        Self::new(vec![DimDomain::Continuous { lo: 0.0, hi: 1.0, grid }; d])
    }

    pub fn dims(&self) -> &[DimDomain] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn grids(&self) -> Vec<Vec<f64>> {
        self.dims.iter().map(DimDomain::points).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizeOptions {
    /// Golden-section polish of continuous coordinates after the grid argmax.
    pub refine: bool,
    pub memory_cap_mb: f64,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self { refine: false, memory_cap_mb: 1024.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub x: Vec<f64>,
    /// Grid index per dimension (before any refinement).
    pub indices: Vec<usize>,
    pub value: f64,
}

/// Acquisition values of every component on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTables {
    grids: Vec<Vec<f64>>,
    /// Keyed by 1-based dimension.
    singles: BTreeMap<usize, Vec<f64>>,
    /// Keyed by `(a, b)`, `a < b`; row-major `[ia * |grid_b| + ib]`.
    edges: BTreeMap<(usize, usize), Vec<f64>>,
}

fn tie_tolerance(v: f64) -> f64 {
    1e-12 * v.abs().max(1.0)
}

/// Lowest index whose value is within tolerance of the maximum.
fn first_max(values: &[f64]) -> (usize, f64) {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = tie_tolerance(m);
    let i = values.iter().position(|&v| v >= m - tol).expect("non-empty");
    (i, m)
}

impl GridTables {
    /// Builds tables directly from values, for callers with their own
    /// additive objective. `singles` and `edges` must match the grid sizes.
    pub fn from_parts(
        grids: Vec<Vec<f64>>,
        singles: BTreeMap<usize, Vec<f64>>,
        edges: BTreeMap<(usize, usize), Vec<f64>>,
    ) -> Result<Self> {
        let d = grids.len();
        let mut seen = vec![false; d + 1];
        for (&i, v) in &singles {
            if i == 0 || i > d || v.len() != grids[i - 1].len() || seen[i] {
                return Err(Error::invalid(format!("bad singleton table for dimension {i}")));
            }
            seen[i] = true;
        }
        let mut uf = crate::union_find::UnionFind::new(d);
        for (&(a, b), v) in &edges {
            if a == 0 || b > d || a >= b || v.len() != grids[a - 1].len() * grids[b - 1].len() {
                return Err(Error::invalid(format!("bad edge table for ({a}, {b})")));
            }
            if seen[a] || seen[b] {
                return Err(Error::invalid(format!("edge ({a}, {b}) overlaps a singleton")));
            }
            if !uf.union(a - 1, b - 1) {
                return Err(Error::invalid(format!("edge ({a}, {b}) closes a cycle")));
            }
        }
        Ok(Self { grids, singles, edges })
    }

    pub fn grids(&self) -> &[Vec<f64>] {
        &self.grids
    }

    pub fn singles(&self) -> &BTreeMap<usize, Vec<f64>> {
        &self.singles
    }

    pub fn edges(&self) -> &BTreeMap<(usize, usize), Vec<f64>> {
        &self.edges
    }

    /// Adds a constant to one component's table.
    pub fn shift_component(&mut self, c: &Component, delta: f64) -> Result<()> {
        let table = match c.dims() {
            [a] => self.singles.get_mut(a),
            [a, b] => self.edges.get_mut(&(*a, *b)),
            _ => None,
        }
        .ok_or_else(|| Error::invalid(format!("no table for component {{{c}}}")))?;
        table.iter_mut().for_each(|v| *v += delta);
        Ok(())
    }

    /// Sum of all tables at the given grid indices.
    pub fn value_at(&self, idx: &[usize]) -> f64 {
        let mut v = 0.0;
        for (&i, t) in &self.singles {
            v += t[idx[i - 1]];
        }
        for (&(a, b), t) in &self.edges {
            v += t[idx[a - 1] * self.grids[b - 1].len() + idx[b - 1]];
        }
        v
    }

    fn edge_value(&self, key: (usize, usize), from: usize, from_idx: usize, to_idx: usize) -> f64 {
        let nb = self.grids[key.1 - 1].len();
        let t = &self.edges[&key];
        if from == key.0 {
            t[from_idx * nb + to_idx]
        } else {
            t[to_idx * nb + from_idx]
        }
    }

    /// Max-marginal of `root` over its grid: the best total of the tree's
    /// edge tables with the root fixed at each value, honouring clamps.
    fn max_marginal(&self, tree: &TreeGroup, adj: &BTreeMap<usize, Vec<usize>>, root: usize, clamp: &[Option<usize>]) -> Vec<f64> {
        // BFS order from the root
        let mut order = vec![root];
        let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &v in &adj[&u] {
                if parent.get(&u) != Some(&v) {
                    parent.insert(v, u);
                    order.push(v);
                }
            }
        }
        debug_assert_eq!(order.len(), tree.nodes.len());

        let mut belief: BTreeMap<usize, Vec<f64>> = order
            .iter()
            .map(|&u| {
                let n = self.grids[u - 1].len();
                let b = match clamp[u - 1] {
                    Some(k) => (0..n).map(|i| if i == k { 0.0 } else { f64::NEG_INFINITY }).collect(),
                    None => vec![0.0; n],
                };
                (u, b)
            })
            .collect();

        for &u in order.iter().skip(1).rev() {
            let p = parent[&u];
            let key = (p.min(u), p.max(u));
            let bu = belief.remove(&u).expect("child belief");
            let np = self.grids[p - 1].len();
            let mut msg = vec![f64::NEG_INFINITY; np];
            for (pv, m) in msg.iter_mut().enumerate() {
                for (uv, &b) in bu.iter().enumerate() {
                    if b == f64::NEG_INFINITY {
                        continue;
                    }
                    let cand = self.edge_value(key, p, pv, uv) + b;
                    if cand > *m {
                        *m = cand;
                    }
                }
            }
            let bp = belief.get_mut(&p).expect("parent belief");
            bp.iter_mut().zip(&msg).for_each(|(b, m)| *b += m);
        }
        belief.remove(&root).expect("root belief")
    }

    /// Exact grid maximum by dynamic programming on each tree.
    pub fn maximize(&self) -> (Vec<usize>, f64) {
        let d = self.grids.len();
        let mut idx = vec![0usize; d];
        for (&i, t) in &self.singles {
            idx[i - 1] = first_max(t).0;
        }
        for tree in self.trees() {
            let mut adj: BTreeMap<usize, Vec<usize>> = tree.nodes.iter().map(|&n| (n, Vec::new())).collect();
            for &(a, b) in &tree.edges {
                adj.get_mut(&a).expect("node").push(b);
                adj.get_mut(&b).expect("node").push(a);
            }
            let mut clamp: Vec<Option<usize>> = vec![None; d];
            for &node in &tree.nodes {
                let mm = self.max_marginal(&tree, &adj, node, &clamp);
                let (k, _) = first_max(&mm);
                clamp[node - 1] = Some(k);
                idx[node - 1] = k;
            }
        }
        let value = self.value_at(&idx);
        (idx, value)
    }

    /// Exhaustive search with the same tie-break. Test oracle.
    pub fn brute_force(&self) -> Result<(Vec<usize>, f64)> {
        let sizes: Vec<usize> = self.grids.iter().map(Vec::len).collect();
        enumerate_max(&sizes, |idx| Ok(self.value_at(idx)))
    }

    fn trees(&self) -> Vec<TreeGroup> {
        let d = self.grids.len();
        let mut uf = crate::union_find::UnionFind::new(d);
        for &(a, b) in self.edges.keys() {
            uf.union(a - 1, b - 1);
        }
        let mut groups: BTreeMap<usize, TreeGroup> = BTreeMap::new();
        let mut touched = vec![false; d + 1];
        for &(a, b) in self.edges.keys() {
            touched[a] = true;
            touched[b] = true;
            groups.entry(uf.find(a - 1)).or_default().edges.push((a, b));
        }
        for i in (1..=d).filter(|&i| touched[i]) {
            groups.get_mut(&uf.find(i - 1)).expect("group").nodes.push(i);
        }
        let mut trees: Vec<TreeGroup> = groups.into_values().collect();
        trees.sort_by_key(|t| t.nodes[0]);
        trees
    }
}

/// Enumerates every grid index vector in lexicographic order (dimension 1
/// most significant) and returns the lowest index attaining the maximum.
fn enumerate_max(sizes: &[usize], mut f: impl FnMut(&[usize]) -> Result<f64>) -> Result<(Vec<usize>, f64)> {
    let total = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
    match total {
        Some(n) if n <= BRUTE_FORCE_LIMIT => {}
        _ => {
            return Err(Error::Resource(format!(
                "grid of {sizes:?} points exceeds the exhaustive-search limit of {BRUTE_FORCE_LIMIT}"
            )))
        }
    }
    let mut values = Vec::new();
    let mut idx = vec![0usize; sizes.len()];
    loop {
        values.push(f(&idx)?);
        let mut k = sizes.len();
        loop {
            if k == 0 {
                let (best, m) = first_max(&values);
                return Ok((unflatten(best, sizes), m));
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sizes[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn unflatten(mut flat: usize, sizes: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; sizes.len()];
    for k in (0..sizes.len()).rev() {
        idx[k] = flat % sizes[k];
        flat /= sizes[k];
    }
    idx
}

/// Evaluates every component's acquisition term on its grid (or grid pair).
pub fn build_tables(model: &GpModel, spec: &AcquisitionSpec, t: usize, domain: &DomainSpec, memory_cap_mb: f64) -> Result<GridTables> {
    let g = model.decomposition();
    if domain.dim() != g.dim() {
        return Err(Error::invalid(format!("domain has {} dimensions, model has {}", domain.dim(), g.dim())));
    }
    g.validate()?;
    let grids = domain.grids();
    let cells: usize = g
        .components()
        .iter()
        .map(|c| c.dims().iter().map(|&i| grids[i - 1].len()).product::<usize>())
        .sum();
    let mb = (cells * std::mem::size_of::<f64>()) as f64 / (1024.0 * 1024.0);
    if mb > memory_cap_mb {
        return Err(Error::Resource(format!(
            "acquisition tables need {mb:.1} MB, above the {memory_cap_mb} MB cap; lower the grid size"
        )));
    }

    let mut singles = BTreeMap::new();
    let mut edges = BTreeMap::new();
    for c in g.components() {
        let rule = TermRule::for_component(model, c, spec, t)?;
        match c.dims() {
            [a] => {
                let pts: Vec<Vec<f64>> = grids[a - 1].iter().map(|&v| vec![v]).collect();
                singles.insert(*a, eval_terms(model, c, rule, &pts)?);
            }
            [a, b] => {
                let (ga, gb) = (&grids[a - 1], &grids[b - 1]);
                let mut table = Vec::with_capacity(ga.len() * gb.len());
                let mut pts = Vec::with_capacity(BATCH);
                for &va in ga {
                    for &vb in gb {
                        pts.push(vec![va, vb]);
                        if pts.len() == BATCH {
                            table.extend(eval_terms(model, c, rule, &pts)?);
                            pts.clear();
                        }
                    }
                }
                if !pts.is_empty() {
                    table.extend(eval_terms(model, c, rule, &pts)?);
                }
                edges.insert((*a, *b), table);
            }
            _ => return Err(Error::invalid(format!("component {{{c}}} is not a singleton or an edge"))),
        }
    }
    Ok(GridTables { grids, singles, edges })
}

fn eval_terms(model: &GpModel, c: &Component, rule: TermRule, pts: &[Vec<f64>]) -> Result<Vec<f64>> {
    let (means, vars) = model.posterior_component_batch(c, pts)?;
    Ok(means.iter().zip(&vars).map(|(&m, &v)| rule.apply(m, v)).collect())
}

/// Maximises the additive acquisition over the grid by message passing.
pub fn maximize_additive(model: &GpModel, spec: &AcquisitionSpec, t: usize, domain: &DomainSpec, opts: &MaximizeOptions) -> Result<Maximum> {
    let tables = build_tables(model, spec, t, domain, opts.memory_cap_mb)?;
    let (indices, value) = tables.maximize();
    let x: Vec<f64> = indices.iter().enumerate().map(|(k, &i)| tables.grids[k][i]).collect();
    let mut best = Maximum { x, indices, value };
    if opts.refine {
        refine(model, spec, t, domain, &mut best)?;
    }
    Ok(best)
}

/// Exhaustive grid search evaluating the acquisition point by point.
pub fn brute_force_max(model: &GpModel, spec: &AcquisitionSpec, t: usize, domain: &DomainSpec) -> Result<Maximum> {
    if domain.dim() != model.decomposition().dim() {
        return Err(Error::invalid("domain and model dimensions differ"));
    }
    let grids = domain.grids();
    let sizes: Vec<usize> = grids.iter().map(Vec::len).collect();
    let mut x = vec![0.0; sizes.len()];
    let (indices, value) = enumerate_max(&sizes, |idx| {
        for (k, &i) in idx.iter().enumerate() {
            x[k] = grids[k][i];
        }
        total_acquisition(model, &x, spec, t)
    })?;
    let x = indices.iter().enumerate().map(|(k, &i)| grids[k][i]).collect();
    Ok(Maximum { x, indices, value })
}

/// One pass of golden-section search per continuous dimension, within one
/// grid step either side of the current point. Only accepts improvements.
fn refine(model: &GpModel, spec: &AcquisitionSpec, t: usize, domain: &DomainSpec, best: &mut Maximum) -> Result<()> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut value = total_acquisition(model, &best.x, spec, t)?;
    for (k, dd) in domain.dims().iter().enumerate() {
        let DimDomain::Continuous { lo, hi, grid } = *dd else { continue };
        let step = (hi - lo) / (grid as f64 - 1.0);
        let (mut a, mut b) = ((best.x[k] - step).max(lo), (best.x[k] + step).min(hi));
        let mut x = best.x.clone();
        let eval = |v: f64, x: &mut Vec<f64>| -> Result<f64> {
            x[k] = v;
            total_acquisition(model, x, spec, t)
        };
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let (mut fc, mut fd) = (eval(c, &mut x)?, eval(d, &mut x)?);
        for _ in 0..40 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = eval(c, &mut x)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = eval(d, &mut x)?;
            }
        }
        let (cand, fv) = if fc > fd { (c, fc) } else { (d, fd) };
        if fv > value {
            best.x[k] = cand;
            value = fv;
        }
    }
    best.value = value;
    Ok(())
}
