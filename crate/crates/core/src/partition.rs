//! Stopping-time dyadic partition of a density: the root cube is halved
//! along every axis until each cube carries mass at most `lambda`, and the
//! resulting leaves are distributed into groups whose smallest cubes carry
//! mass at least `lambda` with at most `2^d` cubes of any one size.
//!
//! Cube masses come from a mass pyramid over the root cube: every parent mass
//! is the sum of its `2^d` children in lexicographic order, so leaf masses add
//! up to the root mass exactly.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::states::DensityField;

pub const DEFAULT_MAX_DEPTH: u32 = 40;

/// A grid-aligned cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicCube {
    pub corner: Vec<f64>,
    pub side: f64,
    pub depth: u32,
    /// `int_Q rho`.
    pub mass: f64,
}

impl DyadicCube {
    pub fn new(corner: Vec<f64>, side: f64, depth: u32, mass: f64) -> Self {
        Self { corner, side, depth, mass }
    }

    pub fn dimension(&self) -> usize {
        self.corner.len()
    }

    /// `|Q| = side^d`.
    pub fn volume(&self) -> f64 {
        self.side.powi(self.dimension() as i32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionNode {
    pub cube: DyadicCube,
    /// Empty for leaves, `2^d` node indices in lexicographic corner order
    /// otherwise.
    pub children: Vec<usize>,
}

/// Node 0 is the root; nodes are stored in depth-first pre-order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionTree {
    pub dimension: usize,
    pub lambda: f64,
    pub max_depth: u32,
    pub nodes: Vec<PartitionNode>,
}

impl PartitionTree {
    pub fn root(&self) -> &DyadicCube {
        &self.nodes[0].cube
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.nodes[node].children.is_empty()
    }

    pub fn leaf_ids(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.is_leaf(i))
    }

    pub fn leaves(&self) -> impl Iterator<Item = &DyadicCube> + '_ {
        self.leaf_ids().map(|i| &self.nodes[i].cube)
    }

    pub fn internal_ids(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| !self.is_leaf(i))
    }

    /// Sum of leaf masses, associated the same way as the pyramid; equals
    /// the root mass bit for bit.
    pub fn leaf_mass_total(&self) -> f64 {
        fn total(tree: &PartitionTree, node: usize) -> f64 {
            let children = &tree.nodes[node].children;
            if children.is_empty() {
                tree.nodes[node].cube.mass
            } else {
                children.iter().fold(0.0, |acc, &c| acc + total(tree, c))
            }
        }
        total(self, 0)
    }
}

/// Per-level cell masses over the root cube; level 0 is the grid itself.
struct MassPyramid {
    dimension: usize,
    origin: Vec<i64>,
    cells_per_side: usize,
    levels: Vec<Vec<f64>>,
}

impl MassPyramid {
    fn build(rho: &DensityField, origin: Vec<i64>, cells_per_side: usize) -> Self {
        let grid = rho.grid();
        let d = grid.dimension();
        let w = grid.cell_volume();
        let s = cells_per_side;
        let mut base = vec![0.0; s.pow(d as u32)];
        for (flat, m) in base.iter_mut().enumerate() {
            let idx = unflatten(flat, s, d);
            let cell: Option<Vec<usize>> = (0..d)
                .map(|a| {
                    let g = origin[a] + idx[a] as i64;
                    (g >= 0 && (g as usize) < grid.n).then_some(g as usize)
                })
                .collect();
            if let Some(cell) = cell {
                *m = rho.values()[grid.flat_index(&cell)] * w;
            }
        }
        let mut levels = vec![base];
        let mut side = s;
        while side > 1 {
            let half = side / 2;
            let finer = levels.last().expect("non-empty");
            let coarse = (0..half.pow(d as u32))
                .map(|flat| {
                    let q = unflatten(flat, half, d);
                    (0..1usize << d).fold(0.0, |acc, child| {
                        let c: Vec<usize> = (0..d).map(|a| 2 * q[a] + child_offset(child, a, d)).collect();
                        acc + finer[flatten(&c, side)]
                    })
                })
                .collect();
            levels.push(coarse);
            side = half;
        }
        Self { dimension: d, origin, cells_per_side, levels }
    }

    fn top(&self) -> usize {
        self.levels.len() - 1
    }

    fn mass(&self, level: usize, q: &[usize]) -> f64 {
        self.levels[level][flatten(q, self.cells_per_side >> level)]
    }

    fn cube(&self, rho: &DensityField, level: usize, q: &[usize]) -> DyadicCube {
        let grid = rho.grid();
        let h = grid.cell_size(0);
        let width = 1usize << level;
        let corner =
            (0..self.dimension).map(|a| grid.corner[a] + (self.origin[a] + (q[a] * width) as i64) as f64 * h).collect();
        DyadicCube::new(corner, width as f64 * h, (self.top() - level) as u32, self.mass(level, q))
    }
}

fn child_offset(child: usize, axis: usize, d: usize) -> usize {
    (child >> (d - 1 - axis)) & 1
}

fn unflatten(flat: usize, side: usize, d: usize) -> Vec<usize> {
    (0..d).map(|a| (flat / side.pow((d - 1 - a) as u32)) % side).collect()
}

fn flatten(idx: &[usize], side: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * side + i)
}

fn cubic_cell_size(rho: &DensityField) -> Result<f64> {
    let grid = rho.grid();
    let sizes: Vec<f64> = (0..grid.dimension()).map(|a| grid.cell_size(a)).collect();
    if sizes.iter().any(|h| ((h - sizes[0]) / sizes[0]).abs() > 1e-12) {
        return Err(Error::NonCubicCells(sizes));
    }
    Ok(sizes[0])
}

fn root_placement(rho: &DensityField) -> Result<(Vec<i64>, usize)> {
    cubic_cell_size(rho)?;
    let grid = rho.grid();
    let d = grid.dimension();
    let mut lo = vec![usize::MAX; d];
    let mut hi = vec![0usize; d];
    for (flat, &r) in rho.values().iter().enumerate() {
        if r > 0.0 {
            for (a, i) in grid.multi_index(flat).into_iter().enumerate() {
                lo[a] = lo[a].min(i);
                hi[a] = hi[a].max(i);
            }
        }
    }
    if lo[0] == usize::MAX || rho.mass() <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let extent = (0..d).map(|a| hi[a] - lo[a] + 1).max().expect("d >= 1");
    let side = extent.next_power_of_two();
    let origin = (0..d).map(|a| if side <= grid.n { lo[a].min(grid.n - side) as i64 } else { 0 }).collect();
    Ok((origin, side))
}

/// Smallest grid-aligned cube with a power-of-two number of cells per side
/// containing every cell where `rho > 0`. It is shifted to lie inside the
/// box when it fits.
pub fn root_cube(rho: &DensityField) -> Result<DyadicCube> {
    let (origin, side) = root_placement(rho)?;
    let pyramid = MassPyramid::build(rho, origin, side);
    let top = pyramid.top();
    Ok(pyramid.cube(rho, top, &vec![0; rho.dimension()]))
}

pub fn subdivide(rho: &DensityField, lambda: f64) -> Result<PartitionTree> {
    subdivide_with_depth(rho, lambda, DEFAULT_MAX_DEPTH)
}

/// Splits every cube with mass above `lambda` into its `2^d` children.
pub fn subdivide_with_depth(rho: &DensityField, lambda: f64, max_depth: u32) -> Result<PartitionTree> {
    ensure_positive("lambda", lambda)?;
    let (origin, side) = root_placement(rho)?;
    let pyramid = MassPyramid::build(rho, origin, side);
    let max_cell_mass = pyramid.levels[0].iter().copied().fold(0.0, f64::max);
    if max_cell_mass > lambda {
        return Err(Error::GridAtomicity { lambda, max_cell_mass });
    }
    let d = rho.dimension();
    let mut tree = PartitionTree { dimension: d, lambda, max_depth, nodes: Vec::new() };
    split(rho, &pyramid, &mut tree, pyramid.top(), vec![0; d])?;
    Ok(tree)
}

fn split(
    rho: &DensityField,
    pyramid: &MassPyramid,
    tree: &mut PartitionTree,
    level: usize,
    q: Vec<usize>,
) -> Result<usize> {
    let cube = pyramid.cube(rho, level, &q);
    let id = tree.nodes.len();
    let needs_split = cube.mass > tree.lambda;
    if needs_split && cube.depth >= tree.max_depth {
        return Err(Error::MaxDepthExceeded { max_depth: tree.max_depth });
    }
    tree.nodes.push(PartitionNode { cube, children: Vec::new() });
    if needs_split {
        // level > 0 here: single cells never exceed lambda.
        let d = pyramid.dimension;
        let children = (0..1usize << d)
            .map(|child| {
                let c = (0..d).map(|a| 2 * q[a] + child_offset(child, a, d)).collect();
                split(rho, pyramid, tree, level - 1, c)
            })
            .collect::<Result<Vec<_>>>()?;
        tree.nodes[id].children = children;
    }
    Ok(id)
}

/// A set of leaves whose smallest cubes jointly carry mass at least
/// `lambda`, with at most `2^d` members of each size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeGroup {
    pub node_ids: Vec<usize>,
    pub members: Vec<DyadicCube>,
    /// `m`, the volume of the smallest members.
    pub smallest_volume: f64,
    /// Number of members of volume `m`.
    pub base_count: usize,
    /// Set for the single-leaf tree, where no group can reach `lambda`.
    pub property_i_waived: bool,
}

impl CubeGroup {
    fn smallest_depth(&self) -> u32 {
        self.members.iter().map(|c| c.depth).max().expect("groups are non-empty")
    }

    fn base(&self) -> impl Iterator<Item = &DyadicCube> {
        let depth = self.smallest_depth();
        self.members.iter().filter(move |c| c.depth == depth)
    }

    /// Total mass of the members of volume `m`.
    pub fn base_mass(&self) -> f64 {
        self.base().fold(0.0, |acc, c| acc + c.mass)
    }
}

/// Groups the leaves of `tree`.
///
/// Internal nodes are visited deepest first. A node whose children are all
/// leaves starts a group with them. A node with internal children passes up
/// every group they carry, and hands its leaf children (all one size, fewer
/// than `2^d`) to the carried group with the smallest base volume, ties
/// going to the lexicographically smallest base corner. Each group therefore
/// gains at most one batch per size.
pub fn group(tree: &PartitionTree) -> Vec<CubeGroup> {
    if tree.is_leaf(0) {
        let cube = tree.nodes[0].cube.clone();
        return vec![CubeGroup {
            node_ids: vec![0],
            smallest_volume: cube.volume(),
            members: vec![cube],
            base_count: 1,
            property_i_waived: true,
        }];
    }

    let mut internal: Vec<usize> = tree.internal_ids().collect();
    internal.sort_by(|&a, &b| tree.nodes[b].cube.depth.cmp(&tree.nodes[a].cube.depth).then(a.cmp(&b)));

    let mut groups: Vec<CubeGroup> = Vec::new();
    let mut carried: HashMap<usize, Vec<usize>> = HashMap::new();
    for node in internal {
        let children = &tree.nodes[node].children;
        let (markers, leaves): (Vec<usize>, Vec<usize>) = children.iter().partition(|&&c| !tree.is_leaf(c));
        if markers.is_empty() {
            let members: Vec<DyadicCube> = leaves.iter().map(|&c| tree.nodes[c].cube.clone()).collect();
            groups.push(CubeGroup {
                smallest_volume: members[0].volume(),
                base_count: members.len(),
                node_ids: leaves,
                members,
                property_i_waived: false,
            });
            carried.insert(node, vec![groups.len() - 1]);
            continue;
        }
        let held: Vec<usize> =
            markers.iter().flat_map(|m| carried.remove(m).expect("children processed first")).collect();
        if !leaves.is_empty() {
            let target = *held
                .iter()
                .min_by(|&&a, &&b| {
                    let (ga, gb) = (&groups[a], &groups[b]);
                    ga.smallest_volume
                        .total_cmp(&gb.smallest_volume)
                        .then_with(|| lexicographic(&ga.members[0].corner, &gb.members[0].corner))
                })
                .expect("at least one marker child");
            for &leaf in &leaves {
                groups[target].node_ids.push(leaf);
                groups[target].members.push(tree.nodes[leaf].cube.clone());
            }
        }
        carried.insert(node, held);
    }
    groups
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

/// Independent check of the grouping postconditions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupValidation {
    /// Base mass at least `lambda` (waived groups report true).
    pub property_i: Vec<bool>,
    /// At most `2^d` members per size.
    pub property_ii: Vec<bool>,
    /// Every leaf in exactly one group and no internal node in any group.
    pub partition_complete: bool,
}

impl GroupValidation {
    pub fn all_hold(&self) -> bool {
        self.partition_complete && self.property_i.iter().all(|&b| b) && self.property_ii.iter().all(|&b| b)
    }
}

pub fn validate_groups(tree: &PartitionTree, groups: &[CubeGroup]) -> GroupValidation {
    let limit = 1usize << tree.dimension;
    let property_i = groups.iter().map(|g| g.property_i_waived || g.base_mass() >= tree.lambda).collect();
    let property_ii = groups
        .iter()
        .map(|g| {
            let mut per_depth: HashMap<u32, usize> = HashMap::new();
            for c in &g.members {
                *per_depth.entry(c.depth).or_default() += 1;
            }
            per_depth.values().all(|&count| count <= limit)
        })
        .collect();
    let mut seen = vec![0usize; tree.nodes.len()];
    for g in groups {
        for &id in &g.node_ids {
            seen[id] += 1;
        }
    }
    let partition_complete = (0..tree.nodes.len()).all(|i| if tree.is_leaf(i) { seen[i] == 1 } else { seen[i] == 0 });
    GroupValidation { property_i, property_ii, partition_complete }
}

/// `C = 4^{d+2} / 3`.
pub fn group_constant(d: usize) -> f64 {
    4f64.powi(d as i32 + 2) / 3.0
}

/// The two intermediate estimates behind the group inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupBounds {
    /// `max_{|Q| = m} |Q|^{-2/d} M_Q^{1+2/d}`.
    pub max_base_term: f64,
    /// `m^{-2/d} (lambda / 2^d)^{1+2/d}`; bounds the previous from below.
    pub max_base_lower: f64,
    /// `sum_Q |Q|^{-2/d} M_Q^{1+1/d}`.
    pub size_sum: f64,
    /// `(4/3) 2^d m^{-2/d} lambda^{1+1/d}`; bounds the previous from above.
    pub size_sum_upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupInequality {
    pub constant: f64,
    pub total: f64,
    pub per_group: Vec<f64>,
    pub bounds: Vec<GroupBounds>,
}

/// Per-cube term `|Q|^{-2/d} [C lambda^{-1/d} M^{1+2/d} - M^{1+1/d}]`.
pub fn group_cube_term(cube: &DyadicCube, d: usize, lambda: f64, constant: f64) -> f64 {
    let df = d as f64;
    let m = cube.mass;
    cube.volume().powf(-2.0 / df)
        * (constant * lambda.powf(-1.0 / df) * m.powf(1.0 + 2.0 / df) - m.powf(1.0 + 1.0 / df))
}

/// Evaluates the group inequality with `C = 4^{d+2}/3` for every group.
pub fn group_inequality_check(groups: &[CubeGroup], d: usize, lambda: f64) -> GroupInequality {
    let df = d as f64;
    let constant = group_constant(d);
    let per_group: Vec<f64> =
        groups.iter().map(|g| g.members.iter().map(|c| group_cube_term(c, d, lambda, constant)).sum()).collect();
    let bounds = groups
        .iter()
        .map(|g| {
            let m = g.smallest_volume;
            let scale = |q: &DyadicCube| q.volume().powf(-2.0 / df);
            GroupBounds {
                max_base_term: g.base().map(|q| scale(q) * q.mass.powf(1.0 + 2.0 / df)).fold(0.0, f64::max),
                max_base_lower: m.powf(-2.0 / df) * (lambda / 2f64.powf(df)).powf(1.0 + 2.0 / df),
                size_sum: g.members.iter().map(|q| scale(q) * q.mass.powf(1.0 + 1.0 / df)).sum(),
                size_sum_upper: 4.0 / 3.0 * 2f64.powf(df) * m.powf(-2.0 / df) * lambda.powf(1.0 + 1.0 / df),
            }
        })
        .collect();
    GroupInequality { constant, total: per_group.iter().sum(), per_group, bounds }
}

/// JSON export of a tree and its groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionExport {
    pub dimension: usize,
    pub lambda: f64,
    pub nodes: Vec<ExportNode>,
    pub groups: Vec<ExportGroup>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportNode {
    pub corner: Vec<f64>,
    pub side: f64,
    pub depth: u32,
    pub mass: f64,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportGroup {
    pub members: Vec<usize>,
    pub smallest_volume: f64,
    pub base_count: usize,
    pub property_i_waived: bool,
    pub inequality_value: f64,
}

impl PartitionExport {
    pub fn new(tree: &PartitionTree, groups: &[CubeGroup]) -> Self {
        let check = group_inequality_check(groups, tree.dimension, tree.lambda);
        Self {
            dimension: tree.dimension,
            lambda: tree.lambda,
            nodes: tree
                .nodes
                .iter()
                .map(|n| ExportNode {
                    corner: n.cube.corner.clone(),
                    side: n.cube.side,
                    depth: n.cube.depth,
                    mass: n.cube.mass,
                    children: n.children.clone(),
                })
                .collect(),
            groups: groups
                .iter()
                .zip(&check.per_group)
                .map(|(g, &v)| ExportGroup {
                    members: g.node_ids.clone(),
                    smallest_volume: g.smallest_volume,
                    base_count: g.base_count,
                    property_i_waived: g.property_i_waived,
                    inequality_value: v,
                })
                .collect(),
        }
    }
}
