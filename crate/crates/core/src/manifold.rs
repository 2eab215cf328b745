//! Compact p-adic analytic manifolds realised as a nerve complex whose faces
//! host rooted trees of balls.
//!
//! Each root is a scaled copy of `Z_p^n` attached to one face of the nerve,
//! carrying a constant density of the canonical measure. The poset of balls
//! and faces is ordered by region inclusion: a ball lies below its hosting
//! face, and a face with a larger vertex set (a deeper chart intersection)
//! lies below its subfaces. Functions are discretised on the depth-`m` balls
//! ("cells"), while every tail sum over the infinite trees is evaluated in
//! closed form.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::ops::Range;
use std::str::FromStr;

use num::rational::BigRational;
use num::traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{self, ball_join, ball_measure, BallAddress, PrimeContext};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Face {
    pub id: String,
    pub vertices: BTreeSet<usize>,
}

impl Face {
    /// Simplicial dimension, `|vertices| - 1`.
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }
}

#[derive(Debug, Clone)]
pub struct NerveComplex {
    vertex_ids: Vec<String>,
    faces: Vec<Face>,
    by_vertices: BTreeMap<BTreeSet<usize>, usize>,
    hasse: Vec<Vec<usize>>,
}

impl NerveComplex {
    /// Builds the complex from named faces, each given by the chart ids it
    /// intersects. Checks subset closure and connectivity of the 1-skeleton.
    pub fn new(faces: &[(String, Vec<String>)]) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::invalid("nerve complex has no faces"));
        }
        let mut vertex_ids: Vec<String> = faces
            .iter()
            .flat_map(|(_, vs)| vs.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        vertex_ids.sort();
        let vindex: BTreeMap<&str, usize> = vertex_ids.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();

        let mut out = Vec::with_capacity(faces.len());
        let mut by_vertices = BTreeMap::new();
        let mut ids = BTreeSet::new();
        for (id, vs) in faces {
            if vs.is_empty() {
                return Err(Error::invalid(format!("face '{id}' has no vertices")));
            }
            if !ids.insert(id.clone()) {
                return Err(Error::invalid(format!("duplicate face id '{id}'")));
            }
            let set: BTreeSet<usize> = vs.iter().map(|v| vindex[v.as_str()]).collect();
            if set.len() != vs.len() {
                return Err(Error::invalid(format!("face '{id}' repeats a vertex")));
            }
            if by_vertices.insert(set.clone(), out.len()).is_some() {
                return Err(Error::invalid(format!(
                    "face '{id}' duplicates the vertex set of another face"
                )));
            }
            out.push(Face {
                id: id.clone(),
                vertices: set,
            });
        }

        // closure under nonempty subsets: checking codimension-one subfaces suffices inductively
        for f in &out {
            if f.vertices.len() < 2 {
                continue;
            }
            for &v in &f.vertices {
                let mut sub = f.vertices.clone();
                sub.remove(&v);
                if !by_vertices.contains_key(&sub) {
                    let names: Vec<&str> = sub.iter().map(|&i| vertex_ids[i].as_str()).collect();
                    return Err(Error::invalid(format!(
                        "nerve is not closed under subsets: face '{}' contains {{{}}}, which is not a face",
                        f.id,
                        names.join(",")
                    )));
                }
            }
        }

        let mut hasse = vec![Vec::new(); out.len()];
        for (i, f) in out.iter().enumerate() {
            for &v in &f.vertices {
                if f.vertices.len() < 2 {
                    break;
                }
                let mut sub = f.vertices.clone();
                sub.remove(&v);
                let j = by_vertices[&sub];
                hasse[i].push(j);
                hasse[j].push(i);
            }
        }
        for adj in &mut hasse {
            adj.sort_unstable();
            adj.dedup();
        }

        let nerve = NerveComplex {
            vertex_ids,
            faces: out,
            by_vertices,
            hasse,
        };
        if !nerve.is_connected() {
            return Err(Error::invalid("the 1-skeleton of the nerve complex is disconnected"));
        }
        Ok(nerve)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.faces.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(f) = stack.pop() {
            for &g in &self.hasse[f] {
                if !seen[g] {
                    seen[g] = true;
                    stack.push(g);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn vertex_ids(&self) -> &[String] {
        &self.vertex_ids
    }

    pub fn face_by_id(&self, id: &str) -> Option<usize> {
        self.faces.iter().position(|f| f.id == id)
    }

    pub fn face_by_vertices(&self, vs: &BTreeSet<usize>) -> Option<usize> {
        self.by_vertices.get(vs).copied()
    }

    /// Neighbours of a face in the Hasse diagram (codimension-one incidences).
    pub fn hasse_neighbors(&self, face: usize) -> &[usize] {
        &self.hasse[face]
    }

    pub fn dim(&self) -> usize {
        self.faces.iter().map(Face::dim).max().unwrap_or(0)
    }

    /// Face spanned by the common vertices of two faces, if any.
    pub fn meet(&self, a: usize, b: usize) -> Option<usize> {
        let common: BTreeSet<usize> = self.faces[a]
            .vertices
            .intersection(&self.faces[b].vertices)
            .copied()
            .collect();
        if common.is_empty() {
            None
        } else {
            self.face_by_vertices(&common)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Root {
    pub id: String,
    pub face: usize,
    pub density: BigRational,
}

/// An element of the poset of faces and balls.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PosetNode {
    Face(usize),
    Ball { root: usize, address: BallAddress },
}

/// A depth-`m` ball of some root: the carrier of one function value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub root: usize,
    pub address: BallAddress,
}

impl CellIndex {
    pub fn node(&self) -> PosetNode {
        PosetNode::Ball {
            root: self.root,
            address: self.address.clone(),
        }
    }
}

/// Join of two cells computed from their positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairJoin {
    /// Ball of the common root at the given depth.
    Ball {
        root: usize,
        depth: usize,
    },
    Face(usize),
}

/// Optional overrides for [`ManifoldModel::builtin`].
#[derive(Debug, Clone, Default)]
pub struct BuiltinOptions {
    pub p: Option<u32>,
    pub n: Option<usize>,
    pub depth: Option<usize>,
    /// Root densities in root order; the length must match the model.
    pub densities: Option<Vec<BigRational>>,
}

pub const BUILTIN_NAMES: [&str; 3] = ["single_ball", "p1_q2", "triangle"];

#[derive(Debug, Clone)]
pub struct ManifoldModel {
    ctx: PrimeContext,
    nerve: NerveComplex,
    roots: Vec<Root>,
    face_measure: Vec<BigRational>,
    tails: Vec<BigRational>,
    // [a][b]: exact cross-root distance for a != b
    cross_distance: Vec<Vec<BigRational>>,
    cross_distance_f64: Vec<Vec<f64>>,
    cross_join: Vec<Vec<Option<usize>>>,
    // [root][depth]: measure and distance of the depth-d ball
    ball_measure_f64: Vec<Vec<f64>>,
    within_distance: Vec<Vec<f64>>,
    level_stride: Vec<usize>,
}

impl ManifoldModel {
    pub fn new(ctx: PrimeContext, nerve: NerveComplex, roots: Vec<Root>) -> Result<Self> {
        if roots.is_empty() {
            return Err(Error::invalid("model has no roots"));
        }
        let mut ids = BTreeSet::new();
        for r in &roots {
            if !ids.insert(r.id.as_str()) {
                return Err(Error::invalid(format!("duplicate root id '{}'", r.id)));
            }
            if !padic::is_positive(&r.density) {
                return Err(Error::invalid(format!(
                    "root '{}' has nonpositive density {}",
                    r.id, r.density
                )));
            }
            if r.face >= nerve.faces.len() {
                return Err(Error::invalid(format!("root '{}' refers to a missing face", r.id)));
            }
        }

        let face_measure: Vec<BigRational> = nerve
            .faces
            .iter()
            .map(|f| {
                roots
                    .iter()
                    .filter(|r| f.vertices.is_subset(&nerve.faces[r.face].vertices))
                    .fold(BigRational::zero(), |acc, r| acc + &r.density)
            })
            .collect();

        let pn = ctx.p_power(-(ctx.n() as i64));
        let tails: Vec<BigRational> = roots.iter().map(|r| &r.density / (&pn - BigRational::one())).collect();

        let nf = nerve.faces.len();
        let mut nerve_dist = vec![vec![BigRational::zero(); nf]; nf];
        for (s, row) in nerve_dist.iter_mut().enumerate() {
            *row = node_weighted_shortest_paths(&nerve, &face_measure, s);
        }

        let nr = roots.len();
        let mut cross_distance = vec![vec![BigRational::zero(); nr]; nr];
        let mut cross_join = vec![vec![None; nr]; nr];
        for a in 0..nr {
            for b in 0..nr {
                if a == b {
                    continue;
                }
                cross_distance[a][b] = &tails[a] + &nerve_dist[roots[a].face][roots[b].face] + &tails[b];
                cross_join[a][b] = nerve.meet(roots[a].face, roots[b].face);
            }
        }
        let cross_distance_f64 = cross_distance
            .iter()
            .map(|row| row.iter().map(padic::to_f64).collect())
            .collect();

        let m = ctx.depth();
        let mut ball_measure_f64 = Vec::with_capacity(nr);
        let mut within_distance = Vec::with_capacity(nr);
        for r in &roots {
            let mut ms = Vec::with_capacity(m + 1);
            let mut ds = Vec::with_capacity(m + 1);
            let mut addr = BallAddress::root();
            for _ in 0..=m {
                let mu = ball_measure(&ctx, &addr, &r.density);
                ms.push(padic::to_f64(&mu));
                ds.push(padic::rational_root(&mu, ctx.n()));
                addr = addr.child(0);
            }
            ball_measure_f64.push(ms);
            within_distance.push(ds);
        }
        let b = ctx.branching();
        let level_stride = (0..=m).map(|d| b.pow((m - d) as u32)).collect();

        Ok(ManifoldModel {
            ctx,
            nerve,
            roots,
            face_measure,
            tails,
            cross_distance,
            cross_distance_f64,
            cross_join,
            ball_measure_f64,
            within_distance,
            level_stride,
        })
    }

    /// Parses and validates a manifold document.
    pub fn load_model(text: &str) -> Result<Self> {
        let doc: ManifoldDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn from_document(doc: &ManifoldDoc) -> Result<Self> {
        let ctx = PrimeContext::new(doc.p, doc.n, doc.depth)?;
        let faces: Vec<(String, Vec<String>)> = doc.faces.iter().map(|f| (f.id.clone(), f.vertices.clone())).collect();
        let nerve = NerveComplex::new(&faces)?;
        let mut roots = Vec::with_capacity(doc.roots.len());
        for r in &doc.roots {
            let face = nerve
                .face_by_id(&r.face)
                .ok_or_else(|| Error::invalid(format!("root '{}' is hosted at unknown face '{}'", r.id, r.face)))?;
            let density = parse_rational(&r.density)?;
            roots.push(Root {
                id: r.id.clone(),
                face,
                density,
            });
        }
        Self::new(ctx, nerve, roots)
    }

    pub fn to_document(&self) -> ManifoldDoc {
        ManifoldDoc {
            p: self.ctx.p(),
            n: self.ctx.n(),
            depth: self.ctx.depth(),
            faces: self
                .nerve
                .faces
                .iter()
                .map(|f| FaceDoc {
                    id: f.id.clone(),
                    vertices: f.vertices.iter().map(|&v| self.nerve.vertex_ids[v].clone()).collect(),
                })
                .collect(),
            roots: self
                .roots
                .iter()
                .map(|r| RootDoc {
                    id: r.id.clone(),
                    face: self.nerve.faces[r.face].id.clone(),
                    density: r.density.to_string(),
                })
                .collect(),
        }
    }

    /// One of the builtin models: `single_ball` (`Z_p^n` with unit density),
    /// `p1_q2` (the projective line over `Q_2` split along its two standard
    /// charts) and `triangle` (a full 2-simplex with one root per face).
    pub fn builtin(name: &str, opts: &BuiltinOptions) -> Result<Self> {
        let half = || BigRational::new(1.into(), 2.into());
        type Faces<'a> = Vec<(&'a str, Vec<&'a str>)>;
        type Roots<'a> = Vec<(&'a str, &'a str, BigRational)>;
        let (p, n, m, faces, roots): (u32, usize, usize, Faces, Roots) = match name {
            "single_ball" => (
                2,
                1,
                2,
                vec![("v0", vec!["v0"])],
                vec![("v0", "v0", BigRational::one())],
            ),
            "p1_q2" => (
                2,
                1,
                2,
                vec![("v0", vec!["v0"]), ("v1", vec!["v1"]), ("v01", vec!["v0", "v1"])],
                vec![("v0", "v0", half()), ("v1", "v1", half()), ("v01", "v01", half())],
            ),
            "triangle" => {
                let faces = vec![
                    ("a", vec!["a"]),
                    ("b", vec!["b"]),
                    ("c", vec!["c"]),
                    ("ab", vec!["a", "b"]),
                    ("bc", vec!["b", "c"]),
                    ("ac", vec!["a", "c"]),
                    ("abc", vec!["a", "b", "c"]),
                ];
                let roots = faces.iter().map(|(id, _)| (*id, *id, half())).collect();
                (2, 1, 2, faces, roots)
            }
            other => {
                return Err(Error::invalid(format!(
                    "unknown builtin model '{other}' (expected one of {})",
                    BUILTIN_NAMES.join(", ")
                )))
            }
        };
        let ctx = PrimeContext::new(opts.p.unwrap_or(p), opts.n.unwrap_or(n), opts.depth.unwrap_or(m))?;
        let face_list: Vec<(String, Vec<String>)> = faces
            .iter()
            .map(|(id, vs)| (id.to_string(), vs.iter().map(|v| v.to_string()).collect()))
            .collect();
        let nerve = NerveComplex::new(&face_list)?;
        let mut root_list: Vec<Root> = roots
            .into_iter()
            .map(|(id, face, density)| Root {
                id: id.to_string(),
                face: nerve.face_by_id(face).expect("builtin face"),
                density,
            })
            .collect();
        if let Some(ds) = &opts.densities {
            if ds.len() != root_list.len() {
                return Err(Error::invalid(format!(
                    "builtin '{name}' has {} roots but {} densities were given",
                    root_list.len(),
                    ds.len()
                )));
            }
            for (r, d) in root_list.iter_mut().zip(ds) {
                r.density = d.clone();
            }
        }
        Self::new(ctx, nerve, root_list)
    }

    pub fn ctx(&self) -> &PrimeContext {
        &self.ctx
    }

    pub fn nerve(&self) -> &NerveComplex {
        &self.nerve
    }

    pub fn roots(&self) -> &[Root] {
        &self.roots
    }

    pub fn root_by_id(&self, id: &str) -> Option<usize> {
        self.roots.iter().position(|r| r.id == id)
    }

    pub fn dim_nerve(&self) -> usize {
        self.nerve.dim()
    }

    pub fn total_measure(&self) -> BigRational {
        self.roots.iter().fold(BigRational::zero(), |acc, r| acc + &r.density)
    }

    /// Sum of the punctured-ball measures along a maximal path from the root
    /// of `root` down to a point: `density p^-n / (1 - p^-n)`.
    pub fn tail(&self, root: usize) -> &BigRational {
        &self.tails[root]
    }

    /// Minimal total face measure over nerve paths from `a` to `b`, both
    /// endpoints included.
    pub fn nerve_path_weight(&self, a: usize, b: usize) -> BigRational {
        node_weighted_shortest_paths(&self.nerve, &self.face_measure, a)[b].clone()
    }

    // ---- cells ------------------------------------------------------------

    pub fn cell_count(&self) -> usize {
        self.roots.len() * self.ctx.cells_per_root()
    }

    /// All cells in canonical order: roots in document order, addresses
    /// lexicographic.
    pub fn enumerate_cells(&self) -> Vec<CellIndex> {
        (0..self.cell_count()).map(|i| self.cell(i)).collect()
    }

    pub fn cell(&self, pos: usize) -> CellIndex {
        let per = self.ctx.cells_per_root();
        let b = self.ctx.branching();
        let root = pos / per;
        let mut off = pos % per;
        let m = self.ctx.depth();
        let mut digits = vec![0u32; m];
        for slot in digits.iter_mut().rev() {
            *slot = (off % b) as u32;
            off /= b;
        }
        CellIndex {
            root,
            address: BallAddress::from_codes(digits),
        }
    }

    pub fn cell_position(&self, cell: &CellIndex) -> Result<usize> {
        let m = self.ctx.depth();
        if cell.root >= self.roots.len() || cell.address.depth() != m {
            return Err(Error::invalid(format!("{cell:?} is not a cell of this model")));
        }
        let b = self.ctx.branching();
        let mut off = 0usize;
        for &c in cell.address.codes() {
            if c as usize >= b {
                return Err(Error::invalid(format!("{cell:?} has an out-of-range digit")));
            }
            off = off * b + c as usize;
        }
        Ok(cell.root * self.ctx.cells_per_root() + off)
    }

    /// Positions of the cells inside a ball.
    pub fn cells_in_ball(&self, root: usize, address: &BallAddress) -> Range<usize> {
        let m = self.ctx.depth();
        let d = address.depth().min(m);
        let b = self.ctx.branching();
        let mut off = 0usize;
        for &c in &address.codes()[..d] {
            off = off * b + c as usize;
        }
        let width = self.level_stride[d];
        let start = root * self.ctx.cells_per_root() + off * width;
        start..start + width
    }

    pub fn cell_root(&self, pos: usize) -> usize {
        pos / self.ctx.cells_per_root()
    }

    pub fn cell_measure(&self, pos: usize) -> BigRational {
        let r = self.cell_root(pos);
        &self.roots[r].density * self.ctx.p_power((self.ctx.depth() * self.ctx.n()) as i64)
    }

    pub fn cell_measures(&self) -> Vec<f64> {
        let m = self.ctx.depth();
        (0..self.cell_count())
            .map(|i| self.ball_measure_f64[self.cell_root(i)][m])
            .collect()
    }

    /// Depth of the smallest common ball of two cells of the same root.
    pub fn common_depth(&self, i: usize, j: usize) -> usize {
        let per = self.ctx.cells_per_root();
        let (a, b) = (i % per, j % per);
        let m = self.ctx.depth();
        (0..=m)
            .rev()
            .find(|&d| a / self.level_stride[d] == b / self.level_stride[d])
            .unwrap_or(0)
    }

    pub fn pair_join(&self, i: usize, j: usize) -> Option<PairJoin> {
        let (ri, rj) = (self.cell_root(i), self.cell_root(j));
        if ri == rj {
            Some(PairJoin::Ball {
                root: ri,
                depth: self.common_depth(i, j),
            })
        } else {
            self.cross_join[ri][rj].map(PairJoin::Face)
        }
    }

    pub fn pair_join_height(&self, join: PairJoin) -> usize {
        match join {
            PairJoin::Ball { root, depth } => self.ball_height(root, depth),
            PairJoin::Face(f) => self.nerve.faces[f].dim(),
        }
    }

    pub fn pair_join_measure(&self, join: PairJoin) -> BigRational {
        match join {
            PairJoin::Ball { root, depth } => {
                &self.roots[root].density * self.ctx.p_power((depth * self.ctx.n()) as i64)
            }
            PairJoin::Face(f) => self.face_measure[f].clone(),
        }
    }

    pub fn pair_join_measure_f64(&self, join: PairJoin) -> f64 {
        match join {
            PairJoin::Ball { root, depth } => self.ball_measure_f64[root][depth],
            PairJoin::Face(f) => padic::to_f64(&self.face_measure[f]),
        }
    }

    /// Geodetic distance between distinct cells by position.
    pub fn cell_distance(&self, i: usize, j: usize) -> f64 {
        let (ri, rj) = (self.cell_root(i), self.cell_root(j));
        if ri == rj {
            self.within_distance[ri][self.common_depth(i, j)]
        } else {
            self.cross_distance_f64[ri][rj]
        }
    }

    /// Distance between two points of a root tree whose smallest common ball
    /// has the given depth: `mu(join)^(1/n)`.
    pub fn within_tree_distance(&self, root: usize, depth: usize) -> f64 {
        if depth < self.within_distance[root].len() {
            self.within_distance[root][depth]
        } else {
            let mu = ball_measure(
                &self.ctx,
                &BallAddress::from_codes(vec![0; depth]),
                &self.roots[root].density,
            );
            padic::rational_root(&mu, self.ctx.n())
        }
    }

    /// Exact distance between points of two different roots.
    pub fn cross_root_distance(&self, a: usize, b: usize) -> &BigRational {
        &self.cross_distance[a][b]
    }

    pub fn cross_root_distance_f64(&self, a: usize, b: usize) -> f64 {
        self.cross_distance_f64[a][b]
    }

    pub fn cross_root_join(&self, a: usize, b: usize) -> Option<usize> {
        self.cross_join[a][b]
    }

    fn ball_height(&self, root: usize, depth: usize) -> usize {
        self.nerve.faces[self.roots[root].face].dim() + 1 + depth
    }

    pub fn root_height(&self, root: usize) -> usize {
        self.ball_height(root, 0)
    }

    // ---- poset ------------------------------------------------------------

    /// Length of a maximal chain from a nerve vertex down to the node.
    pub fn node_height(&self, node: &PosetNode) -> usize {
        match node {
            PosetNode::Face(f) => self.nerve.faces[*f].dim(),
            PosetNode::Ball { root, address } => self.ball_height(*root, address.depth()),
        }
    }

    /// Strict region inclusion `a < b`.
    pub fn poset_less(&self, a: &PosetNode, b: &PosetNode) -> bool {
        let faces = &self.nerve.faces;
        match (a, b) {
            (PosetNode::Face(x), PosetNode::Face(y)) => x != y && faces[*y].vertices.is_subset(&faces[*x].vertices),
            (PosetNode::Ball { root, .. }, PosetNode::Face(y)) => {
                faces[*y].vertices.is_subset(&faces[self.roots[*root].face].vertices)
            }
            (PosetNode::Face(_), PosetNode::Ball { .. }) => false,
            (PosetNode::Ball { root: r1, address: a1 }, PosetNode::Ball { root: r2, address: a2 }) => {
                r1 == r2 && a1 != a2 && a2.is_prefix_of(a1)
            }
        }
    }

    fn hosting_face(&self, node: &PosetNode) -> usize {
        match node {
            PosetNode::Face(f) => *f,
            PosetNode::Ball { root, .. } => self.roots[*root].face,
        }
    }

    /// Supremum of two nodes, when it exists.
    pub fn poset_join(&self, a: &PosetNode, b: &PosetNode) -> Option<PosetNode> {
        if let (PosetNode::Ball { root: r1, address: a1 }, PosetNode::Ball { root: r2, address: a2 }) = (a, b) {
            if r1 == r2 {
                return Some(PosetNode::Ball {
                    root: *r1,
                    address: ball_join(a1, a2),
                });
            }
        }
        if a == b {
            return Some(a.clone());
        }
        if self.poset_less(a, b) {
            return Some(b.clone());
        }
        if self.poset_less(b, a) {
            return Some(a.clone());
        }
        self.nerve
            .meet(self.hosting_face(a), self.hosting_face(b))
            .map(PosetNode::Face)
    }

    /// Canonical measure of the region represented by a node.
    pub fn node_measure(&self, node: &PosetNode) -> BigRational {
        match node {
            PosetNode::Face(f) => self.face_measure[*f].clone(),
            PosetNode::Ball { root, address } => ball_measure(&self.ctx, address, &self.roots[*root].density),
        }
    }

    /// Geodetic distance between distinct cells.
    pub fn geodetic_distance(&self, x: &CellIndex, y: &CellIndex) -> Result<f64> {
        if x == y {
            return Err(Error::invalid("geodetic distance requires distinct cells"));
        }
        let i = self.cell_position(x)?;
        let j = self.cell_position(y)?;
        Ok(self.cell_distance(i, j))
    }

    // ---- labels -----------------------------------------------------------

    fn digit_label(&self, code: u32) -> String {
        let t = self.ctx.decode_digit(code);
        t.iter().map(u32::to_string).collect::<Vec<_>>().join(".")
    }

    pub fn ball_label(&self, root: usize, address: &BallAddress) -> String {
        let mut s = self.roots[root].id.clone();
        for &c in address.codes() {
            s.push('/');
            s.push_str(&self.digit_label(c));
        }
        s
    }

    pub fn cell_label(&self, pos: usize) -> String {
        let c = self.cell(pos);
        self.ball_label(c.root, &c.address)
    }

    /// Parses a ball selector `[root:]<root id>[/d/d/...]`. With a single
    /// root the id may be omitted (`0/1`). Digits are `l` for `n = 1` and
    /// dotted tuples `l1.l2` otherwise.
    pub fn parse_ball(&self, selector: &str) -> Result<(usize, BallAddress)> {
        let s = selector.trim();
        let s = s.strip_prefix("root:").unwrap_or(s);
        let mut parts: Vec<&str> = if s.is_empty() {
            Vec::new()
        } else {
            s.split('/').collect()
        };
        let root = match parts.first().and_then(|first| self.root_by_id(first)) {
            Some(r) => {
                parts.remove(0);
                r
            }
            None if self.roots.len() == 1 => 0,
            None => {
                return Err(Error::invalid(format!(
                    "selector '{selector}' does not start with a root id"
                )))
            }
        };
        let mut codes = Vec::with_capacity(parts.len());
        for part in parts {
            let tuple: std::result::Result<Vec<u32>, _> = part.split('.').map(u32::from_str).collect();
            let tuple = tuple.map_err(|_| Error::invalid(format!("bad digit '{part}' in '{selector}'")))?;
            let code = if tuple.len() == 1 && self.ctx.n() > 1 {
                if tuple[0] as usize >= self.ctx.branching() {
                    return Err(Error::invalid(format!("digit code {} out of range", tuple[0])));
                }
                tuple[0]
            } else {
                self.ctx.encode_digit(&tuple)?
            };
            codes.push(code);
        }
        if codes.len() > self.ctx.depth() {
            return Err(Error::invalid(format!(
                "selector '{selector}' is deeper than the truncation depth {}",
                self.ctx.depth()
            )));
        }
        Ok((root, BallAddress::from_codes(codes)))
    }
}

fn node_weighted_shortest_paths(nerve: &NerveComplex, weight: &[BigRational], source: usize) -> Vec<BigRational> {
    let n = nerve.faces.len();
    let mut dist: Vec<Option<BigRational>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = Some(weight[source].clone());
    heap.push(Reverse((weight[source].clone(), source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &v in nerve.hasse_neighbors(u) {
            let cand = &d + &weight[v];
            if dist[v].as_ref().is_none_or(|cur| cand < *cur) {
                dist[v] = Some(cand.clone());
                heap.push(Reverse((cand, v)));
            }
        }
    }
    dist.into_iter().map(|d| d.expect("nerve is connected")).collect()
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    BigRational::from_str(s.trim()).map_err(|_| Error::Parse(format!("'{s}' is not a rational number")))
}

// ---- document format ------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FaceDoc {
    pub id: String,
    pub vertices: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RootDoc {
    pub id: String,
    pub face: String,
    pub density: String,
}

/// Manifold spec document (TOML).
///
/// ```toml
/// p = 2
/// n = 1
/// depth = 2
///
/// [[faces]]
/// id = "v0"
/// vertices = ["v0"]
///
/// [[roots]]
/// id = "v0"
/// face = "v0"
/// density = "1/2"
/// ```
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ManifoldDoc {
    pub p: u32,
    pub n: usize,
    pub depth: usize,
    pub faces: Vec<FaceDoc>,
    pub roots: Vec<RootDoc>,
}

impl ManifoldDoc {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifold document serialises")
    }
}
