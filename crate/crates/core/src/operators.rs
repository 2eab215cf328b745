//! Matrix realisations of kernel Laplacians on functions that are locally
//! constant at the truncation depth.
//!
//! Distances are constant on every pair of distinct cells, so the matrices
//! below are the exact restrictions of the integral operators to that space.
//! Entries follow `L[i][j] = -K(i,j) mu_j` off the diagonal with the diagonal
//! equal to the negated off-diagonal row sum.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num::rational::BigRational;
use num::traits::{One, Zero};
use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::manifold::{ManifoldModel, PairJoin};
use crate::padic::{self, BallAddress};
use crate::spectral::{eig_symmetric, Matrix};

/// Radial weight used by [`KernelSpec::Custom`].
pub type RadialWeight = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum KernelSpec {
    /// `d^{-n alpha}` on all pairs.
    Vt { alpha: f64 },
    /// `(deg_k(y) / deg_k(x)) d^{-n alpha}` on pairs whose join has height `>= k`.
    Knn { alpha: f64, k: usize },
    /// `w(d)` on all pairs.
    Custom { name: String, weight: RadialWeight },
}

impl KernelSpec {
    pub fn custom(name: impl Into<String>, weight: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        KernelSpec::Custom {
            name: name.into(),
            weight: Arc::new(weight),
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            KernelSpec::Vt { alpha } | KernelSpec::Knn { alpha, .. } => Some(*alpha),
            KernelSpec::Custom { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            KernelSpec::Vt { alpha } => format!("vt(alpha={alpha})"),
            KernelSpec::Knn { alpha, k } => format!("knn(alpha={alpha},k={k})"),
            KernelSpec::Custom { name, .. } => format!("custom({name})"),
        }
    }
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Dense operator on a set of cells, with the measure and the positive
/// diagonal that balances it into a symmetric matrix.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub entries: Matrix,
    /// Model cell positions indexing rows and columns.
    pub cells: Vec<usize>,
    pub mu: Vec<f64>,
    /// `D` with `D L D^-1` symmetric.
    pub balance: Vec<f64>,
    /// Degree function when the kernel uses one.
    pub deg: Option<Vec<f64>>,
    pub metadata: Vec<(String, String)>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.entries.matvec(u)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries.row(i).iter().sum()).collect()
    }

    /// `max |D L D^-1 - (D L D^-1)ᵀ|`.
    pub fn balance_defect(&self) -> f64 {
        let inv: Vec<f64> = self.balance.iter().map(|w| 1.0 / w).collect();
        self.entries.scale_rows_cols(&self.balance, &inv).symmetry_defect()
    }

    /// Detailed-balance measure `balance²`, normalised to unit mass.
    pub fn invariant_measure(&self) -> Vec<f64> {
        let pi: Vec<f64> = self.balance.iter().map(|w| w * w).collect();
        let total: f64 = pi.iter().sum();
        pi.into_iter().map(|x| x / total).collect()
    }

    pub fn inner_mu(&self, u: &[f64], v: &[f64]) -> f64 {
        weighted_inner(&self.mu, u, v)
    }

    pub fn norm_mu(&self, u: &[f64]) -> f64 {
        self.inner_mu(u, u).sqrt()
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn weighted_inner(w: &[f64], u: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(u).zip(v).map(|((w, a), b)| w * a * b).sum()
}

fn kernel_matrix(n: usize, mu: &[f64], weight: impl Fn(usize, usize) -> Option<f64>) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            if let Some(w) = weight(i, j) {
                let e = w * mu[j];
                m[(i, j)] = -e;
                diag += e;
            }
        }
        m[(i, i)] = diag;
    }
    m
}

fn base_metadata(model: &ManifoldModel, kind: &str) -> Vec<(String, String)> {
    let ctx = model.ctx();
    vec![
        ("operator".into(), kind.into()),
        ("p".into(), ctx.p().to_string()),
        ("n".into(), ctx.n().to_string()),
        ("depth".into(), ctx.depth().to_string()),
    ]
}

fn all_cells(model: &ManifoldModel) -> Vec<usize> {
    (0..model.cell_count()).collect()
}

/// Vladimirov-Taibleson type operator with kernel `d^{-n alpha}`.
pub fn assemble_vt(model: &ManifoldModel, alpha: f64) -> OperatorMatrix {
    let e = -(model.ctx().n() as f64) * alpha;
    let mu = model.cell_measures();
    let entries = kernel_matrix(mu.len(), &mu, |i, j| Some(model.cell_distance(i, j).powf(e)));
    let mut metadata = base_metadata(model, "vt");
    metadata.push(("alpha".into(), alpha.to_string()));
    OperatorMatrix {
        entries,
        cells: all_cells(model),
        balance: mu.iter().map(|m| m.sqrt()).collect(),
        mu,
        deg: None,
        metadata,
    }
}

/// Kernel Laplacian with a radial weight of the geodetic distance.
pub fn assemble_custom(model: &ManifoldModel, name: &str, weight: &RadialWeight) -> OperatorMatrix {
    let mu = model.cell_measures();
    let entries = kernel_matrix(mu.len(), &mu, |i, j| Some(weight(model.cell_distance(i, j))));
    let mut metadata = base_metadata(model, "custom");
    metadata.push(("kernel".into(), name.into()));
    OperatorMatrix {
        entries,
        cells: all_cells(model),
        balance: mu.iter().map(|m| m.sqrt()).collect(),
        mu,
        deg: None,
        metadata,
    }
}

#[derive(Debug, Clone)]
pub struct DegreeData {
    pub k: usize,
    /// Exact degree per root; the degree is constant on each tree.
    pub root_degree: Vec<BigRational>,
    /// Degree per cell.
    pub deg: Vec<f64>,
    /// Cells `y != x` whose join with `x` exists and has height `>= k`.
    pub star: Vec<Vec<usize>>,
    /// Connected-component label per cell, numbered in order of first cell.
    pub component: Vec<usize>,
    pub components: usize,
    pub connected: bool,
}

/// Whether two distinct cells are `k`-neighbours.
pub fn in_star(model: &ManifoldModel, i: usize, j: usize, k: usize) -> bool {
    i != j
        && model
            .pair_join(i, j)
            .is_some_and(|join| model.pair_join_height(join) >= k)
}

/// Exact degree `deg_k` of the points of a root tree: the within-tree
/// contribution summed over all join levels in closed form plus the
/// contributions of every other root whose join is a face of height `>= k`.
pub fn root_degree(model: &ManifoldModel, root: usize, k: usize) -> BigRational {
    let ctx = model.ctx();
    let n = ctx.n() as i64;
    let rho = &model.roots()[root].density;
    let d0 = k.saturating_sub(model.root_height(root)) as i64;
    let one = BigRational::one();
    let within = rho * rho * (&one - ctx.p_power(n)) * ctx.p_power(2 * d0 * n) / (&one - ctx.p_power(2 * n));
    let mut total = within;
    for (other, r) in model.roots().iter().enumerate() {
        if other == root {
            continue;
        }
        if let Some(face) = model.cross_root_join(root, other) {
            let join = PairJoin::Face(face);
            if model.pair_join_height(join) >= k {
                total += model.pair_join_measure(join) * &r.density;
            }
        }
    }
    total
}

pub fn degree_and_star(model: &ManifoldModel, k: usize) -> DegreeData {
    let root_degree: Vec<BigRational> = (0..model.roots().len()).map(|r| root_degree(model, r, k)).collect();
    let root_f64: Vec<f64> = root_degree.iter().map(padic::to_f64).collect();
    let n = model.cell_count();
    let deg = (0..n).map(|i| root_f64[model.cell_root(i)]).collect();
    let star: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| in_star(model, i, j, k)).collect())
        .collect();

    let mut component = vec![usize::MAX; n];
    let mut components = 0;
    for s in 0..n {
        if component[s] != usize::MAX {
            continue;
        }
        component[s] = components;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for &y in &star[x] {
                if component[y] == usize::MAX {
                    component[y] = components;
                    stack.push(y);
                }
            }
        }
        components += 1;
    }
    DegreeData {
        k,
        root_degree,
        deg,
        star,
        component,
        connected: components == 1,
        components,
    }
}

/// Height-`k` nearest-neighbour operator with kernel
/// `(deg_k(y)/deg_k(x)) d^{-n alpha}` on star pairs.
pub fn assemble_knn(model: &ManifoldModel, alpha: f64, k: usize) -> OperatorMatrix {
    let data = degree_and_star(model, k);
    knn_from_degree(model, alpha, &data, -(model.ctx().n() as f64) * alpha, "knn", |i, j| {
        model.cell_distance(i, j)
    })
}

fn knn_from_degree(
    model: &ManifoldModel,
    alpha: f64,
    data: &DegreeData,
    exponent: f64,
    kind: &str,
    dist: impl Fn(usize, usize) -> f64,
) -> OperatorMatrix {
    let mu = model.cell_measures();
    let n = mu.len();
    let deg = &data.deg;
    let mut entries = Matrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for &j in &data.star[i] {
            let e = deg[j] / deg[i] * dist(i, j).powf(exponent) * mu[j];
            entries[(i, j)] = -e;
            diag += e;
        }
        entries[(i, i)] = diag;
    }
    let mut metadata = base_metadata(model, kind);
    metadata.push(("alpha".into(), alpha.to_string()));
    metadata.push(("k".into(), data.k.to_string()));
    OperatorMatrix {
        entries,
        cells: all_cells(model),
        balance: deg.iter().zip(&mu).map(|(d, m)| d * m.sqrt()).collect(),
        mu,
        deg: Some(deg.clone()),
        metadata,
    }
}

pub fn assemble(model: &ManifoldModel, kernel: &KernelSpec) -> OperatorMatrix {
    match kernel {
        KernelSpec::Vt { alpha } => assemble_vt(model, *alpha),
        KernelSpec::Knn { alpha, k } => assemble_knn(model, *alpha, *k),
        KernelSpec::Custom { name, weight } => assemble_custom(model, name, weight),
    }
}

/// `L* = diag(mu)^-1 Lᵀ diag(mu)`.
pub fn adjoint_l2(l: &OperatorMatrix) -> OperatorMatrix {
    let inv: Vec<f64> = l.mu.iter().map(|m| 1.0 / m).collect();
    let entries = l.entries.transpose().scale_rows_cols(&inv, &l.mu);
    let balance = l.mu.iter().zip(&l.balance).map(|(m, w)| m / w).collect();
    let mut metadata = l.metadata.clone();
    metadata.push(("adjoint".into(), "true".into()));
    OperatorMatrix {
        entries,
        cells: l.cells.clone(),
        mu: l.mu.clone(),
        balance,
        deg: l.deg.clone(),
        metadata,
    }
}

// ---- frames and coordinate operators ------------------------------------

/// Per-cell frame of the trivialised tangent bundle: `n x n` integer matrices
/// reduced mod `p^m`, invertible over `Z_p`, constant on balls of the
/// recorded constancy depth.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameField {
    pub constancy_depth: usize,
    matrices: Vec<Vec<Vec<i64>>>,
    modulus: i64,
    p: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameDoc {
    constancy_depth: usize,
    default: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    frame: Vec<BallMatrix<i64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BallMatrix<T> {
    ball: String,
    matrix: Vec<Vec<T>>,
}

impl FrameField {
    pub fn identity(model: &ManifoldModel) -> Self {
        let n = model.ctx().n();
        let id: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
        Self::constant(model, id).expect("identity frame is valid")
    }

    pub fn constant(model: &ManifoldModel, matrix: Vec<Vec<i64>>) -> Result<Self> {
        Self::from_cells(model, 0, vec![matrix; model.cell_count()])
    }

    pub fn from_cells(model: &ManifoldModel, constancy_depth: usize, matrices: Vec<Vec<Vec<i64>>>) -> Result<Self> {
        let ctx = model.ctx();
        let (n, m) = (ctx.n(), ctx.depth());
        if constancy_depth > m {
            return Err(Error::invalid(format!(
                "frame constancy depth {constancy_depth} exceeds the truncation depth {m}"
            )));
        }
        if matrices.len() != model.cell_count() {
            return Err(Error::invalid("frame must give one matrix per cell"));
        }
        let p = ctx.p() as i64;
        let modulus = p
            .checked_pow(m as u32)
            .ok_or_else(|| Error::invalid("p^m overflows the frame modulus"))?;
        let mut reduced = Vec::with_capacity(matrices.len());
        for (cell, mat) in matrices.into_iter().enumerate() {
            if mat.len() != n || mat.iter().any(|r| r.len() != n) {
                return Err(Error::invalid(format!(
                    "frame matrix at {} is not {n}x{n}",
                    model.cell_label(cell)
                )));
            }
            let mat: Vec<Vec<i64>> = mat
                .into_iter()
                .map(|r| r.into_iter().map(|x| x.rem_euclid(modulus)).collect())
                .collect();
            if det_mod_p(&mat, p) == 0 {
                return Err(Error::invalid(format!(
                    "frame matrix at {} has nonunit determinant",
                    model.cell_label(cell)
                )));
            }
            reduced.push(mat);
        }
        for cell in 0..model.cell_count() {
            let c = model.cell(cell);
            let first = model.cells_in_ball(c.root, &c.address.truncate(constancy_depth)).start;
            if reduced[cell] != reduced[first] {
                return Err(Error::invalid(format!(
                    "frame is not constant on balls of depth {constancy_depth}"
                )));
            }
        }
        Ok(FrameField {
            constancy_depth,
            matrices: reduced,
            modulus,
            p,
        })
    }

    /// Frame document: `constancy_depth`, optional `default` matrix and
    /// `[[frame]]` entries with `ball` selectors; deeper balls win.
    pub fn load(model: &ManifoldModel, text: &str) -> Result<Self> {
        let doc: FrameDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let n = model.ctx().n();
        let default = doc
            .default
            .unwrap_or_else(|| (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect());
        let mut cells = vec![default; model.cell_count()];
        let mut entries = Vec::with_capacity(doc.frame.len());
        for e in doc.frame {
            let (root, addr) = model.parse_ball(&e.ball)?;
            if addr.depth() > doc.constancy_depth {
                return Err(Error::invalid(format!(
                    "frame ball '{}' is deeper than the constancy depth {}",
                    e.ball, doc.constancy_depth
                )));
            }
            entries.push((addr.depth(), root, addr, e.matrix));
        }
        entries.sort_by_key(|e| e.0);
        for (_, root, addr, matrix) in entries {
            for c in model.cells_in_ball(root, &addr) {
                cells[c] = matrix.clone();
            }
        }
        Self::from_cells(model, doc.constancy_depth, cells)
    }

    pub fn matrix(&self, cell: usize) -> &[Vec<i64>] {
        &self.matrices[cell]
    }

    /// `i`-th column (0-based) of the frame at a cell.
    pub fn column(&self, cell: usize, i: usize) -> Vec<i64> {
        self.matrices[cell].iter().map(|r| r[i]).collect()
    }

    /// p-adic max-norm of the difference of the `i`-th columns at two cells,
    /// at working precision `p^m` (differences divisible by `p^m` count as 0).
    pub fn fiber_distance(&self, a: usize, b: usize, i: usize) -> f64 {
        let mut best: f64 = 0.0;
        for row in 0..self.matrices[a].len() {
            let mut d = (self.matrices[a][row][i] - self.matrices[b][row][i]).rem_euclid(self.modulus);
            if d == 0 {
                continue;
            }
            let mut v = 0;
            while d % self.p == 0 {
                d /= self.p;
                v += 1;
            }
            best = best.max((self.p as f64).powi(-v));
        }
        best
    }
}

fn det_mod_p(mat: &[Vec<i64>], p: i64) -> i64 {
    let n = mat.len();
    let mut a: Vec<Vec<i64>> = mat
        .iter()
        .map(|r| r.iter().map(|x| x.rem_euclid(p)).collect())
        .collect();
    let mut det = 1i64;
    for c in 0..n {
        let Some(piv) = (c..n).find(|&r| a[r][c] != 0) else {
            return 0;
        };
        if piv != c {
            a.swap(piv, c);
            det = (p - det) % p;
        }
        det = det * a[c][c] % p;
        let inv = mod_inverse(a[c][c], p);
        for r in c + 1..n {
            let f = a[r][c] * inv % p;
            if f == 0 {
                continue;
            }
            for k in c..n {
                a[r][k] = (a[r][k] - f * a[c][k]).rem_euclid(p);
            }
        }
    }
    det
}

fn mod_inverse(a: i64, p: i64) -> i64 {
    // p is prime: a^(p-2)
    let (mut base, mut e, mut acc) = (a.rem_euclid(p), p - 2, 1i64);
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    acc
}

/// Tangent-bundle distance between `(x, b_i(x))` and `(y, b_i(y))` in the
/// product model: the larger of the base distance and the fibre distance.
pub fn tangent_distance(model: &ManifoldModel, frame: &FrameField, i: usize, x: usize, y: usize) -> f64 {
    model.cell_distance(x, y).max(frame.fiber_distance(x, y, i))
}

/// `i`-th coordinate operator (0-based `i`). VT kernels use the exponent
/// `-n alpha`, kNN kernels `-2n alpha` on the base star pairs.
pub fn assemble_coordinate(
    model: &ManifoldModel,
    frame: &FrameField,
    i: usize,
    kernel: &KernelSpec,
) -> Result<OperatorMatrix> {
    let n = model.ctx().n();
    if i >= n {
        return Err(Error::invalid(format!(
            "coordinate index {} out of range 1..={n}",
            i + 1
        )));
    }
    if frame.matrices.len() != model.cell_count() {
        return Err(Error::invalid("frame does not match the model"));
    }
    let dist = |x: usize, y: usize| tangent_distance(model, frame, i, x, y);
    let mut op = match kernel {
        KernelSpec::Vt { alpha } => {
            let e = -(n as f64) * alpha;
            let mu = model.cell_measures();
            let entries = kernel_matrix(mu.len(), &mu, |x, y| Some(dist(x, y).powf(e)));
            let mut metadata = base_metadata(model, "coordinate-vt");
            metadata.push(("alpha".into(), alpha.to_string()));
            OperatorMatrix {
                entries,
                cells: all_cells(model),
                balance: mu.iter().map(|m| m.sqrt()).collect(),
                mu,
                deg: None,
                metadata,
            }
        }
        KernelSpec::Knn { alpha, k } => {
            let data = degree_and_star(model, *k);
            knn_from_degree(model, *alpha, &data, -2.0 * n as f64 * alpha, "coordinate-knn", dist)
        }
        KernelSpec::Custom { .. } => {
            return Err(Error::invalid("coordinate operators support the vt and knn families"))
        }
    };
    op.metadata.push(("coordinate".into(), (i + 1).to_string()));
    Ok(op)
}

// ---- elliptic operators ---------------------------------------------------

/// Symmetric coefficient field `A(x)` bounded below by `theta`.
#[derive(Debug, Clone)]
pub struct EllipticCoefficients {
    pub theta: f64,
    matrices: Vec<Vec<Vec<f64>>>,
    /// `min_x lambda_min(A(x))`.
    pub certificate: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffDoc {
    theta: f64,
    default: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    coeff: Vec<BallMatrix<f64>>,
}

impl EllipticCoefficients {
    pub fn from_cells(model: &ManifoldModel, theta: f64, matrices: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n = model.ctx().n();
        if !(theta > 0.0) {
            return Err(Error::invalid(format!(
                "ellipticity bound theta = {theta} must be positive"
            )));
        }
        if matrices.len() != model.cell_count() {
            return Err(Error::invalid("coefficients must give one matrix per cell"));
        }
        let mut certificate = f64::INFINITY;
        for (cell, a) in matrices.iter().enumerate() {
            let label = model.cell_label(cell);
            if a.len() != n || a.iter().any(|r| r.len() != n) {
                return Err(Error::invalid(format!("coefficient matrix at {label} is not {n}x{n}")));
            }
            for i in 0..n {
                for j in 0..n {
                    if a[i][j] != a[j][i] || !a[i][j].is_finite() {
                        return Err(Error::invalid(format!(
                            "coefficient matrix at {label} is not symmetric"
                        )));
                    }
                }
            }
            let lmin = eig_symmetric(&Matrix::from_rows(a), 1e-15)?.values[0];
            if lmin < theta * (1.0 - 1e-12) {
                return Err(Error::invalid(format!(
                    "ellipticity fails at {label}: smallest eigenvalue {lmin} < theta = {theta}"
                )));
            }
            certificate = certificate.min(lmin);
        }
        Ok(EllipticCoefficients {
            theta,
            matrices,
            certificate,
        })
    }

    pub fn identity(model: &ManifoldModel) -> Self {
        let n = model.ctx().n();
        let id: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::from_cells(model, 1.0, vec![id; model.cell_count()]).expect("identity is elliptic")
    }

    pub fn constant(model: &ManifoldModel, theta: f64, a: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_cells(model, theta, vec![a; model.cell_count()])
    }

    /// `theta I + QᵀQ` with `Q` uniform in `[-1, 1]` per cell.
    pub fn random_spd(model: &ManifoldModel, theta: f64, rng: &mut impl Rng) -> Result<Self> {
        let n = model.ctx().n();
        let cells = (0..model.cell_count())
            .map(|_| {
                let q: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                let mut a = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..=i {
                        let s: f64 = (0..n).map(|r| q[r][i] * q[r][j]).sum();
                        a[i][j] = s + if i == j { theta } else { 0.0 };
                        a[j][i] = a[i][j];
                    }
                }
                a
            })
            .collect();
        Self::from_cells(model, theta, cells)
    }

    /// Coefficient document: `theta`, optional `default` matrix and
    /// `[[coeff]]` entries with `ball` selectors; deeper balls win.
    pub fn load(model: &ManifoldModel, text: &str) -> Result<Self> {
        let doc: CoeffDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let n = model.ctx().n();
        let default = doc.default.unwrap_or_else(|| {
            (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect()
        });
        let mut cells = vec![default; model.cell_count()];
        let mut entries = Vec::with_capacity(doc.coeff.len());
        for e in doc.coeff {
            let (root, addr) = model.parse_ball(&e.ball)?;
            entries.push((addr.depth(), root, addr, e.matrix));
        }
        entries.sort_by_key(|e| e.0);
        for (_, root, addr, matrix) in entries {
            for c in model.cells_in_ball(root, &addr) {
                cells[c] = matrix.clone();
            }
        }
        Self::from_cells(model, doc.theta, cells)
    }

    pub fn matrix(&self, cell: usize) -> &[Vec<f64>] {
        &self.matrices[cell]
    }

    /// Cellwise `a^{ij}` restricted to the given cells.
    pub fn entry(&self, cells: &[usize], i: usize, j: usize) -> Vec<f64> {
        cells.iter().map(|&c| self.matrices[c][i][j]).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        EllipticCoefficients {
            theta: self.theta * s,
            matrices: self
                .matrices
                .iter()
                .map(|a| a.iter().map(|r| r.iter().map(|x| x * s).collect()).collect())
                .collect(),
            certificate: self.certificate * s,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EllipticOperator {
    pub p: OperatorMatrix,
    /// Coordinate kNN operators `L_1..L_n` the composite is built from.
    pub coordinates: Vec<OperatorMatrix>,
    /// `min_x lambda_min(A(x))`.
    pub certificate: f64,
}

/// `P = Σ_{ij} L_i M_{a^{ij}} L_j` over the given coordinate operators, all
/// indexed by the same cells.
pub fn compose_elliptic(coords: &[OperatorMatrix], coeffs: &EllipticCoefficients) -> Matrix {
    let cells = &coords[0].cells;
    let dim = cells.len();
    let mut p = Matrix::zeros(dim, dim);
    for (j, lj) in coords.iter().enumerate() {
        for (i, li) in coords.iter().enumerate() {
            let a = coeffs.entry(cells, i, j);
            let mlj = lj.entries.scale_rows_cols(&a, &vec![1.0; dim]);
            p = p.add(&li.entries.matmul(&mlj));
        }
    }
    p
}

/// Elliptic composite of coordinate kNN operators.
pub fn assemble_elliptic(
    model: &ManifoldModel,
    frame: &FrameField,
    coeffs: &EllipticCoefficients,
    alpha: f64,
    k: usize,
) -> Result<EllipticOperator> {
    if coeffs.matrices.len() != model.cell_count() {
        return Err(Error::invalid("coefficients do not match the model"));
    }
    let kernel = KernelSpec::Knn { alpha, k };
    let coordinates: Vec<OperatorMatrix> = (0..model.ctx().n())
        .map(|i| assemble_coordinate(model, frame, i, &kernel))
        .collect::<Result<_>>()?;
    let entries = compose_elliptic(&coordinates, coeffs);
    let base = &coordinates[0];
    let mut metadata = base_metadata(model, "elliptic");
    metadata.push(("alpha".into(), alpha.to_string()));
    metadata.push(("k".into(), k.to_string()));
    metadata.push(("theta".into(), coeffs.theta.to_string()));
    let p = OperatorMatrix {
        entries,
        cells: base.cells.clone(),
        mu: base.mu.clone(),
        balance: base.balance.clone(),
        deg: base.deg.clone(),
        metadata,
    };
    Ok(EllipticOperator {
        p,
        coordinates,
        certificate: coeffs.certificate,
    })
}

// ---- boundaries and restriction -------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    /// Sorted cell positions of the domain.
    pub omega: Vec<usize>,
    /// Star pairs `(x, y)` with `x` in the domain and `y` outside.
    pub edge_boundary: Vec<(usize, usize)>,
    pub vertex_boundary: Vec<usize>,
    pub closure: Vec<usize>,
}

pub fn boundary_sets(model: &ManifoldModel, k: usize, omega: &[usize]) -> Result<BoundaryData> {
    let n = model.cell_count();
    let set: BTreeSet<usize> = omega.iter().copied().collect();
    if set.is_empty() {
        return Err(Error::invalid("degenerate domain: omega is empty"));
    }
    if let Some(bad) = set.iter().find(|&&c| c >= n) {
        return Err(Error::invalid(format!("cell {bad} is not part of the model")));
    }
    if set.len() == n {
        return Err(Error::invalid("degenerate domain: omega covers the whole manifold"));
    }
    let mut edge_boundary = Vec::new();
    let mut vb = BTreeSet::new();
    for &x in &set {
        for y in 0..n {
            if !set.contains(&y) && in_star(model, x, y, k) {
                edge_boundary.push((x, y));
                vb.insert(y);
            }
        }
    }
    let closure: Vec<usize> = set.union(&vb).copied().collect();
    Ok(BoundaryData {
        omega: set.into_iter().collect(),
        edge_boundary,
        vertex_boundary: vb.into_iter().collect(),
        closure,
    })
}

/// Restricts an operator on all cells to `cells`: off-diagonal couplings to
/// cells outside are dropped and the diagonal is recomputed.
pub fn restrict_to(op: &OperatorMatrix, cells: &[usize]) -> OperatorMatrix {
    let pos: Vec<usize> = cells
        .iter()
        .map(|c| op.cells.iter().position(|x| x == c).expect("cell in operator"))
        .collect();
    let mut entries = op.entries.submatrix(&pos);
    for i in 0..pos.len() {
        entries[(i, i)] = 0.0;
        let off: f64 = entries.row(i).iter().sum();
        entries[(i, i)] = -off;
    }
    let pick = |v: &[f64]| pos.iter().map(|&p| v[p]).collect::<Vec<_>>();
    OperatorMatrix {
        entries,
        cells: cells.to_vec(),
        mu: pick(&op.mu),
        balance: pick(&op.balance),
        deg: op.deg.as_ref().map(|d| pick(d)),
        metadata: op.metadata.clone(),
    }
}

/// `rows x rows` block of an operator on a superset of cells, keeping the
/// diagonal (and hence coupling to dropped cells).
pub fn principal_block(op: &OperatorMatrix, cells: &[usize]) -> OperatorMatrix {
    let pos: Vec<usize> = cells
        .iter()
        .map(|c| op.cells.iter().position(|x| x == c).expect("cell in operator"))
        .collect();
    let pick = |v: &[f64]| pos.iter().map(|&p| v[p]).collect::<Vec<_>>();
    let mut metadata = op.metadata.clone();
    metadata.push(("restricted".into(), "interior".into()));
    OperatorMatrix {
        entries: op.entries.submatrix(&pos),
        cells: cells.to_vec(),
        mu: pick(&op.mu),
        balance: pick(&op.balance),
        deg: op.deg.as_ref().map(|d| pick(d)),
        metadata,
    }
}

#[derive(Debug, Clone)]
pub struct RestrictedOperator {
    /// Domain rows and columns; the diagonal keeps coupling to the boundary.
    pub interior: OperatorMatrix,
    /// Operator on the closure with stars cut to the closure.
    pub closure: OperatorMatrix,
    pub boundary: BoundaryData,
}

/// Homogeneous Dirichlet restriction of a kNN operator. Degrees are those
/// of the whole manifold.
pub fn restrict_dirichlet(model: &ManifoldModel, kernel: &KernelSpec, omega: &[usize]) -> Result<RestrictedOperator> {
    let KernelSpec::Knn { alpha, k } = kernel else {
        return Err(Error::invalid("Dirichlet restriction is defined for knn kernels"));
    };
    let boundary = boundary_sets(model, *k, omega)?;
    let full = assemble_knn(model, *alpha, *k);
    let closure = restrict_to(&full, &boundary.closure);
    let interior = principal_block(&closure, &boundary.omega);
    Ok(RestrictedOperator {
        interior,
        closure,
        boundary,
    })
}

/// Cells of a ball, for building domains from address prefixes.
pub fn ball_cells(model: &ManifoldModel, root: usize, address: &BallAddress) -> Vec<usize> {
    model.cells_in_ball(root, address).collect()
}

/// Exact entry `K(i,j) mu_j` of the VT operator for `alpha = 1` at `n = 1`:
/// `mu_j / d(i,j)` with the distance in exact arithmetic.
pub fn exact_vt_entry_alpha_one(model: &ManifoldModel, i: usize, j: usize) -> Option<BigRational> {
    if model.ctx().n() != 1 || i == j {
        return None;
    }
    let (ri, rj) = (model.cell_root(i), model.cell_root(j));
    let d = if ri == rj {
        model.pair_join_measure(PairJoin::Ball {
            root: ri,
            depth: model.common_depth(i, j),
        })
    } else {
        model.cross_root_distance(ri, rj).clone()
    };
    if d.is_zero() {
        return None;
    }
    Some(model.cell_measure(j) / d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::BuiltinOptions;

    fn model(name: &str, depth: usize) -> ManifoldModel {
        ManifoldModel::builtin(
            name,
            &BuiltinOptions {
                depth: Some(depth),
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn vt_single_ball_depth_one() {
        let m = model("single_ball", 1);
        let l = assemble_vt(&m, 1.0);
        assert_eq!(l.entries, Matrix::from_rows(&[vec![0.5, -0.5], vec![-0.5, 0.5]]));
    }

    #[test]
    fn single_ball_degree() {
        let d = degree_and_star(&model("single_ball", 3), 1);
        assert_eq!(d.root_degree[0], BigRational::new(2.into(), 3.into()));
        assert!(d.connected);
    }

    #[test]
    fn p1_q2_connectivity() {
        let m = model("p1_q2", 2);
        assert!(degree_and_star(&m, 0).connected);
        let d2 = degree_and_star(&m, 2);
        assert!(!d2.connected);
        for c in 0..m.cell_count() {
            for e in 0..m.cell_count() {
                if d2.component[c] == d2.component[e] {
                    assert_eq!(m.cell_root(c), m.cell_root(e));
                }
            }
        }
    }

    #[test]
    fn det_mod_prime() {
        assert_eq!(det_mod_p(&[vec![1, 2], vec![3, 4]], 3), 1); // -2 = 1 mod 3
        assert_eq!(det_mod_p(&[vec![1, 2], vec![2, 4]], 5), 0);
        assert_eq!(det_mod_p(&[vec![0, 1], vec![1, 0]], 7), 6);
    }

    #[test]
    fn frame_validation() {
        let m = ManifoldModel::builtin(
            "single_ball",
            &BuiltinOptions {
                p: Some(3),
                n: Some(2),
                depth: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(FrameField::constant(&m, vec![vec![1, 0], vec![0, 3]]).is_err());
        let text = "constancy_depth = 1\n[[frame]]\nball = \"v0/1.0\"\nmatrix = [[1, 1], [0, 1]]\n";
        let f = FrameField::load(&m, text).unwrap();
        let inside = m.cells_in_ball(0, &BallAddress::from_codes(vec![3])).start;
        assert_eq!(f.column(inside, 1), vec![1, 1]);
        assert_eq!(f.fiber_distance(0, inside, 1), 1.0);
        assert_eq!(f.fiber_distance(0, inside, 0), 0.0);
        let deep = "constancy_depth = 0\n[[frame]]\nball = \"v0/1.0\"\nmatrix = [[1, 1], [0, 1]]\n";
        assert!(FrameField::load(&m, deep).is_err());
    }

    #[test]
    fn coefficient_validation() {
        let m = ManifoldModel::builtin(
            "single_ball",
            &BuiltinOptions {
                n: Some(2),
                depth: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        let bad = EllipticCoefficients::constant(&m, 0.5, vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        let msg = bad.unwrap_err().to_string();
        assert!(msg.contains("ellipticity fails at v0/0.0"), "{msg}");
        let c = EllipticCoefficients::constant(&m, 1.0, vec![vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(c.certificate, 1.0);
        assert!(EllipticCoefficients::constant(&m, 1.0, vec![vec![2.0, 1.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn boundary_examples() {
        let m = model("single_ball", 2);
        let b = boundary_sets(&m, 1, &[0, 1]).unwrap();
        assert_eq!(b.vertex_boundary, vec![2, 3]);
        assert_eq!(b.closure, vec![0, 1, 2, 3]);
        assert!(boundary_sets(&m, 1, &[0, 1, 2, 3]).is_err());
        assert!(boundary_sets(&m, 1, &[]).is_err());
        let p1 = model("p1_q2", 2);
        let tree: Vec<usize> = (0..4).collect();
        assert!(boundary_sets(&p1, 2, &tree).unwrap().vertex_boundary.is_empty());
    }

    #[test]
    fn restriction_keeps_principal_block() {
        let m = model("single_ball", 2);
        let kernel = KernelSpec::Knn { alpha: 1.0, k: 1 };
        let r = restrict_dirichlet(&m, &kernel, &[0, 1, 2]).unwrap();
        let full = assemble_knn(&m, 1.0, 1);
        assert_eq!(r.interior.entries, full.entries.submatrix(&[0, 1, 2]));
        let sums = r.interior.row_sums();
        assert!(sums.iter().all(|s| *s > 0.0));
        assert!(restrict_dirichlet(&m, &KernelSpec::Vt { alpha: 1.0 }, &[0]).is_err());
    }
}
