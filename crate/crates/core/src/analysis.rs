//! Sobolev norms, Poincaré constants, Dirichlet forms, weak solutions of the
//! homogeneous and elliptic Dirichlet problems, energy estimates and Markov
//! semigroup checks.
//!
//! At a fixed truncation depth the test space equals the trial space, so
//! weak solutions are exact solutions of the interior linear systems.
//! Coercivity is measured spectrally rather than assumed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::ManifoldModel;
use crate::operators::{
    assemble_coordinate, boundary_sets, compose_elliptic, restrict_dirichlet, restrict_to, weighted_inner,
    EllipticCoefficients, FrameField, KernelSpec, OperatorMatrix,
};
use crate::spectral::{
    cholesky, default_tolerance, eig_symmetric, generalized_eigenvalues, lower_inverse, relative_residual,
    solve_linear, spectral_norm, symmetrize_balance, weighted_symmetric_min, HeatSemigroup, Matrix,
};

/// Default number of random samples in sampled checks.
pub const SAMPLES: usize = 100;

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn norm_w(w: &[f64], u: &[f64]) -> f64 {
    weighted_inner(w, u, u).sqrt()
}

/// `(‖u‖² + ‖Lu‖²)^{1/2}` in `L²(mu)`.
pub fn sobolev_norm(u: &[f64], l: &OperatorMatrix) -> f64 {
    sobolev_norm_weighted(u, l, &l.mu)
}

/// Sobolev norm with respect to an arbitrary positive weight.
pub fn sobolev_norm_weighted(u: &[f64], l: &OperatorMatrix, w: &[f64]) -> f64 {
    let lu = l.apply(u);
    (weighted_inner(w, u, u) + weighted_inner(w, &lu, &lu)).sqrt()
}

/// `Q(u, v) = ⟨Lu, v⟩_mu`.
pub fn dirichlet_form(l: &OperatorMatrix, u: &[f64], v: &[f64]) -> f64 {
    l.inner_mu(&l.apply(u), v)
}

/// Whether `L 1 = 0` within `1e-10` of the matrix scale.
pub fn is_conservative(l: &OperatorMatrix) -> bool {
    let scale = l.entries.max_abs().max(1.0);
    l.row_sums().iter().all(|s| s.abs() <= 1e-10 * scale)
}

#[derive(Debug, Clone, Serialize)]
pub struct PoincareReport {
    pub constant: f64,
    pub verified: bool,
    /// Largest observed `‖u‖ / (C ‖Lu‖)`.
    pub worst_ratio: f64,
    pub samples: usize,
    /// Interior (non-conservative) operators use the symmetric-part bound.
    pub restricted: bool,
}

/// Poincaré constant `C` with `‖u‖ ≤ C ‖Lu‖`.
///
/// Conservative generators: `C = 1/lambda⁺_min`, checked in `L²(pi)` with
/// `pi = balance²` on random `u` orthogonal to the zero eigenspace.
/// Interior operators: `C = 1/beta` with `beta` the smallest eigenvalue of
/// the symmetric part in `L²(mu)`, checked on the whole space.
pub fn poincare_constant(l: &OperatorMatrix, seed: u64) -> Result<PoincareReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = l.dim();
    if is_conservative(l) {
        let bal = symmetrize_balance(&l.entries, &l.balance)?;
        let eig = eig_symmetric(&bal.s, default_tolerance(&bal.s))?;
        let gtol = 1e-8 * eig.values.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let kernel: Vec<Vec<f64>> = (0..n)
            .filter(|&k| eig.values[k].abs() <= gtol)
            .map(|k| eig.vector(k))
            .collect();
        let lmin = eig
            .values
            .iter()
            .copied()
            .find(|v| *v > gtol)
            .ok_or_else(|| Error::invalid("operator has no nonzero eigenvalue"))?;
        let c = 1.0 / lmin;
        let pi: Vec<f64> = l.balance.iter().map(|w| w * w).collect();
        let mut worst: f64 = 0.0;
        for _ in 0..SAMPLES {
            let mut z = random_vector(&mut rng, n);
            for kv in &kernel {
                let dot: f64 = z.iter().zip(kv).map(|(a, b)| a * b).sum();
                for (zi, ki) in z.iter_mut().zip(kv) {
                    *zi -= dot * ki;
                }
            }
            let u: Vec<f64> = z.iter().zip(&l.balance).map(|(a, w)| a / w).collect();
            let lu = l.apply(&u);
            worst = worst.max(norm_w(&pi, &u) / (c * norm_w(&pi, &lu)));
        }
        Ok(PoincareReport {
            constant: c,
            verified: worst <= 1.0 + 1e-9,
            worst_ratio: worst,
            samples: SAMPLES,
            restricted: false,
        })
    } else {
        let beta = weighted_symmetric_min(&l.entries, &l.mu)?;
        if !(beta > coercivity_floor(l)) {
            return Err(Error::NotCoercive { beta });
        }
        let c = 1.0 / beta;
        let mut worst: f64 = 0.0;
        for _ in 0..SAMPLES {
            let u = random_vector(&mut rng, n);
            let lu = l.apply(&u);
            worst = worst.max(l.norm_mu(&u) / (c * l.norm_mu(&lu)));
        }
        Ok(PoincareReport {
            constant: c,
            verified: worst <= 1.0 + 1e-9,
            worst_ratio: worst,
            samples: SAMPLES,
            restricted: true,
        })
    }
}

fn coercivity_floor(l: &OperatorMatrix) -> f64 {
    1e-12 * l.entries.max_abs().max(1.0)
}

/// Homogeneous Dirichlet problem for a kNN operator on a domain `omega`
/// (cell positions); `f` is given on the sorted domain cells.
#[derive(Debug, Clone)]
pub struct DirichletProblem<'a> {
    pub model: &'a ManifoldModel,
    pub kernel: KernelSpec,
    pub omega: Vec<usize>,
    pub f: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionReport {
    /// Sorted domain cells.
    pub omega: Vec<usize>,
    /// Sorted closure cells; `u` is indexed by these.
    pub closure: Vec<usize>,
    /// Solution on the closure, zero on the boundary.
    pub u: Vec<f64>,
    /// `‖Au - f‖ / ‖f‖` for the interior system.
    pub residual: f64,
    pub coercivity_beta: f64,
    /// Exact continuity constant against the Sobolev norm.
    pub continuity_alpha: f64,
    /// Largest sampled `|Q(u,v)| / (‖u‖_W ‖v‖_W)`.
    pub continuity_alpha_sampled: f64,
    pub condition_bound: f64,
    pub unique: bool,
}

impl SolutionReport {
    /// Solution values on the domain cells.
    pub fn u_omega(&self) -> Vec<f64> {
        self.omega
            .iter()
            .map(|c| self.u[self.closure.binary_search(c).expect("domain inside closure")])
            .collect()
    }
}

/// Continuity of `⟨A u, v⟩_mu` against `‖u‖²_W = ‖u‖²_mu + ‖W u‖²_mu`:
/// exact value and the sampled maximum over random pairs and diagonal pairs.
fn continuity(a: &Matrix, w: &Matrix, mu: &[f64], rng: &mut ChaCha8Rng) -> Result<(f64, f64, Matrix)> {
    let n = mu.len();
    let mw = w.scale_rows_cols(mu, &vec![1.0; n]);
    let gram = Matrix::from_diagonal(mu).add(&w.transpose().matmul(&mw));
    let r = cholesky(&gram)?;
    let ri = lower_inverse(&r);
    let ma = a.scale_rows_cols(mu, &vec![1.0; n]);
    let exact = spectral_norm(&ri.matmul(&ma).matmul(&ri.transpose()))?;
    let wn = |u: &[f64]| gram.matvec(u).iter().zip(u).map(|(a, b)| a * b).sum::<f64>().sqrt();
    let mut sampled: f64 = 0.0;
    for _ in 0..SAMPLES {
        let u = random_vector(rng, n);
        let v = random_vector(rng, n);
        let au = a.matvec(&u);
        sampled = sampled.max(weighted_inner(mu, &au, &v).abs() / (wn(&u) * wn(&v)));
        sampled = sampled.max(weighted_inner(mu, &au, &u).abs() / (wn(&u) * wn(&u)));
    }
    Ok((exact, sampled, gram))
}

pub fn solve_dirichlet(problem: &DirichletProblem<'_>) -> Result<SolutionReport> {
    let KernelSpec::Knn { alpha, .. } = problem.kernel else {
        return Err(Error::invalid("Dirichlet problems are posed for knn kernels"));
    };
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must be positive")));
    }
    let r = restrict_dirichlet(problem.model, &problem.kernel, &problem.omega)?;
    let a = &r.interior;
    if problem.f.len() != a.dim() {
        return Err(Error::invalid(format!(
            "right-hand side has {} values but the domain has {} cells",
            problem.f.len(),
            a.dim()
        )));
    }
    let beta = weighted_symmetric_min(&a.entries, &a.mu)?;
    if !(beta > coercivity_floor(a)) {
        return Err(Error::NotCoercive { beta });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    let (alpha_exact, alpha_sampled, _) = continuity(&a.entries, &a.entries, &a.mu, &mut rng)?;
    let u_omega = solve_linear(&a.entries, &problem.f)?;
    let residual = relative_residual(&a.entries, &u_omega, &problem.f);
    Ok(extend(
        &r.boundary.omega,
        &r.boundary.closure,
        u_omega,
        residual,
        beta,
        alpha_exact,
        alpha_sampled,
    ))
}

fn extend(
    omega: &[usize],
    closure: &[usize],
    u_omega: Vec<f64>,
    residual: f64,
    beta: f64,
    alpha: f64,
    alpha_sampled: f64,
) -> SolutionReport {
    let mut u = vec![0.0; closure.len()];
    for (c, val) in omega.iter().zip(u_omega) {
        u[closure.binary_search(c).expect("domain inside closure")] = val;
    }
    SolutionReport {
        omega: omega.to_vec(),
        closure: closure.to_vec(),
        u,
        residual,
        coercivity_beta: beta,
        continuity_alpha: alpha,
        continuity_alpha_sampled: alpha_sampled,
        condition_bound: alpha / beta,
        unique: beta > 0.0,
    }
}

// ---- elliptic problems ----------------------------------------------------

/// Coordinate kNN operators on a cell set together with the coefficients,
/// providing the factored energy form.
#[derive(Debug, Clone)]
pub struct EllipticSystem {
    pub coordinates: Vec<OperatorMatrix>,
    pub adjoints: Vec<OperatorMatrix>,
    pub p: Matrix,
    coeffs: EllipticCoefficients,
}

impl EllipticSystem {
    /// System on all cells.
    pub fn new(
        model: &ManifoldModel,
        frame: &FrameField,
        coeffs: &EllipticCoefficients,
        kernel: &KernelSpec,
    ) -> Result<Self> {
        let coords = coordinate_operators(model, frame, kernel)?;
        Ok(Self::from_coordinates(coords, coeffs))
    }

    /// System on the `k`-closure of a domain: stars are cut to the closure.
    pub fn on_closure(
        model: &ManifoldModel,
        frame: &FrameField,
        coeffs: &EllipticCoefficients,
        kernel: &KernelSpec,
        closure: &[usize],
    ) -> Result<Self> {
        let coords = coordinate_operators(model, frame, kernel)?
            .iter()
            .map(|l| restrict_to(l, closure))
            .collect();
        Ok(Self::from_coordinates(coords, coeffs))
    }

    fn from_coordinates(coordinates: Vec<OperatorMatrix>, coeffs: &EllipticCoefficients) -> Self {
        let adjoints = coordinates.iter().map(crate::operators::adjoint_l2).collect();
        let p = compose_elliptic(&coordinates, coeffs);
        EllipticSystem {
            coordinates,
            adjoints,
            p,
            coeffs: coeffs.clone(),
        }
    }

    pub fn mu(&self) -> &[f64] {
        &self.coordinates[0].mu
    }

    pub fn cells(&self) -> &[usize] {
        &self.coordinates[0].cells
    }

    /// `B[u, phi] = Σ_{ij} ⟨a^{ij} L_j u, L_i* phi⟩_mu`.
    pub fn energy(&self, u: &[f64], phi: &[f64]) -> f64 {
        let cells = self.cells();
        let lu: Vec<Vec<f64>> = self.coordinates.iter().map(|l| l.apply(u)).collect();
        let lphi: Vec<Vec<f64>> = self.adjoints.iter().map(|l| l.apply(phi)).collect();
        let mut total = 0.0;
        for (i, li) in lphi.iter().enumerate() {
            for (j, lj) in lu.iter().enumerate() {
                let a = self.coeffs.entry(cells, i, j);
                let alj: Vec<f64> = a.iter().zip(lj).map(|(x, y)| x * y).collect();
                total += weighted_inner(self.mu(), &alj, li);
            }
        }
        total
    }

    /// `⟨P u, phi⟩_mu`.
    pub fn strong_form(&self, u: &[f64], phi: &[f64]) -> f64 {
        weighted_inner(self.mu(), &self.p.matvec(u), phi)
    }
}

fn coordinate_operators(model: &ManifoldModel, frame: &FrameField, kernel: &KernelSpec) -> Result<Vec<OperatorMatrix>> {
    if !matches!(kernel, KernelSpec::Knn { .. }) {
        return Err(Error::invalid("elliptic operators are built from knn kernels"));
    }
    (0..model.ctx().n())
        .map(|i| assemble_coordinate(model, frame, i, kernel))
        .collect()
}

/// Energy form on all cells.
pub fn energy_form(
    model: &ManifoldModel,
    frame: &FrameField,
    coeffs: &EllipticCoefficients,
    kernel: &KernelSpec,
    u: &[f64],
    phi: &[f64],
) -> Result<f64> {
    Ok(EllipticSystem::new(model, frame, coeffs, kernel)?.energy(u, phi))
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyConstants {
    /// Largest sampled `|B[u,v]| / (‖u‖_W ‖v‖_W)` over random and diagonal pairs.
    pub alpha_bound: f64,
    /// Exact continuity constant.
    pub alpha_exact: f64,
    /// `min B[u,u] / ‖u‖²_W` over the interior space.
    pub beta_bound: f64,
    pub samples: usize,
}

struct EllipticInterior {
    p: Matrix,
    w: Matrix,
    mu: Vec<f64>,
    boundary: crate::operators::BoundaryData,
}

fn elliptic_interior(
    model: &ManifoldModel,
    frame: &FrameField,
    coeffs: &EllipticCoefficients,
    kernel: &KernelSpec,
    omega: &[usize],
) -> Result<EllipticInterior> {
    let KernelSpec::Knn { k, .. } = kernel else {
        return Err(Error::invalid("elliptic operators are built from knn kernels"));
    };
    let boundary = boundary_sets(model, *k, omega)?;
    let sys = EllipticSystem::on_closure(model, frame, coeffs, kernel, &boundary.closure)?;
    let pos: Vec<usize> = boundary
        .omega
        .iter()
        .map(|c| boundary.closure.binary_search(c).expect("domain inside closure"))
        .collect();
    let p = sys.p.submatrix(&pos);
    let w = restrict_dirichlet(model, kernel, omega)?.interior;
    Ok(EllipticInterior {
        p,
        mu: w.mu.clone(),
        w: w.entries,
        boundary,
    })
}

/// Continuity and coercivity constants of the energy form on the interior
/// space, against the Sobolev norm of the restricted base kNN operator.
pub fn energy_constants(
    model: &ManifoldModel,
    frame: &FrameField,
    coeffs: &EllipticCoefficients,
    kernel: &KernelSpec,
    omega: &[usize],
    seed: u64,
) -> Result<EnergyConstants> {
    let sys = elliptic_interior(model, frame, coeffs, kernel, omega)?;
    constants_of(&sys, seed)
}

fn constants_of(sys: &EllipticInterior, seed: u64) -> Result<EnergyConstants> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sys.mu.len();
    let (alpha_exact, alpha_bound, gram) = continuity(&sys.p, &sys.w, &sys.mu, &mut rng)?;
    let mp = sys.p.scale_rows_cols(&sys.mu, &vec![1.0; n]);
    let sym = mp.add(&mp.transpose()).scale(0.5);
    let beta_bound = generalized_eigenvalues(&sym, &gram)?[0];
    Ok(EnergyConstants {
        alpha_bound,
        alpha_exact,
        beta_bound,
        samples: SAMPLES,
    })
}

/// Interior Dirichlet problem for the elliptic composite.
pub fn solve_elliptic_dirichlet(
    model: &ManifoldModel,
    frame: &FrameField,
    coeffs: &EllipticCoefficients,
    kernel: &KernelSpec,
    omega: &[usize],
    f: &[f64],
    seed: u64,
) -> Result<SolutionReport> {
    if !(coeffs.certificate >= coeffs.theta * (1.0 - 1e-12) && coeffs.theta > 0.0) {
        return Err(Error::invalid("coefficients fail the ellipticity bound"));
    }
    let sys = elliptic_interior(model, frame, coeffs, kernel, omega)?;
    if f.len() != sys.mu.len() {
        return Err(Error::invalid(format!(
            "right-hand side has {} values but the domain has {} cells",
            f.len(),
            sys.mu.len()
        )));
    }
    let c = constants_of(&sys, seed)?;
    if !(c.beta_bound > 1e-12) {
        return Err(Error::NotCoercive { beta: c.beta_bound });
    }
    let u = solve_linear(&sys.p, f)?;
    let residual = relative_residual(&sys.p, &u, f);
    Ok(extend(
        &sys.boundary.omega,
        &sys.boundary.closure,
        u,
        residual,
        c.beta_bound,
        c.alpha_exact,
        c.alpha_bound,
    ))
}

/// Interior matrix of the elliptic composite, for cross-checks.
pub fn elliptic_interior_matrix(
    model: &ManifoldModel,
    frame: &FrameField,
    coeffs: &EllipticCoefficients,
    kernel: &KernelSpec,
    omega: &[usize],
) -> Result<Matrix> {
    Ok(elliptic_interior(model, frame, coeffs, kernel, omega)?.p)
}

// ---- Markov semigroup -------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct MarkovSample {
    pub t: f64,
    /// Smallest entry of `e^{-tL}`.
    pub positivity_defect: f64,
    /// `max_i |Σ_j e^{-tL}_ij - 1|`.
    pub conservation_defect: f64,
    /// Operator norm of `e^{-tL}` on `L²(pi)`.
    pub l2_norm: f64,
    /// Largest `‖∫_0^t e^{-τL}u dτ‖_W / (t ‖u‖_W) - 1` over samples.
    pub sobolev_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarkovReport {
    pub applicable: bool,
    pub reason: Option<String>,
    pub samples: Vec<MarkovSample>,
    /// `max_j |(piᵀ L)_j|` with `pi` the unit-mass detailed-balance measure.
    pub invariant_measure_residual: f64,
    pub sobolev_samples: usize,
}

/// Heat-semigroup diagnostics. Norms use `pi = balance²` (`mu` for VT).
pub fn markov_report(l: &OperatorMatrix, times: &[f64], seed: u64) -> Result<MarkovReport> {
    if let Some(t) = times.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::invalid(format!("sample time {t} must be positive")));
    }
    let scale = l.entries.max_abs().max(1.0);
    let n = l.dim();
    let offdiag_ok = (0..n).all(|i| (0..n).all(|j| i == j || l.entries[(i, j)] <= 1e-14 * scale));
    let reason = if !offdiag_ok {
        Some("generator has a positive off-diagonal entry".to_string())
    } else if !is_conservative(l) {
        Some("generator does not annihilate constants".to_string())
    } else {
        None
    };
    let pi_unit = l.invariant_measure();
    let pil = l.entries.vecmat(&pi_unit);
    let invariant_measure_residual = pil.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(reason) = reason {
        return Ok(MarkovReport {
            applicable: false,
            reason: Some(reason),
            samples: Vec::new(),
            invariant_measure_residual,
            sobolev_samples: 0,
        });
    }

    let heat = HeatSemigroup::new(l)?;
    let pi: Vec<f64> = l.balance.iter().map(|w| w * w).collect();
    let inv: Vec<f64> = l.balance.iter().map(|w| 1.0 / w).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let us: Vec<Vec<f64>> = (0..SAMPLES).map(|_| random_vector(&mut rng, n)).collect();
    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        let h = heat.at(t)?;
        let positivity_defect = h.as_slice().iter().fold(f64::INFINITY, |m, x| m.min(*x));
        let conservation_defect = (0..n)
            .map(|i| (h.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        let k = h.scale_rows_cols(&l.balance, &inv);
        let ksym = k.add(&k.transpose()).scale(0.5);
        let ev = eig_symmetric(&ksym, default_tolerance(&ksym))?.values;
        let l2_norm = ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let j = heat.integral(t)?;
        let mut sobolev_defect = f64::NEG_INFINITY;
        for u in &us {
            let ju = j.matvec(u);
            let lhs = sobolev_norm_weighted(&ju, l, &pi);
            let rhs = t * sobolev_norm_weighted(u, l, &pi);
            sobolev_defect = sobolev_defect.max(lhs / rhs - 1.0);
        }
        samples.push(MarkovSample {
            t,
            positivity_defect,
            conservation_defect,
            l2_norm,
            sobolev_defect,
        });
    }
    Ok(MarkovReport {
        applicable: true,
        reason: None,
        samples,
        invariant_measure_residual,
        sobolev_samples: SAMPLES,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::BuiltinOptions;
    use crate::operators::{assemble_knn, assemble_vt};

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
    fn poincare_single_ball_depth_one() {
        let l = assemble_vt(&model("single_ball", 1), 1.0);
        let r = poincare_constant(&l, 7).unwrap();
        assert!((r.constant - 1.0).abs() < 1e-12 && r.verified && !r.restricted);
    }

    #[test]
    fn constants_have_zero_energy() {
        let l = assemble_knn(&model("p1_q2", 2), 1.0, 1);
        let one = vec![1.0; l.dim()];
        assert!(dirichlet_form(&l, &one, &one).abs() < 1e-12);
        let total: f64 = l.mu.iter().sum();
        assert!((sobolev_norm(&one, &l) - total.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_child_zero() {
        let m = model("single_ball", 2);
        let problem = DirichletProblem {
            model: &m,
            kernel: KernelSpec::Knn { alpha: 1.0, k: 1 },
            omega: vec![0, 1],
            f: vec![1.0, 1.0],
            seed: 1,
        };
        let r = solve_dirichlet(&problem).unwrap();
        assert!(r.unique && r.residual < 1e-10);
        assert!(r.u_omega().iter().all(|x| *x > 0.0));
        assert_eq!(&r.u[2..], &[0.0, 0.0]);
        let zero = DirichletProblem {
            f: vec![0.0, 0.0],
            ..problem.clone()
        };
        assert!(solve_dirichlet(&zero).unwrap().u.iter().all(|x| *x == 0.0));
        let neg = DirichletProblem {
            kernel: KernelSpec::Knn { alpha: -1.0, k: 1 },
            ..problem
        };
        assert!(solve_dirichlet(&neg).is_err());
    }

    #[test]
    fn markov_vt() {
        let l = assemble_vt(&model("single_ball", 2), 1.0);
        let r = markov_report(&l, &[1.0], 3).unwrap();
        assert!(r.applicable);
        let s = &r.samples[0];
        assert!(s.positivity_defect >= -1e-12 && s.conservation_defect <= 1e-10);
        assert!(s.l2_norm <= 1.0 + 1e-10 && s.sobolev_defect <= 1e-9);
    }
}
