//! Kozyrev wavelets on the balls of a model, their closed-form eigenvalues
//! and the matrix oracles they are checked against.

use num::bigint::BigInt;
use num::complex::Complex64;
use num::rational::BigRational;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::ManifoldModel;
use crate::operators::{assemble, root_degree, KernelSpec, OperatorMatrix};
use crate::padic::{self, character_chi, digit_lift_tau, BallAddress, PrimeContext};

/// Wavelet datum: support ball (depth at most `m - 1`) and a nonzero
/// character index `j`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct WaveletIndex {
    pub root: usize,
    pub support: BallAddress,
    pub j: Vec<u32>,
}

/// Complex cell values of a wavelet over all cells of the model.
#[derive(Debug, Clone)]
pub struct WaveletVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl WaveletVector {
    pub fn value(&self, cell: usize) -> Complex64 {
        Complex64::new(self.re[cell], self.im[cell])
    }

    /// `Σ |v_i|^2 mu_i`.
    pub fn norm_sq(&self, mu: &[f64]) -> f64 {
        mu.iter()
            .zip(self.re.iter().zip(&self.im))
            .map(|(m, (a, b))| m * (a * a + b * b))
            .sum()
    }

    /// `Σ v_i mu_i`.
    pub fn integral(&self, mu: &[f64]) -> Complex64 {
        mu.iter()
            .zip(self.re.iter().zip(&self.im))
            .map(|(m, (a, b))| Complex64::new(a * m, b * m))
            .sum()
    }

    /// `Σ u_i conj(v_i) mu_i`.
    pub fn inner(&self, other: &WaveletVector, mu: &[f64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, m) in mu.iter().enumerate() {
            if self.re[i] == 0.0 && self.im[i] == 0.0 {
                continue;
            }
            acc += self.value(i) * other.value(i).conj() * m;
        }
        acc
    }
}

/// All wavelets: per root, balls of depth `0..m` in lexicographic order,
/// then `j` in code order.
pub fn enumerate_wavelets(model: &ManifoldModel) -> Vec<WaveletIndex> {
    let ctx = model.ctx();
    let b = ctx.branching() as u32;
    let mut out = Vec::new();
    for root in 0..model.roots().len() {
        let mut level = vec![BallAddress::root()];
        for _ in 0..ctx.depth() {
            for ball in &level {
                for code in 1..b {
                    out.push(WaveletIndex {
                        root,
                        support: ball.clone(),
                        j: ctx.decode_digit(code),
                    });
                }
            }
            level = level.iter().flat_map(|a| (0..b).map(move |c| a.child(c))).collect();
        }
    }
    out
}

fn check_index(model: &ManifoldModel, idx: &WaveletIndex) -> Result<()> {
    let ctx = model.ctx();
    if idx.root >= model.roots().len() {
        return Err(Error::invalid("wavelet root out of range"));
    }
    if idx.support.depth() >= ctx.depth() {
        return Err(Error::invalid(format!(
            "wavelet support depth {} must be below the truncation depth {}",
            idx.support.depth(),
            ctx.depth()
        )));
    }
    if idx.j.iter().all(|&c| c == 0) {
        return Err(Error::invalid("wavelet index j must be nonzero"));
    }
    ctx.encode_digit(&idx.j)?;
    Ok(())
}

/// `chi((Σ_i τ(j_i) τ(l_i)) / p)`.
fn pairing_character(ctx: &PrimeContext, j: &[u32], l: &[u32]) -> Result<Complex64> {
    let tj = digit_lift_tau(ctx, j)?;
    let tl = digit_lift_tau(ctx, l)?;
    let dot: i64 = tj.iter().zip(&tl).map(|(a, b)| a * b).sum();
    let x = BigRational::new(BigInt::from(dot), BigInt::from(ctx.p()));
    Ok(character_chi(ctx, &x)?.value())
}

pub fn wavelet_vector(model: &ManifoldModel, idx: &WaveletIndex) -> Result<WaveletVector> {
    check_index(model, idx)?;
    let ctx = model.ctx();
    let n = model.cell_count();
    let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
    let d = idx.support.depth();
    let mu_b = padic::ball_measure(ctx, &idx.support, &model.roots()[idx.root].density);
    let scale = 1.0 / padic::to_f64(&mu_b).sqrt();
    let b = ctx.branching() as u32;
    let mut by_digit = Vec::with_capacity(b as usize);
    for code in 0..b {
        by_digit.push(pairing_character(ctx, &idx.j, &ctx.decode_digit(code))? * scale);
    }
    for cell in model.cells_in_ball(idx.root, &idx.support) {
        let l = model.cell(cell).address.codes()[d];
        re[cell] = by_digit[l as usize].re;
        im[cell] = by_digit[l as usize].im;
    }
    Ok(WaveletVector { re, im })
}

/// `L²(mu)`-normalised indicator of a root tree.
pub fn root_indicator(model: &ManifoldModel, root: usize) -> WaveletVector {
    let n = model.cell_count();
    let v = 1.0 / padic::to_f64(&model.roots()[root].density).sqrt();
    let mut re = vec![0.0; n];
    for c in model.cells_in_ball(root, &BallAddress::root()) {
        re[c] = v;
    }
    WaveletVector { re, im: vec![0.0; n] }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacterSum {
    /// Brute-force `Σ_{l != 0} (1 - chi(j·l / p))`.
    pub brute_force: f64,
    /// `p^n - (1 + (-1)^n)`.
    pub closed_form: f64,
    /// `closed_form - brute_force`.
    pub deviation: f64,
}

pub fn character_sum(ctx: &PrimeContext, j: &[u32]) -> Result<CharacterSum> {
    if j.len() != ctx.n() || j.iter().all(|&c| c == 0) {
        return Err(Error::invalid("character sum needs a nonzero index of length n"));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for code in 1..ctx.branching() as u32 {
        acc += Complex64::new(1.0, 0.0) - pairing_character(ctx, j, &ctx.decode_digit(code))?;
    }
    let n = ctx.n() as i32;
    let closed_form = (ctx.p() as f64).powi(n) - (1.0 + (-1.0f64).powi(n));
    Ok(CharacterSum {
        brute_force: acc.re,
        closed_form,
        deviation: closed_form - acc.re,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormEigenvalue {
    /// `∫_{X∖B} K(a, y) dmu(y)`, summed exactly over join levels and roots.
    pub nonlocal: f64,
    /// `mu(B)^{n - alpha} (1 - p^{-n}(1 + (-1)^n))`.
    pub local: f64,
    pub value: f64,
    /// For kNN kernels: whether `height(B) >= k`, so that pairs joining at
    /// the support are neighbours. Always true for VT kernels.
    pub within_hypothesis: bool,
}

/// Closed-form wavelet eigenvalue. The nonlocal integral uses the kernel of
/// the operator (for kNN the degree ratio times `d^{-n alpha}` on star
/// pairs).
pub fn closed_form_eigenvalue(
    model: &ManifoldModel,
    idx: &WaveletIndex,
    kernel: &KernelSpec,
) -> Result<ClosedFormEigenvalue> {
    check_index(model, idx)?;
    let ctx = model.ctx();
    let (alpha, k) = match kernel {
        KernelSpec::Vt { alpha } => (*alpha, None),
        KernelSpec::Knn { alpha, k } => (*alpha, Some(*k)),
        KernelSpec::Custom { .. } => {
            return Err(Error::invalid("closed-form eigenvalues cover the vt and knn kernels"))
        }
    };
    let n = ctx.n();
    let e = -(n as f64) * alpha;
    let r = idx.root;
    let d = idx.support.depth();
    let root_h = model.root_height(r);
    let admits = |height: usize| k.is_none_or(|k| height >= k);
    let shell = 1.0 - padic::to_f64(&ctx.p_power(n as i64));
    let rho = padic::to_f64(&model.roots()[r].density);

    let mut nonlocal = 0.0;
    for level in 0..d {
        if admits(root_h + level) {
            let mu_a = rho * padic::to_f64(&ctx.p_power((level * n) as i64));
            nonlocal += mu_a * shell * model.within_tree_distance(r, level).powf(e);
        }
    }
    let own_degree = k.map(|k| padic::to_f64(&root_degree(model, r, k)));
    for (other, root) in model.roots().iter().enumerate() {
        if other == r {
            continue;
        }
        let ratio = match (k.zip(own_degree), model.cross_root_join(r, other)) {
            (None, _) => 1.0,
            (Some((k, own)), Some(face)) if model.nerve().faces()[face].dim() >= k => {
                padic::to_f64(&root_degree(model, other, k)) / own
            }
            (Some(_), _) => continue,
        };
        nonlocal += ratio * model.cross_root_distance_f64(r, other).powf(e) * padic::to_f64(&root.density);
    }

    let mu_b = padic::to_f64(&padic::ball_measure(ctx, &idx.support, &model.roots()[r].density));
    let sign = if n.is_multiple_of(2) { 2.0 } else { 0.0 };
    let local = mu_b.powf(n as f64 - alpha) * (1.0 - (ctx.p() as f64).powi(-(n as i32)) * sign);
    Ok(ClosedFormEigenvalue {
        nonlocal,
        local,
        value: nonlocal + local,
        within_hypothesis: admits(root_h + d),
    })
}

/// `(lambda_hat, residual)` with `lambda_hat = Re⟨Lv, v⟩_mu / ⟨v, v⟩_mu` and
/// `residual = ‖Lv - lambda_hat v‖_mu / ‖v‖_mu`.
pub fn rayleigh_residual(l: &OperatorMatrix, re: &[f64], im: &[f64]) -> Result<(f64, f64)> {
    let n = l.dim();
    if re.len() != n || im.len() != n {
        return Err(Error::invalid("vector length does not match the operator"));
    }
    let support: Vec<usize> = (0..n).filter(|&i| re[i] != 0.0 || im[i] != 0.0).collect();
    if support.is_empty() {
        return Err(Error::invalid("Rayleigh quotient of the zero vector"));
    }
    let mut lre = vec![0.0; n];
    let mut lim = vec![0.0; n];
    for i in 0..n {
        let row = l.entries.row(i);
        let (mut a, mut b) = (0.0, 0.0);
        for &j in &support {
            a += row[j] * re[j];
            b += row[j] * im[j];
        }
        lre[i] = a;
        lim[i] = b;
    }
    let mu = &l.mu;
    let vv: f64 = (0..n).map(|i| mu[i] * (re[i] * re[i] + im[i] * im[i])).sum();
    let lv: f64 = (0..n).map(|i| mu[i] * (lre[i] * re[i] + lim[i] * im[i])).sum();
    let lambda = lv / vv;
    let res: f64 = (0..n)
        .map(|i| mu[i] * ((lre[i] - lambda * re[i]).powi(2) + (lim[i] - lambda * im[i]).powi(2)))
        .sum();
    Ok((lambda, (res / vv).sqrt()))
}

/// One row of the wavelet verification report.
#[derive(Debug, Clone, Serialize)]
pub struct WaveletCheck {
    pub label: String,
    pub depth: usize,
    pub j: String,
    pub closed_form: f64,
    pub oracle: f64,
    pub residual: f64,
    pub nonlocal: f64,
    pub closed_form_local: f64,
    /// Rayleigh quotient minus the nonlocal term.
    pub oracle_local: f64,
    /// `closed_form - oracle`.
    pub deviation: f64,
    pub within_hypothesis: bool,
    pub norm: f64,
    pub integral: f64,
}

/// Checks every wavelet of the model against the assembled operator.
pub fn verify_wavelets(model: &ManifoldModel, kernel: &KernelSpec) -> Result<Vec<WaveletCheck>> {
    let l = assemble(model, kernel);
    verify_wavelets_with(model, kernel, &l)
}

pub fn verify_wavelets_with(
    model: &ManifoldModel,
    kernel: &KernelSpec,
    l: &OperatorMatrix,
) -> Result<Vec<WaveletCheck>> {
    let mu = &l.mu;
    enumerate_wavelets(model)
        .iter()
        .map(|idx| {
            let v = wavelet_vector(model, idx)?;
            let (oracle, residual) = rayleigh_residual(l, &v.re, &v.im)?;
            let cf = closed_form_eigenvalue(model, idx, kernel)?;
            let j = idx.j.iter().map(u32::to_string).collect::<Vec<_>>().join(".");
            Ok(WaveletCheck {
                label: model.ball_label(idx.root, &idx.support),
                depth: idx.support.depth(),
                j,
                closed_form: cf.value,
                oracle,
                residual,
                nonlocal: cf.nonlocal,
                closed_form_local: cf.local,
                oracle_local: oracle - cf.nonlocal,
                deviation: cf.value - oracle,
                within_hypothesis: cf.within_hypothesis,
                norm: v.norm_sq(mu).sqrt(),
                integral: v.integral(mu).norm(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::BuiltinOptions;
    use crate::operators::assemble_vt;

    fn single(p: u32, n: usize, m: usize) -> ManifoldModel {
        ManifoldModel::builtin(
            "single_ball",
            &BuiltinOptions {
                p: Some(p),
                n: Some(n),
                depth: Some(m),
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn counts() {
        assert_eq!(enumerate_wavelets(&single(2, 1, 2)).len(), 3);
        assert_eq!(enumerate_wavelets(&single(3, 1, 1)).len(), 2);
        let p1 = ManifoldModel::builtin("p1_q2", &BuiltinOptions::default()).unwrap();
        assert_eq!(enumerate_wavelets(&p1).len(), 9);
    }

    #[test]
    fn haar_wavelet_values() {
        let m = single(2, 1, 1);
        let v = wavelet_vector(
            &m,
            &WaveletIndex {
                root: 0,
                support: BallAddress::root(),
                j: vec![1],
            },
        )
        .unwrap();
        assert_eq!(v.re, vec![1.0, -1.0]);
        assert!(v.im.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn character_sums() {
        let c = character_sum(&PrimeContext::new(3, 1, 1).unwrap(), &[1]).unwrap();
        assert!((c.brute_force - 3.0).abs() < 1e-12 && c.deviation.abs() < 1e-12);
        let c = character_sum(&PrimeContext::new(3, 2, 1).unwrap(), &[1, 1]).unwrap();
        assert!((c.brute_force - 9.0).abs() < 1e-12);
        assert_eq!(c.closed_form, 7.0);
        let c = character_sum(&PrimeContext::new(2, 1, 1).unwrap(), &[1]).unwrap();
        assert!((c.brute_force - 2.0).abs() < 1e-12 && c.closed_form == 2.0);
        assert!(character_sum(&PrimeContext::new(2, 1, 1).unwrap(), &[0]).is_err());
    }

    #[test]
    fn hand_eigenvalues() {
        let m = single(2, 1, 2);
        let vt = KernelSpec::Vt { alpha: 1.0 };
        let top = WaveletIndex {
            root: 0,
            support: BallAddress::root(),
            j: vec![1],
        };
        let e = closed_form_eigenvalue(&m, &top, &vt).unwrap();
        assert!((e.value - 1.0).abs() < 1e-15);
        let half = WaveletIndex {
            root: 0,
            support: BallAddress::from_codes(vec![0]),
            j: vec![1],
        };
        let e = closed_form_eigenvalue(&m, &half, &vt).unwrap();
        assert!((e.value - 1.5).abs() < 1e-15);

        let l = assemble_vt(&m, 1.0);
        let v = wavelet_vector(&m, &half).unwrap();
        let (lam, res) = rayleigh_residual(&l, &v.re, &v.im).unwrap();
        assert!((lam - 1.5).abs() < 1e-12 && res < 1e-12);
        assert!(rayleigh_residual(&l, &[0.0; 4], &[0.0; 4]).is_err());
        let (lam, res) = rayleigh_residual(&l, &[1.0; 4], &[0.0; 4]).unwrap();
        assert!(lam.abs() < 1e-15 && res < 1e-15);
    }

    #[test]
    fn two_dimensional_local_terms() {
        let m = single(3, 2, 1);
        let vt = KernelSpec::Vt { alpha: 1.0 };
        let checks = verify_wavelets(&m, &vt).unwrap();
        for c in &checks {
            assert!((c.closed_form_local - 7.0 / 9.0).abs() < 1e-14);
            assert!((c.oracle_local - 1.0).abs() < 1e-12);
            assert!(c.residual < 1e-12);
        }
    }
}
