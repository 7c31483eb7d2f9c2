//! Equilibrium search and third-order Taylor coefficients of `g` and `h`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{differentiate, Bindings, Expr};
use crate::kron::{kron_vec, MonomialBasis, VarKind};
use crate::linalg::Lu;
use crate::matrix::Mat;
use crate::model::{ModelSpec, SymbolicJacobian};
use crate::scalar::Scalar;

use VarKind::{Algebraic as Z, State as X};

/// Column families of the first-row blocks, in block order 1..=9:
/// `Δx, Δx², Δx³, Δz, Δx⊗Δz, Δz², Δx²⊗Δz, Δx⊗Δz², Δz³`.
pub const FAMILIES: [&[VarKind]; 9] = [
    &[X],
    &[X, X],
    &[X, X, X],
    &[Z],
    &[X, Z],
    &[Z, Z],
    &[X, X, Z],
    &[X, Z, Z],
    &[Z, Z, Z],
];

pub const EQUILIBRIUM_TOL: f64 = 1e-10;
pub const MAX_NEWTON_ITERS: usize = 100;
/// `|det(H_1_4)|` outside `[LOW, HIGH]` triggers a conditioning warning.
pub const DET_WARN_LOW: f64 = 1e-8;
pub const DET_WARN_HIGH: f64 = 1e8;

pub fn family_len(j: usize, n: usize, m: usize) -> usize {
    FAMILIES[j - 1].iter().map(|k| k.dim(n, m)).product()
}

/// Kronecker product of `dx`/`dz` factors in the order given by `kinds`.
pub fn family_vector<T: Scalar>(kinds: &[VarKind], dx: &[T], dz: &[T]) -> Vec<T> {
    let mut out = vec![T::one()];
    for k in kinds {
        out = kron_vec(&out, if *k == X { dx } else { dz });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium<T> {
    pub x_sep: Vec<T>,
    pub z_sep: Vec<T>,
    pub residual_norm: T,
    pub newton_iters: usize,
}

fn inf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Newton's method with step halving until the residual norm decreases.
pub fn damped_newton<T, F, J>(
    f: F,
    jac: J,
    w0: &[T],
    tol: T,
    max_iter: usize,
) -> Result<(Vec<T>, T, usize)>
where
    T: Scalar,
    F: Fn(&[T]) -> Result<Vec<T>>,
    J: Fn(&[T]) -> Result<Mat<T>>,
{
    let mut w = w0.to_vec();
    let mut r = f(&w)?;
    let mut nr = inf_norm(&r);
    for it in 0..max_iter {
        if nr <= tol {
            return Ok((w, nr, it));
        }
        let lu = Lu::new(&jac(&w)?)?;
        if lu.is_singular() {
            return Err(Error::Singular("Newton Jacobian".into()));
        }
        let step = lu.solve_vec(&r)?;
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..50 {
            let trial: Vec<T> = w.iter().zip(&step).map(|(&a, &s)| a - lambda * s).collect();
            if let Ok(rt) = f(&trial) {
                let nt = inf_norm(&rt);
                if nt < nr {
                    w = trial;
                    r = rt;
                    nr = nt;
                    accepted = true;
                    break;
                }
            }
            lambda /= T::lit(2.0);
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: it + 1,
                residual: nr.to_f64_lossy(),
            });
        }
    }
    if nr <= tol {
        Ok((w, nr, max_iter))
    } else {
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual: nr.to_f64_lossy(),
        })
    }
}

/// Residual tolerance used for equilibria and constraint solves.
pub fn residual_tol<T: Scalar>() -> T {
    T::resolvable(EQUILIBRIUM_TOL, 64.0)
}

pub fn find_equilibrium<T: Scalar>(model: &ModelSpec) -> Result<Equilibrium<T>> {
    let n = model.n();
    let names = model.variables();
    let all: Vec<Expr> = model.odes.iter().chain(&model.constraints).cloned().collect();
    let jac = SymbolicJacobian::new(&all, &names, names.clone());
    let f = |w: &[T]| -> Result<Vec<T>> {
        let env = Bindings {
            names: &names,
            values: w,
        };
        all.iter().map(|e| e.eval(&env)).collect()
    };
    let (gx, gz) = model.guess::<T>();
    let w0: Vec<T> = gx.into_iter().chain(gz).collect();
    let (w, res, iters) = damped_newton(f, |w| jac.eval(w), &w0, residual_tol(), MAX_NEWTON_ITERS)?;
    Ok(Equilibrium {
        x_sep: w[..n].to_vec(),
        z_sep: w[n..].to_vec(),
        residual_norm: res,
        newton_iters: iters,
    })
}

/// Solves `h(x, z) = 0` for `z` at fixed `x`, starting from `z0`.
pub struct ConstraintSolver<'a> {
    model: &'a ModelSpec,
    names: Vec<String>,
    jac_z: SymbolicJacobian,
}

impl<'a> ConstraintSolver<'a> {
    pub fn new(model: &'a ModelSpec) -> Self {
        let names = model.variables();
        let jac_z = SymbolicJacobian::new(&model.constraints, &model.algebraics, names.clone());
        Self {
            model,
            names,
            jac_z,
        }
    }

    pub fn solve<T: Scalar>(&self, x: &[T], z0: &[T]) -> Result<(Vec<T>, T)> {
        if self.model.m() == 0 {
            return Ok((Vec::new(), T::zero()));
        }
        let env_vals = |z: &[T]| -> Vec<T> { x.iter().chain(z).copied().collect() };
        let f = |z: &[T]| self.model.eval_h(x, z);
        let jac = |z: &[T]| self.jac_z.eval(&env_vals(z));
        // Polish below the acceptance tolerance so stored points clear it.
        let tol = T::resolvable(EQUILIBRIUM_TOL * 1e-2, 16.0);
        let (z, r, _) = damped_newton(f, jac, z0, tol, MAX_NEWTON_ITERS)?;
        Ok((z, r))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// First-row Taylor blocks `G_1_1..G_1_9` and `H_1_1..H_1_9`.
///
/// The entry at Kronecker slot `(i_1, .., i_k)` of a block on
/// `Δx^[j] ⊗ Δz^[k]` is the mixed partial divided by `j!·k!`, the same for
/// every permutation of the slot.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet<T> {
    pub n: usize,
    pub m: usize,
    pub g: Vec<Mat<T>>,
    pub h: Vec<Mat<T>>,
    pub det_h14: T,
    pub warnings: Vec<String>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl<T: Scalar> CoefficientSet<T> {
    /// Builds a set from explicit blocks (shape-checked). A singular `H_1_4`
    /// is recorded, not rejected.
    pub fn from_blocks(n: usize, m: usize, g: Vec<Mat<T>>, h: Vec<Mat<T>>) -> Result<Self> {
        if g.len() != 9 || h.len() != 9 {
            return Err(Error::shape("nine G and nine H blocks required"));
        }
        for j in 1..=9 {
            let cols = family_len(j, n, m);
            if g[j - 1].shape() != (n, cols) {
                return Err(Error::shape(format!(
                    "G_1_{j} is {}x{}, expected {n}x{cols}",
                    g[j - 1].rows(),
                    g[j - 1].cols()
                )));
            }
            if h[j - 1].shape() != (m, cols) {
                return Err(Error::shape(format!(
                    "H_1_{j} is {}x{}, expected {m}x{cols}",
                    h[j - 1].rows(),
                    h[j - 1].cols()
                )));
            }
        }
        let det_h14 = Lu::new(&h[3])?.det();
        let mut warnings = Vec::new();
        let ad = det_h14.abs().to_f64_lossy();
        if m > 0 && ad != 0.0 && !(DET_WARN_LOW..=DET_WARN_HIGH).contains(&ad) {
            warnings.push(format!(
                "det(H_1_4) = {:e} is outside [{DET_WARN_LOW:e}, {DET_WARN_HIGH:e}]; the reduction may be ill-conditioned",
                det_h14.to_f64_lossy()
            ));
        }
        Ok(Self {
            n,
            m,
            g,
            h,
            det_h14,
            warnings,
        })
    }

    /// `G_1_j`, `j` in `1..=9`.
    pub fn g(&self, j: usize) -> &Mat<T> {
        &self.g[j - 1]
    }

    /// `H_1_j`, `j` in `1..=9`.
    pub fn h(&self, j: usize) -> &Mat<T> {
        &self.h[j - 1]
    }

    pub fn column_basis(&self, j: usize) -> MonomialBasis {
        MonomialBasis::family(FAMILIES[j - 1], self.n, self.m)
    }

    fn taylor(&self, blocks: &[Mat<T>], dx: &[T], dz: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); blocks[0].rows()];
        for (j, b) in blocks.iter().enumerate() {
            let v = family_vector(FAMILIES[j], dx, dz);
            for (o, t) in out.iter_mut().zip(b.matvec(&v)?) {
                *o += t;
            }
        }
        Ok(out)
    }

    /// `Σ_j G_1_j · family_j(Δx, Δz)`: the truncated expansion of `g`.
    pub fn taylor_g(&self, dx: &[T], dz: &[T]) -> Result<Vec<T>> {
        self.taylor(&self.g, dx, dz)
    }

    pub fn taylor_h(&self, dx: &[T], dz: &[T]) -> Result<Vec<T>> {
        self.taylor(&self.h, dx, dz)
    }

    /// Linear state matrix `G_1_1 - G_1_4 H_1_4⁻¹ H_1_1`.
    pub fn linear_state_matrix(&self) -> Result<Mat<T>> {
        if self.m == 0 {
            return Ok(self.g(1).clone());
        }
        let lu = Lu::new(self.h(4))?;
        if lu.is_singular() {
            return Err(Error::Regularity {
                det_h14: self.det_h14.to_f64_lossy(),
                cond: f64::INFINITY,
            });
        }
        let y = lu.solve_mat(self.h(1))?;
        self.g(1).try_sub(&self.g(4).matmul(&y)?)
    }
}

/// Memoized symbolic partial derivatives of a list of expressions.
struct PartialCache<'a> {
    funcs: &'a [Expr],
    names: &'a [String],
    memo: BTreeMap<(usize, Vec<usize>), Expr>,
}

impl<'a> PartialCache<'a> {
    fn get(&mut self, f: usize, vars: &[usize]) -> Expr {
        if vars.is_empty() {
            return self.funcs[f].clone();
        }
        let key = (f, vars.to_vec());
        if let Some(e) = self.memo.get(&key) {
            return e.clone();
        }
        let (last, rest) = vars.split_last().unwrap();
        let base = self.get(f, rest);
        let d = differentiate(&base, &self.names[*last]);
        self.memo.insert(key, d.clone());
        d
    }
}

fn blocks_for<T: Scalar>(
    funcs: &[Expr],
    names: &[String],
    values: &[T],
    n: usize,
    m: usize,
) -> Result<Vec<Mat<T>>> {
    let mut cache = PartialCache {
        funcs,
        names,
        memo: BTreeMap::new(),
    };
    let env = Bindings { names, values };
    let mut value_memo: BTreeMap<(usize, Vec<usize>), T> = BTreeMap::new();
    let mut out = Vec::with_capacity(9);
    for (j, kinds) in FAMILIES.iter().enumerate() {
        let basis = MonomialBasis::family(kinds, n, m);
        let jx = kinds.iter().filter(|k| **k == X).count();
        let kz = kinds.len() - jx;
        let weight = T::lit(1.0 / (factorial(jx) * factorial(kz)));
        let mut block = Mat::zeros(funcs.len(), basis.len());
        for (c, entry) in basis.entries().iter().enumerate() {
            let mut vars: Vec<usize> = entry
                .iter()
                .map(|&(k, i)| if k == X { i } else { n + i })
                .collect();
            vars.sort_unstable();
            for f in 0..funcs.len() {
                let key = (f, vars.clone());
                let v = match value_memo.get(&key) {
                    Some(v) => *v,
                    None => {
                        let v: T = cache.get(f, &vars).eval(&env)?;
                        value_memo.insert(key, v);
                        v
                    }
                };
                block[(f, c)] = v * weight;
            }
        }
        debug_assert_eq!(block.cols(), family_len(j + 1, n, m));
        out.push(block);
    }
    Ok(out)
}

/// Evaluates all eighteen first-row blocks at the equilibrium.
pub fn coefficient_matrices<T: Scalar>(
    model: &ModelSpec,
    eq: &Equilibrium<T>,
) -> Result<CoefficientSet<T>> {
    let (n, m) = (model.n(), model.m());
    if eq.x_sep.len() != n || eq.z_sep.len() != m {
        return Err(Error::shape("equilibrium does not match model dimensions"));
    }
    let names = model.variables();
    let values: Vec<T> = eq.x_sep.iter().chain(&eq.z_sep).copied().collect();
    let g = blocks_for(&model.odes, &names, &values, n, m)?;
    let h = blocks_for(&model.constraints, &names, &values, n, m)?;
    let set = CoefficientSet::from_blocks(n, m, g, h)?;
    if m > 0 && set.det_h14.is_zero() {
        return Err(Error::Regularity {
            det_h14: 0.0,
            cond: f64::INFINITY,
        });
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    G,
    H,
}

/// Per-axis finite-difference step for mixed partials of total order up to two.
pub const FD_STEP: f64 = 1e-4;
/// Step for third-order partials, where `1e-4` leaves roundoff near `1e-4`.
pub const FD_STEP_THIRD: f64 = 1e-2;

// Central-difference stencils (offset, weight) for derivative orders 0..=3.
fn stencil(k: usize) -> &'static [(i32, f64)] {
    match k {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        _ => unreachable!("order checked by caller"),
    }
}

/// Central finite-difference mixed partial of one component of `g` or `h` at
/// the equilibrium, Richardson-extrapolated once.
pub fn fd_oracle(
    model: &ModelSpec,
    eq: &Equilibrium<f64>,
    which: Which,
    row: usize,
    multiindex: &[&str],
) -> Result<f64> {
    let funcs = match which {
        Which::G => &model.odes,
        Which::H => &model.constraints,
    };
    let f = funcs
        .get(row)
        .ok_or_else(|| Error::shape(format!("row {row} out of range")))?;
    if multiindex.len() > 3 {
        return Err(Error::shape("finite differences limited to third order"));
    }
    let names = model.variables();
    let mut orders: BTreeMap<usize, usize> = BTreeMap::new();
    for v in multiindex {
        let i = names
            .iter()
            .position(|n| n == v)
            .ok_or_else(|| Error::UnknownVariable(v.to_string()))?;
        *orders.entry(i).or_insert(0) += 1;
    }
    let center: Vec<f64> = eq.x_sep.iter().chain(&eq.z_sep).copied().collect();
    let axes: Vec<(usize, usize)> = orders.into_iter().collect();
    let h = if multiindex.len() >= 3 {
        FD_STEP_THIRD
    } else {
        FD_STEP
    };

    let estimate = |h: f64| -> Result<f64> {
        let mut total = 0.0;
        let mut point = center.clone();
        let mut idx = vec![0usize; axes.len()];
        loop {
            let mut w = 1.0;
            for (a, &(var, k)) in axes.iter().enumerate() {
                let (off, wt) = stencil(k)[idx[a]];
                point[var] = center[var] + f64::from(off) * h;
                w *= wt / h.powi(k as i32);
            }
            let env = Bindings {
                names: &names,
                values: &point,
            };
            total += w * f.eval::<f64, _>(&env)?;
            let mut a = axes.len();
            loop {
                if a == 0 {
                    return Ok(total);
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < stencil(axes[a].1).len() {
                    break;
                }
                idx[a] = 0;
            }
        }
    };
    if axes.is_empty() {
        return estimate(h);
    }
    let coarse = estimate(h)?;
    let fine = estimate(h / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}
