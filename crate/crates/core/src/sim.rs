//! Fixed-step simulation of the nonlinear DAE and of lifted linear models.

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::kron::kron_power_vec;
use crate::matrix::Mat;
use crate::model::ModelSpec;
use crate::scalar::Scalar;
use crate::taylor::{residual_tol, ConstraintSolver};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryMeta {
    pub model: String,
    pub method: String,
    pub order: Option<usize>,
}

/// Samples on the grid `t_k = k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    /// `K × N`.
    pub states: Mat<T>,
    /// `K × M`; zero columns for lifted linear runs.
    pub algebraics: Mat<T>,
    pub meta: TrajectoryMeta,
    /// Largest `‖h(x_k, z_k)‖_∞` over stored points, for DAE runs.
    pub max_constraint_residual: Option<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[T] {
        self.states.row(k)
    }

    pub fn last_state(&self) -> &[T] {
        self.states.row(self.len() - 1)
    }
}

fn grid<T: Scalar>(t_end: T, dt: T) -> Result<Vec<T>> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    if !(t_end >= T::zero()) || !t_end.is_finite() {
        return Err(Error::Domain(format!("duration must be non-negative, got {t_end}")));
    }
    let steps = (t_end / dt).round().to_usize().unwrap_or(usize::MAX);
    if steps > 100_000_000 {
        return Err(Error::SizeCap {
            requested: steps,
            cap: 100_000_000,
        });
    }
    Ok((0..=steps).map(|k| T::from_usize_lossy(k) * dt).collect())
}

fn check_finite<T: Scalar>(v: &[T], what: &str, t: T) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} at t = {t}")))
    }
}

fn inf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Classic RK4 on `x` with `z` re-solved from `h(x, z) = 0` by Newton at
/// every stage, warm-started from the previous solution.
pub fn simulate_dae<T: Scalar>(
    model: &ModelSpec,
    x0: &[T],
    t_end: T,
    dt: T,
    z_guess: &[T],
) -> Result<Trajectory<T>> {
    let (n, m) = (model.n(), model.m());
    if x0.len() != n {
        return Err(Error::Arity {
            what: "initial state".into(),
            expected: n,
            found: x0.len(),
        });
    }
    if z_guess.len() != m {
        return Err(Error::Arity {
            what: "algebraic guess".into(),
            expected: m,
            found: z_guess.len(),
        });
    }
    let times = grid(t_end, dt)?;
    let solver = ConstraintSolver::new(model);
    let tol = residual_tol::<T>();

    let settle = |x: &[T], z0: &[T], t: T| -> Result<(Vec<T>, T)> {
        let (z, _) = solver.solve(x, z0)?;
        let r = inf_norm(&model.eval_h(x, &z)?);
        check_finite(&z, "algebraic variables", t)?;
        Ok((z, r))
    };
    let rhs = |x: &[T], z: &mut Vec<T>, t: T| -> Result<Vec<T>> {
        let (zn, _) = settle(x, z, t)?;
        *z = zn;
        let f = model.eval_g(x, z)?;
        check_finite(&f, "state derivative", t)?;
        Ok(f)
    };

    let k_len = times.len();
    let mut states = Mat::zeros(k_len, n);
    let mut algebraics = Mat::zeros(k_len, m);
    let mut x = x0.to_vec();
    let (mut z, mut max_res) = settle(&x, z_guess, T::zero())?;
    if max_res > tol {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: max_res.to_f64_lossy(),
        });
    }
    states.row_mut(0).copy_from_slice(&x);
    algebraics.row_mut(0).copy_from_slice(&z);

    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let axpy = |x: &[T], a: T, k: &[T]| -> Vec<T> {
        x.iter().zip(k).map(|(&xi, &ki)| xi + a * ki).collect()
    };
    for k in 1..k_len {
        let t = times[k - 1];
        let mut zs = z.clone();
        let k1 = rhs(&x, &mut zs, t)?;
        let k2 = rhs(&axpy(&x, half * dt, &k1), &mut zs, t + half * dt)?;
        let k3 = rhs(&axpy(&x, half * dt, &k2), &mut zs, t + half * dt)?;
        let k4 = rhs(&axpy(&x, dt, &k3), &mut zs, t + dt)?;
        for i in 0..n {
            x[i] += dt * sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
        check_finite(&x, "state", times[k])?;
        let (zn, r) = settle(&x, &zs, times[k])?;
        if r > tol {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual: r.to_f64_lossy(),
            });
        }
        z = zn;
        max_res = max_res.max(r);
        states.row_mut(k).copy_from_slice(&x);
        algebraics.row_mut(k).copy_from_slice(&z);
    }
    Ok(Trajectory {
        times,
        states,
        algebraics,
        meta: TrajectoryMeta {
            model: model.name.clone(),
            method: "dae-rk4".into(),
            order: None,
        },
        max_constraint_residual: Some(max_res),
    })
}

/// Lifted initial state `[Δx0, Δx0^[2], .., Δx0^[order]]`.
pub fn lifted_initial<T: Scalar>(dx0: &[T], order: usize) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for k in 1..=order {
        out.extend(kron_power_vec(dx0, k)?);
    }
    Ok(out)
}

/// Propagates `d/dt y = A y` by `expm(A·dt)` from the lifted `Δx0` and
/// returns the first `n` coordinates plus `offset`.
pub fn simulate_linear<T: Scalar>(
    a: &Mat<T>,
    dx0: &[T],
    n: usize,
    order: usize,
    t_end: T,
    dt: T,
    offset: &[T],
) -> Result<Trajectory<T>> {
    crate::carleman_ode::check_order(order)?;
    let dim = crate::carleman_ode::lifted_dim(n, order);
    if dx0.len() != n || offset.len() != n {
        return Err(Error::Arity {
            what: "initial perturbation / offset".into(),
            expected: n,
            found: if dx0.len() != n { dx0.len() } else { offset.len() },
        });
    }
    if a.shape() != (dim, dim) {
        return Err(Error::shape(format!(
            "lifted matrix is {}x{}, order {order} with {n} states needs {dim}x{dim}",
            a.rows(),
            a.cols()
        )));
    }
    let times = grid(t_end, dt)?;
    let phi = expm(&a.scale(dt))?;
    let mut y = lifted_initial(dx0, order)?;
    let mut states = Mat::zeros(times.len(), n);
    for k in 0..times.len() {
        if k > 0 {
            y = phi.matvec(&y)?;
            check_finite(&y, "lifted state", times[k])?;
        }
        for i in 0..n {
            states[(k, i)] = offset[i] + y[i];
        }
    }
    Ok(Trajectory {
        algebraics: Mat::zeros(times.len(), 0),
        times,
        states,
        meta: TrajectoryMeta {
            model: String::new(),
            method: "lifted-expm".into(),
            order: Some(order),
        },
        max_constraint_residual: None,
    })
}

/// Per-state errors between two trajectories on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison<T> {
    pub rms: Vec<T>,
    pub max_abs: Vec<T>,
}

pub fn compare<T: Scalar>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<Comparison<T>> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!(
            "{} samples against {}",
            a.len(),
            b.len()
        )));
    }
    for (k, (&ta, &tb)) in a.times.iter().zip(&b.times).enumerate() {
        let scale = T::one().max(ta.abs());
        if (ta - tb).abs() > T::resolvable(1e-12, 16.0) * scale {
            return Err(Error::GridMismatch(format!("sample {k}: t = {ta} against {tb}")));
        }
    }
    if a.states.cols() != b.states.cols() {
        return Err(Error::GridMismatch(format!(
            "{} states against {}",
            a.states.cols(),
            b.states.cols()
        )));
    }
    let n = a.states.cols();
    let k = T::from_usize_lossy(a.len().max(1));
    let mut rms = vec![T::zero(); n];
    let mut max_abs = vec![T::zero(); n];
    for r in 0..a.len() {
        for i in 0..n {
            let d = (a.states[(r, i)] - b.states[(r, i)]).abs();
            rms[i] += d * d;
            max_abs[i] = max_abs[i].max(d);
        }
    }
    for v in &mut rms {
        *v = (*v / k).sqrt();
    }
    Ok(Comparison { rms, max_abs })
}
