//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain program (`harness = false`). The process exits non-zero
//! when any line fails that is not in `KNOWN_FAILURES`; those are printed as
//! FAIL all the same.

use std::f64::consts::PI;
use std::process::ExitCode;

use carleman::carleman_dae::{build_dae_system, rel_err};
use carleman::fixtures::load_fixture;
use carleman::kron::{condense, kron_eye, to_canonical_columns, VarKind};
use carleman::sim::{compare, simulate_dae, simulate_linear};
use carleman::spectral::{combination_spectrum, eigenvalues, match_spectra, mode_report};
use carleman::taylor::{fd_oracle, Which, FAMILIES};
use carleman::{
    build_extended_ode, coefficient_matrices, det_product_check, find_equilibrium, kron_reduce,
    validate_against_ode, Coefficients, Complex64, Error, Matrix, ModelSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Lines whose failure is expected and recorded: the third reference system
/// as printed has no equilibrium, so its printed linear spectrum cannot be
/// reproduced; and the closed-form determinant power for the `Δh⊗Δx` block
/// omits the sign of the axis permutation, which is `-1` when `N = M = 2`.
const KNOWN_FAILURES: &[&str] = &["5a", "5b", "8d"];

#[rustfmt::skip]
const TEST1_DAE_ORDER2: [[f64; 10]; 10] = [
    [-2.0, -0.5, 0.2, 0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0],
    [-2.0, -2.2, 0.3, 0.05, 0.05, -0.15, -0.1, 0.0, 0.0, 0.0],
    [0.0, 0.0, -4.0, -0.5, -0.5, 0.0, 0.0, 0.2, 0.0, 0.0],
    [0.0, 0.0, -2.0, -4.2, 0.0, -0.5, 0.0, -0.1, 0.1, 0.0],
    [0.0, 0.0, -2.0, 0.0, -4.2, -0.5, 0.0, -0.1, 0.1, 0.0],
    [0.0, 0.0, 0.0, -2.0, -2.0, -4.4, 0.0, 0.0, -0.2, 0.0],
    [-1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0, -1.0, -1.0, 1.0, 0.0, -2.0, 2.0, 1.0],
];

#[rustfmt::skip]
const TEST1_REDUCED_ORDER2: [[f64; 6]; 6] = [
    [-1.9, -0.6, 0.2, 0.0, 0.0, 0.0],
    [-2.1, -2.1, 0.3, 0.05, 0.05, -0.15],
    [0.0, 0.0, -3.8, -0.5, -0.7, 0.0],
    [0.0, 0.0, -2.1, -4.1, 0.1, -0.6],
    [0.0, 0.0, -2.1, 0.1, -4.1, -0.6],
    [0.0, 0.0, 0.0, -2.2, -2.0, -4.2],
];

#[rustfmt::skip]
const TEST1_ODE_ORDER2: [[f64; 6]; 6] = [
    [-1.9, -0.6, 0.2, 0.0, 0.0, 0.0],
    [-2.1, -2.1, 0.3, 0.05, 0.05, -0.15],
    [0.0, 0.0, -3.8, -0.6, -0.6, 0.0],
    [0.0, 0.0, -2.1, -4.0, 0.0, -0.6],
    [0.0, 0.0, -2.1, 0.0, -4.0, -0.6],
    [0.0, 0.0, 0.0, -2.1, -2.1, -4.2],
];

#[rustfmt::skip]
const TEST2_G14: [[f64; 2]; 3] = [
    [-0.3807, 0.1369],
    [0.0, 1.0008],
    [0.0180, 0.0],
];

#[rustfmt::skip]
const TEST2_G14_REORDERED: [[f64; 6]; 9] = [
    [-0.38, 0.137, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, -0.38, 0.137, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, -0.38, 0.137],
    [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    [0.018, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.018, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.018, 0.0],
];

fn table2() -> [Complex64; 3] {
    [
        Complex64::new(-1.0708, 0.0),
        Complex64::new(-0.133, -1.7165),
        Complex64::new(-0.133, 1.7165),
    ]
}

struct Suite {
    lines: Vec<(String, bool)>,
}

impl Suite {
    fn record(&mut self, id: &str, what: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        let known = if !pass && KNOWN_FAILURES.contains(&id) {
            " (known)"
        } else {
            ""
        };
        println!("{tag} [{id}] {what}: {detail}{known}");
        self.lines.push((id.to_string(), pass));
    }

    fn run(&mut self, id: &str, what: &str, f: impl FnOnce() -> Result<(bool, String), Error>) {
        match f() {
            Ok((pass, detail)) => self.record(id, what, pass, detail),
            Err(e) => self.record(id, what, false, format!("error: {e}")),
        }
    }
}

struct Prepared {
    model: ModelSpec,
    x_sep: Vec<f64>,
    z_sep: Vec<f64>,
    coeffs: Coefficients,
}

fn prepare(name: &str) -> Result<Prepared, Error> {
    let model = load_fixture(name)?;
    let eq = find_equilibrium::<f64>(&model)?;
    let coeffs = coefficient_matrices(&model, &eq)?;
    Ok(Prepared {
        model,
        x_sep: eq.x_sep,
        z_sep: eq.z_sep,
        coeffs,
    })
}

fn reduced_matrix(p: &Prepared, order: usize) -> Result<Matrix, Error> {
    Ok(kron_reduce(&build_dae_system(&p.coeffs, order)?)?.ftilde11)
}

fn ode_matrix(p: &Prepared, order: usize) -> Result<carleman::OdeSystem, Error> {
    let c = &p.coeffs;
    build_extended_ode(&[c.g(1).clone(), c.g(2).clone(), c.g(3).clone()], order)
}

fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.max_abs_diff(b).unwrap_or(f64::INFINITY)
}

fn criterion_1(s: &mut Suite) {
    s.run("1", "test1 order-2 extended DAE matrix, entrywise 1e-12", || {
        let p = prepare("test1")?;
        let full = build_dae_system(&p.coeffs, 2)?.full_matrix();
        let d = max_diff(&full, &Matrix::from_f64_rows(&TEST1_DAE_ORDER2));
        Ok((d <= 1e-12, format!("max |diff| = {d:.3e}")))
    });
}

fn criterion_2(s: &mut Suite) {
    s.run("2a", "test1 order-2 reduced matrix, entrywise 1e-12", || {
        let p = prepare("test1")?;
        let f = reduced_matrix(&p, 2)?;
        let d = max_diff(&f, &Matrix::from_f64_rows(&TEST1_REDUCED_ORDER2));
        Ok((d <= 1e-12, format!("max |diff| = {d:.3e}")))
    });
    s.run(
        "2b",
        "test1 condensed reduced matrix equals condensed substituted-ODE matrix, 1e-10",
        || {
            let p = prepare("test1")?;
            let red = kron_reduce(&build_dae_system(&p.coeffs, 2)?)?;
            let printed = Matrix::from_f64_rows(&TEST1_ODE_ORDER2);
            let cp = condense(&printed, &red.basis, &red.basis)?;
            let d1 = max_diff(&red.condensed.matrix, &cp.matrix);
            let ode = prepare("test1-ode")?;
            let built = ode_matrix(&ode, 2)?;
            let cb = condense(&built.a_nord, &built.basis, &built.basis)?;
            let d2 = max_diff(&red.condensed.matrix, &cb.matrix);
            let d = d1.max(d2);
            Ok((
                d <= 1e-10,
                format!("vs printed {d1:.3e}, vs built from substituted model {d2:.3e}"),
            ))
        },
    );
}

fn criterion_3(s: &mut Suite) {
    for order in [2, 3] {
        s.run(
            &format!("3.{order}"),
            &format!("test2 order-{order} reduced vs substituted-ODE relative error < 1e-10 %"),
            || {
                let dae = prepare("test2")?;
                let ode = prepare("test2-ode")?;
                let red = kron_reduce(&build_dae_system(&dae.coeffs, order)?)?;
                let pct = validate_against_ode(&red, &ode_matrix(&ode, order)?)?;
                Ok((pct < 1e-10, format!("error = {pct:.4e} %")))
            },
        );
    }
}

fn criterion_4(s: &mut Suite) {
    s.run("4a", "test2 G_1_4 vs printed, 1e-3", || {
        let p = prepare("test2")?;
        let d = max_diff(p.coeffs.g(4), &Matrix::from_f64_rows(&TEST2_G14));
        Ok((d <= 1e-3, format!("max |diff| = {d:.3e}")))
    });
    s.run("4b", "test2 reordered (G_1_4 ⊗ I_N) vs printed, 1e-3", || {
        let p = prepare("test2")?;
        let n = p.model.n();
        let r = to_canonical_columns(
            &kron_eye(p.coeffs.g(4), n)?,
            &[VarKind::Algebraic, VarKind::State],
            n,
            p.model.m(),
        )?;
        let d = max_diff(&r, &Matrix::from_f64_rows(&TEST2_G14_REORDERED));
        Ok((d <= 1e-3, format!("max |diff| = {d:.3e}")))
    });
}

fn linear_spectrum(p: &Prepared) -> Result<Vec<Complex64>, Error> {
    eigenvalues(&p.coeffs.linear_state_matrix()?)
}

fn criterion_5(s: &mut Suite) {
    s.run("5a", "test3 eig(A_1_1) vs printed linear eigenvalues, 1e-3", || {
        let p = prepare("test3")?;
        let e = linear_spectrum(&p)?;
        let r = match_spectra(&e, &table2(), 1e-3)?;
        let shown: Vec<String> = e.iter().map(|l| format!("{:.4}{:+.4}j", l.re, l.im)).collect();
        Ok((
            r.passed,
            format!("computed [{}], max distance {:.4}", shown.join(", "), r.max_distance),
        ))
    });
    s.run(
        "5b",
        "test3 oscillatory mode frequency within 1e-3 Hz and damping within 0.01 pp",
        || {
            let p = prepare("test3")?;
            let rep = mode_report(&linear_spectrum(&p)?, "test3");
            let m = rep
                .modes
                .iter()
                .find(|m| m.eigenvalue.im > 0.0)
                .ok_or_else(|| Error::Domain("no oscillatory mode".into()))?;
            let f = m.frequency_hz.unwrap_or(f64::NAN);
            let d = m.damping * 100.0;
            Ok((
                (f - 0.2732).abs() <= 1e-3 && (d - 7.7266).abs() <= 0.01,
                format!("f = {f:.4} Hz, damping = {d:.4} %"),
            ))
        },
    );
    s.run(
        "5c",
        "frequency/damping of the printed mode -0.133+j1.7165 reproduce the printed table",
        || {
            let rep = mode_report(&table2(), "printed");
            let m = &rep.modes[2];
            let f = m.frequency_hz.unwrap_or(f64::NAN);
            let d = m.damping * 100.0;
            let real = &rep.modes[0];
            let pass = (f - 0.2732).abs() <= 1e-3
                && (d - 7.7266).abs() <= 0.01
                && real.frequency_hz.is_none()
                && real.damping == 1.0;
            Ok((pass, format!("f = {f:.4} Hz, damping = {d:.4} %, real mode 100 %")))
        },
    );
}

fn spectrum_match(p: &Prepared, order: usize) -> Result<(bool, String), Error> {
    let red = kron_reduce(&build_dae_system(&p.coeffs, order)?)?;
    let lifted = eigenvalues(&red.condensed.matrix)?;
    let base = linear_spectrum(p)?;
    let combos = combination_spectrum(&base, order);
    let r = match_spectra(&lifted, &combos, 1e-6)?;
    Ok((
        r.passed,
        format!("{} eigenvalues, max distance {:.3e}", lifted.len(), r.max_distance),
    ))
}

fn criterion_6(s: &mut Suite) {
    for order in [2, 3] {
        s.run(
            &format!("6.{order}"),
            &format!("test3 order-{order} condensed spectrum = combination spectrum, 1e-6"),
            || spectrum_match(&prepare("test3")?, order),
        );
    }
    for name in ["test1", "test2"] {
        for order in [2, 3] {
            s.run(
                &format!("6.{name}.{order}"),
                &format!("{name} order-{order} condensed spectrum = combination spectrum, 1e-6"),
                || spectrum_match(&prepare(name)?, order),
            );
        }
    }
}

const T_END: f64 = 10.0;
const DT: f64 = 0.01;

fn criterion_7(s: &mut Suite, residuals: &mut Vec<(String, f64)>) {
    s.run(
        "7",
        "test3 per-state RMS error vs nonlinear DAE: cubic <= quadratic <= linear, strict on >= 2 states",
        || {
            let p = prepare("test3")?;
            let dx0 = [-0.05; 3];
            let x0: Vec<f64> = p.x_sep.iter().zip(&dx0).map(|(a, b)| a + b).collect();
            let truth = simulate_dae(&p.model, &x0, T_END, DT, &p.z_sep)?;
            residuals.push((
                "test3".into(),
                truth.max_constraint_residual.unwrap_or(f64::INFINITY),
            ));
            let mut rms = Vec::new();
            for order in 1..=3 {
                let a = reduced_matrix(&p, order)?;
                let lin = simulate_linear(&a, &dx0, 3, order, T_END, DT, &p.x_sep)?;
                rms.push(compare(&lin, &truth)?.rms);
            }
            let ordered = (0..3).all(|i| rms[2][i] <= rms[1][i] && rms[1][i] <= rms[0][i]);
            let strict = (0..3)
                .filter(|&i| rms[2][i] < rms[1][i] && rms[1][i] < rms[0][i])
                .count();
            let fmt = |v: &[f64]| {
                v.iter()
                    .map(|x| format!("{x:.3e}"))
                    .collect::<Vec<_>>()
                    .join("/")
            };
            Ok((
                ordered && strict >= 2,
                format!(
                    "RMS linear {} quadratic {} cubic {}",
                    fmt(&rms[0]),
                    fmt(&rms[1]),
                    fmt(&rms[2])
                ),
            ))
        },
    );
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, m: usize, singular: bool) -> Coefficients {
    let mut block = |rows: usize, cols: usize| {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .expect("sized")
    };
    let g: Vec<Matrix> = (1..=9)
        .map(|j| block(n, carleman::taylor::family_len(j, n, m)))
        .collect();
    let mut h: Vec<Matrix> = (1..=9)
        .map(|j| block(m, carleman::taylor::family_len(j, n, m)))
        .collect();
    let mut h14 = &Matrix::identity(m) + &h[3].scale(0.3);
    if singular {
        if m == 1 {
            h14[(0, 0)] = 0.0;
        } else {
            for j in 0..m {
                h14[(m - 1, j)] = 2.0 * h14[(0, j)];
            }
        }
    }
    h[3] = h14;
    Coefficients::from_blocks(n, m, g, h).expect("shapes")
}

fn criterion_8(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e57);
    let mut reports = Vec::new();
    let mut failure: Option<Error> = None;
    for k in 0..20 {
        let m = if k < 10 { 1 } else { 2 };
        let c = random_set(&mut rng, 2, m, false);
        match build_dae_system(&c, 3).and_then(|sys| det_product_check(&sys)) {
            Ok(r) => reports.push((m, r)),
            Err(e) => failure = Some(e),
        }
    }
    let worst = |f: &dyn Fn(&carleman::DetReport<f64>) -> f64| {
        reports.iter().map(|(_, r)| f(r)).fold(0.0, f64::max)
    };
    let ok = failure.is_none() && reports.len() == 20;
    let suffix = failure.map_or(String::new(), |e| format!(" (error: {e})"));
    let blocks = worst(&|r| r.rel_err_blocks);
    s.record(
        "8a",
        "20 random systems: det(F22) vs product of diagonal-block determinants, 1e-6 rel",
        ok && blocks <= 1e-6,
        format!("worst rel err {blocks:.3e}{suffix}"),
    );
    let signed = worst(&|r| r.rel_err_signed);
    s.record(
        "8b",
        "20 random systems: det(F22) vs det(H_1_4)-power identities with permutation signs, 1e-6 rel",
        ok && signed <= 1e-6,
        format!("worst rel err {signed:.3e}"),
    );
    let mag = worst(&|r| r.rel_err_magnitude);
    s.record(
        "8c",
        "20 random systems: |det(F22)| vs unsigned det(H_1_4)-power identities, 1e-6 rel",
        ok && mag <= 1e-6,
        format!("worst rel err {mag:.3e}"),
    );
    let literal: Vec<(usize, f64)> = reports
        .iter()
        .map(|(m, r)| (*m, rel_err(r.det_f22, r.power_product)))
        .collect();
    let worst_m = |mm: usize| {
        literal
            .iter()
            .filter(|(m, _)| *m == mm)
            .map(|(_, e)| *e)
            .fold(0.0, f64::max)
    };
    s.record(
        "8d",
        "20 random systems: det(F22) vs unsigned power identities taken literally (signed), 1e-6 rel",
        ok && literal.iter().all(|(_, e)| *e <= 1e-6),
        format!(
            "worst rel err M=1: {:.3e}, M=2: {:.3e}",
            worst_m(1),
            worst_m(2)
        ),
    );

    s.run(
        "8e",
        "singular H_1_4: |det(F22)| <= 1e-10 * scale and reduction raises the regularity error",
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5146);
            let mut worst = 0.0f64;
            let mut all_rejected = true;
            for k in 0..10 {
                let m = if k < 5 { 1 } else { 2 };
                let c = random_set(&mut rng, 2, m, true);
                let sys = build_dae_system(&c, 3)?;
                let r = det_product_check(&sys)?;
                worst = worst.max(r.det_f22.abs() / r.hadamard_scale);
                all_rejected &= matches!(kron_reduce(&sys), Err(Error::Regularity { .. }));
            }
            Ok((
                worst <= 1e-10 && all_rejected,
                format!("worst |det|/scale {worst:.3e}, all rejected: {all_rejected}"),
            ))
        },
    );
    s.run("8f", "test1 order 3: determinant identities within 1e-8 rel", || {
        let p = prepare("test1")?;
        let r = det_product_check(&build_dae_system(&p.coeffs, 3)?)?;
        let e = r.rel_err_blocks.max(r.rel_err_signed);
        Ok((e <= 1e-8, format!("rel err {e:.3e}, det(F22) = {:.6e}", r.det_f22)))
    });
}

fn var_names(p: &Prepared, factors: &[(VarKind, usize)]) -> Vec<String> {
    factors
        .iter()
        .map(|&(k, i)| match k {
            VarKind::State => p.model.states[i].clone(),
            VarKind::Algebraic => p.model.algebraics[i].clone(),
        })
        .collect()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn oracle_max_error(name: &str) -> Result<(f64, usize), Error> {
    let p = prepare(name)?;
    let eq = carleman::Equilibrium64 {
        x_sep: p.x_sep.clone(),
        z_sep: p.z_sep.clone(),
        residual_norm: 0.0,
        newton_iters: 0,
    };
    let mut worst = 0.0f64;
    let mut count = 0;
    for (which, rows) in [(Which::G, p.model.n()), (Which::H, p.model.m())] {
        for j in 1..=9 {
            let basis = p.coeffs.column_basis(j);
            let block = match which {
                Which::G => p.coeffs.g(j),
                Which::H => p.coeffs.h(j),
            };
            let kinds = FAMILIES[j - 1];
            let nx = kinds.iter().filter(|k| **k == VarKind::State).count();
            let scale = factorial(nx) * factorial(kinds.len() - nx);
            for col in 0..basis.len() {
                let names = var_names(&p, &basis.entries()[col]);
                let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                for row in 0..rows {
                    let fd = fd_oracle(&p.model, &eq, which, row, &refs)? / scale;
                    worst = worst.max((fd - block[(row, col)]).abs());
                    count += 1;
                }
            }
        }
    }
    Ok((worst, count))
}

fn taylor_max_ratio(name: &str, rng: &mut ChaCha8Rng) -> Result<f64, Error> {
    let p = prepare(name)?;
    let (n, m) = (p.model.n(), p.model.m());
    let g0 = p.model.eval_g(&p.x_sep, &p.z_sep)?;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let dir: Vec<f64> = (0..n + m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let radius = rng.gen_range(0.001..=0.01);
        let d: Vec<f64> = dir.iter().map(|v| v / norm * radius).collect();
        let x: Vec<f64> = p.x_sep.iter().zip(&d[..n]).map(|(a, b)| a + b).collect();
        let z: Vec<f64> = p.z_sep.iter().zip(&d[n..]).map(|(a, b)| a + b).collect();
        let exact = p.model.eval_g(&x, &z)?;
        let approx = p.coeffs.taylor_g(&d[..n], &d[n..])?;
        let err = exact
            .iter()
            .zip(&approx)
            .zip(&g0)
            .map(|((e, a), c)| (e - c - a).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err / radius.powi(4));
    }
    Ok(worst)
}

fn criterion_9(s: &mut Suite) {
    s.run(
        "9a",
        "every G/H block entry on all fixtures vs finite-difference oracle, 1e-4",
        || {
            let mut worst = 0.0f64;
            let mut total = 0;
            let mut parts = Vec::new();
            for name in ["test1", "test2", "test3"] {
                let (w, c) = oracle_max_error(name)?;
                worst = worst.max(w);
                total += c;
                parts.push(format!("{name} {w:.2e}"));
            }
            Ok((
                worst <= 1e-4,
                format!("{total} entries, worst {}", parts.join(", ")),
            ))
        },
    );
    s.run(
        "9b",
        "third-order Taylor reconstruction of g at 50 perturbations per fixture, error <= 10 |d|^4",
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(0x7a7);
            let mut parts = Vec::new();
            let mut worst = 0.0f64;
            for name in ["test1", "test2", "test3"] {
                let r = taylor_max_ratio(name, &mut rng)?;
                worst = worst.max(r);
                parts.push(format!("{name} {r:.3}"));
            }
            Ok((
                worst <= 10.0,
                format!("worst error/|d|^4: {}", parts.join(", ")),
            ))
        },
    );
}

fn criterion_10(s: &mut Suite, residuals: &mut Vec<(String, f64)>) {
    s.run(
        "10b",
        "test2 run from sep + (-0.05, -0.05, -0.05): x1+z2 in (-pi/2, pi/2), x1*z2 in (-pi, pi]",
        || {
            let p = prepare("test2")?;
            let x0: Vec<f64> = p.x_sep.iter().map(|v| v - 0.05).collect();
            let tr = simulate_dae(&p.model, &x0, T_END, DT, &p.z_sep)?;
            residuals.push((
                "test2".into(),
                tr.max_constraint_residual.unwrap_or(f64::INFINITY),
            ));
            let (mut lo1, mut hi1, mut lo2, mut hi2) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for k in 0..tr.len() {
                let x1 = tr.states[(k, 0)];
                let z2 = tr.algebraics[(k, 1)];
                lo1 = lo1.min(x1 + z2);
                hi1 = hi1.max(x1 + z2);
                lo2 = lo2.min(x1 * z2);
                hi2 = hi2.max(x1 * z2);
            }
            let pass = lo1 > -PI / 2.0 && hi1 < PI / 2.0 && lo2 > -PI && hi2 <= PI;
            Ok((
                pass,
                format!("x1+z2 in [{lo1:.4}, {hi1:.4}], x1*z2 in [{lo2:.4}, {hi2:.4}]"),
            ))
        },
    );
    s.run(
        "10c",
        "test1 run from (0.1, 0.1) decays like exp(-0.873 t) and matches a dt/10 run within 1e-9",
        || {
            let p = prepare("test1")?;
            let tr = simulate_dae(&p.model, &[0.1, 0.1], T_END, DT, &p.z_sep)?;
            residuals.push((
                "test1".into(),
                tr.max_constraint_residual.unwrap_or(f64::INFINITY),
            ));
            let fine = simulate_dae(&p.model, &[0.1, 0.1], T_END, DT / 10.0, &p.z_sep)?;
            let end = tr.last_state().iter().map(|v| v * v).sum::<f64>().sqrt();
            let gap = tr
                .last_state()
                .iter()
                .zip(fine.last_state())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let slowest = linear_spectrum(&p)?
                .iter()
                .map(|l| l.re)
                .fold(f64::MIN, f64::max);
            let envelope = 0.2 * (slowest * T_END).exp();
            Ok((
                gap <= 1e-9 && end <= envelope,
                format!(
                    "|x(10)| = {end:.3e} (slowest mode {slowest:.4}, envelope {envelope:.3e}), dt/10 gap {gap:.2e}"
                ),
            ))
        },
    );
    let worst = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    let detail = residuals
        .iter()
        .map(|(n, r)| format!("{n} {r:.2e}"))
        .collect::<Vec<_>>()
        .join(", ");
    s.record(
        "10a",
        "all accepted nonlinear DAE trajectories keep |h|_inf <= 1e-10",
        residuals.len() == 3 && worst <= 1e-10,
        format!("{} runs: {detail}", residuals.len()),
    );
}

fn main() -> ExitCode {
    let mut s = Suite { lines: Vec::new() };
    let mut residuals = Vec::new();
    criterion_1(&mut s);
    criterion_2(&mut s);
    criterion_3(&mut s);
    criterion_4(&mut s);
    criterion_5(&mut s);
    criterion_6(&mut s);
    criterion_7(&mut s, &mut residuals);
    criterion_8(&mut s);
    criterion_9(&mut s);
    criterion_10(&mut s, &mut residuals);

    let failed: Vec<&str> = s
        .lines
        .iter()
        .filter(|(_, p)| !p)
        .map(|(id, _)| id.as_str())
        .collect();
    let unexpected: Vec<&str> = failed
        .iter()
        .copied()
        .filter(|id| !KNOWN_FAILURES.contains(id))
        .collect();
    println!(
        "{} checks, {} passed, {} failed ({} known, {} unexpected)",
        s.lines.len(),
        s.lines.len() - failed.len(),
        failed.len(),
        failed.len() - unexpected.len(),
        unexpected.len()
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {}", unexpected.join(", "));
        ExitCode::FAILURE
    }
}
