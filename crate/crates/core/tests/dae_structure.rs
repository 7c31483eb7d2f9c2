use carleman::carleman_dae::build_dae_system;
use carleman::kron::{eye_kron, kron_eye, kron_vec};
use carleman::linalg::Lu;
use carleman::taylor::{family_len, family_vector, FAMILIES};
use carleman::{
    build_g_blocks, build_h_blocks, coefficient_matrices, find_equilibrium, kron_reduce,
    CoefficientSet, Error, Mat, ModelSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat<f64> {
    let data = (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Mat::from_vec(r, c, data).unwrap()
}

fn random_coeffs(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CoefficientSet<f64> {
    let g = (1..=9).map(|j| random_mat(rng, n, family_len(j, n, m))).collect();
    let mut h: Vec<Mat<f64>> = (1..=9).map(|j| random_mat(rng, m, family_len(j, n, m))).collect();
    for i in 0..m {
        h[3][(i, i)] += 3.0;
    }
    CoefficientSet::from_blocks(n, m, g, h).unwrap()
}

fn fixture_coeffs(name: &str) -> CoefficientSet<f64> {
    let model: ModelSpec = carleman::fixtures::load_fixture(name).unwrap();
    let eq = find_equilibrium::<f64>(&model).unwrap();
    coefficient_matrices(&model, &eq).unwrap()
}

#[test]
fn g25_acts_as_product_rule_on_random_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (n, m) in [(2, 1), (2, 2), (3, 2)] {
        let c = random_coeffs(&mut rng, n, m);
        let gb = build_g_blocks(&c, 2).unwrap();
        let g25 = gb.get(2, 5).unwrap();
        for _ in 0..5 {
            let dx: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dz: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = g25.matvec(&kron_vec(&dx, &dz)).unwrap();
            let a = kron_eye(c.g(4), n).unwrap().matvec(&kron_vec(&dz, &dx)).unwrap();
            let b = eye_kron(n, c.g(4)).unwrap().matvec(&kron_vec(&dx, &dz)).unwrap();
            for k in 0..lhs.len() {
                assert!((lhs[k] - a[k] - b[k]).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn zero_h11_removes_the_h_squared_state_block() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = random_coeffs(&mut rng, 2, 1);
    let mut h = c.h.clone();
    h[0] = Mat::zeros(1, 2);
    let c = CoefficientSet::from_blocks(2, 1, c.g.clone(), h).unwrap();
    let hb = build_h_blocks(&c, 3).unwrap();
    assert!(hb.get(3, 2).is_none_or(Mat::is_zero));
}

#[test]
fn test1_auxiliary_blocks() {
    let c = fixture_coeffs("test1");
    let hb = build_h_blocks(&c, 2).unwrap();
    let h22 = Mat::from_f64_rows(&[[-1.0, 0.0, 1.0, 0.0], [0.0, -1.0, 0.0, 1.0]]);
    assert!(hb.get(2, 2).unwrap().max_abs_diff(&h22).unwrap() < 1e-12);
    assert!(hb.get(2, 5).unwrap().max_abs_diff(&Mat::identity(2)).unwrap() < 1e-12);
    let h32 = Mat::from_f64_rows(&[[1.0, -1.0, -1.0, 1.0]]);
    assert!(hb.get(3, 2).unwrap().max_abs_diff(&h32).unwrap() < 1e-12);
    let h35 = Mat::from_f64_rows(&[[-2.0, 2.0]]);
    assert!(hb.get(3, 5).unwrap().max_abs_diff(&h35).unwrap() < 1e-12);
    assert!((hb.get(3, 6).unwrap()[(0, 0)] - 1.0).abs() < 1e-12);

    let gb = build_g_blocks(&c, 2).unwrap();
    let g25 = Mat::from_f64_rows(&[[0.2, 0.0], [-0.1, 0.1], [-0.1, 0.1], [0.0, -0.2]]);
    assert!(gb.get(2, 5).unwrap().max_abs_diff(&g25).unwrap() < 1e-12);
}

#[test]
fn test1_implicit_function_coefficients() {
    let c = fixture_coeffs("test1");
    let r = kron_reduce(&build_dae_system(&c, 2).unwrap()).unwrap();
    assert!((r.htilde[0][(0, 0)] - 1.0).abs() < 1e-12);
    assert!((r.htilde[0][(0, 1)] + 1.0).abs() < 1e-12);
    assert!(r.htilde[1].max_abs() < 1e-12);
}

// Column families allowed to be nonzero in each row family; the rest must be
// exactly zero.
const G_PATTERN: [&[usize]; 3] = [&[1, 2, 3, 4, 5, 6, 7, 8, 9], &[2, 3, 5, 7, 8], &[3, 7]];
const H_PATTERN: [&[usize]; 6] = [
    &[1, 2, 3, 4, 5, 6, 7, 8, 9],
    &[2, 3, 5, 7, 8],
    &[2, 3, 5, 6, 7, 8, 9],
    &[3, 7],
    &[3, 7, 8],
    &[3, 7, 8, 9],
];

#[test]
fn sparsity_pattern_of_random_third_order_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (n, m) in [(2, 1), (2, 2), (3, 1)] {
        let c = random_coeffs(&mut rng, n, m);
        let sys = build_dae_system(&c, 3).unwrap();
        let full = sys.full_matrix();
        // Column offsets of families 1..9 in [x_basis, z_basis].
        let mut col_off = [0; 10];
        let mut acc = 0;
        for j in 1..=9 {
            col_off[j] = acc;
            acc += family_len(j, n, m);
        }
        let mut row = 0;
        let row_lens: Vec<(usize, &[usize])> = (1..=3)
            .map(|i| (n.pow(i as u32), G_PATTERN[i - 1]))
            .chain((1..=6).map(|r| (carleman::carleman_dae::h_row_len(r, n, m), H_PATTERN[r - 1])))
            .collect();
        for (len, allowed) in row_lens {
            for j in 1..=9 {
                if allowed.contains(&j) {
                    continue;
                }
                for r in row..row + len {
                    for col in col_off[j]..col_off[j] + family_len(j, n, m) {
                        assert_eq!(full[(r, col)], 0.0, "N={n} M={m} row {r} family {j}");
                    }
                }
            }
            row += len;
        }
        assert_eq!(row, full.rows());
    }
}

fn solve_truncated_h(c: &CoefficientSet<f64>, dx: &[f64]) -> Vec<f64> {
    let m = c.m;
    let mut dz = vec![0.0; m];
    for _ in 0..50 {
        let r = c.taylor_h(dx, &dz).unwrap();
        if r.iter().all(|v| v.abs() < 1e-15) {
            break;
        }
        let mut jac = Mat::zeros(m, m);
        for k in 0..m {
            let mut p = dz.clone();
            p[k] += 1e-7;
            let rp = c.taylor_h(dx, &p).unwrap();
            for i in 0..m {
                jac[(i, k)] = (rp[i] - r[i]) / 1e-7;
            }
        }
        let step = Lu::new(&jac).unwrap().solve_vec(&r).unwrap();
        for k in 0..m {
            dz[k] -= step[k];
        }
    }
    dz
}

#[test]
fn auxiliary_rows_vanish_to_fourth_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut sets: Vec<CoefficientSet<f64>> = vec![fixture_coeffs("test2"), fixture_coeffs("test3")];
    sets.push(random_coeffs(&mut rng, 2, 1));
    sets.push(random_coeffs(&mut rng, 2, 2));
    for c in &sets {
        let sys = build_dae_system(c, 3).unwrap();
        let mut checked = 0;
        for _ in 0..20 {
            let scale = rng.gen_range(1e-3..1e-2);
            let dx: Vec<f64> = (0..c.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dx: Vec<f64> = dx.iter().map(|v| v * scale / norm).collect();
            let dz = solve_truncated_h(c, &dx);
            let delta = dx.iter().chain(&dz).map(|v| v * v).sum::<f64>().sqrt();
            if delta > 0.01 {
                continue;
            }
            let xv: Vec<f64> = (1..=3).flat_map(|j| family_vector(FAMILIES[j - 1], &dx, &dz)).collect();
            let zv: Vec<f64> = (4..=9).flat_map(|j| family_vector(FAMILIES[j - 1], &dx, &dz)).collect();
            let a = sys.f21.matvec(&xv).unwrap();
            let b = sys.f22.matvec(&zv).unwrap();
            let worst = a.iter().zip(&b).map(|(p, q)| (p + q).abs()).fold(0.0, f64::max);
            assert!(worst <= 100.0 * delta.powi(4), "{worst:e} vs ‖Δ‖ = {delta:e}");
            checked += 1;
        }
        assert!(checked >= 10);
    }
}

#[test]
fn singular_h14_makes_f22_singular() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for m in [1, 2] {
        for _ in 0..5 {
            let c = random_coeffs(&mut rng, 2, m);
            let mut h = c.h.clone();
            // Rank-deficient H_1_4: last row is a multiple of the first.
            for k in 0..m {
                let v = if m == 1 { 0.0 } else { 0.5 * h[3][(0, k)] };
                h[3][(m - 1, k)] = v;
            }
            let c = CoefficientSet::from_blocks(2, m, c.g.clone(), h).unwrap();
            assert_eq!(c.det_h14, 0.0);
            let sys = build_dae_system(&c, 3).unwrap();
            let scale = sys.f22.max_abs().powi(sys.f22.rows() as i32);
            let det = carleman::linalg::det(&sys.f22).unwrap();
            assert!(det.abs() <= 1e-10 * scale, "det(F22) = {det:e}");
            assert!(matches!(kron_reduce(&sys), Err(Error::Regularity { .. })));
        }
        let c = random_coeffs(&mut rng, 2, m);
        let sys = build_dae_system(&c, 3).unwrap();
        assert!(carleman::linalg::det(&sys.f22).unwrap().abs() > 0.0);
        assert!(kron_reduce(&sys).is_ok());
    }
}

#[test]
fn linear_system_order_one_is_the_jacobian() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let c = random_coeffs(&mut rng, 3, 2);
    let sys = build_dae_system(&c, 1).unwrap();
    assert_eq!(sys.f11, *c.g(1));
    assert_eq!(sys.f12, *c.g(4));
    assert_eq!(sys.f21, *c.h(1));
    assert_eq!(sys.f22, *c.h(4));
    let r = kron_reduce(&sys).unwrap();
    let want = c.linear_state_matrix().unwrap();
    assert!(r.ftilde11.max_abs_diff(&want).unwrap() < 1e-12);
}
