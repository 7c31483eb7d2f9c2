//! Carleman extension of a DAE: lifted `G` blocks, auxiliary constraint
//! products, assembly of the square system, and Kron reduction.
//!
//! Row families of the extended system are `d/dt Δx^[i]` (`i = 1..order`)
//! followed by the constraint products `Δh, Δh⊗Δx, Δh⊗Δh` (order ≥ 2) and
//! `Δh⊗Δx⊗Δx, Δh⊗Δh⊗Δx, Δh⊗Δh⊗Δh` (order 3). Column families are
//! `Δx, Δx^[2], Δx^[3]` and `Δz, Δx⊗Δz, Δz^[2], Δx^[2]⊗Δz, Δx⊗Δz^[2], Δz^[3]`.

use std::collections::BTreeMap;

use crate::carleman_ode::{check_order, CarlemanOdeSystem};
use crate::error::{Error, Result};
use crate::kron::{
    canonical_parity, condense, eye_kron, kron_eye, kron_product, to_canonical_columns,
    CondensedMatrix, MonomialBasis, VarKind,
};
use crate::linalg::Lu;
use crate::matrix::Mat;
use crate::scalar::Scalar;
use crate::taylor::{CoefficientSet, FAMILIES};

use VarKind::{Algebraic as Z, State as X};

/// `F22` condition estimates above this are treated as a regularity failure.
pub const REGULARITY_COND_LIMIT: f64 = 1e12;

/// Lifted blocks keyed by `(row family, column family)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedBlocks<T> {
    pub blocks: BTreeMap<(usize, usize), Mat<T>>,
}

impl<T: Scalar> LiftedBlocks<T> {
    fn new() -> Self {
        Self {
            blocks: BTreeMap::new(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&Mat<T>> {
        self.blocks.get(&(i, j))
    }

    pub fn keys(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.blocks.keys().copied()
    }

    fn put(&mut self, i: usize, j: usize, m: Mat<T>) {
        self.blocks.insert((i, j), m);
    }
}

struct Ctx {
    n: usize,
    m: usize,
}

impl Ctx {
    fn canon<T: Scalar>(&self, c: Mat<T>, arranged: &[VarKind]) -> Result<Mat<T>> {
        to_canonical_columns(&c, arranged, self.n, self.m)
    }
}

fn sum<T: Scalar>(terms: Vec<Mat<T>>) -> Result<Mat<T>> {
    let mut it = terms.into_iter();
    let first = it.next().expect("at least one term");
    it.try_fold(first, |acc, t| acc.try_add(&t))
}

/// Lifted state-derivative blocks `G_i_j` for `i ≥ 2`.
pub fn build_g_blocks<T: Scalar>(c: &CoefficientSet<T>, order: usize) -> Result<LiftedBlocks<T>> {
    check_order(order)?;
    let (n, m) = (c.n, c.m);
    let cx = Ctx { n, m };
    let mut out = LiftedBlocks::new();
    if order < 2 {
        return Ok(out);
    }
    let a1 = [c.g(1).clone(), c.g(2).clone(), c.g(3).clone()];
    let g14 = c.g(4);

    out.put(2, 2, crate::kron::carleman_block(&a1, 2, 2, n)?);
    out.put(
        2,
        5,
        sum(vec![
            cx.canon(kron_eye(g14, n)?, &[Z, X])?,
            eye_kron(n, g14)?,
        ])?,
    );
    if order < 3 {
        return Ok(out);
    }
    out.put(2, 3, crate::kron::carleman_block(&a1, 2, 3, n)?);
    out.put(3, 3, crate::kron::carleman_block(&a1, 3, 3, n)?);
    out.put(
        2,
        7,
        sum(vec![
            cx.canon(kron_eye(c.g(5), n)?, &[X, Z, X])?,
            eye_kron(n, c.g(5))?,
        ])?,
    );
    out.put(
        2,
        8,
        sum(vec![
            cx.canon(kron_eye(c.g(6), n)?, &[Z, Z, X])?,
            eye_kron(n, c.g(6))?,
        ])?,
    );
    out.put(
        3,
        7,
        sum(vec![
            cx.canon(kron_eye(g14, n * n)?, &[Z, X, X])?,
            cx.canon(kron_eye(&eye_kron(n, g14)?, n)?, &[X, Z, X])?,
            eye_kron(n * n, g14)?,
        ])?,
    );
    Ok(out)
}

/// Auxiliary constraint-product blocks `H_r_j` for row families `r = 2..=6`.
pub fn build_h_blocks<T: Scalar>(c: &CoefficientSet<T>, order: usize) -> Result<LiftedBlocks<T>> {
    check_order(order)?;
    let (n, m) = (c.n, c.m);
    let cx = Ctx { n, m };
    let mut out = LiftedBlocks::new();
    if order < 2 {
        return Ok(out);
    }
    let (h11, h12, h14, h15, h16) = (c.h(1), c.h(2), c.h(4), c.h(5), c.h(6));

    // Δh ⊗ Δx
    out.put(2, 2, kron_eye(h11, n)?);
    out.put(2, 5, cx.canon(kron_eye(h14, n)?, &[Z, X])?);
    // Δh ⊗ Δh, second order part
    let h32 = kron_product(h11, h11)?;
    let h35 = sum(vec![
        cx.canon(kron_product(h14, h11)?, &[Z, X])?,
        kron_product(h11, h14)?,
    ])?;
    let h36 = kron_product(h14, h14)?;
    out.put(3, 2, h32.clone());
    out.put(3, 5, h35.clone());
    out.put(3, 6, h36.clone());
    if order < 3 {
        return Ok(out);
    }

    out.put(2, 3, kron_eye(h12, n)?);
    out.put(2, 7, cx.canon(kron_eye(h15, n)?, &[X, Z, X])?);
    out.put(2, 8, cx.canon(kron_eye(h16, n)?, &[Z, Z, X])?);

    out.put(
        3,
        3,
        sum(vec![kron_product(h12, h11)?, kron_product(h11, h12)?])?,
    );
    out.put(
        3,
        7,
        sum(vec![
            cx.canon(kron_product(h15, h11)?, &[X, Z, X])?,
            kron_product(h11, h15)?,
            cx.canon(kron_product(h14, h12)?, &[Z, X, X])?,
            kron_product(h12, h14)?,
        ])?,
    );
    out.put(
        3,
        8,
        sum(vec![
            cx.canon(kron_product(h16, h11)?, &[Z, Z, X])?,
            kron_product(h11, h16)?,
            kron_product(h15, h14)?,
            cx.canon(kron_product(h14, h15)?, &[Z, X, Z])?,
        ])?,
    );
    out.put(
        3,
        9,
        sum(vec![kron_product(h16, h14)?, kron_product(h14, h16)?])?,
    );

    // Δh ⊗ Δx^[2]
    out.put(4, 3, kron_eye(h11, n * n)?);
    out.put(4, 7, cx.canon(kron_eye(h14, n * n)?, &[Z, X, X])?);

    // Δh^[2] ⊗ Δx
    out.put(5, 3, kron_eye(&h32, n)?);
    out.put(5, 7, cx.canon(kron_eye(&h35, n)?, &[X, Z, X])?);
    out.put(5, 8, cx.canon(kron_eye(&h36, n)?, &[Z, Z, X])?);

    // Δh^[3]
    out.put(6, 3, kron_product(&h32, h11)?);
    out.put(
        6,
        7,
        sum(vec![
            kron_product(&h32, h14)?,
            cx.canon(kron_product(&h35, h11)?, &[X, Z, X])?,
        ])?,
    );
    out.put(
        6,
        8,
        sum(vec![
            kron_product(&h35, h14)?,
            cx.canon(kron_product(&h36, h11)?, &[Z, Z, X])?,
        ])?,
    );
    out.put(6, 9, kron_product(&h36, h14)?);
    Ok(out)
}

/// Factor kinds of each constraint-product row family, `h` marking a
/// constraint factor.
pub const H_ROW_FAMILIES: [&str; 6] = ["h", "h*x", "h*h", "h*x*x", "h*h*x", "h*h*h"];

pub fn h_row_len(r: usize, n: usize, m: usize) -> usize {
    H_ROW_FAMILIES[r - 1]
        .split('*')
        .map(|f| if f == "h" { m } else { n })
        .product()
}

pub fn x_families(order: usize) -> Vec<usize> {
    (1..=order).collect()
}

pub fn z_families(order: usize) -> Vec<usize> {
    match order {
        1 => vec![4],
        2 => vec![4, 5, 6],
        _ => vec![4, 5, 6, 7, 8, 9],
    }
}

pub fn h_row_families(order: usize) -> Vec<usize> {
    match order {
        1 => vec![1],
        2 => vec![1, 2, 3],
        _ => vec![1, 2, 3, 4, 5, 6],
    }
}

fn h_row_labels(order: usize, n: usize, m: usize) -> Vec<String> {
    let mut out = Vec::new();
    for r in h_row_families(order) {
        let kinds: Vec<&str> = H_ROW_FAMILIES[r - 1].split('*').collect();
        let dims: Vec<usize> = kinds.iter().map(|k| if *k == "h" { m } else { n }).collect();
        let total: usize = dims.iter().product();
        let mut idx = vec![0usize; kinds.len()];
        for _ in 0..total {
            out.push(
                kinds
                    .iter()
                    .zip(&idx)
                    .map(|(k, i)| format!("{k}{}", i + 1))
                    .collect::<Vec<_>>()
                    .join("*"),
            );
            for a in (0..kinds.len()).rev() {
                idx[a] += 1;
                if idx[a] < dims[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
    }
    out
}

/// The square extended system
/// `[d/dt Δx_ord; 0] = [F11 F12; F21 F22] [Δx_ord; Δz_ord]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanDaeSystem<T> {
    pub order: usize,
    pub n: usize,
    pub m: usize,
    pub f11: Mat<T>,
    pub f12: Mat<T>,
    pub f21: Mat<T>,
    pub f22: Mat<T>,
    pub x_basis: MonomialBasis,
    pub z_basis: MonomialBasis,
    pub h_row_labels: Vec<String>,
    pub det_h14: T,
}

impl<T: Scalar> CarlemanDaeSystem<T> {
    pub fn full_matrix(&self) -> Mat<T> {
        let (r1, c1) = self.f11.shape();
        let (r2, c2) = self.f22.shape();
        let mut f = Mat::zeros(r1 + r2, c1 + c2);
        f.set_block(0, 0, &self.f11);
        f.set_block(0, c1, &self.f12);
        f.set_block(r1, 0, &self.f21);
        f.set_block(r1, c1, &self.f22);
        f
    }
}

fn place<T: Scalar>(
    dst: &mut Mat<T>,
    r0: usize,
    c0: usize,
    block: Option<&Mat<T>>,
    shape: (usize, usize),
    label: impl FnOnce() -> String,
) -> Result<()> {
    if let Some(b) = block {
        if b.shape() != shape {
            return Err(Error::BasisMismatch(format!(
                "{} is {}x{}, its slot is {}x{}",
                label(),
                b.rows(),
                b.cols(),
                shape.0,
                shape.1
            )));
        }
        dst.set_block(r0, c0, b);
    }
    Ok(())
}

/// Lays out first-row, lifted and auxiliary blocks in the square system.
pub fn assemble<T: Scalar>(
    c: &CoefficientSet<T>,
    gb: &LiftedBlocks<T>,
    hb: &LiftedBlocks<T>,
    order: usize,
) -> Result<CarlemanDaeSystem<T>> {
    check_order(order)?;
    let (n, m) = (c.n, c.m);
    let xf = x_families(order);
    let zf = z_families(order);
    let hf = h_row_families(order);
    let fams = |js: &[usize]| -> Vec<Vec<VarKind>> {
        js.iter().map(|&j| FAMILIES[j - 1].to_vec()).collect()
    };
    let x_basis = MonomialBasis::stacked(&fams(&xf), n, m);
    let z_basis = MonomialBasis::stacked(&fams(&zf), n, m);
    let g_rows: Vec<usize> = (1..=order).map(|i| n.pow(i as u32)).collect();
    let h_rows: Vec<usize> = hf.iter().map(|&r| h_row_len(r, n, m)).collect();
    let nx = x_basis.len();
    let nz = z_basis.len();
    let ng: usize = g_rows.iter().sum();
    let nh: usize = h_rows.iter().sum();
    if ng != nx || nh != nz {
        return Err(Error::BasisMismatch(format!(
            "{ng} state rows for {nx} state columns, {nh} constraint rows for {nz} algebraic columns"
        )));
    }

    let mut f11 = Mat::zeros(nx, nx);
    let mut f12 = Mat::zeros(nx, nz);
    let mut f21 = Mat::zeros(nz, nx);
    let mut f22 = Mat::zeros(nz, nz);

    let mut r0 = 0;
    for (gi, &rows) in g_rows.iter().enumerate() {
        let i = gi + 1;
        for (xi, &j) in xf.iter().enumerate() {
            let b = if i == 1 { Some(c.g(j)) } else { gb.get(i, j) };
            let shape = (rows, x_basis.family_len(xi));
            place(&mut f11, r0, x_basis.family_offset(xi), b, shape, || format!("G_{i}_{j}"))?;
        }
        for (zi, &j) in zf.iter().enumerate() {
            let b = if i == 1 { Some(c.g(j)) } else { gb.get(i, j) };
            let shape = (rows, z_basis.family_len(zi));
            place(&mut f12, r0, z_basis.family_offset(zi), b, shape, || format!("G_{i}_{j}"))?;
        }
        r0 += rows;
    }
    let mut r0 = 0;
    for (&r, &rows) in hf.iter().zip(&h_rows) {
        for (xi, &j) in xf.iter().enumerate() {
            let b = if r == 1 { Some(c.h(j)) } else { hb.get(r, j) };
            let shape = (rows, x_basis.family_len(xi));
            place(&mut f21, r0, x_basis.family_offset(xi), b, shape, || format!("H_{r}_{j}"))?;
        }
        for (zi, &j) in zf.iter().enumerate() {
            let b = if r == 1 { Some(c.h(j)) } else { hb.get(r, j) };
            let shape = (rows, z_basis.family_len(zi));
            place(&mut f22, r0, z_basis.family_offset(zi), b, shape, || format!("H_{r}_{j}"))?;
        }
        r0 += rows;
    }

    Ok(CarlemanDaeSystem {
        order,
        n,
        m,
        f11,
        f12,
        f21,
        f22,
        x_basis,
        z_basis,
        h_row_labels: h_row_labels(order, n, m),
        det_h14: c.det_h14,
    })
}

/// Convenience: lifted blocks plus assembly.
pub fn build_dae_system<T: Scalar>(
    c: &CoefficientSet<T>,
    order: usize,
) -> Result<CarlemanDaeSystem<T>> {
    let gb = build_g_blocks(c, order)?;
    let hb = build_h_blocks(c, order)?;
    assemble(c, &gb, &hb, order)
}

/// Equivalent lifted ODE `d/dt Δx_ord = F̃11 Δx_ord` and the implicit-function
/// coefficients `Δz ≈ H̃_1_1 Δx + H̃_1_2 Δx^[2] + H̃_1_3 Δx^[3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedOde<T> {
    pub order: usize,
    pub n: usize,
    pub m: usize,
    pub ftilde11: Mat<T>,
    pub htilde: Vec<Mat<T>>,
    pub det_h14: T,
    pub det_f22: T,
    pub cond_f22: T,
    pub basis: MonomialBasis,
    pub condensed: CondensedMatrix<T>,
}

/// Schur complement `F11 - F12 F22⁻¹ F21`, by LU solve rather than inversion.
pub fn kron_reduce<T: Scalar>(sys: &CarlemanDaeSystem<T>) -> Result<ReducedOde<T>> {
    let lu = Lu::new(&sys.f22)?;
    let cond = lu.cond_1();
    let regularity = || Error::Regularity {
        det_h14: sys.det_h14.to_f64_lossy(),
        cond: cond.to_f64_lossy(),
    };
    if lu.is_singular() || !(cond.to_f64_lossy() <= REGULARITY_COND_LIMIT) {
        return Err(regularity());
    }
    let y = lu.solve_mat(&sys.f21).map_err(|_| regularity())?;
    let ftilde11 = sys.f11.try_sub(&sys.f12.matmul(&y)?)?;
    if !ftilde11.is_finite() {
        return Err(Error::NonFinite("reduced matrix".into()));
    }
    let mut htilde = Vec::with_capacity(sys.order);
    for f in 0..sys.order {
        let off = sys.x_basis.family_offset(f);
        let len = sys.x_basis.family_len(f);
        htilde.push(-&y.submatrix(0, off, sys.m, len));
    }
    let condensed = condense(&ftilde11, &sys.x_basis, &sys.x_basis)?;
    Ok(ReducedOde {
        order: sys.order,
        n: sys.n,
        m: sys.m,
        ftilde11,
        htilde,
        det_h14: sys.det_h14,
        det_f22: lu.det(),
        cond_f22: cond,
        basis: sys.x_basis.clone(),
        condensed,
    })
}

/// One power identity for a diagonal block of `F22`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetIdentity<T> {
    pub block: String,
    pub formula: String,
    /// Determinant of the block as assembled.
    pub direct: T,
    /// The closed-form power, without the permutation sign.
    pub power_form: T,
    /// Determinant of the axis permutation folded into the block.
    pub parity: i8,
    pub rel_err_signed: T,
    pub rel_err_magnitude: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetReport<T> {
    pub order: usize,
    pub det_h14: T,
    pub det_f22: T,
    /// `|det(F22)|` bound from row norms, for judging "numerically zero".
    pub hadamard_scale: T,
    /// Product of the diagonal-block determinants.
    pub block_product: T,
    /// `det(H_1_4)` times the power forms with permutation signs.
    pub signed_power_product: T,
    /// `det(H_1_4)` times the power forms as unsigned closed forms.
    pub power_product: T,
    pub rel_err_blocks: T,
    pub rel_err_signed: T,
    pub rel_err_magnitude: T,
    pub identities: Vec<DetIdentity<T>>,
}

pub fn rel_err<T: Scalar>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs());
    if scale.is_zero() {
        T::zero()
    } else {
        (a - b).abs() / scale
    }
}

/// Compares `det(F22)` with the product over its diagonal blocks and with the
/// closed-form powers of `det(H_1_4)` for each block.
pub fn det_product_check<T: Scalar>(sys: &CarlemanDaeSystem<T>) -> Result<DetReport<T>> {
    let (n, m) = (sys.n, sys.m);
    let det_f22 = Lu::new(&sys.f22)?.det();
    let hf = h_row_families(sys.order);
    let zf = z_families(sys.order);

    // Row family r pairs with column family r + 3 on the block diagonal.
    let mut row_off = 0;
    let mut diag: BTreeMap<usize, T> = BTreeMap::new();
    for &r in &hf {
        let rows = h_row_len(r, n, m);
        let zi = zf.iter().position(|&j| j == r + 3).expect("paired family");
        let c0 = sys.z_basis.family_offset(zi);
        let cols = sys.z_basis.family_len(zi);
        if rows != cols {
            return Err(Error::shape("diagonal block is not square"));
        }
        diag.insert(r, Lu::new(&sys.f22.submatrix(row_off, c0, rows, cols))?.det());
        row_off += rows;
    }
    let d14 = diag[&1];
    let block_product = diag.values().fold(T::one(), |a, &d| a * d);

    let pw = |e: usize| d14.powi(e as i32);
    let mut identities = Vec::new();
    let specs: [(usize, &str, &str, &[VarKind]); 5] = [
        (2, "H_2_5", "det(H_1_4)^N", &[Z, X]),
        (3, "H_3_6", "det(H_1_4)^(2M)", &[]),
        (4, "H_4_7", "det(H_1_4)^(N^2)", &[Z, X, X]),
        (5, "H_5_8", "det(H_1_4)^(2MN)", &[Z, Z, X]),
        (6, "H_6_9", "det(H_3_6)^M * det(H_1_4)^(M^2)", &[]),
    ];
    for (r, block, formula, arranged) in specs {
        let Some(&direct) = diag.get(&r) else { continue };
        let power_form = match r {
            2 => pw(n),
            3 => pw(2 * m),
            4 => pw(n * n),
            5 => pw(2 * m * n),
            _ => diag[&3].powi(m as i32) * pw(m * m),
        };
        let parity = if arranged.is_empty() {
            1
        } else {
            canonical_parity(arranged, n, m)?
        };
        let signed = if parity < 0 { -power_form } else { power_form };
        identities.push(DetIdentity {
            block: block.into(),
            formula: formula.into(),
            direct,
            power_form,
            parity,
            rel_err_signed: rel_err(direct, signed),
            rel_err_magnitude: rel_err(direct.abs(), power_form.abs()),
        });
    }
    let power_product = identities.iter().fold(d14, |a, i| a * i.power_form);
    let signed_power_product = identities.iter().fold(d14, |a, i| {
        if i.parity < 0 {
            -(a * i.power_form)
        } else {
            a * i.power_form
        }
    });
    Ok(DetReport {
        order: sys.order,
        det_h14: sys.det_h14,
        det_f22,
        hadamard_scale: crate::linalg::hadamard_bound(&sys.f22),
        block_product,
        signed_power_product,
        power_product,
        rel_err_blocks: rel_err(det_f22, block_product),
        rel_err_signed: rel_err(det_f22, signed_power_product),
        rel_err_magnitude: rel_err(det_f22.abs(), power_product.abs()),
        identities,
    })
}

/// `‖a - b‖_F / ‖b‖_F × 100`.
pub fn percent_error<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Result<T> {
    let d = a.try_sub(b)?.frobenius_norm();
    let nb = b.frobenius_norm();
    if nb.is_zero() {
        return Ok(if d.is_zero() { T::zero() } else { T::infinity() });
    }
    Ok(d / nb * T::lit(100.0))
}

/// Percent Frobenius error between condensed `F̃11` and condensed `A_nord`.
pub fn validate_against_ode<T: Scalar>(
    reduced: &ReducedOde<T>,
    reference: &CarlemanOdeSystem<T>,
) -> Result<T> {
    let r = condense(&reference.a_nord, &reference.basis, &reference.basis)?;
    let c = &reduced.condensed;
    if r.row_keys != c.row_keys || r.col_keys != c.col_keys {
        return Err(Error::BasisMismatch(format!(
            "reduced system has {} condensed coordinates, reference has {}",
            c.col_keys.len(),
            r.col_keys.len()
        )));
    }
    percent_error(&c.matrix, &r.matrix)
}
