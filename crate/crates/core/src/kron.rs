//! Kronecker products, axis permutations, the Carleman block recursion and
//! condensation of symmetric monomial coordinates.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;

/// Default ceiling on the number of entries a Kronecker result may hold.
pub const DEFAULT_SIZE_CAP: usize = 100_000_000;

pub fn kron_product<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>> {
    kron_product_capped(a, b, DEFAULT_SIZE_CAP)
}

pub fn kron_product_capped<T: Scalar>(a: &Mat<T>, b: &Mat<T>, cap: usize) -> Result<Mat<T>> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let rows = ra.checked_mul(rb);
    let cols = ca.checked_mul(cb);
    let total = rows.zip(cols).and_then(|(r, c)| r.checked_mul(c));
    let (rows, cols) = match total {
        Some(t) if t <= cap => (rows.unwrap(), cols.unwrap()),
        _ => {
            return Err(Error::SizeCap {
                requested: total.unwrap_or(usize::MAX),
                cap,
            })
        }
    };
    let mut out = Mat::zeros(rows, cols);
    for i in 0..ra {
        for j in 0..ca {
            let s = a[(i, j)];
            if s.is_zero() {
                continue;
            }
            for k in 0..rb {
                let dst = &mut out.row_mut(i * rb + k)[j * cb..(j + 1) * cb];
                for (d, &v) in dst.iter_mut().zip(b.row(k)) {
                    *d = s * v;
                }
            }
        }
    }
    Ok(out)
}

/// `I_n ⊗ a`
pub fn eye_kron<T: Scalar>(n: usize, a: &Mat<T>) -> Result<Mat<T>> {
    kron_product(&Mat::identity(n), a)
}

/// `a ⊗ I_n`
pub fn kron_eye<T: Scalar>(a: &Mat<T>, n: usize) -> Result<Mat<T>> {
    kron_product(a, &Mat::identity(n))
}

/// `v ⊗ v ⊗ ... ⊗ v` (`n` factors), leftmost factor varying slowest.
pub fn kron_power_vec<T: Scalar>(v: &[T], n: usize) -> Result<Vec<T>> {
    kron_power_vec_capped(v, n, DEFAULT_SIZE_CAP)
}

pub fn kron_power_vec_capped<T: Scalar>(v: &[T], n: usize, cap: usize) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::shape("Kronecker power order must be at least 1"));
    }
    let len = u32::try_from(n)
        .ok()
        .and_then(|e| v.len().checked_pow(e))
        .filter(|&l| l <= cap)
        .ok_or(Error::SizeCap {
            requested: usize::MAX,
            cap,
        })?;
    let mut out = v.to_vec();
    for _ in 1..n {
        out = kron_vec(&out, v);
    }
    debug_assert_eq!(out.len(), len);
    Ok(out)
}

pub fn kron_vec<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// Permutation of the factors of a Kronecker product.
///
/// For factors `v_0, ..., v_{k-1}` with `dims[i] = len(v_i)`, applying the
/// permutation yields `v_{perm[0]} ⊗ ... ⊗ v_{perm[k-1]}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisPermutation {
    dims: Vec<usize>,
    perm: Vec<usize>,
    /// `out[o] = input[map[o]]`
    map: Vec<usize>,
}

impl AxisPermutation {
    pub fn new(dims: &[usize], perm: &[usize]) -> Result<Self> {
        if dims.len() != perm.len() {
            return Err(Error::InvalidPermutation(format!(
                "{} axes but permutation of length {}",
                dims.len(),
                perm.len()
            )));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::InvalidPermutation(format!("{perm:?}")));
            }
            seen[p] = true;
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&t| t <= DEFAULT_SIZE_CAP)
            .ok_or(Error::SizeCap {
                requested: usize::MAX,
                cap: DEFAULT_SIZE_CAP,
            })?;

        let k = dims.len();
        let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
        // Row-major strides of the input layout.
        let mut in_stride = vec![1usize; k];
        for a in (0..k.saturating_sub(1)).rev() {
            in_stride[a] = in_stride[a + 1] * dims[a + 1];
        }
        let mut map = Vec::with_capacity(total);
        let mut idx = vec![0usize; k];
        for _ in 0..total {
            map.push(
                idx.iter()
                    .enumerate()
                    .map(|(o, &i)| i * in_stride[perm[o]])
                    .sum(),
            );
            for a in (0..k).rev() {
                idx[a] += 1;
                if idx[a] < out_dims[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            perm: perm.to_vec(),
            map,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn index_map(&self) -> &[usize] {
        &self.map
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply<T: Scalar>(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.map.len() {
            return Err(Error::shape(format!(
                "permutation of size {} applied to vector of length {}",
                self.map.len(),
                v.len()
            )));
        }
        Ok(self.map.iter().map(|&i| v[i]).collect())
    }

    pub fn to_matrix<T: Scalar>(&self) -> Mat<T> {
        let n = self.map.len();
        let mut p = Mat::zeros(n, n);
        for (o, &i) in self.map.iter().enumerate() {
            p[(o, i)] = T::one();
        }
        p
    }

    /// `c · P`, computed by moving columns instead of multiplying.
    pub fn right_multiply<T: Scalar>(&self, c: &Mat<T>) -> Result<Mat<T>> {
        if c.cols() != self.map.len() {
            return Err(Error::shape(format!(
                "{}x{} matrix times permutation of size {}",
                c.rows(),
                c.cols(),
                self.map.len()
            )));
        }
        let mut out = Mat::zeros(c.rows(), c.cols());
        for r in 0..c.rows() {
            let src = c.row(r);
            let dst = out.row_mut(r);
            for (o, &i) in self.map.iter().enumerate() {
                dst[i] = src[o];
            }
        }
        Ok(out)
    }

    /// Determinant of the permutation matrix: +1 or -1.
    pub fn parity(&self) -> i8 {
        let mut visited = vec![false; self.map.len()];
        let mut sign = 1i8;
        for start in 0..self.map.len() {
            if visited[start] {
                continue;
            }
            let mut len = 0usize;
            let mut j = start;
            while !visited[j] {
                visited[j] = true;
                j = self.map[j];
                len += 1;
            }
            if len.is_multiple_of(2) {
                sign = -sign;
            }
        }
        sign
    }
}

pub fn axis_permutation<T: Scalar>(dims: &[usize], perm: &[usize]) -> Result<Mat<T>> {
    Ok(AxisPermutation::new(dims, perm)?.to_matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    State,
    Algebraic,
}

impl VarKind {
    pub fn dim(self, n: usize, m: usize) -> usize {
        match self {
            VarKind::State => n,
            VarKind::Algebraic => m,
        }
    }

    pub fn prefix(self) -> char {
        match self {
            VarKind::State => 'x',
            VarKind::Algebraic => 'z',
        }
    }
}

/// Sorts factor kinds into canonical order (states before algebraics, stable)
/// and returns the permutation taking canonical factors to `arranged`.
pub fn canonical_arrangement(arranged: &[VarKind]) -> (Vec<VarKind>, Vec<usize>) {
    let mut canonical = arranged.to_vec();
    canonical.sort();
    let mut used = vec![false; canonical.len()];
    let perm = arranged
        .iter()
        .map(|k| {
            let p = (0..canonical.len())
                .find(|&c| !used[c] && canonical[c] == *k)
                .expect("same multiset");
            used[p] = true;
            p
        })
        .collect();
    (canonical, perm)
}

/// Rewrites `c`, whose columns act on the Kronecker product of factors in the
/// order `arranged`, so that it acts on the canonical ordering instead.
pub fn to_canonical_columns<T: Scalar>(
    c: &Mat<T>,
    arranged: &[VarKind],
    n: usize,
    m: usize,
) -> Result<Mat<T>> {
    let (canonical, perm) = canonical_arrangement(arranged);
    let dims: Vec<usize> = canonical.iter().map(|k| k.dim(n, m)).collect();
    AxisPermutation::new(&dims, &perm)?.right_multiply(c)
}

/// Parity of the permutation used by [`to_canonical_columns`].
pub fn canonical_parity(arranged: &[VarKind], n: usize, m: usize) -> Result<i8> {
    let (canonical, perm) = canonical_arrangement(arranged);
    let dims: Vec<usize> = canonical.iter().map(|k| k.dim(n, m)).collect();
    Ok(AxisPermutation::new(&dims, &perm)?.parity())
}

/// A single coordinate of a Kronecker monomial: kind and zero-based index.
pub type Factor = (VarKind, usize);

/// Coordinates of one or more stacked Kronecker families, e.g.
/// `[Δx, Δx⊗Δx]` or `[Δz, Δx⊗Δz, Δz⊗Δz]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    n: usize,
    m: usize,
    families: Vec<Vec<VarKind>>,
    entries: Vec<Vec<Factor>>,
}

impl MonomialBasis {
    pub fn family(kinds: &[VarKind], n: usize, m: usize) -> Self {
        Self::stacked(&[kinds.to_vec()], n, m)
    }

    pub fn stacked(families: &[Vec<VarKind>], n: usize, m: usize) -> Self {
        let mut entries = Vec::new();
        for kinds in families {
            let dims: Vec<usize> = kinds.iter().map(|k| k.dim(n, m)).collect();
            let total: usize = dims.iter().product();
            let mut idx = vec![0usize; kinds.len()];
            for _ in 0..total {
                entries.push(kinds.iter().copied().zip(idx.iter().copied()).collect());
                for a in (0..kinds.len()).rev() {
                    idx[a] += 1;
                    if idx[a] < dims[a] {
                        break;
                    }
                    idx[a] = 0;
                }
            }
        }
        Self {
            n,
            m,
            families: families.to_vec(),
            entries,
        }
    }

    /// `[Δx, Δx^[2], ..., Δx^[order]]`
    pub fn state_powers(n: usize, order: usize) -> Self {
        let families: Vec<Vec<VarKind>> =
            (1..=order).map(|k| vec![VarKind::State; k]).collect();
        Self::stacked(&families, n, 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn families(&self) -> &[Vec<VarKind>] {
        &self.families
    }

    pub fn entries(&self) -> &[Vec<Factor>] {
        &self.entries
    }

    pub fn family_len(&self, f: usize) -> usize {
        self.families[f]
            .iter()
            .map(|k| k.dim(self.n, self.m))
            .product()
    }

    /// Offset of family `f` within the stacked basis.
    pub fn family_offset(&self, f: usize) -> usize {
        (0..f).map(|g| self.family_len(g)).sum()
    }

    pub fn label(&self, i: usize) -> String {
        monomial_label(&self.entries[i])
    }

    pub fn canonical_key(&self, i: usize) -> Vec<Factor> {
        let mut k = self.entries[i].clone();
        k.sort();
        k
    }
}

pub fn monomial_label(factors: &[Factor]) -> String {
    factors
        .iter()
        .map(|(k, i)| format!("{}{}", k.prefix(), i + 1))
        .collect::<Vec<_>>()
        .join("*")
}

/// Matrix on canonical multiset coordinates, with redundant monomials merged.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedMatrix<T> {
    pub matrix: Mat<T>,
    pub row_keys: Vec<Vec<Factor>>,
    pub col_keys: Vec<Vec<Factor>>,
}

impl<T: Scalar> CondensedMatrix<T> {
    pub fn row_labels(&self) -> Vec<String> {
        self.row_keys.iter().map(|k| monomial_label(k)).collect()
    }

    pub fn col_labels(&self) -> Vec<String> {
        self.col_keys.iter().map(|k| monomial_label(k)).collect()
    }
}

impl<T: Scalar> fmt::Display for CondensedMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>10}", "")?;
        for l in self.col_labels() {
            write!(f, " {l:>12}")?;
        }
        writeln!(f)?;
        for (i, l) in self.row_labels().iter().enumerate() {
            write!(f, "{l:>10}")?;
            for v in self.matrix.row(i) {
                write!(f, " {v:>12.6}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Absolute tolerance for redundant-row agreement.
pub const CONDENSE_TOL: f64 = 1e-9;

fn group_keys(basis: &MonomialBasis) -> (Vec<Vec<Factor>>, Vec<usize>) {
    let mut keys: Vec<Vec<Factor>> = Vec::new();
    let mut slot: BTreeMap<Vec<Factor>, usize> = BTreeMap::new();
    let mut assign = Vec::with_capacity(basis.len());
    for i in 0..basis.len() {
        let k = basis.canonical_key(i);
        let s = *slot.entry(k.clone()).or_insert_with(|| {
            keys.push(k);
            keys.len() - 1
        });
        assign.push(s);
    }
    (keys, assign)
}

/// Sums columns sharing a canonical multiset and keeps the first of each set
/// of redundant rows, after checking the others agree with it.
pub fn condense<T: Scalar>(
    mx: &Mat<T>,
    row_basis: &MonomialBasis,
    col_basis: &MonomialBasis,
) -> Result<CondensedMatrix<T>> {
    if mx.rows() != row_basis.len() || mx.cols() != col_basis.len() {
        return Err(Error::BasisMismatch(format!(
            "{}x{} matrix with {} row and {} column coordinates",
            mx.rows(),
            mx.cols(),
            row_basis.len(),
            col_basis.len()
        )));
    }
    let (col_keys, col_slot) = group_keys(col_basis);
    let (row_keys, row_slot) = group_keys(row_basis);

    let mut summed: Mat<T> = Mat::zeros(mx.rows(), col_keys.len());
    for r in 0..mx.rows() {
        for (c, &s) in col_slot.iter().enumerate() {
            summed[(r, s)] += mx[(r, c)];
        }
    }
    // Floors the absolute tolerance at what the scalar type can resolve.
    let scale = summed.max_abs().max(T::one()).to_f64_lossy();
    let tol = T::resolvable(CONDENSE_TOL, 1e3 * scale);

    let mut first: Vec<Option<usize>> = vec![None; row_keys.len()];
    let mut out = Mat::zeros(row_keys.len(), col_keys.len());
    for r in 0..mx.rows() {
        let s = row_slot[r];
        match first[s] {
            None => {
                first[s] = Some(r);
                out.row_mut(s).copy_from_slice(summed.row(r));
            }
            Some(f) => {
                let diff = summed
                    .row(r)
                    .iter()
                    .zip(summed.row(f))
                    .fold(T::zero(), |d, (a, b)| d.max((*a - *b).abs()));
                if diff > tol {
                    return Err(Error::Condense {
                        first: f,
                        other: r,
                        diff: diff.to_f64_lossy(),
                    });
                }
            }
        }
    }
    Ok(CondensedMatrix {
        matrix: out,
        row_keys,
        col_keys,
    })
}

/// Carleman block `A_{i,j}` (rows on `Δx^[i]`, columns on `Δx^[j]`) from the
/// first-row blocks `a1[k-1] = A_{1,k}`:
/// `A_{i,j} = A_{1,j-i+1} ⊗ I_{n^{i-1}} + I_n ⊗ A_{i-1,j-1}`.
pub fn carleman_block<T: Scalar>(a1: &[Mat<T>], i: usize, j: usize, n: usize) -> Result<Mat<T>> {
    if i == 0 || j < i {
        return Err(Error::shape(format!("no Carleman block ({i}, {j})")));
    }
    let base = j - i + 1;
    let a = a1
        .get(base - 1)
        .ok_or_else(|| Error::MissingBlock(format!("A_1_{base}")))?;
    let expect = (n, n.pow(base as u32));
    if a.shape() != expect {
        return Err(Error::shape(format!(
            "A_1_{base} is {}x{}, expected {}x{}",
            a.rows(),
            a.cols(),
            expect.0,
            expect.1
        )));
    }
    if i == 1 {
        return Ok(a.clone());
    }
    let left = kron_eye(a, n.pow(i as u32 - 1))?;
    let right = eye_kron(n, &carleman_block(a1, i - 1, j - 1, n)?)?;
    left.try_add(&right)
}
