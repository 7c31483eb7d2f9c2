//! Dense real eigenvalues, modal frequency/damping, eigenvalue combinations,
//! and multiset matching.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;

/// QR sweeps allowed per eigenvalue before giving up.
pub const QR_MAX_ITERS: usize = 100;

const RADIX: f64 = 2.0;

/// In-place diagonal similarity scaling so row and column norms are comparable.
fn balance<T: Scalar>(a: &mut [Vec<T>]) {
    let n = a.len();
    let radix = T::lit(RADIX);
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c.is_zero() || r.is_zero() {
                continue;
            }
            let s = c + r;
            let mut f = T::one();
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < T::lit(0.95) * s {
                done = false;
                let gi = T::one() / f;
                for j in 0..n {
                    a[i][j] *= gi;
                }
                for row in a.iter_mut() {
                    row[i] *= f;
                }
            }
        }
    }
}

/// Reduction to upper Hessenberg form by stabilized elimination.
fn hessenberg<T: Scalar>(a: &mut [Vec<T>]) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        let mut x = T::zero();
        let mut piv = m;
        for j in m..n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                piv = j;
            }
        }
        if piv != m {
            a.swap(piv, m);
            for row in a.iter_mut() {
                row.swap(piv, m);
            }
        }
        if x.is_zero() {
            continue;
        }
        for i in m + 1..n {
            let mut y = a[i][m - 1];
            if y.is_zero() {
                continue;
            }
            y /= x;
            a[i][m - 1] = T::zero();
            for j in m..n {
                let t = a[m][j];
                a[i][j] -= y * t;
            }
            for row in a.iter_mut() {
                let t = row[i];
                row[m] += y * t;
            }
        }
    }
}

fn sign<T: Scalar>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (1-based storage).
fn hqr<T: Scalar>(a: &mut [Vec<T>], n: usize) -> Result<Vec<Complex<T>>> {
    let zero = T::zero();
    let mut wr = vec![zero; n + 1];
    let mut wi = vec![zero; n + 1];
    let mut anorm = zero;
    for i in 1..=n {
        for j in (i.saturating_sub(1)).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = zero;
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s.is_zero() {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = zero;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = zero;
                nn -= 1;
                break;
            }
            let mut y = a[nn - 1][nn - 1];
            let mut w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                let p = T::lit(0.5) * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= zero {
                    z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if !z.is_zero() {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = zero;
                    wi[nn] = zero;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn -= 2;
                break;
            }
            if its == QR_MAX_ITERS {
                return Err(Error::QrNoConvergence { index: nn - 1 });
            }
            if its > 0 && its % 10 == 0 {
                // Exceptional shift.
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            its += 1;
            let (mut p, mut q, mut r, mut z);
            let mut m = nn - 2;
            loop {
                z = a[m][m];
                r = x - z;
                let s0 = y - z;
                p = (r * s0 - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r - s0;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[i][i - 2] = zero;
                if i != m + 2 {
                    a[i][i - 3] = zero;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = zero;
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if !x.is_zero() {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if !s.is_zero() {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        p = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            p += r * a[k + 2][j];
                            a[k + 2][j] -= p * z;
                        }
                        a[k + 1][j] -= p * y;
                        a[k][j] -= p * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        p = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            p += z * a[i][k + 2];
                            a[i][k + 2] -= p * r;
                        }
                        a[i][k + 1] -= p * q;
                        a[i][k] -= p;
                    }
                }
                k += 1;
            }
            if l + 1 >= nn {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex::new(wr[i], wi[i])).collect())
}

/// All eigenvalues of a real square matrix, sorted by real part then
/// imaginary part.
pub fn eigenvalues<T: Scalar>(a: &Mat<T>) -> Result<Vec<Complex<T>>> {
    if !a.is_square() {
        return Err(Error::shape(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("eigenvalue input".into()));
    }
    let n = a.rows();
    let mut rows: Vec<Vec<T>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    balance(&mut rows);
    hessenberg(&mut rows);
    let mut one_based = vec![vec![T::zero(); n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            if j + 1 >= i {
                one_based[i + 1][j + 1] = rows[i][j];
            }
        }
    }
    let mut eig = hqr(&mut one_based, n)?;
    sort_spectrum(&mut eig);
    Ok(eig)
}

pub fn sort_spectrum<T: Scalar>(v: &mut [Complex<T>]) {
    v.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Largest distance from an eigenvalue to the nearest conjugate of another
/// eigenvalue; zero for a spectrum closed under conjugation.
pub fn conjugate_pairing_error<T: Scalar>(eigs: &[Complex<T>]) -> T {
    let conj: Vec<Complex<T>> = eigs.iter().map(|e| e.conj()).collect();
    match match_spectra(eigs, &conj, T::infinity()) {
        Ok(r) => r.max_distance,
        Err(_) => T::infinity(),
    }
}

/// `|Σλ - trace(A)|`.
pub fn trace_error<T: Scalar>(a: &Mat<T>, eigs: &[Complex<T>]) -> T {
    let s: Complex<T> = eigs.iter().copied().fold(Complex::new(T::zero(), T::zero()), |a, b| a + b);
    (s - Complex::new(a.trace(), T::zero())).norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode<T> {
    pub eigenvalue: Complex<T>,
    /// `|Im λ| / 2π`; `None` for a real eigenvalue.
    pub frequency_hz: Option<T>,
    /// `-Re λ / |λ|` as a fraction (1.0 is 100%); zero for `λ = 0`.
    pub damping: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport<T> {
    pub source: String,
    pub modes: Vec<Mode<T>>,
}

impl<T: Scalar> SpectrumReport<T> {
    pub fn eigenvalues(&self) -> Vec<Complex<T>> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }
}

/// Frequency and damping of each eigenvalue.
pub fn mode_report<T: Scalar>(eigs: &[Complex<T>], source: impl Into<String>) -> SpectrumReport<T> {
    let modes = eigs
        .iter()
        .map(|&l| {
            let mag = l.norm();
            Mode {
                eigenvalue: l,
                frequency_hz: if l.im.is_zero() {
                    None
                } else {
                    Some(l.im.abs() / (T::lit(2.0) * T::lit(std::f64::consts::PI)))
                },
                damping: if mag.is_zero() { T::zero() } else { -l.re / mag },
            }
        })
        .collect();
    SpectrumReport {
        source: source.into(),
        modes,
    }
}

/// All sums of `k` base eigenvalues with repetition (`i ≤ j ≤ ..`), for
/// `k = 1..=order`.
pub fn combination_spectrum<T: Scalar>(base: &[Complex<T>], order: usize) -> Vec<Complex<T>> {
    fn rec<T: Scalar>(
        base: &[Complex<T>],
        start: usize,
        left: usize,
        acc: Complex<T>,
        out: &mut Vec<Complex<T>>,
    ) {
        if left == 0 {
            out.push(acc);
            return;
        }
        for i in start..base.len() {
            rec(base, i, left - 1, acc + base[i], out);
        }
    }
    let mut out = Vec::new();
    for k in 1..=order {
        rec(base, 0, k, Complex::new(T::zero(), T::zero()), &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport<T> {
    /// `(index in a, index in b, distance)` for every matched pair.
    pub pairs: Vec<(usize, usize, T)>,
    pub max_distance: T,
    pub tol: T,
    pub passed: bool,
}

/// Minimum-total-distance perfect assignment between two multisets of
/// complex numbers (Hungarian method).
pub fn match_spectra<T: Scalar>(
    a: &[Complex<T>],
    b: &[Complex<T>],
    tol: T,
) -> Result<MatchReport<T>> {
    if a.len() != b.len() {
        return Err(Error::Cardinality {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    let cost = |i: usize, j: usize| (a[i - 1] - b[j - 1]).norm();
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if j1 == 0 {
                return Err(Error::NonFinite("spectrum matching cost".into()));
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize, T)> = (1..=n)
        .map(|j| (p[j] - 1, j - 1, cost(p[j], j)))
        .collect();
    pairs.sort_by_key(|t| t.0);
    let max_distance = pairs.iter().fold(T::zero(), |m, t| m.max(t.2));
    Ok(MatchReport {
        pairs,
        max_distance,
        tol,
        passed: max_distance <= tol,
    })
}
