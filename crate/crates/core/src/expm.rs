//! Matrix exponential by scaling and squaring with a degree-13 Padé approximant.

use crate::error::{Error, Result};
use crate::linalg::Lu;
use crate::matrix::Mat;
use crate::scalar::Scalar;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

pub fn expm<T: Scalar>(a: &Mat<T>) -> Result<Mat<T>> {
    if !a.is_square() {
        return Err(Error::shape(format!(
            "exponential of non-square {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix exponential argument".into()));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let norm = a.norm_1().to_f64_lossy();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.scale(T::lit(2f64.powi(-s)));
    let b = |k: usize| T::lit(PADE13[k]);

    let id = Mat::identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &(&a6.scale(b(13)) + &a4.scale(b(11))) + &a2.scale(b(9));
    let u_tail = &(&(&a6.scale(b(7)) + &a4.scale(b(5))) + &a2.scale(b(3))) + &id.scale(b(1));
    let u = &a * &(&(&a6 * &u_inner) + &u_tail);

    let v_inner = &(&a6.scale(b(12)) + &a4.scale(b(10))) + &a2.scale(b(8));
    let v_tail = &(&(&a6.scale(b(6)) + &a4.scale(b(4))) + &a2.scale(b(2))) + &id.scale(b(0));
    let v = &(&a6 * &v_inner) + &v_tail;

    let p = &v + &u;
    let q = &v - &u;
    let mut r = Lu::new(&q)?.solve_mat(&p)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if !r.is_finite() {
        return Err(Error::NonFinite("matrix exponential".into()));
    }
    Ok(r)
}
