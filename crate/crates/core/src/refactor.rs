//! Re-factorization `B2(z) B1(z) = B1~(z) B2~(z)` of a product of two
//! elementary divisors with the order of the poles exchanged.
//!
//! Only the general branch is handled, where each zero stays attached to its
//! pole (`zeta_i~ = zeta_i`). The new column vector of the first pole is
//! `B2(z1) p1`, the new row vector of the second pole is `q2† B1(z2)`, and the
//! remaining halves of the residues follow from the one-sided reconstruction
//! formulas.

use crate::divisor::{checked_pairing, near, ElementaryDivisor};
use crate::error::{LaxError, Result};
use crate::lax::RationalMatrixFunction;
use crate::matcore::{colinearity_residual, Projective, C64};

/// Coincidence threshold for divisor points, relative to `1 + |point|`.
pub const GENERIC_TOL: f64 = 1e-10;

/// Rejects coincident points among named divisor data.
pub fn check_generic(points: &[(&str, C64)]) -> Result<()> {
    for (i, (na, a)) in points.iter().enumerate() {
        if !(a.re.is_finite() && a.im.is_finite()) {
            return Err(LaxError::NonGenericDivisor {
                what: format!("{na} is not finite"),
            });
        }
        for (nb, b) in &points[i + 1..] {
            if near(*a, *b, GENERIC_TOL) {
                return Err(LaxError::NonGenericDivisor {
                    what: format!("{na} = {nb}"),
                });
            }
        }
    }
    Ok(())
}

/// Re-factorizes `left(z) * right(z)` as `new_left(z) * new_right(z)` where
/// `new_left` carries the pole and zero of `right` and `new_right` those of
/// `left`. In the usual labels `flip(B2, B1) = (B1~, B2~)`.
pub fn flip(
    left: &ElementaryDivisor,
    right: &ElementaryDivisor,
) -> Result<(ElementaryDivisor, ElementaryDivisor)> {
    if !left.shares_gauge(right, 1e-12) {
        return Err(LaxError::GaugeMismatch);
    }
    let (z2, zeta2) = (left.pole(), left.zeta());
    let (z1, zeta1) = (right.pole(), right.zeta());
    check_generic(&[("z1", z1), ("z2", z2), ("zeta1", zeta1), ("zeta2", zeta2)])?;

    let a = right.a();
    let a_inv = right.a_inv();
    let p1 = right.p();
    let q2 = left.q();

    checked_pairing(q2, p1, "q2† p1")?;
    // residue relations at z1 and z2
    let pt1 = &left.eval(z1)? * p1;
    let qt2 = q2 * &right.eval(z2)?;

    let ainv_pt1 = a_inv * &pt1;
    let ainv2_pt1 = a_inv * &ainv_pt1;
    let ainv_p1 = a_inv * p1;
    let q2_ainv = q2 * a_inv;
    let qt2_ainv = &qt2 * a_inv;
    let qt2_ainv2 = &qt2_ainv * a_inv;

    let s_11 = checked_pairing(&q2_ainv, &pt1, "q2† A^-1 p1~")?;
    let s_22 = checked_pairing(&qt2_ainv, p1, "q2~† A^-1 p1")?;
    let s_12 = checked_pairing(&qt2_ainv, &ainv_pt1, "q2~† A^-2 p1~")?;

    let qt1_inner =
        &q2_ainv.scaled((z1 - zeta2) / s_11) + &qt2_ainv2.scaled((zeta2 - zeta1) / s_12);
    let qt1 = &qt1_inner * a;
    let pt2_inner =
        &ainv_p1.scaled((z2 - zeta1) / s_22) + &ainv2_pt1.scaled((zeta1 - zeta2) / s_12);
    let pt2 = a * &pt2_inner;

    let new_left = ElementaryDivisor::with_inverse(a.clone(), a_inv.clone(), z1, pt1, qt1)?;
    let new_right = ElementaryDivisor::with_inverse(a.clone(), a_inv.clone(), z2, pt2, qt2)?;
    Ok((new_left, new_right))
}

/// One isospectral step `L = B1 B2 -> B2 B1`, re-factorized in pole order.
pub fn reverse_product(l: &RationalMatrixFunction) -> Result<RationalMatrixFunction> {
    let (first, second) = flip(&l.second, &l.first)?;
    Ok(RationalMatrixFunction { first, second })
}

/// Flips `left * right` and flips the result back, returning the largest
/// deviation from the inputs: colinearity of all four residue vectors and the
/// relative change of both residues.
pub fn involution_check(left: &ElementaryDivisor, right: &ElementaryDivisor) -> Result<f64> {
    let (new_left, new_right) = flip(left, right)?;
    let (back_left, back_right) = flip(&new_left, &new_right)?;
    let residuals = [
        colinearity_residual(back_left.p(), left.p())?,
        colinearity_residual(back_left.q(), left.q())?,
        colinearity_residual(back_right.p(), right.p())?,
        colinearity_residual(back_right.q(), right.q())?,
        back_left.g().rel_diff(&left.g()),
        back_right.g().rel_diff(&right.g()),
    ];
    Ok(residuals.into_iter().fold(0.0, f64::max))
}
