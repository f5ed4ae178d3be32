//! Spectral coordinates `(q, p)` for rank-two functions with two poles and
//! diagonal `L0 = diag(rho1, rho2)`, conversions between the additive form
//! `L0 + L1/(z-z1) + L2/(z-z2)` and the product of elementary divisors, and
//! the dPV recursion.
//!
//! `q` is the zero of `L(z)_12` and `p = (q - z1)/(q - zeta2) L(q)_11`.
//! Each dPV step is checked against the matrix route
//! `(q, p) -> divisors -> iso_step -> residues -> (q~, p~)`.

use serde::{Deserialize, Serialize};

use crate::divisor::{near, ElementaryDivisor};
use crate::error::{LaxError, Result};
use crate::isomonodromic::{check_nonresonant, iso_step, k_sum, TypeTheta};
use crate::lax::RationalMatrixFunction;
use crate::matcore::{outer, rank_one_factor, CMatrix, ColVec, RowVec, C64};
use crate::sampling::{self, SampleRng};

/// Coincidence tolerance for forbidden points, relative to `1 + |value|`.
pub const GUARD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub q: C64,
    pub p: C64,
}

impl SpectralPoint {
    pub fn new(q: C64, p: C64) -> Self {
        Self { q, p }
    }

    /// `max(|dq|/(1+|q|), |dp|/(1+|p|))`.
    pub fn distance(&self, other: &SpectralPoint) -> f64 {
        let dq = (self.q - other.q).norm() / (1.0 + self.q.norm());
        let dp = (self.p - other.p).norm() / (1.0 + self.p.norm());
        dq.max(dp)
    }
}

/// `L(z) = L0 + L1/(z - z1) + L2/(z - z2)` with the zeros of the divisor
/// kept alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveRep {
    pub l0: CMatrix,
    pub l1: CMatrix,
    pub l2: CMatrix,
    pub z1: C64,
    pub z2: C64,
    pub zeta1: C64,
    pub zeta2: C64,
}

impl AdditiveRep {
    pub fn eval(&self, z: C64) -> Result<CMatrix> {
        for pole in [self.z1, self.z2] {
            if z == pole {
                return Err(LaxError::EvalAtPole {
                    pole: pole.to_string(),
                });
            }
        }
        Ok(&(&self.l0 + &self.l1.scaled((z - self.z1).inv()))
            + &self.l2.scaled((z - self.z2).inv()))
    }

    pub fn l_infinity(&self) -> CMatrix {
        &self.l1 + &self.l2
    }

    pub fn rho(&self) -> Result<[C64; 2]> {
        if self.l0.dim() != 2 || !self.l0.is_diagonal(1e-12 * self.l0.max_abs()) {
            return Err(LaxError::NonDiagonalL0);
        }
        Ok([self.l0[(0, 0)], self.l0[(1, 1)]])
    }

    /// `k_i = (L0^-1 L_inf)_ii`.
    pub fn k(&self) -> Result<[C64; 2]> {
        let [r1, r2] = self.rho()?;
        let l_inf = self.l_infinity();
        Ok([l_inf[(0, 0)] / r1, l_inf[(1, 1)] / r2])
    }

    /// Type data read off the representation; the integer-difference
    /// condition is not checked here.
    pub fn theta(&self) -> Result<TypeTheta> {
        let [r1, r2] = self.rho()?;
        let [k1, k2] = self.k()?;
        TypeTheta::new(
            self.z1,
            self.z2,
            self.zeta1,
            self.zeta2,
            vec![r1, r2],
            vec![k1, k2],
        )
    }
}

fn rank_two(theta: &TypeTheta) -> Result<([C64; 2], [C64; 2])> {
    if theta.rho.len() != 2 {
        return Err(LaxError::DimensionMismatch {
            expected: 2,
            actual: theta.rho.len(),
        });
    }
    Ok(([theta.rho[0], theta.rho[1]], [theta.k[0], theta.k[1]]))
}

fn guard(value: C64, forbidden: &[C64], what: &'static str) -> Result<()> {
    if forbidden.iter().any(|f| near(value, *f, GUARD_TOL)) {
        return Err(LaxError::DegenerateSpectralPoint { what });
    }
    Ok(())
}

fn col(a: C64, b: C64) -> ColVec {
    ColVec(vec![a, b])
}

fn row(a: C64, b: C64) -> RowVec {
    RowVec(vec![a, b])
}

/// Spectral coordinates of an additive representation.
pub fn to_spectral(rep: &AdditiveRep) -> Result<SpectralPoint> {
    rep.rho()?;
    let (a, b) = (rep.l1[(0, 1)], rep.l2[(0, 1)]);
    // (L1)_12 (q - z2) + (L2)_12 (q - z1) = 0
    let denom = a + b;
    if denom.norm() <= GUARD_TOL * (a.norm() + b.norm()) || denom == C64::new(0.0, 0.0) {
        return Err(LaxError::QAtInfinity);
    }
    let q = (a * rep.z2 + b * rep.z1) / denom;
    guard(q, &[rep.z1, rep.z2], "q at a pole")?;
    guard(q, &[rep.zeta1, rep.zeta2], "q at a zero")?;
    let p = (q - rep.z1) / (q - rep.zeta2) * rep.eval(q)?[(0, 0)];
    Ok(SpectralPoint { q, p })
}

/// Additive representation with type `theta` and spectral coordinates `s`,
/// in the gauge where the column vectors start with `1` and the row vectors
/// end with `1`, conjugated by `diag(q - z1, z2 - z1)`.
pub fn additive_from_spectral(theta: &TypeTheta, s: &SpectralPoint) -> Result<AdditiveRep> {
    let ([r1, r2], [k1, k2]) = rank_two(theta)?;
    let (z1, z2, e1, e2) = (theta.z1, theta.z2, theta.zeta1, theta.zeta2);
    let SpectralPoint { q, p } = *s;
    guard(z1, &[z2], "z1 = z2")?;
    guard(q, &[z1, z2, e1, e2], "q at a point of the divisor")?;
    guard(p, &[C64::new(0.0, 0.0)], "p = 0")?;

    let l1 = outer(
        &col(
            C64::new(1.0, 0.0),
            r2 * (q - z2 + k2) - r1 * r2 / p * (q - e1),
        ),
        &row(
            r1 * (q - z2 + k1) - p * (q - z2) * (q - e2) / (q - z1),
            C64::new(1.0, 0.0),
        ),
    )?
    .scaled((q - z1) / (z2 - z1));
    let l2 = outer(
        &col(
            C64::new(1.0, 0.0),
            r2 * (q - z1 + k2) - r1 * r2 * (q - z1) * (q - e1) / (p * (q - z2)),
        ),
        &row(r1 * (q - z1 + k1) - p * (q - e2), C64::new(1.0, 0.0)),
    )?
    .scaled((q - z2) / (z1 - z2));
    Ok(AdditiveRep {
        l0: CMatrix::from_diag(&[r1, r2]),
        l1,
        l2,
        z1,
        z2,
        zeta1: e1,
        zeta2: e2,
    })
}

/// `(G1 A, A G2)` from the additive representation.
pub fn add_to_mult(rep: &AdditiveRep) -> Result<(CMatrix, CMatrix)> {
    let l0_inv = rep.l0.inverse()?;
    let l12 = &rep.l1 * &rep.l2;
    let t = (&l0_inv * &l12).trace();
    if t.norm() <= GUARD_TOL * (1.0 + rep.l1.norm() * rep.l2.norm() * l0_inv.norm()) {
        return Err(LaxError::OrthogonalResidues);
    }
    let c1 = ((rep.z1 - rep.zeta1) - (&l0_inv * &rep.l1).trace()) / t;
    let c2 = ((rep.z2 - rep.zeta2) - (&l0_inv * &rep.l2).trace()) / t;
    Ok((&rep.l1 + &l12.scaled(c1), &rep.l2 + &l12.scaled(c2)))
}

/// `G1 G2` through both residue equations; the two must agree.
pub fn residue_product_pair(rep: &AdditiveRep) -> Result<(CMatrix, CMatrix)> {
    let l0_inv = rep.l0.inverse()?;
    let l12 = &rep.l1 * &rep.l2;
    let t = (&l0_inv * &l12).trace();
    if t.norm() == 0.0 {
        return Err(LaxError::OrthogonalResidues);
    }
    let via1 = (rep.z2 - rep.z1) * ((rep.z1 - rep.zeta1) - (&l0_inv * &rep.l1).trace()) / t;
    let via2 = (rep.z1 - rep.z2) * ((rep.z2 - rep.zeta2) - (&l0_inv * &rep.l2).trace()) / t;
    Ok((l12.scaled(via1), l12.scaled(via2)))
}

/// Residues of a product of divisors: `L1 = G1 B2(z1)`, `L2 = B1(z2) G2`.
pub fn mult_to_add(l: &RationalMatrixFunction) -> Result<AdditiveRep> {
    let [z1, z2] = l.poles();
    let [zeta1, zeta2] = l.zetas();
    Ok(AdditiveRep {
        l0: l.l0(),
        l1: l.residue_first()?,
        l2: l.residue_second()?,
        z1,
        z2,
        zeta1,
        zeta2,
    })
}

/// `(G1 A, A G2)` directly in spectral coordinates.
pub fn mult_from_spectral(theta: &TypeTheta, s: &SpectralPoint) -> Result<(CMatrix, CMatrix)> {
    let ([r1, r2], [k1, k2]) = rank_two(theta)?;
    let (z1, z2, e1, e2) = (theta.z1, theta.z2, theta.zeta1, theta.zeta2);
    let SpectralPoint { q, p } = *s;
    guard(p, &[r1], "p = rho1")?;
    guard(p, &[C64::new(0.0, 0.0)], "p = 0")?;
    guard(q, &[z1, z2, e1, e2], "q at a point of the divisor")?;
    let one = C64::new(1.0, 0.0);
    let g1a = outer(
        &col(one, r2 * (q - z2 + k2) - r1 * r2 * (q - e1) / p),
        &row(-r1 * (q - k1 - e2) + r1 * r1 * (q - z1) / p, one),
    )?
    .scaled(p / (p - r1));
    let ag2 = outer(
        &col(one, -r2 * (q - k2 - e1) + r2 * p / r1 * (q - z2)),
        &row(r1 * (q + k1 - z1) - p * (q - e2), one),
    )?
    .scaled(r1 / (r1 - p));
    Ok((g1a, ag2))
}

/// `(L0 + G1A/(z - z1)) L0^-1 (L0 + AG2/(z - z2))`.
pub fn product_form(
    l0: &CMatrix,
    g1a: &CMatrix,
    ag2: &CMatrix,
    z1: C64,
    z2: C64,
    z: C64,
) -> Result<CMatrix> {
    let left = l0 + &g1a.scaled((z - z1).inv());
    let right = l0 + &ag2.scaled((z - z2).inv());
    Ok(&(&left * &l0.inverse()?) * &right)
}

/// `A = diag(sqrt rho1, sqrt rho2)` on principal branches.
pub fn gauge_from_rho(rho: [C64; 2]) -> CMatrix {
    CMatrix::from_diag(&[rho[0].sqrt(), rho[1].sqrt()])
}

/// Elementary divisors with the given type and spectral coordinates, built on
/// the supplied square root `a` of `L0`.
pub fn divisors_with_gauge(
    theta: &TypeTheta,
    s: &SpectralPoint,
    a: &CMatrix,
) -> Result<RationalMatrixFunction> {
    let (g1a, ag2) = mult_from_spectral(theta, s)?;
    let a_inv = a.inverse()?;
    let (p1, q1) = rank_one_factor(&(&g1a * &a_inv))?;
    let (p2, q2) = rank_one_factor(&(&a_inv * &ag2))?;
    RationalMatrixFunction::new(
        ElementaryDivisor::new(a.clone(), theta.z1, p1, q1)?,
        ElementaryDivisor::new(a.clone(), theta.z2, p2, q2)?,
    )
}

pub fn divisors_from_spectral(
    theta: &TypeTheta,
    s: &SpectralPoint,
) -> Result<RationalMatrixFunction> {
    let (rho, _) = rank_two(theta)?;
    divisors_with_gauge(theta, s, &gauge_from_rho(rho))
}

/// Type after one step: only `z2` and `zeta2` move, by `-1`.
pub fn shifted_type(theta: &TypeTheta) -> TypeTheta {
    TypeTheta {
        z2: theta.z2 - 1.0,
        zeta2: theta.zeta2 - 1.0,
        ..theta.clone()
    }
}

/// One step of dPV in spectral coordinates.
pub fn dpv_step(theta: &TypeTheta, s: &SpectralPoint) -> Result<(TypeTheta, SpectralPoint)> {
    let ([r1, r2], [_, k2]) = rank_two(theta)?;
    let (z1, z2, e1) = (theta.z1, theta.z2, theta.zeta1);
    let SpectralPoint { q, p } = *s;
    for r in [r1, r2] {
        if near(p, r, GUARD_TOL) {
            return Err(LaxError::PoleInP { p: p.to_string() });
        }
    }
    guard(p, &[C64::new(0.0, 0.0)], "p = 0")?;
    let next = shifted_type(theta);
    let (zt2, et2) = (next.z2, next.zeta2);

    let qt = z2 + et2 - r1 * (k2 + e1 - z2) / (p - r1) + r2 * (k2 + et2 - z1) / (p - r2) - q;
    if near(qt, zt2, GUARD_TOL) {
        return Err(LaxError::DegenerateQTilde { what: "q~ = z2~" });
    }
    if near(qt, et2, GUARD_TOL) {
        return Err(LaxError::DegenerateQTilde {
            what: "q~ = zeta2~",
        });
    }
    if near(qt, z1, GUARD_TOL) || near(qt, e1, GUARD_TOL) {
        return Err(LaxError::DegenerateQTilde { what: "p~ = 0" });
    }
    let pt = r1 * r2 * (qt - e1) * (qt - z1) / (p * (qt - et2) * (qt - zt2));
    Ok((next, SpectralPoint { q: qt, p: pt }))
}

/// The same step through matrices: build divisors on `a`, apply
/// [`iso_step`], and read the spectral coordinates of the result.
pub fn matrix_route_with_gauge(
    theta: &TypeTheta,
    s: &SpectralPoint,
    a: &CMatrix,
) -> Result<(TypeTheta, SpectralPoint)> {
    let l = divisors_with_gauge(theta, s, a)?;
    let (b1, b2) = iso_step(&l.first, &l.second)?;
    let next = shifted_type(theta);
    let mut rep = mult_to_add(&RationalMatrixFunction::new(b1, b2)?)?;
    rep.zeta1 = next.zeta1;
    rep.zeta2 = next.zeta2;
    Ok((next, to_spectral(&rep)?))
}

pub fn matrix_route_step(
    theta: &TypeTheta,
    s: &SpectralPoint,
) -> Result<(TypeTheta, SpectralPoint)> {
    let (rho, _) = rank_two(theta)?;
    matrix_route_with_gauge(theta, s, &gauge_from_rho(rho))
}

/// Distance between the dPV step and the matrix route.
pub fn verify_iso_equals_dpv(theta: &TypeTheta, s: &SpectralPoint) -> Result<f64> {
    let (_, a) = dpv_step(theta, s)?;
    let (_, b) = matrix_route_step(theta, s)?;
    Ok(b.distance(&a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitPoint {
    pub k: usize,
    pub point: SpectralPoint,
    /// Distance of the dPV step that produced this point from the matrix
    /// route, when verification is on.
    pub residual: Option<f64>,
}

/// `n_steps` steps of dPV from `(theta, s)`. With `verify`, each step is
/// repeated along the matrix route from the same input.
pub fn dpv_orbit(
    theta: &TypeTheta,
    s: &SpectralPoint,
    n_steps: usize,
    verify: bool,
) -> Result<Vec<OrbitPoint>> {
    let mut out = vec![OrbitPoint {
        k: 0,
        point: *s,
        residual: None,
    }];
    let (mut th, mut cur) = (theta.clone(), *s);
    for k in 1..=n_steps {
        let (nt, ns) = dpv_step(&th, &cur).map_err(|e| e.at_step(k))?;
        let residual = if verify {
            let (_, m) = matrix_route_step(&th, &cur).map_err(|e| e.at_step(k))?;
            Some(m.distance(&ns))
        } else {
            None
        };
        out.push(OrbitPoint {
            k,
            point: ns,
            residual,
        });
        th = nt;
        cur = ns;
    }
    Ok(out)
}

/// Orbit along the matrix route only.
pub fn matrix_orbit(
    theta: &TypeTheta,
    s: &SpectralPoint,
    n_steps: usize,
) -> Result<Vec<SpectralPoint>> {
    let mut out = vec![*s];
    let (mut th, mut cur) = (theta.clone(), *s);
    for k in 1..=n_steps {
        let (nt, ns) = matrix_route_step(&th, &cur).map_err(|e| e.at_step(k))?;
        out.push(ns);
        th = nt;
        cur = ns;
    }
    Ok(out)
}

/// Random non-resonant type with `rho1 != rho2`.
pub fn random_theta(rng: &mut SampleRng) -> TypeTheta {
    use rand::Rng;
    loop {
        let z = sampling::distinct_points(rng, 4, 1.5, 0.3);
        let names = [("z1", z[0]), ("z2", z[1]), ("zeta1", z[2]), ("zeta2", z[3])];
        if check_nonresonant(&names).is_err() {
            continue;
        }
        let rho: Vec<C64> = (0..2)
            .map(|_| {
                C64::from_polar(
                    rng.gen_range(0.5..2.0),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        if (rho[0] - rho[1]).norm() < 0.3 {
            continue;
        }
        let k1 = sampling::random_point(rng, 1.5);
        let k2 = k_sum(z[0], z[1], z[2], z[3]) - k1;
        return TypeTheta::new(z[0], z[1], z[2], z[3], rho, vec![k1, k2])
            .expect("k-relation by construction");
    }
}

/// Random spectral point at distance at least `0.1` from the forbidden
/// values, on which both the dPV step and the matrix route are defined.
pub fn random_point(rng: &mut SampleRng, theta: &TypeTheta) -> SpectralPoint {
    let gap = sampling::MIN_POINT_DISTANCE;
    loop {
        let q = sampling::random_point(rng, 2.0);
        let p = sampling::random_point(rng, 2.5);
        let bad_q = [theta.z1, theta.z2, theta.zeta1, theta.zeta2]
            .iter()
            .any(|v| (q - v).norm() < gap);
        let bad_p = [C64::new(0.0, 0.0), theta.rho[0], theta.rho[1]]
            .iter()
            .any(|v| (p - v).norm() < gap);
        if bad_q || bad_p {
            continue;
        }
        let s = SpectralPoint { q, p };
        if verify_iso_equals_dpv(theta, &s).is_ok() {
            return s;
        }
    }
}
