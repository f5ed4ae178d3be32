//! Isospectral dynamics on pairs of configuration points.
//!
//! A configuration point `Q = (p1, q2†)` lives in `P^{r-1} x (P^{r-1})†`.
//! Two consecutive points determine `L(z) = B1(z) B2(z)` through [`eta`], and
//! the re-factorization `B2 B1 = B1~ B2~` becomes the explicit map [`step`].
//! The map is the discrete Euler-Lagrange flow of
//!
//! ```text
//! L(X, Y) = (z2 - z1)     log(x2† x1)
//!         + (z1 - zeta2)  log(x2† A^-1 y1)
//!         + (zeta2 - zeta1) log(y2† A^-2 y1)
//!         + (zeta1 - z2)  log(y2† A^-1 x1)
//! ```
//!
//! All gradients are evaluated in homogeneous coordinates with closed rational
//! formulas; the log branches never enter the dynamics.

use serde::{Deserialize, Serialize};

use crate::divisor::{checked_pairing, ElementaryDivisor};
use crate::error::{LaxError, Result};
use crate::lax::RationalMatrixFunction;
use crate::matcore::{normalize, CMatrix, ColVec, Normalization, Projective, RowVec, C64};
use crate::refactor::check_generic;
use crate::sampling::{self, SampleRng};

/// Finite-difference step for the chart-based checks.
pub const FD_STEP: f64 = 1e-5;

/// Fixed data of the isospectral flow: the gauge `A` and the divisor
/// `z1 + z2 - zeta1 - zeta2`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsoSystem {
    a: CMatrix,
    a_inv: CMatrix,
    a_inv2: CMatrix,
    pub z1: C64,
    pub z2: C64,
    pub zeta1: C64,
    pub zeta2: C64,
}

impl IsoSystem {
    pub fn new(a: CMatrix, z1: C64, z2: C64, zeta1: C64, zeta2: C64) -> Result<Self> {
        check_generic(&[("z1", z1), ("z2", z2), ("zeta1", zeta1), ("zeta2", zeta2)])?;
        let a_inv = a.inverse()?;
        let a_inv2 = &a_inv * &a_inv;
        Ok(Self {
            a,
            a_inv,
            a_inv2,
            z1,
            z2,
            zeta1,
            zeta2,
        })
    }

    /// Random gauge and well-separated divisor points.
    pub fn random(rng: &mut SampleRng, r: usize) -> Self {
        let a = sampling::random_gauge(rng, r);
        let pts = sampling::distinct_points(rng, 4, 1.5, 0.3);
        Self::new(a, pts[0], pts[1], pts[2], pts[3]).expect("sampled in generic position")
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn a_inv(&self) -> &CMatrix {
        &self.a_inv
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn special_points(&self) -> Vec<C64> {
        vec![self.z1, self.z2, self.zeta1, self.zeta2]
    }

    /// The same system with the second pole and zero moved by `-t`.
    pub fn shifted(&self, t: f64) -> IsoSystem {
        IsoSystem {
            z2: self.z2 - t,
            zeta2: self.zeta2 - t,
            ..self.clone()
        }
    }

    fn divisor(&self, pole: C64, p: ColVec, q: RowVec) -> Result<ElementaryDivisor> {
        ElementaryDivisor::new(self.a.clone(), pole, p, q)
    }
}

/// Projective pair `(p1, q2†)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigPoint {
    pub p1: ColVec,
    pub q2: RowVec,
}

impl ConfigPoint {
    pub fn new(p1: ColVec, q2: RowVec) -> Result<Self> {
        if p1.len() != q2.len() {
            return Err(LaxError::DimensionMismatch {
                expected: p1.len(),
                actual: q2.len(),
            });
        }
        if p1.norm() == 0.0 || q2.norm() == 0.0 {
            return Err(LaxError::ZeroVector);
        }
        Ok(Self { p1, q2 })
    }

    /// The column vector of the first factor and the row vector of the
    /// second factor of `L = B1 B2`.
    pub fn of(l: &RationalMatrixFunction) -> Self {
        Self {
            p1: l.first.p().clone(),
            q2: l.second.q().clone(),
        }
    }

    pub fn rescaled(&self, s1: C64, s2: C64) -> Self {
        Self {
            p1: self.p1.scaled(s1),
            q2: self.q2.scaled(s2),
        }
    }

    /// Max-magnitude-one representatives.
    pub fn normalized(&self) -> Result<Self> {
        Ok(Self {
            p1: normalize(&self.p1, Normalization::MaxMagnitudeOne)?.0,
            q2: normalize(&self.q2, Normalization::MaxMagnitudeOne)?.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.p1.len()
    }

    /// Largest colinearity residual against another point.
    pub fn proj_distance(&self, other: &ConfigPoint) -> Result<f64> {
        Ok(crate::matcore::colinearity_residual(&self.p1, &other.p1)?
            .max(crate::matcore::colinearity_residual(&self.q2, &other.q2)?))
    }
}

/// Cotangent data at a configuration point: a covector dual to the column
/// `p1` and a vector dual to the row `q2†`. Also the shape of the gradients
/// of the Lagrangian in either argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Momentum {
    pub pi1: RowVec,
    pub pi2: ColVec,
}

impl Momentum {
    pub fn neg(&self) -> Momentum {
        Momentum {
            pi1: -&self.pi1,
            pi2: -&self.pi2,
        }
    }

    /// `|a + b| / (|a| + |b|)` for each part; the larger of the two.
    pub fn cancellation(&self, other: &Momentum) -> f64 {
        let part = |s: f64, a: f64, b: f64| if a + b == 0.0 { 0.0 } else { s / (a + b) };
        let r1 = part(
            (&self.pi1 + &other.pi1).norm(),
            self.pi1.norm(),
            other.pi1.norm(),
        );
        let r2 = part(
            (&self.pi2 + &other.pi2).norm(),
            self.pi2.norm(),
            other.pi2.norm(),
        );
        r1.max(r2)
    }

    /// Componentwise distance relative to the larger norm.
    pub fn rel_diff(&self, other: &Momentum) -> f64 {
        let d = ((&self.pi1 - &other.pi1).norm().powi(2) + (&self.pi2 - &other.pi2).norm().powi(2))
            .sqrt();
        let s = (self.pi1.norm().powi(2) + self.pi2.norm().powi(2))
            .sqrt()
            .max((other.pi1.norm().powi(2) + other.pi2.norm().powi(2)).sqrt());
        if s == 0.0 {
            0.0
        } else {
            d / s
        }
    }
}

/// Pairings shared by the Lagrangian and its gradients at `(X, Y)`.
struct Pairings {
    x2_x1: C64,
    x2_ainv_y1: C64,
    y2_ainv2_y1: C64,
    y2_ainv_x1: C64,
}

fn pairings(sys: &IsoSystem, x: &ConfigPoint, y: &ConfigPoint) -> Result<Pairings> {
    Ok(Pairings {
        x2_x1: checked_pairing(&x.q2, &x.p1, "x2† x1")?,
        x2_ainv_y1: checked_pairing(&x.q2, &(&sys.a_inv * &y.p1), "x2† A^-1 y1")?,
        y2_ainv2_y1: checked_pairing(&y.q2, &(&sys.a_inv2 * &y.p1), "y2† A^-2 y1")?,
        y2_ainv_x1: checked_pairing(&y.q2, &(&sys.a_inv * &x.p1), "y2† A^-1 x1")?,
    })
}

/// `L(z)` parameterized by two consecutive configuration points.
pub fn eta(
    sys: &IsoSystem,
    prev: &ConfigPoint,
    cur: &ConfigPoint,
) -> Result<RationalMatrixFunction> {
    let (pb, qb) = (&prev.p1, &prev.q2);
    let (p, q) = (&cur.p1, &cur.q2);
    let ainv_p = &sys.a_inv * p;
    let ainv2_p = &sys.a_inv2 * p;
    let ainv_pb = &sys.a_inv * pb;
    let qb_ainv_p = checked_pairing(qb, &ainv_p, "q2_† A^-1 p1")?;
    let q_ainv2_p = checked_pairing(q, &ainv2_p, "q2† A^-2 p1")?;
    let q_ainv_pb = checked_pairing(q, &ainv_pb, "q2† A^-1 p1_")?;

    // first factor: column p1, row assembled from q2_ and q2
    let row1 = &qb.scaled((sys.z1 - sys.zeta2) / qb_ainv_p)
        + &(q * &sys.a_inv).scaled((sys.zeta2 - sys.zeta1) / q_ainv2_p);
    // second factor: row q2, column assembled from p1_ and p1
    let col2 = &pb.scaled((sys.z2 - sys.zeta1) / q_ainv_pb)
        + &ainv_p.scaled((sys.zeta1 - sys.zeta2) / q_ainv2_p);

    let first = sys.divisor(sys.z1, p.clone(), row1)?;
    let second = sys.divisor(sys.z2, col2, q.clone())?;
    Ok(RationalMatrixFunction { first, second })
}

/// Next configuration point `Q~` from `(Q_, Q)`.
pub fn step(sys: &IsoSystem, prev: &ConfigPoint, cur: &ConfigPoint) -> Result<ConfigPoint> {
    let (pb, qb) = (&prev.p1, &prev.q2);
    let (p, q) = (&cur.p1, &cur.q2);
    let ainv_p = &sys.a_inv * p;
    let ainv2_p = &sys.a_inv2 * p;
    let ainv_pb = &sys.a_inv * pb;
    let q_ainv2 = q * &sys.a_inv2;
    let qb_ainv = qb * &sys.a_inv;

    let qp = checked_pairing(q, p, "q2† p1")?;
    let q_ainv_pb = checked_pairing(q, &ainv_pb, "q2† A^-1 p1_")?;
    let q_ainv2_p = checked_pairing(q, &ainv2_p, "q2† A^-2 p1")?;
    let qb_ainv_p = checked_pairing(qb, &ainv_p, "q2_† A^-1 p1")?;

    let (z1, z2, e1, e2) = (sys.z1, sys.z2, sys.zeta1, sys.zeta2);
    let inner_p = &(&p.scaled((z1 - z2) / qp) + &ainv_pb.scaled((z2 - e1) / q_ainv_pb))
        + &ainv2_p.scaled((e1 - e2) / q_ainv2_p);
    let inner_q = &(&q.scaled((z2 - z1) / qp) + &qb_ainv.scaled((z1 - e2) / qb_ainv_p))
        + &q_ainv2.scaled((e2 - e1) / q_ainv2_p);
    ConfigPoint::new(&sys.a * &inner_p, &inner_q * &sys.a)
}

/// Residual of the two implicit equations of motion linking `(Q_, Q, Q~)`.
pub fn implicit_residual(
    sys: &IsoSystem,
    prev: &ConfigPoint,
    cur: &ConfigPoint,
    next: &ConfigPoint,
) -> Result<f64> {
    let (z1, z2, e1, e2) = (sys.z1, sys.z2, sys.zeta1, sys.zeta2);
    let (pb, qb) = (&prev.p1, &prev.q2);
    let (p, q) = (&cur.p1, &cur.q2);
    let (pt, qt) = (&next.p1, &next.q2);
    let ai = &sys.a_inv;
    let ai2 = &sys.a_inv2;

    let ai_pb = ai * pb;
    let ai2_p = ai2 * p;
    let ai_pt = ai * pt;
    let lhs_p = &ai_pb.scaled((z2 - e1) / checked_pairing(q, &ai_pb, "q2† A^-1 p1_")?)
        + &ai2_p.scaled((e1 - e2) / checked_pairing(q, &ai2_p, "q2† A^-2 p1")?);
    let rhs_p = &p.scaled((z2 - z1) / checked_pairing(q, p, "q2† p1")?)
        + &ai_pt.scaled((z1 - e2) / checked_pairing(q, &ai_pt, "q2† A^-1 p1~")?);

    let qb_ai = qb * ai;
    let q_ai2 = q * ai2;
    let qt_ai = qt * ai;
    let lhs_q = &qb_ai.scaled((z1 - e2) / checked_pairing(&qb_ai, p, "q2_† A^-1 p1")?)
        + &q_ai2.scaled((e2 - e1) / checked_pairing(&q_ai2, p, "q2† A^-2 p1")?);
    let rhs_q = &q.scaled((z1 - z2) / checked_pairing(q, p, "q2† p1")?)
        + &qt_ai.scaled((z2 - e1) / checked_pairing(&qt_ai, p, "q2~† A^-1 p1")?);

    let rp = (&lhs_p - &rhs_p).norm() / (lhs_p.norm() + rhs_p.norm());
    let rq = (&lhs_q - &rhs_q).norm() / (lhs_q.norm() + rhs_q.norm());
    Ok(rp.max(rq))
}

/// The Lagrangian with principal logarithms, defined up to an additive
/// constant on projective space.
pub fn lagrangian(sys: &IsoSystem, x: &ConfigPoint, y: &ConfigPoint) -> Result<C64> {
    let s = pairings(sys, x, y)?;
    Ok((sys.z2 - sys.z1) * s.x2_x1.ln()
        + (sys.z1 - sys.zeta2) * s.x2_ainv_y1.ln()
        + (sys.zeta2 - sys.zeta1) * s.y2_ainv2_y1.ln()
        + (sys.zeta1 - sys.z2) * s.y2_ainv_x1.ln())
}

/// `(dL/dx1, dL/dx2†)` at `(X, Y)`.
pub fn grad_x(sys: &IsoSystem, x: &ConfigPoint, y: &ConfigPoint) -> Result<Momentum> {
    let s = pairings(sys, x, y)?;
    let ai = &sys.a_inv;
    let pi1 = &x.q2.scaled((sys.z2 - sys.z1) / s.x2_x1)
        + &(&y.q2 * ai).scaled((sys.zeta1 - sys.z2) / s.y2_ainv_x1);
    let pi2 = &x.p1.scaled((sys.z2 - sys.z1) / s.x2_x1)
        + &(ai * &y.p1).scaled((sys.z1 - sys.zeta2) / s.x2_ainv_y1);
    Ok(Momentum { pi1, pi2 })
}

/// `(dL/dy1, dL/dy2†)` at `(X, Y)`.
pub fn grad_y(sys: &IsoSystem, x: &ConfigPoint, y: &ConfigPoint) -> Result<Momentum> {
    let s = pairings(sys, x, y)?;
    let ai = &sys.a_inv;
    let ai2 = &sys.a_inv2;
    let pi1 = &(&x.q2 * ai).scaled((sys.z1 - sys.zeta2) / s.x2_ainv_y1)
        + &(&y.q2 * ai2).scaled((sys.zeta2 - sys.zeta1) / s.y2_ainv2_y1);
    let pi2 = &(ai2 * &y.p1).scaled((sys.zeta2 - sys.zeta1) / s.y2_ainv2_y1)
        + &(ai * &x.p1).scaled((sys.zeta1 - sys.z2) / s.y2_ainv_x1);
    Ok(Momentum { pi1, pi2 })
}

/// Momentum at `Q` arriving from `Q_`: `dL/dY(Q_, Q)`.
pub fn momentum(sys: &IsoSystem, prev: &ConfigPoint, cur: &ConfigPoint) -> Result<Momentum> {
    grad_y(sys, prev, cur)
}

/// Momentum at `Q` seen from the outgoing pair: `-dL/dX(Q, Q~)`.
pub fn momentum_push(sys: &IsoSystem, cur: &ConfigPoint, next: &ConfigPoint) -> Result<Momentum> {
    Ok(grad_x(sys, cur, next)?.neg())
}

/// Cancellation residual of `dL/dY(Q_{k-1}, Q_k) + dL/dX(Q_k, Q_{k+1})`.
pub fn el_residual(
    sys: &IsoSystem,
    km1: &ConfigPoint,
    k: &ConfigPoint,
    kp1: &ConfigPoint,
) -> Result<f64> {
    el_residual_split(sys, sys, km1, k, kp1)
}

/// Euler-Lagrange residual with separate systems for the incoming and the
/// outgoing pair (the time-dependent case).
pub(crate) fn el_residual_split(
    incoming: &IsoSystem,
    outgoing: &IsoSystem,
    km1: &ConfigPoint,
    k: &ConfigPoint,
    kp1: &ConfigPoint,
) -> Result<f64> {
    let a = grad_y(incoming, km1, k)?;
    let b = grad_x(outgoing, k, kp1)?;
    Ok(a.cancellation(&b))
}

/// Central differences of `f` in every homogeneous coordinate of `at`,
/// along the real and the imaginary direction. Returns the real-direction
/// estimate and the largest disagreement between the two directions.
fn fd_gradient(
    f: impl Fn(&ConfigPoint) -> Result<C64>,
    at: &ConfigPoint,
) -> Result<(Momentum, f64)> {
    let r = at.dim();
    let mut g = Momentum {
        pi1: RowVec::zeros(r),
        pi2: ColVec::zeros(r),
    };
    let mut spread = 0.0f64;
    for j in 0..r {
        for part in 0..2 {
            let h = if part == 0 {
                C64::new(FD_STEP, 0.0)
            } else {
                C64::new(0.0, FD_STEP)
            };
            let (mut a, mut b) = (at.clone(), at.clone());
            a.p1[j] += h;
            b.p1[j] -= h;
            let d1 = (f(&a)? - f(&b)?) / (h * 2.0);
            let (mut a, mut b) = (at.clone(), at.clone());
            a.q2[j] += h;
            b.q2[j] -= h;
            let d2 = (f(&a)? - f(&b)?) / (h * 2.0);
            if part == 0 {
                g.pi1[j] = d1;
                g.pi2[j] = d2;
            } else {
                spread = spread
                    .max((g.pi1[j] - d1).norm())
                    .max((g.pi2[j] - d2).norm());
            }
        }
    }
    Ok((g, spread))
}

/// Finite-difference estimates of `(dL/dX, dL/dY)`.
pub fn fd_gradients(
    sys: &IsoSystem,
    x: &ConfigPoint,
    y: &ConfigPoint,
) -> Result<(Momentum, Momentum)> {
    let (gx, _) = fd_gradient(|x| lagrangian(sys, x, y), x)?;
    let (gy, _) = fd_gradient(|y| lagrangian(sys, x, y), y)?;
    Ok((gx, gy))
}

/// Largest relative error of the closed-form gradients against finite
/// differences, taken over both arguments and both step directions.
pub fn gradient_fd_error(sys: &IsoSystem, x: &ConfigPoint, y: &ConfigPoint) -> Result<f64> {
    let (gx, sx) = fd_gradient(|x| lagrangian(sys, x, y), x)?;
    let (gy, sy) = fd_gradient(|y| lagrangian(sys, x, y), y)?;
    let ax = grad_x(sys, x, y)?;
    let ay = grad_y(sys, x, y)?;
    let scale = |m: &Momentum| (m.pi1.norm().powi(2) + m.pi2.norm().powi(2)).sqrt();
    Ok(gx
        .rel_diff(&ax)
        .max(gy.rel_diff(&ay))
        .max(sx / scale(&ax))
        .max(sy / scale(&ay)))
}

/// Starting pair with every pairing used along the flow of size at least
/// [`sampling::MIN_PAIRING`].
pub fn random_initial(rng: &mut SampleRng, sys: &IsoSystem) -> (ConfigPoint, ConfigPoint) {
    let r = sys.dim();
    loop {
        let prev = ConfigPoint {
            p1: sampling::random_col(rng, r),
            q2: sampling::random_row(rng, r),
        };
        let cur = ConfigPoint {
            p1: sampling::random_col(rng, r),
            q2: sampling::random_row(rng, r),
        };
        if window_pairing(sys, &prev, &cur) >= sampling::MIN_PAIRING
            && step(sys, &prev, &cur).is_ok()
        {
            return (prev, cur);
        }
    }
}

/// Smallest pairing the step map divides by at `(prev, cur)`.
fn window_pairing(sys: &IsoSystem, prev: &ConfigPoint, cur: &ConfigPoint) -> f64 {
    let ai = &sys.a_inv;
    [
        cur.q2.dot(&cur.p1),
        prev.q2.dot(&(ai * &cur.p1)),
        cur.q2.dot(&(&sys.a_inv2 * &cur.p1)),
        cur.q2.dot(&(ai * &prev.p1)),
        prev.q2.dot(&prev.p1),
    ]
    .iter()
    .map(|v| v.norm())
    .fold(f64::INFINITY, f64::min)
}

/// Smallest pairing over every consecutive pair of a trajectory. Near zero
/// the map is singular and forward rounding error grows like its inverse.
pub fn min_pairing(sys: &IsoSystem, traj: &[ConfigPoint]) -> f64 {
    traj.windows(2)
        .map(|w| window_pairing(sys, &w[0], &w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Like [`random_initial`], but the whole `n_steps` orbit must keep its
/// pairings above [`sampling::MIN_PAIRING`].
pub fn random_initial_orbit(
    rng: &mut SampleRng,
    sys: &IsoSystem,
    n_steps: usize,
) -> (ConfigPoint, ConfigPoint) {
    loop {
        let (prev, cur) = random_initial(rng, sys);
        if let Ok(traj) = trajectory(sys, &prev, &cur, n_steps) {
            if min_pairing(sys, &traj) >= sampling::MIN_PAIRING {
                return (prev, cur);
            }
        }
    }
}

/// `n_steps` applications of the step map. The result starts with
/// `prev, cur` and has `n_steps + 2` points, each normalized to
/// max-magnitude one.
pub fn trajectory(
    sys: &IsoSystem,
    prev: &ConfigPoint,
    cur: &ConfigPoint,
    n_steps: usize,
) -> Result<Vec<ConfigPoint>> {
    let mut out = vec![prev.clone(), cur.clone()];
    for k in 0..n_steps {
        let n = out.len();
        let next = step(sys, &out[n - 2], &out[n - 1])
            .and_then(|q| q.normalized())
            .map_err(|e| e.at_step(k + 1))?;
        out.push(next);
    }
    Ok(out)
}

/// Coefficients of the characteristic polynomial of `L(z)` at each point:
/// the power traces `tr L^j`, `j < r`, and `det L`.
pub fn spectral_invariants(l: &RationalMatrixFunction, points: &[C64]) -> Result<Vec<C64>> {
    let r = l.dim();
    let mut out = Vec::with_capacity(points.len() * r);
    for &z in points {
        let m = l.eval(z)?;
        let mut power = m.clone();
        for j in 1..r {
            out.push(power.trace());
            if j + 1 < r {
                power = &power * &m;
            }
        }
        out.push(l.det(z)?);
    }
    Ok(out)
}

/// Evaluation points used by isospectral drift checks.
pub fn invariant_points(sys: &IsoSystem) -> Vec<C64> {
    sampling::sample_points(&sys.special_points(), 0)
}

fn max_rel_drift(base: &[C64], cur: &[C64]) -> f64 {
    base.iter()
        .zip(cur)
        .map(|(a, b)| (a - b).norm() / a.norm().max(1e-300))
        .fold(0.0, f64::max)
}

/// Largest relative drift of the spectral invariants over `n_steps` steps.
pub fn spectral_invariance(
    sys: &IsoSystem,
    prev: &ConfigPoint,
    cur: &ConfigPoint,
    n_steps: usize,
) -> Result<f64> {
    let points = invariant_points(sys);
    let traj = trajectory(sys, prev, cur, n_steps)?;
    let base = spectral_invariants(&eta(sys, &traj[0], &traj[1])?, &points)?;
    let mut drift = 0.0f64;
    for (k, pair) in traj.windows(2).enumerate().skip(1) {
        let inv = eta(sys, &pair[0], &pair[1])
            .and_then(|l| spectral_invariants(&l, &points))
            .map_err(|e| e.at_step(k))?;
        drift = drift.max(max_rel_drift(&base, &inv));
    }
    Ok(drift)
}

/// Which component of each projective vector the affine chart fixes to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartRule {
    Largest,
    SecondLargest,
}

#[derive(Debug, Clone, Copy)]
struct Chart {
    i1: usize,
    i2: usize,
}

fn ranked_index<V: Projective>(v: &V, rule: ChartRule) -> usize {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| {
        v.entries()[b]
            .norm()
            .partial_cmp(&v.entries()[a].norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    match rule {
        ChartRule::Largest => idx[0],
        ChartRule::SecondLargest => idx[1],
    }
}

impl Chart {
    fn for_point(q: &ConfigPoint, rule: ChartRule) -> Chart {
        Chart {
            i1: ranked_index(&q.p1, rule),
            i2: ranked_index(&q.q2, rule),
        }
    }

    fn coords(&self, q: &ConfigPoint) -> Result<Vec<C64>> {
        let mut out = Vec::with_capacity(2 * (q.dim() - 1));
        for (v, i) in [(q.p1.entries(), self.i1), (q.q2.entries(), self.i2)] {
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if v[i].norm() < 1e-8 * norm {
                return Err(LaxError::ChartBreakdown { index: i });
            }
            out.extend(
                v.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, z)| z / v[i]),
            );
        }
        Ok(out)
    }

    fn point(&self, coords: &[C64], r: usize) -> ConfigPoint {
        let expand = |part: &[C64], fixed: usize| {
            let mut v = Vec::with_capacity(r);
            let mut it = part.iter();
            for j in 0..r {
                v.push(if j == fixed {
                    C64::new(1.0, 0.0)
                } else {
                    *it.next().expect("chart length")
                });
            }
            v
        };
        let m = r - 1;
        ConfigPoint {
            p1: ColVec(expand(&coords[..m], self.i1)),
            q2: RowVec(expand(&coords[m..], self.i2)),
        }
    }

    fn restrict(&self, g: &Momentum) -> Vec<C64> {
        let mut out: Vec<C64> = g
            .pi1
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != self.i1)
            .map(|(_, z)| *z)
            .collect();
        out.extend(
            g.pi2
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != self.i2)
                .map(|(_, z)| *z),
        );
        out
    }
}

fn square(rows: Vec<Vec<C64>>) -> CMatrix {
    CMatrix::from_rows(rows).expect("square by construction")
}

/// `d^2 L / dX dY` in the given charts, from central differences of the
/// closed-form gradient in `X`.
fn mixed_hessian(
    sys: &IsoSystem,
    x: &ConfigPoint,
    cx: Chart,
    y: &ConfigPoint,
    cy: Chart,
) -> Result<CMatrix> {
    let r = x.dim();
    let xc = cx.point(&cx.coords(x)?, r);
    let yc = cy.coords(y)?;
    let m = yc.len();
    let mut cols = Vec::with_capacity(m);
    for j in 0..m {
        let mut plus = yc.clone();
        let mut minus = yc.clone();
        plus[j] += FD_STEP;
        minus[j] -= FD_STEP;
        let gp = cx.restrict(&grad_x(sys, &xc, &cy.point(&plus, r))?);
        let gm = cx.restrict(&grad_x(sys, &xc, &cy.point(&minus, r))?);
        cols.push(
            gp.iter()
                .zip(&gm)
                .map(|(a, b)| (a - b) / (2.0 * FD_STEP))
                .collect::<Vec<_>>(),
        );
    }
    Ok(square(
        (0..m)
            .map(|i| (0..m).map(|j| cols[j][i]).collect())
            .collect(),
    ))
}

/// Antisymmetric matrix of the 2-form `sum_ij S_ij dX_i ^ dY_j`.
fn two_form(s: &CMatrix) -> CMatrix {
    let m = s.dim();
    let mut w = CMatrix::zeros(2 * m);
    for i in 0..m {
        for j in 0..m {
            w[(i, m + j)] = s[(i, j)];
            w[(m + j, i)] = -s[(i, j)];
        }
    }
    w
}

/// `|DPhi^T sigma' DPhi - sigma| / |sigma|` for the step map at `(Q_, Q)`,
/// with charts fixing the largest component of each vector.
pub fn symplectic_residual(sys: &IsoSystem, prev: &ConfigPoint, cur: &ConfigPoint) -> Result<f64> {
    symplectic_residual_with(sys, prev, cur, ChartRule::Largest)
}

pub fn symplectic_residual_with(
    sys: &IsoSystem,
    prev: &ConfigPoint,
    cur: &ConfigPoint,
    rule: ChartRule,
) -> Result<f64> {
    let r = prev.dim();
    let next = step(sys, prev, cur)?;
    let (c0, c1, c2) = (
        Chart::for_point(prev, rule),
        Chart::for_point(cur, rule),
        Chart::for_point(&next, rule),
    );
    let x0 = c0.coords(prev)?;
    let y0 = c1.coords(cur)?;
    let m = x0.len();
    c2.coords(&next)?;

    let phi = |coords: &[C64]| -> Result<Vec<C64>> {
        let x = c0.point(&coords[..m], r);
        let y = c1.point(&coords[m..], r);
        let z = step(sys, &x, &y)?;
        let mut out = coords[m..].to_vec();
        out.extend(c2.coords(&z)?);
        Ok(out)
    };

    let base: Vec<C64> = x0.iter().chain(&y0).copied().collect();
    let mut jac = CMatrix::zeros(2 * m);
    for j in 0..2 * m {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[j] += FD_STEP;
        minus[j] -= FD_STEP;
        let fp = phi(&plus)?;
        let fm = phi(&minus)?;
        for i in 0..2 * m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * FD_STEP);
        }
    }

    let sigma = two_form(&mixed_hessian(sys, prev, c0, cur, c1)?);
    let sigma_next = two_form(&mixed_hessian(sys, cur, c1, &next, c2)?);
    let pulled = &(&jac.transpose() * &sigma_next) * &jac;
    Ok((&pulled - &sigma).norm() / sigma.norm())
}
