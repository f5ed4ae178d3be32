//! Trajectory and orbit runners for the simulation subcommands.

use serde::Serialize;

use super::config::{field, ConfigError, Resolved};
use super::report::{complex_fields, complex_header, fmt_f64, fmt_opt, Metric, Record, Report};
use crate::error::LaxError;
use crate::isomonodromic::{
    self, check_nonresonant, configurations, iso_step, TimeDependentSystem, TypeTheta,
};
use crate::isospectral::{self, ConfigPoint};
use crate::lax::RationalMatrixFunction;
use crate::matcore::{ColVec, Projective, RowVec, C64};
use crate::spectral::{self, SpectralPoint};

/// Fixed bound for the finite-difference symplectic check.
pub const SYMPLECTIC_BOUND: f64 = 1e-5;

#[derive(Debug, Serialize)]
pub struct Invariants {
    pub trace: Vec<C64>,
    pub det: Vec<C64>,
}

#[derive(Debug, Serialize)]
pub struct IsoRecord {
    pub k: usize,
    pub p1: ColVec,
    pub q2: RowVec,
    pub invariants: Invariants,
    pub drift: f64,
    pub el_residual: Option<f64>,
}

impl Record for IsoRecord {
    fn csv_header(&self) -> Vec<String> {
        let r = self.p1.len();
        let n = self.invariants.trace.len();
        let mut h = vec!["k".to_string()];
        h.extend(complex_header("p1_", r));
        h.extend(complex_header("q2_", r));
        h.extend(complex_header("trace_", n));
        h.extend(complex_header("det_", n));
        h.extend(["drift".to_string(), "el_residual".to_string()]);
        h
    }

    fn csv_fields(&self) -> Vec<String> {
        let mut f = vec![self.k.to_string()];
        f.extend(complex_fields(self.p1.iter()));
        f.extend(complex_fields(self.q2.iter()));
        f.extend(complex_fields(&self.invariants.trace));
        f.extend(complex_fields(&self.invariants.det));
        f.extend([fmt_f64(self.drift), fmt_opt(self.el_residual)]);
        f
    }
}

fn rel_drift(base: &[C64], cur: &[C64]) -> f64 {
    base.iter()
        .zip(cur)
        .map(|(a, b)| (a - b).norm() / a.norm().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

pub fn isospectral(cfg: &Resolved) -> Result<Report<IsoRecord>, ConfigError> {
    let mut rng = cfg.rng();
    let sys = cfg.system(&mut rng)?;
    let (prev, cur) = cfg.initial_configs(&sys, &mut rng)?;
    let points = isospectral::invariant_points(&sys);
    let mut report = Report::new("isospectral", cfg.tol);
    let mut configs = vec![prev, cur];
    let mut base: Option<Vec<C64>> = None;
    let (mut max_drift, mut max_el) = (0.0f64, 0.0f64);

    for k in 0..=cfg.steps {
        let result = (|| -> crate::Result<IsoRecord> {
            if k > 0 {
                let next = isospectral::step(&sys, &configs[k - 1], &configs[k])?.normalized()?;
                configs.push(next);
            }
            let l = isospectral::eta(&sys, &configs[k], &configs[k + 1])?;
            let inv = isospectral::spectral_invariants(&l, &points)?;
            let drift = match &base {
                Some(b) => rel_drift(b, &inv),
                None => {
                    base = Some(inv);
                    0.0
                }
            };
            let el = if k > 0 {
                Some(isospectral::el_residual(
                    &sys,
                    &configs[k - 1],
                    &configs[k],
                    &configs[k + 1],
                )?)
            } else {
                None
            };
            let mut trace = Vec::with_capacity(points.len());
            let mut det = Vec::with_capacity(points.len());
            for &z in &points {
                trace.push(l.trace(z)?);
                det.push(l.det(z)?);
            }
            Ok(IsoRecord {
                k,
                p1: configs[k + 1].p1.clone(),
                q2: configs[k + 1].q2.clone(),
                invariants: Invariants { trace, det },
                drift,
                el_residual: el,
            })
        })();
        match result {
            Ok(rec) => {
                max_drift = max_drift.max(rec.drift);
                max_el = max_el.max(rec.el_residual.unwrap_or(0.0));
                report.records.push(rec);
            }
            Err(e) => {
                report.failure = Some(e.at_step(k));
                break;
            }
        }
    }
    report
        .metrics
        .push(Metric::below("max_drift", max_drift, cfg.tol));
    report
        .metrics
        .push(Metric::below("max_el_residual", max_el, cfg.tol));
    let pairing = isospectral::min_pairing(&sys, &configs);
    if pairing < crate::sampling::MIN_PAIRING {
        log::warn!("orbit comes within {pairing:e} of the singular locus; expect amplified drift");
    }
    if report.failure.is_none() {
        match isospectral::symplectic_residual(&sys, &configs[0], &configs[1]) {
            Ok(s) => report
                .metrics
                .push(Metric::below("symplectic_residual", s, SYMPLECTIC_BOUND)),
            Err(e) => report.failure = Some(e),
        }
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct DivisorData {
    pub p: ColVec,
    pub q: RowVec,
}

#[derive(Debug, Serialize)]
pub struct IsomRecord {
    pub k: usize,
    pub z2: C64,
    pub zeta2: C64,
    pub first: DivisorData,
    pub second: DivisorData,
    pub theta: Option<TypeTheta>,
    pub el_residual: Option<f64>,
}

impl Record for IsomRecord {
    fn csv_header(&self) -> Vec<String> {
        let r = self.first.p.len();
        let mut h = vec!["k".to_string()];
        h.extend(["z2_re", "z2_im", "zeta2_re", "zeta2_im"].map(String::from));
        for name in ["p1_", "q1_", "p2_", "q2_"] {
            h.extend(complex_header(name, r));
        }
        h.extend(complex_header("k_", r));
        h.push("el_residual".to_string());
        h
    }

    fn csv_fields(&self) -> Vec<String> {
        let r = self.first.p.len();
        let mut f = vec![self.k.to_string()];
        f.extend(complex_fields([&self.z2, &self.zeta2]));
        f.extend(complex_fields(self.first.p.iter()));
        f.extend(complex_fields(self.first.q.iter()));
        f.extend(complex_fields(self.second.p.iter()));
        f.extend(complex_fields(self.second.q.iter()));
        match &self.theta {
            Some(t) => f.extend(complex_fields(&t.k)),
            None => f.extend(std::iter::repeat_n(String::new(), 2 * r)),
        }
        f.push(fmt_opt(self.el_residual));
        f
    }
}

/// Type of `L`, in the eigenbasis of `A` when `A` is not diagonal.
fn type_in_diagonal_gauge(l: &RationalMatrixFunction) -> crate::Result<Option<TypeTheta>> {
    match isomonodromic::type_of(l) {
        Ok(t) => Ok(Some(t)),
        Err(LaxError::NonDiagonalL0) if l.dim() == 2 => {
            isomonodromic::type_of(&isomonodromic::diagonalize(l)?).map(Some)
        }
        Err(LaxError::NonDiagonalL0) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn isomonodromic(cfg: &Resolved) -> Result<Report<IsomRecord>, ConfigError> {
    let mut rng = cfg.rng();
    let sys = cfg.system(&mut rng)?;
    check_nonresonant(&[
        ("z1", sys.z1),
        ("z2", sys.z2),
        ("zeta1", sys.zeta1),
        ("zeta2", sys.zeta2),
    ])
    .map_err(|e| field("divisor", e.to_string()))?;
    let (prev, cur) = cfg.initial_configs(&sys, &mut rng)?;
    let tsys = TimeDependentSystem::new(sys.clone(), 0);
    let mut report = Report::new("isomonodromic", cfg.tol);

    let l0 = match isospectral::eta(&sys, &prev, &cur) {
        Ok(l) => l,
        Err(e) => {
            report.failure = Some(e.at_step(0));
            return Ok(report);
        }
    };
    let mut traj = vec![l0];
    let mut configs: Vec<ConfigPoint> = Vec::new();
    let mut theta0: Option<TypeTheta> = None;
    let (mut max_el, mut max_drift, mut max_k, mut max_shift) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);

    for k in 0..=cfg.steps {
        let result = (|| -> crate::Result<IsomRecord> {
            if k == 0 {
                configs = configurations(&traj)?;
            } else {
                let last = &traj[k - 1];
                let (b1, b2) = iso_step(&last.first, &last.second)?;
                let l = RationalMatrixFunction::new(
                    isomonodromic::balanced(&b1),
                    isomonodromic::balanced(&b2),
                )?;
                configs.push(ConfigPoint::of(&l));
                traj.push(l);
            }
            let l = &traj[k];
            let theta = type_in_diagonal_gauge(l)?;
            let el = if k > 0 {
                Some(isomonodromic::el_residual_t(
                    &tsys.at(k as i64),
                    &configs[k - 1],
                    &configs[k],
                    &configs[k + 1],
                )?)
            } else {
                None
            };
            Ok(IsomRecord {
                k,
                z2: l.second.pole(),
                zeta2: l.second.zeta(),
                first: DivisorData {
                    p: l.first.p().clone(),
                    q: l.first.q().clone(),
                },
                second: DivisorData {
                    p: l.second.p().clone(),
                    q: l.second.q().clone(),
                },
                theta,
                el_residual: el,
            })
        })();
        match result {
            Ok(rec) => {
                max_el = max_el.max(rec.el_residual.unwrap_or(0.0));
                let expected = sys.z2 - k as f64;
                max_shift = max_shift.max((rec.z2 - expected).norm());
                if let Some(t) = &rec.theta {
                    max_k = max_k.max(t.k_residual());
                    match &theta0 {
                        Some(t0) => max_drift = max_drift.max(t0.drift(t)),
                        None => theta0 = Some(t.clone()),
                    }
                }
                report.records.push(rec);
            }
            Err(e) => {
                report.failure = Some(e.at_step(k));
                break;
            }
        }
    }
    report
        .metrics
        .push(Metric::below("max_el_residual", max_el, cfg.tol));
    report
        .metrics
        .push(Metric::below("max_type_drift", max_drift, cfg.tol));
    report.metrics.push(Metric::below(
        "max_k_residual",
        max_k,
        isomonodromic::K_RELATION_TOL.max(cfg.tol),
    ));
    report
        .metrics
        .push(Metric::below("max_shift_error", max_shift, cfg.tol));
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct DpvRecord {
    pub k: usize,
    pub q: C64,
    pub p: C64,
    pub residual: Option<f64>,
}

impl Record for DpvRecord {
    fn csv_header(&self) -> Vec<String> {
        ["k", "re_q", "im_q", "re_p", "im_p", "residual"]
            .map(String::from)
            .to_vec()
    }

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.k.to_string(),
            fmt_f64(self.q.re),
            fmt_f64(self.q.im),
            fmt_f64(self.p.re),
            fmt_f64(self.p.im),
            fmt_opt(self.residual),
        ]
    }
}

pub fn dpv(cfg: &Resolved) -> Result<Report<DpvRecord>, ConfigError> {
    let mut rng = cfg.rng();
    let (theta, s) = cfg.theta_and_point(&mut rng)?;
    let check = cfg.config.check_route.unwrap_or(true);
    let mut report = Report::new("dpv", cfg.tol);
    report.records.push(DpvRecord {
        k: 0,
        q: s.q,
        p: s.p,
        residual: None,
    });
    let (mut th, mut cur): (TypeTheta, SpectralPoint) = (theta, s);
    let mut max_res = 0.0f64;
    for k in 1..=cfg.steps {
        let step = spectral::dpv_step(&th, &cur).and_then(|(nt, ns)| {
            let residual = if check {
                Some(spectral::matrix_route_step(&th, &cur)?.1.distance(&ns))
            } else {
                None
            };
            Ok((nt, ns, residual))
        });
        match step {
            Ok((nt, ns, residual)) => {
                max_res = max_res.max(residual.unwrap_or(0.0));
                report.records.push(DpvRecord {
                    k,
                    q: ns.q,
                    p: ns.p,
                    residual,
                });
                th = nt;
                cur = ns;
            }
            Err(e) => {
                report.failure = Some(e.at_step(k));
                break;
            }
        }
    }
    if check {
        report
            .metrics
            .push(Metric::below("max_route_residual", max_res, cfg.tol));
    }
    Ok(report)
}
