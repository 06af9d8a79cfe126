//! A-priori complexity certificates.
//!
//! For a target accuracy `eps` these functions give the largest inner
//! accuracy `delta` under which the chosen (variant, recovery) pair is
//! guaranteed to reach an `eps`-optimal, `eps`-feasible primal point, the
//! number of outer iterations that suffices, and the total number of box
//! projections. All logarithms are natural.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::outer::{Recovery, Variant};
use crate::problem::ProblemConstants;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub variant: Variant,
    pub recovery: Recovery,
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
    pub outer_bound: usize,
    #[serde(serialize_with = "total_or_unavailable")]
    pub total_projection_bound: Option<usize>,
    pub r_d_used: f64,
    #[serde(serialize_with = "crate::serde_ext::finite_or_null")]
    pub r_p_used: f64,
}

fn total_or_unavailable<S: serde::Serializer>(v: &Option<usize>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(n) => s.serialize_u64(*n as u64),
        None => s.serialize_str("unavailable"),
    }
}

fn check_inputs(eps: f64, r_d: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("must be positive and finite, got {eps}"),
        });
    }
    if !(r_d > 0.0 && r_d.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "R_d",
            reason: format!("must be positive and finite, got {r_d}"),
        });
    }
    Ok(())
}

/// `max{1, (Lbar_f / (c_g R_d))^(2/p)}`
pub fn alpha(consts: &ProblemConstants, r_d: f64, p_theta: u32) -> Result<f64> {
    if !consts.lbar_f.is_finite() {
        return Err(Error::RequiresCompactBox {
            what: "last-iterate constant alpha",
        });
    }
    if consts.c_g == 0.0 {
        return Ok(1.0);
    }
    let ratio = consts.lbar_f / (consts.c_g * r_d);
    Ok(ratio.powf(2.0 / p_theta as f64).max(1.0))
}

fn alpha_for(variant: Variant, recovery: Recovery, consts: &ProblemConstants, r_d: f64) -> Result<f64> {
    match recovery {
        Recovery::LastIterate => alpha(consts, r_d, variant.p_theta()),
        Recovery::Average => Ok(1.0),
    }
}

pub fn delta_rule(variant: Variant, recovery: Recovery, eps: f64, consts: &ProblemConstants, r_d: f64) -> Result<f64> {
    check_inputs(eps, r_d)?;
    let ld = consts.l_d;
    Ok(match (recovery, variant) {
        (Recovery::Average, Variant::Idgm) => eps / 3.0,
        (Recovery::Average, Variant::Idfgm) => eps.powf(1.5) / (8.0 * ld.sqrt() * r_d),
        (Recovery::LastIterate, _) => {
            let p = variant.p_theta() as f64;
            let a = alpha(consts, r_d, variant.p_theta())?;
            let s = ld * r_d * r_d;
            s / (2.0 * a.powf(p - 1.0)) * (eps / (6.0 * s)).powf(4.0 - 2.0 / p)
        }
    })
}

fn floor_at_least_one(v: f64) -> usize {
    if v.is_finite() && v >= 1.0 {
        v.floor() as usize
    } else if v.is_infinite() && v > 0.0 {
        usize::MAX
    } else {
        1
    }
}

pub fn outer_bound(variant: Variant, recovery: Recovery, eps: f64, consts: &ProblemConstants, r_d: f64) -> Result<usize> {
    check_inputs(eps, r_d)?;
    let s = consts.l_d * r_d * r_d;
    let v = match (recovery, variant) {
        (Recovery::Average, Variant::Idgm) => 8.0 * s / eps,
        (Recovery::Average, Variant::Idfgm) => (32.0 * s / eps).sqrt(),
        (Recovery::LastIterate, _) => {
            let p = variant.p_theta() as f64;
            alpha(consts, r_d, variant.p_theta())? * (6.0 * s / eps).powf(2.0 / p)
        }
    };
    Ok(floor_at_least_one(v))
}

/// Total box projections over the whole run. Never below [`outer_bound`],
/// since every outer iteration projects at least once.
pub fn total_projection_bound(
    variant: Variant,
    recovery: Recovery,
    eps: f64,
    consts: &ProblemConstants,
    r_d: f64,
) -> Result<usize> {
    check_inputs(eps, r_d)?;
    let r_p = consts.r_p;
    if !r_p.is_finite() {
        return Err(Error::RequiresCompactBox {
            what: "total projection bound",
        });
    }
    let kappa = (consts.l_f / consts.sigma_f).sqrt();
    let (lf, ld) = (consts.l_f, consts.l_d);
    let s = ld * r_d * r_d;
    let v = match (recovery, variant) {
        (Recovery::Average, Variant::Idgm) => 8.0 * kappa * (s / eps) * (lf * r_p * r_p / eps).ln(),
        (Recovery::Average, Variant::Idfgm) => {
            kappa * (32.0 * s / eps).sqrt() * (4.0 * ld.sqrt() * lf * r_p * r_p * r_d / eps.powf(1.5)).ln()
        }
        (Recovery::LastIterate, _) => {
            let p = variant.p_theta() as f64;
            let a = alpha(consts, r_d, variant.p_theta())?;
            let base = 6.0 * s / eps;
            kappa * base.powf(2.0 / p) * ((4.0 - 2.0 / p) * base.ln() + (lf * r_p * r_p * a.powf(p - 1.0) / s).ln())
        }
    };
    let outer = outer_bound(variant, recovery, eps, consts, r_d)?;
    Ok(floor_at_least_one(v).max(outer))
}

/// Bundles delta, alpha and both bounds. `r_d` defaults to the constants'
/// `max{1, 1/c_g, L_f/c_g}`. The total bound is `None` when the box is not
/// compact.
pub fn certificate(
    consts: &ProblemConstants,
    variant: Variant,
    recovery: Recovery,
    eps: f64,
    r_d: Option<f64>,
) -> Result<Certificate> {
    let r_d = r_d.unwrap_or(consts.r_d_default);
    let delta = delta_rule(variant, recovery, eps, consts, r_d)?;
    let alpha = alpha_for(variant, recovery, consts, r_d)?;
    let outer_bound = outer_bound(variant, recovery, eps, consts, r_d)?;
    let total_projection_bound = match total_projection_bound(variant, recovery, eps, consts, r_d) {
        Ok(t) => Some(t),
        Err(Error::RequiresCompactBox { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(Certificate {
        variant,
        recovery,
        eps,
        delta,
        alpha,
        outer_bound,
        total_projection_bound,
        r_d_used: r_d,
        r_p_used: consts.r_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inner::inner_iteration_bound;
    use approx::assert_relative_eq;

    fn unit() -> ProblemConstants {
        ProblemConstants {
            sigma_f: 1.0,
            l_f: 1.0,
            c_g: 1.0,
            g_norm: 1.0,
            l_d: 1.0,
            lbar_f: 1.0,
            r_p: 1.0,
            r_d_default: 1.0,
        }
    }

    const PAIRS: [(Variant, Recovery); 4] = [
        (Variant::Idgm, Recovery::Average),
        (Variant::Idfgm, Recovery::Average),
        (Variant::Idgm, Recovery::LastIterate),
        (Variant::Idfgm, Recovery::LastIterate),
    ];

    #[test]
    fn delta_examples() {
        let c = unit();
        assert_relative_eq!(delta_rule(Variant::Idgm, Recovery::Average, 0.01, &c, 1.0).unwrap(), 0.01 / 3.0);
        assert_relative_eq!(
            delta_rule(Variant::Idfgm, Recovery::Average, 0.01, &c, 1.0).unwrap(),
            1.25e-4,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            delta_rule(Variant::Idgm, Recovery::LastIterate, 0.06, &c, 1.0).unwrap(),
            5e-5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn alpha_examples() {
        let mut c = unit();
        assert_eq!(alpha(&c, 1.0, 1).unwrap(), 1.0);
        c.lbar_f = 4.0;
        assert_relative_eq!(alpha(&c, 1.0, 1).unwrap(), 16.0, max_relative = 1e-12);
        assert_relative_eq!(alpha(&c, 1.0, 2).unwrap(), 4.0, max_relative = 1e-12);
        c.lbar_f = f64::INFINITY;
        assert!(matches!(alpha(&c, 1.0, 1), Err(Error::RequiresCompactBox { .. })));
    }

    #[test]
    fn outer_examples() {
        let c = unit();
        assert_eq!(outer_bound(Variant::Idgm, Recovery::Average, 0.01, &c, 1.0).unwrap(), 800);
        assert_eq!(outer_bound(Variant::Idfgm, Recovery::Average, 0.01, &c, 1.0).unwrap(), 56);
        assert_eq!(outer_bound(Variant::Idfgm, Recovery::LastIterate, 0.01, &c, 1.0).unwrap(), 600);
    }

    #[test]
    fn total_projection_example() {
        let c = unit();
        let eps = (-1f64).exp();
        assert_eq!(total_projection_bound(Variant::Idgm, Recovery::Average, eps, &c, 1.0).unwrap(), 21);
    }

    #[test]
    fn total_is_outer_times_inner_for_fast_average() {
        let mut c = unit();
        c.l_f = 9.0;
        c.l_d = 2.5;
        c.r_p = 7.0;
        for &eps in &[1e-1, 1e-2, 1e-3, 1e-4] {
            let rd = 3.0;
            let delta = delta_rule(Variant::Idfgm, Recovery::Average, eps, &c, rd).unwrap();
            let outer = ((32.0 * c.l_d * rd * rd / eps) as f64).sqrt();
            let per = (c.l_f / c.sigma_f).sqrt() * (c.l_f * c.r_p * c.r_p / (2.0 * delta)).ln();
            let total = total_projection_bound(Variant::Idfgm, Recovery::Average, eps, &c, rd).unwrap();
            assert!(((outer * per).floor() - total as f64).abs() <= 1.0);
            // per-iteration inner bound agrees with the inner module up to the floor
            let nd = inner_iteration_bound(delta, c.r_p, c.l_f, c.sigma_f).unwrap() as f64;
            assert!((nd - per.floor()).abs() < 1.0);
        }
    }

    #[test]
    fn bounds_monotone_in_eps() {
        let mut c = unit();
        c.l_f = 4.0;
        c.r_p = 20.0;
        c.lbar_f = 3.0;
        for (v, r) in PAIRS {
            let mut prev_o = usize::MAX;
            let mut prev_t = usize::MAX;
            for e in 1..=40 {
                let eps = 10f64.powf(-4.0 + 0.1 * e as f64);
                let o = outer_bound(v, r, eps, &c, 2.0).unwrap();
                let t = total_projection_bound(v, r, eps, &c, 2.0).unwrap();
                assert!(o <= prev_o && t <= prev_t, "{v:?} {r:?} eps={eps}");
                prev_o = o;
                prev_t = t;
            }
        }
    }

    fn slope(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        num / den
    }

    #[test]
    fn asymptotic_orders() {
        let c = unit();
        let eps: Vec<f64> = (0..=12).map(|i| 10f64.powf(-1.0 - 0.25 * i as f64)).collect();
        let le: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
        let inv: Vec<f64> = eps.iter().map(|e| -e.ln()).collect();
        for ((v, r), ds, os) in [
            ((Variant::Idgm, Recovery::Average), 1.0, 1.0),
            ((Variant::Idfgm, Recovery::Average), 1.5, 0.5),
            ((Variant::Idgm, Recovery::LastIterate), 2.0, 2.0),
            ((Variant::Idfgm, Recovery::LastIterate), 3.0, 1.0),
        ] {
            let d: Vec<f64> = eps.iter().map(|&e| delta_rule(v, r, e, &c, 1.0).unwrap().ln()).collect();
            let o: Vec<f64> = eps.iter().map(|&e| (outer_bound(v, r, e, &c, 1.0).unwrap() as f64).ln()).collect();
            assert!((slope(&le, &d) - ds).abs() <= 0.05, "{v:?} {r:?} delta slope {}", slope(&le, &d));
            assert!((slope(&inv, &o) - os).abs() <= 0.05, "{v:?} {r:?} outer slope {}", slope(&inv, &o));
        }
    }

    #[test]
    fn certificate_without_compact_box() {
        let mut c = unit();
        c.r_p = f64::INFINITY;
        c.lbar_f = f64::INFINITY;
        let cert = certificate(&c, Variant::Idgm, Recovery::Average, 0.01, None).unwrap();
        assert_eq!(cert.total_projection_bound, None);
        assert_eq!(cert.outer_bound, 800);
        let json = serde_json::to_string(&cert).unwrap();
        assert!(json.contains("\"unavailable\""));
        assert!(json.contains("\"r_p_used\":null"));
        assert!(certificate(&c, Variant::Idgm, Recovery::LastIterate, 0.01, None).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = unit();
        assert!(delta_rule(Variant::Idgm, Recovery::Average, 0.0, &c, 1.0).is_err());
        assert!(outer_bound(Variant::Idgm, Recovery::Average, 0.1, &c, -1.0).is_err());
    }
}
