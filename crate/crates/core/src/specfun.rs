//! Complex Airy function `Ai`, its derivative, and the tail integral
//! `A0(z) = ∫_{e^{iπ/6}z}^∞ Ai(t) dt`.
//!
//! Evaluation strategy, for `Im z ≥ 0` (the lower half-plane follows by conjugation):
//! - `|z| ≥ R_ASY`: Poincaré asymptotic expansions, with the connection formula
//!   `Ai(z) = −ω Ai(ωz) − ω² Ai(ω²z)` when `|arg z| > 2π/3`.
//! - `|z| < R_ASY` in the sector where `Ai` is recessive: high-order Taylor steps of the
//!   Airy ODE, integrated inward from the asymptotic value on the circle `|z| = R_ASY`
//!   (the inward direction is the stable one for the recessive solution).
//! - elsewhere inside the disc: Maclaurin series, or the connection formula near the
//!   negative real axis where the series loses digits.
//!
//! The tail integral `I(t) = ∫_t^∞ Ai` follows the same split, using `I′ = −Ai`,
//! `I(0) = 1/3`, its own asymptotic series and `I(t) = 1 − I(ωt) − I(ω²t)`.

use std::f64::consts::{FRAC_PI_3, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::EstimateReport;

/// `Ai(0)`.
pub const AI0: f64 = 0.355_028_053_887_817_239_26;
/// `Ai′(0)`.
pub const AIP0: f64 = -0.258_819_403_792_806_798_41;

/// Radius beyond which the asymptotic expansions are used.
pub const R_ASY: f64 = 8.0;
/// Inner radius below which the Maclaurin series is accurate in every direction.
const R_SERIES: f64 = 2.0;
/// Half-opening of the sector handled by inward ODE integration.
const THETA_RAY: f64 = 1.273_7;
/// Beyond this argument the connection formula replaces the Maclaurin series.
const THETA_CONNECT: f64 = 2.915;
/// Largest accepted modulus.
pub const Z_MAX: f64 = 1e4;
/// Largest exponent accepted before reporting overflow.
const EXP_LIMIT: f64 = 700.0;

const INV_2SQRT_PI: f64 = 0.282_094_791_773_878_14;

/// Evaluation branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AiryMethod {
    Series,
    Asymptotic,
}

/// One evaluated point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirySample {
    pub z: Complex64,
    pub ai: Complex64,
    pub ai_prime: Complex64,
    pub a0: Complex64,
    pub method: AiryMethod,
}

fn omega() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * FRAC_PI_3)
}

/// Principal `(2/3) z^{3/2}`.
pub fn xi_of(z: Complex64) -> Complex64 {
    z.powf(1.5) * (2.0 / 3.0)
}

/// Values `(Ai, Ai′, I)` scaled by `e^{ξ}` with `ξ = (2/3)z^{3/2}`.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    ai: Complex64,
    aip: Complex64,
    int: Complex64,
}

/// Taylor coefficients of `Ai` about `z0` applied at offset `h`; returns the values at
/// `z0 + h` and the integral `∫_{z0}^{z0+h} Ai`.
fn taylor_step(z0: Complex64, a: Complex64, ap: Complex64, h: Complex64) -> (Complex64, Complex64, Complex64) {
    if h.norm() == 0.0 {
        return (a, ap, Complex64::new(0.0, 0.0));
    }
    let mut c = [Complex64::new(0.0, 0.0); 3];
    c[0] = a;
    c[1] = ap;
    c[2] = z0 * a * 0.5;
    let mut hp = Complex64::new(1.0, 0.0);
    let mut val = Complex64::new(0.0, 0.0);
    let mut der = Complex64::new(0.0, 0.0);
    let mut int = Complex64::new(0.0, 0.0);
    let scale = a.norm() + ap.norm() * h.norm() + 1e-300;
    let mut small = 0;
    // c_{k+2} = (z0 c_k + c_{k−1}) / ((k+2)(k+1)); keep a rolling window of three
    let mut window = c;
    for k in 0..400usize {
        let ck = window[0];
        if k >= 1 {
            der += ck * (k as f64) * (hp / h);
        }
        val += ck * hp;
        int += ck * hp * h / ((k + 1) as f64);
        let mag = (ck * hp).norm();
        if mag < 1e-18 * (scale + val.norm()) {
            small += 1;
            if small >= 3 && k > 4 {
                break;
            }
        } else {
            small = 0;
        }
        hp *= h;
        // advance: window = [c_{k+1}, c_{k+2}, c_{k+3}]
        let kk = (k + 1) as f64;
        let next = (z0 * window[1] + window[0]) / ((kk + 2.0) * (kk + 1.0));
        window = [window[1], window[2], next];
    }
    (val, der, int)
}

fn maclaurin(z: Complex64) -> (Complex64, Complex64, Complex64) {
    let (a, ap, int) = taylor_step(Complex64::new(0.0, 0.0), Complex64::new(AI0, 0.0), Complex64::new(AIP0, 0.0), z);
    (a, ap, Complex64::new(1.0 / 3.0, 0.0) - int)
}

/// Asymptotic `(Ai, Ai′, I)·e^{ξ}` for `|arg z| ≤ 2π/3`.
fn asymptotic_principal(z: Complex64) -> Scaled {
    let xi = xi_of(z);
    let ixi = xi.inv();
    let z14 = z.powf(0.25);
    let z34 = z.powf(0.75);
    // u_k, v_k and the tail-integral coefficients ũ_m = Σ_k u_k (1/2+k)_{m−k}
    let mut u = vec![1.0f64];
    let mut sum_u = Complex64::new(1.0, 0.0);
    let mut sum_v = Complex64::new(1.0, 0.0);
    let mut sum_t = Complex64::new(1.0, 0.0);
    let mut pw = Complex64::new(1.0, 0.0);
    let mut last_u = f64::INFINITY;
    let mut last_v = f64::INFINITY;
    let mut last_t = f64::INFINITY;
    let (mut done_u, mut done_v, mut done_t) = (false, false, false);
    for k in 1..60usize {
        let kf = k as f64;
        let uk = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        u.push(uk);
        let vk = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * uk;
        let mut tk = 0.0;
        for (j, &uj) in u.iter().enumerate().take(k + 1) {
            let mut poch = 1.0;
            for i in 0..(k - j) {
                poch *= 0.5 + j as f64 + i as f64;
            }
            tk += uj * poch;
        }
        pw *= -ixi;
        let (tu, tv, tt) = (pw * uk, pw * vk, pw * tk);
        // optimal truncation: stop each series when its terms stop decreasing
        if !done_u {
            if tu.norm() < last_u {
                sum_u += tu;
                last_u = tu.norm();
                done_u = last_u < 1e-17 * sum_u.norm();
            } else {
                done_u = true;
            }
        }
        if !done_v {
            if tv.norm() < last_v {
                sum_v += tv;
                last_v = tv.norm();
                done_v = last_v < 1e-17 * sum_v.norm();
            } else {
                done_v = true;
            }
        }
        if !done_t {
            if tt.norm() < last_t {
                sum_t += tt;
                last_t = tt.norm();
                done_t = last_t < 1e-17 * sum_t.norm();
            } else {
                done_t = true;
            }
        }
        if done_u && done_v && done_t {
            break;
        }
    }
    Scaled {
        ai: sum_u * INV_2SQRT_PI / z14,
        aip: -sum_v * z14 * INV_2SQRT_PI,
        int: sum_t * INV_2SQRT_PI / z34,
    }
}

/// Inward Taylor integration from the asymptotic circle to `z` along the ray through `z`.
fn ray_inward(z: Complex64, r_start: f64) -> Scaled {
    let dir = z / z.norm();
    let za = dir * r_start;
    let s = asymptotic_principal(za);
    let xa = xi_of(za);
    let ea = (-xa).exp();
    let mut a = s.ai * ea;
    let mut ap = s.aip * ea;
    let mut int = s.int * ea;
    let steps = ((r_start - z.norm()) / 0.5).ceil().max(1.0) as usize;
    let h = (z - za) / steps as f64;
    let mut z0 = za;
    for _ in 0..steps {
        let (a1, ap1, i1) = taylor_step(z0, a, ap, h);
        // I(z0 + h) = I(z0) − ∫_{z0}^{z0+h} Ai
        int -= i1;
        a = a1;
        ap = ap1;
        z0 += h;
    }
    let e = xi_of(z).exp();
    Scaled { ai: a * e, aip: ap * e, int: int * e }
}

/// Scaled pair for `Im z ≥ 0`, choosing the branch.
fn scaled_upper(z: Complex64, force: Option<AiryMethod>) -> (Scaled, AiryMethod) {
    let r = z.norm();
    let th = z.arg();
    let method = force.unwrap_or(if r >= R_ASY { AiryMethod::Asymptotic } else { AiryMethod::Series });
    if r == 0.0 {
        let s = Scaled { ai: Complex64::new(AI0, 0.0), aip: Complex64::new(AIP0, 0.0), int: Complex64::new(1.0 / 3.0, 0.0) };
        return (s, AiryMethod::Series);
    }
    let s = match method {
        AiryMethod::Asymptotic => {
            if th <= 2.0 * FRAC_PI_3 {
                asymptotic_principal(z)
            } else {
                connect(z, asymptotic_principal)
            }
        }
        AiryMethod::Series => {
            if r <= R_SERIES || (th > THETA_RAY && th <= THETA_CONNECT) {
                let (a, ap, i) = maclaurin(z);
                let e = xi_of(z).exp();
                Scaled { ai: a * e, aip: ap * e, int: i * e }
            } else if th <= THETA_RAY {
                ray_inward(z, R_ASY.max(1.1 * r))
            } else {
                connect(z, |w| ray_inward(w, R_ASY.max(1.1 * w.norm())))
            }
        }
    };
    (s, method)
}

/// Radius beyond which the tail-integral asymptotic series is used. Its optimally truncated
/// remainder is of relative size `e^{−|ξ|}`, which needs `|t| ≳ 12` for ten digits.
const R_TAIL: f64 = 16.0;

/// `I(t)·e^{ξ(t)}` for `Im t ≥ 0`.
fn tail_scaled_upper(t: Complex64) -> Complex64 {
    let r = t.norm();
    let th = t.arg();
    if r <= R_SERIES {
        let (_, _, i) = maclaurin(t);
        return i * xi_of(t).exp();
    }
    if r >= R_TAIL {
        return if th <= 2.0 * FRAC_PI_3 {
            asymptotic_principal(t).int
        } else {
            connect(t, asymptotic_principal).int
        };
    }
    if th <= FRAC_PI_3 {
        // recessive or neutral direction: integrate inward from the asymptotic circle
        ray_inward(t, R_TAIL).int
    } else if th <= 2.0 * FRAC_PI_3 {
        // Ai grows along the ray, so outward stepping from the origin is stable
        let steps = (r / 0.5).ceil() as usize;
        let h = t / steps as f64;
        let mut a = Complex64::new(AI0, 0.0);
        let mut ap = Complex64::new(AIP0, 0.0);
        let mut int = Complex64::new(1.0 / 3.0, 0.0);
        let mut z0 = Complex64::new(0.0, 0.0);
        for _ in 0..steps {
            let (a1, ap1, i1) = taylor_step(z0, a, ap, h);
            int -= i1;
            a = a1;
            ap = ap1;
            z0 += h;
        }
        int * xi_of(t).exp()
    } else {
        let w = omega();
        let xi = xi_of(t);
        // I(t) = 1 − I(ωt) − I(ω²t), with ξ(ωt) = ξ and ξ(ω²t) = −ξ on this sector
        let i1 = tail_scaled_signed(t * w);
        let i2 = tail_scaled_signed(t * w * w);
        xi.exp() - i1 - (xi * 2.0).exp() * i2
    }
}

fn tail_scaled_signed(t: Complex64) -> Complex64 {
    if t.im >= 0.0 {
        tail_scaled_upper(t)
    } else {
        tail_scaled_upper(t.conj()).conj()
    }
}

/// Connection formula for `2π/3 < arg z ≤ π`, in scaled form. With `ξ = ξ(z)` one has
/// `ξ(ωz) = ξ` and `ξ(ω²z) = −ξ` on this sector.
fn connect(z: Complex64, eval: impl Fn(Complex64) -> Scaled) -> Scaled {
    let w = omega();
    let w2 = w * w;
    let s1 = eval(z * w);
    let s2 = eval(z * w2);
    let e2 = (xi_of(z) * 2.0).exp();
    Scaled {
        ai: -w * s1.ai - w2 * e2 * s2.ai,
        aip: -w2 * s1.aip - w * e2 * s2.aip,
        // I(z) = 1 − I(ωz) − I(ω²z)
        int: xi_of(z).exp() - s1.int - e2 * s2.int,
    }
}

fn check_arg(z: Complex64) -> Result<()> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(format!("non-finite Airy argument {z}")));
    }
    if z.norm() > Z_MAX {
        return Err(Error::Domain(format!("|z| = {:.3e} exceeds {Z_MAX:.0e}; use the scaled variant", z.norm())));
    }
    Ok(())
}

fn scaled_triple(z: Complex64, force: Option<AiryMethod>) -> (Scaled, AiryMethod) {
    if z.im >= 0.0 {
        scaled_upper(z, force)
    } else {
        let (s, m) = scaled_upper(z.conj(), force);
        (Scaled { ai: s.ai.conj(), aip: s.aip.conj(), int: s.int.conj() }, m)
    }
}

/// `(Ai(z), Ai′(z))`. Overflow in the growing sector is reported as an error.
pub fn airy(z: Complex64) -> Result<(Complex64, Complex64)> {
    airy_with(z, None).map(|s| (s.ai, s.ai_prime))
}

/// Full sample with an optional forced branch (used to compare branches on their overlap).
pub fn airy_with(z: Complex64, force: Option<AiryMethod>) -> Result<AirySample> {
    check_arg(z)?;
    let (s, method) = scaled_triple(z, force);
    let xi = xi_of(z);
    if -xi.re > EXP_LIMIT {
        return Err(Error::Overflow(format!("Ai({z}) exceeds the double range (Re ξ = {:.1})", xi.re)));
    }
    let e = (-xi).exp();
    Ok(AirySample { z, ai: s.ai * e, ai_prime: s.aip * e, a0: Complex64::new(f64::NAN, f64::NAN), method })
}

/// `(Ai(z)e^{ξ}, Ai′(z)e^{ξ})` with `ξ = (2/3)z^{3/2}` (principal branch).
pub fn airy_scaled(z: Complex64) -> Result<(Complex64, Complex64)> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(format!("non-finite Airy argument {z}")));
    }
    let (s, _) = scaled_triple(z, None);
    Ok((s.ai, s.aip))
}

/// `I(t) = ∫_t^∞ Ai(s) ds` along a path ending in the decay direction.
pub fn airy_tail_integral(t: Complex64) -> Result<Complex64> {
    check_arg(t)?;
    let xi = xi_of(t);
    if -xi.re > EXP_LIMIT {
        return Err(Error::Domain(format!("tail integral at {t} overflows in the growth sector")));
    }
    Ok(tail_scaled_signed(t) * (-xi).exp())
}

/// `A0(z) = ∫_{e^{iπ/6}z}^∞ Ai(t) dt`.
///
/// The integral converges for every `z` because the contour can always be closed into the
/// decay sector; only exponential overflow (deep in the growth sector) is refused.
pub fn a0(z: Complex64) -> Result<Complex64> {
    airy_tail_integral(rot(z))
}

/// `(A0, A0′, A0″)` with `A0′(z) = −e^{iπ/6}Ai(e^{iπ/6}z)` and `A0″(z) = −e^{iπ/3}Ai′(e^{iπ/6}z)`.
pub fn a0_with_derivatives(z: Complex64) -> Result<(Complex64, Complex64, Complex64)> {
    let t = rot(z);
    let v = airy_tail_integral(t)?;
    let (ai, aip) = airy(t)?;
    let e6 = Complex64::from_polar(1.0, PI / 6.0);
    Ok((v, -e6 * ai, -e6 * e6 * aip))
}

fn rot(z: Complex64) -> Complex64 {
    z * Complex64::from_polar(1.0, PI / 6.0)
}

/// Ratio checks of the tail integral on the strip `Im z ≤ δ`:
/// `|A0′/A0| ≲ 1+|z|^{1/2}`, `Re A0′/A0 ≤ −c(1+|z|^{1/2})` (and `≤ −1/3`), `|A0″/A0| ≲ 1+|z|`.
/// Returns three reports whose `ratio` is the fitted constant (for the real-part bound the
/// ratio is `1/c`), each carrying the arg-max sample.
pub fn check_airy_ratio_bounds(samples: &[Complex64], delta: f64) -> Result<Vec<EstimateReport>> {
    for (i, z) in samples.iter().enumerate() {
        if z.im > delta {
            return Err(Error::Domain(format!("sample {i} ({z}) violates Im z ≤ {delta}")));
        }
    }
    let mut best = [(0.0f64, 0.0f64, 0.0f64, Complex64::new(0.0, 0.0)); 3];
    let mut max_re = f64::NEG_INFINITY;
    for (i, &z) in samples.iter().enumerate() {
        let (v, d1, d2) = a0_with_derivatives(z)?;
        if v.norm() < 1e-280 {
            return Err(Error::Domain(format!("sample {i} ({z}) is at a numerical zero of A0")));
        }
        let q1 = d1 / v;
        let q2 = d2 / v;
        let s = 1.0 + z.norm().sqrt();
        max_re = max_re.max(q1.re);
        let entries = [(q1.norm(), s), (s, (-q1.re).max(0.0)), (q2.norm(), 1.0 + z.norm())];
        for (k, (lhs, rhs)) in entries.into_iter().enumerate() {
            let ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
            if i == 0 || ratio > best[k].0 {
                best[k] = (ratio, lhs, rhs, z);
            }
        }
    }
    let ids = ["airy-ratio-abs", "airy-ratio-re", "airy-ratio-second"];
    Ok(ids
        .iter()
        .zip(best.iter())
        .map(|(id, &(_, lhs, rhs, z))| {
            let params = serde_json::json!({
                "argmax_re": z.re, "argmax_im": z.im, "samples": samples.len(),
                "sector_height": delta, "max_re_ratio": max_re,
            });
            EstimateReport::new(id, lhs, rhs, params, samples.len())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn values_at_origin_and_one() {
        let (a, ap) = airy(c(0.0, 0.0)).unwrap();
        assert!((a.re - 0.3550280538878172).abs() < 1e-15);
        assert!((ap.re - -0.2588194037928068).abs() < 1e-15);
        let (a1, _) = airy(c(1.0, 0.0)).unwrap();
        assert!((a1.re - 0.1352924163128814).abs() < 1e-13, "{a1}");
        assert!((a0(c(0.0, 0.0)).unwrap() - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn known_real_values() {
        // Ai(5), Ai(−5), Ai′(−5) and Ai(10)
        let cases = [
            (5.0, 1.083_444_281_360_744_3e-4),
            (-5.0, 0.350_761_009_024_114_3),
            (10.0, 1.104_753_255_289_868_8e-10),
            (-10.0, 0.040_241_238_486_441_955),
        ];
        for (x, v) in cases {
            let (a, _) = airy(c(x, 0.0)).unwrap();
            assert!((a.re - v).abs() < 1e-10 * v.abs().max(1e-3), "Ai({x}) = {} vs {v}", a.re);
        }
    }

    #[test]
    fn branches_agree_on_overlap() {
        for k in 0..48 {
            let th = -PI + 2.0 * PI * (k as f64 + 0.5) / 48.0;
            for r in [0.9 * R_ASY, R_ASY, 1.1 * R_ASY] {
                let z = Complex64::from_polar(r, th);
                let s = airy_with(z, Some(AiryMethod::Series)).unwrap();
                let a = airy_with(z, Some(AiryMethod::Asymptotic)).unwrap();
                assert!(rel(s.ai, a.ai) < 1e-10, "Ai at {z}: {} vs {}", s.ai, a.ai);
                assert!(rel(s.ai_prime, a.ai_prime) < 1e-10, "Ai′ at {z}");
            }
        }
    }

    #[test]
    fn ode_residual_by_finite_differences() {
        for &z in &[c(0.3, 0.2), c(-3.0, 1.0), c(4.0, -2.5), c(7.9, 0.5), c(-8.5, -0.1), c(12.0, 6.0)] {
            let h = 1e-4;
            let (_, p1) = airy(z + h).unwrap();
            let (_, m1) = airy(z - h).unwrap();
            let (a, ap) = airy(z).unwrap();
            let second = (p1 - m1) / (2.0 * h);
            let scale = a.norm().max(ap.norm());
            assert!((second - z * a).norm() < 1e-6 * (1.0 + z.norm()) * scale, "z = {z}");
        }
    }

    #[test]
    fn tail_integral_derivative_identity() {
        let z = c(1.0, 0.5);
        let h = 1e-5;
        let fd = (a0(z + h).unwrap() - a0(z - h).unwrap()) / (2.0 * h);
        let (_, d1, _) = a0_with_derivatives(z).unwrap();
        assert!((fd - d1).norm() < 1e-9, "{fd} vs {d1}");
    }

    #[test]
    fn tail_integral_consistent_across_branches() {
        // I(zo) − I(zi) = −∫_{zi}^{zo} Ai, with Simpson's rule on a short radial segment
        for rad in [R_SERIES, R_TAIL] {
            for k in 0..24 {
                let th = -PI + 2.0 * PI * (k as f64 + 0.5) / 24.0;
                let zi = Complex64::from_polar(rad * (1.0 - 1e-4), th);
                let zo = Complex64::from_polar(rad * (1.0 + 1e-4), th);
                let zm = (zi + zo) * 0.5;
                let ai = |z| airy(z).unwrap().0;
                let quad = (zo - zi) / 6.0 * (ai(zi) + ai(zm) * 4.0 + ai(zo));
                let diff = airy_tail_integral(zo).unwrap() - airy_tail_integral(zi).unwrap() + quad;
                let scale = airy_tail_integral(zm).unwrap().norm();
                assert!(diff.norm() < 1e-10 * scale.max(1e-3), "r = {rad}, θ = {th}: {diff}");
            }
        }
    }

    #[test]
    fn overflow_is_explicit() {
        assert!(matches!(airy(c(-0.0, 0.0) + Complex64::from_polar(200.0, 2.0 * FRAC_PI_3)), Err(Error::Overflow(_))));
        assert!(airy(c(2e4, 0.0)).is_err());
        assert!(airy_scaled(Complex64::from_polar(200.0, 2.0 * FRAC_PI_3)).is_ok());
    }

    #[test]
    fn ratio_bounds_at_origin() {
        let r = check_airy_ratio_bounds(&[c(0.0, 0.0)], 0.1).unwrap();
        assert_eq!(r.len(), 3);
        let q = -3.0 * AI0 * (PI / 6.0).cos();
        assert!((r[1].rhs_shape - (-q)).abs() < 1e-12);
        assert!((q - -0.9224).abs() < 1e-4);
        assert!(matches!(check_airy_ratio_bounds(&[c(0.0, 0.5)], 0.1), Err(Error::Domain(_))));
    }
}
