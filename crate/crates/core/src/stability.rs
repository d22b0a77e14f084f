//! Linear stability of 2x2 reaction-diffusion kinetics.
//!
//! Two notions of "the linear part is stable" are kept apart here: the
//! spectral abscissa `max Re eig(M)` and the numerical abscissa
//! `lambda_max((M + M^T)/2)`. Only the second bounds the quadratic form
//! `(M u, u)`, and it can be positive while the first is negative.
//!
//! For the Turing analysis the mode `p sin(k x) e^{lambda t}` reduces the
//! linearized system to the eigenproblem of
//!
//! ```text
//! M(k) = | a - d1 k^2      b        |
//!        |     c       d - d2 k^2   |
//! ```

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::grid::{BoundaryCondition, Field, Grid1D};
use crate::profiles::{KineticsSpec, LinearPart, TimeProfile};
use crate::solver::{simulate, Scheme, SimOptions, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.a, self.b, self.c, self.d] {
            ensure_finite("matrix entry", v)?;
        }
        Ok(())
    }

    /// Spectral norm, `sqrt(lambda_max(M^T M))`.
    pub fn operator_norm(&self) -> f64 {
        let p = self.a * self.a + self.c * self.c;
        let r = self.b * self.b + self.d * self.d;
        let q = self.a * self.b + self.c * self.d;
        let mid = 0.5 * (p + r);
        let rad = (0.5 * (p - r)).hypot(q);
        (mid + rad).max(0.0).sqrt()
    }
}

/// Eigenvalues of a 2x2 matrix, ordered by descending real part.
pub fn eig2(m: &Mat2) -> (Complex64, Complex64) {
    let half_tr = 0.5 * m.trace();
    // discriminant of lambda^2 - tr lambda + det, written to avoid cancellation
    let half_diff = 0.5 * (m.a - m.d);
    let disc = half_diff * half_diff + m.b * m.c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        let big = half_tr + r.copysign(half_tr);
        let (l1, l2) = if big != 0.0 {
            let small = m.det() / big;
            (big, small)
        } else {
            (r, -r)
        };
        let (hi, lo) = if l1 >= l2 { (l1, l2) } else { (l2, l1) };
        (Complex64::new(hi, 0.0), Complex64::new(lo, 0.0))
    } else {
        let im = (-disc).sqrt();
        (Complex64::new(half_tr, im), Complex64::new(half_tr, -im))
    }
}

/// `lambda_max((M + M^T)/2)`: the best `omega` with `(M u, u) <= omega |u|^2`.
pub fn numerical_abscissa(m: &Mat2) -> f64 {
    let off = 0.5 * (m.b + m.c);
    0.5 * (m.a + m.d) + (0.5 * (m.a - m.d)).hypot(off)
}

pub fn spectral_abscissa(m: &Mat2) -> f64 {
    eig2(m).0.re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Linearization2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Linearization2 {
    pub fn new(kinetics: Mat2, d1: f64, d2: f64) -> Result<Self> {
        kinetics.validate()?;
        ensure_finite("d1", d1)?;
        ensure_finite("d2", d2)?;
        if !(d1 > 0.0) || !(d2 > 0.0) {
            return Err(Error::invalid("diffusion", "d1 and d2 must be positive"));
        }
        Ok(Linearization2 {
            a: kinetics.a,
            b: kinetics.b,
            c: kinetics.c,
            d: kinetics.d,
            d1,
            d2,
        })
    }

    pub fn kinetics(&self) -> Mat2 {
        Mat2::new(self.a, self.b, self.c, self.d)
    }

    /// `det M(k)` from the expanded quartic in `k`.
    pub fn det_poly(&self, k: f64) -> f64 {
        let k2 = k * k;
        (self.a * self.d - self.b * self.c) - (self.a * self.d2 + self.d * self.d1) * k2
            + self.d1 * self.d2 * k2 * k2
    }

    pub fn trace_poly(&self, k: f64) -> f64 {
        self.a + self.d - (self.d1 + self.d2) * k * k
    }
}

pub fn m_of_k(lin: &Linearization2, k: f64) -> Mat2 {
    let k2 = k * k;
    Mat2::new(lin.a - lin.d1 * k2, lin.b, lin.c, lin.d - lin.d2 * k2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionPoint {
    pub k: f64,
    pub det: f64,
    pub trace: f64,
    pub lambda1: (f64, f64),
    pub lambda2: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibleMode {
    pub n: usize,
    pub k: f64,
    pub growth_rate: f64,
    pub in_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionReport {
    pub points: Vec<DispersionPoint>,
    pub max_growth_rate: f64,
    pub k_at_max_growth: f64,
    /// Open interval of wavenumbers with `det M(k) < 0`, from the closed-form roots.
    pub band: Option<(f64, f64)>,
    pub modes: Vec<AdmissibleMode>,
}

impl DispersionReport {
    pub fn is_stable(&self) -> bool {
        self.band.is_none()
    }
}

/// Real roots in `k^2` of `d1 d2 K^2 - (a d2 + d d1) K + (ad - bc) = 0`,
/// intersected with `K > 0`, returned as a band in `k`.
pub fn instability_band(lin: &Linearization2) -> Option<(f64, f64)> {
    let qa = lin.d1 * lin.d2;
    let qb = -(lin.a * lin.d2 + lin.d * lin.d1);
    let qc = lin.a * lin.d - lin.b * lin.c;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let big = -0.5 * (qb + s.copysign(qb));
    let (r1, r2) = if big != 0.0 {
        (big / qa, qc / big)
    } else {
        (-s / (2.0 * qa), s / (2.0 * qa))
    };
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    if hi <= 0.0 {
        return None;
    }
    Some((lo.max(0.0).sqrt(), hi.sqrt()))
}

/// Scans `k` uniformly over `(0, k_max]` and, when `length` is given, lists
/// the admissible Dirichlet modes `k_n = n pi / L <= k_max`.
pub fn dispersion_scan(
    lin: &Linearization2,
    k_max: f64,
    samples: usize,
    length: Option<f64>,
) -> Result<DispersionReport> {
    if samples < 2 {
        return Err(Error::invalid("samples", "need at least 2"));
    }
    if !(k_max > 0.0) || !k_max.is_finite() {
        return Err(Error::invalid("k_max", "must be positive"));
    }
    let band = instability_band(lin);
    let mut points = Vec::with_capacity(samples);
    let mut best = (f64::NEG_INFINITY, 0.0);
    for j in 1..=samples {
        let k = k_max * j as f64 / samples as f64;
        let m = m_of_k(lin, k);
        let (l1, l2) = eig2(&m);
        if l1.re > best.0 {
            best = (l1.re, k);
        }
        points.push(DispersionPoint {
            k,
            det: m.det(),
            trace: m.trace(),
            lambda1: (l1.re, l1.im),
            lambda2: (l2.re, l2.im),
        });
    }
    let mut modes = Vec::new();
    if let Some(len) = length {
        if !(len > 0.0) {
            return Err(Error::invalid("L", "must be positive"));
        }
        let mut n = 1;
        loop {
            let k = n as f64 * std::f64::consts::PI / len;
            if k > k_max {
                break;
            }
            let in_band = band.is_some_and(|(lo, hi)| k > lo && k < hi);
            modes.push(AdmissibleMode {
                n,
                k,
                growth_rate: eig2(&m_of_k(lin, k)).0.re,
                in_band,
            });
            n += 1;
        }
    }
    Ok(DispersionReport {
        points,
        max_growth_rate: best.0,
        k_at_max_growth: best.1,
        band,
        modes,
    })
}

/// Default scan range: twice the larger of the band edge and `10 pi / L`.
pub fn default_k_max(lin: &Linearization2, length: f64) -> f64 {
    let edge = instability_band(lin).map_or(0.0, |b| b.1);
    2.0 * edge.max(std::f64::consts::PI * 10.0 / length)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuringConditions {
    pub trace_negative: bool,
    pub det_positive: bool,
    pub band_nonempty: bool,
    /// `Tr M(k) < 0` throughout the band, so the crossing eigenvalue is real.
    pub trace_negative_on_band: bool,
}

impl TuringConditions {
    pub fn kinetics_stable(&self) -> bool {
        self.trace_negative && self.det_positive
    }

    pub fn turing_unstable(&self) -> bool {
        self.kinetics_stable() && self.band_nonempty
    }
}

pub fn turing_conditions(lin: &Linearization2) -> TuringConditions {
    let band = instability_band(lin);
    let trace_negative_on_band = match band {
        // trace is decreasing in k, so its maximum over the band is at the lower edge
        Some((lo, _)) => lin.trace_poly(lo) < 0.0,
        None => false,
    };
    TuringConditions {
        trace_negative: lin.a + lin.d < 0.0,
        det_positive: lin.a * lin.d - lin.b * lin.c > 0.0,
        band_nonempty: band.is_some(),
        trace_negative_on_band,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalD1 {
    pub d1: f64,
    /// `d det M(k) / d d1 = k^2 (d2 k^2 - d)`; instability lies on the side
    /// where `det < 0`, i.e. below `d1` when this is positive.
    pub det_slope: f64,
}

/// The `d1` at which `det M(k) = 0` for the given kinetics, `d2` and `k`.
pub fn critical_d1(kinetics: &Mat2, d2: f64, k: f64) -> Result<CriticalD1> {
    if !(k > 0.0) {
        return Err(Error::invalid("k", "must be positive"));
    }
    let k2 = k * k;
    let slope = k2 * (d2 * k2 - kinetics.d);
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::Degenerate(format!(
            "det M(k) does not depend on d1 at k = {k} (d2 k^2 = d)"
        )));
    }
    let d1 = (kinetics.a * d2 * k2 - kinetics.det()) / slope;
    Ok(CriticalD1 {
        d1,
        det_slope: slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthRateParams {
    pub n_nodes: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Fit window as fractions of `t_end`.
    pub window: (f64, f64),
    pub amplitude: f64,
}

impl Default for GrowthRateParams {
    fn default() -> Self {
        GrowthRateParams {
            n_nodes: 200,
            dt: 1e-3,
            t_end: 4.0,
            window: (0.25, 1.0),
            amplitude: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRate {
    pub measured: f64,
    pub predicted: f64,
    pub k: f64,
}

impl GrowthRate {
    pub fn relative_error(&self) -> f64 {
        (self.measured - self.predicted).abs() / self.predicted.abs()
    }
}

/// Simulates the linearized system on `(0, L)` with Dirichlet ends, seeded
/// with mode `n` along the leading eigenvector of `M(k_n)`, and fits the
/// slope of `log g(t)` over the window.
pub fn growth_rate_experiment(
    lin: &Linearization2,
    length: f64,
    mode: usize,
    params: &GrowthRateParams,
) -> Result<GrowthRate> {
    if mode == 0 || params.amplitude == 0.0 {
        return Err(Error::Degenerate(
            "zero perturbation: the trajectory stays at zero and has no growth rate".into(),
        ));
    }
    let k = mode as f64 * std::f64::consts::PI / length;
    let m = m_of_k(lin, k);
    let (l1, _) = eig2(&m);
    let (p1, p2) = leading_direction(&m, l1);

    let grid = Grid1D::new(length, params.n_nodes, BoundaryCondition::Dirichlet)?;
    let initial = Field::from_fn(&grid, 2, |i, x| {
        let s = (k * x).sin();
        params.amplitude * if i == 0 { p1 * s } else { p2 * s }
    });
    let kinetics = KineticsSpec::linear(2, LinearPart::Matrix(lin.kinetics()));
    let sys = SystemSpec::new(
        kinetics,
        vec![TimeProfile::constant(lin.d1), TimeProfile::constant(lin.d2)],
        initial,
    )?;
    let opts = SimOptions {
        t_end: params.t_end,
        dt: params.dt,
        record_every: usize::MAX,
        scheme: Scheme::TwoStage,
    };
    let traj = simulate(&sys, &opts)?;
    let (lo, hi) = (params.window.0 * params.t_end, params.window.1 * params.t_end);
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.norms)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, n)| (*t, n.l2.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Degenerate("fit window contains fewer than two samples".into()));
    }
    Ok(GrowthRate {
        measured: least_squares_slope(&pts),
        predicted: l1.re,
        k,
    })
}

fn leading_direction(m: &Mat2, l: Complex64) -> (f64, f64) {
    // null vector of M - lambda I from whichever row is better conditioned;
    // for complex pairs this is the real part and seeds the oscillating plane
    let v1 = (m.b, l.re - m.a);
    let v2 = (l.re - m.d, m.c);
    let (x, y) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
    let n = x.hypot(y);
    if n == 0.0 {
        (1.0, 0.0)
    } else {
        (x / n, y / n)
    }
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TURING: Mat2 = Mat2::new(1.0, 2.0, -2.0, -2.0);

    fn turing_lin() -> Linearization2 {
        Linearization2::new(TURING, 0.5, 10.0).unwrap()
    }

    #[test]
    fn nonnormal_stable_matrix_has_positive_abscissa() {
        let a = Mat2::new(-1.0, 3.0, 0.0, -1.0);
        let (l1, l2) = eig2(&a);
        assert_eq!(l1, Complex64::new(-1.0, 0.0));
        assert_eq!(l2, Complex64::new(-1.0, 0.0));
        assert_eq!(numerical_abscissa(&a), 0.5);
    }

    #[test]
    fn eig2_examples() {
        let (l1, l2) = eig2(&Mat2::new(1.0, 0.0, 0.0, 1.0));
        assert_eq!((l1.re, l2.re), (1.0, 1.0));
        let (l1, l2) = eig2(&Mat2::new(0.0, 1.0, -1.0, 0.0));
        assert_eq!(l1, Complex64::new(0.0, 1.0));
        assert_eq!(l2, Complex64::new(0.0, -1.0));
        assert_eq!(numerical_abscissa(&Mat2::new(-2.0, 0.0, 0.0, -1.0)), -1.0);
    }

    #[test]
    fn eig2_is_accurate_for_widely_separated_roots() {
        let (l1, l2) = eig2(&Mat2::new(-1e8, 1.0, 0.0, -1e-8));
        assert_eq!(l1.re, -1e-8);
        assert_eq!(l2.re, -1e8);
    }

    #[test]
    fn m_of_k_examples() {
        let lin = turing_lin();
        assert_eq!(m_of_k(&lin, 0.0), TURING);
        assert_eq!(m_of_k(&lin, 1.0), Mat2::new(0.5, 2.0, -2.0, -12.0));
    }

    #[test]
    fn turing_example_band_and_det() {
        let lin = turing_lin();
        assert_eq!(lin.det_poly(1.0), -2.0);
        assert_eq!(m_of_k(&lin, 1.0).det(), -2.0);
        let (lo, hi) = instability_band(&lin).unwrap();
        assert!((lo * lo - (9.0 - 41f64.sqrt()) / 10.0).abs() < 1e-12);
        assert!((hi * hi - (9.0 + 41f64.sqrt()) / 10.0).abs() < 1e-12);
        assert!((lo - 0.5095955025868214).abs() < 1e-12);
        assert!((hi - 1.2410932373288015).abs() < 1e-12);

        let c = turing_conditions(&lin);
        assert!(c.trace_negative && c.det_positive && c.band_nonempty && c.trace_negative_on_band);
        assert!(c.turing_unstable());
    }

    #[test]
    fn decoupled_stable_kinetics_have_no_band() {
        let lin = Linearization2::new(Mat2::new(-1.0, 0.0, 0.0, -1.0), 0.3, 7.0).unwrap();
        assert!(instability_band(&lin).is_none());
        let r = dispersion_scan(&lin, 5.0, 100, Some(3.0)).unwrap();
        assert!(r.is_stable());
        assert!(r.points.iter().all(|p| p.det > 0.0));
        let c = turing_conditions(&lin);
        assert!(c.kinetics_stable() && !c.band_nonempty);
    }

    #[test]
    fn positive_trace_fails_kinetic_stability() {
        let lin = Linearization2::new(Mat2::new(2.0, 1.0, -1.0, -1.0), 1.0, 1.0).unwrap();
        assert!(!turing_conditions(&lin).trace_negative);
    }

    #[test]
    fn critical_d1_example() {
        let r = critical_d1(&TURING, 10.0, 1.0).unwrap();
        assert!((r.d1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.det_slope, 12.0);
        // bisection oracle on det M(1) as a function of d1
        let det = |d1: f64| Linearization2::new(TURING, d1, 10.0).unwrap().det_poly(1.0);
        let (mut lo, mut hi) = (0.01, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if det(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((0.5 * (lo + hi) - r.d1).abs() < 1e-12);
        assert!(det(r.d1).abs() < 1e-12);
        assert_eq!(det(0.5), -2.0);
    }

    #[test]
    fn critical_d1_degenerate_direction() {
        // d2 k^2 = d makes det independent of d1
        assert!(matches!(
            critical_d1(&Mat2::new(1.0, 0.0, 0.0, 4.0), 1.0, 2.0),
            Err(Error::Degenerate(_))
        ));
        assert!(critical_d1(&TURING, 10.0, 0.0).is_err());
    }

    #[test]
    fn admissible_modes_for_l4_and_l2() {
        let lin = turing_lin();
        let r4 = dispersion_scan(&lin, 3.0, 400, Some(4.0)).unwrap();
        assert!(r4.modes[0].in_band && r4.modes[0].growth_rate > 0.0);
        assert!(!r4.modes[1].in_band && r4.modes[1].growth_rate < 0.0);
        let r2 = dispersion_scan(&lin, 3.0, 400, Some(2.0)).unwrap();
        assert!(r2.modes.iter().all(|m| !m.in_band && m.growth_rate < 0.0));
    }

    #[test]
    fn scan_rejects_bad_arguments() {
        let lin = turing_lin();
        assert!(dispersion_scan(&lin, 1.0, 1, None).is_err());
        assert!(dispersion_scan(&lin, 0.0, 10, None).is_err());
        assert!(Linearization2::new(TURING, 0.0, 1.0).is_err());
    }

    #[test]
    fn zero_perturbation_is_degenerate() {
        let params = GrowthRateParams {
            amplitude: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            growth_rate_experiment(&turing_lin(), 4.0, 1, &params),
            Err(Error::Degenerate(_))
        ));
    }

    proptest! {
        #[test]
        fn vieta_holds_along_dispersion(
            a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0,
            d1 in 0.01f64..5.0, d2 in 0.01f64..20.0, k in 0.0f64..4.0,
        ) {
            let lin = Linearization2::new(Mat2::new(a, b, c, d), d1, d2).unwrap();
            let m = m_of_k(&lin, k);
            let (l1, l2) = eig2(&m);
            let scale = 1.0 + m.a.abs().max(m.d.abs()).max(b.abs()).max(c.abs());
            prop_assert!(((l1 + l2).re - m.trace()).abs() <= 1e-12 * scale);
            prop_assert!((l1 + l2).im.abs() <= 1e-12 * scale);
            prop_assert!(((l1 * l2).re - m.det()).abs() <= 1e-11 * scale * scale);
            prop_assert!((m.det() - lin.det_poly(k)).abs() <= 1e-11 * scale * scale);
            prop_assert!((m.trace() - lin.trace_poly(k)).abs() <= 1e-12 * scale);
        }

        #[test]
        fn numerical_abscissa_dominates_spectral(
            a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, d in -5.0f64..5.0,
        ) {
            let m = Mat2::new(a, b, c, d);
            prop_assert!(numerical_abscissa(&m) >= spectral_abscissa(&m) - 1e-12);
        }

        #[test]
        fn critical_d1_zeroes_the_determinant(
            a in 0.1f64..3.0, b in 0.5f64..3.0, c in -3.0f64..-0.5, d in -4.0f64..-0.2,
            d2 in 1.0f64..20.0, k in 0.2f64..3.0,
        ) {
            let kin = Mat2::new(a, b, c, d);
            let r = critical_d1(&kin, d2, k).unwrap();
            let k2 = k * k;
            let det = (a - r.d1 * k2) * (d - d2 * k2) - b * c;
            let scale = (kin.det().abs() + a * d2 * k2).max(1.0);
            prop_assert!(det.abs() <= 1e-12 * scale);
        }

        #[test]
        fn modes_grow_iff_inside_band(
            a in 0.1f64..2.0, d in -3.0f64..-0.5, d1 in 0.05f64..1.0, d2 in 2.0f64..30.0,
            len in 1.0f64..20.0,
        ) {
            // b c < 0 chosen so that det M > 0 with a + d < 0
            prop_assume!(a + d < 0.0);
            let lin = Linearization2::new(Mat2::new(a, 2.0, -2.0, d), d1, d2).unwrap();
            let r = dispersion_scan(&lin, 6.0, 50, Some(len)).unwrap();
            for m in &r.modes {
                let det = lin.det_poly(m.k);
                prop_assume!(det.abs() > 1e-9);
                prop_assert_eq!(m.growth_rate > 0.0, m.in_band);
            }
        }
    }
}
