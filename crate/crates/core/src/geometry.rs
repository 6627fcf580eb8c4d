//! Profile curves and the three surface families: the surface of revolution
//! `D`, the bent tube `M_κ` swept along a circular arc, and the closed
//! genus-1 surface glued from `2n` reflected copies of `M_κ`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spline::ClampedSpline;

/// Minimum number of knots for tabulated profiles.
pub const MIN_TABLE_KNOTS: usize = 512;

/// Tolerance used by the admissibility report.
pub const ADMISSIBILITY_TOL: f64 = 1e-8;

/// Tolerance on the arclength identity `ψ'² + χ'² = 1`.
pub const ARCLENGTH_TOL: f64 = 1e-10;

/// Below this `|κ s|` the center curve is evaluated by its Taylor series.
pub const TAYLOR_SWITCH: f64 = 1e-4;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Plane curve `(ψ(r), 0, χ(r))`, `r ∈ [0, L]`, parametrized by arclength.
#[derive(Clone)]
pub struct ArcProfile {
    length: f64,
    psi: RealFn,
    dpsi: RealFn,
    chi: RealFn,
    dchi: RealFn,
}

impl fmt::Debug for ArcProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ArcProfile").field("length", &self.length).finish_non_exhaustive()
    }
}

impl ArcProfile {
    pub fn new(
        length: f64,
        psi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dpsi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        chi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dchi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidArgument(format!("arc length must be positive, got {length}")));
        }
        Ok(Self {
            length,
            psi: Arc::new(psi),
            dpsi: Arc::new(dpsi),
            chi: Arc::new(chi),
            dchi: Arc::new(dchi),
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn psi(&self, r: f64) -> f64 {
        (self.psi)(r)
    }

    pub fn chi(&self, r: f64) -> f64 {
        (self.chi)(r)
    }

    /// Checks `ψ > 0`, `χ' > 0` and the arclength identity on `samples` points.
    pub fn validate(&self, samples: usize) -> Result<()> {
        let samples = samples.max(2);
        for k in 0..samples {
            let r = self.length * k as f64 / (samples - 1) as f64;
            let psi = (self.psi)(r);
            if !(psi > 0.0) {
                return Err(Error::InvalidArgument(format!("psi must be positive, psi({r}) = {psi}")));
            }
            let (dp, dc) = ((self.dpsi)(r), (self.dchi)(r));
            if !(dc > 0.0) {
                return Err(Error::NonMonotoneArc { r });
            }
            let value = dp * dp + dc * dc;
            if (value - 1.0).abs() > ARCLENGTH_TOL {
                return Err(Error::ArclengthViolated { r, value });
            }
        }
        Ok(())
    }
}

/// How `Ψ` is represented.
#[derive(Debug, Clone)]
pub enum ProfileShape {
    /// `Ψ(s) = mean + amplitude·cos(2πs/l)`.
    Cosine { mean: f64, amplitude: f64 },
    /// `Ψ(s) = intercept + slope·s`; never admissible unless `slope = 0`.
    Linear { intercept: f64, slope: f64 },
    /// Clamped cubic spline through tabulated `(s, Ψ)` pairs.
    Table(ClampedSpline),
}

/// Graph radius `Ψ(s)` of a surface of revolution over `s ∈ [0, l]`.
#[derive(Debug, Clone)]
pub struct ProfileCurve {
    length: f64,
    shape: ProfileShape,
    max_psi: f64,
    min_psi: f64,
}

impl ProfileCurve {
    fn build(length: f64, shape: ProfileShape) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidArgument(format!("profile length must be positive, got {length}")));
        }
        let mut p = Self { length, shape, max_psi: f64::NAN, min_psi: f64::NAN };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let n = 4096;
        for k in 0..=n {
            let v = p.psi(length * k as f64 / n as f64);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if let ProfileShape::Table(spline) = &p.shape {
            for &v in spline.values() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !(lo > 0.0) {
            return Err(Error::InvalidArgument(format!("Psi must be positive on [0, l]; min = {lo}")));
        }
        p.min_psi = lo;
        p.max_psi = hi;
        Ok(p)
    }

    /// `Ψ(s) = a + A·cos(2πs/l)`; the default admissible family.
    pub fn cosine(mean: f64, amplitude: f64, length: f64) -> Result<Self> {
        Self::build(length, ProfileShape::Cosine { mean, amplitude })
    }

    /// The straight cylinder `Ψ ≡ radius`.
    pub fn constant(radius: f64, length: f64) -> Result<Self> {
        Self::cosine(radius, 0.0, length)
    }

    pub fn linear(intercept: f64, slope: f64, length: f64) -> Result<Self> {
        Self::build(length, ProfileShape::Linear { intercept, slope })
    }

    /// Tabulated profile; `s` must start at 0 and have at least
    /// [`MIN_TABLE_KNOTS`] knots. End slopes come from one-sided
    /// second-order differences.
    pub fn from_table(s: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if s.len() < MIN_TABLE_KNOTS {
            return Err(Error::InvalidArgument(format!(
                "profile table needs at least {MIN_TABLE_KNOTS} knots, got {}",
                s.len()
            )));
        }
        let n = s.len();
        let d0 = one_sided_slope(&s[..3], &psi[..3]);
        let tail_s = [s[n - 1], s[n - 2], s[n - 3]];
        let tail_p = [psi[n - 1], psi[n - 2], psi[n - 3]];
        let d1 = one_sided_slope(&tail_s, &tail_p);
        Self::from_table_with_slopes(s, psi, d0, d1)
    }

    /// Tabulated profile with known end slopes.
    pub fn from_table_with_slopes(s: Vec<f64>, psi: Vec<f64>, slope_start: f64, slope_end: f64) -> Result<Self> {
        if s.len() < MIN_TABLE_KNOTS {
            return Err(Error::InvalidArgument(format!(
                "profile table needs at least {MIN_TABLE_KNOTS} knots, got {}",
                s.len()
            )));
        }
        if s[0].abs() > 1e-14 {
            return Err(Error::InvalidArgument(format!("profile table must start at s = 0, got {}", s[0])));
        }
        let length = s[s.len() - 1];
        let spline = ClampedSpline::new(s, psi, slope_start, slope_end)?;
        Self::build(length, ProfileShape::Table(spline))
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn shape(&self) -> &ProfileShape {
        &self.shape
    }

    pub fn max_psi(&self) -> f64 {
        self.max_psi
    }

    pub fn min_psi(&self) -> f64 {
        self.min_psi
    }

    /// `[Ψ, Ψ', Ψ'', Ψ''']` at `s`.
    pub fn eval(&self, s: f64) -> [f64; 4] {
        match &self.shape {
            ProfileShape::Cosine { mean, amplitude } => {
                let w = 2.0 * PI / self.length;
                let (sn, cs) = (w * s).sin_cos();
                [
                    mean + amplitude * cs,
                    -amplitude * w * sn,
                    -amplitude * w * w * cs,
                    amplitude * w * w * w * sn,
                ]
            }
            ProfileShape::Linear { intercept, slope } => [intercept + slope * s, *slope, 0.0, 0.0],
            ProfileShape::Table(spline) => spline.eval_all(s),
        }
    }

    pub fn psi(&self, s: f64) -> f64 {
        self.eval(s)[0]
    }

    pub fn dpsi(&self, s: f64) -> f64 {
        self.eval(s)[1]
    }

    /// Arclength `r(s) = ∫₀ˢ √(1 + Ψ'(t)²) dt` of the generating curve.
    pub fn arclength(&self, s: f64) -> f64 {
        // 5-point Gauss-Legendre on panels of width ≤ l/2048.
        const X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        if s == 0.0 {
            return 0.0;
        }
        let panels = ((s.abs() / self.length) * 2048.0).ceil().max(1.0) as usize;
        let h = s / panels as f64;
        let mut total = 0.0;
        for k in 0..panels {
            let mid = (k as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(W) {
                let d = self.dpsi(mid + 0.5 * h * x);
                total += w * (1.0 + d * d).sqrt();
            }
        }
        total * 0.5 * h
    }
}

fn one_sided_slope(s: &[f64], p: &[f64]) -> f64 {
    // Quadratic through three points, derivative at the first. Written in
    // divided differences so flat data gives an exact zero.
    let (h1, h2) = (s[1] - s[0], s[2] - s[0]);
    let (d1, d2) = ((p[1] - p[0]) / h1, (p[2] - p[0]) / h2);
    d1 + (d1 - d2) * h1 / (h2 - h1)
}

/// Reparametrizes an arc profile by height, `Ψ(s) = ψ(χ⁻¹(s))`, sampling
/// `samples` points uniformly in `r`.
pub fn reparametrize_arc(arc: &ArcProfile, samples: usize) -> Result<ProfileCurve> {
    let samples = samples.max(MIN_TABLE_KNOTS);
    arc.validate(samples)?;
    let chi0 = arc.chi(0.0);
    let mut s = Vec::with_capacity(samples);
    let mut psi = Vec::with_capacity(samples);
    for k in 0..samples {
        let r = arc.length * k as f64 / (samples - 1) as f64;
        s.push(arc.chi(r) - chi0);
        psi.push(arc.psi(r));
    }
    s[0] = 0.0;
    let slope = |r: f64| (arc.dpsi)(r) / (arc.dchi)(r);
    ProfileCurve::from_table_with_slopes(s, psi, slope(0.0), slope(arc.length))
}

/// `Ψ''Ψ − (Ψ')²[1 + (Ψ')²]` at `s0 ∈ (0, l)`; positive values admit a pattern.
pub fn stability_margin(p: &ProfileCurve, s0: f64) -> Result<f64> {
    if !(s0 > 0.0 && s0 < p.length()) {
        return Err(Error::Domain(format!("s0 = {s0} outside (0, {})", p.length())));
    }
    let [psi, d1, d2, _] = p.eval(s0);
    Ok(d2 * psi - d1 * d1 * (1.0 + d1 * d1))
}

/// Maximizes [`stability_margin`] over the interior nodes of a 1024-interval scan.
pub fn find_best_s0(p: &ProfileCurve) -> (f64, f64) {
    let n = 1024;
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for k in 1..n {
        let s0 = p.length() * k as f64 / n as f64;
        let m = stability_margin(p, s0).expect("interior point");
        if m > best.1 {
            best = (s0, m);
        }
    }
    best
}

/// Margins for the admissibility conditions on a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub min_psi: f64,
    pub psi_start: f64,
    pub psi_end: f64,
    pub psi_positive: bool,
    /// `[Ψ'(0), Ψ'(l), Ψ'''(0), Ψ'''(l)]`
    pub endpoint_derivatives: [f64; 4],
    pub endpoint_conditions: bool,
    pub best_s0: f64,
    pub best_margin: f64,
    pub criterion_satisfied: bool,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.psi_positive && self.endpoint_conditions && self.criterion_satisfied
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.psi_positive {
            out.push("Psi must be positive at both ends");
        }
        if !self.endpoint_conditions {
            out.push("Psi' and Psi''' must vanish at s = 0 and s = l");
        }
        if !self.criterion_satisfied {
            out.push("criterion not satisfied");
        }
        out
    }
}

pub fn check_admissibility(p: &ProfileCurve) -> AdmissibilityReport {
    let a = p.eval(0.0);
    let b = p.eval(p.length());
    let endpoint_derivatives = [a[1], b[1], a[3], b[3]];
    let (best_s0, best_margin) = find_best_s0(p);
    AdmissibilityReport {
        min_psi: p.min_psi(),
        psi_start: a[0],
        psi_end: b[0],
        psi_positive: a[0] > 0.0 && b[0] > 0.0 && p.min_psi() > 0.0,
        endpoint_derivatives,
        endpoint_conditions: endpoint_derivatives.iter().all(|d| d.abs() <= ADMISSIBILITY_TOL),
        best_s0,
        best_margin,
        criterion_satisfied: best_margin > ADMISSIBILITY_TOL,
    }
}

/// How the `s` direction closes up on a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum STopology {
    /// `s ∈ [0, l]` with no-flux ends.
    Neumann { length: f64 },
    /// `s` periodic with the given period.
    Periodic { period: f64 },
}

impl STopology {
    pub fn extent(&self) -> f64 {
        match *self {
            STopology::Neumann { length } => length,
            STopology::Periodic { period } => period,
        }
    }
}

/// Coefficients of the metric `diag(Φ², Ψ²)` in `(s, θ)` coordinates.
///
/// `Φ = √(Ψ'² + (κΨcosθ − 1)²)`; `κ = 0` gives the surface of revolution.
pub trait SurfaceMetric {
    /// `(Ψ, Ψ')` at `s`.
    fn radius(&self, s: f64) -> (f64, f64);
    fn curvature(&self) -> f64;
    fn s_topology(&self) -> STopology;

    fn phi(&self, s: f64, theta: f64) -> f64 {
        let (psi, dpsi) = self.radius(s);
        let c = self.curvature() * psi * theta.cos() - 1.0;
        (dpsi * dpsi + c * c).sqrt()
    }
}

impl SurfaceMetric for ProfileCurve {
    fn radius(&self, s: f64) -> (f64, f64) {
        let [p, d, _, _] = self.eval(s);
        (p, d)
    }

    fn curvature(&self) -> f64 {
        0.0
    }

    fn s_topology(&self) -> STopology {
        STopology::Neumann { length: self.length }
    }
}

/// The profile swept along the circular arc `C(κ)` of length `l`.
#[derive(Debug, Clone)]
pub struct BentTube {
    profile: ProfileCurve,
    kappa: f64,
}

impl BentTube {
    pub fn new(profile: ProfileCurve, kappa: f64) -> Result<Self> {
        let reach = kappa.abs() * profile.max_psi();
        if !kappa.is_finite() || reach >= 1.0 {
            return Err(Error::SelfIntersecting(reach));
        }
        Ok(Self { profile, kappa })
    }

    pub fn profile(&self) -> &ProfileCurve {
        &self.profile
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `Φ(s, θ)`; `s` must lie in `[0, l]`.
    pub fn phi_checked(&self, s: f64, theta: f64) -> Result<f64> {
        let l = self.profile.length();
        if !(-1e-12..=l + 1e-12).contains(&s) {
            return Err(Error::Domain(format!("s = {s} outside [0, {l}]")));
        }
        Ok(self.phi(s, theta))
    }

    /// Point `x(s, θ) = p(s) + Ψ cosθ 𝕟(s) + Ψ sinθ 𝕓(s)`.
    pub fn embed(&self, s: f64, theta: f64) -> [f64; 3] {
        sweep(self.kappa, s, self.profile.psi(s), theta)
    }
}

impl SurfaceMetric for BentTube {
    fn radius(&self, s: f64) -> (f64, f64) {
        self.profile.radius(s)
    }

    fn curvature(&self) -> f64 {
        self.kappa
    }

    fn s_topology(&self) -> STopology {
        STopology::Neumann { length: self.profile.length() }
    }
}

/// Point on the circular center curve, `p(s) = ((1 − cos κs)/κ, 0, sin κs / κ)`.
pub fn center_curve(kappa: f64, s: f64) -> [f64; 3] {
    let x = kappa * s;
    if x.abs() < TAYLOR_SWITCH {
        // (1 − cos x)/κ = s·(x/2 − x³/24 + x⁵/720 − x⁷/40320)
        // sin x / κ     = s·(1 − x²/6 + x⁴/120 − x⁶/5040)
        let x2 = x * x;
        let a = s * x * (0.5 - x2 / 24.0 + x2 * x2 / 720.0 - x2 * x2 * x2 / 40320.0);
        let b = s * (1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0);
        [a, 0.0, b]
    } else {
        [(1.0 - x.cos()) / kappa, 0.0, x.sin() / kappa]
    }
}

/// Frenet trihedron `(𝕥, 𝕟, 𝕓)` of the center curve at `s`.
pub fn frenet_frame(kappa: f64, s: f64) -> [[f64; 3]; 3] {
    let (sn, cs) = (kappa * s).sin_cos();
    [[sn, 0.0, cs], [cs, 0.0, -sn], [0.0, 1.0, 0.0]]
}

fn sweep(kappa: f64, s: f64, psi: f64, theta: f64) -> [f64; 3] {
    let p = center_curve(kappa, s);
    let [_, n, b] = frenet_frame(kappa, s);
    let (st, ct) = theta.sin_cos();
    [
        p[0] + psi * ct * n[0] + psi * st * b[0],
        p[1] + psi * ct * n[1] + psi * st * b[1],
        p[2] + psi * ct * n[2] + psi * st * b[2],
    ]
}

/// Closed genus-1 surface made of `2n` copies of `M_κ`, `κ = π/(n l)`.
///
/// Global arclength `s ∈ [0, P)`, `P = 2nl`; the profile is extended evenly
/// about every junction `s = k l`.
#[derive(Debug, Clone)]
pub struct GluedSurface {
    profile: ProfileCurve,
    n: usize,
    kappa: f64,
}

impl GluedSurface {
    pub fn profile(&self) -> &ProfileCurve {
        &self.profile
    }

    pub fn copies(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn period(&self) -> f64 {
        2.0 * self.n as f64 * self.profile.length()
    }

    /// Junction positions `s = k l`, `k = 0..2n`.
    pub fn junctions(&self) -> Vec<f64> {
        (0..2 * self.n).map(|k| k as f64 * self.profile.length()).collect()
    }

    /// Maps global `s` to the piece coordinate in `[0, l]` and whether the
    /// piece is mirrored.
    pub fn fold(&self, s: f64) -> (f64, bool) {
        let l = self.profile.length();
        let t = s.rem_euclid(2.0 * l);
        if t <= l {
            (t, false)
        } else {
            (2.0 * l - t, true)
        }
    }

    /// `[Ψ_G, Ψ_G', Ψ_G'', Ψ_G''']` at global `s`.
    pub fn eval(&self, s: f64) -> [f64; 4] {
        let (t, mirrored) = self.fold(s);
        let [p, d1, d2, d3] = self.profile.eval(t);
        if mirrored {
            [p, -d1, d2, -d3]
        } else {
            [p, d1, d2, d3]
        }
    }

    pub fn embed(&self, s: f64, theta: f64) -> [f64; 3] {
        let s = s.rem_euclid(self.period());
        sweep(self.kappa, s, self.eval(s)[0], theta)
    }

    /// The piece `k` (even: `M_κ` as is, odd: mirrored) as a bent tube.
    pub fn piece(&self) -> BentTube {
        BentTube { profile: self.profile.clone(), kappa: self.kappa }
    }
}

impl SurfaceMetric for GluedSurface {
    fn radius(&self, s: f64) -> (f64, f64) {
        let [p, d, _, _] = self.eval(s);
        (p, d)
    }

    fn curvature(&self) -> f64 {
        self.kappa
    }

    fn s_topology(&self) -> STopology {
        STopology::Periodic { period: self.period() }
    }
}

/// Glues `2n` copies of the bent profile into a closed surface.
///
/// `kappa0`, when known, is the verified continuation bound; the implied
/// curvature `π/(n l)` must not exceed it.
pub fn glue(p: &ProfileCurve, n: usize, kappa0: Option<f64>) -> Result<GluedSurface> {
    if n < 2 {
        return Err(Error::InvalidArgument("n ≥ 2 required".into()));
    }
    let kappa = PI / (n as f64 * p.length());
    let reach = kappa * p.max_psi();
    if reach >= 1.0 {
        return Err(Error::SelfIntersecting(reach));
    }
    if let Some(kappa0) = kappa0 {
        if kappa >= kappa0 {
            return Err(Error::CurvatureExceedsBound {
                kappa,
                kappa0,
                n_bound: PI / (p.length() * kappa0),
            });
        }
    }
    Ok(GluedSurface { profile: p.clone(), n, kappa })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_profile() -> ProfileCurve {
        ProfileCurve::cosine(1.0, 0.5, 1.0).unwrap()
    }

    #[test]
    fn cylinder_margin_is_zero() {
        let p = ProfileCurve::constant(1.0, 2.0).unwrap();
        for s0 in [0.1, 1.0, 1.9] {
            assert_eq!(stability_margin(&p, s0).unwrap(), 0.0);
        }
    }

    #[test]
    fn cosine_margin_at_neck_is_pi_squared() {
        let p = default_profile();
        let m = stability_margin(&p, 0.5).unwrap();
        assert!((m - PI * PI).abs() < 1e-12, "{m}");
        // bulge end has negative margin
        assert!(stability_margin(&p, 1e-6).unwrap() < 0.0);
        let (s0, best) = find_best_s0(&p);
        assert_eq!(s0, 0.5);
        assert!((best - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn margin_rejects_endpoints() {
        let p = default_profile();
        assert!(matches!(stability_margin(&p, 0.0), Err(Error::Domain(_))));
        assert!(matches!(stability_margin(&p, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn admissibility_flags() {
        let cyl = check_admissibility(&ProfileCurve::constant(1.0, 1.0).unwrap());
        assert!(cyl.endpoint_conditions && cyl.psi_positive);
        assert!(!cyl.criterion_satisfied);
        assert_eq!(cyl.failures(), vec!["criterion not satisfied"]);

        let good = check_admissibility(&default_profile());
        assert!(good.passed());
        assert_eq!(good.best_s0, 0.5);
        assert!((good.best_margin - PI * PI).abs() < 1e-12);

        let lin = check_admissibility(&ProfileCurve::linear(1.0, 1.0, 1.0).unwrap());
        assert!(!lin.endpoint_conditions);
        assert!(!lin.passed());
    }

    #[test]
    fn phi_reductions() {
        let p = default_profile();
        let straight = BentTube::new(p.clone(), 0.0).unwrap();
        let bent = BentTube::new(p.clone(), 0.5).unwrap();
        for s in [0.0, 0.13, 0.5, 0.8] {
            let d = p.dpsi(s);
            let g11 = (1.0 + d * d).sqrt();
            assert!((straight.phi(s, 0.7) - g11).abs() < 1e-15);
            assert!((bent.phi(s, PI / 2.0) - g11).abs() < 1e-15);
            assert_eq!(bent.phi(s, 0.3), bent.phi(s, -0.3));
        }
        assert!((bent.phi_checked(0.5, 0.0).unwrap() - 0.75).abs() < 1e-15);
        assert!(bent.phi_checked(1.5, 0.0).is_err());
    }

    #[test]
    fn phi_lower_bound() {
        let p = default_profile();
        let t = BentTube::new(p.clone(), 0.6).unwrap();
        let bound = 1.0 - 0.6 * p.max_psi();
        for i in 0..=50 {
            for j in 0..32 {
                let v = t.phi(i as f64 / 50.0, j as f64 * PI / 16.0);
                assert!(v >= bound - 1e-15);
            }
        }
    }

    #[test]
    fn self_intersection_rejected() {
        let p = default_profile();
        assert!(matches!(BentTube::new(p.clone(), 0.7), Err(Error::SelfIntersecting(_))));
        assert!(matches!(glue(&p, 2, None), Err(Error::SelfIntersecting(_))));
    }

    #[test]
    fn frenet_frame_is_orthonormal() {
        for s in [0.0, 0.3, 2.0] {
            let f = frenet_frame(0.4, s);
            for a in 0..3 {
                for b in 0..3 {
                    let d: f64 = (0..3).map(|k| f[a][k] * f[b][k]).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn embedding_reductions() {
        let p = default_profile();
        let t = BentTube::new(p.clone(), 0.4).unwrap();
        let x = t.embed(0.0, 0.9);
        let psi0 = p.psi(0.0);
        assert!((x[0] - psi0 * 0.9f64.cos()).abs() < 1e-15);
        assert!((x[1] - psi0 * 0.9f64.sin()).abs() < 1e-15);
        assert!(x[2].abs() < 1e-15);

        let straight = BentTube::new(p.clone(), 0.0).unwrap();
        let y = straight.embed(0.3, 1.1);
        assert!((y[0] - p.psi(0.3) * 1.1f64.cos()).abs() < 1e-15);
        assert!((y[2] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn taylor_branch_matches_closed_form() {
        // Just above and below the switch the two branches agree.
        let s = 1.0;
        for kappa in [0.9999e-4, 1.0001e-4, 1e-3] {
            let p = center_curve(kappa, s);
            let exact_x = (1.0 - (kappa * s).cos()) / kappa;
            let exact_z = (kappa * s).sin() / kappa;
            assert!((p[0] - exact_x).abs() < 1e-12);
            assert!((p[2] - exact_z).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_profile_lies_on_torus() {
        let a = 0.3;
        let kappa = 0.8;
        let p = ProfileCurve::constant(a, 1.0).unwrap();
        let t = BentTube::new(p, kappa).unwrap();
        let big = 1.0 / kappa;
        for i in 0..=20 {
            for j in 0..16 {
                let x = t.embed(i as f64 / 20.0, j as f64 * PI / 8.0);
                // axis circle: center (1/κ, ·, 0), radius 1/κ in the x1-x3 plane
                let rho = ((x[0] - big).powi(2) + x[2].powi(2)).sqrt();
                let d = ((rho - big).powi(2) + x[1].powi(2)).sqrt();
                assert!((d - a).abs() < 1e-12, "{d}");
            }
        }
    }

    #[test]
    fn glue_closure_and_extension() {
        let p = default_profile();
        let g = glue(&p, 6, None).unwrap();
        assert!((g.kappa() - PI / 6.0).abs() < 1e-15);
        assert_eq!(g.period(), 12.0);
        assert!((2.0 * 6.0 * 1.0 * g.kappa() - 2.0 * PI).abs() < 1e-12);
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            let base = p.eval(s);
            assert!((g.eval(2.0 - s)[0] - base[0]).abs() < 1e-14);
            assert!((g.eval(2.0 + s)[0] - base[0]).abs() < 1e-14);
            assert!((g.eval(-s)[0] - g.eval(s)[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn glue_rejects_small_n() {
        let p = default_profile();
        assert!(matches!(glue(&p, 1, None), Err(Error::InvalidArgument(_))));
        let err = glue(&p, 6, Some(0.3)).unwrap_err();
        assert!(matches!(err, Error::CurvatureExceedsBound { .. }));
        assert!(glue(&p, 12, Some(0.3)).is_ok());
    }

    #[test]
    fn glued_embedding_is_periodic_and_mirror_symmetric() {
        let p = default_profile();
        let g = glue(&p, 6, None).unwrap();
        let l = p.length();
        // reflection across the plane through the junction circle at s = l
        let c = center_curve(g.kappa(), l);
        let [t, _, _] = frenet_frame(g.kappa(), l);
        let reflect = |x: [f64; 3]| {
            let d: f64 = (0..3).map(|k| (x[k] - c[k]) * t[k]).sum();
            [x[0] - 2.0 * d * t[0], x[1] - 2.0 * d * t[1], x[2] - 2.0 * d * t[2]]
        };
        for i in 0..=10 {
            let s = 0.1 * i as f64;
            for theta in [0.0, 1.0, 2.5, 4.0] {
                let a = g.embed(s, theta);
                let b = g.embed(s + g.period(), theta);
                for k in 0..3 {
                    assert!((a[k] - b[k]).abs() < 1e-12);
                }
                let m = reflect(g.embed(2.0 * l - s, theta));
                for k in 0..3 {
                    assert!((a[k] - m[k]).abs() < 1e-10, "{a:?} vs {m:?}");
                }
            }
        }
    }

    #[test]
    fn glued_constant_profile_is_standard_torus() {
        let p = ProfileCurve::constant(0.25, 1.0).unwrap();
        let g = glue(&p, 4, None).unwrap();
        let big = 1.0 / g.kappa();
        for i in 0..40 {
            let x = g.embed(i as f64 * 0.2, 0.4 * i as f64);
            let rho = ((x[0] - big).powi(2) + x[2].powi(2)).sqrt();
            let d = ((rho - big).powi(2) + x[1].powi(2)).sqrt();
            assert!((d - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn glued_profile_junction_second_differences_converge() {
        // One-sided second differences of Ψ_G at the junction s = l agree
        // with the interior value Ψ''(l) at O(h²).
        let p = default_profile();
        let g = glue(&p, 6, None).unwrap();
        let l = p.length();
        let want = p.eval(l)[2];
        let err = |h: f64| {
            let centered = (g.eval(l + h)[0] - 2.0 * g.eval(l)[0] + g.eval(l - h)[0]) / (h * h);
            (centered - want).abs()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn arc_validation_errors() {
        let bad = ArcProfile::new(1.0, |_| 1.0, |_| 0.0, |r| -r, |_| -1.0).unwrap();
        assert!(matches!(bad.validate(16), Err(Error::NonMonotoneArc { .. })));
        let bad = ArcProfile::new(1.0, |_| 1.0, |_| 0.5, |r| r, |_| 1.0).unwrap();
        assert!(matches!(bad.validate(16), Err(Error::ArclengthViolated { .. })));
    }

    #[test]
    fn reparametrize_identity_arc() {
        let arc = ArcProfile::new(2.0, |_| 1.0, |_| 0.0, |r| r, |_| 1.0).unwrap();
        let p = reparametrize_arc(&arc, 512).unwrap();
        assert!((p.length() - 2.0).abs() < 1e-15);
        for k in 0..=40 {
            let s = k as f64 * 0.05;
            assert!((p.psi(s) - 1.0).abs() < 1e-14);
            // r(χ(r)) = r for χ(r) = r
            assert!((p.arclength(s) - s).abs() < 1e-10);
        }
    }
}
