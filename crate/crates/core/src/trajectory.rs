//! Exercise paths: circle, out-and-back line, and a Gerono lemniscate.
//!
//! Every path is a loop of period 1 in its parameter `s`. Circle and
//! lemniscate are naturally periodic; the line is swept forward on
//! `s in [0, 0.5]` and backward on `(0.5, 1)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Number of uniform samples used by the coarse projection scan.
pub const PROJECTION_SCAN_SAMPLES: usize = 720;

/// Golden-section refinement stops once the bracket is narrower than this.
const REFINE_TOL_S: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryKind {
    Circle,
    Line,
    Lemniscate,
}

fn default_size() -> f64 {
    0.10
}

/// Serializable description of an exercise path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    #[serde(default)]
    pub center: Vec2,
    /// Circle radius or lemniscate half-width, meters. Unused by `Line`.
    #[serde(default = "default_size")]
    pub size: f64,
    /// Line endpoints `a`, `b`. Required for `Line` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<[Vec2; 2]>,
    pub target_duration_s: f64,
    pub tolerance_band_m: f64,
}

impl TrajectorySpec {
    pub fn circle(radius: f64) -> Self {
        TrajectorySpec {
            kind: TrajectoryKind::Circle,
            center: Vec2::ZERO,
            size: radius,
            endpoints: None,
            target_duration_s: 240.0,
            tolerance_band_m: 0.02,
        }
    }

    pub fn lemniscate(half_width: f64) -> Self {
        TrajectorySpec {
            kind: TrajectoryKind::Lemniscate,
            size: half_width,
            ..Self::circle(half_width)
        }
    }

    pub fn line(a: Vec2, b: Vec2) -> Self {
        TrajectorySpec {
            kind: TrajectoryKind::Line,
            endpoints: Some([a, b]),
            ..Self::circle(default_size())
        }
    }

    pub fn with_center(mut self, center: Vec2) -> Self {
        self.center = center;
        self
    }

    pub fn with_timing(mut self, target_duration_s: f64, tolerance_band_m: f64) -> Self {
        self.target_duration_s = target_duration_s;
        self.tolerance_band_m = tolerance_band_m;
        self
    }

    /// Checks the invariants and returns an evaluable path.
    pub fn build(&self) -> Result<Trajectory> {
        Trajectory::new(self.clone())
    }
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self::circle(default_size())
    }
}

/// A point on a path: parameter, position, and unit tangent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub s: f64,
    pub position: Vec2,
    pub tangent: Vec2,
}

/// A validated path. All evaluation methods are infallible.
#[derive(Debug, Clone)]
pub struct Trajectory {
    spec: TrajectorySpec,
    length: f64,
    // coarse scan table for curves without a closed-form projection
    scan: Vec<Vec2>,
}

impl Trajectory {
    pub fn new(spec: TrajectorySpec) -> Result<Self> {
        let finite = spec.center.is_finite()
            && spec.size.is_finite()
            && spec.target_duration_s.is_finite()
            && spec.tolerance_band_m.is_finite();
        if !finite {
            return Err(Error::Spec("non-finite trajectory parameter".into()));
        }
        if spec.tolerance_band_m <= 0.0 {
            return Err(Error::Spec("tolerance_band_m must be > 0".into()));
        }
        if spec.target_duration_s <= 0.0 {
            return Err(Error::Spec("target_duration_s must be > 0".into()));
        }
        match spec.kind {
            TrajectoryKind::Circle | TrajectoryKind::Lemniscate => {
                if spec.size <= 0.0 {
                    return Err(Error::Spec("size must be > 0".into()));
                }
            }
            TrajectoryKind::Line => match spec.endpoints {
                Some([a, b]) if a.is_finite() && b.is_finite() && a != b => {}
                Some(_) => return Err(Error::Spec("line endpoints must be distinct".into())),
                None => return Err(Error::Spec("line requires endpoints".into())),
            },
        }
        let mut traj = Trajectory {
            spec,
            length: 0.0,
            scan: Vec::new(),
        };
        traj.length = traj.compute_length();
        if !(traj.length > 0.0) {
            return Err(Error::Spec("path length must be > 0".into()));
        }
        if traj.spec.kind == TrajectoryKind::Lemniscate {
            traj.scan = (0..PROJECTION_SCAN_SAMPLES)
                .map(|i| traj.position(i as f64 / PROJECTION_SCAN_SAMPLES as f64))
                .collect();
        }
        Ok(traj)
    }

    pub fn spec(&self) -> &TrajectorySpec {
        &self.spec
    }

    fn line_endpoints(&self) -> (Vec2, Vec2) {
        let [a, b] = self.spec.endpoints.expect("validated line");
        (a, b)
    }

    /// Maps an arbitrary parameter into the canonical range.
    pub fn wrap(&self, s: f64) -> f64 {
        match self.spec.kind {
            TrajectoryKind::Line => {
                let s = s.clamp(0.0, 1.0);
                if s >= 1.0 {
                    0.0
                } else {
                    s
                }
            }
            _ => {
                let w = s.rem_euclid(1.0);
                // rem_euclid can round up to exactly 1.0 for tiny negative inputs
                if w >= 1.0 {
                    0.0
                } else {
                    w
                }
            }
        }
    }

    fn position(&self, s: f64) -> Vec2 {
        let c = self.spec.center;
        match self.spec.kind {
            TrajectoryKind::Circle => {
                let th = TAU * s;
                c + Vec2::new(th.cos(), th.sin()) * self.spec.size
            }
            TrajectoryKind::Lemniscate => {
                let th = TAU * s;
                let (sn, cs) = th.sin_cos();
                c + Vec2::new(cs, sn * cs) * self.spec.size
            }
            TrajectoryKind::Line => {
                let (a, b) = self.line_endpoints();
                if s <= 0.5 {
                    a + (b - a) * (2.0 * s)
                } else {
                    b + (a - b) * (2.0 * s - 1.0)
                }
            }
        }
    }

    /// Derivative of position with respect to `s`.
    fn velocity(&self, s: f64) -> Vec2 {
        match self.spec.kind {
            TrajectoryKind::Circle => {
                let th = TAU * s;
                Vec2::new(-th.sin(), th.cos()) * (TAU * self.spec.size)
            }
            TrajectoryKind::Lemniscate => {
                let th = TAU * s;
                Vec2::new(-th.sin(), (2.0 * th).cos()) * (TAU * self.spec.size)
            }
            TrajectoryKind::Line => {
                let (a, b) = self.line_endpoints();
                if s <= 0.5 {
                    (b - a) * 2.0
                } else {
                    (a - b) * 2.0
                }
            }
        }
    }

    /// Position and unit tangent at parameter `s`.
    pub fn eval(&self, s: f64) -> PathPoint {
        let s = self.wrap(s);
        PathPoint {
            s,
            position: self.position(s),
            tangent: self.velocity(s).normalized(),
        }
    }

    /// Arc length of one full loop.
    pub fn path_length(&self) -> f64 {
        self.length
    }

    fn compute_length(&self) -> f64 {
        match self.spec.kind {
            TrajectoryKind::Circle => TAU * self.spec.size,
            TrajectoryKind::Line => {
                let (a, b) = self.line_endpoints();
                2.0 * a.dist(b)
            }
            TrajectoryKind::Lemniscate => {
                // |p'(theta)| = A sqrt(sin^2 + cos^2 2theta); four congruent quarters
                let a = self.spec.size;
                let speed = |th: f64| a * (th.sin().powi(2) + (2.0 * th).cos().powi(2)).sqrt();
                4.0 * adaptive_simpson(&speed, 0.0, PI / 2.0, 1e-13, 40)
            }
        }
    }

    /// Nearest path point to `p` (global minimum over `s`) and its distance.
    pub fn project(&self, p: Vec2) -> (PathPoint, f64) {
        match self.spec.kind {
            TrajectoryKind::Circle => {
                let d = p - self.spec.center;
                let s = if d.norm() > 0.0 {
                    self.wrap(d.y.atan2(d.x) / TAU)
                } else {
                    0.0
                };
                let pt = self.eval(s);
                let dev = (d.norm() - self.spec.size).abs();
                (pt, dev)
            }
            TrajectoryKind::Line => {
                let (a, b) = self.line_endpoints();
                let ab = b - a;
                let t = ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
                let pt = self.eval(0.5 * t);
                let dev = pt.position.dist(p);
                (pt, dev)
            }
            TrajectoryKind::Lemniscate => self.project_scan(p),
        }
    }

    fn project_scan(&self, p: Vec2) -> (PathPoint, f64) {
        let n = self.scan.len();
        let d: Vec<f64> = self.scan.iter().map(|q| q.dist(p)).collect();
        let h = 1.0 / n as f64;
        let dist = |s: f64| self.position(self.wrap(s)).dist(p);
        let mut best_s = 0.0;
        let mut best_d = f64::INFINITY;
        for i in 0..n {
            let prev = d[(i + n - 1) % n];
            let next = d[(i + 1) % n];
            if d[i] <= prev && d[i] <= next {
                let si = i as f64 * h;
                let (s, ds) = golden_min(&dist, si - h, si + h, REFINE_TOL_S);
                let (s, ds) = if d[i] <= ds { (si, d[i]) } else { (s, ds) };
                if ds < best_d {
                    best_d = ds;
                    best_s = s;
                }
            }
        }
        let pt = self.eval(best_s);
        (pt, pt.position.dist(p))
    }

    /// Projection of `p` restricted to the forward window `[s0, s0 + width]`.
    ///
    /// Returns the point and the forward advance `u in [0, width]`. Ties
    /// resolve to the smallest advance.
    pub fn project_forward(&self, s0: f64, width: f64, p: Vec2) -> (PathPoint, f64) {
        let n = ((width * PROJECTION_SCAN_SAMPLES as f64).ceil() as usize).max(8);
        let h = width / n as f64;
        let dist = |u: f64| self.position(self.wrap(s0 + u)).dist(p);
        let d: Vec<f64> = (0..=n).map(|i| dist(i as f64 * h)).collect();
        let mut best_u = 0.0;
        let mut best_d = d[0];
        for i in 0..=n {
            let left_ok = i == 0 || d[i] <= d[i - 1];
            let right_ok = i == n || d[i] <= d[i + 1];
            if !(left_ok && right_ok) {
                continue;
            }
            let ui = i as f64 * h;
            let (mut u, mut du) = (ui, d[i]);
            let lo = if i == 0 { 0.0 } else { ui - h };
            let hi = if i == n { width } else { ui + h };
            if hi > lo {
                let (ur, dr) = golden_min(&dist, lo, hi, REFINE_TOL_S);
                if dr < du {
                    u = ur;
                    du = dr;
                }
            }
            if du < best_d {
                best_d = du;
                best_u = u;
            }
        }
        (self.eval(s0 + best_u), best_u)
    }
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub(crate) fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - (b - a) * INV_PHI;
    let mut d = a + (b - a) * INV_PHI;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() < tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * INV_PHI;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * INV_PHI;
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, depth)
}
