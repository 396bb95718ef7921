//! Conic numerics: direct ellipse fitting, conic/geometric conversion, exact
//! point-to-ellipse distance, perimeter, eccentricity, and pixel-counted
//! area overlap.
//!
//! Fitting follows a Taubin-prior procedure: Taubin's direct fit gives the
//! lower-error conic but may return a hyperbola; when it does, Fitzgibbon's
//! constrained fit guarantees an ellipse. All eigen solves are explicit
//! small-matrix reductions, no external solver.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("at least 5 points required, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate point configuration")]
    Degenerate,
    #[error("conic is not an ellipse")]
    NotAnEllipse,
}

/// General conic `Ax^2 + Bxy + Cy^2 + Dx + Ey + F = 0`, coefficient vector
/// normalized to unit norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Conic {
    pub fn new(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Self {
        Conic { a, b, c, d, e, f }.normalized()
    }

    /// `B^2 - 4AC`; negative for ellipses, positive for hyperbolas.
    pub fn discriminant(&self) -> f64 {
        self.b * self.b - 4.0 * self.a * self.c
    }

    pub fn is_ellipse(&self) -> bool {
        self.discriminant() < 0.0
    }

    /// Unit coefficient norm with `A + C > 0` as the sign convention
    /// (well defined whenever the conic is an ellipse).
    pub fn normalized(self) -> Self {
        let Conic { a, b, c, d, e, f } = self;
        let norm = (a * a + b * b + c * c + d * d + e * e + f * f).sqrt();
        assert!(norm > 0.0, "null conic");
        let mut v = [a / norm, b / norm, c / norm, d / norm, e / norm, f / norm];
        let flip = if v[0] + v[2] != 0.0 {
            v[0] + v[2] < 0.0
        } else {
            v.iter().copied().find(|&x| x != 0.0).unwrap_or(1.0) < 0.0
        };
        if flip {
            for x in &mut v {
                *x = -*x;
            }
        }
        Conic { a: v[0], b: v[1], c: v[2], d: v[3], e: v[4], f: v[5] }
    }

    pub fn coefficients(&self) -> [f64; 6] {
        [self.a, self.b, self.c, self.d, self.e, self.f]
    }
}

/// Geometric ellipse: center, semi-axes with `a >= b > 0`, rotation of the
/// major axis in `[0, pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseParams {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

/// Serialization form used in JSON outputs: `{cx, cy, a, b, theta_deg}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseRecord {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    pub theta_deg: f64,
}

impl From<&EllipseParams> for EllipseRecord {
    fn from(e: &EllipseParams) -> Self {
        EllipseRecord { cx: e.cx, cy: e.cy, a: e.a, b: e.b, theta_deg: e.theta.to_degrees() }
    }
}

impl From<&EllipseRecord> for EllipseParams {
    fn from(r: &EllipseRecord) -> Self {
        EllipseParams::new(r.cx, r.cy, r.a, r.b, r.theta_deg.to_radians())
    }
}

impl EllipseParams {
    /// Construct with canonicalization: axes swapped so `a >= b`, rotation
    /// folded into `[0, pi)`.
    pub fn new(cx: f64, cy: f64, a: f64, b: f64, theta: f64) -> Self {
        assert!(a > 0.0 && b > 0.0, "semi-axes must be positive");
        let (a, b, mut theta) = if a >= b { (a, b, theta) } else { (b, a, theta + FRAC_PI_2) };
        theta = theta.rem_euclid(PI);
        if theta >= PI {
            theta = 0.0;
        }
        EllipseParams { cx, cy, a, b, theta }
    }

    pub fn eccentricity(&self) -> f64 {
        (1.0 - (self.b * self.b) / (self.a * self.a)).max(0.0).sqrt()
    }

    /// Ellipse perimeter by Ramanujan's second approximation.
    pub fn perimeter(&self) -> f64 {
        perimeter_axes(self.a, self.b)
    }

    /// Point on the curve at parameter `t`.
    pub fn point_at(&self, t: f64) -> [f64; 2] {
        let (st, ct) = self.theta.sin_cos();
        let (s, c) = t.sin_cos();
        let u = self.a * c;
        let v = self.b * s;
        [self.cx + u * ct - v * st, self.cy + u * st + v * ct]
    }

    /// Interior test (boundary included).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (u, v) = self.to_canonical(x, y);
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }

    /// Translate into the ellipse frame: origin at center, x along the
    /// major axis.
    fn to_canonical(&self, x: f64, y: f64) -> (f64, f64) {
        let (st, ct) = self.theta.sin_cos();
        let dx = x - self.cx;
        let dy = y - self.cy;
        (dx * ct + dy * st, -dx * st + dy * ct)
    }

    pub fn to_conic(&self) -> Conic {
        let (st, ct) = self.theta.sin_cos();
        let ia2 = 1.0 / (self.a * self.a);
        let ib2 = 1.0 / (self.b * self.b);
        let a = ct * ct * ia2 + st * st * ib2;
        let b = 2.0 * ct * st * (ia2 - ib2);
        let c = st * st * ia2 + ct * ct * ib2;
        let d = -2.0 * a * self.cx - b * self.cy;
        let e = -b * self.cx - 2.0 * c * self.cy;
        let f = a * self.cx * self.cx + b * self.cx * self.cy + c * self.cy * self.cy - 1.0;
        Conic::new(a, b, c, d, e, f)
    }

    pub fn from_conic(conic: &Conic) -> Result<Self, FitError> {
        let disc = conic.discriminant();
        if !(disc < 0.0) {
            return Err(FitError::NotAnEllipse);
        }
        // Sign convention: quadratic part positive definite.
        let [mut a, mut b, mut c, mut d, mut e, mut f] = conic.coefficients();
        if a + c < 0.0 {
            a = -a;
            b = -b;
            c = -c;
            d = -d;
            e = -e;
            f = -f;
        }
        let cx = (2.0 * c * d - b * e) / disc;
        let cy = (2.0 * a * e - b * d) / disc;
        let mu = -(a * cx * cx + b * cx * cy + c * cy * cy + d * cx + e * cy + f);
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(FitError::NotAnEllipse);
        }
        let half_trace = 0.5 * (a + c);
        let spread = 0.5 * ((a - c).hypot(b));
        let lam_min = half_trace - spread;
        let lam_max = half_trace + spread;
        if !(lam_min > 0.0) {
            return Err(FitError::NotAnEllipse);
        }
        let major = (mu / lam_min).sqrt();
        let minor = (mu / lam_max).sqrt();
        let theta = if b.abs() <= 1e-12 * (a.abs() + c.abs()) {
            if a <= c {
                0.0
            } else {
                FRAC_PI_2
            }
        } else {
            (lam_min - a).atan2(0.5 * b)
        };
        if !(major.is_finite() && minor > 0.0) {
            return Err(FitError::NotAnEllipse);
        }
        Ok(EllipseParams::new(cx, cy, major, minor, theta))
    }
}

/// Ramanujan's second approximation of the ellipse perimeter. Axes are
/// canonicalized first, so the function is symmetric in its arguments.
pub fn perimeter_axes(a: f64, b: f64) -> f64 {
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    assert!(b > 0.0, "semi-axes must be positive");
    let h = ((a - b) / (a + b)).powi(2);
    PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()))
}

/// Euclidean distance from `p` to the nearest point of the ellipse curve.
///
/// Works in the canonical frame folded into the first quadrant, where the
/// nearest-point condition has a unique root in (0, pi/2); that root is
/// found by bracketed Newton iteration with bisection fallback. Degenerate
/// positions on the axes take closed-form shortcuts.
pub fn point_ellipse_distance(e: &EllipseParams, p: [f64; 2]) -> f64 {
    let (u, v) = e.to_canonical(p[0], p[1]);
    let x = u.abs();
    let y = v.abs();
    let (a, b) = (e.a, e.b);

    if (a - b).abs() <= 1e-12 * a {
        return (x.hypot(y) - a).abs();
    }
    let c2 = a * a - b * b;
    let tiny = 1e-12 * a;
    if y <= tiny {
        // On the major axis the interior critical point exists only inside
        // the evolute cusp at x = c2/a.
        return if a * x < c2 {
            let ct = a * x / c2;
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            (x - a * ct).hypot(b * st)
        } else {
            (x - a).abs()
        };
    }
    if x <= tiny {
        return (y - b).abs();
    }

    // Root of f(t) = a x sin t - b y cos t - (a^2 - b^2) sin t cos t,
    // which brackets as f(0) < 0 < f(pi/2).
    let mut lo = 0.0f64;
    let mut hi = FRAC_PI_2;
    let mut t = (a * y).atan2(b * x);
    for _ in 0..64 {
        let (s, c) = t.sin_cos();
        let ft = a * x * s - b * y * c - c2 * s * c;
        if ft > 0.0 {
            hi = t;
        } else if ft < 0.0 {
            lo = t;
        } else {
            break;
        }
        let fp = a * x * c + b * y * s - c2 * (c * c - s * s);
        let mut next = t - ft / fp;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() < 1e-15 {
            t = next;
            break;
        }
        t = next;
    }
    let (s, c) = t.sin_cos();
    (x - a * c).hypot(y - b * s)
}

/// Root mean square of exact point-to-curve distances.
pub fn rmse(e: &EllipseParams, points: &[[f64; 2]]) -> f64 {
    assert!(!points.is_empty(), "rmse needs at least one point");
    let sum: f64 = points.iter().map(|&p| point_ellipse_distance(e, p).powi(2)).sum();
    (sum / points.len() as f64).sqrt()
}

/// Like [`rmse`] but abandons the accumulation once the result provably
/// exceeds `bound`. Returns the exact value otherwise.
pub(crate) fn rmse_bounded(e: &EllipseParams, points: &[[f64; 2]], bound: f64) -> Option<f64> {
    let limit = bound * bound * points.len() as f64;
    let mut sum = 0.0;
    for &p in points {
        sum += point_ellipse_distance(e, p).powi(2);
        if sum > limit {
            return None;
        }
    }
    Some((sum / points.len() as f64).sqrt())
}

/// Intersection-over-union of two ellipse interiors, counted on the integer
/// pixel grid of `canvas` (width, height). An empty union yields 0.
pub fn overlap_ratio(e1: &EllipseParams, e2: &EllipseParams, canvas: (u32, u32)) -> f64 {
    let (w, h) = canvas;
    let x0 = (e1.cx - e1.a).min(e2.cx - e2.a).floor().max(0.0) as u32;
    let y0 = (e1.cy - e1.a).min(e2.cy - e2.a).floor().max(0.0) as u32;
    let x1 = ((e1.cx + e1.a).max(e2.cx + e2.a).ceil() as i64 + 1).clamp(0, w as i64) as u32;
    let y1 = ((e1.cy + e1.a).max(e2.cy + e2.a).ceil() as i64 + 1).clamp(0, h as i64) as u32;
    let mut inter = 0u64;
    let mut union = 0u64;
    for y in y0..y1 {
        for x in x0..x1 {
            let p1 = e1.contains(x as f64, y as f64);
            let p2 = e2.contains(x as f64, y as f64);
            if p1 && p2 {
                inter += 1;
            }
            if p1 || p2 {
                union += 1;
            }
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Taubin,
    Fitzgibbon,
}

/// Fitted ellipse with its fit error.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub ellipse: EllipseParams,
    pub rmse: f64,
    pub n_points: usize,
    pub method: FitMethod,
}

/// Taubin-prior fit: try Taubin, fall back to Fitzgibbon when the conic is
/// not an ellipse, and report the exact-distance RMSE.
pub fn fit_ellipse(points: &[[f64; 2]]) -> Result<FitResult, FitError> {
    let (ellipse, method) = fit_ellipse_geometry(points)?;
    Ok(FitResult { rmse: rmse(&ellipse, points), n_points: points.len(), ellipse, method })
}

/// The fitting route of [`fit_ellipse`] without the RMSE computation.
pub fn fit_ellipse_geometry(points: &[[f64; 2]]) -> Result<(EllipseParams, FitMethod), FitError> {
    if points.len() < 5 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    if let Ok(conic) = fit_taubin(points) {
        if conic.is_ellipse() {
            if let Ok(e) = EllipseParams::from_conic(&conic) {
                return Ok((e, FitMethod::Taubin));
            }
        }
    }
    let conic = fit_fitzgibbon(points)?;
    let e = EllipseParams::from_conic(&conic)?;
    Ok((e, FitMethod::Fitzgibbon))
}

struct PointNorm {
    mx: f64,
    my: f64,
    s: f64,
}

fn point_norm(points: &[[f64; 2]]) -> Result<(Vec<[f64; 2]>, PointNorm), FitError> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let var: f64 = points.iter().map(|p| (p[0] - mx).powi(2) + (p[1] - my).powi(2)).sum();
    let s = (var / (2.0 * n)).sqrt();
    if !(s > 1e-12) {
        return Err(FitError::Degenerate);
    }
    let normed = points.iter().map(|p| [(p[0] - mx) / s, (p[1] - my) / s]).collect();
    Ok((normed, PointNorm { mx, my, s }))
}

fn denormalize_conic(v: [f64; 6], n: &PointNorm) -> Conic {
    let [a, b, c, d, e, f] = v;
    let (mx, my, s) = (n.mx, n.my, n.s);
    let gd = s * d - 2.0 * a * mx - b * my;
    let ge = s * e - b * mx - 2.0 * c * my;
    let gf = a * mx * mx + b * mx * my + c * my * my - s * d * mx - s * e * my + s * s * f;
    Conic::new(a, b, c, gd, ge, gf)
}

/// Taubin's direct conic fit: minimize the algebraic error normalized by the
/// gradient magnitude. May return a hyperbola.
pub fn fit_taubin(points: &[[f64; 2]]) -> Result<Conic, FitError> {
    if points.len() < 5 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    let (pts, norm) = point_norm(points)?;
    let inv_n = 1.0 / pts.len() as f64;

    let mut a6 = [[0.0f64; 6]; 6];
    let mut b5 = [[0.0f64; 5]; 5];
    for p in &pts {
        let (u, v) = (p[0], p[1]);
        let z = [u * u, u * v, v * v, u, v, 1.0];
        let zu = [2.0 * u, v, 0.0, 1.0, 0.0];
        let zv = [0.0, u, 2.0 * v, 0.0, 1.0];
        for i in 0..6 {
            for j in 0..6 {
                a6[i][j] += z[i] * z[j];
            }
        }
        for i in 0..5 {
            for j in 0..5 {
                b5[i][j] += zu[i] * zu[j] + zv[i] * zv[j];
            }
        }
    }
    for row in &mut a6 {
        for x in row {
            *x *= inv_n;
        }
    }
    for row in &mut b5 {
        for x in row {
            *x *= inv_n;
        }
    }

    // Eliminate the constant coefficient: with p = (q, f) the constraint
    // p'Bp = q'B5q ignores f, so f is minimized out through the Schur
    // complement of A's last diagonal entry (which is exactly 1).
    let a66 = a6[5][5];
    if !(a66 > 0.0) {
        return Err(FitError::Degenerate);
    }
    let mut ar = [[0.0f64; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            ar[i][j] = a6[i][j] - a6[i][5] * a6[j][5] / a66;
        }
    }

    let l = cholesky5(&b5).ok_or(FitError::Degenerate)?;
    // C = L^-1 Ar L^-T stays symmetric; smallest eigenvalue of the pencil.
    let w = solve_lower_mat5(&l, &ar);
    let wt = transpose5(&w);
    let ct = solve_lower_mat5(&l, &wt);
    let c = transpose5(&ct);
    let (vals, vecs) = jacobi_sym5(c);
    let mut best = 0;
    for k in 1..5 {
        if vals[k] < vals[best] {
            best = k;
        }
    }
    let y = [vecs[0][best], vecs[1][best], vecs[2][best], vecs[3][best], vecs[4][best]];
    let q = solve_upper_from_lower5(&l, &y);
    let f = -(a6[0][5] * q[0] + a6[1][5] * q[1] + a6[2][5] * q[2] + a6[3][5] * q[3]
        + a6[4][5] * q[4])
        / a66;
    Ok(denormalize_conic([q[0], q[1], q[2], q[3], q[4], f], &norm))
}

/// Fitzgibbon's direct least squares fit with the constraint
/// `4AC - B^2 = 1`, which forces an elliptical conic. Uses the numerically
/// stable block decomposition of the constrained eigenproblem.
pub fn fit_fitzgibbon(points: &[[f64; 2]]) -> Result<Conic, FitError> {
    if points.len() < 5 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    let (pts, norm) = point_norm(points)?;
    let inv_n = 1.0 / pts.len() as f64;

    let mut s1 = [[0.0f64; 3]; 3];
    let mut s2 = [[0.0f64; 3]; 3];
    let mut s3 = [[0.0f64; 3]; 3];
    for p in &pts {
        let (u, v) = (p[0], p[1]);
        let d1 = [u * u, u * v, v * v];
        let d2 = [u, v, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                s1[i][j] += d1[i] * d1[j];
                s2[i][j] += d1[i] * d2[j];
                s3[i][j] += d2[i] * d2[j];
            }
        }
    }
    for m in [&mut s1, &mut s2, &mut s3] {
        for row in m.iter_mut() {
            for x in row {
                *x *= inv_n;
            }
        }
    }

    let s3_inv = mat3_inverse(&s3).ok_or(FitError::Degenerate)?;
    // T = -S3^-1 S2^T
    let mut t = mat3_mul(&s3_inv, &mat3_transpose(&s2));
    for row in &mut t {
        for x in row {
            *x = -*x;
        }
    }
    let m0 = mat3_add(&s1, &mat3_mul(&s2, &t));
    // Apply C1^-1 for constraint matrix C1 = [[0,0,2],[0,-1,0],[2,0,0]].
    let m = [
        [m0[2][0] / 2.0, m0[2][1] / 2.0, m0[2][2] / 2.0],
        [-m0[1][0], -m0[1][1], -m0[1][2]],
        [m0[0][0] / 2.0, m0[0][1] / 2.0, m0[0][2] / 2.0],
    ];

    let trace = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2]
        - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = mat3_det(&m);
    let roots = solve_cubic(-trace, minors, -det);

    // Exactly one eigenvector satisfies the ellipse constraint 4ac - b^2 > 0.
    let mut best: Option<([f64; 3], f64)> = None;
    for lambda in roots {
        let n = [
            [m[0][0] - lambda, m[0][1], m[0][2]],
            [m[1][0], m[1][1] - lambda, m[1][2]],
            [m[2][0], m[2][1], m[2][2] - lambda],
        ];
        let candidates = [cross3(&n[0], &n[1]), cross3(&n[0], &n[2]), cross3(&n[1], &n[2])];
        let v = candidates
            .into_iter()
            .max_by(|p, q| norm3(p).partial_cmp(&norm3(q)).unwrap())
            .unwrap();
        let len = norm3(&v);
        if len < 1e-12 {
            continue;
        }
        let v = [v[0] / len, v[1] / len, v[2] / len];
        let cond = 4.0 * v[0] * v[2] - v[1] * v[1];
        if cond > 1e-14 {
            match best {
                Some((_, c0)) if c0 >= cond => {}
                _ => best = Some((v, cond)),
            }
        }
    }
    let (a1, _) = best.ok_or(FitError::Degenerate)?;
    let a2 = mat3_vec(&t, &a1);
    Ok(denormalize_conic([a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]], &norm))
}

// ---------------------------------------------------------------------------
// Small dense linear algebra, fixed sizes only.

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm3(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn mat3_transpose(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
    }
    t
}

fn mat3_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (k, bk) in b.iter().enumerate() {
                out[i][j] += a[i][k] * bk[j];
            }
        }
    }
    out
}

fn mat3_add(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][j] + b[i][j];
        }
    }
    out
}

fn mat3_vec(m: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn mat3_det(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn mat3_inverse(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = mat3_det(m);
    let scale = m.iter().flatten().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    if det.abs() <= 1e-13 * scale.powi(3).max(f64::MIN_POSITIVE) {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut adj = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c0, c1) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[j][i] = sign * minor * inv_det;
        }
    }
    Some(adj)
}

/// Real roots of `x^3 + b x^2 + c x + d`. Borderline discriminants fall
/// into the trigonometric branch, which degrades gracefully to repeated
/// roots.
fn solve_cubic(b: f64, c: f64, d: f64) -> Vec<f64> {
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = 0.25 * q * q + p * p * p / 27.0;
    if disc > 0.0 {
        let sq = disc.sqrt();
        let t = (-0.5 * q + sq).cbrt() + (-0.5 * q - sq).cbrt();
        vec![t + shift]
    } else {
        let m = 2.0 * (-p / 3.0).max(0.0).sqrt();
        if m < 1e-300 {
            return vec![shift, shift, shift];
        }
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3).map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos() + shift).collect()
    }
}

fn cholesky5(a: &[[f64; 5]; 5]) -> Option<[[f64; 5]; 5]> {
    let scale = (0..5).fold(0.0f64, |acc, i| acc.max(a[i][i].abs()));
    let mut l = [[0.0f64; 5]; 5];
    for i in 0..5 {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 1e-13 * scale {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solve `L X = B` column-wise for lower-triangular `L`.
fn solve_lower_mat5(l: &[[f64; 5]; 5], b: &[[f64; 5]; 5]) -> [[f64; 5]; 5] {
    let mut x = [[0.0f64; 5]; 5];
    for col in 0..5 {
        for i in 0..5 {
            let mut sum = b[i][col];
            for k in 0..i {
                sum -= l[i][k] * x[k][col];
            }
            x[i][col] = sum / l[i][i];
        }
    }
    x
}

/// Solve `L^T x = y` given lower-triangular `L`.
fn solve_upper_from_lower5(l: &[[f64; 5]; 5], y: &[f64; 5]) -> [f64; 5] {
    let mut x = [0.0f64; 5];
    for i in (0..5).rev() {
        let mut sum = y[i];
        for k in i + 1..5 {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    x
}

fn transpose5(m: &[[f64; 5]; 5]) -> [[f64; 5]; 5] {
    let mut t = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            t[i][j] = m[j][i];
        }
    }
    t
}

/// Cyclic Jacobi eigendecomposition of a symmetric 5x5 matrix. Returns
/// eigenvalues and the orthogonal matrix of eigenvectors (columns).
fn jacobi_sym5(mut a: [[f64; 5]; 5]) -> ([f64; 5], [[f64; 5]; 5]) {
    let mut v = [[0.0f64; 5]; 5];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..5 {
            for j in i + 1..5 {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..5 {
            for q in p + 1..5 {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..5 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..5 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..5 {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2], a[3][3], a[4][4]], v)
}
