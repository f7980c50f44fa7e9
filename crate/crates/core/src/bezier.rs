//! Cubic Bézier evaluation, projection and least-squares fitting.

use nalgebra::{Matrix2, Matrix6, Vector2, Vector6};

use crate::error::{Error, Result};
use crate::types::Vec3;

pub type CubicBezier = [Vec3; 4];

/// Bernstein weights of the cubic basis at `t`.
#[inline]
pub fn basis(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [s * s * s, 3.0 * t * s * s, 3.0 * t * t * s, t * t * t]
}

#[inline]
pub fn eval(ctrl: &CubicBezier, t: f64) -> Vec3 {
    let b = basis(t);
    ctrl[0] * b[0] + ctrl[1] * b[1] + ctrl[2] * b[2] + ctrl[3] * b[3]
}

/// Checked evaluation; `t` must lie in `[0, 1]`.
pub fn bezier_point(ctrl: &CubicBezier, t: f64) -> Result<Vec3> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("Bezier parameter {t} outside [0, 1]")));
    }
    Ok(eval(ctrl, t))
}

pub fn derivative(ctrl: &CubicBezier, t: f64) -> Vec3 {
    let s = 1.0 - t;
    ((ctrl[1] - ctrl[0]) * (s * s) + (ctrl[2] - ctrl[1]) * (2.0 * t * s) + (ctrl[3] - ctrl[2]) * (t * t))
        * 3.0
}

pub fn second_derivative(ctrl: &CubicBezier, t: f64) -> Vec3 {
    ((ctrl[2] - ctrl[1] * 2.0 + ctrl[0]) * (1.0 - t) + (ctrl[3] - ctrl[2] * 2.0 + ctrl[1]) * t) * 6.0
}

fn newton_project(ctrl: &CubicBezier, x: &Vec3, mut t: f64) -> f64 {
    for _ in 0..32 {
        let d = eval(ctrl, t) - x;
        let d1 = derivative(ctrl, t);
        let d2 = second_derivative(ctrl, t);
        let num = d.dot(&d1);
        let den = d1.dot(&d1) + d.dot(&d2);
        if den.abs() < 1e-300 {
            break;
        }
        let next = (t - num / den).clamp(0.0, 1.0);
        if (next - t).abs() < 1e-15 {
            t = next;
            break;
        }
        t = next;
    }
    t
}

/// Closest parameter in `[0, 1]` to `x`, from 16 evenly seeded Newton starts.
pub fn closest_param(ctrl: &CubicBezier, x: &Vec3) -> (f64, f64) {
    let mut best = (0.0, f64::INFINITY);
    for k in 0..16 {
        let t = newton_project(ctrl, x, k as f64 / 15.0);
        let d = (eval(ctrl, t) - x).norm();
        if d < best.1 {
            best = (t, d);
        }
    }
    best
}

fn chord_params(points: &[Vec3]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(points.len());
    let mut total = 0.0;
    acc.push(0.0);
    for w in points.windows(2) {
        total += (w[1] - w[0]).norm();
        acc.push(total);
    }
    if total > 0.0 {
        acc.iter_mut().for_each(|v| *v /= total);
    } else {
        let n = (points.len() - 1) as f64;
        acc.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 / n);
    }
    acc
}

/// Solves for the inner control points with the endpoints pinned.
fn solve_inner(points: &[Vec3], params: &[f64], p0: Vec3, p3: Vec3) -> CubicBezier {
    let mut a = Matrix2::<f64>::zeros();
    let mut r1 = Vec3::zeros();
    let mut r2 = Vec3::zeros();
    for (x, &t) in points.iter().zip(params) {
        let b = basis(t);
        a[(0, 0)] += b[1] * b[1];
        a[(0, 1)] += b[1] * b[2];
        a[(1, 1)] += b[2] * b[2];
        let rest = x - p0 * b[0] - p3 * b[3];
        r1 += rest * b[1];
        r2 += rest * b[2];
    }
    a[(1, 0)] = a[(0, 1)];
    let straight = [p0, p0 + (p3 - p0) / 3.0, p0 + (p3 - p0) * (2.0 / 3.0), p3];
    let Some(inv) = a.try_inverse().filter(|_| a.determinant().abs() > 1e-18) else {
        return straight;
    };
    let mut ctrl = straight;
    for k in 0..3 {
        let sol = inv * Vector2::new(r1[k], r2[k]);
        ctrl[1][k] = sol[0];
        ctrl[2][k] = sol[1];
    }
    ctrl
}

fn max_residual(ctrl: &CubicBezier, points: &[Vec3], params: &[f64]) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for (i, (x, &t)) in points.iter().zip(params).enumerate() {
        let d = (eval(ctrl, t) - x).norm();
        if d > worst.0 {
            worst = (d, i);
        }
    }
    worst
}

const MAX_REFIT_PASSES: usize = 2000;

/// Single cubic with pinned endpoints: chord-length start, then alternating
/// least squares and Newton reparameterization. Returns the curve, the max
/// deviation and the index of the worst point.
pub fn fit_single(points: &[Vec3]) -> (CubicBezier, f64, usize) {
    let n = points.len();
    let (p0, p3) = (points[0], points[n - 1]);
    let mut params = chord_params(points);
    let mut ctrl = solve_inner(points, &params, p0, p3);
    let (mut best_dev, mut best_idx) = max_residual(&ctrl, points, &params);
    let mut best = ctrl;
    for _ in 0..MAX_REFIT_PASSES {
        if best_dev < 1e-14 {
            break;
        }
        for i in 1..n - 1 {
            params[i] = newton_project(&ctrl, &points[i], params[i]);
        }
        ctrl = solve_inner(points, &params, p0, p3);
        let (dev, idx) = max_residual(&ctrl, points, &params);
        if dev < best_dev {
            let gain = best_dev - dev;
            best = ctrl;
            best_idx = idx;
            best_dev = dev;
            if gain < best_dev * 1e-9 {
                break;
            }
        } else {
            break;
        }
    }
    let (ctrl, params) = polish(points, best, params_for(&best, points));
    let (dev, idx) = max_residual(&ctrl, points, &params);
    if dev < best_dev {
        return (ctrl, dev, idx);
    }
    (best, best_dev, best_idx)
}

fn params_for(ctrl: &CubicBezier, points: &[Vec3]) -> Vec<f64> {
    let n = points.len();
    let mut params = chord_params(points);
    for i in 1..n - 1 {
        params[i] = newton_project(ctrl, &points[i], params[i]);
    }
    params
}

fn sse_of(ctrl: &CubicBezier, points: &[Vec3], params: &[f64]) -> f64 {
    points.iter().zip(params).map(|(x, &t)| (eval(ctrl, t) - x).norm_squared()).sum()
}

/// Joint Gauss–Newton over the inner controls and the interior parameters.
/// Each parameter only touches its own residual, so it is eliminated with a
/// Schur complement, leaving a 6×6 solve per iteration.
fn polish(points: &[Vec3], mut ctrl: CubicBezier, mut params: Vec<f64>) -> (CubicBezier, Vec<f64>) {
    let n = points.len();
    let mut sse = sse_of(&ctrl, points, &params);
    for _ in 0..50 {
        let mut s = Matrix6::<f64>::zeros();
        let mut rhs = Vector6::<f64>::zeros();
        let mut per_point = Vec::with_capacity(n);
        for i in 1..n - 1 {
            let t = params[i];
            let b = basis(t);
            let r = eval(&ctrl, t) - points[i];
            let g = derivative(&ctrl, t);
            // J_i = [b1 I, b2 I, g]
            let mut hpt = Vector6::zeros();
            let mut gp = Vector6::zeros();
            for k in 0..3 {
                hpt[k] = b[1] * g[k];
                hpt[k + 3] = b[2] * g[k];
                gp[k] = b[1] * r[k];
                gp[k + 3] = b[2] * r[k];
            }
            for k in 0..3 {
                s[(k, k)] += b[1] * b[1];
                s[(k, k + 3)] += b[1] * b[2];
                s[(k + 3, k)] += b[1] * b[2];
                s[(k + 3, k + 3)] += b[2] * b[2];
            }
            let htt = g.norm_squared();
            let gt = g.dot(&r);
            if htt > 1e-300 {
                s -= hpt * hpt.transpose() / htt;
                rhs -= gp - hpt * (gt / htt);
            } else {
                rhs -= gp;
            }
            per_point.push((hpt, htt, gt));
        }
        let Some(dp) = s.cholesky().map(|c| c.solve(&rhs)) else { break };
        let mut dt = vec![0.0; n];
        for i in 1..n - 1 {
            let (hpt, htt, gt) = per_point[i - 1];
            if htt > 1e-300 {
                dt[i] = -(gt + hpt.dot(&dp)) / htt;
            }
        }
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let mut c = ctrl;
            for k in 0..3 {
                c[1][k] += scale * dp[k];
                c[2][k] += scale * dp[k + 3];
            }
            let p: Vec<f64> = (0..n).map(|i| (params[i] + scale * dt[i]).clamp(0.0, 1.0)).collect();
            let e = sse_of(&c, points, &p);
            if e < sse {
                let gain = sse - e;
                ctrl = c;
                params = p;
                sse = e;
                accepted = gain > sse * 1e-12 && sse > 1e-30;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (ctrl, params)
}

/// Least-squares cubic Bézier chain through an ordered polyline. Endpoints are
/// interpolated exactly; pieces whose deviation exceeds `max_deviation` are
/// split at the worst point and refit.
pub fn fit_bezier(polyline: &[Vec3], max_deviation: f64) -> Result<Vec<CubicBezier>> {
    if polyline.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: polyline.len(),
        });
    }
    let mut out = Vec::new();
    fit_recursive(polyline, max_deviation, &mut out);
    Ok(out)
}

fn fit_recursive(points: &[Vec3], tol: f64, out: &mut Vec<CubicBezier>) {
    let (ctrl, dev, worst) = fit_single(points);
    let n = points.len();
    if dev <= tol || n < 7 {
        out.push(ctrl);
        return;
    }
    // Both halves keep at least four points.
    let split = worst.clamp(3, n - 4);
    fit_recursive(&points[..=split], tol, out);
    fit_recursive(&points[split..], tol, out);
}
