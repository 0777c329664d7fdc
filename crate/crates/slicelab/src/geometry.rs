//! Christoffel symbols, geodesic shooting, two-point distances and the
//! radial growth probe.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::lu_solve;
use crate::metric::MetricFamily;

/// Christoffel symbols of the second kind at a point; `get(k, i, j)` is
/// `Gamma^k_{ij}`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    dim: usize,
    /// `sym[k]` is the symmetric matrix `Gamma^k_{..}`.
    sym: Vec<DMatrix<f64>>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.sym[k][(i, j)]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Christoffel symbols from metric partial derivatives (analytic or
/// finite-difference, per the family's mode).
pub fn christoffel(family: &MetricFamily, p: &[f64]) -> Result<Christoffel> {
    family.check_domain(p)?;
    let n = family.dim_ambient();
    let g = family.ambient_metric(p);
    let ginv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateMetric(format!("ambient metric singular at {p:?}")))?;
    let partials: Vec<DMatrix<f64>> = (0..n)
        .map(|a| family.ambient_metric_partial(p, a))
        .collect::<Result<_>>()?;
    let mut sym = vec![DMatrix::zeros(n, n); n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[(k, l)]
                        * (partials[i][(l, j)] + partials[j][(l, i)] - partials[l][(i, j)]);
                }
                sym[k][(i, j)] = 0.5 * s;
                sym[k][(j, i)] = 0.5 * s;
            }
        }
    }
    Ok(Christoffel { dim: n, sym })
}

/// A numerically integrated geodesic.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub arc_params: Vec<f64>,
    pub energy: f64,
}

impl GeodesicPath {
    pub fn endpoint(&self) -> &[f64] {
        self.points.last().unwrap()
    }

    /// Largest relative deviation of the speed from its initial value.
    pub fn speed_drift(&self, family: &MetricFamily) -> f64 {
        let s0 = family.norm(&self.points[0], &self.velocities[0]);
        self.points
            .iter()
            .zip(&self.velocities)
            .map(|(p, v)| (family.norm(p, v) - s0).abs() / s0)
            .fold(0.0, f64::max)
    }
}

fn geodesic_rhs(family: &MetricFamily, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    let gamma = christoffel(family, x)?;
    let mut acc = vec![0.0; n];
    for k in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += gamma.get(k, i, j) * v[i] * v[j];
            }
        }
        acc[k] = -s;
    }
    Ok(acc)
}

/// Integrate the geodesic ODE with the classical fixed-step 4th-order
/// scheme. `length` is the arc length travelled when `velocity` is unit;
/// in general the affine parameter runs to `length / |velocity|`.
pub fn geodesic_shoot(
    family: &MetricFamily,
    start: &[f64],
    velocity: &[f64],
    length: f64,
    steps: usize,
) -> Result<GeodesicPath> {
    if steps < 16 {
        return Err(Error::InvalidParams(format!(
            "geodesic integration needs >= 16 steps, got {steps}"
        )));
    }
    family.check_domain(start)?;
    let n = start.len();
    let speed = family.norm(start, velocity);
    if !(speed > 0.0) {
        return Err(Error::InvalidParams("zero-speed geodesic shot".into()));
    }
    let total_param = length / speed;
    let h = total_param / steps as f64;

    let mut x = start.to_vec();
    let mut v = velocity.to_vec();
    let mut points = vec![x.clone()];
    let mut velocities = vec![v.clone()];
    let mut arc_params = vec![0.0];
    let mut energy = 0.0;

    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p + s * q).collect()
    };

    for step in 0..steps {
        let eval = |xs: &[f64], vs: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
            let wrapped = family.wrap_point(xs);
            if !family.contains(&wrapped) {
                return Err(Error::LeftDomain {
                    point: points.last().unwrap().clone(),
                    arc: arc_params.last().copied().unwrap_or(0.0),
                });
            }
            Ok((vs.to_vec(), geodesic_rhs(family, &wrapped, vs)?))
        };
        let (k1x, k1v) = eval(&x, &v)?;
        let (k2x, k2v) = eval(&add(&x, &k1x, 0.5 * h), &add(&v, &k1v, 0.5 * h))?;
        let (k3x, k3v) = eval(&add(&x, &k2x, 0.5 * h), &add(&v, &k2v, 0.5 * h))?;
        let (k4x, k4v) = eval(&add(&x, &k3x, h), &add(&v, &k3v, h))?;
        for i in 0..n {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        let wrapped = family.wrap_point(&x);
        if !family.contains(&wrapped) {
            return Err(Error::LeftDomain {
                point: points.last().unwrap().clone(),
                arc: arc_params.last().copied().unwrap_or(0.0),
            });
        }
        energy += family.dot(&wrapped, &v, &v) * h.abs() * 0.5;
        points.push(x.clone());
        velocities.push(v.clone());
        arc_params.push(speed * h * (step + 1) as f64);
    }

    Ok(GeodesicPath {
        points,
        velocities,
        arc_params,
        energy,
    })
}

/// Best-of-multistart shooting solution of the two-point problem; returns
/// the geodesic distance between `p` and `q`.
pub fn geodesic_distance(family: &MetricFamily, p: &[f64], q: &[f64]) -> Result<f64> {
    family.check_domain(p)?;
    family.check_domain(q)?;
    let diff = family.coord_difference(p, q);
    let chart_len = family.norm(p, &diff);
    if chart_len < 1e-14 {
        return Ok(0.0);
    }
    let steps = 200;

    // endpoint of the affine-parameter-1 geodesic with initial velocity w
    let endpoint_err = |w: &[f64]| -> Result<Vec<f64>> {
        let speed = family.norm(p, w);
        let path = geodesic_shoot(family, p, w, speed, steps)?;
        Ok(family.coord_difference(q, path.endpoint()))
    };

    let mut best: Option<f64> = None;
    let starts = multistart_velocities(family, p, &diff, 8);
    for w0 in starts {
        if let Some(len) = shoot_newton(family, p, &w0, &endpoint_err) {
            best = Some(best.map_or(len, |b: f64| b.min(len)));
        }
    }
    best.ok_or(Error::NoConvergence)
}

fn multistart_velocities(
    family: &MetricFamily,
    p: &[f64],
    diff: &[f64],
    count: usize,
) -> Vec<Vec<f64>> {
    let n = diff.len();
    let chart_len = family.norm(p, diff);
    let mut starts = vec![diff.to_vec()];
    // deterministic perturbed directions around the chart guess
    for k in 1..count {
        let angle = 0.35 * k as f64 * if k % 2 == 0 { 1.0 } else { -1.0 };
        let mut w = diff.to_vec();
        for i in 0..n {
            let bump = angle * 0.3 * ((k + i) % 3) as f64;
            w[i] = diff[i] * angle.cos() + chart_len * 0.2 * (angle + bump).sin();
        }
        starts.push(w);
    }
    starts
}

fn shoot_newton(
    family: &MetricFamily,
    p: &[f64],
    w0: &[f64],
    endpoint_err: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
) -> Option<f64> {
    let n = w0.len();
    let mut w = DVector::from_column_slice(w0);
    let tol = 1e-10 * (1.0 + family.norm(p, w0));
    let mut err = DVector::from_vec(endpoint_err(w.as_slice()).ok()?);
    for _ in 0..40 {
        if err.norm() <= tol {
            return Some(family.norm(p, w.as_slice()));
        }
        // finite-difference Jacobian of the endpoint map
        let mut jac = DMatrix::zeros(n, n);
        let fd = 1e-6 * (1.0 + w.norm());
        for j in 0..n {
            let mut wp = w.clone();
            wp[j] += fd;
            let ep = DVector::from_vec(endpoint_err(wp.as_slice()).ok()?);
            jac.set_column(j, &((&ep - &err) / fd));
        }
        let delta = lu_solve(&jac, &(-&err))?;
        // damped update
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let trial = &w + lambda * &delta;
            if let Ok(e) = endpoint_err(trial.as_slice()) {
                let e = DVector::from_vec(e);
                if e.norm() < err.norm() {
                    w = trial;
                    err = e;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            return None;
        }
    }
    if err.norm() <= tol {
        Some(family.norm(p, w.as_slice()))
    } else {
        None
    }
}

/// Samples of the induced angular metric coefficient `h_r(u,u)` along a
/// radial geodesic fan.
///
/// Generic centers shoot two geodesics separated by angle `delta` in the
/// plane spanned by `direction` and a deterministic orthogonal companion,
/// then difference endpoints through the ambient quadratic form. Centers
/// at the chart apex of a polar family (t at the collar or below) read the
/// fiber coefficient along the coordinate ray, matching the removed-point
/// picture.
pub fn normal_growth_probe(
    family: &MetricFamily,
    center: &[f64],
    direction: &[f64],
    radii: &[f64],
    delta: f64,
) -> Result<Vec<f64>> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(Error::InvalidParams(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    let apex_mode = center[0] <= family.t_interval().0 + family.collar() + 1e-12;
    if apex_mode {
        // rays from the removed point are the t-coordinate lines; the
        // angular coefficient is the fiber form on a coordinate-unit vector
        let t0 = family.t_interval().0;
        let mut out = Vec::with_capacity(radii.len());
        for &r in radii {
            let t = t0 + r;
            let (lo, hi) = family.effective_t_range();
            if t <= lo || t >= hi {
                return Err(Error::RadiusTooLarge(r));
            }
            let g = family.g_at(t, &center[1..]);
            out.push(g[(0, 0)]);
        }
        return Ok(out);
    }

    family.check_domain(center)?;
    let speed = family.norm(center, direction);
    if !(speed > 0.0) {
        return Err(Error::InvalidParams("zero probe direction".into()));
    }
    let v: Vec<f64> = direction.iter().map(|c| c / speed).collect();
    let u = orthogonal_companion(family, center, &v)?;

    let steps_for = |r: f64| ((r * 400.0) as usize).clamp(64, 4000);
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let tilt: Vec<f64> = v
            .iter()
            .zip(&u)
            .map(|(a, b)| a * delta.cos() + b * delta.sin())
            .collect();
        let pa = geodesic_shoot(family, center, &v, r, steps_for(r))?;
        let pb = geodesic_shoot(family, center, &tilt, r, steps_for(r))?;
        let ea = pa.endpoint();
        let eb = pb.endpoint();
        let d = family.coord_difference(ea, eb);
        let mid: Vec<f64> = ea.iter().zip(eb).map(|(a, b)| 0.5 * (a + b)).collect();
        let mid = family.wrap_point(&mid);
        let sep2 = family.dot(&mid, &d, &d);
        if sep2.sqrt() > 0.5 {
            return Err(Error::RadiusTooLarge(r));
        }
        out.push(sep2 / (delta * delta));
    }
    Ok(out)
}

/// First coordinate vector with a nonzero component orthogonal to `v`,
/// normalized in the ambient metric (deterministic coordinate order).
fn orthogonal_companion(family: &MetricFamily, p: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let n = p.len();
    for axis in 0..n {
        let mut e = vec![0.0; n];
        e[axis] = 1.0;
        let proj = family.dot(p, &e, v);
        let mut w: Vec<f64> = e.iter().zip(v).map(|(a, b)| a - proj * b).collect();
        let norm = family.norm(p, &w);
        if norm > 1e-8 {
            for c in &mut w {
                *c /= norm;
            }
            return Ok(w);
        }
    }
    Err(Error::FrameFailure(format!(
        "no coordinate direction independent of {v:?} at {p:?}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspec::FuncSpec;
    use crate::metric::{model_by_name, model_metric, Fiber, ModelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn flat_line() -> crate::metric::MetricFamily {
        model_metric(&ModelSpec::Warped {
            f: FuncSpec::constant(1.0),
            fiber: Fiber::Line { lo: -10.0, hi: 10.0 },
            t_range: Some((-10.0, 10.0)),
        })
        .unwrap()
    }

    #[test]
    fn christoffel_flat_is_zero() {
        let fam = flat_line();
        let c = christoffel(&fam, &[0.3, 0.4]).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!(c.get(k, i, j).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn christoffel_polar_textbook_values() {
        // dr^2 + r^2 dphi^2: Gamma^r_pp = -r, Gamma^p_rp = 1/r
        let eu = model_by_name("euclidean_polar", &[]).unwrap();
        let r = 1.7;
        let c = christoffel(&eu, &[r, 0.4]).unwrap();
        assert!((c.get(0, 1, 1) + r).abs() < 1e-9);
        assert!((c.get(1, 0, 1) - 1.0 / r).abs() < 1e-9);
        assert!((c.get(1, 1, 0) - 1.0 / r).abs() < 1e-9, "symmetry in (i,j)");

        // sphere: Gamma^r_pp = -sin r cos r
        let sp = model_metric(&ModelSpec::SpherePolar { k: 1.0 }).unwrap();
        let r = 0.9;
        let c = christoffel(&sp, &[r, 0.1]).unwrap();
        assert!((c.get(0, 1, 1) + r.sin() * r.cos()).abs() < 1e-9);
    }

    #[test]
    fn straight_lines_in_flat_product() {
        let fam = flat_line();
        let path = geodesic_shoot(&fam, &[0.0, 0.0], &[0.6, 0.8], 2.0, 64).unwrap();
        let end = path.endpoint();
        assert!((end[0] - 1.2).abs() < 1e-10);
        assert!((end[1] - 1.6).abs() < 1e-10);
        assert!(path.speed_drift(&fam) < 1e-12);
    }

    #[test]
    fn equator_is_a_geodesic() {
        let sp = model_metric(&ModelSpec::SpherePolar { k: 1.0 }).unwrap();
        let path = geodesic_shoot(&sp, &[FRAC_PI_2, 0.0], &[0.0, 1.0], 2.0, 256).unwrap();
        for p in &path.points {
            assert!((p[0] - FRAC_PI_2).abs() < 1e-10, "left the equator: {p:?}");
        }
    }

    #[test]
    fn radial_shot_advances_radius() {
        let eu = model_by_name("euclidean_polar", &[]).unwrap();
        let path = geodesic_shoot(&eu, &[1.0, 0.3], &[1.0, 0.0], 2.0, 128).unwrap();
        let end = path.endpoint();
        assert!((end[0] - 3.0).abs() < 1e-10);
        assert!((end[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn left_domain_is_reported() {
        let sp = model_metric(&ModelSpec::SpherePolar { k: 1.0 }).unwrap();
        let res = geodesic_shoot(&sp, &[FRAC_PI_2, 0.0], &[1.0, 0.0], 3.0, 128);
        match res {
            Err(Error::LeftDomain { point, .. }) => {
                assert!(point[0] > FRAC_PI_2);
            }
            other => panic!("expected LeftDomain, got {other:?}"),
        }
    }

    #[test]
    fn speed_conservation_on_models() {
        let models = [
            model_by_name("euclidean_polar", &[]).unwrap(),
            model_by_name("hyperbolic_polar", &[1.0]).unwrap(),
            model_metric(&ModelSpec::SpherePolar { k: 1.0 }).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for fam in &models {
            let (lo, hi) = fam.effective_t_range();
            for _ in 0..5 {
                let t = rng.gen_range((lo + 0.3)..(hi - 0.3).min(lo + 2.5));
                let phi = rng.gen_range(0.0..PI);
                let a = rng.gen_range(0.0..PI);
                let v = [a.cos(), a.sin()];
                if let Ok(path) = geodesic_shoot(fam, &[t, phi], &v, 0.5, 1000) {
                    assert!(
                        path.speed_drift(fam) <= 1e-5,
                        "{} drift {}",
                        fam.label(),
                        path.speed_drift(fam)
                    );
                }
            }
        }
    }

    #[test]
    fn distances_match_oracles() {
        // flat: |(3,4)| = 5
        let fam = flat_line();
        let d = geodesic_distance(&fam, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((d - 5.0).abs() < 1e-6, "flat distance {d}");

        // sphere equator arc of phi-length 1
        let sp = model_metric(&ModelSpec::SpherePolar { k: 1.0 }).unwrap();
        let d = geodesic_distance(&sp, &[FRAC_PI_2, 0.2], &[FRAC_PI_2, 1.2]).unwrap();
        assert!((d - 1.0).abs() < 1e-6, "equator distance {d}");

        // hyperbolic radial pair
        let hy = model_by_name("hyperbolic_polar", &[1.0]).unwrap();
        let d = geodesic_distance(&hy, &[1.0, 0.5], &[2.0, 0.5]).unwrap();
        assert!((d - 1.0).abs() < 1e-6, "radial distance {d}");
    }

    #[test]
    fn distance_symmetry() {
        let sp = model_metric(&ModelSpec::SpherePolar { k: 1.0 }).unwrap();
        let p = [1.1, 0.3];
        let q = [1.7, 1.0];
        let dpq = geodesic_distance(&sp, &p, &q).unwrap();
        let dqp = geodesic_distance(&sp, &q, &p).unwrap();
        assert!((dpq - dqp).abs() < 1e-6);
    }

    #[test]
    fn growth_probe_flat_is_r_squared() {
        let fam = flat_line();
        let radii = [0.1, 0.2, 0.4, 0.8];
        let h = normal_growth_probe(&fam, &[0.5, -0.2], &[1.0, 0.0], &radii, 1e-3).unwrap();
        for (r, v) in radii.iter().zip(&h) {
            assert!((v - r * r).abs() < 1e-4 * (1.0 + r * r), "h_{r} = {v}");
        }
        assert!(h.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn growth_probe_apex_reads_model_profile() {
        // hyperbolic apex: cosh^2 r, increasing everywhere
        let hy = model_by_name("hyperbolic_polar", &[1.0]).unwrap();
        let radii: Vec<f64> = (1..25).map(|i| 0.12 * i as f64).collect();
        let h = normal_growth_probe(&hy, &[0.0, 0.0], &[1.0, 0.0], &radii, 1e-3).unwrap();
        for (r, v) in radii.iter().zip(&h) {
            assert!((v - r.cosh().powi(2)).abs() < 1e-10);
        }
        assert!(h.windows(2).all(|w| w[1] > w[0]));

        // sphere apex: sin^2 r, increasing before pi/2, decreasing after
        let sp = model_metric(&ModelSpec::SpherePolar { k: 1.0 }).unwrap();
        let radii: Vec<f64> = (1..30).map(|i| 0.1 * i as f64).collect();
        let h = normal_growth_probe(&sp, &[0.0, 0.0], &[1.0, 0.0], &radii, 1e-3).unwrap();
        for (i, w) in h.windows(2).enumerate() {
            let r_hi = radii[i + 1];
            if r_hi < FRAC_PI_2 {
                assert!(w[1] > w[0], "should grow below pi/2");
            }
            if radii[i] > FRAC_PI_2 {
                assert!(w[1] < w[0], "should decay past pi/2");
            }
        }
    }

    #[test]
    fn growth_probe_increases_near_any_center() {
        let models = [
            model_by_name("euclidean_polar", &[]).unwrap(),
            model_by_name("hyperbolic_polar", &[1.0]).unwrap(),
            model_metric(&ModelSpec::SpherePolar { k: 1.0 }).unwrap(),
        ];
        let radii = [0.05, 0.1, 0.15, 0.2];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for fam in &models {
            for _ in 0..20 {
                let t = rng.gen_range(0.8..2.0);
                let phi = rng.gen_range(0.0..PI);
                let a = rng.gen_range(0.0..(2.0 * PI));
                let h =
                    normal_growth_probe(fam, &[t, phi], &[a.cos(), a.sin()], &radii, 1e-3).unwrap();
                assert!(
                    h.windows(2).all(|w| w[1] > w[0]),
                    "{}: not increasing at small r: {h:?}",
                    fam.label()
                );
            }
        }
    }
}
