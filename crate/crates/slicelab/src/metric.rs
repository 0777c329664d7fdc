//! One-parameter metric families `beta dt^2 + g_t` on `I x F`, their
//! Lie-derivative tensor along `d/dt`, monotonicity classification and the
//! built-in model library (constant-curvature polar charts, warped and
//! doubly warped products, Killing lapses).

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspec::{CompiledFunc, FuncSpec};
use crate::linalg::{cholesky_spd, generalized_symmetric_eigenvalues};

pub type ScalarFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
pub type FormFn = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;
pub type GradFn = Arc<dyn Fn(f64, &[f64]) -> DVector<f64> + Send + Sync>;
pub type FormAxisFn = Arc<dyn Fn(f64, &[f64], usize) -> DMatrix<f64> + Send + Sync>;

/// One fiber coordinate range. Periodic axes identify `lo` and `hi`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn circle() -> Self {
        Axis {
            lo: 0.0,
            hi: std::f64::consts::TAU,
            periodic: true,
        }
    }

    pub fn line(lo: f64, hi: f64) -> Self {
        Axis {
            lo,
            hi,
            periodic: false,
        }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn wrap(&self, x: f64) -> f64 {
        if !self.periodic {
            return x;
        }
        let len = self.length();
        let mut y = (x - self.lo) % len;
        if y < 0.0 {
            y += len;
        }
        self.lo + y
    }
}

/// How `d/dt` derivatives of the metric data are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference { h: f64 },
}

/// Which closed-form family the metric belongs to; drives the graph-PDE
/// specializations and latitude constructions.
#[derive(Debug, Clone)]
pub enum Structure {
    Generic,
    FlatProduct,
    EuclideanPolar,
    HyperbolicPolar { k: f64 },
    SpherePolar { k: f64 },
    Warped { f: CompiledFunc },
    Killing { h: CompiledFunc },
    DoublyWarped { f1: CompiledFunc, f2: CompiledFunc },
}

/// A chart-based family `beta(t,x) dt^2 + g_t(x)` with optional analytic
/// derivative closures. Values are immutable and cheap to clone (Arc'd).
#[derive(Clone)]
pub struct MetricFamily {
    label: String,
    t_interval: (f64, f64),
    singular_ends: (bool, bool),
    collar: f64,
    axes: Vec<Axis>,
    beta: ScalarFn,
    g: FormFn,
    dbeta_dt: Option<ScalarFn>,
    dg_dt: Option<FormFn>,
    dbeta_dx: Option<GradFn>,
    dg_dx: Option<FormAxisFn>,
    mode: DerivativeMode,
    structure: Structure,
}

impl std::fmt::Debug for MetricFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricFamily")
            .field("label", &self.label)
            .field("t_interval", &self.t_interval)
            .field("axes", &self.axes)
            .field("mode", &self.mode)
            .finish()
    }
}

impl MetricFamily {
    pub fn new(
        label: impl Into<String>,
        t_interval: (f64, f64),
        axes: Vec<Axis>,
        beta: ScalarFn,
        g: FormFn,
    ) -> Self {
        let h = 1e-5 * (t_interval.1 - t_interval.0);
        MetricFamily {
            label: label.into(),
            t_interval,
            singular_ends: (false, false),
            collar: 0.0,
            axes,
            beta,
            g,
            dbeta_dt: None,
            dg_dt: None,
            dbeta_dx: None,
            dg_dx: None,
            mode: DerivativeMode::FiniteDifference { h },
            structure: Structure::Generic,
        }
    }

    pub fn with_dt_derivatives(mut self, dbeta_dt: ScalarFn, dg_dt: FormFn) -> Self {
        self.dbeta_dt = Some(dbeta_dt);
        self.dg_dt = Some(dg_dt);
        self.mode = DerivativeMode::Analytic;
        self
    }

    pub fn with_dx_derivatives(mut self, dbeta_dx: GradFn, dg_dx: FormAxisFn) -> Self {
        self.dbeta_dx = Some(dbeta_dx);
        self.dg_dx = Some(dg_dx);
        self
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_collar(mut self, collar: f64, singular_ends: (bool, bool)) -> Self {
        self.collar = collar;
        self.singular_ends = singular_ends;
        self
    }

    fn with_structure(mut self, structure: Structure) -> Self {
        self.structure = structure;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn dim_fiber(&self) -> usize {
        self.axes.len()
    }

    pub fn dim_ambient(&self) -> usize {
        self.axes.len() + 1
    }

    pub fn t_interval(&self) -> (f64, f64) {
        self.t_interval
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn collar(&self) -> f64 {
        self.collar
    }

    /// The t-range usable by numerics: the declared open interval shrunk by
    /// the collar at singular ends.
    pub fn effective_t_range(&self) -> (f64, f64) {
        let lo = self.t_interval.0 + if self.singular_ends.0 { self.collar } else { 0.0 };
        let hi = self.t_interval.1 - if self.singular_ends.1 { self.collar } else { 0.0 };
        (lo, hi)
    }

    /// Finite-difference step used for t-derivative fallbacks.
    pub fn fd_step_t(&self) -> f64 {
        match self.mode {
            DerivativeMode::FiniteDifference { h } => h,
            DerivativeMode::Analytic => 1e-5 * (self.t_interval.1 - self.t_interval.0),
        }
    }

    fn fd_step_x(&self, axis: usize) -> f64 {
        1e-5 * self.axes[axis].length()
    }

    /// Wrap periodic fiber coordinates of an ambient point into range.
    pub fn wrap_point(&self, p: &[f64]) -> Vec<f64> {
        let mut q = p.to_vec();
        for (i, ax) in self.axes.iter().enumerate() {
            q[i + 1] = ax.wrap(q[i + 1]);
        }
        q
    }

    /// Coordinate difference `b - a` with periodic components reduced to
    /// their shortest representative.
    pub fn coord_difference(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        for (i, ax) in self.axes.iter().enumerate() {
            if ax.periodic {
                let len = ax.length();
                let mut v = d[i + 1] % len;
                if v > 0.5 * len {
                    v -= len;
                }
                if v < -0.5 * len {
                    v += len;
                }
                d[i + 1] = v;
            }
        }
        d
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let (lo, hi) = self.effective_t_range();
        if !(p[0] > lo && p[0] < hi) {
            return false;
        }
        for (i, ax) in self.axes.iter().enumerate() {
            if !ax.periodic && !(p[i + 1] >= ax.lo && p[i + 1] <= ax.hi) {
                return false;
            }
        }
        true
    }

    pub fn check_domain(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim_ambient() {
            return Err(Error::Domain(format!(
                "point has {} coordinates, ambient dimension is {}",
                p.len(),
                self.dim_ambient()
            )));
        }
        if !self.contains(p) {
            return Err(Error::Domain(format!(
                "{:?} outside domain of `{}`",
                p, self.label
            )));
        }
        Ok(())
    }

    pub fn beta_at(&self, t: f64, x: &[f64]) -> f64 {
        (self.beta)(t, x)
    }

    pub fn g_at(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        (self.g)(t, x)
    }

    /// Evaluate `(beta, g_t)` at a domain point, verifying positivity.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<(f64, DMatrix<f64>)> {
        let mut p = vec![t];
        p.extend_from_slice(x);
        self.check_domain(&p)?;
        let beta = (self.beta)(t, x);
        if !(beta > 0.0) {
            return Err(Error::DegenerateMetric(format!(
                "beta = {beta} at t={t}, x={x:?}"
            )));
        }
        let g = (self.g)(t, x);
        let asym = (&g - g.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + g.abs().max()) {
            return Err(Error::DegenerateMetric(format!(
                "g not symmetric at t={t}, x={x:?}"
            )));
        }
        cholesky_spd(&g, "fiber metric g_t")?;
        Ok((beta, g))
    }

    /// `(d beta/dt, d g_t/dt)` per the family's derivative mode.
    pub fn lie_derivative(&self, t: f64, x: &[f64]) -> Result<(f64, DMatrix<f64>)> {
        let mut p = vec![t];
        p.extend_from_slice(x);
        self.check_domain(&p)?;
        match self.mode {
            DerivativeMode::Analytic => match (&self.dbeta_dt, &self.dg_dt) {
                (Some(db), Some(dg)) => Ok((db(t, x), dg(t, x))),
                _ => Err(Error::InvalidParams(format!(
                    "family `{}` declared analytic but has no derivative closures",
                    self.label
                ))),
            },
            DerivativeMode::FiniteDifference { h } => {
                let (lo, hi) = self.effective_t_range();
                if t - h <= lo || t + h >= hi {
                    return Err(Error::Domain(format!(
                        "centered t-difference at t={t} (h={h}) exits ({lo}, {hi})"
                    )));
                }
                let db = ((self.beta)(t + h, x) - (self.beta)(t - h, x)) / (2.0 * h);
                let dg = ((self.g)(t + h, x) - (self.g)(t - h, x)) / (2.0 * h);
                Ok((db, dg))
            }
        }
    }

    /// Ambient metric as the block matrix `beta (+) g_t`.
    pub fn ambient_metric(&self, p: &[f64]) -> DMatrix<f64> {
        let n = self.dim_ambient();
        let mut m = DMatrix::zeros(n, n);
        m[(0, 0)] = (self.beta)(p[0], &p[1..]);
        let g = (self.g)(p[0], &p[1..]);
        m.view_mut((1, 1), (n - 1, n - 1)).copy_from(&g);
        m
    }

    /// Partial derivative of the ambient metric along coordinate `axis`
    /// (0 = t, i >= 1 the fiber axis i-1). Falls back to centered
    /// differences when no analytic closure is available.
    pub fn ambient_metric_partial(&self, p: &[f64], axis: usize) -> Result<DMatrix<f64>> {
        let n = self.dim_ambient();
        let (t, x) = (p[0], &p[1..]);
        let mut m = DMatrix::zeros(n, n);
        if axis == 0 {
            let (db, dg) = self.lie_derivative(t, x)?;
            m[(0, 0)] = db;
            m.view_mut((1, 1), (n - 1, n - 1)).copy_from(&dg);
            return Ok(m);
        }
        let ax = axis - 1;
        match (&self.dbeta_dx, &self.dg_dx) {
            (Some(db), Some(dg)) => {
                m[(0, 0)] = db(t, x)[ax];
                m.view_mut((1, 1), (n - 1, n - 1)).copy_from(&dg(t, x, ax));
            }
            _ => {
                let h = self.fd_step_x(ax);
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[ax] += h;
                xm[ax] -= h;
                m[(0, 0)] = ((self.beta)(t, &xp) - (self.beta)(t, &xm)) / (2.0 * h);
                let dg = ((self.g)(t, &xp) - (self.g)(t, &xm)) / (2.0 * h);
                m.view_mut((1, 1), (n - 1, n - 1)).copy_from(&dg);
            }
        }
        Ok(m)
    }

    /// `eta = d/dt log det g_t = tr(g^-1 dg/dt)`, the slice volume
    /// expansion rate.
    pub fn eta(&self, t: f64, x: &[f64]) -> Result<f64> {
        let g = (self.g)(t, x);
        let (_, dg) = self.lie_derivative(t, x)?;
        let chol = cholesky_spd(&g, "eta")?;
        let sol = chol.solve(&dg);
        Ok(sol.trace())
    }

    /// Quadratic form of the ambient metric on coordinate vectors at `p`.
    pub fn dot(&self, p: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let m = self.ambient_metric(p);
        let un = DVector::from_column_slice(u);
        let vn = DVector::from_column_slice(v);
        (un.transpose() * m * vn)[(0, 0)]
    }

    pub fn norm(&self, p: &[f64], u: &[f64]) -> f64 {
        self.dot(p, u, u).max(0.0).sqrt()
    }
}

/// Extend a family by one flat periodic coordinate:
/// `beta dt^2 + g_t + ds^2` on `(I x F) x S^1`.
pub fn product_extension(family: &MetricFamily) -> MetricFamily {
    let d = family.dim_fiber();
    let mut axes = family.axes.clone();
    axes.push(Axis::circle());

    let inner_g = family.g.clone();
    let g: FormFn = Arc::new(move |t, x| {
        let base = inner_g(t, &x[..d]);
        let mut m = DMatrix::zeros(d + 1, d + 1);
        m.view_mut((0, 0), (d, d)).copy_from(&base);
        m[(d, d)] = 1.0;
        m
    });
    let inner_beta = family.beta.clone();
    let beta: ScalarFn = Arc::new(move |t, x| inner_beta(t, &x[..d]));

    let mut out = MetricFamily::new(
        format!("{} x S1", family.label),
        family.t_interval,
        axes,
        beta,
        g,
    )
    .with_collar(family.collar, family.singular_ends)
    .with_mode(family.mode);

    if let (Some(db), Some(dg)) = (family.dbeta_dt.clone(), family.dg_dt.clone()) {
        let dbeta: ScalarFn = Arc::new(move |t, x| db(t, &x[..d]));
        let dg_dt: FormFn = Arc::new(move |t, x| {
            let base = dg(t, &x[..d]);
            let mut m = DMatrix::zeros(d + 1, d + 1);
            m.view_mut((0, 0), (d, d)).copy_from(&base);
            m
        });
        out = out.with_dt_derivatives(dbeta, dg_dt).with_mode(family.mode);
    }
    if let (Some(dbx), Some(dgx)) = (family.dbeta_dx.clone(), family.dg_dx.clone()) {
        let dbeta_dx: GradFn = Arc::new(move |t, x| {
            let mut v = DVector::zeros(d + 1);
            v.rows_mut(0, d).copy_from(&dbx(t, &x[..d]));
            v
        });
        let dg_dx: FormAxisFn = Arc::new(move |t, x, ax| {
            let mut m = DMatrix::zeros(d + 1, d + 1);
            if ax < d {
                m.view_mut((0, 0), (d, d)).copy_from(&dgx(t, &x[..d], ax));
            }
            m
        });
        out = out.with_dx_derivatives(dbeta_dx, dg_dx);
    }
    out
}

// ---------------------------------------------------------------------------
// Monotonicity classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotonicityFlag {
    NonShrinking,
    NonExpanding,
    Expanding,
    Contracting,
    Indefinite,
}

/// A box of samples `t x fiber` used by the classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleBox {
    pub t: (f64, f64),
    pub x: Vec<(f64, f64)>,
}

impl SampleBox {
    /// Region covering the given t-range and the full fiber box.
    pub fn over_fiber(family: &MetricFamily, t: (f64, f64)) -> Self {
        SampleBox {
            t,
            x: family.axes().iter().map(|a| (a.lo, a.hi)).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub eig_min: f64,
    pub eig_max: f64,
    pub dbeta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub region: SampleBox,
    pub flags: BTreeSet<MonotonicityFlag>,
    pub witnesses: Vec<Witness>,
    /// Absolute tolerance actually used for the sign tests.
    pub tolerance: f64,
    /// Largest |generalized eigenvalue| over the sampled region.
    pub eig_scale: f64,
}

impl MonotonicityReport {
    pub fn is_monotone(&self) -> bool {
        self.flags.contains(&MonotonicityFlag::NonShrinking)
            || self.flags.contains(&MonotonicityFlag::NonExpanding)
    }

    pub fn is_strictly_monotone(&self) -> bool {
        self.flags.contains(&MonotonicityFlag::Expanding)
            || self.flags.contains(&MonotonicityFlag::Contracting)
    }
}

/// Classify the sign behaviour of `(d/dt beta, d/dt g_t)` over a sampled
/// region. Semidefiniteness is tested through generalized eigenvalues of
/// `d g_t/dt` relative to `g_t`, so the verdict is chart-scale invariant.
/// `tolerance` is relative to the largest |eigenvalue| seen in the region
/// (default 1e-9 when NaN is passed... callers use [`DEFAULT_CLASSIFY_TOL`]).
pub fn classify_monotonicity(
    family: &MetricFamily,
    region: &SampleBox,
    grid: &[usize],
    tolerance: f64,
) -> Result<MonotonicityReport> {
    let d = family.dim_fiber();
    if region.x.len() != d {
        return Err(Error::InvalidParams(format!(
            "region has {} fiber ranges, family has {d}",
            region.x.len()
        )));
    }
    if grid.len() != d + 1 || grid.iter().any(|&n| n < 2) {
        return Err(Error::InvalidParams(
            "grid needs >= 2 samples on each of the t and fiber axes".into(),
        ));
    }

    struct Extreme {
        val: f64,
        point: Vec<f64>,
        eig_min: f64,
        eig_max: f64,
        dbeta: f64,
    }
    let mut lo_eig: Option<Extreme> = None;
    let mut hi_eig: Option<Extreme> = None;
    let mut lo_db: Option<Extreme> = None;
    let mut hi_db: Option<Extreme> = None;
    let mut eig_scale = 0.0f64;
    let mut db_scale = 0.0f64;

    let counts = grid.to_vec();
    let total: usize = counts.iter().product();
    let lin = |range: (f64, f64), i: usize, n: usize| {
        range.0 + (range.1 - range.0) * (i as f64) / ((n - 1) as f64)
    };

    for flat in 0..total {
        let mut rem = flat;
        let mut idx = vec![0usize; d + 1];
        for (a, &n) in counts.iter().enumerate() {
            idx[a] = rem % n;
            rem /= n;
        }
        let t = lin(region.t, idx[0], counts[0]);
        let x: Vec<f64> = (0..d).map(|a| lin(region.x[a], idx[a + 1], counts[a + 1])).collect();
        let (_, g) = family.eval(t, &x)?;
        let (db, dg) = family.lie_derivative(t, &x)?;
        let eig = generalized_symmetric_eigenvalues(&dg, &g)?;
        let (emin, emax) = (eig[0], eig[eig.len() - 1]);
        let mut point = vec![t];
        point.extend_from_slice(&x);

        eig_scale = eig_scale.max(emin.abs()).max(emax.abs());
        db_scale = db_scale.max(db.abs());
        let mk = |val: f64| Extreme {
            val,
            point: point.clone(),
            eig_min: emin,
            eig_max: emax,
            dbeta: db,
        };
        if lo_eig.as_ref().map_or(true, |e| emin < e.val) {
            lo_eig = Some(mk(emin));
        }
        if hi_eig.as_ref().map_or(true, |e| emax > e.val) {
            hi_eig = Some(mk(emax));
        }
        if lo_db.as_ref().map_or(true, |e| db < e.val) {
            lo_db = Some(mk(db));
        }
        if hi_db.as_ref().map_or(true, |e| db > e.val) {
            hi_db = Some(mk(db));
        }
    }

    let eps = tolerance * eig_scale.max(db_scale);
    let eig_min = lo_eig.as_ref().unwrap().val;
    let eig_max = hi_eig.as_ref().unwrap().val;
    let db_min = lo_db.as_ref().unwrap().val;
    let db_max = hi_db.as_ref().unwrap().val;

    let mut flags = BTreeSet::new();
    if eig_min >= -eps && db_min >= -eps {
        flags.insert(MonotonicityFlag::NonShrinking);
    }
    if eig_max <= eps && db_max <= eps {
        flags.insert(MonotonicityFlag::NonExpanding);
    }
    if eig_min > eps && db_min >= -eps {
        flags.insert(MonotonicityFlag::Expanding);
    }
    if eig_max < -eps && db_max <= eps {
        flags.insert(MonotonicityFlag::Contracting);
    }
    if flags.is_empty() {
        flags.insert(MonotonicityFlag::Indefinite);
    }

    let witnesses = [lo_eig, hi_eig, lo_db, hi_db]
        .into_iter()
        .flatten()
        .map(|e| Witness {
            point: e.point,
            eig_min: e.eig_min,
            eig_max: e.eig_max,
            dbeta: e.dbeta,
        })
        .collect();

    Ok(MonotonicityReport {
        region: region.clone(),
        flags,
        witnesses,
        tolerance: eps,
        eig_scale,
    })
}

/// Relative tolerance separating genuine zeros from round-off.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Model library
// ---------------------------------------------------------------------------

/// Fiber kind for the 1D-fiber models.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fiber {
    Circle,
    Line { lo: f64, hi: f64 },
}

impl Default for Fiber {
    fn default() -> Self {
        Fiber::Circle
    }
}

impl Fiber {
    fn axis(&self) -> Axis {
        match self {
            Fiber::Circle => Axis::circle(),
            Fiber::Line { lo, hi } => Axis::line(*lo, *hi),
        }
    }
}

/// Declarative model description; maps 1:1 onto the scenario config format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    EuclideanPolar,
    HyperbolicPolar {
        k: f64,
    },
    SpherePolar {
        k: f64,
    },
    Warped {
        f: FuncSpec,
        #[serde(default)]
        fiber: Fiber,
        #[serde(default)]
        t_range: Option<(f64, f64)>,
    },
    Killing {
        h: FuncSpec,
        #[serde(default)]
        fiber: Fiber,
        #[serde(default)]
        t_range: Option<(f64, f64)>,
    },
    DoublyWarped {
        f1: FuncSpec,
        f2: FuncSpec,
        #[serde(default)]
        t_range: Option<(f64, f64)>,
    },
}

const POLAR_RADIUS_MAX: f64 = 10.0;
const DEFAULT_T_RANGE: (f64, f64) = (-5.0, 5.0);
const DEFAULT_COLLAR: f64 = 1e-3;

/// Rotationally symmetric polar family `dr^2 + w(r) dphi^2`.
fn polar_family(
    label: String,
    t_hi: f64,
    singular_hi: bool,
    w: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    dw: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    structure: Structure,
) -> MetricFamily {
    let wg = w.clone();
    let g: FormFn = Arc::new(move |t, _x| DMatrix::from_element(1, 1, wg(t)));
    let beta: ScalarFn = Arc::new(|_t, _x| 1.0);
    let dgf: FormFn = Arc::new(move |t, _x| DMatrix::from_element(1, 1, dw(t)));
    let dbeta: ScalarFn = Arc::new(|_t, _x| 0.0);
    let dbeta_dx: GradFn = Arc::new(|_t, _x| DVector::zeros(1));
    let dg_dx: FormAxisFn = Arc::new(|_t, _x, _a| DMatrix::zeros(1, 1));
    MetricFamily::new(label, (0.0, t_hi), vec![Axis::circle()], beta, g)
        .with_dt_derivatives(dbeta, dgf)
        .with_dx_derivatives(dbeta_dx, dg_dx)
        .with_collar(DEFAULT_COLLAR, (true, singular_hi))
        .with_structure(structure)
}

/// Build a metric family from a model description.
pub fn model_metric(spec: &ModelSpec) -> Result<MetricFamily> {
    match spec {
        ModelSpec::EuclideanPolar => Ok(polar_family(
            "euclidean_polar".into(),
            POLAR_RADIUS_MAX,
            false,
            Arc::new(|r| r * r),
            Arc::new(|r| 2.0 * r),
            Structure::EuclideanPolar,
        )),
        ModelSpec::HyperbolicPolar { k } => {
            if !(*k > 0.0) {
                return Err(Error::InvalidParams(format!("hyperbolic_polar needs k > 0, got {k}")));
            }
            let (k, sk) = (*k, k.sqrt());
            Ok(polar_family(
                format!("hyperbolic_polar(k={k})"),
                POLAR_RADIUS_MAX / sk,
                false,
                Arc::new(move |r| (sk * r).cosh().powi(2) / sk),
                Arc::new(move |r| (2.0 * sk * r).sinh()),
                Structure::HyperbolicPolar { k },
            ))
        }
        ModelSpec::SpherePolar { k } => {
            if !(*k > 0.0) {
                return Err(Error::InvalidParams(format!("sphere_polar needs k > 0, got {k}")));
            }
            let (k, sk) = (*k, k.sqrt());
            Ok(polar_family(
                format!("sphere_polar(k={k})"),
                std::f64::consts::PI / sk,
                true,
                Arc::new(move |r| (sk * r).sin().powi(2) / sk),
                Arc::new(move |r| (2.0 * sk * r).sin()),
                Structure::SpherePolar { k },
            ))
        }
        ModelSpec::Warped { f, fiber, t_range } => {
            let fc = f.compile()?;
            let t_range = t_range.unwrap_or(DEFAULT_T_RANGE);
            check_positive_profile(&fc, t_range, "warping function f")?;
            let is_flat = matches!(f, FuncSpec::Affine { a, b } if *a == 0.0 && *b == 1.0);
            let f1 = fc.clone();
            let g: FormFn =
                Arc::new(move |t, _x| DMatrix::from_element(1, 1, f1.eval(t).powi(2)));
            let f2 = fc.clone();
            let dg: FormFn = Arc::new(move |t, _x| {
                DMatrix::from_element(1, 1, 2.0 * f2.eval(t) * f2.deriv(t))
            });
            let beta: ScalarFn = Arc::new(|_t, _x| 1.0);
            let dbeta: ScalarFn = Arc::new(|_t, _x| 0.0);
            let dbeta_dx: GradFn = Arc::new(|_t, _x| DVector::zeros(1));
            let dg_dx: FormAxisFn = Arc::new(|_t, _x, _a| DMatrix::zeros(1, 1));
            let structure = if is_flat {
                Structure::FlatProduct
            } else {
                Structure::Warped { f: fc.clone() }
            };
            let label = if is_flat {
                "flat_product".to_string()
            } else {
                format!("warped({:?})", fc.spec())
            };
            Ok(
                MetricFamily::new(label, t_range, vec![fiber.axis()], beta, g)
                    .with_dt_derivatives(dbeta, dg)
                    .with_dx_derivatives(dbeta_dx, dg_dx)
                    .with_structure(structure),
            )
        }
        ModelSpec::Killing { h, fiber, t_range } => {
            let hc = h.compile()?;
            let t_range = t_range.unwrap_or(DEFAULT_T_RANGE);
            let ax = fiber.axis();
            check_positive_profile_x(&hc, (ax.lo, ax.hi), "Killing lapse h")?;
            let h1 = hc.clone();
            let beta: ScalarFn = Arc::new(move |_t, x| h1.eval(x[0]).powi(2));
            let g: FormFn = Arc::new(|_t, _x| DMatrix::identity(1, 1));
            let dbeta: ScalarFn = Arc::new(|_t, _x| 0.0);
            let dg: FormFn = Arc::new(|_t, _x| DMatrix::zeros(1, 1));
            let h2 = hc.clone();
            let dbeta_dx: GradFn = Arc::new(move |_t, x| {
                DVector::from_element(1, 2.0 * h2.eval(x[0]) * h2.deriv(x[0]))
            });
            let dg_dx: FormAxisFn = Arc::new(|_t, _x, _a| DMatrix::zeros(1, 1));
            Ok(MetricFamily::new(
                format!("killing({:?})", hc.spec()),
                t_range,
                vec![ax],
                beta,
                g,
            )
            .with_dt_derivatives(dbeta, dg)
            .with_dx_derivatives(dbeta_dx, dg_dx)
            .with_structure(Structure::Killing { h: hc }))
        }
        ModelSpec::DoublyWarped { f1, f2, t_range } => {
            let f1c = f1.compile()?;
            let f2c = f2.compile()?;
            let t_range = t_range.unwrap_or(DEFAULT_T_RANGE);
            check_positive_profile(&f1c, t_range, "warping function f1")?;
            check_positive_profile(&f2c, t_range, "warping function f2")?;
            let (a, b) = (f1c.clone(), f2c.clone());
            let g: FormFn = Arc::new(move |t, _x| {
                DMatrix::from_diagonal(&DVector::from_vec(vec![
                    a.eval(t).powi(2),
                    b.eval(t).powi(2),
                ]))
            });
            let (a, b) = (f1c.clone(), f2c.clone());
            let dg: FormFn = Arc::new(move |t, _x| {
                DMatrix::from_diagonal(&DVector::from_vec(vec![
                    2.0 * a.eval(t) * a.deriv(t),
                    2.0 * b.eval(t) * b.deriv(t),
                ]))
            });
            let beta: ScalarFn = Arc::new(|_t, _x| 1.0);
            let dbeta: ScalarFn = Arc::new(|_t, _x| 0.0);
            let dbeta_dx: GradFn = Arc::new(|_t, _x| DVector::zeros(2));
            let dg_dx: FormAxisFn = Arc::new(|_t, _x, _a| DMatrix::zeros(2, 2));
            Ok(MetricFamily::new(
                format!("doubly_warped({:?}, {:?})", f1c.spec(), f2c.spec()),
                t_range,
                vec![Axis::circle(), Axis::circle()],
                beta,
                g,
            )
            .with_dt_derivatives(dbeta, dg)
            .with_dx_derivatives(dbeta_dx, dg_dx)
            .with_structure(Structure::DoublyWarped { f1: f1c, f2: f2c }))
        }
    }
}

/// Simple name + numeric-parameter entry point for the fixed models.
pub fn model_by_name(name: &str, params: &[f64]) -> Result<MetricFamily> {
    match name {
        "euclidean_polar" => model_metric(&ModelSpec::EuclideanPolar),
        "hyperbolic_polar" => {
            let k = params.first().copied().unwrap_or(1.0);
            model_metric(&ModelSpec::HyperbolicPolar { k })
        }
        "sphere_polar" => {
            let k = params.first().copied().unwrap_or(1.0);
            model_metric(&ModelSpec::SpherePolar { k })
        }
        "flat_product" => model_metric(&ModelSpec::Warped {
            f: FuncSpec::constant(1.0),
            fiber: Fiber::Circle,
            t_range: None,
        }),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

fn check_positive_profile(f: &CompiledFunc, range: (f64, f64), what: &str) -> Result<()> {
    for i in 0..=64 {
        let t = range.0 + (range.1 - range.0) * (i as f64) / 64.0;
        if !(f.eval(t) > 0.0) {
            return Err(Error::InvalidParams(format!(
                "{what} must stay positive on {range:?}; {what}({t}) = {}",
                f.eval(t)
            )));
        }
    }
    Ok(())
}

fn check_positive_profile_x(f: &CompiledFunc, range: (f64, f64), what: &str) -> Result<()> {
    check_positive_profile(f, range, what)
}
