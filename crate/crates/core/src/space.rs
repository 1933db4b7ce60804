//! Finite metric measure spaces, balls, annuli and doubling geometry.
//!
//! A [`Space`] is a finite set of points with a dense distance table and a
//! strictly positive point mass per point. All balls are closed, so
//! `mu(B(x,t)) >= mu({x}) > 0` for every `t > 0`, which the conical square
//! function divides by.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of points for which the dense metric table is allowed.
pub const MAX_POINTS: usize = 4096;

/// Scales used for the doubling fit `mu(alpha B) <= C_d alpha^n mu(B)`.
pub const DOUBLING_SCALES: [f64; 3] = [2.0, 4.0, 8.0];

/// Descriptor of the uniform-grid generator, kept so a serialized space can
/// omit its metric table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub dims: u8,
    pub extent: f64,
    pub count: usize,
}

impl GridDescriptor {
    pub fn spacing(&self) -> f64 {
        self.extent / self.count as f64
    }
}

/// Closed ball `B(center, radius)` in a [`Space`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: usize, radius: f64) -> Self {
        assert!(radius > 0.0, "ball radius must be positive");
        Ball { center, radius }
    }

    /// `alpha * B`: same center, radius scaled by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Ball { center: self.center, radius: alpha * self.radius }
    }
}

/// Result of the log-log doubling regression over sampled balls.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DoublingFit {
    /// Fitted doubling exponent.
    pub n: f64,
    /// Minimal prefactor making `mu(alpha B) <= c_d alpha^n mu(B)` hold on
    /// the whole sample.
    pub c_d: f64,
    /// RMS residual of the log-log regression (fit uncertainty).
    pub residual: f64,
    /// Set when the sample carried no usable scale information.
    pub degenerate: bool,
}

/// Finite doubling metric measure space.
#[derive(Debug, Clone)]
pub struct Space {
    points: Vec<Vec<f64>>,
    metric: Vec<f64>,
    mass: Vec<f64>,
    doubling: DoublingFit,
    generator: Option<GridDescriptor>,
}

impl Space {
    /// Builds a space from raw parts, validating the metric axioms on all
    /// pairs and on sampled triples, and fitting the doubling exponent.
    pub fn from_parts(
        points: Vec<Vec<f64>>,
        metric: Vec<f64>,
        mass: Vec<f64>,
        generator: Option<GridDescriptor>,
    ) -> Result<Self> {
        let p = points.len();
        if p == 0 {
            return Err(Error::InvalidGrid("space must contain at least one point".into()));
        }
        if p > MAX_POINTS {
            return Err(Error::InvalidGrid(format!(
                "space has {p} points, dense metric limited to {MAX_POINTS}"
            )));
        }
        if metric.len() != p * p {
            return Err(Error::InvalidGrid("metric table has wrong size".into()));
        }
        if mass.len() != p {
            return Err(Error::InvalidGrid("mass vector has wrong size".into()));
        }
        for (i, &m) in mass.iter().enumerate() {
            if !m.is_finite() || m <= 0.0 {
                return Err(Error::InvalidGrid(format!("mass at point {i} must be strictly positive")));
            }
        }
        for i in 0..p {
            if metric[i * p + i] != 0.0 {
                return Err(Error::InvalidGrid(format!("metric diagonal nonzero at {i}")));
            }
            for j in 0..i {
                let dij = metric[i * p + j];
                let dji = metric[j * p + i];
                if dij.is_nan() || dij < 0.0 || (dij - dji).abs() > 1e-12 * (1.0 + dij.abs()) {
                    return Err(Error::InvalidGrid(format!("metric not symmetric at ({i},{j})")));
                }
            }
        }
        // Triangle inequality on a deterministic sample of triples.
        let step = (p / 16).max(1);
        for i in (0..p).step_by(step) {
            for j in (0..p).step_by(step) {
                for k in (0..p).step_by(step) {
                    let dij = metric[i * p + j];
                    let dik = metric[i * p + k];
                    let dkj = metric[k * p + j];
                    if dij > dik + dkj + 1e-9 * (1.0 + dij) {
                        return Err(Error::InvalidGrid(format!(
                            "triangle inequality fails on triple ({i},{k},{j})"
                        )));
                    }
                }
            }
        }

        let mut space = Space { points, metric, mass, doubling: DoublingFit { n: 0.0, c_d: 1.0, residual: 0.0, degenerate: true }, generator };
        let sample = space.default_ball_sample();
        space.doubling = doubling_exponent(&space, &sample);
        Ok(space)
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.metric[i * self.len() + j]
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.mass[i]
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn diameter(&self) -> f64 {
        self.metric.iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest nonzero pairwise distance; `mu(B(x,t)) = mu({x})` for `t`
    /// below this floor.
    pub fn min_separation(&self) -> f64 {
        let p = self.len();
        let mut best = f64::INFINITY;
        for i in 0..p {
            for j in 0..i {
                let d = self.distance(i, j);
                if d > 0.0 && d < best {
                    best = d;
                }
            }
        }
        if best.is_finite() { best } else { 0.0 }
    }

    /// Fitted doubling exponent of this space.
    pub fn doubling_exponent(&self) -> f64 {
        self.doubling.n
    }

    pub fn doubling_fit(&self) -> DoublingFit {
        self.doubling
    }

    pub fn generator(&self) -> Option<GridDescriptor> {
        self.generator
    }

    /// Measure of a closed ball.
    pub fn ball_mass(&self, ball: Ball) -> f64 {
        let p = self.len();
        let row = ball.center * p;
        let mut total = 0.0;
        for j in 0..p {
            if self.metric[row + j] <= ball.radius {
                total += self.mass[j];
            }
        }
        total
    }

    /// Deterministic ball sample used by the construction-time doubling fit:
    /// evenly spread centers with a few radii spanning grid and domain scale.
    pub fn default_ball_sample(&self) -> Vec<Ball> {
        let p = self.len();
        if p == 1 {
            return vec![Ball::new(0, 1.0)];
        }
        let sep = self.min_separation();
        let diam = self.diameter();
        let radii = [1.5 * sep, 3.0 * sep, (diam / 16.0).max(2.0 * sep)];
        let step = (p / 16).max(1);
        let mut sample = Vec::new();
        for c in (0..p).step_by(step) {
            for &r in &radii {
                if r > 0.0 {
                    sample.push(Ball::new(c, r));
                }
            }
        }
        sample
    }

    /// Serializes to the interchange document; the metric table is omitted
    /// whenever the generator descriptor can regenerate it.
    pub fn to_json(&self) -> serde_json::Value {
        let metric = if self.generator.is_some() {
            serde_json::Value::Null
        } else {
            serde_json::json!(self.metric)
        };
        serde_json::json!({
            "schema_version": 1,
            "points": self.points,
            "mass": self.mass,
            "metric": metric,
            "generator": self.generator,
            "doubling": self.doubling,
        })
    }
}

/// Builds a uniform grid space centered at the origin: `count` points per
/// axis with spacing `h = extent / count`, each of mass `h^dims`.
pub fn build_grid_space(dims: u8, extent: f64, count: usize) -> Result<Space> {
    if count == 0 {
        return Err(Error::InvalidGrid("count must be at least 1".into()));
    }
    if extent.is_nan() || extent <= 0.0 {
        return Err(Error::InvalidGrid("extent must be positive".into()));
    }
    if dims != 1 && dims != 2 {
        return Err(Error::InvalidGrid(format!("dims must be 1 or 2, got {dims}")));
    }
    let h = extent / count as f64;
    let coord = |i: usize| (i as f64 + 0.5) * h - extent / 2.0;

    let points: Vec<Vec<f64>> = match dims {
        1 => (0..count).map(|i| vec![coord(i)]).collect(),
        _ => {
            let mut pts = Vec::with_capacity(count * count);
            for iy in 0..count {
                for ix in 0..count {
                    pts.push(vec![coord(ix), coord(iy)]);
                }
            }
            pts
        }
    };
    let p = points.len();
    if p > MAX_POINTS {
        return Err(Error::InvalidGrid(format!("grid has {p} points, limit is {MAX_POINTS}")));
    }
    let mut metric = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..i {
            let d = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            metric[i * p + j] = d;
            metric[j * p + i] = d;
        }
    }
    let mass = vec![h.powi(dims as i32); p];
    Space::from_parts(points, metric, mass, Some(GridDescriptor { dims, extent, count }))
}

/// Points of the closed ball; always contains the center.
pub fn ball_members(space: &Space, ball: Ball) -> Vec<usize> {
    let p = space.len();
    (0..p).filter(|&j| space.distance(ball.center, j) <= ball.radius).collect()
}

/// Dyadic annuli `C_k(B)` and their fattened versions `C_k*(B)`.
///
/// `C_0 = B`, `C_k = 2^k B \ 2^{k-1} B` for `k >= 1`;
/// `C_0* = 2B`, `C_1* = 4B`, `C_k* = 2^{k+1} B \ 2^{k-2} B` for `k >= 2`.
pub fn annuli(space: &Space, ball: Ball, k: u32) -> (Vec<usize>, Vec<usize>) {
    let members = |b: Ball| ball_members(space, b);
    let diff = |outer: Vec<usize>, inner: &[usize]| -> Vec<usize> {
        outer.into_iter().filter(|x| !inner.contains(x)).collect()
    };
    let scale = |e: i32| ball.scaled(2f64.powi(e));
    let annulus = match k {
        0 => members(ball),
        k => diff(members(scale(k as i32)), &members(scale(k as i32 - 1))),
    };
    let fattened = match k {
        0 => members(scale(1)),
        1 => members(scale(2)),
        k => diff(members(scale(k as i32 + 1)), &members(scale(k as i32 - 2))),
    };
    (annulus, fattened)
}

/// Complement of a point set, sorted.
pub fn complement(space: &Space, set: &[usize]) -> Vec<usize> {
    (0..space.len()).filter(|x| !set.contains(x)).collect()
}

/// Least-squares fit of `log(mu(alpha B) / mu(B))` against `log alpha` over
/// `alpha in {2, 4, 8}` on the given sample. The returned prefactor is the
/// smallest one for which the doubling inequality holds on every sampled
/// `(B, alpha)` with the fitted exponent.
pub fn doubling_exponent(space: &Space, sample: &[Ball]) -> DoublingFit {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &ball in sample {
        let base = space.ball_mass(ball);
        for &alpha in &DOUBLING_SCALES {
            let grown = space.ball_mass(ball.scaled(alpha));
            let ratio = grown / base;
            xs.push(alpha.ln());
            ys.push(ratio.ln());
        }
    }
    if xs.is_empty() || ys.iter().all(|&y| y == 0.0) {
        // All sampled balls are single points at every scale: no information.
        return DoublingFit { n: 0.0, c_d: 1.0, residual: 0.0, degenerate: true };
    }
    let (slope, intercept) = least_squares_line(&xs, &ys);
    let n = slope.max(0.0);
    let mut c_d: f64 = 0.0;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let pred = slope * x + intercept;
        ss += (y - pred) * (y - pred);
        c_d = c_d.max((y - n * x).exp());
    }
    let residual = (ss / xs.len() as f64).sqrt();
    DoublingFit { n, c_d: c_d.max(1.0), residual, degenerate: false }
}

/// Ordinary least squares for `y = slope * x + intercept`.
pub(crate) fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return (0.0, my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
