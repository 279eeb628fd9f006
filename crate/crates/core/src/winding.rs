//! Argument-principle machinery: adaptive winding numbers along closed
//! contours and recursive box subdivision to localize roots and poles of a
//! meromorphic function such as the Riccati–Evans function.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::essential::border_real_part;
use crate::linalg::C64;
use crate::model::Model;
use crate::riccati::RiccatiEvans;

/// |f| below this on a contour means a root (or an unresolvable pole) sits on it.
pub const CONTOUR_ZERO: f64 = 1e-13;

/// Something with isolated roots and poles that can be evaluated at λ.
pub trait SpectralFunction: Sync {
    fn eval(&self, lambda: C64) -> Result<C64>;
}

impl<F: Fn(C64) -> Result<C64> + Sync> SpectralFunction for F {
    fn eval(&self, lambda: C64) -> Result<C64> {
        self(lambda)
    }
}

impl SpectralFunction for RiccatiEvans<'_> {
    fn eval(&self, lambda: C64) -> Result<C64> {
        RiccatiEvans::eval(self, lambda)
    }
}

/// Caches evaluations by the exact bits of λ, so contours that share sample
/// points (neighbouring boxes, parent and child edges) pay for them once.
pub struct Memo<'a, F: ?Sized> {
    f: &'a F,
    cache: Mutex<HashMap<(u64, u64), C64>>,
}

impl<'a, F: SpectralFunction + ?Sized> Memo<'a, F> {
    pub fn new(f: &'a F) -> Self {
        Self {
            f,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Distinct points evaluated so far.
    pub fn evaluations(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }
}

impl<F: SpectralFunction + ?Sized> SpectralFunction for Memo<'_, F> {
    fn eval(&self, lambda: C64) -> Result<C64> {
        let key = (lambda.re.to_bits(), lambda.im.to_bits());
        if let Some(v) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(*v);
        }
        let v = self.f.eval(lambda)?;
        self.cache.lock().expect("cache poisoned").insert(key, v);
        Ok(v)
    }
}

/// One smooth piece of a contour, parameterized by t ∈ [0, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Segment {
    Line { a: C64, b: C64 },
    /// Straight segment through points spaced geometrically in |λ|; a and b
    /// must lie on the same ray from the origin.
    LogLine { a: C64, b: C64 },
    Arc { center: C64, radius: f64, theta0: f64, theta1: f64 },
}

impl Segment {
    pub fn point(&self, t: f64) -> C64 {
        match *self {
            Segment::Line { a, b } => a + (b - a) * t,
            Segment::LogLine { a, b } => a * (b.norm() / a.norm()).powf(t),
            Segment::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => center + C64::from_polar(radius, theta0 + (theta1 - theta0) * t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourKind {
    Circle,
    SemicircleWithDetour,
    Polygon,
}

/// A closed, positively oriented curve in the λ-plane together with the
/// samples and function values of its last winding computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralContour {
    pub kind: ContourKind,
    pub center: C64,
    pub radius: f64,
    pub segments: Vec<Segment>,
    /// Contour parameter of each sample: segment index plus local t.
    pub s: Vec<f64>,
    pub samples: Vec<C64>,
    pub f_values: Vec<C64>,
    pub total_phase: f64,
}

impl SpectralContour {
    fn with_segments(kind: ContourKind, center: C64, radius: f64, segments: Vec<Segment>) -> Self {
        Self {
            kind,
            center,
            radius,
            segments,
            s: Vec::new(),
            samples: Vec::new(),
            f_values: Vec::new(),
            total_phase: 0.0,
        }
    }

    pub fn circle(center: C64, radius: f64) -> Self {
        let seg = Segment::Arc {
            center,
            radius,
            theta0: -PI,
            theta1: PI,
        };
        Self::with_segments(ContourKind::Circle, center, radius, vec![seg])
    }

    /// Boundary of the right half-disc of radius `big` with the half-disc of
    /// radius `small` about the origin removed, so the origin is kept outside.
    /// The imaginary-axis pieces are sampled geometrically.
    pub fn semicircle_with_detour(big: f64, small: f64) -> Self {
        let i = C64::new(0.0, 1.0);
        let segments = vec![
            Segment::LogLine { a: i * big, b: i * small },
            Segment::Arc {
                center: C64::new(0.0, 0.0),
                radius: small,
                theta0: FRAC_PI_2,
                theta1: -FRAC_PI_2,
            },
            Segment::LogLine { a: -i * small, b: -i * big },
            Segment::Arc {
                center: C64::new(0.0, 0.0),
                radius: big,
                theta0: -FRAC_PI_2,
                theta1: FRAC_PI_2,
            },
        ];
        Self::with_segments(ContourKind::SemicircleWithDetour, C64::new(0.0, 0.0), big, segments)
    }

    /// Closed polygon through `vertices` (listed counter-clockwise).
    pub fn polygon(vertices: &[C64]) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidInput("polygon needs at least 3 vertices".into()));
        }
        let n = vertices.len();
        let segments = (0..n)
            .map(|k| Segment::Line {
                a: vertices[k],
                b: vertices[(k + 1) % n],
            })
            .collect();
        let center = vertices.iter().sum::<C64>() / n as f64;
        let radius = vertices.iter().map(|v| (v - center).norm()).fold(0.0, f64::max);
        Ok(Self::with_segments(ContourKind::Polygon, center, radius, segments))
    }

    pub fn rectangle(re: (f64, f64), im: (f64, f64)) -> Self {
        Self::polygon(&[
            C64::new(re.0, im.0),
            C64::new(re.1, im.0),
            C64::new(re.1, im.1),
            C64::new(re.0, im.1),
        ])
        .expect("four vertices")
    }

    fn point(&self, s: f64) -> C64 {
        let n = self.segments.len();
        let k = (s.floor() as usize).min(n - 1);
        self.segments[k].point(s - k as f64)
    }

    /// Contour evaluations as CSV (s, re_lambda, im_lambda, re_E, im_E).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path).map_err(csv_err)?;
        wtr.write_record(["s", "re_lambda", "im_lambda", "re_E", "im_E"]).map_err(csv_err)?;
        for k in 0..self.s.len() {
            let (l, e) = (self.samples[k], self.f_values[k]);
            wtr.write_record([self.s[k], l.re, l.im, e.re, e.im].iter().map(|x| format!("{x:.17e}")))
                .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("contour CSV: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContourOptions {
    /// Uniform samples per segment before refinement.
    pub initial_per_segment: usize,
    /// Maximum number of samples on one contour.
    pub budget: usize,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            initial_per_segment: 16,
            budget: 20_000,
        }
    }
}

/// Samples of a closed curve with the accumulated change of arg f.
struct Traced<P> {
    params: Vec<P>,
    points: Vec<C64>,
    values: Vec<C64>,
    total_phase: f64,
}

/// Evaluates f at `points` (in parallel), keeping the input order.
fn eval_batch<F: SpectralFunction + ?Sized>(f: &F, points: &[C64]) -> Result<Vec<C64>> {
    let vals: Vec<Result<C64>> = points.par_iter().map(|&l| f.eval(l)).collect();
    let mut out = Vec::with_capacity(vals.len());
    for (v, &l) in vals.into_iter().zip(points) {
        let v = v?;
        if !(v.norm() >= CONTOUR_ZERO) {
            return Err(Error::ZeroOnContour {
                lambda: l,
                modulus: v.norm(),
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// Refines a closed sample sequence (first parameter repeated at the end)
/// until every consecutive change of arg f is below π/2.
fn trace_closed<P, F>(
    f: &F,
    init: Vec<P>,
    locate: impl Fn(&P) -> C64,
    midpoint: impl Fn(&P, &P) -> Option<P>,
    budget: usize,
) -> Result<Traced<P>>
where
    P: Clone,
    F: SpectralFunction + ?Sized,
{
    let mut params = init;
    let mut points: Vec<C64> = params.iter().map(&locate).collect();
    let mut values = eval_batch(f, &points)?;
    loop {
        let coarse: Vec<usize> = (0..params.len() - 1)
            .filter(|&k| (values[k + 1] / values[k]).arg().abs() >= FRAC_PI_2)
            .collect();
        if coarse.is_empty() {
            break;
        }
        if params.len() + coarse.len() > budget {
            return Err(Error::RefinementBudget { budget });
        }
        let mut mids = Vec::with_capacity(coarse.len());
        for &k in &coarse {
            let m = midpoint(&params[k], &params[k + 1]).ok_or(Error::NonConvergence {
                what: "contour refinement (sample spacing exhausted)",
                iterations: params.len(),
                residual: (values[k + 1] / values[k]).arg().abs(),
            })?;
            mids.push(m);
        }
        let mid_points: Vec<C64> = mids.iter().map(&locate).collect();
        let mid_values = eval_batch(f, &mid_points)?;
        let n = params.len() + mids.len();
        let (mut p2, mut l2, mut v2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        let mut next = 0;
        for k in 0..params.len() {
            p2.push(params[k].clone());
            l2.push(points[k]);
            v2.push(values[k]);
            if next < coarse.len() && coarse[next] == k {
                p2.push(mids[next].clone());
                l2.push(mid_points[next]);
                v2.push(mid_values[next]);
                next += 1;
            }
        }
        params = p2;
        points = l2;
        values = v2;
    }
    let total_phase = values.windows(2).map(|w| (w[1] / w[0]).arg()).sum();
    Ok(Traced {
        params,
        points,
        values,
        total_phase,
    })
}

fn round_winding(total_phase: f64) -> Result<i32> {
    let raw = total_phase / (2.0 * PI);
    let n = raw.round();
    if (raw - n).abs() > 1e-3 {
        return Err(Error::NonIntegerWinding { raw });
    }
    Ok(n as i32)
}

/// Winding number of f along the contour. Sample points, values and the
/// accumulated phase are stored back into the contour.
pub fn winding_number<F: SpectralFunction + ?Sized>(
    f: &F,
    contour: &mut SpectralContour,
    opts: &ContourOptions,
) -> Result<i32> {
    let nseg = contour.segments.len();
    let per = opts.initial_per_segment.max(1);
    let mut init: Vec<f64> = (0..nseg * per).map(|k| k as f64 / per as f64).collect();
    init.push(nseg as f64);
    let first = contour.point(0.0);
    let c = &*contour;
    let locate = |s: &f64| if *s >= nseg as f64 { first } else { c.point(*s) };
    let midpoint = |a: &f64, b: &f64| {
        let m = 0.5 * (a + b);
        (m > *a && m < *b).then_some(m)
    };
    let tr = trace_closed(f, init, locate, midpoint, opts.budget)?;
    let n = round_winding(tr.total_phase)?;
    contour.s = tr.params;
    contour.samples = tr.points;
    contour.f_values = tr.values;
    contour.total_phase = tr.total_phase;
    Ok(n)
}

/// Search region and refinement settings for [`localize_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizeOptions {
    pub re: (f64, f64),
    pub im: (f64, f64),
    /// Boxes are always subdivided down to this diameter before zero-index
    /// boxes are discarded, so a nearby root–pole pair is not lost.
    pub scan_diameter: f64,
    /// Nonzero boxes are refined until their diameter is below this.
    pub min_diameter: f64,
    /// Required gap between a box and the essential spectrum.
    pub border_margin: f64,
    /// Extra subdivision levels spent on boxes that touch the essential spectrum.
    pub border_depth: usize,
    /// Uniform samples per box edge before refinement (a power of two).
    pub initial_per_edge: usize,
    pub budget: usize,
}

impl Default for LocalizeOptions {
    fn default() -> Self {
        Self {
            re: (-2.0, 0.1),
            im: (-0.51, 0.53),
            scan_diameter: 0.3,
            min_diameter: 1e-3,
            border_margin: 0.04,
            border_depth: 2,
            initial_per_edge: 4,
            budget: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocatedPoint {
    pub center: C64,
    /// Half-diagonal of the final box.
    pub radius: f64,
    pub index: i32,
}

/// Roots and poles found in a region (or the winding of a single contour).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub contour: Option<SpectralContour>,
    /// Winding of `contour`, or for a localization the sum of all box indices.
    pub winding: i32,
    pub roots: Vec<LocatedPoint>,
    pub poles: Vec<LocatedPoint>,
    /// Boxes (re0, re1, im0, im1) skipped because they touch the essential spectrum.
    pub excluded: Vec<[f64; 4]>,
    pub evaluations: usize,
}

impl SpectralReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Integer lattice over the search region; box corners and edge samples live
/// on it so shared points are bit-identical.
struct Lattice {
    x0: f64,
    y0: f64,
    hx: f64,
    hy: f64,
}

/// Lattice units per side of the search region.
const LATTICE: i64 = 1 << 40;

impl Lattice {
    fn point(&self, p: &(i64, i64)) -> C64 {
        C64::new(self.x0 + p.0 as f64 * self.hx, self.y0 + p.1 as f64 * self.hy)
    }
}

#[derive(Debug, Clone, Copy)]
struct LBox {
    i0: i64,
    i1: i64,
    j0: i64,
    j1: i64,
}

impl LBox {
    fn bounds(&self, lat: &Lattice) -> [f64; 4] {
        let a = lat.point(&(self.i0, self.j0));
        let b = lat.point(&(self.i1, self.j1));
        [a.re, b.re, a.im, b.im]
    }

    fn diameter(&self, lat: &Lattice) -> f64 {
        let [x0, x1, y0, y1] = self.bounds(lat);
        (x1 - x0).hypot(y1 - y0)
    }

    fn quarters(&self) -> [LBox; 4] {
        let im = (self.i0 + self.i1) / 2;
        let jm = (self.j0 + self.j1) / 2;
        [
            LBox { i0: self.i0, i1: im, j0: self.j0, j1: jm },
            LBox { i0: im, i1: self.i1, j0: self.j0, j1: jm },
            LBox { i0: self.i0, i1: im, j0: jm, j1: self.j1 },
            LBox { i0: im, i1: self.i1, j0: jm, j1: self.j1 },
        ]
    }

    /// Counter-clockwise boundary samples, closed.
    fn boundary(&self, per_edge: i64) -> Vec<(i64, i64)> {
        let corners = [(self.i0, self.j0), (self.i1, self.j0), (self.i1, self.j1), (self.i0, self.j1)];
        let mut pts = Vec::with_capacity(4 * per_edge as usize + 1);
        for k in 0..4 {
            let (a, b) = (corners[k], corners[(k + 1) % 4]);
            for m in 0..per_edge {
                pts.push((a.0 + (b.0 - a.0) * m / per_edge, a.1 + (b.1 - a.1) * m / per_edge));
            }
        }
        pts.push(corners[0]);
        pts
    }
}

/// Whether a box lies in the region right of the essential spectrum, with margin.
fn clear_of_essential(model: &Model, bounds: [f64; 4], margin: f64) -> bool {
    let [x0, _, y0, y1] = bounds;
    // The border's real part is largest where |Im λ| is smallest.
    let y = if y0 <= 0.0 && y1 >= 0.0 { 0.0 } else { y0.abs().min(y1.abs()) };
    x0 >= border_real_part(model, y) + margin
}

fn box_winding<F: SpectralFunction + ?Sized>(f: &F, lat: &Lattice, b: &LBox, opts: &LocalizeOptions) -> Result<i32> {
    let per = opts.initial_per_edge.max(1) as i64;
    let midpoint = |a: &(i64, i64), c: &(i64, i64)| {
        let (di, dj) = (c.0 - a.0, c.1 - a.1);
        (di % 2 == 0 && dj % 2 == 0 && (di != 0 || dj != 0)).then(|| (a.0 + di / 2, a.1 + dj / 2))
    };
    let tr = trace_closed(f, b.boundary(per), |p| lat.point(p), midpoint, opts.budget)?;
    round_winding(tr.total_phase)
}

/// Locates roots (positive index) and poles (negative index) of f in the
/// part of the search rectangle that lies right of the essential spectrum.
///
/// The rectangle is tiled down to `scan_diameter`; tiles touching the
/// essential spectrum are split `border_depth` more times and the parts still
/// touching it are excluded. Tiles with nonzero winding are quadrisected
/// until their diameter is below `min_diameter`, checking at each split that
/// the indices of the four children add up to the parent's.
pub fn localize_spectrum<F: SpectralFunction + ?Sized>(
    f: &F,
    model: &Model,
    opts: &LocalizeOptions,
) -> Result<SpectralReport> {
    if !(opts.re.1 > opts.re.0 && opts.im.1 > opts.im.0) {
        return Err(Error::InvalidInput("empty search region".into()));
    }
    let memo = Memo::new(f);
    let lat = Lattice {
        x0: opts.re.0,
        y0: opts.im.0,
        hx: (opts.re.1 - opts.re.0) / LATTICE as f64,
        hy: (opts.im.1 - opts.im.0) / LATTICE as f64,
    };
    let root = LBox {
        i0: 0,
        i1: LATTICE,
        j0: 0,
        j1: LATTICE,
    };
    let mut tiles = vec![root];
    while tiles[0].diameter(&lat) > opts.scan_diameter {
        tiles = tiles.iter().flat_map(|b| b.quarters()).collect();
    }
    let mut excluded = Vec::new();
    let mut scan = Vec::new();
    let mut pending = tiles.into_iter().map(|b| (b, 0usize)).collect::<Vec<_>>();
    while let Some((b, depth)) = pending.pop() {
        if clear_of_essential(model, b.bounds(&lat), opts.border_margin) {
            scan.push(b);
        } else if depth < opts.border_depth {
            pending.extend(b.quarters().into_iter().map(|q| (q, depth + 1)));
        } else {
            excluded.push(b.bounds(&lat));
        }
    }
    let mut active = Vec::new();
    for b in scan {
        let n = box_winding(&memo, &lat, &b, opts)?;
        if n != 0 {
            active.push((b, n));
        }
    }
    let mut found = Vec::new();
    while let Some((b, n)) = active.pop() {
        if b.diameter(&lat) < opts.min_diameter {
            found.push((b, n));
            continue;
        }
        let mut sum = 0;
        let mut kids = Vec::new();
        for q in b.quarters() {
            let m = box_winding(&memo, &lat, &q, opts)?;
            sum += m;
            if m != 0 {
                kids.push((q, m));
            }
        }
        if sum != n {
            return Err(Error::Additivity { parent: n, children: sum });
        }
        active.extend(kids);
    }
    let mut report = SpectralReport {
        contour: None,
        winding: found.iter().map(|(_, n)| n).sum(),
        roots: Vec::new(),
        poles: Vec::new(),
        excluded,
        evaluations: memo.evaluations(),
    };
    for (b, n) in found {
        let [x0, x1, y0, y1] = b.bounds(&lat);
        let p = LocatedPoint {
            center: C64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)),
            radius: 0.5 * (x1 - x0).hypot(y1 - y0),
            index: n,
        };
        if n > 0 {
            report.roots.push(p);
        } else {
            report.poles.push(p);
        }
    }
    let by_re = |a: &LocatedPoint, b: &LocatedPoint| a.center.re.total_cmp(&b.center.re).then(a.center.im.total_cmp(&b.center.im));
    report.roots.sort_by(by_re);
    report.poles.sort_by(by_re);
    Ok(report)
}

/// Winding report for a single contour.
pub fn contour_report<F: SpectralFunction + ?Sized>(
    f: &F,
    mut contour: SpectralContour,
    opts: &ContourOptions,
) -> Result<SpectralReport> {
    let memo = Memo::new(f);
    let winding = winding_number(&memo, &mut contour, opts)?;
    Ok(SpectralReport {
        contour: Some(contour),
        winding,
        roots: Vec::new(),
        poles: Vec::new(),
        excluded: Vec::new(),
        evaluations: memo.evaluations(),
    })
}
