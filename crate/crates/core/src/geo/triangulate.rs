//! Multi-cell intersection and trilateration.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::region::GeoBounds;
use super::{
    estimate_region, CellDb, GeoError, LocalFrame, ObservationEvent, RegionEstimate, RegionKind,
};

/// Planar least-squares position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fix {
    pub x: f64,
    pub y: f64,
    /// Largest absolute range residual, metres.
    pub max_residual: f64,
}

/// Solves for the point at the given ranges from three or more planar
/// anchors `(x, y, r)`.
///
/// Returns `None` with fewer than three anchors or when they are collinear,
/// in which case the position is ambiguous.
pub fn trilaterate_local(anchors: &[(f64, f64, f64)]) -> Option<Fix> {
    if anchors.len() < 3 || collinear(anchors.iter().map(|a| (a.0, a.1))) {
        return None;
    }
    // Linearize against the first anchor, then solve the 2x2 normal equations.
    let (x0, y0, r0) = anchors[0];
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(xi, yi, ri) in &anchors[1..] {
        let (ax, ay) = (2.0 * (xi - x0), 2.0 * (yi - y0));
        let b = r0 * r0 - ri * ri + xi * xi - x0 * x0 + yi * yi - y0 * y0;
        a11 += ax * ax;
        a12 += ax * ay;
        a22 += ay * ay;
        b1 += ax * b;
        b2 += ay * b;
    }
    let det = a11 * a22 - a12 * a12;
    let (mut x, mut y) = ((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det);

    // Gauss-Newton on the range residuals; a no-op for consistent ranges.
    for _ in 0..20 {
        let (mut h11, mut h12, mut h22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(xi, yi, ri) in anchors {
            let d = (x - xi).hypot(y - yi);
            if d < 1e-12 {
                continue;
            }
            let (jx, jy) = ((x - xi) / d, (y - yi) / d);
            let res = d - ri;
            h11 += jx * jx;
            h12 += jx * jy;
            h22 += jy * jy;
            g1 += jx * res;
            g2 += jy * res;
        }
        let det = h11 * h22 - h12 * h12;
        if det.abs() < 1e-18 {
            break;
        }
        let (dx, dy) = ((h22 * g1 - h12 * g2) / det, (h11 * g2 - h12 * g1) / det);
        x -= dx;
        y -= dy;
        if dx.hypot(dy) < 1e-12 * (1.0 + x.hypot(y)) {
            break;
        }
    }
    let max_residual = anchors
        .iter()
        .map(|&(xi, yi, ri)| ((x - xi).hypot(y - yi) - ri).abs())
        .fold(0.0, f64::max);
    Some(Fix { x, y, max_residual })
}

fn collinear(points: impl Iterator<Item = (f64, f64)> + Clone) -> bool {
    let n = points.clone().count() as f64;
    let (mx, my) = points
        .clone()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    // smallest/largest eigenvalue of the scatter matrix
    tr == 0.0 || det <= 1e-9 * tr * tr
}

/// Intersection points of two circles; tangent or disjoint circles yield
/// the nearest point on the centre line (twice).
pub fn circle_intersections(c1: (f64, f64, f64), c2: (f64, f64, f64)) -> [(f64, f64); 2] {
    let (dx, dy) = (c2.0 - c1.0, c2.1 - c1.1);
    let d = dx.hypot(dy);
    if d == 0.0 {
        return [(c1.0 + c1.2, c1.1); 2];
    }
    let a = (d * d + c1.2 * c1.2 - c2.2 * c2.2) / (2.0 * d);
    let h = (c1.2 * c1.2 - a * a).max(0.0).sqrt();
    let (ux, uy) = (dx / d, dy / d);
    let (px, py) = (c1.0 + a * ux, c1.1 + a * uy);
    [(px - h * uy, py + h * ux), (px + h * uy, py - h * ux)]
}

struct RasterHit {
    area_m2: f64,
    centroid: (f64, f64),
    min: (f64, f64),
    max: (f64, f64),
}

/// Estimates the common area of `parts` by sampling pixel centres on
/// successively finer grids. Coarse levels test regions dilated by half a
/// pixel diagonal so thin intersections are not lost between samples.
fn raster_intersection(
    frame: &LocalFrame,
    parts: &[(RegionEstimate, LocalFrame)],
    bounds: ((f64, f64), (f64, f64)),
) -> Option<RasterHit> {
    const LEVELS: [usize; 3] = [256, 128, 128];
    let member = |x: f64, y: f64, tol: f64| {
        let g = frame.to_geo(x, y);
        parts.iter().all(|(r, f)| {
            let (px, py) = f.to_local(g);
            r.contains_offset(px, py, tol)
        })
    };
    let ((mut x0, mut y0), (mut x1, mut y1)) = bounds;
    for (level, &n) in LEVELS.iter().enumerate() {
        let last = level + 1 == LEVELS.len();
        let (w, h) = ((x1 - x0).max(1e-9), (y1 - y0).max(1e-9));
        let px = w.max(h) / n as f64;
        let (nx, ny) = ((w / px).ceil() as usize, (h / px).ceil() as usize);
        let dilation = px * std::f64::consts::FRAC_1_SQRT_2;
        let mut exact = (0usize, 0.0, 0.0);
        let mut hit_min = (f64::INFINITY, f64::INFINITY);
        let mut hit_max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for j in 0..ny {
            let y = y0 + (j as f64 + 0.5) * px;
            for i in 0..nx {
                let x = x0 + (i as f64 + 0.5) * px;
                if !member(x, y, dilation) {
                    continue;
                }
                hit_min = (hit_min.0.min(x), hit_min.1.min(y));
                hit_max = (hit_max.0.max(x), hit_max.1.max(y));
                if last && member(x, y, 1e-9) {
                    exact = (exact.0 + 1, exact.1 + x, exact.2 + y);
                }
            }
        }
        if !hit_min.0.is_finite() {
            return None;
        }
        if last {
            let centroid = if exact.0 > 0 {
                (exact.1 / exact.0 as f64, exact.2 / exact.0 as f64)
            } else {
                ((hit_min.0 + hit_max.0) / 2.0, (hit_min.1 + hit_max.1) / 2.0)
            };
            return Some(RasterHit {
                area_m2: exact.0 as f64 * px * px,
                centroid,
                min: hit_min,
                max: hit_max,
            });
        }
        (x0, y0, x1, y1) = (
            hit_min.0 - px,
            hit_min.1 - px,
            hit_max.0 + px,
            hit_max.1 + px,
        );
    }
    unreachable!("last level returns")
}

/// Combines simultaneous observations of one UE from distinct cells.
///
/// With at least three non-collinear timing-advance cells whose ranges agree
/// exactly, the result is a `point`. Otherwise it is an `intersection` of the
/// per-cell regions with a raster-estimated area and centroid. Two (or
/// collinear) timing-advance cells without beam information leave a mirror
/// ambiguity, reported as `CollinearCells` with both candidates.
pub fn triangulate(events: &[ObservationEvent], db: &CellDb) -> Result<RegionEstimate, GeoError> {
    let first = events
        .first()
        .ok_or(GeoError::TooFewCells { needed: 2, got: 0 })?;
    let mut cells = BTreeSet::new();
    for e in events {
        if e.ue_ref != first.ue_ref {
            return Err(GeoError::MixedObservations(format!(
                "ue_ref {} and {}",
                first.ue_ref, e.ue_ref
            )));
        }
        if e.time_s.floor() != first.time_s.floor() {
            return Err(GeoError::MixedObservations(format!(
                "times {} and {} fall in different buckets",
                first.time_s, e.time_s
            )));
        }
        if !cells.insert(e.cell_id) {
            return Err(GeoError::MixedObservations(format!(
                "cell {} observed twice",
                e.cell_id
            )));
        }
    }
    if cells.len() < 2 {
        return Err(GeoError::TooFewCells {
            needed: 2,
            got: cells.len(),
        });
    }
    let regions = events
        .iter()
        .map(|e| estimate_region(e, db))
        .collect::<Result<Vec<_>, _>>()?;
    let frame = LocalFrame::new(regions[0].center);
    let parts: Vec<(RegionEstimate, LocalFrame)> = regions
        .iter()
        .map(|r| (r.clone(), LocalFrame::new(r.center)))
        .collect();

    let mut lo = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut hi = (f64::INFINITY, f64::INFINITY);
    for r in &regions {
        let (cx, cy) = frame.to_local(r.center);
        lo = (lo.0.max(cx - r.r_max), lo.1.max(cy - r.r_max));
        hi = (hi.0.min(cx + r.r_max), hi.1.min(cy + r.r_max));
    }
    if lo.0 > hi.0 || lo.1 > hi.1 {
        return Err(GeoError::InconsistentObservations);
    }
    let hit =
        raster_intersection(&frame, &parts, (lo, hi)).ok_or(GeoError::InconsistentObservations)?;

    let anchors: Vec<(f64, f64, f64)> = regions
        .iter()
        .filter(|r| matches!(r.kind, RegionKind::Annulus | RegionKind::AnnulusSector))
        .map(|r| {
            let (x, y) = frame.to_local(r.center);
            (x, y, (r.r_min + r.r_max) / 2.0)
        })
        .collect();
    let has_beam = regions.iter().any(|r| r.az_min.is_some());

    if let Some(fix) = trilaterate_local(&anchors) {
        let scale = anchors.iter().map(|a| a.2).fold(1.0, f64::max);
        let p = frame.to_geo(fix.x, fix.y);
        if fix.max_residual <= 1e-6 * scale && regions.iter().all(|r| r.contains(p, 1e-6 * scale)) {
            return Ok(RegionEstimate::point(p, regions));
        }
    } else if anchors.len() >= 2 && !has_beam {
        let (a, b) = anchors
            .iter()
            .enumerate()
            .flat_map(|(i, a)| anchors[i + 1..].iter().map(move |b| (*a, *b)))
            .max_by(|p, q| {
                let d = |(a, b): &((f64, f64, f64), (f64, f64, f64))| (a.0 - b.0).hypot(a.1 - b.1);
                d(p).total_cmp(&d(q))
            })
            .expect("two anchors");
        let candidates = circle_intersections(a, b)
            .iter()
            .map(|&(x, y)| frame.to_geo(x, y))
            .collect();
        return Err(GeoError::CollinearCells { candidates });
    }

    let centroid = frame.to_geo(hit.centroid.0, hit.centroid.1);
    let corners = [
        hit.min,
        hit.max,
        (hit.min.0, hit.max.1),
        (hit.max.0, hit.min.1),
    ];
    let r_max = corners
        .iter()
        .map(|c| (c.0 - hit.centroid.0).hypot(c.1 - hit.centroid.1))
        .fold(0.0, f64::max);
    Ok(RegionEstimate {
        kind: RegionKind::Intersection,
        cell_id: None,
        center: centroid,
        r_min: 0.0,
        r_max,
        az_min: None,
        az_max: None,
        point: None,
        area_m2: hit.area_m2,
        centroid,
        bounds: Some(GeoBounds {
            south_west: frame.to_geo(hit.min.0, hit.min.1),
            north_east: frame.to_geo(hit.max.0, hit.max.1),
        }),
        parts: regions,
    })
}
