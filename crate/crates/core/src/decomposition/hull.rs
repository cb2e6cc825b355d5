//! Convex hulls of pixel sets and the convexity ratio used to split objects
//! into convex-like and concave-like groups.

use super::components::ObjectComponent;
use crate::error::{Error, Result};

/// Pixel centre as (row, col).
pub type GridPoint = (i64, i64);

fn cross(o: GridPoint, a: GridPoint, b: GridPoint) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain. Returns hull vertices counter-clockwise (in
/// (row, col) coordinates) with collinear points dropped. Fewer than three
/// vertices means the input is degenerate.
pub fn convex_hull(points: &[GridPoint]) -> Vec<GridPoint> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<GridPoint> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn div_floor(a: i64, b: i64) -> i64 {
    let q = a.div_euclid(b);
    if b < 0 && a.rem_euclid(b) != 0 {
        // div_euclid rounds toward making the remainder non-negative, which
        // for a negative divisor is a ceiling.
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i64, b: i64) -> i64 {
    -div_floor(-a, b)
}

/// Number of grid points inside or on a counter-clockwise convex polygon
/// with at least three vertices. Each row is clipped against every edge's
/// half-plane in exact integer arithmetic.
pub fn rasterized_area(hull: &[GridPoint]) -> usize {
    assert!(hull.len() >= 3, "rasterized_area needs a proper polygon");
    let rmin = hull.iter().map(|p| p.0).min().unwrap();
    let rmax = hull.iter().map(|p| p.0).max().unwrap();
    let cmin = hull.iter().map(|p| p.1).min().unwrap();
    let cmax = hull.iter().map(|p| p.1).max().unwrap();
    let mut total = 0usize;
    for r in rmin..=rmax {
        let (mut lo, mut hi) = (cmin, cmax);
        for k in 0..hull.len() {
            let a = hull[k];
            let b = hull[(k + 1) % hull.len()];
            let (dr, dc) = (b.0 - a.0, b.1 - a.1);
            // inside iff dr * (c - a.c) - dc * (r - a.r) >= 0
            let rhs = dr * a.1 + dc * (r - a.0);
            match dr.signum() {
                1 => lo = lo.max(div_ceil(rhs, dr)),
                -1 => hi = hi.min(div_floor(rhs, dr)),
                _ => {
                    if -dc * (r - a.0) < 0 {
                        hi = lo - 1;
                    }
                }
            }
            if lo > hi {
                break;
            }
        }
        if lo <= hi {
            total += (hi - lo + 1) as usize;
        }
    }
    total
}

/// Object size over the pixel count of its rasterized convex hull.
///
/// Objects with fewer than three pixels or whose pixels are collinear have
/// no proper hull and get ratio 1.
pub fn convexity_ratio(component: &ObjectComponent) -> Result<f64> {
    if component.is_empty() {
        return Err(Error::InvalidArgument(
            "convexity ratio of an empty component".into(),
        ));
    }
    if component.dims.len() != 2 {
        return Err(Error::UnsupportedDimension(format!(
            "convexity ratio is defined for 2D components, got dims {:?}",
            component.dims
        )));
    }
    let points: Vec<GridPoint> = component
        .coords()
        .map(|c| (c[0] as i64, c[1] as i64))
        .collect();
    Ok(convexity_ratio_of_points(&points))
}

pub fn convexity_ratio_of_points(points: &[GridPoint]) -> f64 {
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return 1.0;
    }
    let mut distinct = points.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    distinct.len() as f64 / rasterized_area(&hull) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_is_convex() {
        let pts: Vec<GridPoint> = (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).collect();
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert_eq!(rasterized_area(&hull), 9);
        assert_eq!(convexity_ratio_of_points(&pts), 1.0);
    }

    #[test]
    fn l_pentomino_ratio() {
        let pts = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 3);
        assert_eq!(rasterized_area(&hull), 6);
        assert!((convexity_ratio_of_points(&pts) - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(convexity_ratio_of_points(&[(4, 4)]), 1.0);
        assert_eq!(convexity_ratio_of_points(&[(0, 0), (1, 1)]), 1.0);
        assert_eq!(convexity_ratio_of_points(&[(0, 0), (1, 1), (2, 2), (3, 3)]), 1.0);
    }

    #[test]
    fn floor_and_ceil_division() {
        for a in -7..=7 {
            for b in [-3i64, -2, -1, 1, 2, 3] {
                let exact = a as f64 / b as f64;
                assert_eq!(div_floor(a, b), exact.floor() as i64, "{a}/{b}");
                assert_eq!(div_ceil(a, b), exact.ceil() as i64, "{a}/{b}");
            }
        }
    }

    #[test]
    fn empty_and_3d_components_are_rejected() {
        let empty = ObjectComponent {
            id: 0,
            label: 1,
            dims: vec![2, 2],
            indices: vec![],
        };
        assert!(convexity_ratio(&empty).is_err());
        let voxel = ObjectComponent {
            id: 0,
            label: 1,
            dims: vec![2, 2, 2],
            indices: vec![0],
        };
        assert!(convexity_ratio(&voxel).is_err());
    }
}
