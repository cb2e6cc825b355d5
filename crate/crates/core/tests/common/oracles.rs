//! Brute-force reference implementations used as test oracles. They share
//! no code with the library and favour obviousness over speed.

#![allow(dead_code)]

use rand::Rng;

/// Pixel-centre coordinates (row, col) of a random 4-connected polyomino
/// grown cell by cell inside a `side` x `side` box.
pub fn random_polyomino<R: Rng>(rng: &mut R, side: i64, max_cells: usize) -> Vec<(i64, i64)> {
    let target = rng.random_range(1..=max_cells);
    let start = (rng.random_range(0..side), rng.random_range(0..side));
    let mut cells = vec![start];
    let mut tries = 0;
    while cells.len() < target && tries < 50 * max_cells {
        tries += 1;
        let (r, c) = cells[rng.random_range(0..cells.len())];
        let (dr, dc) = [(0, 1), (1, 0), (0, -1), (-1, 0)][rng.random_range(0..4)];
        let n = (r + dr, c + dc);
        if n.0 < 0 || n.1 < 0 || n.0 >= side || n.1 >= side || cells.contains(&n) {
            continue;
        }
        cells.push(n);
    }
    cells
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Number of grid points inside or on the convex hull of `points`: every
/// point of the bounding box is tested against all supporting lines through
/// pairs of input points.
pub fn hull_grid_points(points: &[(i64, i64)]) -> usize {
    let mut support = Vec::new();
    for &a in points {
        for &b in points {
            if a == b {
                continue;
            }
            if points.iter().all(|&c| cross(a, b, c) >= 0) {
                support.push((a, b));
            }
        }
    }
    let rmin = points.iter().map(|p| p.0).min().unwrap();
    let rmax = points.iter().map(|p| p.0).max().unwrap();
    let cmin = points.iter().map(|p| p.1).min().unwrap();
    let cmax = points.iter().map(|p| p.1).max().unwrap();
    let mut count = 0;
    for r in rmin..=rmax {
        for c in cmin..=cmax {
            if support.iter().all(|&(a, b)| cross(a, b, (r, c)) >= 0) {
                count += 1;
            }
        }
    }
    count
}

fn all_collinear(points: &[(i64, i64)]) -> bool {
    let p = points[0];
    let Some(&q) = points.iter().find(|&&q| q != p) else {
        return true;
    };
    points.iter().all(|&c| cross(p, q, c) == 0)
}

/// Pixel count over hull grid-point count, with the degenerate rule
/// (fewer than three pixels or all collinear gives 1).
pub fn convexity_ratio_bf(points: &[(i64, i64)]) -> f64 {
    if points.len() < 3 || all_collinear(points) {
        return 1.0;
    }
    points.len() as f64 / hull_grid_points(points) as f64
}

/// Flat row-major coordinates for arbitrary rank.
pub fn unflatten(mut i: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = i % dims[k];
        i /= dims[k];
    }
    out
}

/// Foreground pixels touching background or the border across a face.
pub fn boundary_bf(dims: &[usize], v: &[bool]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..v.len() {
        if !v[i] {
            continue;
        }
        let c = unflatten(i, dims);
        let mut edge = false;
        for k in 0..dims.len() {
            for delta in [-1i64, 1] {
                let n = c[k] as i64 + delta;
                if n < 0 || n >= dims[k] as i64 {
                    edge = true;
                    continue;
                }
                let mut cc = c.clone();
                cc[k] = n as usize;
                let j = cc.iter().zip(dims).fold(0, |acc, (x, d)| acc * d + x);
                if !v[j] {
                    edge = true;
                }
            }
        }
        if edge {
            out.push(i);
        }
    }
    out
}

fn dist2(a: &[usize], b: &[usize]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (*x as i64 - *y as i64).pow(2)).sum()
}

/// For each boundary pixel of `a`, the distance to the nearest boundary
/// pixel of `b`, in ascending pixel order of `a`.
pub fn directed_bf(dims: &[usize], a: &[bool], b: &[bool]) -> Vec<f64> {
    let ba = boundary_bf(dims, a);
    let bb = boundary_bf(dims, b);
    ba.iter()
        .map(|&i| {
            let ci = unflatten(i, dims);
            let best = bb.iter().map(|&j| dist2(&ci, &unflatten(j, dims))).min().unwrap();
            (best as f64).sqrt()
        })
        .collect()
}

pub fn adb_bf(dims: &[usize], a: &[bool], b: &[bool]) -> f64 {
    let ab = directed_bf(dims, a, b);
    let ba = directed_bf(dims, b, a);
    let mean = |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64;
    (mean(&ab) + mean(&ba)) / 2.0
}

pub fn hausdorff_bf(dims: &[usize], a: &[bool], b: &[bool]) -> f64 {
    directed_bf(dims, a, b)
        .into_iter()
        .chain(directed_bf(dims, b, a))
        .fold(0.0, f64::max)
}

fn counts(a: &[bool], b: &[bool]) -> (usize, usize, usize) {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    (inter, a.iter().filter(|x| **x).count(), b.iter().filter(|x| **x).count())
}

/// Both empty counts as perfect agreement.
pub fn dice_bf(a: &[bool], b: &[bool]) -> f64 {
    let (i, na, nb) = counts(a, b);
    if na + nb == 0 {
        1.0
    } else {
        2.0 * i as f64 / (na + nb) as f64
    }
}

pub fn iou_bf(a: &[bool], b: &[bool]) -> f64 {
    let (i, na, nb) = counts(a, b);
    let union = na + nb - i;
    if union == 0 {
        1.0
    } else {
        i as f64 / union as f64
    }
}

/// Random mask mixing salt noise with a few filled rectangles.
pub fn random_mask<R: Rng>(rng: &mut R, dims: &[usize]) -> Vec<bool> {
    let n: usize = dims.iter().product();
    let density = rng.random_range(0.0..0.3);
    let mut v: Vec<bool> = (0..n).map(|_| rng.random_bool(density)).collect();
    for _ in 0..rng.random_range(0..4) {
        let lo: Vec<usize> = dims.iter().map(|&d| rng.random_range(0..d)).collect();
        let hi: Vec<usize> = lo.iter().zip(dims).map(|(&l, &d)| rng.random_range(l..d) + 1).collect();
        for (i, slot) in v.iter_mut().enumerate() {
            let c = unflatten(i, dims);
            if c.iter().zip(&lo).zip(&hi).all(|((x, l), h)| x >= l && x < h) {
                *slot = true;
            }
        }
    }
    v
}
