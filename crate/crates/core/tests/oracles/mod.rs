//! Brute-force reference implementations shared by the property tests and
//! the acceptance suite.
#![allow(dead_code)]

use asmpc_core::polytope::HPolytope;
use asmpc_core::rls::ModelEstimate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn unit(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Random polytope with the origin strictly inside: random facets, a
/// bounding box, plus deliberately redundant rows (scaled duplicates and
/// loose cuts).
pub fn random_polytope(seed: u64, d: usize) -> HPolytope<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(d + 1..=10);
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for _ in 0..k {
        rows.push((unit(&mut rng, d), rng.random_range(0.2..2.0)));
    }
    for j in 0..d {
        let mut e = DVector::zeros(d);
        e[j] = 1.0;
        rows.push((e.clone(), 3.0));
        rows.push((-e, 3.0));
    }
    let extra = rng.random_range(0..3);
    for _ in 0..extra {
        let i = rng.random_range(0..rows.len());
        let s = rng.random_range(0.5..4.0);
        let (a, b) = rows[i].clone();
        rows.push((a * s, b * s));
    }
    if rng.random_bool(0.5) {
        rows.push((unit(&mut rng, d), 10.0));
    }
    let a = DMatrix::from_fn(rows.len(), d, |i, j| rows[i].0[j]);
    let b = DVector::from_fn(rows.len(), |i, _| rows[i].1);
    HPolytope::new(a, b).unwrap()
}

pub fn cross(o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by the monotone chain, counter-clockwise, collinear points
/// dropped.
pub fn hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    pts.dedup_by(|p, q| (p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 1e-12 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 1e-12 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Vertices of a 2-D polytope containing the origin via polar duality: the
/// edges of the hull of `a_i / b_i` are the vertices of `{x : a x <= b}`.
pub fn polar_vertices(p: &HPolytope<f64>) -> Vec<DVector<f64>> {
    let pts: Vec<[f64; 2]> = (0..p.num_rows())
        .map(|i| [p.a()[(i, 0)] / p.b()[i], p.a()[(i, 1)] / p.b()[i]])
        .collect();
    let h = hull(pts);
    (0..h.len())
        .map(|i| {
            let (u, v) = (h[i], h[(i + 1) % h.len()]);
            let det = u[0] * v[1] - u[1] * v[0];
            DVector::from_vec(vec![(v[1] - u[1]) / det, (u[0] - v[0]) / det])
        })
        .collect()
}

/// Every feasible intersection of `d` rows, deduplicated.
pub fn brute_vertices(p: &HPolytope<f64>) -> Vec<DVector<f64>> {
    let d = p.dim();
    let k = p.num_rows();
    let mut out: Vec<DVector<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        let m = DMatrix::from_fn(d, d, |r, c| p.a()[(idx[r], c)]);
        let rhs = DVector::from_fn(d, |r, _| p.b()[idx[r]]);
        if m.determinant().abs() > 1e-9 {
            if let Some(x) = m.lu().solve(&rhs) {
                let feasible = (0..k).all(|i| p.a().row(i).transpose().dot(&x) <= p.b()[i] + 1e-9);
                if feasible && !out.iter().any(|v| (v - &x).norm() < 1e-8) {
                    out.push(x);
                }
            }
        }
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < k - d + i {
                idx[i] += 1;
                for j in i + 1..d {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn same_sets(a: &[DVector<f64>], b: &[DVector<f64>], tol: f64) -> bool {
    a.len() == b.len() && a.iter().all(|x| b.iter().any(|y| (x - y).norm() <= tol))
}

/// A row is a facet iff it is tight at `d` affinely independent vertices.
pub fn facet_rows(p: &HPolytope<f64>, verts: &[DVector<f64>]) -> Vec<bool> {
    let d = p.dim();
    (0..p.num_rows())
        .map(|i| {
            let n = p.a().row(i).norm();
            let tight: Vec<&DVector<f64>> = verts
                .iter()
                .filter(|v| (p.a().row(i).transpose().dot(v) - p.b()[i]).abs() / n < 1e-7)
                .collect();
            if tight.len() < d {
                return false;
            }
            let diffs = DMatrix::from_fn(d, tight.len() - 1, |r, c| tight[c + 1][r] - tight[0][r]);
            diffs.rank(1e-7) == d - 1
        })
        .collect()
}

/// Distinct facets, counting rows with the same normalized halfspace once.
pub fn distinct_facets(p: &HPolytope<f64>, facet: &[bool]) -> usize {
    let mut seen: Vec<DVector<f64>> = Vec::new();
    for (i, &is_facet) in facet.iter().enumerate() {
        if !is_facet {
            continue;
        }
        let n = p.a().row(i).norm();
        let mut key = p.a().row(i).transpose() / n;
        key = key.insert_row(p.dim(), p.b()[i] / n);
        if !seen.iter().any(|s| (s - &key).norm() < 1e-7) {
            seen.push(key);
        }
    }
    seen.len()
}

pub fn inscribed_radius(p: &HPolytope<f64>, x: &DVector<f64>) -> f64 {
    (0..p.num_rows())
        .map(|i| {
            let row = p.a().row(i);
            (p.b()[i] - row.transpose().dot(x)) / row.norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Grid cell as center and half widths.
type Cell = ([f64; 2], [f64; 2]);

/// Largest inscribed radius by a refining grid. Cells split into quarters;
/// since the radius is 1-Lipschitz a cell whose center value plus half its
/// diagonal cannot beat the incumbent by `accuracy` is dropped. On return
/// the best grid point is within `accuracy` of the optimum.
pub fn grid_radius(p: &HPolytope<f64>, verts: &[DVector<f64>], accuracy: f64) -> (DVector<f64>, f64) {
    let lo = [0, 1].map(|j| verts.iter().map(|v| v[j]).fold(f64::INFINITY, f64::min));
    let hi = [0, 1].map(|j| verts.iter().map(|v| v[j]).fold(f64::NEG_INFINITY, f64::max));
    let n = 16;
    let step = [(hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64];
    let mut cells: Vec<([f64; 2], [f64; 2])> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let c = [lo[0] + step[0] * (i as f64 + 0.5), lo[1] + step[1] * (j as f64 + 0.5)];
            cells.push((c, [step[0] / 2.0, step[1] / 2.0]));
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut center = DVector::zeros(2);
    while !cells.is_empty() {
        let mut next = Vec::new();
        let evaluated: Vec<(Cell, f64)> = cells
            .into_iter()
            .map(|cell| {
                let r = inscribed_radius(p, &DVector::from_vec(cell.0.to_vec()));
                (cell, r)
            })
            .collect();
        for ((c, _), r) in &evaluated {
            if *r > best {
                best = *r;
                center = DVector::from_vec(c.to_vec());
            }
        }
        for ((c, half), r) in evaluated {
            if r + half[0].hypot(half[1]) <= best + accuracy {
                continue;
            }
            let q = [half[0] / 2.0, half[1] / 2.0];
            for (sx, sy) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                next.push(([c[0] + sx * q[0], c[1] + sy * q[1]], q));
            }
        }
        cells = next;
    }
    (center, best)
}

/// Exact largest radius: the LP in `(x, r)` has an optimal basic solution,
/// so it is the best feasible point among all triples of tight rows.
pub fn triple_radius(p: &HPolytope<f64>) -> f64 {
    let k = p.num_rows();
    let norms: Vec<f64> = (0..k).map(|i| p.a().row(i).norm()).collect();
    let mut best = f64::NEG_INFINITY;
    for i in 0..k {
        for j in i + 1..k {
            for l in j + 1..k {
                let m = DMatrix::from_fn(3, 3, |r, c| {
                    let row = [i, j, l][r];
                    if c < 2 {
                        p.a()[(row, c)]
                    } else {
                        norms[row]
                    }
                });
                let rhs = DVector::from_fn(3, |r, _| p.b()[[i, j, l][r]]);
                if m.determinant().abs() < 1e-10 {
                    continue;
                }
                let sol = m.lu().solve(&rhs).unwrap();
                let x = sol.rows(0, 2).into_owned();
                if inscribed_radius(p, &x) >= sol[2] - 1e-9 {
                    best = best.max(sol[2]);
                }
            }
        }
    }
    best
}

pub fn shoelace(verts: &[DVector<f64>]) -> f64 {
    let c = verts.iter().fold(DVector::zeros(2), |a, v| a + v) / verts.len() as f64;
    let mut sorted: Vec<&DVector<f64>> = verts.iter().collect();
    sorted.sort_by(|a, b| {
        let ta = (a[1] - c[1]).atan2(a[0] - c[0]);
        let tb = (b[1] - c[1]).atan2(b[0] - c[0]);
        ta.partial_cmp(&tb).unwrap()
    });
    let mut area = 0.0;
    for i in 0..sorted.len() {
        let (p, q) = (sorted[i], sorted[(i + 1) % sorted.len()]);
        area += p[0] * q[1] - p[1] * q[0];
    }
    area.abs() / 2.0
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

/// Posterior of a Gaussian prior after all measurements at once, in
/// information form.
pub fn batch_posterior(
    prior: &ModelEstimate<f64>,
    blocks: &[DMatrix<f64>],
    ys: &[DVector<f64>],
) -> (DVector<f64>, DMatrix<f64>) {
    let p0_inv = prior.covariance.clone().try_inverse().unwrap();
    let r_inv = prior.noise_var.clone().try_inverse().unwrap();
    let mut info = p0_inv.clone();
    let mut vec = &p0_inv * &prior.mean;
    for (h, y) in blocks.iter().zip(ys) {
        info += h.transpose() * &r_inv * h;
        vec += h.transpose() * &r_inv * y;
    }
    let cov = info.try_inverse().unwrap();
    (&cov * vec, cov)
}
