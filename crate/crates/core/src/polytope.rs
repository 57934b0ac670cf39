//! Halfspace-representation polytopes `{x : A x <= b}`.
//!
//! Redundancy removal and boundedness checks go through the simplex LP;
//! vertices are enumerated combinatorially over `d`-subsets of rows, which is
//! exact and cheap for the low dimensions the controller works in.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;
use crate::solver::{solve_lp, solve_qp, SolveStatus};

/// Largest dimension accepted by [`HPolytope::enumerate_vertices`].
pub const MAX_ENUMERATION_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryTolerances<T> {
    /// Singularity threshold for active sets and duplicate-vertex merging.
    pub rank: T,
    /// Slack allowed when testing a point against a row.
    pub feasibility: T,
    /// Margin by which a row must bound the rest of the set to be kept.
    pub redundancy: T,
}

impl<T: Real> Default for GeometryTolerances<T> {
    fn default() -> Self {
        let eps = T::eps();
        Self {
            rank: (eps * T::lit(1e3)).max(T::lit(1e-8)),
            feasibility: (eps * T::lit(1e4)).max(T::lit(1e-6)),
            redundancy: (eps * T::lit(1e3)).max(T::lit(1e-9)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope<T: Real> {
    a: DMatrix<T>,
    b: DVector<T>,
}

/// Vertex list of a bounded polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet<T: Real> {
    pub vertices: Vec<DVector<T>>,
}

impl<T: Real> VertexSet<T> {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DVector<T>> {
        self.vertices.iter()
    }
}

impl<T: Real> HPolytope<T> {
    /// Builds `{x : a x <= b}`. All-zero rows are dropped when `b >= 0` and
    /// rejected otherwise.
    pub fn new(a: DMatrix<T>, b: DVector<T>) -> Result<Self> {
        check_len("polytope right-hand side", a.nrows(), b.len())?;
        if a.ncols() == 0 {
            return Err(Error::InvalidArgument("polytope dimension must be at least 1".into()));
        }
        let mut keep = Vec::with_capacity(a.nrows());
        for i in 0..a.nrows() {
            if a.row(i).amax() == T::zero() {
                if b[i] < T::zero() {
                    return Err(Error::InvalidArgument(format!(
                        "row {i} reads 0 <= {}, which no point satisfies",
                        b[i]
                    )));
                }
                continue;
            }
            keep.push(i);
        }
        if keep.len() == a.nrows() {
            return Ok(Self { a, b });
        }
        Ok(Self {
            a: a.select_rows(keep.iter()),
            b: b.select_rows(keep.iter()),
        })
    }

    /// Axis-aligned box `lower <= x <= upper`.
    pub fn from_box(lower: &DVector<T>, upper: &DVector<T>) -> Result<Self> {
        check_len("box bounds", lower.len(), upper.len())?;
        let d = lower.len();
        if (0..d).any(|i| lower[i] > upper[i]) {
            return Err(Error::EmptyPolytope);
        }
        let mut a = DMatrix::zeros(2 * d, d);
        let mut b = DVector::zeros(2 * d);
        for i in 0..d {
            a[(2 * i, i)] = T::one();
            b[2 * i] = upper[i];
            a[(2 * i + 1, i)] = -T::one();
            b[2 * i + 1] = -lower[i];
        }
        Self::new(a, b)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DVector<T> {
        &self.b
    }

    /// Returns a copy with `a' x <= b` appended.
    pub fn add_halfspace(&self, a: &DVector<T>, b: T) -> Result<Self> {
        check_len("halfspace normal", self.dim(), a.len())?;
        if a.amax() == T::zero() {
            return Err(Error::InvalidArgument("halfspace normal is zero".into()));
        }
        let k = self.num_rows();
        let mut mat = self.a.clone().insert_row(k, T::zero());
        mat.row_mut(k).copy_from(&a.transpose());
        let rhs = self.b.clone().push(b);
        Ok(Self { a: mat, b: rhs })
    }

    pub fn contains(&self, x: &DVector<T>, tol: T) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        (0..self.num_rows()).all(|i| self.a.row(i).dot(&x.transpose()) <= self.b[i] + tol)
    }

    /// Largest `a_i' x - b_i` over rows normalized to unit length.
    pub fn max_normalized_violation(&self, x: &DVector<T>) -> T {
        (0..self.num_rows())
            .map(|i| {
                let row = self.a.row(i);
                (row.dot(&x.transpose()) - self.b[i]) / row.norm()
            })
            .fold(T::lit(f64::NEG_INFINITY), |m, v| m.max(v))
    }

    /// Copy with every row scaled to unit Euclidean norm.
    pub fn normalized(&self) -> Self {
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        for i in 0..a.nrows() {
            let n = a.row(i).norm();
            a.row_mut(i).unscale_mut(n);
            b[i] /= n;
        }
        Self { a, b }
    }

    pub fn is_empty(&self) -> Result<bool> {
        let rep = solve_lp(&DVector::zeros(self.dim()), &self.a, &self.b)?;
        match rep.status {
            SolveStatus::Infeasible => Ok(true),
            SolveStatus::Optimal => Ok(false),
            other => Err(Error::NotOptimal(format!("emptiness test: {other}"))),
        }
    }

    /// Non-empty and bounded, checked with `2d` LPs over the coordinate
    /// directions.
    pub fn check_bounded_nonempty(&self) -> Result<()> {
        let norm = self.normalized();
        for j in 0..self.dim() {
            for sign in [T::one(), -T::one()] {
                let mut c = DVector::zeros(self.dim());
                c[j] = -sign;
                let rep = solve_lp(&c, &norm.a, &norm.b)?;
                match rep.status {
                    SolveStatus::Optimal => {}
                    SolveStatus::Infeasible => return Err(Error::EmptyPolytope),
                    SolveStatus::Unbounded => return Err(Error::UnboundedPolytope),
                    SolveStatus::SolverFailure => return Err(Error::NotOptimal("boundedness test".into())),
                }
            }
        }
        Ok(())
    }

    /// Drops every row that does not change the point set.
    ///
    /// Rows are tested in order; row `i` is kept iff maximizing `a_i' x` over
    /// the remaining kept rows exceeds `b_i` by more than the redundancy
    /// tolerance (or is unbounded). Of a set of duplicate rows exactly one
    /// survives.
    pub fn remove_redundant(&self, tol: &GeometryTolerances<T>) -> Result<Self> {
        if self.is_empty()? {
            return Err(Error::EmptyPolytope);
        }
        let norm = self.normalized();
        let k = self.num_rows();
        let mut keep = vec![true; k];
        for i in 0..k {
            let others: Vec<usize> = (0..k).filter(|&j| j != i && keep[j]).collect();
            if others.is_empty() {
                continue;
            }
            let g = norm.a.select_rows(others.iter());
            let h = norm.b.select_rows(others.iter());
            let c = -norm.a.row(i).transpose();
            let rep = solve_lp(&c, &g, &h)?;
            match rep.status {
                SolveStatus::Unbounded => {}
                SolveStatus::Optimal => {
                    if -rep.objective <= norm.b[i] + tol.redundancy {
                        keep[i] = false;
                    }
                }
                SolveStatus::Infeasible => return Err(Error::EmptyPolytope),
                SolveStatus::SolverFailure => return Err(Error::NotOptimal("redundancy test".into())),
            }
        }
        let rows: Vec<usize> = (0..k).filter(|&i| keep[i]).collect();
        Ok(Self {
            a: self.a.select_rows(rows.iter()),
            b: self.b.select_rows(rows.iter()),
        })
    }

    /// All vertices of a bounded, non-empty polytope.
    pub fn enumerate_vertices(&self, tol: &GeometryTolerances<T>) -> Result<VertexSet<T>> {
        let d = self.dim();
        if d > MAX_ENUMERATION_DIM {
            return Err(Error::DimensionTooLarge {
                max: MAX_ENUMERATION_DIM,
                got: d,
            });
        }
        self.check_bounded_nonempty()?;
        let norm = self.normalized();
        let k = norm.num_rows();
        let mut vertices: Vec<DVector<T>> = Vec::new();
        let mut mat = vec![T::zero(); d * d];
        let mut rhs = vec![T::zero(); d];
        for combo in Combinations::new(k, d) {
            for (r, &row) in combo.iter().enumerate() {
                for c in 0..d {
                    mat[r * d + c] = norm.a[(row, c)];
                }
                rhs[r] = norm.b[row];
            }
            let Some(x) = solve_square(&mut mat, &mut rhs, d, tol.rank) else {
                continue;
            };
            let x = DVector::from_vec(x);
            let feasible = (0..k).all(|i| norm.a.row(i).dot(&x.transpose()) <= norm.b[i] + tol.feasibility);
            if !feasible {
                continue;
            }
            if vertices.iter().any(|v| (v - &x).norm() <= tol.rank) {
                continue;
            }
            vertices.push(x);
        }
        if vertices.is_empty() {
            return Err(Error::EmptyPolytope);
        }
        Ok(VertexSet { vertices })
    }

    /// Center and radius of the largest inscribed ball.
    ///
    /// The radius comes from the simplex LP. When the optimal ball can slide
    /// (an elongated box, say) the center is not unique; the one returned is
    /// the optimal center nearest the midpoint of the bounding box. It is
    /// found by adding a small proximal term to the LP, which for a small
    /// enough weight selects exactly that projection.
    pub fn chebyshev_center(&self, tol: &GeometryTolerances<T>) -> Result<(DVector<T>, T)> {
        self.check_bounded_nonempty()?;
        let d = self.dim();
        let k = self.num_rows();
        let mut g = DMatrix::zeros(k + 1, d + 1);
        let mut h = DVector::zeros(k + 1);
        for i in 0..k {
            let row = self.a.row(i);
            let n = row.norm();
            for j in 0..d {
                g[(i, j)] = row[j] / n;
            }
            g[(i, d)] = T::one();
            h[i] = self.b[i] / n;
        }
        g[(k, d)] = -T::one();
        let mut c = DVector::zeros(d + 1);
        c[d] = -T::one();

        let lp = solve_lp(&c, &g, &h)?;
        match lp.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Err(Error::EmptyPolytope),
            SolveStatus::Unbounded => return Err(Error::UnboundedPolytope),
            SolveStatus::SolverFailure => return Err(Error::NotOptimal("Chebyshev LP".into())),
        }
        let radius = lp.x[d];
        let simplex_center = lp.x.rows(0, d).into_owned();

        let (lo, hi) = self.bounding_box()?;
        let reference = (&lo + &hi) * T::lit(0.5);
        let width = (&hi - &lo).amax().max(T::eps());
        let mut weight = T::lit(1e-2) / (width * width);
        for _ in 0..4 {
            let mut p = DMatrix::zeros(d + 1, d + 1);
            let mut q = c.clone();
            for j in 0..d {
                p[(j, j)] = weight;
                q[j] = -weight * reference[j];
            }
            let qp = solve_qp(&p, &q, &g, &h, &DMatrix::zeros(0, d + 1), &DVector::zeros(0))?;
            if !qp.is_optimal() {
                break;
            }
            let center = qp.x.rows(0, d).into_owned();
            let inscribed = (0..k)
                .map(|i| h[i] - g.row(i).columns(0, d).dot(&center.transpose()))
                .fold(T::lit(f64::INFINITY), |a, b| a.min(b));
            if inscribed >= radius - tol.rank * T::one().max(radius) {
                return Ok((center, radius));
            }
            weight *= T::lit(1e-2);
        }
        Ok((simplex_center, radius))
    }

    /// Componentwise bounds of a bounded, non-empty polytope.
    pub fn bounding_box(&self) -> Result<(DVector<T>, DVector<T>)> {
        let d = self.dim();
        let mut lo = DVector::zeros(d);
        let mut hi = DVector::zeros(d);
        for j in 0..d {
            for (sign, out) in [(T::one(), &mut lo), (-T::one(), &mut hi)] {
                let mut c = DVector::zeros(d);
                c[j] = sign;
                let lp = solve_lp(&c, &self.a, &self.b)?;
                match lp.status {
                    SolveStatus::Optimal => out[j] = lp.x[j],
                    SolveStatus::Infeasible => return Err(Error::EmptyPolytope),
                    SolveStatus::Unbounded => return Err(Error::UnboundedPolytope),
                    SolveStatus::SolverFailure => return Err(Error::NotOptimal("bounding box LP".into())),
                }
            }
        }
        Ok((lo, hi))
    }

    /// Volume for `d <= 3`, by summing cones from the Chebyshev center over
    /// the facets.
    pub fn volume(&self, tol: &GeometryTolerances<T>) -> Result<T> {
        let d = self.dim();
        if d > 3 {
            return Err(Error::DimensionTooLarge { max: 3, got: d });
        }
        let verts = self.enumerate_vertices(tol)?;
        let norm = self.normalized();
        if d == 1 {
            let (lo, hi) = verts
                .iter()
                .fold((T::lit(f64::INFINITY), T::lit(f64::NEG_INFINITY)), |(lo, hi), v| {
                    (lo.min(v[0]), hi.max(v[0]))
                });
            return Ok(hi - lo);
        }
        let (center, _) = self.chebyshev_center(tol)?;
        let dim_t = T::from_usize(d).unwrap();
        let mut total = T::zero();
        for i in 0..norm.num_rows() {
            // Scaled copies of a row describe the same facet.
            let repeated = (0..i).any(|j| {
                (norm.a.row(i) - norm.a.row(j)).amax() <= tol.rank && (norm.b[i] - norm.b[j]).abs() <= tol.feasibility
            });
            if repeated {
                continue;
            }
            let normal = norm.a.row(i).transpose();
            let height = norm.b[i] - normal.dot(&center);
            let on_facet: Vec<&DVector<T>> = verts
                .iter()
                .filter(|v| (normal.dot(v) - norm.b[i]).abs() <= tol.feasibility)
                .collect();
            let measure = if d == 2 {
                segment_length(&on_facet)
            } else {
                planar_polygon_area(&on_facet, &normal)
            };
            total += height * measure / dim_t;
        }
        Ok(total)
    }
}

fn segment_length<T: Real>(points: &[&DVector<T>]) -> T {
    let mut best = T::zero();
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.max((*p - *q).norm());
        }
    }
    best
}

/// Area of the convex polygon spanned by coplanar points in 3-D.
fn planar_polygon_area<T: Real>(points: &[&DVector<T>], normal: &DVector<T>) -> T {
    if points.len() < 3 {
        return T::zero();
    }
    let n = points.len();
    let centroid = points.iter().fold(DVector::zeros(3), |acc, p| acc + *p) / T::from_usize(n).unwrap();
    // In-plane basis.
    let pick = if normal[0].abs() < T::lit(0.9) {
        DVector::from_column_slice(&[T::one(), T::zero(), T::zero()])
    } else {
        DVector::from_column_slice(&[T::zero(), T::one(), T::zero()])
    };
    let e1 = (&pick - normal * normal.dot(&pick)).normalize();
    let e2 = normal.cross(&e1);
    let mut pts: Vec<(T, T)> = points
        .iter()
        .map(|p| {
            let r = *p - &centroid;
            (r.dot(&e1), r.dot(&e2))
        })
        .collect();
    pts.sort_by(|a, b| {
        let ta = a.1.atan2(a.0);
        let tb = b.1.atan2(b.0);
        ta.partial_cmp(&tb).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut twice = T::zero();
    for i in 0..pts.len() {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % pts.len()];
        twice += x0 * y1 - x1 * y0;
    }
    twice.abs() * T::lit(0.5)
}

/// Gaussian elimination with partial pivoting on a row-major `d x d`
/// system whose rows are unit vectors. `None` if any pivot falls below
/// `rank_tol`.
fn solve_square<T: Real>(mat: &mut [T], rhs: &mut [T], d: usize, rank_tol: T) -> Option<Vec<T>> {
    for col in 0..d {
        let (piv, best) = (col..d)
            .map(|r| (r, mat[r * d + col].abs()))
            .fold((col, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= rank_tol {
            return None;
        }
        if piv != col {
            for c in 0..d {
                mat.swap(piv * d + c, col * d + c);
            }
            rhs.swap(piv, col);
        }
        for r in col + 1..d {
            let f = mat[r * d + col] / mat[col * d + col];
            if f == T::zero() {
                continue;
            }
            for c in col..d {
                let v = mat[col * d + c];
                mat[r * d + c] -= f * v;
            }
            let v = rhs[col];
            rhs[r] -= f * v;
        }
    }
    let mut x = vec![T::zero(); d];
    for r in (0..d).rev() {
        let mut acc = rhs[r];
        for c in r + 1..d {
            acc -= mat[r * d + c] * x[c];
        }
        x[r] = acc / mat[r * d + r];
    }
    Some(x)
}

/// Lexicographic `k`-subsets of `0..n`.
pub(crate) struct Combinations {
    idx: Vec<usize>,
    n: usize,
    done: bool,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        Self {
            idx: (0..k).collect(),
            n,
            done: k > n || k == 0,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
