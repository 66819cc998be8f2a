//! Small dense vector helpers plus the two convex subproblems the calculus
//! needs: the minimum-norm point of a polytope and the projection onto a
//! finitely generated cone.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|x| k * x).collect()
}

/// `a + k * b`
pub fn axpy(a: &[f64], k: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + k * y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

pub fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

pub fn mat_t_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let cols = m.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; cols];
    for (row, xi) in m.iter().zip(x) {
        for (o, r) in out.iter_mut().zip(row) {
            *o += r * xi;
        }
    }
    out
}

pub fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

pub fn to_dmatrix(m: &[Vec<f64>]) -> DMatrix<f64> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    DMatrix::from_fn(rows, cols, |i, j| m[i][j])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn sup_dist(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| dist(x, y)).fold(0.0, f64::max)
}

/// Uniform point on the unit sphere of R^n.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        if let Some(u) = normalized(&g) {
            return u;
        }
    }
}

/// Uniform point in the ball B(center, radius).
pub fn random_in_ball<R: Rng + ?Sized>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let n = center.len();
    let u = random_unit(rng, n);
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    axpy(center, r, &u)
}

/// Uniform point in the box [lo, hi].
pub fn random_in_box<R: Rng + ?Sized>(rng: &mut R, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter().zip(hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect()
}

/// Deterministic, roughly uniform unit directions. Exact circle points in
/// 2D, a Fibonacci lattice in 3D, signed axes in 1D and seeded Gaussian
/// draws beyond.
pub fn sphere_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_d1e5);
            let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(count + 2 * n);
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                dirs.push(e.clone());
                e[i] = -1.0;
                dirs.push(e);
            }
            while dirs.len() < count.max(2 * n) {
                dirs.push(random_unit(&mut rng, n));
            }
            dirs
        }
    }
}

/// Least-squares solve of `m * x = b` through the SVD; tolerant of rank loss.
fn lstsq(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-13 * smax.max(1e-300);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(m.ncols()))
}

/// Minimum-norm point of co(points), by Wolfe's algorithm. Returns the
/// point and its barycentric weights.
pub fn min_norm_point(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = points.len();
    assert!(k > 0, "min_norm_point needs at least one point");
    let n = points[0].len();
    let scale2 = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-12 * scale2;

    let start = (0..k).min_by(|&a, &b| dot(&points[a], &points[a]).total_cmp(&dot(&points[b], &points[b]))).unwrap();
    let mut set: Vec<usize> = vec![start];
    let mut w: Vec<f64> = vec![1.0];
    let mut x = points[start].clone();

    let combine = |set: &[usize], w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&i, &wi) in set.iter().zip(w) {
            for (o, p) in out.iter_mut().zip(&points[i]) {
                *o += wi * p;
            }
        }
        out
    };

    for _major in 0..(10 * k + 50) {
        let xx = dot(&x, &x);
        let (j, best) = (0..k).map(|i| (i, dot(&x, &points[i]))).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        if best >= xx - tol || set.contains(&j) {
            break;
        }
        set.push(j);
        w.push(0.0);

        for _minor in 0..(10 * k + 50) {
            // Affine minimizer over aff(set): [G 1; 1' 0][a; mu] = [0; 1].
            let s = set.len();
            let mut m = DMatrix::<f64>::zeros(s + 1, s + 1);
            for a in 0..s {
                for b in 0..s {
                    m[(a, b)] = dot(&points[set[a]], &points[set[b]]);
                }
                m[(a, s)] = 1.0;
                m[(s, a)] = 1.0;
            }
            let mut rhs = DVector::<f64>::zeros(s + 1);
            rhs[s] = 1.0;
            let sol = lstsq(&m, &rhs);
            let alpha: Vec<f64> = (0..s).map(|i| sol[i]).collect();
            if alpha.iter().all(|&a| a > 1e-14) {
                w = alpha;
                x = combine(&set, &w);
                break;
            }
            let mut theta: f64 = 1.0;
            for i in 0..s {
                if alpha[i] <= 1e-14 {
                    let d = w[i] - alpha[i];
                    if d > 0.0 {
                        theta = theta.min(w[i] / d);
                    }
                }
            }
            for i in 0..s {
                w[i] = theta * alpha[i] + (1.0 - theta) * w[i];
            }
            let mut keep_set = Vec::with_capacity(s);
            let mut keep_w = Vec::with_capacity(s);
            for i in 0..s {
                if w[i] > 1e-14 {
                    keep_set.push(set[i]);
                    keep_w.push(w[i]);
                }
            }
            if keep_set.is_empty() {
                keep_set.push(set[s - 1]);
                keep_w.push(1.0);
            }
            let total: f64 = keep_w.iter().sum();
            set = keep_set;
            w = keep_w.iter().map(|v| v / total).collect();
            x = combine(&set, &w);
        }
    }

    let mut weights = vec![0.0; k];
    for (&i, &wi) in set.iter().zip(&w) {
        weights[i] += wi;
    }
    (x, weights)
}

/// Projection of `v` onto cone(generators) = {G λ : λ ≥ 0}, by the
/// Lawson–Hanson active-set method for nonnegative least squares.
pub fn cone_projection(generators: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let gens: Vec<&Vec<f64>> = generators.iter().filter(|g| norm(g) > 0.0).collect();
    let k = gens.len();
    if k == 0 {
        return vec![0.0; n];
    }
    let g = DMatrix::from_fn(n, k, |i, j| gens[j][i]);
    let b = DVector::from_column_slice(v);
    let tol = 1e-12 * (1.0 + norm(v)) * g.norm().max(1.0);

    let mut lambda = DVector::<f64>::zeros(k);
    let mut passive = vec![false; k];
    for _outer in 0..(3 * k + 10) {
        let residual = &b - &g * &lambda;
        let grad = g.transpose() * residual;
        let mut pick = None;
        let mut best = tol;
        for j in 0..k {
            if !passive[j] && grad[j] > best {
                best = grad[j];
                pick = Some(j);
            }
        }
        let Some(t) = pick else { break };
        passive[t] = true;

        for _inner in 0..(3 * k + 10) {
            let idx: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
            let sub_g = DMatrix::from_fn(n, idx.len(), |i, c| g[(i, idx[c])]);
            let s_p = lstsq(&sub_g, &b);
            let mut s = DVector::<f64>::zeros(k);
            for (c, &j) in idx.iter().enumerate() {
                s[j] = s_p[c];
            }
            if idx.iter().all(|&j| s[j] > 0.0) {
                lambda = s;
                break;
            }
            let mut alpha: f64 = 1.0;
            for &j in &idx {
                if s[j] <= 0.0 {
                    let d = lambda[j] - s[j];
                    if d > 0.0 {
                        alpha = alpha.min(lambda[j] / d);
                    }
                }
            }
            lambda = &lambda + (&s - &lambda) * alpha;
            for &j in &idx {
                if lambda[j] <= 1e-15 {
                    lambda[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    let p = &g * &lambda;
    p.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_norm_of_segment_crossing_origin_is_zero() {
        let (x, w) = min_norm_point(&[vec![-1.0, 1.0], vec![1.0, 1.0]]);
        assert!((x[0]).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!((w[0] - 0.5).abs() < 1e-12);
        let (x, _) = min_norm_point(&[vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, 3.0]]);
        assert!(norm(&x) < 1e-12);
    }

    #[test]
    fn min_norm_of_far_triangle_hits_edge() {
        // Triangle with nearest point in the middle of edge (2,-1)-(2,1).
        let (x, _) = min_norm_point(&[vec![2.0, -1.0], vec![2.0, 1.0], vec![4.0, 0.0]]);
        assert!((x[0] - 2.0).abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    #[test]
    fn cone_projection_cases() {
        let gens = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let p = cone_projection(&gens, &[2.0, -3.0]);
        assert!((p[0] - 2.0).abs() < 1e-12 && p[1].abs() < 1e-12);
        let p = cone_projection(&gens, &[-2.0, -3.0]);
        assert!(norm(&p) < 1e-12);
        let p = cone_projection(&gens, &[0.5, 0.25]);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn sphere_directions_are_unit() {
        for n in 1..6 {
            for d in sphere_directions(n, 40) {
                assert!((norm(&d) - 1.0).abs() < 1e-12);
            }
        }
    }
}
