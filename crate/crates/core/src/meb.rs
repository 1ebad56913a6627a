//! Smallest enclosing ball of a handful of points (Welzl's recursion).
//!
//! Face tests only ever ask about `k_max + 1` points, so the plain recursive
//! form without move-to-front is plenty.

use crate::geometry::dist2;

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    fn contains(&self, p: &[f64]) -> bool {
        let r = self.radius;
        dist2(&self.center, p).sqrt() <= r + 1e-12 * (1.0 + r)
    }
}

/// Radius of the smallest ball containing every point.
pub fn min_enclosing_ball_radius(points: &[&[f64]]) -> f64 {
    min_enclosing_ball(points).radius
}

pub fn min_enclosing_ball(points: &[&[f64]]) -> Ball {
    let Some(first) = points.first() else {
        return Ball { center: Vec::new(), radius: 0.0 };
    };
    let d = first.len();
    let mut boundary: Vec<&[f64]> = Vec::with_capacity(d + 1);
    welzl(points, &mut boundary, d)
}

fn welzl<'a>(points: &[&'a [f64]], boundary: &mut Vec<&'a [f64]>, d: usize) -> Ball {
    if points.is_empty() || boundary.len() == d + 1 {
        return circumball(boundary, d);
    }
    let (p, rest) = points.split_last().expect("nonempty");
    let ball = welzl(rest, boundary, d);
    if ball.contains(p) {
        return ball;
    }
    boundary.push(p);
    let ball = welzl(rest, boundary, d);
    boundary.pop();
    ball
}

/// Smallest ball with every support point on its boundary.
///
/// Affinely dependent support points (probability zero for continuous
/// inputs) are dropped before solving.
fn circumball(support: &[&[f64]], d: usize) -> Ball {
    match support {
        [] => Ball { center: vec![0.0; d], radius: -1.0 },
        [p] => Ball { center: p.to_vec(), radius: 0.0 },
        [p0, rest @ ..] => {
            let mut dirs: Vec<Vec<f64>> = Vec::new();
            let mut ortho: Vec<Vec<f64>> = Vec::new();
            for q in rest {
                let v: Vec<f64> = q.iter().zip(p0.iter()).map(|(a, b)| a - b).collect();
                let mut w = v.clone();
                for u in &ortho {
                    let proj = dot(&w, u);
                    for (wi, ui) in w.iter_mut().zip(u) {
                        *wi -= proj * ui;
                    }
                }
                let norm = dot(&w, &w).sqrt();
                if norm > 1e-12 * dot(&v, &v).sqrt().max(f64::MIN_POSITIVE) {
                    ortho.push(w.iter().map(|x| x / norm).collect());
                    dirs.push(v);
                }
            }
            let m = dirs.len();
            let mut a = vec![vec![0.0; m + 1]; m];
            for i in 0..m {
                for j in 0..m {
                    a[i][j] = 2.0 * dot(&dirs[i], &dirs[j]);
                }
                a[i][m] = dot(&dirs[i], &dirs[i]);
            }
            let lambda = solve(a);
            let mut center = p0.to_vec();
            for (l, v) in lambda.iter().zip(&dirs) {
                for (c, vi) in center.iter_mut().zip(v) {
                    *c += l * vi;
                }
            }
            let radius = support.iter().map(|p| dist2(&center, p)).fold(0.0, f64::max).sqrt();
            Ball { center, radius }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let m = a.len();
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap_or(col);
        a.swap(col, piv);
        let p = a[col][col];
        if p == 0.0 {
            continue;
        }
        for row in col + 1..m {
            let f = a[row][col] / p;
            if f != 0.0 {
                for k in col..=m {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let mut s = a[row][m];
        for k in row + 1..m {
            s -= a[row][k] * x[k];
        }
        x[row] = if a[row][row] != 0.0 { s / a[row][row] } else { 0.0 };
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_point() {
        assert_eq!(min_enclosing_ball_radius(&[&[3.0, 4.0]]), 0.0);
    }

    #[test]
    fn two_points() {
        assert_relative_eq!(min_enclosing_ball_radius(&[&[0.0, 0.0], &[1.0, 0.0]]), 0.5);
    }

    #[test]
    fn equilateral_triangle() {
        let h = 3f64.sqrt() / 2.0;
        let r = min_enclosing_ball_radius(&[&[0.0, 0.0], &[1.0, 0.0], &[0.5, h]]);
        assert_relative_eq!(r, 1.0 / 3f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn obtuse_triangle_uses_long_side() {
        let r = min_enclosing_ball_radius(&[&[0.0, 0.0], &[2.0, 0.0], &[1.0, 0.1]]);
        assert_relative_eq!(r, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn regular_tetrahedron() {
        let pts = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
        assert_relative_eq!(min_enclosing_ball_radius(&refs), 3f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn one_dimensional_is_half_range() {
        let r = min_enclosing_ball_radius(&[&[0.3], &[-0.2], &[0.9], &[0.1]]);
        assert_relative_eq!(r, 0.55, max_relative = 1e-12);
    }

    #[test]
    fn duplicates_and_collinear() {
        let r = min_enclosing_ball_radius(&[&[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0]]);
        assert_relative_eq!(r, 0.5, max_relative = 1e-12);
        let r = min_enclosing_ball_radius(&[&[0.0, 0.0], &[0.5, 0.0], &[1.0, 0.0]]);
        assert_relative_eq!(r, 0.5, max_relative = 1e-12);
    }
}
