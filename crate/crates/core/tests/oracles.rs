//! Fast constructions checked against brute-force oracles.

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use softplex::meb::min_enclosing_ball;
use softplex::{
    build_cech, build_graph, build_rips, leftmost_point, min_enclosing_ball_radius, soft_thin, Density, PointCloud,
    RhoVector,
};

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize, spread: f64) -> PointCloud {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>() * spread).collect()).collect();
    PointCloud::from_points(&pts).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn brute_edges(cloud: &PointCloud, r: f64) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for i in 0..cloud.len() {
        for j in i + 1..cloud.len() {
            if dist(cloud.point(i), cloud.point(j)) <= r {
                out.push((i as u32, j as u32));
            }
        }
    }
    out
}

#[test]
fn grid_search_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for instance in 0..50 {
        let d = 1 + instance % 3;
        let n = rng.random_range(0..=2000);
        let spread = rng.random_range(0.5..20.0);
        let cloud = Arc::new(random_cloud(&mut rng, n, d, spread));
        let r = spread * rng.random_range(0.001..0.2);
        let graph = build_graph(cloud.clone(), r, None, 0).unwrap();
        assert_eq!(graph.edges, brute_edges(&cloud, r), "instance {instance}: n={n} d={d} r={r}");
    }
}

#[test]
fn grid_search_handles_lattice_ties() {
    // integer lattice at spacing exactly r: every axis neighbour sits on the threshold
    let pts: Vec<Vec<f64>> = (0..12).flat_map(|i| (0..12).map(move |j| vec![i as f64, j as f64])).collect();
    let cloud = Arc::new(PointCloud::from_points(&pts).unwrap());
    let graph = build_graph(cloud.clone(), 1.0, None, 0).unwrap();
    assert_eq!(graph.edges, brute_edges(&cloud, 1.0));
    assert_eq!(graph.edges.len(), 2 * 12 * 11);
}

fn subsets(n: usize, size: usize) -> Vec<Vec<u32>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v as u32);
            rec(v + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}

fn brute_faces(cloud: &PointCloud, size: usize, admissible: impl Fn(&[&[f64]]) -> bool) -> Vec<Vec<u32>> {
    subsets(cloud.len(), size)
        .into_iter()
        .filter(|s| {
            let pts: Vec<&[f64]> = s.iter().map(|&v| cloud.point(v as usize)).collect();
            admissible(&pts)
        })
        .collect()
}

fn rips_admissible(r: f64) -> impl Fn(&[&[f64]]) -> bool {
    move |pts| pts.iter().enumerate().all(|(a, p)| pts[a + 1..].iter().all(|q| dist(p, q) <= r))
}

#[test]
fn rips_matches_subset_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for instance in 0..30 {
        let d = 1 + instance % 3;
        let n = rng.random_range(1..=25);
        let cloud = Arc::new(random_cloud(&mut rng, n, d, 1.0));
        let r = rng.random_range(0.1..0.8);
        let k_max = 4;
        let complex = build_rips(&build_graph(cloud.clone(), r, None, 0).unwrap(), k_max);
        for k in 0..=k_max {
            let fast: Vec<Vec<u32>> = complex.faces(k).unwrap().iter().map(<[u32]>::to_vec).collect();
            assert_eq!(fast, brute_faces(&cloud, k + 1, rips_admissible(r)), "instance {instance}, k={k}");
        }
        assert!(complex.is_downward_closed());
    }
}

#[test]
fn cech_matches_subset_enumeration_and_sits_inside_rips() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for instance in 0..30 {
        let d = 1 + instance % 3;
        let n = rng.random_range(1..=20);
        let cloud = Arc::new(random_cloud(&mut rng, n, d, 1.0));
        let r = rng.random_range(0.2..0.9);
        let cech = build_cech(cloud.clone(), r, 3).unwrap();
        let rips = build_rips(&build_graph(cloud.clone(), r, None, 0).unwrap(), 3);
        for k in 0..=3 {
            let fast: Vec<Vec<u32>> = cech.faces(k).unwrap().iter().map(<[u32]>::to_vec).collect();
            let oracle = brute_faces(&cloud, k + 1, |pts| min_enclosing_ball_radius(pts) <= r / 2.0);
            assert_eq!(fast, oracle, "instance {instance}, k={k}");
            let rips_k = rips.faces(k).unwrap();
            assert!(fast.iter().all(|f| rips_k.contains(f)));
            if d == 1 {
                assert_eq!(fast.len(), rips_k.len(), "Helly in d=1");
            }
        }
        assert!(cech.is_downward_closed());
    }
}

/// Best centre found by a shrinking grid search; an upper bound on the true radius.
///
/// The grid is rotated by the golden angle at every level so that the kinks of
/// the max-distance function never stay aligned with it.
fn grid_search_radius(pts: &[&[f64]]) -> f64 {
    let cost = |c: [f64; 2]| pts.iter().map(|p| dist(p, &c)).fold(0.0, f64::max);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let mut center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let mut half = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let steps = 40;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut level = 0;
    while half > 1e-10 {
        let (sin, cos) = (golden * level as f64).sin_cos();
        let mut best = (cost(center), center);
        for i in 0..=steps {
            let a = -half + 2.0 * half * i as f64 / steps as f64;
            for j in 0..=steps {
                let b = -half + 2.0 * half * j as f64 / steps as f64;
                let c = [center[0] + a * cos - b * sin, center[1] + a * sin + b * cos];
                let v = cost(c);
                if v < best.0 {
                    best = (v, c);
                }
            }
        }
        center = best.1;
        half *= 0.9;
        level += 1;
    }
    cost(center)
}

/// Smallest enclosing circle by trying every pair midpoint and every circumcircle.
fn enumerated_radius(pts: &[&[f64]]) -> f64 {
    let covers = |c: [f64; 2], r: f64| pts.iter().all(|p| dist(p, &c) <= r * (1.0 + 1e-12) + 1e-15);
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let c = [(pts[i][0] + pts[j][0]) / 2.0, (pts[i][1] + pts[j][1]) / 2.0];
            let r = dist(pts[i], &c);
            if covers(c, r) {
                best = best.min(r);
            }
            for k in j + 1..pts.len() {
                let (a, b, e) = (pts[i], pts[j], pts[k]);
                let det = 2.0 * (a[0] * (b[1] - e[1]) + b[0] * (e[1] - a[1]) + e[0] * (a[1] - b[1]));
                if det.abs() < 1e-14 {
                    continue;
                }
                let sq = |p: &[f64]| p[0] * p[0] + p[1] * p[1];
                let c = [
                    (sq(a) * (b[1] - e[1]) + sq(b) * (e[1] - a[1]) + sq(e) * (a[1] - b[1])) / det,
                    (sq(a) * (e[0] - b[0]) + sq(b) * (a[0] - e[0]) + sq(e) * (b[0] - a[0])) / det,
                ];
                let r = dist(a, &c);
                if covers(c, r) {
                    best = best.min(r);
                }
            }
        }
    }
    best
}

#[test]
fn min_enclosing_ball_matches_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for instance in 0..200 {
        let size = 2 + instance % 3;
        let pts: Vec<Vec<f64>> = (0..size).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let ball = min_enclosing_ball(&refs);
        for p in &refs {
            assert!(dist(p, &ball.center) <= ball.radius + 1e-9);
        }
        let exact = enumerated_radius(&refs);
        assert!((ball.radius - exact).abs() < 1e-6, "instance {instance}: {} vs {exact}", ball.radius);
        let grid = grid_search_radius(&refs);
        assert!(grid >= ball.radius - 1e-9, "instance {instance}: grid found a smaller ball {grid}");
        assert!(grid - ball.radius < 1e-6, "instance {instance}: grid {grid} vs {}", ball.radius);
    }
}

fn binomial(a: u64, b: u64) -> u64 {
    if b > a {
        return 0;
    }
    (0..b).fold(1, |acc, i| acc * (a - i) / (i + 1))
}

#[test]
fn soft_thinning_marginal_survival() {
    let rho = RhoVector::new(vec![0.9, 0.8, 0.7]).unwrap();
    let seeds = 20_000u64;
    for k in 1..=3usize {
        let pts: Vec<Vec<f64>> = (0..=k).map(|i| vec![0.01 * i as f64]).collect();
        let cloud = Arc::new(PointCloud::from_points(&pts).unwrap());
        let hard = build_rips(&build_graph(cloud, 1.0, None, 0).unwrap(), k);
        let top: Vec<u32> = (0..=k as u32).collect();
        let survived = (0..seeds).filter(|&s| soft_thin(&hard, &rho, s).unwrap().contains(&top)).count();
        let p: f64 = (1..=k).map(|i| rho.p(i).powi(binomial(k as u64 + 1, i as u64 + 1) as i32)).product();
        let freq = survived as f64 / seeds as f64;
        let stderr = (p * (1.0 - p) / seeds as f64).sqrt();
        assert!((freq - p).abs() < 3.0 * stderr, "k={k}: {freq} vs {p}");
    }
}

#[test]
fn edge_thinning_is_binomial_in_expectation() {
    let cloud = Arc::new(softplex::sample_binomial(200, &Density::unit_cube(2).unwrap(), 1).unwrap());
    let full = build_graph(cloud.clone(), 0.15, None, 0).unwrap().edges.len() as f64;
    let p = 0.3;
    let reps = 1000;
    let mean = (0..reps).map(|s| build_graph(cloud.clone(), 0.15, Some(p), s).unwrap().edges.len() as f64).sum::<f64>()
        / reps as f64;
    let stderr = (full * p * (1.0 - p) / reps as f64).sqrt();
    assert!((mean - full * p).abs() < 3.0 * stderr, "{mean} vs {}", full * p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thinned_complexes_stay_downward_closed(
        seed in any::<u64>(),
        n in 1usize..40,
        r in 0.05f64..0.6,
        p in prop::collection::vec(0.0f64..=1.0, 3),
        cech in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = Arc::new(random_cloud(&mut rng, n, 2, 1.0));
        let hard = if cech {
            build_cech(cloud, r, 3).unwrap()
        } else {
            build_rips(&build_graph(cloud, r, None, 0).unwrap(), 3)
        };
        let soft = soft_thin(&hard, &RhoVector::new(p).unwrap(), seed).unwrap();
        prop_assert!(hard.is_downward_closed());
        prop_assert!(soft.is_downward_closed());
        for k in 0..=3 {
            prop_assert!(soft.faces(k).unwrap().iter().all(|f| hard.contains(f)));
        }
    }

    #[test]
    fn graph_edges_respect_threshold(seed in any::<u64>(), n in 0usize..200, r in 0.01f64..0.5, d in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = Arc::new(random_cloud(&mut rng, n, d, 1.0));
        let g = build_graph(cloud.clone(), r, None, 0).unwrap();
        prop_assert!(g.edges.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(g.edges.iter().all(|&(i, j)| i < j && dist(cloud.point(i as usize), cloud.point(j as usize)) <= r));
    }

    #[test]
    fn leftmost_point_ignores_order(seed in any::<u64>(), n in 1usize..30, shuffle in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = random_cloud(&mut rng, n, 2, 1.0);
        let mut idx: Vec<usize> = (0..n).collect();
        let base = leftmost_point(&idx, &cloud).unwrap();
        let mut shuffler = ChaCha8Rng::seed_from_u64(shuffle);
        for i in (1..n).rev() {
            idx.swap(i, shuffler.random_range(0..=i));
        }
        prop_assert_eq!(leftmost_point(&idx, &cloud).unwrap(), base);
    }
}
