//! Hard and soft Vietoris-Rips / Čech complexes, face counts and Euler characteristic.

use std::cmp::Ordering;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::geometry::{build_graph, lex_cmp, GeometricGraph, RegionSpec};
use crate::meb::min_enclosing_ball_radius;
use crate::point_process::PointCloud;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Rips,
    Cech,
}

/// Retention probabilities `(p_1, p_2, ...)`; vertices are never thinned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RhoVector(Vec<f64>);

impl RhoVector {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if let Some((i, p)) = probabilities.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return config(format!("p_{} = {p} is not a probability", i + 1));
        }
        Ok(RhoVector(probabilities))
    }

    pub fn ones(len: usize) -> Self {
        RhoVector(vec![1.0; len])
    }

    /// `p_i` for `i ≥ 1`.
    pub fn p(&self, i: usize) -> f64 {
        self.0[i - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_all_ones(&self) -> bool {
        self.0.iter().all(|&p| p == 1.0)
    }
}

impl TryFrom<Vec<f64>> for RhoVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        RhoVector::new(v)
    }
}

impl From<RhoVector> for Vec<f64> {
    fn from(r: RhoVector) -> Self {
        r.0
    }
}

/// Faces of one dimension: strictly increasing vertex tuples, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceList {
    width: usize,
    data: Vec<u32>,
}

impl FaceList {
    fn new(width: usize) -> Self {
        FaceList { width, data: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[u32] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, u32> {
        self.data.chunks_exact(self.width)
    }

    pub fn contains(&self, face: &[u32]) -> bool {
        debug_assert_eq!(face.len(), self.width);
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.get(mid).cmp(face) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return true,
            }
        }
        false
    }

    fn push(&mut self, face: &[u32]) {
        self.data.extend_from_slice(face);
    }
}

#[derive(Debug, Clone)]
pub struct SimplicialComplex {
    pub cloud: Arc<PointCloud>,
    pub flavor: Flavor,
    pub r: f64,
    pub k_max: usize,
    pub rho: Option<RhoVector>,
    pub seed: u64,
    faces: Vec<FaceList>,
}

impl SimplicialComplex {
    /// Faces of dimension `k` (empty past `k_max`).
    pub fn faces(&self, k: usize) -> Option<&FaceList> {
        self.faces.get(k)
    }

    pub fn contains(&self, face: &[u32]) -> bool {
        !face.is_empty() && self.faces.get(face.len() - 1).is_some_and(|l| l.contains(face))
    }

    pub fn f_vector(&self) -> Vec<u64> {
        self.faces.iter().map(|l| l.len() as u64).collect()
    }

    /// Every `(k-1)`-subface of every `k`-face is present.
    pub fn is_downward_closed(&self) -> bool {
        let mut sub = Vec::new();
        for k in 1..self.faces.len() {
            for face in self.faces[k].iter() {
                for skip in 0..face.len() {
                    sub.clear();
                    sub.extend(face.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v));
                    if !self.faces[k - 1].contains(&sub) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// One CSV per dimension with columns `v0..vk`.
    pub fn write_faces_csv<W: Write>(&self, k: usize, out: W) -> Result<()> {
        let list = self.faces(k).ok_or_else(|| Error::Input(format!("no faces of dimension {k}")))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record((0..=k).map(|i| format!("v{i}")))?;
        for face in list.iter() {
            w.write_record(face.iter().map(u32::to_string))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds dimension `k + 1` from dimension `k`: two faces sharing their first
/// `k` vertices, closed by an edge between their last vertices, give a candidate.
fn extend(prev: &FaceList, graph: &GeometricGraph, mut accept: impl FnMut(&[u32]) -> bool) -> FaceList {
    let w = prev.width;
    let mut next = FaceList::new(w + 1);
    let mut cand = vec![0u32; w + 1];
    let n = prev.len();
    let mut s = 0;
    while s < n {
        let prefix = &prev.get(s)[..w - 1];
        let mut e = s + 1;
        while e < n && &prev.get(e)[..w - 1] == prefix {
            e += 1;
        }
        cand[..w - 1].copy_from_slice(prefix);
        for a in s..e {
            let la = prev.get(a)[w - 1];
            for b in a + 1..e {
                let lb = prev.get(b)[w - 1];
                if graph.has_edge(la, lb) {
                    cand[w - 1] = la;
                    cand[w] = lb;
                    if accept(&cand) {
                        next.push(&cand);
                    }
                }
            }
        }
        s = e;
    }
    next
}

fn skeleton(graph: &GeometricGraph) -> Vec<FaceList> {
    let mut vertices = FaceList::new(1);
    vertices.data = (0..graph.vertex_count() as u32).collect();
    let mut edges = FaceList::new(2);
    for &(i, j) in &graph.edges {
        edges.push(&[i, j]);
    }
    vec![vertices, edges]
}

/// Clique complex of `graph` up to dimension `k_max`.
pub fn build_rips(graph: &GeometricGraph, k_max: usize) -> SimplicialComplex {
    let mut faces = skeleton(graph);
    faces.truncate(k_max + 1);
    while faces.len() <= k_max {
        let next = extend(faces.last().expect("nonempty"), graph, |_| true);
        faces.push(next);
    }
    SimplicialComplex {
        cloud: graph.cloud.clone(),
        flavor: Flavor::Rips,
        r: graph.r,
        k_max,
        rho: None,
        seed: 0,
        faces,
    }
}

/// Čech complex at scale `r`: tuples whose smallest enclosing ball has radius `≤ r/2`.
pub fn build_cech(cloud: Arc<PointCloud>, r: f64, k_max: usize) -> Result<SimplicialComplex> {
    let graph = build_graph(cloud, r, None, 0)?;
    Ok(build_cech_from_graph(&graph, k_max))
}

/// Čech complex whose candidates come from the (unthinned) Rips skeleton `graph`.
pub fn build_cech_from_graph(graph: &GeometricGraph, k_max: usize) -> SimplicialComplex {
    let cloud = graph.cloud.clone();
    let half = graph.r / 2.0;
    let mut faces = skeleton(graph);
    faces.truncate(k_max + 1);
    let mut pts: Vec<&[f64]> = Vec::with_capacity(k_max + 1);
    while faces.len() <= k_max {
        let next = extend(faces.last().expect("nonempty"), graph, |cand| {
            pts.clear();
            pts.extend(cand.iter().map(|&v| cloud.point(v as usize)));
            min_enclosing_ball_radius(&pts) <= half
        });
        faces.push(next);
    }
    SimplicialComplex { cloud, flavor: Flavor::Cech, r: graph.r, k_max, rho: None, seed: 0, faces }
}

/// Downward-closed soft thinning.
///
/// A `k`-face (`k ≥ 1`) survives when all of its `(k-1)`-faces survived and
/// its own coin `face_uniform(seed, face) < p_k`. A fixed admissible `k`-face
/// therefore survives with probability `∏ p_i^{C(k+1, i+1)}`.
pub fn soft_thin(complex: &SimplicialComplex, rho: &RhoVector, seed: u64) -> Result<SimplicialComplex> {
    if complex.rho.is_some() {
        return config("complex has already been thinned");
    }
    if rho.len() < complex.k_max {
        return config(format!("rho has {} entries but the complex goes up to dimension {}", rho.len(), complex.k_max));
    }
    let mut faces: Vec<FaceList> = Vec::with_capacity(complex.faces.len());
    faces.push(complex.faces[0].clone());
    let mut sub = Vec::with_capacity(complex.k_max + 1);
    for k in 1..complex.faces.len() {
        let p = rho.p(k);
        let mut kept = FaceList::new(k + 1);
        let below = &faces[k - 1];
        for face in complex.faces[k].iter() {
            if rng::face_uniform(seed, face) >= p {
                continue;
            }
            let closed = k == 1
                || (0..face.len()).all(|skip| {
                    sub.clear();
                    sub.extend(face.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v));
                    below.contains(&sub)
                });
            if closed {
                kept.push(face);
            }
        }
        faces.push(kept);
    }
    Ok(SimplicialComplex { rho: Some(rho.clone()), seed, faces, ..complex.clone_shell() })
}

impl SimplicialComplex {
    fn clone_shell(&self) -> SimplicialComplex {
        SimplicialComplex {
            cloud: self.cloud.clone(),
            flavor: self.flavor,
            r: self.r,
            k_max: self.k_max,
            rho: self.rho.clone(),
            seed: self.seed,
            faces: Vec::new(),
        }
    }
}

/// `f[k]` = number of `k`-faces whose leftmost point lies in `region`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceCounts {
    pub f: Vec<u64>,
    pub region: RegionSpec,
}

pub fn face_counts(complex: &SimplicialComplex, region: &RegionSpec) -> Result<FaceCounts> {
    region.check_dim(complex.cloud.dim())?;
    let f = if region.is_all() {
        complex.f_vector()
    } else {
        let cloud = &complex.cloud;
        complex
            .faces
            .iter()
            .map(|list| {
                list.iter()
                    .filter(|face| {
                        let lmp = face
                            .iter()
                            .copied()
                            .reduce(|best, v| {
                                match lex_cmp(cloud.point(v as usize), cloud.point(best as usize)) {
                                    Ordering::Less => v,
                                    Ordering::Equal if v < best => v,
                                    _ => best,
                                }
                            })
                            .expect("faces are nonempty");
                        region.contains(cloud.point(lmp as usize))
                    })
                    .count() as u64
            })
            .collect()
    };
    Ok(FaceCounts { f, region: region.clone() })
}

/// `χ = f_0 − f_1 + f_2 − …`.
pub fn euler_characteristic(counts: &FaceCounts) -> i64 {
    counts.f.iter().enumerate().map(|(k, &c)| if k % 2 == 0 { c as i64 } else { -(c as i64) }).sum()
}
