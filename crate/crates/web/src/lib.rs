//! WebAssembly bindings for the browser demo: grow a cluster step by step
//! and draw it, summarize a spectrum, and sample long excursions.

use std::fmt::Write as _;

use cyldla::dla::{Cluster, DropOptions, GrowUntil};
use cyldla::graph;
use cyldla::render;
use cyldla::rng::{self, SimRng};
use cyldla::snapshot::Snapshot;
use cyldla::spectral;
use cyldla::walk::{self, Cylinder, ExcursionMode};
use wasm_bindgen::prelude::*;

/// A growing cluster together with its random stream.
#[wasm_bindgen]
pub struct ClusterView {
    cluster: Cluster,
    rng: SimRng,
    opts: DropOptions,
}

impl ClusterView {
    pub fn create(spec: &str, seed: u32) -> Result<ClusterView, String> {
        let g = graph::from_spec(spec).map_err(|e| e.to_string())?;
        Ok(ClusterView { cluster: Cluster::from_graph(g), rng: rng::from_seed(seed.into()), opts: DropOptions::default() })
    }

    pub fn try_grow(&mut self, particles: u32) -> Result<(), String> {
        self.cluster
            .grow(GrowUntil::Particles(particles.into()), &mut self.rng, &self.opts)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot::from_cluster(&self.cluster)
    }
}

#[wasm_bindgen]
impl ClusterView {
    #[wasm_bindgen(constructor)]
    pub fn new(spec: &str, seed: u32) -> Result<ClusterView, JsError> {
        ClusterView::create(spec, seed).map_err(|e| JsError::new(&e))
    }

    /// Drops `particles` more particles.
    pub fn grow(&mut self, particles: u32) -> Result<(), JsError> {
        self.try_grow(particles).map_err(|e| JsError::new(&e))
    }

    pub fn particles(&self) -> f64 {
        self.cluster.t() as f64
    }

    /// Number of vertices of the base graph, the image width.
    pub fn width(&self) -> u32 {
        self.cluster.n() as u32
    }

    /// Lowest empty layer, the image height.
    pub fn height(&self) -> u32 {
        self.cluster.lowest_empty_layer() as u32
    }

    /// `width * height` RGBA pixels, top row first, colored by stick order.
    pub fn rgba(&self) -> Vec<u8> {
        render::rgba(&self.snapshot()).2
    }

    /// Occupied sites per layer.
    pub fn loads(&self) -> Vec<u32> {
        self.cluster.loads().iter().map(|&l| l as u32).collect()
    }

    /// Fraction of sites occupied in layers `1..=m`.
    pub fn density(&self, m: u32) -> f64 {
        self.cluster.density_upto(m.into())
    }

    pub fn snapshot_text(&self) -> String {
        self.snapshot().to_text()
    }
}

pub fn spectral_text(spec: &str) -> Result<String, String> {
    let g = graph::from_spec(spec).map_err(|e| e.to_string())?;
    let p = spectral::eigen_profile(&g);
    let mut out = String::new();
    let _ = writeln!(out, "{}: n = {}, d = {}", g.label(), p.n, p.d);
    let _ = writeln!(out, "lambda_2 = {:.6}", p.lambda_2());
    let _ = writeln!(out, "lambda_min = {:.6}", p.lambda_min());
    let _ = writeln!(out, "lambda = {:.6}, gap = {:.6}", p.lambda, p.gap);
    if g.n() <= 512 {
        match spectral::mixing_time(&g, 100_000) {
            Ok(t) => match t.steps() {
                Some(s) => {
                    let _ = writeln!(out, "lazy mixing time = {s}");
                }
                None => out.push_str("lazy mixing time above 100000\n"),
            },
            Err(e) => {
                let _ = writeln!(out, "lazy mixing time: {e}");
            }
        }
    }
    Ok(out)
}

/// Text summary of the walk spectrum and, for small graphs, the lazy mixing time.
#[wasm_bindgen]
pub fn spectral_summary(spec: &str) -> Result<String, JsError> {
    spectral_text(spec).map_err(|e| JsError::new(&e))
}

pub fn excursion_stats(spec: &str, alpha: f64, trials: u32, seed: u32) -> Result<Vec<f64>, String> {
    let cyl = Cylinder::new(graph::from_spec(spec).map_err(|e| e.to_string())?);
    let r = walk::long_excursion_frequency(&cyl, alpha, trials.into(), seed.into(), ExcursionMode::Exact)
        .map_err(|e| e.to_string())?;
    let p = r.positive.estimate;
    Ok(vec![p.mean, p.std_error, r.positive.bound_value, r.negative.mean])
}

/// `[frequency, standard error, lower bound, negative frequency]` for
/// positive `alpha`-long excursions, sampled exactly.
#[wasm_bindgen]
pub fn excursion_frequency(spec: &str, alpha: f64, trials: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    excursion_stats(spec, alpha, trials, seed).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn view_grows_and_draws() {
        let mut v = ClusterView::create("cycle:10", 3).unwrap();
        v.try_grow(25).unwrap();
        assert_eq!(v.particles(), 25.0);
        assert_eq!(v.rgba().len(), (v.width() * v.height() * 4) as usize);
        assert_eq!(v.loads().iter().sum::<u32>(), 35);
        assert!(v.snapshot_text().starts_with("cyldla v1 n=10 d=2 t=25"));
        assert!(ClusterView::create("cycle:1", 1).is_err());
    }

    #[test]
    fn summaries() {
        assert!(spectral_text("complete:4").unwrap().contains("lambda = 0.333333"));
        let s = excursion_stats("cycle:4", 2.0, 5000, 1).unwrap();
        assert!(s[0] > s[2]);
        assert!(excursion_stats("cycle:4", 1.0, 10, 1).is_err());
    }
}
