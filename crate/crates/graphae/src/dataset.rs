//! On-disk datasets: `images/NNNNNN.png` plus one `manifest.jsonl` record
//! per sample.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use graphae_core::model::GraphTarget;
use graphae_core::shapes::{generate_sample, sample_seed, GraphSample, PaddedGraph, ShapeConfig, ShapeKind, Split};
use graphae_core::Tensor;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const IMAGE_DIR: &str = "images";

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// Relative to the dataset directory.
    pub image_path: String,
    /// Pixel coordinates `(x, y)`.
    pub node_coords: Vec<[f64; 2]>,
    pub adjacency: Vec<Vec<u8>>,
    pub shape_kind: ShapeKind,
    /// Per-sample generator seed; regenerates the sample on its own.
    pub seed: u64,
    pub split: Split,
    pub canvas_size: usize,
    pub stroke_width: f64,
}

impl Record {
    pub fn target(&self) -> GraphTarget {
        GraphTarget {
            coords_px: self.node_coords.clone(),
            adjacency: self.adjacency.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub records: Vec<Record>,
}

/// Generates `n` samples into `out_dir`. Sample `i` is drawn from
/// `sample_seed(seed, i)` and assigned to a split by hashing `i`.
///
/// If anything fails, files written by this call are removed again.
pub fn generate_dataset(n: usize, seed: u64, out_dir: &Path, config: &ShapeConfig) -> Result<Manifest> {
    let created_root = !out_dir.exists();
    fs::create_dir_all(out_dir).map_err(Error::io(out_dir))?;
    let image_dir = out_dir.join(IMAGE_DIR);
    let created_images = n > 0 && !image_dir.exists();
    let result = write_dataset(n, seed, out_dir, &image_dir, config);
    if result.is_err() {
        if created_root {
            let _ = fs::remove_dir_all(out_dir);
        } else {
            if created_images {
                let _ = fs::remove_dir_all(&image_dir);
            }
            let _ = fs::remove_file(out_dir.join(MANIFEST_FILE));
        }
    }
    result
}

fn write_dataset(n: usize, seed: u64, out_dir: &Path, image_dir: &Path, config: &ShapeConfig) -> Result<Manifest> {
    if n > 0 {
        fs::create_dir_all(image_dir).map_err(Error::io(image_dir))?;
    }
    let records: Vec<Record> = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = sample_seed(seed, i as u64);
            let sample = generate_sample(s, config)?;
            let rel = format!("{IMAGE_DIR}/{i:06}.png");
            image_io::write_gray(
                &out_dir.join(&rel),
                &sample.image,
                sample.canvas_size,
                sample.canvas_size,
            )?;
            Ok(Record {
                image_path: rel,
                node_coords: sample.node_coords,
                adjacency: sample.adjacency,
                shape_kind: sample.kind,
                seed: s,
                split: Split::of_index(i as u64),
                canvas_size: config.canvas_size,
                stroke_width: config.stroke_width,
            })
        })
        .collect::<Result<_>>()?;
    let path = out_dir.join(MANIFEST_FILE);
    let file = fs::File::create(&path).map_err(Error::io(&path))?;
    let mut w = BufWriter::new(file);
    for r in &records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::format(&path, e))?;
        w.write_all(b"\n").map_err(Error::io(&path))?;
    }
    w.flush().map_err(Error::io(&path))?;
    Ok(Manifest {
        root: out_dir.to_path_buf(),
        records,
    })
}

/// Images and graphs for a list of samples.
#[derive(Debug, Clone)]
pub struct Batch {
    pub indices: Vec<usize>,
    /// `[batch, 1, size, size]`
    pub images: Tensor,
    pub graphs: Vec<PaddedGraph>,
    pub targets: Vec<GraphTarget>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let file = fs::File::open(&path).map_err(Error::io(&path))?;
        let mut records = Vec::new();
        for (line_no, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(Error::io(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: Record =
                serde_json::from_str(&line).map_err(|e| Error::format(&path, format!("line {}: {e}", line_no + 1)))?;
            records.push(r);
        }
        Ok(Manifest {
            root: dir.to_path_buf(),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.records.len())
            .filter(|&i| self.records[i].split == split)
            .collect()
    }

    pub fn canvas_size(&self) -> Option<usize> {
        self.records.first().map(|r| r.canvas_size)
    }

    pub fn load_image(&self, index: usize) -> Result<Vec<f32>> {
        let r = &self.records[index];
        let path = self.root.join(&r.image_path);
        let (data, w, h) = image_io::read_gray(&path)?;
        if w != r.canvas_size || h != r.canvas_size {
            return Err(Error::format(
                &path,
                format!("expected {0}x{0} pixels, found {w}x{h}", r.canvas_size),
            ));
        }
        Ok(data)
    }

    pub fn load_sample(&self, index: usize) -> Result<GraphSample> {
        let r = &self.records[index];
        Ok(GraphSample {
            kind: r.shape_kind,
            canvas_size: r.canvas_size,
            image: self.load_image(index)?,
            node_coords: r.node_coords.clone(),
            adjacency: r.adjacency.clone(),
        })
    }

    /// Loads the given samples; graphs are padded to `n_max` slots.
    pub fn load_batch(&self, indices: &[usize], n_max: usize) -> Result<Batch> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.records.len()) {
            return Err(Error::format(
                self.root.join(MANIFEST_FILE),
                format!("index {bad} out of range for {} records", self.records.len()),
            ));
        }
        let size = self.records.first().map_or(0, |r| r.canvas_size);
        let images: Vec<Vec<f32>> = indices.par_iter().map(|&i| self.load_image(i)).collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(indices.len() * size * size);
        for img in &images {
            if img.len() != size * size {
                return Err(Error::format(&self.root, "samples have different canvas sizes"));
            }
            data.extend_from_slice(img);
        }
        let graphs = indices
            .iter()
            .map(|&i| {
                let r = &self.records[i];
                if r.node_coords.len() > n_max {
                    return Err(Error::format(
                        self.root.join(&r.image_path),
                        format!("{} nodes exceed n_max = {n_max}", r.node_coords.len()),
                    ));
                }
                Ok(PaddedGraph::new(&r.node_coords, &r.adjacency, n_max))
            })
            .collect::<Result<_>>()?;
        Ok(Batch {
            indices: indices.to_vec(),
            images: Tensor::from_vec([indices.len(), 1, size, size], data),
            graphs,
            targets: indices.iter().map(|&i| self.records[i].target()).collect(),
        })
    }
}
